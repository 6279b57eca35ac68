#![allow(dead_code)]

use oneshot::MetricSpace;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// `n >= 2` sorted uniform coordinates, normalized.
pub fn random_line(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    c.sort_by(f64::total_cmp);
    MetricSpace::from_line(c).unwrap().normalize_diameter().unwrap()
}

/// `n` uniform points in the unit square, normalized.
pub fn random_planar(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    MetricSpace::from_points(2, &pts).unwrap().normalize_diameter().unwrap()
}

pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    if rng.gen_bool(0.5) {
        random_line(rng, n)
    } else {
        random_planar(rng, n)
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> oneshot::SamplingDistribution {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    oneshot::SamplingDistribution::from_weights(&w).unwrap()
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bench")
}
