//! Fixture suite runner. One CSV row per `*.json` file, in file-name order.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use oneshot::adversary::OracleKind;
use oneshot::solver::{auto_oracle, build_oracle, constraint_generation, SolverConfig};
use oneshot::{io, SamplingDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Failure;

pub const DEFAULT_GAMMA: f64 = 0.01;
pub const SCHEMA: &str = "# oneshot bench v1";
const PROBES: usize = 4;

/// Runs the suite. The `probe_min` column is the smallest oracle value over a
/// few seeded random distributions, a check that the solved distribution
/// beats them.
pub fn run(suite: &Path, seed: u64, oracle: Option<OracleKind>, gamma: f64, timing: bool) -> Result<String, Failure> {
    let entries = std::fs::read_dir(suite).map_err(|e| Failure::Input(format!("{}: {e}", suite.display())))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::Input(e.to_string()))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut out = String::new();
    writeln!(out, "{SCHEMA}").unwrap();
    write!(out, "name,n,oracle,value,deterministic_m,lower_bound,iterations,converged,probe_min").unwrap();
    out.push_str(if timing { ",time_s\n" } else { "\n" });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for path in &paths {
        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let json = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let space = io::parse_metric(&json).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let kind = oracle.unwrap_or_else(|| auto_oracle(&space));
        let config = SolverConfig {
            gamma_override: Some(gamma),
            ..SolverConfig::default().with_oracle(kind)
        };

        let start = Instant::now();
        let r = constraint_generation(&space, &config)?;
        let elapsed = start.elapsed().as_secs_f64();

        let separator = build_oracle(&space, &config, r.beta)?;
        let mut probe_min = f64::INFINITY;
        for _ in 0..PROBES {
            let w: Vec<f64> = (0..space.len()).map(|_| rng.gen::<f64>()).collect();
            let p = SamplingDistribution::from_weights(&w)?;
            probe_min = probe_min.min(separator.separate(&p)?.value);
        }

        write!(
            out,
            "{name},{},{kind},{},{},{},{},{},{probe_min}",
            space.len(),
            r.upper,
            r.mean_distance,
            r.lower_bound,
            r.iterations,
            r.converged
        )
        .unwrap();
        if timing {
            write!(out, ",{elapsed:.3}").unwrap();
        }
        out.push('\n');
        eprintln!("bench: {name} done in {elapsed:.2}s");
    }
    Ok(out)
}
