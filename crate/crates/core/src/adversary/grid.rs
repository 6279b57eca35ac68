//! Ring-and-ball discretization of a metric space around its 1-median, and
//! the exhaustive oracle over functions that are constant on the balls.

use rayon::prelude::*;

use super::{pick_best, Guarantee, OracleReport, SeparationOracle};
use crate::error::{Error, Result};
use crate::lipschitz::{self, DiscreteFunction, SamplingDistribution, SlackVector, REPAIR_TOL};
use crate::metric::{MedianInfo, MetricSpace};

pub const DEFAULT_CLASS_CAP: u64 = 10_000_000;
const TOL: f64 = 1e-12;

/// `gamma = delta / (48 * 6^beta + 6)`.
pub fn grid_gamma_for_delta(delta: f64, beta: f64) -> f64 {
    delta / (48.0 * 6f64.powf(beta) + 6.0)
}

fn grid_delta_for_gamma(gamma: f64, beta: f64) -> f64 {
    gamma * (48.0 * 6f64.powf(beta) + 6.0)
}

/// A grid ball: points of one ring within `gamma * scale` of a center.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    /// 1-based ring index; `k + 1` is the inner region.
    pub ring: usize,
    pub members: Vec<usize>,
    pub representative: usize,
    /// `2 * gamma * scale(ring)`.
    pub target_diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridStructure {
    pub median: MedianInfo,
    pub gamma: f64,
    pub beta: f64,
    pub delta: f64,
    /// Number of outer rings; the inner region has index `k + 1`.
    pub k: usize,
    /// `ring_scale[i]` for `i` in `1..=k+1`: `2^-i` for outer rings and `m`
    /// for the inner region. Index 0 is unused.
    pub ring_scale: Vec<f64>,
    pub ring_of: Vec<usize>,
    pub balls: Vec<Ball>,
    pub ball_of: Vec<usize>,
}

impl GridStructure {
    pub fn scale_of_point(&self, x: usize) -> f64 {
        self.ring_scale[self.ring_of[x]]
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.balls.iter().map(|b| b.representative).collect()
    }

    /// Largest ball count in any single ring.
    pub fn max_balls_per_ring(&self) -> usize {
        (1..=self.k + 1)
            .map(|r| self.balls.iter().filter(|b| b.ring == r).count())
            .max()
            .unwrap_or(0)
    }

    fn value_step(&self, ball: &Ball) -> f64 {
        self.gamma * self.ring_scale[ball.ring]
    }
}

/// Builds rings `R_i = {2^-i < d(x, o) <= 2^-(i-1)}` for `i = 1..k` and the
/// inner region `{d(x, o) <= 2m}` with `k = ceil(log2(1 / 2m))`, then covers
/// each ring greedily with balls of radius `gamma * scale` (the median's ball
/// first, so the median represents it).
///
/// `gamma` defaults to `delta / (48 * 6^beta + 6)`; with an override the
/// implied `delta` is reported instead.
pub fn build_grid(space: &MetricSpace, beta: f64, delta: f64, gamma_override: Option<f64>) -> Result<GridStructure> {
    if !(delta > 0.0 && delta.is_finite()) && gamma_override.is_none() {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(format!("beta must be nonnegative, got {beta}")));
    }
    let (gamma, delta) = match gamma_override {
        Some(g) if g > 0.0 && g.is_finite() => (g, grid_delta_for_gamma(g, beta)),
        Some(g) => return Err(Error::InvalidConfig(format!("gamma must be positive, got {g}"))),
        None => (grid_gamma_for_delta(delta, beta), delta),
    };
    let n = space.len();
    let median = space.one_median();
    let o = median.index;
    let m = median.mean_distance;

    let k = if m > 0.0 {
        (1.0 / (2.0 * m)).log2().ceil().max(0.0) as usize
    } else {
        0
    };
    let mut ring_scale = vec![0.0; k + 2];
    for (i, s) in ring_scale.iter_mut().enumerate().take(k + 1).skip(1) {
        *s = 0.5f64.powi(i as i32);
    }
    ring_scale[k + 1] = m;

    let ring_of: Vec<usize> = (0..n)
        .map(|x| {
            let d = space.dist(x, o);
            if d <= 2.0 * m + TOL {
                return k + 1;
            }
            (1..=k).find(|&i| d > 0.5f64.powi(i as i32)).unwrap_or(k + 1)
        })
        .collect();

    let mut balls = Vec::new();
    let mut ball_of = vec![usize::MAX; n];
    let mut rings: Vec<usize> = (1..=k + 1).collect();
    rings.rotate_right(1);
    for ring in rings {
        let radius = gamma * ring_scale[ring];
        let mut centers: Vec<usize> = (0..n).filter(|&x| ring_of[x] == ring).collect();
        if let Some(pos) = centers.iter().position(|&x| x == o) {
            centers.remove(pos);
            centers.insert(0, o);
        }
        for c in centers {
            if ball_of[c] != usize::MAX {
                continue;
            }
            let members: Vec<usize> = (0..n)
                .filter(|&y| ring_of[y] == ring && ball_of[y] == usize::MAX && space.dist(c, y) <= radius + TOL)
                .collect();
            for &y in &members {
                ball_of[y] = balls.len();
            }
            balls.push(Ball {
                ring,
                members,
                representative: c,
                target_diameter: 2.0 * radius,
            });
        }
    }

    Ok(GridStructure {
        median,
        gamma,
        beta,
        delta,
        k,
        ring_scale,
        ring_of,
        balls,
        ball_of,
    })
}

#[derive(Debug, Clone)]
pub struct GridOracle<'a> {
    space: &'a MetricSpace,
    grid: GridStructure,
    cap: u64,
}

impl<'a> GridOracle<'a> {
    pub fn new(space: &'a MetricSpace, grid: GridStructure) -> Self {
        Self {
            space,
            grid,
            cap: DEFAULT_CLASS_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn grid(&self) -> &GridStructure {
        &self.grid
    }
}

impl SeparationOracle for GridOracle<'_> {
    fn separate(&self, p: &SamplingDistribution) -> Result<OracleReport> {
        doubling_enum_oracle_with_cap(self.space, &self.grid, p, self.cap)
    }

    fn guarantee(&self) -> Guarantee {
        Guarantee::ClassExact { delta: self.grid.delta }
    }
}

pub fn doubling_enum_oracle(space: &MetricSpace, grid: &GridStructure, p: &SamplingDistribution) -> Result<OracleReport> {
    doubling_enum_oracle_with_cap(space, grid, p, DEFAULT_CLASS_CAP)
}

/// Candidate values for one representative: multiples of its value step
/// allowed by the relaxed condition against the median.
fn candidate_values(space: &MetricSpace, grid: &GridStructure, ball: usize) -> Vec<f64> {
    let b = &grid.balls[ball];
    let o = grid.median.index;
    if b.representative == o {
        return vec![0.0];
    }
    let step = grid.value_step(b);
    let bound = space.dist(b.representative, o) + step + grid.gamma * grid.ring_scale[grid.ring_of[o]];
    let top = (bound / step + 1e-9).floor() as i64;
    (-top..=top).map(|v| v as f64 * step).collect()
}

struct Enumerator<'a> {
    space: &'a MetricSpace,
    reps: Vec<usize>,
    slack: Vec<f64>,
    candidates: Vec<Vec<f64>>,
    /// Number of points and probability mass per ball.
    count: Vec<f64>,
    mass: Vec<f64>,
    n: f64,
}

impl Enumerator<'_> {
    fn objective(&self, vals: &[f64]) -> f64 {
        let avg = vals.iter().zip(&self.count).map(|(v, c)| v * c).sum::<f64>() / self.n;
        vals.iter().zip(&self.mass).map(|(v, w)| w * (v - avg).abs()).sum()
    }

    fn compatible(&self, vals: &[f64], b: usize, v: f64) -> bool {
        (0..b).all(|a| {
            (v - vals[a]).abs()
                <= self.space.dist(self.reps[a], self.reps[b]) + self.slack[a] + self.slack[b] + TOL
        })
    }

    fn search(&self, vals: &mut Vec<f64>, best: &mut (f64, Vec<f64>)) {
        let b = vals.len();
        if b == self.reps.len() {
            let cand = (self.objective(vals), vals.clone());
            let cur = std::mem::replace(best, (0.0, Vec::new()));
            *best = pick_best(cur, cand);
            return;
        }
        for &v in &self.candidates[b] {
            if self.compatible(vals, b, v) {
                vals.push(v);
                self.search(vals, best);
                vals.pop();
            }
        }
    }
}

/// Exhaustive search over the discretized class: every representative takes
/// a multiple of `gamma * scale` subject to the pairwise relaxed condition
/// with slacks `gamma * scale`, and each ball is constant.
pub fn doubling_enum_oracle_with_cap(
    space: &MetricSpace,
    grid: &GridStructure,
    p: &SamplingDistribution,
    cap: u64,
) -> Result<OracleReport> {
    let n = space.len();
    if p.len() != n || grid.ball_of.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    let nb = grid.balls.len();
    let candidates: Vec<Vec<f64>> = (0..nb).map(|b| candidate_values(space, grid, b)).collect();
    let estimate: f64 = candidates.iter().map(|c| c.len() as f64).product();
    if estimate > cap as f64 {
        return Err(Error::ClassTooLarge { estimate, cap });
    }
    let mut count = vec![0.0; nb];
    let mut mass = vec![0.0; nb];
    for x in 0..n {
        count[grid.ball_of[x]] += 1.0;
        mass[grid.ball_of[x]] += p.probs()[x];
    }
    let en = Enumerator {
        space,
        reps: grid.representatives(),
        slack: grid.balls.iter().map(|b| grid.value_step(b)).collect(),
        candidates,
        count,
        mass,
        n: n as f64,
    };

    // Ball 0 holds the median and is pinned to zero; fan out on ball 1.
    let best = if nb >= 2 {
        en.candidates[1]
            .par_iter()
            .filter(|&&v| en.compatible(&[0.0], 1, v))
            .map(|&v| {
                let mut vals = vec![0.0, v];
                let mut best = (f64::NEG_INFINITY, Vec::new());
                en.search(&mut vals, &mut best);
                best
            })
            .reduce(|| (f64::NEG_INFINITY, Vec::new()), pick_best)
    } else {
        (0.0, vec![0.0])
    };

    let values: Vec<f64> = (0..n).map(|x| best.1[grid.ball_of[x]]).collect();
    let witness = DiscreteFunction::new(values)?;
    let value = lipschitz::error(&witness, p)?;
    Ok(OracleReport {
        witness: lipschitz::mean_zero(&witness),
        value,
        guarantee: Guarantee::ClassExact { delta: grid.delta },
    })
}

/// Maps a class member to a nearby Lipschitz function.
///
/// Representative values are repaired with slacks `gamma * scale`; every
/// other point takes the midpoint of the upper and lower Lipschitz envelopes
/// `min_r f'(r) + d(x, r)` and `max_r f'(r) - d(x, r)` over representatives.
pub fn qdelta_to_lipschitz(space: &MetricSpace, f: &DiscreteFunction, grid: &GridStructure) -> Result<DiscreteFunction> {
    let n = space.len();
    f.check_len(n)?;
    let v = f.values();
    for ball in &grid.balls {
        let rv = v[ball.representative];
        if let Some(&x) = ball.members.iter().find(|&&x| (v[x] - rv).abs() > 1e-12) {
            return Err(Error::NotInClass(format!("point {x} differs from its ball representative")));
        }
    }
    let reps = grid.representatives();
    let sub = space.restrict(&reps);
    let rep_vals = DiscreteFunction::new(reps.iter().map(|&r| v[r]).collect())?;
    let slack = SlackVector::new(grid.balls.iter().map(|b| grid.value_step(b)).collect())?;
    // Slack is only spent when the representatives actually violate the
    // Lipschitz condition; otherwise the minimal repair would shift them.
    let repaired = if lipschitz::is_lipschitz(&sub, &rep_vals, TOL) {
        Ok(rep_vals)
    } else {
        lipschitz::lipschitz_adjust(&sub, &rep_vals, &slack)
    }
    .map_err(|e| match e {
        Error::RelaxedConditionViolated(a, b) => Error::NotInClass(format!(
            "representatives {} and {} violate the relaxed condition",
            reps[a], reps[b]
        )),
        other => other,
    })?;
    let rv = repaired.values();
    let out: Vec<f64> = (0..n)
        .map(|x| {
            let (upper, lower) = envelopes(space, &reps, rv, x);
            0.5 * (upper + lower)
        })
        .collect();
    DiscreteFunction::new(out)
}

/// Upper and lower Lipschitz envelopes at `x` of values fixed on `reps`.
pub(crate) fn envelopes(space: &MetricSpace, reps: &[usize], vals: &[f64], x: usize) -> (f64, f64) {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for (&r, &fv) in reps.iter().zip(vals) {
        upper = upper.min(fv + space.dist(x, r));
        lower = lower.max(fv - space.dist(x, r));
    }
    (upper, lower)
}

/// Per-point deviation bound `3 gamma scale(x)` for the repaired function.
pub fn repair_bound(grid: &GridStructure, x: usize) -> f64 {
    3.0 * grid.gamma * grid.scale_of_point(x) + REPAIR_TOL
}
