//! The continuous problem on `[0, 1]`: the optimal density is uniform on
//! `[2 - sqrt 3, sqrt 3 - 1]` with worst-case error `1 - sqrt 3 / 2`.
//!
//! The closed forms live next to exact evaluations of the quantities they
//! summarize, and a discretized cross-check against the finite oracles.

use serde::{Deserialize, Serialize};

use crate::adversary::{exact_oracle, line_dp_oracle, LineClassParams, OracleReport};
use crate::error::{Error, Result};
use crate::lipschitz::{DiscreteFunction, SamplingDistribution};
use crate::metric::MetricSpace;

const MEAN_ZERO_TOL: f64 = 1e-9;
const SCAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSolution {
    /// Left end of the support; the support is `[c, 1 - c]`.
    pub c: f64,
    pub support: (f64, f64),
    /// Worst-case expected error of the uniform density on the support.
    pub value: f64,
    /// Break point of the worst two-segment function.
    pub b_star: f64,
}

pub fn optimal_interval() -> IntervalSolution {
    let r3 = 3f64.sqrt();
    let c = 2.0 - r3;
    IntervalSolution {
        c,
        support: (c, r3 - 1.0),
        value: 1.0 - r3 / 2.0,
        b_star: (r3 - 1.0) / 2.0,
    }
}

/// `f_b(x) = 1/2 + b^2 - b - |b - x|`, a tent with zero mean on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSegmentFunction {
    b: f64,
}

impl TwoSegmentFunction {
    pub fn new(b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::DomainError(format!("b must lie in [0, 1], got {b}")));
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Peak height `1/2 + b^2 - b`; the zeros sit at `b +- height`.
    pub fn height(&self) -> f64 {
        0.5 + self.b * self.b - self.b
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.height() - (self.b - x).abs()
    }

    /// `x -> f_b(1 - x)`, which is `f_{1-b}`.
    pub fn mirror(&self) -> Self {
        Self { b: 1.0 - self.b }
    }

    /// `f_b` at `grid_n` evenly spaced points of `[0, 1]`.
    pub fn sample(&self, grid_n: usize) -> DiscreteFunction {
        DiscreteFunction::new(unit_grid(grid_n).into_iter().map(|x| self.eval(x)).collect())
            .expect("tent values are finite")
    }

    /// Breakpoints of `f_b` inside `(lo, hi)`, with the ends, sorted.
    fn pieces(&self, lo: f64, hi: f64) -> Vec<f64> {
        let h = self.height();
        let mut pts = vec![lo, hi];
        pts.extend([self.b, self.b - h, self.b + h].into_iter().filter(|&t| t > lo && t < hi));
        pts.sort_by(f64::total_cmp);
        pts
    }
}

/// `grid_n` evenly spaced points `i / (grid_n - 1)`.
pub fn unit_grid(grid_n: usize) -> Vec<f64> {
    match grid_n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..grid_n).map(|i| i as f64 / (grid_n - 1) as f64).collect(),
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(0.0..0.5).contains(&c) {
        return Err(Error::DomainError(format!("c must lie in [0, 1/2), got {c}")));
    }
    Ok(())
}

/// Expected error of the uniform density on `[c, 1 - c]` against `f_b`, i.e.
/// the mean of `|f_b|` over the support.
///
/// `f_b` is linear between its kink and its zeros, so the integral is summed
/// exactly piece by piece. For `b <= c` this is
/// `(b^4 + (1/2 - c)^2) / (1 - 2c)` as long as both zeros stay clear of the
/// support ends.
pub fn family_error(b: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    let f = TwoSegmentFunction::new(b)?;
    let (lo, hi) = (c, 1.0 - c);
    let pts = f.pieces(lo, hi);
    let total: f64 = pts
        .windows(2)
        .map(|w| (f.eval(w[0]) + f.eval(w[1])).abs() / 2.0 * (w[1] - w[0]))
        .sum();
    Ok(total / (hi - lo))
}

/// `d/db family_error(b, c)`, from `d f_b / db = 2b - 1 - sign(b - x)`.
fn family_error_slope(b: f64, c: f64) -> f64 {
    let f = TwoSegmentFunction { b };
    let (lo, hi) = (c, 1.0 - c);
    let pts = f.pieces(lo, hi);
    let total: f64 = pts
        .windows(2)
        .map(|w| {
            let mid = (w[0] + w[1]) / 2.0;
            let s = f.eval(mid).signum();
            s * (2.0 * b - 1.0 - (b - mid).signum()) * (w[1] - w[0])
        })
        .sum();
    total / (hi - lo)
}

/// Worst break point `b` in `[0, 1/2]` for the uniform density on
/// `[c, 1 - c]`, and its error.
///
/// A coarse scan finds the local maxima, the sign change of the slope next to
/// each is bisected, and `b = c` is compared as well. Values within `1e-12` of
/// each other count as ties and go to the smaller `b`; at the optimal `c` the
/// maximum is attained both at `(sqrt 3 - 1) / 2` and at `1/2`.
pub fn worst_b(c: f64) -> Result<(f64, f64)> {
    check_c(c)?;
    let steps = (0.5 / SCAN_STEP).round() as usize;
    let bs: Vec<f64> = (0..=steps).map(|i| i as f64 * SCAN_STEP).collect();
    let es = bs.iter().map(|&b| family_error(b, c)).collect::<Result<Vec<f64>>>()?;

    let mut candidates = vec![(c.min(0.5), family_error(c.min(0.5), c)?)];
    for i in 0..=steps {
        let left = i == 0 || es[i] >= es[i - 1];
        let right = i == steps || es[i] >= es[i + 1];
        if !(left && right) {
            continue;
        }
        let mut lo = bs[i.saturating_sub(1)];
        let mut hi = bs[(i + 1).min(steps)];
        if family_error_slope(lo, c) > 0.0 && family_error_slope(hi, c) < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if family_error_slope(mid, c) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let b = 0.5 * (lo + hi);
            candidates.push((b, family_error(b, c)?));
        } else {
            candidates.push((bs[i], es[i]));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best = candidates[0];
    for &(b, e) in &candidates[1..] {
        if e > best.1 + 1e-12 {
            best = (b, e);
        }
    }
    Ok(best)
}

/// Expected error at the deterministic sample point `x` when the function is
/// `f_b` or its mirror with probability 1/2 each, `b = (sqrt 3 - 1) / 2`.
///
/// Both functions have zero mean, so this is `(|f_b(x)| + |f_b(1 - x)|) / 2`.
/// On `[0, 1/2]` it falls linearly until `x = b - c` and then stays at `b^2`.
pub fn yao_curve(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::DomainError(format!("x must lie in [0, 1], got {x}")));
    }
    let f = TwoSegmentFunction::new(optimal_interval().b_star)?;
    Ok(0.5 * (f.eval(x).abs() + f.eval(1.0 - x).abs()))
}

/// A sample point and reference value for a set of functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Closeness {
    /// Grid index of the sample point.
    pub index: usize,
    pub y: f64,
    /// `(1/|S|) sum_f |f(x) - y|`.
    pub value: f64,
}

fn check_set(set: &[DiscreteFunction]) -> Result<usize> {
    let Some(first) = set.first() else {
        return Err(Error::DomainError("closeness of an empty set".into()));
    };
    let n = first.len();
    if n == 0 {
        return Err(Error::DomainError("functions have no grid points".into()));
    }
    for f in set {
        f.check_len(n)?;
        if f.average().abs() > MEAN_ZERO_TOL {
            return Err(Error::DomainError(format!(
                "function has mean {} on the grid, expected zero",
                f.average()
            )));
        }
    }
    Ok(n)
}

/// Best sample point when every function is estimated by its value there:
/// `min_x (1/|S|) sum_f |f(x) - Avg(f)|`, with `y = Avg(f) = 0`.
///
/// Lowest index wins ties.
pub fn closeness(set: &[DiscreteFunction]) -> Result<Closeness> {
    let n = check_set(set)?;
    let k = set.len() as f64;
    let mut best = Closeness {
        index: 0,
        y: 0.0,
        value: f64::INFINITY,
    };
    for x in 0..n {
        let v = set.iter().map(|f| f.values()[x].abs()).sum::<f64>() / k;
        if v < best.value {
            best = Closeness { index: x, y: 0.0, value: v };
        }
    }
    Ok(best)
}

/// Like [`closeness`] but with a free reference value `y` per sample point,
/// taken as the median of `{f(x)}`.
///
/// With a free `y` any two functions that cross are 0-close, the tent and its
/// mirror included, so this variant does not measure estimation error.
pub fn closeness_free_reference(set: &[DiscreteFunction]) -> Result<Closeness> {
    let n = check_set(set)?;
    let k = set.len() as f64;
    let mut best = Closeness {
        index: 0,
        y: 0.0,
        value: f64::INFINITY,
    };
    let mut vals = Vec::with_capacity(set.len());
    for x in 0..n {
        vals.clear();
        vals.extend(set.iter().map(|f| f.values()[x]));
        vals.sort_by(f64::total_cmp);
        let y = vals[(vals.len() - 1) / 2];
        let v = vals.iter().map(|a| (a - y).abs()).sum::<f64>() / k;
        if v < best.value {
            best = Closeness { index: x, y, value: v };
        }
    }
    Ok(best)
}

/// A density on `[0, 1]`, to be put on an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalDensity {
    /// Equal weight on every grid point in `[lo, hi]`.
    UniformOn { lo: f64, hi: f64 },
    /// All mass on the grid point nearest `at` (lower one on ties).
    PointMass { at: f64 },
    /// Explicit nonnegative weights, one per grid point.
    Weights { weights: Vec<f64> },
}

impl IntervalDensity {
    pub fn discretize(&self, grid_n: usize) -> Result<SamplingDistribution> {
        let xs = unit_grid(grid_n);
        if xs.is_empty() {
            return Err(Error::DomainError("grid needs at least one point".into()));
        }
        match self {
            Self::UniformOn { lo, hi } => {
                let w: Vec<f64> = xs
                    .iter()
                    .map(|&x| if x >= lo - 1e-12 && x <= hi + 1e-12 { 1.0 } else { 0.0 })
                    .collect();
                SamplingDistribution::from_weights(&w)
            }
            Self::PointMass { at } => {
                let mut idx = 0;
                for (i, &x) in xs.iter().enumerate() {
                    if (x - at).abs() < (xs[idx] - at).abs() - 1e-12 {
                        idx = i;
                    }
                }
                Ok(SamplingDistribution::point_mass(xs.len(), idx))
            }
            Self::Weights { weights } => {
                if weights.len() != xs.len() {
                    return Err(Error::DimensionMismatch {
                        expected: xs.len(),
                        found: weights.len(),
                    });
                }
                SamplingDistribution::from_weights(weights)
            }
        }
    }
}

/// Oracle used for the discretized check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalOracle {
    Exact { cap: usize },
    LineDp { gamma: f64 },
}

/// Worst-case error of `density` on the `grid_n`-point discretization of
/// `[0, 1]`, against discrete Lipschitz functions (or the line class).
pub fn numeric_interval_adversary(
    density: &IntervalDensity,
    grid_n: usize,
    oracle: IntervalOracle,
) -> Result<OracleReport> {
    if grid_n < 2 {
        return Err(Error::DomainError(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let p = density.discretize(grid_n)?;
    let space = MetricSpace::from_line(unit_grid(grid_n))?;
    match oracle {
        IntervalOracle::Exact { cap } => exact_oracle(&space, &p, cap),
        IntervalOracle::LineDp { gamma } => {
            let line = space.as_line().ok_or(Error::NotALine)?;
            line_dp_oracle(line, &p, &LineClassParams::from_gamma(gamma, grid_n)?)
        }
    }
}
