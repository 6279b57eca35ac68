//! Discrete functions on a metric space, Lipschitz tests and repair, and the
//! estimation-error functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricSpace;

/// Additive slack on the repaired function's contracts.
pub const REPAIR_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-12;

/// One real value per point of a metric space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFunction {
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self { values })
    }

    /// `f(x) = d(x, center)`.
    pub fn distance_from(space: &MetricSpace, center: usize) -> Self {
        Self {
            values: space.row(center).to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn average(&self) -> f64 {
        average(self)
    }

    pub fn mean_zero(&self) -> Self {
        mean_zero(self)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Nonnegative per-point slacks for the relaxed Lipschitz condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackVector {
    s: Vec<f64>,
}

impl SlackVector {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidSlack(format!("entry {i} is {}", s[i])));
        }
        Ok(Self { s })
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self { s: vec![0.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }
}

/// A probability vector over the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDistribution {
    p: Vec<f64>,
}

impl SamplingDistribution {
    /// Accepts `p` if it lies on the simplex within `1e-12`; tiny negative
    /// round-off is clamped to zero.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        let mut p = p;
        for (i, v) in p.iter_mut().enumerate() {
            if !v.is_finite() || *v < -SIMPLEX_TOL {
                return Err(Error::InvalidDistribution(format!("p[{i}] = {v}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL * p.len().max(1) as f64 {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self { p })
    }

    /// Normalizes nonnegative weights to sum to one.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -SIMPLEX_TOL) {
            return Err(Error::InvalidDistribution("negative or non-finite weight".into()));
        }
        let clamped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self {
            p: clamped.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Self { p }
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

pub fn average(f: &DiscreteFunction) -> f64 {
    if f.values.is_empty() {
        return 0.0;
    }
    f.values.iter().sum::<f64>() / f.values.len() as f64
}

/// True iff `|f(x) - f(y)| <= d(x, y) + tol` for every pair.
pub fn is_lipschitz(space: &MetricSpace, f: &DiscreteFunction, tol: f64) -> bool {
    first_relaxed_violation(space, f, None, tol).is_none()
}

/// True iff `|f(x) - f(y)| <= d(x, y) + s_x + s_y` for every pair.
pub fn relaxed_lipschitz_check(space: &MetricSpace, f: &DiscreteFunction, s: &SlackVector) -> bool {
    first_relaxed_violation(space, f, Some(s), 0.0).is_none()
}

fn first_relaxed_violation(
    space: &MetricSpace,
    f: &DiscreteFunction,
    s: Option<&SlackVector>,
    tol: f64,
) -> Option<(usize, usize)> {
    let v = &f.values;
    let n = v.len().min(space.len());
    let slack = |i: usize| s.map_or(0.0, |s| s.s[i]);
    for i in 0..n {
        for j in (i + 1)..n {
            if (v[i] - v[j]).abs() > space.dist(i, j) + slack(i) + slack(j) + tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Turns a function satisfying the relaxed Lipschitz condition into a
/// 1-Lipschitz function moving each value `x` by at most `s_x`.
///
/// Points are fixed one at a time. Each round computes, for every unset
/// point, the floor `t_x = max over set y of f'(y) - d(x, y)` and sets the
/// point maximizing `max(f(x) - s_x, t_x)` to that maximum. The result is the
/// pointwise smallest Lipschitz function within the slack band.
pub fn lipschitz_adjust(
    space: &MetricSpace,
    f: &DiscreteFunction,
    s: &SlackVector,
) -> Result<DiscreteFunction> {
    let n = space.len();
    f.check_len(n)?;
    if s.s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.s.len(),
        });
    }
    if let Some((x, y)) = first_relaxed_violation(space, f, Some(s), 1e-10) {
        return Err(Error::RelaxedConditionViolated(x, y));
    }

    let lower: Vec<f64> = f.values.iter().zip(&s.s).map(|(v, s)| v - s).collect();
    let mut floor = vec![f64::NEG_INFINITY; n];
    let mut out = vec![0.0; n];
    let mut set = vec![false; n];
    for _ in 0..n {
        let mut pick = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for x in 0..n {
            if set[x] {
                continue;
            }
            let cand = lower[x].max(floor[x]);
            if pick == usize::MAX || cand > best + TIE_TOL {
                pick = x;
                best = cand;
            }
        }
        set[pick] = true;
        out[pick] = best;
        for y in 0..n {
            if !set[y] {
                floor[y] = floor[y].max(best - space.dist(y, pick));
            }
        }
    }
    Ok(DiscreteFunction { values: out })
}

/// Expected estimation error `sum_x p_x |Avg(f) - f(x)|`.
pub fn error(f: &DiscreteFunction, p: &SamplingDistribution) -> Result<f64> {
    f.check_len(p.len())?;
    let avg = average(f);
    Ok(f
        .values
        .iter()
        .zip(&p.p)
        .map(|(v, w)| w * (avg - v).abs())
        .sum())
}

/// Subtracts the average.
pub fn mean_zero(f: &DiscreteFunction) -> DiscreteFunction {
    let avg = average(f);
    DiscreteFunction {
        values: f.values.iter().map(|v| v - avg).collect(),
    }
}

/// Reflects every value about `f(x)`: `y -> 2 f(x) - f(y)`.
pub fn flip_about(f: &DiscreteFunction, x: usize) -> DiscreteFunction {
    let pivot = 2.0 * f.values[x];
    DiscreteFunction {
        values: f.values.iter().map(|v| pivot - v).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(coords: &[f64]) -> MetricSpace {
        MetricSpace::from_line(coords.to_vec()).unwrap()
    }

    fn func(v: &[f64]) -> DiscreteFunction {
        DiscreteFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn averages() {
        assert_eq!(average(&func(&[1.0, 1.0, 1.0])), 1.0);
        assert_eq!(average(&func(&[-1.0, 0.0, 1.0])), 0.0);
        assert!((average(&func(&[0.5, 0.0, 0.5])) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_tests() {
        let s = line(&[0.0, 0.2, 0.7, 1.0]);
        for o in 0..4 {
            assert!(is_lipschitz(&s, &DiscreteFunction::distance_from(&s, o), 1e-12));
        }
        let half = line(&[0.0, 0.5]);
        assert!(!is_lipschitz(&half, &func(&[0.0, 1.0]), 1e-9));
        assert!(is_lipschitz(&s, &func(&[3.0; 4]), 0.0));
    }

    #[test]
    fn relaxed_checks() {
        let half = line(&[0.0, 0.5]);
        let s = SlackVector::uniform(2, 0.05).unwrap();
        assert!(relaxed_lipschitz_check(&half, &func(&[0.0, 0.6]), &s));
        assert!(!relaxed_lipschitz_check(&half, &func(&[0.0, 0.7]), &s));
        let f = DiscreteFunction::distance_from(&half, 0);
        assert!(relaxed_lipschitz_check(&half, &f, &SlackVector::zeros(2)));
    }

    #[test]
    fn adjust_is_identity_on_lipschitz_input() {
        let s = line(&[0.0, 0.3, 0.4, 1.0]);
        let f = func(&[0.1, 0.25, 0.2, -0.3]);
        assert!(is_lipschitz(&s, &f, 0.0));
        let g = lipschitz_adjust(&s, &f, &SlackVector::zeros(4)).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn adjust_two_points_is_pointwise_minimal() {
        let s = line(&[0.0, 0.5]);
        let f = func(&[0.0, 0.6]);
        let slack = SlackVector::uniform(2, 0.05).unwrap();
        let g = lipschitz_adjust(&s, &f, &slack).unwrap();

        // Brute force: the componentwise-smallest Lipschitz function in the
        // band, searched on a 1e-4 grid.
        let step = 1e-4;
        let mut best = [f64::INFINITY; 2];
        for a in -600..=600 {
            let a = a as f64 * step;
            for b in 5000..=6500 {
                let b = b as f64 * step;
                if (a - 0.0).abs() <= 0.05 + 1e-12
                    && (b - 0.6).abs() <= 0.05 + 1e-12
                    && (a - b).abs() <= 0.5 + 1e-12
                {
                    best[0] = best[0].min(a);
                    best[1] = best[1].min(b);
                }
            }
        }
        assert!((best[0] - 0.05).abs() < 1e-9 && (best[1] - 0.55).abs() < 1e-9);
        assert!((g.values()[0] - best[0]).abs() < 1e-9);
        assert!((g.values()[1] - best[1]).abs() < 1e-9);
    }

    #[test]
    fn adjust_three_collinear_points() {
        let s = line(&[0.0, 0.5, 1.0]);
        let f = func(&[0.0, 0.55, 1.05]);
        let slack = SlackVector::uniform(3, 0.05).unwrap();
        let g = lipschitz_adjust(&s, &f, &slack).unwrap();
        assert!(is_lipschitz(&s, &g, REPAIR_TOL));
        assert!(g.max_abs_diff(&f) <= 0.05 + REPAIR_TOL);
    }

    #[test]
    fn adjust_rejects_violations() {
        let s = line(&[0.0, 0.5]);
        let slack = SlackVector::uniform(2, 0.05).unwrap();
        assert_eq!(
            lipschitz_adjust(&s, &func(&[0.0, 0.7]), &slack).unwrap_err(),
            Error::RelaxedConditionViolated(0, 1)
        );
    }

    #[test]
    fn error_examples() {
        let p = SamplingDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(error(&func(&[2.0, 2.0, 2.0]), &p).unwrap(), 0.0);

        for q in [0.0, 0.3, 1.0] {
            let p = SamplingDistribution::new(vec![q, 1.0 - q]).unwrap();
            assert!((error(&func(&[-0.5, 0.5]), &p).unwrap() - 0.5).abs() < 1e-15);
        }

        let p = SamplingDistribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        let f = func(&[1.0 / 6.0, -1.0 / 3.0, 1.0 / 6.0]);
        // Hand evaluation: avg 0, so 0.25/6 + 0.5/3 + 0.25/6 = 1/4.
        assert!((error(&f, &p).unwrap() - 0.25).abs() < 1e-15);

        assert!(matches!(
            error(&func(&[1.0]), &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mean_zero_and_flip() {
        let z = mean_zero(&func(&[4.0, 4.0]));
        assert_eq!(z.values(), &[0.0, 0.0]);
        let f = func(&[0.1, -0.7, 0.4]);
        assert!(flip_about(&flip_about(&f, 1), 1).max_abs_diff(&f) < 1e-15);
        let p = SamplingDistribution::new(vec![0.6, 0.1, 0.3]).unwrap();
        let a = error(&f, &p).unwrap();
        let b = error(&mean_zero(&f), &p).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn distribution_validation() {
        assert!(SamplingDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SamplingDistribution::new(vec![-0.1, 1.1]).is_err());
        let p = SamplingDistribution::new(vec![-1e-15, 1.0]).unwrap();
        assert_eq!(p.probs()[0], 0.0);
        let q = SamplingDistribution::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(q.probs(), &[0.25, 0.75]);
    }
}
