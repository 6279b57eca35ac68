use rayon::prelude::*;

use super::{pick_best, Guarantee, OracleReport, SeparationOracle};
use crate::error::{Error, Result};
use crate::lipschitz::{self, DiscreteFunction, SamplingDistribution};
use crate::lp::{LinearProgram, Relation};
use crate::metric::MetricSpace;

pub const DEFAULT_EXACT_CAP: usize = 12;

/// Exact worst case over all Lipschitz functions, by sign-pattern enumeration.
#[derive(Debug, Clone)]
pub struct ExactOracle<'a> {
    space: &'a MetricSpace,
    cap: usize,
}

impl<'a> ExactOracle<'a> {
    pub fn new(space: &'a MetricSpace) -> Self {
        Self {
            space,
            cap: DEFAULT_EXACT_CAP,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }
}

impl SeparationOracle for ExactOracle<'_> {
    fn separate(&self, p: &SamplingDistribution) -> Result<OracleReport> {
        exact_oracle(self.space, p, self.cap)
    }

    fn guarantee(&self) -> Guarantee {
        Guarantee::Exact
    }
}

pub fn exact_oracle_small(space: &MetricSpace, p: &SamplingDistribution) -> Result<OracleReport> {
    exact_oracle(space, p, DEFAULT_EXACT_CAP)
}

/// `max_f sum_x p_x |Avg(f) - f(x)|` over 1-Lipschitz `f`.
///
/// The objective is convex in `f`, so its maximum sits at a vertex of the
/// Lipschitz polytope. Fixing the sign `sigma_x` of every deviation makes it
/// linear: `max sum_x p_x sigma_x (f(x) - Avg(f))`, and the largest of these
/// LPs over all sign vectors is the answer. `f(o) = 0` at the 1-median removes
/// the translation freedom, and `sigma` and `-sigma` give the same optimum, so
/// only half of the patterns are solved.
pub fn exact_oracle(space: &MetricSpace, p: &SamplingDistribution, cap: usize) -> Result<OracleReport> {
    let n = space.len();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    if n > cap {
        return Err(Error::InstanceTooLarge { n, cap });
    }
    if n == 1 {
        return Ok(OracleReport {
            witness: DiscreteFunction::new(vec![0.0])?,
            value: 0.0,
            guarantee: Guarantee::Exact,
        });
    }
    let anchor = space.one_median().index;
    let patterns: u64 = 1 << (n - 1);

    let best = (0..patterns)
        .into_par_iter()
        .map(|mask| {
            let sigma: Vec<f64> = (0..n)
                .map(|x| if x == 0 || (mask >> (x - 1)) & 1 == 0 { 1.0 } else { -1.0 })
                .collect();
            let f = sign_pattern_lp(space, p.probs(), &sigma, anchor)?;
            let f = lipschitz::mean_zero(&DiscreteFunction::new(f)?);
            let value = lipschitz::error(&f, p)?;
            Ok((value, f.into_values()))
        })
        .try_reduce(|| (f64::NEG_INFINITY, Vec::new()), |a, b| Ok(pick_best(a, b)))?;

    Ok(OracleReport {
        witness: DiscreteFunction::new(best.1)?,
        value: best.0,
        guarantee: Guarantee::Exact,
    })
}

/// Optimum of the linear program for one sign vector `sigma`:
/// `max sum_x p_x sigma_x (f(x) - Avg f)` over Lipschitz `f`.
pub fn sign_pattern_value(space: &MetricSpace, p: &SamplingDistribution, sigma: &[f64]) -> Result<f64> {
    let n = space.len();
    if p.len() != n || sigma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if p.len() != n { p.len() } else { sigma.len() },
        });
    }
    let anchor = space.one_median().index;
    let f = DiscreteFunction::new(sign_pattern_lp(space, p.probs(), sigma, anchor)?)?;
    let avg = f.average();
    Ok(f.values()
        .iter()
        .zip(p.probs())
        .zip(sigma)
        .map(|((v, q), s)| q * s * (v - avg))
        .sum())
}

/// Solves `max sum_x p_x sigma_x (f(x) - Avg f)` over Lipschitz `f` with
/// `f(anchor) = 0` and returns the maximizer.
fn sign_pattern_lp(space: &MetricSpace, p: &[f64], sigma: &[f64], anchor: usize) -> Result<Vec<f64>> {
    let n = space.len();
    let signed: f64 = p.iter().zip(sigma).map(|(a, b)| a * b).sum();
    let c: Vec<f64> = (0..n).map(|x| -(p[x] * sigma[x] - signed / n as f64)).collect();
    let mut lp = LinearProgram::minimize(c);
    for x in 0..n {
        let r = space.dist(x, anchor);
        lp = lp.bounds(x, -r, r);
    }
    for i in 0..n {
        for j in 0..n {
            if i == j || i == anchor || j == anchor {
                // Rows through the anchor are implied by the bounds.
                continue;
            }
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[j] = -1.0;
            lp.push(row, Relation::Le, space.dist(i, j));
        }
    }
    Ok(lp.solve()?.z)
}
