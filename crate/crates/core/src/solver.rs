//! Constraint generation for the optimal sampling distribution.
//!
//! The master problem is a finite zero-sum game between the sampler and the
//! functions found so far; an oracle then looks for a function the current
//! distribution handles badly and adds it as a new row.

use std::collections::HashSet;

use serde::Serialize;

use crate::adversary::{
    build_grid, ExactOracle, GridOracle, Guarantee, LineClassParams, LineDpOracle, OracleKind, OracleReport,
    SeparationOracle,
};
use crate::error::{Error, Result};
use crate::lipschitz::{self, DiscreteFunction, SamplingDistribution};
use crate::lp::{LinearProgram, Relation};
use crate::metric::{self, MetricSpace};

const NORMALIZED_TOL: f64 = 1e-12;
const DEDUP_RESOLUTION: f64 = 1e9;
const GAME_SLACK: f64 = 1e-13;
const LEXIMIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub oracle: OracleKind,
    /// Approximation parameter of the class oracles.
    pub delta: f64,
    /// Explicit value grid step; overrides the one derived from `delta`.
    pub gamma_override: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
    /// Doubling dimension; estimated from the space when absent.
    pub beta: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            oracle: OracleKind::Exact,
            delta: 0.1,
            gamma_override: None,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_iters: 500,
            beta: None,
        }
    }
}

impl SolverConfig {
    pub fn with_oracle(mut self, oracle: OracleKind) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("delta", self.delta)?;
        if let Some(g) = self.gamma_override {
            positive("gamma", g)?;
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig(format!("beta must be nonnegative, got {b}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub p: SamplingDistribution,
    /// Oracle value at `p`: the worst case over the oracle's class.
    pub upper: f64,
    /// Bound on the worst case over all Lipschitz functions at `p`.
    pub upper_on_l: f64,
    /// Game value over the active set at the last iteration.
    pub restricted_value: f64,
    pub restricted_history: Vec<f64>,
    pub active_set: Vec<DiscreteFunction>,
    pub iterations: usize,
    pub lower_bound: f64,
    pub beta: f64,
    pub converged: bool,
    pub guarantee: Guarantee,
    pub median_index: usize,
    pub mean_distance: f64,
}

/// `min_p max_f sum_x p_x e[f][x]` over the simplex, as the LP
/// `min v` s.t. `sum_x p_x e[f][x] <= v` for every row and `sum_x p_x = 1`.
///
/// Optimal distributions are often not unique, so among them the leximin one
/// is returned: the smallest probability is as large as possible, then the
/// second smallest, and so on. The returned value is the largest row payoff at
/// the returned `p`.
pub fn solve_finite_game(errors: &[Vec<f64>]) -> Result<(SamplingDistribution, f64)> {
    let Some(first) = errors.first() else {
        return Err(Error::EmptyConstraintSet);
    };
    let n = first.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    for row in errors {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
        if row.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::DomainError("game payoffs must be finite and nonnegative".into()));
        }
    }

    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::minimize(objective);
    for row in errors {
        let mut coeffs = row.clone();
        coeffs.push(-1.0);
        lp.push(coeffs, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; n];
    simplex.push(0.0);
    lp.push(simplex, Relation::Eq, 1.0);
    let sol = lp.solve()?;
    let value = sol.objective;

    let cap = value + GAME_SLACK * (1.0 + value);
    let weights = leximin(errors, cap)?.unwrap_or_else(|| sol.z[..n].to_vec());
    let p = SamplingDistribution::from_weights(&weights)?;
    let value = errors
        .iter()
        .map(|row| row.iter().zip(p.probs()).map(|(e, q)| e * q).sum::<f64>())
        .fold(0.0, f64::max);
    Ok((p, value))
}

/// Leximin point of `{p in simplex : e p <= cap}`, or `None` if the LPs
/// lose feasibility to round-off.
fn leximin(errors: &[Vec<f64>], cap: f64) -> Result<Option<Vec<f64>>> {
    let n = errors[0].len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    // Variables: p_0..p_{n-1}, then the common floor t.
    let base = |objective: Vec<f64>, floor: Option<f64>, fixed: &[Option<f64>]| {
        let mut lp = LinearProgram::minimize(objective);
        for row in errors {
            let mut coeffs = row.clone();
            coeffs.push(0.0);
            lp.push(coeffs, Relation::Le, cap);
        }
        let mut simplex = vec![1.0; n];
        simplex.push(0.0);
        lp.push(simplex, Relation::Eq, 1.0);
        for (x, f) in fixed.iter().enumerate() {
            let mut row = vec![0.0; n + 1];
            row[x] = 1.0;
            match f {
                Some(v) => lp.push(row, Relation::Eq, *v),
                None => match floor {
                    Some(t) => lp.push(row, Relation::Ge, t),
                    None => {
                        row[n] = -1.0;
                        lp.push(row, Relation::Ge, 0.0);
                    }
                },
            }
        }
        lp
    };

    while fixed.iter().any(Option::is_none) {
        let mut objective = vec![0.0; n + 1];
        objective[n] = -1.0;
        let sol = match base(objective, None, &fixed).solve() {
            Ok(s) => s,
            Err(Error::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
        let t = sol.z[n];
        let floor = (t - LEXIMIN_TOL).max(0.0);
        let mut progressed = false;
        for x in 0..n {
            if fixed[x].is_some() {
                continue;
            }
            let mut objective = vec![0.0; n + 1];
            objective[x] = -1.0;
            let top = match base(objective, Some(floor), &fixed).solve() {
                Ok(s) => s.z[x],
                Err(Error::Infeasible) => return Ok(None),
                Err(e) => return Err(e),
            };
            if top <= t + LEXIMIN_TOL {
                fixed[x] = Some(t);
                progressed = true;
            }
        }
        if !progressed {
            for x in 0..n {
                fixed[x].get_or_insert(sol.z[x]);
            }
        }
    }
    Ok(Some(fixed.into_iter().map(|v| v.unwrap_or(0.0).max(0.0)).collect()))
}

/// The best deterministic estimator samples the 1-median; its worst case is
/// the mean distance from it, attained by `d(., o)`.
pub fn deterministic_baseline(space: &MetricSpace) -> (usize, f64) {
    let m = space.one_median();
    (m.index, m.mean_distance)
}

/// Largest space the automatic choice sends to the exact oracle.
pub const AUTO_EXACT_MAX: usize = 10;

/// Exact oracle up to [`AUTO_EXACT_MAX`] points, then the line DP on lines
/// and the grid oracle on everything else.
pub fn auto_oracle(space: &MetricSpace) -> OracleKind {
    if space.len() <= AUTO_EXACT_MAX {
        OracleKind::Exact
    } else if space.as_line().is_some() {
        OracleKind::LineDp
    } else {
        OracleKind::Grid
    }
}

/// The oracle a config asks for, bound to `space`.
pub fn build_oracle<'a>(space: &'a MetricSpace, config: &SolverConfig, beta: f64) -> Result<Box<dyn SeparationOracle + 'a>> {
    Ok(match config.oracle {
        OracleKind::Exact => Box::new(ExactOracle::new(space)),
        OracleKind::LineDp => {
            let line = space.as_line().ok_or(Error::NotALine)?;
            let params = match config.gamma_override {
                Some(g) => LineClassParams::from_gamma(g, space.len())?,
                None => LineClassParams::from_delta(config.delta, space.len())?,
            };
            Box::new(LineDpOracle::new(line, params))
        }
        OracleKind::Grid => {
            let grid = build_grid(space, beta, config.delta, config.gamma_override)?;
            Box::new(GridOracle::new(space, grid))
        }
    })
}

/// Lipschitz-class bound implied by an oracle value.
fn bound_on_l(value: f64, guarantee: Guarantee) -> f64 {
    match guarantee {
        Guarantee::Exact => value,
        Guarantee::ClassExact { delta } => value * (1.0 + 2.0 * delta),
        Guarantee::Heuristic => f64::INFINITY,
    }
}

fn dedup_key(f: &DiscreteFunction) -> Vec<i64> {
    f.values().iter().map(|v| (v * DEDUP_RESOLUTION).round() as i64).collect()
}

/// Row of the game matrix for a mean-zero witness: `|f(x)|`.
fn payoff_row(f: &DiscreteFunction) -> Vec<f64> {
    f.values().iter().map(|v| v.abs()).collect()
}

/// Runs constraint generation on a diameter-normalized space.
///
/// The active set starts with `d(., o)`. Each iteration solves the game over
/// the active set, asks the oracle for the worst function at the game's
/// distribution and stops once that value is within tolerance of the game
/// value. The returned distribution is the one with the smallest oracle value
/// seen, the point mass at the median included. Hitting `max_iters` is not an
/// error: the best distribution so far comes back with `converged = false`.
pub fn constraint_generation(space: &MetricSpace, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let n = space.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    if n >= 2 && (space.diameter() - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::InvalidConfig(format!(
            "solver expects a diameter-normalized space, diameter is {}",
            space.diameter()
        )));
    }
    let median = space.one_median();
    let beta = match config.beta {
        Some(b) => b,
        None => metric::estimate_doubling_dimension(space),
    };
    let lower_bound = metric::randomized_lower_bound(&median, beta)?;
    let oracle = build_oracle(space, config, beta)?;
    let guarantee = oracle.guarantee();

    let seed = lipschitz::mean_zero(&DiscreteFunction::distance_from(space, median.index));
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(dedup_key(&seed));
    let mut active = vec![seed];
    let mut rows = vec![payoff_row(&active[0])];

    let point_mass = SamplingDistribution::point_mass(n, median.index);
    let OracleReport { value: pm_value, .. } = oracle.separate(&point_mass)?;
    let mut best = (point_mass, pm_value);

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let (p, restricted) = solve_finite_game(&rows)?;
        history.push(restricted);
        let report = oracle.separate(&p)?;
        iterations += 1;
        let value = report.value;
        if value < best.1 {
            best = (p, value);
        }
        if value <= restricted * (1.0 + config.rel_tol) + config.abs_tol {
            converged = true;
            break;
        }
        if !seen.insert(dedup_key(&report.witness)) {
            // The oracle repeats a known row: the game is solved as well as
            // the LP tolerances allow.
            break;
        }
        rows.push(payoff_row(&report.witness));
        active.push(report.witness);
    }

    let (p, upper) = best;
    Ok(SolveResult {
        p,
        upper,
        upper_on_l: bound_on_l(upper, guarantee),
        restricted_value: history.last().copied().unwrap_or(0.0),
        restricted_history: history,
        active_set: active,
        iterations,
        lower_bound,
        beta,
        converged,
        guarantee,
        median_index: median.index,
        mean_distance: median.mean_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(c: &[f64]) -> MetricSpace {
        MetricSpace::from_line(c.to_vec()).unwrap()
    }

    #[test]
    fn single_row_game_picks_the_smaller_payoff() {
        let (p, v) = solve_finite_game(&[vec![0.7, 0.2]]).unwrap();
        assert!(p.probs()[0] < 1e-12);
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn symmetric_game_is_one_half() {
        let (p, v) = solve_finite_game(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_point_game_from_witnesses() {
        // |f| for mean-zero d(., 1/2) and for the two ramps through the middle.
        let rows = vec![
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.5, 0.0, 0.5],
        ];
        let (p, v) = solve_finite_game(&rows).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        for (a, b) in p.probs().iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_game_is_rejected() {
        assert_eq!(solve_finite_game(&[]).unwrap_err(), Error::EmptyConstraintSet);
    }

    #[test]
    fn two_points_converge_quickly_to_one_half() {
        let r = constraint_generation(&line(&[0.0, 1.0]), &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 3);
        assert!((r.upper - 0.5).abs() < 1e-9);
    }

    #[test]
    fn three_point_line_exact() {
        let r = constraint_generation(&line(&[0.0, 0.5, 1.0]), &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.upper - 0.25).abs() < 1e-9);
        for (a, b) in r.p.probs().iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-6, "{:?}", r.p);
        }
        assert!(r.lower_bound <= r.upper);
        assert!(r.restricted_history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn unnormalized_space_is_rejected() {
        let s = line(&[0.0, 2.0]);
        assert!(matches!(
            constraint_generation(&s, &SolverConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn baseline_is_the_median() {
        assert_eq!(deterministic_baseline(&line(&[0.0, 0.5, 1.0])), (1, 1.0 / 3.0));
        assert_eq!(deterministic_baseline(&line(&[0.0, 1.0])), (0, 0.5));
    }
}
