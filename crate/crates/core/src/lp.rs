//! Small dense linear programs.
//!
//! A two-phase tableau simplex. Pricing is Dantzig's rule, switching to
//! Bland's rule after a run of degenerate pivots so the Lipschitz polytopes
//! (which are highly degenerate) cannot make it cycle.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Minimize `objective . z` subject to the constraints and
/// `lower <= z <= upper` (infinite bounds allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub z: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// All variables start nonnegative and unbounded above.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn bounds(mut self, var: usize, lower: f64, upper: f64) -> Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(self, var: usize) -> Self {
        self.bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn constraint(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.push(coeffs, relation, rhs);
        self
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        lp_solve(self)
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// z = offset + col
    Shifted { col: usize, offset: f64 },
    /// z = offset - col
    Mirrored { col: usize, offset: f64 },
    /// z = plus - minus
    Split { plus: usize, minus: usize },
}

pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    let nvar = lp.objective.len();
    let mut maps = Vec::with_capacity(nvar);
    let mut ncols = 0;
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    for v in 0..nvar {
        let (lo, hi) = (lp.lower[v], lp.upper[v]);
        if lo > hi {
            return Err(Error::Infeasible);
        }
        if lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: ncols,
                offset: lo,
            });
            if hi.is_finite() {
                rows.push((vec![(ncols, 1.0)], Relation::Le, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored {
                col: ncols,
                offset: hi,
            });
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                plus: ncols,
                minus: ncols + 1,
            });
            ncols += 2;
        }
    }

    let mut cost = vec![0.0; ncols];
    for (v, map) in maps.iter().enumerate() {
        let c = lp.objective[v];
        match *map {
            VarMap::Shifted { col, .. } => cost[col] += c,
            VarMap::Mirrored { col, .. } => cost[col] -= c,
            VarMap::Split { plus, minus } => {
                cost[plus] += c;
                cost[minus] -= c;
            }
        }
    }

    for con in &lp.constraints {
        let mut entries = Vec::new();
        let mut rhs = con.rhs;
        for (v, &a) in con.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[v] {
                VarMap::Shifted { col, offset } => {
                    entries.push((col, a));
                    rhs -= a * offset;
                }
                VarMap::Mirrored { col, offset } => {
                    entries.push((col, -a));
                    rhs -= a * offset;
                }
                VarMap::Split { plus, minus } => {
                    entries.push((plus, a));
                    entries.push((minus, -a));
                }
            }
        }
        rows.push((entries, con.relation, rhs));
    }

    let cols = Tableau::solve(ncols, &rows, &cost)?;

    let z: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { col, offset } => offset + cols[col],
            VarMap::Mirrored { col, offset } => offset - cols[col],
            VarMap::Split { plus, minus } => cols[plus] - cols[minus],
        })
        .collect();
    let objective = lp.objective.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>();
    Ok(LpSolution { z, objective })
}

struct Tableau {
    /// Row-major, `m + 1` rows (last is the objective), `width` columns with
    /// the right-hand side in the last column.
    data: Vec<f64>,
    m: usize,
    width: usize,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn solve(ncols: usize, rows: &[(Vec<(usize, f64)>, Relation, f64)], cost: &[f64]) -> Result<Vec<f64>> {
        let m = rows.len();
        // Normalize to nonnegative right-hand sides.
        let mut norm: Vec<(Vec<(usize, f64)>, Relation, f64)> = rows
            .iter()
            .map(|(e, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (e.iter().map(|&(c, a)| (c, -a)).collect(), flipped, -b)
                } else {
                    (e.clone(), *rel, *b)
                }
            })
            .collect();

        let n_slack = norm.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = norm.iter().filter(|r| r.1 != Relation::Le).count();
        let slack0 = ncols;
        let art0 = ncols + n_slack;
        let total = ncols + n_slack + n_art;
        let width = total + 1;
        let mut t = Tableau {
            data: vec![0.0; (m + 1) * width],
            m,
            width,
            basis: vec![0; m],
        };
        let (mut si, mut ai) = (slack0, art0);
        for (r, (entries, rel, b)) in norm.iter_mut().enumerate() {
            for &(c, a) in entries.iter() {
                t.data[r * width + c] += a;
            }
            t.data[r * width + total] = *b;
            match rel {
                Relation::Le => {
                    t.data[r * width + si] = 1.0;
                    t.basis[r] = si;
                    si += 1;
                }
                Relation::Ge => {
                    t.data[r * width + si] = -1.0;
                    si += 1;
                    t.data[r * width + ai] = 1.0;
                    t.basis[r] = ai;
                    ai += 1;
                }
                Relation::Eq => {
                    t.data[r * width + ai] = 1.0;
                    t.basis[r] = ai;
                    ai += 1;
                }
            }
        }

        if n_art > 0 {
            // Phase one: minimize the sum of artificials.
            let mut phase1 = vec![0.0; total];
            for c in phase1.iter_mut().skip(art0) {
                *c = 1.0;
            }
            t.set_objective(&phase1);
            t.run(total)?;
            if -t.rhs(m) > FEAS_TOL {
                return Err(Error::Infeasible);
            }
            t.expel_artificials(art0);
        }

        let mut phase2 = vec![0.0; total];
        phase2[..ncols].copy_from_slice(cost);
        t.set_objective(&phase2);
        // Artificial columns may no longer enter.
        t.run(art0)?;

        let mut x = vec![0.0; ncols];
        for r in 0..m {
            if t.basis[r] < ncols {
                x[t.basis[r]] = t.rhs(r).max(0.0);
            }
        }
        Ok(x)
    }

    /// Writes reduced costs for `c` given the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        let w = self.width;
        let obj = self.m * w;
        for j in 0..w {
            self.data[obj + j] = if j < c.len() { c[j] } else { 0.0 };
        }
        for r in 0..self.m {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    self.data[obj + j] -= cb * self.data[r * w + j];
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let piv = self.at(row, col);
        for j in 0..w {
            self.data[row * w + j] /= piv;
        }
        self.data[row * w + col] = 1.0;
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let factor = self.data[r * w + col];
            if factor != 0.0 {
                for j in 0..w {
                    self.data[r * w + j] -= factor * self.data[row * w + j];
                }
                self.data[r * w + col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Pivots until optimal over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Result<()> {
        let obj = self.m;
        let mut streak = 0usize;
        let max_pivots = 50_000 + 100 * (self.m + self.width);
        for _ in 0..max_pivots {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..allowed {
                let d = self.at(obj, j);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for r in 0..self.m {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let q = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            q < ratio - 1e-12
                                || (q <= ratio + 1e-12 && self.basis[r] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some(r);
                        ratio = q;
                    }
                }
            }
            let Some(row) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(row, col);
        }
        // Bland's rule terminates; hitting this means numerical trouble.
        Err(Error::Unbounded)
    }

    /// Pivots zero-valued artificials out of the basis where possible.
    fn expel_artificials(&mut self, art0: usize) {
        for r in 0..self.m {
            if self.basis[r] < art0 {
                continue;
            }
            if let Some(col) = (0..art0).find(|&j| self.at(r, j).abs() > 1e-9) {
                self.pivot(r, col);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_row() {
        let lp = LinearProgram::minimize(vec![1.0])
            .free(0)
            .constraint(vec![1.0], Relation::Ge, 3.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.z[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_game() {
        // min v s.t. p1 <= v, p2 <= v, p1 + p2 = 1
        let lp = LinearProgram::minimize(vec![0.0, 0.0, 1.0])
            .free(2)
            .constraint(vec![1.0, 0.0, -1.0], Relation::Le, 0.0)
            .constraint(vec![0.0, 1.0, -1.0], Relation::Le, 0.0)
            .constraint(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert!((s.z[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sign_pattern_lp_on_three_point_line() {
        // max sum_x p_x sigma_x (f(x) - avg f) on {0, 0.5, 1}, f(1) = 0,
        // sigma = (+,-,+), p = (1/4, 1/2, 1/4). The objective reduces to
        // (f0 + f2)/2 (with f1 = 0) and the Lipschitz box gives f0, f2 <= 1/2,
        // so the optimum is 1/4.
        let p = [0.25, 0.5, 0.25];
        let sigma = [1.0, -1.0, 1.0];
        let w: f64 = p.iter().zip(&sigma).map(|(a, b)| a * b).sum();
        let c: Vec<f64> = (0..3).map(|x| -(p[x] * sigma[x] - w / 3.0)).collect();
        let coords: [f64; 3] = [0.0, 0.5, 1.0];
        let mut lp = LinearProgram::minimize(c);
        for x in 0..3 {
            lp = lp.free(x);
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let mut row = vec![0.0; 3];
                    row[i] = 1.0;
                    row[j] = -1.0;
                    lp.push(row, Relation::Le, (coords[i] - coords[j]).abs());
                }
            }
        }
        lp.push(vec![0.0, 1.0, 0.0], Relation::Eq, 0.0);
        let s = lp.solve().unwrap();
        assert!((-s.objective - 0.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let lp = LinearProgram::minimize(vec![1.0])
            .constraint(vec![1.0], Relation::Le, -1.0);
        assert_eq!(lp.solve().unwrap_err(), Error::Infeasible);
        let lp = LinearProgram::minimize(vec![-1.0]);
        assert_eq!(lp.solve().unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn bounded_variables() {
        // max x + y with x in [-1, 2], y <= 0.5 (free below), x + y <= 2
        let lp = LinearProgram::minimize(vec![-1.0, -1.0])
            .bounds(0, -1.0, 2.0)
            .bounds(1, f64::NEG_INFINITY, 0.5)
            .constraint(vec![1.0, 1.0], Relation::Le, 2.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 2.0).abs() < 1e-12);
        let lp = LinearProgram::minimize(vec![1.0, 1.0])
            .bounds(0, -1.0, 2.0)
            .bounds(1, -3.0, 0.5);
        assert!((lp.solve().unwrap().objective + 4.0).abs() < 1e-12);
    }
}
