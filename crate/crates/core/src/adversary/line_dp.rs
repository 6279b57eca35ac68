use super::{Guarantee, OracleReport, SeparationOracle};
use crate::error::{Error, Result};
use crate::lipschitz::{self, DiscreteFunction, SamplingDistribution};
use crate::metric::LineMetric;

/// Default cap on stored DP states (two bytes of back-pointer each).
pub const DEFAULT_STATE_CAP: u128 = 200_000_000;

/// Parameters of the discretized class on a line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineClassParams {
    /// Value grid step.
    pub gamma: f64,
    /// Approximation factor the class certifies.
    pub delta: f64,
    /// Cap on `|sum_i f(x_i)|`, `n * gamma`.
    pub sum_cap: f64,
}

impl LineClassParams {
    /// `gamma = delta / (144 n)`.
    pub fn from_delta(delta: f64, n: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
        }
        let gamma = delta / (144.0 * n as f64);
        Ok(Self {
            gamma,
            delta,
            sum_cap: n as f64 * gamma,
        })
    }

    /// An explicit grid step; the implied `delta` is `144 n gamma`.
    pub fn from_gamma(gamma: f64, n: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            gamma,
            delta: 144.0 * n as f64 * gamma,
            sum_cap: n as f64 * gamma,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite() && self.sum_cap >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad line class parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LineDpOracle<'a> {
    line: &'a LineMetric,
    params: LineClassParams,
    state_cap: u128,
}

impl<'a> LineDpOracle<'a> {
    pub fn new(line: &'a LineMetric, params: LineClassParams) -> Self {
        Self {
            line,
            params,
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    pub fn with_state_cap(mut self, cap: u128) -> Self {
        self.state_cap = cap;
        self
    }
}

impl SeparationOracle for LineDpOracle<'_> {
    fn separate(&self, p: &SamplingDistribution) -> Result<OracleReport> {
        line_dp_oracle_with_cap(self.line, p, &self.params, self.state_cap)
    }

    fn guarantee(&self) -> Guarantee {
        Guarantee::ClassExact {
            delta: self.params.delta,
        }
    }
}

pub fn line_dp_oracle(line: &LineMetric, p: &SamplingDistribution, params: &LineClassParams) -> Result<OracleReport> {
    line_dp_oracle_with_cap(line, p, params, DEFAULT_STATE_CAP)
}

/// One DP layer: values for `t in [-tmax, tmax]`, `s in [-smax, smax]`, all in
/// units of `gamma`.
struct Layer {
    smax: i64,
    width: usize,
    value: Vec<f64>,
}

impl Layer {
    fn new(tmax: i64, smax: i64) -> Self {
        let width = (2 * smax + 1) as usize;
        Self {
            smax,
            width,
            value: vec![f64::NEG_INFINITY; (2 * tmax + 1) as usize * width],
        }
    }

    #[inline]
    fn idx(&self, ti: usize, s: i64) -> usize {
        ti * self.width + (s + self.smax) as usize
    }
}

/// Grid positions `round(x_j / gamma)`.
fn snapped(line: &LineMetric, gamma: f64) -> Vec<i64> {
    line.coords().iter().map(|x| (x / gamma).round() as i64).collect()
}

/// Maximizes `sum_i p_i |f(x_i)|` over the zigzag class: the coordinates are
/// rounded to multiples of `gamma`, `f` starts at any multiple of `gamma` and
/// moves up or down by exactly the rounded gap at every step, and
/// `|sum_i f(x_i)| <= n gamma`.
///
/// Modulo constants the Lipschitz functions on a line form a box in the
/// adjacent differences, so the worst case is a zigzag; rounding the
/// coordinates keeps the zigzags on the value grid. Every member satisfies
/// `|f(x_i) - f(x_j)| <= d(x_i, x_j) + gamma`.
///
/// The state after point `j` is the pair (value at `x_j`, partial sum); only
/// partial sums that can still return inside the final window are kept.
/// The reported value is the error of the witness after re-centering it.
pub fn line_dp_oracle_with_cap(
    line: &LineMetric,
    p: &SamplingDistribution,
    params: &LineClassParams,
    state_cap: u128,
) -> Result<OracleReport> {
    let (grid_vals, _) = maximize_on_grid(line, p, params, state_cap)?;
    let witness = lipschitz::mean_zero(&DiscreteFunction::new(
        grid_vals.iter().map(|&t| t as f64 * params.gamma).collect(),
    )?);
    let value = lipschitz::error(&witness, p)?;
    Ok(OracleReport {
        witness,
        value,
        guarantee: Guarantee::ClassExact { delta: params.delta },
    })
}

/// Returns the maximizing grid values (in units of `gamma`) and the
/// maximum of `sum_i p_i |f(x_i)|`.
fn maximize_on_grid(
    line: &LineMetric,
    p: &SamplingDistribution,
    params: &LineClassParams,
    state_cap: u128,
) -> Result<(Vec<i64>, f64)> {
    params.validate()?;
    let n = line.len();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    let x = line.coords();
    if n >= 2 && ((x[n - 1] - x[0]) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig("line must be normalized to diameter 1".into()));
    }
    if n == 1 {
        return Ok((vec![0], 0.0));
    }

    let gamma = params.gamma;
    let q = snapped(line, gamma);
    let tmax = q[n - 1] - q[0];
    let cap = (params.sum_cap / gamma + 1e-9).floor() as i64;
    if tmax > i32::MAX as i64 / 4 {
        return Err(Error::GridTooFine {
            states: u128::MAX,
            cap: state_cap,
        });
    }
    // Partial sums after j points: |s| <= j tmax, and the remaining points
    // must be able to bring it back within the cap.
    let smax: Vec<i64> = (1..=n as i64)
        .map(|j| (j * tmax).min((n as i64 - j) * tmax + cap))
        .collect();
    let rows = (2 * tmax + 1) as u128;
    let states: u128 = smax.iter().map(|&s| rows * (2 * s + 1) as u128).sum();
    if states > state_cap {
        return Err(Error::GridTooFine { states, cap: state_cap });
    }

    let probs = p.probs();
    let tcount = (2 * tmax + 1) as usize;
    // back[j][state] is 1 if the previous value was above the current one.
    let mut back: Vec<Vec<u8>> = Vec::with_capacity(n);

    let mut cur = Layer::new(tmax, smax[0]);
    for ti in 0..tcount {
        let t = ti as i64 - tmax;
        if t.abs() <= smax[0] {
            let i = cur.idx(ti, t);
            cur.value[i] = probs[0] * t.abs() as f64;
        }
    }
    back.push(Vec::new());

    for j in 1..n {
        let k = q[j] - q[j - 1];
        let mut next = Layer::new(tmax, smax[j]);
        let mut ptr = vec![0u8; next.value.len()];
        let w = probs[j];
        for ti in 0..tcount {
            let t = ti as i64 - tmax;
            let gain = w * t.abs() as f64;
            // Predecessor values t - k (we went up) and t + k (we went down).
            let below = ti as i64 - k;
            let above = ti as i64 + k;
            let ulo = (-cur.smax).max(-next.smax - t);
            let uhi = cur.smax.min(next.smax - t);
            for u in ulo..=uhi {
                let col = (u + cur.smax) as usize;
                let mut best = f64::NEG_INFINITY;
                let mut dir = 0u8;
                if below >= 0 {
                    best = cur.value[below as usize * cur.width + col];
                }
                if above < tcount as i64 {
                    let v = cur.value[above as usize * cur.width + col];
                    if v > best {
                        best = v;
                        dir = 1;
                    }
                }
                if best > f64::NEG_INFINITY {
                    let i = next.idx(ti, u + t);
                    next.value[i] = best + gain;
                    ptr[i] = dir;
                }
            }
        }
        back.push(ptr);
        cur = next;
    }

    let mut best = f64::NEG_INFINITY;
    let mut end = (0usize, 0i64);
    for ti in 0..tcount {
        for s in -cap.min(cur.smax)..=cap.min(cur.smax) {
            let v = cur.value[cur.idx(ti, s)];
            if v > best {
                best = v;
                end = (ti, s);
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!(
            "no zigzag on the value grid fits the sum window at gamma = {gamma}"
        )));
    }

    let mut grid_vals = vec![0i64; n];
    let (mut ti, mut s) = end;
    for j in (0..n).rev() {
        let t = ti as i64 - tmax;
        grid_vals[j] = t;
        if j > 0 {
            let layer_smax = smax[j];
            let width = (2 * layer_smax + 1) as usize;
            let k = q[j] - q[j - 1];
            let dir = back[j][ti * width + (s + layer_smax) as usize];
            s -= t;
            ti = if dir == 1 { ti + k as usize } else { ti - k as usize };
        }
    }
    Ok((grid_vals, best * gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::exact_oracle_small;
    use crate::metric::MetricSpace;

    /// Every member of the class: a start value and one direction per step.
    fn class_members(coords: &[f64], gamma: f64) -> Vec<Vec<i64>> {
        let n = coords.len();
        let q: Vec<i64> = coords.iter().map(|x| (x / gamma).round() as i64).collect();
        let tmax = q[n - 1] - q[0];
        let mut out = Vec::new();
        for start in -tmax..=tmax {
            for mask in 0u32..(1 << (n - 1)) {
                let mut f = vec![start; n];
                let mut ok = true;
                for j in 1..n {
                    let k = q[j] - q[j - 1];
                    f[j] = if mask >> (j - 1) & 1 == 1 { f[j - 1] - k } else { f[j - 1] + k };
                    ok &= f[j].abs() <= tmax;
                }
                if ok && f.iter().sum::<i64>().abs() <= n as i64 {
                    out.push(f);
                }
            }
        }
        out
    }

    /// Maximum of `sum p |f|` over the class, by enumeration.
    fn enumerate_class(coords: &[f64], p: &[f64], gamma: f64) -> f64 {
        class_members(coords, gamma)
            .iter()
            .map(|f| f.iter().zip(p).map(|(&v, w)| w * (v as f64 * gamma).abs()).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn members_satisfy_the_relaxed_condition() {
        let coords = [0.0, 0.13, 0.21, 0.6, 0.77, 1.0];
        let gamma = 0.05;
        let members = class_members(&coords, gamma);
        assert!(!members.is_empty());
        for f in members {
            for i in 0..coords.len() {
                for j in 0..coords.len() {
                    let diff = ((f[i] - f[j]) as f64 * gamma).abs();
                    assert!(diff <= (coords[i] - coords[j]).abs() + gamma + 1e-12);
                }
            }
        }
    }

    #[test]
    fn close_to_exact_on_small_lines() {
        let cases: [(&[f64], &[f64]); 4] = [
            (&[0.0, 0.5, 1.0], &[0.25, 0.5, 0.25]),
            (&[0.0, 0.13, 0.21, 0.6, 0.77, 1.0], &[0.1, 0.2, 0.1, 0.3, 0.2, 0.1]),
            (&[0.0, 0.33, 0.34, 1.0], &[0.0, 0.5, 0.5, 0.0]),
            (&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ];
        for gamma in [0.1, 0.03, 0.01] {
            for (coords, probs) in cases {
                let n = coords.len();
                let line = LineMetric::new(coords.to_vec()).unwrap();
                let p = SamplingDistribution::new(probs.to_vec()).unwrap();
                let r = line_dp_oracle(&line, &p, &LineClassParams::from_gamma(gamma, n).unwrap()).unwrap();
                let space = MetricSpace::from_line(coords.to_vec()).unwrap();
                let exact = exact_oracle_small(&space, &p).unwrap().value;
                assert!(
                    (r.value - exact).abs() <= 2.5 * gamma + 1e-12,
                    "gamma {gamma}: dp {} vs exact {exact}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn two_point_line_matches_enumeration() {
        let line = LineMetric::new(vec![0.0, 1.0]).unwrap();
        for q in [0.0, 0.25, 0.5, 0.9] {
            let p = SamplingDistribution::new(vec![q, 1.0 - q]).unwrap();
            let params = LineClassParams::from_gamma(0.25, 2).unwrap();
            let r = line_dp_oracle(&line, &p, &params).unwrap();
            let obj = enumerate_class(line.coords(), p.probs(), 0.25);
            assert!((r.value - 0.5).abs() <= 0.25 + 1e-12, "value {}", r.value);
            assert!(r.value >= 0.0);
            assert!(obj >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn dp_objective_matches_enumeration() {
        let cases: [(&[f64], &[f64], f64); 3] = [
            (&[0.0, 0.5, 1.0], &[0.25, 0.5, 0.25], 0.1),
            (&[0.0, 0.2, 0.3, 1.0], &[0.1, 0.2, 0.3, 0.4], 0.125),
            (&[0.0, 0.05, 1.0], &[0.6, 0.0, 0.4], 0.1),
        ];
        for (coords, probs, gamma) in cases {
            let line = LineMetric::new(coords.to_vec()).unwrap();
            let p = SamplingDistribution::new(probs.to_vec()).unwrap();
            let params = LineClassParams::from_gamma(gamma, coords.len()).unwrap();
            let (vals, obj) = maximize_on_grid(&line, &p, &params, DEFAULT_STATE_CAP).unwrap();
            let brute = enumerate_class(coords, probs, gamma);
            assert!((obj - brute).abs() < 1e-9, "dp {obj} vs enumeration {brute}");
            let direct: f64 = vals.iter().zip(probs).map(|(&v, w)| w * (v as f64 * gamma).abs()).sum();
            assert!((direct - obj).abs() < 1e-9);
            let r = line_dp_oracle(&line, &p, &params).unwrap();
            assert!((lipschitz::error(&r.witness, &p).unwrap() - r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn three_point_line_close_to_exact() {
        let line = LineMetric::new(vec![0.0, 0.5, 1.0]).unwrap();
        let p = SamplingDistribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        let gamma = 0.05;
        let params = LineClassParams::from_gamma(gamma, 3).unwrap();
        let r = line_dp_oracle(&line, &p, &params).unwrap();
        assert!((r.value - 0.25).abs() <= 3.0 * gamma + 1e-12, "value {}", r.value);
        let space = MetricSpace::from_line(vec![0.0, 0.5, 1.0]).unwrap();
        let exact = exact_oracle_small(&space, &p).unwrap();
        assert!(exact.value >= r.value - 6.0 * gamma * 3.0);
    }

    #[test]
    fn value_is_recomputable_and_nonnegative() {
        let line = LineMetric::new(vec![0.0, 0.1, 0.45, 0.5, 1.0]).unwrap();
        let p = SamplingDistribution::new(vec![0.1, 0.3, 0.2, 0.3, 0.1]).unwrap();
        let params = LineClassParams::from_gamma(0.02, 5).unwrap();
        let r = line_dp_oracle(&line, &p, &params).unwrap();
        assert!(r.value >= 0.0);
        assert!((lipschitz::error(&r.witness, &p).unwrap() - r.value).abs() < 1e-12);
        assert_eq!(r.guarantee, Guarantee::ClassExact { delta: 144.0 * 5.0 * 0.02 });
    }

    #[test]
    fn state_cap_is_enforced() {
        let line = LineMetric::new(vec![0.0, 0.5, 1.0]).unwrap();
        let p = SamplingDistribution::uniform(3);
        let params = LineClassParams::from_gamma(0.001, 3).unwrap();
        assert!(matches!(
            line_dp_oracle_with_cap(&line, &p, &params, 1000),
            Err(Error::GridTooFine { .. })
        ));
    }

    #[test]
    fn gamma_from_delta_formula() {
        let params = LineClassParams::from_delta(0.5, 10).unwrap();
        assert!((params.gamma - 0.5 / 1440.0).abs() < 1e-15);
        assert!((params.sum_cap - 10.0 * params.gamma).abs() < 1e-15);
    }
}
