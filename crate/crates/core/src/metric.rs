//! Finite metric spaces: validation, diameter normalization, 1-medians and
//! the universal lower bound on randomized sampling error.

use crate::error::{Error, Result};

/// Absolute slack allowed on the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// Points on the real line, `0 = x_1 <= ... <= x_n = 1` once normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMetric {
    coords: Vec<f64>,
}

impl LineMetric {
    /// Builds a line from ascending coordinates (no normalization).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (i, &x) in coords.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::UnsortedLine(i));
            }
            if i > 0 && x < coords[i - 1] {
                return Err(Error::UnsortedLine(i));
            }
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Gap between consecutive points `j` and `j + 1`.
    pub fn gap(&self, j: usize) -> f64 {
        self.coords[j + 1] - self.coords[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    General,
    Line(LineMetric),
}

/// A validated finite metric space stored as a dense distance matrix.
///
/// `scale` records how many original units one stored unit represents, so
/// errors computed on the normalized space can be reported in input units.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    n: usize,
    labels: Vec<String>,
    dist: Vec<f64>,
    kind: MetricKind,
    scale: f64,
}

/// A 1-median and the mean distance from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianInfo {
    pub index: usize,
    pub mean_distance: f64,
}

impl MetricSpace {
    /// Validates a raw distance matrix. The result is not normalized.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_metric(rows)
    }

    /// Builds the metric induced by ascending line coordinates.
    pub fn from_line(coords: Vec<f64>) -> Result<Self> {
        let line = LineMetric::new(coords)?;
        let n = line.len();
        let x = line.coords();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = (x[i] - x[j]).abs();
            }
        }
        Ok(Self {
            n,
            labels: default_labels(n),
            dist,
            kind: MetricKind::Line(line),
            scale: 1.0,
        })
    }

    /// Builds the Euclidean metric of a point cloud in `dim` dimensions.
    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::PointDimension {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteDistance(index, index));
            }
        }
        let rows = points
            .iter()
            .map(|a| {
                points
                    .iter()
                    .map(|b| {
                        a.iter()
                            .zip(b)
                            .map(|(u, v)| (u - v) * (u - v))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        validate_metric(rows)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn as_line(&self) -> Option<&LineMetric> {
        match &self.kind {
            MetricKind::Line(l) => Some(l),
            MetricKind::General => None,
        }
    }

    /// Original units per stored unit.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Rescales so the largest distance is exactly 1.
    pub fn normalize_diameter(&self) -> Result<Self> {
        normalize_diameter(self)
    }

    pub fn one_median(&self) -> MedianInfo {
        one_median(self)
    }

    /// Sub-metric on the given point indices, in that order.
    pub fn restrict(&self, points: &[usize]) -> Self {
        let k = points.len();
        let mut dist = vec![0.0; k * k];
        for (a, &i) in points.iter().enumerate() {
            for (b, &j) in points.iter().enumerate() {
                dist[a * k + b] = self.dist(i, j);
            }
        }
        Self {
            n: k,
            labels: points.iter().map(|&i| self.labels[i].clone()).collect(),
            dist,
            kind: MetricKind::General,
            scale: self.scale,
        }
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Checks that `rows` is a (pseudo)metric: square, finite, nonnegative,
/// zero diagonal, symmetric, and satisfying the triangle inequality up to
/// [`TRIANGLE_TOL`]. Violations are reported, never repaired.
pub fn validate_metric(rows: Vec<Vec<f64>>) -> Result<MetricSpace> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let d = rows[i][j];
            if !d.is_finite() {
                return Err(Error::NonFiniteDistance(i, j));
            }
            if d < 0.0 {
                return Err(Error::NegativeDistance(i, j));
            }
        }
    }
    for (i, r) in rows.iter().enumerate() {
        if r[i] != 0.0 {
            return Err(Error::NonzeroDiagonal(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rows[i][j] != rows[j][i] {
                return Err(Error::AsymmetricMatrix(i, j));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                if rows[i][j] > rows[i][k] + rows[k][j] + TRIANGLE_TOL {
                    return Err(Error::TriangleViolation(i, j, k));
                }
            }
        }
    }
    Ok(MetricSpace {
        n,
        labels: default_labels(n),
        dist: rows.into_iter().flatten().collect(),
        kind: MetricKind::General,
        scale: 1.0,
    })
}

/// Scales all distances by `1 / diameter`. Idempotent on normalized input.
pub fn normalize_diameter(space: &MetricSpace) -> Result<MetricSpace> {
    let diam = space.diameter();
    if diam <= 0.0 {
        if space.n == 1 {
            return Ok(space.clone());
        }
        return Err(Error::DegenerateSpace);
    }
    let mut out = space.clone();
    if diam == 1.0 {
        if let MetricKind::Line(line) = &space.kind {
            if line.coords[0] != 0.0 {
                let x0 = line.coords[0];
                out.kind = MetricKind::Line(LineMetric {
                    coords: line.coords.iter().map(|x| x - x0).collect(),
                });
            }
        }
        return Ok(out);
    }
    for d in &mut out.dist {
        *d /= diam;
    }
    if let MetricKind::Line(line) = &space.kind {
        let x0 = line.coords[0];
        let last = line.coords.len() - 1;
        let mut coords: Vec<f64> = line.coords.iter().map(|x| (x - x0) / diam).collect();
        coords[last] = 1.0;
        out.kind = MetricKind::Line(LineMetric { coords });
    }
    // Pin the diameter pair exactly; division can land one ulp off.
    let (mut bi, mut bj) = (0, 0);
    for i in 0..space.n {
        for j in 0..space.n {
            if space.dist(i, j) == diam {
                bi = i;
                bj = j;
            }
        }
    }
    out.dist[bi * space.n + bj] = 1.0;
    out.dist[bj * space.n + bi] = 1.0;
    out.scale = space.scale * diam;
    Ok(out)
}

/// The point minimizing the distance sum, lowest index on ties.
pub fn one_median(space: &MetricSpace) -> MedianInfo {
    let n = space.len();
    let mut best = 0;
    let mut best_sum = f64::INFINITY;
    for i in 0..n {
        let sum: f64 = space.row(i).iter().sum();
        if sum < best_sum - 1e-12 {
            best = i;
            best_sum = sum;
        }
    }
    MedianInfo {
        index: best,
        mean_distance: best_sum / n as f64,
    }
}

/// Lower bound `m / (4 * 6^beta)` on the worst-case error of any randomized
/// single-sample estimator, for a space of doubling dimension `beta`.
pub fn randomized_lower_bound(median: &MedianInfo, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::DomainError(format!(
            "doubling dimension must be finite and nonnegative, got {beta}"
        )));
    }
    Ok(median.mean_distance / (4.0 * 6f64.powf(beta)))
}

/// Upper estimate of the doubling dimension.
///
/// For every center and every dyadic scale `delta`, the ball of diameter
/// `delta` around the center is greedily split into clusters of diameter at
/// most `delta / 2`, seeding each cluster at the uncovered point farthest from
/// the center. The estimate is `log2` of the largest cluster count seen. It
/// only inspects balls centered at points, so it is advisory.
pub fn estimate_doubling_dimension(space: &MetricSpace) -> f64 {
    let n = space.len();
    let diam = space.diameter();
    let min_pos = (0..n)
        .flat_map(|i| space.row(i).iter().copied())
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if n < 2 || !min_pos.is_finite() {
        return 0.0;
    }
    let mut worst = 1usize;
    let mut delta = diam * 2.0;
    for _ in 0..64 {
        if delta < min_pos {
            break;
        }
        for c in 0..n {
            let ball: Vec<usize> = (0..n)
                .filter(|&y| space.dist(c, y) <= delta / 2.0 + TRIANGLE_TOL)
                .collect();
            if ball.len() > worst {
                worst = worst.max(greedy_cluster_count(space, c, &ball, delta / 2.0));
            }
        }
        delta /= 2.0;
    }
    (worst as f64).log2()
}

fn greedy_cluster_count(space: &MetricSpace, center: usize, ball: &[usize], max_diam: f64) -> usize {
    let mut covered = vec![false; ball.len()];
    let mut left = ball.len();
    let mut count = 0;
    while left > 0 {
        let mut seed = usize::MAX;
        for (a, &y) in ball.iter().enumerate() {
            if !covered[a] && (seed == usize::MAX || space.dist(center, y) > space.dist(center, ball[seed])) {
                seed = a;
            }
        }
        let mut order: Vec<usize> = (0..ball.len()).filter(|&a| !covered[a]).collect();
        order.sort_by(|&a, &b| {
            space
                .dist(ball[seed], ball[a])
                .total_cmp(&space.dist(ball[seed], ball[b]))
                .then(a.cmp(&b))
        });
        let mut cluster: Vec<usize> = Vec::new();
        for a in order {
            if cluster
                .iter()
                .all(|&w| space.dist(ball[a], ball[w]) <= max_diam + TRIANGLE_TOL)
            {
                cluster.push(a);
                covered[a] = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}
