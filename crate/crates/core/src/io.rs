//! JSON forms of metrics, functions and distributions.
//!
//! Metric loaders always normalize the diameter to 1; the factor that was
//! divided out is kept on the space (see [`MetricSpace::scale`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipschitz::{DiscreteFunction, SamplingDistribution};
use crate::metric::{MetricKind, MetricSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricInput {
    Matrix {
        dist: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Line {
        coords: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    /// Euclidean distances between points of `R^dim`.
    Points {
        dim: usize,
        coords: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

impl MetricInput {
    /// Validates and normalizes.
    pub fn build(self) -> Result<MetricSpace> {
        let (space, labels) = match self {
            Self::Matrix { dist, labels } => (MetricSpace::from_matrix(dist)?, labels),
            Self::Line { coords, labels } => (MetricSpace::from_line(coords)?, labels),
            Self::Points { dim, coords, labels } => (MetricSpace::from_points(dim, &coords)?, labels),
        };
        let space = match labels {
            Some(l) => space.with_labels(l)?,
            None => space,
        };
        space.normalize_diameter()
    }

    /// Line coordinates for line metrics, the distance matrix otherwise.
    pub fn from_space(space: &MetricSpace) -> Self {
        let labels = Some(space.labels().to_vec());
        match space.kind() {
            MetricKind::Line(line) => Self::Line {
                coords: line.coords().to_vec(),
                labels,
            },
            MetricKind::General => Self::Matrix {
                dist: (0..space.len()).map(|i| space.row(i).to_vec()).collect(),
                labels,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionInput {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionInput {
    pub p: Vec<f64>,
}

fn format_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn parse_metric(json: &str) -> Result<MetricSpace> {
    serde_json::from_str::<MetricInput>(json).map_err(format_err)?.build()
}

pub fn parse_function(json: &str) -> Result<DiscreteFunction> {
    let input: FunctionInput = serde_json::from_str(json).map_err(format_err)?;
    DiscreteFunction::new(input.values)
}

pub fn parse_distribution(json: &str) -> Result<SamplingDistribution> {
    let input: DistributionInput = serde_json::from_str(json).map_err(format_err)?;
    SamplingDistribution::new(input.p)
}

pub fn metric_to_json(space: &MetricSpace) -> String {
    serde_json::to_string_pretty(&MetricInput::from_space(space)).expect("metric serializes")
}
