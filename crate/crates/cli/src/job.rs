//! JSON job files.
//!
//! One file describes one problem. The `kind` field must match the
//! subcommand; unknown fields are rejected. Matrices are arrays of rows.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use errvar::distributions::RegularErrorDistribution;
use errvar::error_model::{ErrorBudget, ErrorSource, Sharing, SourceKind};

use crate::error::{locate_key, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Adjust,
    Propagate,
    Synthesize,
    Simulate,
    Dist,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Adjust => "adjust",
            Kind::Propagate => "propagate",
            Kind::Synthesize => "synthesize",
            Kind::Simulate => "simulate",
            Kind::Dist => "dist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Machine,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    pub precision: Option<usize>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKindSpec {
    ZeroPoint,
    Proportional,
    ScaleNonUniformity,
    Custom,
}

/// One entry of an error budget. `shared` defaults to the usual pattern of
/// the kind; `coefficients` is required for `custom` and refused otherwise.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKindSpec,
    pub sigma: f64,
    pub shared: Option<bool>,
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Arcsine,
    Uniform,
    Normal,
}

/// `arcsine` takes `amplitude`, `uniform` takes `half_width`, `normal`
/// takes `sigma`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub kind: DistKind,
    pub amplitude: Option<f64>,
    pub half_width: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjustJob {
    pub kind: Kind,
    pub unit: Option<String>,
    pub parameter_unit: Option<String>,
    pub observations: Vec<f64>,
    /// Defaults to the direct model, a single column of ones.
    pub design: Option<Vec<Vec<f64>>>,
    /// Optional instrument budget; adds the propagated D(ΔY) to the report.
    pub budget: Option<Vec<SourceSpec>>,
    pub output: Option<OutputOptions>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateJob {
    pub kind: Kind,
    pub unit: Option<String>,
    pub map: Vec<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    /// Input values X; required with a budget, optional otherwise.
    pub values: Option<Vec<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub budget: Option<Vec<SourceSpec>>,
    pub output: Option<OutputOptions>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandedSpec {
    pub expanded: f64,
    pub coverage_factor: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeJob {
    pub kind: Kind,
    pub unit: Option<String>,
    pub type_a: f64,
    pub type_b: Option<f64>,
    /// Type B given as an expanded uncertainty and its coverage factor.
    pub type_b_expanded: Option<ExpandedSpec>,
    pub covariance: Option<f64>,
    /// Standard deviation of a component shared by both errors.
    pub shared_sigma: Option<f64>,
    pub coverage_factor: Option<f64>,
    pub measured_value: Option<f64>,
    pub output: Option<OutputOptions>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    pub kind: Kind,
    pub unit: Option<String>,
    pub parameter_unit: Option<String>,
    pub design: Vec<Vec<f64>>,
    pub true_values: Vec<f64>,
    pub budget: Option<Vec<SourceSpec>>,
    pub noise: Option<DistSpec>,
    pub trials: usize,
    pub seed: Option<u64>,
    pub output: Option<OutputOptions>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistJob {
    pub kind: Kind,
    pub unit: Option<String>,
    pub distribution: DistSpec,
    /// Where to evaluate the pdf; defaults to nine points across the support.
    pub points: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<OutputOptions>,
}

#[derive(Debug, Clone)]
pub enum Job {
    Adjust(AdjustJob),
    Propagate(PropagateJob),
    Synthesize(SynthesizeJob),
    Simulate(SimulateJob),
    Dist(DistJob),
}

impl Job {
    pub fn output(&self) -> Option<&OutputOptions> {
        match self {
            Job::Adjust(j) => j.output.as_ref(),
            Job::Propagate(j) => j.output.as_ref(),
            Job::Synthesize(j) => j.output.as_ref(),
            Job::Simulate(j) => j.output.as_ref(),
            Job::Dist(j) => j.output.as_ref(),
        }
    }
}

#[derive(Deserialize)]
struct Probe {
    kind: Option<serde_json::Value>,
}

/// Parses `text` as a job of the `expected` kind.
pub fn parse(text: &str, expected: Kind) -> Result<Job, CliError> {
    let probe: Probe = serde_json::from_str(text).map_err(|e| syntax_error(&e))?;
    let line = locate_key(text, "kind");
    let kind = match probe.kind {
        None => return Err(CliError::validation("kind", Some(1), "missing field `kind`")),
        Some(v) => Kind::deserialize(&v).map_err(|_| {
            CliError::validation(
                "kind",
                line,
                format!("expected one of adjust, propagate, synthesize, simulate, dist, got {v}"),
            )
        })?,
    };
    if kind != expected {
        return Err(CliError::validation(
            "kind",
            line,
            format!("job is `{}` but the subcommand is `{}`", kind.name(), expected.name()),
        ));
    }
    Ok(match kind {
        Kind::Adjust => Job::Adjust(typed(text)?),
        Kind::Propagate => Job::Propagate(typed(text)?),
        Kind::Synthesize => Job::Synthesize(typed(text)?),
        Kind::Simulate => Job::Simulate(typed(text)?),
        Kind::Dist => Job::Dist(typed(text)?),
    })
}

fn syntax_error(e: &serde_json::Error) -> CliError {
    CliError::Validation {
        field: None,
        line: Some(e.line()),
        message: e.to_string(),
    }
}

fn typed<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Validation {
            field: (path != ".").then_some(path),
            line: Some(inner.line()),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| syntax_error(&e))?;
    Ok(value)
}

impl SourceSpec {
    pub fn to_source(&self) -> errvar::Result<ErrorSource> {
        let kind = match (self.kind, &self.coefficients) {
            (SourceKindSpec::Custom, Some(c)) => SourceKind::Custom {
                coefficients: c.clone(),
            },
            (SourceKindSpec::Custom, None) => {
                return Err(errvar::Error::Input {
                    field: "coefficients",
                    reason: "a custom source needs coefficients".into(),
                })
            }
            (_, Some(_)) => {
                return Err(errvar::Error::Input {
                    field: "coefficients",
                    reason: "coefficients are only allowed on custom sources".into(),
                })
            }
            (SourceKindSpec::ZeroPoint, None) => SourceKind::ZeroPoint,
            (SourceKindSpec::Proportional, None) => SourceKind::Proportional,
            (SourceKindSpec::ScaleNonUniformity, None) => SourceKind::ScaleNonUniformity,
        };
        match self.shared {
            None => ErrorSource::new(kind, self.sigma),
            Some(true) => ErrorSource::with_sharing(kind, self.sigma, Sharing::SharedAcrossObservations),
            Some(false) => ErrorSource::with_sharing(kind, self.sigma, Sharing::IndependentPerObservation),
        }
    }
}

pub fn budget(specs: &[SourceSpec]) -> errvar::Result<ErrorBudget> {
    specs
        .iter()
        .map(SourceSpec::to_source)
        .collect::<errvar::Result<Vec<_>>>()
        .map(ErrorBudget::new)
}

impl DistSpec {
    pub fn to_distribution(&self) -> errvar::Result<RegularErrorDistribution> {
        let (value, field) = match self.kind {
            DistKind::Arcsine => (self.amplitude, "amplitude"),
            DistKind::Uniform => (self.half_width, "half_width"),
            DistKind::Normal => (self.sigma, "sigma"),
        };
        let provided = [self.amplitude.is_some(), self.half_width.is_some(), self.sigma.is_some()]
            .iter()
            .filter(|p| **p)
            .count();
        let Some(value) = value.filter(|_| provided == 1) else {
            return Err(errvar::Error::Input {
                field,
                reason: format!("this distribution takes exactly one parameter, `{field}`"),
            });
        };
        match self.kind {
            DistKind::Arcsine => RegularErrorDistribution::arcsine(value),
            DistKind::Uniform => RegularErrorDistribution::uniform(value),
            DistKind::Normal => RegularErrorDistribution::normal(value),
        }
    }
}
