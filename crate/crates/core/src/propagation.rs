//! Covariance propagation and uncertainty synthesis.
//!
//! For a linear relation `Z = K·X + K₀` the errors obey `ΔZ = K·ΔX` and
//! their covariance matrices `D(ΔZ) = K·D(ΔX)·Kᵀ`. The constant `K₀` has zero
//! variance and never enters. Combining a Type A and a Type B error is the
//! special case `K = (1 1)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::error_model::CovarianceMatrix;

/// `Z = K·X + K₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    coefficients: DMatrix<f64>,
    offset: Option<DVector<f64>>,
}

impl LinearMap {
    pub fn new(coefficients: DMatrix<f64>, offset: Option<DVector<f64>>) -> Result<Self> {
        if coefficients.nrows() == 0 || coefficients.ncols() == 0 {
            return Err(Error::input("map", "map must have at least one row and column"));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("map", "entries must be finite"));
        }
        if let Some(k0) = &offset {
            if k0.len() != coefficients.nrows() {
                return Err(Error::dimension("offset", coefficients.nrows(), k0.len()));
            }
            if k0.iter().any(|v| !v.is_finite()) {
                return Err(Error::input("offset", "entries must be finite"));
            }
        }
        Ok(LinearMap {
            coefficients,
            offset,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], offset: Option<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != cols {
                return Err(Error::dimension("map", cols, row.len()));
            }
        }
        Self::new(
            DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]),
            offset.map(DVector::from_vec),
        )
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim), None)
    }

    pub fn rows(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn cols(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn offset(&self) -> Option<&DVector<f64>> {
        self.offset.as_ref()
    }

    /// `K·x + K₀`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::dimension("x", self.cols(), x.len()));
        }
        let mut z = &self.coefficients * DVector::from_column_slice(x);
        if let Some(k0) = &self.offset {
            z += k0;
        }
        Ok(z.iter().copied().collect())
    }

    /// `self ∘ inner`: `K₂K₁·X + (K₂K₀₁ + K₀₂)`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        if self.cols() != inner.rows() {
            return Err(Error::dimension("map", self.cols(), inner.rows()));
        }
        let coefficients = &self.coefficients * &inner.coefficients;
        let offset = match (&inner.offset, &self.offset) {
            (None, None) => None,
            (Some(k01), None) => Some(&self.coefficients * k01),
            (None, Some(k02)) => Some(k02.clone()),
            (Some(k01), Some(k02)) => Some(&self.coefficients * k01 + k02),
        };
        LinearMap::new(coefficients, offset)
    }
}

/// `K·D·Kᵀ`, averaged with its transpose.
pub fn propagate(map: &LinearMap, input: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if map.cols() != input.dim() {
        return Err(Error::dimension("covariance", map.cols(), input.dim()));
    }
    let k = map.coefficients();
    let out = k * input.as_matrix() * k.transpose();
    CovarianceMatrix::symmetrized(out)
}

/// Standard uncertainty recovered from an expanded uncertainty `U = k·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardUncertainty {
    pub sigma: f64,
    pub variance: f64,
}

pub fn expanded_to_standard(expanded: f64, coverage_factor: f64) -> Result<StandardUncertainty> {
    if !coverage_factor.is_finite() || coverage_factor <= 0.0 {
        return Err(Error::input(
            "coverage_factor",
            format!("must be finite and positive, got {coverage_factor}"),
        ));
    }
    if !expanded.is_finite() || expanded < 0.0 {
        return Err(Error::input(
            "expanded",
            format!("must be finite and non-negative, got {expanded}"),
        ));
    }
    let sigma = expanded / coverage_factor;
    Ok(StandardUncertainty {
        sigma,
        variance: sigma * sigma,
    })
}

/// Expectation and variance of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub expectation: f64,
    pub variance: f64,
}

/// The three columns of the probability expression `x_T = x₀ − Δ`.
///
/// The measured value is a constant (variance zero); the error has zero
/// expectation; the true value inherits the expectation of the former and
/// the variance of the latter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueValueExpression {
    pub measured_value: Moments,
    pub error: Moments,
    pub true_value: Moments,
}

pub fn true_value_expression(measured_value: f64, total_sigma: f64) -> Result<TrueValueExpression> {
    if !measured_value.is_finite() {
        return Err(Error::input("measured_value", "must be finite"));
    }
    if !total_sigma.is_finite() || total_sigma < 0.0 {
        return Err(Error::input(
            "total_sigma",
            format!("must be finite and non-negative, got {total_sigma}"),
        ));
    }
    let variance = total_sigma * total_sigma;
    Ok(TrueValueExpression {
        measured_value: Moments {
            expectation: measured_value,
            variance: 0.0,
        },
        error: Moments {
            expectation: 0.0,
            variance,
        },
        true_value: Moments {
            expectation: measured_value,
            variance,
        },
    })
}

/// Type A / Type B synthesis of a final measured value.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    pub type_a: f64,
    pub type_b: f64,
    /// Cross-covariance of the two errors; zero when declared independent.
    pub covariance: f64,
    /// σ(Δ).
    pub total: f64,
    pub coverage_factor: f64,
    /// `coverage_factor · total`.
    pub expanded: f64,
    pub measured_value: Option<f64>,
}

impl UncertaintyReport {
    pub fn with_coverage_factor(mut self, k: f64) -> Result<Self> {
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::input("coverage_factor", format!("must be finite and positive, got {k}")));
        }
        self.coverage_factor = k;
        self.expanded = k * self.total;
        Ok(self)
    }

    pub fn with_measured_value(mut self, x0: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::input("measured_value", "must be finite"));
        }
        self.measured_value = Some(x0);
        Ok(self)
    }

    pub fn total_variance(&self) -> f64 {
        self.total * self.total
    }

    /// Table of measured value, error and true value moments; needs a
    /// measured value.
    pub fn true_value(&self) -> Option<TrueValueExpression> {
        self.measured_value
            .map(|x0| true_value_expression(x0, self.total).expect("validated inputs"))
    }
}

/// Total uncertainty of `Δ = Δ_A + Δ_B`.
///
/// Computed as the propagation of `[[σ_A², c], [c, σ_B²]]` through `K = (1 1)`;
/// with `covariance = None` the errors are independent and this is
/// `√(σ_A² + σ_B²)`.
pub fn synthesize(type_a: f64, type_b: f64, covariance: Option<f64>) -> Result<UncertaintyReport> {
    for (field, v) in [("type_a", type_a), ("type_b", type_b)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::input(field, format!("must be finite and non-negative, got {v}")));
        }
    }
    let c = covariance.unwrap_or(0.0);
    if !c.is_finite() {
        return Err(Error::input("covariance", "must be finite"));
    }
    let bound = type_a * type_b;
    if c.abs() > bound * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::input(
            "covariance",
            format!("|{c}| exceeds type_a * type_b = {bound}"),
        ));
    }
    let joint = DMatrix::from_row_slice(2, 2, &[type_a * type_a, c, c, type_b * type_b]);
    let joint = CovarianceMatrix::new(joint).map_err(|_| {
        Error::input("covariance", "joint covariance of the two errors is not positive semidefinite")
    })?;
    let sum = LinearMap::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), None)?;
    let variance = propagate(&sum, &joint)?.get(0, 0);
    let total = variance.max(0.0).sqrt();
    Ok(UncertaintyReport {
        type_a,
        type_b,
        covariance: c,
        total,
        coverage_factor: 1.0,
        expanded: total,
        measured_value: None,
    })
}
