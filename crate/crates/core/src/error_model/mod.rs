//! Error sources, error budgets and the covariance matrices they induce.
//!
//! An observation error is the algebraic sum of its components,
//!
//! ```text
//! Δx_i = a + b·x_i + c_i + Σ_k w_ik·e_k
//! ```
//!
//! with a zero-point error `a`, a proportional error `b`, a scale
//! non-uniformity error `c_i` and any number of custom components with
//! per-observation coefficients `w_ik`. Each component has a standard
//! deviation describing the probability interval of all its possible values.
//! Components flagged as shared take one value for a whole campaign and
//! therefore correlate the observations; independent components take a fresh
//! value per observation and only contribute to the diagonal.

mod covariance;

pub use covariance::{CovarianceMatrix, PSD_TOLERANCE};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Constant offset `a` of the instrument.
    ZeroPoint,
    /// Error proportional to the observed magnitude, `b·x_i`.
    Proportional,
    /// Per-reading error `c_i` of the scale graduation.
    ScaleNonUniformity,
    /// Error entering observation `i` with coefficient `coefficients[i]`.
    Custom { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sharing {
    /// One realization per campaign, common to every observation.
    SharedAcrossObservations,
    /// A separate realization for every observation.
    IndependentPerObservation,
}

impl SourceKind {
    /// Sharing assumed when none is declared.
    pub fn default_sharing(&self) -> Sharing {
        match self {
            SourceKind::ScaleNonUniformity => Sharing::IndependentPerObservation,
            _ => Sharing::SharedAcrossObservations,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::ZeroPoint => "zero_point",
            SourceKind::Proportional => "proportional",
            SourceKind::ScaleNonUniformity => "scale_non_uniformity",
            SourceKind::Custom { .. } => "custom",
        }
    }
}

/// One declared error component.
///
/// `sigma` is in observation units, except for [`SourceKind::Proportional`]
/// where it is a dimensionless ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSource {
    kind: SourceKind,
    sigma: f64,
    sharing: Sharing,
}

impl ErrorSource {
    pub fn new(kind: SourceKind, sigma: f64) -> Result<Self> {
        let sharing = kind.default_sharing();
        Self::with_sharing(kind, sigma, sharing)
    }

    pub fn with_sharing(kind: SourceKind, sigma: f64, sharing: Sharing) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::input("sigma", format!("must be finite and non-negative, got {sigma}")));
        }
        if let SourceKind::Custom { coefficients } = &kind {
            if coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::input("coefficients", "must be finite"));
            }
        }
        Ok(ErrorSource {
            kind,
            sigma,
            sharing,
        })
    }

    pub fn zero_point(sigma: f64) -> Result<Self> {
        Self::new(SourceKind::ZeroPoint, sigma)
    }

    pub fn proportional(sigma: f64) -> Result<Self> {
        Self::new(SourceKind::Proportional, sigma)
    }

    pub fn scale_non_uniformity(sigma: f64) -> Result<Self> {
        Self::new(SourceKind::ScaleNonUniformity, sigma)
    }

    pub fn custom(coefficients: Vec<f64>, sigma: f64, sharing: Sharing) -> Result<Self> {
        Self::with_sharing(SourceKind::Custom { coefficients }, sigma, sharing)
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sharing(&self) -> Sharing {
        self.sharing
    }

    pub fn is_shared(&self) -> bool {
        self.sharing == Sharing::SharedAcrossObservations
    }

    /// Coefficient with which this source enters observation `index` of
    /// magnitude `x`.
    ///
    /// Proportional sources use the observed magnitude in place of the
    /// unknown true value.
    pub fn coefficient(&self, index: usize, x: f64) -> Result<f64> {
        match &self.kind {
            SourceKind::ZeroPoint | SourceKind::ScaleNonUniformity => Ok(1.0),
            SourceKind::Proportional => Ok(x),
            SourceKind::Custom { coefficients } => coefficients.get(index).copied().ok_or_else(|| {
                Error::input(
                    "coefficients",
                    format!(
                        "custom source has {} coefficients, observation index {index} requested",
                        coefficients.len()
                    ),
                )
            }),
        }
    }
}

/// Ordered list of error sources of one instrument or procedure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorBudget {
    sources: Vec<ErrorSource>,
}

impl ErrorBudget {
    pub fn new(sources: Vec<ErrorSource>) -> Self {
        ErrorBudget { sources }
    }

    /// Zero-point, proportional and scale non-uniformity sources with their
    /// default sharing.
    pub fn instrument(sigma_zero: f64, sigma_proportional: f64, sigma_scale: f64) -> Result<Self> {
        Ok(ErrorBudget::new(vec![
            ErrorSource::zero_point(sigma_zero)?,
            ErrorSource::proportional(sigma_proportional)?,
            ErrorSource::scale_non_uniformity(sigma_scale)?,
        ]))
    }

    pub fn push(&mut self, source: ErrorSource) {
        self.sources.push(source);
    }

    pub fn sources(&self) -> &[ErrorSource] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Error of observation `index` with magnitude `x`, given one realized
    /// value per source. Errors combine by plain algebraic summation.
    pub fn compose_error(&self, realizations: &[f64], index: usize, x: f64) -> Result<f64> {
        if realizations.len() != self.sources.len() {
            return Err(Error::dimension("realizations", self.sources.len(), realizations.len()));
        }
        let mut total = 0.0;
        for (source, value) in self.sources.iter().zip(realizations) {
            total += source.coefficient(index, x)? * value;
        }
        Ok(total)
    }

    /// Variance of the error of observation `index` with magnitude `x`;
    /// independent sources add in quadrature.
    pub fn observation_variance(&self, index: usize, x: f64) -> Result<f64> {
        if self.sources.is_empty() {
            return Err(Error::input("budget", "error budget has no sources"));
        }
        let mut total = 0.0;
        for source in &self.sources {
            let c = source.coefficient(index, x)?;
            total += term(c, c, source.sigma);
        }
        Ok(total)
    }

    /// Covariance matrix of the errors of the observations `x`.
    ///
    /// Shared sources fill every entry with `c_i·c_j·σ²`; independent sources
    /// only the diagonal. The diagonal equals
    /// [`observation_variance`](Self::observation_variance) bit for bit.
    pub fn observation_covariance(&self, x: &[f64]) -> Result<CovarianceMatrix> {
        if x.is_empty() {
            return Err(Error::input("observations", "observation vector is empty"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("observations", "observations must be finite"));
        }
        if self.sources.is_empty() {
            return Err(Error::input("budget", "error budget has no sources"));
        }
        let n = x.len();
        for source in &self.sources {
            if let SourceKind::Custom { coefficients } = &source.kind {
                if coefficients.len() != n {
                    return Err(Error::dimension("coefficients", n, coefficients.len()));
                }
            }
        }

        let coeffs: Vec<Vec<f64>> = self
            .sources
            .iter()
            .map(|s| (0..n).map(|i| s.coefficient(i, x[i])).collect::<Result<_>>())
            .collect::<Result<_>>()?;

        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut total = 0.0;
                for (source, c) in self.sources.iter().zip(&coeffs) {
                    if i == j || source.is_shared() {
                        total += term(c[i], c[j], source.sigma);
                    }
                }
                m[(i, j)] = total;
            }
        }
        CovarianceMatrix::new(m)
    }
}

// Kept as one expression so that diagonal and scalar variances agree exactly.
#[inline]
fn term(ci: f64, cj: f64, sigma: f64) -> f64 {
    (ci * cj) * (sigma * sigma)
}

/// Covariance of two errors `δ = k + p` and `ε = k + q` with mutually
/// uncorrelated components: the variance of the communal component `k`.
pub fn co_uncertainty(sigma_shared: f64) -> Result<f64> {
    if !sigma_shared.is_finite() || sigma_shared < 0.0 {
        return Err(Error::input(
            "sigma_shared",
            format!("must be finite and non-negative, got {sigma_shared}"),
        ));
    }
    Ok(sigma_shared * sigma_shared)
}

/// A labelled sequence of error values.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSequence {
    values: Vec<f64>,
    label: String,
}

impl ErrorSequence {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input("values", format!("value at index {i} is not finite")));
        }
        Ok(ErrorSequence {
            values,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(a: f64, b: f64, c: f64) -> ErrorBudget {
        ErrorBudget::instrument(a, b, c).unwrap()
    }

    #[test]
    fn compose_sums_components() {
        let b = budget(0.0, 0.0, 0.0);
        assert_eq!(b.compose_error(&[0.0, 0.0, 0.0], 0, 100.0).unwrap(), 0.0);
        let e = b.compose_error(&[0.5, 0.01, -0.2], 0, 100.0).unwrap();
        assert!((e - 1.3).abs() < 1e-12);
    }

    #[test]
    fn compose_rejects_wrong_count() {
        let b = budget(1.0, 0.0, 0.0);
        assert!(matches!(
            b.compose_error(&[0.1, 0.2], 0, 1.0),
            Err(Error::Dimension { expected: 3, actual: 2, .. })
        ));
    }

    #[test]
    fn compose_with_custom_source() {
        let b = ErrorBudget::new(vec![
            ErrorSource::zero_point(1.0).unwrap(),
            ErrorSource::custom(vec![2.0, -1.0], 1.0, Sharing::SharedAcrossObservations).unwrap(),
        ]);
        assert_eq!(b.compose_error(&[0.5, 0.25], 0, 7.0).unwrap(), 1.0);
        assert_eq!(b.compose_error(&[0.5, 0.25], 1, 7.0).unwrap(), 0.25);
        assert!(b.compose_error(&[0.5, 0.25], 2, 7.0).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(budget(1.0, 0.0, 0.0).observation_variance(0, 123.0).unwrap(), 1.0);
        let v = budget(3.0, 0.1, 4.0).observation_variance(0, 10.0).unwrap();
        assert!((v - 26.0).abs() < 1e-12);
        assert!(ErrorBudget::default().observation_variance(0, 1.0).is_err());
    }

    #[test]
    fn covariance_examples() {
        let zero = budget(0.0, 0.0, 0.0).observation_covariance(&[1.0, 2.0]).unwrap();
        assert!(zero.as_matrix().iter().all(|&v| v == 0.0));

        let ones = budget(1.0, 0.0, 0.0).observation_covariance(&[1.0, 5.0, 9.0]).unwrap();
        assert_eq!(ones.as_matrix(), &DMatrix::from_element(3, 3, 1.0));

        assert!(budget(1.0, 0.0, 0.0).observation_covariance(&[]).is_err());
    }

    #[test]
    fn covariance_structure_matches_shared_pattern() {
        let (sa, sb, sc) = (0.3, 0.02, 0.7);
        let x = [2.0, 5.0, -3.0, 11.0];
        let d = budget(sa, sb, sc).observation_covariance(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut expected = sa * sa + x[i] * x[j] * sb * sb;
                if i == j {
                    expected += sc * sc;
                }
                assert!((d.get(i, j) - expected).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn independent_sources_give_diagonal() {
        let b = ErrorBudget::new(vec![
            ErrorSource::with_sharing(SourceKind::ZeroPoint, 1.0, Sharing::IndependentPerObservation).unwrap(),
            ErrorSource::with_sharing(SourceKind::Proportional, 0.1, Sharing::IndependentPerObservation).unwrap(),
            ErrorSource::scale_non_uniformity(0.5).unwrap(),
        ]);
        let d = b.observation_covariance(&[1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(d.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn custom_length_mismatch() {
        let b = ErrorBudget::new(vec![ErrorSource::custom(
            vec![1.0, 2.0],
            1.0,
            Sharing::SharedAcrossObservations,
        )
        .unwrap()]);
        assert!(matches!(
            b.observation_covariance(&[1.0, 2.0, 3.0]),
            Err(Error::Dimension { field: "coefficients", .. })
        ));
    }

    #[test]
    fn sigma_must_be_non_negative() {
        assert!(ErrorSource::zero_point(-1.0).is_err());
        assert!(ErrorSource::zero_point(f64::NAN).is_err());
    }

    #[test]
    fn default_sharing() {
        assert!(ErrorSource::zero_point(1.0).unwrap().is_shared());
        assert!(ErrorSource::proportional(1.0).unwrap().is_shared());
        assert!(!ErrorSource::scale_non_uniformity(1.0).unwrap().is_shared());
    }

    #[test]
    fn co_uncertainty_examples() {
        assert_eq!(co_uncertainty(0.0).unwrap(), 0.0);
        assert_eq!(co_uncertainty(2.0).unwrap(), 4.0);
        assert!(co_uncertainty(-0.1).is_err());
    }

    // Exact enumeration over k, p, q uniform on {-1, 0, 1}.
    #[test]
    fn co_uncertainty_by_enumeration() {
        let support = [-1.0, 0.0, 1.0];
        let mut cov = 0.0;
        let mut var_k: f64 = 0.0;
        let mut count = 0.0;
        for &k in &support {
            for &p in &support {
                for &q in &support {
                    cov += (k + p) * (k + q);
                    var_k += k * k;
                    count += 1.0;
                }
            }
        }
        cov /= count;
        var_k /= count;
        assert_eq!(cov, var_k);
        assert!((co_uncertainty(var_k.sqrt()).unwrap() - cov).abs() < 1e-15);
    }

    #[test]
    fn error_sequence_rejects_non_finite() {
        assert!(ErrorSequence::new(vec![1.0, f64::INFINITY], "x").is_err());
        let s = ErrorSequence::new(vec![1.0, 2.0], "x").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.label(), "x");
    }
}
