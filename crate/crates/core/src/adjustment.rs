//! Least-squares adjustment of over-determined observation systems.
//!
//! The error equations are `V = X − A·Y` for `n` observations `X` and `t < n`
//! parameters `Y`. The adjusted values minimize `VᵀV`, which gives
//!
//! ```text
//! Y     = [AᵀA]⁻¹ Aᵀ X
//! σ(Δx) = √(Σ v_i² / (n − t))          (Bessel)
//! D(ΔY) = σ²(Δx) [AᵀA]⁻¹               (Type A covariance)
//! ```
//!
//! `Y` comes from a Householder QR factorization of `A`, followed by
//! iterative refinement in which residuals and `AᵀV` are accumulated in
//! doubled precision. When the exact solution is representable it is
//! usually recovered exactly. The cofactor matrix `[AᵀA]⁻¹` is formed
//! explicitly since it is part of the reported result.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::error_model::CovarianceMatrix;
use crate::propagation::{propagate, LinearMap};

/// Largest accepted condition number of the normal matrix `AᵀA`.
pub const MAX_CONDITION: f64 = 1e12;

/// Default degrees of freedom below which a warning is attached.
pub const DEFAULT_DOF_WARNING: usize = 10;

const REFINEMENT_STEPS: usize = 3;

/// The `n × t` coefficient matrix of the error equations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
}

impl DesignMatrix {
    /// Checks shape and finiteness. Column rank is checked when the matrix
    /// is factored.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (n, t) = entries.shape();
        if t == 0 {
            return Err(Error::input("design", "design matrix has no columns"));
        }
        if n <= t {
            return Err(Error::input(
                "design",
                format!("need more observations than parameters, got n = {n}, t = {t}"),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("design", "entries must be finite"));
        }
        Ok(DesignMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != t {
                return Err(Error::dimension("design", t, row.len()));
            }
        }
        Self::new(DMatrix::from_fn(rows.len(), t, |i, j| rows[i][j]))
    }

    /// A single column of coefficients.
    pub fn column(coefficients: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(coefficients.len(), 1, coefficients))
    }

    /// The all-ones column of the direct model.
    pub fn ones(n: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(n, 1, 1.0))
    }

    pub fn observations(&self) -> usize {
        self.entries.nrows()
    }

    pub fn parameters(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn apply(&self, parameters: &[f64]) -> Result<Vec<f64>> {
        if parameters.len() != self.parameters() {
            return Err(Error::dimension("true_values", self.parameters(), parameters.len()));
        }
        let y = DVector::from_column_slice(parameters);
        Ok((&self.entries * y).iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    values: DVector<f64>,
}

impl ObservationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input("observations", format!("observation {i} is not finite")));
        }
        Ok(ObservationVector {
            values: DVector::from_vec(values),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjustOptions {
    pub dof_warning_threshold: usize,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        AdjustOptions {
            dof_warning_threshold: DEFAULT_DOF_WARNING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// Too few redundant observations for the Bessel estimate to mean much.
    LowDegreesOfFreedom { dof: usize, threshold: usize },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::LowDegreesOfFreedom { dof, threshold } => write!(
                f,
                "low degrees of freedom: n - t = {dof} < {threshold}; the Bessel estimate of sigma_unit is unreliable"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentResult {
    pub measured_values: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Unit standard deviation σ(Δx) from the Bessel formula.
    pub sigma_unit: f64,
    /// `[AᵀA]⁻¹`.
    pub cofactor: DMatrix<f64>,
    /// `sigma_unit² · cofactor`.
    pub type_a_covariance: DMatrix<f64>,
    pub degrees_of_freedom: usize,
    pub warnings: Vec<Warning>,
}

impl AdjustmentResult {
    /// Type A standard uncertainties σ(Δy_j).
    pub fn standard_uncertainties(&self) -> Vec<f64> {
        self.type_a_covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// Solution `Y` and residuals `V` of one set of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub measured_values: DVector<f64>,
    pub residuals: DVector<f64>,
    pub sigma_unit: f64,
}

/// A factored design matrix, reusable across observation vectors.
#[derive(Debug, Clone)]
pub struct Adjuster {
    design: DesignMatrix,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    cofactor: DMatrix<f64>,
    options: AdjustOptions,
}

impl Adjuster {
    pub fn new(design: DesignMatrix) -> Result<Self> {
        Self::with_options(design, AdjustOptions::default())
    }

    pub fn with_options(design: DesignMatrix, options: AdjustOptions) -> Result<Self> {
        let a = design.as_matrix();
        let normal = a.transpose() * a;
        let condition = condition_number(&normal);
        if condition > MAX_CONDITION {
            return Err(Error::Singular {
                condition,
                columns: deficient_columns(a),
            });
        }
        let qr = a.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let cofactor = normal
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::Singular {
                condition,
                columns: deficient_columns(a),
            })?;
        let cofactor = (&cofactor + cofactor.transpose()) * 0.5;
        Ok(Adjuster {
            design,
            q,
            r,
            cofactor,
            options,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.design.observations() - self.design.parameters()
    }

    /// Warnings that apply to every fit with this design.
    pub fn warnings(&self) -> Vec<Warning> {
        dof_warnings(self.degrees_of_freedom(), self.options)
    }

    /// `[AᵀA]⁻¹`.
    pub fn cofactor(&self) -> &DMatrix<f64> {
        &self.cofactor
    }

    /// `[AᵀA]⁻¹Aᵀ`, the linear map from observations to adjusted values.
    pub fn estimator(&self) -> DMatrix<f64> {
        &self.cofactor * self.design.as_matrix().transpose()
    }

    pub fn estimator_map(&self) -> LinearMap {
        LinearMap::new(self.estimator(), None).expect("estimator of a validated design is finite")
    }

    /// Covariance of the adjusted-value errors for arbitrary observation
    /// error covariance `D(ΔX)`: `K·D(ΔX)·Kᵀ` with `K = [AᵀA]⁻¹Aᵀ`.
    pub fn estimate_covariance(&self, observation_covariance: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        propagate(&self.estimator_map(), observation_covariance)
    }

    fn least_squares(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let qtb = self.q.transpose() * rhs;
        self.r
            .solve_upper_triangular(&qtb)
            .expect("triangular factor of a full-rank design is invertible")
    }

    /// Adjusted values, residuals and unit standard deviation.
    pub fn fit(&self, observations: &[f64]) -> Result<Fit> {
        let n = self.design.observations();
        if observations.len() != n {
            return Err(Error::dimension("observations", n, observations.len()));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("observations", "observations must be finite"));
        }
        let x = DVector::from_column_slice(observations);
        let mut y = self.least_squares(&x);
        let mut v = self.residuals(&x, &y);
        for _ in 0..REFINEMENT_STEPS {
            let correction = &self.cofactor * self.project(&v);
            if correction.iter().all(|c| *c == 0.0) {
                break;
            }
            y += correction;
            v = self.residuals(&x, &y);
        }
        let sigma_unit = bessel(&v, self.degrees_of_freedom());
        Ok(Fit {
            measured_values: y,
            residuals: v,
            sigma_unit,
        })
    }

    /// `X − A·Y`, each entry accumulated in doubled precision and rounded once.
    fn residuals(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let a = self.design.as_matrix();
        DVector::from_fn(x.len(), |i, _| {
            let mut acc = CompensatedSum::new(x[i]);
            for j in 0..y.len() {
                acc.add_product(-a[(i, j)], y[j]);
            }
            acc.value()
        })
    }

    /// `Aᵀ·V` in doubled precision.
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let a = self.design.as_matrix();
        DVector::from_fn(a.ncols(), |j, _| {
            let mut acc = CompensatedSum::new(0.0);
            for i in 0..v.len() {
                acc.add_product(a[(i, j)], v[i]);
            }
            acc.value()
        })
    }

    pub fn solve(&self, observations: &ObservationVector) -> Result<AdjustmentResult> {
        let fit = self.fit(observations.as_slice())?;
        Ok(self.assemble(fit))
    }

    fn assemble(&self, fit: Fit) -> AdjustmentResult {
        let dof = self.degrees_of_freedom();
        let type_a_covariance = &self.cofactor * (fit.sigma_unit * fit.sigma_unit);
        AdjustmentResult {
            measured_values: fit.measured_values,
            residuals: fit.residuals,
            sigma_unit: fit.sigma_unit,
            cofactor: self.cofactor.clone(),
            type_a_covariance,
            degrees_of_freedom: dof,
            warnings: self.warnings(),
        }
    }
}

/// Dot-product accumulator using error-free transformations (TwoSum and an
/// FMA-based TwoProduct); the result is as accurate as if computed in twice
/// the working precision.
struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn new(start: f64) -> Self {
        CompensatedSum { sum: start, err: 0.0 }
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let p_err = a.mul_add(b, -p);
        let s = self.sum + p;
        let z = s - self.sum;
        let s_err = (self.sum - (s - z)) + (p - z);
        self.sum = s;
        self.err += s_err + p_err;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

fn bessel(residuals: &DVector<f64>, dof: usize) -> f64 {
    (residuals.norm_squared() / dof as f64).sqrt()
}

fn dof_warnings(dof: usize, options: AdjustOptions) -> Vec<Warning> {
    if dof < options.dof_warning_threshold {
        vec![Warning::LowDegreesOfFreedom {
            dof,
            threshold: options.dof_warning_threshold,
        }]
    } else {
        Vec::new()
    }
}

fn condition_number(normal: &DMatrix<f64>) -> f64 {
    let eig = normal.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Columns that are (numerically) linear combinations of the columns before
/// them, scanned left to right.
fn deficient_columns(a: &DMatrix<f64>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut deficient = Vec::new();
    for j in 0..a.ncols() {
        let mut trial = kept.clone();
        trial.push(j);
        let sub = a.select_columns(trial.iter());
        if condition_number(&(sub.transpose() * &sub)) > MAX_CONDITION {
            deficient.push(j);
        } else {
            kept = trial;
        }
    }
    deficient
}

/// Multivariate adjustment with default options.
pub fn solve(design: &DesignMatrix, observations: &ObservationVector) -> Result<AdjustmentResult> {
    solve_with(design, observations, AdjustOptions::default())
}

pub fn solve_with(
    design: &DesignMatrix,
    observations: &ObservationVector,
    options: AdjustOptions,
) -> Result<AdjustmentResult> {
    if observations.len() != design.observations() {
        return Err(Error::dimension("observations", design.observations(), observations.len()));
    }
    Adjuster::with_options(design.clone(), options)?.solve(observations)
}

/// One unknown observed through `x_i = a_i·y`:
/// `y = Σa_i x_i / Σa_i²` and `σ(Δy) = σ(Δx) / √(Σa_i²)`.
pub fn solve_single_indirect(
    coefficients: &[f64],
    observations: &ObservationVector,
    options: AdjustOptions,
) -> Result<AdjustmentResult> {
    let n = observations.len();
    if coefficients.len() != n {
        return Err(Error::dimension("coefficients", n, coefficients.len()));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::input("coefficients", "coefficients must be finite"));
    }
    if coefficients.iter().all(|&c| c == 0.0) {
        return Err(Error::input("coefficients", "coefficient vector is all zero"));
    }
    if n < 2 {
        return Err(Error::input("observations", "need at least two observations"));
    }
    let x = observations.as_slice();
    let sum_sq: f64 = coefficients.iter().map(|a| a * a).sum();
    let weighted: f64 = coefficients.iter().zip(x).map(|(a, x)| a * x).sum();
    let y = weighted / sum_sq;
    let residuals = DVector::from_iterator(n, coefficients.iter().zip(x).map(|(a, x)| x - a * y));
    let fit = Fit {
        sigma_unit: bessel(&residuals, n - 1),
        measured_values: DVector::from_element(1, y),
        residuals,
    };
    Ok(scalar_result(fit, 1.0 / sum_sq, n - 1, options))
}

/// Repeated direct observations of one quantity: `y = Σx_i / n` and
/// `σ(Δy) = σ(Δx) / √n`.
pub fn solve_direct(observations: &ObservationVector, options: AdjustOptions) -> Result<AdjustmentResult> {
    let n = observations.len();
    if n < 2 {
        return Err(Error::input(
            "observations",
            "need at least two observations for a non-zero degree of freedom",
        ));
    }
    let x = observations.as_slice();
    // running mean: exact for constant observations
    let mut y = 0.0;
    for (k, &v) in x.iter().enumerate() {
        y += (v - y) / (k + 1) as f64;
    }
    let residuals = DVector::from_iterator(n, x.iter().map(|v| v - y));
    let fit = Fit {
        sigma_unit: bessel(&residuals, n - 1),
        measured_values: DVector::from_element(1, y),
        residuals,
    };
    Ok(scalar_result(fit, 1.0 / n as f64, n - 1, options))
}

fn scalar_result(fit: Fit, cofactor: f64, dof: usize, options: AdjustOptions) -> AdjustmentResult {
    let cofactor = DMatrix::from_element(1, 1, cofactor);
    let type_a_covariance = &cofactor * (fit.sigma_unit * fit.sigma_unit);
    AdjustmentResult {
        measured_values: fit.measured_values,
        residuals: fit.residuals,
        sigma_unit: fit.sigma_unit,
        cofactor,
        type_a_covariance,
        degrees_of_freedom: dof,
        warnings: dof_warnings(dof, options),
    }
}

/// Design matrix of the three-object steelyard weighing: A, B and C alone,
/// then the pairs AB, BC and AC.
pub fn steelyard_design() -> DesignMatrix {
    DesignMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 1.0, 0.0],
        vec![0.0, 1.0, 1.0],
        vec![1.0, 0.0, 1.0],
    ])
    .expect("steelyard design is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: &[f64]) -> ObservationVector {
        ObservationVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn steelyard_estimator_matches_closed_form() {
        let expected = [
            [4.0, -1.0, -1.0, 3.0, -2.0, 3.0],
            [-1.0, 4.0, -1.0, 3.0, 3.0, -2.0],
            [-1.0, -1.0, 4.0, -2.0, 3.0, 3.0],
        ];
        let k = Adjuster::new(steelyard_design()).unwrap().estimator();
        for i in 0..3 {
            for j in 0..6 {
                assert!((k[(i, j)] - expected[i][j] / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steelyard_exact_fit() {
        let a = steelyard_design();
        let x = a.apply(&[1.0, 2.0, 3.0]).unwrap();
        let r = solve(&a, &obs(&x)).unwrap();
        assert_eq!(r.measured_values.as_slice(), &[1.0, 2.0, 3.0]);
        assert!(r.residuals.iter().all(|&v| v == 0.0));
        assert_eq!(r.sigma_unit, 0.0);
        assert_eq!(r.degrees_of_freedom, 3);
        assert_eq!(
            r.warnings,
            vec![Warning::LowDegreesOfFreedom { dof: 3, threshold: 10 }]
        );
    }

    #[test]
    fn direct_model_through_general_solver() {
        let r = solve(&DesignMatrix::ones(5).unwrap(), &obs(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert!((r.measured_values[0] - 3.0).abs() < 1e-14);
        let expected_v = [-2.0, -1.0, 0.0, 1.0, 2.0];
        for (v, e) in r.residuals.iter().zip(expected_v) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!((r.sigma_unit - 2.5f64.sqrt()).abs() < 1e-14);
        assert!((r.standard_uncertainties()[0] - 2.5f64.sqrt() / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_underdetermined_and_singular() {
        assert!(DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        let a = DesignMatrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![1.0, 2.0, 0.0],
            vec![1.0, 2.0, 5.0],
        ])
        .unwrap();
        match Adjuster::new(a) {
            Err(Error::Singular { columns, .. }) => assert_eq!(columns, vec![1]),
            other => panic!("expected singularity, got {other:?}"),
        }
        let zero_col = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        match Adjuster::new(zero_col) {
            Err(Error::Singular { columns, .. }) => assert_eq!(columns, vec![1]),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = solve(&steelyard_design(), &obs(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 6, actual: 2, .. }));
    }

    #[test]
    fn single_indirect_examples() {
        let opts = AdjustOptions::default();
        let r = solve_single_indirect(&[1.0, 1.0], &obs(&[2.0, 4.0]), opts).unwrap();
        assert_eq!(r.measured_values[0], 3.0);
        let r = solve_single_indirect(&[1.0, 2.0], &obs(&[1.0, 2.0]), opts).unwrap();
        assert_eq!(r.measured_values[0], 1.0);
        assert!(r.residuals.iter().all(|&v| v == 0.0));
        assert_eq!(r.sigma_unit, 0.0);
        assert!(solve_single_indirect(&[0.0, 0.0], &obs(&[1.0, 2.0]), opts).is_err());
        assert!(solve_single_indirect(&[1.0], &obs(&[1.0, 2.0]), opts).is_err());
    }

    #[test]
    fn single_indirect_matches_general_path() {
        let a = [1.0, 2.0, 3.0];
        let x = obs(&[1.1, 1.9, 3.2]);
        let special = solve_single_indirect(&a, &x, AdjustOptions::default()).unwrap();
        let general = solve(&DesignMatrix::column(&a).unwrap(), &x).unwrap();
        assert!((special.measured_values[0] - general.measured_values[0]).abs() < 1e-12);
        assert!(
            (special.standard_uncertainties()[0] - general.standard_uncertainties()[0]).abs() < 1e-12
        );
        let sigma_y = special.sigma_unit / 14f64.sqrt();
        assert!((special.standard_uncertainties()[0] - sigma_y).abs() < 1e-15);
    }

    #[test]
    fn direct_examples() {
        let opts = AdjustOptions::default();
        let c = 7.3;
        let r = solve_direct(&obs(&[c, c, c]), opts).unwrap();
        assert_eq!(r.measured_values[0], c);
        assert_eq!(r.sigma_unit, 0.0);
        assert_eq!(r.standard_uncertainties()[0], 0.0);

        let r = solve_direct(&obs(&[1.0, 2.0, 3.0, 4.0, 5.0]), opts).unwrap();
        assert_eq!(r.measured_values[0], 3.0);
        assert!((r.sigma_unit - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((r.standard_uncertainties()[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.residuals.iter().sum::<f64>(), 0.0);

        assert!(solve_direct(&obs(&[1.0]), opts).is_err());
    }

    #[test]
    fn direct_shift_moves_only_the_estimate() {
        let opts = AdjustOptions::default();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let shifted: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
        let a = solve_direct(&obs(&x), opts).unwrap();
        let b = solve_direct(&obs(&shifted), opts).unwrap();
        assert_eq!(a.residuals, b.residuals);
        assert_eq!(a.sigma_unit, b.sigma_unit);
        assert_eq!(b.measured_values[0], a.measured_values[0] + 10.0);
    }

    #[test]
    fn dof_warning_threshold_is_configurable() {
        let x = obs(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let quiet = solve_direct(&x, AdjustOptions { dof_warning_threshold: 4 }).unwrap();
        assert!(quiet.warnings.is_empty());
        let loud = solve_direct(&x, AdjustOptions { dof_warning_threshold: 5 }).unwrap();
        assert_eq!(loud.warnings.len(), 1);
    }

    #[test]
    fn type_a_covariance_is_scaled_cofactor() {
        let a = steelyard_design();
        let r = solve(&a, &obs(&[1.02, 1.97, 3.05, 2.96, 5.07, 3.91])).unwrap();
        let s2 = r.sigma_unit * r.sigma_unit;
        assert_eq!(r.type_a_covariance, &r.cofactor * s2);
        let atv = a.as_matrix().transpose() * &r.residuals;
        assert!(atv.norm() < 1e-12);
    }
}
