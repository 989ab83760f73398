use std::fmt;
use std::ops::Add;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance on negative eigenvalues, as a fraction of the largest
/// eigenvalue magnitude.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Covariance matrix of an error sequence, `E(ΔX ΔXᵀ)`.
///
/// Always square, exactly symmetric, with a non-negative diagonal, and
/// positive semidefinite up to [`PSD_TOLERANCE`].
#[derive(Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates `entries` as a covariance matrix. Symmetry is checked
    /// exactly, as stored.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&entries)?;
        let n = entries.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Self::validated(entries)
    }

    /// Averages `entries` with its transpose before validating, absorbing
    /// floating-point asymmetry left by matrix products.
    pub fn symmetrized(entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&entries)?;
        let sym = (&entries + entries.transpose()) * 0.5;
        Self::validated(sym)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::input("covariance", "matrix must have at least one row"));
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::dimension("covariance", n, row.len()));
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("covariance", "dimension must be positive"));
        }
        Ok(CovarianceMatrix {
            entries: DMatrix::zeros(dim, dim),
        })
    }

    /// Diagonal matrix of independent variances.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::input("covariance", "dimension must be positive"));
        }
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            variances,
        )))
    }

    fn validated(mut entries: DMatrix<f64>) -> Result<Self> {
        let (min, max) = eigen_extremes(&entries);
        let scale = min.abs().max(max.abs());
        let slack = PSD_TOLERANCE * scale;
        if min < -slack {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        for i in 0..entries.nrows() {
            let d = entries[(i, i)];
            if d < -slack {
                return Err(Error::NotPositiveSemidefinite {
                    min_eigenvalue: min,
                    max_eigenvalue: max,
                });
            }
            // rounding residue only; the eigenvalue test bounds it
            if d < 0.0 {
                entries[(i, i)] = 0.0;
            }
        }
        Ok(CovarianceMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn variances(&self) -> Vec<f64> {
        self.entries.diagonal().iter().copied().collect()
    }

    /// Square roots of the diagonal.
    pub fn std_devs(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_extremes(&self) -> (f64, f64) {
        eigen_extremes(&self.entries)
    }

    /// Entries multiplied by a non-negative factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(Error::input("factor", "scale factor must be finite and non-negative"));
        }
        Ok(CovarianceMatrix {
            entries: &self.entries * factor,
        })
    }
}

impl Add for &CovarianceMatrix {
    type Output = Result<CovarianceMatrix>;

    fn add(self, rhs: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        if self.dim() != rhs.dim() {
            return Err(Error::dimension("covariance", self.dim(), rhs.dim()));
        }
        // a sum of PSD matrices is PSD and entrywise addition keeps symmetry
        Ok(CovarianceMatrix {
            entries: &self.entries + &rhs.entries,
        })
    }
}

impl fmt::Debug for CovarianceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovarianceMatrix")
            .field("dim", &self.dim())
            .field("entries", &self.to_rows())
            .finish()
    }
}

fn check_shape(entries: &DMatrix<f64>) -> Result<()> {
    if entries.nrows() == 0 {
        return Err(Error::input("covariance", "dimension must be positive"));
    }
    if entries.nrows() != entries.ncols() {
        return Err(Error::dimension("covariance", entries.nrows(), entries.ncols()));
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("covariance", "entries must be finite"));
    }
    Ok(())
}

fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert_eq!(
            CovarianceMatrix::new(m.clone()).unwrap_err(),
            Error::NotSymmetric { row: 0, col: 1 }
        );
        let sym = CovarianceMatrix::symmetrized(m).unwrap();
        assert_eq!(sym.get(0, 1), sym.get(1, 0));
        assert_eq!(sym.get(0, 1), 0.45);
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = CovarianceMatrix::new(m).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn accepts_rank_one() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let c = CovarianceMatrix::new(m).unwrap();
        let (min, max) = c.eigen_extremes();
        assert!(min.abs() < 1e-12);
        assert!((max - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_non_square() {
        assert!(CovarianceMatrix::new(DMatrix::zeros(0, 0)).is_err());
        assert!(matches!(
            CovarianceMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::Dimension { .. })
        ));
        assert!(CovarianceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0]]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(CovarianceMatrix::new(m).is_err());
    }
}
