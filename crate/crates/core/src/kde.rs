//! Gaussian kernel density estimate with Scott's-rule bandwidth on the full
//! sample covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ensemble::DensityEstimate;
use crate::error::{Error, Result};
use crate::points::{check_dim, check_finite, Points};

// Smallest admissible eigenvalue relative to the largest.
const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KdeModel {
    points: Points,
    bandwidth_factor: f64,
    covariance: Vec<f64>,
    // L^{-1} with L the Cholesky factor of factor²·Σ̂, row-major
    whitening: Vec<f64>,
    whitened: Points,
    normalizer: f64,
}

impl KdeModel {
    pub fn fit(data: &Points) -> Result<Self> {
        let (n, d) = (data.len(), data.dim());
        if n <= d {
            return Err(Error::InsufficientData { needed: d + 1, got: n });
        }
        data.check_finite()?;
        let covariance = data.covariance()?;
        let sigma = DMatrix::from_row_slice(d, d, &covariance);
        let eig = sigma.clone().symmetric_eigen();
        let largest = eig.eigenvalues.max();
        let smallest = eig.eigenvalues.min();
        if !(largest > 0.0) || smallest <= largest * SINGULAR_TOLERANCE {
            return Err(Error::SingularCovariance(format!(
                "eigenvalues span [{smallest:e}, {largest:e}]"
            )));
        }

        let bandwidth_factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
        let kernel_cov = sigma * (bandwidth_factor * bandwidth_factor);
        let chol = kernel_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularCovariance("Cholesky factorization failed".to_string()))?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::SingularCovariance("triangular solve failed".to_string()))?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let normalizer =
            (-0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det)).exp();

        let mut whitening = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                whitening.push(l_inv[(i, j)]);
            }
        }
        let whitened = data.map_rows(d, |x, out| whiten(&whitening, d, x, out))?;
        Ok(Self {
            points: data.clone(),
            bandwidth_factor,
            covariance,
            whitening,
            whitened,
            normalizer,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    /// Scott factor `n^{-1/(d+4)}`.
    pub fn bandwidth_factor(&self) -> f64 {
        self.bandwidth_factor
    }

    /// Unbiased sample covariance `Σ̂` (row-major); the kernel covariance is
    /// `factor² · Σ̂`.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// `((2π)^d · det(factor²·Σ̂))^{-1/2}`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Kernel covariance as a matrix, for callers that need it.
    pub fn kernel_covariance(&self) -> DMatrix<f64> {
        let d = self.points.dim();
        DMatrix::from_row_slice(d, d, &self.covariance) * self.bandwidth_factor.powi(2)
    }
}

fn whiten(l_inv: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..=i).map(|j| l_inv[i * d + j] * x[j]).sum();
    }
}

impl DensityEstimate for KdeModel {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(d, x.len())?;
        check_finite(x)?;
        let mut z = vec![0.0; d];
        whiten(&self.whitening, d, x, &mut z);
        let mut total = 0.0;
        for w in self.whitened.rows() {
            let q: f64 = z.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
            total += (-0.5 * q).exp();
        }
        Ok(self.normalizer * total / self.points.len() as f64)
    }
}

/// Serialized KDE: the training points are the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeRecord {
    pub d: usize,
    pub points: Vec<f64>,
}

impl From<&KdeModel> for KdeRecord {
    fn from(m: &KdeModel) -> Self {
        Self {
            d: m.dim(),
            points: m.points.as_slice().to_vec(),
        }
    }
}

impl TryFrom<KdeRecord> for KdeModel {
    type Error = Error;

    fn try_from(rec: KdeRecord) -> Result<Self> {
        KdeModel::fit(&Points::new(rec.d, rec.points)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn mahalanobis_direct(model: &KdeModel, x: &[f64], y: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(a, b)| a - b));
        let inv = model.kernel_covariance().try_inverse().unwrap();
        (diff.transpose() * inv * &diff)[(0, 0)]
    }

    #[test]
    fn scott_factor_one_dimension() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = KdeModel::fit(&Points::from_column(&xs)).unwrap();
        assert!((m.bandwidth_factor() - 100f64.powf(-0.2)).abs() < 1e-15);
        assert!((m.bandwidth_factor() - 0.39811).abs() < 1e-5);
    }

    #[test]
    fn collinear_data_is_singular() {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 2.0 * i as f64 + 1.0]).collect();
        let err = KdeModel::fit(&Points::from_rows(&rows).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance(_)));
        assert!(err.to_string().contains("reduce the dimension"));
    }

    #[test]
    fn too_few_points() {
        let err = KdeModel::fit(&Points::from_column(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }

    #[test]
    fn two_point_symmetry() {
        let m = KdeModel::fit(&Points::from_column(&[0.0, 1.0])).unwrap();
        let a = m.density(&[0.25]).unwrap();
        let b = m.density(&[0.75]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(m.density(&[0.0]).unwrap() >= m.density(&[5.0]).unwrap());
    }

    #[test]
    fn whitened_form_matches_direct_quadratic() {
        let rows = [[0.1, 0.3], [0.5, 0.1], [0.9, 0.8], [0.4, 0.45], [0.2, 0.9]];
        let m = KdeModel::fit(&Points::from_rows(&rows).unwrap()).unwrap();
        let x = [0.33, 0.61];
        let inv_n = 1.0 / rows.len() as f64;
        let direct: f64 = rows
            .iter()
            .map(|r| m.normalizer() * (-0.5 * mahalanobis_direct(&m, &x, r)).exp() * inv_n)
            .sum();
        assert!((m.density(&x).unwrap() - direct).abs() < 1e-12);
    }
}
