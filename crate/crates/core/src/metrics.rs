//! Accuracy measures and log-log rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard added to every estimated density before taking logs: the spacing
/// between 1.0 and the next representable double.
pub const ANLL_EPSILON: f64 = f64::EPSILON;

/// Mean absolute deviation between estimated and true densities.
pub fn mae(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: estimated.len(),
        });
    }
    if estimated.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let total: f64 = estimated.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / estimated.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnllScore {
    pub anll: f64,
    /// Test points whose estimated density was exactly zero.
    pub epsilon_hits: usize,
}

/// `-(1/m) Σ log(f̂(x_j) + ε)`.
pub fn anll(estimated: &[f64]) -> Result<AnllScore> {
    if estimated.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if let Some(bad) = estimated.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "density estimates must be nonnegative, got {bad}"
        )));
    }
    let total: f64 = estimated.iter().map(|f| (f + ANLL_EPSILON).ln()).sum();
    Ok(AnllScore {
        anll: -total / estimated.len() as f64,
        epsilon_hits: estimated.iter().filter(|f| **f == 0.0).count(),
    })
}

/// Accuracy of one fitted model on one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: Option<f64>,
    pub anll: f64,
    pub n_test: usize,
    pub epsilon_hits: usize,
    pub epsilon: f64,
}

impl EvalReport {
    /// Score estimates against optional true densities (MAE needs the truth).
    pub fn score(estimated: &[f64], truth: Option<&[f64]>) -> Result<Self> {
        let AnllScore { anll, epsilon_hits } = anll(estimated)?;
        let mae = truth.map(|t| mae(estimated, t)).transpose()?;
        Ok(Self {
            mae,
            anll,
            n_test: estimated.len(),
            epsilon_hits,
            epsilon: ANLL_EPSILON,
        })
    }
}

/// OLS fit of `log(error) = intercept + slope · log(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `NaN` with exactly two points.
    pub slope_stderr: f64,
}

pub fn rate_fit(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: pairs.len(),
        });
    }
    if let Some((n, e)) = pairs.iter().find(|(n, e)| !(*n > 0.0 && *e > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "rate pairs need positive n and error, got ({n}, {e})"
        )));
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|(n, e)| (n.ln(), e.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all n values are equal".to_string()));
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = logs
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = (rss / (k - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Slope of `log(error)` against `log(n)`.
pub fn rate_slope(pairs: &[(f64, f64)]) -> Result<f64> {
    rate_fit(pairs).map(|f| f.slope)
}

/// Mean and sample standard deviation (`0` for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0);
        assert!((mae(&[1.0, 3.0], &[2.0, 1.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn anll_examples() {
        let one = anll(&[1.0; 3]).unwrap();
        assert!(one.anll.abs() < 1e-15);
        assert_eq!(one.epsilon_hits, 0);

        let zero = anll(&[0.0; 5]).unwrap();
        assert!((zero.anll - 36.04365338911715).abs() < 1e-9);
        assert_eq!(zero.epsilon_hits, 5);

        let e = std::f64::consts::E;
        assert!((anll(&[e, e.powi(3)]).unwrap().anll + 2.0).abs() < 1e-9);
        assert!(anll(&[-1.0]).is_err());
    }

    #[test]
    fn exact_power_law_slope() {
        let pairs: Vec<_> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-1.0 / 3.0)))
            .collect();
        assert!((rate_slope(&pairs).unwrap() + 1.0 / 3.0).abs() < 1e-10);
        let flat: Vec<_> = [10.0, 20.0, 40.0].iter().map(|&n| (n, 0.7)).collect();
        assert!(rate_slope(&flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law_slope() {
        let mut rng = crate::rng::stream(2024, 0);
        let pairs: Vec<_> = (0..20)
            .map(|i| {
                let n = 100.0 * 1.3f64.powi(i);
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                (n, 2.0 * n.powf(-0.25) * (1.0 + 0.01 * noise))
            })
            .collect();
        let fit = rate_fit(&pairs).unwrap();
        assert!((fit.slope + 0.25).abs() < 0.02, "slope {}", fit.slope);
        assert!(fit.slope_stderr > 0.0);
    }

    #[test]
    fn rate_needs_three_positive_pairs() {
        assert!(rate_slope(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(rate_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 0.1)]).is_err());
    }
}
