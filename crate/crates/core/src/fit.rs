//! Log-log least squares.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, ZkError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% half-width of the slope.
    pub slope_ci: f64,
    pub n: usize,
}

/// Fit `log y = intercept + slope·log t`.
pub fn loglog_fit(times: &[f64], values: &[f64]) -> Result<PowerFit> {
    if times.len() != values.len() {
        return Err(ZkError::LengthMismatch { expected: times.len(), got: values.len() });
    }
    if times.len() < 3 {
        return Err(ZkError::InsufficientData(format!("{} points, need at least 3", times.len())));
    }
    if times.iter().chain(values).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(ZkError::InsufficientData("log-log fit needs positive finite samples".into()));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(ZkError::InsufficientData("all sample times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = n - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, dof).map_err(|e| ZkError::InvalidArgument(e.to_string()))?.inverse_cdf(0.975);
    Ok(PowerFit { slope, intercept, slope_ci: q * se, n: x.len() })
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let t = log_space(1.0, 100.0, 12);
        let v: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-0.75)).collect();
        let f = loglog_fit(&t, &v).unwrap();
        assert!((f.slope + 0.75).abs() < 1e-13);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.slope_ci < 1e-12);
    }

    #[test]
    fn interval_covers_noisy_slope() {
        let t = log_space(1.0, 10.0, 8);
        let noise = [0.01, -0.02, 0.015, 0.0, -0.01, 0.02, -0.015, 0.005];
        let v: Vec<f64> = t.iter().zip(noise).map(|(t, e)| t.powf(-1.0) * (1.0 + e)).collect();
        let f = loglog_fit(&t, &v).unwrap();
        assert!((f.slope + 1.0).abs() < f.slope_ci);
        // t quantile for 6 dof is 2.4469.
        assert!(f.slope_ci > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(loglog_fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).is_err());
    }
}
