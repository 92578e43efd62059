use serde::Serialize;

use crate::error::{Error, Result};

/// Theil's inequality statistic with its decomposition of the mean squared
/// error into bias, unequal variation and unequal covariation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheilStats {
    pub mse: f64,
    /// Inequality coefficient in `[0, 1]`.
    pub u: f64,
    pub u_bias: f64,
    pub u_variance: f64,
    pub u_covariance: f64,
}

impl TheilStats {
    pub fn decomposition_sum(&self) -> f64 {
        self.u_bias + self.u_variance + self.u_covariance
    }
}

/// Compares a simulated series with observations of the same length.
/// Moments are population moments, so the three shares sum to one whenever
/// the error is non-zero; a perfect fit reports all shares as zero.
pub fn theils_u(simulated: &[f64], observed: &[f64]) -> Result<TheilStats> {
    if simulated.len() != observed.len() {
        return Err(Error::Validation(format!(
            "series lengths differ: {} simulated, {} observed",
            simulated.len(),
            observed.len()
        )));
    }
    if simulated.is_empty() {
        return Err(Error::Validation("cannot compare empty series".into()));
    }
    if simulated.iter().chain(observed).any(|v| !v.is_finite()) {
        return Err(Error::Validation("series contain non-finite values".into()));
    }
    if simulated.iter().chain(observed).all(|v| *v == 0.0) {
        return Err(Error::Validation("both series are identically zero".into()));
    }

    let n = simulated.len() as f64;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / n;
    let (ms, mo) = (mean(simulated), mean(observed));
    let mut mse = 0.0;
    let (mut vs, mut vo, mut cov) = (0.0, 0.0, 0.0);
    let (mut ss, mut so) = (0.0, 0.0);
    for (s, o) in simulated.iter().zip(observed) {
        mse += (s - o).powi(2);
        vs += (s - ms).powi(2);
        vo += (o - mo).powi(2);
        cov += (s - ms) * (o - mo);
        ss += s * s;
        so += o * o;
    }
    let (mse, vs, vo, cov) = (mse / n, vs / n, vo / n, cov / n);
    let (sd_s, sd_o) = (vs.sqrt(), vo.sqrt());
    let u = mse.sqrt() / ((ss / n).sqrt() + (so / n).sqrt());
    if mse == 0.0 {
        return Ok(TheilStats {
            mse,
            u,
            u_bias: 0.0,
            u_variance: 0.0,
            u_covariance: 0.0,
        });
    }
    // (ms - mo)^2 + (sd_s - sd_o)^2 + 2 (sd_s sd_o - cov) = mse exactly, so
    // normalising by the sum removes only rounding.
    let bias = (ms - mo).powi(2);
    let variance = (sd_s - sd_o).powi(2);
    let covariance = (2.0 * (sd_s * sd_o - cov)).max(0.0);
    let total = bias + variance + covariance;
    Ok(TheilStats {
        mse,
        u,
        u_bias: bias / total,
        u_variance: variance / total,
        u_covariance: covariance / total,
    })
}
