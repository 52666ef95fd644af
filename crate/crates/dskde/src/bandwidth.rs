//! Rule-of-thumb bandwidth selection.
//!
//! The DS bandwidth minimizes the leading integrated-MSE term
//! `L(h) = C1/(N*M*h^3) + C2*h^4` under a truncated-normal working density,
//! which gives `h_DS = pi^(-1/7) * sigma^(5/7) * (N*M)^(-1/7)`. The CD
//! bandwidth follows Silverman's classical rule `h_CD = 1.06 * sigma *
//! N^(-1/5)`. The GPA query bandwidth is `h* = 5 * h^2`.

use std::f64::consts::PI;

use crate::estimators::FrameStack;
use crate::{Error, Result};

/// Default constant for the CD rule of thumb (Silverman's 1.06).
pub const SILVERMAN_CONSTANT: f64 = 1.06;

/// Bandwidths and sample-size metadata for one fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPlan {
    h: f64,
    h_star: f64,
    sigma_hat: f64,
    n: usize,
    m: usize,
}

impl BandwidthPlan {
    /// Build a plan from explicit values, enforcing `0 < h < 1`,
    /// `0 < h_star < h`, and `sigma_hat > 0`.
    pub fn new(h: f64, h_star: f64, sigma_hat: f64, n: usize, m: usize) -> Result<Self> {
        if h.is_nan() || h <= 0.0 || h >= 1.0 {
            return Err(Error::InvalidBandwidth { name: "h", value: h });
        }
        if h_star.is_nan() || h_star <= 0.0 || h_star >= h {
            return Err(Error::InvalidBandwidth {
                name: "h_star",
                value: h_star,
            });
        }
        if sigma_hat.is_nan() || sigma_hat <= 0.0 {
            return Err(Error::Degenerate(format!(
                "sigma_hat = {sigma_hat} must be positive"
            )));
        }
        Ok(Self {
            h,
            h_star,
            sigma_hat,
            n,
            m,
        })
    }

    /// Rule-of-thumb plan for the DS (and GPA-DS) estimator.
    pub fn ds(n: usize, m: usize, sigma: f64) -> Result<Self> {
        let h = ds_bandwidth(n, m, sigma)?;
        Self::new(h, gpa_bandwidth(h)?, sigma, n, m)
    }

    /// Rule-of-thumb plan for the CD (and GPA-CD) estimator.
    pub fn cd(n: usize, m: usize, sigma: f64) -> Result<Self> {
        let h = cd_bandwidth(n, sigma)?;
        Self::new(h, gpa_bandwidth(h)?, sigma, n, m)
    }

    /// Rule-of-thumb plan for a stack, using its pooled empirical sigma.
    pub fn ds_for_stack(stack: &FrameStack) -> Result<Self> {
        Self::ds(stack.n(), stack.m(), empirical_sigma(stack)?)
    }

    /// CD counterpart of [`BandwidthPlan::ds_for_stack`].
    pub fn cd_for_stack(stack: &FrameStack) -> Result<Self> {
        Self::cd(stack.n(), stack.m(), empirical_sigma(stack)?)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn h_star(&self) -> f64 {
        self.h_star
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    /// Frame count the plan was derived from (0 when unknown, e.g. after
    /// loading a persisted model, which does not store it).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Lattice size `M = p * q` the plan was derived from.
    pub fn m(&self) -> usize {
        self.m
    }
}

/// Pooled standard deviation of all `N * M` pixel values, with the
/// population (`1/(N*M)`) denominator.
///
/// Returns 0 for a constant stack; the bandwidth rules reject that value.
pub fn empirical_sigma(stack: &FrameStack) -> Result<f64> {
    let values = stack.as_slice();
    if values.is_empty() {
        return Err(Error::EmptyStack);
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok((ss / count).sqrt())
}

/// MSE constants `(C1, C2)` of the integrated leading term
/// `L(h) = C1/(N*M*h^3) + C2*h^4` under the truncated-normal working
/// density: `C1 = pi^(-3/2)/8` (independent of sigma) and
/// `C2 = (3/32) * pi^(-1/2) * sigma^(-5)`.
pub fn mse_constants(sigma: f64) -> Result<(f64, f64)> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Degenerate(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    let c1 = PI.powf(-1.5) / 8.0;
    let c2 = (3.0 / 32.0) * PI.powf(-0.5) * sigma.powi(-5);
    Ok((c1, c2))
}

/// DS rule-of-thumb bandwidth
/// `h = pi^(-1/7) * sigma^(5/7) * (n*m)^(-1/7)`.
pub fn ds_bandwidth(n: usize, m: usize, sigma: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 frames, got {n}")));
    }
    if m < 1 {
        return Err(Error::Degenerate("lattice must be nonempty".into()));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Degenerate(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    let nm = (n as f64) * (m as f64);
    Ok(PI.powf(-1.0 / 7.0) * sigma.powf(5.0 / 7.0) * nm.powf(-1.0 / 7.0))
}

/// GPA query bandwidth `h* = 5 * h^2`.
pub fn gpa_bandwidth(h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidBandwidth { name: "h", value: h });
    }
    Ok(5.0 * h * h)
}

/// CD rule-of-thumb bandwidth with Silverman's constant,
/// `h = 1.06 * sigma * n^(-1/5)`.
pub fn cd_bandwidth(n: usize, sigma: f64) -> Result<f64> {
    cd_bandwidth_with_constant(n, sigma, SILVERMAN_CONSTANT)
}

/// CD rule-of-thumb bandwidth with a caller-supplied constant.
pub fn cd_bandwidth_with_constant(n: usize, sigma: f64, c: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 frames, got {n}")));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Degenerate(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth constant {c} must be positive"
        )));
    }
    Ok(c * sigma * (n as f64).powf(-0.2))
}
