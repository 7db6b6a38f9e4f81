//! Closed-form purity decay laws as pure functions of dimensionless groups.
//!
//! Four regimes: free flight before the mean free time, the uncorrelated
//! (area-averaged) exponential decay, the Lyapunov-correlated form, and its
//! large-argument asymptote. Hyperbolic denominators switch to log-space
//! evaluation once 2*Lambda*tau exceeds 30 so sweeps with Lambda*tau of order
//! 10^2 neither overflow nor lose the tiny purity values.

use crate::error::{Error, Result};

/// Threshold on x = 2*Lambda*tau above which denominators are evaluated in
/// log space.
const LOG_SPACE_X: f64 = 30.0;

/// Dimensionless parameter set for the closed-form laws.
#[derive(Clone, Copy, Debug)]
pub struct ModelParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub beta: f64,
    /// Lambda = lambda / gamma.
    pub lambda_ratio: f64,
    /// tau_o = gamma * t_o.
    pub tau_o: f64,
    /// kB T / Delta with Delta = 2 pi hbar^2 / (m A).
    pub kt_over_delta: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.a1,
            self.a2,
            self.b1,
            self.b2,
            self.b3,
            self.beta,
            self.lambda_ratio,
            self.tau_o,
            self.kt_over_delta,
        ];
        if fields.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(format!("model params must be non-negative: {self:?}")));
        }
        let beta = self.b1 * (1.0 + self.b2) / 2.0 + self.b3 / 2.0;
        if (beta - self.beta).abs() > 1e-12 * beta.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "beta = {} inconsistent with b1 (1+b2)/2 + b3/2 = {beta}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Free-flight regime, valid for 0 <= tau <= tau_o:
/// [1 + 16 a1 tau + (2/3) a2 tau^3 (1 + a1 tau / 2)]^{-1}.
pub fn purity_eq21(tau: f64, a1: f64, a2: f64) -> f64 {
    let denom = 1.0 + 16.0 * a1 * tau + (2.0 / 3.0) * a2 * tau.powi(3) * (1.0 + 0.5 * a1 * tau);
    1.0 / denom
}

/// Uncorrelated-trajectory regime, tau >= tau_o:
/// exp(-16 pi (kB T / Delta) (tau - tau_o)).
pub fn purity_eq22(tau: f64, tau_o: f64, kt_over_delta: f64) -> Result<f64> {
    if tau < tau_o {
        return Err(Error::OutOfRange { t: tau, horizon: tau_o });
    }
    Ok((-16.0 * std::f64::consts::PI * kt_over_delta * (tau - tau_o)).exp())
}

/// Lyapunov-correlated regime:
/// {1 + b1 [(1+b2) sinh(2 L tau) + (1-b2) 2 L tau]
///    + b3 [cosh(2 L tau) - (2 L tau)^2 / 2 - 1]}^{-1}.
pub fn purity_eq23(tau: f64, b1: f64, b2: f64, b3: f64, lambda_ratio: f64) -> f64 {
    let x = 2.0 * lambda_ratio * tau;
    if x <= LOG_SPACE_X {
        let denom = 1.0
            + b1 * ((1.0 + b2) * x.sinh() + (1.0 - b2) * x)
            + b3 * (x.cosh() - x * x / 2.0 - 1.0);
        return 1.0 / denom;
    }
    // denom = e^x * beta + mid + e^{-x} * rear, with
    // beta = (b1 (1+b2) + b3)/2, mid = 1 + b1 (1-b2) x - b3 (1 + x^2/2),
    // rear = (b3 - b1 (1+b2))/2.
    let beta = (b1 * (1.0 + b2) + b3) / 2.0;
    let mid = 1.0 + b1 * (1.0 - b2) * x - b3 * (1.0 + x * x / 2.0);
    let rear = (b3 - b1 * (1.0 + b2)) / 2.0;
    let log_denom = x + (beta + (mid + rear * (-x).exp()) * (-x).exp()).ln();
    (-log_denom).exp()
}

/// Large-argument asymptote of the Lyapunov regime: (1 + beta e^{2 L tau})^{-1}.
pub fn purity_eq24(tau: f64, beta: f64, lambda_ratio: f64) -> f64 {
    let x = 2.0 * lambda_ratio * tau;
    let log_beta_ex = beta.ln() + x;
    if log_beta_ex <= LOG_SPACE_X {
        1.0 / (1.0 + beta * x.exp())
    } else {
        (-(log_beta_ex + (-log_beta_ex).exp().ln_1p())).exp()
    }
}
