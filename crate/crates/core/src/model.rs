//! Closed-form constants of the profile equation
//!
//! ```text
//! (1 - rho^2) u'' + (2/rho - (2 + 2 alpha) rho) u' - alpha (alpha + 1) u + u^p = 0
//! ```
//!
//! and its two exact solutions: the constant `u0 = b0` and the singular
//! `u_inf = b_inf rho^(-alpha)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest exponent accepted by [`derive_constants`].
pub const MIN_EXPONENT: u32 = 6;

/// Every constant of the model that depends only on the exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Exponent of the nonlinearity.
    pub p: u32,
    /// Similarity exponent `2/(p-1)`.
    pub alpha: f64,
    /// Amplitude of the constant solution.
    pub b0: f64,
    /// Amplitude of the singular solution.
    pub b_inf: f64,
    /// Log-period frequency of oscillations around the singular solution.
    pub omega: f64,
    /// Set for even `p`, where the existence theory is only sketched.
    pub experimental: bool,
}

/// Derives all constants from `p`. Accepts integers `p >= 6`; even values are
/// flagged [`ModelParams::experimental`].
pub fn derive_constants(p: f64) -> Result<ModelParams> {
    if !p.is_finite() || p.fract() != 0.0 {
        return Err(Error::Domain(format!("p must be an integer, got {p}")));
    }
    if p < MIN_EXPONENT as f64 {
        return Err(Error::Domain(format!(
            "p must be at least {MIN_EXPONENT}, got {p}"
        )));
    }
    if p > 1e6 {
        return Err(Error::Domain(format!("p = {p} is out of range")));
    }
    Ok(ModelParams::build(p as u32))
}

impl ModelParams {
    /// Same as [`derive_constants`] for an integer exponent.
    pub fn new(p: u32) -> Result<Self> {
        derive_constants(p as f64)
    }

    /// Constants for any `p >= 4`, bypassing the existence range. Used for
    /// functional checks at `p = 5`, where `Q` is a first integral.
    pub fn extended(p: u32) -> Result<Self> {
        if p < 4 {
            return Err(Error::Domain(format!("p must be at least 4, got {p}")));
        }
        Ok(Self::build(p))
    }

    fn build(p: u32) -> Self {
        let pf = p as f64;
        let pm1 = pf - 1.0;
        // (x)^(1/(p-1)) through exp/log keeps the relative error at a few ulp
        let root = |num: f64| ((num / (pm1 * pm1)).ln() / pm1).exp();
        ModelParams {
            p,
            alpha: 2.0 / pm1,
            b0: root(2.0 * (pf + 1.0)),
            b_inf: root(2.0 * (pf - 3.0)),
            omega: (7.0 * pf * pf - 22.0 * pf - 1.0).sqrt() / (2.0 * pm1),
            experimental: p.is_multiple_of(2),
        }
    }

    pub fn p_i32(&self) -> i32 {
        self.p as i32
    }

    /// `alpha (alpha + 1) = 2(p+1)/(p-1)^2 = b0^(p-1)`.
    pub fn alpha_alpha1(&self) -> f64 {
        self.alpha * (self.alpha + 1.0)
    }

    /// `alpha (1 - alpha) = 2(p-3)/(p-1)^2 = b_inf^(p-1)`.
    pub fn alpha_1malpha(&self) -> f64 {
        self.alpha * (1.0 - self.alpha)
    }

    /// Exponent `(p-5)/(2(p-1))` of the envelope of oscillations around `u_inf`.
    pub fn decay(&self) -> f64 {
        let pf = self.p as f64;
        (pf - 5.0) / (2.0 * (pf - 1.0))
    }

    /// Singular solution `b_inf rho^(-alpha)`.
    pub fn u_singular(&self, rho: f64) -> Result<f64> {
        u_singular(self, rho)
    }

    /// Derivative of the singular solution, `-alpha b_inf rho^(-alpha-1)`.
    pub fn du_singular(&self, rho: f64) -> Result<f64> {
        Ok(-self.alpha * u_singular(self, rho)? / rho)
    }
}

/// The constant solution `u0 = b0`.
pub fn u_constant(params: &ModelParams) -> f64 {
    params.b0
}

/// The singular solution `u_inf(rho) = b_inf rho^(-alpha)`.
pub fn u_singular(params: &ModelParams, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "u_singular needs rho > 0, got {rho}"
        )));
    }
    Ok(params.b_inf * (-params.alpha * rho.ln()).exp())
}

/// Residual of the profile equation for a state `(rho, u, u', u'')`.
pub fn residual(params: &ModelParams, rho: f64, u: f64, du: f64, ddu: f64) -> f64 {
    (1.0 - rho * rho) * ddu + (2.0 / rho - (2.0 + 2.0 * params.alpha) * rho) * du
        - params.alpha_alpha1() * u
        + u.powi(params.p_i32())
}
