//! Right-hand side of the profile equation and local launch data at its two
//! singular points, the center `rho = 0` and the light cone `rho = 1`.
//!
//! Both local families are generated as truncated Taylor series whose
//! coefficients come from an order-by-order recurrence. At the center the
//! series is even in `rho`; at the light cone the `(1 - rho^2)` degeneration
//! makes each new coefficient a linear function of the previous ones.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Highest power kept in the center expansion.
pub const CENTER_ORDER: usize = 6;
/// Highest power kept in the light-cone expansion.
pub const LIGHTCONE_ORDER: usize = 6;
/// Series are never trusted beyond this distance from their origin.
pub const MAX_SERIES_RADIUS: f64 = 0.5;

/// A point `(rho, u, u')` of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileState {
    pub rho: f64,
    pub u: f64,
    pub du: f64,
}

impl ProfileState {
    pub fn new(rho: f64, u: f64, du: f64) -> Self {
        ProfileState { rho, u, du }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.u.is_finite() && self.du.is_finite()
    }
}

/// Coordinates `sigma = (1-rho)^(2/(p-1))`, `psi = u`, `theta = sigma u'`
/// in which every solution is analytic at the light cone. `theta` at
/// `sigma = 0` is the amplitude of the singular mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LightConeChart {
    pub sigma: f64,
    pub psi: f64,
    pub theta: f64,
}

/// Series launch data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesStart {
    pub rho0: f64,
    pub state: ProfileState,
    pub trunc_order: usize,
    /// Magnitude of the first omitted term, in `u` or `rho u'`, whichever is larger.
    pub trunc_error_est: f64,
}

/// `(u', u'')` from the profile equation solved for `u''`.
pub fn rhs_interior(state: &ProfileState, params: &ModelParams) -> Result<(f64, f64)> {
    let ProfileState { rho, u, du } = *state;
    if rho <= 0.0 || rho == 1.0 {
        return Err(Error::SingularPoint { rho });
    }
    let ddu = (params.alpha_alpha1() * u
        - u.powi(params.p_i32())
        - (2.0 / rho - (2.0 + 2.0 * params.alpha) * rho) * du)
        / (1.0 - rho * rho);
    Ok((du, ddu))
}

/// Truncated product of two power series.
fn mul_truncated(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(len - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// First `len` coefficients of `a(x)^n`, by binary powering.
pub(crate) fn pow_truncated(a: &[f64], n: u32, len: usize) -> Vec<f64> {
    let mut result = vec![0.0; len];
    result[0] = 1.0;
    let mut base: Vec<f64> = a
        .iter()
        .copied()
        .chain(std::iter::repeat(0.0))
        .take(len)
        .collect();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = mul_truncated(&result, &base, len);
        }
        e >>= 1;
        if e > 0 {
            base = mul_truncated(&base, &base, len);
        }
    }
    result
}

/// Even Taylor expansion of a center-regular solution of
///
/// ```text
/// (1 - eps x^2) U'' + (2/x - (2 + 2 alpha) eps x) U' - eps alpha (alpha+1) U + U^p = 0
/// ```
///
/// with `U(0) = value`. `eps = 1` is the profile equation itself, `eps = 0`
/// the large-`c` limit equation.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSeries {
    coeffs: Vec<f64>,
    order: usize,
}

impl CenterSeries {
    pub fn new(value: f64, eps: f64, params: &ModelParams, order: usize) -> Self {
        // two extra even slots carry the error estimate
        let len = order + 3;
        let alpha = params.alpha;
        let mut a = vec![0.0; len];
        a[0] = value;
        for n in (2..len).step_by(2) {
            let pw = pow_truncated(&a[..n - 1], params.p, n - 1);
            let m = (n - 2) as f64;
            let linear = eps * (m * (m - 1.0) + (2.0 + 2.0 * alpha) * m + params.alpha_alpha1());
            a[n] = (linear * a[n - 2] - pw[n - 2]) / ((n * (n + 1)) as f64);
        }
        CenterSeries { coeffs: a, order }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    fn next_term(&self) -> (usize, f64) {
        let k = (self.order + 1..self.coeffs.len())
            .find(|&k| k % 2 == 0)
            .unwrap_or(self.coeffs.len() - 1);
        (k, self.coeffs[k])
    }

    /// Radius inside which the truncated series is trusted.
    pub fn validated_radius(&self) -> f64 {
        validated_radius(&self.coeffs)
    }

    /// `(U, U', U'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        eval_poly(self.coefficients(), x)
    }

    pub fn error_estimate(&self, x: f64) -> f64 {
        let (k, ak) = self.next_term();
        let term = ak * x.powi(k as i32);
        term.abs().max((k as f64 * term).abs())
    }
}

/// Taylor expansion about `rho = 1` of the light-cone-regular solution with
/// `u(1) = b`, in powers of `t = rho - 1`. Valid on both sides of the cone.
#[derive(Debug, Clone, PartialEq)]
pub struct LightconeSeries {
    coeffs: Vec<f64>,
    order: usize,
}

impl LightconeSeries {
    pub fn new(b: f64, params: &ModelParams, order: usize) -> Self {
        let len = order + 2;
        let alpha = params.alpha;
        let aa1 = params.alpha_alpha1();
        let mut c = vec![0.0; len];
        c[0] = b;
        // rho (1 - rho^2) u'' + (2 - (2+2a) rho^2) u' - a(a+1) rho u + rho u^p = 0
        // collected at t^k gives c[k+1] in terms of c[0..=k]
        for k in 0..len - 1 {
            let pw = pow_truncated(&c[..=k], params.p, k + 1);
            let kf = k as f64;
            let mut rhs =
                -3.0 * kf * (kf - 1.0) * c[k] - (4.0 + 4.0 * alpha) * kf * c[k] - aa1 * c[k]
                    + pw[k];
            if k >= 1 {
                rhs += -(kf - 1.0) * (kf - 2.0) * c[k - 1]
                    - (2.0 + 2.0 * alpha) * (kf - 1.0) * c[k - 1]
                    - aa1 * c[k - 1]
                    + pw[k - 1];
            }
            c[k + 1] = rhs / ((kf + 1.0) * (2.0 * kf + 2.0 * alpha));
        }
        LightconeSeries { coeffs: c, order }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    pub fn validated_radius(&self) -> f64 {
        validated_radius(&self.coeffs)
    }

    /// `(u, u', u'')` at `rho`.
    pub fn eval(&self, rho: f64) -> (f64, f64, f64) {
        eval_poly(self.coefficients(), rho - 1.0)
    }

    pub fn error_estimate(&self, rho: f64) -> f64 {
        let k = self.coeffs.len() - 1;
        let term = self.coeffs[k] * (rho - 1.0).powi(k as i32);
        term.abs().max((k as f64 * term).abs())
    }
}

/// `(f, f', f'')` of a polynomial by Horner's scheme.
pub(crate) fn eval_poly(coeffs: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut f, mut df, mut ddf) = (0.0, 0.0, 0.0);
    for &c in coeffs.iter().rev() {
        ddf = ddf * x + 2.0 * df;
        df = df * x + f;
        f = f * x + c;
    }
    (f, df, ddf)
}

/// Half the root-test estimate of the convergence radius, capped.
fn validated_radius(coeffs: &[f64]) -> f64 {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return MAX_SERIES_RADIUS;
    }
    let a0 = coeffs[0].abs().max(scale * 1e-300);
    let mut radius = f64::INFINITY;
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        if *c != 0.0 {
            radius = radius.min((a0 / c.abs()).powf(1.0 / k as f64));
        }
    }
    (0.5 * radius).min(MAX_SERIES_RADIUS)
}

/// Launch data near the center for `u(0) = c`.
pub fn series_at_center(c: f64, rho: f64, params: &ModelParams) -> Result<SeriesStart> {
    if !c.is_finite() {
        return Err(Error::Domain(format!(
            "center value must be finite, got {c}"
        )));
    }
    if rho < 0.0 {
        return Err(Error::Domain(format!(
            "rho must be non-negative, got {rho}"
        )));
    }
    let series = CenterSeries::new(c, 1.0, params, CENTER_ORDER);
    let radius = series.validated_radius();
    if rho > radius {
        return Err(Error::Range {
            offset: rho,
            radius,
        });
    }
    let (u, du, _) = series.eval(rho);
    Ok(SeriesStart {
        rho0: rho,
        state: ProfileState::new(rho, u, du),
        trunc_order: CENTER_ORDER,
        trunc_error_est: series.error_estimate(rho),
    })
}

/// Launch data near the light cone for `u(1) = b`, on either side of `rho = 1`.
pub fn series_at_lightcone(b: f64, rho: f64, params: &ModelParams) -> Result<SeriesStart> {
    if !b.is_finite() {
        return Err(Error::Domain(format!(
            "light-cone value must be finite, got {b}"
        )));
    }
    let series = LightconeSeries::new(b, params, LIGHTCONE_ORDER);
    let radius = series.validated_radius();
    if (rho - 1.0).abs() > radius {
        return Err(Error::Range {
            offset: (rho - 1.0).abs(),
            radius,
        });
    }
    let (u, du, _) = series.eval(rho);
    Ok(SeriesStart {
        rho0: rho,
        state: ProfileState::new(rho, u, du),
        trunc_order: LIGHTCONE_ORDER,
        trunc_error_est: series.error_estimate(rho),
    })
}

/// Maps a state with `0 <= rho <= 1` to the light-cone chart.
pub fn to_lightcone_chart(state: &ProfileState, params: &ModelParams) -> Result<LightConeChart> {
    if !(0.0..=1.0).contains(&state.rho) {
        return Err(Error::Domain(format!(
            "light-cone chart is defined for 0 <= rho <= 1, got {}",
            state.rho
        )));
    }
    let sigma = (1.0 - state.rho).powf(params.alpha);
    Ok(LightConeChart {
        sigma,
        psi: state.u,
        theta: sigma * state.du,
    })
}

/// Inverse of [`to_lightcone_chart`]; needs `sigma > 0`.
pub fn from_lightcone_chart(chart: &LightConeChart, params: &ModelParams) -> Result<ProfileState> {
    if !(chart.sigma > 0.0) {
        return Err(Error::Domain(format!(
            "u' is not recoverable at sigma = {}",
            chart.sigma
        )));
    }
    let rho = 1.0 - chart.sigma.powf(1.0 / params.alpha);
    Ok(ProfileState::new(rho, chart.psi, chart.theta / chart.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{residual, u_singular};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p7() -> ModelParams {
        ModelParams::new(7).unwrap()
    }

    #[test]
    fn rhs_on_constant_and_hand_value() {
        let m = p7();
        let (_, ddu) = rhs_interior(&ProfileState::new(0.5, m.b0, 0.0), &m).unwrap();
        assert!(ddu.abs() < 1e-14);
        let (_, ddu) = rhs_interior(&ProfileState::new(0.5, 1.0, 0.0), &m).unwrap();
        assert_relative_eq!(ddu, -0.740740740740741, epsilon = 1e-12);
        let u = u_singular(&m, 0.5).unwrap();
        let du = -m.alpha * u / 0.5;
        let (_, ddu) = rhs_interior(&ProfileState::new(0.5, u, du), &m).unwrap();
        assert!(residual(&m, 0.5, u, du, ddu).abs() < 1e-13);
    }

    #[test]
    fn rhs_rejects_singular_points() {
        let m = p7();
        for rho in [0.0, 1.0] {
            assert!(matches!(
                rhs_interior(&ProfileState::new(rho, 1.0, 0.0), &m),
                Err(Error::SingularPoint { .. })
            ));
        }
    }

    #[test]
    fn center_series_coefficients() {
        let m = p7();
        let s = CenterSeries::new(m.b0, 1.0, &m, CENTER_ORDER);
        assert!(s.coefficients()[1..].iter().all(|c| c.abs() < 1e-13));
        let c1 = 2.054390385;
        let s = CenterSeries::new(c1, 1.0, &m, CENTER_ORDER);
        // (alpha(alpha+1) c - c^p) / 6
        assert_relative_eq!(s.coefficients()[2], -25.589069005357, max_relative = 1e-10);
        assert!(s
            .coefficients()
            .iter()
            .skip(1)
            .step_by(2)
            .all(|&c| c == 0.0));
        let z = series_at_center(0.0, 0.3, &m).unwrap();
        assert_eq!((z.state.u, z.state.du), (0.0, 0.0));
        // limit equation: U = 1 - x^2/6 + ...
        let lim = CenterSeries::new(1.0, 0.0, &m, CENTER_ORDER);
        assert_relative_eq!(lim.coefficients()[2], -1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn center_series_satisfies_ode() {
        let m = p7();
        let s = CenterSeries::new(1.3, 1.0, &m, 16);
        for rho in [0.01, 0.02, 0.05] {
            let (u, du, ddu) = s.eval(rho);
            let scale = u.abs() + m.alpha_alpha1() * u.abs();
            assert!(
                residual(&m, rho, u, du, ddu).abs() / scale < 1e-12,
                "rho={rho}"
            );
        }
    }

    #[test]
    fn lightcone_series_slopes() {
        let m = p7();
        let s = series_at_lightcone(m.b0, 1.0, &m).unwrap();
        assert!(s.state.du.abs() < 1e-14);
        let s = series_at_lightcone(m.b_inf, 1.0, &m).unwrap();
        assert_relative_eq!(s.state.du, -0.259423905, epsilon = 1e-9);
        assert_relative_eq!(s.state.du, -m.alpha * m.b_inf, epsilon = 1e-14);
        let s = series_at_lightcone(0.0, 0.99, &m).unwrap();
        assert_eq!((s.state.u, s.state.du), (0.0, 0.0));
        // b_inf launch reproduces u_inf on both sides
        for rho in [0.999, 1.001] {
            let s = series_at_lightcone(m.b_inf, rho, &m).unwrap();
            assert_relative_eq!(
                s.state.u,
                u_singular(&m, rho).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn lightcone_series_satisfies_ode() {
        let m = p7();
        for b in [0.3, 0.6886, 0.8] {
            let s = LightconeSeries::new(b, &m, 20);
            for rho in [0.97, 0.99, 1.01, 1.03] {
                let (u, du, ddu) = s.eval(rho);
                let r = residual(&m, rho, u, du, ddu);
                assert!(r.abs() < 1e-12, "b={b} rho={rho} r={r}");
            }
        }
    }

    #[test]
    fn lightcone_series_regular_for_odd_p() {
        for p in [7u32, 9, 11, 13, 21] {
            let m = ModelParams::new(p).unwrap();
            let s = LightconeSeries::new(0.5 * (m.b0 + m.b_inf), &m, 12);
            assert!(s.coefficients().iter().all(|c| c.is_finite()));
            assert!(s.validated_radius() > 0.1);
        }
    }

    #[test]
    fn range_errors() {
        let m = p7();
        assert!(matches!(
            series_at_center(1e3, 0.1, &m),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            series_at_lightcone(0.5, 0.2, &m),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn chart_examples() {
        let m = p7();
        let c = to_lightcone_chart(&ProfileState::new(1.0, 0.7, 0.3), &m).unwrap();
        assert_eq!(c.sigma, 0.0);
        assert_eq!(c.theta, 0.0);
        let c = to_lightcone_chart(&ProfileState::new(0.875, 0.7, 0.3), &m).unwrap();
        assert_relative_eq!(c.sigma, 0.5, epsilon = 1e-15);
        assert!(to_lightcone_chart(&ProfileState::new(1.5, 0.7, 0.3), &m).is_err());
        assert!(from_lightcone_chart(&c, &m).is_ok());
    }

    proptest! {
        #[test]
        fn chart_round_trip(rho in 0.0f64..0.999, u in -5.0f64..5.0, du in -50.0f64..50.0, p in 6u32..15) {
            let m = ModelParams::new(p).unwrap();
            let s = ProfileState::new(rho, u, du);
            let back = from_lightcone_chart(&to_lightcone_chart(&s, &m).unwrap(), &m).unwrap();
            prop_assert!((back.rho - rho).abs() <= 1e-13 * rho.max(1e-3));
            prop_assert!((back.u - u).abs() <= 1e-13 * u.abs());
            prop_assert!((back.du - du).abs() <= 1e-13 * du.abs().max(1e-300));
        }

        #[test]
        fn center_series_is_even(c in 0.01f64..20.0, p in 6u32..12) {
            let m = ModelParams::new(p).unwrap();
            let s = CenterSeries::new(c, 1.0, &m, 10);
            for (k, a) in s.coefficients().iter().enumerate() {
                if k % 2 == 1 {
                    prop_assert_eq!(*a, 0.0);
                }
            }
        }
    }
}
