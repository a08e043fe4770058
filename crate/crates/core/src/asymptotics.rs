//! Large-`c` limit equation, linearization at the singular solution and the
//! scaling laws of the spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate_equation, Chart, Equation, Tolerances, Trajectory};
use crate::model::ModelParams;
use crate::odecore::{eval_poly, CenterSeries, ProfileState, CENTER_ORDER};
use crate::shoot::Spectrum;

/// Default end of the limit-equation integration, about 12 oscillation
/// periods in `ln x` for `p = 7`.
pub const DEFAULT_X_MAX: f64 = 1e30;
/// Launch point of the limit equation.
pub const LIMIT_X0: f64 = 1e-3;
/// Samples per oscillation period handed to the fits.
pub const SAMPLES_PER_PERIOD: usize = 64;
/// Periods discarded at the start of a fit window.
pub const TRANSIENT_PERIODS: f64 = 2.0;
/// Minimum periods required by [`fit_limit_asymptotics`].
pub const MIN_LIMIT_PERIODS: f64 = 4.0;

/// `c_{n+1}/c_n -> e^(2 pi/((p-1) omega))` and
/// `(b_{n+1} - b_inf)/(b_inf - b_n) -> e^(-(p-5) pi/(2 (p-1) omega))`.
pub fn scaling_predictions(params: &ModelParams) -> (f64, f64) {
    let pm1 = params.p as f64 - 1.0;
    let ratio_c = (2.0 * PI / (pm1 * params.omega)).exp();
    let ratio_b = (-(params.p as f64 - 5.0) * PI / (2.0 * pm1 * params.omega)).exp();
    (ratio_c, ratio_b)
}

/// Eigenvalues `(-(p-5) +- i sqrt(7p^2-22p-1)) / (2(p-1))` of the
/// linearization at the fixed point `b_inf` of the autonomous limit equation.
pub fn limit_eigenvalues(params: &ModelParams) -> (f64, f64) {
    (-params.decay(), params.omega)
}

/// Eigenvalues of the numerically linearized autonomous limit equation,
/// as `(real part, |imaginary part|)`.
pub fn numerical_limit_eigenvalues(params: &ModelParams) -> (f64, f64) {
    let alpha = params.alpha;
    let f = |y: f64, z: f64| {
        -((1.0 - 2.0 * alpha) * z + alpha * (alpha - 1.0) * y + y.powi(params.p_i32()))
    };
    let (b, h) = (params.b_inf, 1e-6);
    let j = Matrix2::new(
        0.0,
        1.0,
        (f(b + h, 0.0) - f(b - h, 0.0)) / (2.0 * h),
        (f(b, h) - f(b, -h)) / (2.0 * h),
    );
    let ev = j.complex_eigenvalues();
    (ev[0].re, ev[0].im.abs())
}

/// Point of the limit solution. `u` and `du` are `U(x)` and `dU/dx`; `ubar`
/// and `dubar` are `x^alpha U` and its `tau` derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitState {
    pub x: f64,
    pub u: f64,
    pub du: f64,
    pub tau: f64,
    pub ubar: f64,
    pub dubar: f64,
}

/// Damped sinusoid fitted to an oscillation around the singular solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationFit {
    /// `A` in `A e^(-decay t) sin(omega t + delta)` with `omega` fixed.
    pub amplitude: f64,
    pub phase: f64,
    /// Frequency from the free fit.
    pub frequency: f64,
    /// Decay rate from the free fit.
    pub decay: f64,
    /// RMS of the fixed-frequency fit relative to the amplitude.
    pub residual: f64,
    /// Periods in the fit window.
    pub periods: f64,
}

/// Integrates `U'' + (2/x) U' + U^p = 0` with `U(0) = 1` from a series launch
/// at `x = 1e-3` to `x_max` and samples it uniformly in `tau = ln x`.
pub fn integrate_limit_equation(
    x_max: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<Vec<LimitState>> {
    if !(x_max > 1.0) || !x_max.is_finite() {
        return Err(Error::Domain(format!(
            "x_max must be finite and > 1, got {x_max}"
        )));
    }
    let series = CenterSeries::new(1.0, 0.0, params, CENTER_ORDER);
    let (u0, du0, _) = series.eval(LIMIT_X0);
    let traj = integrate_equation(
        Equation::Limit,
        Chart::LogRho,
        ProfileState::new(LIMIT_X0, u0, du0),
        x_max,
        params,
        tol,
    )?;
    if !traj.reached_end() {
        return Err(Error::Integration {
            rho: traj.last().rho,
            reason: format!("limit equation stopped: {:?}", traj.termination),
        });
    }
    Ok(sample_log_uniform(&traj, params))
}

fn sample_log_uniform(traj: &Trajectory, params: &ModelParams) -> Vec<LimitState> {
    let (a, b) = traj.rho_range();
    let (t0, t1) = (a.ln(), b.ln());
    let dt = 2.0 * PI / params.omega / SAMPLES_PER_PERIOD as f64;
    let n = ((t1 - t0) / dt).floor() as usize;
    (0..=n)
        .filter_map(|i| {
            let tau = (t0 + i as f64 * dt).min(t1);
            let s = traj.eval(tau.exp().clamp(a, b))?;
            let xa = (params.alpha * tau).exp();
            Some(LimitState {
                x: s.rho,
                u: s.u,
                du: s.du,
                tau,
                ubar: xa * s.u,
                dubar: xa * (params.alpha * s.u + s.rho * s.du),
            })
        })
        .collect()
}

/// `h = Ubar'^2/2 + Ubar^(p+1)/(p+1) - (p-3) Ubar^2/(p-1)^2`.
pub fn limit_lyapunov(s: &LimitState, params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    0.5 * s.dubar * s.dubar + s.ubar.powi(params.p_i32() + 1) / (pf + 1.0)
        - (pf - 3.0) * s.ubar * s.ubar / ((pf - 1.0) * (pf - 1.0))
}

/// Largest relative increase of `h` between consecutive samples.
pub fn limit_lyapunov_increase(states: &[LimitState], params: &ModelParams) -> f64 {
    states
        .windows(2)
        .map(|w| {
            let (a, b) = (limit_lyapunov(&w[0], params), limit_lyapunov(&w[1], params));
            (b - a) / (1.0 + a.abs())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fits `A e^(-k t) sin(omega t + delta)` to `(t, y)` pairs: first with
/// `k` and `omega` fixed at their closed forms (linear least squares), then
/// with all four parameters free (Levenberg-Marquardt).
pub fn fit_damped_sinusoid(t: &[f64], y: &[f64], omega: f64, decay: f64) -> Result<OscillationFit> {
    let n = t.len();
    if n < 8 {
        return Err(Error::InsufficientData {
            periods: 0.0,
            required: 1.0,
        });
    }
    let periods = (t[n - 1] - t[0]) * omega / (2.0 * PI);
    let t_ref = t[0];
    // linear fit in the scaled signal
    let mut design = DMatrix::zeros(n, 2);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let tt = t[i];
        design[(i, 0)] = (omega * tt).sin();
        design[(i, 1)] = (omega * tt).cos();
        rhs[i] = y[i] * (decay * tt).exp();
    }
    let sol = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Diagnostic(format!("least squares failed: {e}")))?;
    let (a, b) = (sol[0], sol[1]);
    let amplitude = a.hypot(b);
    let phase = b.atan2(a);
    let resid =
        (&design * &sol - &rhs).norm() / (n as f64).sqrt() / amplitude.max(f64::MIN_POSITIVE);

    // free fit on the unscaled signal, time measured from the window start
    let model = |p: &Vector4<f64>, tt: f64| {
        let s = tt - t_ref;
        (-p[0] * s).exp() * (p[2] * (p[1] * s).sin() + p[3] * (p[1] * s).cos())
    };
    let grad = |p: &Vector4<f64>, tt: f64| {
        let s = tt - t_ref;
        let e = (-p[0] * s).exp();
        let (sn, cs) = (p[1] * s).sin_cos();
        let val = e * (p[2] * sn + p[3] * cs);
        Vector4::new(-s * val, e * s * (p[2] * cs - p[3] * sn), e * sn, e * cs)
    };
    let scale0 = amplitude * (-decay * t_ref).exp();
    let ph0 = phase + omega * t_ref;
    let mut p = Vector4::new(decay, omega, scale0 * ph0.cos(), scale0 * ph0.sin());
    // residuals weighted by the expected envelope so every period counts alike
    let weight = |tt: f64| (decay * (tt - t_ref)).exp();
    let cost = |p: &Vector4<f64>| -> f64 {
        t.iter()
            .zip(y)
            .map(|(&tt, &yy)| (weight(tt) * (model(p, tt) - yy)).powi(2))
            .sum()
    };
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&tt, &yy) in t.iter().zip(y) {
            let wt = weight(tt);
            let g = grad(&p, tt) * wt;
            let r = (yy - model(&p, tt)) * wt;
            jtj += g * g.transpose();
            jtr += g * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj;
            for k in 0..4 {
                m[(k, k)] *= 1.0 + lambda;
            }
            let Some(step) = m.lu().solve(&jtr) else {
                break;
            };
            let trial = p + step;
            let ct = cost(&trial);
            if ct < c {
                let done = (c - ct) <= 1e-15 * c;
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(OscillationFit {
        amplitude,
        phase: phase.rem_euclid(2.0 * PI),
        frequency: p[1].abs(),
        decay: p[0],
        residual: resid,
        periods,
    })
}

/// Fits `Ubar/b_inf - 1 = A0 x^(-decay) sin(omega ln x + delta0)` to the
/// limit solution. The first two periods are discarded, and so is any tail
/// where the oscillation has fallen below `1e3 rtol`.
pub fn fit_limit_asymptotics(
    states: &[LimitState],
    params: &ModelParams,
    tol: Tolerances,
) -> Result<OscillationFit> {
    let period = 2.0 * PI / params.omega;
    let Some(first) = states.first() else {
        return Err(Error::InsufficientData {
            periods: 0.0,
            required: MIN_LIMIT_PERIODS,
        });
    };
    let t_start = first.tau + TRANSIENT_PERIODS * period;
    let floor = 1e3 * tol.rtol;
    let mut t = Vec::new();
    let mut y = Vec::new();
    for s in states.iter().filter(|s| s.tau >= t_start) {
        let dev = s.ubar / params.b_inf - 1.0;
        let envelope = dev.hypot(s.dubar / (params.b_inf * params.omega));
        if envelope < floor {
            break;
        }
        t.push(s.tau);
        y.push(dev);
    }
    let periods = match (t.first(), t.last()) {
        (Some(a), Some(b)) => (b - a) / period,
        _ => 0.0,
    };
    if periods < MIN_LIMIT_PERIODS {
        return Err(Error::InsufficientData {
            periods,
            required: MIN_LIMIT_PERIODS,
        });
    }
    fit_damped_sinusoid(&t, &y, params.omega, params.decay())
}

/// Taylor coefficients at `s = 0` of the solution of
/// `a(s) w'' + b(s) w' + c(s) w = 0` with `w(0) = w0`, where `a(0) = 0` and the
/// polynomial coefficients are given in increasing powers of `s`.
fn regular_singular_series(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    w0: f64,
    order: usize,
) -> Result<Vec<f64>> {
    let at = |v: &[f64], j: usize| v.get(j).copied().unwrap_or(0.0);
    let mut w = vec![0.0; order + 1];
    w[0] = w0;
    for m in 0..order {
        let mf = m as f64;
        let lead = (mf + 1.0) * (at(a, 1) * mf + at(b, 0));
        if lead.abs() < 1e-12 {
            return Err(Error::Diagnostic(format!(
                "resonant series coefficient at order {}",
                m + 1
            )));
        }
        let mut rest = 0.0;
        for j in 2..=m + 2 {
            let k = m + 2 - j;
            rest += at(a, j) * (k as f64) * (k as f64 - 1.0) * w[k];
        }
        for j in 1..=m + 1 {
            let k = m + 1 - j;
            rest += at(b, j) * k as f64 * w[k];
        }
        for j in 0..=m {
            rest += at(c, j) * w[m - j];
        }
        w[m + 1] = -rest / lead;
    }
    Ok(w)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Taylor coefficients of the light-cone-regular solution of the linearized
/// equation in powers of `rho - 1`, normalized by `w_L(1) = 1`.
pub fn linearized_series(params: &ModelParams, order: usize) -> Result<Vec<f64>> {
    let k = 2.0 * params.alpha_1malpha() / params.alpha;
    // rho = 1 + s
    let rho = [1.0, 1.0];
    let rho2 = poly_mul(&rho, &rho);
    let rho3 = poly_mul(&rho2, &rho);
    let one_minus_rho2 = [0.0, -2.0, -1.0];
    let a = poly_mul(&rho2, &one_minus_rho2);
    let b: Vec<f64> = (0..4)
        .map(|i| k * rho.get(i).copied().unwrap_or(0.0) - 2.0 * rho3[i])
        .collect();
    regular_singular_series(&a, &b, &[k], 1.0, order)
}

/// Solution `w_L` of the linearized equation and its small-`rho` fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSolution {
    pub trajectory: Trajectory,
    pub fit: OscillationFit,
    /// `w_L'(1)`.
    pub slope_at_1: f64,
}

/// Integrates `w_L` from the light cone down to `rho_min` and fits
/// `w_L rho^((p-5)/(2(p-1))) = A1 sin(omega ln rho + delta1)` for `rho <= 1e-2`.
pub fn solve_linearized_lightcone(
    rho_min: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<LinearizedSolution> {
    if !(rho_min > 0.0 && rho_min < 1e-2) {
        return Err(Error::Domain(format!(
            "rho_min must lie in (0, 1e-2), got {rho_min}"
        )));
    }
    let coeffs = linearized_series(params, 8)?;
    let mut delta: f64 = 1e-3;
    while (coeffs[8] * delta.powi(8)).abs() > 0.1 * tol.atol && delta > 1e-9 {
        delta *= 0.5;
    }
    let (w, dw, _) = eval_poly(&coeffs, -delta);
    let trajectory = integrate_equation(
        Equation::Linearized,
        Chart::LogRho,
        ProfileState::new(1.0 - delta, w, dw),
        rho_min,
        params,
        tol,
    )?;
    if !trajectory.reached_end() {
        return Err(Error::Integration {
            rho: trajectory.last().rho,
            reason: format!("linearized equation stopped: {:?}", trajectory.termination),
        });
    }
    let dt = 2.0 * PI / params.omega / SAMPLES_PER_PERIOD as f64;
    let (t_hi, t_lo) = (1e-2f64.ln(), rho_min.ln());
    let n = ((t_hi - t_lo) / dt).floor() as usize;
    let mut t = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let tau = t_lo + i as f64 * dt;
        if let Some(s) = trajectory.eval(tau.exp()) {
            t.push(tau);
            y.push(s.u);
        }
    }
    let periods = (t_hi - t_lo) * params.omega / (2.0 * PI);
    if periods < 0.5 {
        return Err(Error::InsufficientData {
            periods,
            required: 0.5,
        });
    }
    let fit = fit_damped_sinusoid(&t, &y, params.omega, params.decay())?;
    Ok(LinearizedSolution {
        trajectory,
        fit,
        slope_at_1: coeffs[1],
    })
}

/// One row of the matching report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingRow {
    pub n: usize,
    /// `A0 c_n^((5-p)/4) / (A1 (b_n - b_inf)/b_inf)`.
    pub amplitude_ratio: f64,
    /// `((p-1)/2) omega ln(c_{n+1}/c_n)`, in units of `pi`.
    pub phase_step: Option<f64>,
}

/// Amplitude and phase matching between the center and light-cone
/// asymptotics along a computed spectrum.
pub fn matched_amplitude_check(
    spectrum: &Spectrum,
    fit_a0: &OscillationFit,
    fit_a1: &OscillationFit,
    params: &ModelParams,
) -> Vec<MatchingRow> {
    let pairs: Vec<(usize, f64, f64)> = spectrum
        .rows
        .iter()
        .filter_map(|r| r.solution.as_ref().ok().map(|s| (r.n, s.c_n, s.b_n)))
        .collect();
    let cs: Vec<(usize, f64)> = pairs.iter().map(|&(n, c, _)| (n, c)).collect();
    let steps = phase_steps(&cs, params);
    pairs
        .iter()
        .map(|&(n, c, b)| MatchingRow {
            n,
            amplitude_ratio: fit_a0.amplitude * c.powf((5.0 - params.p as f64) / 4.0)
                / (fit_a1.amplitude * (b - params.b_inf) / params.b_inf),
            phase_step: steps.iter().find(|s| s.0 == n).map(|s| s.1),
        })
        .collect()
}

/// `((p-1)/2) omega ln(c_{n+1}/c_n) / pi` for consecutive labels.
pub fn phase_steps(cs: &[(usize, f64)], params: &ModelParams) -> Vec<(usize, f64)> {
    let k = (params.p as f64 - 1.0) / 2.0 * params.omega / PI;
    cs.windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .map(|w| (w[0].0, k * (w[1].1 / w[0].1).ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p7() -> ModelParams {
        ModelParams::new(7).unwrap()
    }

    #[test]
    fn scaling_ratios() {
        let (rc, rb) = scaling_predictions(&p7());
        assert!((rc - 2.5005152).abs() < 1e-6, "{rc}");
        assert!((rb - 0.632390).abs() < 1e-6, "{rb}");
    }

    #[test]
    fn eigenvalues_of_fixed_point() {
        for p in [7, 9, 13] {
            let m = ModelParams::new(p).unwrap();
            let (re, im) = numerical_limit_eigenvalues(&m);
            let (re0, im0) = limit_eigenvalues(&m);
            assert!(
                (re - re0).abs() < 1e-6 && (im - im0).abs() < 1e-6,
                "{p}: {re} {im}"
            );
        }
    }

    #[test]
    fn limit_series_and_singular_solution() {
        let m = p7();
        let s = CenterSeries::new(1.0, 0.0, &m, CENTER_ORDER);
        assert_relative_eq!(s.coefficients()[2], -1.0 / 6.0, max_relative = 1e-15);
        // U_inf = b_inf x^-alpha solves U'' + 2U'/x + U^p = 0
        for x in [0.5f64, 3.0, 40.0] {
            let a = m.alpha;
            let u = m.b_inf * x.powf(-a);
            let du = -a * u / x;
            let ddu = a * (a + 1.0) * u / (x * x);
            assert!((ddu + 2.0 * du / x + u.powi(7)).abs() < 1e-12 * ddu.abs());
        }
    }

    #[test]
    fn limit_solution_and_fit() {
        let m = p7();
        let tol = Tolerances::default();
        let states = integrate_limit_equation(DEFAULT_X_MAX, &m, tol).unwrap();
        let last = states.last().unwrap();
        assert!((last.ubar / m.b_inf - 1.0).abs() < 1e-3);
        assert!(limit_lyapunov_increase(&states, &m) <= 1e-12);
        let fit = fit_limit_asymptotics(&states, &m, tol).unwrap();
        assert!((fit.frequency - m.omega).abs() < 1e-3, "{fit:?}");
        assert!((fit.decay - 1.0 / 6.0).abs() < 5e-3, "{fit:?}");
        assert!(fit.residual < 0.05, "{fit:?}");
        let short = integrate_limit_equation(1e6, &m, tol).unwrap();
        assert!(matches!(
            fit_limit_asymptotics(&short, &m, tol),
            Err(Error::InsufficientData { .. })
        ));
        assert!(integrate_limit_equation(0.5, &m, tol).is_err());
    }

    #[test]
    fn linearized_boundary_data_and_fit() {
        let m = p7();
        let coeffs = linearized_series(&m, 8).unwrap();
        assert_eq!(coeffs[0], 1.0);
        assert_relative_eq!(coeffs[1], 2.0, max_relative = 1e-14);
        for p in [9, 11] {
            let mp = ModelParams::new(p).unwrap();
            assert_relative_eq!(
                linearized_series(&mp, 3).unwrap()[1],
                (p as f64 - 3.0) / 2.0,
                max_relative = 1e-14
            );
        }
        let sol = solve_linearized_lightcone(1e-4, &m, Tolerances::default()).unwrap();
        assert!((sol.fit.frequency - m.omega).abs() < 1e-3, "{:?}", sol.fit);
        assert!(sol.fit.residual < 1e-3, "{:?}", sol.fit);
        assert!(sol.fit.amplitude.is_finite() && sol.fit.amplitude > 0.0);
    }

    #[test]
    fn phase_steps_from_table() {
        let m = p7();
        let steps = phase_steps(&[(13, 136047.6759), (14, 340293.1022)], &m);
        assert_eq!(steps.len(), 1);
        assert!((steps[0].1 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn sinusoid_fit_recovers_parameters() {
        let t: Vec<f64> = (0..400).map(|i| 2.0 + i as f64 * 0.05).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&x| 0.3 * (-0.2 * x).exp() * (1.1 * x + 0.4).sin())
            .collect();
        let fit = fit_damped_sinusoid(&t, &y, 1.1, 0.2).unwrap();
        assert_relative_eq!(fit.amplitude, 0.3, max_relative = 1e-10);
        assert_relative_eq!(fit.phase, 0.4, max_relative = 1e-10);
        assert_relative_eq!(fit.frequency, 1.1, max_relative = 1e-8);
        assert_relative_eq!(fit.decay, 0.2, max_relative = 1e-8);
    }
}
