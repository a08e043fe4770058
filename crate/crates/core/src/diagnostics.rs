//! Monotone functionals, phase function, structural checks and the extension
//! of profiles beyond the light cone.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate, Tolerances, Trajectory};
use crate::model::ModelParams;
use crate::odecore::{to_lightcone_chart, LightconeSeries, ProfileState, LIGHTCONE_ORDER};
use crate::shoot::{Shooter, LIGHTCONE_OFFSET};

/// Below this `R` the phase angle is treated as undefined.
pub const PHASE_DEGENERACY: f64 = 1e-12;
/// Relative drift allowed when checking monotonicity on a sample grid.
pub const MONOTONE_DRIFT: f64 = 1e-9;

/// `w = u/u_inf - 1`; equals `-1` at the center.
pub fn w_of(s: &ProfileState, params: &ModelParams) -> f64 {
    if s.rho <= 0.0 {
        return -1.0;
    }
    s.u * (params.alpha * s.rho.ln()).exp() / params.b_inf - 1.0
}

/// `rho w'`.
pub fn rho_dw_of(s: &ProfileState, params: &ModelParams) -> f64 {
    if s.rho <= 0.0 {
        return 0.0;
    }
    (params.alpha * s.rho.ln()).exp() * (s.rho * s.du + params.alpha * s.u) / params.b_inf
}

/// Polar coordinates of `(w, rho w')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub rho: f64,
    pub r: f64,
    /// Unwrapped angle, close to `pi` at small `rho`.
    pub theta: f64,
}

fn raw_phase(s: &ProfileState, params: &ModelParams) -> (f64, f64) {
    let (w, y) = (w_of(s, params), rho_dw_of(s, params));
    (w.hypot(y), y.atan2(w))
}

fn unwrap_near(raw: f64, reference: f64) -> f64 {
    raw + 2.0 * PI * ((reference - raw) / (2.0 * PI)).round()
}

/// Continuous phase angle along a trajectory. Steps turning by more than a
/// quarter turn are refined on the dense output.
pub fn phase_trajectory(traj: &Trajectory, params: &ModelParams) -> Result<Vec<PhasePoint>> {
    let samples = traj.samples();
    let mut out: Vec<PhasePoint> = Vec::with_capacity(samples.len());
    for s in samples {
        let (r, raw) = raw_phase(s, params);
        if r < PHASE_DEGENERACY {
            return Err(Error::Degenerate { rho: s.rho, r });
        }
        let Some(prev) = out.last().copied() else {
            out.push(PhasePoint {
                rho: s.rho,
                r,
                theta: unwrap_near(raw, PI),
            });
            continue;
        };
        let theta = unwrap_near(raw, prev.theta);
        if (theta - prev.theta).abs() > FRAC_PI_2 {
            refine(traj, params, prev, *s, 0, &mut out)?;
        } else {
            out.push(PhasePoint {
                rho: s.rho,
                r,
                theta,
            });
        }
    }
    Ok(out)
}

fn refine(
    traj: &Trajectory,
    params: &ModelParams,
    from: PhasePoint,
    to: ProfileState,
    depth: usize,
    out: &mut Vec<PhasePoint>,
) -> Result<()> {
    const PIECES: usize = 8;
    let mut prev = from;
    for i in 1..=PIECES {
        let rho = from.rho + (to.rho - from.rho) * i as f64 / PIECES as f64;
        let s = if i == PIECES {
            to
        } else {
            traj.eval(rho).unwrap_or(to)
        };
        let (r, raw) = raw_phase(&s, params);
        if r < PHASE_DEGENERACY {
            return Err(Error::Degenerate { rho, r });
        }
        let theta = unwrap_near(raw, prev.theta);
        if (theta - prev.theta).abs() > FRAC_PI_2 && depth < 12 {
            refine(traj, params, prev, s, depth + 1, out)?;
            prev = *out.last().expect("refinement pushes points");
        } else {
            prev = PhasePoint {
                rho: s.rho,
                r,
                theta,
            };
            out.push(prev);
        }
    }
    Ok(())
}

/// Zeros of `w` implied by the phase: each zero is a downward crossing of
/// `pi/2 - k pi`, and the angle never crosses those levels upward.
pub fn zeros_from_phase(theta_start: f64, theta_end: f64) -> usize {
    let count = |theta: f64| ((FRAC_PI_2 - theta) / PI).floor();
    (count(theta_end) - count(theta_start)).max(0.0) as usize
}

/// Zero count of `w` from the winding of the phase.
pub fn phase_zero_count(traj: &Trajectory, params: &ModelParams) -> Result<usize> {
    let pts = phase_trajectory(traj, params)?;
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let (start, end) = if a.rho <= b.rho { (a, b) } else { (b, a) };
    Ok(zeros_from_phase(start.theta, end.theta))
}

/// Phase at `rho`, continued from the nearest computed point.
pub fn phase_at(
    points: &[PhasePoint],
    traj: &Trajectory,
    params: &ModelParams,
    rho: f64,
) -> Option<f64> {
    let s = traj.eval(rho)?;
    let nearest = points
        .iter()
        .min_by(|a, b| (a.rho - rho).abs().total_cmp(&(b.rho - rho).abs()))?;
    Some(unwrap_near(raw_phase(&s, params).1, nearest.theta))
}

/// `H = (1-rho^2) u'^2/2 + u^(p+1)/(p+1) - (p+1) u^2/(p-1)^2`.
pub fn eval_h(s: &ProfileState, params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    (1.0 - s.rho * s.rho) * s.du * s.du / 2.0 + s.u.powi(params.p_i32() + 1) / (pf + 1.0)
        - (pf + 1.0) * s.u * s.u / ((pf - 1.0) * (pf - 1.0))
}

/// `H' = ((p+3)/(p-1) rho - 2/rho) u'^2`.
pub fn eval_dh(s: &ProfileState, params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    ((pf + 3.0) / (pf - 1.0) * s.rho - 2.0 / s.rho) * s.du * s.du
}

/// Lower bound of `H` along any solution regular at the center: `-b0^2/(p-1)`.
pub fn h_lower_bound(params: &ModelParams) -> f64 {
    -params.b0 * params.b0 / (params.p as f64 - 1.0)
}

/// The Kavian-Weissler functional
///
/// ```text
/// Q = (1-rho^2) rho^3 u'^2/2 + rho^2 (1-rho^2) u u'/2
///     + (3(5-p)/(4(p-1)) - 2/(p-1)^2) rho^3 u^2 + rho^3 u^(p+1)/(p+1)
/// ```
pub fn eval_q(s: &ProfileState, params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    let (r, u, du) = (s.rho, s.u, s.du);
    let r2 = r * r;
    let r3 = r2 * r;
    let k = 3.0 * (5.0 - pf) / (4.0 * (pf - 1.0)) - 2.0 / ((pf - 1.0) * (pf - 1.0));
    0.5 * (1.0 - r2) * r3 * du * du
        + 0.5 * r2 * (1.0 - r2) * u * du
        + k * r3 * u * u
        + r3 * u.powi(params.p_i32() + 1) / (pf + 1.0)
}

/// `Q'` along a solution. It vanishes identically at `p = 5` and is
/// non-positive for `p > 5`.
pub fn eval_dq(s: &ProfileState, params: &ModelParams) -> f64 {
    // derivative of eval_q with u'' eliminated through the profile equation
    let pf = params.p as f64;
    let (r, u, du) = (s.rho, s.u, s.du);
    let ddu = (params.alpha_alpha1() * u
        - u.powi(params.p_i32())
        - (2.0 / r - (2.0 + 2.0 * params.alpha) * r) * du)
        / (1.0 - r * r);
    let r2 = r * r;
    let r3 = r2 * r;
    let k = 3.0 * (5.0 - pf) / (4.0 * (pf - 1.0)) - 2.0 / ((pf - 1.0) * (pf - 1.0));
    let d_a = 0.5 * ((3.0 * r2 - 5.0 * r2 * r2) * du * du + 2.0 * (1.0 - r2) * r3 * du * ddu);
    let d_b = 0.5 * ((2.0 * r - 4.0 * r3) * u * du + r2 * (1.0 - r2) * (du * du + u * ddu));
    let d_c = k * (3.0 * r2 * u * u + 2.0 * r3 * u * du);
    let d_d = (3.0 * r2 * u.powi(params.p_i32() + 1)
        + (pf + 1.0) * r3 * u.powi(params.p_i32()) * du)
        / (pf + 1.0);
    d_a + d_b + d_c + d_d
}

/// `v = u/u_inf` and `v'`.
pub fn v_of(s: &ProfileState, params: &ModelParams) -> (f64, f64) {
    let ra = (params.alpha * s.rho.ln()).exp();
    let v = s.u * ra / params.b_inf;
    let dv = ra / s.rho * (s.rho * s.du + params.alpha * s.u) / params.b_inf;
    (v, dv)
}

/// `H_v = rho^2 (1-rho^2) v'^2/2 - alpha(1-alpha) (v^2/2 - v^(p+1)/(p+1))`.
pub fn eval_hv(s: &ProfileState, params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    let (v, dv) = v_of(s, params);
    let r2 = s.rho * s.rho;
    0.5 * r2 * (1.0 - r2) * dv * dv
        - params.alpha_1malpha() * (v * v / 2.0 - v.powi(params.p_i32() + 1) / (pf + 1.0))
}

/// `H_v' = (5-p)/(p-1) rho v'^2`.
pub fn eval_dhv(s: &ProfileState, params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    let (_, dv) = v_of(s, params);
    (5.0 - pf) / (pf - 1.0) * s.rho * dv * dv
}

/// Minimum of `H_v`, attained on the singular solution.
pub fn hv_minimum(params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    -(pf - 3.0) / (pf * pf - 1.0)
}

/// The three functionals at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalSample {
    pub rho: f64,
    pub h: f64,
    pub q: f64,
    pub hv: f64,
}

pub fn functionals(s: &ProfileState, params: &ModelParams) -> FunctionalSample {
    FunctionalSample {
        rho: s.rho,
        h: eval_h(s, params),
        q: eval_q(s, params),
        hv: eval_hv(s, params),
    }
}

/// Largest increase of each functional between consecutive samples, measured
/// in units of the drift allowance `1e-9 (1 + |value|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub worst_h: f64,
    pub worst_q: f64,
    pub worst_hv: f64,
    /// Spread of `Q` along the trajectory; only meaningful at `p = 5`.
    pub q_spread: f64,
    pub q_max: f64,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.worst_h <= 1.0 && self.worst_q <= 1.0 && self.worst_hv <= 1.0
    }
}

/// Checks that `H`, `Q` and `H_v` do not increase along the samples of
/// `traj`, read in the direction of increasing `rho`. At `p = 5` checks that
/// `Q` is constant instead of decreasing.
pub fn monotonicity_report(traj: &Trajectory, params: &ModelParams) -> Result<MonotonicityReport> {
    let mut pts: Vec<FunctionalSample> = traj
        .samples()
        .iter()
        .filter(|s| s.rho > 0.0 && s.rho <= 1.0)
        .map(|s| functionals(s, params))
        .collect();
    pts.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let mut worst = [f64::NEG_INFINITY; 3];
    let mut where_ = [(0.0, 0.0); 3];
    for pair in pts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (k, (fa, fb)) in [(a.h, b.h), (a.q, b.q), (a.hv, b.hv)]
            .into_iter()
            .enumerate()
        {
            let score = (fb - fa) / (MONOTONE_DRIFT * (1.0 + fa.abs().max(fb.abs())));
            if score > worst[k] {
                worst[k] = score;
                where_[k] = (a.rho, b.rho);
            }
        }
    }
    let q_max = pts.iter().map(|s| s.q).fold(f64::NEG_INFINITY, f64::max);
    let q_min = pts.iter().map(|s| s.q).fold(f64::INFINITY, f64::min);
    let report = MonotonicityReport {
        samples: pts.len(),
        worst_h: worst[0],
        worst_q: worst[1],
        worst_hv: worst[2],
        q_spread: q_max - q_min,
        q_max,
    };
    let names = ["H", "Q", "H_v"];
    for k in 0..3 {
        // at p = 5 Q is conserved, so either direction of drift counts
        let limit_hit = worst[k] > 1.0 && !(k == 1 && params.p == 5);
        if limit_hit {
            return Err(Error::Monotonicity {
                functional: names[k].into(),
                rho_a: where_[k].0,
                rho_b: where_[k].1,
                increase: worst[k] * MONOTONE_DRIFT,
            });
        }
    }
    if params.p == 5 && report.q_spread > MONOTONE_DRIFT * (1.0 + q_max.abs()) {
        return Err(Error::Monotonicity {
            functional: "Q (first integral)".into(),
            rho_a: pts[0].rho,
            rho_b: pts[pts.len() - 1].rho,
            increase: report.q_spread,
        });
    }
    Ok(report)
}

/// Outcome of the first-crossing check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstCrossing {
    pub c: f64,
    /// First zero of `w`.
    pub rho_1: f64,
    /// `(b_inf / (d c))^(1/alpha)` with `d = (p-1)/p`.
    pub bound: f64,
    /// `rho_1 w'(rho_1)`.
    pub rho_dw: f64,
    /// Whether `rho_1 w'(rho_1) < alpha`; reported, not enforced.
    pub upper_holds: bool,
    /// Minimum of `w` beyond `rho_1` on the integrated range.
    pub min_w_after: f64,
}

/// Locates the first zero of `w` for the center launch `u(0) = c` and checks
/// `rho_1 < (b_inf/(d c))^(1/alpha)`, `rho_1 w'(rho_1) > 0` and `w > -2 alpha`
/// beyond `rho_1` up to `rho_end`.
pub fn first_crossing(c: f64, params: &ModelParams, tol: Tolerances) -> Result<FirstCrossing> {
    let pf = params.p as f64;
    let d = (pf - 1.0) / pf;
    if !(c > params.b0 / d) {
        return Err(Error::Domain(format!(
            "first-crossing bound needs c > b0 p/(p-1) = {}",
            params.b0 / d
        )));
    }
    let bound = (params.b_inf / (d * c)).powf(1.0 / params.alpha);
    let rho_end = 0.9;
    let sh = Shooter::new(params, rho_end, tol)?;
    let traj = sh.center_trajectory(c, rho_end)?;
    let zeros = crate::shoot::w_zeros(&traj, params)?;
    let rho_1 = *zeros
        .first()
        .ok_or_else(|| Error::Diagnostic(format!("w has no zero on (0, {rho_end}] for c = {c}")))?;
    let s1 = traj.eval(rho_1).expect("zero lies on the trajectory");
    let rho_dw = rho_dw_of(&s1, params);
    let min_w_after = traj
        .samples()
        .iter()
        .filter(|s| s.rho > rho_1)
        .map(|s| w_of(s, params))
        .fold(f64::INFINITY, f64::min);
    if !(rho_1 < bound) {
        return Err(Error::Diagnostic(format!(
            "first zero {rho_1} exceeds the bound {bound} for c = {c}"
        )));
    }
    if !(rho_dw > 0.0) {
        return Err(Error::Diagnostic(format!(
            "rho w' = {rho_dw} at the first zero for c = {c}"
        )));
    }
    if !(min_w_after > -2.0 * params.alpha) {
        return Err(Error::Diagnostic(format!(
            "w reaches {min_w_after} <= -2 alpha after rho_1 for c = {c}"
        )));
    }
    Ok(FirstCrossing {
        c,
        rho_1,
        bound,
        rho_dw,
        upper_holds: rho_dw < params.alpha,
        min_w_after,
    })
}

/// `(p-1)^2 Delta(v) = (p-5)^2 - 8(p-3)(v + v^2 + ... + v^(p-1))`.
pub fn discriminant(params: &ModelParams, v: f64) -> f64 {
    let pf = params.p as f64;
    let mut sum = 0.0;
    let mut term = 1.0;
    for _ in 1..params.p {
        term *= v;
        sum += term;
    }
    (pf - 5.0) * (pf - 5.0) - 8.0 * (pf - 3.0) * sum
}

/// Closed form of `(p-1)^2 Delta` at `v = 1 - 2 alpha`:
/// `(2p^2 - 8p + 6) ((p-5)/(p-1))^p - p^2 + 6p - 5`.
pub fn discriminant_closed_form(params: &ModelParams) -> f64 {
    let pf = params.p as f64;
    (2.0 * pf * pf - 8.0 * pf + 6.0) * ((pf - 5.0) / (pf - 1.0)).powi(params.p_i32()) - pf * pf
        + 6.0 * pf
        - 5.0
}

/// Evaluates the discriminant at `v = 1 - 2 alpha`, checks it against the
/// polynomial, checks that it is negative and that the polynomial is negative
/// and decreasing on a sample of `[1 - 2 alpha, 10]`.
pub fn discriminant_check(params: &ModelParams) -> Result<f64> {
    if params.p < 7 {
        return Err(Error::Domain(format!(
            "discriminant check needs p >= 7, got {}",
            params.p
        )));
    }
    let v0 = 1.0 - 2.0 * params.alpha;
    let value = discriminant_closed_form(params);
    let poly = discriminant(params, v0);
    if (value - poly).abs() > 1e-10 * value.abs().max(1.0) {
        return Err(Error::Diagnostic(format!(
            "closed form {value} differs from polynomial {poly}"
        )));
    }
    if !(value < 0.0) {
        return Err(Error::Diagnostic(format!(
            "discriminant {value} is not negative"
        )));
    }
    let mut prev = poly;
    for i in 1..=400 {
        let v = v0 + (10.0 - v0) * i as f64 / 400.0;
        let d = discriminant(params, v);
        if !(d < 0.0 && d <= prev) {
            return Err(Error::Diagnostic(format!(
                "discriminant not negative and decreasing at v = {v}"
            )));
        }
        prev = d;
    }
    Ok(value)
}

/// Profile continued past the light cone, with the checked properties.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub b: f64,
    pub trajectory: Trajectory,
    /// `f(1) = b^p / (2 alpha)`.
    pub f_at_1: f64,
    pub min_f: f64,
    pub min_u: f64,
    pub max_u: f64,
}

/// `f = rho u' + (alpha + 1) u / 2`.
pub fn f_of(s: &ProfileState, params: &ModelParams) -> f64 {
    s.rho * s.du + (params.alpha + 1.0) * s.u / 2.0
}

/// Continues the light-cone-regular solution with `u(1) = b` to `rho_max > 1`
/// and checks `0 < u < b0`, `u` decreasing and `f > 0`.
pub fn extend_beyond_lightcone(
    b: f64,
    rho_max: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<Extension> {
    if !(b > 0.0 && b <= params.b0) {
        return Err(Error::Domain(format!(
            "extension needs 0 < b <= b0, got {b}"
        )));
    }
    if !(rho_max > 1.0 + LIGHTCONE_OFFSET) || !rho_max.is_finite() {
        return Err(Error::Domain(format!(
            "rho_max must exceed 1 + {LIGHTCONE_OFFSET}, got {rho_max}"
        )));
    }
    let series = LightconeSeries::new(b, params, LIGHTCONE_ORDER);
    let mut delta = LIGHTCONE_OFFSET.min(series.validated_radius());
    let target = 0.1 * (tol.atol + tol.rtol * b);
    while series.error_estimate(1.0 + delta) > target && delta > 1e-12 {
        delta *= 0.5;
    }
    let (u, du, _) = series.eval(1.0 + delta);
    let outer = integrate(ProfileState::new(1.0 + delta, u, du), rho_max, params, tol)?;
    if !outer.reached_end() {
        return Err(Error::Integration {
            rho: outer.last().rho,
            reason: format!("extension stopped: {:?}", outer.termination),
        });
    }
    let cap = Trajectory::from_series(1.0, series.coefficients(), 1.0, 1.0 + delta, 5, tol);
    let trajectory = cap.concat(outer)?;
    let on_b0 = (b - params.b0).abs() <= 1e-12;
    let slack = 1e-10 * params.b0;
    let mut ext = Extension {
        b,
        f_at_1: b.powi(params.p_i32()) / (2.0 * params.alpha),
        min_f: f64::INFINITY,
        min_u: f64::INFINITY,
        max_u: f64::NEG_INFINITY,
        trajectory: trajectory.clone(),
    };
    let mut prev: Option<ProfileState> = None;
    for s in trajectory.samples() {
        let f = f_of(s, params);
        ext.min_f = ext.min_f.min(f);
        ext.min_u = ext.min_u.min(s.u);
        ext.max_u = ext.max_u.max(s.u);
        let in_range = if on_b0 {
            (s.u - params.b0).abs() <= slack
        } else {
            s.u > 0.0 && s.u < params.b0
        };
        if !in_range {
            return Err(Error::Diagnostic(format!(
                "u = {} leaves (0, b0) at rho = {}",
                s.u, s.rho
            )));
        }
        if !(f > 0.0) {
            return Err(Error::Diagnostic(format!(
                "f = {f} is not positive at rho = {}",
                s.rho
            )));
        }
        if let Some(q) = prev {
            if s.u > q.u + slack * 1e-2 && !on_b0 {
                return Err(Error::Diagnostic(format!(
                    "u increases on [{}, {}]",
                    q.rho, s.rho
                )));
            }
        }
        prev = Some(*s);
    }
    Ok(ext)
}

/// `theta = sigma u'` at the sample closest to the light cone from inside;
/// approximates the singular-mode amplitude `theta(0)`.
pub fn singular_mode_amplitude(traj: &Trajectory, params: &ModelParams) -> Result<f64> {
    let s = traj
        .samples()
        .iter()
        .filter(|s| s.rho < 1.0)
        .max_by(|a, b| a.rho.total_cmp(&b.rho))
        .ok_or_else(|| Error::Domain("trajectory has no samples inside the light cone".into()))?;
    Ok(to_lightcone_chart(s, params)?.theta)
}

/// Checks `|u| <= c` and `sqrt(1-rho^2) |u'| <= c^((p+1)/2)` along a center
/// launch with `c >= b0`.
pub fn center_bounds(traj: &Trajectory, c: f64, params: &ModelParams) -> Result<()> {
    let cap = c.powf((params.p as f64 + 1.0) / 2.0);
    for s in traj.samples().iter().filter(|s| s.rho < 1.0) {
        let slack = 1e-9 * c;
        if s.u.abs() > c + slack {
            return Err(Error::Diagnostic(format!(
                "|u| = {} exceeds c = {c} at rho = {}",
                s.u.abs(),
                s.rho
            )));
        }
        if (1.0 - s.rho * s.rho).sqrt() * s.du.abs() > cap * (1.0 + 1e-9) {
            return Err(Error::Diagnostic(format!(
                "derivative bound fails at rho = {}",
                s.rho
            )));
        }
    }
    Ok(())
}

/// Checks `H >= -b0^2/(p-1)` along the samples.
pub fn h_bound(traj: &Trajectory, params: &ModelParams) -> Result<()> {
    let lb = h_lower_bound(params);
    for s in traj
        .samples()
        .iter()
        .filter(|s| s.rho > 0.0 && s.rho <= 1.0)
    {
        let h = eval_h(s, params);
        if h < lb - 1e-10 * (1.0 + lb.abs()) {
            return Err(Error::Diagnostic(format!(
                "H = {h} below its lower bound {lb} at rho = {}",
                s.rho
            )));
        }
    }
    Ok(())
}
