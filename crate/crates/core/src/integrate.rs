//! Adaptive Dormand-Prince 5(4) integration of the profile equation with
//! dense output.
//!
//! Two charts are available. [`Chart::Rho`] integrates `(u, u')` in `rho`.
//! [`Chart::LogRho`] integrates `(V, dV/dt)` with `t = ln rho` and
//! `V = rho^alpha u`:
//!
//! ```text
//! (1 - e^{2t}) V'' + (1 - 2 alpha - e^{2t}) V' + alpha (alpha - 1) V + V^p = 0
//! ```
//!
//! which is the exact large-`c` rescaling `x = rho c^((p-1)/2)`, `u = c U(x)`
//! written in `tau = ln x`, `Ubar = x^alpha U`, shifted by `ln c`. Solutions
//! oscillating around `u_inf` have O(1) state in this chart at every scale.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::odecore::{eval_poly, ProfileState};

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 2_000_000,
            h_min: 1e-15,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        let tol = Tolerances {
            rtol,
            atol,
            ..Default::default()
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol <= 1e-6) {
            return Err(Error::Domain(format!(
                "rtol must lie in (0, 1e-6], got {}",
                self.rtol
            )));
        }
        if !(self.atol > 0.0) || !self.atol.is_finite() {
            return Err(Error::Domain(format!(
                "atol must be positive, got {}",
                self.atol
            )));
        }
        if self.max_steps == 0 || !(self.h_min > 0.0) {
            return Err(Error::Domain("max_steps and h_min must be positive".into()));
        }
        Ok(())
    }
}

/// Equation being integrated.
///
/// `Profile` is the profile equation. `Limit` is its large-`c` limit
/// `U'' + (2/x) U' + U^p = 0`, with `x` in place of `rho`. `Linearized` is the
/// linearization about `u_inf` in `w = u/u_inf - 1`:
///
/// ```text
/// rho^2 (1 - rho^2) w'' + (k rho - 2 rho^3) w' + k w = 0,   k = 2(p-3)/(p-1)
/// ```
///
/// For `Linearized` the state holds `(rho, w, w')` and the logarithmic chart
/// uses `(w, rho w')` without the `rho^alpha` weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Equation {
    Profile,
    Limit,
    Linearized,
}

impl Equation {
    fn weight(&self, params: &ModelParams) -> f64 {
        match self {
            Equation::Linearized => 0.0,
            _ => params.alpha,
        }
    }
}

/// Integration variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    Rho,
    LogRho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ReachedEndpoint,
    BlewUp,
    StepUnderflow,
    MaxSteps,
}

/// Local interpolant on one step.
#[derive(Debug, Clone, PartialEq)]
enum Interp {
    Dopri {
        chart: Chart,
        alpha: f64,
        s0: f64,
        h: f64,
        cont: [[f64; 2]; 5],
    },
    /// Taylor polynomial in `rho - origin`.
    Series { origin: f64, coeffs: Vec<f64> },
}

impl Interp {
    fn eval(&self, rho: f64) -> ProfileState {
        match self {
            Interp::Dopri {
                chart,
                alpha,
                s0,
                h,
                cont,
            } => {
                let s = match chart {
                    Chart::Rho => rho,
                    Chart::LogRho => rho.ln(),
                };
                let th = (s - s0) / h;
                let th1 = 1.0 - th;
                let mut y = [0.0; 2];
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = cont[0][i]
                        + th * (cont[1][i]
                            + th1 * (cont[2][i] + th * (cont[3][i] + th1 * cont[4][i])));
                }
                from_chart(*chart, *alpha, s, y)
            }
            Interp::Series { origin, coeffs } => {
                let (u, du, _) = eval_poly(coeffs, rho - origin);
                ProfileState::new(rho, u, du)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    lo: f64,
    hi: f64,
    interp: Interp,
}

/// A densely sampled solution. Samples are strictly monotone in `rho` in
/// the integration direction; [`Trajectory::eval`] interpolates between them
/// with the stepper's continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<ProfileState>,
    segments: Vec<Segment>,
    pub direction: Direction,
    pub tol: Tolerances,
    pub termination: Termination,
}

impl Trajectory {
    pub fn samples(&self) -> &[ProfileState] {
        &self.samples
    }

    pub fn first(&self) -> ProfileState {
        self.samples[0]
    }

    pub fn last(&self) -> ProfileState {
        *self
            .samples
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn reached_end(&self) -> bool {
        self.termination == Termination::ReachedEndpoint
    }

    /// Closed `rho` interval covered by the samples.
    pub fn rho_range(&self) -> (f64, f64) {
        let (a, b) = (self.first().rho, self.last().rho);
        (a.min(b), a.max(b))
    }

    /// Interpolated state at `rho`, or `None` outside the covered range.
    pub fn eval(&self, rho: f64) -> Option<ProfileState> {
        let (lo, hi) = self.rho_range();
        if !(rho >= lo && rho <= hi) {
            return None;
        }
        let idx = self.segments.partition_point(|s| match self.direction {
            Direction::Increasing => s.hi < rho,
            Direction::Decreasing => s.lo > rho,
        });
        let seg = self.segments.get(idx).or(self.segments.last())?;
        Some(seg.interp.eval(rho))
    }

    /// Same trajectory traversed the other way.
    pub fn reversed(mut self) -> Self {
        self.samples.reverse();
        self.segments.reverse();
        self.direction = match self.direction {
            Direction::Increasing => Direction::Decreasing,
            Direction::Decreasing => Direction::Increasing,
        };
        self
    }

    /// Appends `other`, which must start where `self` ends and run the same way.
    pub fn concat(mut self, other: Trajectory) -> Result<Self> {
        if self.direction != other.direction {
            return Err(Error::Domain(
                "cannot join trajectories running in opposite directions".into(),
            ));
        }
        let end = self.last().rho;
        let start = other.first().rho;
        if (end - start).abs() > 1e-12 * end.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "trajectories do not meet: {end} vs {start}"
            )));
        }
        self.samples.extend(other.samples.into_iter().skip(1));
        self.segments.extend(other.segments);
        if other.termination != Termination::ReachedEndpoint {
            self.termination = other.termination;
        }
        Ok(self)
    }

    /// Trajectory built from a Taylor polynomial about `origin`, sampled at
    /// `n` equally spaced points from `from` to `to`.
    pub(crate) fn from_series(
        origin: f64,
        coeffs: &[f64],
        from: f64,
        to: f64,
        n: usize,
        tol: Tolerances,
    ) -> Self {
        let n = n.max(2);
        let samples: Vec<ProfileState> = (0..n)
            .map(|i| {
                let rho = from + (to - from) * i as f64 / (n - 1) as f64;
                let (u, du, _) = eval_poly(coeffs, rho - origin);
                ProfileState::new(rho, u, du)
            })
            .collect();
        let segments = vec![Segment {
            lo: from.min(to),
            hi: from.max(to),
            interp: Interp::Series {
                origin,
                coeffs: coeffs.to_vec(),
            },
        }];
        Trajectory {
            samples,
            segments,
            direction: if to >= from {
                Direction::Increasing
            } else {
                Direction::Decreasing
            },
            tol,
            termination: Termination::ReachedEndpoint,
        }
    }
}

fn to_chart(chart: Chart, alpha: f64, state: &ProfileState) -> (f64, [f64; 2]) {
    match chart {
        Chart::Rho => (state.rho, [state.u, state.du]),
        Chart::LogRho => {
            let t = state.rho.ln();
            let ra = (alpha * t).exp();
            let v = ra * state.u;
            (t, [v, alpha * v + ra * state.rho * state.du])
        }
    }
}

fn from_chart(chart: Chart, alpha: f64, s: f64, y: [f64; 2]) -> ProfileState {
    match chart {
        Chart::Rho => ProfileState::new(s, y[0], y[1]),
        Chart::LogRho => {
            let rho = s.exp();
            let ra = (-alpha * s).exp();
            ProfileState::new(rho, ra * y[0], ra / rho * (y[1] - alpha * y[0]))
        }
    }
}

fn rhs(eq: Equation, chart: Chart, params: &ModelParams, s: f64, y: [f64; 2]) -> [f64; 2] {
    let p = params.p_i32();
    let alpha = params.alpha;
    let k = 2.0 * params.alpha_1malpha() / alpha;
    match (eq, chart) {
        (Equation::Limit, Chart::Rho) => [y[1], -2.0 / s * y[1] - y[0].powi(p)],
        (Equation::Limit, Chart::LogRho) => [
            y[1],
            -((1.0 - 2.0 * alpha) * y[1] + alpha * (alpha - 1.0) * y[0] + y[0].powi(p)),
        ],
        (Equation::Linearized, Chart::Rho) => {
            let r2 = s * s;
            [
                y[1],
                -((k * s - 2.0 * r2 * s) * y[1] + k * y[0]) / (r2 * (1.0 - r2)),
            ]
        }
        (Equation::Linearized, Chart::LogRho) => {
            let q = (2.0 * s).exp();
            [
                y[1],
                -((1.0 - 2.0 * alpha - q) * y[1] + k * y[0]) / (1.0 - q),
            ]
        }
        (Equation::Profile, Chart::Rho) => {
            let rho = s;
            let ddu = (params.alpha_alpha1() * y[0]
                - y[0].powi(p)
                - (2.0 / rho - (2.0 + 2.0 * alpha) * rho) * y[1])
                / (1.0 - rho * rho);
            [y[1], ddu]
        }
        (Equation::Profile, Chart::LogRho) => {
            let q = (2.0 * s).exp();
            let vdd =
                -((1.0 - 2.0 * alpha - q) * y[1] + alpha * (alpha - 1.0) * y[0] + y[0].powi(p))
                    / (1.0 - q);
            [y[1], vdd]
        }
    }
}

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const BLOWUP_BOUND: f64 = 1e150;

fn axpy(y: [f64; 2], terms: &[(f64, [f64; 2])], h: f64) -> [f64; 2] {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrates the profile equation from `start` to `rho_end` in `rho`.
pub fn integrate(
    start: ProfileState,
    rho_end: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<Trajectory> {
    integrate_in(Chart::Rho, start, rho_end, params, tol)
}

/// Integrates the profile equation in the given chart. Both endpoints must
/// lie on the same side of the light cone.
pub fn integrate_in(
    chart: Chart,
    start: ProfileState,
    rho_end: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<Trajectory> {
    integrate_equation(Equation::Profile, chart, start, rho_end, params, tol)
}

/// Integrates any of the [`Equation`]s. Endpoints must avoid the singular
/// points `0` and, except for the limit equation, `1`.
pub fn integrate_equation(
    eq: Equation,
    chart: Chart,
    start: ProfileState,
    rho_end: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<Trajectory> {
    tol.validate()?;
    if !start.is_finite() || !rho_end.is_finite() {
        return Err(Error::Domain(
            "start state and endpoint must be finite".into(),
        ));
    }
    let (a, b) = (start.rho, rho_end);
    let same_side = match eq {
        Equation::Limit => a > 0.0 && b > 0.0,
        _ => (a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) || (a > 1.0 && b > 1.0),
    };
    if !same_side {
        return Err(Error::Domain(format!(
            "rho = {a} and rho = {b} must both lie in (0,1) or both in (1,inf)"
        )));
    }
    let alpha = eq.weight(params);
    let f = |s: f64, y: [f64; 2]| rhs(eq, chart, params, s, y);
    let (s_start, y_start) = to_chart(chart, alpha, &start);
    let s_end = match chart {
        Chart::Rho => rho_end,
        Chart::LogRho => rho_end.ln(),
    };
    let direction = if s_end >= s_start {
        Direction::Increasing
    } else {
        Direction::Decreasing
    };
    let sign = if s_end >= s_start { 1.0 } else { -1.0 };

    let mut samples = vec![start];
    let mut segments = Vec::new();
    let mut termination = Termination::ReachedEndpoint;

    let mut s = s_start;
    let mut y = y_start;
    let mut k1 = f(s, y);
    let span = (s_end - s).abs();
    if span == 0.0 {
        return Ok(Trajectory {
            samples,
            segments,
            direction,
            tol,
            termination,
        });
    }

    let weight =
        |y: &[f64; 2], yn: &[f64; 2], i: usize| tol.atol + tol.rtol * y[i].abs().max(yn[i].abs());
    // initial step guess
    let mut h = {
        let d0 = ((y[0] / weight(&y, &y, 0)).powi(2) + (y[1] / weight(&y, &y, 1)).powi(2)).sqrt()
            / 2f64.sqrt();
        let d1 = ((k1[0] / weight(&y, &y, 0)).powi(2) + (k1[1] / weight(&y, &y, 1)).powi(2)).sqrt()
            / 2f64.sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0.min(span).max(1e-12 * span)
    };

    let safe = 0.9;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let (fac_min, fac_max) = (0.2, 10.0);
    let mut facold: f64 = 1e-4;
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        if steps >= tol.max_steps {
            termination = Termination::MaxSteps;
            break;
        }
        let remaining = (s_end - s).abs();
        if remaining <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
            break;
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let h_floor = tol.h_min.max(8.0 * f64::EPSILON * s.abs());
        if h < h_floor {
            termination = Termination::StepUnderflow;
            break;
        }
        steps += 1;
        let hs = sign * h;
        let k2 = f(s + C2 * hs, axpy(y, &[(A21, k1)], hs));
        let k3 = f(s + C3 * hs, axpy(y, &[(A31, k1), (A32, k2)], hs));
        let k4 = f(s + C4 * hs, axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], hs));
        let k5 = f(
            s + C5 * hs,
            axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], hs),
        );
        let y6 = axpy(
            y,
            &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            hs,
        );
        let s_new = if last { s_end } else { s + hs };
        let k6 = f(s_new, y6);
        let y_new = axpy(y, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], hs);
        let k7 = f(s_new, y_new);

        let finite = y_new.iter().chain(k7.iter()).all(|v| v.is_finite());
        let err = if finite {
            let mut acc = 0.0;
            for i in 0..2 {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                acc += (e / weight(&y, &y_new, i)).powi(2);
            }
            (acc / 2.0).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let mut cont = [[0.0; 2]; 5];
            for i in 0..2 {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - hs * k7[i] - bspl;
                cont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let state = from_chart(chart, alpha, s_new, y_new);
            let prev_rho = samples.last().unwrap().rho;
            let (lo, hi) = (prev_rho.min(state.rho), prev_rho.max(state.rho));
            segments.push(Segment {
                lo,
                hi,
                interp: Interp::Dopri {
                    chart,
                    alpha,
                    s0: s,
                    h: hs,
                    cont,
                },
            });
            samples.push(if last {
                ProfileState {
                    rho: rho_end,
                    ..state
                }
            } else {
                state
            });
            s = s_new;
            y = y_new;
            k1 = k7;
            if y.iter().any(|v| v.abs() > BLOWUP_BOUND) {
                termination = Termination::BlewUp;
                break;
            }
            if last {
                break;
            }
            let mut fac = err.powf(expo1) / facold.powf(beta) / safe;
            facold = err.max(1e-4);
            fac = fac.clamp(1.0 / fac_max, 1.0 / fac_min);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            last_rejected = true;
            let fac = if err.is_finite() {
                (err.powf(0.2) / safe).min(1.0 / fac_min)
            } else {
                1.0 / fac_min
            };
            h /= fac;
        }
    }

    Ok(Trajectory {
        samples,
        segments,
        direction,
        tol,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::u_singular;

    fn p7() -> ModelParams {
        ModelParams::new(7).unwrap()
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerances::new(1e-5, 1e-14).is_err());
        assert!(Tolerances::new(1e-10, 0.0).is_err());
        assert!(Tolerances::new(1e-10, 1e-14).is_ok());
    }

    #[test]
    fn constant_solution_is_preserved() {
        let m = p7();
        for chart in [Chart::Rho, Chart::LogRho] {
            let tr = integrate_in(
                chart,
                ProfileState::new(0.1, m.b0, 0.0),
                0.9,
                &m,
                Tolerances::default(),
            )
            .unwrap();
            assert!(tr.reached_end());
            for s in tr.samples() {
                assert!((s.u - m.b0).abs() < 1e-10, "{chart:?} {s:?}");
            }
        }
    }

    #[test]
    fn singular_solution_backwards() {
        let m = p7();
        let start = ProfileState::new(
            0.9,
            u_singular(&m, 0.9).unwrap(),
            m.du_singular(0.9).unwrap(),
        );
        for chart in [Chart::Rho, Chart::LogRho] {
            let tr = integrate_in(chart, start, 0.1, &m, Tolerances::default()).unwrap();
            assert!(tr.reached_end());
            assert_eq!(tr.direction, Direction::Decreasing);
            let end = tr.last();
            assert_eq!(end.rho, 0.1);
            let exact = u_singular(&m, 0.1).unwrap();
            assert!((end.u / exact - 1.0).abs() < 1e-8);
            for rho in [0.15, 0.333, 0.71] {
                let s = tr.eval(rho).unwrap();
                assert!((s.u / u_singular(&m, rho).unwrap() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_crossing_the_light_cone() {
        let m = p7();
        assert!(integrate(
            ProfileState::new(0.5, 1.0, 0.0),
            1.5,
            &m,
            Tolerances::default()
        )
        .is_err());
        assert!(integrate(
            ProfileState::new(0.5, 1.0, 0.0),
            1.0,
            &m,
            Tolerances::default()
        )
        .is_err());
    }

    #[test]
    fn reversibility() {
        let m = p7();
        let tol = Tolerances::new(1e-11, 1e-14).unwrap();
        let start = ProfileState::new(0.1, 1.2, -0.3);
        let fwd = integrate(start, 0.9, &m, tol).unwrap();
        let back = integrate(fwd.last(), 0.1, &m, tol).unwrap();
        let end = back.last();
        assert!((end.u - start.u).abs() < 100.0 * tol.rtol * start.u.abs());
        assert!((end.du - start.du).abs() < 100.0 * tol.rtol * start.du.abs().max(1.0));
    }

    #[test]
    fn samples_strictly_monotone_and_dense_output_matches_nodes() {
        let m = p7();
        let tr = integrate(
            ProfileState::new(0.2, 1.1, 0.4),
            0.8,
            &m,
            Tolerances::default(),
        )
        .unwrap();
        for w in tr.samples().windows(2) {
            assert!(w[1].rho > w[0].rho);
        }
        for s in tr.samples() {
            let e = tr.eval(s.rho).unwrap();
            assert!((e.u - s.u).abs() < 1e-13 * s.u.abs().max(1.0));
        }
        assert!(tr.eval(0.1).is_none());
    }

    #[test]
    fn near_singularity_reports_last_state() {
        let m = p7();
        // u = 3 far above b0 drives a finite-rho blowup of the rho > 1 branch
        let tr = integrate(
            ProfileState::new(1.5, 30.0, 0.0),
            50.0,
            &m,
            Tolerances::default(),
        )
        .unwrap();
        assert_ne!(tr.termination, Termination::ReachedEndpoint);
        assert!(tr.last().rho < 50.0);
    }
}
