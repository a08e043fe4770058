//! Two-sided shooting for the regular profiles.
//!
//! Solutions regular at the center form a curve `C0` (parametrized by
//! `c = u(0)`) in the `(u, u')` plane at a midpoint `rho_mid`; solutions
//! regular at the light cone form a curve `C1` (parametrized by `b = u(1)`).
//! Every intersection is a profile that is smooth on `[0, 1]`. Profiles are
//! labelled by `n`, where `w = u/u_inf - 1` has `n + 1` zeros.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::scaling_predictions;
use crate::diagnostics::{phase_zero_count, w_of};
use crate::error::{Error, Result};
use crate::integrate::{integrate_in, Chart, Tolerances, Trajectory};
use crate::model::ModelParams;
use crate::odecore::{
    CenterSeries, LightconeSeries, ProfileState, SeriesStart, CENTER_ORDER, LIGHTCONE_ORDER,
};

pub const DEFAULT_RHO_MID: f64 = 0.5;
/// Largest center launch offset, before scaling with `c`.
pub const CENTER_OFFSET: f64 = 1e-3;
/// Largest light-cone launch offset `1 - rho0`.
pub const LIGHTCONE_OFFSET: f64 = 1e-3;
/// Center launches with `c` above this integrate in the logarithmic chart.
pub const LOG_CHART_THRESHOLD: f64 = 10.0;
/// Target norm of the scaled mismatch after refinement.
pub const MISMATCH_TARGET: f64 = 1e-9;
/// Center grid points per predicted period of the `C0` spiral.
pub const POINTS_PER_PERIOD: usize = 40;

const FD_STEP_LOG_C: f64 = 1e-7;
const FD_STEP_B: f64 = 1e-9;
const MAX_NEWTON_ITERATIONS: usize = 60;

/// Which family a midpoint image belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Center,
    Lightcone,
}

/// State at `rho_mid` of the solution launched with parameter `param`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MidpointImage {
    pub param: f64,
    pub u_mid: f64,
    pub du_mid: f64,
    pub side: Side,
}

/// A refined profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub n: usize,
    pub c_n: f64,
    pub b_n: f64,
    /// Norm of the scaled mismatch at `rho_mid`.
    pub mismatch: f64,
    /// Zeros of `w_n` on `(0, 1]`.
    pub zeros: usize,
    /// Set when another intersection with the same label was found.
    pub duplicate: bool,
    /// Merged solution on `[rho0, 1]`.
    pub trajectory: Trajectory,
}

/// One row of [`spectrum`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub n: usize,
    pub solution: std::result::Result<ShootingResult, Error>,
    /// `c_{n+1} / c_n`.
    pub delta_c: Option<f64>,
    /// `(b_{n+1} - b_inf) / (b_inf - b_n)`.
    pub delta_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub rows: Vec<SpectrumRow>,
    pub ratio_c: f64,
    pub ratio_b: f64,
}

impl Spectrum {
    pub fn all_found(&self) -> bool {
        self.rows.iter().all(|r| r.solution.is_ok())
    }

    pub fn get(&self, n: usize) -> Option<&ShootingResult> {
        self.rows.iter().find(|r| r.n == n)?.solution.as_ref().ok()
    }
}

/// Shooting configuration bound to one exponent.
#[derive(Debug, Clone, Copy)]
pub struct Shooter<'a> {
    pub params: &'a ModelParams,
    pub rho_mid: f64,
    pub tol: Tolerances,
}

fn ensure_reached(tr: &Trajectory, what: &str) -> Result<()> {
    if tr.reached_end() {
        Ok(())
    } else {
        Err(Error::Integration {
            rho: tr.last().rho,
            reason: format!("{what} stopped: {:?}", tr.termination),
        })
    }
}

impl<'a> Shooter<'a> {
    pub fn new(params: &'a ModelParams, rho_mid: f64, tol: Tolerances) -> Result<Self> {
        if !(rho_mid > 0.0 && rho_mid < 1.0) {
            return Err(Error::Domain(format!(
                "rho_mid must lie in (0,1), got {rho_mid}"
            )));
        }
        tol.validate()?;
        Ok(Shooter {
            params,
            rho_mid,
            tol,
        })
    }

    fn launch_target(&self, scale: f64) -> f64 {
        0.1 * (self.tol.atol + self.tol.rtol * scale.abs())
    }

    /// Series launch near the center, halving the offset until the
    /// truncation estimate is below the integration tolerance.
    pub fn center_launch(&self, c: f64) -> Result<SeriesStart> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!(
                "c must be finite and non-negative, got {c}"
            )));
        }
        let series = CenterSeries::new(c, 1.0, self.params, CENTER_ORDER);
        let shrink = c.max(1.0).powf(-(self.params.p as f64 - 1.0) / 2.0);
        let mut rho0 = (CENTER_OFFSET * shrink).min(series.validated_radius());
        let target = self.launch_target(c);
        for _ in 0..60 {
            if series.error_estimate(rho0) <= target {
                let (u, du, _) = series.eval(rho0);
                return Ok(SeriesStart {
                    rho0,
                    state: ProfileState::new(rho0, u, du),
                    trunc_order: CENTER_ORDER,
                    trunc_error_est: series.error_estimate(rho0),
                });
            }
            rho0 *= 0.5;
        }
        Err(Error::Range {
            offset: rho0,
            radius: series.validated_radius(),
        })
    }

    /// Series launch at `rho0 = 1 - delta` for `u(1) = b`.
    pub fn lightcone_launch(&self, b: f64) -> Result<(SeriesStart, LightconeSeries)> {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::Domain(format!(
                "b must be finite and non-negative, got {b}"
            )));
        }
        let series = LightconeSeries::new(b, self.params, LIGHTCONE_ORDER);
        let mut delta = LIGHTCONE_OFFSET.min(series.validated_radius());
        let target = self.launch_target(b);
        for _ in 0..60 {
            let rho0 = 1.0 - delta;
            if series.error_estimate(rho0) <= target {
                let (u, du, _) = series.eval(rho0);
                let start = SeriesStart {
                    rho0,
                    state: ProfileState::new(rho0, u, du),
                    trunc_order: LIGHTCONE_ORDER,
                    trunc_error_est: series.error_estimate(rho0),
                };
                return Ok((start, series));
            }
            delta *= 0.5;
        }
        Err(Error::Range {
            offset: delta,
            radius: series.validated_radius(),
        })
    }

    /// Center-regular solution with `u(0) = c` from its launch point to `rho_end`.
    pub fn center_trajectory(&self, c: f64, rho_end: f64) -> Result<Trajectory> {
        let start = self.center_launch(c)?;
        let chart = if c > LOG_CHART_THRESHOLD {
            Chart::LogRho
        } else {
            Chart::Rho
        };
        let tr = integrate_in(chart, start.state, rho_end, self.params, self.tol)?;
        ensure_reached(&tr, "center integration")?;
        Ok(tr)
    }

    /// Light-cone-regular solution with `u(1) = b`, integrated inward to `rho_end`.
    pub fn lightcone_trajectory(&self, b: f64, rho_end: f64) -> Result<Trajectory> {
        let (start, _) = self.lightcone_launch(b)?;
        let tr = integrate_in(Chart::Rho, start.state, rho_end, self.params, self.tol)?;
        ensure_reached(&tr, "light-cone integration")?;
        Ok(tr)
    }

    pub fn center_image(&self, c: f64) -> Result<MidpointImage> {
        let end = self.center_trajectory(c, self.rho_mid)?.last();
        Ok(MidpointImage {
            param: c,
            u_mid: end.u,
            du_mid: end.du,
            side: Side::Center,
        })
    }

    pub fn lightcone_image(&self, b: f64) -> Result<MidpointImage> {
        let end = self.lightcone_trajectory(b, self.rho_mid)?.last();
        Ok(MidpointImage {
            param: b,
            u_mid: end.u,
            du_mid: end.du,
            side: Side::Lightcone,
        })
    }

    /// Scale dividing `u'` so that both mismatch components are O(1).
    pub fn du_scale(&self) -> f64 {
        self.params
            .du_singular(self.rho_mid)
            .map(f64::abs)
            .unwrap_or(1.0)
    }

    fn scaled(&self, img: &MidpointImage) -> [f64; 2] {
        [img.u_mid, img.du_mid / self.du_scale()]
    }

    /// `(du, du')` = center image minus light-cone image, with `du'` divided by
    /// `|u_inf'(rho_mid)|`.
    pub fn mismatch(&self, c: f64, b: f64) -> Result<[f64; 2]> {
        let a = self.scaled(&self.center_image(c)?);
        let l = self.scaled(&self.lightcone_image(b)?);
        Ok([a[0] - l[0], a[1] - l[1]])
    }

    /// Center trajectory on `[rho0, rho_mid]`, light-cone trajectory on
    /// `[rho_mid, 1 - delta]` and the light-cone series on `[1 - delta, 1]`.
    pub fn merged_trajectory(&self, c: f64, b: f64) -> Result<Trajectory> {
        let inner = self.center_trajectory(c, self.rho_mid)?;
        let outer = self.lightcone_trajectory(b, self.rho_mid)?.reversed();
        let (start, series) = self.lightcone_launch(b)?;
        let cap = Trajectory::from_series(1.0, series.coefficients(), start.rho0, 1.0, 9, self.tol);
        inner.concat(outer)?.concat(cap)
    }

    /// Damped Newton iteration on the scaled mismatch in `(ln c, b)`.
    /// Returns the converged `(c, b, norm)` or the best point reached.
    pub fn newton(
        &self,
        c0: f64,
        b0: f64,
    ) -> std::result::Result<(f64, f64, f64), (f64, f64, f64)> {
        let scale = self.du_scale();
        let center = |x: f64| -> Option<[f64; 2]> {
            let img = self.center_image(x.exp()).ok()?;
            Some([img.u_mid, img.du_mid / scale])
        };
        let light = |b: f64| -> Option<[f64; 2]> {
            if !(b > 0.0) {
                return None;
            }
            let img = self.lightcone_image(b).ok()?;
            Some([img.u_mid, img.du_mid / scale])
        };
        let norm = |f: [f64; 2]| f[0].hypot(f[1]);
        let mut x = c0.ln();
        let mut b = b0;
        let (Some(mut pc), Some(mut pl)) = (center(x), light(b)) else {
            return Err((c0, b0, f64::INFINITY));
        };
        let mut f = [pc[0] - pl[0], pc[1] - pl[1]];
        for _ in 0..MAX_NEWTON_ITERATIONS {
            let nf = norm(f);
            if nf < MISMATCH_TARGET {
                return Ok((x.exp(), b, nf));
            }
            let (Some(pcx), Some(plb)) = (center(x + FD_STEP_LOG_C), light(b + FD_STEP_B)) else {
                return Err((x.exp(), b, nf));
            };
            let j = [
                [
                    (pcx[0] - pc[0]) / FD_STEP_LOG_C,
                    -(plb[0] - pl[0]) / FD_STEP_B,
                ],
                [
                    (pcx[1] - pc[1]) / FD_STEP_LOG_C,
                    -(plb[1] - pl[1]) / FD_STEP_B,
                ],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err((x.exp(), b, nf));
            }
            let mut dx = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let mut db = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
            // keep a single step inside one spiral half-turn
            let cap = (0.5 / dx.abs())
                .min(0.25 * self.params.b0 / db.abs())
                .min(1.0);
            dx *= cap;
            db *= cap;
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-6 {
                let (xn, bn) = (x + lambda * dx, b + lambda * db);
                if let (Some(pcn), Some(pln)) = (center(xn), light(bn)) {
                    let fnew = [pcn[0] - pln[0], pcn[1] - pln[1]];
                    if norm(fnew) < nf {
                        x = xn;
                        b = bn;
                        pc = pcn;
                        pl = pln;
                        f = fnew;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err((x.exp(), b, nf));
            }
        }
        let nf = norm(f);
        if nf < MISMATCH_TARGET {
            Ok((x.exp(), b, nf))
        } else {
            Err((x.exp(), b, nf))
        }
    }

    /// Shrinks a bracketing pair of segments `[c_a, c_b] x [b_a, b_b]` of the two
    /// curves by repeated subdivision, then polishes with Newton.
    fn bisect_bracket(&self, mut cr: (f64, f64), mut br: (f64, f64)) -> Result<(f64, f64, f64)> {
        const PIECES: usize = 4;
        let mut seed = (cr.0, br.0);
        for _ in 0..40 {
            let cs: Vec<f64> = (0..=PIECES)
                .map(|i| (cr.0.ln() + (cr.1.ln() - cr.0.ln()) * i as f64 / PIECES as f64).exp())
                .collect();
            let bs: Vec<f64> = (0..=PIECES)
                .map(|i| br.0 + (br.1 - br.0) * i as f64 / PIECES as f64)
                .collect();
            let c_pts: Vec<Option<[f64; 2]>> = cs
                .iter()
                .map(|&c| self.center_image(c).ok().map(|m| self.scaled(&m)))
                .collect();
            let b_pts: Vec<Option<[f64; 2]>> = bs
                .iter()
                .map(|&b| self.lightcone_image(b).ok().map(|m| self.scaled(&m)))
                .collect();
            let hits = polyline_intersections(&c_pts, &b_pts);
            let Some(h) = hits.first() else { break };
            seed = (
                (cs[h.i].ln() + h.s * (cs[h.i + 1].ln() - cs[h.i].ln())).exp(),
                bs[h.j] + h.t * (bs[h.j + 1] - bs[h.j]),
            );
            cr = (cs[h.i], cs[h.i + 1]);
            br = (bs[h.j], bs[h.j + 1]);
            if (cr.1 / cr.0 - 1.0).abs() < 1e-6 && (br.1 - br.0).abs() < 1e-8 {
                break;
            }
        }
        match self.newton(seed.0, seed.1) {
            Ok(sol) => Ok(sol),
            Err((c, b, nf)) => Err(Error::SearchFailure {
                n: 0,
                trace: vec![format!(
                    "subdivision ended at c = {c:.10e}, b = {b:.10e}, |F| = {nf:.3e}"
                )],
            }),
        }
    }

    /// Builds the result for a converged `(c, b)`, labelling it by its zeros.
    pub fn classify(&self, c: f64, b: f64, mismatch: f64) -> Result<ShootingResult> {
        let trajectory = self.merged_trajectory(c, b)?;
        let zeros = nodal_index(&trajectory, self.params)?;
        if zeros == 0 {
            return Err(Error::Diagnostic(format!(
                "w has no zeros for c = {c}, b = {b}"
            )));
        }
        Ok(ShootingResult {
            n: zeros - 1,
            c_n: c,
            b_n: b,
            mismatch,
            zeros,
            duplicate: false,
            trajectory,
        })
    }

    /// Center and light-cone images over the given grids, in scaled coordinates.
    pub fn curves(&self, c_grid: &[f64], b_grid: &[f64]) -> (Polyline, Polyline) {
        let c_pts = c_grid
            .par_iter()
            .map(|&c| self.center_image(c).ok().map(|m| self.scaled(&m)))
            .collect();
        let b_pts = b_grid
            .par_iter()
            .map(|&b| self.lightcone_image(b).ok().map(|m| self.scaled(&m)))
            .collect();
        (c_pts, b_pts)
    }

    /// All profiles whose curve intersections fall inside the grids.
    pub fn scan(&self, c_grid: &[f64], b_grid: &[f64]) -> (Vec<ShootingResult>, Vec<String>) {
        let (c_pts, b_pts) = self.curves(c_grid, b_grid);
        let hits = polyline_intersections(&c_pts, &b_pts);
        let outcomes: Vec<Result<ShootingResult>> = hits
            .par_iter()
            .map(|h| {
                let c = (c_grid[h.i].ln() + h.s * (c_grid[h.i + 1].ln() - c_grid[h.i].ln())).exp();
                let b = b_grid[h.j] + h.t * (b_grid[h.j + 1] - b_grid[h.j]);
                let (c, b, nf) = match self.newton(c, b) {
                    Ok(sol) => sol,
                    Err(_) => self.bisect_bracket(
                        (c_grid[h.i], c_grid[h.i + 1]),
                        (b_grid[h.j], b_grid[h.j + 1]),
                    )?,
                };
                self.classify(c, b, nf)
            })
            .collect();
        let mut found: Vec<ShootingResult> = Vec::new();
        let mut trace = vec![format!(
            "scan: {} c points in [{:.4e}, {:.4e}], {} b points, {} intersections",
            c_grid.len(),
            c_grid.first().copied().unwrap_or(f64::NAN),
            c_grid.last().copied().unwrap_or(f64::NAN),
            b_grid.len(),
            hits.len()
        )];
        for o in outcomes {
            match o {
                Ok(r) => {
                    let same = found.iter().position(|f| {
                        (f.c_n / r.c_n - 1.0).abs() < 1e-7 && (f.b_n - r.b_n).abs() < 1e-8
                    });
                    if same.is_none() {
                        found.push(r);
                    }
                }
                Err(e) => trace.push(e.to_string()),
            }
        }
        found.sort_by(|a, b| a.c_n.total_cmp(&b.c_n));
        for i in 0..found.len() {
            if found.iter().filter(|f| f.n == found[i].n).count() > 1 {
                found[i].duplicate = true;
            }
        }
        (found, trace)
    }

    /// Log grid in `c` with [`POINTS_PER_PERIOD`] points per predicted spiral period.
    pub fn c_grid(&self, c_lo: f64, c_hi: f64) -> Vec<f64> {
        let (ratio_c, _) = scaling_predictions(self.params);
        let period = (ratio_c * ratio_c).ln();
        let span = (c_hi / c_lo).ln();
        let n = ((span / period) * POINTS_PER_PERIOD as f64).ceil().max(2.0) as usize;
        (0..=n)
            .map(|i| (c_lo.ln() + span * i as f64 / n as f64).exp())
            .collect()
    }

    /// Linear grid on `(0, b0)` refined geometrically around `b_inf`.
    pub fn b_grid(&self) -> Vec<f64> {
        let (b0, bi) = (self.params.b0, self.params.b_inf);
        let mut grid: Vec<f64> = (1..=60).map(|i| b0 * i as f64 / 61.0).collect();
        for k in 4..=32 {
            let d = bi * 10f64.powf(-(k as f64) / 4.0);
            for b in [bi - d, bi + d] {
                if b > 0.0 && b < b0 {
                    grid.push(b);
                }
            }
        }
        grid.push(bi);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    fn b_window(&self, center: f64, half_width: f64) -> Vec<f64> {
        let bi = self.params.b_inf;
        let mut grid: Vec<f64> = (0..=40)
            .map(|i| center - half_width + 2.0 * half_width * i as f64 / 40.0)
            .filter(|b| *b > 0.0 && *b < self.params.b0)
            .collect();
        grid.push(bi);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Profiles `u_1 .. u_{n_max}` with the quotient columns.
    pub fn spectrum(&self, n_max: usize) -> Result<Spectrum> {
        if n_max == 0 {
            return Err(Error::Domain("n_max must be at least 1".into()));
        }
        let (ratio_c, ratio_b) = scaling_predictions(self.params);
        let (b0, bi) = (self.params.b0, self.params.b_inf);
        let c_hi = b0 * ratio_c.powi(4);
        let (scanned, scan_trace) = self.scan(&self.c_grid(0.5 * b0, c_hi), &self.b_grid());

        let mut rows: Vec<SpectrumRow> = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let hit = scanned.iter().find(|r| r.n == n).cloned();
            let solution = match hit {
                Some(r) => Ok(r),
                None => {
                    let prev = rows
                        .last()
                        .and_then(|r: &SpectrumRow| r.solution.as_ref().ok());
                    match (n >= 3, prev) {
                        (true, Some(prev)) => self.seeded(n, prev, ratio_c, ratio_b),
                        _ => Err(Error::SearchFailure {
                            n,
                            trace: scan_trace.clone(),
                        }),
                    }
                }
            };
            rows.push(SpectrumRow {
                n,
                solution,
                delta_c: None,
                delta_b: None,
            });
        }
        for i in 0..rows.len().saturating_sub(1) {
            let quotients = match (&rows[i].solution, &rows[i + 1].solution) {
                (Ok(a), Ok(b)) => Some((b.c_n / a.c_n, (b.b_n - bi) / (bi - a.b_n))),
                _ => None,
            };
            if let Some((dc, db)) = quotients {
                rows[i].delta_c = Some(dc);
                rows[i].delta_b = Some(db);
            }
        }
        Ok(Spectrum {
            rows,
            ratio_c,
            ratio_b,
        })
    }

    /// Finds `u_n` from `u_{n-1}` using the asymptotic quotients as the
    /// initial guess, falling back to a windowed scan.
    fn seeded(
        &self,
        n: usize,
        prev: &ShootingResult,
        ratio_c: f64,
        ratio_b: f64,
    ) -> Result<ShootingResult> {
        let bi = self.params.b_inf;
        let c_seed = prev.c_n * ratio_c;
        let b_seed = bi + ratio_b * (bi - prev.b_n);
        let mut trace = vec![format!("seed c = {c_seed:.10e}, b = {b_seed:.10e}")];
        match self.newton(c_seed, b_seed) {
            Ok((c, b, nf)) => match self.classify(c, b, nf) {
                Ok(r) if r.n == n => return Ok(r),
                Ok(r) => trace.push(format!(
                    "Newton converged to n = {} at c = {:.10e}",
                    r.n, r.c_n
                )),
                Err(e) => trace.push(e.to_string()),
            },
            Err((c, b, nf)) => trace.push(format!(
                "Newton stalled at c = {c:.6e}, b = {b:.6e}, |F| = {nf:.3e}"
            )),
        }
        let half = ratio_c.powf(0.75);
        let c_grid = self.c_grid(c_seed / half, c_seed * half);
        let b_grid = self.b_window(b_seed, 2.0 * (b_seed - bi).abs());
        let (found, scan_trace) = self.scan(&c_grid, &b_grid);
        trace.extend(scan_trace);
        found
            .into_iter()
            .find(|r| r.n == n)
            .ok_or(Error::SearchFailure { n, trace })
    }

    /// The profile `u_n`.
    pub fn find_solution(&self, n: usize) -> Result<ShootingResult> {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        let spec = self.spectrum(n)?;
        spec.rows.into_iter().last().expect("n rows").solution
    }
}

/// Vertices of a sampled curve; `None` marks a failed sample.
pub type Polyline = Vec<Option<[f64; 2]>>;

/// Crossing of segment `i` of the first polyline with segment `j` of the
/// second, at local parameters `s` and `t` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub t: f64,
}

/// All crossings of two polylines; segments touching a missing point are skipped.
pub fn polyline_intersections(a: &[Option<[f64; 2]>], b: &[Option<[f64; 2]>]) -> Vec<Crossing> {
    let mut out = Vec::new();
    for i in 0..a.len().saturating_sub(1) {
        let (Some(p0), Some(p1)) = (a[i], a[i + 1]) else {
            continue;
        };
        let (axmin, axmax) = (p0[0].min(p1[0]), p0[0].max(p1[0]));
        let (aymin, aymax) = (p0[1].min(p1[1]), p0[1].max(p1[1]));
        for j in 0..b.len().saturating_sub(1) {
            let (Some(q0), Some(q1)) = (b[j], b[j + 1]) else {
                continue;
            };
            if q0[0].max(q1[0]) < axmin
                || q0[0].min(q1[0]) > axmax
                || q0[1].max(q1[1]) < aymin
                || q0[1].min(q1[1]) > aymax
            {
                continue;
            }
            let r = [p1[0] - p0[0], p1[1] - p0[1]];
            let d = [q1[0] - q0[0], q1[1] - q0[1]];
            let den = r[0] * d[1] - r[1] * d[0];
            if den == 0.0 {
                continue;
            }
            let e = [q0[0] - p0[0], q0[1] - p0[1]];
            let s = (e[0] * d[1] - e[1] * d[0]) / den;
            let t = (e[0] * r[1] - e[1] * r[0]) / den;
            // half-open in s so a crossing at a shared vertex is reported once
            if (0.0..1.0).contains(&s) && (0.0..=1.0).contains(&t) {
                out.push(Crossing { i, j, s, t });
            }
        }
    }
    out
}

/// Number of zeros of `w = u/u_inf - 1` on the trajectory, from sign changes
/// on the sample grid. Cross-checked against the winding of the phase angle.
pub fn nodal_index(traj: &Trajectory, params: &ModelParams) -> Result<usize> {
    let sign_count = w_zeros(traj, params)?.len();
    let phase_count = phase_zero_count(traj, params)?;
    if sign_count != phase_count {
        return Err(Error::Diagnostic(format!(
            "sign changes of w ({sign_count}) disagree with the phase count ({phase_count})"
        )));
    }
    Ok(sign_count)
}

/// Locations of the zeros of `w`, bisected on the dense output.
pub fn w_zeros(traj: &Trajectory, params: &ModelParams) -> Result<Vec<f64>> {
    let samples = traj.samples();
    let w = |s: &ProfileState| w_of(s, params);
    let mut zeros = Vec::new();
    let mut flat = true;
    for pair in samples.windows(2) {
        let (wa, wb) = (w(&pair[0]), w(&pair[1]));
        if wa.abs() > 1e-12 || wb.abs() > 1e-12 {
            flat = false;
        }
        if (wa < 0.0) == (wb < 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (pair[0].rho, pair[1].rho);
        let mut wlo = wa;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo.min(hi) || mid >= lo.max(hi) {
                break;
            }
            let wm = traj.eval(mid).map(|s| w(&s)).unwrap_or(f64::NAN);
            if (wm < 0.0) == (wlo < 0.0) {
                lo = mid;
                wlo = wm;
            } else {
                hi = mid;
            }
        }
        zeros.push(0.5 * (lo + hi));
    }
    if flat {
        return Err(Error::Degenerate {
            rho: samples[0].rho,
            r: 0.0,
        });
    }
    Ok(zeros)
}

/// Threads requested through `BLOWUP_THREADS`, if set to a positive integer.
pub fn requested_threads() -> Option<usize> {
    std::env::var("BLOWUP_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

/// Runs `f` on a pool capped by `BLOWUP_THREADS`, or on the global pool.
pub fn with_thread_limit<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match requested_threads()
        .and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok())
    {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

pub fn center_image(
    c: f64,
    rho_mid: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<MidpointImage> {
    Shooter::new(params, rho_mid, tol)?.center_image(c)
}

pub fn lightcone_image(
    b: f64,
    rho_mid: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<MidpointImage> {
    Shooter::new(params, rho_mid, tol)?.lightcone_image(b)
}

pub fn mismatch(
    c: f64,
    b: f64,
    rho_mid: f64,
    params: &ModelParams,
    tol: Tolerances,
) -> Result<[f64; 2]> {
    Shooter::new(params, rho_mid, tol)?.mismatch(c, b)
}

pub fn find_solution(n: usize, params: &ModelParams, tol: Tolerances) -> Result<ShootingResult> {
    with_thread_limit(|| Shooter::new(params, DEFAULT_RHO_MID, tol)?.find_solution(n))
}

pub fn spectrum(n_max: usize, params: &ModelParams, tol: Tolerances) -> Result<Spectrum> {
    with_thread_limit(|| Shooter::new(params, DEFAULT_RHO_MID, tol)?.spectrum(n_max))
}
