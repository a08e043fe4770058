//! Command-line front end.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{
    fit_limit_asymptotics, integrate_limit_equation, limit_lyapunov, limit_lyapunov_increase,
    numerical_limit_eigenvalues, phase_steps, scaling_predictions, solve_linearized_lightcone,
    DEFAULT_X_MAX,
};
use crate::diagnostics::{
    discriminant_check, eval_h, eval_q, extend_beyond_lightcone, f_of, first_crossing, h_bound,
    monotonicity_report, phase_at, phase_trajectory, w_of,
};
use crate::error::{Error, Result};
use crate::integrate::{integrate, Tolerances, Trajectory};
use crate::model::{derive_constants, ModelParams};
use crate::shoot::{w_zeros, with_thread_limit, Shooter, ShootingResult, DEFAULT_RHO_MID};

/// Exit code for computational failures.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for invalid input.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "blowup",
    version,
    about = "Self-similar blowup profiles of u_tt - Δu = u^p"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Exponent of the nonlinearity (integer >= 6).
    #[arg(long, global = true, default_value_t = 7)]
    pub p: i64,
    /// Matching point of the two shooting families.
    #[arg(long = "rho-mid", global = true, default_value_t = DEFAULT_RHO_MID)]
    pub rho_mid: f64,
    /// Relative integration tolerance.
    #[arg(long, global = true, default_value = "1e-12")]
    pub rtol: f64,
    /// Absolute integration tolerance.
    #[arg(long, global = true, default_value = "1e-14")]
    pub atol: f64,
    /// Output file, `-` for stdout.
    #[arg(long, global = true, default_value = "-")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form constants and scaling ratios.
    Constants,
    /// One profile u_n.
    Solve {
        #[arg(long)]
        n: usize,
    },
    /// Profiles u_1..u_{n_max} with quotient columns.
    Spectrum {
        #[arg(long = "n-max", default_value_t = 12)]
        n_max: usize,
    },
    /// Profile u_n sampled on [rho0, 1]; n = 0 is the constant solution.
    Profile {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Midpoint images of the center and light-cone families.
    Curves {
        #[arg(long = "c-min", default_value_t = 0.5)]
        c_min: f64,
        #[arg(long = "c-max", default_value_t = 1e6)]
        c_max: f64,
        #[arg(long = "c-samples", default_value_t = 600)]
        c_samples: usize,
        #[arg(long = "b-samples", default_value_t = 200)]
        b_samples: usize,
    },
    /// Large-c limit equation and its asymptotic fit.
    Limit {
        #[arg(long = "x-max", default_value = "1e30")]
        x_max: f64,
    },
    /// Continuation of u_n beyond the light cone.
    Extend {
        #[arg(long)]
        n: usize,
        #[arg(long = "rho-max", default_value_t = 100.0)]
        rho_max: f64,
    },
    /// Runs the invariant suite.
    Check {
        #[arg(long = "n-max", default_value_t = 12)]
        n_max: usize,
    },
}

/// Validated settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub rho_mid: f64,
    pub tol: Tolerances,
    pub out: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub fn from_common(c: &Common) -> Result<Self> {
        let params = derive_constants(c.p as f64)?;
        let tol = Tolerances::new(c.rtol, c.atol)?;
        if !(c.rho_mid > 0.0 && c.rho_mid < 1.0) {
            return Err(Error::Domain(format!(
                "--rho-mid must lie in (0,1), got {}",
                c.rho_mid
            )));
        }
        Ok(RunConfig {
            params,
            rho_mid: c.rho_mid,
            tol,
            out: c.out.clone(),
            format: c.format,
        })
    }

    fn shooter(&self) -> Result<Shooter<'_>> {
        Shooter::new(&self.params, self.rho_mid, self.tol)
    }
}

/// Formats like C's `%.10g`.
pub fn fmt_num(x: f64) -> String {
    const DIGITS: i32 = 10;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..DIGITS).contains(&exp) {
        trim(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x))
    } else {
        format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// What a subcommand produced.
pub struct Output {
    csv: String,
    json: Value,
    ok: bool,
}

fn envelope(command: &str, params: &ModelParams, ok: bool, result: Value) -> Value {
    json!({
        "command": command,
        "status": if ok { "ok" } else { "failed" },
        "params": params,
        "result": result,
    })
}

fn write_output(cfg: &RunConfig, out: &Output) -> io::Result<()> {
    let text = match cfg.format {
        Format::Csv => out.csv.clone(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.json).map_err(io::Error::other)?;
            s.push('\n');
            s
        }
    };
    if cfg.out.as_os_str() == "-" {
        let mut stdout = io::stdout().lock();
        stdout.write_all(text.as_bytes())?;
        stdout.flush()
    } else {
        File::create(&cfg.out)?.write_all(text.as_bytes())
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::from_common(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = with_thread_limit(|| dispatch(&cli.command, &cfg));
    match result {
        Ok(out) => {
            if let Err(e) = write_output(&cfg, &out) {
                eprintln!("error: cannot write output: {e}");
                return EXIT_FAILURE;
            }
            if out.ok {
                0
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Output> {
    match cmd {
        Command::Constants => Ok(cmd_constants(cfg)),
        Command::Solve { n } => cmd_solve(cfg, *n),
        Command::Spectrum { n_max } => cmd_spectrum(cfg, *n_max),
        Command::Profile { n, samples } => cmd_profile(cfg, *n, *samples),
        Command::Curves {
            c_min,
            c_max,
            c_samples,
            b_samples,
        } => cmd_curves(cfg, *c_min, *c_max, *c_samples, *b_samples),
        Command::Limit { x_max } => cmd_limit(cfg, *x_max),
        Command::Extend { n, rho_max } => cmd_extend(cfg, *n, *rho_max),
        Command::Check { n_max } => cmd_check(cfg, *n_max),
    }
}

pub fn cmd_constants(cfg: &RunConfig) -> Output {
    let m = &cfg.params;
    let (ratio_c, ratio_b) = scaling_predictions(m);
    let mut t = Table::new(&[
        "p",
        "alpha",
        "b0",
        "b_inf",
        "omega",
        "ratio_c",
        "ratio_b",
        "experimental",
    ]);
    t.rows.push(vec![
        m.p.to_string(),
        fmt_num(m.alpha),
        fmt_num(m.b0),
        fmt_num(m.b_inf),
        fmt_num(m.omega),
        fmt_num(ratio_c),
        fmt_num(ratio_b),
        m.experimental.to_string(),
    ]);
    Output {
        csv: t.to_csv(),
        json: envelope(
            "constants",
            m,
            true,
            json!({
                "alpha": m.alpha, "b0": m.b0, "b_inf": m.b_inf, "omega": m.omega,
                "ratio_c": ratio_c, "ratio_b": ratio_b, "experimental": m.experimental,
            }),
        ),
        ok: true,
    }
}

#[derive(Serialize)]
struct SolutionJson {
    n: usize,
    c_n: f64,
    b_n: f64,
    mismatch: f64,
    zeros: usize,
    duplicate: bool,
}

impl From<&ShootingResult> for SolutionJson {
    fn from(r: &ShootingResult) -> Self {
        SolutionJson {
            n: r.n,
            c_n: r.c_n,
            b_n: r.b_n,
            mismatch: r.mismatch,
            zeros: r.zeros,
            duplicate: r.duplicate,
        }
    }
}

fn cmd_solve(cfg: &RunConfig, n: usize) -> Result<Output> {
    let r = cfg.shooter()?.find_solution(n)?;
    let mut t = Table::new(&["n", "c_n", "b_n", "mismatch", "zeros"]);
    t.rows.push(vec![
        r.n.to_string(),
        fmt_num(r.c_n),
        fmt_num(r.b_n),
        fmt_num(r.mismatch),
        r.zeros.to_string(),
    ]);
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "solve",
            &cfg.params,
            true,
            serde_json::to_value(SolutionJson::from(&r)).unwrap_or_default(),
        ),
        ok: true,
    })
}

fn cmd_spectrum(cfg: &RunConfig, n_max: usize) -> Result<Output> {
    let spec = cfg.shooter()?.spectrum(n_max)?;
    let mut t = Table::new(&["n", "c_n", "b_n", "delta_c", "delta_b", "mismatch", "zeros"]);
    let mut rows = Vec::new();
    for r in &spec.rows {
        match &r.solution {
            Ok(s) => {
                t.rows.push(vec![
                    r.n.to_string(),
                    fmt_num(s.c_n),
                    fmt_num(s.b_n),
                    opt_num(r.delta_c),
                    opt_num(r.delta_b),
                    fmt_num(s.mismatch),
                    s.zeros.to_string(),
                ]);
                rows.push(json!({
                    "n": r.n, "found": true, "c_n": s.c_n, "b_n": s.b_n,
                    "delta_c": r.delta_c, "delta_b": r.delta_b,
                    "mismatch": s.mismatch, "zeros": s.zeros, "duplicate": s.duplicate,
                }));
            }
            Err(e) => {
                t.rows.push(vec![
                    r.n.to_string(),
                    "FAILED".into(),
                    "FAILED".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                rows.push(json!({ "n": r.n, "found": false, "error": e.to_string() }));
            }
        }
    }
    t.rows.push(vec![
        "inf".into(),
        "inf".into(),
        fmt_num(cfg.params.b_inf),
        fmt_num(spec.ratio_c),
        fmt_num(spec.ratio_b),
        String::new(),
        String::new(),
    ]);
    let ok = spec.all_found();
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "spectrum",
            &cfg.params,
            ok,
            json!({ "rows": rows, "ratio_c": spec.ratio_c, "ratio_b": spec.ratio_b }),
        ),
        ok,
    })
}

/// Merged trajectory of `u_n`; `n = 0` is the constant solution.
fn profile_trajectory(cfg: &RunConfig, n: usize) -> Result<(f64, f64, Trajectory)> {
    let sh = cfg.shooter()?;
    let (c, b) = if n == 0 {
        (cfg.params.b0, cfg.params.b0)
    } else {
        let r = sh.find_solution(n)?;
        (r.c_n, r.b_n)
    };
    Ok((c, b, sh.merged_trajectory(c, b)?))
}

fn cmd_profile(cfg: &RunConfig, n: usize, samples: usize) -> Result<Output> {
    if samples < 2 {
        return Err(Error::Domain("--samples must be at least 2".into()));
    }
    let m = &cfg.params;
    let (c, b, traj) = profile_trajectory(cfg, n)?;
    let phase = phase_trajectory(&traj, m)?;
    let (lo, hi) = traj.rho_range();
    let mut t = Table::new(&["rho", "u", "du", "w", "Theta", "H", "Q"]);
    let mut pts = Vec::with_capacity(samples);
    for i in 0..samples {
        let rho = if i == 0 {
            lo
        } else if i == samples - 1 {
            hi
        } else {
            (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (samples - 1) as f64).exp()
        };
        let s = traj
            .eval(rho)
            .ok_or_else(|| Error::Diagnostic(format!("profile undefined at rho = {rho}")))?;
        let theta = phase_at(&phase, &traj, m, rho).unwrap_or(f64::NAN);
        let (w, h, q) = (w_of(&s, m), eval_h(&s, m), eval_q(&s, m));
        t.rows.push(vec![
            fmt_num(rho),
            fmt_num(s.u),
            fmt_num(s.du),
            fmt_num(w),
            fmt_num(theta),
            fmt_num(h),
            fmt_num(q),
        ]);
        pts.push(
            json!({ "rho": rho, "u": s.u, "du": s.du, "w": w, "Theta": theta, "H": h, "Q": q }),
        );
    }
    let zeros = w_zeros(&traj, m)?;
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "profile",
            m,
            true,
            json!({ "n": n, "c": c, "b": b, "zeros": zeros, "samples": pts }),
        ),
        ok: true,
    })
}

fn cmd_curves(
    cfg: &RunConfig,
    c_min: f64,
    c_max: f64,
    c_samples: usize,
    b_samples: usize,
) -> Result<Output> {
    if !(c_min > 0.0 && c_max > c_min) || c_samples < 2 || b_samples < 2 {
        return Err(Error::Domain(
            "curves need 0 < c-min < c-max and at least 2 samples per curve".into(),
        ));
    }
    let m = &cfg.params;
    let sh = cfg.shooter()?;
    let cs: Vec<f64> = (0..c_samples)
        .map(|i| (c_min.ln() + (c_max / c_min).ln() * i as f64 / (c_samples - 1) as f64).exp())
        .collect();
    let bs: Vec<f64> = (1..=b_samples)
        .map(|i| m.b0 * i as f64 / b_samples as f64)
        .collect();
    use rayon::prelude::*;
    let c_img: Vec<_> = cs.par_iter().map(|&c| sh.center_image(c)).collect();
    let b_img: Vec<_> = bs.par_iter().map(|&b| sh.lightcone_image(b)).collect();
    let mut t = Table::new(&["side", "param", "u_mid", "du_mid"]);
    let mut pts = Vec::new();
    for (side, params, imgs) in [("C0", &cs, &c_img), ("C1", &bs, &b_img)] {
        for (x, img) in params.iter().zip(imgs.iter()) {
            let (u, du) = match img {
                Ok(i) => (i.u_mid, i.du_mid),
                Err(_) => (f64::NAN, f64::NAN),
            };
            t.rows
                .push(vec![side.into(), fmt_num(*x), fmt_num(u), fmt_num(du)]);
            pts.push(json!({ "side": side, "param": x, "u_mid": u, "du_mid": du }));
        }
    }
    let limit_point = [m.u_singular(cfg.rho_mid)?, m.du_singular(cfg.rho_mid)?];
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "curves",
            m,
            true,
            json!({ "rho_mid": cfg.rho_mid, "limit_point": limit_point, "points": pts }),
        ),
        ok: true,
    })
}

fn cmd_limit(cfg: &RunConfig, x_max: f64) -> Result<Output> {
    let m = &cfg.params;
    let states = integrate_limit_equation(x_max, m, cfg.tol)?;
    let mut t = Table::new(&["tau", "x", "U", "dU", "Ubar", "dUbar", "h"]);
    for s in &states {
        t.rows.push(vec![
            fmt_num(s.tau),
            fmt_num(s.x),
            fmt_num(s.u),
            fmt_num(s.du),
            fmt_num(s.ubar),
            fmt_num(s.dubar),
            fmt_num(limit_lyapunov(s, m)),
        ]);
    }
    let fit = fit_limit_asymptotics(&states, m, cfg.tol);
    let fit_json = match &fit {
        Ok(f) => serde_json::to_value(f).unwrap_or_default(),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let (re, im) = numerical_limit_eigenvalues(m);
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "limit",
            m,
            fit.is_ok(),
            json!({
                "x_max": x_max,
                "fit": fit_json,
                "lyapunov_max_increase": limit_lyapunov_increase(&states, m),
                "eigenvalue": { "re": re, "im": im },
                "samples": states,
            }),
        ),
        ok: fit.is_ok(),
    })
}

fn cmd_extend(cfg: &RunConfig, n: usize, rho_max: f64) -> Result<Output> {
    let m = &cfg.params;
    let b = if n == 0 {
        m.b0
    } else {
        cfg.shooter()?.find_solution(n)?.b_n
    };
    let ext = extend_beyond_lightcone(b, rho_max, m, cfg.tol)?;
    let mut t = Table::new(&["rho", "u", "du", "f"]);
    let mut pts = Vec::new();
    for s in ext.trajectory.samples() {
        let f = f_of(s, m);
        t.rows.push(vec![
            fmt_num(s.rho),
            fmt_num(s.u),
            fmt_num(s.du),
            fmt_num(f),
        ]);
        pts.push(json!({ "rho": s.rho, "u": s.u, "du": s.du, "f": f }));
    }
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "extend",
            m,
            true,
            json!({
                "n": n, "b": b, "f_at_1": ext.f_at_1, "min_f": ext.min_f,
                "min_u": ext.min_u, "max_u": ext.max_u, "samples": pts,
            }),
        ),
        ok: true,
    })
}

/// Result of one invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: String,
}

fn outcome(name: &str, res: Result<(bool, Option<f64>, String)>) -> CheckOutcome {
    match res {
        Ok((passed, value, detail)) => CheckOutcome {
            name: name.into(),
            passed,
            value,
            detail,
        },
        Err(e) => CheckOutcome {
            name: name.into(),
            passed: false,
            value: None,
            detail: e.to_string(),
        },
    }
}

/// Runs every invariant of the model and returns one outcome per check.
pub fn run_checks(cfg: &RunConfig, n_max: usize) -> Vec<CheckOutcome> {
    let m = &cfg.params;
    let tol = cfg.tol;
    let mut out = Vec::new();

    out.push(outcome("constants", {
        let pm1 = m.p as f64 - 1.0;
        let e0 = (m.b0.powf(pm1) / (2.0 * (m.p as f64 + 1.0) / (pm1 * pm1)) - 1.0).abs();
        let e1 = (m.b_inf.powf(pm1) / (2.0 * (m.p as f64 - 3.0) / (pm1 * pm1)) - 1.0).abs();
        Ok((
            e0 < 1e-14 && e1 < 1e-14,
            Some(e0.max(e1)),
            "relative error of b0 and b_inf identities".into(),
        ))
    }));

    out.push(outcome(
        "discriminant",
        discriminant_check(m)
            .map(|v| (v < 0.0, Some(v), "(p-1)^2 Delta at v = 1 - 2 alpha".into())),
    ));

    out.push(outcome(
        "exact_solutions",
        (|| {
            let mut worst: f64 = 0.0;
            let tr = integrate(
                crate::odecore::ProfileState::new(0.1, m.b0, 0.0),
                0.9,
                m,
                tol,
            )?;
            for s in tr.samples() {
                worst = worst.max((s.u / m.b0 - 1.0).abs());
            }
            let start =
                crate::odecore::ProfileState::new(0.9, m.u_singular(0.9)?, m.du_singular(0.9)?);
            let tr = integrate(start, 0.1, m, tol)?;
            for s in tr.samples() {
                worst = worst.max((s.u / m.u_singular(s.rho)? - 1.0).abs());
            }
            Ok((
                worst < 1e-8,
                Some(worst),
                "max relative deviation from u0 and u_inf on [0.1, 0.9]".into(),
            ))
        })(),
    ));

    let spectrum = cfg.shooter().and_then(|sh| sh.spectrum(n_max));
    match &spectrum {
        Err(e) => out.push(outcome("spectrum", Err(e.clone()))),
        Ok(spec) => {
            out.push(outcome(
                "spectrum",
                Ok((
                    spec.all_found(),
                    Some(spec.rows.len() as f64),
                    format!("rows 1..{n_max} found"),
                )),
            ));
            let found: Vec<&ShootingResult> = spec
                .rows
                .iter()
                .filter_map(|r| r.solution.as_ref().ok())
                .collect();
            let labels_ok = found.iter().all(|r| r.zeros == r.n + 1);
            out.push(outcome(
                "nodal_count",
                Ok((
                    labels_ok,
                    None,
                    "zeros = n + 1 by sign and phase count".into(),
                )),
            ));
            let prop1 = found.iter().all(|r| !(r.c_n > m.b0) || r.b_n < m.b0);
            out.push(outcome(
                "center_above_b0",
                Ok((prop1, None, "c_n > b0 implies b_n < b0".into())),
            ));
            let alternates = found
                .windows(2)
                .all(|w| (w[0].b_n - m.b_inf) * (w[1].b_n - m.b_inf) < 0.0);
            out.push(outcome(
                "b_alternation",
                Ok((alternates, None, "b_n - b_inf alternates in sign".into())),
            ));
            let gap = found
                .iter()
                .map(|r| (r.b_n - m.b_inf).abs())
                .fold(f64::INFINITY, f64::min);
            out.push(outcome(
                "b_away_from_b_inf",
                Ok((gap > 1e-6, Some(gap), "min |b_n - b_inf|".into())),
            ));
            let mut worst_mono: f64 = f64::NEG_INFINITY;
            let mut mono_err = None;
            let mut q_ok = true;
            for r in &found {
                match monotonicity_report(&r.trajectory, m) {
                    Ok(rep) => {
                        worst_mono = worst_mono.max(rep.worst_h.max(rep.worst_q).max(rep.worst_hv));
                        q_ok &= rep.q_max <= 1e-12;
                    }
                    Err(e) => mono_err = Some(e),
                }
                if let Err(e) = h_bound(&r.trajectory, m) {
                    mono_err = Some(e);
                }
            }
            out.push(outcome(
                "monotone_functionals",
                match mono_err {
                    Some(e) => Err(e),
                    None => Ok((
                        true,
                        Some(worst_mono * 1e-9),
                        "largest increase of H, Q, H_v in drift units".into(),
                    )),
                },
            ));
            out.push(outcome(
                "q_nonpositive",
                Ok((q_ok, None, "Q <= 0 along every profile".into())),
            ));
            let cs: Vec<(usize, f64)> = found.iter().map(|r| (r.n, r.c_n)).collect();
            if let Some(&(n, step)) = phase_steps(&cs, m).last() {
                out.push(outcome(
                    "phase_step",
                    Ok((
                        (step - 1.0).abs() < 0.05,
                        Some(step),
                        format!("((p-1)/2) omega ln(c_{{n+1}}/c_n)/pi at n = {n}"),
                    )),
                ));
            }
        }
    }

    out.push(outcome(
        "q_first_integral_p5",
        (|| {
            let m5 = ModelParams::extended(5)?;
            let sh = Shooter::new(&m5, 0.9, tol)?;
            let mut worst: f64 = 0.0;
            for i in 0..10 {
                let c = 0.3 + 0.13 * i as f64;
                let tr = sh.center_trajectory(c, 0.9)?;
                let rep = monotonicity_report(&tr, &m5)?;
                worst = worst.max(rep.q_spread);
            }
            Ok((
                worst < 1e-9,
                Some(worst),
                "largest spread of Q over ten center launches at p = 5".into(),
            ))
        })(),
    ));

    out.push(outcome(
        "limit_fit",
        (|| {
            let states = integrate_limit_equation(DEFAULT_X_MAX, m, tol)?;
            let fit = fit_limit_asymptotics(&states, m, tol)?;
            let inc = limit_lyapunov_increase(&states, m);
            let ok = (fit.frequency - m.omega).abs() < 1e-3
                && (fit.decay - m.decay()).abs() < 5e-3
                && inc <= 1e-12;
            let mut d = String::new();
            let _ = write!(
                d,
                "omega_fit = {}, decay = {}, max dh = {:e}",
                fit.frequency, fit.decay, inc
            );
            Ok((ok, Some(fit.frequency), d))
        })(),
    ));

    out.push(outcome(
        "linearized_fit",
        (|| {
            let sol = solve_linearized_lightcone(1e-4, m, tol)?;
            let ok = (sol.fit.frequency - m.omega).abs() < 1e-3 && sol.fit.residual < 1e-3;
            Ok((
                ok,
                Some(sol.fit.frequency),
                format!("A1 = {}, delta1 = {}", sol.fit.amplitude, sol.fit.phase),
            ))
        })(),
    ));

    for c in [5.0, 10.0, 50.0] {
        out.push(outcome(
            &format!("first_crossing_c{c}"),
            first_crossing(c, m, tol).map(|r| {
                (
                    true,
                    Some(r.rho_1),
                    format!(
                        "rho_1 = {} < {}, min w after = {}",
                        r.rho_1, r.bound, r.min_w_after
                    ),
                )
            }),
        ));
    }

    out.push(outcome(
        "extension",
        (|| {
            let b = match &spectrum {
                Ok(spec) if spec.get(1).is_some() => spec.get(1).map(|r| r.b_n).unwrap_or(m.b0),
                _ => cfg.shooter()?.find_solution(1)?.b_n,
            };
            let ext = extend_beyond_lightcone(b, 100.0, m, tol)?;
            Ok((
                true,
                Some(ext.min_f),
                format!("u_1 on [1, 100]: u in [{}, {}]", ext.min_u, ext.max_u),
            ))
        })(),
    ));

    out
}

fn cmd_check(cfg: &RunConfig, n_max: usize) -> Result<Output> {
    if n_max == 0 {
        return Err(Error::Domain("--n-max must be at least 1".into()));
    }
    let checks = run_checks(cfg, n_max);
    let ok = checks.iter().all(|c| c.passed);
    let mut t = Table::new(&["check", "passed", "value", "detail"]);
    for c in &checks {
        t.rows.push(vec![
            c.name.clone(),
            c.passed.to_string(),
            opt_num(c.value),
            format!("\"{}\"", c.detail.replace('"', "'")),
        ]);
    }
    Ok(Output {
        csv: t.to_csv(),
        json: envelope(
            "check",
            &cfg.params,
            ok,
            json!({ "all_passed": ok, "checks": checks }),
        ),
        ok,
    })
}
