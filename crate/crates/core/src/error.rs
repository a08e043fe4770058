use thiserror::Error;

/// Errors produced by the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The ODE right-hand side was requested at one of its singular points.
    #[error(
        "rho = {rho} is a singular point of the profile equation; use a series launch or a chart"
    )]
    SingularPoint { rho: f64 },

    /// A series expansion was evaluated beyond its validated radius.
    #[error("series evaluated at offset {offset:e}, beyond the validated radius {radius:e}")]
    Range { offset: f64, radius: f64 },

    /// The integrator stopped before the requested endpoint.
    #[error("integration stopped at rho = {rho}: {reason}")]
    Integration { rho: f64, reason: String },

    /// No intersection of the shooting curves was bracketed.
    #[error("no solution found for nodal index {n}: {}", trace.join("; "))]
    SearchFailure { n: usize, trace: Vec<String> },

    /// Two independent computations of the same quantity disagree.
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    /// A fit was requested on data covering too few oscillation periods.
    #[error("insufficient data: {periods:.2} periods in the fit window, need {required}")]
    InsufficientData { periods: f64, required: f64 },

    /// (w, rho w') vanished, so the phase angle is undefined.
    #[error("phase undefined at rho = {rho}: R = {r:e}")]
    Degenerate { rho: f64, r: f64 },

    /// A functional that must be non-increasing increased beyond the drift allowance.
    #[error("{functional} increased by {increase:e} on [{rho_a}, {rho_b}]")]
    Monotonicity {
        functional: String,
        rho_a: f64,
        rho_b: f64,
        increase: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
