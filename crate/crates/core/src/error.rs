use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (bad JSON, unknown key, inconsistent values).
    #[error("config error: {0}")]
    Config(String),

    /// A trajectory does not span the interval a delay evaluation needs.
    #[error("history coverage error: need [{need_lo}, {need_hi}], have [{have_lo}, {have_hi}]")]
    Coverage {
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    /// The integrator state became non-finite.
    #[error("integration failed: non-finite state at t = {t}")]
    NonFinite { t: f64 },

    /// The crossing scan found no root of g(omega) = delta.
    #[error("no crossing of g(omega) = delta up to omega = {omega_max} (g in [{g_min}, {g_max}])")]
    NoCrossing {
        omega_max: f64,
        g_min: f64,
        g_max: f64,
    },

    /// The critical sensitivity could not be bracketed on (1, 10].
    #[error("no sensitivity n in (1, 10] reproduces the critical feedback gain {beta_star_c}")]
    NoInversion { beta_star_c: f64 },

    /// Fewer than three qualifying maxima were found.
    #[error("trajectory is not oscillating: {found} qualifying maxima (need >= 3)")]
    NotOscillating { found: usize },

    /// A required precondition did not hold at call time.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
