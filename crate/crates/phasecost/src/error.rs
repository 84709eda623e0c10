use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A value failed structural validation (monotonicity, concavity, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure did not converge or produced unusable output.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The mass lies in the initial linear region of the transport cost,
    /// where the constrained problem has no minimizer. The payload describes
    /// the linear region `[0, w_end)` and its slope.
    #[error("no minimizer: tau is linear with slope {slope} on [0, {w_end})")]
    NoMinimizer { slope: f64, w_end: f64 },
    /// The requested inversion route does not apply to this cost form.
    #[error("unsupported form: {0}")]
    UnsupportedForm(String),
}

pub type Result<T> = std::result::Result<T, Error>;
