//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An autospectrum used as a denominator was at or below the positivity
    /// floor at the named frequency.
    #[error("degenerate spectrum: autospectrum ≤ {floor:e} at λ = {lambda:.6}")]
    DegenerateSpectrum { lambda: f64, floor: f64 },

    /// The per-frequency coefficient system had a determinant below the
    /// scaled singularity floor.
    #[error("singular system at λ = {lambda:.6} (inputs: {labels}): |det| = {det_mag:e} < floor {floor:e}")]
    SingularSystem {
        lambda: f64,
        labels: String,
        det_mag: f64,
        floor: f64,
    },

    /// The denominator of the projection coefficient vanished.
    #[error("degenerate component at λ = {lambda:.6}: |denominator| = {mag:e} below 1e-12")]
    DegenerateComponent { lambda: f64, mag: f64 },

    /// A quantity that must be (nearly) real-nonnegative came out with a
    /// large imaginary residue or a large negative real part.
    #[error("inconsistent system at λ = {lambda:.6}: {detail}")]
    InconsistentSystem { lambda: f64, detail: String },

    /// The regression design matrix is (numerically) rank deficient.
    #[error("collinear design: columns [{}] are linearly dependent on earlier columns", .columns.join(", "))]
    CollinearDesign { columns: Vec<String> },

    /// A CSV or date field failed to parse.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// Dated series share no common non-missing dates.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Network access was requested while the offline flag is set.
    #[error("offline mode: refusing to fetch '{0}'; supply a local CSV instead")]
    Offline(String),

    /// An HTTP request failed or returned a non-success status.
    #[error("http error fetching '{id}': {detail}")]
    Http { id: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
