use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("basis set: {0}")]
    Basis(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("overlap matrix is nearly linearly dependent (condition number {0:.3e})")]
    LinearDependence(f64),

    #[error(
        "RHF did not converge in {iterations} iterations \
         (last energy {energy:.10} Eh, commutator norm {commutator:.3e})"
    )]
    RhfNotConverged {
        iterations: usize,
        energy: f64,
        commutator: f64,
    },

    #[error("active space: {0}")]
    ActiveSpace(String),

    #[error("non-hermitian operator: imaginary expectation {0:.3e}")]
    NonHermitian(f64),

    #[error("1D-RISM did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolventNotConverged { iterations: usize, residual: f64 },

    #[error("3D-RISM {reason}: residual {residual:.3e} after {iterations} iterations")]
    RismFailed {
        reason: String,
        iterations: usize,
        residual: f64,
    },

    #[error("susceptibility table: {0}")]
    Susceptibility(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("SCF cycle {cycle}: {source}")]
    Cycle {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "solvation macro-loop failed to converge after {cycles} cycles \
         (|dA| = {delta_a:.3e}, density rms = {density_rms:.3e}, RISM residual = {rism_residual:.3e})"
    )]
    MacroLoop {
        cycles: usize,
        delta_a: f64,
        density_rms: f64,
        rism_residual: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Basis(_)
            | Error::Geometry(_)
            | Error::ActiveSpace(_)
            | Error::Susceptibility(_)
            | Error::Io { .. }
            | Error::Parse(_) => true,
            Error::Cycle { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
