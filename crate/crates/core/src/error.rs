use thiserror::Error;

/// Errors raised by the simulator.
///
/// The variants group into three families that the command-line tool maps to
/// distinct exit codes: invalid input ([`Error::is_invalid_input`]), numerical
/// failures ([`Error::is_numerical`]) and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "linear size l={l} aliases hopping offsets (max |delta_i| = {max_offset}); \
         need l >= {required} or enable alias summing"
    )]
    Aliasing {
        l: usize,
        max_offset: i64,
        required: usize,
    },

    #[error("energy {energy} lies within {distance:e} of the eigenvalue {eigenvalue} of H0")]
    PoleProximity {
        energy: f64,
        eigenvalue: f64,
        distance: f64,
    },

    #[error("no sign change of the eigenvalue condition on ({lo}, {hi})")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("no Dirac point: smallest |E_i(k) - E0| found is {min_gap:e}")]
    NoDiracPoint { min_gap: f64 },

    #[error("band touching at k = {k:?} is not linear (slope estimate {slope:e} < {threshold})")]
    QuadraticTouching {
        k: Vec<f64>,
        slope: f64,
        threshold: f64,
    },

    #[error("Dirac point {k:?} is not a momentum of the l = {l} grid")]
    OffGrid { k: Vec<f64>, l: usize },

    #[error("extrapolation did not converge: uncertainty {uncertainty:e} above {threshold:e}")]
    NonConvergent { uncertainty: f64, threshold: f64 },

    #[error("propagator failure: norm drift {drift:e} at t = {time}")]
    NormDrift { time: f64, drift: f64 },

    #[error("starting-state enumeration needs {count} states, above the cap of {cap}")]
    EnumerationCap { count: usize, cap: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidConfig(_)
                | Error::Aliasing { .. }
                | Error::OffGrid { .. }
                | Error::EnumerationCap { .. }
                | Error::Unsupported(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PoleProximity { .. }
                | Error::NoSignChange { .. }
                | Error::NoDiracPoint { .. }
                | Error::QuadraticTouching { .. }
                | Error::NonConvergent { .. }
                | Error::NormDrift { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
