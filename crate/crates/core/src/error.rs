use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("{name} = {value} must be a power of two and at least 8")]
    Horizontal { name: &'static str, value: usize },
    #[error("N3 = {value} must be at least 9")]
    Vertical { value: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error(
        "ALE map degenerate: J = {j:.6e} <= c_min = {c_min} at node (i1={i1}, i2={i2}, l={l}); \
         ∂₃ψ must stay bounded below"
    )]
    Degenerate {
        j: f64,
        c_min: f64,
        i1: usize,
        i2: usize,
        l: usize,
    },
    #[error("smallness violated: {quantity} = {value:.6e} exceeds epsilon = {epsilon}; reduce dt or stop")]
    Smallness {
        quantity: &'static str,
        value: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlateError {
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("plate forcing has surface mean {mean:.3e}; normalise the pressure trace to zero mean first")]
    NonZeroMeanForcing { mean: f64 },
    #[error("invalid plate parameter: {0}")]
    InvalidParams(String),
    #[error("membrane midpoint iteration did not settle after {iterations} sweeps (update {update:.3e})")]
    Midpoint { iterations: usize, update: f64 },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PressureError {
    #[error(
        "coefficient perturbation |d - I|_inf = {deviation:.4} exceeds the iteration radius {radius}; \
         the Robin-Neumann fixed point needs d close to the identity"
    )]
    Smallness { deviation: f64, radius: f64 },
    #[error(
        "pressure iteration did not converge in {iterations} steps \
         (last relative update {update:.3e}, contraction ratio ~{ratio:.3})"
    )]
    NoConvergence { iterations: usize, update: f64, ratio: f64 },
    #[error("non-finite pressure data")]
    NonFinite,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FluidError {
    #[error("CFL number {number:.3} exceeds cfl_max = {limit}; try dt <= {suggested_dt:.3e}")]
    Cfl { number: f64, limit: f64, suggested_dt: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error("non-finite velocity after step")]
    NonFinite,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CouplingError {
    #[error("initial data incompatible: {0}")]
    Compatibility(String),
    #[error(
        "Picard iteration did not contract within {iterations} iterations \
         (last difference {difference:.3e}, measured ratio {ratio:.3})"
    )]
    NonContraction {
        iterations: usize,
        difference: f64,
        ratio: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error(transparent)]
    Plate(#[from] PlateError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in [{section}]{}", suggestion_text(.suggestion))]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
        suggestion: Option<String>,
    },
    #[error("line {line}: invalid value for `{field}`: {message}")]
    Invalid {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn suggestion_text(s: &Option<String>) -> String {
    match s {
        Some(s) => format!("; did you mean {s}?"),
        None => String::new(),
    }
}

/// Top-level error used by the runner and the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("{0} selftest check(s) failed")]
    Selftest(usize),
}

impl Error {
    /// Process exit status for each failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Snapshot(_) => 2,
            Error::Coupling(CouplingError::Compatibility(_)) => 3,
            Error::Coupling(_) | Error::Io(_) | Error::Selftest(_) => 4,
        }
    }
}

impl From<GeometryError> for Error {
    fn from(e: GeometryError) -> Self {
        Error::Coupling(e.into())
    }
}
