use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function returned a non-finite value at x = {x}")]
    NonFiniteSample { x: f64 },

    #[error("sample lattice has {got} points, degree {degree} needs {expected}")]
    GridMismatch {
        degree: usize,
        expected: usize,
        got: usize,
    },

    #[error("parameter pair ({a:?}, {b:?}) has equal z and w images")]
    ZeroGap { a: (f64, f64), b: (f64, f64) },

    #[error("unknown knot `{0}`")]
    UnknownKnot(String),

    #[error("invalid knot definition: {0}")]
    InvalidKnot(String),

    #[error("height cannot be lifted: {0}")]
    UnliftableHeight(String),

    #[error("non-transverse double point near (s, t) = ({s}, {t})")]
    NonGeneric { s: f64, t: f64 },

    #[error("rotation axis is not a unit vector (norm {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("crossing interval [{lo}, {hi}] leaves no room inside the axis span [{t1}, {t2}]")]
    NoRoom { lo: f64, hi: f64, t1: f64, t2: f64 },

    #[error("rotated arc reaches height {height} at t = {t}, phi = {phi}")]
    PlaneCrossing { t: f64, phi: f64, height: f64 },

    #[error("bad projection axes: {0}")]
    BadAxes(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
