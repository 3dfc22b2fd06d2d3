use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("grid2d topology needs a perfect-square vertex count, got {0}")]
    NotSquare(usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("the subgraph of positive-weight edges is disconnected")]
    Disconnected,

    #[error("no connected Erdős–Rényi sample after {0} attempts")]
    SamplingExhausted(usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("incidence matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("rate theta = {0} is outside (0, 1]")]
    InvalidRate(f64),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Newton solve did not converge in {iterations} iterations (gradient norm {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("schedule violation: node {node} is at iteration {last}, asked to update at {requested}")]
    ScheduleViolation {
        node: usize,
        last: usize,
        requested: usize,
    },

    #[error("edge index {index} out of range for a graph with {edges} edges")]
    EdgeOutOfRange { index: usize, edges: usize },

    #[error("non-finite iterate at iteration {iteration} ({what})")]
    NonFinite { iteration: usize, what: &'static str },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("seed {seed}, algorithm {algorithm}: {source}")]
    Experiment {
        seed: u64,
        algorithm: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
