use thiserror::Error;

/// Errors raised by the matching core, the solver, and the modeling layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point index {0} is used more than once")]
    DuplicatePoint(usize),

    #[error("tensor degree {degree} is outside 1..={n_vertices}")]
    DegreeOutOfRange { degree: usize, n_vertices: usize },

    #[error("branch size {k} does not divide the vertex count {n_vertices}")]
    KNotDivisor { k: usize, n_vertices: usize },

    #[error("prefix has {actual} committed points, expected {expected} for branch {branch}")]
    BranchOrderViolation {
        branch: usize,
        expected: usize,
        actual: usize,
    },

    #[error("cannot match {n_vertices} vertices into only {n_points} points")]
    InfeasibleSize { n_vertices: usize, n_points: usize },

    #[error("seed conflict: {0}")]
    SeedConflict(String),

    #[error("seeds must fix whole leading branches: {0}")]
    SeedNotPrefix(String),

    #[error("instance has {count} candidate mappings, above the enumeration limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("template does not match the model: {0}")]
    TemplateMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("time bin has {count} samples, need at least {required}")]
    EmptyBin { count: usize, required: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("hatch time {hatch} must be later than first twitch {first_twitch}")]
    InvalidTimeline { first_twitch: f64, hatch: f64 },

    #[error("cost {value} is negative or not finite")]
    InvalidCost { value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("template file: {0}")]
    TemplateFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
