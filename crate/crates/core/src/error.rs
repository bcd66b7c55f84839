use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("degenerate track: {0}")]
    DegenerateTrack(String),

    #[error("non-positive half-width at point {index}")]
    NonPositiveWidth { index: usize },

    #[error("racing line has no waypoints")]
    EmptyLine,

    #[error("resampling spacing must be positive, got {0}")]
    ZeroSpacing(f64),

    #[error("coincident neighbours around point {index}, tangent undefined")]
    DegenerateTangent { index: usize },

    #[error("normals still intersect at maximum tilt ({pairs} intersecting pairs)")]
    Unresolvable { pairs: usize },

    #[error("waypoint fraction {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error("line does not cross normal {index}")]
    NoIntersection { index: usize },

    #[error("line crosses normal {index} {count} times")]
    MultipleIntersections { index: usize, count: usize },

    #[error("track boundaries cross or touch")]
    BoundariesCross,

    #[error("track has {normals} normals, a window needs at least {needed}")]
    TooShort { normals: usize, needed: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("need at least 3 families to split, got {0}")]
    TooFewFamilies(usize),

    #[error("invalid fold count k={k} for {items} items")]
    BadK { k: usize, items: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("model version mismatch: {0}")]
    VersionMismatch(String),

    #[error("model incompatible with request: {0}")]
    IncompatibleModel(String),

    #[error("vehicle width {width} m does not fit normal of length {length} m")]
    WidthTooLarge { width: f64, length: f64 },

    #[error("empty error series")]
    Empty,

    #[error("no apexes found above curvature threshold")]
    NoApexes,

    #[error("reference targets missing: {0}")]
    MissingTargets(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
