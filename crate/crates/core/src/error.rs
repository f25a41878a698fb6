use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("path needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint {0} coincides with its predecessor")]
    CoincidentWaypoints(usize),
    #[error("waypoint {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("arc length {s} outside [0, {length}]")]
    OutOfRange { s: f64, length: f64 },
    #[error("footprint must have positive finite extents, got {length} x {width}")]
    InvalidFootprint { length: f64, width: f64 },
    #[error("paths overlap in more than one disjoint region")]
    MultipleComponents,
    #[error("waypoint csv: {0}")]
    Csv(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid game spec: {0}")]
    InvalidSpec(String),
    #[error("big-M {given} too small, needs more than {required}")]
    BigMTooSmall { given: f64, required: f64 },
    #[error("pair ({0}, {1}) appears more than once")]
    DuplicatePair(usize, usize),
    #[error("homotopy assignment has {got} entries, expected {expected}")]
    AssignmentLength { got: usize, expected: usize },
    #[error("refined encoding {0}")]
    RefinedUnsupported(String),
    #[error("vector length {got} does not match {expected} columns")]
    LengthMismatch { got: usize, expected: usize },
    #[error("binary column {column} has non-integral value {value}")]
    NonIntegral { column: usize, value: f64 },
    #[error("miqp dump: {0}")]
    Dump(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("quadratic cost matrix is not positive semidefinite")]
    IndefiniteQ,
    #[error("qp iteration limit reached")]
    IterationLimit,
    #[error("problem is infeasible")]
    Infeasible,
    #[error("unbounded relaxation")]
    Unbounded,
    #[error("node or time limit reached with gap {gap} (incumbent {incumbent:?})")]
    Limit { gap: f64, incumbent: Option<f64> },
    #[error("{count} binaries exceed the enumeration cap {cap}")]
    TooManyBinaries { count: usize, cap: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomotopyError {
    #[error("{pairs} conflict pairs exceed the enumeration cap {cap}")]
    TooManyPairs { pairs: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("geometry for conflict {pair}: {source}")]
    Geometry { pair: String, source: GeometryError },
}

impl ScenarioError {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Io { .. } | ScenarioError::Parse(_) => 2,
            ScenarioError::Invalid { .. } => 3,
            ScenarioError::Geometry { .. } => 4,
        }
    }
}

impl From<ModelError> for ScenarioError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidSpec(m) => match m.split_once(": ") {
                Some((path, msg)) => ScenarioError::Invalid { path: path.into(), msg: msg.into() },
                None => ScenarioError::Invalid { path: String::new(), msg: m },
            },
            ModelError::DuplicatePair(a, b) => ScenarioError::Invalid {
                path: "conflicts".into(),
                msg: format!("pair ({a}, {b}) appears more than once"),
            },
            ModelError::BigMTooSmall { .. } => ScenarioError::Invalid { path: "big_m".into(), msg: e.to_string() },
            ModelError::AssignmentLength { .. } => ScenarioError::Invalid { path: "mode".into(), msg: e.to_string() },
            ModelError::RefinedUnsupported(_) => ScenarioError::Invalid { path: "encoding".into(), msg: e.to_string() },
            other => ScenarioError::Invalid { path: String::new(), msg: other.to_string() },
        }
    }
}
