use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node count mismatch: header says {expected}, found {found}")]
    NodeCountMismatch { expected: usize, found: usize },
    #[error("element count mismatch: header says {expected}, found {found}")]
    ElementCountMismatch { expected: usize, found: usize },
    #[error("element {element} references undefined node {node}")]
    UndefinedNode { element: usize, node: usize },
    #[error("no elements of a supported kind (TRI3/TET4)")]
    NoElements,
    #[error("degenerate element (|detJ| = {det:e})")]
    DegenerateElement { det: f64 },
    #[error("local coordinates {0:?} lie outside the reference simplex")]
    OutsideReference(Vec<f64>),
    #[error("row {line}: expected {expected} columns, found {found} (column count)")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("no data rows")]
    Empty,
    #[error("field `{name}` has {found} entries, mesh has {expected} nodes")]
    FieldLength { name: String, expected: usize, found: usize },
    #[error("boundary facet {0:?} does not match exactly one element face")]
    BadFacet(Vec<usize>),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("conjugate gradient did not converge in {iterations} iterations (system not PD or ill-conditioned)")]
    NotConverged { iterations: usize },
    #[error("singular dense system")]
    SingularDense,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
