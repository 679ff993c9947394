use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("joint does not sum to 1 (sum = {sum})")]
    NonNormalized { sum: f64 },
    #[error("negative entry at class {k}, instance {i}")]
    NegativeEntry { k: usize, i: usize },
    #[error("instance {i} has zero marginal mass")]
    ZeroInstanceMass { i: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class {k} has zero prior")]
    EmptyClass { k: usize },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("zero confidence for class {k} at instance {i}")]
    ZeroConfidence { k: usize, i: usize },
    #[error("K = {k} exceeds the compound-label limit {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("scenario needs K = 2, got K = {k}")]
    NotBinary { k: usize },
    #[error("pair ({i}, {j}) has zero mass")]
    ZeroPairMass { i: usize, j: usize },
    #[error("{parent} -> {child} is not a reduction edge")]
    NotAnEdge { parent: String, child: String },
    #[error("matrix is singular (scaled determinant {det:e})")]
    Singular { det: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("method {method} does not apply to scenario {scenario}")]
    WrongFamily { method: String, scenario: String },
    #[error("block size d = {d} invalid for K = {k}")]
    BadSize { k: usize, d: usize },
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("no closed form for scenario {0}")]
    UnsupportedScenario(String),
    #[error("channel {0} has no samples")]
    EmptyChannel(String),
    #[error("dataset does not match scenario: {0}")]
    SpecMismatch(String),
    #[error("channel {0} has zero mass")]
    ZeroChannelMass(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("loss is not differentiable")]
    NonDifferentiableLoss,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
