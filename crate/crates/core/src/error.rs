use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("tail family `{kind}`: {msg}")]
    TailFamily { kind: String, msg: String },
    #[error("window [{lo}, {hi}] holds {got} values, expected {expected}")]
    WindowLength { lo: i64, hi: i64, got: usize, expected: usize },
    #[error("skew parameter {value} at k={index} outside (0,1)")]
    AlphaDomain { index: i64, value: f64 },
    #[error("effective α undefined: {0}")]
    EffectiveAlphaUndefined(String),
    #[error("value at 0 undefined: {0}")]
    UndefinedAtOrigin(String),
    #[error("degenerate point {0}: zero denominator")]
    DegeneratePoint(String),
    #[error("{0}")]
    Invalid(String),
    #[error("line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("position {0} lies beyond every representable breakpoint index")]
    Unreachable(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("criteria not applicable without S0∧S1 ({0})")]
    NotApplicable(String),
    #[error("not recurrent ({0})")]
    NotRecurrent(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("scale function does not exist as bounded-variation derivative: {0}")]
    NoScaleFunction(String),
    #[error("scale function undetermined: {0}")]
    Inconclusive(String),
    #[error("value {y} outside the range of h ({lo}, {hi})")]
    BoundaryRange { y: f64, lo: f64, hi: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration is not conservative ({0}); pass allow_explosive to simulate with censoring")]
    Explosive(String),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("layered model preconditions fail: {0}")]
    Preconditions(String),
    #[error("unsupported layer data: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}
