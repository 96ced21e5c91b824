use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} is out of range: {bound}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("non-finite coefficient value at y = {y}")]
    NonFinite { y: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("aggregator requires v <= 0, got {0}")]
    PositiveUtility(f64),
    #[error("aggregator requires c >= 0, got {0}")]
    NegativeConsumption(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("grid needs at least 8 interior nodes per axis, got nw = {nw}, ny = {ny}")]
    GridTooSmall { nw: usize, ny: usize },
    #[error(transparent)]
    Domain(#[from] ModelError),
    #[error("invalid solver option: {0}")]
    InvalidOption(&'static str),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("solution reached |u| = {max_abs} beyond truncation level c_bar = {c_bar}")]
    CBarExceeded { c_bar: f64, max_abs: f64 },
    #[error("singular Jacobian at row {0}")]
    Singular(usize),
    #[error("point ({w}, {y}) lies outside the domain")]
    OutsideDomain { w: f64, y: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassageError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("series not converged within {n_terms} terms (tail estimate {tail:e})")]
    SeriesNotConverged { n_terms: usize, tail: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Hölder exponent q must exceed 1, got {0}")]
    InvalidQ(f64),
    #[error("PDE bounds come from an unconverged solve")]
    UnconvergedPde,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("point ({w}, {y}) lies outside the domain")]
    OutsideDomain { w: f64, y: f64 },
    #[error("the fixed-horizon baseline is only defined for the Heston coefficient set")]
    NotHeston,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("start point ({w}, {y}) must lie strictly inside the domain")]
    NotInterior { w: f64, y: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error(transparent)]
    Passage(#[from] PassageError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
