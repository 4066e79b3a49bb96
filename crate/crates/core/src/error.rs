use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: need a < b, got ({a}, {b})")]
    BadDomain { a: f64, b: f64 },
    #[error("shrink parameter {eta} must lie in [0, {max})")]
    EtaTooLarge { eta: f64, max: f64 },
    #[error("shrink parameter {eta} is not a multiple of the grid spacing {h}")]
    EtaOffGrid { eta: f64, h: f64 },
    #[error("resolution n = {n} is too small (need n >= {min})")]
    BadResolution { n: usize, min: usize },
    #[error("order s = {s} must lie in (0, 1)")]
    BadOrder { s: f64 },
    #[error("grid functions live on different grids")]
    GridMismatch,
    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e}) within {panels} panels")]
    QuadratureNoConverge { tol: f64, err: f64, panels: usize },
    #[error("eigen-solver did not converge after {iters} iterations (last change {change:e})")]
    NoConvergence { iters: usize, change: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("no grid node lies in the collar of width {collar}")]
    EmptyCollar { collar: f64 },
    #[error("integral of phi^(-1/(p-1)) diverges: p = {p} <= s + 1 = {limit}")]
    DivergentIntegral { p: f64, limit: f64 },
    #[error("iterated and direct regularizations differ by {gap:e} (tolerance {tol:e})")]
    SemigroupViolation { gap: f64, tol: f64 },
    #[error("regularization parameters invalid: {0}")]
    BadRegParams(String),
    #[error("time grid invalid: {0}")]
    BadTimes(String),
    #[error("exponent configuration invalid: {0}")]
    BadExponents(String),
    #[error("empirical distance-power constant c1 = {c1:e} is not positive (worst sample d = {at:e})")]
    NonPositiveC1 { c1: f64, at: f64 },
    #[error("collar shrank to {delta:e} without satisfying the barrier inequality")]
    CollarCollapse { delta: f64 },
    #[error("supersolution inequality violated: slack {slack:e} at x = {x:e}")]
    SupersolutionViolated { slack: f64, x: f64 },
    #[error("time step collapsed to {dt:e} at t = {t}")]
    StepCollapse { dt: f64, t: f64 },
    #[error("a-priori bound violated at t = {t}: value {value} outside [0, {bound}]")]
    BoundViolated { t: f64, value: f64, bound: f64 },
    #[error("not enough monitor records: have {have}, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
