use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A finite table refers to an id outside its declared range, or has the
    /// wrong shape. Distinct from an axiom violation.
    #[error("malformed groupoid table: {0}")]
    Structural(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("theta is not well defined on cosets: {0}")]
    ThetaNotWellDefined(String),

    #[error("flow left the chart box at t = {time} (last valid state {last:?})")]
    FlowEscapedBox { last: Vec<f64>, time: f64 },

    #[error("non-finite value encountered: {0}")]
    NumericalBlowup(String),

    #[error("rank drift: expected {expected}, found {found} at {at:?}")]
    RankDrift { expected: usize, found: usize, at: Vec<f64> },

    #[error("span deficiency: rank {rank} < {needed}")]
    SpanDeficiency { rank: usize, needed: usize },

    #[error("lift failed with residual {residual:e} at {at:?}")]
    LiftFailed { residual: f64, at: Vec<f64> },

    #[error("transport failed with residual {residual:e}")]
    TransportFailed { residual: f64 },

    #[error("coset condition g·[s(g)] = [g] ∩ t⁻¹(t(g)) violated with residual {residual:e} at {witness:?}")]
    Condition6Violated { residual: f64, witness: Vec<f64> },

    #[error("quotient map not well defined: representative drift {residual:e}")]
    WellDefinednessViolated { residual: f64 },

    #[error("arrows not composable: |s(g) - t(h)| = {0:e}")]
    NotComposable(f64),

    #[error("tangent vectors not composable: |Ts v_g - Tt v_h| = {0:e}")]
    TangentNotComposable(f64),

    #[error("covectors not composable: |s^(a_g) - t^(a_h)| = {0:e}")]
    CovectorNotComposable(f64),

    #[error("points are not on the same leaf (label gap {0:e})")]
    NotSameLeaf(f64),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
