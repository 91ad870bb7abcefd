use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("target level (n = {n}, n_r = {n_r}) with sideband orders ({k}, {k_r}) falls outside the truncation ({n_cm_max}, {n_rel_max})")]
    OutsideTruncation { n: usize, n_r: usize, k: usize, k_r: usize, n_cm_max: usize, n_rel_max: usize },

    #[error("vanishing coupling for target (n = {n}, n_r = {n_r}): {reason}")]
    VanishingCoupling { n: usize, n_r: usize, reason: String },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step limit of {max_steps} reached at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("truncation tail {tail:e} exceeds {limit:e}; raise n_cm_max above {n_cm_max}")]
    TruncationTail { tail: f64, limit: f64, n_cm_max: usize },

    #[error("no sign change of the residual on [{lo}, {hi}] (values {f_lo}, {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root refinement did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam { field, reason: reason.into() }
}
