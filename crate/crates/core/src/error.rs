use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter set fails one of the admissibility inequalities.
    #[error("inadmissible parameters: {condition} fails ({detail})")]
    Inadmissible { condition: String, detail: String },

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("too few points: need {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("decay certification failed at xi = {xi}: {reason}")]
    CertificationFailed { xi: f64, reason: String },

    #[error("resolution too coarse: need at least {required}, got {got}")]
    ResolutionTooCoarse { required: usize, got: usize },

    /// Reaching the tolerance would need a truncation beyond the memory budget.
    #[error("budget exceeded: tolerance needs T_cut = {required_t_cut}, budget allows {budget}")]
    BudgetExceeded { required_t_cut: u64, budget: u64 },

    #[error("hypothesis {display} violated at s = {s}: {detail}")]
    HypothesisViolated {
        display: String,
        s: i64,
        detail: String,
    },
}
