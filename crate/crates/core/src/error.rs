use thiserror::Error;

/// Errors raised by the analytic and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scenario or parameter failed validation.
    #[error("invalid {field}{}: {reason}", tier_suffix(*.tier))]
    Invalid {
        field: &'static str,
        tier: Option<usize>,
        reason: String,
    },

    #[error("tier index {index} out of range for {tiers} tiers")]
    TierIndex { index: usize, tiers: usize },

    #[error("no BS available: every tier has zero availability or density")]
    NoBsAvailable,

    #[error("index ({i}, {j}) outside 1..={battery}")]
    StateIndex { i: usize, j: usize, battery: u32 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("rate series truncated at {terms} terms: partial sum {partial_sum}, last term {last_term:e}, tail bound {tail_bound:e}")]
    Truncation {
        terms: usize,
        partial_sum: f64,
        last_term: f64,
        tail_bound: f64,
    },

    #[error("network realization has no BS to associate with")]
    EmptyNetwork,
}

fn tier_suffix(tier: Option<usize>) -> String {
    match tier {
        Some(k) => format!(" (tier index {k})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(field: &'static str, tier: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            tier,
            reason: reason.into(),
        }
    }

    /// Field named by a validation error, if any.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
