use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular design")]
    SingularDesign,

    #[error("degenerate leverage at observation {index}")]
    DegenerateLeverage { index: usize },

    #[error("degenerate weighting at iteration {iteration}")]
    DegenerateWeighting { iteration: usize },

    #[error("at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("scale denominator nonpositive ({flagged} flagged of {n})")]
    ScaleDenominator { flagged: usize, n: usize },

    #[error("scale collapsed to zero; the concomitant objective is unbounded below (needs lambda > 2c)")]
    ScaleCollapsed,

    #[error("variance fit failed")]
    VarianceFitFailed,

    #[error("too many failures: {failed} of {total} {what}")]
    TooManyFailures {
        what: &'static str,
        failed: usize,
        total: usize,
    },
}

impl Error {
    /// Short stable identifier for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::SingularDesign => "singular_design",
            Error::DegenerateLeverage { .. } => "degenerate_leverage",
            Error::DegenerateWeighting { .. } => "degenerate_weighting",
            Error::AtLambda { source, .. } => source.code(),
            Error::ScaleDenominator { .. } => "scale_denominator_nonpositive",
            Error::ScaleCollapsed => "scale_collapsed",
            Error::VarianceFitFailed => "variance_fit_failed",
            Error::TooManyFailures { .. } => "too_many_failures",
        }
    }

    pub(crate) fn at_lambda(self, lambda: f64) -> Error {
        match self {
            e @ Error::AtLambda { .. } => e,
            e => Error::AtLambda {
                lambda,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
