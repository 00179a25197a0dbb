//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by validation and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TauError {
    /// Fewer than two cases; every estimator here is pairwise.
    #[error("case set must contain at least 2 cases, got {0}")]
    EmptyOrSingleton(usize),

    /// A coordinate or onset time was NaN or infinite.
    #[error("case {id}: field {field} is not finite")]
    NonFiniteField { id: String, field: &'static str },

    /// Two cases share an identifier.
    #[error("duplicate case id {0:?}")]
    DuplicateId(String),

    /// A distance band violated 0 <= d_low < d_high.
    #[error("invalid distance band [{d_low}, {d_high})")]
    InvalidBand { d_low: f64, d_high: f64 },

    /// Band midpoints must strictly increase for interpolation.
    #[error("band midpoints not strictly increasing at index {0}")]
    NonMonotoneMidpoints(usize),

    /// Relatedness window with t_lower > t_upper.
    #[error("relatedness window has t_lower {t_lower} > t_upper {t_upper}")]
    InvalidRelatednessWindow { t_lower: f64, t_upper: f64 },

    /// The all-distance odds theta(0, inf) is zero or undefined, which means
    /// the relatedness rule relates none (or all) of the pairs.
    #[error("degenerate background odds: {related} related / {unrelated} unrelated pairs overall")]
    DegenerateBackgroundOdds { related: u64, unrelated: u64 },

    /// Interpolation requested outside the defined midpoint range.
    #[error("distance {d} outside interpolable midpoint range [{min}, {max}]")]
    OutOfRange { d: f64, min: f64, max: f64 },

    /// Strict interpolation hit a band whose tau value is flagged-undefined.
    #[error("band {0} flanking the query distance has an undefined tau value")]
    UndefinedNeighbor(usize),

    /// Envelope input curves evaluated over different band sets.
    #[error("curves evaluated over mismatched band sets ({expected} vs {got} bands)")]
    MismatchedBandSets { expected: usize, got: usize },

    /// Too few simulations for the requested significance level.
    #[error(
        "{n_curves} curves cannot support a level-{alpha} envelope (need at least {needed}); \
         the reference analysis uses 2500 permutations"
    )]
    InsufficientSims {
        n_curves: usize,
        alpha: f64,
        needed: usize,
    },

    /// Every band was dropped by listwise deletion of undefined values.
    #[error("no band has defined values across all curves")]
    NoUsableBands,

    /// A central envelope needs at least two defined replicate values per band.
    #[error("band {band} has only {got} defined replicate values (need >= 2)")]
    TooFewReplicates { band: usize, got: usize },

    /// No bootstrap replicate produced a qualifying crossing.
    #[error("no bootstrap replicate crossed tau = 1 from above")]
    NoCrossings,

    /// Percentile CI needs at least two values.
    #[error("need at least {needed} values for this interval, got {got}")]
    TooFewValues { needed: usize, got: usize },

    /// The observed curve never enters tau < 1 from at/above 1, or the
    /// envelope test found no below-region.
    #[error("no inhibition signal: {0}")]
    NoInhibition(&'static str),

    /// Curve has fewer than two defined values, so crossings are ill-posed.
    #[error("curve has {0} defined values; need at least 2")]
    TooFewDefinedValues(usize),
}
