//! ANOVA, LSD post-hoc comparisons and effects-coded regression.

mod anova;
mod regression;

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::study::StudyError;

pub use anova::{
    factor_ss_from_cell_means, lsd_posthoc, one_way_anova, two_way_anova, AnovaRow, AnovaTable,
    CellData, PosthocMatrix, PosthocPair,
};
pub use regression::{
    effects_design, effects_regression, effects_regression_on, EffectsCoding, EffectsRegression,
    FactorCoding,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("at least two groups are required, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("cell {cell:?} has {found} replicates, expected {expected} (unbalanced layouts are unsupported)")]
    Unbalanced {
        cell: (usize, usize),
        expected: usize,
        found: usize,
    },
    #[error("no degrees of freedom left for the error term")]
    NoErrorDf,
    #[error("replicate count must be at least one")]
    NoReplicates,
    #[error("mean square error must be positive, got {0}")]
    InvalidMse(f64),
    #[error("unknown factor '{0}'")]
    UnknownFactor(String),
    #[error("factor index {0} out of range")]
    UnknownFactorIndex(usize),
    #[error("coding for factor '{factor}' has no code for level '{level}'")]
    CodingMissingLevel { factor: String, level: String },
    #[error("invalid effects coding: {0}")]
    InvalidCoding(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
