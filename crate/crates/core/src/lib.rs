//! Preference-elicitation analytics: AHP prioritization, ANOVA,
//! effects-coded regression, conjoint choice simulation and hierarchical
//! factor analysis.

pub mod ahp;
pub mod conjoint;
pub mod factor;
pub mod fixtures;
pub mod formats;
pub mod linear;
pub mod numerics;
pub mod study;

pub use ahp::{
    ev_priorities, filter_by_cr, llsm_priorities, AhpError, ConsistencyReport, Favored, Judgment, PairwiseMatrix,
    PriorityVector, SaatyGrade,
};
pub use conjoint::{
    aggregate, fit_subject, predict_utilities, simulate_btl, simulate_fcm, simulate_lpm, AggregateConjoint,
    ChoiceModel, ChoiceShares, ConjointError, ConjointFit, SimulationOptions,
};
pub use factor::{
    ml_extract, oblique_rotate, schmid_leiman, varimax, FactorError, FactorSolution, HierarchicalSolution,
    MlOptions, ObliqueOptions, ObliqueSolution,
};
pub use formats::{fmt6, Diagnostic, FormatError, JudgmentRow, StudyFile};
pub use linear::{EffectsCoding, ModelError};
pub use numerics::{Matrix, NumericsError, OlsFit, SymMatrix};
pub use study::{ProfileSummary, StudyDesign, StudyError, SubjectRecord};
