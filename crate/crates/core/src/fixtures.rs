//! Golden inputs built from published summary tables, embedded so that
//! tests, benches and the CLI share one copy.

use crate::conjoint::ConjointFit;
use crate::formats::{read_fit_stats, read_labeled_matrix, read_part_worths, read_summary, FormatError, StudyFile};
use crate::numerics::SymMatrix;
use crate::study::{ProfileSummary, StudyDesign};

pub const CONJOINT_STUDY: &str = include_str!("../fixtures/conjoint/study.json");
pub const CONJOINT_PART_WORTHS: &str = include_str!("../fixtures/conjoint/part_worths.csv");
pub const CONJOINT_FIT_STATS: &str = include_str!("../fixtures/conjoint/fit_stats.csv");
pub const CONJOINT_COVARIANCE: &str = include_str!("../fixtures/conjoint/covariance.csv");
pub const DESCRIPTIVES_STUDY: &str = include_str!("../fixtures/descriptives/study.json");
pub const DESCRIPTIVES_SUMMARY: &str = include_str!("../fixtures/descriptives/descriptives.csv");

/// Number of subjects retained after CR filtering in the published cohort.
pub const PUBLISHED_SUBJECTS: usize = 20;

pub fn signage_design() -> StudyDesign {
    StudyFile::parse(CONJOINT_STUDY)
        .and_then(|s| s.design())
        .expect("embedded study is valid")
}

/// Per-subject part-worths with their published R², F and p.
pub fn published_part_worths() -> Result<Vec<ConjointFit>, FormatError> {
    let design = signage_design();
    let mut fits = read_part_worths(CONJOINT_PART_WORTHS, &design)?;
    read_fit_stats(CONJOINT_FIT_STATS, &mut fits)?;
    Ok(fits)
}

pub fn published_covariance() -> Result<(Vec<String>, SymMatrix), FormatError> {
    read_labeled_matrix(CONJOINT_COVARIANCE)
}

pub fn published_descriptives() -> Result<ProfileSummary, FormatError> {
    read_summary(DESCRIPTIVES_SUMMARY, &signage_design(), PUBLISHED_SUBJECTS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load() {
        assert_eq!(signage_design(), StudyDesign::signage());
        let fits = published_part_worths().unwrap();
        assert_eq!(fits.len(), 20);
        assert!(fits.iter().all(|f| f.p_value.is_some()));
        // three-decimal rounding leaves the zero sums off by at most 0.001
        assert!(fits.iter().all(|f| f.zero_sum_defect() <= 0.0010001));
        let (labels, cov) = published_covariance().unwrap();
        assert_eq!(labels, StudyDesign::signage().labels());
        assert_eq!(cov.get(0, 1), 0.0108);
        let d = published_descriptives().unwrap();
        assert_eq!(d.n_subjects, 20);
        assert_eq!(d.profiles[0].mean, 0.167);
    }

    #[test]
    fn study_fixtures_are_canonical() {
        assert_eq!(StudyFile::parse(CONJOINT_STUDY).unwrap().to_json(), CONJOINT_STUDY);
        assert_eq!(DESCRIPTIVES_STUDY, CONJOINT_STUDY);
    }
}
