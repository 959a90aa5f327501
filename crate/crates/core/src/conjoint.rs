//! Per-subject metric conjoint decomposition and choice simulators.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ols, Matrix, NumericsError};
use crate::study::{StudyDesign, SubjectRecord};

/// Part-worth ranges below this are treated as zero when deciding degeneracy.
const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjointError {
    #[error("conjoint decomposition needs a full-factorial design")]
    NotFullFactorial,
    #[error("subject {subject_id}: {reason}")]
    DesignMismatch { subject_id: String, reason: String },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("at least one fit is required")]
    NoFits,
    #[error("every subject was excluded by the rule: {rule}")]
    AllExcluded { rule: String },
    #[error("non-finite part-worth for subject {0}")]
    NonFinite(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorPartWorths {
    pub factor: String,
    pub levels: Vec<String>,
    /// One value per level, in design level order.
    pub worths: Vec<f64>,
    /// Range share; `None` when every factor has zero range.
    pub importance: Option<f64>,
}

impl FactorPartWorths {
    pub fn range(&self) -> f64 {
        let max = self.worths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.worths.iter().copied().fold(f64::INFINITY, f64::min);
        if self.worths.is_empty() {
            0.0
        } else {
            max - min
        }
    }

    pub fn worth(&self, level: &str) -> Option<f64> {
        self.levels.iter().position(|l| l == level).map(|i| self.worths[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjointFit {
    pub subject_id: String,
    pub intercept: f64,
    pub factors: Vec<FactorPartWorths>,
    pub r_squared: Option<f64>,
    pub f_stat: Option<f64>,
    pub p_value: Option<f64>,
    /// All part-worth ranges are zero, so importances are undefined.
    pub degenerate: bool,
}

impl ConjointFit {
    /// Builds a fit from known part-worths (`worths[factor][level]`).
    pub fn from_part_worths(
        subject_id: impl Into<String>,
        design: &StudyDesign,
        intercept: f64,
        worths: Vec<Vec<f64>>,
    ) -> Result<Self, ConjointError> {
        let subject_id = subject_id.into();
        if worths.len() != design.factors().len() {
            return Err(ConjointError::LengthMismatch {
                expected: design.factors().len(),
                found: worths.len(),
            });
        }
        let mut factors = Vec::with_capacity(worths.len());
        for (f, w) in design.factors().iter().zip(worths) {
            if w.len() != f.levels.len() {
                return Err(ConjointError::LengthMismatch {
                    expected: f.levels.len(),
                    found: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(ConjointError::NonFinite(subject_id));
            }
            factors.push(FactorPartWorths {
                factor: f.name.clone(),
                levels: f.levels.clone(),
                worths: w,
                importance: None,
            });
        }
        if !intercept.is_finite() {
            return Err(ConjointError::NonFinite(subject_id));
        }
        let mut fit = Self {
            subject_id,
            intercept,
            factors,
            r_squared: None,
            f_stat: None,
            p_value: None,
            degenerate: false,
        };
        fit.compute_importances();
        Ok(fit)
    }

    pub fn with_stats(mut self, r_squared: f64, f_stat: f64, p_value: f64) -> Self {
        self.r_squared = Some(r_squared);
        self.f_stat = Some(f_stat);
        self.p_value = Some(p_value);
        self
    }

    fn compute_importances(&mut self) {
        let ranges: Vec<f64> = self.factors.iter().map(FactorPartWorths::range).collect();
        let total: f64 = ranges.iter().sum();
        let scale = self
            .factors
            .iter()
            .flat_map(|f| f.worths.iter())
            .fold(self.intercept.abs(), |m, v| m.max(v.abs()));
        self.degenerate = total <= DEGENERATE_RANGE * scale.max(f64::MIN_POSITIVE);
        for (f, r) in self.factors.iter_mut().zip(&ranges) {
            f.importance = (!self.degenerate).then(|| r / total);
        }
    }

    pub fn importances(&self) -> Option<Vec<f64>> {
        self.factors.iter().map(|f| f.importance).collect()
    }

    pub fn factor(&self, name: &str) -> Option<&FactorPartWorths> {
        self.factors.iter().find(|f| f.factor == name)
    }

    /// Largest |Σ part-worths| over factors.
    pub fn zero_sum_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.worths.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    fn check_design(&self, design: &StudyDesign) -> Result<(), ConjointError> {
        let mismatch = |reason: String| ConjointError::DesignMismatch {
            subject_id: self.subject_id.clone(),
            reason,
        };
        if self.factors.len() != design.factors().len() {
            return Err(mismatch(format!(
                "fit has {} factors, design has {}",
                self.factors.len(),
                design.factors().len()
            )));
        }
        for (fw, f) in self.factors.iter().zip(design.factors()) {
            if fw.factor != f.name || fw.levels != f.levels {
                return Err(mismatch(format!("factor '{}' does not match the design", fw.factor)));
            }
        }
        Ok(())
    }
}

/// Sum-to-zero coding: level `l < L-1` gets its own column, the last level
/// is coded −1 in every column of its factor.
fn conjoint_design(design: &StudyDesign) -> Matrix {
    let n_params = 1 + design
        .factors()
        .iter()
        .map(|f| f.levels.len().saturating_sub(1))
        .sum::<usize>();
    let mut x = Matrix::zeros(design.n_items(), n_params);
    for (i, p) in design.profiles().iter().enumerate() {
        x[(i, 0)] = 1.0;
        let mut col = 1;
        for (fi, f) in design.factors().iter().enumerate() {
            let last = f.levels.len() - 1;
            for l in 0..last {
                x[(i, col + l)] = if p.levels[fi] == l {
                    1.0
                } else if p.levels[fi] == last {
                    -1.0
                } else {
                    0.0
                };
            }
            col += last;
        }
    }
    x
}

/// Effects-coded OLS of one subject's profile weights.
pub fn fit_weights(
    subject_id: impl Into<String>,
    weights: &[f64],
    design: &StudyDesign,
) -> Result<ConjointFit, ConjointError> {
    if !design.is_full_factorial() {
        return Err(ConjointError::NotFullFactorial);
    }
    if weights.len() != design.n_items() {
        return Err(ConjointError::LengthMismatch {
            expected: design.n_items(),
            found: weights.len(),
        });
    }
    let x = conjoint_design(design);
    let fit = ols(&x, weights)?;
    let mut worths = Vec::with_capacity(design.factors().len());
    let mut col = 1;
    for f in design.factors() {
        let last = f.levels.len() - 1;
        let mut w: Vec<f64> = fit.coefficients[col..col + last].to_vec();
        w.push(-w.iter().sum::<f64>());
        worths.push(w);
        col += last;
    }
    Ok(ConjointFit::from_part_worths(subject_id, design, fit.coefficients[0], worths)?
        .with_stats(fit.r_squared, fit.f_stat, fit.f_p))
}

pub fn fit_subject(record: &SubjectRecord, design: &StudyDesign) -> Result<ConjointFit, ConjointError> {
    fit_weights(record.subject_id.clone(), record.weights.weights(), design)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorAggregate {
    pub factor: String,
    pub levels: Vec<String>,
    pub mean_worths: Vec<f64>,
    /// Mean over non-degenerate fits.
    pub mean_importance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateConjoint {
    pub n_subjects: usize,
    pub mean_intercept: f64,
    pub factors: Vec<FactorAggregate>,
    pub mean_r_squared: Option<f64>,
    pub mean_f_stat: Option<f64>,
    pub mean_p_value: Option<f64>,
}

impl AggregateConjoint {
    pub fn factor(&self, name: &str) -> Option<&FactorAggregate> {
        self.factors.iter().find(|f| f.factor == name)
    }
}

fn sorted_by_subject(fits: &[ConjointFit]) -> Vec<&ConjointFit> {
    let mut v: Vec<&ConjointFit> = fits.iter().collect();
    v.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    v
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn aggregate(fits: &[ConjointFit]) -> Result<AggregateConjoint, ConjointError> {
    let first = fits.first().ok_or(ConjointError::NoFits)?;
    for f in fits {
        let same = f.factors.len() == first.factors.len()
            && f.factors
                .iter()
                .zip(&first.factors)
                .all(|(a, b)| a.factor == b.factor && a.levels == b.levels);
        if !same {
            return Err(ConjointError::DesignMismatch {
                subject_id: f.subject_id.clone(),
                reason: "fits come from different designs".into(),
            });
        }
    }
    let fits = sorted_by_subject(fits);
    let n = fits.len() as f64;
    let usable: Vec<&&ConjointFit> = fits.iter().filter(|f| !f.degenerate).collect();
    let factors = first
        .factors
        .iter()
        .enumerate()
        .map(|(fi, f0)| {
            let mean_worths = (0..f0.levels.len())
                .map(|l| fits.iter().map(|f| f.factors[fi].worths[l]).sum::<f64>() / n)
                .collect();
            let mean_importance = (!usable.is_empty()).then(|| {
                usable.iter().map(|f| f.factors[fi].importance.unwrap_or(0.0)).sum::<f64>()
                    / usable.len() as f64
            });
            FactorAggregate {
                factor: f0.factor.clone(),
                levels: f0.levels.clone(),
                mean_worths,
                mean_importance,
            }
        })
        .collect();
    Ok(AggregateConjoint {
        n_subjects: fits.len(),
        mean_intercept: fits.iter().map(|f| f.intercept).sum::<f64>() / n,
        factors,
        mean_r_squared: mean_of(fits.iter().map(|f| f.r_squared)),
        mean_f_stat: mean_of(fits.iter().map(|f| f.f_stat)),
        mean_p_value: mean_of(fits.iter().map(|f| f.p_value)),
    })
}

/// Intercept plus the part-worth of each profile's level on every factor.
pub fn predict_utilities(fit: &ConjointFit, design: &StudyDesign) -> Result<Vec<f64>, ConjointError> {
    fit.check_design(design)?;
    Ok(design
        .profiles()
        .iter()
        .map(|p| {
            fit.intercept
                + p.levels
                    .iter()
                    .zip(&fit.factors)
                    .map(|(&l, f)| f.worths[l])
                    .sum::<f64>()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChoiceModel {
    Fcm,
    Btl,
    Lpm,
}

impl fmt::Display for ChoiceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fcm => "FCM",
            Self::Btl => "BTL",
            Self::Lpm => "LPM",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Geometric,
    Arithmetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Across-subject averaging for BTL and LPM.
    pub aggregation: Aggregation,
    /// Drop subjects whose fit p-value exceeds this. Off by default.
    pub p_threshold: Option<f64>,
    /// Apply the nonpositive-utility exclusion to LPM as well as BTL.
    pub lpm_exclusion: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Geometric,
            p_threshold: None,
            lpm_exclusion: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceShares {
    pub model: ChoiceModel,
    pub labels: Vec<String>,
    pub shares: Vec<f64>,
    pub excluded_subjects: Vec<String>,
    pub n_included: usize,
}

impl ChoiceShares {
    pub fn share(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.shares[i])
    }

    pub fn total(&self) -> f64 {
        self.shares.iter().sum()
    }
}

const NONPOSITIVE_RULE: &str = "any predicted utility <= 0";

struct Cohort {
    utilities: Vec<Vec<f64>>,
    excluded: Vec<String>,
}

fn cohort(
    fits: &[ConjointFit],
    design: &StudyDesign,
    opts: &SimulationOptions,
    exclude_nonpositive: bool,
) -> Result<Cohort, ConjointError> {
    if fits.is_empty() {
        return Err(ConjointError::NoFits);
    }
    let mut utilities = Vec::new();
    let mut excluded = Vec::new();
    for fit in sorted_by_subject(fits) {
        let u = predict_utilities(fit, design)?;
        let insignificant = matches!((opts.p_threshold, fit.p_value), (Some(t), Some(p)) if p > t);
        let nonpositive = exclude_nonpositive && u.iter().any(|&v| v <= 0.0);
        if insignificant || nonpositive {
            excluded.push(fit.subject_id.clone());
        } else {
            utilities.push(u);
        }
    }
    if utilities.is_empty() {
        let mut rules = Vec::new();
        if exclude_nonpositive {
            rules.push(NONPOSITIVE_RULE.to_string());
        }
        if let Some(t) = opts.p_threshold {
            rules.push(format!("fit p-value > {t}"));
        }
        return Err(ConjointError::AllExcluded { rule: rules.join(" or ") });
    }
    Ok(Cohort { utilities, excluded })
}

fn labels(design: &StudyDesign) -> Vec<String> {
    design.labels().into_iter().map(str::to_string).collect()
}

/// Share of subjects whose highest-utility profile is each profile; ties
/// split equally.
pub fn simulate_fcm(
    fits: &[ConjointFit],
    design: &StudyDesign,
    opts: &SimulationOptions,
) -> Result<ChoiceShares, ConjointError> {
    let c = cohort(fits, design, opts, false)?;
    let mut shares = vec![0.0; design.n_items()];
    for u in &c.utilities {
        let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        let tied: Vec<usize> = (0..u.len()).filter(|&i| max - u[i] <= tol).collect();
        for &i in &tied {
            shares[i] += 1.0 / tied.len() as f64;
        }
    }
    let n = c.utilities.len() as f64;
    shares.iter_mut().for_each(|s| *s /= n);
    Ok(ChoiceShares {
        model: ChoiceModel::Fcm,
        labels: labels(design),
        shares,
        excluded_subjects: c.excluded,
        n_included: c.utilities.len(),
    })
}

fn combine(probs: &[Vec<f64>], how: Aggregation) -> Vec<f64> {
    let n = probs.len() as f64;
    (0..probs[0].len())
        .map(|j| match how {
            Aggregation::Geometric => (probs.iter().map(|p| p[j].ln()).sum::<f64>() / n).exp(),
            Aggregation::Arithmetic => probs.iter().map(|p| p[j]).sum::<f64>() / n,
        })
        .collect()
}

pub fn btl_probabilities(u: &[f64]) -> Vec<f64> {
    let s: f64 = u.iter().sum();
    u.iter().map(|v| v / s).collect()
}

pub fn logit_probabilities(u: &[f64]) -> Vec<f64> {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Utility-proportional choice; subjects with any utility ≤ 0 are excluded.
pub fn simulate_btl(
    fits: &[ConjointFit],
    design: &StudyDesign,
    opts: &SimulationOptions,
) -> Result<ChoiceShares, ConjointError> {
    let c = cohort(fits, design, opts, true)?;
    let probs: Vec<Vec<f64>> = c.utilities.iter().map(|u| btl_probabilities(u)).collect();
    Ok(ChoiceShares {
        model: ChoiceModel::Btl,
        labels: labels(design),
        shares: combine(&probs, opts.aggregation),
        excluded_subjects: c.excluded,
        n_included: c.utilities.len(),
    })
}

/// Softmax choice over raw utilities.
pub fn simulate_lpm(
    fits: &[ConjointFit],
    design: &StudyDesign,
    opts: &SimulationOptions,
) -> Result<ChoiceShares, ConjointError> {
    let c = cohort(fits, design, opts, opts.lpm_exclusion)?;
    let probs: Vec<Vec<f64>> = c.utilities.iter().map(|u| logit_probabilities(u)).collect();
    Ok(ChoiceShares {
        model: ChoiceModel::Lpm,
        labels: labels(design),
        shares: combine(&probs, opts.aggregation),
        excluded_subjects: c.excluded,
        n_included: c.utilities.len(),
    })
}
