//! Study designs, per-subject weight records, descriptive statistics and the
//! covariance input of the factor models.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{ConsistencyReport, PriorityVector};
use crate::numerics::{Matrix, NumericsError, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("study needs at least one factor and one profile")]
    EmptyDesign,
    #[error("duplicate {kind} '{name}'")]
    Duplicate { kind: &'static str, name: String },
    #[error("profile '{profile}' gives {found} levels for {expected} factors")]
    ProfileArity {
        profile: String,
        expected: usize,
        found: usize,
    },
    #[error("profile '{profile}' uses unknown level {level} of factor '{factor}'")]
    UnknownLevel {
        profile: String,
        factor: String,
        level: String,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("at least {needed} subjects required, got {found}")]
    TooFewSubjects { needed: usize, found: usize },
    #[error("subject '{subject}' has {found} weights, expected {expected}")]
    LengthMismatch {
        subject: String,
        expected: usize,
        found: usize,
    },
    #[error("subject '{subject}' has non-positive weight {value} for profile {profile}")]
    NonPositiveWeight {
        subject: String,
        profile: usize,
        value: f64,
    },
    #[error("profile {index} has zero or negative variance")]
    DegenerateVariable { index: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Self {
        Self {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub label: String,
    /// Level index per factor, in factor order.
    pub levels: Vec<usize>,
}

/// Factors with ordered levels and the profile set built from them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyDesign {
    factors: Vec<Factor>,
    profiles: Vec<Profile>,
}

impl StudyDesign {
    pub fn new(factors: Vec<Factor>, profiles: Vec<Profile>) -> Result<Self, StudyError> {
        if factors.is_empty() || profiles.is_empty() {
            return Err(StudyError::EmptyDesign);
        }
        let mut names = BTreeSet::new();
        for f in &factors {
            if !names.insert(f.name.as_str()) {
                return Err(StudyError::Duplicate {
                    kind: "factor",
                    name: f.name.clone(),
                });
            }
            let mut lv = BTreeSet::new();
            for l in &f.levels {
                if !lv.insert(l.as_str()) {
                    return Err(StudyError::Duplicate {
                        kind: "level",
                        name: format!("{}.{}", f.name, l),
                    });
                }
            }
            if f.levels.is_empty() {
                return Err(StudyError::EmptyDesign);
            }
        }
        let mut labels = BTreeSet::new();
        for p in &profiles {
            if !labels.insert(p.label.as_str()) {
                return Err(StudyError::Duplicate {
                    kind: "profile",
                    name: p.label.clone(),
                });
            }
            if p.levels.len() != factors.len() {
                return Err(StudyError::ProfileArity {
                    profile: p.label.clone(),
                    expected: factors.len(),
                    found: p.levels.len(),
                });
            }
            for (f, &l) in factors.iter().zip(&p.levels) {
                if l >= f.levels.len() {
                    return Err(StudyError::UnknownLevel {
                        profile: p.label.clone(),
                        factor: f.name.clone(),
                        level: l.to_string(),
                    });
                }
            }
        }
        Ok(Self { factors, profiles })
    }

    /// Builds a design from profiles given as level names.
    pub fn from_named(
        factors: Vec<Factor>,
        profiles: &[(&str, Vec<&str>)],
    ) -> Result<Self, StudyError> {
        let mut out = Vec::with_capacity(profiles.len());
        for (label, levels) in profiles {
            if levels.len() != factors.len() {
                return Err(StudyError::ProfileArity {
                    profile: label.to_string(),
                    expected: factors.len(),
                    found: levels.len(),
                });
            }
            let idx = factors
                .iter()
                .zip(levels)
                .map(|(f, l)| {
                    f.level_index(l).ok_or_else(|| StudyError::UnknownLevel {
                        profile: label.to_string(),
                        factor: f.name.clone(),
                        level: l.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(Profile {
                label: label.to_string(),
                levels: idx,
            });
        }
        Self::new(factors, out)
    }

    /// The digital-signage grid: Gap {Small, Medium, Large} × Background
    /// {Gaudy, Uniform, Subtle}, profiles in the MG, SG, LG, MU, … LS order.
    pub fn signage() -> Self {
        let factors = vec![
            Factor::new("Gap", &["Small", "Medium", "Large"]),
            Factor::new("Background", &["Gaudy", "Uniform", "Subtle"]),
        ];
        let mut profiles = Vec::with_capacity(9);
        for (b, bl) in ["G", "U", "S"].iter().enumerate() {
            for (g, gl) in [(1, "M"), (0, "S"), (2, "L")] {
                profiles.push(Profile {
                    label: format!("{gl}{bl}"),
                    levels: vec![g, b],
                });
            }
        }
        Self::new(factors, profiles).expect("built-in design is valid")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn n_items(&self) -> usize {
        self.profiles.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.label.as_str()).collect()
    }

    pub fn profile_index(&self, label: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.label == label)
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// True when every level combination appears exactly once.
    pub fn is_full_factorial(&self) -> bool {
        let cells: usize = self.factors.iter().map(|f| f.levels.len()).product();
        let distinct: BTreeSet<&[usize]> = self.profiles.iter().map(|p| p.levels.as_slice()).collect();
        cells == self.profiles.len() && distinct.len() == cells
    }

    /// Profile indices observed at each level of `factor`.
    pub fn level_groups(&self, factor: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.factors[factor].levels.len()];
        for (i, p) in self.profiles.iter().enumerate() {
            groups[p.levels[factor]].push(i);
        }
        groups
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub weights: PriorityVector,
    pub consistency: Option<ConsistencyReport>,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
}

impl SubjectRecord {
    pub fn new(subject_id: impl Into<String>, weights: PriorityVector) -> Self {
        Self {
            subject_id: subject_id.into(),
            weights,
            consistency: None,
            demographics: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub mean: f64,
    pub geometric_mean: f64,
    pub std_dev: f64,
    pub mean_std_error: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub n_subjects: usize,
    pub profiles: Vec<ProfileStats>,
}

impl ProfileSummary {
    pub fn means(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.mean).collect()
    }

    pub fn geometric_means(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.geometric_mean).collect()
    }
}

fn check_dataset(dataset: &[SubjectRecord]) -> Result<usize, StudyError> {
    let first = dataset.first().ok_or(StudyError::EmptyDataset)?;
    let n = first.weights.len();
    for r in dataset {
        if r.weights.len() != n {
            return Err(StudyError::LengthMismatch {
                subject: r.subject_id.clone(),
                expected: n,
                found: r.weights.len(),
            });
        }
    }
    Ok(n)
}

/// Per-profile descriptive statistics across subjects.
pub fn summarize(dataset: &[SubjectRecord]) -> Result<ProfileSummary, StudyError> {
    check_dataset(dataset)?;
    let rows: Vec<(&str, &[f64])> = dataset
        .iter()
        .map(|r| (r.subject_id.as_str(), r.weights.weights()))
        .collect();
    summarize_rows(&rows)
}

/// [`summarize`] over raw `(subject, weights)` rows.
pub fn summarize_rows(rows: &[(&str, &[f64])]) -> Result<ProfileSummary, StudyError> {
    let (_, first) = rows.first().ok_or(StudyError::EmptyDataset)?;
    let n_items = first.len();
    let mut columns = vec![Vec::with_capacity(rows.len()); n_items];
    for (subject, w) in rows {
        if w.len() != n_items {
            return Err(StudyError::LengthMismatch {
                subject: subject.to_string(),
                expected: n_items,
                found: w.len(),
            });
        }
        for (j, &v) in w.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StudyError::NonPositiveWeight {
                    subject: subject.to_string(),
                    profile: j,
                    value: v,
                });
            }
            columns[j].push(v);
        }
    }
    Ok(ProfileSummary {
        n_subjects: rows.len(),
        profiles: columns.iter().map(|c| column_stats(c)).collect(),
    })
}

fn column_stats(values: &[f64]) -> ProfileStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let geometric_mean = (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
    let std_dev = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    ProfileStats {
        mean,
        geometric_mean,
        std_dev,
        mean_std_error: std_dev / n.sqrt(),
        min,
        max,
        median,
        range: max - min,
    }
}

/// Unbiased covariance of profile weights across subjects.
pub fn covariance(dataset: &[SubjectRecord]) -> Result<SymMatrix, StudyError> {
    let n_items = check_dataset(dataset)?;
    if dataset.len() < 2 {
        return Err(StudyError::TooFewSubjects {
            needed: 2,
            found: dataset.len(),
        });
    }
    let n = dataset.len() as f64;
    let means: Vec<f64> = (0..n_items)
        .map(|j| dataset.iter().map(|r| r.weights.weights()[j]).sum::<f64>() / n)
        .collect();
    let cov = Matrix::from_fn(n_items, n_items, |a, b| {
        dataset
            .iter()
            .map(|r| {
                let w = r.weights.weights();
                (w[a] - means[a]) * (w[b] - means[b])
            })
            .sum::<f64>()
            / (n - 1.0)
    });
    Ok(SymMatrix::new(cov)?)
}

/// Standardizes a covariance matrix to correlations.
pub fn to_correlation(cov: &SymMatrix) -> Result<SymMatrix, StudyError> {
    let n = cov.order();
    let sd: Vec<f64> = (0..n)
        .map(|i| {
            let v = cov.get(i, i);
            if v > 0.0 && v.is_finite() {
                Ok(v.sqrt())
            } else {
                Err(StudyError::DegenerateVariable { index: i })
            }
        })
        .collect::<Result<_, _>>()?;
    let r = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            cov.get(i, j) / (sd[i] * sd[j])
        }
    });
    Ok(SymMatrix::new(r)?)
}
