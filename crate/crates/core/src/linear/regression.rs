//! Effects-coded multiple regression on per-profile aggregates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::{ols, Matrix, OlsFit};
use crate::study::{ProfileSummary, StudyDesign};

/// Single-column −1/0/+1 coding of one factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorCoding {
    pub factor: String,
    pub codes: BTreeMap<String, i8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectsCoding {
    pub factors: Vec<FactorCoding>,
}

impl EffectsCoding {
    pub fn new(factors: Vec<FactorCoding>) -> Result<Self, ModelError> {
        for f in &factors {
            if let Some((level, &code)) = f.codes.iter().find(|(_, c)| !(-1..=1).contains(*c)) {
                return Err(ModelError::InvalidCoding(format!(
                    "{}.{level} has code {code}, expected -1, 0 or 1",
                    f.factor
                )));
            }
            if f.codes.len() == 3 {
                let mut used: Vec<i8> = f.codes.values().copied().collect();
                used.sort_unstable();
                if used != [-1, 0, 1] {
                    return Err(ModelError::InvalidCoding(format!(
                        "three-level factor {} must use each of -1, 0, 1 exactly once",
                        f.factor
                    )));
                }
            }
        }
        Ok(Self { factors })
    }

    /// Gap Small=−1, Medium=0, Large=+1; Background Gaudy=−1, Subtle=0,
    /// Uniform=+1.
    pub fn signage_default() -> Self {
        let coding = |factor: &str, pairs: &[(&str, i8)]| FactorCoding {
            factor: factor.to_string(),
            codes: pairs.iter().map(|(l, c)| (l.to_string(), *c)).collect(),
        };
        Self::new(vec![
            coding("Gap", &[("Small", -1), ("Medium", 0), ("Large", 1)]),
            coding("Background", &[("Gaudy", -1), ("Subtle", 0), ("Uniform", 1)]),
        ])
        .expect("default coding is valid")
    }

    pub fn factor(&self, name: &str) -> Option<&FactorCoding> {
        self.factors.iter().find(|f| f.factor == name)
    }
}

impl fmt::Display for EffectsCoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|fc| {
                let mut levels: Vec<(&String, &i8)> = fc.codes.iter().collect();
                levels.sort_by_key(|(_, c)| **c);
                let levels: Vec<String> = levels.iter().map(|(l, c)| format!("{l}={c}")).collect();
                format!("{}:{}", fc.factor, levels.join(","))
            })
            .collect();
        f.write_str(&parts.join(";"))
    }
}

/// Parses `Gap:Small=-1,Medium=0,Large=1;Background:Gaudy=-1,...`.
impl FromStr for EffectsCoding {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| ModelError::InvalidCoding(msg);
        let mut factors = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (factor, levels) = part
                .split_once(':')
                .ok_or_else(|| bad(format!("'{part}' lacks a 'Factor:' prefix")))?;
            let mut codes = BTreeMap::new();
            for item in levels.split(',').map(str::trim) {
                let (level, code) = item
                    .split_once('=')
                    .ok_or_else(|| bad(format!("'{item}' is not Level=code")))?;
                let code: i8 = code
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("'{code}' is not an integer code")))?;
                codes.insert(level.trim().to_string(), code);
            }
            factors.push(FactorCoding {
                factor: factor.trim().to_string(),
                codes,
            });
        }
        Self::new(factors)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectsRegression {
    /// "Intercept" followed by the included factor names.
    pub terms: Vec<String>,
    pub fit: OlsFit,
}

impl EffectsRegression {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms
            .iter()
            .position(|t| t == term)
            .map(|i| self.fit.coefficients[i])
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// Design matrix `[1 | code(factor_1) | …]` with one row per profile.
pub fn effects_design(
    design: &StudyDesign,
    coding: &EffectsCoding,
    included: &[&str],
) -> Result<Matrix, ModelError> {
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; design.n_items()]];
    for name in included {
        let fi = design
            .factor_index(name)
            .ok_or_else(|| ModelError::UnknownFactor(name.to_string()))?;
        let factor = &design.factors()[fi];
        let fc = coding
            .factor(name)
            .ok_or_else(|| ModelError::UnknownFactor(name.to_string()))?;
        let col = design
            .profiles()
            .iter()
            .map(|p| {
                let level = &factor.levels[p.levels[fi]];
                fc.codes
                    .get(level)
                    .map(|&c| c as f64)
                    .ok_or_else(|| ModelError::CodingMissingLevel {
                        factor: name.to_string(),
                        level: level.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        cols.push(col);
    }
    Ok(Matrix::from_fn(design.n_items(), cols.len(), |i, j| cols[j][i]))
}

/// Regresses one response per profile on the effects codes of `included`.
pub fn effects_regression_on(
    response: &[f64],
    design: &StudyDesign,
    coding: &EffectsCoding,
    included: &[&str],
) -> Result<EffectsRegression, ModelError> {
    let x = effects_design(design, coding, included)?;
    let fit = ols(&x, response)?;
    let mut terms = vec!["Intercept".to_string()];
    terms.extend(included.iter().map(|s| s.to_string()));
    Ok(EffectsRegression { terms, fit })
}

/// Regression of the per-profile geometric means.
pub fn effects_regression(
    summary: &ProfileSummary,
    design: &StudyDesign,
    coding: &EffectsCoding,
    included: &[&str],
) -> Result<EffectsRegression, ModelError> {
    effects_regression_on(&summary.geometric_means(), design, coding, included)
}
