//! Maximum-likelihood factor analysis, rotations and the Schmid-Leiman
//! hierarchical decomposition.

mod hierarchical;
mod ml;
mod rotation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, NumericsError};

pub use hierarchical::{schmid_leiman, HierarchicalSolution};
pub use ml::{first_order_residual, ml_extract, MlOptions, DEFAULT_HEYWOOD_FLOOR};
pub use rotation::{
    oblimin_criterion, oblique_rotate, varimax, varimax_criterion, varimax_loadings, ObliqueOptions,
    ObliqueSolution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("not a correlation matrix: {0}")]
    NotCorrelation(String),
    #[error("factor count {k} must satisfy 1 <= k < {variables}")]
    InvalidFactorCount { k: usize, variables: usize },
    #[error("operation needs at least {needed} factors, got {k}")]
    TooFewFactors { k: usize, needed: usize },
    #[error("factor correlation matrix is indefinite (min eigenvalue {min_eigenvalue:.3e})")]
    Indefinite { min_eigenvalue: f64 },
    #[error("no proper general factor: {0}")]
    NoGeneralFactor(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSolution {
    pub k: usize,
    /// variables × k
    pub loadings: Matrix,
    /// `1 − communality`, the correlation-metric uniqueness.
    pub uniquenesses: Vec<f64>,
    /// Model uniquenesses Ψ at the optimum (possibly clamped).
    pub psi: Vec<f64>,
    pub communalities: Vec<f64>,
    pub variance_explained: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Variables whose Ψ hit the Heywood floor.
    pub heywood: Vec<bool>,
    /// `ln|Σ| + tr(SΣ⁻¹)` at the optimum.
    pub objective: f64,
    /// Full discrepancy `objective − ln|S| − p`; `None` when S is not
    /// positive definite.
    pub discrepancy: Option<f64>,
}

impl FactorSolution {
    pub fn variables(&self) -> usize {
        self.loadings.rows()
    }

    pub fn any_heywood(&self) -> bool {
        self.heywood.iter().any(|&h| h)
    }

    /// Same solution with new loadings; communalities and fractions are
    /// recomputed.
    pub fn with_loadings(&self, loadings: Matrix) -> Self {
        let communalities = communalities(&loadings);
        Self {
            k: loadings.cols(),
            uniquenesses: communalities.iter().map(|h| 1.0 - h).collect(),
            variance_explained: variance_explained(&loadings),
            communalities,
            loadings,
            ..self.clone()
        }
    }
}

pub fn communalities(loadings: &Matrix) -> Vec<f64> {
    (0..loadings.rows())
        .map(|i| loadings.row(i).iter().map(|v| v * v).sum())
        .collect()
}

/// Σ_i loading_ij² / variable count for each factor.
pub fn variance_explained(loadings: &Matrix) -> Vec<f64> {
    let p = loadings.rows() as f64;
    (0..loadings.cols())
        .map(|j| loadings.col(j).iter().map(|v| v * v).sum::<f64>() / p)
        .collect()
}

/// Flips each column so its largest-magnitude entry is positive. Returns the
/// applied signs.
pub fn orient_columns(m: &mut Matrix) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let col = m.col(j);
        let lead = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let s = if lead < 0.0 { -1.0 } else { 1.0 };
        if s < 0.0 {
            let flipped: Vec<f64> = col.iter().map(|v| -v).collect();
            m.set_col(j, &flipped);
        }
        signs.push(s);
    }
    signs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadingClass {
    Suppressed,
    /// |loading| ≥ 0.4, shown in bold.
    Salient,
    /// |loading| ≥ 0.6.
    High,
}

pub const SALIENT_LOADING: f64 = 0.4;
pub const HIGH_LOADING: f64 = 0.6;

pub fn classify_loading(x: f64) -> LoadingClass {
    match x.abs() {
        a if a >= HIGH_LOADING => LoadingClass::High,
        a if a >= SALIENT_LOADING => LoadingClass::Salient,
        _ => LoadingClass::Suppressed,
    }
}

/// Best match of `candidate` columns onto `reference` columns under
/// permutation and sign flips.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnAlignment {
    /// `perm[j]` is the candidate column matched to reference column `j`.
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    pub max_abs_diff: f64,
}

impl ColumnAlignment {
    pub fn apply(&self, candidate: &Matrix) -> Matrix {
        Matrix::from_fn(candidate.rows(), self.perm.len(), |i, j| {
            self.signs[j] * candidate[(i, self.perm[j])]
        })
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive search, so only meant for small k.
pub fn align_columns(reference: &Matrix, candidate: &Matrix) -> Option<ColumnAlignment> {
    if reference.rows() != candidate.rows() || reference.cols() != candidate.cols() || reference.cols() > 8 {
        return None;
    }
    let k = reference.cols();
    let mut best: Option<ColumnAlignment> = None;
    for perm in permutations(k) {
        let mut signs = Vec::with_capacity(k);
        let mut worst = 0.0f64;
        for (j, &c) in perm.iter().enumerate() {
            let (mut pos, mut neg) = (0.0f64, 0.0f64);
            for i in 0..reference.rows() {
                pos = pos.max((reference[(i, j)] - candidate[(i, c)]).abs());
                neg = neg.max((reference[(i, j)] + candidate[(i, c)]).abs());
            }
            signs.push(if neg < pos { -1.0 } else { 1.0 });
            worst = worst.max(pos.min(neg));
        }
        if best.as_ref().is_none_or(|b| worst < b.max_abs_diff) {
            best = Some(ColumnAlignment {
                perm,
                signs,
                max_abs_diff: worst,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(classify_loading(-0.61), LoadingClass::High);
        assert_eq!(classify_loading(0.4), LoadingClass::Salient);
        assert_eq!(classify_loading(0.399), LoadingClass::Suppressed);
    }

    #[test]
    fn alignment_finds_permutation_and_sign() {
        let a = Matrix::from_rows(&[[0.9, 0.1], [0.8, 0.2], [0.1, 0.7]]).unwrap();
        let b = Matrix::from_rows(&[[0.1, -0.9], [0.2, -0.8], [0.7, -0.1]]).unwrap();
        let al = align_columns(&a, &b).unwrap();
        assert_eq!(al.perm, vec![1, 0]);
        assert_eq!(al.signs, vec![-1.0, 1.0]);
        assert!(al.max_abs_diff < 1e-15);
        assert_eq!(al.apply(&b), a);
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn orient_flips_negative_lead() {
        let mut m = Matrix::from_rows(&[[-0.9, 0.1], [0.3, 0.2]]).unwrap();
        assert_eq!(orient_columns(&mut m), vec![-1.0, 1.0]);
        assert_eq!(m[(0, 0)], 0.9);
    }
}
