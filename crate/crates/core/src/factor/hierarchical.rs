//! Schmid-Leiman orthogonalization of an oblique solution.

use serde::{Deserialize, Serialize};

use super::{ml_extract, FactorError, MlOptions, ObliqueSolution};
use crate::numerics::{sym_eigen, Matrix, SymMatrix};

/// Off-diagonal factor correlations below this are treated as zero.
const ZERO_CORRELATION: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalSolution {
    /// Loadings of each variable on the general factor.
    pub secondary: Vec<f64>,
    /// Residualized primary loadings, variables × k.
    pub primaries: Matrix,
    /// Loadings of the primary factors on the general factor.
    pub general_loadings: Vec<f64>,
    /// Primary factors reversed so that all factor correlations are positive.
    pub reflected: Vec<bool>,
}

impl HierarchicalSolution {
    /// secondary·secondaryᵀ + primaries·primariesᵀ
    pub fn reconstruction(&self) -> Matrix {
        let p = self.secondary.len();
        let s = Matrix::from_fn(p, p, |i, j| self.secondary[i] * self.secondary[j]);
        s.add(&self.primaries.matmul(&self.primaries.transpose()))
    }

    /// Largest entrywise gap to pattern·Φ·patternᵀ.
    pub fn reconstruction_error(&self, oblique: &ObliqueSolution) -> f64 {
        self.reconstruction().sub(&oblique.common_covariance()).max_abs()
    }
}

/// Sign flips that make the factor correlations as positive as possible:
/// a factor whose correlations with the others are mostly negative is
/// reversed, repeated until stable.
fn positive_reflection(phi: &Matrix) -> Vec<f64> {
    let k = phi.rows();
    let mut signs = vec![1.0; k];
    for _ in 0..k {
        let mut changed = false;
        for c in 0..k {
            let total: f64 = (0..k).filter(|&j| j != c).map(|j| signs[c] * signs[j] * phi[(c, j)]).sum();
            if total < 0.0 {
                signs[c] = -signs[c];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    signs
}

fn general_factor(phi: &Matrix) -> Result<Vec<f64>, FactorError> {
    let k = phi.rows();
    let off = |i: usize, j: usize| phi[(i, j)];
    let max_off = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| off(i, j).abs())
        .fold(0.0, f64::max);
    if max_off < ZERO_CORRELATION {
        return Ok(vec![0.0; k]);
    }
    let g = match k {
        2 => {
            if off(0, 1) < 0.0 {
                return Err(FactorError::NoGeneralFactor("negative factor correlation".into()));
            }
            vec![off(0, 1).sqrt(); 2]
        }
        3 if (0..3).all(|i| off(i, (i + 1) % 3).abs() >= ZERO_CORRELATION) => {
            // exact one-factor fit: φ_ij = g_i g_j for every pair
            let triad = |i: usize, j: usize, l: usize| off(i, j) * off(i, l) / off(j, l);
            let sq = [triad(0, 1, 2), triad(1, 0, 2), triad(2, 0, 1)];
            if sq.iter().any(|&v| v < 0.0) {
                return Err(FactorError::NoGeneralFactor(
                    "factor correlations cannot all be made positive".into(),
                ));
            }
            sq.iter().map(|v| v.sqrt()).collect()
        }
        _ => {
            let one = ml_extract(&SymMatrix::new(phi.clone())?, 1, &MlOptions::default())?;
            one.loadings.col(0).iter().map(|v| v.abs()).collect()
        }
    };
    if let Some(j) = g.iter().position(|&v| v > 1.0 + 1e-12) {
        return Err(FactorError::NoGeneralFactor(format!(
            "primary factor {j} would load {:.4} on the general factor",
            g[j]
        )));
    }
    Ok(g.into_iter().map(|v| v.min(1.0)).collect())
}

pub fn schmid_leiman(oblique: &ObliqueSolution) -> Result<HierarchicalSolution, FactorError> {
    let k = oblique.k();
    if k < 2 {
        return Err(FactorError::TooFewFactors { k, needed: 2 });
    }
    let min_eigenvalue = sym_eigen(&oblique.phi)?.last().map_or(0.0, |e| e.value);
    if min_eigenvalue < -1e-9 {
        return Err(FactorError::Indefinite { min_eigenvalue });
    }
    let phi = oblique.phi.as_matrix();
    let signs = positive_reflection(phi);
    let phi_r = Matrix::from_fn(k, k, |i, j| signs[i] * signs[j] * phi[(i, j)]);
    let pattern = oblique.pattern.scale_cols(&signs);
    let g = general_factor(&phi_r)?;
    let residual: Vec<f64> = g.iter().map(|v| (1.0 - v * v).max(0.0).sqrt()).collect();
    Ok(HierarchicalSolution {
        secondary: pattern.mul_vec(&g),
        primaries: pattern.scale_cols(&residual),
        general_loadings: g,
        reflected: signs.iter().map(|&s| s < 0.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oblique(pattern: Matrix, phi: Matrix) -> ObliqueSolution {
        ObliqueSolution {
            pattern,
            phi: SymMatrix::new(phi).unwrap(),
            converged: true,
            iterations: 0,
            gamma: 0.0,
            criterion: 0.0,
        }
    }

    fn pattern3() -> Matrix {
        Matrix::from_rows(&[
            [0.8, 0.1, 0.0],
            [0.7, 0.0, 0.1],
            [0.0, 0.9, 0.0],
            [0.1, 0.6, 0.0],
            [0.0, 0.0, 0.7],
            [0.0, 0.2, 0.5],
        ])
        .unwrap()
    }

    #[test]
    fn constructed_hierarchy_is_recovered() {
        let g = [0.3, 0.7, 0.7];
        let phi = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { g[i] * g[j] });
        let obl = oblique(pattern3(), phi);
        let sl = schmid_leiman(&obl).unwrap();
        for (a, b) in sl.general_loadings.iter().zip(g) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(sl.reconstruction_error(&obl) < 1e-12);
    }

    #[test]
    fn reflected_factor_is_handled() {
        let g = [0.3, 0.7, 0.7];
        let s = [1.0, -1.0, 1.0];
        let phi = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { s[i] * s[j] * g[i] * g[j] });
        let obl = oblique(pattern3().scale_cols(&s), phi);
        let sl = schmid_leiman(&obl).unwrap();
        assert_eq!(sl.reflected, vec![false, true, false]);
        assert!((sl.general_loadings[1] - 0.7).abs() < 1e-9);
        assert!(sl.reconstruction_error(&obl) < 1e-12);
    }

    #[test]
    fn identity_phi_gives_no_general_factor() {
        let obl = oblique(pattern3(), Matrix::identity(3));
        let sl = schmid_leiman(&obl).unwrap();
        assert!(sl.secondary.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(sl.primaries, pattern3());
    }

    #[test]
    fn indefinite_phi_is_rejected() {
        let phi = Matrix::from_rows(&[[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]).unwrap();
        assert!(matches!(
            schmid_leiman(&oblique(pattern3(), phi)),
            Err(FactorError::Indefinite { .. })
        ));
    }

    #[test]
    fn two_factor_split() {
        let p = Matrix::from_rows(&[[0.8, 0.0], [0.0, 0.7], [0.5, 0.2]]).unwrap();
        let phi = Matrix::from_rows(&[[1.0, 0.36], [0.36, 1.0]]).unwrap();
        let obl = oblique(p, phi);
        let sl = schmid_leiman(&obl).unwrap();
        assert!((sl.general_loadings[0] - 0.6).abs() < 1e-12);
        assert!(sl.reconstruction_error(&obl) < 1e-12);
    }
}
