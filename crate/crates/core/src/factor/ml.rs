//! Maximum-likelihood extraction by projected gradient on log-uniquenesses.

use serde::{Deserialize, Serialize};

use super::{communalities, orient_columns, variance_explained, FactorError, FactorSolution};
use crate::numerics::{sym_eigen, Matrix, SymMatrix};

pub const DEFAULT_HEYWOOD_FLOOR: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlOptions {
    /// Stop once the objective changes by less than this...
    pub tol: f64,
    /// ...and no free log-uniqueness has a gradient above this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Uniquenesses are kept at or above this value.
    pub heywood_floor: f64,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            grad_tol: 1e-9,
            max_iter: 10_000,
            heywood_floor: DEFAULT_HEYWOOD_FLOOR,
        }
    }
}

struct Eval {
    f: f64,
    grad: Vec<f64>,
    loadings: Matrix,
}

fn check_correlation(corr: &SymMatrix) -> Result<(), FactorError> {
    let p = corr.order();
    for i in 0..p {
        if (corr.get(i, i) - 1.0).abs() > 1e-8 {
            return Err(FactorError::NotCorrelation(format!(
                "diagonal entry {i} is {}",
                corr.get(i, i)
            )));
        }
        for j in 0..i {
            let r = corr.get(i, j);
            if !r.is_finite() || r.abs() > 1.0 + 1e-12 {
                return Err(FactorError::NotCorrelation(format!("entry ({i},{j}) is {r}")));
            }
        }
    }
    Ok(())
}

/// Λ maximizing the likelihood for fixed Ψ:
/// Ψ^½ V_k (Θ_k − I)^½ from the eigenpairs of Ψ^-½ S Ψ^-½.
fn conditional_loadings(s: &Matrix, psi: &[f64], k: usize) -> Result<Matrix, FactorError> {
    let p = psi.len();
    let inv_root: Vec<f64> = psi.iter().map(|v| 1.0 / v.sqrt()).collect();
    let m = Matrix::from_fn(p, p, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        inv_root[a] * s[(a, b)] * inv_root[b]
    });
    let pairs = sym_eigen(&SymMatrix::new(m)?)?;
    Ok(Matrix::from_fn(p, k, |i, j| {
        psi[i].sqrt() * pairs[j].vector[i] * (pairs[j].value - 1.0).max(0.0).sqrt()
    }))
}

fn evaluate(s: &Matrix, psi: &[f64], k: usize) -> Result<Eval, FactorError> {
    let p = psi.len();
    let loadings = conditional_loadings(s, psi, k)?;
    let mut sigma = loadings.matmul(&loadings.transpose());
    for (i, v) in psi.iter().enumerate() {
        sigma[(i, i)] += v;
    }
    let chol = SymMatrix::new(sigma.clone())?.cholesky()?;
    let log_det: f64 = (0..p).map(|i| 2.0 * chol[(i, i)].ln()).sum();
    let inv = sigma.inverse()?;
    let f = log_det + s.matmul(&inv).trace();
    let w = inv.matmul(&sigma.sub(s)).matmul(&inv);
    Ok(Eval {
        f,
        grad: w.diag(),
        loadings,
    })
}

/// Fits k common factors to a correlation matrix. S need not be positive
/// definite: the objective is evaluated from Σ = ΛΛᵀ + Ψ only.
/// Largest gradient component not blocked by a bound.
fn projected_max(x: &[f64], g: &[f64], lo: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&v, &gi)| {
            let blocked = (v <= lo && gi > 0.0) || (v >= 0.0 && gi < 0.0);
            if blocked {
                0.0
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn ml_extract(corr: &SymMatrix, k: usize, opts: &MlOptions) -> Result<FactorSolution, FactorError> {
    let p = corr.order();
    if k == 0 || k >= p {
        return Err(FactorError::InvalidFactorCount { k, variables: p });
    }
    check_correlation(corr)?;
    let s = corr.as_matrix();
    let lo = opts.heywood_floor.ln();

    // 1 − max|r_ij| stands in for 1 − SMC.
    let mut x: Vec<f64> = (0..p)
        .map(|i| {
            let rmax = (0..p).filter(|&j| j != i).map(|j| s[(i, j)].abs()).fold(0.0, f64::max);
            (1.0 - rmax).clamp(opts.heywood_floor, 1.0).ln()
        })
        .collect();
    let psi_of = |x: &[f64]| x.iter().map(|v| v.exp()).collect::<Vec<f64>>();

    let mut cur = evaluate(s, &psi_of(&x), k)?;
    let mut gx: Vec<f64> = cur.grad.iter().zip(&x).map(|(g, v)| g * v.exp()).collect();
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let (xn, next) = loop {
            let xn: Vec<f64> = x.iter().zip(&gx).map(|(v, g)| (v - step * g).clamp(lo, 0.0)).collect();
            let next = evaluate(s, &psi_of(&xn), k)?;
            let decrease: f64 = gx.iter().zip(x.iter().zip(&xn)).map(|(g, (a, b))| g * (a - b)).sum();
            if next.f <= cur.f - 1e-4 * decrease || step < 1e-14 {
                break (xn, next);
            }
            step *= 0.5;
        };
        let gxn: Vec<f64> = next.grad.iter().zip(&xn).map(|(g, v)| g * v.exp()).collect();
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..p {
            let dx = xn[i] - x[i];
            ss += dx * dx;
            sy += dx * (gxn[i] - gx[i]);
        }
        let stalled = xn.iter().zip(&x).all(|(a, b)| a == b);
        let done = stalled || ((cur.f - next.f).abs() < opts.tol && projected_max(&xn, &gxn, lo) < opts.grad_tol);
        x = xn;
        gx = gxn;
        cur = next;
        if done {
            converged = true;
            break;
        }
        // Barzilai-Borwein step
        step = if sy > 1e-20 { ss / sy } else { 1.0 };
    }

    let psi = psi_of(&x);
    let mut loadings = cur.loadings;
    orient_columns(&mut loadings);
    let comm = communalities(&loadings);
    let discrepancy = SymMatrix::new(s.clone())
        .and_then(|sm| sm.cholesky())
        .ok()
        .map(|l| cur.f - (0..p).map(|i| 2.0 * l[(i, i)].ln()).sum::<f64>() - p as f64);
    Ok(FactorSolution {
        k,
        heywood: psi.iter().map(|&v| v <= opts.heywood_floor * (1.0 + 1e-9)).collect(),
        uniquenesses: comm.iter().map(|h| 1.0 - h).collect(),
        variance_explained: variance_explained(&loadings),
        communalities: comm,
        loadings,
        psi,
        converged,
        iterations,
        objective: cur.f,
        discrepancy,
    })
}

/// diag(Σ⁻¹(Σ−S)Σ⁻¹) at the given solution.
pub fn first_order_residual(corr: &SymMatrix, solution: &FactorSolution) -> Result<Vec<f64>, FactorError> {
    let s = corr.as_matrix();
    let mut sigma = solution.loadings.matmul(&solution.loadings.transpose());
    for (i, v) in solution.psi.iter().enumerate() {
        sigma[(i, i)] += v;
    }
    let inv = sigma.inverse()?;
    Ok(inv.matmul(&sigma.sub(s)).matmul(&inv).diag())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_no_common_factor() {
        let r = SymMatrix::new(Matrix::identity(5)).unwrap();
        let sol = ml_extract(&r, 2, &MlOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.loadings.max_abs() < 1e-12);
        assert!(sol.psi.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(sol.discrepancy.unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let r = SymMatrix::new(Matrix::identity(3)).unwrap();
        assert!(matches!(
            ml_extract(&r, 3, &MlOptions::default()),
            Err(FactorError::InvalidFactorCount { .. })
        ));
        let c = SymMatrix::new(Matrix::from_diag(&[2.0, 1.0, 1.0])).unwrap();
        assert!(matches!(
            ml_extract(&c, 1, &MlOptions::default()),
            Err(FactorError::NotCorrelation(_))
        ));
    }

    #[test]
    fn one_factor_constructive_recovery() {
        let lam = [0.9, 0.8, 0.7, 0.6, 0.5];
        let m = Matrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { lam[i] * lam[j] });
        let r = SymMatrix::new(m).unwrap();
        let sol = ml_extract(&r, 1, &MlOptions::default()).unwrap();
        assert!(sol.converged);
        for (i, l) in lam.iter().enumerate() {
            assert!((sol.loadings[(i, 0)] - l).abs() < 1e-5, "{i}: {}", sol.loadings[(i, 0)]);
        }
        assert!(sol.discrepancy.unwrap() < 1e-9);
        let res = first_order_residual(&r, &sol).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-5));
    }
}
