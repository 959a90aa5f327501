//! Eigensolvers: power iteration for positive matrices and cyclic Jacobi for
//! symmetric ones.

use serde::{Deserialize, Serialize};

use super::{Matrix, NumericsError, SymMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// Unit Euclidean norm.
    pub vector: Vec<f64>,
}

pub const DEFAULT_POWER_TOL: f64 = 1e-12;
pub const DEFAULT_POWER_MAX_ITER: usize = 10_000;

/// Dominant eigenpair of a strictly positive square matrix.
///
/// Iterates on sum-normalized vectors and stops when two successive iterates
/// differ by at most `tol` in the max-norm. The returned vector is positive and
/// has unit Euclidean norm.
pub fn power_iteration(
    matrix: &Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, NumericsError> {
    if !matrix.is_square() {
        return Err(NumericsError::NotSquare {
            rows: matrix.rows(),
            cols: matrix.cols(),
        });
    }
    let n = matrix.rows();
    if n == 0 {
        return Err(NumericsError::Empty);
    }
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if let Some(pos) = matrix.as_slice().iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(NumericsError::NotPositive {
            row: pos / n,
            col: pos % n,
        });
    }

    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = matrix.mul_vec(&v);
        let total: f64 = w.iter().sum();
        // v sums to one, so the growth of the total is the eigenvalue estimate.
        lambda = total;
        let next: Vec<f64> = w.iter().map(|x| x / total).collect();
        let delta = next
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if delta <= tol {
            let lambda = matrix.mul_vec(&v).iter().sum::<f64>();
            return Ok(EigenPair {
                value: lambda,
                vector: unit(&v),
            });
        }
    }
    Err(NumericsError::NonConvergence {
        iterations: max_iter,
        last: Box::new(EigenPair {
            value: lambda,
            vector: unit(&v),
        }),
    })
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Full spectral decomposition by cyclic Jacobi rotations, sorted by
/// descending eigenvalue.
pub fn sym_eigen(matrix: &SymMatrix) -> Result<Vec<EigenPair>, NumericsError> {
    let n = matrix.order();
    let mut a = matrix.as_matrix().clone();
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius();
    if scale == 0.0 {
        return Ok((0..n)
            .map(|i| EigenPair {
                value: 0.0,
                vector: (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect(),
            })
            .collect());
    }

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !a.is_finite() {
            return Err(NumericsError::NonFinite);
        }
    }
    if !converged {
        return Err(NumericsError::Domain(
            "Jacobi eigensolver exceeded its sweep limit".into(),
        ));
    }

    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|i| EigenPair {
            value: a[(i, i)],
            vector: v.col(i),
        })
        .collect();
    pairs.sort_by(|x, y| y.value.total_cmp(&x.value));
    Ok(pairs)
}

/// Reassembles `V diag(values) Vᵀ` from eigenpairs.
pub fn reconstruct(pairs: &[EigenPair]) -> Matrix {
    let n = pairs.first().map_or(0, |p| p.vector.len());
    let mut out = Matrix::zeros(n, n);
    for p in pairs {
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += p.value * p.vector[i] * p.vector[j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_consistent_matrix() {
        let w = [0.5, 0.3, 0.2];
        let m = Matrix::from_fn(3, 3, |i, j| w[i] / w[j]);
        let e = power_iteration(&m, 1e-12, 10_000).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        let s: f64 = e.vector.iter().sum();
        for (x, w) in e.vector.iter().zip(w) {
            assert!((x / s - w).abs() < 1e-12);
        }
    }

    #[test]
    fn power_iteration_uniform() {
        let m = Matrix::from_fn(9, 9, |_, _| 1.0);
        let e = power_iteration(&m, 1e-12, 10_000).unwrap();
        assert!((e.value - 9.0).abs() < 1e-12);
        for x in &e.vector {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_iteration_rejects_nonpositive() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            power_iteration(&m, 1e-12, 100),
            Err(NumericsError::NotPositive { row: 0, col: 1 })
        ));
    }

    #[test]
    fn power_iteration_reports_last_iterate() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 0.5], [0.5, 1.0, 4.0], [2.0, 0.25, 1.0]]).unwrap();
        match power_iteration(&m, 1e-15, 1) {
            Err(NumericsError::NonConvergence { iterations, last }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.vector.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn jacobi_two_by_two() {
        let s = SymMatrix::from_lower(&[vec![2.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eigen(&s).unwrap();
        assert!((e[0].value - 3.0).abs() < 1e-14);
        assert!((e[1].value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_diagonal() {
        let d = [0.5, 4.0, -2.0, 1.0];
        let s = SymMatrix::new(Matrix::from_diag(&d)).unwrap();
        let e = sym_eigen(&s).unwrap();
        let values: Vec<f64> = e.iter().map(|p| p.value).collect();
        assert_eq!(values, vec![4.0, 1.0, 0.5, -2.0]);
        assert_eq!(e[0].vector, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn jacobi_rejects_nonfinite() {
        let m = Matrix::from_rows(&[[1.0, f64::INFINITY], [f64::INFINITY, 1.0]]).unwrap();
        assert!(SymMatrix::new(m).is_err());
    }
}
