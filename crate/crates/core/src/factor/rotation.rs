//! Orthogonal varimax and oblique direct-oblimin rotation.

use serde::{Deserialize, Serialize};

use super::{communalities, orient_columns, FactorError, FactorSolution};
use crate::numerics::{Matrix, SymMatrix};

const VARIMAX_EPS: f64 = 1e-13;
const VARIMAX_MAX_SWEEPS: usize = 1000;

fn kaiser_weights(a: &Matrix) -> Vec<f64> {
    communalities(a).iter().map(|h| h.sqrt()).collect()
}

fn scale_rows_safe(a: &Matrix, w: &[f64], invert: bool) -> Matrix {
    let f: Vec<f64> = w
        .iter()
        .map(|&h| match (invert, h > 0.0) {
            (_, false) => 1.0,
            (true, true) => 1.0 / h,
            (false, true) => h,
        })
        .collect();
    a.scale_rows(&f)
}

/// Σ_j [Σ_i b⁴ − (Σ_i b²)²/p] / p on the loadings as given.
pub fn varimax_criterion(b: &Matrix) -> f64 {
    let p = b.rows() as f64;
    (0..b.cols())
        .map(|j| {
            let col = b.col(j);
            let s2: f64 = col.iter().map(|v| v * v).sum();
            let s4: f64 = col.iter().map(|v| v.powi(4)).sum();
            s4 - s2 * s2 / p
        })
        .sum::<f64>()
        / p
}

/// Optimal planar angle for columns `x`, `y`, rotating as
/// x' = x cos φ + y sin φ, y' = −x sin φ + y cos φ.
pub(crate) fn varimax_pair_angle(x: &[f64], y: &[f64]) -> f64 {
    let p = x.len() as f64;
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let u = xi * xi - yi * yi;
        let v = 2.0 * xi * yi;
        a += u;
        b += v;
        c += u * u - v * v;
        d += 2.0 * u * v;
    }
    let num = d - 2.0 * a * b / p;
    let den = c - (a * a - b * b) / p;
    num.atan2(den) / 4.0
}

/// Pairwise varimax. Returns the rotated loadings and the orthogonal T with
/// rotated = a·T.
pub fn varimax_loadings(a: &Matrix, kaiser_normalize: bool) -> (Matrix, Matrix) {
    let k = a.cols();
    let weights = kaiser_weights(a);
    let mut b = if kaiser_normalize {
        scale_rows_safe(a, &weights, true)
    } else {
        a.clone()
    };
    let mut t = Matrix::identity(k);
    for _ in 0..VARIMAX_MAX_SWEEPS {
        let mut largest = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                let phi = varimax_pair_angle(&b.col(i), &b.col(j));
                largest = largest.max(phi.abs());
                if phi.abs() < VARIMAX_EPS {
                    continue;
                }
                let (s, c) = phi.sin_cos();
                for m in [&mut b, &mut t] {
                    for r in 0..m.rows() {
                        let (x, y) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = x * c + y * s;
                        m[(r, j)] = -x * s + y * c;
                    }
                }
            }
        }
        if largest < VARIMAX_EPS {
            break;
        }
    }
    let rotated = if kaiser_normalize {
        scale_rows_safe(&b, &weights, false)
    } else {
        b
    };
    (rotated, t)
}

/// Varimax-rotates a solution; k = 1 is returned unchanged.
pub fn varimax(solution: &FactorSolution, kaiser_normalize: bool) -> FactorSolution {
    if solution.k < 2 {
        return solution.clone();
    }
    let (mut rotated, _) = varimax_loadings(&solution.loadings, kaiser_normalize);
    orient_columns(&mut rotated);
    solution.with_loadings(rotated)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObliqueOptions {
    /// Direct-oblimin weight: 0 is quartimin, 0.5 biquartimin, 1 covarimin.
    pub gamma: f64,
    pub kaiser_normalize: bool,
    /// Stationarity threshold on the projected gradient norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ObliqueOptions {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            kaiser_normalize: false,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

impl ObliqueOptions {
    pub fn quartimin() -> Self {
        Self::default()
    }

    pub fn biquartimin() -> Self {
        Self {
            gamma: 0.5,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObliqueSolution {
    /// variables × k pattern loadings
    pub pattern: Matrix,
    /// k × k factor correlations
    pub phi: SymMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub gamma: f64,
    pub criterion: f64,
}

impl ObliqueSolution {
    pub fn k(&self) -> usize {
        self.pattern.cols()
    }

    /// pattern·Φ
    pub fn structure(&self) -> Matrix {
        self.pattern.matmul(self.phi.as_matrix())
    }

    /// pattern·Φ·patternᵀ
    pub fn common_covariance(&self) -> Matrix {
        self.structure().matmul(&self.pattern.transpose())
    }
}

/// Direct-oblimin value and gradient with respect to L.
pub fn oblimin_criterion(l: &Matrix, gamma: f64) -> (f64, Matrix) {
    let (p, k) = (l.rows(), l.cols());
    let l2 = l.map(|v| v * v);
    let col_mean: Vec<f64> = (0..k).map(|j| l2.col(j).iter().sum::<f64>() / p as f64).collect();
    // X = C·L²·N with C = I − (γ/p)11ᵀ and N = 11ᵀ − I
    let centered = Matrix::from_fn(p, k, |i, j| l2[(i, j)] - gamma * col_mean[j]);
    let x = Matrix::from_fn(p, k, |i, j| {
        let row: f64 = centered.row(i).iter().sum();
        row - centered[(i, j)]
    });
    let mut f = 0.0;
    for i in 0..p {
        for j in 0..k {
            f += l2[(i, j)] * x[(i, j)];
        }
    }
    let grad = Matrix::from_fn(p, k, |i, j| l[(i, j)] * x[(i, j)]);
    (f / 4.0, grad)
}

fn normalize_columns(x: &Matrix) -> Matrix {
    let norms: Vec<f64> = (0..x.cols())
        .map(|j| 1.0 / x.col(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    x.scale_cols(&norms)
}

/// Gradient-projection oblique rotation of the solution's loadings.
pub fn oblique_rotate(solution: &FactorSolution, opts: &ObliqueOptions) -> Result<ObliqueSolution, FactorError> {
    let a0 = &solution.loadings;
    let k = a0.cols();
    if k < 2 {
        return Err(FactorError::TooFewFactors { k, needed: 2 });
    }
    let weights = kaiser_weights(a0);
    let a = if opts.kaiser_normalize {
        scale_rows_safe(a0, &weights, true)
    } else {
        a0.clone()
    };

    let gradient = |l: &Matrix, gq: &Matrix, t_inv: &Matrix| l.transpose().matmul(gq).matmul(t_inv).transpose().scale(-1.0);

    let mut t = Matrix::identity(k);
    let t_inv = Matrix::identity(k);
    let mut l = a.matmul(&t_inv.transpose());
    let (mut f, gq) = oblimin_criterion(&l, opts.gamma);
    let mut g = gradient(&l, &gq, &t_inv);
    let mut alpha = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let tg: Vec<f64> = (0..k).map(|j| (0..k).map(|i| t[(i, j)] * g[(i, j)]).sum()).collect();
        let gp = g.sub(&t.scale_cols(&tg));
        let s = gp.frobenius();
        if s < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        alpha *= 2.0;
        let mut accepted = None;
        for _ in 0..30 {
            let tt = normalize_columns(&t.sub(&gp.scale(alpha)));
            let tt_inv = tt.inverse()?;
            let lt = a.matmul(&tt_inv.transpose());
            let (ft, gqt) = oblimin_criterion(&lt, opts.gamma);
            let ok = ft < f - 0.5 * s * s * alpha;
            accepted = Some((tt, tt_inv, lt, ft, gqt));
            if ok {
                break;
            }
            alpha /= 2.0;
        }
        let (tt, tt_inv, lt, ft, gqt) = accepted.expect("line search runs at least once");
        g = gradient(&lt, &gqt, &tt_inv);
        t = tt;
        l = lt;
        f = ft;
    }

    let mut pattern = if opts.kaiser_normalize {
        scale_rows_safe(&l, &weights, false)
    } else {
        l
    };
    let signs = orient_columns(&mut pattern);
    let tt = t.transpose().matmul(&t);
    let phi = Matrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { signs[i] * signs[j] * tt[(i, j)] });
    Ok(ObliqueSolution {
        pattern,
        phi: SymMatrix::new(phi)?,
        converged,
        iterations,
        gamma: opts.gamma,
        criterion: f,
    })
}
