//! Ordinary least squares through Householder QR.

use serde::{Deserialize, Serialize};

use super::dist::{f_tail, t_tail};
use super::{Matrix, NumericsError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_p: f64,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub df_error: usize,
    /// Number of non-intercept parameters tested by the overall F.
    pub df_model: usize,
    pub sse: f64,
    pub sst: f64,
}

const RANK_TOL: f64 = 1e-10;

/// Fits `response ≈ design · β`.
///
/// When a column of the design is identically one it is treated as the
/// intercept: R² is centered and the overall F tests every other column.
/// Without such a column R² and F are computed about zero.
pub fn ols(design: &Matrix, response: &[f64]) -> Result<OlsFit, NumericsError> {
    let (n, p) = (design.rows(), design.cols());
    if response.len() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            found: response.len(),
        });
    }
    if p == 0 || n <= p {
        return Err(NumericsError::Underdetermined {
            observations: n,
            parameters: p,
        });
    }
    if !design.is_finite() || response.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }

    let qr = Qr::new(design)?;
    let qty = qr.qt_mul(response);
    let coefficients = qr.solve_upper(&qty[..p]);
    let fitted = design.mul_vec(&coefficients);
    let residuals: Vec<f64> = response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let df_error = n - p;
    let s2 = sse / df_error as f64;

    let intercept = (0..p).any(|j| design.col(j).iter().all(|&v| v == 1.0));
    let sst = if intercept {
        let mean = response.iter().sum::<f64>() / n as f64;
        response.iter().map(|y| (y - mean).powi(2)).sum::<f64>()
    } else {
        response.iter().map(|y| y * y).sum::<f64>()
    };
    let df_model = if intercept { p - 1 } else { p };

    let rinv = qr.r_inverse();
    let yscale = response.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let exact = sse <= (1e-13 * yscale).powi(2) * n as f64;

    let mut std_errors = Vec::with_capacity(p);
    let mut t_stats = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        // diag((XᵀX)⁻¹) = row norms of R⁻¹
        let v: f64 = (0..p).map(|k| rinv[(j, k)].powi(2)).sum();
        let se = if exact { 0.0 } else { (s2 * v).sqrt() };
        let t = if se > 0.0 {
            coefficients[j] / se
        } else if coefficients[j] == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(coefficients[j])
        };
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(t_tail(t, df_error as f64)?);
    }

    let (r_squared, f_stat) = if sst <= 0.0 {
        (0.0, 0.0)
    } else if exact {
        (1.0, if df_model > 0 { f64::INFINITY } else { 0.0 })
    } else {
        let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
        let f = if df_model > 0 {
            ((sst - sse) / df_model as f64) / s2
        } else {
            0.0
        };
        (r2, f.max(0.0))
    };
    let f_p = if df_model > 0 {
        f_tail(f_stat, df_model as f64, df_error as f64)?
    } else {
        1.0
    };
    let adj_r_squared = if intercept {
        1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_error as f64
    } else {
        1.0 - (1.0 - r_squared) * n as f64 / df_error as f64
    };

    Ok(OlsFit {
        coefficients,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        f_stat,
        f_p,
        residuals,
        fitted,
        df_error,
        df_model,
        sse,
        sst,
    })
}

/// Compact Householder QR: reflectors stored below the diagonal.
struct Qr {
    qr: Matrix,
    rdiag: Vec<f64>,
    betas: Vec<f64>,
}

impl Qr {
    fn new(a: &Matrix) -> Result<Self, NumericsError> {
        let (n, p) = (a.rows(), a.cols());
        let mut qr = a.clone();
        let mut rdiag = vec![0.0; p];
        let mut betas = vec![0.0; p];
        let col_norms: Vec<f64> = (0..p)
            .map(|j| a.col(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        for k in 0..p {
            let norm = (k..n).map(|i| qr[(i, k)].powi(2)).sum::<f64>().sqrt();
            if norm <= RANK_TOL * col_norms[k].max(1e-300) || col_norms[k] == 0.0 {
                return Err(NumericsError::SingularDesign { column: k });
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, stored in place; beta = 2 / vᵀv
            qr[(k, k)] -= alpha;
            let vtv: f64 = (k..n).map(|i| qr[(i, k)].powi(2)).sum();
            let beta = 2.0 / vtv;
            for j in (k + 1)..p {
                let dot: f64 = (k..n).map(|i| qr[(i, k)] * qr[(i, j)]).sum();
                let f = beta * dot;
                for i in k..n {
                    qr[(i, j)] -= f * qr[(i, k)];
                }
            }
            rdiag[k] = alpha;
            betas[k] = beta;
        }
        Ok(Self { qr, rdiag, betas })
    }

    fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        let (n, p) = (self.qr.rows(), self.qr.cols());
        let mut out = y.to_vec();
        for k in 0..p {
            let dot: f64 = (k..n).map(|i| self.qr[(i, k)] * out[i]).sum();
            let f = self.betas[k] * dot;
            for (i, o) in out.iter_mut().enumerate().skip(k) {
                *o -= f * self.qr[(i, k)];
            }
        }
        out
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.rdiag[i],
            std::cmp::Ordering::Less => self.qr[(i, j)],
            std::cmp::Ordering::Greater => 0.0,
        }
    }

    fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let p = self.qr.cols();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = ((i + 1)..p).map(|j| self.r(i, j) * x[j]).sum();
            x[i] = (b[i] - s) / self.r(i, i);
        }
        x
    }

    fn r_inverse(&self) -> Matrix {
        let p = self.qr.cols();
        let mut inv = Matrix::zeros(p, p);
        for c in 0..p {
            let e: Vec<f64> = (0..p).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
            let col = self.solve_upper(&e);
            inv.set_col(c, &col);
        }
        inv
    }
}
