//! Fixed-effects one-way and balanced two-way ANOVA, plus Fisher LSD.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::{f_tail, t_tail};
use crate::study::{StudyDesign, SubjectRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub source: String,
    pub ss: f64,
    pub df: usize,
    pub mss: f64,
    /// `None` on the error row.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub n_obs: usize,
    pub ss_total: f64,
}

impl AnovaTable {
    pub fn row(&self, source: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    pub fn error(&self) -> &AnovaRow {
        self.rows.last().expect("tables always end with the error row")
    }
}

fn effect_row(source: &str, ss: f64, df: usize, mse: f64, df_error: usize) -> Result<AnovaRow, ModelError> {
    let mss = ss / df as f64;
    let f = if ss <= 0.0 {
        0.0
    } else if mse <= 0.0 {
        f64::INFINITY
    } else {
        mss / mse
    };
    let p = f_tail(f, df as f64, df_error as f64)?;
    Ok(AnovaRow {
        source: source.to_string(),
        ss: ss.max(0.0),
        df,
        mss: mss.max(0.0),
        f: Some(f),
        p: Some(p),
    })
}

fn error_row(ss: f64, df: usize) -> AnovaRow {
    AnovaRow {
        source: "Error".into(),
        ss,
        df,
        mss: ss / df as f64,
        f: None,
        p: None,
    }
}

/// Between/within decomposition for independent groups.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaTable, ModelError> {
    if groups.len() < 2 {
        return Err(ModelError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(ModelError::EmptyGroup(i));
    }
    let n_obs: usize = groups.iter().map(Vec::len).sum();
    let df_between = groups.len() - 1;
    let df_within = n_obs - groups.len();
    if df_within == 0 {
        return Err(ModelError::NoErrorDf);
    }
    let grand = groups.iter().flatten().sum::<f64>() / n_obs as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let ss_total = groups.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let mse = within / df_within as f64;
    Ok(AnovaTable {
        rows: vec![
            effect_row("Between", between, df_between, mse, df_within)?,
            error_row(within, df_within),
        ],
        n_obs,
        ss_total,
    })
}

/// Replicates per cell of a two-factor layout, `cells[a][b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellData {
    pub factor_a: String,
    pub factor_b: String,
    pub cells: Vec<Vec<Vec<f64>>>,
}

impl CellData {
    /// One cell per profile; each subject contributes one replicate.
    pub fn from_records(
        design: &StudyDesign,
        records: &[SubjectRecord],
        factor_a: usize,
        factor_b: usize,
    ) -> Result<Self, ModelError> {
        let fa = design.factors().get(factor_a).ok_or(ModelError::UnknownFactorIndex(factor_a))?;
        let fb = design.factors().get(factor_b).ok_or(ModelError::UnknownFactorIndex(factor_b))?;
        let mut cells = vec![vec![Vec::new(); fb.levels.len()]; fa.levels.len()];
        for r in records {
            let w = r.weights.weights();
            if w.len() != design.n_items() {
                return Err(ModelError::Study(crate::study::StudyError::LengthMismatch {
                    subject: r.subject_id.clone(),
                    expected: design.n_items(),
                    found: w.len(),
                }));
            }
            for (p, &v) in design.profiles().iter().zip(w) {
                cells[p.levels[factor_a]][p.levels[factor_b]].push(v);
            }
        }
        Ok(Self {
            factor_a: fa.name.clone(),
            factor_b: fb.name.clone(),
            cells,
        })
    }
}

/// Balanced two-way ANOVA with interaction.
pub fn two_way_anova(data: &CellData) -> Result<AnovaTable, ModelError> {
    let a = data.cells.len();
    let b = data.cells.first().map_or(0, Vec::len);
    if a < 2 || b < 2 || data.cells.iter().any(|row| row.len() != b) {
        return Err(ModelError::TooFewGroups(a.min(b)));
    }
    let reps = data.cells[0][0].len();
    for (i, row) in data.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if cell.len() != reps {
                return Err(ModelError::Unbalanced {
                    cell: (i, j),
                    expected: reps,
                    found: cell.len(),
                });
            }
        }
    }
    if reps < 2 {
        return Err(ModelError::NoErrorDf);
    }
    let r = reps as f64;
    let n_obs = a * b * reps;
    let cell_mean = |i: usize, j: usize| data.cells[i][j].iter().sum::<f64>() / r;
    let means: Vec<Vec<f64>> = (0..a).map(|i| (0..b).map(|j| cell_mean(i, j)).collect()).collect();
    let grand = means.iter().flatten().sum::<f64>() / (a * b) as f64;
    let a_means: Vec<f64> = means.iter().map(|row| row.iter().sum::<f64>() / b as f64).collect();
    let b_means: Vec<f64> = (0..b)
        .map(|j| means.iter().map(|row| row[j]).sum::<f64>() / a as f64)
        .collect();

    let ss_a = r * b as f64 * a_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = r * a as f64 * b_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_err = 0.0;
    let mut ss_total = 0.0;
    for i in 0..a {
        for j in 0..b {
            ss_ab += r * (means[i][j] - a_means[i] - b_means[j] + grand).powi(2);
            for v in &data.cells[i][j] {
                ss_err += (v - means[i][j]).powi(2);
                ss_total += (v - grand).powi(2);
            }
        }
    }
    let df_err = n_obs - a * b;
    let mse = ss_err / df_err as f64;
    Ok(AnovaTable {
        rows: vec![
            effect_row(&data.factor_a, ss_a, a - 1, mse, df_err)?,
            effect_row(&data.factor_b, ss_b, b - 1, mse, df_err)?,
            effect_row(
                &format!("{} x {}", data.factor_a, data.factor_b),
                ss_ab,
                (a - 1) * (b - 1),
                mse,
                df_err,
            )?,
            error_row(ss_err, df_err),
        ],
        n_obs,
        ss_total,
    })
}

/// Between-level sum of squares of a factor from cell means alone, for a
/// balanced layout with `reps` observations per cell.
pub fn factor_ss_from_cell_means(cell_means: &[f64], groups: &[Vec<usize>], reps: usize) -> f64 {
    let grand = cell_means.iter().sum::<f64>() / cell_means.len() as f64;
    groups
        .iter()
        .map(|g| {
            let m = g.iter().map(|&i| cell_means[i]).sum::<f64>() / g.len() as f64;
            (g.len() * reps) as f64 * (m - grand).powi(2)
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosthocPair {
    pub i: usize,
    pub j: usize,
    pub diff: f64,
    pub t: f64,
    pub p: f64,
}

/// Upper-triangular LSD probabilities between factor levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosthocMatrix {
    pub levels: usize,
    pub pairs: Vec<PosthocPair>,
}

impl PosthocMatrix {
    pub fn p(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs.iter().find(|x| x.i == i && x.j == j).map(|x| x.p)
    }
}

/// Fisher LSD: `t = (m_i - m_j) / sqrt(2 mse / reps)` at the error df.
pub fn lsd_posthoc(
    means: &[f64],
    reps: usize,
    mse: f64,
    df_error: usize,
) -> Result<PosthocMatrix, ModelError> {
    if !(mse > 0.0 && mse.is_finite()) {
        return Err(ModelError::InvalidMse(mse));
    }
    if reps == 0 {
        return Err(ModelError::NoReplicates);
    }
    if df_error == 0 {
        return Err(ModelError::NoErrorDf);
    }
    let se = (2.0 * mse / reps as f64).sqrt();
    let mut pairs = Vec::new();
    for i in 0..means.len() {
        for j in (i + 1)..means.len() {
            let diff = means[i] - means[j];
            let t = diff / se;
            pairs.push(PosthocPair {
                i,
                j,
                diff,
                t,
                p: t_tail(t, df_error as f64)?,
            });
        }
    }
    Ok(PosthocMatrix {
        levels: means.len(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_way_hand_decomposition() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let t = one_way_anova(&groups).unwrap();
        // grand 5; means 2,5,8 -> between 3*(9+0+9)=54; within 3*2=6
        let b = t.row("Between").unwrap();
        assert!((b.ss - 54.0).abs() < 1e-12);
        assert_eq!(b.df, 2);
        assert!((t.error().ss - 6.0).abs() < 1e-12);
        assert!((b.f.unwrap() - 27.0).abs() < 1e-12);
        assert!((t.ss_total - 60.0).abs() < 1e-12);
    }

    #[test]
    fn one_way_equal_means() {
        let t = one_way_anova(&[vec![1.0, 3.0], vec![2.0, 2.0]]).unwrap();
        let b = &t.rows[0];
        assert_eq!(b.f, Some(0.0));
        assert_eq!(b.p, Some(1.0));
    }

    #[test]
    fn one_way_errors() {
        assert_eq!(one_way_anova(&[vec![1.0]]), Err(ModelError::TooFewGroups(1)));
        assert_eq!(one_way_anova(&[vec![1.0], vec![]]), Err(ModelError::EmptyGroup(1)));
    }

    #[test]
    fn constant_two_way_has_zero_effects() {
        let data = CellData {
            factor_a: "A".into(),
            factor_b: "B".into(),
            cells: vec![vec![vec![0.5; 3]; 2]; 2],
        };
        let t = two_way_anova(&data).unwrap();
        for row in &t.rows[..3] {
            assert_eq!(row.ss, 0.0);
            assert_eq!(row.f, Some(0.0));
        }
    }

    #[test]
    fn unbalanced_rejected() {
        let mut cells = vec![vec![vec![1.0, 2.0]; 2]; 2];
        cells[1][0].push(3.0);
        let data = CellData {
            factor_a: "A".into(),
            factor_b: "B".into(),
            cells,
        };
        assert!(matches!(two_way_anova(&data), Err(ModelError::Unbalanced { cell: (1, 0), .. })));
    }

    #[test]
    fn lsd_identical_means() {
        let m = lsd_posthoc(&[0.2, 0.2, 0.2], 10, 0.01, 27).unwrap();
        assert!(m.pairs.iter().all(|p| p.p == 1.0));
        assert!(lsd_posthoc(&[0.1, 0.2], 10, 0.0, 5).is_err());
    }

    #[test]
    fn lsd_two_levels_matches_pooled_t_test() {
        let a = [1.0, 2.0, 4.0, 5.0];
        let b = [3.0, 5.0, 6.0, 8.0];
        let t = one_way_anova(&[a.to_vec(), b.to_vec()]).unwrap();
        let (mse, dfe) = (t.error().mss, t.error().df);
        let ma = a.iter().sum::<f64>() / 4.0;
        let mb = b.iter().sum::<f64>() / 4.0;
        let lsd = lsd_posthoc(&[ma, mb], 4, mse, dfe).unwrap();
        // Pooled two-sample t with the same pooled variance.
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / 3.0;
        let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / 3.0;
        let sp = (0.5 * (va + vb)).sqrt();
        let t_direct = (ma - mb) / (sp * (0.5f64).sqrt());
        assert!((lsd.pairs[0].t - t_direct).abs() < 1e-12);
        // and the squared t equals the one-way F
        assert!((lsd.pairs[0].t.powi(2) - t.rows[0].f.unwrap()).abs() < 1e-10);
        assert!((lsd.pairs[0].p - t.rows[0].p.unwrap()).abs() < 1e-10);
    }
}
