//! Pairwise-comparison judgments, eigenvector and geometric-mean priorities,
//! and Saaty consistency diagnostics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{power_iteration, Matrix, NumericsError, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AhpError {
    #[error("intensity {intensity} is outside the 1..=9 scale")]
    IntensityOutOfRange { intensity: u8 },
    #[error("intensity {intensity} with favored={favored} breaks the no-preference rule")]
    InconsistentGrade { intensity: u8, favored: Favored },
    #[error("a comparison needs at least two items, got {0}")]
    TooFewItems(usize),
    #[error("item index {index} out of range for {n} items")]
    ItemOutOfRange { index: usize, n: usize },
    #[error("item {0} cannot be compared with itself")]
    SelfComparison(usize),
    #[error("pair ({0}, {1}) judged more than once")]
    DuplicatePair(usize, usize),
    #[error("judgments incomplete, missing pairs {missing:?}")]
    Incomplete { missing: Vec<(usize, usize)> },
    #[error("entry ({row}, {col}) = {value} is not a valid positive judgment")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("entries ({row}, {col}) and ({col}, {row}) are not reciprocal")]
    NotReciprocal { row: usize, col: usize },
    #[error("no random index is tabulated for n = {0}")]
    RandomIndexUnavailable(usize),
    #[error("CR cutoff must be positive, got {0}")]
    InvalidCutoff(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which side of a questionnaire row the respondent leaned toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Favored {
    Left,
    Right,
    None,
}

impl fmt::Display for Favored {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Favored::Left => "left",
            Favored::Right => "right",
            Favored::None => "none",
        })
    }
}

impl std::str::FromStr for Favored {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Favored::Left),
            "right" => Ok(Favored::Right),
            "none" => Ok(Favored::None),
            other => Err(format!("unknown favored value '{other}'")),
        }
    }
}

/// One grading on the bipolar 9-point preference scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGrade", into = "RawGrade")]
pub struct SaatyGrade {
    intensity: u8,
    favored: Favored,
}

#[derive(Serialize, Deserialize)]
struct RawGrade {
    intensity: u8,
    favored: Favored,
}

impl TryFrom<RawGrade> for SaatyGrade {
    type Error = AhpError;

    fn try_from(r: RawGrade) -> Result<Self, AhpError> {
        SaatyGrade::new(r.intensity, r.favored)
    }
}

impl From<SaatyGrade> for RawGrade {
    fn from(g: SaatyGrade) -> Self {
        RawGrade {
            intensity: g.intensity,
            favored: g.favored,
        }
    }
}

/// Verbal anchors of the questionnaire, strongest first.
pub const SCALE_ANCHORS: [(&str, u8); 5] = [
    ("Extremely preferred", 9),
    ("Very strongly preferred", 7),
    ("Strongly preferred", 5),
    ("Moderately preferred", 3),
    ("No preference", 1),
];

impl SaatyGrade {
    pub const NO_PREFERENCE: SaatyGrade = SaatyGrade {
        intensity: 1,
        favored: Favored::None,
    };

    pub fn new(intensity: u8, favored: Favored) -> Result<Self, AhpError> {
        if !(1..=9).contains(&intensity) {
            return Err(AhpError::IntensityOutOfRange { intensity });
        }
        if (favored == Favored::None) != (intensity == 1) {
            return Err(AhpError::InconsistentGrade { intensity, favored });
        }
        Ok(Self { intensity, favored })
    }

    pub fn left(intensity: u8) -> Result<Self, AhpError> {
        Self::new(intensity, Favored::Left)
    }

    pub fn right(intensity: u8) -> Result<Self, AhpError> {
        Self::new(intensity, Favored::Right)
    }

    pub fn intensity(&self) -> u8 {
        self.intensity
    }

    pub fn favored(&self) -> Favored {
        self.favored
    }

    /// Maps a questionnaire cell (0 = leftmost "Extremely", 4 = center,
    /// 8 = rightmost "Extremely") to its grade.
    pub fn from_cell(cell: usize) -> Option<Self> {
        const INTENSITY: [u8; 9] = [9, 7, 5, 3, 1, 3, 5, 7, 9];
        let intensity = *INTENSITY.get(cell)?;
        let favored = match cell {
            0..=3 => Favored::Left,
            4 => Favored::None,
            _ => Favored::Right,
        };
        Some(Self { intensity, favored })
    }

    /// Inverse of [`SaatyGrade::from_cell`]; `None` for the even intensities
    /// the questionnaire never produces.
    pub fn cell(&self) -> Option<usize> {
        (0..9).find(|&c| Self::from_cell(c) == Some(*self))
    }

    /// Matrix entry `a_ij` for this grade given item `i` on the left.
    pub fn ratio(&self) -> f64 {
        match self.favored {
            Favored::Left => self.intensity as f64,
            Favored::Right => 1.0 / self.intensity as f64,
            Favored::None => 1.0,
        }
    }

    /// The same judgment seen from the other side.
    pub fn mirrored(&self) -> Self {
        let favored = match self.favored {
            Favored::Left => Favored::Right,
            Favored::Right => Favored::Left,
            Favored::None => Favored::None,
        };
        Self {
            intensity: self.intensity,
            favored,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub left: usize,
    pub right: usize,
    pub grade: SaatyGrade,
}

impl Judgment {
    pub fn new(left: usize, right: usize, grade: SaatyGrade) -> Self {
        Self { left, right, grade }
    }
}

/// Positive reciprocal comparison matrix with unit diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct PairwiseMatrix {
    a: Matrix,
}

const RECIPROCITY_TOL: f64 = 1e-12;

impl TryFrom<Matrix> for PairwiseMatrix {
    type Error = AhpError;

    fn try_from(m: Matrix) -> Result<Self, AhpError> {
        Self::from_matrix(m)
    }
}

impl From<PairwiseMatrix> for Matrix {
    fn from(p: PairwiseMatrix) -> Self {
        p.a
    }
}

impl PairwiseMatrix {
    /// Builds from upper-triangle ratios `upper(i, j)` for `i < j`; the lower
    /// triangle is filled with exact reciprocals.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Result<Self, AhpError> {
        if n < 1 {
            return Err(AhpError::TooFewItems(n));
        }
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = upper(i, j);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(AhpError::InvalidEntry { row: i, col: j, value: v });
                }
                a[(i, j)] = v;
                a[(j, i)] = 1.0 / v;
            }
        }
        Ok(Self { a })
    }

    /// Validates a full matrix: positive, unit diagonal, reciprocal.
    pub fn from_matrix(m: Matrix) -> Result<Self, AhpError> {
        if !m.is_square() {
            return Err(NumericsError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            }
            .into());
        }
        let n = m.rows();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !(v > 0.0 && v.is_finite()) || (i == j && v != 1.0) {
                    return Err(AhpError::InvalidEntry { row: i, col: j, value: v });
                }
                if (v * m[(j, i)] - 1.0).abs() > RECIPROCITY_TOL {
                    return Err(AhpError::NotReciprocal { row: i, col: j });
                }
            }
        }
        Self::from_upper(n, |i, j| m[(i, j)])
    }

    /// Consistent matrix `a_ij = w_i / w_j`.
    pub fn from_weights(w: &[f64]) -> Result<Self, AhpError> {
        Self::from_upper(w.len(), |i, j| w[i] / w[j])
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let v = self.a[(i, j)];
        debug_assert!((v * self.a[(j, i)] - 1.0).abs() <= RECIPROCITY_TOL);
        v
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.a
    }

    /// Largest `|a_ij a_ji - 1|`; zero up to rounding by construction.
    pub fn reciprocity_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.a[(i, j)] * self.a[(j, i)] - 1.0).abs());
            }
        }
        worst
    }

    /// Item indices rearranged so that new item `k` is old item `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let a = Matrix::from_fn(n, n, |i, j| self.a[(perm[i], perm[j])]);
        Self { a }
    }
}

/// Builds the comparison matrix for `n` items from exactly one judgment per
/// unordered pair.
pub fn matrix_from_judgments(n: usize, judgments: &[Judgment]) -> Result<PairwiseMatrix, AhpError> {
    if n < 2 {
        return Err(AhpError::TooFewItems(n));
    }
    let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for jd in judgments {
        for &index in &[jd.left, jd.right] {
            if index >= n {
                return Err(AhpError::ItemOutOfRange { index, n });
            }
        }
        if jd.left == jd.right {
            return Err(AhpError::SelfComparison(jd.left));
        }
        let (key, ratio) = if jd.left < jd.right {
            ((jd.left, jd.right), jd.grade.ratio())
        } else {
            ((jd.right, jd.left), jd.grade.mirrored().ratio())
        };
        if upper.insert(key, ratio).is_some() {
            return Err(AhpError::DuplicatePair(key.0, key.1));
        }
    }
    let missing = missing_pairs(n, upper.keys().copied());
    if !missing.is_empty() {
        return Err(AhpError::Incomplete { missing });
    }
    PairwiseMatrix::from_upper(n, |i, j| upper[&(i, j)])
}

/// Unordered pairs `(i, j)`, `i < j`, absent from `present`.
pub fn missing_pairs(n: usize, present: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    let present: std::collections::BTreeSet<(usize, usize)> = present
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    all_pairs(n).into_iter().filter(|p| !present.contains(p)).collect()
}

/// All `n(n-1)/2` unordered pairs in lexicographic order.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

/// Relative weights, strictly positive and summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorityVector(Vec<f64>);

impl PriorityVector {
    /// Validates positivity and unit sum (within `1e-9`) and renormalizes.
    pub fn new(weights: Vec<f64>) -> Result<Self, AhpError> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(AhpError::InvalidEntry { row: i, col: 0, value: w });
            }
        }
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(AhpError::InvalidEntry {
                row: 0,
                col: 0,
                value: total,
            });
        }
        Ok(Self::normalized(weights))
    }

    /// Accepts any strictly positive weights and rescales them to unit sum,
    /// e.g. values read back from rounded exports.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self, AhpError> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(AhpError::InvalidEntry { row: i, col: 0, value: w });
            }
        }
        if weights.is_empty() {
            return Err(AhpError::TooFewItems(0));
        }
        Ok(Self::normalized(weights))
    }

    fn normalized(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        Self(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Item indices from most to least preferred; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]));
        idx
    }
}

impl TryFrom<Vec<f64>> for PriorityVector {
    type Error = AhpError;

    fn try_from(v: Vec<f64>) -> Result<Self, AhpError> {
        Self::new(v)
    }
}

impl From<PriorityVector> for Vec<f64> {
    fn from(p: PriorityVector) -> Self {
        p.0
    }
}

/// Random consistency index for `n` items (Saaty 1980), `n = 1..=10`.
pub fn random_index(n: usize) -> Result<f64, AhpError> {
    const RI: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];
    n.checked_sub(1)
        .and_then(|i| RI.get(i).copied())
        .ok_or(AhpError::RandomIndexUnavailable(n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    /// False for `n < 3`, where CR is reported as zero.
    pub cr_defined: bool,
    pub acceptable_at_0_1: bool,
    pub acceptable_at_0_2: bool,
}

impl ConsistencyReport {
    pub fn from_lambda(n: usize, lambda_max: f64) -> Result<Self, AhpError> {
        let ri = random_index(n)?;
        // λ_max >= n holds exactly; clip rounding noise below it.
        let lambda_max = lambda_max.max(n as f64);
        let ci = if n > 1 {
            (lambda_max - n as f64) / (n as f64 - 1.0)
        } else {
            0.0
        };
        let cr_defined = n >= 3;
        let cr = if cr_defined { ci / ri } else { 0.0 };
        Ok(Self {
            n,
            lambda_max,
            ci,
            ri,
            cr,
            cr_defined,
            acceptable_at_0_1: cr <= 0.1,
            acceptable_at_0_2: cr <= 0.2,
        })
    }
}

/// Principal-eigenvector priorities and the consistency ratio.
pub fn ev_priorities(m: &PairwiseMatrix) -> Result<(PriorityVector, ConsistencyReport), AhpError> {
    let pair = power_iteration(m.as_matrix(), DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER)?;
    let weights = PriorityVector::normalized(pair.vector);
    let report = ConsistencyReport::from_lambda(m.n(), pair.value)?;
    Ok((weights, report))
}

/// Logarithmic least squares priorities: normalized row geometric means.
pub fn llsm_priorities(m: &PairwiseMatrix) -> PriorityVector {
    let n = m.n();
    let gm: Vec<f64> = (0..n)
        .map(|i| ((0..n).map(|j| m.get(i, j).ln()).sum::<f64>() / n as f64).exp())
        .collect();
    PriorityVector::normalized(gm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrFilter<S> {
    pub retained: Vec<S>,
    pub excluded: Vec<S>,
}

/// Keeps subjects whose consistency ratio does not exceed `cutoff`.
pub fn filter_by_cr<S: Clone>(
    records: &[(S, ConsistencyReport)],
    cutoff: f64,
) -> Result<CrFilter<S>, AhpError> {
    if !(cutoff > 0.0) {
        return Err(AhpError::InvalidCutoff(cutoff));
    }
    let (keep, drop): (Vec<_>, Vec<_>) = records.iter().partition(|(_, r)| r.cr <= cutoff);
    Ok(CrFilter {
        retained: keep.into_iter().map(|(s, _)| s.clone()).collect(),
        excluded: drop.into_iter().map(|(s, _)| s.clone()).collect(),
    })
}

/// Triples `(i, j, k)` of fully judged items that break weak transitivity
/// (`i ⪰ j`, `j ⪰ k` but `k ≻ i`). `ratio(i, j)` returns the judged `a_ij`.
pub fn transitivity_violations(
    n: usize,
    ratio: impl Fn(usize, usize) -> Option<f64>,
) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (Some(ij), Some(jk), Some(ik)) = (ratio(i, j), ratio(j, k), ratio(i, k)) else {
                    continue;
                };
                let ki = 1.0 / ik;
                let forward = ij >= 1.0 && jk >= 1.0 && ki > 1.0;
                let backward = ij <= 1.0 && jk <= 1.0 && ki < 1.0;
                if forward || backward {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Pairs ordered by how far `a_ij` departs from the ratio implied by the
/// priorities, `|ln(a_ij w_j / w_i)|`, worst first.
pub fn most_inconsistent_pairs(m: &PairwiseMatrix, w: &PriorityVector) -> Vec<((usize, usize), f64)> {
    let w = w.weights();
    let mut out: Vec<((usize, usize), f64)> = all_pairs(m.n())
        .into_iter()
        .map(|(i, j)| ((i, j), (m.get(i, j) * w[j] / w[i]).ln().abs()))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}
