//! File formats: study JSON, judgment and weight CSVs, part-worth and
//! matrix fixtures, plus validation diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{
    all_pairs, random_index, ConsistencyReport, Favored, Judgment, PairwiseMatrix, PriorityVector, SaatyGrade,
};
use crate::conjoint::ConjointFit;
use crate::numerics::{Matrix, SymMatrix};
use crate::study::{Factor, ProfileStats, ProfileSummary, StudyDesign, StudyError, SubjectRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub struct FormatError {
    pub line: Option<u64>,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl FormatError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            column: None,
            message: message.into(),
        }
    }

    fn at(line: u64, column: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            column: column.map(str::to_string),
            message: message.into(),
        }
    }
}

impl From<csv::Error> for FormatError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line());
        Self {
            line,
            column: None,
            message: e.to_string(),
        }
    }
}

impl From<StudyError> for FormatError {
    fn from(e: StudyError) -> Self {
        Self::new(e.to_string())
    }
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros trimmed.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

// ---------------------------------------------------------------- study file

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyProfile {
    pub label: String,
    /// factor name → level name
    pub levels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub factors: Vec<Factor>,
    pub profiles: Vec<StudyProfile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl StudyFile {
    pub fn from_design(design: &StudyDesign) -> Self {
        let profiles = design
            .profiles()
            .iter()
            .map(|p| StudyProfile {
                label: p.label.clone(),
                levels: design
                    .factors()
                    .iter()
                    .zip(&p.levels)
                    .map(|(f, &l)| (f.name.clone(), f.levels[l].clone()))
                    .collect(),
                asset: None,
            })
            .collect();
        Self {
            name: None,
            factors: design.factors().to_vec(),
            profiles,
            metadata: BTreeMap::new(),
        }
    }

    pub fn signage() -> Self {
        let mut s = Self::from_design(&StudyDesign::signage());
        s.name = Some("digital-signage".into());
        for p in &mut s.profiles {
            p.asset = Some(format!("assets/{}.svg", p.label.to_lowercase()));
        }
        s
    }

    pub fn design(&self) -> Result<StudyDesign, FormatError> {
        let mut named = Vec::with_capacity(self.profiles.len());
        for p in &self.profiles {
            let mut levels = Vec::with_capacity(self.factors.len());
            for f in &self.factors {
                let l = p.levels.get(&f.name).ok_or_else(|| {
                    FormatError::new(format!("profile '{}' has no level for factor '{}'", p.label, f.name))
                })?;
                levels.push(l.as_str());
            }
            if let Some(extra) = p.levels.keys().find(|k| !self.factors.iter().any(|f| &f.name == *k)) {
                return Err(FormatError::new(format!(
                    "profile '{}' names unknown factor '{extra}'",
                    p.label
                )));
            }
            named.push((p.label.as_str(), levels));
        }
        Ok(StudyDesign::from_named(self.factors.clone(), &named)?)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: Self = serde_json::from_str(text).map_err(|e| FormatError {
            line: Some(e.line() as u64),
            column: Some(e.column().to_string()),
            message: e.to_string(),
        })?;
        file.design()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("study file serializes");
        s.push('\n');
        s
    }
}

// ----------------------------------------------------------------- judgments

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRow {
    pub subject_id: String,
    pub left: String,
    pub right: String,
    pub intensity: u8,
    pub favored: Favored,
    /// 1-based source line; 0 when not read from a file.
    #[serde(skip)]
    pub line: u64,
}

impl JudgmentRow {
    pub fn new(subject_id: &str, left: &str, right: &str, grade: SaatyGrade) -> Self {
        Self {
            subject_id: subject_id.into(),
            left: left.into(),
            right: right.into(),
            intensity: grade.intensity(),
            favored: grade.favored(),
            line: 0,
        }
    }
}

pub const JUDGMENT_HEADER: [&str; 5] = ["subject_id", "left", "right", "intensity", "favored"];

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn header_index(
    headers: &csv::StringRecord,
    required: &[&str],
    optional: &[&str],
) -> Result<BTreeMap<String, usize>, FormatError> {
    let mut idx = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        if !required.contains(&h) && !optional.contains(&h) {
            return Err(FormatError::at(1, Some(h), format!("unexpected column '{h}'")));
        }
        if idx.insert(h.to_string(), i).is_some() {
            return Err(FormatError::at(1, Some(h), format!("duplicate column '{h}'")));
        }
    }
    if let Some(missing) = required.iter().find(|r| !idx.contains_key(**r)) {
        return Err(FormatError::at(1, None, format!("missing required column '{missing}'")));
    }
    Ok(idx)
}

fn field<'a>(rec: &'a csv::StringRecord, idx: &BTreeMap<String, usize>, name: &str) -> &'a str {
    idx.get(name).and_then(|&i| rec.get(i)).unwrap_or("")
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_num<T: std::str::FromStr>(rec: &csv::StringRecord, idx: &BTreeMap<String, usize>, col: &str) -> Result<T, FormatError> {
    let raw = field(rec, idx, col);
    raw.parse()
        .map_err(|_| FormatError::at(line_of(rec), Some(col), format!("'{raw}' is not a valid number")))
}

/// Schema-level parse; semantic checks live in [`validate_judgments`].
pub fn read_judgments(text: &str) -> Result<Vec<JudgmentRow>, FormatError> {
    if text.trim().is_empty() {
        return Err(FormatError::at(1, None, "judgments file is empty (header expected)"));
    }
    let mut rdr = reader(text);
    let idx = header_index(rdr.headers()?, &JUDGMENT_HEADER, &[])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let favored_raw = field(&rec, &idx, "favored");
        let favored: Favored = favored_raw.parse().map_err(|_| {
            FormatError::at(line, Some("favored"), format!("'{favored_raw}' is not one of left, right, none"))
        })?;
        for col in ["subject_id", "left", "right"] {
            if field(&rec, &idx, col).is_empty() {
                return Err(FormatError::at(line, Some(col), "value is empty"));
            }
        }
        rows.push(JudgmentRow {
            subject_id: field(&rec, &idx, "subject_id").to_string(),
            left: field(&rec, &idx, "left").to_string(),
            right: field(&rec, &idx, "right").to_string(),
            intensity: parse_num(&rec, &idx, "intensity")?,
            favored,
            line,
        });
    }
    Ok(rows)
}

pub fn write_judgments(rows: &[JudgmentRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(JUDGMENT_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.subject_id.as_str(),
            &r.left,
            &r.right,
            &r.intensity.to_string(),
            &r.favored.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    UnknownProfile,
    SelfComparison,
    InvalidGrade,
    Duplicate,
    NonReciprocal,
    MissingPair,
    NoJudgments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(s) = &self.subject_id {
            write!(f, "subject {s}: ")?;
        }
        f.write_str(&self.message)
    }
}

struct Resolved {
    subject_id: String,
    judgment: Judgment,
    line: u64,
}

fn resolve(rows: &[JudgmentRow], design: &StudyDesign, diags: &mut Vec<Diagnostic>) -> Vec<Resolved> {
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let diag = |kind, message: String| Diagnostic {
            kind,
            subject_id: Some(r.subject_id.clone()),
            line: (r.line > 0).then_some(r.line),
            message,
        };
        let (Some(i), Some(j)) = (design.profile_index(&r.left), design.profile_index(&r.right)) else {
            let unknown = if design.profile_index(&r.left).is_none() { &r.left } else { &r.right };
            diags.push(diag(DiagnosticKind::UnknownProfile, format!("unknown profile '{unknown}'")));
            continue;
        };
        if i == j {
            diags.push(diag(DiagnosticKind::SelfComparison, format!("profile '{}' compared with itself", r.left)));
            continue;
        }
        match SaatyGrade::new(r.intensity, r.favored) {
            Ok(grade) => out.push(Resolved {
                subject_id: r.subject_id.clone(),
                judgment: Judgment::new(i, j, grade),
                line: r.line,
            }),
            Err(e) => diags.push(diag(DiagnosticKind::InvalidGrade, e.to_string())),
        }
    }
    out
}

/// Completeness, duplicate, reciprocity and schema-semantic checks. An empty
/// result means the file is clean.
pub fn validate_judgments(rows: &[JudgmentRow], design: &StudyDesign) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if rows.is_empty() {
        diags.push(Diagnostic {
            kind: DiagnosticKind::NoJudgments,
            subject_id: None,
            line: None,
            message: "no judgments present".into(),
        });
        return diags;
    }
    let resolved = resolve(rows, design, &mut diags);
    let labels = design.labels();
    let mut by_subject: BTreeMap<&str, Vec<&Resolved>> = BTreeMap::new();
    for r in &resolved {
        by_subject.entry(&r.subject_id).or_default().push(r);
    }
    let subjects: BTreeSet<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
    for subject in subjects {
        let list = by_subject.get(subject).cloned().unwrap_or_default();
        let mut seen: BTreeMap<(usize, usize), &Resolved> = BTreeMap::new();
        for r in list {
            let (i, j) = (r.judgment.left, r.judgment.right);
            let key = (i.min(j), i.max(j));
            if let Some(prev) = seen.get(&key) {
                let ratio = |x: &Resolved| {
                    if x.judgment.left == key.0 {
                        x.judgment.grade.ratio()
                    } else {
                        1.0 / x.judgment.grade.ratio()
                    }
                };
                let mirrored = prev.judgment.left != r.judgment.left;
                let (kind, what) = if mirrored && (ratio(prev) - ratio(r)).abs() > 1e-12 {
                    (DiagnosticKind::NonReciprocal, "contradicts the mirrored entry")
                } else {
                    (DiagnosticKind::Duplicate, "duplicates the entry")
                };
                diags.push(Diagnostic {
                    kind,
                    subject_id: Some(subject.to_string()),
                    line: (r.line > 0).then_some(r.line),
                    message: format!(
                        "pair {}-{} {what} on line {}",
                        labels[key.0], labels[key.1], prev.line
                    ),
                });
            } else {
                seen.insert(key, r);
            }
        }
        for (i, j) in all_pairs(design.n_items()) {
            if !seen.contains_key(&(i, j)) {
                diags.push(Diagnostic {
                    kind: DiagnosticKind::MissingPair,
                    subject_id: Some(subject.to_string()),
                    line: None,
                    message: format!("missing pair {}-{}", labels[i], labels[j]),
                });
            }
        }
    }
    diags
}

/// Per-subject comparison matrices, sorted by subject id. Fails with the
/// diagnostics when the rows are not clean.
pub fn subject_matrices(
    rows: &[JudgmentRow],
    design: &StudyDesign,
) -> Result<Vec<(String, PairwiseMatrix)>, Vec<Diagnostic>> {
    let diags = validate_judgments(rows, design);
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut ignored = Vec::new();
    let resolved = resolve(rows, design, &mut ignored);
    let mut by_subject: BTreeMap<String, Vec<Judgment>> = BTreeMap::new();
    for r in resolved {
        by_subject.entry(r.subject_id).or_default().push(r.judgment);
    }
    by_subject
        .into_iter()
        .map(|(s, js)| {
            crate::ahp::matrix_from_judgments(design.n_items(), &js)
                .map(|m| (s.clone(), m))
                .map_err(|e| {
                    vec![Diagnostic {
                        kind: DiagnosticKind::InvalidGrade,
                        subject_id: Some(s),
                        line: None,
                        message: e.to_string(),
                    }]
                })
        })
        .collect()
}

/// All pairs of a matrix as judgment rows on the questionnaire scale, left
/// item first. Entries off the 1..9 grid are rounded to the nearest grade.
pub fn rows_from_matrix(subject_id: &str, m: &PairwiseMatrix, design: &StudyDesign) -> Vec<JudgmentRow> {
    let labels = design.labels();
    all_pairs(m.n())
        .into_iter()
        .map(|(i, j)| {
            let a = m.get(i, j);
            let (intensity, favored) = if a >= 1.0 {
                (a.round().clamp(1.0, 9.0) as u8, Favored::Left)
            } else {
                ((1.0 / a).round().clamp(1.0, 9.0) as u8, Favored::Right)
            };
            let favored = if intensity == 1 { Favored::None } else { favored };
            JudgmentRow {
                subject_id: subject_id.into(),
                left: labels[i].into(),
                right: labels[j].into(),
                intensity,
                favored,
                line: 0,
            }
        })
        .collect()
}

// ------------------------------------------------------------------- weights

pub const WEIGHTS_HEADER: [&str; 4] = ["subject_id", "profile", "weight", "cr"];

pub fn write_weights(records: &[SubjectRecord], design: &StudyDesign) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(WEIGHTS_HEADER).expect("in-memory write");
    for r in records {
        let cr = r.consistency.as_ref().map(|c| fmt6(c.cr)).unwrap_or_default();
        for (label, v) in design.labels().iter().zip(r.weights.weights()) {
            w.write_record([r.subject_id.as_str(), label, &fmt6(*v), &cr]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Weights are renormalized to unit sum after the 6-digit round trip; a CR
/// value restores a consistency report with λ = n + CR·RI·(n − 1).
pub fn read_weights(text: &str, design: &StudyDesign) -> Result<Vec<SubjectRecord>, FormatError> {
    let mut rdr = reader(text);
    let idx = header_index(rdr.headers()?, &WEIGHTS_HEADER[..3], &["cr"])?;
    let n = design.n_items();
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, (Vec<Option<f64>>, Option<f64>, u64)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let subject = field(&rec, &idx, "subject_id").to_string();
        let label = field(&rec, &idx, "profile");
        let p = design
            .profile_index(label)
            .ok_or_else(|| FormatError::at(line, Some("profile"), format!("unknown profile '{label}'")))?;
        let weight: f64 = parse_num(&rec, &idx, "weight")?;
        let cr = match field(&rec, &idx, "cr") {
            "" => None,
            _ => Some(parse_num::<f64>(&rec, &idx, "cr")?),
        };
        let entry = values.entry(subject.clone()).or_insert_with(|| {
            order.push(subject.clone());
            (vec![None; n], None, line)
        });
        if entry.0[p].replace(weight).is_some() {
            return Err(FormatError::at(line, Some("profile"), format!("duplicate weight for {label}")));
        }
        entry.1 = entry.1.or(cr);
    }
    order
        .into_iter()
        .map(|s| {
            let (w, cr, line) = values.remove(&s).expect("recorded subject");
            let w: Vec<f64> = w
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        FormatError::at(line, None, format!("subject {s} lacks a weight for {}", design.labels()[i]))
                    })
                })
                .collect::<Result<_, _>>()?;
            let weights = PriorityVector::from_unnormalized(w)
                .map_err(|e| FormatError::at(line, Some("weight"), format!("subject {s}: {e}")))?;
            let mut rec = SubjectRecord::new(s, weights);
            if let Some(cr) = cr {
                let ri = random_index(n).map_err(|e| FormatError::new(e.to_string()))?;
                let lambda = n as f64 + cr * ri * (n as f64 - 1.0);
                rec.consistency = ConsistencyReport::from_lambda(n, lambda).ok();
            }
            Ok(rec)
        })
        .collect()
}

// --------------------------------------------------------------- part-worths

pub const PART_WORTH_HEADER: [&str; 4] = ["subject_id", "factor", "level", "part_worth"];
pub const FIT_STATS_HEADER: [&str; 4] = ["subject_id", "r_squared", "f_stat", "p_value"];

pub fn write_part_worths(fits: &[ConjointFit]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PART_WORTH_HEADER).expect("in-memory write");
    for f in fits {
        for fw in &f.factors {
            for (level, v) in fw.levels.iter().zip(&fw.worths) {
                w.write_record([f.subject_id.as_str(), &fw.factor, level, &fmt6(*v)])
                    .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Reads long-format part-worths. The intercept is the mean profile weight
/// `1/n` of unit-sum weights.
pub fn read_part_worths(text: &str, design: &StudyDesign) -> Result<Vec<ConjointFit>, FormatError> {
    let mut rdr = reader(text);
    let idx = header_index(rdr.headers()?, &PART_WORTH_HEADER, &[])?;
    let mut order = Vec::new();
    let mut table: BTreeMap<String, (Vec<Vec<Option<f64>>>, u64)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let subject = field(&rec, &idx, "subject_id").to_string();
        let fname = field(&rec, &idx, "factor");
        let fi = design
            .factor_index(fname)
            .ok_or_else(|| FormatError::at(line, Some("factor"), format!("unknown factor '{fname}'")))?;
        let lname = field(&rec, &idx, "level");
        let li = design.factors()[fi]
            .level_index(lname)
            .ok_or_else(|| FormatError::at(line, Some("level"), format!("unknown level '{lname}' of {fname}")))?;
        let v: f64 = parse_num(&rec, &idx, "part_worth")?;
        let entry = table.entry(subject.clone()).or_insert_with(|| {
            order.push(subject.clone());
            let empty = design.factors().iter().map(|f| vec![None; f.levels.len()]).collect();
            (empty, line)
        });
        if entry.0[fi][li].replace(v).is_some() {
            return Err(FormatError::at(line, Some("level"), format!("duplicate part-worth for {fname}.{lname}")));
        }
    }
    let intercept = 1.0 / design.n_items() as f64;
    order
        .into_iter()
        .map(|s| {
            let (worths, line) = table.remove(&s).expect("recorded subject");
            let worths = worths
                .into_iter()
                .enumerate()
                .map(|(fi, levels)| {
                    levels
                        .into_iter()
                        .enumerate()
                        .map(|(li, v)| {
                            v.ok_or_else(|| {
                                let f = &design.factors()[fi];
                                FormatError::at(line, None, format!("subject {s} lacks {}.{}", f.name, f.levels[li]))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            ConjointFit::from_part_worths(s, design, intercept, worths).map_err(|e| FormatError::at(line, None, e.to_string()))
        })
        .collect()
}

pub fn write_fit_stats(fits: &[ConjointFit]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FIT_STATS_HEADER).expect("in-memory write");
    let opt = |v: Option<f64>| v.map(fmt6).unwrap_or_default();
    for f in fits {
        w.write_record([f.subject_id.as_str(), &opt(f.r_squared), &opt(f.f_stat), &opt(f.p_value)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Attaches R², F and p from a stats CSV to already-read fits.
pub fn read_fit_stats(text: &str, fits: &mut [ConjointFit]) -> Result<(), FormatError> {
    let mut rdr = reader(text);
    let idx = header_index(rdr.headers()?, &FIT_STATS_HEADER, &[])?;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let subject = field(&rec, &idx, "subject_id");
        let fit = fits
            .iter_mut()
            .find(|f| f.subject_id == subject)
            .ok_or_else(|| FormatError::at(line, Some("subject_id"), format!("unknown subject '{subject}'")))?;
        fit.r_squared = Some(parse_num(&rec, &idx, "r_squared")?);
        fit.f_stat = Some(parse_num(&rec, &idx, "f_stat")?);
        fit.p_value = Some(parse_num(&rec, &idx, "p_value")?);
    }
    Ok(())
}

// ------------------------------------------------------------------ summaries

pub const SUMMARY_HEADER: [&str; 10] = [
    "profile",
    "mean",
    "geometric_mean",
    "std_dev",
    "mean_std_error",
    "min",
    "max",
    "median",
    "range",
    "n",
];

pub fn write_summary(summary: &ProfileSummary, labels: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for (l, s) in labels.iter().zip(&summary.profiles) {
        let cells = [s.mean, s.geometric_mean, s.std_dev, s.mean_std_error, s.min, s.max, s.median, s.range];
        let mut rec: Vec<String> = vec![l.to_string()];
        rec.extend(cells.iter().map(|v| fmt6(*v)));
        rec.push(summary.n_subjects.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Reads published descriptive statistics in design profile order. `range`
/// defaults to max − min, `n` to `default_n`.
pub fn read_summary(text: &str, design: &StudyDesign, default_n: usize) -> Result<ProfileSummary, FormatError> {
    let mut rdr = reader(text);
    let idx = header_index(rdr.headers()?, &SUMMARY_HEADER[..8], &["range", "n"])?;
    let mut stats: Vec<Option<ProfileStats>> = vec![None; design.n_items()];
    let mut n_subjects = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let label = field(&rec, &idx, "profile");
        let p = design
            .profile_index(label)
            .ok_or_else(|| FormatError::at(line, Some("profile"), format!("unknown profile '{label}'")))?;
        let min: f64 = parse_num(&rec, &idx, "min")?;
        let max: f64 = parse_num(&rec, &idx, "max")?;
        let range = match field(&rec, &idx, "range") {
            "" => max - min,
            _ => parse_num(&rec, &idx, "range")?,
        };
        if !field(&rec, &idx, "n").is_empty() {
            n_subjects = Some(parse_num::<usize>(&rec, &idx, "n")?);
        }
        stats[p] = Some(ProfileStats {
            mean: parse_num(&rec, &idx, "mean")?,
            geometric_mean: parse_num(&rec, &idx, "geometric_mean")?,
            std_dev: parse_num(&rec, &idx, "std_dev")?,
            mean_std_error: parse_num(&rec, &idx, "mean_std_error")?,
            min,
            max,
            median: parse_num(&rec, &idx, "median")?,
            range,
        });
    }
    let profiles = stats
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| FormatError::new(format!("no statistics for {}", design.labels()[i]))))
        .collect::<Result<_, _>>()?;
    Ok(ProfileSummary {
        n_subjects: n_subjects.unwrap_or(default_n),
        profiles,
    })
}

// ------------------------------------------------------------------ matrices

/// Square matrix with a label column and label header. Blank upper-triangle
/// cells are filled from the lower triangle.
pub fn read_labeled_matrix(text: &str) -> Result<(Vec<String>, SymMatrix), FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n = labels.len();
    if n == 0 {
        return Err(FormatError::at(1, None, "matrix header lists no labels"));
    }
    let mut cells = vec![vec![None; n]; n];
    let mut row = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if row >= n {
            return Err(FormatError::at(line, None, "more rows than header labels"));
        }
        if rec.get(0) != Some(labels[row].as_str()) {
            return Err(FormatError::at(
                line,
                Some(headers.get(0).unwrap_or("")),
                format!("row label '{}' should be '{}'", rec.get(0).unwrap_or(""), labels[row]),
            ));
        }
        for (j, cell) in rec.iter().skip(1).enumerate().take(n) {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| FormatError::at(line, Some(&labels[j]), format!("'{cell}' is not a valid number")))?;
            cells[row][j] = Some(v);
        }
        row += 1;
    }
    if row != n {
        return Err(FormatError::new(format!("expected {n} rows, found {row}")));
    }
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = match (cells[i][j], cells[j][i]) {
                (Some(v), _) | (None, Some(v)) => v,
                (None, None) => {
                    return Err(FormatError::new(format!("entry {}-{} is blank", labels[i], labels[j])));
                }
            };
        }
    }
    let sym = SymMatrix::new(m).map_err(|e| FormatError::new(e.to_string()))?;
    Ok((labels, sym))
}

pub fn write_labeled_matrix(labels: &[&str], m: &Matrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["profile".to_string()];
    header.extend(labels.iter().map(|s| s.to_string()));
    w.write_record(&header).expect("in-memory write");
    for (i, l) in labels.iter().enumerate() {
        let mut rec = vec![l.to_string()];
        rec.extend(m.row(i).iter().map(|v| fmt6(*v)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
