//! End-to-end analysis: judgments → priorities → CR filter → every enabled
//! analysis → a bundle of tables, CSV files and SVG plots.
//!
//! Each section runs on its own; a failing section is recorded in the bundle
//! and the remaining sections still run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use prefscope_core::ahp::filter_by_cr;
use prefscope_core::conjoint::{aggregate, fit_subject, simulate_btl, simulate_fcm, simulate_lpm};
use prefscope_core::factor::{ml_extract, oblique_rotate, schmid_leiman, varimax};
use prefscope_core::formats::{
    read_judgments, subject_matrices, write_fit_stats, write_part_worths, write_summary, write_weights,
};
use prefscope_core::linear::{
    effects_regression, factor_ss_from_cell_means, lsd_posthoc, two_way_anova, CellData, FactorCoding,
};
use prefscope_core::numerics::f_tail;
use prefscope_core::study::{covariance, summarize, to_correlation};
use prefscope_core::{
    ev_priorities, fmt6, ConjointFit, Diagnostic, EffectsCoding, MlOptions, ObliqueOptions, ProfileSummary,
    SimulationOptions, StudyDesign, StudyFile, SubjectRecord, SymMatrix,
};

use crate::plots::{bar_chart, predicted_vs_observed, BarChart};
use crate::table::{opt6, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    /// Subjects with CR above this are dropped before analysis.
    pub cr_cutoff: f64,
    /// Regression coding; derived from the design when unset.
    pub coding: Option<EffectsCoding>,
    pub simulation: SimulationOptions,
    /// Largest number of ML factors extracted.
    pub max_factors: usize,
    pub ml: MlOptions,
    /// Kaiser row normalization during varimax.
    pub kaiser: bool,
    /// Oblique rotation feeding the Schmid-Leiman step.
    pub oblique: ObliqueOptions,
    pub plots: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            cr_cutoff: 0.2,
            coding: None,
            simulation: SimulationOptions::default(),
            max_factors: 3,
            ml: MlOptions::default(),
            kaiser: true,
            oblique: ObliqueOptions::biquartimin(),
            plots: true,
        }
    }
}

/// Default effects coding: the signage coding for the signage factors,
/// otherwise −1/+1 or −1/0/+1 in level order.
pub fn default_coding(design: &StudyDesign) -> Result<EffectsCoding> {
    let signage = EffectsCoding::signage_default();
    let mut factors = Vec::new();
    for f in design.factors() {
        if let Some(c) = signage.factor(&f.name) {
            if f.levels.iter().all(|l| c.codes.contains_key(l)) && c.codes.len() == f.levels.len() {
                factors.push(c.clone());
                continue;
            }
        }
        let codes: &[i8] = match f.levels.len() {
            2 => &[-1, 1],
            3 => &[-1, 0, 1],
            n => bail!("factor {} has {n} levels; pass --coding explicitly", f.name),
        };
        factors.push(FactorCoding {
            factor: f.name.clone(),
            codes: f.levels.iter().cloned().zip(codes.iter().copied()).collect(),
        });
    }
    Ok(EffectsCoding::new(factors)?)
}

/// Data available to the analyses. Every field past the design is optional;
/// sections whose inputs are missing are skipped.
#[derive(Clone, Debug, Default)]
pub struct AnalysisInput {
    pub study: Option<StudyFile>,
    /// Every prioritized subject, before CR filtering.
    pub subjects: Option<Vec<SubjectRecord>>,
    pub summary: Option<ProfileSummary>,
    /// Published error term `(mse, df)` for summary-only ANOVA.
    pub published_error: Option<(f64, usize)>,
    pub fits: Option<Vec<ConjointFit>>,
    pub correlation: Option<SymMatrix>,
    /// Lines listed in the provenance section.
    pub provenance: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SectionKind {
    Consistency,
    Descriptives,
    Anova,
    Posthoc,
    Regression,
    Conjoint,
    Simulators,
    Factor,
    Hierarchical,
    Provenance,
}

impl SectionKind {
    pub const ALL: [SectionKind; 10] = [
        SectionKind::Consistency,
        SectionKind::Descriptives,
        SectionKind::Anova,
        SectionKind::Posthoc,
        SectionKind::Regression,
        SectionKind::Conjoint,
        SectionKind::Simulators,
        SectionKind::Factor,
        SectionKind::Hierarchical,
        SectionKind::Provenance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SectionKind::Consistency => "consistency",
            SectionKind::Descriptives => "descriptives",
            SectionKind::Anova => "anova",
            SectionKind::Posthoc => "posthoc",
            SectionKind::Regression => "regression",
            SectionKind::Conjoint => "conjoint",
            SectionKind::Simulators => "simulators",
            SectionKind::Factor => "factor",
            SectionKind::Hierarchical => "hierarchical",
            SectionKind::Provenance => "provenance",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SectionStatus {
    Ok,
    Skipped(String),
    Failed(String),
}

impl fmt::Display for SectionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectionStatus::Ok => f.write_str("ok"),
            SectionStatus::Skipped(m) => write!(f, "skipped: {m}"),
            SectionStatus::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub kind: SectionKind,
    pub status: SectionStatus,
    pub tables: Vec<Table>,
    /// Extra files keyed by relative path (plots, native-format exports).
    pub files: BTreeMap<String, String>,
}

impl Section {
    fn new(kind: SectionKind) -> Self {
        Self {
            kind,
            status: SectionStatus::Ok,
            tables: Vec::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn text(&self) -> String {
        let mut out = format!("== {} ({}) ==\n", self.kind.name(), self.status);
        for t in &self.tables {
            out.push('\n');
            out.push_str(&t.to_text());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub sections: Vec<Section>,
}

impl ReportBundle {
    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.sections.iter().flat_map(|s| &s.tables).find(|t| t.name == name)
    }

    pub fn failed(&self) -> Vec<&Section> {
        self.sections
            .iter()
            .filter(|s| matches!(s.status, SectionStatus::Failed(_)))
            .collect()
    }

    pub fn text(&self) -> String {
        self.sections.iter().map(Section::text).collect::<Vec<_>>().join("\n")
    }

    /// Every output file keyed by relative path: one CSV per table, the
    /// section files, `report.txt` and `sections.csv`.
    pub fn files(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut status = Table::new("sections", "Sections", &["section", "status", "message"]);
        for s in &self.sections {
            for t in &s.tables {
                out.insert(format!("{}.csv", t.name), t.to_csv());
            }
            out.extend(s.files.clone());
            let (st, msg) = match &s.status {
                SectionStatus::Ok => ("ok", String::new()),
                SectionStatus::Skipped(m) => ("skipped", m.clone()),
                SectionStatus::Failed(m) => ("failed", m.clone()),
            };
            status.push(vec![s.kind.name().into(), st.into(), msg]);
        }
        out.insert("sections.csv".into(), status.to_csv());
        out.insert("report.txt".into(), self.text());
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, content) in self.files() {
            let path = dir.join(&name);
            std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

/// Failure before any analysis can run; maps to exit code 1.
#[derive(Debug)]
pub enum InputError {
    Read(anyhow::Error),
    Diagnostics(Vec<Diagnostic>),
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Read(e) => write!(f, "{e:#}"),
            InputError::Diagnostics(d) => {
                writeln!(f, "{} validation diagnostic(s):", d.len())?;
                for x in d {
                    writeln!(f, "  {x}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for InputError {}

pub fn load_study(path: &Path) -> Result<StudyFile, InputError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(InputError::Read)?;
    StudyFile::parse(&text)
        .with_context(|| format!("{}", path.display()))
        .map_err(InputError::Read)
}

/// Eigenvector priorities and consistency for every subject in a judgments
/// file, sorted by subject id.
pub fn prioritize_judgments(text: &str, design: &StudyDesign) -> Result<Vec<SubjectRecord>, InputError> {
    let rows = read_judgments(text).map_err(|e| InputError::Read(anyhow!("judgments: {e}")))?;
    let matrices = subject_matrices(&rows, design).map_err(InputError::Diagnostics)?;
    matrices
        .into_iter()
        .map(|(id, m)| {
            let (w, c) = ev_priorities(&m).map_err(|e| InputError::Read(anyhow!("subject {id}: {e}")))?;
            let mut r = SubjectRecord::new(id, w);
            r.consistency = Some(c);
            Ok(r)
        })
        .collect()
}

/// Reads, validates and prioritizes, then runs every section.
pub fn run_pipeline(study: &Path, judgments: &Path, opts: &PipelineOptions) -> Result<ReportBundle, InputError> {
    let study = load_study(study)?;
    let design = study.design().map_err(|e| InputError::Read(e.into()))?;
    let text = std::fs::read_to_string(judgments)
        .with_context(|| format!("reading {}", judgments.display()))
        .map_err(InputError::Read)?;
    let subjects = prioritize_judgments(&text, &design)?;
    let input = AnalysisInput {
        study: Some(study),
        subjects: Some(subjects),
        ..AnalysisInput::default()
    };
    Ok(analyze(&input, opts, &SectionKind::ALL))
}

/// Inputs derived once from `AnalysisInput`, with errors kept for the
/// sections that need them.
struct Prepared {
    design: Result<StudyDesign, String>,
    retained: Option<Result<Vec<SubjectRecord>, String>>,
    summary: Option<Result<ProfileSummary, String>>,
    fits: Option<Result<Vec<ConjointFit>, String>>,
    correlation: Option<Result<SymMatrix, String>>,
}

fn prepare(input: &AnalysisInput, opts: &PipelineOptions) -> Prepared {
    let design = input
        .study
        .as_ref()
        .ok_or_else(|| "no study".to_string())
        .and_then(|s| s.design().map_err(|e| e.to_string()));
    let retained = input.subjects.as_ref().map(|subjects| {
        let pairs: Vec<(SubjectRecord, _)> = subjects
            .iter()
            .map(|r| (r.clone(), r.consistency.clone()))
            .filter_map(|(r, c)| c.map(|c| (r, c)))
            .collect();
        let kept = filter_by_cr(&pairs, opts.cr_cutoff).map_err(|e| e.to_string())?.retained;
        // records without a consistency report cannot be filtered and are kept
        let unscored = subjects.iter().filter(|r| r.consistency.is_none()).cloned();
        let mut all: Vec<SubjectRecord> = kept.into_iter().chain(unscored).collect();
        all.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        if all.is_empty() {
            return Err(format!("no subject has CR <= {}", fmt6(opts.cr_cutoff)));
        }
        Ok(all)
    });
    let summary = match (&input.summary, &retained) {
        (Some(s), _) => Some(Ok(s.clone())),
        (None, Some(r)) => Some(r.clone().and_then(|r| summarize(&r).map_err(|e| e.to_string()))),
        _ => None,
    };
    let fits = match (&input.fits, &retained) {
        (Some(f), _) => Some(Ok(f.clone())),
        (None, Some(r)) => Some(r.clone().and_then(|r| {
            let d = design.clone()?;
            r.iter().map(|x| fit_subject(x, &d).map_err(|e| e.to_string())).collect()
        })),
        _ => None,
    };
    let correlation = match (&input.correlation, &retained) {
        (Some(c), _) => Some(Ok(c.clone())),
        (None, Some(r)) => Some(r.clone().and_then(|r| {
            let cov = covariance(&r).map_err(|e| e.to_string())?;
            to_correlation(&cov).map_err(|e| e.to_string())
        })),
        _ => None,
    };
    Prepared {
        design,
        retained,
        summary,
        fits,
        correlation,
    }
}

enum Outcome {
    Done,
    Skip(String),
}

type SectionFn = fn(&AnalysisInput, &Prepared, &PipelineOptions, &mut Section) -> Result<Outcome>;

/// Runs the requested sections in order.
pub fn analyze(input: &AnalysisInput, opts: &PipelineOptions, kinds: &[SectionKind]) -> ReportBundle {
    let prep = prepare(input, opts);
    let sections = kinds
        .iter()
        .map(|&kind| {
            let run: SectionFn = match kind {
                SectionKind::Consistency => consistency_section,
                SectionKind::Descriptives => descriptives_section,
                SectionKind::Anova => anova_section,
                SectionKind::Posthoc => posthoc_section,
                SectionKind::Regression => regression_section,
                SectionKind::Conjoint => conjoint_section,
                SectionKind::Simulators => simulators_section,
                SectionKind::Factor => factor_section,
                SectionKind::Hierarchical => hierarchical_section,
                SectionKind::Provenance => provenance_section,
            };
            let mut s = Section::new(kind);
            match run(input, &prep, opts, &mut s) {
                Ok(Outcome::Done) => {}
                Ok(Outcome::Skip(why)) => s.status = SectionStatus::Skipped(why),
                Err(e) => s.status = SectionStatus::Failed(format!("{e:#}")),
            }
            s
        })
        .collect();
    ReportBundle { sections }
}

fn need<'a, T>(v: &'a Option<Result<T, String>>, what: &str) -> Result<Option<&'a T>> {
    match v {
        None => Ok(None),
        Some(Ok(x)) => Ok(Some(x)),
        Some(Err(e)) => Err(anyhow!("{what}: {e}")),
    }
}

fn design(prep: &Prepared) -> Result<&StudyDesign> {
    prep.design.as_ref().map_err(|e| anyhow!("{e}"))
}

fn consistency_section(input: &AnalysisInput, _: &Prepared, opts: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let Some(subjects) = &input.subjects else {
        return Ok(Outcome::Skip("no per-subject judgments".into()));
    };
    // reads the design from the study directly so a bad design still fails here
    let design = input.study.as_ref().ok_or_else(|| anyhow!("no study"))?.design()?;
    let mut t = Table::new(
        "consistency",
        "Consistency of each subject's comparisons",
        &["subject_id", "lambda_max", "ci", "cr", "retained"],
    );
    let mut kept = 0;
    for r in subjects {
        let row = match &r.consistency {
            Some(c) => {
                let keep = c.cr <= opts.cr_cutoff;
                kept += keep as usize;
                vec![
                    r.subject_id.clone(),
                    fmt6(c.lambda_max),
                    fmt6(c.ci),
                    fmt6(c.cr),
                    if keep { "yes" } else { "no" }.into(),
                ]
            }
            None => {
                kept += 1;
                vec![r.subject_id.clone(), String::new(), String::new(), String::new(), "yes".into()]
            }
        };
        t.push(row);
    }
    t.note(format!(
        "{kept} of {} subjects retained at CR <= {}",
        subjects.len(),
        fmt6(opts.cr_cutoff)
    ));
    s.tables.push(t);
    s.files.insert("weights.csv".into(), write_weights(subjects, &design));
    Ok(Outcome::Done)
}

fn descriptives_section(_: &AnalysisInput, prep: &Prepared, opts: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let Some(summary) = need(&prep.summary, "descriptives")? else {
        return Ok(Outcome::Skip("no weights or published summary".into()));
    };
    let design = design(prep)?;
    let labels = design.labels();
    let mut t = Table::new(
        "descriptives",
        &format!("Profile weights across {} subjects", summary.n_subjects),
        &["profile", "mean", "geometric_mean", "std_dev", "mean_std_error", "min", "max", "median"],
    );
    for (l, p) in labels.iter().zip(&summary.profiles) {
        t.push_values(l, &[p.mean, p.geometric_mean, p.std_dev, p.mean_std_error, p.min, p.max, p.median]);
    }
    s.tables.push(t);
    s.files.insert("summary.csv".into(), write_summary(summary, &labels));
    if opts.plots {
        s.files.insert("fig_mean_weights.svg".into(), mean_weight_plot(design, summary));
    }
    Ok(Outcome::Done)
}

/// Mean weights grouped by the second factor with one bar per level of the
/// first, error bars at one standard error.
fn mean_weight_plot(design: &StudyDesign, summary: &ProfileSummary) -> String {
    let factors = design.factors();
    let (chart_groups, chart_series, values) = if factors.len() >= 2 {
        let (g, ser) = (&factors[1], &factors[0]);
        let mut values = vec![vec![(0.0, 0.0); ser.levels.len()]; g.levels.len()];
        for (p, st) in design.profiles().iter().zip(&summary.profiles) {
            values[p.levels[1]][p.levels[0]] = (st.mean, st.mean_std_error);
        }
        (g.levels.clone(), ser.levels.clone(), values)
    } else {
        let labels: Vec<String> = design.labels().into_iter().map(str::to_string).collect();
        let values = summary.profiles.iter().map(|p| vec![(p.mean, p.mean_std_error)]).collect();
        (labels, vec!["mean".into()], values)
    };
    let title = match factors {
        [a, b, ..] => format!("Mean weight by {} and {} (error bars: 1 SE)", b.name, a.name),
        _ => "Mean weight by profile (error bars: 1 SE)".to_string(),
    };
    bar_chart(&BarChart {
        title: &title,
        y_label: "mean weight",
        groups: chart_groups,
        series: chart_series,
        values,
    })
}

fn two_factor(design: &StudyDesign) -> Result<()> {
    if design.factors().len() != 2 || !design.is_full_factorial() {
        bail!("needs a full-factorial two-factor design");
    }
    Ok(())
}

struct ErrorTerm {
    mse: f64,
    df: usize,
}

/// Level means of each factor and the replicates behind each.
fn level_means(design: &StudyDesign, summary: &ProfileSummary, factor: usize) -> (Vec<f64>, usize) {
    let means = summary.means();
    let groups = design.level_groups(factor);
    let m = groups
        .iter()
        .map(|g| g.iter().map(|&i| means[i]).sum::<f64>() / g.len() as f64)
        .collect();
    (m, summary.n_subjects * groups[0].len())
}

fn anova_table_rows(t: &mut Table, rows: &[prefscope_core::linear::AnovaRow]) {
    for r in rows {
        t.push(vec![
            r.source.clone(),
            fmt6(r.ss),
            r.df.to_string(),
            fmt6(r.mss),
            opt6(r.f),
            opt6(r.p),
        ]);
    }
}

fn error_term(prep: &Prepared, input: &AnalysisInput) -> Result<Option<ErrorTerm>> {
    if let Some(Ok(records)) = &prep.retained {
        let design = design(prep)?;
        let cells = CellData::from_records(design, records, 0, 1)?;
        let table = two_way_anova(&cells)?;
        let e = table.error();
        return Ok(Some(ErrorTerm { mse: e.mss, df: e.df }));
    }
    Ok(input.published_error.map(|(mse, df)| ErrorTerm { mse, df }))
}

fn anova_section(input: &AnalysisInput, prep: &Prepared, _: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let design = design(prep)?;
    if let Some(records) = need(&prep.retained, "subjects")? {
        two_factor(design)?;
        let table = two_way_anova(&CellData::from_records(design, records, 0, 1)?)?;
        let mut t = Table::new(
            "anova",
            &format!("Two-way ANOVA of profile weights ({} observations)", table.n_obs),
            &["source", "ss", "df", "ms", "f", "p"],
        );
        anova_table_rows(&mut t, &table.rows);
        t.note(format!("total SS {}", fmt6(table.ss_total)));
        s.tables.push(t);
        return Ok(Outcome::Done);
    }
    let Some(summary) = need(&prep.summary, "descriptives")? else {
        return Ok(Outcome::Skip("no weights or published summary".into()));
    };
    two_factor(design)?;
    let means = summary.means();
    let mut t = Table::new(
        "anova",
        &format!("Factor sums of squares from cell means ({} replicates per cell)", summary.n_subjects),
        &["source", "ss", "df", "ms", "f", "p"],
    );
    for (fi, f) in design.factors().iter().enumerate() {
        let ss = factor_ss_from_cell_means(&means, &design.level_groups(fi), summary.n_subjects);
        let df = f.levels.len() - 1;
        let ms = ss / df as f64;
        let (fs, p) = match input.published_error {
            Some((mse, edf)) => {
                let fs = ms / mse;
                (fmt6(fs), fmt6(f_tail(fs, df as f64, edf as f64)?))
            }
            None => (String::new(), String::new()),
        };
        t.push(vec![f.name.clone(), fmt6(ss), df.to_string(), fmt6(ms), fs, p]);
    }
    match input.published_error {
        Some((mse, df)) => {
            t.push(vec!["Error".into(), fmt6(mse * df as f64), df.to_string(), fmt6(mse), String::new(), String::new()]);
            t.note("error term taken from the published table; per-subject data are not available");
        }
        None => t.note("no error term: per-subject data are not available"),
    }
    s.tables.push(t);
    Ok(Outcome::Done)
}

fn posthoc_section(input: &AnalysisInput, prep: &Prepared, _: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let design = design(prep)?;
    let Some(summary) = need(&prep.summary, "descriptives")? else {
        return Ok(Outcome::Skip("no weights or published summary".into()));
    };
    two_factor(design)?;
    let Some(err) = error_term(prep, input)? else {
        return Ok(Outcome::Skip("no error term".into()));
    };
    for (fi, f) in design.factors().iter().enumerate() {
        let (means, reps) = level_means(design, summary, fi);
        let m = lsd_posthoc(&means, reps, err.mse, err.df)?;
        let mut t = Table::new(
            &format!("posthoc_{}", f.name),
            &format!("LSD post-hoc between {} levels", f.name),
            &["level_i", "level_j", "mean_diff", "t", "p"],
        );
        for p in &m.pairs {
            t.push(vec![f.levels[p.i].clone(), f.levels[p.j].clone(), fmt6(p.diff), fmt6(p.t), fmt6(p.p)]);
        }
        t.note(format!(
            "{reps} observations per level, MSE {} on {} df",
            fmt6(err.mse),
            err.df
        ));
        s.tables.push(t);
    }
    Ok(Outcome::Done)
}

fn regression_section(_: &AnalysisInput, prep: &Prepared, opts: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let design = design(prep)?;
    let Some(summary) = need(&prep.summary, "descriptives")? else {
        return Ok(Outcome::Skip("no weights or published summary".into()));
    };
    let coding = match &opts.coding {
        Some(c) => c.clone(),
        None => default_coding(design)?,
    };
    let names: Vec<&str> = design.factors().iter().map(|f| f.name.as_str()).collect();
    let mut models: Vec<(String, Vec<&str>)> = vec![("full".into(), names.clone())];
    if names.len() > 1 {
        models.extend(names.iter().map(|n| (n.to_string(), vec![*n])));
    }
    let mut overview = Table::new(
        "regression_models",
        "Effects-coded regressions of the geometric-mean weights",
        &["model", "r_squared", "adj_r_squared", "f", "p", "df_model", "df_error"],
    );
    let labels = design.labels();
    let observed = summary.geometric_means();
    for (name, terms) in &models {
        let r = effects_regression(summary, design, &coding, terms)?;
        let mut t = Table::new(
            &format!("regression_{name}"),
            &format!("Regression on {}", terms.join(" + ")),
            &["term", "coefficient", "std_error", "t", "p"],
        );
        for (i, term) in r.terms.iter().enumerate() {
            let f = &r.fit;
            t.push_values(term, &[f.coefficients[i], f.std_errors[i], f.t_stats[i], f.p_values[i]]);
        }
        s.tables.push(t);
        overview.push(vec![
            name.clone(),
            fmt6(r.fit.r_squared),
            fmt6(r.fit.adj_r_squared),
            fmt6(r.fit.f_stat),
            fmt6(r.fit.f_p),
            r.fit.df_model.to_string(),
            r.fit.df_error.to_string(),
        ]);
        if opts.plots {
            s.files.insert(
                format!("fig_regression_{name}.svg"),
                predicted_vs_observed(
                    &format!("Predicted vs observed, {} (R² {})", terms.join(" + "), fmt6(r.fit.r_squared)),
                    &labels,
                    &observed,
                    &r.fit.fitted,
                ),
            );
        }
    }
    overview.note(format!("coding {coding}"));
    s.tables.insert(0, overview);
    Ok(Outcome::Done)
}

fn conjoint_section(input: &AnalysisInput, prep: &Prepared, _: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let Some(fits) = need(&prep.fits, "conjoint fits")? else {
        return Ok(Outcome::Skip("no weights or part-worths".into()));
    };
    let agg = aggregate(fits)?;
    let mut worths = Table::new(
        "conjoint_part_worths",
        &format!("Mean part-worths over {} subjects", agg.n_subjects),
        &["factor", "level", "part_worth"],
    );
    let mut imp = Table::new("conjoint_importance", "Mean relative importance", &["factor", "importance_pct"]);
    for f in &agg.factors {
        for (l, w) in f.levels.iter().zip(&f.mean_worths) {
            worths.push(vec![f.factor.clone(), l.clone(), fmt6(*w)]);
        }
        imp.push(vec![f.factor.clone(), opt6(f.mean_importance.map(|v| 100.0 * v))]);
    }
    worths.note(format!("mean intercept {}", fmt6(agg.mean_intercept)));
    if let (Some(r2), Some(f), Some(p)) = (agg.mean_r_squared, agg.mean_f_stat, agg.mean_p_value) {
        imp.note(format!("mean R² {}, mean F {}, mean p {}", fmt6(r2), fmt6(f), fmt6(p)));
    }
    let degenerate: Vec<&str> = fits.iter().filter(|f| f.degenerate).map(|f| f.subject_id.as_str()).collect();
    if !degenerate.is_empty() {
        imp.note(format!("importance undefined for {}", degenerate.join(", ")));
    }
    s.tables.push(imp);
    s.tables.push(worths);
    if input.fits.is_none() {
        s.files.insert("part_worths.csv".into(), write_part_worths(fits));
        s.files.insert("fit_stats.csv".into(), write_fit_stats(fits));
    }
    Ok(Outcome::Done)
}

fn simulators_section(_: &AnalysisInput, prep: &Prepared, opts: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let Some(fits) = need(&prep.fits, "conjoint fits")? else {
        return Ok(Outcome::Skip("no weights or part-worths".into()));
    };
    let design = design(prep)?;
    let o = &opts.simulation;
    let runs = [
        ("FCM", simulate_fcm(fits, design, o)),
        ("BTL", simulate_btl(fits, design, o)),
        ("LPM", simulate_lpm(fits, design, o)),
    ];
    let mut t = Table::new(
        "simulators",
        "Simulated choice shares (percent)",
        &["profile", "FCM", "BTL", "LPM"],
    );
    let labels = design.labels();
    let mut errors = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let mut row = vec![l.to_string()];
        for (_, r) in &runs {
            row.push(r.as_ref().map(|x| fmt6(100.0 * x.shares[i])).unwrap_or_default());
        }
        t.push(row);
    }
    let mut total = vec!["total".to_string()];
    for (name, r) in &runs {
        match r {
            Ok(x) => {
                total.push(fmt6(100.0 * x.total()));
                if !x.excluded_subjects.is_empty() {
                    t.note(format!("{name} excludes {}", x.excluded_subjects.join(", ")));
                }
            }
            Err(e) => {
                total.push(String::new());
                errors.push(format!("{name}: {e}"));
            }
        }
    }
    t.push(total);
    t.note(format!(
        "aggregation {:?}, LPM exclusion {}, p threshold {}",
        o.aggregation,
        if o.lpm_exclusion { "on" } else { "off" },
        o.p_threshold.map(fmt6).unwrap_or_else(|| "none".into())
    ));
    s.tables.push(t);
    if !errors.is_empty() {
        bail!("{}", errors.join("; "));
    }
    Ok(Outcome::Done)
}

fn factor_columns(k: usize, prefix: &str) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

fn header_with(first: &str, middle: &[String], last: &[&str]) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(middle.iter().cloned())
        .chain(last.iter().map(|s| s.to_string()))
        .collect()
}

fn factor_section(_: &AnalysisInput, prep: &Prepared, opts: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let Some(corr) = need(&prep.correlation, "correlation")? else {
        return Ok(Outcome::Skip("no weights or correlation matrix".into()));
    };
    let design = design(prep)?;
    let labels = design.labels();
    let max_k = opts.max_factors.min(corr.order().saturating_sub(1));
    for k in 1..=max_k {
        let sol = ml_extract(corr, k, &opts.ml)?;
        let rotated = if k > 1 { varimax(&sol, opts.kaiser) } else { sol.clone() };
        let mut t = Table::new(
            &format!("factor_k{k}"),
            &format!(
                "ML factor solution, {k} factor{}{}",
                if k > 1 { "s" } else { "" },
                if k > 1 { ", varimax" } else { "" }
            ),
            &[],
        );
        t.header = header_with("variable", &factor_columns(k, "F"), &["communality", "heywood"]);
        for (i, l) in labels.iter().enumerate() {
            let mut row = vec![l.to_string()];
            row.extend(rotated.loadings.row(i).iter().map(|v| fmt6(*v)));
            row.push(fmt6(rotated.communalities[i]));
            row.push(if sol.heywood[i] { "yes" } else { "no" }.into());
            t.push(row);
        }
        let mut var = vec!["variance_pct".to_string()];
        var.extend(rotated.variance_explained.iter().map(|v| fmt6(100.0 * v)));
        var.push(fmt6(100.0 * rotated.variance_explained.iter().sum::<f64>()));
        var.push(String::new());
        t.push(var);
        t.note(format!(
            "converged {} after {} iterations, objective {}",
            sol.converged,
            sol.iterations,
            fmt6(sol.objective)
        ));
        if sol.any_heywood() {
            t.note("heywood: uniqueness held at the lower bound");
        }
        s.tables.push(t);
    }
    Ok(Outcome::Done)
}

fn hierarchical_section(_: &AnalysisInput, prep: &Prepared, opts: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    let Some(corr) = need(&prep.correlation, "correlation")? else {
        return Ok(Outcome::Skip("no weights or correlation matrix".into()));
    };
    let k = opts.max_factors.min(corr.order().saturating_sub(1));
    if k < 2 {
        return Ok(Outcome::Skip("needs at least two factors".into()));
    }
    let design = design(prep)?;
    let labels = design.labels();
    let sol = ml_extract(corr, k, &opts.ml)?;
    let obl = oblique_rotate(&sol, &opts.oblique)?;
    let sl = schmid_leiman(&obl)?;
    let cols = factor_columns(k, "F");

    let mut pattern = Table::new("oblique_pattern", &format!("Oblimin pattern, gamma {}", fmt6(obl.gamma)), &[]);
    pattern.header = header_with("variable", &cols, &[]);
    for (i, l) in labels.iter().enumerate() {
        pattern.push_values(l, obl.pattern.row(i));
    }
    pattern.note(format!("converged {} after {} iterations", obl.converged, obl.iterations));
    let mut phi = Table::new("factor_correlations", "Primary factor correlations", &[]);
    phi.header = header_with("factor", &cols, &[]);
    for (i, c) in cols.iter().enumerate() {
        phi.push_values(c, obl.phi.as_matrix().row(i));
    }
    let mut h = Table::new("schmid_leiman", "Schmid-Leiman solution", &[]);
    h.header = header_with("variable", &["secondary".to_string()], &[]);
    h.header.extend(factor_columns(k, "P"));
    for (i, l) in labels.iter().enumerate() {
        let mut v = vec![sl.secondary[i]];
        v.extend_from_slice(sl.primaries.row(i));
        h.push_values(l, &v);
    }
    h.note(format!(
        "primary loadings on the general factor: {}",
        sl.general_loadings.iter().map(|v| fmt6(*v)).collect::<Vec<_>>().join(", ")
    ));
    let reflected: Vec<String> = sl
        .reflected
        .iter()
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(j, _)| cols[j].clone())
        .collect();
    if !reflected.is_empty() {
        h.note(format!("reflected: {}", reflected.join(", ")));
    }
    h.note(format!("reconstruction error {}", fmt6(sl.reconstruction_error(&obl))));
    s.tables.extend([pattern, phi, h]);
    Ok(Outcome::Done)
}

fn provenance_section(input: &AnalysisInput, _: &Prepared, _: &PipelineOptions, s: &mut Section) -> Result<Outcome> {
    if input.provenance.is_empty() {
        return Ok(Outcome::Skip("inputs are raw judgments".into()));
    }
    let mut t = Table::new("provenance", "Inputs and declared limits", &["item"]);
    for l in &input.provenance {
        t.push(vec![l.clone()]);
    }
    s.tables.push(t);
    Ok(Outcome::Done)
}

pub const FIXTURES: [&str; 2] = ["conjoint", "descriptives"];

/// Embedded published inputs. Only the analyses those inputs support run;
/// the rest are skipped.
pub fn fixture_input(name: &str) -> Result<AnalysisInput> {
    use prefscope_core::fixtures as fx;
    match name {
        "conjoint" => {
            let (_, cov) = fx::published_covariance()?;
            Ok(AnalysisInput {
                study: Some(StudyFile::parse(fx::CONJOINT_STUDY)?),
                fits: Some(fx::published_part_worths()?),
                correlation: Some(to_correlation(&cov)?),
                provenance: vec![
                    "published per-subject part-worths (three decimals) with their R², F and p".into(),
                    "published profile covariance, converted to a correlation matrix".into(),
                    "part-worth zero sums are off by up to 0.001 from rounding".into(),
                ],
                ..AnalysisInput::default()
            })
        }
        "descriptives" => {
            let summary = fx::published_descriptives()?;
            let study = StudyFile::parse(fx::DESCRIPTIVES_STUDY)?;
            let design = study.design()?;
            let mse_check: Vec<String> = design
                .labels()
                .iter()
                .zip(&summary.profiles)
                .map(|(l, p)| {
                    format!(
                        "{l}: SD/sqrt(n) {} vs published SE {}",
                        fmt6(p.std_dev / (summary.n_subjects as f64).sqrt()),
                        fmt6(p.mean_std_error)
                    )
                })
                .collect();
            let grand = summary.means().iter().sum::<f64>() / summary.profiles.len() as f64;
            let mut provenance = vec![
                format!("published profile descriptives for {} subjects", summary.n_subjects),
                "the per-subject weights behind them are not available, so the table itself is not recomputed".into(),
                "ANOVA error SS and CR demographic contrasts need per-subject data and are not reproduced".into(),
                format!("error term MSE {} on {} df taken from the published ANOVA", fmt6(PUBLISHED_MSE), PUBLISHED_ERROR_DF),
                format!("grand mean {} (expected 1/9 = {})", fmt6(grand), fmt6(1.0 / 9.0)),
            ];
            provenance.extend(mse_check);
            Ok(AnalysisInput {
                study: Some(study),
                summary: Some(summary),
                published_error: Some((PUBLISHED_MSE, PUBLISHED_ERROR_DF)),
                provenance,
                ..AnalysisInput::default()
            })
        }
        other => bail!("unknown fixture {other:?}; expected one of {}", FIXTURES.join(", ")),
    }
}

/// Published within-cell error of the profile-weight ANOVA.
pub const PUBLISHED_MSE: f64 = 1.5 / 171.0;
pub const PUBLISHED_ERROR_DF: usize = 171;
