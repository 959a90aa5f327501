//! Argument parsing and dispatch for the `prefscope` binary.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prefscope_core::conjoint::Aggregation;
use prefscope_core::formats::{
    read_fit_stats, read_judgments, read_labeled_matrix, read_part_worths, read_summary, read_weights,
    validate_judgments,
};
use prefscope_core::study::to_correlation;
use prefscope_core::{EffectsCoding, ObliqueOptions, StudyDesign, SymMatrix};
use prefscope_elicit::{pair_schedule, router, SessionStore, StoreConfig};

use crate::pipeline::{
    analyze, fixture_input, load_study, prioritize_judgments, AnalysisInput, InputError, PipelineOptions,
    ReportBundle, SectionKind,
};

#[derive(Debug, Parser)]
#[command(name = "prefscope", version, about = "Pairwise-comparison preference studies: prioritization, ANOVA, regression, conjoint simulation and factor analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a judgments file for schema, completeness, reciprocity and duplicates.
    Validate(ValidateArgs),
    /// Eigenvector weights and consistency per subject; writes weights.csv.
    Prioritize(AnalysisArgs),
    /// Per-profile descriptive statistics and the mean-weight plot.
    Summarize(AnalysisArgs),
    /// Two-way ANOVA and LSD post-hoc comparisons.
    Anova(AnalysisArgs),
    /// Effects-coded regressions of the geometric-mean weights.
    Regress(AnalysisArgs),
    /// Conjoint part-worths and relative importances.
    Conjoint(AnalysisArgs),
    /// FCM, BTL and LPM choice simulators.
    Simulate(AnalysisArgs),
    /// ML factor solutions, varimax and the Schmid-Leiman hierarchy.
    Factor(AnalysisArgs),
    /// Every analysis the inputs support.
    Report(AnalysisArgs),
    /// Print the seeded pair order a respondent would see.
    Schedule(ScheduleArgs),
    /// Export judgments and weights from elicitation session logs.
    Export(ExportArgs),
    /// Run the elicitation HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub study: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Geometric,
    Arithmetic,
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    /// Study definition (JSON).
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Pairwise judgments (CSV: subject_id,left,right,intensity,favored).
    #[arg(long, conflicts_with = "weights")]
    pub judgments: Option<PathBuf>,
    /// Precomputed weights (CSV: subject_id,profile,weight,cr).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Published per-profile descriptives, used when no per-subject data exist.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Subject count for a summary file without an `n` column.
    #[arg(long)]
    pub n_subjects: Option<usize>,
    /// Published ANOVA error mean square, for summary-only post-hoc tests.
    #[arg(long, requires = "error_df")]
    pub mse: Option<f64>,
    #[arg(long, requires = "mse")]
    pub error_df: Option<usize>,
    /// Per-subject part-worths (CSV: subject_id,factor,level,part_worth).
    #[arg(long)]
    pub part_worths: Option<PathBuf>,
    /// Per-subject fit statistics matching --part-worths.
    #[arg(long, requires = "part_worths")]
    pub fit_stats: Option<PathBuf>,
    /// Labeled profile covariance matrix.
    #[arg(long, conflicts_with = "correlation")]
    pub covariance: Option<PathBuf>,
    /// Labeled profile correlation matrix.
    #[arg(long)]
    pub correlation: Option<PathBuf>,
    /// Embedded published inputs instead of files.
    #[arg(long, value_parser = ["conjoint", "descriptives"])]
    pub fixture: Option<String>,
    /// Directory receiving CSV tables, SVG plots and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Subjects with a consistency ratio above this are excluded.
    #[arg(long, default_value_t = 0.2)]
    pub cr_cutoff: f64,
    /// Effects coding, e.g. "Gap:Small=-1,Medium=0,Large=1;Background:Gaudy=-1,Subtle=0,Uniform=1".
    #[arg(long)]
    pub coding: Option<EffectsCoding>,
    /// Accepted for symmetry with `serve`; analyses are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Geometric)]
    pub aggregation: AggregationArg,
    /// Drop subjects whose conjoint fit p-value exceeds this.
    #[arg(long)]
    pub p_threshold: Option<f64>,
    /// Keep subjects with a nonpositive utility in the LPM simulator.
    #[arg(long)]
    pub no_lpm_exclusion: bool,
    #[arg(long, default_value_t = 3)]
    pub max_factors: usize,
    /// Oblimin gamma for the hierarchical solution (0 quartimin, 0.5 biquartimin).
    #[arg(long, default_value_t = 0.5)]
    pub oblique_gamma: f64,
    /// Skip Kaiser row normalization during varimax.
    #[arg(long)]
    pub no_kaiser: bool,
    /// Kaiser-normalize rows during the oblique rotation as well.
    #[arg(long)]
    pub oblique_kaiser: bool,
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub study: PathBuf,
    /// Respondent seed; derived from --session-id when absent.
    #[arg(long, required_unless_present = "session_id")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub session_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Directory of session logs written by `serve`.
    #[arg(long)]
    pub log_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Include sessions that are not complete.
    #[arg(long)]
    pub partial: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Session logs are kept here and replayed at startup.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Study used by sessions created without one.
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Base seed for respondent pair orders.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Turn off the mid-session transitivity indicator.
    #[arg(long)]
    pub no_transitivity: bool,
}

/// Exit status: 0 success, 1 validation failure, 2 analysis failure.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Analysis(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Analysis(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Analysis(m) => m,
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn validation(e: anyhow::Error) -> Failure {
    Failure::Validation(format!("{e:#}"))
}

impl AnalysisArgs {
    pub fn options(&self) -> PipelineOptions {
        let mut oblique = ObliqueOptions::biquartimin();
        oblique.gamma = self.oblique_gamma;
        oblique.kaiser_normalize = self.oblique_kaiser;
        let mut o = PipelineOptions {
            cr_cutoff: self.cr_cutoff,
            coding: self.coding.clone(),
            max_factors: self.max_factors,
            kaiser: !self.no_kaiser,
            oblique,
            plots: !self.no_plots,
            ..PipelineOptions::default()
        };
        o.simulation.aggregation = match self.aggregation {
            AggregationArg::Geometric => Aggregation::Geometric,
            AggregationArg::Arithmetic => Aggregation::Arithmetic,
        };
        o.simulation.p_threshold = self.p_threshold;
        o.simulation.lpm_exclusion = !self.no_lpm_exclusion;
        o
    }

    /// Assembles the analysis inputs from the fixture and file flags; file
    /// flags replace the fixture's matching inputs.
    pub fn input(&self) -> Result<AnalysisInput, Failure> {
        if !(self.cr_cutoff > 0.0) {
            return Err(Failure::Validation(format!("--cr-cutoff must be positive, got {}", self.cr_cutoff)));
        }
        let mut input = match &self.fixture {
            Some(f) => fixture_input(f).map_err(validation)?,
            None => AnalysisInput::default(),
        };
        if let Some(p) = &self.study {
            input.study = Some(load_study(p)?);
        }
        let Some(study) = &input.study else {
            return Err(Failure::Validation("--study or --fixture is required".into()));
        };
        let design = study.design().map_err(|e| validation(e.into()))?;
        if let Some(p) = &self.judgments {
            input.subjects = Some(prioritize_judgments(&read(p)?, &design)?);
        }
        if let Some(p) = &self.weights {
            let recs = read_weights(&read(p)?, &design).map_err(|e| file_error(p, e))?;
            input.subjects = Some(recs);
        }
        if let Some(p) = &self.summary {
            let n = self.n_subjects.unwrap_or(0);
            let s = read_summary(&read(p)?, &design, n).map_err(|e| file_error(p, e))?;
            if s.n_subjects == 0 {
                return Err(Failure::Validation(format!(
                    "{}: no n column; pass --n-subjects",
                    p.display()
                )));
            }
            input.summary = Some(s);
        }
        if let (Some(mse), Some(df)) = (self.mse, self.error_df) {
            input.published_error = Some((mse, df));
        }
        if let Some(p) = &self.part_worths {
            let mut fits = read_part_worths(&read(p)?, &design).map_err(|e| file_error(p, e))?;
            if let Some(q) = &self.fit_stats {
                read_fit_stats(&read(q)?, &mut fits).map_err(|e| file_error(q, e))?;
            }
            input.fits = Some(fits);
        }
        if let Some(p) = &self.covariance {
            let cov = labeled_matrix(p, &design)?;
            input.correlation = Some(to_correlation(&cov).map_err(|e| file_error(p, e))?);
        }
        if let Some(p) = &self.correlation {
            input.correlation = Some(labeled_matrix(p, &design)?);
        }
        Ok(input)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("reading {}: {e}", path.display())))
}

fn file_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Validation(format!("{}: {e}", path.display()))
}

fn labeled_matrix(path: &Path, design: &StudyDesign) -> Result<SymMatrix, Failure> {
    let (labels, m) = read_labeled_matrix(&read(path)?).map_err(|e| file_error(path, e))?;
    if labels.iter().map(String::as_str).ne(design.labels()) {
        return Err(file_error(path, "matrix labels must list the study profiles in order"));
    }
    Ok(m)
}

fn sections_for(cmd: &Command) -> &'static [SectionKind] {
    use SectionKind::*;
    match cmd {
        Command::Prioritize(_) => &[Consistency],
        Command::Summarize(_) => &[Descriptives],
        Command::Anova(_) => &[Anova, Posthoc],
        Command::Regress(_) => &[Regression],
        Command::Conjoint(_) => &[Conjoint],
        Command::Simulate(_) => &[Simulators],
        Command::Factor(_) => &[Factor, Hierarchical],
        _ => &SectionKind::ALL,
    }
}

/// Runs the requested sections and writes the bundle to `--out`.
pub fn run_analysis(args: &AnalysisArgs, kinds: &[SectionKind]) -> Result<ReportBundle, Failure> {
    let input = args.input()?;
    let bundle = analyze(&input, &args.options(), kinds);
    if let Some(dir) = &args.out {
        bundle.write_to(dir).map_err(|e| Failure::Analysis(format!("{e:#}")))?;
    }
    Ok(bundle)
}

fn analysis(cmd: &Command, args: &AnalysisArgs) -> Result<(), Failure> {
    let bundle = run_analysis(args, sections_for(cmd))?;
    print!("{}", bundle.text());
    let failed = bundle.failed();
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|s| s.kind.name()).collect();
        return Err(Failure::Analysis(format!("failed sections: {}", names.join(", "))));
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let study = load_study(&args.study)?;
    let design = study.design().map_err(|e| validation(e.into()))?;
    let rows = read_judgments(&read(&args.judgments)?).map_err(|e| file_error(&args.judgments, e))?;
    let diags = validate_judgments(&rows, &design);
    if diags.is_empty() {
        let subjects: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
        println!("ok: {} judgments from {} subjects", rows.len(), subjects.len());
        return Ok(());
    }
    for d in &diags {
        println!("{d}");
    }
    Err(Failure::Validation(format!("{} diagnostic(s)", diags.len())))
}

fn schedule(args: &ScheduleArgs) -> Result<(), Failure> {
    let study = load_study(&args.study)?;
    let design = study.design().map_err(|e| validation(e.into()))?;
    let seed = match (args.seed, &args.session_id) {
        (Some(s), _) => s,
        (None, Some(id)) => prefscope_elicit::seed_from_id(id),
        (None, None) => return Err(Failure::Validation("--seed or --session-id is required".into())),
    };
    let labels = design.labels();
    for (k, (l, r)) in pair_schedule(design.n_items(), seed).into_iter().enumerate() {
        println!("{k},{},{}", labels[l], labels[r]);
    }
    Ok(())
}

fn export(args: &ExportArgs) -> Result<(), Failure> {
    if !args.log_dir.is_dir() {
        return Err(Failure::Validation(format!("{} is not a directory", args.log_dir.display())));
    }
    let store = SessionStore::open(StoreConfig {
        log_dir: Some(args.log_dir.clone()),
        ..StoreConfig::default()
    })
    .map_err(|e| Failure::Validation(e.to_string()))?;
    let ex = store.export(args.partial).map_err(|e| Failure::Validation(e.to_string()))?;
    let write = |name: &str, text: &str| -> Result<(), Failure> {
        let p = args.out.join(name);
        std::fs::write(&p, text).map_err(|e| Failure::Analysis(format!("writing {}: {e}", p.display())))
    };
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Analysis(format!("creating {}: {e}", args.out.display())))?;
    if let Some(study) = &ex.study {
        write("study.json", &study.to_json())?;
    }
    write("judgments.csv", &ex.judgments)?;
    write("weights.csv", &ex.weights)?;
    println!("exported {} session(s) to {}", ex.sessions.len(), args.out.display());
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<()> {
    let default_study = match &args.study {
        Some(p) => Some(load_study(p).map_err(|e| anyhow!("{e}"))?),
        None => None,
    };
    let store = SessionStore::open(StoreConfig {
        log_dir: args.log_dir.clone(),
        default_study,
        disable_transitivity_indicator: args.no_transitivity,
        base_seed: args.seed,
    })?;
    let app = router(Arc::new(store));
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("serving")
    })
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Schedule(a) => schedule(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve(a).map_err(|e| Failure::Analysis(format!("{e:#}"))),
        Command::Prioritize(a)
        | Command::Summarize(a)
        | Command::Anova(a)
        | Command::Regress(a)
        | Command::Conjoint(a)
        | Command::Simulate(a)
        | Command::Factor(a)
        | Command::Report(a) => analysis(&cli.command, a),
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
