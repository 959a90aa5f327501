//! Replication and end-to-end acceptance checks. Prints one PASS/FAIL line
//! per criterion (with the individual checks indented below it) and fails
//! if any blocking check fails.
//!
//! Set `PREFSCOPE_BLESS=1` to rewrite the golden reports under
//! `tests/golden/`.

mod common;

#[path = "../../core/tests/prop_ahp.rs"]
mod prop_ahp;
#[path = "../../core/tests/prop_conjoint.rs"]
mod prop_conjoint;
#[path = "../../core/tests/prop_factor.rs"]
mod prop_factor;
#[path = "../../core/tests/prop_linear.rs"]
mod prop_linear;
#[path = "../../core/tests/prop_numerics.rs"]
mod prop_numerics;
#[path = "../../core/tests/prop_study.rs"]
mod prop_study;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use prefscope_cli::pipeline::{analyze, fixture_input, run_pipeline, PipelineOptions, SectionKind};
use prefscope_core::conjoint::{aggregate, simulate_btl, simulate_fcm, simulate_lpm};
use prefscope_core::factor::{align_columns, ml_extract, oblique_rotate, schmid_leiman, varimax};
use prefscope_core::fixtures;
use prefscope_core::linear::{effects_regression, factor_ss_from_cell_means, lsd_posthoc, EffectsCoding};
use prefscope_core::numerics::f_tail;
use prefscope_core::study::to_correlation;
use prefscope_core::{Matrix, MlOptions, ObliqueOptions, SimulationOptions, StudyDesign};

/// Writes past the test harness's output capture so the lines always show.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

struct Check {
    name: String,
    ok: bool,
    detail: String,
    blocking: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            ok,
            detail: detail.into(),
            blocking: true,
        });
    }

    fn info(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            ok,
            detail: detail.into(),
            blocking: false,
        });
    }

    /// `|got - want| <= tol`.
    fn near(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(name, ok, format!("{got:.6} vs {want} ±{tol}"));
    }

    fn max_dev(&mut self, name: &str, got: &[f64], want: &[f64], tol: f64) {
        let dev = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        let ok = got.len() == want.len() && dev <= tol;
        self.check(name, ok, format!("max deviation {dev:.6} (tolerance {tol})"));
    }
}

struct Outcome {
    title: &'static str,
    passed: bool,
}

fn run_criterion(title: &'static str, limit: Duration, f: impl FnOnce(&mut Criterion)) -> Outcome {
    let mut c = Criterion::default();
    let start = Instant::now();
    let caught = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(&mut c)));
    let elapsed = start.elapsed();
    if let Err(e) = caught {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        c.check("completed without panicking", false, msg);
    }
    c.check(
        "runtime",
        elapsed <= limit,
        format!("{:.3} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs_f64()),
    );
    let passed = c.checks.iter().all(|k| k.ok || !k.blocking);
    emit(&format!("{} {title}", if passed { "PASS" } else { "FAIL" }));
    for k in &c.checks {
        let tag = match (k.ok, k.blocking) {
            (true, _) => "ok  ",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        let kind = if k.blocking { "" } else { " [non-blocking]" };
        emit(&format!("    {tag} {}{kind}: {}", k.name, k.detail));
    }
    Outcome { title, passed }
}

fn design() -> StudyDesign {
    fixtures::signage_design()
}

fn regression(c: &mut Criterion) {
    let summary = fixtures::published_descriptives().unwrap();
    let coding = EffectsCoding::signage_default();
    let full = effects_regression(&summary, &design(), &coding, &["Gap", "Background"]).unwrap();
    let reduced = effects_regression(&summary, &design(), &coding, &["Background"]).unwrap();
    c.near("intercept", full.coefficient("Intercept").unwrap(), 0.076, 0.002);
    c.near("Background coefficient", full.coefficient("Background").unwrap(), -0.020, 0.002);
    c.near("Gap coefficient", full.coefficient("Gap").unwrap(), -0.0041, 0.001);
    c.near("full-model R² (%)", 100.0 * full.fit.r_squared, 74.0, 2.0);
    c.near("reduced-model R² (%)", 100.0 * reduced.fit.r_squared, 71.4, 2.0);
    let b = reduced.term_index("Background").unwrap();
    c.near("t(Background)", reduced.fit.t_stats[b], -4.2, 0.2);
    c.near("p(Background)", reduced.fit.p_values[b], 0.0041, 0.001);
}

fn anova(c: &mut Criterion) {
    let d = design();
    let summary = fixtures::published_descriptives().unwrap();
    let means = summary.means();
    let n = summary.n_subjects;
    c.check("20 replicates per cell", n == 20, format!("{n}"));
    let gap = d.factor_index("Gap").unwrap();
    let bg = d.factor_index("Background").unwrap();
    c.near("SS gap", factor_ss_from_cell_means(&means, &d.level_groups(gap), n), 0.0086, 0.0005);
    c.near("SS background", factor_ss_from_cell_means(&means, &d.level_groups(bg), n), 0.15, 0.005);
    c.near("f_tail(8.4, 2, 171)", f_tail(8.4, 2.0, 171.0).unwrap(), 0.00034, 0.00002);
    let groups = d.level_groups(bg);
    let level_means: Vec<f64> =
        groups.iter().map(|g| g.iter().map(|&i| means[i]).sum::<f64>() / g.len() as f64).collect();
    let levels = &d.factors()[bg].levels;
    let at = |name: &str| levels.iter().position(|l| l == name).unwrap();
    let m = lsd_posthoc(&level_means, n * groups[0].len(), 1.5 / 171.0, 171).unwrap();
    let p = |a: &str, b: &str| {
        let (i, j) = (at(a).min(at(b)), at(a).max(at(b)));
        m.p(i, j).unwrap()
    };
    c.near("LSD p(Gaudy, Uniform)", p("Gaudy", "Uniform"), 0.00010, 0.00005);
    c.near("LSD p(Gaudy, Subtle)", p("Gaudy", "Subtle"), 0.0057, 0.001);
    c.near("LSD p(Uniform, Subtle)", p("Uniform", "Subtle"), 0.24, 0.03);
}

fn conjoint(c: &mut Criterion) {
    let d = design();
    let fits = fixtures::published_part_worths().unwrap();
    let agg = aggregate(&fits).unwrap();
    let gap = agg.factor("Gap").unwrap();
    let bg = agg.factor("Background").unwrap();
    c.near("Gap importance (%)", 100.0 * gap.mean_importance.unwrap(), 32.5, 0.5);
    c.near("Background importance (%)", 100.0 * bg.mean_importance.unwrap(), 67.5, 0.5);
    let worth = |f: &prefscope_core::conjoint::FactorAggregate, l: &str| {
        f.mean_worths[f.levels.iter().position(|x| x == l).unwrap()]
    };
    let published = [
        (gap, "Medium", 0.00478),
        (gap, "Small", 0.00501),
        (gap, "Large", -0.00978),
        (bg, "Gaudy", 0.0393),
        (bg, "Uniform", -0.0299),
        (bg, "Subtle", -0.00939),
    ];
    for (f, l, want) in published {
        c.near(&format!("part-worth {} {l}", f.factor), worth(f, l), want, 0.0005);
    }
    // published order: MG SG LG MU SU LU MS SS LS
    let labels = ["MG", "SG", "LG", "MU", "SU", "LU", "MS", "SS", "LS"];
    let fcm_pub = [0.20, 0.15, 0.15, 0.05, 0.10, 0.0, 0.10, 0.10, 0.15];
    let btl_pub = [0.0807, 0.1033, 0.1008, 0.0404, 0.0328, 0.0641, 0.0901, 0.1010, 0.0865];
    let lpm_pub = [0.1128, 0.1134, 0.1148, 0.1053, 0.1059, 0.1071, 0.1126, 0.1134, 0.1147];
    let opts = SimulationOptions::default();
    let shares = |s: &prefscope_core::ChoiceShares| -> Vec<f64> {
        labels.iter().map(|l| s.share(l).unwrap()).collect()
    };
    let fcm = shares(&simulate_fcm(&fits, &d, &opts).unwrap());
    // twenty subjects, so every share is a multiple of 5%
    let exact = fcm.iter().zip(&fcm_pub).all(|(a, b)| (20.0 * a).round() == 20.0 * b && (20.0 * a - (20.0 * a).round()).abs() < 1e-9);
    c.check("FCM column exact", exact, format!("{fcm:?}"));
    let btl = simulate_btl(&fits, &d, &opts).unwrap();
    c.max_dev("BTL column", &shares(&btl), &btl_pub, 0.004);
    let lpm = simulate_lpm(&fits, &d, &opts).unwrap();
    c.max_dev("LPM column", &shares(&lpm), &lpm_pub, 0.002);
    c.check(
        "exclusion rule applied to both BTL and LPM",
        btl.excluded_subjects == lpm.excluded_subjects && !btl.excluded_subjects.is_empty(),
        format!("{} of 20 subjects excluded", btl.excluded_subjects.len()),
    );
}

fn published(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn factor(c: &mut Criterion) {
    let (_, cov) = fixtures::published_covariance().unwrap();
    let corr = to_correlation(&cov).unwrap();
    let ml = MlOptions::default();

    let k1 = ml_extract(&corr, 1, &ml).unwrap();
    let t10_k1 = published(&[&[0.654], &[0.630], &[0.551], &[-0.054], &[-0.276], &[0.326], &[-0.942], &[-0.934], &[-0.474]]);
    let a = align_columns(&t10_k1, &k1.loadings).unwrap();
    c.check("k=1 loadings", a.max_abs_diff <= 0.03, format!("max deviation {:.4} (tolerance 0.03, up to sign)", a.max_abs_diff));
    c.near("k=1 variance explained (%)", 100.0 * k1.variance_explained[0], 36.7, 1.5);

    let k2 = varimax(&ml_extract(&corr, 2, &ml).unwrap(), true);
    let t10_k2 = published(&[
        &[-0.559, 0.515],
        &[-0.539, 0.492],
        &[-0.556, 0.406],
        &[0.960, 0.243],
        &[0.906, -0.030],
        &[0.220, 0.408],
        &[0.215, -0.900],
        &[0.196, -0.945],
        &[0.022, -0.470],
    ]);
    let a = align_columns(&t10_k2, &k2.loadings).unwrap();
    c.check("k=2 varimax loadings", a.max_abs_diff <= 0.05, format!("max deviation {:.4} (tolerance 0.05, up to permutation/sign)", a.max_abs_diff));

    let k3 = varimax(&ml_extract(&corr, 3, &ml).unwrap(), true);
    let t10_k3 = published(&[
        &[-0.396, 0.195, -0.750],
        &[-0.357, 0.131, -0.805],
        &[-0.567, 0.465, -0.117],
        &[0.950, 0.260, 0.120],
        &[0.929, -0.087, 0.084],
        &[0.140, 0.591, 0.205],
        &[0.122, -0.745, 0.520],
        &[0.120, -0.827, 0.502],
        &[-0.217, 0.019, 0.907],
    ]);
    let a = align_columns(&t10_k3, &k3.loadings).unwrap();
    c.check("k=3 varimax loadings", a.max_abs_diff <= 0.05, format!("max deviation {:.4} (tolerance 0.05, up to permutation/sign)", a.max_abs_diff));
    let triple: Vec<f64> = a.perm.iter().map(|&j| 100.0 * k3.variance_explained[j]).collect();
    c.max_dev("k=3 variance explained (%)", &triple, &[27.4, 21.5, 29.3], 2.0);

    let d = design();
    let labels = d.labels();
    let idx = |l: &str| labels.iter().position(|x| *x == l).unwrap();
    let unrotated = ml_extract(&corr, 3, &ml).unwrap();
    let t11 = published(&[
        &[-0.647, 0.254, -0.005, -0.524],
        &[-0.634, 0.216, -0.066, -0.582],
        &[-0.478, 0.465, 0.323, 0.043],
        &[0.255, -0.899, 0.331, 0.040],
        &[0.396, -0.848, 0.026, -0.044],
        &[-0.125, -0.167, 0.554, 0.247],
        &[0.694, 0.030, -0.531, 0.277],
        &[0.723, 0.039, -0.604, 0.250],
        &[0.430, 0.316, 0.160, 0.748],
    ]);
    let t11_primaries = Matrix::from_fn(9, 3, |i, j| t11[(i, j + 1)]);
    for (name, opts, blocking) in [
        ("biquartimin", ObliqueOptions::biquartimin(), true),
        ("quartimin", ObliqueOptions::quartimin(), false),
    ] {
        let obl = oblique_rotate(&unrotated, &opts).unwrap();
        let sl = schmid_leiman(&obl).unwrap();
        let high: Vec<&str> = labels.iter().enumerate().filter(|(i, _)| sl.secondary[*i].abs() > 0.6).map(|(_, l)| *l).collect();
        let pattern_ok = high == ["MG", "SG", "MS", "SS"];
        // each named group must take its largest primary loading in one
        // column, and the three groups must use different columns
        let dominant = |l: &str| {
            let row = sl.primaries.row(idx(l));
            (0..row.len()).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs())).unwrap()
        };
        let groups = [&["MU", "SU"][..], &["MS", "SS"][..], &["LS"][..]];
        let cols: Vec<Option<usize>> = groups
            .iter()
            .map(|g| {
                let c0 = dominant(g[0]);
                g.iter().all(|l| dominant(l) == c0).then_some(c0)
            })
            .collect();
        let mut distinct: Vec<usize> = cols.iter().flatten().copied().collect();
        distinct.sort();
        distinct.dedup();
        let dominance_ok = cols.iter().all(Option::is_some) && distinct.len() == 3;
        let recon = sl.reconstruction_error(&obl);
        let detail = format!("|secondary| > 0.6 for {high:?}; dominant primary columns {cols:?}");
        let qualitative = pattern_ok && dominance_ok;
        let sec_dev = sl
            .secondary
            .iter()
            .zip(t11.col(0))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            .min(sl.secondary.iter().zip(t11.col(0)).map(|(a, b)| (a + b).abs()).fold(0.0f64, f64::max));
        let prim_dev = align_columns(&t11_primaries, &sl.primaries).unwrap().max_abs_diff;
        let quant = format!("max deviation secondary {sec_dev:.3}, primaries {prim_dev:.3} (tolerance 0.15)");
        if blocking {
            c.check(&format!("Schmid-Leiman qualitative pattern ({name})"), qualitative, detail);
            c.check(&format!("Schmid-Leiman reconstruction ({name})"), recon <= 1e-6, format!("{recon:.3e} (limit 1e-6)"));
        } else {
            c.info(&format!("Schmid-Leiman qualitative pattern ({name})"), qualitative, detail);
            c.info(&format!("Schmid-Leiman reconstruction ({name})"), recon <= 1e-6, format!("{recon:.3e} (limit 1e-6)"));
        }
        c.info(&format!("Schmid-Leiman quantitative tier ({name})"), sec_dev.max(prim_dev) <= 0.15, quant);
    }
}

fn properties(c: &mut Criterion) {
    let suites: [(&str, &[(&str, fn())]); 6] = [
        ("ahp", prop_ahp::PROPERTIES),
        ("conjoint", prop_conjoint::PROPERTIES),
        ("factor", prop_factor::PROPERTIES),
        ("linear", prop_linear::PROPERTIES),
        ("numerics", prop_numerics::PROPERTIES),
        ("study", prop_study::PROPERTIES),
    ];
    for (suite, props) in suites {
        for (name, f) in props {
            let start = Instant::now();
            let r = std::panic::catch_unwind(*f);
            let detail = match &r {
                Ok(()) => format!("1000 cases in {:.3} s", start.elapsed().as_secs_f64()),
                Err(_) => "property failed".into(),
            };
            c.check(&format!("{suite}::{name}"), r.is_ok(), detail);
        }
    }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn end_to_end(c: &mut Criterion) {
    let opts = PipelineOptions::default();
    let bless = std::env::var_os("PREFSCOPE_BLESS").is_some();
    for name in ["conjoint", "descriptives"] {
        let input = fixture_input(name).unwrap();
        let a = analyze(&input, &opts, &SectionKind::ALL).files();
        let b = analyze(&input, &opts, &SectionKind::ALL).files();
        c.check(&format!("{name}: repeated runs byte-identical"), a == b, format!("{} files", a.len()));
        let path = golden_dir().join(format!("{name}.txt"));
        let report = &a["report.txt"];
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, report).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap_or_default();
        c.check(&format!("{name}: report matches golden copy"), &golden == report, path.display().to_string());
        let failed: Vec<&str> = analyze(&input, &opts, &SectionKind::ALL).failed().iter().map(|s| s.kind.name()).collect();
        c.check(&format!("{name}: no failed sections"), failed.is_empty(), format!("{failed:?}"));
    }

    let d = design();
    let dir = tempfile::tempdir().unwrap();
    let study = common::study_file(dir.path());
    let judgments = common::write(dir.path(), "j.csv", &common::consistent_cohort(&d, 12));
    let bundle = run_pipeline(&study, &judgments, &opts).unwrap();
    let again = run_pipeline(&study, &judgments, &opts).unwrap();
    c.check("cohort: repeated runs byte-identical", bundle.files() == again.files(), "");
    let cons = bundle.table("consistency").unwrap();
    let max_cr = cons.rows.iter().map(|r| r[3].parse::<f64>().unwrap().abs()).fold(0.0f64, f64::max);
    c.check("cohort: CR = 0 for every subject", max_cr <= 1e-12 && cons.rows.len() == 12, format!("max |CR| {max_cr:e} over {} subjects", cons.rows.len()));
    let winner = d.labels()[common::profile_at(&d, 2, 2)];
    let sim = bundle.table("simulators").unwrap();
    let fcm_col = sim.header.iter().position(|h| h == "FCM").unwrap();
    let row = sim.rows.iter().find(|r| r[0] == winner).unwrap();
    c.check("cohort: FCM 100% on the constructed winner", row[fcm_col] == "100", format!("{winner}: {}%", row[fcm_col]));
    c.check("cohort: no failed sections", bundle.failed().is_empty(), "");
}

fn declared_limits(c: &mut Criterion) {
    let input = fixture_input("descriptives").unwrap();
    let bundle = analyze(&input, &PipelineOptions::default(), &SectionKind::ALL);
    let prov = bundle.table("provenance").unwrap();
    let text: Vec<&str> = prov.rows.iter().map(|r| r[0].as_str()).collect();
    let mentions = |needle: &str| text.iter().any(|l| l.contains(needle));
    c.check("published descriptives declared non-recomputable", mentions("table itself is not recomputed"), "");
    c.check("ANOVA error SS declared", mentions("ANOVA error SS"), "");
    c.check("CR demographic contrasts declared", mentions("CR demographic contrasts"), "");
    let summary = input.summary.unwrap();
    let n = summary.n_subjects as f64;
    // SD and SE are both published to three decimals
    let worst = summary
        .profiles
        .iter()
        .map(|p| (p.std_dev / n.sqrt() - p.mean_std_error).abs())
        .fold(0.0f64, f64::max);
    c.check("MSE = SD/sqrt(20)", worst <= 0.001, format!("max |SD/sqrt(20) - SE| {worst:.5} (tolerance 0.001)"));
    let grand = summary.means().iter().sum::<f64>() / 9.0;
    c.near("grand mean 1/9", grand, 1.0 / 9.0, 1e-3);
    c.check("internal checks listed in the report", mentions("grand mean") && mentions("SD/sqrt(n)"), "");
}

#[test]
fn acceptance() {
    emit("");
    emit("acceptance criteria");
    let outcomes = [
        run_criterion("Regression replication", Duration::from_secs(1), regression),
        run_criterion("ANOVA replication from published summaries", Duration::from_secs(1), anova),
        run_criterion("Conjoint replication", Duration::from_secs(1), conjoint),
        run_criterion("Factor replication", Duration::from_secs(30), factor),
        run_criterion("Property suites, 1000 cases each", Duration::from_secs(60), properties),
        run_criterion("End-to-end pipeline", Duration::from_secs(30), end_to_end),
        run_criterion("Non-reproducible items declared", Duration::from_secs(1), declared_limits),
    ];
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.title).collect();
    emit(&format!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
