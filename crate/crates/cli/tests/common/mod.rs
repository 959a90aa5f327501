#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prefscope_core::formats::{rows_from_matrix, write_judgments};
use prefscope_core::{PairwiseMatrix, StudyDesign, StudyFile};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prefscope"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn study_file(dir: &Path) -> PathBuf {
    write(dir, "study.json", &StudyFile::signage().to_json())
}

/// Index of the profile at `(gap, background)` levels.
pub fn profile_at(design: &StudyDesign, gap: usize, background: usize) -> usize {
    design
        .profiles()
        .iter()
        .position(|p| p.levels == [gap, background])
        .unwrap()
}

/// Subjects whose weights factor as `a[gap] * b[background]`. Every ratio is a
/// power of two no larger than 8, so the judged matrices are exactly
/// consistent and Gap Large with Background Subtle is always the strict best.
pub fn consistent_cohort(design: &StudyDesign, n: usize) -> String {
    let shapes: [([f64; 3], [f64; 3]); 3] = [
        ([1.0, 1.0, 2.0], [1.0, 1.0, 2.0]),
        ([1.0, 2.0, 4.0], [1.0, 1.0, 2.0]),
        ([1.0, 1.0, 2.0], [1.0, 2.0, 4.0]),
    ];
    let mut rows = Vec::new();
    for s in 0..n {
        let (a, b) = shapes[s % shapes.len()];
        let w: Vec<f64> = design.profiles().iter().map(|p| a[p.levels[0]] * b[p.levels[1]]).collect();
        let m = PairwiseMatrix::from_weights(&w).unwrap();
        rows.extend(rows_from_matrix(&format!("s{s:02}"), &m, design));
    }
    write_judgments(&rows)
}

/// Four scrambled subjects appended to six consistent ones; the scrambled
/// matrices have a large CR.
pub fn mixed_cohort(design: &StudyDesign) -> String {
    let n = design.n_items();
    let mut text = consistent_cohort(design, 6);
    for s in 0..4usize {
        let m = PairwiseMatrix::from_upper(n, |i, j| {
            let k = (1 + (i * 7 + j * 3 + s * 5) % 9) as f64;
            if (i + j + s) % 2 == 0 { k } else { 1.0 / k }
        })
        .unwrap();
        let block = write_judgments(&rows_from_matrix(&format!("x{s:02}"), &m, design));
        text.push_str(block.split_once('\n').unwrap().1);
    }
    text
}
