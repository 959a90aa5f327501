//! Inputs shared by the benchmarks.

use prefscope_core::{PairwiseMatrix, StudyDesign, SubjectRecord};

/// Reciprocal n×n matrix with entries on the 1/9..9 grid; deterministic and
/// mildly inconsistent.
pub fn judged_matrix(n: usize) -> PairwiseMatrix {
    PairwiseMatrix::from_upper(n, |i, j| {
        let k = (1 + (i * 5 + j * 3) % 9) as f64;
        if (i + j) % 3 == 0 {
            1.0 / k
        } else {
            k
        }
    })
    .expect("valid matrix")
}

/// `n` subjects on the signage design with distinct weight vectors.
pub fn cohort(n: usize) -> Vec<SubjectRecord> {
    let design = StudyDesign::signage();
    (0..n)
        .map(|s| {
            let w: Vec<f64> = (0..design.n_items())
                .map(|i| 1.0 + ((i * 7 + s * 11) % 13) as f64)
                .collect();
            let total: f64 = w.iter().sum();
            let w = w.into_iter().map(|x| x / total).collect();
            SubjectRecord::new(format!("s{s:03}"), prefscope_core::PriorityVector::new(w).expect("unit sum"))
        })
        .collect()
}
