//! Oracle and invariant suite behind `attnmem verify`.
//!
//! Each criterion rebuilds its expected values independently (brute force,
//! finite differences, resampling) instead of reusing the code under test.

mod analysis;
mod model;
mod oracles;
mod saliency;
mod study;
mod tensors;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use serde::Serialize;

/// `Ok(detail)` on success, `Err(detail)` on failure.
pub type Outcome = Result<String, String>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Wall-clock budget in seconds; exceeding it fails the criterion.
    pub budget_s: Option<f64>,
    pub run: fn() -> Outcome,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { id: 0, name: "tensor file round trips", budget_s: None, run: tensors::round_trips },
    Criterion { id: 1, name: "gradient oracle", budget_s: Some(60.0), run: model::gradient_oracle },
    Criterion { id: 2, name: "synthetic training", budget_s: Some(300.0), run: model::synthetic_training },
    Criterion { id: 3, name: "attention normalization and equivariance", budget_s: None, run: model::attention_invariants },
    Criterion { id: 4, name: "metric oracles", budget_s: None, run: saliency::metric_oracles },
    Criterion { id: 5, name: "AUC-Percentile", budget_s: None, run: saliency::percentile_pool },
    Criterion { id: 6, name: "fixation formulas", budget_s: None, run: saliency::fixation_formulas },
    Criterion { id: 7, name: "panoptic pipeline", budget_s: None, run: analysis::panoptic_world_check },
    Criterion { id: 8, name: "KS p-value", budget_s: None, run: analysis::ks_against_permutations },
    Criterion { id: 9, name: "study tooling", budget_s: Some(120.0), run: study::study_tooling },
];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<42} {} ({:.1} s): {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

pub fn run_criterion(c: &Criterion) -> CriterionResult {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(budget) = c.budget_s.filter(|&b| seconds > b) {
        passed = false;
        detail = format!("{detail}; took {seconds:.1} s, budget {budget:.0} s");
    }
    CriterionResult { id: c.id, name: c.name, passed, detail, seconds }
}

pub fn find(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

/// Runs the selected criteria (all when `only` is empty) in order.
pub fn run_suite(only: &[u8], print: bool) -> SuiteReport {
    let mut criteria = Vec::new();
    for c in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let r = run_criterion(c);
        if print {
            println!("{}", r.line());
        }
        criteria.push(r);
    }
    SuiteReport { criteria }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
