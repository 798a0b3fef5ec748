//! Bookkeeping for the acceptance run: one line per criterion and an
//! overall verdict.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Required external data is not available.
    Skip,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub number: u32,
    pub title: &'static str,
    pub outcome: Outcome,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {}: {} ({:.1}s of {}s) - {}",
            self.outcome,
            self.number,
            self.title,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub results: Vec<CriterionResult>,
}

impl Report {
    pub fn push(&mut self, r: CriterionResult) {
        println!("{}", r.line());
        self.results.push(r);
    }

    pub fn failed(&self) -> impl Iterator<Item = &CriterionResult> {
        self.results.iter().filter(|r| r.outcome == Outcome::Fail)
    }

    pub fn summary(&self) -> String {
        let count = |o: Outcome| self.results.iter().filter(|r| r.outcome == o).count();
        format!(
            "acceptance: {} passed, {} failed, {} skipped",
            count(Outcome::Pass),
            count(Outcome::Fail),
            count(Outcome::Skip)
        )
    }
}

/// First `.conllu` file below `dir` whose name starts with `prefix`
/// (e.g. `ru_pud` matches `UD_Russian-PUD/ru_pud-ud-test.conllu`).
pub fn find_conllu(dir: &Path, prefix: &str) -> Option<PathBuf> {
    let mut stack = vec![dir.to_path_buf()];
    let mut found = Vec::new();
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).ok()?.flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".conllu"))
            {
                found.push(p);
            }
        }
    }
    found.sort();
    found.into_iter().next()
}

/// Relative difference `|actual - expected| / expected`.
pub fn relative_deviation(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs()
}
