//! Confusion matrices, majority baselines and zero-shot transfer grids.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::probe::{predict, PredicateRef, TrainedModel};
use crate::taskdata::ClauseLabel;
use crate::{Error, Result};

/// Counts indexed gold-then-predicted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub main_main: u64,
    pub main_sub: u64,
    pub sub_main: u64,
    pub sub_sub: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.main_main + self.main_sub + self.sub_main + self.sub_sub
    }

    pub fn correct(&self) -> u64 {
        self.main_main + self.sub_sub
    }

    /// `None` for an empty matrix.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    pub fn add(&mut self, gold: ClauseLabel, predicted: ClauseLabel) {
        use ClauseLabel::*;
        match (gold, predicted) {
            (Main, Main) => self.main_main += 1,
            (Main, Sub) => self.main_sub += 1,
            (Sub, Main) => self.sub_main += 1,
            (Sub, Sub) => self.sub_sub += 1,
        }
    }
}

pub fn confusion(gold: &[ClauseLabel], predicted: &[ClauseLabel]) -> Result<ConfusionMatrix> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyInput("confusion matrix labels"));
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(predicted) {
        m.add(g, p);
    }
    Ok(m)
}

/// Accuracy of always predicting SUB.
pub fn majority_baseline(gold: &[ClauseLabel]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyInput("baseline labels"));
    }
    let n_sub = gold.iter().filter(|&&l| l == ClauseLabel::Sub).count();
    Ok(n_sub as f64 / gold.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub treebank_name: String,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    /// Strictly above the majority baseline.
    pub beats_baseline: bool,
}

pub fn evaluate(treebank_name: &str, gold: &[ClauseLabel], predicted: &[ClauseLabel]) -> Result<EvalReport> {
    let confusion = confusion(gold, predicted)?;
    let accuracy = confusion.accuracy().expect("non-empty");
    let baseline_accuracy = majority_baseline(gold)?;
    Ok(EvalReport {
        treebank_name: treebank_name.to_owned(),
        confusion,
        accuracy,
        baseline_accuracy,
        beats_baseline: accuracy > baseline_accuracy,
    })
}

/// Percentage with one decimal, rounding half away from zero.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}", (fraction * 1000.0).round() / 10.0)
}

/// Features a model reads for one test corpus.
#[derive(Clone, Copy, Debug)]
pub enum TestInput<'a> {
    /// Precomputed predicate vectors from an embedding file.
    Vectors(&'a [Vec<f64>]),
    /// Predicates to encode with the model's own toy encoder.
    Predicates(&'a [PredicateRef<'a>]),
}

#[derive(Clone, Debug)]
pub struct TestSet<'a> {
    pub name: String,
    pub gold: Vec<ClauseLabel>,
    pub input: TestInput<'a>,
}

impl TestSet<'_> {
    fn len(&self) -> usize {
        match self.input {
            TestInput::Vectors(v) => v.len(),
            TestInput::Predicates(p) => p.len(),
        }
    }
}

/// Predictions of `model` on `set`.
pub fn predict_set(model: &TrainedModel, set: &TestSet<'_>) -> Result<Vec<ClauseLabel>> {
    if set.len() != set.gold.len() {
        return Err(Error::LengthMismatch {
            left: set.gold.len(),
            right: set.len(),
        });
    }
    match (set.input, &model.encoder) {
        (TestInput::Vectors(xs), None) => {
            if let Some(x) = xs.iter().find(|x| x.len() != model.input_dim()) {
                return Err(Error::DimensionMismatch {
                    expected: model.input_dim(),
                    actual: x.len(),
                });
            }
            predict(xs.iter().map(Vec::as_slice), &model.probe)
        }
        (TestInput::Predicates(refs), Some(_)) => model.predict_refs(refs),
        (TestInput::Vectors(_), Some(_)) => Err(Error::Config(
            "model carries a toy encoder but the test set has precomputed vectors".into(),
        )),
        (TestInput::Predicates(_), None) => Err(Error::Config(
            "model reads precomputed vectors but the test set has none".into(),
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    pub source: String,
    pub target: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Source-model rows by target-corpus columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub cells: Vec<Vec<TransferCell>>,
    /// Mean accuracy over the successful cells of each row.
    pub row_means: Vec<Option<f64>>,
}

impl TransferMatrix {
    pub fn cell(&self, source: &str, target: &str) -> Option<&TransferCell> {
        let r = self.sources.iter().position(|s| s == source)?;
        let c = self.targets.iter().position(|t| t == target)?;
        Some(&self.cells[r][c])
    }

    pub fn accuracy(&self, source: &str, target: &str) -> Option<f64> {
        self.cell(source, target)?.report.as_ref().map(|r| r.accuracy)
    }
}

/// Evaluates every model on every test set. A failing cell records its
/// error; the rest of the grid is still filled.
pub fn build_transfer_matrix(models: &[(String, &TrainedModel)], testsets: &[TestSet<'_>]) -> TransferMatrix {
    let cells: Vec<Vec<TransferCell>> = models
        .iter()
        .map(|(source, model)| {
            testsets
                .iter()
                .map(|set| {
                    let result =
                        predict_set(model, set).and_then(|pred| evaluate(&set.name, &set.gold, &pred));
                    let (report, error) = match result {
                        Ok(r) => (Some(r), None),
                        Err(e) => {
                            log::warn!("cell {} -> {} failed: {}", source, set.name, e);
                            (None, Some(e.to_string()))
                        }
                    };
                    TransferCell {
                        source: source.clone(),
                        target: set.name.clone(),
                        report,
                        error,
                    }
                })
                .collect()
        })
        .collect();
    let row_means = cells
        .iter()
        .map(|row: &Vec<TransferCell>| {
            let accs: Vec<f64> = row
                .iter()
                .filter_map(|c| c.report.as_ref().map(|r| r.accuracy))
                .collect();
            (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
        })
        .collect();
    TransferMatrix {
        sources: models.iter().map(|(n, _)| n.clone()).collect(),
        targets: testsets.iter().map(|t| t.name.clone()).collect(),
        cells,
        row_means,
    }
}

fn table(rows: &[Vec<String>]) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{:<w$}", s, w = widths[c])
                } else {
                    format!("{:>w$}", s, w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Aligned text grid; `*` marks cells that fail to beat the baseline.
pub fn render_transfer_text(m: &TransferMatrix) -> String {
    let mut rows = Vec::new();
    let mut header = vec!["source".to_owned()];
    header.extend(m.targets.iter().cloned());
    header.push("mean".to_owned());
    rows.push(header);
    for (r, source) in m.sources.iter().enumerate() {
        let mut row = vec![source.clone()];
        for cell in &m.cells[r] {
            row.push(match &cell.report {
                Some(rep) if rep.beats_baseline => format_percent(rep.accuracy),
                Some(rep) => format!("{}*", format_percent(rep.accuracy)),
                None => "ERR".to_owned(),
            });
        }
        row.push(m.row_means[r].map(format_percent).unwrap_or_else(|| "-".into()));
        rows.push(row);
    }
    let mut baseline = vec!["baseline".to_owned()];
    for c in 0..m.targets.len() {
        let b = m
            .cells
            .iter()
            .find_map(|row| row[c].report.as_ref().map(|r| r.baseline_accuracy));
        baseline.push(b.map(format_percent).unwrap_or_else(|| "-".into()));
    }
    rows.push(baseline);
    let mut out = table(&rows);
    out.push_str("* accuracy does not exceed the majority-class baseline\n");
    out
}

/// One row per corpus: confusion counts, accuracy and baseline.
pub fn render_reports_text(reports: &[EvalReport]) -> String {
    let mut rows = vec![["corpus", "main-main", "main-sub", "sub-main", "sub-sub", "acc", "baseline"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for r in reports {
        let c = &r.confusion;
        rows.push(vec![
            r.treebank_name.clone(),
            c.main_main.to_string(),
            c.main_sub.to_string(),
            c.sub_main.to_string(),
            c.sub_sub.to_string(),
            format_percent(r.accuracy),
            format_percent(r.baseline_accuracy),
        ]);
    }
    table(&rows)
}
