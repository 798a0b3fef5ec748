//! Word-order analytics: head direction, clause positions, complementizer
//! placement and attention to complementizers.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::conllu::{Sentence, Treebank};
use crate::encoder::EmbeddingTable;
use crate::eval::format_percent;
use crate::taskdata::{ClauseExample, ClauseLabel, SUBORDINATE_DEPRELS};
use crate::{Error, Result};

pub const DEFAULT_HEAD_DIRECTION_DEPRELS: [&str; 6] = ["advcl", "acl", "dep", "ccomp", "xcomp", "csubj"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DirectionCounts {
    pub n_total: u64,
    pub n_parent_right: u64,
    /// `None` when `n_total` is zero.
    pub fraction_parent_right: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadDirectionProfile {
    pub by_deprel: BTreeMap<String, DirectionCounts>,
}

impl HeadDirectionProfile {
    pub fn fraction(&self, deprel: &str) -> Option<f64> {
        self.by_deprel.get(deprel)?.fraction_parent_right
    }
}

/// For every token whose base relation is in `deprels`, counts whether its
/// head lies to the right.
pub fn head_direction(tb: &Treebank, deprels: &[&str]) -> HeadDirectionProfile {
    let mut by_deprel: BTreeMap<String, DirectionCounts> = deprels
        .iter()
        .map(|d| (d.to_string(), DirectionCounts::default()))
        .collect();
    for t in tb.sentences.iter().flat_map(|s| &s.tokens) {
        if let Some(c) = by_deprel.get_mut(t.base_deprel()) {
            c.n_total += 1;
            if t.head > t.id {
                c.n_parent_right += 1;
            }
        }
    }
    for c in by_deprel.values_mut() {
        c.fraction_parent_right = (c.n_total > 0).then(|| c.n_parent_right as f64 / c.n_total as f64);
    }
    HeadDirectionProfile { by_deprel }
}

pub fn render_head_direction_text(name: &str, p: &HeadDirectionProfile) -> String {
    let mut out = format!("{}\n", name);
    for (rel, c) in &p.by_deprel {
        let frac = c
            .fraction_parent_right
            .map(format_percent)
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "  {:<8} {:>6} / {:<6} parent right {:>6}%",
            rel, c.n_parent_right, c.n_total, frac
        );
    }
    out
}

/// How much of the dependency subtree counts as the predicate's clause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseExtent {
    /// The full projection of the predicate.
    Projection,
    /// The projection minus embedded subordinate clauses.
    #[default]
    OwnClause,
}

fn children(sentence: &Sentence) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); sentence.len() + 1];
    for t in &sentence.tokens {
        if t.head <= sentence.len() {
            ch[t.head].push(t.id);
        }
    }
    ch
}

fn extent_with(sentence: &Sentence, children: &[Vec<usize>], predicate: usize, extent: ClauseExtent) -> (usize, usize) {
    let (mut lo, mut hi) = (predicate, predicate);
    let mut stack = vec![predicate];
    while let Some(id) = stack.pop() {
        lo = lo.min(id);
        hi = hi.max(id);
        for &c in &children[id] {
            let embedded = extent == ClauseExtent::OwnClause
                && SUBORDINATE_DEPRELS.contains(&sentence.tokens[c - 1].base_deprel());
            if !embedded {
                stack.push(c);
            }
        }
    }
    (lo, hi)
}

fn check_index(sentence: &Sentence, predicate: usize) -> Result<()> {
    if predicate == 0 || predicate > sentence.len() {
        return Err(Error::Config(format!(
            "token {} out of range in sentence {} ({} tokens)",
            predicate,
            sentence.sent_id,
            sentence.len()
        )));
    }
    Ok(())
}

/// Smallest and largest token id in the predicate's subtree.
pub fn clause_span(sentence: &Sentence, predicate: usize) -> Result<(usize, usize)> {
    clause_extent(sentence, predicate, ClauseExtent::Projection)
}

pub fn clause_extent(sentence: &Sentence, predicate: usize, extent: ClauseExtent) -> Result<(usize, usize)> {
    check_index(sentence, predicate)?;
    Ok(extent_with(sentence, &children(sentence), predicate, extent))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionalOptions {
    /// Trailing `punct` tokens do not stop a clause from being final.
    pub final_punct_exempt: bool,
    pub extent: ClauseExtent,
}

impl Default for PositionalOptions {
    fn default() -> Self {
        PositionalOptions {
            final_punct_exempt: true,
            extent: ClauseExtent::OwnClause,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionalErrorReport {
    pub initial_sub_as_main: u64,
    pub initial_main_as_sub: u64,
    pub final_main_as_sub: u64,
    pub final_sub_as_main: u64,
    pub n_initial_sub: u64,
    pub n_initial_main: u64,
    pub n_final_main: u64,
    pub n_final_sub: u64,
}

/// Misclassifications of sentence-initial and sentence-final clauses.
/// `predicted` is aligned with `examples`; sentences are looked up in `tb`.
pub fn positional_errors(
    examples: &[ClauseExample],
    predicted: &[ClauseLabel],
    tb: &Treebank,
    opts: PositionalOptions,
) -> Result<PositionalErrorReport> {
    if examples.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: examples.len(),
            right: predicted.len(),
        });
    }
    let index: HashMap<&str, &Sentence> = tb.sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    let mut tree_cache: HashMap<&str, Vec<Vec<usize>>> = HashMap::new();
    let mut r = PositionalErrorReport::default();
    for (e, &pred) in examples.iter().zip(predicted) {
        let s = *index
            .get(e.sent_id.as_str())
            .ok_or_else(|| Error::MissingSentence(e.sent_id.clone()))?;
        check_index(s, e.predicate_index)?;
        let ch = tree_cache.entry(s.sent_id.as_str()).or_insert_with(|| children(s));
        let (lo, hi) = extent_with(s, ch, e.predicate_index, opts.extent);
        let last = if opts.final_punct_exempt {
            s.tokens
                .iter()
                .rposition(|t| t.base_deprel() != "punct")
                .map_or(s.len(), |i| i + 1)
        } else {
            s.len()
        };
        let initial = lo == 1;
        let fin = hi >= last;
        let wrong = pred != e.label;
        match e.label {
            ClauseLabel::Sub => {
                if initial {
                    r.n_initial_sub += 1;
                    r.initial_sub_as_main += wrong as u64;
                }
                if fin {
                    r.n_final_sub += 1;
                    r.final_sub_as_main += wrong as u64;
                }
            }
            ClauseLabel::Main => {
                if initial {
                    r.n_initial_main += 1;
                    r.initial_main_as_sub += wrong as u64;
                }
                if fin {
                    r.n_final_main += 1;
                    r.final_main_as_sub += wrong as u64;
                }
            }
        }
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompPositionProfile {
    pub n_sub_clauses_with_mark: u64,
    pub n_mark_before_head: u64,
    /// `None` when no subordinate clause has a marker.
    pub fraction_pre: Option<f64>,
}

/// Marker ids attached directly to a predicate, in sentence order.
fn mark_dependents(s: &Sentence, predicate: usize) -> Vec<usize> {
    s.dependents(predicate)
        .filter(|t| t.base_deprel() == "mark")
        .map(|t| t.id)
        .collect()
}

/// Over subordinate predicates with a `mark` dependent, the share whose
/// first marker precedes the predicate.
pub fn comp_position(tb: &Treebank) -> CompPositionProfile {
    let mut p = CompPositionProfile::default();
    for s in &tb.sentences {
        for t in &s.tokens {
            if ClauseLabel::from_deprel(&t.deprel) != Some(ClauseLabel::Sub) {
                continue;
            }
            if let Some(&first) = mark_dependents(s, t.id).first() {
                p.n_sub_clauses_with_mark += 1;
                if first < t.id {
                    p.n_mark_before_head += 1;
                }
            }
        }
    }
    p.fraction_pre = (p.n_sub_clauses_with_mark > 0)
        .then(|| p.n_mark_before_head as f64 / p.n_sub_clauses_with_mark as f64);
    p
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadAggregation {
    #[default]
    Mean,
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerAttention {
    pub layer: usize,
    /// `None` when no example contributed.
    pub mean_mark_mass: Option<f64>,
    pub n_examples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionProfile {
    pub aggregation: HeadAggregation,
    pub layers: Vec<LayerAttention>,
}

impl AttentionProfile {
    pub fn last_layer_mass(&self) -> Option<f64> {
        self.layers.last()?.mean_mark_mass
    }
}

/// Per layer, the attention mass flowing from each subordinate predicate's
/// first subword to the first subwords of its markers, averaged over
/// examples.
pub fn attention_profile(
    table: &EmbeddingTable,
    examples: &[ClauseExample],
    tb: &Treebank,
    aggregation: HeadAggregation,
) -> Result<AttentionProfile> {
    let n_layers = table.n_layers();
    let n_heads = table.n_heads();
    let mut sums = vec![0.0; n_layers];
    let mut count = 0u64;
    let index: HashMap<&str, &Sentence> = tb.sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    for e in examples.iter().filter(|e| e.label == ClauseLabel::Sub) {
        let s = *index
            .get(e.sent_id.as_str())
            .ok_or_else(|| Error::MissingSentence(e.sent_id.clone()))?;
        check_index(s, e.predicate_index)?;
        let marks = mark_dependents(s, e.predicate_index);
        if marks.is_empty() {
            continue;
        }
        let record = table
            .get(&e.sent_id)
            .ok_or_else(|| Error::MissingSentence(e.sent_id.clone()))?;
        if !table.has_attention() {
            return Err(Error::MissingAttention(e.sent_id.clone()));
        }
        let align = &record.alignment.token_to_first_subword;
        if align.len() != s.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                actual: align.len(),
            });
        }
        let n_sub = record.alignment.n_subwords;
        let row = align[e.predicate_index - 1];
        let mut cols: Vec<usize> = marks.iter().map(|&m| align[m - 1]).collect();
        cols.dedup();
        for (layer, sum) in sums.iter_mut().enumerate() {
            let masses = (0..n_heads).map(|h| {
                let a = table
                    .attention(&e.sent_id, layer, h)
                    .expect("shape checked on insert");
                cols.iter().map(|&c| a[row * n_sub + c] as f64).sum::<f64>()
            });
            *sum += match aggregation {
                HeadAggregation::Mean => masses.sum::<f64>() / n_heads as f64,
                HeadAggregation::Max => masses.fold(0.0, f64::max),
            };
        }
        count += 1;
    }
    Ok(AttentionProfile {
        aggregation,
        layers: sums
            .into_iter()
            .enumerate()
            .map(|(layer, sum)| LayerAttention {
                layer,
                mean_mark_mass: (count > 0).then(|| sum / count as f64),
                n_examples: count,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::Token;
    use crate::encoder::SentenceRecord;
    use crate::taskdata::{extract_examples, SubwordAlignment};

    /// "when he left , she cried ." with advcl before the root.
    fn initial_advcl() -> Sentence {
        let rels = [
            ("when", 3, "mark"),
            ("he", 3, "nsubj"),
            ("left", 6, "advcl"),
            (",", 3, "punct"),
            ("she", 6, "nsubj"),
            ("cried", 0, "root"),
            (".", 6, "punct"),
        ];
        Sentence::new(
            "a1",
            rels.iter()
                .enumerate()
                .map(|(i, (f, h, d))| Token::new(i + 1, *f, *h, *d))
                .collect(),
        )
    }

    fn tb(sentences: Vec<Sentence>) -> Treebank {
        Treebank::new("t", "xx", sentences).unwrap()
    }

    #[test]
    fn advcl_before_head_points_right() {
        let p = head_direction(&tb(vec![initial_advcl()]), &DEFAULT_HEAD_DIRECTION_DEPRELS);
        assert_eq!(p.fraction("advcl"), Some(1.0));
        assert_eq!(p.by_deprel["advcl"].n_total, 1);
        assert_eq!(p.fraction("acl"), None);
    }

    #[test]
    fn spans() {
        let s = initial_advcl();
        assert_eq!(clause_span(&s, 6).unwrap(), (1, 7));
        assert_eq!(clause_span(&s, 3).unwrap(), (1, 4));
        assert_eq!(clause_span(&s, 5).unwrap(), (5, 5));
        assert_eq!(clause_extent(&s, 6, ClauseExtent::OwnClause).unwrap(), (5, 7));
        assert!(clause_span(&s, 8).is_err());
        assert!(clause_span(&s, 0).is_err());
    }

    #[test]
    fn initial_sub_predicted_main() {
        let t = tb(vec![initial_advcl()]);
        let ex = extract_examples(&t);
        // examples: advcl (3), root (6)
        let pred = [ClauseLabel::Main, ClauseLabel::Main];
        let r = positional_errors(&ex, &pred, &t, PositionalOptions::default()).unwrap();
        assert_eq!(r.initial_sub_as_main, 1);
        assert_eq!(
            (r.initial_main_as_sub, r.final_main_as_sub, r.final_sub_as_main),
            (0, 0, 0)
        );
        assert_eq!((r.n_initial_sub, r.n_final_main, r.n_initial_main), (1, 1, 0));

        let gold: Vec<ClauseLabel> = ex.iter().map(|e| e.label).collect();
        let r = positional_errors(&ex, &gold, &t, PositionalOptions::default()).unwrap();
        assert_eq!(r.initial_sub_as_main + r.initial_main_as_sub + r.final_main_as_sub + r.final_sub_as_main, 0);
    }

    #[test]
    fn punct_exemption_controls_finality() {
        // "she cried when he left ." : advcl ends before the final punct
        let rels = [
            ("she", 2, "nsubj"),
            ("cried", 0, "root"),
            ("when", 5, "mark"),
            ("he", 5, "nsubj"),
            ("left", 2, "advcl"),
            (".", 2, "punct"),
        ];
        let s = Sentence::new(
            "b",
            rels.iter()
                .enumerate()
                .map(|(i, (f, h, d))| Token::new(i + 1, *f, *h, *d))
                .collect(),
        );
        let t = tb(vec![s]);
        let ex = extract_examples(&t);
        // examples: root (2) then advcl (5); the advcl is misread as MAIN
        let pred = [ClauseLabel::Main, ClauseLabel::Main];
        let on = positional_errors(&ex, &pred, &t, PositionalOptions::default()).unwrap();
        assert_eq!(on.final_sub_as_main, 1);
        assert_eq!(on.final_main_as_sub, 0);
        let off = PositionalOptions {
            final_punct_exempt: false,
            ..Default::default()
        };
        let off = positional_errors(&ex, &pred, &t, off).unwrap();
        assert_eq!(off.final_sub_as_main, 0);
        // the root's own clause keeps the final punct
        assert_eq!(off.n_final_main, 1);
    }

    #[test]
    fn comp_position_profiles() {
        let p = comp_position(&tb(vec![initial_advcl()]));
        assert_eq!((p.n_sub_clauses_with_mark, p.n_mark_before_head), (1, 1));
        assert_eq!(p.fraction_pre, Some(1.0));
        let bare = Sentence::new(
            "c",
            vec![Token::new(1, "go", 0, "root"), Token::new(2, "now", 1, "ccomp")],
        );
        let p = comp_position(&tb(vec![bare]));
        assert_eq!(p.n_sub_clauses_with_mark, 0);
        assert_eq!(p.fraction_pre, None);
    }

    fn table_with(att: impl Fn(usize, usize) -> f32, s: &Sentence, n_layers: usize) -> EmbeddingTable {
        let n = s.len();
        let mut t = EmbeddingTable::new(1, n_layers, 2, true).unwrap();
        let mut a = Vec::new();
        for _ in 0..n_layers * 2 {
            for r in 0..n {
                for c in 0..n {
                    a.push(att(r, c));
                }
            }
        }
        t.insert(SentenceRecord {
            alignment: SubwordAlignment::identity(s),
            vectors: vec![0.0; n],
            attention: Some(a),
        })
        .unwrap();
        t
    }

    #[test]
    fn uniform_attention_gives_k_over_n() {
        let s = initial_advcl();
        let n = s.len();
        let t = tb(vec![s.clone()]);
        let table = table_with(|_, _| 1.0 / n as f32, &s, 2);
        let p = attention_profile(&table, &extract_examples(&t), &t, HeadAggregation::Mean).unwrap();
        for l in &p.layers {
            assert!((l.mean_mark_mass.unwrap() - 1.0 / n as f64).abs() < 1e-6);
            assert_eq!(l.n_examples, 1);
        }
    }

    #[test]
    fn identity_attention_gives_zero() {
        let s = initial_advcl();
        let t = tb(vec![s.clone()]);
        let table = table_with(|r, c| (r == c) as u8 as f32, &s, 1);
        let p = attention_profile(&table, &extract_examples(&t), &t, HeadAggregation::Max).unwrap();
        assert_eq!(p.last_layer_mass(), Some(0.0));
    }

    #[test]
    fn missing_attention_names_sentence() {
        let s = initial_advcl();
        let t = tb(vec![s.clone()]);
        let mut table = EmbeddingTable::new(1, 1, 1, false).unwrap();
        table
            .insert(SentenceRecord {
                alignment: SubwordAlignment::identity(&s),
                vectors: vec![0.0; s.len()],
                attention: None,
            })
            .unwrap();
        let err = attention_profile(&table, &extract_examples(&t), &t, HeadAggregation::Mean).unwrap_err();
        assert!(err.to_string().contains("a1"));
    }
}
