//! The binary main/subordinate predicate dataset.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::conllu::{base_deprel, Sentence, Treebank};
use crate::{Error, Result};

/// Base relations that head a subordinate clause.
pub const SUBORDINATE_DEPRELS: [&str; 5] = ["acl", "ccomp", "advcl", "csubj", "xcomp"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClauseLabel {
    #[serde(rename = "MAIN")]
    Main,
    #[serde(rename = "SUB")]
    Sub,
}

impl ClauseLabel {
    /// Label defined by a (possibly subtyped) relation, if any.
    pub fn from_deprel(deprel: &str) -> Option<ClauseLabel> {
        let base = base_deprel(deprel);
        if base == "root" {
            Some(ClauseLabel::Main)
        } else if SUBORDINATE_DEPRELS.contains(&base) {
            Some(ClauseLabel::Sub)
        } else {
            None
        }
    }

    /// Output-unit index in the probe: MAIN = 0, SUB = 1.
    pub fn index(self) -> usize {
        match self {
            ClauseLabel::Main => 0,
            ClauseLabel::Sub => 1,
        }
    }

    pub fn from_index(i: usize) -> ClauseLabel {
        if i == 0 {
            ClauseLabel::Main
        } else {
            ClauseLabel::Sub
        }
    }
}

impl fmt::Display for ClauseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClauseLabel::Main => "MAIN",
            ClauseLabel::Sub => "SUB",
        })
    }
}

/// One labeled predicate. Serializes to the dataset JSON-lines record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseExample {
    #[serde(rename = "treebank")]
    pub treebank_name: String,
    pub sent_id: String,
    /// 1-based token id of the predicate.
    pub predicate_index: usize,
    pub label: ClauseLabel,
    pub source_deprel: String,
}

/// Which sentences contribute examples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceFilter {
    #[default]
    All,
    /// Only sentences with at least one subordinate predicate.
    Complex,
}

fn sentence_examples<'a>(
    tb_name: &'a str,
    s: &'a Sentence,
) -> impl Iterator<Item = ClauseExample> + 'a {
    s.tokens.iter().filter_map(move |t| {
        ClauseLabel::from_deprel(&t.deprel).map(|label| ClauseExample {
            treebank_name: tb_name.to_owned(),
            sent_id: s.sent_id.clone(),
            predicate_index: t.id,
            label,
            source_deprel: t.deprel.clone(),
        })
    })
}

/// Extracts one example per `root` or subordinate-clause predicate, in
/// corpus order.
pub fn extract_examples(tb: &Treebank) -> Vec<ClauseExample> {
    extract_examples_filtered(tb, SentenceFilter::All)
}

pub fn extract_examples_filtered(tb: &Treebank, filter: SentenceFilter) -> Vec<ClauseExample> {
    let mut out = Vec::new();
    for s in &tb.sentences {
        let start = out.len();
        out.extend(sentence_examples(&tb.name, s));
        if filter == SentenceFilter::Complex
            && !out[start..].iter().any(|e| e.label == ClauseLabel::Sub)
        {
            out.truncate(start);
        }
    }
    out
}

/// Returns `(n_main, n_sub)`.
pub fn gold_counts<'a>(examples: impl IntoIterator<Item = &'a ClauseExample>) -> (usize, usize) {
    examples
        .into_iter()
        .fold((0, 0), |(m, s), e| match e.label {
            ClauseLabel::Main => (m + 1, s),
            ClauseLabel::Sub => (m, s + 1),
        })
}

pub fn write_jsonl<W: Write>(mut w: W, examples: &[ClauseExample]) -> Result<()> {
    for e in examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<ClauseExample>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Maps each UD token to the first subword that starts inside it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordAlignment {
    pub sent_id: String,
    pub token_to_first_subword: Vec<usize>,
    pub n_subwords: usize,
}

impl SubwordAlignment {
    /// One subword per token.
    pub fn identity(sentence: &Sentence) -> Self {
        SubwordAlignment {
            sent_id: sentence.sent_id.clone(),
            token_to_first_subword: (0..sentence.len()).collect(),
            n_subwords: sentence.len(),
        }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.n_subwords == 0 {
            return Err("n_subwords must be positive".to_owned());
        }
        if let Some(i) = self
            .token_to_first_subword
            .iter()
            .position(|&s| s >= self.n_subwords)
        {
            return Err(format!("token {} maps past the last subword", i + 1));
        }
        if let Some(w) = self.token_to_first_subword.windows(2).position(|w| w[0] > w[1]) {
            return Err(format!("alignment decreases at token {}", w + 2));
        }
        Ok(())
    }
}

/// Character span of every token form inside the sentence text, found by
/// scanning left to right. `None` marks a form that cannot be located.
pub fn token_char_spans(sentence: &Sentence) -> Vec<Option<Range<usize>>> {
    let text: Vec<char> = sentence.text.chars().collect();
    let mut cursor = 0;
    sentence
        .tokens
        .iter()
        .map(|t| {
            let form: Vec<char> = t.form.chars().collect();
            if form.is_empty() || form.len() > text.len() {
                return None;
            }
            let found = (cursor..=text.len() - form.len())
                .find(|&start| text[start..start + form.len()] == form[..])?;
            cursor = found + form.len();
            Some(found..cursor)
        })
        .collect()
}

/// Aligns tokens to subwords given subword character spans into
/// `sentence.text`.
pub fn align_subwords(sentence: &Sentence, subword_spans: &[Range<usize>]) -> Result<SubwordAlignment> {
    let fail = |message: String| Error::Alignment {
        sent_id: sentence.sent_id.clone(),
        message,
    };
    if subword_spans.is_empty() {
        return Err(fail("no subwords".to_owned()));
    }
    for (i, w) in subword_spans.windows(2).enumerate() {
        if w[1].start < w[0].end {
            return Err(fail(format!(
                "subword spans {} and {} overlap or are unsorted",
                i,
                i + 1
            )));
        }
    }

    let token_spans = token_char_spans(sentence);
    let mut first = Vec::with_capacity(sentence.len());
    // Subword starts are sorted, so a moving lower bound suffices.
    let mut next = 0;
    for (token, span) in sentence.tokens.iter().zip(token_spans) {
        let span = span.ok_or_else(|| {
            fail(format!(
                "form {:?} of token {} not found in text",
                token.form, token.id
            ))
        })?;
        while next < subword_spans.len() && subword_spans[next].start < span.start {
            next += 1;
        }
        match subword_spans.get(next) {
            Some(sw) if sw.start < span.end => first.push(next),
            _ => {
                return Err(fail(format!(
                    "token {} ({:?}) starts no subword",
                    token.id, token.form
                )))
            }
        }
    }
    Ok(SubwordAlignment {
        sent_id: sentence.sent_id.clone(),
        token_to_first_subword: first,
        n_subwords: subword_spans.len(),
    })
}

pub fn write_examples_to<P: AsRef<std::path::Path>>(path: P, examples: &[ClauseExample]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(f);
    write_jsonl(&mut w, examples)?;
    w.flush()?;
    Ok(())
}
