//! Desk-scale word-order congruence experiment on synthetic corpora.
//!
//! Three synthetic languages with disjoint vocabularies (SVO+PRE, VSO+PRE,
//! SOV+POST) are generated; a toy encoder and probe are trained jointly on
//! SVO and, separately, on SOV, then evaluated zero-shot on every test split.

use serde::{Deserialize, Serialize};

use crate::conllu::Treebank;
use crate::encoder::{toy_table, ToyEncoderConfig, ToyEncoderParams};
use crate::eval::{build_transfer_matrix, TestInput, TestSet, TransferMatrix};
use crate::probe::{train, Optimizer, PredicateRef, TrainConfig, TrainSet, TrainedModel};
use crate::synthlang::{generate_corpus, CompPosition, SynthGrammarConfig, WordOrder};
use crate::taskdata::{extract_examples, ClauseExample, ClauseLabel};
use crate::typology::{attention_profile, positional_errors, AttentionProfile, HeadAggregation, PositionalErrorReport, PositionalOptions};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CongruenceSettings {
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub p_subordinate: f64,
    pub max_depth: usize,
    /// Noun-modifier probability; varies clause lengths so that absolute
    /// position stops identifying the root predicate.
    pub p_modifier: f64,
    pub final_punct: bool,
    pub encoder: ToyEncoderConfig,
    pub train: TrainConfig,
}

impl Default for CongruenceSettings {
    fn default() -> Self {
        CongruenceSettings {
            train_sentences: 2000,
            test_sentences: 500,
            p_subordinate: 0.5,
            max_depth: 2,
            p_modifier: 0.0,
            final_punct: true,
            encoder: ToyEncoderConfig::default(),
            train: TrainConfig {
                epochs: 2,
                learning_rate: 5e-3,
                batch_size: 16,
                rng_seed: 0,
                select_best_on_validation: false,
                train_encoder: true,
                hidden_dim: None,
                optimizer: Optimizer::adam(),
            },
        }
    }
}

/// One synthetic language split into train and test treebanks that share
/// a vocabulary.
pub struct SynthLanguage {
    pub label: &'static str,
    pub train: Treebank,
    pub test: Treebank,
}

pub fn split_treebank(tb: &Treebank, n_first: usize) -> Result<(Treebank, Treebank)> {
    let n = n_first.min(tb.sentences.len());
    let first = Treebank::new(format!("{}-train", tb.name), tb.language_code.clone(), tb.sentences[..n].to_vec())?;
    let rest = Treebank::new(format!("{}-test", tb.name), tb.language_code.clone(), tb.sentences[n..].to_vec())?;
    Ok((first, rest))
}

pub fn synth_language(
    label: &'static str,
    order: WordOrder,
    comp: CompPosition,
    seed: u64,
    s: &CongruenceSettings,
) -> Result<SynthLanguage> {
    let cfg = SynthGrammarConfig {
        p_subordinate: s.p_subordinate,
        max_depth: s.max_depth,
        p_modifier: s.p_modifier,
        final_punct: s.final_punct,
        name: Some(label.to_owned()),
        ..SynthGrammarConfig::new(order, comp, s.train_sentences + s.test_sentences, seed)
    };
    let (train, test) = split_treebank(&generate_corpus(&cfg)?, s.train_sentences)?;
    Ok(SynthLanguage { label, train, test })
}

/// Predicate references for every example of a treebank.
pub fn predicate_refs<'a>(tb: &'a Treebank, examples: &[ClauseExample]) -> Vec<PredicateRef<'a>> {
    let index: std::collections::HashMap<&str, &crate::conllu::Sentence> =
        tb.sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    examples
        .iter()
        .map(|e| PredicateRef {
            sentence: index[e.sent_id.as_str()],
            predicate: e.predicate_index,
            label: e.label,
        })
        .collect()
}

/// Jointly trains a fresh toy encoder and probe on one treebank.
pub fn train_toy(tb: &Treebank, s: &CongruenceSettings, seed: u64) -> Result<TrainedModel> {
    let encoder = ToyEncoderParams::init(s.encoder, seed)?;
    let examples = extract_examples(tb);
    let refs = predicate_refs(tb, &examples);
    let cfg = TrainConfig {
        rng_seed: seed,
        ..s.train.clone()
    };
    Ok(train(TrainSet::Toy { encoder, train: &refs, dev: &[] }, &cfg)?.model)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CongruenceRun {
    pub seed: u64,
    pub matrix: TransferMatrix,
    /// SVO-trained model on the SOV test split.
    pub positional: PositionalErrorReport,
    /// SVO-trained encoder on the SVO test split.
    pub trained_attention: AttentionProfile,
    /// The same encoder before training.
    pub untrained_attention: AttentionProfile,
}

pub const SVO: &str = "svo-pre";
pub const VSO: &str = "vso-pre";
pub const SOV: &str = "sov-post";

/// Runs the full experiment for one seed.
pub fn run_congruence(seed: u64, s: &CongruenceSettings) -> Result<CongruenceRun> {
    let base = seed.wrapping_mul(1000);
    let langs = [
        synth_language(SVO, WordOrder::Svo, CompPosition::Pre, base + 1, s)?,
        synth_language(VSO, WordOrder::Vso, CompPosition::Pre, base + 2, s)?,
        synth_language(SOV, WordOrder::Sov, CompPosition::Post, base + 3, s)?,
    ];
    let svo_model = train_toy(&langs[0].train, s, seed)?;
    let sov_model = train_toy(&langs[2].train, s, seed)?;

    let examples: Vec<Vec<ClauseExample>> = langs.iter().map(|l| extract_examples(&l.test)).collect();
    let refs: Vec<Vec<PredicateRef<'_>>> = langs
        .iter()
        .zip(&examples)
        .map(|(l, ex)| predicate_refs(&l.test, ex))
        .collect();
    let sets: Vec<TestSet<'_>> = langs
        .iter()
        .zip(&examples)
        .zip(&refs)
        .map(|((l, ex), r)| TestSet {
            name: l.label.to_owned(),
            gold: ex.iter().map(|e| e.label).collect(),
            input: TestInput::Predicates(r),
        })
        .collect();
    let matrix = build_transfer_matrix(&[(SVO.to_owned(), &svo_model), (SOV.to_owned(), &sov_model)], &sets);

    let sov_pred: Vec<ClauseLabel> = svo_model.predict_refs(&refs[2])?;
    let positional = positional_errors(&examples[2], &sov_pred, &langs[2].test, PositionalOptions::default())?;

    let trained_enc = svo_model.encoder.as_ref().expect("toy model");
    let untrained_enc = ToyEncoderParams::init(s.encoder, seed)?;
    let profile = |enc: &ToyEncoderParams| -> Result<AttentionProfile> {
        let table = toy_table(&langs[0].test, enc, true)?;
        attention_profile(&table, &examples[0], &langs[0].test, HeadAggregation::Mean)
    };
    Ok(CongruenceRun {
        seed,
        matrix,
        positional,
        trained_attention: profile(trained_enc)?,
        untrained_attention: profile(&untrained_enc)?,
    })
}
