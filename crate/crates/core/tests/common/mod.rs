//! Random well-formed dependency trees for property tests.

#![allow(dead_code)]

use clauseprobe::conllu::{Features, Sentence, Token, Treebank};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEPRELS: &[&str] = &[
    "nsubj", "obj", "advcl", "ccomp", "acl", "acl:relcl", "xcomp", "csubj", "mark", "punct", "amod", "dep", "obl",
];

/// A random tree over `n` tokens: tokens are attached in a random order,
/// each to a token attached before it, so the result is always acyclic.
pub fn random_sentence(sent_id: &str, n: usize, seed: u64) -> Sentence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(&mut rng);
    let mut head = vec![0; n + 1];
    for k in 1..n {
        head[order[k]] = order[rng.random_range(0..k)];
    }
    let tokens = (1..=n)
        .map(|id| {
            let len = rng.random_range(1..=6);
            let form: String = (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
            let deprel = if head[id] == 0 {
                "root"
            } else {
                DEPRELS[rng.random_range(0..DEPRELS.len())]
            };
            let mut t = Token::new(id, form.clone(), head[id], deprel);
            t.lemma = form;
            t.upos = ["NOUN", "VERB", "ADP", "PUNCT"][rng.random_range(0..4)].to_owned();
            if rng.random_bool(0.3) {
                t.feats = Features::from_pairs([("Number", "Sing"), ("Case", "Nom")]);
            }
            if rng.random_bool(0.2) {
                t.misc = "SpaceAfter=No".to_owned();
            }
            t
        })
        .collect();
    Sentence::new(sent_id, tokens)
}

pub fn random_treebank(n_sentences: usize, max_len: usize, seed: u64) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..n_sentences)
        .map(|i| random_sentence(&format!("s{}", i + 1), rng.random_range(1..=max_len), rng.random()))
        .collect();
    Treebank::new("random", "xx", sentences).unwrap()
}

pub fn arb_treebank() -> impl Strategy<Value = Treebank> {
    (1usize..6, 1usize..14, any::<u64>()).prop_map(|(n, len, seed)| random_treebank(n, len, seed))
}
