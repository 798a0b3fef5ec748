mod common;

use std::collections::HashSet;
use std::ops::Range;

use clauseprobe::conllu::{Sentence, Token};
use clauseprobe::taskdata::{
    align_subwords, extract_examples, extract_examples_filtered, gold_counts, read_jsonl, token_char_spans,
    write_jsonl, ClauseLabel, SentenceFilter, SUBORDINATE_DEPRELS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::arb_treebank;

/// Exhaustive oracle: for each token, scan every subword and take the
/// first whose start falls inside the token's character span.
fn brute_force_alignment(sentence: &Sentence, spans: &[Range<usize>]) -> Option<Vec<usize>> {
    token_char_spans(sentence)
        .into_iter()
        .map(|span| {
            let span = span?;
            (0..spans.len()).find(|&j| span.contains(&spans[j].start))
        })
        .collect()
}

/// Cuts every token of the sentence into 1..=3 pieces at random points.
fn random_segmentation(sentence: &Sentence, seed: u64) -> Vec<Range<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for span in token_char_spans(sentence).into_iter().flatten() {
        let mut cuts: Vec<usize> = (span.start + 1..span.end).filter(|_| rng.random_bool(0.3)).collect();
        cuts.insert(0, span.start);
        cuts.push(span.end);
        out.extend(cuts.windows(2).map(|w| w[0]..w[1]));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn labels_partition_qualifying_tokens(tb in arb_treebank()) {
        let ex = extract_examples(&tb);
        let mut seen = HashSet::new();
        for e in &ex {
            let t = tb.sentence(&e.sent_id).unwrap().token(e.predicate_index).unwrap();
            prop_assert_eq!(&t.deprel, &e.source_deprel);
            prop_assert_eq!(ClauseLabel::from_deprel(&t.deprel), Some(e.label));
            prop_assert!(seen.insert((e.sent_id.clone(), e.predicate_index)));
        }
        let qualifying = tb
            .sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.base_deprel() == "root" || SUBORDINATE_DEPRELS.contains(&t.base_deprel()))
            .count();
        let (main, sub) = gold_counts(&ex);
        prop_assert_eq!(main + sub, ex.len());
        prop_assert_eq!(ex.len(), qualifying);
        prop_assert_eq!(main, tb.sentences.len());
    }

    #[test]
    fn complex_filter_keeps_exactly_sentences_with_sub(tb in arb_treebank()) {
        let all = extract_examples(&tb);
        let complex = extract_examples_filtered(&tb, SentenceFilter::Complex);
        let with_sub: HashSet<&str> = all
            .iter()
            .filter(|e| e.label == ClauseLabel::Sub)
            .map(|e| e.sent_id.as_str())
            .collect();
        let expected: Vec<_> = all.iter().filter(|e| with_sub.contains(e.sent_id.as_str())).cloned().collect();
        prop_assert_eq!(complex, expected);
    }

    #[test]
    fn jsonl_round_trip(tb in arb_treebank()) {
        let ex = extract_examples(&tb);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &ex).unwrap();
        prop_assert_eq!(read_jsonl(&buf[..]).unwrap(), ex);
    }

    #[test]
    fn alignment_matches_brute_force(tb in arb_treebank(), seed in any::<u64>()) {
        for s in &tb.sentences {
            let spans = random_segmentation(s, seed);
            let oracle = brute_force_alignment(s, &spans);
            let got = align_subwords(s, &spans);
            match oracle {
                Some(expected) => {
                    let a = got.unwrap();
                    prop_assert!(a.check().is_ok());
                    prop_assert!(a.token_to_first_subword.windows(2).all(|w| w[0] < w[1]));
                    prop_assert_eq!(a.token_to_first_subword, expected);
                    prop_assert_eq!(a.n_subwords, spans.len());
                }
                None => prop_assert!(got.is_err()),
            }
        }
    }
}

#[test]
fn three_way_split_fixture() {
    let mut tokens: Vec<Token> = ["They", "were", "unbelievably", "quick", "."]
        .iter()
        .enumerate()
        .map(|(i, f)| Token::new(i + 1, *f, if i == 3 { 0 } else { 4 }, if i == 3 { "root" } else { "dep" }))
        .collect();
    tokens[3].misc = "SpaceAfter=No".to_owned();
    let s = Sentence::new("fx", tokens);
    assert_eq!(s.text, "They were unbelievably quick.");
    // "un" + "believ" + "ably"
    let spans = vec![0..4, 5..9, 10..12, 12..18, 18..22, 23..28, 28..29];
    let a = align_subwords(&s, &spans).unwrap();
    assert_eq!(Some(a.token_to_first_subword.clone()), brute_force_alignment(&s, &spans));
    assert_eq!(a.token_to_first_subword, vec![0, 1, 2, 5, 6]);
}

#[test]
fn token_starting_no_subword_is_an_error() {
    let s = Sentence::new("fx", vec![Token::new(1, "ab", 0, "root"), Token::new(2, "cd", 1, "obj")]);
    // one subword spanning both tokens and the space
    let err = align_subwords(&s, std::slice::from_ref(&(0..5))).unwrap_err().to_string();
    assert!(err.contains("token 2"), "{}", err);
}
