//! Synthetic UD corpora with controlled constituent order and marker
//! placement.
//!
//! Every sentence is a transitive main clause that may embed a complement
//! (`ccomp`) or adverbial (`advcl`) clause, recursively up to `max_depth`.
//! Embedded clauses carry a `mark` token at their left (PRE) or right
//! (POST) edge. SOV grammars put embedded clauses before the matrix clause;
//! SVO and VSO grammars put them after it.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{Sentence, Token, Treebank};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordOrder {
    #[serde(rename = "SVO")]
    Svo,
    #[serde(rename = "SOV")]
    Sov,
    #[serde(rename = "VSO")]
    Vso,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompPosition {
    #[serde(rename = "PRE")]
    Pre,
    #[serde(rename = "POST")]
    Post,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthGrammarConfig {
    pub order: WordOrder,
    /// Defaults to POST for SOV and PRE otherwise.
    pub comp_position: Option<CompPosition>,
    pub n_sentences: usize,
    pub p_subordinate: f64,
    pub max_depth: usize,
    pub n_nouns: usize,
    pub n_verbs: usize,
    pub n_complementizers: usize,
    pub n_adverbial_markers: usize,
    pub n_adjectives: usize,
    /// Each noun takes another prenominal `amod` adjective with this
    /// probability, up to `max_modifiers`; zero gives bare nouns.
    pub p_modifier: f64,
    pub max_modifiers: usize,
    /// Ends every sentence with a `.` token attached to the root as `punct`.
    pub final_punct: bool,
    pub rng_seed: u64,
    /// Treebank name; derived from order, marker position and seed if unset.
    pub name: Option<String>,
}

impl Default for SynthGrammarConfig {
    fn default() -> Self {
        SynthGrammarConfig {
            order: WordOrder::Svo,
            comp_position: None,
            n_sentences: 1000,
            p_subordinate: 0.5,
            max_depth: 2,
            n_nouns: 60,
            n_verbs: 40,
            n_complementizers: 3,
            n_adverbial_markers: 5,
            n_adjectives: 30,
            p_modifier: 0.0,
            max_modifiers: 3,
            final_punct: true,
            rng_seed: 0,
            name: None,
        }
    }
}

impl SynthGrammarConfig {
    pub fn new(order: WordOrder, comp_position: CompPosition, n_sentences: usize, rng_seed: u64) -> Self {
        SynthGrammarConfig {
            order,
            comp_position: Some(comp_position),
            n_sentences,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn comp_position(&self) -> CompPosition {
        self.comp_position.unwrap_or(match self.order {
            WordOrder::Sov => CompPosition::Post,
            WordOrder::Svo | WordOrder::Vso => CompPosition::Pre,
        })
    }

    pub fn treebank_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let order = match self.order {
                WordOrder::Svo => "svo",
                WordOrder::Sov => "sov",
                WordOrder::Vso => "vso",
            };
            let comp = match self.comp_position() {
                CompPosition::Pre => "pre",
                CompPosition::Post => "post",
            };
            format!("synth-{}-{}-{}", order, comp, self.rng_seed)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sentences == 0 || self.max_depth == 0 {
            return Err(Error::Config("n_sentences and max_depth must be positive".into()));
        }
        if !(self.p_subordinate > 0.0 && self.p_subordinate < 1.0) {
            return Err(Error::Config(format!(
                "p_subordinate must lie in (0, 1), got {}",
                self.p_subordinate
            )));
        }
        if [self.n_nouns, self.n_verbs, self.n_complementizers, self.n_adverbial_markers].contains(&0) {
            return Err(Error::Config("vocabulary sizes must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.p_modifier) {
            return Err(Error::Config(format!("p_modifier must lie in [0, 1), got {}", self.p_modifier)));
        }
        if self.p_modifier > 0.0 && self.n_adjectives == 0 {
            return Err(Error::Config("modifiers need at least one adjective".into()));
        }
        Ok(())
    }

    /// Expected fraction of SUB predicates: with embedding probability `p`
    /// at each of `max_depth` levels a sentence has `p + p^2 + ...` embedded
    /// predicates and one root.
    pub fn expected_sub_fraction(&self) -> f64 {
        let p = self.p_subordinate;
        let subs: f64 = (1..=self.max_depth as i32).map(|k| p.powi(k)).sum();
        subs / (1.0 + subs)
    }
}

const CONSONANTS: &[u8] = b"ptkbdgmnslrvz";
const VOWELS: &[u8] = b"aeiou";
/// Letters outside the syllable inventory; they spell the seed suffix, so
/// vocabularies drawn with different seeds never share a form.
const TAG_LETTERS: &[u8] = b"cfhjqwxy";

fn seed_tag(seed: u64) -> String {
    let mut s = seed;
    let mut out = Vec::new();
    loop {
        out.push(TAG_LETTERS[(s % 8) as usize]);
        s /= 8;
        if s == 0 {
            break;
        }
    }
    String::from_utf8(out).unwrap()
}

struct Lexicon {
    nouns: Vec<String>,
    verbs: Vec<String>,
    complementizers: Vec<String>,
    adverbial_markers: Vec<String>,
    adjectives: Vec<String>,
}

impl Lexicon {
    fn generate(cfg: &SynthGrammarConfig, rng: &mut ChaCha8Rng) -> Lexicon {
        let tag = seed_tag(cfg.rng_seed);
        let mut used = HashSet::new();
        let mut draw = |n: usize, syllables: std::ops::RangeInclusive<usize>, rng: &mut ChaCha8Rng| {
            let mut words = Vec::with_capacity(n);
            while words.len() < n {
                let k = rng.random_range(syllables.clone());
                let mut w = String::new();
                for _ in 0..k {
                    w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
                    w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
                }
                w.push_str(&tag);
                if used.insert(w.clone()) {
                    words.push(w);
                }
            }
            words
        };
        Lexicon {
            nouns: draw(cfg.n_nouns, 2..=3, rng),
            verbs: draw(cfg.n_verbs, 2..=3, rng),
            complementizers: draw(cfg.n_complementizers, 1..=2, rng),
            adverbial_markers: draw(cfg.n_adverbial_markers, 1..=2, rng),
            adjectives: draw(cfg.n_adjectives, 2..=3, rng),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ClauseKind {
    Root,
    Complement,
    Adverbial,
}

struct Proto {
    form: String,
    upos: &'static str,
    deprel: &'static str,
    /// Arena index of the head; `None` for the root.
    head: Option<usize>,
}

struct Builder<'a> {
    cfg: &'a SynthGrammarConfig,
    lex: &'a Lexicon,
    arena: Vec<Proto>,
}

impl Builder<'_> {
    fn word(&mut self, form: &str, upos: &'static str, deprel: &'static str, head: Option<usize>) -> usize {
        self.arena.push(Proto {
            form: form.to_owned(),
            upos,
            deprel,
            head,
        });
        self.arena.len() - 1
    }

    fn pick<'v>(rng: &mut ChaCha8Rng, v: &'v [String]) -> &'v str {
        &v[rng.random_range(0..v.len())]
    }

    /// A noun preceded by its adjectives, in surface order.
    fn noun_phrase(&mut self, rng: &mut ChaCha8Rng, deprel: &'static str, head: usize) -> Vec<usize> {
        let lex = self.lex;
        let noun = self.word(Self::pick(rng, &lex.nouns), "NOUN", deprel, Some(head));
        let mut phrase = Vec::new();
        while phrase.len() < self.cfg.max_modifiers && rng.random::<f64>() < self.cfg.p_modifier {
            phrase.push(self.word(Self::pick(rng, &lex.adjectives), "ADJ", "amod", Some(noun)));
        }
        phrase.push(noun);
        phrase
    }

    /// Returns arena indices in surface order.
    fn clause(&mut self, rng: &mut ChaCha8Rng, kind: ClauseKind, head: Option<usize>, depth: usize) -> Vec<usize> {
        let deprel = match kind {
            ClauseKind::Root => "root",
            ClauseKind::Complement => "ccomp",
            ClauseKind::Adverbial => "advcl",
        };
        let lex = self.lex;
        let verb = self.word(Self::pick(rng, &lex.verbs), "VERB", deprel, head);
        let subj = self.noun_phrase(rng, "nsubj", verb);
        let obj = self.noun_phrase(rng, "obj", verb);
        let v = vec![verb];
        let mut order: Vec<usize> = match self.cfg.order {
            WordOrder::Svo => [subj, v, obj].concat(),
            WordOrder::Sov => [subj, obj, v].concat(),
            WordOrder::Vso => [v, subj, obj].concat(),
        };
        let marker_vocab = match kind {
            ClauseKind::Root => None,
            ClauseKind::Complement => Some(&lex.complementizers),
            ClauseKind::Adverbial => Some(&lex.adverbial_markers),
        };
        if let Some(vocab) = marker_vocab {
            let mark = self.word(Self::pick(rng, vocab), "SCONJ", "mark", Some(verb));
            match self.cfg.comp_position() {
                CompPosition::Pre => order.insert(0, mark),
                CompPosition::Post => order.push(mark),
            }
        }
        if depth < self.cfg.max_depth && rng.random::<f64>() < self.cfg.p_subordinate {
            let sub_kind = if rng.random::<bool>() {
                ClauseKind::Complement
            } else {
                ClauseKind::Adverbial
            };
            let sub = self.clause(rng, sub_kind, Some(verb), depth + 1);
            order = match self.cfg.order {
                WordOrder::Sov => sub.into_iter().chain(order).collect(),
                WordOrder::Svo | WordOrder::Vso => order.into_iter().chain(sub).collect(),
            };
        }
        order
    }

    fn sentence(&mut self, rng: &mut ChaCha8Rng, sent_id: String) -> Sentence {
        self.arena.clear();
        let mut order = self.clause(rng, ClauseKind::Root, None, 0);
        if self.cfg.final_punct {
            let root = order
                .iter()
                .copied()
                .find(|&i| self.arena[i].head.is_none())
                .expect("root clause has a verb");
            order.push(self.word(".", "PUNCT", "punct", Some(root)));
        }

        let mut position = vec![0; self.arena.len()];
        for (pos, &i) in order.iter().enumerate() {
            position[i] = pos + 1;
        }
        let tokens = order
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let p = &self.arena[i];
                let mut t = Token::new(pos + 1, p.form.clone(), p.head.map_or(0, |h| position[h]), p.deprel);
                t.lemma = p.form.clone();
                t.upos = p.upos.to_owned();
                t
            })
            .collect();
        Sentence::new(sent_id, tokens)
    }
}

/// Generates a corpus; identical configs give identical corpora.
pub fn generate_corpus(cfg: &SynthGrammarConfig) -> Result<Treebank> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let lex = Lexicon::generate(cfg, &mut rng);
    let name = cfg.treebank_name();
    let mut builder = Builder {
        cfg,
        lex: &lex,
        arena: Vec::new(),
    };
    let sentences = (0..cfg.n_sentences)
        .map(|i| builder.sentence(&mut rng, format!("{}-{}", name, i + 1)))
        .collect();
    let code = match cfg.order {
        WordOrder::Svo => "x-svo",
        WordOrder::Sov => "x-sov",
        WordOrder::Vso => "x-vso",
    };
    Treebank::new(name, code, sentences)
}
