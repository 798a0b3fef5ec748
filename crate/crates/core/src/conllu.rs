//! CoNLL-U reading, validation and writing.
//!
//! Only the basic dependency layer is modeled. Multiword-token range lines
//! (`3-4`) and empty nodes (`5.1`) are kept verbatim, together with their
//! position, so that a parsed sentence serializes back to the same bytes.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::{Error, Result};

/// Morphological features in their original order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Features(Vec<(String, String)>);

impl Features {
    pub fn new() -> Self {
        Features(Vec::new())
    }

    pub fn from_pairs<K, V>(pairs: impl IntoIterator<Item = (K, V)>) -> Self
    where
        K: Into<String>,
        V: Into<String>,
    {
        Features(
            pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parse(field: &str) -> std::result::Result<Self, ParseErrorKind> {
        if field == "_" {
            return Ok(Features::new());
        }
        field
            .split('|')
            .map(|pair| {
                pair.split_once('=')
                    .filter(|(k, _)| !k.is_empty())
                    .map(|(k, v)| (k.to_owned(), v.to_owned()))
                    .ok_or_else(|| ParseErrorKind::BadFeature(pair.to_owned()))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Features)
    }
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("_");
        }
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{}={}", k, v)?;
        }
        Ok(())
    }
}

/// A basic-layer token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: Features,
    /// Head token id, 0 for the virtual root.
    pub head: usize,
    /// Dependency relation, including any `:subtype`.
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token with the given attachment and `_` in the remaining columns.
    pub fn new(id: usize, form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: "_".to_owned(),
            upos: "_".to_owned(),
            xpos: "_".to_owned(),
            feats: Features::new(),
            head,
            deprel: deprel.into(),
            deps: "_".to_owned(),
            misc: "_".to_owned(),
        }
    }

    /// The relation without its subtype: `acl:relcl` -> `acl`.
    pub fn base_deprel(&self) -> &str {
        base_deprel(&self.deprel)
    }

    fn space_after(&self) -> bool {
        !self.misc.split('|').any(|m| m == "SpaceAfter=No")
    }
}

/// Strips a colon-separated subtype from a dependency relation.
pub fn base_deprel(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

/// A line kept verbatim: a multiword-token range or an empty node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpaqueLine {
    /// Number of basic tokens that precede this line.
    pub position: usize,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    /// Raw comment lines, including the leading `#`.
    pub comments: Vec<String>,
    pub opaque: Vec<OpaqueLine>,
}

impl Sentence {
    /// Builds a sentence with `sent_id` and `text` comments. The text is
    /// reconstructed from the token forms.
    pub fn new(sent_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        let sent_id = sent_id.into();
        let text = reconstruct_text(&tokens);
        let comments = vec![
            format!("# sent_id = {}", sent_id),
            format!("# text = {}", text),
        ];
        Sentence {
            sent_id,
            text,
            tokens,
            comments,
            opaque: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based id.
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Ids of the tokens attached directly to `id`.
    pub fn dependents(&self, id: usize) -> impl Iterator<Item = &Token> + '_ {
        self.tokens.iter().filter(move |t| t.head == id)
    }

    pub fn root(&self) -> Option<&Token> {
        self.tokens.iter().find(|t| t.head == 0)
    }
}

fn reconstruct_text(tokens: &[Token]) -> String {
    let mut text = String::new();
    for (i, token) in tokens.iter().enumerate() {
        text.push_str(&token.form);
        if i + 1 < tokens.len() && token.space_after() {
            text.push(' ');
        }
    }
    text
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Treebank {
    pub name: String,
    pub language_code: String,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    /// Checks the treebank-level invariants (non-empty names, unique
    /// sentence ids). Sentence trees are not checked here; see
    /// [`validate_treebank`].
    pub fn new(
        name: impl Into<String>,
        language_code: impl Into<String>,
        sentences: Vec<Sentence>,
    ) -> Result<Self> {
        let name = name.into();
        let language_code = language_code.into();
        if name.is_empty() || language_code.is_empty() {
            return Err(Error::Treebank(
                "name and language code must be non-empty".to_owned(),
            ));
        }
        let mut seen = HashSet::new();
        for s in &sentences {
            if !seen.insert(s.sent_id.as_str()) {
                return Err(Error::Treebank(format!(
                    "duplicate sent_id {} in {}",
                    s.sent_id, name
                )));
            }
        }
        Ok(Treebank {
            name,
            language_code,
            sentences,
        })
    }

    pub fn sentence(&self, sent_id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.sent_id == sent_id)
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// The well-formedness rule a sentence violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    EmptySentence,
    IdSequence,
    EmptyForm,
    SelfLoop,
    HeadOutOfRange,
    NoRoot,
    MultipleRoots,
    RootDeprel,
    Cycle,
    DuplicateSentId,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::EmptySentence => "empty sentence",
            Rule::IdSequence => "token ids not consecutive",
            Rule::EmptyForm => "empty form",
            Rule::SelfLoop => "self-loop",
            Rule::HeadOutOfRange => "head out of range",
            Rule::NoRoot => "no root",
            Rule::MultipleRoots => "multiple roots",
            Rule::RootDeprel => "root token without root deprel",
            Rule::Cycle => "cycle",
            Rule::DuplicateSentId => "duplicate sent_id",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub sent_id: String,
    pub rule: Rule,
    /// Offending token id, when the rule concerns a single token.
    pub token: Option<usize>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.token {
            Some(id) => write!(f, "{}: {} (token {})", self.sent_id, self.rule, id),
            None => write!(f, "{}: {}", self.sent_id, self.rule),
        }
    }
}

/// Returns all rule violations of a single sentence.
pub fn check_sentence(sentence: &Sentence) -> Vec<Diagnostic> {
    let diag = |rule, token| Diagnostic {
        sent_id: sentence.sent_id.clone(),
        rule,
        token,
    };
    let tokens = &sentence.tokens;
    let n = tokens.len();
    if n == 0 {
        return vec![diag(Rule::EmptySentence, None)];
    }

    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.id != i + 1 {
            out.push(diag(Rule::IdSequence, Some(t.id)));
        }
        if t.form.is_empty() {
            out.push(diag(Rule::EmptyForm, Some(t.id)));
        }
        if t.head == t.id {
            out.push(diag(Rule::SelfLoop, Some(t.id)));
        } else if t.head > n {
            out.push(diag(Rule::HeadOutOfRange, Some(t.id)));
        }
    }
    // Positional indexing below relies on consecutive ids.
    if out.iter().any(|d| d.rule == Rule::IdSequence) {
        return out;
    }

    let roots: Vec<&Token> = tokens.iter().filter(|t| t.head == 0).collect();
    match roots.len() {
        0 => out.push(diag(Rule::NoRoot, None)),
        1 => {
            if roots[0].base_deprel() != "root" {
                out.push(diag(Rule::RootDeprel, Some(roots[0].id)));
            }
        }
        _ => out.push(diag(Rule::MultipleRoots, None)),
    }

    // Every token must reach the virtual root; report each cycle once,
    // by its smallest member.
    let mut reported: HashSet<usize> = HashSet::new();
    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if cur == 0 || cur > n || tokens[cur - 1].head == cur {
                break;
            }
            if let Some(pos) = path.iter().position(|&p| p == cur) {
                let cycle = &path[pos..];
                let min = *cycle.iter().min().unwrap();
                if reported.insert(min) {
                    out.push(diag(Rule::Cycle, Some(min)));
                }
                break;
            }
            if path.len() > n {
                break;
            }
            path.push(cur);
            cur = tokens[cur - 1].head;
        }
    }
    out
}

/// Checks every sentence and the uniqueness of sentence ids. An empty
/// result means the treebank satisfies all invariants.
pub fn validate_treebank(tb: &Treebank) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for s in &tb.sentences {
        if !seen.insert(s.sent_id.as_str()) {
            out.push(Diagnostic {
                sent_id: s.sent_id.clone(),
                rule: Rule::DuplicateSentId,
                token: None,
            });
        }
        out.extend(check_sentence(s));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected 10 columns, found {0}")]
    ColumnCount(usize),
    #[error("non-numeric id {0:?}")]
    NonNumericId(String),
    #[error("non-numeric head {0:?}")]
    NonNumericHead(String),
    #[error("duplicate id {0}")]
    DuplicateId(usize),
    #[error("expected token id {expected}, found {found}")]
    IdGap { expected: usize, found: usize },
    #[error("malformed feature {0:?}")]
    BadFeature(String),
    #[error("{rule}{}", .token.map(|t| format!(" at token {}", t)).unwrap_or_default())]
    Tree { rule: Rule, token: Option<usize> },
}

/// A parse failure, located by sentence and 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("sentence {sentence}, line {line}: {kind}")]
pub struct ParseError {
    pub sentence: String,
    pub line: usize,
    pub kind: ParseErrorKind,
}

struct Block<'a> {
    first_line: usize,
    lines: Vec<(usize, &'a str)>,
}

fn blocks(text: &str) -> Vec<Block<'_>> {
    let mut out = Vec::new();
    let mut cur: Option<Block> = None;
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(b) = cur.take() {
                out.push(b);
            }
            continue;
        }
        cur.get_or_insert_with(|| Block {
            first_line: i + 1,
            lines: Vec::new(),
        })
        .lines
        .push((i + 1, line));
    }
    if let Some(b) = cur {
        out.push(b);
    }
    out
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let (k, v) = comment.trim_start_matches('#').split_once('=')?;
    (k.trim() == key).then(|| v.strip_prefix(' ').unwrap_or(v))
}

fn parse_block(block: &Block<'_>, index: usize, name: &str) -> std::result::Result<Sentence, ParseError> {
    let mut comments = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut token_lines = Vec::new();
    let mut opaque = Vec::new();

    let sent_id = block
        .lines
        .iter()
        .filter(|(_, l)| l.starts_with('#'))
        .find_map(|(_, l)| comment_value(l, "sent_id"))
        .map(str::to_owned)
        .unwrap_or_else(|| format!("{}-{}", name, index + 1));
    let err = |line: usize, kind| ParseError {
        sentence: sent_id.clone(),
        line,
        kind,
    };

    let mut text = None;
    for &(lineno, line) in &block.lines {
        if line.starts_with('#') {
            if text.is_none() {
                text = comment_value(line, "text").map(str::to_owned);
            }
            comments.push(line.to_owned());
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(err(lineno, ParseErrorKind::ColumnCount(cols.len())));
        }
        let id_col = cols[0];
        if id_col.contains('-') || id_col.contains('.') {
            let numeric = id_col
                .split(['-', '.'])
                .all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()));
            if !numeric {
                return Err(err(lineno, ParseErrorKind::NonNumericId(id_col.to_owned())));
            }
            opaque.push(OpaqueLine {
                position: tokens.len(),
                line: line.to_owned(),
            });
            continue;
        }
        let id: usize = id_col
            .parse()
            .map_err(|_| err(lineno, ParseErrorKind::NonNumericId(id_col.to_owned())))?;
        let expected = tokens.len() + 1;
        if id != expected {
            let kind = if id >= 1 && id < expected {
                ParseErrorKind::DuplicateId(id)
            } else {
                ParseErrorKind::IdGap { expected, found: id }
            };
            return Err(err(lineno, kind));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| err(lineno, ParseErrorKind::NonNumericHead(cols[6].to_owned())))?;
        let feats = Features::parse(cols[5]).map_err(|k| err(lineno, k))?;
        tokens.push(Token {
            id,
            form: cols[1].to_owned(),
            lemma: cols[2].to_owned(),
            upos: cols[3].to_owned(),
            xpos: cols[4].to_owned(),
            feats,
            head,
            deprel: cols[7].to_owned(),
            deps: cols[8].to_owned(),
            misc: cols[9].to_owned(),
        });
        token_lines.push(lineno);
    }

    let text = text.unwrap_or_else(|| reconstruct_text(&tokens));
    let sentence = Sentence {
        sent_id: sent_id.clone(),
        text,
        tokens,
        comments,
        opaque,
    };
    if let Some(d) = check_sentence(&sentence).into_iter().next() {
        let line = d
            .token
            .and_then(|id| token_lines.get(id - 1).copied())
            .unwrap_or(block.first_line);
        return Err(err(
            line,
            ParseErrorKind::Tree {
                rule: d.rule,
                token: d.token,
            },
        ));
    }
    Ok(sentence)
}

/// Parses a CoNLL-U document. Any malformed sentence fails the whole parse.
pub fn parse_conllu(text: &str, name: &str, language_code: &str) -> Result<Treebank> {
    let mut sentences = Vec::new();
    let mut seen = HashSet::new();
    for (i, block) in blocks(text).iter().enumerate() {
        let s = parse_block(block, i, name)?;
        if !seen.insert(s.sent_id.clone()) {
            return Err(ParseError {
                sentence: s.sent_id,
                line: block.first_line,
                kind: ParseErrorKind::Tree {
                    rule: Rule::DuplicateSentId,
                    token: None,
                },
            }
            .into());
        }
        sentences.push(s);
    }
    Treebank::new(name, language_code, sentences)
}

/// Parses a CoNLL-U document, skipping malformed sentences. The skipped
/// sentences are returned with their errors.
pub fn parse_conllu_lenient(
    text: &str,
    name: &str,
    language_code: &str,
) -> Result<(Treebank, Vec<ParseError>)> {
    let mut sentences = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    for (i, block) in blocks(text).iter().enumerate() {
        match parse_block(block, i, name) {
            Ok(s) if seen.insert(s.sent_id.clone()) => sentences.push(s),
            Ok(s) => skipped.push(ParseError {
                sentence: s.sent_id,
                line: block.first_line,
                kind: ParseErrorKind::Tree {
                    rule: Rule::DuplicateSentId,
                    token: None,
                },
            }),
            Err(e) => skipped.push(e),
        }
    }
    Ok((Treebank::new(name, language_code, sentences)?, skipped))
}

fn write_token(out: &mut String, t: &Token) {
    use std::fmt::Write;
    let _ = writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        t.id, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
    );
}

/// Serializes one sentence, terminated by the blank separator line.
pub fn serialize(sentence: &Sentence) -> String {
    let mut out = String::new();
    for c in &sentence.comments {
        out.push_str(c);
        out.push('\n');
    }
    let mut opaque = sentence.opaque.iter().peekable();
    for pos in 0..=sentence.tokens.len() {
        while let Some(o) = opaque.next_if(|o| o.position <= pos) {
            out.push_str(&o.line);
            out.push('\n');
        }
        if let Some(t) = sentence.tokens.get(pos) {
            write_token(&mut out, t);
        }
    }
    out.push('\n');
    out
}

pub fn serialize_treebank(tb: &Treebank) -> String {
    tb.sentences.iter().map(serialize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HE_LEFT: &str = "# sent_id = s1\n# text = He left\n\
        1\tHe\the\tPRON\t_\tCase=Nom|Person=3\t2\tnsubj\t_\t_\n\
        2\tleft\tleave\tVERB\t_\t_\t0\troot\t_\tSpaceAfter=No\n\n";

    fn parse(text: &str) -> Result<Treebank> {
        parse_conllu(text, "fixture", "en")
    }

    fn parse_err(text: &str) -> ParseError {
        match parse(text) {
            Err(Error::Parse(e)) => e,
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn minimal_sentence() {
        let tb = parse(HE_LEFT).unwrap();
        assert_eq!(tb.sentences.len(), 1);
        let s = &tb.sentences[0];
        assert_eq!(s.sent_id, "s1");
        assert_eq!(s.text, "He left");
        assert_eq!(s.len(), 2);
        assert_eq!(s.root().unwrap().id, 2);
        assert_eq!(s.tokens[0].feats.get("Person"), Some("3"));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let tb = parse(HE_LEFT).unwrap();
        assert_eq!(serialize_treebank(&tb), HE_LEFT);
    }

    #[test]
    fn self_loop_is_rejected() {
        let e = parse_err("1\tHe\t_\t_\t_\t_\t1\tnsubj\t_\t_\n2\tleft\t_\t_\t_\t_\t0\troot\t_\t_\n");
        assert_eq!(e.line, 1);
        assert_eq!(e.to_string(), "sentence fixture-1, line 1: self-loop at token 1");
    }

    #[test]
    fn structural_errors() {
        let e = parse_err("1\tHe\t_\t_\t_\t_\t2\tnsubj\n");
        assert_eq!(e.kind, ParseErrorKind::ColumnCount(8));

        let e = parse_err("1\tHe\t_\t_\t_\t_\tx\tnsubj\t_\t_\n");
        assert_eq!(e.kind, ParseErrorKind::NonNumericHead("x".into()));

        let e = parse_err(
            "1\tHe\t_\t_\t_\t_\t2\tnsubj\t_\t_\n1\tleft\t_\t_\t_\t_\t0\troot\t_\t_\n",
        );
        assert_eq!(e.kind, ParseErrorKind::DuplicateId(1));
        assert_eq!(e.line, 2);

        let e = parse_err("1\tHe\t_\t_\t_\t_\t0\troot\t_\t_\n2\tleft\t_\t_\t_\t_\t0\troot\t_\t_\n");
        assert!(matches!(e.kind, ParseErrorKind::Tree { rule: Rule::MultipleRoots, .. }));

        let e = parse_err("1\tHe\t_\t_\t_\t_\t2\tnsubj\t_\t_\n2\tleft\t_\t_\t_\t_\t1\tdep\t_\t_\n");
        assert!(matches!(e.kind, ParseErrorKind::Tree { rule: Rule::NoRoot, .. }));

        let e = parse_err(
            "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t3\tdep\t_\t_\n3\tc\t_\t_\t_\t_\t2\tdep\t_\t_\n",
        );
        assert_eq!(e.kind, ParseErrorKind::Tree { rule: Rule::Cycle, token: Some(2) });
        assert_eq!(e.line, 2);
    }

    #[test]
    fn duplicate_sent_id_is_rejected() {
        let doubled = format!("{}{}", HE_LEFT, HE_LEFT);
        let e = parse_err(&doubled);
        assert!(matches!(e.kind, ParseErrorKind::Tree { rule: Rule::DuplicateSentId, .. }));
        let (tb, skipped) = parse_conllu_lenient(&doubled, "f", "en").unwrap();
        assert_eq!(tb.sentences.len(), 1);
        assert_eq!(skipped.len(), 1);
    }

    #[test]
    fn multiword_and_empty_nodes_are_opaque() {
        let text = "# sent_id = mw\n\
            1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n\
            1\tde\tde\tADP\t_\t_\t3\tcase\t_\t_\n\
            2\tel\tel\tDET\t_\t_\t3\tdet\t_\t_\n\
            3\tpueblo\tpueblo\tNOUN\t_\t_\t0\troot\t_\t_\n\
            3.1\tes\t_\t_\t_\t_\t_\t_\t3:dep\t_\n\n";
        let tb = parse(text).unwrap();
        let s = &tb.sentences[0];
        assert_eq!(s.len(), 3);
        assert_eq!(s.opaque.len(), 2);
        assert_eq!(s.opaque[0].position, 0);
        assert_eq!(s.opaque[1].position, 3);
        assert_eq!(serialize(s), text);
        // No text comment: rebuilt from forms.
        assert_eq!(s.text, "de el pueblo");
    }

    #[test]
    fn crlf_is_accepted_and_lf_emitted() {
        let crlf = HE_LEFT.replace('\n', "\r\n");
        let tb = parse(&crlf).unwrap();
        assert_eq!(serialize_treebank(&tb), HE_LEFT);
    }

    #[test]
    fn empty_treebank_serializes_to_empty_string() {
        let tb = parse("").unwrap();
        assert!(tb.sentences.is_empty());
        assert_eq!(serialize_treebank(&tb), "");
    }

    #[test]
    fn validation_reports_multiple_roots_once() {
        let mut tb = parse(HE_LEFT).unwrap();
        assert!(validate_treebank(&tb).is_empty());
        tb.sentences[0].tokens[0].head = 0;
        tb.sentences[0].tokens[0].deprel = "root".into();
        let diags = validate_treebank(&tb);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, Rule::MultipleRoots);
        assert_eq!(diags[0].sent_id, "s1");
    }

    #[test]
    fn validation_names_out_of_range_head() {
        let mut tb = parse(HE_LEFT).unwrap();
        tb.sentences[0].tokens[0].head = 7;
        let diags = validate_treebank(&tb);
        assert_eq!(
            diags,
            vec![Diagnostic {
                sent_id: "s1".into(),
                rule: Rule::HeadOutOfRange,
                token: Some(1)
            }]
        );
        assert_eq!(diags[0].to_string(), "s1: head out of range (token 1)");
    }

    #[test]
    fn base_deprel_strips_subtype() {
        assert_eq!(base_deprel("acl:relcl"), "acl");
        assert_eq!(base_deprel("root"), "root");
    }

    #[test]
    fn constructed_sentence_serializes_with_comments() {
        let s = Sentence::new(
            "x1",
            vec![Token::new(1, "Go", 0, "root"), Token::new(2, "!", 1, "punct")],
        );
        assert!(check_sentence(&s).is_empty());
        let text = serialize(&s);
        assert!(text.starts_with("# sent_id = x1\n# text = Go !\n1\tGo\t"));
        let tb = parse(&text).unwrap();
        assert_eq!(tb.sentences[0], s);
    }
}
