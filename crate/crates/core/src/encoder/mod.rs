//! Token encoders and the binary embedding file.
//!
//! Embedding file layout (little-endian):
//!
//! ```text
//! magic      b"CLPRB1\0\0"
//! u32        version (= 1)
//! u32        dim
//! u32        n_layers
//! u32        n_heads
//! u32        flags (bit 0: attention present)
//! records until EOF:
//!   u32 + [u8]            sent_id (byte length, UTF-8)
//!   u32                   n_tokens
//!   u32                   n_subwords
//!   n_tokens x u32        first-subword index per token
//!   n_tokens x dim f32    token vectors
//!   [attention]           n_layers x n_heads x n_subwords x n_subwords f32,
//!                         layer-major, then head, then query row
//! ```

mod toy;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::conllu::Treebank;
use crate::taskdata::{ClauseExample, SubwordAlignment};
use crate::{Error, Result};

pub use toy::{
    sinusoidal_position, EncoderCache, EncoderOutput, ToyEncoderConfig, ToyEncoderParams, ToyLayer,
};

pub const MAGIC: &[u8; 8] = b"CLPRB1\0\0";
pub const VERSION: u32 = 1;
const FLAG_ATTENTION: u32 = 1;

/// Tolerance for attention rows summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceRecord {
    pub alignment: SubwordAlignment,
    /// `n_tokens x dim`, row-major.
    pub vectors: Vec<f32>,
    /// `n_layers x n_heads x n_subwords x n_subwords`.
    pub attention: Option<Vec<f32>>,
}

impl SentenceRecord {
    pub fn sent_id(&self) -> &str {
        &self.alignment.sent_id
    }

    pub fn n_tokens(&self) -> usize {
        self.alignment.token_to_first_subword.len()
    }
}

/// Per-sentence token vectors and optional attention tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    n_layers: usize,
    n_heads: usize,
    with_attention: bool,
    records: Vec<SentenceRecord>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, n_layers: usize, n_heads: usize, with_attention: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if with_attention && (n_layers == 0 || n_heads == 0) {
            return Err(Error::Config(
                "attention tensors need at least one layer and head".into(),
            ));
        }
        Ok(EmbeddingTable {
            dim,
            n_layers,
            n_heads,
            with_attention,
            records: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn has_attention(&self) -> bool {
        self.with_attention
    }

    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, sent_id: &str) -> Option<&SentenceRecord> {
        self.index.get(sent_id).map(|&i| &self.records[i])
    }

    /// Vector of a 1-based token id.
    pub fn vector(&self, sent_id: &str, token_id: usize) -> Option<&[f32]> {
        let r = self.get(sent_id)?;
        let i = token_id.checked_sub(1)?;
        (i < r.n_tokens()).then(|| &r.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Attention matrix (`n_subwords x n_subwords`, row-major) of one head.
    pub fn attention(&self, sent_id: &str, layer: usize, head: usize) -> Option<&[f32]> {
        let r = self.get(sent_id)?;
        let att = r.attention.as_ref()?;
        let n = r.alignment.n_subwords;
        let block = n * n;
        let start = (layer * self.n_heads + head) * block;
        att.get(start..start + block)
    }

    /// Adds a record after checking it against the table shape.
    pub fn insert(&mut self, record: SentenceRecord) -> Result<()> {
        self.check_record(&record).map_err(|message| Error::EmbeddingFormat {
            offset: 0,
            message,
        })?;
        if self.index.contains_key(record.sent_id()) {
            return Err(Error::EmbeddingFormat {
                offset: 0,
                message: format!("duplicate sent_id {}", record.sent_id()),
            });
        }
        self.index
            .insert(record.sent_id().to_owned(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    fn check_record(&self, r: &SentenceRecord) -> std::result::Result<(), String> {
        let id = r.sent_id();
        r.alignment.check().map_err(|e| format!("{}: {}", id, e))?;
        if r.vectors.len() != r.n_tokens() * self.dim {
            return Err(format!(
                "{}: expected {} vector values, found {}",
                id,
                r.n_tokens() * self.dim,
                r.vectors.len()
            ));
        }
        if r.vectors.iter().any(|v| !v.is_finite()) {
            return Err(format!("{}: non-finite vector value", id));
        }
        match (&r.attention, self.with_attention) {
            (None, false) => Ok(()),
            (Some(_), false) => Err(format!("{}: unexpected attention tensor", id)),
            (None, true) => Err(format!("{}: missing attention tensor", id)),
            (Some(att), true) => {
                let n = r.alignment.n_subwords;
                let expected = self.n_layers * self.n_heads * n * n;
                if att.len() != expected {
                    return Err(format!(
                        "{}: expected {} attention values, found {}",
                        id,
                        expected,
                        att.len()
                    ));
                }
                for (row_idx, row) in att.chunks(n).enumerate() {
                    let sum: f64 = row.iter().map(|&v| v as f64).sum();
                    if row.iter().any(|v| !v.is_finite() || *v < 0.0)
                        || (sum - 1.0).abs() > ROW_SUM_TOLERANCE
                    {
                        return Err(format!(
                            "{}: attention row {} is not stochastic (sum {})",
                            id, row_idx, sum
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Checks that every sentence of `tb` has a record with one vector
    /// per token. Returns the offending sentence ids.
    pub fn check_against(&self, tb: &Treebank) -> Vec<String> {
        tb.sentences
            .iter()
            .filter(|s| self.get(&s.sent_id).is_none_or(|r| r.n_tokens() != s.len()))
            .map(|s| s.sent_id.clone())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let flags = if self.with_attention { FLAG_ATTENTION } else { 0 };
        for v in [
            VERSION,
            self.dim as u32,
            self.n_layers as u32,
            self.n_heads as u32,
            flags,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for r in &self.records {
            let id = r.sent_id().as_bytes();
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id);
            out.extend_from_slice(&(r.n_tokens() as u32).to_le_bytes());
            out.extend_from_slice(&(r.alignment.n_subwords as u32).to_le_bytes());
            for &i in &r.alignment.token_to_first_subword {
                out.extend_from_slice(&(i as u32).to_le_bytes());
            }
            for v in &r.vectors {
                out.extend_from_slice(&v.to_le_bytes());
            }
            if let Some(att) = &r.attention {
                for v in att {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = ByteReader { bytes, pos: 0 };
        let magic = rd.take(8, "magic")?;
        if magic != MAGIC {
            return Err(rd.error_at(0, "bad magic"));
        }
        let version = rd.u32("version")?;
        if version != VERSION {
            return Err(rd.error_at(8, &format!("unsupported version {}", version)));
        }
        let dim = rd.u32("dim")? as usize;
        let n_layers = rd.u32("n_layers")? as usize;
        let n_heads = rd.u32("n_heads")? as usize;
        let flags = rd.u32("flags")?;
        let mut table = EmbeddingTable::new(dim, n_layers, n_heads, flags & FLAG_ATTENTION != 0)
            .map_err(|e| rd.error_at(12, &e.to_string()))?;

        while rd.pos < bytes.len() {
            let start = rd.pos as u64;
            let id_len = rd.u32("sent_id length")? as usize;
            let id = std::str::from_utf8(rd.take(id_len, "sent_id")?)
                .map_err(|_| rd.error_at(start + 4, "sent_id is not UTF-8"))?
                .to_owned();
            let n_tokens = rd.u32("n_tokens")? as usize;
            let n_subwords = rd.u32("n_subwords")? as usize;
            let first = (0..n_tokens)
                .map(|_| rd.u32("first-subword index").map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let vectors = rd.f32s(n_tokens * dim, "vectors")?;
            let attention = if table.with_attention {
                Some(rd.f32s(n_layers * n_heads * n_subwords * n_subwords, "attention")?)
            } else {
                None
            };
            let record = SentenceRecord {
                alignment: SubwordAlignment {
                    sent_id: id,
                    token_to_first_subword: first,
                    n_subwords,
                },
                vectors,
                attention,
            };
            table.insert(record).map_err(|e| match e {
                Error::EmbeddingFormat { message, .. } => Error::EmbeddingFormat {
                    offset: start,
                    message,
                },
                other => other,
            })?;
        }
        Ok(table)
    }
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    EmbeddingTable::from_bytes(&fs::read(path)?)
}

pub fn write_embedding_file(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, table.to_bytes())?;
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn error_at(&self, offset: u64, message: &str) -> Error {
        Error::EmbeddingFormat {
            offset,
            message: message.to_owned(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n).filter(|&end| end <= self.bytes.len()) {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error_at(
                self.pos as u64,
                &format!("truncated {} ({} bytes needed, {} left)", what, n, self.bytes.len() - self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| self.error_at(self.pos as u64, "record size overflow"))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Encodes every sentence of a treebank with the toy encoder.
pub fn toy_table(tb: &Treebank, params: &ToyEncoderParams, with_attention: bool) -> Result<EmbeddingTable> {
    let cfg = params.config();
    let mut table = EmbeddingTable::new(cfg.dim, cfg.n_layers, cfg.n_heads, with_attention)?;
    for s in &tb.sentences {
        let out = params.encode(s);
        let attention = with_attention.then(|| out.flat_attention());
        table.insert(SentenceRecord {
            alignment: SubwordAlignment::identity(s),
            vectors: out.vectors.iter().map(|&v| v as f32).collect(),
            attention,
        })?;
    }
    Ok(table)
}

/// Predicate vectors for `examples`, in order. Fails on the first example
/// whose sentence or token has no vector.
pub fn example_vectors(table: &EmbeddingTable, examples: &[ClauseExample]) -> Result<Vec<Vec<f64>>> {
    examples
        .iter()
        .map(|e| {
            table
                .vector(&e.sent_id, e.predicate_index)
                .map(|v| v.iter().map(|&x| x as f64).collect())
                .ok_or_else(|| Error::MissingSentence(format!("{} (token {})", e.sent_id, e.predicate_index)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_vectors_widen_and_report_gaps() {
        let t = one_record_table(false);
        let ex = |sent: &str, tok| ClauseExample {
            treebank_name: "tb".into(),
            sent_id: sent.into(),
            predicate_index: tok,
            label: crate::taskdata::ClauseLabel::Main,
            source_deprel: "root".into(),
        };
        assert_eq!(example_vectors(&t, &[ex("s1", 2)]).unwrap(), vec![vec![0.0, 0.25, -0.125]]);
        assert!(example_vectors(&t, &[ex("s1", 3)]).unwrap_err().to_string().contains("s1 (token 3)"));
        assert!(example_vectors(&t, &[ex("s9", 1)]).is_err());
    }

    fn one_record_table(with_attention: bool) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(3, 1, 2, with_attention).unwrap();
        t.insert(SentenceRecord {
            alignment: SubwordAlignment {
                sent_id: "s1".into(),
                token_to_first_subword: vec![0, 2],
                n_subwords: 3,
            },
            vectors: vec![0.5, -1.0, 2.0, 0.0, 0.25, -0.125],
            attention: with_attention.then(|| {
                let mut a = Vec::new();
                for _ in 0..2 {
                    a.extend_from_slice(&[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.25, 0.25, 0.5]);
                }
                a
            }),
        })
        .unwrap();
        t
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        for att in [false, true] {
            let t = one_record_table(att);
            let path = dir.path().join("t.clprb");
            write_embedding_file(&t, &path).unwrap();
            let back = read_embedding_file(&path).unwrap();
            assert_eq!(back, t);
            assert_eq!(back.vector("s1", 2), Some(&[0.0, 0.25, -0.125][..]));
        }
    }

    #[test]
    fn header_layout() {
        let bytes = one_record_table(true).to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[24..28], &1u32.to_le_bytes());
        // header 28 + id 4+2 + counts 8 + indices 8 + vectors 24 + attention 72
        assert_eq!(bytes.len(), 28 + 6 + 8 + 8 + 24 + 72);
        assert_eq!(bytes, one_record_table(true).to_bytes());
    }

    #[test]
    fn short_vector_is_truncation() {
        let mut t = EmbeddingTable::new(8, 0, 0, false).unwrap();
        t.insert(SentenceRecord {
            alignment: SubwordAlignment {
                sent_id: "a".into(),
                token_to_first_subword: vec![0],
                n_subwords: 1,
            },
            vectors: vec![1.0; 8],
            attention: None,
        })
        .unwrap();
        let mut bytes = t.to_bytes();
        bytes.truncate(bytes.len() - 4);
        let err = EmbeddingTable::from_bytes(&bytes).unwrap_err();
        match err {
            Error::EmbeddingFormat { offset, message } => {
                assert!(message.contains("truncated vectors"), "{}", message);
                assert_eq!(offset, 28 + 5 + 8 + 4);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = one_record_table(false).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingTable::from_bytes(&bytes),
            Err(Error::EmbeddingFormat { offset: 0, .. })
        ));
        let mut bytes = one_record_table(false).to_bytes();
        bytes[8] = 2;
        let err = EmbeddingTable::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 2"));
    }

    #[test]
    fn non_stochastic_attention_is_rejected() {
        let mut bytes = one_record_table(true).to_bytes();
        // First attention value: 1.0 -> 0.5.
        let first_att = bytes.len() - 72;
        bytes[first_att..first_att + 4].copy_from_slice(&0.5f32.to_le_bytes());
        let err = EmbeddingTable::from_bytes(&bytes).unwrap_err();
        match err {
            Error::EmbeddingFormat { offset, message } => {
                assert_eq!(offset, 28);
                assert!(message.contains("not stochastic"));
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn attention_lookup() {
        let t = one_record_table(true);
        let a = t.attention("s1", 0, 1).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a[4], 0.5);
        assert!(t.attention("s1", 1, 0).is_none());
    }
}
