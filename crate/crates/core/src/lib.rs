//! Main-vs-subordinate clause probing over Universal Dependencies treebanks.
//!
//! The crate covers the whole pipeline: CoNLL-U ingestion ([`conllu`]),
//! predicate extraction ([`taskdata`]), token encoders ([`encoder`]), the MLP
//! probe ([`probe`]), scoring and zero-shot transfer grids ([`eval`]),
//! word-order analytics ([`typology`]), synthetic corpora with controlled
//! word order ([`synthlang`]) and run manifests ([`manifest`]).

pub mod conllu;
pub mod encoder;
mod error;
pub mod eval;
pub mod experiment;
pub mod manifest;
pub mod probe;
pub mod synthlang;
pub mod taskdata;
pub mod typology;

pub use error::{Error, Result};
