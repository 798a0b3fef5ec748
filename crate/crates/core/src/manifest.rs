//! Declarative description of the corpora a run uses.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conllu::{parse_conllu, parse_conllu_lenient, ParseError, Treebank};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Corpus name, e.g. `en_pud` or `UD_English-PUD`.
    pub name: String,
    pub language_code: String,
    pub role: Role,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let m = CorpusManifest {
            entries,
            base_dir: base_dir.into(),
        };
        m.check_names()?;
        Ok(m)
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: CorpusManifest = serde_json::from_str(text)?;
        m.base_dir = base_dir.into();
        m.check_names()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Manifest(format!("{}: {}", path.display(), e)))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    fn check_names(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.name.is_empty() || e.language_code.is_empty() {
                return Err(Error::Manifest("entry with empty name or language code".into()));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Manifest(format!("duplicate entry name {}", e.name)));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Fails naming the first entry whose file does not exist.
    pub fn check_paths(&self) -> Result<()> {
        for e in &self.entries {
            let p = self.resolve(e);
            if !p.is_file() {
                return Err(Error::Manifest(format!(
                    "entry {}: file {} not found",
                    e.name,
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    /// Every language with a train entry needs a dev or test entry when
    /// the best epoch is picked on validation data.
    pub fn check_validation(&self) -> Result<()> {
        for t in self.with_role(Role::Train) {
            let has_eval = self
                .entries
                .iter()
                .any(|e| e.language_code == t.language_code && e.role != Role::Train);
            if !has_eval {
                return Err(Error::Manifest(format!(
                    "train entry {} ({}) has no dev or test corpus",
                    t.name, t.language_code
                )));
            }
        }
        Ok(())
    }

    pub fn load_treebank(&self, entry: &ManifestEntry) -> Result<Treebank> {
        let text = self.read_entry(entry)?;
        parse_conllu(&text, &entry.name, &entry.language_code).map_err(|e| with_entry(entry, e))
    }

    /// Like [`load_treebank`](Self::load_treebank) but skips invalid
    /// sentences and reports them.
    pub fn load_treebank_lenient(&self, entry: &ManifestEntry) -> Result<(Treebank, Vec<ParseError>)> {
        let text = self.read_entry(entry)?;
        parse_conllu_lenient(&text, &entry.name, &entry.language_code).map_err(|e| with_entry(entry, e))
    }

    fn read_entry(&self, entry: &ManifestEntry) -> Result<String> {
        let p = self.resolve(entry);
        fs::read_to_string(&p).map_err(|e| Error::Manifest(format!("entry {}: {}: {}", entry.name, p.display(), e)))
    }
}

fn with_entry(entry: &ManifestEntry, e: Error) -> Error {
    Error::Manifest(format!("entry {}: {}", entry.name, e))
}
