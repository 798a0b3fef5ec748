use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use clauseprobe::conllu::{parse_conllu, serialize_treebank, Treebank};
use clauseprobe::encoder::{example_vectors, read_embedding_file, toy_table, EmbeddingTable, ToyEncoderConfig, ToyEncoderParams};
use clauseprobe::eval::{build_transfer_matrix, format_percent, majority_baseline, render_transfer_text, TestInput, TestSet, TransferMatrix};
use clauseprobe::experiment::{predicate_refs, split_treebank};
use clauseprobe::manifest::{CorpusManifest, ManifestEntry, Role};
use clauseprobe::probe::{
    read_checkpoint, train as train_probe, write_checkpoint, Checkpoint, CheckpointHeader, LabeledVector, Optimizer,
    PredicateRef, TrainConfig, TrainSet,
};
use clauseprobe::synthlang::{generate_corpus, SynthGrammarConfig};
use clauseprobe::taskdata::{extract_examples, extract_examples_filtered, gold_counts, write_examples_to, ClauseExample};
use clauseprobe::typology::{
    attention_profile, comp_position, head_direction, render_head_direction_text, DEFAULT_HEAD_DIRECTION_DEPRELS,
};

use crate::{AttnArgs, BaselineArgs, BuildDatasetArgs, Common, Mode, SynthArgs, TrainArgs, TypologyArgs, ZeroshotArgs};

/// Where token vectors come from.
#[derive(Clone, Debug, PartialEq)]
enum Backend {
    Toy,
    /// Directory of `<entry>.clprb` embedding files.
    File(PathBuf),
}

impl Backend {
    fn parse(spec: &str) -> Result<Self> {
        match spec {
            "toy" => Ok(Backend::Toy),
            _ => match spec.strip_prefix("file:") {
                Some(dir) if !dir.is_empty() => Ok(Backend::File(PathBuf::from(dir))),
                _ => bail!("unknown backend {:?} (expected `toy` or `file:DIR`)", spec),
            },
        }
    }

    fn table_for(&self, entry: &ManifestEntry) -> Result<EmbeddingTable> {
        match self {
            Backend::File(dir) => {
                let path = dir.join(format!("{}.clprb", entry.name));
                read_embedding_file(&path).with_context(|| format!("entry {}: {}", entry.name, path.display()))
            }
            Backend::Toy => bail!("the toy backend has no embedding files"),
        }
    }
}

/// Contents of `--config`. Missing fields keep their defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    /// Replaces the mode's training defaults when present.
    train: Option<TrainConfig>,
    encoder: ToyEncoderConfig,
    /// Grammar for `synth`.
    synth: Option<SynthGrammarConfig>,
}

fn run_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn manifest(common: &Common) -> Result<CorpusManifest> {
    let path = common.manifest.as_ref().ok_or_else(|| anyhow!("--manifest is required"))?;
    let m = CorpusManifest::load(path)?;
    m.check_paths()?;
    Ok(m)
}

fn out_dir(common: &Common) -> Result<&Path> {
    let out = common.out.as_deref().ok_or_else(|| anyhow!("--out is required"))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn load(m: &CorpusManifest, entry: &ManifestEntry, lenient: bool) -> Result<Treebank> {
    if !lenient {
        return Ok(m.load_treebank(entry)?);
    }
    let (tb, skipped) = m.load_treebank_lenient(entry)?;
    for e in &skipped {
        log::warn!("{}: skipped invalid sentence: {}", entry.name, e);
    }
    Ok(tb)
}

/// Prints `text` and, with `--out`, writes `<stem>.json` and `<stem>.txt`.
fn emit(common: &Common, stem: &str, report: &serde_json::Value, text: &str) -> Result<()> {
    print!("{}", text);
    if let Some(out) = &common.out {
        fs::create_dir_all(out)?;
        let mut json = serde_json::to_string_pretty(report)?;
        json.push('\n');
        fs::write(out.join(format!("{}.json", stem)), json)?;
        fs::write(out.join(format!("{}.txt", stem)), text)?;
    }
    Ok(())
}

fn percent(x: Option<f64>) -> String {
    x.map(format_percent).unwrap_or_else(|| "-".into())
}

fn columns(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows.first().map_or(0, Vec::len))
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    rows.iter()
        .map(|r| {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{:<w$}", s, w = widths[c]) } else { format!("{:>w$}", s, w = widths[c]) })
                .collect();
            format!("{}\n", cells.join("  ").trim_end())
        })
        .collect()
}

#[derive(Serialize)]
struct CorpusCounts {
    name: String,
    language_code: String,
    role: Role,
    sentences: usize,
    main: usize,
    sub: usize,
    baseline: Option<f64>,
}

impl CorpusCounts {
    fn new(entry: &ManifestEntry, tb: &Treebank, examples: &[ClauseExample]) -> Self {
        let (main, sub) = gold_counts(examples);
        let gold: Vec<_> = examples.iter().map(|e| e.label).collect();
        CorpusCounts {
            name: entry.name.clone(),
            language_code: entry.language_code.clone(),
            role: entry.role,
            sentences: tb.sentences.len(),
            main,
            sub,
            baseline: majority_baseline(&gold).ok(),
        }
    }
}

fn counts_text(rows: &[CorpusCounts]) -> String {
    let mut table = vec![["corpus", "role", "sentences", "main", "sub", "baseline"].map(String::from).to_vec()];
    for r in rows {
        table.push(vec![
            r.name.clone(),
            format!("{:?}", r.role).to_lowercase(),
            r.sentences.to_string(),
            r.main.to_string(),
            r.sub.to_string(),
            percent(r.baseline),
        ]);
    }
    columns(&table)
}

pub fn build_dataset(a: &BuildDatasetArgs) -> Result<()> {
    let m = manifest(&a.common)?;
    let out = out_dir(&a.common)?;
    let mut rows = Vec::new();
    for entry in &m.entries {
        let tb = load(&m, entry, a.common.lenient)?;
        let examples = extract_examples_filtered(&tb, a.filter.into());
        let path = out.join(format!("{}.jsonl", entry.name));
        write_examples_to(&path, &examples).with_context(|| format!("writing {}", path.display()))?;
        log::info!("{}: {} examples", entry.name, examples.len());
        rows.push(CorpusCounts::new(entry, &tb, &examples));
    }
    let filter: clauseprobe::taskdata::SentenceFilter = a.filter.into();
    let report = json!({ "seed": a.common.seed, "filter": filter, "corpora": rows });
    emit(&a.common, "summary", &report, &counts_text(&rows))
}

/// Training defaults: the mode's schedule for frozen vectors; joint
/// encoder training with Adam for the toy encoder, which a random frozen
/// encoder cannot support.
fn train_config(a: &TrainArgs, rc: &RunConfig, backend: &Backend) -> TrainConfig {
    let mut cfg = match (&rc.train, a.mode) {
        (Some(t), _) => t.clone(),
        (None, Mode::Single) => TrainConfig::single_language(),
        (None, Mode::ZeroShot) => TrainConfig::zero_shot(),
    };
    if rc.train.is_none() && *backend == Backend::Toy {
        cfg.train_encoder = true;
        cfg.optimizer = Optimizer::adam();
        cfg.learning_rate = 5e-3;
        cfg.batch_size = 16;
    }
    if let Some(e) = a.common.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    cfg.rng_seed = a.common.seed;
    cfg
}

struct Corpus {
    entry: ManifestEntry,
    tb: Treebank,
    examples: Vec<ClauseExample>,
}

fn load_corpora<'a>(
    m: &CorpusManifest,
    entries: impl IntoIterator<Item = &'a ManifestEntry>,
    lenient: bool,
) -> Result<Vec<Corpus>> {
    entries
        .into_iter()
        .map(|e| {
            let tb = load(m, e, lenient)?;
            let examples = extract_examples(&tb);
            Ok(Corpus { entry: e.clone(), tb, examples })
        })
        .collect()
}

fn refs_of(corpora: &[Corpus]) -> Vec<PredicateRef<'_>> {
    corpora.iter().flat_map(|c| predicate_refs(&c.tb, &c.examples)).collect()
}

fn vectors_of(backend: &Backend, corpora: &[Corpus]) -> Result<Vec<LabeledVector>> {
    let mut out = Vec::new();
    for c in corpora {
        let table = backend.table_for(&c.entry)?;
        let xs = example_vectors(&table, &c.examples).with_context(|| format!("entry {}", c.entry.name))?;
        out.extend(xs.into_iter().zip(&c.examples).map(|(x, e)| LabeledVector { x, label: e.label }));
    }
    Ok(out)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let m = manifest(&a.common)?;
    let out = out_dir(&a.common)?;
    let backend = Backend::parse(&a.common.backend)?;
    let rc = run_config(&a.common)?;
    let cfg = train_config(a, &rc, &backend);
    cfg.validate()?;

    let train_entries: Vec<&ManifestEntry> = m.with_role(Role::Train).collect();
    if train_entries.is_empty() {
        bail!("manifest has no train entries");
    }
    let mut dev_entries: Vec<&ManifestEntry> = Vec::new();
    if cfg.select_best_on_validation {
        m.check_validation()?;
        let langs: Vec<&str> = train_entries.iter().map(|e| e.language_code.as_str()).collect();
        let of_role = |role| m.with_role(role).filter(|e| langs.contains(&e.language_code.as_str()));
        dev_entries = of_role(Role::Dev).collect();
        if dev_entries.is_empty() {
            log::warn!("no dev corpus for the training languages; selecting on test corpora");
            dev_entries = of_role(Role::Test).collect();
        }
    }
    let train_c = load_corpora(&m, train_entries.iter().copied(), a.common.lenient)?;
    let dev_c = load_corpora(&m, dev_entries.iter().copied(), a.common.lenient)?;
    let name = a
        .name
        .clone()
        .unwrap_or_else(|| train_entries.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join("+"));

    let outcome = match &backend {
        Backend::Toy => {
            let encoder = ToyEncoderParams::init(rc.encoder, a.common.seed)?;
            let (tr, dv) = (refs_of(&train_c), refs_of(&dev_c));
            train_probe(TrainSet::Toy { encoder, train: &tr, dev: &dv }, &cfg)?
        }
        Backend::File(_) => {
            let (tr, dv) = (vectors_of(&backend, &train_c)?, vectors_of(&backend, &dev_c)?);
            train_probe(TrainSet::Vectors { train: &tr, dev: &dv }, &cfg)?
        }
    };
    let model = outcome.model;
    let ck = Checkpoint {
        header: CheckpointHeader {
            dim: model.probe.dim(),
            hidden_dim: model.probe.hidden_dim(),
            backend: a.common.backend.clone(),
            seed: a.common.seed,
            config: cfg.clone(),
            encoder: model.encoder.as_ref().map(|e| e.config()),
            source: train_entries.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(","),
        },
        model,
    };
    let ck_path = out.join(format!("{}.ckpt", name));
    write_checkpoint(&ck, &ck_path).with_context(|| format!("writing {}", ck_path.display()))?;

    let mut text = format!("{} -> {}\n", name, ck_path.display());
    for r in &outcome.history {
        let dev = r.dev_accuracy.map(|d| format!("  dev {}%", format_percent(d))).unwrap_or_default();
        text.push_str(&format!("epoch {:>2}  loss {:.4}{}\n", r.epoch, r.train_loss, dev));
    }
    text.push_str(&format!("kept epoch {}\n", outcome.best_epoch));
    let report = json!({
        "seed": a.common.seed,
        "name": name,
        "checkpoint": ck_path,
        "backend": a.common.backend,
        "config": cfg,
        "train": train_entries.iter().map(|e| &e.name).collect::<Vec<_>>(),
        "dev": dev_entries.iter().map(|e| &e.name).collect::<Vec<_>>(),
        "best_epoch": outcome.best_epoch,
        "history": outcome.history,
    });
    emit(&a.common, &format!("{}.train", name), &report, &text)
}

/// Stacks single-row grids that share their targets.
fn stack_rows(rows: Vec<TransferMatrix>) -> TransferMatrix {
    let mut out = TransferMatrix {
        sources: Vec::new(),
        targets: rows.first().map(|r| r.targets.clone()).unwrap_or_default(),
        cells: Vec::new(),
        row_means: Vec::new(),
    };
    for r in rows {
        out.sources.extend(r.sources);
        out.cells.extend(r.cells);
        out.row_means.extend(r.row_means);
    }
    out
}

pub fn zeroshot(a: &ZeroshotArgs) -> Result<()> {
    let m = manifest(&a.common)?;
    let backend = Backend::parse(&a.common.backend)?;
    let tests = load_corpora(&m, m.with_role(Role::Test), a.common.lenient)?;
    if tests.is_empty() {
        bail!("manifest has no test entries");
    }
    let refs: Vec<Vec<PredicateRef<'_>>> = tests.iter().map(|c| predicate_refs(&c.tb, &c.examples)).collect();
    let vectors: Option<Vec<Vec<Vec<f64>>>> = match backend {
        Backend::Toy => None,
        Backend::File(_) => Some(
            tests
                .iter()
                .map(|c| {
                    let t = backend.table_for(&c.entry)?;
                    example_vectors(&t, &c.examples).with_context(|| format!("entry {}", c.entry.name))
                })
                .collect::<Result<_>>()?,
        ),
    };
    let sets = |toy: bool| -> Option<Vec<TestSet<'_>>> {
        let vecs = vectors.as_ref();
        tests
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let input = if toy {
                    TestInput::Predicates(&refs[i])
                } else {
                    TestInput::Vectors(&vecs?[i])
                };
                Some(TestSet {
                    name: c.entry.name.clone(),
                    gold: c.examples.iter().map(|e| e.label).collect(),
                    input,
                })
            })
            .collect()
    };

    let mut rows = Vec::new();
    for path in &a.checkpoints {
        let ck = read_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
        let source = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let toy = ck.model.encoder.is_some();
        let Some(s) = sets(toy) else {
            bail!("checkpoint {} reads precomputed vectors; pass --backend file:DIR", path.display());
        };
        rows.push(build_transfer_matrix(&[(source, &ck.model)], &s));
    }
    let matrix = stack_rows(rows);
    let mut text = render_transfer_text(&matrix);
    for row in &matrix.cells {
        for c in row.iter().filter(|c| c.error.is_some()) {
            text.push_str(&format!("ERR {} -> {}: {}\n", c.source, c.target, c.error.as_deref().unwrap_or("")));
        }
    }
    let report = json!({ "seed": a.common.seed, "checkpoints": a.checkpoints, "matrix": matrix });
    emit(&a.common, "transfer", &report, &text)
}

pub fn typology(a: &TypologyArgs) -> Result<()> {
    let m = manifest(&a.common)?;
    let deprels: Vec<&str> = if a.deprels.is_empty() {
        DEFAULT_HEAD_DIRECTION_DEPRELS.to_vec()
    } else {
        a.deprels.iter().map(String::as_str).collect()
    };
    let mut rows = Vec::new();
    let mut text = String::new();
    for entry in &m.entries {
        let tb = load(&m, entry, a.common.lenient)?;
        let hd = head_direction(&tb, &deprels);
        let cp = comp_position(&tb);
        text.push_str(&render_head_direction_text(&entry.name, &hd));
        text.push_str(&format!(
            "  marker before predicate {:>6}% of {} marked subordinate clauses\n",
            percent(cp.fraction_pre),
            cp.n_sub_clauses_with_mark
        ));
        rows.push(json!({
            "name": entry.name,
            "language_code": entry.language_code,
            "head_direction": hd,
            "comp_position": cp,
        }));
    }
    let report = json!({ "seed": a.common.seed, "corpora": rows });
    emit(&a.common, "typology", &report, &text)
}

pub fn attn_report(a: &AttnArgs) -> Result<()> {
    let m = manifest(&a.common)?;
    let backend = Backend::parse(&a.common.backend)?;
    let encoder = match (&backend, &a.checkpoint) {
        (Backend::Toy, None) => bail!("the toy backend needs --checkpoint"),
        (Backend::Toy, Some(p)) => {
            let ck = read_checkpoint(p).with_context(|| format!("reading checkpoint {}", p.display()))?;
            let trained = ck
                .model
                .encoder
                .ok_or_else(|| anyhow!("checkpoint {} has no toy encoder", p.display()))?;
            Some(if a.untrained {
                ToyEncoderParams::init(trained.config(), ck.header.seed)?
            } else {
                trained
            })
        }
        (Backend::File(_), _) => None,
    };
    let mut rows = Vec::new();
    let mut text = String::new();
    for entry in &m.entries {
        let tb = load(&m, entry, a.common.lenient)?;
        let table = match &encoder {
            Some(enc) => toy_table(&tb, enc, true)?,
            None => backend.table_for(entry)?,
        };
        let examples = extract_examples(&tb);
        let profile = attention_profile(&table, &examples, &tb, a.heads.into())
            .with_context(|| format!("entry {}", entry.name))?;
        text.push_str(&format!("{}\n", entry.name));
        for l in &profile.layers {
            text.push_str(&format!(
                "  layer {:>2}  mark mass {}  ({} predicates)\n",
                l.layer,
                l.mean_mark_mass.map_or("-".into(), |v| format!("{:.4}", v)),
                l.n_examples
            ));
        }
        rows.push(json!({ "name": entry.name, "profile": profile }));
    }
    let report = json!({ "seed": a.common.seed, "untrained": a.untrained, "corpora": rows });
    emit(&a.common, "attention", &report, &text)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let out = out_dir(&a.common)?;
    let rc = run_config(&a.common)?;
    let mut cfg = match rc.synth {
        Some(c) => c,
        None => {
            let order = a.order.into();
            let comp = a.comp.map(Into::into).unwrap_or(match order {
                clauseprobe::synthlang::WordOrder::Sov => clauseprobe::synthlang::CompPosition::Post,
                _ => clauseprobe::synthlang::CompPosition::Pre,
            });
            SynthGrammarConfig::new(order, comp, a.sentences, a.common.seed)
        }
    };
    cfg.rng_seed = a.common.seed;
    if a.name.is_some() {
        cfg.name = a.name.clone();
    }
    let tb = generate_corpus(&cfg)?;
    let name = tb.name.clone();

    let parts: Vec<(Treebank, Role)> = match a.train {
        Some(n) => {
            if n == 0 || n >= tb.sentences.len() {
                bail!("--train must lie between 1 and {}", tb.sentences.len().saturating_sub(1));
            }
            let (tr, te) = split_treebank(&tb, n)?;
            vec![(tr, Role::Train), (te, Role::Test)]
        }
        None => vec![(tb.clone(), Role::Test)],
    };
    let mut entries = Vec::new();
    let mut text = String::new();
    for (part, role) in &parts {
        let conllu = serialize_treebank(part);
        // the written file must read back as the same corpus
        let back = parse_conllu(&conllu, &part.name, &part.language_code)?;
        if back.sentences != part.sentences {
            bail!("{} does not survive a CoNLL-U round trip", part.name);
        }
        let file = format!("{}.conllu", part.name);
        fs::write(out.join(&file), conllu)?;
        let (main, sub) = gold_counts(&extract_examples(part));
        text.push_str(&format!(
            "{}  {} sentences  {} main  {} sub\n",
            file,
            part.sentences.len(),
            main,
            sub
        ));
        entries.push(ManifestEntry {
            name: part.name.clone(),
            language_code: part.language_code.clone(),
            role: *role,
            path: PathBuf::from(file),
        });
    }

    // merge into the directory's manifest so several languages can share it
    let manifest_path = out.join("manifest.json");
    let mut all = if manifest_path.is_file() {
        CorpusManifest::load(&manifest_path)?.entries
    } else {
        Vec::new()
    };
    all.retain(|e| !entries.iter().any(|n| n.name == e.name));
    all.extend(entries);
    let merged = CorpusManifest::new(all, out)?;
    let mut json_text = serde_json::to_string_pretty(&merged)?;
    json_text.push('\n');
    fs::write(&manifest_path, json_text)?;
    text.push_str(&format!("manifest: {}\n", manifest_path.display()));

    let report = json!({
        "seed": a.common.seed,
        "name": name,
        "config": cfg,
        "expected_sub_fraction": cfg.expected_sub_fraction(),
        "manifest": manifest_path,
    });
    emit(&a.common, &format!("{}.synth", name), &report, &text)
}

pub fn baseline(a: &BaselineArgs) -> Result<()> {
    let m = manifest(&a.common)?;
    let mut rows = Vec::new();
    for entry in &m.entries {
        let tb = load(&m, entry, a.common.lenient)?;
        let examples = extract_examples(&tb);
        rows.push(CorpusCounts::new(entry, &tb, &examples));
    }
    let report = json!({ "seed": a.common.seed, "corpora": rows });
    emit(&a.common, "baseline", &report, &counts_text(&rows))
}
