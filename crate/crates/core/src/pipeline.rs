//! End-to-end run: MIDI encoding, tokenizer training, corpus encoding,
//! per-stage packing, mask planning for targeted stages and optional
//! minimal-pair scoring.
//!
//! Each step writes into its own directory under the output directory
//! together with a `step.json` describing its inputs and parameters. A
//! failing step's directory is renamed with a `.quarantine` suffix.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::info;

use crate::hashing::sha256_hex;
use crate::mask::{self, AlignedSample, CategorySet, MaskConfig, PlanRecord};
use crate::midi;
use crate::pack::{self, CorpusSource, MaskPolicy, StageSpec};
use crate::pll::{self, ScoreOptions};
use crate::unigram::{self, TrainerConfig, Vocabulary};
use crate::{Error, Result};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub tokenizer: TokenizerConfig,
    pub curriculum: CurriculumConfig,
    pub seeds: SeedConfig,
    #[serde(default)]
    pub mask: MaskConfig,
    #[serde(default)]
    pub score: ScoreConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub text_dir: PathBuf,
    pub midi_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub categories: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerConfig {
    pub vocab_size: usize,
    #[serde(default = "defaults::seed_multiplier")]
    pub seed_multiplier: usize,
    #[serde(default = "defaults::shrink_factor")]
    pub shrink_factor: f64,
    #[serde(default = "defaults::em_iters")]
    pub em_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    pub preset: String,
}

/// Seeds have no defaults; every run states them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub pack: u64,
    pub mask: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    #[serde(default = "defaults::order")]
    pub order: u8,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            order: defaults::order(),
            alpha: defaults::alpha(),
        }
    }
}

mod defaults {
    pub fn seed_multiplier() -> usize {
        4
    }
    pub fn shrink_factor() -> f64 {
        0.75
    }
    pub fn em_iters() -> usize {
        2
    }
    pub fn order() -> u8 {
        2
    }
    pub fn alpha() -> f64 {
        0.1
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    /// Loads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            vocab_size: self.tokenizer.vocab_size,
            seed_multiplier: self.tokenizer.seed_multiplier,
            shrink_factor: self.tokenizer.shrink_factor,
            em_iters: self.tokenizer.em_iters,
            max_piece_chars: unigram::MAX_PIECE_CHARS,
        }
    }

    /// Hash of the configuration as written (paths unresolved). The output
    /// directory is left out: it decides where artifacts go, not what they
    /// contain.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(paths) = value.get_mut("paths").and_then(|p| p.as_object_mut()) {
            paths.remove("output_dir");
        }
        sha256_hex(&serde_json::to_vec(&value).expect("config serializes"))
    }

    /// Checks everything that can be checked before doing any work.
    pub fn validate(&self) -> Result<Vec<StageSpec>> {
        let stages =
            pack::preset(&self.curriculum.preset).map_err(|e| Error::Config(e.to_string()))?;
        let dir_ok = |p: &Path| self.resolve(p).is_dir();
        if !dir_ok(&self.paths.text_dir) {
            return Err(Error::Config(format!(
                "text_dir {} does not exist",
                self.paths.text_dir.display()
            )));
        }
        if stages.iter().any(|s| s.uses(CorpusSource::Music)) {
            match &self.paths.midi_dir {
                Some(d) if dir_ok(d) => {}
                Some(d) => {
                    return Err(Error::Config(format!(
                        "preset {} needs music but midi_dir {} does not exist",
                        self.curriculum.preset,
                        d.display()
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "preset {} needs music but no midi_dir is configured",
                        self.curriculum.preset
                    )))
                }
            }
        }
        for p in [&self.paths.categories, &self.paths.pairs]
            .into_iter()
            .flatten()
        {
            if !self.resolve(p).is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        self.trainer_config().validate()?;
        self.mask.validate()?;
        if !(1..=2).contains(&self.score.order)
            || self.score.alpha.is_nan()
            || self.score.alpha <= 0.0
        {
            return Err(Error::Config(
                "score.order must be 1 or 2 and score.alpha positive".into(),
            ));
        }
        Ok(stages)
    }
}

/// Name and content hashes of one step's artifacts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: String,
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub preset: String,
    pub steps: Vec<StepRecord>,
}

pub const RUN_MANIFEST: &str = "run-manifest.json";

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn remove_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Sorted regular files of a directory with one of the given extensions.
fn list_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    files.sort();
    Ok(files)
}

struct Runner<'a> {
    out: &'a Path,
    records: Vec<StepRecord>,
}

impl Runner<'_> {
    fn step<T>(&mut self, name: &str, body: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
        let dir = self.out.join(name);
        let quarantine = self.out.join(format!("{name}.quarantine"));
        remove_dir(&dir)?;
        remove_dir(&quarantine)?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        info!(step = name, "step started");
        let result = body(&dir).and_then(|value| Ok((value, hash_dir(&dir)?)));
        match result {
            Ok((value, files)) => {
                info!(step = name, files = files.len(), "step finished");
                self.records.push(StepRecord {
                    step: name.to_string(),
                    files,
                });
                Ok(value)
            }
            Err(e) => {
                let _ = fs::rename(&dir, &quarantine);
                Err(Error::Step {
                    step: name.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }
}

fn hash_dir(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    for path in list_files(
        dir,
        &[
            "json", "txt", "vocab", "ids", "manifest", "jsonl", "tsv", "bin",
        ],
    )? {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, sha256_hex(&bytes));
    }
    Ok(files)
}

/// Non-empty lines of every `.txt` file, files in name order.
pub fn read_text_documents(dir: &Path) -> Result<Vec<String>> {
    let mut docs = Vec::new();
    for path in list_files(dir, &["txt"])? {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        docs.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string),
        );
    }
    Ok(docs)
}

/// One event-code document per `.mid`/`.midi` file, in name order.
pub fn encode_midi_dir(dir: &Path) -> Result<Vec<(String, String)>> {
    list_files(dir, &["mid", "midi"])?
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let score = midi::parse_smf(&bytes).map_err(|e| match e {
                Error::Smf { offset, message } => Error::Smf {
                    offset,
                    message: format!("{}: {message}", path.display()),
                },
                other => other,
            })?;
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            Ok((name, midi::encode_events(&score)))
        })
        .collect()
}

/// Seed for the mask plan of one sample (block) of an epoch.
pub fn sample_seed(base: u64, epoch: usize, block: usize) -> u64 {
    base.wrapping_add((epoch as u64) << 32)
        .wrapping_add(block as u64)
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    let stages = config.validate()?;
    let out = config.resolve(&config.paths.output_dir);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let needs_music = stages.iter().any(|s| s.uses(CorpusSource::Music));
    let mut runner = Runner {
        out: &out,
        records: Vec::new(),
    };

    let music_docs: Vec<String> = if needs_music {
        let midi_dir = config.resolve(config.paths.midi_dir.as_ref().expect("validated"));
        runner.step("midi", |dir| {
            let encoded = encode_midi_dir(&midi_dir)?;
            let mut text = String::new();
            let mut files = Vec::new();
            for (name, doc) in &encoded {
                text.push_str(doc);
                text.push('\n');
                files.push(json!({"file": name, "codes": doc.split_whitespace().count()}));
            }
            write(&dir.join("music.txt"), text)?;
            write_json(
                &dir.join("step.json"),
                &json!({"step": "midi", "midi_dir": config.paths.midi_dir, "files": files}),
            )?;
            Ok(encoded.into_iter().map(|(_, d)| d).collect())
        })?
    } else {
        Vec::new()
    };

    let text_dir = config.resolve(&config.paths.text_dir);
    let text_docs = read_text_documents(&text_dir)?;
    if text_docs.is_empty() {
        return Err(Error::Config(format!(
            "no text documents under {}",
            text_dir.display()
        )));
    }

    let trainer = config.trainer_config();
    let vocab = runner.step("tokenizer", |dir| {
        let all: Vec<&str> = text_docs
            .iter()
            .chain(music_docs.iter())
            .map(String::as_str)
            .collect();
        let (vocab, report) = unigram::train_unigram(&all, &trainer)?;
        vocab.save(&dir.join("model.vocab"))?;
        write_json(
            &dir.join("model.json"),
            &json!({"trainer": trainer, "report": report}),
        )?;
        write_json(
            &dir.join("step.json"),
            &json!({
                "step": "tokenizer",
                "text_dir": config.paths.text_dir,
                "text_documents": text_docs.len(),
                "music_documents": music_docs.len(),
                "trainer": trainer,
            }),
        )?;
        Ok(vocab)
    })?;

    let (text_ids, music_ids) = runner.step("corpus", |dir| {
        let encode = |docs: &[String]| -> Vec<Vec<u32>> {
            docs.iter().map(|d| vocab.encode(d)).collect()
        };
        let text_ids = encode(&text_docs);
        let music_ids = encode(&music_docs);
        write(&dir.join("text.ids"), pack::ids_to_bytes(&text_ids))?;
        write(&dir.join("music.ids"), pack::ids_to_bytes(&music_ids))?;
        write_json(
            &dir.join("step.json"),
            &json!({"step": "corpus", "text_documents": text_ids.len(), "music_documents": music_ids.len()}),
        )?;
        Ok((text_ids, music_ids))
    })?;

    let categories = match &config.paths.categories {
        Some(p) => mask::load_categories(&config.resolve(p))?,
        None => CategorySet::bundled(),
    };

    for (index, stage) in stages.iter().enumerate() {
        let name = format!("stage-{}-{}", index + 1, stage.name);
        runner.step(&name, |dir| {
            let corpus = stage_corpus(stage, &text_ids, &music_ids);
            for epoch in 0..stage.epochs {
                let manifest = pack::pack_epoch(&corpus, stage, config.seeds.pack, epoch)?;
                write(
                    &dir.join(format!("epoch-{epoch:03}.manifest")),
                    manifest.to_bytes(),
                )?;
                if stage.mask_policy == MaskPolicy::Targeted {
                    let mut lines = String::new();
                    for (b, block) in manifest.blocks(&corpus)?.into_iter().enumerate() {
                        let sample = AlignedSample::from_tokens(&vocab, block)?;
                        let plan = mask::plan_masks(
                            &sample,
                            &categories,
                            &config.mask,
                            sample_seed(config.seeds.mask, epoch, b),
                        )?;
                        lines.push_str(&serde_json::to_string(&PlanRecord {
                            sample_index: b,
                            plan,
                        })?);
                        lines.push('\n');
                    }
                    write(&dir.join(format!("epoch-{epoch:03}.plans.jsonl")), lines)?;
                }
            }
            if stage.mask_policy == MaskPolicy::Targeted {
                let stats = mask::mask_stats(&vocab, &corpus, &categories, stage.seq_len)?;
                write_json(&dir.join("mask-stats.json"), &stats)?;
            }
            write_json(
                &dir.join("step.json"),
                &json!({
                    "step": "pack",
                    "preset": config.curriculum.preset,
                    "stage_index": index + 1,
                    "stage": stage,
                    "epochs": stage.epochs,
                    "base_seed": config.seeds.pack,
                    "mask_seed": config.seeds.mask,
                    "mask": config.mask,
                    "documents": corpus.len(),
                }),
            )
        })?;
    }

    if let Some(pairs_path) = &config.paths.pairs {
        runner.step("score", |dir| {
            let pairs = pll::load_pairs(&config.resolve(pairs_path))?;
            let stream = pack::concat_documents(text_ids.iter().map(Vec::as_slice));
            let provider =
                pll::ngram_provider(&stream, vocab.size(), config.score.order, config.score.alpha)?;
            let report = pll::evaluate(&provider, &pairs, &vocab, ScoreOptions::default())?;
            write(&dir.join("report.json"), report.to_json() + "\n")?;
            write(&dir.join("pairs.tsv"), report.to_tsv())?;
            write_json(
                &dir.join("step.json"),
                &json!({"step": "score", "pairs": pairs_path, "provider": "ngram", "score": config.score}),
            )
        })?;
    }

    let manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config_hash: config.hash(),
        preset: config.curriculum.preset.clone(),
        steps: runner.records,
    };
    write_json(&out.join(RUN_MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Documents a stage trains on: text first, then music when included.
pub fn stage_corpus(stage: &StageSpec, text: &[Vec<u32>], music: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut corpus = Vec::new();
    if stage.uses(CorpusSource::Text) {
        corpus.extend_from_slice(text);
    }
    if stage.uses(CorpusSource::Music) {
        corpus.extend_from_slice(music);
    }
    corpus
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    Vocabulary::load(path)
}
