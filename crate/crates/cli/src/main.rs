use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::info;
use tracing_subscriber::EnvFilter;

use mlmprep::mask::{self, AlignedSample, CategorySet, MaskConfig, PlanRecord};
use mlmprep::midi;
use mlmprep::pack::{self, CorpusSource};
use mlmprep::pipeline::{self, PipelineConfig};
use mlmprep::pll::{self, ExternalProvider, LogitProvider, ScoreOptions};
use mlmprep::unigram::{self, TrainerConfig, Vocabulary};

#[derive(Parser)]
#[command(
    name = "mlmprep",
    version,
    about = "Data preparation for staged masked-LM training"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert between Standard MIDI Files and event-code text.
    #[command(subcommand)]
    Midi(MidiCmd),
    /// Train and apply the unigram tokenizer.
    #[command(subcommand)]
    Tokenizer(TokenizerCmd),
    /// Plan targeted masks or count category coverage.
    #[command(subcommand)]
    Mask(MaskCmd),
    /// Pack one curriculum stage into per-epoch block manifests.
    Pack(PackArgs),
    /// Score minimal pairs by pseudo-log-likelihood.
    Score(ScoreArgs),
    /// Run every step from a config file.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Serve an n-gram provider over the line-delimited JSON protocol.
    #[command(hide = true)]
    ServeProvider(ServeArgs),
}

#[derive(Subcommand)]
enum MidiCmd {
    /// Print one line of event codes per input file.
    Encode {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Turn event codes (whole input as one score) into a format-0 SMF.
    Decode {
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = midi::DEFAULT_TICKS_PER_QUARTER)]
        ticks_per_quarter: u16,
    },
}

#[derive(Subcommand)]
enum TokenizerCmd {
    /// Train a vocabulary on text files (one document per line).
    Train {
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        seed_multiplier: usize,
        #[arg(long, default_value_t = 0.75)]
        shrink_factor: f64,
        #[arg(long, default_value_t = 2)]
        em_iters: usize,
    },
    /// Encode each input line to space-separated ids.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: LineIo,
    },
    /// Decode each line of space-separated ids to text.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: LineIo,
    },
}

#[derive(Args)]
struct LineIo {
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Text file, one document per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 512)]
    sample_length: usize,
    /// Category file; the bundled lists are used when absent.
    #[arg(long)]
    categories: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MaskCmd {
    /// Write one JSON mask plan per sample.
    Plan {
        #[command(flatten)]
        samples: SampleArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.15)]
        budget: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Count targeted tokens per category.
    Stats {
        #[command(flatten)]
        samples: SampleArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PackArgs {
    #[arg(long)]
    preset: String,
    /// 1-based stage number within the preset.
    #[arg(long)]
    stage: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    model: PathBuf,
    /// Text documents, one per line.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Event-code documents, one per line.
    #[arg(long)]
    music: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Also write each epoch's blocks as little-endian u32 ids.
    #[arg(long)]
    export_blocks: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Ngram,
    External,
}

#[derive(Args)]
struct NgramArgs {
    /// Text the n-gram provider is estimated from, one document per line.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    order: u8,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_enum)]
    provider: ProviderKind,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    ngram: NgramArgs,
    /// Directory for report.json and pairs.tsv; the report goes to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_cls: bool,
    #[arg(long)]
    no_eos: bool,
    /// Provider program and its arguments, after `--`.
    #[arg(last = true)]
    command: Vec<String>,
}

#[derive(Subcommand)]
enum PipelineCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        pack_seed: Option<u64>,
        #[arg(long)]
        mask_seed: Option<u64>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    ngram: NgramArgs,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .json()
        .with_writer(io::stderr)
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = format!("{e:#}"), "failed");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Midi(cmd) => midi_cmd(cmd),
        Cmd::Tokenizer(cmd) => tokenizer_cmd(cmd),
        Cmd::Mask(cmd) => mask_cmd(cmd),
        Cmd::Pack(args) => pack_cmd(args),
        Cmd::Score(args) => score_cmd(args),
        Cmd::Pipeline(PipelineCmd::Run {
            config,
            output_dir,
            preset,
            vocab_size,
            pack_seed,
            mask_seed,
        }) => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.paths.output_dir = std::path::absolute(dir)?;
            }
            if let Some(p) = preset {
                cfg.curriculum.preset = p;
            }
            if let Some(v) = vocab_size {
                cfg.tokenizer.vocab_size = v;
            }
            if let Some(s) = pack_seed {
                cfg.seeds.pack = s;
            }
            if let Some(s) = mask_seed {
                cfg.seeds.mask = s;
            }
            let manifest = pipeline::run_pipeline(&cfg)?;
            info!(steps = manifest.steps.len(), config_hash = %manifest.config_hash, "pipeline finished");
            Ok(())
        }
        Cmd::ServeProvider(args) => {
            let vocab = Vocabulary::load(&args.model)?;
            let provider = ngram_from_args(&args.ngram, &vocab)?;
            let stdin = io::stdin();
            pll::serve_provider(&provider, stdin.lock(), io::stdout().lock())?;
            Ok(())
        }
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text)?;
            Ok(text)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_documents(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut docs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() {
            docs.push(line.to_string());
        }
    }
    Ok(docs)
}

fn midi_cmd(cmd: MidiCmd) -> Result<()> {
    match cmd {
        MidiCmd::Encode { files, output } => {
            let mut text = String::new();
            for path in &files {
                let bytes =
                    fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let score = midi::parse_smf(&bytes).with_context(|| path.display().to_string())?;
                text.push_str(&midi::encode_events(&score));
                text.push('\n');
            }
            write_output(output.as_deref(), text.as_bytes())
        }
        MidiCmd::Decode {
            input,
            output,
            ticks_per_quarter,
        } => {
            let text = read_input(input.as_deref())?;
            let score = midi::decode_events_with_resolution(&text, ticks_per_quarter)?;
            fs::write(&output, midi::write_smf(&score)?)
                .with_context(|| format!("writing {}", output.display()))
        }
    }
}

fn sidecar_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn tokenizer_cmd(cmd: TokenizerCmd) -> Result<()> {
    match cmd {
        TokenizerCmd::Train {
            vocab_size,
            input,
            output,
            seed_multiplier,
            shrink_factor,
            em_iters,
        } => {
            let mut docs = Vec::new();
            for path in &input {
                docs.extend(read_documents(path)?);
            }
            let config = TrainerConfig {
                vocab_size,
                seed_multiplier,
                shrink_factor,
                em_iters,
                max_piece_chars: unigram::MAX_PIECE_CHARS,
            };
            let (vocab, report) = unigram::train_unigram(&docs, &config)?;
            vocab.save(&output)?;
            let sidecar = serde_json::json!({
                "trainer": config,
                "inputs": input,
                "report": report,
            });
            fs::write(
                sidecar_path(&output),
                serde_json::to_string_pretty(&sidecar)? + "\n",
            )?;
            info!(size = vocab.size(), model = %output.display(), "tokenizer trained");
            Ok(())
        }
        TokenizerCmd::Encode { model, io } => {
            let vocab = Vocabulary::load(&model)?;
            let text = read_input(io.input.as_deref())?;
            let mut out = String::new();
            for line in text.lines() {
                let ids: Vec<String> = vocab.encode(line).iter().map(u32::to_string).collect();
                out.push_str(&ids.join(" "));
                out.push('\n');
            }
            write_output(io.output.as_deref(), out.as_bytes())
        }
        TokenizerCmd::Decode { model, io } => {
            let vocab = Vocabulary::load(&model)?;
            let text = read_input(io.input.as_deref())?;
            let mut out = String::new();
            for (n, line) in text.lines().enumerate() {
                let ids = line
                    .split_whitespace()
                    .map(str::parse::<u32>)
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("line {}: ids must be unsigned integers", n + 1))?;
                out.push_str(&vocab.decode(&ids)?);
                out.push('\n');
            }
            write_output(io.output.as_deref(), out.as_bytes())
        }
    }
}

fn load_samples(args: &SampleArgs) -> Result<(Vec<AlignedSample>, CategorySet)> {
    let vocab = Vocabulary::load(&args.model)?;
    let docs: Vec<Vec<u32>> = read_documents(&args.input)?
        .iter()
        .map(|d| vocab.encode(d))
        .collect();
    let samples = mask::chunk_samples(&vocab, &docs, args.sample_length)?;
    let categories = match &args.categories {
        Some(p) => mask::load_categories(p)?,
        None => CategorySet::bundled(),
    };
    Ok((samples, categories))
}

fn mask_cmd(cmd: MaskCmd) -> Result<()> {
    match cmd {
        MaskCmd::Plan {
            samples,
            seed,
            budget,
            output,
        } => {
            let (samples, categories) = load_samples(&samples)?;
            let config = MaskConfig {
                budget,
                ..MaskConfig::default()
            };
            let mut out = String::new();
            for (i, sample) in samples.iter().enumerate() {
                let plan = mask::plan_masks(
                    sample,
                    &categories,
                    &config,
                    pipeline::sample_seed(seed, 0, i),
                )?;
                out.push_str(&serde_json::to_string(&PlanRecord {
                    sample_index: i,
                    plan,
                })?);
                out.push('\n');
            }
            info!(samples = samples.len(), "mask plans written");
            write_output(output.as_deref(), out.as_bytes())
        }
        MaskCmd::Stats { samples, output } => {
            let (samples, categories) = load_samples(&samples)?;
            let stats = mask::mask_stats_for_samples(&samples, &categories);
            write_output(
                output.as_deref(),
                (serde_json::to_string_pretty(&stats)? + "\n").as_bytes(),
            )
        }
    }
}

fn pack_cmd(args: PackArgs) -> Result<()> {
    let stages = pack::preset(&args.preset)?;
    let Some(stage) = args.stage.checked_sub(1).and_then(|i| stages.get(i)) else {
        bail!(
            "preset {} has stages 1..={}, not {}",
            args.preset,
            stages.len(),
            args.stage
        );
    };
    let vocab = Vocabulary::load(&args.model)?;
    let encode = |path: &Option<PathBuf>, source: CorpusSource| -> Result<Vec<Vec<u32>>> {
        if !stage.uses(source) {
            return Ok(Vec::new());
        }
        let Some(path) = path else {
            bail!(
                "stage {} of {} needs --{}",
                args.stage,
                args.preset,
                match source {
                    CorpusSource::Text => "text",
                    CorpusSource::Music => "music",
                }
            );
        };
        Ok(read_documents(path)?
            .iter()
            .map(|d| vocab.encode(d))
            .collect())
    };
    let text = encode(&args.text, CorpusSource::Text)?;
    let music = encode(&args.music, CorpusSource::Music)?;
    let corpus = pipeline::stage_corpus(stage, &text, &music);
    fs::create_dir_all(&args.output)?;
    for epoch in 0..stage.epochs {
        let manifest = pack::pack_epoch(&corpus, stage, args.seed, epoch)?;
        fs::write(
            args.output.join(format!("epoch-{epoch:03}.manifest")),
            manifest.to_bytes(),
        )?;
        if args.export_blocks {
            let path = args.output.join(format!("epoch-{epoch:03}.blocks"));
            let mut file = io::BufWriter::new(fs::File::create(&path)?);
            manifest.write_blocks(&corpus, &mut file)?;
            file.flush()?;
        }
    }
    info!(stage = %stage.name, epochs = stage.epochs, documents = corpus.len(), "stage packed");
    Ok(())
}

fn ngram_from_args(args: &NgramArgs, vocab: &Vocabulary) -> Result<pll::NgramProvider> {
    let Some(train) = &args.train else {
        bail!("the ngram provider needs --train");
    };
    let docs: Vec<Vec<u32>> = read_documents(train)?
        .iter()
        .map(|d| vocab.encode(d))
        .collect();
    let stream = pack::concat_documents(docs.iter().map(Vec::as_slice));
    Ok(pll::ngram_provider(
        &stream,
        vocab.size(),
        args.order,
        args.alpha,
    )?)
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let vocab = Vocabulary::load(&args.model)?;
    let pairs = pll::load_pairs(&args.pairs)?;
    let provider: Box<dyn LogitProvider> = match args.provider {
        ProviderKind::Ngram => Box::new(ngram_from_args(&args.ngram, &vocab)?),
        ProviderKind::External => {
            let Some((program, rest)) = args.command.split_first() else {
                bail!("--provider external needs a command after `--`");
            };
            let mut command = Command::new(program);
            command.args(rest);
            Box::new(ExternalProvider::spawn(command, vocab.size())?)
        }
    };
    let options = ScoreOptions {
        add_cls: !args.no_cls,
        add_eos: !args.no_eos,
    };
    let report = pll::evaluate(provider.as_ref(), &pairs, &vocab, options)?;
    info!(
        pairs = report.pairs_scored,
        accuracy = report.overall_accuracy,
        "scored"
    );
    match &args.output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.json"), report.to_json() + "\n")?;
            fs::write(dir.join("pairs.tsv"), report.to_tsv())?;
            Ok(())
        }
        None => write_output(None, (report.to_json() + "\n").as_bytes()),
    }
}
