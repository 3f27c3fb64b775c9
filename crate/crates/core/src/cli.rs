//! Command-line front end of the `srsad` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complexity::{comparison_table, report as complexity_report, ComplexityReport};
use crate::datagen::{
    build_singing_set, build_test_set, read_dataset, sample_at, write_dataset, Corpus, DatasetKind, FrameClass,
    LabeledAudio, SampleClass, Split,
};
use crate::dsp::{AudioBuffer, FeatureConfig};
use crate::experiment::{run_sweep, to_json, CorpusSource, ExperimentConfig, ExperimentSpec, SweepVariable, TrainingSummary};
use crate::inference::{decide, score_file, ChunkPlan, DecisionSidecar, Detector, ScoreFile};
use crate::metrics::{accuracy_per_song, evaluate_records, FrameRecord, SongScores};
use crate::model::{save_weights, ModelConfig};
use crate::train::{fit, Example, FitOptions, InMemoryData};
use crate::{Result, SadError};

pub const REPRO_FILE: &str = "repro.json";

#[derive(Debug, Parser)]
#[command(name = "srsad", version, about = "Singing-robust speech activity detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for mixing, weight init and test-set generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Single-threaded data generation and gradients.
    #[arg(long, global = true)]
    pub strict_deterministic: bool,
    /// Experiment config JSON, or a model preset name.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic stand-in corpus with its manifest.
    Synth,
    /// Generate a labelled dataset on disk.
    Mix(MixArgs),
    /// Train a detector.
    Train(TrainArgs),
    /// Score audio files.
    Infer(InferArgs),
    /// Score a labelled dataset and compute metrics.
    Eval(EvalArgs),
    /// Parameter and MAC counts, optionally timed.
    Complexity(ComplexityArgs),
    /// Train and evaluate one model per value of a variable.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus manifest JSON.
    #[arg(long, conflicts_with = "synthetic")]
    pub manifest: Option<PathBuf>,
    /// Use a generated stand-in corpus.
    #[arg(long)]
    pub synthetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Train,
    Val,
    Test,
    Singing,
}

#[derive(Debug, Clone, Args)]
pub struct MixArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Train)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    #[arg(long)]
    pub p_speech: Option<f64>,
    #[arg(long)]
    pub chunk_len: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    /// Model preset.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Training pairs per epoch.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub val_pairs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub p_speech: Option<f64>,
    #[arg(long)]
    pub chunk_len: Option<f64>,
    #[arg(long)]
    pub test_samples: Option<usize>,
    /// 100,000 training and 1,000 validation pairs per epoch.
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Train on a dataset written by `mix` instead of mixing on the fly.
    #[arg(long, conflicts_with_all = ["manifest", "synthetic"])]
    pub dataset: Option<PathBuf>,
    /// Validation dataset; the training dataset when absent.
    #[arg(long, requires = "dataset")]
    pub val_dataset: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// WAV files (16 kHz mono).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub chunk_len: f64,
    /// Also write thresholded decisions.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Bridge interior gaps up to this many seconds in the decisions.
    #[arg(long, requires = "threshold")]
    pub gap_fill: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Labelled dataset written by `mix`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    pub weights: Option<PathBuf>,
    /// Directory of `<name>.scores` files from `infer`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub chunk_len: f64,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_ACC_THRESHOLD)]
    pub acc_threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ComplexityArgs {
    /// Model presets; defaults to both architectures at full size.
    #[arg(long)]
    pub model: Vec<String>,
    #[arg(long, default_value_t = 2.0)]
    pub chunk_len: f64,
    /// Timed forward passes per run; 0 skips timing.
    #[arg(long, default_value_t = 20)]
    pub rtf_reps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariableArg {
    PSpeech,
    ChunkLen,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub variable: VariableArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

/// What a run consumed and how it was configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRecord {
    pub command: String,
    pub args: Vec<String>,
    pub toolkit_version: String,
    pub seed: Option<u64>,
    pub strict_deterministic: bool,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub inputs_hash: String,
}

/// Git-style blob digest of a file, or a digest over the sorted entries of
/// a directory. `repro.json` files are left out of directory digests.
pub fn content_hash(path: &Path) -> Result<String> {
    let meta = std::fs::metadata(path)?;
    if meta.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)?.collect::<std::io::Result<Vec<_>>>()?;
        entries.sort_by_key(|e| e.file_name());
        let mut h = Sha256::new();
        for e in entries {
            if e.file_name() == REPRO_FILE {
                continue;
            }
            h.update(e.file_name().to_string_lossy().as_bytes());
            h.update([0]);
            h.update(content_hash(&e.path())?.as_bytes());
            h.update(b"\n");
        }
        Ok(hex::encode(h.finalize()))
    } else {
        let bytes = std::fs::read(path)?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(&bytes);
        Ok(hex::encode(h.finalize()))
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &SadError) -> i32 {
    match e {
        SadError::InvalidConfig(_) | SadError::InvalidInput(_) | SadError::InputTooShort { .. } => 2,
        SadError::TrainingDiverged { .. } => 4,
        SadError::InvalidShape(_) => 5,
        _ => 3,
    }
}

/// Parses `args` and runs the command; returns the exit status.
pub fn main_with(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if cli.global.verbose {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    } else {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    }
    match run(&cli, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx<'a> {
    global: &'a GlobalArgs,
    args: &'a [String],
    cfg: ExperimentConfig,
}

impl Ctx<'_> {
    fn out(&self) -> Result<&Path> {
        self.global.out.as_deref().ok_or_else(|| SadError::InvalidInput("--out is required".into()))
    }

    fn write_repro(&self, command: &str, config: serde_json::Value, inputs: &[&Path]) -> Result<()> {
        let Some(out) = self.global.out.as_deref() else { return Ok(()) };
        std::fs::create_dir_all(out)?;
        let mut map = BTreeMap::new();
        for p in inputs {
            map.insert(p.display().to_string(), content_hash(p)?);
        }
        let joined: String = map.iter().map(|(k, v)| format!("{k}\0{v}\n")).collect();
        let record = ReproRecord {
            command: command.into(),
            args: self.args.to_vec(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            seed: self.global.seed,
            strict_deterministic: self.global.strict_deterministic,
            config,
            inputs: map,
            inputs_hash: hex::encode(Sha256::digest(joined.as_bytes())),
        };
        std::fs::write(out.join(REPRO_FILE), to_json(&record)?)?;
        Ok(())
    }

    fn corpus(&self, args: &CorpusArgs) -> Result<(Corpus, CorpusSource)> {
        let source = match (&args.manifest, args.synthetic) {
            (Some(p), _) => CorpusSource::Manifest { path: p.clone() },
            (None, true) => match &self.cfg.corpus {
                s @ CorpusSource::Synthetic { .. } => s.clone(),
                CorpusSource::Manifest { .. } => CorpusSource::default(),
            },
            (None, false) => self.cfg.corpus.clone(),
        };
        Ok((source.load()?, source))
    }
}

/// Loads `--config` (a JSON file or a preset name) and applies `--seed`.
pub fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        None => ExperimentConfig::default(),
        Some(c) if Path::new(c).is_file() => serde_json::from_slice(&std::fs::read(c)?)
            .map_err(|e| SadError::InvalidConfig(format!("{c}: {e}")))?,
        Some(c) => ExperimentConfig { model: ModelConfig::preset(c)?, ..ExperimentConfig::default() },
    };
    if let Some(s) = global.seed {
        cfg = cfg.with_seed(s);
        cfg.test.seed = s;
    }
    Ok(cfg)
}

fn apply_training(cfg: &mut ExperimentConfig, t: &TrainingArgs) -> Result<()> {
    if let Some(m) = &t.model {
        cfg.model = ModelConfig::preset(m)?;
    }
    if t.full_scale {
        cfg.train.epoch_train_pairs = 100_000;
        cfg.train.epoch_val_pairs = 1_000;
    }
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.train.max_epochs, t.epochs);
    set(&mut cfg.train.epoch_train_pairs, t.pairs);
    set(&mut cfg.train.epoch_val_pairs, t.val_pairs);
    set(&mut cfg.train.batch_size, t.batch);
    set(&mut cfg.test.n_samples, t.test_samples);
    if let Some(lr) = t.lr {
        cfg.train.initial_lr = lr;
    }
    if let Some(p) = t.p_speech {
        cfg.policy.p_speech = p;
    }
    if let Some(l) = t.chunk_len {
        cfg.policy.chunk_len_s = l;
    }
    Ok(())
}

fn run(cli: &Cli, args: &[String]) -> Result<()> {
    let ctx = Ctx { global: &cli.global, args, cfg: load_config(&cli.global)? };
    match &cli.command {
        Command::Synth => cmd_synth(&ctx),
        Command::Mix(a) => cmd_mix(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Infer(a) => cmd_infer(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Complexity(a) => cmd_complexity(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
    }
}

fn emit<T: Serialize>(value: &T, csv: impl FnOnce() -> String, format: Format) -> Result<()> {
    match format {
        Format::Json => print!("{}", to_json(value)?),
        Format::Csv => print!("{}", csv()),
    }
    Ok(())
}

fn cmd_synth(ctx: &Ctx) -> Result<()> {
    let out = ctx.out()?;
    let (spec, seed) = match &ctx.cfg.corpus {
        CorpusSource::Synthetic { spec, seed } => (spec.clone(), ctx.global.seed.unwrap_or(*seed)),
        CorpusSource::Manifest { .. } => (Default::default(), ctx.global.seed.unwrap_or(0)),
    };
    let corpus = Corpus::synthetic(&spec, seed)?;
    let manifest = corpus.write(out)?;
    ctx.write_repro("synth", serde_json::json!({ "spec": spec, "seed": seed }), &[])?;
    let summary = serde_json::json!({ "manifest": manifest, "entries": corpus.manifest().entries.len() });
    emit(&summary, || format!("manifest,entries\n{},{}\n", manifest.display(), corpus.manifest().entries.len()), ctx.global.format)
}

/// Sample and frame composition of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSummary {
    pub kind: DatasetKind,
    pub n_samples: usize,
    pub speech_sample_fraction: f64,
    pub singing_sample_fraction: f64,
    pub speech_frame_fraction: f64,
    pub singing_frame_fraction: f64,
    pub overlap_frame_fraction: f64,
    pub policy_hash: String,
}

fn cmd_mix(ctx: &Ctx, a: &MixArgs) -> Result<()> {
    let out = ctx.out()?;
    let mut cfg = ctx.cfg.clone();
    if let Some(p) = a.p_speech {
        cfg.policy.p_speech = p;
    }
    if let Some(l) = a.chunk_len {
        cfg.policy.chunk_len_s = l;
    }
    cfg.test.n_samples = a.samples;
    let (corpus, source) = ctx.corpus(&a.corpus)?;
    let (kind, items, mut singing_samples, policy) = match a.kind {
        KindArg::Train | KindArg::Val => {
            cfg.policy.validate()?;
            let split = if a.kind == KindArg::Train { Split::Train } else { Split::Val };
            let samples = (0..a.samples as u64)
                .map(|i| sample_at(&corpus, &cfg.policy, split, i))
                .collect::<Result<Vec<_>>>()?;
            let sing = samples.iter().filter(|s| s.provenance.class == SampleClass::Singing).count();
            let items = samples
                .iter()
                .enumerate()
                .map(|(i, s)| LabeledAudio::from_mixture(format!("{i:06}"), s))
                .collect::<Result<Vec<_>>>()?;
            let kind = if split == Split::Train { DatasetKind::Train } else { DatasetKind::Val };
            (kind, items, sing, serde_json::to_value(&cfg.policy)?)
        }
        KindArg::Test => {
            let samples = build_test_set(&corpus, &cfg.test)?;
            let items = samples
                .iter()
                .enumerate()
                .map(|(i, s)| LabeledAudio::from_test(format!("{i:06}"), s))
                .collect::<Result<Vec<_>>>()?;
            (DatasetKind::Test, items, 0, serde_json::to_value(&cfg.test)?)
        }
        KindArg::Singing => {
            let samples = build_singing_set(&corpus, cfg.test.split, &cfg.test.labeler)?;
            let items = samples
                .iter()
                .enumerate()
                .map(|(i, s)| LabeledAudio::from_test(format!("{i:06}"), s))
                .collect::<Result<Vec<_>>>()?;
            let n = items.len();
            (DatasetKind::Singing, items, n, serde_json::to_value(&cfg.test)?)
        }
    };
    let index = write_dataset(out, kind, &policy, &items)?;
    let frames: usize = items.iter().map(|i| i.labels.len()).sum::<usize>().max(1);
    let count = |f: &dyn Fn(&LabeledAudio, usize) -> bool| {
        items.iter().map(|it| (0..it.labels.len()).filter(|&t| f(it, t)).count()).sum::<usize>() as f64 / frames as f64
    };
    // Mixture datasets carry no frame classes; a singing mixture is singing throughout.
    let singing_at = |it: &LabeledAudio, t: usize| match &it.frame_classes {
        Some(c) => c[t].has_singing(),
        None => it.provenance.get("class").and_then(|v| v.as_str()) == Some("singing"),
    };
    if matches!(kind, DatasetKind::Test) {
        singing_samples = items.iter().filter(|it| it.song_id.is_some()).count();
    }
    let n = items.len().max(1) as f64;
    let summary = MixSummary {
        kind,
        n_samples: items.len(),
        speech_sample_fraction: items.iter().filter(|it| it.labels.iter().any(|&l| l)).count() as f64 / n,
        singing_sample_fraction: singing_samples as f64 / n,
        speech_frame_fraction: count(&|it, t| it.labels[t]),
        singing_frame_fraction: count(&singing_at),
        overlap_frame_fraction: count(&|it, t| it.labels[t] && singing_at(it, t)),
        policy_hash: index.policy_hash.clone(),
    };
    let manifest_input = match &source {
        CorpusSource::Manifest { path } => vec![path.as_path()],
        CorpusSource::Synthetic { .. } => vec![],
    };
    ctx.write_repro("mix", serde_json::json!({ "corpus": source, "kind": kind, "policy": policy }), &manifest_input)?;
    emit(
        &summary,
        || {
            format!(
                "n_samples,speech_sample_fraction,singing_sample_fraction,speech_frame_fraction,singing_frame_fraction,overlap_frame_fraction\n{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                summary.n_samples,
                summary.speech_sample_fraction,
                summary.singing_sample_fraction,
                summary.speech_frame_fraction,
                summary.singing_frame_fraction,
                summary.overlap_frame_fraction
            )
        },
        ctx.global.format,
    )
}

fn dataset_examples(dir: &Path, features: &crate::dsp::FeatureExtractor) -> Result<Vec<Example>> {
    let (_, items) = read_dataset(dir)?;
    if items.is_empty() {
        return Err(SadError::InvalidInput(format!("{} holds no samples", dir.display())));
    }
    items
        .iter()
        .map(|it| {
            let features = features.extract(&it.audio)?.to_time_major();
            if features.rows() != it.labels.len() {
                return Err(SadError::InvalidShape(format!("{}: {} frames, {} labels", it.name, features.rows(), it.labels.len())));
            }
            Ok(Example { features, labels: it.labels.iter().map(|&l| f64::from(u8::from(l))).collect() })
        })
        .collect()
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let out = ctx.out()?.to_path_buf();
    let mut cfg = ctx.cfg.clone();
    apply_training(&mut cfg, &a.training)?;
    cfg.model.validate()?;
    let features = FeatureConfig::with_mels(cfg.model.n_mels()).extractor()?;
    let feature_hash = features.config().hash();
    std::fs::create_dir_all(&out)?;
    let opts = FitOptions {
        strict_deterministic: ctx.global.strict_deterministic,
        log_path: Some(out.join("train_log.ndjson")),
        checkpoint_dir: Some(out.join("checkpoints")),
        feature_config_hash: feature_hash.clone(),
    };
    let mut inputs: Vec<PathBuf> = Vec::new();
    let outcome = if let Some(dir) = &a.dataset {
        let train = dataset_examples(dir, &features)?;
        let val = match &a.val_dataset {
            Some(v) => dataset_examples(v, &features)?,
            None => train.clone(),
        };
        if a.training.pairs.is_none() && !a.training.full_scale {
            cfg.train.epoch_train_pairs = train.len();
        }
        if a.training.val_pairs.is_none() && !a.training.full_scale {
            cfg.train.epoch_val_pairs = val.len();
        }
        inputs.push(dir.clone());
        inputs.extend(a.val_dataset.clone());
        fit(&cfg.model, &InMemoryData { train, val }, &cfg.train, &opts)?
    } else {
        let (corpus, source) = ctx.corpus(&a.corpus)?;
        if let CorpusSource::Manifest { path } = &source {
            inputs.push(path.clone());
        }
        cfg.corpus = source;
        let stream = crate::experiment::MixtureStream::new(&corpus, cfg.policy.clone(), cfg.model.n_mels())?;
        fit(&cfg.model, &stream, &cfg.train, &opts)?
    };
    save_weights(&outcome.weight_store(&feature_hash), out.join("weights.srw"))?;
    let summary = TrainingSummary {
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        epochs_run: outcome.log.len(),
        final_train_loss: outcome.log.last().map_or(f64::NAN, |r| r.train_loss),
        stopped_early: outcome.stopped_early,
    };
    std::fs::write(out.join("training.json"), to_json(&summary)?)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    ctx.write_repro("train", serde_json::to_value(&cfg)?, &refs)?;
    emit(
        &summary,
        || {
            format!(
                "best_epoch,best_val_loss,epochs_run,final_train_loss,stopped_early\n{},{},{},{},{}\n",
                summary.best_epoch, summary.best_val_loss, summary.epochs_run, summary.final_train_loss, summary.stopped_early
            )
        },
        ctx.global.format,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferSummary {
    pub input: String,
    pub scores: String,
    pub n_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<String>,
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_infer(ctx: &Ctx, a: &InferArgs) -> Result<()> {
    let out = ctx.out()?;
    std::fs::create_dir_all(out)?;
    let det = Detector::load(&a.weights)?;
    let plan = ChunkPlan { chunk_len_s: a.chunk_len };
    let mut rows = Vec::new();
    for input in &a.inputs {
        let audio = AudioBuffer::read_wav(input)?;
        let scores = score_file(&audio, &det, &plan)?;
        let name = stem(input);
        let score_path = out.join(format!("{name}.scores"));
        ScoreFile::new(&scores).write(&score_path)?;
        let decisions = match a.threshold {
            Some(thr) => {
                let d = decide(&scores, thr, a.gap_fill);
                let p = out.join(format!("{name}.decisions.json"));
                std::fs::write(&p, to_json(&DecisionSidecar::new(&d, thr, a.gap_fill))?)?;
                Some(p.display().to_string())
            }
            None => None,
        };
        rows.push(InferSummary {
            input: input.display().to_string(),
            scores: score_path.display().to_string(),
            n_frames: scores.len(),
            decisions,
        });
    }
    let mut inputs: Vec<&Path> = vec![a.weights.as_path()];
    inputs.extend(a.inputs.iter().map(PathBuf::as_path));
    ctx.write_repro(
        "infer",
        serde_json::json!({ "chunk_len_s": a.chunk_len, "threshold": a.threshold, "gap_fill_max_s": a.gap_fill }),
        &inputs,
    )?;
    emit(
        &rows,
        || {
            let mut s = String::from("input,scores,n_frames\n");
            for r in &rows {
                s.push_str(&format!("{},{},{}\n", r.input, r.scores, r.n_frames));
            }
            s
        },
        ctx.global.format,
    )
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let out = ctx.out()?;
    std::fs::create_dir_all(out)?;
    let (index, items) = read_dataset(&a.dataset)?;
    let det = a.weights.as_ref().map(Detector::load).transpose()?;
    let plan = ChunkPlan { chunk_len_s: a.chunk_len };
    let scored = items
        .iter()
        .map(|it| {
            let scores = match (&det, &a.scores) {
                (Some(d), _) => score_file(&it.audio, d, &plan)?,
                (None, Some(dir)) => ScoreFile::read(dir.join(format!("{}.scores", it.name)))?.scores_f64(),
                (None, None) => return Err(SadError::InvalidInput("need --weights or --scores".into())),
            };
            if scores.len() != it.labels.len() {
                return Err(SadError::InvalidShape(format!("{}: {} scores, {} labels", it.name, scores.len(), it.labels.len())));
            }
            Ok(scores)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (it, scores) in items.iter().zip(&scored) {
        for (t, (&p, &l)) in scores.iter().zip(&it.labels).enumerate() {
            records.push(match &it.frame_classes {
                Some(c) => FrameRecord::new(p, l, c[t])?,
                None => FrameRecord::unannotated(p, l),
            });
        }
    }
    let (mut report, curves) = evaluate_records(&records)?;
    if matches!(index.kind, DatasetKind::Singing | DatasetKind::Test) {
        let songs: Vec<SongScores> = items
            .iter()
            .zip(&scored)
            .filter(|(it, _)| it.song_id.is_some())
            .map(|(it, s)| SongScores {
                song_id: it.song_id.clone().unwrap_or_default(),
                genre: it.genre.clone(),
                scores: s
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| it.frame_classes.as_ref().is_some_and(|c| c[t] == FrameClass::Singing))
                    .map(|(_, &p)| p)
                    .collect(),
            })
            .collect();
        if !songs.is_empty() {
            report.singing_accuracy = Some(accuracy_per_song(&songs, a.acc_threshold));
        }
    }
    std::fs::write(out.join("metrics.json"), to_json(&report)?)?;
    for (name, c) in &curves {
        std::fs::write(out.join(format!("roc_{name}.csv")), c.to_csv())?;
    }
    let mut inputs: Vec<&Path> = vec![a.dataset.as_path()];
    inputs.extend(a.weights.as_deref());
    inputs.extend(a.scores.as_deref());
    ctx.write_repro(
        "eval",
        serde_json::json!({ "chunk_len_s": a.chunk_len, "acc_threshold": a.acc_threshold }),
        &inputs,
    )?;
    emit(
        &report,
        || {
            let mut s = String::from("metric,value,n_positive,n_negative\n");
            for m in &report.metrics {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    m.name,
                    m.value.map_or(String::new(), |v| format!("{v:.6}")),
                    m.n_positive,
                    m.n_negative
                ));
            }
            s
        },
        ctx.global.format,
    )
}

fn cmd_complexity(ctx: &Ctx, a: &ComplexityArgs) -> Result<()> {
    let models: Vec<(String, ModelConfig)> = if !a.model.is_empty() {
        a.model.iter().map(|m| Ok((m.clone(), ModelConfig::preset(m)?))).collect::<Result<_>>()?
    } else if ctx.global.config.is_some() {
        vec![(ctx.global.config.clone().unwrap_or_default(), ctx.cfg.model.clone())]
    } else {
        vec![("default".into(), ModelConfig::preset("default")?), ("default-lc".into(), ModelConfig::preset("default-lc")?)]
    };
    let reps = (a.rtf_reps > 0).then_some(a.rtf_reps.max(3));
    let reports: Vec<ComplexityReport> =
        models.iter().map(|(n, m)| complexity_report(n, m, a.chunk_len, reps)).collect::<Result<_>>()?;
    eprint!("{}", comparison_table(&reports));
    if let Some(out) = ctx.global.out.as_deref() {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("complexity.json"), to_json(&reports)?)?;
        ctx.write_repro("complexity", serde_json::json!({ "models": models, "chunk_len_s": a.chunk_len, "rtf_reps": reps }), &[])?;
    }
    emit(
        &reports,
        || {
            let mut s = String::from("model,architecture,macs_per_chunk,param_count,rtf,published_macs,published_rtf,published_params\n");
            for r in &reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.model,
                    r.architecture,
                    r.macs_per_chunk,
                    r.param_count,
                    r.rtf.map_or(String::new(), |v| format!("{v:.2}")),
                    r.published_reference.macs,
                    r.published_reference.rtf,
                    r.published_reference.params
                ));
            }
            s
        },
        ctx.global.format,
    )
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let out = ctx.out()?.to_path_buf();
    let mut base = ctx.cfg.clone();
    apply_training(&mut base, &a.training)?;
    let (_, source) = ctx.corpus(&a.corpus)?;
    base.corpus = source;
    let seeds = if a.seeds.is_empty() { vec![ctx.global.seed.unwrap_or(base.train.seed)] } else { a.seeds.clone() };
    let spec = ExperimentSpec {
        variable: match a.variable {
            VariableArg::PSpeech => SweepVariable::PSpeech,
            VariableArg::ChunkLen => SweepVariable::ChunkLenS,
        },
        values: a.values.clone(),
        base,
        seeds,
        out_dir: out.clone(),
    };
    let rows = run_sweep(&spec, ctx.global.strict_deterministic)?;
    ctx.write_repro("sweep", serde_json::to_value(&spec)?, &[])?;
    emit(&rows, || crate::experiment::sweep_csv(&rows), ctx.global.format)
}
