//! Train-and-evaluate pipeline on a corpus, and parameter sweeps over it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{build_singing_set, build_test_set, sample_at, Corpus, MixPolicy, Split, SynthCorpusSpec, TestSample, TestSetSpec};
use crate::dsp::{FeatureConfig, FeatureExtractor};
use crate::inference::{score_file, ChunkPlan, Detector, FrameScorer};
use crate::metrics::{accuracy_per_song, evaluate_records, AccuracyReport, FrameRecord, MetricReport, RocCurve, SongScores, DEFAULT_ACC_THRESHOLD};
use crate::model::{ModelConfig, WeightStore};
use crate::train::{fit, Example, FitOptions, TrainConfig, TrainingData};
use crate::{Result, SadError};

/// Training pairs drawn on the fly from a corpus.
pub struct MixtureStream<'a> {
    pub corpus: &'a Corpus,
    pub policy: MixPolicy,
    pub features: FeatureExtractor,
}

impl<'a> MixtureStream<'a> {
    pub fn new(corpus: &'a Corpus, policy: MixPolicy, n_mels: usize) -> Result<Self> {
        policy.validate()?;
        Ok(Self { corpus, policy, features: FeatureConfig::with_mels(n_mels).extractor()? })
    }

    fn example(&self, split: Split, index: u64) -> Result<Example> {
        let s = sample_at(self.corpus, &self.policy, split, index)?;
        let features = self.features.extract(&s.audio)?.to_time_major();
        if features.rows() != s.labels.len() {
            return Err(SadError::InvalidShape(format!("{} frames, {} labels", features.rows(), s.labels.len())));
        }
        Ok(Example { features, labels: s.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect() })
    }
}

impl TrainingData for MixtureStream<'_> {
    fn train_example(&self, epoch: usize, index: usize) -> Result<Example> {
        self.example(Split::Train, ((epoch as u64) << 32) | index as u64)
    }

    fn val_example(&self, index: usize) -> Result<Example> {
        self.example(Split::Val, index as u64)
    }
}

/// Frame records of a scored evaluation set, in sample order.
pub fn score_test_set(scorer: &dyn FrameScorer, samples: &[TestSample], plan: &ChunkPlan) -> Result<Vec<FrameRecord>> {
    let per_sample = samples
        .par_iter()
        .map(|s| {
            let scores = score_file(&s.audio, scorer, plan)?;
            if scores.len() != s.labels.len() {
                return Err(SadError::InvalidShape(format!("{} scores, {} labels", scores.len(), s.labels.len())));
            }
            scores
                .iter()
                .zip(&s.labels)
                .zip(&s.frame_classes)
                .map(|((&p, &l), &c)| FrameRecord::new(p, l, c))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sample.into_iter().flatten().collect())
}

/// Fraction of singing frames scored as non-speech, per song and genre.
pub fn singing_accuracy(scorer: &dyn FrameScorer, songs: &[TestSample], plan: &ChunkPlan, threshold: f64) -> Result<AccuracyReport> {
    let scored = songs
        .par_iter()
        .map(|s| {
            let scores = score_file(&s.audio, scorer, plan)?;
            Ok(SongScores {
                song_id: s.provenance.song_id.clone().unwrap_or_default(),
                genre: s.provenance.genre.clone(),
                scores: scores.iter().zip(&s.frame_classes).filter(|(_, c)| c.has_singing()).map(|(&p, _)| p).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(accuracy_per_song(&scored, threshold))
}

/// Where the audio comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CorpusSource {
    Synthetic { spec: SynthCorpusSpec, seed: u64 },
    Manifest { path: PathBuf },
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic { spec: SynthCorpusSpec::default(), seed: 0 }
    }
}

impl CorpusSource {
    pub fn load(&self) -> Result<Corpus> {
        match self {
            CorpusSource::Synthetic { spec, seed } => Corpus::synthetic(spec, *seed),
            CorpusSource::Manifest { path } => Corpus::load(path),
        }
    }
}

/// Everything one train-and-evaluate run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub policy: MixPolicy,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub test: TestSetSpec,
    /// Inference chunk length; the training chunk length when absent.
    pub eval_chunk_len_s: Option<f64>,
    pub acc_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusSource::default(),
            policy: MixPolicy::default(),
            train: TrainConfig::default(),
            model: ModelConfig::preset("default").expect("preset exists"),
            test: TestSetSpec::default(),
            eval_chunk_len_s: None,
            acc_threshold: DEFAULT_ACC_THRESHOLD,
        }
    }
}

impl ExperimentConfig {
    /// Seeds the training stream and weight init; the test set keeps its own seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.policy.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn eval_plan(&self) -> ChunkPlan {
        ChunkPlan { chunk_len_s: self.eval_chunk_len_s.unwrap_or(self.policy.chunk_len_s) }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        self.train.validate()?;
        self.model.validate()?;
        self.test.validate()?;
        self.eval_plan().validate(self.model.min_frames())?;
        let train_frames = ChunkPlan { chunk_len_s: self.policy.chunk_len_s }.chunk_frames();
        if train_frames < self.model.min_frames() {
            return Err(SadError::InputTooShort { frames: train_frames, required: self.model.min_frames() });
        }
        if !(0.0..=1.0).contains(&self.acc_threshold) {
            return Err(SadError::InvalidConfig("acc_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub stopped_early: bool,
}

/// Deterministic outcome of one run: no timings, no paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub training: TrainingSummary,
    pub report: MetricReport,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(&Sha256::digest(serde_json::to_vec(cfg).expect("config serializes"))[..8])
}

/// Evaluation material built once and shared between runs.
pub struct EvalSets {
    pub test: Vec<TestSample>,
    pub singing: Vec<TestSample>,
}

impl EvalSets {
    pub fn build(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            test: build_test_set(corpus, &cfg.test)?,
            singing: build_singing_set(corpus, cfg.test.split, &cfg.test.labeler)?,
        })
    }
}

/// Metric report for a scorer on prepared evaluation sets.
pub fn evaluate(
    scorer: &dyn FrameScorer,
    sets: &EvalSets,
    plan: &ChunkPlan,
    acc_threshold: f64,
) -> Result<(MetricReport, BTreeMap<String, RocCurve>)> {
    let records = score_test_set(scorer, &sets.test, plan)?;
    let (mut report, curves) = evaluate_records(&records)?;
    if !sets.singing.is_empty() {
        report.singing_accuracy = Some(singing_accuracy(scorer, &sets.singing, plan, acc_threshold)?);
    }
    Ok((report, curves))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub strict_deterministic: bool,
    /// Receives the training log, checkpoints and final weights.
    pub out_dir: Option<PathBuf>,
}

pub struct RunArtifacts {
    pub result: ExperimentResult,
    pub weights: WeightStore,
    pub curves: BTreeMap<String, RocCurve>,
}

/// Trains on `corpus` and evaluates on `sets`.
pub fn run_with(corpus: &Corpus, sets: &EvalSets, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    cfg.validate()?;
    let stream = MixtureStream::new(corpus, cfg.policy.clone(), cfg.model.n_mels())?;
    let feature_hash = stream.features.config().hash();
    let fit_opts = FitOptions {
        strict_deterministic: opts.strict_deterministic,
        log_path: opts.out_dir.as_ref().map(|d| d.join("train_log.ndjson")),
        checkpoint_dir: opts.out_dir.as_ref().map(|d| d.join("checkpoints")),
        feature_config_hash: feature_hash.clone(),
    };
    if let Some(d) = &opts.out_dir {
        std::fs::create_dir_all(d)?;
    }
    let outcome = fit(&cfg.model, &stream, &cfg.train, &fit_opts)?;
    let weights = outcome.weight_store(&feature_hash);
    let detector = Detector::from_store(&weights)?;
    let (report, curves) = evaluate(&detector, sets, &cfg.eval_plan(), cfg.acc_threshold)?;
    let training = TrainingSummary {
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        epochs_run: outcome.log.len(),
        final_train_loss: outcome.log.last().map_or(f64::NAN, |r| r.train_loss),
        stopped_early: outcome.stopped_early,
    };
    let result = ExperimentResult { config_hash: config_hash(cfg), training, report };
    if let Some(d) = &opts.out_dir {
        crate::model::save_weights(&weights, d.join("weights.srw"))?;
        std::fs::write(d.join("metrics.json"), to_json(&result)?)?;
    }
    Ok(RunArtifacts { result, weights, curves })
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    let corpus = cfg.corpus.load()?;
    let sets = EvalSets::build(&corpus, cfg)?;
    run_with(&corpus, &sets, cfg, opts)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PSpeech,
    ChunkLenS,
}

/// A family of runs differing in one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.seeds.is_empty() {
            return Err(SadError::InvalidConfig("sweep needs at least one value and one seed".into()));
        }
        for &v in &self.values {
            self.config_for(v, self.seeds[0]).validate()?;
        }
        Ok(())
    }

    /// Run configuration for one sweep point. Chunk length applies to
    /// training and inference alike.
    pub fn config_for(&self, value: f64, seed: u64) -> ExperimentConfig {
        let mut cfg = self.base.clone().with_seed(seed);
        match self.variable {
            SweepVariable::PSpeech => cfg.policy.p_speech = value,
            SweepVariable::ChunkLenS => {
                cfg.policy.chunk_len_s = value;
                cfg.eval_chunk_len_s = Some(value);
            }
        }
        cfg
    }

    pub fn point_dir(&self, value: f64, seed: u64) -> PathBuf {
        self.out_dir.join(format!("value_{value}_seed_{seed}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub auc: Option<f64>,
    pub auc_sirr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every (value, seed) point. A point whose `metrics.json` already
/// exists is read back instead of retrained; failures are recorded and the
/// sweep continues.
pub fn run_sweep(spec: &ExperimentSpec, strict_deterministic: bool) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out_dir)?;
    let corpus = spec.base.corpus.load()?;
    let sets = EvalSets::build(&corpus, &spec.base)?;
    let mut rows = Vec::new();
    for &value in &spec.values {
        for &seed in &spec.seeds {
            let dir = spec.point_dir(value, seed);
            let cfg = spec.config_for(value, seed);
            let done = dir.join("metrics.json");
            let outcome = match read_result(&done) {
                Some(r) if r.config_hash == config_hash(&cfg) => Ok(r),
                _ => run_with(&corpus, &sets, &cfg, &RunOptions { strict_deterministic, out_dir: Some(dir) }).map(|a| a.result),
            };
            rows.push(match outcome {
                Ok(r) => SweepRow {
                    value,
                    seed,
                    auc: r.report.value("auc"),
                    auc_sirr: r.report.value("auc_sirr"),
                    error: None,
                },
                Err(e) => {
                    log::error!("sweep point {value} seed {seed} failed: {e}");
                    SweepRow { value, seed, auc: None, auc_sirr: None, error: Some(e.to_string()) }
                }
            });
        }
    }
    std::fs::write(spec.out_dir.join("sweep.csv"), sweep_csv(&rows))?;
    std::fs::write(spec.out_dir.join("sweep.svg"), sweep_svg(spec.variable, &rows))?;
    Ok(rows)
}

fn read_result(path: &Path) -> Option<ExperimentResult> {
    serde_json::from_slice(&std::fs::read(path).ok()?).ok()
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("value,seed,auc,auc_sirr\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.value, r.seed, opt(r.auc), opt(r.auc_sirr)));
    }
    s
}

/// Seed-averaged metric per value.
pub fn mean_by_value(rows: &[SweepRow], pick: impl Fn(&SweepRow) -> Option<f64>) -> Vec<(f64, f64)> {
    let mut values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .filter_map(|v| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.value == v).filter_map(&pick).collect();
            (!xs.is_empty()).then(|| (v, xs.iter().sum::<f64>() / xs.len() as f64))
        })
        .collect()
}

/// Line plot of seed-averaged AUC and AUC_SiRR against the swept value.
pub fn sweep_svg(variable: SweepVariable, rows: &[SweepRow]) -> String {
    let (w, h, m) = (640.0, 400.0, 56.0);
    let series = [("auc", "#1f77b4", mean_by_value(rows, |r| r.auc)), ("auc_sirr", "#d62728", mean_by_value(rows, |r| r.auc_sirr))];
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 0.5, x0 + 0.5) };
    let (y0, y1) = (0.5, 1.0);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y.clamp(y0, y1) - y0) / (y1 - y0) * (h - 2.0 * m);
    let label = match variable {
        SweepVariable::PSpeech => "p_speech",
        SweepVariable::ChunkLenS => "chunk length (s)",
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ty}\" text-anchor=\"middle\">{label}</text>\n",
        b = h - m,
        r = w - m,
        cx = w / 2.0,
        ty = h - 16.0,
    );
    for i in 0..=5 {
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{y:.2}</text>\n",
            m - 6.0,
            py(y) + 4.0
        ));
    }
    let mut ticks = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        s.push_str(&format!("<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{x}</text>\n", px(x), h - m + 16.0));
    }
    for (k, (name, color, pts)) in series.iter().enumerate() {
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        s.push_str(&format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n", path.join(" ")));
        for &(x, y) in pts {
            s.push_str(&format!("<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n", px(x), py(y)));
        }
        let ly = m + 16.0 * k as f64;
        s.push_str(&format!(
            "<line x1=\"{a}\" y1=\"{ly}\" x2=\"{b}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{c}\" y=\"{t}\">{name}</text>\n",
            a = w - m - 90.0,
            b = w - m - 70.0,
            c = w - m - 64.0,
            t = ly + 4.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_by_value_averages_seeds() {
        let rows = vec![
            SweepRow { value: 0.5, seed: 0, auc: Some(0.8), auc_sirr: None, error: None },
            SweepRow { value: 0.5, seed: 1, auc: Some(0.6), auc_sirr: None, error: None },
            SweepRow { value: 1.0, seed: 0, auc: None, auc_sirr: None, error: Some("x".into()) },
        ];
        assert_eq!(mean_by_value(&rows, |r| r.auc), vec![(0.5, 0.7)]);
        assert!(sweep_csv(&rows).ends_with("1,0,,\n"));
        assert!(sweep_svg(SweepVariable::PSpeech, &rows).starts_with("<svg"));
    }

    #[test]
    fn sweep_points_override_one_variable() {
        let spec = ExperimentSpec {
            variable: SweepVariable::ChunkLenS,
            values: vec![0.5],
            base: ExperimentConfig::default(),
            seeds: vec![3],
            out_dir: "x".into(),
        };
        let cfg = spec.config_for(0.5, 3);
        assert_eq!(cfg.policy.chunk_len_s, 0.5);
        assert_eq!(cfg.eval_plan().chunk_len_s, 0.5);
        assert_eq!(cfg.train.seed, 3);
        assert_eq!(cfg.test.seed, ExperimentConfig::default().test.seed);
    }
}
