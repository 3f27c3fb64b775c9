use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::dataset::to_spans;
use crate::datagen::label::{fill_gaps, LabelerConfig};
use crate::dsp::audio::reflect_extend;
use crate::dsp::{AudioBuffer, FeatureConfig, FeatureExtractor, StftConfig};
use crate::matrix::Matrix;
use crate::model::{NetworkParams, WeightStore};
use crate::{Result, SadError, SAMPLE_RATE_HZ};

/// Non-overlapping chunking; the final chunk is reflection-padded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunk_len_s: f64,
}

impl Default for ChunkPlan {
    fn default() -> Self {
        Self { chunk_len_s: 2.0 }
    }
}

impl ChunkPlan {
    pub fn chunk_samples(&self) -> usize {
        (self.chunk_len_s * SAMPLE_RATE_HZ as f64).round() as usize
    }

    pub fn chunk_frames(&self) -> usize {
        StftConfig::default().frame_count(self.chunk_samples())
    }

    pub fn validate(&self, min_frames: usize) -> Result<()> {
        if !(self.chunk_len_s > 0.0) || self.chunk_samples() == 0 {
            return Err(SadError::InvalidConfig(format!("chunk length {} s must be positive", self.chunk_len_s)));
        }
        if self.chunk_frames() < min_frames {
            return Err(SadError::InputTooShort { frames: self.chunk_frames(), required: min_frames });
        }
        Ok(())
    }

    /// Number of chunks covering `n` samples.
    pub fn chunk_count(&self, n: usize) -> usize {
        n.div_ceil(self.chunk_samples()).max(1)
    }

    /// Chunk and chunk-local frame supplying global frame `t`: the chunk
    /// containing the frame centre, and the local frame nearest to it.
    pub fn locate(&self, t: usize, n: usize) -> (usize, usize) {
        let hop = StftConfig::default().hop_len;
        let len = self.chunk_samples();
        let centre = t * hop;
        let k = (centre / len).min(self.chunk_count(n) - 1);
        let local = ((centre - k * len) as f64 / hop as f64).round() as usize;
        (k, local.min(self.chunk_frames() - 1))
    }
}

/// Anything that maps one chunk of audio to per-frame speech probabilities.
pub trait FrameScorer: Sync {
    fn score_chunk(&self, audio: &AudioBuffer) -> Result<Vec<f64>>;

    fn min_frames(&self) -> usize {
        1
    }
}

/// A network with its feature frontend.
#[derive(Debug, Clone)]
pub struct Detector {
    pub params: NetworkParams,
    pub features: FeatureExtractor,
}

impl Detector {
    pub fn new(params: NetworkParams) -> Result<Self> {
        let features = FeatureConfig::with_mels(params.config.n_mels()).extractor()?;
        Ok(Self { params, features })
    }

    /// Checks the stored feature recipe against the one this model implies.
    pub fn from_store(store: &WeightStore) -> Result<Self> {
        let params = store.to_params()?;
        let det = Self::new(params)?;
        let expected = det.features.config().hash();
        if store.header.feature_config_hash != expected {
            return Err(SadError::IncompatibleWeights(format!(
                "weights were trained on features {}, this frontend computes {expected}",
                store.header.feature_config_hash
            )));
        }
        Ok(det)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_store(&crate::model::load_weights(path)?)
    }

    pub fn feature_hash(&self) -> String {
        self.features.config().hash()
    }

    pub fn featurize(&self, audio: &AudioBuffer) -> Result<Matrix> {
        Ok(self.features.extract(audio)?.to_time_major())
    }
}

impl FrameScorer for Detector {
    fn score_chunk(&self, audio: &AudioBuffer) -> Result<Vec<f64>> {
        self.params.forward(&self.featurize(audio)?)
    }

    fn min_frames(&self) -> usize {
        self.params.config.min_frames()
    }
}

/// Scores every frame of a file of any length under the global framing
/// (one frame per hop plus one).
pub fn score_file(audio: &AudioBuffer, scorer: &dyn FrameScorer, plan: &ChunkPlan) -> Result<Vec<f64>> {
    let stft = StftConfig::default();
    if audio.len() < stft.hop_len {
        return Err(SadError::InvalidInput(format!(
            "{} samples is shorter than one hop ({})",
            audio.len(),
            stft.hop_len
        )));
    }
    plan.validate(scorer.min_frames())?;
    let n = audio.len();
    let len = plan.chunk_samples();
    let chunk_scores = (0..plan.chunk_count(n))
        .into_par_iter()
        .map(|k| {
            let start = k * len;
            let end = (start + len).min(n);
            let piece = &audio.samples()[start..end];
            let chunk = if piece.len() == len { piece.to_vec() } else { reflect_extend(piece, len) };
            let scores = scorer.score_chunk(&AudioBuffer::from_samples(chunk))?;
            if scores.len() != plan.chunk_frames() {
                return Err(SadError::InvalidShape(format!(
                    "scorer returned {} frames for a {}-frame chunk",
                    scores.len(),
                    plan.chunk_frames()
                )));
            }
            Ok(scores)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..stft.frame_count(n))
        .map(|t| {
            let (k, local) = plan.locate(t, n);
            chunk_scores[k][local]
        })
        .collect())
}

/// Thresholds scores (speech iff score >= threshold), optionally bridging
/// short interior gaps like the labeler does.
pub fn decide(scores: &[f64], threshold: f64, gap_fill_max_s: Option<f64>) -> Vec<bool> {
    let mut d: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    if let Some(g) = gap_fill_max_s {
        let cfg = LabelerConfig { gap_fill_max_s: g, ..LabelerConfig::default() };
        fill_gaps(&mut d, cfg.max_fill_frames());
    }
    d
}

const SCORE_MAGIC: &[u8; 8] = b"SRSADSC\0";
const SCORE_VERSION: u32 = 1;

/// Frame scores as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub frame_period_s: f64,
    pub scores: Vec<f32>,
}

impl ScoreFile {
    pub fn new(scores: &[f64]) -> Self {
        Self {
            frame_period_s: StftConfig::default().hop_len as f64 / SAMPLE_RATE_HZ as f64,
            scores: scores.iter().map(|&s| s as f32).collect(),
        }
    }

    pub fn scores_f64(&self) -> Vec<f64> {
        self.scores.iter().map(|&s| s as f64).collect()
    }

    /// Magic, version u32, frame period f64, count u64, then f32 scores; all
    /// little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + 4 * self.scores.len());
        out.extend_from_slice(SCORE_MAGIC);
        out.extend_from_slice(&SCORE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.frame_period_s.to_le_bytes());
        out.extend_from_slice(&(self.scores.len() as u64).to_le_bytes());
        for s in &self.scores {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = |m: &str| SadError::InvalidInput(format!("score file: {m}"));
        if b.len() < 28 || &b[..8] != SCORE_MAGIC {
            return Err(bad("missing header"));
        }
        let version = u32::from_le_bytes(b[8..12].try_into().expect("4 bytes"));
        if version != SCORE_VERSION {
            return Err(bad(&format!("version {version}")));
        }
        let frame_period_s = f64::from_le_bytes(b[12..20].try_into().expect("8 bytes"));
        let count = u64::from_le_bytes(b[20..28].try_into().expect("8 bytes")) as usize;
        let body = &b[28..];
        if body.len() != 4 * count {
            return Err(bad(&format!("{} body bytes for {count} scores", body.len())));
        }
        let scores = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { frame_period_s, scores })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut b = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut b)?;
        Self::from_bytes(&b)
    }
}

/// Run-length decision sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSidecar {
    pub threshold: f64,
    pub gap_fill_max_s: Option<f64>,
    pub frame_period_s: f64,
    pub n_frames: usize,
    pub speech_spans: Vec<[usize; 2]>,
}

impl DecisionSidecar {
    pub fn new(decisions: &[bool], threshold: f64, gap_fill_max_s: Option<f64>) -> Self {
        Self {
            threshold,
            gap_fill_max_s,
            frame_period_s: StftConfig::default().hop_len as f64 / SAMPLE_RATE_HZ as f64,
            n_frames: decisions.len(),
            speech_spans: to_spans(decisions),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    struct Constant;

    impl FrameScorer for Constant {
        fn score_chunk(&self, audio: &AudioBuffer) -> Result<Vec<f64>> {
            Ok(vec![0.5; StftConfig::default().frame_count(audio.len())])
        }
    }

    /// Scores each frame with its chunk-local index.
    struct LocalIndex;

    impl FrameScorer for LocalIndex {
        fn score_chunk(&self, audio: &AudioBuffer) -> Result<Vec<f64>> {
            Ok((0..StftConfig::default().frame_count(audio.len())).map(|i| i as f64).collect())
        }
    }

    #[test]
    fn fifteen_second_file_in_two_second_chunks() {
        let plan = ChunkPlan::default();
        let audio = AudioBuffer::zeros(240_000);
        assert_eq!(plan.chunk_count(240_000), 8);
        let s = score_file(&audio, &Constant, &plan).unwrap();
        assert_eq!(s.len(), 938);
        assert!(s.iter().all(|&v| v == 0.5));
        let idx = score_file(&audio, &LocalIndex, &plan).unwrap();
        assert_eq!(&idx[..3], &[0.0, 1.0, 2.0]);
        assert_eq!(idx[125], 0.0);
        assert_eq!(idx[937], 62.0);
    }

    #[test]
    fn exact_length_file_is_one_unpadded_chunk() {
        let plan = ChunkPlan::default();
        let idx = score_file(&AudioBuffer::zeros(32_000), &LocalIndex, &plan).unwrap();
        assert_eq!(idx, (0..126).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn short_chunks_cover_every_frame() {
        let plan = ChunkPlan { chunk_len_s: 0.05 };
        let s = score_file(&AudioBuffer::zeros(16_000), &Constant, &plan).unwrap();
        assert_eq!(s.len(), 63);
    }

    #[test]
    fn lc_model_rejects_too_short_chunks() {
        let det = Detector::new(NetworkParams::zeros(&ModelConfig::srsad_lc(8))).unwrap();
        let r = score_file(&AudioBuffer::zeros(16_000), &det, &ChunkPlan { chunk_len_s: 0.01 });
        assert!(matches!(r, Err(SadError::InputTooShort { .. })));
    }

    #[test]
    fn decisions() {
        assert_eq!(decide(&[0.4, 0.6], 0.5, None), vec![false, true]);
        assert!(decide(&[0.0, 0.3], 0.0, None).iter().all(|&d| d));
        let mut p = vec![1.0];
        p.extend([0.0; 5]);
        p.push(1.0);
        assert!(decide(&p, 0.5, Some(0.3)).iter().all(|&d| d));
    }

    #[test]
    fn score_file_round_trip_and_corruption() {
        let f = ScoreFile::new(&[0.1, 0.5, 0.9]);
        let b = f.to_bytes();
        assert_eq!(ScoreFile::from_bytes(&b).unwrap(), f);
        assert!(ScoreFile::from_bytes(&b[..b.len() - 1]).is_err());
    }
}
