use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::augment::{apply_augmentations, mix_channels, Applied, AugInput, AugmentationConfig};
use super::corpus::Corpus;
use super::label::{label_speech, LabelerConfig};
use super::manifest::{Category, ManifestEntry, Split};
use super::rng::{stream_rng, DOMAIN_TRAIN, DOMAIN_VAL};
use crate::dsp::loudness::{integrated_loudness_lkfs, k_weight};
use crate::dsp::{AudioBuffer, MultiChannel};
use crate::{Result, SadError, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixPolicy {
    pub p_speech: f64,
    pub chunk_len_s: f64,
    pub snr_range_db: (f64, f64),
    pub singing_to_music_snr_range_db: (f64, f64),
    pub loudness_range_lkfs: (f64, f64),
    pub augmentations: AugmentationConfig,
    pub labeler: LabelerConfig,
    pub seed: u64,
}

impl Default for MixPolicy {
    fn default() -> Self {
        Self {
            p_speech: 0.8,
            chunk_len_s: 2.0,
            snr_range_db: (-5.0, 10.0),
            singing_to_music_snr_range_db: (-3.0, 6.0),
            loudness_range_lkfs: (-20.0, -20.0),
            augmentations: AugmentationConfig::default(),
            labeler: LabelerConfig::default(),
            seed: 0,
        }
    }
}

impl MixPolicy {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !(0.0..=1.0).contains(&self.p_speech) {
            return Err(SadError::InvalidConfig(format!("p_speech {} outside [0, 1]", self.p_speech)));
        }
        if !(self.chunk_len_s > 0.0) || self.chunk_samples() == 0 {
            return Err(SadError::InvalidConfig("chunk_len_s must be positive".into()));
        }
        if !ordered(self.snr_range_db) || !ordered(self.singing_to_music_snr_range_db) || !ordered(self.loudness_range_lkfs)
        {
            return Err(SadError::InvalidConfig("ranges must be finite with low <= high".into()));
        }
        self.augmentations.validate()?;
        self.labeler.validate()
    }

    pub fn chunk_samples(&self) -> usize {
        (self.chunk_len_s * SAMPLE_RATE_HZ as f64).round() as usize
    }

    /// Hex digest of the policy's JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("policy serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleClass {
    Speech,
    Singing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub source_id: String,
    pub path: String,
    pub offset_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixProvenance {
    pub class: SampleClass,
    pub target: SegmentRef,
    pub background: SegmentRef,
    /// Drawn target-to-background ratio; absent when the target segment is
    /// silent and no ratio can be set.
    pub snr_db: Option<f64>,
    /// Ratio after SNR jitter, as realized in the stored components.
    pub realized_snr_db: Option<f64>,
    pub loudness_lkfs: f64,
    pub applied: Vec<Applied>,
}

#[derive(Debug, Clone)]
pub struct MixtureSample {
    pub audio: AudioBuffer,
    pub labels: Vec<bool>,
    pub provenance: MixProvenance,
    /// Clean target and background as they entered the mixture, after level
    /// adjustment and jitter.
    pub components: (MultiChannel, MultiChannel),
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

const MAX_DRAW_ATTEMPTS: usize = 64;

/// Picks an entry long enough for `len` samples and a start offset; entries
/// that are too short are rejected and redrawn.
pub(crate) fn draw_segment<'a>(
    corpus: &'a Corpus,
    entries: &[&'a ManifestEntry],
    len: usize,
    rng: &mut impl Rng,
) -> Result<(&'a ManifestEntry, usize)> {
    if entries.is_empty() {
        return Err(SadError::ManifestInconsistent("no entries to draw from".into()));
    }
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let e = entries[rng.random_range(0..entries.len())];
        let n = corpus.audio(e).len();
        if n >= len {
            return Ok((e, rng.random_range(0..=n - len)));
        }
    }
    Err(SadError::ManifestInconsistent(format!("no entry holds {len} samples after {MAX_DRAW_ATTEMPTS} draws")))
}

pub(crate) fn cut(m: &MultiChannel, start: usize, len: usize) -> Result<MultiChannel> {
    if start + len > m.len() {
        return Err(SadError::ManifestInconsistent(format!("segment {start}+{len} past end {}", m.len())));
    }
    MultiChannel::new(m.channels().iter().map(|c| c[start..start + len].to_vec()).collect())
}

pub(crate) fn scale(m: &MultiChannel, g: f64) -> MultiChannel {
    MultiChannel::new(m.channels().iter().map(|c| c.iter().map(|v| v * g).collect()).collect())
        .expect("same shape")
}

pub(crate) fn ratio_db(target: &MultiChannel, background: &MultiChannel) -> f64 {
    10.0 * (target.power() / background.power()).log10()
}

/// Integrated loudness, falling back to ungated K-weighted power for buffers
/// shorter than one gating block.
pub(crate) fn loudness_or_ungated(audio: &AudioBuffer) -> Result<f64> {
    match integrated_loudness_lkfs(audio) {
        Err(SadError::InvalidInput(_)) => {
            let w = k_weight(audio);
            let ms = w.iter().map(|v| v * v).sum::<f64>() / w.len().max(1) as f64;
            if ms > 0.0 {
                Ok(-0.691 + 10.0 * ms.log10())
            } else {
                Err(SadError::Unmeasurable)
            }
        }
        other => other,
    }
}

/// Rounds to the precision samples are stored at on disk.
pub(crate) fn storage_precision(a: AudioBuffer) -> AudioBuffer {
    AudioBuffer::from_samples(a.samples().iter().map(|&v| v as f32 as f64).collect())
}

/// One training chunk drawn from `split`. All choices come from `rng`.
pub fn draw_training_sample(
    corpus: &Corpus,
    policy: &MixPolicy,
    split: Split,
    rng: &mut impl Rng,
) -> Result<MixtureSample> {
    policy.validate()?;
    let m = corpus.manifest();
    let len = policy.chunk_samples();
    let class = if rng.random_bool(policy.p_speech) { SampleClass::Speech } else { SampleClass::Singing };

    let (t_entry, t_off, b_entry, b_off, snr_range) = match class {
        SampleClass::Speech => {
            let (s, so) = draw_segment(corpus, &m.select(Category::Speech, split), len, rng)?;
            let (n, no) = draw_segment(corpus, &m.select(Category::Noise, split), len, rng)?;
            (s, so, n, no, policy.snr_range_db)
        }
        SampleClass::Singing => {
            let (s, so) = draw_segment(corpus, &m.select(Category::SingingStem, split), len, rng)?;
            let inst = m.paired_instrumental(s)?;
            (s, so, inst, so, policy.singing_to_music_snr_range_db)
        }
    };
    let target = cut(corpus.audio(t_entry), t_off, len)?;
    let background_raw = cut(corpus.audio(b_entry), b_off, len)?;
    if !(background_raw.power() > 0.0) {
        return Err(SadError::DegenerateInterferer);
    }
    let snr = uniform(rng, snr_range);
    let (background, snr_db) = if target.power() > 0.0 {
        let g = (target.power() / (background_raw.power() * 10f64.powf(snr / 10.0))).sqrt();
        (scale(&background_raw, g), Some(snr))
    } else {
        // Silent target: set the background from the whole source's level.
        let whole = corpus.audio(t_entry).power();
        let g = (whole / (background_raw.power() * 10f64.powf(snr / 10.0))).sqrt();
        (scale(&background_raw, g), None)
    };

    let loudness = uniform(rng, policy.loudness_range_lkfs);
    let measured = loudness_or_ungated(&mix_channels(&target, &background)?.fold_to_mono())?;
    let lg = 10f64.powf((loudness - measured) / 20.0);
    let (target, background) = (scale(&target, lg), scale(&background, lg));

    let aug = apply_augmentations(
        AugInput { target: target.clone(), background: Some(background.clone()) },
        &policy.augmentations,
        rng,
    )?;
    let background = scale(&background, aug.background_gain);
    let labels = match class {
        SampleClass::Speech => label_speech(&target.fold_to_mono(), &policy.labeler)?,
        SampleClass::Singing => vec![false; crate::dsp::StftConfig::default().frame_count(len)],
    };
    let realized = snr_db.map(|_| ratio_db(&target, &background));
    let seg = |e: &ManifestEntry, off| SegmentRef { source_id: e.source_id.clone(), path: e.path.clone(), offset_samples: off };
    Ok(MixtureSample {
        audio: storage_precision(aug.audio),
        labels,
        provenance: MixProvenance {
            class,
            target: seg(t_entry, t_off),
            background: seg(b_entry, b_off),
            snr_db,
            realized_snr_db: realized,
            loudness_lkfs: loudness,
            applied: aug.applied,
        },
        components: (target, background),
    })
}

/// The `index`-th sample of a split's stream: training draws depend on
/// `(seed, index)` only, so any subset can be generated in any order.
pub fn sample_at(corpus: &Corpus, policy: &MixPolicy, split: Split, index: u64) -> Result<MixtureSample> {
    let domain = if split == Split::Val { DOMAIN_VAL } else { DOMAIN_TRAIN };
    let mut rng = stream_rng(policy.seed, domain, index);
    draw_training_sample(corpus, policy, split, &mut rng)
}
