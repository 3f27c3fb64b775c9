use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::label::{activity_from_energy, label_speech, LabelerConfig};
use super::manifest::{Category, Split};
use super::mix::{cut, draw_segment, loudness_or_ungated, ratio_db, scale, storage_precision};
use super::rng::{stream_rng, DOMAIN_TEST};
use crate::dsp::{frame_energy_db, AudioBuffer, MultiChannel, StftConfig};
use crate::{Result, SadError, SAMPLE_RATE_HZ};

/// Evaluation-set recipe. Ratios in dB, loudness in LKFS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestSetSpec {
    pub n_samples: usize,
    pub duration_s: f64,
    pub speech_excerpt_s: f64,
    pub p_speech: f64,
    pub p_music: f64,
    pub p_noise: f64,
    pub noise_to_music_db: (f64, f64),
    pub snr_range_db: (f64, f64),
    pub loudness_range_lkfs: (f64, f64),
    pub labeler: LabelerConfig,
    pub split: Split,
    pub seed: u64,
}

impl Default for TestSetSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            duration_s: 15.0,
            speech_excerpt_s: 12.0,
            p_speech: 0.42,
            p_music: 0.24,
            p_noise: 0.5,
            noise_to_music_db: (-5.0, 5.0),
            snr_range_db: (-5.0, 10.0),
            loudness_range_lkfs: (-30.0, -10.0),
            labeler: LabelerConfig::default(),
            split: Split::Test,
            seed: 0,
        }
    }
}

impl TestSetSpec {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.duration_s > 0.0) || !(self.speech_excerpt_s > 0.0) || self.speech_excerpt_s > self.duration_s {
            return Err(SadError::InvalidConfig("need 0 < speech_excerpt_s <= duration_s".into()));
        }
        if !prob(self.p_speech) || !prob(self.p_music) || !prob(self.p_noise) {
            return Err(SadError::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        if !ordered(self.noise_to_music_db) || !ordered(self.snr_range_db) || !ordered(self.loudness_range_lkfs) {
            return Err(SadError::InvalidConfig("ranges must be finite with low <= high".into()));
        }
        self.labeler.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameClass {
    Speech,
    Singing,
    Both,
    Neither,
}

impl FrameClass {
    pub fn from_flags(speech: bool, singing: bool) -> Self {
        match (speech, singing) {
            (true, true) => FrameClass::Both,
            (true, false) => FrameClass::Speech,
            (false, true) => FrameClass::Singing,
            (false, false) => FrameClass::Neither,
        }
    }

    pub fn has_singing(self) -> bool {
        matches!(self, FrameClass::Singing | FrameClass::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestProvenance {
    pub speech_source: Option<String>,
    pub speech_offset_s: Option<f64>,
    pub song_id: Option<String>,
    pub genre: Option<String>,
    pub noise_source: Option<String>,
    pub snr_db: Option<f64>,
    /// Speech-to-background power ratio over the speech excerpt, as mixed.
    pub realized_snr_db: Option<f64>,
    pub loudness_lkfs: f64,
}

#[derive(Debug, Clone)]
pub struct TestSample {
    pub audio: AudioBuffer,
    pub labels: Vec<bool>,
    pub frame_classes: Vec<FrameClass>,
    pub provenance: TestProvenance,
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn add(a: &mut MultiChannel, b: &MultiChannel, at: usize) {
    let k = a.channel_count();
    for c in 0..k {
        let src = &b.channels()[if b.channel_count() == 1 { 0 } else { c.min(b.channel_count() - 1) }];
        for (d, s) in a.channels_mut()[c][at..].iter_mut().zip(src) {
            *d += s;
        }
    }
}

/// One evaluation sample from its own counter-based stream.
pub fn build_test_sample(corpus: &Corpus, spec: &TestSetSpec, index: u64) -> Result<TestSample> {
    let rng = &mut stream_rng(spec.seed, DOMAIN_TEST, index);
    let m = corpus.manifest();
    let n = (spec.duration_s * SAMPLE_RATE_HZ as f64).round() as usize;
    let excerpt = (spec.speech_excerpt_s * SAMPLE_RATE_HZ as f64).round() as usize;
    let has_speech = rng.random_bool(spec.p_speech);
    let has_music = rng.random_bool(spec.p_music);
    let has_noise = rng.random_bool(spec.p_noise) || !has_music;
    let mut prov = TestProvenance {
        speech_source: None,
        speech_offset_s: None,
        song_id: None,
        genre: None,
        noise_source: None,
        snr_db: None,
        realized_snr_db: None,
        loudness_lkfs: uniform(rng, spec.loudness_range_lkfs),
    };

    let mut speech = MultiChannel::new(vec![vec![0.0; n]])?;
    let mut placement = 0;
    if has_speech {
        let (e, off) = draw_segment(corpus, &m.select(Category::Speech, spec.split), excerpt, rng)?;
        placement = rng.random_range(0..=n - excerpt);
        add(&mut speech, &cut(corpus.audio(e), off, excerpt)?, placement);
        prov.speech_source = Some(e.source_id.clone());
        prov.speech_offset_s = Some(placement as f64 / SAMPLE_RATE_HZ as f64);
    }

    let mut singing = None;
    let mut background = MultiChannel::new(vec![vec![0.0; n]])?;
    if has_music {
        let (s, off) = draw_segment(corpus, &m.select(Category::SingingStem, spec.split), n, rng)?;
        let inst = m.paired_instrumental(s)?;
        let vocals = cut(corpus.audio(s), off, n)?;
        add(&mut background, &vocals, 0);
        add(&mut background, &cut(corpus.audio(inst), off, n)?, 0);
        singing = Some(vocals.fold_to_mono());
        prov.song_id = s.song_id.clone();
        prov.genre = s.genre.clone();
    }
    if has_noise {
        let (e, off) = draw_segment(corpus, &m.select(Category::Noise, spec.split), n, rng)?;
        let mut noise = cut(corpus.audio(e), off, n)?;
        if has_music {
            let r = uniform(rng, spec.noise_to_music_db);
            let g = (background.power() / (noise.power() * 10f64.powf(-r / 10.0))).sqrt();
            noise = scale(&noise, g);
        }
        add(&mut background, &noise, 0);
        prov.noise_source = Some(e.source_id.clone());
    }
    if !(background.power() > 0.0) {
        return Err(SadError::DegenerateInterferer);
    }

    if has_speech {
        let snr = uniform(rng, spec.snr_range_db);
        let sp = cut(&speech, placement, excerpt)?;
        let bg = cut(&background, placement, excerpt)?;
        if sp.power() > 0.0 && bg.power() > 0.0 {
            let g = (sp.power() / (bg.power() * 10f64.powf(snr / 10.0))).sqrt();
            background = scale(&background, g);
            prov.snr_db = Some(snr);
            prov.realized_snr_db = Some(ratio_db(&sp, &cut(&background, placement, excerpt)?));
        }
    }

    let mut mixture = background.clone();
    add(&mut mixture, &speech, 0);
    let mono = mixture.fold_to_mono();
    let gain = 10f64.powf((prov.loudness_lkfs - loudness_or_ungated(&mono)?) / 20.0);
    let audio = storage_precision(mono.scaled(gain));

    let labels = label_speech(&speech.fold_to_mono(), &spec.labeler)?;
    let stft = StftConfig::default();
    let singing_active = match &singing {
        Some(v) => activity_from_energy(
            &frame_energy_db(v, stft.hop_len, stft.window_len)?,
            spec.labeler.energy_threshold_db_below_peak,
        ),
        None => vec![false; labels.len()],
    };
    let frame_classes = labels.iter().zip(&singing_active).map(|(&s, &g)| FrameClass::from_flags(s, g)).collect();
    Ok(TestSample { audio, labels, frame_classes, provenance: prov })
}

pub fn build_test_set(corpus: &Corpus, spec: &TestSetSpec) -> Result<Vec<TestSample>> {
    spec.validate()?;
    (0..spec.n_samples as u64).into_par_iter().map(|i| build_test_sample(corpus, spec, i)).collect()
}

/// Whole songs (vocals plus accompaniment) from one split, labelled as
/// speech-free; frame classes mark where the vocals sound.
pub fn build_singing_set(corpus: &Corpus, split: Split, labeler: &LabelerConfig) -> Result<Vec<TestSample>> {
    let m = corpus.manifest();
    let stft = StftConfig::default();
    m.select(Category::SingingStem, split)
        .into_iter()
        .map(|s| {
            let inst = m.paired_instrumental(s)?;
            let vocals = corpus.audio(s);
            let n = vocals.len().min(corpus.audio(inst).len());
            let mut song = cut(vocals, 0, n)?;
            add(&mut song, &cut(corpus.audio(inst), 0, n)?, 0);
            let v = cut(vocals, 0, n)?.fold_to_mono();
            let active =
                activity_from_energy(&frame_energy_db(&v, stft.hop_len, stft.window_len)?, labeler.energy_threshold_db_below_peak);
            Ok(TestSample {
                audio: storage_precision(song.fold_to_mono()),
                labels: vec![false; active.len()],
                frame_classes: active.iter().map(|&g| FrameClass::from_flags(false, g)).collect(),
                provenance: TestProvenance {
                    speech_source: None,
                    speech_offset_s: None,
                    song_id: s.song_id.clone(),
                    genre: s.genre.clone(),
                    noise_source: None,
                    snr_db: None,
                    realized_snr_db: None,
                    loudness_lkfs: loudness_or_ungated(&v).unwrap_or(f64::NEG_INFINITY),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::corpus::SynthCorpusSpec;

    fn corpus() -> Corpus {
        let spec = SynthCorpusSpec {
            speakers: [1, 1, 2],
            clips_per_speaker: 1,
            speech_clip_s: 6.0,
            songs: [1, 1, 2],
            song_s: 8.0,
            noises: [1, 1, 1],
            noise_s: 8.0,
        };
        Corpus::synthetic(&spec, 21).unwrap()
    }

    fn spec() -> TestSetSpec {
        TestSetSpec { n_samples: 12, duration_s: 7.0, speech_excerpt_s: 5.0, ..TestSetSpec::default() }
    }

    #[test]
    fn samples_have_consistent_lengths_and_classes() {
        let c = corpus();
        let set = build_test_set(&c, &spec()).unwrap();
        for s in &set {
            assert_eq!(s.audio.len(), 112_000);
            assert_eq!(s.labels.len(), 438);
            assert_eq!(s.frame_classes.len(), 438);
            if s.provenance.speech_source.is_none() {
                assert!(s.labels.iter().all(|&l| !l));
                assert!(s.frame_classes.iter().all(|c| matches!(c, FrameClass::Singing | FrameClass::Neither)));
            }
            let lk = crate::dsp::integrated_loudness_lkfs(&s.audio).unwrap();
            assert!((lk - s.provenance.loudness_lkfs).abs() < 0.01, "{lk}");
            if let (Some(a), Some(b)) = (s.provenance.snr_db, s.provenance.realized_snr_db) {
                assert!((a - b).abs() < 0.1);
            }
        }
    }

    #[test]
    fn labels_start_after_the_placement() {
        let c = corpus();
        let mut seen = 0;
        for s in build_test_set(&c, &TestSetSpec { n_samples: 20, ..spec() }).unwrap() {
            if let Some(off) = s.provenance.speech_offset_s {
                if let Some(first) = s.labels.iter().position(|&l| l) {
                    assert!(first as f64 >= (off / 0.016).floor(), "{first} vs {off}");
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn singing_set_has_no_speech() {
        let c = corpus();
        let set = build_singing_set(&c, Split::Test, &LabelerConfig::default()).unwrap();
        assert_eq!(set.len(), 2);
        for s in set {
            assert!(s.labels.iter().all(|&l| !l));
            assert!(s.frame_classes.iter().any(|c| *c == FrameClass::Singing));
        }
    }
}
