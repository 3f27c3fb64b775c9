use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Category, CorpusManifest, ManifestEntry, Split};
use super::rng::{stream_rng, DOMAIN_SYNTH};
use super::synth::{synth_signal, SignalKind};
use crate::dsp::{AudioBuffer, MultiChannel};
use crate::{Result, SadError, SAMPLE_RATE_HZ};

/// A manifest with its audio held in memory, keyed by entry path.
#[derive(Debug, Clone)]
pub struct Corpus {
    manifest: CorpusManifest,
    audio: BTreeMap<String, MultiChannel>,
}

impl Corpus {
    /// Every drawable entry must have audio at least as long as its
    /// declared duration (to the nearest sample).
    pub fn from_parts(manifest: CorpusManifest, audio: BTreeMap<String, MultiChannel>) -> Result<Self> {
        manifest.validate()?;
        for e in manifest.entries.iter().filter(|e| !e.excluded) {
            let a = audio
                .get(&e.path)
                .ok_or_else(|| SadError::ManifestInconsistent(format!("no audio for {}", e.path)))?;
            let declared = (e.duration_s * SAMPLE_RATE_HZ as f64).round() as usize;
            if a.len() + 1 < declared {
                return Err(SadError::ManifestInconsistent(format!(
                    "{}: {} samples, manifest declares {declared}",
                    e.path,
                    a.len()
                )));
            }
        }
        Ok(Self { manifest, audio })
    }

    /// Reads a manifest and all audio it references. Relative paths resolve
    /// against the manifest's directory.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = CorpusManifest::load(manifest_path)?;
        let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let paths: Vec<&String> = manifest.entries.iter().filter(|e| !e.excluded).map(|e| &e.path).collect();
        let audio = paths
            .par_iter()
            .map(|p| {
                let full = resolve(&base, p);
                MultiChannel::read_wav(&full).map(|a| ((*p).clone(), a))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Self::from_parts(manifest, audio)
    }

    /// Writes every audio file under `dir` at its manifest path, plus
    /// `manifest.json`. Returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        for (path, audio) in &self.audio {
            let full = dir.join(path);
            if let Some(parent) = full.parent() {
                std::fs::create_dir_all(parent)?;
            }
            audio.write_wav(&full)?;
        }
        let manifest_path = dir.join("manifest.json");
        self.manifest.save(&manifest_path)?;
        Ok(manifest_path)
    }

    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    pub fn audio(&self, entry: &ManifestEntry) -> &MultiChannel {
        &self.audio[&entry.path]
    }

    pub fn synthetic(spec: &SynthCorpusSpec, seed: u64) -> Result<Self> {
        let plan = spec.plan();
        let rendered = plan
            .par_iter()
            .enumerate()
            .map(|(i, (entry, kind))| {
                let mut rng = stream_rng(seed, DOMAIN_SYNTH, i as u64);
                let a = synth_signal(*kind, entry.duration_s, &mut rng)?;
                // Stored at file precision so a written corpus reloads identically.
                let samples = a.samples().iter().map(|&v| v as f32 as f64).collect();
                Ok((entry.path.clone(), MultiChannel::mono(&AudioBuffer::from_samples(samples))))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Self::from_parts(CorpusManifest::new(plan.into_iter().map(|(e, _)| e).collect())?, rendered)
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Shape of a generated stand-in corpus. Counts are per split in the order
/// train, val, test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusSpec {
    pub speakers: [usize; 3],
    pub clips_per_speaker: usize,
    pub speech_clip_s: f64,
    pub songs: [usize; 3],
    pub song_s: f64,
    pub noises: [usize; 3],
    pub noise_s: f64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        Self {
            speakers: [8, 3, 4],
            clips_per_speaker: 2,
            speech_clip_s: 13.0,
            songs: [8, 3, 4],
            song_s: 16.0,
            noises: [4, 2, 3],
            noise_s: 16.0,
        }
    }
}

const GENRES: [&str; 4] = ["pop", "rock", "blues", "jazz"];

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

impl SynthCorpusSpec {
    fn plan(&self) -> Vec<(ManifestEntry, SignalKind)> {
        let mut out = Vec::new();
        let entry = |category, path: String, duration_s, source_id: String, song_id, genre, split| ManifestEntry {
            category,
            path,
            duration_s,
            source_id,
            song_id,
            genre,
            split,
            excluded: false,
        };
        for (k, split) in Split::ALL.into_iter().enumerate() {
            let sn = split_name(split);
            for spk in 0..self.speakers[k] {
                for clip in 0..self.clips_per_speaker {
                    out.push((
                        entry(
                            Category::Speech,
                            format!("speech/{sn}_spk{spk:03}_{clip:02}.wav"),
                            self.speech_clip_s,
                            format!("spk-{sn}-{spk}"),
                            None,
                            None,
                            split,
                        ),
                        SignalKind::SpeechLike,
                    ));
                }
            }
            for song in 0..self.songs[k] {
                let song_id = format!("song-{sn}-{song}");
                let genre = Some(GENRES[song % GENRES.len()].to_string());
                for (cat, dir, kind) in [
                    (Category::SingingStem, "vocals", SignalKind::SingingLike),
                    (Category::InstrumentalStem, "accompaniment", SignalKind::InstrumentalLike),
                ] {
                    out.push((
                        entry(
                            cat,
                            format!("music/{sn}_song{song:03}_{dir}.wav"),
                            self.song_s,
                            format!("artist-{sn}-{song}"),
                            Some(song_id.clone()),
                            genre.clone(),
                            split,
                        ),
                        kind,
                    ));
                }
            }
            for noise in 0..self.noises[k] {
                out.push((
                    entry(
                        Category::Noise,
                        format!("noise/{sn}_noise{noise:03}.wav"),
                        self.noise_s,
                        format!("noise-{sn}-{noise}"),
                        None,
                        None,
                        split,
                    ),
                    SignalKind::NoiseLike,
                ));
            }
        }
        out
    }
}
