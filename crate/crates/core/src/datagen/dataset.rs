use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mix::MixtureSample;
use super::testset::{FrameClass, TestSample};
use crate::dsp::AudioBuffer;
use crate::{Result, SadError};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const DATASET_INDEX_FILE: &str = "dataset.json";
const FRAME_PERIOD_S: f64 = 0.016;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Train,
    Val,
    Test,
    Singing,
}

/// Audio with frame labels and optional frame-class annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledAudio {
    pub name: String,
    pub audio: AudioBuffer,
    pub labels: Vec<bool>,
    pub frame_classes: Option<Vec<FrameClass>>,
    pub genre: Option<String>,
    pub song_id: Option<String>,
    pub provenance: serde_json::Value,
}

impl LabeledAudio {
    pub fn from_mixture(name: String, s: &MixtureSample) -> Result<Self> {
        Ok(Self {
            name,
            audio: s.audio.clone(),
            labels: s.labels.clone(),
            frame_classes: None,
            genre: None,
            song_id: None,
            provenance: serde_json::to_value(&s.provenance)?,
        })
    }

    pub fn from_test(name: String, s: &TestSample) -> Result<Self> {
        Ok(Self {
            name,
            audio: s.audio.clone(),
            labels: s.labels.clone(),
            frame_classes: Some(s.frame_classes.clone()),
            genre: s.provenance.genre.clone(),
            song_id: s.provenance.song_id.clone(),
            provenance: serde_json::to_value(&s.provenance)?,
        })
    }
}

/// Half-open `[start, end)` frame runs where the flag is set.
pub fn to_spans(flags: &[bool]) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push([s, i]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push([s, flags.len()]);
    }
    out
}

pub fn from_spans(spans: &[[usize; 2]], n: usize) -> Result<Vec<bool>> {
    let mut v = vec![false; n];
    for &[s, e] in spans {
        if s >= e || e > n {
            return Err(SadError::InvalidInput(format!("label span [{s}, {e}) invalid for {n} frames")));
        }
        v[s..e].iter_mut().for_each(|f| *f = true);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpan {
    pub start: usize,
    pub end: usize,
    pub class: FrameClass,
}

fn class_spans(classes: &[FrameClass]) -> Vec<ClassSpan> {
    let mut out: Vec<ClassSpan> = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.class == c && last.end == i => last.end = i + 1,
            _ => out.push(ClassSpan { start: i, end: i + 1, class: c }),
        }
    }
    out
}

fn classes_from_spans(spans: &[ClassSpan], n: usize) -> Result<Vec<FrameClass>> {
    let mut v = vec![FrameClass::Neither; n];
    for s in spans {
        if s.start >= s.end || s.end > n {
            return Err(SadError::InvalidInput(format!("class span [{}, {}) invalid", s.start, s.end)));
        }
        v[s.start..s.end].iter_mut().for_each(|c| *c = s.class);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub n_frames: usize,
    pub frame_period_s: f64,
    pub labels: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_classes: Option<Vec<ClassSpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub song_id: Option<String>,
    pub provenance: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub schema_version: u32,
    pub kind: DatasetKind,
    pub policy: serde_json::Value,
    pub policy_hash: String,
    pub samples: Vec<String>,
}

pub fn policy_hash(policy: &serde_json::Value) -> String {
    hex::encode(&Sha256::digest(policy.to_string().as_bytes())[..8])
}

/// Writes `<name>.wav` and `<name>.json` per item plus the dataset index.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    kind: DatasetKind,
    policy: &impl Serialize,
    items: &[LabeledAudio],
) -> Result<DatasetIndex> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for item in items {
        item.audio.write_wav(dir.join(format!("{}.wav", item.name)))?;
        let sidecar = Sidecar {
            name: item.name.clone(),
            n_frames: item.labels.len(),
            frame_period_s: FRAME_PERIOD_S,
            labels: to_spans(&item.labels),
            frame_classes: item.frame_classes.as_deref().map(class_spans),
            genre: item.genre.clone(),
            song_id: item.song_id.clone(),
            provenance: item.provenance.clone(),
        };
        std::fs::write(dir.join(format!("{}.json", item.name)), serde_json::to_vec_pretty(&sidecar)?)?;
    }
    let policy = serde_json::to_value(policy)?;
    let index = DatasetIndex {
        schema_version: DATASET_SCHEMA_VERSION,
        kind,
        policy_hash: policy_hash(&policy),
        policy,
        samples: items.iter().map(|i| i.name.clone()).collect(),
    };
    std::fs::write(dir.join(DATASET_INDEX_FILE), serde_json::to_vec_pretty(&index)?)?;
    Ok(index)
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(DatasetIndex, Vec<LabeledAudio>)> {
    let dir = dir.as_ref();
    let index: DatasetIndex = serde_json::from_slice(&std::fs::read(dir.join(DATASET_INDEX_FILE))?)?;
    if index.schema_version != DATASET_SCHEMA_VERSION {
        return Err(SadError::InvalidInput(format!("dataset schema version {}", index.schema_version)));
    }
    let items = index
        .samples
        .iter()
        .map(|name| {
            let side = read_sidecar(dir.join(format!("{name}.json")))?;
            let audio = AudioBuffer::read_wav(dir.join(format!("{name}.wav")))?;
            Ok(LabeledAudio {
                name: name.clone(),
                audio,
                labels: from_spans(&side.labels, side.n_frames)?,
                frame_classes: side.frame_classes.as_deref().map(|s| classes_from_spans(s, side.n_frames)).transpose()?,
                genre: side.genre,
                song_id: side.song_id,
                provenance: side.provenance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, items))
}
