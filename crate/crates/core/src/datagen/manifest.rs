use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Result, SadError};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Speech,
    SingingStem,
    InstrumentalStem,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub category: Category,
    /// Relative paths resolve against the manifest's directory.
    pub path: String,
    pub duration_s: f64,
    /// Speaker, artist or recording identity; never shared across splits.
    pub source_id: String,
    /// Pairs singing and instrumental stems of one song.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub song_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
    pub split: Split,
    /// Entries flagged here (e.g. songs with rap) are never drawn.
    #[serde(default)]
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Self { schema_version: MANIFEST_SCHEMA_VERSION, entries };
        m.validate()?;
        Ok(m)
    }

    /// Split hygiene and stem pairing.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(SadError::ManifestInconsistent(format!(
                "schema version {} (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut splits_of: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        for e in &self.entries {
            if !(e.duration_s > 0.0) {
                return Err(SadError::ManifestInconsistent(format!("{}: non-positive duration", e.path)));
            }
            splits_of.entry(&e.source_id).or_default().insert(e.split);
        }
        if let Some((id, s)) = splits_of.iter().find(|(_, s)| s.len() > 1) {
            return Err(SadError::ManifestInconsistent(format!("source '{id}' appears in splits {s:?}")));
        }
        for e in self.entries.iter().filter(|e| e.category == Category::SingingStem && !e.excluded) {
            self.paired_instrumental(e)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Drawable entries of one category in one split, in manifest order.
    pub fn select(&self, category: Category, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.category == category && e.split == split && !e.excluded).collect()
    }

    /// The instrumental stem sharing a singing stem's song id.
    pub fn paired_instrumental(&self, singing: &ManifestEntry) -> Result<&ManifestEntry> {
        let song = singing
            .song_id
            .as_deref()
            .ok_or_else(|| SadError::ManifestInconsistent(format!("{}: singing stem without song_id", singing.path)))?;
        self.entries
            .iter()
            .find(|e| e.category == Category::InstrumentalStem && e.song_id.as_deref() == Some(song) && !e.excluded)
            .ok_or_else(|| SadError::ManifestInconsistent(format!("song '{song}' has no instrumental stem")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(cat: Category, src: &str, song: Option<&str>, split: Split) -> ManifestEntry {
        ManifestEntry {
            category: cat,
            path: format!("{src}.wav"),
            duration_s: 3.0,
            source_id: src.into(),
            song_id: song.map(String::from),
            genre: None,
            split,
            excluded: false,
        }
    }

    #[test]
    fn source_in_two_splits_is_rejected() {
        let r = CorpusManifest::new(vec![
            entry(Category::Speech, "spk1", None, Split::Train),
            entry(Category::Speech, "spk1", None, Split::Val),
        ]);
        assert!(matches!(r, Err(SadError::ManifestInconsistent(_))));
    }

    #[test]
    fn unpaired_singing_stem_is_rejected() {
        let r = CorpusManifest::new(vec![entry(Category::SingingStem, "art", Some("song"), Split::Train)]);
        assert!(matches!(r, Err(SadError::ManifestInconsistent(_))));
    }

    #[test]
    fn json_round_trip_and_selection() {
        let m = CorpusManifest::new(vec![
            entry(Category::SingingStem, "art", Some("s1"), Split::Train),
            entry(Category::InstrumentalStem, "art", Some("s1"), Split::Train),
            entry(Category::Speech, "spk", None, Split::Test),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        let back = CorpusManifest::load(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.select(Category::Speech, Split::Test).len(), 1);
        assert_eq!(back.select(Category::Speech, Split::Train).len(), 0);
    }
}
