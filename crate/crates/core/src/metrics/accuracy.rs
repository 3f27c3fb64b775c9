use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Default operating threshold for accuracy on speech-free material.
pub const DEFAULT_ACC_THRESHOLD: f64 = 0.5;

/// Scores of the singing frames of one song.
#[derive(Debug, Clone, PartialEq)]
pub struct SongScores {
    pub song_id: String,
    pub genre: Option<String>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    /// Population standard deviation across songs.
    pub sigma: f64,
    pub n_songs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongAccuracy {
    pub song_id: String,
    pub genre: Option<String>,
    pub acc: f64,
    pub n_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub threshold: f64,
    pub per_song: Vec<SongAccuracy>,
    pub by_genre: BTreeMap<String, GroupStats>,
    pub overall: Option<GroupStats>,
    pub skipped_empty: usize,
}

pub fn group_stats(values: &[f64]) -> Option<GroupStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    Some(GroupStats { mean, sigma, n_songs: values.len() })
}

/// Per-song fraction of frames scored below `threshold`, grouped by genre.
/// Songs with no frames are skipped and counted.
pub fn accuracy_per_song(songs: &[SongScores], threshold: f64) -> AccuracyReport {
    let mut per_song = Vec::new();
    let mut skipped = 0;
    for s in songs {
        if s.scores.is_empty() {
            skipped += 1;
            continue;
        }
        let correct = s.scores.iter().filter(|&&v| v < threshold).count();
        per_song.push(SongAccuracy {
            song_id: s.song_id.clone(),
            genre: s.genre.clone(),
            acc: correct as f64 / s.scores.len() as f64,
            n_frames: s.scores.len(),
        });
    }
    if skipped > 0 {
        log::warn!("{skipped} songs without frames skipped");
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in &per_song {
        groups.entry(s.genre.clone().unwrap_or_else(|| "unknown".into())).or_default().push(s.acc);
    }
    let all: Vec<f64> = per_song.iter().map(|s| s.acc).collect();
    AccuracyReport {
        threshold,
        by_genre: groups.iter().filter_map(|(g, v)| group_stats(v).map(|st| (g.clone(), st))).collect(),
        overall: group_stats(&all),
        per_song,
        skipped_empty: skipped,
    }
}
