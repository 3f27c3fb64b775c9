use serde::{Deserialize, Serialize};

use crate::dsp::{frame_energy_db, AudioBuffer, StftConfig, ENERGY_FLOOR_DB};
use crate::{Result, SadError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelerConfig {
    pub energy_threshold_db_below_peak: f64,
    pub gap_fill_max_s: f64,
    pub frame_period_s: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self { energy_threshold_db_below_peak: 40.0, gap_fill_max_s: 0.3, frame_period_s: 0.016 }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_threshold_db_below_peak > 0.0) || !(self.gap_fill_max_s > 0.0) || !(self.frame_period_s > 0.0) {
            return Err(SadError::InvalidConfig("labeler threshold, gap and frame period must be positive".into()));
        }
        Ok(())
    }

    /// Longest interior gap, in frames, that gets filled.
    pub fn max_fill_frames(&self) -> usize {
        let ratio = self.gap_fill_max_s / self.frame_period_s;
        let whole = ratio.floor();
        if (ratio - whole).abs() < 1e-9 {
            (whole as usize).saturating_sub(1)
        } else {
            whole as usize
        }
    }
}

/// Frame activity from per-frame energies: active iff within the threshold
/// of the loudest frame. All-floor input is entirely inactive.
pub fn activity_from_energy(energy_db: &[f64], threshold_db: f64) -> Vec<bool> {
    let peak = energy_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > ENERGY_FLOOR_DB) {
        return vec![false; energy_db.len()];
    }
    energy_db.iter().map(|&e| e >= peak - threshold_db).collect()
}

/// Marks inactive runs of at most `max_gap` frames active when both
/// neighbours are active. Leading and trailing runs are left alone.
pub fn fill_gaps(activity: &mut [bool], max_gap: usize) {
    let mut last_active: Option<usize> = None;
    for i in 0..activity.len() {
        if activity[i] {
            if let Some(prev) = last_active {
                let gap = i - prev - 1;
                if gap > 0 && gap <= max_gap {
                    activity[prev + 1..i].iter_mut().for_each(|a| *a = true);
                }
            }
            last_active = Some(i);
        }
    }
}

/// Speech labels from the clean speech track, framed like the features.
pub fn label_speech(clean_speech: &AudioBuffer, cfg: &LabelerConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    let stft = StftConfig::default();
    let energy = frame_energy_db(clean_speech, stft.hop_len, stft.window_len)?;
    let mut active = activity_from_energy(&energy, cfg.energy_threshold_db_below_peak);
    fill_gaps(&mut active, cfg.max_fill_frames());
    Ok(active)
}
