//! Audio frontend: framing, log-mel features, levels, loudness and filters.

pub mod audio;
pub mod biquad;
pub mod level;
pub mod loudness;
pub mod mel;
pub mod stft;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use audio::{AudioBuffer, MultiChannel};
pub use biquad::{apply_biquad, BiquadSpec, FilterKind};
pub use level::{frame_energy_db, scale_to_snr, snr_gain, ENERGY_FLOOR_DB};
pub use loudness::{integrated_loudness_lkfs, normalize_loudness};
pub use mel::{logmel, MelFilterbank, MelSpectrogram};
pub use stft::{stft, Spectrogram, StftConfig};

use crate::Result;

/// Complete feature extraction recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub n_mels: usize,
    pub floor_eps: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { stft: StftConfig::default(), n_mels: 80, floor_eps: 1e-10 }
    }
}

impl FeatureConfig {
    pub fn with_mels(n_mels: usize) -> Self {
        Self { n_mels, ..Self::default() }
    }

    pub fn frame_period_s(&self) -> f64 {
        self.stft.hop_len as f64 / crate::SAMPLE_RATE_HZ as f64
    }

    /// Short hex digest identifying the recipe, stored in weight headers.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("feature config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    pub fn extractor(&self) -> Result<FeatureExtractor> {
        self.stft.validate()?;
        let bank = MelFilterbank::new(self.n_mels, self.stft.n_fft, crate::SAMPLE_RATE_HZ)?;
        Ok(FeatureExtractor { cfg: *self, bank })
    }
}

/// Reusable feature extractor with a prebuilt filterbank.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    bank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn extract(&self, audio: &AudioBuffer) -> Result<MelSpectrogram> {
        let spec = stft(audio, &self.cfg.stft)?;
        Ok(mel::logmel_with(&spec, &self.bank, self.cfg.floor_eps))
    }
}
