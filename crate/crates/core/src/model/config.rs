use serde::{Deserialize, Serialize};

use crate::{Result, SadError};

/// Layer sizes of the recurrent body shared by both architectures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrSadConfig {
    /// Feature dimension (mel bands) consumed by the body and its skips.
    pub c: usize,
    pub front_linear_out: usize,
    pub gru1_hidden: usize,
    pub gru2_hidden: usize,
    pub gru3_hidden: usize,
    pub gru_layers_per_block: usize,
    pub head_hidden: usize,
}

impl SrSadConfig {
    /// Sizes read off the reference diagram: front c/2, bidirectional block
    /// outputs c, c and 2c, head c/2.
    pub fn standard(c: usize, gru_layers_per_block: usize) -> Self {
        let half = (c / 2).max(1);
        Self {
            c,
            front_linear_out: half,
            gru1_hidden: half,
            gru2_hidden: half,
            gru3_hidden: c,
            gru_layers_per_block,
            head_hidden: half,
        }
    }

    pub fn gru1_input(&self) -> usize {
        self.front_linear_out
    }

    /// front output, block 1 output, features.
    pub fn gru2_input(&self) -> usize {
        self.front_linear_out + 2 * self.gru1_hidden + self.c
    }

    /// block 1 output, block 2 output, features.
    pub fn gru3_input(&self) -> usize {
        2 * self.gru1_hidden + 2 * self.gru2_hidden + self.c
    }

    pub fn body_output(&self) -> usize {
        2 * self.gru3_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("c", self.c),
            ("front_linear_out", self.front_linear_out),
            ("gru1_hidden", self.gru1_hidden),
            ("gru2_hidden", self.gru2_hidden),
            ("gru3_hidden", self.gru3_hidden),
            ("gru_layers_per_block", self.gru_layers_per_block),
            ("head_hidden", self.head_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(SadError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One strided convolution along time: `channels` outputs, padding
/// `(kernel_size - 1) / 2` on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel_size: usize,
    pub stride: usize,
    pub channels: usize,
}

impl ConvSpec {
    pub fn padding(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    /// Output length of the forward (down-sampling) convolution.
    pub fn down_len(&self, t_in: usize) -> usize {
        (t_in + 2 * self.padding() - self.kernel_size) / self.stride + 1
    }
}

/// Temporal resampling around the recurrent body of the low-complexity model.
/// `up_layers[i]` mirrors `down_layers[len - 1 - i]` and restores its input length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcResampleConfig {
    pub down_layers: Vec<ConvSpec>,
    pub up_layers: Vec<ConvSpec>,
}

impl LcResampleConfig {
    /// Two stride-2, kernel-5 layers each way; output channels `c`.
    pub fn standard(c: usize) -> Self {
        let layer = ConvSpec { kernel_size: 5, stride: 2, channels: c };
        Self { down_layers: vec![layer; 2], up_layers: vec![layer; 2] }
    }

    pub fn total_stride(&self) -> usize {
        self.down_layers.iter().map(|l| l.stride).product()
    }

    /// Frame counts entering each down layer followed by the reduced count.
    pub fn down_lengths(&self, t: usize) -> Vec<usize> {
        let mut lens = vec![t];
        for l in &self.down_layers {
            lens.push(l.down_len(*lens.last().unwrap()));
        }
        lens
    }

    pub fn validate(&self, c: usize) -> Result<()> {
        if self.down_layers.len() != self.up_layers.len() || self.down_layers.is_empty() {
            return Err(SadError::InvalidConfig("need equal, non-zero numbers of down and up layers".into()));
        }
        for l in self.down_layers.iter().chain(&self.up_layers) {
            if l.kernel_size == 0 || l.stride == 0 || l.channels == 0 {
                return Err(SadError::InvalidConfig(format!("degenerate conv layer {l:?}")));
            }
            if l.kernel_size % 2 == 0 {
                return Err(SadError::InvalidConfig("conv kernels must have odd length".into()));
            }
            if l.stride > l.kernel_size {
                return Err(SadError::InvalidConfig("conv stride may not exceed kernel".into()));
            }
        }
        for (d, u) in self.down_layers.iter().zip(self.up_layers.iter().rev()) {
            if d.stride != u.stride || d.kernel_size != u.kernel_size {
                return Err(SadError::InvalidConfig("up layers must mirror down layer kernels and strides".into()));
            }
        }
        if self.down_layers.last().unwrap().channels != c {
            return Err(SadError::InvalidConfig(format!("last down layer must emit c = {c} channels")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SrSad,
    SrSadLc,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::SrSad => "sr-sad",
            Architecture::SrSadLc => "sr-sad-lc",
        })
    }
}

/// Full description of a network graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub body: SrSadConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample: Option<LcResampleConfig>,
}

impl ModelConfig {
    /// Full-rate model with two-layer recurrent blocks.
    pub fn srsad(c: usize) -> Self {
        Self { architecture: Architecture::SrSad, body: SrSadConfig::standard(c, 2), resample: None }
    }

    /// Low-complexity model: single-layer blocks at a quarter of the frame rate.
    pub fn srsad_lc(c: usize) -> Self {
        Self {
            architecture: Architecture::SrSadLc,
            body: SrSadConfig::standard(c, 1),
            resample: Some(LcResampleConfig::standard(c)),
        }
    }

    /// Named presets: `default`, `default-lc`, `small`, `small-lc`, `tiny`, `tiny-lc`.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "default" | "sr-sad" => Self::srsad(80),
            "default-lc" | "sr-sad-lc" => Self::srsad_lc(80),
            "small" => Self::srsad(32),
            "small-lc" => Self::srsad_lc(32),
            "tiny" => Self::srsad(16),
            "tiny-lc" => Self::srsad_lc(16),
            other => return Err(SadError::InvalidConfig(format!("unknown model preset '{other}'"))),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.body.c
    }

    /// Input width of the head's hidden layer.
    pub fn head_input(&self) -> usize {
        match &self.resample {
            Some(r) => r.up_layers.last().map_or(self.body.body_output(), |l| l.channels),
            None => self.body.body_output(),
        }
    }

    /// Fewest frames a forward pass accepts.
    pub fn min_frames(&self) -> usize {
        self.resample.as_ref().map_or(1, LcResampleConfig::total_stride)
    }

    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        match (self.architecture, &self.resample) {
            (Architecture::SrSad, None) => Ok(()),
            (Architecture::SrSadLc, Some(r)) => r.validate(self.body.c),
            (Architecture::SrSad, Some(_)) => Err(SadError::InvalidConfig("sr-sad takes no resampling layers".into())),
            (Architecture::SrSadLc, None) => Err(SadError::InvalidConfig("sr-sad-lc needs resampling layers".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_dimensions_follow_the_diagram() {
        let cfg = SrSadConfig::standard(80, 2);
        assert_eq!(2 * cfg.gru1_hidden, 80);
        assert_eq!(2 * cfg.gru2_hidden, 80);
        assert_eq!(cfg.body_output(), 160);
        assert_eq!(cfg.gru2_input(), 200);
        assert_eq!(cfg.gru3_input(), 240);
    }

    #[test]
    fn lc_reduces_126_frames_to_32() {
        let r = LcResampleConfig::standard(80);
        assert_eq!(r.total_stride(), 4);
        assert_eq!(r.down_lengths(126), vec![126, 63, 32]);
    }

    #[test]
    fn presets_validate() {
        for name in ["default", "default-lc", "small", "small-lc", "tiny", "tiny-lc"] {
            ModelConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ModelConfig::preset("huge").is_err());
    }

    #[test]
    fn unmirrored_resampling_is_rejected() {
        let mut cfg = ModelConfig::srsad_lc(16);
        cfg.resample.as_mut().unwrap().up_layers[0].stride = 3;
        cfg.resample.as_mut().unwrap().up_layers[0].kernel_size = 7;
        assert!(cfg.validate().is_err());
    }
}
