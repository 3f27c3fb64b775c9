use std::path::Path;

use crate::{Result, SadError, SAMPLE_RATE_HZ};

/// Mono audio at the toolkit's fixed 16 kHz rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(SadError::InvalidInput(format!(
                "sample rate {sample_rate_hz} Hz; only {SAMPLE_RATE_HZ} Hz is supported"
            )));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// Wraps samples that are known to be at 16 kHz.
    pub fn from_samples(samples: Vec<f64>) -> Self {
        Self { samples, sample_rate_hz: SAMPLE_RATE_HZ }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_samples(vec![0.0; len])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean square over all samples.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, &s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self::from_samples(self.samples.iter().map(|&s| s * gain).collect())
    }

    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self::from_samples(self.samples[start..start + len].to_vec())
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            return Err(SadError::InvalidInput(format!("{what}: empty audio buffer")));
        }
        Ok(())
    }

    /// Reads a mono 16 kHz WAV file (16-bit integer or 32-bit float PCM).
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let multi = MultiChannel::read_wav(path.as_ref())?;
        if multi.channel_count() != 1 {
            return Err(SadError::UnsupportedAudio {
                path: path.as_ref().to_path_buf(),
                detail: format!("{} channels, expected mono", multi.channel_count()),
            });
        }
        Ok(multi.fold_to_mono())
    }

    /// Writes 32-bit float mono PCM.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate_hz,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            writer.write_sample(s as f32)?;
        }
        writer.finalize()?;
        Ok(())
    }

    /// Writes 16-bit integer mono PCM, clamping to full scale.
    pub fn write_wav_i16(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate_hz,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            writer.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16)?;
        }
        writer.finalize()?;
        Ok(())
    }
}

/// Multi-channel audio, used where source material may be stereo.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannel {
    channels: Vec<Vec<f64>>,
}

impl MultiChannel {
    /// All channels must have equal length and there must be at least one.
    pub fn new(channels: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(SadError::InvalidInput("no channels".into()));
        };
        if channels.iter().any(|c| c.len() != first.len()) {
            return Err(SadError::InvalidInput("channel lengths differ".into()));
        }
        Ok(Self { channels })
    }

    pub fn mono(audio: &AudioBuffer) -> Self {
        Self { channels: vec![audio.samples().to_vec()] }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.channels
    }

    /// Mean square across every channel.
    pub fn power(&self) -> f64 {
        let n = self.channels.iter().map(Vec::len).sum::<usize>();
        if n == 0 {
            return 0.0;
        }
        self.channels.iter().flatten().map(|s| s * s).sum::<f64>() / n as f64
    }

    pub fn peak(&self) -> f64 {
        self.channels.iter().flatten().fold(0.0, |m, &s| m.max(s.abs()))
    }

    /// Averages channels into one.
    pub fn fold_to_mono(&self) -> AudioBuffer {
        let k = self.channels.len() as f64;
        let n = self.len();
        let samples = (0..n).map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / k).collect();
        AudioBuffer::from_samples(samples)
    }

    /// Writes interleaved 32-bit float PCM.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: self.channels.len() as u16,
            sample_rate: SAMPLE_RATE_HZ,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for i in 0..self.len() {
            for c in &self.channels {
                writer.write_sample(c[i] as f32)?;
            }
        }
        writer.finalize()?;
        Ok(())
    }

    pub fn read_wav(path: &Path) -> Result<Self> {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.sample_rate != SAMPLE_RATE_HZ {
            return Err(SadError::UnsupportedAudio {
                path: path.to_path_buf(),
                detail: format!("sample rate {} Hz, expected {SAMPLE_RATE_HZ} Hz", spec.sample_rate),
            });
        }
        let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f64 / 32768.0))
                .collect::<std::result::Result<_, _>>()?,
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?,
            (fmt, bits) => {
                return Err(SadError::UnsupportedAudio {
                    path: path.to_path_buf(),
                    detail: format!("{bits}-bit {fmt:?} PCM"),
                })
            }
        };
        let k = spec.channels as usize;
        let channels = (0..k).map(|c| interleaved.iter().skip(c).step_by(k).copied().collect()).collect();
        Self::new(channels)
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

/// Index into a sequence of length `n` with whole-sample symmetric reflection
/// (the edge sample is not repeated), valid for any integer position.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Extends `x` to `target_len` samples by reflecting past its end.
pub fn reflect_extend(x: &[f64], target_len: usize) -> Vec<f64> {
    (0..target_len).map(|i| x[reflect_index(i as isize, x.len())]).collect()
}
