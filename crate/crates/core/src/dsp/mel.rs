use serde::{Deserialize, Serialize};

use super::stft::Spectrogram;
use crate::matrix::Matrix;
use crate::{Result, SadError};

/// Log-mel features. Stored time-major (`n_frames` rows × `n_mels` columns),
/// addressed as `value(mel, frame)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpectrogram {
    frames: Vec<f64>,
    n_mels: usize,
    n_frames: usize,
    frame_period_s: f64,
}

impl MelSpectrogram {
    pub fn from_time_major(values: Matrix, frame_period_s: f64) -> Self {
        let (n_frames, n_mels) = values.shape();
        Self { frames: values.into_vec(), n_mels, n_frames, frame_period_s }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame_period_s(&self) -> f64 {
        self.frame_period_s
    }

    pub fn value(&self, mel: usize, frame: usize) -> f64 {
        self.frames[frame * self.n_mels + mel]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.frames[frame * self.n_mels..(frame + 1) * self.n_mels]
    }

    /// Features as a frames × mels matrix, the layout the networks consume.
    pub fn to_time_major(&self) -> Matrix {
        Matrix::from_vec(self.n_frames, self.n_mels, self.frames.clone())
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters with unit peak, spanning 0 Hz to Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// n_mels rows × n_bins columns.
    weights: Matrix,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate_hz: u32) -> Result<Self> {
        let n_bins = n_fft / 2 + 1;
        if n_mels == 0 {
            return Err(SadError::InvalidConfig("n_mels must be at least 1".into()));
        }
        if n_mels > n_bins {
            return Err(SadError::InvalidConfig(format!("{n_mels} mel bands exceed {n_bins} frequency bins")));
        }
        let f_max = sample_rate_hz as f64 / 2.0;
        let mel_max = hz_to_mel(f_max);
        let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64)).collect();
        let bin_hz = sample_rate_hz as f64 / n_fft as f64;
        let weights = Matrix::from_fn(n_mels, n_bins, |c, k| {
            let f = k as f64 * bin_hz;
            let (lo, mid, hi) = (edges[c], edges[c + 1], edges[c + 2]);
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            rising.min(falling).max(0.0)
        });
        Ok(Self { weights, centers_hz: edges[1..=n_mels].to_vec() })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    pub fn weight(&self, mel: usize, bin: usize) -> f64 {
        self.weights.get(mel, bin)
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }
}

/// Natural-log mel energies of the power spectrum, clamped below at `floor_eps`.
pub fn logmel(spec: &Spectrogram, n_mels: usize, floor_eps: f64) -> Result<MelSpectrogram> {
    if !(floor_eps > 0.0) {
        return Err(SadError::InvalidConfig("floor_eps must be positive".into()));
    }
    let bank = MelFilterbank::new(n_mels, spec.n_fft(), spec.sample_rate_hz())?;
    Ok(logmel_with(spec, &bank, floor_eps))
}

pub(crate) fn logmel_with(spec: &Spectrogram, bank: &MelFilterbank, floor_eps: f64) -> MelSpectrogram {
    let n_mels = bank.n_mels();
    let mut out = Matrix::zeros(spec.n_frames(), n_mels);
    let mut power = vec![0.0; spec.n_bins()];
    for t in 0..spec.n_frames() {
        for (p, c) in power.iter_mut().zip(spec.frame(t)) {
            *p = c.norm_sqr();
        }
        for (m, v) in out.row_mut(t).iter_mut().enumerate() {
            let e: f64 = bank.weights.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
            *v = e.max(floor_eps).ln();
        }
    }
    MelSpectrogram::from_time_major(out, spec.hop_len() as f64 / spec.sample_rate_hz() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft::{stft, StftConfig};
    use crate::dsp::AudioBuffer;

    fn sine(freq: f64, amp: f64) -> AudioBuffer {
        AudioBuffer::from_samples(
            (0..32_000).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()).collect(),
        )
    }

    #[test]
    fn silence_hits_the_floor() {
        let spec = stft(&AudioBuffer::zeros(32_000), &StftConfig::default()).unwrap();
        let mel = logmel(&spec, 80, 1e-10).unwrap();
        assert_eq!((mel.n_mels(), mel.n_frames()), (80, 126));
        assert!((mel.frame_period_s() - 0.016).abs() < 1e-15);
        let floor = 1e-10f64.ln();
        assert!((0..126).all(|t| mel.frame(t).iter().all(|&v| v == floor)));
    }

    #[test]
    fn one_khz_sine_peaks_in_the_band_centred_near_one_khz() {
        let spec = stft(&sine(1000.0, 1.0), &StftConfig::default()).unwrap();
        let mel = logmel(&spec, 80, 1e-10).unwrap();
        let bank = MelFilterbank::new(80, 512, 16000).unwrap();
        // Analytic answer: the band whose centre is nearest 1 kHz on the mel axis.
        let target = hz_to_mel(1000.0);
        let expected = (0..80)
            .min_by(|&a, &b| {
                (hz_to_mel(bank.centers_hz()[a]) - target).abs().total_cmp(&(hz_to_mel(bank.centers_hz()[b]) - target).abs())
            })
            .unwrap();
        for t in 1..125 {
            let row = mel.frame(t);
            let argmax = (0..80).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!(argmax.abs_diff(expected) <= 1, "frame {t}: {argmax} vs {expected}");
        }
        assert!((bank.centers_hz()[expected] - 1000.0).abs() < 60.0);
    }

    #[test]
    fn doubling_amplitude_adds_ln4() {
        let cfg = StftConfig::default();
        let a = logmel(&stft(&sine(440.0, 0.1), &cfg).unwrap(), 40, 1e-10).unwrap();
        let b = logmel(&stft(&sine(440.0, 0.2), &cfg).unwrap(), 40, 1e-10).unwrap();
        let floor = 1e-10f64.ln();
        for t in 0..a.n_frames() {
            for m in 0..40 {
                if a.value(m, t) > floor + 1.0 {
                    assert!((b.value(m, t) - a.value(m, t) - 4f64.ln()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn filterbank_rows_partition_the_band() {
        let bank = MelFilterbank::new(80, 512, 16000).unwrap();
        let (first, last) = (bank.centers_hz()[0], bank.centers_hz()[79]);
        for k in 0..257 {
            let f = k as f64 * 31.25;
            let s: f64 = (0..80).map(|m| bank.weight(m, k)).sum();
            assert!((0..80).all(|m| bank.weight(m, k) >= 0.0));
            if f >= first && f <= last {
                assert!(s > 0.0 && s <= 1.05, "bin {k}: {s}");
            }
        }
    }

    #[test]
    fn too_many_bands_is_a_config_error() {
        let spec = stft(&AudioBuffer::zeros(1000), &StftConfig::default()).unwrap();
        assert!(matches!(logmel(&spec, 300, 1e-10), Err(SadError::InvalidConfig(_))));
        assert!(matches!(logmel(&spec, 0, 1e-10), Err(SadError::InvalidConfig(_))));
    }
}
