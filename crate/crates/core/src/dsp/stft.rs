use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::audio::{reflect_index, AudioBuffer};
use crate::{Result, SadError};

/// Short-time Fourier transform framing. The window is always a periodic Hann
/// taper of `window_len` samples, centred inside the `n_fft` frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub window_len: usize,
    pub hop_len: usize,
    pub center_padded: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { n_fft: 512, window_len: 512, hop_len: 256, center_padded: true }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 || self.window_len == 0 || self.hop_len == 0 {
            return Err(SadError::InvalidConfig("stft lengths must be positive".into()));
        }
        if self.window_len > self.n_fft {
            return Err(SadError::InvalidConfig(format!(
                "window_len {} exceeds n_fft {}",
                self.window_len, self.n_fft
            )));
        }
        if self.hop_len > self.window_len {
            return Err(SadError::InvalidConfig(format!(
                "hop_len {} exceeds window_len {}",
                self.hop_len, self.window_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count for a signal of `n_samples` under this framing.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        if self.center_padded {
            n_samples / self.hop_len + 1
        } else if n_samples < self.window_len {
            0
        } else {
            (n_samples - self.window_len) / self.hop_len + 1
        }
    }

    pub fn window(&self) -> Vec<f64> {
        hann(self.window_len)
    }

    /// Samples of frame `t`, reflect-padded at the edges when centred.
    pub(crate) fn frame_samples(&self, x: &[f64], t: usize, out: &mut [f64]) {
        let start = if self.center_padded {
            (t * self.hop_len) as isize - (self.window_len / 2) as isize
        } else {
            (t * self.hop_len) as isize
        };
        for (j, o) in out.iter_mut().enumerate() {
            *o = x[reflect_index(start + j as isize, x.len())];
        }
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Complex spectrogram with `n_bins` rows and `n_frames` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    n_bins: usize,
    n_frames: usize,
    hop_len: usize,
    sample_rate_hz: u32,
    /// Frame-major storage.
    data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn n_fft(&self) -> usize {
        (self.n_bins - 1) * 2
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.n_bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    pub fn magnitude(&self, bin: usize, frame: usize) -> f64 {
        self.get(bin, frame).norm()
    }
}

pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    audio.require_non_empty("stft")?;
    cfg.validate()?;
    let x = audio.samples();
    let n_frames = cfg.frame_count(x.len());
    if n_frames == 0 {
        return Err(SadError::InvalidInput(format!(
            "{} samples is shorter than one {}-sample window",
            x.len(),
            cfg.window_len
        )));
    }
    let window = cfg.window();
    let n_bins = cfg.n_bins();
    let offset = (cfg.n_fft - cfg.window_len) / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let mut frame = vec![0.0; cfg.window_len];
    let mut buf = vec![Complex64::default(); cfg.n_fft];
    let mut data = Vec::with_capacity(n_frames * n_bins);
    for t in 0..n_frames {
        cfg.frame_samples(x, t, &mut frame);
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for (j, (&s, &w)) in frame.iter().zip(&window).enumerate() {
            buf[offset + j] = Complex64::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram { n_bins, n_frames, hop_len: cfg.hop_len, sample_rate_hz: audio.sample_rate_hz(), data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, secs: f64) -> AudioBuffer {
        let n = (secs * 16000.0) as usize;
        AudioBuffer::from_samples(
            (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()).collect(),
        )
    }

    /// Plain O(N^2) DFT of one windowed frame.
    fn brute_dft(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &v) in frame.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn silent_two_seconds_gives_126_zero_frames() {
        let spec = stft(&AudioBuffer::zeros(32_000), &StftConfig::default()).unwrap();
        assert_eq!(spec.n_frames(), 126);
        assert_eq!(spec.n_bins(), 257);
        assert!((0..126).all(|t| spec.frame(t).iter().all(|c| c.norm() == 0.0)));
    }

    #[test]
    fn impulse_spectrum_is_flat() {
        let cfg = StftConfig { center_padded: false, ..StftConfig::default() };
        let w = cfg.window();
        for pos in [0usize, 100, 256] {
            let mut x = vec![0.0; 1024];
            x[pos] = 1.0;
            let spec = stft(&AudioBuffer::from_samples(x), &cfg).unwrap();
            for k in 0..spec.n_bins() {
                assert!((spec.magnitude(k, 0) - w[pos]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sine_peaks_at_bin_32_and_matches_brute_force() {
        let audio = sine(1000.0, 2.0);
        let cfg = StftConfig::default();
        let spec = stft(&audio, &cfg).unwrap();
        let w = cfg.window();
        let mut frame = vec![0.0; 512];
        // Edge frames see the reflected (phase-flipped) continuation.
        for t in [1, 2, 50, 124] {
            let mags: Vec<f64> = (0..spec.n_bins()).map(|k| spec.magnitude(k, t)).collect();
            let argmax = mags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(argmax, 32, "frame {t}");
        }
        for t in [0, 1, 50, 125] {
            let mags: Vec<f64> = (0..spec.n_bins()).map(|k| spec.magnitude(k, t)).collect();
            cfg.frame_samples(audio.samples(), t, &mut frame);
            let windowed: Vec<f64> = frame.iter().zip(&w).map(|(a, b)| a * b).collect();
            let oracle = brute_dft(&windowed);
            for (a, b) in mags.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8 * (1.0 + b));
            }
        }
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        assert!(matches!(stft(&AudioBuffer::zeros(0), &StftConfig::default()), Err(SadError::InvalidInput(_))));
        let bad = StftConfig { window_len: 1024, ..StftConfig::default() };
        assert!(matches!(stft(&AudioBuffer::zeros(10), &bad), Err(SadError::InvalidConfig(_))));
        let bad = StftConfig { hop_len: 600, ..StftConfig::default() };
        assert!(matches!(stft(&AudioBuffer::zeros(10), &bad), Err(SadError::InvalidConfig(_))));
    }

    #[test]
    fn frame_count_follows_center_rule() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.frame_count(240_000), 938);
        assert_eq!(cfg.frame_count(800), 4);
        let plain = StftConfig { center_padded: false, ..cfg };
        assert_eq!(plain.frame_count(1024), 3);
    }
}
