//! Integrated loudness per ITU-R BS.1770-4 for a single channel.

use super::audio::AudioBuffer;
use super::biquad::Biquad;
use crate::{Result, SadError};

const ABSOLUTE_GATE_LKFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;
const BLOCK_S: f64 = 0.4;
const STEP_S: f64 = 0.1;

/// Stage 1 of the K-weighting prefilter (head-related high shelf).
fn shelf(sample_rate_hz: f64) -> Biquad {
    // Analog prototype parameters of the BS.1770 prefilter, re-derived for an
    // arbitrary rate by bilinear transform (as pyloudnorm does).
    let gain_db = 3.999_843_853_973_347;
    let q = 0.707_175_236_955_419_3;
    let center_hz = 1_681.974_450_955_531_9;
    let k = (std::f64::consts::PI * center_hz / sample_rate_hz).tan();
    let vh = 10f64.powf(gain_db / 20.0);
    let vb = vh.powf(0.499_666_774_154_541_6);
    let a0 = 1.0 + k / q + k * k;
    Biquad::from_coefficients(
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / q + k * k) / a0,
    )
}

/// Stage 2 of the K-weighting prefilter (RLB high-pass).
fn rlb(sample_rate_hz: f64) -> Biquad {
    let q = 0.500_327_037_323_877_3;
    let center_hz = 38.135_470_876_139_82;
    let k = (std::f64::consts::PI * center_hz / sample_rate_hz).tan();
    let a0 = 1.0 + k / q + k * k;
    Biquad::from_coefficients(1.0, -2.0, 1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0)
}

pub fn k_weight(audio: &AudioBuffer) -> Vec<f64> {
    let fs = audio.sample_rate_hz() as f64;
    let mut s1 = shelf(fs);
    let mut s2 = rlb(fs);
    audio.samples().iter().map(|&x| s2.process(s1.process(x))).collect()
}

/// K-weighting magnitude response in dB at `freq_hz`.
pub fn k_weight_gain_db(freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let g = shelf(sample_rate_hz).magnitude_at(freq_hz, sample_rate_hz)
        * rlb(sample_rate_hz).magnitude_at(freq_hz, sample_rate_hz);
    20.0 * g.log10()
}

fn block_loudness(z: f64) -> f64 {
    -0.691 + 10.0 * z.log10()
}

/// Gated integrated loudness in LKFS.
pub fn integrated_loudness_lkfs(audio: &AudioBuffer) -> Result<f64> {
    let fs = audio.sample_rate_hz() as f64;
    let block = (BLOCK_S * fs).round() as usize;
    let step = (STEP_S * fs).round() as usize;
    if audio.len() < block {
        return Err(SadError::InvalidInput(format!(
            "loudness needs at least {BLOCK_S} s, got {:.3} s",
            audio.duration_s()
        )));
    }
    let weighted = k_weight(audio);
    let n_blocks = (weighted.len() - block) / step + 1;
    let z: Vec<f64> = (0..n_blocks)
        .map(|j| weighted[j * step..j * step + block].iter().map(|v| v * v).sum::<f64>() / block as f64)
        .collect();

    let above_abs: Vec<f64> = z.iter().copied().filter(|&zj| zj > 0.0 && block_loudness(zj) > ABSOLUTE_GATE_LKFS).collect();
    if above_abs.is_empty() {
        return Err(SadError::Unmeasurable);
    }
    let relative_gate = block_loudness(mean(&above_abs)) + RELATIVE_GATE_LU;
    let gated: Vec<f64> = above_abs.into_iter().filter(|&zj| block_loudness(zj) > relative_gate).collect();
    if gated.is_empty() {
        return Err(SadError::Unmeasurable);
    }
    Ok(block_loudness(mean(&gated)))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Applies the pure gain that brings the integrated loudness to `target_lkfs`.
pub fn normalize_loudness(audio: &AudioBuffer, target_lkfs: f64) -> Result<AudioBuffer> {
    let (out, _) = normalize_loudness_with_gain(audio, target_lkfs)?;
    Ok(out)
}

/// Like [`normalize_loudness`] but also returns the applied linear gain.
pub fn normalize_loudness_with_gain(audio: &AudioBuffer, target_lkfs: f64) -> Result<(AudioBuffer, f64)> {
    let current = integrated_loudness_lkfs(audio)?;
    let gain = if current == target_lkfs { 1.0 } else { 10f64.powf((target_lkfs - current) / 20.0) };
    Ok((audio.scaled(gain), gain))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, secs: f64) -> AudioBuffer {
        let n = (secs * 16000.0) as usize;
        AudioBuffer::from_samples(
            (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()).collect(),
        )
    }

    #[test]
    fn scaled_sine_shifts_by_twenty_db() {
        let a = integrated_loudness_lkfs(&sine(997.0, 1.0, 5.0)).unwrap();
        let b = integrated_loudness_lkfs(&sine(997.0, 0.1, 5.0)).unwrap();
        assert!((a - b - 20.0).abs() < 1e-6);
    }

    #[test]
    fn full_scale_sine_reads_power_plus_filter_gain() {
        // The meter output for a steady sine is the K-weighted mean square
        // minus 0.691 dB; check it against the analytic filter response.
        let expected = -0.691 + 10.0 * 0.5f64.log10() + k_weight_gain_db(997.0, 16000.0);
        let got = integrated_loudness_lkfs(&sine(997.0, 1.0, 10.0)).unwrap();
        assert!((got - expected).abs() < 0.02, "{got} vs {expected}");
    }

    #[test]
    fn silence_is_unmeasurable() {
        assert!(matches!(integrated_loudness_lkfs(&AudioBuffer::zeros(16000)), Err(SadError::Unmeasurable)));
        assert!(matches!(normalize_loudness(&AudioBuffer::zeros(16000), -20.0), Err(SadError::Unmeasurable)));
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(matches!(integrated_loudness_lkfs(&AudioBuffer::zeros(100)), Err(SadError::InvalidInput(_))));
    }

    #[test]
    fn normalization_hits_target_and_is_identity_at_target() {
        let x = sine(997.0, 1.0, 3.0);
        let current = integrated_loudness_lkfs(&x).unwrap();
        let (y, g) = normalize_loudness_with_gain(&x, current - 20.0).unwrap();
        assert!((g - 0.1).abs() < 1e-9);
        assert!((integrated_loudness_lkfs(&y).unwrap() - (current - 20.0)).abs() < 0.1);
        let same = normalize_loudness(&x, current).unwrap();
        assert_eq!(same, x);
    }
}
