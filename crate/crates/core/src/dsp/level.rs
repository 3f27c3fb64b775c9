use super::audio::{mean_square, AudioBuffer};
use super::stft::StftConfig;
use crate::{Result, SadError};

/// Level reported for frames with zero energy.
pub const ENERGY_FLOOR_DB: f64 = -120.0;

/// Per-frame RMS level in dBFS, framed exactly like the log-mel frontend
/// (centred, reflect-padded, rectangular window).
pub fn frame_energy_db(audio: &AudioBuffer, hop_len: usize, window_len: usize) -> Result<Vec<f64>> {
    audio.require_non_empty("frame_energy_db")?;
    if hop_len == 0 || window_len < hop_len {
        return Err(SadError::InvalidConfig(format!(
            "window_len {window_len} must be at least hop_len {hop_len} > 0"
        )));
    }
    let cfg = StftConfig { n_fft: window_len, window_len, hop_len, center_padded: true };
    let mut frame = vec![0.0; window_len];
    Ok((0..cfg.frame_count(audio.len()))
        .map(|t| {
            cfg.frame_samples(audio.samples(), t, &mut frame);
            power_to_db(mean_square(&frame))
        })
        .collect())
}

fn power_to_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(ENERGY_FLOOR_DB)
    } else {
        ENERGY_FLOOR_DB
    }
}

/// Gain that puts `interferer` at `snr_db` below `signal`, with powers
/// measured over the overlapping prefix of both buffers.
pub fn snr_gain(signal: &AudioBuffer, interferer: &AudioBuffer, snr_db: f64) -> Result<f64> {
    let n = signal.len().min(interferer.len());
    let p_sig = mean_square(&signal.samples()[..n]);
    let p_int = mean_square(&interferer.samples()[..n]);
    if !(p_int > 0.0) {
        return Err(SadError::DegenerateInterferer);
    }
    if !(p_sig > 0.0) {
        return Err(SadError::InvalidInput("signal is silent over the overlap".into()));
    }
    Ok((p_sig / (p_int * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Returns the interferer rescaled to sit at `snr_db` relative to `signal`.
pub fn scale_to_snr(signal: &AudioBuffer, interferer: &AudioBuffer, snr_db: f64) -> Result<AudioBuffer> {
    let g = snr_gain(signal, interferer, snr_db)?;
    Ok(interferer.scaled(g))
}

/// Realized SNR in dB between two buffers over their overlap.
pub fn measure_snr_db(signal: &[f64], interferer: &[f64]) -> f64 {
    let n = signal.len().min(interferer.len());
    10.0 * (mean_square(&signal[..n]) / mean_square(&interferer[..n])).log10()
}
