use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::audio::AudioBuffer;
use crate::{Result, SadError};

/// Butterworth quality factor.
pub const BUTTERWORTH_Q: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Second-order IIR section, transposed direct form II, a0 normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn from_coefficients(b0: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Self {
        Self { b0, b1, b2, a1, a2, s1: 0.0, s2: 0.0 }
    }

    /// RBJ cookbook low-pass.
    pub fn lowpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self::from_coefficients(
            (1.0 - cos) / 2.0 / a0,
            (1.0 - cos) / a0,
            (1.0 - cos) / 2.0 / a0,
            -2.0 * cos / a0,
            (1.0 - alpha) / a0,
        )
    }

    /// RBJ cookbook high-pass.
    pub fn highpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self::from_coefficients(
            (1.0 + cos) / 2.0 / a0,
            -(1.0 + cos) / a0,
            (1.0 + cos) / 2.0 / a0,
            -2.0 * cos / a0,
            (1.0 - alpha) / a0,
        )
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.s1;
        self.s1 = self.b1 * x - self.a1 * y + self.s2;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }

    pub fn response_at(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    pub fn magnitude_at(&self, freq_hz: f64, fs: f64) -> f64 {
        self.response_at(freq_hz, fs).norm()
    }

    /// Roots of z² + a1·z + a2.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Highpass,
    Lowpass,
    Bandreject,
}

/// A filter request. `cutoff_low_hz` is the cutoff for high/low-pass and the
/// lower band edge for band rejection; `cutoff_high_hz` is used only for band
/// rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiquadSpec {
    pub kind: FilterKind,
    pub cutoff_low_hz: f64,
    pub cutoff_high_hz: f64,
    pub q: f64,
}

impl BiquadSpec {
    pub fn highpass(cutoff_hz: f64) -> Self {
        Self { kind: FilterKind::Highpass, cutoff_low_hz: cutoff_hz, cutoff_high_hz: 0.0, q: BUTTERWORTH_Q }
    }

    pub fn lowpass(cutoff_hz: f64) -> Self {
        Self { kind: FilterKind::Lowpass, cutoff_low_hz: cutoff_hz, cutoff_high_hz: 0.0, q: BUTTERWORTH_Q }
    }

    pub fn bandreject(low_hz: f64, high_hz: f64) -> Self {
        Self { kind: FilterKind::Bandreject, cutoff_low_hz: low_hz, cutoff_high_hz: high_hz, q: BUTTERWORTH_Q }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let nyquist = fs / 2.0;
        let in_range = |f: f64| f > 0.0 && f < nyquist;
        if !in_range(self.cutoff_low_hz) {
            return Err(SadError::InvalidConfig(format!("cutoff {} Hz outside (0, {nyquist})", self.cutoff_low_hz)));
        }
        if self.kind == FilterKind::Bandreject {
            if !in_range(self.cutoff_high_hz) {
                return Err(SadError::InvalidConfig(format!(
                    "cutoff {} Hz outside (0, {nyquist})",
                    self.cutoff_high_hz
                )));
            }
            if self.cutoff_high_hz <= self.cutoff_low_hz {
                return Err(SadError::InvalidConfig("band-reject edges must be increasing".into()));
            }
        }
        if !(self.q > 0.0) {
            return Err(SadError::InvalidConfig("q must be positive".into()));
        }
        Ok(())
    }
}

/// A designed filter: a sum of parallel branches, each a cascade of sections.
#[derive(Debug, Clone)]
pub struct FilterDesign {
    branches: Vec<Vec<Biquad>>,
}

impl FilterDesign {
    pub fn new(spec: &BiquadSpec, fs: f64) -> Result<Self> {
        spec.validate(fs)?;
        let branches = match spec.kind {
            FilterKind::Highpass => vec![vec![Biquad::highpass(spec.cutoff_low_hz, spec.q, fs)]],
            FilterKind::Lowpass => vec![vec![Biquad::lowpass(spec.cutoff_low_hz, spec.q, fs)]],
            // Low band kept by a low-pass at the lower edge, high band by a
            // high-pass at the upper edge; each branch is two cascaded
            // sections so the stop band reaches at least 12 dB for a band
            // spanning a factor of three.
            FilterKind::Bandreject => vec![
                vec![Biquad::lowpass(spec.cutoff_low_hz, spec.q, fs); 2],
                vec![Biquad::highpass(spec.cutoff_high_hz, spec.q, fs); 2],
            ],
        };
        Ok(Self { branches })
    }

    pub fn sections(&self) -> impl Iterator<Item = &Biquad> {
        self.branches.iter().flatten()
    }

    pub fn magnitude_at(&self, freq_hz: f64, fs: f64) -> f64 {
        self.branches
            .iter()
            .map(|b| b.iter().map(|s| s.response_at(freq_hz, fs)).product::<Complex64>())
            .sum::<Complex64>()
            .norm()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for branch in &self.branches {
            let mut sections = branch.clone();
            sections.iter_mut().for_each(Biquad::reset);
            for (o, &v) in out.iter_mut().zip(x) {
                *o += sections.iter_mut().fold(v, |acc, s| s.process(acc));
            }
        }
        out
    }
}

pub fn apply_biquad(audio: &AudioBuffer, spec: &BiquadSpec) -> Result<AudioBuffer> {
    let design = FilterDesign::new(spec, audio.sample_rate_hz() as f64)?;
    Ok(AudioBuffer::from_samples(design.apply(audio.samples())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 16000.0;

    fn sine(freq: f64, n: usize) -> AudioBuffer {
        AudioBuffer::from_samples((0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / FS).sin()).collect())
    }

    fn tail_power_db(x: &AudioBuffer) -> f64 {
        let s = &x.samples()[x.len() / 2..];
        10.0 * (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).log10()
    }

    #[test]
    fn highpass_removes_dc() {
        let x = AudioBuffer::from_samples(vec![0.3; 16000]);
        let y = apply_biquad(&x, &BiquadSpec::highpass(500.0)).unwrap();
        let tail = &y.samples()[8000..];
        assert!((tail.iter().sum::<f64>() / tail.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn lowpass_passes_low_tone() {
        let x = sine(100.0, 16000);
        let y = apply_biquad(&x, &BiquadSpec::lowpass(4000.0)).unwrap();
        assert!((tail_power_db(&y) - tail_power_db(&x)).abs() < 0.5);
    }

    #[test]
    fn bandreject_attenuates_mid_band_tone() {
        let x = sine(2000.0, 16000);
        let y = apply_biquad(&x, &BiquadSpec::bandreject(1000.0, 3000.0)).unwrap();
        let drop = tail_power_db(&x) - tail_power_db(&y);
        assert!(drop >= 12.0, "attenuation {drop} dB");
        let design = FilterDesign::new(&BiquadSpec::bandreject(1000.0, 3000.0), FS).unwrap();
        assert!(-20.0 * design.magnitude_at(2000.0, FS).log10() >= 12.0);
    }

    #[test]
    fn cutoff_response_is_near_minus_three_db() {
        for spec in [BiquadSpec::highpass(500.0), BiquadSpec::lowpass(3000.0), BiquadSpec::bandreject(300.0, 2000.0)] {
            let d = FilterDesign::new(&spec, FS).unwrap();
            let mut edges = vec![spec.cutoff_low_hz];
            if spec.kind == FilterKind::Bandreject {
                edges.push(spec.cutoff_high_hz);
            }
            for f in edges {
                let db = 20.0 * d.magnitude_at(f, FS).log10();
                assert!((db + 3.0).abs() <= 3.5, "{spec:?} at {f}: {db} dB");
            }
        }
    }

    #[test]
    fn designed_poles_are_stable() {
        for f in [50.0, 100.0, 500.0, 1000.0, 4000.0, 7900.0] {
            for spec in [BiquadSpec::highpass(f), BiquadSpec::lowpass(f)] {
                for s in FilterDesign::new(&spec, FS).unwrap().sections() {
                    assert!(s.poles().iter().all(|p| p.norm() < 1.0));
                }
            }
        }
    }

    #[test]
    fn invalid_cutoffs_are_rejected() {
        assert!(matches!(BiquadSpec::lowpass(9000.0).validate(FS), Err(SadError::InvalidConfig(_))));
        assert!(matches!(BiquadSpec::highpass(0.0).validate(FS), Err(SadError::InvalidConfig(_))));
        assert!(matches!(BiquadSpec::bandreject(3000.0, 1000.0).validate(FS), Err(SadError::InvalidConfig(_))));
    }
}
