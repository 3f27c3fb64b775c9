use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::biquad::FilterDesign;
use crate::dsp::{AudioBuffer, BiquadSpec, MultiChannel};
use crate::{Result, SadError, SAMPLE_RATE_HZ};

/// Application probability and uniform parameter range of one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub probability: f64,
    pub low: f64,
    pub high: f64,
}

impl Method {
    const fn new(probability: f64, low: f64, high: f64) -> Self {
        Self { probability, low, high }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.high > self.low {
            rng.random_range(self.low..=self.high)
        } else {
            self.low
        }
    }
}

/// The augmentation chain. Ranges: SNR jitter in dB, filter edges in Hz,
/// clipping level as a fraction of the peak, amplitude gain, white-noise SNR
/// in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub snr_jitter: Method,
    pub band_reject: Method,
    pub band_reject_min_ratio: f64,
    pub highpass: Method,
    pub lowpass: Method,
    pub clipping: Method,
    pub amplitude_scale: Method,
    pub white_noise: Method,
    pub stereo_to_mono: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            snr_jitter: Method::new(0.8, -7.0, 7.0),
            band_reject: Method::new(0.8, 100.0, 4000.0),
            band_reject_min_ratio: 1.5,
            highpass: Method::new(0.3, 500.0, 4000.0),
            lowpass: Method::new(0.1, 3000.0, 8000.0),
            clipping: Method::new(0.1, 0.3, 0.9),
            amplitude_scale: Method::new(0.4, 0.1, 1.0),
            white_noise: Method::new(0.1, 20.0, 40.0),
            stereo_to_mono: 1.0,
        }
    }
}

/// Highest filter cutoff used; requests above it are clamped.
pub const MAX_CUTOFF_FRACTION_OF_NYQUIST: f64 = 0.99;

impl AugmentationConfig {
    /// Every method switched off.
    pub fn disabled() -> Self {
        let mut c = Self::default();
        for m in c.methods_mut() {
            m.probability = 0.0;
        }
        c.stereo_to_mono = 0.0;
        c
    }

    fn methods_mut(&mut self) -> [&mut Method; 7] {
        [
            &mut self.snr_jitter,
            &mut self.band_reject,
            &mut self.highpass,
            &mut self.lowpass,
            &mut self.clipping,
            &mut self.amplitude_scale,
            &mut self.white_noise,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SadError::InvalidConfig(m));
        let nyquist = SAMPLE_RATE_HZ as f64 / 2.0;
        let mut copy = *self;
        for m in copy.methods_mut() {
            if !(0.0..=1.0).contains(&m.probability) {
                return bad(format!("probability {} outside [0, 1]", m.probability));
            }
            if !(m.low <= m.high) || !m.low.is_finite() || !m.high.is_finite() {
                return bad(format!("range [{}, {}] is not ordered", m.low, m.high));
            }
        }
        if !(0.0..=1.0).contains(&self.stereo_to_mono) {
            return bad("stereo_to_mono probability outside [0, 1]".into());
        }
        for (name, m) in [("band_reject", self.band_reject), ("highpass", self.highpass), ("lowpass", self.lowpass)] {
            if !(m.low > 0.0 && m.high <= nyquist) {
                return bad(format!("{name} range [{}, {}] Hz outside (0, {nyquist}]", m.low, m.high));
            }
        }
        if !(self.band_reject_min_ratio >= 1.0)
            || self.band_reject.low * self.band_reject_min_ratio > self.band_reject.high
        {
            return bad("band_reject range too narrow for its minimum edge ratio".into());
        }
        if !(self.clipping.low > 0.0 && self.clipping.high <= 1.0) {
            return bad("clipping fractions must lie in (0, 1]".into());
        }
        if !(self.amplitude_scale.low >= 0.0) {
            return bad("amplitude gains must be non-negative".into());
        }
        Ok(())
    }
}

/// A method that fired, with the parameters it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Applied {
    SnrJitter { delta_db: f64 },
    BandReject { low_hz: f64, high_hz: f64 },
    Highpass { cutoff_hz: f64 },
    Lowpass { cutoff_hz: f64 },
    Clipping { threshold: f64 },
    AmplitudeScale { gain: f64 },
    WhiteNoise { snr_db: f64 },
    StereoToMono,
}

impl Applied {
    pub fn name(&self) -> &'static str {
        match self {
            Applied::SnrJitter { .. } => "snr_jitter",
            Applied::BandReject { .. } => "band_reject",
            Applied::Highpass { .. } => "highpass",
            Applied::Lowpass { .. } => "lowpass",
            Applied::Clipping { .. } => "clipping",
            Applied::AmplitudeScale { .. } => "amplitude_scale",
            Applied::WhiteNoise { .. } => "white_noise",
            Applied::StereoToMono => "stereo_to_mono",
        }
    }
}

/// Target and optional background, kept apart so SNR jitter can rescale the
/// background alone.
#[derive(Debug, Clone, PartialEq)]
pub struct AugInput {
    pub target: MultiChannel,
    pub background: Option<MultiChannel>,
}

impl From<AudioBuffer> for AugInput {
    fn from(a: AudioBuffer) -> Self {
        Self { target: MultiChannel::mono(&a), background: None }
    }
}

impl From<MultiChannel> for AugInput {
    fn from(m: MultiChannel) -> Self {
        Self { target: m, background: None }
    }
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub audio: AudioBuffer,
    pub applied: Vec<Applied>,
    /// Gain the SNR jitter put on the background (1 when it did not fire).
    pub background_gain: f64,
}

/// Sums two buffers, broadcasting a mono one across the other's channels.
pub fn mix_channels(a: &MultiChannel, b: &MultiChannel) -> Result<MultiChannel> {
    if a.len() != b.len() {
        return Err(SadError::InvalidInput(format!("cannot mix {} and {} samples", a.len(), b.len())));
    }
    let k = a.channel_count().max(b.channel_count());
    let pick = |m: &MultiChannel, c: usize| {
        if m.channel_count() == 1 {
            0
        } else {
            c
        }
    };
    if a.channel_count() != b.channel_count() && a.channel_count() != 1 && b.channel_count() != 1 {
        return Err(SadError::InvalidInput("incompatible channel counts".into()));
    }
    let channels = (0..k)
        .map(|c| {
            a.channels()[pick(a, c)].iter().zip(&b.channels()[pick(b, c)]).map(|(x, y)| x + y).collect()
        })
        .collect();
    MultiChannel::new(channels)
}

fn map_channels(m: &mut MultiChannel, mut f: impl FnMut(&mut Vec<f64>)) {
    for c in m.channels_mut() {
        f(c);
    }
}

fn filter(m: &mut MultiChannel, spec: &BiquadSpec) -> Result<()> {
    let design = FilterDesign::new(spec, SAMPLE_RATE_HZ as f64)?;
    map_channels(m, |c| *c = design.apply(c));
    Ok(())
}

/// Runs the chain in its fixed order: SNR jitter, band rejection, high-pass,
/// low-pass, clipping, amplitude scaling, white noise, stereo to mono. Each
/// method fires independently with its probability. Multichannel input left
/// unfolded keeps its first channel.
pub fn apply_augmentations(
    input: impl Into<AugInput>,
    cfg: &AugmentationConfig,
    rng: &mut impl Rng,
) -> Result<Augmented> {
    cfg.validate()?;
    let input = input.into();
    let mut applied = Vec::new();
    let mut background_gain = 1.0;
    let cap = MAX_CUTOFF_FRACTION_OF_NYQUIST * SAMPLE_RATE_HZ as f64 / 2.0;

    if rng.random_bool(cfg.snr_jitter.probability) {
        let delta_db = cfg.snr_jitter.draw(rng);
        if input.background.as_ref().is_some_and(|b| b.power() > 0.0) {
            background_gain = 10f64.powf(-delta_db / 20.0);
            applied.push(Applied::SnrJitter { delta_db });
        }
    }
    let mut x = match &input.background {
        Some(b) => {
            let mut b = b.clone();
            map_channels(&mut b, |c| c.iter_mut().for_each(|v| *v *= background_gain));
            mix_channels(&input.target, &b)?
        }
        None => input.target.clone(),
    };

    if rng.random_bool(cfg.band_reject.probability) {
        let m = cfg.band_reject;
        let low_hz = rng.random_range(m.low..=m.high / cfg.band_reject_min_ratio);
        let high_hz = rng.random_range(low_hz * cfg.band_reject_min_ratio..=m.high).min(cap);
        filter(&mut x, &BiquadSpec::bandreject(low_hz, high_hz))?;
        applied.push(Applied::BandReject { low_hz, high_hz });
    }
    if rng.random_bool(cfg.highpass.probability) {
        let cutoff_hz = cfg.highpass.draw(rng).min(cap);
        filter(&mut x, &BiquadSpec::highpass(cutoff_hz))?;
        applied.push(Applied::Highpass { cutoff_hz });
    }
    if rng.random_bool(cfg.lowpass.probability) {
        let cutoff_hz = cfg.lowpass.draw(rng).min(cap);
        filter(&mut x, &BiquadSpec::lowpass(cutoff_hz))?;
        applied.push(Applied::Lowpass { cutoff_hz });
    }
    if rng.random_bool(cfg.clipping.probability) {
        let threshold = cfg.clipping.draw(rng) * x.peak();
        if threshold > 0.0 {
            map_channels(&mut x, |c| c.iter_mut().for_each(|v| *v = v.clamp(-threshold, threshold)));
            applied.push(Applied::Clipping { threshold });
        }
    }
    if rng.random_bool(cfg.amplitude_scale.probability) {
        let gain = cfg.amplitude_scale.draw(rng);
        map_channels(&mut x, |c| c.iter_mut().for_each(|v| *v *= gain));
        applied.push(Applied::AmplitudeScale { gain });
    }
    if rng.random_bool(cfg.white_noise.probability) {
        let snr_db = cfg.white_noise.draw(rng);
        let p = x.power();
        if p > 0.0 {
            let sigma = (p / 10f64.powf(snr_db / 10.0)).sqrt();
            map_channels(&mut x, |c| {
                c.iter_mut().for_each(|v| *v += sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            });
            applied.push(Applied::WhiteNoise { snr_db });
        }
    }
    let audio = if rng.random_bool(cfg.stereo_to_mono) {
        if x.channel_count() > 1 {
            applied.push(Applied::StereoToMono);
        }
        x.fold_to_mono()
    } else {
        AudioBuffer::from_samples(x.channels()[0].clone())
    };
    Ok(Augmented { audio, applied, background_gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone(n: usize, f: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / 16_000.0).sin() * 0.5).collect()
    }

    #[test]
    fn disabled_chain_is_identity() {
        let a = AudioBuffer::from_samples(tone(4000, 440.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = apply_augmentations(a.clone(), &AugmentationConfig::disabled(), &mut rng).unwrap();
        assert_eq!(out.audio, a);
        assert!(out.applied.is_empty());
    }

    #[test]
    fn stereo_input_comes_out_mono_with_defaults() {
        let stereo = MultiChannel::new(vec![tone(4000, 440.0), tone(4000, 660.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = apply_augmentations(stereo, &AugmentationConfig::default(), &mut rng).unwrap();
        assert_eq!(out.audio.len(), 4000);
        assert!(out.applied.contains(&Applied::StereoToMono));
    }

    #[test]
    fn jitter_rescales_only_the_background() {
        let cfg = AugmentationConfig {
            snr_jitter: Method::new(1.0, 6.0, 6.0),
            ..AugmentationConfig::disabled()
        };
        let target = MultiChannel::new(vec![tone(1000, 300.0)]).unwrap();
        let background = MultiChannel::new(vec![tone(1000, 2000.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = apply_augmentations(
            AugInput { target: target.clone(), background: Some(background.clone()) },
            &cfg,
            &mut rng,
        )
        .unwrap();
        let g = 10f64.powf(-6.0 / 20.0);
        assert!((out.background_gain - g).abs() < 1e-15);
        for i in 0..1000 {
            let want = target.channels()[0][i] + g * background.channels()[0][i];
            assert!((out.audio.samples()[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn silent_input_passes_through_noise_and_clipping() {
        let cfg = AugmentationConfig {
            clipping: Method::new(1.0, 0.3, 0.9),
            white_noise: Method::new(1.0, 20.0, 40.0),
            ..AugmentationConfig::disabled()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = apply_augmentations(AudioBuffer::zeros(500), &cfg, &mut rng).unwrap();
        assert!(out.audio.samples().iter().all(|&v| v == 0.0));
        assert!(out.applied.is_empty());
    }

    #[test]
    fn clipping_bounds_the_peak() {
        let cfg = AugmentationConfig { clipping: Method::new(1.0, 0.3, 0.9), ..AugmentationConfig::disabled() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = apply_augmentations(AudioBuffer::from_samples(tone(2000, 440.0)), &cfg, &mut rng).unwrap();
        let Applied::Clipping { threshold } = out.applied[0] else { panic!() };
        assert!((0.15..=0.45).contains(&threshold));
        assert!(out.audio.peak() <= threshold + 1e-15);
    }

    #[test]
    fn invalid_probability_is_rejected() {
        let cfg = AugmentationConfig { clipping: Method::new(1.5, 0.3, 0.9), ..AugmentationConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
