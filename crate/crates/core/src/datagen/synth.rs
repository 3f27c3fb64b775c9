use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::biquad::Biquad;
use crate::dsp::AudioBuffer;
use crate::{Result, SadError, SAMPLE_RATE_HZ};

/// Peak amplitude of every generated signal.
pub const SYNTH_PEAK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    SpeechLike,
    SingingLike,
    InstrumentalLike,
    NoiseLike,
}

impl SignalKind {
    pub const ALL: [SignalKind; 4] =
        [SignalKind::SpeechLike, SignalKind::SingingLike, SignalKind::InstrumentalLike, SignalKind::NoiseLike];
}

/// Generator output plus the control tracks it was built from.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub audio: AudioBuffer,
    /// Fundamental per sample in Hz; 0 where no pitched source sounds.
    pub f0_hz: Vec<f64>,
    /// Sample ranges of syllables (speech) or steady note bodies (singing).
    pub segments: Vec<(usize, usize)>,
}

pub fn synth_signal(kind: SignalKind, duration_s: f64, rng: &mut impl Rng) -> Result<AudioBuffer> {
    Ok(synthesize(kind, duration_s, rng)?.audio)
}

pub fn synthesize(kind: SignalKind, duration_s: f64, rng: &mut impl Rng) -> Result<Synthesized> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(SadError::InvalidInput(format!("duration {duration_s} s must be positive")));
    }
    let n = ((duration_s * SAMPLE_RATE_HZ as f64).round() as usize).max(1);
    let mut out = match kind {
        SignalKind::SpeechLike => speech_like(n, rng),
        SignalKind::SingingLike => singing_like(n, rng),
        SignalKind::InstrumentalLike => instrumental_like(n, rng),
        SignalKind::NoiseLike => noise_like(n, rng),
    };
    let peak = out.audio.peak();
    if peak > 0.0 {
        out.audio = out.audio.scaled(SYNTH_PEAK / peak);
    }
    Ok(out)
}

const FS: f64 = SAMPLE_RATE_HZ as f64;

fn secs(n: f64) -> usize {
    (n * FS).round() as usize
}

fn semis(ratio_semitones: f64) -> f64 {
    2f64.powf(ratio_semitones / 12.0)
}

/// Harmonic amplitude for a vowel-like spectral envelope.
fn formant_gain(freq: f64, f1: f64, f2: f64) -> f64 {
    let g1 = (-((freq - f1) / 160.0).powi(2)).exp();
    let g2 = 0.7 * (-((freq - f2) / 240.0).powi(2)).exp();
    g1 + g2 + 0.04
}

/// Sum of harmonics below 4 kHz at phase `phase` of the fundamental.
fn harmonic_sample(phase: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let k_max = ((4000.0 / f0).floor() as usize).max(1);
    (1..=k_max).map(|k| formant_gain(k as f64 * f0, f1, f2) * (k as f64 * phase).sin() / (k as f64).sqrt()).sum()
}

/// Raised-cosine edges of `ramp` samples at both ends of a segment.
fn edge_envelope(i: usize, start: usize, end: usize, ramp: usize) -> f64 {
    let from_start = i - start;
    let to_end = end - i;
    let r = ramp.min((end - start) / 2).max(1);
    let edge = |d: usize| if d >= r { 1.0 } else { 0.5 - 0.5 * (PI * d as f64 / r as f64).cos() };
    edge(from_start).min(edge(to_end))
}

fn speech_like(n: usize, rng: &mut impl Rng) -> Synthesized {
    let base_f0 = rng.random_range(100.0..220.0);
    let rate = rng.random_range(4.0..8.0);
    let knot_step = FS / rate;
    let n_knots = (n as f64 / knot_step).ceil() as usize + 2;
    let knots: Vec<f64> = (0..n_knots).map(|_| rng.random_range(-4.0..4.0)).collect();

    let mut syllables = Vec::new();
    let mut t = secs(rng.random_range(0.0..0.15));
    while t < n {
        let len = secs(rng.random_range(0.08..0.28));
        let end = (t + len).min(n);
        syllables.push((t, end, rng.random_range(300.0..850.0), rng.random_range(900.0..2400.0)));
        let gap = if rng.random_bool(0.15) { rng.random_range(0.35..0.8) } else { rng.random_range(0.04..0.2) };
        t = end + secs(gap);
    }

    let mut samples = vec![0.0; n];
    let mut f0_hz = vec![0.0; n];
    let mut phase = 0.0;
    let mut s = 0;
    for (i, (sample, f0_out)) in samples.iter_mut().zip(f0_hz.iter_mut()).enumerate() {
        let pos = i as f64 / knot_step;
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        let w = 0.5 - 0.5 * (PI * frac).cos();
        let f0 = base_f0 * semis(knots[k] * (1.0 - w) + knots[k + 1] * w);
        phase = (phase + 2.0 * PI * f0 / FS) % (2.0 * PI);
        while s < syllables.len() && syllables[s].1 <= i {
            s += 1;
        }
        if let Some(&(start, end, f1, f2)) = syllables.get(s) {
            if i >= start {
                *f0_out = f0;
                *sample = edge_envelope(i, start, end, secs(0.015)) * harmonic_sample(phase, f0, f1, f2);
            }
        }
    }
    Synthesized {
        audio: AudioBuffer::from_samples(samples),
        f0_hz,
        segments: syllables.iter().map(|s| (s.0, s.1)).collect(),
    }
}

const MAJOR_SCALE: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];

fn scale_note(rng: &mut impl Rng) -> f64 {
    let octave = rng.random_range(-1..=0);
    (MAJOR_SCALE[rng.random_range(0..7)] + 12 * octave) as f64
}

fn singing_like(n: usize, rng: &mut impl Rng) -> Synthesized {
    let base_f0 = rng.random_range(180.0..400.0);
    let vib_rate = rng.random_range(4.5..6.5);
    let vib_depth = rng.random_range(0.2..0.5);
    let glide = secs(0.04);

    let mut notes = Vec::new();
    let mut t = 0;
    while t < n {
        let end = (t + secs(rng.random_range(0.5..2.0))).min(n);
        notes.push((t, end, scale_note(rng), rng.random_range(500.0..800.0), rng.random_range(900.0..1500.0)));
        t = end;
    }

    let swell_rate = rng.random_range(0.2..0.5);
    let mut samples = vec![0.0; n];
    let mut f0_hz = vec![0.0; n];
    let mut phase = 0.0;
    let mut prev_note = notes[0].2;
    let mut idx = 0;
    for i in 0..n {
        if i >= notes[idx].1 {
            prev_note = notes[idx].2;
            idx += 1;
        }
        let (start, end, note, f1, f2) = notes[idx];
        let into = i - start;
        let pitch = if idx > 0 && into < glide {
            prev_note + (note - prev_note) * into as f64 / glide as f64
        } else {
            note
        };
        let vib = vib_depth * (2.0 * PI * vib_rate * i as f64 / FS).sin();
        let f0 = base_f0 * semis(pitch + vib);
        phase = (phase + 2.0 * PI * f0 / FS) % (2.0 * PI);
        let dip = 1.0 - 0.15 * (1.0 - edge_envelope(i, start, end, secs(0.03)));
        let swell = 0.85 + 0.15 * (2.0 * PI * swell_rate * i as f64 / FS).sin();
        f0_hz[i] = f0;
        samples[i] = dip * swell * harmonic_sample(phase, f0, f1, f2);
    }
    Synthesized {
        audio: AudioBuffer::from_samples(samples),
        f0_hz,
        segments: notes
            .iter()
            .enumerate()
            .map(|(k, nt)| (if k == 0 { nt.0 } else { (nt.0 + glide).min(nt.1) }, nt.1))
            .collect(),
    }
}

const CHORD_SHAPES: [&[i32]; 4] = [&[0, 4, 7], &[0, 3, 7], &[0, 4, 7, 11], &[0, 3, 7, 10, 12]];

fn instrumental_like(n: usize, rng: &mut impl Rng) -> Synthesized {
    let mut chords = Vec::new();
    let mut t = 0;
    while t < n {
        let end = (t + secs(rng.random_range(1.5..3.0))).min(n);
        let root = 110.0 * semis(rng.random_range(-5..7) as f64);
        let shape = CHORD_SHAPES[rng.random_range(0..CHORD_SHAPES.len())];
        let freqs: Vec<f64> = shape.iter().map(|&s| root * semis(s as f64)).collect();
        chords.push((t, end, freqs));
        t = end;
    }
    let mut lp = Biquad::lowpass(rng.random_range(800.0..2500.0), crate::dsp::biquad::BUTTERWORTH_Q, FS);
    let mut samples = vec![0.0; n];
    let mut c = 0;
    for (i, sample) in samples.iter_mut().enumerate() {
        if i >= chords[c].1 {
            c += 1;
        }
        let (start, end, freqs) = &chords[c];
        let env = edge_envelope(i, *start, *end, secs(0.02));
        let time = i as f64 / FS;
        let tones: f64 = freqs
            .iter()
            .map(|f| (2.0 * PI * f * time).sin() + 0.3 * (4.0 * PI * f * time).sin())
            .sum::<f64>()
            / freqs.len() as f64;
        let white: f64 = StandardNormal.sample(rng);
        *sample = env * tones + 0.3 * lp.process(white);
    }
    Synthesized { audio: AudioBuffer::from_samples(samples), f0_hz: vec![0.0; n], segments: Vec::new() }
}

fn noise_like(n: usize, rng: &mut impl Rng) -> Synthesized {
    let am_rate = rng.random_range(0.1..0.5);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let mut b = [0.0f64; 7];
    let mut samples = vec![0.0; n];
    for (i, sample) in samples.iter_mut().enumerate() {
        let w: f64 = StandardNormal.sample(rng);
        // Paul Kellet's pink-noise filter.
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        let pink = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
        b[6] = w * 0.115926;
        let am = 1.0 + 0.5 * (2.0 * PI * am_rate * i as f64 / FS + am_phase).sin();
        *sample = am * pink;
    }
    Synthesized { audio: AudioBuffer::from_samples(samples), f0_hz: vec![0.0; n], segments: Vec::new() }
}
