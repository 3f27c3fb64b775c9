use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::StftConfig;
use crate::matrix::Matrix;
use crate::model::{Architecture, ConvSpec, ModelConfig, NetworkParams};
use crate::{Result, SadError, SAMPLE_RATE_HZ};

pub const MAC_CONVENTION: &str =
    "1 MAC per multiply-accumulate; biases, activations, gates' element-wise products and the mel frontend excluded; convolution taps falling in padding not counted";

pub fn linear_params(input: usize, output: usize) -> u64 {
    (input * output + output) as u64
}

pub fn gru_direction_params(input: usize, hidden: usize) -> u64 {
    3 * (input * hidden + hidden * hidden + 2 * hidden) as u64
}

pub fn conv_params(c_in: usize, spec: &ConvSpec) -> u64 {
    (spec.kernel_size * c_in * spec.channels + spec.channels) as u64
}

fn block_dims(input: usize, hidden: usize, layers: usize) -> impl Iterator<Item = usize> {
    (0..layers).map(move |l| if l == 0 { input } else { 2 * hidden })
}

/// Closed-form parameter count.
pub fn count_params(config: &ModelConfig) -> Result<u64> {
    config.validate()?;
    let b = &config.body;
    let mut total = linear_params(b.c, b.front_linear_out);
    for (input, h) in [(b.gru1_input(), b.gru1_hidden), (b.gru2_input(), b.gru2_hidden), (b.gru3_input(), b.gru3_hidden)] {
        total += block_dims(input, h, b.gru_layers_per_block).map(|i| 2 * gru_direction_params(i, h)).sum::<u64>();
    }
    if let Some(r) = &config.resample {
        let mut ch = b.c;
        for l in &r.down_layers {
            total += conv_params(ch, l);
            ch = l.channels;
        }
        let mut ch = b.body_output();
        for l in &r.up_layers {
            total += conv_params(ch, l);
            ch = l.channels;
        }
    }
    total += linear_params(config.head_input(), b.head_hidden) + linear_params(b.head_hidden, 1);
    Ok(total)
}

/// Valid (input frame, tap) pairs of a strided convolution.
fn down_taps(spec: &ConvSpec, t_in: usize) -> u64 {
    let pad = spec.padding() as isize;
    (0..spec.down_len(t_in))
        .map(|t| {
            (0..spec.kernel_size)
                .filter(|&j| {
                    let src = (t * spec.stride + j) as isize - pad;
                    src >= 0 && src < t_in as isize
                })
                .count() as u64
        })
        .sum()
}

/// Valid (input frame, tap) pairs of a transposed convolution.
fn up_taps(spec: &ConvSpec, t_in: usize, t_out: usize) -> u64 {
    let pad = spec.padding() as isize;
    (0..t_in)
        .map(|t| {
            (0..spec.kernel_size)
                .filter(|&j| {
                    let dst = (t * spec.stride + j) as isize - pad;
                    dst >= 0 && dst < t_out as isize
                })
                .count() as u64
        })
        .sum()
}

/// Multiply-accumulates of one forward pass over `frames` frames.
pub fn count_macs_frames(config: &ModelConfig, frames: usize) -> Result<u64> {
    config.validate()?;
    if frames < config.min_frames() {
        return Err(SadError::InputTooShort { frames, required: config.min_frames() });
    }
    let b = &config.body;
    let mut macs = 0u64;
    let lengths = config.resample.as_ref().map_or(vec![frames], |r| r.down_lengths(frames));
    let t_r = *lengths.last().unwrap() as u64;
    if let Some(r) = &config.resample {
        let mut ch = b.c;
        for (l, &t_in) in r.down_layers.iter().zip(&lengths) {
            macs += down_taps(l, t_in) * (ch * l.channels) as u64;
            ch = l.channels;
        }
    }
    macs += (b.c * b.front_linear_out) as u64 * t_r;
    for (input, h) in [(b.gru1_input(), b.gru1_hidden), (b.gru2_input(), b.gru2_hidden), (b.gru3_input(), b.gru3_hidden)] {
        macs += block_dims(input, h, b.gru_layers_per_block).map(|i| 2 * t_r * 3 * (i * h + h * h) as u64).sum::<u64>();
    }
    if let Some(r) = &config.resample {
        let mut ch = b.body_output();
        let n = r.up_layers.len();
        for (i, l) in r.up_layers.iter().enumerate() {
            let (t_in, t_out) = (lengths[n - i], lengths[n - 1 - i]);
            macs += up_taps(l, t_in, t_out) * (ch * l.channels) as u64;
            ch = l.channels;
        }
    }
    macs += (config.head_input() * b.head_hidden + b.head_hidden) as u64 * frames as u64;
    Ok(macs)
}

pub fn count_macs(config: &ModelConfig, chunk_len_s: f64) -> Result<u64> {
    let n = (chunk_len_s * SAMPLE_RATE_HZ as f64).round() as usize;
    count_macs_frames(config, StftConfig::default().frame_count(n))
}

/// Real-time factor of `forward`: audio seconds per wall-clock second over
/// `repetitions` calls after one warm-up call, median of three runs.
pub fn measure_rtf_with(mut forward: impl FnMut() -> Result<()>, chunk_len_s: f64, repetitions: usize) -> Result<f64> {
    if repetitions < 3 {
        return Err(SadError::InvalidConfig("RTF needs at least 3 repetitions".into()));
    }
    let mut runs = Vec::with_capacity(3);
    for _ in 0..3 {
        forward()?;
        let start = Instant::now();
        for _ in 0..repetitions {
            forward()?;
        }
        let elapsed = start.elapsed().max(Duration::from_nanos(1));
        runs.push(repetitions as f64 * chunk_len_s / elapsed.as_secs_f64());
    }
    runs.sort_by(f64::total_cmp);
    Ok(runs[1])
}

/// RTF of the network on random features for one chunk, single-threaded.
pub fn measure_rtf(params: &NetworkParams, chunk_len_s: f64, repetitions: usize) -> Result<f64> {
    let n = (chunk_len_s * SAMPLE_RATE_HZ as f64).round() as usize;
    let frames = StftConfig::default().frame_count(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Matrix::from_fn(frames, params.config.n_mels(), |_, _| rng.random_range(-10.0..0.0));
    measure_rtf_with(|| params.forward(&x).map(|_| ()), chunk_len_s, repetitions)
}

/// Values printed in the published complexity table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedComplexity {
    pub macs: f64,
    pub rtf: f64,
    pub params: f64,
}

pub fn published(architecture: Architecture) -> PublishedComplexity {
    match architecture {
        Architecture::SrSad => PublishedComplexity { macs: 82.9e6, rtf: 32.0, params: 870e3 },
        Architecture::SrSadLc => PublishedComplexity { macs: 15.6e6, rtf: 275.0, params: 335e3 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub model: String,
    pub architecture: Architecture,
    pub macs_per_chunk: u64,
    pub param_count: u64,
    pub rtf: Option<f64>,
    pub chunk_len_s: f64,
    pub mac_convention: String,
    pub hardware: String,
    pub published_reference: PublishedComplexity,
}

pub fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).map(|l| l.split(':').nth(1).unwrap_or("").trim().to_string()));
    format!("{} ({}), single thread", cpu.unwrap_or_else(|| "unknown CPU".into()), std::env::consts::ARCH)
}

/// Counts for `config`; RTF measured on random weights when `rtf_repetitions` is set.
pub fn report(name: &str, config: &ModelConfig, chunk_len_s: f64, rtf_repetitions: Option<usize>) -> Result<ComplexityReport> {
    let rtf = match rtf_repetitions {
        Some(reps) => {
            let params: NetworkParams = NetworkParams::init_random(config, &mut ChaCha8Rng::seed_from_u64(0));
            Some(measure_rtf(&params, chunk_len_s, reps)?)
        }
        None => None,
    };
    Ok(ComplexityReport {
        model: name.into(),
        architecture: config.architecture,
        macs_per_chunk: count_macs(config, chunk_len_s)?,
        param_count: count_params(config)?,
        rtf,
        chunk_len_s,
        mac_convention: MAC_CONVENTION.into(),
        hardware: hardware_note(),
        published_reference: published(config.architecture),
    })
}

fn si(v: f64) -> String {
    if v >= 1e9 {
        format!("{:.2} G", v / 1e9)
    } else if v >= 1e6 {
        format!("{:.2} M", v / 1e6)
    } else if v >= 1e3 {
        format!("{:.1} K", v / 1e3)
    } else {
        format!("{v:.0}")
    }
}

/// Plain-text table of our counts beside the published ones.
pub fn comparison_table(reports: &[ComplexityReport]) -> String {
    let mut s = format!(
        "{:<12} {:>11} {:>11} {:>9} {:>9} {:>10} {:>10}\n",
        "model", "MACs", "MACs(pub)", "RTF", "RTF(pub)", "params", "params(pub)"
    );
    for r in reports {
        let p = r.published_reference;
        s.push_str(&format!(
            "{:<12} {:>11} {:>11} {:>9} {:>9} {:>10} {:>10}\n",
            r.model,
            si(r.macs_per_chunk as f64),
            si(p.macs),
            r.rtf.map_or("-".into(), |v| format!("{v:.1}")),
            format!("{:.0}", p.rtf),
            si(r.param_count as f64),
            si(p.params),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_layer_formulas() {
        assert_eq!(linear_params(80, 40), 3240);
        assert_eq!(gru_direction_params(40, 40), 9840);
        assert_eq!(80 * 40 * 126, 403_200);
    }

    #[test]
    fn counts_equal_instantiated_tensor_sizes() {
        for name in ["default", "default-lc", "small", "small-lc", "tiny", "tiny-lc"] {
            let cfg = ModelConfig::preset(name).unwrap();
            assert_eq!(count_params(&cfg).unwrap(), NetworkParams::<f64>::zeros(&cfg).param_count() as u64, "{name}");
        }
    }

    #[test]
    fn default_sizes() {
        let sr = ModelConfig::preset("default").unwrap();
        let lc = ModelConfig::preset("default-lc").unwrap();
        let p = count_params(&sr).unwrap();
        assert!((400_000..430_000).contains(&p), "{p}");
        assert!(count_macs(&lc, 2.0).unwrap() < count_macs(&sr, 2.0).unwrap());
    }

    #[test]
    fn rtf_of_a_real_time_mock_is_one() {
        let rtf = measure_rtf_with(
            || {
                std::thread::sleep(Duration::from_millis(20));
                Ok(())
            },
            0.02,
            3,
        )
        .unwrap();
        assert!((rtf - 1.0).abs() < 0.2, "{rtf}");
        assert!(measure_rtf_with(|| Ok(()), 1.0, 2).is_err());
    }

    #[test]
    fn table_mentions_every_model() {
        let r = report("tiny", &ModelConfig::preset("tiny").unwrap(), 2.0, None).unwrap();
        let t = comparison_table(&[r]);
        assert!(t.contains("tiny") && t.contains("82.90 M"));
    }
}
