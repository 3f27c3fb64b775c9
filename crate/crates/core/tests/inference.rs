use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srsad_core::datagen::{synth_signal, SignalKind};
use srsad_core::dsp::{AudioBuffer, StftConfig};
use srsad_core::inference::{score_file, ChunkPlan, Detector, FrameScorer};
use srsad_core::model::{ModelConfig, NetworkParams};
use srsad_core::Result;

/// A detector whose recurrent layers carry no state: recurrent weights are
/// zero and the update gate is shut, so each frame is scored on its own.
fn frame_local_detector(cfg: &ModelConfig) -> Detector {
    let mut p: NetworkParams = NetworkParams::init_random(cfg, &mut ChaCha8Rng::seed_from_u64(4));
    for block in [&mut p.gru1, &mut p.gru2, &mut p.gru3] {
        for layer in &mut block.layers {
            for dir in [&mut layer.forward, &mut layer.backward] {
                let h = dir.w_hh.cols();
                dir.w_hh.as_mut_slice().fill(0.0);
                dir.b_hh.fill(0.0);
                dir.b_ih[h..2 * h].fill(-1e3);
            }
        }
    }
    Detector::new(p).unwrap()
}

fn audio(secs: f64) -> AudioBuffer {
    synth_signal(SignalKind::SpeechLike, secs, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
}

/// Frames whose analysis window reaches across a chunk boundary.
fn straddles_boundary(t: usize, chunk: usize, n: usize) -> bool {
    let stft = StftConfig::default();
    let half = stft.n_fft / 2;
    let (lo, hi) = ((t * stft.hop_len).saturating_sub(half), t * stft.hop_len + half);
    (1..).map(|k| k * chunk).take_while(|&b| b < n).any(|b| lo < b && b < hi)
}

#[test]
fn chunking_is_transparent_for_frame_local_models() {
    let det = frame_local_detector(&ModelConfig::srsad(16));
    let x = audio(15.3);
    let plan = ChunkPlan::default();
    let chunked = score_file(&x, &det, &plan).unwrap();
    let whole = det.score_chunk(&x).unwrap();
    assert_eq!(chunked.len(), whole.len());
    assert_eq!(chunked.len(), StftConfig::default().frame_count(x.len()));
    let mut compared = 0;
    for t in 0..whole.len() {
        if straddles_boundary(t, plan.chunk_samples(), x.len()) {
            continue;
        }
        assert!((chunked[t] - whole[t]).abs() < 1e-12, "frame {t}: {} vs {}", chunked[t], whole[t]);
        compared += 1;
    }
    assert!(compared >= whole.len() - 8, "{compared} of {}", whole.len());
}

#[test]
fn stateful_models_do_see_chunk_boundaries() {
    let cfg = ModelConfig::srsad(16);
    let det = Detector::new(NetworkParams::init_random(&cfg, &mut ChaCha8Rng::seed_from_u64(4))).unwrap();
    let x = audio(6.0);
    let chunked = score_file(&x, &det, &ChunkPlan::default()).unwrap();
    let whole = det.score_chunk(&x).unwrap();
    assert!(chunked.iter().zip(&whole).any(|(a, b)| (a - b).abs() > 1e-9));
}

struct Half;

impl FrameScorer for Half {
    fn score_chunk(&self, audio: &AudioBuffer) -> Result<Vec<f64>> {
        Ok(vec![0.5; StftConfig::default().frame_count(audio.len())])
    }
}

#[test]
fn constant_model_gives_constant_scores_for_any_chunking() {
    let x = audio(7.3);
    for l in [0.05, 0.3, 1.0, 2.0, 10.0] {
        let s = score_file(&x, &Half, &ChunkPlan { chunk_len_s: l }).unwrap();
        assert_eq!(s.len(), StftConfig::default().frame_count(x.len()));
        assert!(s.iter().all(|&v| v == 0.5), "L = {l}");
    }
}

#[test]
fn output_length_follows_global_framing_for_lc() {
    let det = frame_local_detector(&ModelConfig::srsad_lc(16));
    for secs in [0.5, 2.0, 3.7, 9.99] {
        let x = audio(secs);
        assert_eq!(score_file(&x, &det, &ChunkPlan::default()).unwrap().len(), StftConfig::default().frame_count(x.len()));
    }
}
