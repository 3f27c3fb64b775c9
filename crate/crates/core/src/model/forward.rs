use num_traits::Float;

use super::params::{BiGruBlock, Conv1d, GruDirection, GruLayerParams, Linear, NetworkParams};
use crate::dsp::MelSpectrogram;
use crate::matrix::{affine_rows, matvec_into, sigmoid, Matrix};
use crate::{Result, SadError};

/// One recurrent update:
/// r = σ(W_r x + b_wr + U_r h + b_ur), z = σ(W_z x + b_wz + U_z h + b_uz),
/// n = tanh(W_n x + b_wn + r ⊙ (U_n h + b_un)), h' = (1 − z) ⊙ n + z ⊙ h.
pub fn gru_cell_step<F: Float>(x: &[F], h_prev: &[F], dir: &GruDirection<F>) -> Result<Vec<F>> {
    let h = dir.hidden_dim();
    if x.len() != dir.input_dim() || h_prev.len() != h {
        return Err(SadError::InvalidShape(format!(
            "gru step got x[{}], h[{}] for input {} hidden {h}",
            x.len(),
            h_prev.len(),
            dir.input_dim()
        )));
    }
    let mut gi = vec![F::zero(); 3 * h];
    let mut gh = vec![F::zero(); 3 * h];
    matvec_into(&dir.w_ih, x, &dir.b_ih, &mut gi);
    matvec_into(&dir.w_hh, h_prev, &dir.b_hh, &mut gh);
    Ok((0..h)
        .map(|j| {
            let r = sigmoid(gi[j] + gh[j]);
            let z = sigmoid(gi[h + j] + gh[h + j]);
            let n = (gi[2 * h + j] + r * gh[2 * h + j]).tanh();
            (F::one() - z) * n + z * h_prev[j]
        })
        .collect())
}

/// Cached activations of one scan direction, indexed in scan order.
#[derive(Debug, Clone)]
pub struct DirTrace<F = f64> {
    /// Input rows in scan order.
    pub x: Matrix<F>,
    pub r: Matrix<F>,
    pub z: Matrix<F>,
    pub n: Matrix<F>,
    /// U_n h + b_un before gating by r.
    pub ghn: Matrix<F>,
    /// Hidden states h_0 (zeros) through h_T, T+1 rows.
    pub h: Matrix<F>,
}

#[derive(Debug, Clone)]
pub struct LayerTrace<F = f64> {
    pub fwd: DirTrace<F>,
    /// Trace of the backward direction, which scans the time-reversed input.
    pub bwd: DirTrace<F>,
}

#[derive(Debug, Clone)]
pub struct BlockTrace<F = f64> {
    pub layers: Vec<LayerTrace<F>>,
}

fn gru_scan<F: Float>(dir: &GruDirection<F>, x: &Matrix<F>, keep: bool) -> (Matrix<F>, Option<DirTrace<F>>) {
    let t_len = x.rows();
    let h = dir.hidden_dim();
    let gi = affine_rows(x, &dir.w_ih, &dir.b_ih);
    let mut hs = Matrix::zeros(t_len + 1, h);
    let (mut r_m, mut z_m, mut n_m, mut ghn_m) = if keep {
        (Matrix::zeros(t_len, h), Matrix::zeros(t_len, h), Matrix::zeros(t_len, h), Matrix::zeros(t_len, h))
    } else {
        (Matrix::zeros(0, 0), Matrix::zeros(0, 0), Matrix::zeros(0, 0), Matrix::zeros(0, 0))
    };
    let mut gh = vec![F::zero(); 3 * h];
    let mut next = vec![F::zero(); h];
    for t in 0..t_len {
        let prev = hs.row(t);
        matvec_into(&dir.w_hh, prev, &dir.b_hh, &mut gh);
        let g = gi.row(t);
        for j in 0..h {
            let r = sigmoid(g[j] + gh[j]);
            let z = sigmoid(g[h + j] + gh[h + j]);
            let n = (g[2 * h + j] + r * gh[2 * h + j]).tanh();
            next[j] = (F::one() - z) * n + z * prev[j];
            if keep {
                r_m.set(t, j, r);
                z_m.set(t, j, z);
                n_m.set(t, j, n);
                ghn_m.set(t, j, gh[2 * h + j]);
            }
        }
        hs.row_mut(t + 1).copy_from_slice(&next);
    }
    let out = Matrix::from_vec(t_len, h, hs.as_slice()[h..].to_vec());
    let trace = keep.then(|| DirTrace { x: x.clone(), r: r_m, z: z_m, n: n_m, ghn: ghn_m, h: hs });
    (out, trace)
}

fn bigru_layer<F: Float>(layer: &GruLayerParams<F>, x: &Matrix<F>, keep: bool) -> (Matrix<F>, Option<LayerTrace<F>>) {
    let (fwd, ft) = gru_scan(&layer.forward, x, keep);
    let (bwd_rev, bt) = gru_scan(&layer.backward, &x.reversed_rows(), keep);
    let out = Matrix::hcat(&[&fwd, &bwd_rev.reversed_rows()]);
    (out, ft.zip(bt).map(|(fwd, bwd)| LayerTrace { fwd, bwd }))
}

fn block_forward<F: Float>(block: &BiGruBlock<F>, x: &Matrix<F>, keep: bool) -> (Matrix<F>, Option<BlockTrace<F>>) {
    let mut cur = x.clone();
    let mut traces = Vec::new();
    for layer in &block.layers {
        let (next, tr) = bigru_layer(layer, &cur, keep);
        traces.extend(tr);
        cur = next;
    }
    (cur, keep.then_some(BlockTrace { layers: traces }))
}

/// Runs a stack of bidirectional layers over a frames × features sequence.
/// Returns frames × (2·hidden).
pub fn bigru_forward<F: Float>(x: &Matrix<F>, block: &BiGruBlock<F>) -> Result<Matrix<F>> {
    if x.rows() == 0 {
        return Err(SadError::InvalidShape("empty sequence".into()));
    }
    let expect = block.layers.first().map_or(0, GruLayerParams::input_dim);
    if x.cols() != expect {
        return Err(SadError::InvalidShape(format!("block expects {expect} features, got {}", x.cols())));
    }
    Ok(block_forward(block, x, false).0)
}

fn linear<F: Float>(lin: &Linear<F>, x: &Matrix<F>) -> Matrix<F> {
    affine_rows(x, &lin.w, &lin.b)
}

/// Strided convolution along time with symmetric zero padding.
pub(crate) fn conv_down<F: Float>(conv: &Conv1d<F>, x: &Matrix<F>) -> Matrix<F> {
    let s = conv.spec;
    let (pad, stride, k) = (s.padding() as isize, s.stride as isize, s.kernel_size);
    let t_out = s.down_len(x.rows());
    let mut y = Matrix::zeros(t_out, s.channels);
    for t in 0..t_out {
        let yr = y.row_mut(t);
        yr.copy_from_slice(&conv.b);
        for j in 0..k {
            let src = t as isize * stride + j as isize - pad;
            if src < 0 || src >= x.rows() as isize {
                continue;
            }
            let xr = x.row(src as usize);
            for (o, out) in yr.iter_mut().enumerate() {
                let mut acc = F::zero();
                for (i, &xv) in xr.iter().enumerate() {
                    acc = acc + conv.w[conv.weight_index(o, i, j)] * xv;
                }
                *out = *out + acc;
            }
        }
    }
    y
}

/// Transposed convolution producing exactly `t_out` frames: input frame `t`
/// scattered through tap `j` lands on output frame `t·stride + j − padding`.
pub(crate) fn conv_up<F: Float>(conv: &Conv1d<F>, x: &Matrix<F>, t_out: usize) -> Result<Matrix<F>> {
    let s = conv.spec;
    let natural = (x.rows() as isize - 1) * s.stride as isize - 2 * s.padding() as isize + s.kernel_size as isize;
    if (t_out as isize) < natural || (t_out as isize) >= natural + s.stride as isize {
        return Err(SadError::InvalidShape(format!(
            "transposed conv cannot map {} frames to {t_out}",
            x.rows()
        )));
    }
    let (pad, stride) = (s.padding() as isize, s.stride as isize);
    let mut y = Matrix::zeros(t_out, s.channels);
    for t in 0..t_out {
        y.row_mut(t).copy_from_slice(&conv.b);
    }
    for t in 0..x.rows() {
        let xr = x.row(t);
        for j in 0..s.kernel_size {
            let dst = t as isize * stride + j as isize - pad;
            if dst < 0 || dst >= t_out as isize {
                continue;
            }
            let yr = y.row_mut(dst as usize);
            for (o, out) in yr.iter_mut().enumerate() {
                let mut acc = F::zero();
                for (i, &xv) in xr.iter().enumerate() {
                    acc = acc + conv.w[conv.weight_index(o, i, j)] * xv;
                }
                *out = *out + acc;
            }
        }
    }
    Ok(y)
}

/// Every intermediate of one forward pass, kept for reverse-mode gradients.
#[derive(Debug, Clone)]
pub struct NetTrace<F = f64> {
    /// Frame counts entering each down layer, then the reduced count.
    pub lengths: Vec<usize>,
    pub down_inputs: Vec<Matrix<F>>,
    /// Features at the recurrent rate (the input itself for the full-rate model).
    pub body_in: Matrix<F>,
    pub f0: Matrix<F>,
    pub g1: Matrix<F>,
    pub g2: Matrix<F>,
    pub block1: BlockTrace<F>,
    pub block2: BlockTrace<F>,
    pub block3: BlockTrace<F>,
    pub up_inputs: Vec<Matrix<F>>,
    pub head_in: Matrix<F>,
    pub hidden: Matrix<F>,
    pub probs: Vec<F>,
}

impl<F: Float> NetworkParams<F> {
    fn check_input(&self, x: &Matrix<F>) -> Result<()> {
        if x.cols() != self.config.body.c {
            return Err(SadError::IncompatibleWeights(format!(
                "model expects {} mel bands, input has {}",
                self.config.body.c,
                x.cols()
            )));
        }
        let need = self.config.min_frames();
        if x.rows() < need || x.rows() == 0 {
            return Err(SadError::InputTooShort { frames: x.rows(), required: need.max(1) });
        }
        Ok(())
    }

    fn run(&self, x: &Matrix<F>, keep: bool) -> Result<(Vec<F>, Option<NetTrace<F>>)> {
        self.check_input(x)?;
        let mut lengths = vec![x.rows()];
        let mut down_inputs = Vec::new();
        let mut d = x.clone();
        for conv in &self.down {
            let next = conv_down(conv, &d);
            lengths.push(next.rows());
            if keep {
                down_inputs.push(d);
            }
            d = next;
        }
        let f0 = linear(&self.front, &d).map(|v| v.tanh());
        let (g1, b1) = block_forward(&self.gru1, &f0, keep);
        let cat2 = Matrix::hcat(&[&f0, &g1, &d]);
        let (g2, b2) = block_forward(&self.gru2, &cat2, keep);
        let cat3 = Matrix::hcat(&[&g1, &g2, &d]);
        let (g3, b3) = block_forward(&self.gru3, &cat3, keep);

        let mut up_inputs = Vec::new();
        let mut u = g3;
        let n_down = self.down.len();
        for (i, conv) in self.up.iter().enumerate() {
            let target = lengths[n_down - 1 - i];
            let next = conv_up(conv, &u, target)?;
            if keep {
                up_inputs.push(u);
            }
            u = next;
        }
        let hidden = linear(&self.head_hidden, &u).map(|v| v.tanh());
        let logits = linear(&self.head_out, &hidden);
        let probs: Vec<F> = logits.as_slice().iter().map(|&v| sigmoid(v)).collect();

        let trace = if keep {
            Some(NetTrace {
                lengths,
                down_inputs,
                body_in: d,
                f0,
                g1,
                g2,
                block1: b1.expect("trace"),
                block2: b2.expect("trace"),
                block3: b3.expect("trace"),
                up_inputs,
                head_in: u,
                hidden,
                probs: probs.clone(),
            })
        } else {
            None
        };
        Ok((probs, trace))
    }

    /// Speech probability per frame for a frames × mels input.
    pub fn forward(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        Ok(self.run(x, false)?.0)
    }

    /// Forward pass that keeps every intermediate.
    pub fn forward_traced(&self, x: &Matrix<F>) -> Result<NetTrace<F>> {
        Ok(self.run(x, true)?.1.expect("trace requested"))
    }

    pub fn predict(&self, mel: &MelSpectrogram) -> Result<Vec<f64>> {
        let x: Matrix<F> = mel.to_time_major().cast();
        Ok(self.forward(&x)?.into_iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{ConvSpec, ModelConfig};
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_weight_cell_steps() {
        let dir = GruDirection::<f64>::zeros(3, 4);
        let h0 = gru_cell_step(&[1.0, -2.0, 0.5], &[0.0; 4], &dir).unwrap();
        assert_eq!(h0, vec![0.0; 4]);
        let h = [0.2, -0.4, 0.6, 0.9];
        let h1 = gru_cell_step(&[1.0, -2.0, 0.5], &h, &dir).unwrap();
        for (a, b) in h1.iter().zip(&h) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        assert!(matches!(gru_cell_step(&[1.0], &h, &dir), Err(SadError::InvalidShape(_))));
    }

    #[test]
    fn single_frame_block_is_two_independent_steps() {
        let mut r = rng(1);
        let p = NetworkParams::init_random(&ModelConfig::srsad(8), &mut r);
        let layer = &p.gru1.layers[0];
        let x = random_matrix(1, layer.input_dim(), &mut r);
        let block = BiGruBlock { layers: vec![layer.clone()] };
        let out = bigru_forward(&x, &block).unwrap();
        let h = layer.hidden_dim();
        let f = gru_cell_step(x.row(0), &vec![0.0; h], &layer.forward).unwrap();
        let b = gru_cell_step(x.row(0), &vec![0.0; h], &layer.backward).unwrap();
        assert_eq!(out.row(0), [f, b].concat().as_slice());
    }

    #[test]
    fn reversing_time_and_swapping_directions_mirrors_the_output() {
        let mut r = rng(2);
        let p = NetworkParams::init_random(&ModelConfig::srsad(8), &mut r);
        let block = p.gru2.clone();
        let swapped = BiGruBlock {
            layers: block
                .layers
                .iter()
                .map(|l| GruLayerParams { forward: l.backward.clone(), backward: l.forward.clone() })
                .collect(),
        };
        // Swapping directions also swaps the two output halves that feed
        // layer 2, so only a single layer mirrors exactly.
        let one = BiGruBlock { layers: vec![block.layers[0].clone()] };
        let one_swapped = BiGruBlock { layers: vec![swapped.layers[0].clone()] };
        let x = random_matrix(7, one.layers[0].input_dim(), &mut r);
        let y = bigru_forward(&x, &one).unwrap();
        let y_rev = bigru_forward(&x.reversed_rows(), &one_swapped).unwrap().reversed_rows();
        let h = one.layers[0].hidden_dim();
        let halves = y_rev.hsplit(&[h, h]);
        let swapped_back = Matrix::hcat(&[&halves[1], &halves[0]]);
        for (a, b) in y.as_slice().iter().zip(swapped_back.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_block_outputs_zero() {
        let block = BiGruBlock::<f64>::zeros(5, 3, 2);
        let x = random_matrix(6, 5, &mut rng(3));
        assert!(bigru_forward(&x, &block).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_network_predicts_one_half() {
        for cfg in [ModelConfig::srsad(8), ModelConfig::srsad_lc(8)] {
            let p = NetworkParams::<f64>::zeros(&cfg);
            let x = random_matrix(9, 8, &mut rng(4));
            assert!(p.forward(&x).unwrap().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn default_sized_lengths() {
        let mut r = rng(5);
        let p = NetworkParams::init_random(&ModelConfig::srsad_lc(80), &mut r);
        let x = random_matrix(126, 80, &mut r);
        let tr = p.forward_traced(&x).unwrap();
        assert_eq!(tr.lengths, vec![126, 63, 32]);
        assert_eq!(tr.g1.rows(), 32);
        assert_eq!(tr.probs.len(), 126);
    }

    #[test]
    fn lc_output_length_matches_input_for_every_t() {
        let mut r = rng(6);
        let p = NetworkParams::init_random(&ModelConfig::srsad_lc(8), &mut r);
        for t in 4..40 {
            let x = random_matrix(t, 8, &mut r);
            assert_eq!(p.forward(&x).unwrap().len(), t);
        }
        let err = p.forward(&random_matrix(3, 8, &mut r)).unwrap_err();
        assert!(matches!(err, SadError::InputTooShort { frames: 3, required: 4 }));
    }

    #[test]
    fn identity_resampling_reduces_lc_to_single_layer_srsad() {
        let c = 8;
        let mut r = rng(7);
        let mut full = ModelConfig::srsad(c);
        full.body.gru_layers_per_block = 1;
        let base = NetworkParams::init_random(&full, &mut r);

        let mut lc_cfg = ModelConfig::srsad_lc(c);
        let ident = |ch| ConvSpec { kernel_size: 1, stride: 1, channels: ch };
        lc_cfg.resample = Some(crate::model::config::LcResampleConfig {
            down_layers: vec![ident(c)],
            up_layers: vec![ident(2 * lc_cfg.body.gru3_hidden)],
        });
        let mut lc = NetworkParams::<f64>::zeros(&lc_cfg);
        lc.front = base.front.clone();
        lc.gru1 = base.gru1.clone();
        lc.gru2 = base.gru2.clone();
        lc.gru3 = base.gru3.clone();
        lc.head_hidden = base.head_hidden.clone();
        lc.head_out = base.head_out.clone();
        for conv in lc.down.iter_mut().chain(lc.up.iter_mut()) {
            for i in 0..conv.in_channels {
                let idx = conv.weight_index(i, i, 0);
                conv.w[idx] = 1.0;
            }
        }
        let x = random_matrix(11, c, &mut r);
        let a = base.forward(&x).unwrap();
        let b = lc.forward(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_forward_tracks_f64() {
        let mut r = rng(8);
        let p = NetworkParams::init_random(&ModelConfig::srsad(8), &mut r);
        let x = random_matrix(10, 8, &mut r);
        let a = p.forward(&x).unwrap();
        let b = p.cast::<f32>().forward(&x.cast::<f32>()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - *v as f64).abs() < 1e-4);
        }
    }
}
