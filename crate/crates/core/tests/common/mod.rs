#![allow(dead_code)]

use rand::Rng;
use srsad_core::model::{
    BiGruBlock, Conv1d, ConvSpec, GruDirection, LcResampleConfig, Linear, ModelConfig, NetworkParams, SrSadConfig,
};

/// Plain-loop forward pass that counts every multiply-accumulate it performs.
/// Gate products, biases and activations are not counted.
#[derive(Default)]
pub struct Oracle {
    pub macs: u64,
}

type Seq = Vec<Vec<f64>>;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Oracle {
    fn dot(&mut self, w: &[f64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, b) in w.iter().zip(x) {
            acc += a * b;
            self.macs += 1;
        }
        acc
    }

    fn linear(&mut self, l: &Linear, xs: &Seq) -> Seq {
        xs.iter()
            .map(|x| (0..l.w.rows()).map(|o| self.dot(l.w.row(o), x) + l.b[o]).collect())
            .collect()
    }

    fn scan(&mut self, d: &GruDirection, xs: &[Vec<f64>]) -> Seq {
        let h = d.w_hh.cols();
        let mut state = vec![0.0; h];
        let mut out = Vec::new();
        for x in xs {
            let gi: Vec<f64> = (0..3 * h).map(|k| self.dot(d.w_ih.row(k), x) + d.b_ih[k]).collect();
            let gh: Vec<f64> = (0..3 * h).map(|k| self.dot(d.w_hh.row(k), &state) + d.b_hh[k]).collect();
            state = (0..h)
                .map(|j| {
                    let r = sig(gi[j] + gh[j]);
                    let z = sig(gi[h + j] + gh[h + j]);
                    let n = (gi[2 * h + j] + r * gh[2 * h + j]).tanh();
                    (1.0 - z) * n + z * state[j]
                })
                .collect();
            out.push(state.clone());
        }
        out
    }

    fn block(&mut self, b: &BiGruBlock, xs: &Seq) -> Seq {
        let mut cur = xs.clone();
        for layer in &b.layers {
            let f = self.scan(&layer.forward, &cur);
            let rev: Seq = cur.iter().rev().cloned().collect();
            let mut bw = self.scan(&layer.backward, &rev);
            bw.reverse();
            cur = f.into_iter().zip(bw).map(|(a, b)| [a, b].concat()).collect();
        }
        cur
    }

    fn conv_down(&mut self, c: &Conv1d, xs: &Seq) -> Seq {
        let s = c.spec;
        let pad = s.padding() as isize;
        let t_out = (xs.len() + 2 * s.padding() - s.kernel_size) / s.stride + 1;
        (0..t_out)
            .map(|t| {
                (0..s.channels)
                    .map(|o| {
                        let mut acc = c.b[o];
                        for j in 0..s.kernel_size {
                            let src = (t * s.stride + j) as isize - pad;
                            if src < 0 || src as usize >= xs.len() {
                                continue;
                            }
                            for i in 0..c.in_channels {
                                acc += c.w[c.weight_index(o, i, j)] * xs[src as usize][i];
                                self.macs += 1;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// Transposed convolution written as a gather over the output frames.
    fn conv_up(&mut self, c: &Conv1d, xs: &Seq, t_out: usize) -> Seq {
        let s = c.spec;
        let pad = s.padding() as isize;
        (0..t_out)
            .map(|dst| {
                (0..s.channels)
                    .map(|o| {
                        let mut acc = c.b[o];
                        for (t, x) in xs.iter().enumerate() {
                            for j in 0..s.kernel_size {
                                if (t * s.stride + j) as isize - pad != dst as isize {
                                    continue;
                                }
                                for i in 0..c.in_channels {
                                    acc += c.w[c.weight_index(o, i, j)] * x[i];
                                    self.macs += 1;
                                }
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    pub fn forward(&mut self, p: &NetworkParams, xs: &Seq) -> Vec<f64> {
        let mut lengths = vec![xs.len()];
        let mut d = xs.clone();
        for c in &p.down {
            d = self.conv_down(c, &d);
            lengths.push(d.len());
        }
        let f0: Seq = self.linear(&p.front, &d).into_iter().map(|r| r.into_iter().map(f64::tanh).collect()).collect();
        let g1 = self.block(&p.gru1, &f0);
        let cat2: Seq = (0..d.len()).map(|t| [f0[t].clone(), g1[t].clone(), d[t].clone()].concat()).collect();
        let g2 = self.block(&p.gru2, &cat2);
        let cat3: Seq = (0..d.len()).map(|t| [g1[t].clone(), g2[t].clone(), d[t].clone()].concat()).collect();
        let mut u = self.block(&p.gru3, &cat3);
        let n = p.down.len();
        for (i, c) in p.up.iter().enumerate() {
            u = self.conv_up(c, &u, lengths[n - 1 - i]);
        }
        let hidden: Seq = self.linear(&p.head_hidden, &u).into_iter().map(|r| r.into_iter().map(f64::tanh).collect()).collect();
        self.linear(&p.head_out, &hidden).into_iter().map(|r| sig(r[0])).collect()
    }
}

pub fn rows(x: &srsad_core::matrix::Matrix) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|t| x.row(t).to_vec()).collect()
}

/// A valid configuration with arbitrary layer sizes.
pub fn random_config(rng: &mut impl Rng, lc: bool) -> ModelConfig {
    let c = rng.random_range(2..=12);
    let body = SrSadConfig {
        c,
        front_linear_out: rng.random_range(1..=8),
        gru1_hidden: rng.random_range(1..=6),
        gru2_hidden: rng.random_range(1..=6),
        gru3_hidden: rng.random_range(1..=6),
        gru_layers_per_block: rng.random_range(1..=2),
        head_hidden: rng.random_range(1..=6),
    };
    if !lc {
        return ModelConfig { architecture: srsad_core::model::Architecture::SrSad, body, resample: None };
    }
    let n_layers = rng.random_range(1..=2);
    let kernels: Vec<(usize, usize)> = (0..n_layers)
        .map(|_| {
            let k = 2 * rng.random_range(0..=3) + 1;
            (k, rng.random_range(1..=k.min(3)))
        })
        .collect();
    let down_layers: Vec<ConvSpec> = kernels
        .iter()
        .enumerate()
        .map(|(i, &(kernel_size, stride))| ConvSpec {
            kernel_size,
            stride,
            channels: if i + 1 == n_layers { c } else { rng.random_range(1..=8) },
        })
        .collect();
    let up_layers = kernels
        .iter()
        .rev()
        .map(|&(kernel_size, stride)| ConvSpec { kernel_size, stride, channels: rng.random_range(1..=8) })
        .collect();
    let cfg = ModelConfig {
        architecture: srsad_core::model::Architecture::SrSadLc,
        body,
        resample: Some(LcResampleConfig { down_layers, up_layers }),
    };
    cfg.validate().expect("generated config is valid");
    cfg
}
