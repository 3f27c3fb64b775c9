use num_traits::Float;
use rand::Rng;

use super::config::{ConvSpec, ModelConfig};
use crate::matrix::Matrix;

/// Fully connected layer, `w` is out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F = f64> {
    pub w: Matrix<F>,
    pub b: Vec<F>,
}

impl<F: Float> Linear<F> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Matrix::zeros(output, input), b: vec![F::zero(); output] }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }
}

/// One scan direction of a GRU layer. Gate blocks are stacked in the order
/// reset, update, candidate: `w_ih` is 3h×in, `w_hh` is 3h×h.
#[derive(Debug, Clone, PartialEq)]
pub struct GruDirection<F = f64> {
    pub w_ih: Matrix<F>,
    pub w_hh: Matrix<F>,
    pub b_ih: Vec<F>,
    pub b_hh: Vec<F>,
}

impl<F: Float> GruDirection<F> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Matrix::zeros(3 * hidden, input),
            w_hh: Matrix::zeros(3 * hidden, hidden),
            b_ih: vec![F::zero(); 3 * hidden],
            b_hh: vec![F::zero(); 3 * hidden],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }
}

/// Bidirectional GRU layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams<F = f64> {
    pub forward: GruDirection<F>,
    pub backward: GruDirection<F>,
}

impl<F: Float> GruLayerParams<F> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { forward: GruDirection::zeros(input, hidden), backward: GruDirection::zeros(input, hidden) }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim()
    }
}

/// Stack of bidirectional layers; layer k+1 consumes layer k's 2h output.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGruBlock<F = f64> {
    pub layers: Vec<GruLayerParams<F>>,
}

impl<F: Float> BiGruBlock<F> {
    pub fn zeros(input: usize, hidden: usize, layers: usize) -> Self {
        let layers = (0..layers).map(|i| GruLayerParams::zeros(if i == 0 { input } else { 2 * hidden }, hidden)).collect();
        Self { layers }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().map_or(0, GruLayerParams::hidden_dim)
    }
}

/// 1-D convolution along time. `w` holds c_out×c_in×k values row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<F = f64> {
    pub spec: ConvSpec,
    pub in_channels: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Float> Conv1d<F> {
    pub fn zeros(in_channels: usize, spec: ConvSpec) -> Self {
        Self {
            spec,
            in_channels,
            w: vec![F::zero(); spec.channels * in_channels * spec.kernel_size],
            b: vec![F::zero(); spec.channels],
        }
    }

    #[inline]
    pub fn weight_index(&self, out: usize, inp: usize, tap: usize) -> usize {
        (out * self.in_channels + inp) * self.spec.kernel_size + tap
    }
}

/// Typed parameters of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<F = f64> {
    pub config: ModelConfig,
    pub down: Vec<Conv1d<F>>,
    pub front: Linear<F>,
    pub gru1: BiGruBlock<F>,
    pub gru2: BiGruBlock<F>,
    pub gru3: BiGruBlock<F>,
    pub up: Vec<Conv1d<F>>,
    pub head_hidden: Linear<F>,
    pub head_out: Linear<F>,
}

/// Name and shape of one parameter tensor, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<F: Float> NetworkParams<F> {
    /// Parameters of the right shapes, all zero. Panics on an invalid config;
    /// call [`ModelConfig::validate`] first.
    pub fn zeros(config: &ModelConfig) -> Self {
        config.validate().expect("valid model config");
        let b = &config.body;
        let down = match &config.resample {
            Some(r) => {
                let mut ch = b.c;
                r.down_layers
                    .iter()
                    .map(|s| {
                        let layer = Conv1d::zeros(ch, *s);
                        ch = s.channels;
                        layer
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        let up = match &config.resample {
            Some(r) => {
                let mut ch = b.body_output();
                r.up_layers
                    .iter()
                    .map(|s| {
                        let layer = Conv1d::zeros(ch, *s);
                        ch = s.channels;
                        layer
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        let layers = b.gru_layers_per_block;
        Self {
            config: config.clone(),
            down,
            front: Linear::zeros(b.c, b.front_linear_out),
            gru1: BiGruBlock::zeros(b.gru1_input(), b.gru1_hidden, layers),
            gru2: BiGruBlock::zeros(b.gru2_input(), b.gru2_hidden, layers),
            gru3: BiGruBlock::zeros(b.gru3_input(), b.gru3_hidden, layers),
            up,
            head_hidden: Linear::zeros(config.head_input(), b.head_hidden),
            head_out: Linear::zeros(b.head_hidden, 1),
        }
    }

    /// Canonical tensor names and shapes; the order of [`Self::slices`].
    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>| out.push(TensorSpec { name, shape });
        for (i, c) in self.down.iter().enumerate() {
            push(format!("down{i}.weight"), vec![c.spec.channels, c.in_channels, c.spec.kernel_size]);
            push(format!("down{i}.bias"), vec![c.spec.channels]);
        }
        push("front.weight".into(), vec![self.front.output_dim(), self.front.input_dim()]);
        push("front.bias".into(), vec![self.front.output_dim()]);
        for (bname, block) in [("gru1", &self.gru1), ("gru2", &self.gru2), ("gru3", &self.gru3)] {
            for (l, layer) in block.layers.iter().enumerate() {
                for (dname, d) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                    let p = format!("{bname}.l{l}.{dname}");
                    push(format!("{p}.w_ih"), vec![d.w_ih.rows(), d.w_ih.cols()]);
                    push(format!("{p}.w_hh"), vec![d.w_hh.rows(), d.w_hh.cols()]);
                    push(format!("{p}.b_ih"), vec![d.b_ih.len()]);
                    push(format!("{p}.b_hh"), vec![d.b_hh.len()]);
                }
            }
        }
        for (i, c) in self.up.iter().enumerate() {
            push(format!("up{i}.weight"), vec![c.spec.channels, c.in_channels, c.spec.kernel_size]);
            push(format!("up{i}.bias"), vec![c.spec.channels]);
        }
        push("head.hidden.weight".into(), vec![self.head_hidden.output_dim(), self.head_hidden.input_dim()]);
        push("head.hidden.bias".into(), vec![self.head_hidden.output_dim()]);
        push("head.out.weight".into(), vec![1, self.head_out.input_dim()]);
        push("head.out.bias".into(), vec![1]);
        out
    }

    /// Every parameter tensor as a flat slice, in canonical order.
    pub fn slices(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        for c in &self.down {
            out.push(&c.w);
            out.push(&c.b);
        }
        out.push(self.front.w.as_slice());
        out.push(&self.front.b);
        for block in [&self.gru1, &self.gru2, &self.gru3] {
            for layer in &block.layers {
                for d in [&layer.forward, &layer.backward] {
                    out.push(d.w_ih.as_slice());
                    out.push(d.w_hh.as_slice());
                    out.push(&d.b_ih);
                    out.push(&d.b_hh);
                }
            }
        }
        for c in &self.up {
            out.push(&c.w);
            out.push(&c.b);
        }
        out.push(self.head_hidden.w.as_slice());
        out.push(&self.head_hidden.b);
        out.push(self.head_out.w.as_slice());
        out.push(&self.head_out.b);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        for c in &mut self.down {
            out.push(&mut c.w);
            out.push(&mut c.b);
        }
        out.push(self.front.w.as_mut_slice());
        out.push(&mut self.front.b);
        for block in [&mut self.gru1, &mut self.gru2, &mut self.gru3] {
            for layer in &mut block.layers {
                for d in [&mut layer.forward, &mut layer.backward] {
                    out.push(d.w_ih.as_mut_slice());
                    out.push(d.w_hh.as_mut_slice());
                    out.push(&mut d.b_ih);
                    out.push(&mut d.b_hh);
                }
            }
        }
        for c in &mut self.up {
            out.push(&mut c.w);
            out.push(&mut c.b);
        }
        out.push(self.head_hidden.w.as_mut_slice());
        out.push(&mut self.head_hidden.b);
        out.push(self.head_out.w.as_mut_slice());
        out.push(&mut self.head_out.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn flatten(&self) -> Vec<F> {
        self.slices().concat()
    }

    /// Overwrites every parameter from a flat vector in canonical order.
    pub fn assign_flat(&mut self, flat: &[F]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut off = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        }
    }

    pub fn cast<G: Float>(&self) -> NetworkParams<G> {
        let mut out = NetworkParams::<G>::zeros(&self.config);
        let flat: Vec<G> = self.flatten().into_iter().map(|v| G::from(v).expect("float cast")).collect();
        out.assign_flat(&flat);
        out
    }
}

impl NetworkParams<f64> {
    /// Uniform(-k, k) initialization: k = 1/sqrt(hidden) for recurrent
    /// layers, 1/sqrt(fan_in) for linear and convolution layers.
    pub fn init_random(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(config);
        let fill = |s: &mut [f64], k: f64, rng: &mut dyn rand::RngCore| {
            for v in s {
                *v = rng.random_range(-k..=k);
            }
        };
        for c in &mut p.down {
            let k = 1.0 / ((c.in_channels * c.spec.kernel_size) as f64).sqrt();
            fill(&mut c.w, k, rng);
            fill(&mut c.b, k, rng);
        }
        for lin in [&mut p.front] {
            let k = 1.0 / (lin.input_dim() as f64).sqrt();
            fill(lin.w.as_mut_slice(), k, rng);
            fill(&mut lin.b, k, rng);
        }
        for block in [&mut p.gru1, &mut p.gru2, &mut p.gru3] {
            for layer in &mut block.layers {
                for d in [&mut layer.forward, &mut layer.backward] {
                    let k = 1.0 / (d.hidden_dim() as f64).sqrt();
                    fill(d.w_ih.as_mut_slice(), k, rng);
                    fill(d.w_hh.as_mut_slice(), k, rng);
                    fill(&mut d.b_ih, k, rng);
                    fill(&mut d.b_hh, k, rng);
                }
            }
        }
        for c in &mut p.up {
            let k = 1.0 / ((c.in_channels * c.spec.kernel_size) as f64).sqrt();
            fill(&mut c.w, k, rng);
            fill(&mut c.b, k, rng);
        }
        for lin in [&mut p.head_hidden, &mut p.head_out] {
            let k = 1.0 / (lin.input_dim() as f64).sqrt();
            fill(lin.w.as_mut_slice(), k, rng);
            fill(&mut lin.b, k, rng);
        }
        p
    }
}
