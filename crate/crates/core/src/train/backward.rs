//! Reverse-mode gradients through both network graphs.

use super::loss::bce_loss;
use crate::matrix::Matrix;
use crate::model::forward::{BlockTrace, DirTrace, NetTrace};
use crate::model::params::{BiGruBlock, Conv1d, GruDirection, Linear, NetworkParams};
use crate::{Result, SadError};

/// Accumulates gradients of an affine map `y = x Wᵀ + b` into `gw`, `gb`
/// and returns dx.
fn affine_backward(w: &Matrix, gw: &mut Matrix, gb: &mut [f64], x: &Matrix, dy: &Matrix) -> Matrix {
    let (out_dim, in_dim) = w.shape();
    let mut dx = Matrix::zeros(x.rows(), in_dim);
    for t in 0..x.rows() {
        let xr = x.row(t);
        let dyr = dy.row(t);
        for o in 0..out_dim {
            let g = dyr[o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            for (gv, &xv) in gw.row_mut(o).iter_mut().zip(xr) {
                *gv += g * xv;
            }
            for (d, &wv) in dx.row_mut(t).iter_mut().zip(w.row(o)) {
                *d += g * wv;
            }
        }
    }
    dx
}

fn linear_backward(lin: &Linear, grad: &mut Linear, x: &Matrix, dy: &Matrix) -> Matrix {
    affine_backward(&lin.w, &mut grad.w, &mut grad.b, x, dy)
}

/// Multiplies an upstream gradient by tanh' given tanh outputs.
fn tanh_backward(y: &Matrix, dy: &Matrix) -> Matrix {
    let mut d = dy.clone();
    for (g, &v) in d.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *g *= 1.0 - v * v;
    }
    d
}

fn dir_backward(dir: &GruDirection, grad: &mut GruDirection, tr: &DirTrace, dy: &Matrix) -> Matrix {
    let t_len = dy.rows();
    let h = dir.hidden_dim();
    let mut dgi = Matrix::zeros(t_len, 3 * h);
    let mut dh_next = vec![0.0; h];
    let mut dgh = vec![0.0; 3 * h];
    for t in (0..t_len).rev() {
        let hprev = tr.h.row(t);
        let (r, z, n, ghn) = (tr.r.row(t), tr.z.row(t), tr.n.row(t), tr.ghn.row(t));
        let dyr = dy.row(t);
        let mut dh_prev = vec![0.0; h];
        {
            let gi_row = dgi.row_mut(t);
            for j in 0..h {
                let dh = dyr[j] + dh_next[j];
                let dn = dh * (1.0 - z[j]);
                let dz = dh * (hprev[j] - n[j]);
                dh_prev[j] = dh * z[j];
                let dan = dn * (1.0 - n[j] * n[j]);
                let dar = dan * ghn[j] * r[j] * (1.0 - r[j]);
                let daz = dz * z[j] * (1.0 - z[j]);
                gi_row[j] = dar;
                gi_row[h + j] = daz;
                gi_row[2 * h + j] = dan;
                dgh[j] = dar;
                dgh[h + j] = daz;
                dgh[2 * h + j] = dan * r[j];
            }
        }
        for (k, &g) in dgh.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b_hh[k] += g;
            for (w, &hv) in grad.w_hh.row_mut(k).iter_mut().zip(hprev) {
                *w += g * hv;
            }
            for (d, &wv) in dh_prev.iter_mut().zip(dir.w_hh.row(k)) {
                *d += g * wv;
            }
        }
        dh_next = dh_prev;
    }
    let dx = affine_backward(&dir.w_ih, &mut grad.w_ih, &mut grad.b_ih, &tr.x, &dgi);
    dx
}

fn block_backward(block: &BiGruBlock, grad: &mut BiGruBlock, tr: &BlockTrace, dy: &Matrix) -> Matrix {
    let mut d = dy.clone();
    for ((layer, g), lt) in block.layers.iter().zip(grad.layers.iter_mut()).zip(&tr.layers).rev() {
        let h = layer.hidden_dim();
        let halves = d.hsplit(&[h, h]);
        let dx_f = dir_backward(&layer.forward, &mut g.forward, &lt.fwd, &halves[0]);
        let dx_b = dir_backward(&layer.backward, &mut g.backward, &lt.bwd, &halves[1].reversed_rows()).reversed_rows();
        let mut dx = dx_f;
        dx.add_assign(&dx_b);
        d = dx;
    }
    d
}

fn conv_down_backward(conv: &Conv1d, grad: &mut Conv1d, x: &Matrix, dy: &Matrix) -> Matrix {
    let s = conv.spec;
    let (pad, stride) = (s.padding() as isize, s.stride as isize);
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    for t in 0..dy.rows() {
        let dyr = dy.row(t);
        for (o, &g) in dyr.iter().enumerate() {
            grad.b[o] += g;
        }
        for j in 0..s.kernel_size {
            let src = t as isize * stride + j as isize - pad;
            if src < 0 || src >= x.rows() as isize {
                continue;
            }
            let src = src as usize;
            for (o, &g) in dyr.iter().enumerate() {
                for i in 0..conv.in_channels {
                    let idx = conv.weight_index(o, i, j);
                    grad.w[idx] += g * x.get(src, i);
                    let cur = dx.get(src, i);
                    dx.set(src, i, cur + g * conv.w[idx]);
                }
            }
        }
    }
    dx
}

fn conv_up_backward(conv: &Conv1d, grad: &mut Conv1d, x: &Matrix, dy: &Matrix) -> Matrix {
    let s = conv.spec;
    let (pad, stride) = (s.padding() as isize, s.stride as isize);
    for t in 0..dy.rows() {
        for (o, &g) in dy.row(t).iter().enumerate() {
            grad.b[o] += g;
        }
    }
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    for t in 0..x.rows() {
        for j in 0..s.kernel_size {
            let dst = t as isize * stride + j as isize - pad;
            if dst < 0 || dst >= dy.rows() as isize {
                continue;
            }
            let dyr = dy.row(dst as usize);
            for (o, &g) in dyr.iter().enumerate() {
                for i in 0..conv.in_channels {
                    let idx = conv.weight_index(o, i, j);
                    grad.w[idx] += g * x.get(t, i);
                    let cur = dx.get(t, i);
                    dx.set(t, i, cur + g * conv.w[idx]);
                }
            }
        }
    }
    dx
}

/// Gradients of all parameters given d(loss)/d(logit) per frame.
/// Also returns the gradient with respect to the input features.
pub fn backward_from_logits(params: &NetworkParams, tr: &NetTrace, dlogits: &[f64]) -> (NetworkParams, Matrix) {
    let mut g = NetworkParams::zeros(&params.config);
    let dlog = Matrix::from_vec(dlogits.len(), 1, dlogits.to_vec());
    let dhidden = linear_backward(&params.head_out, &mut g.head_out, &tr.hidden, &dlog);
    let dpre = tanh_backward(&tr.hidden, &dhidden);
    let mut du = linear_backward(&params.head_hidden, &mut g.head_hidden, &tr.head_in, &dpre);
    for i in (0..params.up.len()).rev() {
        du = conv_up_backward(&params.up[i], &mut g.up[i], &tr.up_inputs[i], &du);
    }
    let b = &params.config.body;
    let dcat3 = block_backward(&params.gru3, &mut g.gru3, &tr.block3, &du);
    let p3 = dcat3.hsplit(&[2 * b.gru1_hidden, 2 * b.gru2_hidden, b.c]);
    let dcat2 = block_backward(&params.gru2, &mut g.gru2, &tr.block2, &p3[1]);
    let p2 = dcat2.hsplit(&[b.front_linear_out, 2 * b.gru1_hidden, b.c]);
    let mut dg1 = p3[0].clone();
    dg1.add_assign(&p2[1]);
    let mut df0 = block_backward(&params.gru1, &mut g.gru1, &tr.block1, &dg1);
    df0.add_assign(&p2[0]);
    let dfront = tanh_backward(&tr.f0, &df0);
    let mut dd = linear_backward(&params.front, &mut g.front, &tr.body_in, &dfront);
    dd.add_assign(&p3[2]);
    dd.add_assign(&p2[2]);
    for i in (0..params.down.len()).rev() {
        dd = conv_down_backward(&params.down[i], &mut g.down[i], &tr.down_inputs[i], &dd);
    }
    (g, dd)
}

/// Loss and exact parameter gradients for one labelled sequence. The gradient
/// is that of the unclamped cross-entropy, `(p − y) / T` per logit; it agrees
/// with the clamped loss wherever no prediction is clamped.
pub fn backward(params: &NetworkParams, features: &Matrix, labels: &[f64]) -> Result<(f64, NetworkParams)> {
    if labels.len() != features.rows() {
        return Err(SadError::InvalidShape(format!(
            "{} labels for {} frames",
            labels.len(),
            features.rows()
        )));
    }
    let tr = params.forward_traced(features)?;
    let loss = bce_loss(&tr.probs, labels)?;
    let n = labels.len() as f64;
    let dlogits: Vec<f64> = tr.probs.iter().zip(labels).map(|(p, y)| (p - y) / n).collect();
    Ok((loss, backward_from_logits(params, &tr, &dlogits).0))
}
