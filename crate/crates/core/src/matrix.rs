//! Minimal row-major dense matrix used by the networks.
//!
//! Sequences are stored time-major: one row per frame, one column per feature.

use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F = f64> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn hcat(parts: &[&Matrix<F>]) -> Self {
        let rows = parts.first().map_or(0, |m| m.rows);
        assert!(parts.iter().all(|m| m.rows == rows), "hcat row mismatch");
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(r));
            }
        }
        Self { rows, cols, data }
    }

    /// Splits columns into consecutive blocks of the given widths.
    pub fn hsplit(&self, widths: &[usize]) -> Vec<Matrix<F>> {
        assert_eq!(widths.iter().sum::<usize>(), self.cols, "hsplit widths");
        let mut out: Vec<Matrix<F>> = widths.iter().map(|&w| Matrix::zeros(self.rows, w)).collect();
        for r in 0..self.rows {
            let mut off = 0;
            for (m, &w) in out.iter_mut().zip(widths) {
                m.row_mut(r).copy_from_slice(&self.row(r)[off..off + w]);
                off += w;
            }
        }
        out
    }

    /// Rows in reverse order.
    pub fn reversed_rows(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for r in (0..self.rows).rev() {
            data.extend_from_slice(self.row(r));
        }
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_assign(&mut self, other: &Matrix<F>) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn cast<G: Float>(&self) -> Matrix<G> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| G::from(v).expect("float cast")).collect(),
        }
    }
}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y = x · Wᵀ + b` for every row of `x`; `w` is out×in.
pub fn affine_rows<F: Float>(x: &Matrix<F>, w: &Matrix<F>, b: &[F]) -> Matrix<F> {
    assert_eq!(x.cols(), w.cols(), "affine input width");
    assert_eq!(w.rows(), b.len(), "affine bias length");
    let mut y = Matrix::zeros(x.rows(), w.rows());
    for t in 0..x.rows() {
        let xr = x.row(t);
        let yr = y.row_mut(t);
        for (o, out) in yr.iter_mut().enumerate() {
            *out = dot(w.row(o), xr) + b[o];
        }
    }
    y
}

/// `y = W · x + b` for a single vector.
#[inline]
pub fn matvec_into<F: Float>(w: &Matrix<F>, x: &[F], b: &[F], y: &mut [F]) {
    for (o, out) in y.iter_mut().enumerate() {
        *out = dot(w.row(o), x) + b[o];
    }
}

#[inline]
pub fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hcat_then_hsplit_restores_blocks() {
        let a = Matrix::from_fn(3, 2, |r, c| (r * 10 + c) as f64);
        let b = Matrix::from_fn(3, 1, |r, _| -(r as f64));
        let cat = Matrix::hcat(&[&a, &b]);
        assert_eq!(cat.row(1), &[10.0, 11.0, -1.0]);
        let parts = cat.hsplit(&[2, 1]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn affine_matches_hand_computation() {
        let x = Matrix::from_vec(1, 2, vec![1.0, 2.0]);
        let w = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.5, -1.0]);
        let y = affine_rows(&x, &w, &[0.25, 1.0]);
        assert_eq!(y.as_slice(), &[1.25, -0.5]);
    }
}
