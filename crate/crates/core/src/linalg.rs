//! Direct solvers for the structured systems produced by the schemes.

use crate::error::{Error, Result};

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i - 1]` in row `i` (`lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i + 1]` (`upper[n - 1]` is ignored). No pivoting:
/// intended for diagonally dominant rows or columns.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "tridiagonal bands must all have length {n}"
        )));
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    thomas_in_place(lower, diag, upper, rhs, &mut c, &mut x)?;
    Ok(x)
}

/// Allocation-free Thomas sweep; `scratch` and `out` must have the system size.
pub fn thomas_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Singular { row: 0 });
    }
    scratch[0] = upper[0] / pivot;
    out[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * scratch[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular { row: i });
        }
        scratch[i] = upper[i] / pivot;
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
    Ok(())
}

/// 2x2 block, row-major `[a, b; c, d]`.
pub type Block = [f64; 4];

fn block_inv(m: &Block, row: usize) -> Result<Block> {
    let det = m[0] * m[3] - m[1] * m[2];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular { row });
    }
    Ok([m[3] / det, -m[1] / det, -m[2] / det, m[0] / det])
}

fn block_mul(a: &Block, b: &Block) -> Block {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn block_vec(a: &Block, v: [f64; 2]) -> [f64; 2] {
    [a[0] * v[0] + a[1] * v[1], a[2] * v[0] + a[3] * v[1]]
}

/// Block-tridiagonal solve with 2x2 blocks (block Thomas algorithm).
pub fn block_thomas_solve(
    lower: &[Block],
    diag: &[Block],
    upper: &[Block],
    rhs: &[[f64; 2]],
) -> Result<Vec<[f64; 2]>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![[0.0; 4]; n];
    let mut y = vec![[0.0; 2]; n];
    let inv = block_inv(&diag[0], 0)?;
    c[0] = block_mul(&inv, &upper[0]);
    y[0] = block_vec(&inv, rhs[0]);
    for i in 1..n {
        let lc = block_mul(&lower[i], &c[i - 1]);
        let m = [
            diag[i][0] - lc[0],
            diag[i][1] - lc[1],
            diag[i][2] - lc[2],
            diag[i][3] - lc[3],
        ];
        let inv = block_inv(&m, i)?;
        c[i] = block_mul(&inv, &upper[i]);
        let ly = block_vec(&lower[i], y[i - 1]);
        y[i] = block_vec(&inv, [rhs[i][0] - ly[0], rhs[i][1] - ly[1]]);
    }
    for i in (0..n - 1).rev() {
        let cy = block_vec(&c[i], y[i + 1]);
        y[i] = [y[i][0] - cy[0], y[i][1] - cy[1]];
    }
    Ok(y)
}

/// Square banded matrix with equal lower and upper bandwidth, factored in
/// place by Gaussian elimination without pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    /// Row `i` stores columns `i - bw ..= i + bw`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.bw < i || j > i + self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Solves `A x = b`, destroying the stored matrix.
    pub fn solve_in_place(&mut self, b: &mut [f64]) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * width + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { row: k });
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let sik = i * width + (k + bw - i);
                let factor = self.data[sik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[sik] = 0.0;
                let row_k = k * width;
                let row_i = i * width;
                for j in k + 1..=last {
                    self.data[row_i + (j + bw - i)] -= factor * self.data[row_k + (j + bw - k)];
                }
                b[i] -= factor * b[k];
            }
        }
        for k in (0..n).rev() {
            let row = k * width;
            let last = (k + bw).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=last {
                acc -= self.data[row + (j + bw - k)] * b[j];
            }
            b[k] = acc / self.data[row + bw];
        }
        Ok(())
    }
}
