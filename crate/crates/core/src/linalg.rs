//! Dense row-major matrices and LU factorization with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, fma};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `P A = L U` with unit lower `L`; `perm[i]` is the row of `A` moved to row `i`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: Matrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.data.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
        let tiny = scale * f64::EPSILON * n as f64;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, fabs(lu[(i, k)])))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > tiny) {
                return Err(Error::SingularSystem);
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] * inv;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= factor * u;
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solve `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        // U^T y = b
        for i in 0..n {
            y[i] /= self.lu[(i, i)];
            let yi = y[i];
            for j in i + 1..n {
                y[j] -= self.lu[(i, j)] * yi;
            }
        }
        // L^T w = y
        for i in (0..n).rev() {
            let wi = y[i];
            for j in 0..i {
                y[j] -= self.lu[(i, j)] * wi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Solve `A^T x = b` to roughly twice the working precision: iterative
    /// refinement with compensated residuals, returning `x` as `(hi, lo)`
    /// pairs. `a` must be the matrix that was factored.
    pub fn solve_transpose_extended(&self, a: &Matrix, b: &[f64], rounds: usize) -> Vec<(f64, f64)> {
        let n = self.n;
        let mut x: Vec<(f64, f64)> = self.solve_transpose(b).into_iter().map(|v| (v, 0.0)).collect();
        let mut terms = Vec::with_capacity(2 * n + 1);
        for _ in 0..rounds {
            let r: Vec<f64> = (0..n)
                .map(|i| {
                    terms.clear();
                    terms.push((b[i], 1.0));
                    for (k, &(hi, lo)) in x.iter().enumerate() {
                        terms.push((-a[(k, i)], hi));
                        terms.push((-a[(k, i)], lo));
                    }
                    dot2(&terms)
                })
                .collect();
            for (xi, d) in x.iter_mut().zip(self.solve_transpose(&r)) {
                let (s, e) = two_sum(xi.0, d);
                *xi = fast_two_sum(s, e + xi.1);
            }
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// `sum a_k b_k` as if computed in twice the working precision.
fn dot2(pairs: &[(f64, f64)]) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for &(a, b) in pairs {
        let p = a * b;
        let pe = fma(a, b, -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + pe;
        sum = t;
    }
    sum + err
}
