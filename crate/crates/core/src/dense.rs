//! Dense d-way tensors, stored column-major (first index fastest).
//!
//! Dense tensors are the ground-truth representation used to cross-check the
//! tensor-train routines; they are only materialized at desk scale.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

/// Column-major linear offset of a multi-index.
pub fn linear_index(shape: &[usize], idx: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (&i, &n) in idx.iter().zip(shape) {
        off += i * stride;
        stride *= n;
    }
    off
}

/// Inverse of [`linear_index`].
pub fn multi_index(shape: &[usize], mut lin: usize) -> Vec<usize> {
    shape
        .iter()
        .map(|&n| {
            let i = lin % n;
            lin /= n;
            i
        })
        .collect()
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidParameter(format!("invalid shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![ZERO; len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|lin| f(&multi_index(shape, lin))).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn random<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| linalg::complex_normal(rng)).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Outer product `u_1 ∘ u_2 ∘ ... ∘ u_d`.
    pub fn outer(factors: &[Vec<C64>]) -> Self {
        let shape: Vec<usize> = factors.iter().map(Vec::len).collect();
        Self::from_fn(&shape, |idx| {
            idx.iter().zip(factors).map(|(&i, u)| u[i]).product()
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> Result<C64> {
        self.check_index(idx)?;
        Ok(self.data[linear_index(&self.shape, idx)])
    }

    pub fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.shape.len() || idx.iter().zip(&self.shape).any(|(&i, &n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: idx.to_vec(),
                shape: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    /// `<self, other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_shape(other)?;
        Ok(linalg::inner(&self.data, &other.data))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn scale(&self, a: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * a).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(linalg::real(-1.0), other)
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// The k-th unfolding: rows index the first `k` modes, columns the rest.
    pub fn unfold(&self, k: usize) -> Result<Matrix> {
        let d = self.order();
        if k == 0 || k >= d {
            return Err(Error::UnfoldIndex { k, order: d });
        }
        let rows: usize = self.shape[..k].iter().product();
        let cols: usize = self.shape[k..].iter().product();
        Ok(Matrix::from_column_slice(rows, cols, &self.data))
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, shape: &[usize], k: usize) -> Result<Self> {
        let d = shape.len();
        if k == 0 || k >= d {
            return Err(Error::UnfoldIndex { k, order: d });
        }
        let rows: usize = shape[..k].iter().product();
        let cols: usize = shape[k..].iter().product();
        if m.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} does not unfold shape {shape:?} at {k}",
                m.shape()
            )));
        }
        Self::new(shape.to_vec(), m.as_slice().to_vec())
    }

    /// Mode product along `mode` (0-based): contracts index `mode` with the
    /// columns of `m`, so that mode size becomes `m.nrows()`.
    pub fn mode_product(&self, m: &Matrix, mode: usize) -> Result<Self> {
        let d = self.order();
        if mode >= d {
            return Err(Error::DimensionMismatch(format!(
                "mode {mode} of an order-{d} tensor"
            )));
        }
        let n = self.shape[mode];
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, mode {mode} has size {n}",
                m.ncols()
            )));
        }
        let left: usize = self.shape[..mode].iter().product();
        let right: usize = self.shape[mode + 1..].iter().product();
        let out_n = m.nrows();
        let mut data = vec![ZERO; left * out_n * right];
        for b in 0..right {
            for i in 0..n {
                for j in 0..out_n {
                    let mji = m[(j, i)];
                    if mji == ZERO {
                        continue;
                    }
                    let src = &self.data[left * (i + n * b)..left * (i + n * b + 1)];
                    let dst = &mut data[left * (j + out_n * b)..left * (j + out_n * b + 1)];
                    for (o, s) in dst.iter_mut().zip(src) {
                        *o += mji * s;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = out_n;
        Ok(Self { shape, data })
    }
}
