use crate::dense::{self, DenseTensor};
use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::tt::{TtTensor, DEFAULT_FULL_LIMIT};

/// Sparse tensor: listed entries, zero elsewhere. Repeated indices add up.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    shape: Vec<usize>,
    indices: Vec<Vec<usize>>,
    values: Vec<C64>,
}

impl SparseTensor {
    pub fn new(shape: Vec<usize>, indices: Vec<Vec<usize>>, values: Vec<C64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for idx in &indices {
            if idx.len() != shape.len() || idx.iter().zip(&shape).any(|(&i, &n)| i >= n) {
                return Err(Error::IndexOutOfRange {
                    index: idx.clone(),
                    shape: shape.clone(),
                });
            }
        }
        Ok(Self {
            shape,
            indices,
            values,
        })
    }

    /// All nonzero entries of a dense tensor.
    pub fn from_dense(a: &DenseTensor) -> Self {
        let (indices, values) = a
            .data()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != ZERO)
            .map(|(lin, v)| (dense::multi_index(a.shape(), lin), *v))
            .unzip();
        Self {
            shape: a.shape().to_vec(),
            indices,
            values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], &C64)> {
        self.indices.iter().map(|v| v.as_slice()).zip(&self.values)
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let entries = self.shape.iter().fold(1usize, |a, &n| a.saturating_mul(n));
        if entries > DEFAULT_FULL_LIMIT {
            return Err(Error::SizeGuard {
                entries,
                limit: DEFAULT_FULL_LIMIT,
            });
        }
        let mut out = DenseTensor::zeros(&self.shape);
        for (idx, v) in self.iter() {
            out.data_mut()[dense::linear_index(&self.shape, idx)] += v;
        }
        Ok(out)
    }
}

/// A vector of the ambient space `C^{n_1 x ... x n_d}` in one of three
/// storage forms.
#[derive(Debug, Clone)]
pub enum Ambient {
    Dense(DenseTensor),
    Tt(TtTensor),
    Sparse(SparseTensor),
}

impl Ambient {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            Ambient::Dense(a) => a.shape().to_vec(),
            Ambient::Tt(x) => x.shape(),
            Ambient::Sparse(s) => s.shape().to_vec(),
        }
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        match self {
            Ambient::Dense(a) => Ok(a.clone()),
            Ambient::Tt(x) => x.full(),
            Ambient::Sparse(s) => s.to_dense(),
        }
    }
}
