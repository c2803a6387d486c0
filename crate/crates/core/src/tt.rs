//! Tensor-train format: cores, ranks, contraction, orthogonalization,
//! TT-SVD and rounding.
//!
//! A core `U_k` has shape `r_{k-1} x n_k x r_k` and is stored column-major
//! with the left bond index fastest, so the left unfolding
//! `L(U_k) ∈ C^{(r_{k-1} n_k) x r_k}` and the right unfolding
//! `R(U_k) ∈ C^{r_{k-1} x (n_k r_k)}` are both plain reinterpretations of the
//! buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, ONE, ZERO};

/// Default guard on densification, in entries.
pub const DEFAULT_FULL_LIMIT: usize = 1 << 24;

/// Singular values below this fraction of the largest one count as zero when
/// reporting effective ranks.
pub const RANK_TOL: f64 = 1e-14;

/// TT rank vector `(r_0, r_1, ..., r_d)` with `r_0 = r_d = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TtRank(Vec<usize>);

impl TryFrom<Vec<usize>> for TtRank {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        TtRank::new(v)
    }
}

impl From<TtRank> for Vec<usize> {
    fn from(r: TtRank) -> Self {
        r.0
    }
}

impl TtRank {
    pub fn new(r: Vec<usize>) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::InvalidRank(format!(
                "need at least two entries, got {r:?}"
            )));
        }
        if r[0] != 1 || r[r.len() - 1] != 1 {
            return Err(Error::InvalidRank(format!(
                "boundary ranks must be 1, got {r:?}"
            )));
        }
        if r.contains(&0) {
            return Err(Error::InvalidRank(format!(
                "ranks must be positive, got {r:?}"
            )));
        }
        Ok(Self(r))
    }

    pub fn ones(d: usize) -> Self {
        Self(vec![1; d + 1])
    }

    /// `(1, r, ..., r, 1)` clamped to what the shape can support.
    pub fn uniform(shape: &[usize], r: usize) -> Self {
        let d = shape.len();
        let mut v = vec![r.max(1); d + 1];
        v[0] = 1;
        v[d] = 1;
        Self(v).clamped(shape)
    }

    /// Componentwise clamp to the largest feasible ranks for `shape`.
    pub fn clamped(&self, shape: &[usize]) -> Self {
        let d = shape.len();
        let mut v = self.0.clone();
        let max = max_ranks(shape);
        for k in 1..d {
            v[k] = v[k].min(max[k]);
        }
        Self(v)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn max_interior(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(1)
    }

    /// Feasibility: each interior rank bounded by the unfolding sizes and by
    /// the neighbouring bonds (`r_k ≤ r_{k-1} n_k`, `r_{k-1} ≤ n_k r_k`).
    pub fn check_feasible(&self, shape: &[usize]) -> Result<()> {
        let infeasible = || Error::InfeasibleRank {
            ranks: self.0.clone(),
            shape: shape.to_vec(),
        };
        if self.order() != shape.len() {
            return Err(infeasible());
        }
        let max = max_ranks(shape);
        for k in 0..=shape.len() {
            if self.0[k] > max[k] {
                return Err(infeasible());
            }
        }
        for k in 1..=shape.len() {
            let n = shape[k - 1];
            if self.0[k] > self.0[k - 1] * n || self.0[k - 1] > n * self.0[k] {
                return Err(infeasible());
            }
        }
        Ok(())
    }

    /// Componentwise `min(self, other)`.
    pub fn min(&self, other: &TtRank) -> TtRank {
        TtRank(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a.min(b))
                .collect(),
        )
    }

    pub fn le(&self, other: &TtRank) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

/// Largest ranks supported by `shape`: `min(prod_{j≤k} n_j, prod_{j>k} n_j)`.
pub fn max_ranks(shape: &[usize]) -> Vec<usize> {
    let d = shape.len();
    (0..=d)
        .map(|k| {
            let left = shape[..k].iter().fold(1usize, |a, &n| a.saturating_mul(n));
            let right = shape[k..].iter().fold(1usize, |a, &n| a.saturating_mul(n));
            left.min(right)
        })
        .collect()
}

/// Order-3 core of shape `r_left x n x r_right`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtCore {
    r_left: usize,
    n: usize,
    r_right: usize,
    data: Vec<C64>,
}

impl TtCore {
    pub fn new(r_left: usize, n: usize, r_right: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != r_left * n * r_right {
            return Err(Error::DimensionMismatch(format!(
                "core {r_left}x{n}x{r_right} needs {} entries, got {}",
                r_left * n * r_right,
                data.len()
            )));
        }
        Ok(Self {
            r_left,
            n,
            r_right,
            data,
        })
    }

    pub fn zeros(r_left: usize, n: usize, r_right: usize) -> Self {
        Self {
            r_left,
            n,
            r_right,
            data: vec![ZERO; r_left * n * r_right],
        }
    }

    pub fn from_fn(
        r_left: usize,
        n: usize,
        r_right: usize,
        mut f: impl FnMut(usize, usize, usize) -> C64,
    ) -> Self {
        let mut data = Vec::with_capacity(r_left * n * r_right);
        for b in 0..r_right {
            for i in 0..n {
                for a in 0..r_left {
                    data.push(f(a, i, b));
                }
            }
        }
        Self {
            r_left,
            n,
            r_right,
            data,
        }
    }

    pub fn random<R: Rng + ?Sized>(r_left: usize, n: usize, r_right: usize, rng: &mut R) -> Self {
        Self::from_fn(r_left, n, r_right, |_, _, _| linalg::complex_normal(rng))
    }

    pub fn random_real<R: Rng + ?Sized>(
        r_left: usize,
        n: usize,
        r_right: usize,
        rng: &mut R,
    ) -> Self {
        Self::from_fn(r_left, n, r_right, |_, _, _| linalg::real_normal(rng))
    }

    /// Core built from a left unfolding `(r_left n) x r_right`.
    pub fn from_left_unfolding(m: &Matrix, r_left: usize, n: usize) -> Self {
        debug_assert_eq!(m.nrows(), r_left * n);
        Self {
            r_left,
            n,
            r_right: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    /// Core built from a right unfolding `r_left x (n r_right)`.
    pub fn from_right_unfolding(m: &Matrix, n: usize, r_right: usize) -> Self {
        debug_assert_eq!(m.ncols(), n * r_right);
        Self {
            r_left: m.nrows(),
            n,
            r_right,
            data: m.as_slice().to_vec(),
        }
    }

    pub fn r_left(&self) -> usize {
        self.r_left
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_right(&self) -> usize {
        self.r_right
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.r_left, self.n, self.r_right)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> C64 {
        self.data[a + self.r_left * (i + self.n * b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: C64) {
        self.data[a + self.r_left * (i + self.n * b)] = v;
    }

    /// Slice `U(i) = U(:, i, :)`.
    pub fn slice(&self, i: usize) -> Matrix {
        Matrix::from_fn(self.r_left, self.r_right, |a, b| self.get(a, i, b))
    }

    pub fn left_unfolding(&self) -> Matrix {
        Matrix::from_column_slice(self.r_left * self.n, self.r_right, &self.data)
    }

    pub fn right_unfolding(&self) -> Matrix {
        Matrix::from_column_slice(self.r_left, self.n * self.r_right, &self.data)
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        linalg::inner(&self.data, &other.data)
    }

    pub fn scale(&self, a: C64) -> Self {
        Self {
            data: self.data.iter().map(|x| x * a).collect(),
            ..*self
        }
    }

    pub fn axpy(&self, a: C64, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + a * y)
                .collect(),
            ..*self
        }
    }

    /// `U ×_2 K`: contracts the physical index with the columns of `k`.
    pub fn mode_product(&self, k: &Matrix) -> Result<Self> {
        if k.ncols() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "factor has {} columns, core mode has size {}",
                k.ncols(),
                self.n
            )));
        }
        let m = k.nrows();
        let mut out = Self::zeros(self.r_left, m, self.r_right);
        for b in 0..self.r_right {
            for i in 0..self.n {
                for j in 0..m {
                    let kji = k[(j, i)];
                    if kji == ZERO {
                        continue;
                    }
                    for a in 0..self.r_left {
                        let v = out.get(a, j, b) + kji * self.get(a, i, b);
                        out.set(a, j, b, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copy into a larger zero core at offset `(a0, b0)` in the bond indices.
    pub fn embed(&self, r_left: usize, r_right: usize, a0: usize, b0: usize) -> Self {
        let mut out = Self::zeros(r_left, self.n, r_right);
        out.add_block(self, a0, b0);
        out
    }

    fn add_block(&mut self, block: &Self, a0: usize, b0: usize) {
        for b in 0..block.r_right {
            for i in 0..block.n {
                for a in 0..block.r_left {
                    let v = self.get(a0 + a, i, b0 + b) + block.get(a, i, b);
                    self.set(a0 + a, i, b0 + b, v);
                }
            }
        }
    }

    /// `L(U)^† L(U) = I` within `tol`.
    pub fn is_left_orthogonal(&self, tol: f64) -> bool {
        let l = self.left_unfolding();
        (l.adjoint() * &l - Matrix::identity(self.r_right, self.r_right)).norm() <= tol
    }

    /// `R(U) R(U)^† = I` within `tol`.
    pub fn is_right_orthogonal(&self, tol: f64) -> bool {
        let r = self.right_unfolding();
        (&r * r.adjoint() - Matrix::identity(self.r_left, self.r_left)).norm() <= tol
    }
}

/// Orthogonality marker; `Center(k)` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orth {
    None,
    Left,
    Right,
    Center(usize),
}

/// Orthogonality tolerance for invariant checks.
pub const ORTH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TtTensor {
    cores: Vec<TtCore>,
    orth: Orth,
}

/// Output of [`TtTensor::svd_with_info`] and [`TtTensor::round_with_info`].
#[derive(Debug, Clone)]
pub struct Truncation {
    pub tensor: TtTensor,
    /// Number of kept singular values above `RANK_TOL * sigma_max` per bond.
    pub effective_ranks: Vec<usize>,
    /// Smallest kept singular value relative to the largest, per bond.
    pub min_kept_ratio: Vec<f64>,
}

impl Truncation {
    pub fn is_rank_deficient(&self) -> bool {
        self.effective_ranks.as_slice() != self.tensor.ranks().as_slice()
    }
}

impl TtTensor {
    pub fn from_cores(cores: Vec<TtCore>) -> Result<Self> {
        Self::with_orth(cores, Orth::None)
    }

    pub(crate) fn with_orth(cores: Vec<TtCore>, orth: Orth) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidParameter(
                "a TT tensor needs at least one core".into(),
            ));
        }
        if cores[0].r_left != 1 || cores[cores.len() - 1].r_right != 1 {
            return Err(Error::InvalidRank("boundary bonds must be 1".into()));
        }
        for w in cores.windows(2) {
            if w[0].r_right != w[1].r_left {
                return Err(Error::DimensionMismatch(format!(
                    "adjacent bonds {} and {} differ",
                    w[0].r_right, w[1].r_left
                )));
            }
        }
        Ok(Self { cores, orth })
    }

    /// Rank-1 tensor `u_1 ∘ ... ∘ u_d`.
    pub fn rank_one(factors: &[Vec<C64>]) -> Result<Self> {
        let cores = factors
            .iter()
            .map(|u| TtCore::from_fn(1, u.len(), 1, |_, i, _| u[i]))
            .collect();
        Self::from_cores(cores)
    }

    pub fn random<R: Rng + ?Sized>(shape: &[usize], ranks: &TtRank, rng: &mut R) -> Result<Self> {
        ranks.check_feasible(shape)?;
        let r = ranks.as_slice();
        let cores = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| TtCore::random(r[k], n, r[k + 1], rng))
            .collect();
        Self::from_cores(cores)
    }

    pub fn random_real<R: Rng + ?Sized>(
        shape: &[usize],
        ranks: &TtRank,
        rng: &mut R,
    ) -> Result<Self> {
        ranks.check_feasible(shape)?;
        let r = ranks.as_slice();
        let cores = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| TtCore::random_real(r[k], n, r[k + 1], rng))
            .collect();
        Self::from_cores(cores)
    }

    /// All-zero tensor with unit ranks.
    pub fn zeros(shape: &[usize]) -> Self {
        let cores = shape.iter().map(|&n| TtCore::zeros(1, n, 1)).collect();
        Self {
            cores,
            orth: Orth::None,
        }
    }

    pub fn cores(&self) -> &[TtCore] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &TtCore {
        &self.cores[k]
    }

    pub fn into_cores(self) -> Vec<TtCore> {
        self.cores
    }

    pub fn orth(&self) -> Orth {
        self.orth
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    pub fn ranks(&self) -> TtRank {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.r_left).collect();
        r.push(1);
        TtRank(r)
    }

    /// Number of stored complex parameters.
    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(Error::ShapeMismatch {
                expected: a,
                got: b,
            });
        }
        Ok(())
    }

    /// Entry `U_1(i_1) U_2(i_2) ... U_d(i_d)`.
    pub fn entry(&self, idx: &[usize]) -> Result<C64> {
        let shape = self.shape();
        if idx.len() != shape.len() || idx.iter().zip(&shape).any(|(&i, &n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: idx.to_vec(),
                shape,
            });
        }
        Ok(self.entry_unchecked(idx))
    }

    /// Entries at many multi-indices, assumed in range.
    pub fn entries(&self, indices: &[Vec<usize>]) -> Vec<C64> {
        indices
            .iter()
            .map(|idx| self.entry_unchecked(idx))
            .collect()
    }

    pub(crate) fn entry_unchecked(&self, idx: &[usize]) -> C64 {
        let mut row = vec![ONE];
        for (core, &i) in self.cores.iter().zip(idx) {
            let mut next = vec![ZERO; core.r_right];
            for (b, nb) in next.iter_mut().enumerate() {
                for (a, ra) in row.iter().enumerate() {
                    *nb += ra * core.get(a, i, b);
                }
            }
            row = next;
        }
        row[0]
    }

    pub fn full(&self) -> Result<DenseTensor> {
        self.full_with_limit(DEFAULT_FULL_LIMIT)
    }

    pub fn full_with_limit(&self, limit: usize) -> Result<DenseTensor> {
        let shape = self.shape();
        let entries = shape.iter().fold(1usize, |a, &n| a.saturating_mul(n));
        if entries > limit {
            return Err(Error::SizeGuard { entries, limit });
        }
        let (left, _) = self.interface(self.order())?;
        DenseTensor::new(shape, left.as_slice().to_vec())
    }

    /// Interface matrices `(X_{≤k}, X_{≥k+1})` with `X_<k> = X_{≤k} X_{≥k+1}^T`.
    /// Empty products (`k = 0` on the left, `k = d` on the right) are `[1]`.
    pub fn interface(&self, k: usize) -> Result<(Matrix, Matrix)> {
        let d = self.order();
        if k > d {
            return Err(Error::UnfoldIndex { k, order: d });
        }
        let mut left = Matrix::from_element(1, 1, ONE);
        for core in &self.cores[..k] {
            left = left_interface_step(&left, core);
        }
        let mut right = Matrix::from_element(1, 1, ONE);
        for core in self.cores[k..].iter().rev() {
            right = right_interface_step(&right, core);
        }
        Ok((left, right))
    }

    /// TT-SVD of a dense tensor: sequential truncated SVDs, left-orthogonal
    /// output.
    pub fn svd(a: &DenseTensor, ranks: &TtRank) -> Result<Self> {
        Ok(Self::svd_with_info(a, ranks)?.tensor)
    }

    pub fn svd_with_info(a: &DenseTensor, ranks: &TtRank) -> Result<Truncation> {
        let shape = a.shape().to_vec();
        ranks.check_feasible(&shape)?;
        let d = shape.len();
        let r = ranks.as_slice();
        let mut cores = Vec::with_capacity(d);
        let mut effective = vec![1; d + 1];
        let mut min_ratio = vec![1.0; d + 1];
        let mut rest = a.data().to_vec();
        let mut r_prev = 1;
        for k in 0..d - 1 {
            let rows = r_prev * shape[k];
            let cols = rest.len() / rows;
            let m = Matrix::from_column_slice(rows, cols, &rest);
            let keep = r[k + 1];
            let t = linalg::svd_truncated(&m, keep)?;
            effective[k + 1] = effective_rank(&t.s, &t.spectrum);
            min_ratio[k + 1] = kept_ratio(&t.s);
            cores.push(TtCore::from_left_unfolding(&t.u, r_prev, shape[k]));
            let mut sv = t.v_t;
            for (i, s) in t.s.iter().enumerate() {
                sv.row_mut(i).scale_mut(*s);
            }
            rest = sv.as_slice().to_vec();
            r_prev = keep;
        }
        cores.push(TtCore::new(r_prev, shape[d - 1], 1, rest)?);
        let tensor = Self::with_orth(cores, Orth::Left)?;
        Ok(Truncation {
            tensor,
            effective_ranks: effective,
            min_kept_ratio: min_ratio,
        })
    }

    /// Same values with cores left of `center` left-orthogonal and cores right
    /// of it right-orthogonal (0-based). Interior ranks above `r_{k-1} n_k`
    /// (or `n_k r_k`) shrink to that bound.
    pub fn orthogonalize(&self, center: usize) -> Self {
        let d = self.order();
        let center = center.min(d - 1);
        let mut cores = self.cores.clone();
        for k in 0..center {
            let (q, r) = linalg::thin_qr(&cores[k].left_unfolding());
            let (rl, n) = (cores[k].r_left, cores[k].n);
            cores[k] = TtCore::from_left_unfolding(&q, rl, n);
            let next = &cores[k + 1];
            let merged = r * next.right_unfolding();
            cores[k + 1] = TtCore::from_right_unfolding(&merged, next.n, next.r_right);
        }
        for k in (center + 1..d).rev() {
            let (q, r) = linalg::thin_qr(&cores[k].right_unfolding().adjoint());
            let (n, rr) = (cores[k].n, cores[k].r_right);
            cores[k] = TtCore::from_right_unfolding(&q.adjoint(), n, rr);
            let prev = &cores[k - 1];
            let merged = prev.left_unfolding() * r.adjoint();
            cores[k - 1] = TtCore::from_left_unfolding(&merged, prev.r_left, prev.n);
        }
        let orth = if center == d - 1 {
            Orth::Left
        } else if center == 0 {
            Orth::Right
        } else {
            Orth::Center(center)
        };
        Self { cores, orth }
    }

    pub fn left_orthogonalize(&self) -> Self {
        self.orthogonalize(self.order() - 1)
    }

    pub fn right_orthogonalize(&self) -> Self {
        self.orthogonalize(0)
    }

    /// Frobenius norm as `‖U_d‖_F` after left-orthogonalization.
    pub fn norm(&self) -> f64 {
        if self.orth == Orth::Left {
            return self.cores[self.order() - 1].norm();
        }
        let x = self.left_orthogonalize();
        x.cores[x.order() - 1].norm()
    }

    /// `<self, other>` by transfer-matrix contraction, conjugate-linear in
    /// `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_shape(other)?;
        let mut env = Matrix::from_element(1, 1, ONE);
        for (x, y) in self.cores.iter().zip(&other.cores) {
            env = transfer_step(&env, x, y);
        }
        Ok(env[(0, 0)])
    }

    /// Multiply by a scalar (applied to the last core; left orthogonality is
    /// kept only for unit-modulus factors).
    pub fn scale(&self, a: C64) -> Self {
        let mut cores = self.cores.clone();
        let d = cores.len();
        cores[d - 1] = cores[d - 1].scale(a);
        let orth = if (a.norm() - 1.0).abs() < 1e-15 && self.orth == Orth::Left {
            Orth::Left
        } else {
            Orth::None
        };
        Self { cores, orth }
    }

    /// Block-core sum; interior ranks add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let d = self.order();
        if d == 1 {
            return Self::from_cores(vec![self.cores[0].axpy(ONE, &other.cores[0])]);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (x, y) = (&self.cores[k], &other.cores[k]);
            let core = if k == 0 {
                let mut c = x.embed(1, x.r_right + y.r_right, 0, 0);
                c.add_block(y, 0, x.r_right);
                c
            } else if k == d - 1 {
                let mut c = x.embed(x.r_left + y.r_left, 1, 0, 0);
                c.add_block(y, x.r_left, 0);
                c
            } else {
                let mut c = x.embed(x.r_left + y.r_left, x.r_right + y.r_right, 0, 0);
                c.add_block(y, x.r_left, x.r_right);
                c
            };
            cores.push(core);
        }
        Self::from_cores(cores)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        self.add(&other.scale(a))
    }

    /// TT rounding to ranks `≤ ranks` without densification. Right-to-left
    /// orthogonalization followed by a left-to-right truncated SVD sweep, which
    /// reproduces TT-SVD of the densified tensor. Output is left-orthogonal.
    pub fn round(&self, ranks: &TtRank) -> Result<Self> {
        Ok(self.round_with_info(ranks)?.tensor)
    }

    pub fn round_with_info(&self, ranks: &TtRank) -> Result<Truncation> {
        let shape = self.shape();
        ranks.check_feasible(&shape)?;
        let d = self.order();
        let target = ranks.as_slice();
        let mut cores = self.right_orthogonalize().cores;
        let mut effective = vec![1; d + 1];
        let mut min_ratio = vec![1.0; d + 1];
        for k in 0..d - 1 {
            let core = &cores[k];
            let (rl, n) = (core.r_left, core.n);
            let m = core.left_unfolding();
            let keep = target[k + 1].min(m.nrows()).min(m.ncols());
            let t = linalg::svd_truncated(&m, keep)?;
            effective[k + 1] = effective_rank(&t.s, &t.spectrum);
            min_ratio[k + 1] = kept_ratio(&t.s);
            cores[k] = TtCore::from_left_unfolding(&t.u, rl, n);
            let mut sv = t.v_t;
            for (i, s) in t.s.iter().enumerate() {
                sv.row_mut(i).scale_mut(*s);
            }
            let next = &cores[k + 1];
            let merged = sv * next.right_unfolding();
            cores[k + 1] = TtCore::from_right_unfolding(&merged, next.n, next.r_right);
        }
        let tensor = Self::with_orth(cores, Orth::Left)?;
        Ok(Truncation {
            tensor,
            effective_ranks: effective,
            min_kept_ratio: min_ratio,
        })
    }

    /// `(K_d ⊗ ... ⊗ K_1) vec(X)` as the TT tensor with cores `U_k ×_2 K_k`.
    pub fn kron_apply(&self, factors: &[Matrix]) -> Result<Self> {
        if factors.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for an order-{} tensor",
                factors.len(),
                self.order()
            )));
        }
        let cores = self
            .cores
            .iter()
            .zip(factors)
            .map(|(c, k)| c.mode_product(k))
            .collect::<Result<Vec<_>>>()?;
        Self::from_cores(cores)
    }

    /// Checks the orthogonality claimed by the marker.
    pub fn satisfies_orth(&self, tol: f64) -> bool {
        let d = self.order();
        let (left_upto, right_from) = match self.orth {
            Orth::None => return true,
            Orth::Left => (d - 1, d),
            Orth::Right => (0, 1),
            Orth::Center(k) => (k, k + 1),
        };
        self.cores[..left_upto]
            .iter()
            .all(|c| c.is_left_orthogonal(tol))
            && self.cores[right_from..]
                .iter()
                .all(|c| c.is_right_orthogonal(tol))
    }
}

fn effective_rank(kept: &[f64], spectrum: &[f64]) -> usize {
    let smax = spectrum.first().copied().unwrap_or(0.0);
    kept.iter()
        .filter(|&&s| s > RANK_TOL * smax && s > 0.0)
        .count()
}

fn kept_ratio(kept: &[f64]) -> f64 {
    match (kept.first(), kept.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => b / a,
        _ => 0.0,
    }
}

/// `X_{≤k} = (I_{n_k} ⊗ X_{≤k-1}) L(U_k)`.
pub(crate) fn left_interface_step(prev: &Matrix, core: &TtCore) -> Matrix {
    let rows = prev.nrows();
    let mut out = Matrix::zeros(rows * core.n, core.r_right);
    for i in 0..core.n {
        let block = prev * core.slice(i);
        out.rows_mut(i * rows, rows).copy_from(&block);
    }
    out
}

/// `X_{≥k} = (X_{≥k+1} ⊗ I_{n_k}) R(U_k)^T`.
pub(crate) fn right_interface_step(next: &Matrix, core: &TtCore) -> Matrix {
    let rows = next.nrows();
    let n = core.n;
    let mut out = Matrix::zeros(rows * n, core.r_left);
    for i in 0..n {
        // rows q*n + i, value = sum_b U(a,i,b) next(q,b)
        let block = next * core.slice(i).transpose();
        for q in 0..rows {
            for a in 0..core.r_left {
                out[(q * n + i, a)] = block[(q, a)];
            }
        }
    }
    out
}

/// One step of `E' = sum_i X(i)^† E Y(i)`.
pub(crate) fn transfer_step(env: &Matrix, x: &TtCore, y: &TtCore) -> Matrix {
    let mut out = Matrix::zeros(x.r_right, y.r_right);
    for i in 0..x.n {
        out += x.slice(i).adjoint() * env * y.slice(i);
    }
    out
}
