//! The manifold `N_r` of unit-norm tensors with exact TT rank `r`.
//!
//! A point stores two equivalent core families: `U_1..U_d`, all
//! left-orthogonal (so `‖U_d‖_F = 1`), and `Y_1..Y_d`, all right-orthogonal.
//! Mixing them gives k-orthogonal interfaces for every `k` without
//! re-orthogonalizing.
//!
//! A tangent vector is stored through gauge-fixed parameters `W_1..W_d` with
//! `L(W_k)^† L(U_k) = 0` for every `k`, and represents
//! `sum_k [[U_1, ..., U_{k-1}, W_k, Y_{k+1}, ..., Y_d]]`.

mod ambient;
mod fd;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

pub use ambient::{Ambient, SparseTensor};
pub use fd::{default_fd_step, fd_gradient};

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, I, ONE, ZERO};
use crate::tt::{Orth, Truncation, TtCore, TtRank, TtTensor};

/// Inputs with norm below this are rejected by [`NttPoint::ntt_svd`].
pub const ZERO_NORM_TOL: f64 = 1e-14;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct NttPoint {
    id: u64,
    left: Vec<TtCore>,
    right: Vec<TtCore>,
    ranks: TtRank,
}

#[derive(Debug, Clone)]
pub struct Tangent {
    base: u64,
    params: Vec<TtCore>,
}

/// Table 1 count `sum_k r_{k-1} n_k r_k - sum_{k<d} r_k^2 - 1`.
pub fn manifold_dim(shape: &[usize], ranks: &TtRank) -> Result<usize> {
    ranks.check_feasible(shape)?;
    let r = ranks.as_slice();
    let params: usize = shape
        .iter()
        .enumerate()
        .map(|(k, &n)| r[k] * n * r[k + 1])
        .sum();
    let gauge: usize = r[1..shape.len()].iter().map(|x| x * x).sum();
    Ok(params - gauge - 1)
}

/// Real dimension of the tangent spaces spanned by [`NttPoint::tangent_basis`].
pub fn real_tangent_dim(shape: &[usize], ranks: &TtRank) -> Result<usize> {
    Ok(2 * manifold_dim(shape, ranks)?)
}

impl NttPoint {
    /// Builds a point from left-orthogonal cores whose last core has unit norm.
    fn from_left_cores(left: Vec<TtCore>) -> Result<Self> {
        let x = TtTensor::from_cores(left)?;
        let ranks = x.ranks();
        let right = x.right_orthogonalize();
        if right.ranks() != ranks {
            return Err(Error::RankDeficient {
                requested: ranks.as_slice().to_vec(),
                effective: right.ranks().as_slice().to_vec(),
            });
        }
        Ok(Self {
            id: fresh_id(),
            left: x.into_cores(),
            right: right.into_cores(),
            ranks,
        })
    }

    fn from_truncation(t: Truncation, ranks: &TtRank) -> Result<Self> {
        let x = t.tensor;
        let d = x.order();
        let nrm = x.core(d - 1).norm();
        if !nrm.is_finite() {
            return Err(Error::NonFinite);
        }
        if nrm < ZERO_NORM_TOL {
            return Err(Error::ZeroNorm(nrm));
        }
        if x.ranks() != *ranks || t.effective_ranks.as_slice() != ranks.as_slice() {
            return Err(Error::RankDeficient {
                requested: ranks.as_slice().to_vec(),
                effective: t.effective_ranks,
            });
        }
        let mut cores = x.into_cores();
        cores[d - 1] = cores[d - 1].scale(linalg::real(1.0 / nrm));
        Self::from_left_cores(cores)
    }

    /// NTT-SVD: TT-SVD (or TT rounding) to rank `r`, then rescale the last
    /// core to unit norm.
    pub fn ntt_svd(a: &Ambient, ranks: &TtRank) -> Result<Self> {
        let t = match a {
            Ambient::Dense(a) => TtTensor::svd_with_info(a, ranks)?,
            Ambient::Tt(x) => x.round_with_info(ranks)?,
            Ambient::Sparse(s) => TtTensor::svd_with_info(&s.to_dense()?, ranks)?,
        };
        Self::from_truncation(t, ranks)
    }

    pub fn from_dense(a: &DenseTensor, ranks: &TtRank) -> Result<Self> {
        Self::from_truncation(TtTensor::svd_with_info(a, ranks)?, ranks)
    }

    pub fn from_tt(x: &TtTensor, ranks: &TtRank) -> Result<Self> {
        Self::from_truncation(x.round_with_info(ranks)?, ranks)
    }

    /// Complex Gaussian cores projected onto `N_r`.
    pub fn random<R: Rng + ?Sized>(shape: &[usize], ranks: &TtRank, rng: &mut R) -> Result<Self> {
        let x = TtTensor::random(shape, ranks, rng)?;
        Self::from_tt(&x, ranks)
    }

    /// Real Gaussian cores projected onto `N_r`; all cores stay real.
    pub fn random_real<R: Rng + ?Sized>(
        shape: &[usize],
        ranks: &TtRank,
        rng: &mut R,
    ) -> Result<Self> {
        let x = TtTensor::random_real(shape, ranks, rng)?;
        Self::from_tt(&x, ranks)
    }

    pub fn random_point(shape: &[usize], ranks: &TtRank, seed: u64) -> Result<Self> {
        Self::random(shape, ranks, &mut linalg::rng(seed))
    }

    pub fn order(&self) -> usize {
        self.left.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.left.iter().map(|c| c.n()).collect()
    }

    pub fn ranks(&self) -> &TtRank {
        &self.ranks
    }

    pub fn left_cores(&self) -> &[TtCore] {
        &self.left
    }

    pub fn right_cores(&self) -> &[TtCore] {
        &self.right
    }

    pub fn num_params(&self) -> usize {
        self.left.iter().map(|c| c.data().len()).sum()
    }

    /// The point as a left-orthogonal TT tensor.
    pub fn to_tt(&self) -> TtTensor {
        TtTensor::with_orth(self.left.clone(), Orth::Left).expect("point cores are consistent")
    }

    /// The point through its right-orthogonal family.
    pub fn to_tt_right(&self) -> TtTensor {
        TtTensor::with_orth(self.right.clone(), Orth::Right).expect("point cores are consistent")
    }

    pub fn full(&self) -> Result<DenseTensor> {
        self.to_tt().full()
    }

    pub fn entry(&self, idx: &[usize]) -> Result<C64> {
        self.to_tt().entry(idx)
    }

    pub fn inner_tt(&self, y: &TtTensor) -> Result<C64> {
        self.to_tt().inner(y)
    }

    /// Unit-norm check on both families and orthogonality of all cores.
    pub fn check_invariants(&self, tol: f64) -> bool {
        let d = self.order();
        let unit = (self.left[d - 1].norm() - 1.0).abs() <= tol
            && (self.right[0].norm() - 1.0).abs() <= tol;
        unit && self.left.iter().all(|c| c.is_left_orthogonal(tol))
            && self.right.iter().all(|c| c.is_right_orthogonal(tol))
    }

    /// Multiplies the tensor by `e^{i theta}`.
    pub fn with_phase(&self, theta: f64) -> Self {
        let ph = C64::from_polar(1.0, theta);
        let d = self.order();
        let mut left = self.left.clone();
        left[d - 1] = left[d - 1].scale(ph);
        let mut right = self.right.clone();
        right[0] = right[0].scale(ph);
        Self {
            id: fresh_id(),
            left,
            right,
            ranks: self.ranks.clone(),
        }
    }

    /// Embeds the point into larger ranks without changing its value. Extra
    /// left-bond rows are zero and extra columns complete each left unfolding
    /// to an orthonormal set, so the result is rank-deficient until moved.
    pub fn pad_to(&self, ranks: &TtRank) -> Result<Self> {
        let shape = self.shape();
        ranks.check_feasible(&shape)?;
        if !self.ranks.le(ranks) {
            return Err(Error::InvalidRank(format!(
                "cannot pad ranks {:?} down to {:?}",
                self.ranks.as_slice(),
                ranks.as_slice()
            )));
        }
        let r = ranks.as_slice();
        let d = self.order();
        let mut cores = Vec::with_capacity(d);
        for (k, u) in self.left.iter().enumerate() {
            let mut padded = u.embed(r[k], r[k + 1], 0, 0);
            let extra = r[k + 1] - u.r_right();
            if extra > 0 {
                let l = padded.left_unfolding();
                let used = l.columns(0, u.r_right()).into_owned();
                let comp = linalg::orthonormal_complement(&used);
                let mut full = l;
                full.columns_mut(u.r_right(), extra)
                    .copy_from(&comp.columns(0, extra));
                padded = TtCore::from_left_unfolding(&full, r[k], u.n());
            }
            cores.push(padded);
        }
        let x = TtTensor::with_orth(cores, Orth::Left)?;
        let right = x.right_orthogonalize();
        Ok(Self {
            id: fresh_id(),
            left: x.into_cores(),
            right: right.into_cores(),
            ranks: ranks.clone(),
        })
    }

    fn check_tangent(&self, v: &Tangent) -> Result<()> {
        if v.base != self.id {
            return Err(Error::BaseMismatch);
        }
        Ok(())
    }

    pub fn zero_tangent(&self) -> Tangent {
        let params = self
            .left
            .iter()
            .map(|u| TtCore::zeros(u.r_left(), u.n(), u.r_right()))
            .collect();
        Tangent {
            base: self.id,
            params,
        }
    }

    /// Wraps raw parameters as a tangent at this point, enforcing the gauge.
    pub fn tangent_from_params(&self, params: Vec<TtCore>) -> Result<Tangent> {
        if params.len() != self.order()
            || params
                .iter()
                .zip(&self.left)
                .any(|(w, u)| w.dims() != u.dims())
        {
            return Err(Error::DimensionMismatch(
                "tangent parameters must match the core shapes".into(),
            ));
        }
        let params = params
            .iter()
            .zip(&self.left)
            .map(|(w, u)| gauge_fix(w, u))
            .collect();
        Ok(Tangent {
            base: self.id,
            params,
        })
    }

    /// Largest `‖L(W_k)^† L(U_k)‖_F` over `k`.
    pub fn gauge_residual(&self, v: &Tangent) -> Result<f64> {
        self.check_tangent(v)?;
        Ok(v.params
            .iter()
            .zip(&self.left)
            .map(|(w, u)| (w.left_unfolding().adjoint() * u.left_unfolding()).norm())
            .fold(0.0, f64::max))
    }

    /// Orthogonal projection onto `T_X N_r`.
    pub fn project(&self, z: &Ambient) -> Result<Tangent> {
        let shape = self.shape();
        if z.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: shape,
                got: z.shape().to_vec(),
            });
        }
        let raw = match z {
            Ambient::Dense(a) => self.project_dense(a),
            Ambient::Tt(x) => self.project_tt(x),
            Ambient::Sparse(s) => self.project_sparse(s),
        };
        let params = raw
            .iter()
            .zip(&self.left)
            .map(|(w, u)| gauge_fix(&gauge_fix(w, u), u))
            .collect();
        Ok(Tangent {
            base: self.id,
            params,
        })
    }

    fn project_dense(&self, a: &DenseTensor) -> Vec<TtCore> {
        let d = self.order();
        let shape = self.shape();
        let mut prefixes = vec![Matrix::from_element(1, 1, ONE)];
        for u in &self.left[..d - 1] {
            let next = crate::tt::left_interface_step(prefixes.last().unwrap(), u);
            prefixes.push(next);
        }
        let mut suffixes = vec![Matrix::from_element(1, 1, ONE); d];
        for k in (0..d - 1).rev() {
            suffixes[k] = crate::tt::right_interface_step(&suffixes[k + 1], &self.right[k + 1]);
        }
        (0..d)
            .map(|k| {
                let rows: usize = shape[..=k].iter().product();
                let unfold = Matrix::from_column_slice(rows, a.len() / rows, a.data());
                let m = unfold * suffixes[k].map(|z| z.conj());
                let prefix = &prefixes[k];
                let block = prefix.nrows();
                let (rl, n, rr) = self.left[k].dims();
                let mut w = TtCore::zeros(rl, n, rr);
                for i in 0..n {
                    let slice = prefix.adjoint() * m.rows(i * block, block);
                    for b in 0..rr {
                        for al in 0..rl {
                            w.set(al, i, b, slice[(al, b)]);
                        }
                    }
                }
                w
            })
            .collect()
    }

    fn project_tt(&self, z: &TtTensor) -> Vec<TtCore> {
        let d = self.order();
        let zc = z.cores();
        let mut lefts = vec![Matrix::from_element(1, 1, ONE)];
        for k in 0..d - 1 {
            let next = crate::tt::transfer_step(lefts.last().unwrap(), &self.left[k], &zc[k]);
            lefts.push(next);
        }
        let mut rights = vec![Matrix::from_element(1, 1, ONE); d];
        for k in (0..d - 1).rev() {
            let (y, zk) = (&self.right[k + 1], &zc[k + 1]);
            let mut acc = Matrix::zeros(zk.r_left(), y.r_left());
            for i in 0..y.n() {
                acc += zk.slice(i) * &rights[k + 1] * y.slice(i).adjoint();
            }
            rights[k] = acc;
        }
        (0..d)
            .map(|k| {
                let (rl, n, rr) = self.left[k].dims();
                let mut w = TtCore::zeros(rl, n, rr);
                for i in 0..n {
                    let slice = &lefts[k] * zc[k].slice(i) * &rights[k];
                    for b in 0..rr {
                        for al in 0..rl {
                            w.set(al, i, b, slice[(al, b)]);
                        }
                    }
                }
                w
            })
            .collect()
    }

    fn project_sparse(&self, s: &SparseTensor) -> Vec<TtCore> {
        let d = self.order();
        let mut out: Vec<TtCore> = self
            .left
            .iter()
            .map(|u| TtCore::zeros(u.r_left(), u.n(), u.r_right()))
            .collect();
        let mut prefixes: Vec<Vec<C64>> = vec![Vec::new(); d];
        let mut suffixes: Vec<Vec<C64>> = vec![Vec::new(); d];
        for (idx, &g) in s.iter() {
            prefixes[0] = vec![ONE];
            for k in 1..d {
                prefixes[k] = row_times_slice(&prefixes[k - 1], &self.left[k - 1], idx[k - 1]);
            }
            suffixes[d - 1] = vec![ONE];
            for k in (0..d - 1).rev() {
                suffixes[k] = slice_times_col(&self.right[k + 1], idx[k + 1], &suffixes[k + 1]);
            }
            for k in 0..d {
                let i = idx[k];
                let w = &mut out[k];
                for (b, rb) in suffixes[k].iter().enumerate() {
                    let gb = g * rb.conj();
                    for (al, la) in prefixes[k].iter().enumerate() {
                        let v = w.get(al, i, b) + gb * la.conj();
                        w.set(al, i, b, v);
                    }
                }
            }
        }
        out
    }

    /// The tangent vector as a TT tensor of interior ranks `2 r_k`.
    pub fn tangent_to_tt(&self, v: &Tangent) -> Result<TtTensor> {
        self.check_tangent(v)?;
        Ok(self.block_tt(&v.params, 1.0, false))
    }

    /// `X + s V` as a TT tensor of interior ranks `2 r_k`.
    pub fn shifted_tt(&self, v: &Tangent, s: f64) -> Result<TtTensor> {
        self.check_tangent(v)?;
        Ok(self.block_tt(&v.params, s, true))
    }

    fn block_tt(&self, w: &[TtCore], s: f64, with_base: bool) -> TtTensor {
        let d = self.order();
        let scale = linalg::real(s);
        if d == 1 {
            let core = if with_base {
                self.left[0].axpy(scale, &w[0])
            } else {
                w[0].scale(scale)
            };
            return TtTensor::from_cores(vec![core]).expect("single core");
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (u, y, wk) = (&self.left[k], &self.right[k], w[k].scale(scale));
            let (rl, n, rr) = u.dims();
            let core = if k == 0 {
                let mut c = TtCore::zeros(1, n, 2 * rr);
                put(&mut c, &wk, 0, 0);
                put(&mut c, u, 0, rr);
                c
            } else if k == d - 1 {
                let mut c = TtCore::zeros(2 * rl, n, 1);
                put(&mut c, y, 0, 0);
                if with_base {
                    put(&mut c, &u.axpy(ONE, &wk), rl, 0);
                } else {
                    put(&mut c, &wk, rl, 0);
                }
                c
            } else {
                let mut c = TtCore::zeros(2 * rl, n, 2 * rr);
                put(&mut c, y, 0, 0);
                put(&mut c, &wk, rl, 0);
                put(&mut c, u, rl, rr);
                c
            };
            cores.push(core);
        }
        TtTensor::from_cores(cores).expect("block cores are consistent")
    }

    /// Retraction `P^NTTSVD_r(X + s V)`.
    pub fn retract(&self, v: &Tangent, s: f64) -> Result<Self> {
        self.check_tangent(v)?;
        if s == 0.0 {
            return Ok(self.clone());
        }
        let t = self.block_tt(&v.params, s, true);
        Self::from_truncation(t.round_with_info(&self.ranks)?, &self.ranks)
    }

    /// Transport of a tangent at `from` into the tangent space at `self`.
    pub fn transport(&self, from: &NttPoint, v: &Tangent) -> Result<Tangent> {
        from.check_tangent(v)?;
        if from.id == self.id {
            return Ok(v.clone());
        }
        self.project(&Ambient::Tt(from.tangent_to_tt(v)?))
    }

    /// Complex inner product `sum_k <W_k^V, W_k^W>`.
    pub fn tangent_inner(&self, v: &Tangent, w: &Tangent) -> Result<C64> {
        self.check_tangent(v)?;
        self.check_tangent(w)?;
        Ok(v.inner_unchecked(w))
    }

    /// Orthonormal basis of `T_X N_r` over the reals, `Re<.,.>`-orthonormal.
    pub fn tangent_basis(&self) -> Vec<Tangent> {
        let mut basis = Vec::new();
        for (k, u) in self.left.iter().enumerate() {
            let (rl, n, rr) = u.dims();
            let comp = linalg::orthonormal_complement(&u.left_unfolding());
            for unit in [ONE, I] {
                for b in 0..rr {
                    for c in 0..comp.ncols() {
                        let mut w = Matrix::zeros(rl * n, rr);
                        w.column_mut(b).copy_from(&(comp.column(c) * unit));
                        let mut params = self.zero_tangent().params;
                        params[k] = TtCore::from_left_unfolding(&w, rl, n);
                        basis.push(Tangent {
                            base: self.id,
                            params,
                        });
                    }
                }
            }
        }
        basis
    }

    /// Frobenius distance `‖X - Y‖` without densifying.
    pub fn distance(&self, other: &NttPoint) -> Result<f64> {
        Ok(self.to_tt().axpy(-ONE, &other.to_tt())?.norm())
    }
}

fn put(dst: &mut TtCore, block: &TtCore, a0: usize, b0: usize) {
    let (rl, n, rr) = block.dims();
    for b in 0..rr {
        for i in 0..n {
            for a in 0..rl {
                dst.set(a0 + a, i, b0 + b, block.get(a, i, b));
            }
        }
    }
}

/// `L(W) - L(U) L(U)^† L(W)`.
fn gauge_fix(w: &TtCore, u: &TtCore) -> TtCore {
    let lu = u.left_unfolding();
    let lw = w.left_unfolding();
    let fixed = &lw - &lu * (lu.adjoint() * &lw);
    TtCore::from_left_unfolding(&fixed, w.r_left(), w.n())
}

fn row_times_slice(row: &[C64], core: &TtCore, i: usize) -> Vec<C64> {
    (0..core.r_right())
        .map(|b| {
            row.iter()
                .enumerate()
                .map(|(a, x)| x * core.get(a, i, b))
                .sum()
        })
        .collect()
}

fn slice_times_col(core: &TtCore, i: usize, col: &[C64]) -> Vec<C64> {
    (0..core.r_left())
        .map(|a| {
            col.iter()
                .enumerate()
                .map(|(b, x)| core.get(a, i, b) * x)
                .sum()
        })
        .collect()
}

impl Tangent {
    pub fn params(&self) -> &[TtCore] {
        &self.params
    }

    fn inner_unchecked(&self, other: &Tangent) -> C64 {
        self.params
            .iter()
            .zip(&other.params)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// Riemannian norm `sqrt(Re<V, V>)`.
    pub fn norm(&self) -> f64 {
        self.params
            .iter()
            .map(|w| w.norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Real part of the inner product with a tangent at the same base.
    pub fn dot(&self, other: &Tangent) -> Result<f64> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(self.inner_unchecked(other).re)
    }

    pub fn scale(&self, a: f64) -> Tangent {
        let s = linalg::real(a);
        Tangent {
            base: self.base,
            params: self.params.iter().map(|w| w.scale(s)).collect(),
        }
    }

    pub fn scale_complex(&self, a: C64) -> Tangent {
        Tangent {
            base: self.base,
            params: self.params.iter().map(|w| w.scale(a)).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Tangent) -> Result<Tangent> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        let s = linalg::real(a);
        let params = self
            .params
            .iter()
            .zip(&other.params)
            .map(|(x, y)| x.axpy(s, y))
            .collect();
        Ok(Tangent {
            base: self.base,
            params,
        })
    }

    /// `sum_j coeffs[j] * vs[j]`; all vectors must share a base.
    pub fn combine(coeffs: &[f64], vs: &[Tangent]) -> Result<Tangent> {
        let first = vs
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty combination".into()))?;
        let mut params: Vec<TtCore> = first
            .params
            .iter()
            .map(|w| TtCore::zeros(w.r_left(), w.n(), w.r_right()))
            .collect();
        for (c, v) in coeffs.iter().zip(vs) {
            if v.base != first.base {
                return Err(Error::BaseMismatch);
            }
            if *c == 0.0 {
                continue;
            }
            for (p, w) in params.iter_mut().zip(&v.params) {
                *p = p.axpy(linalg::real(*c), w);
            }
        }
        Ok(Tangent {
            base: first.base,
            params,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.params
            .iter()
            .all(|w| w.data().iter().all(|z| *z == ZERO))
    }
}
