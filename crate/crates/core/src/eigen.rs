//! Extreme eigenpairs of Kronecker-sum operators
//! `H = sum_l H_{l,d} ⊗ ... ⊗ H_{l,1}` on `N_r`.

use serde::{Deserialize, Serialize};

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{self, real, Matrix, C64, ONE, ZERO};
use crate::manifold::{Ambient, NttPoint, Tangent};
use crate::opt::{self, Objective, RcgConfig, RunTrace, Stage};
use crate::tt::{TtCore, TtTensor, DEFAULT_FULL_LIMIT};

/// One site of a matrix product operator: a `b_left x b_right` grid of
/// optional `n x n` blocks, block `(beta, gamma)` at `beta + b_left * gamma`.
#[derive(Debug, Clone)]
pub struct MpoCore {
    b_left: usize,
    b_right: usize,
    blocks: Vec<Option<Matrix>>,
}

impl MpoCore {
    fn new(b_left: usize, b_right: usize) -> Self {
        Self {
            b_left,
            b_right,
            blocks: vec![None; b_left * b_right],
        }
    }

    fn set(&mut self, beta: usize, gamma: usize, m: Matrix) {
        self.blocks[beta + self.b_left * gamma] = Some(m);
    }

    fn get(&self, beta: usize, gamma: usize) -> Option<&Matrix> {
        self.blocks[beta + self.b_left * gamma].as_ref()
    }

    pub fn bonds(&self) -> (usize, usize) {
        (self.b_left, self.b_right)
    }
}

#[derive(Debug, Clone)]
pub struct KroneckerSumOperator {
    dims: Vec<usize>,
    terms: Vec<Vec<Matrix>>,
    hermitian: bool,
    mpo: Vec<MpoCore>,
}

fn is_hermitian(m: &Matrix) -> bool {
    (m - m.adjoint()).norm() <= 1e-12 * m.norm().max(1.0)
}

fn pauli_x() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_z() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `tridiag(-1, 2, -1)` of size `n`.
pub fn second_difference(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            real(2.0)
        } else if i.abs_diff(j) == 1 {
            real(-1.0)
        } else {
            ZERO
        }
    })
}

impl KroneckerSumOperator {
    /// General operator; the MPO is the block-diagonal one of bond `L`.
    pub fn new(terms: Vec<Vec<Matrix>>, hermitian: bool) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("operator needs a term".into()))?;
        let dims: Vec<usize> = first.iter().map(|m| m.nrows()).collect();
        if dims.is_empty() {
            return Err(Error::InvalidParameter(
                "operator needs at least one site".into(),
            ));
        }
        for term in &terms {
            if term.len() != dims.len() || term.iter().zip(&dims).any(|(m, &n)| m.shape() != (n, n))
            {
                return Err(Error::DimensionMismatch(
                    "factor sizes differ between terms".into(),
                ));
            }
            if hermitian && !term.iter().all(is_hermitian) {
                return Err(Error::NotHermitian);
            }
        }
        let mpo = diagonal_mpo(&terms);
        Ok(Self {
            dims,
            terms,
            hermitian,
            mpo,
        })
    }

    /// `sum_l I ⊗ ... ⊗ T_n ⊗ ... ⊗ I` with `T_n = tridiag(-1, 2, -1)` at
    /// position `l`.
    pub fn laplace(d: usize, n: usize) -> Result<Self> {
        if d < 2 || n < 2 {
            return Err(Error::InvalidParameter(format!(
                "laplace needs d, n >= 2, got d = {d}, n = {n}"
            )));
        }
        let t = second_difference(n);
        let id = Matrix::identity(n, n);
        let terms = (0..d)
            .map(|l| {
                (0..d)
                    .map(|k| if k == l { t.clone() } else { id.clone() })
                    .collect()
            })
            .collect();
        let mut op = Self::new(terms, true)?;
        op.mpo = (0..d)
            .map(|k| {
                let (bl, br) = (if k == 0 { 1 } else { 2 }, if k == d - 1 { 1 } else { 2 });
                let mut w = MpoCore::new(bl, br);
                // Channel 0 carries the finished sum, the last channel the
                // identity prefix.
                let idle = bl - 1;
                w.set(idle, 0, t.clone());
                if br == 2 {
                    w.set(idle, 1, id.clone());
                }
                if bl == 2 {
                    w.set(0, 0, id.clone());
                }
                w
            })
            .collect();
        Ok(op)
    }

    /// `-sum_k Z_k Z_{k+1} - t sum_k X_k` on `d` qubits.
    pub fn ising(d: usize, t: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "ising needs d >= 2, got {d}"
            )));
        }
        let (x, z, id) = (pauli_x(), pauli_z(), Matrix::identity(2, 2));
        let mut terms = Vec::new();
        for k in 0..d - 1 {
            terms.push(
                (0..d)
                    .map(|j| match j {
                        _ if j == k => -z.clone(),
                        _ if j == k + 1 => z.clone(),
                        _ => id.clone(),
                    })
                    .collect(),
            );
        }
        for k in 0..d {
            terms.push(
                (0..d)
                    .map(|j| {
                        if j == k {
                            x.clone() * real(-t)
                        } else {
                            id.clone()
                        }
                    })
                    .collect(),
            );
        }
        let mut op = Self::new(terms, true)?;
        let tx = x * real(-t);
        op.mpo = (0..d)
            .map(|k| {
                let (bl, br) = (if k == 0 { 1 } else { 3 }, if k == d - 1 { 1 } else { 3 });
                let mut w = MpoCore::new(bl, br);
                // Channels: 0 finished, 1 open Z awaiting its partner, 2 identity.
                let idle = bl - 1;
                w.set(idle, 0, tx.clone());
                if br == 3 {
                    w.set(idle, 1, -z.clone());
                    w.set(idle, 2, id.clone());
                }
                if bl == 3 {
                    w.set(0, 0, id.clone());
                    w.set(1, 0, z.clone());
                }
                w
            })
            .collect();
        Ok(op)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[Vec<Matrix>] {
        &self.terms
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Bond dimensions of the MPO used by [`Self::apply`].
    pub fn mpo_bonds(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.mpo.iter().map(|w| w.b_left).collect();
        b.push(1);
        b
    }

    /// Dense matrix `sum_l H_{l,d} ⊗ ... ⊗ H_{l,1}`.
    pub fn to_dense(&self) -> Result<Matrix> {
        let size = self.dims.iter().fold(1usize, |a, &n| a.saturating_mul(n));
        if size.saturating_mul(size) > DEFAULT_FULL_LIMIT {
            return Err(Error::SizeGuard {
                entries: size.saturating_mul(size),
                limit: DEFAULT_FULL_LIMIT,
            });
        }
        let mut h = Matrix::zeros(size, size);
        for term in &self.terms {
            let mut m = term[0].clone();
            for f in &term[1..] {
                m = linalg::kron(f, &m);
            }
            h += m;
        }
        Ok(h)
    }

    fn check_shape(&self, shape: &[usize]) -> Result<()> {
        if shape != self.dims.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.dims.clone(),
                got: shape.to_vec(),
            });
        }
        Ok(())
    }

    /// `H vec(X)` through the MPO; interior ranks multiply by the MPO bonds.
    pub fn apply(&self, x: &TtTensor) -> Result<TtTensor> {
        self.check_shape(&x.shape())?;
        let cores = x
            .cores()
            .iter()
            .zip(&self.mpo)
            .map(|(u, w)| {
                let (rl, n, rr) = u.dims();
                let mut c = TtCore::zeros(rl * w.b_left, n, rr * w.b_right);
                for gamma in 0..w.b_right {
                    for beta in 0..w.b_left {
                        if let Some(m) = w.get(beta, gamma) {
                            let block = u.mode_product(m)?;
                            for b in 0..rr {
                                for i in 0..n {
                                    for a in 0..rl {
                                        c.set(a + rl * beta, i, b + rr * gamma, block.get(a, i, b));
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        TtTensor::from_cores(cores)
    }

    /// `H vec(X)` as the plain sum of one Kronecker product per term.
    pub fn apply_termwise(&self, x: &TtTensor) -> Result<TtTensor> {
        self.check_shape(&x.shape())?;
        let mut acc = x.kron_apply(&self.terms[0])?;
        for term in &self.terms[1..] {
            acc = acc.add(&x.kron_apply(term)?)?;
        }
        Ok(acc)
    }

    /// `Re <X, H X>`.
    pub fn rayleigh(&self, x: &NttPoint) -> Result<f64> {
        if !self.hermitian {
            return Err(Error::NotHermitian);
        }
        let t = x.to_tt();
        Ok(t.inner(&self.apply(&t)?)?.re)
    }

    pub fn dense_matvec(&self, a: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(a.shape())?;
        let v = nalgebra::DVector::from_column_slice(a.data());
        let hv = self.to_dense()? * v;
        DenseTensor::new(a.shape().to_vec(), hv.as_slice().to_vec())
    }
}

fn diagonal_mpo(terms: &[Vec<Matrix>]) -> Vec<MpoCore> {
    let (l, d) = (terms.len(), terms[0].len());
    (0..d)
        .map(|k| {
            let (bl, br) = (if k == 0 { 1 } else { l }, if k == d - 1 { 1 } else { l });
            let mut w = MpoCore::new(bl, br);
            for (t, term) in terms.iter().enumerate() {
                w.set(
                    if bl == 1 { 0 } else { t },
                    if br == 1 { 0 } else { t },
                    term[k].clone(),
                );
            }
            w
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Min,
    Max,
}

/// `±<X, H X>` with Riemannian gradient `±P_X(2 H X)`.
pub struct RayleighObjective<'a> {
    op: &'a KroneckerSumOperator,
    sign: f64,
}

impl<'a> RayleighObjective<'a> {
    pub fn new(op: &'a KroneckerSumOperator, extremum: Extremum) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        Ok(Self {
            op,
            sign: if extremum == Extremum::Min { 1.0 } else { -1.0 },
        })
    }
}

impl Objective for RayleighObjective<'_> {
    fn cost(&self, x: &NttPoint) -> Result<f64> {
        Ok(self.sign * self.op.rayleigh(x)?)
    }

    fn gradient(&self, x: &NttPoint) -> Result<Tangent> {
        Ok(self.cost_and_gradient(x)?.1)
    }

    fn cost_and_gradient(&self, x: &NttPoint) -> Result<(f64, Tangent)> {
        let t = x.to_tt();
        let hx = self.op.apply(&t)?;
        let f = self.sign * t.inner(&hx)?.re;
        let g = x.project(&Ambient::Tt(hx))?.scale(2.0 * self.sign);
        Ok((f, g))
    }

    fn is_quadratic(&self) -> bool {
        true
    }

    /// Positive stationary point of `s -> ±R(X + s V)`, with `R` the
    /// Rayleigh quotient and `V ⟂ X`.
    fn initial_step(&self, x: &NttPoint, v: &Tangent) -> Result<Option<f64>> {
        let t = x.to_tt();
        let vt = x.tangent_to_tt(v)?;
        let hx = self.op.apply(&t)?;
        let a = self.sign * t.inner(&hx)?.re;
        let b = self.sign * vt.inner(&hx)?.re;
        let c = self.sign * vt.inner(&self.op.apply(&vt)?)?.re;
        let w = v.norm().powi(2);
        Ok(rayleigh_line_step(a, b, c, w))
    }
}

/// Positive root of `b w s^2 - (c - a w) s - b = 0`, the stationary point of
/// `(a + 2 b s + c s^2) / (1 + w s^2)` reached first when `b < 0`.
pub fn rayleigh_line_step(a: f64, b: f64, c: f64, w: f64) -> Option<f64> {
    let qa = b * w;
    let qb = -(c - a * w);
    let qc = -b;
    if qa == 0.0 || !(b < 0.0) {
        return None;
    }
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let q = -0.5 * (qb + qb.signum() * disc);
    let roots = [q / qa, if q != 0.0 { qc / q } else { f64::NAN }];
    roots
        .into_iter()
        .filter(|s| s.is_finite() && *s > 0.0)
        .reduce(f64::min)
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub point: NttPoint,
    pub trace: RunTrace,
}

/// NTT-RCG on `±<X, H X>`; `schedule` of length one is a plain run.
pub fn eigen_solve(
    op: &KroneckerSumOperator,
    extremum: Extremum,
    schedule: &[Stage],
    x0: NttPoint,
    cfg: &RcgConfig,
) -> Result<EigenResult> {
    let obj = RayleighObjective::new(op, extremum)?;
    let trace = opt::rank_continuation(&obj, x0, schedule, cfg)?;
    let lambda = op.rayleigh(&trace.point)?;
    Ok(EigenResult {
        lambda,
        point: trace.point.clone(),
        trace,
    })
}

/// Closed-form Laplace eigenpair for 1-based multi-index `idx`:
/// `4 sum_k sin^2(i_k pi / (2 (n + 1)))` with a rank-1 unit eigenvector.
pub fn laplace_reference(d: usize, n: usize, idx: &[usize]) -> Result<(f64, TtTensor)> {
    if idx.len() != d || idx.iter().any(|&i| i == 0 || i > n) {
        return Err(Error::IndexOutOfRange {
            index: idx.to_vec(),
            shape: vec![n; d],
        });
    }
    let h = std::f64::consts::PI / (n as f64 + 1.0);
    let lambda = idx
        .iter()
        .map(|&i| 4.0 * (i as f64 * h / 2.0).sin().powi(2))
        .sum();
    let factors: Vec<Vec<C64>> = idx
        .iter()
        .map(|&i| {
            let v: Vec<f64> = (1..=n).map(|j| (i as f64 * j as f64 * h).sin()).collect();
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| real(x / nrm)).collect()
        })
        .collect();
    Ok((lambda, TtTensor::rank_one(&factors)?))
}

/// `‖x x^† - v v^†‖_F = sqrt(2 - 2 |<x, v>|^2)` for unit `x`, `v`.
pub fn subspace_distance(x: &NttPoint, v: &TtTensor) -> Result<f64> {
    let ip = x.to_tt().inner(v)?;
    Ok((2.0 - 2.0 * ip.norm_sqr()).max(0.0).sqrt())
}

/// Smallest and largest eigenvalue of the dense operator, with eigenvectors.
pub fn dense_extremes(
    op: &KroneckerSumOperator,
) -> Result<((f64, DenseTensor), (f64, DenseTensor))> {
    let (vals, vecs) = linalg::hermitian_eig(&op.to_dense()?);
    let last = vals.len() - 1;
    let col =
        |j: usize| DenseTensor::new(op.dims.clone(), vecs.column(j).iter().copied().collect());
    Ok(((vals[0], col(0)?), (vals[last], col(last)?)))
}

#[derive(Debug, Clone)]
pub struct AlsResult {
    pub lambda: f64,
    pub point: NttPoint,
    /// Rayleigh value after every local solve.
    pub values: Vec<f64>,
}

/// Single-site ALS (one-site DMRG) for the smallest eigenpair: each local
/// problem is the explicitly assembled projected operator, solved densely.
pub fn als_baseline(op: &KroneckerSumOperator, x0: &NttPoint, sweeps: usize) -> Result<AlsResult> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    op.check_shape(&x0.shape())?;
    let d = op.dims.len();
    let mut cores = x0.right_cores().to_vec();
    let unit = |b: usize| vec![Matrix::from_element(1, 1, ONE); b];
    let mut lefts: Vec<Vec<Matrix>> = vec![unit(1); d];
    let mut rights: Vec<Vec<Matrix>> = vec![unit(1); d];
    for k in (0..d - 1).rev() {
        rights[k] = right_env(&rights[k + 1], &cores[k + 1], &op.mpo[k + 1]);
    }
    let mut values = Vec::new();
    for _ in 0..sweeps {
        for k in 0..d {
            let c = local_solve(&lefts[k], &rights[k], &cores[k], &op.mpo[k], &mut values)?;
            if k + 1 < d {
                let (q, r) = linalg::thin_qr(&c.left_unfolding());
                cores[k] = TtCore::from_left_unfolding(&q, c.r_left(), c.n());
                let next = &cores[k + 1];
                cores[k + 1] = TtCore::from_right_unfolding(
                    &(r * next.right_unfolding()),
                    next.n(),
                    next.r_right(),
                );
                lefts[k + 1] = left_env(&lefts[k], &cores[k], &op.mpo[k]);
            } else {
                cores[k] = c;
            }
        }
        for k in (0..d).rev() {
            let c = local_solve(&lefts[k], &rights[k], &cores[k], &op.mpo[k], &mut values)?;
            if k > 0 {
                let (q, r) = linalg::thin_qr(&c.right_unfolding().adjoint());
                cores[k] = TtCore::from_right_unfolding(&q.adjoint(), c.n(), c.r_right());
                let prev = &cores[k - 1];
                cores[k - 1] = TtCore::from_left_unfolding(
                    &(prev.left_unfolding() * r.adjoint()),
                    prev.r_left(),
                    prev.n(),
                );
                rights[k - 1] = right_env(&rights[k], &cores[k], &op.mpo[k]);
            } else {
                cores[k] = c;
            }
        }
    }
    let point = NttPoint::from_tt(&TtTensor::from_cores(cores)?, x0.ranks())?;
    Ok(AlsResult {
        lambda: op.rayleigh(&point)?,
        point,
        values,
    })
}

/// `L'[gamma] = sum_{beta, i, i'} W[beta, gamma](i, i') A(i)^† L[beta] A(i')`.
fn left_env(env: &[Matrix], a: &TtCore, w: &MpoCore) -> Vec<Matrix> {
    let r = a.r_right();
    (0..w.b_right)
        .map(|gamma| {
            let mut acc = Matrix::zeros(r, r);
            for (beta, l) in env.iter().enumerate() {
                if let Some(m) = w.get(beta, gamma) {
                    for i in 0..a.n() {
                        for ip in 0..a.n() {
                            let h = m[(i, ip)];
                            if h != ZERO {
                                acc += a.slice(i).adjoint() * l * a.slice(ip) * h;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

/// `R'[beta] = sum_{gamma, i, i'} W[beta, gamma](i, i') conj(B(i)) R[gamma] B(i')^T`.
fn right_env(env: &[Matrix], b: &TtCore, w: &MpoCore) -> Vec<Matrix> {
    let r = b.r_left();
    (0..w.b_left)
        .map(|beta| {
            let mut acc = Matrix::zeros(r, r);
            for (gamma, rm) in env.iter().enumerate() {
                if let Some(m) = w.get(beta, gamma) {
                    for i in 0..b.n() {
                        for ip in 0..b.n() {
                            let h = m[(i, ip)];
                            if h != ZERO {
                                acc +=
                                    b.slice(i).map(|z| z.conj()) * rm * b.slice(ip).transpose() * h;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

fn local_solve(
    l: &[Matrix],
    r: &[Matrix],
    core: &TtCore,
    w: &MpoCore,
    values: &mut Vec<f64>,
) -> Result<TtCore> {
    let (rl, n, rr) = core.dims();
    let size = rl * n * rr;
    let mut h = Matrix::zeros(size, size);
    for gamma in 0..w.b_right {
        for beta in 0..w.b_left {
            let Some(m) = w.get(beta, gamma) else {
                continue;
            };
            let (lb, rg) = (&l[beta], &r[gamma]);
            for b in 0..rr {
                for bp in 0..rr {
                    let rv = rg[(b, bp)];
                    if rv == ZERO {
                        continue;
                    }
                    for i in 0..n {
                        for ip in 0..n {
                            let mv = m[(i, ip)] * rv;
                            if mv == ZERO {
                                continue;
                            }
                            for a in 0..rl {
                                for ap in 0..rl {
                                    h[(a + rl * (i + n * b), ap + rl * (ip + n * bp))] +=
                                        lb[(a, ap)] * mv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let (vals, vecs) = linalg::hermitian_eig(&h);
    if vals.is_empty() || !vals[0].is_finite() {
        return Err(Error::Eigensolve(
            "local eigensolve produced no finite eigenvalue".into(),
        ));
    }
    values.push(vals[0]);
    TtCore::new(rl, n, rr, vecs.column(0).iter().copied().collect())
}

/// Operator description accepted by the experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorSpec {
    Laplace {
        d: usize,
        n: usize,
    },
    Ising {
        d: usize,
        t: f64,
    },
    /// Terms given as lists of real row-major matrices per site.
    Custom {
        terms: Vec<Vec<Vec<Vec<f64>>>>,
    },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<KroneckerSumOperator> {
        match self {
            OperatorSpec::Laplace { d, n } => KroneckerSumOperator::laplace(*d, *n),
            OperatorSpec::Ising { d, t } => KroneckerSumOperator::ising(*d, *t),
            OperatorSpec::Custom { terms } => {
                let terms = terms
                    .iter()
                    .map(|term| {
                        term.iter()
                            .map(|rows| {
                                let n = rows.len();
                                if rows.iter().any(|row| row.len() != n) {
                                    return Err(Error::DimensionMismatch(
                                        "factor matrices must be square".into(),
                                    ));
                                }
                                Ok(Matrix::from_fn(n, n, |i, j| real(rows[i][j])))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                KroneckerSumOperator::new(terms, true)
            }
        }
    }
}
