//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent sub-job identified by `path` under `base`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Standard complex Gaussian: real and imaginary parts i.i.d. N(0, 1/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn real_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    real(rng.sample(StandardNormal))
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Truncated SVD keeping the leading `r` singular triplets.
pub struct TruncatedSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v_t: Matrix,
    /// All singular values of the input, descending.
    pub spectrum: Vec<f64>,
}

pub fn svd_truncated(m: &Matrix, r: usize) -> Result<TruncatedSvd> {
    let k = m.nrows().min(m.ncols());
    if r > k || r == 0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot keep {r} singular values of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let (u, spectrum, v) = svd(m);
    Ok(TruncatedSvd {
        u: u.columns(0, r).into_owned(),
        s: spectrum[..r].to_vec(),
        v_t: v.columns(0, r).adjoint(),
        spectrum,
    })
}

const JACOBI_SWEEPS: usize = 80;

/// Thin SVD `m = u diag(s) v^†` by one-sided Jacobi rotations, `s`
/// descending. `u` and `v` have orthonormal columns even when `m` is rank
/// deficient: directions of exactly zero singular values are completed
/// deterministically.
pub fn svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if m.nrows() < m.ncols() {
        let (u, s, v) = svd(&m.adjoint());
        return (v, s, u);
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase;
                        mat[(i, p)] = xp * c - xq * s;
                        mat[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = Matrix::zeros(m.nrows(), n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            u.set_column(k, &(a.column(j) / real(norms[j])));
            filled += 1;
        }
    }
    complete_columns(&mut u, filled);
    let v = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    (u, s, v)
}

/// Fills columns `filled..` of `u` so that all columns are orthonormal,
/// assuming the first `filled` already are. Candidates are the standard
/// basis vectors, orthogonalized twice.
fn complete_columns(u: &mut Matrix, mut filled: usize) {
    let rows = u.nrows();
    for e in 0..rows {
        if filled == u.ncols() {
            return;
        }
        let mut w = Matrix::zeros(rows, 1);
        w[(e, 0)] = ONE;
        for _ in 0..2 {
            for j in 0..filled {
                let proj = u.column(j).dotc(&w.column(0));
                w.column_mut(0).axpy(-proj, &u.column(j), ONE);
            }
        }
        let nrm = w.norm();
        if nrm > 0.5 {
            u.set_column(filled, &(w.column(0) / real(nrm)));
            filled += 1;
        }
    }
}

/// Thin QR: `m = q * r` with `q` having orthonormal columns.
pub fn thin_qr(m: &Matrix) -> (Matrix, Matrix) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(m: &Matrix) -> (Vec<f64>, Matrix) {
    let h = (m + m.adjoint()) * real(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(m.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    (values, vectors)
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `q`, which must have orthonormal columns.
pub fn orthonormal_complement(q: &Matrix) -> Matrix {
    let (m, r) = q.shape();
    if r >= m {
        return Matrix::zeros(m, 0);
    }
    let mut u = Matrix::zeros(m, m);
    u.columns_mut(0, r).copy_from(q);
    complete_columns(&mut u, r);
    u.columns(r, m - r).into_owned()
}

/// Frobenius inner product `<a, b> = sum conj(a) b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
