use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64, ONE};
use crate::manifold::NttPoint;
use crate::tt::{TtCore, TtTensor};

use super::pauli::Pauli;

const MAX_DENSE_QUBITS: usize = 12;
const NORM_TOL: f64 = 1e-10;

fn check_qubits(shape: &[usize]) -> Result<()> {
    if shape.iter().any(|&n| n != 2) {
        return Err(Error::InvalidParameter(format!(
            "stabilizer entropy needs qubit modes, got shape {shape:?}"
        )));
    }
    Ok(())
}

fn walsh_hadamard(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Stabilizer Rényi-2 entropy `-log2(sum_P <P>^4) + n` of a dense unit
/// state. Pauli strings are enumerated as `X^a Z^b`, whose expectations
/// differ from the Hermitian strings only by phases.
pub fn sre2_dense(psi: &DenseTensor) -> Result<f64> {
    check_qubits(psi.shape())?;
    let n = psi.order();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::SizeGuard {
            entries: 1 << (2 * n),
            limit: 1 << (2 * MAX_DENSE_QUBITS),
        });
    }
    let nrm = psi.norm();
    if (nrm - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidParameter(format!(
            "state must have unit norm, got {nrm}"
        )));
    }
    let data = psi.data();
    let size = data.len();
    let mut total = 0.0;
    let mut buf = vec![C64::default(); size];
    for a in 0..size {
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = data[j ^ a].conj() * data[j];
        }
        walsh_hadamard(&mut buf);
        total += buf.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>();
    }
    Ok(-total.log2() + n as f64)
}

/// `T_sigma((alpha, alpha'), (a, a')) = sum conj(U(alpha, s, a)) sigma(s, s') U(alpha', s', a')`.
fn pauli_transfer(u: &TtCore, sigma: &Matrix) -> Matrix {
    let (rl, n, rr) = u.dims();
    let mut t = Matrix::zeros(rl * rl, rr * rr);
    for s in 0..n {
        for sp in 0..n {
            let m = sigma[(s, sp)];
            if m == C64::default() {
                continue;
            }
            for a in 0..rr {
                for ap in 0..rr {
                    for al in 0..rl {
                        let left = u.get(al, s, a).conj() * m;
                        for alp in 0..rl {
                            t[(al + rl * alp, a + rr * ap)] += left * u.get(alp, sp, ap);
                        }
                    }
                }
            }
        }
    }
    t
}

/// `sum_P <psi|P|psi>^4` for a qubit tensor train, contracted site by site
/// with a four-copy environment of size `r^8`.
pub fn pauli_fourth_moment(cores: &[TtCore]) -> Result<f64> {
    let shape: Vec<usize> = cores.iter().map(|c| c.n()).collect();
    check_qubits(&shape)?;
    let mut env = DenseTensor::new(vec![1, 1, 1, 1], vec![ONE])?;
    for u in cores {
        let mut next: Option<DenseTensor> = None;
        for p in Pauli::ALL {
            let tt = pauli_transfer(u, &p.matrix()).transpose();
            let mut e = env.clone();
            for leg in 0..4 {
                e = e.mode_product(&tt, leg)?;
            }
            next = Some(match next {
                None => e,
                Some(acc) => acc.axpy(ONE, &e)?,
            });
        }
        env = next.expect("four Pauli terms");
    }
    Ok(env.data()[0].re)
}

/// Stabilizer Rényi-2 entropy of a point of `N_r` over qubit modes.
pub fn sre2_mps(x: &NttPoint) -> Result<f64> {
    Ok(-pauli_fourth_moment(x.left_cores())?.log2() + x.order() as f64)
}

/// Same for a general TT tensor, which must have unit norm.
pub fn sre2_tt(x: &TtTensor) -> Result<f64> {
    let nrm = x.norm();
    if (nrm - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidParameter(format!(
            "state must have unit norm, got {nrm}"
        )));
    }
    Ok(-pauli_fourth_moment(x.cores())?.log2() + x.order() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real;
    use crate::quantum::PauliString;
    use crate::tt::TtRank;

    fn brute_force(psi: &DenseTensor) -> f64 {
        let v = nalgebra::DVector::from_column_slice(psi.data());
        let total: f64 = PauliString::all(psi.order())
            .map(|p| (v.adjoint() * p.matrix() * &v)[(0, 0)].re.powi(4))
            .sum();
        -total.log2() + psi.order() as f64
    }

    fn h_vec() -> Vec<C64> {
        let t = std::f64::consts::PI / 8.0;
        vec![real(t.cos()), real(t.sin())]
    }

    #[test]
    fn known_values() {
        let zero = DenseTensor::outer(&vec![vec![ONE, C64::default()]; 3]);
        assert!(sre2_dense(&zero).unwrap().abs() < 1e-12);
        let h = DenseTensor::outer(&[h_vec()]);
        let expected = 2.0 - 3f64.log2();
        assert!((sre2_dense(&h).unwrap() - expected).abs() < 1e-12);
        let h2 = DenseTensor::outer(&[h_vec(), h_vec()]);
        assert!((sre2_dense(&h2).unwrap() - 2.0 * expected).abs() < 1e-12);
        assert!(sre2_dense(&h2.scale(real(2.0))).is_err());
    }

    #[test]
    fn phase_conventions_agree() {
        let psi = NttPoint::random_point(&[2, 2], &TtRank::new(vec![1, 2, 1]).unwrap(), 1).unwrap();
        let dense = psi.full().unwrap();
        assert!((sre2_dense(&dense).unwrap() - brute_force(&dense)).abs() < 1e-12);
    }

    #[test]
    fn transfer_contraction_matches_dense() {
        let r = TtRank::new(vec![1, 2, 2, 1]).unwrap();
        for seed in 0..5 {
            let x = NttPoint::random_point(&[2, 2, 2], &r, seed).unwrap();
            let a = sre2_mps(&x).unwrap();
            let b = sre2_dense(&x.full().unwrap()).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} {b}");
            assert!(a >= -1e-12);
            assert!((sre2_mps(&x.with_phase(0.4)).unwrap() - a).abs() < 1e-10);
        }
    }
}
