use serde::Serialize;

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, real, Matrix, C64, ONE};
use crate::manifold::NttPoint;
use crate::opt::{self, FdObjective, RcgConfig, RunTrace};
use crate::tt::{TtCore, TtRank};

use super::channel::QuantumChannel;

/// `T_M((alpha, alpha'), (a, a')) = sum conj(U(alpha, s, a)) M(s, s') U(alpha', s', a')`.
fn transfer(u: &TtCore, m: &Matrix) -> Matrix {
    let (rl, n, rr) = u.dims();
    let mu = u.mode_product(m).expect("operator matches the core mode");
    let mut t = Matrix::zeros(rl * rl, rr * rr);
    for s in 0..n {
        for a in 0..rr {
            for ap in 0..rr {
                for al in 0..rl {
                    let left = u.get(al, s, a).conj();
                    for alp in 0..rl {
                        t[(al + rl * alp, a + rr * ap)] += left * mu.get(alp, s, ap);
                    }
                }
            }
        }
    }
    t
}

fn purity_from_cores(channel: &QuantumChannel, cores: &[TtCore]) -> Result<f64> {
    let dim = channel.dim_in();
    if let Some(c) = cores.iter().find(|c| c.n() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {dim}, state has a mode of size {}",
            c.n()
        )));
    }
    let kraus = channel.kraus();
    let products: Vec<Matrix> = kraus
        .iter()
        .flat_map(|ka| kraus.iter().map(move |kb| ka.adjoint() * kb))
        .collect();
    let mut env = Matrix::from_element(1, 1, ONE);
    for u in cores {
        let r2 = u.r_right() * u.r_right();
        let mut next = Matrix::zeros(r2, r2);
        for b in &products {
            let t = transfer(u, b);
            next += t.transpose() * &env * t.conjugate();
        }
        env = next;
    }
    Ok(env[(0, 0)].re)
}

/// `tr(N^{⊗n}(psi psi^†)^2)` for a unit state on `N_r`, contracted site by
/// site without forming the state.
pub fn output_purity(channel: &QuantumChannel, x: &NttPoint) -> Result<f64> {
    purity_from_cores(channel, x.left_cores())
}

/// Reference evaluation on a dense state: builds the `n`-fold Kraus
/// products and the output density matrix explicitly.
pub fn output_purity_dense(channel: &QuantumChannel, psi: &DenseTensor) -> Result<f64> {
    let n = psi.order();
    if psi.shape().iter().any(|&s| s != channel.dim_in()) {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {}, state has shape {:?}",
            channel.dim_in(),
            psi.shape()
        )));
    }
    let entries = channel.dim_out().pow(n as u32).max(psi.len());
    if entries > 4096 {
        return Err(Error::SizeGuard {
            entries,
            limit: 4096,
        });
    }
    let v = nalgebra::DVector::from_column_slice(psi.data());
    let v = &v / real(v.norm());
    let rho = &v * v.adjoint();
    let out = channel.tensor_power(n).apply(&rho)?;
    Ok((&out * &out).trace().re)
}

/// Output Rényi-2 entropy `-log2 tr(N^{⊗n}(rho)^2)` in bits.
pub fn renyi2_entropy(channel: &QuantumChannel, x: &NttPoint) -> Result<f64> {
    Ok(entropy_bits(output_purity(channel, x)?))
}

/// Purity never exceeds one; rounding above it is clamped to zero entropy.
fn entropy_bits(purity: f64) -> f64 {
    (-purity.log2()).max(0.0)
}

/// The output-entropy cost with forward-difference gradients.
pub fn renyi2_cost(
    channel: &QuantumChannel,
    exec: Exec,
) -> FdObjective<impl Fn(&NttPoint) -> Result<f64> + Sync + '_> {
    FdObjective::new(move |x: &NttPoint| renyi2_entropy(channel, x), exec)
}

#[derive(Debug, Clone)]
pub struct ChannelRun {
    pub seed: u64,
    pub entropy: f64,
    pub trace: RunTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinEntropyResult {
    pub n: usize,
    pub ranks: TtRank,
    /// Best output entropy over restarts, in bits.
    pub entropy: f64,
    pub per_site: f64,
    #[serde(skip)]
    pub runs: Vec<ChannelRun>,
}

/// Minimizes the output entropy of `N^{⊗n}` over `N_r` with `r` the uniform
/// rank `r` capped by the mode sizes, from `restarts` seeded random starts.
/// Restarts run through `exec`; each run is single-threaded.
pub fn min_output_entropy(
    channel: &QuantumChannel,
    n: usize,
    r: usize,
    cfg: &RcgConfig,
    restarts: usize,
    seed: u64,
    exec: Exec,
) -> Result<MinEntropyResult> {
    if n == 0 || r == 0 || restarts == 0 {
        return Err(Error::InvalidParameter(
            "n, r and restarts must be positive".into(),
        ));
    }
    cfg.validate()?;
    let shape = vec![channel.dim_in(); n];
    let ranks = TtRank::uniform(&shape, r);
    let obj = renyi2_cost(channel, Exec::Sequential);
    let runs = exec.map_indices(restarts, |i| -> Result<ChannelRun> {
        let s = linalg::derive_seed(seed, &[i as u64]);
        let x0 = NttPoint::random_point(&shape, &ranks, s)?;
        let trace = opt::rcg_minimize(&obj, x0, cfg)?;
        Ok(ChannelRun {
            seed: s,
            entropy: trace.final_cost(),
            trace,
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let entropy = runs.iter().map(|r| r.entropy).fold(f64::INFINITY, f64::min);
    Ok(MinEntropyResult {
        n,
        ranks,
        entropy,
        per_site: entropy / n as f64,
        runs,
    })
}

/// Single-site minimum output entropy by direct search over pure states.
/// Qubits use a Bloch-sphere grid with repeated zooming around the best
/// cell; larger dimensions use seeded random sampling followed by shrinking
/// random perturbations.
pub fn dense_min_output_entropy(
    channel: &QuantumChannel,
    resolution: usize,
    seed: u64,
) -> Result<f64> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(
            "resolution must be at least 2".into(),
        ));
    }
    let dim = channel.dim_in();
    let entropy = |v: &[C64]| -> Result<f64> {
        let psi = DenseTensor::new(vec![dim], v.to_vec())?;
        Ok(entropy_bits(output_purity_dense(channel, &psi)?))
    };
    if dim == 1 {
        return entropy(&[ONE]);
    }
    if dim == 2 {
        let bloch = |theta: f64, phi: f64| {
            [
                real((theta / 2.0).cos()),
                C64::from_polar((theta / 2.0).sin(), phi),
            ]
        };
        let (mut theta0, mut phi0) = (0.0, 0.0);
        let (mut dtheta, mut dphi) = (std::f64::consts::PI, std::f64::consts::PI);
        let mut best = f64::INFINITY;
        for _ in 0..40 {
            let (mut bt, mut bp) = (theta0, phi0);
            for i in 0..=resolution {
                let theta = (theta0 + dtheta * (2.0 * i as f64 / resolution as f64 - 1.0))
                    .clamp(0.0, std::f64::consts::PI);
                for j in 0..=resolution {
                    let phi = phi0 + dphi * (2.0 * j as f64 / resolution as f64 - 1.0);
                    let f = entropy(&bloch(theta, phi))?;
                    if f < best {
                        best = f;
                        bt = theta;
                        bp = phi;
                    }
                }
            }
            theta0 = bt;
            phi0 = bp;
            dtheta *= 4.0 / resolution as f64;
            dphi *= 4.0 / resolution as f64;
        }
        return Ok(best);
    }
    let mut g = linalg::rng(seed);
    let normalize = |v: Vec<C64>| -> Vec<C64> {
        let s = linalg::norm(&v);
        v.into_iter().map(|z| z / s).collect()
    };
    let mut best_v = vec![ONE; dim];
    let mut best = f64::INFINITY;
    for _ in 0..resolution * resolution {
        let v = normalize((0..dim).map(|_| linalg::complex_normal(&mut g)).collect());
        let f = entropy(&v)?;
        if f < best {
            best = f;
            best_v = v;
        }
    }
    let mut radius = 0.5;
    while radius > 1e-9 {
        let mut improved = false;
        for _ in 0..8 * dim {
            let v = normalize(
                best_v
                    .iter()
                    .map(|z| z + radius * linalg::complex_normal(&mut g))
                    .collect(),
            );
            let f = entropy(&v)?;
            if f < best {
                best = f;
                best_v = v;
                improved = true;
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
    Ok(best)
}
