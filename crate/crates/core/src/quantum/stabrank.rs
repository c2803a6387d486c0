use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, real, Matrix, C64, ZERO};
use crate::manifold::{self, NttPoint, Tangent};
use crate::opt::{BetaRule, RcgConfig, Termination};
use crate::tt::{TtRank, TtTensor};

use super::sre::sre2_mps;

const RIDGE: f64 = 1e-12;
const SINGULAR_TOL: f64 = 1e-13;

/// `cos(pi/8)|0> + sin(pi/8)|1>`.
pub fn h_state() -> Vec<C64> {
    let t = std::f64::consts::PI / 8.0;
    vec![real(t.cos()), real(t.sin())]
}

/// `|H>^{⊗n}` as a rank-one tensor train.
pub fn h_state_power(n: usize) -> Result<TtTensor> {
    TtTensor::rank_one(&vec![h_state(); n])
}

/// `sum_j c_j phi_j` with unit-norm components on `N_r`.
#[derive(Debug, Clone)]
pub struct StabDecomposition {
    pub coefficients: Vec<C64>,
    pub components: Vec<NttPoint>,
    pub lambda: f64,
}

impl StabDecomposition {
    pub fn to_tt(&self) -> Result<TtTensor> {
        let mut terms = self.components.iter().zip(&self.coefficients);
        let (phi, c) = terms
            .next()
            .ok_or_else(|| Error::InvalidParameter("decomposition has no components".into()))?;
        let mut acc = phi.to_tt().scale(*c);
        for (phi, c) in terms {
            acc = acc.axpy(*c, &phi.to_tt())?;
        }
        Ok(acc)
    }

    pub fn sre(&self) -> Result<Vec<f64>> {
        self.components.iter().map(sre2_mps).collect()
    }
}

fn check_target(target: &TtTensor) -> Result<()> {
    let nrm = target.norm();
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "target must have unit norm, got {nrm}"
        )));
    }
    Ok(())
}

struct Normal {
    gram: Matrix,
    rhs: Vec<C64>,
}

impl Normal {
    fn build(target: &TtTensor, components: &[&TtTensor]) -> Result<Self> {
        let r = components.len();
        let mut gram = Matrix::zeros(r, r);
        for j in 0..r {
            gram[(j, j)] = real(components[j].norm().powi(2));
            for k in j + 1..r {
                let g = components[j].inner(components[k])?;
                gram[(j, k)] = g;
                gram[(k, j)] = g.conj();
            }
        }
        let rhs = components
            .iter()
            .map(|phi| phi.inner(target))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { gram, rhs })
    }

    /// Solves `G c = b`, adding a `1e-12` ridge when `G` is not positive
    /// definite. Returns whether the ridge was needed.
    fn solve(&self) -> (Vec<C64>, bool) {
        let b = nalgebra::DVector::from_column_slice(&self.rhs);
        let n = self.gram.nrows();
        let scale = (0..n).map(|j| self.gram[(j, j)].re).fold(0.0, f64::max);
        if let Some(ch) = self.gram.clone().cholesky() {
            let pivot = (0..n)
                .map(|j| ch.l_dirty()[(j, j)].norm_sqr())
                .fold(f64::INFINITY, f64::min);
            if pivot > SINGULAR_TOL * scale {
                return (ch.solve(&b).iter().copied().collect(), false);
            }
        }
        let reg = &self.gram + Matrix::identity(n, n) * real(RIDGE * (1.0 + self.gram.norm()));
        let c = match reg.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => reg
                .lu()
                .solve(&b)
                .unwrap_or_else(|| nalgebra::DVector::from_element(n, ZERO)),
        };
        (c.iter().copied().collect(), true)
    }

    /// `‖sum c_j phi_j - psi‖^2` for a unit target.
    fn residual(&self, c: &[C64]) -> f64 {
        let cv = nalgebra::DVector::from_column_slice(c);
        let quad = (cv.adjoint() * &self.gram * &cv)[(0, 0)].re;
        let lin = linalg::inner(c, &self.rhs).re;
        (1.0 + quad - 2.0 * lin).max(0.0)
    }
}

/// Least-squares coefficients for fixed components via the Gram system.
/// The flag reports whether a ridge regularization was applied.
pub fn optimal_coefficients(
    target: &TtTensor,
    components: &[NttPoint],
) -> Result<(Vec<C64>, bool)> {
    let tts: Vec<TtTensor> = components.iter().map(|p| p.to_tt()).collect();
    let refs: Vec<&TtTensor> = tts.iter().collect();
    Ok(Normal::build(target, &refs)?.solve())
}

/// `½‖sum c_j phi_j - psi‖^2 + λ sum_j M_2(phi_j)` from Gram inner products.
pub fn stab_rank_cost(target: &TtTensor, dec: &StabDecomposition) -> Result<f64> {
    check_target(target)?;
    if dec.coefficients.len() != dec.components.len() {
        return Err(Error::DimensionMismatch(
            "one coefficient per component required".into(),
        ));
    }
    let tts: Vec<TtTensor> = dec.components.iter().map(|p| p.to_tt()).collect();
    let refs: Vec<&TtTensor> = tts.iter().collect();
    let normal = Normal::build(target, &refs)?;
    let sre: f64 = dec.sre()?.iter().sum();
    Ok(0.5 * normal.residual(&dec.coefficients) + dec.lambda * sre)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabRankConfig {
    /// Number of components `R`.
    pub terms: usize,
    /// Uniform TT rank of each component, capped by the mode sizes.
    pub rank: usize,
    pub lambda: f64,
    /// Optimizer settings for each penalty stage on the product manifold.
    pub rcg: RcgConfig,
    /// Number of warm-up stages with the penalty scaled by `10^-k`,
    /// `k = stages, ..., 1`, before the final stage at `lambda`.
    pub lambda_stages: usize,
    /// Independent random starts; the lowest final cost wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for StabRankConfig {
    fn default() -> Self {
        Self {
            terms: 2,
            rank: 2,
            lambda: 1.0,
            rcg: RcgConfig::default(),
            lambda_stages: 2,
            restarts: 1,
            seed: 0,
        }
    }
}

impl StabRankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.terms == 0 || self.rank == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "terms, rank and restarts must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        self.rcg.validate()
    }

    fn stage_lambdas(&self) -> Vec<f64> {
        (0..=self.lambda_stages)
            .rev()
            .map(|k| self.lambda * 10f64.powi(-(k as i32)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StabRankResult {
    /// `1 - |sum_j conj(c_j) <phi_j, psi>|^2`.
    pub infidelity: f64,
    pub sre: Vec<f64>,
    pub max_sre: f64,
    pub cost: f64,
    /// Cost at every iterate, all stages concatenated.
    pub history: Vec<f64>,
    pub termination: Termination,
    /// Index of the winning restart.
    pub restart: u64,
    pub regularized: bool,
    pub decomposition: StabDecomposition,
}

/// The penalized cost with the coefficients eliminated: at every
/// evaluation `c` is the Gram solution for the current components.
struct Reduced<'a> {
    target: &'a TtTensor,
    lambda: f64,
}

impl Reduced<'_> {
    fn eval(&self, tts: &[&TtTensor], sre: &[f64]) -> Result<(f64, Vec<C64>, bool)> {
        let normal = Normal::build(self.target, tts)?;
        let (c, reg) = normal.solve();
        Ok((
            0.5 * normal.residual(&c) + self.lambda * sre.iter().sum::<f64>(),
            c,
            reg,
        ))
    }

    fn cost(&self, x: &[NttPoint]) -> Result<f64> {
        let tts: Vec<TtTensor> = x.iter().map(|p| p.to_tt()).collect();
        let refs: Vec<&TtTensor> = tts.iter().collect();
        let sre = x.iter().map(sre2_mps).collect::<Result<Vec<_>>>()?;
        Ok(self.eval(&refs, &sre)?.0)
    }

    /// Forward differences over the tangent basis of every component, all
    /// directions evaluated through `exec`.
    fn gradient(&self, x: &[NttPoint], fx: f64, exec: Exec) -> Result<Vec<Tangent>> {
        let t = manifold::default_fd_step(fx);
        let tts: Vec<TtTensor> = x.iter().map(|p| p.to_tt()).collect();
        let sre = x.iter().map(sre2_mps).collect::<Result<Vec<_>>>()?;
        let bases: Vec<Vec<Tangent>> = x.iter().map(|p| p.tangent_basis()).collect();
        let dirs: Vec<(usize, &Tangent)> = bases
            .iter()
            .enumerate()
            .flat_map(|(j, b)| b.iter().map(move |v| (j, v)))
            .collect();
        let diffs = exec.map(&dirs, |&(j, v)| -> Result<f64> {
            let moved = x[j].retract(v, t)?;
            let own = moved.to_tt();
            let refs: Vec<&TtTensor> = tts
                .iter()
                .enumerate()
                .map(|(k, y)| if k == j { &own } else { y })
                .collect();
            let mut s = sre.clone();
            s[j] = sre2_mps(&moved)?;
            let f = self.eval(&refs, &s)?.0;
            if !f.is_finite() {
                return Err(Error::NonFinite);
            }
            Ok((f - fx) / t)
        });
        let mut diffs = diffs.into_iter();
        bases
            .iter()
            .map(|b| {
                let coeffs = diffs.by_ref().take(b.len()).collect::<Result<Vec<_>>>()?;
                Tangent::combine(&coeffs, b)
            })
            .collect()
    }
}

fn dot(a: &[Tangent], b: &[Tangent]) -> Result<f64> {
    a.iter().zip(b).map(|(v, w)| v.dot(w)).sum()
}

fn transport(to: &[NttPoint], from: &[NttPoint], v: &[Tangent]) -> Result<Vec<Tangent>> {
    to.iter()
        .zip(from)
        .zip(v)
        .map(|((y, x), v)| y.transport(x, v))
        .collect()
}

/// Riemannian CG on the product `N_r x ... x N_r` with PR+ or FR updates,
/// Armijo backtracking and the stopping rules of [`RcgConfig`].
fn product_rcg(
    obj: &Reduced,
    mut x: Vec<NttPoint>,
    cfg: &RcgConfig,
    exec: Exec,
    history: &mut Vec<f64>,
) -> Result<(Vec<NttPoint>, Termination)> {
    let ls = &cfg.line_search;
    let mut f = obj.cost(&x)?;
    let mut g = obj.gradient(&x, f, exec)?;
    let mut eta: Vec<Tangent> = g.iter().map(|v| v.scale(-1.0)).collect();
    let mut prev_step: Option<f64> = None;
    let start = history.len();
    for iter in 0..=cfg.max_iters {
        history.push(f);
        let gnorm = dot(&g, &g)?.sqrt();
        let costs = &history[start..];
        if cfg.target_cost.is_some_and(|t| f <= t) {
            return Ok((x, Termination::TargetCost));
        }
        if gnorm <= cfg.grad_tol * f.abs().max(1.0) {
            return Ok((x, Termination::GradTol));
        }
        if costs.len() > cfg.cost_window
            && (costs[costs.len() - 1 - cfg.cost_window] - f).abs()
                <= cfg.cost_tol * f.abs().max(1.0)
        {
            return Ok((x, Termination::CostTol));
        }
        if iter == cfg.max_iters {
            break;
        }
        let mut slope = dot(&g, &eta)?;
        if !(slope < 0.0) {
            eta = g.iter().map(|v| v.scale(-1.0)).collect();
            slope = -gnorm * gnorm;
        }
        let eta_norm = dot(&eta, &eta)?.sqrt();
        let mut s = prev_step.map_or(ls.first_step_length / eta_norm, |p| 2.0 * p);
        let mut accepted = None;
        for _ in 0..=ls.max_backtracks {
            let trial: Result<Vec<NttPoint>> =
                x.iter().zip(&eta).map(|(p, v)| p.retract(v, s)).collect();
            if let Ok(y) = trial {
                if let Ok(fy) = obj.cost(&y) {
                    if fy.is_finite() && fy <= f + ls.c1 * s * slope {
                        accepted = Some((y, fy));
                        break;
                    }
                }
            }
            s *= ls.backtrack;
        }
        let Some((y, fy)) = accepted else {
            return Ok((x, Termination::LineSearchFailed));
        };
        prev_step = Some(s);
        let g_new = obj.gradient(&y, fy, exec)?;
        let g_old = transport(&y, &x, &g)?;
        let eta_old = transport(&y, &x, &eta)?;
        let denom = dot(&g, &g)?;
        let beta = match cfg.beta {
            BetaRule::PrPlus => {
                let diff: Vec<Tangent> = g_new
                    .iter()
                    .zip(&g_old)
                    .map(|(a, b)| a.axpy(-1.0, b))
                    .collect::<Result<_>>()?;
                (dot(&g_new, &diff)? / denom).max(0.0)
            }
            BetaRule::Fr => dot(&g_new, &g_new)? / denom,
            BetaRule::None => 0.0,
        };
        eta = g_new
            .iter()
            .zip(&eta_old)
            .map(|(gn, e)| gn.scale(-1.0).axpy(beta, e))
            .collect::<Result<_>>()?;
        x = y;
        f = fy;
        g = g_new;
    }
    Ok((x, Termination::MaxIters))
}

/// Minimizes `½‖sum c_j phi_j - psi‖^2 + λ sum_j M_2(phi_j)` over the
/// coefficients and the product of `R` copies of `N_r`. The coefficients
/// are eliminated by the Gram solve at every evaluation, so the manifold
/// steps act on the components only. Optional warm-up stages use a reduced
/// penalty. Restarts run through `exec`, each single-threaded; a single
/// restart spreads its finite-difference directions over `exec` instead.
pub fn stab_rank_solve(
    target: &TtTensor,
    cfg: &StabRankConfig,
    exec: Exec,
) -> Result<StabRankResult> {
    check_target(target)?;
    cfg.validate()?;
    let shape = target.shape();
    if shape.iter().any(|&n| n != 2) {
        return Err(Error::InvalidParameter(format!(
            "target must be a qubit state, got shape {shape:?}"
        )));
    }
    let ranks = TtRank::uniform(&shape, cfg.rank);
    let inner = if cfg.restarts > 1 {
        Exec::Sequential
    } else {
        exec
    };
    let runs = exec.map_indices(cfg.restarts, |i| {
        solve_from(target, &shape, &ranks, cfg, i as u64, inner)
    });
    let mut best: Option<StabRankResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn solve_from(
    target: &TtTensor,
    shape: &[usize],
    ranks: &TtRank,
    cfg: &StabRankConfig,
    restart: u64,
    exec: Exec,
) -> Result<StabRankResult> {
    let mut components = (0..cfg.terms)
        .map(|j| {
            NttPoint::random_point(
                shape,
                ranks,
                linalg::derive_seed(cfg.seed, &[restart, j as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut history = Vec::new();
    let mut termination = Termination::MaxIters;
    for lambda in cfg.stage_lambdas() {
        let obj = Reduced { target, lambda };
        (components, termination) = product_rcg(&obj, components, &cfg.rcg, exec, &mut history)?;
    }
    let obj = Reduced {
        target,
        lambda: cfg.lambda,
    };
    let tts: Vec<TtTensor> = components.iter().map(|p| p.to_tt()).collect();
    let refs: Vec<&TtTensor> = tts.iter().collect();
    let sre = components
        .iter()
        .map(sre2_mps)
        .collect::<Result<Vec<_>>>()?;
    let (cost, coefficients, regularized) = obj.eval(&refs, &sre)?;
    let rhs = components
        .iter()
        .map(|p| p.inner_tt(target))
        .collect::<Result<Vec<_>>>()?;
    let overlap = linalg::inner(&coefficients, &rhs);
    let infidelity = (1.0 - overlap.norm_sqr()).max(0.0);
    let max_sre = sre.iter().copied().fold(0.0, f64::max);
    Ok(StabRankResult {
        infidelity,
        max_sre,
        sre,
        cost,
        history,
        termination,
        restart,
        regularized,
        decomposition: StabDecomposition {
            coefficients,
            components,
            lambda: cfg.lambda,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::quantum::sre2_dense;

    #[test]
    fn h_power_sre() {
        let h = h_state_power(3).unwrap();
        let x = NttPoint::from_tt(&h, &TtRank::ones(3)).unwrap();
        assert!((sre2_mps(&x).unwrap() - 3.0 * (2.0 - 3f64.log2())).abs() < 1e-10);
        assert!((sre2_dense(&h.full().unwrap()).unwrap() - sre2_mps(&x).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn cost_matches_dense_evaluation() {
        let target = h_state_power(3).unwrap();
        let ranks = TtRank::new(vec![1, 2, 2, 1]).unwrap();
        let components: Vec<NttPoint> = (0..3)
            .map(|s| NttPoint::random_point(&[2, 2, 2], &ranks, s).unwrap())
            .collect();
        let coefficients = vec![C64::new(0.3, -0.1), C64::new(-0.2, 0.4), C64::new(0.5, 0.0)];
        let dec = StabDecomposition {
            coefficients: coefficients.clone(),
            components: components.clone(),
            lambda: 0.7,
        };
        let dense = dec.to_tt().unwrap().full().unwrap();
        let resid = dense.distance(&target.full().unwrap()).unwrap().powi(2);
        let sre: f64 = components
            .iter()
            .map(|p| sre2_dense(&p.full().unwrap()).unwrap())
            .sum();
        let expected = 0.5 * resid + 0.7 * sre;
        assert!((stab_rank_cost(&target, &dec).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn optimal_coefficients_leave_orthogonal_residual() {
        let target = h_state_power(3).unwrap();
        let ranks = TtRank::new(vec![1, 2, 2, 1]).unwrap();
        let components: Vec<NttPoint> = (0..3)
            .map(|s| NttPoint::random_point(&[2, 2, 2], &ranks, 10 + s).unwrap())
            .collect();
        let (c, reg) = optimal_coefficients(&target, &components).unwrap();
        assert!(!reg);
        let dec = StabDecomposition {
            coefficients: c,
            components: components.clone(),
            lambda: 0.0,
        };
        let residual = dec.to_tt().unwrap().axpy(-ONE, &target).unwrap();
        for p in &components {
            assert!(p.inner_tt(&residual).unwrap().norm() < 1e-10);
        }
        let (_, reg) =
            optimal_coefficients(&target, &[components[0].clone(), components[0].clone()]).unwrap();
        assert!(reg);
    }

    #[test]
    fn stabilizer_target_is_exact_with_one_term() {
        let zero = TtTensor::rank_one(&[vec![ONE, ZERO], vec![ONE, ZERO]]).unwrap();
        let x = NttPoint::from_tt(&zero, &TtRank::ones(2)).unwrap();
        let dec = StabDecomposition {
            coefficients: vec![ONE],
            components: vec![x],
            lambda: 1.0,
        };
        assert!(stab_rank_cost(&zero, &dec).unwrap().abs() < 1e-14);
        let cfg = StabRankConfig {
            terms: 1,
            rank: 1,
            restarts: 8,
            seed: 3,
            ..StabRankConfig::default()
        };
        let res = stab_rank_solve(&zero, &cfg, Exec::Sequential).unwrap();
        assert!(
            res.infidelity <= 1e-8 && res.max_sre <= 1e-8,
            "{} {}",
            res.infidelity,
            res.max_sre
        );
    }
}
