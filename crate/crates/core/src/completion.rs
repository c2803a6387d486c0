//! Tensor completion: recover a unit-norm low-rank tensor from a subset of
//! its entries by minimizing `½‖P_Ω(X) - P_Ω(A)‖²` on `N_r`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseTensor};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{self, real, C64};
use crate::manifold::{Ambient, NttPoint, SparseTensor, Tangent};
use crate::opt::{self, Control, IterRecord, Objective, RcgConfig, Termination};
use crate::tt::{TtRank, DEFAULT_FULL_LIMIT};

/// `m` distinct uniformly drawn linear indices.
pub fn sample_omega<R: Rng + ?Sized>(
    shape: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let total = total_entries(shape);
    if m > total {
        return Err(Error::InvalidParameter(format!(
            "cannot sample {m} of {total} entries"
        )));
    }
    Ok(index::sample(rng, total, m)
        .into_iter()
        .map(|lin| dense::multi_index(shape, lin))
        .collect())
}

type Indices = Vec<Vec<usize>>;

/// Disjoint training and test samples: `|Ω| = m`, `|Γ| = min(m, N - m)`.
pub fn sample_split<R: Rng + ?Sized>(
    shape: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<(Indices, Indices)> {
    let total = total_entries(shape);
    if m > total {
        return Err(Error::InvalidParameter(format!(
            "cannot sample {m} of {total} entries"
        )));
    }
    let mut all = sample_omega(shape, m + m.min(total - m), rng)?;
    let test = all.split_off(m);
    Ok((all, test))
}

fn total_entries(shape: &[usize]) -> usize {
    shape.iter().fold(1usize, |a, &n| a.saturating_mul(n))
}

/// Observed entries and an optional held-out set.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub shape: Vec<usize>,
    pub omega: Vec<Vec<usize>>,
    pub values: Vec<C64>,
    pub test: Vec<Vec<usize>>,
    pub test_values: Vec<C64>,
}

impl ObservationSet {
    pub fn new(shape: Vec<usize>, omega: Vec<Vec<usize>>, values: Vec<C64>) -> Result<Self> {
        let obs = Self {
            shape,
            omega,
            values,
            test: Vec::new(),
            test_values: Vec::new(),
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn with_test(mut self, test: Vec<Vec<usize>>, test_values: Vec<C64>) -> Result<Self> {
        self.test = test;
        self.test_values = test_values;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.omega.len() != self.values.len() || self.test.len() != self.test_values.len() {
            return Err(Error::DimensionMismatch(
                "indices and values differ in length".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for idx in &self.omega {
            if idx.len() != self.shape.len() || idx.iter().zip(&self.shape).any(|(&i, &n)| i >= n) {
                return Err(Error::IndexOutOfRange {
                    index: idx.clone(),
                    shape: self.shape.clone(),
                });
            }
            if !seen.insert(idx) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate observed index {idx:?}"
                )));
            }
        }
        for idx in &self.test {
            if seen.contains(idx) {
                return Err(Error::InvalidParameter(format!(
                    "index {idx:?} is both observed and held out"
                )));
            }
        }
        Ok(())
    }

    /// `‖P_Ω(X) - P_Ω(A)‖ / ‖P_Ω(A)‖`.
    pub fn train_error(&self, x: &NttPoint) -> f64 {
        relative_error(&x.to_tt().entries(&self.omega), &self.values)
    }

    /// Same ratio on the held-out set.
    pub fn test_error(&self, x: &NttPoint) -> f64 {
        relative_error(&x.to_tt().entries(&self.test), &self.test_values)
    }
}

fn relative_error(got: &[C64], want: &[C64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// `f(X) = ½‖P_Ω(X) - P_Ω(A)‖²`; Riemannian gradient by the sparse
/// projection of the residual.
pub struct CompletionObjective<'a> {
    obs: &'a ObservationSet,
}

impl<'a> CompletionObjective<'a> {
    pub fn new(obs: &'a ObservationSet) -> Self {
        Self { obs }
    }

    fn residual(&self, x: &NttPoint) -> Vec<C64> {
        let got = x.to_tt().entries(&self.obs.omega);
        got.iter()
            .zip(&self.obs.values)
            .map(|(a, b)| a - b)
            .collect()
    }

    fn project_residual(&self, x: &NttPoint, res: Vec<C64>) -> Result<Tangent> {
        let s = SparseTensor::new(self.obs.shape.clone(), self.obs.omega.clone(), res)?;
        x.project(&Ambient::Sparse(s))
    }
}

fn half_sq(res: &[C64]) -> f64 {
    0.5 * res.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

impl Objective for CompletionObjective<'_> {
    fn cost(&self, x: &NttPoint) -> Result<f64> {
        Ok(half_sq(&self.residual(x)))
    }

    fn gradient(&self, x: &NttPoint) -> Result<Tangent> {
        let res = self.residual(x);
        self.project_residual(x, res)
    }

    fn cost_and_gradient(&self, x: &NttPoint) -> Result<(f64, Tangent)> {
        let res = self.residual(x);
        let f = half_sq(&res);
        Ok((f, self.project_residual(x, res)?))
    }

    fn is_quadratic(&self) -> bool {
        true
    }

    /// `s* = -Re<P_Ω V, P_Ω X - A> / ‖P_Ω V‖²`.
    fn initial_step(&self, x: &NttPoint, v: &Tangent) -> Result<Option<f64>> {
        let pv = x.tangent_to_tt(v)?.entries(&self.obs.omega);
        let res = self.residual(x);
        let num: f64 = pv.iter().zip(&res).map(|(a, b)| (a.conj() * b).re).sum();
        let den: f64 = pv.iter().map(|a| a.norm_sqr()).sum();
        Ok((den > 0.0).then(|| -num / den))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    pub shape: Vec<usize>,
    pub ranks: TtRank,
    /// Number of observed entries.
    pub samples: usize,
    /// Noise level `λ` in `A = Â + λ E / ‖E‖`.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
    /// Success threshold on the test error.
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
}

fn default_success_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub train_error: f64,
    pub test_error: f64,
    pub iterations: usize,
    /// First iteration with test error below the success threshold.
    pub first_success: Option<usize>,
    pub termination: Termination,
    pub records: Vec<IterRecord>,
    pub test_errors: Vec<f64>,
    pub point: NttPoint,
}

impl RecoveryReport {
    pub fn success_within(&self, iters: usize) -> bool {
        self.first_success.is_some_and(|k| k <= iters)
    }
}

/// Builds the instance for `cfg`: ground truth, observations and start point,
/// all drawn from one stream seeded by `cfg.seed`.
pub fn recovery_instance(cfg: &RecoveryConfig) -> Result<(ObservationSet, NttPoint)> {
    let mut g = linalg::rng(cfg.seed);
    let truth = NttPoint::random_real(&cfg.shape, &cfg.ranks, &mut g)?;
    let (omega, test) = sample_split(&cfg.shape, cfg.samples, &mut g)?;
    let tt = truth.to_tt();
    let mut values = tt.entries(&omega);
    let mut test_values = tt.entries(&test);
    if cfg.noise > 0.0 {
        let total = total_entries(&cfg.shape);
        if total <= DEFAULT_FULL_LIMIT {
            let e = DenseTensor::from_fn(&cfg.shape, |_| linalg::real_normal(&mut g));
            let scale = real(cfg.noise / e.norm());
            for (idx, v) in omega
                .iter()
                .zip(values.iter_mut())
                .chain(test.iter().zip(test_values.iter_mut()))
            {
                *v += scale * e.data()[dense::linear_index(&cfg.shape, idx)];
            }
        } else {
            // E is only materialized on the sampled entries; ‖E‖ ≈ sqrt(N).
            let scale = real(cfg.noise / (total as f64).sqrt());
            for v in values.iter_mut().chain(test_values.iter_mut()) {
                *v += scale * linalg::real_normal(&mut g);
            }
        }
    }
    let obs =
        ObservationSet::new(cfg.shape.clone(), omega, values)?.with_test(test, test_values)?;
    let x0 = NttPoint::random_real(&cfg.shape, &cfg.ranks, &mut g)?;
    Ok((obs, x0))
}

pub fn recovery_run(cfg: &RecoveryConfig, rcg: &RcgConfig) -> Result<RecoveryReport> {
    let (obs, x0) = recovery_instance(cfg)?;
    let obj = CompletionObjective::new(&obs);
    let mut test_errors = Vec::new();
    let mut first_success = None;
    let trace = opt::rcg_minimize_with(&obj, x0, rcg, &mut |it, x| {
        let e = obs.test_error(x);
        if e < cfg.success_tol && first_success.is_none() {
            first_success = Some(it);
        }
        test_errors.push(e);
        Control::Continue
    })?;
    Ok(RecoveryReport {
        train_error: obs.train_error(&trace.point),
        test_error: obs.test_error(&trace.point),
        iterations: trace.iterations(),
        first_success,
        termination: trace.termination,
        records: trace.records,
        test_errors,
        point: trace.point,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub order: usize,
    pub rank: usize,
    pub sizes: Vec<usize>,
    pub samples: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Iteration budget for a trial to count as a success.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
}

fn default_budget() -> usize {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub n: usize,
    /// Requested sample count.
    pub m: usize,
    /// Sample count used, capped at the number of entries.
    pub m_used: usize,
    pub successes: usize,
    pub trials: usize,
}

impl PhaseCell {
    pub fn fraction(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }
}

/// Success fractions over the `(n, m)` grid; every trial is an independent
/// job with its own derived seed.
pub fn phase_experiment(cfg: &PhaseConfig, rcg: &RcgConfig, exec: Exec) -> Result<Vec<PhaseCell>> {
    let mut jobs = Vec::new();
    for &n in &cfg.sizes {
        for &m in &cfg.samples {
            for t in 0..cfg.trials {
                jobs.push((n, m, t));
            }
        }
    }
    let rcg = RcgConfig {
        max_iters: cfg.budget,
        ..rcg.clone()
    };
    let outcomes = exec.map(&jobs, |&(n, m, t)| -> Result<bool> {
        let shape = vec![n; cfg.order];
        let run = RecoveryConfig {
            ranks: TtRank::uniform(&shape, cfg.rank),
            samples: m.min(total_entries(&shape)),
            shape,
            noise: 0.0,
            seed: linalg::derive_seed(cfg.seed, &[n as u64, m as u64, t as u64]),
            success_tol: cfg.success_tol,
        };
        Ok(recovery_run(&run, &rcg)?.success_within(cfg.budget))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (chunk, &(n, m, _)) in outcomes
        .chunks(cfg.trials.max(1))
        .zip(jobs.iter().step_by(cfg.trials.max(1)))
    {
        cells.push(PhaseCell {
            n,
            m,
            m_used: m.min(total_entries(&vec![n; cfg.order])),
            successes: chunk.iter().filter(|&&s| s).count(),
            trials: cfg.trials,
        });
    }
    Ok(cells)
}
