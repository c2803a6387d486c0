//! Riemannian conjugate gradients on `N_r` with an Armijo line search and
//! rank continuation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg;
use crate::manifold::{self, Ambient, NttPoint, Tangent};
use crate::tt::{TtRank, TtTensor};

/// A smooth cost on `N_r` with its Riemannian gradient.
pub trait Objective: Sync {
    fn cost(&self, x: &NttPoint) -> Result<f64>;

    /// Riemannian gradient, a tangent vector at `x`.
    fn gradient(&self, x: &NttPoint) -> Result<Tangent>;

    fn cost_and_gradient(&self, x: &NttPoint) -> Result<(f64, Tangent)> {
        Ok((self.cost(x)?, self.gradient(x)?))
    }

    /// Whether [`Objective::initial_step`] provides an exact model step.
    fn is_quadratic(&self) -> bool {
        false
    }

    /// Minimizer of the one-dimensional model `s -> f(X + s V)`.
    fn initial_step(&self, _x: &NttPoint, _v: &Tangent) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Objective whose gradient is the forward-difference gradient over the
/// tangent basis.
pub struct FdObjective<F> {
    f: F,
    step: Option<f64>,
    exec: Exec,
}

impl<F> FdObjective<F>
where
    F: Fn(&NttPoint) -> Result<f64> + Sync,
{
    /// Uses the step `1e-5 * max(1, |f(X)|)`.
    pub fn new(f: F, exec: Exec) -> Self {
        Self {
            f,
            step: None,
            exec,
        }
    }

    pub fn with_step(f: F, step: f64, exec: Exec) -> Self {
        Self {
            f,
            step: Some(step),
            exec,
        }
    }
}

impl<F> Objective for FdObjective<F>
where
    F: Fn(&NttPoint) -> Result<f64> + Sync,
{
    fn cost(&self, x: &NttPoint) -> Result<f64> {
        (self.f)(x)
    }

    fn gradient(&self, x: &NttPoint) -> Result<Tangent> {
        let t = match self.step {
            Some(t) => t,
            None => manifold::default_fd_step((self.f)(x)?),
        };
        manifold::fd_gradient(x, &self.f, t, self.exec)
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn cost(&self, x: &NttPoint) -> Result<f64> {
        (**self).cost(x)
    }
    fn gradient(&self, x: &NttPoint) -> Result<Tangent> {
        (**self).gradient(x)
    }
    fn cost_and_gradient(&self, x: &NttPoint) -> Result<(f64, Tangent)> {
        (**self).cost_and_gradient(x)
    }
    fn is_quadratic(&self) -> bool {
        (**self).is_quadratic()
    }
    fn initial_step(&self, x: &NttPoint, v: &Tangent) -> Result<Option<f64>> {
        (**self).initial_step(x, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaRule {
    /// Polak-Ribiere, clipped at zero.
    #[serde(rename = "pr+")]
    PrPlus,
    /// Fletcher-Reeves.
    Fr,
    /// Steepest descent.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialStep {
    /// Exact model step for quadratic objectives, otherwise twice the last
    /// accepted step.
    Model,
    /// Always twice the last accepted step.
    Previous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchConfig {
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub initial_step: InitialStep,
    /// Length `s * ‖V‖` of the very first trial step when no model is used.
    pub first_step_length: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 25,
            initial_step: InitialStep::Model,
            first_step_length: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcgConfig {
    pub max_iters: usize,
    /// Stop when `‖grad‖ ≤ grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Stop when the relative cost change over `cost_window` iterations is
    /// at most this.
    pub cost_tol: f64,
    pub cost_window: usize,
    /// Stop as soon as the cost drops to this value.
    pub target_cost: Option<f64>,
    pub beta: BetaRule,
    pub line_search: LineSearchConfig,
}

impl Default for RcgConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-10,
            cost_tol: 1e-14,
            cost_window: 5,
            target_cost: None,
            beta: BetaRule::PrPlus,
            line_search: LineSearchConfig::default(),
        }
    }
}

impl RcgConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.grad_tol > 0.0) || !(self.cost_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(ls.c1 > 0.0 && ls.c1 < 1.0) {
            return bad("armijo constant must lie in (0, 1)");
        }
        if !(ls.backtrack > 0.0 && ls.backtrack < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(ls.first_step_length > 0.0) {
            return bad("first step length must be positive");
        }
        if self.cost_window == 0 {
            return bad("cost window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub stage: usize,
    pub cost: f64,
    pub grad_norm: f64,
    /// Step accepted after this iterate (0 for the final record).
    pub step: f64,
    pub beta: f64,
    pub time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradTol,
    CostTol,
    TargetCost,
    MaxIters,
    LineSearchFailed,
    Stopped,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::GradTol => "grad-tol",
            Termination::CostTol => "cost-tol",
            Termination::TargetCost => "target-cost",
            Termination::MaxIters => "max-iters",
            Termination::LineSearchFailed => "line-search-failed",
            Termination::Stopped => "stopped",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub point: NttPoint,
    pub termination: Termination,
}

impl RunTrace {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }
}

/// Verdict of an observer called after every iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Armijo backtracking along the retraction. Returns the accepted step, the
/// new point and its cost.
pub fn line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &NttPoint,
    fx: f64,
    v: &Tangent,
    slope: f64,
    s0: f64,
    cfg: &LineSearchConfig,
) -> Result<(f64, NttPoint, f64)> {
    if !(slope < 0.0) {
        return Err(Error::InvalidParameter(
            "line search needs a descent direction".into(),
        ));
    }
    let mut s = s0;
    for _ in 0..=cfg.max_backtracks {
        // Rank collapse and non-finite costs count as rejected trials.
        if let Ok(y) = x.retract(v, s) {
            if let Ok(fy) = obj.cost(&y) {
                if fy.is_finite() && fy <= fx + cfg.c1 * s * slope {
                    return Ok((s, y, fy));
                }
            }
        }
        s *= cfg.backtrack;
    }
    Err(Error::LineSearchFailed(cfg.max_backtracks))
}

/// First trial step: the objective's model step when available, else twice
/// the previous accepted step.
fn trial_step<O: Objective + ?Sized>(
    obj: &O,
    x: &NttPoint,
    v: &Tangent,
    prev: Option<f64>,
    cfg: &LineSearchConfig,
) -> Result<f64> {
    if cfg.initial_step == InitialStep::Model && obj.is_quadratic() {
        if let Some(s) = obj.initial_step(x, v)? {
            if s.is_finite() && s > 0.0 {
                return Ok(s);
            }
        }
    }
    Ok(match prev {
        Some(p) => 2.0 * p,
        None => cfg.first_step_length / v.norm().max(f64::MIN_POSITIVE),
    })
}

pub fn rcg_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: NttPoint,
    cfg: &RcgConfig,
) -> Result<RunTrace> {
    rcg_minimize_with(obj, x0, cfg, &mut |_, _| Control::Continue)
}

/// RCG with an observer that sees every iterate (including the start) and
/// may stop the run.
pub fn rcg_minimize_with<O: Objective + ?Sized>(
    obj: &O,
    x0: NttPoint,
    cfg: &RcgConfig,
    observer: &mut dyn FnMut(usize, &NttPoint) -> Control,
) -> Result<RunTrace> {
    run_stage(obj, x0, cfg, 0, 0, observer)
}

fn run_stage<O: Objective + ?Sized>(
    obj: &O,
    x0: NttPoint,
    cfg: &RcgConfig,
    stage: usize,
    iter_offset: usize,
    observer: &mut dyn FnMut(usize, &NttPoint) -> Control,
) -> Result<RunTrace> {
    cfg.validate()?;
    let start = Instant::now();
    let mut x = x0;
    let (mut f, mut g) = obj.cost_and_gradient(&x)?;
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut v = g.scale(-1.0);
    let mut beta = 0.0;
    let mut prev_step = None;
    let mut records = Vec::new();
    let mut costs = vec![f];
    let mut it = 0;
    let termination = loop {
        let gnorm = g.norm();
        let mut record = IterRecord {
            iter: iter_offset + it,
            stage,
            cost: f,
            grad_norm: gnorm,
            step: 0.0,
            beta,
            time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        let verdict = observer(iter_offset + it, &x);
        let stop = if gnorm <= cfg.grad_tol * f.abs().max(1.0) {
            Some(Termination::GradTol)
        } else if cfg.target_cost.is_some_and(|t| f <= t) {
            Some(Termination::TargetCost)
        } else if costs.len() > cfg.cost_window && {
            let old = costs[costs.len() - 1 - cfg.cost_window];
            (old - f).abs() <= cfg.cost_tol * f.abs().max(1.0)
        } {
            Some(Termination::CostTol)
        } else if verdict == Control::Stop {
            Some(Termination::Stopped)
        } else if it >= cfg.max_iters {
            Some(Termination::MaxIters)
        } else {
            None
        };
        if let Some(reason) = stop {
            records.push(record);
            break reason;
        }

        let mut slope = g.dot(&v)?;
        let mut steepest = beta == 0.0;
        if !(slope < -1e-14 * gnorm * v.norm()) {
            v = g.scale(-1.0);
            slope = -gnorm * gnorm;
            steepest = true;
            record.beta = 0.0;
        }
        let s0 = trial_step(obj, &x, &v, prev_step, &cfg.line_search)?;
        let accepted = match line_search(obj, &x, f, &v, slope, s0, &cfg.line_search) {
            Ok(ok) => Some(ok),
            Err(Error::LineSearchFailed(_)) if !steepest => {
                v = g.scale(-1.0);
                slope = -gnorm * gnorm;
                record.beta = 0.0;
                let s0 = trial_step(obj, &x, &v, None, &cfg.line_search)?;
                line_search(obj, &x, f, &v, slope, s0, &cfg.line_search).ok()
            }
            Err(Error::LineSearchFailed(_)) => None,
            Err(e) => return Err(e),
        };
        let Some((s, y, _)) = accepted else {
            records.push(record);
            break Termination::LineSearchFailed;
        };
        record.step = s;
        records.push(record);
        prev_step = Some(s);

        let (fy, gy) = obj.cost_and_gradient(&y)?;
        let g_old = y.transport(&x, &g)?;
        let v_old = y.transport(&x, &v)?;
        let gg = gnorm * gnorm;
        beta = match cfg.beta {
            BetaRule::None => 0.0,
            BetaRule::Fr => gy.dot(&gy)? / gg,
            BetaRule::PrPlus => (gy.dot(&gy)? - gy.dot(&g_old)?).max(0.0) / gg,
        };
        v = gy.scale(-1.0).axpy(beta, &v_old)?;
        x = y;
        f = fy;
        g = gy;
        costs.push(f);
        it += 1;
    };
    Ok(RunTrace {
        records,
        point: x,
        termination,
    })
}

/// One stage of a rank-continuation schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub ranks: TtRank,
    pub iters: usize,
}

/// Stages `(1, r, ..., r, 1)` for each `r` in `ranks`, clamped to the shape,
/// consecutive duplicates removed.
pub fn uniform_schedule(shape: &[usize], ranks: &[usize], iters: usize) -> Vec<Stage> {
    let mut out: Vec<Stage> = Vec::new();
    for &r in ranks {
        let rk = TtRank::uniform(shape, r);
        if out.last().is_none_or(|s| s.ranks != rk) {
            out.push(Stage { ranks: rk, iters });
        }
    }
    out
}

/// Runs RCG per stage, warm-starting each stage by padding the previous
/// point to the new ranks. The last stage runs to the limits of `cfg`.
pub fn rank_continuation<O: Objective + ?Sized>(
    obj: &O,
    x0: NttPoint,
    schedule: &[Stage],
    cfg: &RcgConfig,
) -> Result<RunTrace> {
    rank_continuation_with(obj, x0, schedule, cfg, &mut |_, _| Control::Continue)
}

/// Relative size of the step that moves a padded warm start off the
/// rank-deficient boundary.
const PADDING_ESCAPE: f64 = 1e-6;

/// A padded point has zero singular values, and a gradient step that does
/// not excite every new direction cannot be retracted at the new ranks.
/// A tiny step along a fixed pseudo-random real tangent fills them.
fn leave_padding(x: NttPoint, stage: usize) -> Result<NttPoint> {
    let mut g = linalg::rng(linalg::derive_seed(0x7061_6464, &[stage as u64]));
    let z = TtTensor::random_real(&x.shape(), x.ranks(), &mut g)?;
    let v = x.project(&Ambient::Tt(z))?;
    let nrm = v.norm();
    if nrm == 0.0 {
        return Ok(x);
    }
    Ok(x.retract(&v, PADDING_ESCAPE / nrm).unwrap_or(x))
}

pub fn rank_continuation_with<O: Objective + ?Sized>(
    obj: &O,
    x0: NttPoint,
    schedule: &[Stage],
    cfg: &RcgConfig,
    observer: &mut dyn FnMut(usize, &NttPoint) -> Control,
) -> Result<RunTrace> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty rank schedule".into()));
    }
    let shape = x0.shape();
    for st in schedule {
        st.ranks.check_feasible(&shape)?;
    }
    let mut x = x0;
    let mut records = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut offset = 0;
    for (k, st) in schedule.iter().enumerate() {
        if x.ranks() != &st.ranks {
            x = leave_padding(x.pad_to(&st.ranks)?, k)?;
        }
        let last = k + 1 == schedule.len();
        let stage_cfg = RcgConfig {
            max_iters: if last { cfg.max_iters } else { st.iters },
            ..cfg.clone()
        };
        let trace = run_stage(obj, x, &stage_cfg, k, offset, observer)?;
        offset = trace.records.last().map_or(offset, |r| r.iter);
        records.extend(trace.records);
        x = trace.point;
        termination = trace.termination;
    }
    Ok(RunTrace {
        records,
        point: x,
        termination,
    })
}
