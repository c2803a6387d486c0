//! Experiment drivers. Each returns its results table, per-run traces and
//! a few headline values; independent runs are spread over `exec` and
//! collected in config order, so output does not depend on `--jobs`.

use std::collections::BTreeMap;

use log::{debug, info};
use nttkit::completion::{self, PhaseConfig, RecoveryConfig};
use nttkit::eigen::{self, Extremum, KroneckerSumOperator};
use nttkit::linalg;
use nttkit::opt::{self, Stage};
use nttkit::quantum::{self, StabRankConfig};
use nttkit::{Exec, NttPoint, TtRank};

use crate::config::{
    Complete, EigenIsing, EigenLaplace, Experiment, Phase, Renyi, Stabrank, Which,
};
use crate::output::{num, Table};

#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Table,
    /// Extra tables keyed by relative path (traces, timings).
    pub files: Vec<(String, Table)>,
    pub headline: BTreeMap<String, String>,
    /// First failure; rows before it are kept.
    pub error: Option<String>,
}

impl Outcome {
    fn new(header: &[&'static str]) -> Self {
        Self {
            results: Table::new(header),
            ..Self::default()
        }
    }

    fn fail(&mut self, e: impl std::fmt::Display) {
        if self.error.is_none() {
            self.error = Some(e.to_string());
        }
    }
}

pub fn run(experiment: &Experiment, exec: Exec) -> Outcome {
    match experiment {
        Experiment::Complete(c) => complete(c, exec),
        Experiment::Phase(c) => phase(c, exec),
        Experiment::EigenLaplace(c) => eigen_laplace(c, exec),
        Experiment::EigenIsing(c) => eigen_ising(c, exec),
        Experiment::Stabrank(c) => stabrank(c, exec),
        Experiment::Renyi(c) => renyi(c, exec),
    }
}

fn complete(c: &Complete, exec: Exec) -> Outcome {
    let mut out = Outcome::new(&[
        "noise",
        "seed",
        "samples",
        "iterations",
        "first_success",
        "train_error",
        "test_error",
        "success",
        "termination",
    ]);
    let jobs: Vec<(usize, u64)> = (0..c.noise.len())
        .flat_map(|i| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let ranks = TtRank::new(c.ranks.clone()).expect("validated ranks");
    let runs = exec.map(&jobs, |&(i, seed)| {
        let cfg = RecoveryConfig {
            shape: c.shape.clone(),
            ranks: ranks.clone(),
            samples: c.samples,
            noise: c.noise[i],
            seed,
            success_tol: c.success_tol,
        };
        completion::recovery_run(&cfg, &c.optimizer)
    });
    let mut successes = 0;
    for (&(i, seed), run) in jobs.iter().zip(runs) {
        let r = match run {
            Ok(r) => r,
            Err(e) => {
                out.fail(format!("noise {} seed {seed}: {e}", c.noise[i]));
                break;
            }
        };
        let success = r.first_success.is_some();
        successes += success as usize;
        debug!(
            "complete noise={} seed={seed} test_error={:e}",
            c.noise[i], r.test_error
        );
        out.results.push(vec![
            num(c.noise[i]),
            seed.to_string(),
            c.samples.to_string(),
            r.iterations.to_string(),
            r.first_success.map_or(String::new(), |k| k.to_string()),
            num(r.train_error),
            num(r.test_error),
            success.to_string(),
            r.termination.to_string(),
        ]);
        out.files.push((
            format!("traces/noise{i}_seed{seed}.csv"),
            Table::trace(&r.records, Some(("test_error", &r.test_errors))),
        ));
    }
    out.headline.insert(
        "successes".into(),
        format!("{successes}/{}", out.results.rows.len()),
    );
    out
}

fn phase(c: &Phase, exec: Exec) -> Outcome {
    let mut out = Outcome::new(&["n", "m", "m_used", "successes", "trials", "fraction"]);
    let cfg = PhaseConfig {
        order: c.order,
        rank: c.rank,
        sizes: c.sizes.clone(),
        samples: c.samples.clone(),
        trials: c.trials,
        seed: c.seed,
        budget: c.budget,
        success_tol: c.success_tol,
    };
    match completion::phase_experiment(&cfg, &c.optimizer, exec) {
        Ok(cells) => {
            for cell in &cells {
                out.results.push(vec![
                    cell.n.to_string(),
                    cell.m.to_string(),
                    cell.m_used.to_string(),
                    cell.successes.to_string(),
                    cell.trials.to_string(),
                    num(cell.fraction()),
                ]);
            }
            let total: usize = cells.iter().map(|c| c.successes).sum();
            out.headline.insert(
                "successes".into(),
                format!("{total}/{}", cells.len() * c.trials),
            );
        }
        Err(e) => out.fail(e),
    }
    out
}

fn eigen_laplace(c: &EigenLaplace, exec: Exec) -> Outcome {
    let mut out = Outcome::new(&[
        "rank",
        "seed",
        "lambda",
        "reference",
        "relerr",
        "subspace_distance",
        "iterations",
        "termination",
    ]);
    let op = match KroneckerSumOperator::laplace(c.d, c.n) {
        Ok(op) => op,
        Err(e) => {
            out.fail(e);
            return out;
        }
    };
    let (extremum, idx) = match c.which {
        Which::Max => (Extremum::Max, vec![c.n; c.d]),
        Which::Min => (Extremum::Min, vec![1; c.d]),
    };
    let (reference, vector) = eigen::laplace_reference(c.d, c.n, &idx).expect("valid index");
    let shape = vec![c.n; c.d];
    let jobs: Vec<(usize, u64)> = c
        .ranks
        .iter()
        .flat_map(|&r| c.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let runs = exec.map(&jobs, |&(r, seed)| {
        let ranks = TtRank::uniform(&shape, r);
        let x0 = NttPoint::random_real(&shape, &ranks, &mut linalg::rng(seed))?;
        let schedule = [Stage {
            ranks,
            iters: c.stage_iters,
        }];
        let res = eigen::eigen_solve(&op, extremum, &schedule, x0, &c.optimizer)?;
        let dist = eigen::subspace_distance(&res.point, &vector)?;
        Ok::<_, nttkit::Error>((res, dist))
    });
    let mut worst: f64 = 0.0;
    for (&(r, seed), run) in jobs.iter().zip(runs) {
        let (res, dist) = match run {
            Ok(v) => v,
            Err(e) => {
                out.fail(format!("rank {r} seed {seed}: {e}"));
                break;
            }
        };
        let relerr = (res.lambda - reference).abs() / reference.abs();
        worst = worst.max(relerr);
        info!("eigen-laplace rank={r} seed={seed} relerr={relerr:e}");
        out.results.push(vec![
            r.to_string(),
            seed.to_string(),
            num(res.lambda),
            num(reference),
            num(relerr),
            num(dist),
            res.trace.iterations().to_string(),
            res.trace.termination.to_string(),
        ]);
        out.files.push((
            format!("traces/rank{r}_seed{seed}.csv"),
            Table::trace(&res.trace.records, None),
        ));
    }
    out.headline.insert("max_relerr".into(), num(worst));
    out
}

/// Dense reference for operators with at most this many entries per side.
const DENSE_REFERENCE_LIMIT: usize = 4096;

fn eigen_ising(c: &EigenIsing, exec: Exec) -> Outcome {
    let mut out = Outcome::new(&[
        "rank",
        "seed",
        "lambda",
        "reference",
        "relerr",
        "als_lambda",
        "iterations",
        "termination",
    ]);
    let op = match KroneckerSumOperator::ising(c.d, c.t) {
        Ok(op) => op,
        Err(e) => {
            out.fail(e);
            return out;
        }
    };
    let shape = vec![2; c.d];
    let reference = if 1usize
        .checked_shl(c.d as u32)
        .is_some_and(|n| n <= DENSE_REFERENCE_LIMIT)
    {
        match eigen::dense_extremes(&op) {
            Ok(((lmin, _), _)) => Some(lmin),
            Err(e) => {
                out.fail(e);
                return out;
            }
        }
    } else {
        None
    };
    let jobs: Vec<(usize, u64)> = c
        .ranks
        .iter()
        .flat_map(|&r| c.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let runs = exec.map(&jobs, |&(r, seed)| {
        let upto: Vec<usize> = c.ranks.iter().copied().filter(|&q| q <= r).collect();
        let schedule = opt::uniform_schedule(&shape, &upto, c.stage_iters);
        let x0 = NttPoint::random_real(&shape, &schedule[0].ranks, &mut linalg::rng(seed))?;
        let res = eigen::eigen_solve(&op, Extremum::Min, &schedule, x0, &c.optimizer)?;
        let als = if c.als_sweeps > 0 {
            let ranks = TtRank::uniform(&shape, r);
            let start = NttPoint::random_real(
                &shape,
                &ranks,
                &mut linalg::rng(linalg::derive_seed(seed, &[1])),
            )?;
            Some(eigen::als_baseline(&op, &start, c.als_sweeps)?.lambda)
        } else {
            None
        };
        Ok::<_, nttkit::Error>((res, als))
    });
    let mut best = f64::INFINITY;
    for (&(r, seed), run) in jobs.iter().zip(runs) {
        let (res, als) = match run {
            Ok(v) => v,
            Err(e) => {
                out.fail(format!("rank {r} seed {seed}: {e}"));
                break;
            }
        };
        let relerr = reference.map(|l| (res.lambda - l).abs() / l.abs());
        info!("eigen-ising rank={r} seed={seed} lambda={:e}", res.lambda);
        best = best.min(res.lambda);
        out.results.push(vec![
            r.to_string(),
            seed.to_string(),
            num(res.lambda),
            reference.map_or(String::new(), num),
            relerr.map_or(String::new(), num),
            als.map_or(String::new(), num),
            res.trace.iterations().to_string(),
            res.trace.termination.to_string(),
        ]);
        out.files.push((
            format!("traces/rank{r}_seed{seed}.csv"),
            Table::trace(&res.trace.records, None),
        ));
    }
    out.headline.insert("best_lambda".into(), num(best));
    if let Some(l) = reference {
        out.headline.insert("reference".into(), num(l));
    }
    out
}

fn stabrank(c: &Stabrank, exec: Exec) -> Outcome {
    let mut out = Outcome::new(&[
        "seed",
        "n",
        "terms",
        "rank",
        "lambda",
        "infidelity",
        "max_sre",
        "cost",
        "restart",
        "regularized",
        "termination",
    ]);
    let target = match quantum::h_state_power(c.n) {
        Ok(t) => t,
        Err(e) => {
            out.fail(e);
            return out;
        }
    };
    let mut best: Option<(f64, f64)> = None;
    for &seed in &c.seeds {
        let cfg = StabRankConfig {
            terms: c.terms,
            rank: c.rank,
            lambda: c.lambda,
            rcg: c.optimizer.clone(),
            lambda_stages: c.lambda_stages,
            restarts: c.restarts,
            seed,
        };
        let r = match quantum::stab_rank_solve(&target, &cfg, exec) {
            Ok(r) => r,
            Err(e) => {
                out.fail(format!("seed {seed}: {e}"));
                break;
            }
        };
        info!(
            "stabrank seed={seed} infidelity={:e} max_sre={:e}",
            r.infidelity, r.max_sre
        );
        if best.is_none_or(|(inf, _)| r.infidelity < inf) {
            best = Some((r.infidelity, r.max_sre));
        }
        out.results.push(vec![
            seed.to_string(),
            c.n.to_string(),
            c.terms.to_string(),
            c.rank.to_string(),
            num(c.lambda),
            num(r.infidelity),
            num(r.max_sre),
            num(r.cost),
            r.restart.to_string(),
            r.regularized.to_string(),
            r.termination.to_string(),
        ]);
        let mut trace = Table::new(&["iter", "cost"]);
        for (k, f) in r.history.iter().enumerate() {
            trace.push(vec![k.to_string(), num(*f)]);
        }
        out.files.push((format!("traces/seed{seed}.csv"), trace));
    }
    if let Some((inf, sre)) = best {
        out.headline.insert("best_infidelity".into(), num(inf));
        out.headline.insert("best_max_sre".into(), num(sre));
    }
    out
}

fn renyi(c: &Renyi, exec: Exec) -> Outcome {
    let mut out = Outcome::new(&[
        "n",
        "rank",
        "entropy",
        "per_site",
        "single_site_dense",
        "additivity_gap",
    ]);
    let channel = match c.channel.build() {
        Ok(ch) => ch,
        Err(e) => {
            out.fail(e);
            return out;
        }
    };
    let single = match quantum::dense_min_output_entropy(&channel, c.resolution, c.seed) {
        Ok(s) => s,
        Err(e) => {
            out.fail(e);
            return out;
        }
    };
    let mut timings = Table::new(&["n", "restart", "iterations", "seconds", "seconds_per_iter"]);
    let mut worst_gap: f64 = 0.0;
    for &n in &c.n {
        let seed = linalg::derive_seed(c.seed, &[n as u64]);
        let res = match quantum::min_output_entropy(
            &channel,
            n,
            c.rank,
            &c.optimizer,
            c.restarts,
            seed,
            exec,
        ) {
            Ok(r) => r,
            Err(e) => {
                out.fail(format!("n {n}: {e}"));
                break;
            }
        };
        let gap = res.per_site - single;
        worst_gap = worst_gap.max(gap.abs());
        info!(
            "renyi n={n} entropy={:e} per_site={:e}",
            res.entropy, res.per_site
        );
        out.results.push(vec![
            n.to_string(),
            c.rank.to_string(),
            num(res.entropy),
            num(res.per_site),
            num(single),
            num(gap),
        ]);
        for (k, run) in res.runs.iter().enumerate() {
            out.files.push((
                format!("traces/n{n}_restart{k}.csv"),
                Table::trace(&run.trace.records, None),
            ));
            let secs: f64 = stage_seconds(&run.trace.records);
            let iters = run.trace.iterations().max(1);
            timings.push(vec![
                n.to_string(),
                k.to_string(),
                iters.to_string(),
                num(secs),
                num(secs / iters as f64),
            ]);
        }
    }
    if c.timing {
        out.files.push(("timings.csv".into(), timings));
    }
    out.headline.insert("single_site".into(), num(single));
    out.headline
        .insert("max_additivity_gap".into(), num(worst_gap));
    out
}

/// Wall-clock seconds of a trace whose `time_ms` restarts at every stage.
fn stage_seconds(records: &[opt::IterRecord]) -> f64 {
    let mut total = 0.0;
    for (k, r) in records.iter().enumerate() {
        let last_of_stage = records.get(k + 1).is_none_or(|next| next.stage != r.stage);
        if last_of_stage {
            total += r.time_ms;
        }
    }
    total / 1e3
}
