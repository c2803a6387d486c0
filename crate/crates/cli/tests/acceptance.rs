//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use nttkit::completion::{
    phase_experiment, recovery_run, CompletionObjective, PhaseConfig, RecoveryConfig,
};
use nttkit::eigen::{eigen_solve, Extremum, KroneckerSumOperator, RayleighObjective};
use nttkit::linalg::{self, c64, complex_normal, real, ONE, ZERO};
use nttkit::manifold::{fd_gradient, Ambient};
use nttkit::opt::{rcg_minimize_with, uniform_schedule, Control, Objective, RcgConfig, Stage};
use nttkit::quantum::{
    dense_min_output_entropy, h_state_power, min_output_entropy, renyi2_cost, sre2_dense, sre2_mps,
    stab_rank_solve, QuantumChannel, StabRankConfig,
};
use nttkit::{DenseTensor, Exec, Matrix, NttPoint, TtCore, TtRank, TtTensor, C64};
use rand::Rng;

// ---------------------------------------------------------------- oracles

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in 1..shape.len() {
        s[k] = s[k - 1] * shape[k - 1];
    }
    s
}

fn digits(shape: &[usize], mut lin: usize) -> Vec<usize> {
    shape
        .iter()
        .map(|&n| {
            let i = lin % n;
            lin /= n;
            i
        })
        .collect()
}

/// Entry-by-entry densification through explicit slice products.
fn densify(cores: &[TtCore]) -> Vec<C64> {
    let shape: Vec<usize> = cores.iter().map(|c| c.n()).collect();
    let total: usize = shape.iter().product();
    (0..total)
        .map(|lin| {
            let idx = digits(&shape, lin);
            let mut row = vec![ONE];
            for (c, &i) in cores.iter().zip(&idx) {
                row = (0..c.r_right())
                    .map(|b| (0..c.r_left()).map(|a| row[a] * c.get(a, i, b)).sum())
                    .collect();
            }
            row[0]
        })
        .collect()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn rel(got: &[C64], want: &[C64]) -> f64 {
    let diff: Vec<C64> = got.iter().zip(want).map(|(a, b)| a - b).collect();
    nrm(&diff) / nrm(want).max(1e-300)
}

/// Leading `r` left singular vectors of `m`, from the Hermitian
/// eigendecomposition of `m m^†`.
fn dominant_left_subspace(m: &Matrix, r: usize) -> Matrix {
    let eig = (m * m.adjoint()).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    eig.eigenvectors.select_columns(&order[..r])
}

/// Sequential rank truncations of dense reshapes, reassembled into a dense
/// tensor.
fn dense_tt_svd(a: &[C64], shape: &[usize], ranks: &[usize]) -> Vec<C64> {
    let d = shape.len();
    let total: usize = shape.iter().product();
    let mut factors: Vec<Matrix> = Vec::new();
    let mut rest = Matrix::from_column_slice(shape[0], total / shape[0], a);
    for k in 0..d - 1 {
        let u = dominant_left_subspace(&rest, ranks[k + 1]);
        let sv = u.adjoint() * &rest;
        factors.push(u);
        let rows = ranks[k + 1] * shape[k + 1];
        rest = Matrix::from_column_slice(rows, sv.len() / rows, sv.as_slice());
    }
    factors.push(rest);
    let mut acc = Matrix::from_element(1, 1, ONE);
    for (k, f) in factors.iter().enumerate() {
        let (r, n) = (ranks[k], shape[k]);
        let prev = acc.nrows();
        let next = Matrix::from_fn(prev * n, f.ncols(), |row, b| {
            let (p, i) = (row % prev, row / prev);
            (0..r).map(|a| acc[(p, a)] * f[(a + r * i, b)]).sum()
        });
        acc = next;
    }
    acc.as_slice().to_vec()
}

/// Applies `m` along mode `k` by explicit summation.
fn dense_mode(a: &[C64], shape: &[usize], m: &Matrix, k: usize) -> Vec<C64> {
    let st = strides(shape);
    (0..a.len())
        .map(|lin| {
            let idx = digits(shape, lin);
            let base = lin - idx[k] * st[k];
            (0..shape[k])
                .map(|j| m[(idx[k], j)] * a[base + j * st[k]])
                .sum()
        })
        .collect()
}

/// Orthogonal projection onto the tangent space of the unit-norm fixed-rank
/// manifold: the span of all single-core variations, minus the radial line.
fn dense_tangent_projection(x: &NttPoint, z: &[C64]) -> Vec<C64> {
    let cores = x.left_cores();
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for k in 0..cores.len() {
        let (rl, n, rr) = cores[k].dims();
        for e in 0..rl * n * rr {
            let mut var = cores.to_vec();
            let mut data = vec![ZERO; rl * n * rr];
            data[e] = ONE;
            var[k] = TtCore::new(rl, n, rr, data).unwrap();
            cols.push(densify(&var));
        }
    }
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for mut w in cols {
        let before = nrm(&w);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let after = nrm(&w);
        if after > 1e-8 * before {
            basis.push(w.iter().map(|wi| wi / after).collect());
        }
    }
    let xd = densify(cores);
    let mut out = vec![ZERO; z.len()];
    for q in &basis {
        let c = dot(q, z);
        out.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
    }
    let c = dot(&xd, z);
    for (o, xi) in out.iter_mut().zip(&xd) {
        *o -= c * xi;
    }
    out
}

fn random_dense(shape: &[usize], g: &mut impl Rng) -> Vec<C64> {
    (0..shape.iter().product::<usize>())
        .map(|_| complex_normal(g))
        .collect()
}

fn random_matrix(n: usize, g: &mut impl Rng) -> Matrix {
    Matrix::from_fn(n, n, |_, _| complex_normal(g))
}

fn random_instance(g: &mut impl Rng) -> (Vec<usize>, TtRank) {
    let d = g.random_range(2..=4);
    let shape: Vec<usize> = (0..d).map(|_| g.random_range(2..=5)).collect();
    let r = g.random_range(1..=4);
    let ranks = TtRank::uniform(&shape, r);
    (shape, ranks)
}

/// Brute-force stabilizer 2-Rényi entropy: every Pauli string applied
/// bitwise to the amplitudes.
fn sre_bruteforce(psi: &[C64], n: usize) -> f64 {
    let dim = 1usize << n;
    let mut acc = 0.0;
    for code in 0..4usize.pow(n as u32) {
        let ops: Vec<usize> = (0..n).map(|q| (code >> (2 * q)) & 3).collect();
        let mut flip = 0usize;
        for (q, &o) in ops.iter().enumerate() {
            if o == 1 || o == 2 {
                flip |= 1 << q;
            }
        }
        let mut expect = ZERO;
        for x in 0..dim {
            let mut phase = ONE;
            for (q, &o) in ops.iter().enumerate() {
                let bit = (x >> q) & 1;
                phase *= match (o, bit) {
                    (2, 0) => c64(0.0, 1.0),
                    (2, _) => c64(0.0, -1.0),
                    (3, 1) => -ONE,
                    _ => ONE,
                };
            }
            expect += psi[x ^ flip].conj() * phase * psi[x];
        }
        acc += expect.norm_sqr().powi(2);
    }
    -(acc / dim as f64).log2()
}

fn dense_ising(d: usize, t: f64) -> Matrix {
    let dim = 1usize << d;
    let mut h = Matrix::zeros(dim, dim);
    for x in 0..dim {
        let z = |k: usize| if (x >> k) & 1 == 0 { 1.0 } else { -1.0 };
        h[(x, x)] = real(-(0..d - 1).map(|k| z(k) * z(k + 1)).sum::<f64>());
        for k in 0..d {
            h[(x ^ (1 << k), x)] -= real(t);
        }
    }
    h
}

fn smallest_eigenvalue(h: &Matrix) -> f64 {
    h.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn least_squares_r2(xs: &[f64], ys: &[f64], degree: usize) -> f64 {
    let a = nalgebra::DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(ys);
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    let fit = &a * coef;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = ys
        .iter()
        .zip(fit.iter())
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

// ---------------------------------------------------------------- checks

fn oracle_suite() -> Result<String> {
    let start = Instant::now();
    let mut g = linalg::rng(2024);
    let instances = 60;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..instances {
        let (shape, ranks) = random_instance(&mut g);
        let r = ranks.as_slice();

        let a = random_dense(&shape, &mut g);
        let dt = DenseTensor::new(shape.clone(), a.clone())?;
        let svd = TtTensor::svd(&dt, &ranks)?;
        note(
            "tt_svd",
            rel(&densify(svd.cores()), &dense_tt_svd(&a, &shape, r)),
        );

        let x = TtTensor::random(&shape, &ranks, &mut g)?;
        let y = TtTensor::random(&shape, &ranks, &mut g)?;
        let (xd, yd) = (densify(x.cores()), densify(y.cores()));
        let low = TtRank::uniform(&shape, (r.iter().max().unwrap() / 2).max(1));
        let rounded = x.round(&low)?;
        note(
            "tt_round",
            rel(
                &densify(rounded.cores()),
                &dense_tt_svd(&xd, &shape, low.as_slice()),
            ),
        );

        let ip = x.inner(&y)?;
        note(
            "tt_inner",
            (ip - dot(&xd, &yd)).norm() / (nrm(&xd) * nrm(&yd)),
        );
        note("tt_norm", (x.norm() - nrm(&xd)).abs() / nrm(&xd));

        let mats: Vec<Matrix> = shape.iter().map(|&n| random_matrix(n, &mut g)).collect();
        let mut want = xd.clone();
        for (k, m) in mats.iter().enumerate() {
            want = dense_mode(&want, &shape, m, k);
        }
        note(
            "kron_apply",
            rel(&densify(x.kron_apply(&mats)?.cores()), &want),
        );

        let terms: Vec<Vec<Matrix>> = (0..3)
            .map(|_| shape.iter().map(|&n| random_matrix(n, &mut g)).collect())
            .collect();
        let op = KroneckerSumOperator::new(terms.clone(), false)?;
        let mut want = vec![ZERO; xd.len()];
        for term in &terms {
            let mut v = xd.clone();
            for (k, m) in term.iter().enumerate() {
                v = dense_mode(&v, &shape, m, k);
            }
            want.iter_mut().zip(&v).for_each(|(w, v)| *w += v);
        }
        note(
            "apply_operator",
            rel(&densify(op.apply(&x)?.cores()), &want),
        );

        let p = NttPoint::random(&shape, &ranks, &mut g)?;
        let z = random_dense(&shape, &mut g);
        let v = p.project(&Ambient::Dense(DenseTensor::new(shape.clone(), z.clone())?))?;
        let got = densify(p.tangent_to_tt(&v)?.cores());
        note(
            "project_tangent",
            rel(&got, &dense_tangent_projection(&p, &z)),
        );
    }
    let elapsed = start.elapsed();
    let max = worst.values().copied().fold(0.0, f64::max);
    ensure!(max <= 1e-9, "worst relative errors {worst:?}");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{instances} instances, worst relative error {max:.1e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn geometry_suite() -> Result<String> {
    let mut g = linalg::rng(7);
    let shape = [3, 4, 3];
    let ranks = TtRank::new(vec![1, 2, 2, 1])?;
    let mut worst_proj: f64 = 0.0;
    for _ in 0..10 {
        let x = NttPoint::random(&shape, &ranks, &mut g)?;
        let z = DenseTensor::new(shape.to_vec(), random_dense(&shape, &mut g))?;
        let w = DenseTensor::new(shape.to_vec(), random_dense(&shape, &mut g))?;
        let pz = x.project(&Ambient::Dense(z.clone()))?;
        let pw = x.project(&Ambient::Dense(w.clone()))?;
        let pz_tt = x.tangent_to_tt(&pz)?;
        let ppz = x.project(&Ambient::Tt(pz_tt.clone()))?;
        worst_proj = worst_proj.max(ppz.axpy(-1.0, &pz)?.norm() / pz.norm());
        let lhs = pz_tt.full()?.inner(&w)?;
        let rhs = z.inner(&x.tangent_to_tt(&pw)?.full()?)?;
        worst_proj = worst_proj.max((lhs - rhs).norm());
        worst_proj = worst_proj.max(x.project(&Ambient::Tt(x.to_tt()))?.norm());
    }
    ensure!(
        worst_proj <= 1e-10,
        "projection identities off by {worst_proj:.1e}"
    );

    let x = NttPoint::random(&shape, &ranks, &mut g)?;
    let v = x.project(&Ambient::Dense(DenseTensor::new(
        shape.to_vec(),
        random_dense(&shape, &mut g),
    )?))?;
    let v = v.scale(1.0 / v.norm());
    let moved = x.retract(&v, 0.0)?.distance(&x)?;
    ensure!(
        moved <= 1e-12,
        "retraction at zero moves the point by {moved:.1e}"
    );
    let xd = x.full()?;
    let vd = x.tangent_to_tt(&v)?.full()?;
    let ts = [1e-1, 1e-2, 1e-3, 1e-4];
    let errs = ts
        .iter()
        .map(|&t| {
            Ok(x.retract(&v, t)?
                .full()?
                .distance(&xd.axpy(real(t), &vd)?)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lx: Vec<f64> = ts.iter().map(|t| t.log10()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.log10()).collect();
    let mx = lx.iter().sum::<f64>() / 4.0;
    let my = ly.iter().sum::<f64>() / 4.0;
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    ensure!(slope >= 1.9, "retraction error slope {slope:.3}");

    let cshape = vec![6, 6, 6];
    let cranks = TtRank::new(vec![1, 2, 2, 1])?;
    let cfg = RecoveryConfig {
        shape: cshape.clone(),
        ranks: cranks.clone(),
        samples: 150,
        noise: 0.0,
        seed: 3,
        success_tol: 1e-4,
    };
    let (obs, x0) = nttkit::completion::recovery_instance(&cfg)?;
    let obj = CompletionObjective::new(&obs);
    let mut off_manifold = 0usize;
    let mut visited = 0usize;
    rcg_minimize_with(
        &obj,
        x0.clone(),
        &RcgConfig {
            max_iters: 60,
            ..RcgConfig::default()
        },
        &mut |_, x| {
            visited += 1;
            let full = x.full().expect("small tensor");
            let unit = (full.norm() - 1.0).abs() <= 1e-10;
            let exact = (1..cshape.len()).all(|k| {
                let m = full.unfold(k).expect("valid mode");
                let mut ev: Vec<f64> = (&m * m.adjoint())
                    .symmetric_eigenvalues()
                    .iter()
                    .copied()
                    .collect();
                ev.sort_by(|a, b| b.total_cmp(a));
                let r = cranks.as_slice()[k];
                x.ranks() == &cranks
                    && ev[r - 1] > 1e-20
                    && ev.get(r).is_none_or(|e| *e <= 1e-14 * ev[0])
            });
            if !(unit && exact) {
                off_manifold += 1;
            }
            Control::Continue
        },
    )?;
    ensure!(
        off_manifold == 0,
        "{off_manifold} of {visited} iterates left the manifold"
    );

    let t = 1e-5;
    let fd_c = fd_gradient(&x0, &|y: &NttPoint| obj.cost(y), t, Exec::Sequential)?;
    let err_c = fd_c.axpy(-1.0, &obj.gradient(&x0)?)?.norm();
    let laplace = KroneckerSumOperator::laplace(3, 4)?;
    let top = smallest_eigenvalue(&-laplace.to_dense()?).abs();
    let scaled: Vec<Vec<Matrix>> = laplace
        .terms()
        .iter()
        .map(|term| {
            let mut term = term.clone();
            term[0] /= real(top);
            term
        })
        .collect();
    let op = KroneckerSumOperator::new(scaled, true)?;
    let ray = RayleighObjective::new(&op, Extremum::Min)?;
    let xr = NttPoint::random_real(&[4, 4, 4], &TtRank::new(vec![1, 2, 2, 1])?, &mut g)?;
    let fd_r = fd_gradient(&xr, &|y: &NttPoint| ray.cost(y), t, Exec::Sequential)?;
    let err_r = fd_r.axpy(-1.0, &ray.gradient(&xr)?)?.norm();
    ensure!(
        err_c <= 1e-4 && err_r <= 1e-4,
        "fd gradient errors {err_c:.1e} / {err_r:.1e}"
    );
    Ok(format!(
        "projection {worst_proj:.1e}, retraction slope {slope:.2}, {visited} iterates on manifold, fd error {:.1e}",
        err_c.max(err_r)
    ))
}

fn laplace() -> Result<String> {
    let start = Instant::now();
    let (d, n) = (8, 10);
    let shape = vec![n; d];
    let op = KroneckerSumOperator::laplace(d, n)?;
    let x0 = NttPoint::random_real(&shape, &TtRank::ones(d), &mut linalg::rng(1))?;
    let schedule = [Stage {
        ranks: TtRank::ones(d),
        iters: 2000,
    }];
    let res = eigen_solve(&op, Extremum::Max, &schedule, x0, &RcgConfig::default())?;
    let exact = 32.0 * (10.0 * std::f64::consts::PI / 22.0).sin().powi(2);
    let relerr = (res.lambda - exact).abs() / exact;
    let h = std::f64::consts::PI / (n as f64 + 1.0);
    let v: Vec<C64> = (1..=n)
        .map(|j| real((n as f64 * j as f64 * h).sin()))
        .collect();
    let v: Vec<C64> = v.iter().map(|z| z / nrm(&v)).collect();
    let reference = TtTensor::rank_one(&vec![v; d])?;
    let overlap = res.point.to_tt().inner(&reference)?.norm_sqr();
    let dist = (2.0 - 2.0 * overlap).max(0.0).sqrt();
    let elapsed = start.elapsed();
    ensure!(relerr <= 1e-8, "relative eigenvalue error {relerr:.2e}");
    ensure!(dist <= 1e-4, "subspace distance {dist:.2e}");
    ensure!(elapsed <= Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "relerr {relerr:.1e}, subspace distance {dist:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn ising() -> Result<String> {
    let start = Instant::now();
    let (d, t) = (8, 1.0);
    let shape = vec![2; d];
    let op = KroneckerSumOperator::ising(d, t)?;
    let reference = smallest_eigenvalue(&dense_ising(d, t));
    let mut errs = Vec::new();
    for r in [1usize, 4, 8] {
        let x0 = NttPoint::random_real(&shape, &TtRank::ones(d), &mut linalg::rng(1))?;
        let schedule = uniform_schedule(&shape, &(1..=r).collect::<Vec<_>>(), 200);
        let res = eigen_solve(&op, Extremum::Min, &schedule, x0, &RcgConfig::default())?;
        errs.push((res.lambda - reference).abs() / reference.abs());
    }
    let elapsed = start.elapsed();
    ensure!(
        errs[2] <= 1e-6,
        "relative error at r = 8 is {:.2e}",
        errs[2]
    );
    ensure!(
        errs[0] > errs[1] && errs[1] > errs[2],
        "errors not monotone in rank: {errs:?}"
    );
    ensure!(elapsed <= Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "relerr r=1 {:.1e}, r=4 {:.1e}, r=8 {:.1e}, {:.1}s",
        errs[0],
        errs[1],
        errs[2],
        elapsed.as_secs_f64()
    ))
}

fn completion() -> Result<String> {
    let ranks = TtRank::new(vec![1, 3, 3, 1])?;
    let (d, n, r1) = (3, 20, 3);
    let samples = 10 * d * n * r1 * r1;
    let rcg = RcgConfig {
        max_iters: 250,
        ..RcgConfig::default()
    };
    let run = |noise: f64, seed: u64| {
        recovery_run(
            &RecoveryConfig {
                shape: vec![n; d],
                ranks: ranks.clone(),
                samples,
                noise,
                seed,
                success_tol: 1e-4,
            },
            &rcg,
        )
    };
    let mut successes = 0;
    for seed in 0..5 {
        if run(0.0, seed)?.success_within(250) {
            successes += 1;
        }
    }
    ensure!(successes >= 4, "only {successes} of 5 seeds recovered");
    let mut plateaus = Vec::new();
    for lambda in [1e-4, 1e-8] {
        for seed in 0..5 {
            let e = run(lambda, seed)?.test_error;
            ensure!(
                e >= lambda / 10.0 && e <= 10.0 * lambda,
                "noise {lambda:e} seed {seed}: test error {e:.2e}"
            );
            plateaus.push(e);
        }
    }
    let phase = PhaseConfig {
        order: 3,
        rank: 3,
        sizes: vec![10, 20],
        samples: vec![400, 1800],
        trials: 5,
        seed: 7,
        budget: 250,
        success_tol: 1e-4,
    };
    let cells = phase_experiment(&phase, &RcgConfig::default(), Exec::Parallel)?;
    let mut grid = Vec::new();
    let mut transition = false;
    for pair in cells.chunks(2) {
        ensure!(
            pair[0].successes <= pair[1].successes,
            "success not monotone in samples: {cells:?}"
        );
        transition |= pair[0].successes < pair[1].successes;
        grid.push(format!(
            "n={}: {}/{} -> {}/{}",
            pair[0].n, pair[0].successes, pair[0].trials, pair[1].successes, pair[1].trials
        ));
    }
    ensure!(transition, "phase grid shows no transition: {cells:?}");
    Ok(format!(
        "{successes}/5 recovered, noisy plateaus {:.1e}..{:.1e}, phase {}",
        plateaus.iter().copied().fold(f64::INFINITY, f64::min),
        plateaus.iter().copied().fold(0.0, f64::max),
        grid.join(", ")
    ))
}

fn sre() -> Result<String> {
    let h = DenseTensor::new(vec![2], h_state_power(1)?.full()?.into_data())?;
    let want = 2.0 - 3f64.log2();
    let e_h = (sre2_dense(&h)? - want).abs();
    ensure!(e_h <= 1e-12, "sre of |H> off by {e_h:.1e}");
    let ranks = TtRank::new(vec![1, 2, 2, 1])?;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let x = NttPoint::random_point(&[2, 2, 2], &ranks, seed)?;
        let dense = sre2_dense(&x.full()?)?;
        let brute = sre_bruteforce(&densify(x.left_cores()), 3);
        worst = worst
            .max((sre2_mps(&x)? - dense).abs())
            .max((dense - brute).abs());
    }
    ensure!(worst <= 1e-9, "mps and dense sre differ by {worst:.1e}");
    let mut worst_pow: f64 = 0.0;
    for n in 1..=5 {
        let x = NttPoint::from_tt(&h_state_power(n)?, &TtRank::ones(n))?;
        worst_pow = worst_pow.max((sre2_mps(&x)? - n as f64 * want).abs());
    }
    ensure!(worst_pow <= 1e-9, "sre of |H>^n off by {worst_pow:.1e}");
    Ok(format!(
        "|H> {e_h:.1e}, 100 random states {worst:.1e}, powers {worst_pow:.1e}"
    ))
}

fn stabilizer_rank() -> Result<String> {
    let start = Instant::now();
    let target = h_state_power(2)?;
    let psi = target.full()?.into_data();
    let mut best: Option<(f64, f64, u64)> = None;
    for seed in 0..5 {
        let cfg = StabRankConfig {
            terms: 2,
            rank: 2,
            lambda: 1.0,
            restarts: 100,
            seed,
            ..StabRankConfig::default()
        };
        let res = stab_rank_solve(&target, &cfg, Exec::Parallel)?;
        let dec = &res.decomposition;
        let mut s = vec![ZERO; psi.len()];
        for (c, phi) in dec.coefficients.iter().zip(&dec.components) {
            for (si, p) in s.iter_mut().zip(densify(phi.left_cores())) {
                *si += c * p;
            }
        }
        let infidelity = 1.0 - dot(&s, &psi).norm_sqr() / nrm(&s).powi(2);
        let max_sre = dec
            .components
            .iter()
            .map(|phi| sre_bruteforce(&densify(phi.left_cores()), 2))
            .fold(0.0, f64::max);
        if best.is_none_or(|b| infidelity < b.0) {
            best = Some((infidelity, max_sre, seed));
        }
    }
    let (infidelity, max_sre, seed) = best.context("no seeds ran")?;
    let elapsed = start.elapsed();
    ensure!(
        infidelity <= 1e-3 && max_sre <= 1e-2,
        "best infidelity {infidelity:.2e}, max sre {max_sre:.2e}"
    );
    ensure!(elapsed <= Duration::from_secs(600), "took {elapsed:?}");
    Ok(format!(
        "best seed {seed}: infidelity {infidelity:.1e}, max sre {max_sre:.1e}, {:.0}s",
        elapsed.as_secs_f64()
    ))
}

fn channel_entropy() -> Result<String> {
    let anti = QuantumChannel::antisymmetric();
    let dense = dense_min_output_entropy(&anti, 16, 0)?;
    ensure!((dense - 1.0).abs() <= 1e-6, "dense sweep gives {dense}");
    let cfg = RcgConfig::default();
    let single = min_output_entropy(&anti, 1, 1, &cfg, 5, 0, Exec::Parallel)?.entropy;
    ensure!((single - 1.0).abs() <= 1e-3, "single-site optimum {single}");
    let mut ratios = Vec::new();
    for n in [2, 3] {
        let res = min_output_entropy(&anti, n, 2, &cfg, 5, 0, Exec::Parallel)?;
        let ratio = res.entropy / n as f64;
        ensure!(
            (ratio - 1.0).abs() <= 1e-3,
            "n = {n}: entropy per site {ratio}"
        );
        ratios.push(ratio);
    }
    let noiseless = QuantumChannel::gadc(0.0, 0.2)?;
    let zero_dense = dense_min_output_entropy(&noiseless, 16, 0)?;
    let zero_rcg = min_output_entropy(&noiseless, 2, 2, &cfg, 2, 0, Exec::Parallel)?.entropy;
    ensure!(
        zero_dense == 0.0 && zero_rcg == 0.0,
        "noiseless channel gives {zero_dense} / {zero_rcg}"
    );

    let mut ns = Vec::new();
    let mut per_iter = Vec::new();
    for n in 2..=6 {
        let shape = vec![3; n];
        let ranks = TtRank::uniform(&shape, 2);
        let obj = renyi2_cost(&anti, Exec::Sequential);
        let x0 = NttPoint::random_point(&shape, &ranks, 11)?;
        let probe = RcgConfig {
            max_iters: 12,
            grad_tol: 1e-300,
            cost_tol: 1e-300,
            ..RcgConfig::default()
        };
        let mut stamps = vec![Instant::now()];
        rcg_minimize_with(&obj, x0, &probe, &mut |_, _| {
            stamps.push(Instant::now());
            Control::Continue
        })?;
        let gaps: Vec<f64> = stamps
            .windows(2)
            .skip(1)
            .map(|w| (w[1] - w[0]).as_secs_f64())
            .collect();
        ns.push(n as f64);
        per_iter.push(median(gaps));
    }
    let r2 = least_squares_r2(&ns, &per_iter, 2);
    ensure!(
        r2 >= 0.95,
        "quadratic fit of per-iteration time has R^2 {r2:.3} ({per_iter:?})"
    );
    Ok(format!(
        "dense {dense:.9}, rcg {single:.6}, per-site n=2 {:.6} n=3 {:.6}, noiseless 0, timing R^2 {r2:.3}",
        ratios[0], ratios[1]
    ))
}

fn run_cli(config: &Path, out: &Path, jobs: u32) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_nttkit"))
        .arg("run")
        .arg(config)
        .args(["--jobs", &jobs.to_string(), "--out"])
        .arg(out)
        .env("NTTKIT_LOG", "error")
        .status()?;
    ensure!(
        status.success(),
        "nttkit run {} exited with {status}",
        config.display()
    );
    Ok(())
}

fn csv_files(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.insert(path.strip_prefix(dir)?.to_path_buf(), std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Result<String> {
    let tmp = tempfile::tempdir()?;
    let configs = [
        (
            "complete",
            r#"{"experiment": "complete", "shape": [8, 8, 8], "ranks": [1, 2, 2, 1], "samples": 400,
                "noise": [0.0, 1e-6], "seeds": [0, 1], "optimizer": {"max_iters": 60}}"#,
        ),
        (
            "renyi",
            r#"{"experiment": "renyi", "channel": {"type": "antisymmetric"}, "n": [1, 2], "rank": 2, "restarts": 2, "seed": 0}"#,
        ),
        (
            "stabrank",
            r#"{"experiment": "stabrank", "n": 2, "terms": 2, "rank": 2, "seeds": [0], "restarts": 3}"#,
        ),
    ];
    let mut compared = 0;
    for (name, body) in configs {
        let cfg = tmp.path().join(format!("{name}.json"));
        std::fs::write(&cfg, body)?;
        let (a, b) = (
            tmp.path().join(format!("{name}-a")),
            tmp.path().join(format!("{name}-b")),
        );
        run_cli(&cfg, &a, 1)?;
        run_cli(&cfg, &b, 1)?;
        let (fa, fb) = (csv_files(&a)?, csv_files(&b)?);
        ensure!(!fa.is_empty(), "{name}: no csv output");
        ensure!(fa == fb, "{name}: csv outputs differ between runs");
        compared += fa.len();
    }
    Ok(format!("{compared} csv files byte-identical across reruns"))
}

type Check = fn() -> Result<String>;

fn main() {
    let checks: [(&str, Check); 9] = [
        ("oracle equivalence", oracle_suite),
        ("manifold geometry", geometry_suite),
        ("laplace eigenvalue", laplace),
        ("ising ground state", ising),
        ("tensor completion", completion),
        ("stabilizer renyi entropy", sre),
        ("stabilizer rank", stabilizer_rank),
        ("channel output entropy", channel_entropy),
        ("deterministic csv output", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(anyhow::anyhow!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
            ))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {e:#}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
