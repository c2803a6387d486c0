use nttkit::completion::{recovery_instance, CompletionObjective, RecoveryConfig};
use nttkit::io;
use nttkit::linalg::{self, ONE};
use nttkit::manifold::Ambient;
use nttkit::opt::{rcg_minimize, RcgConfig};
use nttkit::{DenseTensor, NttPoint, TtRank, TtTensor};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<usize>, usize, u64)> {
    (2usize..=4)
        .prop_flat_map(|d| (prop::collection::vec(2usize..=5, d), 1usize..=4, any::<u64>()))
}

fn relative(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.distance(b).unwrap() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unfold_fold_round_trip((shape, _, seed) in instance()) {
        let a = DenseTensor::random(&shape, &mut linalg::rng(seed));
        for k in 1..shape.len() {
            let back = DenseTensor::fold(&a.unfold(k).unwrap(), &shape, k).unwrap();
            prop_assert_eq!(back.data(), a.data());
        }
    }

    #[test]
    fn orthogonalization_keeps_value_and_norm((shape, r, seed) in instance()) {
        let x = TtTensor::random(&shape, &TtRank::uniform(&shape, r), &mut linalg::rng(seed)).unwrap();
        let full = x.full().unwrap();
        for k in 0..shape.len() {
            let y = x.orthogonalize(k);
            prop_assert!((y.norm() - x.norm()).abs() <= 1e-12 * x.norm());
            prop_assert!(relative(&y.full().unwrap(), &full) <= 1e-12);
        }
        let left = x.left_orthogonalize();
        prop_assert!((left.core(shape.len() - 1).norm() - full.norm()).abs() <= 1e-12 * full.norm());
    }

    #[test]
    fn tt_svd_is_exact_at_the_tt_rank((shape, r, seed) in instance()) {
        let ranks = TtRank::uniform(&shape, r);
        let x = TtTensor::random(&shape, &ranks, &mut linalg::rng(seed)).unwrap();
        let full = x.full().unwrap();
        let y = TtTensor::svd(&full, &ranks).unwrap();
        prop_assert!(relative(&y.full().unwrap(), &full) <= 1e-10);
        prop_assert!(y.satisfies_orth(1e-10));
    }

    #[test]
    fn truncation_error_shrinks_with_rank((shape, r, seed) in instance()) {
        let a = DenseTensor::random(&shape, &mut linalg::rng(seed));
        let lo = TtRank::uniform(&shape, r);
        let hi = TtRank::uniform(&shape, r + 1);
        let e_lo = TtTensor::svd(&a, &lo).unwrap().full().unwrap().distance(&a).unwrap();
        let e_hi = TtTensor::svd(&a, &hi).unwrap().full().unwrap().distance(&a).unwrap();
        prop_assert!(e_hi <= e_lo * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn addition_and_rounding_match_dense((shape, r, seed) in instance()) {
        let mut g = linalg::rng(seed);
        let ranks = TtRank::uniform(&shape, r);
        let x = TtTensor::random(&shape, &ranks, &mut g).unwrap();
        let y = TtTensor::random(&shape, &ranks, &mut g).unwrap();
        let sum = x.add(&y).unwrap();
        let dense = x.full().unwrap().axpy(ONE, &y.full().unwrap()).unwrap();
        prop_assert!(relative(&sum.full().unwrap(), &dense) <= 1e-10);
        let wide = TtRank::uniform(&shape, 2 * r);
        let rounded = sum.round(&wide).unwrap();
        prop_assert!(relative(&rounded.full().unwrap(), &dense) <= 1e-10);
    }

    #[test]
    fn json_round_trip_is_bit_exact((shape, r, seed) in instance()) {
        let x = TtTensor::random(&shape, &TtRank::uniform(&shape, r), &mut linalg::rng(seed)).unwrap();
        let back = io::from_json(&io::to_json(&x).unwrap()).unwrap();
        for (a, b) in x.cores().iter().zip(back.cores()) {
            prop_assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn projection_is_an_orthogonal_projector((shape, r, seed) in instance()) {
        let mut g = linalg::rng(seed);
        let x = NttPoint::random(&shape, &TtRank::uniform(&shape, r), &mut g).unwrap();
        let z = DenseTensor::random(&shape, &mut g);
        let v = x.project(&Ambient::Dense(z.clone())).unwrap();
        prop_assert!(x.gauge_residual(&v).unwrap() <= 1e-10);
        let vt = x.tangent_to_tt(&v).unwrap();
        let again = x.project(&Ambient::Tt(vt.clone())).unwrap();
        prop_assert!(again.axpy(-1.0, &v).unwrap().norm() <= 1e-10 * v.norm().max(1.0));
        let resid = z.sub(&vt.full().unwrap()).unwrap();
        for w in x.tangent_basis().iter().take(8) {
            let wt = x.tangent_to_tt(w).unwrap().full().unwrap();
            prop_assert!(resid.inner(&wt).unwrap().re.abs() <= 1e-9);
        }
        prop_assert!(x.project(&Ambient::Tt(x.to_tt())).unwrap().norm() <= 1e-10);
        prop_assert!(x.inner_tt(&vt).unwrap().norm() <= 1e-10 * v.norm().max(1.0));
    }

    #[test]
    fn tangent_inner_matches_embedding((shape, r, seed) in instance()) {
        let mut g = linalg::rng(seed);
        let x = NttPoint::random(&shape, &TtRank::uniform(&shape, r), &mut g).unwrap();
        let v = x.project(&Ambient::Dense(DenseTensor::random(&shape, &mut g))).unwrap();
        let w = x.project(&Ambient::Dense(DenseTensor::random(&shape, &mut g))).unwrap();
        let embedded = x.tangent_to_tt(&v).unwrap().inner(&x.tangent_to_tt(&w).unwrap()).unwrap();
        prop_assert!((x.tangent_inner(&v, &w).unwrap() - embedded).norm() <= 1e-10 * (v.norm() * w.norm()).max(1.0));
    }

    #[test]
    fn retraction_stays_on_the_manifold((shape, r, seed) in instance(), s in -2.0f64..2.0) {
        let mut g = linalg::rng(seed);
        let ranks = TtRank::uniform(&shape, r);
        let x = NttPoint::random(&shape, &ranks, &mut g).unwrap();
        let v = x.project(&Ambient::Dense(DenseTensor::random(&shape, &mut g))).unwrap();
        let y = x.retract(&v, s).unwrap();
        prop_assert!(y.check_invariants(1e-10));
        prop_assert!((y.full().unwrap().norm() - 1.0).abs() <= 1e-10);
        prop_assert_eq!(y.ranks(), &ranks);
        let moved = y.transport(&x, &v).unwrap();
        prop_assert!(y.gauge_residual(&moved).unwrap() <= 1e-10);
        prop_assert!(moved.norm() <= v.norm() * (1.0 + 1e-10));
    }
}

#[test]
fn accepted_steps_never_increase_the_cost() {
    for seed in 0..4 {
        let cfg = RecoveryConfig {
            shape: vec![7, 7, 7],
            ranks: TtRank::new(vec![1, 2, 2, 1]).unwrap(),
            samples: 250,
            noise: 1e-3,
            seed,
            success_tol: 1e-4,
        };
        let (obs, x0) = recovery_instance(&cfg).unwrap();
        let obj = CompletionObjective::new(&obs);
        let trace = rcg_minimize(&obj, x0, &RcgConfig { max_iters: 80, ..RcgConfig::default() }).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].cost <= w[0].cost, "cost rose from {} to {}", w[0].cost, w[1].cost);
        }
    }
}

#[test]
fn equal_seeds_give_bit_identical_traces() {
    let cfg = RecoveryConfig {
        shape: vec![6, 6, 6],
        ranks: TtRank::new(vec![1, 2, 2, 1]).unwrap(),
        samples: 160,
        noise: 0.0,
        seed: 9,
        success_tol: 1e-4,
    };
    let run = || {
        let (obs, x0) = recovery_instance(&cfg).unwrap();
        let obj = CompletionObjective::new(&obs);
        let trace = rcg_minimize(&obj, x0, &RcgConfig { max_iters: 40, ..RcgConfig::default() }).unwrap();
        trace.records.iter().map(|r| (r.cost, r.grad_norm, r.step, r.beta)).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0.to_bits(), y.0.to_bits());
        assert_eq!(x.1.to_bits(), y.1.to_bits());
        assert_eq!(x.2.to_bits(), y.2.to_bits());
        assert_eq!(x.3.to_bits(), y.3.to_bits());
    }
}

#[test]
fn padding_preserves_the_tensor() {
    let shape = [3, 4, 3];
    let x = NttPoint::random(&shape, &TtRank::ones(3), &mut linalg::rng(4)).unwrap();
    let y = x.pad_to(&TtRank::new(vec![1, 2, 2, 1]).unwrap()).unwrap();
    assert!(y.full().unwrap().distance(&x.full().unwrap()).unwrap() <= 1e-12);
    assert!(y.check_invariants(1e-10));
}
