use proptest::prelude::*;

use gcs_core::coherence::{
    coherence_exact_pieces, coherence_exact_subspace, coherence_heuristic, CoherenceMethod,
};
use gcs_core::experiment::expand_grid;
use gcs_core::generative_model::{enumerate_pieces, random_gaussian_init, EnumerationMode};
use gcs_core::linalg::{gram_schmidt, Matrix};
use gcs_core::recovery::rre;
use gcs_core::rng;
use gcs_core::sampling::{
    build_preconditioner, draw_plan, mu, optimal_probabilities, sample_complexity,
    ProbabilityVector,
};
use gcs_core::transform::UnitaryOperator;
use gcs_core::verification::{rip_deviation_subspace, wilson_interval};
use gcs_core::{Coherence, Network, C64};

fn alpha_strategy(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..=1.0f64], 1..max_n)
        .prop_filter("nonzero", |a| a.iter().any(|&v| v > 0.0))
}

fn simplex(n: usize, seed: u64) -> ProbabilityVector<f64> {
    let mut r = rng::stream(seed, 0);
    ProbabilityVector::new(rng::simplex_point(&mut r, n)).unwrap()
}

fn operators(n_pow: u32) -> Vec<UnitaryOperator<f64>> {
    let n = 1usize << n_pow;
    let mut ops = vec![
        UnitaryOperator::identity(n),
        UnitaryOperator::dft1d(n).unwrap(),
        UnitaryOperator::hadamard(n).unwrap(),
        UnitaryOperator::random_orthogonal(n, n_pow as u64).unwrap(),
    ];
    if n_pow >= 2 {
        ops.push(UnitaryOperator::dft2d(2, n / 2).unwrap());
    }
    ops
}

proptest! {
    #[test]
    fn mu_is_minimised_by_p_star(alpha in alpha_strategy(40), seed in any::<u64>()) {
        let a = Coherence::new(alpha.clone(), CoherenceMethod::Loaded).unwrap();
        let p_star = optimal_probabilities(&a).unwrap();
        let norm = a.norm();
        prop_assert!((mu(&alpha, &p_star).unwrap() - norm).abs() <= 1e-12);
        let q = simplex(alpha.len(), seed);
        prop_assert!(mu(&alpha, &q).unwrap() >= norm - 1e-12);
    }

    #[test]
    fn p_star_sums_to_one_and_vanishes_with_alpha(alpha in alpha_strategy(40)) {
        let a = Coherence::new(alpha.clone(), CoherenceMethod::Loaded).unwrap();
        let p = optimal_probabilities(&a).unwrap();
        prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (pj, aj) in p.as_slice().iter().zip(&alpha) {
            prop_assert_eq!(*pj == 0.0, *aj == 0.0);
        }
    }

    #[test]
    fn preconditioner_restricts_full_diagonal(n in 1usize..50, m in 1usize..60, seed in any::<u64>()) {
        let p = simplex(n, seed);
        let plan = draw_plan(&p, m, seed).unwrap();
        let d = build_preconditioner(&plan).unwrap();
        prop_assert_eq!(d.d_sub.len(), m);
        for (i, &j) in plan.indices().iter().enumerate() {
            prop_assert!(p.as_slice()[j] > 0.0);
            prop_assert_eq!(d.d_sub[i].to_bits(), d.d_full[j].to_bits());
        }
    }

    #[test]
    fn plans_are_reproducible(n in 1usize..30, m in 1usize..40, seed in any::<u64>()) {
        let p = simplex(n, seed ^ 1);
        let a = draw_plan(&p, m, seed).unwrap();
        let b = draw_plan(&p, m, seed).unwrap();
        prop_assert_eq!(a.indices(), b.indices());
    }

    #[test]
    fn sample_complexity_is_monotone(a2 in 1.0..50.0f64, k in 2usize..6, d in 1usize..4, eps in 0.01..0.99f64) {
        let n = 128;
        let m1 = sample_complexity(a2, k, d, n, eps, 1.0).unwrap();
        let m2 = sample_complexity(2.0 * a2, k, d, n, eps, 1.0).unwrap();
        prop_assert!(m2 >= m1);
        prop_assert!(m2 <= 2 * m1 && m2 + 1 >= 2 * m1 - 1);
        prop_assert!(sample_complexity(a2, k, d, n, eps / 2.0, 1.0).unwrap() >= m1);
    }

    #[test]
    fn parseval_and_adjoint(n_pow in 0u32..7, seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        for op in operators(n_pow) {
            let n = op.n();
            let x: Vec<C64> = (0..n).map(|_| C64::new(rng::gaussian(&mut r), rng::gaussian(&mut r))).collect();
            let fx = op.apply(&x).unwrap();
            let nx = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let nf = fx.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((nx - nf).abs() <= 1e-12 * nx.max(1.0));
            let back = op.adjoint_apply(&fx).unwrap();
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).norm() <= 1e-12 * nx.max(1.0));
            }
            // (F x)_j = <f_j, x> with f_j = row(j).
            for j in [0, n / 2, n - 1] {
                let f = op.row(j).unwrap();
                let ip: C64 = f.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                prop_assert!((ip - fx[j]).norm() <= 1e-12 * nx.max(1.0));
            }
        }
    }

    #[test]
    fn dft2d_is_separable(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        let x: Vec<C64> = (0..h * w).map(|_| C64::new(rng::gaussian(&mut r), rng::gaussian(&mut r))).collect();
        let got = UnitaryOperator::<f64>::dft2d(h, w).unwrap().apply(&x).unwrap();
        let rows = UnitaryOperator::<f64>::dft1d(w).unwrap();
        let cols = UnitaryOperator::<f64>::dft1d(h).unwrap();
        let mut y = x.clone();
        for i in 0..h {
            let t = rows.apply(&y[i * w..(i + 1) * w]).unwrap();
            y[i * w..(i + 1) * w].copy_from_slice(&t);
        }
        for j in 0..w {
            let col: Vec<C64> = (0..h).map(|i| y[i * w + j]).collect();
            for (i, v) in cols.apply(&col).unwrap().into_iter().enumerate() {
                y[i * w + j] = v;
            }
        }
        for (a, b) in got.iter().zip(&y) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn network_is_positively_homogeneous(seed in any::<u64>(), c in 0.0..10.0f64) {
        let net: Network = random_gaussian_init(&[3, 7, 5, 12], 12, seed).unwrap();
        let mut r = rng::stream(seed, 1);
        let z: Vec<f64> = rng::gaussian_vec(&mut r, 3);
        let cz: Vec<f64> = z.iter().map(|v| c * v).collect();
        let a = net.forward(&cz).unwrap();
        let b = net.forward(&z).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - c * y).abs() <= 1e-12 * (1.0 + c * y.abs()));
        }
        prop_assert!(net.forward(&[0.0; 3]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rre_is_scale_invariant(x in prop::collection::vec(-5.0..5.0f64, 1..20), s in 0.1..10.0f64) {
        prop_assume!(x.iter().any(|&v| v != 0.0));
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 + 0.1).collect();
        let a = rre(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * s).collect();
        prop_assert!((rre(&xs, &ys).unwrap() - a).abs() <= 1e-12 * a.max(1.0));
        prop_assert_eq!(rre(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn wilson_interval_contains_estimate(trials in 1usize..500, frac in 0.0..=1.0f64) {
        let s = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(s, trials, 1.96);
        let phat = s as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= phat + 1e-12 && phat <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn geometric_grids_round_trip(start in 1usize..20, ratio in 2usize..4, len in 4u32..9) {
        let terms: Vec<usize> = (0..len).map(|i| start * ratio.pow(i)).collect();
        let text = format!("{},{},{},…,{}", terms[0], terms[1], terms[2], terms[terms.len() - 1]);
        prop_assert_eq!(expand_grid(&text).unwrap(), terms);
    }

    #[test]
    fn arithmetic_grids_round_trip(start in 0usize..20, step in 1usize..9, len in 4usize..12) {
        let terms: Vec<usize> = (0..len).map(|i| start + step * i).collect();
        prop_assume!(terms[0] * terms[2] != terms[1] * terms[1]);
        let text = format!("{}, {}, {}, ..., {}", terms[0], terms[1], terms[2], terms[len - 1]);
        prop_assert_eq!(expand_grid(&text).unwrap(), terms);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn subspace_coherence_properties(k in 1usize..5, n_pow in 3u32..7, seed in any::<u64>()) {
        let n = 1usize << n_pow;
        let mut r = rng::stream(seed, 0);
        let basis = gram_schmidt(&Matrix::from_fn(n, k, |_, _| rng::gaussian::<f64, _>(&mut r))).unwrap();
        for op in operators(n_pow) {
            let a = coherence_exact_subspace(&op, &basis).unwrap();
            prop_assert!(a.alpha.iter().all(|&v| (0.0..=1.0).contains(&v)));
            // Sum of squared coherences is the subspace dimension.
            prop_assert!((a.norm_sq() - k as f64).abs() <= 1e-10);
        }
    }

    #[test]
    fn gram_deviation_bounds_every_probe(seed in any::<u64>(), m in 8usize..80) {
        let (n, k) = (32, 3);
        let mut r = rng::stream(seed, 0);
        let basis = gram_schmidt(&Matrix::from_fn(n, k, |_, _| rng::gaussian::<f64, _>(&mut r))).unwrap();
        let op = UnitaryOperator::dft1d(n).unwrap();
        let p = optimal_probabilities(&coherence_exact_subspace(&op, &basis).unwrap()).unwrap();
        let plan = draw_plan(&p, m, seed).unwrap();
        let d = build_preconditioner(&plan).unwrap();
        let rep = rip_deviation_subspace(&plan, &d, &op, &basis, 200, seed).unwrap();
        prop_assert_eq!(rep.estimate, rep.deviations[0]);
        prop_assert!(rep.deviations[1..].iter().all(|&v| v <= rep.deviations[0] + 1e-12));
    }

    #[test]
    fn heuristic_below_exact_pieces(seed in 0u64..1000) {
        let net: Network = random_gaussian_init(&[2, 4, 8], 8, seed).unwrap();
        let op = UnitaryOperator::dft1d(8).unwrap();
        let pieces = enumerate_pieces(&net, EnumerationMode::Exhaustive).unwrap();
        let exact = coherence_exact_pieces(&op, &pieces).unwrap();
        let heur = coherence_heuristic(&net, &op, 60, seed).unwrap();
        for (h, e) in heur.alpha.iter().zip(&exact.alpha) {
            prop_assert!(*h <= e + 1e-9);
        }
        // The cone contains a line, so |alpha| >= 1.
        prop_assert!(exact.norm() >= 1.0 - 1e-9);
    }
}
