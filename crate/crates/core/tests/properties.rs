use definetti_core::definetti::{build_candidate, chain_rule_check, find_qstar, make_grouping, symmetry_step_check};
use definetti_core::entropy::{mutual_information, relative_entropy, EntropyValue};
use definetti_core::extension::{build_problem, solve_feasibility, ExtensionMode, FeasibilityStatus, SolveOptions};
use definetti_core::linalg::{self, c};
use definetti_core::measurement::{
    parallel_to_full_embedding, restricted_norm, AdaptiveMeasurementTree, MeasurementClass, Povm, SeesawOptions, Witness,
};
use definetti_core::rng;
use definetti_core::sos::{self, OracleOptions, SphereProblem, Variant};
use definetti_core::state::{random_state, trace_distance, DensityOperator, Ensemble};
use definetti_core::symmetry;
use proptest::prelude::*;

fn hs(dims: &[usize], seed: u64) -> DensityOperator {
    random_state(dims, seed, Ensemble::HilbertSchmidtMixed).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn tensor_then_trace_recovers_factor(a in any::<u64>(), b in any::<u64>()) {
        let x = hs(&[2, 3], a);
        let y = hs(&[2], b);
        let t = x.tensor(&y).unwrap();
        t.validate(1e-9).unwrap();
        let back = t.partial_trace(&[0, 1]).unwrap();
        prop_assert!(linalg::frobenius(&(back.matrix() - x.matrix())) <= 1e-12);
    }

    #[test]
    fn twirl_is_idempotent(seed in any::<u64>()) {
        let rho = hs(&[2, 2, 2], seed);
        let gens = symmetry::symmetric_group_on(3, &[0, 1, 2]);
        let once = rho.twirl(&gens).unwrap();
        let twice = once.twirl(&gens).unwrap();
        once.validate(1e-9).unwrap();
        prop_assert!(linalg::frobenius(&(once.matrix() - twice.matrix())) <= 1e-12);
    }

    #[test]
    fn trace_norm_is_a_bounded_metric(a in any::<u64>(), b in any::<u64>(), cc in any::<u64>()) {
        let (x, y, z) = (hs(&[2, 2], a), hs(&[2, 2], b), hs(&[2, 2], cc));
        let xy = trace_distance(&x, &y).unwrap();
        let yz = trace_distance(&y, &z).unwrap();
        let xz = trace_distance(&x, &z).unwrap();
        prop_assert!(xz <= xy + yz + 1e-12);
        prop_assert!(xy <= 2.0 + 1e-12);
    }

    #[test]
    fn measurement_never_increases_relative_entropy(a in any::<u64>(), b in any::<u64>(), outcomes in 2usize..5) {
        let x = hs(&[4], a);
        let y = hs(&[4], b);
        let m = Povm::random(4, outcomes, &mut rng::stream(a ^ b, 0));
        let before = relative_entropy(&x, &y).unwrap().bits();
        let after = relative_entropy(&m.apply(&x).unwrap(), &m.apply(&y).unwrap()).unwrap().bits();
        prop_assert!(after <= before + 1e-9);
    }

    #[test]
    fn relative_entropy_is_jointly_convex(seeds in proptest::collection::vec(any::<u64>(), 3), w in 0.05f64..0.95) {
        let r = [hs(&[2], seeds[0]), hs(&[2], seeds[1])];
        let s = [hs(&[2], seeds[2]), hs(&[2], seeds[0] ^ 1)];
        let weights = [w, 1.0 - w];
        let mixed = relative_entropy(
            &DensityOperator::mixture(&weights, &r).unwrap(),
            &DensityOperator::mixture(&weights, &s).unwrap(),
        ).unwrap().bits();
        let split: f64 = (0..2).map(|i| weights[i] * relative_entropy(&r[i], &s[i]).unwrap().bits()).sum();
        prop_assert!(mixed <= split + 1e-9);
    }

    #[test]
    fn chain_rule_and_pigeonhole(seed in any::<u64>(), blocks in 1usize..4) {
        let rho = random_state(&vec![2; blocks + 1], seed, Ensemble::bose_symmetric()).unwrap();
        let mut g = rng::stream(seed, 5);
        let povms: Vec<Povm> = (0..blocks).map(|_| Povm::random(2, 3, &mut g)).collect();
        let groups: Vec<Vec<usize>> = (1..=blocks).map(|b| vec![b]).collect();
        let r = chain_rule_check(&rho, &groups, &povms).unwrap();
        prop_assert!(r.residual <= 1e-9);
        prop_assert!(r.holds);
        prop_assert!(r.total <= 1.0 + 1e-9);
    }

    #[test]
    fn classical_outcome_information_is_at_most_log_dim(seed in any::<u64>()) {
        let rho = hs(&[2, 2], seed);
        let m = Povm::random(2, 4, &mut rng::stream(seed, 1));
        let omega = definetti_core::measurement::classical_quantum_state(&rho, &[vec![1]], &[m]).unwrap();
        prop_assert!(mutual_information(&omega, &[0], &[1]).unwrap() <= 1.0 + 1e-9);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn restricted_values_never_exceed_the_trace_norm(a in any::<u64>(), b in any::<u64>()) {
        let x = hs(&[2, 2], a);
        let y = hs(&[2, 2], b);
        let tn = trace_distance(&x, &y).unwrap();
        let opts = SeesawOptions { restarts: 2, seed: a, ..Default::default() };
        for class in [MeasurementClass::Lo, MeasurementClass::OneWayParallel, MeasurementClass::OneWayFull] {
            let r = restricted_norm(&x, &y, class, &opts).unwrap();
            prop_assert!(r.value <= tn + 1e-9);
            prop_assert!((r.witness.norm_value(&x, &y).unwrap() - r.value).abs() <= 1e-12);
        }
        let all = restricted_norm(&x, &y, MeasurementClass::All, &opts).unwrap();
        prop_assert!((all.value - tn).abs() <= 1e-9);
    }

    #[test]
    fn embedded_parallel_witness_keeps_its_value(a in any::<u64>(), b in any::<u64>()) {
        let x = hs(&[2, 2, 2], a);
        let y = hs(&[2, 2, 2], b);
        let mut g = rng::stream(a, 2);
        let upstream = vec![Povm::random(2, 2, &mut g), Povm::random(2, 3, &mut g)];
        let last: Vec<Povm> = (0..6).map(|_| Povm::random(2, 2, &mut g)).collect();
        let par = Witness::Parallel { upstream: upstream.clone(), last: last.clone() };
        let tree = Witness::Tree(parallel_to_full_embedding(&upstream, &last, &[2, 2, 2]).unwrap());
        prop_assert!((par.norm_value(&x, &y).unwrap() - tree.norm_value(&x, &y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn channel_outputs_are_distributions(seed in any::<u64>(), outcomes in 1usize..4) {
        let rho = hs(&[2, 3, 2], seed);
        let tree = AdaptiveMeasurementTree::random(&[2, 3, 2], outcomes, seed).unwrap();
        let out = tree.apply(&rho).unwrap();
        out.validate(1e-10).unwrap();
        let p = tree.distribution(&rho).unwrap().probs;
        prop_assert!(p.iter().all(|&q| q >= -1e-12));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn chain_identity_holds(seed in any::<u64>()) {
        let rho = hs(&[2, 2, 2], seed);
        let tree = AdaptiveMeasurementTree::random(&[2, 2, 2], 2, seed ^ 7).unwrap();
        let r = definetti_core::measurement::chain_identity_residual(&tree, &rho).unwrap();
        if let Some(res) = r.residual {
            prop_assert!(res <= 1e-9);
        }
    }

    #[test]
    fn symmetric_states_satisfy_the_symmetry_step(seed in any::<u64>()) {
        let rho = random_state(&[2, 2, 2], seed, Ensemble::bose_symmetric()).unwrap();
        let tree = AdaptiveMeasurementTree::random(&[2, 2, 2], 2, seed ^ 3).unwrap();
        prop_assert!(symmetry_step_check(&rho, &tree).unwrap().holds);
    }

    #[test]
    fn candidates_are_consistent(seed in any::<u64>()) {
        let rho = random_state(&[2, 2, 2, 2], seed, Ensemble::bose_symmetric()).unwrap();
        let layout = make_grouping(4, 2).unwrap();
        let q = find_qstar(&rho, &layout, 2, seed).unwrap();
        let cand = build_candidate(&rho, 2, &layout, &q).unwrap();
        prop_assert!((cand.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(cand.marginal_residual <= 1e-8 && cand.mixture_residual <= 1e-9);
        let assembled = cand.assemble().unwrap();
        prop_assert!(assembled.permutation_residual(&symmetry::symmetric_group_on(2, &[0, 1])).unwrap() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn feasible_extensions_validate_and_restrict(a in any::<u64>(), b in any::<u64>(), w in 0.0f64..1.0) {
        let p1 = hs(&[2], a).tensor(&hs(&[2], b)).unwrap();
        let p2 = hs(&[2], b ^ 1).tensor(&hs(&[2], a ^ 1)).unwrap();
        let rho = DensityOperator::mixture(&[w, 1.0 - w], &[p1, p2]).unwrap();
        let p = build_problem(&rho, 2, 3, ExtensionMode::FullMarginal).unwrap();
        let r = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        prop_assert_eq!(r.status, FeasibilityStatus::Feasible);
        let x = r.extension.unwrap();
        prop_assert!(p.check(&x).unwrap().valid);
        let lower = build_problem(&rho, 2, 2, ExtensionMode::FullMarginal).unwrap();
        prop_assert!(lower.check(&p.restrict(&x, 2).unwrap()).unwrap().valid);
    }

    #[test]
    fn relaxation_sandwich(seed in any::<u64>()) {
        let g = rng::gaussian_matrix(&mut rng::stream(seed, 0), 4, 4);
        let h = linalg::hermitian_part(&(&g * g.adjoint()));
        let m = &h * c(1.0 / linalg::HermitianEigen::new(&h).max());
        let opts = OracleOptions { restarts: 20, seed, ..Default::default() };
        for variant in [Variant::O1, Variant::O2] {
            let p = SphereProblem::new(m.clone(), 2, 2, variant, true).unwrap();
            let oracle = sos::product_oracle(&p, &opts).unwrap().value;
            let mut prev = f64::INFINITY;
            for level in 2..=4 {
                let r = sos::relax(&p, level).unwrap();
                prop_assert!(r.value <= prev + 1e-9);
                prop_assert!(r.value >= oracle - 1e-8);
                if level > 2 {
                    prop_assert!(r.value - oracle <= sos::gap_bound(2, 2, level).unwrap() + 1e-6);
                }
                prev = r.value;
            }
        }
    }
}

#[test]
fn infinite_divergence_is_tagged() {
    let zero = DensityOperator::basis(vec![2], 0).unwrap();
    let one = DensityOperator::basis(vec![2], 1).unwrap();
    assert_eq!(relative_entropy(&zero, &one).unwrap(), EntropyValue::Infinite);
}
