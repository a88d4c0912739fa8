use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpmc_core::eliminate::{make_order, solve_expected_reward, solve_reachability, EliminationOrder, OrderHeuristic, RewardFactor};
use vpmc_core::families::{random_legal_diff, random_params, random_vpmc};
use vpmc_core::incremental::{apply_diff, parametric_reachability_vpmc, reconfigured_reachability};
use vpmc_core::model::StateId;
use vpmc_core::oracle::{numeric_expected_reward, numeric_reachability, random_valuation};
use vpmc_core::ratfunc::parse::parse_expression;
use vpmc_core::{Field, MetricsCounter, RatFunc, Rational};

/// Rational functions in `p, q` built from small constants by the field
/// operations.
fn ratfunc() -> impl Strategy<Value = RatFunc> {
    let leaf = prop_oneof![
        Just(RatFunc::var(0)),
        Just(RatFunc::var(1)),
        (-4i64..=4, 1i64..=4).prop_map(|(n, d)| RatFunc::constant(Rational::new(n.into(), d.into()))),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (inner.clone(), inner, 0..4u8).prop_map(|(a, b, op)| match op {
            0 => a.add(&b),
            1 => a.sub(&b),
            2 => a.mul(&b),
            _ => a.div(&b).unwrap_or(a),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_axioms(a in ratfunc(), b in ratfunc(), c in ratfunc()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
        if !a.is_zero() {
            prop_assert!(a.div(&a).unwrap().is_one());
            prop_assert_eq!(b.mul(&a).div(&a).unwrap(), b);
        }
    }

    #[test]
    fn printing_is_canonical(a in ratfunc()) {
        let params = random_params();
        let text = a.display(&params).to_string();
        let back: RatFunc = parse_expression(&text, &params).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.display(&params).to_string(), text);
    }

    #[test]
    fn elimination_order_is_irrelevant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=9);
        let v = random_vpmc(&mut rng, n);
        let m = MetricsCounter::new();
        let input = make_order(&v, OrderHeuristic::InputOrder);
        let mut seq: Vec<StateId> = input.sequence().to_vec();
        seq.shuffle(&mut rng);
        let shuffled = EliminationOrder::from_sequence(seq);
        let min_degree = make_order(&v, OrderHeuristic::MinDegree);
        let x = solve_reachability(&v, &input, &m).unwrap();
        let r = solve_expected_reward(&v, &input, RewardFactor::ExpectedVisits, &m).unwrap();
        for order in [&shuffled, &min_degree] {
            prop_assert_eq!(&solve_reachability(&v, order, &m).unwrap(), &x);
            prop_assert_eq!(&solve_expected_reward(&v, order, RewardFactor::ExpectedVisits, &m).unwrap(), &r);
        }
    }

    #[test]
    fn symbolic_solution_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=9);
        let v = random_vpmc(&mut rng, n);
        let Some((val, mc)) = random_valuation(&mut rng, &v, 50) else { return Ok(()) };
        let m = MetricsCounter::new();
        let order = make_order(&v, OrderHeuristic::MinDegree);
        let point = val.point(v.pmc.params()).unwrap();
        let x = solve_reachability(&v, &order, &m).unwrap();
        let r = solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m).unwrap();
        prop_assert_eq!(x.eval(&point), Some(numeric_reachability(&mc).unwrap()));
        prop_assert_eq!(r.eval(&point), Some(numeric_expected_reward(&mc).unwrap()));
    }

    #[test]
    fn chained_caches_match_scratch(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=9);
        let mut model = random_vpmc(&mut rng, n);
        let mut fresh = 0;
        let m = MetricsCounter::new();
        let order = make_order(&model, OrderHeuristic::InputOrder);
        let mut cache = parametric_reachability_vpmc(&model, &order, true, &m).unwrap().cache;
        for _ in 0..3 {
            let Some(diff) = random_legal_diff(&mut rng, &model, &mut fresh) else { break };
            let next = apply_diff(&model, &diff).unwrap();
            let out = reconfigured_reachability(&model, &next, &cache, &m).unwrap();
            let order = make_order(&next, OrderHeuristic::InputOrder);
            let scratch = parametric_reachability_vpmc(&next, &order, true, &m).unwrap();
            prop_assert_eq!(&out.value, &scratch.value);
            prop_assert_eq!(&out.reward, &scratch.reward);
            cache = out.cache;
            model = next;
        }
    }

    #[test]
    fn replaying_an_unchanged_model_costs_nothing_extra(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=9);
        let model = random_vpmc(&mut rng, n);
        let m = MetricsCounter::new();
        let order = make_order(&model, OrderHeuristic::InputOrder);
        let sol = parametric_reachability_vpmc(&model, &order, false, &m).unwrap();
        let full = m.snapshot().total();
        let before = m.snapshot();
        let out = reconfigured_reachability(&model, &model, &sol.cache, &m).unwrap();
        prop_assert_eq!(&out.value, &sol.value);
        prop_assert!(out.stats.eliminated.is_empty());
        prop_assert!((m.snapshot() - before).total() <= full);
    }
}
