use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpmc_core::eliminate::{make_order, OrderHeuristic};
use vpmc_core::families::{random_legal_diff, random_vpmc};
use vpmc_core::incremental::{apply_diff, parametric_reachability_vpmc, reconfigured_reachability};
use vpmc_core::MetricsCounter;

#[test]
fn chained_reconfigurations_match_scratch() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fresh = 0;
    let mut steps = 0;
    let mut replays = 0;
    for _ in 0..300 {
        let size = rng.gen_range(3..=10);
        let mut model = random_vpmc(&mut rng, size);
        let m = MetricsCounter::new();
        let order = make_order(&model, OrderHeuristic::InputOrder);
        let mut cache = parametric_reachability_vpmc(&model, &order, true, &m).unwrap().cache;
        for _ in 0..rng.gen_range(1..=3) {
            let Some(diff) = random_legal_diff(&mut rng, &model, &mut fresh) else { break };
            let next = apply_diff(&model, &diff).unwrap();
            let out = reconfigured_reachability(&model, &next, &cache, &m).unwrap();
            let scratch = parametric_reachability_vpmc(
                &next,
                &make_order(&next, OrderHeuristic::InputOrder),
                true,
                &m,
            )
            .unwrap();
            assert_eq!(out.value, scratch.value);
            assert_eq!(out.reward, scratch.reward);
            replays += out.stats.replayed.len();
            steps += 1;
            cache = out.cache;
            model = next;
        }
    }
    assert!(steps > 300, "{steps}");
    assert!(replays > 100, "{replays}");
}
