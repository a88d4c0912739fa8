use vpmc_core::families::{bench_oscillator, bench_zeroconf, gen_zeroconf, oscillator_sweep, zeroconf_closed_form, zeroconf_diff, OscillatorSpec};
use vpmc_core::incremental::incremental_sweep;
use vpmc_core::Rational;

#[test]
fn zeroconf_sweep_has_constant_incremental_cost() {
    let (initial, _) = gen_zeroconf(1);
    let diffs: Vec<_> = (1..40).map(zeroconf_diff).collect();
    let steps = incremental_sweep(&initial, &diffs, false).unwrap();
    for (k, s) in steps.iter().enumerate() {
        let n = k as u64 + 1;
        assert_eq!(s.value, zeroconf_closed_form(k + 1));
        assert_eq!(s.value, s.scratch_value);
        assert_eq!(s.naive_ops.total(), 3 * n + 3);
    }
    let incr: Vec<u64> = steps.iter().map(|s| s.incremental_ops.total()).collect();
    assert_eq!(&incr[..3], &[6, 9, 10]);
    assert!(incr[2..].iter().all(|&c| c == 10));
    let rows = bench_zeroconf(40).unwrap();
    assert!(rows.windows(2).skip(2).all(|w| w[1].ratio_percent < w[0].ratio_percent));
}

#[test]
fn oscillator_sweep_saves_work() {
    let spec = OscillatorSpec {
        nodes: 5,
        phases: 4,
        refractory: 1,
        eps: Rational::new(1.into(), 10.into()),
        mu: None,
    };
    let (models, diffs) = oscillator_sweep(&spec).unwrap();
    assert_eq!(models.len(), 4);
    assert!(models.last().unwrap().volatile.is_empty());
    let steps = incremental_sweep(&models[0], &diffs, false).unwrap();
    assert!(steps.iter().all(|s| s.value == s.scratch_value));
    let rows = bench_oscillator(&spec).unwrap();
    assert!(rows.iter().all(|r| r.ops_incr_cum <= r.ops_naive_cum));
    let last = rows.last().unwrap();
    assert!(last.ops_incr_cum < last.ops_naive_cum);
}
