//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpmc_cli::document::{parse_model, print_vpmc};
use vpmc_core::eliminate::{
    make_order, solve_expected_reward, solve_reachability, EliminationOrder, OrderHeuristic, RewardFactor,
};
use vpmc_core::families::{
    gen_zeroconf, oscillator_sweep, random_legal_diff, random_vpmc, same_up_to_identity, zeroconf_closed_form,
    zeroconf_diff, OscillatorSpec,
};
use vpmc_core::incremental::{
    apply_diff, incremental_sweep, parametric_reachability_vpmc, reconfigured_reachability,
};
use vpmc_core::model::{preprocess, Pmc, RawModel, StateId, Vpmc};
use vpmc_core::oracle::{instantiate, numeric_expected_reward, numeric_reachability, random_valuation};
use vpmc_core::ratfunc::parse::parse_expression;
use vpmc_core::{Field, MetricsCounter, RatFunc, RatValuation, Rational};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn zeroconf_params() -> Vec<String> {
    vec!["p".into(), "q".into()]
}

fn f(text: &str) -> RatFunc {
    parse_expression(text, &zeroconf_params()).unwrap()
}

/// Zeroconf, n = 1..=20: from-scratch and incremental solutions both equal
/// the closed form.
fn zeroconf_closed_form_check() -> Check {
    let start = Instant::now();
    let counter = MetricsCounter::new();
    for n in 1..=20 {
        let (v, _) = gen_zeroconf(n);
        let order = make_order(&v, OrderHeuristic::InputOrder);
        let x = solve_reachability(&v, &order, &counter).map_err(|e| e.to_string())?;
        ensure(x == zeroconf_closed_form(n), || format!("solve differs at n={n}"))?;
    }
    let (initial, _) = gen_zeroconf(1);
    let diffs: Vec<_> = (1..20).map(zeroconf_diff).collect();
    let steps = incremental_sweep(&initial, &diffs, false).map_err(|e| e.to_string())?;
    for (k, s) in steps.iter().enumerate() {
        ensure(s.value == zeroconf_closed_form(k + 1), || format!("incremental differs at n={}", k + 1))?;
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("n=1..20 solve and incremental match, {:.2?}", start.elapsed()))
}

/// Cache contents for Zeroconf with three probes, and the flushed entry
/// when a fourth probe is added.
fn zeroconf_cache_check() -> Check {
    let (v, diff) = gen_zeroconf(3);
    let id = |name: &str| v.pmc.id(name).unwrap();
    let (k, i, err, s0) = (id("3"), id("i"), id("err"), v.initial());
    let m = MetricsCounter::new();
    let order = make_order(&v, OrderHeuristic::InputOrder);
    let sol = parametric_reachability_vpmc(&v, &order, false, &m).map_err(|e| e.to_string())?;
    let c = &sol.cache;
    let get = |s1: StateId, s2: StateId| c.partial.get(s1, s2).cloned();
    let expect = |what: &str, got: Option<RatFunc>, want: RatFunc| {
        ensure(got.as_ref() == Some(&want), || {
            format!("{what}: got {:?}, want {}", got.map(|g| g.display(&zeroconf_params()).to_string()), want.display(&zeroconf_params()))
        })
    };
    expect("P'(k,err)", get(k, err), f("p^3"))?;
    expect("P'(k,i)", get(k, i), f("p - p^3"))?;
    expect("map(k,i,err)", c.map.get(&(k, i, err)).cloned(), f("q*p^3"))?;
    expect("map(k,i,i)", c.map.get(&(k, i, i)).cloned(), f("q*(1 - p^3)"))?;
    expect("map(i,s0,err)", c.map.get(&(i, s0, err)).cloned(), f("q*p^3 / (1 - q*(1 - p^3))"))?;
    let next = apply_diff(&v, &diff).map_err(|e| e.to_string())?;
    let out = reconfigured_reachability(&v, &next, c, &m).map_err(|e| e.to_string())?;
    let flushed = out.stats.flushed.iter().find(|(a, b, _)| *a == k && *b == i).map(|(_, _, w)| w.clone());
    expect("flushed P(k,i)", flushed, f("1 - p^3"))?;
    ensure(out.value == zeroconf_closed_form(4), || "value after adding a probe".into())?;
    Ok("P', map entries and flushed P(k,i) = 1 - p^3 as expected".into())
}

/// Random chained reconfigurations: incremental equals from-scratch for
/// reachability and rewards.
fn random_chains_check() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fresh = 0;
    let mut steps = 0;
    let mut trials = 0;
    while trials < 200 {
        let size = rng.gen_range(3..=11);
        let mut model = random_vpmc(&mut rng, size);
        if model.pmc.num_states() > 12 {
            continue;
        }
        trials += 1;
        let m = MetricsCounter::new();
        let order = make_order(&model, OrderHeuristic::InputOrder);
        let mut cache = parametric_reachability_vpmc(&model, &order, true, &m).map_err(|e| e.to_string())?.cache;
        for _ in 0..rng.gen_range(1..=3) {
            let Some(diff) = random_legal_diff(&mut rng, &model, &mut fresh) else { break };
            let next = apply_diff(&model, &diff).map_err(|e| e.to_string())?;
            let out = reconfigured_reachability(&model, &next, &cache, &m).map_err(|e| format!("trial {trials}: {e}"))?;
            let scratch = parametric_reachability_vpmc(&next, &make_order(&next, OrderHeuristic::InputOrder), true, &m)
                .map_err(|e| e.to_string())?;
            ensure(out.value == scratch.value && out.reward == scratch.reward, || {
                format!("trial {trials}: incremental differs from scratch")
            })?;
            steps += 1;
            cache = out.cache;
            model = next;
        }
    }
    ensure(steps >= 200, || format!("only {steps} reconfigurations were generated"))?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("200 trials, {steps} reconfigurations, {:.2?}", start.elapsed()))
}

/// Every elimination order gives the same reachability and reward.
fn order_independence_check() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut orders = 0usize;
    let mut models = 0;
    while models < 50 {
        let v = { let n = rng.gen_range(3..=6); random_vpmc(&mut rng, n) };
        if v.pmc.num_states() > 6 {
            continue;
        }
        models += 1;
        let m = MetricsCounter::new();
        let eliminable: Vec<StateId> = v.pmc.states().filter(|&s| s != v.initial() && s != v.target).collect();
        let mut reference: Option<(RatFunc, RatFunc)> = None;
        for perm in eliminable.iter().copied().permutations(eliminable.len()) {
            let order = EliminationOrder::from_sequence(perm);
            let x = solve_reachability(&v, &order, &m).map_err(|e| e.to_string())?;
            let r = solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m).map_err(|e| e.to_string())?;
            orders += 1;
            match &reference {
                None => reference = Some((x, r)),
                Some(want) => ensure(want == &(x, r), || format!("model {models}: orders disagree"))?,
            }
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("50 models, {orders} orders agree, {:.2?}", start.elapsed()))
}

/// Exact numeric oracle agreement; the oracle also rejects the
/// self-transitions-only reward factor.
fn oracle_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut points = 0;
    while points < 50 {
        let v = { let n = rng.gen_range(3..=10); random_vpmc(&mut rng, n) };
        let Some((val, mc)) = random_valuation(&mut rng, &v, 50) else { continue };
        let m = MetricsCounter::new();
        let order = make_order(&v, OrderHeuristic::MinDegree);
        let x = solve_reachability(&v, &order, &m).map_err(|e| e.to_string())?;
        let r = solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m).map_err(|e| e.to_string())?;
        let point = val.point(v.pmc.params())?;
        let want_x = numeric_reachability(&mc).map_err(|e| e.to_string())?;
        let want_r = numeric_expected_reward(&mc).map_err(|e| e.to_string())?;
        ensure(x.eval(&point) == Some(want_x), || format!("reachability differs at {val}"))?;
        ensure(r.eval(&point) == Some(want_r), || format!("expected reward differs at {val}"))?;
        points += 1;
    }
    // s0 -> e -> t with probability 1 and r(e) = 3.
    let mut pmc: Pmc<RatFunc> = Pmc::new(Vec::new());
    let s0 = pmc.add_state("s0").unwrap();
    let e = pmc.add_state("e").unwrap();
    let t = pmc.add_state("t").unwrap();
    pmc.set_initial(s0);
    pmc.set(s0, e, RatFunc::one());
    pmc.set(e, t, RatFunc::one());
    let raw = RawModel {
        pmc,
        targets: [t].into_iter().collect(),
        volatile: Default::default(),
        reward: [(e, RatFunc::from_i64(3))].into_iter().collect(),
    };
    let v = preprocess(&raw).map_err(|e| e.to_string())?;
    let mc = instantiate(&v, &RatValuation::new()).map_err(|e| e.to_string())?;
    let want = numeric_expected_reward(&mc).map_err(|e| e.to_string())?;
    ensure(want == Rational::from_integer(3.into()), || format!("oracle gives {want}"))?;
    let m = MetricsCounter::new();
    let order = make_order(&v, OrderHeuristic::InputOrder);
    let good = solve_expected_reward(&v, &order, RewardFactor::ExpectedVisits, &m).map_err(|e| e.to_string())?;
    let bad = solve_expected_reward(&v, &order, RewardFactor::SelfTransitionsOnly, &m).map_err(|e| e.to_string())?;
    ensure(good.constant_value() == Some(want.clone()), || "expected-visits factor disagrees".into())?;
    ensure(bad.constant_value() != Some(want), || "self-transitions-only factor was not detected".into())?;
    Ok(format!(
        "50 points agree; on s0 -> e -> t the oracle gives 3, 1/(1-c) gives 3, c/(1-c) gives {}",
        bad.display(&[])
    ))
}

/// Least-squares line through `(x, y)`; returns the relative residual
/// `|y - fit| / |y|`.
fn linear_residual(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - icpt).powi(2)).sum();
    let norm: f64 = ys.iter().map(|y| y * y).sum();
    (res / norm).sqrt()
}

/// Zeroconf n = 1..=100 operation counts.
fn zeroconf_cost_check() -> Check {
    let start = Instant::now();
    let (initial, _) = gen_zeroconf(1);
    let diffs: Vec<_> = (1..100).map(zeroconf_diff).collect();
    let steps = incremental_sweep(&initial, &diffs, false).map_err(|e| e.to_string())?;
    let incr: Vec<u64> = steps.iter().map(|s| s.incremental_ops.total()).collect();
    let naive: Vec<u64> = steps.iter().map(|s| s.naive_ops.total()).collect();
    ensure(incr[2..].iter().all(|&c| c == incr[2]), || format!("incremental ops vary from n=3: {:?}", &incr[..10]))?;
    let xs: Vec<f64> = (1..=100).map(|n| n as f64).collect();
    let ys: Vec<f64> = naive.iter().map(|&c| c as f64).collect();
    let residual = linear_residual(&xs, &ys);
    ensure(residual < 0.05, || format!("naive ops residual {residual:.4}"))?;
    let mut ratios = Vec::new();
    let (mut ci, mut cn) = (0u64, 0u64);
    for (a, b) in incr.iter().zip(&naive) {
        ci += a;
        cn += b;
        ratios.push(Rational::new(ci.into(), cn.into()));
    }
    ensure(ratios[2..].windows(2).all(|w| w[1] < w[0]), || "cumulative ratio not strictly decreasing".into())?;
    let last = ratios[99].clone();
    ensure(last < Rational::new(1.into(), 10.into()), || format!("final ratio {last}"))?;
    within(start, Duration::from_secs(120))?;
    let pct = vpmc_core::oracle::to_decimal(&(last * Rational::from_integer(100.into())), 2);
    Ok(format!(
        "incremental {} ops per step from n=3, naive residual {:.2}%, final ratio {pct}%, {:.2?}",
        incr[2],
        residual * 100.0,
        start.elapsed()
    ))
}

/// Oscillator sweeps over the refractory length.
fn oscillator_check() -> Check {
    let start = Instant::now();
    let mut summary = Vec::new();
    for t in [4, 5] {
        let spec = OscillatorSpec {
            nodes: 5,
            phases: t,
            refractory: 1,
            eps: Rational::new(1.into(), 10.into()),
            mu: None,
        };
        let (models, diffs) = oscillator_sweep(&spec).map_err(|e| e.to_string())?;
        let steps = incremental_sweep(&models[0], &diffs, false).map_err(|e| e.to_string())?;
        let (mut ci, mut cn) = (0u64, 0u64);
        for (k, s) in steps.iter().enumerate() {
            ensure(s.value == s.scratch_value, || format!("T={t} R={}: incremental differs", k + 1))?;
            ci += s.incremental_ops.total();
            cn += s.naive_ops.total();
            ensure(ci <= cn, || format!("T={t} R={}: {ci} > {cn}", k + 1))?;
        }
        summary.push(format!("T={t}: {ci}/{cn} ops"));
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("{}, {:.2?}", summary.join(", "), start.elapsed()))
}

const MALFORMED: &[(&str, usize)] = &[
    ("state a;\nstate b\ninit a;\n", 3),
    ("state a; state b;\ninit a;\ntarget b;\na -> c : 1;\n", 4),
    ("state a;\nstate a;\n", 2),
    ("params p;\nstate a; state b;\ninit a;\ntarget b;\na -> b : p;\na -> b : 1 - p;\n", 6),
    ("state a; state b;\ninit a;\ntarget b;\n\na -> b : 0;\n", 5),
    ("state a; state b;\ninit a;\ntarget b;\na -> b : x;\n", 4),
    ("params p, p;\n", 1),
    ("state a;\ninit a;\n", 3),
    ("state a; state b;\ninit a;\ntarget b;\na => b : 1;\n", 4),
    ("params p;\nstate a; state b;\ninit a;\ntarget b;\na -> b : p / (p - p);\n", 5),
];

/// Printing and parsing random models round-trips; malformed documents are
/// rejected by the binary with a line-addressed message and exit code 2.
fn document_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..100 {
        let v: Vpmc<RatFunc> = { let n = rng.gen_range(2..=11); random_vpmc(&mut rng, n) };
        let text = print_vpmc(&v);
        let raw = parse_model(&text).map_err(|e| format!("model {k}: {e}"))?;
        let back = preprocess(&raw).map_err(|e| format!("model {k}: {e}"))?;
        ensure(same_up_to_identity(&back, &v) && print_vpmc(&back) == text, || format!("model {k} changed"))?;
    }
    let dir = std::env::temp_dir().join(format!("vpmc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for (k, (doc, line)) in MALFORMED.iter().enumerate() {
        let path = dir.join(format!("bad{k}.pmc"));
        std::fs::write(&path, doc).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_vpmc"))
            .arg("validate")
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        let stderr = String::from_utf8_lossy(&out.stderr);
        let prefix = format!("error: {}:{line}:", path.display());
        ensure(out.status.code() == Some(2), || format!("document {k}: exit {:?}", out.status.code()))?;
        ensure(stderr.starts_with(&prefix), || format!("document {k}: `{}`", stderr.trim()))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok("100 models round-trip; 10 malformed documents exit 2 with line-addressed errors".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 zeroconf closed form", zeroconf_closed_form_check),
        ("2 zeroconf cache contents", zeroconf_cache_check),
        ("3 random incremental equivalence", random_chains_check),
        ("4 elimination order independence", order_independence_check),
        ("5 numeric oracle agreement", oracle_check),
        ("6 zeroconf operation counts", zeroconf_cost_check),
        ("7 oscillator sweeps", oscillator_check),
        ("8 document round trip and errors", document_check),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
