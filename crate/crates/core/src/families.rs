//! Generators for the benchmark families, the sweep driver behind the
//! benchmark tables, and random models and legal reconfigurations for
//! property tests.
//!
//! # Zeroconf
//!
//! A host picks an address that is in use with probability `q` and probes
//! it `n` times; each probe is answered (revealing the clash) with
//! probability `1-p`, sending the host back to the start `i`. If all `n`
//! probes go unanswered the host wrongly keeps the address (`err`). The
//! model is built with states `1..n, i, ok, err` (in that creation order),
//! initial state `i`, target `err`; preprocessing prunes `ok` and adds a
//! fresh initial state `s0`. The volatile states are `i` and `n`, and the
//! reconfiguration to `n+1` inserts probe `n+1` in front of probe `n`.
//!
//! # Oscillators
//!
//! A stand-in for pulse-coupled oscillator synchronisation. A state is an
//! occupancy vector `(k_1, ..., k_T)`: `k_φ` nodes are at phase `φ`, and
//! the nodes sum to `N`. Each round the `F = k_T` nodes at phase `T` fire
//! and wrap to phase 1. A node at phase `φ < T` with `φ > R` (outside the
//! refractory period) perceives each firing node independently with
//! probability `1-mu`; perceiving `m` firings moves it to phase
//! `min(T, φ + 1 + round(eps·φ·m))` (halves round up), except that a node
//! pushed to phase `T` by at least one perceived firing fires in the same
//! round and joins the firing nodes at phase 1. Refractory nodes,
//! and all nodes when nothing fires, advance by one phase. Nodes move
//! independently, so successor vectors follow products of multinomial
//! distributions. Synchronised vectors (all nodes at one phase) are merged
//! into one absorbing target `sync`; the initial state `init` moves to
//! every occupancy vector with equal probability.
//!
//! In a sweep over `R`, the volatile set of the model for `R` consists of
//! the states that the step to `R + 1` removes or whose transitions it
//! changes (at either end); the model for `T` has no volatile states. When
//! a step needs a state that was not volatile in the previous model, the
//! incremental solver falls back to a fresh solve for that step.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::incremental::{apply_diff, changed_entries, incremental_sweep, Diff};
use crate::model::{preprocess, Pmc, RawModel, StateId, Vpmc};
use crate::scalar::Field;
use crate::{RatFunc, Rational};

/// Zeroconf family member.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ZeroconfSpec {
    /// Number of probes, at least 1.
    pub n: usize,
}

/// Parameters of the oscillator stand-in family.
#[derive(Clone, PartialEq, Debug)]
pub struct OscillatorSpec {
    /// Number of nodes.
    pub nodes: usize,
    /// Number of phases.
    pub phases: usize,
    /// Refractory length.
    pub refractory: usize,
    /// Coupling strength.
    pub eps: Rational,
    /// Message loss probability; `None` keeps it as the parameter `mu`.
    pub mu: Option<Rational>,
}

impl OscillatorSpec {
    pub fn check(&self) -> std::result::Result<(), String> {
        let zero = <Rational as Zero>::zero();
        let one = <Rational as One>::one();
        if self.nodes < 1 {
            return Err("N must be at least 1".into());
        }
        if self.phases < 2 {
            return Err("T must be at least 2".into());
        }
        if self.refractory < 1 || self.refractory > self.phases {
            return Err("R must lie in 1..=T".into());
        }
        if self.eps <= zero || self.eps >= one {
            return Err("eps must lie strictly between 0 and 1".into());
        }
        if let Some(mu) = &self.mu {
            if *mu < zero || *mu >= one {
                return Err("mu must lie in [0, 1)".into());
            }
        }
        Ok(())
    }
}

fn zeroconf_params() -> Vec<String> {
    vec!["p".into(), "q".into()]
}

/// Closed form `q p^n / (1 - q (1 - p^n))` of Zeroconf reachability.
pub fn zeroconf_closed_form(n: usize) -> RatFunc {
    let p = RatFunc::var(0);
    let q = RatFunc::var(1);
    let pn = p.pow(n as u32);
    let num = q.mul(&pn);
    let den = RatFunc::one().sub(&q.mul(&RatFunc::one().sub(&pn)));
    num.div(&den).expect("nonzero denominator")
}

/// Preprocessed Zeroconf model with `n` probes and the reconfiguration to
/// `n + 1` probes.
pub fn gen_zeroconf(n: usize) -> (Vpmc<RatFunc>, Diff<RatFunc>) {
    assert!(n >= 1, "Zeroconf needs at least one probe");
    let p = RatFunc::var(0);
    let q = RatFunc::var(1);
    let one = RatFunc::one();
    let mut pmc = Pmc::new(zeroconf_params());
    let probes: Vec<StateId> = (1..=n).map(|j| pmc.add_state(&j.to_string()).unwrap()).collect();
    let i = pmc.add_state("i").unwrap();
    let ok = pmc.add_state("ok").unwrap();
    let err = pmc.add_state("err").unwrap();
    pmc.set_initial(i);
    pmc.set(i, probes[n - 1], q.clone());
    pmc.set(i, ok, one.sub(&q));
    for j in (1..n).rev() {
        pmc.set(probes[j], probes[j - 1], p.clone());
    }
    pmc.set(probes[0], err, p.clone());
    for &s in &probes {
        pmc.set(s, i, one.sub(&p));
    }
    pmc.set(ok, ok, one.clone());
    pmc.set(err, err, one);
    let raw = RawModel {
        pmc,
        targets: [err].into_iter().collect(),
        volatile: [i, probes[n - 1]].into_iter().collect(),
        reward: BTreeMap::new(),
    };
    let vpmc = preprocess(&raw).expect("Zeroconf is well formed");
    (vpmc, zeroconf_diff(n))
}

/// Reconfiguration of the Zeroconf model from `n` to `n + 1` probes.
pub fn zeroconf_diff(n: usize) -> Diff<RatFunc> {
    let p = RatFunc::var(0);
    let q = RatFunc::var(1);
    let new = (n + 1).to_string();
    let old = n.to_string();
    Diff {
        added_states: vec![(new.clone(), None)],
        removed_states: Vec::new(),
        set_transitions: vec![
            ("i".into(), new.clone(), q),
            (new.clone(), old.clone(), p.clone()),
            (new.clone(), "i".into(), RatFunc::one().sub(&p)),
            ("i".into(), old, RatFunc::zero()),
        ],
        set_rewards: Vec::new(),
        next_volatile: Some(["i".to_string(), new].into_iter().collect()),
    }
}

/// Diff turning `old` into `new`, matching states by name. Entries incident
/// to removed states are dropped implicitly; the next volatile set is the
/// volatile set of `new`.
pub fn diff_between<W: Field>(old: &Vpmc<W>, new: &Vpmc<W>) -> Diff<W> {
    let mut diff = Diff::default();
    let old_names: BTreeMap<&str, StateId> = old.pmc.states().map(|s| (old.pmc.name(s), s)).collect();
    let new_names: BTreeMap<&str, StateId> = new.pmc.states().map(|s| (new.pmc.name(s), s)).collect();
    for (name, &s) in &new_names {
        if !old_names.contains_key(name) {
            diff.added_states.push((name.to_string(), new.reward.get(&s).cloned()));
        }
    }
    for name in old_names.keys() {
        if !new_names.contains_key(name) {
            diff.removed_states.push(name.to_string());
        }
    }
    let mut old_entries = BTreeMap::new();
    for (a, b, w) in old.pmc.transitions() {
        let (na, nb) = (old.pmc.name(a), old.pmc.name(b));
        if new_names.contains_key(na) && new_names.contains_key(nb) {
            old_entries.insert((na.to_string(), nb.to_string()), w.clone());
        }
    }
    for (a, b, w) in new.pmc.transitions() {
        let key = (new.pmc.name(a).to_string(), new.pmc.name(b).to_string());
        if old_entries.remove(&key).as_ref() != Some(w) {
            diff.set_transitions.push((key.0, key.1, w.clone()));
        }
    }
    for ((a, b), _) in old_entries {
        diff.set_transitions.push((a, b, W::zero()));
    }
    for (name, &s) in &old_names {
        if let Some(&t) = new_names.get(name) {
            let r_new = new.reward_of(t);
            if old.reward_of(s) != r_new {
                diff.set_rewards.push((name.to_string(), r_new));
            }
        }
    }
    diff.next_volatile = Some(new.volatile.iter().map(|&s| new.pmc.name(s).to_string()).collect());
    diff
}

/// Occupancy vectors of `nodes` nodes over `phases` phases, in
/// lexicographic order.
pub fn occupancy_vectors(nodes: usize, phases: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(nodes, phases, &mut Vec::new(), &mut out);
    out
}

fn vector_name(v: &[usize]) -> String {
    let parts: Vec<String> = v.iter().map(|k| k.to_string()).collect();
    format!("v{}", parts.join("_"))
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, j| acc * (n - j) as u64 / (j + 1) as u64)
}

/// Phase reached from `phase` after perceiving `m` firings (1-based phases).
fn jump(phase: usize, m: usize, eps: &Rational, phases: usize) -> usize {
    let x = eps * Rational::from_integer((phase * m).into());
    let rounded = (x + Rational::new(1.into(), 2.into())).floor().to_integer();
    let step: usize = rounded.try_into().expect("small jump");
    (phase + 1 + step).min(phases)
}

/// Successor distribution of a single node at `phase` when `fired` nodes fire.
fn node_moves(spec: &OscillatorSpec, phase: usize, fired: usize, mu: &RatFunc) -> Vec<(usize, RatFunc)> {
    let t = spec.phases;
    if phase == t {
        return vec![(1, RatFunc::one())];
    }
    if phase <= spec.refractory || fired == 0 {
        return vec![(phase + 1, RatFunc::one())];
    }
    let seen = RatFunc::one().sub(mu);
    let mut by_dest: BTreeMap<usize, RatFunc> = BTreeMap::new();
    for m in 0..=fired {
        let pr = RatFunc::from_i64(binomial(fired, m) as i64)
            .mul(&seen.pow(m as u32))
            .mul(&mu.pow((fired - m) as u32));
        if pr.is_zero() {
            continue;
        }
        let d = match jump(phase, m, &spec.eps, t) {
            // Pushed to the threshold: fires together with the firing nodes.
            d if m > 0 && d == t => 1,
            d => d,
        };
        let slot = by_dest.entry(d).or_insert_with(RatFunc::zero);
        *slot = slot.add(&pr);
    }
    by_dest.into_iter().filter(|(_, w)| !w.is_zero()).collect()
}

/// Distribution of where `count` independent nodes end up, as vectors over
/// `phases` phases (index 0 is phase 1).
fn cluster_moves(count: usize, moves: &[(usize, RatFunc)], phases: usize) -> Vec<(Vec<usize>, RatFunc)> {
    let mut dist: Vec<(Vec<usize>, RatFunc)> = vec![(vec![0; phases], RatFunc::one())];
    for _ in 0..count {
        let mut next: BTreeMap<Vec<usize>, RatFunc> = BTreeMap::new();
        for (v, w) in &dist {
            for (d, pr) in moves {
                let mut u = v.clone();
                u[d - 1] += 1;
                let contrib = w.mul(pr);
                let slot = next.entry(u).or_insert_with(RatFunc::zero);
                *slot = slot.add(&contrib);
            }
        }
        dist = next.into_iter().collect();
    }
    dist
}

fn is_synchronised(v: &[usize], nodes: usize) -> bool {
    v.contains(&nodes)
}

/// Unpreprocessed oscillator model for one refractory length.
fn oscillator_raw(spec: &OscillatorSpec) -> RawModel<RatFunc> {
    let params = if spec.mu.is_none() { vec!["mu".to_string()] } else { Vec::new() };
    let mu = match &spec.mu {
        None => RatFunc::var(0),
        Some(c) => RatFunc::constant(c.clone()),
    };
    let t = spec.phases;
    let n = spec.nodes;
    let vectors = occupancy_vectors(n, t);
    let mut pmc = Pmc::new(params);
    let mut ids: BTreeMap<Vec<usize>, StateId> = BTreeMap::new();
    for v in vectors.iter().filter(|v| !is_synchronised(v, n)) {
        ids.insert(v.clone(), pmc.add_state(&vector_name(v)).unwrap());
    }
    let sync = pmc.add_state("sync").unwrap();
    let init = pmc.add_state("init").unwrap();
    pmc.set_initial(init);
    let share = RatFunc::constant(Rational::new(1.into(), (vectors.len() as i64).into()));
    let mut init_row: BTreeMap<StateId, RatFunc> = BTreeMap::new();
    for v in &vectors {
        let dest = ids.get(v).copied().unwrap_or(sync);
        let slot = init_row.entry(dest).or_insert_with(RatFunc::zero);
        *slot = slot.add(&share);
    }
    for (d, w) in init_row {
        pmc.set(init, d, w);
    }
    for (v, &s) in &ids {
        let fired = v[t - 1];
        let mut dist: Vec<(Vec<usize>, RatFunc)> = vec![(vec![0; t], RatFunc::one())];
        for phase in 1..=t {
            let count = v[phase - 1];
            if count == 0 {
                continue;
            }
            let moves = node_moves(spec, phase, fired, &mu);
            let part = cluster_moves(count, &moves, t);
            let mut next: BTreeMap<Vec<usize>, RatFunc> = BTreeMap::new();
            for (a, wa) in &dist {
                for (b, wb) in &part {
                    let u: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    let slot = next.entry(u).or_insert_with(RatFunc::zero);
                    *slot = slot.add(&wa.mul(wb));
                }
            }
            dist = next.into_iter().collect();
        }
        let mut row: BTreeMap<StateId, RatFunc> = BTreeMap::new();
        for (u, w) in dist {
            let dest = ids.get(&u).copied().unwrap_or(sync);
            let slot = row.entry(dest).or_insert_with(RatFunc::zero);
            *slot = slot.add(&w);
        }
        for (d, w) in row {
            pmc.set(s, d, w);
        }
    }
    RawModel {
        pmc,
        targets: [sync].into_iter().collect(),
        volatile: BTreeSet::new(),
        reward: BTreeMap::new(),
    }
}

/// Names of the states of `old` that a reconfiguration to `new` touches:
/// removed states and old endpoints of changed transitions.
fn touched_states<W: Field>(old: &Vpmc<W>, new: &Vpmc<W>) -> BTreeSet<String> {
    let d = diff_between(old, new);
    let mut out: BTreeSet<String> = BTreeSet::new();
    for name in &d.removed_states {
        let r = old.pmc.id(name).expect("removed state exists in the old model");
        out.extend(old.pmc.neighbourhood(r).into_iter().map(|s| old.pmc.name(s).to_string()));
        out.insert(name.clone());
    }
    for (a, b, _) in &d.set_transitions {
        for name in [a, b] {
            if old.pmc.id(name).is_some() {
                out.insert(name.clone());
            }
        }
    }
    let protected = [old.pmc.name(old.initial()), old.pmc.name(old.target)];
    out.retain(|n| !protected.contains(&n.as_str()));
    out
}

/// Models of a sweep and the diffs between consecutive ones.
pub type Sweep = (Vec<Vpmc<RatFunc>>, Vec<Diff<RatFunc>>);

/// Models for every refractory length `R = spec.refractory ..= T`, each
/// with its volatile set, and the diffs between consecutive ones.
pub fn oscillator_sweep(spec: &OscillatorSpec) -> Result<Sweep> {
    spec.check().map_err(crate::Error::InvalidModel)?;
    let mut models = Vec::new();
    for r in spec.refractory..=spec.phases {
        let s = OscillatorSpec {
            refractory: r,
            ..spec.clone()
        };
        models.push(preprocess(&oscillator_raw(&s))?);
    }
    let touched: Vec<BTreeSet<String>> = models.windows(2).map(|w| touched_states(&w[0], &w[1])).collect();
    for (model, names) in models.iter_mut().zip(&touched) {
        model.volatile = names.iter().filter_map(|name| model.pmc.id(name)).collect();
    }
    let diffs = models.windows(2).map(|w| diff_between(&w[0], &w[1])).collect();
    Ok((models, diffs))
}

/// Oscillator model for `spec.refractory` with the diff to the next
/// refractory length (empty when `R = T`).
pub fn gen_oscillator(spec: &OscillatorSpec) -> Result<(Vpmc<RatFunc>, Diff<RatFunc>)> {
    let (mut models, mut diffs) = oscillator_sweep(spec)?;
    let diff = if diffs.is_empty() { Diff::default() } else { diffs.swap_remove(0) };
    Ok((models.swap_remove(0), diff))
}

/// One row of a benchmark table.
#[derive(Clone, PartialEq, Debug)]
pub struct BenchRow {
    /// Family parameter of this step (`n` or `R`).
    pub step: usize,
    pub value: RatFunc,
    pub ops_naive_cum: u64,
    pub ops_incr_cum: u64,
    /// `100 * ops_incr_cum / ops_naive_cum`, exactly.
    pub ratio_percent: Rational,
}

/// Solves `initial` and each reconfiguration in turn, incrementally and
/// from scratch, accumulating operation counts. Step labels start at
/// `first_step`.
pub fn bench_family(initial: &Vpmc<RatFunc>, diffs: &[Diff<RatFunc>], first_step: usize) -> Result<Vec<BenchRow>> {
    let steps = incremental_sweep(initial, diffs, false)?;
    let mut naive = 0u64;
    let mut incr = 0u64;
    let mut rows = Vec::with_capacity(steps.len());
    for (k, s) in steps.into_iter().enumerate() {
        naive += s.naive_ops.total();
        incr += s.incremental_ops.total();
        let ratio = if naive == 0 {
            Rational::from_integer(100.into())
        } else {
            Rational::new((100 * incr).into(), naive.into())
        };
        rows.push(BenchRow {
            step: first_step + k,
            value: s.value,
            ops_naive_cum: naive,
            ops_incr_cum: incr,
            ratio_percent: ratio,
        });
    }
    Ok(rows)
}

/// Zeroconf sweep over `n = 1..=n_max`.
pub fn bench_zeroconf(n_max: usize) -> Result<Vec<BenchRow>> {
    let (initial, _) = gen_zeroconf(1);
    let diffs: Vec<Diff<RatFunc>> = (1..n_max).map(zeroconf_diff).collect();
    bench_family(&initial, &diffs, 1)
}

/// Oscillator sweep over `R = spec.refractory..=T`.
pub fn bench_oscillator(spec: &OscillatorSpec) -> Result<Vec<BenchRow>> {
    let (models, diffs) = oscillator_sweep(spec)?;
    bench_family(&models[0], &diffs, spec.refractory)
}

// ---------------------------------------------------------------------------
// Random models and reconfigurations.

/// Parameters used by the random generators.
pub fn random_params() -> Vec<String> {
    vec!["p".into(), "q".into()]
}

/// A random weight in `(0, 1)` for every point of `(0, 1)^2`.
fn random_split<R: Rng + ?Sized>(rng: &mut R) -> RatFunc {
    let p = RatFunc::var(0);
    let q = RatFunc::var(1);
    let half = RatFunc::constant(Rational::new(1.into(), 2.into()));
    let third = RatFunc::constant(Rational::new(1.into(), 3.into()));
    match rng.gen_range(0..6) {
        0 => p,
        1 => q,
        2 => half,
        3 => third,
        4 => p.mul(&half),
        _ => RatFunc::one().sub(&p.mul(&q)),
    }
}

/// Splits `mass` into `k` positive parts that sum to it exactly.
fn random_distribution<R: Rng + ?Sized>(rng: &mut R, mass: &RatFunc, k: usize) -> Vec<RatFunc> {
    let mut parts = Vec::with_capacity(k);
    let mut rest = mass.clone();
    for _ in 1..k {
        let x = random_split(rng);
        parts.push(rest.mul(&x));
        rest = rest.mul(&RatFunc::one().sub(&x));
    }
    parts.push(rest);
    parts.shuffle(rng);
    parts
}

fn random_reward<R: Rng + ?Sized>(rng: &mut R) -> RatFunc {
    match rng.gen_range(0..4) {
        0 => RatFunc::var(0),
        1 => RatFunc::var(1).add(&RatFunc::one()),
        _ => RatFunc::from_i64(rng.gen_range(1..5)),
    }
}

/// Random preprocessed model with `states` named states `x0..` (initial
/// `x0`, target the last), every row a distribution in `p, q`, rewards on
/// some states and a random volatile set.
pub fn random_vpmc<R: Rng + ?Sized>(rng: &mut R, states: usize) -> Vpmc<RatFunc> {
    assert!(states >= 2);
    let mut pmc = Pmc::new(random_params());
    let ids: Vec<StateId> = (0..states).map(|k| pmc.add_state(&format!("x{k}")).unwrap()).collect();
    pmc.set_initial(ids[0]);
    let target = ids[states - 1];
    let mut reward = BTreeMap::new();
    for k in 0..states - 1 {
        let mut succ: BTreeSet<StateId> = BTreeSet::new();
        succ.insert(ids[k + 1]);
        for _ in 0..rng.gen_range(0..3) {
            succ.insert(ids[rng.gen_range(0..states)]);
        }
        let succ: Vec<StateId> = succ.into_iter().collect();
        let parts = random_distribution(rng, &RatFunc::one(), succ.len());
        for (s, w) in succ.iter().zip(parts) {
            pmc.set(ids[k], *s, w);
        }
        if rng.gen_bool(0.5) {
            reward.insert(ids[k], random_reward(rng));
        }
    }
    let volatile = ids[1..states - 1].iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
    let raw = RawModel {
        pmc,
        targets: [target].into_iter().collect(),
        volatile,
        reward,
    };
    preprocess(&raw).expect("chain guarantees reachability")
}

/// Random reconfiguration of `vpmc` that is legal with respect to its
/// volatile set: volatile rows are redistributed (entries to states that
/// may not change keep their values), new states are spliced in after
/// volatile states, volatile states may be removed (their incoming mass is
/// redirected to the target) and rewards of volatile states may change.
/// The next volatile set is a random subset of volatile and new states.
/// Returns `None` if no legal change was found.
pub fn random_legal_diff<R: Rng + ?Sized>(rng: &mut R, vpmc: &Vpmc<RatFunc>, fresh: &mut usize) -> Option<Diff<RatFunc>> {
    for _ in 0..20 {
        let diff = random_diff_attempt(rng, vpmc, fresh);
        if apply_diff(vpmc, &diff).is_ok() {
            return Some(diff);
        }
    }
    None
}

fn random_diff_attempt<R: Rng + ?Sized>(rng: &mut R, vpmc: &Vpmc<RatFunc>, fresh: &mut usize) -> Diff<RatFunc> {
    let s0 = vpmc.initial();
    let st = vpmc.target;
    let mut model = vpmc.clone();
    let volatile: Vec<StateId> = vpmc.volatile.iter().copied().collect();
    let mut added: Vec<String> = Vec::new();

    // Remove one volatile state whose neighbours may all change.
    if !volatile.is_empty() && rng.gen_bool(0.25) {
        let r = *volatile.choose(rng).unwrap();
        let allowed = |s: StateId| s == s0 || s == st || vpmc.volatile.contains(&s);
        let neigh = vpmc.pmc.neighbourhood(r);
        if neigh.iter().all(|&s| allowed(s)) {
            let preds: Vec<StateId> = vpmc.pmc.predecessors(r).iter().copied().filter(|&s| s != r).collect();
            for x in preds {
                let w = model.pmc.get(x, r).cloned().unwrap();
                let old = model.pmc.get(x, st).cloned().unwrap_or_else(RatFunc::zero);
                model.pmc.set(x, st, old.add(&w));
            }
            model.pmc.remove_state(r);
            model.volatile.remove(&r);
            model.reward.remove(&r);
        }
    }

    let live_volatile: Vec<StateId> = model.volatile.iter().copied().collect();
    let mut changeable: Vec<StateId> = live_volatile.clone();
    if rng.gen_bool(0.3) {
        changeable.push(s0);
    }
    for &v in &changeable {
        if !rng.gen_bool(0.6) {
            continue;
        }
        let allowed_targets: Vec<StateId> = model
            .pmc
            .states()
            .filter(|&s| s != s0 && (s == st || model.volatile.contains(&s) || (s == v && v != s0)))
            .collect();
        let row: Vec<(StateId, RatFunc)> = model.pmc.row(v).iter().map(|(s, w)| (*s, w.clone())).collect();
        let mut mass = RatFunc::zero();
        for (s, w) in &row {
            if allowed_targets.contains(s) {
                mass = mass.add(w);
                model.pmc.take(v, *s);
            }
        }
        if mass.is_zero() {
            continue;
        }
        let mut dests: BTreeSet<StateId> = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=3) {
            dests.insert(*allowed_targets.choose(rng).unwrap());
        }
        if rng.gen_bool(0.4) {
            let nm = format!("n{}", *fresh);
            *fresh += 1;
            let c = model.pmc.add_state(&nm).unwrap();
            if rng.gen_bool(0.5) {
                model.reward.insert(c, random_reward(rng));
            }
            let c_targets: Vec<StateId> = allowed_targets.iter().copied().filter(|&s| s != v).collect();
            let mut cd: BTreeSet<StateId> = BTreeSet::new();
            cd.insert(st);
            for _ in 0..rng.gen_range(0..3) {
                cd.insert(*c_targets.choose(rng).unwrap());
            }
            if rng.gen_bool(0.3) {
                cd.insert(c);
            }
            let cd: Vec<StateId> = cd.into_iter().collect();
            for (s, w) in cd.iter().zip(random_distribution(rng, &RatFunc::one(), cd.len())) {
                model.pmc.set(c, *s, w);
            }
            dests.insert(c);
            added.push(nm);
        }
        let dests: Vec<StateId> = dests.into_iter().collect();
        for (s, w) in dests.iter().zip(random_distribution(rng, &mass, dests.len())) {
            let old = model.pmc.get(v, *s).cloned().unwrap_or_else(RatFunc::zero);
            model.pmc.set(v, *s, old.add(&w));
        }
    }
    for &v in &live_volatile {
        if rng.gen_bool(0.2) {
            if rng.gen_bool(0.3) {
                model.reward.remove(&v);
            } else {
                model.reward.insert(v, random_reward(rng));
            }
        }
    }

    // Next volatile set: a subset of volatile and new states, occasionally
    // with a non-volatile state (which forces a fresh solve).
    let mut next: BTreeSet<String> = BTreeSet::new();
    for s in model.pmc.states() {
        if s == s0 || s == st {
            continue;
        }
        let was_volatile = model.volatile.contains(&s);
        let is_new = !vpmc.pmc.contains(s) || added.contains(&model.pmc.name(s).to_string());
        let pick = if was_volatile || is_new {
            rng.gen_bool(0.6)
        } else {
            rng.gen_bool(0.02)
        };
        if pick {
            next.insert(model.pmc.name(s).to_string());
        }
    }
    let mut diff = diff_between(vpmc, &model);
    diff.next_volatile = Some(next);
    diff
}

/// Whether two models are equal up to renumbering of states (names,
/// transitions, rewards, volatile sets, initial state and target).
pub fn same_up_to_identity<W: Field>(a: &Vpmc<W>, b: &Vpmc<W>) -> bool {
    let names = |v: &Vpmc<W>| -> BTreeSet<String> { v.pmc.states().map(|s| v.pmc.name(s).to_string()).collect() };
    if names(a) != names(b) {
        return false;
    }
    if a.pmc.name(a.initial()) != b.pmc.name(b.initial()) || a.pmc.name(a.target) != b.pmc.name(b.target) {
        return false;
    }
    let d = diff_between(a, b);
    let vol = |v: &Vpmc<W>| -> BTreeSet<String> { v.volatile.iter().map(|s| v.pmc.name(*s).to_string()).collect() };
    d.set_transitions.is_empty() && d.set_rewards.is_empty() && vol(a) == vol(b)
}

/// Changed transitions between two models that share state identity,
/// by name (useful in diagnostics).
pub fn changed_transition_names<W: Field>(old: &Vpmc<W>, new: &Vpmc<W>) -> Vec<(String, String)> {
    let nm = |s: StateId| {
        if new.pmc.contains(s) {
            new.pmc.name(s).to_string()
        } else {
            old.pmc.name(s).to_string()
        }
    };
    changed_entries(&old.pmc, &new.pmc).into_iter().map(|(a, b)| (nm(a), nm(b))).collect()
}
