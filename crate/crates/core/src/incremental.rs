//! Cached reachability for parametric Markov chains with volatile states,
//! and its reuse when the model is reconfigured around those states.
//!
//! [`parametric_reachability_vpmc`] eliminates all states, recording every
//! contribution between *protected* states (volatile states, the initial
//! state and the target): contributions through non-volatile states are
//! summed into the partial matrix `P'`, contributions through a volatile
//! state are kept per state in the elimination map.
//!
//! [`reconfigured_reachability`] solves a reconfigured model with that
//! cache. Non-volatile states are dropped without arithmetic (their effect
//! is in `P'`); a volatile state whose neighbourhood is untouched by the
//! reconfiguration replays its map entries into `P'`; every other state is
//! genuinely eliminated, after moving its `P'` entries back into the
//! matrix, and infects its neighbourhood. A refreshed cache for the next
//! reconfiguration is built along the way.
//!
//! Rewards follow the same bookkeeping with a partial reward vector and a
//! reward map keyed by `(eliminated state, predecessor)`.

use std::collections::{BTreeMap, BTreeSet};

use crate::eliminate::{
    accumulate, eliminate_with, make_order, EliminationObserver, EliminationOrder, OrderHeuristic,
    RewardFactor,
};
use crate::error::{Error, Result};
use crate::metrics::{MetricsCounter, OpCounts};
use crate::model::{Pmc, StateId, Vpmc};
use crate::scalar::Field;

/// Sparse square matrix over state ids with row and column indices.
#[derive(Clone, PartialEq, Debug)]
pub struct SparseMatrix<W> {
    rows: BTreeMap<StateId, BTreeMap<StateId, W>>,
    cols: BTreeMap<StateId, BTreeSet<StateId>>,
}

impl<W> Default for SparseMatrix<W> {
    fn default() -> Self {
        SparseMatrix {
            rows: BTreeMap::new(),
            cols: BTreeMap::new(),
        }
    }
}

impl<W: Field> SparseMatrix<W> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s1: StateId, s2: StateId) -> Option<&W> {
        self.rows.get(&s1)?.get(&s2)
    }

    pub fn insert(&mut self, s1: StateId, s2: StateId, value: W) {
        if value.is_zero() {
            self.take(s1, s2);
            return;
        }
        self.rows.entry(s1).or_default().insert(s2, value);
        self.cols.entry(s2).or_default().insert(s1);
    }

    /// Adds `value` to an entry, counting an addition if one is present.
    pub fn accumulate(&mut self, s1: StateId, s2: StateId, value: &W, counter: &MetricsCounter) {
        let sum = match self.get(s1, s2) {
            Some(existing) => counter.add(existing, value),
            None => value.clone(),
        };
        self.insert(s1, s2, sum);
    }

    pub fn take(&mut self, s1: StateId, s2: StateId) -> Option<W> {
        let row = self.rows.get_mut(&s1)?;
        let v = row.remove(&s2);
        if row.is_empty() {
            self.rows.remove(&s1);
        }
        if v.is_some() {
            if let Some(col) = self.cols.get_mut(&s2) {
                col.remove(&s1);
                if col.is_empty() {
                    self.cols.remove(&s2);
                }
            }
        }
        v
    }

    /// Removes and returns every entry in the row or column of `s`.
    pub fn take_incident(&mut self, s: StateId) -> Vec<(StateId, StateId, W)> {
        let mut out = Vec::new();
        let succs: Vec<StateId> = self.rows.get(&s).map(|r| r.keys().copied().collect()).unwrap_or_default();
        for t in succs {
            let v = self.take(s, t).expect("row entry");
            out.push((s, t, v));
        }
        let preds: Vec<StateId> = self.cols.get(&s).map(|c| c.iter().copied().collect()).unwrap_or_default();
        for t in preds {
            let v = self.take(t, s).expect("column entry");
            out.push((t, s, v));
        }
        out
    }

    /// States sharing an entry with `s` (excluding `s` unless it has a
    /// self-loop entry).
    pub fn adjacent(&self, s: StateId) -> BTreeSet<StateId> {
        let mut out: BTreeSet<StateId> = self.rows.get(&s).map(|r| r.keys().copied().collect()).unwrap_or_default();
        if let Some(c) = self.cols.get(&s) {
            out.extend(c.iter().copied());
        }
        out
    }

    pub fn entries(&self) -> impl Iterator<Item = (StateId, StateId, &W)> + '_ {
        self.rows
            .iter()
            .flat_map(|(s1, r)| r.iter().map(move |(s2, w)| (*s1, *s2, w)))
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(|r| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Copy keeping only entries with both endpoints in `keep`.
    pub fn restricted(&self, keep: &BTreeSet<StateId>) -> Self {
        let mut out = Self::new();
        for (s1, s2, w) in self.entries() {
            if keep.contains(&s1) && keep.contains(&s2) {
                out.insert(s1, s2, w.clone());
            }
        }
        out
    }
}

/// Reusable artifact of a cached elimination.
#[derive(Clone, PartialEq, Debug)]
pub struct EliminationCache<W> {
    /// `P'`: mass routed between protected states through non-volatile states.
    pub partial: SparseMatrix<W>,
    /// Elimination map `(s_e, s1, s2) -> p` for volatile `s_e`.
    pub map: BTreeMap<(StateId, StateId, StateId), W>,
    /// Reward gathered on protected states from non-volatile states.
    pub partial_reward: BTreeMap<StateId, W>,
    /// Reward map `(s_e, s1) -> c` for volatile `s_e`.
    pub reward_map: BTreeMap<(StateId, StateId), W>,
    /// Order in which states were eliminated (non-volatile first).
    pub order: EliminationOrder,
    pub volatile: BTreeSet<StateId>,
    pub initial: StateId,
    pub target: StateId,
    /// Whether reward bookkeeping was recorded.
    pub with_rewards: bool,
    /// The cache cannot be reused: the model it was refreshed for promoted
    /// states to volatile whose work had been merged into `P'`. The next
    /// reconfiguration is solved from scratch.
    pub stale: bool,
}

impl<W: Field> EliminationCache<W> {
    /// `volatile ∪ {s0, st}`.
    pub fn protected(&self) -> BTreeSet<StateId> {
        let mut m = self.volatile.clone();
        m.insert(self.initial);
        m.insert(self.target);
        m
    }

    /// Map entries recorded for eliminated volatile state `e`.
    pub fn map_entries(&self, e: StateId) -> impl Iterator<Item = (StateId, StateId, &W)> + '_ {
        let lo = (e, StateId(0), StateId(0));
        let hi = (e, StateId(usize::MAX), StateId(usize::MAX));
        self.map.range(lo..=hi).map(|((_, s1, s2), w)| (*s1, *s2, w))
    }

    pub fn reward_map_entries(&self, e: StateId) -> impl Iterator<Item = (StateId, &W)> + '_ {
        let lo = (e, StateId(0));
        let hi = (e, StateId(usize::MAX));
        self.reward_map.range(lo..=hi).map(|((_, s1), w)| (*s1, w))
    }
}

/// A reconfiguration, addressed by state names.
#[derive(Clone, PartialEq, Debug)]
pub struct Diff<W> {
    /// New states with optional reward.
    pub added_states: Vec<(String, Option<W>)>,
    pub removed_states: Vec<String>,
    /// `(from, to, value)`; a zero value removes the entry.
    pub set_transitions: Vec<(String, String, W)>,
    /// Reward changes of existing or added states.
    pub set_rewards: Vec<(String, W)>,
    /// Volatile set of the reconfigured model; `None` keeps the current
    /// set minus removed states.
    pub next_volatile: Option<BTreeSet<String>>,
}

impl<W> Default for Diff<W> {
    fn default() -> Self {
        Diff {
            added_states: Vec::new(),
            removed_states: Vec::new(),
            set_transitions: Vec::new(),
            set_rewards: Vec::new(),
            next_volatile: None,
        }
    }
}

impl<W: Field> Diff<W> {
    pub fn is_empty(&self) -> bool {
        self.added_states.is_empty()
            && self.removed_states.is_empty()
            && self.set_transitions.is_empty()
            && self.set_rewards.is_empty()
            && self.next_volatile.is_none()
    }

    /// Number of `set` lines with a zero value.
    pub fn removed_transitions(&self) -> usize {
        self.set_transitions.iter().filter(|(_, _, w)| w.is_zero()).count()
    }
}

/// Consistent / reconfigured / introduced states of a reconfiguration,
/// plus the states that were removed.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Classification {
    pub consistent: BTreeSet<StateId>,
    pub reconfigured: BTreeSet<StateId>,
    pub introduced: BTreeSet<StateId>,
    pub removed: BTreeSet<StateId>,
}

/// Entries whose values differ between two models sharing state identity.
pub fn changed_entries<W: Field>(old: &Pmc<W>, new: &Pmc<W>) -> Vec<(StateId, StateId)> {
    let mut out = Vec::new();
    let states: BTreeSet<StateId> = old.states().chain(new.states()).collect();
    let empty = BTreeMap::new();
    for s in states {
        let a = if old.contains(s) { old.row(s) } else { &empty };
        let b = if new.contains(s) { new.row(s) } else { &empty };
        for (t, w) in a {
            if b.get(t) != Some(w) {
                out.push((s, *t));
            }
        }
        for t in b.keys() {
            if !a.contains_key(t) {
                out.push((s, *t));
            }
        }
    }
    out
}

/// Classifies states by comparing incident transitions (and, when
/// `with_rewards`, state rewards) of the old and the reconfigured model.
pub fn classify<W: Field>(old: &Vpmc<W>, new: &Vpmc<W>, with_rewards: bool) -> Classification {
    let mut c = Classification::default();
    for s in new.pmc.states() {
        if !old.pmc.contains(s) {
            c.introduced.insert(s);
        }
    }
    for s in old.pmc.states() {
        if !new.pmc.contains(s) {
            c.removed.insert(s);
        }
    }
    let shared = |s: &StateId| old.pmc.contains(*s) && new.pmc.contains(*s);
    for (a, b) in changed_entries(&old.pmc, &new.pmc) {
        for s in [a, b] {
            if shared(&s) {
                c.reconfigured.insert(s);
            }
        }
    }
    if with_rewards {
        for s in old.pmc.states().filter(|s| shared(s)) {
            if old.reward.get(&s) != new.reward.get(&s) {
                c.reconfigured.insert(s);
            }
        }
    }
    for s in old.pmc.states().filter(|s| shared(s)) {
        if !c.reconfigured.contains(&s) {
            c.consistent.insert(s);
        }
    }
    c
}

/// Checks that `new` is a legal reconfiguration of `old` when the states in
/// `volatile` are the ones allowed to change: every changed transition has
/// both endpoints among `volatile`, introduced states, the initial state
/// and the target; only volatile states are removed; rewards change only
/// on volatile, introduced or initial states. Also checks that the initial
/// state and target are shared, that nothing enters the initial state, and
/// the reachability requirement on `new`.
pub fn check_reconfiguration<W: Field>(
    old: &Vpmc<W>,
    new: &Vpmc<W>,
    volatile: &BTreeSet<StateId>,
) -> Result<Classification> {
    let s0 = old.initial();
    let st = old.target;
    if new.initial() != s0 || new.target != st {
        return Err(Error::IllegalReconfiguration(
            "initial state and target must be shared".into(),
        ));
    }
    let class = classify(old, new, true);
    for &s in &class.removed {
        if !volatile.contains(&s) {
            return Err(Error::IllegalReconfiguration(format!(
                "removed state `{}` is not volatile",
                old.pmc.name(s)
            )));
        }
    }
    let allowed = |s: StateId| volatile.contains(&s) || class.introduced.contains(&s) || s == s0 || s == st;
    let name = |s: StateId| {
        if new.pmc.contains(s) {
            new.pmc.name(s).to_string()
        } else {
            old.pmc.name(s).to_string()
        }
    };
    for (a, b) in changed_entries(&old.pmc, &new.pmc) {
        if !allowed(a) || !allowed(b) {
            let culprit = if allowed(a) { b } else { a };
            return Err(Error::IllegalReconfiguration(format!(
                "transition `{}` -> `{}` changes but `{}` is neither volatile nor introduced",
                name(a),
                name(b),
                name(culprit)
            )));
        }
    }
    for s in old.pmc.states().filter(|s| new.pmc.contains(*s)) {
        if old.reward.get(&s) != new.reward.get(&s) && !(volatile.contains(&s) || s == s0) {
            return Err(Error::IllegalReconfiguration(format!(
                "reward of `{}` changes but the state is not volatile",
                name(s)
            )));
        }
    }
    if !new.pmc.predecessors(s0).is_empty() {
        return Err(Error::IllegalReconfiguration(
            "transitions into the initial state are not allowed".into(),
        ));
    }
    new.check_requirements()?;
    Ok(class)
}

/// Builds the reconfigured model. See [`check_reconfiguration`] for the
/// legality conditions, which are checked against `vpmc.volatile`.
pub fn apply_diff<W: Field>(vpmc: &Vpmc<W>, diff: &Diff<W>) -> Result<Vpmc<W>> {
    let mut new = vpmc.clone();
    let s0 = vpmc.initial();
    for (name, reward) in &diff.added_states {
        let s = new.pmc.add_state(name)?;
        if let Some(r) = reward {
            if !r.is_zero() {
                new.reward.insert(s, r.clone());
            }
        }
    }
    for name in &diff.removed_states {
        let s = new.pmc.lookup(name)?;
        if s == s0 || s == vpmc.target {
            return Err(Error::IllegalReconfiguration(format!(
                "cannot remove the initial state or the target (`{name}`)"
            )));
        }
        new.pmc.remove_state(s);
        new.volatile.remove(&s);
        new.reward.remove(&s);
    }
    let mut seen = BTreeSet::new();
    for (from, to, w) in &diff.set_transitions {
        let a = new.pmc.lookup(from)?;
        let b = new.pmc.lookup(to)?;
        if !seen.insert((a, b)) {
            return Err(Error::InvalidModel(format!(
                "transition `{from}` -> `{to}` is set twice"
            )));
        }
        new.pmc.set(a, b, w.clone());
    }
    for (name, r) in &diff.set_rewards {
        let s = new.pmc.lookup(name)?;
        if r.is_zero() {
            new.reward.remove(&s);
        } else {
            new.reward.insert(s, r.clone());
        }
    }
    new.reward.remove(&new.target);
    if let Some(names) = &diff.next_volatile {
        let mut vol = BTreeSet::new();
        for name in names {
            let s = new.pmc.lookup(name)?;
            if s == s0 || s == new.target {
                return Err(Error::InvalidModel(format!(
                    "the initial state and the target cannot be volatile (`{name}`)"
                )));
            }
            vol.insert(s);
        }
        new.volatile = vol;
    }
    check_reconfiguration(vpmc, &new, &vpmc.volatile)?;
    Ok(new)
}

/// Result of a cached elimination.
#[derive(Clone, PartialEq, Debug)]
pub struct CachedSolution<W> {
    /// Reachability probability of the target.
    pub value: W,
    /// Expected accumulated reward, when rewards were tracked.
    pub reward: Option<W>,
    pub cache: EliminationCache<W>,
}

/// Observer routing contributions into a cache under construction.
struct Recorder<'a, W> {
    protected: &'a BTreeSet<StateId>,
    volatile: &'a BTreeSet<StateId>,
    partial: &'a mut SparseMatrix<W>,
    map: &'a mut BTreeMap<(StateId, StateId, StateId), W>,
    partial_reward: &'a mut BTreeMap<StateId, W>,
    reward_map: &'a mut BTreeMap<(StateId, StateId), W>,
    counter: &'a MetricsCounter,
}

impl<W: Field> EliminationObserver<W> for Recorder<'_, W> {
    fn contribution(&mut self, e: StateId, s1: StateId, s2: StateId, p: &W) {
        if !self.protected.contains(&s1) || !self.protected.contains(&s2) {
            return;
        }
        if self.volatile.contains(&e) {
            self.map.insert((e, s1, s2), p.clone());
        } else {
            self.partial.accumulate(s1, s2, p, self.counter);
        }
    }

    fn reward_contribution(&mut self, e: StateId, s1: StateId, c: &W) {
        if !self.protected.contains(&s1) {
            return;
        }
        if self.volatile.contains(&e) {
            self.reward_map.insert((e, s1), c.clone());
        } else {
            accumulate(self.partial_reward, s1, c, self.counter);
        }
    }
}

/// Eliminates every state of `order` (which must rank all non-volatile
/// states before all volatile ones) and returns `P(s0, st)` together with
/// the cache. With `with_rewards`, expected rewards are computed and cached
/// as well.
pub fn parametric_reachability_vpmc<W: Field>(
    vpmc: &Vpmc<W>,
    order: &EliminationOrder,
    with_rewards: bool,
    counter: &MetricsCounter,
) -> Result<CachedSolution<W>> {
    order.check(vpmc)?;
    let protected = vpmc.protected();
    let mut partial = SparseMatrix::new();
    let mut map = BTreeMap::new();
    let mut partial_reward = BTreeMap::new();
    let mut reward_map = BTreeMap::new();
    let mut pmc = vpmc.pmc.clone();
    let mut reward = vpmc.reward.clone();
    {
        let mut rec = Recorder {
            protected: &protected,
            volatile: &vpmc.volatile,
            partial: &mut partial,
            map: &mut map,
            partial_reward: &mut partial_reward,
            reward_map: &mut reward_map,
            counter,
        };
        for &e in order.sequence() {
            let r = if with_rewards { Some(&mut reward) } else { None };
            eliminate_with(&mut pmc, r, e, RewardFactor::ExpectedVisits, counter, &mut rec)?;
        }
    }
    let s0 = vpmc.initial();
    let value = pmc.get(s0, vpmc.target).cloned().unwrap_or_else(W::zero);
    let reward_value = with_rewards.then(|| reward.get(&s0).cloned().unwrap_or_else(W::zero));
    Ok(CachedSolution {
        value,
        reward: reward_value,
        cache: EliminationCache {
            partial,
            map,
            partial_reward,
            reward_map,
            order: order.clone(),
            volatile: vpmc.volatile.clone(),
            initial: s0,
            target: vpmc.target,
            with_rewards,
            stale: false,
        },
    })
}

/// Why a state was genuinely eliminated rather than replayed.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EliminationReason {
    /// The state or a neighbour was infected.
    Infected,
    /// Earlier processing deviated from the cached order around this state.
    OrderChanged,
    /// Introduced state (no cached work exists).
    Introduced,
}

/// What happened during one reconfigured solve.
#[derive(Clone, PartialEq, Debug)]
pub struct ReuseStats<W> {
    pub classification: Classification,
    /// Volatile states whose cached contributions were replayed.
    pub replayed: Vec<StateId>,
    /// States genuinely eliminated, in order.
    pub eliminated: Vec<(StateId, EliminationReason)>,
    /// Partial-matrix entries moved back into the matrix, with the matrix
    /// value after the move.
    pub flushed: Vec<(StateId, StateId, W)>,
    /// The cache could not be used and the model was solved afresh.
    pub fallback: bool,
}

/// Result of [`reconfigured_reachability`].
#[derive(Clone, PartialEq, Debug)]
pub struct Reconfigured<W> {
    pub value: W,
    pub reward: Option<W>,
    /// Cache valid for `new`, for the next reconfiguration.
    pub cache: EliminationCache<W>,
    pub stats: ReuseStats<W>,
}

/// Solves `new`, a reconfiguration of `old`, reusing `cache` (produced for
/// `old`), and returns a refreshed cache for `new`.
///
/// States are processed in four groups: old volatile states that are no
/// longer volatile, introduced states that are not volatile, old volatile
/// states that stay volatile, then introduced volatile states (old states
/// in cached order, introduced states by index). Non-volatile states of
/// `new` are therefore eliminated before its volatile states, which keeps
/// the refreshed cache in the form [`parametric_reachability_vpmc`]
/// produces. A volatile state is replayed only if neither it nor any
/// neighbour is infected and exactly the old states ranked before it have
/// been processed, so its situation is the one its cached entries were
/// computed in.
///
/// If `new` declares as volatile a state that was non-volatile in `old`,
/// that state's work is merged into `P'` and cannot be split out again:
/// `new` is still solved with the cache, but the refreshed cache is marked
/// stale. A stale cache makes the call solve `new` from scratch (which
/// yields a fresh cache).
pub fn reconfigured_reachability<W: Field>(
    old: &Vpmc<W>,
    new: &Vpmc<W>,
    cache: &EliminationCache<W>,
    counter: &MetricsCounter,
) -> Result<Reconfigured<W>> {
    let with_rewards = cache.with_rewards;
    let s0 = cache.initial;
    let st = cache.target;
    if old.initial() != s0 || old.target != st {
        return Err(Error::InvalidModel("cache does not belong to the old model".into()));
    }
    if !cache.stale && cache.volatile != old.volatile {
        return Err(Error::InvalidModel("cache was built for a different volatile set".into()));
    }
    let class = check_reconfiguration(old, new, &old.volatile)?;

    let old_protected = cache.protected();
    let old_stable: Vec<StateId> = cache
        .order
        .sequence()
        .iter()
        .copied()
        .filter(|s| !old_protected.contains(s))
        .collect();
    if cache.stale {
        let order = make_order(new, OrderHeuristic::InputOrder);
        let sol = parametric_reachability_vpmc(new, &order, with_rewards, counter)?;
        return Ok(Reconfigured {
            value: sol.value,
            reward: sol.reward,
            cache: sol.cache,
            stats: ReuseStats {
                classification: class,
                replayed: Vec::new(),
                eliminated: order
                    .sequence()
                    .iter()
                    .map(|s| (*s, EliminationReason::OrderChanged))
                    .collect(),
                flushed: Vec::new(),
                fallback: true,
            },
        });
    }

    let mut pmc = new.pmc.clone();
    let mut reward = if with_rewards { new.reward.clone() } else { BTreeMap::new() };
    // Non-volatile states of the old model are consistent; their work is in P'.
    for &s in &old_stable {
        pmc.remove_state(s);
        reward.remove(&s);
    }
    let mut partial = cache.partial.clone();
    let mut partial_reward = cache.partial_reward.clone();
    for s in &class.removed {
        partial.take_incident(*s);
        partial_reward.remove(s);
    }

    // Processing sequence.
    let old_vol_seq: Vec<StateId> = cache
        .order
        .sequence()
        .iter()
        .copied()
        .filter(|s| cache.volatile.contains(s) && new.pmc.contains(*s))
        .collect();
    let promoted = old_stable.iter().any(|s| new.volatile.contains(s));
    let next_vol: &BTreeSet<StateId> = &new
        .volatile
        .iter()
        .copied()
        .filter(|s| !old_stable.contains(s))
        .collect();
    let introduced: Vec<StateId> = class.introduced.iter().copied().collect();
    let mut seq: Vec<StateId> = Vec::new();
    seq.extend(old_vol_seq.iter().filter(|s| !next_vol.contains(s)));
    seq.extend(introduced.iter().filter(|s| !next_vol.contains(s)));
    seq.extend(old_vol_seq.iter().filter(|s| next_vol.contains(s)));
    seq.extend(introduced.iter().filter(|s| next_vol.contains(s)));

    // Refreshed cache skeleton.
    let mut new_protected = next_vol.clone();
    new_protected.insert(s0);
    new_protected.insert(st);
    let mut next_partial = cache.partial.restricted(&new_protected);
    let mut next_partial_reward: BTreeMap<StateId, W> = cache
        .partial_reward
        .iter()
        .filter(|(s, _)| new_protected.contains(s))
        .map(|(s, w)| (*s, w.clone()))
        .collect();
    let mut next_map = BTreeMap::new();
    let mut next_reward_map = BTreeMap::new();

    let mut infected: BTreeSet<StateId> = class.reconfigured.clone();
    let mut pending_old: BTreeSet<(usize, StateId)> = old_vol_seq
        .iter()
        .map(|s| (cache.order.rank(*s).expect("ranked"), *s))
        .collect();
    let mut max_processed_rank = 0usize;
    let mut stats = ReuseStats {
        classification: class.clone(),
        replayed: Vec::new(),
        eliminated: Vec::new(),
        flushed: Vec::new(),
        fallback: false,
    };

    for &w in &seq {
        let is_old = !class.introduced.contains(&w);
        let mut neigh = pmc.neighbourhood(w);
        neigh.extend(partial.adjacent(w));
        let reason = if !is_old {
            Some(EliminationReason::Introduced)
        } else {
            let rank = cache.order.rank(w).expect("ranked");
            let in_order = pending_old.first().map(|(_, s)| *s) == Some(w) && max_processed_rank < rank;
            if !neigh.is_disjoint(&infected) {
                Some(EliminationReason::Infected)
            } else if !in_order {
                infected.insert(w);
                Some(EliminationReason::OrderChanged)
            } else {
                None
            }
        };
        let next_volatile_w = next_vol.contains(&w);

        match reason {
            None => {
                for (s1, s2, p) in cache.map_entries(w) {
                    assert!(
                        pmc.contains(s1) && pmc.contains(s2) && s1 != w && s2 != w,
                        "replayed entry references a state that is gone"
                    );
                    partial.accumulate(s1, s2, p, counter);
                    if next_volatile_w {
                        next_map.insert((w, s1, s2), p.clone());
                    } else if new_protected.contains(&s1) && new_protected.contains(&s2) {
                        next_partial.accumulate(s1, s2, p, counter);
                    }
                }
                if with_rewards {
                    for (s1, c) in cache.reward_map_entries(w) {
                        assert!(pmc.contains(s1), "replayed reward references a state that is gone");
                        accumulate(&mut partial_reward, s1, c, counter);
                        if next_volatile_w {
                            next_reward_map.insert((w, s1), c.clone());
                        } else if new_protected.contains(&s1) {
                            accumulate(&mut next_partial_reward, s1, c, counter);
                        }
                    }
                }
                partial.take_incident(w);
                partial_reward.remove(&w);
                pmc.remove_state(w);
                reward.remove(&w);
                stats.replayed.push(w);
            }
            Some(reason) => {
                for (s1, s2, p) in partial.take_incident(w) {
                    let sum = match pmc.get(s1, s2) {
                        Some(existing) => counter.add(existing, &p),
                        None => p,
                    };
                    stats.flushed.push((s1, s2, sum.clone()));
                    pmc.set(s1, s2, sum);
                }
                if with_rewards {
                    if let Some(c) = partial_reward.remove(&w) {
                        accumulate(&mut reward, w, &c, counter);
                    }
                }
                let mut next_volatile_set = BTreeSet::new();
                if next_volatile_w {
                    next_volatile_set.insert(w);
                }
                let mut rec = Recorder {
                    protected: &new_protected,
                    volatile: &next_volatile_set,
                    partial: &mut next_partial,
                    map: &mut next_map,
                    partial_reward: &mut next_partial_reward,
                    reward_map: &mut next_reward_map,
                    counter,
                };
                let r = if with_rewards { Some(&mut reward) } else { None };
                eliminate_with(&mut pmc, r, w, RewardFactor::ExpectedVisits, counter, &mut rec)?;
                infected.extend(neigh);
                stats.eliminated.push((w, reason));
            }
        }
        if is_old {
            let rank = cache.order.rank(w).expect("ranked");
            pending_old.remove(&(rank, w));
            max_processed_rank = max_processed_rank.max(rank);
        }
    }

    let direct = pmc.get(s0, st).cloned();
    let value = match (direct, partial.get(s0, st)) {
        (Some(a), Some(b)) => counter.add(&a, b),
        (Some(a), None) => a,
        (None, Some(b)) => b.clone(),
        (None, None) => W::zero(),
    };
    let reward_value = with_rewards.then(|| match (reward.get(&s0), partial_reward.get(&s0)) {
        (Some(a), Some(b)) => counter.add(a, b),
        (Some(a), None) => a.clone(),
        (None, Some(b)) => b.clone(),
        (None, None) => W::zero(),
    });

    let exec: Vec<StateId> = old_stable.iter().copied().chain(seq.iter().copied()).collect();
    Ok(Reconfigured {
        value,
        reward: reward_value,
        cache: EliminationCache {
            partial: next_partial,
            map: next_map,
            partial_reward: next_partial_reward,
            reward_map: next_reward_map,
            order: EliminationOrder::from_sequence(exec),
            volatile: next_vol.clone(),
            initial: s0,
            target: st,
            with_rewards,
            stale: promoted,
        },
        stats,
    })
}

/// One step of [`incremental_sweep`].
#[derive(Clone, PartialEq, Debug)]
pub struct SweepStep<W> {
    pub value: W,
    pub reward: Option<W>,
    /// Value of solving this step's model from scratch.
    pub scratch_value: W,
    /// Operations of the incremental pipeline in this step.
    pub incremental_ops: OpCounts,
    /// Operations of solving this step's model from scratch.
    pub naive_ops: OpCounts,
    pub stats: Option<ReuseStats<W>>,
}

/// Solves `initial` with [`parametric_reachability_vpmc`], then each
/// successive reconfiguration with [`reconfigured_reachability`], threading
/// the refreshed cache. Every step's model is also solved from scratch with
/// a separate counter for comparison. Both use input-order elimination.
pub fn incremental_sweep<W: Field>(
    initial: &Vpmc<W>,
    diffs: &[Diff<W>],
    with_rewards: bool,
) -> Result<Vec<SweepStep<W>>> {
    let incr = MetricsCounter::new();
    let naive = MetricsCounter::new();
    let mut steps = Vec::with_capacity(diffs.len() + 1);

    let order = make_order(initial, OrderHeuristic::InputOrder);
    let sol = parametric_reachability_vpmc(initial, &order, with_rewards, &incr)?;
    let scratch = parametric_reachability_vpmc(initial, &order, with_rewards, &naive)?;
    steps.push(SweepStep {
        scratch_value: scratch.value,
        value: sol.value,
        reward: sol.reward,
        incremental_ops: incr.snapshot(),
        naive_ops: naive.snapshot(),
        stats: None,
    });
    let mut model = initial.clone();
    let mut cache = sol.cache;
    for diff in diffs {
        let next = apply_diff(&model, diff)?;
        let before_incr = incr.snapshot();
        let out = reconfigured_reachability(&model, &next, &cache, &incr)?;
        let before_naive = naive.snapshot();
        let order = make_order(&next, OrderHeuristic::InputOrder);
        let scratch = parametric_reachability_vpmc(&next, &order, with_rewards, &naive)?;
        steps.push(SweepStep {
            scratch_value: scratch.value,
            value: out.value,
            reward: out.reward,
            incremental_ops: incr.snapshot() - before_incr,
            naive_ops: naive.snapshot() - before_naive,
            stats: Some(out.stats),
        });
        cache = out.cache;
        model = next;
    }
    Ok(steps)
}
