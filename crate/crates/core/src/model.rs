//! Parametric Markov chains, their underlying graphs, preprocessing for
//! single-target reachability, and structural validation.
//!
//! States are dense indices that stay stable for the lifetime of a model:
//! removing a state leaves a tombstone and new states are appended. This
//! lets a reconfigured model share state identity with its predecessor,
//! which the incremental algorithms rely on.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Field;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Parametric Markov chain: states, initial state, sparse transition
/// matrix and the ordered parameter list.
///
/// An absent entry is zero; a stored entry is never zero. Predecessor sets
/// are maintained alongside the rows so that graph queries are cheap.
#[derive(Clone, PartialEq, Debug)]
pub struct Pmc<W> {
    params: Vec<String>,
    names: Vec<String>,
    alive: Vec<bool>,
    index: HashMap<String, StateId>,
    initial: Option<StateId>,
    rows: Vec<BTreeMap<StateId, W>>,
    cols: Vec<BTreeSet<StateId>>,
}

impl<W: Field> Pmc<W> {
    pub fn new(params: Vec<String>) -> Self {
        Pmc {
            params,
            names: Vec::new(),
            alive: Vec::new(),
            index: HashMap::new(),
            initial: None,
            rows: Vec::new(),
            cols: Vec::new(),
        }
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn add_state(&mut self, name: &str) -> Result<StateId> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateState(name.to_string()));
        }
        let id = StateId(self.names.len());
        self.names.push(name.to_string());
        self.alive.push(true);
        self.rows.push(BTreeMap::new());
        self.cols.push(BTreeSet::new());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Adds a state named `base`, or `base_`, `base__`, ... if taken.
    pub fn add_fresh_state(&mut self, base: &str) -> StateId {
        let mut name = base.to_string();
        while self.index.contains_key(&name) {
            name.push('_');
        }
        self.add_state(&name).expect("fresh name")
    }

    /// Removes `s` together with all incident transitions.
    pub fn remove_state(&mut self, s: StateId) {
        if !self.contains(s) {
            return;
        }
        let succs: Vec<StateId> = self.rows[s.0].keys().copied().collect();
        for t in succs {
            self.cols[t.0].remove(&s);
        }
        let preds: Vec<StateId> = self.cols[s.0].iter().copied().collect();
        for t in preds {
            self.rows[t.0].remove(&s);
        }
        self.rows[s.0].clear();
        self.cols[s.0].clear();
        self.alive[s.0] = false;
        self.index.remove(&self.names[s.0]);
        if self.initial == Some(s) {
            self.initial = None;
        }
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.alive.get(s.0).copied().unwrap_or(false)
    }

    /// Live states in index order.
    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| StateId(i))
    }

    pub fn num_states(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Number of indices ever allocated (live or removed).
    pub fn capacity(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s.0]
    }

    pub fn id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn lookup(&self, name: &str) -> Result<StateId> {
        self.id(name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn initial(&self) -> Result<StateId> {
        self.initial
            .ok_or_else(|| Error::InvalidModel("no initial state".into()))
    }

    pub fn set_initial(&mut self, s: StateId) {
        assert!(self.contains(s), "initial state must exist");
        self.initial = Some(s);
    }

    pub fn get(&self, from: StateId, to: StateId) -> Option<&W> {
        self.rows.get(from.0)?.get(&to)
    }

    /// Sets an entry; a zero value removes it.
    pub fn set(&mut self, from: StateId, to: StateId, value: W) {
        assert!(
            self.contains(from) && self.contains(to),
            "transition endpoints must exist"
        );
        if value.is_zero() {
            self.take(from, to);
        } else {
            self.rows[from.0].insert(to, value);
            self.cols[to.0].insert(from);
        }
    }

    /// Removes and returns an entry.
    pub fn take(&mut self, from: StateId, to: StateId) -> Option<W> {
        let v = self.rows.get_mut(from.0)?.remove(&to);
        if v.is_some() {
            self.cols[to.0].remove(&from);
        }
        v
    }

    /// Outgoing entries of `s` in successor index order.
    pub fn row(&self, s: StateId) -> &BTreeMap<StateId, W> {
        &self.rows[s.0]
    }

    pub fn successors(&self, s: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.rows[s.0].keys().copied()
    }

    pub fn predecessors(&self, s: StateId) -> &BTreeSet<StateId> {
        &self.cols[s.0]
    }

    /// All stored entries, row-major.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, StateId, &W)> + '_ {
        self.states()
            .flat_map(move |s| self.rows[s.0].iter().map(move |(t, w)| (s, *t, w)))
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// `{s} ∪ pre(s) ∪ post(s)`.
    pub fn neighbourhood(&self, s: StateId) -> BTreeSet<StateId> {
        let mut out: BTreeSet<StateId> = self.cols[s.0].clone();
        out.extend(self.rows[s.0].keys().copied());
        out.insert(s);
        out
    }

    /// States reachable from `from` (including `from`).
    pub fn forward_reachable(&self, from: StateId) -> BTreeSet<StateId> {
        self.search(from, |s| self.rows[s.0].keys().copied().collect())
    }

    /// States from which `to` is reachable (including `to`).
    pub fn backward_reachable(&self, to: StateId) -> BTreeSet<StateId> {
        self.search(to, |s| self.cols[s.0].iter().copied().collect())
    }

    fn search<F: Fn(StateId) -> Vec<StateId>>(&self, start: StateId, next: F) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(start);
        queue.push_back(start);
        while let Some(s) = queue.pop_front() {
            for t in next(s) {
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Row sum of `s`.
    pub fn row_sum(&self, s: StateId) -> W {
        self.rows[s.0]
            .values()
            .fold(W::zero(), |acc, w| acc.add_ref(w))
    }

    /// Applies `f` to every stored entry; entries mapped to zero are dropped.
    pub fn map_weights<V: Field, F: Fn(&W) -> V>(&self, f: F) -> Pmc<V> {
        let mut rows: Vec<BTreeMap<StateId, V>> = vec![BTreeMap::new(); self.rows.len()];
        let mut cols: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); self.cols.len()];
        for (s, t, w) in self.transitions() {
            let v = f(w);
            if !v.is_zero() {
                rows[s.0].insert(t, v);
                cols[t.0].insert(s);
            }
        }
        Pmc {
            params: self.params.clone(),
            names: self.names.clone(),
            alive: self.alive.clone(),
            index: self.index.clone(),
            initial: self.initial,
            rows,
            cols,
        }
    }
}

/// Underlying graph: edge `(s, t)` iff the matrix stores an entry there.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Graph {
    pub pre: BTreeMap<StateId, BTreeSet<StateId>>,
    pub post: BTreeMap<StateId, BTreeSet<StateId>>,
}

impl Graph {
    /// `{s} ∪ pre(s) ∪ post(s)`.
    pub fn neighbourhood(&self, s: StateId) -> Result<BTreeSet<StateId>> {
        let pre = self
            .pre
            .get(&s)
            .ok_or_else(|| Error::UnknownState(s.to_string()))?;
        let mut out = pre.clone();
        out.extend(self.post[&s].iter().copied());
        out.insert(s);
        Ok(out)
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, StateId)> + '_ {
        self.post
            .iter()
            .flat_map(|(s, ts)| ts.iter().map(move |t| (*s, *t)))
    }
}

pub fn underlying_graph<W: Field>(pmc: &Pmc<W>) -> Graph {
    let mut g = Graph::default();
    for s in pmc.states() {
        g.pre.insert(s, pmc.predecessors(s).clone());
        g.post.insert(s, pmc.successors(s).collect());
    }
    g
}

/// Model as written: possibly several targets, no reachability guarantees.
#[derive(Clone, PartialEq, Debug)]
pub struct RawModel<W> {
    pub pmc: Pmc<W>,
    pub targets: BTreeSet<StateId>,
    pub volatile: BTreeSet<StateId>,
    /// State rewards; absent means zero.
    pub reward: BTreeMap<StateId, W>,
}

/// Preprocessed parametric Markov chain with a declared volatile set.
///
/// Invariants (established by [`preprocess`]): the target is absorbing,
/// the initial state has no incoming transitions and is not volatile, and
/// every state is reachable from the initial state and reaches the target.
/// Rewards are carried alongside, so a `Vpmc` doubles as a parametric
/// Markov reward model.
#[derive(Clone, PartialEq, Debug)]
pub struct Vpmc<W> {
    pub pmc: Pmc<W>,
    pub target: StateId,
    pub volatile: BTreeSet<StateId>,
    /// State rewards; absent means zero. The target's reward is never stored.
    pub reward: BTreeMap<StateId, W>,
}

/// A parametric Markov reward model is a [`Vpmc`] whose reward map is used.
pub type Pmrm<W> = Vpmc<W>;

impl<W: Field> Vpmc<W> {
    pub fn initial(&self) -> StateId {
        self.pmc.initial().expect("preprocessed model has an initial state")
    }

    /// Volatile states together with the initial state and the target.
    pub fn protected(&self) -> BTreeSet<StateId> {
        let mut m = self.volatile.clone();
        m.insert(self.initial());
        m.insert(self.target);
        m
    }

    pub fn reward_of(&self, s: StateId) -> W {
        self.reward.get(&s).cloned().unwrap_or_else(W::zero)
    }

    pub fn has_rewards(&self) -> bool {
        !self.reward.is_empty()
    }

    pub fn to_raw(&self) -> RawModel<W> {
        RawModel {
            pmc: self.pmc.clone(),
            targets: [self.target].into_iter().collect(),
            volatile: self.volatile.clone(),
            reward: self.reward.clone(),
        }
    }

    /// Checks the reachability requirement: every state is reachable from
    /// the initial state and reaches the target, which is absorbing.
    pub fn check_requirements(&self) -> Result<()> {
        let s0 = self.initial();
        if !self.pmc.contains(self.target) {
            return Err(Error::RequirementViolated("target state was removed".into()));
        }
        if !self.pmc.row(self.target).is_empty() {
            return Err(Error::RequirementViolated(format!(
                "target `{}` is not absorbing",
                self.pmc.name(self.target)
            )));
        }
        let fwd = self.pmc.forward_reachable(s0);
        let bwd = self.pmc.backward_reachable(self.target);
        for s in self.pmc.states() {
            if !fwd.contains(&s) {
                return Err(Error::RequirementViolated(format!(
                    "state `{}` is unreachable from the initial state",
                    self.pmc.name(s)
                )));
            }
            if !bwd.contains(&s) {
                return Err(Error::RequirementViolated(format!(
                    "the target is unreachable from state `{}`",
                    self.pmc.name(s)
                )));
            }
        }
        Ok(())
    }
}

/// Prepares a model for single-target reachability analysis.
///
/// 1. Outgoing transitions of targets are dropped. A single target becomes
///    the absorbing target `s_t` itself; several targets get a fresh `s_t`
///    reached from each of them with probability 1.
/// 2. A fresh initial state with a probability-1 transition to the old one
///    is added, unless the old initial state already has no incoming
///    transitions, is not volatile and is not the target.
/// 3. States unreachable from the initial state, or from which `s_t` is
///    unreachable, are removed with their transitions.
///
/// Applied to its own output the procedure changes nothing.
pub fn preprocess<W: Field>(raw: &RawModel<W>) -> Result<Vpmc<W>> {
    let mut pmc = raw.pmc.clone();
    let mut volatile = raw.volatile.clone();
    let mut reward = raw.reward.clone();
    if raw.targets.is_empty() {
        return Err(Error::InvalidModel("no target state".into()));
    }
    for &t in &raw.targets {
        if !pmc.contains(t) {
            return Err(Error::UnknownState(t.to_string()));
        }
        let succs: Vec<StateId> = pmc.successors(t).collect();
        for s in succs {
            pmc.take(t, s);
        }
    }
    let target = if raw.targets.len() == 1 {
        *raw.targets.iter().next().unwrap()
    } else {
        let st = pmc.add_fresh_state("st");
        for &t in &raw.targets {
            pmc.set(t, st, W::one());
        }
        st
    };
    let old_initial = pmc.initial()?;
    let needs_fresh = !pmc.predecessors(old_initial).is_empty()
        || volatile.contains(&old_initial)
        || old_initial == target;
    if needs_fresh {
        let s0 = pmc.add_fresh_state("s0");
        pmc.set(s0, old_initial, W::one());
        pmc.set_initial(s0);
    }
    let s0 = pmc.initial()?;
    let fwd = pmc.forward_reachable(s0);
    if !fwd.contains(&target) {
        return Err(Error::EmptyModel(format!(
            "target `{}` is unreachable from the initial state",
            pmc.name(target)
        )));
    }
    let bwd = pmc.backward_reachable(target);
    let doomed: Vec<StateId> = pmc
        .states()
        .filter(|s| !fwd.contains(s) || !bwd.contains(s))
        .collect();
    for s in doomed {
        pmc.remove_state(s);
        volatile.remove(&s);
        reward.remove(&s);
    }
    reward.remove(&target);
    reward.retain(|_, w| !w.is_zero());
    Ok(Vpmc {
        pmc,
        target,
        volatile,
        reward,
    })
}

/// Per-state diagnostics from [`validate`].
#[derive(Clone, PartialEq, Debug)]
pub struct RowReport<W> {
    pub state: StateId,
    pub sum: W,
    /// Whether the row sums identically to 1.
    pub stochastic: bool,
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct ValidationReport<W> {
    pub rows: Vec<RowReport<W>>,
    /// Stored entries that are identically zero (never produced by [`Pmc`]'s
    /// own mutators; reported for completeness).
    pub stored_zeros: Vec<(StateId, StateId)>,
}

impl<W: Field> ValidationReport<W> {
    pub fn warnings(&self) -> impl Iterator<Item = &RowReport<W>> {
        self.rows.iter().filter(|r| !r.stochastic)
    }

    pub fn is_clean(&self) -> bool {
        self.warnings().next().is_none() && self.stored_zeros.is_empty()
    }
}

/// Row-sum and stored-zero diagnostics. Absorbing states (empty rows) are
/// reported as substochastic like any other row that does not sum to 1.
pub fn validate<W: Field>(pmc: &Pmc<W>) -> ValidationReport<W> {
    let mut report = ValidationReport {
        rows: Vec::new(),
        stored_zeros: Vec::new(),
    };
    for s in pmc.states() {
        let sum = pmc.row_sum(s);
        report.rows.push(RowReport {
            state: s,
            stochastic: sum.is_one(),
            sum,
        });
        for (t, w) in pmc.row(s) {
            if w.is_zero() {
                report.stored_zeros.push((s, *t));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfunc::parse::parse_expression;
    use crate::RatFunc;

    fn params() -> Vec<String> {
        vec!["p".into(), "q".into()]
    }

    fn f(text: &str) -> RatFunc {
        parse_expression(text, &params()).unwrap()
    }

    /// Zeroconf with one probe, as written (before preprocessing).
    fn zeroconf_one() -> RawModel<RatFunc> {
        let mut pmc = Pmc::new(params());
        let i = pmc.add_state("i").unwrap();
        let ok = pmc.add_state("ok").unwrap();
        let one = pmc.add_state("1").unwrap();
        let err = pmc.add_state("err").unwrap();
        pmc.set_initial(i);
        pmc.set(i, ok, f("1-q"));
        pmc.set(i, one, f("q"));
        pmc.set(one, err, f("p"));
        pmc.set(one, i, f("1-p"));
        pmc.set(ok, ok, f("1"));
        pmc.set(err, err, f("1"));
        RawModel {
            pmc,
            targets: [err].into_iter().collect(),
            volatile: [i, one].into_iter().collect(),
            reward: BTreeMap::new(),
        }
    }

    #[test]
    fn graph_and_neighbourhood() {
        let raw = zeroconf_one();
        let g = underlying_graph(&raw.pmc);
        let id = |n: &str| raw.pmc.id(n).unwrap();
        assert_eq!(g.pre[&id("i")], [id("1")].into_iter().collect());
        assert_eq!(g.post[&id("i")], [id("ok"), id("1")].into_iter().collect());
        assert_eq!(
            g.neighbourhood(id("1")).unwrap(),
            [id("i"), id("1"), id("err")].into_iter().collect()
        );
        assert_eq!(g.neighbourhood(id("ok")).unwrap(), [id("i"), id("ok")].into_iter().collect());
        for (s, t) in g.edges() {
            assert!(g.pre[&t].contains(&s));
        }
        let empty: Pmc<RatFunc> = Pmc::new(vec![]);
        assert_eq!(underlying_graph(&empty).edges().count(), 0);
    }

    #[test]
    fn preprocessing_zeroconf() {
        let raw = zeroconf_one();
        let v = preprocess(&raw).unwrap();
        let names: Vec<&str> = v.pmc.states().map(|s| v.pmc.name(s)).collect();
        assert_eq!(names, vec!["i", "1", "err", "s0"]);
        assert_eq!(v.pmc.name(v.target), "err");
        assert_eq!(v.pmc.name(v.initial()), "s0");
        assert!(v.pmc.row(v.target).is_empty());
        v.check_requirements().unwrap();
        let again = preprocess(&v.to_raw()).unwrap();
        assert_eq!(again, v);
        let report = validate(&v.pmc);
        let i = v.pmc.id("i").unwrap();
        let row_i = report.rows.iter().find(|r| r.state == i).unwrap();
        assert!(!row_i.stochastic);
        assert_eq!(row_i.sum, f("q"));
    }

    #[test]
    fn initial_equal_to_target() {
        let mut pmc: Pmc<RatFunc> = Pmc::new(vec![]);
        let t = pmc.add_state("t").unwrap();
        pmc.set_initial(t);
        let raw = RawModel {
            pmc,
            targets: [t].into_iter().collect(),
            volatile: BTreeSet::new(),
            reward: BTreeMap::new(),
        };
        let v = preprocess(&raw).unwrap();
        assert_eq!(v.pmc.num_states(), 2);
        assert_eq!(v.pmc.get(v.initial(), t), Some(&RatFunc::one()));
    }

    #[test]
    fn unreachable_target_is_empty_model() {
        let mut pmc: Pmc<RatFunc> = Pmc::new(vec![]);
        let a = pmc.add_state("a").unwrap();
        let b = pmc.add_state("b").unwrap();
        pmc.set_initial(a);
        pmc.set(a, a, RatFunc::one());
        let raw = RawModel {
            pmc,
            targets: [b].into_iter().collect(),
            volatile: BTreeSet::new(),
            reward: BTreeMap::new(),
        };
        assert!(matches!(preprocess(&raw), Err(Error::EmptyModel(_))));
    }

    #[test]
    fn multiple_targets_get_fresh_sink() {
        let mut pmc: Pmc<RatFunc> = Pmc::new(params());
        let a = pmc.add_state("a").unwrap();
        let b = pmc.add_state("b").unwrap();
        let c = pmc.add_state("c").unwrap();
        pmc.set_initial(a);
        pmc.set(a, b, f("p"));
        pmc.set(a, c, f("1-p"));
        pmc.set(b, a, f("1"));
        let raw = RawModel {
            pmc,
            targets: [b, c].into_iter().collect(),
            volatile: BTreeSet::new(),
            reward: BTreeMap::new(),
        };
        let v = preprocess(&raw).unwrap();
        assert_eq!(v.pmc.name(v.target), "st");
        assert_eq!(v.pmc.get(b, a), None);
        assert_eq!(v.pmc.get(b, v.target), Some(&RatFunc::one()));
        assert_eq!(v.pmc.name(v.initial()), "a");
        v.check_requirements().unwrap();
    }

    #[test]
    fn removal_keeps_graph_consistent() {
        let mut raw = zeroconf_one();
        let one = raw.pmc.id("1").unwrap();
        let i = raw.pmc.id("i").unwrap();
        raw.pmc.remove_state(one);
        assert!(raw.pmc.id("1").is_none());
        assert!(!raw.pmc.predecessors(i).contains(&one));
        assert_eq!(raw.pmc.num_states(), 3);
        let again = raw.pmc.add_state("1").unwrap();
        assert_eq!(again, StateId(4));
    }
}
