//! Bounded probabilistic model checking over the ground transition system:
//! maximum reachability / safety probabilities, fixed-policy probabilities,
//! formula satisfaction with existential grounding, and satisfaction sets.
//!
//! Step indexing is zero-based and counts the current state: `F<=k` ranges
//! over steps `0..=k` and `G<=k` requires the predicate at every step
//! `0..=k`. A state with no enabled action self-loops.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::formula::{Formula, PathOperator};
use crate::logic::{Conjunction, ConstId, Substitution, Term};
use crate::rmdp::{
    policy_action, CompiledModel, CompiledPattern, GroundSpace, GroundState, Policy, RmdpError,
    DEFAULT_STATE_CAP,
};

/// Slack absorbed when comparing a probability against a threshold.
pub const THRESHOLD_EPSILON: f64 = 1e-12;

/// Recursion budget for the brute-force oracle.
pub const ORACLE_NODE_BUDGET: u64 = 10_000_000;

/// A bounded path query: operator, step bound and state predicate.
pub struct PathQuery<'a> {
    pub op: PathOperator,
    pub k: u32,
    pub pred: &'a dyn Fn(&GroundState) -> bool,
}

/// Available outcome distributions per state; an empty list denotes the
/// implicit no-op self-loop.
type Distributions = Vec<Vec<Vec<(usize, f64)>>>;

/// Bounded value iteration over indexed distributions.
///
/// `rings[u]`, when present, is the BFS depth of `u` from the query state;
/// entries with `ring + t > k` are never read and are skipped.
fn bounded_values(
    dists: &Distributions,
    goal: &[bool],
    op: PathOperator,
    k: u32,
    rings: Option<&[u32]>,
) -> Vec<f64> {
    let n = goal.len();
    let mut prev: Vec<f64> = goal.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    let mut cur = vec![0.0; n];
    for t in 1..=k {
        for u in 0..n {
            if let Some(r) = rings {
                if r[u].saturating_add(t) > k {
                    continue;
                }
            }
            let best = if dists[u].is_empty() {
                prev[u]
            } else {
                let mut m = f64::NEG_INFINITY;
                for dist in &dists[u] {
                    let mut acc = 0.0;
                    for &(succ, p) in dist {
                        acc += p * prev[succ];
                    }
                    if acc > m {
                        m = acc;
                    }
                }
                m
            };
            cur[u] = match op {
                PathOperator::Finally => {
                    if goal[u] {
                        1.0
                    } else {
                        best
                    }
                }
                PathOperator::Globally => {
                    if goal[u] {
                        best
                    } else {
                        0.0
                    }
                }
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev
}

/// A local bounded universe around one start state.
struct LocalUniverse {
    states: Vec<GroundState>,
    rings: Vec<u32>,
    dists: Distributions,
}

impl LocalUniverse {
    /// BFS to depth `k`; distributions are materialized for every state not
    /// on the outermost ring.
    fn build(
        compiled: &CompiledModel<'_>,
        s: &GroundState,
        k: u32,
        policy: Option<&Policy>,
    ) -> Result<Self, RmdpError> {
        let mut states: Vec<GroundState> = vec![s.clone()];
        let mut index: BTreeMap<GroundState, usize> = BTreeMap::new();
        index.insert(s.clone(), 0);
        let mut rings: Vec<u32> = vec![0];
        let mut dists: Distributions = Vec::new();
        let mut cursor = 0usize;
        while cursor < states.len() {
            let state = states[cursor].clone();
            let depth = rings[cursor];
            if depth >= k {
                dists.push(Vec::new());
                cursor += 1;
                continue;
            }
            let raw: Vec<Vec<(GroundState, f64)>> = match policy {
                None => compiled
                    .transitions(&state)?
                    .into_iter()
                    .map(|(_, succ)| succ)
                    .collect(),
                Some(pi) => match policy_action(compiled, pi, &state)? {
                    Some(a) => vec![compiled.successors(&state, &a)?],
                    None => Vec::new(),
                },
            };
            let mut local = Vec::with_capacity(raw.len());
            for dist in raw {
                let mut ids = Vec::with_capacity(dist.len());
                for (succ, p) in dist {
                    let id = match index.get(&succ) {
                        Some(&id) => id,
                        None => {
                            let id = states.len();
                            index.insert(succ.clone(), id);
                            states.push(succ);
                            rings.push(depth + 1);
                            id
                        }
                    };
                    ids.push((id, p));
                }
                local.push(ids);
            }
            dists.push(local);
            cursor += 1;
        }
        Ok(LocalUniverse {
            states,
            rings,
            dists,
        })
    }

    fn values(&self, pred: &dyn Fn(&GroundState) -> bool, op: PathOperator, k: u32) -> f64 {
        let goal: Vec<bool> = self.states.iter().map(pred).collect();
        bounded_values(&self.dists, &goal, op, k, Some(&self.rings))[0]
    }
}

/// Maximum probability, over all action choices, of reaching a goal state
/// within `k` steps from `s` (step 0 counts the current state).
pub fn max_prob_eventually(
    compiled: &CompiledModel<'_>,
    s: &GroundState,
    goal: &dyn Fn(&GroundState) -> bool,
    k: u32,
) -> Result<f64, RmdpError> {
    let local = LocalUniverse::build(compiled, s, k, None)?;
    Ok(local.values(goal, PathOperator::Finally, k))
}

/// Maximum probability, over all action choices, of staying inside the safe
/// predicate for `k` steps from `s`.
pub fn max_prob_globally(
    compiled: &CompiledModel<'_>,
    s: &GroundState,
    safe: &dyn Fn(&GroundState) -> bool,
    k: u32,
) -> Result<f64, RmdpError> {
    let local = LocalUniverse::build(compiled, s, k, None)?;
    Ok(local.values(safe, PathOperator::Globally, k))
}

/// Probability of the query under a fixed deterministic memoryless policy.
pub fn policy_prob(
    compiled: &CompiledModel<'_>,
    policy: &Policy,
    s: &GroundState,
    query: &PathQuery<'_>,
) -> Result<f64, RmdpError> {
    let local = LocalUniverse::build(compiled, s, query.k, Some(policy))?;
    Ok(local.values(query.pred, query.op, query.k))
}

/// Naive depth-`k` expectimax; the independent oracle the fast engine is
/// checked against. Values are recomputed along every path (no value
/// memoization, no pruning); only the model's transition relation is
/// cached per call so the oracle does not re-derive it at every node.
pub fn brute_force_path_prob(
    compiled: &CompiledModel<'_>,
    s: &GroundState,
    query: &PathQuery<'_>,
    policy: Option<&Policy>,
) -> Result<f64, RmdpError> {
    let mut budget = ORACLE_NODE_BUDGET;
    let mut trans: BTreeMap<GroundState, Vec<Vec<(GroundState, f64)>>> = BTreeMap::new();
    brute_rec(compiled, s, query, policy, query.k, &mut budget, &mut trans)
}

#[allow(clippy::type_complexity)]
fn brute_rec(
    compiled: &CompiledModel<'_>,
    s: &GroundState,
    query: &PathQuery<'_>,
    policy: Option<&Policy>,
    t: u32,
    budget: &mut u64,
    trans: &mut BTreeMap<GroundState, Vec<Vec<(GroundState, f64)>>>,
) -> Result<f64, RmdpError> {
    if *budget == 0 {
        return Err(RmdpError::InvalidModel(
            "brute-force oracle exceeded its node budget".into(),
        ));
    }
    *budget -= 1;
    let here = (query.pred)(s);
    match query.op {
        PathOperator::Finally => {
            if here {
                return Ok(1.0);
            }
            if t == 0 {
                return Ok(0.0);
            }
        }
        PathOperator::Globally => {
            if !here {
                return Ok(0.0);
            }
            if t == 0 {
                return Ok(1.0);
            }
        }
    }
    if !trans.contains_key(s) {
        let dists: Vec<Vec<(GroundState, f64)>> = match policy {
            None => compiled
                .transitions(s)?
                .into_iter()
                .map(|(_, succ)| succ)
                .collect(),
            Some(pi) => match policy_action(compiled, pi, s)? {
                Some(a) => vec![compiled.successors(s, &a)?],
                None => Vec::new(),
            },
        };
        trans.insert(s.clone(), dists);
    }
    let dists = trans[s].clone();
    if dists.is_empty() {
        // Implicit no-op: the state repeats, so the value is stationary.
        return Ok(match query.op {
            PathOperator::Finally => 0.0,
            PathOperator::Globally => 1.0,
        });
    }
    let mut best = f64::NEG_INFINITY;
    for dist in dists {
        let mut acc = 0.0;
        for (succ, p) in dist {
            acc += p * brute_rec(compiled, &succ, query, policy, t - 1, budget, trans)?;
        }
        if acc > best {
            best = acc;
        }
    }
    Ok(best)
}

/// Grounding substitutions of the state formula that can possibly witness
/// satisfaction from `s`: for `F`, those whose instance embeds in a state
/// reachable within `k` steps; for `G`, those whose instance embeds in `s`
/// itself (a `G` witness must hold at step 0). A superset of all useful
/// groundings; deterministic order.
pub fn relevant_groundings(
    compiled: &CompiledModel<'_>,
    s: &GroundState,
    phi: &Conjunction,
    op: PathOperator,
    k: u32,
) -> Result<Vec<Substitution>, RmdpError> {
    let pattern = CompiledPattern::compile(phi, compiled.vocab())?;
    let mut assignments: BTreeSet<Vec<ConstId>> = BTreeSet::new();
    match op {
        PathOperator::Finally => {
            for state in compiled.reachable_states(s, k)? {
                for a in pattern.matchers(&state) {
                    assignments.insert(a);
                }
            }
        }
        PathOperator::Globally => {
            for a in pattern.matchers(s) {
                assignments.insert(a);
            }
        }
    }
    let vocab = compiled.vocab();
    Ok(assignments
        .into_iter()
        .map(|assign| {
            let mut theta = Substitution::new();
            for (name, id) in pattern.var_names().iter().zip(assign.iter()) {
                theta.bind(name, Term::constant(&vocab.constant(*id).name));
            }
            theta
        })
        .collect())
}

/// Existentially quantified satisfaction: true iff some relevant grounding
/// reaches the formula's threshold, under the best policy (none given) or
/// the fixed one.
pub fn satisfies(
    compiled: &CompiledModel<'_>,
    s: &GroundState,
    psi: &Formula,
    policy: Option<&Policy>,
) -> Result<bool, RmdpError> {
    let thetas = relevant_groundings(compiled, s, &psi.phi, psi.op, psi.k)?;
    if thetas.is_empty() {
        return Ok(false);
    }
    let local = LocalUniverse::build(compiled, s, psi.k, policy)?;
    for theta in thetas {
        let ground = crate::logic::apply_substitution(&psi.phi, &theta, compiled.vocab())
            .map_err(RmdpError::Logic)?;
        let instance = CompiledPattern::compile(&ground, compiled.vocab())?;
        let pred = |state: &GroundState| instance.matches(state);
        let p = local.values(&pred, psi.op, psi.k);
        if p >= psi.alpha - THRESHOLD_EPSILON {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The subset of the given states satisfying the formula. With no explicit
/// state list, all enumerated states of the model are tested.
pub fn sat_state_set(
    compiled: &CompiledModel<'_>,
    psi: &Formula,
    states: Option<&[GroundState]>,
    policy: Option<&Policy>,
) -> Result<Vec<GroundState>, RmdpError> {
    let enumerated;
    let states = match states {
        Some(s) => s,
        None => {
            enumerated = GroundSpace::build(compiled, DEFAULT_STATE_CAP)?.states;
            &enumerated
        }
    };
    let mut out = Vec::new();
    for s in states {
        if satisfies(compiled, s, psi, policy)? {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// Batch checker over a prebuilt ground space: one bounded value iteration
/// per ground goal covers every state at once.
pub struct SpaceChecker {
    dists: Distributions,
}

impl SpaceChecker {
    /// Max-over-actions distributions.
    pub fn agnostic(space: &GroundSpace) -> Self {
        let dists = space
            .transitions
            .iter()
            .map(|ts| ts.iter().map(|t| t.outcomes.clone()).collect())
            .collect();
        SpaceChecker { dists }
    }

    /// Single-action distributions under a policy (empty = no-op).
    pub fn for_policy(
        compiled: &CompiledModel<'_>,
        space: &GroundSpace,
        policy: &Policy,
    ) -> Result<Self, RmdpError> {
        let mut dists = Vec::with_capacity(space.states.len());
        for (sid, state) in space.states.iter().enumerate() {
            match policy_action(compiled, policy, state)? {
                None => dists.push(Vec::new()),
                Some(action) => {
                    let chosen = space.transitions[sid]
                        .iter()
                        .find(|t| t.action == action)
                        .ok_or_else(|| {
                            RmdpError::InvalidPolicy(
                                "policy chose an action outside the transition table".into(),
                            )
                        })?;
                    dists.push(vec![chosen.outcomes.clone()]);
                }
            }
        }
        Ok(SpaceChecker { dists })
    }

    /// Bounded values for every state of the space.
    pub fn values(&self, goal: &[bool], op: PathOperator, k: u32) -> Vec<f64> {
        bounded_values(&self.dists, goal, op, k, None)
    }
}

/// Satisfaction of the formula on every state of the space at once: one
/// bounded value iteration per candidate grounding.
///
/// `checker` carries the distributions of the queried mode. When it is
/// policy-constrained and the threshold is (near) zero, `agnostic` supplies
/// the unconstrained distributions used for the relevance side-condition
/// (a grounding only counts if its instance is reachable at all).
pub fn sat_bitset(
    compiled: &CompiledModel<'_>,
    space: &GroundSpace,
    checker: &SpaceChecker,
    agnostic: Option<&SpaceChecker>,
    psi: &Formula,
) -> Result<Vec<bool>, RmdpError> {
    let pattern = CompiledPattern::compile(&psi.phi, compiled.vocab())?;
    let mut thetas: BTreeSet<Vec<ConstId>> = BTreeSet::new();
    for state in &space.states {
        for assign in pattern.matchers(state) {
            thetas.insert(assign);
        }
    }
    let n = space.states.len();
    let mut satisfied = vec![false; n];
    let needs_relevance = psi.alpha <= 2.0 * THRESHOLD_EPSILON;
    for theta in thetas {
        let instance = pattern.ground_with(&theta);
        let goal: Vec<bool> = space
            .states
            .iter()
            .map(|s| instance.is_subset(s.atoms()))
            .collect();
        let vals = checker.values(&goal, psi.op, psi.k);
        if needs_relevance {
            // At a zero threshold any probability passes; satisfaction then
            // requires the grounding to be relevant for the state.
            let relevant: Vec<bool> = match psi.op {
                PathOperator::Globally => goal.clone(),
                PathOperator::Finally => agnostic
                    .unwrap_or(checker)
                    .values(&goal, PathOperator::Finally, psi.k)
                    .iter()
                    .map(|&v| v > 0.0)
                    .collect(),
            };
            for s in 0..n {
                satisfied[s] |= relevant[s] && vals[s] >= psi.alpha - THRESHOLD_EPSILON;
            }
        } else {
            for s in 0..n {
                satisfied[s] |= vals[s] >= psi.alpha - THRESHOLD_EPSILON;
            }
        }
    }
    Ok(satisfied)
}
