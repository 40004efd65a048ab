//! Inductive search for formulae consistent with labelled abstract states:
//! general-to-specific refinement with consistency checking against the
//! ground model, in policy-agnostic and policy-specific modes.
//!
//! A formula is consistent with the examples when every ground state
//! subsumed by a positive example satisfies it and no ground state subsumed
//! by a negative example does. Candidates failing the positive half can
//! only get worse along the specializing refinements, so their
//! instantiation and globalization branches are cut and their lengthened
//! descendants are walked without re-checking (subsumption pruning);
//! unified children are checked afresh since variable merging is not a
//! specialization under object identity. Children are additionally gated
//! by sensibility and canonical form before they are ever checked.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::formula::{Formula, PathOperator};
use crate::logic::{
    apply_substitution, canonical_key, is_sensible, set_canonical_key, Conjunction, ConstId,
    Vocabulary,
};
use crate::modelcheck::{
    brute_force_path_prob, relevant_groundings, satisfies, PathQuery, SpaceChecker,
    THRESHOLD_EPSILON,
};
use crate::refine::{refine, seeds, CandidateNode, Phase, RefineConfig, RelationOrder};
use crate::rmdp::{
    validate_model, validate_policy, CompiledModel, CompiledPattern, GroundSpace, Policy,
    RmdpError, RmdpModel, DEFAULT_STATE_CAP,
};

/// Labelled abstract states: safe (positive) and unsafe (negative).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleSet {
    pub positives: Vec<Conjunction>,
    pub negatives: Vec<Conjunction>,
}

/// Search parameters. The threshold and step bound are fixed inputs; the
/// search never varies them.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub alpha: f64,
    pub k: u32,
    /// Maximum state-formula length; lengthening stops here.
    pub max_len: usize,
    /// Whether the instantiation refinement is applied at all.
    pub instantiation: bool,
    /// Echoed into reports; the search itself is deterministic.
    pub seed: u64,
    /// Cut the refinement branches that provably inherit a positive-side
    /// failure. Disabling this changes the statistics but never the
    /// solution set.
    pub subsumption_pruning: bool,
    /// Cap on state enumeration.
    pub state_cap: usize,
}

impl LearnConfig {
    pub fn new(alpha: f64, k: u32, max_len: usize) -> Self {
        LearnConfig {
            alpha,
            k,
            max_len,
            instantiation: true,
            seed: 0,
            subsumption_pruning: true,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Search counters: `candidates` counts consistency checks performed;
/// the pruning counters split rejected work by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub candidates: u64,
    pub pruned_subsumption: u64,
    pub pruned_irrelevant: u64,
    pub pruned_semantic: u64,
}

/// A consistent formula and the number of refinements that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub formula: Formula,
    pub depth: u32,
}

/// The two halves of consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsistencyVerdict {
    pub pos_ok: bool,
    pub neg_ok: bool,
}

impl ConsistencyVerdict {
    pub fn consistent(&self) -> bool {
        self.pos_ok && self.neg_ok
    }
}

/// Errors from learning runs.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnError {
    Rmdp(RmdpError),
    InvalidModel(String),
    InvalidPolicy(String),
    InvalidExample(String),
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::Rmdp(e) => write!(f, "{e}"),
            LearnError::InvalidModel(m) => write!(f, "invalid model: {m}"),
            LearnError::InvalidPolicy(m) => write!(f, "invalid policy: {m}"),
            LearnError::InvalidExample(m) => write!(f, "invalid example: {m}"),
        }
    }
}

impl core::error::Error for LearnError {}

impl From<RmdpError> for LearnError {
    fn from(e: RmdpError) -> Self {
        LearnError::Rmdp(e)
    }
}

/// Checks one formula against the examples on the ground state space:
/// `pos_ok` iff every state subsumed by a positive example satisfies the
/// formula, `neg_ok` iff no state subsumed by a negative example does.
pub fn check_consistency(
    model: &RmdpModel,
    psi: &Formula,
    examples: &ExampleSet,
    policy: Option<&Policy>,
    state_cap: usize,
) -> Result<ConsistencyVerdict, LearnError> {
    let compiled = CompiledModel::new(model)?;
    let space = GroundSpace::build(&compiled, state_cap)?;
    let mut pos_ok = true;
    'pos: for e in &examples.positives {
        let pat = CompiledPattern::compile(e, &model.vocab)?;
        for s in &space.states {
            if pat.matches(s) && !satisfies(&compiled, s, psi, policy)? {
                pos_ok = false;
                break 'pos;
            }
        }
    }
    let mut neg_ok = true;
    'neg: for e in &examples.negatives {
        let pat = CompiledPattern::compile(e, &model.vocab)?;
        for s in &space.states {
            if pat.matches(s) && satisfies(&compiled, s, psi, policy)? {
                neg_ok = false;
                break 'neg;
            }
        }
    }
    Ok(ConsistencyVerdict { pos_ok, neg_ok })
}

/// Satisfaction via the brute-force oracle instead of the value-iteration
/// engine; used to re-check solutions independently.
pub fn oracle_satisfies(
    compiled: &CompiledModel<'_>,
    s: &crate::rmdp::GroundState,
    psi: &Formula,
    policy: Option<&Policy>,
) -> Result<bool, RmdpError> {
    let thetas = relevant_groundings(compiled, s, &psi.phi, psi.op, psi.k)?;
    for theta in thetas {
        let ground = apply_substitution(&psi.phi, &theta, compiled.vocab())
            .map_err(RmdpError::Logic)?;
        let instance = CompiledPattern::compile(&ground, compiled.vocab())?;
        let pred = |state: &crate::rmdp::GroundState| instance.matches(state);
        let q = PathQuery {
            op: psi.op,
            k: psi.k,
            pred: &pred,
        };
        if brute_force_path_prob(compiled, s, &q, policy)? >= psi.alpha - THRESHOLD_EPSILON {
            return Ok(true);
        }
    }
    Ok(false)
}

/// [`check_consistency`] with every satisfaction decided by the
/// brute-force oracle.
pub fn check_consistency_with_oracle(
    model: &RmdpModel,
    psi: &Formula,
    examples: &ExampleSet,
    policy: Option<&Policy>,
    state_cap: usize,
) -> Result<ConsistencyVerdict, LearnError> {
    let compiled = CompiledModel::new(model)?;
    let space = GroundSpace::build(&compiled, state_cap)?;
    let mut pos_ok = true;
    'pos: for e in &examples.positives {
        let pat = CompiledPattern::compile(e, &model.vocab)?;
        for s in &space.states {
            if pat.matches(s) && !oracle_satisfies(&compiled, s, psi, policy)? {
                pos_ok = false;
                break 'pos;
            }
        }
    }
    let mut neg_ok = true;
    'neg: for e in &examples.negatives {
        let pat = CompiledPattern::compile(e, &model.vocab)?;
        for s in &space.states {
            if pat.matches(s) && oracle_satisfies(&compiled, s, psi, policy)? {
                neg_ok = false;
                break 'neg;
            }
        }
    }
    Ok(ConsistencyVerdict { pos_ok, neg_ok })
}

/// Policy-agnostic learning: all consistent formulae of length up to the
/// configured maximum, with search statistics. Deterministic.
pub fn learn(
    model: &RmdpModel,
    examples: &ExampleSet,
    config: &LearnConfig,
) -> Result<(Vec<Solution>, SearchStats), LearnError> {
    learn_impl(model, examples, config, None)
}

/// Policy-specific learning: identical search, but every model-checking
/// call runs on the policy-constrained model.
pub fn learn_with_policy(
    model: &RmdpModel,
    examples: &ExampleSet,
    config: &LearnConfig,
    policy: &Policy,
) -> Result<(Vec<Solution>, SearchStats), LearnError> {
    let report = validate_policy(model, policy);
    if !report.is_valid() {
        return Err(LearnError::InvalidPolicy(report.to_string()));
    }
    learn_impl(model, examples, config, Some(policy))
}

/// The solutions produced at the maximum refinement depth reached, in a
/// stable canonical order.
pub fn most_specific(solutions: &[Solution], vocab: &Vocabulary) -> Vec<Solution> {
    let Some(max) = solutions.iter().map(|s| s.depth).max() else {
        return Vec::new();
    };
    let mut out: Vec<Solution> = solutions
        .iter()
        .filter(|s| s.depth == max)
        .cloned()
        .collect();
    out.sort_by_key(|s| (canonical_key(&s.formula.phi, vocab), s.formula.op.letter()));
    out
}

fn learn_impl(
    model: &RmdpModel,
    examples: &ExampleSet,
    config: &LearnConfig,
    policy: Option<&Policy>,
) -> Result<(Vec<Solution>, SearchStats), LearnError> {
    let report = validate_model(model);
    if !report.is_valid() {
        return Err(LearnError::InvalidModel(report.to_string()));
    }
    let vocab = &model.vocab;
    let mut keys = BTreeSet::new();
    for (which, list) in [("positive", &examples.positives), ("negative", &examples.negatives)] {
        for e in list {
            if !is_sensible(e, &model.constraints, vocab) {
                return Err(LearnError::InvalidExample(format!(
                    "{which} example {} is not sensible",
                    e.render(vocab)
                )));
            }
            keys.insert((which == "positive", set_canonical_key(e, vocab)));
        }
    }
    for (_, key) in keys.iter().filter(|(pos, _)| *pos) {
        if keys.contains(&(false, key.clone())) {
            return Err(LearnError::InvalidExample(format!(
                "an example occurs both as positive and negative: {key}"
            )));
        }
    }
    if config.max_len == 0 {
        return Ok((Vec::new(), SearchStats::default()));
    }

    let compiled = CompiledModel::new(model)?;
    let space = GroundSpace::build(&compiled, config.state_cap)?;
    let checker = match policy {
        None => SpaceChecker::agnostic(&space),
        Some(pi) => SpaceChecker::for_policy(&compiled, &space, pi)?,
    };

    let states_of = |examples: &[Conjunction]| -> Result<Vec<Vec<usize>>, LearnError> {
        examples
            .iter()
            .map(|e| {
                let pat = CompiledPattern::compile(e, vocab)?;
                Ok(space
                    .states
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| pat.matches(s))
                    .map(|(i, _)| i)
                    .collect())
            })
            .collect()
    };
    let pos_states = states_of(&examples.positives)?;
    let neg_states = states_of(&examples.negatives)?;

    // Per needed state: ids reachable within k steps under any action.
    let mut reach: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for sid in pos_states.iter().chain(neg_states.iter()).flatten() {
        reach.entry(*sid).or_insert_with(|| {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            seen.insert(*sid);
            let mut frontier = vec![*sid];
            for _ in 0..config.k {
                let mut next = Vec::new();
                for &u in &frontier {
                    for t in &space.transitions[u] {
                        for &(v, _) in &t.outcomes {
                            if seen.insert(v) {
                                next.push(v);
                            }
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                frontier = next;
            }
            seen.into_iter().collect()
        });
    }

    let n_rels = vocab.relations().count();
    let rel_counts: Vec<Vec<u16>> = space
        .states
        .iter()
        .map(|s| {
            let mut counts = vec![0u16; n_rels];
            for a in s.atoms() {
                counts[a.rel.0 as usize] += 1;
            }
            counts
        })
        .collect();

    let rcfg = RefineConfig {
        alpha: config.alpha,
        k: config.k,
        max_len: config.max_len,
        instantiation: config.instantiation,
        order: RelationOrder::alphabetical(vocab),
    };
    let mut ctx = SearchCtx {
        vocab,
        space: &space,
        checker: &checker,
        constraints: &model.constraints,
        config,
        rcfg: &rcfg,
        pos_states: &pos_states,
        neg_states: &neg_states,
        reach: &reach,
        rel_counts: &rel_counts,
        stats: SearchStats::default(),
        solutions: Vec::new(),
    };
    let (roots, rejects) = seeds(&rcfg, vocab, &model.constraints);
    ctx.stats.pruned_irrelevant += rejects.irrelevant;
    ctx.stats.pruned_semantic += rejects.semantic;
    for root in roots {
        ctx.search(&root, false)?;
    }
    Ok((ctx.solutions, ctx.stats))
}

struct SearchCtx<'a> {
    vocab: &'a Vocabulary,
    space: &'a GroundSpace,
    checker: &'a SpaceChecker,
    constraints: &'a [crate::logic::IntegrityConstraint],
    config: &'a LearnConfig,
    rcfg: &'a RefineConfig,
    pos_states: &'a [Vec<usize>],
    neg_states: &'a [Vec<usize>],
    reach: &'a BTreeMap<usize, Vec<usize>>,
    /// Per state, per relation: how many atoms of that relation it holds.
    rel_counts: &'a [Vec<u16>],
    stats: SearchStats,
    solutions: Vec<Solution>,
}

impl SearchCtx<'_> {
    /// One search step. Lengthening, instantiation and globalization
    /// specialize their parent, so a positive-side failure propagates to
    /// them; unification does not (merging two variables is not a
    /// specialization under object identity), so unified children of a
    /// failed candidate must be checked afresh. Pruning therefore cuts the
    /// instantiate/globalize branches of a failed candidate outright
    /// (nothing below them can recover), walks its lengthen branches
    /// without re-checking the provably failed nodes, and re-checks its
    /// unify branches.
    fn search(&mut self, node: &CandidateNode, inherited_failure: bool) -> Result<(), LearnError> {
        let pruning = self.config.subsumption_pruning;
        let pos_ok = if inherited_failure && pruning {
            false
        } else {
            self.stats.candidates += 1;
            let verdict = self.consistent(node)?;
            if verdict.pos_ok {
                if verdict.neg_ok {
                    self.solutions.push(Solution {
                        formula: node.formula.clone(),
                        depth: node.depth,
                    });
                }
            } else {
                self.stats.pruned_subsumption += 1;
            }
            verdict.pos_ok
        };
        let (children, rejects) = refine(node, self.rcfg, self.vocab, self.constraints);
        self.stats.pruned_irrelevant += rejects.irrelevant;
        self.stats.pruned_semantic += rejects.semantic;
        for child in &children {
            if pos_ok || !pruning {
                self.search(child, false)?;
            } else {
                match child.phase {
                    Phase::Instantiate | Phase::Globalize => {}
                    Phase::Lengthen => self.search(child, true)?,
                    Phase::Unify => self.search(child, false)?,
                }
            }
        }
        Ok(())
    }

    /// Consistency over the example states only, with one value iteration
    /// per distinct candidate grounding actually needed. A state scan stops
    /// at the first witnessing grounding; proving a state unsatisfied costs
    /// a full scan of its reachable set.
    fn consistent(&self, node: &CandidateNode) -> Result<ConsistencyVerdict, LearnError> {
        let psi = &node.formula;
        let pattern = CompiledPattern::compile(&psi.phi, self.vocab)?;
        // Relation multiset of the candidate: states with fewer atoms of
        // some relation cannot embed it.
        let mut need: BTreeMap<crate::logic::RelId, u16> = BTreeMap::new();
        for a in psi.phi.atoms() {
            *need.entry(a.rel).or_insert(0) += 1;
        }
        let need: Vec<(usize, u16)> = need.into_iter().map(|(r, n)| (r.0 as usize, n)).collect();
        let mut matcher_cache: BTreeMap<usize, Vec<Vec<ConstId>>> = BTreeMap::new();
        let mut value_cache: BTreeMap<Vec<ConstId>, Vec<f64>> = BTreeMap::new();

        let mut state_satisfied = |sid: usize| -> bool {
            let sources: &[usize] = match psi.op {
                PathOperator::Globally => core::slice::from_ref(&sid),
                PathOperator::Finally => &self.reach[&sid],
            };
            let mut tried: BTreeSet<Vec<ConstId>> = BTreeSet::new();
            for &rid in sources {
                if !need
                    .iter()
                    .all(|&(r, n)| self.rel_counts[rid][r] >= n)
                {
                    continue;
                }
                let ms = match matcher_cache.entry(rid) {
                    alloc::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    alloc::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(pattern.matchers(&self.space.states[rid]))
                    }
                };
                for theta in ms.clone() {
                    if !tried.insert(theta.clone()) {
                        continue;
                    }
                    let vals = value_cache.entry(theta.clone()).or_insert_with(|| {
                        let instance = pattern.ground_with(&theta);
                        let goal: Vec<bool> = self
                            .space
                            .states
                            .iter()
                            .map(|s| instance.is_subset(s.atoms()))
                            .collect();
                        self.checker.values(&goal, psi.op, psi.k)
                    });
                    if vals[sid] >= psi.alpha - THRESHOLD_EPSILON {
                        return true;
                    }
                }
            }
            false
        };

        let mut pos_ok = true;
        'pos: for states in self.pos_states {
            for &sid in states {
                if !state_satisfied(sid) {
                    pos_ok = false;
                    break 'pos;
                }
            }
        }
        let mut neg_ok = true;
        'neg: for states in self.neg_states {
            for &sid in states {
                if state_satisfied(sid) {
                    neg_ok = false;
                    break 'neg;
                }
            }
        }
        Ok(ConsistencyVerdict { pos_ok, neg_ok })
    }
}
