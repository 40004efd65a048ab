//! Relational MDP models and the ground transition system they induce over
//! a finite declared constant set.
//!
//! A model is an alphabet plus probabilistic transition rule groups. Rule
//! semantics are literal set rewriting: applying an outcome with grounding
//! `theta` maps state `s` to `(s \ body.theta) + head.theta`. Domain authors
//! write heads that restore whatever the body consumed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::logic::{
    Atom, Conjunction, ConstId, IntegrityConstraint, LogicError, RelId, RelationKind, SortId,
    Term, Vocabulary,
};

/// Probability mass must reach 1 within this tolerance per rule group.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of states enumerated per model.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// One probabilistic outcome of an action rule group.
#[derive(Debug, Clone)]
pub struct RuleOutcome {
    pub probability: f64,
    pub head: Conjunction,
}

/// An abstract action with a shared body and a distribution over heads.
#[derive(Debug, Clone)]
pub struct ActionRuleGroup {
    pub action: Atom,
    pub body: Conjunction,
    pub outcomes: Vec<RuleOutcome>,
}

/// A relational MDP: vocabulary, transition rule groups, integrity
/// constraints and the initial states that seed state enumeration.
#[derive(Debug, Clone)]
pub struct RmdpModel {
    pub vocab: Vocabulary,
    pub groups: Vec<ActionRuleGroup>,
    pub constraints: Vec<IntegrityConstraint>,
    pub init_states: Vec<GroundState>,
}

/// A ground atom with interned constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub rel: RelId,
    pub args: Vec<ConstId>,
}

impl GroundAtom {
    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        out.push_str(&vocab.relation(self.rel).name);
        if !self.args.is_empty() {
            out.push('(');
            for (i, c) in self.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&vocab.constant(*c).name);
            }
            out.push(')');
        }
        out
    }

    /// Name-based ordering, independent of declaration order.
    pub fn cmp_by_name(&self, other: &Self, vocab: &Vocabulary) -> core::cmp::Ordering {
        let lhs = vocab.relation(self.rel).name.as_str();
        let rhs = vocab.relation(other.rel).name.as_str();
        lhs.cmp(rhs).then_with(|| {
            let la: Vec<&str> = self
                .args
                .iter()
                .map(|c| vocab.constant(*c).name.as_str())
                .collect();
            let ra: Vec<&str> = other
                .args
                .iter()
                .map(|c| vocab.constant(*c).name.as_str())
                .collect();
            la.cmp(&ra)
        })
    }
}

/// A Herbrand interpretation over the state relations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GroundState {
    atoms: BTreeSet<GroundAtom>,
}

impl GroundState {
    pub fn new(atoms: BTreeSet<GroundAtom>) -> Self {
        GroundState { atoms }
    }

    pub fn atoms(&self) -> &BTreeSet<GroundAtom> {
        &self.atoms
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Converts a ground conjunction of state atoms into a state.
    pub fn from_conjunction(c: &Conjunction, vocab: &Vocabulary) -> Result<Self, RmdpError> {
        let mut atoms = BTreeSet::new();
        for a in c.atoms() {
            if vocab.relation(a.rel).kind != RelationKind::State {
                return Err(RmdpError::ActionRelationInState(
                    vocab.relation(a.rel).name.clone(),
                ));
            }
            let mut args = Vec::with_capacity(a.args.len());
            for t in &a.args {
                match t {
                    Term::Const(name) => {
                        let id = vocab.const_id(name).ok_or_else(|| {
                            RmdpError::Logic(LogicError::UnknownConstant(name.clone()))
                        })?;
                        args.push(id);
                    }
                    Term::Var(v) => return Err(RmdpError::NotGround(v.clone())),
                }
            }
            atoms.insert(GroundAtom { rel: a.rel, args });
        }
        Ok(GroundState { atoms })
    }

    pub fn to_conjunction(&self, vocab: &Vocabulary) -> Conjunction {
        Conjunction::from_atoms(
            self.atoms
                .iter()
                .map(|g| {
                    Atom::new(
                        g.rel,
                        g.args
                            .iter()
                            .map(|c| Term::constant(&vocab.constant(*c).name))
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut parts: Vec<String> = self.atoms.iter().map(|a| a.render(vocab)).collect();
        parts.sort();
        let mut out = String::from("[");
        out.push_str(&parts.join(", "));
        out.push(']');
        out
    }
}

/// Errors from model queries and state-space construction.
#[derive(Debug, Clone, PartialEq)]
pub enum RmdpError {
    Logic(LogicError),
    NotGround(String),
    ActionRelationInState(String),
    ActionNotEnabled(String),
    AmbiguousAction(String),
    IllegalSuccessor { action: String, state: String },
    IllegalInitialState(String),
    StateSpaceTooLarge(usize),
    InvalidModel(String),
    InvalidPolicy(String),
}

impl fmt::Display for RmdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RmdpError::Logic(e) => write!(f, "{e}"),
            RmdpError::NotGround(v) => write!(f, "expression is not ground: variable {v}"),
            RmdpError::ActionRelationInState(r) => {
                write!(f, "action relation {r} cannot occur in a state")
            }
            RmdpError::ActionNotEnabled(a) => write!(f, "action {a} is not enabled"),
            RmdpError::AmbiguousAction(a) => {
                write!(f, "action {a} matches more than one rule grounding")
            }
            RmdpError::IllegalSuccessor { action, state } => {
                write!(f, "action {action} produced an illegal successor {state}")
            }
            RmdpError::IllegalInitialState(s) => write!(f, "illegal initial state {s}"),
            RmdpError::StateSpaceTooLarge(cap) => {
                write!(f, "state enumeration exceeded the cap of {cap} states")
            }
            RmdpError::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            RmdpError::InvalidPolicy(msg) => write!(f, "invalid policy: {msg}"),
        }
    }
}

impl core::error::Error for RmdpError {}

impl From<LogicError> for RmdpError {
    fn from(e: LogicError) -> Self {
        RmdpError::Logic(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PatTerm {
    Var(usize),
    Const(ConstId),
}

/// A ground action paired with its successor distribution.
pub type ActionOutcomes = (GroundAtom, Vec<(GroundState, f64)>);

/// A pattern compiled for matching into ground states: variables become
/// dense indices, constants become interned ids.
///
/// Matching respects object identity: images of distinct variables are
/// pairwise distinct and never equal a constant from the avoid set (the
/// pattern's own constants, or all constants of the enclosing rule).
#[derive(Debug, Clone)]
pub struct CompiledPattern {
    atoms: Vec<(RelId, Vec<PatTerm>)>,
    var_names: Vec<String>,
    avoid: BTreeSet<ConstId>,
    oi_consistent: bool,
}

impl CompiledPattern {
    pub fn compile(c: &Conjunction, vocab: &Vocabulary) -> Result<Self, RmdpError> {
        let mut var_names: Vec<String> = Vec::new();
        for v in c.variables() {
            var_names.push(v);
        }
        Self::compile_with_universe(c, var_names, vocab)
    }

    /// Compiles against a fixed variable universe (a superset of the
    /// variables occurring in the conjunction).
    fn compile_with_universe(
        c: &Conjunction,
        var_names: Vec<String>,
        vocab: &Vocabulary,
    ) -> Result<Self, RmdpError> {
        let mut avoid = BTreeSet::new();
        let mut atoms = Vec::with_capacity(c.len());
        for a in c.atoms() {
            let mut args = Vec::with_capacity(a.args.len());
            for t in &a.args {
                match t {
                    Term::Var(v) => {
                        let idx = var_names.iter().position(|n| n == v).ok_or_else(|| {
                            RmdpError::InvalidModel(format!("unbound variable {v}"))
                        })?;
                        args.push(PatTerm::Var(idx));
                    }
                    Term::Const(name) => {
                        let id = vocab.const_id(name).ok_or_else(|| {
                            RmdpError::Logic(LogicError::UnknownConstant(name.clone()))
                        })?;
                        avoid.insert(id);
                        args.push(PatTerm::Const(id));
                    }
                }
            }
            atoms.push((a.rel, args));
        }
        Ok(CompiledPattern {
            atoms,
            var_names,
            avoid,
            oi_consistent: c.is_oi_consistent(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    /// All OI-respecting assignments embedding every pattern atom in the
    /// state. Variables of the universe that do not occur in the atoms stay
    /// unassigned.
    fn partial_matchers(&self, state: &GroundState) -> Vec<Vec<Option<ConstId>>> {
        let mut out = Vec::new();
        if !self.oi_consistent {
            return out;
        }
        let mut assign: Vec<Option<ConstId>> = vec![None; self.var_names.len()];
        self.match_rec(state, 0, &mut assign, &mut out, false);
        out
    }

    /// All OI-respecting assignments of the pattern variables under which
    /// every pattern atom occurs in the state. Every variable of the
    /// pattern must occur in one of its atoms.
    pub fn matchers(&self, state: &GroundState) -> Vec<Vec<ConstId>> {
        self.partial_matchers(state)
            .into_iter()
            .filter(|a| a.iter().all(Option::is_some))
            .map(|a| a.into_iter().map(Option::unwrap).collect())
            .collect()
    }

    /// True when at least one OI-respecting assignment embeds the pattern.
    pub fn matches(&self, state: &GroundState) -> bool {
        if !self.oi_consistent {
            return false;
        }
        let mut assign: Vec<Option<ConstId>> = vec![None; self.var_names.len()];
        let mut out = Vec::new();
        self.match_rec(state, 0, &mut assign, &mut out, true)
    }

    fn match_rec(
        &self,
        state: &GroundState,
        idx: usize,
        assign: &mut Vec<Option<ConstId>>,
        out: &mut Vec<Vec<Option<ConstId>>>,
        stop_at_first: bool,
    ) -> bool {
        if idx == self.atoms.len() {
            out.push(assign.clone());
            return true;
        }
        let (rel, args) = &self.atoms[idx];
        let mut any = false;
        for cand in state.atoms().iter().filter(|g| g.rel == *rel) {
            let mut added: Vec<usize> = Vec::new();
            let mut ok = true;
            for (pt, val) in args.iter().zip(cand.args.iter()) {
                match pt {
                    PatTerm::Const(c) => {
                        if c != val {
                            ok = false;
                            break;
                        }
                    }
                    PatTerm::Var(v) => match assign[*v] {
                        Some(bound) if bound != *val => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            if self.avoid.contains(val) || assign.iter().any(|o| o == &Some(*val))
                            {
                                ok = false;
                                break;
                            }
                            assign[*v] = Some(*val);
                            added.push(*v);
                        }
                    },
                }
            }
            if ok {
                let found = self.match_rec(state, idx + 1, assign, out, stop_at_first);
                any |= found;
                if found && stop_at_first {
                    for v in added {
                        assign[v] = None;
                    }
                    return true;
                }
            }
            for v in added {
                assign[v] = None;
            }
        }
        any
    }

    /// Instantiates the pattern under a full assignment.
    pub fn ground_with(&self, assign: &[ConstId]) -> BTreeSet<GroundAtom> {
        self.atoms
            .iter()
            .map(|(rel, args)| GroundAtom {
                rel: *rel,
                args: args
                    .iter()
                    .map(|t| match t {
                        PatTerm::Const(c) => *c,
                        PatTerm::Var(v) => assign[*v],
                    })
                    .collect(),
            })
            .collect()
    }
}

/// A rule group compiled against the shared variable universe of its rule:
/// body variables first, action-only variables after them.
#[derive(Debug, Clone)]
struct CompiledGroup {
    action_rel: RelId,
    action_args: Vec<PatTerm>,
    body: CompiledPattern,
    /// Sort-compatible constant pool per rule variable.
    pools: Vec<Vec<ConstId>>,
    outcomes: Vec<(f64, CompiledPattern)>,
    /// Every constant named anywhere in the rule; images must avoid them.
    rule_consts: BTreeSet<ConstId>,
}

/// A model with compiled rule groups and constraints, ready for queries.
#[derive(Debug)]
pub struct CompiledModel<'m> {
    pub model: &'m RmdpModel,
    groups: Vec<CompiledGroup>,
    constraints: Vec<CompiledPattern>,
}

impl<'m> CompiledModel<'m> {
    pub fn new(model: &'m RmdpModel) -> Result<Self, RmdpError> {
        let vocab = &model.vocab;
        let mut groups = Vec::with_capacity(model.groups.len());
        for g in &model.groups {
            // Variable universe: body variables in occurrence order, then
            // action-only variables.
            let mut var_names: Vec<String> = g.body.variables();
            let mut rule_consts: BTreeSet<ConstId> = BTreeSet::new();
            for name in g.body.constants() {
                rule_consts.insert(const_id(vocab, &name)?);
            }
            let mut action_args = Vec::with_capacity(g.action.args.len());
            for t in &g.action.args {
                match t {
                    Term::Var(v) => {
                        let idx = match var_names.iter().position(|n| n == v) {
                            Some(i) => i,
                            None => {
                                var_names.push(v.clone());
                                var_names.len() - 1
                            }
                        };
                        action_args.push(PatTerm::Var(idx));
                    }
                    Term::Const(name) => {
                        let id = const_id(vocab, name)?;
                        rule_consts.insert(id);
                        action_args.push(PatTerm::Const(id));
                    }
                }
            }
            for o in &g.outcomes {
                for name in o.head.constants() {
                    rule_consts.insert(const_id(vocab, &name)?);
                }
            }
            // Sorts: action declaration first, body occurrences as fallback.
            let mut sorts: BTreeMap<String, SortId> = g.body.var_sorts(vocab);
            let decl = vocab.relation(g.action.rel);
            for (pos, t) in g.action.args.iter().enumerate() {
                if let Term::Var(v) = t {
                    sorts.entry(v.clone()).or_insert(decl.arg_sorts[pos]);
                }
            }
            let pools: Vec<Vec<ConstId>> = var_names
                .iter()
                .map(|v| vocab.constants_of_sort(sorts[v]).map(|(id, _)| id).collect())
                .collect();
            let mut body =
                CompiledPattern::compile_with_universe(&g.body, var_names.clone(), vocab)?;
            body.avoid = rule_consts.clone();
            let outcomes = g
                .outcomes
                .iter()
                .map(|o| {
                    CompiledPattern::compile_with_universe(&o.head, var_names.clone(), vocab)
                        .map(|p| (o.probability, p))
                })
                .collect::<Result<Vec<_>, _>>()?;
            groups.push(CompiledGroup {
                action_rel: g.action.rel,
                action_args,
                body,
                pools,
                outcomes,
                rule_consts,
            });
        }
        let constraints = model
            .constraints
            .iter()
            .map(|ic| CompiledPattern::compile(&ic.forbidden, vocab))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledModel {
            model,
            groups,
            constraints,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.model.vocab
    }

    /// True when no integrity constraint matches into the state.
    pub fn is_legal(&self, state: &GroundState) -> bool {
        !self.constraints.iter().any(|c| c.matches(state))
    }

    /// All ground actions whose group body embeds into the state, with the
    /// grounding extended injectively over action-only variables.
    /// Deterministic name-based order.
    pub fn enabled_ground_actions(&self, state: &GroundState) -> Vec<GroundAtom> {
        let mut out: Vec<GroundAtom> = Vec::new();
        for g in &self.groups {
            for assign in self.group_groundings(g, state) {
                let action = action_atom(g, &assign);
                if !out.contains(&action) {
                    out.push(action);
                }
            }
        }
        out.sort_by(|a, b| a.cmp_by_name(b, self.vocab()));
        out
    }

    /// All full rule groundings of a group enabled in the state.
    fn group_groundings(&self, g: &CompiledGroup, state: &GroundState) -> Vec<Vec<ConstId>> {
        let mut out = Vec::new();
        for partial in g.body.partial_matchers(state) {
            let mut assign = partial;
            extend_assignment(g, &mut assign, 0, &mut out);
        }
        out
    }

    /// Successor distribution for a ground action in a state.
    pub fn successors(
        &self,
        state: &GroundState,
        action: &GroundAtom,
    ) -> Result<Vec<(GroundState, f64)>, RmdpError> {
        let mut found: Option<(usize, Vec<ConstId>)> = None;
        let mut ambiguous = false;
        for (gi, g) in self.groups.iter().enumerate() {
            if g.action_rel != action.rel {
                continue;
            }
            'assignments: for partial in g.body.partial_matchers(state) {
                let mut assign = partial;
                // Unify the action pattern with the requested ground action.
                for (pt, val) in g.action_args.iter().zip(action.args.iter()) {
                    match pt {
                        PatTerm::Const(c) => {
                            if c != val {
                                continue 'assignments;
                            }
                        }
                        PatTerm::Var(v) => match assign[*v] {
                            Some(bound) if bound != *val => continue 'assignments,
                            Some(_) => {}
                            None => {
                                if g.rule_consts.contains(val)
                                    || assign.iter().any(|o| o == &Some(*val))
                                {
                                    continue 'assignments;
                                }
                                assign[*v] = Some(*val);
                            }
                        },
                    }
                }
                if assign.iter().any(Option::is_none) {
                    continue;
                }
                let full: Vec<ConstId> = assign.into_iter().map(Option::unwrap).collect();
                match &found {
                    Some((pg, pa)) if (*pg, pa.as_slice()) != (gi, full.as_slice()) => {
                        ambiguous = true;
                    }
                    Some(_) => {}
                    None => found = Some((gi, full)),
                }
            }
        }
        let action_name = action.render(self.vocab());
        if ambiguous {
            return Err(RmdpError::AmbiguousAction(action_name));
        }
        let Some((gi, assign)) = found else {
            return Err(RmdpError::ActionNotEnabled(action_name));
        };
        let g = &self.groups[gi];
        let body_atoms = g.body.ground_with(&assign);
        let mut result = Vec::with_capacity(g.outcomes.len());
        for (p, head) in &g.outcomes {
            let mut atoms = state.atoms().clone();
            for a in &body_atoms {
                atoms.remove(a);
            }
            for a in head.ground_with(&assign) {
                atoms.insert(a);
            }
            let succ = GroundState::new(atoms);
            if !self.is_legal(&succ) {
                return Err(RmdpError::IllegalSuccessor {
                    action: action_name,
                    state: succ.render(self.vocab()),
                });
            }
            result.push((succ, *p));
        }
        Ok(result)
    }

    /// All (action, outcome distribution) pairs enabled in the state, in the
    /// deterministic action order.
    pub fn transitions(&self, state: &GroundState) -> Result<Vec<ActionOutcomes>, RmdpError> {
        let actions = self.enabled_ground_actions(state);
        let mut out = Vec::with_capacity(actions.len());
        for a in actions {
            let succ = self.successors(state, &a)?;
            out.push((a, succ));
        }
        Ok(out)
    }

    /// States reachable from `s` in at most `k` steps under any action
    /// choice, including `s` itself.
    pub fn reachable_states(
        &self,
        s: &GroundState,
        k: u32,
    ) -> Result<BTreeSet<GroundState>, RmdpError> {
        let mut seen: BTreeSet<GroundState> = BTreeSet::new();
        seen.insert(s.clone());
        let mut frontier: Vec<GroundState> = vec![s.clone()];
        for _ in 0..k {
            let mut next = Vec::new();
            for state in &frontier {
                for action in self.enabled_ground_actions(state) {
                    for (succ, _) in self.successors(state, &action)? {
                        if seen.insert(succ.clone()) {
                            next.push(succ);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(seen)
    }
}

fn const_id(vocab: &Vocabulary, name: &str) -> Result<ConstId, RmdpError> {
    vocab
        .const_id(name)
        .ok_or_else(|| RmdpError::Logic(LogicError::UnknownConstant(name.into())))
}

fn action_atom(g: &CompiledGroup, assign: &[ConstId]) -> GroundAtom {
    GroundAtom {
        rel: g.action_rel,
        args: g
            .action_args
            .iter()
            .map(|t| match t {
                PatTerm::Const(c) => *c,
                PatTerm::Var(v) => assign[*v],
            })
            .collect(),
    }
}

/// Fills unassigned rule variables injectively from their pools, avoiding
/// the rule constants, and collects every completed assignment.
fn extend_assignment(
    g: &CompiledGroup,
    assign: &mut Vec<Option<ConstId>>,
    from: usize,
    out: &mut Vec<Vec<ConstId>>,
) {
    match (from..assign.len()).find(|i| assign[*i].is_none()) {
        Some(slot) => {
            for cand in g.pools[slot].clone() {
                if g.rule_consts.contains(&cand) || assign.iter().any(|o| o == &Some(cand)) {
                    continue;
                }
                assign[slot] = Some(cand);
                extend_assignment(g, assign, slot + 1, out);
                assign[slot] = None;
            }
        }
        None => out.push(assign.iter().map(|o| o.unwrap()).collect()),
    }
}

/// A structural validation report; an empty report means the model is valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.problems.is_empty() {
            write!(f, "valid")
        } else {
            for (i, p) in self.problems.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "{p}")?;
            }
            Ok(())
        }
    }
}

/// Checks probability sums, sort correctness, variable scoping and static
/// relation preservation for every rule group.
pub fn validate_model(model: &RmdpModel) -> ValidationReport {
    let vocab = &model.vocab;
    let mut problems = Vec::new();
    for (i, g) in model.groups.iter().enumerate() {
        let label = format!("rule group {} ({})", i, g.action.render(vocab));
        let decl = vocab.relation(g.action.rel);
        if decl.kind != RelationKind::Action {
            problems.push(format!("{label}: {} is not an action relation", decl.name));
        }
        if g.action.args.len() != decl.arity() {
            problems.push(format!(
                "{label}: action arity mismatch ({} args, arity {})",
                g.action.args.len(),
                decl.arity()
            ));
        }
        if !g.action.is_oi_consistent() {
            problems.push(format!("{label}: action atom repeats a term"));
        }
        let sum: f64 = g.outcomes.iter().map(|o| o.probability).sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            problems.push(format!("{label}: probabilities sum to {sum}"));
        }
        for o in &g.outcomes {
            if o.probability <= 0.0 || o.probability > 1.0 {
                problems.push(format!(
                    "{label}: outcome probability {} outside (0,1]",
                    o.probability
                ));
            }
        }
        let action_vars: BTreeSet<String> = g
            .action
            .args
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect();
        let mut scope_check = |what: &str, c: &Conjunction| {
            for v in c.variables() {
                if !action_vars.contains(&v) {
                    problems.push(format!(
                        "{label}: {what} variable {v} not bound by the action"
                    ));
                }
            }
            for a in c.atoms() {
                if vocab.relation(a.rel).kind != RelationKind::State {
                    problems.push(format!(
                        "{label}: {what} mentions action relation {}",
                        vocab.relation(a.rel).name
                    ));
                }
            }
        };
        scope_check("body", &g.body);
        for o in &g.outcomes {
            scope_check("head", &o.head);
        }
        // Sort consistency across action, body and heads.
        let mut all_atoms: Vec<Atom> = vec![g.action.clone()];
        all_atoms.extend(g.body.atoms().iter().cloned());
        for o in &g.outcomes {
            all_atoms.extend(o.head.atoms().iter().cloned());
        }
        if let Err(e) = Conjunction::new(all_atoms, vocab) {
            problems.push(format!("{label}: {e}"));
        }
        // Static relations may appear in heads only as copies of body atoms.
        let body_static: BTreeSet<&Atom> = g
            .body
            .atoms()
            .iter()
            .filter(|a| vocab.relation(a.rel).is_static)
            .collect();
        for o in &g.outcomes {
            let head_static: BTreeSet<&Atom> = o
                .head
                .atoms()
                .iter()
                .filter(|a| vocab.relation(a.rel).is_static)
                .collect();
            if head_static != body_static {
                problems.push(format!("{label}: static atoms differ between body and head"));
            }
        }
    }
    for ic in &model.constraints {
        for a in ic.forbidden.atoms() {
            if vocab.relation(a.rel).kind != RelationKind::State {
                problems.push(format!(
                    "constraint {} mentions an action relation",
                    ic.forbidden.render(vocab)
                ));
            }
        }
    }
    match CompiledModel::new(model) {
        Ok(compiled) => {
            for s in &model.init_states {
                if !compiled.is_legal(s) {
                    problems.push(format!(
                        "initial state {} violates an integrity constraint",
                        s.render(vocab)
                    ));
                }
            }
        }
        Err(e) => problems.push(format!("{e}")),
    }
    ValidationReport { problems }
}

/// The ground transition system induced by a model: the closure of its
/// initial states under all enabled actions, with indexed transitions.
#[derive(Debug, Clone)]
pub struct GroundSpace {
    pub states: Vec<GroundState>,
    index: BTreeMap<GroundState, usize>,
    /// Per state: enabled actions with outcome distributions over state ids.
    pub transitions: Vec<Vec<SpaceTransition>>,
}

#[derive(Debug, Clone)]
pub struct SpaceTransition {
    pub action: GroundAtom,
    pub outcomes: Vec<(usize, f64)>,
}

impl GroundSpace {
    /// Enumerates all states reachable from the model's initial states.
    pub fn build(compiled: &CompiledModel<'_>, cap: usize) -> Result<Self, RmdpError> {
        let mut states: Vec<GroundState> = Vec::new();
        let mut index: BTreeMap<GroundState, usize> = BTreeMap::new();
        let mut pending: Vec<usize> = Vec::new();
        for s in &compiled.model.init_states {
            if !compiled.is_legal(s) {
                return Err(RmdpError::IllegalInitialState(s.render(compiled.vocab())));
            }
            if !index.contains_key(s) {
                let id = states.len();
                index.insert(s.clone(), id);
                states.push(s.clone());
                pending.push(id);
            }
        }
        let mut transitions: Vec<Vec<SpaceTransition>> = Vec::new();
        let mut cursor = 0usize;
        while cursor < pending.len() {
            let sid = pending[cursor];
            cursor += 1;
            let state = states[sid].clone();
            let mut out = Vec::new();
            for (action, succs) in compiled.transitions(&state)? {
                let mut outcome_ids = Vec::with_capacity(succs.len());
                for (succ, p) in succs {
                    let id = match index.get(&succ) {
                        Some(&id) => id,
                        None => {
                            let id = states.len();
                            if id >= cap {
                                return Err(RmdpError::StateSpaceTooLarge(cap));
                            }
                            index.insert(succ.clone(), id);
                            states.push(succ);
                            pending.push(id);
                            id
                        }
                    };
                    outcome_ids.push((id, p));
                }
                out.push(SpaceTransition {
                    action,
                    outcomes: outcome_ids,
                });
            }
            if transitions.len() <= sid {
                transitions.resize_with(sid + 1, Vec::new);
            }
            transitions[sid] = out;
        }
        transitions.resize_with(states.len(), Vec::new);
        Ok(GroundSpace {
            states,
            index,
            transitions,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_id(&self, s: &GroundState) -> Option<usize> {
        self.index.get(s).copied()
    }
}

/// All legal ground states of the model, in deterministic discovery order.
pub fn enumerate_states(model: &RmdpModel, cap: usize) -> Result<Vec<GroundState>, RmdpError> {
    let compiled = CompiledModel::new(model)?;
    Ok(GroundSpace::build(&compiled, cap)?.states)
}

/// One `when <guard> do <action>` entry of a decision list.
#[derive(Debug, Clone)]
pub struct PolicyRule {
    pub guard: Conjunction,
    pub action: Atom,
}

/// A deterministic, memoryless decision-list policy. Earlier entries win;
/// if nothing fires the state self-loops (implicit no-op).
#[derive(Debug, Clone, Default)]
pub struct Policy {
    pub rules: Vec<PolicyRule>,
}

/// Checks that every rule's action is fully determined by its guard.
pub fn validate_policy(model: &RmdpModel, policy: &Policy) -> ValidationReport {
    let vocab = &model.vocab;
    let mut problems = Vec::new();
    for (i, rule) in policy.rules.iter().enumerate() {
        let label = format!("policy rule {i}");
        let decl = vocab.relation(rule.action.rel);
        if decl.kind != RelationKind::Action {
            problems.push(format!("{label}: {} is not an action relation", decl.name));
        }
        if rule.action.args.len() != decl.arity() {
            problems.push(format!("{label}: action arity mismatch"));
        }
        let guard_vars: BTreeSet<String> = rule.guard.variables().into_iter().collect();
        for t in &rule.action.args {
            if let Term::Var(v) = t {
                if !guard_vars.contains(v) {
                    problems.push(format!(
                        "{label}: action variable {v} is not bound by the guard; \
                         the induced ground action is not deterministic"
                    ));
                }
            }
        }
        for a in rule.guard.atoms() {
            if vocab.relation(a.rel).kind != RelationKind::State {
                problems.push(format!("{label}: guard mentions an action relation"));
            }
        }
        let mut all_atoms: Vec<Atom> = vec![rule.action.clone()];
        all_atoms.extend(rule.guard.atoms().iter().cloned());
        if let Err(e) = Conjunction::new(all_atoms, vocab) {
            problems.push(format!("{label}: {e}"));
        }
    }
    ValidationReport { problems }
}

/// Resolves the policy in a state: the first rule whose guard matches and
/// whose induced ground action is enabled fires; ties within one rule break
/// to the lexicographically least ground action. `None` is the no-op.
pub fn policy_action(
    compiled: &CompiledModel<'_>,
    policy: &Policy,
    state: &GroundState,
) -> Result<Option<GroundAtom>, RmdpError> {
    let vocab = compiled.vocab();
    for rule in &policy.rules {
        let guard = CompiledPattern::compile(&rule.guard, vocab)?;
        let mut best: Option<GroundAtom> = None;
        for assign in guard.matchers(state) {
            let mut args = Vec::with_capacity(rule.action.args.len());
            let mut ok = true;
            for t in &rule.action.args {
                match t {
                    Term::Var(v) => match guard.var_names().iter().position(|n| n == v) {
                        Some(i) => args.push(assign[i]),
                        None => {
                            ok = false;
                            break;
                        }
                    },
                    Term::Const(name) => match vocab.const_id(name) {
                        Some(id) => args.push(id),
                        None => {
                            ok = false;
                            break;
                        }
                    },
                }
            }
            if !ok {
                continue;
            }
            let action = GroundAtom {
                rel: rule.action.rel,
                args,
            };
            match compiled.successors(state, &action) {
                Ok(_) => {
                    let better = match &best {
                        None => true,
                        Some(b) => action.cmp_by_name(b, vocab) == core::cmp::Ordering::Less,
                    };
                    if better {
                        best = Some(action);
                    }
                }
                Err(RmdpError::ActionNotEnabled(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    Ok(None)
}

/// A view of the model in which every state admits exactly the policy's
/// action (or the implicit no-op self-loop).
#[derive(Debug)]
pub struct PolicyConstrained<'m, 'p> {
    pub compiled: &'m CompiledModel<'m>,
    pub policy: &'p Policy,
}

impl<'m, 'p> PolicyConstrained<'m, 'p> {
    pub fn new(compiled: &'m CompiledModel<'m>, policy: &'p Policy) -> Self {
        PolicyConstrained { compiled, policy }
    }

    /// Exactly the policy's chosen action, or empty for the no-op.
    pub fn enabled_ground_actions(
        &self,
        state: &GroundState,
    ) -> Result<Vec<GroundAtom>, RmdpError> {
        Ok(policy_action(self.compiled, self.policy, state)?
            .into_iter()
            .collect())
    }

    /// Successor distribution under the policy; the no-op self-loops.
    pub fn step(&self, state: &GroundState) -> Result<Vec<(GroundState, f64)>, RmdpError> {
        match policy_action(self.compiled, self.policy, state)? {
            Some(a) => self.compiled.successors(state, &a),
            None => Ok(vec![(state.clone(), 1.0)]),
        }
    }
}

/// Constrains a model to a policy.
pub fn constrain_to_policy<'m, 'p>(
    compiled: &'m CompiledModel<'m>,
    policy: &'p Policy,
) -> PolicyConstrained<'m, 'p> {
    PolicyConstrained::new(compiled, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::RelationKind;

    /// A two-state coin toy: `flip` moves `up(x)` to `down(x)` half the time.
    fn coin_model() -> RmdpModel {
        let mut v = Vocabulary::new();
        let obj = v.add_sort("obj").unwrap();
        let up = v.add_relation("up", &[obj], RelationKind::State, false).unwrap();
        let down = v
            .add_relation("down", &[obj], RelationKind::State, false)
            .unwrap();
        let flip = v
            .add_relation("flip", &[obj], RelationKind::Action, false)
            .unwrap();
        v.add_constant("x", obj).unwrap();

        let body = Conjunction::new(vec![Atom::new(up, vec![Term::var("A")])], &v).unwrap();
        let heads_down =
            Conjunction::new(vec![Atom::new(down, vec![Term::var("A")])], &v).unwrap();
        let group = ActionRuleGroup {
            action: Atom::new(flip, vec![Term::var("A")]),
            body: body.clone(),
            outcomes: vec![
                RuleOutcome {
                    probability: 0.5,
                    head: heads_down,
                },
                RuleOutcome {
                    probability: 0.5,
                    head: body.clone(),
                },
            ],
        };
        let init = GroundState::from_conjunction(
            &Conjunction::new(vec![Atom::new(up, vec![Term::constant("x")])], &v).unwrap(),
            &v,
        )
        .unwrap();
        RmdpModel {
            vocab: v,
            groups: vec![group],
            constraints: vec![],
            init_states: vec![init],
        }
    }

    #[test]
    fn coin_space_and_successors() {
        let model = coin_model();
        assert!(validate_model(&model).is_valid());
        let compiled = CompiledModel::new(&model).unwrap();
        let space = GroundSpace::build(&compiled, 100).unwrap();
        assert_eq!(space.len(), 2);

        let s0 = &space.states[0];
        let actions = compiled.enabled_ground_actions(s0);
        assert_eq!(actions.len(), 1);
        let succ = compiled.successors(s0, &actions[0]).unwrap();
        assert_eq!(succ.len(), 2);
        let total: f64 = succ.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // The failure outcome is the identity on the state.
        assert!(succ.iter().any(|(s, _)| s == s0));

        // The absorbing state has no enabled actions.
        let down_state = succ.iter().map(|(s, _)| s).find(|s| *s != s0).unwrap();
        assert!(compiled.enabled_ground_actions(down_state).is_empty());

        // Asking for a disabled action errors.
        let err = compiled.successors(down_state, &actions[0]).unwrap_err();
        assert!(matches!(err, RmdpError::ActionNotEnabled(_)));
    }

    #[test]
    fn validation_catches_bad_rules() {
        let mut model = coin_model();
        model.groups[0].outcomes[0].probability = 0.6;
        let report = validate_model(&model);
        assert!(!report.is_valid());
        assert!(report.problems.iter().any(|p| p.contains("sum")));

        let mut model = coin_model();
        let up = model.vocab.rel_id("up").unwrap();
        model.groups[0].body =
            Conjunction::new(vec![Atom::new(up, vec![Term::var("Z")])], &model.vocab).unwrap();
        let report = validate_model(&model);
        assert!(report
            .problems
            .iter()
            .any(|p| p.contains("not bound by the action")));
    }

    #[test]
    fn reachable_states_grow_monotonically() {
        let model = coin_model();
        let compiled = CompiledModel::new(&model).unwrap();
        let s0 = model.init_states[0].clone();
        let r0 = compiled.reachable_states(&s0, 0).unwrap();
        assert_eq!(r0.len(), 1);
        let r1 = compiled.reachable_states(&s0, 1).unwrap();
        assert_eq!(r1.len(), 2);
        assert!(r0.is_subset(&r1));
        let r2 = compiled.reachable_states(&s0, 2).unwrap();
        assert!(r1.is_subset(&r2));
    }

    #[test]
    fn empty_policy_is_noop_everywhere() {
        let model = coin_model();
        let compiled = CompiledModel::new(&model).unwrap();
        let policy = Policy::default();
        assert!(validate_policy(&model, &policy).is_valid());
        let constrained = constrain_to_policy(&compiled, &policy);
        for s in &enumerate_states(&model, 100).unwrap() {
            assert!(constrained.enabled_ground_actions(s).unwrap().is_empty());
            assert_eq!(constrained.step(s).unwrap(), vec![(s.clone(), 1.0)]);
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let model = coin_model();
        let err = enumerate_states(&model, 1).unwrap_err();
        assert!(matches!(err, RmdpError::StateSpaceTooLarge(1)));
    }

    #[test]
    fn successors_reject_constraint_breaking_heads() {
        // A rule whose head leaves the up and down marks both set violates
        // the declared exclusion constraint.
        let mut model = coin_model();
        let up = model.vocab.rel_id("up").unwrap();
        let down = model.vocab.rel_id("down").unwrap();
        model.groups[0].outcomes[0].head = Conjunction::new(
            vec![
                Atom::new(up, vec![Term::var("A")]),
                Atom::new(down, vec![Term::var("A")]),
            ],
            &model.vocab,
        )
        .unwrap();
        model.constraints.push(crate::logic::IntegrityConstraint {
            forbidden: Conjunction::new(
                vec![
                    Atom::new(up, vec![Term::var("X")]),
                    Atom::new(down, vec![Term::var("X")]),
                ],
                &model.vocab,
            )
            .unwrap(),
        });
        let compiled = CompiledModel::new(&model).unwrap();
        let s0 = model.init_states[0].clone();
        let action = compiled.enabled_ground_actions(&s0).remove(0);
        let err = compiled.successors(&s0, &action).unwrap_err();
        assert!(matches!(err, RmdpError::IllegalSuccessor { .. }));
    }

    #[test]
    fn policy_validation_rejects_unbound_action_variables() {
        let model = coin_model();
        let up = model.vocab.rel_id("up").unwrap();
        let flip = model.vocab.rel_id("flip").unwrap();
        let policy = Policy {
            rules: vec![PolicyRule {
                guard: Conjunction::new(vec![Atom::new(up, vec![Term::var("A")])], &model.vocab)
                    .unwrap(),
                action: Atom::new(flip, vec![Term::var("B")]),
            }],
        };
        let report = validate_policy(&model, &policy);
        assert!(!report.is_valid());
    }
}
