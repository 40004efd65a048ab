//! Built-in models: the classic blocks world and a chemical warehouse in
//! which typed containers are stacked, plus the random generator for
//! labelled abstract example states.
//!
//! Both domains use a single object sort with the floor as an ordinary
//! constant; physical impossibilities (a covered block being clear, two
//! blocks on one support, anything resting on nothing) are forbidden
//! patterns. Moves succeed with probability 0.9 and otherwise leave the
//! state unchanged.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formula::{parse_atoms, parse_single_atom, Formula};
use crate::learner::ExampleSet;
use crate::logic::{
    is_sensible, set_canonical_key, Atom, Conjunction, IntegrityConstraint, RelationKind, Term,
    Vocabulary,
};
use crate::modelcheck::{sat_bitset, SpaceChecker};
use crate::rmdp::{
    ActionRuleGroup, CompiledModel, CompiledPattern, GroundSpace, GroundState, RmdpError,
    RmdpModel, RuleOutcome, DEFAULT_STATE_CAP,
};

/// Success probability of a move in the built-in domains.
pub const MOVE_SUCCESS: f64 = 0.9;

/// Failure probability of a move (the state stays the same).
pub const MOVE_FAILURE: f64 = 0.1;

/// A model bundled with example-generation metadata.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub model: RmdpModel,
    /// Number of distinct variables the example sampler draws from.
    pub variable_pool: usize,
    /// Atom count of each sampled example.
    pub example_length: usize,
}

fn conj(text: &str, vocab: &Vocabulary) -> Conjunction {
    Conjunction::new(parse_atoms(text, vocab).expect("builtin atoms parse"), vocab)
        .expect("builtin atoms sort-check")
}

fn forbidden(text: &str, vocab: &Vocabulary) -> IntegrityConstraint {
    IntegrityConstraint {
        forbidden: Conjunction::from_atoms(parse_atoms(text, vocab).expect("builtin constraint")),
    }
}

fn move_group(vocab: &Vocabulary, action: &str, body: &str, success_head: &str) -> ActionRuleGroup {
    let body = conj(body, vocab);
    ActionRuleGroup {
        action: parse_single_atom(action, vocab).expect("builtin action"),
        body: body.clone(),
        outcomes: vec![
            RuleOutcome {
                probability: MOVE_SUCCESS,
                head: conj(success_head, vocab),
            },
            RuleOutcome {
                probability: MOVE_FAILURE,
                head: body,
            },
        ],
    }
}

/// Block names `a`, `b`, `c`, ... for small worlds, `b<i>` beyond 26.
fn block_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if n <= 26 {
                String::from((b'a' + i as u8) as char)
            } else {
                format!("b{}", i + 1)
            }
        })
        .collect()
}

/// The blocks world over `n` blocks and a floor: relations `bl/1` (static),
/// `cl/1` and `on/2`, one `move/3` action split into block-to-block,
/// to-floor and from-floor rule groups. Initially every block is on the
/// floor.
pub fn builtin_blocks_world(n: usize) -> RmdpModel {
    let mut vocab = Vocabulary::new();
    let obj = vocab.add_sort("obj").expect("fresh vocabulary");
    vocab
        .add_relation("bl", &[obj], RelationKind::State, true)
        .unwrap();
    vocab
        .add_relation("cl", &[obj], RelationKind::State, false)
        .unwrap();
    vocab
        .add_relation("on", &[obj, obj], RelationKind::State, false)
        .unwrap();
    vocab
        .add_relation("move", &[obj, obj, obj], RelationKind::Action, false)
        .unwrap();
    let blocks = block_names(n);
    for b in &blocks {
        vocab.add_constant(b, obj).unwrap();
    }
    vocab.add_constant("fl", obj).unwrap();

    // bl(C) certifies the source is a block so its clearness is restored;
    // the floor variants bake `fl` into the action atom, which by object
    // identity keeps the remaining variables off the floor.
    let groups = vec![
        move_group(
            &vocab,
            "move(A,B,C)",
            "cl(A), on(A,C), cl(B), bl(C)",
            "cl(A), on(A,B), cl(C), bl(C)",
        ),
        move_group(
            &vocab,
            "move(A,fl,C)",
            "cl(A), on(A,C), bl(C)",
            "cl(A), on(A,fl), cl(C), bl(C)",
        ),
        move_group(
            &vocab,
            "move(A,B,fl)",
            "cl(A), on(A,fl), cl(B)",
            "cl(A), on(A,B)",
        ),
    ];
    let constraints = vec![
        forbidden("cl(fl)", &vocab),
        forbidden("bl(fl)", &vocab),
        forbidden("on(fl,X)", &vocab),
        forbidden("cl(X), on(Y,X)", &vocab),
        forbidden("on(X,Y), on(X,Z)", &vocab),
        forbidden("on(Y,X), on(Z,X), bl(X)", &vocab),
        forbidden("on(X,Y), on(Y,X)", &vocab),
    ];
    let mut init_atoms = String::new();
    for b in &blocks {
        if !init_atoms.is_empty() {
            init_atoms.push_str(", ");
        }
        init_atoms.push_str(&format!("bl({b}), cl({b}), on({b},fl)"));
    }
    let init = GroundState::from_conjunction(&conj(&init_atoms, &vocab), &vocab).unwrap();
    RmdpModel {
        vocab,
        groups,
        constraints,
        init_states: vec![init],
    }
}

/// The kind of a chemical-warehouse object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Water,
    Rubidium,
    Separator,
}

impl ObjectKind {
    pub fn relation(self) -> &'static str {
        match self {
            ObjectKind::Water => "wat",
            ObjectKind::Rubidium => "rub",
            ObjectKind::Separator => "sep",
        }
    }
}

/// The chemical warehouse: a blocks world whose objects are water
/// containers, rubidium containers or separators (`wat/1`, `rub/1`,
/// `sep/1`, all static). Water and rubidium containers move freely; a
/// separator can only be moved while it is on the floor, so once placed on
/// an object it stays. Initially every object is on the floor.
pub fn builtin_chemical_warehouse(objects: &[(&str, ObjectKind)]) -> RmdpModel {
    let mut vocab = Vocabulary::new();
    let obj = vocab.add_sort("obj").expect("fresh vocabulary");
    vocab
        .add_relation("cl", &[obj], RelationKind::State, false)
        .unwrap();
    vocab
        .add_relation("on", &[obj, obj], RelationKind::State, false)
        .unwrap();
    vocab
        .add_relation("rub", &[obj], RelationKind::State, true)
        .unwrap();
    vocab
        .add_relation("sep", &[obj], RelationKind::State, true)
        .unwrap();
    vocab
        .add_relation("wat", &[obj], RelationKind::State, true)
        .unwrap();
    vocab
        .add_relation("move", &[obj, obj, obj], RelationKind::Action, false)
        .unwrap();
    for (name, _) in objects {
        vocab.add_constant(name, obj).unwrap();
    }
    vocab.add_constant("fl", obj).unwrap();

    // Free movers are water and rubidium containers; the source of any
    // off-block move is typed so the head can restore its clearness.
    let mut groups = Vec::new();
    for mover in ["wat", "rub"] {
        for source in ["wat", "rub", "sep"] {
            groups.push(move_group(
                &vocab,
                "move(A,B,C)",
                &format!("{mover}(A), cl(A), on(A,C), {source}(C), cl(B)"),
                &format!("{mover}(A), cl(A), on(A,B), {source}(C), cl(C)"),
            ));
            groups.push(move_group(
                &vocab,
                "move(A,fl,C)",
                &format!("{mover}(A), cl(A), on(A,C), {source}(C)"),
                &format!("{mover}(A), cl(A), on(A,fl), {source}(C), cl(C)"),
            ));
        }
        groups.push(move_group(
            &vocab,
            "move(A,B,fl)",
            &format!("{mover}(A), cl(A), on(A,fl), cl(B)"),
            &format!("{mover}(A), cl(A), on(A,B)"),
        ));
    }
    // A separator moves only from the floor.
    groups.push(move_group(
        &vocab,
        "move(A,B,fl)",
        "sep(A), cl(A), on(A,fl), cl(B)",
        "sep(A), cl(A), on(A,B)",
    ));

    let mut constraints = vec![
        forbidden("cl(fl)", &vocab),
        forbidden("on(fl,X)", &vocab),
        forbidden("wat(fl)", &vocab),
        forbidden("rub(fl)", &vocab),
        forbidden("sep(fl)", &vocab),
        forbidden("cl(X), on(Y,X)", &vocab),
        forbidden("on(X,Y), on(X,Z)", &vocab),
        forbidden("on(X,Y), on(Y,X)", &vocab),
        forbidden("wat(X), rub(X)", &vocab),
        forbidden("wat(X), sep(X)", &vocab),
        forbidden("rub(X), sep(X)", &vocab),
    ];
    for kind in ["wat", "rub", "sep"] {
        constraints.push(forbidden(&format!("on(Y,X), on(Z,X), {kind}(X)"), &vocab));
    }

    let mut init_atoms = String::new();
    for (name, kind) in objects {
        if !init_atoms.is_empty() {
            init_atoms.push_str(", ");
        }
        init_atoms.push_str(&format!(
            "{}({name}), cl({name}), on({name},fl)",
            kind.relation()
        ));
    }
    let init = GroundState::from_conjunction(&conj(&init_atoms, &vocab), &vocab).unwrap();
    RmdpModel {
        vocab,
        groups,
        constraints,
        init_states: vec![init],
    }
}

/// The six-object warehouse used by the experiments: two water containers,
/// two rubidium containers and two separators.
pub fn default_chemical_warehouse() -> DomainSpec {
    let model = builtin_chemical_warehouse(&[
        ("a", ObjectKind::Water),
        ("b", ObjectKind::Water),
        ("c", ObjectKind::Rubidium),
        ("d", ObjectKind::Rubidium),
        ("e", ObjectKind::Separator),
        ("f", ObjectKind::Separator),
    ]);
    DomainSpec {
        model,
        variable_pool: 8,
        example_length: 8,
    }
}

/// Errors from example generation.
#[derive(Debug, Clone, PartialEq)]
pub enum GenerateError {
    Rmdp(RmdpError),
    /// The acceptance rate was too low to collect the requested counts.
    BudgetExhausted { attempts: u64 },
}

impl fmt::Display for GenerateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenerateError::Rmdp(e) => write!(f, "{e}"),
            GenerateError::BudgetExhausted { attempts } => {
                write!(f, "example generation gave up after {attempts} samples")
            }
        }
    }
}

impl core::error::Error for GenerateError {}

impl From<RmdpError> for GenerateError {
    fn from(e: RmdpError) -> Self {
        GenerateError::Rmdp(e)
    }
}

/// Sampling parameters for [`generate_examples`].
#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    /// Atoms per sampled example.
    pub length: usize,
    /// Distinct variables `X0..X{n-1}` available to the sampler.
    pub variable_pool: usize,
    pub seed: u64,
    /// Total sample budget before giving up.
    pub max_attempts: u64,
}

impl GenerateConfig {
    pub fn new(n_pos: usize, n_neg: usize, length: usize, seed: u64) -> Self {
        GenerateConfig {
            n_pos,
            n_neg,
            length,
            variable_pool: 8,
            seed,
            max_attempts: 2_000_000,
        }
    }
}

/// Samples sensible abstract states of the given length and labels each by
/// the target: positive when every ground state it subsumes satisfies the
/// target, negative when none does. Samples whose groundings are split, or
/// that subsume no state at all, are discarded. Deterministic per seed.
pub fn generate_examples(
    model: &RmdpModel,
    target: &Formula,
    cfg: &GenerateConfig,
) -> Result<ExampleSet, GenerateError> {
    let vocab = &model.vocab;
    let compiled = CompiledModel::new(model)?;
    let space = GroundSpace::build(&compiled, DEFAULT_STATE_CAP)?;
    let checker = SpaceChecker::agnostic(&space);
    let target_sat = sat_bitset(&compiled, &space, &checker, None, target)?;

    let state_rels: Vec<_> = vocab.state_relations().map(|(id, _)| id).collect();
    let var_names: Vec<String> = (0..cfg.variable_pool).map(|i| format!("X{i}")).collect();
    let const_names: Vec<String> = vocab.constants().map(|(_, c)| c.name.clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut positives: Vec<Conjunction> = Vec::new();
    let mut negatives: Vec<Conjunction> = Vec::new();
    let mut seen_keys: BTreeSet<String> = BTreeSet::new();
    let mut attempts: u64 = 0;
    while positives.len() < cfg.n_pos || negatives.len() < cfg.n_neg {
        attempts += 1;
        if attempts > cfg.max_attempts {
            return Err(GenerateError::BudgetExhausted { attempts });
        }
        let mut atoms = Vec::with_capacity(cfg.length);
        for _ in 0..cfg.length {
            let rel = state_rels[rng.random_range(0..state_rels.len())];
            let arity = vocab.relation(rel).arity();
            let mut args = Vec::with_capacity(arity);
            for _ in 0..arity {
                let pick = rng.random_range(0..var_names.len() + const_names.len());
                if pick < var_names.len() {
                    args.push(Term::var(&var_names[pick]));
                } else {
                    args.push(Term::constant(&const_names[pick - var_names.len()]));
                }
            }
            atoms.push(Atom::new(rel, args));
        }
        let Ok(sample) = Conjunction::new(atoms, vocab) else {
            continue;
        };
        if sample.len() != cfg.length {
            continue;
        }
        if !is_sensible(&sample, &model.constraints, vocab) {
            continue;
        }
        let pattern = CompiledPattern::compile(&sample, vocab)?;
        let subsumed: Vec<usize> = space
            .states
            .iter()
            .enumerate()
            .filter(|(_, s)| pattern.matches(s))
            .map(|(i, _)| i)
            .collect();
        if subsumed.is_empty() {
            continue;
        }
        let all = subsumed.iter().all(|&sid| target_sat[sid]);
        let none = subsumed.iter().all(|&sid| !target_sat[sid]);
        let bucket = if all && positives.len() < cfg.n_pos {
            &mut positives
        } else if none && negatives.len() < cfg.n_neg {
            &mut negatives
        } else {
            continue;
        };
        let key = set_canonical_key(&sample, vocab);
        if !seen_keys.insert(key) {
            continue;
        }
        bucket.push(sample);
    }
    Ok(ExampleSet {
        positives,
        negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::modelcheck::{max_prob_eventually, satisfies};
    use crate::rmdp::{enumerate_states, validate_model, GroundAtom};

    #[test]
    fn blocks_world_state_counts() {
        for (n, want) in [(2usize, 3usize), (3, 13)] {
            let model = builtin_blocks_world(n);
            assert!(validate_model(&model).is_valid(), "n={n}");
            assert_eq!(enumerate_states(&model, 10_000).unwrap().len(), want);
        }
    }

    #[test]
    fn blocks_world_enabled_actions_on_floor() {
        let model = builtin_blocks_world(2);
        let compiled = CompiledModel::new(&model).unwrap();
        let init = &model.init_states[0];
        let actions: Vec<String> = compiled
            .enabled_ground_actions(init)
            .iter()
            .map(|a| a.render(&model.vocab))
            .collect();
        assert_eq!(actions, vec!["move(a,b,fl)", "move(b,a,fl)"]);
    }

    #[test]
    fn blocks_world_move_probabilities() {
        let model = builtin_blocks_world(2);
        let compiled = CompiledModel::new(&model).unwrap();
        let init = model.init_states[0].clone();
        let on = model.vocab.rel_id("on").unwrap();
        let a = model.vocab.const_id("a").unwrap();
        let b = model.vocab.const_id("b").unwrap();
        let goal = move |s: &GroundState| {
            s.contains(&GroundAtom {
                rel: on,
                args: vec![a, b],
            })
        };

        // The failure outcome leaves the state unchanged.
        let ground = GroundAtom {
            rel: model.vocab.rel_id("move").unwrap(),
            args: vec![a, b, model.vocab.const_id("fl").unwrap()],
        };
        let succ = compiled.successors(&init, &ground).unwrap();
        assert_eq!(succ.len(), 2);
        assert!(succ
            .iter()
            .any(|(s, p)| s == &init && (*p - 0.1).abs() < 1e-12));

        let p1 = max_prob_eventually(&compiled, &init, &goal, 1).unwrap();
        assert!((p1 - 0.9).abs() < 1e-12);
        let p2 = max_prob_eventually(&compiled, &init, &goal, 2).unwrap();
        assert!((p2 - 0.99).abs() < 1e-12);
    }

    #[test]
    fn warehouse_separators_lock_once_placed() {
        let spec = default_chemical_warehouse();
        let model = &spec.model;
        assert!(validate_model(model).is_valid());
        let compiled = CompiledModel::new(model).unwrap();

        // Separator e sits on water a; it must never move again.
        let state = GroundState::from_conjunction(
            &conj(
                "wat(a), wat(b), rub(c), rub(d), sep(e), sep(f), \
                 on(e,a), on(a,fl), cl(e), \
                 cl(b), on(b,fl), cl(c), on(c,fl), cl(d), on(d,fl), cl(f), on(f,fl)",
                &model.vocab,
            ),
            &model.vocab,
        )
        .unwrap();
        assert!(compiled.is_legal(&state));
        let e = model.vocab.const_id("e").unwrap();
        for action in compiled.enabled_ground_actions(&state) {
            assert_ne!(action.args[0], e, "placed separator must be immobile");
        }

        // Static typing atoms are identical across all reachable states.
        let statics: Vec<GroundAtom> = state
            .atoms()
            .iter()
            .filter(|a| model.vocab.relation(a.rel).is_static)
            .cloned()
            .collect();
        for s in compiled.reachable_states(&state, 2).unwrap() {
            for atom in &statics {
                assert!(s.contains(atom));
            }
        }
    }

    #[test]
    fn warehouse_free_movers_behave_like_blocks() {
        let spec = default_chemical_warehouse();
        let model = &spec.model;
        let compiled = CompiledModel::new(model).unwrap();
        let init = model.init_states[0].clone();
        // From all-on-floor every object is movable onto any other object.
        let actions = compiled.enabled_ground_actions(&init);
        assert_eq!(actions.len(), 30);
    }

    #[test]
    fn keeping_a_block_on_the_floor_is_certain() {
        // From both-on-floor there is always a move whose every outcome
        // keeps a on the floor, so the bounded safety value is 1.
        let model = builtin_blocks_world(2);
        let compiled = CompiledModel::new(&model).unwrap();
        let init = model.init_states[0].clone();
        let on = model.vocab.rel_id("on").unwrap();
        let a = model.vocab.const_id("a").unwrap();
        let fl = model.vocab.const_id("fl").unwrap();
        let safe = move |s: &GroundState| {
            s.contains(&GroundAtom {
                rel: on,
                args: vec![a, fl],
            })
        };
        let p = crate::modelcheck::max_prob_globally(&compiled, &init, &safe, 3).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn policy_resolution_order_and_tie_breaking() {
        let model = builtin_blocks_world(2);
        let compiled = CompiledModel::new(&model).unwrap();
        let init = model.init_states[0].clone();
        let vocab = &model.vocab;
        let rule = |g: &str, a: &str| crate::rmdp::PolicyRule {
            guard: Conjunction::new(parse_atoms(g, vocab).unwrap(), vocab).unwrap(),
            action: parse_single_atom(a, vocab).unwrap(),
        };
        // One guard, two matches: the lexicographically least action fires.
        let generic = crate::rmdp::Policy {
            rules: vec![rule("cl(A), cl(B), on(A,fl)", "move(A,B,fl)")],
        };
        let chosen = crate::rmdp::policy_action(&compiled, &generic, &init)
            .unwrap()
            .unwrap();
        assert_eq!(chosen.render(vocab), "move(a,b,fl)");

        // Two matching rules: the earlier entry wins.
        let layered = crate::rmdp::Policy {
            rules: vec![
                rule("cl(b), cl(A), on(b,fl)", "move(b,A,fl)"),
                rule("cl(A), cl(B), on(A,fl)", "move(A,B,fl)"),
            ],
        };
        let chosen = crate::rmdp::policy_action(&compiled, &layered, &init)
            .unwrap()
            .unwrap();
        assert_eq!(chosen.render(vocab), "move(b,a,fl)");
    }

    #[test]
    fn covered_blocks_cannot_move() {
        let model = builtin_blocks_world(2);
        let compiled = CompiledModel::new(&model).unwrap();
        // b sits on a: no enabled action moves a.
        let state = GroundState::from_conjunction(
            &conj("bl(a), bl(b), cl(b), on(b,a), on(a,fl)", &model.vocab),
            &model.vocab,
        )
        .unwrap();
        let a = model.vocab.const_id("a").unwrap();
        let actions = compiled.enabled_ground_actions(&state);
        assert!(!actions.is_empty());
        assert!(actions.iter().all(|act| act.args[0] != a));
    }

    #[test]
    fn hopeless_targets_exhaust_the_sample_budget() {
        let model = builtin_blocks_world(2);
        // No state stacks a block on itself, so positives cannot exist.
        let target = parse_formula("P>=0.9 F<=1 [on(a,b), on(b,a)]", &model.vocab).unwrap();
        let cfg = GenerateConfig {
            variable_pool: 2,
            max_attempts: 500,
            ..GenerateConfig::new(1, 0, 2, 3)
        };
        let err = generate_examples(&model, &target, &cfg).unwrap_err();
        assert!(matches!(err, GenerateError::BudgetExhausted { .. }));
    }

    #[test]
    fn generated_examples_are_deterministic_and_labelled_by_the_target() {
        let model = builtin_blocks_world(3);
        let target = parse_formula("P>=0.9 F<=2 [on(a,b)]", &model.vocab).unwrap();
        let cfg = GenerateConfig {
            variable_pool: 3,
            ..GenerateConfig::new(3, 3, 2, 7)
        };
        let ex1 = generate_examples(&model, &target, &cfg).unwrap();
        let ex2 = generate_examples(&model, &target, &cfg).unwrap();
        assert_eq!(ex1.positives, ex2.positives);
        assert_eq!(ex1.negatives, ex2.negatives);
        assert_eq!(ex1.positives.len(), 3);
        assert_eq!(ex1.negatives.len(), 3);

        // Re-check labels with the independent brute-force oracle, state
        // by state.
        let compiled = CompiledModel::new(&model).unwrap();
        let states = enumerate_states(&model, 10_000).unwrap();
        for (examples, want) in [(&ex1.positives, true), (&ex1.negatives, false)] {
            for e in examples {
                let pattern = CompiledPattern::compile(e, &model.vocab).unwrap();
                let mut matched = false;
                for s in &states {
                    if pattern.matches(s) {
                        matched = true;
                        assert_eq!(satisfies(&compiled, s, &target, None).unwrap(), want);
                        assert_eq!(
                            crate::learner::oracle_satisfies(&compiled, s, &target, None).unwrap(),
                            want
                        );
                    }
                }
                assert!(matched);
            }
        }
    }
}
