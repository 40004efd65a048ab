//! The specializing refinement operator over candidate formulae:
//! lengthening, variable unification, variable instantiation and
//! globalization, with the duplicate-avoidance disciplines that give every
//! reachable formula a single derivation path.
//!
//! Phases run `LEN* UNI* INS* GLO?` along any root-to-node path:
//! lengthening children stay in the lengthen phase, a first unification
//! moves to the unify phase, a first instantiation to the instantiate
//! phase, and globalization is terminal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::formula::{Formula, PathOperator};
use crate::logic::{
    apply_substitution, is_canonical, is_sensible, Atom, Conjunction, IntegrityConstraint, RelId,
    SortId, Substitution, Term, Vocabulary,
};

/// A fixed total order over the state relations, stable for a whole run.
#[derive(Debug, Clone)]
pub struct RelationOrder {
    rels: Vec<RelId>,
}

impl RelationOrder {
    /// State relations ordered alphabetically by name.
    pub fn alphabetical(vocab: &Vocabulary) -> Self {
        let mut rels: Vec<RelId> = vocab.state_relations().map(|(id, _)| id).collect();
        rels.sort_by(|a, b| vocab.relation(*a).name.cmp(&vocab.relation(*b).name));
        RelationOrder { rels }
    }

    pub fn from_relations(rels: Vec<RelId>) -> Self {
        RelationOrder { rels }
    }

    pub fn relations(&self) -> &[RelId] {
        &self.rels
    }

    pub fn position(&self, rel: RelId) -> Option<usize> {
        self.rels.iter().position(|r| *r == rel)
    }
}

/// Which refinement family produced a node. Later phases never go back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Lengthen,
    Unify,
    Instantiate,
    Globalize,
}

/// A candidate formula with its refinement bookkeeping. The unification
/// and instantiation frontiers are derived from the formula shape: a
/// variable is "already unified" iff it occurs more than once, and the
/// instantiation frontier is the rightmost leftmost-occurrence of any
/// constant.
#[derive(Debug, Clone)]
pub struct CandidateNode {
    pub formula: Formula,
    pub phase: Phase,
    /// Number of refinement steps from the top formula.
    pub depth: u32,
}

/// Search-shaping parameters for refinement.
#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub alpha: f64,
    pub k: u32,
    pub max_len: usize,
    pub instantiation: bool,
    pub order: RelationOrder,
}

/// Children rejected by the sensibility and canonical-form gates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefineRejects {
    pub irrelevant: u64,
    pub semantic: u64,
}

/// The most general formula: an empty state formula under `F`.
pub fn top(cfg: &RefineConfig) -> CandidateNode {
    CandidateNode {
        formula: Formula {
            alpha: cfg.alpha,
            k: cfg.k,
            op: PathOperator::Finally,
            phi: Conjunction::empty(),
        },
        phase: Phase::Lengthen,
        depth: 0,
    }
}

fn fresh_var_name(index: usize) -> String {
    format!("X{index}")
}

/// Argument slots of the conjunction in left-to-right order.
fn flat_terms(c: &Conjunction) -> Vec<Term> {
    c.atoms()
        .iter()
        .flat_map(|a| a.args.iter().cloned())
        .collect()
}

fn occurrence_positions(flat: &[Term]) -> BTreeMap<String, Vec<usize>> {
    let mut occ: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (p, t) in flat.iter().enumerate() {
        if let Term::Var(v) = t {
            occ.entry(v.clone()).or_default().push(p);
        }
    }
    occ
}

/// One child per relation at or after the last atom's relation, appending
/// the relation with fresh variables. Children stay in the lengthen phase.
pub fn lengthen(node: &CandidateNode, cfg: &RefineConfig, vocab: &Vocabulary) -> Vec<CandidateNode> {
    if node.phase != Phase::Lengthen {
        return Vec::new();
    }
    let phi = &node.formula.phi;
    if phi.len() >= cfg.max_len {
        return Vec::new();
    }
    let start = match phi.atoms().last() {
        None => 0,
        Some(last) => match cfg.order.position(last.rel) {
            Some(p) => p,
            None => return Vec::new(),
        },
    };
    let next_var = phi.variables().len();
    let mut out = Vec::new();
    for rel in &cfg.order.relations()[start..] {
        let arity = vocab.relation(*rel).arity();
        let mut args = Vec::with_capacity(arity);
        for i in 0..arity {
            args.push(Term::Var(fresh_var_name(next_var + i)));
        }
        let mut atoms = phi.atoms().to_vec();
        atoms.push(Atom::new(*rel, args));
        out.push(CandidateNode {
            formula: Formula {
                alpha: node.formula.alpha,
                k: node.formula.k,
                op: node.formula.op,
                phi: Conjunction::from_atoms(atoms),
            },
            phase: Phase::Lengthen,
            depth: node.depth + 1,
        });
    }
    out
}

/// One child per admissible variable pair: of the two variables, at least
/// one occurs exactly once and is not followed by any variable occurring
/// more than once. The later-introduced variable is replaced by the
/// earlier one. Pairs that would collapse two atoms into one are skipped.
pub fn unify_step(node: &CandidateNode, vocab: &Vocabulary) -> Vec<CandidateNode> {
    if node.phase > Phase::Unify {
        return Vec::new();
    }
    let phi = &node.formula.phi;
    let vars = phi.variables();
    if vars.len() < 2 {
        return Vec::new();
    }
    let sorts = phi.var_sorts(vocab);
    let flat = flat_terms(phi);
    let occ = occurrence_positions(&flat);
    // suffix_unified[p]: some position at or after p holds a variable
    // occurring more than once.
    let unified_at: Vec<bool> = flat
        .iter()
        .map(|t| matches!(t, Term::Var(v) if occ[v].len() > 1))
        .collect();
    let mut suffix_unified = alloc::vec![false; flat.len() + 1];
    for p in (0..flat.len()).rev() {
        suffix_unified[p] = suffix_unified[p + 1] || unified_at[p];
    }
    // An endpoint qualifies when it occurs exactly once and no unified
    // variable occurs strictly after that occurrence.
    let admissible_endpoint = |v: &str| -> bool {
        let positions = &occ[v];
        positions.len() == 1 && !suffix_unified[positions[0] + 1]
    };
    let mut out = Vec::new();
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            let earlier = &vars[i];
            let later = &vars[j];
            if sorts[earlier] != sorts[later] {
                continue;
            }
            if !(admissible_endpoint(earlier) || admissible_endpoint(later)) {
                continue;
            }
            let theta = Substitution::from_pairs(&[(later.as_str(), Term::var(earlier))]);
            let Ok(child_phi) = apply_substitution(phi, &theta, vocab) else {
                continue;
            };
            if child_phi.len() < phi.len() {
                continue;
            }
            out.push(CandidateNode {
                formula: Formula {
                    alpha: node.formula.alpha,
                    k: node.formula.k,
                    op: node.formula.op,
                    phi: child_phi,
                },
                phase: Phase::Unify,
                depth: node.depth + 1,
            });
        }
    }
    out
}

/// One child per variable whose leftmost occurrence lies right of every
/// instantiated position, per sort-compatible constant not already in the
/// formula. Successive instantiations therefore run left to right.
pub fn instantiate_step(
    node: &CandidateNode,
    cfg: &RefineConfig,
    vocab: &Vocabulary,
) -> Vec<CandidateNode> {
    if !cfg.instantiation || node.phase > Phase::Instantiate {
        return Vec::new();
    }
    let phi = &node.formula.phi;
    let flat = flat_terms(phi);
    let occ = occurrence_positions(&flat);
    // Frontier: the rightmost leftmost-occurrence among constants present.
    let mut leftmost_const: BTreeMap<&str, usize> = BTreeMap::new();
    for (p, t) in flat.iter().enumerate() {
        if let Term::Const(c) = t {
            leftmost_const.entry(c.as_str()).or_insert(p);
        }
    }
    let frontier = leftmost_const.values().max().copied();
    let present = phi.constants();
    let sorts = phi.var_sorts(vocab);
    let mut vars: Vec<(&String, usize)> = occ.iter().map(|(v, ps)| (v, ps[0])).collect();
    vars.sort_by_key(|(_, p)| *p);
    let mut out = Vec::new();
    for (v, leftmost) in vars {
        if let Some(f) = frontier {
            if leftmost <= f {
                continue;
            }
        }
        let sort: SortId = sorts[v];
        let mut pool: Vec<&str> = vocab
            .constants_of_sort(sort)
            .filter(|(_, c)| !present.contains(&c.name))
            .map(|(_, c)| c.name.as_str())
            .collect();
        pool.sort_unstable();
        for name in pool {
            let theta = Substitution::from_pairs(&[(v.as_str(), Term::constant(name))]);
            let Ok(child_phi) = apply_substitution(phi, &theta, vocab) else {
                continue;
            };
            out.push(CandidateNode {
                formula: Formula {
                    alpha: node.formula.alpha,
                    k: node.formula.k,
                    op: node.formula.op,
                    phi: child_phi,
                },
                phase: Phase::Instantiate,
                depth: node.depth + 1,
            });
        }
    }
    out
}

/// Turns an `F` formula into its `G` twin. Terminal: globalized nodes
/// refine no further.
pub fn globalize(node: &CandidateNode) -> Option<CandidateNode> {
    if node.formula.op != PathOperator::Finally {
        return None;
    }
    Some(CandidateNode {
        formula: Formula {
            alpha: node.formula.alpha,
            k: node.formula.k,
            op: PathOperator::Globally,
            phi: node.formula.phi.clone(),
        },
        phase: Phase::Globalize,
        depth: node.depth + 1,
    })
}

/// All refinements of a node, gated by phase, filtered by sensibility
/// (counted as irrelevant) and canonical form (counted as semantically
/// equivalent). Globalized children come last.
pub fn refine(
    node: &CandidateNode,
    cfg: &RefineConfig,
    vocab: &Vocabulary,
    constraints: &[IntegrityConstraint],
) -> (Vec<CandidateNode>, RefineRejects) {
    let mut raw = Vec::new();
    raw.extend(lengthen(node, cfg, vocab));
    raw.extend(unify_step(node, vocab));
    raw.extend(instantiate_step(node, cfg, vocab));
    if let Some(g) = globalize(node) {
        raw.push(g);
    }
    filter_children(raw, vocab, constraints)
}

/// The search seeds: the filtered lengthenings of the top formula.
pub fn seeds(
    cfg: &RefineConfig,
    vocab: &Vocabulary,
    constraints: &[IntegrityConstraint],
) -> (Vec<CandidateNode>, RefineRejects) {
    filter_children(lengthen(&top(cfg), cfg, vocab), vocab, constraints)
}

fn filter_children(
    raw: Vec<CandidateNode>,
    vocab: &Vocabulary,
    constraints: &[IntegrityConstraint],
) -> (Vec<CandidateNode>, RefineRejects) {
    let mut rejects = RefineRejects::default();
    let mut out = Vec::with_capacity(raw.len());
    for child in raw {
        if !is_sensible(&child.formula.phi, constraints, vocab) {
            rejects.irrelevant += 1;
            continue;
        }
        if !is_canonical(&child.formula.phi, vocab) {
            rejects.semantic += 1;
            continue;
        }
        out.push(child);
    }
    (out, rejects)
}
