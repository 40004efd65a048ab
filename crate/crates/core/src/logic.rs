//! Relational logic kernel: vocabularies, terms, atoms, conjunctions,
//! substitutions and the object-identity (OI) subsumption machinery.
//!
//! Under object identity, syntactically distinct terms of a conjunction
//! denote distinct objects. Matching substitutions are therefore injective
//! and may never collapse two terms of the pattern, and an atom mentioning
//! the same term twice (e.g. `on(X,X)`) is self-contradictory.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Index of a sort in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SortId(pub u16);

/// Index of a relation in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelId(pub u16);

/// Index of a constant in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstId(pub u16);

/// Whether a relation describes state or names an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationKind {
    State,
    Action,
}

/// A relation symbol with its argument sorts.
#[derive(Debug, Clone)]
pub struct RelationDecl {
    pub name: String,
    pub arg_sorts: Vec<SortId>,
    pub kind: RelationKind,
    /// Static relations are never modified by any transition rule.
    pub is_static: bool,
}

impl RelationDecl {
    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }
}

/// A typed constant.
#[derive(Debug, Clone)]
pub struct ConstantDecl {
    pub name: String,
    pub sort: SortId,
}

/// The alphabet of a model: sorts, relation symbols and typed constants.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    sorts: Vec<String>,
    relations: Vec<RelationDecl>,
    constants: Vec<ConstantDecl>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sort(&mut self, name: &str) -> Result<SortId, LogicError> {
        if self.sort_id(name).is_some() {
            return Err(LogicError::Duplicate(format!("sort {name}")));
        }
        self.sorts.push(name.to_owned());
        Ok(SortId((self.sorts.len() - 1) as u16))
    }

    pub fn add_relation(
        &mut self,
        name: &str,
        arg_sorts: &[SortId],
        kind: RelationKind,
        is_static: bool,
    ) -> Result<RelId, LogicError> {
        if self.rel_id(name).is_some() {
            return Err(LogicError::Duplicate(format!("relation {name}")));
        }
        self.relations.push(RelationDecl {
            name: name.to_owned(),
            arg_sorts: arg_sorts.to_vec(),
            kind,
            is_static,
        });
        Ok(RelId((self.relations.len() - 1) as u16))
    }

    pub fn add_constant(&mut self, name: &str, sort: SortId) -> Result<ConstId, LogicError> {
        if self.const_id(name).is_some() {
            return Err(LogicError::Duplicate(format!("constant {name}")));
        }
        self.constants.push(ConstantDecl {
            name: name.to_owned(),
            sort,
        });
        Ok(ConstId((self.constants.len() - 1) as u16))
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.sorts
            .iter()
            .position(|s| s == name)
            .map(|i| SortId(i as u16))
    }

    pub fn rel_id(&self, name: &str) -> Option<RelId> {
        self.relations
            .iter()
            .position(|r| r.name == name)
            .map(|i| RelId(i as u16))
    }

    pub fn const_id(&self, name: &str) -> Option<ConstId> {
        self.constants
            .iter()
            .position(|c| c.name == name)
            .map(|i| ConstId(i as u16))
    }

    pub fn sort_name(&self, id: SortId) -> &str {
        &self.sorts[id.0 as usize]
    }

    pub fn relation(&self, id: RelId) -> &RelationDecl {
        &self.relations[id.0 as usize]
    }

    pub fn constant(&self, id: ConstId) -> &ConstantDecl {
        &self.constants[id.0 as usize]
    }

    pub fn sorts(&self) -> impl Iterator<Item = (SortId, &str)> {
        self.sorts
            .iter()
            .enumerate()
            .map(|(i, s)| (SortId(i as u16), s.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelId, &RelationDecl)> {
        self.relations
            .iter()
            .enumerate()
            .map(|(i, r)| (RelId(i as u16), r))
    }

    pub fn constants(&self) -> impl Iterator<Item = (ConstId, &ConstantDecl)> {
        self.constants
            .iter()
            .enumerate()
            .map(|(i, c)| (ConstId(i as u16), c))
    }

    pub fn constants_of_sort(&self, sort: SortId) -> impl Iterator<Item = (ConstId, &ConstantDecl)> {
        self.constants().filter(move |(_, c)| c.sort == sort)
    }

    /// State relations in declaration order.
    pub fn state_relations(&self) -> impl Iterator<Item = (RelId, &RelationDecl)> {
        self.relations().filter(|(_, r)| r.kind == RelationKind::State)
    }
}

/// A term: a variable (upper-case initial) or a constant (lower-case initial).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_owned())
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(name.to_owned())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An atom `r(t1, ..., tm)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub rel: RelId,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(rel: RelId, args: Vec<Term>) -> Self {
        Atom { rel, args }
    }

    /// True when no term occurs twice among the arguments. An atom with a
    /// repeated term is contradictory under object identity.
    pub fn is_oi_consistent(&self) -> bool {
        for (i, t) in self.args.iter().enumerate() {
            if self.args[i + 1..].contains(t) {
                return false;
            }
        }
        true
    }

    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        out.push_str(&vocab.relation(self.rel).name);
        if !self.args.is_empty() {
            out.push('(');
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(t.name());
            }
            out.push(')');
        }
        out
    }
}

/// An ordered conjunction of atoms with set semantics (no duplicates).
///
/// Doubles as an abstract state, a state formula and a rule body/head.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Conjunction {
    atoms: Vec<Atom>,
}

impl Conjunction {
    /// Builds a conjunction, validating arity, constant existence and
    /// sort-consistency of every variable across its occurrences.
    /// Exact duplicate atoms are dropped, keeping the first occurrence.
    pub fn new(atoms: Vec<Atom>, vocab: &Vocabulary) -> Result<Self, LogicError> {
        let c = Self::from_atoms(atoms);
        c.check_sorts(vocab)?;
        Ok(c)
    }

    /// Builds a conjunction without sort validation (atoms assumed checked).
    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        let mut seen: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !seen.contains(&a) {
                seen.push(a);
            }
        }
        Conjunction { atoms: seen }
    }

    pub fn empty() -> Self {
        Conjunction { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.atoms
            .iter()
            .all(|a| a.args.iter().all(|t| !t.is_var()))
    }

    /// True when every atom is OI-consistent (no atom repeats a term).
    pub fn is_oi_consistent(&self) -> bool {
        self.atoms.iter().all(Atom::is_oi_consistent)
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.atoms {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !out.iter().any(|x| x == v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    /// Constant names occurring anywhere in the conjunction.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            for t in &a.args {
                if let Term::Const(c) = t {
                    out.insert(c.clone());
                }
            }
        }
        out
    }

    fn check_sorts(&self, vocab: &Vocabulary) -> Result<(), LogicError> {
        let mut var_sorts: BTreeMap<&str, SortId> = BTreeMap::new();
        for a in &self.atoms {
            let decl = vocab.relation(a.rel);
            if a.args.len() != decl.arity() {
                return Err(LogicError::ArityMismatch {
                    relation: decl.name.clone(),
                    expected: decl.arity(),
                    got: a.args.len(),
                });
            }
            for (pos, t) in a.args.iter().enumerate() {
                let want = decl.arg_sorts[pos];
                match t {
                    Term::Const(name) => {
                        let id = vocab
                            .const_id(name)
                            .ok_or_else(|| LogicError::UnknownConstant(name.clone()))?;
                        let have = vocab.constant(id).sort;
                        if have != want {
                            return Err(LogicError::SortMismatch {
                                term: name.clone(),
                                expected: vocab.sort_name(want).to_owned(),
                                found: vocab.sort_name(have).to_owned(),
                            });
                        }
                    }
                    Term::Var(name) => match var_sorts.get(name.as_str()) {
                        Some(&have) if have != want => {
                            return Err(LogicError::SortMismatch {
                                term: name.clone(),
                                expected: vocab.sort_name(want).to_owned(),
                                found: vocab.sort_name(have).to_owned(),
                            });
                        }
                        Some(_) => {}
                        None => {
                            var_sorts.insert(name.as_str(), want);
                        }
                    },
                }
            }
        }
        Ok(())
    }

    /// Sort of every variable, derived from its occurrence positions.
    pub fn var_sorts(&self, vocab: &Vocabulary) -> BTreeMap<String, SortId> {
        let mut out = BTreeMap::new();
        for a in &self.atoms {
            let decl = vocab.relation(a.rel);
            for (pos, t) in a.args.iter().enumerate() {
                if let Term::Var(v) = t {
                    out.entry(v.clone()).or_insert(decl.arg_sorts[pos]);
                }
            }
        }
        out
    }

    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut out = String::from("[");
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&a.render(vocab));
        }
        out.push(']');
        out
    }
}

/// A finite map from variable names to terms. Identity bindings are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: &str, image: Term) {
        if let Term::Var(v) = &image {
            if v == var {
                return;
            }
        }
        self.bindings.insert(var.to_owned(), image);
    }

    pub fn from_pairs(pairs: &[(&str, Term)]) -> Self {
        let mut s = Self::new();
        for (v, t) in pairs {
            s.bind(v, t.clone());
        }
        s
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::from("{");
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(v);
            out.push_str("<-");
            out.push_str(t.name());
        }
        out.push('}');
        out
    }
}

/// Errors from vocabulary construction and conjunction validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogicError {
    Duplicate(String),
    UnknownSort(String),
    UnknownRelation(String),
    UnknownConstant(String),
    ArityMismatch {
        relation: String,
        expected: usize,
        got: usize,
    },
    SortMismatch {
        term: String,
        expected: String,
        found: String,
    },
}

impl fmt::Display for LogicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicError::Duplicate(what) => write!(f, "duplicate declaration: {what}"),
            LogicError::UnknownSort(s) => write!(f, "unknown sort: {s}"),
            LogicError::UnknownRelation(r) => write!(f, "unknown relation: {r}"),
            LogicError::UnknownConstant(c) => write!(f, "unknown constant: {c}"),
            LogicError::ArityMismatch {
                relation,
                expected,
                got,
            } => write!(f, "relation {relation} expects {expected} arguments, got {got}"),
            LogicError::SortMismatch {
                term,
                expected,
                found,
            } => write!(f, "term {term} has sort {found}, expected {expected}"),
        }
    }
}

impl core::error::Error for LogicError {}

/// A forbidden pattern; any conjunction it OI-matches into is illegal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrityConstraint {
    pub forbidden: Conjunction,
}

/// Applies a substitution to every atom, preserving atom order.
///
/// Errors when an image violates the argument sort of any occurrence of the
/// bound variable.
pub fn apply_substitution(
    c: &Conjunction,
    theta: &Substitution,
    vocab: &Vocabulary,
) -> Result<Conjunction, LogicError> {
    let atoms = c
        .atoms()
        .iter()
        .map(|a| Atom::new(a.rel, a.args.iter().map(|t| theta.apply_term(t)).collect()))
        .collect();
    Conjunction::new(atoms, vocab)
}

/// All OI-respecting substitutions `theta` over the pattern's variables such
/// that `pattern . theta` is a subset of the target's atoms.
///
/// Images of distinct pattern terms are pairwise distinct and no variable
/// maps to a constant already occurring in the pattern. A pattern containing
/// an OI-inconsistent atom has no matchers.
pub fn oi_matchers(pattern: &Conjunction, target: &Conjunction) -> Vec<Substitution> {
    if !pattern.is_oi_consistent() {
        return Vec::new();
    }
    let pattern_consts = pattern.constants();
    let mut results = Vec::new();
    let mut binding: BTreeMap<String, Term> = BTreeMap::new();
    match_atoms(
        pattern.atoms(),
        target,
        &pattern_consts,
        &mut binding,
        &mut results,
    );
    results
}

fn match_atoms(
    remaining: &[Atom],
    target: &Conjunction,
    pattern_consts: &BTreeSet<String>,
    binding: &mut BTreeMap<String, Term>,
    results: &mut Vec<Substitution>,
) {
    let Some((first, rest)) = remaining.split_first() else {
        let mut theta = Substitution::new();
        for (v, t) in binding.iter() {
            theta.bind(v, t.clone());
        }
        results.push(theta);
        return;
    };
    for cand in target.atoms().iter().filter(|a| a.rel == first.rel) {
        let mut added: Vec<String> = Vec::new();
        let mut ok = true;
        for (pt, tt) in first.args.iter().zip(cand.args.iter()) {
            match pt {
                Term::Const(c) => {
                    if tt != &Term::Const(c.clone()) {
                        ok = false;
                        break;
                    }
                }
                Term::Var(v) => {
                    if let Some(bound) = binding.get(v) {
                        if bound != tt {
                            ok = false;
                            break;
                        }
                    } else {
                        // Injectivity: the image must be new among images and
                        // distinct from every constant of the pattern.
                        if let Term::Const(t) = tt {
                            if pattern_consts.contains(t) {
                                ok = false;
                                break;
                            }
                        }
                        if binding.values().any(|img| img == tt) {
                            ok = false;
                            break;
                        }
                        binding.insert(v.clone(), tt.clone());
                        added.push(v.clone());
                    }
                }
            }
        }
        if ok {
            match_atoms(rest, target, pattern_consts, binding, results);
        }
        for v in added {
            binding.remove(&v);
        }
    }
}

/// True iff the target is OI-subsumed by the pattern (the pattern is at
/// least as general as the target).
pub fn oi_subsumes(target: &Conjunction, pattern: &Conjunction) -> bool {
    if !pattern.is_oi_consistent() {
        return false;
    }
    let pattern_consts = pattern.constants();
    let mut binding: BTreeMap<String, Term> = BTreeMap::new();
    any_match(pattern.atoms(), target, &pattern_consts, &mut binding)
}

fn any_match(
    remaining: &[Atom],
    target: &Conjunction,
    pattern_consts: &BTreeSet<String>,
    binding: &mut BTreeMap<String, Term>,
) -> bool {
    let Some((first, rest)) = remaining.split_first() else {
        return true;
    };
    for cand in target.atoms().iter().filter(|a| a.rel == first.rel) {
        let mut added: Vec<String> = Vec::new();
        let mut ok = true;
        for (pt, tt) in first.args.iter().zip(cand.args.iter()) {
            match pt {
                Term::Const(c) => {
                    if tt != &Term::Const(c.clone()) {
                        ok = false;
                        break;
                    }
                }
                Term::Var(v) => {
                    if let Some(bound) = binding.get(v) {
                        if bound != tt {
                            ok = false;
                            break;
                        }
                    } else {
                        if let Term::Const(t) = tt {
                            if pattern_consts.contains(t) {
                                ok = false;
                                break;
                            }
                        }
                        if binding.values().any(|img| img == tt) {
                            ok = false;
                            break;
                        }
                        binding.insert(v.clone(), tt.clone());
                        added.push(v.clone());
                    }
                }
            }
        }
        if ok && any_match(rest, target, pattern_consts, binding) {
            for v in added {
                binding.remove(&v);
            }
            return true;
        }
        for v in added {
            binding.remove(&v);
        }
    }
    false
}

/// All conjunctions obtained by injectively mapping the variables to
/// sort-compatible constants not already occurring in the conjunction.
///
/// Deterministic: variables in first-occurrence order, constants by name,
/// assignments enumerated lexicographically.
pub fn oi_groundings(
    c: &Conjunction,
    constants: &[ConstantDecl],
    vocab: &Vocabulary,
) -> Vec<Conjunction> {
    if !c.is_oi_consistent() {
        return Vec::new();
    }
    let vars = c.variables();
    if vars.is_empty() {
        return vec![c.clone()];
    }
    let var_sorts = c.var_sorts(vocab);
    let present = c.constants();
    let mut pools: Vec<Vec<&ConstantDecl>> = Vec::with_capacity(vars.len());
    for v in &vars {
        let sort = var_sorts[v];
        let mut pool: Vec<&ConstantDecl> = constants
            .iter()
            .filter(|k| k.sort == sort && !present.contains(&k.name))
            .collect();
        pool.sort_by(|a, b| a.name.cmp(&b.name));
        pools.push(pool);
    }
    let mut out = Vec::new();
    let mut chosen: Vec<&ConstantDecl> = Vec::new();
    ground_rec(c, vocab, &vars, &pools, &mut chosen, &mut out);
    out
}

fn ground_rec<'a>(
    c: &Conjunction,
    vocab: &Vocabulary,
    vars: &[String],
    pools: &[Vec<&'a ConstantDecl>],
    chosen: &mut Vec<&'a ConstantDecl>,
    out: &mut Vec<Conjunction>,
) {
    let depth = chosen.len();
    if depth == vars.len() {
        let mut theta = Substitution::new();
        for (v, k) in vars.iter().zip(chosen.iter()) {
            theta.bind(v, Term::Const(k.name.clone()));
        }
        // Images drawn from sort-valid pools; application cannot fail.
        if let Ok(g) = apply_substitution(c, &theta, vocab) {
            out.push(g);
        }
        return;
    }
    for k in &pools[depth] {
        if chosen.iter().any(|p| p.name == k.name) {
            continue;
        }
        chosen.push(k);
        ground_rec(c, vocab, vars, pools, chosen, out);
        chosen.pop();
    }
}

/// Concatenation of the relation names in atom order.
pub fn signature_string(c: &Conjunction, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for a in c.atoms() {
        out.push_str(&vocab.relation(a.rel).name);
    }
    out
}

/// Keys used for canonical-form comparison, compared lexicographically as
/// a pair.
///
/// The primary key renders every term — constant or variable — by its
/// first-occurrence index, so the canonical atom order depends only on the
/// term-sharing pattern and never changes when a variable is instantiated.
/// The secondary key distinguishes constants (by name) from variables
/// (rendered with a prefix sorting after every constant character), so
/// among pattern-equal orders the instantiated positions come first.
fn comparison_keys(atoms: &[Atom], vocab: &Vocabulary) -> (String, String) {
    let mut next = 1usize;
    let mut pattern_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut var_next = 1usize;
    let mut var_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut primary = String::new();
    let mut secondary = String::new();
    for (i, a) in atoms.iter().enumerate() {
        if i > 0 {
            primary.push(',');
            secondary.push(',');
        }
        let rel = &vocab.relation(a.rel).name;
        primary.push_str(rel);
        secondary.push_str(rel);
        primary.push('(');
        secondary.push('(');
        for (j, t) in a.args.iter().enumerate() {
            if j > 0 {
                primary.push(',');
                secondary.push(',');
            }
            let pattern = *pattern_ids.entry(t.name()).or_insert_with(|| {
                let n = next;
                next += 1;
                n
            });
            primary.push('~');
            primary.push_str(&format!("{pattern}"));
            match t {
                Term::Const(c) => secondary.push_str(c),
                Term::Var(v) => {
                    let n = *var_ids.entry(v.as_str()).or_insert_with(|| {
                        let n = var_next;
                        var_next += 1;
                        n
                    });
                    secondary.push('~');
                    secondary.push_str(&format!("{n}"));
                }
            }
        }
        primary.push(')');
        secondary.push(')');
    }
    (primary, secondary)
}

fn renumber_atoms(atoms: &[Atom]) -> Vec<Atom> {
    let mut next = 1usize;
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    atoms
        .iter()
        .map(|a| {
            Atom::new(
                a.rel,
                a.args
                    .iter()
                    .map(|t| match t {
                        Term::Const(_) => t.clone(),
                        Term::Var(v) => {
                            let name = names.entry(v.clone()).or_insert_with(|| {
                                let name = format!("V{next}");
                                next += 1;
                                name
                            });
                            Term::Var(name.clone())
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Maximal runs of adjacent atoms with the same relation symbol.
fn signature_runs(atoms: &[Atom]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0usize;
    for i in 1..=atoms.len() {
        if i == atoms.len() || atoms[i].rel != atoms[start].rel {
            runs.push((start, i));
            start = i;
        }
    }
    runs
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    perm_rec(&mut items, 0, &mut out);
    out
}

fn perm_rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        perm_rec(items, k + 1, out);
        items.swap(k, i);
    }
}

fn orderings_preserving_signature(atoms: &[Atom]) -> Vec<Vec<Atom>> {
    let runs = signature_runs(atoms);
    let mut result: Vec<Vec<Atom>> = vec![Vec::new()];
    for &(start, end) in &runs {
        let perms = permutations(end - start);
        let mut next = Vec::with_capacity(result.len() * perms.len());
        for prefix in &result {
            for perm in &perms {
                let mut ext = prefix.clone();
                for &p in perm {
                    ext.push(atoms[start + p].clone());
                }
                next.push(ext);
            }
        }
        result = next;
    }
    result
}

/// The canonical form: over all atom orderings that preserve the signature,
/// renumber variables left to right and keep the ordering with the least
/// comparison keys.
pub fn canonicalize(c: &Conjunction, vocab: &Vocabulary) -> Conjunction {
    let mut best: Option<((String, String), Vec<Atom>)> = None;
    for ordering in orderings_preserving_signature(c.atoms()) {
        let key = comparison_keys(&ordering, vocab);
        match &best {
            Some((k, _)) if *k <= key => {}
            _ => best = Some((key, ordering)),
        }
    }
    let (_, atoms) = best.expect("at least one ordering");
    Conjunction::from_atoms(renumber_atoms(&atoms))
}

/// Stable key identifying a conjunction up to variable renaming, for
/// signature-preserving atom orders.
pub fn canonical_key(c: &Conjunction, vocab: &Vocabulary) -> String {
    let mut best: Option<(String, String)> = None;
    for ordering in orderings_preserving_signature(c.atoms()) {
        let key = comparison_keys(&ordering, vocab);
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }
    let (primary, secondary) = best.expect("at least one ordering");
    format!("{primary}|{secondary}")
}

/// True iff renumbering the conjunction's variables left to right yields its
/// canonical form.
pub fn is_canonical(c: &Conjunction, vocab: &Vocabulary) -> bool {
    let own = comparison_keys(c.atoms(), vocab);
    format!("{}|{}", own.0, own.1) == canonical_key(c, vocab)
}

/// Canonical key after sorting atoms by relation name, identifying a
/// conjunction as a set modulo variable renaming.
pub fn set_canonical_key(c: &Conjunction, vocab: &Vocabulary) -> String {
    let mut atoms = c.atoms().to_vec();
    atoms.sort_by(|a, b| {
        vocab
            .relation(a.rel)
            .name
            .cmp(&vocab.relation(b.rel).name)
            .then(a.rel.cmp(&b.rel))
    });
    canonical_key(&Conjunction::from_atoms(atoms), vocab)
}

/// False iff the conjunction contains an OI-inconsistent atom or some
/// forbidden pattern OI-matches into it (its variables acting as distinct
/// fresh objects).
pub fn is_sensible(
    c: &Conjunction,
    constraints: &[IntegrityConstraint],
    _vocab: &Vocabulary,
) -> bool {
    if !c.is_oi_consistent() {
        return false;
    }
    !constraints.iter().any(|ic| oi_subsumes(c, &ic.forbidden))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_vocab() -> (Vocabulary, RelId, RelId, RelId) {
        let mut v = Vocabulary::new();
        let obj = v.add_sort("obj").unwrap();
        let cl = v.add_relation("cl", &[obj], RelationKind::State, false).unwrap();
        let on = v
            .add_relation("on", &[obj, obj], RelationKind::State, false)
            .unwrap();
        let wat = v.add_relation("wat", &[obj], RelationKind::State, true).unwrap();
        for name in ["a", "b", "c", "fl"] {
            v.add_constant(name, obj).unwrap();
        }
        (v, cl, on, wat)
    }

    fn atom(vocab: &Vocabulary, rel: &str, args: &[&str]) -> Atom {
        let terms = args
            .iter()
            .map(|s| {
                if s.chars().next().unwrap().is_uppercase() {
                    Term::var(s)
                } else {
                    Term::constant(s)
                }
            })
            .collect();
        Atom::new(vocab.rel_id(rel).unwrap(), terms)
    }

    fn conj(vocab: &Vocabulary, spec: &[(&str, &[&str])]) -> Conjunction {
        Conjunction::new(
            spec.iter().map(|(r, a)| atom(vocab, r, a)).collect(),
            vocab,
        )
        .unwrap()
    }

    #[test]
    fn apply_substitution_examples() {
        let (v, ..) = test_vocab();
        let c = conj(&v, &[("on", &["X", "Y"])]);
        let theta = Substitution::from_pairs(&[("X", Term::constant("a"))]);
        assert_eq!(
            apply_substitution(&c, &theta, &v).unwrap(),
            conj(&v, &[("on", &["a", "Y"])])
        );

        let c2 = conj(&v, &[("cl", &["b"])]);
        assert_eq!(apply_substitution(&c2, &Substitution::new(), &v).unwrap(), c2);

        let c3 = conj(&v, &[("on", &["Y", "X"])]);
        let theta3 = Substitution::from_pairs(&[
            ("Y", Term::constant("a")),
            ("X", Term::var("Z")),
        ]);
        assert_eq!(
            apply_substitution(&c3, &theta3, &v).unwrap(),
            conj(&v, &[("on", &["a", "Z"])])
        );
    }

    #[test]
    fn matcher_examples() {
        let (v, ..) = test_vocab();
        // Single matcher binding both variables.
        let pattern = conj(&v, &[("on", &["Y", "X"])]);
        let target = conj(&v, &[("on", &["a", "c"]), ("cl", &["b"])]);
        let ms = oi_matchers(&pattern, &target);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].get("Y"), Some(&Term::constant("a")));
        assert_eq!(ms[0].get("X"), Some(&Term::constant("c")));

        // OI-inconsistent pattern has no matchers even against a matching shape.
        let bad = Conjunction::from_atoms(vec![atom(&v, "on", &["X", "X"])]);
        let tgt = conj(&v, &[("on", &["a", "b"])]);
        assert!(oi_matchers(&bad, &tgt).is_empty());

        // Both injective assignments are found, in target order.
        let p = conj(&v, &[("cl", &["A"])]);
        let t = conj(&v, &[("cl", &["a"]), ("cl", &["b"])]);
        let ms = oi_matchers(&p, &t);
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].get("A"), Some(&Term::constant("a")));
        assert_eq!(ms[1].get("A"), Some(&Term::constant("b")));
    }

    #[test]
    fn matcher_respects_pattern_constants() {
        let (v, ..) = test_vocab();
        // X may not map to a constant already present in the pattern.
        let p = conj(&v, &[("on", &["X", "a"])]);
        let t = conj(&v, &[("on", &["a", "a"])]);
        assert!(oi_matchers(&p, &t).is_empty());
        let t2 = conj(&v, &[("on", &["b", "a"])]);
        assert_eq!(oi_matchers(&p, &t2).len(), 1);
    }

    #[test]
    fn subsumption_examples() {
        let (v, ..) = test_vocab();
        let target = conj(&v, &[("cl", &["a"]), ("on", &["a", "b"])]);
        let pattern = conj(&v, &[("cl", &["a"]), ("on", &["a", "Y"])]);
        assert!(oi_subsumes(&target, &pattern));

        let neg = conj(&v, &[("on", &["X", "b"]), ("on", &["b", "c"])]);
        assert!(!oi_subsumes(&neg, &pattern));

        // Reflexivity.
        assert!(oi_subsumes(&target, &target));
        assert!(oi_subsumes(&neg, &neg));
    }

    #[test]
    fn grounding_examples() {
        let mut v = Vocabulary::new();
        let obj = v.add_sort("obj").unwrap();
        v.add_relation("cl", &[obj], RelationKind::State, false).unwrap();
        v.add_relation("on", &[obj, obj], RelationKind::State, false)
            .unwrap();
        for n in ["bl1", "bl2", "bl3", "bl4"] {
            v.add_constant(n, obj).unwrap();
        }
        let three: Vec<ConstantDecl> = v.constants().take(3).map(|(_, c)| c.clone()).collect();
        let four: Vec<ConstantDecl> = v.constants().map(|(_, c)| c.clone()).collect();

        // Three distinct variables of one sort: the falling factorial.
        let c = conj(&v, &[("cl", &["X"]), ("cl", &["Z"]), ("on", &["X", "Y"])]);
        assert_eq!(oi_groundings(&c, &three, &v).len(), 6);
        assert_eq!(oi_groundings(&c, &four, &v).len(), 24);

        // Ground input grounds to itself.
        let g = conj(&v, &[("on", &["bl1", "bl2"])]);
        assert_eq!(oi_groundings(&g, &three, &v), vec![g.clone()]);

        // Injectivity forbids X = Y.
        let two: Vec<ConstantDecl> = v.constants().take(2).map(|(_, c)| c.clone()).collect();
        let o = conj(&v, &[("on", &["X", "Y"])]);
        let gs = oi_groundings(&o, &two, &v);
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0], conj(&v, &[("on", &["bl1", "bl2"])]));
        assert_eq!(gs[1], conj(&v, &[("on", &["bl2", "bl1"])]));
    }

    #[test]
    fn signature_examples() {
        let (v, ..) = test_vocab();
        let c = conj(&v, &[("cl", &["X"]), ("cl", &["Y"]), ("on", &["X", "Z"])]);
        assert_eq!(signature_string(&c, &v), "clclon");
        assert_eq!(signature_string(&Conjunction::empty(), &v), "");
        let c2 = conj(&v, &[("on", &["X", "Y"]), ("on", &["Y", "Z"]), ("wat", &["Z"])]);
        assert_eq!(signature_string(&c2, &v), "ononwat");
    }

    #[test]
    fn canonical_form_examples() {
        let (v, ..) = test_vocab();
        let chain = conj(&v, &[("on", &["X", "Y"]), ("on", &["Y", "Z"]), ("wat", &["Z"])]);
        let canon = canonicalize(&chain, &v);
        assert_eq!(
            canon,
            conj(&v, &[("on", &["V1", "V2"]), ("on", &["V2", "V3"]), ("wat", &["V3"])])
        );
        assert!(is_canonical(&chain, &v));

        let twisted = conj(&v, &[("on", &["X", "Y"]), ("on", &["Z", "X"]), ("wat", &["Y"])]);
        assert!(!is_canonical(&twisted, &v));
        // Same meaning, same canonical form.
        assert_eq!(canonicalize(&twisted, &v), canon);

        let single = conj(&v, &[("cl", &["X"])]);
        assert_eq!(canonicalize(&single, &v), conj(&v, &[("cl", &["V1"])]));
        assert!(is_canonical(&single, &v));
    }

    #[test]
    fn canonical_orders_constants_before_variables() {
        let (v, ..) = test_vocab();
        // With one instantiated atom the constant-bearing atom leads.
        let c = conj(&v, &[("cl", &["a"]), ("cl", &["Y"])]);
        assert!(is_canonical(&c, &v));
        let flipped = conj(&v, &[("cl", &["Y"]), ("cl", &["a"])]);
        assert!(!is_canonical(&flipped, &v));
    }

    #[test]
    fn sensibility_examples() {
        let (v, ..) = test_vocab();
        let constraints = vec![IntegrityConstraint {
            forbidden: conj(&v, &[("cl", &["X"]), ("on", &["Y", "X"])]),
        }];
        let covered = conj(&v, &[("cl", &["X"]), ("on", &["Y", "X"])]);
        assert!(!is_sensible(&covered, &constraints, &v));
        let clear_on = conj(&v, &[("cl", &["X"]), ("on", &["X", "Y"])]);
        assert!(is_sensible(&clear_on, &constraints, &v));
        assert!(is_sensible(&Conjunction::empty(), &constraints, &v));

        // OI-inconsistent atoms are insensible outright.
        let loops = Conjunction::from_atoms(vec![atom(&v, "on", &["X", "X"])]);
        assert!(!is_sensible(&loops, &constraints, &v));
    }

    #[test]
    fn matcher_images_are_injective_and_sound() {
        let (v, ..) = test_vocab();
        let pattern = conj(&v, &[("on", &["X", "Y"]), ("cl", &["Z"])]);
        let target = conj(
            &v,
            &[("on", &["a", "b"]), ("on", &["b", "c"]), ("cl", &["a"]), ("cl", &["b"])],
        );
        let ms = oi_matchers(&pattern, &target);
        assert!(!ms.is_empty());
        for theta in &ms {
            let image = apply_substitution(&pattern, theta, &v).unwrap();
            for a in image.atoms() {
                assert!(target.atoms().contains(a));
            }
            let imgs: Vec<&Term> = pattern
                .variables()
                .iter()
                .map(|var| theta.get(var).unwrap())
                .collect::<Vec<_>>();
            for i in 0..imgs.len() {
                for j in i + 1..imgs.len() {
                    assert_ne!(imgs[i], imgs[j]);
                }
            }
        }
    }
}
