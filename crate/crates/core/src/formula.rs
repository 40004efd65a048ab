//! The learnable formula fragment `P>=a F<=k [phi]` / `P>=a G<=k [phi]`
//! with conjunctive state formulae, its textual grammar and the syntactic
//! subsumption test that powers pruning.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::logic::{
    oi_subsumes, Atom, Conjunction, LogicError, RelationKind, Term, Vocabulary,
};

/// The two step-bounded path operators of the fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathOperator {
    /// `F`: the state formula is satisfied within `k` steps.
    Finally,
    /// `G`: the state formula is satisfied for all of the first `k` steps.
    Globally,
}

impl PathOperator {
    pub fn letter(self) -> char {
        match self {
            PathOperator::Finally => 'F',
            PathOperator::Globally => 'G',
        }
    }
}

/// A lower-bound threshold formula `P>=alpha Op<=k [phi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub alpha: f64,
    pub k: u32,
    pub op: PathOperator,
    pub phi: Conjunction,
}

impl Formula {
    /// Validates the threshold range and that the state formula mentions
    /// state relations only.
    pub fn new(
        alpha: f64,
        k: u32,
        op: PathOperator,
        phi: Conjunction,
        vocab: &Vocabulary,
    ) -> Result<Self, FormulaError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(FormulaError::AlphaRange(alpha));
        }
        for a in phi.atoms() {
            let decl = vocab.relation(a.rel);
            if decl.kind == RelationKind::Action {
                return Err(FormulaError::ActionRelationInState(decl.name.clone()));
            }
        }
        Ok(Formula { alpha, k, op, phi })
    }
}

/// Number of atoms in the state formula.
pub fn formula_length(psi: &Formula) -> usize {
    psi.phi.len()
}

/// Errors from formula construction, parsing and refinement checks.
#[derive(Debug, Clone, PartialEq)]
pub enum FormulaError {
    Parse { pos: usize, message: String },
    AlphaRange(f64),
    ActionRelationInState(String),
    MismatchedParameters,
    Logic(LogicError),
}

impl fmt::Display for FormulaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaError::Parse { pos, message } => {
                write!(f, "parse error at byte {pos}: {message}")
            }
            FormulaError::AlphaRange(a) => write!(f, "threshold {a} outside [0,1]"),
            FormulaError::ActionRelationInState(r) => {
                write!(f, "action relation {r} cannot occur in a state formula")
            }
            FormulaError::MismatchedParameters => {
                write!(f, "formulae differ in threshold or step bound")
            }
            FormulaError::Logic(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for FormulaError {}

impl From<LogicError> for FormulaError {
    fn from(e: LogicError) -> Self {
        FormulaError::Logic(e)
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { text, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(|c: char| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> Result<(), FormulaError> {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{token}`")))
        }
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn error(&self, message: &str) -> FormulaError {
        FormulaError::Parse {
            pos: self.pos,
            message: message.to_owned(),
        }
    }

    fn ident(&mut self) -> Result<&'a str, FormulaError> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            _ => return Err(self.error("expected identifier")),
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        Ok(&self.text[start..self.pos])
    }

    fn number(&mut self) -> Result<&'a str, FormulaError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected number"));
        }
        if self.peek() == Some('.') {
            self.pos += 1;
            let frac = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == frac {
                return Err(self.error("expected digits after decimal point"));
            }
        }
        Ok(&self.text[start..self.pos])
    }

    fn term(&mut self) -> Result<Term, FormulaError> {
        let name = self.ident()?;
        let first = name.chars().next().expect("nonempty identifier");
        if first.is_ascii_uppercase() {
            Ok(Term::var(name))
        } else {
            Ok(Term::constant(name))
        }
    }

    fn atom(&mut self, vocab: &Vocabulary) -> Result<Atom, FormulaError> {
        let at = self.pos;
        let name = self.ident()?;
        let rel = vocab.rel_id(name).ok_or(FormulaError::Parse {
            pos: at,
            message: format!("unknown relation `{name}`"),
        })?;
        self.eat("(")?;
        self.skip_ws();
        let mut args = Vec::new();
        args.push(self.term()?);
        loop {
            self.skip_ws();
            if self.peek() == Some(',') {
                self.pos += 1;
                self.skip_ws();
                args.push(self.term()?);
            } else {
                break;
            }
        }
        self.eat(")")?;
        Ok(Atom::new(rel, args))
    }

    fn atom_sequence(&mut self, vocab: &Vocabulary) -> Result<Vec<Atom>, FormulaError> {
        let mut atoms = Vec::new();
        self.skip_ws();
        if self.peek().is_none() || self.peek() == Some(']') {
            return Ok(atoms);
        }
        atoms.push(self.atom(vocab)?);
        loop {
            self.skip_ws();
            if self.peek() == Some(',') {
                self.pos += 1;
                self.skip_ws();
                atoms.push(self.atom(vocab)?);
            } else {
                break;
            }
        }
        Ok(atoms)
    }
}

/// Parses a bracketed atom list `[a(...), b(...)]` into a conjunction.
pub fn parse_atom_list(text: &str, vocab: &Vocabulary) -> Result<Conjunction, FormulaError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    cur.eat("[")?;
    let atoms = cur.atom_sequence(vocab)?;
    cur.eat("]")?;
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err(cur.error("trailing input after `]`"));
    }
    Ok(Conjunction::new(atoms, vocab)?)
}

/// Parses a bare comma-separated atom sequence (no brackets).
pub fn parse_atoms(text: &str, vocab: &Vocabulary) -> Result<Vec<Atom>, FormulaError> {
    let mut cur = Cursor::new(text);
    let atoms = cur.atom_sequence(vocab)?;
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err(cur.error("trailing input after atoms"));
    }
    Ok(atoms)
}

/// Parses a single atom.
pub fn parse_single_atom(text: &str, vocab: &Vocabulary) -> Result<Atom, FormulaError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    let atom = cur.atom(vocab)?;
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err(cur.error("trailing input after atom"));
    }
    Ok(atom)
}

/// Parses `"P>=" FLOAT WS OP "<=" INT WS "[" atomlist "]"`.
///
/// Only lower-bound thresholds exist in the fragment; anything else is a
/// parse error.
pub fn parse_formula(text: &str, vocab: &Vocabulary) -> Result<Formula, FormulaError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    cur.eat("P>=")?;
    let alpha_text = cur.number()?;
    let alpha: f64 = alpha_text
        .parse()
        .map_err(|_| cur.error("invalid probability"))?;
    cur.skip_ws();
    let op = match cur.peek() {
        Some('F') => PathOperator::Finally,
        Some('G') => PathOperator::Globally,
        _ => return Err(cur.error("expected path operator F or G")),
    };
    cur.pos += 1;
    cur.eat("<=")?;
    let k_text = cur.number()?;
    let k: u32 = k_text.parse().map_err(|_| cur.error("invalid step bound"))?;
    cur.skip_ws();
    cur.eat("[")?;
    let atoms = cur.atom_sequence(vocab)?;
    cur.eat("]")?;
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err(cur.error("trailing input after formula"));
    }
    let phi = Conjunction::new(atoms, vocab)?;
    Formula::new(alpha, k, op, phi, vocab)
}

/// Renders a formula in the same grammar `parse_formula` accepts.
pub fn render_formula(psi: &Formula, vocab: &Vocabulary) -> String {
    let mut out = format!("P>={} {}<={} [", psi.alpha, psi.op.letter(), psi.k);
    for (i, a) in psi.phi.atoms().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&a.render(vocab));
    }
    out.push(']');
    out
}

/// Sufficient syntactic certificate that the child's satisfaction set is
/// contained in the parent's: either the operators agree and the child's
/// state formula is OI-subsumed by the parent's, or the child is the `G`
/// twin of an `F` parent over a subsumed state formula. A `false` result
/// proves nothing.
pub fn syntactic_refines(child: &Formula, parent: &Formula) -> Result<bool, FormulaError> {
    if child.alpha != parent.alpha || child.k != parent.k {
        return Err(FormulaError::MismatchedParameters);
    }
    let op_ok = child.op == parent.op
        || (child.op == PathOperator::Globally && parent.op == PathOperator::Finally);
    if !op_ok {
        return Ok(false);
    }
    Ok(oi_subsumes(&child.phi, &parent.phi))
}
