//! Bounded model checking and inductive learning of relational pCTL
//! safety formulae over relational Markov decision processes.
//!
//! The crate is split along the pipeline:
//!
//! * [`logic`] — terms, atoms, conjunctions, substitutions, OI-subsumption
//!   matching, groundings, canonical forms and sensibility filtering.
//! * [`formula`] — the `P>=a Op<=k [phi]` formula type, its grammar and the
//!   syntactic refinement test used for pruning.
//! * [`rmdp`] — relational MDP models, the induced ground transition system,
//!   policies and policy-constrained views.
//! * [`modelcheck`] — bounded max-probability / fixed-policy probability
//!   queries, formula satisfaction and satisfaction sets.
//! * [`refine`] — the refinement operator (lengthen, unify, instantiate,
//!   globalize) with duplicate avoidance.
//! * [`learner`] — the inductive search for formulae consistent with
//!   positive/negative example sets, in policy-agnostic and policy-specific
//!   modes.
//! * [`domains`] — built-in blocks-world and chemical-warehouse models plus
//!   the labelled example generator.
//!
//! Everything in here is pure computation over immutable values; IO, file
//! formats and the command line front end live in the companion `pctl-cli`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod domains;
pub mod formula;
#[cfg(test)]
pub(crate) mod testkit;
pub mod learner;
pub mod logic;
pub mod modelcheck;
pub mod refine;
pub mod rmdp;

pub use formula::{Formula, PathOperator};
pub use logic::{Atom, Conjunction, Substitution, Term, Vocabulary};
pub use rmdp::{GroundState, Policy, RmdpModel};
