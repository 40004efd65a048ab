//! Tiny hand-rolled models shared by unit tests.

use alloc::vec;

use crate::logic::{Atom, Conjunction, RelationKind, Term, Vocabulary};
use crate::rmdp::{ActionRuleGroup, GroundState, RmdpModel, RuleOutcome};

/// A two-state coin: `flip` moves `up(x)` to the absorbing `down(x)` half
/// of the time. The only action everywhere, so constraining to the
/// always-flip policy changes nothing.
pub(crate) fn coin_model() -> RmdpModel {
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
    let group = ActionRuleGroup {
        action: Atom::new(flip, vec![Term::var("A")]),
        body: body.clone(),
        outcomes: vec![
            RuleOutcome {
                probability: 0.5,
                head: Conjunction::new(vec![Atom::new(down, vec![Term::var("A")])], &v).unwrap(),
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
