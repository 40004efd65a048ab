//! Line-oriented text formats.
//!
//! Domain files (`#` starts a comment anywhere):
//!
//! ```text
//! sorts: obj
//! constants: a:obj b:obj fl:obj
//! state_relations: cl(obj) on(obj,obj)
//! action_relations: move(obj,obj,obj)
//! static: bl
//! constraint forbidden: cl(X), on(Y,X)
//! rule move(A,B,fl): 0.9 : body cl(A), on(A,fl), cl(B) => head cl(A), on(A,B)
//! rule move(A,B,fl): 0.1 : body cl(A), on(A,fl), cl(B) => head cl(A), on(A,fl), cl(B)
//! init: cl(a), cl(b), on(a,fl), on(b,fl)
//! ```
//!
//! Rules with the same action atom and body (including variable naming)
//! form one outcome group. `init:` lines seed state enumeration.
//!
//! Example files hold one example per line: `+` or `-`, a space, then a
//! bracketed atom list. Policy files hold `when <atoms> do <action-atom>`
//! lines in priority order, optionally ending with `otherwise noop`. A
//! state file is a single bracketed atom list.

use std::collections::BTreeMap;
use std::fmt;

use pctl_core::formula::{parse_atom_list, parse_atoms, parse_single_atom};
use pctl_core::learner::ExampleSet;
use pctl_core::logic::{
    Conjunction, IntegrityConstraint, RelationKind, SortId, Vocabulary,
};
use pctl_core::rmdp::{
    ActionRuleGroup, GroundState, Policy, PolicyRule, RmdpModel, RuleOutcome,
};

/// A parse failure with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextError {
    pub line: usize,
    pub message: String,
}

impl TextError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        TextError {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for TextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for TextError {}

fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            None
        } else {
            Some((i + 1, body))
        }
    })
}

/// `name(sort, sort, ...)` or a bare `name` for arity zero.
fn parse_relation_decl(text: &str, line: usize) -> Result<(String, Vec<String>), TextError> {
    let text = text.trim();
    match text.split_once('(') {
        None => Ok((text.to_string(), Vec::new())),
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| TextError::new(line, format!("missing `)` in `{text}`")))?;
            let sorts = inner
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            Ok((name.trim().to_string(), sorts))
        }
    }
}

/// Splits a declaration list on whitespace, keeping parenthesized groups
/// together (`cl(obj) on(obj,obj)`).
fn split_decls(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Parses a domain file into a model. Declarations may appear in any order
/// relative to one another; rules, constraints and init states are parsed
/// against the complete vocabulary.
pub fn parse_domain(text: &str) -> Result<RmdpModel, TextError> {
    struct RuleLine {
        line: usize,
        action: String,
        probability: f64,
        body: String,
        head: String,
    }
    let mut sorts: Vec<(usize, String)> = Vec::new();
    let mut constants: Vec<(usize, String, String)> = Vec::new();
    let mut state_rels: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut action_rels: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut statics: Vec<(usize, String)> = Vec::new();
    let mut constraint_lines: Vec<(usize, String)> = Vec::new();
    let mut rule_lines: Vec<RuleLine> = Vec::new();
    let mut init_lines: Vec<(usize, String)> = Vec::new();

    for (line, body) in meaningful_lines(text) {
        if let Some(rest) = body.strip_prefix("sorts:") {
            for s in rest.split([',', ' ', '\t']) {
                let s = s.trim();
                if !s.is_empty() {
                    sorts.push((line, s.to_string()));
                }
            }
        } else if let Some(rest) = body.strip_prefix("constants:") {
            for item in rest.split_whitespace() {
                let (name, sort) = item.split_once(':').ok_or_else(|| {
                    TextError::new(line, format!("constant `{item}` needs `name:sort`"))
                })?;
                constants.push((line, name.trim().to_string(), sort.trim().to_string()));
            }
        } else if let Some(rest) = body.strip_prefix("state_relations:") {
            for decl in split_decls(rest) {
                let (name, arg_sorts) = parse_relation_decl(&decl, line)?;
                state_rels.push((line, name, arg_sorts));
            }
        } else if let Some(rest) = body.strip_prefix("action_relations:") {
            for decl in split_decls(rest) {
                let (name, arg_sorts) = parse_relation_decl(&decl, line)?;
                action_rels.push((line, name, arg_sorts));
            }
        } else if let Some(rest) = body.strip_prefix("static:") {
            for name in rest.split_whitespace() {
                statics.push((line, name.to_string()));
            }
        } else if let Some(rest) = body.strip_prefix("constraint forbidden:") {
            constraint_lines.push((line, rest.trim().to_string()));
        } else if let Some(rest) = body.strip_prefix("rule ") {
            let (action, rest) = rest
                .split_once(':')
                .ok_or_else(|| TextError::new(line, "expected `rule <action>: <prob> : ...`"))?;
            let (prob, rest) = rest
                .split_once(':')
                .ok_or_else(|| TextError::new(line, "expected `<prob> : body ... => head ...`"))?;
            let probability: f64 = prob
                .trim()
                .parse()
                .map_err(|_| TextError::new(line, format!("bad probability `{}`", prob.trim())))?;
            let rest = rest.trim();
            let rest = rest
                .strip_prefix("body")
                .ok_or_else(|| TextError::new(line, "expected `body` after the probability"))?;
            let (body_text, head_text) = rest
                .split_once("=>")
                .ok_or_else(|| TextError::new(line, "expected `=>` between body and head"))?;
            let head_text = head_text
                .trim()
                .strip_prefix("head")
                .ok_or_else(|| TextError::new(line, "expected `head` after `=>`"))?;
            rule_lines.push(RuleLine {
                line,
                action: action.trim().to_string(),
                probability,
                body: body_text.trim().to_string(),
                head: head_text.trim().to_string(),
            });
        } else if let Some(rest) = body.strip_prefix("init:") {
            init_lines.push((line, rest.trim().to_string()));
        } else {
            return Err(TextError::new(line, format!("unrecognized line `{body}`")));
        }
    }

    let mut vocab = Vocabulary::new();
    for (line, s) in &sorts {
        vocab
            .add_sort(s)
            .map_err(|e| TextError::new(*line, e.to_string()))?;
    }
    let static_names: Vec<&str> = statics.iter().map(|(_, n)| n.as_str()).collect();
    let mut add_rel = |line: usize, name: &str, arg_sorts: &[String], kind: RelationKind| {
        let ids = arg_sorts
            .iter()
            .map(|s| {
                vocab
                    .sort_id(s)
                    .ok_or_else(|| TextError::new(line, format!("unknown sort `{s}`")))
            })
            .collect::<Result<Vec<SortId>, _>>()?;
        vocab
            .add_relation(name, &ids, kind, static_names.contains(&name))
            .map_err(|e| TextError::new(line, e.to_string()))
    };
    for (line, name, arg_sorts) in &state_rels {
        add_rel(*line, name, arg_sorts, RelationKind::State)?;
    }
    for (line, name, arg_sorts) in &action_rels {
        add_rel(*line, name, arg_sorts, RelationKind::Action)?;
    }
    for (line, name) in &statics {
        match vocab.rel_id(name) {
            Some(id) if vocab.relation(id).kind == RelationKind::State => {}
            Some(_) => {
                return Err(TextError::new(*line, format!("`{name}` is not a state relation")))
            }
            None => return Err(TextError::new(*line, format!("unknown relation `{name}`"))),
        }
    }
    for (line, name, sort) in &constants {
        let sid = vocab
            .sort_id(sort)
            .ok_or_else(|| TextError::new(*line, format!("unknown sort `{sort}`")))?;
        vocab
            .add_constant(name, sid)
            .map_err(|e| TextError::new(*line, e.to_string()))?;
    }

    let mut constraints = Vec::new();
    for (line, text) in &constraint_lines {
        let atoms = parse_atoms(text, &vocab).map_err(|e| TextError::new(*line, e.to_string()))?;
        let forbidden =
            Conjunction::new(atoms, &vocab).map_err(|e| TextError::new(*line, e.to_string()))?;
        constraints.push(IntegrityConstraint { forbidden });
    }

    // Outcome lines sharing an action atom and a body (including variable
    // naming) form one group, in file order.
    let mut groups: Vec<ActionRuleGroup> = Vec::new();
    let mut group_index: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in &rule_lines {
        let action = parse_single_atom(&r.action, &vocab)
            .map_err(|e| TextError::new(r.line, e.to_string()))?;
        let body_atoms =
            parse_atoms(&r.body, &vocab).map_err(|e| TextError::new(r.line, e.to_string()))?;
        let body = Conjunction::new(body_atoms, &vocab)
            .map_err(|e| TextError::new(r.line, e.to_string()))?;
        let head_atoms =
            parse_atoms(&r.head, &vocab).map_err(|e| TextError::new(r.line, e.to_string()))?;
        let head = Conjunction::new(head_atoms, &vocab)
            .map_err(|e| TextError::new(r.line, e.to_string()))?;
        let key = (action.render(&vocab), body.render(&vocab));
        let outcome = RuleOutcome {
            probability: r.probability,
            head,
        };
        match group_index.get(&key) {
            Some(&i) => groups[i].outcomes.push(outcome),
            None => {
                group_index.insert(key, groups.len());
                groups.push(ActionRuleGroup {
                    action,
                    body,
                    outcomes: vec![outcome],
                });
            }
        }
    }

    let mut init_states = Vec::new();
    for (line, text) in &init_lines {
        let atoms = parse_atoms(text, &vocab).map_err(|e| TextError::new(*line, e.to_string()))?;
        let conj =
            Conjunction::new(atoms, &vocab).map_err(|e| TextError::new(*line, e.to_string()))?;
        let state = GroundState::from_conjunction(&conj, &vocab)
            .map_err(|e| TextError::new(*line, e.to_string()))?;
        init_states.push(state);
    }

    Ok(RmdpModel {
        vocab,
        groups,
        constraints,
        init_states,
    })
}

fn render_atoms(atoms: &[pctl_core::logic::Atom], vocab: &Vocabulary) -> String {
    atoms
        .iter()
        .map(|a| a.render(vocab))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Emits a domain file that parses back to an equal model.
pub fn render_domain(model: &RmdpModel) -> String {
    let vocab = &model.vocab;
    let mut out = String::new();
    out.push_str("sorts: ");
    out.push_str(
        &vocab
            .sorts()
            .map(|(_, s)| s.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    out.push('\n');
    out.push_str("constants: ");
    out.push_str(
        &vocab
            .constants()
            .map(|(_, c)| format!("{}:{}", c.name, vocab.sort_name(c.sort)))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    let rel_decl = |decl: &pctl_core::logic::RelationDecl| {
        if decl.arg_sorts.is_empty() {
            decl.name.clone()
        } else {
            format!(
                "{}({})",
                decl.name,
                decl.arg_sorts
                    .iter()
                    .map(|s| vocab.sort_name(*s))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
    };
    out.push_str("state_relations: ");
    out.push_str(
        &vocab
            .state_relations()
            .map(|(_, d)| rel_decl(d))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    out.push_str("action_relations: ");
    out.push_str(
        &vocab
            .relations()
            .filter(|(_, d)| d.kind == RelationKind::Action)
            .map(|(_, d)| rel_decl(d))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    let statics: Vec<String> = vocab
        .relations()
        .filter(|(_, d)| d.is_static)
        .map(|(_, d)| d.name.clone())
        .collect();
    if !statics.is_empty() {
        out.push_str("static: ");
        out.push_str(&statics.join(" "));
        out.push('\n');
    }
    for c in &model.constraints {
        out.push_str("constraint forbidden: ");
        out.push_str(&render_atoms(c.forbidden.atoms(), vocab));
        out.push('\n');
    }
    for g in &model.groups {
        for o in &g.outcomes {
            out.push_str(&format!(
                "rule {}: {} : body {} => head {}\n",
                g.action.render(vocab),
                o.probability,
                render_atoms(g.body.atoms(), vocab),
                render_atoms(o.head.atoms(), vocab),
            ));
        }
    }
    for s in &model.init_states {
        out.push_str("init: ");
        let conj = s.to_conjunction(vocab);
        out.push_str(&render_atoms(conj.atoms(), vocab));
        out.push('\n');
    }
    out
}

/// Parses an examples file: `+ [atoms]` / `- [atoms]`, one per line.
pub fn parse_examples(text: &str, vocab: &Vocabulary) -> Result<ExampleSet, TextError> {
    let mut set = ExampleSet::default();
    for (line, body) in meaningful_lines(text) {
        let (sign, rest) = body
            .split_at_checked(1)
            .ok_or_else(|| TextError::new(line, "empty example line"))?;
        let conj =
            parse_atom_list(rest.trim(), vocab).map_err(|e| TextError::new(line, e.to_string()))?;
        match sign {
            "+" => set.positives.push(conj),
            "-" => set.negatives.push(conj),
            other => {
                return Err(TextError::new(
                    line,
                    format!("expected `+` or `-`, found `{other}`"),
                ))
            }
        }
    }
    Ok(set)
}

/// Emits an examples file that parses back to an equal set.
pub fn render_examples(set: &ExampleSet, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for e in &set.positives {
        out.push_str("+ ");
        out.push_str(&e.render(vocab));
        out.push('\n');
    }
    for e in &set.negatives {
        out.push_str("- ");
        out.push_str(&e.render(vocab));
        out.push('\n');
    }
    out
}

/// Parses a policy file: ordered `when <atoms> do <action-atom>` lines,
/// optionally ending with `otherwise noop` (the no-op is implicit anyway).
pub fn parse_policy(text: &str, vocab: &Vocabulary) -> Result<Policy, TextError> {
    let mut rules = Vec::new();
    for (line, body) in meaningful_lines(text) {
        if body == "otherwise noop" {
            continue;
        }
        let rest = body
            .strip_prefix("when ")
            .ok_or_else(|| TextError::new(line, "expected `when <atoms> do <action>`"))?;
        let (guard_text, action_text) = rest
            .rsplit_once(" do ")
            .ok_or_else(|| TextError::new(line, "expected ` do ` before the action"))?;
        let guard_atoms =
            parse_atoms(guard_text, vocab).map_err(|e| TextError::new(line, e.to_string()))?;
        let guard =
            Conjunction::new(guard_atoms, vocab).map_err(|e| TextError::new(line, e.to_string()))?;
        let action = parse_single_atom(action_text.trim(), vocab)
            .map_err(|e| TextError::new(line, e.to_string()))?;
        rules.push(PolicyRule { guard, action });
    }
    Ok(Policy { rules })
}

/// Parses a state file: one bracketed ground atom list.
pub fn parse_state(text: &str, vocab: &Vocabulary) -> Result<GroundState, TextError> {
    let stripped: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join(" ");
    let conj =
        parse_atom_list(stripped.trim(), vocab).map_err(|e| TextError::new(1, e.to_string()))?;
    GroundState::from_conjunction(&conj, vocab).map_err(|e| TextError::new(1, e.to_string()))
}

/// Renders a substitution for the check report, e.g. `{X<-a, Y<-b}`.
pub fn render_substitution(theta: &pctl_core::logic::Substitution) -> String {
    let parts: Vec<String> = theta
        .iter()
        .map(|(v, t)| format!("{v}<-{}", t.name()))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pctl_core::domains::{builtin_blocks_world, default_chemical_warehouse};
    use pctl_core::rmdp::{enumerate_states, validate_model};

    #[test]
    fn blocks_world_round_trips_through_text() {
        let model = builtin_blocks_world(2);
        let text = render_domain(&model);
        let parsed = parse_domain(&text).unwrap();
        assert!(validate_model(&parsed).is_valid());
        assert_eq!(render_domain(&parsed), text);
        assert_eq!(
            enumerate_states(&parsed, 1000).unwrap().len(),
            enumerate_states(&model, 1000).unwrap().len()
        );
    }

    #[test]
    fn warehouse_round_trips_through_text() {
        let model = default_chemical_warehouse().model;
        let text = render_domain(&model);
        let parsed = parse_domain(&text).unwrap();
        assert!(validate_model(&parsed).is_valid());
        assert_eq!(render_domain(&parsed), text);
    }

    #[test]
    fn examples_round_trip() {
        let model = builtin_blocks_world(2);
        let text = "+ [on(a,b), cl(a)]\n- [on(b,a)]\n# comment\n";
        let set = parse_examples(text, &model.vocab).unwrap();
        assert_eq!(set.positives.len(), 1);
        assert_eq!(set.negatives.len(), 1);
        let rendered = render_examples(&set, &model.vocab);
        assert_eq!(parse_examples(&rendered, &model.vocab).unwrap(), set);
    }

    #[test]
    fn policies_parse() {
        let model = builtin_blocks_world(2);
        let text = "when cl(A), cl(B), on(A,fl) do move(A,B,fl)\notherwise noop\n";
        let policy = parse_policy(text, &model.vocab).unwrap();
        assert_eq!(policy.rules.len(), 1);
        assert!(pctl_core::rmdp::validate_policy(&model, &policy).is_valid());
    }

    #[test]
    fn bad_lines_report_their_numbers() {
        let err = parse_domain("sorts: obj\nnonsense here\n").unwrap_err();
        assert_eq!(err.line, 2);
    }
}
