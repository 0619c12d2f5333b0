//! The built-in rule engine: one syntactic transform per idiom.

use std::collections::BTreeSet;

use crate::analysis::{self, Clause, TailKind};
use crate::knowledge::IdiomKind;
use crate::syntax::tokens::{identifiers, normalize, TokenClass, TokenIndex};
use crate::syntax::{
    parse_expression, parse_source, reindent_block, splice, Attrs, BinOpKind, CmpOp, Ctx, Edit, Literal, Node,
    NodeKind, Role, Span, UnaryOpKind,
};

use super::{chain_two_compares, Engine, EngineError, EngineInput, IdiomatizationOutcome, RuleContext};

type Rule = Result<String, String>;

/// Pure, offline engine. Every transform declines rather than guess.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeterministicEngine;

impl Engine for DeterministicEngine {
    fn name(&self) -> &'static str {
        "deterministic"
    }

    fn transform(&self, input: &EngineInput) -> Result<IdiomatizationOutcome, EngineError> {
        Ok(apply(input.idiom, &input.abstraction.abstract_code, &input.context))
    }
}

pub(crate) fn apply(idiom: IdiomKind, code: &str, ctx: &RuleContext) -> IdiomatizationOutcome {
    use IdiomKind::*;
    let result = match idiom {
        ListComprehension => comprehension(code, TailKind::Append),
        SetComprehension => comprehension(code, TailKind::Add),
        DictComprehension => comprehension(code, TailKind::Store),
        ChainComparison => return chain(code),
        TruthTest => truth_test(code),
        LoopElse => loop_else(code),
        AssignMultiTargets => assign_multi(code),
        ForMultiTargets => for_multi(code, ctx),
        StarInFuncCall => star(code),
        With => with(code, ctx),
        Enumerate => enumerate(code, ctx),
        ChainAssignSameValue => chain_assign(code),
        Fstring => fstring(code),
    };
    match result {
        Ok(code) => IdiomatizationOutcome::accepted(code),
        Err(reason) => IdiomatizationOutcome::declined(reason),
    }
}

/// Rewrites an initializer plus accumulation loop as a comprehension
/// assignment.
pub fn build_comprehension(loop_text: &str, init_text: &str, flavor: TailKind) -> IdiomatizationOutcome {
    match comprehension(&format!("{}\n{}", init_text.trim_end(), loop_text), flavor) {
        Ok(code) => IdiomatizationOutcome::accepted(code),
        Err(reason) => IdiomatizationOutcome::declined(reason),
    }
}

/// Parsed code plus its tokens, for parenthesis-aware slicing.
struct Code<'a> {
    text: &'a str,
    tokens: TokenIndex,
}

impl<'a> Code<'a> {
    fn new(text: &'a str) -> Result<Self, String> {
        let tokens = TokenIndex::new(text).map_err(|e| format!("cannot tokenize: {}", e.message))?;
        Ok(Code { text, tokens })
    }

    fn outer(&self, node: &Node) -> &'a str {
        self.tokens.outer_span(node.span).slice(self.text)
    }

    fn grouped(&self, node: &Node) -> bool {
        self.tokens.outer_span(node.span) != node.span || self.self_enclosed(node.span)
    }

    /// `(a, b)` whose own parentheses span the whole node.
    fn self_enclosed(&self, span: Span) -> bool {
        let toks = self.tokens.tokens();
        let Some(i) = toks.iter().position(|t| t.span.start == span.start) else {
            return false;
        };
        if toks[i].class != TokenClass::OpenParen {
            return false;
        }
        let mut depth = 0;
        for t in &toks[i..] {
            match t.class {
                TokenClass::OpenParen | TokenClass::OpenBracket => depth += 1,
                TokenClass::CloseParen | TokenClass::CloseBracket => {
                    depth -= 1;
                    if depth == 0 {
                        return t.span.end == span.end;
                    }
                }
                _ => {}
            }
        }
        false
    }

    /// Node text, parenthesized when `loose` says it would not survive
    /// being moved into a tighter position.
    fn wrap(&self, node: &Node, loose: fn(&Node) -> bool) -> String {
        let text = self.outer(node);
        if !self.grouped(node) && (loose(node) || (node.kind == NodeKind::Tuple && !node.children.is_empty())) {
            format!("({text})")
        } else {
            text.to_string()
        }
    }
}

fn parse_module(code: &str) -> Result<Node, String> {
    parse_source(code).map_err(|e| format!("does not parse: {}", e.message))
}

fn parse_expr(code: &str) -> Result<Node, String> {
    parse_expression(code).map_err(|e| format!("does not parse: {}", e.message))
}

fn is_assignment_expr(n: &Node) -> bool {
    analysis::is_other(n, "NamedExpr")
}

fn is_yield(n: &Node) -> bool {
    analysis::is_other(n, "Yield") || analysis::is_other(n, "YieldFrom")
}

/// Too loose for a comprehension `in` or `if` clause.
fn loose_in_clause(n: &Node) -> bool {
    matches!(n.kind, NodeKind::Lambda | NodeKind::IfExp) || is_assignment_expr(n) || is_yield(n)
}

/// Too loose for a comprehension element, a dict entry, or an f-string field.
fn loose_in_element(n: &Node) -> bool {
    n.kind == NodeKind::Lambda || is_assignment_expr(n) || is_yield(n)
}

/// Too loose for one item of a tuple display.
fn loose_in_tuple(n: &Node) -> bool {
    is_assignment_expr(n) || is_yield(n)
}

fn fresh(taken: &BTreeSet<String>, candidates: impl IntoIterator<Item = String>) -> Option<String> {
    candidates.into_iter().find(|c| !taken.contains(c))
}

fn taken_names(code: &str, ctx: &RuleContext) -> BTreeSet<String> {
    let mut taken = identifiers(code);
    taken.extend(ctx.reserved.iter().cloned());
    taken
}

fn comprehension(code: &str, flavor: TailKind) -> Rule {
    let root = parse_module(code)?;
    let [init, loop_node] = root.children.as_slice() else {
        return Err("expected an initializer followed by a loop".into());
    };
    if init.kind != NodeKind::Assign || loop_node.kind != NodeKind::For {
        return Err("expected an initializer followed by a for loop".into());
    }
    let c = Code::new(code)?;
    let targets: Vec<&Node> = init.children_in(Role::Target).collect();
    let [target] = targets.as_slice() else {
        return Err("initializer has several targets".into());
    };
    if crate::extract::initializer_flavor(init) != Some(flavor) {
        return Err("initializer is not an empty collection of the right type".into());
    }
    let shape = analysis::analyze_comprehension_loop(loop_node)
        .ok_or("loop body does more than accumulate into one collection")?;
    if shape.tail.kind != flavor {
        return Err("loop accumulates with a different operation".into());
    }
    if normalize(shape.tail.object.text(code)) != normalize(target.text(code)) {
        return Err("loop accumulates into a different collection".into());
    }
    if shape.tail.value.kind == NodeKind::Starred || shape.tail.value.descendants().any(is_yield) {
        return Err("element cannot move into a comprehension".into());
    }
    let element = match (flavor, shape.tail.key) {
        (TailKind::Store, Some(key)) => {
            format!("{}: {}", c.wrap(key, loose_in_element), c.wrap(shape.tail.value, loose_in_element))
        }
        (TailKind::Store, None) => return Err("dict store without a key".into()),
        _ => c.wrap(shape.tail.value, loose_in_element),
    };
    let mut clauses = String::new();
    let mut guards: Vec<(String, bool)> = Vec::new();
    let flush = |guards: &mut Vec<(String, bool)>, out: &mut String| {
        if guards.is_empty() {
            return;
        }
        let several = guards.len() > 1;
        let parts: Vec<String> = guards
            .drain(..)
            .map(|(g, is_or)| if several && is_or { format!("({g})") } else { g })
            .collect();
        out.push_str(" if ");
        out.push_str(&parts.join(" and "));
    };
    for clause in &shape.clauses {
        match clause {
            Clause::For { target, iter } => {
                flush(&mut guards, &mut clauses);
                clauses.push_str(&format!(" for {} in {}", c.outer(target), c.wrap(iter, loose_in_clause)));
            }
            Clause::If { test, negated } => guards.push(guard(&c, test, *negated)),
        }
    }
    flush(&mut guards, &mut clauses);
    let (open, close) = match flavor {
        TailKind::Append => ("[", "]"),
        _ => ("{", "}"),
    };
    Ok(format!("{} = {open}{element}{clauses}{close}", c.outer(target)))
}

/// Guard text, and whether it is an unparenthesized `or`.
fn guard(c: &Code<'_>, test: &Node, negated: bool) -> (String, bool) {
    let is_or = |n: &Node| {
        matches!(n.attrs, Attrs::BoolOp { op: crate::syntax::BoolOpKind::Or }) && !c.grouped(n)
    };
    if !negated {
        return (c.wrap(test, loose_in_clause), is_or(test));
    }
    if let Some((l, op, r)) = analysis::simple_compare(test) {
        if matches!(op, CmpOp::Is | CmpOp::IsNot | CmpOp::In | CmpOp::NotIn | CmpOp::Eq | CmpOp::NotEq) {
            return (format!("{} {} {}", c.outer(l), op.negated().token(), c.outer(r)), false);
        }
    }
    if analysis::is_unary(test, UnaryOpKind::Not) && !c.grouped(test) {
        let inner = &test.children[0];
        return (c.wrap(inner, loose_in_clause), is_or(inner));
    }
    let text = if !c.grouped(test) && (test.kind == NodeKind::BoolOp || loose_in_clause(test)) {
        format!("not ({})", c.outer(test))
    } else {
        format!("not {}", c.outer(test))
    };
    (text, false)
}

fn chain(code: &str) -> IdiomatizationOutcome {
    let node = match parse_expr(code) {
        Ok(n) => n,
        Err(e) => return IdiomatizationOutcome::declined(e),
    };
    let compares: Vec<&Node> = node.children_in(Role::Operand).collect();
    let is_and = matches!(node.attrs, Attrs::BoolOp { op: crate::syntax::BoolOpKind::And });
    if !is_and || compares.len() != 2 || compares.iter().any(|n| n.kind != NodeKind::Compare) {
        return IdiomatizationOutcome::declined("expected two comparisons joined by `and`");
    }
    let Ok(c) = Code::new(code) else {
        return IdiomatizationOutcome::declined("cannot tokenize");
    };
    chain_two_compares(c.outer(compares[0]), c.outer(compares[1]))
}

fn truth_test(code: &str) -> Rule {
    let node = parse_expr(code)?;
    let (l, op, r) = analysis::simple_compare(&node).ok_or("expected a single comparison")?;
    let c = Code::new(code)?;
    let subject = if analysis::is_empty_literal(r) {
        l
    } else if analysis::is_empty_literal(l) {
        r
    } else {
        return Err("neither side is an empty or zero literal".into());
    };
    match op {
        CmpOp::Eq => Ok(format!("not {}", c.outer(subject))),
        CmpOp::NotEq => Ok(c.outer(subject).to_string()),
        _ => Err("only == and != compare against emptiness".into()),
    }
}

/// Byte offset of the `:` that ends a compound statement header whose
/// last header expression ends at `after`.
fn header_colon(c: &Code<'_>, after: usize) -> Option<Span> {
    c.tokens
        .tokens()
        .iter()
        .find(|t| t.span.start >= after && t.span.slice(c.text) == ":")
        .map(|t| t.span)
}

fn loop_else(code: &str) -> Rule {
    let root = parse_module(code)?;
    let [loop_node, post] = root.children.as_slice() else {
        return Err("expected a loop followed by an if statement".into());
    };
    if !loop_node.kind.is_loop() || post.kind != NodeKind::If {
        return Err("expected a loop followed by an if statement".into());
    }
    if !loop_node.orelse().is_empty() || !post.orelse().is_empty() {
        return Err("an else clause is already present".into());
    }
    if !crate::extract::if_negates_break_guard(loop_node, post, code) {
        return Err("the if statement does not test for the loop ending without break".into());
    }
    let c = Code::new(code)?;
    let test = post.child(Role::Test).ok_or("if without a test")?;
    let colon = header_colon(&c, c.tokens.outer_span(test.span).end).ok_or("if header without a colon")?;
    Ok(format!(
        "{}\nelse{}",
        loop_node.text(code),
        &code[colon.start..post.span.end]
    ))
}

fn single_assigns(root: &Node) -> Result<Vec<(&Node, &Node)>, String> {
    root.children
        .iter()
        .map(|s| {
            let targets: Vec<&Node> = s.children_in(Role::Target).collect();
            match (s.kind, targets.as_slice(), s.child(Role::Value)) {
                (NodeKind::Assign, [t], Some(v)) => Ok((*t, v)),
                _ => Err("expected single-target assignments".to_string()),
            }
        })
        .collect()
}

fn assign_multi(code: &str) -> Rule {
    let root = parse_module(code)?;
    let assigns = single_assigns(&root)?;
    if assigns.len() < 2 {
        return Err("need at least two assignments".into());
    }
    let stmts: Vec<&Node> = root.children.iter().collect();
    if !crate::extract::no_cross_dependency(&stmts, code) {
        return Err("a later value reads an earlier target".into());
    }
    let c = Code::new(code)?;
    let targets: Vec<&str> = assigns.iter().map(|(t, _)| c.outer(t)).collect();
    let values: Vec<String> = assigns.iter().map(|(_, v)| c.wrap(v, loose_in_tuple)).collect();
    Ok(format!("{} = {}", targets.join(", "), values.join(", ")))
}

fn chain_assign(code: &str) -> Rule {
    let root = parse_module(code)?;
    let assigns = single_assigns(&root)?;
    if assigns.len() < 2 {
        return Err("need at least two assignments".into());
    }
    let values: BTreeSet<String> = assigns.iter().map(|(_, v)| normalize(v.text(code))).collect();
    if values.len() != 1 {
        return Err("assigned values differ".into());
    }
    if !analysis::is_immutable_literal(assigns[0].1) {
        return Err("shared value is mutable".into());
    }
    let c = Code::new(code)?;
    let mut parts: Vec<&str> = assigns.iter().map(|(t, _)| c.outer(t)).collect();
    parts.push(c.outer(assigns[0].1));
    Ok(parts.join(" = "))
}

fn int_index(sub: &Node) -> Option<i64> {
    match sub.child(Role::Slice)?.literal() {
        Some(Literal::Int(Some(k))) => Some(*k),
        _ => None,
    }
}

fn for_multi(code: &str, ctx: &RuleContext) -> Rule {
    let root = parse_module(code)?;
    let [loop_node] = root.children.as_slice() else {
        return Err("expected one for statement".into());
    };
    let target = loop_node.child(Role::Target).filter(|_| loop_node.kind == NodeKind::For);
    let var = target.and_then(Node::name_id).ok_or("loop target is not a plain name")?;
    let scope: Vec<&Node> = loop_node
        .children
        .iter()
        .filter(|n| matches!(n.role, Role::Body | Role::OrElse))
        .flat_map(|n| n.descendants())
        .collect();
    let mut uses = Vec::new();
    let mut covered = BTreeSet::new();
    for n in &scope {
        if n.kind == NodeKind::Subscript && n.child(Role::Value).is_some_and(|v| analysis::is_name(v, var)) {
            match int_index(n) {
                Some(k) if k >= 0 && n.ctx() == Some(Ctx::Load) => {
                    uses.push((n.span, k));
                    covered.insert(n.child(Role::Value).unwrap().span);
                }
                _ => return Err("loop variable is indexed by something other than a literal".into()),
            }
        }
    }
    if uses.is_empty() {
        return Err("loop variable is never indexed".into());
    }
    if scope.iter().any(|n| analysis::is_name(n, var) && !covered.contains(&n.span)) {
        return Err("loop variable is used as a whole".into());
    }
    let max = uses.iter().map(|u| u.1).max().unwrap();
    let taken = taken_names(code, ctx);
    let base = ["e", "el", "elem", "item", "entry"]
        .into_iter()
        .find(|b| !taken.contains(*b) && (0..=max).all(|k| !taken.contains(&format!("{b}{k}"))))
        .ok_or("no fresh element names")?;
    let mut names: Vec<String> = (0..=max).map(|k| format!("{base}{k}")).collect();
    names.push(format!("*{base}"));
    let mut edits = vec![Edit::new(target.unwrap().span, names.join(", "))];
    edits.extend(uses.iter().map(|(span, k)| Edit::new(*span, format!("{base}{k}"))));
    splice(code, &edits).map_err(|e| e.to_string())
}

fn offset_text(base: &Option<String>, k: i64) -> String {
    match base {
        None => k.to_string(),
        Some(b) if k == 0 => b.clone(),
        Some(b) if k > 0 => format!("{b} + {k}"),
        Some(b) => format!("{b} - {}", -k),
    }
}

/// Whether `base + k` keeps `base` as one operand.
fn tight_base(base: &str) -> bool {
    let Ok(node) = parse_expression(base) else {
        return false;
    };
    match node.kind {
        NodeKind::Name | NodeKind::Attribute | NodeKind::Subscript | NodeKind::Call | NodeKind::Constant => true,
        NodeKind::UnaryOp => true,
        NodeKind::BinOp => matches!(
            node.attrs,
            Attrs::BinOp {
                op: BinOpKind::Add
                    | BinOpKind::Sub
                    | BinOpKind::Mult
                    | BinOpKind::MatMult
                    | BinOpKind::Div
                    | BinOpKind::FloorDiv
                    | BinOpKind::Mod
                    | BinOpKind::Pow
            }
        ),
        _ => false,
    }
}

fn star(code: &str) -> Rule {
    let node = parse_expr(code)?;
    let subs: Vec<&Node> = if node.kind == NodeKind::Tuple { node.children.iter().collect() } else { vec![&node] };
    if subs.len() < 2 || subs.iter().any(|s| s.kind != NodeKind::Subscript) {
        return Err("expected consecutive subscripts".into());
    }
    let c = Code::new(code)?;
    let value = subs[0].child(Role::Value).ok_or("subscript without a value")?;
    let value_norm = normalize(value.text(code));
    let mut indices = Vec::new();
    for s in &subs {
        if s.child(Role::Value).map(|v| normalize(v.text(code))) != Some(value_norm.clone()) {
            return Err("subscripted values differ".into());
        }
        let slice = s.child(Role::Slice).ok_or("subscript without an index")?;
        indices.push(analysis::parse_index(slice, code).ok_or("index is a slice")?);
    }
    let mut base = indices[0].base.clone();
    for w in indices.windows(2) {
        if w[1].base != w[0].base || w[1].offset != w[0].offset + 1 {
            return Err("indices are not consecutive".into());
        }
    }
    let first = indices[0].offset;
    let last = indices.last().unwrap().offset;
    if base.is_none() && first < 0 && last >= 0 {
        return Err("indices wrap around the end of the sequence".into());
    }
    if let Some(b) = &base {
        if !tight_base(b) {
            base = Some(format!("({b})"));
        }
    }
    let (start, end) = match base {
        None => (
            if first == 0 { String::new() } else { first.to_string() },
            if last + 1 == 0 { String::new() } else { (last + 1).to_string() },
        ),
        Some(_) => (offset_text(&base, first), offset_text(&base, last + 1)),
    };
    Ok(format!("*{}[{start}:{end}]", c.outer(value)))
}

fn with(code: &str, ctx: &RuleContext) -> Rule {
    let root = parse_module(code)?;
    let [host] = root.children.as_slice() else {
        return Err("expected one statement".into());
    };
    let call = match ctx.focus {
        Some(span) => root.find(span, NodeKind::Call).ok_or("focus is not a call")?,
        None => {
            let opens: Vec<&Node> = host.descendants().filter(|n| analysis::call_name(n) == Some("open")).collect();
            match opens.as_slice() {
                [one] => *one,
                _ => return Err("expected exactly one open() call".into()),
            }
        }
    };
    if analysis::call_name(call) != Some("open") {
        return Err("focus is not an open() call".into());
    }
    if host.child(Role::Value).is_some_and(|v| v.span == call.span) {
        return Err("the file object itself is stored or returned".into());
    }
    let taken = taken_names(code, ctx);
    let name = fresh(&taken, std::iter::once("f".to_string()).chain((2..).map(|k| format!("f{k}")).take(1000)))
        .ok_or("no fresh file name")?;
    let body = splice(host.text(code), &[Edit::new(Span::new(call.span.start - host.span.start, call.span.end - host.span.start), name.clone())])
        .map_err(|e| e.to_string())?;
    let unit = if ctx.indent_unit.is_empty() { "    " } else { ctx.indent_unit.as_str() };
    Ok(format!(
        "with {} as {name}:\n{unit}{}",
        call.text(code),
        reindent_block(&body, unit)
    ))
}

fn enumerate(code: &str, ctx: &RuleContext) -> Rule {
    let root = parse_module(code)?;
    let [loop_node] = root.children.as_slice() else {
        return Err("expected one for statement".into());
    };
    if loop_node.kind != NodeKind::For {
        return Err("expected a for statement".into());
    }
    let target = loop_node.child(Role::Target).ok_or("for without a target")?;
    let index = target.name_id().ok_or("loop target is not a plain name")?;
    let iter = loop_node.child(Role::Iter).ok_or("for without an iterable")?;
    let len_call = (analysis::call_name(iter) == Some("range") && iter.children.len() == 2)
        .then(|| analysis::call_args(iter).into_iter().next())
        .flatten()
        .filter(|n| analysis::call_name(n) == Some("len") && n.children.len() == 2)
        .ok_or("iterable is not range(len(...))")?;
    let seq = analysis::call_args(len_call)[0];
    let c = Code::new(code)?;
    let seq_norm = normalize(seq.text(code));
    let body = loop_node.body();
    let reads: Vec<&Node> = body
        .iter()
        .flat_map(|s| s.descendants())
        .filter(|n| {
            n.kind == NodeKind::Subscript
                && n.ctx() == Some(Ctx::Load)
                && n.child(Role::Value).is_some_and(|v| normalize(v.text(code)) == seq_norm)
                && n.child(Role::Slice).is_some_and(|k| analysis::is_name(k, index))
        })
        .collect();
    if reads.is_empty() {
        return Err("the element is never read".into());
    }
    let mut edits = Vec::new();
    let first = body[0];
    let binding = single_assigns_one(first)
        .filter(|(t, v)| t.kind == NodeKind::Name && reads.iter().any(|r| r.span == v.span))
        .map(|(t, _)| t.name_id().unwrap().to_string());
    let rebound = |w: &str| {
        body.iter()
            .flat_map(|s| s.descendants())
            .any(|n| analysis::is_name(n, w) && n.ctx() != Some(Ctx::Load) && !std::ptr::eq(n, first.children.first().unwrap()))
    };
    let element = match binding {
        Some(w) if body.len() > 1 && !rebound(&w) && w != index && alone_on_line(code, first.span) => {
            edits.push(Edit::new(full_lines(code, first.span), String::new()));
            for r in reads.iter().filter(|r| !first.span.contains(r.span)) {
                edits.push(Edit::new(r.span, w.clone()));
            }
            w
        }
        _ => {
            let taken = taken_names(code, ctx);
            let name = fresh(&taken, ["item", "elem", "element", "value"].map(String::from)).ok_or("no fresh element name")?;
            for r in &reads {
                edits.push(Edit::new(r.span, name.clone()));
            }
            name
        }
    };
    edits.push(Edit::new(target.span, format!("({index}, {element})")));
    edits.push(Edit::new(iter.span, format!("enumerate({})", c.outer(seq))));
    splice(code, &edits).map_err(|e| e.to_string())
}

fn single_assigns_one(stmt: &Node) -> Option<(&Node, &Node)> {
    let targets: Vec<&Node> = stmt.children_in(Role::Target).collect();
    match (stmt.kind, targets.as_slice(), stmt.child(Role::Value)) {
        (NodeKind::Assign, [t], Some(v)) => Some((*t, v)),
        _ => None,
    }
}

fn alone_on_line(code: &str, span: Span) -> bool {
    let start = code[..span.start].rfind('\n').map_or(0, |i| i + 1);
    let rest = &code[span.end..];
    let tail = &rest[..rest.find('\n').unwrap_or(rest.len())];
    code[start..span.start].trim().is_empty() && (tail.trim().is_empty() || tail.trim_start().starts_with('#'))
}

/// The lines a statement occupies, including the final line break.
fn full_lines(code: &str, span: Span) -> Span {
    let start = code[..span.start].rfind('\n').map_or(0, |i| i + 1);
    let end = code[span.end..].find('\n').map_or(code.len(), |i| span.end + i + 1);
    Span::new(start, end)
}

/// Supported `%` conversions and their f-string field forms.
fn field(conversion: char, expr: &str) -> Option<String> {
    match conversion {
        's' => Some(format!("{{{expr}}}")),
        'r' => Some(format!("{{{expr}!r}}")),
        'd' => Some(format!("{{{expr}:d}}")),
        'f' => Some(format!("{{{expr}:f}}")),
        _ => None,
    }
}

fn fstring(code: &str) -> Rule {
    let node = parse_expr(code)?;
    if !matches!(node.attrs, Attrs::BinOp { op: BinOpKind::Mod }) {
        return Err("expected a % formatting expression".into());
    }
    let left = node.child(Role::Left).ok_or("missing format string")?;
    let right = node.child(Role::Right).ok_or("missing format arguments")?;
    if !matches!(left.literal(), Some(Literal::Str(_))) {
        return Err("left operand is not a string literal".into());
    }
    let c = Code::new(code)?;
    let lit = left.text(code);
    let prefix_len = lit.find(['\'', '"']).ok_or("string literal without quotes")?;
    let prefix = lit[..prefix_len].to_ascii_lowercase();
    if prefix.contains(['b', 'f']) || c.tokens.tokens().iter().filter(|t| left.span.contains(t.span)).count() != 1 {
        return Err("not a single plain string literal".into());
    }
    let raw = prefix.contains('r');
    let rest = &lit[prefix_len..];
    let quote = if rest.starts_with("'''") || rest.starts_with("\"\"\"") { &rest[..3] } else { &rest[..1] };
    let interior = &rest[quote.len()..rest.len() - quote.len()];
    if interior.contains("\\N{") {
        return Err("named unicode escapes clash with field braces".into());
    }
    let values: Vec<&Node> = match right.kind {
        NodeKind::Tuple => right.children.iter().collect(),
        NodeKind::Dict => return Err("mapping-style formatting".into()),
        _ => vec![right],
    };
    let quote_char = quote.chars().next().unwrap();
    let mut fields = Vec::new();
    for v in &values {
        if v.kind == NodeKind::Starred {
            return Err("starred format argument".into());
        }
        let text = c.wrap(v, loose_in_element);
        if text.contains(quote_char) || text.contains('\\') || text.contains('\n') || text.contains('#') {
            return Err("argument cannot be embedded in the literal".into());
        }
        fields.push(if text.starts_with('{') { format!(" {text}") } else { text });
    }
    let mut out = String::new();
    let mut next = fields.iter();
    let mut chars = interior.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '%' => {
                let conv = chars.next().ok_or("dangling %")?;
                let expr = next.next().ok_or("fewer arguments than conversions")?;
                out.push_str(&field(conv, expr).ok_or_else(|| format!("unsupported conversion %{conv}"))?);
            }
            '{' => out.push_str("{{"),
            '}' => out.push_str("}}"),
            _ => out.push(ch),
        }
    }
    if next.next().is_some() {
        return Err("more arguments than conversions".into());
    }
    let prefix = if raw { "rf" } else { "f" };
    Ok(format!("{prefix}{quote}{out}{quote}"))
}
