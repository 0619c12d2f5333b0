//! Site extraction: scenario nodes, then component tuples inside them, then
//! condition filtering.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{self, norm, Clause, TailKind};
use crate::knowledge::{
    spec_for, Adjacency, AttrConstraint, ComponentPattern, ConditionId, IdiomKind, IdiomSpec,
};
use crate::syntax::tokens::{tokenize, TokenClass, TokenIndex};
use crate::syntax::{
    parse_source, Attrs, CmpOp, Literal, Node, NodeKind, Role, SourceFile, Span, SyntaxError,
    UnaryOpKind,
};

/// A source file with its tree and token index.
pub struct ParsedFile {
    pub source: SourceFile,
    pub root: Node,
    pub tokens: TokenIndex,
}

impl ParsedFile {
    pub fn parse(source: SourceFile) -> Result<Self, SyntaxError> {
        let root = parse_source(&source.text)?;
        let tokens = TokenIndex::new(&source.text)?;
        Ok(ParsedFile { source, root, tokens })
    }

    pub fn text(&self) -> &str {
        &self.source.text
    }

    /// The node's span widened over enclosing grouping parentheses.
    pub fn outer(&self, node: &Node) -> Span {
        self.tokens.outer_span(node.span)
    }
}

/// Borrowed component tuple: nodes in pattern order, plus their scope.
#[derive(Debug, Clone)]
pub struct ComponentTuple<'a> {
    pub nodes: Vec<&'a Node>,
    pub scope: &'a Node,
}

/// One refactorable occurrence of an idiom's non-idiomatic form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchSite {
    pub idiom: IdiomKind,
    pub path: PathBuf,
    /// The scenario node, for idioms that have one.
    pub scenario: Option<Node>,
    /// Component nodes in pattern order.
    pub components: Vec<Node>,
    /// Statement rewritten around the component (the `open(...)` host
    /// statement for the with idiom).
    pub host: Option<Node>,
    pub site_id: String,
}

impl MatchSite {
    /// Region of the source the rewrite replaces.
    pub fn span(&self) -> Span {
        let mut span = self.components[0].span;
        for n in self.components.iter().chain(self.host.iter()) {
            span = span.cover(n.span);
        }
        span
    }
}

pub fn site_id(path: &std::path::Path, idiom: IdiomKind, spans: &[Span]) -> String {
    let mut h = Sha256::new();
    h.update(path.to_string_lossy().as_bytes());
    h.update([0]);
    h.update(idiom.name().as_bytes());
    for s in spans {
        h.update([0]);
        h.update(s.to_string().as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Scenario nodes for `spec`, in source order; the root when the idiom has
/// no scenario.
pub fn extract_scenarios<'a>(file: &'a ParsedFile, spec: &IdiomSpec) -> Vec<&'a Node> {
    let Some(pattern) = &spec.scenario else {
        return vec![&file.root];
    };
    let mut out = Vec::new();
    file.root.walk_with_ancestors(&mut |node, ancestors| {
        if node.kind != pattern.node_kind {
            return;
        }
        let ok = pattern.attr_constraints.iter().all(|c| match c {
            AttrConstraint::BoolOpIs(op) => matches!(node.attrs, Attrs::BoolOp { op: o } if o == *op),
            AttrConstraint::TestPosition => in_test_position(node, ancestors),
        });
        if ok {
            out.push(node);
        }
    });
    out
}

fn in_test_position(node: &Node, ancestors: &[&Node]) -> bool {
    let Some((parent, rest)) = ancestors.split_last() else {
        return false;
    };
    match (node.role, parent.kind) {
        (Role::Test, NodeKind::If | NodeKind::While | NodeKind::IfExp | NodeKind::Comprehension) => true,
        (Role::Operand, NodeKind::BoolOp) => in_test_position(parent, rest),
        (Role::Operand, NodeKind::UnaryOp) => analysis::is_unary(parent, UnaryOpKind::Not),
        _ => false,
    }
}

/// Component tuples inside `scope`. Runs are maximal; conditions are not
/// applied here.
pub fn extract_components<'a>(scope: &'a Node, spec: &IdiomSpec) -> Vec<ComponentTuple<'a>> {
    let tuple = |nodes: Vec<&'a Node>| ComponentTuple { nodes, scope };
    match &spec.component {
        ComponentPattern::SingleNode(kind) => {
            let nodes: Vec<&Node> = if spec.scenario.as_ref().is_some_and(|s| s.node_kind == *kind) {
                vec![scope]
            } else {
                scope.descendants().filter(|n| n.kind == *kind).collect()
            };
            nodes.into_iter().map(|n| tuple(vec![n])).collect()
        }
        ComponentPattern::NodePair {
            kind_a,
            kind_b,
            adjacency,
        } => match adjacency {
            Adjacency::BothWithinScenario => {
                let ops: Vec<&Node> = scope
                    .children_in(Role::Operand)
                    .filter(|n| n.kind == *kind_b)
                    .collect();
                let mut out = Vec::new();
                for i in 0..ops.len() {
                    for j in i + 1..ops.len() {
                        out.push(tuple(vec![ops[i], ops[j]]));
                    }
                }
                out
            }
            Adjacency::NextStatement => adjacent_pairs(scope)
                .filter(|(a, b)| kind_a.contains(&a.kind) && b.kind == *kind_b)
                .map(|(a, b)| tuple(vec![a, b]))
                .collect(),
            // The loop comes first in the tuple, its initializer second.
            Adjacency::PrecedingStatement => adjacent_pairs(scope)
                .filter(|(a, b)| kind_a.contains(&a.kind) && b.kind == *kind_b)
                .map(|(a, b)| tuple(vec![b, a]))
                .collect(),
        },
        ComponentPattern::ConsecutiveRun { kind, min_len } => {
            let suites: Vec<Vec<&Node>> = if scope.kind == NodeKind::Call {
                vec![scope.children_in(Role::Arg).collect()]
            } else {
                scope.suites()
            };
            let mut out = Vec::new();
            for suite in suites {
                let mut run: Vec<&Node> = Vec::new();
                for node in suite.into_iter().chain(std::iter::once(scope)) {
                    if node.kind == *kind && !std::ptr::eq(node, scope) {
                        run.push(node);
                    } else {
                        if run.len() >= *min_len {
                            out.push(tuple(std::mem::take(&mut run)));
                        }
                        run.clear();
                    }
                }
            }
            out.sort_by_key(|t| t.nodes[0].span.start);
            out
        }
    }
}

fn adjacent_pairs(scope: &Node) -> impl Iterator<Item = (&Node, &Node)> {
    let mut pairs = Vec::new();
    for suite in scope.suites() {
        for w in suite.windows(2) {
            pairs.push((w[0], w[1]));
        }
    }
    pairs.sort_by_key(|(a, _)| a.span.start);
    pairs.into_iter()
}

/// Evaluates one condition on a component tuple.
pub fn evaluate_condition(cond: ConditionId, tuple: &ComponentTuple<'_>, file: &ParsedFile) -> bool {
    use ConditionId::*;
    let src = file.text();
    let nodes = &tuple.nodes;
    match cond {
        HasAppendCall => has_method_call(nodes[0], "append"),
        HasAddCall => has_method_call(nodes[0], "add"),
        AppendTargetIsAssigned => {
            let Some(target) = assign_target(nodes[1]) else {
                return false;
            };
            let t = norm(target, src);
            nodes[0].descendants().any(|n| {
                ["append", "add"].iter().any(|m| {
                    analysis::method_call_one_arg(n, m).is_some_and(|(obj, _)| norm(obj, src) == t)
                })
            })
        }
        HasSubscriptAssign => subscript_stores(nodes[0]).next().is_some(),
        SubscriptValueIsAssigned => {
            let Some(target) = assign_target(nodes[1]) else {
                return false;
            };
            let t = norm(target, src);
            subscript_stores(nodes[0]).any(|sub| {
                sub.child(Role::Value).is_some_and(|v| norm(v, src) == t)
            })
        }
        InitializerIsEmptyCollection => initializer_flavor(nodes[1]).is_some(),
        LoopBodyReducible => comprehension_reducible(nodes[0], nodes[1], file),
        OperandsIntersect => {
            let a: BTreeSet<String> = nodes[0].operands().iter().map(|o| norm(o, src)).collect();
            nodes[1].operands().iter().any(|o| a.contains(&norm(o, src)))
        }
        ConjunctsAdjacent => {
            let ops = &tuple.scope.children;
            let pos = |n: &Node| ops.iter().position(|o| o.span == n.span);
            match (pos(nodes[0]), pos(nodes[1])) {
                (Some(i), Some(j)) => j == i + 1,
                _ => false,
            }
        }
        OpIsEqOrNotEq => {
            let ops = nodes[0].compare_ops();
            !ops.is_empty() && ops.iter().all(|o| matches!(o, CmpOp::Eq | CmpOp::NotEq))
        }
        OperandInEmptySet => nodes[0].operands().iter().any(|o| analysis::is_empty_literal(o)),
        SingleComparison => nodes[0].compare_ops().len() == 1,
        LoopHasBreak => !analysis::loop_breaks(nodes[0]).is_empty(),
        IfIsNextStatement => {
            nodes[1].kind == NodeKind::If && nodes[0].span.end <= nodes[1].span.start && !nodes[1].is_elif()
        }
        IfNegatesBreakGuard => if_negates_break_guard(nodes[0], nodes[1], src),
        SingleTargetAssigns => nodes.iter().all(|a| assign_target(a).is_some()),
        NoCrossDependency => no_cross_dependency(nodes, src),
        ValuesNotAllSame => {
            let values: BTreeSet<String> = nodes
                .iter()
                .filter_map(|a| a.child(Role::Value))
                .map(|v| norm(v, src))
                .collect();
            values.len() > 1
        }
        BodyHasSubscriptOfTarget => loop_body(nodes[0]).any(|n| n.kind == NodeKind::Subscript),
        SubscriptValueIsLoopVariable => {
            let Some(var) = loop_var(nodes[0]) else {
                return false;
            };
            subscripts_of(nodes[0], var).next().is_some()
        }
        ForIndicesNonNegativeLiterals => {
            let Some(var) = loop_var(nodes[0]) else {
                return false;
            };
            subscripts_of(nodes[0], var).all(|s| {
                matches!(
                    s.child(Role::Slice).and_then(|k| k.literal()),
                    Some(Literal::Int(Some(v))) if *v >= 0
                )
            })
        }
        LoopVariableOnlySubscripted => loop_variable_only_subscripted(nodes[0], file),
        SubscriptValuesSame => {
            let values: BTreeSet<String> = nodes
                .iter()
                .filter_map(|s| s.child(Role::Value))
                .map(|v| norm(v, src))
                .collect();
            values.len() == 1
        }
        StarIndicesValid => star_indices_valid(nodes, src),
        StarValueIsPure => nodes.iter().all(|s| !analysis::contains_call(s)),
        CalleeNameIsOpen => analysis::call_name(nodes[0]) == Some("open"),
        OpenResultConsumedInStatement => open_host(nodes[0], file).is_some(),
        IterNotAlreadyEnumerate => !nodes[0]
            .child(Role::Iter)
            .is_some_and(|it| analysis::call_name(it) == Some("enumerate")),
        IterIsRangeLen => range_len_object(nodes[0]).is_some(),
        IndexedElementRead => indexed_element_read(nodes[0], src),
        AssignValuesSame => {
            let values: BTreeSet<String> = nodes
                .iter()
                .filter_map(|a| a.child(Role::Value))
                .map(|v| norm(v, src))
                .collect();
            values.len() == 1
        }
        ValueIsImmutableLiteral => nodes
            .iter()
            .all(|a| a.child(Role::Value).is_some_and(analysis::is_immutable_literal)),
        BinOpIsModulo => matches!(
            nodes[0].attrs,
            Attrs::BinOp {
                op: crate::syntax::BinOpKind::Mod
            }
        ),
        LeftIsStringLiteral => nodes[0]
            .child(Role::Left)
            .is_some_and(|l| is_single_str_literal(l, src)),
    }
}

fn has_method_call(node: &Node, method: &str) -> bool {
    node.descendants().any(|n| analysis::method_call_one_arg(n, method).is_some())
}

/// Single target of a simple assignment when it is a name or attribute.
pub(crate) fn assign_target(assign: &Node) -> Option<&Node> {
    if assign.kind != NodeKind::Assign {
        return None;
    }
    let targets: Vec<&Node> = assign.children_in(Role::Target).collect();
    match targets.as_slice() {
        [t] if matches!(t.kind, NodeKind::Name | NodeKind::Attribute) => Some(t),
        _ => None,
    }
}

fn subscript_stores(for_node: &Node) -> impl Iterator<Item = &Node> {
    for_node
        .descendants()
        .filter(|n| n.kind == NodeKind::Assign)
        .filter_map(|a| {
            let targets: Vec<&Node> = a.children_in(Role::Target).collect();
            match targets.as_slice() {
                [t] if t.kind == NodeKind::Subscript => Some(*t),
                _ => None,
            }
        })
}

/// Which comprehension an initializer statement prepares for.
pub(crate) fn initializer_flavor(assign: &Node) -> Option<TailKind> {
    assign_target(assign)?;
    let value = assign.child(Role::Value)?;
    match value.kind {
        NodeKind::List if value.children.is_empty() => Some(TailKind::Append),
        NodeKind::Dict if value.children.is_empty() => Some(TailKind::Store),
        NodeKind::Call if value.children.len() == 1 => match analysis::call_name(value) {
            Some("list") => Some(TailKind::Append),
            Some("set") => Some(TailKind::Add),
            Some("dict") => Some(TailKind::Store),
            _ => None,
        },
        _ => None,
    }
}

fn comprehension_reducible(for_node: &Node, assign: &Node, file: &ParsedFile) -> bool {
    let src = file.text();
    let (Some(shape), Some(flavor), Some(target)) = (
        analysis::analyze_comprehension_loop(for_node),
        initializer_flavor(assign),
        assign_target(assign),
    ) else {
        return false;
    };
    if shape.tail.kind != flavor {
        return false;
    }
    let t = norm(target, src);
    if norm(shape.tail.object, src) != t {
        return false;
    }
    // The collection may only be touched by the final write.
    let touched_elsewhere = for_node.descendants().any(|n| {
        matches!(n.kind, NodeKind::Name | NodeKind::Attribute)
            && n.span != shape.tail.object.span
            && norm(n, src) == t
    });
    if touched_elsewhere {
        return false;
    }
    // Loop variables stop leaking once the loop becomes a comprehension.
    let scope = analysis::enclosing_scope(&file.root, for_node);
    for clause in &shape.clauses {
        if let Clause::For { target, .. } = clause {
            for name in analysis::bound_names(target) {
                if analysis::name_used_outside(scope, name, for_node) {
                    return false;
                }
            }
        }
    }
    true
}

pub(crate) fn if_negates_break_guard(loop_node: &Node, post: &Node, src: &str) -> bool {
    if !loop_node.orelse().is_empty() || !post.orelse().is_empty() {
        return false;
    }
    let breaks = analysis::loop_breaks(loop_node);
    if breaks.len() != 1 {
        return false;
    }
    let body = loop_node.body();
    let Some(guard) = body.last() else {
        return false;
    };
    let guard_body = guard.body();
    if guard.kind != NodeKind::If
        || !guard.orelse().is_empty()
        || guard_body.len() != 1
        || guard_body[0].span != breaks[0].span
    {
        return false;
    }
    match (guard.child(Role::Test), post.child(Role::Test)) {
        (Some(g), Some(p)) => analysis::is_negation(g, p, src),
        _ => false,
    }
}

pub(crate) fn no_cross_dependency(nodes: &[&Node], src: &str) -> bool {
    let mut written: BTreeSet<&str> = BTreeSet::new();
    let mut targets: BTreeSet<String> = BTreeSet::new();
    for a in nodes {
        let (Some(target), Some(value)) = (assign_target(a), a.child(Role::Value)) else {
            return false;
        };
        if analysis::names_in(value).iter().any(|n| written.contains(n)) {
            return false;
        }
        if !targets.insert(norm(target, src)) {
            return false;
        }
        if let Some(root) = analysis::root_name(target) {
            written.insert(root);
        }
    }
    true
}

fn loop_var(for_node: &Node) -> Option<&str> {
    if for_node.kind != NodeKind::For {
        return None;
    }
    for_node.child(Role::Target)?.name_id()
}

fn loop_body(for_node: &Node) -> impl Iterator<Item = &Node> {
    for_node
        .children
        .iter()
        .filter(|c| matches!(c.role, Role::Body | Role::OrElse))
        .flat_map(|c| c.descendants())
}

/// Load subscripts `var[...]` in the loop body and else clause.
fn subscripts_of<'a>(for_node: &'a Node, var: &'a str) -> impl Iterator<Item = &'a Node> {
    loop_body(for_node).filter(move |n| {
        n.kind == NodeKind::Subscript
            && n.child(Role::Value).is_some_and(|v| analysis::is_name(v, var))
    })
}

fn loop_variable_only_subscripted(for_node: &Node, file: &ParsedFile) -> bool {
    let Some(var) = loop_var(for_node) else {
        return false;
    };
    let subscript_values: BTreeSet<Span> = subscripts_of(for_node, var)
        .filter(|s| s.ctx() == Some(crate::syntax::Ctx::Load))
        .filter_map(|s| s.child(Role::Value).map(|v| v.span))
        .collect();
    let all_uses_subscripted = loop_body(for_node)
        .filter(|n| analysis::is_name(n, var))
        .all(|n| subscript_values.contains(&n.span));
    if !all_uses_subscripted {
        return false;
    }
    let scope = analysis::enclosing_scope(&file.root, for_node);
    !analysis::name_used_outside(scope, var, for_node)
}

fn star_indices_valid(nodes: &[&Node], src: &str) -> bool {
    let mut indices = Vec::new();
    for s in nodes {
        let Some(idx) = s.child(Role::Slice).and_then(|k| analysis::parse_index(k, src)) else {
            return false;
        };
        indices.push(idx);
    }
    let base = &indices[0].base;
    for w in indices.windows(2) {
        if w[1].base != *base || w[1].offset != w[0].offset + 1 {
            return false;
        }
        if base.is_none() && w[0].offset < 0 && w[1].offset >= 0 {
            return false;
        }
    }
    true
}

/// The statement an `open(...)` call can be wrapped around, when the
/// call's result is fully consumed inside it.
pub(crate) fn open_host<'a>(call: &Node, file: &'a ParsedFile) -> Option<&'a Node> {
    if analysis::call_name(call) != Some("open") {
        return None;
    }
    let path = file.root.path_to(call.span, NodeKind::Call);
    let host_pos = path.iter().rposition(|n| n.kind.is_statement() || n.kind == NodeKind::Other && n.role != Role::Root && is_statement_like(n))?;
    let host = path[host_pos];
    if !matches!(host.kind, NodeKind::Assign | NodeKind::AugAssign | NodeKind::Expr | NodeKind::Return) {
        return None;
    }
    // Direct storage, return or bare evaluation of the file object.
    if host.child(Role::Value).is_some_and(|v| v.span == call.span) {
        return None;
    }
    let chain = &path[host_pos..];
    for (i, node) in chain.iter().enumerate().skip(1) {
        let child = chain.get(i + 1);
        match node.kind {
            NodeKind::Lambda | NodeKind::GeneratorExp | NodeKind::IfExp => return None,
            NodeKind::BoolOp => {
                let first = node.children.first().map(|c| c.span);
                if child.map(|c| Some(c.span)) != Some(first) {
                    return None;
                }
            }
            NodeKind::ListComp | NodeKind::SetComp | NodeKind::DictComp => {
                let first_gen = node.children_in(Role::Generator).next();
                let next = child?;
                if first_gen.map(|g| g.span) != Some(next.span) {
                    return None;
                }
            }
            NodeKind::Comprehension => {
                if child.map(|c| c.role) != Some(Role::Iter) {
                    return None;
                }
            }
            NodeKind::Other if analysis::is_other(node, "NamedExpr") => return None,
            _ => {}
        }
    }
    if !alone_on_lines(host, file.text()) {
        return None;
    }
    Some(host)
}

fn is_statement_like(node: &Node) -> bool {
    matches!(
        node.attrs,
        Attrs::Other {
            label: "Delete"
                | "AnnAssign"
                | "TypeAlias"
                | "AsyncFor"
                | "AsyncWith"
                | "Match"
                | "Raise"
                | "Try"
                | "Assert"
                | "Import"
                | "ImportFrom"
                | "Global"
                | "Nonlocal"
                | "Pass"
        }
    )
}

/// Only whitespace before the statement on its first line and only
/// whitespace or a comment after it on its last line.
pub(crate) fn alone_on_lines(stmt: &Node, src: &str) -> bool {
    let line_start = src[..stmt.span.start].rfind('\n').map_or(0, |i| i + 1);
    if !src[line_start..stmt.span.start].trim().is_empty() {
        return false;
    }
    let rest = &src[stmt.span.end..];
    let line_rest = &rest[..rest.find('\n').unwrap_or(rest.len())];
    let trimmed = line_rest.trim_start();
    trimmed.is_empty() || trimmed.starts_with('#')
}

/// `X` of a loop over `range(len(X))` whose target is a plain name.
pub(crate) fn range_len_object(for_node: &Node) -> Option<&Node> {
    if for_node.kind != NodeKind::For || for_node.child(Role::Target)?.kind != NodeKind::Name {
        return None;
    }
    let iter = for_node.child(Role::Iter)?;
    if analysis::call_name(iter) != Some("range") || iter.children.len() != 2 {
        return None;
    }
    let len_call = analysis::call_args(iter).into_iter().next()?;
    if analysis::call_name(len_call) != Some("len") || len_call.children.len() != 2 {
        return None;
    }
    let x = analysis::call_args(len_call).into_iter().next()?;
    matches!(x.kind, NodeKind::Name | NodeKind::Attribute).then_some(x)
}

fn indexed_element_read(for_node: &Node, src: &str) -> bool {
    let (Some(x), Some(i)) = (range_len_object(for_node), loop_var(for_node)) else {
        return false;
    };
    let xn = norm(x, src);
    let is_x = |n: &Node| matches!(n.kind, NodeKind::Name | NodeKind::Attribute) && norm(n, src) == xn;
    let mut element_reads = 0;
    let mut x_in_subscript_load = BTreeSet::new();
    for n in loop_body(for_node) {
        if n.kind == NodeKind::Subscript && n.child(Role::Value).is_some_and(is_x) {
            if n.ctx() != Some(crate::syntax::Ctx::Load) {
                return false;
            }
            x_in_subscript_load.insert(n.child(Role::Value).unwrap().span);
            if n.child(Role::Slice).is_some_and(|k| analysis::is_name(k, i)) {
                element_reads += 1;
            }
        }
        if analysis::is_name(n, i) && n.ctx() != Some(crate::syntax::Ctx::Load) {
            return false;
        }
    }
    let x_only_indexed = loop_body(for_node)
        .filter(|n| is_x(n))
        .all(|n| x_in_subscript_load.contains(&n.span));
    element_reads > 0 && x_only_indexed
}

/// A lone (not implicitly concatenated) `str` literal.
pub(crate) fn is_single_str_literal(node: &Node, src: &str) -> bool {
    if !matches!(node.literal(), Some(Literal::Str(_))) {
        return false;
    }
    match tokenize(node.text(src)) {
        Ok(toks) => {
            toks.iter()
                .filter(|t| !matches!(t.class, TokenClass::Newline | TokenClass::NonLogicalNewline | TokenClass::EndOfFile))
                .count()
                == 1
        }
        Err(_) => false,
    }
}

/// Largest prefix-greedy segments of `run` that satisfy every condition,
/// each at least two long.
fn segment_run<'a>(tuple: &ComponentTuple<'a>, spec: &IdiomSpec, file: &ParsedFile) -> Vec<ComponentTuple<'a>> {
    let nodes = &tuple.nodes;
    let ok = |lo: usize, hi: usize| {
        let t = ComponentTuple {
            nodes: nodes[lo..hi].to_vec(),
            scope: tuple.scope,
        };
        spec.conditions.iter().all(|&c| evaluate_condition(c, &t, file))
    };
    let mut out = Vec::new();
    let mut lo = 0;
    while lo + 1 < nodes.len() {
        let mut hi = lo + 2;
        if !ok(lo, hi) {
            lo += 1;
            continue;
        }
        while hi < nodes.len() && ok(lo, hi + 1) {
            hi += 1;
        }
        out.push(ComponentTuple {
            nodes: nodes[lo..hi].to_vec(),
            scope: tuple.scope,
        });
        lo = hi;
    }
    out
}

/// All sites of the requested idioms, in source order.
pub fn find_sites(file: &ParsedFile, kinds: &[IdiomKind]) -> Vec<MatchSite> {
    let mut sites = Vec::new();
    let mut seen = BTreeSet::new();
    for kind in IdiomKind::ALL.into_iter().filter(|k| kinds.contains(k)) {
        let spec = spec_for(kind);
        for scope in extract_scenarios(file, &spec) {
            for tuple in extract_components(scope, &spec) {
                let accepted = if matches!(spec.component, ComponentPattern::ConsecutiveRun { .. }) {
                    segment_run(&tuple, &spec, file)
                } else if spec.conditions.iter().all(|&c| evaluate_condition(c, &tuple, file)) {
                    vec![tuple]
                } else {
                    Vec::new()
                };
                for t in accepted {
                    let site = make_site(file, kind, &spec, t);
                    if seen.insert(site.site_id.clone()) {
                        sites.push(site);
                    }
                }
            }
        }
    }
    sites.sort_by_key(|s| (s.span().start, s.idiom.index(), s.span().end));
    sites
}

fn make_site(file: &ParsedFile, kind: IdiomKind, spec: &IdiomSpec, t: ComponentTuple<'_>) -> MatchSite {
    let host = if kind == IdiomKind::With {
        open_host(t.nodes[0], file).cloned()
    } else {
        None
    };
    let spans: Vec<Span> = t.nodes.iter().map(|n| n.span).collect();
    MatchSite {
        idiom: kind,
        path: file.source.path.clone(),
        scenario: spec.scenario.as_ref().map(|_| t.scope.clone()),
        components: t.nodes.iter().map(|n| (*n).clone()).collect(),
        host,
        site_id: site_id(&file.source.path, kind, &spans),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parsed(src: &str) -> ParsedFile {
        ParsedFile::parse(SourceFile::new("t.py", src)).unwrap()
    }

    fn kinds_found(src: &str, kind: IdiomKind) -> usize {
        find_sites(&parsed(src), &[kind]).len()
    }

    #[test]
    fn chain_scenarios() {
        let f = parsed("x = a > b and a < 1\ny = a > b or a < 1\n");
        let spec = spec_for(IdiomKind::ChainComparison);
        let scen = extract_scenarios(&f, &spec);
        assert_eq!(scen.len(), 1);
        assert_eq!(scen[0].text(f.text()), "a > b and a < 1");
        let comps = extract_components(scen[0], &spec);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].nodes[0].text(f.text()), "a > b");
        assert_eq!(comps[0].nodes[1].text(f.text()), "a < 1");
        assert!(evaluate_condition(ConditionId::OperandsIntersect, &comps[0], &f));
    }

    #[test]
    fn no_scenario_means_root() {
        let f = parsed("new_cols = []\nfor col in old_cols:\n    new_cols.append(col + postfix)\n");
        let spec = spec_for(IdiomKind::ListComprehension);
        let scen = extract_scenarios(&f, &spec);
        assert_eq!(scen.len(), 1);
        assert_eq!(scen[0].kind, NodeKind::Module);
        let comps = extract_components(scen[0], &spec);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].nodes[0].kind, NodeKind::For);
        assert_eq!(comps[0].nodes[1].text(f.text()), "new_cols = []");
        assert_eq!(kinds_found(f.text(), IdiomKind::ListComprehension), 1);
    }

    #[test]
    fn three_adjacent_assigns_form_one_run() {
        let f = parsed("a = 1\nb = 2\nc = 3\n");
        let spec = spec_for(IdiomKind::AssignMultiTargets);
        let comps = extract_components(&f.root, &spec);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].nodes.len(), 3);
    }

    #[test]
    fn single_compare_is_not_chainable() {
        assert_eq!(kinds_found("if start is not None:\n    pass\n", IdiomKind::ChainComparison), 0);
    }

    #[test]
    fn set_comprehension_with_guards() {
        let src = "z2 = set()\nfor z in y:\n    if z is x:\n        continue\n    if z not in df:\n        continue\n    z2.add(z)\n";
        assert_eq!(kinds_found(src, IdiomKind::SetComprehension), 1);
        assert_eq!(kinds_found(src, IdiomKind::ListComprehension), 0);
    }

    #[test]
    fn loop_without_add_is_not_a_set_comprehension() {
        let src = "z2 = set()\nfor z in y:\n    d[z] = f(z)\n";
        let f = parsed(src);
        let spec = spec_for(IdiomKind::SetComprehension);
        let comps = extract_components(&f.root, &spec);
        assert!(!evaluate_condition(ConditionId::HasAddCall, &comps[0], &f));
        assert_eq!(kinds_found(src, IdiomKind::SetComprehension), 0);
    }

    #[test]
    fn star_indices() {
        assert_eq!(kinds_found("f(a[-1], a[0])\n", IdiomKind::StarInFuncCall), 0);
        assert_eq!(kinds_found("f(a[0], a[1])\n", IdiomKind::StarInFuncCall), 1);
        assert_eq!(kinds_found("f(a[-2], a[-1])\n", IdiomKind::StarInFuncCall), 1);
        assert_eq!(kinds_found("f(x, n[idx1], n[idx2])\n", IdiomKind::StarInFuncCall), 0);
        assert_eq!(kinds_found("f(g()[0], g()[1])\n", IdiomKind::StarInFuncCall), 0);
        assert_eq!(kinds_found("f(a[0], a[1], b[0], b[1])\n", IdiomKind::StarInFuncCall), 2);
    }

    #[test]
    fn truth_test_positions() {
        assert_eq!(kinds_found("if x % 2 == 0:\n    pass\n", IdiomKind::TruthTest), 1);
        assert_eq!(kinds_found("y = x == 0\n", IdiomKind::TruthTest), 0);
        assert_eq!(kinds_found("while a and not b != '':\n    pass\n", IdiomKind::TruthTest), 1);
        assert_eq!(kinds_found("z = [i for i in r if i == []]\n", IdiomKind::TruthTest), 1);
        assert_eq!(kinds_found("if x == 1:\n    pass\n", IdiomKind::TruthTest), 0);
    }

    #[test]
    fn loop_else_requires_negated_guard() {
        let ok = "while attempt < 3:\n    body = get()\n    if body is not None:\n        break\nif body is None:\n    fail()\n";
        assert_eq!(kinds_found(ok, IdiomKind::LoopElse), 1);
        let bad = ok.replace("if body is None", "if body is not None");
        assert_eq!(kinds_found(&bad, IdiomKind::LoopElse), 0);
    }

    #[test]
    fn assign_runs_split_by_dependency() {
        assert_eq!(kinds_found("a = 1\nb = a\n", IdiomKind::AssignMultiTargets), 0);
        let f = parsed("a = 1\nb = 2\nc = b\nd = 4\n");
        let sites = find_sites(&f, &[IdiomKind::AssignMultiTargets]);
        assert_eq!(sites.len(), 2);
        assert_eq!(sites[0].components.len(), 2);
        assert_eq!(kinds_found("a = None\nb = None\n", IdiomKind::AssignMultiTargets), 0);
        assert_eq!(kinds_found("a = None\nb = None\n", IdiomKind::ChainAssignSameValue), 1);
        assert_eq!(kinds_found("a = []\nb = []\n", IdiomKind::ChainAssignSameValue), 0);
    }

    #[test]
    fn with_hosts() {
        assert_eq!(kinds_found("b = [x.strip() for x in open(p)]\n", IdiomKind::With), 1);
        assert_eq!(kinds_found("fh = open(p)\n", IdiomKind::With), 0);
        assert_eq!(kinds_found("def f():\n    return open(p)\n", IdiomKind::With), 0);
        assert_eq!(kinds_found("with open(p) as g:\n    pass\n", IdiomKind::With), 0);
        assert_eq!(kinds_found("g = (x for x in open(p))\n", IdiomKind::With), 0);
        assert_eq!(kinds_found("d = json.load(open(p))\n", IdiomKind::With), 1);
        assert_eq!(kinds_found("b = [open(q) for q in ps]\n", IdiomKind::With), 0);
        assert_eq!(kinds_found("x = 1; d = json.load(open(p))\n", IdiomKind::With), 0);
    }

    #[test]
    fn enumerate_and_for_multi() {
        let src = "for i in range(len(text)):\n    w = text[i]\n    if w in token2id:\n        R[i] = token2id[w]\n";
        assert_eq!(kinds_found(src, IdiomKind::Enumerate), 1);
        assert_eq!(kinds_found("for i in range(len(xs)):\n    xs[i] = 0\n", IdiomKind::Enumerate), 0);
        assert_eq!(kinds_found("for i, x in enumerate(xs):\n    f(xs[i])\n", IdiomKind::Enumerate), 0);
        let fm = "for sample in family.samples:\n    if sample[0] > 2:\n        keep(sample[0])\n";
        assert_eq!(kinds_found(fm, IdiomKind::ForMultiTargets), 1);
        let used = "for sample in s:\n    if sample[0] > 2:\n        keep(sample)\n";
        assert_eq!(kinds_found(used, IdiomKind::ForMultiTargets), 0);
        let neg = "for sample in s:\n    keep(sample[-1])\n";
        assert_eq!(kinds_found(neg, IdiomKind::ForMultiTargets), 0);
    }

    #[test]
    fn fstring_left_operand() {
        assert_eq!(kinds_found("log.info('n is %s' % n)\n", IdiomKind::Fstring), 1);
        assert_eq!(kinds_found("y = a % 2\n", IdiomKind::Fstring), 0);
        assert_eq!(kinds_found("y = 'a' 'b %s' % n\n", IdiomKind::Fstring), 0);
        assert_eq!(kinds_found("y = b'%s' % n\n", IdiomKind::Fstring), 0);
    }

    #[test]
    fn site_ids_are_stable() {
        let src = "x = a > b and a < 1\n";
        let a = find_sites(&parsed(src), &IdiomKind::ALL);
        let b = find_sites(&parsed(src), &IdiomKind::ALL);
        assert_eq!(a, b);
        assert_eq!(a[0].site_id.len(), 16);
    }
}
