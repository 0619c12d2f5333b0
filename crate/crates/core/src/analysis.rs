//! Structural queries over [`Node`] trees shared by extraction and the
//! deterministic idiomatization rules.

use std::collections::BTreeSet;

use crate::syntax::tokens::normalize;
use crate::syntax::{Attrs, CmpOp, Literal, Node, NodeKind, Role, UnaryOpKind};

/// Token-normalized text of a node.
pub fn norm(node: &Node, src: &str) -> String {
    normalize(node.text(src))
}

pub fn is_name(node: &Node, id: &str) -> bool {
    node.name_id() == Some(id)
}

pub fn is_unary(node: &Node, op: UnaryOpKind) -> bool {
    matches!(node.attrs, Attrs::UnaryOp { op: o } if o == op)
}

/// `func_name(args...)` with a plain-name callee.
pub fn call_name(node: &Node) -> Option<&str> {
    if node.kind != NodeKind::Call {
        return None;
    }
    node.child(Role::Func)?.name_id()
}

pub fn call_args(node: &Node) -> Vec<&Node> {
    node.children_in(Role::Arg).collect()
}

pub fn call_keywords(node: &Node) -> Vec<&Node> {
    node.children_in(Role::Keyword).collect()
}

/// `obj.method(arg)` with exactly one positional, non-starred argument.
pub fn method_call_one_arg<'a>(node: &'a Node, method: &str) -> Option<(&'a Node, &'a Node)> {
    if node.kind != NodeKind::Call || !call_keywords(node).is_empty() {
        return None;
    }
    let func = node.child(Role::Func)?;
    match &func.attrs {
        Attrs::Attribute { attr, .. } if attr == method => {}
        _ => return None,
    }
    let args = call_args(node);
    if args.len() != 1 || args[0].kind == NodeKind::Starred {
        return None;
    }
    Some((func.child(Role::Value)?, args[0]))
}

/// Python's falsy literal constants: `0`, `0.0`, `''`, `b''`, `[]`, `{}`,
/// `()`, `False`.
pub fn is_empty_literal(node: &Node) -> bool {
    match node.kind {
        NodeKind::Constant => matches!(
            node.literal(),
            Some(Literal::Int(Some(0))) | Some(Literal::Bool(false))
        ) || matches!(node.literal(), Some(Literal::Float(f)) if *f == 0.0)
            || matches!(node.literal(), Some(Literal::Str(s)) if s.is_empty())
            || matches!(node.literal(), Some(Literal::Bytes(b)) if b.is_empty()),
        NodeKind::List | NodeKind::Tuple => node.children.is_empty(),
        NodeKind::Dict => node.children.is_empty(),
        _ => false,
    }
}

/// `None`, booleans, numbers (optionally negated), strings and bytes.
pub fn is_immutable_literal(node: &Node) -> bool {
    match node.kind {
        NodeKind::Constant => !matches!(node.literal(), Some(Literal::Tuple)),
        NodeKind::UnaryOp if is_unary(node, UnaryOpKind::USub) || is_unary(node, UnaryOpKind::UAdd) => {
            node.children.len() == 1
                && matches!(
                    node.children[0].literal(),
                    Some(Literal::Int(_)) | Some(Literal::Float(_)) | Some(Literal::Complex)
                )
        }
        _ => false,
    }
}

/// Break statements that exit `loop_node` itself, not a nested loop.
pub fn loop_breaks(loop_node: &Node) -> Vec<&Node> {
    fn scan<'a>(node: &'a Node, out: &mut Vec<&'a Node>) {
        match node.kind {
            NodeKind::Break => out.push(node),
            NodeKind::FunctionDef | NodeKind::ClassDef | NodeKind::Lambda => {}
            NodeKind::For | NodeKind::While => {
                node.children_in(Role::OrElse).for_each(|c| scan(c, out));
            }
            _ if is_other(node, "AsyncFor") => {
                node.children_in(Role::OrElse).for_each(|c| scan(c, out));
            }
            _ => node.children.iter().for_each(|c| scan(c, out)),
        }
    }
    let mut out = Vec::new();
    for stmt in loop_node.children_in(Role::Body) {
        scan(stmt, &mut out);
    }
    out
}

pub fn is_other(node: &Node, label: &str) -> bool {
    matches!(node.attrs, Attrs::Other { label: l } if l == label)
}

/// A single-operator comparison's parts.
pub fn simple_compare(node: &Node) -> Option<(&Node, CmpOp, &Node)> {
    if node.kind != NodeKind::Compare {
        return None;
    }
    let ops = node.compare_ops();
    let operands = node.operands();
    if ops.len() != 1 || operands.len() != 2 {
        return None;
    }
    Some((operands[0], ops[0], operands[1]))
}

/// True when `b` is the syntactic negation of `a`: flipped single
/// comparison operator over the same operands, or `not E` against `E`.
pub fn is_negation(a: &Node, b: &Node, src: &str) -> bool {
    if let (Some((al, aop, ar)), Some((bl, bop, br))) = (simple_compare(a), simple_compare(b)) {
        return aop.negated() == bop && norm(al, src) == norm(bl, src) && norm(ar, src) == norm(br, src);
    }
    let inner = |n: &Node| -> Option<String> {
        if is_unary(n, UnaryOpKind::Not) {
            n.children.first().map(|c| norm(c, src))
        } else {
            None
        }
    };
    if let Some(x) = inner(a) {
        return x == norm(b, src);
    }
    if let Some(x) = inner(b) {
        return x == norm(a, src);
    }
    false
}

/// Does a statement suite consist of exactly one `continue`?
pub fn is_continue_guard(stmt: &Node) -> bool {
    stmt.kind == NodeKind::If && stmt.orelse().is_empty() && {
        let body = stmt.body();
        body.len() == 1 && body[0].kind == NodeKind::Continue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    Append,
    Add,
    Store,
}

/// The single write a comprehension-shaped loop performs.
#[derive(Debug, Clone, Copy)]
pub struct Tail<'a> {
    pub kind: TailKind,
    pub stmt: &'a Node,
    /// The collection written to.
    pub object: &'a Node,
    /// Appended/added element, or the stored value.
    pub value: &'a Node,
    /// Subscript key for [`TailKind::Store`].
    pub key: Option<&'a Node>,
}

#[derive(Debug, Clone, Copy)]
pub enum Clause<'a> {
    For { target: &'a Node, iter: &'a Node },
    /// Condition that must hold; `negated` marks a `continue` guard whose
    /// test must be negated.
    If { test: &'a Node, negated: bool },
}

#[derive(Debug, Clone)]
pub struct CompLoop<'a> {
    pub clauses: Vec<Clause<'a>>,
    pub tail: Tail<'a>,
}

/// Recognizes `for T in I:` bodies made of `if C: continue` guards followed
/// by one tail: an `append`/`add` call, a subscript store, or a nested
/// `if`/`for` whose body has the same shape.
pub fn analyze_comprehension_loop(for_node: &Node) -> Option<CompLoop<'_>> {
    if for_node.kind != NodeKind::For || !for_node.orelse().is_empty() {
        return None;
    }
    let mut clauses = vec![Clause::For {
        target: for_node.child(Role::Target)?,
        iter: for_node.child(Role::Iter)?,
    }];
    let tail = body_shape(&for_node.body(), &mut clauses)?;
    Some(CompLoop { clauses, tail })
}

fn body_shape<'a>(stmts: &[&'a Node], clauses: &mut Vec<Clause<'a>>) -> Option<Tail<'a>> {
    let (last, guards) = stmts.split_last()?;
    for g in guards {
        if !is_continue_guard(g) {
            return None;
        }
        clauses.push(Clause::If {
            test: g.child(Role::Test)?,
            negated: true,
        });
    }
    let stmt = *last;
    match stmt.kind {
        NodeKind::If if stmt.orelse().is_empty() && !is_continue_guard(stmt) => {
            clauses.push(Clause::If {
                test: stmt.child(Role::Test)?,
                negated: false,
            });
            body_shape(&stmt.body(), clauses)
        }
        NodeKind::For if stmt.orelse().is_empty() => {
            clauses.push(Clause::For {
                target: stmt.child(Role::Target)?,
                iter: stmt.child(Role::Iter)?,
            });
            body_shape(&stmt.body(), clauses)
        }
        NodeKind::Expr => {
            let call = stmt.children.first()?;
            for (method, kind) in [("append", TailKind::Append), ("add", TailKind::Add)] {
                if let Some((object, value)) = method_call_one_arg(call, method) {
                    return Some(Tail {
                        kind,
                        stmt,
                        object,
                        value,
                        key: None,
                    });
                }
            }
            None
        }
        NodeKind::Assign => {
            let targets: Vec<&Node> = stmt.children_in(Role::Target).collect();
            if targets.len() != 1 || targets[0].kind != NodeKind::Subscript {
                return None;
            }
            let key = targets[0].child(Role::Slice)?;
            if key.kind == NodeKind::Slice {
                return None;
            }
            Some(Tail {
                kind: TailKind::Store,
                stmt,
                object: targets[0].child(Role::Value)?,
                value: stmt.child(Role::Value)?,
                key: Some(key),
            })
        }
        _ => None,
    }
}

/// Names bound by an assignment target (`a`, `a, (b, *c)`).
pub fn bound_names(target: &Node) -> Vec<&str> {
    match target.kind {
        NodeKind::Name => target.name_id().into_iter().collect(),
        NodeKind::Tuple | NodeKind::List | NodeKind::Starred => {
            target.children.iter().flat_map(bound_names).collect()
        }
        _ => Vec::new(),
    }
}

/// Innermost function, lambda or module enclosing the node at `span`.
pub fn enclosing_scope<'a>(root: &'a Node, node: &Node) -> &'a Node {
    let path = root.path_to(node.span, node.kind);
    path.iter()
        .rev()
        .skip(1)
        .find(|n| matches!(n.kind, NodeKind::FunctionDef | NodeKind::Lambda | NodeKind::Module))
        .copied()
        .unwrap_or(root)
}

/// Does `scope` mention the name `id` anywhere outside `except`?
pub fn name_used_outside(scope: &Node, id: &str, except: &Node) -> bool {
    scope
        .descendants()
        .any(|n| is_name(n, id) && !except.span.contains(n.span))
}

/// Leftmost name of an attribute/subscript chain (`self.a.b` → `self`).
pub fn root_name(node: &Node) -> Option<&str> {
    match node.kind {
        NodeKind::Name => node.name_id(),
        NodeKind::Attribute | NodeKind::Subscript => root_name(node.child(Role::Value)?),
        _ => None,
    }
}

/// Every name read or written anywhere under `node`.
pub fn names_in(node: &Node) -> BTreeSet<&str> {
    node.descendants().filter_map(Node::name_id).collect()
}

pub fn contains_call(node: &Node) -> bool {
    node.descendants()
        .any(|n| n.kind == NodeKind::Call || is_other(n, "NamedExpr") || is_other(n, "Await") || is_other(n, "Yield"))
}

/// A subscript index understood as `base + offset`, with `base` the
/// normalized text of a symbolic part or `None` for plain integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Index {
    pub base: Option<String>,
    pub offset: i64,
}

pub fn parse_index(node: &Node, src: &str) -> Option<Index> {
    let int_of = |n: &Node| -> Option<i64> {
        match n.literal() {
            Some(Literal::Int(Some(v))) => Some(*v),
            _ => None,
        }
    };
    if let Some(v) = int_of(node) {
        return Some(Index { base: None, offset: v });
    }
    if is_unary(node, UnaryOpKind::USub) {
        if let Some(v) = node.children.first().and_then(int_of) {
            return Some(Index { base: None, offset: -v });
        }
    }
    if node.kind == NodeKind::Slice || node.kind == NodeKind::Tuple || node.kind == NodeKind::Starred {
        return None;
    }
    if let Attrs::BinOp { op } = node.attrs {
        use crate::syntax::BinOpKind;
        let left = node.child(Role::Left)?;
        let right = node.child(Role::Right)?;
        let sign = match op {
            BinOpKind::Add => 1,
            BinOpKind::Sub => -1,
            _ => 0,
        };
        if sign != 0 {
            if let Some(k) = int_of(right) {
                if int_of(left).is_none() {
                    return Some(Index {
                        base: Some(norm(left, src)),
                        offset: sign * k,
                    });
                }
            }
        }
    }
    Some(Index {
        base: Some(norm(node, src)),
        offset: 0,
    })
}
