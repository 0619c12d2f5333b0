//! Projection of the rustpython AST onto [`Node`].

use rustpython_parser::ast::{self, Ranged};
use rustpython_parser::{Mode, ParseError};

use super::node::{Attrs, BinOpKind, BoolOpKind, CmpOp, Ctx, Literal, Node, NodeKind, Role, UnaryOpKind};
use super::{syntax_error_at, Span, SyntaxError};

pub(super) fn parse_module(text: &str) -> Result<Node, SyntaxError> {
    let parsed = rustpython_parser::parse(text, Mode::Module, "<source>")
        .map_err(|e| to_syntax_error(text, e))?;
    let body = match parsed {
        ast::Mod::Module(m) => m.body,
        _ => Vec::new(),
    };
    let lower = Lower { src: text };
    let children = body
        .iter()
        .map(|s| lower.stmt(s, Role::Body))
        .collect();
    Ok(Node {
        kind: NodeKind::Module,
        span: Span::new(0, text.len()),
        role: Role::Root,
        children,
        attrs: Attrs::None,
    })
}

pub(super) fn parse_expression(text: &str) -> Result<Node, SyntaxError> {
    let parsed = rustpython_parser::parse(text, Mode::Expression, "<expr>")
        .map_err(|e| to_syntax_error(text, e))?;
    match parsed {
        ast::Mod::Expression(e) => Ok(Lower { src: text }.expr(&e.body, Role::Root)),
        _ => Err(syntax_error_at(text, 0, "expected an expression".into())),
    }
}

fn to_syntax_error(text: &str, err: ParseError) -> SyntaxError {
    syntax_error_at(text, usize::from(err.offset), err.error.to_string())
}

fn span_of(r: &impl Ranged) -> Span {
    let range = r.range();
    Span::new(range.start().into(), range.end().into())
}

fn ctx_of(ctx: &ast::ExprContext) -> Ctx {
    match ctx {
        ast::ExprContext::Load => Ctx::Load,
        ast::ExprContext::Store => Ctx::Store,
        ast::ExprContext::Del => Ctx::Del,
    }
}

fn cmp_op(op: &ast::CmpOp) -> CmpOp {
    match op {
        ast::CmpOp::Eq => CmpOp::Eq,
        ast::CmpOp::NotEq => CmpOp::NotEq,
        ast::CmpOp::Lt => CmpOp::Lt,
        ast::CmpOp::LtE => CmpOp::LtE,
        ast::CmpOp::Gt => CmpOp::Gt,
        ast::CmpOp::GtE => CmpOp::GtE,
        ast::CmpOp::Is => CmpOp::Is,
        ast::CmpOp::IsNot => CmpOp::IsNot,
        ast::CmpOp::In => CmpOp::In,
        ast::CmpOp::NotIn => CmpOp::NotIn,
    }
}

fn bin_op(op: &ast::Operator) -> BinOpKind {
    match op {
        ast::Operator::Add => BinOpKind::Add,
        ast::Operator::Sub => BinOpKind::Sub,
        ast::Operator::Mult => BinOpKind::Mult,
        ast::Operator::MatMult => BinOpKind::MatMult,
        ast::Operator::Div => BinOpKind::Div,
        ast::Operator::Mod => BinOpKind::Mod,
        ast::Operator::Pow => BinOpKind::Pow,
        ast::Operator::LShift => BinOpKind::LShift,
        ast::Operator::RShift => BinOpKind::RShift,
        ast::Operator::BitOr => BinOpKind::BitOr,
        ast::Operator::BitXor => BinOpKind::BitXor,
        ast::Operator::BitAnd => BinOpKind::BitAnd,
        ast::Operator::FloorDiv => BinOpKind::FloorDiv,
    }
}

fn literal(value: &ast::Constant) -> Literal {
    match value {
        ast::Constant::None => Literal::None,
        ast::Constant::Bool(b) => Literal::Bool(*b),
        ast::Constant::Str(s) => Literal::Str(s.clone()),
        ast::Constant::Bytes(b) => Literal::Bytes(b.clone()),
        ast::Constant::Int(i) => Literal::Int(i.to_string().parse().ok()),
        ast::Constant::Float(f) => Literal::Float(*f),
        ast::Constant::Complex { .. } => Literal::Complex,
        ast::Constant::Ellipsis => Literal::Ellipsis,
        ast::Constant::Tuple(_) => Literal::Tuple,
    }
}

struct Lower<'s> {
    src: &'s str,
}

fn leaf(kind: NodeKind, span: Span, role: Role, attrs: Attrs) -> Node {
    Node {
        kind,
        span,
        role,
        children: Vec::new(),
        attrs,
    }
}

impl<'s> Lower<'s> {
    fn node(&self, kind: NodeKind, span: Span, role: Role, attrs: Attrs, mut children: Vec<Node>) -> Node {
        children.sort_by_key(|c| (c.span.start, c.span.end));
        Node {
            kind,
            span,
            role,
            children,
            attrs,
        }
    }

    fn other(&self, label: &'static str, span: Span, role: Role, children: Vec<Node>) -> Node {
        self.node(NodeKind::Other, span, role, Attrs::Other { label }, children)
    }

    fn stmts(&self, body: &[ast::Stmt], role: Role, out: &mut Vec<Node>) {
        out.extend(body.iter().map(|s| self.stmt(s, role)));
    }

    fn exprs<'a>(&self, exprs: impl IntoIterator<Item = &'a ast::Expr>, role: Role, out: &mut Vec<Node>) {
        out.extend(exprs.into_iter().map(|e| self.expr(e, role)));
    }

    fn arguments(&self, args: &ast::Arguments, out: &mut Vec<Node>) {
        let all = args
            .posonlyargs
            .iter()
            .chain(&args.args)
            .chain(&args.kwonlyargs);
        for a in all {
            if let Some(default) = &a.default {
                out.push(self.expr(default, Role::Other));
            }
            if let Some(ann) = &a.def.annotation {
                out.push(self.expr(ann, Role::Other));
            }
        }
        for a in args.vararg.iter().chain(args.kwarg.iter()) {
            if let Some(ann) = &a.annotation {
                out.push(self.expr(ann, Role::Other));
            }
        }
    }

    fn stmt(&self, stmt: &ast::Stmt, role: Role) -> Node {
        use ast::Stmt as S;
        let span = span_of(stmt);
        let mut ch = Vec::new();
        match stmt {
            S::FunctionDef(f) => {
                self.exprs(&f.decorator_list, Role::Other, &mut ch);
                self.arguments(&f.args, &mut ch);
                self.exprs(f.returns.as_deref(), Role::Other, &mut ch);
                self.stmts(&f.body, Role::Body, &mut ch);
                let attrs = Attrs::Def {
                    name: f.name.to_string(),
                    is_async: false,
                };
                self.node(NodeKind::FunctionDef, span, role, attrs, ch)
            }
            S::AsyncFunctionDef(f) => {
                self.exprs(&f.decorator_list, Role::Other, &mut ch);
                self.arguments(&f.args, &mut ch);
                self.exprs(f.returns.as_deref(), Role::Other, &mut ch);
                self.stmts(&f.body, Role::Body, &mut ch);
                let attrs = Attrs::Def {
                    name: f.name.to_string(),
                    is_async: true,
                };
                self.node(NodeKind::FunctionDef, span, role, attrs, ch)
            }
            S::ClassDef(c) => {
                self.exprs(&c.decorator_list, Role::Other, &mut ch);
                self.exprs(&c.bases, Role::Other, &mut ch);
                ch.extend(c.keywords.iter().map(|k| self.keyword(k)));
                self.stmts(&c.body, Role::Body, &mut ch);
                let attrs = Attrs::Def {
                    name: c.name.to_string(),
                    is_async: false,
                };
                self.node(NodeKind::ClassDef, span, role, attrs, ch)
            }
            S::Return(r) => {
                self.exprs(r.value.as_deref(), Role::Value, &mut ch);
                self.node(NodeKind::Return, span, role, Attrs::None, ch)
            }
            S::Delete(d) => {
                self.exprs(&d.targets, Role::Target, &mut ch);
                self.other("Delete", span, role, ch)
            }
            S::Assign(a) => {
                self.exprs(&a.targets, Role::Target, &mut ch);
                ch.push(self.expr(&a.value, Role::Value));
                self.node(NodeKind::Assign, span, role, Attrs::None, ch)
            }
            S::TypeAlias(t) => {
                ch.push(self.expr(&t.name, Role::Target));
                ch.push(self.expr(&t.value, Role::Value));
                self.other("TypeAlias", span, role, ch)
            }
            S::AugAssign(a) => {
                ch.push(self.expr(&a.target, Role::Target));
                ch.push(self.expr(&a.value, Role::Value));
                let attrs = Attrs::AugAssign { op: bin_op(&a.op) };
                self.node(NodeKind::AugAssign, span, role, attrs, ch)
            }
            S::AnnAssign(a) => {
                ch.push(self.expr(&a.target, Role::Target));
                ch.push(self.expr(&a.annotation, Role::Other));
                self.exprs(a.value.as_deref(), Role::Value, &mut ch);
                self.other("AnnAssign", span, role, ch)
            }
            S::For(f) => {
                ch.push(self.expr(&f.target, Role::Target));
                ch.push(self.expr(&f.iter, Role::Iter));
                self.stmts(&f.body, Role::Body, &mut ch);
                self.stmts(&f.orelse, Role::OrElse, &mut ch);
                self.node(NodeKind::For, span, role, Attrs::None, ch)
            }
            S::AsyncFor(f) => {
                ch.push(self.expr(&f.target, Role::Target));
                ch.push(self.expr(&f.iter, Role::Iter));
                self.stmts(&f.body, Role::Body, &mut ch);
                self.stmts(&f.orelse, Role::OrElse, &mut ch);
                self.other("AsyncFor", span, role, ch)
            }
            S::While(w) => {
                ch.push(self.expr(&w.test, Role::Test));
                self.stmts(&w.body, Role::Body, &mut ch);
                self.stmts(&w.orelse, Role::OrElse, &mut ch);
                self.node(NodeKind::While, span, role, Attrs::None, ch)
            }
            S::If(i) => {
                ch.push(self.expr(&i.test, Role::Test));
                self.stmts(&i.body, Role::Body, &mut ch);
                self.stmts(&i.orelse, Role::OrElse, &mut ch);
                let is_elif = self.src[span.start..].starts_with("elif");
                self.node(NodeKind::If, span, role, Attrs::If { is_elif }, ch)
            }
            S::With(w) => {
                for item in &w.items {
                    ch.push(self.expr(&item.context_expr, Role::ContextExpr));
                    self.exprs(item.optional_vars.as_deref(), Role::OptionalVars, &mut ch);
                }
                self.stmts(&w.body, Role::Body, &mut ch);
                self.node(NodeKind::With, span, role, Attrs::None, ch)
            }
            S::AsyncWith(w) => {
                for item in &w.items {
                    ch.push(self.expr(&item.context_expr, Role::ContextExpr));
                    self.exprs(item.optional_vars.as_deref(), Role::OptionalVars, &mut ch);
                }
                self.stmts(&w.body, Role::Body, &mut ch);
                self.other("AsyncWith", span, role, ch)
            }
            S::Match(m) => {
                ch.push(self.expr(&m.subject, Role::Value));
                for case in &m.cases {
                    let mut case_ch = Vec::new();
                    self.exprs(case.guard.as_deref(), Role::Test, &mut case_ch);
                    self.stmts(&case.body, Role::Body, &mut case_ch);
                    let start = span_of(&case.pattern).start;
                    let end = case_ch.iter().map(|c| c.span.end).max().unwrap_or(start);
                    ch.push(self.other("MatchCase", Span::new(start, end), Role::Other, case_ch));
                }
                self.other("Match", span, role, ch)
            }
            S::Raise(r) => {
                self.exprs(r.exc.as_deref(), Role::Value, &mut ch);
                self.exprs(r.cause.as_deref(), Role::Other, &mut ch);
                self.other("Raise", span, role, ch)
            }
            S::Try(t) => {
                self.try_parts(&t.body, &t.handlers, &t.orelse, &t.finalbody, &mut ch);
                self.other("Try", span, role, ch)
            }
            S::TryStar(t) => {
                self.try_parts(&t.body, &t.handlers, &t.orelse, &t.finalbody, &mut ch);
                self.other("Try", span, role, ch)
            }
            S::Assert(a) => {
                ch.push(self.expr(&a.test, Role::Test));
                self.exprs(a.msg.as_deref(), Role::Other, &mut ch);
                self.other("Assert", span, role, ch)
            }
            S::Import(_) => self.other("Import", span, role, ch),
            S::ImportFrom(_) => self.other("ImportFrom", span, role, ch),
            S::Global(_) => self.other("Global", span, role, ch),
            S::Nonlocal(_) => self.other("Nonlocal", span, role, ch),
            S::Expr(e) => {
                ch.push(self.expr(&e.value, Role::Value));
                self.node(NodeKind::Expr, span, role, Attrs::None, ch)
            }
            S::Pass(_) => self.other("Pass", span, role, ch),
            S::Break(_) => leaf(NodeKind::Break, span, role, Attrs::None),
            S::Continue(_) => leaf(NodeKind::Continue, span, role, Attrs::None),
        }
    }

    fn try_parts(
        &self,
        body: &[ast::Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[ast::Stmt],
        finalbody: &[ast::Stmt],
        ch: &mut Vec<Node>,
    ) {
        self.stmts(body, Role::Body, ch);
        for h in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = h;
            let mut hch = Vec::new();
            self.exprs(h.type_.as_deref(), Role::Other, &mut hch);
            self.stmts(&h.body, Role::Body, &mut hch);
            ch.push(self.other("ExceptHandler", span_of(h), Role::Other, hch));
        }
        self.stmts(orelse, Role::OrElse, ch);
        self.stmts(finalbody, Role::FinalBody, ch);
    }

    fn keyword(&self, k: &ast::Keyword) -> Node {
        let value = self.expr(&k.value, Role::Value);
        let attrs = Attrs::Keyword {
            arg: k.arg.as_ref().map(|a| a.to_string()),
        };
        self.node(NodeKind::Keyword, span_of(k), Role::Keyword, attrs, vec![value])
    }

    fn comprehensions(&self, generators: &[ast::Comprehension], out: &mut Vec<Node>) {
        for g in generators {
            let mut ch = vec![self.expr(&g.target, Role::Target), self.expr(&g.iter, Role::Iter)];
            self.exprs(&g.ifs, Role::Test, &mut ch);
            let end = ch.iter().map(|c| c.span.end).max().unwrap_or(0);
            let start = self.comprehension_start(ch[0].span.start);
            let attrs = Attrs::Comprehension {
                is_async: g.is_async,
            };
            out.push(self.node(NodeKind::Comprehension, Span::new(start, end), Role::Generator, attrs, ch));
        }
    }

    /// Offset of the `for` (or `async for`) keyword preceding a comprehension
    /// target. The parser records no range for comprehension clauses.
    fn comprehension_start(&self, target_start: usize) -> usize {
        let before = self.src[..target_start].trim_end_matches(|c: char| c.is_whitespace() || c == '(' || c == '\\');
        let Some(for_start) = before.strip_suffix("for").map(str::len) else {
            return target_start;
        };
        let pre = self.src[..for_start].trim_end();
        match pre.strip_suffix("async") {
            Some(p) => p.len(),
            None => for_start,
        }
    }

    fn expr(&self, expr: &ast::Expr, role: Role) -> Node {
        use ast::Expr as E;
        let span = span_of(expr);
        let mut ch = Vec::new();
        match expr {
            E::BoolOp(b) => {
                self.exprs(&b.values, Role::Operand, &mut ch);
                let op = match b.op {
                    ast::BoolOp::And => BoolOpKind::And,
                    ast::BoolOp::Or => BoolOpKind::Or,
                };
                self.node(NodeKind::BoolOp, span, role, Attrs::BoolOp { op }, ch)
            }
            E::NamedExpr(n) => {
                ch.push(self.expr(&n.target, Role::Target));
                ch.push(self.expr(&n.value, Role::Value));
                self.other("NamedExpr", span, role, ch)
            }
            E::BinOp(b) => {
                ch.push(self.expr(&b.left, Role::Left));
                ch.push(self.expr(&b.right, Role::Right));
                self.node(NodeKind::BinOp, span, role, Attrs::BinOp { op: bin_op(&b.op) }, ch)
            }
            E::UnaryOp(u) => {
                ch.push(self.expr(&u.operand, Role::Operand));
                let op = match u.op {
                    ast::UnaryOp::Invert => UnaryOpKind::Invert,
                    ast::UnaryOp::Not => UnaryOpKind::Not,
                    ast::UnaryOp::UAdd => UnaryOpKind::UAdd,
                    ast::UnaryOp::USub => UnaryOpKind::USub,
                };
                self.node(NodeKind::UnaryOp, span, role, Attrs::UnaryOp { op }, ch)
            }
            E::Lambda(l) => {
                self.arguments(&l.args, &mut ch);
                ch.push(self.expr(&l.body, Role::Body));
                self.node(NodeKind::Lambda, span, role, Attrs::None, ch)
            }
            E::IfExp(i) => {
                ch.push(self.expr(&i.test, Role::Test));
                ch.push(self.expr(&i.body, Role::Body));
                ch.push(self.expr(&i.orelse, Role::OrElse));
                self.node(NodeKind::IfExp, span, role, Attrs::None, ch)
            }
            E::Dict(d) => {
                self.exprs(d.keys.iter().flatten(), Role::Key, &mut ch);
                self.exprs(&d.values, Role::Value, &mut ch);
                self.node(NodeKind::Dict, span, role, Attrs::None, ch)
            }
            E::Set(s) => {
                self.exprs(&s.elts, Role::Elt, &mut ch);
                self.node(NodeKind::Set, span, role, Attrs::None, ch)
            }
            E::ListComp(c) => {
                ch.push(self.expr(&c.elt, Role::Elt));
                self.comprehensions(&c.generators, &mut ch);
                self.node(NodeKind::ListComp, span, role, Attrs::None, ch)
            }
            E::SetComp(c) => {
                ch.push(self.expr(&c.elt, Role::Elt));
                self.comprehensions(&c.generators, &mut ch);
                self.node(NodeKind::SetComp, span, role, Attrs::None, ch)
            }
            E::DictComp(c) => {
                ch.push(self.expr(&c.key, Role::Key));
                ch.push(self.expr(&c.value, Role::Value));
                self.comprehensions(&c.generators, &mut ch);
                self.node(NodeKind::DictComp, span, role, Attrs::None, ch)
            }
            E::GeneratorExp(c) => {
                ch.push(self.expr(&c.elt, Role::Elt));
                self.comprehensions(&c.generators, &mut ch);
                self.node(NodeKind::GeneratorExp, span, role, Attrs::None, ch)
            }
            E::Await(a) => {
                ch.push(self.expr(&a.value, Role::Value));
                self.other("Await", span, role, ch)
            }
            E::Yield(y) => {
                self.exprs(y.value.as_deref(), Role::Value, &mut ch);
                self.other("Yield", span, role, ch)
            }
            E::YieldFrom(y) => {
                ch.push(self.expr(&y.value, Role::Value));
                self.other("YieldFrom", span, role, ch)
            }
            E::Compare(c) => {
                ch.push(self.expr(&c.left, Role::Operand));
                self.exprs(&c.comparators, Role::Operand, &mut ch);
                let ops = c.ops.iter().map(cmp_op).collect();
                self.node(NodeKind::Compare, span, role, Attrs::Compare { ops }, ch)
            }
            E::Call(c) => {
                ch.push(self.expr(&c.func, Role::Func));
                self.exprs(&c.args, Role::Arg, &mut ch);
                ch.extend(c.keywords.iter().map(|k| self.keyword(k)));
                self.node(NodeKind::Call, span, role, Attrs::None, ch)
            }
            E::FormattedValue(f) => {
                self.push_if_inside(span, self.expr(&f.value, Role::Value), &mut ch);
                self.other("FormattedValue", span, role, ch)
            }
            E::JoinedStr(j) => {
                for v in &j.values {
                    self.push_if_inside(span, self.expr(v, Role::Value), &mut ch);
                }
                self.other("JoinedStr", span, role, ch)
            }
            E::Constant(c) => {
                let attrs = Attrs::Constant {
                    value: literal(&c.value),
                };
                leaf(NodeKind::Constant, span, role, attrs)
            }
            E::Attribute(a) => {
                ch.push(self.expr(&a.value, Role::Value));
                let attrs = Attrs::Attribute {
                    attr: a.attr.to_string(),
                    ctx: ctx_of(&a.ctx),
                };
                self.node(NodeKind::Attribute, span, role, attrs, ch)
            }
            E::Subscript(s) => {
                ch.push(self.expr(&s.value, Role::Value));
                ch.push(self.expr(&s.slice, Role::Slice));
                let attrs = Attrs::Subscript { ctx: ctx_of(&s.ctx) };
                self.node(NodeKind::Subscript, span, role, attrs, ch)
            }
            E::Starred(s) => {
                ch.push(self.expr(&s.value, Role::Value));
                let attrs = Attrs::Sequence { ctx: ctx_of(&s.ctx) };
                self.node(NodeKind::Starred, span, role, attrs, ch)
            }
            E::Name(n) => {
                let attrs = Attrs::Name {
                    id: n.id.to_string(),
                    ctx: ctx_of(&n.ctx),
                };
                leaf(NodeKind::Name, span, role, attrs)
            }
            E::List(l) => {
                self.exprs(&l.elts, Role::Elt, &mut ch);
                let attrs = Attrs::Sequence { ctx: ctx_of(&l.ctx) };
                self.node(NodeKind::List, span, role, attrs, ch)
            }
            E::Tuple(t) => {
                self.exprs(&t.elts, Role::Elt, &mut ch);
                let attrs = Attrs::Sequence { ctx: ctx_of(&t.ctx) };
                self.node(NodeKind::Tuple, span, role, attrs, ch)
            }
            E::Slice(s) => {
                self.exprs(s.lower.as_deref(), Role::Other, &mut ch);
                self.exprs(s.upper.as_deref(), Role::Other, &mut ch);
                self.exprs(s.step.as_deref(), Role::Other, &mut ch);
                self.node(NodeKind::Slice, span, role, Attrs::None, ch)
            }
        }
    }

    /// f-string parts are only kept when their reported span lies inside the
    /// literal; the parser's offsets for them are not always reliable.
    fn push_if_inside(&self, outer: Span, node: Node, out: &mut Vec<Node>) {
        if outer.contains(node.span) {
            out.push(node);
        }
    }
}
