use serde::{Deserialize, Serialize};

use super::Span;

/// Node kinds the rest of the crate reasons about. Parser kinds with no
/// counterpart here become [`NodeKind::Other`] with their children kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Module,
    For,
    While,
    If,
    Assign,
    AugAssign,
    Compare,
    BoolOp,
    BinOp,
    UnaryOp,
    Call,
    Subscript,
    Expr,
    Break,
    Continue,
    Return,
    With,
    Name,
    Constant,
    Attribute,
    FunctionDef,
    ClassDef,
    Lambda,
    IfExp,
    Tuple,
    List,
    Dict,
    Set,
    ListComp,
    SetComp,
    DictComp,
    GeneratorExp,
    Comprehension,
    Starred,
    Slice,
    Keyword,
    Other,
}

impl NodeKind {
    pub fn is_statement(self) -> bool {
        use NodeKind::*;
        matches!(
            self,
            For | While
                | If
                | Assign
                | AugAssign
                | Expr
                | Break
                | Continue
                | Return
                | With
                | FunctionDef
                | ClassDef
        )
    }

    pub fn is_loop(self) -> bool {
        matches!(self, NodeKind::For | NodeKind::While)
    }

    /// Kinds that open a new Python scope.
    pub fn is_scope(self) -> bool {
        use NodeKind::*;
        matches!(
            self,
            FunctionDef | ClassDef | Lambda | ListComp | SetComp | DictComp | GeneratorExp
        )
    }
}

/// The field a child occupies in its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Root,
    Body,
    OrElse,
    FinalBody,
    Test,
    Target,
    Iter,
    Value,
    Left,
    Right,
    Operand,
    Func,
    Arg,
    Keyword,
    Slice,
    Elt,
    Key,
    Generator,
    ContextExpr,
    OptionalVars,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ctx {
    Load,
    Store,
    Del,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

impl CmpOp {
    pub fn token(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }

    pub fn from_token(token: &str) -> Option<CmpOp> {
        let joined = token.split_whitespace().collect::<Vec<_>>().join(" ");
        Some(match joined.as_str() {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::NotEq,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::LtE,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::GtE,
            "is" => CmpOp::Is,
            "is not" => CmpOp::IsNot,
            "in" => CmpOp::In,
            "not in" => CmpOp::NotIn,
            _ => return None,
        })
    }

    /// Operator to use when both operands swap sides. Membership tests
    /// have no mirror.
    pub fn mirrored(self) -> Option<CmpOp> {
        Some(match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::LtE => CmpOp::GtE,
            CmpOp::GtE => CmpOp::LtE,
            CmpOp::Eq | CmpOp::NotEq | CmpOp::Is | CmpOp::IsNot => self,
            CmpOp::In | CmpOp::NotIn => return None,
        })
    }

    /// Logical complement: `a OP b` is false exactly when `a NEG b` is true.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::NotEq,
            CmpOp::NotEq => CmpOp::Eq,
            CmpOp::Lt => CmpOp::GtE,
            CmpOp::GtE => CmpOp::Lt,
            CmpOp::Gt => CmpOp::LtE,
            CmpOp::LtE => CmpOp::Gt,
            CmpOp::Is => CmpOp::IsNot,
            CmpOp::IsNot => CmpOp::Is,
            CmpOp::In => CmpOp::NotIn,
            CmpOp::NotIn => CmpOp::In,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolOpKind {
    And,
    Or,
}

impl BoolOpKind {
    pub fn token(self) -> &'static str {
        match self {
            BoolOpKind::And => "and",
            BoolOpKind::Or => "or",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOpKind {
    Add,
    Sub,
    Mult,
    MatMult,
    Div,
    Mod,
    Pow,
    LShift,
    RShift,
    BitOr,
    BitXor,
    BitAnd,
    FloorDiv,
}

impl BinOpKind {
    pub fn token(self) -> &'static str {
        match self {
            BinOpKind::Add => "+",
            BinOpKind::Sub => "-",
            BinOpKind::Mult => "*",
            BinOpKind::MatMult => "@",
            BinOpKind::Div => "/",
            BinOpKind::Mod => "%",
            BinOpKind::Pow => "**",
            BinOpKind::LShift => "<<",
            BinOpKind::RShift => ">>",
            BinOpKind::BitOr => "|",
            BinOpKind::BitXor => "^",
            BinOpKind::BitAnd => "&",
            BinOpKind::FloorDiv => "//",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOpKind {
    Invert,
    Not,
    UAdd,
    USub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    None,
    Bool(bool),
    /// `None` when the value does not fit in an `i64`.
    Int(Option<i64>),
    Float(f64),
    Complex,
    Str(String),
    Bytes(Vec<u8>),
    Ellipsis,
    Tuple,
}

/// Kind-specific fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Attrs {
    None,
    Name { id: String, ctx: Ctx },
    Attribute { attr: String, ctx: Ctx },
    Subscript { ctx: Ctx },
    Sequence { ctx: Ctx },
    Compare { ops: Vec<CmpOp> },
    BoolOp { op: BoolOpKind },
    BinOp { op: BinOpKind },
    UnaryOp { op: UnaryOpKind },
    AugAssign { op: BinOpKind },
    Constant { value: Literal },
    If { is_elif: bool },
    Def { name: String, is_async: bool },
    Keyword { arg: Option<String> },
    Comprehension { is_async: bool },
    Other { label: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
    pub role: Role,
    pub children: Vec<Node>,
    pub attrs: Attrs,
}

impl Node {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        self.span.slice(source)
    }

    pub fn child(&self, role: Role) -> Option<&Node> {
        self.children.iter().find(|c| c.role == role)
    }

    pub fn children_in(&self, role: Role) -> impl Iterator<Item = &Node> {
        self.children.iter().filter(move |c| c.role == role)
    }

    pub fn body(&self) -> Vec<&Node> {
        self.children_in(Role::Body).collect()
    }

    pub fn orelse(&self) -> Vec<&Node> {
        self.children_in(Role::OrElse).collect()
    }

    /// Pre-order traversal including `self`.
    pub fn descendants(&self) -> Descendants<'_> {
        Descendants { stack: vec![self] }
    }

    /// Visits every node with the chain of its ancestors (outermost first).
    pub fn walk_with_ancestors<'a, F>(&'a self, f: &mut F)
    where
        F: FnMut(&'a Node, &[&'a Node]),
    {
        fn go<'a, F>(node: &'a Node, stack: &mut Vec<&'a Node>, f: &mut F)
        where
            F: FnMut(&'a Node, &[&'a Node]),
        {
            f(node, stack);
            stack.push(node);
            for child in &node.children {
                go(child, stack, f);
            }
            stack.pop();
        }
        let mut stack = Vec::new();
        go(self, &mut stack, f);
    }

    /// Ancestors of the node that has exactly `span` and `kind`, outermost
    /// first, followed by that node. Empty when no such node exists.
    pub fn path_to(&self, span: Span, kind: NodeKind) -> Vec<&Node> {
        fn go<'a>(node: &'a Node, span: Span, kind: NodeKind, path: &mut Vec<&'a Node>) -> bool {
            path.push(node);
            if node.span == span && node.kind == kind {
                return true;
            }
            for child in &node.children {
                if child.span.contains(span) && go(child, span, kind, path) {
                    return true;
                }
            }
            path.pop();
            false
        }
        let mut path = Vec::new();
        go(self, span, kind, &mut path);
        path
    }

    pub fn find(&self, span: Span, kind: NodeKind) -> Option<&Node> {
        self.path_to(span, kind).pop()
    }

    /// Statement suites (runs of children sharing a block role) in source order.
    pub fn suites(&self) -> Vec<Vec<&Node>> {
        let mut out = Vec::new();
        for node in self.descendants() {
            for role in [Role::Body, Role::OrElse, Role::FinalBody] {
                let suite: Vec<&Node> = node.children_in(role).collect();
                if !suite.is_empty() && is_statement_container(node, role) {
                    out.push(suite);
                }
            }
        }
        out
    }

    pub fn name_id(&self) -> Option<&str> {
        match &self.attrs {
            Attrs::Name { id, .. } => Some(id),
            _ => None,
        }
    }

    pub fn ctx(&self) -> Option<Ctx> {
        match &self.attrs {
            Attrs::Name { ctx, .. }
            | Attrs::Attribute { ctx, .. }
            | Attrs::Subscript { ctx }
            | Attrs::Sequence { ctx } => Some(*ctx),
            _ => None,
        }
    }

    pub fn literal(&self) -> Option<&Literal> {
        match &self.attrs {
            Attrs::Constant { value } => Some(value),
            _ => None,
        }
    }

    pub fn compare_ops(&self) -> &[CmpOp] {
        match &self.attrs {
            Attrs::Compare { ops } => ops,
            _ => &[],
        }
    }

    /// Compare operands, left to right.
    pub fn operands(&self) -> Vec<&Node> {
        self.children_in(Role::Operand).collect()
    }

    pub fn is_elif(&self) -> bool {
        matches!(self.attrs, Attrs::If { is_elif: true })
    }
}

fn is_statement_container(node: &Node, role: Role) -> bool {
    use NodeKind::*;
    match node.kind {
        Module | FunctionDef | ClassDef | With => role == Role::Body,
        For | While | If => true,
        Other => matches!(
            node.attrs,
            Attrs::Other {
                label: "Try" | "ExceptHandler" | "MatchCase" | "AsyncFor" | "AsyncWith"
            }
        ),
        _ => false,
    }
}

pub struct Descendants<'a> {
    stack: Vec<&'a Node>,
}

impl<'a> Iterator for Descendants<'a> {
    type Item = &'a Node;

    fn next(&mut self) -> Option<&'a Node> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_source;
    use super::*;

    #[test]
    fn children_lie_within_parents() {
        let src = "def f(x):\n    for a in b:\n        if (a > 1) and a < 3:\n            y[a] = g(*a, k=2)\n    return [i for i in x if i]\n";
        let root = parse_source(src).unwrap();
        for node in root.descendants() {
            for child in &node.children {
                assert!(
                    node.span.contains(child.span),
                    "{:?} {} not in {:?} {}",
                    child.kind,
                    child.span,
                    node.kind,
                    node.span
                );
            }
        }
    }

    #[test]
    fn mirrored_and_negated_ops() {
        assert_eq!(CmpOp::Lt.mirrored(), Some(CmpOp::Gt));
        assert_eq!(CmpOp::In.mirrored(), None);
        for op in [CmpOp::Eq, CmpOp::Lt, CmpOp::GtE, CmpOp::Is, CmpOp::NotIn] {
            assert_eq!(op.negated().negated(), op);
            assert_eq!(CmpOp::from_token(op.token()), Some(op));
        }
    }

    #[test]
    fn suites_include_nested_blocks() {
        let src = "a = 1\nb = 2\nif a:\n    c = 3\nelse:\n    d = 4\n";
        let root = parse_source(src).unwrap();
        let sizes: Vec<usize> = root.suites().iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![3, 1, 1]);
    }

    #[test]
    fn path_to_finds_ancestors() {
        let src = "x = [a for a in open(f)]\n";
        let root = parse_source(src).unwrap();
        let call = root
            .descendants()
            .find(|n| n.kind == NodeKind::Call)
            .unwrap();
        let kinds: Vec<_> = root
            .path_to(call.span, NodeKind::Call)
            .iter()
            .map(|n| n.kind)
            .collect();
        assert_eq!(
            kinds,
            vec![
                NodeKind::Module,
                NodeKind::Assign,
                NodeKind::ListComp,
                NodeKind::Comprehension,
                NodeKind::Call
            ]
        );
    }
}
