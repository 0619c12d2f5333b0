//! Token-level helpers: normalization, identifier collection, and
//! parenthesis-aware span widening.

use std::collections::BTreeSet;

use rustpython_parser::lexer::lex;
use rustpython_parser::{Mode, Tok};

use super::indent::dedent_common;
use super::{syntax_error_at, Span, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Name,
    Keyword,
    Number,
    String,
    Comment,
    Newline,
    NonLogicalNewline,
    Indent,
    Dedent,
    OpenParen,
    CloseParen,
    OpenBracket,
    CloseBracket,
    Op,
    EndOfFile,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub class: TokenClass,
    pub span: Span,
    /// Identifier text for names (including soft keywords used as names).
    pub name: Option<String>,
}

fn classify(tok: &Tok) -> (TokenClass, Option<String>) {
    use TokenClass as C;
    let class = match tok {
        Tok::Name { name } => return (C::Name, Some(name.clone())),
        Tok::Match => return (C::Name, Some("match".into())),
        Tok::Case => return (C::Name, Some("case".into())),
        Tok::Type => return (C::Name, Some("type".into())),
        Tok::Int { .. } | Tok::Float { .. } | Tok::Complex { .. } => C::Number,
        Tok::String { .. } => C::String,
        Tok::Comment(_) => C::Comment,
        Tok::Newline => C::Newline,
        Tok::NonLogicalNewline => C::NonLogicalNewline,
        Tok::Indent => C::Indent,
        Tok::Dedent => C::Dedent,
        Tok::EndOfFile => C::EndOfFile,
        Tok::Lpar => C::OpenParen,
        Tok::Rpar => C::CloseParen,
        Tok::Lsqb | Tok::Lbrace => C::OpenBracket,
        Tok::Rsqb | Tok::Rbrace => C::CloseBracket,
        Tok::False
        | Tok::None
        | Tok::True
        | Tok::And
        | Tok::As
        | Tok::Assert
        | Tok::Async
        | Tok::Await
        | Tok::Break
        | Tok::Class
        | Tok::Continue
        | Tok::Def
        | Tok::Del
        | Tok::Elif
        | Tok::Else
        | Tok::Except
        | Tok::Finally
        | Tok::For
        | Tok::From
        | Tok::Global
        | Tok::If
        | Tok::Import
        | Tok::In
        | Tok::Is
        | Tok::Lambda
        | Tok::Nonlocal
        | Tok::Not
        | Tok::Or
        | Tok::Pass
        | Tok::Raise
        | Tok::Return
        | Tok::Try
        | Tok::While
        | Tok::With
        | Tok::Yield => C::Keyword,
        _ => C::Op,
    };
    (class, None)
}

/// Lexes a whole module.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    for item in lex(text, Mode::Module) {
        let (tok, range) = item.map_err(|e| {
            syntax_error_at(text, usize::from(e.location), e.error.to_string())
        })?;
        let (class, name) = classify(&tok);
        out.push(Token {
            class,
            span: Span::new(range.start().into(), range.end().into()),
            name,
        });
    }
    Ok(out)
}

/// Canonical token string used for textual equality of code fragments.
///
/// The fragment is dedented, comments and line continuations are dropped,
/// and the remaining tokens are joined with single spaces. Logical line
/// breaks and block structure survive as `NEWLINE`, `INDENT` and `DEDENT`
/// markers. Unlexable input falls back to whitespace collapsing.
pub fn normalize(text: &str) -> String {
    let dedented = dedent_common(text);
    let tokens = match tokenize(&dedented) {
        Ok(t) => t,
        Err(_) => return dedented.split_whitespace().collect::<Vec<_>>().join(" "),
    };
    let mut parts: Vec<&str> = Vec::with_capacity(tokens.len());
    for t in &tokens {
        let piece = match t.class {
            TokenClass::Comment | TokenClass::NonLogicalNewline | TokenClass::EndOfFile => continue,
            TokenClass::Newline => "NEWLINE",
            TokenClass::Indent => "INDENT",
            TokenClass::Dedent => "DEDENT",
            _ => t.span.slice(&dedented),
        };
        parts.push(piece);
    }
    while matches!(parts.last(), Some(&"NEWLINE") | Some(&"DEDENT")) {
        parts.pop();
    }
    parts.join(" ")
}

/// Every identifier that appears in `text`, including attribute names and
/// keyword-argument names. Unlexable input yields the identifiers found
/// before the error.
pub fn identifiers(text: &str) -> BTreeSet<String> {
    lex(text, Mode::Module)
        .map_while(Result::ok)
        .filter_map(|(tok, _)| classify(&tok).1)
        .collect()
}

/// Spans of string literal tokens that contain a line break.
pub fn multiline_string_spans(text: &str) -> Vec<Span> {
    lex(text, Mode::Module)
        .map_while(Result::ok)
        .filter(|(tok, _)| matches!(tok, Tok::String { .. }))
        .map(|(_, r)| Span::new(r.start().into(), r.end().into()))
        .filter(|s| s.slice(text).contains('\n'))
        .collect()
}

/// Spans of comments, in order.
pub fn comment_spans(text: &str) -> Vec<Span> {
    lex(text, Mode::Module)
        .map_while(Result::ok)
        .filter(|(tok, _)| matches!(tok, Tok::Comment(_)))
        .map(|(_, r)| Span::new(r.start().into(), r.end().into()))
        .collect()
}

/// Lexed view of one file for repeated span queries.
pub struct TokenIndex {
    tokens: Vec<Token>,
}

impl TokenIndex {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        let tokens = tokenize(text)?
            .into_iter()
            .filter(|t| !matches!(t.class, TokenClass::Comment | TokenClass::NonLogicalNewline))
            .collect();
        Ok(TokenIndex { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Widens `span` over grouping parentheses that enclose exactly it.
    /// Call parentheses such as those in `f(x)` are not grouping.
    pub fn outer_span(&self, span: Span) -> Span {
        let first = self.tokens.iter().position(|t| t.span.start == span.start);
        let last = self.tokens.iter().rposition(|t| t.span.end == span.end);
        let (Some(mut i), Some(mut j)) = (first, last) else {
            return span;
        };
        let mut out = span;
        while i > 0 && j + 1 < self.tokens.len() {
            let open = &self.tokens[i - 1];
            let close = &self.tokens[j + 1];
            if open.class != TokenClass::OpenParen || close.class != TokenClass::CloseParen {
                break;
            }
            if i >= 2 && ends_expression(&self.tokens[i - 2]) {
                break;
            }
            if !self.balanced(i, j) {
                break;
            }
            out = Span::new(open.span.start, close.span.end);
            i -= 1;
            j += 1;
        }
        out
    }

    fn balanced(&self, i: usize, j: usize) -> bool {
        let mut depth = 0i64;
        for t in &self.tokens[i..=j] {
            match t.class {
                TokenClass::OpenParen | TokenClass::OpenBracket => depth += 1,
                TokenClass::CloseParen | TokenClass::CloseBracket => {
                    depth -= 1;
                    if depth < 0 {
                        return false;
                    }
                }
                _ => {}
            }
        }
        depth == 0
    }
}

fn ends_expression(t: &Token) -> bool {
    matches!(
        t.class,
        TokenClass::Name
            | TokenClass::Number
            | TokenClass::String
            | TokenClass::CloseParen
            | TokenClass::CloseBracket
    )
}

/// One-shot form of [`TokenIndex::outer_span`].
pub fn outer_span(text: &str, span: Span) -> Span {
    match TokenIndex::new(text) {
        Ok(index) => index.outer_span(span),
        Err(_) => span,
    }
}
