//! Replacing idiom-irrelevant subexpressions with symbols, and putting
//! them back.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::AbstractionMode;
use crate::syntax::tokens::{identifiers, normalize, tokenize, TokenClass};
use crate::syntax::{splice, Edit, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub symbol: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractionResult {
    pub abstract_code: String,
    pub bindings: Vec<Binding>,
    pub mode: AbstractionMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("`{0}` does not occur in the component")]
    ObjectNotFound(String),
    #[error("symbol `{0}` has no binding")]
    UnboundSymbol(String),
}

/// The component passed through unchanged.
pub fn no_abstraction(component_text: &str) -> AbstractionResult {
    AbstractionResult {
        abstract_code: component_text.to_string(),
        bindings: Vec::new(),
        mode: AbstractionMode::NoAbstraction,
    }
}

/// Replaces each operand span with a numbered symbol. Operands with the
/// same normalized text share a symbol; numbering follows first
/// occurrence.
///
/// Panics if spans overlap or fall outside `component_text`.
pub fn abstract_operands(component_text: &str, operand_spans: &[Span]) -> AbstractionResult {
    let mut spans = operand_spans.to_vec();
    spans.sort_by_key(|s| (s.start, s.end));
    let prefix = symbol_prefix(component_text, &spans);
    let mut by_text: BTreeMap<String, String> = BTreeMap::new();
    let mut bindings = Vec::new();
    let mut edits = Vec::new();
    for span in spans {
        let text = span.slice(component_text);
        let key = normalize(text);
        let symbol = by_text
            .entry(key)
            .or_insert_with(|| {
                let symbol = format!("{prefix}{}", bindings.len() + 1);
                bindings.push(Binding {
                    symbol: symbol.clone(),
                    text: text.to_string(),
                });
                symbol
            })
            .clone();
        edits.push(Edit::new(span, symbol));
    }
    let abstract_code = splice(component_text, &edits).expect("operand spans overlap");
    AbstractionResult {
        abstract_code,
        bindings,
        mode: AbstractionMode::OperandMapping,
    }
}

/// First of `v`, `w`, `u`, ... such that no identifier outside the operand
/// spans looks like one of its numbered symbols.
fn symbol_prefix(text: &str, spans: &[Span]) -> String {
    let mut outside = String::new();
    let mut at = 0;
    for s in spans {
        outside.push_str(&text[at..s.start]);
        outside.push(' ');
        at = s.end;
    }
    outside.push_str(&text[at..]);
    let ids = identifiers(&outside);
    ["v", "w", "u", "sym"]
        .into_iter()
        .find(|p| !ids.iter().any(|id| numbered(id, p)))
        .unwrap_or("sym_")
        .to_string()
}

fn numbered(id: &str, prefix: &str) -> bool {
    id.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Replaces every whole-token occurrence of `object_text` with a single
/// symbol, `v` unless that name is already taken.
pub fn abstract_specified(component_text: &str, object_text: &str) -> Result<AbstractionResult, AbstractionError> {
    let not_found = || AbstractionError::ObjectNotFound(object_text.to_string());
    let pattern: Vec<String> = significant_tokens(object_text)
        .ok_or_else(not_found)?
        .into_iter()
        .map(|s| s.slice(object_text).to_string())
        .collect();
    if pattern.is_empty() {
        return Err(not_found());
    }
    let tokens = significant_tokens(component_text).ok_or_else(not_found)?;
    let mut hits = Vec::new();
    let mut i = 0;
    while i + pattern.len() <= tokens.len() {
        let matches = pattern
            .iter()
            .enumerate()
            .all(|(k, p)| tokens[i + k].slice(component_text) == p);
        let after_dot = i > 0 && tokens[i - 1].slice(component_text) == ".";
        if matches && !after_dot {
            hits.push(Span::new(tokens[i].start, tokens[i + pattern.len() - 1].end));
            i += pattern.len();
        } else {
            i += 1;
        }
    }
    if hits.is_empty() {
        return Err(not_found());
    }
    let mut taken = identifiers(component_text);
    for id in identifiers(object_text) {
        taken.remove(&id);
    }
    // Names that only occur inside the object are free to reuse.
    let symbol = fresh_symbol(&taken);
    let edits: Vec<Edit> = hits.iter().map(|&s| Edit::new(s, symbol.clone())).collect();
    let abstract_code = splice(component_text, &edits).expect("token spans are disjoint");
    Ok(AbstractionResult {
        abstract_code,
        bindings: vec![Binding {
            symbol,
            text: object_text.to_string(),
        }],
        mode: AbstractionMode::SpecifiedObject,
    })
}

fn fresh_symbol(taken: &BTreeSet<String>) -> String {
    let mut symbol = "v".to_string();
    while taken.contains(&symbol) {
        symbol.push('_');
    }
    symbol
}

fn significant_tokens(text: &str) -> Option<Vec<Span>> {
    let tokens = tokenize(text).ok()?;
    Some(
        tokens
            .into_iter()
            .filter(|t| {
                !matches!(
                    t.class,
                    TokenClass::Comment
                        | TokenClass::Newline
                        | TokenClass::NonLogicalNewline
                        | TokenClass::Indent
                        | TokenClass::Dedent
                        | TokenClass::EndOfFile
                )
            })
            .map(|t| t.span)
            .collect(),
    )
}

/// Substitutes each bound symbol with its text. Only whole name tokens are
/// replaced. A name of the same numbered family as the bound symbols but
/// without a binding is an error.
pub fn restore(abstract_code: &str, bindings: &[Binding]) -> Result<String, AbstractionError> {
    let table: BTreeMap<&str, &str> = bindings
        .iter()
        .map(|b| (b.symbol.as_str(), b.text.as_str()))
        .collect();
    let families: BTreeSet<&str> = bindings
        .iter()
        .filter_map(|b| {
            let p = b.symbol.trim_end_matches(|c: char| c.is_ascii_digit());
            (p.len() < b.symbol.len()).then_some(p)
        })
        .collect();
    let mut edits = Vec::new();
    for (span, name) in name_tokens(abstract_code) {
        if let Some(text) = table.get(name.as_str()) {
            edits.push(Edit::new(span, text.to_string()));
        } else if families.iter().any(|p| numbered(&name, p)) {
            return Err(AbstractionError::UnboundSymbol(name));
        }
    }
    Ok(splice(abstract_code, &edits).expect("token spans are disjoint"))
}

/// Identifier tokens with their spans. Text the lexer rejects is scanned
/// for identifier-shaped runs instead.
fn name_tokens(text: &str) -> Vec<(Span, String)> {
    if let Ok(tokens) = tokenize(text) {
        return tokens
            .into_iter()
            .filter(|t| t.class == TokenClass::Name)
            .map(|t| (t.span, t.span.slice(text).to_string()))
            .collect();
    }
    let bytes = text.as_bytes();
    let is_ident = |b: u8| b == b'_' || b.is_ascii_alphanumeric();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if is_ident(bytes[i]) && !bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && is_ident(bytes[i]) {
                i += 1;
            }
            out.push((Span::new(start, i), text[start..i].to_string()));
        } else if bytes[i].is_ascii_digit() {
            while i < bytes.len() && is_ident(bytes[i]) {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}
