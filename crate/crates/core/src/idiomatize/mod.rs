//! Turning abstract non-idiomatic code into abstract idiomatic code.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractionResult;
use crate::analysis;
use crate::knowledge::IdiomKind;
use crate::syntax::{parse_expression, parse_source, CmpOp, Node, NodeKind, Role, Span};

mod chain;
mod llm;
pub mod prompts;
mod rules;

pub use chain::chain_two_compares;
pub use llm::{
    format_response, parse_response, request_sha256, EngineRequest, FixtureRecord, FixtureStore, LlmEngine, MalformedResponse,
    Transport,
};
pub use rules::{build_comprehension, DeterministicEngine};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum IdiomatizationOutcome {
    Accepted { code: String },
    Declined { reason: String },
}

impl IdiomatizationOutcome {
    pub fn declined(reason: impl Into<String>) -> Self {
        IdiomatizationOutcome::Declined { reason: reason.into() }
    }

    pub fn accepted(code: impl Into<String>) -> Self {
        IdiomatizationOutcome::Accepted { code: code.into() }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no fixture for request {0} and no endpoint configured")]
    Unavailable(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fixture store: {0}")]
    Fixtures(String),
}

/// Facts about the surrounding file that the abstract code alone lacks.
#[derive(Debug, Clone, Default)]
pub struct RuleContext {
    /// The call to wrap, for the with idiom, as a span of the abstract code.
    pub focus: Option<Span>,
    /// Names fresh identifiers must avoid.
    pub reserved: BTreeSet<String>,
    /// One level of indentation as used by the file.
    pub indent_unit: String,
}

#[derive(Debug, Clone)]
pub struct EngineInput {
    pub idiom: IdiomKind,
    pub abstraction: AbstractionResult,
    pub context: RuleContext,
}

pub trait Engine: Send + Sync {
    fn name(&self) -> &'static str;
    fn transform(&self, input: &EngineInput) -> Result<IdiomatizationOutcome, EngineError>;
}

/// Runs the engine and declines any accepted answer that lacks the idiom's
/// syntactic marker.
pub fn idiomatize(engine: &dyn Engine, input: &EngineInput) -> Result<IdiomatizationOutcome, EngineError> {
    let outcome = engine.transform(input)?;
    Ok(match outcome {
        IdiomatizationOutcome::Accepted { code } if !has_marker(input.idiom, &code) => {
            log::warn!("{} answer for {} lacks the idiom marker: {code:?}", engine.name(), input.idiom);
            IdiomatizationOutcome::declined(format!("answer does not use {}", input.idiom))
        }
        other => other,
    })
}

/// Does `code` parse (symbols read as names) and use the idiom?
pub fn has_marker(idiom: IdiomKind, code: &str) -> bool {
    use IdiomKind::*;
    let any = |root: &Node, pred: &dyn Fn(&Node) -> bool| root.descendants().any(pred);
    match idiom {
        ChainComparison => parse_expression(code).is_ok_and(|r| any(&r, &|n| n.compare_ops().len() >= 2)),
        TruthTest => parse_expression(code).is_ok_and(|r| {
            !any(&r, &|n| {
                n.compare_ops().iter().any(|o| matches!(o, CmpOp::Eq | CmpOp::NotEq))
                    && n.operands().iter().any(|o| analysis::is_empty_literal(o))
            })
        }),
        ListComprehension => parse_source(code).is_ok_and(|r| any(&r, &|n| n.kind == NodeKind::ListComp)),
        SetComprehension => parse_source(code).is_ok_and(|r| any(&r, &|n| n.kind == NodeKind::SetComp)),
        DictComprehension => parse_source(code).is_ok_and(|r| any(&r, &|n| n.kind == NodeKind::DictComp)),
        LoopElse => parse_source(code).is_ok_and(|r| {
            any(&r, &|n| n.kind.is_loop() && n.children_in(Role::OrElse).next().is_some())
        }),
        AssignMultiTargets => parse_source(code).is_ok_and(|r| {
            any(&r, &|n| {
                n.kind == NodeKind::Assign
                    && n.child(Role::Target)
                        .is_some_and(|t| t.kind == NodeKind::Tuple && t.children.len() >= 2)
            })
        }),
        ForMultiTargets => parse_source(code).is_ok_and(|r| {
            any(&r, &|n| {
                n.kind == NodeKind::For && n.child(Role::Target).is_some_and(|t| t.kind == NodeKind::Tuple)
            })
        }),
        StarInFuncCall => parse_expression(&format!("f({code})"))
            .is_ok_and(|r| analysis::call_args(&r).iter().any(|a| a.kind == NodeKind::Starred)),
        With => parse_source(code).is_ok_and(|r| any(&r, &|n| n.kind == NodeKind::With)),
        Enumerate => parse_source(code).is_ok_and(|r| {
            any(&r, &|n| {
                n.kind == NodeKind::For
                    && n.child(Role::Iter)
                        .is_some_and(|it| analysis::call_name(it) == Some("enumerate"))
            })
        }),
        ChainAssignSameValue => parse_source(code).is_ok_and(|r| {
            any(&r, &|n| n.kind == NodeKind::Assign && n.children_in(Role::Target).count() >= 2)
        }),
        Fstring => parse_expression(code).is_ok_and(|r| any(&r, &|n| analysis::is_other(n, "JoinedStr"))),
    }
}
