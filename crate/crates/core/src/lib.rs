//! Detects non-idiomatic Python fragments and rewrites them into Pythonic
//! idioms.

pub mod abstraction;
pub mod analysis;
pub mod eval;
pub mod extract;
pub mod idiomatize;
pub mod knowledge;
pub mod pipeline;
pub mod rewrite;
pub mod syntax;

pub use abstraction::{AbstractionResult, Binding};
pub use extract::{find_sites, MatchSite, ParsedFile};
pub use idiomatize::{
    DeterministicEngine, Engine, EngineError, FixtureStore, IdiomatizationOutcome, LlmEngine, Transport,
};
pub use knowledge::{IdiomKind, IdiomSpec};
pub use pipeline::{detect_source, refactor_source, FileResult, Options, SiteReport, SiteStatus};
pub use rewrite::{unified_diff, RefactoringCandidate};
pub use syntax::{SourceFile, Span};
