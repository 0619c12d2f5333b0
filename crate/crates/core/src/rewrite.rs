//! Turning an idiomatic fragment back into an edit of the original file.

use serde::Serialize;
use similar::TextDiff;
use thiserror::Error;

use crate::abstraction::{restore, AbstractionError, Binding};
use crate::extract::{MatchSite, ParsedFile};
use crate::knowledge::IdiomKind;
use crate::syntax::tokens::comment_spans;
use crate::syntax::{
    dedent_common, line_indent, parse_source, reindent_block, splice, Edit, OverlappingEdits, Span, SyntaxError,
};

#[derive(Debug, Clone, Serialize)]
pub struct RefactoringCandidate {
    pub site: MatchSite,
    /// Source lines touched by the rewrite, before and after, dedented.
    pub non_idiomatic: String,
    pub idiomatic: String,
    pub edits: Vec<Edit>,
    pub diff: String,
    /// The whole file with only this rewrite applied.
    pub new_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Restore(#[from] AbstractionError),
    #[error("a comment inside the rewritten region cannot be kept")]
    CommentsLost,
    #[error(transparent)]
    Overlap(#[from] OverlappingEdits),
    #[error("rewritten file does not parse: {0}")]
    ResultUnparseable(SyntaxError),
}

pub const LOOP_ELSE_NOTE: &str =
    "semantic caveat: the else clause also runs when the loop body never executes";

/// Does the idiom replace whole statements (as opposed to an expression)?
pub fn is_statement_level(idiom: IdiomKind) -> bool {
    use IdiomKind::*;
    matches!(
        idiom,
        ListComprehension
            | SetComprehension
            | DictComprehension
            | LoopElse
            | AssignMultiTargets
            | ForMultiTargets
            | With
            | Enumerate
            | ChainAssignSameValue
    )
}

/// The region of `file` the site's rewrite replaces.
pub fn edit_region(file: &ParsedFile, site: &MatchSite) -> Span {
    match site.idiom {
        IdiomKind::ChainComparison => file.outer(&site.components[0]).cover(file.outer(&site.components[1])),
        IdiomKind::With => site.host.as_ref().map_or(site.components[0].span, |h| h.span),
        _ => site.span(),
    }
}

/// Edits that put `code` (concrete, restored) in place of the site.
pub fn plan_edits(file: &ParsedFile, site: &MatchSite, code: &str) -> Result<Vec<Edit>, RewriteError> {
    let text = file.text();
    if site.idiom == IdiomKind::ChainComparison {
        // Keep the first conjunct's position: drop `c1 and `, replace c2.
        let c1 = file.outer(&site.components[0]);
        let c2 = file.outer(&site.components[1]);
        let lost = lost_comments(text, Span::new(c1.start, c2.end), code);
        if !lost.is_empty() {
            return Err(RewriteError::CommentsLost);
        }
        return Ok(vec![
            Edit::new(Span::new(c1.start, c2.start), ""),
            Edit::new(c2, code),
        ]);
    }
    let span = edit_region(file, site);
    if !is_statement_level(site.idiom) {
        if !lost_comments(text, span, code).is_empty() {
            return Err(RewriteError::CommentsLost);
        }
        return Ok(vec![Edit::new(span, code)]);
    }
    let indent = line_indent(text, span.start);
    let mut replacement = String::new();
    let lost = lost_comments(text, span, code);
    if !lost.is_empty() {
        let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
        if !text[line_start..span.start].trim().is_empty() {
            return Err(RewriteError::CommentsLost);
        }
        for c in lost {
            replacement.push_str(c);
            replacement.push('\n');
            replacement.push_str(indent);
        }
    }
    replacement.push_str(&reindent_block(code.trim_end(), indent));
    Ok(vec![Edit::new(span, replacement)])
}

/// Comments inside `span` whose text the replacement does not carry.
fn lost_comments<'a>(text: &'a str, span: Span, replacement: &str) -> Vec<&'a str> {
    comment_spans(text)
        .into_iter()
        .filter(|c| span.contains(*c))
        .map(|c| c.slice(text))
        .filter(|c| !replacement.contains(c))
        .collect()
}

/// Restores symbols in `abstract_code`, splices it over the site and checks
/// that the file still parses.
pub fn rewrite_site(
    file: &ParsedFile,
    site: &MatchSite,
    abstract_code: &str,
    bindings: &[Binding],
) -> Result<RefactoringCandidate, RewriteError> {
    let code = restore(abstract_code, bindings)?;
    let edits = plan_edits(file, site, &code)?;
    let text = file.text();
    let new_source = splice(text, &edits)?;
    parse_source(&new_source).map_err(RewriteError::ResultUnparseable)?;

    let start = edits.iter().map(|e| e.span.start).min().unwrap_or(0);
    let end = edits.iter().map(|e| e.span.end).max().unwrap_or(0);
    let before = line_region(text, Span::new(start, end));
    let delta = new_source.len() as isize - text.len() as isize;
    let after = Span::new(before.start, (before.end as isize + delta) as usize);
    Ok(RefactoringCandidate {
        site: site.clone(),
        non_idiomatic: dedent_common(before.slice(text)),
        idiomatic: dedent_common(after.slice(&new_source)),
        diff: unified_diff(text, &new_source, &display_path(&file.source.path)),
        note: (site.idiom == IdiomKind::LoopElse).then(|| LOOP_ELSE_NOTE.to_string()),
        edits,
        new_source,
    })
}

/// `span` widened to whole lines, without the final line break.
fn line_region(text: &str, span: Span) -> Span {
    let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
    let end = text[span.end..].find('\n').map_or(text.len(), |i| span.end + i);
    Span::new(start, end)
}

/// Forward-slash path without a leading `./`.
pub fn display_path(path: &std::path::Path) -> String {
    let s = path.to_string_lossy().replace('\\', "/");
    match s.strip_prefix("./") {
        Some(rest) => rest.to_string(),
        None => s,
    }
}

/// Unified diff with three lines of context; empty when the texts agree.
pub fn unified_diff(before: &str, after: &str, path: &str) -> String {
    let before = before.replace("\r\n", "\n");
    let after = after.replace("\r\n", "\n");
    if before == after {
        return String::new();
    }
    let path = path.trim_start_matches('/');
    TextDiff::from_lines(&before, &after)
        .unified_diff()
        .context_radius(3)
        .header(&format!("a/{path}"), &format!("b/{path}"))
        .to_string()
}
