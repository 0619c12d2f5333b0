use serde::{Deserialize, Serialize};

use super::Span;

/// Replace `span` of the original text with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub span: Span,
    pub replacement: String,
}

impl Edit {
    pub fn new(span: Span, replacement: impl Into<String>) -> Self {
        Edit {
            span,
            replacement: replacement.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("edits overlap at {first} and {second}")]
pub struct OverlappingEdits {
    pub first: Span,
    pub second: Span,
}

/// Applies non-overlapping edits to `text`. Edits may be given in any order;
/// two insertions at the same offset are applied in the order given.
pub fn splice(text: &str, edits: &[Edit]) -> Result<String, OverlappingEdits> {
    let mut order: Vec<&Edit> = edits.iter().collect();
    order.sort_by_key(|e| (e.span.start, e.span.end));
    for pair in order.windows(2) {
        let (a, b) = (pair[0].span, pair[1].span);
        if a.end > b.start {
            return Err(OverlappingEdits { first: a, second: b });
        }
    }
    for e in &order {
        assert!(
            e.span.end <= text.len()
                && text.is_char_boundary(e.span.start)
                && text.is_char_boundary(e.span.end),
            "edit span {} out of bounds",
            e.span
        );
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for e in order {
        out.push_str(&text[cursor..e.span.start]);
        out.push_str(&e.replacement);
        cursor = e.span.end;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}
