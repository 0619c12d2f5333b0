//! A thin, stable view over the Python parser.
//!
//! The parser's full node set is projected onto [`Node`], which keeps byte
//! spans into the original text. All rewriting happens on raw text through
//! [`splice`], so formatting and comments outside edited regions never move.

mod indent;
mod lower;
mod node;
mod splice;
pub mod tokens;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use indent::{dedent_block, dedent_common, indent_unit, line_indent, reindent_block};
pub use node::{
    Attrs, BinOpKind, BoolOpKind, CmpOp, Ctx, Literal, Node, NodeKind, Role, UnaryOpKind,
};
pub use splice::{splice, Edit, OverlappingEdits};

/// Half-open byte range `[start, end)` into UTF-8 source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} > end {end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersects(&self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn cover(&self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// 1-based line and column; the column counts characters, not bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCol {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file is not valid UTF-8")]
    NotUtf8 { path: PathBuf },
}

/// A Python source file held verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
    newline_index: Vec<usize>,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        let text = text.into();
        let newline_index = line_starts(&text);
        SourceFile {
            path: path.into(),
            text,
            newline_index,
        }
    }

    pub fn read(path: &Path) -> Result<Self, SourceError> {
        let bytes = std::fs::read(path).map_err(|source| SourceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let text = String::from_utf8(bytes).map_err(|_| SourceError::NotUtf8 {
            path: path.to_path_buf(),
        })?;
        Ok(SourceFile::new(path, text))
    }

    /// Byte offsets at which each line starts. Entry 0 is always 0.
    pub fn newline_index(&self) -> &[usize] {
        &self.newline_index
    }

    pub fn line_col(&self, offset: usize) -> LineCol {
        let line = match self.newline_index.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let start = self.newline_index[line];
        let col = self.text[start..offset.min(self.text.len())].chars().count() + 1;
        LineCol {
            line: line + 1,
            col,
        }
    }
}

fn line_starts(text: &str) -> Vec<usize> {
    let mut starts = vec![0];
    starts.extend(
        text.bytes()
            .enumerate()
            .filter(|&(_, b)| b == b'\n')
            .map(|(i, _)| i + 1),
    );
    starts
}

/// Parses a whole module. The returned root has kind [`NodeKind::Module`]
/// and spans the entire text.
pub fn parse_source(text: &str) -> Result<Node, SyntaxError> {
    lower::parse_module(text)
}

/// Parses a single expression, e.g. an abstract code fragment.
pub fn parse_expression(text: &str) -> Result<Node, SyntaxError> {
    lower::parse_expression(text)
}

pub fn node_text<'a>(node: &Node, file: &'a SourceFile) -> &'a str {
    node.span.slice(&file.text)
}

pub(crate) fn syntax_error_at(text: &str, offset: usize, message: String) -> SyntaxError {
    let file = SourceFile::new("", text);
    let lc = file.line_col(offset.min(text.len()));
    SyntaxError {
        line: lc.line,
        col: lc.col,
        message,
    }
}
