use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use globset::{Glob, GlobSet, GlobSetBuilder};
use walkdir::WalkDir;

pub const DEFAULT_INCLUDE: &[&str] = &["**/*.py"];

fn glob_set(patterns: &[String]) -> Result<GlobSet> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        b.add(Glob::new(p).with_context(|| format!("bad glob `{p}`"))?);
    }
    Ok(b.build()?)
}

pub struct Selection {
    pub files: Vec<PathBuf>,
    /// Walk failures, reported like per-file errors.
    pub errors: Vec<(PathBuf, String)>,
}

/// Python files under `roots` in lexicographic order. Files named directly
/// are always taken; directory contents must match an include glob and no
/// exclude glob, both relative to the directory given.
pub fn collect(roots: &[PathBuf], include: &[String], exclude: &[String]) -> Result<Selection> {
    let include = glob_set(include)?;
    let exclude = glob_set(exclude)?;
    let mut files = Vec::new();
    let mut errors = Vec::new();
    for root in roots {
        if !root.exists() {
            anyhow::bail!("{}: no such file or directory", root.display());
        }
        if root.is_file() {
            files.push(root.clone());
            continue;
        }
        let walker = WalkDir::new(root).follow_links(false).into_iter();
        for entry in walker.filter_entry(|e| !excluded_dir(root, e.path(), &exclude)) {
            match entry {
                Ok(e) if e.file_type().is_file() => {
                    let rel = e.path().strip_prefix(root).unwrap_or(e.path());
                    if include.is_match(rel) && !exclude.is_match(rel) {
                        files.push(e.into_path());
                    }
                }
                Ok(_) => {}
                Err(err) => {
                    let path = err.path().map(Path::to_path_buf).unwrap_or_else(|| root.clone());
                    errors.push((path, err.to_string()));
                }
            }
        }
    }
    files.sort();
    files.dedup();
    Ok(Selection { files, errors })
}

fn excluded_dir(root: &Path, path: &Path, exclude: &GlobSet) -> bool {
    path != root && path.is_dir() && exclude.is_match(path.strip_prefix(root).unwrap_or(path))
}
