//! Settings from `idiomizer.json`, merged under command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use idiomizer_core::IdiomKind;
use serde::Deserialize;

pub const CONFIG_FILE: &str = "idiomizer.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Deterministic,
    Llm,
    Replay,
}

/// Every key is optional; unknown keys are rejected so typos surface.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub idioms: Option<Vec<String>>,
    pub engine: Option<EngineKind>,
    pub max_passes: Option<usize>,
    pub fixtures: Option<PathBuf>,
    pub include: Option<Vec<String>>,
    pub exclude: Option<Vec<String>>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: FileConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative fixture paths are relative to the config file.
        if let (Some(f), Some(dir)) = (&cfg.fixtures, path.parent()) {
            if f.is_relative() {
                cfg.fixtures = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    /// `explicit`, or the nearest `idiomizer.json` from the working
    /// directory up to the enclosing repository root.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        let mut dir = std::env::current_dir().ok();
        while let Some(d) = dir {
            let candidate = d.join(CONFIG_FILE);
            if candidate.is_file() {
                log::debug!("using {}", candidate.display());
                return Self::load(&candidate);
            }
            if d.join(".git").exists() {
                break;
            }
            dir = d.parent().map(Path::to_path_buf);
        }
        Ok(FileConfig::default())
    }
}

pub fn parse_idioms(names: &[String]) -> Result<Vec<IdiomKind>> {
    let mut out = Vec::new();
    for n in names {
        let kind: IdiomKind = n.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    out.sort();
    Ok(out)
}

/// Flag value if given, else config value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn resolve_idioms(flags: &[String], file: &Option<Vec<String>>) -> Result<Vec<IdiomKind>> {
    let names = if !flags.is_empty() { Some(flags.to_vec()) } else { file.clone() };
    match names {
        Some(n) if !n.is_empty() => parse_idioms(&n),
        _ => Ok(IdiomKind::ALL.to_vec()),
    }
}

pub fn check_max_passes(n: usize) -> Result<usize> {
    if n == 0 {
        bail!("--max-passes must be at least 1");
    }
    Ok(n)
}
