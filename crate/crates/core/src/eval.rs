//! Scoring produced code pairs against a benchmark of gold pairs.

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::idiomatize::Engine;
use crate::knowledge::IdiomKind;
use crate::pipeline::{refactor_source, Options};
use crate::syntax::tokens::normalize;
use crate::syntax::{parse_source, SourceFile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePair {
    pub non_idiomatic: String,
    pub idiomatic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub method_source: String,
    pub idiom: IdiomKind,
    pub gold_pairs: Vec<CodePair>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkEntry>, EvalError> {
    parse_benchmark(&std::fs::read_to_string(path)?)
}

/// Parses JSON lines; blank lines are skipped.
pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkEntry>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Format { line: i + 1, message };
        let entry: BenchmarkEntry = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        parse_source(&entry.method_source).map_err(|e| err(format!("method_source does not parse: {e}")))?;
        let haystack = token_words(&entry.method_source);
        for (k, pair) in entry.gold_pairs.iter().enumerate() {
            if !contains_run(&haystack, &token_words(&pair.non_idiomatic)) {
                return Err(err(format!("gold pair {k}: non_idiomatic code does not occur in method_source")));
            }
        }
        out.push(entry);
    }
    Ok(out)
}

/// Normalized tokens without layout tokens, so a fragment can be found
/// at any nesting depth.
fn token_words(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .filter(|w| !matches!(*w, "INDENT" | "DEDENT" | ""))
        .map(str::to_string)
        .collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Result of aligning produced pairs with gold pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    pub counts: ConfusionCounts,
    /// (produced, gold) indices of unmatched pairs that agree on the
    /// non-idiomatic side only.
    pub near_misses: Vec<(usize, usize)>,
}

fn pair_key(p: &CodePair) -> (String, String) {
    (normalize(&p.non_idiomatic), normalize(&p.idiomatic))
}

/// Greedy one-to-one matching in list order; both sides must be equal
/// after token normalization.
pub fn align(produced: &[CodePair], gold: &[CodePair]) -> Alignment {
    let gold_keys: Vec<_> = gold.iter().map(pair_key).collect();
    let mut gold_used = vec![false; gold.len()];
    let mut unmatched = Vec::new();
    let mut tp = 0;
    for (i, p) in produced.iter().enumerate() {
        let key = pair_key(p);
        match (0..gold.len()).find(|&j| !gold_used[j] && gold_keys[j] == key) {
            Some(j) => {
                gold_used[j] = true;
                tp += 1;
            }
            None => unmatched.push((i, key.0)),
        }
    }
    let mut near_misses = Vec::new();
    let mut near_used = vec![false; gold.len()];
    for (i, lhs) in &unmatched {
        if let Some(j) = (0..gold.len()).find(|&j| !gold_used[j] && !near_used[j] && gold_keys[j].0 == *lhs) {
            near_used[j] = true;
            near_misses.push((*i, j));
        }
    }
    Alignment {
        counts: ConfusionCounts {
            tp,
            fp: produced.len() as u64 - tp,
            fn_: gold.len() as u64 - tp,
        },
        near_misses,
    }
}

pub fn match_pairs(produced: &[CodePair], gold: &[CodePair]) -> ConfusionCounts {
    align(produced, gold).counts
}

/// Exact metric values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub accuracy: Ratio<u64>,
    pub precision: Ratio<u64>,
    pub recall: Ratio<u64>,
    pub f1: Ratio<u64>,
}

fn ratio(n: u64, d: u64) -> Ratio<u64> {
    if d == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(n, d)
    }
}

pub fn compute_metrics(c: ConfusionCounts) -> Metrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let sum = precision + recall;
    let f1 = if sum == Ratio::from_integer(0) {
        sum
    } else {
        Ratio::from_integer(2) * precision * recall / sum
    };
    Metrics {
        accuracy: ratio(c.tp, c.tp + c.fp + c.fn_),
        precision,
        recall,
        f1,
    }
}

pub fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Four-decimal display form.
pub fn display(r: Ratio<u64>) -> String {
    format!("{:.4}", to_f64(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsRow {
    pub fn new(counts: ConfusionCounts) -> Self {
        let m = compute_metrics(counts);
        MetricsRow {
            counts,
            accuracy: to_f64(m.accuracy),
            precision: to_f64(m.precision),
            recall: to_f64(m.recall),
            f1: to_f64(m.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearMiss {
    pub entry: usize,
    pub idiom: IdiomKind,
    pub produced: CodePair,
    pub gold: CodePair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub idioms: BTreeMap<IdiomKind, MetricsRow>,
    pub total: MetricsRow,
    pub near_misses: Vec<NearMiss>,
    /// Entries the pipeline could not process, with the reason.
    pub errors: Vec<String>,
}

struct EntryResult {
    alignment: Alignment,
    produced: Vec<CodePair>,
    errors: Vec<String>,
}

fn evaluate_entry(index: usize, entry: &BenchmarkEntry, engine: &dyn Engine, max_passes: usize) -> EntryResult {
    let options = Options {
        idioms: vec![entry.idiom],
        max_passes,
    };
    let source = SourceFile::new(format!("entry-{index}.py"), entry.method_source.clone());
    let (produced, mut errors) = match refactor_source(source, engine, &options) {
        Ok(r) => {
            let produced = r
                .candidates
                .iter()
                .map(|c| CodePair {
                    non_idiomatic: c.non_idiomatic.clone(),
                    idiomatic: c.idiomatic.clone(),
                })
                .collect();
            (produced, r.engine_errors)
        }
        Err(e) => (Vec::new(), vec![e.to_string()]),
    };
    for e in &mut errors {
        *e = format!("entry {index}: {e}");
    }
    EntryResult {
        alignment: align(&produced, &entry.gold_pairs),
        produced,
        errors,
    }
}

/// Runs the pipeline on every entry, restricted to the entry's idiom, and
/// scores the rewrites. Entries are spread over `jobs` threads; the report
/// does not depend on scheduling.
pub fn evaluate(entries: &[BenchmarkEntry], engine: &dyn Engine, max_passes: usize, jobs: usize) -> EvalReport {
    let jobs = jobs.clamp(1, entries.len().max(1));
    let chunk = entries.len().div_ceil(jobs).max(1);
    let results: Vec<EntryResult> = std::thread::scope(|s| {
        let handles: Vec<_> = entries
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(k, e)| evaluate_entry(c * chunk + k, e, engine, max_passes))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation thread panicked")).collect()
    });

    let mut per_idiom: BTreeMap<IdiomKind, ConfusionCounts> = BTreeMap::new();
    let mut near_misses = Vec::new();
    let mut errors = Vec::new();
    for (i, (entry, r)) in entries.iter().zip(results).enumerate() {
        let slot = per_idiom.entry(entry.idiom).or_default();
        *slot = *slot + r.alignment.counts;
        for (p, g) in r.alignment.near_misses {
            near_misses.push(NearMiss {
                entry: i,
                idiom: entry.idiom,
                produced: r.produced[p].clone(),
                gold: entry.gold_pairs[g].clone(),
            });
        }
        errors.extend(r.errors);
    }
    let total = per_idiom.values().fold(ConfusionCounts::default(), |a, b| a + *b);
    EvalReport {
        idioms: per_idiom.into_iter().map(|(k, c)| (k, MetricsRow::new(c))).collect(),
        total: MetricsRow::new(total),
        near_misses,
        errors,
    }
}
