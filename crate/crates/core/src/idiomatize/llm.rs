//! Remote-model engine with a record/replay fixture store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::knowledge::IdiomKind;

use super::{prompts, Engine, EngineError, EngineInput, IdiomatizationOutcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineRequest {
    pub idiom: IdiomKind,
    pub prompt: String,
    pub abstract_code: String,
    pub temperature: f64,
}

impl EngineRequest {
    pub fn new(idiom: IdiomKind, abstract_code: &str) -> Self {
        EngineRequest {
            idiom,
            prompt: prompts::render(idiom),
            abstract_code: abstract_code.to_string(),
            temperature: 0.0,
        }
    }

    pub fn sha256(&self) -> String {
        request_sha256(self.idiom, &self.prompt, &self.abstract_code)
    }

    /// The single user message sent to the model.
    pub fn message(&self) -> String {
        prompts::message(&self.prompt, &self.abstract_code)
    }
}

pub fn request_sha256(idiom: IdiomKind, prompt: &str, abstract_code: &str) -> String {
    let mut h = Sha256::new();
    for part in [idiom.name(), prompt, abstract_code] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

/// One stored exchange, one JSON object per line on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub request_sha256: String,
    pub idiom: IdiomKind,
    pub prompt: String,
    pub abstract_code: String,
    pub response: String,
}

impl FixtureRecord {
    pub fn new(request: &EngineRequest, response: impl Into<String>) -> Self {
        FixtureRecord {
            request_sha256: request.sha256(),
            idiom: request.idiom,
            prompt: request.prompt.clone(),
            abstract_code: request.abstract_code.clone(),
            response: response.into(),
        }
    }
}

/// Responses keyed by request hash. Reads are shared; appends go through a
/// single writer.
#[derive(Debug, Default)]
pub struct FixtureStore {
    path: Option<PathBuf>,
    records: RwLock<BTreeMap<String, FixtureRecord>>,
    writer: Mutex<Option<File>>,
}

impl FixtureStore {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Loads a JSON-lines store. A missing file is an empty store that new
    /// records will create.
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let mut records = BTreeMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| EngineError::Fixtures(format!("{}: {e}", path.display())))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| EngineError::Fixtures(format!("{}: {e}", path.display())))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: FixtureRecord = serde_json::from_str(&line)
                    .map_err(|e| EngineError::Fixtures(format!("{}:{}: {e}", path.display(), n + 1)))?;
                let expected = request_sha256(rec.idiom, &rec.prompt, &rec.abstract_code);
                if rec.request_sha256 != expected {
                    return Err(EngineError::Fixtures(format!("{}:{}: hash does not match request", path.display(), n + 1)));
                }
                records.entry(rec.request_sha256.clone()).or_insert(rec);
            }
        }
        Ok(FixtureStore {
            path: Some(path.to_path_buf()),
            records: RwLock::new(records),
            writer: Mutex::new(None),
        })
    }

    pub fn get(&self, sha: &str) -> Option<String> {
        self.records.read().unwrap().get(sha).map(|r| r.response.clone())
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<FixtureRecord> {
        self.records.read().unwrap().values().cloned().collect()
    }

    /// Adds a record, appending it to the backing file when there is one.
    pub fn insert(&self, record: FixtureRecord) -> Result<(), EngineError> {
        let mut writer = self.writer.lock().unwrap();
        {
            let mut records = self.records.write().unwrap();
            if records.contains_key(&record.request_sha256) {
                return Ok(());
            }
            records.insert(record.request_sha256.clone(), record.clone());
        }
        let Some(path) = &self.path else {
            return Ok(());
        };
        if writer.is_none() {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| EngineError::Fixtures(format!("{}: {e}", path.display())))?;
            *writer = Some(file);
        }
        let line = serde_json::to_string(&record).expect("fixture records serialize");
        let file = writer.as_mut().unwrap();
        writeln!(file, "{line}").map_err(|e| EngineError::Fixtures(format!("{}: {e}", path.display())))
    }

    /// Writes every record, sorted by hash, replacing the file.
    pub fn write_sorted(&self, path: &Path) -> Result<(), EngineError> {
        let mut out = String::new();
        for rec in self.records() {
            out.push_str(&serde_json::to_string(&rec).expect("fixture records serialize"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| EngineError::Fixtures(format!("{}: {e}", path.display())))
    }
}

/// Sends one request to a model and returns the raw reply text.
pub trait Transport: Send + Sync {
    fn complete(&self, request: &EngineRequest) -> Result<String, EngineError>;
}

/// Looks answers up in the fixture store, falling back to the transport
/// when there is one.
pub struct LlmEngine {
    fixtures: std::sync::Arc<FixtureStore>,
    transport: Option<Box<dyn Transport>>,
    record: bool,
}

impl LlmEngine {
    /// Fixture-only engine; it never touches the network.
    pub fn replay(fixtures: std::sync::Arc<FixtureStore>) -> Self {
        LlmEngine {
            fixtures,
            transport: None,
            record: false,
        }
    }

    pub fn live(fixtures: std::sync::Arc<FixtureStore>, transport: Box<dyn Transport>, record: bool) -> Self {
        LlmEngine {
            fixtures,
            transport: Some(transport),
            record,
        }
    }

    pub fn complete(&self, request: &EngineRequest) -> Result<String, EngineError> {
        let sha = request.sha256();
        if let Some(response) = self.fixtures.get(&sha) {
            return Ok(response);
        }
        let transport = self.transport.as_ref().ok_or_else(|| EngineError::Unavailable(sha.clone()))?;
        let response = transport.complete(request)?;
        if self.record {
            self.fixtures.insert(FixtureRecord::new(request, response.clone()))?;
        }
        Ok(response)
    }
}

impl Engine for LlmEngine {
    fn name(&self) -> &'static str {
        if self.transport.is_some() {
            "llm"
        } else {
            "replay"
        }
    }

    fn transform(&self, input: &EngineInput) -> Result<IdiomatizationOutcome, EngineError> {
        let request = EngineRequest::new(input.idiom, &input.abstraction.abstract_code);
        let raw = self.complete(&request)?;
        Ok(parse_response(&raw).unwrap_or_else(|e| {
            log::warn!("unparseable reply for {}: {}", input.idiom, e.0);
            IdiomatizationOutcome::declined(format!("malformed response: {}", e.0))
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedResponse(pub String);

/// Reads a Yes/No verdict from the first line and, after Yes, the code
/// from the first fenced block.
pub fn parse_response(raw: &str) -> Result<IdiomatizationOutcome, MalformedResponse> {
    let text = raw.trim();
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let verdict: String = first
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase();
    match verdict.as_str() {
        "yes" => fenced_block(rest)
            .map(IdiomatizationOutcome::accepted)
            .ok_or_else(|| MalformedResponse("Yes without a fenced code block".into())),
        "no" => {
            let reason = rest.trim();
            let reason = if reason.is_empty() { first.trim() } else { reason };
            Ok(IdiomatizationOutcome::declined(reason.to_string()))
        }
        _ => Err(MalformedResponse(format!("no Yes/No verdict in {first:?}"))),
    }
}

/// A reply in the shape [`parse_response`] reads.
pub fn format_response(outcome: &IdiomatizationOutcome) -> String {
    match outcome {
        IdiomatizationOutcome::Accepted { code } => format!("Yes\n```python\n{}\n```\n", code.trim_end()),
        IdiomatizationOutcome::Declined { reason } => format!("No\n{reason}\n"),
    }
}

fn fenced_block(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim_end_matches(['\n', '\r']).to_string())
}
