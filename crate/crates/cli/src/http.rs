//! Chat-completions transport for the remote engine.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use idiomizer_core::idiomatize::EngineRequest;
use idiomizer_core::{EngineError, Transport};
use serde_json::json;

pub const ENDPOINT_VAR: &str = "IDIOMIZER_LLM_ENDPOINT";
pub const KEY_VAR: &str = "IDIOMIZER_LLM_KEY";
pub const MODEL_VAR: &str = "IDIOMIZER_LLM_MODEL";
const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const MAX_IN_FLIGHT: usize = 4;
const ATTEMPTS: u32 = 3;

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GatePermit(self)
    }
}

struct GatePermit<'a>(&'a Gate);

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    key: Option<String>,
    model: String,
    gate: Gate,
}

impl HttpTransport {
    /// Built from the environment; `None` when no endpoint is set.
    pub fn from_env() -> anyhow::Result<Option<Self>> {
        let Ok(endpoint) = std::env::var(ENDPOINT_VAR) else {
            return Ok(None);
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()?;
        Ok(Some(HttpTransport {
            client,
            endpoint,
            key: std::env::var(KEY_VAR).ok(),
            model: std::env::var(MODEL_VAR).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
            gate: Gate {
                free: Mutex::new(MAX_IN_FLIGHT),
                cv: Condvar::new(),
            },
        }))
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        let _permit = self.gate.acquire();
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, format!("HTTP {status}")));
        }
        let v: serde_json::Value = resp.json().map_err(|e| (false, e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or((false, "reply has no choices[0].message.content".to_string()))
    }
}

impl Transport for HttpTransport {
    fn complete(&self, request: &EngineRequest) -> Result<String, EngineError> {
        let body = json!({
            "model": self.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.message()}],
        });
        let mut last = String::new();
        for attempt in 0..ATTEMPTS {
            match self.send_once(&body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    log::warn!("request {} attempt {}: {msg}", &request.sha256()[..12], attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                    std::thread::sleep(Duration::from_millis(500 << attempt));
                }
            }
        }
        Err(EngineError::Transport(last))
    }
}
