//! Regenerates the shipped fixture store from the deterministic engine.
//!
//!     cargo run -p idiomizer --example author_fixtures -- fixtures/benchmark.jsonl fixtures/responses.jsonl

use std::path::PathBuf;

use idiomizer_core::eval::{evaluate, load_benchmark};
use idiomizer_core::idiomatize::{format_response, EngineInput, EngineRequest, FixtureRecord};
use idiomizer_core::{DeterministicEngine, Engine, EngineError, FixtureStore, IdiomatizationOutcome};

/// Answers with the rule engine and keeps every exchange.
struct Recorder {
    store: FixtureStore,
}

impl Engine for Recorder {
    fn name(&self) -> &'static str {
        "recorder"
    }

    fn transform(&self, input: &EngineInput) -> Result<IdiomatizationOutcome, EngineError> {
        let outcome = DeterministicEngine.transform(input)?;
        let request = EngineRequest::new(input.idiom, &input.abstraction.abstract_code);
        self.store.insert(FixtureRecord::new(&request, format_response(&outcome)))?;
        Ok(outcome)
    }
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let (Some(benchmark), Some(out)) = (args.next(), args.next()) else {
        anyhow::bail!("usage: author_fixtures <benchmark.jsonl> <responses.jsonl>");
    };
    let entries = load_benchmark(&benchmark)?;
    let recorder = Recorder { store: FixtureStore::empty() };
    let report = evaluate(&entries, &recorder, 1, 1);
    recorder.store.write_sorted(&out)?;
    eprintln!("{} responses; total f1 {:.4}", recorder.store.len(), report.total.f1);
    Ok(())
}
