//! Event scripts.
//!
//! ```json
//! {"events": [
//!   {"type": "generator_outage", "id": 3},
//!   {"type": "load_scale", "factor": 1.1},
//!   {"type": "replace_case", "case": "after.json"}
//! ]}
//! ```
//!
//! `replace_case` paths are resolved against the script's directory.

use std::path::Path;

use serde::Deserialize;

use crate::error::Result;
use crate::io::case_file::{from_json, read_case_document, read_text};
use crate::orchestrator::{Event, EventScript};

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum EventRecord {
    GeneratorOutage { id: u32 },
    BranchOutage { id: u32 },
    LoadScale { factor: f64 },
    LoadOverride {
        id: u32,
        p0: f64,
        #[serde(default)]
        q0: f64,
    },
    ReplaceCase { case: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    events: Vec<EventRecord>,
}

/// Parses a script; `base_dir` anchors relative case paths.
pub fn parse_events_str(text: &str, base_dir: &Path) -> Result<EventScript> {
    let file: ScriptFile = from_json(text)?;
    let events = file
        .events
        .into_iter()
        .map(|r| {
            Ok(match r {
                EventRecord::GeneratorOutage { id } => Event::GeneratorOutage { id },
                EventRecord::BranchOutage { id } => Event::BranchOutage { id },
                EventRecord::LoadScale { factor } => Event::LoadScale { factor },
                EventRecord::LoadOverride { id, p0, q0 } => Event::LoadOverride { id, p0, q0 },
                EventRecord::ReplaceCase { case } => {
                    Event::ReplaceCase(Box::new(read_case_document(base_dir.join(case))?))
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EventScript { events })
}

pub fn parse_events(path: impl AsRef<Path>) -> Result<EventScript> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_events_str(&read_text(path)?, dir)
}
