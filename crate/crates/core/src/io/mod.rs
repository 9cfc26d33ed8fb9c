//! File formats: native JSON cases, event scripts, MATPOWER import, results.

pub mod case_file;
pub mod events;
pub mod matpower;
pub mod results;

pub use case_file::{case_to_json, parse_case, parse_case_str, read_case_document, write_case, CaseFile};
pub use events::{parse_events, parse_events_str};
pub use matpower::{import_matpower, import_matpower_str, parse_matpower, Sidecar};
pub use results::{
    to_precise_json, write_generator_csv, write_generator_csv_file, write_results, ResultsFile, StageRecord,
};
