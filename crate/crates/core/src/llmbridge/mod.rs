//! Prompting, response parsing and error extraction for LLM-based line
//! localization.

pub mod client;
pub mod errors;
pub mod prompt;
pub mod response;

pub use client::{ChatClient, EndpointConfig, Job, RecordedResponse, ResponseStore};
pub use errors::{
    extract_false_negatives, extract_false_positives, sample_cases, write_cases_csv, ErrorCase,
    ErrorKind,
};
pub use prompt::{build_prompt, render_diff, INSTRUCTION};
pub use response::{
    parse_response, to_ranking, FaultEntry, LocalizationResponse, ParsedResponse, MAX_ENTRIES,
};
