//! Bundled fixtures: a small KG snapshot, recorded web results and a
//! scripted LLM, enough to run the worked examples end to end offline.

use crate::llm::ScriptEntry;
use crate::retrieval::{KgSnapshot, WebFixture};

pub const KG_TSV: &str = include_str!("../data/demo/kg.tsv");
pub const ALIASES_TSV: &str = include_str!("../data/demo/aliases.tsv");
pub const WEB_JSON: &str = include_str!("../data/demo/web.json");
pub const LLM_SCRIPT_JSON: &str = include_str!("../data/demo/llm_script.json");

/// Passages the scripted LLM knows how to process.
pub const PASSAGES: [&str; 3] = [
    "United States is in North America and has 51 states",
    "Taylor Swift is 30 years old.",
    "Taylor Swift moved to Nashville at the age of 14.",
];

/// The question the scripted LLM answers in the ask view.
pub const ASK_QUERY: &str = "How old is Taylor Swift?";

pub fn kg_snapshot() -> KgSnapshot {
    KgSnapshot::parse(KG_TSV, Some(ALIASES_TSV)).expect("bundled snapshot parses")
}

pub fn web_fixture() -> WebFixture {
    WebFixture::from_json(WEB_JSON).expect("bundled web fixture parses")
}

pub fn llm_script() -> Vec<ScriptEntry> {
    serde_json::from_str(LLM_SCRIPT_JSON).expect("bundled LLM script parses")
}
