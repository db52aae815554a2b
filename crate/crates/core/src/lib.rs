//! Fine-grained fact verification: extract fact triples from text, retrieve
//! evidence from a knowledge graph and the web, label each fact, and propose
//! evidence-grounded rewrites.

pub mod benchmark;
pub mod config;
pub mod demo;
pub mod extraction;
pub mod http;
pub mod llm;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod qgen;
pub mod retrieval;
pub mod revision;
pub mod text;
pub mod verification;

pub use config::{ConfigOverrides, PipelineConfig};
pub use model::{Triple, Verdict, VerdictLabel, VerificationReport};
pub use pipeline::{Engine, PipelineError};
