//! The end-to-end engine: split, extract, generate questions, retrieve,
//! decide; and revision of a finished report.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::config::{ConfigError, ConfigOverrides, KgConfig, LlmConfig, PipelineConfig, WebConfig};
use crate::demo;
use crate::extraction::{align_span, extract_facts, partition_extended, split_sentences, ExtractionError, Sentence};
use crate::llm::{
    Gateway, GatewayError, HttpBackend, HttpBackendConfig, LlmBackend, MockBackend, PromptBank, ScriptEntry,
};
use crate::model::{
    CharSpan, ExtractionDiagnostics, Origin, Provenance, SentenceReport, Triple, Verdict, VerdictLabel,
    VerdictNote, VerificationReport,
};
use crate::qgen::generate_question;
use crate::retrieval::{
    query_kg, query_web, HttpKg, HttpWeb, KgAdapter, KgAnswerSet, KgSnapshot, SnapshotKg, WebAdapter,
    WebFixture,
};
use crate::revision::{propose_revisions, RevisionNote, RevisionProposal};
use crate::verification::{decide, GatewayJudge};

pub const ENGINE_VERSION: &str = concat!("factforge ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input text is empty")]
    EmptyInput,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build pipeline: {0}")]
    Build(String),
    #[error(transparent)]
    Backend(GatewayError),
    #[error("budget of {0:?} exhausted before any sentence finished")]
    BudgetExhausted(Duration),
    #[error("report was produced under config digest {found}, expected {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error("report has no Questionable fact to revise")]
    NoQuestionable,
}

impl PipelineError {
    /// Failures of an external backend rather than of the input.
    pub fn is_backend(&self) -> bool {
        matches!(self, PipelineError::Backend(_))
    }
}

/// Revision proposals for one sentence of a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRevisionOutcome {
    pub index: usize,
    pub text: String,
    pub proposals: Vec<RevisionProposal>,
    pub notes: Vec<RevisionNote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionOutcome {
    pub sentences: Vec<SentenceRevisionOutcome>,
}

impl RevisionOutcome {
    pub fn proposal_count(&self) -> usize {
        self.sentences.iter().map(|s| s.proposals.len()).sum()
    }

    /// Copies the proposals into the matching sentences of `report`.
    pub fn apply_to(&self, report: &mut VerificationReport) {
        for s in &self.sentences {
            if let Some(target) = report.sentences.iter_mut().find(|r| r.index == s.index) {
                target.revisions = s.proposals.clone();
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Config,
    Parts,
}

/// A configured pipeline. Cheap to clone; adapters are shared.
#[derive(Debug, Clone)]
pub struct Engine {
    config: PipelineConfig,
    base: PipelineConfig,
    overrides: Option<ConfigOverrides>,
    gateway: Gateway,
    kg: Arc<dyn KgAdapter>,
    web: Option<Arc<dyn WebAdapter>>,
    pool: Arc<rayon::ThreadPool>,
    source: Source,
}

fn build_pool(n: usize) -> Result<Arc<rayon::ThreadPool>, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Arc::new)
        .map_err(|e| PipelineError::Build(e.to_string()))
}

fn build_backend(cfg: &PipelineConfig, bank: &PromptBank) -> Result<Arc<dyn LlmBackend>, PipelineError> {
    let build = |e: &dyn std::fmt::Display| PipelineError::Build(e.to_string());
    Ok(match &cfg.llm {
        Some(LlmConfig::Demo) => Arc::new(MockBackend::from_script(&demo::llm_script(), bank)),
        Some(LlmConfig::Mock {
            fixture_file,
            script_file,
        }) => {
            let mut mock = match fixture_file {
                Some(p) => MockBackend::load(p).map_err(|e| build(&e))?,
                None => MockBackend::new(),
            };
            if let Some(p) = script_file {
                let json = std::fs::read_to_string(p).map_err(|e| build(&format!("{}: {e}", p.display())))?;
                let entries: Vec<ScriptEntry> = serde_json::from_str(&json).map_err(|e| build(&e))?;
                mock.merge(MockBackend::from_script(&entries, bank));
            }
            Arc::new(mock)
        }
        Some(LlmConfig::Http(h)) => Arc::new(HttpBackend::new(h.clone())),
        None => match HttpBackendConfig::from_env() {
            Some(h) => Arc::new(HttpBackend::new(h)),
            None => {
                return Err(PipelineError::Build(
                    "no LLM configured: set FACTFORGE_LLM_URL or add an `llm` section".into(),
                ))
            }
        },
    })
}

fn build_kg(cfg: &KgConfig) -> Result<Arc<dyn KgAdapter>, PipelineError> {
    let build = |e: crate::retrieval::RetrievalError| PipelineError::Build(e.to_string());
    Ok(match cfg {
        KgConfig::Demo => Arc::new(SnapshotKg::new(Arc::new(demo::kg_snapshot()))),
        KgConfig::Snapshot { facts, aliases } => Arc::new(SnapshotKg::new(Arc::new(
            KgSnapshot::load(facts, aliases.as_deref()).map_err(build)?,
        ))),
        KgConfig::Http(h) => Arc::new(HttpKg::new(h.clone())),
    })
}

fn build_web(cfg: &WebConfig) -> Result<Option<Arc<dyn WebAdapter>>, PipelineError> {
    Ok(match cfg {
        WebConfig::Demo => Some(Arc::new(demo::web_fixture())),
        WebConfig::Fixture { file } => Some(Arc::new(
            WebFixture::load(file).map_err(|e| PipelineError::Build(e.to_string()))?,
        )),
        WebConfig::Http(h) => Some(Arc::new(HttpWeb::new(h.clone()))),
        WebConfig::None => None,
    })
}

struct SentenceOutcome {
    report: SentenceReport,
    diagnostics: ExtractionDiagnostics,
    complete: bool,
}

/// A triple that survived validation, with its span and question context.
struct Candidate {
    triple: Triple,
    span: CharSpan,
    context: Vec<Triple>,
}

impl Engine {
    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let bank = PromptBank::from_settings(&config.prompts);
        let backend = build_backend(&config, &bank)?;
        Ok(Engine {
            gateway: Gateway::new(backend, bank),
            kg: build_kg(&config.kg)?,
            web: build_web(&config.web)?,
            pool: build_pool(config.parallelism)?,
            base: config.clone(),
            config,
            overrides: None,
            source: Source::Config,
        })
    }

    /// An engine over caller-supplied backends. Only the scalar settings of
    /// `config` are used; its backend sections are recorded in the digest.
    pub fn from_parts(
        config: PipelineConfig,
        backend: Arc<dyn LlmBackend>,
        kg: Arc<dyn KgAdapter>,
        web: Option<Arc<dyn WebAdapter>>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Engine {
            gateway: Gateway::new(backend, PromptBank::from_settings(&config.prompts)),
            kg,
            web,
            pool: build_pool(config.parallelism)?,
            base: config.clone(),
            config,
            overrides: None,
            source: Source::Parts,
        })
    }

    pub fn demo() -> Self {
        Self::from_config(PipelineConfig::demo()).expect("bundled demo config builds")
    }

    /// The same engine with per-request overrides applied to the base config.
    pub fn with_overrides(&self, o: &ConfigOverrides) -> Result<Self, PipelineError> {
        if o.is_empty() {
            let mut e = self.clone();
            if self.overrides.is_some() {
                e.config = self.base.clone();
                e.gateway = Gateway::new(self.gateway.backend().clone(), PromptBank::from_settings(&self.base.prompts));
                e.overrides = None;
            }
            return Ok(e);
        }
        let config = self.base.with_overrides(o)?;
        let bank = PromptBank::from_settings(&config.prompts);
        let backend = match self.source {
            Source::Config => build_backend(&config, &bank)?,
            Source::Parts => self.gateway.backend().clone(),
        };
        Ok(Engine {
            gateway: Gateway::new(backend, bank),
            config,
            overrides: Some(o.clone()),
            ..self.clone()
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn digest(&self) -> String {
        self.config.digest()
    }

    /// Forward a raw question to the LLM.
    pub fn ask(&self, query: &str) -> Result<String, GatewayError> {
        self.gateway.ask(query)
    }

    pub fn verify(&self, text: &str) -> Result<VerificationReport, PipelineError> {
        self.verify_with_deadline(text, Instant::now() + Duration::from_secs(self.config.budget_secs))
    }

    /// Verification that stops starting new work at `deadline`. Unfinished
    /// facts are left out and the report is marked incomplete.
    pub fn verify_with_deadline(
        &self,
        text: &str,
        deadline: Instant,
    ) -> Result<VerificationReport, PipelineError> {
        if text.trim().is_empty() {
            return Err(PipelineError::EmptyInput);
        }
        let passage = split_sentences(text).map_err(|_| PipelineError::EmptyInput)?;
        let outcomes: Vec<Result<SentenceOutcome, PipelineError>> = self.pool.install(|| {
            use rayon::prelude::*;
            passage
                .sentences
                .par_iter()
                .enumerate()
                .map(|(i, s)| self.process_sentence(i, s, deadline))
                .collect()
        });
        let mut sentences = Vec::new();
        let mut diagnostics = ExtractionDiagnostics::default();
        let mut complete = true;
        for o in outcomes {
            let o = o?;
            diagnostics.absorb(&o.diagnostics);
            complete &= o.complete;
            sentences.push(o.report);
        }
        let report = VerificationReport {
            id: None,
            passage: text.to_string(),
            sentences,
            provenance: Provenance {
                engine_version: ENGINE_VERSION.to_string(),
                config_digest: self.digest(),
                overrides: self.overrides.clone(),
            },
            extraction_diagnostics: diagnostics,
            complete,
        };
        if !complete && report.verdict_count() == 0 {
            return Err(PipelineError::BudgetExhausted(Duration::from_secs(self.config.budget_secs)));
        }
        Ok(report)
    }

    fn process_sentence(
        &self,
        index: usize,
        sentence: &Sentence,
        deadline: Instant,
    ) -> Result<SentenceOutcome, PipelineError> {
        let mut diagnostics = ExtractionDiagnostics::default();
        let mut report = SentenceReport {
            index,
            text: sentence.text.clone(),
            span: sentence.span,
            verdicts: Vec::new(),
            revisions: Vec::new(),
        };
        if Instant::now() >= deadline {
            return Ok(SentenceOutcome {
                report,
                diagnostics,
                complete: false,
            });
        }
        let extraction = match extract_facts(index, &sentence.text, &self.gateway) {
            Ok(x) => x,
            Err(ExtractionError::Gateway(e @ GatewayError::BackendUnavailable { .. })) => {
                return Err(PipelineError::Backend(e))
            }
            Err(e) => {
                log::warn!("sentence {index}: no facts extracted: {e}");
                diagnostics.unparseable_sentences += 1;
                return Ok(SentenceOutcome {
                    report,
                    diagnostics,
                    complete: true,
                });
            }
        };
        diagnostics.dropped_malformed += extraction.dropped_malformed;
        let candidates = self.candidates(&sentence.text, extraction.facts, &mut diagnostics);

        let verdicts: Vec<Option<Verdict>> = {
            use rayon::prelude::*;
            candidates
                .par_iter()
                .map(|c| self.verify_triple(c, deadline))
                .collect()
        };
        let complete = verdicts.iter().all(Option::is_some);
        report.verdicts = verdicts.into_iter().flatten().collect();
        report.verdicts.sort_by_key(|v| (v.span.start, v.span.end));
        Ok(SentenceOutcome {
            report,
            diagnostics,
            complete,
        })
    }

    /// Drops triples of inconsistent groups, triples whose object cannot be
    /// located, and triples whose span overlaps an earlier one.
    fn candidates(
        &self,
        text: &str,
        facts: crate::model::FactSet,
        diagnostics: &mut ExtractionDiagnostics,
    ) -> Vec<Candidate> {
        let (groups, bad) = partition_extended(&facts.extended);
        diagnostics.inconsistent_groups += bad.len();
        let mut triples: Vec<(Triple, Vec<Triple>)> =
            facts.flat.iter().map(|t| (t.clone(), Vec::new())).collect();
        for g in &groups {
            for m in &g.members {
                triples.push((m.clone(), g.context_for(m)));
            }
        }
        let mut out: Vec<Candidate> = Vec::new();
        for (triple, context) in triples {
            let span = match align_span(text, &triple) {
                Ok(span) => span,
                Err(_) => {
                    diagnostics.dropped_hallucinated += 1;
                    continue;
                }
            };
            if out.iter().any(|c| c.span.overlaps(&span)) {
                diagnostics.dropped_overlapping += 1;
                continue;
            }
            out.push(Candidate { triple, span, context });
        }
        out
    }

    fn verify_triple(&self, c: &Candidate, deadline: Instant) -> Option<Verdict> {
        if Instant::now() >= deadline {
            return None;
        }
        let question = match generate_question(&c.triple, &c.context, &self.gateway) {
            Ok(q) => q,
            Err(e) => {
                return Some(Verdict {
                    triple: c.triple.clone(),
                    label: VerdictLabel::Questionable,
                    span: c.span,
                    evidence: Vec::new(),
                    question: String::new(),
                    notes: vec![VerdictNote::QuestionGenerationFailed { message: e.to_string() }],
                })
            }
        };
        let mut notes = Vec::new();
        let (kg, web) = rayon::join(
            || query_kg(&question, self.kg.as_ref()),
            || match &self.web {
                Some(w) => query_web(&question, self.config.top_k, w.as_ref()),
                None => Ok(Vec::new()),
            },
        );
        let kg = kg.unwrap_or_else(|e| {
            notes.push(VerdictNote::RetrievalFailed {
                origin: Origin::Kg,
                message: e.to_string(),
            });
            KgAnswerSet {
                answers: Vec::new(),
                source: String::new(),
            }
        });
        let web = web.unwrap_or_else(|e| {
            notes.push(VerdictNote::RetrievalFailed {
                origin: Origin::Web,
                message: e.to_string(),
            });
            Vec::new()
        });
        if Instant::now() >= deadline {
            return None;
        }
        let judge = GatewayJudge {
            gateway: &self.gateway,
            mode: self.config.judge_mode,
        };
        let mut decision = decide(&c.triple, &kg, &web, self.config.decision(), &judge);
        notes.append(&mut decision.notes);
        decision.notes = notes;
        Some(decision.into_verdict(c.triple.clone(), c.span, question.question))
    }

    /// Checks that `report` came from this engine's configuration (with the
    /// report's own overrides applied) and returns the engine that made it.
    pub fn engine_for(&self, report: &VerificationReport) -> Result<Engine, PipelineError> {
        let overrides = report.provenance.overrides.clone().unwrap_or_default();
        let engine = self.with_overrides(&overrides)?;
        let expected = engine.digest();
        if expected != report.provenance.config_digest {
            return Err(PipelineError::DigestMismatch {
                expected,
                found: report.provenance.config_digest.clone(),
            });
        }
        Ok(engine)
    }

    /// Proposals for every sentence with a Questionable verdict.
    pub fn revise(&self, report: &VerificationReport) -> Result<RevisionOutcome, PipelineError> {
        let engine = self.engine_for(report)?;
        if !report.has_questionable() {
            return Err(PipelineError::NoQuestionable);
        }
        let sentences = engine.pool.install(|| {
            report
                .sentences
                .iter()
                .filter(|s| s.verdicts.iter().any(|v| v.label == VerdictLabel::Questionable))
                .map(|s| {
                    let r = propose_revisions(&s.text, &s.verdicts, &engine.gateway, engine.config.revision);
                    SentenceRevisionOutcome {
                        index: s.index,
                        text: s.text.clone(),
                        proposals: r.proposals,
                        notes: r.notes,
                    }
                })
                .collect()
        });
        Ok(RevisionOutcome { sentences })
    }
}
