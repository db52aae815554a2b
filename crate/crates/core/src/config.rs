//! Pipeline configuration: backend selection, retrieval and decision knobs,
//! and the content digest stamped into every report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::llm::{HttpBackendConfig, PromptSettings};
use crate::retrieval::{HttpKgConfig, HttpWebConfig, DEFAULT_TOP_K};
use crate::revision::RevisionConfig;
use crate::verification::{DecisionConfig, JudgeMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LlmConfig {
    /// The bundled demonstration fixtures.
    Demo,
    /// Prompt-hash fixtures (`fixture_file`) and/or payload scripts
    /// (`script_file`).
    Mock {
        #[serde(default)]
        fixture_file: Option<PathBuf>,
        #[serde(default)]
        script_file: Option<PathBuf>,
    },
    Http(HttpBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KgConfig {
    Demo,
    Snapshot {
        facts: PathBuf,
        #[serde(default)]
        aliases: Option<PathBuf>,
    },
    Http(HttpKgConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WebConfig {
    Demo,
    Fixture { file: PathBuf },
    Http(HttpWebConfig),
    /// No web evidence at all.
    None,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_parallelism() -> usize {
    8
}
fn default_budget() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Absent means: an HTTP backend described by environment variables.
    #[serde(default)]
    pub llm: Option<LlmConfig>,
    pub kg: KgConfig,
    pub web: WebConfig,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub judge_mode: JudgeMode,
    #[serde(default)]
    pub strict_step1: bool,
    #[serde(default)]
    pub prompts: PromptSettings,
    /// Upper bound on concurrent backend calls within one request.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Wall-clock budget for one verification, in seconds.
    #[serde(default = "default_budget")]
    pub budget_secs: u64,
    #[serde(default)]
    pub revision: RevisionConfig,
}

/// Per-request adjustments to a loaded config.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_mode: Option<JudgeMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_step1: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqgen_type_scaffold: Option<bool>,
}

impl ConfigOverrides {
    pub fn is_empty(&self) -> bool {
        *self == ConfigOverrides::default()
    }
}

impl PipelineConfig {
    /// Bundled fixtures for every backend.
    pub fn demo() -> Self {
        PipelineConfig {
            llm: Some(LlmConfig::Demo),
            kg: KgConfig::Demo,
            web: WebConfig::Demo,
            top_k: default_top_k(),
            judge_mode: JudgeMode::default(),
            strict_step1: false,
            prompts: PromptSettings::default(),
            parallelism: default_parallelism(),
            budget_secs: default_budget(),
            revision: RevisionConfig::default(),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative fixture paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let json = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&json)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(LlmConfig::Mock {
            fixture_file,
            script_file,
        }) = &mut self.llm
        {
            fixture_file.iter_mut().for_each(fix);
            script_file.iter_mut().for_each(fix);
        }
        if let KgConfig::Snapshot { facts, aliases } = &mut self.kg {
            fix(facts);
            aliases.iter_mut().for_each(fix);
        }
        if let WebConfig::Fixture { file } = &mut self.web {
            fix(file);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.top_k == 0 {
            return invalid("top_k must be at least 1");
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1");
        }
        if self.budget_secs == 0 {
            return invalid("budget_secs must be positive");
        }
        if let Some(LlmConfig::Mock {
            fixture_file: None,
            script_file: None,
        }) = self.llm
        {
            return invalid("mock llm needs fixture_file or script_file");
        }
        Ok(())
    }

    pub fn with_overrides(&self, o: &ConfigOverrides) -> Result<Self, ConfigError> {
        let mut cfg = self.clone();
        if let Some(k) = o.top_k {
            cfg.top_k = k;
        }
        if let Some(m) = o.judge_mode {
            cfg.judge_mode = m;
        }
        if let Some(s) = o.strict_step1 {
            cfg.strict_step1 = s;
        }
        if let Some(s) = o.cqgen_type_scaffold {
            cfg.prompts.cqgen_type_scaffold = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn decision(&self) -> DecisionConfig {
        DecisionConfig {
            judge_mode: self.judge_mode,
            strict_step1: self.strict_step1,
        }
    }

    /// SHA-256 of the config's JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
