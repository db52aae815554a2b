//! Prompt templates and the few-shot demonstration banks.
//!
//! Output grammars, one per task:
//! - fact extraction: one triple per line, `(S; P; O)` or `(S; P; Pid; attr; O)`;
//! - question generation: a `TYPE: <t>` line followed by a `QUESTION: <q>` line;
//! - triple entailment: the single answer `supporting` or `not supporting`;
//! - revision: the rewritten sentence on one line.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FactExtraction,
    #[serde(rename = "tqgen")]
    TypeAwareQGen,
    #[serde(rename = "cqgen")]
    ContextQGen,
    TripleEntailment,
    Revision,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::FactExtraction,
        TaskKind::TypeAwareQGen,
        TaskKind::ContextQGen,
        TaskKind::TripleEntailment,
        TaskKind::Revision,
    ];

    pub fn default_shots(self) -> usize {
        match self {
            TaskKind::FactExtraction => 5,
            TaskKind::TypeAwareQGen | TaskKind::ContextQGen | TaskKind::TripleEntailment => 2,
            TaskKind::Revision => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub input: String,
    pub output: String,
}

fn demo(input: &str, output: &str) -> Demonstration {
    Demonstration {
        input: input.to_string(),
        output: output.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTask {
    pub kind: TaskKind,
    pub instruction: String,
    pub demonstrations: Vec<Demonstration>,
}

const EXTRACTION_INSTRUCTION: &str = "Extract every verifiable fact stated in the input sentence. \
Write one fact per line. Use (Subject; Predicate; Object) for a predicate with a single object. \
For an event with several attributes use (Subject; Predicate; Predicate_ID; Predicate_attribute; Object), \
one line per attribute, sharing the same Predicate_ID. Copy object values exactly as they appear in the sentence.";

const TQGEN_INSTRUCTION: &str = "Write a question whose answer is the Object of the input triple. \
First decide the type of the Object and write it on a line starting with \"TYPE:\". \
Then write the question, asking for a value of exactly that type, on a line starting with \"QUESTION:\". \
The question must not contain the Object.";

const CQGEN_INSTRUCTION: &str = "Write a question whose answer is the Object of the input triple. \
The context triples describe the same event; use them so the question pins down that exact situation. \
First decide the type of the Object and write it on a line starting with \"TYPE:\". \
Then write the question on a line starting with \"QUESTION:\". The question must not contain the Object.";

const CQGEN_PLAIN_INSTRUCTION: &str = "Write a question whose answer is the Object of the input triple. \
The context triples describe the same event; use them so the question pins down that exact situation. \
Write the question on a line starting with \"QUESTION:\". The question must not contain the Object.";

const ENTAILMENT_INSTRUCTION: &str = "Decide whether the evidence triple entails the claim triple. \
Answer with exactly one of: supporting, not supporting.";

const REVISION_INSTRUCTION: &str = "Rewrite the sentence so that it no longer states the questionable fact \
and states the correction instead. Keep every other fact and the wording unchanged. \
Answer with the rewritten sentence on a single line.";

fn extraction_pool() -> Vec<Demonstration> {
    vec![
        demo(
            "Marie Curie was born in Warsaw in 1867.",
            "(Marie Curie; born; born_ID; place; Warsaw)\n(Marie Curie; born; born_ID; year; 1867)",
        ),
        demo(
            "The Danube is a river that flows through Vienna.",
            "(Danube; instance of; river)\n(Danube; flows through; Vienna)",
        ),
        demo(
            "Barack Obama served as president of the United States from 2009 to 2017 and is married to Michelle Obama.",
            "(Barack Obama; served; serve_ID; position; president of the United States)\n\
             (Barack Obama; served; serve_ID; start; 2009)\n\
             (Barack Obama; served; serve_ID; end; 2017)\n\
             (Barack Obama; spouse; Michelle Obama)",
        ),
        demo(
            "Mount Everest, the highest mountain on Earth, is 8,849 metres tall.",
            "(Mount Everest; height; 8,849 metres)\n(Mount Everest; superlative; highest mountain on Earth)",
        ),
        demo(
            "In 1997, Apple acquired NeXT, which Steve Jobs had founded.",
            "(Apple; acquired; acquire_ID; company; NeXT)\n(Apple; acquired; acquire_ID; year; 1997)\n\
             (Steve Jobs; founded; NeXT)",
        ),
    ]
}

fn tqgen_pool() -> Vec<Demonstration> {
    vec![
        demo(
            "(Marie Curie; birthplace; Warsaw)",
            "TYPE: city\nQUESTION: In which city was Marie Curie born?",
        ),
        demo(
            "(Mount Everest; height; 8,849 metres)",
            "TYPE: length in metres\nQUESTION: How many metres tall is Mount Everest?",
        ),
        demo(
            "(Barack Obama; spouse; Michelle Obama)",
            "TYPE: person\nQUESTION: Who is Barack Obama married to?",
        ),
    ]
}

fn cqgen_pool() -> Vec<Demonstration> {
    vec![
        demo(
            "Triple: (Marie Curie; born; born_ID; year; 1867)\nContext: (Marie Curie; born; born_ID; place; Warsaw)",
            "TYPE: year\nQUESTION: In which year was Marie Curie born in Warsaw?",
        ),
        demo(
            "Triple: (Barack Obama; served; serve_ID; start; 2009)\n\
             Context: (Barack Obama; served; serve_ID; position; president of the United States)\n\
             Context: (Barack Obama; served; serve_ID; end; 2017)",
            "TYPE: year\nQUESTION: In which year did Barack Obama start serving as president of the United States?",
        ),
        demo(
            "Triple: (Apple; acquired; acquire_ID; company; NeXT)\nContext: (Apple; acquired; acquire_ID; year; 1997)",
            "TYPE: company\nQUESTION: Which company did Apple acquire in 1997?",
        ),
    ]
}

fn entailment_pool() -> Vec<Demonstration> {
    vec![
        demo(
            "Claim: (Marie Curie; birthplace; Warsaw)\nEvidence: (Marie Curie; birthplace; Warsaw, Congress Poland)",
            "supporting",
        ),
        demo(
            "Claim: (Danube; flows through; Prague)\nEvidence: (Danube; flows through; Vienna)",
            "not supporting",
        ),
    ]
}

fn revision_pool() -> Vec<Demonstration> {
    vec![demo(
        "Sentence: Marie Curie was born in Krakow in 1867.\n\
         Questionable: (Marie Curie; born; born_ID; place; Krakow)\n\
         Correction: (Marie Curie; born; born_ID; place; Warsaw)",
        "Marie Curie was born in Warsaw in 1867.",
    )]
}

impl PromptTask {
    /// The built-in template for `kind` with its default shot count.
    pub fn builtin(kind: TaskKind) -> Self {
        Self::builtin_with_shots(kind, kind.default_shots())
    }

    /// Built-in template truncated to `shots` demonstrations (at most the
    /// size of the built-in pool, at least one).
    pub fn builtin_with_shots(kind: TaskKind, shots: usize) -> Self {
        let (instruction, pool) = match kind {
            TaskKind::FactExtraction => (EXTRACTION_INSTRUCTION, extraction_pool()),
            TaskKind::TypeAwareQGen => (TQGEN_INSTRUCTION, tqgen_pool()),
            TaskKind::ContextQGen => (CQGEN_INSTRUCTION, cqgen_pool()),
            TaskKind::TripleEntailment => (ENTAILMENT_INSTRUCTION, entailment_pool()),
            TaskKind::Revision => (REVISION_INSTRUCTION, revision_pool()),
        };
        let n = shots.clamp(1, pool.len());
        PromptTask {
            kind,
            instruction: instruction.to_string(),
            demonstrations: pool.into_iter().take(n).collect(),
        }
    }

    /// Context-driven question generation without the type-finding step:
    /// `TYPE:` lines are removed from the demonstrations.
    pub fn without_type_scaffold(mut self) -> Self {
        self.instruction = CQGEN_PLAIN_INSTRUCTION.to_string();
        for d in &mut self.demonstrations {
            d.output = d
                .output
                .lines()
                .filter(|l| !l.trim_start().to_ascii_uppercase().starts_with("TYPE:"))
                .collect::<Vec<_>>()
                .join("\n");
        }
        self
    }
}

const INPUT_OPEN: &str = "<<<";
const INPUT_CLOSE: &str = ">>>";

/// Instruction, numbered demonstrations, then the payload between fixed
/// delimiters. The payload is the only variable part, so distinct payloads
/// always render to distinct prompts.
pub fn render_prompt(task: &PromptTask, payload: &str) -> String {
    let mut out = String::new();
    out.push_str(&task.instruction);
    out.push_str("\n\n");
    for (i, d) in task.demonstrations.iter().enumerate() {
        out.push_str(&format!(
            "### Example {}\nInput:\n{INPUT_OPEN}\n{}\n{INPUT_CLOSE}\nOutput:\n{}\n\n",
            i + 1,
            d.input,
            d.output
        ));
    }
    out.push_str(&format!(
        "### Task\nInput:\n{INPUT_OPEN}\n{payload}\n{INPUT_CLOSE}\nOutput:\n"
    ));
    out
}

/// Demonstration-count settings for every task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSettings {
    pub shots: BTreeMap<TaskKind, usize>,
    pub cqgen_type_scaffold: bool,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            shots: TaskKind::ALL
                .iter()
                .map(|k| (*k, k.default_shots()))
                .collect(),
            cqgen_type_scaffold: true,
        }
    }
}

/// The effective prompt template for each task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBank {
    tasks: BTreeMap<TaskKind, PromptTask>,
    cqgen_type_scaffold: bool,
}

impl Default for PromptBank {
    fn default() -> Self {
        PromptBank::from_settings(&PromptSettings::default())
    }
}

impl PromptBank {
    pub fn from_settings(settings: &PromptSettings) -> Self {
        let tasks = TaskKind::ALL
            .iter()
            .map(|&kind| {
                let shots = settings
                    .shots
                    .get(&kind)
                    .copied()
                    .unwrap_or(kind.default_shots());
                let mut task = PromptTask::builtin_with_shots(kind, shots);
                if kind == TaskKind::ContextQGen && !settings.cqgen_type_scaffold {
                    task = task.without_type_scaffold();
                }
                (kind, task)
            })
            .collect();
        PromptBank {
            tasks,
            cqgen_type_scaffold: settings.cqgen_type_scaffold,
        }
    }

    /// Whether context-driven question generation asks for a `TYPE:` line.
    pub fn cqgen_type_scaffold(&self) -> bool {
        self.cqgen_type_scaffold
    }

    pub fn task(&self, kind: TaskKind) -> &PromptTask {
        &self.tasks[&kind]
    }

    pub fn render(&self, kind: TaskKind, payload: &str) -> String {
        render_prompt(self.task(kind), payload)
    }
}
