//! Language-model backends.
//!
//! A backend turns a few-shot prompt into raw question text and a rendered
//! context into an answer. Scripted backends are deterministic stand-ins for
//! tests and oracles; [`RemoteBackend`] talks to a completion server over
//! HTTP; [`StubServer`] is an in-process server speaking the same protocol.

mod remote;
mod scripted;
mod stub;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::Context;
use crate::taxonomy::{CanonicalQuestion, ModalitySet, NO_QUESTION};

pub use remote::{FieldNames, RemoteBackend, RemoteConfig};
pub use scripted::{EchoScript, ScriptedBackend};
pub use stub::{StubReply, StubServer};

/// Few-shot prompt bundled with the crate.
pub const DEFAULT_FEWSHOT_JSON: &str = include_str!("../../assets/fewshot.v1.json");

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid decoding config: {0}")]
    InvalidDecoding(String),
    #[error("invalid backend config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodingStrategy {
    Greedy,
    Sampling,
    Beam,
}

/// How the remote model should decode. Passed through as request
/// parameters; nothing is decoded locally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub strategy: DecodingStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_width: Option<u32>,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self::greedy(128)
    }
}

impl DecodingConfig {
    pub fn greedy(max_tokens: u32) -> Self {
        Self {
            strategy: DecodingStrategy::Greedy,
            temperature: None,
            beam_width: None,
            max_tokens,
            seed: None,
        }
    }

    pub fn sampling(temperature: f64, max_tokens: u32) -> Self {
        Self {
            strategy: DecodingStrategy::Sampling,
            temperature: Some(temperature),
            ..Self::greedy(max_tokens)
        }
    }

    pub fn beam(beam_width: u32, max_tokens: u32) -> Self {
        Self {
            strategy: DecodingStrategy::Beam,
            beam_width: Some(beam_width),
            ..Self::greedy(max_tokens)
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::InvalidDecoding(m.to_string()));
        if self.max_tokens < 1 {
            return bad("max_tokens must be at least 1");
        }
        match self.strategy {
            DecodingStrategy::Greedy => Ok(()),
            DecodingStrategy::Sampling => match self.temperature {
                Some(t) if t >= 0.0 && t.is_finite() => Ok(()),
                Some(_) => bad("temperature must be a finite number >= 0"),
                None => bad("sampling needs a temperature"),
            },
            DecodingStrategy::Beam => match self.beam_width {
                Some(w) if w >= 2 => Ok(()),
                Some(_) => bad("beam width must be at least 2"),
                None => bad("beam search needs a beam width"),
            },
        }
    }

    /// Temperature to send, if the strategy uses one.
    pub fn effective_temperature(&self) -> Option<f64> {
        match self.strategy {
            DecodingStrategy::Sampling => self.temperature,
            _ => None,
        }
    }

    /// Beam width to send, if the strategy uses one.
    pub fn effective_beam_width(&self) -> Option<u32> {
        match self.strategy {
            DecodingStrategy::Beam => self.beam_width,
            _ => None,
        }
    }
}

/// One worked example shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExemplar {
    pub prompt: String,
    pub expected_questions: Vec<String>,
}

impl FewShotExemplar {
    /// Expected questions must be the lone sentinel or canonical questions.
    pub fn validate(&self) -> Result<(), String> {
        match self.expected_questions.as_slice() {
            [] => Err(format!("exemplar `{}` has no expected questions", self.prompt)),
            [only] if only == NO_QUESTION => Ok(()),
            qs => {
                for q in qs {
                    let canonical = CanonicalQuestion::QUESTIONS.iter().any(|c| c.surface() == q);
                    if !canonical {
                        return Err(format!("`{q}` is not a canonical question"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Instruction plus exemplars, as stored in a few-shot file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotSet {
    pub instruction: String,
    pub exemplars: Vec<FewShotExemplar>,
}

impl Default for FewShotSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_FEWSHOT_JSON).expect("bundled few-shot set is valid")
    }
}

impl FewShotSet {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let set: FewShotSet = serde_json::from_str(text)
            .map_err(|e| BackendError::Config(format!("few-shot file: {e}")))?;
        for ex in &set.exemplars {
            ex.validate().map_err(BackendError::Config)?;
        }
        Ok(set)
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_prompt(&self, record_prompt: &str) -> String {
        build_fewshot_prompt(record_prompt, &self.exemplars, &self.instruction)
    }
}

/// Renders the question-generation prompt: the instruction, each exemplar as
/// a `Prompt:`/`Questions:` block, then the open block for `record_prompt`.
pub fn build_fewshot_prompt(
    record_prompt: &str,
    exemplars: &[FewShotExemplar],
    instruction: &str,
) -> String {
    let mut out = String::with_capacity(instruction.len() + 64 * (exemplars.len() + 1));
    out.push_str(instruction);
    out.push_str("\n\n");
    for ex in exemplars {
        out.push_str("Prompt: ");
        out.push_str(&ex.prompt);
        out.push_str("\nQuestions:\n");
        for q in &ex.expected_questions {
            out.push_str(q);
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("Prompt: ");
    out.push_str(record_prompt);
    out.push_str("\nQuestions:\n");
    out
}

/// Renders the answer prompt from the user prompt and aggregated context.
/// Failed observations are included with their status.
pub fn render_answer_prompt(prompt: &str, context: &Context) -> String {
    let mut out = format!("Prompt: {prompt}\nObservations:\n");
    if context.observations.is_empty() {
        out.push_str("(none)\n");
    }
    for o in &context.observations {
        let status = serde_json::to_value(o.status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        out.push_str(&format!(
            "- [{}] {} via {} ({}): {}\n",
            o.question_index, o.task, o.sensor, status, o.payload
        ));
    }
    out.push_str("Answer:\n");
    out
}

/// Side-channel facts about the record being processed. Only scripted
/// backends look at these; real models see the prompt alone.
#[derive(Debug, Clone, Copy)]
pub struct RecordProbe<'a> {
    pub record_id: &'a str,
    pub gold: &'a ModalitySet,
}

/// Raw question text from one generation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub raw_text: String,
    pub backend_id: String,
    pub decoding: DecodingConfig,
}

/// A language model the pipeline can ask for questions and answers.
pub trait LanguageBackend: Send + Sync {
    fn id(&self) -> String;

    fn complete_questions(
        &self,
        fewshot_prompt: &str,
        decoding: &DecodingConfig,
        probe: &RecordProbe<'_>,
    ) -> Result<String, BackendError>;

    fn complete_answer(
        &self,
        answer_prompt: &str,
        context: &Context,
        decoding: &DecodingConfig,
    ) -> Result<String, BackendError>;
}

pub fn generate_questions(
    backend: &dyn LanguageBackend,
    fewshot_prompt: &str,
    decoding: &DecodingConfig,
    probe: &RecordProbe<'_>,
) -> Result<GenerationResult, BackendError> {
    decoding.validate()?;
    let raw_text = backend.complete_questions(fewshot_prompt, decoding, probe)?;
    Ok(GenerationResult {
        raw_text,
        backend_id: backend.id(),
        decoding: decoding.clone(),
    })
}

pub fn generate_answer(
    backend: &dyn LanguageBackend,
    prompt: &str,
    context: &Context,
    decoding: &DecodingConfig,
) -> Result<String, BackendError> {
    decoding.validate()?;
    backend.complete_answer(&render_answer_prompt(prompt, context), context, decoding)
}
