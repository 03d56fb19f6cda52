//! One end-to-end execution: prompt → questions → tasks → sensors →
//! observations → context → answer, with a trace of every stage.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    generate_answer, generate_questions, BackendError, DecodingConfig, FewShotSet, LanguageBackend,
    RecordProbe,
};
use crate::dataset::BenchmarkRecord;
use crate::sensors::{assign_sensor, AttachmentSet, Observation, SensorRegistry};
use crate::taxonomy::{ModalitySet, ParsedQuestion, TaskMapper};

pub const DEFAULT_QUESTION_CAP: usize = 8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("two observations share question index {0}")]
    DuplicateIndex(usize),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Observations for one prompt, ordered by question index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub prompt: String,
    pub observations: Vec<Observation>,
}

/// Orders observations by question index. Failed observations and repeated
/// tasks are kept.
pub fn aggregate(prompt: &str, mut observations: Vec<Observation>) -> Result<Context, PipelineError> {
    observations.sort_by_key(|o| o.question_index);
    if let Some(w) = observations
        .windows(2)
        .find(|w| w[0].question_index == w[1].question_index)
    {
        return Err(PipelineError::DuplicateIndex(w[0].question_index));
    }
    Ok(Context {
        prompt: prompt.to_string(),
        observations,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub fewshot: FewShotSet,
    pub mapper: TaskMapper,
    pub decoding: DecodingConfig,
    /// Parsed questions beyond this many are dropped.
    pub question_cap: usize,
    /// Run a record's sensor calls on the rayon pool instead of in sequence.
    pub parallel_sensors: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fewshot: FewShotSet::default(),
            mapper: TaskMapper::default(),
            decoding: DecodingConfig::default(),
            question_cap: DEFAULT_QUESTION_CAP,
            parallel_sensors: false,
        }
    }
}

/// Everything the pipeline needs to know about one input.
#[derive(Debug, Clone, Copy)]
pub struct RunInput<'a> {
    pub record_id: &'a str,
    pub prompt: &'a str,
    /// Only scripted backends read this.
    pub gold: &'a ModalitySet,
    pub attachments: &'a AttachmentSet,
}

impl<'a> From<&'a BenchmarkRecord> for RunInput<'a> {
    fn from(r: &'a BenchmarkRecord) -> Self {
        Self {
            record_id: &r.id,
            prompt: &r.prompt,
            gold: &r.gold_modalities,
            attachments: &r.attachments,
        }
    }
}

/// Provenance of one pipeline execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub record_id: String,
    pub raw_generation: String,
    pub parsed: Vec<ParsedQuestion>,
    pub activated_modalities: ModalitySet,
    pub observations: Vec<Observation>,
    pub answer: String,
    pub timings_ms: BTreeMap<String, f64>,
    /// Parsed questions cut by the question cap; omitted when zero.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub questions_dropped: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl RunTrace {
    /// The trace with timings cleared, for byte-level comparisons.
    pub fn without_timings(&self) -> RunTrace {
        RunTrace {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }
}

/// Hardware modalities reached by the matched questions.
pub fn activated_modalities(parsed: &[ParsedQuestion]) -> ModalitySet {
    parsed
        .iter()
        .filter_map(|p| p.matched_task)
        .map(|t| t.modality())
        .filter(|m| m.is_hardware())
        .collect()
}

pub fn run(
    record: &BenchmarkRecord,
    backend: &dyn LanguageBackend,
    registry: &SensorRegistry,
    config: &PipelineConfig,
) -> Result<RunTrace, PipelineError> {
    run_input(RunInput::from(record), backend, registry, config)
}

pub fn run_input(
    input: RunInput<'_>,
    backend: &dyn LanguageBackend,
    registry: &SensorRegistry,
    config: &PipelineConfig,
) -> Result<RunTrace, PipelineError> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &str, timings: &mut BTreeMap<String, f64>| {
        let now = Instant::now();
        timings.insert(stage.to_string(), (now - clock).as_secs_f64() * 1e3);
        clock = now;
    };

    let fewshot_prompt = config.fewshot.build_prompt(input.prompt);
    lap("prompt", &mut timings);

    let probe = RecordProbe {
        record_id: input.record_id,
        gold: input.gold,
    };
    let generation = generate_questions(backend, &fewshot_prompt, &config.decoding, &probe)?;
    lap("generate", &mut timings);

    let mut parsed = config.mapper.parse_questions(&generation.raw_text);
    let questions_dropped = parsed.len().saturating_sub(config.question_cap);
    if questions_dropped > 0 {
        log::warn!(
            "{}: dropping {questions_dropped} question(s) beyond cap {}",
            input.record_id,
            config.question_cap
        );
        parsed.truncate(config.question_cap);
    }
    lap("parse", &mut timings);

    let execute = |p: &ParsedQuestion| {
        p.matched_task.map(|task| {
            registry.execute(
                p.question_index,
                task,
                assign_sensor(task),
                input.attachments,
                input.prompt,
            )
        })
    };
    let observations: Vec<Observation> = if config.parallel_sensors {
        parsed.par_iter().filter_map(execute).collect()
    } else {
        parsed.iter().filter_map(execute).collect()
    };
    lap("execute", &mut timings);

    let context = aggregate(input.prompt, observations)?;
    lap("aggregate", &mut timings);

    let answer = generate_answer(backend, input.prompt, &context, &config.decoding)?;
    lap("answer", &mut timings);

    Ok(RunTrace {
        record_id: input.record_id.to_string(),
        raw_generation: generation.raw_text,
        activated_modalities: activated_modalities(&parsed),
        parsed,
        observations: context.observations,
        answer,
        timings_ms: timings,
        questions_dropped,
    })
}
