//! Runtime and evaluation harness for Chain-of-Questions multimodal
//! reasoning.
//!
//! A prompt is turned into curiosity questions by a language backend; each
//! question is mapped to a perception [`taxonomy::Task`], routed to a
//! [`sensors::Sensor`], and the resulting observations are aggregated into a
//! context from which an answer is produced. The [`evaluation`] module scores
//! which modalities a backend chose to engage against a labeled
//! [`dataset`].

pub mod backend;
pub mod dataset;
pub mod evaluation;
pub mod pipeline;
pub mod sensors;
pub mod taxonomy;

pub use backend::{
    build_fewshot_prompt, generate_answer, generate_questions, BackendError, DecodingConfig,
    DecodingStrategy, FewShotExemplar, FewShotSet, LanguageBackend, RemoteBackend, RemoteConfig,
    ScriptedBackend, StubServer,
};
pub use dataset::{BenchmarkRecord, Dataset, DatasetError, DatasetStats, SourceKind};
pub use evaluation::{EvalConfig, EvalOutcome, EvalReport, MatchRule, ReportFormat};
pub use pipeline::{aggregate, run, Context, PipelineConfig, PipelineError, RunTrace};
pub use sensors::{assign_sensor, AttachmentSet, Observation, ObservationStatus, Sensor, SensorRegistry};
pub use taxonomy::{
    modality_of_task, normalize, CanonicalQuestion, Modality, ModalitySet, ParsedQuestion, Task,
    TaskMapper,
};
