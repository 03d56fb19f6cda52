use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{BackendError, DecodingConfig, LanguageBackend, RecordProbe};
use crate::pipeline::Context;
use crate::taxonomy::{hardware_only, Task, NO_QUESTION};

/// Replays fixed generations keyed by record id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct EchoScript {
    #[serde(default)]
    pub by_record: BTreeMap<String, String>,
    /// Generation for records the script does not name.
    #[serde(default = "default_fallback")]
    pub fallback: String,
}

fn default_fallback() -> String {
    NO_QUESTION.to_string()
}

impl EchoScript {
    pub fn new(by_record: BTreeMap<String, String>) -> Self {
        Self {
            by_record,
            fallback: default_fallback(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("echo script {}: {e}", path.display())))
    }
}

/// Deterministic stand-ins for a language model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedBackend {
    /// Asks the first canonical question of each gold modality.
    GoldFollowing,
    /// Never asks anything.
    Silent,
    /// Always asks the canonical question for one task.
    FixedTask(Task),
    Echo(EchoScript),
}

impl ScriptedBackend {
    fn questions(&self, probe: &RecordProbe<'_>) -> String {
        match self {
            ScriptedBackend::GoldFollowing => {
                let gold = hardware_only(probe.gold);
                let mut tasks: Vec<Task> = gold
                    .iter()
                    .filter_map(|m| Task::ALL.into_iter().find(|t| t.modality() == *m))
                    .collect();
                tasks.sort_by_key(|t| t.row());
                if tasks.is_empty() {
                    return NO_QUESTION.to_string();
                }
                tasks
                    .iter()
                    .map(|t| t.canonical_question().surface())
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            ScriptedBackend::Silent => NO_QUESTION.to_string(),
            ScriptedBackend::FixedTask(task) => task.canonical_question().surface().to_string(),
            ScriptedBackend::Echo(script) => script
                .by_record
                .get(probe.record_id)
                .unwrap_or(&script.fallback)
                .clone(),
        }
    }
}

impl LanguageBackend for ScriptedBackend {
    fn id(&self) -> String {
        match self {
            ScriptedBackend::GoldFollowing => "scripted:gold-following".into(),
            ScriptedBackend::Silent => "scripted:silent".into(),
            ScriptedBackend::FixedTask(t) => format!("scripted:fixed:{}", t.key()),
            ScriptedBackend::Echo(_) => "scripted:echo".into(),
        }
    }

    fn complete_questions(
        &self,
        _fewshot_prompt: &str,
        _decoding: &DecodingConfig,
        probe: &RecordProbe<'_>,
    ) -> Result<String, BackendError> {
        Ok(self.questions(probe))
    }

    fn complete_answer(
        &self,
        _answer_prompt: &str,
        context: &Context,
        _decoding: &DecodingConfig,
    ) -> Result<String, BackendError> {
        Ok(format!("ANSWER[{} observations]", context.observations.len()))
    }
}
