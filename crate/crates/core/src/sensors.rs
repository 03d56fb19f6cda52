//! Sensor assignment and execution.
//!
//! Every task runs on exactly one [`Sensor`]. A [`SensorRegistry`] maps
//! sensors to pluggable [`SensorBackend`]s; a missing backend or missing
//! media never aborts a run, it is reported through [`ObservationStatus`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::taxonomy::{Modality, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    Camera,
    Microphone,
    Lidar,
    TextAnalyzer,
}

impl Sensor {
    pub const ALL: [Sensor; 4] = [
        Sensor::Camera,
        Sensor::Microphone,
        Sensor::Lidar,
        Sensor::TextAnalyzer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sensor::Camera => "camera",
            Sensor::Microphone => "microphone",
            Sensor::Lidar => "lidar",
            Sensor::TextAnalyzer => "text_analyzer",
        }
    }

    /// Modality this sensor captures.
    pub fn modality(self) -> Modality {
        match self {
            Sensor::Camera => Modality::Vision,
            Sensor::Microphone => Modality::Audio,
            Sensor::Lidar => Modality::Spatial,
            Sensor::TextAnalyzer => Modality::Text,
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The sensor assignment function.
pub fn assign_sensor(task: Task) -> Sensor {
    match task {
        Task::ObjectDetection
        | Task::Captioning
        | Task::PoseEstimation
        | Task::ActionRecognition => Sensor::Camera,
        Task::SpeechToText
        | Task::SoundEventDetection
        | Task::SpeakerId
        | Task::LanguageId => Sensor::Microphone,
        Task::SpatialDetection => Sensor::Lidar,
        Task::SentimentAnalysis => Sensor::TextAnalyzer,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationStatus {
    Ok,
    SensorUnavailable,
    NoData,
}

/// Result of executing one task on one sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub question_index: usize,
    pub task: Task,
    pub sensor: Sensor,
    pub payload: String,
    pub status: ObservationStatus,
}

#[derive(Debug, Error)]
pub enum AttachmentError {
    #[error("text is not an attachable modality; the prompt carries the text")]
    TextAttachment,
}

/// Media references for one record, keyed by modality. `Text` is never a key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AttachmentSet(BTreeMap<Modality, String>);

impl AttachmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        modality: Modality,
        reference: impl Into<String>,
    ) -> Result<Option<String>, AttachmentError> {
        if !modality.is_hardware() {
            return Err(AttachmentError::TextAttachment);
        }
        Ok(self.0.insert(modality, reference.into()))
    }

    pub fn with(mut self, modality: Modality, reference: impl Into<String>) -> Self {
        self.insert(modality, reference)
            .expect("attachment modality must not be text");
        self
    }

    pub fn get(&self, modality: Modality) -> Option<&str> {
        self.0.get(&modality).map(String::as_str)
    }

    pub fn contains(&self, modality: Modality) -> bool {
        self.0.contains_key(&modality)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Modality, &str)> {
        self.0.iter().map(|(m, r)| (*m, r.as_str()))
    }
}

impl<'de> Deserialize<'de> for AttachmentSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<Modality, String>::deserialize(deserializer)?;
        if map.contains_key(&Modality::Text) {
            return Err(serde::de::Error::custom(AttachmentError::TextAttachment));
        }
        Ok(Self(map))
    }
}

/// What a backend reports for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SensorReading {
    Data(String),
    NoData,
    Unavailable,
}

/// A pluggable sensor implementation.
///
/// Backends are shared across evaluation workers and must tolerate
/// concurrent calls.
pub trait SensorBackend: Send + Sync {
    fn sense(&self, task: Task, attachments: &AttachmentSet, prompt: &str) -> SensorReading;
}

impl<F> SensorBackend for F
where
    F: Fn(Task, &AttachmentSet, &str) -> SensorReading + Send + Sync,
{
    fn sense(&self, task: Task, attachments: &AttachmentSet, prompt: &str) -> SensorReading {
        self(task, attachments, prompt)
    }
}

/// Maps each sensor to at most one backend. Immutable once built.
#[derive(Clone, Default)]
pub struct SensorRegistry {
    backends: HashMap<Sensor, Arc<dyn SensorBackend>>,
}

impl fmt::Debug for SensorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut registered: Vec<_> = self.backends.keys().map(|s| s.name()).collect();
        registered.sort_unstable();
        f.debug_struct("SensorRegistry")
            .field("registered", &registered)
            .finish()
    }
}

impl SensorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with scene fixtures behind camera, microphone and LiDAR and
    /// `sentiment.json` (if present) behind the text analyzer.
    pub fn with_fixtures(root: impl Into<PathBuf>) -> Result<Self, FixtureError> {
        let root = root.into();
        let scenes = Arc::new(FixtureBackend::new(&root));
        let sentiment_path = root.join(SENTIMENT_FIXTURE);
        let sentiment = if sentiment_path.exists() {
            SentimentFixture::from_path(&sentiment_path)?
        } else {
            SentimentFixture::default()
        };
        Ok(Self::new()
            .register_shared(Sensor::Camera, scenes.clone())
            .register_shared(Sensor::Microphone, scenes.clone())
            .register_shared(Sensor::Lidar, scenes)
            .register_backend(Sensor::TextAnalyzer, sentiment))
    }

    /// Installs `backend` for `sensor`, replacing any earlier one.
    pub fn register_backend(self, sensor: Sensor, backend: impl SensorBackend + 'static) -> Self {
        self.register_shared(sensor, Arc::new(backend))
    }

    pub fn register_shared(mut self, sensor: Sensor, backend: Arc<dyn SensorBackend>) -> Self {
        self.backends.insert(sensor, backend);
        self
    }

    pub fn is_registered(&self, sensor: Sensor) -> bool {
        self.backends.contains_key(&sensor)
    }

    /// Runs `task` on `sensor`. Never fails; problems surface in the status.
    pub fn execute(
        &self,
        question_index: usize,
        task: Task,
        sensor: Sensor,
        attachments: &AttachmentSet,
        prompt: &str,
    ) -> Observation {
        let unavailable = |status| Observation {
            question_index,
            task,
            sensor,
            payload: String::new(),
            status,
        };
        if sensor != assign_sensor(task) {
            log::warn!("task {task} cannot run on {sensor}");
            return unavailable(ObservationStatus::SensorUnavailable);
        }
        let Some(backend) = self.backends.get(&sensor) else {
            return unavailable(ObservationStatus::SensorUnavailable);
        };
        let reading = catch_unwind(AssertUnwindSafe(|| {
            backend.sense(task, attachments, prompt)
        }))
        .unwrap_or_else(|_| {
            log::error!("{sensor} backend panicked on {task}");
            SensorReading::Unavailable
        });
        match reading {
            SensorReading::Data(payload) if !payload.is_empty() => Observation {
                question_index,
                task,
                sensor,
                payload,
                status: ObservationStatus::Ok,
            },
            SensorReading::Data(_) | SensorReading::NoData => {
                unavailable(ObservationStatus::NoData)
            }
            SensorReading::Unavailable => unavailable(ObservationStatus::SensorUnavailable),
        }
    }
}

/// File name of the sentiment fixture inside a fixture root.
pub const SENTIMENT_FIXTURE: &str = "sentiment.json";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("fixture {path} is malformed: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

/// Answers perception tasks from precomputed scene files.
///
/// The attachment for the task's modality names a JSON object (relative to
/// the fixture root) holding one string per task key.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    root: PathBuf,
}

impl FixtureBackend {
    pub fn new(root: impl AsRef<Path>) -> Self {
        Self {
            root: root.as_ref().to_path_buf(),
        }
    }

    fn load_scene(&self, reference: &str) -> Option<BTreeMap<String, serde_json::Value>> {
        let path = self.root.join(reference);
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(err) => {
                log::warn!("scene fixture {} unreadable: {err}", path.display());
                return None;
            }
        };
        match serde_json::from_str(&text) {
            Ok(scene) => Some(scene),
            Err(err) => {
                log::warn!("scene fixture {} malformed: {err}", path.display());
                None
            }
        }
    }
}

impl SensorBackend for FixtureBackend {
    fn sense(&self, task: Task, attachments: &AttachmentSet, _prompt: &str) -> SensorReading {
        let Some(reference) = attachments.get(task.modality()) else {
            return SensorReading::NoData;
        };
        let payload = self
            .load_scene(reference)
            .and_then(|scene| scene.get(task.key()).and_then(|v| v.as_str().map(String::from)));
        match payload {
            Some(p) => SensorReading::Data(p),
            None => SensorReading::NoData,
        }
    }
}

/// Hex prefix of the SHA-256 of a prompt, the key used by sentiment fixtures.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Canned sentiment labels keyed by [`prompt_hash`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentFixture {
    #[serde(default)]
    labels: BTreeMap<String, String>,
    #[serde(default)]
    default: Option<String>,
}

impl SentimentFixture {
    pub fn from_path(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| FixtureError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn with_label(mut self, prompt: &str, label: impl Into<String>) -> Self {
        self.labels.insert(prompt_hash(prompt), label.into());
        self
    }
}

impl SensorBackend for SentimentFixture {
    fn sense(&self, task: Task, _attachments: &AttachmentSet, prompt: &str) -> SensorReading {
        if task != Task::SentimentAnalysis {
            return SensorReading::Unavailable;
        }
        self.labels
            .get(&prompt_hash(prompt))
            .or(self.default.as_ref())
            .map_or(SensorReading::NoData, |l| SensorReading::Data(l.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::modality_of_task;

    fn fixture_root() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
    }

    #[test]
    fn assignment_examples() {
        assert_eq!(assign_sensor(Task::SpatialDetection), Sensor::Lidar);
        assert_eq!(assign_sensor(Task::Captioning), Sensor::Camera);
        assert_eq!(assign_sensor(Task::SentimentAnalysis), Sensor::TextAnalyzer);
    }

    #[test]
    fn sensor_and_modality_tables_agree() {
        for task in Task::ALL {
            assert_eq!(assign_sensor(task).modality(), modality_of_task(task), "{task}");
        }
    }

    #[test]
    fn fixture_passes_scene_field_through() {
        let registry = SensorRegistry::with_fixtures(fixture_root()).unwrap();
        let att = AttachmentSet::new().with(Modality::Vision, "scenes/avsd_1.json");
        let obs = registry.execute(0, Task::ObjectDetection, Sensor::Camera, &att, "p");
        assert_eq!(obs.status, ObservationStatus::Ok);
        assert_eq!(obs.payload, "person, sofa, table (clip 1)");
    }

    #[test]
    fn missing_modality_is_no_data() {
        let registry = SensorRegistry::with_fixtures(fixture_root()).unwrap();
        let att = AttachmentSet::new().with(Modality::Vision, "scenes/avsd_1.json");
        let obs = registry.execute(3, Task::SpeechToText, Sensor::Microphone, &att, "p");
        assert_eq!(obs.status, ObservationStatus::NoData);
        assert_eq!(obs.payload, "");
        assert_eq!(obs.question_index, 3);
    }

    #[test]
    fn unregistered_backend_is_unavailable() {
        let registry = SensorRegistry::new();
        for task in Task::ALL {
            let obs = registry.execute(0, task, assign_sensor(task), &AttachmentSet::new(), "p");
            assert_eq!(obs.status, ObservationStatus::SensorUnavailable);
        }
    }

    #[test]
    fn last_registration_wins() {
        let first = |_: Task, _: &AttachmentSet, _: &str| SensorReading::Data("first".into());
        let second = |_: Task, _: &AttachmentSet, _: &str| SensorReading::Data("second".into());
        let registry = SensorRegistry::new()
            .register_backend(Sensor::Camera, first)
            .register_backend(Sensor::Camera, second);
        let obs = registry.execute(0, Task::Captioning, Sensor::Camera, &AttachmentSet::new(), "");
        assert_eq!(obs.payload, "second");
    }

    #[test]
    fn full_registry_never_unavailable() {
        let registry = SensorRegistry::with_fixtures(fixture_root()).unwrap();
        for sensor in Sensor::ALL {
            assert!(registry.is_registered(sensor));
        }
        for task in Task::ALL {
            let obs = registry.execute(0, task, assign_sensor(task), &AttachmentSet::new(), "x");
            assert_ne!(obs.status, ObservationStatus::SensorUnavailable);
        }
    }

    #[test]
    fn empty_payload_becomes_no_data() {
        let registry = SensorRegistry::new()
            .register_backend(Sensor::Lidar, |_: Task, _: &AttachmentSet, _: &str| {
                SensorReading::Data(String::new())
            });
        let obs = registry.execute(0, Task::SpatialDetection, Sensor::Lidar, &AttachmentSet::new(), "");
        assert_eq!(obs.status, ObservationStatus::NoData);
    }

    #[test]
    fn panicking_backend_is_contained() {
        let registry = SensorRegistry::new()
            .register_backend(Sensor::Lidar, |_: Task, _: &AttachmentSet, _: &str| -> SensorReading {
                panic!("driver fault")
            });
        let obs = registry.execute(0, Task::SpatialDetection, Sensor::Lidar, &AttachmentSet::new(), "");
        assert_eq!(obs.status, ObservationStatus::SensorUnavailable);
    }

    #[test]
    fn wrong_sensor_for_task() {
        let registry = SensorRegistry::with_fixtures(fixture_root()).unwrap();
        let obs = registry.execute(0, Task::SpatialDetection, Sensor::Camera, &AttachmentSet::new(), "");
        assert_eq!(obs.status, ObservationStatus::SensorUnavailable);
    }

    #[test]
    fn sentiment_by_prompt_hash() {
        let fixture = SentimentFixture::default().with_label("I love this", "positive");
        let registry = SensorRegistry::new().register_backend(Sensor::TextAnalyzer, fixture);
        let att = AttachmentSet::new();
        let hit = registry.execute(0, Task::SentimentAnalysis, Sensor::TextAnalyzer, &att, "I love this");
        assert_eq!(hit.payload, "positive");
        let miss = registry.execute(0, Task::SentimentAnalysis, Sensor::TextAnalyzer, &att, "meh");
        assert_eq!(miss.status, ObservationStatus::NoData);
    }

    #[test]
    fn attachments_reject_text() {
        let mut att = AttachmentSet::new();
        assert!(att.insert(Modality::Text, "x").is_err());
        assert!(serde_json::from_str::<AttachmentSet>(r#"{"text": "a.json"}"#).is_err());
        let ok: AttachmentSet = serde_json::from_str(r#"{"audio": "a.json"}"#).unwrap();
        assert_eq!(ok.get(Modality::Audio), Some("a.json"));
    }

    #[test]
    fn prompt_hash_is_stable() {
        assert_eq!(prompt_hash("abc"), "ba7816bf8f01cfea");
    }
}
