//! The closed question → task → modality taxonomy and the question parser.
//!
//! Ten canonical curiosity questions each name one perception task; every
//! task belongs to exactly one modality. Free-form model output is split into
//! candidate question lines and each line is mapped to at most one task,
//! first by exact match against the canonical wording and then by a
//! data-driven keyword table.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel a model emits when a prompt needs no extra perception.
pub const NO_QUESTION: &str = "NO_QUESTION";

/// Default acceptance threshold for keyword matches.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Keyword table shipped with the crate.
pub const DEFAULT_KEYWORDS_JSON: &str = include_str!("../assets/keywords.v1.json");

/// A sensory information channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Vision,
    Audio,
    Spatial,
}

/// Set of modalities, ordered by declaration.
pub type ModalitySet = BTreeSet<Modality>;

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Text,
        Modality::Vision,
        Modality::Audio,
        Modality::Spatial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Vision => "vision",
            Modality::Audio => "audio",
            Modality::Spatial => "spatial",
        }
    }

    /// True for modalities that need something beyond the prompt itself.
    pub fn is_hardware(self) -> bool {
        !matches!(self, Modality::Text)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TaxonomyError::UnknownModality(s.to_string()))
    }
}

/// Drops `Text` from a modality set.
pub fn hardware_only(set: &ModalitySet) -> ModalitySet {
    set.iter().copied().filter(|m| m.is_hardware()).collect()
}

/// Stable label for a modality set: names sorted alphabetically and joined
/// with `+`, or `none` for the empty set.
pub fn modality_class_label(set: &ModalitySet) -> String {
    let mut names: Vec<&str> = set.iter().map(|m| m.name()).collect();
    if names.is_empty() {
        return "none".to_string();
    }
    names.sort_unstable();
    names.join("+")
}

/// Perception tasks, in canonical table row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "object_detection")]
    ObjectDetection,
    #[serde(rename = "captioning")]
    Captioning,
    #[serde(rename = "stt")]
    SpeechToText,
    #[serde(rename = "sound_event_detection")]
    SoundEventDetection,
    #[serde(rename = "sentiment_analysis")]
    SentimentAnalysis,
    #[serde(rename = "spatial_detection")]
    SpatialDetection,
    #[serde(rename = "pose_estimation")]
    PoseEstimation,
    #[serde(rename = "action_recognition")]
    ActionRecognition,
    #[serde(rename = "speaker_id")]
    SpeakerId,
    #[serde(rename = "language_id")]
    LanguageId,
}

impl Task {
    /// All tasks in table row order. Earlier rows win keyword ties.
    pub const ALL: [Task; 10] = [
        Task::ObjectDetection,
        Task::Captioning,
        Task::SpeechToText,
        Task::SoundEventDetection,
        Task::SentimentAnalysis,
        Task::SpatialDetection,
        Task::PoseEstimation,
        Task::ActionRecognition,
        Task::SpeakerId,
        Task::LanguageId,
    ];

    /// lower_snake_case key used in keyword tables and scene fixtures.
    pub fn key(self) -> &'static str {
        match self {
            Task::ObjectDetection => "object_detection",
            Task::Captioning => "captioning",
            Task::SpeechToText => "stt",
            Task::SoundEventDetection => "sound_event_detection",
            Task::SentimentAnalysis => "sentiment_analysis",
            Task::SpatialDetection => "spatial_detection",
            Task::PoseEstimation => "pose_estimation",
            Task::ActionRecognition => "action_recognition",
            Task::SpeakerId => "speaker_id",
            Task::LanguageId => "language_id",
        }
    }

    pub fn row(self) -> usize {
        self as usize
    }

    pub fn modality(self) -> Modality {
        modality_of_task(self)
    }

    pub fn canonical_question(self) -> CanonicalQuestion {
        CanonicalQuestion::for_task(self)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Task {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        Task::ALL
            .into_iter()
            .find(|t| t.key() == wanted)
            .ok_or_else(|| TaxonomyError::UnknownTask(s.to_string()))
    }
}

/// Modality each task draws on.
pub fn modality_of_task(task: Task) -> Modality {
    match task {
        Task::ObjectDetection
        | Task::Captioning
        | Task::PoseEstimation
        | Task::ActionRecognition => Modality::Vision,
        Task::SpeechToText
        | Task::SoundEventDetection
        | Task::SpeakerId
        | Task::LanguageId => Modality::Audio,
        Task::SpatialDetection => Modality::Spatial,
        Task::SentimentAnalysis => Modality::Text,
    }
}

/// The ten canonical curiosity questions plus the "no question" sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CanonicalQuestion {
    WhatDoISee,
    WhoAmILookingAt,
    WhatAreTheySaying,
    WhatAmIHearing,
    WhatIsTheSentiment,
    WhatIsTheSpatialLocation,
    WhatIsThePose,
    WhatAreTheyDoing,
    WhoIsTalking,
    WhatLanguage,
    NoQuestion,
}

impl CanonicalQuestion {
    pub const QUESTIONS: [CanonicalQuestion; 10] = [
        CanonicalQuestion::WhatDoISee,
        CanonicalQuestion::WhoAmILookingAt,
        CanonicalQuestion::WhatAreTheySaying,
        CanonicalQuestion::WhatAmIHearing,
        CanonicalQuestion::WhatIsTheSentiment,
        CanonicalQuestion::WhatIsTheSpatialLocation,
        CanonicalQuestion::WhatIsThePose,
        CanonicalQuestion::WhatAreTheyDoing,
        CanonicalQuestion::WhoIsTalking,
        CanonicalQuestion::WhatLanguage,
    ];

    /// Exact surface wording.
    pub fn surface(self) -> &'static str {
        match self {
            CanonicalQuestion::WhatDoISee => "What do I see?",
            CanonicalQuestion::WhoAmILookingAt => "Who am I looking at?",
            CanonicalQuestion::WhatAreTheySaying => "What are they saying?",
            CanonicalQuestion::WhatAmIHearing => "What am I hearing?",
            CanonicalQuestion::WhatIsTheSentiment => "What is the sentiment?",
            CanonicalQuestion::WhatIsTheSpatialLocation => "What is the spatial location?",
            CanonicalQuestion::WhatIsThePose => "What is the pose?",
            CanonicalQuestion::WhatAreTheyDoing => "What are they doing?",
            CanonicalQuestion::WhoIsTalking => "Who is talking?",
            CanonicalQuestion::WhatLanguage => "What language?",
            CanonicalQuestion::NoQuestion => NO_QUESTION,
        }
    }

    /// Paired task; `None` only for the sentinel.
    pub fn task(self) -> Option<Task> {
        match self {
            CanonicalQuestion::WhatDoISee => Some(Task::ObjectDetection),
            CanonicalQuestion::WhoAmILookingAt => Some(Task::Captioning),
            CanonicalQuestion::WhatAreTheySaying => Some(Task::SpeechToText),
            CanonicalQuestion::WhatAmIHearing => Some(Task::SoundEventDetection),
            CanonicalQuestion::WhatIsTheSentiment => Some(Task::SentimentAnalysis),
            CanonicalQuestion::WhatIsTheSpatialLocation => Some(Task::SpatialDetection),
            CanonicalQuestion::WhatIsThePose => Some(Task::PoseEstimation),
            CanonicalQuestion::WhatAreTheyDoing => Some(Task::ActionRecognition),
            CanonicalQuestion::WhoIsTalking => Some(Task::SpeakerId),
            CanonicalQuestion::WhatLanguage => Some(Task::LanguageId),
            CanonicalQuestion::NoQuestion => None,
        }
    }

    pub fn for_task(task: Task) -> CanonicalQuestion {
        CanonicalQuestion::QUESTIONS[task.row()]
    }

    /// Looks up a canonical question by its surface wording (normalized).
    pub fn from_surface(text: &str) -> Option<CanonicalQuestion> {
        let wanted = normalize(text);
        if wanted == normalize(NO_QUESTION) {
            return Some(CanonicalQuestion::NoQuestion);
        }
        CanonicalQuestion::QUESTIONS
            .into_iter()
            .find(|q| normalize(q.surface()) == wanted)
    }
}

/// Lowercases, trims, collapses internal whitespace and strips terminal
/// `?`, `.` and `!`.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| matches!(c, '?' | '.' | '!') || c.is_whitespace())
        .to_string()
}

fn tokens(normalized: &str) -> HashSet<&str> {
    normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown task name `{0}`")]
    UnknownTask(String),
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("keyword table is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read keyword table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("keyword table is missing task `{0}`")]
    MissingTask(&'static str),
    #[error("task `{task}`: {reason}")]
    InvalidEntry { task: String, reason: String },
    #[error("acceptance threshold {0} is outside (0, 1]")]
    BadThreshold(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKeywordEntry {
    keywords: Vec<String>,
    weights: Vec<f64>,
    #[serde(default)]
    all_of: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
struct KeywordRule {
    weights: BTreeMap<String, f64>,
    all_of: Vec<Vec<String>>,
}

impl KeywordRule {
    fn score(&self, toks: &HashSet<&str>) -> f64 {
        let gated = self
            .all_of
            .iter()
            .all(|group| group.iter().any(|k| toks.contains(k.as_str())));
        if !gated {
            return 0.0;
        }
        let sum: f64 = self
            .weights
            .iter()
            .filter(|(k, _)| toks.contains(k.as_str()))
            .map(|(_, w)| *w)
            .sum();
        sum.min(1.0)
    }
}

/// Per-task keyword weights used for the paraphrase stage of task mapping.
///
/// A task's score is the sum of the weights of its keywords present as
/// tokens in the normalized question, capped at 1. When a task declares
/// `all_of` groups, each group must contribute at least one token or the
/// score is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordTable {
    rules: Vec<KeywordRule>,
}

impl KeywordTable {
    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let raw: BTreeMap<String, RawKeywordEntry> = serde_json::from_str(text)?;
        for name in raw.keys() {
            name.parse::<Task>()
                .ok()
                .filter(|t| t.key() == name)
                .ok_or_else(|| TaxonomyError::UnknownTask(name.clone()))?;
        }
        let mut rules = Vec::with_capacity(Task::ALL.len());
        for task in Task::ALL {
            let entry = raw
                .get(task.key())
                .ok_or(TaxonomyError::MissingTask(task.key()))?;
            rules.push(Self::validate(task, entry)?);
        }
        Ok(Self { rules })
    }

    pub fn from_path(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn validate(task: Task, entry: &RawKeywordEntry) -> Result<KeywordRule, TaxonomyError> {
        let bad = |reason: String| TaxonomyError::InvalidEntry {
            task: task.key().to_string(),
            reason,
        };
        if entry.keywords.is_empty() {
            return Err(bad("no keywords".into()));
        }
        if entry.keywords.len() != entry.weights.len() {
            return Err(bad(format!(
                "{} keywords but {} weights",
                entry.keywords.len(),
                entry.weights.len()
            )));
        }
        let mut weights = BTreeMap::new();
        for (kw, &w) in entry.keywords.iter().zip(&entry.weights) {
            if !(w > 0.0 && w <= 1.0) {
                return Err(bad(format!("weight {w} for `{kw}` is outside (0, 1]")));
            }
            if kw.is_empty() || kw.chars().any(|c| !c.is_alphanumeric()) || normalize(kw) != *kw {
                return Err(bad(format!("keyword `{kw}` is not a single lowercase token")));
            }
            if weights.insert(kw.clone(), w).is_some() {
                return Err(bad(format!("duplicate keyword `{kw}`")));
            }
        }
        for group in &entry.all_of {
            if group.is_empty() {
                return Err(bad("empty all_of group".into()));
            }
            if let Some(kw) = group.iter().find(|k| !weights.contains_key(k.as_str())) {
                return Err(bad(format!("all_of names undeclared keyword `{kw}`")));
            }
        }
        Ok(KeywordRule {
            weights,
            all_of: entry.all_of.clone(),
        })
    }

    /// Keyword score of every task, in table row order.
    pub fn scores(&self, normalized: &str) -> [f64; 10] {
        let toks = tokens(normalized);
        let mut out = [0.0; 10];
        for (slot, rule) in out.iter_mut().zip(&self.rules) {
            *slot = rule.score(&toks);
        }
        out
    }
}

impl Default for KeywordTable {
    fn default() -> Self {
        Self::from_json(DEFAULT_KEYWORDS_JSON).expect("bundled keyword table is valid")
    }
}

/// Outcome of mapping one question to a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskMatch {
    pub task: Option<Task>,
    pub score: f64,
}

/// One candidate question extracted from a model generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedQuestion {
    pub raw_text: String,
    pub matched_task: Option<Task>,
    pub match_score: f64,
    pub question_index: usize,
}

/// The task selection function: question text → task.
#[derive(Debug, Clone)]
pub struct TaskMapper {
    table: KeywordTable,
    threshold: f64,
    canonical: Vec<(String, Task)>,
}

impl Default for TaskMapper {
    fn default() -> Self {
        Self::new(KeywordTable::default())
    }
}

impl TaskMapper {
    pub fn new(table: KeywordTable) -> Self {
        let canonical = Task::ALL
            .into_iter()
            .map(|t| (normalize(t.canonical_question().surface()), t))
            .collect();
        Self {
            table,
            threshold: DEFAULT_THRESHOLD,
            canonical,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, TaxonomyError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(TaxonomyError::BadThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn map_task(&self, question_text: &str) -> TaskMatch {
        let norm = normalize(question_text);
        if let Some((_, task)) = self.canonical.iter().find(|(c, _)| *c == norm) {
            return TaskMatch {
                task: Some(*task),
                score: 1.0,
            };
        }
        let scores = self.table.scores(&norm);
        let mut best = (0usize, scores[0]);
        for (row, &s) in scores.iter().enumerate().skip(1) {
            if s > best.1 {
                best = (row, s);
            }
        }
        let (row, score) = best;
        TaskMatch {
            task: (score >= self.threshold).then_some(Task::ALL[row]),
            score,
        }
    }

    /// Splits a raw generation into candidate question lines and maps each
    /// one to a task.
    pub fn parse_questions(&self, raw_generation: &str) -> Vec<ParsedQuestion> {
        if raw_generation.trim().eq_ignore_ascii_case(NO_QUESTION) {
            return Vec::new();
        }
        raw_generation
            .lines()
            .filter_map(candidate_question)
            .enumerate()
            .map(|(question_index, text)| {
                let m = self.map_task(text);
                ParsedQuestion {
                    raw_text: text.to_string(),
                    matched_task: m.task,
                    match_score: m.score,
                    question_index,
                }
            })
            .collect()
    }
}

/// Returns the question text of a candidate line with any list marker
/// removed, or `None` for non-candidate lines.
fn candidate_question(line: &str) -> Option<&str> {
    let line = line.trim();
    if line.is_empty() {
        return None;
    }
    let (text, marked) = match strip_list_marker(line) {
        Some(rest) => (rest.trim(), true),
        None => (line, false),
    };
    if text.is_empty() || text.eq_ignore_ascii_case(NO_QUESTION) {
        return None;
    }
    (marked || text.ends_with('?')).then_some(text)
}

fn strip_list_marker(line: &str) -> Option<&str> {
    for bullet in ['-', '*', '•'] {
        if let Some(rest) = line.strip_prefix(bullet) {
            if rest.starts_with(char::is_whitespace) {
                return Some(rest);
            }
        }
    }

    // "1." / "12)"
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(after) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if after.is_empty() || after.starts_with(char::is_whitespace) {
                return Some(after);
            }
        }
        return None;
    }

    // "Q:" / "Q3:" / "Question:" / "Question 3:"
    let lower = line.to_ascii_lowercase();
    for word in ["question", "q"] {
        if lower.starts_with(word) {
            let rest = line[word.len()..].trim_start();
            let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
            if let Some(after) = rest[digits..].strip_prefix(':') {
                return Some(after);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("What do I see?"), "what do i see");
        assert_eq!(normalize("  WHAT   AM I HEARING?? "), "what am i hearing");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("what ? !"), "what");
    }

    #[test]
    fn table_row_order_and_pairing() {
        for (row, task) in Task::ALL.into_iter().enumerate() {
            assert_eq!(task.row(), row);
            assert_eq!(CanonicalQuestion::QUESTIONS[row].task(), Some(task));
            assert_eq!(CanonicalQuestion::for_task(task).task(), Some(task));
        }
        assert_eq!(CanonicalQuestion::NoQuestion.task(), None);
    }

    #[test]
    fn modality_table() {
        assert_eq!(modality_of_task(Task::ObjectDetection), Modality::Vision);
        assert_eq!(modality_of_task(Task::SpeechToText), Modality::Audio);
        assert_eq!(modality_of_task(Task::SpatialDetection), Modality::Spatial);
        assert_eq!(modality_of_task(Task::SentimentAnalysis), Modality::Text);
    }

    #[test]
    fn task_names_round_trip() {
        for task in Task::ALL {
            assert_eq!(task.key().parse::<Task>().unwrap(), task);
            let json = serde_json::to_string(&task).unwrap();
            assert_eq!(json, format!("\"{}\"", task.key()));
        }
        assert!("teleportation".parse::<Task>().is_err());
    }

    #[test]
    fn markers() {
        assert_eq!(strip_list_marker("1. What do I see?"), Some(" What do I see?"));
        assert_eq!(strip_list_marker("12) where"), Some(" where"));
        assert_eq!(strip_list_marker("Q: where"), Some(" where"));
        assert_eq!(strip_list_marker("q2: where"), Some(" where"));
        assert_eq!(strip_list_marker("Question 3: where"), Some(" where"));
        assert_eq!(strip_list_marker("- where"), Some(" where"));
        assert_eq!(strip_list_marker("1.5 is a number"), None);
        assert_eq!(strip_list_marker("-5 degrees"), None);
        assert_eq!(strip_list_marker("Quick brown fox"), None);
    }

    #[test]
    fn parse_two_numbered_questions() {
        let mapper = TaskMapper::default();
        let parsed = mapper.parse_questions("1. What do I see?\n2. What am I hearing?");
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].matched_task, Some(Task::ObjectDetection));
        assert_eq!(parsed[1].matched_task, Some(Task::SoundEventDetection));
        assert_eq!(parsed[0].question_index, 0);
        assert_eq!(parsed[1].question_index, 1);
        assert_eq!(parsed[0].raw_text, "What do I see?");
    }

    #[test]
    fn parse_sentinel_and_prose() {
        let mapper = TaskMapper::default();
        assert!(mapper.parse_questions("NO_QUESTION").is_empty());
        assert!(mapper.parse_questions("  no_question \n").is_empty());
        assert!(mapper.parse_questions("The answer is Paris.").is_empty());
        assert!(mapper.parse_questions("").is_empty());
        assert!(mapper.parse_questions("- \n1.\nQ:").is_empty());
    }

    #[test]
    fn unmatched_question_is_still_parsed() {
        let mapper = TaskMapper::default();
        let parsed = mapper.parse_questions("Is it raining on Mars?");
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].matched_task, None);
    }

    #[test]
    fn speaker_id_needs_both_groups() {
        let mapper = TaskMapper::default();
        assert_eq!(mapper.map_task("who is talking right now").task, Some(Task::SpeakerId));
        assert_eq!(mapper.map_task("is anyone talking or speaking").task, None);
        assert_eq!(mapper.map_task("who is in front of me").task, Some(Task::Captioning));
    }

    #[test]
    fn keyword_ties_go_to_earlier_row() {
        let mapper = TaskMapper::default();
        let m = mapper.map_task("What do I see and hear?");
        assert_eq!(m.task, Some(Task::ObjectDetection));
        assert!((m.score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn threshold_bounds() {
        assert!(TaskMapper::default().with_threshold(1.5).is_err());
        let strict = TaskMapper::default().with_threshold(0.9).unwrap();
        assert_eq!(strict.map_task("what are they saying now").task, None);
        assert_eq!(strict.map_task("What are they saying?").task, Some(Task::SpeechToText));
    }

    #[test]
    fn keyword_table_rejects_bad_schemas() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_KEYWORDS_JSON).unwrap();
        v.as_object_mut().unwrap().remove("stt");
        assert!(matches!(
            KeywordTable::from_json(&v.to_string()),
            Err(TaxonomyError::MissingTask("stt"))
        ));

        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_KEYWORDS_JSON).unwrap();
        v["telepathy"] = serde_json::json!({"keywords": ["mind"], "weights": [1.0]});
        assert!(matches!(
            KeywordTable::from_json(&v.to_string()),
            Err(TaxonomyError::UnknownTask(_))
        ));

        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_KEYWORDS_JSON).unwrap();
        v["stt"]["weights"] = serde_json::json!([0.5]);
        assert!(matches!(
            KeywordTable::from_json(&v.to_string()),
            Err(TaxonomyError::InvalidEntry { .. })
        ));

        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_KEYWORDS_JSON).unwrap();
        v["language_id"] = serde_json::json!({"keywords": ["Language"], "weights": [0.6]});
        assert!(KeywordTable::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn class_labels() {
        assert_eq!(modality_class_label(&ModalitySet::new()), "none");
        let av: ModalitySet = [Modality::Vision, Modality::Audio].into();
        assert_eq!(modality_class_label(&av), "audio+vision");
    }
}
