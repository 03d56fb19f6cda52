//! Canonical benchmark records: JSONL ingestion, merging and statistics.
//!
//! Each record's gold modality set is fixed by its source corpus and is
//! re-derived on load, whatever the file says.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensors::AttachmentSet;
use crate::taxonomy::{modality_class_label, Modality, ModalitySet};

/// Text-only prompts in the full WebGPT export.
pub const WEBGPT_FULL_COUNT: usize = 19_578;
/// Question-answer pairs in the full ScanQA export.
pub const SCANQA_FULL_COUNT: usize = 41_363;
/// Records in the full merged benchmark.
pub const BENCHMARK_FULL_COUNT: usize = 180_629;

/// Gold-class labels in display order.
pub const GOLD_CLASSES: [&str; 4] = ["none", "vision", "audio+vision", "spatial"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[serde(rename = "webgpt")]
    WebGpt,
    #[serde(rename = "scienceqa_text")]
    ScienceQaText,
    #[serde(rename = "scienceqa_image")]
    ScienceQaImage,
    Avsd,
    #[serde(rename = "scanqa")]
    ScanQa,
}

impl SourceKind {
    pub const ALL: [SourceKind; 5] = [
        SourceKind::WebGpt,
        SourceKind::ScienceQaText,
        SourceKind::ScienceQaImage,
        SourceKind::Avsd,
        SourceKind::ScanQa,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SourceKind::WebGpt => "webgpt",
            SourceKind::ScienceQaText => "scienceqa_text",
            SourceKind::ScienceQaImage => "scienceqa_image",
            SourceKind::Avsd => "avsd",
            SourceKind::ScanQa => "scanqa",
        }
    }

    /// The modalities every record of this source requires.
    pub fn gold_modalities(self) -> ModalitySet {
        match self {
            SourceKind::WebGpt | SourceKind::ScienceQaText => ModalitySet::new(),
            SourceKind::ScienceQaImage => [Modality::Vision].into(),
            SourceKind::Avsd => [Modality::Audio, Modality::Vision].into(),
            SourceKind::ScanQa => [Modality::Spatial].into(),
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown source `{s}`"))
    }
}

/// One labeled benchmark prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub id: String,
    pub source: SourceKind,
    pub prompt: String,
    pub gold_modalities: ModalitySet,
    pub gold_answer: Option<String>,
    pub attachments: AttachmentSet,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    source: SourceKind,
    prompt: String,
    #[serde(default)]
    gold_modalities: Vec<Modality>,
    #[serde(default)]
    gold_answer: Option<String>,
    #[serde(default)]
    attachments: AttachmentSet,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: schema error at line {line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: empty prompt at line {line}")]
    EmptyPrompt { path: String, line: usize },
    #[error("duplicate id `{id}` in {first} and {second}")]
    DuplicateId {
        id: String,
        first: String,
        second: String,
    },
}

/// Non-fatal findings while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    GoldOverridden {
        id: String,
        stored: ModalitySet,
        forced: ModalitySet,
    },
    SourceOverridden {
        id: String,
        stored: SourceKind,
        forced: SourceKind,
    },
    MissingAttachment { id: String, modality: Modality },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::GoldOverridden { id, stored, forced } => write!(
                f,
                "{id}: stored gold `{}` replaced by `{}`",
                modality_class_label(stored),
                modality_class_label(forced)
            ),
            IngestWarning::SourceOverridden { id, stored, forced } => {
                write!(f, "{id}: stored source `{stored}` replaced by `{forced}`")
            }
            IngestWarning::MissingAttachment { id, modality } => {
                write!(f, "{id}: no {modality} attachment for a gold modality")
            }
        }
    }
}

/// Records plus any warnings raised while reading them.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<BenchmarkRecord>,
    pub warnings: Vec<IngestWarning>,
}

fn open(path: &Path) -> Result<BufReader<File>, DatasetError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Reads a single-source file. The given `kind` overrides each row's stored
/// source and gold set, and ids gain the `<source>:` prefix if missing.
pub fn ingest_source(path: &Path, kind: SourceKind) -> Result<Ingested, DatasetError> {
    parse_jsonl(open(path)?, &path.display().to_string(), Some(kind))
}

/// Reads a file whose rows may come from several sources (for example a
/// merged benchmark); each row keeps its own source.
pub fn read_records(path: &Path) -> Result<Ingested, DatasetError> {
    parse_jsonl(open(path)?, &path.display().to_string(), None)
}

pub fn parse_jsonl(
    reader: impl BufRead,
    label: &str,
    kind: Option<SourceKind>,
) -> Result<Ingested, DatasetError> {
    let mut out = Ingested::default();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: label.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| DatasetError::Schema {
            path: label.to_string(),
            line: line_no,
            message,
        };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if raw.prompt.trim().is_empty() {
            return Err(DatasetError::EmptyPrompt {
                path: label.to_string(),
                line: line_no,
            });
        }
        if raw.id.trim().is_empty() {
            return Err(schema("empty id".into()));
        }
        if raw.gold_modalities.contains(&Modality::Text) {
            return Err(schema("`text` is not a gold modality".into()));
        }

        let source = kind.unwrap_or(raw.source);
        let prefix = format!("{}:", source.tag());
        let id = if raw.id.starts_with(&prefix) {
            raw.id
        } else {
            format!("{prefix}{}", raw.id)
        };
        if raw.source != source {
            out.warnings.push(IngestWarning::SourceOverridden {
                id: id.clone(),
                stored: raw.source,
                forced: source,
            });
        }
        let stored: ModalitySet = raw.gold_modalities.into_iter().collect();
        let forced = source.gold_modalities();
        if stored != forced {
            out.warnings.push(IngestWarning::GoldOverridden {
                id: id.clone(),
                stored,
                forced: forced.clone(),
            });
        }
        for m in &forced {
            if !raw.attachments.contains(*m) {
                out.warnings.push(IngestWarning::MissingAttachment {
                    id: id.clone(),
                    modality: *m,
                });
            }
        }
        out.records.push(BenchmarkRecord {
            id,
            source,
            prompt: raw.prompt,
            gold_modalities: forced,
            gold_answer: raw.gold_answer,
            attachments: raw.attachments,
        });
    }
    for w in &out.warnings {
        log::warn!("{label}: {w}");
    }
    Ok(out)
}

/// A merged, duplicate-free benchmark. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<BenchmarkRecord>,
}

impl Dataset {
    pub fn records(&self) -> &[BenchmarkRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<BenchmarkRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        stats(&self.records)
    }

    pub fn write_jsonl(&self, out: impl Write) -> std::io::Result<()> {
        write_jsonl(&self.records, out)
    }
}

/// Concatenates parts in order, rejecting repeated ids.
pub fn merge(parts: Vec<Vec<BenchmarkRecord>>) -> Result<Dataset, DatasetError> {
    let mut seen: HashMap<String, (usize, SourceKind)> = HashMap::new();
    let mut records = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for (part, recs) in parts.into_iter().enumerate() {
        for r in recs {
            if let Some((first_part, first_src)) = seen.get(&r.id) {
                return Err(DatasetError::DuplicateId {
                    id: r.id.clone(),
                    first: format!("part {first_part} ({first_src})"),
                    second: format!("part {part} ({})", r.source),
                });
            }
            seen.insert(r.id.clone(), (part, r.source));
            records.push(r);
        }
    }
    Ok(Dataset { records })
}

pub fn write_jsonl(records: &[BenchmarkRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Exact counts per source and per gold class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub per_source: BTreeMap<SourceKind, usize>,
    pub per_class: BTreeMap<String, usize>,
    pub total: usize,
}

pub fn stats(records: &[BenchmarkRecord]) -> DatasetStats {
    let mut per_source: BTreeMap<SourceKind, usize> =
        SourceKind::ALL.into_iter().map(|k| (k, 0)).collect();
    let mut per_class: BTreeMap<String, usize> =
        GOLD_CLASSES.iter().map(|c| (c.to_string(), 0)).collect();
    for r in records {
        *per_source.entry(r.source).or_default() += 1;
        *per_class
            .entry(modality_class_label(&r.gold_modalities))
            .or_default() += 1;
    }
    DatasetStats {
        per_source,
        per_class,
        total: records.len(),
    }
}

impl DatasetStats {
    pub fn source_count(&self, kind: SourceKind) -> usize {
        self.per_source.get(&kind).copied().unwrap_or(0)
    }

    pub fn class_count(&self, class: &str) -> usize {
        self.per_class.get(class).copied().unwrap_or(0)
    }

    /// Differences from the full-benchmark record counts, one message each.
    pub fn reference_mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |what: &str, got: usize, want: usize| {
            if got != want {
                out.push(format!("{what}: expected {want}, found {got}"));
            }
        };
        check("webgpt", self.source_count(SourceKind::WebGpt), WEBGPT_FULL_COUNT);
        check("scanqa", self.source_count(SourceKind::ScanQa), SCANQA_FULL_COUNT);
        check("total", self.total, BENCHMARK_FULL_COUNT);
        out
    }

    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let mut s = String::from("source           count\n");
        for (k, n) in &self.per_source {
            s.push_str(&format!("{:<16} {n}\n", k.tag()));
        }
        s.push_str("\ngold class       count\n");
        let mut classes: Vec<_> = self.per_class.iter().collect();
        classes.sort_by_key(|(c, _)| {
            GOLD_CLASSES
                .iter()
                .position(|g| g == c)
                .unwrap_or(GOLD_CLASSES.len())
        });
        for (c, n) in classes {
            s.push_str(&format!("{c:<16} {n}\n"));
        }
        s.push_str(&format!("\ntotal            {}\n", self.total));
        s
    }
}
