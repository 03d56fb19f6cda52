//! Modality-alignment (match/mismatch) and curiosity (asked/did-not-ask)
//! metrics over a benchmark, plus Markdown/CSV report rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::LanguageBackend;
use crate::dataset::BenchmarkRecord;
use crate::pipeline::{run, PipelineConfig, PipelineError, RunTrace};
use crate::sensors::SensorRegistry;
use crate::taxonomy::{hardware_only, ModalitySet, ParsedQuestion};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("percentage of an empty population (both counts are zero)")]
    DivisionByZero,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// How activated modalities are compared against the gold set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchRule {
    /// Sets must be equal.
    #[default]
    Exact,
    /// Activated must cover gold; an empty gold set still requires no
    /// activation.
    Subset,
}

impl FromStr for MatchRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatchRule::Exact),
            "subset" => Ok(MatchRule::Subset),
            other => Err(format!("unknown match rule `{other}` (expected exact or subset)")),
        }
    }
}

impl fmt::Display for MatchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchRule::Exact => "exact",
            MatchRule::Subset => "subset",
        })
    }
}

/// Exact set equality over the hardware modalities.
pub fn judge_match(activated: &ModalitySet, gold: &ModalitySet) -> bool {
    judge_match_with(MatchRule::Exact, activated, gold)
}

pub fn judge_match_with(rule: MatchRule, activated: &ModalitySet, gold: &ModalitySet) -> bool {
    let activated = hardware_only(activated);
    let gold = hardware_only(gold);
    match rule {
        MatchRule::Exact => activated == gold,
        MatchRule::Subset if gold.is_empty() => activated.is_empty(),
        MatchRule::Subset => gold.is_subset(&activated),
    }
}

/// Any candidate question counts, matched or not.
pub fn judge_asked(parsed: &[ParsedQuestion]) -> bool {
    !parsed.is_empty()
}

/// `100 · count / (count + complement)`.
pub fn percent(count: u64, complement: u64) -> Result<f64, EvalError> {
    let total = count + complement;
    if total == 0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(100.0 * count as f64 / total as f64)
}

/// The percentage in tenths, rounded half-up with exact integer arithmetic.
pub fn percent_tenths(count: u64, complement: u64) -> Result<u64, EvalError> {
    let total = u128::from(count) + u128::from(complement);
    if total == 0 {
        return Err(EvalError::DivisionByZero);
    }
    // floor(1000·c/t + 1/2)
    Ok(((2000 * u128::from(count) + total) / (2 * total)) as u64)
}

/// One-decimal display form, e.g. `43.9`.
pub fn format_percent(count: u64, complement: u64) -> Result<String, EvalError> {
    let tenths = percent_tenths(count, complement)?;
    Ok(format!("{}.{}", tenths / 10, tenths % 10))
}

/// Judgement for one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub record_id: String,
    pub matched: bool,
    pub asked: bool,
    pub activated: ModalitySet,
    pub gold: ModalitySet,
    pub failed: bool,
}

impl EvalOutcome {
    pub fn from_trace(trace: &RunTrace, gold: &ModalitySet, rule: MatchRule) -> Self {
        Self {
            record_id: trace.record_id.clone(),
            matched: judge_match_with(rule, &trace.activated_modalities, gold),
            asked: judge_asked(&trace.parsed),
            activated: trace.activated_modalities.clone(),
            gold: gold.clone(),
            failed: false,
        }
    }

    /// A record whose pipeline run errored: counted as mismatched and not asked.
    pub fn failure(record: &BenchmarkRecord) -> Self {
        Self {
            record_id: record.id.clone(),
            matched: false,
            asked: false,
            activated: ModalitySet::new(),
            gold: record.gold_modalities.clone(),
            failed: true,
        }
    }
}

/// Match and asked counts for one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend_id: String,
    pub match_count: u64,
    pub mismatch_count: u64,
    pub asked_count: u64,
    pub not_asked_count: u64,
    pub failed_count: u64,
    /// Raw percentages; `None` for an empty evaluation.
    pub match_pct: Option<f64>,
    pub asked_pct: Option<f64>,
}

impl EvalReport {
    pub fn new(backend_id: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            match_count: 0,
            mismatch_count: 0,
            asked_count: 0,
            not_asked_count: 0,
            failed_count: 0,
            match_pct: None,
            asked_pct: None,
        }
    }

    /// Report from bare counts, e.g. published tables.
    pub fn from_counts(backend_id: impl Into<String>, matched: u64, mismatched: u64, asked: u64, not_asked: u64) -> Self {
        let mut r = Self::new(backend_id);
        r.match_count = matched;
        r.mismatch_count = mismatched;
        r.asked_count = asked;
        r.not_asked_count = not_asked;
        r.refresh();
        r
    }

    pub fn from_outcomes<'a>(
        backend_id: impl Into<String>,
        outcomes: impl IntoIterator<Item = &'a EvalOutcome>,
    ) -> Self {
        let mut r = Self::new(backend_id);
        for o in outcomes {
            r.add(o);
        }
        r
    }

    pub fn add(&mut self, o: &EvalOutcome) {
        if o.matched {
            self.match_count += 1;
        } else {
            self.mismatch_count += 1;
        }
        if o.asked {
            self.asked_count += 1;
        } else {
            self.not_asked_count += 1;
        }
        if o.failed {
            self.failed_count += 1;
        }
        self.refresh();
    }

    /// Combines counts from two partial reports.
    pub fn merge(mut self, other: &EvalReport) -> Self {
        self.match_count += other.match_count;
        self.mismatch_count += other.mismatch_count;
        self.asked_count += other.asked_count;
        self.not_asked_count += other.not_asked_count;
        self.failed_count += other.failed_count;
        self.refresh();
        self
    }

    fn refresh(&mut self) {
        self.match_pct = percent(self.match_count, self.mismatch_count).ok();
        self.asked_pct = percent(self.asked_count, self.not_asked_count).ok();
    }

    pub fn total(&self) -> u64 {
        self.match_count + self.mismatch_count
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub pipeline: PipelineConfig,
    pub workers: usize,
    pub match_rule: MatchRule,
    /// Model name shown in reports; defaults to the backend id.
    pub label: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            workers: 1,
            match_rule: MatchRule::Exact,
            label: None,
        }
    }
}

/// Report plus per-record outcomes in dataset order.
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub report: EvalReport,
    pub outcomes: Vec<EvalOutcome>,
}

pub fn evaluate(
    records: &[BenchmarkRecord],
    backend: &dyn LanguageBackend,
    registry: &SensorRegistry,
    config: &EvalConfig,
) -> Result<EvalRun, EvalError> {
    let mut outcomes = Vec::with_capacity(records.len());
    let report = evaluate_with(records, backend, registry, config, |_, _, o| {
        outcomes.push(o.clone())
    })?;
    Ok(EvalRun { report, outcomes })
}

/// Runs the pipeline over `records` on `config.workers` threads.
///
/// `on_record` is called on the calling thread once per record, in dataset
/// order, with the trace (or error) and derived outcome.
pub fn evaluate_with<F>(
    records: &[BenchmarkRecord],
    backend: &dyn LanguageBackend,
    registry: &SensorRegistry,
    config: &EvalConfig,
    mut on_record: F,
) -> Result<EvalReport, EvalError>
where
    F: FnMut(&BenchmarkRecord, Result<&RunTrace, &PipelineError>, &EvalOutcome),
{
    if config.workers == 0 {
        return Err(EvalError::NoWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()?;
    let label = config.label.clone().unwrap_or_else(|| backend.id());
    let mut report = EvalReport::new(label);

    let (tx, rx) = mpsc::channel::<(usize, Result<RunTrace, PipelineError>)>();
    std::thread::scope(|scope| {
        scope.spawn(|| {
            pool.install(move || {
                records
                    .par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (i, record)| {
                        let result = run(record, backend, registry, &config.pipeline);
                        let _ = tx.send((i, result));
                    });
            })
        });

        // Reorder completions so callbacks see dataset order.
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&next) {
                let record = &records[next];
                let outcome = match &result {
                    Ok(trace) => EvalOutcome::from_trace(trace, &record.gold_modalities, config.match_rule),
                    Err(err) => {
                        log::warn!("{}: {err}", record.id);
                        EvalOutcome::failure(record)
                    }
                };
                report.add(&outcome);
                on_record(record, result.as_ref(), &outcome);
                next += 1;
            }
        }
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

struct Table {
    headers: [&'static str; 4],
    rows: Vec<(String, u64, u64)>,
}

fn tables(reports: &[EvalReport]) -> [Table; 2] {
    [
        Table {
            headers: ["Model", "Match", "Mismatch", "Match %"],
            rows: reports
                .iter()
                .map(|r| (r.backend_id.clone(), r.match_count, r.mismatch_count))
                .collect(),
        },
        Table {
            headers: ["Model", "Asked", "Did Not Ask", "Asked %"],
            rows: reports
                .iter()
                .map(|r| (r.backend_id.clone(), r.asked_count, r.not_asked_count))
                .collect(),
        },
    ]
}

/// Renders the match table followed by the asked table.
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> String {
    let pct = |a, b| format_percent(a, b).unwrap_or_else(|_| "n/a".to_string());
    let mut out = String::new();
    for (i, table) in tables(reports).iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match format {
            ReportFormat::Markdown => {
                out.push_str(&format!("| {} |\n", table.headers.join(" | ")));
                out.push_str("|---|---:|---:|---:|\n");
                for (name, a, b) in &table.rows {
                    let p = pct(*a, *b);
                    let p = if p == "n/a" { p } else { format!("{p}%") };
                    out.push_str(&format!("| {name} | {} | {} | {p} |\n", thousands(*a), thousands(*b)));
                }
            }
            ReportFormat::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
                w.write_record(table.headers).expect("in-memory write");
                for (name, a, b) in &table.rows {
                    w.write_record([name.clone(), a.to_string(), b.to_string(), pct(*a, *b)])
                        .expect("in-memory write");
                }
                let bytes = w.into_inner().expect("in-memory flush");
                out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{Modality, Task};

    fn set(ms: &[Modality]) -> ModalitySet {
        ms.iter().copied().collect()
    }

    #[test]
    fn match_examples() {
        assert!(judge_match(&set(&[Modality::Vision]), &set(&[Modality::Vision])));
        assert!(judge_match(&set(&[]), &set(&[])));
        assert!(!judge_match(
            &set(&[Modality::Vision]),
            &set(&[Modality::Audio, Modality::Vision])
        ));
        assert!(!judge_match(
            &set(&[Modality::Audio, Modality::Vision]),
            &set(&[Modality::Vision])
        ));
    }

    #[test]
    fn subset_rule_accepts_supersets_but_not_for_empty_gold() {
        let av = set(&[Modality::Audio, Modality::Vision]);
        let v = set(&[Modality::Vision]);
        assert!(judge_match_with(MatchRule::Subset, &av, &v));
        assert!(!judge_match_with(MatchRule::Subset, &v, &av));
        assert!(!judge_match_with(MatchRule::Subset, &v, &set(&[])));
        assert!(judge_match_with(MatchRule::Subset, &set(&[]), &set(&[])));
    }

    #[test]
    fn asked_examples() {
        let q = |task| ParsedQuestion {
            raw_text: "q?".into(),
            matched_task: task,
            match_score: 0.0,
            question_index: 0,
        };
        assert!(judge_asked(&[q(Some(Task::ObjectDetection))]));
        assert!(!judge_asked(&[]));
        assert!(judge_asked(&[q(None)]));
    }

    #[test]
    fn percent_examples() {
        assert_eq!(format_percent(79_355, 101_274).unwrap(), "43.9");
        assert_eq!(format_percent(137_701, 42_928).unwrap(), "76.2");
        assert_eq!(format_percent(144_547, 36_082).unwrap(), "80.0");
        assert_eq!(percent(0, 10).unwrap(), 0.0);
        assert_eq!(format_percent(0, 10).unwrap(), "0.0");
        assert!(matches!(percent(0, 0), Err(EvalError::DivisionByZero)));
    }

    #[test]
    fn rounding_is_half_up() {
        // 1/8 = 12.5% exactly; 1/16 = 6.25% → 6.3
        assert_eq!(format_percent(1, 7).unwrap(), "12.5");
        assert_eq!(format_percent(1, 15).unwrap(), "6.3");
        // 1/2000 = 0.05% → 0.1
        assert_eq!(format_percent(1, 1999).unwrap(), "0.1");
        assert_eq!(format_percent(10, 0).unwrap(), "100.0");
    }

    #[test]
    fn thousands_separators() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(1_000), "1,000");
        assert_eq!(thousands(137_701), "137,701");
        assert_eq!(thousands(1_234_567), "1,234,567");
    }

    #[test]
    fn markdown_row() {
        let r = EvalReport::from_counts("FLAN T5 XL", 137_701, 42_928, 144_547, 36_082);
        let md = render_report(&[r], ReportFormat::Markdown);
        assert!(md.contains("| FLAN T5 XL | 137,701 | 42,928 | 76.2% |"), "{md}");
        assert!(md.contains("| FLAN T5 XL | 144,547 | 36,082 | 80.0% |"), "{md}");
        assert!(md.starts_with("| Model | Match | Mismatch | Match % |"));
        assert!(md.contains("| Model | Asked | Did Not Ask | Asked % |"));
    }

    #[test]
    fn csv_row() {
        let r = EvalReport::from_counts("FLAN T5 XL", 137_701, 42_928, 144_547, 36_082);
        let csv = render_report(&[r], ReportFormat::Csv);
        assert!(csv.lines().any(|l| l == "FLAN T5 XL,137701,42928,76.2"), "{csv}");
        assert!(csv.lines().any(|l| l == "Model,Match,Mismatch,Match %"));
        assert!(csv.lines().any(|l| l == "Model,Asked,Did Not Ask,Asked %"));
    }

    #[test]
    fn csv_quotes_awkward_names() {
        let r = EvalReport::from_counts("a,b", 1, 1, 1, 1);
        let csv = render_report(&[r], ReportFormat::Csv);
        assert!(csv.contains("\"a,b\",1,1,50.0"), "{csv}");
    }

    #[test]
    fn empty_report_list_is_header_only() {
        let md = render_report(&[], ReportFormat::Markdown);
        assert_eq!(
            md,
            "| Model | Match | Mismatch | Match % |\n|---|---:|---:|---:|\n\n\
             | Model | Asked | Did Not Ask | Asked % |\n|---|---:|---:|---:|\n"
        );
        let csv = render_report(&[], ReportFormat::Csv);
        assert_eq!(csv, "Model,Match,Mismatch,Match %\n\nModel,Asked,Did Not Ask,Asked %\n");
    }

    #[test]
    fn empty_evaluation_has_no_percentages() {
        let r = EvalReport::new("x");
        assert_eq!(r.match_pct, None);
        let md = render_report(&[r], ReportFormat::Markdown);
        assert!(md.contains("| x | 0 | 0 | n/a |"));
    }

    #[test]
    fn report_merge_adds_counts() {
        let a = EvalReport::from_counts("m", 1, 2, 3, 0);
        let b = EvalReport::from_counts("m", 4, 0, 1, 3);
        let c = a.merge(&b);
        assert_eq!((c.match_count, c.mismatch_count, c.asked_count, c.not_asked_count), (5, 2, 4, 3));
        assert!((c.match_pct.unwrap() - 500.0 / 7.0).abs() < 1e-12);
    }
}
