//! Layered configuration: JSON file, then `COQ_*` environment variables,
//! then command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use coq_core::backend::{EchoScript, FieldNames, RemoteConfig};
use coq_core::evaluation::MatchRule;
use coq_core::pipeline::DEFAULT_QUESTION_CAP;
use coq_core::taxonomy::{KeywordTable, Task, DEFAULT_THRESHOLD};
use coq_core::{
    DecodingConfig, DecodingStrategy, FewShotSet, LanguageBackend, PipelineConfig, RemoteBackend,
    ScriptedBackend, SensorRegistry, TaskMapper,
};

use crate::error::CliError;
use crate::GlobalArgs;

/// Contents of a `--config` file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub decoding: Option<DecodingConfig>,
    pub fewshot: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub workers: Option<usize>,
    pub question_cap: Option<usize>,
    pub match_rule: Option<MatchRule>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub parallel_sensors: Option<bool>,
    pub remote: Option<RemoteFileConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteFileConfig {
    pub fields: Option<FieldNames>,
    pub timeout_ms: Option<u64>,
    pub max_attempts: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.fewshot, &mut cfg.keywords, &mut cfg.fixtures]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one command.
#[derive(Debug)]
pub struct Settings {
    pub backend: String,
    pub decoding: DecodingConfig,
    pub fewshot: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub workers: usize,
    pub question_cap: usize,
    pub match_rule: MatchRule,
    pub threshold: f64,
    pub parallel_sensors: bool,
    pub remote: RemoteConfig,
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    env(name)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| CliError::Config(format!("{name}={v}: {e}")))
        })
        .transpose()
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };

        let backend = args
            .backend
            .clone()
            .or(env("COQ_BACKEND"))
            .or(file.backend)
            .unwrap_or_else(|| "scripted:gold-following".to_string());

        let mut decoding = file.decoding.unwrap_or_default();
        if let Some(strategy) = &args.decoding {
            decoding.strategy = match strategy.as_str() {
                "greedy" => DecodingStrategy::Greedy,
                "sampling" => DecodingStrategy::Sampling,
                "beam" => DecodingStrategy::Beam,
                other => return Err(CliError::Config(format!("unknown decoding `{other}`"))),
            };
        }
        if let Some(t) = args.temperature {
            decoding.temperature = Some(t);
        }
        if decoding.strategy == DecodingStrategy::Sampling && decoding.temperature.is_none() {
            decoding.temperature = Some(1.0);
        }
        if let Some(w) = args.beam_width {
            decoding.beam_width = Some(w);
        }
        if decoding.strategy == DecodingStrategy::Beam && decoding.beam_width.is_none() {
            decoding.beam_width = Some(4);
        }
        if let Some(m) = args.max_tokens {
            decoding.max_tokens = m;
        }
        let seed = match args.seed {
            Some(s) => Some(s),
            None => env_parse("COQ_SEED")?.or(file.seed).or(decoding.seed),
        };
        decoding.seed = seed;
        decoding
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let pick_path = |flag: &Option<PathBuf>, var: &str, file: Option<PathBuf>| {
            flag.clone().or(env(var).map(PathBuf::from)).or(file)
        };
        let fewshot = pick_path(&args.fewshot, "COQ_FEWSHOT", file.fewshot);
        let keywords = pick_path(&args.keywords, "COQ_KEYWORDS", file.keywords);
        let fixtures = pick_path(&args.fixtures, "COQ_FIXTURES", file.fixtures);
        for (what, path) in [("few-shot file", &fewshot), ("keyword table", &keywords), ("fixture root", &fixtures)] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(CliError::Config(format!("{what} {} does not exist", p.display())));
                }
            }
        }

        let workers = match args.workers {
            Some(w) => w,
            None => env_parse("COQ_WORKERS")?.or(file.workers).unwrap_or(1),
        };
        if workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        let question_cap = match args.question_cap {
            Some(c) => c,
            None => env_parse("COQ_QUESTION_CAP")?
                .or(file.question_cap)
                .unwrap_or(DEFAULT_QUESTION_CAP),
        };
        if question_cap == 0 {
            return Err(CliError::Config("--question-cap must be at least 1".into()));
        }
        let match_rule = match args.match_rule {
            Some(r) => r,
            None => env_parse("COQ_MATCH_RULE")?
                .or(file.match_rule)
                .unwrap_or_default(),
        };
        let threshold = match args.threshold {
            Some(t) => t,
            None => env_parse("COQ_THRESHOLD")?
                .or(file.threshold)
                .unwrap_or(DEFAULT_THRESHOLD),
        };

        let mut remote = RemoteConfig::default();
        if let Some(r) = file.remote {
            if let Some(f) = r.fields {
                remote.fields = f;
            }
            remote.timeout_ms = r.timeout_ms.unwrap_or(remote.timeout_ms);
            remote.max_attempts = r.max_attempts.unwrap_or(remote.max_attempts);
            remote.initial_backoff_ms = r.initial_backoff_ms.unwrap_or(remote.initial_backoff_ms);
            remote.max_in_flight = r.max_in_flight.unwrap_or(remote.max_in_flight);
        }
        if let Some(ms) = env_parse("COQ_BACKOFF_MS")? {
            remote.initial_backoff_ms = ms;
        }

        Ok(Self {
            backend,
            decoding,
            fewshot,
            keywords,
            fixtures,
            workers,
            question_cap,
            match_rule,
            threshold,
            parallel_sensors: file.parallel_sensors.unwrap_or(false),
            remote,
        })
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let fewshot = match &self.fewshot {
            Some(p) => FewShotSet::from_path(p).map_err(|e| CliError::Config(e.to_string()))?,
            None => FewShotSet::default(),
        };
        let table = match &self.keywords {
            Some(p) => KeywordTable::from_path(p).map_err(|e| CliError::Config(e.to_string()))?,
            None => KeywordTable::default(),
        };
        let mapper = TaskMapper::new(table)
            .with_threshold(self.threshold)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(PipelineConfig {
            fewshot,
            mapper,
            decoding: self.decoding.clone(),
            question_cap: self.question_cap,
            parallel_sensors: self.parallel_sensors,
        })
    }

    /// Sensor registry rooted at the configured fixtures, or at `fallback`
    /// (the input file's directory) when none is configured.
    pub fn registry(&self, fallback: &Path) -> Result<SensorRegistry, CliError> {
        let root = self.fixtures.clone().unwrap_or_else(|| fallback.to_path_buf());
        if !root.is_dir() {
            return Err(CliError::Config(format!(
                "fixture root {} is not a directory",
                root.display()
            )));
        }
        SensorRegistry::with_fixtures(root).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn backend(&self) -> Result<Box<dyn LanguageBackend>, CliError> {
        parse_backend(&self.backend, &self.remote)
    }
}

/// Parses `scripted:<kind>[:<arg>]` or `remote[:<url>]`.
pub fn parse_backend(spec: &str, remote: &RemoteConfig) -> Result<Box<dyn LanguageBackend>, CliError> {
    let bad = || {
        CliError::Config(format!(
            "unknown backend `{spec}` (expected scripted:gold-following, scripted:silent, \
             scripted:fixed:<task>, scripted:echo:<file> or remote:<url>)"
        ))
    };
    if let Some(rest) = spec.strip_prefix("scripted:") {
        let (kind, arg) = match rest.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (rest, None),
        };
        let backend = match (kind, arg) {
            ("gold-following" | "gold", None) => ScriptedBackend::GoldFollowing,
            ("silent", None) => ScriptedBackend::Silent,
            ("fixed", Some(task)) => ScriptedBackend::FixedTask(
                task.parse::<Task>().map_err(|e| CliError::Config(e.to_string()))?,
            ),
            ("echo", Some(path)) => ScriptedBackend::Echo(
                EchoScript::from_path(Path::new(path)).map_err(|e| CliError::Config(e.to_string()))?,
            ),
            _ => return Err(bad()),
        };
        return Ok(Box::new(backend));
    }
    if spec == "remote" || spec.starts_with("remote:") {
        let url = spec.strip_prefix("remote:").unwrap_or("");
        let config = RemoteConfig {
            url: url.to_string(),
            ..remote.clone()
        }
        .with_env();
        return RemoteBackend::new(config)
            .map(|b| Box::new(b) as Box<dyn LanguageBackend>)
            .map_err(|e| CliError::Config(e.to_string()));
    }
    Err(bad())
}
