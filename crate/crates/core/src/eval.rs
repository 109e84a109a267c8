//! Evaluation harness: run families x seeds episodes, write transcripts, and
//! report per-family success rates.
//!
//! Report numbers are exact rationals (successes / episodes) rendered at
//! three decimals; the aggregate row is the unweighted mean over families.
//! `report.json` deliberately omits wall-clock time and runtime knobs
//! (parallelism, output paths) so that fixed-config runs against scripted or
//! replay backends are byte-identical, at any parallelism degree.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demo::DemoStore;
use crate::env::SimEnv;
use crate::executor::{
    oracle_script, run_episode, EpisodeConfig, EpisodeOutcome, EpisodeResult, GroundTruthObserver,
};
use crate::gateway::{Gateway, HttpGateway, RecordingGateway, ReplayGateway, ScriptedGateway};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which gateway serves the episodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    /// Per-episode scripted gateway playing the family oracle's actions.
    Scripted,
    /// Live OpenAI-compatible endpoint.
    Http,
    /// Replay a recorded cassette.
    Replay { cassette: PathBuf },
    /// Live endpoint, recording a cassette as it goes.
    Record { cassette: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub families: Vec<String>,
    pub seeds: Vec<u64>,
    pub episode: EpisodeConfig,
    pub backend: Backend,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key (never the key).
    pub api_key_env: Option<String>,
    pub demo_dir: Option<PathBuf>,
    pub parallelism: usize,
    pub out_dir: Option<PathBuf>,
}

impl EvalConfig {
    /// Offline oracle-driven evaluation over the given matrix.
    pub fn scripted(families: Vec<String>, seeds: Vec<u64>) -> Self {
        Self {
            families,
            seeds,
            episode: EpisodeConfig::default(),
            backend: Backend::Scripted,
            endpoint: None,
            api_key_env: None,
            demo_dir: None,
            parallelism: 1,
            out_dir: None,
        }
    }

    /// The portion of the config echoed into reports: semantic knobs only,
    /// no runtime details, so reruns compare byte-for-byte.
    fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "families": self.families,
            "seeds": self.seeds,
            "episode": self.episode,
            "backend": self.backend,
            "endpoint": self.endpoint,
        })
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no results to report")]
    EmptyReport,
    #[error("infrastructure error: {0}")]
    Infrastructure(String),
}

fn infra(e: impl std::fmt::Display) -> EvalError {
    EvalError::Infrastructure(e.to_string())
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyStat {
    pub family: String,
    pub episodes: u64,
    pub successes: u64,
}

impl FamilyStat {
    pub fn sr(&self) -> f64 {
        self.successes as f64 / self.episodes as f64
    }

    fn sr_text(&self) -> String {
        format!("{:.3}", self.sr())
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Per-family rows, sorted by family name.
    pub families: Vec<FamilyStat>,
    /// Episodes that aborted on an internal invariant violation. Not part of
    /// the JSON report; surfaced so callers can flag broken runs.
    pub internal_errors: u64,
    pub wall_secs: f64,
    config_echo: serde_json::Value,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl EvalReport {
    /// Unweighted mean success rate over families as an exact reduced
    /// fraction.
    pub fn aggregate_fraction(&self) -> (u128, u128) {
        let lcm = self
            .families
            .iter()
            .map(|f| f.episodes as u128)
            .fold(1u128, |acc, d| acc / gcd(acc, d) * d);
        let num: u128 = self
            .families
            .iter()
            .map(|f| f.successes as u128 * (lcm / f.episodes as u128))
            .sum();
        let den = lcm * self.families.len() as u128;
        let g = gcd(num.max(1), den);
        (num / g, den / g)
    }

    pub fn aggregate_sr(&self) -> f64 {
        let (num, den) = self.aggregate_fraction();
        num as f64 / den as f64
    }

    fn aggregate_text(&self) -> String {
        format!("{:.3}", self.aggregate_sr())
    }

    /// Deterministic JSON report (no wall time, no runtime knobs).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config_echo,
            "families": self.families.iter().map(|f| {
                serde_json::json!({
                    "family": f.family,
                    "episodes": f.episodes,
                    "successes": f.successes,
                    "sr": f.sr_text(),
                })
            }).collect::<Vec<_>>(),
            "aggregate": {
                "sr": self.aggregate_text(),
                "numerator": self.aggregate_fraction().0 as u64,
                "denominator": self.aggregate_fraction().1 as u64,
            },
        })
    }

    /// Human-readable table, one row per family plus the average row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<28} {:>9} {:>10} {:>7}\n", "family", "episodes", "successes", "SR"));
        for f in &self.families {
            out.push_str(&format!(
                "{:<28} {:>9} {:>10} {:>7}\n",
                f.family,
                f.episodes,
                f.successes,
                f.sr_text()
            ));
        }
        out.push_str(&format!("{:<28} {:>9} {:>10} {:>7}\n", "average", "", "", self.aggregate_text()));
        out.push_str(&format!("\nwall time: {:.2}s\n", self.wall_secs));
        out
    }
}

/// Fold episode results into a per-family report. Rows are sorted by family
/// name; an empty result set is an error.
pub fn summarize(
    results: &[EpisodeResult],
    config_echo: serde_json::Value,
    wall_secs: f64,
) -> Result<EvalReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let mut families: Vec<FamilyStat> = Vec::new();
    let mut internal_errors = 0u64;
    for result in results {
        internal_errors += u64::from(result.outcome == EpisodeOutcome::Error);
        match families.iter_mut().find(|f| f.family == result.family) {
            Some(stat) => {
                stat.episodes += 1;
                stat.successes += u64::from(result.outcome == EpisodeOutcome::Success);
            }
            None => families.push(FamilyStat {
                family: result.family.clone(),
                episodes: 1,
                successes: u64::from(result.outcome == EpisodeOutcome::Success),
            }),
        }
    }
    families.sort_by(|a, b| a.family.cmp(&b.family));
    Ok(EvalReport { families, internal_errors, wall_secs, config_echo })
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

enum GatewaySource {
    OraclePerEpisode,
    Shared(Arc<dyn Gateway>),
}

/// Run the full families x seeds matrix and write transcripts and reports.
///
/// Episode-level failures are data (they lower the success rate); only
/// infrastructure problems (unknown family, unreachable backend, io) are
/// errors.
pub fn run_eval(config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let started = Instant::now();
    if config.families.is_empty() || config.seeds.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    for family in &config.families {
        if !SimEnv::families().contains(&family.as_str()) {
            return Err(EvalError::Infrastructure(format!("unknown task family `{family}`")));
        }
    }
    if config.parallelism == 0 {
        return Err(EvalError::Infrastructure("parallelism must be at least 1".to_string()));
    }

    let demos = match &config.demo_dir {
        Some(dir) => DemoStore::load(dir).map_err(infra)?,
        None => DemoStore::empty(),
    };

    let mut recorder: Option<Arc<RecordingGateway<HttpGateway>>> = None;
    let source = match &config.backend {
        Backend::Scripted => GatewaySource::OraclePerEpisode,
        Backend::Http => GatewaySource::Shared(Arc::new(http_gateway(config)?)),
        Backend::Replay { cassette } => {
            GatewaySource::Shared(Arc::new(ReplayGateway::load(cassette).map_err(infra)?))
        }
        Backend::Record { .. } => {
            let rec = Arc::new(RecordingGateway::new(http_gateway(config)?));
            recorder = Some(rec.clone());
            GatewaySource::Shared(rec)
        }
    };

    let episodes_dir = match &config.out_dir {
        Some(out) => {
            let dir = out.join("episodes");
            std::fs::create_dir_all(&dir).map_err(infra)?;
            Some(dir)
        }
        None => None,
    };

    let mut families = config.families.clone();
    families.sort();
    let jobs: Vec<(String, u64)> = families
        .iter()
        .flat_map(|f| config.seeds.iter().map(move |&s| (f.clone(), s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(infra)?;
    let results: Vec<EpisodeResult> = pool.install(|| {
        jobs.par_iter()
            .map(|(family, seed)| -> Result<EpisodeResult, EvalError> {
                let mut env = SimEnv::reset(family, *seed).map_err(infra)?;
                let per_episode;
                let gateway: &dyn Gateway = match &source {
                    GatewaySource::OraclePerEpisode => {
                        per_episode =
                            ScriptedGateway::from_texts(oracle_script(family, *seed).map_err(infra)?);
                        &per_episode
                    }
                    GatewaySource::Shared(shared) => shared.as_ref(),
                };
                let result =
                    run_episode(&mut env, &mut GroundTruthObserver, gateway, &demos, &config.episode);
                if let Some(dir) = &episodes_dir {
                    write_transcript(dir, &result).map_err(infra)?;
                }
                Ok(result)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    if let (Some(rec), Backend::Record { cassette }) = (&recorder, &config.backend) {
        rec.save(cassette).map_err(infra)?;
    }

    let report = summarize(&results, config.echo(), started.elapsed().as_secs_f64())?;
    if let Some(out) = &config.out_dir {
        write_report(out, &report).map_err(infra)?;
    }
    Ok(report)
}

fn http_gateway(config: &EvalConfig) -> Result<HttpGateway, EvalError> {
    let endpoint = config
        .endpoint
        .as_deref()
        .ok_or_else(|| EvalError::Infrastructure("http backend requires an endpoint".to_string()))?;
    let api_key = match &config.api_key_env {
        Some(var) => Some(std::env::var(var).map_err(|_| {
            EvalError::Infrastructure(format!("api key environment variable `{var}` is not set"))
        })?),
        None => None,
    };
    Ok(HttpGateway::new(endpoint, api_key))
}

/// One JSON line per round: `episodes/<family>-<seed>.jsonl`.
pub fn write_transcript(dir: &Path, result: &EpisodeResult) -> Result<PathBuf, std::io::Error> {
    let path = dir.join(format!("{}-{}.jsonl", result.family, result.seed));
    let mut body = String::new();
    for round in &result.transcript {
        body.push_str(&serde_json::to_string(round).expect("round record serializes"));
        body.push('\n');
    }
    std::fs::write(&path, body)?;
    Ok(path)
}

/// `report.json` (deterministic) and `report.txt` (with wall time).
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), std::io::Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("report.json"),
        format!("{}\n", serde_json::to_string_pretty(&report.to_json())?),
    )?;
    std::fs::write(dir.join("report.txt"), report.to_text())
}
