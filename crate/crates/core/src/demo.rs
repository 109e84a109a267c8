//! Demonstration capture, rationale augmentation, rendering, and storage.
//!
//! Demonstrations are recorded by running a family's oracle policy against a
//! fresh environment, capturing the observation before and after every
//! action. A second pass asks the language model to explain each action (the
//! rationale); explanations already generated are visible in later rationale
//! prompts, mirroring how the history accumulates reasons step by step.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{render_record, validate, ActionRecord, HistoryStyle, RecordName};
use crate::env::{oracle_for, SimEnv, TaskStatus};
use crate::executor::execute_command;
use crate::gateway::{ChatMessage, ChatRequest, Gateway};
use crate::splits::DEMO_SEEDS;
use crate::ui::Observation;

/// One demonstrated step: the screen before the action, the action record
/// (snapshot, arguments, optional rationale), and the screen after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub pre: Observation,
    pub action: ActionRecord,
    pub post: Observation,
}

/// A successful task trajectory: the start marker followed by every action
/// the oracle took, ending in a success state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub family: String,
    pub seed: u64,
    pub utterance: String,
    pub steps: Vec<DemoStep>,
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("seed {0} is outside the demonstration split")]
    SeedOutsideDemoSplit(u64),
    #[error("unknown task family `{0}`")]
    UnknownFamily(String),
    #[error("oracle failed to solve {family} seed {seed}")]
    OracleFailed { family: String, seed: u64 },
    #[error("step {0} does not chain: post-state differs from the next pre-state")]
    ChainBroken(usize),
    #[error("demonstration does not begin with the start marker")]
    MissingStart,
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed demo file: {0}")]
    Json(String),
}

impl Demonstration {
    /// Action records with 1-based indices restored from step positions.
    pub fn records(&self) -> Vec<ActionRecord> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut r = s.action.clone();
                r.index = i as u32 + 1;
                r
            })
            .collect()
    }

    fn fix_indices(&mut self) {
        for (i, step) in self.steps.iter_mut().enumerate() {
            step.action.index = i as u32 + 1;
        }
    }

    /// Start marker first, and every post-state equals the next pre-state.
    pub fn validate_chain(&self) -> Result<(), DemoError> {
        if !matches!(self.steps.first(), Some(s) if s.action.name == RecordName::Start) {
            return Err(DemoError::MissingStart);
        }
        for (i, pair) in self.steps.windows(2).enumerate() {
            if pair[0].post.digest() != pair[1].pre.digest() {
                return Err(DemoError::ChainBroken(i + 1));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Capture
// ---------------------------------------------------------------------------

/// Record a demonstration by running the family oracle to success.
///
/// With `strict_split` the seed must come from the demonstration seed range.
pub fn script_demo(family: &str, seed: u64, strict_split: bool) -> Result<Demonstration, DemoError> {
    if strict_split && !DEMO_SEEDS.contains(&seed) {
        return Err(DemoError::SeedOutsideDemoSplit(seed));
    }
    let oracle = oracle_for(family).ok_or_else(|| DemoError::UnknownFamily(family.to_string()))?;
    let mut env =
        SimEnv::reset(family, seed).map_err(|_| DemoError::UnknownFamily(family.to_string()))?;

    let initial = env.snapshot();
    let mut steps = vec![DemoStep {
        pre: initial.clone(),
        action: ActionRecord::start(Some("Initiating the task.")),
        post: initial,
    }];

    let failed = || DemoError::OracleFailed { family: family.to_string(), seed };
    let bound = oracle.round_bound() + 2;
    for _ in 0..bound {
        if env.status() != TaskStatus::Running {
            break;
        }
        let Some(cmd) = oracle.next_action(&env) else { break };
        let pre = env.snapshot();
        let checked = validate(&cmd, &pre).map_err(|_| failed())?;
        execute_command(&mut env, &checked).map_err(|_| failed())?;
        let post = env.snapshot();
        steps.push(DemoStep {
            pre,
            action: ActionRecord::for_command(steps.len() as u32 + 1, &cmd, checked.snapshot),
            post,
        });
    }
    if env.status() != TaskStatus::Success {
        return Err(failed());
    }
    Ok(Demonstration {
        family: family.to_string(),
        seed,
        utterance: env.utterance().to_string(),
        steps,
    })
}

// ---------------------------------------------------------------------------
// Rationale augmentation
// ---------------------------------------------------------------------------

/// Outcome of rationale augmentation. Steps whose gateway call failed keep
/// no reason and are listed in `failures`; the pipeline continues past them.
#[derive(Debug)]
pub struct AugmentReport {
    pub demo: Demonstration,
    /// (1-based step index, error description)
    pub failures: Vec<(usize, String)>,
}

/// Ask the gateway to explain every non-start action of the demonstration.
pub fn augment_rationales(
    demo: &Demonstration,
    gateway: &dyn Gateway,
    model: &str,
) -> AugmentReport {
    let mut out = demo.clone();
    out.fix_indices();
    let mut failures = Vec::new();
    for k in 2..=out.steps.len() {
        let records = out.records();
        let prompt = match crate::prompt::build_rationale_prompt(
            &out.utterance,
            &records,
            k,
            &out.steps[k - 1].pre,
            &out.steps[k - 1].post,
        ) {
            Ok(p) => p,
            Err(e) => {
                failures.push((k, e.to_string()));
                continue;
            }
        };
        let request = ChatRequest::new(model, vec![ChatMessage::user(prompt)]);
        match gateway.complete(&request) {
            Ok(response) => match response.text {
                Some(reason) => out.steps[k - 1].action.reason = Some(reason),
                None => failures.push((k, "response carried no text".to_string())),
            },
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    AugmentReport { demo: out, failures }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Render a demonstration block:
/// `DEMO_<index> = { TASK: ... Action History: demo_action_1 ... }`.
pub fn render_demo(demo: &Demonstration, index: u32, with_reasons: bool) -> String {
    let lines: Vec<String> = demo
        .records()
        .iter()
        .map(|r| format!("    {}", render_record(r, HistoryStyle::Demo, with_reasons)))
        .collect();
    format!(
        "DEMO_{index} = {{\n    TASK:\n    {}\n\n    Action History:\n{}\n}}",
        demo.utterance,
        lines.join("\n")
    )
}

// ---------------------------------------------------------------------------
// Storage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    family: String,
    seed: u64,
    file: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    entries: Vec<ManifestEntry>,
    /// Optional per-family cap on how many demos enter a prompt.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    prompt_limits: BTreeMap<String, usize>,
}

/// In-memory demonstration collection, read-only during evaluation.
#[derive(Debug, Clone, Default)]
pub struct DemoStore {
    demos: Vec<Demonstration>,
    prompt_limits: BTreeMap<String, usize>,
}

impl DemoStore {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_demos(demos: Vec<Demonstration>) -> Self {
        Self { demos, prompt_limits: BTreeMap::new() }
    }

    pub fn push(&mut self, demo: Demonstration) {
        self.demos.push(demo);
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn set_prompt_limit(&mut self, family: &str, limit: usize) {
        self.prompt_limits.insert(family.to_string(), limit);
    }

    pub fn prompt_limit(&self, family: &str) -> Option<usize> {
        self.prompt_limits.get(family).copied()
    }

    /// Demonstrations for a family, in stored order. Unknown families yield
    /// an empty list; running without demos is a supported configuration.
    pub fn demos_for(&self, family: &str) -> Vec<&Demonstration> {
        self.demos.iter().filter(|d| d.family == family).collect()
    }

    /// Load `manifest.json` and the demo files it references.
    pub fn load(dir: &Path) -> Result<Self, DemoError> {
        let manifest_path = dir.join("manifest.json");
        let manifest: Manifest = serde_json::from_str(
            &std::fs::read_to_string(&manifest_path)
                .map_err(|e| DemoError::Io(format!("{}: {e}", manifest_path.display())))?,
        )
        .map_err(|e| DemoError::Json(format!("{}: {e}", manifest_path.display())))?;

        let mut demos = Vec::new();
        for entry in &manifest.entries {
            let path = dir.join(&entry.file);
            let mut demo: Demonstration = serde_json::from_str(
                &std::fs::read_to_string(&path)
                    .map_err(|e| DemoError::Io(format!("{}: {e}", path.display())))?,
            )
            .map_err(|e| DemoError::Json(format!("{}: {e}", path.display())))?;
            demo.fix_indices();
            demo.validate_chain()?;
            demos.push(demo);
        }
        Ok(Self { demos, prompt_limits: manifest.prompt_limits })
    }

    /// Write one JSON file per demo plus the manifest.
    pub fn save(&self, dir: &Path) -> Result<(), DemoError> {
        std::fs::create_dir_all(dir).map_err(|e| DemoError::Io(format!("{}: {e}", dir.display())))?;
        let mut entries = Vec::new();
        for demo in &self.demos {
            let file = format!("{}-{}.json", demo.family, demo.seed);
            let path = dir.join(&file);
            std::fs::write(&path, serde_json::to_string_pretty(demo).expect("demo serializes"))
                .map_err(|e| DemoError::Io(format!("{}: {e}", path.display())))?;
            entries.push(ManifestEntry { family: demo.family.clone(), seed: demo.seed, file });
        }
        let manifest = Manifest { entries, prompt_limits: self.prompt_limits.clone() };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
            .map_err(|e| DemoError::Io(format!("{}: {e}", path.display())))
    }
}
