//! The episode loop: observe, propose, execute, repeat until terminal.
//!
//! Each round snapshots the screen, builds the prompt, asks the gateway for
//! actions, and executes them sequentially. After every executed action the
//! screen is re-observed; if its digest differs from the digest the proposal
//! was made against, the remaining proposed actions are discarded and a fresh
//! round begins. Gateway and parse failures consume a round (they are
//! recorded in the transcript) rather than aborting the episode.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{
    parse_llm_actions, validate, ActionCommand, ActionRecord, CheckedCommand, ToolInvocation,
};
use crate::demo::DemoStore;
use crate::env::{
    Chord, KeyInput, Modifier, Primitive, PrimitiveError, PrimitiveOutcome, SimEnv, TaskStatus,
};
use crate::gateway::{ChatMessage, ChatRequest, Gateway};
use crate::prompt::{build_action_prompt, select_demos, GuidelineSet, PromptOptions};
use crate::ui::{Observation, ObservationError};

// ---------------------------------------------------------------------------
// Configuration and results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_rounds: u32,
    pub max_actions_per_round: u32,
    pub demo_max: usize,
    pub use_tools: bool,
    pub no_demos: bool,
    pub no_cot: bool,
    pub strip_rationales: bool,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_timeout_secs: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_rounds: 10,
            max_actions_per_round: 8,
            demo_max: 5,
            use_tools: true,
            no_demos: false,
            no_cot: false,
            strip_rationales: false,
            model: "gpt-4-0125".to_string(),
            temperature: 0.0,
            max_tokens: 2048,
            request_timeout_secs: 60,
        }
    }
}

impl EpisodeConfig {
    pub fn prompt_options(&self) -> PromptOptions {
        PromptOptions {
            use_tools: self.use_tools,
            include_cot: !self.no_cot,
            demo_reasons: !self.strip_rationales,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeOutcome {
    Success,
    Failure,
    Timeout,
    Error,
}

/// What the gateway answered, as kept in transcripts. Latency and token
/// usage are deliberately not logged so fixed-cassette replays are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseLog {
    pub text: Option<String>,
    pub tool_calls: Option<Vec<ToolInvocation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedAction {
    pub command: ActionCommand,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// One transcript line per round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub prompt: String,
    pub response: Option<ResponseLog>,
    pub parsed_actions: Vec<ActionCommand>,
    pub executed: Vec<ExecutedAction>,
    /// 0-based position in `executed` after which halt-on-change fired.
    pub halted_at: Option<usize>,
    pub post_digest: String,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeResult {
    pub family: String,
    pub seed: u64,
    pub outcome: EpisodeOutcome,
    pub rounds_used: u32,
    #[serde(skip)]
    pub transcript: Vec<RoundRecord>,
    #[serde(skip)]
    pub history: Vec<ActionRecord>,
}

// ---------------------------------------------------------------------------
// Observation source
// ---------------------------------------------------------------------------

/// Supplies observations of the environment. The simulator's ground truth
/// stands in for a visual perception stack behind the same interface.
pub trait Observer {
    fn observe(&mut self, env: &SimEnv) -> Result<Observation, ObservationError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthObserver;

impl Observer for GroundTruthObserver {
    fn observe(&mut self, env: &SimEnv) -> Result<Observation, ObservationError> {
        env.try_snapshot()
    }
}

// ---------------------------------------------------------------------------
// Command execution
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("action rejected: {0}")]
    ActionRejected(String),
}

/// Decompose a checked command into input primitives.
pub fn primitive_plan(cmd: &CheckedCommand) -> Vec<Primitive> {
    let target = cmd
        .snapshot
        .as_ref()
        .map(|el| (el.bbox.center_x(), el.bbox.center_y()));
    match &cmd.command {
        ActionCommand::ClickElement { .. } => {
            let (x, y) = target.expect("validated element command carries a snapshot");
            vec![Primitive::MouseMove { x, y }, Primitive::MouseDown, Primitive::MouseUp]
        }
        ActionCommand::ClickNewPoint { x, y } => {
            vec![Primitive::MouseMove { x: *x, y: *y }, Primitive::MouseDown, Primitive::MouseUp]
        }
        ActionCommand::ControlClickElement { .. } => {
            let (x, y) = target.expect("validated element command carries a snapshot");
            vec![
                Primitive::ModifierDown(Modifier::Ctrl),
                Primitive::MouseMove { x, y },
                Primitive::MouseDown,
                Primitive::MouseUp,
                Primitive::ModifierUp(Modifier::Ctrl),
            ]
        }
        ActionCommand::TypeText { string_to_type } => string_to_type
            .chars()
            .map(|c| Primitive::KeyEvent(KeyInput::Char(c)))
            .collect(),
        ActionCommand::PointElement { .. } => {
            let (x, y) = target.expect("validated element command carries a snapshot");
            vec![Primitive::MouseMove { x, y }]
        }
        ActionCommand::PressControlA => chord_plan(Chord::CtrlA),
        ActionCommand::PressControlC => chord_plan(Chord::CtrlC),
        ActionCommand::PressControlV => chord_plan(Chord::CtrlV),
        ActionCommand::DragMouseHoldDown { x, y } => {
            vec![Primitive::MouseMove { x: *x, y: *y }, Primitive::MouseDown]
        }
        ActionCommand::DragMouseMove { x, y } => vec![Primitive::MouseMove { x: *x, y: *y }],
        ActionCommand::DragMouseRelease => vec![Primitive::MouseUp],
    }
}

fn chord_plan(chord: Chord) -> Vec<Primitive> {
    let key = match chord {
        Chord::CtrlA => 'a',
        Chord::CtrlC => 'c',
        Chord::CtrlV => 'v',
    };
    vec![
        Primitive::ModifierDown(Modifier::Ctrl),
        Primitive::KeyEvent(KeyInput::Char(key)),
        Primitive::ModifierUp(Modifier::Ctrl),
    ]
}

/// Apply a checked command to the environment.
///
/// Returns a note when the command was applied but had no effect (for
/// example typing with nothing focused); the note is surfaced in the action
/// history so the proposer can self-correct.
pub fn execute_command(env: &mut SimEnv, cmd: &CheckedCommand) -> Result<Option<String>, ExecError> {
    let mut ignored: Option<&'static str> = None;
    let mut applied_any = false;
    for p in primitive_plan(cmd) {
        match env.apply_primitive(p) {
            Ok(PrimitiveOutcome::Applied) => applied_any = true,
            Ok(PrimitiveOutcome::Ignored(reason)) => ignored = Some(reason),
            Err(PrimitiveError::EpisodeOver) if applied_any => break,
            Err(err) => return Err(ExecError::ActionRejected(err.to_string())),
        }
    }
    Ok(if applied_any { None } else { ignored.map(|r| format!("no effect: {r}")) })
}

/// Halt-on-change rule: stop executing the current proposal as soon as the
/// observation digest differs from the digest at proposal time.
pub fn halt_check(proposal_digest: &str, post_obs: &Observation) -> bool {
    post_obs.digest() != proposal_digest
}

#[derive(Debug, Error)]
pub enum OracleScriptError {
    #[error("unknown task family `{0}`")]
    UnknownFamily(String),
    #[error("oracle failed to solve {family} seed {seed}")]
    OracleFailed { family: String, seed: u64 },
}

/// Precompute the oracle's per-round commands for a fresh `(family, seed)`
/// episode. Backs the scripted evaluation backend.
pub fn oracle_commands(family: &str, seed: u64) -> Result<Vec<ActionCommand>, OracleScriptError> {
    let oracle = crate::env::oracle_for(family)
        .ok_or_else(|| OracleScriptError::UnknownFamily(family.to_string()))?;
    let mut env = SimEnv::reset(family, seed)
        .map_err(|_| OracleScriptError::UnknownFamily(family.to_string()))?;
    let failed = || OracleScriptError::OracleFailed { family: family.to_string(), seed };
    let mut commands = Vec::new();
    let mut guard = 0;
    while env.status() == TaskStatus::Running && guard < 16 {
        let Some(cmd) = oracle.next_action(&env) else { break };
        let obs = env.try_snapshot().map_err(|_| failed())?;
        let checked = validate(&cmd, &obs).map_err(|_| failed())?;
        execute_command(&mut env, &checked).map_err(|_| failed())?;
        commands.push(cmd);
        guard += 1;
    }
    if env.status() != TaskStatus::Success {
        return Err(failed());
    }
    Ok(commands)
}

/// One grammar-line response per oracle round for `(family, seed)`.
pub fn oracle_script(family: &str, seed: u64) -> Result<Vec<String>, OracleScriptError> {
    Ok(oracle_commands(family, seed)?
        .iter()
        .map(|cmd| crate::action::render_action_lines(std::slice::from_ref(cmd), 2))
        .collect())
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

pub fn run_episode(
    env: &mut SimEnv,
    observer: &mut dyn Observer,
    gateway: &dyn Gateway,
    demos: &DemoStore,
    config: &EpisodeConfig,
) -> EpisodeResult {
    let mut transcript: Vec<RoundRecord> = Vec::new();
    let mut history = vec![ActionRecord::start(None)];
    let guidelines = GuidelineSet::default();
    let options = config.prompt_options();

    let mut outcome = EpisodeOutcome::Timeout;
    'rounds: for round in 1..=config.max_rounds {
        let obs = match observer.observe(env) {
            Ok(obs) => obs,
            Err(err) => {
                outcome = EpisodeOutcome::Error;
                transcript.push(error_round(round, String::new(), err.to_string()));
                break;
            }
        };
        let proposal_digest = obs.digest().to_string();

        let selected = if config.no_demos {
            Vec::new()
        } else {
            select_demos(demos, env.family(), config.demo_max)
        };
        let bundle =
            build_action_prompt(env.utterance(), &selected, &history, &obs, &guidelines, &options);

        let mut request = ChatRequest::new(&config.model, vec![ChatMessage::user(&bundle.user_text)]);
        if let Some(system) = &bundle.system_text {
            request.messages.insert(0, ChatMessage::system(system));
        }
        request.tool_schemas = bundle.tool_schemas.clone();
        request.temperature = config.temperature;
        request.max_tokens = config.max_tokens;
        request.timeout = Duration::from_secs(config.request_timeout_secs);

        let response = match gateway.complete(&request) {
            Ok(r) => r,
            Err(err) => {
                transcript.push(error_round(round, bundle.user_text, err.to_string()));
                continue;
            }
        };
        let response_log = ResponseLog {
            text: response.text.clone(),
            tool_calls: response.tool_calls.clone(),
        };

        let mut commands =
            match parse_llm_actions(response.text.as_deref(), response.tool_calls.as_deref()) {
                Ok(cmds) => cmds,
                Err(err) => {
                    transcript.push(RoundRecord {
                        round,
                        prompt: bundle.user_text,
                        response: Some(response_log),
                        parsed_actions: Vec::new(),
                        executed: Vec::new(),
                        halted_at: None,
                        post_digest: proposal_digest,
                        status: env.status(),
                        error: Some(err.to_string()),
                    });
                    continue;
                }
            };
        commands.truncate(config.max_actions_per_round as usize);

        let mut executed: Vec<ExecutedAction> = Vec::new();
        let mut halted_at: Option<usize> = None;
        let mut observer_error: Option<String> = None;
        for (i, command) in commands.iter().enumerate() {
            let index = history.len() as u32 + 1;
            let note = match validate(command, &obs) {
                Err(err) => Some(err.to_string()),
                Ok(checked) => match execute_command(env, &checked) {
                    Err(err) => Some(err.to_string()),
                    Ok(note) => {
                        let mut record = ActionRecord::for_command(index, command, checked.snapshot);
                        if let Some(n) = &note {
                            record = record.with_error(n.clone());
                        }
                        history.push(record);
                        executed.push(ExecutedAction {
                            command: command.clone(),
                            ok: true,
                            error: note,
                        });
                        None
                    }
                },
            };
            if let Some(message) = note {
                history.push(
                    ActionRecord::for_command(index, command, None).with_error(message.clone()),
                );
                executed.push(ExecutedAction { command: command.clone(), ok: false, error: Some(message) });
            }
            if env.status() != TaskStatus::Running {
                break;
            }
            match observer.observe(env) {
                Ok(post) => {
                    if halt_check(&proposal_digest, &post) {
                        halted_at = Some(i);
                        break;
                    }
                }
                Err(err) => {
                    observer_error = Some(err.to_string());
                    break;
                }
            }
        }

        let status = env.status();
        let post_digest = observer
            .observe(env)
            .map(|o| o.digest().to_string())
            .unwrap_or_default();
        transcript.push(RoundRecord {
            round,
            prompt: bundle.user_text,
            response: Some(response_log),
            parsed_actions: commands,
            executed,
            halted_at,
            post_digest,
            status,
            error: observer_error.clone(),
        });

        if observer_error.is_some() {
            outcome = EpisodeOutcome::Error;
            break 'rounds;
        }
        match status {
            TaskStatus::Success => {
                outcome = EpisodeOutcome::Success;
                break 'rounds;
            }
            TaskStatus::Failure => {
                outcome = EpisodeOutcome::Failure;
                break 'rounds;
            }
            TaskStatus::Running => {}
        }
    }

    EpisodeResult {
        family: env.family().to_string(),
        seed: env.seed(),
        outcome,
        rounds_used: transcript.len() as u32,
        transcript,
        history,
    }
}

fn error_round(round: u32, prompt: String, error: String) -> RoundRecord {
    RoundRecord {
        round,
        prompt,
        response: None,
        parsed_actions: Vec::new(),
        executed: Vec::new(),
        halted_at: None,
        post_digest: String::new(),
        status: TaskStatus::Running,
        error: Some(error),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::render_action_lines;
    use crate::gateway::ScriptedGateway;
    use crate::ui::{BBox, ElementKind, UiElement};

    fn checked(cmd: ActionCommand, snapshot: Option<UiElement>) -> CheckedCommand {
        CheckedCommand { command: cmd, snapshot }
    }

    #[test]
    fn click_decomposes_to_move_down_up() {
        let button = UiElement::new(ElementKind::Button, BBox::new(2, 98, 99, 130))
            .with_text("Submit")
            .with_focused(false);
        let plan = primitive_plan(&checked(
            ActionCommand::ClickElement { element_id: 3 },
            Some(button),
        ));
        assert_eq!(
            plan,
            vec![
                Primitive::MouseMove { x: 50, y: 114 },
                Primitive::MouseDown,
                Primitive::MouseUp,
            ]
        );
    }

    #[test]
    fn type_text_emits_one_key_event_per_char() {
        let plan = primitive_plan(&checked(
            ActionCommand::TypeText { string_to_type: "EiTE".to_string() },
            None,
        ));
        assert_eq!(plan.len(), 4);
        assert!(plan.iter().all(|p| matches!(p, Primitive::KeyEvent(KeyInput::Char(_)))));
    }

    #[test]
    fn drag_release_without_hold_is_rejected() {
        let mut env = SimEnv::sandbox(vec![]);
        let err = execute_command(&mut env, &checked(ActionCommand::DragMouseRelease, None))
            .unwrap_err();
        assert!(matches!(err, ExecError::ActionRejected(_)));
    }

    #[test]
    fn control_click_finishing_the_episode_is_not_rejected() {
        // The trailing modifier-up lands after the environment went
        // terminal; the command must still count as executed.
        let cmds = oracle_commands("click-test", 8);
        let ActionCommand::ClickElement { element_id } = cmds[0] else {
            panic!("click-test oracle clicks an element")
        };
        let mut env = SimEnv::reset("click-test", 8).unwrap();
        let obs = env.snapshot();
        let checked =
            validate(&ActionCommand::ControlClickElement { element_id }, &obs).unwrap();
        assert_eq!(execute_command(&mut env, &checked), Ok(None));
        assert_eq!(env.status(), TaskStatus::Success);
    }

    #[test]
    fn typing_without_focus_reports_a_note() {
        let mut env = SimEnv::sandbox(vec![]);
        let note = execute_command(
            &mut env,
            &checked(ActionCommand::TypeText { string_to_type: "hi".to_string() }, None),
        )
        .unwrap();
        assert!(note.unwrap().contains("no focused editable widget"));
    }

    fn oracle_commands(family: &str, seed: u64) -> Vec<ActionCommand> {
        super::oracle_commands(family, seed).expect("oracle solves registered families")
    }

    fn oracle_script(family: &str, seed: u64) -> Vec<String> {
        super::oracle_script(family, seed).expect("oracle solves registered families")
    }

    #[test]
    fn scripted_oracle_click_solves_click_test_in_one_round() {
        let script = oracle_script("click-test", 0);
        assert_eq!(script.len(), 1);
        let gateway = ScriptedGateway::from_texts(script);
        let mut env = SimEnv::reset("click-test", 0).unwrap();
        let result = run_episode(
            &mut env,
            &mut GroundTruthObserver,
            &gateway,
            &DemoStore::empty(),
            &EpisodeConfig::default(),
        );
        assert_eq!(result.outcome, EpisodeOutcome::Success);
        assert_eq!(result.rounds_used, 1);
        assert_eq!(result.history.len(), 2);
    }

    #[test]
    fn prose_only_responses_time_out() {
        let texts: Vec<String> = (0..10).map(|i| format!("thinking about it, round {i}")).collect();
        let gateway = ScriptedGateway::from_texts(texts);
        let mut env = SimEnv::reset("click-test", 1).unwrap();
        let config = EpisodeConfig { max_rounds: 4, ..EpisodeConfig::default() };
        let result =
            run_episode(&mut env, &mut GroundTruthObserver, &gateway, &DemoStore::empty(), &config);
        assert_eq!(result.outcome, EpisodeOutcome::Timeout);
        assert_eq!(result.rounds_used, 4);
        assert!(result.transcript.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn gateway_errors_consume_rounds() {
        let gateway = ScriptedGateway::from_texts(Vec::<String>::new());
        let mut env = SimEnv::reset("click-test", 2).unwrap();
        let config = EpisodeConfig { max_rounds: 3, ..EpisodeConfig::default() };
        let result =
            run_episode(&mut env, &mut GroundTruthObserver, &gateway, &DemoStore::empty(), &config);
        assert_eq!(result.outcome, EpisodeOutcome::Timeout);
        assert_eq!(result.rounds_used, 3);
    }

    #[test]
    fn halt_on_change_discards_rest_of_proposal() {
        // Two independent checkbox clicks proposed in one round: the first
        // changes the screen, so the second is discarded and re-proposed.
        let seed = (0..50)
            .find(|&s| oracle_commands("click-checkboxes", s).len() >= 3)
            .expect("a seed with at least two required boxes");
        let cmds = oracle_commands("click-checkboxes", seed);
        assert!(matches!(cmds[0], ActionCommand::ClickElement { .. }));

        let mut responses = vec![render_action_lines(&cmds[0..2], 2)];
        for cmd in &cmds[1..] {
            responses.push(render_action_lines(std::slice::from_ref(cmd), 2));
        }
        let gateway = ScriptedGateway::from_texts(responses);

        let mut env = SimEnv::reset("click-checkboxes", seed).unwrap();
        let result = run_episode(
            &mut env,
            &mut GroundTruthObserver,
            &gateway,
            &DemoStore::empty(),
            &EpisodeConfig::default(),
        );

        let first_round = &result.transcript[0];
        assert_eq!(first_round.parsed_actions.len(), 2);
        assert_eq!(first_round.executed.len(), 1, "second click discarded");
        assert_eq!(first_round.halted_at, Some(0));
        // The discarded click is re-proposed; every round lands one action.
        assert_eq!(result.outcome, EpisodeOutcome::Success);
        assert_eq!(result.rounds_used as usize, cmds.len());
        assert!(result.transcript.iter().all(|r| r.executed.len() == 1));
    }

    #[test]
    fn stateless_actions_do_not_halt_the_round() {
        // point_element leaves the screen unchanged, so the following click
        // in the same proposal still executes.
        let cmds = oracle_commands("click-test", 6);
        let point_then_click = format!(
            "{}\n{}",
            render_action_lines(&[ActionCommand::PointElement { element_id: 1 }], 2),
            render_action_lines(std::slice::from_ref(&cmds[0]), 3),
        );
        let gateway = ScriptedGateway::from_texts(vec![point_then_click]);
        let mut env = SimEnv::reset("click-test", 6).unwrap();
        let result = run_episode(
            &mut env,
            &mut GroundTruthObserver,
            &gateway,
            &DemoStore::empty(),
            &EpisodeConfig::default(),
        );
        assert_eq!(result.outcome, EpisodeOutcome::Success);
        assert_eq!(result.rounds_used, 1);
        let round = &result.transcript[0];
        assert_eq!(round.executed.len(), 2, "pointing must not halt the round");
    }

    #[test]
    fn stale_element_id_is_skipped_and_noted() {
        let bad = render_action_lines(&[ActionCommand::ClickElement { element_id: 99 }], 2);
        let good = oracle_script("click-test", 4);
        let gateway = ScriptedGateway::from_texts(vec![bad, good[0].clone()]);
        let mut env = SimEnv::reset("click-test", 4).unwrap();
        let result = run_episode(
            &mut env,
            &mut GroundTruthObserver,
            &gateway,
            &DemoStore::empty(),
            &EpisodeConfig::default(),
        );
        assert_eq!(result.outcome, EpisodeOutcome::Success);
        assert_eq!(result.rounds_used, 2);
        let noted = &result.history[1];
        assert!(noted.error.as_deref().unwrap().contains("stale"));
        assert!(!result.transcript[0].executed[0].ok);
    }

    #[test]
    fn history_grows_monotonically_and_in_order() {
        for family in ["login-user", "choose-list", "drag-box", "highlight-text"] {
            let script = oracle_script(family, 5);
            let gateway = ScriptedGateway::from_texts(script.clone());
            let mut env = SimEnv::reset(family, 5).unwrap();
            let result = run_episode(
                &mut env,
                &mut GroundTruthObserver,
                &gateway,
                &DemoStore::empty(),
                &EpisodeConfig::default(),
            );
            assert_eq!(result.outcome, EpisodeOutcome::Success, "{family}");
            assert_eq!(result.history.len(), script.len() + 1, "{family}");
            for (i, record) in result.history.iter().enumerate() {
                assert_eq!(record.index, i as u32 + 1, "{family}");
            }
            // every executed action appears exactly once in history order
            let executed: Vec<_> =
                result.transcript.iter().flat_map(|r| &r.executed).collect();
            assert_eq!(executed.len(), script.len(), "{family}");
        }
    }
}
