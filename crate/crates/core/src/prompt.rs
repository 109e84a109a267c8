//! Prompt assembly.
//!
//! Two prompt surfaces are produced here. The action prompt stacks expert
//! demonstrations, the task description, the action history, the current
//! screen, step-by-step instructions, and guard-rail guidelines, in that
//! fixed order; golden tests pin its bytes. The rationale prompt replays one
//! demonstrated action between its before/after screens and asks for a
//! one-paragraph explanation; it is used to annotate demonstrations.

use thiserror::Error;

use crate::action::{render_record, ActionRecord, HistoryStyle, ToolSchema};
use crate::demo::{render_demo, DemoStore, Demonstration};
use crate::ui::{
    render_element_lines, render_observation, Observation, RenderStyle, COORDINATE_NOTE,
};

const PREAMBLE: &str = "Tasks can be completed by applying appropriate actions in sequence.";
const DEMO_HEADER: &str = "### Expert Demonstrations ###";
const DEMO_INTRO: &str =
    "For example, given below are the demos showing the correct sequence of actions for each corresponding task:";
const TRANSITION: &str = "We are solving a similar task.";
const CONTEXT_LINE: &str =
    "You are given the history of actions made correctly by the user so far, and current screen status which is the result of those actions.";
const TASK_HEADER: &str = "### Task Description ###";
const HISTORY_HEADER: &str = "### Action History ###";
const SCREEN_HEADER: &str =
    "### The UI Element List of the Current Screen That You Can Take Next Actions On ###";
const CANDIDATES_HEADER: &str = "### Candidates of Action Types ###";
const INSTRUCTIONS_HEADER: &str = "### Instructions ###";

/// Guard-rail lines appended at the end of the action prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidelineSet {
    lines: Vec<String>,
}

impl Default for GuidelineSet {
    fn default() -> Self {
        Self {
            lines: [
                "- MAKE SURE that when you recommend actions that need to interact with UI elements, the UI elements MUST BE in the current screen.",
                "- MAKE SURE that when satisfying the task completion conditions, click the 'Submit' button to finish.",
                "- MAKE SURE that even if you do not find a suitable action, return the most plausible one.",
                "- MAKE SURE that since texts in elements are extracted by recognizing with OCR, solve the given task considering that some mis-typos could exist.",
            ]
            .into_iter()
            .map(str::to_string)
            .collect(),
        }
    }
}

impl GuidelineSet {
    pub fn custom(lines: Vec<String>) -> Self {
        Self { lines }
    }

    pub fn none() -> Self {
        Self { lines: Vec::new() }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

/// Builder switches, mirroring the ablation arms: tool-calling vs plain-text
/// action candidates, with/without the step-by-step instruction block, and
/// with/without demonstration rationales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptOptions {
    pub use_tools: bool,
    pub include_cot: bool,
    pub demo_reasons: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self { use_tools: true, include_cot: true, demo_reasons: true }
    }
}

/// The assembled prompt: one user message, plus tool schemas when the
/// action vocabulary travels via function calling instead of prompt text.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_text: Option<String>,
    pub user_text: String,
    pub tool_schemas: Option<Vec<ToolSchema>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("rationales are only generated for real actions, not the start marker")]
    RationaleForStart,
    #[error("action index {k} outside history of length {len}")]
    IndexOutOfRange { k: usize, len: usize },
}

/// Up to `max_k` stored demonstrations for the family, in stored order.
pub fn select_demos<'a>(store: &'a DemoStore, family: &str, max_k: usize) -> Vec<&'a Demonstration> {
    let limit = store.prompt_limit(family).map_or(max_k, |l| l.min(max_k));
    store.demos_for(family).into_iter().take(limit).collect()
}

/// Assemble the action-proposal prompt.
///
/// `history` must begin with the `start` record. With no demonstrations the
/// demo section and its transition line are omitted entirely.
pub fn build_action_prompt(
    task: &str,
    demos: &[&Demonstration],
    history: &[ActionRecord],
    obs: &Observation,
    guidelines: &GuidelineSet,
    options: &PromptOptions,
) -> PromptBundle {
    debug_assert!(!history.is_empty(), "history must begin with the start record");
    let last_index = history.last().map_or(1, |r| r.index) as usize;

    let mut blocks: Vec<String> = vec![PREAMBLE.to_string()];

    if !demos.is_empty() {
        let rendered: Vec<String> = demos
            .iter()
            .enumerate()
            .map(|(i, d)| render_demo(d, (i + 1) as u32, options.demo_reasons))
            .collect();
        blocks.push(format!("{DEMO_HEADER}\n{DEMO_INTRO}\n{}", rendered.join("\n\n")));
        blocks.push(format!("{TRANSITION}\n{CONTEXT_LINE}"));
    } else {
        blocks.push(CONTEXT_LINE.to_string());
    }

    blocks.push(format!("{TASK_HEADER}\n{task}"));

    let history_lines: Vec<String> = history
        .iter()
        .map(|r| render_record(r, HistoryStyle::Episode, true))
        .collect();
    blocks.push(format!("{HISTORY_HEADER}\n{}", history_lines.join("\n")));

    blocks.push(format!(
        "{SCREEN_HEADER}\n{}",
        render_observation(obs, RenderStyle::CurrentScreen)
    ));

    if !options.use_tools {
        blocks.push(format!("{CANDIDATES_HEADER}\n{}", candidate_lines()));
    }

    blocks.push(instructions_block(last_index, guidelines, options.include_cot));

    PromptBundle {
        system_text: None,
        user_text: blocks.join("\n\n"),
        tool_schemas: options.use_tools.then(crate::action::all_function_schemas),
    }
}

/// Plain-text enumeration of the action vocabulary, used when function
/// calling is unavailable.
fn candidate_lines() -> String {
    crate::action::ACTION_DESCRIPTORS
        .iter()
        .map(|d| {
            if d.params.is_empty() {
                format!("- {}: {}", d.name, d.description)
            } else {
                let params: Vec<&str> = d.params.iter().map(|p| p.name).collect();
                format!("- {} ({}): {}", d.name, params.join(", "), d.description)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn response_format_lines(next: usize) -> String {
    (0..3)
        .map(|i| {
            format!(
                "Action_{}=(Action: functions.some_function_name, Argument: {{property_name: property_val}})",
                next + i
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn instructions_block(last_index: usize, guidelines: &GuidelineSet, include_cot: bool) -> String {
    let next = last_index + 1;
    let mut sections: Vec<String> = Vec::new();

    let ask = format!(
        "What should be the next actions(action_{next}, action_{}, ...) that can be performed on the current screen?",
        next + 1
    );
    let immediacy = "If there is an action that can complete the task, perform it immediately. It's better if you can complete the task with fewer actions.";

    if include_cot {
        sections.push(format!(
            "{INSTRUCTIONS_HEADER}\n{ask}\n{immediacy}\n\
             Your answer must be composed of the following five sections:\n\
             First, explain in detail what has been done so far up to action_{last_index} and analyze why these steps were needed.\n\
             Do not assume that the user could have made a mistake."
        ));
        sections.push(
            "Secondly, describe every single screen component that contains information that helps user solve the task or that needs to be interacted with. Explain about the components step by step in a detailed manner considering the given task.\n\
             When the task deals with a list of items (e.g. finding the size of a group, identifying N-th item in order, etc.), you must include the full iteration of each and every items, like this: (1)first_item, (2)second_item, ..., (N)N-th_item."
                .to_string(),
        );
        sections.push(
            "Thirdly, describe what needs to be done to complete the task, detailing each action from start to finish. Then, identify which steps can currently be performed based on the UI elements visible on the screen, and mention the ID of these elements.\n\
             If there is a demo available, first describe the sequence of actions demonstrated, then link these actions to the steps in your plan before outlining the complete action plan."
                .to_string(),
        );
        sections.push(format!(
            "Lastly, each action must be in the form of Action_{next}=(Action: functions.some_function_name, Argument: {{property_name: property_val}}).\n\
             Return the actions that need to be performed on the current screen.\n\
             The actions must be separated by new line characters.\n\
             In case there are three actions to be performed, your response will be in the following form:"
        ));
    } else {
        sections.push(format!(
            "{INSTRUCTIONS_HEADER}\n{ask}\n{immediacy}\n\
             Each action must be in the form of Action_{next}=(Action: functions.some_function_name, Argument: {{property_name: property_val}}).\n\
             Return the actions that need to be performed on the current screen.\n\
             The actions must be separated by new line characters.\n\
             In case there are three actions to be performed, your response will be in the following form:"
        ));
    }
    sections.push(response_format_lines(next));
    if !guidelines.lines().is_empty() {
        sections.push(guidelines.lines().join("\n"));
    }
    sections.join("\n\n")
}

/// Assemble the rationale-generation prompt for history entry `k` (1-based;
/// entry 1 is the start marker and has a fixed rationale already).
///
/// Reasons of entries earlier than `k` are included — they were generated in
/// previous passes — while entries from `k` on are rendered without reasons.
pub fn build_rationale_prompt(
    task: &str,
    history: &[ActionRecord],
    k: usize,
    before: &Observation,
    after: &Observation,
) -> Result<String, PromptError> {
    if k < 2 {
        return Err(PromptError::RationaleForStart);
    }
    if k > history.len() {
        return Err(PromptError::IndexOutOfRange { k, len: history.len() });
    }

    let history_lines: Vec<String> = history
        .iter()
        .map(|r| render_record(r, HistoryStyle::Episode, (r.index as usize) < k))
        .collect();

    let before_section = if before.is_empty() {
        render_element_lines(before, RenderStyle::DemoState)
    } else {
        format!("{COORDINATE_NOTE}\n{}", render_element_lines(before, RenderStyle::DemoState))
    };
    let after_section = render_element_lines(after, RenderStyle::DemoState);

    Ok(format!(
        "{PREAMBLE}\n\
         \n\
         Below is a record of a successful completion of the given task, demonstrated by an expert.\n\
         (Note: The trainee has added the \"reason\" part for each action in the record, but it may not accurately describe the reasoning used by the expert who performed the task. Do not assume that the written reason is correct.)\n\
         \n\
         TASK:\n\
         {task}\n\
         \n\
         Action History:\n\
         {history}\n\
         \n\
         We want to explain to a trainee why the action_{k} was made.\n\
         \n\
         Before the action_{k}, the status of the computer screen was as the following:\n\
         {before_section}\n\
         \n\
         After the action_{k}, the status of the computer screen was as the following:\n\
         {after_section}\n\
         \n\
         First, explain how the action_{k} (both its type and its arguments) was chosen by the expert, and why it was necessary.\n\
         Since the trainee cannot view the screen, always provide a detailed description as specified whenever you refer to a screen component in your response.\n\
         Second, describe what happened after the action, as shown on the screen.\n\
         \n\
         Answer in one paragraph.",
        history = history_lines.join("\n"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ActionCommand, ActionRecord};
    use crate::demo::{DemoStep, Demonstration};
    use crate::ui::{BBox, ElementKind, UiElement};

    fn screen() -> Observation {
        Observation::new(
            vec![UiElement::new(ElementKind::Button, BBox::new(1, 98, 80, 112))
                .with_text("Submit")
                .with_focused(false)],
            160,
            210,
        )
        .unwrap()
    }

    fn empty() -> Observation {
        Observation::new(vec![], 160, 210).unwrap()
    }

    fn tiny_demo() -> Demonstration {
        let obs = screen();
        let button = obs.get(1).unwrap().clone();
        Demonstration {
            family: "click-test".to_string(),
            seed: 3000,
            utterance: "Click the button.".to_string(),
            steps: vec![
                DemoStep {
                    pre: obs.clone(),
                    action: ActionRecord::start(Some("Initiating the task.")),
                    post: obs.clone(),
                },
                DemoStep {
                    pre: obs.clone(),
                    action: ActionRecord::for_command(
                        2,
                        &ActionCommand::ClickElement { element_id: 1 },
                        Some(button),
                    )
                    .with_reason("Clicking the only button completes the task."),
                    post: empty(),
                },
            ],
        }
    }

    fn start_history() -> Vec<ActionRecord> {
        vec![ActionRecord::start(None)]
    }

    #[test]
    fn sections_appear_in_fixed_order() {
        let demo = tiny_demo();
        let bundle = build_action_prompt(
            "Click the button.",
            &[&demo],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions::default(),
        );
        let text = &bundle.user_text;
        let markers = [
            PREAMBLE,
            DEMO_HEADER,
            TRANSITION,
            TASK_HEADER,
            HISTORY_HEADER,
            SCREEN_HEADER,
            INSTRUCTIONS_HEADER,
            "- MAKE SURE",
        ];
        let mut last = 0;
        for marker in markers {
            let pos = text[last..].find(marker).unwrap_or_else(|| panic!("missing `{marker}`"));
            last += pos;
        }
        assert!(bundle.tool_schemas.is_some());
        assert!(!text.contains(CANDIDATES_HEADER));
    }

    #[test]
    fn zero_demos_elides_section_and_transition() {
        let bundle = build_action_prompt(
            "Click the button.",
            &[],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions::default(),
        );
        assert!(bundle.user_text.starts_with(PREAMBLE));
        assert!(!bundle.user_text.contains(DEMO_HEADER));
        assert!(!bundle.user_text.contains(TRANSITION));
        assert!(bundle.user_text.contains(CONTEXT_LINE));
    }

    #[test]
    fn plain_text_candidates_replace_tool_schemas() {
        let bundle = build_action_prompt(
            "Click the button.",
            &[],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions { use_tools: false, ..Default::default() },
        );
        assert!(bundle.tool_schemas.is_none());
        assert!(bundle.user_text.contains(CANDIDATES_HEADER));
        assert!(bundle.user_text.contains("- click_element (element_id): This action moves"));
        // candidates sit between the screen section and the instructions
        let screen_pos = bundle.user_text.find(SCREEN_HEADER).unwrap();
        let cand_pos = bundle.user_text.find(CANDIDATES_HEADER).unwrap();
        let instr_pos = bundle.user_text.find(INSTRUCTIONS_HEADER).unwrap();
        assert!(screen_pos < cand_pos && cand_pos < instr_pos);
    }

    #[test]
    fn cot_block_toggles() {
        let with = build_action_prompt(
            "t",
            &[],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions::default(),
        );
        let without = build_action_prompt(
            "t",
            &[],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions { include_cot: false, ..Default::default() },
        );
        assert!(with.user_text.contains("First, explain in detail"));
        assert!(!without.user_text.contains("First, explain in detail"));
        assert!(without.user_text.contains("Each action must be in the form of Action_2="));
        assert!(without.user_text.contains("- MAKE SURE"));
    }

    #[test]
    fn demo_reasons_strip_cleanly() {
        let demo = tiny_demo();
        let stripped = build_action_prompt(
            "t",
            &[&demo],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions { demo_reasons: false, ..Default::default() },
        );
        assert!(!stripped.user_text.contains("reason:"));
        let kept = build_action_prompt(
            "t",
            &[&demo],
            &start_history(),
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions::default(),
        );
        assert!(kept.user_text.contains("reason: \"Initiating the task.\""));
    }

    #[test]
    fn indices_follow_history_length() {
        let mut history = start_history();
        history.push(ActionRecord::for_command(2, &ActionCommand::PressControlA, None));
        history.push(ActionRecord::for_command(3, &ActionCommand::PressControlC, None));
        let bundle = build_action_prompt(
            "t",
            &[],
            &history,
            &screen(),
            &GuidelineSet::default(),
            &PromptOptions::default(),
        );
        assert!(bundle.user_text.contains("next actions(action_4, action_5, ...)"));
        assert!(bundle.user_text.contains("done so far up to action_3"));
        assert!(bundle.user_text.contains("Action_4=(Action: functions.some_function_name"));
        assert!(bundle.user_text.contains("Action_6=(Action: functions.some_function_name"));
    }

    #[test]
    fn prompt_building_is_pure() {
        let demo = tiny_demo();
        let build = || {
            build_action_prompt(
                "Click the button.",
                &[&demo],
                &start_history(),
                &screen(),
                &GuidelineSet::default(),
                &PromptOptions::default(),
            )
            .user_text
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn rationale_prompt_bounds() {
        let demo = tiny_demo();
        let records: Vec<ActionRecord> = demo.records();
        assert_eq!(
            build_rationale_prompt("t", &records, 1, &screen(), &empty()).unwrap_err(),
            PromptError::RationaleForStart
        );
        assert_eq!(
            build_rationale_prompt("t", &records, 3, &screen(), &empty()).unwrap_err(),
            PromptError::IndexOutOfRange { k: 3, len: 2 }
        );
    }

    #[test]
    fn rationale_prompt_masks_reasons_from_k_on() {
        let demo = tiny_demo();
        let records = demo.records();
        let text = build_rationale_prompt(
            &demo.utterance,
            &records,
            2,
            &demo.steps[1].pre,
            &demo.steps[1].post,
        )
        .unwrap();
        assert!(text.contains("action_1: {name: start, reason: \"Initiating the task.\"}"));
        assert!(!text.contains("Clicking the only button completes the task."));
        assert!(text.contains("After the action_2, the status of the computer screen was as the following:\nEmpty Screen"));
        assert!(text.ends_with("Answer in one paragraph."));
    }
}
