//! Ground-truth scripted solvers, one per task family.
//!
//! An oracle inspects the live environment (it is allowed to see everything)
//! and emits the single next action that makes progress. Driving the agent
//! loop one action per round keeps oracle runs aligned with halt-on-change:
//! every state-changing action triggers a fresh proposal anyway.

use crate::action::ActionCommand;

use super::{Goal, SimEnv, TaskStatus};

/// Stateless per-family policy: the next action is a pure function of the
/// current environment state.
#[derive(Debug, Clone)]
pub struct Oracle {
    family: String,
}

/// Oracle for a registered family, if one exists.
pub fn oracle_for(family: &str) -> Option<Oracle> {
    SimEnv::families()
        .contains(&family)
        .then(|| Oracle { family: family.to_string() })
}

impl Oracle {
    pub fn family(&self) -> &str {
        &self.family
    }

    /// The next action toward success, or `None` once the episode is over.
    pub fn next_action(&self, env: &SimEnv) -> Option<ActionCommand> {
        if env.status() != TaskStatus::Running {
            return None;
        }
        let click = |widget: usize| {
            env.element_id_of(widget).map(|element_id| ActionCommand::ClickElement { element_id })
        };
        match env_goal(env) {
            Goal::ClickTest { button } => click(*button),
            Goal::ClickButton { target, .. } => click(*target),
            Goal::ClickLink { target, .. } => click(*target),
            Goal::ClickDialog { close } => click(*close),
            Goal::ClickCheckboxes { required, boxes, submit } => {
                for &b in boxes {
                    let want = required.contains(&b);
                    if env.widgets()[b].checked != Some(want) {
                        return click(b);
                    }
                }
                click(*submit)
            }
            Goal::ChooseList { dropdown, target_text, submit } => {
                let dd = &env.widgets()[*dropdown];
                if dd.text.as_deref() == Some(target_text.as_str()) && !dd.expanded {
                    return click(*submit);
                }
                if !dd.expanded {
                    return click(*dropdown);
                }
                let option = env
                    .widgets()
                    .iter()
                    .position(|w| {
                        w.parent_dropdown == Some(*dropdown)
                            && w.text.as_deref() == Some(target_text.as_str())
                    })
                    .expect("target option exists");
                click(option)
            }
            Goal::EnterText { field, target, submit } => {
                let w = &env.widgets()[*field];
                if w.buffer.as_deref() == Some(target.as_str()) {
                    click(*submit)
                } else if w.focus_flag == Some(true) {
                    Some(ActionCommand::TypeText { string_to_type: target.clone() })
                } else {
                    click(*field)
                }
            }
            Goal::LoginUser { user_field, pass_field, username, password, submit } => {
                for (field, value) in [(user_field, username), (pass_field, password)] {
                    let w = &env.widgets()[*field];
                    if w.buffer.as_deref() != Some(value.as_str()) {
                        return if w.focus_flag == Some(true) {
                            Some(ActionCommand::TypeText { string_to_type: value.clone() })
                        } else {
                            click(*field)
                        };
                    }
                }
                click(*submit)
            }
            Goal::DragBox { item, target } => {
                let item_box = env.widgets()[*item].bbox;
                let target_box = env.widgets()[*target].bbox;
                if !env.mouse_held() {
                    return Some(ActionCommand::DragMouseHoldDown {
                        x: item_box.center_x(),
                        y: item_box.center_y(),
                    });
                }
                if item_box.center_x() != target_box.center_x()
                    || item_box.center_y() != target_box.center_y()
                {
                    return Some(ActionCommand::DragMouseMove {
                        x: target_box.center_x(),
                        y: target_box.center_y(),
                    });
                }
                Some(ActionCommand::DragMouseRelease)
            }
            Goal::HighlightText { text_widget, target, submit } => {
                let w = &env.widgets()[*text_widget];
                let text = w.text.as_deref().unwrap_or_default();
                let char_start = text.find(target.as_str()).map(|byte| {
                    text[..byte].chars().count()
                })?;
                let char_end = char_start + target.chars().count() - 1;
                let y = w.bbox.center_y();
                if w.selected_text().as_deref() == Some(target.as_str()) && !env.mouse_held() {
                    return click(*submit);
                }
                if !env.mouse_held() {
                    return Some(ActionCommand::DragMouseHoldDown {
                        x: w.char_center_x(char_start),
                        y,
                    });
                }
                if w.selection != Some((char_start, char_end)) {
                    return Some(ActionCommand::DragMouseMove { x: w.char_center_x(char_end), y });
                }
                Some(ActionCommand::DragMouseRelease)
            }
            #[cfg(test)]
            Goal::SelectRadio { target, radios, submit } => {
                for &r in radios {
                    let want = r == *target;
                    if env.widgets()[r].checked != Some(want) {
                        return click(r);
                    }
                }
                click(*submit)
            }
            Goal::Sandbox => None,
        }
    }

    /// Longest trajectory this family's oracle may need (actions, excluding
    /// the start marker).
    pub fn round_bound(&self) -> u32 {
        match self.family.as_str() {
            "click-test" | "click-button" | "click-link" | "click-dialog" => 1,
            "choose-list" | "drag-box" | "enter-text" => 3,
            "highlight-text" => 4,
            "click-checkboxes" => 6,
            "login-user" => 5,
            _ => 6,
        }
    }
}

fn env_goal(env: &SimEnv) -> &Goal {
    &env.goal
}
