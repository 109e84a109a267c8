//! Action vocabulary, function-calling schemas, response parsing, and
//! action-history rendering.
//!
//! The vocabulary is closed: eleven actions driven by keyboard and mouse
//! primitives. Scrolling has no dedicated action — it is achieved by dragging
//! a scrollbar element. Proposals arrive either as structured tool calls or
//! as free text lines of the form
//! `Action_2=(Action: functions.click_element, Argument: {element_id: 1})`;
//! both routes produce the same [`ActionCommand`] list.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ui::{render_attributes, Observation, RenderStyle, UiElement};

// ---------------------------------------------------------------------------
// Names and commands
// ---------------------------------------------------------------------------

/// The eleven action names, in canonical (schema) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionName {
    ClickElement,
    ClickNewPoint,
    ControlClickElement,
    TypeText,
    PointElement,
    PressControlA,
    PressControlC,
    PressControlV,
    DragMouseHoldDown,
    DragMouseMove,
    DragMouseRelease,
}

impl ActionName {
    pub const ALL: [ActionName; 11] = [
        ActionName::ClickElement,
        ActionName::ClickNewPoint,
        ActionName::ControlClickElement,
        ActionName::TypeText,
        ActionName::PointElement,
        ActionName::PressControlA,
        ActionName::PressControlC,
        ActionName::PressControlV,
        ActionName::DragMouseHoldDown,
        ActionName::DragMouseMove,
        ActionName::DragMouseRelease,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionName::ClickElement => "click_element",
            ActionName::ClickNewPoint => "click_new_point",
            ActionName::ControlClickElement => "control_click_element",
            ActionName::TypeText => "type_text",
            ActionName::PointElement => "point_element",
            ActionName::PressControlA => "press_control_A",
            ActionName::PressControlC => "press_control_C",
            ActionName::PressControlV => "press_control_V",
            ActionName::DragMouseHoldDown => "drag_mouse_hold_down",
            ActionName::DragMouseMove => "drag_mouse_move",
            ActionName::DragMouseRelease => "drag_mouse_release",
        }
    }

    pub fn parse(s: &str) -> Option<ActionName> {
        ActionName::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl std::fmt::Display for ActionName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully-typed action proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ActionCommand {
    #[serde(rename = "click_element")]
    ClickElement { element_id: u32 },
    #[serde(rename = "click_new_point")]
    ClickNewPoint { x: i32, y: i32 },
    #[serde(rename = "control_click_element")]
    ControlClickElement { element_id: u32 },
    #[serde(rename = "type_text")]
    TypeText { string_to_type: String },
    #[serde(rename = "point_element")]
    PointElement { element_id: u32 },
    #[serde(rename = "press_control_A")]
    PressControlA,
    #[serde(rename = "press_control_C")]
    PressControlC,
    #[serde(rename = "press_control_V")]
    PressControlV,
    #[serde(rename = "drag_mouse_hold_down")]
    DragMouseHoldDown { x: i32, y: i32 },
    #[serde(rename = "drag_mouse_move")]
    DragMouseMove { x: i32, y: i32 },
    #[serde(rename = "drag_mouse_release")]
    DragMouseRelease,
}

impl ActionCommand {
    pub fn name(&self) -> ActionName {
        match self {
            ActionCommand::ClickElement { .. } => ActionName::ClickElement,
            ActionCommand::ClickNewPoint { .. } => ActionName::ClickNewPoint,
            ActionCommand::ControlClickElement { .. } => ActionName::ControlClickElement,
            ActionCommand::TypeText { .. } => ActionName::TypeText,
            ActionCommand::PointElement { .. } => ActionName::PointElement,
            ActionCommand::PressControlA => ActionName::PressControlA,
            ActionCommand::PressControlC => ActionName::PressControlC,
            ActionCommand::PressControlV => ActionName::PressControlV,
            ActionCommand::DragMouseHoldDown { .. } => ActionName::DragMouseHoldDown,
            ActionCommand::DragMouseMove { .. } => ActionName::DragMouseMove,
            ActionCommand::DragMouseRelease => ActionName::DragMouseRelease,
        }
    }

    /// Target element id for element-addressed actions.
    pub fn element_id(&self) -> Option<u32> {
        match self {
            ActionCommand::ClickElement { element_id }
            | ActionCommand::ControlClickElement { element_id }
            | ActionCommand::PointElement { element_id } => Some(*element_id),
            _ => None,
        }
    }

    /// Literal screen point for point-addressed actions.
    pub fn point(&self) -> Option<(i32, i32)> {
        match self {
            ActionCommand::ClickNewPoint { x, y }
            | ActionCommand::DragMouseHoldDown { x, y }
            | ActionCommand::DragMouseMove { x, y } => Some((*x, *y)),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Schema table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Integer,
    Str,
}

impl ParamKind {
    fn as_str(self) -> &'static str {
        match self {
            ParamKind::Integer => "integer",
            ParamKind::Str => "string",
        }
    }
}

pub struct ParamDescriptor {
    pub name: &'static str,
    pub kind: ParamKind,
    pub description: &'static str,
}

pub struct ActionDescriptor {
    pub name: ActionName,
    pub description: &'static str,
    pub params: &'static [ParamDescriptor],
}

const ELEMENT_ID_PARAM: ParamDescriptor = ParamDescriptor {
    name: "element_id",
    kind: ParamKind::Integer,
    description: "The id number (ranged from 1 to N) of the screen element to act on. A list of elements will be provided with the corresponding id numbers.",
};

const X_PARAM: ParamDescriptor = ParamDescriptor {
    name: "x",
    kind: ParamKind::Integer,
    description: "The x coordinate of the click location.",
};

const Y_PARAM: ParamDescriptor = ParamDescriptor {
    name: "y",
    kind: ParamKind::Integer,
    description: "The y coordinate of the click location.",
};

const STRING_TO_TYPE_PARAM: ParamDescriptor = ParamDescriptor {
    name: "string_to_type",
    kind: ParamKind::Str,
    description: "The text to type",
};

/// Per-action descriptions and parameters, as conveyed to the language model.
pub const ACTION_DESCRIPTORS: [ActionDescriptor; 11] = [
    ActionDescriptor {
        name: ActionName::ClickElement,
        description: "This action moves the mouse pointer to a screen element and performs a left-click to activate that element.",
        params: &[ELEMENT_ID_PARAM],
    },
    ActionDescriptor {
        name: ActionName::ClickNewPoint,
        description: "This action moves the mouse pointer to a screen location and performs a left-click on the location.",
        params: &[X_PARAM, Y_PARAM],
    },
    ActionDescriptor {
        name: ActionName::ControlClickElement,
        description: "This action click on a screen element while holding down the 'control' modifier key. It is used to select multiple elements.",
        params: &[ELEMENT_ID_PARAM],
    },
    ActionDescriptor {
        name: ActionName::TypeText,
        description: "This action makes keyboard typing actions to enter the text, for example, into the 'input_field'-type screen element. Before typing the text, the element on which enter the text must be focused.",
        params: &[STRING_TO_TYPE_PARAM],
    },
    ActionDescriptor {
        name: ActionName::PointElement,
        description: "This action moves the mouse pointer to on top of an UI element without clicking it. This sometimes activates the element and reveals hidden menus or scrollbar.",
        params: &[ELEMENT_ID_PARAM],
    },
    ActionDescriptor {
        name: ActionName::PressControlA,
        description: "This is 'Select All'. All text in the activated text field is highlighted.",
        params: &[],
    },
    ActionDescriptor {
        name: ActionName::PressControlC,
        description: "This is 'Copy'. Highlighted text is copied to the clipboard.",
        params: &[],
    },
    ActionDescriptor {
        name: ActionName::PressControlV,
        description: "This is 'Paste'. Text stored in the clipboard is pasted into the selected area.",
        params: &[],
    },
    ActionDescriptor {
        name: ActionName::DragMouseHoldDown,
        description: "This action initiates the drag action sequence by clicking and holding down the left mouse button. It is used to move objects on the screenor to highlight a block of text. This action marks the starting point of the dragging move.",
        params: &[X_PARAM, Y_PARAM],
    },
    ActionDescriptor {
        name: ActionName::DragMouseMove,
        description: "This action is the middle of the drag action sequence. It moves the mouse pointer while holding down the left mouse button. When used to move an object on the screen, the object will be dragged to the current mouse location. When used to highlight text, it will highlight up to the current mouse location.",
        params: &[X_PARAM, Y_PARAM],
    },
    ActionDescriptor {
        name: ActionName::DragMouseRelease,
        description: "This action marks the end of the drag action sequence. It releases the left mouse button, indicating that the drag move is finished. starting point of the dragging move.",
        params: &[],
    },
];

pub fn descriptor_for(name: ActionName) -> &'static ActionDescriptor {
    ACTION_DESCRIPTORS.iter().find(|d| d.name == name).expect("descriptor table is total")
}

// ---------------------------------------------------------------------------
// Function-calling schemas
// ---------------------------------------------------------------------------

/// One tool definition in the chat-completions function-calling layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: ParameterObject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterObject {
    #[serde(rename = "type")]
    pub kind: String,
    pub properties: BTreeMap<String, ParameterSchema>,
    pub required: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSchema {
    #[serde(rename = "type")]
    pub kind: String,
    pub description: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown action name `{0}`")]
    UnknownAction(String),
}

/// Tool definitions for the allowed subset of action names, in canonical
/// order. Duplicates in `allowed` are collapsed; an empty set yields an
/// empty list.
pub fn function_schemas<S: AsRef<str>>(allowed: &[S]) -> Result<Vec<ToolSchema>, SchemaError> {
    let mut wanted = Vec::new();
    for s in allowed {
        let name = ActionName::parse(s.as_ref())
            .ok_or_else(|| SchemaError::UnknownAction(s.as_ref().to_string()))?;
        if !wanted.contains(&name) {
            wanted.push(name);
        }
    }
    Ok(ACTION_DESCRIPTORS
        .iter()
        .filter(|d| wanted.contains(&d.name))
        .map(|d| ToolSchema {
            name: d.name.as_str().to_string(),
            description: d.description.to_string(),
            parameters: ParameterObject {
                kind: "object".to_string(),
                properties: d
                    .params
                    .iter()
                    .map(|p| {
                        (
                            p.name.to_string(),
                            ParameterSchema {
                                kind: p.kind.as_str().to_string(),
                                description: p.description.to_string(),
                            },
                        )
                    })
                    .collect(),
                required: d.params.iter().map(|p| p.name.to_string()).collect(),
            },
        })
        .collect())
}

/// Schemas for the full vocabulary.
pub fn all_function_schemas() -> Vec<ToolSchema> {
    function_schemas(&ActionName::ALL.map(ActionName::as_str)).expect("all names are known")
}

// ---------------------------------------------------------------------------
// Proposal parsing
// ---------------------------------------------------------------------------

/// A structured tool invocation as carried by a chat response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub name: String,
    pub arguments: serde_json::Value,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("response proposes no actions")]
    EmptyProposal,
    #[error("unknown action `{name}` in `{line}`")]
    UnknownAction { name: String, line: String },
    #[error("malformed argument ({reason}) in `{line}`")]
    MalformedArgument { reason: String, line: String },
    #[error("action indices must strictly increase, violated at `{line}`")]
    IndexDisorder { line: String },
}

fn action_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*Action_(\d+)\s*=\s*\(Action:\s*functions\.([A-Za-z_][A-Za-z0-9_]*)\s*,\s*Argument:\s*\{(.*)\}\s*\)\s*$",
        )
        .expect("static regex compiles")
    })
}

/// Parse a free-text response. Lines matching the action grammar are
/// interpreted; everything else is ignored as prose.
pub fn parse_action_text(text: &str) -> Result<Vec<ActionCommand>, ParseError> {
    let re = action_line_regex();
    let mut commands = Vec::new();
    let mut last_index: Option<u64> = None;
    for line in text.lines() {
        let Some(caps) = re.captures(line) else { continue };
        let index: u64 = caps[1].parse().map_err(|_| ParseError::MalformedArgument {
            reason: "action index out of range".to_string(),
            line: line.to_string(),
        })?;
        if let Some(prev) = last_index {
            if index <= prev {
                return Err(ParseError::IndexDisorder { line: line.to_string() });
            }
        }
        last_index = Some(index);
        let name = ActionName::parse(&caps[2]).ok_or_else(|| ParseError::UnknownAction {
            name: caps[2].to_string(),
            line: line.to_string(),
        })?;
        let props = parse_props(&caps[3], line)?;
        commands.push(build_command(name, props, line)?);
    }
    if commands.is_empty() {
        return Err(ParseError::EmptyProposal);
    }
    Ok(commands)
}

/// Parse structured tool calls into commands, in call order.
pub fn parse_tool_calls(calls: &[ToolInvocation]) -> Result<Vec<ActionCommand>, ParseError> {
    if calls.is_empty() {
        return Err(ParseError::EmptyProposal);
    }
    calls
        .iter()
        .map(|call| {
            let line = serde_json::to_string(call).unwrap_or_else(|_| call.name.clone());
            let name =
                ActionName::parse(&call.name).ok_or_else(|| ParseError::UnknownAction {
                    name: call.name.clone(),
                    line: line.clone(),
                })?;
            let obj = match &call.arguments {
                serde_json::Value::Object(map) => map.clone(),
                serde_json::Value::Null => serde_json::Map::new(),
                other => {
                    return Err(ParseError::MalformedArgument {
                        reason: format!("arguments must be an object, got {other}"),
                        line,
                    })
                }
            };
            let props = obj
                .into_iter()
                .map(|(k, v)| {
                    let raw = match v {
                        serde_json::Value::String(s) => PropValue::Quoted(s),
                        other => PropValue::Raw(other.to_string()),
                    };
                    (k, raw)
                })
                .collect();
            build_command(name, props, &line)
        })
        .collect()
}

/// Parse a chat response: structured tool calls when present, otherwise the
/// text body.
pub fn parse_llm_actions(
    text: Option<&str>,
    tool_calls: Option<&[ToolInvocation]>,
) -> Result<Vec<ActionCommand>, ParseError> {
    match tool_calls {
        Some(calls) if !calls.is_empty() => parse_tool_calls(calls),
        _ => parse_action_text(text.unwrap_or("")),
    }
}

#[derive(Debug, Clone)]
enum PropValue {
    /// Value that appeared inside double quotes.
    Quoted(String),
    /// Bare token (trimmed).
    Raw(String),
}

/// Split `key: value` pairs on top-level commas, honoring double quotes.
/// Values may be quoted or bare; surrounding whitespace is insignificant.
fn parse_props(body: &str, line: &str) -> Result<Vec<(String, PropValue)>, ParseError> {
    let malformed = |reason: &str| ParseError::MalformedArgument {
        reason: reason.to_string(),
        line: line.to_string(),
    };
    let mut props = Vec::new();
    let mut chars = body.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        for c in chars.by_ref() {
            if c == ':' {
                break;
            }
            key.push(c);
        }
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(malformed("empty property name"));
        }
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        let value = if chars.peek() == Some(&'"') {
            chars.next();
            let mut v = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(c) => v.push(c),
                    None => return Err(malformed("unterminated string value")),
                }
            }
            // Skip to the separating comma (or end).
            loop {
                match chars.peek() {
                    Some(c) if c.is_whitespace() => {
                        chars.next();
                    }
                    Some(',') => {
                        chars.next();
                        break;
                    }
                    None => break,
                    Some(_) => return Err(malformed("trailing characters after string value")),
                }
            }
            PropValue::Quoted(v)
        } else {
            let mut v = String::new();
            loop {
                match chars.peek() {
                    Some(',') => {
                        chars.next();
                        break;
                    }
                    None => break,
                    Some(_) => v.push(chars.next().unwrap()),
                }
            }
            let v = v.trim().to_string();
            if v.is_empty() {
                return Err(malformed(&format!("missing value for `{key}`")));
            }
            PropValue::Raw(v)
        };
        props.push((key, value));
    }
    Ok(props)
}

fn build_command(
    name: ActionName,
    props: Vec<(String, PropValue)>,
    line: &str,
) -> Result<ActionCommand, ParseError> {
    let malformed = |reason: String| ParseError::MalformedArgument { reason, line: line.to_string() };
    let descriptor = descriptor_for(name);
    let mut bag: Vec<(String, PropValue)> = props;

    let mut take = |pname: &str| -> Option<PropValue> {
        let pos = bag.iter().position(|(k, _)| k == pname)?;
        Some(bag.remove(pos).1)
    };

    let mut ints: Vec<i64> = Vec::new();
    let mut strings: Vec<String> = Vec::new();
    for param in descriptor.params {
        let value = take(param.name)
            .ok_or_else(|| malformed(format!("missing required parameter `{}`", param.name)))?;
        match param.kind {
            ParamKind::Integer => {
                let text = match &value {
                    PropValue::Quoted(s) | PropValue::Raw(s) => s.trim(),
                };
                let n: i64 = text
                    .parse()
                    .map_err(|_| malformed(format!("parameter `{}` must be an integer", param.name)))?;
                ints.push(n);
            }
            ParamKind::Str => {
                let s = match value {
                    PropValue::Quoted(s) | PropValue::Raw(s) => s,
                };
                strings.push(s);
            }
        }
    }
    if let Some((extra, _)) = bag.first() {
        return Err(malformed(format!("unexpected parameter `{extra}`")));
    }

    let element_id = |ints: &[i64]| -> Result<u32, ParseError> {
        let id = ints[0];
        if id < 1 || id > u32::MAX as i64 {
            return Err(malformed(format!("element_id must be a positive integer, got {id}")));
        }
        Ok(id as u32)
    };
    let coord = |n: i64| -> Result<i32, ParseError> {
        i32::try_from(n).map_err(|_| malformed(format!("coordinate {n} out of range")))
    };

    Ok(match name {
        ActionName::ClickElement => ActionCommand::ClickElement { element_id: element_id(&ints)? },
        ActionName::ClickNewPoint => {
            ActionCommand::ClickNewPoint { x: coord(ints[0])?, y: coord(ints[1])? }
        }
        ActionName::ControlClickElement => {
            ActionCommand::ControlClickElement { element_id: element_id(&ints)? }
        }
        ActionName::TypeText => ActionCommand::TypeText { string_to_type: strings.remove(0) },
        ActionName::PointElement => ActionCommand::PointElement { element_id: element_id(&ints)? },
        ActionName::PressControlA => ActionCommand::PressControlA,
        ActionName::PressControlC => ActionCommand::PressControlC,
        ActionName::PressControlV => ActionCommand::PressControlV,
        ActionName::DragMouseHoldDown => {
            ActionCommand::DragMouseHoldDown { x: coord(ints[0])?, y: coord(ints[1])? }
        }
        ActionName::DragMouseMove => {
            ActionCommand::DragMouseMove { x: coord(ints[0])?, y: coord(ints[1])? }
        }
        ActionName::DragMouseRelease => ActionCommand::DragMouseRelease,
    })
}

// ---------------------------------------------------------------------------
// Rendering proposals back to grammar lines
// ---------------------------------------------------------------------------

/// Render one command as the argument body of a grammar line.
fn render_argument(cmd: &ActionCommand) -> String {
    match cmd {
        ActionCommand::ClickElement { element_id }
        | ActionCommand::ControlClickElement { element_id }
        | ActionCommand::PointElement { element_id } => format!("element_id: {element_id}"),
        ActionCommand::ClickNewPoint { x, y }
        | ActionCommand::DragMouseHoldDown { x, y }
        | ActionCommand::DragMouseMove { x, y } => format!("x: {x}, y: {y}"),
        ActionCommand::TypeText { string_to_type } => {
            format!("string_to_type: \"{string_to_type}\"")
        }
        ActionCommand::PressControlA
        | ActionCommand::PressControlC
        | ActionCommand::PressControlV
        | ActionCommand::DragMouseRelease => String::new(),
    }
}

/// Render commands as grammar lines `Action_k=(Action: functions.<name>,
/// Argument: {...})`, numbering from `first_index`.
///
/// `parse_action_text` inverts this exactly for strings that contain neither
/// double quotes nor newlines (the grammar has no escaping).
pub fn render_action_lines(commands: &[ActionCommand], first_index: u32) -> String {
    commands
        .iter()
        .enumerate()
        .map(|(i, cmd)| {
            format!(
                "Action_{}=(Action: functions.{}, Argument: {{{}}})",
                first_index + i as u32,
                cmd.name(),
                render_argument(cmd)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------------------
// Action records and history rendering
// ---------------------------------------------------------------------------

/// Name slot of a history record: the synthetic `start` marker or an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordName {
    Start,
    Action(ActionName),
}

impl RecordName {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordName::Start => "start",
            RecordName::Action(name) => name.as_str(),
        }
    }
}

impl From<RecordName> for String {
    fn from(n: RecordName) -> String {
        n.as_str().to_string()
    }
}

impl TryFrom<String> for RecordName {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "start" {
            return Ok(RecordName::Start);
        }
        ActionName::parse(&s)
            .map(RecordName::Action)
            .ok_or_else(|| format!("unknown action name `{s}`"))
    }
}

impl Serialize for RecordName {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RecordName {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        RecordName::try_from(s).map_err(serde::de::Error::custom)
    }
}

/// Literal (non-element) arguments carried by a history record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LiteralArgs {
    Point { x: i32, y: i32 },
    Text { string_to_type: String },
}

/// One entry of an action history.
///
/// Element-targeted entries store the element's attribute snapshot rather
/// than its id: ids are observation-scoped and shift between steps, while the
/// snapshot stays meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    #[serde(skip)]
    pub index: u32,
    pub name: RecordName,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub element_snapshot: Option<UiElement>,
    #[serde(rename = "args", skip_serializing_if = "Option::is_none", default)]
    pub literal_args: Option<LiteralArgs>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl ActionRecord {
    /// The `start` marker that opens every history.
    pub fn start(reason: Option<&str>) -> Self {
        Self {
            index: 1,
            name: RecordName::Start,
            element_snapshot: None,
            literal_args: None,
            reason: reason.map(str::to_string),
            error: None,
        }
    }

    /// Record for an executed (or attempted) command, capturing the element
    /// snapshot for element-targeted actions and literals otherwise.
    pub fn for_command(index: u32, cmd: &ActionCommand, snapshot: Option<UiElement>) -> Self {
        let literal_args = match cmd {
            ActionCommand::ClickNewPoint { x, y }
            | ActionCommand::DragMouseHoldDown { x, y }
            | ActionCommand::DragMouseMove { x, y } => Some(LiteralArgs::Point { x: *x, y: *y }),
            ActionCommand::TypeText { string_to_type } => {
                Some(LiteralArgs::Text { string_to_type: string_to_type.clone() })
            }
            _ => None,
        };
        Self {
            index,
            name: RecordName::Action(cmd.name()),
            element_snapshot: snapshot,
            literal_args,
            reason: None,
            error: None,
        }
    }

    pub fn with_reason(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }

    pub fn with_error(mut self, error: impl Into<String>) -> Self {
        self.error = Some(error.into());
        self
    }
}

/// Line prefix used when rendering a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryStyle {
    /// `action_k: {...}` — the episode's own history.
    Episode,
    /// `demo_action_k: {...}` — histories embedded in demonstrations.
    Demo,
}

impl HistoryStyle {
    fn prefix(self) -> &'static str {
        match self {
            HistoryStyle::Episode => "action_",
            HistoryStyle::Demo => "demo_action_",
        }
    }
}

/// Render one record as a history line.
pub fn render_record(record: &ActionRecord, style: HistoryStyle, include_reason: bool) -> String {
    let mut parts = vec![format!("name: {}", record.name.as_str())];
    if let Some(el) = &record.element_snapshot {
        parts.push(format!("arg: {}", render_attributes(el, RenderStyle::HistoryArg)));
    } else if let Some(args) = &record.literal_args {
        let body = match args {
            LiteralArgs::Point { x, y } => format!("x: {x}, y: {y}"),
            LiteralArgs::Text { string_to_type } => format!("string_to_type: \"{string_to_type}\""),
        };
        parts.push(format!("arg: {{{body}}}"));
    }
    if include_reason {
        if let Some(reason) = &record.reason {
            parts.push(format!("reason: \"{reason}\""));
        }
    }
    if let Some(error) = &record.error {
        parts.push(format!("error: \"{error}\""));
    }
    format!("{}{}: {{{}}}", style.prefix(), record.index, parts.join(", "))
}

/// Render a history, one line per record. The first record is expected to be
/// the `start` marker.
pub fn render_history(records: &[ActionRecord], style: HistoryStyle, include_reasons: bool) -> String {
    debug_assert!(matches!(records.first(), Some(r) if r.name == RecordName::Start));
    records
        .iter()
        .map(|r| render_record(r, style, include_reasons))
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------------------
// Validation against an observation
// ---------------------------------------------------------------------------

/// A command validated against a concrete observation. Element-targeted
/// commands carry the target element's snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedCommand {
    pub command: ActionCommand,
    pub snapshot: Option<UiElement>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidateError {
    #[error("element id {id} is stale: screen has {len} elements")]
    StaleElementId { id: u32, len: usize },
    #[error("point ({x}, {y}) outside {width}x{height} screen")]
    OutOfBoundsPoint { x: i32, y: i32, width: u32, height: u32 },
}

/// Check ids and coordinates against the observation the proposal was made
/// for, attaching the target element snapshot where applicable.
pub fn validate(cmd: &ActionCommand, obs: &Observation) -> Result<CheckedCommand, ValidateError> {
    if let Some(id) = cmd.element_id() {
        let el = obs
            .get(id)
            .ok_or(ValidateError::StaleElementId { id, len: obs.len() })?;
        return Ok(CheckedCommand { command: cmd.clone(), snapshot: Some(el.clone()) });
    }
    if let Some((x, y)) = cmd.point() {
        if x < 0 || y < 0 || x >= obs.width() as i32 || y >= obs.height() as i32 {
            return Err(ValidateError::OutOfBoundsPoint {
                x,
                y,
                width: obs.width(),
                height: obs.height(),
            });
        }
    }
    Ok(CheckedCommand { command: cmd.clone(), snapshot: None })
}
