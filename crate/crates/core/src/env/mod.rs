//! Deterministic seeded widget environment.
//!
//! A [`SimEnv`] holds a small widget tree on a fixed 160x210 screen, accepts
//! the atomic input primitives (mouse move/down/up, key events, modifier
//! chords), and evaluates its task's success/failure predicate after every
//! primitive. `(family, seed)` fully determines the generated screen and its
//! evolution under any primitive sequence; there is no hidden entropy.

mod families;
mod oracle;

pub use oracle::{oracle_for, Oracle};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::fnv1a64;
use crate::ui::{BBox, ElementKind, Observation, ObservationError, Subtype, UiElement};

/// Fixed screen size: tasks never place widgets beyond this area.
pub const SCREEN_WIDTH: u32 = 160;
pub const SCREEN_HEIGHT: u32 = 210;

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

/// Keyboard chords with a dedicated meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chord {
    CtrlA,
    CtrlC,
    CtrlV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyInput {
    Char(char),
    Chord(Chord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modifier {
    Ctrl,
}

/// The atomic input vocabulary every high-level action decomposes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    MouseMove { x: i32, y: i32 },
    MouseDown,
    MouseUp,
    KeyEvent(KeyInput),
    ModifierDown(Modifier),
    ModifierUp(Modifier),
}

/// Whether a primitive had an effect or was dropped as meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveOutcome {
    Applied,
    Ignored(&'static str),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("episode is over; no further input accepted")]
    EpisodeOver,
    #[error("mouse_up with no button held")]
    NoButtonHeld,
    #[error("mouse_down while button already held")]
    ButtonAlreadyHeld,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown task family `{0}`")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Running,
    Success,
    Failure,
}

// ---------------------------------------------------------------------------
// Widgets
// ---------------------------------------------------------------------------

/// One interactive (or decorative) widget of a generated screen.
///
/// The flag fields mirror what the observation will expose: a widget carries
/// `focus_flag`/`highlight_flag`/`checked` only when the corresponding
/// attribute should appear on its rendered element.
#[derive(Debug, Clone, PartialEq)]
pub struct Widget {
    pub kind: ElementKind,
    pub subtype: Option<Subtype>,
    pub bbox: BBox,
    /// Static label, or the dropdown's current display text.
    pub text: Option<String>,
    /// Editable contents of input fields and text areas.
    pub buffer: Option<String>,
    /// Whether the buffer is fully selected (set by select-all).
    pub buffer_selected: bool,
    pub checked: Option<bool>,
    /// Present ⇒ the observation exposes a `focused` attribute.
    pub focus_flag: Option<bool>,
    /// Present ⇒ the observation exposes a `highlighted` attribute.
    pub highlight_flag: Option<bool>,
    pub visible: bool,
    /// Radio-group id for exclusivity.
    pub group: Option<u32>,
    /// Widget moves with the cursor while dragged.
    pub draggable: bool,
    /// For dropdown option rows: index of the owning dropdown.
    pub parent_dropdown: Option<usize>,
    /// Expansion state of a dropdown widget.
    pub expanded: bool,
    /// Character selection of a draggable text: (anchor, current), inclusive.
    pub selection: Option<(usize, usize)>,
}

impl Widget {
    pub fn new(kind: ElementKind, bbox: BBox) -> Self {
        Self {
            kind,
            subtype: None,
            bbox,
            text: None,
            buffer: None,
            buffer_selected: false,
            checked: None,
            focus_flag: None,
            highlight_flag: None,
            visible: true,
            group: None,
            draggable: false,
            parent_dropdown: None,
            expanded: false,
            selection: None,
        }
    }

    pub fn label(text: impl Into<String>, bbox: BBox) -> Self {
        Self { text: Some(text.into()), ..Self::new(ElementKind::Text, bbox) }
    }

    pub fn button(text: impl Into<String>, bbox: BBox) -> Self {
        Self {
            text: Some(text.into()),
            focus_flag: Some(false),
            ..Self::new(ElementKind::Button, bbox)
        }
    }

    pub fn hyperlink(text: impl Into<String>, bbox: BBox) -> Self {
        Self { text: Some(text.into()), ..Self::new(ElementKind::Hyperlink, bbox) }
    }

    pub fn checkbox(text: impl Into<String>, bbox: BBox, checked: bool) -> Self {
        Self {
            text: Some(text.into()),
            checked: Some(checked),
            ..Self::new(ElementKind::Checkbox, bbox)
        }
    }

    pub fn radio(text: impl Into<String>, bbox: BBox, group: u32, checked: bool) -> Self {
        Self {
            text: Some(text.into()),
            checked: Some(checked),
            group: Some(group),
            ..Self::new(ElementKind::Radio, bbox)
        }
    }

    pub fn input_field(bbox: BBox) -> Self {
        Self {
            buffer: Some(String::new()),
            focus_flag: Some(false),
            ..Self::new(ElementKind::InputField, bbox)
        }
    }

    pub fn dropdown(display: impl Into<String>, bbox: BBox) -> Self {
        Self {
            text: Some(display.into()),
            focus_flag: Some(false),
            ..Self::new(ElementKind::Dropdown, bbox)
        }
    }

    /// Option row of a dropdown; hidden until the dropdown expands.
    pub fn option_row(parent: usize, text: impl Into<String>, bbox: BBox, current: bool) -> Self {
        Self {
            text: Some(text.into()),
            highlight_flag: Some(current),
            visible: false,
            parent_dropdown: Some(parent),
            ..Self::new(ElementKind::TabledText, bbox)
        }
    }

    pub fn draggable_text(text: impl Into<String>, bbox: BBox) -> Self {
        Self { text: Some(text.into()), ..Self::new(ElementKind::DraggableText, bbox) }
    }

    pub fn image(bbox: BBox) -> Self {
        Self::new(ElementKind::Image, bbox)
    }

    pub fn shape(subtype: Subtype, bbox: BBox) -> Self {
        Self { subtype: Some(subtype), ..Self::new(ElementKind::Shape, bbox) }
    }

    pub fn draggable(mut self) -> Self {
        self.draggable = true;
        self
    }

    fn editable(&self) -> bool {
        matches!(self.kind, ElementKind::InputField | ElementKind::TextArea)
    }

    fn focused(&self) -> bool {
        self.focus_flag == Some(true)
    }

    /// Character cell under screen x, clamped to the text extent.
    /// Cells split the bbox width evenly using integer math.
    pub fn char_at(&self, x: i32) -> Option<usize> {
        let text = self.text.as_ref()?;
        let len = text.chars().count();
        if len == 0 {
            return None;
        }
        let width = self.bbox.width() as i64;
        let off = (x - self.bbox.left).clamp(0, self.bbox.width() - 1) as i64;
        let idx = (off * len as i64 / width) as usize;
        Some(idx.min(len - 1))
    }

    /// Screen x at the center of character cell `i`.
    pub fn char_center_x(&self, i: usize) -> i32 {
        let len = self.text.as_ref().map_or(1, |t| t.chars().count()).max(1) as i64;
        let width = self.bbox.width() as i64;
        self.bbox.left + ((2 * i as i64 + 1) * width / (2 * len)) as i32
    }

    /// Selected substring, when a selection exists.
    pub fn selected_text(&self) -> Option<String> {
        let (a, b) = self.selection?;
        let text = self.text.as_ref()?;
        let (lo, hi) = (a.min(b), a.max(b));
        Some(text.chars().skip(lo).take(hi - lo + 1).collect())
    }
}

// ---------------------------------------------------------------------------
// Goals
// ---------------------------------------------------------------------------

/// Success/failure predicate data, referencing widgets by index.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Goal {
    /// No predicate; used by sandbox screens.
    Sandbox,
    ClickTest { button: usize },
    ClickButton { target: usize, buttons: Vec<usize> },
    ClickLink { target: usize, links: Vec<usize> },
    ClickCheckboxes { required: Vec<usize>, boxes: Vec<usize>, submit: usize },
    ClickDialog { close: usize },
    ChooseList { dropdown: usize, target_text: String, submit: usize },
    EnterText { field: usize, target: String, submit: usize },
    LoginUser { user_field: usize, pass_field: usize, username: String, password: String, submit: usize },
    DragBox { item: usize, target: usize },
    HighlightText { text_widget: usize, target: String, submit: usize },
    /// Radio-select task shape used by unit tests (not a registered family):
    /// check the target radio, then submit.
    #[cfg(test)]
    SelectRadio { target: usize, radios: Vec<usize>, submit: usize },
}

enum InteractionEvent {
    Activated(usize),
    DragReleased(usize),
}

enum DragState {
    /// Button went down on a draggable widget.
    MoveWidget { widget: usize, grab_dx: i32, grab_dy: i32 },
    /// Button went down on a draggable text; anchor character index.
    SelectText { widget: usize, anchor: usize },
    /// Button went down elsewhere; remembers what was pressed for click
    /// detection on release.
    Inert { pressed: Option<usize> },
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

pub struct SimEnv {
    family: String,
    seed: u64,
    utterance: String,
    widgets: Vec<Widget>,
    goal: Goal,
    mouse: (i32, i32),
    button_held: bool,
    drag: Option<DragState>,
    ctrl_held: bool,
    clipboard: String,
    status: TaskStatus,
}

impl SimEnv {
    /// Registered task families.
    pub fn families() -> &'static [&'static str] {
        &families::FAMILIES
    }

    /// Deterministically generate the task instance for `(family, seed)`.
    pub fn reset(family: &str, seed: u64) -> Result<Self, EnvError> {
        let mix = fnv1a64(family.as_bytes()) ^ seed;
        let (utterance, widgets, goal) = families::generate(family, mix)
            .ok_or_else(|| EnvError::UnknownFamily(family.to_string()))?;
        Ok(Self::assemble(family.to_string(), seed, utterance, widgets, goal))
    }

    /// Screen with no task predicate, for tests, fixtures, and dataset work.
    pub fn sandbox(widgets: Vec<Widget>) -> Self {
        Self::assemble("sandbox".to_string(), 0, String::new(), widgets, Goal::Sandbox)
    }

    #[cfg(test)]
    pub(crate) fn with_goal(widgets: Vec<Widget>, utterance: String, goal: Goal) -> Self {
        Self::assemble("sandbox".to_string(), 0, utterance, widgets, goal)
    }

    fn assemble(
        family: String,
        seed: u64,
        utterance: String,
        widgets: Vec<Widget>,
        goal: Goal,
    ) -> Self {
        Self {
            family,
            seed,
            utterance,
            widgets,
            goal,
            mouse: (0, 0),
            button_held: false,
            drag: None,
            ctrl_held: false,
            clipboard: String::new(),
            status: TaskStatus::Running,
        }
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn utterance(&self) -> &str {
        &self.utterance
    }

    pub fn status(&self) -> TaskStatus {
        self.status
    }

    pub fn mouse_held(&self) -> bool {
        self.button_held
    }

    pub fn clipboard(&self) -> &str {
        &self.clipboard
    }

    pub(crate) fn widgets(&self) -> &[Widget] {
        &self.widgets
    }

    // -- visibility ---------------------------------------------------------

    /// Natively visible and not occluded by an expanded dropdown's rows.
    fn effectively_visible(&self, idx: usize) -> bool {
        let w = &self.widgets[idx];
        if !w.visible {
            return false;
        }
        // Visible option rows sit on top of everything except their dropdown
        // and sibling rows; whatever they overlap is occluded.
        if w.parent_dropdown.is_none() && w.kind != ElementKind::Dropdown {
            for other in &self.widgets {
                if other.parent_dropdown.is_some()
                    && other.visible
                    && other.bbox.intersects(&w.bbox)
                {
                    return false;
                }
            }
        }
        true
    }

    /// Indices of effectively visible widgets in observation order
    /// (top-to-bottom, left-to-right, then creation order).
    fn visible_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> =
            (0..self.widgets.len()).filter(|&i| self.effectively_visible(i)).collect();
        order.sort_by_key(|&i| (self.widgets[i].bbox.top, self.widgets[i].bbox.left, i));
        order
    }

    /// Snapshot indices in observation order (dataset rendering shares this).
    pub(crate) fn visible_widget_indices(&self) -> Vec<usize> {
        self.visible_order()
    }

    /// Element id (1-based snapshot position) of a widget, when visible.
    pub(crate) fn element_id_of(&self, widget_idx: usize) -> Option<u32> {
        self.visible_order().iter().position(|&i| i == widget_idx).map(|p| p as u32 + 1)
    }

    /// Later-created widgets sit on top.
    fn topmost_at(&self, x: i32, y: i32) -> Option<usize> {
        (0..self.widgets.len())
            .rev()
            .find(|&i| self.effectively_visible(i) && self.widgets[i].bbox.contains(x, y))
    }

    // -- observation --------------------------------------------------------

    pub fn try_snapshot(&self) -> Result<Observation, ObservationError> {
        let elements = self
            .visible_order()
            .into_iter()
            .map(|i| {
                let w = &self.widgets[i];
                let mut el = UiElement::new(w.kind, w.bbox);
                el.subtype = w.subtype;
                el.checked = w.checked;
                el.focused = w.focus_flag;
                el.highlighted = w.highlight_flag;
                el.text = match (&w.buffer, &w.text) {
                    (Some(buffer), _) if w.kind.text_applicable() => Some(buffer.clone()),
                    (_, Some(text)) if w.kind.text_applicable() => Some(text.clone()),
                    _ => None,
                };
                el
            })
            .collect();
        Observation::new(elements, SCREEN_WIDTH, SCREEN_HEIGHT)
    }

    /// Ground-truth observation of the current screen.
    pub fn snapshot(&self) -> Observation {
        self.try_snapshot().expect("generated screens always satisfy element invariants")
    }

    /// JSON fixture of this instance — `(family, seed, utterance,
    /// observation)` — for diffing task generation across implementations.
    pub fn fixture_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family,
            "seed": self.seed,
            "utterance": self.utterance,
            "observation": self.snapshot(),
        })
    }

    // -- primitives ---------------------------------------------------------

    pub fn apply_primitive(&mut self, p: Primitive) -> Result<PrimitiveOutcome, PrimitiveError> {
        if self.status != TaskStatus::Running {
            return Err(PrimitiveError::EpisodeOver);
        }
        let outcome = match p {
            Primitive::MouseMove { x, y } => self.mouse_move(x, y),
            Primitive::MouseDown => self.mouse_down()?,
            Primitive::MouseUp => self.mouse_up()?,
            Primitive::KeyEvent(key) => self.key_event(key),
            Primitive::ModifierDown(Modifier::Ctrl) => {
                self.ctrl_held = true;
                PrimitiveOutcome::Applied
            }
            Primitive::ModifierUp(Modifier::Ctrl) => {
                self.ctrl_held = false;
                PrimitiveOutcome::Applied
            }
        };
        Ok(outcome)
    }

    fn mouse_move(&mut self, x: i32, y: i32) -> PrimitiveOutcome {
        self.mouse = (x, y);
        if !self.button_held {
            return PrimitiveOutcome::Applied;
        }
        match &self.drag {
            Some(DragState::MoveWidget { widget, grab_dx, grab_dy }) => {
                let (widget, grab_dx, grab_dy) = (*widget, *grab_dx, *grab_dy);
                let w = &mut self.widgets[widget];
                let (bw, bh) = (w.bbox.width(), w.bbox.height());
                let left = (x - grab_dx).clamp(0, SCREEN_WIDTH as i32 - bw);
                let top = (y - grab_dy).clamp(0, SCREEN_HEIGHT as i32 - bh);
                w.bbox = BBox::new(left, left + bw, top, top + bh);
            }
            Some(DragState::SelectText { widget, anchor }) => {
                let (widget, anchor) = (*widget, *anchor);
                if let Some(cur) = self.widgets[widget].char_at(x) {
                    self.widgets[widget].selection = Some((anchor, cur));
                }
            }
            _ => {}
        }
        PrimitiveOutcome::Applied
    }

    fn mouse_down(&mut self) -> Result<PrimitiveOutcome, PrimitiveError> {
        if self.button_held {
            return Err(PrimitiveError::ButtonAlreadyHeld);
        }
        self.button_held = true;
        let (x, y) = self.mouse;
        let hit = self.topmost_at(x, y);
        self.drag = Some(match hit {
            Some(i) if self.widgets[i].draggable => DragState::MoveWidget {
                widget: i,
                grab_dx: x - self.widgets[i].bbox.left,
                grab_dy: y - self.widgets[i].bbox.top,
            },
            Some(i) if self.widgets[i].kind == ElementKind::DraggableText => {
                match self.widgets[i].char_at(x) {
                    Some(anchor) => {
                        self.widgets[i].selection = Some((anchor, anchor));
                        DragState::SelectText { widget: i, anchor }
                    }
                    None => DragState::Inert { pressed: hit },
                }
            }
            _ => DragState::Inert { pressed: hit },
        });
        Ok(PrimitiveOutcome::Applied)
    }

    fn mouse_up(&mut self) -> Result<PrimitiveOutcome, PrimitiveError> {
        if !self.button_held {
            return Err(PrimitiveError::NoButtonHeld);
        }
        self.button_held = false;
        let drag = self.drag.take();
        let (x, y) = self.mouse;
        let event = match drag {
            Some(DragState::MoveWidget { widget, .. }) => Some(InteractionEvent::DragReleased(widget)),
            Some(DragState::SelectText { .. }) => None,
            Some(DragState::Inert { pressed }) => {
                let released_on = self.topmost_at(x, y);
                match (pressed, released_on) {
                    (Some(a), Some(b)) if a == b => {
                        self.activate(a);
                        Some(InteractionEvent::Activated(a))
                    }
                    _ => None,
                }
            }
            None => None,
        };
        if let Some(event) = event {
            self.update_status(&event);
        }
        Ok(PrimitiveOutcome::Applied)
    }

    /// Click semantics of the activated widget.
    fn activate(&mut self, idx: usize) {
        match self.widgets[idx].kind {
            ElementKind::Checkbox => {
                let c = self.widgets[idx].checked.unwrap_or(false);
                self.widgets[idx].checked = Some(!c);
                self.blur_all();
            }
            ElementKind::Radio => {
                let group = self.widgets[idx].group;
                for (i, w) in self.widgets.iter_mut().enumerate() {
                    if w.kind == ElementKind::Radio && w.group == group {
                        w.checked = Some(i == idx);
                    }
                }
                self.blur_all();
            }
            ElementKind::Dropdown => {
                let expand = !self.widgets[idx].expanded;
                self.set_dropdown_expanded(idx, expand);
                self.blur_all();
            }
            ElementKind::TabledText => {
                if let Some(parent) = self.widgets[idx].parent_dropdown {
                    let chosen = self.widgets[idx].text.clone();
                    self.widgets[parent].text = chosen.clone();
                    for w in self.widgets.iter_mut() {
                        if w.parent_dropdown == Some(parent) {
                            w.highlight_flag = Some(w.text == chosen);
                        }
                    }
                    self.set_dropdown_expanded(parent, false);
                }
                self.blur_all();
            }
            ElementKind::InputField | ElementKind::TextArea => {
                self.blur_all();
                let w = &mut self.widgets[idx];
                w.focus_flag = Some(true);
                w.buffer_selected = false;
            }
            _ => {
                self.blur_all();
            }
        }
    }

    fn blur_all(&mut self) {
        for w in self.widgets.iter_mut() {
            if w.editable() && w.focus_flag == Some(true) {
                w.focus_flag = Some(false);
            }
        }
    }

    fn set_dropdown_expanded(&mut self, dropdown: usize, expanded: bool) {
        self.widgets[dropdown].expanded = expanded;
        for w in self.widgets.iter_mut() {
            if w.parent_dropdown == Some(dropdown) {
                w.visible = expanded;
            }
        }
    }

    fn focused_editable(&self) -> Option<usize> {
        (0..self.widgets.len())
            .find(|&i| self.widgets[i].editable() && self.widgets[i].focused())
    }

    fn key_event(&mut self, key: KeyInput) -> PrimitiveOutcome {
        let chord = match key {
            KeyInput::Chord(c) => Some(c),
            KeyInput::Char(c) if self.ctrl_held => match c.to_ascii_lowercase() {
                'a' => Some(Chord::CtrlA),
                'c' => Some(Chord::CtrlC),
                'v' => Some(Chord::CtrlV),
                _ => return PrimitiveOutcome::Ignored("unsupported control chord"),
            },
            KeyInput::Char(_) => None,
        };
        match chord {
            Some(Chord::CtrlA) => match self.focused_editable() {
                Some(i) => {
                    self.widgets[i].buffer_selected = true;
                    PrimitiveOutcome::Applied
                }
                None => PrimitiveOutcome::Ignored("select-all with no focused editable widget"),
            },
            Some(Chord::CtrlC) => match self.focused_editable() {
                Some(i) if self.widgets[i].buffer_selected => {
                    self.clipboard = self.widgets[i].buffer.clone().unwrap_or_default();
                    PrimitiveOutcome::Applied
                }
                _ => PrimitiveOutcome::Ignored("copy with no selection"),
            },
            Some(Chord::CtrlV) => match self.focused_editable() {
                Some(i) => {
                    let clip = self.clipboard.clone();
                    let w = &mut self.widgets[i];
                    let buffer = w.buffer.get_or_insert_with(String::new);
                    if w.buffer_selected {
                        buffer.clear();
                        w.buffer_selected = false;
                    }
                    buffer.push_str(&clip);
                    PrimitiveOutcome::Applied
                }
                None => PrimitiveOutcome::Ignored("paste with no focused editable widget"),
            },
            None => {
                let KeyInput::Char(c) = key else { unreachable!() };
                match self.focused_editable() {
                    Some(i) => {
                        let w = &mut self.widgets[i];
                        let buffer = w.buffer.get_or_insert_with(String::new);
                        if w.buffer_selected {
                            buffer.clear();
                            w.buffer_selected = false;
                        }
                        buffer.push(c);
                        PrimitiveOutcome::Applied
                    }
                    None => PrimitiveOutcome::Ignored("key event with no focused editable widget"),
                }
            }
        }
    }

    // -- predicates ---------------------------------------------------------

    fn update_status(&mut self, event: &InteractionEvent) {
        debug_assert_eq!(self.status, TaskStatus::Running);
        let verdict: Option<bool> = match (&self.goal, event) {
            (Goal::Sandbox, _) => None,
            (Goal::ClickTest { button }, InteractionEvent::Activated(i)) => {
                (i == button).then_some(true)
            }
            (Goal::ClickButton { target, buttons }, InteractionEvent::Activated(i)) => {
                if i == target {
                    Some(true)
                } else if buttons.contains(i) {
                    Some(false)
                } else {
                    None
                }
            }
            (Goal::ClickLink { target, links }, InteractionEvent::Activated(i)) => {
                if i == target {
                    Some(true)
                } else if links.contains(i) {
                    Some(false)
                } else {
                    None
                }
            }
            (Goal::ClickCheckboxes { required, boxes, submit }, InteractionEvent::Activated(i)) => {
                (i == submit).then(|| {
                    boxes.iter().all(|&b| {
                        let want = required.contains(&b);
                        self.widgets[b].checked == Some(want)
                    })
                })
            }
            (Goal::ClickDialog { close }, InteractionEvent::Activated(i)) => {
                (i == close).then_some(true)
            }
            (Goal::ChooseList { dropdown, target_text, submit }, InteractionEvent::Activated(i)) => {
                (i == submit).then(|| self.widgets[*dropdown].text.as_deref() == Some(target_text))
            }
            (Goal::EnterText { field, target, submit }, InteractionEvent::Activated(i)) => {
                (i == submit).then(|| self.widgets[*field].buffer.as_deref() == Some(target))
            }
            (
                Goal::LoginUser { user_field, pass_field, username, password, submit },
                InteractionEvent::Activated(i),
            ) => (i == submit).then(|| {
                self.widgets[*user_field].buffer.as_deref() == Some(username)
                    && self.widgets[*pass_field].buffer.as_deref() == Some(password)
            }),
            (Goal::HighlightText { text_widget, target, submit }, InteractionEvent::Activated(i)) => {
                (i == submit).then(|| {
                    self.widgets[*text_widget].selected_text().as_deref() == Some(target)
                })
            }
            #[cfg(test)]
            (Goal::SelectRadio { target, radios, submit }, InteractionEvent::Activated(i)) => {
                (i == submit).then(|| {
                    radios.iter().all(|&r| {
                        let want = r == *target;
                        self.widgets[r].checked == Some(want)
                    })
                })
            }
            (Goal::DragBox { item, target }, InteractionEvent::DragReleased(i)) => {
                (i == item).then(|| {
                    let a = &self.widgets[*item].bbox;
                    let b = &self.widgets[*target].bbox;
                    a.left >= b.left && a.right <= b.right && a.top >= b.top && a.bottom <= b.bottom
                })
            }
            _ => None,
        };
        if let Some(success) = verdict {
            self.status = if success { TaskStatus::Success } else { TaskStatus::Failure };
        }
    }

    /// Re-evaluates whether a `Success` status is justified by the goal
    /// predicate against current widget state. Used by invariant tests.
    #[cfg(test)]
    fn success_predicate_holds(&self) -> bool {
        match &self.goal {
            Goal::ClickCheckboxes { required, boxes, .. } => boxes.iter().all(|&b| {
                let want = required.contains(&b);
                self.widgets[b].checked == Some(want)
            }),
            Goal::EnterText { field, target, .. } => {
                self.widgets[*field].buffer.as_deref() == Some(target)
            }
            Goal::LoginUser { user_field, pass_field, username, password, .. } => {
                self.widgets[*user_field].buffer.as_deref() == Some(username)
                    && self.widgets[*pass_field].buffer.as_deref() == Some(password)
            }
            Goal::ChooseList { dropdown, target_text, .. } => {
                self.widgets[*dropdown].text.as_deref() == Some(target_text)
            }
            Goal::HighlightText { text_widget, target, .. } => {
                self.widgets[*text_widget].selected_text().as_deref() == Some(target)
            }
            Goal::DragBox { item, target } => {
                let a = &self.widgets[*item].bbox;
                let b = &self.widgets[*target].bbox;
                a.left >= b.left && a.right <= b.right && a.top >= b.top && a.bottom <= b.bottom
            }
            // Click goals are justified by the click event itself.
            _ => true,
        }
    }
}
