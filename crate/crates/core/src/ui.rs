//! Typed screen model and its canonical textual rendering.
//!
//! A screen is an ordered list of [`UiElement`]s wrapped in an
//! [`Observation`]. Elements are numbered 1..N in list order and rendered one
//! per line in a fixed attribute order; the exact bytes matter because the
//! language model is prompted with them and golden tests pin them. (The
//! misspelling "bottm_edge_y" in the coordinate note is deliberate — it is
//! part of the pinned prompt text.)

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng::fnv1a64;

/// Note line emitted ahead of element lists explaining the coordinate form.
pub const COORDINATE_NOTE: &str = "(Note: Coordinates are given in the form: center_x [left_edge_x-right_edge_x], center_y [top_edge_y-bottm_edge_y])";

/// Literal rendering of an observation with no elements.
pub const EMPTY_SCREEN: &str = "Empty Screen";

// ---------------------------------------------------------------------------
// Element kinds and attribute applicability
// ---------------------------------------------------------------------------

/// The fifteen element kinds the agent can perceive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Text,
    Hyperlink,
    Button,
    Radio,
    Checkbox,
    Dropdown,
    InputField,
    TextArea,
    ResizeHandle,
    Scrollbar,
    TabledText,
    DraggableText,
    Shape,
    Icon,
    Image,
}

impl ElementKind {
    pub const ALL: [ElementKind; 15] = [
        ElementKind::Text,
        ElementKind::Hyperlink,
        ElementKind::Button,
        ElementKind::Radio,
        ElementKind::Checkbox,
        ElementKind::Dropdown,
        ElementKind::InputField,
        ElementKind::TextArea,
        ElementKind::ResizeHandle,
        ElementKind::Scrollbar,
        ElementKind::TabledText,
        ElementKind::DraggableText,
        ElementKind::Shape,
        ElementKind::Icon,
        ElementKind::Image,
    ];

    /// Name used in the `type:` field of rendered elements.
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Text => "text",
            ElementKind::Hyperlink => "hyperlink",
            ElementKind::Button => "button",
            ElementKind::Radio => "radio",
            ElementKind::Checkbox => "checkbox",
            ElementKind::Dropdown => "dropdown",
            ElementKind::InputField => "input_field",
            ElementKind::TextArea => "text_area",
            ElementKind::ResizeHandle => "resize_handle",
            ElementKind::Scrollbar => "scrollbar",
            ElementKind::TabledText => "tabled_text",
            ElementKind::DraggableText => "draggable_text",
            ElementKind::Shape => "shape",
            ElementKind::Icon => "icon",
            ElementKind::Image => "image",
        }
    }

    /// Whether the checked/focused/highlighted flags may appear on this kind.
    pub fn flags_applicable(self) -> bool {
        matches!(
            self,
            ElementKind::Text
                | ElementKind::Hyperlink
                | ElementKind::Button
                | ElementKind::Radio
                | ElementKind::Checkbox
                | ElementKind::Dropdown
                | ElementKind::InputField
                | ElementKind::TextArea
                | ElementKind::TabledText
                | ElementKind::Icon
        )
    }

    /// Whether a text attribute may appear on this kind.
    pub fn text_applicable(self) -> bool {
        matches!(
            self,
            ElementKind::Text
                | ElementKind::Hyperlink
                | ElementKind::Button
                | ElementKind::Radio
                | ElementKind::Checkbox
                | ElementKind::Dropdown
                | ElementKind::InputField
                | ElementKind::TabledText
                | ElementKind::DraggableText
        )
    }

    /// Whether a subtype is required (shapes and icons) — forbidden elsewhere.
    pub fn subtype_required(self) -> bool {
        matches!(self, ElementKind::Shape | ElementKind::Icon)
    }
}

/// Shape subtypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Circle,
    Triangle,
    Rectangle,
}

/// Icon subtypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IconKind {
    Back,
    Delete,
    Important,
    Forward,
    Reply,
    Search,
    Send,
}

/// Subtype carried by shape and icon elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subtype {
    Shape(ShapeKind),
    Icon(IconKind),
}

impl Subtype {
    pub fn as_str(self) -> &'static str {
        match self {
            Subtype::Shape(ShapeKind::Circle) => "circle",
            Subtype::Shape(ShapeKind::Triangle) => "triangle",
            Subtype::Shape(ShapeKind::Rectangle) => "rectangle",
            Subtype::Icon(IconKind::Back) => "back",
            Subtype::Icon(IconKind::Delete) => "delete",
            Subtype::Icon(IconKind::Important) => "important",
            Subtype::Icon(IconKind::Forward) => "forward",
            Subtype::Icon(IconKind::Reply) => "reply",
            Subtype::Icon(IconKind::Search) => "search",
            Subtype::Icon(IconKind::Send) => "send",
        }
    }

    pub fn parse(s: &str) -> Option<Subtype> {
        Some(match s {
            "circle" => Subtype::Shape(ShapeKind::Circle),
            "triangle" => Subtype::Shape(ShapeKind::Triangle),
            "rectangle" => Subtype::Shape(ShapeKind::Rectangle),
            "back" => Subtype::Icon(IconKind::Back),
            "delete" => Subtype::Icon(IconKind::Delete),
            "important" => Subtype::Icon(IconKind::Important),
            "forward" => Subtype::Icon(IconKind::Forward),
            "reply" => Subtype::Icon(IconKind::Reply),
            "search" => Subtype::Icon(IconKind::Search),
            "send" => Subtype::Icon(IconKind::Send),
            _ => return None,
        })
    }

    fn matches_kind(self, kind: ElementKind) -> bool {
        matches!(
            (self, kind),
            (Subtype::Shape(_), ElementKind::Shape) | (Subtype::Icon(_), ElementKind::Icon)
        )
    }
}

impl Serialize for Subtype {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Subtype {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Subtype::parse(&s).ok_or_else(|| D::Error::custom(format!("unknown subtype `{s}`")))
    }
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Axis-aligned pixel box given by its edges. Valid boxes have
/// `left < right` and `top < bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub left: i32,
    pub right: i32,
    pub top: i32,
    pub bottom: i32,
}

impl BBox {
    pub fn new(left: i32, right: i32, top: i32, bottom: i32) -> Self {
        Self { left, right, top, bottom }
    }

    pub fn center_x(&self) -> i32 {
        center(self.left, self.right)
    }

    pub fn center_y(&self) -> i32 {
        center(self.top, self.bottom)
    }

    pub fn width(&self) -> i32 {
        self.right - self.left
    }

    pub fn height(&self) -> i32 {
        self.bottom - self.top
    }

    /// Whether the point lies inside (right/bottom edges exclusive).
    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.left && x < self.right && y >= self.top && y < self.bottom
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.left < other.right
            && other.left < self.right
            && self.top < other.bottom
            && other.top < self.bottom
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.left, self.right, self.top, self.bottom].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [left, right, top, bottom] = <[i32; 4]>::deserialize(deserializer)?;
        Ok(BBox { left, right, top, bottom })
    }
}

/// Midpoint of an edge pair, rounded half-to-even.
///
/// This is the rounding rule implied by every published center/edge pair:
/// 76.5 renders as 76 while 65.5 renders as 66.
pub fn center(lo: i32, hi: i32) -> i32 {
    let sum = lo + hi;
    let half = sum.div_euclid(2);
    if sum.rem_euclid(2) == 0 || half % 2 == 0 {
        half
    } else {
        half + 1
    }
}

// ---------------------------------------------------------------------------
// Elements
// ---------------------------------------------------------------------------

/// One perceived screen element.
///
/// The optional flags and text are *present* only where applicable for the
/// kind, and only when the source (simulator ground truth or a data file)
/// chose to express them; rendering emits exactly the attributes present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiElement {
    pub kind: ElementKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subtype: Option<Subtype>,
    pub bbox: BBox,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub checked: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub focused: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub highlighted: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    pub visible: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElementError {
    #[error("degenerate bbox [{left}-{right}]x[{top}-{bottom}] on {kind} element")]
    DegenerateBBox { kind: &'static str, left: i32, right: i32, top: i32, bottom: i32 },
    #[error("{kind} element must carry a matching subtype")]
    MissingSubtype { kind: &'static str },
    #[error("subtype `{subtype}` not allowed on {kind} element")]
    ForbiddenSubtype { kind: &'static str, subtype: &'static str },
    #[error("attribute `{attribute}` not applicable to {kind} element")]
    InapplicableAttribute { kind: &'static str, attribute: &'static str },
}

impl UiElement {
    /// New element of the given kind with no optional attributes, visible.
    pub fn new(kind: ElementKind, bbox: BBox) -> Self {
        Self {
            kind,
            subtype: None,
            bbox,
            checked: None,
            focused: None,
            highlighted: None,
            text: None,
            visible: true,
        }
    }

    pub fn with_subtype(mut self, subtype: Subtype) -> Self {
        self.subtype = Some(subtype);
        self
    }

    pub fn with_checked(mut self, checked: bool) -> Self {
        self.checked = Some(checked);
        self
    }

    pub fn with_focused(mut self, focused: bool) -> Self {
        self.focused = Some(focused);
        self
    }

    pub fn with_highlighted(mut self, highlighted: bool) -> Self {
        self.highlighted = Some(highlighted);
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_visible(mut self, visible: bool) -> Self {
        self.visible = visible;
        self
    }

    /// Check geometry, subtype pairing, and attribute applicability.
    pub fn validate(&self) -> Result<(), ElementError> {
        let kind = self.kind.as_str();
        if self.bbox.left >= self.bbox.right || self.bbox.top >= self.bbox.bottom {
            return Err(ElementError::DegenerateBBox {
                kind,
                left: self.bbox.left,
                right: self.bbox.right,
                top: self.bbox.top,
                bottom: self.bbox.bottom,
            });
        }
        match self.subtype {
            Some(st) if !st.matches_kind(self.kind) => {
                return Err(ElementError::ForbiddenSubtype { kind, subtype: st.as_str() })
            }
            None if self.kind.subtype_required() => {
                return Err(ElementError::MissingSubtype { kind })
            }
            _ => {}
        }
        if !self.kind.flags_applicable() {
            for (attribute, present) in [
                ("checked", self.checked.is_some()),
                ("focused", self.focused.is_some()),
                ("highlighted", self.highlighted.is_some()),
            ] {
                if present {
                    return Err(ElementError::InapplicableAttribute { kind, attribute });
                }
            }
        }
        if self.text.is_some() && !self.kind.text_applicable() {
            return Err(ElementError::InapplicableAttribute { kind, attribute: "text" });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Which surface an element line is rendered for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    /// `- ID: element_k, data: {...}` without the `visible` attribute.
    CurrentScreen,
    /// `demo_element_k: {...}` including the `visible` attribute.
    DemoState,
    /// Bare `{...}` without id or `visible`, for action-history arguments.
    HistoryArg,
}

fn bool_text(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// The brace-enclosed attribute list of one element, in fixed order:
/// type, X, Y, subtype, checked, text, focused, highlighted, visible.
pub fn render_attributes(el: &UiElement, style: RenderStyle) -> String {
    let mut parts = vec![
        format!("type: {}", el.kind.as_str()),
        format!("X: {} [{}-{}]", el.bbox.center_x(), el.bbox.left, el.bbox.right),
        format!("Y: {} [{}-{}]", el.bbox.center_y(), el.bbox.top, el.bbox.bottom),
    ];
    if let Some(st) = el.subtype {
        parts.push(format!("subtype: {}", st.as_str()));
    }
    if let Some(c) = el.checked {
        parts.push(format!("checked: {}", bool_text(c)));
    }
    if let Some(t) = &el.text {
        parts.push(format!("text: \"{t}\""));
    }
    if let Some(f) = el.focused {
        parts.push(format!("focused: {}", bool_text(f)));
    }
    if let Some(h) = el.highlighted {
        parts.push(format!("highlighted: {}", bool_text(h)));
    }
    if style == RenderStyle::DemoState {
        parts.push(format!("visible: {}", bool_text(el.visible)));
    }
    format!("{{{}}}", parts.join(", "))
}

/// One rendered line for an element, shaped per [`RenderStyle`].
pub fn render_element(id: u32, el: &UiElement, style: RenderStyle) -> String {
    let attrs = render_attributes(el, style);
    match style {
        RenderStyle::CurrentScreen => format!("- ID: element_{id}, data: {attrs}"),
        RenderStyle::DemoState => format!("demo_element_{id}: {attrs}"),
        RenderStyle::HistoryArg => attrs,
    }
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// An ordered, digested snapshot of the screen.
///
/// Element ids are their 1-based positions in the list. The digest is the
/// FNV-1a hash of the canonical JSON serialization (ids, every attribute, and
/// the screen dimensions); it is internal plumbing for change detection and
/// never shown to the language model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    elements: Vec<UiElement>,
    width: u32,
    height: u32,
    digest: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ObservationError {
    #[error("element {index} ({kind}) invalid: {source}")]
    InvalidElement {
        index: usize,
        kind: &'static str,
        #[source]
        source: ElementError,
    },
    #[error(
        "element {index} ({kind}) bbox [{left}-{right}]x[{top}-{bottom}] exceeds {width}x{height} screen"
    )]
    OutOfBounds {
        index: usize,
        kind: &'static str,
        left: i32,
        right: i32,
        top: i32,
        bottom: i32,
        width: u32,
        height: u32,
    },
}

impl Observation {
    /// Build an observation, assigning ids 1..N in list order.
    pub fn new(elements: Vec<UiElement>, width: u32, height: u32) -> Result<Self, ObservationError> {
        for (index, el) in elements.iter().enumerate() {
            el.validate().map_err(|source| ObservationError::InvalidElement {
                index: index + 1,
                kind: el.kind.as_str(),
                source,
            })?;
            let b = &el.bbox;
            if b.left < 0 || b.top < 0 || b.right > width as i32 || b.bottom > height as i32 {
                return Err(ObservationError::OutOfBounds {
                    index: index + 1,
                    kind: el.kind.as_str(),
                    left: b.left,
                    right: b.right,
                    top: b.top,
                    bottom: b.bottom,
                    width,
                    height,
                });
            }
        }
        let digest = compute_digest(&elements, width, height);
        Ok(Self { elements, width, height, digest })
    }

    pub fn elements(&self) -> impl Iterator<Item = (u32, &UiElement)> {
        self.elements.iter().enumerate().map(|(i, el)| (i as u32 + 1, el))
    }

    /// Element by 1-based id.
    pub fn get(&self, id: u32) -> Option<&UiElement> {
        if id == 0 {
            return None;
        }
        self.elements.get(id as usize - 1)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

fn compute_digest(elements: &[UiElement], width: u32, height: u32) -> String {
    let canonical = serde_json::to_string(&ObservationRepr::borrowed(elements, width, height))
        .expect("observation serialization cannot fail");
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}

/// Element lines only, one per element in id order (`Empty Screen` when the
/// observation has no elements).
pub fn render_element_lines(obs: &Observation, style: RenderStyle) -> String {
    if obs.is_empty() {
        return EMPTY_SCREEN.to_string();
    }
    obs.elements()
        .map(|(id, el)| render_element(id, el, style))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Coordinate note plus one line per element; `Empty Screen` when empty.
pub fn render_observation(obs: &Observation, style: RenderStyle) -> String {
    if obs.is_empty() {
        return EMPTY_SCREEN.to_string();
    }
    format!("{COORDINATE_NOTE}\n{}", render_element_lines(obs, style))
}

// ---------------------------------------------------------------------------
// JSON wire form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ElementWithId<'a> {
    id: u32,
    #[serde(flatten)]
    element: std::borrow::Cow<'a, UiElement>,
}

#[derive(Serialize, Deserialize)]
struct ObservationRepr<'a> {
    screen_width: u32,
    screen_height: u32,
    elements: Vec<ElementWithId<'a>>,
}

impl<'a> ObservationRepr<'a> {
    fn borrowed(elements: &'a [UiElement], width: u32, height: u32) -> Self {
        Self {
            screen_width: width,
            screen_height: height,
            elements: elements
                .iter()
                .enumerate()
                .map(|(i, el)| ElementWithId { id: i as u32 + 1, element: std::borrow::Cow::Borrowed(el) })
                .collect(),
        }
    }
}

impl Serialize for Observation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ObservationRepr::borrowed(&self.elements, self.width, self.height).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Observation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ObservationRepr::deserialize(deserializer)?;
        for (i, el) in repr.elements.iter().enumerate() {
            if el.id != i as u32 + 1 {
                return Err(D::Error::custom(format!(
                    "element ids must be 1..N in order, found {} at position {}",
                    el.id,
                    i + 1
                )));
            }
        }
        let elements: Vec<UiElement> =
            repr.elements.into_iter().map(|e| e.element.into_owned()).collect();
        Observation::new(elements, repr.screen_width, repr.screen_height)
            .map_err(D::Error::custom)
    }
}
