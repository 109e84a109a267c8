//! Core library of the `gui-agent` workspace.
//!
//! The agent is split along the classic observe / propose / execute axis:
//!
//! - [`ui`] — the typed screen model ([`UiElement`], [`Observation`]) and its
//!   canonical textual rendering handed to the language model.
//! - [`action`] — the closed action vocabulary, function-calling schemas, the
//!   response grammar parser, and action-history rendering.
//! - [`prompt`] — assembly of the task prompt (demonstrations, context,
//!   step-by-step instructions, guidelines) and the rationale-generation
//!   prompt used to annotate demonstrations.
//! - [`gateway`] — chat-completion backends: HTTP (OpenAI-compatible),
//!   scripted, and record/replay for deterministic offline runs.
//! - [`executor`] — the episode loop: observe, propose, execute with
//!   halt-on-change, repeat until terminal.
//! - [`env`] — a deterministic seeded widget environment with ten task
//!   families, atomic input primitives, and ground-truth observation.
//! - [`demo`] — demonstration capture from oracle policies and rationale
//!   augmentation.
//! - [`dataset`] — screen rasterization, masking, and augmentation for
//!   visual-observer training data.
//! - [`eval`] — the evaluation harness producing per-family success-rate
//!   reports.

pub mod action;
pub mod dataset;
pub mod demo;
pub mod env;
pub mod eval;
pub mod executor;
pub mod gateway;
pub mod prompt;
pub mod rng;
pub mod splits;
pub mod ui;

pub use action::{ActionCommand, ActionName, ActionRecord, CheckedCommand, ToolSchema};
pub use demo::{DemoStore, Demonstration};
pub use env::{Primitive, SimEnv, TaskStatus, Widget};
pub use eval::{EvalConfig, EvalReport};
pub use executor::{EpisodeConfig, EpisodeOutcome, EpisodeResult};
pub use gateway::{ChatRequest, ChatResponse, Gateway};
pub use prompt::PromptBundle;
pub use ui::{BBox, ElementKind, Observation, UiElement};
