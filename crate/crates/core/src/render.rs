//! Chat rendering into inference prompts and segmented training targets.
//!
//! The layout is a flat segment grammar: each message is its role's open
//! marker, its content and its close marker, with no conditionals. Assistant
//! history is written compactly (`<think>r</think>a`). The final assistant
//! turn of a training target uses the block layout
//!
//! ```text
//! <think>
//! reasoning
//! </think>
//! answer
//! ```
//!
//! with the newline after the open delimiter kept inside the `ThinkOpen`
//! segment, so an empty block has a byte-empty body.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{FormatProfile, MissingReasoning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
            reasoning: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
            reasoning: None,
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
            reasoning: None,
        }
    }

    pub fn with_reasoning(mut self, reasoning: impl Into<String>) -> Self {
        self.reasoning = Some(reasoning.into());
        self
    }

    /// Reasoning text, if present and not blank.
    fn nonblank_reasoning(&self) -> Option<&str> {
        self.reasoning
            .as_deref()
            .filter(|r| !r.trim().is_empty())
    }
}

/// One conversation record: `{"messages": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<Message>,
}

impl Conversation {
    pub fn new(messages: Vec<Message>) -> Self {
        Self { messages }
    }

    fn check(&self) -> Result<(), RenderError> {
        if self.messages.is_empty() {
            return Err(RenderError::InvalidConversation("no messages".into()));
        }
        for (i, m) in self.messages.iter().enumerate() {
            if m.reasoning.is_some() && m.role != Role::Assistant {
                return Err(RenderError::InvalidConversation(format!(
                    "message {i}: reasoning is only allowed on assistant messages"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Prompt,
    TemplateGlue,
    ThinkOpen,
    ThinkBody,
    ThinkClose,
    Response,
}

impl SegmentKind {
    pub fn is_think(self) -> bool {
        matches!(
            self,
            SegmentKind::ThinkOpen | SegmentKind::ThinkBody | SegmentKind::ThinkClose
        )
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
    pub masked: bool,
}

/// Rendered text plus a byte-exact classification of it into segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedExample {
    pub text: String,
    pub segments: Vec<Segment>,
}

impl RenderedExample {
    /// Half-open character offsets `(start, end)` of each segment.
    pub fn char_spans(&self) -> Vec<(usize, usize)> {
        let mut pos = 0;
        self.segments
            .iter()
            .map(|s| {
                let start = pos;
                pos += s.text.chars().count();
                (start, pos)
            })
            .collect()
    }

    /// The part of a training target the model would generate after the
    /// profile's generation suffix, excluding the closing assistant marker.
    pub fn completion(&self, profile: &FormatProfile) -> Option<&str> {
        let first_turn = self
            .segments
            .iter()
            .position(|s| s.kind != SegmentKind::Prompt)?;
        let start: usize = self.segments[..first_turn].iter().map(|s| s.text.len()).sum();
        let closing = self.segments.last()?;
        if closing.kind != SegmentKind::TemplateGlue || self.segments.len() - 1 <= first_turn {
            return None;
        }
        let end = self.text.len() - closing.text.len();
        let turn = &self.text[start..end];
        if let Some(rest) = turn.strip_prefix(profile.generation_suffix.as_str()) {
            Some(rest)
        } else if !profile.implicit_open {
            turn.strip_prefix(profile.role_markers.assistant.open.as_str())
        } else {
            None
        }
    }
}

/// How a training target without reasoning represents the missing trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    EmptyThink,
    NoThink,
    ProfileDefault,
}

impl MissingPolicy {
    pub fn resolve(self, profile: &FormatProfile) -> MissingReasoning {
        match self {
            MissingPolicy::EmptyThink => MissingReasoning::EmptyThink,
            MissingPolicy::NoThink => MissingReasoning::NoThink,
            MissingPolicy::ProfileDefault => profile.missing_reasoning_default,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("invalid conversation: {0}")]
    InvalidConversation(String),
    #[error("steering not supported: {0}")]
    SteeringUnsupported(String),
    #[error("conversation has no final assistant message to use as target")]
    MissingTarget,
}

#[derive(Default)]
struct Builder {
    text: String,
    segments: Vec<Segment>,
}

impl Builder {
    fn push(&mut self, kind: SegmentKind, text: impl Into<String>) {
        let text = text.into();
        if text.is_empty() {
            return;
        }
        self.text.push_str(&text);
        self.segments.push(Segment {
            kind,
            text,
            masked: false,
        });
    }

    fn finish(self) -> RenderedExample {
        RenderedExample {
            text: self.text,
            segments: self.segments,
        }
    }
}

fn history_message(msg: &Message, profile: &FormatProfile) -> String {
    let marker = match msg.role {
        Role::User => &profile.role_markers.user,
        Role::Assistant => &profile.role_markers.assistant,
        Role::System => &profile.role_markers.system,
    };
    let mut out = String::with_capacity(marker.open.len() + msg.content.len() + 32);
    out.push_str(&marker.open);
    if let Some(r) = &msg.reasoning {
        out.push_str(&profile.think_open);
        out.push_str(r);
        out.push_str(&profile.think_close);
    }
    out.push_str(&msg.content);
    out.push_str(&marker.close);
    out
}

/// Renders an inference prompt ending in the generation suffix, optionally
/// seeding the reasoning (`think_prefix`) or the answer (`response_prefix`).
pub fn render_prompt(
    conv: &Conversation,
    profile: &FormatProfile,
    think_prefix: Option<&str>,
    response_prefix: Option<&str>,
) -> Result<RenderedExample, RenderError> {
    conv.check()?;
    if conv.messages.last().map(|m| m.role) == Some(Role::Assistant) {
        return Err(RenderError::InvalidConversation(
            "an inference prompt must end with a user or system message".into(),
        ));
    }
    if let Some(prefix) = think_prefix {
        if prefix.contains(profile.think_close.as_str()) {
            return Err(RenderError::SteeringUnsupported(format!(
                "think prefix contains the close delimiter {:?}",
                profile.think_close
            )));
        }
    }
    if let Some(prefix) = response_prefix {
        if prefix.contains(profile.think_open.as_str()) {
            return Err(RenderError::SteeringUnsupported(format!(
                "response prefix contains the open delimiter {:?}",
                profile.think_open
            )));
        }
    }

    let mut b = Builder::default();
    for msg in &conv.messages {
        b.push(SegmentKind::Prompt, history_message(msg, profile));
    }

    if profile.implicit_open {
        // validated profiles carry think_open exactly once in the suffix
        let suffix = &profile.generation_suffix;
        match suffix.find(profile.think_open.as_str()) {
            Some(at) => {
                b.push(SegmentKind::TemplateGlue, &suffix[..at]);
                b.push(SegmentKind::ThinkOpen, profile.think_open.as_str());
                b.push(
                    SegmentKind::TemplateGlue,
                    &suffix[at + profile.think_open.len()..],
                );
            }
            None => b.push(SegmentKind::TemplateGlue, suffix.as_str()),
        }
    } else {
        b.push(SegmentKind::TemplateGlue, profile.generation_suffix.as_str());
        if think_prefix.is_some() || response_prefix.is_some() {
            b.push(SegmentKind::ThinkOpen, profile.think_open.as_str());
        }
    }

    let think_prefix = think_prefix.unwrap_or("");
    b.push(SegmentKind::ThinkBody, think_prefix);
    if let Some(resp) = response_prefix {
        let close = if think_prefix.is_empty() {
            format!("{}\n", profile.think_close)
        } else {
            format!("\n{}\n", profile.think_close)
        };
        b.push(SegmentKind::ThinkClose, close);
        b.push(SegmentKind::Response, resp);
    }
    Ok(b.finish())
}

/// Renders a full training target whose final message is the assistant turn
/// being supervised.
pub fn render_training_example(
    conv: &Conversation,
    profile: &FormatProfile,
    missing_policy: MissingPolicy,
) -> Result<RenderedExample, RenderError> {
    conv.check()?;
    let (target, history) = conv
        .messages
        .split_last()
        .filter(|(last, _)| last.role == Role::Assistant)
        .ok_or(RenderError::MissingTarget)?;

    let mut b = Builder::default();
    for msg in history {
        b.push(SegmentKind::Prompt, history_message(msg, profile));
    }

    let assistant = &profile.role_markers.assistant;
    b.push(SegmentKind::TemplateGlue, assistant.open.as_str());
    match target.nonblank_reasoning() {
        Some(reasoning) => {
            b.push(SegmentKind::ThinkOpen, format!("{}\n", profile.think_open));
            b.push(SegmentKind::ThinkBody, reasoning);
            b.push(SegmentKind::ThinkClose, format!("\n{}\n", profile.think_close));
        }
        None => match missing_policy.resolve(profile) {
            MissingReasoning::EmptyThink => {
                b.push(SegmentKind::ThinkOpen, format!("{}\n", profile.think_open));
                b.push(SegmentKind::ThinkClose, format!("{}\n", profile.think_close));
            }
            MissingReasoning::NoThink => {}
        },
    }
    b.push(SegmentKind::Response, target.content.as_str());
    b.push(SegmentKind::TemplateGlue, assistant.close.as_str());
    Ok(b.finish())
}
