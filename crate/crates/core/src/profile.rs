//! Reasoning-format conventions.
//!
//! A [`FormatProfile`] captures everything that differs between reasoning
//! models at the text level: the think delimiters, the role markers of the
//! chat layout, whether the template itself opens the think block, and how a
//! missing trace is represented in training targets. Every other module takes
//! a profile and is otherwise model-agnostic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How an assistant turn without reasoning is written into a training target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingReasoning {
    /// An empty think block precedes the answer.
    EmptyThink,
    /// No think block at all.
    NoThink,
}

impl fmt::Display for MissingReasoning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingReasoning::EmptyThink => "empty-think",
            MissingReasoning::NoThink => "no-think",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleMarker {
    pub open: String,
    pub close: String,
}

impl RoleMarker {
    fn new(open: &str, close: &str) -> Self {
        Self {
            open: open.to_owned(),
            close: close.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleMarkers {
    pub user: RoleMarker,
    pub assistant: RoleMarker,
    pub system: RoleMarker,
}

/// Declarative description of one reasoning-format convention.
///
/// Profiles are plain data and immutable once built; share them freely.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatProfile {
    pub name: String,
    pub think_open: String,
    pub think_close: String,
    /// The chat template emits `think_open` itself, so generations start
    /// inside the reasoning block.
    pub implicit_open: bool,
    pub role_markers: RoleMarkers,
    /// Appended after the conversation history to start the assistant turn.
    pub generation_suffix: String,
    pub missing_reasoning_default: MissingReasoning,
    /// Treat a close delimiter with no preceding open as closing an implied
    /// block at position 0.
    pub tolerate_unopened_close: bool,
}

/// One breached profile invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileViolation {
    pub field_path: String,
    pub message: String,
}

impl fmt::Display for ProfileViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field_path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown profile `{0}` (expected one of: {})", BUILTIN_PROFILE_NAMES.join(", "))]
    UnknownProfile(String),
    #[error("malformed profile document: {0}")]
    MalformedDocument(String),
    #[error("profile failed validation: {}", join_violations(.0))]
    ValidationFailed(Vec<ProfileViolation>),
}

fn join_violations(violations: &[ProfileViolation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Names accepted by [`builtin_profile`].
pub const BUILTIN_PROFILE_NAMES: [&str; 3] =
    ["in-text-think", "prefixed-think", "field-think-empty-default"];

/// Named builtin profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinProfile {
    /// The model writes the whole think block itself.
    InTextThink,
    /// The template opens the think block; generations start inside it.
    PrefixedThink,
    /// Reasoning lives in a separate message field and missing reasoning is
    /// rendered as an empty block.
    FieldThinkEmptyDefault,
}

impl BuiltinProfile {
    pub const ALL: [BuiltinProfile; 3] = [
        BuiltinProfile::InTextThink,
        BuiltinProfile::PrefixedThink,
        BuiltinProfile::FieldThinkEmptyDefault,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinProfile::InTextThink => "in-text-think",
            BuiltinProfile::PrefixedThink => "prefixed-think",
            BuiltinProfile::FieldThinkEmptyDefault => "field-think-empty-default",
        }
    }

    pub fn profile(self) -> FormatProfile {
        let markers = RoleMarkers {
            user: RoleMarker::new("<user>\n", "\n</user>\n"),
            assistant: RoleMarker::new("<assistant>\n", "\n</assistant>\n"),
            system: RoleMarker::new("<system>\n", "\n</system>\n"),
        };
        let (generation_suffix, implicit_open, missing) = match self {
            BuiltinProfile::InTextThink => ("<assistant>\n", false, MissingReasoning::NoThink),
            BuiltinProfile::PrefixedThink => {
                ("<assistant>\n<think>", true, MissingReasoning::NoThink)
            }
            BuiltinProfile::FieldThinkEmptyDefault => {
                ("<assistant>\n", false, MissingReasoning::EmptyThink)
            }
        };
        FormatProfile {
            name: self.name().to_owned(),
            think_open: "<think>".to_owned(),
            think_close: "</think>".to_owned(),
            implicit_open,
            role_markers: markers,
            generation_suffix: generation_suffix.to_owned(),
            missing_reasoning_default: missing,
            tolerate_unopened_close: false,
        }
    }
}

impl FromStr for BuiltinProfile {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinProfile::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| ProfileError::UnknownProfile(s.to_owned()))
    }
}

pub fn builtin_profile(name: &str) -> Result<FormatProfile, ProfileError> {
    name.parse::<BuiltinProfile>().map(BuiltinProfile::profile)
}

/// Parses and validates a JSON profile document.
pub fn load_profile(doc: &str) -> Result<FormatProfile, ProfileError> {
    let profile: FormatProfile =
        serde_json::from_str(doc).map_err(|e| ProfileError::MalformedDocument(e.to_string()))?;
    let violations = validate_profile(&profile);
    if violations.is_empty() {
        Ok(profile)
    } else {
        Err(ProfileError::ValidationFailed(violations))
    }
}

/// Serializes a profile into the document form accepted by [`load_profile`].
pub fn profile_to_document(profile: &FormatProfile) -> String {
    serde_json::to_string_pretty(profile).expect("profile serialization is infallible")
}

/// Returns one violation per breached invariant, sorted by field path.
pub fn validate_profile(p: &FormatProfile) -> Vec<ProfileViolation> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(ProfileViolation {
            field_path: field.to_owned(),
            message,
        })
    };

    if p.name.trim().is_empty() {
        push("name", "must not be empty".into());
    }
    if p.think_open.is_empty() {
        push("think_open", "must not be empty".into());
    }
    if p.think_close.is_empty() {
        push("think_close", "must not be empty".into());
    }
    if !p.think_open.is_empty() && p.think_open == p.think_close {
        push("think_close", "must differ from think_open".into());
    }
    if p.implicit_open && !p.think_open.is_empty() {
        let count = p.generation_suffix.matches(p.think_open.as_str()).count();
        if count != 1 {
            push(
                "generation_suffix",
                format!("implicit_open requires think_open exactly once, found {count}"),
            );
        }
    }

    let roles = [
        ("user", &p.role_markers.user),
        ("assistant", &p.role_markers.assistant),
        ("system", &p.role_markers.system),
    ];
    for (role, marker) in roles {
        if marker.open.is_empty() {
            push(&format!("role_markers.{role}.open"), "must not be empty".into());
        }
        if marker.close.is_empty() {
            push(&format!("role_markers.{role}.close"), "must not be empty".into());
        }
    }
    for (i, (role_a, a)) in roles.iter().enumerate() {
        for (role_b, b) in &roles[i + 1..] {
            if a.open == b.open {
                push(
                    &format!("role_markers.{role_b}.open"),
                    format!("opening marker duplicates role_markers.{role_a}.open"),
                );
            }
        }
    }

    out.sort_by(|a, b| a.field_path.cmp(&b.field_path));
    out
}
