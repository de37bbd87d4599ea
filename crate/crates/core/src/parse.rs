//! Structural classification of generations into reasoning and answer.
//!
//! Every generation gets exactly one [`TraceStatus`]:
//!
//! 1. Locate the first open delimiter. Profiles with `implicit_open` imply it
//!    at position 0 and any literal open tag is ordinary reasoning text.
//! 2. No open delimiter: `Missing`, the whole text is the answer.
//! 3. The first close after the open exists: the trimmed body is the
//!    reasoning (`Empty` when blank, otherwise `Valid`) and everything after
//!    the close, minus leading whitespace, is the answer.
//! 4. No close: `Truncated`, with the partial body and no answer.
//!
//! Only the first block counts. Later delimiter text belongs to the answer.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::profile::FormatProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Valid,
    Empty,
    Missing,
    Truncated,
}

impl TraceStatus {
    pub const ALL: [TraceStatus; 4] = [
        TraceStatus::Valid,
        TraceStatus::Empty,
        TraceStatus::Missing,
        TraceStatus::Truncated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Valid => "valid",
            TraceStatus::Empty => "empty",
            TraceStatus::Missing => "missing",
            TraceStatus::Truncated => "truncated",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TraceStatus::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown status `{s}`"))
    }
}

/// A generation split into reasoning `r` and answer `a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub reasoning: Option<String>,
    pub answer: Option<String>,
    pub status: TraceStatus,
    /// Length of the raw generation in characters.
    pub raw_length: usize,
}

impl ParsedResponse {
    pub fn has_valid_reasoning(&self) -> bool {
        self.status == TraceStatus::Valid
    }

    pub fn has_empty_reasoning(&self) -> bool {
        self.status == TraceStatus::Empty
    }

    pub fn has_missing_reasoning(&self) -> bool {
        self.status == TraceStatus::Missing
    }

    pub fn has_truncated_reasoning(&self) -> bool {
        self.status == TraceStatus::Truncated
    }

    /// An answer is present and has non-whitespace content.
    pub fn has_answer(&self) -> bool {
        self.answer.as_deref().is_some_and(|a| !a.trim().is_empty())
    }
}

pub fn parse_response(text: &str, profile: &FormatProfile) -> ParsedResponse {
    let raw_length = text.chars().count();

    let body_start = if profile.implicit_open {
        Some(0)
    } else {
        match text.find(profile.think_open.as_str()) {
            Some(at) => Some(at + profile.think_open.len()),
            None if profile.tolerate_unopened_close
                && text.contains(profile.think_close.as_str()) =>
            {
                Some(0)
            }
            None => None,
        }
    };

    let Some(body_start) = body_start else {
        return ParsedResponse {
            reasoning: None,
            answer: Some(text.to_owned()),
            status: TraceStatus::Missing,
            raw_length,
        };
    };

    let rest = &text[body_start..];
    match rest.find(profile.think_close.as_str()) {
        Some(close_at) => {
            let body = rest[..close_at].trim();
            let answer = rest[close_at + profile.think_close.len()..].trim_start();
            ParsedResponse {
                reasoning: Some(body.to_owned()),
                answer: Some(answer.to_owned()),
                status: if body.is_empty() {
                    TraceStatus::Empty
                } else {
                    TraceStatus::Valid
                },
                raw_length,
            }
        }
        None => ParsedResponse {
            reasoning: Some(rest.trim().to_owned()),
            answer: None,
            status: TraceStatus::Truncated,
            raw_length,
        },
    }
}

/// Parses a batch in parallel; output order matches input order.
pub fn parse_batch<S>(texts: &[S], profile: &FormatProfile) -> Vec<ParsedResponse>
where
    S: AsRef<str> + Sync,
{
    texts
        .par_iter()
        .map(|t| parse_response(t.as_ref(), profile))
        .collect()
}

const TEACHER_OPEN: &str = "<reasoning_steps>";
const TEACHER_CLOSE: &str = "</reasoning_steps>";
const TEACHER_PREFIX: &str = "Okay, ";

/// Pulls the reasoning out of a teacher reply to the distillation prompt.
///
/// Returns the trimmed content of the first complete `<reasoning_steps>`
/// block when it starts with `"Okay, "`. Retrying malformed replies is the
/// caller's job.
pub fn extract_teacher_trace(teacher_text: &str) -> Option<String> {
    let start = teacher_text.find(TEACHER_OPEN)? + TEACHER_OPEN.len();
    let len = teacher_text[start..].find(TEACHER_CLOSE)?;
    let content = teacher_text[start..start + len].trim();
    content
        .starts_with(TEACHER_PREFIX)
        .then(|| content.to_owned())
}
