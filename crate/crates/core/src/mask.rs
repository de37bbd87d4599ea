//! Loss-mask annotation of rendered training examples.
//!
//! Masks are computed per segment in character space. Callers that own a
//! tokenizer project them onto token spans with [`project_to_tokens`]; a
//! token touching any masked character is masked.

use std::fmt;
use std::ops::{BitOr, BitOrAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::FormatProfile;
use crate::render::{
    render_training_example, Conversation, MissingPolicy, RenderError, RenderedExample, Segment,
    SegmentKind,
};

/// Set of regions excluded from the loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MaskSet(u8);

impl MaskSet {
    pub const NONE: MaskSet = MaskSet(0);
    pub const PROMPT: MaskSet = MaskSet(0b01);
    pub const THINK: MaskSet = MaskSet(0b10);

    pub fn contains(self, other: MaskSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: MaskSet) -> MaskSet {
        MaskSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Conventional name of the fine-tuning strategy this mask implements.
    pub fn strategy_name(self) -> &'static str {
        match (self.contains(MaskSet::PROMPT), self.contains(MaskSet::THINK)) {
            (false, false) => "full",
            (false, true) => "masked-think",
            (true, false) => "masked-prompt",
            (true, true) => "response-only",
        }
    }
}

impl BitOr for MaskSet {
    type Output = MaskSet;

    fn bitor(self, rhs: MaskSet) -> MaskSet {
        self.union(rhs)
    }
}

impl BitOrAssign for MaskSet {
    fn bitor_assign(&mut self, rhs: MaskSet) {
        *self = self.union(rhs);
    }
}

impl fmt::Display for MaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.contains(MaskSet::PROMPT) {
            parts.push("prompt");
        }
        if self.contains(MaskSet::THINK) {
            parts.push("think");
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for MaskSet {
    type Err = String;

    /// Comma-joined flags, e.g. `prompt,think`; the empty string is no mask.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = MaskSet::NONE;
        for flag in s.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            set |= match flag.to_ascii_lowercase().as_str() {
                "prompt" => MaskSet::PROMPT,
                "think" => MaskSet::THINK,
                "none" => MaskSet::NONE,
                other => return Err(format!("unknown mask flag `{other}`")),
            };
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub text: String,
    pub segments: Vec<Segment>,
    pub strategy_name: String,
}

impl MaskedExample {
    /// Mask bit of every character of `text`, in order.
    pub fn char_mask(&self) -> Vec<bool> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.masked, s.text.chars().count()))
            .collect()
    }

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
}

/// Sets the mask bits of a rendered training example.
///
/// `THINK` masks the think delimiters and body. `PROMPT` masks everything
/// before the target turn plus the assistant opening marker. Response text
/// and the closing marker stay supervised.
pub fn apply_mask(rendered: RenderedExample, mask: MaskSet) -> MaskedExample {
    let RenderedExample { text, mut segments } = rendered;
    let target_start = segments
        .iter()
        .position(|s| s.kind != SegmentKind::Prompt)
        .unwrap_or(segments.len());
    for (i, seg) in segments.iter_mut().enumerate() {
        seg.masked = match seg.kind {
            SegmentKind::Prompt => mask.contains(MaskSet::PROMPT),
            SegmentKind::TemplateGlue => i == target_start && mask.contains(MaskSet::PROMPT),
            SegmentKind::ThinkOpen | SegmentKind::ThinkBody | SegmentKind::ThinkClose => {
                mask.contains(MaskSet::THINK)
            }
            SegmentKind::Response => false,
        };
    }
    MaskedExample {
        text,
        segments,
        strategy_name: mask.strategy_name().to_owned(),
    }
}

/// Renders `conv` in the empty-think format and applies `mask`.
pub fn build_masked_example(
    conv: &Conversation,
    profile: &FormatProfile,
    mask: MaskSet,
) -> Result<MaskedExample, RenderError> {
    build_masked_example_with_policy(conv, profile, mask, MissingPolicy::EmptyThink)
}

pub fn build_masked_example_with_policy(
    conv: &Conversation,
    profile: &FormatProfile,
    mask: MaskSet,
    policy: MissingPolicy,
) -> Result<MaskedExample, RenderError> {
    let rendered = render_training_example(conv, profile, policy)?;
    Ok(apply_mask(rendered, mask))
}

/// Half-open character spans of each token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAlignment {
    pub token_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenLabel {
    Supervised,
    Masked,
}

impl TokenLabel {
    /// 1 when the token is masked, 0 when supervised.
    pub fn bit(self) -> u8 {
        match self {
            TokenLabel::Supervised => 0,
            TokenLabel::Masked => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignmentMismatch {
    #[error("token {index} span ({start}, {end}) is inverted")]
    Inverted {
        index: usize,
        start: usize,
        end: usize,
    },
    #[error("token {index} starts at {start}, expected {expected} (gap or overlap)")]
    Discontiguous {
        index: usize,
        start: usize,
        expected: usize,
    },
    #[error("token spans cover {covered} characters, text has {len}")]
    Coverage { covered: usize, len: usize },
}

pub fn project_to_tokens(
    ex: &MaskedExample,
    align: &TokenAlignment,
) -> Result<Vec<TokenLabel>, AlignmentMismatch> {
    let chars = ex.char_mask();
    let mut expected = 0;
    for (index, &(start, end)) in align.token_spans.iter().enumerate() {
        if end < start {
            return Err(AlignmentMismatch::Inverted { index, start, end });
        }
        if start != expected {
            return Err(AlignmentMismatch::Discontiguous {
                index,
                start,
                expected,
            });
        }
        expected = end;
    }
    if expected != chars.len() {
        return Err(AlignmentMismatch::Coverage {
            covered: expected,
            len: chars.len(),
        });
    }
    Ok(align
        .token_spans
        .iter()
        .map(|&(s, e)| {
            if chars[s..e].iter().any(|&m| m) {
                TokenLabel::Masked
            } else {
                TokenLabel::Supervised
            }
        })
        .collect())
}
