//! Structural evaluation toolkit for explicit-reasoning language models.
//!
//! - [`profile`]: reasoning-format conventions (delimiters, role markers).
//! - [`render`]: prompts and segmented training targets.
//! - [`parse`]: classification of generations into valid / empty / missing /
//!   truncated reasoning.
//! - [`answer`]: boxed-answer extraction and permissive answer checking.
//! - [`metrics`]: VR/ER/MR/TR, pass@1, Rpass@1 and bootstrap intervals.
//! - [`mask`]: loss masks for fine-tuning targets.
//! - [`report`]: checkpoint series, collapse detection, CSV/JSON reports.
//! - [`cli`]: the `trace-gauge` command line.

pub mod answer;
pub mod cli;
pub mod mask;
pub mod metrics;
pub mod parse;
pub mod profile;
pub mod render;
pub mod report;

pub use answer::{answers_equivalent, extract_boxed, normalize_answer, score_response, ResponseScore};
pub use mask::{build_masked_example, project_to_tokens, MaskSet, MaskedExample, TokenAlignment};
pub use metrics::{bootstrap_ci, compute_eval, compute_stats, merge_stats, EvalConfig, EvalResult, TraceStats};
pub use parse::{extract_teacher_trace, parse_batch, parse_response, ParsedResponse, TraceStatus};
pub use profile::{builtin_profile, load_profile, validate_profile, FormatProfile};
pub use render::{render_prompt, render_training_example, Conversation, Message, MissingPolicy, Role};
pub use report::{build_series, detect_collapse, emit_report, evaluate_checkpoint, sample_subset};
