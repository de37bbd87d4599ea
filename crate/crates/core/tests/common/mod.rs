//! Random conversations, generations and scored corpora shared by the
//! property tests and the acceptance suite.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trace_gauge::answer::ResponseScore;
use trace_gauge::parse::TraceStatus;
use trace_gauge::render::{Conversation, Message};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "the", "answer", "is", "so", "we", "add", "x", "=", "3", "4,000", "1/2", "carbon", "mol",
    "Then", "check:", "π", "√2", "推理", "ünïcode", "<b>", "a<c", "think", "/think", ">", "<",
    "\\boxed{7}", "$5$", "-2", "0.75", "(B)", "step", "\t", "…",
];

/// Trimmed, non-empty text free of any `<think>` / `</think>` delimiter.
pub fn words<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words.max(1));
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push_str(if rng.gen_bool(0.15) { "\n" } else { " " });
        }
        out.push_str(WORDS.choose(rng).unwrap());
    }
    let trimmed = out.trim();
    if trimmed.is_empty() {
        "ok".to_owned()
    } else {
        trimmed.to_owned()
    }
}

/// A conversation ending in an assistant target. The target carries
/// reasoning when `target_reasoning` is set; earlier assistant turns get
/// reasoning at random.
pub fn conversation<R: Rng>(rng: &mut R, target_reasoning: Option<bool>) -> Conversation {
    let mut messages = Vec::new();
    if rng.gen_bool(0.3) {
        messages.push(Message::system(words(rng, 8)));
    }
    for _ in 0..rng.gen_range(0..3) {
        messages.push(Message::user(words(rng, 10)));
        let mut reply = Message::assistant(words(rng, 10));
        if rng.gen_bool(0.5) {
            reply = reply.with_reasoning(words(rng, 10));
        }
        messages.push(reply);
    }
    messages.push(Message::user(words(rng, 12)));
    let mut target = Message::assistant(words(rng, 12));
    let with_reasoning = target_reasoning.unwrap_or_else(|| rng.gen_bool(0.5));
    if with_reasoning {
        target = target.with_reasoning(words(rng, 20));
    }
    messages.push(target);
    Conversation::new(messages)
}

/// A generation as a model might emit it: a well-formed response that has
/// been randomly damaged (truncated, delimiters dropped or duplicated,
/// reasoning blanked, junk prepended).
pub fn mutated_generation<R: Rng>(rng: &mut R, implicit_open: bool) -> String {
    let reasoning = if rng.gen_bool(0.15) {
        " \n ".to_owned()
    } else {
        words(rng, 30)
    };
    let answer = words(rng, 8);
    let mut text = if implicit_open {
        format!("{reasoning}\n</think>\n{answer}")
    } else {
        format!("<think>\n{reasoning}\n</think>\n{answer}")
    };
    match rng.gen_range(0..7) {
        0 => {}
        1 => {
            let cut = rng.gen_range(0..=text.chars().count());
            text = text.chars().take(cut).collect();
        }
        2 => text = text.replacen("<think>", "", 1),
        3 => text = text.replacen("</think>", "", 1),
        4 => text = format!("{} {text}", words(rng, 4)),
        5 => text.push_str("</think><think>"),
        _ => text = answer,
    }
    text
}

/// A scored response consistent with its status: truncated and blank
/// answers are never answered or correct.
pub fn scored<R: Rng>(rng: &mut R, p_correct: f64) -> ResponseScore {
    let status = *TraceStatus::ALL.choose(rng).unwrap();
    let answered = status != TraceStatus::Truncated && rng.gen_bool(0.9);
    ResponseScore {
        answered,
        correct: answered && rng.gen_bool(p_correct),
        extracted: None,
        status,
    }
}

/// Scored responses with exactly the given per-cell counts.
pub fn scores_from_counts(cells: &[(TraceStatus, bool, usize)]) -> Vec<ResponseScore> {
    let mut out = Vec::new();
    for &(status, correct, count) in cells {
        for _ in 0..count {
            out.push(ResponseScore {
                answered: status != TraceStatus::Truncated,
                correct,
                extracted: None,
                status,
            });
        }
    }
    out
}
