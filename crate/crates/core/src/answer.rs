//! Final-answer extraction and permissive equivalence checking.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{ParsedResponse, TraceStatus};

const BOXED: &str = "\\boxed{";
const FRAC: &str = "\\frac{";

/// Content of the last `\boxed{...}` in `answer_text`, with nested braces
/// balanced. `None` when there is no box or its braces never close.
pub fn extract_boxed(answer_text: &str) -> Option<&str> {
    let start = answer_text.rfind(BOXED)? + BOXED.len();
    let len = balanced_len(&answer_text[start..])?;
    Some(&answer_text[start..start + len])
}

/// Byte length of the text before the `}` closing an already-open brace.
fn balanced_len(s: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Normalized form of an answer; equality is answer equivalence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CanonicalAnswer {
    /// Exact rational value of a numeric answer.
    Number(BigRational),
    /// Single-letter choice label, uppercased.
    Choice(char),
    Text(String),
}

impl fmt::Display for CanonicalAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CanonicalAnswer::Number(r) if r.is_integer() => write!(f, "{}", r.numer()),
            CanonicalAnswer::Number(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            CanonicalAnswer::Choice(c) => write!(f, "{c}"),
            CanonicalAnswer::Text(t) => f.write_str(t),
        }
    }
}

fn strip_decorations(s: &str) -> String {
    let mut cur = s.trim().to_owned();
    loop {
        let mut next = cur.as_str();
        if next.len() >= 2 && next.starts_with('$') && next.ends_with('$') {
            next = &next[1..next.len() - 1];
        }
        if let Some(inner) = next.strip_prefix(BOXED) {
            if balanced_len(inner) == Some(inner.len() - 1) {
                next = &inner[..inner.len() - 1];
            }
        }
        next = next.trim_end_matches('.');
        next = next
            .strip_suffix("\\%")
            .or_else(|| next.strip_suffix('%'))
            .unwrap_or(next);
        let next = next.trim();
        if next == cur {
            return cur;
        }
        cur = next.to_owned();
    }
}

fn is_grouped_thousands(int_part: &str) -> bool {
    let mut groups = int_part.split(',');
    let head = groups.next().unwrap_or("");
    !head.is_empty()
        && head.len() <= 3
        && !head.starts_with('0')
        && head.bytes().all(|b| b.is_ascii_digit())
        && groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()))
}

/// Unsigned decimal: `12`, `1,234.5`, `.5`, `3.`.
fn parse_unsigned_decimal(s: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: String = if int_part.contains(',') {
        if !is_grouped_thousands(int_part) {
            return None;
        }
        int_part.replace(',', "")
    } else if int_part.bytes().all(|b| b.is_ascii_digit()) {
        int_part.to_owned()
    } else {
        return None;
    };
    let all_digits = format!("{digits}{frac_part}");
    let numer: BigInt = all_digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10u8), frac_part.len());
    Some(BigRational::new(numer, denom))
}

fn parse_signed(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (negative, body) = match s.as_bytes().first() {
        Some(b'-') => (true, s[1..].trim_start()),
        Some(b'+') => (false, s[1..].trim_start()),
        _ => (false, s),
    };
    let value = if let Some(rest) = body.strip_prefix(FRAC) {
        let num_len = balanced_len(rest)?;
        let numer = parse_signed(&rest[..num_len])?;
        let denom_part = rest[num_len + 1..].strip_prefix('{')?;
        let den_len = balanced_len(denom_part)?;
        if den_len + 1 != denom_part.len() {
            return None;
        }
        let denom = parse_signed(&denom_part[..den_len])?;
        if denom.is_zero() {
            return None;
        }
        numer / denom
    } else if let Some((a, b)) = body.split_once('/') {
        let numer = parse_unsigned_decimal(a.trim())?;
        let denom = parse_unsigned_decimal(b.trim())?;
        if denom.is_zero() {
            return None;
        }
        numer / denom
    } else {
        parse_unsigned_decimal(body)?
    };
    Some(if negative { -value } else { value })
}

pub fn normalize_answer(text: &str) -> CanonicalAnswer {
    let lowered = text.replace('\u{2212}', "-").to_lowercase();
    let stripped = strip_decorations(&lowered);
    let collapsed = stripped.split_whitespace().collect::<Vec<_>>().join(" ");

    if let Some(value) = parse_signed(&collapsed) {
        return CanonicalAnswer::Number(value);
    }

    let unparen = collapsed
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(&collapsed);
    let mut chars = unparen.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_ascii_alphabetic() {
            return CanonicalAnswer::Choice(c.to_ascii_uppercase());
        }
    }
    CanonicalAnswer::Text(collapsed)
}

pub fn answers_equivalent(pred: &str, gold: &str) -> bool {
    normalize_answer(pred) == normalize_answer(gold)
}

/// Last number-like token (`-1,234.5`, `3/4`) in free text.
fn last_numeric_token(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut end = bytes.len();
    while end > 0 && !bytes[end - 1].is_ascii_digit() {
        end -= 1;
    }
    if end == 0 {
        return None;
    }
    let mut start = end;
    while start > 0 {
        let b = bytes[start - 1];
        let continues = b.is_ascii_digit()
            || (matches!(b, b',' | b'.' | b'/')
                && start >= 2
                && bytes[start - 2].is_ascii_digit());
        if !continues {
            break;
        }
        start -= 1;
    }
    if start > 0 && bytes[start - 1] == b'-' {
        start -= 1;
    }
    Some(&text[start..end])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseScore {
    pub answered: bool,
    pub correct: bool,
    pub extracted: Option<String>,
    pub status: TraceStatus,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("exactly one of a gold answer or an external result must be supplied")]
    ScoringInputConflict,
}

/// Scores one parsed response against a gold answer or an external
/// pass/fail label. Only a present, non-blank answer counts as answered;
/// truncated responses never do.
pub fn score_response(
    parsed: &ParsedResponse,
    gold: Option<&str>,
    external_result: Option<bool>,
) -> Result<ResponseScore, ScoreError> {
    if gold.is_some() == external_result.is_some() {
        return Err(ScoreError::ScoringInputConflict);
    }
    let status = parsed.status;
    let answer = match (&parsed.answer, status) {
        (_, TraceStatus::Truncated) | (None, _) => {
            return Ok(ResponseScore {
                answered: false,
                correct: false,
                extracted: None,
                status,
            })
        }
        (Some(a), _) => a.as_str(),
    };
    if answer.trim().is_empty() {
        return Ok(ResponseScore {
            answered: false,
            correct: false,
            extracted: None,
            status,
        });
    }

    if let Some(label) = external_result {
        return Ok(ResponseScore {
            answered: true,
            correct: label,
            extracted: None,
            status,
        });
    }

    let gold = normalize_answer(gold.unwrap_or_default());
    let (extracted, correct) = if let Some(boxed) = extract_boxed(answer) {
        let pred = normalize_answer(boxed);
        let correct = pred == gold;
        (pred, correct)
    } else {
        let whole = normalize_answer(answer);
        if whole == gold {
            (whole, true)
        } else if let Some(token) = last_numeric_token(answer) {
            let pred = normalize_answer(token);
            let correct = pred == gold;
            (pred, correct)
        } else {
            (whole, false)
        }
    };
    Ok(ResponseScore {
        answered: true,
        correct,
        extracted: Some(extracted.to_string()),
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_response;
    use crate::profile::builtin_profile;

    fn rat(n: i64, d: i64) -> CanonicalAnswer {
        CanonicalAnswer::Number(BigRational::new(n.into(), d.into()))
    }

    #[test]
    fn boxed_extraction() {
        assert_eq!(extract_boxed("thus \\boxed{42}."), Some("42"));
        assert_eq!(extract_boxed("\\boxed{\\frac{1}{2}}"), Some("\\frac{1}{2}"));
        assert_eq!(extract_boxed("no box, answer 7"), None);
        assert_eq!(extract_boxed("\\boxed{1} then \\boxed{2}"), Some("2"));
        assert_eq!(extract_boxed("\\boxed{1} then \\boxed{2"), None);
    }

    #[test]
    fn normalization_table() {
        assert_eq!(normalize_answer("1,000"), rat(1000, 1));
        assert_eq!(normalize_answer(" B. "), CanonicalAnswer::Choice('B'));
        assert_eq!(normalize_answer("0.50"), rat(1, 2));
        assert_eq!(normalize_answer("$-3$"), rat(-3, 1));
        assert_eq!(normalize_answer("50%"), rat(50, 1));
        assert_eq!(normalize_answer("\\frac{3}{4}"), rat(3, 4));
        assert_eq!(normalize_answer("-\\frac{1}{2}"), rat(-1, 2));
        assert_eq!(normalize_answer("(c)"), CanonicalAnswer::Choice('C'));
        assert_eq!(
            normalize_answer("  Sodium   Chloride. "),
            CanonicalAnswer::Text("sodium chloride".into())
        );
        assert_eq!(normalize_answer("1,00"), CanonicalAnswer::Text("1,00".into()));
        assert_eq!(normalize_answer("1/0"), CanonicalAnswer::Text("1/0".into()));
    }

    #[test]
    fn canonical_display() {
        assert_eq!(normalize_answer("0.50").to_string(), "1/2");
        assert_eq!(normalize_answer("-12.0").to_string(), "-12");
    }

    #[test]
    fn equivalence_examples() {
        assert!(answers_equivalent("1,000", "1000"));
        assert!(answers_equivalent("1/2", "0.5"));
        assert!(!answers_equivalent("42", "41"));
        assert!(answers_equivalent("\\boxed{7}", "7"));
    }

    #[test]
    fn scoring_paths() {
        let p = builtin_profile("in-text-think").unwrap();
        let valid = parse_response("<think>2+2</think>\\boxed{4}", &p);
        let s = score_response(&valid, Some("4"), None).unwrap();
        assert!(s.correct && s.answered);
        assert_eq!(s.extracted.as_deref(), Some("4"));

        let missing = parse_response("so the total is \\boxed{4}", &p);
        assert_eq!(missing.status, TraceStatus::Missing);
        assert!(score_response(&missing, Some("4"), None).unwrap().correct);

        let truncated = parse_response("<think>4 is \\boxed{4}", &p);
        let s = score_response(&truncated, Some("4"), None).unwrap();
        assert!(!s.correct && !s.answered);
        let s = score_response(&truncated, None, Some(true)).unwrap();
        assert!(!s.correct && !s.answered);
    }

    #[test]
    fn fallback_to_last_number() {
        let p = builtin_profile("in-text-think").unwrap();
        let r = parse_response("<think>x</think>The total comes to 1,250 apples.", &p);
        let s = score_response(&r, Some("1250"), None).unwrap();
        assert!(s.correct);
        assert_eq!(s.extracted.as_deref(), Some("1250"));
    }

    #[test]
    fn boxed_wins_over_fallback() {
        let p = builtin_profile("in-text-think").unwrap();
        let r = parse_response("<think>x</think>\\boxed{3}, not 4", &p);
        assert!(!score_response(&r, Some("4"), None).unwrap().correct);
    }

    #[test]
    fn external_label() {
        let p = builtin_profile("in-text-think").unwrap();
        let r = parse_response("<think>x</think>def f(): pass", &p);
        let s = score_response(&r, None, Some(true)).unwrap();
        assert!(s.correct && s.answered);
        assert_eq!(s.extracted, None);
    }

    #[test]
    fn conflicting_inputs() {
        let p = builtin_profile("in-text-think").unwrap();
        let r = parse_response("4", &p);
        assert_eq!(
            score_response(&r, Some("4"), Some(true)),
            Err(ScoreError::ScoringInputConflict)
        );
        assert_eq!(
            score_response(&r, None, None),
            Err(ScoreError::ScoringInputConflict)
        );
    }

    #[test]
    fn numeric_token_scan() {
        assert_eq!(last_numeric_token("a 1,234.5 b"), Some("1,234.5"));
        assert_eq!(last_numeric_token("x -3 y"), Some("-3"));
        assert_eq!(last_numeric_token("ratio 3/4."), Some("3/4"));
        assert_eq!(last_numeric_token("none"), None);
    }
}
