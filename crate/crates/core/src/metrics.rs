//! Structural reasoning metrics (VR/ER/MR/TR), pass@1, reasoning-conditioned
//! pass@1, and percentile-bootstrap confidence intervals.
//!
//! Aggregation works on tallies, so sharded or streamed corpora merge
//! exactly. Bootstrap intervals resample records jointly: every metric of a
//! resample comes from the same drawn records. Because each record falls in
//! one of eight (status, correct) cells, a same-size resample with
//! replacement is a multinomial draw over those cells, which is what
//! [`EvalTally::finish`] samples directly.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::ResponseScore;
use crate::parse::{ParsedResponse, TraceStatus};

pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MIN_VALID: u64 = 10;
pub const MIN_RESAMPLES: usize = 1_000;
pub const BOOTSTRAP_METHOD: &str = "percentile-bootstrap";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no responses to aggregate")]
    EmptyInput,
    #[error("confidence level {0} is not in (0, 1)")]
    BadLevel(f64),
    #[error("bootstrap needs at least {MIN_RESAMPLES} resamples, got {0}")]
    TooFewResamples(usize),
}

/// Counts of each structural status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TraceStats {
    pub n: u64,
    pub valid: u64,
    pub empty: u64,
    pub missing: u64,
    pub truncated: u64,
    /// Responses with a present, non-blank answer.
    pub answered: u64,
}

fn ratio(count: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        count as f64 / n as f64
    }
}

impl TraceStats {
    pub fn observe(&mut self, status: TraceStatus, answered: bool) {
        self.n += 1;
        *self.count_mut(status) += 1;
        self.answered += u64::from(answered);
    }

    pub fn observe_parsed(&mut self, parsed: &ParsedResponse) {
        self.observe(parsed.status, parsed.has_answer());
    }

    pub fn count(&self, status: TraceStatus) -> u64 {
        match status {
            TraceStatus::Valid => self.valid,
            TraceStatus::Empty => self.empty,
            TraceStatus::Missing => self.missing,
            TraceStatus::Truncated => self.truncated,
        }
    }

    fn count_mut(&mut self, status: TraceStatus) -> &mut u64 {
        match status {
            TraceStatus::Valid => &mut self.valid,
            TraceStatus::Empty => &mut self.empty,
            TraceStatus::Missing => &mut self.missing,
            TraceStatus::Truncated => &mut self.truncated,
        }
    }

    pub fn valid_reasoning_rate(&self) -> f64 {
        ratio(self.valid, self.n)
    }

    pub fn empty_reasoning_rate(&self) -> f64 {
        ratio(self.empty, self.n)
    }

    pub fn missing_reasoning_rate(&self) -> f64 {
        ratio(self.missing, self.n)
    }

    pub fn truncated_reasoning_rate(&self) -> f64 {
        ratio(self.truncated, self.n)
    }

    pub fn answer_rate(&self) -> f64 {
        ratio(self.answered, self.n)
    }

    pub fn rate(&self, status: TraceStatus) -> f64 {
        ratio(self.count(status), self.n)
    }
}

pub fn compute_stats(parsed: &[ParsedResponse]) -> Result<TraceStats, MetricsError> {
    if parsed.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut stats = TraceStats::default();
    for p in parsed {
        stats.observe_parsed(p);
    }
    Ok(stats)
}

pub fn merge_stats(a: &TraceStats, b: &TraceStats) -> TraceStats {
    TraceStats {
        n: a.n + b.n,
        valid: a.valid + b.valid,
        empty: a.empty + b.empty,
        missing: a.missing + b.missing,
        truncated: a.truncated + b.truncated,
        answered: a.answered + b.answered,
    }
}

/// A metric that carries a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pass1,
    Rpass1,
    Vr,
    Er,
    Mr,
    Tr,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Pass1,
        Metric::Rpass1,
        Metric::Vr,
        Metric::Er,
        Metric::Mr,
        Metric::Tr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pass1 => "pass1",
            Metric::Rpass1 => "rpass1",
            Metric::Vr => "vr",
            Metric::Er => "er",
            Metric::Mr => "mr",
            Metric::Tr => "tr",
        }
    }

    fn of_status(status: TraceStatus) -> Metric {
        match status {
            TraceStatus::Valid => Metric::Vr,
            TraceStatus::Empty => Metric::Er,
            TraceStatus::Missing => Metric::Mr,
            TraceStatus::Truncated => Metric::Tr,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub method: String,
    pub resamples: usize,
    pub seed: u64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            level: DEFAULT_LEVEL,
            resamples: DEFAULT_RESAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

impl BootstrapConfig {
    fn check(&self) -> Result<(), MetricsError> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(MetricsError::BadLevel(self.level));
        }
        if self.resamples < MIN_RESAMPLES {
            return Err(MetricsError::TooFewResamples(self.resamples));
        }
        Ok(())
    }

    fn interval(&self, samples: &mut [f64], point: f64) -> Interval {
        let tail = (1.0 - self.level) / 2.0;
        samples.sort_by(f64::total_cmp);
        let low = quantile_sorted(samples, tail).min(point).max(0.0);
        let high = quantile_sorted(samples, 1.0 - tail).max(point).min(1.0);
        Interval {
            low,
            high,
            level: self.level,
            method: BOOTSTRAP_METHOD.to_owned(),
            resamples: self.resamples,
            seed: self.seed,
        }
    }
}

/// Linear-interpolation quantile of sorted data, `q` in [0, 1].
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Draws one multinomial vector of `n` trials over cells with the given
/// counts, by sequential conditional binomials.
fn multinomial<const K: usize>(rng: &mut ChaCha8Rng, n: u64, counts: &[u64; K]) -> [u64; K] {
    let mut out = [0u64; K];
    let mut remaining_trials = n;
    let mut remaining_mass: u64 = counts.iter().sum();
    for (i, &c) in counts.iter().enumerate() {
        if remaining_trials == 0 || remaining_mass == 0 {
            break;
        }
        let draw = if c == remaining_mass {
            remaining_trials
        } else if c == 0 {
            0
        } else {
            let p = c as f64 / remaining_mass as f64;
            Binomial::new(remaining_trials, p)
                .expect("probability in (0, 1)")
                .sample(rng)
        };
        out[i] = draw;
        remaining_trials -= draw;
        remaining_mass -= c;
    }
    out
}

/// Percentile-bootstrap interval for the mean of a 0/1 indicator vector.
pub fn bootstrap_ci(
    indicators: &[bool],
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<Interval, MetricsError> {
    if indicators.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let cfg = BootstrapConfig {
        level,
        resamples,
        seed,
    };
    cfg.check()?;
    let n = indicators.len() as u64;
    let ones = indicators.iter().filter(|&&b| b).count() as u64;
    let counts = [ones, n - ones];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| multinomial(&mut rng, n, &counts)[0] as f64 / n as f64)
        .collect();
    Ok(cfg.interval(&mut means, ones as f64 / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Rpass@1 is reported only when the valid count exceeds this.
    pub min_valid: u64,
    pub bootstrap: BootstrapConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            min_valid: DEFAULT_MIN_VALID,
            bootstrap: BootstrapConfig::default(),
        }
    }
}

/// Streaming accumulator of scored responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalTally {
    /// `cells[status][correct as usize]`
    cells: [[u64; 2]; 4],
    answered: u64,
}

impl EvalTally {
    pub fn observe(&mut self, score: &ResponseScore) {
        self.cells[score.status.index()][usize::from(score.correct)] += 1;
        self.answered += u64::from(score.answered);
    }

    pub fn merge(&self, other: &EvalTally) -> EvalTally {
        let mut out = *self;
        for (s, row) in out.cells.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell += other.cells[s][c];
            }
        }
        out.answered += other.answered;
        out
    }

    pub fn n(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn stats(&self) -> TraceStats {
        let count = |s: TraceStatus| self.cells[s.index()].iter().sum::<u64>();
        TraceStats {
            n: self.n(),
            valid: count(TraceStatus::Valid),
            empty: count(TraceStatus::Empty),
            missing: count(TraceStatus::Missing),
            truncated: count(TraceStatus::Truncated),
            answered: self.answered,
        }
    }

    pub fn correct(&self) -> u64 {
        self.cells.iter().map(|row| row[1]).sum()
    }

    pub fn valid_correct(&self) -> u64 {
        self.cells[TraceStatus::Valid.index()][1]
    }

    pub fn finish(&self, config: &EvalConfig) -> Result<EvalResult, MetricsError> {
        let n = self.n();
        if n == 0 {
            return Err(MetricsError::EmptyInput);
        }
        config.bootstrap.check()?;
        let stats = self.stats();
        let correct = self.correct();
        let valid_correct = self.valid_correct();
        let pass1 = ratio(correct, n);
        let rpass1 = (stats.valid > config.min_valid).then(|| ratio(valid_correct, stats.valid));

        let flat: [u64; 8] = std::array::from_fn(|i| self.cells[i / 2][i % 2]);
        let resamples = config.bootstrap.resamples;
        let mut series: BTreeMap<Metric, Vec<f64>> = Metric::ALL
            .into_iter()
            .map(|m| (m, Vec::with_capacity(resamples)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.bootstrap.seed);
        for _ in 0..resamples {
            let draw = multinomial(&mut rng, n, &flat);
            let status_count = |s: TraceStatus| draw[2 * s.index()] + draw[2 * s.index() + 1];
            let drawn_correct: u64 = (0..4).map(|s| draw[2 * s + 1]).sum();
            series
                .get_mut(&Metric::Pass1)
                .unwrap()
                .push(ratio(drawn_correct, n));
            for status in TraceStatus::ALL {
                series
                    .get_mut(&Metric::of_status(status))
                    .unwrap()
                    .push(ratio(status_count(status), n));
            }
            let drawn_valid = status_count(TraceStatus::Valid);
            if drawn_valid > 0 {
                series
                    .get_mut(&Metric::Rpass1)
                    .unwrap()
                    .push(ratio(draw[2 * TraceStatus::Valid.index() + 1], drawn_valid));
            }
        }

        let mut ci = BTreeMap::new();
        for (metric, mut samples) in series {
            let point = match metric {
                Metric::Pass1 => pass1,
                Metric::Rpass1 => match rpass1 {
                    Some(r) if !samples.is_empty() => r,
                    _ => continue,
                },
                Metric::Vr => stats.valid_reasoning_rate(),
                Metric::Er => stats.empty_reasoning_rate(),
                Metric::Mr => stats.missing_reasoning_rate(),
                Metric::Tr => stats.truncated_reasoning_rate(),
            };
            ci.insert(metric, config.bootstrap.interval(&mut samples, point));
        }

        Ok(EvalResult {
            stats,
            correct,
            valid_correct,
            pass1,
            rpass1,
            ci,
            min_valid_threshold: config.min_valid,
        })
    }
}

/// Aggregate task and structural metrics for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub stats: TraceStats,
    pub correct: u64,
    pub valid_correct: u64,
    pub pass1: f64,
    /// Suppressed (`None`) when `stats.valid <= min_valid_threshold`.
    pub rpass1: Option<f64>,
    pub ci: BTreeMap<Metric, Interval>,
    pub min_valid_threshold: u64,
}

impl EvalResult {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Pass1 => Some(self.pass1),
            Metric::Rpass1 => self.rpass1,
            Metric::Vr => Some(self.stats.valid_reasoning_rate()),
            Metric::Er => Some(self.stats.empty_reasoning_rate()),
            Metric::Mr => Some(self.stats.missing_reasoning_rate()),
            Metric::Tr => Some(self.stats.truncated_reasoning_rate()),
        }
    }
}

pub fn compute_eval(scores: &[ResponseScore], config: &EvalConfig) -> Result<EvalResult, MetricsError> {
    let mut tally = EvalTally::default();
    for s in scores {
        tally.observe(s);
    }
    tally.finish(config)
}

/// Percentage with one decimal, formatted the way the reference tables are:
/// ties on the exact binary value round to even.
pub fn percent_display(rate: f64) -> String {
    format!("{:.1}", rate * 100.0)
}

// ---- wire format ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsDoc {
    pub valid: u64,
    pub empty: u64,
    pub missing: u64,
    pub truncated: u64,
    pub answered: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_correct: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesDoc {
    pub vr: f64,
    pub er: f64,
    pub mr: f64,
    pub tr: f64,
    pub answer_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalDoc {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Metrics JSON document. Task fields are absent for structure-only stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDoc {
    pub n: u64,
    pub counts: CountsDoc,
    pub rates: RatesDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass1: Option<f64>,
    /// Serialized as `null` when suppressed.
    #[serde(
        default,
        skip_serializing_if = "is_stats_only",
        deserialize_with = "present_nullable"
    )]
    pub rpass1: Option<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_valid: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ci: BTreeMap<Metric, IntervalDoc>,
}

fn is_stats_only(v: &Option<Option<f64>>) -> bool {
    v.is_none()
}

/// A present key (even `null`) deserializes to `Some`.
fn present_nullable<'de, D>(d: D) -> Result<Option<Option<f64>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Option::<f64>::deserialize(d).map(Some)
}

#[derive(Debug, Error)]
#[error("inconsistent metrics document: {0}")]
pub struct MetricsDocError(String);

impl From<&TraceStats> for MetricsDoc {
    fn from(s: &TraceStats) -> Self {
        MetricsDoc {
            n: s.n,
            counts: CountsDoc {
                valid: s.valid,
                empty: s.empty,
                missing: s.missing,
                truncated: s.truncated,
                answered: s.answered,
                correct: None,
                valid_correct: None,
            },
            rates: RatesDoc {
                vr: s.valid_reasoning_rate(),
                er: s.empty_reasoning_rate(),
                mr: s.missing_reasoning_rate(),
                tr: s.truncated_reasoning_rate(),
                answer_rate: s.answer_rate(),
            },
            pass1: None,
            rpass1: None,
            min_valid: None,
            ci: BTreeMap::new(),
        }
    }
}

impl From<&EvalResult> for MetricsDoc {
    fn from(r: &EvalResult) -> Self {
        let mut doc = MetricsDoc::from(&r.stats);
        doc.counts.correct = Some(r.correct);
        doc.counts.valid_correct = Some(r.valid_correct);
        doc.pass1 = Some(r.pass1);
        doc.rpass1 = Some(r.rpass1);
        doc.min_valid = Some(r.min_valid_threshold);
        doc.ci = r
            .ci
            .iter()
            .map(|(m, i)| {
                (
                    *m,
                    IntervalDoc {
                        low: i.low,
                        high: i.high,
                        level: i.level,
                        resamples: i.resamples,
                        seed: i.seed,
                    },
                )
            })
            .collect();
        doc
    }
}

impl MetricsDoc {
    pub fn stats(&self) -> Result<TraceStats, MetricsDocError> {
        let c = &self.counts;
        if c.valid + c.empty + c.missing + c.truncated != self.n {
            return Err(MetricsDocError(format!(
                "status counts do not sum to n = {}",
                self.n
            )));
        }
        Ok(TraceStats {
            n: self.n,
            valid: c.valid,
            empty: c.empty,
            missing: c.missing,
            truncated: c.truncated,
            answered: c.answered,
        })
    }

    pub fn eval_result(&self) -> Result<EvalResult, MetricsDocError> {
        let stats = self.stats()?;
        let missing = |what: &str| MetricsDocError(format!("missing `{what}`"));
        Ok(EvalResult {
            stats,
            correct: self.counts.correct.ok_or_else(|| missing("counts.correct"))?,
            valid_correct: self
                .counts
                .valid_correct
                .ok_or_else(|| missing("counts.valid_correct"))?,
            pass1: self.pass1.ok_or_else(|| missing("pass1"))?,
            rpass1: self.rpass1.ok_or_else(|| missing("rpass1"))?,
            ci: self
                .ci
                .iter()
                .map(|(m, d)| {
                    (
                        *m,
                        Interval {
                            low: d.low,
                            high: d.high,
                            level: d.level,
                            method: BOOTSTRAP_METHOD.to_owned(),
                            resamples: d.resamples,
                            seed: d.seed,
                        },
                    )
                })
                .collect(),
            min_valid_threshold: self.min_valid.ok_or_else(|| missing("min_valid"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(status: TraceStatus, correct: bool) -> ResponseScore {
        ResponseScore {
            answered: status != TraceStatus::Truncated,
            correct,
            extracted: None,
            status,
        }
    }

    fn parsed(status: TraceStatus) -> ParsedResponse {
        ParsedResponse {
            reasoning: None,
            answer: (status != TraceStatus::Truncated).then(|| "x".to_owned()),
            status,
            raw_length: 1,
        }
    }

    #[test]
    fn table_row_rates() {
        let mut corpus = vec![parsed(TraceStatus::Valid); 187];
        corpus.extend(vec![parsed(TraceStatus::Truncated); 69]);
        let s = compute_stats(&corpus).unwrap();
        assert!((s.valid_reasoning_rate() - 0.7305).abs() < 1e-4);
        assert!((s.truncated_reasoning_rate() - 0.2695).abs() < 1e-4);
        assert_eq!(percent_display(s.valid_reasoning_rate()), "73.0");
        assert_eq!(percent_display(s.truncated_reasoning_rate()), "27.0");
    }

    #[test]
    fn all_valid_and_empty_input() {
        let s = compute_stats(&vec![parsed(TraceStatus::Valid); 5]).unwrap();
        assert_eq!(s.valid_reasoning_rate(), 1.0);
        assert_eq!(s.empty_reasoning_rate(), 0.0);
        assert_eq!(s.missing_reasoning_rate(), 0.0);
        assert_eq!(s.truncated_reasoning_rate(), 0.0);
        assert_eq!(compute_stats(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn eval_gsm8k_row() {
        let mut scores = vec![score(TraceStatus::Valid, true); 244];
        scores.extend(vec![score(TraceStatus::Valid, false); 8]);
        scores.extend(vec![score(TraceStatus::Truncated, false); 4]);
        let r = compute_eval(&scores, &EvalConfig::default()).unwrap();
        assert_eq!(percent_display(r.pass1), "95.3");
        assert_eq!(percent_display(r.rpass1.unwrap()), "96.8");
        assert_eq!(percent_display(r.stats.valid_reasoning_rate()), "98.4");
        for (m, i) in &r.ci {
            assert!(i.contains(r.value(*m).unwrap()), "{m}");
        }
    }

    #[test]
    fn suppression() {
        let mut scores = vec![score(TraceStatus::Valid, true); 4];
        scores.extend(vec![score(TraceStatus::Missing, true); 96]);
        let r = compute_eval(&scores, &EvalConfig::default()).unwrap();
        assert_eq!(r.rpass1, None);
        assert!(!r.ci.contains_key(&Metric::Rpass1));
    }

    #[test]
    fn perfect_run() {
        let scores = vec![score(TraceStatus::Valid, true); 50];
        let r = compute_eval(&scores, &EvalConfig::default()).unwrap();
        assert_eq!(r.pass1, 1.0);
        assert_eq!(r.rpass1, Some(1.0));
    }

    #[test]
    fn constant_zero_bootstrap() {
        let ci = bootstrap_ci(&[false; 40], 0.95, 2000, 1).unwrap();
        assert_eq!((ci.low, ci.high), (0.0, 0.0));
    }

    #[test]
    fn bootstrap_errors() {
        assert_eq!(bootstrap_ci(&[], 0.95, 2000, 1), Err(MetricsError::EmptyInput));
        assert_eq!(
            bootstrap_ci(&[true], 1.0, 2000, 1),
            Err(MetricsError::BadLevel(1.0))
        );
        assert_eq!(
            bootstrap_ci(&[true], 0.95, 10, 1),
            Err(MetricsError::TooFewResamples(10))
        );
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let v: Vec<bool> = (0..256).map(|i| i % 3 == 0).collect();
        let a = bootstrap_ci(&v, 0.95, 5000, 9).unwrap();
        let b = bootstrap_ci(&v, 0.95, 5000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let a = compute_stats(&[parsed(TraceStatus::Valid), parsed(TraceStatus::Empty)]).unwrap();
        let b = compute_stats(&[parsed(TraceStatus::Missing)]).unwrap();
        assert_eq!(merge_stats(&a, &TraceStats::default()), a);
        assert_eq!(merge_stats(&a, &b), merge_stats(&b, &a));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile_sorted(&[0.0, 1.0], 0.5), 0.5);
        assert_eq!(quantile_sorted(&[0.0, 1.0, 2.0], 1.0), 2.0);
        assert_eq!(quantile_sorted(&[3.0], 0.025), 3.0);
    }

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let draw = multinomial(&mut rng, 97, &[10, 0, 50, 37]);
            assert_eq!(draw.iter().sum::<u64>(), 97);
            assert_eq!(draw[1], 0);
        }
    }

    #[test]
    fn doc_round_trip() {
        let mut scores = vec![score(TraceStatus::Valid, true); 30];
        scores.extend(vec![score(TraceStatus::Empty, false); 3]);
        let r = compute_eval(&scores, &EvalConfig::default()).unwrap();
        let doc = MetricsDoc::from(&r);
        let json = serde_json::to_string(&doc).unwrap();
        let back: MetricsDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.eval_result().unwrap(), r);
    }

    #[test]
    fn suppressed_rpass1_serializes_null() {
        let scores = vec![score(TraceStatus::Missing, true); 30];
        let r = compute_eval(&scores, &EvalConfig::default()).unwrap();
        let json = serde_json::to_value(MetricsDoc::from(&r)).unwrap();
        assert!(json["rpass1"].is_null());
        assert!(json.as_object().unwrap().contains_key("rpass1"));
        let back: MetricsDoc = serde_json::from_value(json).unwrap();
        assert_eq!(back.eval_result().unwrap().rpass1, None);
    }
}
