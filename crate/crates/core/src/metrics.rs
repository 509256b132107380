//! Normalized segmental edit score, single-event accuracies and counting
//! statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::event::Event;
use crate::parse::{ParsedPrediction, SentenceMatches, Subclass};

/// One position of a predicted event sequence. An empty slot (an unparsable
/// sentence) never equals anything, including another empty slot, so
/// hallucinated sentences are penalized as insertions rather than dropped.
pub type EventSlot = Option<Event>;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and truth lists differ in length ({predictions} vs {truths})")]
    InputMisaligned { predictions: usize, truths: usize },
    #[error("statistics over an empty corpus are undefined")]
    EmptyCorpus,
}

fn slot_eq(a: &EventSlot, b: &EventSlot) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x == y)
}

/// Unit-cost edit distance with a caller-supplied equality, single-row DP.
pub fn levenshtein_by<T, F>(a: &[T], b: &[T], eq: F) -> usize
where
    F: Fn(&T, &T) -> bool,
{
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let tmp = row[j + 1];
            let sub = diag + usize::from(!eq(x, y));
            row[j + 1] = sub.min(tmp + 1).min(row[j] + 1);
            diag = tmp;
        }
    }
    row[b.len()]
}

/// Edit distance between event sequences, each event one atomic token.
pub fn levenshtein(a: &[EventSlot], b: &[EventSlot]) -> usize {
    levenshtein_by(a, b, slot_eq)
}

/// Normalized segmental edit score in [0, 100]:
/// `(1 - distance / longer length) * 100`. Two empty sequences score 100; the
/// formula's 0/0 there is resolved in favor of the perfect prediction.
pub fn edit_score(pred: &[EventSlot], truth: &[EventSlot]) -> f64 {
    let longer = pred.len().max(truth.len());
    if longer == 0 {
        return 100.0;
    }
    (1.0 - levenshtein(pred, truth) as f64 / longer as f64) * 100.0
}

pub fn slots_from_events(events: &[Event]) -> Vec<EventSlot> {
    events.iter().copied().map(Some).collect()
}

/// Per-sub-class accuracies, keyed e1..e5 in report output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubclassAccuracy {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
}

impl SubclassAccuracy {
    pub fn get(&self, subclass: Subclass) -> f64 {
        match subclass {
            Subclass::Actor => self.e1,
            Subclass::Hand => self.e2,
            Subclass::Shot => self.e3,
            Subclass::Direction => self.e4,
            Subclass::Outcome => self.e5,
        }
    }

    pub fn min(&self) -> f64 {
        self.e1.min(self.e2).min(self.e3).min(self.e4).min(self.e5)
    }
}

/// Accumulates per-sub-class and overall correctness, one truth event at a
/// time. The hand sub-class is vacuously correct when the truth is a serve.
#[derive(Debug, Default, Clone)]
pub struct AccuracyTally {
    correct: [usize; 5],
    overall_correct: usize,
    samples: usize,
}

impl AccuracyTally {
    pub fn new() -> AccuracyTally {
        AccuracyTally::default()
    }

    /// Scores one truth event against the sentence matched to it, if any.
    pub fn add_sample(&mut self, matches: Option<&SentenceMatches>, truth: &Event) {
        self.samples += 1;
        let mut all = true;
        for subclass in Subclass::ALL {
            let ok = subclass_correct(matches, truth, subclass);
            if ok {
                self.correct[subclass as usize] += 1;
            } else {
                all = false;
            }
        }
        if all {
            self.overall_correct += 1;
        }
    }

    pub fn finish(&self) -> (SubclassAccuracy, f64) {
        let frac = |c: usize| {
            if self.samples == 0 {
                0.0
            } else {
                c as f64 / self.samples as f64
            }
        };
        let acc = SubclassAccuracy {
            e1: frac(self.correct[0]),
            e2: frac(self.correct[1]),
            e3: frac(self.correct[2]),
            e4: frac(self.correct[3]),
            e5: frac(self.correct[4]),
        };
        (acc, frac(self.overall_correct))
    }
}

fn subclass_correct(matches: Option<&SentenceMatches>, truth: &Event, subclass: Subclass) -> bool {
    let Some(truth_label) = subclass.truth_label(truth) else {
        // only the hand of a serve: vacuously correct
        return true;
    };
    let Some(m) = matches else {
        return false;
    };
    m.get(subclass).matched_label() == Some(truth_label)
}

/// Accuracy of single-event predictions: a sub-class is correct when it
/// matched the truth's label unambiguously, the overall score when every
/// applicable sub-class is correct. Each prediction must hold exactly one
/// sentence; anything else counts as wrong on all sub-classes.
pub fn single_event_accuracy(
    parsed: &[ParsedPrediction],
    truths: &[Event],
) -> Result<(SubclassAccuracy, f64), MetricsError> {
    if parsed.len() != truths.len() {
        return Err(MetricsError::InputMisaligned {
            predictions: parsed.len(),
            truths: truths.len(),
        });
    }
    let mut tally = AccuracyTally::new();
    for (p, truth) in parsed.iter().zip(truths) {
        let sentence = match p.sentences.as_slice() {
            [only] => Some(only),
            _ => None,
        };
        tally.add_sample(sentence, truth);
    }
    Ok(tally.finish())
}

/// Event-counting statistics over a test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountStats {
    pub exact_match_accuracy: f64,
    pub mean_abs_diff: f64,
    pub mean_true_count: f64,
    pub sd_true_count: f64,
}

/// Compares predicted event counts against the truth. A missing prediction
/// never matches and contributes the full truth count to the mean absolute
/// difference. The standard deviation is the population one.
pub fn count_metrics(
    pred_counts: &[Option<u64>],
    true_counts: &[u64],
) -> Result<CountStats, MetricsError> {
    if pred_counts.len() != true_counts.len() {
        return Err(MetricsError::InputMisaligned {
            predictions: pred_counts.len(),
            truths: true_counts.len(),
        });
    }
    if true_counts.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = true_counts.len() as f64;
    let mut exact = 0usize;
    let mut abs_diff = 0.0;
    for (pred, truth) in pred_counts.iter().zip(true_counts) {
        match pred {
            Some(p) if p == truth => exact += 1,
            Some(p) => abs_diff += (*p as f64 - *truth as f64).abs(),
            None => abs_diff += *truth as f64,
        }
    }
    let mean = true_counts.iter().sum::<u64>() as f64 / n;
    let variance = true_counts
        .iter()
        .map(|t| {
            let d = *t as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(CountStats {
        exact_match_accuracy: exact as f64 / n,
        mean_abs_diff: abs_diff / n,
        mean_true_count: mean,
        sd_true_count: variance.sqrt(),
    })
}

/// Distribution of events-per-rally across a corpus. Quartiles use the
/// nearest-rank method, so they are always observed counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats {
    pub mean: f64,
    pub lower_quartile: u64,
    pub median: u64,
    pub upper_quartile: u64,
    pub max: u64,
}

pub fn corpus_stats(counts: &[u64]) -> Result<CorpusStats, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let nearest_rank = |pct: f64| {
        let rank = (pct / 100.0 * sorted.len() as f64).ceil() as usize;
        sorted[rank.max(1) - 1]
    };
    Ok(CorpusStats {
        mean: sorted.iter().sum::<u64>() as f64 / sorted.len() as f64,
        lower_quartile: nearest_rank(25.0),
        median: nearest_rank(50.0),
        upper_quartile: nearest_rank(75.0),
        max: *sorted.last().expect("non-empty"),
    })
}

/// Full evaluation report for a run: edit-score distribution, sub-class and
/// overall accuracies, and counting statistics.
///
/// `mean_edit_score` averages per-rally scores; `pooled_edit_score` instead
/// pools edits corpus-wide (total edits over total longer-lengths) and is
/// reported alongside as an alternate aggregation.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub per_rally_edit: BTreeMap<String, f64>,
    pub mean_edit_score: f64,
    pub pooled_edit_score: f64,
    pub subclass_accuracy: SubclassAccuracy,
    pub overall_accuracy: f64,
    pub count_stats: CountStats,
}

impl EvalReport {
    /// Plain-text tables for terminal display.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Edit score");
        let _ = writeln!(out, "  Rallies scored           : {}", self.per_rally_edit.len());
        let _ = writeln!(out, "  Mean edit score          : {:.2}", self.mean_edit_score);
        let _ = writeln!(out, "  Pooled edit score        : {:.2}", self.pooled_edit_score);
        let _ = writeln!(out);
        let _ = writeln!(out, "Sub-class accuracy");
        for subclass in Subclass::ALL {
            let _ = writeln!(
                out,
                "  {}                       : {:.2}",
                subclass.tag(),
                self.subclass_accuracy.get(subclass)
            );
        }
        let _ = writeln!(out, "  Overall                  : {:.2}", self.overall_accuracy);
        let _ = writeln!(out);
        let _ = writeln!(out, "Event counting");
        let _ = writeln!(
            out,
            "  Exact-match accuracy     : {:.2}",
            self.count_stats.exact_match_accuracy
        );
        let _ = writeln!(
            out,
            "  Mean absolute difference : {:.2}",
            self.count_stats.mean_abs_diff
        );
        let _ = writeln!(
            out,
            "  Mean true count          : {:.2}",
            self.count_stats.mean_true_count
        );
        let _ = writeln!(
            out,
            "  SD of true count         : {:.2}",
            self.count_stats.sd_true_count
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Actor, Direction, Event, Hand, Outcome, Shot};
    use crate::parse::AnswerParser;

    fn ev(i: usize) -> Event {
        // three distinct events for token tests
        match i {
            0 => Event::serve(Actor::Near, Direction::T, Outcome::In).unwrap(),
            1 => Event::rally(
                Actor::Far,
                Hand::Forehand,
                Shot::Return,
                Direction::CC,
                Outcome::In,
            )
            .unwrap(),
            _ => Event::rally(
                Actor::Near,
                Hand::Backhand,
                Shot::Stroke,
                Direction::DL,
                Outcome::Last,
            )
            .unwrap(),
        }
    }

    #[test]
    fn levenshtein_examples() {
        let x = Some(ev(0));
        let y = Some(ev(1));
        let z = Some(ev(2));
        assert_eq!(levenshtein(&[x, y, z], &[x, y, z]), 0);
        assert_eq!(levenshtein(&[], &[x, y, z, x]), 4);
        // frozen from the exhaustive recursive oracle in tests/levenshtein_oracle.rs
        assert_eq!(levenshtein(&[x, z], &[x, y, z]), 1);
    }

    #[test]
    fn empty_slots_never_match() {
        let x = Some(ev(0));
        assert_eq!(levenshtein(&[None], &[None]), 1);
        assert_eq!(levenshtein(&[None, x], &[x, x]), 1);
    }

    #[test]
    fn edit_score_examples() {
        let x = Some(ev(0));
        let y = Some(ev(1));
        let z = Some(ev(2));
        let five = vec![x, y, z, x, y];
        assert_eq!(edit_score(&five, &five), 100.0);
        assert_eq!(edit_score(&[], &[x, y, z, x]), 0.0);
        let score = edit_score(&[x, z], &[x, y, z]);
        assert!((score - 66.67).abs() < 0.01, "got {score}");
        assert_eq!(edit_score(&[], &[]), 100.0);
    }

    #[test]
    fn single_event_accuracy_perfect_and_flipped() {
        let parser = AnswerParser::new();
        let truths: Vec<Event> = (0..3).map(ev).collect();
        let parsed: Vec<_> = truths
            .iter()
            .map(|e| parser.parse_prediction(&crate::event::render_answer(e)))
            .collect();
        let (acc, overall) = single_event_accuracy(&parsed, &truths).unwrap();
        assert_eq!(overall, 1.0);
        for s in Subclass::ALL {
            assert_eq!(acc.get(s), 1.0);
        }

        // flip e1 on every sample
        let flipped: Vec<_> = truths
            .iter()
            .map(|e| {
                let other = Event::new(
                    e.actor().opponent(),
                    e.hand(),
                    e.shot(),
                    e.direction(),
                    e.outcome(),
                )
                .unwrap();
                parser.parse_prediction(&crate::event::render_answer(&other))
            })
            .collect();
        let (acc, overall) = single_event_accuracy(&flipped, &truths).unwrap();
        assert_eq!(acc.e1, 0.0);
        assert_eq!(acc.e2, 1.0);
        assert_eq!(acc.e3, 1.0);
        assert_eq!(acc.e4, 1.0);
        assert_eq!(acc.e5, 1.0);
        assert_eq!(overall, 0.0);
    }

    #[test]
    fn hand_is_vacuous_for_serve_truths() {
        let parser = AnswerParser::new();
        let truth = ev(0); // serve
        let parsed = vec![parser.parse_prediction("The near player hit a forehand T serve in.")];
        let (acc, overall) = single_event_accuracy(&parsed, &[truth]).unwrap();
        assert_eq!(acc.e2, 1.0);
        assert_eq!(overall, 1.0);
    }

    #[test]
    fn misaligned_inputs_error() {
        let err = single_event_accuracy(&[], &[ev(0)]).unwrap_err();
        assert!(matches!(err, MetricsError::InputMisaligned { .. }));
        let err = count_metrics(&[Some(1)], &[1, 2]).unwrap_err();
        assert!(matches!(err, MetricsError::InputMisaligned { .. }));
    }

    #[test]
    fn count_metrics_fixture() {
        // hand arithmetic: diffs 0, 1, 2; population SD of [3,3,6] = sqrt(2)
        let stats = count_metrics(&[Some(3), Some(4), Some(4)], &[3, 3, 6]).unwrap();
        assert!((stats.exact_match_accuracy - 1.0 / 3.0).abs() < 1e-9);
        assert!((stats.mean_abs_diff - 1.0).abs() < 1e-9);
        assert!((stats.mean_true_count - 4.0).abs() < 1e-9);
        assert!((stats.sd_true_count - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn count_metrics_missing_pred_contributes_truth() {
        let stats = count_metrics(&[None, Some(2)], &[4, 2]).unwrap();
        assert_eq!(stats.exact_match_accuracy, 0.5);
        assert_eq!(stats.mean_abs_diff, 2.0);
    }

    #[test]
    fn count_metrics_identical() {
        let stats = count_metrics(&[Some(2), Some(5)], &[2, 5]).unwrap();
        assert_eq!(stats.exact_match_accuracy, 1.0);
        assert_eq!(stats.mean_abs_diff, 0.0);
    }

    #[test]
    fn corpus_stats_small_example() {
        let stats = corpus_stats(&[1, 3, 5]).unwrap();
        assert_eq!(stats.mean, 3.0);
        assert_eq!(stats.lower_quartile, 1);
        assert_eq!(stats.median, 3);
        assert_eq!(stats.upper_quartile, 5);
        assert_eq!(stats.max, 5);
    }

    #[test]
    fn corpus_stats_reorder_invariant() {
        let a = corpus_stats(&[4, 1, 9, 2, 2, 7]).unwrap();
        let b = corpus_stats(&[9, 2, 4, 7, 2, 1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_stats_empty_errors() {
        assert!(matches!(
            corpus_stats(&[]),
            Err(MetricsError::EmptyCorpus)
        ));
    }
}
