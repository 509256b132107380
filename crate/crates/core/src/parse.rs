//! Parsing free-form model answers into per-sentence partial events.
//!
//! A sub-class counts as predicted when exactly one of its legal labels
//! appears in the sentence; a second distinct label of the same sub-class
//! makes it ambiguous. Matching is token-based and case-insensitive, except
//! the serve direction "T", which only matches as a standalone uppercase
//! token. Multiword direction phrases ("down the line", "inside in") are
//! matched longest-first and consume their tokens, so the "in" inside
//! "inside in" never leaks into the outcome sub-class.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Actor, Direction, Event, Hand, Outcome, Shot};

/// The five sub-classes of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subclass {
    #[serde(rename = "e1")]
    Actor,
    #[serde(rename = "e2")]
    Hand,
    #[serde(rename = "e3")]
    Shot,
    #[serde(rename = "e4")]
    Direction,
    #[serde(rename = "e5")]
    Outcome,
}

impl Subclass {
    pub const ALL: [Subclass; 5] = [
        Subclass::Actor,
        Subclass::Hand,
        Subclass::Shot,
        Subclass::Direction,
        Subclass::Outcome,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Subclass::Actor => "e1",
            Subclass::Hand => "e2",
            Subclass::Shot => "e3",
            Subclass::Direction => "e4",
            Subclass::Outcome => "e5",
        }
    }

    /// The canonical label the given event carries for this sub-class.
    /// `None` only for the hand of a serve.
    pub fn truth_label(self, e: &Event) -> Option<&'static str> {
        match self {
            Subclass::Actor => Some(e.actor().label()),
            Subclass::Hand => e.hand().map(Hand::label),
            Subclass::Shot => Some(e.shot().label()),
            Subclass::Direction => Some(e.direction().abbrev()),
            Subclass::Outcome => Some(e.outcome().label()),
        }
    }
}

impl fmt::Display for Subclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum MatchStatus {
    Matched(String),
    Missing,
    Ambiguous,
}

/// Outcome of matching one sub-class against one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubclassMatch {
    pub subclass: Subclass,
    pub status: MatchStatus,
    /// Distinct canonical labels found, in first-occurrence order.
    pub candidates_found: Vec<String>,
}

impl SubclassMatch {
    fn from_candidates(subclass: Subclass, candidates: Vec<String>) -> SubclassMatch {
        let status = match candidates.len() {
            0 => MatchStatus::Missing,
            1 => MatchStatus::Matched(candidates[0].clone()),
            _ => MatchStatus::Ambiguous,
        };
        SubclassMatch {
            subclass,
            status,
            candidates_found: candidates,
        }
    }

    pub fn is_matched(&self) -> bool {
        matches!(self.status, MatchStatus::Matched(_))
    }

    pub fn matched_label(&self) -> Option<&str> {
        match &self.status {
            MatchStatus::Matched(label) => Some(label),
            _ => None,
        }
    }
}

/// The five sub-class matches for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentenceMatches {
    matches: [SubclassMatch; 5],
}

impl SentenceMatches {
    pub fn get(&self, subclass: Subclass) -> &SubclassMatch {
        &self.matches[subclass as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SubclassMatch> {
        self.matches.iter()
    }
}

/// A whole parsed answer: per-sentence matches plus the event slot each
/// sentence resolved to. A slot is filled only when every applicable
/// sub-class matched and the combination is a valid event; otherwise it stays
/// empty and compares unequal to everything during scoring.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedPrediction {
    pub sentences: Vec<SentenceMatches>,
    pub events: Vec<Option<Event>>,
}

impl ParsedPrediction {
    pub fn slots(&self) -> &[Option<Event>] {
        &self.events
    }
}

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("alias target {0:?} is not a known sub-class label")]
    UnknownAliasTarget(String),
    #[error("alias surface {0:?} is empty after tokenization")]
    EmptyAliasSurface(String),
}

#[derive(Debug, Clone)]
struct Form {
    subclass: Subclass,
    canonical: String,
    /// Folded tokens, or the raw token for case-sensitive forms.
    tokens: Vec<String>,
    case_sensitive: bool,
}

/// Token-level matcher over the fixed sub-class label inventory.
///
/// The label universe is the taxonomy itself (both long and abbreviated
/// direction forms), not the observed vocabulary: "no other label appears"
/// must consider every label a model could emit. A small alias table
/// (by default just "crosscourt" for CC) can be extended via config.
#[derive(Debug, Clone)]
pub struct AnswerParser {
    forms: Vec<Form>,
}

pub const DEFAULT_ALIASES: [(&str, &str); 1] = [("crosscourt", "CC")];

fn standard_forms() -> Vec<Form> {
    let mut forms = Vec::new();
    let mut push = |subclass: Subclass, canonical: &str, surface: &str, case_sensitive: bool| {
        let tokens = if case_sensitive {
            surface.split_whitespace().map(str::to_owned).collect()
        } else {
            fold_tokens(surface)
        };
        forms.push(Form {
            subclass,
            canonical: canonical.to_owned(),
            tokens,
            case_sensitive,
        });
    };

    for actor in [Actor::Near, Actor::Far] {
        push(Subclass::Actor, actor.label(), actor.label(), false);
    }
    for hand in [Hand::Forehand, Hand::Backhand] {
        push(Subclass::Hand, hand.label(), hand.label(), false);
    }
    for shot in [Shot::Serve, Shot::Return, Shot::Stroke] {
        push(Subclass::Shot, shot.label(), shot.label(), false);
    }
    for dir in Direction::SERVE_DIRECTIONS
        .iter()
        .chain(Direction::RALLY_DIRECTIONS.iter())
    {
        // "T" pre-folding only: the answer form and the abbreviation coincide
        // and a folded "t" would collide with ordinary text.
        let case_sensitive = *dir == Direction::T;
        push(Subclass::Direction, dir.abbrev(), dir.abbrev(), case_sensitive);
        if dir.answer_form() != dir.abbrev() {
            push(Subclass::Direction, dir.abbrev(), dir.answer_form(), false);
        }
    }
    for outcome in [Outcome::In, Outcome::Last] {
        push(Subclass::Outcome, outcome.label(), outcome.label(), false);
    }
    forms
}

fn canonical_subclass(label: &str) -> Option<Subclass> {
    if Actor::from_label(label).is_some() {
        Some(Subclass::Actor)
    } else if Hand::from_label(label).is_some() {
        Some(Subclass::Hand)
    } else if Shot::from_label(label).is_some() {
        Some(Subclass::Shot)
    } else if Direction::from_abbrev(label).is_some() {
        Some(Subclass::Direction)
    } else if Outcome::from_label(label).is_some() {
        Some(Subclass::Outcome)
    } else {
        None
    }
}

impl Default for AnswerParser {
    fn default() -> AnswerParser {
        AnswerParser::new()
    }
}

impl AnswerParser {
    /// Parser over the standard label inventory plus the default alias table.
    pub fn new() -> AnswerParser {
        AnswerParser::with_aliases(
            DEFAULT_ALIASES
                .iter()
                .map(|(s, c)| ((*s).to_owned(), (*c).to_owned())),
        )
        .expect("default aliases are valid")
    }

    /// Parser with custom `(surface, canonical-label)` aliases replacing the
    /// default table.
    pub fn with_aliases(
        aliases: impl IntoIterator<Item = (String, String)>,
    ) -> Result<AnswerParser, ParserError> {
        let mut forms = standard_forms();
        for (surface, canonical) in aliases {
            let subclass = canonical_subclass(&canonical)
                .ok_or_else(|| ParserError::UnknownAliasTarget(canonical.clone()))?;
            let tokens = fold_tokens(&surface);
            if tokens.is_empty() {
                return Err(ParserError::EmptyAliasSurface(surface));
            }
            forms.push(Form {
                subclass,
                canonical,
                tokens,
                case_sensitive: false,
            });
        }
        // Longest phrases claim their tokens first; the sort is stable so
        // equal-length forms keep inventory order and matching stays
        // deterministic.
        forms.sort_by_key(|f| std::cmp::Reverse(f.tokens.len()));
        Ok(AnswerParser { forms })
    }

    /// Scans one sentence against every form, consuming tokens longest-first,
    /// and returns distinct canonical labels per sub-class ordered by first
    /// occurrence.
    fn scan(&self, sentence: &str) -> [Vec<String>; 5] {
        let tokens = tokenize(sentence);
        let mut used = vec![false; tokens.len()];
        let mut occurrences: [Vec<(usize, &str)>; 5] = Default::default();

        for form in &self.forms {
            let n = form.tokens.len();
            if n == 0 || n > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - n {
                if used[start..start + n].iter().any(|u| *u) {
                    continue;
                }
                let hit = (0..n).all(|k| {
                    let tok = &tokens[start + k];
                    if form.case_sensitive {
                        tok.raw == form.tokens[k]
                    } else {
                        tok.folded == form.tokens[k]
                    }
                });
                if hit {
                    used[start..start + n].iter_mut().for_each(|u| *u = true);
                    occurrences[form.subclass as usize].push((start, &form.canonical));
                }
            }
        }

        occurrences.map(|mut occ| {
            occ.sort_by_key(|(pos, _)| *pos);
            let mut labels: Vec<String> = Vec::new();
            for (_, canonical) in occ {
                if !labels.iter().any(|l| l == canonical) {
                    labels.push(canonical.to_owned());
                }
            }
            labels
        })
    }

    /// Matches one sub-class against a sentence, restricted to the given
    /// legal labels (surface or canonical forms; unknown labels are ignored).
    pub fn match_subclass(
        &self,
        sentence: &str,
        subclass: Subclass,
        labels: &[&str],
    ) -> SubclassMatch {
        let allowed: Vec<String> = labels
            .iter()
            .filter_map(|l| self.canonicalize_label(subclass, l))
            .collect();
        let found = self.scan(sentence)[subclass as usize]
            .iter()
            .filter(|c| allowed.iter().any(|a| a == *c))
            .cloned()
            .collect();
        SubclassMatch::from_candidates(subclass, found)
    }

    /// Resolves a surface or canonical label of the given sub-class to its
    /// canonical form.
    fn canonicalize_label(&self, subclass: Subclass, label: &str) -> Option<String> {
        let folded = fold_tokens(label);
        self.forms
            .iter()
            .filter(|f| f.subclass == subclass)
            .find(|f| {
                if f.case_sensitive {
                    label.split_whitespace().eq(f.tokens.iter().map(String::as_str))
                } else {
                    folded == f.tokens
                }
            })
            .map(|f| f.canonical.clone())
    }

    /// Parses one sentence into its five sub-class matches and the event the
    /// sentence resolves to, if any.
    pub fn parse_sentence(&self, sentence: &str) -> (SentenceMatches, Option<Event>) {
        let candidates = self.scan(sentence);
        let matches = SentenceMatches {
            matches: [
                SubclassMatch::from_candidates(Subclass::Actor, candidates[0].clone()),
                SubclassMatch::from_candidates(Subclass::Hand, candidates[1].clone()),
                SubclassMatch::from_candidates(Subclass::Shot, candidates[2].clone()),
                SubclassMatch::from_candidates(Subclass::Direction, candidates[3].clone()),
                SubclassMatch::from_candidates(Subclass::Outcome, candidates[4].clone()),
            ],
        };
        let event = event_from_matches(&matches);
        (matches, event)
    }

    /// Splits an answer into sentences and parses each one.
    pub fn parse_prediction(&self, text: &str) -> ParsedPrediction {
        let mut sentences = Vec::new();
        let mut events = Vec::new();
        for sentence in split_sentences(text) {
            let (matches, event) = self.parse_sentence(&sentence);
            sentences.push(matches);
            events.push(event);
        }
        ParsedPrediction { sentences, events }
    }
}

fn event_from_matches(m: &SentenceMatches) -> Option<Event> {
    let actor = Actor::from_label(m.get(Subclass::Actor).matched_label()?)?;
    let shot = Shot::from_label(m.get(Subclass::Shot).matched_label()?)?;
    let direction = Direction::from_abbrev(m.get(Subclass::Direction).matched_label()?)?;
    let outcome = Outcome::from_label(m.get(Subclass::Outcome).matched_label()?)?;
    // Serve answers carry no hand; a stray hand word is ignored rather than
    // penalized.
    let hand = match shot {
        Shot::Serve => None,
        _ => Some(Hand::from_label(m.get(Subclass::Hand).matched_label()?)?),
    };
    Event::new(actor, hand, shot, direction, outcome).ok()
}

struct Token<'a> {
    raw: &'a str,
    folded: String,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|raw| Token {
            raw,
            folded: raw.to_lowercase(),
        })
        .collect()
}

fn fold_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.folded).collect()
}

/// Splits text on '.', '!' and '?', trims whitespace and drops empty
/// fragments.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Extracts the answer to a counting prompt: the integer, if the text
/// contains exactly one maximal digit run.
pub fn parse_count_answer(text: &str) -> Option<u64> {
    let mut runs = text
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty());
    let first = runs.next()?;
    if runs.next().is_some() {
        return None;
    }
    first.parse().ok()
}

/// One prediction record, as exchanged on the wire and in prediction files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub rally_id: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum PredictionIoError {
    #[error("reading predictions: {0}")]
    Io(#[from] std::io::Error),
    #[error("predictions line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// Loads JSON-lines prediction records, one per test clip.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PredictionIoError> {
    let text = fs::read_to_string(path)?;
    parse_prediction_lines(&text)
}

pub fn parse_prediction_lines(text: &str) -> Result<Vec<PredictionRecord>, PredictionIoError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(line)
            .map_err(|source| PredictionIoError::Json { line: i + 1, source })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_predictions(
    path: &Path,
    records: &[PredictionRecord],
) -> Result<(), PredictionIoError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("prediction record serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::render_answer;

    fn parser() -> AnswerParser {
        AnswerParser::new()
    }

    #[test]
    fn split_sentences_examples() {
        assert_eq!(split_sentences("A. B."), vec!["A", "B"]);
        assert!(split_sentences("").is_empty());
        assert_eq!(
            split_sentences(
                "The near player hit a T serve in. The far player hit a forehand return last."
            )
            .len(),
            2
        );
        assert_eq!(split_sentences("One! Two? Three."), vec!["One", "Two", "Three"]);
        assert!(split_sentences(" .. !? ").is_empty());
    }

    #[test]
    fn match_subclass_examples() {
        let p = parser();
        let m = p.match_subclass(
            "The near player hit a T serve in",
            Subclass::Actor,
            &["near", "far"],
        );
        assert_eq!(m.status, MatchStatus::Matched("near".into()));

        let m = p.match_subclass(
            "The near player hit a forehand backhand stroke down the line in",
            Subclass::Hand,
            &["forehand", "backhand"],
        );
        assert_eq!(m.status, MatchStatus::Ambiguous);
        assert_eq!(m.candidates_found, vec!["forehand", "backhand"]);

        let m = p.match_subclass(
            "The player hit it somewhere",
            Subclass::Shot,
            &["serve", "return", "stroke"],
        );
        assert_eq!(m.status, MatchStatus::Missing);
    }

    #[test]
    fn serve_direction_is_case_sensitive() {
        let p = parser();
        let m = p.match_subclass("The near player hit a T serve in", Subclass::Direction, &["T"]);
        assert_eq!(m.status, MatchStatus::Matched("T".into()));
        let m = p.match_subclass("the near player hit a t serve in", Subclass::Direction, &["T"]);
        assert_eq!(m.status, MatchStatus::Missing);
        // "The" must not match "T"
        let m = p.match_subclass("The ball went out", Subclass::Direction, &["T"]);
        assert_eq!(m.status, MatchStatus::Missing);
    }

    #[test]
    fn token_boundaries_protect_outcome_in() {
        let p = parser();
        let m = p.match_subclass(
            "winner inside the line",
            Subclass::Outcome,
            &["in", "last"],
        );
        assert_eq!(m.status, MatchStatus::Missing);
    }

    #[test]
    fn inside_in_does_not_leak_into_outcome() {
        let p = parser();
        let sentence = "The near player hit a forehand inside in stroke last";
        let m = p.match_subclass(sentence, Subclass::Outcome, &["in", "last"]);
        assert_eq!(m.status, MatchStatus::Matched("last".into()));
        let m = p.match_subclass(sentence, Subclass::Direction, &["II", "IO", "CC", "DL", "DM"]);
        assert_eq!(m.status, MatchStatus::Matched("II".into()));
    }

    #[test]
    fn abbreviation_and_long_form_are_one_candidate() {
        let p = parser();
        let m = p.match_subclass(
            "a CC cross-court return",
            Subclass::Direction,
            &["CC", "cross-court", "DL"],
        );
        assert_eq!(m.status, MatchStatus::Matched("CC".into()));
    }

    #[test]
    fn default_alias_crosscourt() {
        let p = parser();
        let m = p.match_subclass(
            "The far player hit a forehand crosscourt return in",
            Subclass::Direction,
            &["CC", "DL"],
        );
        assert_eq!(m.status, MatchStatus::Matched("CC".into()));
    }

    #[test]
    fn parse_prediction_examples() {
        let p = parser();
        let parsed = p.parse_prediction("The near player hit a T serve in.");
        assert_eq!(parsed.events.len(), 1);
        let e = parsed.events[0].unwrap();
        assert_eq!(e.actor(), Actor::Near);
        assert_eq!(e.hand(), None);
        assert_eq!(e.shot(), Shot::Serve);
        assert_eq!(e.direction(), Direction::T);
        assert_eq!(e.outcome(), Outcome::In);

        let parsed = p.parse_prediction("The weather is nice.");
        assert_eq!(parsed.events, vec![None]);
        assert_eq!(parsed.sentences.len(), 1);
    }

    #[test]
    fn parse_round_trips_a_rally() {
        let p = parser();
        let events = vec![
            Event::serve(Actor::Near, Direction::T, Outcome::In).unwrap(),
            Event::rally(
                Actor::Far,
                Hand::Forehand,
                Shot::Return,
                Direction::CC,
                Outcome::In,
            )
            .unwrap(),
            Event::rally(
                Actor::Near,
                Hand::Backhand,
                Shot::Stroke,
                Direction::II,
                Outcome::Last,
            )
            .unwrap(),
        ];
        let answer = crate::event::render_sequence_answer(&events).unwrap();
        let parsed = p.parse_prediction(&answer);
        assert_eq!(parsed.events.len(), 3);
        for (slot, truth) in parsed.events.iter().zip(&events) {
            assert_eq!(slot.as_ref(), Some(truth));
        }
    }

    #[test]
    fn stray_hand_in_serve_sentence_is_ignored() {
        let p = parser();
        let parsed = p.parse_prediction("The near player hit a forehand T serve in.");
        let e = parsed.events[0].unwrap();
        assert_eq!(e.shot(), Shot::Serve);
        assert_eq!(e.hand(), None);
    }

    #[test]
    fn invalid_combination_leaves_slot_empty() {
        let p = parser();
        // serve with a rally direction cannot form a valid event
        let parsed = p.parse_prediction("The near player hit a cross-court serve in.");
        assert_eq!(parsed.events, vec![None]);
    }

    #[test]
    fn ambiguous_subclass_leaves_slot_empty() {
        let p = parser();
        let parsed =
            p.parse_prediction("The near far player hit a forehand cross-court return in.");
        assert_eq!(parsed.events, vec![None]);
        assert_eq!(
            parsed.sentences[0].get(Subclass::Actor).status,
            MatchStatus::Ambiguous
        );
    }

    #[test]
    fn frame_numbered_sentence_still_parses() {
        let e = Event::serve(Actor::Near, Direction::T, Outcome::In).unwrap();
        let sentence = format!(
            "{} in frame 120.",
            render_answer(&e).trim_end_matches('.')
        );
        let p = parser();
        let parsed = p.parse_prediction(&sentence);
        assert_eq!(parsed.events[0], Some(e));
    }

    #[test]
    fn parse_count_answer_examples() {
        assert_eq!(parse_count_answer("7"), Some(7));
        assert_eq!(parse_count_answer("There are 12 actions"), Some(12));
        assert_eq!(parse_count_answer("3 or 4"), None);
        assert_eq!(parse_count_answer("none"), None);
        assert_eq!(parse_count_answer(""), None);
    }

    #[test]
    fn alias_target_must_be_known() {
        let err = AnswerParser::with_aliases([("zig".to_owned(), "ZZ".to_owned())]).unwrap_err();
        assert!(matches!(err, ParserError::UnknownAliasTarget(_)));
    }

    #[test]
    fn prediction_lines_round_trip() {
        let text = "{\"rally_id\":\"r1\",\"text\":\"hello\"}\n{\"rally_id\":\"r2\",\"text\":\"\"}\n";
        let records = parse_prediction_lines(text).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].rally_id, "r1");
        assert_eq!(records[1].text, "");
    }
}
