//! Event taxonomy, canonical answer rendering and rally structure checks.
//!
//! A rally is an ordered sequence of shots; each shot is described by five
//! sub-classes: which player hit it (e1), forehand/backhand (e2), the shot
//! type (e3), the shot direction (e4) and the outcome (e5). Serves carry no
//! hand sub-class and use their own direction set.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which player hit the ball (e1), relative to the broadcast camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Near,
    Far,
}

impl Actor {
    pub fn label(self) -> &'static str {
        match self {
            Actor::Near => "near",
            Actor::Far => "far",
        }
    }

    pub fn opponent(self) -> Actor {
        match self {
            Actor::Near => Actor::Far,
            Actor::Far => Actor::Near,
        }
    }

    pub fn from_label(s: &str) -> Option<Actor> {
        match s {
            "near" => Some(Actor::Near),
            "far" => Some(Actor::Far),
            _ => None,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How the ball was hit (e2). Absent for serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Forehand,
    Backhand,
}

impl Hand {
    pub fn label(self) -> &'static str {
        match self {
            Hand::Forehand => "forehand",
            Hand::Backhand => "backhand",
        }
    }

    pub fn from_label(s: &str) -> Option<Hand> {
        match s {
            "forehand" => Some(Hand::Forehand),
            "backhand" => Some(Hand::Backhand),
            _ => None,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Shot type (e3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shot {
    Serve,
    Return,
    Stroke,
}

impl Shot {
    pub fn label(self) -> &'static str {
        match self {
            Shot::Serve => "serve",
            Shot::Return => "return",
            Shot::Stroke => "stroke",
        }
    }

    pub fn from_label(s: &str) -> Option<Shot> {
        match s {
            "serve" => Some(Shot::Serve),
            "return" => Some(Shot::Return),
            "stroke" => Some(Shot::Stroke),
            _ => None,
        }
    }
}

impl fmt::Display for Shot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Shot direction (e4). `T`, `B` and `W` apply to serves; the rest apply to
/// returns and strokes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    T,
    #[serde(alias = "body")]
    B,
    #[serde(alias = "wide")]
    W,
    #[serde(alias = "cross-court")]
    CC,
    #[serde(alias = "down the line")]
    DL,
    #[serde(alias = "down the middle")]
    DM,
    #[serde(alias = "inside out")]
    IO,
    #[serde(alias = "inside in")]
    II,
}

impl Direction {
    pub const SERVE_DIRECTIONS: [Direction; 3] = [Direction::T, Direction::B, Direction::W];
    pub const RALLY_DIRECTIONS: [Direction; 5] = [
        Direction::CC,
        Direction::DL,
        Direction::DM,
        Direction::IO,
        Direction::II,
    ];

    pub fn is_serve_direction(self) -> bool {
        matches!(self, Direction::T | Direction::B | Direction::W)
    }

    /// The abbreviated label, used as the canonical form throughout.
    pub fn abbrev(self) -> &'static str {
        match self {
            Direction::T => "T",
            Direction::B => "B",
            Direction::W => "W",
            Direction::CC => "CC",
            Direction::DL => "DL",
            Direction::DM => "DM",
            Direction::IO => "IO",
            Direction::II => "II",
        }
    }

    /// The wording used inside answer sentences: serve directions keep their
    /// short names, rally directions are spelled out.
    pub fn answer_form(self) -> &'static str {
        match self {
            Direction::T => "T",
            Direction::B => "body",
            Direction::W => "wide",
            Direction::CC => "cross-court",
            Direction::DL => "down the line",
            Direction::DM => "down the middle",
            Direction::IO => "inside out",
            Direction::II => "inside in",
        }
    }

    pub fn from_abbrev(s: &str) -> Option<Direction> {
        match s {
            "T" => Some(Direction::T),
            "B" => Some(Direction::B),
            "W" => Some(Direction::W),
            "CC" => Some(Direction::CC),
            "DL" => Some(Direction::DL),
            "DM" => Some(Direction::DM),
            "IO" => Some(Direction::IO),
            "II" => Some(Direction::II),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// Shot outcome (e5): the ball stayed in play, or this was the point-ending
/// shot of the rally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    In,
    Last,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::In => "in",
            Outcome::Last => "last",
        }
    }

    pub fn from_label(s: &str) -> Option<Outcome> {
        match s {
            "in" => Some(Outcome::In),
            "last" => Some(Outcome::Last),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("a serve carries no hand sub-class")]
    ServeWithHand,
    #[error("serve direction must be T, B or W, got {0}")]
    ServeDirection(Direction),
    #[error("{0} events require a hand sub-class")]
    MissingHand(Shot),
    #[error("{shot} direction must be CC, DL, DM, IO or II, got {direction}")]
    RallyDirection { shot: Shot, direction: Direction },
    #[error("event sequence is empty")]
    EmptySequence,
}

/// One shot in a rally, described by the five sub-classes.
///
/// Construction goes through [`Event::new`], which rejects combinations that
/// break the taxonomy (a serve with a hand or a rally direction, a stroke
/// without a hand, ...), so every live `Event` is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawEvent", into = "RawEvent")]
pub struct Event {
    actor: Actor,
    hand: Option<Hand>,
    shot: Shot,
    direction: Direction,
    outcome: Outcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawEvent {
    actor: Actor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hand: Option<Hand>,
    shot: Shot,
    direction: Direction,
    outcome: Outcome,
}

impl TryFrom<RawEvent> for Event {
    type Error = EventError;

    fn try_from(raw: RawEvent) -> Result<Event, EventError> {
        Event::new(raw.actor, raw.hand, raw.shot, raw.direction, raw.outcome)
    }
}

impl From<Event> for RawEvent {
    fn from(e: Event) -> RawEvent {
        RawEvent {
            actor: e.actor,
            hand: e.hand,
            shot: e.shot,
            direction: e.direction,
            outcome: e.outcome,
        }
    }
}

impl Event {
    pub fn new(
        actor: Actor,
        hand: Option<Hand>,
        shot: Shot,
        direction: Direction,
        outcome: Outcome,
    ) -> Result<Event, EventError> {
        match shot {
            Shot::Serve => {
                if hand.is_some() {
                    return Err(EventError::ServeWithHand);
                }
                if !direction.is_serve_direction() {
                    return Err(EventError::ServeDirection(direction));
                }
            }
            Shot::Return | Shot::Stroke => {
                if hand.is_none() {
                    return Err(EventError::MissingHand(shot));
                }
                if direction.is_serve_direction() {
                    return Err(EventError::RallyDirection { shot, direction });
                }
            }
        }
        Ok(Event {
            actor,
            hand,
            shot,
            direction,
            outcome,
        })
    }

    pub fn serve(actor: Actor, direction: Direction, outcome: Outcome) -> Result<Event, EventError> {
        Event::new(actor, None, Shot::Serve, direction, outcome)
    }

    pub fn rally(
        actor: Actor,
        hand: Hand,
        shot: Shot,
        direction: Direction,
        outcome: Outcome,
    ) -> Result<Event, EventError> {
        Event::new(actor, Some(hand), shot, direction, outcome)
    }

    pub fn actor(&self) -> Actor {
        self.actor
    }

    pub fn hand(&self) -> Option<Hand> {
        self.hand
    }

    pub fn shot(&self) -> Shot {
        self.shot
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }
}

/// Renders the canonical single-event answer sentence.
///
/// Non-serves read "The {actor} player hit a {hand} {direction} {shot}
/// {outcome}." with the direction spelled out; serves drop the hand slot and
/// use the short direction names, e.g. "The near player hit a T serve in."
pub fn render_answer(e: &Event) -> String {
    match e.hand {
        Some(hand) => format!(
            "The {} player hit a {} {} {} {}.",
            e.actor,
            hand,
            e.direction.answer_form(),
            e.shot,
            e.outcome
        ),
        None => format!(
            "The {} player hit a {} {} {}.",
            e.actor,
            e.direction.answer_form(),
            e.shot,
            e.outcome
        ),
    }
}

/// Concatenates the per-event sentences of a rally, joined by single spaces.
pub fn render_sequence_answer(events: &[Event]) -> Result<String, EventError> {
    if events.is_empty() {
        return Err(EventError::EmptySequence);
    }
    Ok(events
        .iter()
        .map(render_answer)
        .collect::<Vec<_>>()
        .join(" "))
}

/// An event pinned to the frame it occurs in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub frame: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("rally {rally_id}: events list is empty")]
    NoEvents { rally_id: String },
    #[error("rally {rally_id}: event frame {frame} outside window {start}..={end}")]
    FrameOutOfWindow {
        rally_id: String,
        frame: u64,
        start: u64,
        end: u64,
    },
    #[error("rally {rally_id}: event frames must be strictly increasing ({prev} then {next})")]
    NonIncreasingFrames {
        rally_id: String,
        prev: u64,
        next: u64,
    },
    #[error("duplicate rally id {0}")]
    DuplicateRallyId(String),
    #[error("reading annotations: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing annotations: {0}")]
    Json(#[from] serde_json::Error),
}

/// One annotated rally: a clip reference, the rally's frame range and the
/// ordered, frame-stamped event list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRally")]
pub struct RallyAnnotation {
    rally_id: String,
    clip: String,
    fps: f64,
    start_frame: u64,
    end_frame: u64,
    events: Vec<TimedEvent>,
}

#[derive(Debug, Deserialize)]
struct RawRally {
    rally_id: String,
    clip: String,
    fps: f64,
    start_frame: u64,
    end_frame: u64,
    events: Vec<TimedEvent>,
}

impl TryFrom<RawRally> for RallyAnnotation {
    type Error = AnnotationError;

    fn try_from(raw: RawRally) -> Result<RallyAnnotation, AnnotationError> {
        RallyAnnotation::new(
            raw.rally_id,
            raw.clip,
            raw.fps,
            raw.start_frame,
            raw.end_frame,
            raw.events,
        )
    }
}

impl RallyAnnotation {
    pub fn new(
        rally_id: String,
        clip: String,
        fps: f64,
        start_frame: u64,
        end_frame: u64,
        events: Vec<TimedEvent>,
    ) -> Result<RallyAnnotation, AnnotationError> {
        if events.is_empty() {
            return Err(AnnotationError::NoEvents { rally_id });
        }
        let mut prev: Option<u64> = None;
        for te in &events {
            if te.frame < start_frame || te.frame > end_frame {
                return Err(AnnotationError::FrameOutOfWindow {
                    rally_id,
                    frame: te.frame,
                    start: start_frame,
                    end: end_frame,
                });
            }
            if let Some(p) = prev {
                if te.frame <= p {
                    return Err(AnnotationError::NonIncreasingFrames {
                        rally_id,
                        prev: p,
                        next: te.frame,
                    });
                }
            }
            prev = Some(te.frame);
        }
        Ok(RallyAnnotation {
            rally_id,
            clip,
            fps,
            start_frame,
            end_frame,
            events,
        })
    }

    pub fn rally_id(&self) -> &str {
        &self.rally_id
    }

    pub fn clip(&self) -> &str {
        &self.clip
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn start_frame(&self) -> u64 {
        self.start_frame
    }

    pub fn end_frame(&self) -> u64 {
        self.end_frame
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// The events without their frame stamps, in rally order.
    pub fn event_list(&self) -> Vec<Event> {
        self.events.iter().map(|te| te.event).collect()
    }
}

/// Loads a JSON array of rally annotations and rejects duplicate rally ids.
pub fn load_annotations(path: &Path) -> Result<Vec<RallyAnnotation>, AnnotationError> {
    let text = fs::read_to_string(path)?;
    let rallies: Vec<RallyAnnotation> = serde_json::from_str(&text)?;
    let mut seen = BTreeSet::new();
    for r in &rallies {
        if !seen.insert(r.rally_id.clone()) {
            return Err(AnnotationError::DuplicateRallyId(r.rally_id.clone()));
        }
    }
    Ok(rallies)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabularySource {
    DerivedFromAnnotations,
    ExplicitList,
}

/// The set of distinct valid events seen in (or declared for) a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventVocabulary {
    entries: BTreeSet<Event>,
    source: VocabularySource,
}

impl EventVocabulary {
    pub fn derive(annotations: &[RallyAnnotation]) -> EventVocabulary {
        let entries = annotations
            .iter()
            .flat_map(|r| r.events.iter().map(|te| te.event))
            .collect();
        EventVocabulary {
            entries,
            source: VocabularySource::DerivedFromAnnotations,
        }
    }

    pub fn explicit(events: impl IntoIterator<Item = Event>) -> EventVocabulary {
        EventVocabulary {
            entries: events.into_iter().collect(),
            source: VocabularySource::ExplicitList,
        }
    }

    pub fn source(&self) -> VocabularySource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, e: &Event) -> bool {
        self.entries.contains(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.entries.iter()
    }
}

/// Collects the distinct events observed across a set of annotations.
pub fn build_vocabulary(annotations: &[RallyAnnotation]) -> EventVocabulary {
    EventVocabulary::derive(annotations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// The first event of the rally is not a serve.
    NotServeFirst,
    /// The final event's outcome is not `last`.
    NotLastAtEnd,
    /// A non-final event carries the `last` outcome.
    PrematureLast,
    /// Two consecutive events share an actor.
    AlternationBroken,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::NotServeFirst => "NotServeFirst",
            ViolationKind::NotLastAtEnd => "NotLastAtEnd",
            ViolationKind::PrematureLast => "PrematureLast",
            ViolationKind::AlternationBroken => "AlternationBroken",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.index)
    }
}

/// Checks a rally's structural regularities: it must open with a serve, close
/// with (and only with) a `last` outcome, and alternate actors shot by shot.
/// Returns one violation per broken rule, tagged with the offending index.
pub fn validate_rally(events: &[Event]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let Some(first) = events.first() else {
        return violations;
    };
    if first.shot() != Shot::Serve {
        violations.push(Violation {
            kind: ViolationKind::NotServeFirst,
            index: 0,
        });
    }
    let last_index = events.len() - 1;
    if events[last_index].outcome() != Outcome::Last {
        violations.push(Violation {
            kind: ViolationKind::NotLastAtEnd,
            index: last_index,
        });
    }
    for (i, e) in events[..last_index].iter().enumerate() {
        if e.outcome() == Outcome::Last {
            violations.push(Violation {
                kind: ViolationKind::PrematureLast,
                index: i,
            });
        }
    }
    for (i, pair) in events.windows(2).enumerate() {
        if pair[0].actor() == pair[1].actor() {
            violations.push(Violation {
                kind: ViolationKind::AlternationBroken,
                index: i + 1,
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn serve(actor: Actor, dir: Direction, outcome: Outcome) -> Event {
        Event::serve(actor, dir, outcome).unwrap()
    }

    fn rally(actor: Actor, hand: Hand, shot: Shot, dir: Direction, outcome: Outcome) -> Event {
        Event::rally(actor, hand, shot, dir, outcome).unwrap()
    }

    #[test]
    fn render_serve_answer() {
        let e = serve(Actor::Near, Direction::T, Outcome::In);
        assert_eq!(render_answer(&e), "The near player hit a T serve in.");
    }

    #[test]
    fn render_rally_answers() {
        let e = rally(
            Actor::Far,
            Hand::Forehand,
            Shot::Return,
            Direction::CC,
            Outcome::Last,
        );
        assert_eq!(
            render_answer(&e),
            "The far player hit a forehand cross-court return last."
        );
        let e = rally(
            Actor::Near,
            Hand::Backhand,
            Shot::Stroke,
            Direction::DL,
            Outcome::In,
        );
        assert_eq!(
            render_answer(&e),
            "The near player hit a backhand down the line stroke in."
        );
    }

    #[test]
    fn render_serve_wide_and_body() {
        let e = serve(Actor::Far, Direction::W, Outcome::In);
        assert_eq!(render_answer(&e), "The far player hit a wide serve in.");
        let e = serve(Actor::Far, Direction::B, Outcome::Last);
        assert_eq!(render_answer(&e), "The far player hit a body serve last.");
    }

    #[test]
    fn sequence_answer_joins_sentences() {
        let events = vec![
            serve(Actor::Near, Direction::T, Outcome::In),
            rally(
                Actor::Far,
                Hand::Forehand,
                Shot::Return,
                Direction::CC,
                Outcome::Last,
            ),
        ];
        assert_eq!(
            render_sequence_answer(&events).unwrap(),
            "The near player hit a T serve in. The far player hit a forehand cross-court return last."
        );
        assert_eq!(
            render_sequence_answer(&events[..1]).unwrap(),
            render_answer(&events[0])
        );
        assert_eq!(
            render_sequence_answer(&[]),
            Err(EventError::EmptySequence)
        );
    }

    #[test]
    fn invalid_combinations_are_unconstructible() {
        assert_eq!(
            Event::new(
                Actor::Near,
                Some(Hand::Forehand),
                Shot::Serve,
                Direction::T,
                Outcome::In
            ),
            Err(EventError::ServeWithHand)
        );
        assert_eq!(
            Event::serve(Actor::Near, Direction::CC, Outcome::In),
            Err(EventError::ServeDirection(Direction::CC))
        );
        assert_eq!(
            Event::new(Actor::Near, None, Shot::Return, Direction::CC, Outcome::In),
            Err(EventError::MissingHand(Shot::Return))
        );
        assert_eq!(
            Event::rally(
                Actor::Near,
                Hand::Forehand,
                Shot::Stroke,
                Direction::W,
                Outcome::In
            ),
            Err(EventError::RallyDirection {
                shot: Shot::Stroke,
                direction: Direction::W
            })
        );
    }

    #[test]
    fn validate_well_formed_rally() {
        let events = vec![
            serve(Actor::Near, Direction::T, Outcome::In),
            rally(
                Actor::Far,
                Hand::Forehand,
                Shot::Return,
                Direction::CC,
                Outcome::In,
            ),
            rally(
                Actor::Near,
                Hand::Backhand,
                Shot::Stroke,
                Direction::DL,
                Outcome::Last,
            ),
        ];
        assert!(validate_rally(&events).is_empty());
    }

    #[test]
    fn validate_flags_each_rule() {
        let ret = rally(
            Actor::Near,
            Hand::Forehand,
            Shot::Return,
            Direction::CC,
            Outcome::Last,
        );
        let v = validate_rally(&[ret]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::NotServeFirst);
        assert_eq!(v[0].index, 0);

        let events = vec![
            serve(Actor::Near, Direction::T, Outcome::In),
            rally(
                Actor::Near,
                Hand::Forehand,
                Shot::Return,
                Direction::CC,
                Outcome::Last,
            ),
        ];
        let v = validate_rally(&events);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::AlternationBroken);
        assert_eq!(v[0].index, 1);

        let events = vec![
            serve(Actor::Near, Direction::T, Outcome::Last),
            rally(
                Actor::Far,
                Hand::Forehand,
                Shot::Return,
                Direction::CC,
                Outcome::In,
            ),
        ];
        let v = validate_rally(&events);
        assert!(v
            .iter()
            .any(|x| x.kind == ViolationKind::NotLastAtEnd && x.index == 1));
        assert!(v
            .iter()
            .any(|x| x.kind == ViolationKind::PrematureLast && x.index == 0));
    }

    #[test]
    fn vocabulary_deduplicates() {
        let e = serve(Actor::Near, Direction::T, Outcome::In);
        let r1 = RallyAnnotation::new(
            "a".into(),
            "a.mp4".into(),
            25.0,
            0,
            100,
            vec![TimedEvent { frame: 10, event: e }],
        )
        .unwrap();
        let r2 = RallyAnnotation::new(
            "b".into(),
            "b.mp4".into(),
            25.0,
            0,
            100,
            vec![TimedEvent { frame: 20, event: e }],
        )
        .unwrap();
        let vocab = build_vocabulary(&[r1, r2]);
        assert_eq!(vocab.len(), 1);
        assert!(vocab.contains(&e));
        assert_eq!(vocab.source(), VocabularySource::DerivedFromAnnotations);
        assert_eq!(build_vocabulary(&[]).len(), 0);
    }

    #[test]
    fn explicit_vocabulary_round_trips() {
        let e = serve(Actor::Near, Direction::T, Outcome::In);
        let vocab = EventVocabulary::explicit([e, e]);
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.source(), VocabularySource::ExplicitList);
        let json = serde_json::to_string(&vocab).unwrap();
        let back: EventVocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vocab);
    }

    #[test]
    fn annotation_json_round_trip() {
        let json = r#"{
            "rally_id": "r1",
            "clip": "clips/r1.mp4",
            "fps": 25.0,
            "start_frame": 80,
            "end_frame": 300,
            "events": [
                {"frame": 100, "actor": "near", "shot": "serve", "direction": "T", "outcome": "in"},
                {"frame": 160, "actor": "far", "hand": "forehand", "shot": "return", "direction": "CC", "outcome": "last"}
            ]
        }"#;
        let r: RallyAnnotation = serde_json::from_str(json).unwrap();
        assert_eq!(r.rally_id(), "r1");
        assert_eq!(r.event_count(), 2);
        assert_eq!(r.events()[0].event.shot(), Shot::Serve);
        assert_eq!(r.events()[0].event.hand(), None);
        assert_eq!(r.events()[1].event.direction(), Direction::CC);

        // serialization omits the hand field for serves
        let back = serde_json::to_value(&r).unwrap();
        assert!(back["events"][0].get("hand").is_none());
        assert_eq!(back["events"][1]["hand"], "forehand");
        let again: RallyAnnotation = serde_json::from_value(back).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn annotation_accepts_long_direction_forms() {
        let json = r#"{"frame": 5, "actor": "far", "hand": "backhand", "shot": "stroke", "direction": "down the line", "outcome": "in"}"#;
        let te: TimedEvent = serde_json::from_str(json).unwrap();
        assert_eq!(te.event.direction(), Direction::DL);
    }

    #[test]
    fn annotation_invariants_enforced() {
        let e = serve(Actor::Near, Direction::T, Outcome::In);
        let err = RallyAnnotation::new("r".into(), "c".into(), 25.0, 0, 100, vec![]).unwrap_err();
        assert!(matches!(err, AnnotationError::NoEvents { .. }));

        let err = RallyAnnotation::new(
            "r".into(),
            "c".into(),
            25.0,
            50,
            100,
            vec![TimedEvent { frame: 10, event: e }],
        )
        .unwrap_err();
        assert!(matches!(err, AnnotationError::FrameOutOfWindow { .. }));

        let err = RallyAnnotation::new(
            "r".into(),
            "c".into(),
            25.0,
            0,
            100,
            vec![
                TimedEvent { frame: 20, event: e },
                TimedEvent { frame: 20, event: e },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, AnnotationError::NonIncreasingFrames { .. }));
    }
}
