//! Deterministic synthetic corpora for tests, benchmarks and demos. No RNG:
//! everything is a fixed function of the indices.

use crate::event::{
    Actor, Direction, Event, Hand, Outcome, RallyAnnotation, Shot, TimedEvent,
};

/// Every event the taxonomy admits: 12 serve combinations plus 80 rally
/// combinations.
pub fn all_valid_events() -> Vec<Event> {
    let mut events = Vec::new();
    for actor in [Actor::Near, Actor::Far] {
        for direction in Direction::SERVE_DIRECTIONS {
            for outcome in [Outcome::In, Outcome::Last] {
                events.push(Event::serve(actor, direction, outcome).expect("valid serve"));
            }
        }
    }
    for actor in [Actor::Near, Actor::Far] {
        for hand in [Hand::Forehand, Hand::Backhand] {
            for shot in [Shot::Return, Shot::Stroke] {
                for direction in Direction::RALLY_DIRECTIONS {
                    for outcome in [Outcome::In, Outcome::Last] {
                        events.push(
                            Event::rally(actor, hand, shot, direction, outcome)
                                .expect("valid rally event"),
                        );
                    }
                }
            }
        }
    }
    events
}

/// A structurally valid rally with `event_count` events. The index varies
/// the serving player, directions and hands so corpora cover the vocabulary.
pub fn synthetic_rally(index: usize, event_count: usize) -> RallyAnnotation {
    assert!(event_count >= 1, "a rally has at least one event");
    let server = if index.is_multiple_of(2) {
        Actor::Near
    } else {
        Actor::Far
    };
    let serve_direction = Direction::SERVE_DIRECTIONS[index % 3];

    let mut events = Vec::with_capacity(event_count);
    for i in 0..event_count {
        let last = i == event_count - 1;
        let outcome = if last { Outcome::Last } else { Outcome::In };
        let actor = if i % 2 == 0 { server } else { server.opponent() };
        let event = if i == 0 {
            Event::serve(actor, serve_direction, outcome).expect("valid serve")
        } else {
            let hand = [Hand::Forehand, Hand::Backhand][(index + i) % 2];
            let shot = if i == 1 { Shot::Return } else { Shot::Stroke };
            let direction = Direction::RALLY_DIRECTIONS[(index + i) % 5];
            Event::rally(actor, hand, shot, direction, outcome).expect("valid rally event")
        };
        events.push(TimedEvent {
            frame: 100 + 30 * i as u64,
            event,
        });
    }

    let end_frame = events.last().expect("non-empty").frame + 50;
    RallyAnnotation::new(
        format!("r{index:04}"),
        format!("clips/r{index:04}.mp4"),
        25.0,
        60,
        end_frame,
        events,
    )
    .expect("synthetic rally is valid")
}

/// `rally_count` valid rallies with event counts cycling 1..=8.
pub fn synthetic_corpus(rally_count: usize) -> Vec<RallyAnnotation> {
    (0..rally_count)
        .map(|i| synthetic_rally(i, (i % 8) + 1))
        .collect()
}

/// Ten rallies whose event counts are [1, 2, 3, 3, 4, 5, 5, 6, 8, 13]:
/// mean 5.0, lower quartile 3, median 4, upper quartile 6, maximum 13.
pub fn stats_fixture_corpus() -> Vec<RallyAnnotation> {
    [1usize, 2, 3, 3, 4, 5, 5, 6, 8, 13]
        .iter()
        .enumerate()
        .map(|(i, len)| synthetic_rally(i, *len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::validate_rally;
    use crate::metrics::corpus_stats;

    #[test]
    fn vocabulary_has_ninety_two_events() {
        let events = all_valid_events();
        assert_eq!(events.len(), 92);
        let distinct: std::collections::BTreeSet<_> = events.iter().collect();
        assert_eq!(distinct.len(), 92);
    }

    #[test]
    fn synthetic_rallies_are_well_formed() {
        for r in synthetic_corpus(50) {
            assert!(validate_rally(&r.event_list()).is_empty(), "{}", r.rally_id());
        }
    }

    #[test]
    fn stats_fixture_matches_hand_computation() {
        let corpus = stats_fixture_corpus();
        let counts: Vec<u64> = corpus.iter().map(|r| r.event_count() as u64).collect();
        let stats = corpus_stats(&counts).unwrap();
        assert_eq!(stats.mean, 5.0);
        assert_eq!(stats.lower_quartile, 3);
        assert_eq!(stats.median, 4);
        assert_eq!(stats.upper_quartile, 6);
        assert_eq!(stats.max, 13);
    }
}
