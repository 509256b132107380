//! Toolkit for tennis rally sequence-identification experiments: prompt and
//! answer dataset construction for every variation, fusion of external
//! detector outputs into coordinate-bearing prompts, parsing of free-form
//! model answers into event sequences, and edit-score / counting metrics.
//! The multimodal model itself stays behind an inference endpoint (or a
//! file-backed replay mock).

pub mod dataset;
pub mod event;
pub mod fixtures;
pub mod fusion;
pub mod metrics;
pub mod parse;
pub mod runner;

pub use dataset::{
    build_prompt, build_samples, cut_single_event_clips, estimate_prompt_tokens,
    max_stride_fitting, subsample_track, BuildManifest, BuildOptions, DatasetError, DatasetRecord,
    FrameWindow, KeypointSet, PromptSample, PromptVariant, VariantKind,
};
pub use event::{
    build_vocabulary, load_annotations, render_answer, render_sequence_answer, validate_rally,
    Actor, AnnotationError, Direction, Event, EventError, EventVocabulary, Hand, Outcome,
    RallyAnnotation, Shot, TimedEvent, Violation, ViolationKind, VocabularySource,
};
pub use fusion::{
    assemble_track, reduce_keypoints, select_players, BBox, DetectionTrack, FrameDetections,
    FusionConfig, FusionError, PersonDetection, Point, Pose, Quad, TrackFrame,
};
pub use metrics::{
    corpus_stats, count_metrics, edit_score, levenshtein, levenshtein_by, single_event_accuracy,
    slots_from_events, CorpusStats, CountStats, EvalReport, EventSlot, MetricsError,
    SubclassAccuracy,
};
pub use parse::{
    load_predictions, parse_count_answer, split_sentences, write_predictions, AnswerParser,
    MatchStatus, ParsedPrediction, PredictionRecord, SentenceMatches, Subclass, SubclassMatch,
};
pub use runner::{
    evaluate_run, evaluate_single_events, run_batch, run_batch_with, Endpoint, InferenceParams,
    InferenceRequest, RetryPolicy, RunContext, RunManifest, RunSample, RunnerError, SampleOutcome,
    SampleStatus, Transport, TransportError,
};
