//! Builds clip cut-lists and prompt/answer samples for every experimental
//! variation, including the coordinate-bearing prompts fed from detection
//! tracks.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{render_answer, render_sequence_answer, Event, EventError, RallyAnnotation};
use crate::fusion::{reduce_keypoints, BBox, DetectionTrack, Point, Quad};

/// The experiment variation a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    SingleEvent,
    DefaultSequence,
    FrameNumbers,
    EventCountGiven,
    EventCountQuery,
    BboxPrompt,
    BboxBallCourtPrompt,
    KeypointPrompt,
}

impl VariantKind {
    pub const ALL: [VariantKind; 8] = [
        VariantKind::SingleEvent,
        VariantKind::DefaultSequence,
        VariantKind::FrameNumbers,
        VariantKind::EventCountGiven,
        VariantKind::EventCountQuery,
        VariantKind::BboxPrompt,
        VariantKind::BboxBallCourtPrompt,
        VariantKind::KeypointPrompt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::SingleEvent => "single_event",
            VariantKind::DefaultSequence => "default_sequence",
            VariantKind::FrameNumbers => "frame_numbers",
            VariantKind::EventCountGiven => "event_count_given",
            VariantKind::EventCountQuery => "event_count_query",
            VariantKind::BboxPrompt => "bbox_prompt",
            VariantKind::BboxBallCourtPrompt => "bbox_ball_court_prompt",
            VariantKind::KeypointPrompt => "keypoint_prompt",
        }
    }

    /// Coordinate-bearing variants need a detection track.
    pub fn requires_track(self) -> bool {
        matches!(
            self,
            VariantKind::BboxPrompt | VariantKind::BboxBallCourtPrompt | VariantKind::KeypointPrompt
        )
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<VariantKind, DatasetError> {
        match s {
            "single_event" => Ok(VariantKind::SingleEvent),
            "default_sequence" | "default" => Ok(VariantKind::DefaultSequence),
            "frame_numbers" => Ok(VariantKind::FrameNumbers),
            "event_count_given" => Ok(VariantKind::EventCountGiven),
            "event_count_query" => Ok(VariantKind::EventCountQuery),
            "bbox_prompt" | "bbox" => Ok(VariantKind::BboxPrompt),
            "bbox_ball_court_prompt" | "bbox_ball_court" => Ok(VariantKind::BboxBallCourtPrompt),
            "keypoint_prompt" | "keypoints" => Ok(VariantKind::KeypointPrompt),
            other => Err(DatasetError::UnknownVariant(other.to_owned())),
        }
    }
}

/// Which keypoints the keypoint variant serializes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeypointSet {
    #[serde(rename = "all17")]
    All17,
    #[serde(rename = "hands4")]
    HandsFeet4,
}

impl KeypointSet {
    pub fn name(self) -> &'static str {
        match self {
            KeypointSet::All17 => "all17",
            KeypointSet::HandsFeet4 => "hands4",
        }
    }
}

impl FromStr for KeypointSet {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<KeypointSet, DatasetError> {
        match s {
            "all17" => Ok(KeypointSet::All17),
            "hands4" => Ok(KeypointSet::HandsFeet4),
            other => Err(DatasetError::UnknownKeypointSet(other.to_owned())),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("variant {0} requires a detection track")]
    TrackRequired(VariantKind),
    #[error("rally {rally_id}: no track frames left at stride {stride}")]
    EmptyCoordinateList { rally_id: String, stride: u32 },
    #[error("no stride fits a token budget of {budget} (minimum estimate {minimum})")]
    BudgetTooSmall { budget: usize, minimum: usize },
    #[error("variant {0} produces one sample per event; use build_samples")]
    NotRallyLevel(VariantKind),
    #[error("stride must be at least 1")]
    StrideZero,
    #[error("keypoint_set applies only to the keypoint variant")]
    KeypointSetUnexpected,
    #[error("the keypoint variant needs a keypoint set (all17 or hands4)")]
    KeypointSetRequired,
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("unknown keypoint set {0:?} (expected all17 or hands4)")]
    UnknownKeypointSet(String),
    #[error(transparent)]
    Answer(#[from] EventError),
    #[error("writing dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing dataset: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing cut-list: {0}")]
    Csv(#[from] csv::Error),
}

/// A fully specified variation: the kind plus its coordinate stride and,
/// for the keypoint variant, which keypoints to serialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub kind: VariantKind,
    pub stride: u32,
    pub keypoint_set: Option<KeypointSet>,
}

impl PromptVariant {
    pub fn new(
        kind: VariantKind,
        stride: u32,
        keypoint_set: Option<KeypointSet>,
    ) -> Result<PromptVariant, DatasetError> {
        if stride == 0 {
            return Err(DatasetError::StrideZero);
        }
        match (kind, keypoint_set) {
            (VariantKind::KeypointPrompt, None) => Err(DatasetError::KeypointSetRequired),
            (VariantKind::KeypointPrompt, Some(_)) => Ok(PromptVariant {
                kind,
                stride,
                keypoint_set,
            }),
            (_, Some(_)) => Err(DatasetError::KeypointSetUnexpected),
            (_, None) => Ok(PromptVariant {
                kind,
                stride,
                keypoint_set: None,
            }),
        }
    }

    /// The variant at the stride used in the corresponding experiment:
    /// every frame for bbox-only prompts, every other frame once ball and
    /// court join, every 20th frame for full poses and every 5th for the
    /// hands-and-feet reduction.
    pub fn with_default_stride(
        kind: VariantKind,
        keypoint_set: Option<KeypointSet>,
    ) -> Result<PromptVariant, DatasetError> {
        let stride = match (kind, keypoint_set) {
            (VariantKind::BboxBallCourtPrompt, _) => 2,
            (VariantKind::KeypointPrompt, Some(KeypointSet::All17)) => 20,
            (VariantKind::KeypointPrompt, Some(KeypointSet::HandsFeet4)) => 5,
            _ => 1,
        };
        PromptVariant::new(kind, stride, keypoint_set)
    }
}

/// An inclusive frame range within a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub start: u64,
    pub end: u64,
}

/// One training or evaluation record before file serialization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptSample {
    /// Rally id, or `{rally_id}#e{NN}` for per-event samples.
    pub rally_id: String,
    pub clip_ref: String,
    pub prompt: String,
    pub answer: String,
    pub variant: PromptVariant,
    pub frame_window: FrameWindow,
}

pub const DEFAULT_PROMPT: &str = "What is happening in the tennis video?";

/// Default wording for the event-counting task. Configurable because the
/// phrasing is ours, not a fixed template.
pub const DEFAULT_COUNT_QUERY_PROMPT: &str = "How many tennis actions are there in this video?";

pub fn event_count_given_prompt(count: usize) -> String {
    format!("Given that there are {count} tennis actions in this video, what is happening in the tennis video?")
}

pub fn bbox_prompt_text(far_bbox: &str, near_bbox: &str) -> String {
    format!("Given this list of the far player's bounding box in each frame in format (x1, y1, x2, y2): {far_bbox}, and this list of the near player's bounding boxes in each frame in format (x1, y1, x2, y2): {near_bbox}, describe all the tennis actions in the video.")
}

pub fn bbox_ball_court_prompt_text(
    far_bbox: &str,
    near_bbox: &str,
    ball: &str,
    court: &str,
) -> String {
    format!("Given this list of the far player's bounding box in format (x1, y1, x2, y2): {far_bbox}, and this list of the near player's bounding boxes in format (x1, y1, x2, y2): {near_bbox}, and this list of the tennis ball's coordinates in format (x, y): {ball}, and given the following court dimensions in the form of (x1, y1, x2, y2, x3, y3, x4, y4): {court}, describe the tennis actions in the video.")
}

pub fn keypoint_prompt_text(
    far_keypoints: &str,
    near_keypoints: &str,
    ball: &str,
    court: &str,
) -> String {
    format!("Given this list of the far player's keypoints: {far_keypoints}, and this list of the near player's keypoints: {near_keypoints}, and this list of the tennis ball's coordinates in format (x, y): {ball}, and given the following court dimensions in the form of (x1, y1, x2, y2, x3, y3, x4, y4): {court}, describe the tennis actions in the video.")
}

/// Per-event answer for the frame-number variation. The clause lands after
/// the outcome word, so serves read "... serve in in frame N." — the template
/// is preserved verbatim rather than smoothed.
pub fn frame_numbered_answer(e: &Event, frame: u64) -> String {
    let sentence = render_answer(e);
    format!("{} in frame {frame}.", sentence.trim_end_matches('.'))
}

/// Build-time knobs that are not part of the variant itself.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub count_query_prompt: String,
    /// Recorded in the build manifest for the audio experiment; clips are
    /// muxed externally.
    pub include_audio: bool,
}

impl Default for BuildOptions {
    fn default() -> BuildOptions {
        BuildOptions {
            count_query_prompt: DEFAULT_COUNT_QUERY_PROMPT.to_owned(),
            include_audio: false,
        }
    }
}

/// Splits a rally into per-event windows: each starts 10 frames before the
/// shot (clamped to the rally start) and ends right before the next shot;
/// the last window runs to the rally end.
pub fn cut_single_event_clips(r: &RallyAnnotation) -> Vec<(Event, FrameWindow)> {
    let events = r.events();
    events
        .iter()
        .enumerate()
        .map(|(i, te)| {
            let start = te.frame.saturating_sub(10).max(r.start_frame());
            let end = match events.get(i + 1) {
                Some(next) => next.frame - 1,
                None => r.end_frame(),
            };
            (te.event, FrameWindow { start, end })
        })
        .collect()
}

fn fmt_bbox(b: &BBox) -> String {
    format!("({}, {}, {}, {})", b.x1, b.y1, b.x2, b.y2)
}

fn fmt_point(p: &Point) -> String {
    format!("({}, {})", p.x, p.y)
}

fn fmt_quad(q: &Quad) -> String {
    let v = q.flat();
    format!(
        "({}, {}, {}, {}, {}, {}, {}, {})",
        v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]
    )
}

fn fmt_keypoints(points: &[Point]) -> String {
    let inner = points.iter().map(fmt_point).collect::<Vec<_>>().join(", ");
    format!("[{inner}]")
}

fn join_frames<F: Fn(&crate::fusion::TrackFrame) -> String>(
    track: &DetectionTrack,
    f: F,
) -> String {
    track
        .iter()
        .map(|(_, tf)| f(tf))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The prompt text of a coordinate-bearing variant over an already-sampled
/// track.
fn coordinate_prompt_text(
    kind: VariantKind,
    keypoint_set: Option<KeypointSet>,
    sampled: &DetectionTrack,
) -> String {
    match kind {
        VariantKind::BboxPrompt => {
            let far = join_frames(sampled, |tf| fmt_bbox(&tf.far_bbox));
            let near = join_frames(sampled, |tf| fmt_bbox(&tf.near_bbox));
            bbox_prompt_text(&far, &near)
        }
        VariantKind::BboxBallCourtPrompt => {
            let far = join_frames(sampled, |tf| fmt_bbox(&tf.far_bbox));
            let near = join_frames(sampled, |tf| fmt_bbox(&tf.near_bbox));
            let ball = join_frames(sampled, |tf| fmt_point(&tf.ball));
            let court = fmt_quad(&sampled.first_court());
            bbox_ball_court_prompt_text(&far, &near, &ball, &court)
        }
        VariantKind::KeypointPrompt => {
            let select = |pose: &crate::fusion::Pose| match keypoint_set {
                Some(KeypointSet::HandsFeet4) => reduce_keypoints(pose).to_vec(),
                _ => pose.keypoints().to_vec(),
            };
            let far = join_frames(sampled, |tf| fmt_keypoints(&select(&tf.far_pose)));
            let near = join_frames(sampled, |tf| fmt_keypoints(&select(&tf.near_pose)));
            let ball = join_frames(sampled, |tf| fmt_point(&tf.ball));
            let court = fmt_quad(&sampled.first_court());
            keypoint_prompt_text(&far, &near, &ball, &court)
        }
        _ => unreachable!("not a coordinate variant"),
    }
}

/// Builds the one sample a rally-level variant produces for a rally.
/// `single_event` produces one sample per event; use [`build_samples`].
pub fn build_prompt(
    r: &RallyAnnotation,
    v: &PromptVariant,
    track: Option<&DetectionTrack>,
    opts: &BuildOptions,
) -> Result<PromptSample, DatasetError> {
    let events = r.event_list();
    let (prompt, answer) = match v.kind {
        VariantKind::SingleEvent => return Err(DatasetError::NotRallyLevel(v.kind)),
        VariantKind::DefaultSequence => {
            (DEFAULT_PROMPT.to_owned(), render_sequence_answer(&events)?)
        }
        VariantKind::FrameNumbers => {
            let answer = r
                .events()
                .iter()
                .map(|te| frame_numbered_answer(&te.event, te.frame))
                .collect::<Vec<_>>()
                .join(" ");
            (DEFAULT_PROMPT.to_owned(), answer)
        }
        VariantKind::EventCountGiven => (
            event_count_given_prompt(events.len()),
            render_sequence_answer(&events)?,
        ),
        VariantKind::EventCountQuery => {
            (opts.count_query_prompt.clone(), events.len().to_string())
        }
        VariantKind::BboxPrompt | VariantKind::BboxBallCourtPrompt | VariantKind::KeypointPrompt => {
            let track = track.ok_or(DatasetError::TrackRequired(v.kind))?;
            let sampled = track
                .restrict(r.start_frame(), r.end_frame())
                .subsample(v.stride);
            if sampled.is_empty() {
                return Err(DatasetError::EmptyCoordinateList {
                    rally_id: r.rally_id().to_owned(),
                    stride: v.stride,
                });
            }
            let prompt = coordinate_prompt_text(v.kind, v.keypoint_set, &sampled);
            (prompt, render_sequence_answer(&events)?)
        }
    };
    Ok(PromptSample {
        rally_id: r.rally_id().to_owned(),
        clip_ref: r.clip().to_owned(),
        prompt,
        answer,
        variant: *v,
        frame_window: FrameWindow {
            start: r.start_frame(),
            end: r.end_frame(),
        },
    })
}

/// All samples a rally contributes under a variant: one per event for
/// `single_event`, one per rally otherwise.
pub fn build_samples(
    r: &RallyAnnotation,
    v: &PromptVariant,
    track: Option<&DetectionTrack>,
    opts: &BuildOptions,
) -> Result<Vec<PromptSample>, DatasetError> {
    if v.kind == VariantKind::SingleEvent {
        let samples = cut_single_event_clips(r)
            .into_iter()
            .enumerate()
            .map(|(i, (event, window))| PromptSample {
                rally_id: format!("{}#e{i:02}", r.rally_id()),
                clip_ref: r.clip().to_owned(),
                prompt: DEFAULT_PROMPT.to_owned(),
                answer: render_answer(&event),
                variant: *v,
                frame_window: window,
            })
            .collect();
        return Ok(samples);
    }
    Ok(vec![build_prompt(r, v, track, opts)?])
}

/// Keeps every `stride`-th frame of a track, starting from the first.
pub fn subsample_track(track: &DetectionTrack, stride: u32) -> DetectionTrack {
    track.subsample(stride)
}

pub const DEFAULT_TOKEN_FACTOR: f64 = 1.3;

/// Crude token estimate: whitespace-delimited word count scaled by a
/// configurable factor, rounded up.
pub fn estimate_prompt_tokens(sample: &PromptSample, factor: f64) -> usize {
    estimate_text_tokens(&sample.prompt, factor)
}

fn estimate_text_tokens(text: &str, factor: f64) -> usize {
    (text.split_whitespace().count() as f64 * factor).ceil() as usize
}

/// The smallest stride whose prompt estimate fits the token budget. For
/// variants without coordinates the stride is irrelevant and 1 is returned
/// when the base template fits.
pub fn max_stride_fitting(
    budget: usize,
    track: &DetectionTrack,
    v: &PromptVariant,
    opts: &BuildOptions,
    factor: f64,
) -> Result<u32, DatasetError> {
    if !v.kind.requires_track() {
        let base = match v.kind {
            VariantKind::EventCountGiven => event_count_given_prompt(0),
            VariantKind::EventCountQuery => opts.count_query_prompt.clone(),
            _ => DEFAULT_PROMPT.to_owned(),
        };
        let estimate = estimate_text_tokens(&base, factor);
        if estimate <= budget {
            return Ok(1);
        }
        return Err(DatasetError::BudgetTooSmall {
            budget,
            minimum: estimate,
        });
    }

    let mut minimum = usize::MAX;
    for stride in 1..=track.len().max(1) as u32 {
        let sampled = track.subsample(stride);
        if sampled.is_empty() {
            break;
        }
        let text = coordinate_prompt_text(v.kind, v.keypoint_set, &sampled);
        let estimate = estimate_text_tokens(&text, factor);
        minimum = minimum.min(estimate);
        if estimate <= budget {
            return Ok(stride);
        }
    }
    Err(DatasetError::BudgetTooSmall { budget, minimum })
}

/// One record of the conversation-style dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub video: String,
    pub conversations: Vec<ConversationTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub from: String,
    pub value: String,
}

fn derived_clip_path(clip: &str, sample_id: &str) -> String {
    let suffix = match sample_id.rsplit_once('#') {
        Some((_, s)) => s,
        None => return clip.to_owned(),
    };
    let p = Path::new(clip);
    match p.extension().and_then(|e| e.to_str()) {
        Some(ext) => {
            let ext = ext.to_owned();
            p.with_extension(format!("{suffix}.{ext}"))
                .to_string_lossy()
                .into_owned()
        }
        None => format!("{clip}.{suffix}"),
    }
}

/// Converts samples to dataset records. Per-event samples point at the cut
/// clip the transcoder will produce next to the source clip
/// (`clips/r1.mp4` + sample `r1#e00` -> `clips/r1.e00.mp4`).
pub fn to_dataset_records(samples: &[PromptSample]) -> Vec<DatasetRecord> {
    samples
        .iter()
        .map(|s| DatasetRecord {
            id: s.rally_id.clone(),
            video: derived_clip_path(&s.clip_ref, &s.rally_id),
            conversations: vec![
                ConversationTurn {
                    from: "human".to_owned(),
                    value: s.prompt.clone(),
                },
                ConversationTurn {
                    from: "gpt".to_owned(),
                    value: s.answer.clone(),
                },
            ],
        })
        .collect()
}

/// Writes the dataset JSON file, records ordered by id.
pub fn write_dataset(path: &Path, samples: &[PromptSample]) -> Result<(), DatasetError> {
    let mut records = to_dataset_records(samples);
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let json = serde_json::to_string_pretty(&records)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the cut-list CSV consumed by the external transcoder: one row per
/// sample with the source clip and the frame window to cut, ordered by id.
pub fn write_cutlist(path: &Path, samples: &[PromptSample]) -> Result<(), DatasetError> {
    let mut rows: Vec<&PromptSample> = samples.iter().collect();
    rows.sort_by(|a, b| a.rally_id.cmp(&b.rally_id));
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["rally_id", "clip_ref", "start_frame", "end_frame"])?;
    for s in rows {
        writer.write_record([
            s.rally_id.as_str(),
            s.clip_ref.as_str(),
            &s.frame_window.start.to_string(),
            &s.frame_window.end.to_string(),
        ])?;
    }
    writer.flush().map_err(DatasetError::Io)?;
    Ok(())
}

/// Summary of a dataset build, written alongside the dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildManifest {
    pub variant: String,
    pub stride: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keypoint_set: Option<String>,
    pub include_audio: bool,
    pub rallies: usize,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count_query_prompt: Option<String>,
}

impl BuildManifest {
    pub fn new(v: &PromptVariant, opts: &BuildOptions, rallies: usize, samples: usize) -> BuildManifest {
        BuildManifest {
            variant: v.kind.name().to_owned(),
            stride: v.stride,
            keypoint_set: v.keypoint_set.map(|k| k.name().to_owned()),
            include_audio: opts.include_audio,
            rallies,
            samples,
            count_query_prompt: (v.kind == VariantKind::EventCountQuery)
                .then(|| opts.count_query_prompt.clone()),
        }
    }
}
