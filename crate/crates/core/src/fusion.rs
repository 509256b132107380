//! Fusing external detector outputs (person boxes, court corners, ball
//! positions, pose keypoints) into per-frame tracks with near/far player
//! selection.
//!
//! Image coordinates use the usual top-left origin with y growing downward;
//! the near player is the one at larger y. Absent detections are the all-(-1)
//! sentinel of their arity, and a tuple is always entirely sentinel or
//! entirely real.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SENTINEL: i32 = -1;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("frame {frame} outside rally window {start}..={end}")]
    FrameOutOfRange { frame: u64, start: u64, end: u64 },
    #[error("duplicate detections for frame {0}")]
    DuplicateFrame(u64),
    #[error("frame {frame}: {what} mixes sentinel and real coordinates: {values:?}")]
    MixedSentinel {
        frame: u64,
        what: &'static str,
        values: Vec<i32>,
    },
    #[error("frame {frame}: bounding box {values:?} is not positively oriented")]
    InvalidBBox { frame: u64, values: [i32; 4] },
    #[error("frame {frame}: confidence {confidence} outside [0, 1]")]
    InvalidConfidence { frame: u64, confidence: f64 },
    #[error("frame {frame}: pose has {got} keypoints, expected {expected}")]
    PoseArity {
        frame: u64,
        got: usize,
        expected: usize,
    },
    #[error("frame {frame}: {what} has {got} values, expected {expected}")]
    TupleArity {
        frame: u64,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("reading detections: {0}")]
    Io(#[from] std::io::Error),
    #[error("detections line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("parsing track document: {0}")]
    TrackJson(#[from] serde_json::Error),
}

fn tuple_error(what: &'static str, values: &[i32]) -> String {
    format!("{what} mixes sentinel and real coordinates: {values:?}")
}

fn check_tuple(what: &'static str, values: &[i32]) -> Result<(), String> {
    let all_sentinel = values.iter().all(|v| *v == SENTINEL);
    let all_real = values.iter().all(|v| *v >= 0);
    if all_sentinel || all_real {
        Ok(())
    } else {
        Err(tuple_error(what, values))
    }
}

/// A pixel point; `(-1, -1)` marks an absent detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i32; 2]", into = "[i32; 2]")]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const SENTINEL: Point = Point { x: SENTINEL, y: SENTINEL };

    pub fn new(x: i32, y: i32) -> Point {
        Point { x, y }
    }

    pub fn is_sentinel(&self) -> bool {
        self.x == SENTINEL && self.y == SENTINEL
    }
}

impl TryFrom<[i32; 2]> for Point {
    type Error = String;

    fn try_from(v: [i32; 2]) -> Result<Point, String> {
        check_tuple("point", &v)?;
        Ok(Point { x: v[0], y: v[1] })
    }
}

impl From<Point> for [i32; 2] {
    fn from(p: Point) -> [i32; 2] {
        [p.x, p.y]
    }
}

/// A pixel-space box with `x1 < x2` and `y1 < y2` (top-left / bottom-right),
/// or the all-(-1) sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i32; 4]", into = "[i32; 4]")]
pub struct BBox {
    pub x1: i32,
    pub y1: i32,
    pub x2: i32,
    pub y2: i32,
}

impl BBox {
    pub const SENTINEL: BBox = BBox {
        x1: SENTINEL,
        y1: SENTINEL,
        x2: SENTINEL,
        y2: SENTINEL,
    };

    pub fn is_sentinel(&self) -> bool {
        *self == BBox::SENTINEL
    }

    /// Foot-level anchor: the midpoint of the bottom edge.
    pub fn bottom_center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) as f64 / 2.0, self.y2 as f64)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x1 + self.x2) as f64 / 2.0,
            (self.y1 + self.y2) as f64 / 2.0,
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        !self.is_sentinel()
            && !p.is_sentinel()
            && p.x >= self.x1
            && p.x <= self.x2
            && p.y >= self.y1
            && p.y <= self.y2
    }
}

impl TryFrom<[i32; 4]> for BBox {
    type Error = String;

    fn try_from(v: [i32; 4]) -> Result<BBox, String> {
        check_tuple("bbox", &v)?;
        let b = BBox {
            x1: v[0],
            y1: v[1],
            x2: v[2],
            y2: v[3],
        };
        if !b.is_sentinel() && (b.x1 >= b.x2 || b.y1 >= b.y2) {
            return Err(format!("bbox {v:?} is not positively oriented"));
        }
        Ok(b)
    }
}

impl From<BBox> for [i32; 4] {
    fn from(b: BBox) -> [i32; 4] {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// The four image-space court corners, or the all-(-1) sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i32; 8]", into = "[i32; 8]")]
pub struct Quad {
    corners: [Point; 4],
}

impl Quad {
    pub const SENTINEL: Quad = Quad {
        corners: [Point::SENTINEL; 4],
    };

    pub fn new(corners: [Point; 4]) -> Quad {
        Quad { corners }
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.corners
    }

    pub fn is_sentinel(&self) -> bool {
        self.corners.iter().all(Point::is_sentinel)
    }

    pub fn flat(&self) -> [i32; 8] {
        let c = &self.corners;
        [c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y]
    }

    /// Splits the corners into the two court ends: the pair with the larger
    /// image y is the near baseline, the pair with the smaller y the far one.
    fn baselines(&self) -> Baselines {
        let mut pts = self.corners;
        pts.sort_by_key(|p| (p.y, p.x));
        let edge = |a: Point, b: Point| {
            let mid = ((a.x + b.x) as f64 / 2.0, (a.y + b.y) as f64 / 2.0);
            let len = dist((a.x as f64, a.y as f64), (b.x as f64, b.y as f64));
            (mid, len)
        };
        let (far_mid, far_len) = edge(pts[0], pts[1]);
        let (near_mid, near_len) = edge(pts[2], pts[3]);
        Baselines {
            near_mid,
            near_len,
            far_mid,
            far_len,
        }
    }
}

impl TryFrom<[i32; 8]> for Quad {
    type Error = String;

    fn try_from(v: [i32; 8]) -> Result<Quad, String> {
        check_tuple("court quad", &v)?;
        Ok(Quad {
            corners: [
                Point::new(v[0], v[1]),
                Point::new(v[2], v[3]),
                Point::new(v[4], v[5]),
                Point::new(v[6], v[7]),
            ],
        })
    }
}

impl From<Quad> for [i32; 8] {
    fn from(q: Quad) -> [i32; 8] {
        q.flat()
    }
}

struct Baselines {
    near_mid: (f64, f64),
    near_len: f64,
    far_mid: (f64, f64),
    far_len: f64,
}

pub const COCO_KEYPOINT_COUNT: usize = 17;

/// COCO indices of left wrist, right wrist, left ankle, right ankle.
pub const HANDS_FEET_INDICES: [usize; 4] = [9, 10, 15, 16];

/// A 17-keypoint COCO-order pose. Individual joints may be sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Pose {
    keypoints: [Point; COCO_KEYPOINT_COUNT],
}

impl Pose {
    pub const SENTINEL: Pose = Pose {
        keypoints: [Point::SENTINEL; COCO_KEYPOINT_COUNT],
    };

    pub fn new(keypoints: [Point; COCO_KEYPOINT_COUNT]) -> Pose {
        Pose { keypoints }
    }

    pub fn keypoints(&self) -> &[Point; COCO_KEYPOINT_COUNT] {
        &self.keypoints
    }

    pub fn is_sentinel(&self) -> bool {
        self.keypoints.iter().all(Point::is_sentinel)
    }
}

impl TryFrom<Vec<Point>> for Pose {
    type Error = String;

    fn try_from(v: Vec<Point>) -> Result<Pose, String> {
        let keypoints: [Point; COCO_KEYPOINT_COUNT] = v
            .try_into()
            .map_err(|v: Vec<Point>| format!("pose has {} keypoints, expected 17", v.len()))?;
        Ok(Pose { keypoints })
    }
}

impl From<Pose> for Vec<Point> {
    fn from(p: Pose) -> Vec<Point> {
        p.keypoints.to_vec()
    }
}

/// Selects the wrist and ankle keypoints of a pose: COCO indices 9, 10, 15
/// and 16, in that order. Sentinel joints pass through.
pub fn reduce_keypoints(pose: &Pose) -> [Point; 4] {
    HANDS_FEET_INDICES.map(|i| pose.keypoints[i])
}

/// One person detection from the external object detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonDetection {
    pub bbox: BBox,
    pub confidence: f64,
}

/// All detector outputs for one frame, after validation and pixel rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame: u64,
    pub persons: Vec<PersonDetection>,
    pub court: Quad,
    pub ball: Point,
    pub poses: Vec<Pose>,
}

impl FrameDetections {
    pub fn empty(frame: u64) -> FrameDetections {
        FrameDetections {
            frame,
            persons: Vec::new(),
            court: Quad::SENTINEL,
            ball: Point::SENTINEL,
            poses: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawFrame {
    frame: u64,
    #[serde(default)]
    persons: Vec<RawPerson>,
    #[serde(default)]
    court: Option<Vec<f64>>,
    #[serde(default)]
    ball: Option<Vec<f64>>,
    #[serde(default)]
    poses: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
struct RawPerson {
    bbox: [f64; 4],
    conf: f64,
}

fn round_px(v: f64) -> i32 {
    v.round() as i32
}

impl RawFrame {
    fn validate(self) -> Result<FrameDetections, FusionError> {
        let frame = self.frame;
        let mut persons = Vec::with_capacity(self.persons.len());
        for p in self.persons {
            if !(0.0..=1.0).contains(&p.conf) {
                return Err(FusionError::InvalidConfidence {
                    frame,
                    confidence: p.conf,
                });
            }
            let values = p.bbox.map(round_px);
            check_tuple("person bbox", &values).map_err(|_| FusionError::MixedSentinel {
                frame,
                what: "person bbox",
                values: values.to_vec(),
            })?;
            let bbox =
                BBox::try_from(values).map_err(|_| FusionError::InvalidBBox { frame, values })?;
            persons.push(PersonDetection {
                bbox,
                confidence: p.conf,
            });
        }

        let court = match self.court {
            None => Quad::SENTINEL,
            Some(v) => {
                if v.len() != 8 {
                    return Err(FusionError::TupleArity {
                        frame,
                        what: "court quad",
                        got: v.len(),
                        expected: 8,
                    });
                }
                let values: Vec<i32> = v.iter().copied().map(round_px).collect();
                let arr: [i32; 8] = values.clone().try_into().expect("length checked");
                Quad::try_from(arr).map_err(|_| FusionError::MixedSentinel {
                    frame,
                    what: "court quad",
                    values,
                })?
            }
        };

        let ball = match self.ball {
            None => Point::SENTINEL,
            Some(v) => {
                if v.len() != 2 {
                    return Err(FusionError::TupleArity {
                        frame,
                        what: "ball point",
                        got: v.len(),
                        expected: 2,
                    });
                }
                let values = [round_px(v[0]), round_px(v[1])];
                Point::try_from(values).map_err(|_| FusionError::MixedSentinel {
                    frame,
                    what: "ball point",
                    values: values.to_vec(),
                })?
            }
        };

        let mut poses = Vec::with_capacity(self.poses.len());
        for raw in self.poses {
            if raw.len() != COCO_KEYPOINT_COUNT {
                return Err(FusionError::PoseArity {
                    frame,
                    got: raw.len(),
                    expected: COCO_KEYPOINT_COUNT,
                });
            }
            let mut keypoints = [Point::SENTINEL; COCO_KEYPOINT_COUNT];
            for (slot, kp) in keypoints.iter_mut().zip(&raw) {
                let values = [round_px(kp[0]), round_px(kp[1])];
                *slot = Point::try_from(values).map_err(|_| FusionError::MixedSentinel {
                    frame,
                    what: "pose keypoint",
                    values: values.to_vec(),
                })?;
            }
            poses.push(Pose::new(keypoints));
        }

        Ok(FrameDetections {
            frame,
            persons,
            court,
            ball,
            poses,
        })
    }
}

/// Parses detector output: JSON lines, one record per frame. Float
/// coordinates are rounded to whole pixels.
pub fn parse_detection_lines(text: &str) -> Result<Vec<FrameDetections>, FusionError> {
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let raw: RawFrame = serde_json::from_str(line)
            .map_err(|source| FusionError::Json { line: i + 1, source })?;
        frames.push(raw.validate()?);
    }
    Ok(frames)
}

pub fn load_detections(path: &Path) -> Result<Vec<FrameDetections>, FusionError> {
    let text = fs::read_to_string(path)?;
    parse_detection_lines(&text)
}

/// Tunable fusion thresholds.
#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    /// A detection qualifies for a court end when its bottom-center lies
    /// within `distance_factor` times that end's baseline length of the
    /// baseline midpoint. Farther detections are treated as referees or
    /// spectators.
    pub distance_factor: f64,
}

impl Default for FusionConfig {
    fn default() -> FusionConfig {
        FusionConfig {
            distance_factor: 1.5,
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt()
}

/// Picks the player boxes: for each court end, the detection whose
/// bottom-center is closest to that end's baseline midpoint, within the
/// distance threshold. One detection cannot serve both ends; the closer
/// assignment wins and the other end falls back to its next-best candidate.
/// Returns `(near, far)`, sentinel where no detection qualifies.
pub fn select_players(
    persons: &[PersonDetection],
    court: &Quad,
    cfg: &FusionConfig,
) -> (BBox, BBox) {
    if court.is_sentinel() {
        return (BBox::SENTINEL, BBox::SENTINEL);
    }
    let ends = court.baselines();

    let candidates = |mid: (f64, f64), max_dist: f64| -> Vec<(usize, f64)> {
        let mut found: Vec<(usize, f64)> = persons
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.bbox.is_sentinel())
            .map(|(i, p)| (i, dist(p.bbox.bottom_center(), mid)))
            .filter(|(_, d)| *d <= max_dist)
            .collect();
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        found
    };

    let near = candidates(ends.near_mid, cfg.distance_factor * ends.near_len);
    let far = candidates(ends.far_mid, cfg.distance_factor * ends.far_len);

    let (near_pick, far_pick) = resolve_contention(&near, &far);
    let bbox_of = |pick: Option<usize>| pick.map_or(BBox::SENTINEL, |i| persons[i].bbox);
    (bbox_of(near_pick), bbox_of(far_pick))
}

/// Resolves two ranked candidate lists that may both want the same item:
/// the side with the smaller distance keeps it, the other side takes its next
/// best. Ties go to the first list.
fn resolve_contention(a: &[(usize, f64)], b: &[(usize, f64)]) -> (Option<usize>, Option<usize>) {
    match (a.first(), b.first()) {
        (Some(&(ai, ad)), Some(&(bi, bd))) if ai == bi => {
            if ad <= bd {
                let b_next = b.iter().find(|(i, _)| *i != ai).map(|(i, _)| *i);
                (Some(ai), b_next)
            } else {
                let a_next = a.iter().find(|(i, _)| *i != bi).map(|(i, _)| *i);
                (a_next, Some(bi))
            }
        }
        (a_first, b_first) => (a_first.map(|(i, _)| *i), b_first.map(|(i, _)| *i)),
    }
}

/// One fused frame of a detection track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub far_bbox: BBox,
    pub near_bbox: BBox,
    pub ball: Point,
    pub court: Quad,
    pub far_pose: Pose,
    pub near_pose: Pose,
}

impl TrackFrame {
    pub fn sentinel() -> TrackFrame {
        TrackFrame {
            far_bbox: BBox::SENTINEL,
            near_bbox: BBox::SENTINEL,
            ball: Point::SENTINEL,
            court: Quad::SENTINEL,
            far_pose: Pose::SENTINEL,
            near_pose: Pose::SENTINEL,
        }
    }
}

/// A fused per-frame track over a rally window, immutable once assembled.
/// Serializes as a JSON document keyed by frame number.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectionTrack {
    frames: BTreeMap<u64, TrackFrame>,
}

impl DetectionTrack {
    pub fn from_frames(frames: BTreeMap<u64, TrackFrame>) -> DetectionTrack {
        DetectionTrack { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, frame: u64) -> Option<&TrackFrame> {
        self.frames.get(&frame)
    }

    /// Frames in ascending frame order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &TrackFrame)> {
        self.frames.iter().map(|(f, t)| (*f, t))
    }

    /// Keeps every `stride`-th frame, starting from the first.
    pub fn subsample(&self, stride: u32) -> DetectionTrack {
        let stride = stride.max(1) as usize;
        DetectionTrack {
            frames: self
                .frames
                .iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0)
                .map(|(_, (f, t))| (*f, *t))
                .collect(),
        }
    }

    /// Restricts the track to frames inside `start..=end`.
    pub fn restrict(&self, start: u64, end: u64) -> DetectionTrack {
        DetectionTrack {
            frames: self
                .frames
                .range(start..=end)
                .map(|(f, t)| (*f, *t))
                .collect(),
        }
    }

    /// The first non-sentinel court in frame order, if any.
    pub fn first_court(&self) -> Quad {
        self.frames
            .values()
            .map(|t| t.court)
            .find(|c| !c.is_sentinel())
            .unwrap_or(Quad::SENTINEL)
    }

    pub fn save(&self, path: &Path) -> Result<(), FusionError> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DetectionTrack, FusionError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Builds the fused track for a rally window. Every frame in the window gets
/// an entry; frames without detector records are fully sentinel. Poses are
/// attached to the selected players by keypoint containment.
pub fn assemble_track(
    window: (u64, u64),
    detections: &[FrameDetections],
    cfg: &FusionConfig,
) -> Result<DetectionTrack, FusionError> {
    let (start, end) = window;
    let mut by_frame: BTreeMap<u64, &FrameDetections> = BTreeMap::new();
    for d in detections {
        if d.frame < start || d.frame > end {
            return Err(FusionError::FrameOutOfRange {
                frame: d.frame,
                start,
                end,
            });
        }
        if by_frame.insert(d.frame, d).is_some() {
            return Err(FusionError::DuplicateFrame(d.frame));
        }
    }

    let mut frames = BTreeMap::new();
    for frame in start..=end {
        let track_frame = match by_frame.get(&frame) {
            None => TrackFrame::sentinel(),
            Some(d) => {
                let (near_bbox, far_bbox) = select_players(&d.persons, &d.court, cfg);
                let (near_pose, far_pose) = attach_poses(&d.poses, &near_bbox, &far_bbox);
                TrackFrame {
                    far_bbox,
                    near_bbox,
                    ball: d.ball,
                    court: d.court,
                    far_pose,
                    near_pose,
                }
            }
        };
        frames.insert(frame, track_frame);
    }
    Ok(DetectionTrack { frames })
}

/// Matches poses to the selected players: a pose scores by how many of its
/// real keypoints fall inside the player's box (ties broken by smaller mean
/// keypoint distance to the box center), and needs at least one contained
/// keypoint to attach. Returns `(near_pose, far_pose)`.
fn attach_poses(poses: &[Pose], near: &BBox, far: &BBox) -> (Pose, Pose) {
    let score = |pose: &Pose, bbox: &BBox| -> Option<(usize, f64)> {
        if bbox.is_sentinel() {
            return None;
        }
        let real: Vec<Point> = pose
            .keypoints()
            .iter()
            .copied()
            .filter(|p| !p.is_sentinel())
            .collect();
        if real.is_empty() {
            return None;
        }
        let contained = real.iter().filter(|p| bbox.contains(**p)).count();
        if contained == 0 {
            return None;
        }
        let center = bbox.center();
        let mean_dist = real
            .iter()
            .map(|p| dist((p.x as f64, p.y as f64), center))
            .sum::<f64>()
            / real.len() as f64;
        Some((contained, mean_dist))
    };

    // rank candidates: more contained keypoints first, then closer to center
    let ranked = |bbox: &BBox| -> Vec<(usize, usize, f64)> {
        let mut found: Vec<(usize, usize, f64)> = poses
            .iter()
            .enumerate()
            .filter_map(|(i, p)| score(p, bbox).map(|(c, d)| (i, c, d)))
            .collect();
        found.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)));
        found
    };

    let near_ranked = ranked(near);
    let far_ranked = ranked(far);
    // Contention over one pose: the side with the stronger claim (more
    // contained keypoints, then smaller mean distance, then near) keeps it.
    let (near_pick, far_pick) = match (near_ranked.first(), far_ranked.first()) {
        (Some(&(ni, nc, nd)), Some(&(fi, fc, fd))) if ni == fi => {
            let near_wins = nc > fc || (nc == fc && nd <= fd);
            if near_wins {
                let next = far_ranked.iter().find(|(i, _, _)| *i != ni).map(|(i, _, _)| *i);
                (Some(ni), next)
            } else {
                let next = near_ranked.iter().find(|(i, _, _)| *i != fi).map(|(i, _, _)| *i);
                (next, Some(fi))
            }
        }
        (n, f) => (n.map(|(i, _, _)| *i), f.map(|(i, _, _)| *i)),
    };
    let pose_of = |pick: Option<usize>| pick.map_or(Pose::SENTINEL, |i| poses[i]);
    (pose_of(near_pick), pose_of(far_pick))
}
