//! COCO17 keypoint ingest: the per-sequence text format, validity filtering
//! and box-to-box alignment into silhouette coordinates.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 17;

/// Default confidence cutoff for a joint to count as valid.
pub const DEFAULT_TAU: f64 = 0.3;

/// COCO17 joints in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Joint {
    Nose = 0,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [
        Joint::Nose,
        Joint::LeftEye,
        Joint::RightEye,
        Joint::LeftEar,
        Joint::RightEar,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Joint> {
        Self::ALL.get(i).copied()
    }

    /// Short name used in config files (`l-eye`, `r-ankle`, ...).
    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::LeftEye => "l-eye",
            Joint::RightEye => "r-eye",
            Joint::LeftEar => "l-ear",
            Joint::RightEar => "r-ear",
            Joint::LeftShoulder => "l-shoulder",
            Joint::RightShoulder => "r-shoulder",
            Joint::LeftElbow => "l-elbow",
            Joint::RightElbow => "r-elbow",
            Joint::LeftWrist => "l-wrist",
            Joint::RightWrist => "r-wrist",
            Joint::LeftHip => "l-hip",
            Joint::RightHip => "r-hip",
            Joint::LeftKnee => "l-knee",
            Joint::RightKnee => "r-knee",
            Joint::LeftAnkle => "l-ankle",
            Joint::RightAnkle => "r-ankle",
        }
    }

    pub fn from_name(name: &str) -> Option<Joint> {
        Self::ALL.iter().copied().find(|j| j.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Schema(format!("non-finite keypoint ({x}, {y})")));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Schema(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Keypoint { x, y, confidence })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub frame_index: u32,
    pub joints: [Keypoint; NUM_JOINTS],
}

impl KeypointFrame {
    pub fn joint(&self, j: Joint) -> &Keypoint {
        &self.joints[j.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSequence {
    pub sequence_id: String,
    pub frames: Vec<KeypointFrame>,
}

impl KeypointSequence {
    pub fn new(sequence_id: impl Into<String>, frames: Vec<KeypointFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Schema("sequence has no frames".into()));
        }
        if let Some(w) = frames
            .windows(2)
            .find(|w| w[1].frame_index <= w[0].frame_index)
        {
            return Err(Error::Schema(format!(
                "frame indices not strictly increasing ({} then {})",
                w[0].frame_index, w[1].frame_index
            )));
        }
        Ok(KeypointSequence {
            sequence_id: sequence_id.into(),
            frames,
        })
    }

    /// Parses the `coco17 v1 <N>` text format. `origin` names the source in
    /// error messages.
    pub fn parse(sequence_id: impl Into<String>, text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| perr(1, "empty keypoint file".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("coco17") || head.next() != Some("v1") {
            return Err(perr(hline + 1, format!("bad header {header:?}")));
        }
        let n: usize = head
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(hline + 1, "header is missing the frame count".into()))?;
        if head.next().is_some() {
            return Err(perr(hline + 1, "trailing tokens in header".into()));
        }

        let mut frames = Vec::with_capacity(n);
        for (i, line) in lines {
            let lineno = i + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 1 + 3 * NUM_JOINTS {
                let joints = tokens.len().saturating_sub(1) as f64 / 3.0;
                return Err(Error::Schema(format!(
                    "{origin}:{lineno}: expected {NUM_JOINTS} joints (x y c), found {joints:.1}"
                )));
            }
            let frame_index: u32 = tokens[0]
                .parse()
                .map_err(|_| perr(lineno, format!("bad frame index {:?}", tokens[0])))?;
            let mut vals = [0.0f64; 3 * NUM_JOINTS];
            for (v, t) in vals.iter_mut().zip(&tokens[1..]) {
                *v = t
                    .parse()
                    .map_err(|_| perr(lineno, format!("bad number {t:?}")))?;
            }
            let mut joints = [Keypoint {
                x: 0.0,
                y: 0.0,
                confidence: 0.0,
            }; NUM_JOINTS];
            for (k, j) in joints.iter_mut().enumerate() {
                *j = Keypoint::new(vals[3 * k], vals[3 * k + 1], vals[3 * k + 2])
                    .map_err(|e| perr(lineno, format!("joint {k}: {e}")))?;
            }
            frames.push(KeypointFrame {
                frame_index,
                joints,
            });
        }
        if frames.len() != n {
            return Err(perr(
                hline + 1,
                format!("header declares {n} frames, file has {}", frames.len()),
            ));
        }
        KeypointSequence::new(sequence_id, frames)
            .map_err(|e| Error::Schema(format!("{origin}: {e}")))
    }

    /// Serializes to the `coco17 v1` format. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 + self.frames.len() * 17 * 24);
        let _ = writeln!(out, "coco17 v1 {}", self.frames.len());
        for f in &self.frames {
            let _ = write!(out, "{}", f.frame_index);
            for j in &f.joints {
                let _ = write!(out, " {} {} {}", j.x, j.y, j.confidence);
            }
            out.push('\n');
        }
        out
    }
}

/// Loads a keypoint file. The sequence id is the name of the containing
/// directory (dataset layout `<root>/<seq>/keypoints.txt`), falling back to
/// the file stem.
pub fn load_keypoint_sequence(path: &Path) -> Result<KeypointSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    KeypointSequence::parse(id, &text, &path.display().to_string())
}

pub fn save_keypoint_sequence(path: &Path, seq: &KeypointSequence) -> Result<()> {
    std::fs::write(path, seq.to_text()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityConfig {
    pub tau: f64,
    pub width: u32,
    pub height: u32,
}

impl ValidityConfig {
    pub fn new(tau: f64, width: u32, height: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau {tau} outside [0, 1]")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("valid region must be at least 1x1".into()));
        }
        Ok(ValidityConfig { tau, width, height })
    }

    pub fn accepts(&self, k: &Keypoint) -> bool {
        k.x >= 0.0
            && k.x < self.width as f64
            && k.y >= 0.0
            && k.y < self.height as f64
            && k.confidence >= self.tau
    }
}

/// The subset of a frame's joints that passed [`filter_valid`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidJoints {
    slots: [Option<Keypoint>; NUM_JOINTS],
}

impl ValidJoints {
    pub fn get(&self, j: Joint) -> Option<&Keypoint> {
        self.slots[j.index()].as_ref()
    }

    pub fn contains(&self, j: Joint) -> bool {
        self.slots[j.index()].is_some()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, &Keypoint)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|k| (Joint::ALL[i], k)))
    }

    /// Re-applies the validity predicate to an already filtered set.
    pub fn filter(&self, cfg: &ValidityConfig) -> ValidJoints {
        let mut out = ValidJoints::default();
        for (j, k) in self.iter() {
            if cfg.accepts(k) {
                out.slots[j.index()] = Some(*k);
            }
        }
        out
    }
}

pub fn filter_valid(frame: &KeypointFrame, cfg: &ValidityConfig) -> ValidJoints {
    let mut out = ValidJoints::default();
    for (slot, k) in out.slots.iter_mut().zip(&frame.joints) {
        if cfg.accepts(k) {
            *slot = Some(*k);
        }
    }
    out
}

/// Axis-aligned rectangle in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    fn is_degenerate(&self) -> bool {
        !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite())
    }
}

/// Maps every joint by the affine transform taking `source` onto `target`.
/// Confidences are copied unchanged.
pub fn align_keypoints(frame: &KeypointFrame, source: &Rect, target: &Rect) -> Result<KeypointFrame> {
    if source.is_degenerate() {
        return Err(Error::Alignment(format!("degenerate source box {source:?}")));
    }
    if target.is_degenerate() {
        return Err(Error::Alignment(format!("degenerate target box {target:?}")));
    }
    let sx = target.width / source.width;
    let sy = target.height / source.height;
    let mut out = frame.clone();
    for k in out.joints.iter_mut() {
        k.x = target.x + (k.x - source.x) * sx;
        k.y = target.y + (k.y - source.y) * sy;
    }
    Ok(out)
}

/// Tight bounding box of the joints with confidence at least `tau`.
pub fn joint_bbox(frame: &KeypointFrame, tau: f64) -> Option<Rect> {
    let mut it = frame.joints.iter().filter(|k| k.confidence >= tau);
    let first = it.next()?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for k in it {
        x0 = x0.min(k.x);
        y0 = y0.min(k.y);
        x1 = x1.max(k.x);
        y1 = y1.max(k.y);
    }
    Some(Rect::new(x0, y0, x1 - x0, y1 - y0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(x: f64, y: f64, c: f64) -> Keypoint {
        Keypoint::new(x, y, c).unwrap()
    }

    fn frame_with(idx: u32, f: impl Fn(usize) -> Keypoint) -> KeypointFrame {
        KeypointFrame {
            frame_index: idx,
            joints: std::array::from_fn(f),
        }
    }

    #[test]
    fn joint_names_round_trip() {
        for j in Joint::ALL {
            assert_eq!(Joint::from_name(j.name()), Some(j));
            assert_eq!(Joint::from_index(j.index()), Some(j));
        }
        assert_eq!(Joint::RightAnkle.index(), 16);
    }

    #[test]
    fn parses_zero_confidence_frame() {
        let mut text = String::from("coco17 v1 1\n0");
        for _ in 0..17 {
            text.push_str(" 0 0 0");
        }
        let seq = KeypointSequence::parse("s", &text, "mem").unwrap();
        assert_eq!(seq.frames.len(), 1);
        assert!(seq.frames[0].joints.iter().all(|k| k.confidence == 0.0));
    }

    #[test]
    fn parses_two_frames_in_order() {
        let row = |i: u32| {
            let mut s = i.to_string();
            for _ in 0..17 {
                s.push_str(" 1.5 2.5 0.9");
            }
            s
        };
        let text = format!("coco17 v1 2\n{}\n{}\n", row(0), row(1));
        let seq = KeypointSequence::parse("s", &text, "mem").unwrap();
        let idx: Vec<u32> = seq.frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn wrong_joint_count_is_schema_error() {
        let mut text = String::from("coco17 v1 1\n0");
        for _ in 0..16 {
            text.push_str(" 0 0 0");
        }
        let err = KeypointSequence::parse("s", &text, "mem").unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn malformed_number_names_line() {
        let mut text = String::from("coco17 v1 1\n0 abc 0 0");
        for _ in 0..16 {
            text.push_str(" 0 0 0");
        }
        match KeypointSequence::parse("s", &text, "kp.txt").unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, "kp.txt");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn frame_count_mismatch_and_bad_header() {
        assert!(KeypointSequence::parse("s", "coco17 v1 2\n", "m").is_err());
        assert!(KeypointSequence::parse("s", "coco18 v1 0\n", "m").is_err());
        assert!(KeypointSequence::parse("s", "", "m").is_err());
    }

    #[test]
    fn rejects_out_of_range_confidence_and_nonmonotone_frames() {
        assert!(Keypoint::new(0.0, 0.0, 1.5).is_err());
        assert!(Keypoint::new(f64::NAN, 0.0, 0.5).is_err());
        let f = frame_with(3, |_| kp(0.0, 0.0, 0.5));
        assert!(KeypointSequence::new("s", vec![f.clone(), f]).is_err());
        assert!(KeypointSequence::new("s", vec![]).is_err());
    }

    #[test]
    fn filter_examples() {
        let cfg = ValidityConfig::new(0.3, 44, 64).unwrap();
        assert!(!cfg.accepts(&kp(-5.0, 10.0, 0.9)));
        assert!(cfg.accepts(&kp(10.0, 10.0, 0.30)));
        assert!(!cfg.accepts(&kp(44.0, 10.0, 0.9)));
        assert!(!cfg.accepts(&kp(10.0, 64.0, 0.9)));
        assert!(!cfg.accepts(&kp(10.0, 10.0, 0.29)));
    }

    #[test]
    fn filter_is_idempotent() {
        let cfg = ValidityConfig::new(0.5, 20, 20).unwrap();
        let f = frame_with(0, |i| kp(i as f64 * 2.0 - 4.0, 5.0, (i % 4) as f64 / 3.0));
        let once = filter_valid(&f, &cfg);
        assert_eq!(once.filter(&cfg), once);
        assert!(!once.is_empty() && once.len() < 17);
    }

    #[test]
    fn identity_and_scaling_alignment() {
        let f = frame_with(0, |i| kp(i as f64 + 0.25, 2.0 * i as f64, 0.7));
        let b = Rect::new(1.0, 2.0, 30.0, 40.0);
        assert_eq!(align_keypoints(&f, &b, &b).unwrap(), f);

        let src = Rect::new(0.0, 0.0, 20.0, 40.0);
        let dst = Rect::new(0.0, 0.0, 10.0, 20.0);
        let g = align_keypoints(&f, &src, &dst).unwrap();
        for (a, b) in f.joints.iter().zip(&g.joints) {
            assert_eq!(b.x, a.x / 2.0);
            assert_eq!(b.y, a.y / 2.0);
            assert_eq!(b.confidence, a.confidence);
        }
    }

    #[test]
    fn degenerate_source_box_errors() {
        let f = frame_with(0, |_| kp(1.0, 1.0, 1.0));
        let err = align_keypoints(&f, &Rect::new(0.0, 0.0, 0.0, 5.0), &Rect::new(0.0, 0.0, 1.0, 1.0));
        assert!(matches!(err, Err(Error::Alignment(_))));
    }

    #[test]
    fn bbox_ignores_low_confidence() {
        let f = frame_with(0, |i| if i == 0 { kp(100.0, 100.0, 0.1) } else { kp(i as f64, 1.0 + i as f64, 0.9) });
        let b = joint_bbox(&f, 0.3).unwrap();
        assert_eq!(b, Rect::new(1.0, 2.0, 15.0, 15.0));
        let none = frame_with(0, |_| kp(0.0, 0.0, 0.0));
        assert!(joint_bbox(&none, 0.3).is_none());
    }
}
