//! Skeleton-guided part rendering.
//!
//! A [`PartMapping`] lists the body parts in draw order (lowest first). Each
//! part owns one class id and is drawn either as discs around joints (the
//! head) or as capsules between anchors (torso, neck, limbs). A part is drawn
//! only when every joint it references passed [`filter_valid`]; later parts
//! overwrite earlier ones.

pub mod raster;

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::label::{self, LabelRaster, NUM_CLASSES};
use crate::pose::{filter_valid, Joint, KeypointFrame, ValidJoints, ValidityConfig, DEFAULT_TAU};

pub use raster::{rasterize_circle, rasterize_segment, Canvas, Point};

pub const DEFAULT_RADIUS: f64 = 10.0;
pub const DEFAULT_LINE_WIDTH: f64 = 12.0;

/// Segment endpoint: a joint, or the midpoint of two joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Joint(Joint),
    Midpoint(Joint, Joint),
}

impl Anchor {
    fn joints(&self) -> impl Iterator<Item = Joint> {
        let (a, b) = match *self {
            Anchor::Joint(j) => (j, None),
            Anchor::Midpoint(j, k) => (j, Some(k)),
        };
        std::iter::once(a).chain(b)
    }

    fn resolve(&self, valid: &ValidJoints) -> Option<Point> {
        match *self {
            Anchor::Joint(j) => valid.get(j).map(|k| Point::new(k.x, k.y)),
            Anchor::Midpoint(j, k) => {
                let (p, q) = (valid.get(j)?, valid.get(k)?);
                Some(Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartKind {
    /// Filled disc of the configured radius at each joint.
    Discs(Vec<Joint>),
    /// Capsule of the configured line width along each segment.
    Segments(Vec<(Anchor, Anchor)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub class: u8,
    pub kind: PartKind,
}

impl Part {
    pub fn joints(&self) -> Vec<Joint> {
        let mut js: Vec<Joint> = match &self.kind {
            PartKind::Discs(js) => js.clone(),
            PartKind::Segments(segs) => segs
                .iter()
                .flat_map(|(a, b)| a.joints().chain(b.joints()))
                .collect(),
        };
        js.sort();
        js.dedup();
        js
    }
}

/// Joints that carry the head discs by default.
pub const DEFAULT_HEAD_JOINTS: [Joint; 3] = [Joint::Nose, Joint::LeftEye, Joint::RightEye];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartMapping {
    parts: Vec<Part>,
}

impl Default for PartMapping {
    fn default() -> Self {
        Self::coco17(&DEFAULT_HEAD_JOINTS).expect("default head joints are valid")
    }
}

impl PartMapping {
    /// The COCO17 decomposition into 11 skeleton classes, in z-order
    /// torso, neck, thighs, shins, upper arms, forearms, head.
    pub fn coco17(head_joints: &[Joint]) -> Result<Self> {
        use Anchor::Joint as J;
        use Joint::*;
        if head_joints.is_empty() {
            return Err(Error::Config("head needs at least one joint".into()));
        }
        let seg = |class, a, b| Part {
            class,
            kind: PartKind::Segments(vec![(J(a), J(b))]),
        };
        let parts = vec![
            Part {
                class: label::TORSO,
                kind: PartKind::Segments(vec![
                    (J(LeftShoulder), J(RightShoulder)),
                    (J(LeftHip), J(RightHip)),
                    (J(LeftShoulder), J(LeftHip)),
                    (J(RightShoulder), J(RightHip)),
                ]),
            },
            Part {
                class: label::NECK,
                kind: PartKind::Segments(vec![(
                    Anchor::Midpoint(LeftShoulder, RightShoulder),
                    J(Nose),
                )]),
            },
            seg(label::LEFT_THIGH, LeftHip, LeftKnee),
            seg(label::RIGHT_THIGH, RightHip, RightKnee),
            seg(label::LEFT_SHIN, LeftKnee, LeftAnkle),
            seg(label::RIGHT_SHIN, RightKnee, RightAnkle),
            seg(label::LEFT_UPPER_ARM, LeftShoulder, LeftElbow),
            seg(label::RIGHT_UPPER_ARM, RightShoulder, RightElbow),
            seg(label::LEFT_FOREARM, LeftElbow, LeftWrist),
            seg(label::RIGHT_FOREARM, RightElbow, RightWrist),
            Part {
                class: label::HEAD,
                kind: PartKind::Discs(head_joints.to_vec()),
            },
        ];
        PartMapping::new(parts)
    }

    /// Validates a custom mapping: skeleton classes only (2..=12), each class
    /// used by exactly one part.
    pub fn new(parts: Vec<Part>) -> Result<Self> {
        let mut seen = [false; NUM_CLASSES];
        for p in &parts {
            let c = p.class as usize;
            if !(2..NUM_CLASSES).contains(&c) {
                return Err(Error::Config(format!(
                    "part class {c} is not a skeleton class"
                )));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::Config(format!("class {c} mapped twice")));
            }
            let empty = match &p.kind {
                PartKind::Discs(js) => js.is_empty(),
                PartKind::Segments(s) => s.is_empty(),
            };
            if empty {
                return Err(Error::Config(format!("part for class {c} has no geometry")));
            }
        }
        Ok(PartMapping { parts })
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub radius: f64,
    pub line_width: f64,
    pub tau: f64,
    pub canvas: Canvas,
}

impl RenderConfig {
    pub fn new(radius: f64, line_width: f64, tau: f64, canvas: Canvas) -> Result<Self> {
        if !(radius >= 1.0) {
            return Err(Error::Config(format!("radius {radius} < 1")));
        }
        if !(line_width >= 1.0) {
            return Err(Error::Config(format!("line width {line_width} < 1")));
        }
        if canvas.width == 0 || canvas.height == 0 {
            return Err(Error::Config("canvas must be at least 1x1".into()));
        }
        ValidityConfig::new(tau, canvas.width, canvas.height)?;
        Ok(RenderConfig {
            radius,
            line_width,
            tau,
            canvas,
        })
    }

    /// Shipped defaults (radius 10, width 12, tau 0.3) on the given canvas.
    pub fn with_canvas(canvas: Canvas) -> Self {
        RenderConfig {
            radius: DEFAULT_RADIUS,
            line_width: DEFAULT_LINE_WIDTH,
            tau: DEFAULT_TAU,
            canvas,
        }
    }

    pub fn validity(&self) -> ValidityConfig {
        ValidityConfig {
            tau: self.tau,
            width: self.canvas.width,
            height: self.canvas.height,
        }
    }
}

/// Draws one part into `raster` if all of its joints are valid. Returns
/// whether anything was attempted.
fn draw_part(raster: &mut LabelRaster, part: &Part, valid: &ValidJoints, cfg: &RenderConfig) -> bool {
    if !part.joints().iter().all(|&j| valid.contains(j)) {
        return false;
    }
    let class = part.class;
    let canvas = cfg.canvas;
    match &part.kind {
        PartKind::Discs(js) => {
            for &j in js {
                let k = valid.get(j).expect("checked above");
                raster::for_each_disc_span(Point::new(k.x, k.y), cfg.radius, canvas, |y, x0, x1| {
                    raster.fill_span(y, x0, x1, class)
                });
            }
        }
        PartKind::Segments(segs) => {
            for (a, b) in segs {
                let (Some(pa), Some(pb)) = (a.resolve(valid), b.resolve(valid)) else {
                    unreachable!("anchors resolved from validated joints");
                };
                raster::for_each_capsule_span(pa, pb, cfg.line_width, canvas, |y, x0, x1| {
                    raster.fill_span(y, x0, x1, class)
                });
            }
        }
    }
    true
}

/// Renders one frame into a part-labeled raster on `cfg.canvas`.
pub fn render_parsing_skeleton(frame: &KeypointFrame, mapping: &PartMapping, cfg: &RenderConfig) -> LabelRaster {
    let mut raster = LabelRaster::new(cfg.canvas.width, cfg.canvas.height);
    render_into(&mut raster, frame, mapping, cfg);
    raster
}

/// Same as [`render_parsing_skeleton`] but reuses a raster buffer. Returns
/// the number of parts drawn.
pub fn render_into(raster: &mut LabelRaster, frame: &KeypointFrame, mapping: &PartMapping, cfg: &RenderConfig) -> usize {
    assert_eq!(
        (raster.width(), raster.height()),
        (cfg.canvas.width, cfg.canvas.height),
        "raster does not match canvas"
    );
    raster.clear();
    let valid = filter_valid(frame, &cfg.validity());
    mapping
        .parts()
        .iter()
        .filter(|p| draw_part(raster, p, &valid, cfg))
        .count()
}

pub type Palette = [[u8; 3]; NUM_CLASSES];

/// Default preview colors, indexed by class id. Fixed across versions.
pub const DEFAULT_PALETTE: Palette = [
    [0, 0, 0],       // background
    [128, 128, 128], // silhouette
    [255, 0, 0],     // head
    [255, 170, 0],   // torso
    [255, 255, 0],   // neck
    [0, 255, 0],     // l-upper-arm
    [0, 128, 255],   // r-upper-arm
    [128, 255, 128], // l-forearm
    [128, 128, 255], // r-forearm
    [255, 0, 255],   // l-thigh
    [0, 255, 255],   // r-thigh
    [170, 0, 85],    // l-shin
    [0, 85, 170],    // r-shin
];

fn check_palette(palette: &Palette) -> Result<()> {
    if palette[0] != [0, 0, 0] {
        return Err(Error::Config("palette entry 0 must be black".into()));
    }
    for i in 0..NUM_CLASSES {
        for j in i + 1..NUM_CLASSES {
            if palette[i] == palette[j] {
                return Err(Error::Config(format!(
                    "palette entries {i} and {j} share a color"
                )));
            }
        }
    }
    Ok(())
}

/// Per-pixel palette lookup.
pub fn colorize(raster: &LabelRaster, palette: &Palette) -> Result<RgbImage> {
    check_palette(palette)?;
    let mut img = RgbImage::new(raster.width(), raster.height());
    for (px, &l) in img.pixels_mut().zip(raster.labels()) {
        *px = Rgb(palette[l as usize]);
    }
    Ok(img)
}

/// Inverse of [`colorize`]; fails on any color not in the palette.
pub fn decolorize(img: &RgbImage, palette: &Palette) -> Result<LabelRaster> {
    check_palette(palette)?;
    let labels = img
        .pixels()
        .map(|p| {
            palette
                .iter()
                .position(|c| *c == p.0)
                .map(|i| i as u8)
                .ok_or_else(|| Error::Schema(format!("color {:?} not in palette", p.0)))
        })
        .collect::<Result<Vec<u8>>>()?;
    LabelRaster::from_vec(img.width(), img.height(), labels)
}

pub fn save_preview(raster: &LabelRaster, palette: &Palette, path: &Path) -> Result<()> {
    colorize(raster, palette)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Keypoint;
    use std::collections::BTreeSet;

    fn frame(conf: impl Fn(Joint) -> f64) -> KeypointFrame {
        // Upright figure on a 88x128 canvas.
        let pos = |j: Joint| -> (f64, f64) {
            use Joint::*;
            match j {
                Nose => (46.0, 14.0),
                LeftEye => (44.0, 11.0),
                RightEye => (48.0, 11.0),
                LeftEar => (40.0, 12.0),
                RightEar => (52.0, 12.0),
                LeftShoulder => (36.0, 30.0),
                RightShoulder => (52.0, 30.0),
                LeftElbow => (34.0, 50.0),
                RightElbow => (54.0, 50.0),
                LeftWrist => (33.0, 68.0),
                RightWrist => (55.0, 68.0),
                LeftHip => (39.0, 66.0),
                RightHip => (49.0, 66.0),
                LeftKnee => (38.0, 92.0),
                RightKnee => (50.0, 92.0),
                LeftAnkle => (37.0, 118.0),
                RightAnkle => (51.0, 118.0),
            }
        };
        KeypointFrame {
            frame_index: 0,
            joints: std::array::from_fn(|i| {
                let j = Joint::ALL[i];
                let (x, y) = pos(j);
                Keypoint::new(x, y, conf(j)).unwrap()
            }),
        }
    }

    fn cfg() -> RenderConfig {
        RenderConfig::with_canvas(Canvas::new(88, 128))
    }

    #[test]
    fn defaults_are_radius_10_width_12() {
        let c = cfg();
        assert_eq!((c.radius, c.line_width, c.tau), (10.0, 12.0, 0.3));
    }

    #[test]
    fn zero_confidence_is_background() {
        let r = render_parsing_skeleton(&frame(|_| 0.0), &PartMapping::default(), &cfg());
        assert!(r.is_background());
    }

    #[test]
    fn head_only_is_union_of_three_discs() {
        let valid = |j: Joint| {
            if DEFAULT_HEAD_JOINTS.contains(&j) {
                0.9
            } else {
                0.0
            }
        };
        let f = frame(valid);
        let r = render_parsing_skeleton(&f, &PartMapping::default(), &cfg());
        let mut want = BTreeSet::new();
        for j in DEFAULT_HEAD_JOINTS {
            let k = f.joint(j);
            want.extend(rasterize_circle(Point::new(k.x, k.y), 10.0, cfg().canvas));
        }
        let mut got = BTreeSet::new();
        for y in 0..r.height() {
            for x in 0..r.width() {
                match r.get(x, y) {
                    0 => {}
                    label::HEAD => {
                        got.insert((x, y));
                    }
                    c => panic!("unexpected class {c}"),
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn full_figure_uses_all_skeleton_classes() {
        let r = render_parsing_skeleton(&frame(|_| 0.9), &PartMapping::default(), &cfg());
        let present: BTreeSet<u8> = r.labels().iter().copied().collect();
        // Neck sits under the head discs here, so it may be fully covered.
        for c in 2..13u8 {
            if c != label::NECK {
                assert!(present.contains(&c), "class {c} missing");
            }
        }
        assert!(!present.contains(&label::SILHOUETTE));
    }

    #[test]
    fn partially_valid_limb_is_skipped() {
        let r = render_parsing_skeleton(
            &frame(|j| if j == Joint::LeftAnkle { 0.1 } else { 0.9 }),
            &PartMapping::default(),
            &cfg(),
        );
        assert!(!r.labels().contains(&label::LEFT_SHIN));
        assert!(r.labels().contains(&label::RIGHT_SHIN));
    }

    #[test]
    fn mapping_validation() {
        assert!(PartMapping::coco17(&[]).is_err());
        let dup = vec![
            Part {
                class: 2,
                kind: PartKind::Discs(vec![Joint::Nose]),
            },
            Part {
                class: 2,
                kind: PartKind::Discs(vec![Joint::LeftEye]),
            },
        ];
        assert!(PartMapping::new(dup).is_err());
        let bg = vec![Part {
            class: 1,
            kind: PartKind::Discs(vec![Joint::Nose]),
        }];
        assert!(PartMapping::new(bg).is_err());
        assert_eq!(PartMapping::default().parts().len(), 11);
    }

    #[test]
    fn config_validation() {
        let c = Canvas::new(10, 10);
        assert!(RenderConfig::new(0.5, 12.0, 0.3, c).is_err());
        assert!(RenderConfig::new(10.0, 0.0, 0.3, c).is_err());
        assert!(RenderConfig::new(10.0, 12.0, 1.5, c).is_err());
        assert!(RenderConfig::new(10.0, 12.0, 0.3, Canvas::new(0, 3)).is_err());
    }

    #[test]
    fn colorize_examples() {
        let bg = LabelRaster::new(4, 3);
        let img = colorize(&bg, &DEFAULT_PALETTE).unwrap();
        assert!(img.pixels().all(|p| p.0 == [0, 0, 0]));

        let mut r = LabelRaster::new(4, 3);
        r.set(1, 1, label::HEAD);
        r.set(2, 1, label::HEAD);
        let img = colorize(&r, &DEFAULT_PALETTE).unwrap();
        let colors: BTreeSet<[u8; 3]> = img.pixels().map(|p| p.0).collect();
        assert_eq!(colors.len(), 2);
        assert_eq!(decolorize(&img, &DEFAULT_PALETTE).unwrap(), r);
    }

    #[test]
    fn palette_must_be_injective() {
        let mut p = DEFAULT_PALETTE;
        p[5] = p[6];
        assert!(colorize(&LabelRaster::new(1, 1), &p).is_err());
    }
}
