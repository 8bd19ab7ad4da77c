//! Procedural side-view walkers with paired keypoints and silhouettes.
//!
//! The gait model is a planar pendulum: a vertical torso, thighs swinging
//! sinusoidally about the hip, knees flexing during the swing phase and arms
//! counter-swinging. Identity lives in the limb lengths, cadence and stride;
//! each clip perturbs phase, cadence and horizontal placement. Silhouettes are
//! unions of body-proportional capsules around the noise-free pose, so the
//! keypoints play the role of a pose estimator's (jittered) output.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Manifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fusion::SilhouetteMask;
use crate::pose::{save_keypoint_sequence, Joint, Keypoint, KeypointFrame, KeypointSequence, NUM_JOINTS};
use crate::render::raster::{for_each_capsule_span, for_each_disc_span};
use crate::render::{Canvas, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Normal,
    Bag,
    ClothesChange,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Normal, Condition::Bag, Condition::ClothesChange];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::Bag => "bag",
            Condition::ClothesChange => "clothes-change",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition {s:?}")))
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerParams {
    pub identity: u32,
    /// Hip-center to shoulder-center, pixels.
    pub torso: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub thigh: f64,
    pub shin: f64,
    /// Gait phase advance per frame, radians.
    pub cadence: f64,
    /// Peak thigh swing from vertical, radians.
    pub stride_amplitude: f64,
    pub phase: f64,
    /// Nose height above the shoulder line, pixels.
    pub height: f64,
    /// Horizontal offset of the hip from the canvas center, pixels.
    pub view_offset: f64,
}

impl WalkerParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.torso, self.upper_arm, self.forearm, self.thigh, self.shin, self.height];
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("walker {}: lengths must be positive", self.identity)));
        }
        if !(self.cadence > 0.0) {
            return Err(Error::Config(format!("walker {}: cadence must be positive", self.identity)));
        }
        if !(self.stride_amplitude >= 0.0) || !self.phase.is_finite() || !self.view_offset.is_finite() {
            return Err(Error::Config(format!("walker {}: bad stride/phase/offset", self.identity)));
        }
        Ok(())
    }

    fn limbs(&self) -> [f64; 5] {
        [self.torso, self.upper_arm, self.forearm, self.thigh, self.shin]
    }

    /// Largest relative difference over the five limb lengths.
    pub fn limb_separation(&self, other: &WalkerParams) -> f64 {
        self.limbs()
            .iter()
            .zip(other.limbs())
            .map(|(a, b)| (a - b).abs() / a.min(b))
            .fold(0.0, f64::max)
    }
}

/// Keypoint corruption applied on top of the exact pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    /// Standard deviation of per-coordinate jitter, pixels (clamped at 2.5σ).
    pub jitter_px: f64,
    /// Probability that a joint is reported with low confidence.
    pub dropout: f64,
}

impl Noise {
    pub const NONE: Noise = Noise {
        jitter_px: 0.0,
        dropout: 0.0,
    };
}

impl Default for Noise {
    fn default() -> Self {
        Noise {
            jitter_px: 0.6,
            dropout: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub params: WalkerParams,
    pub condition: Condition,
    pub keypoints: KeypointSequence,
    pub silhouettes: Vec<SilhouetteMask>,
}

/// splitmix64 finalizer; used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Exact joint positions at time `t` (frames).
fn pose_at(p: &WalkerParams, canvas: Canvas, t: f64) -> [Point; NUM_JOINTS] {
    let scale = canvas.height as f64 / 128.0;
    let ground = canvas.height as f64 - 6.0 * scale;
    let depth = 2.0 * scale;
    let psi = p.cadence * t + p.phase;
    let a = p.stride_amplitude;

    let bob = 0.08 * a * (p.thigh + p.shin) * (2.0 * psi).cos().abs();
    let hip = Point::new(
        canvas.width as f64 / 2.0 + p.view_offset,
        ground - 0.97 * (p.thigh + p.shin) - bob,
    );
    let lean: f64 = 0.05;
    let sh = Point::new(hip.x + p.torso * lean.sin(), hip.y - p.torso * lean.cos());

    let dir = |o: Point, len: f64, ang: f64| Point::new(o.x + len * ang.sin(), o.y + len * ang.cos());
    let side = |pt: Point, s: f64| Point::new(pt.x + s * depth, pt.y);

    let mut out = [Point::new(0.0, 0.0); NUM_JOINTS];
    // Left side is nearer the camera and drawn shifted by +depth.
    for (s, leg_phase, hip_j, knee_j, ankle_j, sh_j, el_j, wr_j) in [
        (1.0, 0.0, Joint::LeftHip, Joint::LeftKnee, Joint::LeftAnkle, Joint::LeftShoulder, Joint::LeftElbow, Joint::LeftWrist),
        (-1.0, PI, Joint::RightHip, Joint::RightKnee, Joint::RightAnkle, Joint::RightShoulder, Joint::RightElbow, Joint::RightWrist),
    ] {
        let phi = psi + leg_phase;
        let thigh_ang = a * phi.sin();
        let knee_flex = 1.1 * a * (phi + PI / 2.0).sin().max(0.0);
        let h = side(hip, s);
        let knee = dir(h, p.thigh, thigh_ang);
        let ankle = dir(knee, p.shin, thigh_ang - knee_flex);
        let shoulder = side(sh, s);
        let arm_ang = -0.7 * a * phi.sin();
        let elbow = dir(shoulder, p.upper_arm, arm_ang);
        let wrist = dir(elbow, p.forearm, arm_ang + 0.35 + 0.25 * a * (phi.cos() + 1.0));
        out[hip_j.index()] = h;
        out[knee_j.index()] = knee;
        out[ankle_j.index()] = ankle;
        out[sh_j.index()] = shoulder;
        out[el_j.index()] = elbow;
        out[wr_j.index()] = wrist;
    }
    let hh = p.height;
    let nose = Point::new(sh.x + 0.3 * hh, sh.y - hh);
    out[Joint::Nose.index()] = nose;
    out[Joint::LeftEye.index()] = Point::new(nose.x - 0.1 * hh + 0.5 * depth, nose.y - 0.22 * hh);
    out[Joint::RightEye.index()] = Point::new(nose.x - 0.1 * hh - 0.5 * depth, nose.y - 0.22 * hh);
    out[Joint::LeftEar.index()] = Point::new(nose.x - 0.45 * hh + 0.5 * depth, nose.y - 0.12 * hh);
    out[Joint::RightEar.index()] = Point::new(nose.x - 0.45 * hh - 0.5 * depth, nose.y - 0.12 * hh);
    out
}

fn draw_silhouette(p: &WalkerParams, pose: &[Point; NUM_JOINTS], condition: Condition, canvas: Canvas) -> SilhouetteMask {
    let mut sil = SilhouetteMask::new(canvas.width, canvas.height);
    let at = |j: Joint| pose[j.index()];
    let mid = |a: Joint, b: Joint| {
        let (p, q) = (at(a), at(b));
        Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)
    };
    let mut capsule = |a: Point, b: Point, w: f64| {
        for_each_capsule_span(a, b, w, canvas, |y, x0, x1| sil.fill_span(y, x0, x1));
    };

    let hip = mid(Joint::LeftHip, Joint::RightHip);
    let sh = mid(Joint::LeftShoulder, Joint::RightShoulder);
    let (torso_w, torso_end) = match condition {
        Condition::ClothesChange => {
            // Long coat: wider torso reaching down over the thighs.
            let down = 0.35 * p.thigh;
            (0.75 * p.torso, Point::new(hip.x, hip.y + down))
        }
        _ => (0.45 * p.torso, hip),
    };
    capsule(sh, torso_end, torso_w);
    let nose = at(Joint::Nose);
    capsule(sh, nose, 0.35 * p.height);
    for (a, b, w) in [
        (Joint::LeftHip, Joint::LeftKnee, 0.36 * p.thigh),
        (Joint::RightHip, Joint::RightKnee, 0.36 * p.thigh),
        (Joint::LeftKnee, Joint::LeftAnkle, 0.26 * p.shin),
        (Joint::RightKnee, Joint::RightAnkle, 0.26 * p.shin),
        (Joint::LeftShoulder, Joint::LeftElbow, 0.28 * p.upper_arm),
        (Joint::RightShoulder, Joint::RightElbow, 0.28 * p.upper_arm),
        (Joint::LeftElbow, Joint::LeftWrist, 0.22 * p.forearm),
        (Joint::RightElbow, Joint::RightWrist, 0.22 * p.forearm),
    ] {
        capsule(at(a), at(b), w);
    }
    let head = Point::new(nose.x - 0.25 * p.height, nose.y - 0.1 * p.height);
    for_each_disc_span(head, 0.55 * p.height, canvas, |y, x0, x1| sil.fill_span(y, x0, x1));
    if condition == Condition::Bag {
        let w = at(Joint::RightWrist);
        let r = 0.28 * p.torso;
        let center = Point::new(w.x, w.y + 0.6 * r);
        for_each_disc_span(center, r, canvas, |y, x0, x1| sil.fill_span(y, x0, x1));
    }
    sil
}

/// Generates `frames` frames of one walker under `condition`. Output depends
/// only on the arguments.
pub fn generate_clip(
    params: &WalkerParams,
    condition: Condition,
    frames: usize,
    noise: &Noise,
    canvas: Canvas,
    seed: u64,
) -> Result<SynthClip> {
    params.validate()?;
    if frames == 0 {
        return Err(Error::Config("clip needs at least one frame".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x6b70, params.identity as u64]));
    let jitter = Normal::new(0.0, noise.jitter_px.max(0.0)).expect("finite sigma");
    let clamp = 2.5 * noise.jitter_px.max(0.0);

    let mut kp_frames = Vec::with_capacity(frames);
    let mut sils = Vec::with_capacity(frames);
    for i in 0..frames {
        let pose = pose_at(params, canvas, i as f64);
        sils.push(draw_silhouette(params, &pose, condition, canvas));
        let joints = std::array::from_fn(|j| {
            let p = pose[j];
            let (dx, dy) = if noise.jitter_px > 0.0 {
                let dx: f64 = jitter.sample(&mut rng);
                let dy: f64 = jitter.sample(&mut rng);
                (dx.clamp(-clamp, clamp), dy.clamp(-clamp, clamp))
            } else {
                (0.0, 0.0)
            };
            let confidence = if noise.dropout > 0.0 && rng.random::<f64>() < noise.dropout {
                rng.random_range(0.0..0.25)
            } else if noise.dropout > 0.0 {
                rng.random_range(0.75..1.0)
            } else {
                0.95
            };
            Keypoint {
                x: p.x + dx,
                y: p.y + dy,
                confidence,
            }
        });
        kp_frames.push(KeypointFrame {
            frame_index: i as u32,
            joints,
        });
    }
    let seq_id = format!("walker{:03}", params.identity);
    Ok(SynthClip {
        params: *params,
        condition,
        keypoints: KeypointSequence::new(seq_id, kp_frames)?,
        silhouettes: sils,
    })
}

/// Base (identity-level) parameters for `count` walkers, pairwise separated
/// by at least 5% in some limb length.
pub fn sample_identities(count: usize, canvas: Canvas, seed: u64) -> Vec<WalkerParams> {
    let s = canvas.height as f64 / 128.0;
    let mut out: Vec<WalkerParams> = Vec::with_capacity(count);
    for id in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x1d, id as u64]));
        loop {
            let p = WalkerParams {
                identity: id as u32,
                torso: s * rng.random_range(28.0..36.0),
                upper_arm: s * rng.random_range(16.0..22.0),
                forearm: s * rng.random_range(14.0..19.0),
                thigh: s * rng.random_range(23.0..30.0),
                shin: s * rng.random_range(23.0..30.0),
                cadence: rng.random_range(0.18..0.30),
                stride_amplitude: rng.random_range(0.30..0.50),
                phase: 0.0,
                height: s * rng.random_range(10.0..13.0),
                view_offset: 0.0,
            };
            if out.iter().all(|q| q.limb_separation(&p) >= 0.05) {
                out.push(p);
                break;
            }
        }
    }
    out
}

/// Per-clip perturbation of an identity: phase, placement, cadence, stride.
pub fn clip_params(base: &WalkerParams, canvas: Canvas, clip_seed: u64) -> WalkerParams {
    let s = canvas.height as f64 / 128.0;
    let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
    WalkerParams {
        phase: rng.random_range(0.0..2.0 * PI),
        view_offset: s * rng.random_range(-4.0..4.0),
        cadence: base.cadence * rng.random_range(0.95..1.05),
        stride_amplitude: base.stride_amplitude * rng.random_range(0.95..1.05),
        ..*base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub identities: usize,
    pub clips: usize,
    pub conditions: Vec<Condition>,
    pub frames: usize,
    pub canvas: Canvas,
    pub noise: Noise,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn sequence_id(identity: usize, condition: Condition, clip: usize) -> String {
        format!("id{identity:03}_{}_{clip:02}", condition.name())
    }

    /// Gallery: the first half (rounded up) of the normal clips. Everything
    /// else is a probe.
    pub fn split(&self, condition: Condition, clip: usize) -> Split {
        if condition == Condition::Normal && clip < self.clips.div_ceil(2) {
            Split::Gallery
        } else {
            Split::Probe
        }
    }
}

struct ClipJob {
    identity: usize,
    condition: Condition,
    clip: usize,
}

fn prepare_output_dir(root: &Path, force: bool) -> Result<()> {
    if root.exists() {
        let non_empty = std::fs::read_dir(root)
            .map_err(|e| Error::io(root, e))?
            .next()
            .is_some();
        if non_empty {
            if !force {
                return Err(Error::Dataset(format!(
                    "{} exists and is not empty (use --force to overwrite)",
                    root.display()
                )));
            }
            if !root.join("manifest").is_file() {
                return Err(Error::Dataset(format!(
                    "{} is not a dataset directory; refusing to clear it",
                    root.display()
                )));
            }
            std::fs::remove_dir_all(root).map_err(|e| Error::io(root, e))?;
        }
    }
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))
}

/// Writes a full synthetic dataset under `root` and returns its manifest.
pub fn generate_benchmark(spec: &BenchmarkSpec, root: &Path, force: bool, exec: Exec) -> Result<Manifest> {
    if spec.identities < 2 {
        return Err(Error::Config("benchmark needs at least two identities".into()));
    }
    if spec.clips == 0 || spec.conditions.is_empty() || spec.frames == 0 {
        return Err(Error::Config("benchmark needs clips, conditions and frames".into()));
    }
    prepare_output_dir(root, force)?;
    let bases = sample_identities(spec.identities, spec.canvas, spec.seed);

    let mut jobs = Vec::new();
    for identity in 0..spec.identities {
        for &condition in &spec.conditions {
            for clip in 0..spec.clips {
                jobs.push(ClipJob {
                    identity,
                    condition,
                    clip,
                });
            }
        }
    }

    let entries = exec.try_map(&jobs, |job| -> Result<ManifestEntry> {
        let clip_seed = derive_seed(spec.seed, &[0xc1, job.identity as u64, job.condition as u64, job.clip as u64]);
        let params = clip_params(&bases[job.identity], spec.canvas, clip_seed);
        let clip = generate_clip(&params, job.condition, spec.frames, &spec.noise, spec.canvas, clip_seed)?;
        let seq_id = BenchmarkSpec::sequence_id(job.identity, job.condition, job.clip);
        let seq_dir = root.join(&seq_id);
        let sil_dir = seq_dir.join("sil");
        std::fs::create_dir_all(&sil_dir).map_err(|e| Error::io(&sil_dir, e))?;
        let kp = KeypointSequence {
            sequence_id: seq_id.clone(),
            ..clip.keypoints
        };
        save_keypoint_sequence(&seq_dir.join("keypoints.txt"), &kp)?;
        for (f, sil) in kp.frames.iter().zip(&clip.silhouettes) {
            sil.save_png(&sil_dir.join(format!("{}.png", f.frame_index)))?;
        }
        Ok(ManifestEntry {
            sequence_id: seq_id.clone(),
            identity: format!("id{:03}", job.identity),
            condition: job.condition.name().to_string(),
            split: spec.split(job.condition, job.clip),
            keypoints: PathBuf::from(&seq_id).join("keypoints.txt"),
            silhouettes: PathBuf::from(&seq_id).join("sil"),
        })
    })?;

    let manifest = Manifest::new(entries)?;
    manifest.save(root)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> WalkerParams {
        WalkerParams {
            identity: 0,
            torso: 32.0,
            upper_arm: 19.0,
            forearm: 16.0,
            thigh: 27.0,
            shin: 26.0,
            cadence: 0.25,
            stride_amplitude: 0.4,
            phase: 0.3,
            height: 12.0,
            view_offset: 0.0,
        }
    }

    const CANVAS: Canvas = Canvas {
        width: 88,
        height: 128,
    };

    #[test]
    fn deterministic_under_seed() {
        let a = generate_clip(&base(), Condition::Bag, 12, &Noise::default(), CANVAS, 7).unwrap();
        let b = generate_clip(&base(), Condition::Bag, 12, &Noise::default(), CANVAS, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_clip(&base(), Condition::Bag, 12, &Noise::default(), CANVAS, 8).unwrap();
        assert_ne!(a.keypoints, c.keypoints);
    }

    #[test]
    fn zero_stride_is_a_statue() {
        let p = WalkerParams {
            stride_amplitude: 0.0,
            ..base()
        };
        let clip = generate_clip(&p, Condition::Normal, 10, &Noise::NONE, CANVAS, 1).unwrap();
        let first = &clip.keypoints.frames[0].joints;
        assert!(clip.keypoints.frames.iter().all(|f| &f.joints == first));
        assert!(clip.silhouettes.iter().all(|s| s == &clip.silhouettes[0]));
    }

    #[test]
    fn thigh_length_shows_in_knee_hip_distance() {
        let mean_dist = |p: &WalkerParams| {
            let clip = generate_clip(p, Condition::Normal, 20, &Noise::NONE, CANVAS, 3).unwrap();
            let n = clip.keypoints.frames.len() as f64;
            clip.keypoints
                .frames
                .iter()
                .map(|f| {
                    let h = f.joint(Joint::LeftHip);
                    let k = f.joint(Joint::LeftKnee);
                    (h.x - k.x).hypot(h.y - k.y)
                })
                .sum::<f64>()
                / n
        };
        let short = base();
        let long = WalkerParams { thigh: 30.0, ..base() };
        let delta = mean_dist(&long) - mean_dist(&short);
        assert!((delta - 3.0).abs() <= 1.0, "delta {delta}");
    }

    #[test]
    fn joints_stay_on_canvas_and_inside_silhouette() {
        for cond in Condition::ALL {
            let clip = generate_clip(&base(), cond, 40, &Noise::default(), CANVAS, 11).unwrap();
            for (f, sil) in clip.keypoints.frames.iter().zip(&clip.silhouettes) {
                for k in &f.joints {
                    assert!(k.x >= 0.0 && k.x < 88.0 && k.y >= 0.0 && k.y < 128.0, "{k:?}");
                    let (px, py) = (k.x.floor() as i64, k.y.floor() as i64);
                    let near = (-2..=2).any(|dy| {
                        (-2..=2).any(|dx| {
                            let (x, y) = (px + dx, py + dy);
                            x >= 0 && y >= 0 && x < 88 && y < 128 && sil.get(x as u32, y as u32)
                        })
                    });
                    assert!(near, "{cond}: joint {k:?} far from silhouette");
                }
            }
        }
    }

    #[test]
    fn conditions_change_silhouette_only() {
        let n = generate_clip(&base(), Condition::Normal, 5, &Noise::default(), CANVAS, 2).unwrap();
        let b = generate_clip(&base(), Condition::Bag, 5, &Noise::default(), CANVAS, 2).unwrap();
        let c = generate_clip(&base(), Condition::ClothesChange, 5, &Noise::default(), CANVAS, 2).unwrap();
        assert_eq!(n.keypoints, b.keypoints);
        assert_eq!(n.keypoints, c.keypoints);
        for i in 0..5 {
            assert!(b.silhouettes[i].foreground_count() > n.silhouettes[i].foreground_count());
            assert!(c.silhouettes[i].foreground_count() > n.silhouettes[i].foreground_count());
        }
    }

    #[test]
    fn identities_are_separated() {
        let ids = sample_identities(30, CANVAS, 5);
        for i in 0..ids.len() {
            for j in 0..i {
                assert!(ids[i].limb_separation(&ids[j]) >= 0.05);
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = WalkerParams { thigh: 0.0, ..base() };
        assert!(generate_clip(&p, Condition::Normal, 3, &Noise::NONE, CANVAS, 0).is_err());
        let p = WalkerParams { cadence: 0.0, ..base() };
        assert!(generate_clip(&p, Condition::Normal, 3, &Noise::NONE, CANVAS, 0).is_err());
        assert!(generate_clip(&base(), Condition::Normal, 0, &Noise::NONE, CANVAS, 0).is_err());
    }

    #[test]
    fn condition_names() {
        for c in Condition::ALL {
            assert_eq!(Condition::parse(c.name()).unwrap(), c);
        }
        assert!(Condition::parse("rain").is_err());
    }
}
