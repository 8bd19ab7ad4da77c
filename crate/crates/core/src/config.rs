//! Pipeline configuration.
//!
//! Plain-text `key = value` file, one entry per line, `#` starts a comment.
//! Unknown keys are rejected. See [`PipelineConfig::KEYS`] for the full list.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::{Strategy, TARGET_HEIGHT, TARGET_WIDTH};
use crate::pose::{Joint, DEFAULT_TAU};
use crate::render::{Canvas, PartMapping, RenderConfig, DEFAULT_HEAD_JOINTS, DEFAULT_LINE_WIDTH, DEFAULT_RADIUS};
use crate::synth::Condition;

/// How keypoints are brought into silhouette coordinates before rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Keypoints are already in silhouette pixel coordinates.
    None,
    /// Map the joint bounding box onto the silhouette foreground box.
    Bbox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tau: f64,
    pub radius: f64,
    pub line_width: f64,
    pub strategy: Strategy,
    pub target_height: u32,
    pub target_width: u32,
    pub bands: usize,
    pub stripes: usize,
    pub margin: f64,
    pub ce_weight: f64,
    pub triplet_weight: f64,
    pub seed: u64,
    pub head_joints: Vec<Joint>,
    pub align: AlignMode,
    pub identities: usize,
    pub clips: usize,
    pub frames: usize,
    pub conditions: Vec<Condition>,
    pub canvas_height: u32,
    pub canvas_width: u32,
    pub dataset: PathBuf,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau: DEFAULT_TAU,
            radius: DEFAULT_RADIUS,
            line_width: DEFAULT_LINE_WIDTH,
            strategy: Strategy::Crf,
            target_height: TARGET_HEIGHT,
            target_width: TARGET_WIDTH,
            bands: 64,
            stripes: 16,
            margin: 0.2,
            ce_weight: 1.0,
            triplet_weight: 1.0,
            seed: 0,
            head_joints: DEFAULT_HEAD_JOINTS.to_vec(),
            align: AlignMode::None,
            identities: 10,
            clips: 4,
            frames: 30,
            conditions: vec![Condition::Normal, Condition::Bag],
            canvas_height: 128,
            canvas_width: 88,
            dataset: PathBuf::from("dataset"),
            out: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "tau",
        "radius",
        "line_width",
        "strategy",
        "target_height",
        "target_width",
        "bands",
        "stripes",
        "margin",
        "ce_weight",
        "triplet_weight",
        "seed",
        "head_joints",
        "align",
        "identities",
        "clips",
        "frames",
        "conditions",
        "canvas_height",
        "canvas_width",
        "dataset",
        "out",
    ];

    /// Keys that do not change any computed artifact.
    const UNHASHED: &'static [&'static str] = &["dataset", "out"];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "tau" => self.tau = parse_num(key, v)?,
            "radius" => self.radius = parse_num(key, v)?,
            "line_width" => self.line_width = parse_num(key, v)?,
            "strategy" => self.strategy = Strategy::parse(v)?,
            "target_height" => self.target_height = parse_num(key, v)?,
            "target_width" => self.target_width = parse_num(key, v)?,
            "bands" => self.bands = parse_num(key, v)?,
            "stripes" => self.stripes = parse_num(key, v)?,
            "margin" => self.margin = parse_num(key, v)?,
            "ce_weight" => self.ce_weight = parse_num(key, v)?,
            "triplet_weight" => self.triplet_weight = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "head_joints" => {
                self.head_joints = v
                    .split(',')
                    .map(|s| {
                        Joint::from_name(s.trim())
                            .ok_or_else(|| Error::Config(format!("head_joints: unknown joint {s:?}")))
                    })
                    .collect::<Result<_>>()?
            }
            "align" => {
                self.align = match v {
                    "none" => AlignMode::None,
                    "bbox" => AlignMode::Bbox,
                    _ => return Err(Error::Config(format!("align: expected none or bbox, got {v:?}"))),
                }
            }
            "identities" => self.identities = parse_num(key, v)?,
            "clips" => self.clips = parse_num(key, v)?,
            "frames" => self.frames = parse_num(key, v)?,
            "conditions" => {
                self.conditions = v
                    .split(',')
                    .map(|s| Condition::parse(s.trim()))
                    .collect::<Result<_>>()?
            }
            "canvas_height" => self.canvas_height = parse_num(key, v)?,
            "canvas_width" => self.canvas_width = parse_num(key, v)?,
            "dataset" => self.dataset = PathBuf::from(v),
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "tau" => self.tau.to_string(),
            "radius" => self.radius.to_string(),
            "line_width" => self.line_width.to_string(),
            "strategy" => self.strategy.to_string(),
            "target_height" => self.target_height.to_string(),
            "target_width" => self.target_width.to_string(),
            "bands" => self.bands.to_string(),
            "stripes" => self.stripes.to_string(),
            "margin" => self.margin.to_string(),
            "ce_weight" => self.ce_weight.to_string(),
            "triplet_weight" => self.triplet_weight.to_string(),
            "seed" => self.seed.to_string(),
            "head_joints" => self.head_joints.iter().map(|j| j.name()).collect::<Vec<_>>().join(","),
            "align" => match self.align {
                AlignMode::None => "none".into(),
                AlignMode::Bbox => "bbox".into(),
            },
            "identities" => self.identities.to_string(),
            "clips" => self.clips.to_string(),
            "frames" => self.frames.to_string(),
            "conditions" => self.conditions.iter().map(|c| c.name()).collect::<Vec<_>>().join(","),
            "canvas_height" => self.canvas_height.to_string(),
            "canvas_width" => self.canvas_width.to_string(),
            "dataset" => self.dataset.display().to_string(),
            "out" => self.out.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    /// Applies a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{origin}:{}: {msg}", i + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.tau) {
            return fail(format!("tau {} outside [0, 1]", self.tau));
        }
        if !(self.radius >= 1.0) || !(self.line_width >= 1.0) {
            return fail("radius and line_width must be at least 1".into());
        }
        if self.target_height == 0 || self.target_width == 0 || self.canvas_height == 0 || self.canvas_width == 0 {
            return fail("image sizes must be positive".into());
        }
        if self.bands == 0 || self.stripes == 0 || !self.bands.is_multiple_of(self.stripes) {
            return fail(format!(
                "bands ({}) must be a positive multiple of stripes ({})",
                self.bands, self.stripes
            ));
        }
        if self.bands > self.target_height as usize {
            return fail(format!("bands ({}) exceeds target_height", self.bands));
        }
        if !(self.margin > 0.0) {
            return fail("margin must be positive".into());
        }
        if !(self.ce_weight >= 0.0) || !(self.triplet_weight >= 0.0) {
            return fail("loss weights must be non-negative".into());
        }
        if self.head_joints.is_empty() {
            return fail("head_joints is empty".into());
        }
        if self.identities < 2 || self.clips == 0 || self.frames == 0 || self.conditions.is_empty() {
            return fail("need identities >= 2, clips >= 1, frames >= 1 and a condition".into());
        }
        Ok(())
    }

    /// Canonical text of every artifact-affecting key, sorted by key.
    pub fn canonical_text(&self) -> String {
        let mut keys: Vec<&str> = Self::KEYS
            .iter()
            .copied()
            .filter(|k| !Self::UNHASHED.contains(k))
            .collect();
        keys.sort_unstable();
        let mut s = String::new();
        for k in keys {
            let _ = writeln!(s, "{k}={}", self.get(k).unwrap_or_default());
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn canvas(&self) -> Canvas {
        Canvas::new(self.canvas_width, self.canvas_height)
    }

    pub fn render_config(&self, canvas: Canvas) -> Result<RenderConfig> {
        RenderConfig::new(self.radius, self.line_width, self.tau, canvas)
    }

    pub fn part_mapping(&self) -> Result<PartMapping> {
        PartMapping::coco17(&self.head_joints)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.dataset.join("out"))
    }
}
