//! Silhouette fusion.
//!
//! Composite fusion (CRF) overlays skeleton classes on the silhouette in a
//! single label raster. Disentangled fusion (DCF) gives every class its own
//! binary channel. Both are brought to the network input size with
//! nearest-neighbour sampling, since labels are categorical.

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};
use crate::label::{LabelRaster, BACKGROUND, NUM_CLASSES, SILHOUETTE};
use crate::pose::Rect;

pub const TARGET_HEIGHT: u32 = 64;
pub const TARGET_WIDTH: u32 = 44;

/// Binary foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteMask {
    width: u32,
    height: u32,
    mask: Vec<u8>,
}

impl SilhouetteMask {
    pub fn new(width: u32, height: u32) -> Self {
        SilhouetteMask {
            width,
            height,
            mask: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, mask: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Schema("silhouette must be at least 1x1".into()));
        }
        if mask.len() != width as usize * height as usize {
            return Err(Error::Schema(format!(
                "{} mask values for a {width}x{height} silhouette",
                mask.len()
            )));
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::Schema("silhouette values must be 0 or 1".into()));
        }
        Ok(SilhouetteMask {
            width,
            height,
            mask,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize] != 0
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let w = self.width as usize;
        self.mask[y as usize * w + x as usize] = on as u8;
    }

    pub(crate) fn fill_span(&mut self, y: u32, x0: u32, x1: u32) {
        let w = self.width as usize;
        let row = y as usize * w;
        self.mask[row + x0 as usize..=row + x1 as usize].fill(1);
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v != 0).count()
    }

    /// Box spanning the centers of the outermost foreground pixels.
    pub fn foreground_bbox(&self) -> Option<Rect> {
        let w = self.width as usize;
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.mask.iter().enumerate().filter(|(_, &v)| v != 0) {
            let (x, y) = (i % w, i / w);
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bounds.map(|(x0, y0, x1, y1)| {
            Rect::new(x0 as f64 + 0.5, y0 as f64 + 0.5, (x1 - x0) as f64, (y1 - y0) as f64)
        })
    }

    /// Silhouette as classes {background, silhouette}.
    pub fn lift(&self) -> LabelRaster {
        LabelRaster::from_vec(self.width, self.height, self.mask.clone())
            .expect("mask values are 0/1")
    }

    /// Saves as an 8-bit PNG with foreground 255.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: Vec<u8> = self.mask.iter().map(|&v| v * 255).collect();
        GrayImage::from_raw(self.width, self.height, buf)
            .expect("buffer length matches dimensions")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Loads a grayscale (or color, converted to luma) mask; values above 127
    /// count as foreground.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let gray = img.into_luma8();
        let (w, h) = gray.dimensions();
        let mask = gray.into_raw().into_iter().map(|v| (v > 127) as u8).collect();
        SilhouetteMask::from_vec(w, h, mask)
    }
}

/// Stack of binary planes, channel-major (`channels × height × width`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStack {
    channels: usize,
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ChannelStack {
    pub fn zeros(channels: usize, width: u32, height: u32) -> Self {
        ChannelStack {
            channels,
            width,
            height,
            data: vec![0; channels * width as usize * height as usize],
        }
    }

    pub fn from_vec(channels: usize, width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != channels * width as usize * height as usize {
            return Err(Error::Schema(format!(
                "{} values for a {channels}x{height}x{width} stack",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Schema("stack values must be binary".into()));
        }
        Ok(ChannelStack {
            channels,
            width,
            height,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    fn plane_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn channel(&self, c: usize) -> &[u8] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: u32, y: u32) -> u8 {
        self.channel(c)[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Crf,
    Dcf,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Crf => "crf",
            Strategy::Dcf => "dcf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "crf" => Ok(Strategy::Crf),
            "dcf" => Ok(Strategy::Dcf),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected crf or dcf)"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Network-ready fused frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FusedSample {
    Crf(LabelRaster),
    Dcf(ChannelStack),
}

impl FusedSample {
    pub fn strategy(&self) -> Strategy {
        match self {
            FusedSample::Crf(_) => Strategy::Crf,
            FusedSample::Dcf(_) => Strategy::Dcf,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        match self {
            FusedSample::Crf(r) => (r.width(), r.height()),
            FusedSample::Dcf(s) => (s.width(), s.height()),
        }
    }

    pub fn resized(&self, width: u32, height: u32) -> FusedSample {
        match self {
            FusedSample::Crf(r) => FusedSample::Crf(resize_labels(r, width, height)),
            FusedSample::Dcf(s) => FusedSample::Dcf(resize_stack(s, width, height)),
        }
    }

    /// Class-id view: the CRF raster itself, or the collapsed DCF stack.
    pub fn to_labels(&self) -> LabelRaster {
        match self {
            FusedSample::Crf(r) => r.clone(),
            FusedSample::Dcf(s) => collapse_dcf(s),
        }
    }
}

fn check_dims(parsing: &LabelRaster, sil: &SilhouetteMask) -> Result<()> {
    if (parsing.width(), parsing.height()) != (sil.width(), sil.height()) {
        return Err(Error::Fusion(format!(
            "parsing is {}x{}, silhouette is {}x{}",
            parsing.width(),
            parsing.height(),
            sil.width(),
            sil.height()
        )));
    }
    Ok(())
}

/// Skeleton class where the parsing raster is non-background, else
/// silhouette foreground, else background.
pub fn fuse_crf(parsing: &LabelRaster, sil: &SilhouetteMask) -> Result<LabelRaster> {
    check_dims(parsing, sil)?;
    let labels = parsing
        .labels()
        .iter()
        .zip(sil.mask())
        .map(|(&p, &s)| {
            if p != BACKGROUND {
                p
            } else if s != 0 {
                SILHOUETTE
            } else {
                BACKGROUND
            }
        })
        .collect();
    LabelRaster::from_vec(parsing.width(), parsing.height(), labels)
}

/// One binary channel per class: channel k (k ≥ 2) marks `parsing == k`,
/// channel 1 is the silhouette, channel 0 marks pixels where both are empty.
pub fn fuse_dcf(parsing: &LabelRaster, sil: &SilhouetteMask) -> Result<ChannelStack> {
    check_dims(parsing, sil)?;
    let mut stack = ChannelStack::zeros(NUM_CLASSES, parsing.width(), parsing.height());
    let n = stack.plane_len();
    for (i, (&p, &s)) in parsing.labels().iter().zip(sil.mask()).enumerate() {
        if p >= 2 {
            stack.data[p as usize * n + i] = 1;
        }
        if s != 0 {
            stack.data[n + i] = 1;
        }
        if p == BACKGROUND && s == 0 {
            stack.data[i] = 1;
        }
    }
    Ok(stack)
}

/// Collapses a DCF stack back to class ids: highest skeleton channel set,
/// else silhouette, else background.
pub fn collapse_dcf(stack: &ChannelStack) -> LabelRaster {
    let n = stack.plane_len();
    let labels = (0..n)
        .map(|i| {
            (2..stack.channels)
                .rev()
                .find(|&c| stack.data[c * n + i] != 0)
                .map(|c| c as u8)
                .unwrap_or(if stack.channels > 1 && stack.data[n + i] != 0 {
                    SILHOUETTE
                } else {
                    BACKGROUND
                })
        })
        .collect();
    LabelRaster::from_vec(stack.width, stack.height, labels).expect("channel ids are class ids")
}

/// Source index sampled by destination index `d` under pixel-center mapping.
#[inline]
fn nn_index(d: u32, src: u32, dst: u32) -> usize {
    ((2 * d as u64 + 1) * src as u64 / (2 * dst as u64)) as usize
}

fn nn_tables(src_w: u32, src_h: u32, width: u32, height: u32) -> (Vec<usize>, Vec<usize>) {
    (
        (0..width).map(|x| nn_index(x, src_w, width)).collect(),
        (0..height).map(|y| nn_index(y, src_h, height)).collect(),
    )
}

fn resample_plane(src: &[u8], src_w: u32, xs: &[usize], ys: &[usize], out: &mut Vec<u8>) {
    let sw = src_w as usize;
    for &sy in ys {
        let row = &src[sy * sw..(sy + 1) * sw];
        out.extend(xs.iter().map(|&sx| row[sx]));
    }
}

/// Nearest-neighbour resize of a label raster.
pub fn resize_labels(raster: &LabelRaster, width: u32, height: u32) -> LabelRaster {
    assert!(width > 0 && height > 0, "target size must be positive");
    if (raster.width(), raster.height()) == (width, height) {
        return raster.clone();
    }
    let (xs, ys) = nn_tables(raster.width(), raster.height(), width, height);
    let mut out = Vec::with_capacity(width as usize * height as usize);
    resample_plane(raster.labels(), raster.width(), &xs, &ys, &mut out);
    LabelRaster::from_vec(width, height, out).expect("labels copied from a valid raster")
}

/// Nearest-neighbour resize of every channel of a stack.
pub fn resize_stack(stack: &ChannelStack, width: u32, height: u32) -> ChannelStack {
    assert!(width > 0 && height > 0, "target size must be positive");
    if (stack.width, stack.height) == (width, height) {
        return stack.clone();
    }
    let (xs, ys) = nn_tables(stack.width, stack.height, width, height);
    let mut data = Vec::with_capacity(stack.channels * width as usize * height as usize);
    for c in 0..stack.channels {
        resample_plane(stack.channel(c), stack.width, &xs, &ys, &mut data);
    }
    ChannelStack {
        channels: stack.channels,
        width,
        height,
        data,
    }
}

/// Fuses at native resolution, then resizes to the target size.
pub fn fuse(parsing: &LabelRaster, sil: &SilhouetteMask, strategy: Strategy, width: u32, height: u32) -> Result<FusedSample> {
    Ok(match strategy {
        Strategy::Crf => FusedSample::Crf(resize_labels(&fuse_crf(parsing, sil)?, width, height)),
        Strategy::Dcf => FusedSample::Dcf(resize_stack(&fuse_dcf(parsing, sil)?, width, height)),
    })
}
