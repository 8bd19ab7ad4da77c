//! Class-id rasters shared by the renderer, fusion and analysis.

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};

/// Number of pixel classes, including background and silhouette.
pub const NUM_CLASSES: usize = 13;

pub const BACKGROUND: u8 = 0;
pub const SILHOUETTE: u8 = 1;
pub const HEAD: u8 = 2;
pub const TORSO: u8 = 3;
pub const NECK: u8 = 4;
pub const LEFT_UPPER_ARM: u8 = 5;
pub const RIGHT_UPPER_ARM: u8 = 6;
pub const LEFT_FOREARM: u8 = 7;
pub const RIGHT_FOREARM: u8 = 8;
pub const LEFT_THIGH: u8 = 9;
pub const RIGHT_THIGH: u8 = 10;
pub const LEFT_SHIN: u8 = 11;
pub const RIGHT_SHIN: u8 = 12;

pub fn class_name(class: u8) -> &'static str {
    match class {
        BACKGROUND => "background",
        SILHOUETTE => "silhouette",
        HEAD => "head",
        TORSO => "torso",
        NECK => "neck",
        LEFT_UPPER_ARM => "l-upper-arm",
        RIGHT_UPPER_ARM => "r-upper-arm",
        LEFT_FOREARM => "l-forearm",
        RIGHT_FOREARM => "r-forearm",
        LEFT_THIGH => "l-thigh",
        RIGHT_THIGH => "r-thigh",
        LEFT_SHIN => "l-shin",
        RIGHT_SHIN => "r-shin",
        _ => "invalid",
    }
}

/// Row-major grid of class ids in `0..NUM_CLASSES`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelRaster {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl LabelRaster {
    /// All-background raster.
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, BACKGROUND)
    }

    pub fn filled(width: u32, height: u32, class: u8) -> Self {
        assert!((class as usize) < NUM_CLASSES, "class {class} out of range");
        LabelRaster {
            width,
            height,
            labels: vec![class; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Schema(format!(
                "{} labels for a {width}x{height} raster",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Schema(format!("label {bad} outside 0..{NUM_CLASSES}")));
        }
        Ok(LabelRaster {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, class: u8) {
        debug_assert!((class as usize) < NUM_CLASSES);
        let w = self.width as usize;
        self.labels[y as usize * w + x as usize] = class;
    }

    pub(crate) fn clear(&mut self) {
        self.labels.fill(BACKGROUND);
    }

    /// Writes `class` into columns `x0..=x1` of row `y`.
    pub(crate) fn fill_span(&mut self, y: u32, x0: u32, x1: u32, class: u8) {
        let w = self.width as usize;
        let row = y as usize * w;
        self.labels[row + x0 as usize..=row + x1 as usize].fill(class);
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.labels[y as usize * w..(y as usize + 1) * w]
    }

    pub fn is_background(&self) -> bool {
        self.labels.iter().all(|&l| l == BACKGROUND)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = GrayImage::from_raw(self.width, self.height, self.labels.clone())
            .expect("buffer length matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Reads an 8-bit class-id PNG. Values outside the class range are a
    /// schema error.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let gray = img.into_luma8();
        let (w, h) = gray.dimensions();
        LabelRaster::from_vec(w, h, gray.into_raw())
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }
}
