//! Pixel-level class entropy of label representations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{frame_indices, Manifest, SequenceOutputs};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fusion::{resize_labels, ChannelStack, SilhouetteMask, Strategy};
use crate::label::{class_name, LabelRaster, NUM_CLASSES};
use crate::tensor::read_tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: [u64; NUM_CLASSES],
}

impl ClassHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add_raster(&mut self, r: &LabelRaster) {
        for &l in r.labels() {
            self.counts[l as usize] += 1;
        }
    }

    pub fn merge(mut self, other: ClassHistogram) -> ClassHistogram {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self
    }

    /// Per-class pixel share; all zeros for an empty histogram.
    pub fn shares(&self) -> [f64; NUM_CLASSES] {
        let t = self.total();
        if t == 0 {
            return [0.0; NUM_CLASSES];
        }
        self.counts.map(|c| c as f64 / t as f64)
    }
}

/// Counts labels over a collection of rasters.
pub fn class_histogram(rasters: &[LabelRaster], exec: Exec) -> Result<ClassHistogram> {
    if rasters.is_empty() {
        return Err(Error::Analysis("no rasters to histogram".into()));
    }
    Ok(exec.map_reduce(
        rasters,
        ClassHistogram::default(),
        |r| {
            let mut h = ClassHistogram::default();
            h.add_raster(r);
            h
        },
        ClassHistogram::merge,
    ))
}

/// Shannon entropy in bits of the empirical class distribution. Empty classes
/// contribute nothing; an empty histogram has entropy 0.
pub fn entropy_bits(hist: &ClassHistogram) -> f64 {
    let total = hist.total();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h: f64 = hist
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum();
    // -0.0 for single-class inputs reads oddly in reports.
    h.max(0.0)
}

/// Representations an entropy report can cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Input silhouettes lifted to {background, silhouette} at target size.
    Silhouette,
    /// Renderer output at native size.
    Parsing,
    Crf,
    Dcf,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Silhouette => "silhouette",
            Representation::Parsing => "parsing",
            Representation::Crf => "crf",
            Representation::Dcf => "dcf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "silhouette" => Ok(Representation::Silhouette),
            "parsing" => Ok(Representation::Parsing),
            "crf" => Ok(Representation::Crf),
            "dcf" => Ok(Representation::Dcf),
            _ => Err(Error::Config(format!(
                "unknown representation {s:?} (silhouette, parsing, crf, dcf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationEntropy {
    pub representation: Representation,
    pub frames: usize,
    pub pixels: u64,
    pub entropy_bits: f64,
    pub class_shares: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub config_hash: Option<String>,
    pub entries: Vec<RepresentationEntropy>,
    /// Entropy of each non-silhouette representation minus the silhouette's,
    /// when the silhouette was analyzed.
    pub delta_vs_silhouette: Vec<(Representation, f64)>,
}

impl EntropyReport {
    pub fn from_histograms(items: Vec<(Representation, usize, ClassHistogram)>, config_hash: Option<String>) -> Self {
        let entries: Vec<RepresentationEntropy> = items
            .into_iter()
            .map(|(representation, frames, h)| RepresentationEntropy {
                representation,
                frames,
                pixels: h.total(),
                entropy_bits: entropy_bits(&h),
                class_shares: h
                    .shares()
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| (class_name(k as u8).to_string(), s))
                    .collect(),
            })
            .collect();
        let sil = entries
            .iter()
            .find(|e| e.representation == Representation::Silhouette)
            .map(|e| e.entropy_bits);
        let delta_vs_silhouette = match sil {
            Some(s) => entries
                .iter()
                .filter(|e| e.representation != Representation::Silhouette)
                .map(|e| (e.representation, e.entropy_bits - s))
                .collect(),
            None => Vec::new(),
        };
        EntropyReport {
            config_hash,
            entries,
            delta_vs_silhouette,
        }
    }

    pub fn get(&self, r: Representation) -> Option<&RepresentationEntropy> {
        self.entries.iter().find(|e| e.representation == r)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("pixel class entropy (bits, max log2(13) = 3.7004)\n");
        if let Some(h) = &self.config_hash {
            let _ = writeln!(s, "config {h}");
        }
        let _ = writeln!(s, "{:<12} {:>8} {:>12} {:>10}", "repr", "frames", "pixels", "entropy");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:<12} {:>8} {:>12} {:>10.4}",
                e.representation.name(),
                e.frames,
                e.pixels,
                e.entropy_bits
            );
        }
        for (r, d) in &self.delta_vs_silhouette {
            let _ = writeln!(s, "delta {} vs silhouette: {:+.4}", r.name(), d);
        }
        for e in &self.entries {
            let _ = write!(s, "shares {}:", e.representation.name());
            for (name, share) in &e.class_shares {
                if *share > 0.0 {
                    let _ = write!(s, " {name}={share:.4}");
                }
            }
            s.push('\n');
        }
        s
    }

    /// Writes `entropy_report.txt` and `entropy_report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let txt = dir.join("entropy_report.txt");
        std::fs::write(&txt, self.to_text()).map_err(|e| Error::io(&txt, e))?;
        let json = dir.join("entropy_report.json");
        let body = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&json, body + "\n").map_err(|e| Error::io(&json, e))
    }
}

fn frame_files(r: Representation, root: &Path, out: &Path, m: &Manifest) -> Vec<(PathBuf, &'static str)> {
    m.entries
        .iter()
        .map(|e| match r {
            Representation::Silhouette => (root.join(&e.silhouettes), "png"),
            Representation::Parsing => (SequenceOutputs::new(out, &e.sequence_id).parsing_dir(), "png"),
            Representation::Crf => (SequenceOutputs::new(out, &e.sequence_id).fused_dir(Strategy::Crf), "png"),
            Representation::Dcf => (SequenceOutputs::new(out, &e.sequence_id).fused_dir(Strategy::Dcf), "tns"),
        })
        .collect()
}

fn load_as_labels(r: Representation, path: &Path, target: (u32, u32)) -> Result<LabelRaster> {
    match r {
        Representation::Silhouette => Ok(resize_labels(&SilhouetteMask::load_png(path)?.lift(), target.0, target.1)),
        Representation::Parsing | Representation::Crf => LabelRaster::load_png(path),
        Representation::Dcf => Ok(crate::fusion::collapse_dcf(&ChannelStack::try_from(read_tensor(path)?)?)),
    }
}

/// Entropy of each requested representation over every frame of the dataset.
/// `target` is the (width, height) silhouettes are resampled to.
pub fn entropy_report(
    root: &Path,
    out: &Path,
    representations: &[Representation],
    target: (u32, u32),
    exec: Exec,
) -> Result<EntropyReport> {
    if !Manifest::path(root).is_file() {
        return Err(Error::Report(format!(
            "{} has no manifest; nothing to analyze",
            root.display()
        )));
    }
    let manifest = Manifest::load(root)?;
    if manifest.entries.is_empty() {
        return Err(Error::Report(format!("{} lists no sequences", root.display())));
    }
    let mut missing = Vec::new();
    for &r in representations {
        for (dir, _) in frame_files(r, root, out, &manifest) {
            if !dir.is_dir() {
                missing.push(dir.display().to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Report(format!(
            "missing outputs: {}",
            missing.join(", ")
        )));
    }

    let mut items = Vec::new();
    for &r in representations {
        let mut files = Vec::new();
        for (dir, ext) in frame_files(r, root, out, &manifest) {
            for i in frame_indices(&dir, ext)? {
                files.push(dir.join(format!("{i}.{ext}")));
            }
        }
        if files.is_empty() {
            return Err(Error::Report(format!("no {} frames found", r.name())));
        }
        let parts = exec.try_map(&files, |p| -> Result<ClassHistogram> {
            let mut h = ClassHistogram::default();
            h.add_raster(&load_as_labels(r, p, target)?);
            Ok(h)
        })?;
        let hist = parts.into_iter().fold(ClassHistogram::default(), ClassHistogram::merge);
        items.push((r, files.len(), hist));
    }
    let hash = manifest.fused.first().map(|f| f.config_hash.clone());
    Ok(EntropyReport::from_histograms(items, hash))
}
