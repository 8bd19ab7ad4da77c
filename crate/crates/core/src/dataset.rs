//! On-disk dataset layout and manifest.
//!
//! ```text
//! <root>/manifest
//! <root>/<seq>/keypoints.txt
//! <root>/<seq>/sil/<frame>.png
//! <out>/<seq>/parsing/<frame>.png     label rasters at native size
//! <out>/<seq>/crf/<frame>.png         fused, target size
//! <out>/<seq>/dcf/<frame>.tns         fused, target size, PSTN1
//! ```
//!
//! Manifest format, one record per line:
//!
//! ```text
//! manifest v1
//! fused <strategy> <config-hash>
//! seq <id> <identity> <condition> <gallery|probe> <keypoints-path> <silhouette-dir>
//! ```
//!
//! Paths are relative to the root. `fused` lines are stamped by the fuse step.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Gallery,
    Probe,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Gallery => "gallery",
            Split::Probe => "probe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sequence_id: String,
    pub identity: String,
    pub condition: String,
    pub split: Split,
    pub keypoints: PathBuf,
    pub silhouettes: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedStamp {
    pub strategy: Strategy,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub fused: Vec<FusedStamp>,
}

fn bad_token(s: &str) -> bool {
    s.is_empty() || s.chars().any(char::is_whitespace)
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Manifest {
            entries,
            fused: Vec::new(),
        };
        m.check_ids()?;
        Ok(m)
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            for tok in [
                e.sequence_id.as_str(),
                e.identity.as_str(),
                e.condition.as_str(),
            ] {
                if bad_token(tok) {
                    return Err(Error::Dataset(format!("invalid manifest token {tok:?}")));
                }
            }
            if !seen.insert(e.sequence_id.as_str()) {
                return Err(Error::Dataset(format!(
                    "duplicate sequence id {}",
                    e.sequence_id
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == "manifest v1" => {}
            Some((i, l)) => return Err(perr(i + 1, format!("bad header {l:?}"))),
            None => return Err(perr(1, "empty manifest".into())),
        }
        let mut m = Manifest::default();
        for (i, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.as_slice() {
                ["fused", s, h] => m.fused.push(FusedStamp {
                    strategy: Strategy::parse(s).map_err(|e| perr(i + 1, e.to_string()))?,
                    config_hash: h.to_string(),
                }),
                ["seq", id, ident, cond, split, kp, sil] => m.entries.push(ManifestEntry {
                    sequence_id: id.to_string(),
                    identity: ident.to_string(),
                    condition: cond.to_string(),
                    split: match *split {
                        "gallery" => Split::Gallery,
                        "probe" => Split::Probe,
                        s => return Err(perr(i + 1, format!("bad split {s:?}"))),
                    },
                    keypoints: PathBuf::from(kp),
                    silhouettes: PathBuf::from(sil),
                }),
                _ => return Err(perr(i + 1, format!("unrecognized record {line:?}"))),
            }
        }
        m.check_ids()?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("manifest v1\n");
        for f in &self.fused {
            let _ = writeln!(s, "fused {} {}", f.strategy, f.config_hash);
        }
        for e in &self.entries {
            let _ = writeln!(
                s,
                "seq {} {} {} {} {} {}",
                e.sequence_id,
                e.identity,
                e.condition,
                e.split.name(),
                e.keypoints.display(),
                e.silhouettes.display()
            );
        }
        s
    }

    pub fn path(root: &Path) -> PathBuf {
        root.join("manifest")
    }

    pub fn load(root: &Path) -> Result<Self> {
        let p = Self::path(root);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Manifest::parse(&text, &p.display().to_string())
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let p = Self::path(root);
        std::fs::write(&p, self.to_text()).map_err(|e| Error::io(&p, e))
    }

    /// Checks that every referenced path exists under `root`.
    pub fn validate(&self, root: &Path) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Dataset("manifest lists no sequences".into()));
        }
        for e in &self.entries {
            let kp = root.join(&e.keypoints);
            if !kp.is_file() {
                return Err(Error::Dataset(format!(
                    "{}: missing keypoint file {}",
                    e.sequence_id,
                    kp.display()
                )));
            }
            let sil = root.join(&e.silhouettes);
            if !sil.is_dir() {
                return Err(Error::Dataset(format!(
                    "{}: missing silhouette directory {}",
                    e.sequence_id,
                    sil.display()
                )));
            }
        }
        Ok(())
    }

    /// Conditions present among probe entries, sorted.
    pub fn probe_conditions(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.split == Split::Probe)
            .map(|e| e.condition.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn conditions(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.condition.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Output paths for one sequence.
#[derive(Debug, Clone)]
pub struct SequenceOutputs {
    pub dir: PathBuf,
}

impl SequenceOutputs {
    pub fn new(out: &Path, sequence_id: &str) -> Self {
        SequenceOutputs {
            dir: out.join(sequence_id),
        }
    }

    pub fn parsing_dir(&self) -> PathBuf {
        self.dir.join("parsing")
    }

    pub fn fused_dir(&self, s: Strategy) -> PathBuf {
        self.dir.join(s.name())
    }

    pub fn parsing_frame(&self, frame: u32) -> PathBuf {
        self.parsing_dir().join(format!("{frame}.png"))
    }

    pub fn fused_frame(&self, s: Strategy, frame: u32) -> PathBuf {
        let ext = match s {
            Strategy::Crf => "png",
            Strategy::Dcf => "tns",
        };
        self.fused_dir(s).join(format!("{frame}.{ext}"))
    }

    pub fn render_log(&self) -> PathBuf {
        self.dir.join("render.log")
    }
}

/// Frame indices of the files in `dir` with extension `ext`, ascending.
pub fn frame_indices(dir: &Path, ext: &str) -> Result<Vec<u32>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut idx = Vec::new();
    for ent in rd {
        let ent = ent.map_err(|e| Error::io(dir, e))?;
        let p = ent.path();
        if p.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(i) = p.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            idx.push(i);
        }
    }
    idx.sort_unstable();
    Ok(idx)
}
