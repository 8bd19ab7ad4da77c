//! End-to-end steps over the on-disk dataset layout.
//!
//! Each `cmd_*` function is what the CLI subcommand of the same name runs.
//! Warnings are returned in the summaries rather than logged.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis::{entropy_report, EntropyReport, Representation};
use crate::config::{AlignMode, PipelineConfig};
use crate::dataset::{frame_indices, FusedStamp, Manifest, ManifestEntry, SequenceOutputs, Split};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fusion::{fuse, resize_labels, FusedSample, SilhouetteMask, Strategy};
use crate::gaitlab::head::Embedding;
use crate::gaitlab::metrics::{evaluate, EvalReport, SelfMatch};
use crate::gaitlab::pooling::StripeFeature;
use crate::gaitlab::{objective, sequence_feature, GaitModel, Objective};
use crate::label::LabelRaster;
use crate::pose::{align_keypoints, filter_valid, joint_bbox, load_keypoint_sequence, KeypointFrame};
use crate::render::raster::Canvas;
use crate::render::{render_into, PartMapping, RenderConfig};
use crate::synth::{generate_benchmark, generate_clip, sample_identities, BenchmarkSpec, Condition, Noise};
use crate::tensor::{read_tensor, write_tensor, Tensor};

/// Radius/width grid of the sweep.
pub const SWEEP_GRID: [(f64, f64); 3] = [(3.0, 3.0), (10.0, 12.0), (20.0, 24.0)];

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn load_manifest(root: &Path) -> Result<Manifest> {
    let m = Manifest::load(root)?;
    m.validate(root)?;
    Ok(m)
}

pub fn benchmark_spec(cfg: &PipelineConfig) -> BenchmarkSpec {
    BenchmarkSpec {
        identities: cfg.identities,
        clips: cfg.clips,
        conditions: cfg.conditions.clone(),
        frames: cfg.frames,
        canvas: cfg.canvas(),
        noise: Noise::default(),
        seed: cfg.seed,
    }
}

pub fn cmd_synth(cfg: &PipelineConfig, force: bool, exec: Exec) -> Result<Manifest> {
    cfg.validate()?;
    generate_benchmark(&benchmark_spec(cfg), &cfg.dataset, force, exec)
}

/// Renders one keypoint frame onto the silhouette's canvas, aligning first
/// when configured. Returns the raster and the number of valid joints.
pub fn render_frame(
    frame: &KeypointFrame,
    sil: &SilhouetteMask,
    mapping: &PartMapping,
    cfg: &PipelineConfig,
) -> Result<(LabelRaster, usize)> {
    let canvas = Canvas::new(sil.width(), sil.height());
    let rcfg = cfg.render_config(canvas)?;
    let aligned;
    let frame = match cfg.align {
        AlignMode::None => frame,
        AlignMode::Bbox => match (joint_bbox(frame, cfg.tau), sil.foreground_bbox()) {
            (Some(src), Some(dst)) if src.width > 0.0 && src.height > 0.0 => {
                aligned = align_keypoints(frame, &src, &dst)?;
                &aligned
            }
            _ => frame,
        },
    };
    let mut raster = LabelRaster::new(sil.width(), sil.height());
    render_into(&mut raster, frame, mapping, &rcfg);
    Ok((raster, filter_valid(frame, &rcfg.validity()).len()))
}

#[derive(Debug, Clone, Default)]
pub struct RenderSummary {
    pub sequences: usize,
    pub frames: usize,
    pub empty_frames: usize,
    pub warnings: Vec<String>,
    pub elapsed: Duration,
}

impl RenderSummary {
    pub fn ms_per_frame(&self) -> f64 {
        self.elapsed.as_secs_f64() * 1e3 / self.frames.max(1) as f64
    }
}

struct SequenceRender {
    frames: usize,
    empty: Vec<u32>,
}

fn render_sequence(root: &Path, out: &Path, e: &ManifestEntry, mapping: &PartMapping, cfg: &PipelineConfig) -> Result<SequenceRender> {
    let seq = load_keypoint_sequence(&root.join(&e.keypoints))?;
    let outs = SequenceOutputs::new(out, &e.sequence_id);
    let dir = outs.parsing_dir();
    std::fs::create_dir_all(&dir).map_err(|err| Error::io(&dir, err))?;
    let mut empty = Vec::new();
    for f in &seq.frames {
        let sil_path = root.join(&e.silhouettes).join(format!("{}.png", f.frame_index));
        if !sil_path.is_file() {
            return Err(Error::Dataset(format!(
                "{}: frame {} has no silhouette at {}",
                e.sequence_id,
                f.frame_index,
                sil_path.display()
            )));
        }
        let sil = SilhouetteMask::load_png(&sil_path)?;
        let (raster, valid) = render_frame(f, &sil, mapping, cfg)?;
        if valid == 0 {
            empty.push(f.frame_index);
        }
        raster.save_png(&outs.parsing_frame(f.frame_index))?;
    }
    let mut log = format!("sequence {}\nframes {}\nframes_without_valid_joints {}\n", e.sequence_id, seq.frames.len(), empty.len());
    for i in &empty {
        let _ = writeln!(log, "no_valid_joints frame {i}");
    }
    write_file(&outs.render_log(), log.as_bytes())?;
    Ok(SequenceRender {
        frames: seq.frames.len(),
        empty,
    })
}

/// Renders every frame of every manifest sequence into `<out>/<seq>/parsing`.
pub fn cmd_render(cfg: &PipelineConfig, exec: Exec) -> Result<RenderSummary> {
    cfg.validate()?;
    let root = &cfg.dataset;
    let out = cfg.out_dir();
    let manifest = load_manifest(root)?;
    let mapping = cfg.part_mapping()?;
    let start = Instant::now();
    let per_seq = exec.try_map(&manifest.entries, |e| render_sequence(root, &out, e, &mapping, cfg))?;
    let mut s = RenderSummary {
        sequences: per_seq.len(),
        elapsed: start.elapsed(),
        ..Default::default()
    };
    for (e, r) in manifest.entries.iter().zip(&per_seq) {
        s.frames += r.frames;
        s.empty_frames += r.empty.len();
        if !r.empty.is_empty() {
            s.warnings.push(format!(
                "{}: {} of {} frames have no valid joints and rendered as background",
                e.sequence_id,
                r.empty.len(),
                r.frames
            ));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Default)]
pub struct FuseSummary {
    pub sequences: usize,
    pub frames: usize,
    pub strategy: Option<Strategy>,
    pub config_hash: String,
}

fn fuse_sequence(root: &Path, out: &Path, e: &ManifestEntry, cfg: &PipelineConfig) -> Result<usize> {
    let outs = SequenceOutputs::new(out, &e.sequence_id);
    let pdir = outs.parsing_dir();
    if !pdir.is_dir() {
        return Err(Error::Dataset(format!(
            "{}: no rendered rasters at {} (run render first)",
            e.sequence_id,
            pdir.display()
        )));
    }
    let frames = frame_indices(&pdir, "png")?;
    let fdir = outs.fused_dir(cfg.strategy);
    std::fs::create_dir_all(&fdir).map_err(|err| Error::io(&fdir, err))?;
    for &i in &frames {
        let parsing = LabelRaster::load_png(&outs.parsing_frame(i))?;
        let sil_path = root.join(&e.silhouettes).join(format!("{i}.png"));
        if !sil_path.is_file() {
            return Err(Error::Dataset(format!(
                "{}: frame {i} has no silhouette at {}",
                e.sequence_id,
                sil_path.display()
            )));
        }
        let sil = SilhouetteMask::load_png(&sil_path)?;
        let path = outs.fused_frame(cfg.strategy, i);
        match fuse(&parsing, &sil, cfg.strategy, cfg.target_width, cfg.target_height)? {
            FusedSample::Crf(r) => r.save_png(&path)?,
            FusedSample::Dcf(s) => write_tensor(&path, &Tensor::from(&s))?,
        }
    }
    Ok(frames.len())
}

/// Fuses rendered rasters with silhouettes and stamps the manifest.
///
/// Existing fused outputs made with another strategy or config are refused
/// unless `force`, which deletes them first.
pub fn cmd_fuse(cfg: &PipelineConfig, force: bool, exec: Exec) -> Result<FuseSummary> {
    cfg.validate()?;
    let root = &cfg.dataset;
    let out = cfg.out_dir();
    let mut manifest = load_manifest(root)?;
    let stamp = FusedStamp {
        strategy: cfg.strategy,
        config_hash: cfg.hash(),
    };
    let stale: Vec<FusedStamp> = manifest.fused.iter().filter(|f| **f != stamp).cloned().collect();
    if !stale.is_empty() {
        if !force {
            let desc: Vec<String> = stale.iter().map(|f| format!("{} ({})", f.strategy, f.config_hash)).collect();
            return Err(Error::Dataset(format!(
                "fused outputs exist for {}; requested {} ({}); use --force to replace them",
                desc.join(", "),
                stamp.strategy,
                stamp.config_hash
            )));
        }
        for f in &stale {
            for e in &manifest.entries {
                let d = SequenceOutputs::new(&out, &e.sequence_id).fused_dir(f.strategy);
                if d.is_dir() {
                    std::fs::remove_dir_all(&d).map_err(|err| Error::io(&d, err))?;
                }
            }
        }
    }
    let counts = exec.try_map(&manifest.entries, |e| fuse_sequence(root, &out, e, cfg))?;
    manifest.fused = vec![stamp.clone()];
    manifest.save(root)?;
    Ok(FuseSummary {
        sequences: counts.len(),
        frames: counts.iter().sum(),
        strategy: Some(stamp.strategy),
        config_hash: stamp.config_hash,
    })
}

/// Entropy of silhouettes, parsing rasters and the stamped fused strategy.
pub fn cmd_entropy(cfg: &PipelineConfig, exec: Exec) -> Result<EntropyReport> {
    cfg.validate()?;
    let root = &cfg.dataset;
    let out = cfg.out_dir();
    let manifest = Manifest::load(root)?;
    let mut reprs = vec![Representation::Silhouette, Representation::Parsing];
    for f in &manifest.fused {
        reprs.push(match f.strategy {
            Strategy::Crf => Representation::Crf,
            Strategy::Dcf => Representation::Dcf,
        });
    }
    let report = entropy_report(root, &out, &reprs, (cfg.target_width, cfg.target_height), exec)?;
    report.write(&out)?;
    Ok(report)
}

/// Frames of one sequence as network inputs.
pub struct SequenceSamples {
    pub entry: ManifestEntry,
    pub silhouette: Vec<FusedSample>,
    pub fused: Vec<FusedSample>,
}

fn silhouette_sample(sil: &SilhouetteMask, cfg: &PipelineConfig) -> FusedSample {
    FusedSample::Crf(resize_labels(&sil.lift(), cfg.target_width, cfg.target_height))
}

fn load_sequence_samples(root: &Path, out: &Path, e: &ManifestEntry, cfg: &PipelineConfig) -> Result<SequenceSamples> {
    let outs = SequenceOutputs::new(out, &e.sequence_id);
    let fdir = outs.fused_dir(cfg.strategy);
    let ext = match cfg.strategy {
        Strategy::Crf => "png",
        Strategy::Dcf => "tns",
    };
    if !fdir.is_dir() {
        return Err(Error::Dataset(format!(
            "{}: no {} outputs at {} (run fuse first)",
            e.sequence_id,
            cfg.strategy,
            fdir.display()
        )));
    }
    let frames = frame_indices(&fdir, ext)?;
    if frames.is_empty() {
        return Err(Error::Dataset(format!("{}: {} is empty", e.sequence_id, fdir.display())));
    }
    let mut silhouette = Vec::with_capacity(frames.len());
    let mut fused = Vec::with_capacity(frames.len());
    for &i in &frames {
        let sil = SilhouetteMask::load_png(&root.join(&e.silhouettes).join(format!("{i}.png")))?;
        silhouette.push(silhouette_sample(&sil, cfg));
        let p = outs.fused_frame(cfg.strategy, i);
        fused.push(match cfg.strategy {
            Strategy::Crf => FusedSample::Crf(LabelRaster::load_png(&p)?),
            Strategy::Dcf => FusedSample::Dcf(read_tensor(&p)?.try_into()?),
        });
    }
    Ok(SequenceSamples {
        entry: e.clone(),
        silhouette,
        fused,
    })
}

/// Renders and fuses a sequence in memory, without touching `out`.
pub fn compute_sequence_samples(root: &Path, e: &ManifestEntry, cfg: &PipelineConfig) -> Result<SequenceSamples> {
    let mapping = cfg.part_mapping()?;
    let seq = load_keypoint_sequence(&root.join(&e.keypoints))?;
    let mut silhouette = Vec::with_capacity(seq.frames.len());
    let mut fused = Vec::with_capacity(seq.frames.len());
    for f in &seq.frames {
        let sil_path = root.join(&e.silhouettes).join(format!("{}.png", f.frame_index));
        if !sil_path.is_file() {
            return Err(Error::Dataset(format!(
                "{}: frame {} has no silhouette at {}",
                e.sequence_id,
                f.frame_index,
                sil_path.display()
            )));
        }
        let sil = SilhouetteMask::load_png(&sil_path)?;
        let (parsing, _) = render_frame(f, &sil, &mapping, cfg)?;
        fused.push(fuse(&parsing, &sil, cfg.strategy, cfg.target_width, cfg.target_height)?);
        silhouette.push(silhouette_sample(&sil, cfg));
    }
    Ok(SequenceSamples {
        entry: e.clone(),
        silhouette,
        fused,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub representation: String,
    /// Probe condition, or `gallery-self` for the gallery-vs-gallery sanity row.
    pub condition: String,
    #[serde(flatten)]
    pub metrics: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub config_hash: String,
    pub strategy: String,
    pub radius: f64,
    pub line_width: f64,
    pub rows: Vec<EvalRow>,
    /// Gallery objective per representation.
    pub objectives: Vec<(String, Objective)>,
    pub warnings: Vec<String>,
}

impl EvalSummary {
    pub fn row(&self, representation: &str, condition: &str) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.representation == representation && r.condition == condition)
    }

    /// Probe-weighted Rank-1 over all real conditions.
    pub fn overall_rank1(&self, representation: &str) -> Option<f64> {
        let rows: Vec<&EvalRow> = self
            .rows
            .iter()
            .filter(|r| r.representation == representation && r.condition != SANITY_CONDITION)
            .collect();
        let n: usize = rows.iter().map(|r| r.metrics.probes).sum();
        (n > 0).then(|| rows.iter().map(|r| r.metrics.rank1 * r.metrics.probes as f64).sum::<f64>() / n as f64)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "config {}\nstrategy {} radius {} line_width {}\n",
            self.config_hash, self.strategy, self.radius, self.line_width
        );
        let _ = writeln!(
            s,
            "{:<12} {:<14} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "repr", "condition", "probes", "gallery", "rank1", "rank5", "mAP", "mINP"
        );
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                s,
                "{:<12} {:<14} {:>6} {:>7} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                r.representation, r.condition, m.probes, m.gallery, m.rank1, m.rank5, m.map, m.minp
            );
        }
        for (name, o) in &self.objectives {
            let _ = writeln!(
                s,
                "objective {name}: ce {:.6} triplet {:.6} total {:.6}",
                o.cross_entropy + 0.0, o.triplet + 0.0, o.total + 0.0
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("eval_report.txt"), self.to_text().as_bytes())?;
        let json = serde_json::to_string_pretty(self).expect("report serializes") + "\n";
        write_file(&dir.join("eval_report.json"), json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }
}

pub const SANITY_CONDITION: &str = "gallery-self";

/// Gallery/probe evaluation of one representation, per probe condition.
#[allow(clippy::too_many_arguments)]
fn evaluate_representation(
    name: &str,
    seqs: &[(ManifestEntry, StripeFeature)],
    conditions: &[String],
    cfg: &PipelineConfig,
    exec: Exec,
    rows: &mut Vec<EvalRow>,
    objectives: &mut Vec<(String, Objective)>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let gallery_feats: Vec<StripeFeature> = seqs
        .iter()
        .filter(|(e, _)| e.split == Split::Gallery)
        .map(|(_, f)| f.clone())
        .collect();
    if gallery_feats.is_empty() {
        return Err(Error::Evaluation("manifest has no gallery sequences".into()));
    }
    let model = GaitModel::fit(&gallery_feats)?;
    let embedded: Vec<(Split, &str, Embedding)> = seqs
        .iter()
        .map(|(e, f)| Ok((e.split, e.condition.as_str(), model.embed(&e.sequence_id, &e.identity, f)?)))
        .collect::<Result<_>>()?;
    let gallery: Vec<Embedding> = embedded
        .iter()
        .filter(|(s, _, _)| *s == Split::Gallery)
        .map(|(_, _, e)| e.clone())
        .collect();

    rows.push(EvalRow {
        representation: name.to_string(),
        condition: SANITY_CONDITION.to_string(),
        metrics: evaluate(&gallery, &gallery, SelfMatch::Include, exec)?,
    });
    for cond in conditions {
        let probes: Vec<Embedding> = embedded
            .iter()
            .filter(|(s, c, _)| *s == Split::Probe && c == cond)
            .map(|(_, _, e)| e.clone())
            .collect();
        if probes.is_empty() {
            warnings.push(format!("{name}: condition {cond} has no probes; skipped"));
            continue;
        }
        rows.push(EvalRow {
            representation: name.to_string(),
            condition: cond.clone(),
            metrics: evaluate(&gallery, &probes, SelfMatch::Include, exec)?,
        });
    }
    objectives.push((
        name.to_string(),
        objective(&gallery, cfg.margin, cfg.ce_weight, cfg.triplet_weight)?,
    ));
    Ok(())
}

/// Silhouette-only vs fused evaluation over prepared sequences.
pub fn evaluate_samples(samples: &[SequenceSamples], manifest: &Manifest, cfg: &PipelineConfig, exec: Exec) -> Result<EvalSummary> {
    let feats = exec.try_map(samples, |s| -> Result<(StripeFeature, StripeFeature)> {
        Ok((
            sequence_feature(&s.silhouette, cfg.bands, cfg.stripes)?,
            sequence_feature(&s.fused, cfg.bands, cfg.stripes)?,
        ))
    })?;
    let conditions = manifest.conditions();
    let mut rows = Vec::new();
    let mut objectives = Vec::new();
    let mut warnings = Vec::new();
    let sil: Vec<(ManifestEntry, StripeFeature)> = samples.iter().zip(&feats).map(|(s, f)| (s.entry.clone(), f.0.clone())).collect();
    let fused: Vec<(ManifestEntry, StripeFeature)> = samples.iter().zip(&feats).map(|(s, f)| (s.entry.clone(), f.1.clone())).collect();
    evaluate_representation("silhouette", &sil, &conditions, cfg, exec, &mut rows, &mut objectives, &mut warnings)?;
    evaluate_representation(cfg.strategy.name(), &fused, &conditions, cfg, exec, &mut rows, &mut objectives, &mut warnings)?;
    warnings.dedup();
    Ok(EvalSummary {
        config_hash: cfg.hash(),
        strategy: cfg.strategy.name().to_string(),
        radius: cfg.radius,
        line_width: cfg.line_width,
        rows,
        objectives,
        warnings,
    })
}

/// Evaluates from fused outputs on disk and writes `eval_report.{txt,json}`.
pub fn cmd_eval(cfg: &PipelineConfig, force: bool, exec: Exec) -> Result<EvalSummary> {
    cfg.validate()?;
    let root = &cfg.dataset;
    let out = cfg.out_dir();
    let manifest = load_manifest(root)?;
    let hash = cfg.hash();
    match manifest.fused.iter().find(|f| f.strategy == cfg.strategy) {
        None => {
            return Err(Error::Dataset(format!(
                "no {} outputs stamped in {} (run fuse first)",
                cfg.strategy,
                Manifest::path(root).display()
            )))
        }
        Some(f) if f.config_hash != hash && !force => {
            return Err(Error::Report(format!(
                "fused outputs were made with config {}, current config is {hash}; use --force to evaluate anyway",
                f.config_hash
            )))
        }
        Some(_) => {}
    }
    let samples = exec.try_map(&manifest.entries, |e| load_sequence_samples(root, &out, e, cfg))?;
    let summary = evaluate_samples(&samples, &manifest, cfg, exec)?;
    summary.write(&out)?;
    Ok(summary)
}

/// Runs render, fuse and evaluation in memory.
pub fn evaluate_in_memory(cfg: &PipelineConfig, exec: Exec) -> Result<EvalSummary> {
    cfg.validate()?;
    let root = &cfg.dataset;
    let manifest = load_manifest(root)?;
    let samples = exec.try_map(&manifest.entries, |e| compute_sequence_samples(root, e, cfg))?;
    evaluate_samples(&samples, &manifest, cfg, exec)
}

/// Refuses to compare reports made under different configs unless `force`.
pub fn check_comparable(a: &EvalSummary, b: &EvalSummary, force: bool) -> Result<()> {
    if a.config_hash != b.config_hash && !force {
        return Err(Error::Report(format!(
            "reports come from different configs ({} vs {}); use --force to compare",
            a.config_hash, b.config_hash
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub radius: f64,
    pub line_width: f64,
    pub config_hash: String,
    pub fused_rank1: f64,
    pub silhouette_rank1: f64,
    pub rows: Vec<EvalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub strategy: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("strategy {}\n", self.strategy);
        let _ = writeln!(s, "{:>6} {:>6} {:<16} {:>10} {:>10}", "radius", "width", "config", "sil_rank1", "fused_rank1");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:<16} {:>10.4} {:>10.4}",
                r.radius, r.line_width, r.config_hash, r.silhouette_rank1, r.fused_rank1
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("sweep_report.txt"), self.to_text().as_bytes())?;
        let json = serde_json::to_string_pretty(self).expect("report serializes") + "\n";
        write_file(&dir.join("sweep_report.json"), json.as_bytes())
    }
}

/// Evaluates each (radius, width) of `grid` in memory and writes
/// `sweep_report.{txt,json}` under the output directory.
pub fn cmd_sweep(cfg: &PipelineConfig, grid: &[(f64, f64)], exec: Exec) -> Result<SweepReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(grid.len());
    for &(radius, line_width) in grid {
        let c = PipelineConfig {
            radius,
            line_width,
            ..cfg.clone()
        };
        let s = evaluate_in_memory(&c, exec)?;
        rows.push(SweepRow {
            radius,
            line_width,
            config_hash: s.config_hash.clone(),
            fused_rank1: s.overall_rank1(c.strategy.name()).unwrap_or(0.0),
            silhouette_rank1: s.overall_rank1("silhouette").unwrap_or(0.0),
            rows: s.rows,
        });
    }
    let report = SweepReport {
        strategy: cfg.strategy.name().to_string(),
        rows,
    };
    report.write(&cfg.out_dir())?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchResult {
    pub frames: usize,
    pub elapsed: Duration,
}

impl BenchResult {
    pub fn ms_per_frame(&self) -> f64 {
        self.elapsed.as_secs_f64() * 1e3 / self.frames.max(1) as f64
    }

    pub fn frames_per_second(&self) -> f64 {
        self.frames as f64 / self.elapsed.as_secs_f64().max(1e-12)
    }
}

/// Synthetic frames for throughput measurement: keypoints and silhouettes on
/// the configured canvas.
pub fn bench_frames(cfg: &PipelineConfig, frames: usize) -> Result<Vec<(KeypointFrame, SilhouetteMask)>> {
    let canvas = cfg.canvas();
    let walker = sample_identities(1, canvas, cfg.seed)[0];
    let clip = generate_clip(&walker, Condition::Normal, frames, &Noise::default(), canvas, cfg.seed)?;
    Ok(clip.keypoints.frames.into_iter().zip(clip.silhouettes).collect())
}

/// Times in-memory render + fuse + resize over `frames`.
pub fn bench_render_fuse(cfg: &PipelineConfig, frames: &[(KeypointFrame, SilhouetteMask)], exec: Exec) -> Result<BenchResult> {
    let mapping = cfg.part_mapping()?;
    let rcfg: RenderConfig = cfg.render_config(cfg.canvas())?;
    let start = Instant::now();
    let done = exec.try_map(frames, |(kp, sil)| -> Result<usize> {
        let mut raster = LabelRaster::new(sil.width(), sil.height());
        render_into(&mut raster, kp, &mapping, &rcfg);
        let fused = fuse(&raster, sil, cfg.strategy, cfg.target_width, cfg.target_height)?;
        Ok(fused.dims().0 as usize)
    })?;
    Ok(BenchResult {
        frames: done.len(),
        elapsed: start.elapsed(),
    })
}

/// All regular files under `dir`, relative, sorted.
pub fn list_tree(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for ent in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let p = ent.map_err(|e| Error::io(dir, e))?.path();
            if p.is_dir() {
                walk(base, &p, out)?;
            } else {
                out.push(p.strip_prefix(base).expect("under base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> PipelineConfig {
        PipelineConfig {
            identities: 3,
            clips: 2,
            frames: 4,
            dataset: dir.join("ds"),
            ..Default::default()
        }
    }

    #[test]
    fn render_then_fuse_then_eval() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        let m = cmd_synth(&cfg, false, Exec::Parallel).unwrap();
        assert_eq!(m.entries.len(), 3 * 2 * 2);
        let r = cmd_render(&cfg, Exec::Parallel).unwrap();
        assert_eq!(r.frames, 12 * 4);
        let f = cmd_fuse(&cfg, false, Exec::Serial).unwrap();
        assert_eq!(f.frames, 48);
        let s = cmd_eval(&cfg, false, Exec::Parallel).unwrap();
        assert_eq!(s.row("crf", SANITY_CONDITION).unwrap().metrics.rank1, 1.0);
        assert!(cfg.out_dir().join("eval_report.json").is_file());
        let mem = evaluate_in_memory(&cfg, Exec::Serial).unwrap();
        assert_eq!(mem, s);
    }

    #[test]
    fn fuse_refuses_other_strategy() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        cmd_synth(&cfg, false, Exec::Parallel).unwrap();
        cmd_render(&cfg, Exec::Parallel).unwrap();
        cmd_fuse(&cfg, false, Exec::Parallel).unwrap();
        let dcf = PipelineConfig {
            strategy: Strategy::Dcf,
            ..cfg.clone()
        };
        assert!(cmd_fuse(&dcf, false, Exec::Parallel).is_err());
        cmd_fuse(&dcf, true, Exec::Parallel).unwrap();
        let seq = &Manifest::load(&cfg.dataset).unwrap().entries[0].sequence_id;
        assert!(!SequenceOutputs::new(&cfg.out_dir(), seq).fused_dir(Strategy::Crf).exists());
        assert!(cmd_eval(&cfg, false, Exec::Parallel).is_err());
        cmd_eval(&dcf, false, Exec::Parallel).unwrap();
    }

    #[test]
    fn comparison_needs_matching_hashes() {
        let a = EvalSummary {
            config_hash: "a".into(),
            strategy: "crf".into(),
            radius: 10.0,
            line_width: 12.0,
            rows: vec![],
            objectives: vec![],
            warnings: vec![],
        };
        let b = EvalSummary {
            config_hash: "b".into(),
            ..a.clone()
        };
        assert!(check_comparable(&a, &b, false).is_err());
        check_comparable(&a, &b, true).unwrap();
        check_comparable(&a, &a, false).unwrap();
    }
}
