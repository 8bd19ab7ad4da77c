use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parskel::config::PipelineConfig;
use parskel::pipeline::{self, EvalSummary, SWEEP_GRID};
use parskel::{Error, Exec, Result};

#[derive(Parser)]
#[command(name = "parskel", version, about = "Part-labeled skeleton rasters for gait recognition")]
struct Cli {
    /// Config file (`key = value` lines); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite or compare outputs that would otherwise be refused.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; 1 runs serially.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(flatten)]
    keys: KeyFlags,
    #[command(subcommand)]
    cmd: Cmd,
}

/// One flag per config key, parsed by the config itself.
#[derive(Args, Default)]
struct KeyFlags {
    #[arg(long, global = true)]
    tau: Option<String>,
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    line_width: Option<String>,
    #[arg(long, global = true)]
    strategy: Option<String>,
    #[arg(long, global = true)]
    target_height: Option<String>,
    #[arg(long, global = true)]
    target_width: Option<String>,
    #[arg(long, global = true)]
    bands: Option<String>,
    #[arg(long, global = true)]
    stripes: Option<String>,
    #[arg(long, global = true)]
    margin: Option<String>,
    #[arg(long, global = true)]
    ce_weight: Option<String>,
    #[arg(long, global = true)]
    triplet_weight: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    head_joints: Option<String>,
    #[arg(long, global = true)]
    align: Option<String>,
    #[arg(long, global = true)]
    identities: Option<String>,
    #[arg(long, global = true)]
    clips: Option<String>,
    #[arg(long, global = true)]
    frames: Option<String>,
    #[arg(long, global = true)]
    conditions: Option<String>,
    #[arg(long, global = true)]
    canvas_height: Option<String>,
    #[arg(long, global = true)]
    canvas_width: Option<String>,
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
}

impl KeyFlags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 22] {
        [
            ("tau", &self.tau),
            ("radius", &self.radius),
            ("line_width", &self.line_width),
            ("strategy", &self.strategy),
            ("target_height", &self.target_height),
            ("target_width", &self.target_width),
            ("bands", &self.bands),
            ("stripes", &self.stripes),
            ("margin", &self.margin),
            ("ce_weight", &self.ce_weight),
            ("triplet_weight", &self.triplet_weight),
            ("seed", &self.seed),
            ("head_joints", &self.head_joints),
            ("align", &self.align),
            ("identities", &self.identities),
            ("clips", &self.clips),
            ("frames", &self.frames),
            ("conditions", &self.conditions),
            ("canvas_height", &self.canvas_height),
            ("canvas_width", &self.canvas_width),
            ("dataset", &self.dataset),
            ("out", &self.out),
        ]
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic benchmark dataset.
    Synth,
    /// Render part-labeled rasters for every frame.
    Render {
        /// Print ms/frame.
        #[arg(long)]
        bench: bool,
    },
    /// Fuse rendered rasters with silhouettes at the target size.
    Fuse,
    /// Write the class-entropy report.
    Entropy,
    /// Evaluate silhouette-only vs fused retrieval per condition.
    Eval {
        /// Earlier eval_report.json to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Evaluate the radius/width grid in memory.
    Sweep,
    /// Time in-memory render + fuse, serial and parallel.
    Bench {
        #[arg(long, default_value_t = 1000)]
        bench_frames: usize,
    },
}

fn build_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            let mut c = PipelineConfig::default();
            c.apply_text(&text, &p.display().to_string())?;
            c
        }
        None => PipelineConfig::default(),
    };
    for (key, value) in cli.keys.pairs() {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("--{key}: {m}")),
                e => e,
            })?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exec_for(workers: Option<usize>) -> Result<Exec> {
    match workers {
        Some(0) => Err(Error::Config("--workers must be at least 1".into())),
        Some(1) => Ok(Exec::Serial),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(format!("--workers: {e}")))?;
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Serial),
        None => Ok(Exec::Parallel),
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    let exec = exec_for(cli.workers)?;
    match cli.cmd {
        Cmd::Synth => {
            let m = pipeline::cmd_synth(&cfg, cli.force, exec)?;
            println!("wrote {} sequences to {}", m.entries.len(), cfg.dataset.display());
        }
        Cmd::Render { bench } => {
            let s = pipeline::cmd_render(&cfg, exec)?;
            warn_all(&s.warnings);
            println!("rendered {} frames in {} sequences", s.frames, s.sequences);
            if bench {
                println!("ms/frame {:.4}", s.ms_per_frame());
            }
        }
        Cmd::Fuse => {
            let s = pipeline::cmd_fuse(&cfg, cli.force, exec)?;
            println!(
                "fused {} frames in {} sequences ({}, config {})",
                s.frames,
                s.sequences,
                cfg.strategy.name(),
                s.config_hash
            );
        }
        Cmd::Entropy => {
            let r = pipeline::cmd_entropy(&cfg, exec)?;
            print!("{}", r.to_text());
        }
        Cmd::Eval { baseline } => {
            let base = baseline.as_deref().map(EvalSummary::load).transpose()?;
            let s = pipeline::cmd_eval(&cfg, cli.force, exec)?;
            warn_all(&s.warnings);
            print!("{}", s.to_text());
            if let Some(b) = base {
                pipeline::check_comparable(&b, &s, cli.force)?;
                for row in &s.rows {
                    if let Some(old) = b.row(&row.representation, &row.condition) {
                        println!(
                            "delta {} {} rank1 {:+.4} map {:+.4}",
                            row.representation,
                            row.condition,
                            row.metrics.rank1 - old.metrics.rank1,
                            row.metrics.map - old.metrics.map
                        );
                    }
                }
            }
        }
        Cmd::Sweep => {
            let r = pipeline::cmd_sweep(&cfg, &SWEEP_GRID, exec)?;
            print!("{}", r.to_text());
        }
        Cmd::Bench { bench_frames } => {
            let frames = pipeline::bench_frames(&cfg, bench_frames)?;
            for (name, e) in [("serial", Exec::Serial), ("parallel", exec)] {
                let r = pipeline::bench_render_fuse(&cfg, &frames, e)?;
                println!("{name:<8} {:>8.4} ms/frame {:>10.1} frames/s", r.ms_per_frame(), r.frames_per_second());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
