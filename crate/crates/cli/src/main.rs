//! `pilevol`: run the pipeline, benchmark it on synthetic scenes, sweep
//! compression, dump height histograms and export scenes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pilevol_core::pipeline::{config_for_scene, histogram_svg, sweep_svg};
use pilevol_core::synth::SceneSpec;
use pilevol_core::{
    bench_reference, compression_sweep, emit_histogram, generate_scene, load_cloud, reference_scenes, run_pipeline, save_cloud,
    CloudFormat, PipelineConfig, PipelineError, PointCloud,
};

#[derive(Parser)]
#[command(name = "pilevol", version, about = "Pile volume estimation from point clouds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set volume.cell_size=0.03`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Source {
    /// Point cloud file (.ply, .xyz).
    #[arg(long, conflicts_with = "scene")]
    input: Option<PathBuf>,
    /// Reference scene index, 0-17.
    #[arg(long)]
    scene: Option<usize>,
    /// Seed override for the reference scene.
    #[arg(long, requires = "scene")]
    scene_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline once and write report.csv and report.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
    },
    /// Run every reference scene several times and write bench.csv.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
        /// Restrict to these scene indices (comma separated).
        #[arg(long, value_delimiter = ',')]
        scenes: Vec<usize>,
    },
    /// Downsample at each voxel size and write sweep.csv and sweep.svg.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        scene: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03,0.04,0.05,0.1,0.2,0.3,0.4")]
        voxels: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
    },
    /// Write the smoothed height histogram with its ground marker.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
    },
    /// Export a synthetic scene as a cloud plus its spec sidecar.
    Synth {
        /// Output directory, created if missing.
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Reference scene index, 0-17.
        #[arg(long, conflicts_with = "spec")]
        scene: Option<usize>,
        /// Scene spec as TOML.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "ply-binary-le")]
        format: CloudFormat,
    },
}

type Result<T> = std::result::Result<T, PipelineError>;

fn config_err(e: impl ToString) -> PipelineError {
    PipelineError::Config(e.to_string())
}

fn input_err(e: impl ToString) -> PipelineError {
    PipelineError::Input(e.to_string())
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    PipelineConfig::from_toml_with_overrides(&text, &common.sets).map_err(config_err)
}

fn reference(idx: usize) -> Result<SceneSpec> {
    reference_scenes()
        .get(idx)
        .cloned()
        .ok_or_else(|| config_err(format!("scene index {idx} out of range 0-17")))
}

fn apply_source(cfg: &mut PipelineConfig, src: &Source) -> Result<()> {
    if let Some(p) = &src.input {
        cfg.input.path = Some(p.clone());
    }
    if let Some(i) = src.scene {
        let mut s = reference(i)?;
        if let Some(seed) = src.scene_seed {
            s.seed = seed;
        }
        cfg.input.path = None;
        cfg.input.scene = Some(s);
    }
    Ok(())
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| input_err(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn cmd_run(common: &Common, src: &Source) -> Result<()> {
    let mut cfg = load_config(common)?;
    apply_source(&mut cfg, src)?;
    let report = run_pipeline(&cfg)?;
    write(&common.out, "report.csv", &report.to_csv())?;
    write(&common.out, "report.json", &report.to_json())?;
    print!("volume {:.6} m3", report.volume.volume);
    if let Some(e) = report.relative_error {
        print!(" (error {})", pct(e));
    }
    println!();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_bench(common: &Common, rounds: usize, scenes: &[usize]) -> Result<()> {
    let cfg = load_config(common)?;
    let all = reference_scenes();
    let cat: Vec<SceneSpec> = if scenes.is_empty() {
        all
    } else {
        scenes.iter().map(|&i| reference(i)).collect::<Result<_>>()?
    };
    let report = bench_reference(&cat, rounds, &cfg)?;
    write(&common.out, "bench.csv", &report.to_csv())?;
    if let Some(o) = report.overall {
        println!("{} runs, mean error {}, max {}, variance {:.3e}", o.runs, pct(o.mean_abs_error), pct(o.max_abs_error), o.variance);
    }
    let failed = report.rows.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} scene(s) FAILED, see bench.csv");
    }
    Ok(())
}

fn cmd_sweep(common: &Common, scene: usize, voxels: &[f64], rounds: usize) -> Result<()> {
    let cfg = load_config(common)?;
    let report = compression_sweep(&reference(scene)?, voxels, rounds, &cfg)?;
    write(&common.out, "sweep.csv", &report.to_csv())?;
    write(&common.out, "sweep.svg", &sweep_svg(&report))?;
    for r in &report.rows {
        let v = r.voxel_size.map(|v| format!("{v}")).unwrap_or_else(|| "origin".into());
        println!("{v:>8}  ratio {:.4}  error {}", r.compressed_ratio, pct(r.mean_error));
    }
    Ok(())
}

fn cmd_histogram(common: &Common, src: &Source) -> Result<()> {
    let mut cfg = load_config(common)?;
    apply_source(&mut cfg, src)?;
    let (cloud, cfg): (PointCloud, PipelineConfig) = if let Some(spec) = &cfg.input.scene {
        let scene = generate_scene(spec).map_err(input_err)?;
        let c = config_for_scene(&scene, &cfg);
        (scene.cloud, c)
    } else if let Some(path) = &cfg.input.path {
        let format = cfg
            .input
            .format
            .or_else(|| CloudFormat::from_path(path))
            .ok_or_else(|| config_err(format!("cannot tell the format of {}", path.display())))?;
        (load_cloud(path, format).map_err(input_err)?, cfg)
    } else {
        return Err(config_err("no input: pass --input or --scene"));
    };
    let dump = emit_histogram(&cloud, &cfg)?;
    write(&common.out, "histogram.csv", &dump.to_csv())?;
    write(&common.out, "histogram.svg", &histogram_svg(&dump))?;
    println!("ground at {:.4} m ({})", dump.ground.height, dump.ground.mode.name());
    Ok(())
}

fn cmd_synth(out: &Path, scene: Option<usize>, spec: Option<&Path>, seed: Option<u64>, format: CloudFormat) -> Result<()> {
    let mut s = match (scene, spec) {
        (_, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| input_err(format!("{}: {e}", p.display())))?;
            SceneSpec::from_toml(&text).map_err(config_err)?
        }
        (Some(i), None) => reference(i)?,
        (None, None) => return Err(config_err("pass --scene or --spec")),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let scene = generate_scene(&s).map_err(config_err)?;
    let ext = if format == CloudFormat::Xyz { "xyz" } else { "ply" };
    fs::create_dir_all(out).map_err(|e| input_err(format!("{}: {e}", out.display())))?;
    let path = out.join(format!("scene.{ext}"));
    save_cloud(&scene.cloud, &path, format).map_err(input_err)?;
    println!("wrote {}", path.display());
    write(out, "scene.toml", &s.to_toml())?;
    println!("{} points, true volume {:.6} m3", scene.cloud.len(), scene.true_volume);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.cmd {
        Cmd::Run { common, source } => cmd_run(common, source),
        Cmd::Bench { common, rounds, scenes } => cmd_bench(common, *rounds, scenes),
        Cmd::Sweep { common, scene, voxels, rounds } => cmd_sweep(common, *scene, voxels, *rounds),
        Cmd::Histogram { common, source } => cmd_histogram(common, source),
        Cmd::Synth { out, scene, spec, seed, format } => cmd_synth(out, *scene, spec.as_deref(), *seed, *format),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
