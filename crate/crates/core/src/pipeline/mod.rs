//! The five-stage run: pre-process, posture correction, ground calibration,
//! fine filtering and volume integration.

mod bench;
pub mod config;
mod plot;
mod report;

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::cloud::{passthrough_filter, voxel_downsample, PointCloud};
use crate::denoise::{robust_filter, HdbscanParams, RadiusFilterParams};
use crate::groundcal::{calibrate, find_ground_with, height_histogram, refine_ground, smooth_histogram, GroundEstimate, HeightHistogram};
use crate::io::{load_cloud, CloudFormat};
use crate::pose::{correct_posture, ransac_plane, PlaneModel};
use crate::synth::{generate_scene, Scene};
use crate::volume::{column_volume_grid, column_volume_uniform, footprint_area, hull3d_volume, slice_volume, Method, VolumeEstimate};

pub use bench::{bench_reference, compression_sweep, BenchReport, BenchRow, BenchStats, SweepReport, SweepRow};
pub use config::{GroundModeName, PipelineConfig};
pub use plot::{histogram_svg, sweep_svg};
pub use report::{PlaneSummary, RunReport, StageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Passthrough,
    Preprocess,
    Downsample,
    Posture,
    Calibration,
    FineFilter,
    Volume,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Passthrough => "passthrough",
            Stage::Preprocess => "preprocess",
            Stage::Downsample => "downsample",
            Stage::Posture => "posture",
            Stage::Calibration => "calibration",
            Stage::FineFilter => "fine-filter",
            Stage::Volume => "volume",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{} stage failed: {message}", stage.name())]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Input(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }

    fn stage(stage: Stage, e: impl ToString) -> Self {
        PipelineError::Stage { stage, message: e.to_string() }
    }
}

pub const WARN_CALIBRATION_WITHOUT_POSTURE: &str =
    "ground calibration ran without posture correction; a tilted ground spreads the height histogram";

/// Cloud after posture correction plus what the first two stages found.
struct Prepared {
    cloud: PointCloud,
    element_area: Option<f64>,
    plane: Option<PlaneModel>,
    records: Vec<StageRecord>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64() * 1e3)
}

fn prepare(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<Prepared, PipelineError> {
    let mut records = Vec::new();
    let mut cur = cloud.clone();

    let on = cfg.stages.passthrough && !cfg.passthrough.is_empty();
    let (out, ms) = timed(|| if on { passthrough_filter(&cur, &cfg.passthrough) } else { cur.clone() });
    cur = out;
    records.push(StageRecord::new(Stage::Passthrough, on, cur.len(), ms));

    let on = cfg.stages.preprocess;
    let (out, ms) = timed(|| if on { robust_filter(&cur, &cfg.radius_filter, &cfg.hdbscan) } else { Ok(cur.clone()) });
    cur = out.map_err(|e| PipelineError::stage(Stage::Preprocess, e))?;
    records.push(StageRecord::new(Stage::Preprocess, on, cur.len(), ms));

    if let Some(v) = cfg.downsample.voxel_size {
        let (out, ms) = timed(|| voxel_downsample(&cur, v));
        cur = out.map_err(|e| PipelineError::stage(Stage::Downsample, e))?;
        records.push(StageRecord::new(Stage::Downsample, true, cur.len(), ms));
    }
    if cur.is_empty() {
        return Err(PipelineError::stage(Stage::Preprocess, "no points left after pre-processing"));
    }
    let element_area = match cfg.input.scene_area {
        Some(a) => Some(footprint_area(a, cur.len()).map_err(|e| PipelineError::stage(Stage::Preprocess, e))?),
        None => None,
    };

    let on = cfg.stages.posture;
    let mut plane = None;
    let (out, ms) = timed(|| -> Result<PointCloud, PipelineError> {
        if !on {
            return Ok(cur.clone());
        }
        let p = ransac_plane(&cur, &cfg.ransac_params()).map_err(|e| PipelineError::stage(Stage::Posture, e))?;
        let c = correct_posture(&cur, &p).map_err(|e| PipelineError::stage(Stage::Posture, e))?;
        plane = Some(p);
        Ok(c)
    });
    cur = out?;
    records.push(StageRecord::new(Stage::Posture, on, cur.len(), ms));

    Ok(Prepared { cloud: cur, element_area, plane, records })
}

/// Raw and smoothed histograms plus the ground read from them.
pub fn ground_from_cloud(
    cloud: &PointCloud,
    cfg: &PipelineConfig,
) -> Result<(HeightHistogram, HeightHistogram, GroundEstimate), PipelineError> {
    let h = &cfg.histogram;
    let err = |e| PipelineError::stage(Stage::Calibration, e);
    let raw = height_histogram(cloud, h.n_interval).map_err(err)?;
    let smooth = smooth_histogram(&raw, h.step).map_err(err)?;
    let mut g = find_ground_with(&smooth, h.search_band, h.ground_mode(), &h.rules()).map_err(err)?;
    if h.refine {
        g = refine_ground(&smooth, &g);
    }
    Ok((raw, smooth, g))
}

/// Filter parameters for the fine filter. After voxel downsampling the
/// spacing grows to about the voxel size and the cloud shrinks, so the
/// radius and the cluster size follow.
pub fn fine_filter_params(cfg: &PipelineConfig, n: usize) -> (RadiusFilterParams, HdbscanParams) {
    let (mut rp, mut hp) = (cfg.radius_filter, cfg.hdbscan);
    if let Some(v) = cfg.downsample.voxel_size {
        rp.r0 = rp.r0.max(1.5 * v);
        hp.min_cluster_size = hp.min_cluster_size.min((n / 20).max(5));
        hp.min_samples = hp.min_samples.min(hp.min_cluster_size);
    }
    (rp, hp)
}

/// Runs every enabled stage on `cloud`.
pub fn run_on_cloud(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    if cfg.volume.estimator == Method::ColumnUniform && cfg.input.scene_area.is_none() {
        return Err(PipelineError::Config("the column-uniform estimator needs input.scene_area".into()));
    }
    let Prepared { cloud: mut cur, element_area, plane, mut records } = prepare(cloud, cfg)?;
    let mut warnings = Vec::new();

    let on = cfg.stages.calibration;
    let mut ground = None;
    let (out, ms) = timed(|| -> Result<PointCloud, PipelineError> {
        if !on {
            return Ok(cur.clone());
        }
        let (_, _, g) = ground_from_cloud(&cur, cfg)?;
        let margin = cfg.calibration.margin;
        let mut c = calibrate(&cur, &g, margin);
        if cfg.calibration.restore_margin && margin > 0.0 {
            c = c.map(|p| crate::cloud::Point3::new(p.x, p.y, p.z + margin));
        }
        ground = Some(g);
        Ok(c)
    });
    cur = out?;
    records.push(StageRecord::new(Stage::Calibration, on, cur.len(), ms));
    if on && !cfg.stages.posture {
        warnings.push(WARN_CALIBRATION_WITHOUT_POSTURE.to_string());
    }

    let on = cfg.stages.fine_filter;
    let (rp, hp) = fine_filter_params(cfg, cur.len());
    let (out, ms) = timed(|| if on { robust_filter(&cur, &rp, &hp) } else { Ok(cur.clone()) });
    cur = out.map_err(|e| PipelineError::stage(Stage::FineFilter, e))?;
    records.push(StageRecord::new(Stage::FineFilter, on, cur.len(), ms));

    let v = &cfg.volume;
    let (out, ms) = timed(|| match v.estimator {
        Method::ColumnUniform => column_volume_uniform(&cur, element_area.expect("checked above"), v.compensation, v.signed),
        Method::ColumnGrid => column_volume_grid(&cur, &v.grid(), v.compensation),
        Method::Slice => slice_volume(&cur, v.slice_interval),
        Method::Hull3d => hull3d_volume(&cur),
    });
    let mut volume: VolumeEstimate = out.map_err(|e| PipelineError::stage(Stage::Volume, e))?;
    if cfg.stages.calibration {
        volume.diagnostics.ground_margin = Some(cfg.calibration.margin);
    }
    records.push(StageRecord::new(Stage::Volume, true, cur.len(), ms));

    let true_volume = cfg.input.true_volume;
    Ok(RunReport {
        input_count: cloud.len(),
        stages: records,
        element_area,
        plane: plane.as_ref().map(PlaneSummary::from),
        ground,
        relative_error: true_volume.map(|t| (volume.volume - t) / t),
        volume,
        true_volume,
        warnings,
        config: cfg.clone(),
    })
}

/// Fills scene-derived defaults: the measurement region as pass-through
/// ranges, the ground area and the true volume.
pub fn config_for_scene(scene: &Scene, cfg: &PipelineConfig) -> PipelineConfig {
    let mut c = cfg.clone();
    if c.passthrough.is_empty() {
        c.passthrough = scene.measurement_region();
    }
    c.input.scene_area.get_or_insert(scene.spec.footprint_area());
    c.input.true_volume.get_or_insert(scene.true_volume);
    c
}

pub fn run_scene(scene: &Scene, cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    run_on_cloud(&scene.cloud, &config_for_scene(scene, cfg))
}

/// Loads the configured input (file or synthetic scene) and runs it.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    if let Some(path) = &cfg.input.path {
        let format = cfg
            .input
            .format
            .or_else(|| CloudFormat::from_path(path))
            .ok_or_else(|| PipelineError::Config(format!("cannot tell the format of {}", path.display())))?;
        let cloud = load_cloud(path, format).map_err(|e| PipelineError::Input(e.to_string()))?;
        return run_on_cloud(&cloud, cfg);
    }
    if let Some(spec) = &cfg.input.scene {
        let scene = generate_scene(spec).map_err(|e| PipelineError::Input(e.to_string()))?;
        return run_scene(&scene, cfg);
    }
    Err(PipelineError::Config("no input: set input.path or input.scene".into()))
}

/// Smoothed height histogram of the posture-corrected cloud and the ground
/// found in it.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramDump {
    pub histogram: HeightHistogram,
    pub ground: GroundEstimate,
}

impl HistogramDump {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "bin_center", "count", "is_ground"]).expect("in-memory write");
        let h = &self.histogram;
        let gbin = h.bin_of(self.ground.height);
        for i in 0..h.len() {
            w.write_record([
                h.bin_edges[i].to_string(),
                h.bin_edges[i + 1].to_string(),
                h.bin_center(i).to_string(),
                h.counts[i].to_string(),
                (i == gbin).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Runs pre-processing and posture correction, then builds the histogram
/// the calibration stage would use.
pub fn emit_histogram(cloud: &PointCloud, cfg: &PipelineConfig) -> Result<HistogramDump, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    if cloud.is_empty() {
        return Err(PipelineError::Input("cloud is empty".into()));
    }
    let prepared = prepare(cloud, cfg)?;
    let (_, smooth, ground) = ground_from_cloud(&prepared.cloud, cfg)?;
    Ok(HistogramDump { histogram: smooth, ground })
}
