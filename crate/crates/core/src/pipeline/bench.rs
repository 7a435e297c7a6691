use rayon::prelude::*;
use serde::Serialize;

use super::config::PipelineConfig;
use super::{run_scene, PipelineError, Stage};
use crate::synth::{generate_scene, SceneSpec};
use crate::volume::Method;

/// Scene seed for round `k`: every round is a fresh scan of the same pile.
pub fn round_seed(base: u64, k: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(k as u64)
}

/// Pipeline config for round `k`; RANSAC sampling changes with the round too.
fn round_config(cfg: &PipelineConfig, k: usize) -> PipelineConfig {
    let mut c = cfg.clone();
    c.seed = cfg.seed.wrapping_add(k as u64);
    c
}

fn run_round(spec: &SceneSpec, cfg: &PipelineConfig, k: usize) -> Result<super::RunReport, PipelineError> {
    let scene = generate_scene(&spec.with_seed(round_seed(spec.seed, k))).map_err(|e| PipelineError::Input(e.to_string()))?;
    run_scene(&scene, &round_config(cfg, k))
}

/// Summary of a set of signed relative errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchStats {
    pub runs: usize,
    /// Mean of |error|.
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub mean_signed_error: f64,
    /// Population variance of the signed error.
    pub variance: f64,
}

impl BenchStats {
    pub fn from_errors(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        Some(BenchStats {
            runs: errors.len(),
            mean_abs_error: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
            max_abs_error: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
            mean_signed_error: mean,
            variance: errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub scene: usize,
    pub shape: String,
    pub footprint_area: f64,
    pub tilt_deg: f64,
    pub true_volume: f64,
    pub stats: Option<BenchStats>,
    /// Set when any round failed; the first error is kept.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rounds: usize,
    pub rows: Vec<BenchRow>,
    /// Every successful run pooled.
    pub overall: Option<BenchStats>,
    pub errors: Vec<Vec<f64>>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scene", "shape", "footprint_m2", "tilt_deg", "true_volume_m3", "runs", "mean_error", "max_error", "mean_signed_error",
            "variance", "status",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.scene.to_string(),
                r.shape.clone(),
                r.footprint_area.to_string(),
                r.tilt_deg.to_string(),
                r.true_volume.to_string(),
            ];
            match &r.stats {
                Some(s) => rec.extend([
                    s.runs.to_string(),
                    s.mean_abs_error.to_string(),
                    s.max_abs_error.to_string(),
                    s.mean_signed_error.to_string(),
                    s.variance.to_string(),
                ]),
                None => rec.extend(["0".to_string(), String::new(), String::new(), String::new(), String::new()]),
            }
            rec.push(match &r.failure {
                Some(e) => format!("FAILED: {e}"),
                None => "ok".into(),
            });
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Runs every scene `rounds` times. Scenes run concurrently; failures are
/// recorded per row and the rest carry on.
pub fn bench_reference(catalogue: &[SceneSpec], rounds: usize, cfg: &PipelineConfig) -> Result<BenchReport, PipelineError> {
    if rounds == 0 {
        return Err(PipelineError::Config("rounds must be at least 1".into()));
    }
    cfg.validate().map_err(PipelineError::Config)?;
    let results: Vec<Vec<Result<f64, String>>> = catalogue
        .par_iter()
        .map(|spec| {
            (0..rounds)
                .map(|k| match run_round(spec, cfg, k) {
                    Ok(r) => r.relative_error.ok_or_else(|| "no ground truth".to_string()),
                    Err(e) => Err(e.to_string()),
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(catalogue.len());
    let mut errors = Vec::with_capacity(catalogue.len());
    for (i, (spec, res)) in catalogue.iter().zip(results).enumerate() {
        let ok: Vec<f64> = res.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let failure = res.iter().find_map(|r| r.as_ref().err().cloned());
        rows.push(BenchRow {
            scene: i,
            shape: spec.pile.name().to_string(),
            footprint_area: spec.footprint_area(),
            tilt_deg: spec.tilt_deg,
            true_volume: spec.pile.true_volume(),
            stats: BenchStats::from_errors(&ok),
            failure,
        });
        errors.push(ok);
    }
    let pooled: Vec<f64> = errors.iter().flatten().copied().collect();
    Ok(BenchReport { rounds, rows, overall: BenchStats::from_errors(&pooled), errors })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// `None` is the uncompressed run.
    pub voxel_size: Option<f64>,
    pub compressed_ratio: f64,
    pub mean_error: f64,
    pub mean_signed_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["voxel_size", "compressed_ratio", "mean_error", "mean_signed_error"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.voxel_size.map(|v| v.to_string()).unwrap_or_else(|| "origin".into()),
                r.compressed_ratio.to_string(),
                r.mean_error.to_string(),
                r.mean_signed_error.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Grid cells narrower than this many voxels leave empty columns between
/// voxel centroids.
pub const GRID_CELLS_PER_VOXEL: f64 = 2.0;

/// Reruns the pipeline on `spec` at each voxel size. The ratio is the
/// downsampled count over the count entering the downsampler.
pub fn compression_sweep(
    spec: &SceneSpec,
    voxel_sizes: &[f64],
    rounds: usize,
    cfg: &PipelineConfig,
) -> Result<SweepReport, PipelineError> {
    if rounds == 0 {
        return Err(PipelineError::Config("rounds must be at least 1".into()));
    }
    if voxel_sizes.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(PipelineError::Config("voxel sizes must be positive".into()));
    }
    if voxel_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PipelineError::Config("voxel sizes must be strictly ascending".into()));
    }
    let sizes: Vec<Option<f64>> = std::iter::once(None).chain(voxel_sizes.iter().copied().map(Some)).collect();
    let rows = sizes
        .par_iter()
        .map(|&v| -> Result<SweepRow, PipelineError> {
            let mut c = cfg.clone();
            c.downsample.voxel_size = v;
            if let (Some(v), Method::ColumnGrid) = (v, c.volume.estimator) {
                c.volume.cell_size = c.volume.cell_size.max(GRID_CELLS_PER_VOXEL * v);
            }
            let mut ratios = Vec::with_capacity(rounds);
            let mut errs = Vec::with_capacity(rounds);
            for k in 0..rounds {
                let r = run_round(spec, &c, k)?;
                let before = r.count_after(Stage::Preprocess).unwrap_or(r.input_count);
                let after = r.count_after(Stage::Downsample).unwrap_or(before);
                ratios.push(after as f64 / before as f64);
                errs.push(r.relative_error.unwrap_or(f64::NAN));
            }
            let s = BenchStats::from_errors(&errs).expect("rounds >= 1");
            Ok(SweepRow {
                voxel_size: v,
                compressed_ratio: ratios.iter().sum::<f64>() / rounds as f64,
                mean_error: s.mean_abs_error,
                mean_signed_error: s.mean_signed_error,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepReport { rows })
}
