use serde::Serialize;

use super::config::PipelineConfig;
use super::Stage;
use crate::groundcal::GroundEstimate;
use crate::pose::PlaneModel;
use crate::volume::VolumeEstimate;

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub enabled: bool,
    /// Points leaving the stage.
    pub count: usize,
    pub millis: f64,
}

impl StageRecord {
    pub fn new(stage: Stage, enabled: bool, count: usize, millis: f64) -> Self {
        StageRecord { stage, enabled, count, millis }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlaneSummary {
    pub coefficients: [f64; 4],
    pub inliers: usize,
    pub rms_residual: f64,
    pub tilt_deg: f64,
}

impl From<&PlaneModel> for PlaneSummary {
    fn from(p: &PlaneModel) -> Self {
        PlaneSummary {
            coefficients: p.coefficients(),
            inliers: p.inlier_indices.len(),
            rms_residual: p.rms_residual,
            tilt_deg: p.unit_normal.z.clamp(-1.0, 1.0).acos().to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub input_count: usize,
    pub stages: Vec<StageRecord>,
    pub element_area: Option<f64>,
    pub plane: Option<PlaneSummary>,
    pub ground: Option<GroundEstimate>,
    pub volume: VolumeEstimate,
    pub true_volume: Option<f64>,
    /// Signed, (estimate - truth) / truth.
    pub relative_error: Option<f64>,
    pub warnings: Vec<String>,
    pub config: PipelineConfig,
}

impl RunReport {
    pub fn count_after(&self, stage: Stage) -> Option<usize> {
        self.stages.iter().find(|r| r.stage == stage).map(|r| r.count)
    }

    pub fn stage_counts_non_increasing(&self) -> bool {
        let mut last = self.input_count;
        for r in &self.stages {
            if r.count > last {
                return false;
            }
            last = r.count;
        }
        true
    }

    /// `field,value` rows. Timings are left out so equal runs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![("input_count".into(), self.input_count.to_string())];
        for r in &self.stages {
            rows.push((format!("count_{}", r.stage.name()), r.count.to_string()));
            rows.push((format!("enabled_{}", r.stage.name()), r.enabled.to_string()));
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(("element_area".into(), opt(self.element_area)));
        if let Some(p) = &self.plane {
            let [a, b, c, d] = p.coefficients;
            rows.push(("plane".into(), format!("{a} {b} {c} {d}")));
            rows.push(("plane_inliers".into(), p.inliers.to_string()));
            rows.push(("plane_tilt_deg".into(), p.tilt_deg.to_string()));
        }
        if let Some(g) = &self.ground {
            rows.push(("ground_height".into(), g.height.to_string()));
            rows.push(("ground_mode".into(), g.mode.name().into()));
            rows.push(("ground_confidence".into(), g.confidence.to_string()));
        }
        let v = &self.volume;
        rows.push(("method".into(), v.method.name().into()));
        rows.push(("volume_m3".into(), v.volume.to_string()));
        for (k, x) in &v.params {
            rows.push((format!("param_{k}"), x.to_string()));
        }
        rows.push(("point_count".into(), v.diagnostics.point_count.to_string()));
        rows.push(("element_count".into(), v.diagnostics.element_count.to_string()));
        rows.push(("compensation".into(), v.diagnostics.compensation.to_string()));
        rows.push(("true_volume_m3".into(), opt(self.true_volume)));
        rows.push(("relative_error".into(), opt(self.relative_error)));
        for w in &self.warnings {
            rows.push(("warning".into(), w.clone()));
        }
        rows.push(("seed".into(), self.config.seed.to_string()));

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["field", "value"]).expect("in-memory write");
        for (k, v) in rows {
            w.write_record([k, v]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
