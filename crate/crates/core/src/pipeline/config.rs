//! Run configuration, read from TOML.
//!
//! Every section and key is optional and falls back to its default; unknown
//! keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cloud::AxisRange;
use crate::denoise::{HdbscanParams, RadiusFilterParams};
use crate::groundcal::{GroundMode, PeakRules};
use crate::io::CloudFormat;
use crate::pose::RansacParams;
use crate::synth::SceneSpec;
use crate::volume::{Aggregator, CompensationFactor, GridSpec, Method};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<CloudFormat>,
    /// Ground area the cloud covers, m²; needed by the uniform estimator.
    pub scene_area: Option<f64>,
    /// Known volume for error reporting.
    pub true_volume: Option<f64>,
    /// Synthetic scene used when no path is given.
    pub scene: Option<SceneSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    pub distance_threshold: f64,
    pub max_iterations: usize,
    pub min_inlier_fraction: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        let d = RansacParams::default();
        RansacConfig {
            distance_threshold: d.distance_threshold,
            max_iterations: d.max_iterations,
            min_inlier_fraction: d.min_inlier_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundModeName {
    FirstPeak,
    MidPlateau,
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramConfig {
    pub n_interval: usize,
    pub step: usize,
    pub search_band: f64,
    pub mode: GroundModeName,
    pub override_height: Option<f64>,
    pub peak_gate: f64,
    pub plateau_tolerance: f64,
    /// Replace the peak bin center by the half-height centroid around it.
    pub refine: bool,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        let rules = PeakRules::default();
        HistogramConfig {
            n_interval: 256,
            step: 5,
            search_band: 0.25,
            mode: GroundModeName::FirstPeak,
            override_height: None,
            peak_gate: rules.peak_gate,
            plateau_tolerance: rules.plateau_tolerance,
            refine: true,
        }
    }
}

impl HistogramConfig {
    pub fn ground_mode(&self) -> GroundMode {
        match self.mode {
            GroundModeName::FirstPeak => GroundMode::FirstPeak,
            GroundModeName::MidPlateau => GroundMode::MidPlateau,
            GroundModeName::Override => GroundMode::Override(self.override_height.unwrap_or(0.0)),
        }
    }

    pub fn rules(&self) -> PeakRules {
        PeakRules { peak_gate: self.peak_gate, plateau_tolerance: self.plateau_tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Extra height above the detected ground below which points are cut.
    pub margin: f64,
    /// Shift the survivors back up by `margin`, so heights are measured from
    /// the detected ground and the margin only trims near-ground points.
    pub restore_margin: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { margin: 0.01, restore_margin: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeConfig {
    pub estimator: Method,
    pub cell_size: f64,
    pub aggregator: Aggregator,
    pub compensation: CompensationFactor,
    /// Signed heights for the uniform estimator.
    pub signed: bool,
    pub slice_interval: f64,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig {
            estimator: Method::ColumnUniform,
            cell_size: 0.02,
            aggregator: Aggregator::Mean,
            compensation: CompensationFactor::NONE,
            signed: true,
            slice_interval: 0.02,
        }
    }
}

impl VolumeConfig {
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.cell_size, self.aggregator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DownsampleConfig {
    pub voxel_size: Option<f64>,
}

/// Stage switches. A disabled stage passes its input through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageToggles {
    pub passthrough: bool,
    /// Radius filter plus largest-cluster extraction before posture.
    pub preprocess: bool,
    pub posture: bool,
    pub calibration: bool,
    pub fine_filter: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles { passthrough: true, preprocess: true, posture: true, calibration: true, fine_filter: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Seeds RANSAC.
    pub seed: u64,
    pub input: InputConfig,
    /// Empty means "derive from the synthetic scene" or "no limits".
    pub passthrough: Vec<AxisRange>,
    pub radius_filter: RadiusFilterParams,
    pub hdbscan: HdbscanParams,
    pub ransac: RansacConfig,
    pub histogram: HistogramConfig,
    pub calibration: CalibrationConfig,
    pub volume: VolumeConfig,
    pub downsample: DownsampleConfig,
    pub stages: StageToggles,
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

impl PipelineConfig {
    pub fn from_toml(s: &str) -> Result<Self, String> {
        let c: PipelineConfig = toml::from_str(s).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    /// Parses TOML after applying `section.key=value` overrides.
    pub fn from_toml_with_overrides(s: &str, overrides: &[String]) -> Result<Self, String> {
        let mut table: toml::Table = toml::from_str(s).map_err(|e| e.to_string())?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let c: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn ransac_params(&self) -> RansacParams {
        RansacParams {
            distance_threshold: self.ransac.distance_threshold,
            max_iterations: self.ransac.max_iterations,
            min_inlier_fraction: self.ransac.min_inlier_fraction,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for r in &self.passthrough {
            r.validate().map_err(|e| e.to_string())?;
        }
        self.radius_filter.validate().map_err(|e| e.to_string())?;
        self.hdbscan.validate().map_err(|e| e.to_string())?;
        self.ransac_params().validate().map_err(|e| e.to_string())?;
        let h = &self.histogram;
        if h.n_interval < 2 {
            return Err("histogram.n_interval must be at least 2".into());
        }
        if h.step == 0 || h.step % 2 == 0 || h.step > h.n_interval {
            return Err(format!("histogram.step must be odd and at most n_interval, got {}", h.step));
        }
        if !(h.search_band > 0.0 && h.search_band <= 1.0) {
            return Err("histogram.search_band must lie in (0, 1]".into());
        }
        if h.mode == GroundModeName::Override && !h.override_height.is_some_and(f64::is_finite) {
            return Err("histogram.mode = \"override\" needs histogram.override_height".into());
        }
        if !(0.0..=1.0).contains(&h.peak_gate) || !(0.0..1.0).contains(&h.plateau_tolerance) {
            return Err("histogram.peak_gate must lie in [0, 1] and plateau_tolerance in [0, 1)".into());
        }
        if !(self.calibration.margin >= 0.0 && self.calibration.margin.is_finite()) {
            return Err("calibration.margin must be non-negative".into());
        }
        positive("volume.cell_size", self.volume.cell_size)?;
        positive("volume.slice_interval", self.volume.slice_interval)?;
        if let Some(v) = self.downsample.voxel_size {
            positive("downsample.voxel_size", v)?;
        }
        if let Some(a) = self.input.scene_area {
            positive("input.scene_area", a)?;
        }
        if let Some(s) = &self.input.scene {
            s.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

/// Sets `path = value` in a TOML table. The value is read as a TOML literal
/// and taken as a bare string when that fails.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override '{assignment}' is not of the form key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("bad override key '{path}'"));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("override key '{path}': '{k}' is not a section"))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("[radius_filter]\nr1 = 0.1\n").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn sections_parse() {
        let text = r#"
seed = 9
[input]
path = "cloud.ply"
scene_area = 1.3
[[passthrough]]
axis = "z"
lo = -0.5
[histogram]
mode = "mid-plateau"
[volume]
estimator = "column-grid"
aggregator = "mean"
compensation = 1.05
"#;
        let c = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.passthrough.len(), 1);
        assert_eq!(c.histogram.mode, GroundModeName::MidPlateau);
        assert_eq!(c.volume.estimator, Method::ColumnGrid);
        assert_eq!(c.volume.compensation.factor(), 1.05);
    }

    #[test]
    fn overrides_apply() {
        let c = PipelineConfig::from_toml_with_overrides(
            "",
            &["stages.posture=false".into(), "histogram.mode=override".into(), "histogram.override_height=0.02".into()],
        )
        .unwrap();
        assert!(!c.stages.posture);
        assert_eq!(c.histogram.ground_mode(), GroundMode::Override(0.02));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::from_toml("[histogram]\nstep = 4\n").is_err());
        assert!(PipelineConfig::from_toml("[histogram]\nmode = \"override\"\n").is_err());
        assert!(PipelineConfig::from_toml("[volume]\ncompensation = 3.0\n").is_err());
        assert!(PipelineConfig::from_toml("[downsample]\nvoxel_size = 0.0\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = PipelineConfig::default();
        c.downsample.voxel_size = Some(0.03);
        c.histogram.override_height = Some(0.1);
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
