//! Fixtures shared by the benchmarks.

use pilevol_core::pipeline::config_for_scene;
use pilevol_core::{generate_scene, passthrough_filter, reference_scenes, PipelineConfig, PointCloud, Scene};

/// Reference scene `idx` with its density scaled by `density_scale`.
pub fn scene(idx: usize, density_scale: f64) -> Scene {
    let mut s = reference_scenes()[idx].clone();
    s.point_density *= density_scale;
    generate_scene(&s).expect("reference scenes are valid")
}

/// The scene cloud cut to its measurement region, as the pre-process stage sees it.
pub fn cropped(scene: &Scene) -> PointCloud {
    passthrough_filter(&scene.cloud, &scene.measurement_region())
}

pub fn config(scene: &Scene) -> PipelineConfig {
    config_for_scene(scene, &PipelineConfig::default())
}
