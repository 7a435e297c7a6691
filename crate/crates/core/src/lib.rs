//! Pile volume estimation from 3D point clouds.

pub mod cloud;
pub mod denoise;
pub mod groundcal;
pub mod io;
pub mod pipeline;
pub mod pose;
pub mod spatial;
pub mod synth;
pub mod volume;

pub use cloud::{bounding_box, passthrough_filter, voxel_downsample, Aabb, Axis, AxisRange, CloudError, Point3, PointCloud};
pub use io::{load_cloud, save_cloud, CloudFormat, IoError};
pub use denoise::{hdbscan, largest_cluster, radius_outlier_filter, robust_filter, ClusterLabels, DenoiseError, HdbscanParams, RadiusFilterParams};
pub use groundcal::{
    calibrate, find_ground, height_histogram, refine_ground, smooth_histogram, GroundError, GroundEstimate, GroundMode, HeightHistogram,
};
pub use pipeline::{
    bench_reference, compression_sweep, emit_histogram, run_on_cloud, run_pipeline, run_scene, PipelineConfig, PipelineError, RunReport,
};
pub use pose::{correct_posture, ransac_plane, rotation_to_up, PlaneModel, PoseError, RansacParams, RotationMatrix};
pub use synth::{generate_scene, reference_scenes, PileShape, Scene, SceneSpec, SynthError};
pub use volume::{
    column_volume_grid, column_volume_uniform, hull3d_volume, slice_volume, Aggregator, CompensationFactor, GridSpec, Method, VolumeError,
    VolumeEstimate,
};
