//! Dataset layout, ingestion and synthetic scene generation.

pub mod manifest;
pub mod report;
pub mod synth;
pub mod texture;

pub use manifest::{load_dataset, manifest_path, Dataset, DatasetManifest, FrameEntry, MaskEntry};
pub use report::{write_plot_csv, write_timeline_csv};
pub use synth::{
    generate_synthetic, render_synthetic, write_scene, Activity, OcclusionInterval, PickerSchedule,
    MotionProfile, Pose, Segment, SynthConfig, SynthScene,
};
