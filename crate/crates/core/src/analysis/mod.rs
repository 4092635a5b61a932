//! Beampatterns of per-channel FIR filters and SI-SNRi reports.

mod beampattern;
mod report;

pub use beampattern::{
    beampattern, default_doa_grid, default_freq_grid, plane_wave_delay, steering_filters, write_pgm,
    Beampattern, PATTERN_FLOOR_DB,
};
pub use report::{
    report_metrics, score_scene, AggregateMetric, MetricsReport, SceneMetric, ScoreOptions, SystemInfo,
};
