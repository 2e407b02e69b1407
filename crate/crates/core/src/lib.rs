//! Model identification toolkit: scratch-built feed-forward networks,
//! gradient and Levenberg-Marquardt trainers, synthetic plant data
//! generators, and an architecture sweep harness.

pub mod activation;
pub mod dataset;
pub mod error;
pub mod network;
pub mod reactor;
pub mod servo;
pub mod sweep;
pub mod train;

pub use activation::Activation;
pub use dataset::{
    assemble_reactor_dataset, assemble_servo_dataset, csv_bytes, dataset_fingerprint,
    fit_normalization, load_csv, normalize, save_csv, MisoDataset, NormalizationSpec, Sample,
};
pub use error::{Error, Result};
pub use network::{ForwardTrace, LayerSpec, Network, NetworkConfig, WeightMatrix};
pub use reactor::{
    generate_stepback_corpus, integrate_point_kinetics, PointKineticsParams, StepBackScenario,
    TransientSeries,
};
pub use servo::{generate_servo_corpus, MotionProfile, ServoSeries};
pub use sweep::{
    derive_run_seed, enumerate_configs, render_report, run_config, run_sweep, select_best,
    Architecture, ConfigResult, ReportFormat, SweepReport, SweepSpec, TrainerChoice,
    DEFAULT_MASTER_SEED,
};
pub use train::{
    mix_seed, rmse, train_levenberg_marquardt, train_momentum, LmHyperParams, MomentumHyperParams,
    TrainResult,
};
