//! TOML run configuration.
//!
//! Every field has a default, so commands run with no config file at
//! all; a file only overrides what it mentions. Unknown keys are
//! rejected everywhere. Flags override file values, and the merged
//! result is echoed into each output's provenance sidecar.

use std::path::Path;

use serde::{Deserialize, Serialize};

use opident_core::reactor::{CORPUS_DROPS_PCT, CORPUS_INITIAL_POWERS_PCT};
use opident_core::servo::{
    DEFAULT_ACCELERATIONS_PPU_S2, DEFAULT_TARGET_POSITION_PPU, DEFAULT_VELOCITIES_PPU_S,
};
use opident_core::{
    Activation, Error, LayerSpec, LmHyperParams, MomentumHyperParams, PointKineticsParams, Result,
    SweepSpec, TrainerChoice, DEFAULT_MASTER_SEED,
};

/// Root of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    /// Seed used when no `--seed` flag is given.
    pub master_seed: Option<u64>,
    pub reactor: ReactorSection,
    pub servo: ServoSection,
    pub network: NetworkSection,
    pub trainer: TrainerSection,
    pub sweep: SweepSection,
}

impl FileConfig {
    /// Loads a config file, or the all-defaults config when `path` is
    /// `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).with_path(path))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("config {}: {e}", path.display())))
    }
}

/// Seed precedence: `--seed` flag, then the config file, then the
/// `OPIDENT_SEED` environment variable, then the built-in default.
pub fn resolve_seed(flag: Option<u64>, config: &FileConfig) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = config.master_seed {
        return Ok(seed);
    }
    match std::env::var("OPIDENT_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            Error::InvalidConfig(format!(
                "OPIDENT_SEED must be an unsigned integer, got '{text}'"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MASTER_SEED),
        Err(e) => Err(Error::InvalidConfig(format!("OPIDENT_SEED: {e}"))),
    }
}

/// Reactor corpus generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactorSection {
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub generation_time_s: f64,
    pub total_rod_worth_mk: f64,
    pub drop_duration_s: f64,
    /// Operating points to simulate; must be drawn from the corpus grid.
    pub initial_powers_pct: Vec<f64>,
    pub drops_pct: Vec<f64>,
}

impl Default for ReactorSection {
    fn default() -> Self {
        let kinetics = PointKineticsParams::default();
        Self {
            betas: kinetics.betas,
            lambdas: kinetics.lambdas,
            generation_time_s: kinetics.generation_time_s,
            total_rod_worth_mk: -30.0,
            drop_duration_s: 2.0,
            initial_powers_pct: CORPUS_INITIAL_POWERS_PCT.to_vec(),
            drops_pct: CORPUS_DROPS_PCT.to_vec(),
        }
    }
}

impl ReactorSection {
    pub fn kinetics(&self) -> PointKineticsParams {
        PointKineticsParams {
            betas: self.betas.clone(),
            lambdas: self.lambdas.clone(),
            generation_time_s: self.generation_time_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_powers_pct.is_empty() || self.drops_pct.is_empty() {
            return Err(Error::InvalidConfig(
                "reactor.initial_powers_pct and reactor.drops_pct must not be empty".into(),
            ));
        }
        for p in &self.initial_powers_pct {
            if !CORPUS_INITIAL_POWERS_PCT.contains(p) {
                return Err(Error::InvalidConfig(format!(
                    "reactor.initial_powers_pct entry {p} must be one of {CORPUS_INITIAL_POWERS_PCT:?}"
                )));
            }
        }
        for d in &self.drops_pct {
            if !CORPUS_DROPS_PCT.contains(d) {
                return Err(Error::InvalidConfig(format!(
                    "reactor.drops_pct entry {d} must be one of {CORPUS_DROPS_PCT:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Servo corpus generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServoSection {
    pub velocities_ppu_s: Vec<f64>,
    pub accelerations_ppu_s2: Vec<f64>,
    pub target_position_ppu: f64,
}

impl Default for ServoSection {
    fn default() -> Self {
        Self {
            velocities_ppu_s: DEFAULT_VELOCITIES_PPU_S.to_vec(),
            accelerations_ppu_s2: DEFAULT_ACCELERATIONS_PPU_S2.to_vec(),
            target_position_ppu: DEFAULT_TARGET_POSITION_PPU,
        }
    }
}

/// Architecture for single-network training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// Neurons in each hidden layer, in order.
    pub neurons: Vec<usize>,
    /// Activation of each hidden layer; the output neuron is linear.
    pub activations: Vec<Activation>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            neurons: vec![15],
            activations: vec![Activation::Tansig],
        }
    }
}

impl NetworkSection {
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        if self.neurons.is_empty() || self.neurons.len() != self.activations.len() {
            return Err(Error::InvalidConfig(format!(
                "network.neurons ({}) and network.activations ({}) must be non-empty and equal length",
                self.neurons.len(),
                self.activations.len()
            )));
        }
        Ok(self
            .neurons
            .iter()
            .zip(&self.activations)
            .map(|(n, a)| LayerSpec::new(*n, *a))
            .collect())
    }
}

/// Trainer name, usable as both a config value and a `--trainer` flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Momentum,
    #[default]
    Lm,
}

/// The LM defaults used when the config file does not say otherwise
/// (the 50-epoch sweep setup).
fn base_lm() -> LmHyperParams {
    match TrainerChoice::default() {
        TrainerChoice::Lm(p) => p,
        TrainerChoice::Momentum(_) => unreachable!("default trainer is LM"),
    }
}

/// Momentum hyperparameters; unset fields fall back to the library
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentumSection {
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub max_epochs: Option<usize>,
    pub loss_tolerance: Option<f64>,
}

impl MomentumSection {
    pub fn resolve(&self) -> MomentumHyperParams {
        let base = MomentumHyperParams::default();
        MomentumHyperParams {
            eta: self.eta.unwrap_or(base.eta),
            alpha: self.alpha.unwrap_or(base.alpha),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            loss_tolerance: self.loss_tolerance.unwrap_or(base.loss_tolerance),
        }
    }
}

/// LM hyperparameters; unset fields fall back to the sweep defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub lambda0: Option<f64>,
    pub lambda_increase: Option<f64>,
    pub lambda_decrease: Option<f64>,
    pub max_epochs: Option<usize>,
    pub loss_tolerance: Option<f64>,
    pub max_lambda: Option<f64>,
}

impl LmSection {
    pub fn resolve(&self) -> LmHyperParams {
        let base = base_lm();
        LmHyperParams {
            lambda0: self.lambda0.unwrap_or(base.lambda0),
            lambda_increase: self.lambda_increase.unwrap_or(base.lambda_increase),
            lambda_decrease: self.lambda_decrease.unwrap_or(base.lambda_decrease),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            loss_tolerance: self.loss_tolerance.unwrap_or(base.loss_tolerance),
            max_lambda: self.max_lambda.unwrap_or(base.max_lambda),
        }
    }
}

/// Trainer choice plus per-trainer hyperparameter overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerSection {
    pub kind: TrainerKind,
    pub momentum: MomentumSection,
    pub lm: LmSection,
}

impl TrainerSection {
    /// Builds the trainer, honoring a `--trainer` flag override.
    pub fn choice(&self, kind_override: Option<TrainerKind>) -> TrainerChoice {
        match kind_override.unwrap_or(self.kind) {
            TrainerKind::Momentum => TrainerChoice::Momentum(self.momentum.resolve()),
            TrainerKind::Lm => TrainerChoice::Lm(self.lm.resolve()),
        }
    }
}

/// Sweep grid settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub layer_counts: Vec<usize>,
    pub neuron_counts: Vec<usize>,
    pub activations: Vec<Activation>,
    pub runs_per_config: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        let spec = SweepSpec::default();
        Self {
            layer_counts: spec.layer_counts,
            neuron_counts: spec.neuron_counts,
            activations: spec.activations,
            runs_per_config: spec.runs_per_config,
        }
    }
}

impl SweepSection {
    pub fn to_spec(
        &self,
        trainer: TrainerChoice,
        master_seed: u64,
        runs_override: Option<usize>,
    ) -> SweepSpec {
        SweepSpec {
            layer_counts: self.layer_counts.clone(),
            neuron_counts: self.neuron_counts.clone(),
            activations: self.activations.clone(),
            runs_per_config: runs_override.unwrap_or(self.runs_per_config),
            trainer,
            master_seed,
        }
    }
}
