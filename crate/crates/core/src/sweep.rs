//! Architecture sweep: enumerate configurations, train each one many
//! times with derived seeds, and aggregate per-run RMSEs into a report.
//!
//! The default grid is 1 or 2 hidden layers x {5, 10, 15, 20, 25}
//! neurons x per-layer tansig/logsig choices, 30 configurations in all,
//! each trained 20 times. Every run's seed is derived from (master seed,
//! config index, run index), so results do not depend on scheduling and
//! a report is reproducible byte-for-byte at any worker count.
//!
//! Networks in the sweep use a linear output neuron; the sigmoid
//! nonlinearities live in the hidden layers. RMSE is measured on the
//! full (normalized) training set, i.e. fit performance.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::dataset::{dataset_fingerprint, MisoDataset};
use crate::error::{Error, Result};
use crate::network::{LayerSpec, NetworkConfig};
use crate::train::{
    mix_seed, train_levenberg_marquardt, train_momentum, LmHyperParams, MomentumHyperParams,
    TrainResult,
};

/// Master seed used when the caller does not supply one.
pub const DEFAULT_MASTER_SEED: u64 = 42;

/// Two configs whose mean RMSEs differ by no more than this are treated
/// as tied and separated by the secondary criteria.
pub const MEAN_TIE_TOLERANCE: f64 = 1e-6;

/// One point on the sweep grid: hidden-layer count (via the activation
/// list), a shared neuron count for every hidden layer, and the
/// activation of each hidden layer in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub neurons_per_layer: usize,
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(neurons_per_layer: usize, activations: Vec<Activation>) -> Self {
        Self {
            neurons_per_layer,
            activations,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.activations.len()
    }

    /// Activations joined with '/', e.g. "tansig/logsig".
    pub fn label(&self) -> String {
        self.activations
            .iter()
            .map(|a| a.label())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons_per_layer == 0 {
            return Err(Error::InvalidConfig(
                "architecture needs at least one neuron per layer".into(),
            ));
        }
        if !(1..=2).contains(&self.layer_count()) {
            return Err(Error::InvalidConfig(format!(
                "report schema covers 1 or 2 hidden layers, got {}",
                self.layer_count()
            )));
        }
        if self.activations.contains(&Activation::Linear) {
            return Err(Error::InvalidConfig(
                "hidden layers must use a sigmoid activation".into(),
            ));
        }
        Ok(())
    }

    /// The single-output network this architecture describes for a
    /// dataset with `input_count` inputs.
    pub fn network_config(&self, input_count: usize) -> Result<NetworkConfig> {
        self.validate()?;
        let hidden = self
            .activations
            .iter()
            .map(|a| LayerSpec::new(self.neurons_per_layer, *a))
            .collect();
        let config = NetworkConfig::single_output(input_count, hidden, Activation::Linear);
        config.validate()?;
        Ok(config)
    }

    pub fn total_weights(&self, input_count: usize) -> Result<usize> {
        Ok(self.network_config(input_count)?.weight_count())
    }
}

/// Which trainer the sweep runs, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainerChoice {
    Momentum(MomentumHyperParams),
    Lm(LmHyperParams),
}

impl TrainerChoice {
    pub fn label(&self) -> &'static str {
        match self {
            TrainerChoice::Momentum(_) => "momentum",
            TrainerChoice::Lm(_) => "lm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrainerChoice::Momentum(p) => p.validate(),
            TrainerChoice::Lm(p) => p.validate(),
        }
    }

    pub fn train(
        &self,
        config: &NetworkConfig,
        dataset: &MisoDataset,
        seed: u64,
    ) -> Result<TrainResult> {
        match self {
            TrainerChoice::Momentum(p) => train_momentum(config, dataset, p, seed),
            TrainerChoice::Lm(p) => train_levenberg_marquardt(config, dataset, p, seed),
        }
    }
}

impl Default for TrainerChoice {
    /// LM capped at 50 epochs: on the synthetic corpora it converges or
    /// stalls well before that, and 600 sweep runs stay affordable.
    fn default() -> Self {
        TrainerChoice::Lm(LmHyperParams {
            max_epochs: 50,
            ..LmHyperParams::default()
        })
    }
}

/// The full sweep definition. `Default` reproduces the 30-config grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub layer_counts: Vec<usize>,
    pub neuron_counts: Vec<usize>,
    pub activations: Vec<Activation>,
    pub runs_per_config: usize,
    pub trainer: TrainerChoice,
    pub master_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            layer_counts: vec![1, 2],
            neuron_counts: vec![5, 10, 15, 20, 25],
            activations: vec![Activation::Tansig, Activation::Logsig],
            runs_per_config: 20,
            trainer: TrainerChoice::default(),
            master_seed: DEFAULT_MASTER_SEED,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let unique = |name: &str, n: usize, distinct: usize| -> Result<()> {
            if n == 0 {
                Err(Error::InvalidConfig(format!("{name} must not be empty")))
            } else if distinct != n {
                Err(Error::InvalidConfig(format!("{name} has duplicates")))
            } else {
                Ok(())
            }
        };
        let distinct = |xs: &[usize]| {
            let mut s = xs.to_vec();
            s.sort_unstable();
            s.dedup();
            s.len()
        };
        unique(
            "layer_counts",
            self.layer_counts.len(),
            distinct(&self.layer_counts),
        )?;
        unique(
            "neuron_counts",
            self.neuron_counts.len(),
            distinct(&self.neuron_counts),
        )?;
        if self.layer_counts.iter().any(|l| !(1..=2).contains(l)) {
            return Err(Error::InvalidConfig(
                "layer_counts entries must be 1 or 2".into(),
            ));
        }
        if self.neuron_counts.contains(&0) {
            return Err(Error::InvalidConfig(
                "neuron_counts entries must be positive".into(),
            ));
        }
        if self.activations.is_empty() {
            return Err(Error::InvalidConfig("activations must not be empty".into()));
        }
        let mut seen = Vec::new();
        for a in &self.activations {
            if *a == Activation::Linear {
                return Err(Error::InvalidConfig(
                    "hidden-layer activation choices must be sigmoids".into(),
                ));
            }
            if seen.contains(a) {
                return Err(Error::InvalidConfig("activations has duplicates".into()));
            }
            seen.push(*a);
        }
        if self.runs_per_config == 0 {
            return Err(Error::InvalidConfig(
                "runs_per_config must be at least 1".into(),
            ));
        }
        self.trainer.validate()
    }

    pub fn config_count(&self) -> usize {
        self.layer_counts
            .iter()
            .map(|l| self.neuron_counts.len() * self.activations.len().pow(*l as u32))
            .sum()
    }
}

/// All per-layer activation assignments, first layer varying slowest:
/// for [tansig, logsig] and two layers this yields tt, tl, lt, ll.
fn activation_combos(choices: &[Activation], layers: usize) -> Vec<Vec<Activation>> {
    let mut combos: Vec<Vec<Activation>> = vec![Vec::new()];
    for _ in 0..layers {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |a| {
                    let mut c = prefix.clone();
                    c.push(*a);
                    c
                })
            })
            .collect();
    }
    combos
}

/// Expands a [`SweepSpec`] into its configurations in reporting order:
/// layer counts ascending, then neuron counts ascending, then
/// activation combinations in the order of the `activations` field.
pub fn enumerate_configs(spec: &SweepSpec) -> Result<Vec<Architecture>> {
    spec.validate()?;
    let mut layer_counts = spec.layer_counts.clone();
    layer_counts.sort_unstable();
    let mut neuron_counts = spec.neuron_counts.clone();
    neuron_counts.sort_unstable();
    let mut configs = Vec::with_capacity(spec.config_count());
    for &layers in &layer_counts {
        for &neurons in &neuron_counts {
            for combo in activation_combos(&spec.activations, layers) {
                configs.push(Architecture::new(neurons, combo));
            }
        }
    }
    Ok(configs)
}

/// Seed for one run: the master seed mixed with the config index, then
/// with the run index. Purely positional, so any execution order and
/// any worker count see the same seeds.
pub fn derive_run_seed(master_seed: u64, config_index: usize, run_index: usize) -> u64 {
    mix_seed(mix_seed(master_seed, config_index as u64), run_index as u64)
}

/// Aggregated outcome of training one architecture `runs` times.
///
/// `run_rmses` has one slot per run in run order; `None` marks a run
/// that ended in numerical failure and is excluded from the statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config: Architecture,
    pub index: usize,
    pub total_weights: usize,
    pub run_rmses: Vec<Option<f64>>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub failed_runs: usize,
    pub unstable: bool,
    pub single_run: bool,
}

impl ConfigResult {
    /// Aggregates raw per-run outcomes. More than 25% failures marks the
    /// config unstable; a lone successful run gets std 0 by convention
    /// and the `single_run` flag.
    pub fn from_outcomes(
        config: Architecture,
        index: usize,
        total_weights: usize,
        run_rmses: Vec<Option<f64>>,
    ) -> Self {
        let (successes, mean, std) = mean_and_sample_std(run_rmses.iter().flatten().copied());
        let failed_runs = run_rmses.len() - successes;
        let unstable = failed_runs * 4 > run_rmses.len();
        Self {
            config,
            index,
            total_weights,
            run_rmses,
            mean_rmse: mean,
            std_rmse: std,
            failed_runs,
            unstable,
            single_run: successes == 1,
        }
    }

    /// Builds a result from summary statistics by synthesizing a run
    /// list with exactly that mean and sample standard deviation, for
    /// replaying published tables through the selection rule.
    pub fn from_stats(
        config: Architecture,
        index: usize,
        input_count: usize,
        mean: f64,
        std: f64,
        runs: usize,
    ) -> Result<Self> {
        if runs == 0 {
            return Err(Error::InvalidConfig("need at least one run".into()));
        }
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::InvalidConfig(
                "summary statistics must be finite with std >= 0".into(),
            ));
        }
        let total_weights = config.total_weights(input_count)?;
        // Pairs mean+d, mean-d reproduce the mean exactly; d is scaled so
        // the n-1 sample deviation comes out to `std` (for odd n one run
        // sits at the mean, which makes d = std itself).
        let n = runs as f64;
        let d = if runs.is_multiple_of(2) {
            std * ((n - 1.0) / n).sqrt()
        } else {
            std
        };
        let mut run_rmses = Vec::with_capacity(runs);
        if runs % 2 == 1 {
            run_rmses.push(Some(mean));
        }
        while run_rmses.len() < runs {
            run_rmses.push(Some(mean + d));
            run_rmses.push(Some(mean - d));
        }
        Ok(Self::from_outcomes(config, index, total_weights, run_rmses))
    }

    pub fn successful_runs(&self) -> usize {
        self.run_rmses.len() - self.failed_runs
    }
}

/// Streaming (Welford) mean and n-1 standard deviation. Returns the
/// count alongside; empty input gives NaN statistics, a single value
/// gives std 0.
fn mean_and_sample_std(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let mut n = 0usize;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    match n {
        0 => (0, f64::NAN, f64::NAN),
        1 => (1, mean, 0.0),
        _ => (n, mean, (m2 / (n - 1) as f64).sqrt()),
    }
}

/// Trains one architecture `runs` times with seeds derived from
/// (master_seed, config_index, run index) and aggregates the RMSEs.
///
/// A run that fails numerically is recorded and excluded from the
/// statistics; any other training error aborts the whole call.
pub fn run_config(
    config: &Architecture,
    config_index: usize,
    dataset: &MisoDataset,
    trainer: &TrainerChoice,
    runs: usize,
    master_seed: u64,
) -> Result<ConfigResult> {
    trainer.validate()?;
    if runs == 0 {
        return Err(Error::InvalidConfig("need at least one run".into()));
    }
    if !dataset.is_normalized() {
        return Err(Error::InvalidInput(
            "sweep expects a normalized dataset; fit and apply normalization first".into(),
        ));
    }
    let net_config = config.network_config(dataset.input_count())?;
    let run_rmses: Vec<Option<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = derive_run_seed(master_seed, config_index, r);
            match trainer.train(&net_config, dataset, seed) {
                Ok(result) => Ok(Some(result.final_rmse)),
                Err(Error::NumericalFailure(_)) => Ok(None),
                Err(other) => Err(other),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConfigResult::from_outcomes(
        config.clone(),
        config_index,
        net_config.weight_count(),
        run_rmses,
    ))
}

/// Picks the best config: lowest mean RMSE, with ties (within
/// [`MEAN_TIE_TOLERANCE`]) broken by lower std, then fewer weights,
/// then enumeration order. Unstable configs are not eligible; if none
/// are eligible the sweep has no valid result.
pub fn select_best(results: &[ConfigResult]) -> Result<usize> {
    let eligible = |r: &&ConfigResult| !r.unstable && r.successful_runs() > 0;
    let min_mean = results
        .iter()
        .filter(eligible)
        .map(|r| r.mean_rmse)
        .fold(f64::INFINITY, f64::min);
    if !min_mean.is_finite() {
        return Err(Error::NoValidConfig(
            "every configuration was unstable or had no successful runs".into(),
        ));
    }
    let mut best: Option<(usize, &ConfigResult)> = None;
    for (pos, r) in results.iter().enumerate() {
        if !eligible(&r) || r.mean_rmse > min_mean + MEAN_TIE_TOLERANCE {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) => {
                let key = |c: &ConfigResult| (c.std_rmse, c.total_weights, c.index);
                key(r) < key(b)
            }
        };
        if better {
            best = Some((pos, r));
        }
    }
    Ok(best.expect("at least one eligible result exists").0)
}

/// Everything a sweep produced. Wall-clock timings are diagnostics
/// only: they are excluded from serialization so persisted reports stay
/// reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub dataset_fingerprint: String,
    pub results: Vec<ConfigResult>,
    pub best_index: usize,
    #[serde(skip)]
    pub config_wall_s: Vec<f64>,
}

impl SweepReport {
    pub fn best(&self) -> &ConfigResult {
        &self.results[self.best_index]
    }

    pub fn master_seed(&self) -> u64 {
        self.spec.master_seed
    }

    /// Finds a result by shape, e.g. to compare specific grid points.
    pub fn result_for(&self, layers: usize, neurons: usize, label: &str) -> Option<&ConfigResult> {
        self.results.iter().find(|r| {
            r.config.layer_count() == layers
                && r.config.neurons_per_layer == neurons
                && r.config.label() == label
        })
    }
}

/// Runs the whole sweep on `workers` threads. Every run's seed is fixed
/// by its position, so the report (and its rendered CSV) is identical
/// for any worker count.
pub fn run_sweep(spec: &SweepSpec, dataset: &MisoDataset, workers: usize) -> Result<SweepReport> {
    spec.validate()?;
    if workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    let configs = enumerate_configs(spec)?;
    let fingerprint = dataset_fingerprint(dataset)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    let timed: Vec<(ConfigResult, f64)> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, config)| {
                let start = Instant::now();
                let result = run_config(
                    config,
                    i,
                    dataset,
                    &spec.trainer,
                    spec.runs_per_config,
                    spec.master_seed,
                )?;
                Ok((result, start.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (results, config_wall_s): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    let best_index = select_best(&results)?;
    Ok(SweepReport {
        spec: spec.clone(),
        dataset_fingerprint: fingerprint,
        results,
        best_index,
        config_wall_s,
    })
}

/// Output style for [`render_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// Machine-readable, full-precision values (round-trip exact).
    Csv,
    /// Human-readable table with publication-style number formatting.
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown report format '{other}' (expected csv or table)"),
            }),
        }
    }
}

/// Mixed table style: scientific with a 2-decimal mantissa below 1e-3,
/// plain 4-decimal otherwise.
fn table_style(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs();
    if magnitude > 0.0 && magnitude < 1e-3 {
        let mut exp = magnitude.log10().floor() as i32;
        let mut mantissa = v / 10f64.powi(exp);
        if mantissa.abs() >= 9.995 {
            mantissa /= 10.0;
            exp += 1;
        }
        format!("{mantissa:.2}e{exp:+03}")
    } else {
        format!("{v:.4}")
    }
}

/// Renders a report. The CSV variant prints values in shortest
/// round-trip form so reloading loses nothing; the table variant uses
/// the mixed human-readable style and marks the best row with '*'.
pub fn render_report(report: &SweepReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Table => render_table(report),
    }
}

fn activation_columns(config: &Architecture) -> (String, String) {
    let act1 = config.activations[0].label().to_string();
    let act2 = config
        .activations
        .get(1)
        .map(|a| a.label().to_string())
        .unwrap_or_default();
    (act1, act2)
}

fn render_csv(report: &SweepReport) -> String {
    let mut out = String::from("layers,neurons,act1,act2,mean_rmse,std_rmse,failed_runs,is_best\n");
    for (pos, r) in report.results.iter().enumerate() {
        let (act1, act2) = activation_columns(&r.config);
        let is_best = pos == report.best_index;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.config.layer_count(),
            r.config.neurons_per_layer,
            act1,
            act2,
            r.mean_rmse,
            r.std_rmse,
            r.failed_runs,
            is_best
        ));
    }
    out
}

fn render_table(report: &SweepReport) -> String {
    let header = [
        "layers",
        "neurons",
        "activations",
        "mean_rmse",
        "std_rmse",
        "failed",
        "best",
    ];
    let mut rows: Vec<[String; 7]> = Vec::with_capacity(report.results.len());
    for (pos, r) in report.results.iter().enumerate() {
        rows.push([
            r.config.layer_count().to_string(),
            r.config.neurons_per_layer.to_string(),
            r.config.label(),
            table_style(r.mean_rmse),
            table_style(r.std_rmse),
            r.failed_runs.to_string(),
            if pos == report.best_index {
                "*".into()
            } else {
                String::new()
            },
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        let line: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    emit(&mut out, &header.map(String::from));
    emit(
        &mut out,
        &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>(),
    );
    for row in &rows {
        emit(&mut out, row);
    }
    out
}
