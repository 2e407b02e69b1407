//! Implementations of the subcommands.
//!
//! Every file written here is byte-for-byte reproducible for an
//! identical invocation, with one deliberate exception: the sweep's
//! `timings.json`, which records wall-clock diagnostics and says so in
//! its name. Provenance sidecars echo the effective configuration so a
//! result can be regenerated without the original config file.

use std::path::Path;

use serde::Serialize;

use opident_core::{
    assemble_reactor_dataset, assemble_servo_dataset, dataset_fingerprint, derive_run_seed,
    fit_normalization, generate_servo_corpus, integrate_point_kinetics, load_csv, normalize,
    render_report, run_sweep, save_csv, Activation, Error, MisoDataset, NetworkConfig,
    NormalizationSpec, ReportFormat, Result, StepBackScenario, SweepReport,
};

use crate::config::{FileConfig, TrainerKind};
use crate::model::ModelFile;

/// Which synthetic system `gen-data` simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum System {
    Reactor,
    Servo,
}

/// Deterministic record of how an output was produced.
#[derive(Serialize)]
struct Provenance<'a> {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_fingerprint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    effective_config: &'a FileConfig,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::from(e).with_path(path))?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_gen_data(system: System, config: &FileConfig, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let (name, dataset) = match system {
        System::Reactor => ("reactor", build_reactor_dataset(config)?),
        System::Servo => ("servo", build_servo_dataset(config)?),
    };
    let csv_path = out_dir.join(format!("{name}.csv"));
    save_csv(&dataset, &csv_path)?;
    let fingerprint = dataset_fingerprint(&dataset)?;
    write_json(
        &out_dir.join(format!("{name}.provenance.json")),
        &Provenance {
            command: "gen-data",
            dataset: Some(csv_path.display().to_string()),
            dataset_fingerprint: Some(fingerprint),
            seed: None,
            effective_config: config,
        },
    )?;
    println!("wrote {} ({} rows)", csv_path.display(), dataset.len());
    Ok(())
}

fn build_reactor_dataset(config: &FileConfig) -> Result<MisoDataset> {
    let section = &config.reactor;
    section.validate()?;
    let kinetics = section.kinetics();
    let mut corpus = Vec::new();
    for &power in &section.initial_powers_pct {
        for &drop in &section.drops_pct {
            let scenario = StepBackScenario {
                total_rod_worth_mk: section.total_rod_worth_mk,
                drop_duration_s: section.drop_duration_s,
                ..StepBackScenario::new(power, drop)
            };
            corpus.push(integrate_point_kinetics(&kinetics, &scenario)?);
        }
    }
    assemble_reactor_dataset(&corpus)
}

fn build_servo_dataset(config: &FileConfig) -> Result<MisoDataset> {
    let section = &config.servo;
    let corpus = generate_servo_corpus(
        &section.velocities_ppu_s,
        &section.accelerations_ppu_s2,
        section.target_position_ppu,
    )?;
    assemble_servo_dataset(&corpus)
}

/// Loads a raw CSV corpus, fits normalization on it, and returns the
/// normalized copy alongside the fitted maxima.
fn load_normalized(path: &Path) -> Result<(MisoDataset, MisoDataset, NormalizationSpec)> {
    let raw = load_csv(path)?;
    let spec = fit_normalization(&raw)?;
    let normalized = normalize(&raw, &spec)?;
    Ok((raw, normalized, spec))
}

/// Training summary persisted next to the model. The weights live in
/// `model.json`; this holds the scalar history.
#[derive(Serialize)]
struct TrainSummary<'a> {
    trainer: &'static str,
    seed: u64,
    epochs_run: usize,
    final_rmse: f64,
    epoch_losses: &'a [f64],
}

pub fn cmd_train(
    dataset_path: &Path,
    config: &FileConfig,
    seed: u64,
    trainer_flag: Option<TrainerKind>,
    out_dir: &Path,
) -> Result<()> {
    let (raw, normalized, norm_spec) = load_normalized(dataset_path)?;
    let layers = config.network.layers()?;
    let net_config = NetworkConfig::single_output(raw.input_count(), layers, Activation::Linear);
    let trainer = config.trainer.choice(trainer_flag);
    trainer.validate()?;

    let result = trainer.train(&net_config, &normalized, seed)?;

    ensure_dir(out_dir)?;
    let model = ModelFile {
        input_names: raw.input_names().to_vec(),
        target_name: raw.target_name().to_string(),
        normalization: norm_spec,
        network: result.network.clone(),
    };
    model.save(&out_dir.join("model.json"))?;
    write_json(
        &out_dir.join("result.json"),
        &TrainSummary {
            trainer: trainer.label(),
            seed: result.seed,
            epochs_run: result.epochs_run,
            final_rmse: result.final_rmse,
            epoch_losses: &result.epoch_losses,
        },
    )?;
    write_json(
        &out_dir.join("train.provenance.json"),
        &Provenance {
            command: "train",
            dataset: Some(dataset_path.display().to_string()),
            dataset_fingerprint: Some(dataset_fingerprint(&raw)?),
            seed: Some(seed),
            effective_config: config,
        },
    )?;
    println!(
        "trained with {} in {} epochs, rmse {:.6e} (normalized scale)",
        trainer.label(),
        result.epochs_run,
        result.final_rmse
    );
    println!("wrote {}", out_dir.join("model.json").display());
    Ok(())
}

/// Wall-clock diagnostics for one sweep. Not reproducible between runs,
/// hence kept out of `report.json`.
#[derive(Serialize)]
struct Timings {
    workers: usize,
    total_wall_s: f64,
    config_wall_s: Vec<f64>,
}

pub fn cmd_sweep(config: &FileConfig, seed: u64, args: &crate::SweepArgs) -> Result<()> {
    let dataset_path = args.dataset.as_path();
    let out_dir = args.out.as_path();
    let (raw, normalized, norm_spec) = load_normalized(dataset_path)?;
    let trainer = config.trainer.choice(args.trainer);
    let spec = config.sweep.to_spec(trainer, seed, args.runs);
    let workers = args.workers.unwrap_or_else(default_workers);

    let report = run_sweep(&spec, &normalized, workers)?;

    ensure_dir(out_dir)?;
    std::fs::write(
        out_dir.join("report.csv"),
        render_report(&report, ReportFormat::Csv),
    )?;
    write_json(&out_dir.join("report.json"), &report)?;
    write_json(
        &out_dir.join("timings.json"),
        &Timings {
            workers,
            total_wall_s: report.config_wall_s.iter().sum(),
            config_wall_s: report.config_wall_s.clone(),
        },
    )?;

    // Retrain the winning configuration with the seed of its best run
    // and persist that network as the sweep's model artifact.
    let best = report.best();
    let (best_run, _) = best
        .run_rmses
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("selected config has at least one successful run");
    let best_seed = derive_run_seed(spec.master_seed, best.index, best_run);
    let best_net_config = best.config.network_config(raw.input_count())?;
    let best_result = spec
        .trainer
        .train(&best_net_config, &normalized, best_seed)?;
    let model = ModelFile {
        input_names: raw.input_names().to_vec(),
        target_name: raw.target_name().to_string(),
        normalization: norm_spec,
        network: best_result.network.clone(),
    };
    model.save(&out_dir.join("best_model.json"))?;

    write_json(
        &out_dir.join("sweep.provenance.json"),
        &Provenance {
            command: "sweep",
            dataset: Some(dataset_path.display().to_string()),
            dataset_fingerprint: Some(report.dataset_fingerprint.clone()),
            seed: Some(seed),
            effective_config: config,
        },
    )?;

    print!("{}", render_report(&report, args.format.into()));
    println!(
        "best: {} layer(s) x {} neurons ({}), mean rmse {:.6e} over {} runs",
        best.config.layer_count(),
        best.config.neurons_per_layer,
        best.config.label(),
        best.mean_rmse,
        best.successful_runs()
    );
    println!("wrote {}", out_dir.join("report.csv").display());
    Ok(())
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(std::num::NonZeroUsize::get)
        .unwrap_or(1)
}

fn parse_input_row(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("could not parse input value '{part}'")))
        })
        .collect()
}

const EXTRAPOLATION_WARNING: &str =
    "warning: input outside the training range; the prediction extrapolates";

pub fn cmd_predict(
    model_path: &Path,
    input: Option<&str>,
    data: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let model = ModelFile::load(model_path)?;
    match (input, data) {
        (Some(row), None) => {
            let raw = parse_input_row(row)?;
            let (value, extrapolating) = model.predict_raw(&raw)?;
            if extrapolating {
                eprintln!("{EXTRAPOLATION_WARNING}");
            }
            println!("{value}");
            Ok(())
        }
        (None, Some(data_path)) => predict_csv(&model, data_path, out),
        _ => Err(Error::InvalidInput(
            "provide exactly one of --input or --data".into(),
        )),
    }
}

fn predict_csv(model: &ModelFile, data_path: &Path, out: Option<&Path>) -> Result<()> {
    let ds = load_csv(data_path)?;
    if ds.input_names() != model.input_names.as_slice() {
        return Err(Error::InvalidInput(format!(
            "data columns ({}) do not match the model inputs ({})",
            ds.input_names().join(", "),
            model.input_names.join(", ")
        )));
    }
    let mut predictions = Vec::with_capacity(ds.len());
    let mut extrapolated = 0usize;
    for sample in ds.samples() {
        let (value, extrapolating) = model.predict_raw(&sample.inputs)?;
        if extrapolating {
            extrapolated += 1;
        }
        predictions.push(value);
    }
    if extrapolated > 0 {
        eprintln!(
            "{EXTRAPOLATION_WARNING} ({extrapolated} of {} rows)",
            ds.len()
        );
    }
    match out {
        Some(path) => {
            let mut writer = csv::Writer::from_path(path)?;
            let mut header: Vec<&str> = model.input_names.iter().map(String::as_str).collect();
            header.push("prediction");
            writer.write_record(&header)?;
            for (sample, value) in ds.samples().iter().zip(&predictions) {
                let mut record: Vec<String> =
                    sample.inputs.iter().map(|v| format!("{v}")).collect();
                record.push(format!("{value}"));
                writer.write_record(&record)?;
            }
            writer.flush()?;
            println!("wrote {} ({} rows)", path.display(), predictions.len());
        }
        None => {
            for value in &predictions {
                println!("{value}");
            }
        }
    }
    Ok(())
}

pub fn cmd_report(report_path: &Path, format: ReportFormat) -> Result<()> {
    let text =
        std::fs::read_to_string(report_path).map_err(|e| Error::from(e).with_path(report_path))?;
    let report: SweepReport = serde_json::from_str(&text)?;
    print!("{}", render_report(&report, format));
    Ok(())
}
