//! MISO dataset assembly, divide-by-maximum normalization, and CSV I/O.
//!
//! Both corpora reduce to the same shape: rows of real-valued inputs with
//! a single real target. Normalization divides every column by its
//! maximum, which maps non-negative data into [0, 1]; negative values are
//! rejected rather than shifted, and the fitted per-column maxima travel
//! with the model so predictions reuse the training scale.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reactor::{TransientSeries, CORPUS_DROPS_PCT, CORPUS_INITIAL_POWERS_PCT};
use crate::servo::ServoSeries;

/// One training pair: input vector and scalar target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<f64>,
    pub target: f64,
}

/// A multiple-input single-output dataset with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoDataset {
    input_names: Vec<String>,
    target_name: String,
    rows: Vec<Sample>,
    normalized: bool,
}

impl MisoDataset {
    /// Builds a raw (un-normalized) dataset, checking that every row has
    /// the input arity implied by the column names and that all values
    /// are finite.
    pub fn new(input_names: Vec<String>, target_name: String, rows: Vec<Sample>) -> Result<Self> {
        if input_names.is_empty() {
            return Err(Error::InvalidInput(
                "at least one input column is required".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.inputs.len() != input_names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} inputs, expected {}",
                    row.inputs.len(),
                    input_names.len()
                )));
            }
            if !row.target.is_finite() || row.inputs.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "row {i} has a non-finite value"
                )));
            }
        }
        Ok(Self {
            input_names,
            target_name,
            rows,
            normalized: false,
        })
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input_count(&self) -> usize {
        self.input_names.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Every k-th row, starting at the first. Keeps per-series alignment
    /// for corpora whose series lengths are multiples of `step`.
    pub fn strided(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidInput("stride must be positive".into()));
        }
        Ok(Self {
            input_names: self.input_names.clone(),
            target_name: self.target_name.clone(),
            rows: self.rows.iter().step_by(step).cloned().collect(),
            normalized: self.normalized,
        })
    }
}

/// Per-column maxima fitted on a training corpus; persisted with the
/// model so new inputs are scaled identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub input_max: Vec<f64>,
    pub target_max: f64,
}

impl NormalizationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |m: &f64| m.is_finite() && *m > 0.0;
        if self.input_max.iter().all(ok) && ok(&self.target_max) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "normalization maxima must be positive and finite".into(),
            ))
        }
    }

    /// Scales one raw input vector by the fitted maxima. Values above
    /// the fitted maximum produce results above 1; see
    /// [`Self::input_exceeds_fit_range`].
    pub fn normalize_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_max.len() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, normalization spec has {}",
                raw.len(),
                self.input_max.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::UnsupportedRange(
                "inputs must be finite and non-negative".into(),
            ));
        }
        Ok(raw
            .iter()
            .zip(&self.input_max)
            .map(|(v, m)| v / m)
            .collect())
    }

    /// True when any entry lies outside the fitted column range, meaning
    /// a prediction would extrapolate.
    pub fn input_exceeds_fit_range(&self, raw: &[f64]) -> bool {
        raw.iter().zip(&self.input_max).any(|(v, m)| v > m)
    }

    /// Maps a network output on the normalized scale back to the
    /// original units.
    pub fn denormalize_output(&self, y_norm: f64) -> f64 {
        y_norm * self.target_max
    }
}

/// Scans every column and records its maximum.
///
/// Rejects datasets that are already normalized, contain negatives (the
/// divide-by-max scheme would leave [0, 1]), or contain an all-zero
/// column (no scale to divide by).
pub fn fit_normalization(ds: &MisoDataset) -> Result<NormalizationSpec> {
    if ds.normalized {
        return Err(Error::InvalidInput("dataset is already normalized".into()));
    }
    if ds.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit normalization on an empty dataset".into(),
        ));
    }
    let column_max = |name: &str, values: &mut dyn Iterator<Item = f64>| -> Result<f64> {
        let mut max = 0.0f64;
        for v in values {
            if v < 0.0 {
                return Err(Error::UnsupportedRange(format!(
                    "column '{name}' contains negative value {v}"
                )));
            }
            max = max.max(v);
        }
        if max == 0.0 {
            return Err(Error::DegenerateColumn(format!(
                "column '{name}' is all zeros"
            )));
        }
        Ok(max)
    };
    let mut input_max = Vec::with_capacity(ds.input_count());
    for (c, name) in ds.input_names.iter().enumerate() {
        input_max.push(column_max(name, &mut ds.rows.iter().map(|r| r.inputs[c]))?);
    }
    let target_max = column_max(&ds.target_name, &mut ds.rows.iter().map(|r| r.target))?;
    Ok(NormalizationSpec {
        input_max,
        target_max,
    })
}

/// Divides every column by its fitted maximum, yielding a dataset whose
/// values all lie in [0, 1].
pub fn normalize(ds: &MisoDataset, spec: &NormalizationSpec) -> Result<MisoDataset> {
    spec.validate()?;
    if ds.normalized {
        return Err(Error::InvalidInput("dataset is already normalized".into()));
    }
    if spec.input_max.len() != ds.input_count() {
        return Err(Error::ShapeMismatch(format!(
            "spec has {} input maxima, dataset has {} input columns",
            spec.input_max.len(),
            ds.input_count()
        )));
    }
    let mut rows = Vec::with_capacity(ds.len());
    for (i, row) in ds.rows.iter().enumerate() {
        let inputs: Vec<f64> = row
            .inputs
            .iter()
            .zip(&spec.input_max)
            .map(|(v, m)| v / m)
            .collect();
        let target = row.target / spec.target_max;
        if inputs
            .iter()
            .chain([&target])
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::UnsupportedRange(format!(
                "row {i} leaves [0, 1] under the given spec; was it fitted on this corpus?"
            )));
        }
        rows.push(Sample { inputs, target });
    }
    Ok(MisoDataset {
        input_names: ds.input_names.clone(),
        target_name: ds.target_name.clone(),
        rows,
        normalized: true,
    })
}

/// Flattens reactor transients into rows of
/// `[rod_fraction, t_s, initial_power_pct, drop_pct] -> power_pct`.
///
/// Each series must be tagged with one of the corpus operating points:
/// initial power in {100, 90, 80, 70} and drop in {30, 50}.
pub fn assemble_reactor_dataset(series: &[TransientSeries]) -> Result<MisoDataset> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no transient series given".into()));
    }
    let mut rows = Vec::with_capacity(series.iter().map(|s| s.samples.len()).sum());
    for s in series {
        let power = s.scenario.initial_power_pct;
        let drop = s.scenario.drop_pct;
        if !CORPUS_INITIAL_POWERS_PCT.contains(&power) {
            return Err(Error::InvalidInput(format!(
                "series tagged with initial power {power}%, expected one of {CORPUS_INITIAL_POWERS_PCT:?}"
            )));
        }
        if !CORPUS_DROPS_PCT.contains(&drop) {
            return Err(Error::InvalidInput(format!(
                "series tagged with drop {drop}%, expected one of {CORPUS_DROPS_PCT:?}"
            )));
        }
        for sample in &s.samples {
            rows.push(Sample {
                inputs: vec![sample.rod_fraction, sample.t_s, power, drop],
                target: sample.power_pct,
            });
        }
    }
    MisoDataset::new(
        ["rod_fraction", "t_s", "initial_power_pct", "drop_pct"]
            .map(String::from)
            .to_vec(),
        "power_pct".into(),
        rows,
    )
}

/// Flattens servo series into rows of
/// `[t_s, accel_ppu_s2, vel_ppu_s] -> pos_ppu`, with the instantaneous
/// profile velocity as the third input.
pub fn assemble_servo_dataset(series: &[ServoSeries]) -> Result<MisoDataset> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no servo series given".into()));
    }
    let mut rows = Vec::with_capacity(series.iter().map(|s| s.samples.len()).sum());
    for s in series {
        if !(s.acceleration_ppu_s2 > 0.0 && s.peak_velocity_ppu_s > 0.0) {
            return Err(Error::InvalidInput(
                "series missing a positive acceleration/velocity tag".into(),
            ));
        }
        for sample in &s.samples {
            rows.push(Sample {
                inputs: vec![sample.t_s, s.acceleration_ppu_s2, sample.velocity_ppu_s],
                target: sample.position_ppu,
            });
        }
    }
    MisoDataset::new(
        ["t_s", "accel_ppu_s2", "vel_ppu_s"]
            .map(String::from)
            .to_vec(),
        "pos_ppu".into(),
        rows,
    )
}

fn write_csv<W: std::io::Write>(ds: &MisoDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = ds.input_names.iter().map(String::as_str).collect();
    header.push(&ds.target_name);
    w.write_record(&header)?;
    let mut cell = String::new();
    for row in &ds.rows {
        let mut record = csv::StringRecord::new();
        for v in row.inputs.iter().chain([&row.target]) {
            cell.clear();
            write!(cell, "{v}").expect("formatting f64 cannot fail");
            record.push_field(&cell);
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dataset as CSV: header row, one data row per sample, target
/// in the last column. Values print in shortest-round-trip form, so a
/// save/load cycle preserves them exactly.
pub fn save_csv(ds: &MisoDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::from(e).with_path(path))?;
    write_csv(ds, file)
}

/// The dataset's CSV serialization as bytes, identical to what
/// [`save_csv`] writes.
pub fn csv_bytes(ds: &MisoDataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(buf)
}

/// SHA-256 of the canonical CSV bytes, as lowercase hex. Reports embed
/// this so results can be traced to the exact corpus they came from.
pub fn dataset_fingerprint(ds: &MisoDataset) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(csv_bytes(ds)?);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Reads a dataset written by [`save_csv`] (or any conforming CSV). The
/// loaded dataset is treated as raw; normalization state does not
/// survive serialization.
pub fn load_csv(path: &Path) -> Result<MisoDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::from(e).with_path(path))?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need a header with at least two columns (inputs, then target)".into(),
        });
    }
    let input_names: Vec<String> = headers
        .iter()
        .take(headers.len() - 1)
        .map(String::from)
        .collect();
    let target_name = headers[headers.len() - 1].to_string();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(rows.len() as u64 + 2);
        let mut values = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v = f64::from_str(field.trim()).map_err(|_| Error::Parse {
                line,
                message: format!("column {} is not a number: '{field}'", c + 1),
            })?;
            values.push(v);
        }
        let target = values.pop().expect("record has at least two fields");
        rows.push(Sample {
            inputs: values,
            target,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    MisoDataset::new(input_names, target_name, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactor::{generate_stepback_corpus, PointKineticsParams};
    use crate::servo::default_servo_corpus;
    use proptest::prelude::*;

    fn toy(rows: Vec<(Vec<f64>, f64)>) -> MisoDataset {
        let arity = rows[0].0.len();
        let names = (0..arity).map(|i| format!("x{i}")).collect();
        MisoDataset::new(
            names,
            "y".into(),
            rows.into_iter()
                .map(|(inputs, target)| Sample { inputs, target })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fit_records_column_maxima() {
        let ds = toy(vec![
            (vec![50.0], 1.0),
            (vec![100.0], 2.0),
            (vec![200.0], 4.0),
        ]);
        let spec = fit_normalization(&ds).unwrap();
        assert_eq!(spec.input_max, vec![200.0]);
        assert_eq!(spec.target_max, 4.0);
    }

    #[test]
    fn fit_rejects_negatives_and_zero_columns() {
        let ds = toy(vec![(vec![1.0], 1.0), (vec![-1.0], 2.0)]);
        assert!(matches!(
            fit_normalization(&ds),
            Err(Error::UnsupportedRange(_))
        ));
        let ds = toy(vec![(vec![0.0], 1.0), (vec![0.0], 2.0)]);
        assert!(matches!(
            fit_normalization(&ds),
            Err(Error::DegenerateColumn(_))
        ));
    }

    #[test]
    fn normalize_maps_into_unit_interval() {
        let ds = toy(vec![
            (vec![50.0, 3.0], 10.0),
            (vec![100.0, 1.0], 40.0),
            (vec![200.0, 2.0], 20.0),
        ]);
        let spec = fit_normalization(&ds).unwrap();
        let norm = normalize(&ds, &spec).unwrap();
        assert!(norm.is_normalized());
        let mut saw_one = 0;
        for row in norm.samples() {
            for v in row.inputs.iter().chain([&row.target]) {
                assert!((0.0..=1.0).contains(v));
                if *v == 1.0 {
                    saw_one += 1;
                }
            }
        }
        assert_eq!(saw_one, 3, "each column maximum maps to exactly 1");
        assert!((norm.samples()[0].inputs[0] - 0.25).abs() < 1e-15);
        assert!(matches!(
            normalize(&norm, &spec),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn round_trip_recovers_targets() {
        let ds = toy(vec![(vec![3.0], 7.5), (vec![9.0], 123.456)]);
        let spec = fit_normalization(&ds).unwrap();
        let norm = normalize(&ds, &spec).unwrap();
        for (raw, scaled) in ds.samples().iter().zip(norm.samples()) {
            let back = spec.denormalize_output(scaled.target);
            assert!((back - raw.target).abs() <= 1e-12 * raw.target.abs());
        }
    }

    #[test]
    fn unit_max_columns_are_fixed_points() {
        let ds = toy(vec![(vec![0.25], 0.5), (vec![1.0], 1.0)]);
        let spec = fit_normalization(&ds).unwrap();
        let norm = normalize(&ds, &spec).unwrap();
        for (a, b) in ds.samples().iter().zip(norm.samples()) {
            assert_eq!(a.inputs, b.inputs);
            assert_eq!(a.target, b.target);
        }
    }

    #[test]
    fn extrapolation_detection() {
        let spec = NormalizationSpec {
            input_max: vec![10.0, 5.0],
            target_max: 2.0,
        };
        assert!(!spec.input_exceeds_fit_range(&[10.0, 5.0]));
        assert!(spec.input_exceeds_fit_range(&[10.5, 1.0]));
        assert!(matches!(
            spec.normalize_input(&[1.0]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn reactor_dataset_layout() {
        let corpus = generate_stepback_corpus(&PointKineticsParams::default(), -30.0, 2.0).unwrap();
        let ds = assemble_reactor_dataset(&corpus).unwrap();
        assert_eq!(ds.len(), 1128);
        assert_eq!(ds.input_count(), 4);
        for row in ds.samples() {
            assert!(row.inputs[3] == 30.0 || row.inputs[3] == 50.0);
            if row.inputs[1] == 0.0 {
                assert_eq!(row.target, row.inputs[2]);
            }
        }
    }

    #[test]
    fn reactor_dataset_rejects_untagged_series() {
        let corpus = generate_stepback_corpus(&PointKineticsParams::default(), -30.0, 2.0).unwrap();
        let mut bad = corpus;
        bad[0].scenario.initial_power_pct = 85.0;
        assert!(matches!(
            assemble_reactor_dataset(&bad),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn servo_dataset_layout() {
        let corpus = default_servo_corpus().unwrap();
        let ds = assemble_servo_dataset(&corpus).unwrap();
        assert_eq!(ds.len(), 90_000);
        assert_eq!(ds.input_count(), 3);
        let first = &ds.samples()[0];
        assert_eq!(first.inputs[0], 0.0);
        assert_eq!(first.inputs[2], 0.0);
        assert_eq!(first.target, 0.0);
        for row in ds.samples() {
            assert!(row.inputs[1] == 1e6 || row.inputs[1] == 5e6);
        }
        let thin = ds.strided(20).unwrap();
        assert_eq!(thin.len(), 4500);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = toy(vec![
            (vec![0.1, 2.784782467867], 3.5086115504425494),
            (vec![1e-7, 900000.0], 0.3),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.input_names(), ds.input_names());
        assert_eq!(back.target_name(), ds.target_name());
        for (a, b) in ds.samples().iter().zip(back.samples()) {
            for (x, y) in a.inputs.iter().zip(&b.inputs) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.target.to_bits(), b.target.to_bits());
        }
    }

    #[test]
    fn ragged_row_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        let mut text = String::from("a,b,y\n");
        for _ in 0..5 {
            text.push_str("1,2,3\n");
        }
        text.push_str("1,2\n"); // line 7
        std::fs::write(&path, text).unwrap();
        match load_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_cells_and_empty_files_fail_to_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,y\n1,oops\n").unwrap();
        match load_csv(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(load_csv(&empty), Err(Error::Parse { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn csv_round_trip_any_finite_values(
            rows in proptest::collection::vec(
                (proptest::collection::vec(-1e12f64..1e12, 3), -1e12f64..1e12),
                1..20,
            )
        ) {
            let ds = toy(rows);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            save_csv(&ds, &path).unwrap();
            let back = load_csv(&path).unwrap();
            prop_assert_eq!(back.samples(), ds.samples());
        }
    }
}
