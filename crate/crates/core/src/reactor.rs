//! Synthetic reactor step-back transients from point kinetics.
//!
//! Integrates the standard point-kinetics equations with delayed-neutron
//! precursor groups,
//!
//! ```text
//! dP/dt   = ((rho(t) - beta) / Lambda) P + sum_g lambda_g C_g
//! dC_g/dt = (beta_g / Lambda) P - lambda_g C_g
//! ```
//!
//! under a rod-drop reactivity ramp, starting from precursor equilibrium.
//! The corpus covers initial powers {100, 90, 80, 70}% crossed with rod
//! drops of {30, 50}% of full insertion. The kinetics constants are
//! configuration, not physics claims; defaults are thermal-fission values
//! with a 6-group delayed fraction split summing to 0.0065.

use crate::error::{Error, Result};

/// Internal Runge-Kutta step used when no explicit step is requested.
pub const DT_INTERNAL_S: f64 = 1e-3;

/// Point-kinetics constants: delayed-group fractions, decay constants, and
/// the neutron generation time.
#[derive(Debug, Clone, PartialEq)]
pub struct PointKineticsParams {
    /// Delayed fraction per group, beta_g.
    pub betas: Vec<f64>,
    /// Decay constant per group, lambda_g (1/s).
    pub lambdas: Vec<f64>,
    /// Neutron generation time Lambda (s).
    pub generation_time_s: f64,
}

impl Default for PointKineticsParams {
    fn default() -> Self {
        // 6-group split of beta = 0.0065 with standard thermal-fission
        // group fractions and decay constants.
        Self {
            betas: vec![
                0.0002145, 0.0014235, 0.0012740, 0.0025675, 0.0007475, 0.0002730,
            ],
            lambdas: vec![0.0124, 0.0305, 0.111, 0.301, 1.14, 3.01],
            generation_time_s: 1e-3,
        }
    }
}

impl PointKineticsParams {
    /// Total delayed fraction beta.
    pub fn beta_total(&self) -> f64 {
        self.betas.iter().sum()
    }

    pub fn group_count(&self) -> usize {
        self.betas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one delayed group is required".into(),
            ));
        }
        if self.betas.len() != self.lambdas.len() {
            return Err(Error::InvalidConfig(format!(
                "{} beta entries but {} lambda entries",
                self.betas.len(),
                self.lambdas.len()
            )));
        }
        let positive = |x: &f64| x.is_finite() && *x > 0.0;
        if !self.betas.iter().all(positive) || !self.lambdas.iter().all(positive) {
            return Err(Error::InvalidConfig(
                "group fractions and decay constants must be positive".into(),
            ));
        }
        if !positive(&self.generation_time_s) {
            return Err(Error::InvalidConfig(
                "generation time must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One step-back case: operating point, commanded rod drop, and the rod
/// worth/ramp shape.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBackScenario {
    /// Power at t = 0, percent of full power.
    pub initial_power_pct: f64,
    /// Commanded drop as percent of full insertion.
    pub drop_pct: f64,
    /// Reactivity of full insertion, milli-k (non-positive).
    pub total_rod_worth_mk: f64,
    /// Time for the rod to travel its commanded fraction; 0 means an
    /// instantaneous step.
    pub drop_duration_s: f64,
    pub horizon_s: f64,
    /// Output sampling interval.
    pub dt_s: f64,
}

impl StepBackScenario {
    /// Scenario with the default worth (-30 mk), 2 s ramp, 14 s horizon,
    /// and 0.1 s sampling.
    pub fn new(initial_power_pct: f64, drop_pct: f64) -> Self {
        Self {
            initial_power_pct,
            drop_pct,
            total_rod_worth_mk: -30.0,
            drop_duration_s: 2.0,
            horizon_s: 14.0,
            dt_s: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_power_pct.is_finite() && self.initial_power_pct > 0.0) {
            return Err(Error::InvalidConfig(
                "initial power must be positive".into(),
            ));
        }
        if !(0.0..=100.0).contains(&self.drop_pct) {
            return Err(Error::InvalidConfig(format!(
                "drop percentage {} outside [0, 100]",
                self.drop_pct
            )));
        }
        if !(self.total_rod_worth_mk.is_finite() && self.total_rod_worth_mk <= 0.0) {
            return Err(Error::InvalidConfig(
                "rod worth must be non-positive (negative reactivity insertion)".into(),
            ));
        }
        if !(self.drop_duration_s.is_finite() && self.drop_duration_s >= 0.0) {
            return Err(Error::InvalidConfig(
                "drop duration must be non-negative".into(),
            ));
        }
        if self.horizon_s <= 0.0 || self.dt_s <= 0.0 {
            return Err(Error::InvalidConfig(
                "horizon and sampling interval must be positive".into(),
            ));
        }
        let steps = (self.horizon_s / self.dt_s).round();
        if steps < 1.0 || (self.horizon_s - steps * self.dt_s).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "sampling interval must divide the horizon".into(),
            ));
        }
        Ok(())
    }

    /// Samples per series, t = 0 included.
    pub fn sample_count(&self) -> usize {
        (self.horizon_s / self.dt_s).round() as usize + 1
    }

    /// Rod position as a fraction of full insertion: a linear ramp from 0
    /// to `drop_pct/100` over `drop_duration_s`, constant afterwards. A
    /// zero duration drops the full commanded fraction at t = 0.
    pub fn rod_position(&self, t_s: f64) -> f64 {
        let full = self.drop_pct / 100.0;
        if self.drop_duration_s <= 0.0 {
            return full;
        }
        (t_s.max(0.0) / self.drop_duration_s).min(1.0) * full
    }

    /// Reactivity (delta-k/k) at a rod fraction, under the linear worth
    /// curve. 1 mk = 1e-3.
    pub fn reactivity(&self, rod_fraction: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&rod_fraction) {
            return Err(Error::InvalidInput(format!(
                "rod fraction {rod_fraction} outside [0, 1]"
            )));
        }
        Ok(self.total_rod_worth_mk * 1e-3 * rod_fraction)
    }
}

/// One output sample of a transient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientSample {
    pub t_s: f64,
    pub rod_fraction: f64,
    pub power_pct: f64,
}

/// A full transient with the scenario that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientSeries {
    pub scenario: StepBackScenario,
    pub samples: Vec<TransientSample>,
}

/// A full integrator state at one output time: power plus precursor
/// concentrations. Diagnostic; the corpus path uses [`TransientSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    pub t_s: f64,
    pub power_pct: f64,
    pub precursors: Vec<f64>,
}

/// Integrates one scenario with classical fixed-step 4th-order
/// Runge-Kutta at the default internal step, sampling every `dt_s`.
pub fn integrate_point_kinetics(
    params: &PointKineticsParams,
    scenario: &StepBackScenario,
) -> Result<TransientSeries> {
    integrate_point_kinetics_with_step(params, scenario, DT_INTERNAL_S)
}

/// Same as [`integrate_point_kinetics`] with an explicit internal step;
/// the step must divide the sampling interval. Exposed so convergence
/// checks can halve the step.
pub fn integrate_point_kinetics_with_step(
    params: &PointKineticsParams,
    scenario: &StepBackScenario,
    dt_int_s: f64,
) -> Result<TransientSeries> {
    let trace = integrate_state_trace(params, scenario, dt_int_s)?;
    let samples = trace
        .into_iter()
        .map(|s| TransientSample {
            t_s: s.t_s,
            rod_fraction: scenario.rod_position(s.t_s),
            power_pct: s.power_pct,
        })
        .collect();
    Ok(TransientSeries {
        scenario: scenario.clone(),
        samples,
    })
}

/// Integrates and returns the full state at each output time, precursors
/// included. Used by diagnostics and tests; the data path discards
/// precursors.
pub fn integrate_state_trace(
    params: &PointKineticsParams,
    scenario: &StepBackScenario,
    dt_int_s: f64,
) -> Result<Vec<StateSample>> {
    params.validate()?;
    scenario.validate()?;
    if !(dt_int_s.is_finite() && dt_int_s > 0.0) {
        return Err(Error::InvalidConfig(
            "internal step must be positive".into(),
        ));
    }
    let per_sample = (scenario.dt_s / dt_int_s).round();
    if per_sample < 1.0 || (scenario.dt_s - per_sample * dt_int_s).abs() > 1e-9 {
        return Err(Error::InvalidConfig(
            "internal step must divide the sampling interval".into(),
        ));
    }
    let per_sample = per_sample as u64;

    let g = params.group_count();
    let beta = params.beta_total();
    let lam = params.generation_time_s;
    let worth = scenario.total_rod_worth_mk * 1e-3;
    let rho_at = |t: f64| worth * scenario.rod_position(t);

    // State layout: [P, C_1 .. C_G], precursors at equilibrium for P(0).
    let mut y = vec![0.0; g + 1];
    y[0] = scenario.initial_power_pct;
    for i in 0..g {
        y[1 + i] = params.betas[i] * y[0] / (lam * params.lambdas[i]);
    }

    let deriv = |t: f64, y: &[f64], dy: &mut [f64]| {
        let rho = rho_at(t);
        let mut delayed = 0.0;
        for i in 0..g {
            let c = y[1 + i];
            delayed += params.lambdas[i] * c;
            dy[1 + i] = params.betas[i] / lam * y[0] - params.lambdas[i] * c;
        }
        dy[0] = (rho - beta) / lam * y[0] + delayed;
    };

    let n_samples = scenario.sample_count();
    let mut out = Vec::with_capacity(n_samples);
    let mut k1 = vec![0.0; g + 1];
    let mut k2 = vec![0.0; g + 1];
    let mut k3 = vec![0.0; g + 1];
    let mut k4 = vec![0.0; g + 1];
    let mut tmp = vec![0.0; g + 1];

    for sample_idx in 0..n_samples {
        let t_sample = sample_idx as f64 * scenario.dt_s;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationFailure(format!(
                "non-finite state at t = {t_sample} s"
            )));
        }
        out.push(StateSample {
            t_s: t_sample,
            power_pct: y[0],
            precursors: y[1..].to_vec(),
        });
        if sample_idx + 1 == n_samples {
            break;
        }
        for step in 0..per_sample {
            let t = (sample_idx as u64 * per_sample + step) as f64 * dt_int_s;
            let h = dt_int_s;
            deriv(t, &y, &mut k1);
            for i in 0..=g {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            deriv(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..=g {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            deriv(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..=g {
                tmp[i] = y[i] + h * k3[i];
            }
            deriv(t + h, &tmp, &mut k4);
            for i in 0..=g {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    Ok(out)
}

/// Initial powers of the step-back corpus, percent of full power.
pub const CORPUS_INITIAL_POWERS_PCT: [f64; 4] = [100.0, 90.0, 80.0, 70.0];
/// Rod-drop levels of the step-back corpus, percent of full insertion.
pub const CORPUS_DROPS_PCT: [f64; 2] = [30.0, 50.0];

/// Generates the eight-series step-back corpus: initial powers
/// {100, 90, 80, 70}% crossed with drops {30, 50}%, in that nesting order
/// (power outer, drop inner).
pub fn generate_stepback_corpus(
    params: &PointKineticsParams,
    total_rod_worth_mk: f64,
    drop_duration_s: f64,
) -> Result<Vec<TransientSeries>> {
    let mut corpus = Vec::with_capacity(8);
    for power in CORPUS_INITIAL_POWERS_PCT {
        for drop in CORPUS_DROPS_PCT {
            let scenario = StepBackScenario {
                initial_power_pct: power,
                drop_pct: drop,
                total_rod_worth_mk,
                drop_duration_s,
                ..StepBackScenario::new(power, drop)
            };
            corpus.push(integrate_point_kinetics(params, &scenario)?);
        }
    }
    Ok(corpus)
}
