//! Synthetic servo position data from trapezoidal velocity profiles.
//!
//! A profile accelerates at a constant rate to its peak velocity, cruises,
//! then decelerates at the same rate to stop exactly on the target
//! position. Position is the closed-form piecewise-quadratic integral of
//! velocity, so no numeric integration is involved. High acceleration
//! (5e6 ppu/s^2) yields truncated-ramp position curves dominated by the
//! cruise phase; low acceleration (1e6 ppu/s^2) yields S-shaped curves
//! dominated by the acceleration and deceleration phases.
//!
//! Defaults: nine peak velocities from 5.0e5 to 9.0e5 ppu/s and a 9.0e5
//! ppu set-point. Every (acceleration, velocity) pair reaches the target
//! inside the 5 s recording window, and the two acceleration classes keep
//! their distinct curve shapes across all nine velocities.

use crate::error::{Error, Result};

/// Recording window (s).
pub const HORIZON_S: f64 = 5.0;
/// Samples per series over the recording window.
pub const SAMPLE_COUNT: usize = 5000;
/// The two acceleration classes (ppu/s^2): S-curve and truncated-ramp.
pub const DEFAULT_ACCELERATIONS_PPU_S2: [f64; 2] = [1e6, 5e6];
/// Default nine peak velocities (ppu/s).
pub const DEFAULT_VELOCITIES_PPU_S: [f64; 9] = [
    5.0e5, 5.5e5, 6.0e5, 6.5e5, 7.0e5, 7.5e5, 8.0e5, 8.5e5, 9.0e5,
];
/// Default position set-point (ppu).
pub const DEFAULT_TARGET_POSITION_PPU: f64 = 9.0e5;

/// One trapezoidal move: accelerate, cruise, decelerate, hold.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    acceleration_ppu_s2: f64,
    peak_velocity_ppu_s: f64,
    target_position_ppu: f64,
    horizon_s: f64,
    /// End of the acceleration phase, v_max / a.
    t_accel_end_s: f64,
    /// Start of the deceleration phase.
    t_decel_start_s: f64,
    /// Stop time; the profile holds (target, 0) afterwards.
    t_stop_s: f64,
}

impl MotionProfile {
    /// Builds a profile, rejecting targets that cannot be reached
    /// (`target < v_max^2 / a`, the triangular-profile floor) and moves
    /// that do not finish inside the recording window.
    pub fn new(
        acceleration_ppu_s2: f64,
        peak_velocity_ppu_s: f64,
        target_position_ppu: f64,
    ) -> Result<Self> {
        let a = acceleration_ppu_s2;
        let v = peak_velocity_ppu_s;
        let target = target_position_ppu;
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidProfile(
                "acceleration must be positive".into(),
            ));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidProfile(
                "peak velocity must be positive".into(),
            ));
        }
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::InvalidProfile(
                "target position must be positive".into(),
            ));
        }
        if target < v * v / a {
            return Err(Error::InvalidProfile(format!(
                "target {target} ppu unreachable: needs at least {} ppu to reach {v} ppu/s at {a} ppu/s^2",
                v * v / a
            )));
        }
        let t_accel_end = v / a;
        let cruise = target / v - v / a;
        let t_decel_start = t_accel_end + cruise;
        let t_stop = t_decel_start + t_accel_end;
        if t_stop > HORIZON_S {
            return Err(Error::InvalidProfile(format!(
                "move takes {t_stop:.3} s, beyond the {HORIZON_S} s window"
            )));
        }
        Ok(Self {
            acceleration_ppu_s2: a,
            peak_velocity_ppu_s: v,
            target_position_ppu: target,
            horizon_s: HORIZON_S,
            t_accel_end_s: t_accel_end,
            t_decel_start_s: t_decel_start,
            t_stop_s: t_stop,
        })
    }

    pub fn acceleration_ppu_s2(&self) -> f64 {
        self.acceleration_ppu_s2
    }

    pub fn peak_velocity_ppu_s(&self) -> f64 {
        self.peak_velocity_ppu_s
    }

    pub fn target_position_ppu(&self) -> f64 {
        self.target_position_ppu
    }

    pub fn t_accel_end_s(&self) -> f64 {
        self.t_accel_end_s
    }

    pub fn t_decel_start_s(&self) -> f64 {
        self.t_decel_start_s
    }

    pub fn t_stop_s(&self) -> f64 {
        self.t_stop_s
    }

    /// Position (ppu) and velocity (ppu/s) at time `t`, evaluated in
    /// closed form. After the stop time this returns exactly
    /// `(target_position, 0)`.
    pub fn state(&self, t_s: f64) -> Result<(f64, f64)> {
        if !t_s.is_finite() || t_s < 0.0 || t_s > self.horizon_s {
            return Err(Error::InvalidInput(format!(
                "time {t_s} outside [0, {}]",
                self.horizon_s
            )));
        }
        let a = self.acceleration_ppu_s2;
        let v = self.peak_velocity_ppu_s;
        if t_s >= self.t_stop_s {
            return Ok((self.target_position_ppu, 0.0));
        }
        if t_s < self.t_accel_end_s {
            return Ok((0.5 * a * t_s * t_s, a * t_s));
        }
        let x_accel = 0.5 * v * v / a;
        if t_s < self.t_decel_start_s {
            return Ok((x_accel + v * (t_s - self.t_accel_end_s), v));
        }
        let tau = t_s - self.t_decel_start_s;
        let x_decel_start = self.target_position_ppu - x_accel;
        Ok((x_decel_start + v * tau - 0.5 * a * tau * tau, v - a * tau))
    }
}

/// One sampled instant of a servo move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoSample {
    pub t_s: f64,
    pub velocity_ppu_s: f64,
    pub position_ppu: f64,
}

/// A sampled move tagged with its operating condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoSeries {
    pub acceleration_ppu_s2: f64,
    pub peak_velocity_ppu_s: f64,
    pub samples: Vec<ServoSample>,
}

/// Samples one profile on the uniform grid `t_k = k * horizon / count`,
/// `k = 0 .. count-1`.
pub fn sample_profile(profile: &MotionProfile) -> Result<ServoSeries> {
    let dt = HORIZON_S / SAMPLE_COUNT as f64;
    let mut samples = Vec::with_capacity(SAMPLE_COUNT);
    for k in 0..SAMPLE_COUNT {
        let t = k as f64 * dt;
        let (position, velocity) = profile.state(t)?;
        samples.push(ServoSample {
            t_s: t,
            velocity_ppu_s: velocity,
            position_ppu: position,
        });
    }
    Ok(ServoSeries {
        acceleration_ppu_s2: profile.acceleration_ppu_s2(),
        peak_velocity_ppu_s: profile.peak_velocity_ppu_s(),
        samples,
    })
}

/// Generates the 18-series corpus: two accelerations crossed with nine
/// peak velocities toward one shared set-point, 5000 samples per series.
/// Enumeration order is acceleration outer, velocity inner.
pub fn generate_servo_corpus(
    velocities_ppu_s: &[f64],
    accelerations_ppu_s2: &[f64],
    target_position_ppu: f64,
) -> Result<Vec<ServoSeries>> {
    if velocities_ppu_s.len() != 9 {
        return Err(Error::InvalidInput(format!(
            "expected 9 peak velocities, got {}",
            velocities_ppu_s.len()
        )));
    }
    if accelerations_ppu_s2.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected 2 accelerations, got {}",
            accelerations_ppu_s2.len()
        )));
    }
    let mut corpus = Vec::with_capacity(18);
    for &a in accelerations_ppu_s2 {
        for &v in velocities_ppu_s {
            let profile = MotionProfile::new(a, v, target_position_ppu)?;
            corpus.push(sample_profile(&profile)?);
        }
    }
    Ok(corpus)
}

/// The default corpus with the shipped velocities, accelerations, and
/// set-point.
pub fn default_servo_corpus() -> Result<Vec<ServoSeries>> {
    generate_servo_corpus(
        &DEFAULT_VELOCITIES_PPU_S,
        &DEFAULT_ACCELERATIONS_PPU_S2,
        DEFAULT_TARGET_POSITION_PPU,
    )
}
