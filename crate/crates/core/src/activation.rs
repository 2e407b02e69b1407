//! Neuron activation functions.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Activation function of a layer.
///
/// `Tansig` maps into (-1, 1), `Logsig` into (0, 1), `Linear` is the
/// identity. `Linear` is only permitted on the output layer; network
/// construction rejects it for hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Hyperbolic tangent sigmoid: `tanh(v)`.
    Tansig,
    /// Logistic sigmoid: `1 / (1 + exp(-v))`.
    Logsig,
    /// Identity, for output layers on unbounded targets.
    Linear,
}

impl Activation {
    /// Applies the activation to an induced field `v`.
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tansig => v.tanh(),
            Activation::Logsig => 1.0 / (1.0 + (-v).exp()),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the activation output `y = apply(v)`.
    ///
    /// tansig: `1 - y^2`, logsig: `y (1 - y)`, linear: `1`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tansig => 1.0 - y * y,
            Activation::Logsig => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }

    /// True if the codomain contains `y` (closure of the open interval).
    pub fn contains(self, y: f64) -> bool {
        match self {
            Activation::Tansig => (-1.0..=1.0).contains(&y),
            Activation::Logsig => (0.0..=1.0).contains(&y),
            Activation::Linear => y.is_finite(),
        }
    }

    /// Short label used in reports and CLI arguments.
    pub fn label(self) -> &'static str {
        match self {
            Activation::Tansig => "tansig",
            Activation::Logsig => "logsig",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "tansig" => Ok(Activation::Tansig),
            "logsig" => Ok(Activation::Logsig),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidInput(format!(
                "unknown activation {other:?} (expected tansig, logsig, or linear)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tansig_is_odd_at_zero() {
        assert_eq!(Activation::Tansig.apply(0.0), 0.0);
    }

    #[test]
    fn logsig_at_zero_is_half() {
        assert_eq!(Activation::Logsig.apply(0.0), 0.5);
    }

    #[test]
    fn tansig_at_one_matches_reference() {
        // tanh(1) from a high-precision evaluation.
        assert!((Activation::Tansig.apply(1.0) - 0.7615941559557649).abs() < 1e-12);
    }

    #[test]
    fn linear_is_identity() {
        assert_eq!(Activation::Linear.apply(7.3), 7.3);
        assert_eq!(Activation::Linear.derivative_from_output(7.3), 1.0);
    }

    #[test]
    fn derivative_from_output_values() {
        assert_eq!(Activation::Logsig.derivative_from_output(0.5), 0.25);
        assert_eq!(Activation::Tansig.derivative_from_output(0.0), 1.0);
    }

    #[test]
    fn parse_round_trips_labels() {
        for a in [Activation::Tansig, Activation::Logsig, Activation::Linear] {
            assert_eq!(a.label().parse::<Activation>().unwrap(), a);
        }
        assert!("relu".parse::<Activation>().is_err());
    }
}
