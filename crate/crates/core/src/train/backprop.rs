//! The backward pass: local gradients (deltas), weight gradients, output
//! sensitivities for Jacobian rows, and a finite-difference oracle.
//!
//! Delta conventions, with `e_j = d_j - o_j`:
//!
//! ```text
//! output layer:  delta_j = e_j * phi'(v_j)
//! hidden layer:  delta_j = phi'(v_j) * sum_k delta_k^{l+1} * w_kj^{l+1}
//! ```
//!
//! The hidden sum runs over the non-bias weights of the next layer (bias
//! weights receive deltas but have no source neuron to propagate to).
//! With these conventions the gradient of the half squared error is
//! `d(E)/d(w_ji) = -delta_j * y_i`, `y_0 = 1` for the bias column.

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::network::{ForwardTrace, Network};

/// Per-layer delta vectors, indexed like the computing layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Deltas {
    layers: Vec<Vec<f64>>,
}

impl Deltas {
    /// Allocates delta buffers sized for `net`.
    pub fn for_network(net: &Network) -> Self {
        Self {
            layers: net
                .config()
                .layer_neurons()
                .into_iter()
                .map(|n| vec![0.0; n])
                .collect(),
        }
    }

    /// Deltas of computing layer `l` (hidden layers first, output last).
    pub fn layer(&self, l: usize) -> &[f64] {
        &self.layers[l]
    }

    fn matches(&self, net: &Network) -> bool {
        self.layers.len() == net.weights().len()
            && self
                .layers
                .iter()
                .zip(net.config().layer_neurons())
                .all(|(d, n)| d.len() == n)
    }
}

/// Backward recursion shared by error deltas and output sensitivities:
/// seeds the output layer with `seed_j * phi'(v_j)` and propagates down.
fn seeded_deltas(net: &Network, trace: &ForwardTrace, seed: &[f64], deltas: &mut Deltas) {
    let acts: Vec<Activation> = net.config().layer_activations();
    let last = deltas.layers.len() - 1;
    {
        let out_act = acts[last];
        let outputs = trace.outputs();
        let layer = &mut deltas.layers[last];
        for j in 0..layer.len() {
            layer[j] = seed[j] * out_act.derivative_from_output(outputs[j]);
        }
    }
    for l in (0..last).rev() {
        let (lower, upper) = deltas.layers.split_at_mut(l + 1);
        let here = &mut lower[l];
        let above = &upper[0];
        let w_above = &net.weights()[l + 1];
        let y_here = trace.layer_output(l + 1);
        for j in 0..here.len() {
            let mut sum = 0.0;
            for (k, d_k) in above.iter().enumerate() {
                // Column j + 1: column 0 is the bias weight.
                sum += d_k * w_above.get(k, j + 1);
            }
            here[j] = acts[l].derivative_from_output(y_here[j + 1]) * sum;
        }
    }
}

/// Computes deltas for one (trace, target) pair into preallocated
/// buffers.
pub fn compute_deltas_into(
    net: &Network,
    trace: &ForwardTrace,
    target: &[f64],
    deltas: &mut Deltas,
) -> Result<()> {
    if target.len() != net.config().output_count {
        return Err(Error::ShapeMismatch(format!(
            "target has {} entries, network has {} outputs",
            target.len(),
            net.config().output_count
        )));
    }
    if !deltas.matches(net) || !trace.matches_network(net) {
        return Err(Error::ShapeMismatch(
            "trace/delta buffers do not match the network".into(),
        ));
    }
    let outputs = trace.outputs();
    let errors: Vec<f64> = target.iter().zip(outputs).map(|(d, o)| d - o).collect();
    seeded_deltas(net, trace, &errors, deltas);
    Ok(())
}

/// Allocating wrapper around [`compute_deltas_into`].
pub fn compute_deltas(net: &Network, trace: &ForwardTrace, target: &[f64]) -> Result<Deltas> {
    let mut deltas = Deltas::for_network(net);
    compute_deltas_into(net, trace, target, &mut deltas)?;
    Ok(deltas)
}

/// Gradient of the half squared error `E = 1/2 sum_j e_j^2` with respect
/// to every weight, in canonical flat order (layer, then row, bias
/// column first). Entries are `-delta_j * y_i`.
pub fn error_gradient(net: &Network, trace: &ForwardTrace, deltas: &Deltas) -> Vec<f64> {
    let mut out = Vec::with_capacity(net.weight_count());
    weight_products(net, trace, deltas, -1.0, &mut out);
    out
}

/// Jacobian row for a single-output network: `d(o)/d(w)` for every
/// weight in canonical flat order, written into `row`. `scratch` holds
/// the sensitivity recursion (deltas seeded with 1 instead of the
/// error).
pub fn output_jacobian_row_into(
    net: &Network,
    trace: &ForwardTrace,
    scratch: &mut Deltas,
    row: &mut Vec<f64>,
) -> Result<()> {
    if net.config().output_count != 1 {
        return Err(Error::InvalidConfig(
            "jacobian rows are defined for single-output networks".into(),
        ));
    }
    if !scratch.matches(net) || !trace.matches_network(net) {
        return Err(Error::ShapeMismatch(
            "trace/delta buffers do not match the network".into(),
        ));
    }
    seeded_deltas(net, trace, &[1.0], scratch);
    weight_products(net, trace, scratch, 1.0, row);
    Ok(())
}

/// Writes `sign * delta_j * y_i` for every weight into `out`, canonical
/// flat order.
fn weight_products(
    net: &Network,
    trace: &ForwardTrace,
    deltas: &Deltas,
    sign: f64,
    out: &mut Vec<f64>,
) {
    out.clear();
    for l in 0..net.weights().len() {
        let y_prev = trace.layer_output(l);
        for &d in deltas.layer(l) {
            let s = sign * d;
            for &y in y_prev {
                out.push(s * y);
            }
        }
    }
}

/// Central-difference gradient of the half squared error, the oracle the
/// analytic backward pass is checked against. Same canonical flat order
/// as [`error_gradient`].
pub fn finite_difference_gradient(
    net: &Network,
    input: &[f64],
    target: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput("step h must be positive".into()));
    }
    let mut probe = net.clone();
    let mut trace = crate::network::ForwardTrace::for_network(net);
    let mut grad = Vec::with_capacity(net.weight_count());
    for l in 0..net.weights().len() {
        for j in 0..net.weights()[l].rows() {
            for i in 0..net.weights()[l].cols() {
                let orig = probe.weights()[l].get(j, i);
                probe.weights_mut()[l].set(j, i, orig + h);
                let e_plus = half_squared_error(&probe, input, target, &mut trace)?;
                probe.weights_mut()[l].set(j, i, orig - h);
                let e_minus = half_squared_error(&probe, input, target, &mut trace)?;
                probe.weights_mut()[l].set(j, i, orig);
                grad.push((e_plus - e_minus) / (2.0 * h));
            }
        }
    }
    Ok(grad)
}

fn half_squared_error(
    net: &Network,
    input: &[f64],
    target: &[f64],
    trace: &mut ForwardTrace,
) -> Result<f64> {
    net.forward_into(input, trace)?;
    Ok(trace
        .outputs()
        .iter()
        .zip(target)
        .map(|(o, d)| {
            let e = d - o;
            0.5 * e * e
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::network::{LayerSpec, NetworkConfig, WeightMatrix};

    fn oracle_net() -> Network {
        let config = NetworkConfig::single_output(
            1,
            vec![LayerSpec::new(1, Activation::Tansig)],
            Activation::Linear,
        );
        Network::from_weights(
            config,
            vec![
                WeightMatrix::from_rows(vec![vec![-1.0, 2.0]]).unwrap(),
                WeightMatrix::from_rows(vec![vec![0.5, 3.0]]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn random_net(
        inputs: usize,
        hidden: &[(usize, Activation)],
        out: Activation,
        seed: u64,
    ) -> Network {
        let config = NetworkConfig::single_output(
            inputs,
            hidden.iter().map(|&(n, a)| LayerSpec::new(n, a)).collect(),
            out,
        );
        Network::init(config, seed).unwrap()
    }

    #[test]
    fn zero_error_gives_zero_deltas() {
        let net = oracle_net();
        let trace = net.forward(&[1.0]).unwrap();
        let deltas = compute_deltas(&net, &trace, &[trace.output()]).unwrap();
        assert_eq!(deltas.layer(1), &[0.0]);
        assert_eq!(deltas.layer(0), &[0.0]);
    }

    #[test]
    fn linear_output_delta_equals_error() {
        let net = oracle_net();
        let trace = net.forward(&[1.0]).unwrap();
        let deltas = compute_deltas(&net, &trace, &[trace.output() + 0.4]).unwrap();
        assert!((deltas.layer(1)[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn logsig_output_delta_at_zero_field() {
        // All-zero weights put the logsig output at exactly 0.5, where
        // phi' = 0.25; an error of 0.4 gives delta = 0.1.
        let config = NetworkConfig::single_output(
            2,
            vec![LayerSpec::new(3, Activation::Tansig)],
            Activation::Logsig,
        );
        let mut net = Network::init(config, 5).unwrap();
        for m in net.weights_mut() {
            m.fill(0.0);
        }
        let trace = net.forward(&[0.3, 0.6]).unwrap();
        assert_eq!(trace.output(), 0.5);
        let deltas = compute_deltas(&net, &trace, &[0.9]).unwrap();
        assert_eq!(deltas.layer(1)[0], 0.1);
    }

    #[test]
    fn frozen_gradient_oracle() {
        // Hand-derived on the 1-1-1 network at x = 1, target = 0:
        //   o = 2.7847824678672946, e = -o, y_h = tanh(1)
        //   dE/d[b_h, w_h] = 3.5086115504425494 (both, since x = 1)
        //   dE/d[b_o, w_o] = [2.7847824678672946, 2.1208740531358042]
        let net = oracle_net();
        let trace = net.forward(&[1.0]).unwrap();
        let deltas = compute_deltas(&net, &trace, &[0.0]).unwrap();
        let grad = error_gradient(&net, &trace, &deltas);
        let expected = [
            3.5086115504425494,
            3.5086115504425494,
            2.7847824678672946,
            2.1208740531358042,
        ];
        for (g, e) in grad.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "got {g}, want {e}");
        }

        let fd = finite_difference_gradient(&net, &[1.0], &[0.0], 1e-6).unwrap();
        for (g, f) in grad.iter().zip(&fd) {
            assert!((g - f).abs() / f.abs() < 1e-7);
        }
    }

    #[test]
    fn output_bias_gradient_hand_check() {
        // Hidden weights zeroed, output bias 2, target 0: o = 2, e = -2,
        // and dE/d(bias) = -delta * 1 = 2; the hidden-fed weight sees
        // y_h = 0 so its gradient vanishes.
        let config = NetworkConfig::single_output(
            1,
            vec![LayerSpec::new(1, Activation::Tansig)],
            Activation::Linear,
        );
        let net = Network::from_weights(
            config,
            vec![
                WeightMatrix::from_rows(vec![vec![0.0, 0.0]]).unwrap(),
                WeightMatrix::from_rows(vec![vec![2.0, 0.7]]).unwrap(),
            ],
        )
        .unwrap();
        let trace = net.forward(&[0.4]).unwrap();
        let deltas = compute_deltas(&net, &trace, &[0.0]).unwrap();
        let grad = error_gradient(&net, &trace, &deltas);
        assert_eq!(grad[2], 2.0);
        assert_eq!(grad[3], 0.0);
        let fd = finite_difference_gradient(&net, &[0.4], &[0.0], 1e-6).unwrap();
        assert!((fd[2] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn jacobian_row_matches_error_gradient_scaling() {
        // For a single output, dE/dw = -e * do/dw, so the jacobian row
        // times -e must reproduce the error gradient.
        let net = random_net(3, &[(4, Activation::Tansig)], Activation::Logsig, 17);
        let input = [0.2, 0.8, 0.5];
        let target = 0.3;
        let trace = net.forward(&input).unwrap();
        let e = target - trace.output();

        let deltas = compute_deltas(&net, &trace, &[target]).unwrap();
        let grad = error_gradient(&net, &trace, &deltas);

        let mut scratch = Deltas::for_network(&net);
        let mut row = Vec::new();
        output_jacobian_row_into(&net, &trace, &mut scratch, &mut row).unwrap();
        for (g, j) in grad.iter().zip(&row) {
            assert!((g - -e * j).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_matches_finite_differences_on_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let shapes: [(&[(usize, Activation)], Activation); 4] = [
            (&[(5, Activation::Tansig)], Activation::Linear),
            (&[(7, Activation::Logsig)], Activation::Tansig),
            (
                &[(5, Activation::Tansig), (4, Activation::Logsig)],
                Activation::Linear,
            ),
            (
                &[(6, Activation::Logsig), (6, Activation::Tansig)],
                Activation::Logsig,
            ),
        ];
        for (hidden, out) in shapes {
            for draw in 0..5 {
                let net = random_net(3, hidden, out, 1000 + draw);
                let input: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
                let target = [rng.gen_range(0.0..1.0)];
                let trace = net.forward(&input).unwrap();
                let deltas = compute_deltas(&net, &trace, &target).unwrap();
                let grad = error_gradient(&net, &trace, &deltas);
                let fd = finite_difference_gradient(&net, &input, &target, 1e-6).unwrap();
                let scale = grad.iter().chain(&fd).fold(1e-12f64, |m, g| m.max(g.abs()));
                for (g, f) in grad.iter().zip(&fd) {
                    assert!(
                        (g - f).abs() / scale < 1e-5,
                        "entry off by {} at scale {scale}",
                        (g - f).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn zero_error_sample_zeroes_both_gradients() {
        let net = random_net(2, &[(4, Activation::Tansig)], Activation::Linear, 3);
        let input = [0.4, 0.9];
        let trace = net.forward(&input).unwrap();
        let target = [trace.output()];
        let deltas = compute_deltas(&net, &trace, &target).unwrap();
        let grad = error_gradient(&net, &trace, &deltas);
        assert!(grad.iter().all(|g| *g == 0.0));
        let fd = finite_difference_gradient(&net, &input, &target, 1e-6).unwrap();
        assert!(fd.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn contract_violations_are_rejected() {
        let net = oracle_net();
        let trace = net.forward(&[1.0]).unwrap();
        assert!(matches!(
            compute_deltas(&net, &trace, &[0.0, 0.0]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            finite_difference_gradient(&net, &[1.0], &[0.0], 0.0),
            Err(Error::InvalidInput(_))
        ));
        let other = random_net(2, &[(4, Activation::Tansig)], Activation::Linear, 3);
        let other_trace = other.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(
            compute_deltas(&net, &other_trace, &[0.0]),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
