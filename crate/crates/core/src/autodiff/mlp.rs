//! Small feedforward network with tanh hidden layers.
//!
//! The diffusion module uses a sigmoid output times a learnable positive
//! scale; source terms use a plain linear output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{sigmoid, softplus, softplus_inv, Tape, Var};
use crate::error::{Error, Result};

/// One dense layer, weights row-major `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    /// `scale * sigmoid(z)`, strictly inside `(0, scale)`.
    ScaledSigmoid,
    Linear,
}

const TANH_GAIN: f64 = 5.0 / 3.0;

/// Parameters of a scalar-to-scalar network.
///
/// The output scale is stored unconstrained and mapped through softplus, so
/// it is strictly positive for every value the optimizer can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub raw_scale: f64,
    pub output: OutputActivation,
}

/// Tape handles for an [`MlpParams`].
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub layers: Vec<(Var, Var, usize, usize)>,
    pub raw_scale: Var,
    pub output: OutputActivation,
}

impl MlpParams {
    /// Xavier-uniform weights with the tanh gain 5/3, zero biases, output
    /// scale 1.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least two layer sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = TANH_GAIN * (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Layer {
                    weights,
                    bias: vec![0.0; fan_out],
                    fan_in,
                    fan_out,
                }
            })
            .collect();
        Ok(Self {
            layers,
            raw_scale: softplus_inv(1.0),
            output: OutputActivation::ScaledSigmoid,
        })
    }

    /// Same initialization with a linear output layer and no scale.
    pub fn init_linear_output(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut p = Self::init(layer_sizes, seed)?;
        p.output = OutputActivation::Linear;
        p.raw_scale = 0.0;
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn scale(&self) -> f64 {
        softplus(self.raw_scale)
    }

    /// Weights and biases, excluding the output scale.
    pub fn weight_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All trainable scalars including the output scale, if any.
    pub fn param_count(&self) -> usize {
        match self.output {
            OutputActivation::ScaledSigmoid => self.weight_count() + 1,
            OutputActivation::Linear => self.weight_count(),
        }
    }

    /// Checks the layer chain: shapes per layer and `out_k == in_{k+1}`.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.fan_in * l.fan_out || l.bias.len() != l.fan_out {
                return Err(Error::Shape(format!("layer {k} has inconsistent shapes")));
            }
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::Shape(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].fan_out,
                    k + 1,
                    pair[1].fan_in
                )));
            }
        }
        if self.layers.last().map(|l| l.fan_out) != Some(1) || self.input_dim() != 1 {
            return Err(Error::Shape("network must map a scalar to a scalar".into()));
        }
        Ok(())
    }

    /// Records all parameters as tape leaves.
    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = tape.leaf(l.weights.clone());
                let b = tape.leaf(l.bias.clone());
                (w, b, l.fan_in, l.fan_out)
            })
            .collect();
        let raw_scale = tape.constant(self.raw_scale);
        BoundMlp {
            layers,
            raw_scale,
            output: self.output,
        }
    }

    /// Plain evaluation without a tape.
    pub fn eval(&self, x: f64) -> f64 {
        let mut act = vec![x];
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut next: Vec<f64> = l
                .weights
                .chunks_exact(l.fan_in)
                .zip(&l.bias)
                .map(|(row, b)| row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + b)
                .collect();
            if k < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            act = next;
        }
        match self.output {
            OutputActivation::ScaledSigmoid => self.scale() * sigmoid(act[0]),
            OutputActivation::Linear => act[0],
        }
    }

    /// Scalar forward pass, recorded on a fresh tape.
    pub fn forward(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NumericInput(format!("network input {x}")));
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let xv = tape.constant(x);
        let y = bound.forward(&mut tape, xv);
        Ok(tape.scalar(y))
    }
}

impl BoundMlp {
    /// Applies the network to every entry of `x` independently.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let last = self.layers.len() - 1;
        let mut act = x;
        for (k, &(w, b, fan_in, fan_out)) in self.layers.iter().enumerate() {
            act = tape.linear(act, w, b, fan_in, fan_out);
            if k < last {
                act = tape.tanh(act);
            }
        }
        match self.output {
            OutputActivation::ScaledSigmoid => {
                let out = tape.sigmoid(act);
                let scale = tape.softplus(self.raw_scale);
                tape.mul(scale, out)
            }
            OutputActivation::Linear => act,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_architecture_parameter_count() {
        let p = MlpParams::init(&[1, 15, 15, 15, 1], 0).unwrap();
        // (1*15 + 15) + 2 * (15*15 + 15) + (15*1 + 1)
        assert_eq!(p.weight_count(), 526);
        assert_eq!(p.param_count(), 527);
    }

    #[test]
    fn single_linear_layer() {
        let p = MlpParams::init(&[1, 1], 9).unwrap();
        assert_eq!(p.weight_count(), 2);
        assert_eq!(p.param_count(), 3);
    }

    #[test]
    fn init_is_deterministic() {
        let a = MlpParams::init(&[1, 15, 15, 15, 1], 42).unwrap();
        let b = MlpParams::init(&[1, 15, 15, 15, 1], 42).unwrap();
        assert_eq!(a, b);
        let c = MlpParams::init(&[1, 15, 15, 15, 1], 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(MlpParams::init(&[], 0), Err(Error::Config(_))));
        assert!(matches!(MlpParams::init(&[3], 0), Err(Error::Config(_))));
        assert!(matches!(MlpParams::init(&[1, 0, 1], 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut p = MlpParams::init(&[1, 4, 1], 0).unwrap();
        for l in &mut p.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        for x in [-3.0, 0.0, 12.5] {
            assert!((p.forward(x).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_non_finite() {
        let p = MlpParams::init(&[1, 2, 1], 0).unwrap();
        assert!(matches!(p.forward(f64::NAN), Err(Error::NumericInput(_))));
        assert!(matches!(
            p.forward(f64::INFINITY),
            Err(Error::NumericInput(_))
        ));
    }

    #[test]
    fn linear_output_identity() {
        let mut p = MlpParams::init_linear_output(&[1, 1], 0).unwrap();
        p.layers[0].weights = vec![1.0];
        assert_eq!(p.param_count(), 2);
        for x in [-2.0, 0.25, 7.0] {
            assert_eq!(p.forward(x).unwrap(), x);
        }
    }

    #[test]
    fn validate_catches_broken_chain() {
        let mut p = MlpParams::init(&[1, 3, 1], 0).unwrap();
        assert!(p.validate().is_ok());
        p.layers[1].fan_in = 4;
        assert!(p.validate().is_err());
    }
}
