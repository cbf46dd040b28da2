//! The tanh multilayer perceptron `u_NN : R² → R`.
//!
//! Parameters live in one flat vector, layer-major: for each layer the
//! weight matrix (row-major, `out × in`) followed by the bias vector. The
//! optimizers, checkpoints and gradients all share this order.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{dual2_affine, dual2_tanh, Dual2, Node, NodeMatrix, Tape};
use crate::error::{bail, Result};
use crate::{math, Point};

mod batch;

pub use batch::{Jet, JetBatch};

/// Feed-forward network with tanh hidden layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Checks that `sizes` starts at 2 inputs, ends at 1 output and has no
/// empty layer.
pub fn validate_layer_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        bail!(Config, "layer sizes need at least input and output, got {:?}", sizes);
    }
    if sizes[0] != 2 {
        bail!(Config, "first layer size must be 2, got {}", sizes[0]);
    }
    if *sizes.last().unwrap() != 1 {
        bail!(Config, "last layer size must be 1, got {}", sizes.last().unwrap());
    }
    if sizes.contains(&0) {
        bail!(Config, "layer sizes must be positive: {:?}", sizes);
    }
    Ok(())
}

/// Total parameter count for the given layer sizes.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Wraps an existing flat parameter vector.
    pub fn from_flat(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        validate_layer_sizes(sizes)?;
        let n = param_count(sizes);
        if params.len() != n {
            bail!(Config, "{} parameters given, layer sizes {:?} need {}", params.len(), sizes, n);
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::from_flat(sizes, alloc::vec![0.0; param_count(sizes)])
    }

    /// Glorot-uniform weights, zero biases; deterministic in `seed`.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.num_layers() {
            let bound = glorot_bound(sizes[l], sizes[l + 1]);
            for w in net.weights_mut(l) {
                *w = bound * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of affine layers.
    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params.clone()
    }

    /// Replaces all parameters; `flat` must have the network's length.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            bail!(Structural, "expected {} parameters, got {}", self.params.len(), flat.len());
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    /// Offset of layer `l`'s weights in the flat vector.
    pub fn weight_offset(&self, l: usize) -> usize {
        param_count(&self.sizes[..=l])
    }

    /// Offset of layer `l`'s bias in the flat vector.
    pub fn bias_offset(&self, l: usize) -> usize {
        self.weight_offset(l) + self.sizes[l] * self.sizes[l + 1]
    }

    /// Row-major `out × in` weights of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let o = self.weight_offset(l);
        &self.params[o..o + self.sizes[l] * self.sizes[l + 1]]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let o = self.weight_offset(l);
        let n = self.sizes[l] * self.sizes[l + 1];
        &mut self.params[o..o + n]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let o = self.bias_offset(l);
        &self.params[o..o + self.sizes[l + 1]]
    }

    /// Plain evaluation at one point.
    pub fn forward(&self, x: Point) -> f64 {
        let mut act: Vec<f64> = x.to_vec();
        let mut next = Vec::new();
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (w, b) = (self.weights(l), self.bias(l));
            let n_in = self.sizes[l];
            next.clear();
            for (row, &bi) in w.chunks_exact(n_in).zip(b) {
                let mut acc = 0.0;
                for (wk, ak) in row.iter().zip(&act) {
                    acc += wk * ak;
                }
                let z = acc + bi;
                next.push(if l < last { math::tanh(z) } else { z });
            }
            core::mem::swap(&mut act, &mut next);
        }
        act[0]
    }

    /// Registers every parameter on `tape`, in flat order.
    pub fn register(&self, tape: &mut Tape) -> TapedMlp {
        let mut weights = Vec::with_capacity(self.num_layers());
        let mut biases = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let w: Vec<Node> = self.weights(l).iter().map(|&v| tape.param(v)).collect();
            let b: Vec<Node> = self.bias(l).iter().map(|&v| tape.param(v)).collect();
            weights.push(NodeMatrix::new(self.sizes[l + 1], self.sizes[l], w).expect("shape from sizes"));
            biases.push(b);
        }
        TapedMlp { weights, biases }
    }

    /// Registers the parameters and returns the output triple at `x`.
    /// Convenience for one-off evaluations; losses should call
    /// [`Mlp::register`] once and reuse the handle.
    pub fn forward_dual2(&self, x: Point, tape: &mut Tape) -> Dual2 {
        self.register(tape).forward_dual2(tape, x)
    }
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Network whose parameters are leaves of a tape.
#[derive(Clone, Debug)]
pub struct TapedMlp {
    weights: Vec<NodeMatrix>,
    biases: Vec<Vec<Node>>,
}

impl TapedMlp {
    /// Output value as a node, without input derivatives.
    pub fn forward_value(&self, tape: &mut Tape, x: Point) -> Node {
        let mut act: Vec<Node> = x.iter().map(|&v| tape.constant(v)).collect();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let next: Vec<Node> = (0..w.rows)
                .map(|i| {
                    let z = tape.affine(w.row(i), &act, Some(b[i])).expect("shape from sizes");
                    if l < last {
                        tape.tanh(z)
                    } else {
                        z
                    }
                })
                .collect();
            act = next;
        }
        act[0]
    }

    /// Output triple (value, input gradient, input Hessian) at `x`.
    pub fn forward_dual2(&self, tape: &mut Tape, x: Point) -> Dual2 {
        let mut act: Vec<Dual2> = Dual2::seed(tape, x).to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = dual2_affine(tape, w, b, &act).expect("shape from sizes");
            act = if l < last { z.iter().map(|d| dual2_tanh(tape, d)).collect() } else { z };
        }
        act[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lap_fd(net: &Mlp, x: Point, h: f64) -> f64 {
        let f = |dx: f64, dy: f64| net.forward([x[0] + dx, x[1] + dy]);
        (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - 4.0 * f(0.0, 0.0)) / (h * h)
    }

    #[test]
    fn same_seed_same_params() {
        let a = Mlp::init(&[2, 8, 8, 1], 42).unwrap();
        let b = Mlp::init(&[2, 8, 8, 1], 42).unwrap();
        assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = Mlp::init(&[2, 8, 8, 1], 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn paper_sized_parameter_count() {
        let sizes = [2, 128, 128, 128, 1];
        let expected = (2 * 128 + 128) + 2 * (128 * 128 + 128) + (128 + 1);
        assert_eq!(expected, 33_537);
        assert_eq!(param_count(&sizes), expected);
        assert_eq!(Mlp::init(&sizes, 0).unwrap().num_params(), expected);
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let sizes = [2, 16, 5, 1];
        let net = Mlp::init(&sizes, 7).unwrap();
        for l in 0..net.num_layers() {
            let bound = glorot_bound(sizes[l], sizes[l + 1]);
            assert!(net.weights(l).iter().all(|w| w.abs() <= bound));
            assert!(net.bias(l).iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn invalid_sizes_are_config_errors() {
        for bad in [&[3, 4, 1][..], &[2, 4, 2], &[2], &[2, 0, 1]] {
            assert!(matches!(Mlp::init(bad, 0), Err(crate::Error::Config(_))));
        }
    }

    #[test]
    fn zero_network_is_zero() {
        let net = Mlp::zeros(&[2, 6, 6, 1]).unwrap();
        let mut tape = Tape::new();
        for x in [[0.1, 0.2], [-0.7, 0.3]] {
            assert_eq!(net.forward(x), 0.0);
            let (v, g, h) = net.forward_dual2(x, &mut tape).values(&tape);
            assert_eq!((v, g, h), (0.0, [0.0; 2], [0.0; 3]));
        }
    }

    #[test]
    fn single_affine_layer_is_first_coordinate() {
        let net = Mlp::from_flat(&[2, 1], vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.forward([0.37, -0.8]), 0.37);
        let mut tape = Tape::new();
        let d = net.forward_dual2([0.37, -0.8], &mut tape);
        assert_eq!(d.values(&tape), (0.37, [1.0, 0.0], [0.0; 3]));
    }

    #[test]
    fn linear_network_has_zero_laplacian() {
        // Affine maps composed without a nonlinearity.
        let net = Mlp::from_flat(&[2, 1], vec![0.3, -2.0, 0.5]).unwrap();
        let mut tape = Tape::new();
        let d = net.forward_dual2([0.2, 0.9], &mut tape);
        let lap = d.laplacian(&mut tape);
        assert_eq!(tape.value(lap), 0.0);
    }

    #[test]
    fn tanh_of_sum_has_zero_laplacian_at_origin() {
        let net = Mlp::from_flat(&[2, 1, 1], vec![1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let mut tape = Tape::new();
        let d = net.forward_dual2([0.0, 0.0], &mut tape);
        let lap = d.laplacian(&mut tape);
        assert_eq!(tape.value(lap), 0.0);
    }

    #[test]
    fn dual2_value_is_bit_identical_to_forward() {
        let net = Mlp::init(&[2, 8, 8, 8, 1], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tape = Tape::new();
        let taped = net.register(&mut tape);
        for _ in 0..100 {
            let x = [2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0];
            let d = taped.forward_dual2(&mut tape, x);
            assert_eq!(tape.value(d.value).to_bits(), net.forward(x).to_bits());
            let v = taped.forward_value(&mut tape, x);
            assert_eq!(tape.value(v).to_bits(), net.forward(x).to_bits());
        }
    }

    #[test]
    fn laplacian_matches_five_point_stencil() {
        let mut net = Mlp::init(&[2, 8, 8, 8, 1], 5).unwrap();
        // nonzero biases so the test is not special
        for (i, p) in net.params_mut().iter_mut().enumerate() {
            *p += 0.05 * libm::sin(i as f64);
        }
        let mut tape = Tape::new();
        let taped = net.register(&mut tape);
        for x in [[0.1, -0.3], [0.55, 0.2], [-0.4, -0.4]] {
            let d = taped.forward_dual2(&mut tape, x);
            let lap = d.laplacian(&mut tape);
            let fd = lap_fd(&net, x, 1e-4);
            let v = tape.value(lap);
            assert!((v - fd).abs() <= 1e-4 * v.abs().max(1e-2), "{v} vs {fd}");
        }
    }

    #[test]
    fn flatten_round_trip() {
        let net = Mlp::init(&[2, 5, 3, 1], 9).unwrap();
        let back = Mlp::from_flat(net.layer_sizes(), net.flatten()).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::from_flat(&[2, 5, 3, 1], vec![0.0; 3]).is_err());
    }
}
