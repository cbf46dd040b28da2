//! Batched evaluation of the network with a hand-derived reverse pass.
//!
//! This is the training hot path. It computes the same quantities as
//! [`TapedMlp::forward_dual2`](super::TapedMlp::forward_dual2) followed by a
//! tape sweep, using identical floating-point operation order in the forward
//! direction, but works on whole layers at once instead of scalar nodes.
//!
//! Layer inputs are stored as `rows × (channels · points)` row-major
//! matrices; channel `c` of point `p` sits in column `c · points + p`.
//! Channels are value, `∂1`, `∂2`, `∂11`, `∂12`, `∂22`, truncated according
//! to the requested [`Jet`].

use alloc::vec;
use alloc::vec::Vec;

use super::Mlp;
use crate::{math, Point};

/// How many input derivatives to propagate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Jet {
    /// Value only.
    Value,
    /// Value and input gradient.
    Gradient,
    /// Value, gradient and the three Hessian entries.
    Hessian,
}

impl Jet {
    pub fn channels(self) -> usize {
        match self {
            Jet::Value => 1,
            Jet::Gradient => 3,
            Jet::Hessian => 6,
        }
    }
}

const V: usize = 0;
const G1: usize = 1;
const G2: usize = 2;
const H11: usize = 3;
const H12: usize = 4;
const H22: usize = 5;

/// Forward record of one batch of points.
#[derive(Clone, Debug)]
pub struct JetBatch {
    jet: Jet,
    points: usize,
    /// Input matrix of every layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation matrix of every hidden layer.
    pre: Vec<Vec<f64>>,
    /// `1 - s²` per hidden layer, `rows × points`.
    d: Vec<Vec<f64>>,
    /// `-2 s (1 - s²)` per hidden layer (Hessian jets only).
    dd: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl JetBatch {
    pub fn forward(net: &Mlp, xs: &[Point], jet: Jet) -> Self {
        let b = xs.len();
        let ch = jet.channels();
        let cols = ch * b;
        let sizes = net.layer_sizes();
        let last = net.num_layers() - 1;

        let mut x0 = vec![0.0; 2 * cols];
        for (p, x) in xs.iter().enumerate() {
            x0[V * b + p] = x[0];
            x0[cols + V * b + p] = x[1];
            if ch > 1 {
                x0[G1 * b + p] = 1.0;
                x0[cols + G2 * b + p] = 1.0;
            }
        }

        let mut inputs = Vec::with_capacity(last + 1);
        let mut pre = Vec::with_capacity(last);
        let mut d_all = Vec::with_capacity(last);
        let mut dd_all = Vec::with_capacity(last);
        inputs.push(x0);
        let mut output = Vec::new();

        for l in 0..=last {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut z = vec![0.0; n_out * cols];
            gemm_acc(net.weights(l), n_out, n_in, &inputs[l], cols, &mut z);
            for (i, &bi) in net.bias(l).iter().enumerate() {
                for zv in &mut z[i * cols..i * cols + b] {
                    *zv += bi;
                }
            }
            if l == last {
                output = z;
                break;
            }
            let mut act = vec![0.0; n_out * cols];
            let mut d = vec![0.0; n_out * b];
            let mut dd = if jet == Jet::Hessian { vec![0.0; n_out * b] } else { Vec::new() };
            for i in 0..n_out {
                let zr = &z[i * cols..(i + 1) * cols];
                let ar = &mut act[i * cols..(i + 1) * cols];
                for p in 0..b {
                    let s = math::tanh(zr[p]);
                    let dp = -(s * s) + 1.0;
                    ar[p] = s;
                    d[i * b + p] = dp;
                    if ch > 1 {
                        let (g1, g2) = (zr[G1 * b + p], zr[G2 * b + p]);
                        ar[G1 * b + p] = dp * g1;
                        ar[G2 * b + p] = dp * g2;
                        if jet == Jet::Hessian {
                            let ddp = (-2.0 * s) * dp;
                            dd[i * b + p] = ddp;
                            ar[H11 * b + p] = dp * zr[H11 * b + p] + ddp * (g1 * g1);
                            ar[H12 * b + p] = dp * zr[H12 * b + p] + ddp * (g1 * g2);
                            ar[H22 * b + p] = dp * zr[H22 * b + p] + ddp * (g2 * g2);
                        }
                    }
                }
            }
            pre.push(z);
            d_all.push(d);
            dd_all.push(dd);
            inputs.push(act);
        }
        Self { jet, points: b, inputs, pre, d: d_all, dd: dd_all, output }
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn jet(&self) -> Jet {
        self.jet
    }

    /// Network outputs, one per point.
    pub fn values(&self) -> &[f64] {
        &self.output[..self.points]
    }

    /// Input gradient at point `p` (requires a gradient or Hessian jet).
    pub fn gradient(&self, p: usize) -> [f64; 2] {
        assert!(self.jet != Jet::Value, "value-only batch has no gradient");
        [self.output[G1 * self.points + p], self.output[G2 * self.points + p]]
    }

    /// Input Hessian `[xx, xy, yy]` at point `p` (requires a Hessian jet).
    pub fn hessian(&self, p: usize) -> [f64; 3] {
        assert!(self.jet == Jet::Hessian, "batch has no Hessian");
        let b = self.points;
        [self.output[H11 * b + p], self.output[H12 * b + p], self.output[H22 * b + p]]
    }

    /// `hess_xx + hess_yy` at point `p`.
    pub fn laplacian(&self, p: usize) -> f64 {
        let h = self.hessian(p);
        h[0] + h[2]
    }

    /// Accumulates into `grad` the parameter gradient of
    /// `Σ_p adj_value[p]·u(x_p) + adj_laplacian[p]·Δu(x_p)`.
    pub fn backward(&self, net: &Mlp, adj_value: Option<&[f64]>, adj_laplacian: Option<&[f64]>, grad: &mut [f64]) {
        let b = self.points;
        let ch = self.jet.channels();
        let cols = ch * b;
        let sizes = net.layer_sizes();
        let last = net.num_layers() - 1;
        assert_eq!(grad.len(), net.num_params());

        let mut adj = vec![0.0; cols];
        if let Some(av) = adj_value {
            adj[..b].copy_from_slice(av);
        }
        if let Some(al) = adj_laplacian {
            assert!(self.jet == Jet::Hessian, "Laplacian adjoint needs a Hessian jet");
            adj[H11 * b..H11 * b + b].copy_from_slice(al);
            adj[H22 * b..H22 * b + b].copy_from_slice(al);
        }

        for l in (0..=last).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            if l < last {
                self.tanh_backward(l, n_out, &mut adj);
            }
            let x = &self.inputs[l];
            let gw_off = net.weight_offset(l);
            let gb_off = net.bias_offset(l);
            grad_weights(&adj, x, n_out, n_in, cols, &mut grad[gw_off..gw_off + n_out * n_in]);
            for i in 0..n_out {
                grad[gb_off + i] += sum(&adj[i * cols..i * cols + b]);
            }
            if l > 0 {
                let mut adj_in = vec![0.0; n_in * cols];
                gemm_t_acc(net.weights(l), n_out, n_in, &adj, cols, &mut adj_in);
                adj = adj_in;
            }
        }
    }

    /// Turns the adjoint of hidden layer `l`'s activations into the adjoint
    /// of its pre-activations, in place.
    fn tanh_backward(&self, l: usize, rows: usize, adj: &mut [f64]) {
        let b = self.points;
        let cols = self.jet.channels() * b;
        let (z, d, act) = (&self.pre[l], &self.d[l], &self.inputs[l + 1]);
        for i in 0..rows {
            let zr = &z[i * cols..(i + 1) * cols];
            let ar = &mut adj[i * cols..(i + 1) * cols];
            for p in 0..b {
                let s = act[i * cols + p];
                let dp = d[i * b + p];
                let mut adj_d = 0.0;
                let mut adj_dd = 0.0;
                if self.jet != Jet::Value {
                    let (g1, g2) = (zr[G1 * b + p], zr[G2 * b + p]);
                    let (ag1, ag2) = (ar[G1 * b + p], ar[G2 * b + p]);
                    adj_d += ag1 * g1 + ag2 * g2;
                    let mut adj_g1 = dp * ag1;
                    let mut adj_g2 = dp * ag2;
                    if self.jet == Jet::Hessian {
                        let ddp = self.dd[l][i * b + p];
                        let (a11, a12, a22) = (ar[H11 * b + p], ar[H12 * b + p], ar[H22 * b + p]);
                        adj_d += a11 * zr[H11 * b + p] + a12 * zr[H12 * b + p] + a22 * zr[H22 * b + p];
                        adj_dd = a11 * (g1 * g1) + a12 * (g1 * g2) + a22 * (g2 * g2);
                        adj_g1 += ddp * (2.0 * g1 * a11 + g2 * a12);
                        adj_g2 += ddp * (2.0 * g2 * a22 + g1 * a12);
                        ar[H11 * b + p] = dp * a11;
                        ar[H12 * b + p] = dp * a12;
                        ar[H22 * b + p] = dp * a22;
                    }
                    ar[G1 * b + p] = adj_g1;
                    ar[G2 * b + p] = adj_g2;
                }
                // dd = (-2 s) d and d = 1 - s²
                adj_d += adj_dd * (-2.0 * s);
                let adj_s = ar[p] + adj_dd * (-2.0 * dp) + adj_d * (-2.0 * s);
                ar[p] = adj_s * dp;
            }
        }
    }
}

/// `z (m × cols) += W (m × n) · x (n × cols)`, accumulating over `k` in
/// order so every entry matches a left-to-right dot product.
fn gemm_acc(w: &[f64], m: usize, n: usize, x: &[f64], cols: usize, z: &mut [f64]) {
    for i in 0..m {
        let zr = &mut z[i * cols..(i + 1) * cols];
        for k in 0..n {
            let wik = w[i * n + k];
            let xr = &x[k * cols..(k + 1) * cols];
            for (zv, xv) in zr.iter_mut().zip(xr) {
                *zv += wik * xv;
            }
        }
    }
}

/// `out (n × cols) += Wᵀ · adj (m × cols)`.
fn gemm_t_acc(w: &[f64], m: usize, n: usize, adj: &[f64], cols: usize, out: &mut [f64]) {
    for i in 0..m {
        let ar = &adj[i * cols..(i + 1) * cols];
        for k in 0..n {
            let wik = w[i * n + k];
            let or = &mut out[k * cols..(k + 1) * cols];
            for (ov, av) in or.iter_mut().zip(ar) {
                *ov += wik * av;
            }
        }
    }
}

/// `gw[i, k] += ⟨adj_i, x_k⟩`.
fn grad_weights(adj: &[f64], x: &[f64], m: usize, n: usize, cols: usize, gw: &mut [f64]) {
    for i in 0..m {
        let ar = &adj[i * cols..(i + 1) * cols];
        for k in 0..n {
            gw[i * n + k] += dot(ar, &x[k * cols..(k + 1) * cols]);
        }
    }
}

/// Dot product with four interleaved partial sums (fixed order, so still
/// deterministic).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sum(a: &[f64]) -> f64 {
    a.iter().sum()
}
