//! Scalar reverse-mode tape with second-order input derivatives.
//!
//! A [`Tape`] is an append-only Wengert list. Every node stores its value,
//! the indices of its operands and the local partial derivative with
//! respect to each operand; operands always precede the node, so a single
//! backward pass in reverse index order yields all adjoints.
//!
//! Input derivatives of the network (needed for the Laplacian in the
//! interior residual) are carried forward as [`Dual2`] triples whose six
//! components are themselves tape nodes. A reverse sweep from a loss built
//! out of those components therefore differentiates through the input
//! Hessian with respect to the parameters ("forward over reverse").

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::error::{bail, Result};
use crate::math;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a scalar node on a specific [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    tape: u32,
    index: u32,
}

impl Node {
    /// Position of the node on its tape.
    pub fn index(self) -> usize {
        self.index as usize
    }
}

/// Operation that produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Constant,
    Param,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,
    AddConst,
    Square,
    Tanh,
    Sum,
    /// `Σ_k w_k x_k (+ b)`, one operand per factor.
    Affine,
}

/// Append-only record of scalar operations.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    kinds: Vec<OpKind>,
    values: Vec<f64>,
    /// `operands[op_start[k]..op_start[k + 1]]` belong to node `k`.
    op_start: Vec<u32>,
    operands: Vec<u32>,
    partials: Vec<f64>,
    params: Vec<u32>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            kinds: Vec::new(),
            values: Vec::new(),
            op_start: vec![0],
            operands: Vec::new(),
            partials: Vec::new(),
            params: Vec::new(),
        }
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of registered parameter leaves.
    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn value(&self, n: Node) -> f64 {
        debug_assert!(self.owns(n));
        self.values[n.index()]
    }

    pub fn kind(&self, n: Node) -> OpKind {
        self.kinds[n.index()]
    }

    /// Operand indices of a node (all strictly smaller than its own index).
    pub fn operands(&self, n: Node) -> &[u32] {
        let k = n.index();
        &self.operands[self.op_start[k] as usize..self.op_start[k + 1] as usize]
    }

    /// Whether `n` was created on this tape.
    pub fn owns(&self, n: Node) -> bool {
        n.tape == self.id && n.index() < self.values.len()
    }

    fn push(&mut self, kind: OpKind, value: f64, ops: &[(Node, f64)]) -> Node {
        for &(o, d) in ops {
            debug_assert!(self.owns(o), "operand from a foreign tape");
            self.operands.push(o.index);
            self.partials.push(d);
        }
        self.finish(kind, value)
    }

    fn finish(&mut self, kind: OpKind, value: f64) -> Node {
        let index = self.values.len() as u32;
        self.kinds.push(kind);
        self.values.push(value);
        self.op_start.push(self.operands.len() as u32);
        Node { tape: self.id, index }
    }

    pub fn constant(&mut self, value: f64) -> Node {
        self.push(OpKind::Constant, value, &[])
    }

    /// Registers a trainable leaf. Parameters are numbered in registration
    /// order; [`Tape::grad_params`] returns gradients in that order.
    pub fn param(&mut self, value: f64) -> Node {
        let n = self.push(OpKind::Param, value, &[]);
        self.params.push(n.index);
        n
    }

    pub fn add(&mut self, a: Node, b: Node) -> Node {
        let v = self.value(a) + self.value(b);
        self.push(OpKind::Add, v, &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Node, b: Node) -> Node {
        let v = self.value(a) - self.value(b);
        self.push(OpKind::Sub, v, &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Node, b: Node) -> Node {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(OpKind::Mul, va * vb, &[(a, vb), (b, va)])
    }

    pub fn neg(&mut self, a: Node) -> Node {
        let v = -self.value(a);
        self.push(OpKind::Neg, v, &[(a, -1.0)])
    }

    /// `c * a` for a constant `c`.
    pub fn scale(&mut self, a: Node, c: f64) -> Node {
        let v = c * self.value(a);
        self.push(OpKind::Scale, v, &[(a, c)])
    }

    /// `a + c` for a constant `c`.
    pub fn add_const(&mut self, a: Node, c: f64) -> Node {
        let v = self.value(a) + c;
        self.push(OpKind::AddConst, v, &[(a, 1.0)])
    }

    pub fn square(&mut self, a: Node) -> Node {
        let va = self.value(a);
        self.push(OpKind::Square, va * va, &[(a, 2.0 * va)])
    }

    pub fn tanh(&mut self, a: Node) -> Node {
        let s = math::tanh(self.value(a));
        self.push(OpKind::Tanh, s, &[(a, 1.0 - s * s)])
    }

    /// Left-to-right sum of `terms` (0 for an empty slice).
    pub fn sum(&mut self, terms: &[Node]) -> Node {
        let mut acc = 0.0;
        for &t in terms {
            acc += self.value(t);
            self.operands.push(t.index);
            self.partials.push(1.0);
        }
        self.finish(OpKind::Sum, acc)
    }

    /// `Σ_k w_k x_k`, plus `bias` when given. The sum is accumulated left to
    /// right from zero and the bias is added last, matching the plain and
    /// batched network evaluations bit for bit.
    pub fn affine(&mut self, w: &[Node], x: &[Node], bias: Option<Node>) -> Result<Node> {
        if w.len() != x.len() {
            bail!(Structural, "affine: {} weights for {} inputs", w.len(), x.len());
        }
        let mut acc = 0.0;
        for (&wk, &xk) in w.iter().zip(x) {
            let (vw, vx) = (self.value(wk), self.value(xk));
            acc += vw * vx;
            self.operands.push(wk.index);
            self.partials.push(vx);
            self.operands.push(xk.index);
            self.partials.push(vw);
        }
        if let Some(b) = bias {
            acc += self.value(b);
            self.operands.push(b.index);
            self.partials.push(1.0);
        }
        Ok(self.finish(OpKind::Affine, acc))
    }

    /// Adjoint of every node with respect to `output`.
    pub fn adjoints(&self, output: Node) -> Result<Vec<f64>> {
        if !self.owns(output) {
            bail!(Structural, "node {} is not on tape {}", output.index, self.id);
        }
        let mut adj = vec![0.0; output.index() + 1];
        adj[output.index()] = 1.0;
        for k in (0..=output.index()).rev() {
            let a = adj[k];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (self.op_start[k] as usize, self.op_start[k + 1] as usize);
            for (&o, &d) in self.operands[s..e].iter().zip(&self.partials[s..e]) {
                adj[o as usize] += a * d;
            }
        }
        adj.resize(self.len(), 0.0);
        Ok(adj)
    }

    /// Gradient of `loss` with respect to the registered parameters, in
    /// registration order.
    pub fn grad_params(&self, loss: Node) -> Result<Vec<f64>> {
        let adj = self.adjoints(loss)?;
        Ok(self.params.iter().map(|&p| adj[p as usize]).collect())
    }
}

/// Row-major matrix of tape nodes.
#[derive(Clone, Debug)]
pub struct NodeMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Node>,
}

impl NodeMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Node>) -> Result<Self> {
        if data.len() != rows * cols {
            bail!(Structural, "{}x{} matrix from {} nodes", rows, cols, data.len());
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[Node] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Value, input gradient and input Hessian of a scalar function of a point
/// in the plane. The Hessian is stored as `[xx, xy, yy]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dual2 {
    pub value: Node,
    pub grad: [Node; 2],
    pub hess: [Node; 3],
}

impl Dual2 {
    /// A quantity that does not depend on the input point.
    pub fn constant(tape: &mut Tape, value: f64) -> Self {
        let v = tape.constant(value);
        let z = tape.constant(0.0);
        Self { value: v, grad: [z, z], hess: [z, z, z] }
    }

    /// The two coordinate functions `x1`, `x2` evaluated at `x`.
    pub fn seed(tape: &mut Tape, x: [f64; 2]) -> [Self; 2] {
        let zero = tape.constant(0.0);
        let one = tape.constant(1.0);
        let x1 = tape.constant(x[0]);
        let x2 = tape.constant(x[1]);
        [
            Self { value: x1, grad: [one, zero], hess: [zero; 3] },
            Self { value: x2, grad: [zero, one], hess: [zero; 3] },
        ]
    }

    /// `∂²/∂x1² + ∂²/∂x2²` as a new node.
    pub fn laplacian(&self, tape: &mut Tape) -> Node {
        tape.add(self.hess[0], self.hess[2])
    }

    /// Current numeric values `(value, grad, hess)`.
    pub fn values(&self, tape: &Tape) -> (f64, [f64; 2], [f64; 3]) {
        (
            tape.value(self.value),
            [tape.value(self.grad[0]), tape.value(self.grad[1])],
            [tape.value(self.hess[0]), tape.value(self.hess[1]), tape.value(self.hess[2])],
        )
    }
}

/// Applies `a ↦ W a + b` to a column of triples: the value goes through the
/// affine map, gradient and Hessian components through the linear part.
pub fn dual2_affine(tape: &mut Tape, w: &NodeMatrix, b: &[Node], a: &[Dual2]) -> Result<Vec<Dual2>> {
    if w.cols != a.len() || w.rows != b.len() {
        bail!(
            Structural,
            "affine layer {}x{} with bias {} applied to {} inputs",
            w.rows,
            w.cols,
            b.len(),
            a.len()
        );
    }
    let mut column = Vec::with_capacity(a.len());
    let mut out = Vec::with_capacity(w.rows);
    let mut component = |tape: &mut Tape, row: &[Node], pick: &dyn Fn(&Dual2) -> Node, bias: Option<Node>| {
        column.clear();
        column.extend(a.iter().map(pick));
        tape.affine(row, &column, bias)
    };
    for (i, &bi) in b.iter().enumerate() {
        let row = w.row(i);
        let value = component(tape, row, &|d| d.value, Some(bi))?;
        let g0 = component(tape, row, &|d| d.grad[0], None)?;
        let g1 = component(tape, row, &|d| d.grad[1], None)?;
        let h0 = component(tape, row, &|d| d.hess[0], None)?;
        let h1 = component(tape, row, &|d| d.hess[1], None)?;
        let h2 = component(tape, row, &|d| d.hess[2], None)?;
        out.push(Dual2 { value, grad: [g0, g1], hess: [h0, h1, h2] });
    }
    Ok(out)
}

/// Chain rule of `tanh` through a triple: with `s = tanh v`,
/// `d = 1 - s²` and `dd = -2 s d`,
/// `grad' = d grad` and `hess' = d hess + dd grad ⊗ grad`.
pub fn dual2_tanh(tape: &mut Tape, a: &Dual2) -> Dual2 {
    let s = tape.tanh(a.value);
    let s2 = tape.square(s);
    let neg_s2 = tape.neg(s2);
    let d = tape.add_const(neg_s2, 1.0);
    let m2s = tape.scale(s, -2.0);
    let dd = tape.mul(m2s, d);

    let g0 = tape.mul(d, a.grad[0]);
    let g1 = tape.mul(d, a.grad[1]);

    let hess_entry = |tape: &mut Tape, h: Node, p: Node, q: Node| {
        let lin = tape.mul(d, h);
        let pq = tape.mul(p, q);
        let quad = tape.mul(dd, pq);
        tape.add(lin, quad)
    };
    let h0 = hess_entry(tape, a.hess[0], a.grad[0], a.grad[0]);
    let h1 = hess_entry(tape, a.hess[1], a.grad[0], a.grad[1]);
    let h2 = hess_entry(tape, a.hess[2], a.grad[1], a.grad[1]);
    Dual2 { value: s, grad: [g0, g1], hess: [h0, h1, h2] }
}
