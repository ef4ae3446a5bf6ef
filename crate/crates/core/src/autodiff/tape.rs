//! Reverse-mode automatic differentiation over a vector-valued Wengert tape.
//!
//! Every node holds a flat `Vec<f64>`. Operations are appended in evaluation
//! order, so an input id is always smaller than the id of the node that reads
//! it, and the backward sweep is a single reverse pass over the node list.
//!
//! Binary elementwise operations broadcast a length-1 operand against a
//! vector operand. Any other length mismatch is a programming error and
//! panics at record time.

use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    LinComb(Vec<(f64, Var)>),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    PowConst(Var, f64),
    Clamp(Var, f64, f64),
    Sum(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Gather(Var, Vec<usize>),
    Linear {
        x: Var,
        w: Var,
        b: Var,
        batch: usize,
        fan_in: usize,
        fan_out: usize,
    },
    SquaredError(Var, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Append-only computation graph.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn broadcast_len(a: usize, b: usize) -> usize {
    match (a, b) {
        (x, y) if x == y => x,
        (1, y) => y,
        (x, 1) => x,
        (x, y) => panic!("cannot broadcast lengths {x} and {y}"),
    }
}

#[inline]
fn at(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for positive arguments.
pub(crate) fn softplus_inv(y: f64) -> f64 {
    assert!(y > 0.0, "softplus inverse needs a positive argument");
    // ln(exp(y) - 1), rewritten to stay finite for large y
    y + (-(-y).exp_m1()).ln()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Drops every node recorded after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "node {} is not scalar", v.0);
        val[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter, state or constant).
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.leaf(vec![value])
    }

    /// Copies the current value into a fresh leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).to_vec();
        self.leaf(value)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (va, vb) = (self.value(a), self.value(b));
        let n = broadcast_len(va.len(), vb.len());
        (0..n).map(|i| f(at(va, i), at(vb, i))).collect()
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.value(a).iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x / y);
        self.push(Op::Div(a, b), v)
    }

    /// `sum_k coef_k * x_k` over equally long operands.
    pub fn lincomb(&mut self, terms: &[(f64, Var)]) -> Var {
        assert!(!terms.is_empty(), "empty linear combination");
        let n = self.value(terms[0].1).len();
        let mut out = vec![0.0; n];
        for &(coef, x) in terms {
            let xv = self.value(x);
            assert_eq!(xv.len(), n, "linear combination length mismatch");
            for (o, &xi) in out.iter_mut().zip(xv) {
                *o += coef * xi;
            }
        }
        self.push(Op::LinComb(terms.to_vec()), out)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.unary(a, |x| k * x);
        self.push(Op::Scale(a, k), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.unary(a, |x| x + k);
        self.push(Op::AddScalar(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.unary(a, f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.unary(a, sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.unary(a, softplus);
        self.push(Op::Softplus(a), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.unary(a, f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.unary(a, f64::ln);
        self.push(Op::Ln(a), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.unary(a, |x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let v = self.unary(a, |x| x.powf(p));
        self.push(Op::PowConst(a, p), v)
    }

    /// Elementwise clamp; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.unary(a, |x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(Op::Sum(a), vec![s])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        self.push(Op::Concat(parts.to_vec()), out)
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a)[start..start + len].to_vec();
        self.push(Op::Slice(a, start), v)
    }

    /// Selects entries by index; repeated indices accumulate gradient.
    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Var {
        let va = self.value(a);
        let v = indices.iter().map(|&i| va[i]).collect();
        self.push(Op::Gather(a, indices.to_vec()), v)
    }

    /// Dense layer applied to a row-major `batch x fan_in` input.
    ///
    /// `w` is row-major `fan_out x fan_in`, `b` has length `fan_out`; the
    /// output is row-major `batch x fan_out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var, fan_in: usize, fan_out: usize) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(wv.len(), fan_in * fan_out, "weight shape");
        assert_eq!(bv.len(), fan_out, "bias shape");
        assert_eq!(xv.len() % fan_in, 0, "input not a multiple of fan_in");
        let batch = xv.len() / fan_in;
        let mut out = Vec::with_capacity(batch * fan_out);
        for row in xv.chunks_exact(fan_in) {
            for (o, wrow) in wv.chunks_exact(fan_in).enumerate() {
                let dot: f64 = row.iter().zip(wrow).map(|(a, b)| a * b).sum();
                out.push(dot + bv[o]);
            }
        }
        self.push(
            Op::Linear {
                x,
                w,
                b,
                batch,
                fan_in,
                fan_out,
            },
            out,
        )
    }

    /// `sum_i (x_i - target_i)^2` as a scalar node.
    pub fn squared_error(&mut self, x: Var, target: &[f64]) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.len(), target.len(), "squared error length mismatch");
        let s = xv.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        self.push(Op::SquaredError(x, target.to_vec()), vec![s])
    }

    /// Reverse sweep from a scalar output node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = output.0;
        if out >= self.nodes.len() {
            return Err(Error::Graph(format!(
                "output node {out} out of range for a tape of {} nodes",
                self.nodes.len()
            )));
        }
        if self.nodes[out].value.len() != 1 {
            return Err(Error::Graph(format!(
                "output node {out} has {} components, expected a scalar",
                self.nodes[out].value.len()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; out + 1];
        grads[out] = Some(vec![1.0]);

        for id in (0..=out).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, y: &[f64], g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        // Accumulate `contrib(i)` into the gradient of `target`, reducing over
        // broadcast positions when the target is a length-1 operand.
        let mut acc = |target: Var, contrib: &dyn Fn(usize) -> f64, n: usize| {
            let len = self.nodes[target.0].value.len();
            let slot = grads[target.0].get_or_insert_with(|| vec![0.0; len]);
            if len == n {
                for (i, s) in slot.iter_mut().enumerate() {
                    *s += contrib(i);
                }
            } else {
                slot[0] += (0..n).map(contrib).sum::<f64>();
            }
        };
        let n = g.len();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &|i| g[i], n);
                acc(*b, &|i| g[i], n);
            }
            Op::Sub(a, b) => {
                acc(*a, &|i| g[i], n);
                acc(*b, &|i| -g[i], n);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                acc(*a, &|i| g[i] * at(vb, i), n);
                acc(*b, &|i| g[i] * at(va, i), n);
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                acc(*a, &|i| g[i] / at(vb, i), n);
                acc(*b, &|i| -g[i] * at(va, i) / (at(vb, i) * at(vb, i)), n);
            }
            Op::LinComb(terms) => {
                for &(coef, x) in terms {
                    acc(x, &|i| coef * g[i], n);
                }
            }
            Op::Scale(a, k) => acc(*a, &|i| k * g[i], n),
            Op::AddScalar(a) => acc(*a, &|i| g[i], n),
            Op::Tanh(a) => acc(*a, &|i| g[i] * (1.0 - y[i] * y[i]), n),
            Op::Sigmoid(a) => acc(*a, &|i| g[i] * y[i] * (1.0 - y[i]), n),
            Op::Softplus(a) => {
                let x = self.value(*a);
                acc(*a, &|i| g[i] * sigmoid(x[i]), n)
            }
            Op::Exp(a) => acc(*a, &|i| g[i] * y[i], n),
            Op::Ln(a) => {
                let x = self.value(*a);
                acc(*a, &|i| g[i] / x[i], n)
            }
            Op::Square(a) => {
                let x = self.value(*a);
                acc(*a, &|i| 2.0 * x[i] * g[i], n)
            }
            Op::PowConst(a, p) => {
                let x = self.value(*a);
                acc(*a, &|i| g[i] * p * x[i].powf(p - 1.0), n)
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a);
                acc(
                    *a,
                    &|i| if x[i] < *lo || x[i] > *hi { 0.0 } else { g[i] },
                    n,
                )
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                acc(*a, &|_| g[0], len)
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    acc(p, &|i| g[offset + i], len);
                    offset += len;
                }
            }
            Op::Slice(a, start) => {
                let len = self.value(*a).len();
                let slot = grads[a.0].get_or_insert_with(|| vec![0.0; len]);
                for (s, gi) in slot[*start..*start + n].iter_mut().zip(g) {
                    *s += gi;
                }
            }
            Op::Gather(a, indices) => {
                let len = self.value(*a).len();
                let slot = grads[a.0].get_or_insert_with(|| vec![0.0; len]);
                for (&i, gi) in indices.iter().zip(g) {
                    slot[i] += gi;
                }
            }
            Op::Linear {
                x,
                w,
                b,
                batch,
                fan_in,
                fan_out,
            } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (batch, fan_in, fan_out) = (*batch, *fan_in, *fan_out);
                {
                    let gx = grads[x.0].get_or_insert_with(|| vec![0.0; batch * fan_in]);
                    for r in 0..batch {
                        let grow = &g[r * fan_out..(r + 1) * fan_out];
                        let gxrow = &mut gx[r * fan_in..(r + 1) * fan_in];
                        for (o, &go) in grow.iter().enumerate() {
                            let wrow = &wv[o * fan_in..(o + 1) * fan_in];
                            for (s, &wi) in gxrow.iter_mut().zip(wrow) {
                                *s += go * wi;
                            }
                        }
                    }
                }
                {
                    let gw = grads[w.0].get_or_insert_with(|| vec![0.0; fan_in * fan_out]);
                    for r in 0..batch {
                        let xrow = &xv[r * fan_in..(r + 1) * fan_in];
                        for o in 0..fan_out {
                            let go = g[r * fan_out + o];
                            let gwrow = &mut gw[o * fan_in..(o + 1) * fan_in];
                            for (s, &xi) in gwrow.iter_mut().zip(xrow) {
                                *s += go * xi;
                            }
                        }
                    }
                }
                let gb = grads[b.0].get_or_insert_with(|| vec![0.0; fan_out]);
                for r in 0..batch {
                    for o in 0..fan_out {
                        gb[o] += g[r * fan_out + o];
                    }
                }
            }
            Op::SquaredError(a, target) => {
                let x = self.value(*a);
                acc(*a, &|i| 2.0 * (x[i] - target[i]) * g[0], target.len())
            }
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` does not reach the output.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Vec<f64> {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => vec![0.0; tape.value(v).len()],
        }
    }
}
