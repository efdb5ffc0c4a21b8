//! Wengert-list reverse-mode differentiation.
//!
//! A [`Tape`] records every executed operation as a node holding its output
//! tensor and enough structure to replay the computation backwards. [`Var`]
//! is a cheap handle (tape id + node index) to a recorded value. Every
//! forward operation has an analytic adjoint; [`Tape::backward`] visits the
//! nodes exactly once in reverse execution order and accumulates gradients
//! into the nodes whose subgraph contains a trainable leaf.

use std::sync::atomic::{AtomicU64, Ordering};

use super::gemm::matmul_acc;
use super::tensor::Tensor;
use crate::error::{Error, Result};

static TAPE_IDS: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddRow { a: usize, row: usize },
    Scale { a: usize, c: f64 },
    AddConst { a: usize },
    Neg { a: usize },
    Exp { a: usize },
    Relu { a: usize },
    Square { a: usize },
    Sigmoid { a: usize },
    Sum { a: usize, axis: Option<usize> },
    Mean { a: usize, axis: Option<usize> },
    /// `clamped` marks entries whose raw expansion went nonpositive (or the
    /// forced-zero self diagonal); those entries pass no gradient.
    PairwiseSqDists {
        a: usize,
        b: usize,
        clamped: Vec<bool>,
    },
    /// Caches the matrix inverse computed from the Cholesky factor; the
    /// adjoint of log det for a symmetric input is the inverse itself.
    LogDetSpd { a: usize, inv: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
    op: Op,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: TAPE_IDS.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape == self.id && v.index < self.nodes.len() {
            Ok(v.index)
        } else {
            Err(Error::NotOnTape)
        }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    /// Records a constant input; no gradient is tracked through it.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a trainable input; `backward` leaves its gradient on the tape.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.check(v).expect("var from another tape")].value
    }

    /// Gradient of the last `backward` target with respect to `v`, if the
    /// node participated in that graph.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        let i = self.check(v).ok()?;
        self.nodes[i].grad.as_deref()
    }

    // ---- forward operations ------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (sa, sb) = (self.nodes[ia].value.shape(), self.nodes[ib].value.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, p) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * p];
        matmul_acc(
            self.nodes[ia].value.values(),
            self.nodes[ib].value.values(),
            &mut out,
            m,
            k,
            p,
            false,
            false,
            1.0,
        );
        let needs = self.needs(ia) || self.needs(ib);
        Ok(self.push(
            Tensor::new(vec![m, p], out)?,
            Op::MatMul { a: ia, b: ib },
            needs,
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let s = self.nodes[ia].value.shape();
        if s.len() != 2 {
            return Err(Error::shape("transpose", s, &[]));
        }
        let (r, c) = (s[0], s[1]);
        let v = self.nodes[ia].value.values();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        let needs = self.needs(ia);
        Ok(self.push(Tensor::new(vec![c, r], out)?, Op::Transpose { a: ia }, needs))
    }

    /// Shapes must be identical, or one side a scalar broadcast over the other.
    fn binary(
        &mut self,
        context: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(usize, usize) -> Op,
    ) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let out = if ta.shape() == tb.shape() {
            let vals = ta
                .values()
                .iter()
                .zip(tb.values())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::new(ta.shape().to_vec(), vals)?
        } else if ta.is_scalar() {
            let x = ta.values()[0];
            Tensor::new(tb.shape().to_vec(), tb.values().iter().map(|&y| f(x, y)).collect())?
        } else if tb.is_scalar() {
            let y = tb.values()[0];
            Tensor::new(ta.shape().to_vec(), ta.values().iter().map(|&x| f(x, y)).collect())?
        } else {
            return Err(Error::shape(context, ta.shape(), tb.shape()));
        };
        let needs = self.needs(ia) || self.needs(ib);
        Ok(self.push(out, op(ia, ib), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, |a, b| Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    /// Broadcasts a length-d row vector over every row of an n x d matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ia, ir) = (self.check(a)?, self.check(row)?);
        let (sa, sr) = (self.nodes[ia].value.shape(), self.nodes[ir].value.shape());
        if sa.len() != 2 || sr.len() != 1 || sa[1] != sr[0] {
            return Err(Error::shape("add_row", sa, sr));
        }
        let (n, d) = (sa[0], sa[1]);
        let av = self.nodes[ia].value.values();
        let rv = self.nodes[ir].value.values();
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                out[i * d + j] = av[i * d + j] + rv[j];
            }
        }
        let needs = self.needs(ia) || self.needs(ir);
        Ok(self.push(
            Tensor::new(vec![n, d], out)?,
            Op::AddRow { a: ia, row: ir },
            needs,
        ))
    }

    fn unary(
        &mut self,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: impl FnOnce(usize) -> Op,
    ) -> Result<Var> {
        let ia = self.check(a)?;
        let t = &self.nodes[ia].value;
        let out = Tensor::new(t.shape().to_vec(), t.values().iter().map(|&x| f(x)).collect())?;
        let needs = self.needs(ia);
        Ok(self.push(out, op(ia), needs))
    }

    /// Multiplies by a compile-time constant; `c` itself is not differentiated.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| c * x, |a| Op::Scale { a, c })
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| x + c, |a| Op::AddConst { a })
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| -x, |a| Op::Neg { a })
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::exp, |a| Op::Exp { a })
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.max(0.0), |a| Op::Relu { a })
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x * x, |a| Op::Square { a })
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), |a| Op::Sigmoid { a })
    }

    fn reduce(&mut self, a: Var, axis: Option<usize>, mean: bool) -> Result<Var> {
        let ia = self.check(a)?;
        let t = &self.nodes[ia].value;
        let out = match axis {
            None => {
                let s: f64 = t.values().iter().sum();
                Tensor::scalar(if mean { s / t.len() as f64 } else { s })
            }
            Some(ax) => {
                let shape = t.shape();
                if ax >= shape.len() {
                    return Err(Error::AxisOutOfRange {
                        axis: ax,
                        rank: shape.len(),
                    });
                }
                let outer: usize = shape[..ax].iter().product();
                let axn = shape[ax];
                let inner: usize = shape[ax + 1..].iter().product();
                let mut vals = vec![0.0; outer * inner];
                let v = t.values();
                for o in 0..outer {
                    for x in 0..axn {
                        let base = (o * axn + x) * inner;
                        for i in 0..inner {
                            vals[o * inner + i] += v[base + i];
                        }
                    }
                }
                if mean {
                    for v in &mut vals {
                        *v /= axn as f64;
                    }
                }
                let mut out_shape = shape.to_vec();
                out_shape.remove(ax);
                Tensor::new(out_shape, vals)?
            }
        };
        let needs = self.needs(ia);
        let op = if mean {
            Op::Mean { a: ia, axis }
        } else {
            Op::Sum { a: ia, axis }
        };
        Ok(self.push(out, op, needs))
    }

    /// Sum over all elements (axis None, giving a scalar) or along one axis.
    pub fn sum(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(a, axis, false)
    }

    pub fn mean(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(a, axis, true)
    }

    /// Entry (i,j) = ||a_i - b_j||^2 via the expansion
    /// ||a_i||^2 + ||b_j||^2 - 2<a_i, b_j>, clamped at 0. When both handles
    /// name the same node the diagonal is forced to exactly 0.
    pub fn pairwise_sq_dists(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (sa, sb) = (self.nodes[ia].value.shape(), self.nodes[ib].value.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::shape("pairwise_sq_dists", sa, sb));
        }
        let (m, n, d) = (sa[0], sb[0], sa[1]);
        let av = self.nodes[ia].value.values();
        let bv = self.nodes[ib].value.values();
        let mut out = vec![0.0; m * n];
        matmul_acc(av, bv, &mut out, m, d, n, false, true, -2.0);
        let a_norm: Vec<f64> = (0..m)
            .map(|i| av[i * d..(i + 1) * d].iter().map(|x| x * x).sum())
            .collect();
        let b_norm: Vec<f64> = (0..n)
            .map(|j| bv[j * d..(j + 1) * d].iter().map(|x| x * x).sum())
            .collect();
        let mut clamped = vec![false; m * n];
        for i in 0..m {
            for j in 0..n {
                let idx = i * n + j;
                let raw = out[idx] + a_norm[i] + b_norm[j];
                if raw <= 0.0 || (ia == ib && i == j) {
                    out[idx] = 0.0;
                    clamped[idx] = true;
                } else {
                    out[idx] = raw;
                }
            }
        }
        let needs = self.needs(ia) || self.needs(ib);
        Ok(self.push(
            Tensor::new(vec![m, n], out)?,
            Op::PairwiseSqDists {
                a: ia,
                b: ib,
                clamped,
            },
            needs,
        ))
    }

    /// log det of a symmetric positive-definite matrix via Cholesky.
    pub fn logdet_spd(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let s = self.nodes[ia].value.shape();
        if s.len() != 2 || s[0] != s[1] {
            return Err(Error::shape("logdet_spd", s, &[]));
        }
        let d = s[0];
        let l = cholesky(d, self.nodes[ia].value.values()).ok_or_else(|| {
            Error::RegularizerDegenerate("matrix is not positive definite".into())
        })?;
        let logdet = 2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>();
        let inv = spd_inverse_from_cholesky(d, &l);
        let needs = self.needs(ia);
        Ok(self.push(Tensor::scalar(logdet), Op::LogDetSpd { a: ia, inv }, needs))
    }

    // ---- reverse pass ------------------------------------------------------

    /// Populates gradients of `loss` with respect to every participating
    /// node; `loss` must be a scalar recorded on this tape.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = self.check(loss)?;
        if !self.nodes[root].value.is_scalar() {
            return Err(Error::NotScalar {
                context: "backward",
                shape: self.nodes[root].value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(vec![1.0]);
        // Inputs always precede their consumers, so a single reverse sweep
        // sees every node's full gradient before distributing it.
        for idx in (0..=root).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.distribute(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            node.grad = g;
        }
        Ok(())
    }

    /// Adds `idx`'s adjoint contributions into its inputs' gradient slots.
    fn distribute(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let slot = |grads: &mut [Option<Vec<f64>>], i: usize| -> bool { nodes[i].needs_grad && grads[i].is_none() };
        let ensure = |grads: &mut [Option<Vec<f64>>], i: usize| {
            if slot(grads, i) {
                grads[i] = Some(vec![0.0; nodes[i].value.len()]);
            }
        };
        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (m, k) = (nodes[*a].value.shape()[0], nodes[*a].value.shape()[1]);
                let p = nodes[*b].value.shape()[1];
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let da = grads[*a].as_mut().unwrap();
                    matmul_acc(g, nodes[*b].value.values(), da, m, p, k, false, true, 1.0);
                }
                if nodes[*b].needs_grad {
                    ensure(grads, *b);
                    let db = grads[*b].as_mut().unwrap();
                    matmul_acc(nodes[*a].value.values(), g, db, k, m, p, true, false, 1.0);
                }
            }
            Op::Transpose { a } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let (r, c) = (nodes[*a].value.shape()[0], nodes[*a].value.shape()[1]);
                    let da = grads[*a].as_mut().unwrap();
                    for i in 0..c {
                        for j in 0..r {
                            da[j * c + i] += g[i * r + j];
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                self.acc_linear(*a, g, 1.0, grads);
                self.acc_linear(*b, g, 1.0, grads);
            }
            Op::Sub { a, b } => {
                self.acc_linear(*a, g, 1.0, grads);
                self.acc_linear(*b, g, -1.0, grads);
            }
            Op::Mul { a, b } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let bv = nodes[*b].value.values();
                    let da = grads[*a].as_mut().unwrap();
                    acc_product(da, g, bv);
                }
                if nodes[*b].needs_grad {
                    ensure(grads, *b);
                    let av = nodes[*a].value.values();
                    let db = grads[*b].as_mut().unwrap();
                    acc_product(db, g, av);
                }
            }
            Op::AddRow { a, row } => {
                self.acc_linear(*a, g, 1.0, grads);
                if nodes[*row].needs_grad {
                    ensure(grads, *row);
                    let d = nodes[*row].value.len();
                    let dr = grads[*row].as_mut().unwrap();
                    for (i, &gi) in g.iter().enumerate() {
                        dr[i % d] += gi;
                    }
                }
            }
            Op::Scale { a, c } => self.acc_linear(*a, g, *c, grads),
            Op::AddConst { a } => self.acc_linear(*a, g, 1.0, grads),
            Op::Neg { a } => self.acc_linear(*a, g, -1.0, grads),
            Op::Exp { a } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let out = nodes[idx].value.values();
                    let da = grads[*a].as_mut().unwrap();
                    for i in 0..g.len() {
                        da[i] += g[i] * out[i];
                    }
                }
            }
            Op::Relu { a } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let av = nodes[*a].value.values();
                    let da = grads[*a].as_mut().unwrap();
                    for i in 0..g.len() {
                        if av[i] > 0.0 {
                            da[i] += g[i];
                        }
                    }
                }
            }
            Op::Square { a } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let av = nodes[*a].value.values();
                    let da = grads[*a].as_mut().unwrap();
                    for i in 0..g.len() {
                        da[i] += 2.0 * av[i] * g[i];
                    }
                }
            }
            Op::Sigmoid { a } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let out = nodes[idx].value.values();
                    let da = grads[*a].as_mut().unwrap();
                    for i in 0..g.len() {
                        da[i] += g[i] * out[i] * (1.0 - out[i]);
                    }
                }
            }
            Op::Sum { a, axis } | Op::Mean { a, axis } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let shape = nodes[*a].value.shape().to_vec();
                    let mean = matches!(nodes[idx].op, Op::Mean { .. });
                    let da = grads[*a].as_mut().unwrap();
                    match axis {
                        None => {
                            let s = if mean { g[0] / da.len() as f64 } else { g[0] };
                            for v in da.iter_mut() {
                                *v += s;
                            }
                        }
                        Some(ax) => {
                            let outer: usize = shape[..*ax].iter().product();
                            let axn = shape[*ax];
                            let inner: usize = shape[*ax + 1..].iter().product();
                            let scale = if mean { 1.0 / axn as f64 } else { 1.0 };
                            for o in 0..outer {
                                for x in 0..axn {
                                    let base = (o * axn + x) * inner;
                                    for i in 0..inner {
                                        da[base + i] += g[o * inner + i] * scale;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::PairwiseSqDists { a, b, clamped } => {
                let (m, d) = (nodes[*a].value.shape()[0], nodes[*a].value.shape()[1]);
                let n = nodes[*b].value.shape()[0];
                let mut ge = g.to_vec();
                for (v, &c) in ge.iter_mut().zip(clamped) {
                    if c {
                        *v = 0.0;
                    }
                }
                let av = nodes[*a].value.values();
                let bv = nodes[*b].value.values();
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let da = grads[*a].as_mut().unwrap();
                    // d/da_i = 2 (sum_j g_ij) a_i - 2 sum_j g_ij b_j
                    for i in 0..m {
                        let rs: f64 = ge[i * n..(i + 1) * n].iter().sum();
                        for c in 0..d {
                            da[i * d + c] += 2.0 * rs * av[i * d + c];
                        }
                    }
                    matmul_acc(&ge, bv, da, m, n, d, false, false, -2.0);
                }
                if nodes[*b].needs_grad {
                    ensure(grads, *b);
                    let db = grads[*b].as_mut().unwrap();
                    for j in 0..n {
                        let cs: f64 = (0..m).map(|i| ge[i * n + j]).sum();
                        for c in 0..d {
                            db[j * d + c] += 2.0 * cs * bv[j * d + c];
                        }
                    }
                    matmul_acc(&ge, av, db, n, m, d, true, false, -2.0);
                }
            }
            Op::LogDetSpd { a, inv } => {
                if nodes[*a].needs_grad {
                    ensure(grads, *a);
                    let da = grads[*a].as_mut().unwrap();
                    for i in 0..da.len() {
                        da[i] += g[0] * inv[i];
                    }
                }
            }
        }
    }

    /// Gradient flow for ops whose adjoint is `scale * g`, handling the
    /// scalar-broadcast case by summing the incoming gradient.
    fn acc_linear(&self, i: usize, g: &[f64], scale: f64, grads: &mut [Option<Vec<f64>>]) {
        if !self.nodes[i].needs_grad {
            return;
        }
        let len = self.nodes[i].value.len();
        let da = grads[i].get_or_insert_with(|| vec![0.0; len]);
        if len == g.len() {
            for (d, &gi) in da.iter_mut().zip(g) {
                *d += scale * gi;
            }
        } else {
            debug_assert_eq!(len, 1);
            da[0] += scale * g.iter().sum::<f64>();
        }
    }
}

/// In the scalar-broadcast case `other` may be shorter (length 1) or longer
/// than the gradient; indexes wrap accordingly.
fn acc_product(da: &mut [f64], g: &[f64], other: &[f64]) {
    if da.len() == g.len() && other.len() == g.len() {
        for i in 0..g.len() {
            da[i] += g[i] * other[i];
        }
    } else if da.len() == 1 {
        // target was the scalar operand
        da[0] += g.iter().zip(other).map(|(&gi, &o)| gi * o).sum::<f64>();
    } else {
        // other operand was the scalar
        let o = other[0];
        for i in 0..g.len() {
            da[i] += g[i] * o;
        }
    }
}

/// Lower-triangular Cholesky factor of a row-major d x d SPD matrix, or
/// None when a pivot is nonpositive.
fn cholesky(d: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// A^{-1} = L^{-T} L^{-1} given the Cholesky factor L.
fn spd_inverse_from_cholesky(d: usize, l: &[f64]) -> Vec<f64> {
    // Invert L by forward substitution, one unit-basis column at a time.
    let mut linv = vec![0.0; d * d];
    for col in 0..d {
        for i in col..d {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[i * d + k] * linv[k * d + col];
            }
            linv[i * d + col] = s / l[i * d + i];
        }
    }
    let mut inv = vec![0.0; d * d];
    matmul_acc(&linv, &linv, &mut inv, d, d, d, true, false, 1.0);
    inv
}
