//! Tape-based reverse-mode differentiation over a fixed set of dense matrix ops.
//!
//! Record a program by creating leaves on a [`Tape`] and composing ops; every op
//! checks shapes explicitly (the only broadcast is [`Tape::add_bias`]). Calling
//! [`Tape::backward`] on a `1 x 1` output returns gradients for every recorded
//! value that depends on a [`Tape::leaf`]. Values created with
//! [`Tape::constant`] never receive gradients, and neither does anything
//! computed purely from constants.
//!
//! ```
//! use hyperexplain::autodiff::Tape;
//! use hyperexplain::tensor::Tensor;
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().item(), 6.0);
//! ```

use crate::error::{Error, Result};
use crate::tensor::{matmul_into, Tensor};

/// Clamp applied to probabilities before taking logs.
pub const LOG_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<'a> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddBias(usize, usize),
    Mul(usize, usize),
    ScaleRows(usize, usize),
    Affine(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Log(usize),
    Exp(usize),
    Clamp(usize, f64, f64),
    Sum(usize),
    Gather(usize, &'a [usize]),
    SegmentSum(usize, &'a [usize]),
    SegmentSoftmax { scores: usize, mask: Option<usize>, seg: &'a [usize], num: usize, exps: Vec<f64>, totals: Vec<f64> },
    KlSoftmax { logits: usize, target: usize, probs: Vec<f64> },
    SoftmaxXent { logits: usize, rows: &'a [usize], labels: &'a [usize], probs: Vec<f64> },
    StraightThrough(usize),
}

struct Node<'a> {
    op: Op<'a>,
    value: Tensor,
    needs_grad: bool,
}

/// Records a program for reverse-mode differentiation. Index slices passed to
/// segment ops are borrowed for the tape's lifetime.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    kinks: Option<Vec<i8>>,
}

/// Gradients of a scalar with respect to recorded values.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the value does not influence the output through a leaf.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, or zeros of the given shape when it has none.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

fn shape_err(what: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::ShapeMismatch(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(t: &Tensor) -> Vec<f64> {
    let (r, c) = t.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        out.extend(crate::tensor::softmax(t.row_slice(i)));
    }
    out
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tape that records the sign of every relu/clamp/threshold input, used to
    /// detect non-differentiable points in finite-difference checks.
    pub fn with_kink_tracking() -> Self {
        Self { nodes: Vec::new(), kinks: Some(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<'a>, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: usize) -> bool {
        self.nodes[v].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn record_kink(&mut self, x: f64, at: f64) {
        if let Some(k) = self.kinks.as_mut() {
            k.push(if x > at {
                1
            } else if x < at {
                -1
            } else {
                0
            });
        }
    }

    pub(crate) fn kink_signature(&self) -> Option<&[i8]> {
        self.kinks.as_deref()
    }

    /// Differentiable input.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta.shape(), tb.shape()));
        }
        let value = ta.matmul(tb)?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(Op::MatMul(a.0, b.0), value, ng))
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(what, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.rows(), ta.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "add", |x, y| x + y)?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(Op::Add(a.0, b.0), value, ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "mul", |x, y| x * y)?;
        let ng = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(Op::Mul(a.0, b.0), value, ng))
    }

    /// `a (r x c) + bias (1 x c)` added to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(shape_err("add_bias", ta.shape(), tb.shape()));
        }
        let mut value = ta.clone();
        let c = ta.cols();
        for (i, x) in value.data_mut().iter_mut().enumerate() {
            *x += tb.data()[i % c];
        }
        let ng = self.ng(a.0) || self.ng(bias.0);
        Ok(self.push(Op::AddBias(a.0, bias.0), value, ng))
    }

    /// Multiplies row `i` of `a (r x c)` by `s[i]` where `s` is `r x 1`.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (ta, ts) = (self.value(a), self.value(s));
        if ts.cols() != 1 || ts.rows() != ta.rows() {
            return Err(shape_err("scale_rows", ta.shape(), ts.shape()));
        }
        let c = ta.cols();
        let mut value = ta.clone();
        for (i, x) in value.data_mut().iter_mut().enumerate() {
            *x *= ts.data()[i / c.max(1)];
        }
        let ng = self.ng(a.0) || self.ng(s.0);
        Ok(self.push(Op::ScaleRows(a.0, s.0), value, ng))
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(a).map(|x| scale * x + shift);
        let ng = self.ng(a.0);
        self.push(Op::Affine(a.0, scale), value, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        if self.kinks.is_some() {
            let xs: Vec<f64> = self.value(a).data().to_vec();
            for x in xs {
                self.record_kink(x, 0.0);
            }
        }
        let value = self.value(a).map(|x| x.max(0.0));
        let ng = self.ng(a.0);
        self.push(Op::Relu(a.0), value, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let ng = self.ng(a.0);
        self.push(Op::Sigmoid(a.0), value, ng)
    }

    /// Natural log of `max(a, LOG_EPS)`.
    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(LOG_EPS).ln());
        let ng = self.ng(a.0);
        self.push(Op::Log(a.0), value, ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let ng = self.ng(a.0);
        self.push(Op::Exp(a.0), value, ng)
    }

    /// Clamps into `[lo, hi]`; zero gradient outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        if self.kinks.is_some() {
            let xs: Vec<f64> = self.value(a).data().to_vec();
            for x in xs {
                self.record_kink(x, lo);
                self.record_kink(x, hi);
            }
        }
        let value = self.value(a).map(|x| x.clamp(lo, hi));
        let ng = self.ng(a.0);
        self.push(Op::Clamp(a.0, lo, hi), value, ng)
    }

    /// Sum of all entries, as a `1 x 1` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        let ng = self.ng(a.0);
        self.push(Op::Sum(a.0), value, ng)
    }

    /// Row `i` of the output is row `idx[i]` of `a`.
    pub fn gather(&mut self, a: Var, idx: &'a [usize]) -> Result<Var> {
        let ta = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= ta.rows()) {
            return Err(Error::ShapeMismatch(format!("gather index {bad} out of {} rows", ta.rows())));
        }
        let value = ta.select_rows(idx);
        let ng = self.ng(a.0);
        Ok(self.push(Op::Gather(a.0, idx), value, ng))
    }

    /// Scatter-add: row `seg[i]` of the `num x c` output accumulates row `i` of `a`.
    pub fn segment_sum(&mut self, a: Var, seg: &'a [usize], num: usize) -> Result<Var> {
        let ta = self.value(a);
        if seg.len() != ta.rows() {
            return Err(Error::ShapeMismatch(format!("segment ids {} for {} rows", seg.len(), ta.rows())));
        }
        if let Some(&bad) = seg.iter().find(|&&s| s >= num) {
            return Err(Error::ShapeMismatch(format!("segment id {bad} out of {num}")));
        }
        let c = ta.cols();
        let mut value = Tensor::zeros(num, c);
        {
            let out = value.data_mut();
            for (i, &s) in seg.iter().enumerate() {
                let src = ta.row_slice(i);
                for (o, &x) in out[s * c..(s + 1) * c].iter_mut().zip(src) {
                    *o += x;
                }
            }
        }
        let ng = self.ng(a.0);
        Ok(self.push(Op::SegmentSum(a.0, seg), value, ng))
    }

    /// Softmax of the `L x 1` `scores` within each segment. With a mask `m`, entry
    /// `i` becomes `m_i exp(s_i) / sum_j m_j exp(s_j)` over its segment; segments
    /// whose masked total is zero produce zeros.
    pub fn segment_softmax(&mut self, scores: Var, mask: Option<Var>, seg: &'a [usize], num: usize) -> Result<Var> {
        let ts = self.value(scores);
        if ts.cols() != 1 || seg.len() != ts.rows() {
            return Err(Error::ShapeMismatch(format!(
                "segment_softmax over {}x{} with {} ids",
                ts.rows(),
                ts.cols(),
                seg.len()
            )));
        }
        if let Some(m) = mask {
            if self.shape(m) != ts.shape() {
                return Err(shape_err("segment_softmax mask", self.shape(m), ts.shape()));
            }
        }
        if let Some(&bad) = seg.iter().find(|&&s| s >= num) {
            return Err(Error::ShapeMismatch(format!("segment id {bad} out of {num}")));
        }
        let s = ts.data();
        let mut seg_max = vec![f64::NEG_INFINITY; num];
        for (i, &g) in seg.iter().enumerate() {
            seg_max[g] = seg_max[g].max(s[i]);
        }
        let exps: Vec<f64> = seg.iter().enumerate().map(|(i, &g)| (s[i] - seg_max[g]).exp()).collect();
        let weights: Vec<f64> = match mask {
            Some(m) => exps.iter().zip(self.value(m).data()).map(|(e, w)| e * w).collect(),
            None => exps.clone(),
        };
        let mut totals = vec![0.0; num];
        for (i, &g) in seg.iter().enumerate() {
            totals[g] += weights[i];
        }
        let out: Vec<f64> = seg
            .iter()
            .enumerate()
            .map(|(i, &g)| if totals[g] > 0.0 { weights[i] / totals[g] } else { 0.0 })
            .collect();
        let ng = self.ng(scores.0) || mask.is_some_and(|m| self.ng(m.0));
        let value = Tensor::column(out);
        Ok(self.push(
            Op::SegmentSoftmax { scores: scores.0, mask: mask.map(|m| m.0), seg, num, exps, totals },
            value,
            ng,
        ))
    }

    /// `sum_rows KL(softmax(logits_row) || target_row)` with logs clamped at [`LOG_EPS`].
    pub fn kl_softmax(&mut self, logits: Var, target: Var) -> Result<Var> {
        let (tl, tt) = (self.value(logits), self.value(target));
        if tl.shape() != tt.shape() {
            return Err(shape_err("kl_softmax", tl.shape(), tt.shape()));
        }
        let probs = softmax_rows(tl);
        let kl: f64 = probs
            .iter()
            .zip(tt.data())
            .map(|(&p, &q)| p * (p.max(LOG_EPS).ln() - q.max(LOG_EPS).ln()))
            .sum();
        let ng = self.ng(logits.0) || self.ng(target.0);
        Ok(self.push(Op::KlSoftmax { logits: logits.0, target: target.0, probs }, Tensor::scalar(kl), ng))
    }

    /// Mean over `rows` of `-log softmax(logits[row])[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, rows: &'a [usize], labels: &'a [usize]) -> Result<Var> {
        let tl = self.value(logits);
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::ShapeMismatch(format!("{} rows with {} labels", rows.len(), labels.len())));
        }
        if rows.iter().any(|&r| r >= tl.rows()) || labels.iter().any(|&y| y >= tl.cols()) {
            return Err(Error::ShapeMismatch("cross-entropy row or label out of range".into()));
        }
        let probs = softmax_rows(tl);
        let c = tl.cols();
        let loss = rows
            .iter()
            .zip(labels)
            .map(|(&r, &y)| -probs[r * c + y].max(LOG_EPS).ln())
            .sum::<f64>()
            / rows.len() as f64;
        let ng = self.ng(logits.0);
        Ok(self.push(Op::SoftmaxXent { logits: logits.0, rows, labels, probs }, Tensor::scalar(loss), ng))
    }

    /// Forward: `1` where `soft > 0.5`, else `0`. Backward: identity.
    pub fn straight_through(&mut self, soft: Var) -> Var {
        if self.kinks.is_some() {
            let xs: Vec<f64> = self.value(soft).data().to_vec();
            for x in xs {
                self.record_kink(x, 0.5);
            }
        }
        let value = self.value(soft).map(|x| if x > 0.5 { 1.0 } else { 0.0 });
        let ng = self.ng(soft.0);
        self.push(Op::StraightThrough(soft.0), value, ng)
    }

    /// Reverse sweep from a `1 x 1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let (r, c) = self.shape(output);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss { rows: r, cols: c });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.needs_grad {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let accumulate = |grads: &mut [Option<Tensor>], target: usize, delta: Tensor| {
            if !self.nodes[target].needs_grad {
                return;
            }
            match &mut grads[target] {
                Some(t) => {
                    for (x, d) in t.data_mut().iter_mut().zip(delta.data()) {
                        *x += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |i: usize| &self.nodes[i].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if self.ng(*a) {
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    let bt = tb.transpose();
                    matmul_into(g.data(), bt.data(), da.data_mut(), ta.rows(), tb.cols(), tb.rows());
                    accumulate(grads, *a, da);
                }
                if self.ng(*b) {
                    let mut db = Tensor::zeros(tb.rows(), tb.cols());
                    let at = ta.transpose();
                    matmul_into(at.data(), g.data(), db.data_mut(), ta.cols(), ta.rows(), tb.cols());
                    accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddBias(a, b) => {
                accumulate(grads, *a, g.clone());
                if self.ng(*b) {
                    let c = g.cols();
                    let mut db = Tensor::zeros(1, c);
                    for (i, x) in g.data().iter().enumerate() {
                        db.data_mut()[i % c] += x;
                    }
                    accumulate(grads, *b, db);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if self.ng(*a) {
                    let d = g.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
                }
                if self.ng(*b) {
                    let d = g.data().iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    accumulate(grads, *b, Tensor::new(g.rows(), g.cols(), d).unwrap());
                }
            }
            Op::ScaleRows(a, s) => {
                let (ta, ts) = (val(*a), val(*s));
                let c = ta.cols();
                if self.ng(*a) {
                    let d = g.data().iter().enumerate().map(|(i, x)| x * ts.data()[i / c.max(1)]).collect();
                    accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
                }
                if self.ng(*s) {
                    let d = (0..ta.rows())
                        .map(|r| g.row_slice(r).iter().zip(ta.row_slice(r)).map(|(x, y)| x * y).sum())
                        .collect();
                    accumulate(grads, *s, Tensor::column(d));
                }
            }
            Op::Affine(a, scale) => accumulate(grads, *a, g.map(|x| x * scale)),
            Op::Relu(a) => {
                let d = g.data().iter().zip(val(*a).data()).map(|(x, &y)| if y > 0.0 { *x } else { 0.0 }).collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
            }
            Op::Sigmoid(a) => {
                let d = g.data().iter().zip(node.value.data()).map(|(x, &s)| x * s * (1.0 - s)).collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
            }
            Op::Log(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(val(*a).data())
                    .map(|(x, &y)| if y > LOG_EPS { x / y } else { 0.0 })
                    .collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
            }
            Op::Exp(a) => {
                let d = g.data().iter().zip(node.value.data()).map(|(x, y)| x * y).collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
            }
            Op::Clamp(a, lo, hi) => {
                let d = g
                    .data()
                    .iter()
                    .zip(val(*a).data())
                    .map(|(x, &y)| if y > *lo && y < *hi { *x } else { 0.0 })
                    .collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), d).unwrap());
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                accumulate(grads, *a, Tensor::filled(r, c, g.item()));
            }
            Op::Gather(a, idx) => {
                let (r, c) = val(*a).shape();
                let mut d = Tensor::zeros(r, c);
                {
                    let out = d.data_mut();
                    for (i, &src) in idx.iter().enumerate() {
                        for (o, &x) in out[src * c..(src + 1) * c].iter_mut().zip(g.row_slice(i)) {
                            *o += x;
                        }
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::SegmentSum(a, seg) => {
                let d = g.select_rows(seg);
                accumulate(grads, *a, d);
            }
            Op::SegmentSoftmax { scores, mask, seg, num, exps, totals } => {
                let alpha = node.value.data();
                let mut dot = vec![0.0; *num];
                for (i, &s) in seg.iter().enumerate() {
                    dot[s] += g.data()[i] * alpha[i];
                }
                if self.ng(*scores) {
                    let d = seg.iter().enumerate().map(|(i, &s)| alpha[i] * (g.data()[i] - dot[s])).collect();
                    accumulate(grads, *scores, Tensor::column(d));
                }
                if let Some(m) = mask {
                    if self.ng(*m) {
                        let d = seg
                            .iter()
                            .enumerate()
                            .map(|(i, &s)| if totals[s] > 0.0 { exps[i] / totals[s] * (g.data()[i] - dot[s]) } else { 0.0 })
                            .collect();
                        accumulate(grads, *m, Tensor::column(d));
                    }
                }
            }
            Op::KlSoftmax { logits, target, probs } => {
                let tq = val(*target);
                let (r, c) = tq.shape();
                let gs = g.item();
                if self.ng(*logits) {
                    let mut d = vec![0.0; r * c];
                    for row in 0..r {
                        let span = row * c..(row + 1) * c;
                        let terms: Vec<f64> = span
                            .clone()
                            .map(|i| probs[i].max(LOG_EPS).ln() - tq.data()[i].max(LOG_EPS).ln())
                            .collect();
                        let kl_row: f64 = span.clone().zip(&terms).map(|(i, t)| probs[i] * t).sum();
                        for (j, i) in span.enumerate() {
                            d[i] = gs * probs[i] * (terms[j] - kl_row);
                        }
                    }
                    accumulate(grads, *logits, Tensor::new(r, c, d).unwrap());
                }
                if self.ng(*target) {
                    let d = probs
                        .iter()
                        .zip(tq.data())
                        .map(|(&p, &q)| if q > LOG_EPS { -gs * p / q } else { 0.0 })
                        .collect();
                    accumulate(grads, *target, Tensor::new(r, c, d).unwrap());
                }
            }
            Op::SoftmaxXent { logits, rows, labels, probs } => {
                let (r, c) = val(*logits).shape();
                let scale = g.item() / rows.len() as f64;
                let mut d = Tensor::zeros(r, c);
                for (&row, &y) in rows.iter().zip(labels.iter()) {
                    for k in 0..c {
                        let onehot = if k == y { 1.0 } else { 0.0 };
                        let cur = d.get(row, k);
                        d.set(row, k, cur + scale * (probs[row * c + k] - onehot));
                    }
                }
                accumulate(grads, *logits, d);
            }
            Op::StraightThrough(a) => accumulate(grads, *a, g.clone()),
        }
    }
}

/// Runs `program` on fresh leaves built from `inputs`, returning its output and the
/// gradients of that (scalar) output with respect to the inputs listed in `targets`.
pub fn forward_backward<'a, F>(program: F, inputs: &[Tensor], targets: &[usize]) -> Result<(Tensor, Vec<Tensor>)>
where
    F: Fn(&mut Tape<'a>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = program(&mut tape, &vars)?;
    let value = tape.value(out).clone();
    if targets.is_empty() {
        return Ok((value, Vec::new()));
    }
    let grads = tape.backward(out)?;
    let g = targets.iter().map(|&i| grads.get_or_zeros(vars[i], inputs[i].shape())).collect();
    Ok((value, g))
}

fn eval_with_kinks<'a, F>(program: &F, inputs: &[Tensor]) -> Result<(f64, Vec<i8>)>
where
    F: Fn(&mut Tape<'a>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_kink_tracking();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = program(&mut tape, &vars)?;
    let (r, c) = tape.shape(out);
    if (r, c) != (1, 1) {
        return Err(Error::NonScalarLoss { rows: r, cols: c });
    }
    Ok((tape.value(out).item(), tape.kink_signature().unwrap_or_default().to_vec()))
}

/// Compares reverse-mode gradients of a scalar program with central differences
/// and returns `max |g_ad - g_fd| / max(1, |g_fd|)` over all input coordinates.
/// Coordinates whose perturbation moves any relu/clamp/threshold input across (or
/// onto) its breakpoint are skipped.
pub fn finite_difference_check<'a, F>(program: F, inputs: &[Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape<'a>, &[Var]) -> Result<Var>,
{
    if epsilon <= 0.0 {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    let targets: Vec<usize> = (0..inputs.len()).collect();
    let (_, grads) = forward_backward(&program, inputs, &targets)?;
    let (_, base_kinks) = eval_with_kinks(&program, inputs)?;
    let mut worst: f64 = 0.0;
    let mut perturbed = inputs.to_vec();
    for (t, grad) in grads.iter().enumerate() {
        for k in 0..inputs[t].data().len() {
            let orig = inputs[t].data()[k];
            perturbed[t].data_mut()[k] = orig + epsilon;
            let (fp, kp) = eval_with_kinks(&program, &perturbed)?;
            perturbed[t].data_mut()[k] = orig - epsilon;
            let (fm, km) = eval_with_kinks(&program, &perturbed)?;
            perturbed[t].data_mut()[k] = orig;
            if kp != base_kinks || km != base_kinks {
                continue;
            }
            let fd = (fp - fm) / (2.0 * epsilon);
            let ad = grad.data()[k];
            worst = worst.max((ad - fd).abs() / fd.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let (v, g) = forward_backward(|t, x| t.mul(x[0], x[0]), &[Tensor::scalar(3.0)], &[0]).unwrap();
        assert_eq!(v.item(), 9.0);
        assert_eq!(g[0].item(), 6.0);
    }

    #[test]
    fn constant_program_has_zero_gradient() {
        let (_, g) = forward_backward(
            |t, _x| Ok(t.constant(Tensor::scalar(4.0))),
            &[Tensor::row(vec![1.0, 2.0])],
            &[0],
        )
        .unwrap();
        assert_eq!(g[0].data(), &[0.0, 0.0]);
    }

    #[test]
    fn segment_sum_chain_rule() {
        let seg = [0usize, 0];
        let (v, g) = forward_backward(
            |t, x| {
                let s = t.segment_sum(x[0], &seg, 1)?;
                Ok(t.sum(s))
            },
            &[Tensor::column(vec![1.0, 1.0])],
            &[0],
        )
        .unwrap();
        assert_eq!(v.item(), 2.0);
        assert_eq!(g[0].data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::NonScalarLoss { rows: 1, cols: 2 })));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(2, 3));
        let b = t.leaf(Tensor::zeros(2, 3));
        assert!(t.matmul(a, b).is_err());
        let c = t.leaf(Tensor::zeros(3, 2));
        assert!(t.add(a, c).is_err());
        let bias = t.leaf(Tensor::zeros(1, 2));
        assert!(t.add_bias(a, bias).is_err());
    }

    #[test]
    fn straight_through_is_hard_forward_identity_backward() {
        let (v, g) = forward_backward(
            |t, x| {
                let h = t.straight_through(x[0]);
                let w = t.constant(Tensor::column(vec![2.0, 3.0, 5.0]));
                let p = t.mul(h, w)?;
                Ok(t.sum(p))
            },
            &[Tensor::column(vec![0.2, 0.7, 0.5])],
            &[0],
        )
        .unwrap();
        assert_eq!(v.item(), 3.0);
        assert_eq!(g[0].data(), &[2.0, 3.0, 5.0]);
    }

    #[test]
    fn linear_program_fd_is_exact() {
        let w = Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let err = finite_difference_check(
            |t, x| {
                let m = t.matmul(x[0], x[1])?;
                let a = t.affine(m, 2.0, 1.0);
                Ok(t.sum(a))
            },
            &[Tensor::row(vec![0.3, -0.7]), w],
            1e-3,
        )
        .unwrap();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn relu_at_zero_is_skipped() {
        // d relu / dx is undefined at 0; central differences would give 0.5.
        let err = finite_difference_check(
            |t, x| {
                let r = t.relu(x[0]);
                Ok(t.sum(r))
            },
            &[Tensor::row(vec![0.0, 1.5])],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9);
    }

    #[test]
    fn masked_segment_softmax_values() {
        let seg = [0usize, 0, 1, 1];
        let mut t = Tape::new();
        let s = t.leaf(Tensor::column(vec![0.0, 0.0, 1.0, 2.0]));
        let m = t.leaf(Tensor::column(vec![1.0, 1.0, 0.0, 0.0]));
        let a = t.segment_softmax(s, Some(m), &seg, 2).unwrap();
        assert_eq!(t.value(a).data(), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn kl_of_known_distributions() {
        let mut t = Tape::new();
        // softmax([50, 0]) is [1, 0] to double precision
        let l = t.leaf(Tensor::row(vec![50.0, 0.0]));
        let q = t.constant(Tensor::row(vec![0.5, 0.5]));
        let kl = t.kl_softmax(l, q).unwrap();
        assert!((t.value(kl).item() - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
