//! Tensor-level reverse-mode differentiation.
//!
//! Every node holds a complex tensor in standard layout. Gradients follow the
//! convention `g = ∂L/∂Re + i·∂L/∂Im`, so a complex-linear map `y = A x`
//! back-propagates as `g_x = Aᴴ g_y`, and a real parameter's gradient is the
//! real part of its accumulated `g`.

use std::sync::Arc;

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::temporal::DftPlan;

pub type CTensor = ArrayD<C64>;

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
    Combine(Vec<(f64, Var)>),
    /// `y[i, r] = Σ_j m[i, j] x[j, r]` with `x` flattened past its first axis.
    NodeMix { m: Var, x: Var },
    /// `y[.., d] = θ[row, d] x[.., d]`; a single-column `θ` broadcasts over `d`.
    DimScale { x: Var, theta: Var, row: usize },
    Relu(Var),
    RealPart(Var),
    /// Transform along axis 1; the inverse carries the `1/T` factor.
    Dft { x: Var, inverse: bool },
    Select { x: Var, modes: Arc<Vec<usize>> },
    Pad { x: Var, modes: Arc<Vec<usize>> },
    /// `y[n, j, d] = Σ_i x[n, i, d] w[n', d', i, j]` with broadcast over size-1 axes of `w`.
    ModeMix { x: Var, w: Var },
    /// `y[n, a, d] = Σ_b p[a, b] x[n, b, d]`.
    TimeMix { x: Var, p: Var },
    /// Fixed linear map along the time axis.
    Project { x: Var, matrix: Arc<Array2<C64>> },
    MovingAvg { x: Var, window: usize },
    /// `y[n, i, j] = Σ_d a[n, i, d] b[n, j, d]`.
    PairScores { a: Var, b: Var },
    /// Softmax of the real part along the last axis of a (B×S×S) tensor.
    SoftmaxRows(Var),
    /// `y[n, i, d] = Σ_j w[n, i, j] v[n, j, d]`.
    BatchApply { w: Var, v: Var },
    /// `y[n, o] = Σ_r z[n, r] w[r, o]` with `z` flattened per node.
    NodeLinear { z: Var, w: Var },
    Transpose(Var),
    /// `D^{-1/2} A D^{-1/2}`, with a unit diagonal on zero-degree nodes.
    NormalizeAdjacency(Var),
    Reshape(Var),
    /// `(1/H) Σ |p - y|²` with `H` the extent of axis 1.
    Mse { pred: Var, target: Arc<ArrayD<f64>> },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: CTensor,
}

/// Append-only computation record. Inputs always precede the nodes using
/// them, so reverse insertion order is a valid topological order.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn std_layout(a: CTensor) -> CTensor {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn dims3(t: &CTensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [a, b, c] => Ok((*a, *b, *c)),
        s => Err(Error::shape(format!("expected a rank-3 tensor, got shape {s:?}"))),
    }
}

fn dims2(t: &CTensor) -> Result<(usize, usize)> {
    match t.shape() {
        [a, b] => Ok((*a, *b)),
        s => Err(Error::shape(format!("expected a rank-2 tensor, got shape {s:?}"))),
    }
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

    pub fn value(&self, v: Var) -> &CTensor {
        &self.nodes[v.0].value
    }

    /// Real part of a node's value.
    pub fn real_value(&self, v: Var) -> ArrayD<f64> {
        self.value(v).mapv(|z| z.re)
    }

    fn push(&mut self, op: Op, value: CTensor) -> Var {
        self.nodes.push(Node { op, value: std_layout(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: CTensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn leaf_real(&mut self, value: &ArrayD<f64>) -> Var {
        self.leaf(value.mapv(c))
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(format!(
                "operand shapes differ: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let v = self.value(a) + self.value(b);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let v = self.value(a) - self.value(b);
        Ok(self.push(Op::Sub(a, b), v))
    }

    /// `Σ c_i x_i` over equally shaped operands.
    pub fn combine(&mut self, terms: &[(f64, Var)]) -> Result<Var> {
        let (c0, v0) = *terms.first().ok_or_else(|| Error::shape("empty linear combination"))?;
        let mut acc = self.value(v0).mapv(|z| z * c0);
        for &(ci, vi) in &terms[1..] {
            self.same_shape(v0, vi)?;
            acc.zip_mut_with(self.value(vi), |a, b| *a += b * ci);
        }
        Ok(self.push(Op::Combine(terms.to_vec()), acc))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        self.combine(&[(factor, x)])
    }

    pub fn node_mix(&mut self, m: Var, x: Var) -> Result<Var> {
        let (n, n2) = dims2(self.value(m))?;
        let xs = self.value(x).shape().to_vec();
        if n != n2 || xs.first() != Some(&n) {
            return Err(Error::shape(format!("node mix of {n}x{n2} with {xs:?}")));
        }
        let r: usize = xs[1..].iter().product();
        let ms = self.value(m).as_slice().unwrap();
        let xv = self.value(x).as_slice().unwrap();
        let mut out = vec![C64::default(); n * r];
        for i in 0..n {
            for j in 0..n {
                let mij = ms[i * n + j];
                if mij == C64::default() {
                    continue;
                }
                let src = &xv[j * r..(j + 1) * r];
                for (o, s) in out[i * r..(i + 1) * r].iter_mut().zip(src) {
                    *o += mij * s;
                }
            }
        }
        let v = ArrayD::from_shape_vec(IxDyn(&xs), out).unwrap();
        Ok(self.push(Op::NodeMix { m, x }, v))
    }

    pub fn dim_scale(&mut self, x: Var, theta: Var, row: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (rows, d) = dims2(self.value(theta))?;
        if row >= rows || !(d == 1 || xs.last() == Some(&d)) {
            return Err(Error::shape(format!("coefficient table {rows}x{d} (row {row}) vs input {xs:?}")));
        }
        let th = self.value(theta).as_slice().unwrap()[row * d..(row + 1) * d].to_vec();
        let mut v = self.value(x).clone();
        for (i, z) in v.as_slice_mut().unwrap().iter_mut().enumerate() {
            *z *= th[i % d];
        }
        Ok(self.push(Op::DimScale { x, theta, row }, v))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|z| c(z.re.max(0.0)));
        self.push(Op::Relu(x), v)
    }

    pub fn real_part(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|z| c(z.re));
        self.push(Op::RealPart(x), v)
    }

    pub fn dft(&mut self, x: Var) -> Result<Var> {
        let v = time_transform(self.value(x), false, 1.0)?;
        Ok(self.push(Op::Dft { x, inverse: false }, v))
    }

    pub fn idft(&mut self, x: Var) -> Result<Var> {
        let t = dims3(self.value(x))?.1;
        let v = time_transform(self.value(x), true, 1.0 / t as f64)?;
        Ok(self.push(Op::Dft { x, inverse: true }, v))
    }

    pub fn select(&mut self, x: Var, modes: &[usize]) -> Result<Var> {
        let (n, t, d) = dims3(self.value(x))?;
        if modes.iter().any(|&m| m >= t) {
            return Err(Error::shape(format!("mode index out of range for length {t}")));
        }
        let v = select_axis1(self.value(x), modes, n, t, d);
        Ok(self.push(Op::Select { x, modes: Arc::new(modes.to_vec()) }, v))
    }

    pub fn pad(&mut self, x: Var, modes: &[usize], len: usize) -> Result<Var> {
        let (n, s, d) = dims3(self.value(x))?;
        if s != modes.len() || modes.iter().any(|&m| m >= len) {
            return Err(Error::shape(format!("cannot pad {s} components into length {len}")));
        }
        let v = pad_axis1(self.value(x), modes, len, n, d);
        Ok(self.push(Op::Pad { x, modes: Arc::new(modes.to_vec()) }, v))
    }

    pub fn mode_mix(&mut self, x: Var, w: Var) -> Result<Var> {
        let (n, s, d) = dims3(self.value(x))?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 4 || ws[2] != s || ws[3] != s || !(ws[0] == 1 || ws[0] == n) || !(ws[1] == 1 || ws[1] == d) {
            return Err(Error::shape(format!("mode weights {ws:?} incompatible with input ({n},{s},{d})")));
        }
        let xv = self.value(x).as_slice().unwrap();
        let wv = self.value(w).as_slice().unwrap();
        let mut out = vec![C64::default(); n * s * d];
        for i in 0..n {
            for k in 0..d {
                let base = w_offset(&ws, i, k);
                for col in 0..s {
                    let mut acc = C64::default();
                    for row in 0..s {
                        acc += xv[(i * s + row) * d + k] * wv[base + row * s + col];
                    }
                    out[(i * s + col) * d + k] = acc;
                }
            }
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[n, s, d]), out).unwrap();
        Ok(self.push(Op::ModeMix { x, w }, v))
    }

    pub fn time_mix(&mut self, x: Var, p: Var) -> Result<Var> {
        let (n, t, d) = dims3(self.value(x))?;
        let (a, b) = dims2(self.value(p))?;
        if b != t {
            return Err(Error::shape(format!("time projection {a}x{b} applied to length {t}")));
        }
        let v = apply_time_matrix(self.value(x), self.value(p).as_slice().unwrap(), a, n, t, d);
        Ok(self.push(Op::TimeMix { x, p }, v))
    }

    pub fn project(&mut self, x: Var, matrix: Arc<Array2<C64>>) -> Result<Var> {
        let (n, t, d) = dims3(self.value(x))?;
        let (a, b) = matrix.dim();
        if b != t {
            return Err(Error::shape(format!("projection {a}x{b} applied to length {t}")));
        }
        let v = apply_time_matrix(self.value(x), matrix.as_slice().expect("standard layout"), a, n, t, d);
        Ok(self.push(Op::Project { x, matrix }, v))
    }

    pub fn moving_avg(&mut self, x: Var, window: usize) -> Result<Var> {
        let (_, t, _) = dims3(self.value(x))?;
        if window == 0 || window > t {
            return Err(Error::param(format!("moving-average window {window} invalid for length {t}")));
        }
        let v = complex_moving(self.value(x), window, false);
        Ok(self.push(Op::MovingAvg { x, window }, v))
    }

    pub fn pair_scores(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let (n, s, d) = dims3(self.value(a))?;
        let av = self.value(a).as_slice().unwrap();
        let bv = self.value(b).as_slice().unwrap();
        let mut out = vec![C64::default(); n * s * s];
        for i in 0..n {
            for p in 0..s {
                for q in 0..s {
                    let mut acc = C64::default();
                    for k in 0..d {
                        acc += av[(i * s + p) * d + k] * bv[(i * s + q) * d + k];
                    }
                    out[(i * s + p) * s + q] = acc;
                }
            }
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[n, s, s]), out).unwrap();
        Ok(self.push(Op::PairScores { a, b }, v))
    }

    pub fn softmax_rows(&mut self, x: Var, mask_diag: bool) -> Result<Var> {
        let (n, s, s2) = dims3(self.value(x))?;
        if s != s2 {
            return Err(Error::shape("softmax rows expects square score blocks"));
        }
        let xv = self.value(x).as_slice().unwrap();
        let mut out = vec![C64::default(); n * s * s];
        let mut row = vec![0.0; s];
        for i in 0..n {
            for p in 0..s {
                let off = (i * s + p) * s;
                for q in 0..s {
                    row[q] = if mask_diag && p == q { f64::NEG_INFINITY } else { xv[off + q].re };
                }
                softmax_masked(&mut row);
                for q in 0..s {
                    out[off + q] = c(row[q]);
                }
            }
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[n, s, s]), out).unwrap();
        Ok(self.push(Op::SoftmaxRows(x), v))
    }

    pub fn batch_apply(&mut self, w: Var, v: Var) -> Result<Var> {
        let (n, s, s2) = dims3(self.value(w))?;
        let (n2, s3, d) = dims3(self.value(v))?;
        if n != n2 || s2 != s3 {
            return Err(Error::shape("batch apply shape mismatch"));
        }
        let wv = self.value(w).as_slice().unwrap();
        let vv = self.value(v).as_slice().unwrap();
        let mut out = vec![C64::default(); n * s * d];
        for i in 0..n {
            for p in 0..s {
                for q in 0..s2 {
                    let a = wv[(i * s + p) * s2 + q];
                    for k in 0..d {
                        out[(i * s + p) * d + k] += a * vv[(i * s2 + q) * d + k];
                    }
                }
            }
        }
        let val = ArrayD::from_shape_vec(IxDyn(&[n, s, d]), out).unwrap();
        Ok(self.push(Op::BatchApply { w, v }, val))
    }

    /// Per-node linear map of the flattened node slice; the output is reshaped to `out_shape` per node.
    pub fn node_linear(&mut self, z: Var, w: Var, out_shape: &[usize]) -> Result<Var> {
        let zs = self.value(z).shape().to_vec();
        let n = *zs.first().ok_or_else(|| Error::shape("node linear on a scalar"))?;
        let r: usize = zs[1..].iter().product();
        let (wr, o) = dims2(self.value(w))?;
        if wr != r || out_shape.iter().product::<usize>() != o {
            return Err(Error::shape(format!("node linear weight {wr}x{o} vs input {zs:?} -> {out_shape:?}")));
        }
        let zv = self.value(z).as_slice().unwrap();
        let wv = self.value(w).as_slice().unwrap();
        let mut out = vec![C64::default(); n * o];
        for i in 0..n {
            for p in 0..r {
                let a = zv[i * r + p];
                if a == C64::default() {
                    continue;
                }
                for q in 0..o {
                    out[i * o + q] += a * wv[p * o + q];
                }
            }
        }
        let mut shape = vec![n];
        shape.extend_from_slice(out_shape);
        let v = ArrayD::from_shape_vec(IxDyn(&shape), out).unwrap();
        Ok(self.push(Op::NodeLinear { z, w }, v))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        dims2(self.value(x))?;
        let v = self.value(x).t().to_owned();
        Ok(self.push(Op::Transpose(x), v))
    }

    pub fn normalize_adjacency(&mut self, a: Var) -> Result<Var> {
        let (n, n2) = dims2(self.value(a))?;
        if n != n2 {
            return Err(Error::shape("adjacency must be square"));
        }
        let av = self.value(a).as_slice().unwrap();
        let s = inv_sqrt_degrees(av, n);
        let mut out = vec![C64::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = c(s[i] * av[i * n + j].re * s[j]);
            }
            if s[i] == 0.0 {
                out[i * n + i] = c(1.0);
            }
        }
        let v = ArrayD::from_shape_vec(IxDyn(&[n, n]), out).unwrap();
        Ok(self.push(Op::NormalizeAdjacency(a), v))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self
            .value(x)
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .map_err(|e| Error::shape(format!("reshape to {shape:?}: {e}")))?;
        Ok(self.push(Op::Reshape(x), v))
    }

    /// `(1/H) Σ |pred - target|²`, `H` being the extent of axis 1.
    pub fn mse(&mut self, pred: Var, target: &ArrayD<f64>) -> Result<Var> {
        let ps = self.value(pred).shape();
        if ps != target.shape() || ps.len() < 2 {
            return Err(Error::shape(format!("prediction {ps:?} vs target {:?}", target.shape())));
        }
        let h = ps[1] as f64;
        let total: f64 = self
            .value(pred)
            .iter()
            .zip(target.iter())
            .map(|(p, y)| (p - c(*y)).norm_sqr())
            .sum();
        let v = ArrayD::from_elem(IxDyn(&[]), c(total / h));
        Ok(self.push(Op::Mse { pred, target: Arc::new(target.clone()) }, v))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward requires a scalar output"));
        }
        let mut grads: Vec<Option<CTensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(ArrayD::from_elem(self.value(loss).raw_dim(), c(1.0)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &CTensor, grads: &mut [Option<CTensor>]) {
        let acc = |grads: &mut [Option<CTensor>], v: Var, delta: CTensor| match &mut grads[v.0] {
            Some(existing) => *existing += &delta,
            slot @ None => *slot = Some(delta),
        };
        let node = &self.nodes[idx];
        let gs = g.as_slice().unwrap();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.mapv(|z| -z));
            }
            Op::Combine(terms) => {
                for &(ci, vi) in terms {
                    acc(grads, vi, g.mapv(|z| z * ci));
                }
            }
            Op::NodeMix { m, x } => {
                let mv = self.value(*m).as_slice().unwrap();
                let xv = self.value(*x).as_slice().unwrap();
                let n = self.value(*m).shape()[0];
                let r = xv.len() / n.max(1);
                let mut gx = vec![C64::default(); xv.len()];
                let mut gm = vec![C64::default(); n * n];
                for i in 0..n {
                    let gi = &gs[i * r..(i + 1) * r];
                    for j in 0..n {
                        let mc = mv[i * n + j].conj();
                        let xj = &xv[j * r..(j + 1) * r];
                        let mut dot = C64::default();
                        for (p, (gg, xx)) in gi.iter().zip(xj).enumerate() {
                            gx[j * r + p] += mc * gg;
                            dot += gg * xx.conj();
                        }
                        gm[i * n + j] = dot;
                    }
                }
                acc(grads, *x, ArrayD::from_shape_vec(self.value(*x).raw_dim(), gx).unwrap());
                acc(grads, *m, ArrayD::from_shape_vec(self.value(*m).raw_dim(), gm).unwrap());
            }
            Op::DimScale { x, theta, row } => {
                let tv = self.value(*theta);
                let d = tv.shape()[1];
                let th = &tv.as_slice().unwrap()[row * d..(row + 1) * d];
                let xv = self.value(*x).as_slice().unwrap();
                let mut gx = vec![C64::default(); xv.len()];
                let mut gt = vec![C64::default(); tv.len()];
                for (i, (gg, xx)) in gs.iter().zip(xv).enumerate() {
                    let k = i % d;
                    gx[i] = gg * th[k].conj();
                    gt[row * d + k] += gg * xx.conj();
                }
                acc(grads, *x, ArrayD::from_shape_vec(self.value(*x).raw_dim(), gx).unwrap());
                acc(grads, *theta, ArrayD::from_shape_vec(tv.raw_dim(), gt).unwrap());
            }
            Op::Relu(x) => {
                let mut gx = g.mapv(|z| c(z.re));
                gx.zip_mut_with(self.value(*x), |gg, xx| {
                    if xx.re <= 0.0 {
                        *gg = C64::default();
                    }
                });
                acc(grads, *x, gx);
            }
            Op::RealPart(x) => acc(grads, *x, g.mapv(|z| c(z.re))),
            Op::Dft { x, inverse } => {
                let t = g.shape()[1];
                // Adjoint of the forward kernel is the unscaled inverse kernel and vice versa.
                let gx = if *inverse {
                    time_transform(g, false, 1.0 / t as f64)
                } else {
                    time_transform(g, true, 1.0)
                }
                .expect("shape checked in forward");
                acc(grads, *x, gx);
            }
            Op::Select { x, modes } => {
                let (n, t, d) = dims3(self.value(*x)).unwrap();
                acc(grads, *x, pad_axis1(g, modes, t, n, d));
            }
            Op::Pad { x, modes } => {
                let (n, t, d) = dims3(g).unwrap();
                acc(grads, *x, select_axis1(g, modes, n, t, d));
            }
            Op::ModeMix { x, w } => {
                let (n, s, d) = dims3(self.value(*x)).unwrap();
                let ws = self.value(*w).shape().to_vec();
                let xv = self.value(*x).as_slice().unwrap();
                let wv = self.value(*w).as_slice().unwrap();
                let mut gx = vec![C64::default(); xv.len()];
                let mut gw = vec![C64::default(); wv.len()];
                for i in 0..n {
                    for k in 0..d {
                        let base = w_offset(&ws, i, k);
                        for row in 0..s {
                            let xr = xv[(i * s + row) * d + k].conj();
                            let mut sum = C64::default();
                            for col in 0..s {
                                let gg = gs[(i * s + col) * d + k];
                                sum += gg * wv[base + row * s + col].conj();
                                gw[base + row * s + col] += xr * gg;
                            }
                            gx[(i * s + row) * d + k] = sum;
                        }
                    }
                }
                acc(grads, *x, ArrayD::from_shape_vec(self.value(*x).raw_dim(), gx).unwrap());
                acc(grads, *w, ArrayD::from_shape_vec(self.value(*w).raw_dim(), gw).unwrap());
            }
            Op::TimeMix { x, p } => {
                let (n, t, d) = dims3(self.value(*x)).unwrap();
                let (a, _) = dims2(self.value(*p)).unwrap();
                let pv = self.value(*p).as_slice().unwrap();
                let xv = self.value(*x).as_slice().unwrap();
                let gx = apply_time_adjoint(g, pv, a, n, t, d);
                let mut gp = vec![C64::default(); a * t];
                for i in 0..n {
                    for r in 0..a {
                        for q in 0..t {
                            let mut sum = C64::default();
                            for k in 0..d {
                                sum += gs[(i * a + r) * d + k] * xv[(i * t + q) * d + k].conj();
                            }
                            gp[r * t + q] += sum;
                        }
                    }
                }
                acc(grads, *x, gx);
                acc(grads, *p, ArrayD::from_shape_vec(IxDyn(&[a, t]), gp).unwrap());
            }
            Op::Project { x, matrix } => {
                let (n, t, d) = dims3(self.value(*x)).unwrap();
                let (a, _) = matrix.dim();
                let pv = matrix.as_slice().expect("standard layout");
                acc(grads, *x, apply_time_adjoint(g, pv, a, n, t, d));
            }
            Op::MovingAvg { x, window } => acc(grads, *x, complex_moving(g, *window, true)),
            Op::PairScores { a, b } => {
                let (n, s, d) = dims3(self.value(*a)).unwrap();
                let av = self.value(*a).as_slice().unwrap();
                let bv = self.value(*b).as_slice().unwrap();
                let mut ga = vec![C64::default(); av.len()];
                let mut gb = vec![C64::default(); bv.len()];
                for i in 0..n {
                    for p in 0..s {
                        for q in 0..s {
                            let gg = gs[(i * s + p) * s + q];
                            for k in 0..d {
                                ga[(i * s + p) * d + k] += gg * bv[(i * s + q) * d + k].conj();
                                gb[(i * s + q) * d + k] += gg * av[(i * s + p) * d + k].conj();
                            }
                        }
                    }
                }
                acc(grads, *a, ArrayD::from_shape_vec(self.value(*a).raw_dim(), ga).unwrap());
                acc(grads, *b, ArrayD::from_shape_vec(self.value(*b).raw_dim(), gb).unwrap());
            }
            Op::SoftmaxRows(x) => {
                let (n, s, _) = dims3(&node.value).unwrap();
                let yv = node.value.as_slice().unwrap();
                let mut gx = vec![C64::default(); n * s * s];
                for row in 0..n * s {
                    let off = row * s;
                    let dot: f64 = (0..s).map(|q| yv[off + q].re * gs[off + q].re).sum();
                    for q in 0..s {
                        gx[off + q] = c(yv[off + q].re * (gs[off + q].re - dot));
                    }
                }
                acc(grads, *x, ArrayD::from_shape_vec(IxDyn(&[n, s, s]), gx).unwrap());
            }
            Op::BatchApply { w, v } => {
                let (n, s, s2) = dims3(self.value(*w)).unwrap();
                let d = self.value(*v).shape()[2];
                let wv = self.value(*w).as_slice().unwrap();
                let vv = self.value(*v).as_slice().unwrap();
                let mut gw = vec![C64::default(); wv.len()];
                let mut gv = vec![C64::default(); vv.len()];
                for i in 0..n {
                    for p in 0..s {
                        for q in 0..s2 {
                            let wc = wv[(i * s + p) * s2 + q].conj();
                            let mut sum = C64::default();
                            for k in 0..d {
                                let gg = gs[(i * s + p) * d + k];
                                sum += gg * vv[(i * s2 + q) * d + k].conj();
                                gv[(i * s2 + q) * d + k] += wc * gg;
                            }
                            gw[(i * s + p) * s2 + q] = sum;
                        }
                    }
                }
                acc(grads, *w, ArrayD::from_shape_vec(self.value(*w).raw_dim(), gw).unwrap());
                acc(grads, *v, ArrayD::from_shape_vec(self.value(*v).raw_dim(), gv).unwrap());
            }
            Op::NodeLinear { z, w } => {
                let (r, o) = dims2(self.value(*w)).unwrap();
                let zv = self.value(*z).as_slice().unwrap();
                let wv = self.value(*w).as_slice().unwrap();
                let n = zv.len() / r.max(1);
                let mut gz = vec![C64::default(); zv.len()];
                let mut gw = vec![C64::default(); wv.len()];
                for i in 0..n {
                    for p in 0..r {
                        let zc = zv[i * r + p].conj();
                        let mut sum = C64::default();
                        for q in 0..o {
                            let gg = gs[i * o + q];
                            sum += gg * wv[p * o + q].conj();
                            gw[p * o + q] += zc * gg;
                        }
                        gz[i * r + p] = sum;
                    }
                }
                acc(grads, *z, ArrayD::from_shape_vec(self.value(*z).raw_dim(), gz).unwrap());
                acc(grads, *w, ArrayD::from_shape_vec(self.value(*w).raw_dim(), gw).unwrap());
            }
            Op::Transpose(x) => acc(grads, *x, std_layout(g.t().to_owned())),
            Op::NormalizeAdjacency(a) => {
                let n = g.shape()[0];
                let av = self.value(*a).as_slice().unwrap();
                let s = inv_sqrt_degrees(av, n);
                // dL/ds_i collects both the row and the column in which s_i appears.
                let mut ds = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let gij = gs[i * n + j].re * av[i * n + j].re;
                        ds[i] += gij * s[j];
                        ds[j] += gij * s[i];
                    }
                }
                let mut ga = vec![C64::default(); n * n];
                for i in 0..n {
                    // ds_i/dd_i = -1/2 d_i^{-3/2} = -s_i³/2
                    let dd = if s[i] > 0.0 { -0.5 * s[i] * s[i] * s[i] * ds[i] } else { 0.0 };
                    for j in 0..n {
                        ga[i * n + j] = c(gs[i * n + j].re * s[i] * s[j] + dd);
                    }
                }
                acc(grads, *a, ArrayD::from_shape_vec(IxDyn(&[n, n]), ga).unwrap());
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).raw_dim();
                acc(grads, *x, g.clone().into_shape_with_order(shape).unwrap());
            }
            Op::Mse { pred, target } => {
                let p = self.value(*pred);
                let h = p.shape()[1] as f64;
                let scale = gs[0].re * 2.0 / h;
                let mut gp = p.clone();
                gp.zip_mut_with(target.as_ref(), |pp, y| *pp = (*pp - c(*y)) * scale);
                acc(grads, *pred, gp);
            }
        }
    }
}

/// Accumulated gradients, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<CTensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&CTensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zeros shaped like `like` if `v` did not influence the loss.
    pub fn get_or_zeros(&self, v: Var, like: &CTensor) -> CTensor {
        self.get(v).cloned().unwrap_or_else(|| ArrayD::zeros(like.raw_dim()))
    }
}

fn w_offset(ws: &[usize], i: usize, k: usize) -> usize {
    let ii = if ws[0] == 1 { 0 } else { i };
    let kk = if ws[1] == 1 { 0 } else { k };
    (ii * ws[1] + kk) * ws[2] * ws[3]
}

fn time_transform(x: &CTensor, inverse: bool, scale: f64) -> Result<CTensor> {
    let (n, t, d) = dims3(x)?;
    if t == 0 {
        return Err(Error::shape("time axis is empty"));
    }
    let xv = x.as_slice().unwrap();
    let plan = DftPlan::new(t, inverse);
    let mut out = vec![C64::default(); xv.len()];
    let mut buf = vec![C64::default(); t];
    let mut res = vec![C64::default(); t];
    for i in 0..n {
        for k in 0..d {
            for s in 0..t {
                buf[s] = xv[(i * t + s) * d + k];
            }
            plan.run(&buf, &mut res);
            for (s, v) in res.iter().enumerate() {
                out[(i * t + s) * d + k] = v * scale;
            }
        }
    }
    Ok(ArrayD::from_shape_vec(IxDyn(&[n, t, d]), out).unwrap())
}

fn select_axis1(x: &CTensor, modes: &[usize], n: usize, t: usize, d: usize) -> CTensor {
    let xv = x.as_slice().unwrap();
    let s = modes.len();
    let mut out = vec![C64::default(); n * s * d];
    for i in 0..n {
        for (j, &m) in modes.iter().enumerate() {
            out[(i * s + j) * d..(i * s + j + 1) * d].copy_from_slice(&xv[(i * t + m) * d..(i * t + m + 1) * d]);
        }
    }
    ArrayD::from_shape_vec(IxDyn(&[n, s, d]), out).unwrap()
}

fn pad_axis1(x: &CTensor, modes: &[usize], len: usize, n: usize, d: usize) -> CTensor {
    let xv = x.as_slice().unwrap();
    let s = modes.len();
    let mut out = vec![C64::default(); n * len * d];
    for i in 0..n {
        for (j, &m) in modes.iter().enumerate() {
            out[(i * len + m) * d..(i * len + m + 1) * d].copy_from_slice(&xv[(i * s + j) * d..(i * s + j + 1) * d]);
        }
    }
    ArrayD::from_shape_vec(IxDyn(&[n, len, d]), out).unwrap()
}

/// `y[n, a, d] = Σ_b p[a, b] x[n, b, d]` with `p` row-major (rows × t).
fn apply_time_matrix(x: &CTensor, p: &[C64], rows: usize, n: usize, t: usize, d: usize) -> CTensor {
    let xv = x.as_slice().unwrap();
    let mut out = vec![C64::default(); n * rows * d];
    for i in 0..n {
        for a in 0..rows {
            let orow = &mut out[(i * rows + a) * d..(i * rows + a + 1) * d];
            for b in 0..t {
                let w = p[a * t + b];
                if w == C64::default() {
                    continue;
                }
                for (o, xx) in orow.iter_mut().zip(&xv[(i * t + b) * d..(i * t + b + 1) * d]) {
                    *o += w * xx;
                }
            }
        }
    }
    ArrayD::from_shape_vec(IxDyn(&[n, rows, d]), out).unwrap()
}

/// `y[n, b, d] = Σ_a conj(p[a, b]) g[n, a, d]` with `p` row-major (rows × t).
fn apply_time_adjoint(g: &CTensor, p: &[C64], rows: usize, n: usize, t: usize, d: usize) -> CTensor {
    let gv = g.as_slice().unwrap();
    let mut out = vec![C64::default(); n * t * d];
    for i in 0..n {
        for a in 0..rows {
            let grow = &gv[(i * rows + a) * d..(i * rows + a + 1) * d];
            for b in 0..t {
                let w = p[a * t + b].conj();
                if w == C64::default() {
                    continue;
                }
                for (o, gg) in out[(i * t + b) * d..(i * t + b + 1) * d].iter_mut().zip(grow) {
                    *o += w * gg;
                }
            }
        }
    }
    ArrayD::from_shape_vec(IxDyn(&[n, t, d]), out).unwrap()
}

/// Trailing moving average along axis 1 (zero before the first full window), or its adjoint.
fn complex_moving(x: &CTensor, window: usize, adjoint: bool) -> CTensor {
    let (n, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let xv = x.as_slice().unwrap();
    let inv = 1.0 / window as f64;
    let mut out = vec![C64::default(); n * t * d];
    for i in 0..n {
        let base = i * t * d;
        for s in (window - 1)..t {
            for u in (s + 1 - window)..=s {
                for k in 0..d {
                    if adjoint {
                        out[base + u * d + k] += xv[base + s * d + k] * inv;
                    } else {
                        out[base + s * d + k] += xv[base + u * d + k] * inv;
                    }
                }
            }
        }
    }
    ArrayD::from_shape_vec(IxDyn(&[n, t, d]), out).unwrap()
}

fn inv_sqrt_degrees(a: &[C64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|j| a[i * n + j].re).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Softmax that leaves `-inf` entries at exactly zero.
fn softmax_masked(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        row.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = if v.is_finite() { (*v - max).exp() } else { 0.0 };
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}
