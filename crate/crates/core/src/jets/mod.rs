//! Forward jets of a tanh MLP and reverse-mode parameter gradients.
//!
//! A jet carries the network value together with exact first derivatives and
//! diagonal second derivatives with respect to selected input coordinates.
//! Propagation through an affine layer is linear in every channel; through
//! `tanh` the chain rule gives
//!
//! ```text
//! s   = tanh(z)
//! s'  = tanh'(z) z'
//! s'' = tanh''(z) z'^2 + tanh'(z) z''
//! ```
//!
//! per coordinate. Batches are laid out channel-major (`n` value rows, then
//! `n` rows per first-derivative axis, then `n` rows per second-derivative
//! axis) so that one GEMM advances every channel of every point through a
//! layer.
//!
//! Parameter gradients run the same computation backwards, seeded by the
//! adjoints of whatever scalar loss was assembled from the output jets.

mod checkpoint;
mod fastmath;
mod mlp;
mod pool;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use mlp::Mlp;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("derivative axis {axis} out of range for input width {width}")]
    AxisOutOfRange { axis: usize, width: usize },
    #[error("non-finite parameter at flat index {index}")]
    NonFiniteParameter { index: usize },
    #[error("non-finite input at point {point}, coordinate {coord}")]
    NonFiniteInput { point: usize, coord: usize },
    #[error("non-finite loss contribution at batch point {point}")]
    NonFiniteLoss { point: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Highest derivative order carried by a jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JetOrder {
    Value,
    First,
    Second,
}

impl JetOrder {
    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            0 => Some(Self::Value),
            1 => Some(Self::First),
            2 => Some(Self::Second),
            _ => None,
        }
    }

    pub fn level(self) -> u8 {
        self as u8
    }

    /// Channels per point for `k` derivative axes.
    pub fn channels(self, k: usize) -> usize {
        match self {
            Self::Value => 1,
            Self::First => 1 + k,
            Self::Second => 1 + 2 * k,
        }
    }
}

/// Value and input derivatives of the network at one point.
///
/// `grad[i]` and `diag2[i]` refer to the i-th requested axis; for
/// [`jet_forward`] those are all input coordinates in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub diag2: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, axes: usize) -> Self {
        Self { value, grad: vec![0.0; axes], diag2: vec![0.0; axes] }
    }
}

/// Jets of a batch of points, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JetBatch {
    order: JetOrder,
    axes: Vec<usize>,
    n: usize,
    data: Vec<f64>,
}

impl JetBatch {
    pub fn zeros(order: JetOrder, axes: &[usize], n: usize) -> Self {
        let data = vec![0.0; n * order.channels(axes.len())];
        Self { order, axes: axes.to_vec(), n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn value(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.data[..self.n]
    }

    /// First derivative of point `i` along the `slot`-th requested axis.
    pub fn grad(&self, i: usize, slot: usize) -> f64 {
        debug_assert!(self.order >= JetOrder::First);
        self.data[(1 + slot) * self.n + i]
    }

    pub fn diag2(&self, i: usize, slot: usize) -> f64 {
        debug_assert!(self.order == JetOrder::Second);
        self.data[(1 + self.axes.len() + slot) * self.n + i]
    }

    pub fn jet(&self, i: usize) -> Jet {
        let k = self.axes.len();
        let grad = if self.order >= JetOrder::First { (0..k).map(|s| self.grad(i, s)).collect() } else { Vec::new() };
        let diag2 = if self.order == JetOrder::Second { (0..k).map(|s| self.diag2(i, s)).collect() } else { Vec::new() };
        Jet { value: self.value(i), grad, diag2 }
    }
}

impl JetBatch {
    /// Packs per-point jets into a batch. Each jet must carry `axes.len()`
    /// entries for every derivative level included in `order`.
    pub fn from_jets(order: JetOrder, axes: &[usize], jets: &[Jet]) -> Result<Self, JetError> {
        let k = axes.len();
        let mut batch = Self::zeros(order, axes, jets.len());
        let n = jets.len();
        for (i, jet) in jets.iter().enumerate() {
            batch.data[i] = jet.value;
            if order >= JetOrder::First {
                if jet.grad.len() != k {
                    return Err(JetError::DimensionMismatch { expected: k, got: jet.grad.len() });
                }
                for (s, g) in jet.grad.iter().enumerate() {
                    batch.data[(1 + s) * n + i] = *g;
                }
            }
            if order == JetOrder::Second {
                if jet.diag2.len() != k {
                    return Err(JetError::DimensionMismatch { expected: k, got: jet.diag2.len() });
                }
                for (s, h) in jet.diag2.iter().enumerate() {
                    batch.data[(1 + k + s) * n + i] = *h;
                }
            }
        }
        Ok(batch)
    }
}

/// A scalar field that can report jets at batches of points.
///
/// Implemented by [`Mlp`]; test code and evaluation also wrap exact
/// solutions in it.
pub trait FieldModel {
    fn input_width(&self) -> usize;

    fn jets(&self, inputs: &[f64], order: JetOrder, axes: &[usize]) -> Result<JetBatch, JetError>;

    fn values(&self, inputs: &[f64]) -> Result<Vec<f64>, JetError> {
        Ok(self.jets(inputs, JetOrder::Value, &[])?.values().to_vec())
    }
}

impl FieldModel for Mlp {
    fn input_width(&self) -> usize {
        Mlp::input_width(self)
    }

    fn jets(&self, inputs: &[f64], order: JetOrder, axes: &[usize]) -> Result<JetBatch, JetError> {
        jet_batch(self, inputs, order, axes)
    }

    fn values(&self, inputs: &[f64]) -> Result<Vec<f64>, JetError> {
        values(self, inputs)
    }
}

/// Flat gradient, laid out exactly like [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    widths: Vec<usize>,
    data: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self { widths: model.widths().to_vec(), data: vec![0.0; model.params().len()] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// `(weights, biases)` gradient of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let mut off = 0;
        for k in 0..l {
            off += self.widths[k] * self.widths[k + 1] + self.widths[k + 1];
        }
        let nw = self.widths[l] * self.widths[l + 1];
        (&self.data[off..off + nw], &self.data[off + nw..off + nw + self.widths[l + 1]])
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamGradient, scale: f64) {
        assert_eq!(self.data.len(), other.data.len(), "gradient shapes differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-point loss contributions and jet adjoints filled in by a loss closure.
///
/// Contributions are summed in point order, so the total is reproducible.
#[derive(Debug, Clone)]
pub struct LossSeeds {
    contrib: Vec<f64>,
    adjoint: JetBatch,
}

impl LossSeeds {
    fn new(order: JetOrder, axes: &[usize], n: usize) -> Self {
        Self { contrib: vec![0.0; n], adjoint: JetBatch::zeros(order, axes, n) }
    }

    /// Adds `value` to the loss, attributed to point `i`.
    pub fn add_loss(&mut self, i: usize, value: f64) {
        self.contrib[i] += value;
    }

    pub fn seed_value(&mut self, i: usize, d: f64) {
        self.adjoint.data[i] += d;
    }

    pub fn seed_grad(&mut self, i: usize, slot: usize, d: f64) {
        let n = self.adjoint.n;
        self.adjoint.data[(1 + slot) * n + i] += d;
    }

    pub fn seed_diag2(&mut self, i: usize, slot: usize, d: f64) {
        let n = self.adjoint.n;
        let k = self.adjoint.axes.len();
        self.adjoint.data[(1 + k + slot) * n + i] += d;
    }

    fn total(&self) -> Result<f64, JetError> {
        let mut total = 0.0;
        for (point, c) in self.contrib.iter().enumerate() {
            if !c.is_finite() {
                return Err(JetError::NonFiniteLoss { point });
            }
            total += c;
        }
        let n = self.adjoint.n;
        if let Some(pos) = self.adjoint.data.iter().position(|v| !v.is_finite()) {
            return Err(JetError::NonFiniteLoss { point: pos % n.max(1) });
        }
        Ok(total)
    }
}

/// Loss value with its parameter gradient.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub loss: f64,
    pub grad: ParamGradient,
}

/// Jet of `model` at a single `input`, differentiated along every input
/// coordinate.
pub fn jet_forward(model: &Mlp, input: &[f64], order: JetOrder) -> Result<Jet, JetError> {
    let axes: Vec<usize> = (0..model.input_width()).collect();
    let batch = jet_batch(model, input, order, &axes)?;
    let mut jet = batch.jet(0);
    if order == JetOrder::Value {
        jet.grad.clear();
    }
    Ok(jet)
}

/// Jets for `n` points stored row-major in `inputs` (`n x input_width`).
pub fn jet_batch(model: &Mlp, inputs: &[f64], order: JetOrder, axes: &[usize]) -> Result<JetBatch, JetError> {
    let mut tape = Tape::record(model, inputs, order, axes, false)?;
    Ok(std::mem::replace(&mut tape.output, JetBatch::zeros(order, &[], 0)))
}

/// Network values only, for `n` row-major points.
pub fn values(model: &Mlp, inputs: &[f64]) -> Result<Vec<f64>, JetError> {
    Ok(jet_batch(model, inputs, JetOrder::Value, &[])?.data)
}

/// Gradient of a scalar loss assembled from batch jets.
///
/// `loss` receives the forward jets and records per-point contributions and
/// adjoints (`d loss / d jet component`) into [`LossSeeds`]; the adjoints are
/// then pulled back through the network.
pub fn param_gradient<F>(
    model: &Mlp,
    inputs: &[f64],
    order: JetOrder,
    axes: &[usize],
    loss: F,
) -> Result<LossGradient, JetError>
where
    F: FnOnce(&JetBatch, &mut LossSeeds),
{
    let tape = Tape::record(model, inputs, order, axes, true)?;
    let mut seeds = LossSeeds::new(order, axes, tape.n);
    loss(&tape.output, &mut seeds);
    let total = seeds.total()?;
    let grad = tape.backward(&seeds.adjoint);
    Ok(LossGradient { loss: total, grad })
}

struct Tape<'m> {
    model: &'m Mlp,
    order: JetOrder,
    k: usize,
    n: usize,
    /// Input matrix of every layer (`rows x n_in`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation matrix of every layer (`rows x n_out`).
    preacts: Vec<Vec<f64>>,
    output: JetBatch,
}

impl<'m> Tape<'m> {
    fn record(model: &'m Mlp, inputs: &[f64], order: JetOrder, axes: &[usize], keep: bool) -> Result<Self, JetError> {
        let width = model.input_width();
        if inputs.len() % width != 0 {
            return Err(JetError::DimensionMismatch { expected: width, got: inputs.len() % width });
        }
        if let Some(&axis) = axes.iter().find(|&&a| a >= width) {
            return Err(JetError::AxisOutOfRange { axis, width });
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(JetError::NonFiniteInput { point: pos / width, coord: pos % width });
        }
        model.check_finite()?;

        let n = inputs.len() / width;
        let k = if order == JetOrder::Value { 0 } else { axes.len() };
        let channels = order.channels(k);
        let rows = n * channels;

        let shift = model.input_shift();
        let scale = model.input_scale();
        let mut a = pool::take_zeroed(rows * width);
        for p in 0..n {
            for c in 0..width {
                a[p * width + c] = (inputs[p * width + c] - shift[c]) * scale[c];
            }
        }
        for (slot, &axis) in axes.iter().enumerate().take(k) {
            let block = (1 + slot) * n;
            for p in 0..n {
                a[(block + p) * width + axis] = scale[axis];
            }
        }

        let layouts = model.layouts();
        let params = model.params();
        let last = layouts.len() - 1;
        let mut tape_inputs = Vec::new();
        let mut tape_preacts = Vec::new();
        for (l, lay) in layouts.iter().enumerate() {
            let mut z = pool::take_dirty(rows * lay.n_out);
            gemm_a_wt(rows, lay.n_in, lay.n_out, &a, &params[lay.w..lay.b], &mut z);
            let bias = &params[lay.b..lay.b + lay.n_out];
            for p in 0..n {
                for (zj, bj) in z[p * lay.n_out..(p + 1) * lay.n_out].iter_mut().zip(bias) {
                    *zj += bj;
                }
            }
            if l == last {
                if keep {
                    tape_inputs.push(a);
                } else {
                    pool::give(a);
                }
                let output = JetBatch { order, axes: axes[..k].to_vec(), n, data: z };
                return Ok(Self { model, order, k, n, inputs: tape_inputs, preacts: tape_preacts, output });
            }
            let next = tanh_forward(&z, n, k, order, lay.n_out);
            if keep {
                tape_inputs.push(a);
                tape_preacts.push(z);
            } else {
                pool::give(a);
                pool::give(z);
            }
            a = next;
        }
        unreachable!("network has at least one layer")
    }

    fn backward(&self, seeds: &JetBatch) -> ParamGradient {
        let layouts = self.model.layouts();
        let params = self.model.params();
        let rows = self.n * self.order.channels(self.k);
        let mut grad = ParamGradient::zeros_like(self.model);
        let mut zbar = pool::take_dirty(seeds.data.len());
        zbar.copy_from_slice(&seeds.data);
        for l in (0..layouts.len()).rev() {
            let lay = layouts[l];
            let a = &self.inputs[l];
            // dW = zbar^T a
            unsafe {
                matrixmultiply::dgemm(
                    lay.n_out,
                    rows,
                    lay.n_in,
                    1.0,
                    zbar.as_ptr(),
                    1,
                    lay.n_out as isize,
                    a.as_ptr(),
                    lay.n_in as isize,
                    1,
                    0.0,
                    grad.data[lay.w..].as_mut_ptr(),
                    lay.n_in as isize,
                    1,
                );
            }
            let db = &mut grad.data[lay.b..lay.b + lay.n_out];
            for p in 0..self.n {
                for (d, z) in db.iter_mut().zip(&zbar[p * lay.n_out..(p + 1) * lay.n_out]) {
                    *d += z;
                }
            }
            if l == 0 {
                break;
            }
            // abar = zbar W
            let mut abar = pool::take_dirty(rows * lay.n_in);
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    lay.n_out,
                    lay.n_in,
                    1.0,
                    zbar.as_ptr(),
                    lay.n_out as isize,
                    1,
                    params[lay.w..].as_ptr(),
                    lay.n_in as isize,
                    1,
                    0.0,
                    abar.as_mut_ptr(),
                    lay.n_in as isize,
                    1,
                );
            }
            let next = tanh_backward(&self.preacts[l - 1], a, &abar, self.n, self.k, self.order, lay.n_in);
            pool::give(abar);
            pool::give(std::mem::replace(&mut zbar, next));
        }
        pool::give(zbar);
        grad
    }
}

impl Drop for Tape<'_> {
    fn drop(&mut self) {
        for buf in self.inputs.drain(..).chain(self.preacts.drain(..)) {
            pool::give(buf);
        }
    }
}

/// `z = a W^T` with `a: rows x n_in`, `W: n_out x n_in`, both row-major.
fn gemm_a_wt(rows: usize, n_in: usize, n_out: usize, a: &[f64], w: &[f64], z: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * n_in);
    debug_assert_eq!(z.len(), rows * n_out);
    if rows == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            rows,
            n_in,
            n_out,
            1.0,
            a.as_ptr(),
            n_in as isize,
            1,
            w.as_ptr(),
            1,
            n_in as isize,
            0.0,
            z.as_mut_ptr(),
            n_out as isize,
            1,
        );
    }
}

fn tanh_forward(z: &[f64], n: usize, k: usize, order: JetOrder, width: usize) -> Vec<f64> {
    let block = n * width;
    let mut out = pool::take_dirty(z.len());
    let (vals, rest) = out.split_at_mut(block);
    fastmath::tanh_into(&z[..block], vals);
    if order == JetOrder::Value {
        return out;
    }
    let (firsts, seconds) = rest.split_at_mut(k * block);
    for slot in 0..k {
        let zp = &z[(1 + slot) * block..(2 + slot) * block];
        let o1 = &mut firsts[slot * block..(slot + 1) * block];
        for ((o, &s), &p) in o1.iter_mut().zip(vals.iter()).zip(zp) {
            *o = (1.0 - s * s) * p;
        }
        if order == JetOrder::Second {
            let zpp = &z[(1 + k + slot) * block..(2 + k + slot) * block];
            let o2 = &mut seconds[slot * block..(slot + 1) * block];
            for (((o, &s), &p), &q) in o2.iter_mut().zip(vals.iter()).zip(zp).zip(zpp) {
                let d1 = 1.0 - s * s;
                *o = -2.0 * s * d1 * p * p + d1 * q;
            }
        }
    }
    out
}

/// Pulls adjoints of the tanh outputs back to the pre-activations. `act`
/// holds the forward outputs, whose value rows are `tanh(z)`.
fn tanh_backward(z: &[f64], act: &[f64], abar: &[f64], n: usize, k: usize, order: JetOrder, width: usize) -> Vec<f64> {
    let block = n * width;
    let s = &act[..block];
    let mut zbar = pool::take_dirty(z.len());
    let (zv, rest) = zbar.split_at_mut(block);
    for ((o, &si), &g) in zv.iter_mut().zip(s).zip(&abar[..block]) {
        *o = g * (1.0 - si * si);
    }
    if order == JetOrder::Value {
        return zbar;
    }
    let (firsts, seconds) = rest.split_at_mut(k * block);
    for slot in 0..k {
        let r1 = (1 + slot) * block..(2 + slot) * block;
        let zp = &z[r1.clone()];
        let g1 = &abar[r1];
        let o1 = &mut firsts[slot * block..(slot + 1) * block];
        if order == JetOrder::First {
            for idx in 0..block {
                let si = s[idx];
                let d1 = 1.0 - si * si;
                let d2 = -2.0 * si * d1;
                zv[idx] += g1[idx] * d2 * zp[idx];
                o1[idx] = g1[idx] * d1;
            }
        } else {
            let r2 = (1 + k + slot) * block..(2 + k + slot) * block;
            let zpp = &z[r2.clone()];
            let g2 = &abar[r2];
            let o2 = &mut seconds[slot * block..(slot + 1) * block];
            for idx in 0..block {
                let si = s[idx];
                let d1 = 1.0 - si * si;
                let d2 = -2.0 * si * d1;
                let d3 = (6.0 * si * si - 2.0) * d1;
                let p = zp[idx];
                zv[idx] += g1[idx] * d2 * p + g2[idx] * (d3 * p * p + d2 * zpp[idx]);
                o1[idx] = g1[idx] * d1 + 2.0 * g2[idx] * d2 * p;
                o2[idx] = g2[idx] * d1;
            }
        }
    }
    zbar
}
