use rand::Rng as _;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use super::JetError;
use crate::rng;

/// Fully connected network with tanh hidden layers and an identity output.
///
/// Parameters live in one flat buffer, layer by layer, each layer storing its
/// weight matrix (row-major, `out x in`) followed by its bias vector. The
/// optional input map applies `(z - shift) * scale` before the first layer
/// and is not trainable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot(widths: &[usize], seed: u64) -> Result<Self, JetError> {
        validate_widths(widths)?;
        let mut rng = rng::seeded(seed, rng::stream::INIT);
        let mut params = Vec::with_capacity(param_count(widths));
        for pair in widths.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            params.extend((0..n_in * n_out).map(|_| rng.sample(dist)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Ok(Self {
            input_shift: vec![0.0; widths[0]],
            input_scale: vec![1.0; widths[0]],
            widths: widths.to_vec(),
            params,
        })
    }

    /// Builds a network from explicit per-layer `(weights, biases)`, weights
    /// row-major `out x in`.
    pub fn from_layers(widths: &[usize], layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, JetError> {
        validate_widths(widths)?;
        if layers.len() != widths.len() - 1 {
            return Err(JetError::InvalidModel(format!(
                "{} layers given for {} widths",
                layers.len(),
                widths.len()
            )));
        }
        let mut params = Vec::with_capacity(param_count(widths));
        for (l, (w, b)) in layers.iter().enumerate() {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            if w.len() != n_in * n_out || b.len() != n_out {
                return Err(JetError::InvalidModel(format!(
                    "layer {l}: expected {n_out}x{n_in} weights and {n_out} biases, got {} and {}",
                    w.len(),
                    b.len()
                )));
            }
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        let model = Self {
            input_shift: vec![0.0; widths[0]],
            input_scale: vec![1.0; widths[0]],
            widths: widths.to_vec(),
            params,
        };
        model.check_finite()?;
        Ok(model)
    }

    /// Maps input coordinate `i` from `[lo_i, hi_i]` onto `[-1, 1]`.
    pub fn with_input_box(mut self, lo: &[f64], hi: &[f64]) -> Result<Self, JetError> {
        let n = self.input_width();
        if lo.len() != n || hi.len() != n {
            return Err(JetError::DimensionMismatch { expected: n, got: lo.len().min(hi.len()) });
        }
        for i in 0..n {
            let span = hi[i] - lo[i];
            if !(span.is_finite() && span > 0.0) {
                return Err(JetError::InvalidModel(format!("input box axis {i} is empty")));
            }
            self.input_shift[i] = 0.5 * (lo[i] + hi[i]);
            self.input_scale[i] = 2.0 / span;
        }
        Ok(self)
    }

    pub fn set_input_map(&mut self, shift: Vec<f64>, scale: Vec<f64>) -> Result<(), JetError> {
        let n = self.input_width();
        if shift.len() != n || scale.len() != n {
            return Err(JetError::DimensionMismatch { expected: n, got: shift.len().min(scale.len()) });
        }
        if shift.iter().chain(&scale).any(|v| !v.is_finite()) {
            return Err(JetError::InvalidModel("non-finite input map".into()));
        }
        self.input_shift = shift;
        self.input_scale = scale;
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_shift(&self) -> &[f64] {
        &self.input_shift
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let lay = self.layout(l);
        (
            &self.params[lay.w..lay.w + lay.n_in * lay.n_out],
            &self.params[lay.b..lay.b + lay.n_out],
        )
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let lay = self.layout(l);
        let (head, tail) = self.params.split_at_mut(lay.b);
        (&mut head[lay.w..], &mut tail[..lay.n_out])
    }

    pub(crate) fn layout(&self, l: usize) -> LayerLayout {
        let mut off = 0;
        for k in 0..l {
            off += self.widths[k] * self.widths[k + 1] + self.widths[k + 1];
        }
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        LayerLayout { n_in, n_out, w: off, b: off + n_in * n_out }
    }

    pub(crate) fn layouts(&self) -> Vec<LayerLayout> {
        (0..self.n_layers()).map(|l| self.layout(l)).collect()
    }

    pub fn check_finite(&self) -> Result<(), JetError> {
        if let Some(index) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(JetError::NonFiniteParameter { index });
        }
        Ok(())
    }
}

pub(crate) fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
}

fn validate_widths(widths: &[usize]) -> Result<(), JetError> {
    if widths.len() < 2 {
        return Err(JetError::InvalidModel("need at least an input and an output width".into()));
    }
    if widths.contains(&0) {
        return Err(JetError::InvalidModel("layer widths must be positive".into()));
    }
    if *widths.last().unwrap() != 1 {
        return Err(JetError::InvalidModel("output width must be 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let a = Mlp::glorot(&[2, 8, 8, 1], 7).unwrap();
        let b = Mlp::glorot(&[2, 8, 8, 1], 7).unwrap();
        let c = Mlp::glorot(&[2, 8, 8, 1], 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
        let (w, bias) = a.layer(1);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        assert!(bias.iter().all(|&v| v == 0.0));
        assert_eq!(a.params().len(), 2 * 8 + 8 + 8 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(Mlp::glorot(&[2], 0).is_err());
        assert!(Mlp::glorot(&[2, 0, 1], 0).is_err());
        assert!(Mlp::glorot(&[2, 4, 2], 0).is_err());
    }

    #[test]
    fn from_layers_checks_shapes_and_finiteness() {
        assert!(Mlp::from_layers(&[2, 1], &[(vec![1.0], vec![0.0])]).is_err());
        let err = Mlp::from_layers(&[1, 1], &[(vec![f64::NAN], vec![0.0])]).unwrap_err();
        assert!(matches!(err, JetError::NonFiniteParameter { index: 0 }));
    }
}
