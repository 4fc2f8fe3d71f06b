use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Layer widths `p_0, …, p_{L+1}`: input, hidden layers, output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MlpSpec {
    widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::config(format!(
                "an MLP needs at least input and output widths, got {widths:?}"
            )));
        }
        if let Some(pos) = widths.iter().position(|&w| w == 0) {
            return Err(Error::config(format!("layer width {pos} is zero")));
        }
        Ok(Self { widths })
    }

    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    /// Number of hidden layers `L`.
    pub fn hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn parameter_count(&self) -> usize {
        let weights: usize = self.widths.windows(2).map(|w| w[0] * w[1]).sum();
        weights + self.hidden_widths().iter().sum::<usize>()
    }
}

impl TryFrom<Vec<usize>> for MlpSpec {
    type Error = Error;

    fn try_from(widths: Vec<usize>) -> Result<Self> {
        Self::new(widths)
    }
}

impl From<MlpSpec> for Vec<usize> {
    fn from(spec: MlpSpec) -> Self {
        spec.widths
    }
}

/// Parameters of the network. `weights[j]` is `p_{j+1} × p_j`; `biases[j]`
/// is the activation bias of hidden layer `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    spec: MlpSpec,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Gradients with the same layout as [`MlpModel`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0_f64, |acc, g| acc.max(g.abs()))
    }
}

/// Activations kept from the forward pass for backpropagation.
struct Tape {
    /// `inputs[j]` is the input to weight matrix `j` (`inputs[0]` is `X`).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation values `Z_j - v_j` of each hidden layer.
    shifted: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl MlpModel {
    /// He-style initialization: `W_j ~ N(0, 2 / fan_in)`, biases zero.
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        let mut rng = rng::rng_from(seed);
        let weights = spec
            .widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .expect("positive standard deviation");
                Array2::from_shape_simple_fn((fan_out, fan_in), || normal.sample(&mut rng))
            })
            .collect();
        let biases = spec.hidden_widths().iter().map(|&w| Array1::zeros(w)).collect();
        Self {
            spec: spec.clone(),
            weights,
            biases,
        }
    }

    /// Assemble a model from explicit parameters, validating every shape.
    pub fn from_parts(
        spec: MlpSpec,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let widths = spec.widths();
        if weights.len() != widths.len() - 1 {
            return Err(Error::shape(format!(
                "expected {} weight matrices, got {}",
                widths.len() - 1,
                weights.len()
            )));
        }
        for (j, w) in weights.iter().enumerate() {
            if w.dim() != (widths[j + 1], widths[j]) {
                return Err(Error::shape(format!(
                    "weight {j} has shape {:?}, expected {:?}",
                    w.dim(),
                    (widths[j + 1], widths[j])
                )));
            }
        }
        let hidden = spec.hidden_widths();
        if biases.len() != hidden.len() {
            return Err(Error::shape(format!(
                "expected {} bias vectors, got {}",
                hidden.len(),
                biases.len()
            )));
        }
        for (j, (b, &w)) in biases.iter().zip(hidden).enumerate() {
            if b.len() != w {
                return Err(Error::shape(format!(
                    "bias {} has length {}, expected {w}",
                    j + 1,
                    b.len()
                )));
            }
        }
        let finite = weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::config("model parameters must be finite"));
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Evaluate the network on one input vector.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::shape(format!(
                "input has length {}, model expects {}",
                x.len(),
                self.spec.input_dim()
            )));
        }
        let mut h = self.weights[0].dot(&x);
        for (w, v) in self.weights[1..].iter().zip(&self.biases) {
            Zip::from(&mut h).and(v).for_each(|z, &b| *z = (*z - b).max(0.0));
            h = w.dot(&h);
        }
        Ok(h)
    }

    /// Evaluate the network on every row of `x`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_inputs(x)?;
        Ok(self.run(x, false).output)
    }

    fn check_inputs(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.spec.input_dim() {
            return Err(Error::shape(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    fn run(&self, x: ArrayView2<'_, f64>, record: bool) -> Tape {
        let mut inputs = Vec::new();
        let mut shifted = Vec::new();
        let mut h = x.dot(&self.weights[0].t());
        if record {
            inputs.push(x.to_owned());
        }
        for (w, v) in self.weights[1..].iter().zip(&self.biases) {
            h -= v;
            if record {
                shifted.push(h.clone());
            }
            h.mapv_inplace(|z| z.max(0.0));
            let next = h.dot(&w.t());
            if record {
                inputs.push(h);
            }
            h = next;
        }
        Tape {
            inputs,
            shifted,
            output: h,
        }
    }

    /// Mean over rows of the squared Euclidean error, and its exact gradient.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
    ) -> Result<(f64, Gradients)> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyWindow("training window has no rows"));
        }
        self.check_inputs(x)?;
        if y.dim() != (n, self.spec.output_dim()) {
            return Err(Error::shape(format!(
                "targets have shape {:?}, expected {:?}",
                y.dim(),
                (n, self.spec.output_dim())
            )));
        }
        let tape = self.run(x, true);
        let mut delta = tape.output - &y;
        let loss = delta.iter().map(|r| r * r).sum::<f64>() / n as f64;
        delta *= 2.0 / n as f64;

        let layers = self.weights.len();
        let mut grad_w: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut grad_b: Vec<Array1<f64>> = Vec::with_capacity(layers - 1);
        for j in (0..layers).rev() {
            grad_w.push(delta.t().dot(&tape.inputs[j]));
            if j > 0 {
                let mut back = delta.dot(&self.weights[j]);
                Zip::from(&mut back)
                    .and(&tape.shifted[j - 1])
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
                grad_b.push(-back.sum_axis(Axis(0)));
                delta = back;
            }
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
        ))
    }

    /// Mean squared-error loss only.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyWindow("window has no rows"));
        }
        Ok(sum_squared_error(&self.predict(x)?, y)? / n as f64)
    }
}

pub(crate) fn sum_squared_error(pred: &Array2<f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != y.dim() {
        return Err(Error::shape(format!(
            "prediction shape {:?} does not match target shape {:?}",
            pred.dim(),
            y.dim()
        )));
    }
    Ok(Zip::from(pred)
        .and(&y)
        .fold(0.0, |acc, &p, &t| acc + (t - p) * (t - p)))
}
