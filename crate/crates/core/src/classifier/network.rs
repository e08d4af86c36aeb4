//! Feed-forward network: ReLU hidden layers, softmax output, mean
//! cross-entropy loss, and its analytic gradient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Lower clamp applied to probabilities inside [`loss`].
pub const PROB_FLOOR: f64 = 1e-12;

/// One affine layer, `z = a Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// out × in.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    fn n_params(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    /// `a Wᵀ + b`.
    fn apply(&self, a: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(a.rows(), self.outputs());
        for i in 0..a.rows() {
            let x = a.row(i);
            for (o, out) in z.row_mut(i).iter_mut().enumerate() {
                *out = dot(self.weights.row(o), x) + self.bias[o];
            }
        }
        z
    }
}

/// The trained network plus the class names of its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    /// Hidden layers followed by the output layer.
    pub layers: Vec<Dense>,
    /// Output index → class name.
    pub label_dict: Vec<String>,
    pub input_dim: usize,
}

impl ClassifierModel {
    /// All-zero network with the given layer widths.
    pub fn zeros(input_dim: usize, hidden: &[usize], label_dict: Vec<String>) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden.iter().chain(core::iter::once(&label_dict.len())) {
            layers.push(Dense::zeros(prev, h));
            prev = h;
        }
        ClassifierModel {
            layers,
            label_dict,
            input_dim,
        }
    }

    /// He-uniform weights for the ReLU layers, Glorot-uniform for the output
    /// layer, zero biases; drawn layer by layer, row-major.
    pub fn initialize<R: Rng>(input_dim: usize, hidden: &[usize], label_dict: Vec<String>, rng: &mut R) -> Self {
        let mut model = Self::zeros(input_dim, hidden, label_dict);
        let last = model.layers.len() - 1;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let fan_in = layer.inputs() as f64;
            let fan_out = layer.outputs() as f64;
            let limit = if i == last {
                libm::sqrt(6.0 / (fan_in + fan_out))
            } else {
                libm::sqrt(6.0 / fan_in)
            };
            for w in layer.weights.as_mut_slice() {
                *w = rng.random_range(-limit..limit);
            }
        }
        model
    }

    pub fn n_classes(&self) -> usize {
        self.label_dict.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Checks the layer chain `input_dim → hidden… → classes` and that every
    /// weight is finite.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        let mut prev = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.inputs() != prev || l.bias.len() != l.outputs() {
                return Err(Error::invalid(alloc::format!("layer {} has inconsistent shape", i + 1)));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("network weights"));
            }
            prev = l.outputs();
        }
        if prev != self.label_dict.len() {
            return Err(Error::DimensionMismatch {
                context: "network outputs vs label dictionary",
                expected: self.label_dict.len(),
                found: prev,
            });
        }
        Ok(())
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim,
                found: inputs.cols(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer; the last entry holds the logits.
    fn pre_activations(&self, inputs: &Matrix) -> Result<Vec<Matrix>> {
        self.check_input(inputs)?;
        let mut zs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = match zs.last() {
                None => layer.apply(inputs),
                Some(prev) => layer.apply(&relu(prev)),
            };
            if !z.is_finite() {
                return Err(Error::NonFiniteActivation { layer: i + 1 });
            }
            zs.push(z);
        }
        Ok(zs)
    }

    pub fn logits(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.pre_activations(inputs)?.pop().expect("at least one layer"))
    }
}

fn relu(z: &Matrix) -> Matrix {
    let mut a = z.clone();
    a.as_mut_slice().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
    a
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    p
}

/// Class probabilities, one softmax row per input row.
pub fn forward(model: &ClassifierModel, inputs: &Matrix) -> Result<Matrix> {
    Ok(softmax_rows(&model.logits(inputs)?))
}

fn check_same_shape(a: &Matrix, b: &Matrix, context: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        let (expected, found) = if a.rows() != b.rows() {
            (a.rows(), b.rows())
        } else {
            (a.cols(), b.cols())
        };
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Mean cross-entropy `-(1/N) Σᵢ Σⱼ yᵢⱼ ln ŷᵢⱼ`, probabilities clamped to
/// `[1e-12, 1]`.
pub fn loss(predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    check_same_shape(predictions, targets, "loss targets vs predictions")?;
    let n = predictions.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p_row, y_row) in predictions.row_iter().zip(targets.row_iter()) {
        for (&p, &y) in p_row.iter().zip(y_row) {
            if y != 0.0 {
                total -= y * libm::log(p.clamp(PROB_FLOOR, 1.0));
            }
        }
    }
    Ok(total / n as f64)
}

/// Cross-entropy computed from logits through log-sum-exp.
pub fn loss_from_logits(logits: &Matrix, targets: &Matrix) -> Result<f64> {
    check_same_shape(logits, targets, "loss targets vs logits")?;
    let n = logits.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (z, y) in logits.row_iter().zip(targets.row_iter()) {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(z.iter().map(|v| libm::exp(v - max)).sum::<f64>());
        for (&zj, &yj) in z.iter().zip(y) {
            if yj != 0.0 {
                total += yj * (lse - zj);
            }
        }
    }
    Ok(total / n as f64)
}

/// One-hot encoding of class ids.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Matrix {
    let mut y = Matrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        y[(i, l)] = 1.0;
    }
    y
}

/// Gradient of the mean loss with respect to every layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Mean cross-entropy of `inputs` against `targets` (rows summing to one) and
/// its gradient, by backpropagation through the fused softmax/cross-entropy.
pub fn loss_and_gradients(model: &ClassifierModel, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Gradients)> {
    let zs = model.pre_activations(inputs)?;
    let logits = zs.last().expect("at least one layer");
    let loss = loss_from_logits(logits, targets)?;
    let n = inputs.rows().max(1) as f64;

    // dL/dlogits = (softmax - y) / N
    let mut delta = softmax_rows(logits);
    for (d, y) in delta.as_mut_slice().iter_mut().zip(targets.as_slice()) {
        *d = (*d - y) / n;
    }

    let mut grads: Vec<Dense> = model
        .layers
        .iter()
        .map(|l| Dense::zeros(l.inputs(), l.outputs()))
        .collect();
    for li in (0..model.layers.len()).rev() {
        let activ = if li == 0 { inputs.clone() } else { relu(&zs[li - 1]) };
        let g = &mut grads[li];
        for i in 0..delta.rows() {
            let d = delta.row(i);
            let a = activ.row(i);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                g.bias[o] += dv;
                for (w, &x) in g.weights.row_mut(o).iter_mut().zip(a) {
                    *w += dv * x;
                }
            }
        }
        if li == 0 {
            break;
        }
        let layer = &model.layers[li];
        let mut next = Matrix::zeros(delta.rows(), layer.inputs());
        for i in 0..delta.rows() {
            let out = next.row_mut(i);
            for (o, &dv) in delta.row(i).iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                for (n, &w) in out.iter_mut().zip(layer.weights.row(o)) {
                    *n += dv * w;
                }
            }
            // ReLU derivative, taken as 0 at 0
            for (n, &z) in out.iter_mut().zip(zs[li - 1].row(i)) {
                if z <= 0.0 {
                    *n = 0.0;
                }
            }
        }
        delta = next;
    }
    Ok((loss, Gradients { layers: grads }))
}

/// Step used for the central differences in [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Relative disagreement between an analytic and a numeric derivative,
/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    libm::fabs(analytic - numeric) / (libm::fabs(analytic) + libm::fabs(numeric)).max(1e-8)
}

/// Largest relative error between the backpropagated gradient and central
/// finite differences (step [`FD_STEP`]) over every parameter.
pub fn gradient_check(model: &ClassifierModel, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
    let (_, grads) = loss_and_gradients(model, inputs, targets)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let eval = |m: &ClassifierModel| -> Result<f64> { loss_from_logits(&m.logits(inputs)?, targets) };
    for li in 0..model.layers.len() {
        for p in 0..probe.layers[li].weights.as_slice().len() {
            let orig = probe.layers[li].weights.as_slice()[p];
            probe.layers[li].weights.as_mut_slice()[p] = orig + FD_STEP;
            let up = eval(&probe)?;
            probe.layers[li].weights.as_mut_slice()[p] = orig - FD_STEP;
            let down = eval(&probe)?;
            probe.layers[li].weights.as_mut_slice()[p] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grads.layers[li].weights.as_slice()[p], numeric));
        }
        for p in 0..probe.layers[li].bias.len() {
            let orig = probe.layers[li].bias[p];
            probe.layers[li].bias[p] = orig + FD_STEP;
            let up = eval(&probe)?;
            probe.layers[li].bias[p] = orig - FD_STEP;
            let down = eval(&probe)?;
            probe.layers[li].bias[p] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grads.layers[li].bias[p], numeric));
        }
    }
    Ok(worst)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
