//! Mini-batch Adam training with a stratified validation split and
//! best-checkpoint early stopping.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::network::{argmax, loss_and_gradients, loss_from_logits, one_hot, ClassifierModel, Gradients};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::split::{rng_from_seed, stratified_split};

/// Hidden-layer widths of the six studied architectures, in order.
pub const ARCHITECTURES: [&[usize]; 6] = [
    &[64, 16],
    &[64, 32, 16],
    &[100, 55],
    &[100, 55, 30],
    &[64, 32, 16, 32, 64],
    &[100, 55, 30, 55, 100],
];

/// Index into [`ARCHITECTURES`] of the default network.
pub const DEFAULT_ARCHITECTURE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub hidden_sizes: Vec<usize>,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub patience: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_sizes: ARCHITECTURES[DEFAULT_ARCHITECTURE].to_vec(),
            seed: 0,
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            validation_fraction: 0.2,
            patience: 10,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be a non-empty list of positive widths"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Adam with the usual defaults (β₁ 0.9, β₂ 0.999, ε 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, model: &ClassifierModel) -> Self {
        // one moment buffer per weight matrix and per bias vector
        let sizes: Vec<usize> = model
            .layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().len(), l.bias.len()])
            .collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn update(&mut self, model: &mut ClassifierModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        let mut slot = 0;
        for (layer, g) in model.layers.iter_mut().zip(&grads.layers) {
            let params: [(&mut [f64], &[f64]); 2] = [
                (layer.weights.as_mut_slice(), g.weights.as_slice()),
                (&mut layer.bias, &g.bias),
            ];
            for (theta, grad) in params {
                let m = &mut self.first[slot];
                let v = &mut self.second[slot];
                for i in 0..theta.len() {
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    theta[i] -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
                }
                slot += 1;
            }
        }
    }
}

/// Losses after one epoch. Epoch 0 describes the freshly initialized network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: ClassifierModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch]
    }
}

fn evaluate(model: &ClassifierModel, x: &Matrix, labels: &[usize], y: &Matrix) -> Result<(f64, f64)> {
    let logits = model.logits(x)?;
    let loss = loss_from_logits(&logits, y)?;
    let correct = logits
        .row_iter()
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count();
    Ok((loss, correct as f64 / labels.len().max(1) as f64))
}

/// Trains a network on `data` (rows × features) with class ids `labels`
/// indexing `label_dict`.
///
/// The seed drives, in order: the stratified validation split, weight
/// initialization, and the per-epoch shuffles; identical inputs give
/// bit-identical models. Training stops after `patience` consecutive epochs
/// without a lower validation loss, or after `epochs`.
pub fn train(data: &Matrix, labels: &[usize], label_dict: Vec<String>, config: &NetworkConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let n_classes = label_dict.len();
    if n_classes < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    if labels.len() != data.rows() {
        return Err(Error::DimensionMismatch {
            context: "training labels vs rows",
            expected: data.rows(),
            found: labels.len(),
        });
    }
    if !data.is_finite() {
        return Err(Error::NonFinite("training data"));
    }

    let mut rng = rng_from_seed(config.seed);
    let (train_idx, val_idx) = stratified_split(labels, n_classes, config.validation_fraction, &mut rng)?;
    let x_train = data.select_rows(&train_idx);
    let l_train: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let y_train = one_hot(&l_train, n_classes);
    let x_val = data.select_rows(&val_idx);
    let l_val: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
    let y_val = one_hot(&l_val, n_classes);

    let mut model = ClassifierModel::initialize(data.cols(), &config.hidden_sizes, label_dict, &mut rng);
    let mut adam = Adam::new(config.learning_rate, &model);

    let (train_loss, _) = evaluate(&model, &x_train, &l_train, &y_train)?;
    let (val_loss, val_accuracy) = evaluate(&model, &x_val, &l_val, &y_val)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss,
        val_loss,
        val_accuracy,
    }];
    let mut best_model = model.clone();
    let mut best_epoch = 0;
    let mut best_loss = val_loss;
    let mut stale = 0;

    let mut order: Vec<usize> = (0..x_train.rows()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xb = x_train.select_rows(batch);
            let yb = y_train.select_rows(batch);
            let (_, grads) = match loss_and_gradients(&model, &xb, &yb) {
                Ok(r) => r,
                Err(Error::NonFiniteActivation { .. }) => return Err(Error::NonFiniteLoss { epoch }),
                Err(e) => return Err(e),
            };
            adam.update(&mut model, &grads);
        }
        let evaluated = evaluate(&model, &x_train, &l_train, &y_train)
            .and_then(|(t, _)| evaluate(&model, &x_val, &l_val, &y_val).map(|(v, a)| (t, v, a)));
        let (train_loss, val_loss, val_accuracy) = match evaluated {
            Ok(r) => r,
            Err(Error::NonFiniteActivation { .. }) => return Err(Error::NonFiniteLoss { epoch }),
            Err(e) => return Err(e),
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best_model = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
    })
}
