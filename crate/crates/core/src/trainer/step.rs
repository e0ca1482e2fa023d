use candle_core::{DType, Tensor, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};

use super::loss::weighted_cross_entropy;
use crate::corpus::ClassWeights;
use crate::error::{Error, Result};
use crate::model::ClassifierModel;
use crate::segment::TokenBatch;

/// Adam (betas 0.9 / 0.999, eps 1e-8, no weight decay).
#[derive(Debug)]
pub struct Adam {
    inner: AdamW,
}

impl Adam {
    pub fn new(vars: Vec<Var>, learning_rate: f64) -> Result<Self> {
        let params = ParamsAdamW {
            lr: learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        Ok(Self {
            inner: AdamW::new(vars, params)?,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.inner.learning_rate()
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.inner.set_learning_rate(lr);
    }
}

pub(crate) fn labels_tensor(batch: &TokenBatch, model: &ClassifierModel) -> Result<Tensor> {
    let labels = batch
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("training batch carries no labels".into()))?;
    Ok(Tensor::new(labels.as_slice(), model.params().device())?)
}

/// One optimization step on `batch`: fresh gradients, training-mode
/// forward, weighted loss, backpropagation, Adam update. Returns the loss
/// measured before the update.
pub fn training_step(
    model: &mut ClassifierModel,
    batch: &TokenBatch,
    weights: Option<&ClassWeights>,
    optimizer: &mut Adam,
) -> Result<f64> {
    let labels = labels_tensor(batch, model)?;
    // Gradients are never accumulated across steps: each backward pass
    // builds a new store starting from zero.
    let logits = model.forward(batch, true)?;
    let loss = weighted_cross_entropy(&logits, &labels, weights)?;
    let value = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "training loss",
        });
    }
    let grads = loss.backward()?;
    optimizer.inner.step(&grads)?;
    Ok(value)
}
