use candle_core::{DType, Tensor, D};

use crate::corpus::ClassWeights;
use crate::error::{Error, Result};

/// Numerator and denominator of the weighted mean: `sum_i w_i * nll_i` and
/// `sum_i w_i`, both scalars.
pub(crate) fn weighted_nll_terms(
    logits: &Tensor,
    labels: &Tensor,
    weights: Option<&ClassWeights>,
) -> Result<(Tensor, Tensor)> {
    let (batch, classes) = logits.dims2()?;
    if batch == 0 || classes != 2 || labels.dims() != [batch] {
        return Err(Error::InvalidArgument(format!(
            "logits {:?} and labels {:?} do not form a [B x 2] / [B] pair",
            logits.dims(),
            labels.dims()
        )));
    }
    let host: Vec<f64> = logits.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;
    if host.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "logits" });
    }
    let labels = labels.to_dtype(DType::U32)?;
    if labels.to_vec1::<u32>()?.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }

    let log_probs = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    let nll = log_probs
        .gather(&labels.unsqueeze(1)?, 1)?
        .squeeze(1)?
        .neg()?;
    let table = weights.copied().unwrap_or_default().by_index();
    let class_w = Tensor::new(&table, logits.device())?.to_dtype(logits.dtype())?;
    let w = class_w.index_select(&labels, 0)?;
    Ok(((nll * &w)?.sum_all()?, w.sum_all()?))
}

/// Class-weighted mean cross-entropy over a `[B x 2]` logit matrix:
/// `sum_i w[y_i] * -log softmax(z_i)[y_i] / sum_i w[y_i]`. With `None` every
/// class weighs 1 and this is the plain mean.
pub fn weighted_cross_entropy(
    logits: &Tensor,
    labels: &Tensor,
    weights: Option<&ClassWeights>,
) -> Result<Tensor> {
    let (num, den) = weighted_nll_terms(logits, labels, weights)?;
    Ok(num.div(&den)?)
}
