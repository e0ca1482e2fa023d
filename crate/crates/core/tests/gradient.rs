//! Analytic head gradients against central finite differences.

use candle_core::{Tensor, Var};
use persuasion_core::{
    build_model, encode_batch, weighted_cross_entropy, ClassWeights, ClassifierModel, TokenBatch,
    TINY_RANDOM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOLERANCE: f64 = 1e-3;

fn random_batch(
    model: &ClassifierModel,
    rng: &mut ChaCha8Rng,
    rows: usize,
) -> (TokenBatch, Vec<u32>) {
    let texts: Vec<String> = (0..rows)
        .map(|_| {
            let n = rng.random_range(1..12);
            (0..n)
                .map(|_| format!("tok{}", rng.random_range(0..740)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let labels = (0..rows).map(|_| rng.random_range(0..2u32)).collect();
    (encode_batch(model.segmenter(), &texts, 64).unwrap(), labels)
}

fn loss(model: &ClassifierModel, batch: &TokenBatch, labels: &Tensor, w: &ClassWeights) -> Tensor {
    let logits = model.forward_eval(batch).unwrap();
    weighted_cross_entropy(&logits, labels, Some(w)).unwrap()
}

fn scalar(t: &Tensor) -> f64 {
    t.to_scalar::<f64>().unwrap()
}

fn numeric_grad(
    model: &ClassifierModel,
    var: &Var,
    batch: &TokenBatch,
    labels: &Tensor,
    w: &ClassWeights,
) -> Vec<f64> {
    let shape = var.shape().clone();
    let base: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut probe = base.clone();
        probe[i] = base[i] + STEP;
        var.set(&Tensor::from_vec(probe.clone(), &shape, var.device()).unwrap())
            .unwrap();
        let plus = scalar(&loss(model, batch, labels, w));
        probe[i] = base[i] - STEP;
        var.set(&Tensor::from_vec(probe, &shape, var.device()).unwrap())
            .unwrap();
        let minus = scalar(&loss(model, batch, labels, w));
        out.push((plus - minus) / (2.0 * STEP));
    }
    var.set(&Tensor::from_vec(base, &shape, var.device()).unwrap())
        .unwrap();
    out
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Worst relative error over both head parameters for three seeded batches.
fn worst_head_gradient_error(seed: u64) -> f64 {
    let mut model = build_model(TINY_RANDOM, 0.1, seed).unwrap();
    model.set_training(false);
    let weights = ClassWeights::new(0.7, 1.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let (batch, labels) = random_batch(&model, &mut rng, 6);
        let labels = Tensor::new(labels.as_slice(), &candle_core::Device::Cpu).unwrap();
        let grads = loss(&model, &batch, &labels, &weights).backward().unwrap();
        let (w, b) = model.head_vars();
        for var in [w, b] {
            let analytic: Vec<f64> = grads
                .get(var.as_tensor())
                .expect("head parameter receives a gradient")
                .flatten_all()
                .unwrap()
                .to_vec1()
                .unwrap();
            let numeric = numeric_grad(&model, var, &batch, &labels, &weights);
            for (a, n) in analytic.iter().zip(&numeric) {
                worst = worst.max(relative_error(*a, *n));
            }
        }
    }
    worst
}

#[test]
fn head_gradients_match_finite_differences() {
    let worst = worst_head_gradient_error(5);
    assert!(worst <= TOLERANCE, "worst relative error {worst}");
}

#[test]
fn encoder_gradients_flow() {
    let mut model = build_model(TINY_RANDOM, 0.0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (batch, labels) = random_batch(&model, &mut rng, 4);
    let labels = Tensor::new(labels.as_slice(), &candle_core::Device::Cpu).unwrap();
    let logits = model.forward(&batch, true).unwrap();
    let grads = weighted_cross_entropy(&logits, &labels, None)
        .unwrap()
        .backward()
        .unwrap();
    let missing: Vec<&String> = model
        .params()
        .iter()
        .filter(|(_, v)| grads.get(v.as_tensor()).is_none())
        .map(|(k, _)| k)
        .collect();
    assert!(missing.is_empty(), "no gradient for {missing:?}");
}
