use candle_core::{Device, Tensor};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use persuasion_core::synthetic::{pattern_corpus, PatternSpec};
use persuasion_core::{
    build_model, confusion, encode_batch, micro_f1, weighted_cross_entropy, ClassWeights, Label,
    Segmenter, TINY_RANDOM,
};

fn bench_micro_f1(c: &mut Criterion) {
    let n = 10_000;
    let gold: Vec<Label> = (0..n).map(|i| Label::from_index(i % 2).unwrap()).collect();
    let pred: Vec<Label> = (0..n)
        .map(|i| Label::from_index((i / 3) % 2).unwrap())
        .collect();
    c.bench_function("micro_f1/10k", |b| {
        b.iter(|| micro_f1(&confusion(black_box(&pred), black_box(&gold)).unwrap()).unwrap())
    });
}

fn bench_encode(c: &mut Criterion) {
    let segmenter = Segmenter::tiny();
    let corpus = pattern_corpus(&PatternSpec::new(32, 32, 1));
    let texts = corpus.texts();
    c.bench_function("encode_batch/64x128", |b| {
        b.iter(|| encode_batch(&segmenter, black_box(&texts), 128).unwrap())
    });
}

fn bench_forward(c: &mut Criterion) {
    let model = {
        let mut m = build_model(TINY_RANDOM, 0.1, 0).unwrap();
        m.set_training(false);
        m
    };
    let mut group = c.benchmark_group("tiny_forward");
    for rows in [8, 32] {
        let corpus = pattern_corpus(&PatternSpec::new(rows / 2, rows / 2, 2));
        let batch = encode_batch(model.segmenter(), &corpus.texts(), 32).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(rows), &batch, |b, batch| {
            b.iter(|| model.forward_eval(batch).unwrap())
        });
    }
    group.finish();
}

fn bench_loss(c: &mut Criterion) {
    let rows = 256;
    let logits: Vec<f64> = (0..rows * 2)
        .map(|i| ((i * 37) % 11) as f64 - 5.0)
        .collect();
    let logits = Tensor::from_vec(logits, (rows, 2), &Device::Cpu).unwrap();
    let labels: Vec<u32> = (0..rows as u32).map(|i| i % 2).collect();
    let labels = Tensor::new(labels.as_slice(), &Device::Cpu).unwrap();
    let w = ClassWeights::new(0.63269, 2.38409).unwrap();
    c.bench_function("weighted_cross_entropy/256", |b| {
        b.iter(|| weighted_cross_entropy(black_box(&logits), &labels, Some(&w)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_micro_f1,
    bench_encode,
    bench_forward,
    bench_loss
);
criterion_main!(benches);
