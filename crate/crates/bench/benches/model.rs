use criterion::{criterion_group, criterion_main, Criterion};
use idrr_core::model::{EncoderSpec, ModelConfig, MultiTaskModel};
use idrr_core::SenseHierarchy;
use std::hint::black_box;

fn forward(c: &mut Criterion) {
    let h = SenseHierarchy::canonical();
    let config = ModelConfig {
        encoder: EncoderSpec {
            model_id: "tiny-hash-64".into(),
            ..EncoderSpec::default()
        },
        ..ModelConfig::default()
    };
    let model = MultiTaskModel::new(config, &h).unwrap();
    let embeddings: Vec<Vec<f64>> = (0..32)
        .map(|i| model.encode(&format!("the market fell {i} points"), "because investors sold").unwrap())
        .collect();

    c.bench_function("encode", |b| {
        b.iter(|| model.encode(black_box("prices rose sharply"), black_box("demand outpaced supply")).unwrap())
    });
    c.bench_function("forward/32", |b| b.iter(|| model.forward(black_box(&embeddings)).unwrap()));
}

criterion_group!(benches, forward);
criterion_main!(benches);
