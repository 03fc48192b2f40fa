//! Compares the rayon data-parallel paths against the sequential
//! fallbacks on the two hot loops: prompt batch rendering and mock batch
//! evaluation. Requires the `parallel` feature (on by default) so both
//! code paths are compiled.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use valign_core::catalog::default_catalog;
use valign_core::context::enumerate_contexts;
use valign_core::gateway::{
    run_evaluation_with_mode, EvalOptions, ExecMode, MockBackend, ModelConfig,
};
use valign_core::metrics::{
    aggregate_prompt_scores, alignment_distance, alignment_rate, binarize, scope_rows,
};
use valign_core::prompt::{PromptEngine, PromptRecord};

fn bench_prompt_batch(c: &mut Criterion) {
    let engine = PromptEngine::bundled();
    let contexts = enumerate_contexts();
    let catalog = default_catalog();
    let total = (contexts.len() * catalog.len() * valign_core::prompt::VARIANT_COUNT) as u64;

    let mut group = c.benchmark_group("prompt_batch");
    group.throughput(Throughput::Elements(total));
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| engine.generate_prompt_batch_seq(&contexts, catalog))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| engine.generate_prompt_batch_par(&contexts, catalog))
    });
    group.finish();
}

fn bench_mock_eval(c: &mut Criterion) {
    let engine = PromptEngine::bundled();
    let batch: Vec<PromptRecord> = engine
        .generate_prompt_batch(&enumerate_contexts(), default_catalog())
        .iter()
        .map(|p| p.to_record())
        .collect();
    let mut config = ModelConfig::mock();
    config.parallelism = std::thread::available_parallelism().map_or(4, |n| n.get());
    let options = EvalOptions::default();

    let mut group = c.benchmark_group("mock_eval");
    group.throughput(Throughput::Elements(batch.len() as u64));
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let backend = MockBackend::new(42);
            run_evaluation_with_mode(&backend, &config, &batch, &options, ExecMode::Sequential)
                .unwrap()
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let backend = MockBackend::new(42);
            run_evaluation_with_mode(&backend, &config, &batch, &options, ExecMode::Parallel)
                .unwrap()
        })
    });
    group.finish();
}

fn bench_metric_pipeline(c: &mut Criterion) {
    let engine = PromptEngine::bundled();
    let batch: Vec<PromptRecord> = engine
        .generate_prompt_batch(&enumerate_contexts(), default_catalog())
        .iter()
        .map(|p| p.to_record())
        .collect();
    let backend = MockBackend::new(42);
    let records = run_evaluation_with_mode(
        &backend,
        &ModelConfig::mock(),
        &batch,
        &EvalOptions::default(),
        ExecMode::default(),
    )
    .unwrap()
    .records;
    let survey = include_str!("../fixtures/survey_112.csv");
    let (kept, _) = valign_core::ingest::ingest_survey(survey.as_bytes(), default_catalog()).unwrap();
    let human = valign_core::ingest::aggregate_human_matrix(&kept);

    let mut group = c.benchmark_group("metric_pipeline");
    group.sample_size(30);
    group.bench_function("aggregate_rate_distance", |b| {
        b.iter(|| {
            let model = aggregate_prompt_scores(&records, 1).unwrap();
            let rate = alignment_rate(&binarize(&model), &binarize(&human), &scope_rows(None));
            let distance = alignment_distance(&model, &human);
            (rate, distance)
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_prompt_batch,
    bench_mock_eval,
    bench_metric_pipeline
);
criterion_main!(benches);
