use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use isoconquer_core::kde::{pooled_kde, BandwidthPolicy, Kernel};
use isoconquer_core::models::draw_regression;
use isoconquer_core::pooling::{pooled_point_estimate, split};
use isoconquer_core::{fit_isotonic, ChernoffSampler, Direction, Functional, RegressionModel, StreamKey};
use rand::Rng;

fn fit(c: &mut Criterion) {
    let model = RegressionModel::linear(0.2).unwrap();
    let mut group = c.benchmark_group("fit_isotonic");
    for n in [1_000, 10_000, 100_000] {
        let sample = draw_regression(&model, n, &StreamKey::new(1, 0)).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| fit_isotonic(s, Direction::Nondecreasing))
        });
    }
    group.finish();
}

fn pooled(c: &mut Criterion) {
    let model = RegressionModel::linear(0.2).unwrap();
    let total = 30_000;
    let sample = draw_regression(&model, total, &StreamKey::new(2, 0)).unwrap();
    let mut group = c.benchmark_group("pooled_inverse");
    for m in [1, 10, 30, 90] {
        let (_, index_blocks) = split(total, m, true, &StreamKey::new(3, 0)).unwrap();
        let blocks: Vec<_> = index_blocks.iter().map(|ix| sample.subset(ix).unwrap()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(m), &blocks, |b, blocks| {
            b.iter(|| pooled_point_estimate(blocks, Functional::MuInverseAt(0.5), Direction::Nondecreasing))
        });
    }
    group.finish();
}

fn chernoff(c: &mut Criterion) {
    let sampler = ChernoffSampler::with_seed(4);
    let mut group = c.benchmark_group("chernoff");
    group.sample_size(10);
    group.bench_function("100_draws", |b| b.iter(|| sampler.sample(100).unwrap()));
    group.finish();
}

fn kde(c: &mut Criterion) {
    let mut rng = StreamKey::new(5, 0).rng();
    let points: Vec<f64> = (0..27_000).map(|_| rng.random::<f64>()).collect();
    let blocks: Vec<&[f64]> = points.chunks(1000).collect();
    let mut group = c.benchmark_group("pooled_kde");
    for (name, policy) in [
        ("fixed", BandwidthPolicy::FixedSubsample),
        ("undersmoothed", BandwidthPolicy::Undersmoothed),
    ] {
        group.bench_function(name, |b| b.iter(|| pooled_kde(&blocks, 0.5, policy, Kernel::Biweight)));
    }
    group.finish();
}

criterion_group!(benches, fit, pooled, chernoff, kde);
criterion_main!(benches);
