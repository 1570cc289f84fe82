use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion as Bench, Throughput};

use cmcsep::criteria::{CriteriaOptions, Criterion};
use cmcsep::harness::{self, BenchmarkOptions, ExecutionMode, SampleFamily};

fn chessboard(c: &mut Bench) {
    let n = 200;
    let mut group = c.benchmark_group("chessboard");
    group.sample_size(10).throughput(Throughput::Elements(n as u64));
    // Without the `parallel` feature both modes run sequentially.
    for (label, mode) in [("sequential", ExecutionMode::Sequential), ("parallel", ExecutionMode::Parallel)] {
        let opts = BenchmarkOptions {
            family: SampleFamily::Chessboard,
            n,
            seed: 1,
            criteria: vec![
                Criterion::Filter,
                Criterion::SingularValues,
                Criterion::Trace,
                Criterion::Schmidt,
                Criterion::Ccnr,
                Criterion::DeVicente,
            ],
            mode,
            criteria_options: CriteriaOptions::default(),
        };
        group.bench_with_input(BenchmarkId::new(label, n), &opts, |b, o| b.iter(|| harness::benchmark(o).unwrap()));
    }
    group.finish();
}

fn random_3x3(c: &mut Bench) {
    let n = 500;
    let mut group = c.benchmark_group("random-3x3-cm");
    group.sample_size(10).throughput(Throughput::Elements(n as u64));
    for (label, mode) in [("sequential", ExecutionMode::Sequential), ("parallel", ExecutionMode::Parallel)] {
        let opts = BenchmarkOptions {
            family: SampleFamily::Random { dims: (3, 3), rank: 9 },
            n,
            seed: 2,
            criteria: vec![Criterion::SingularValues, Criterion::Trace, Criterion::KyFanWeyl(1)],
            mode,
            criteria_options: CriteriaOptions::default(),
        };
        group.bench_with_input(BenchmarkId::new(label, n), &opts, |b, o| b.iter(|| harness::benchmark(o).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, chessboard, random_3x3);
criterion_main!(benches);
