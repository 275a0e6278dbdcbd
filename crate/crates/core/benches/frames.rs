use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffrx::exec::Exec;
use diffrx::link::{run_ber_sweep, Link, LinkConfig, ReceiverKind, StopRule};

fn sweeps(c: &mut Criterion) {
    let toy = LinkConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/toy.cfg")).unwrap();
    let cases = [
        ("toy-ls", Link::without_model(toy).unwrap().with_receiver(ReceiverKind::BaselineLs)),
        ("default-ls", Link::without_model(LinkConfig::default()).unwrap()),
    ];
    let stop = StopRule {
        min_frames: 64,
        max_frames: 64,
        target_errors: usize::MAX,
    };
    let mut group = c.benchmark_group("sweep_64_frames");
    group.sample_size(10);
    for (name, link) in &cases {
        for exec in [Exec::Serial, Exec::Parallel] {
            group.bench_with_input(BenchmarkId::new(*name, format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| run_ber_sweep(link, &[8.0], stop, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
