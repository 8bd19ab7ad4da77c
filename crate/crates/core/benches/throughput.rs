use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use parskel::config::PipelineConfig;
use parskel::pipeline::{bench_frames, bench_render_fuse};
use parskel::Exec;

fn render_fuse(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    let frames = bench_frames(&cfg, 240).expect("synthetic frames");
    let mut g = c.benchmark_group("render_fuse");
    g.throughput(Throughput::Elements(frames.len() as u64));
    for (name, exec) in [("serial", Exec::Serial), ("parallel", Exec::Parallel)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| bench_render_fuse(&cfg, &frames, exec).expect("bench runs"))
        });
    }
    g.finish();
}

criterion_group!(benches, render_fuse);
criterion_main!(benches);
