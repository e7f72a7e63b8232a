//! One worker versus all available workers on the data-parallel stages.
//! Build with `--no-default-features` to time the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lidargait::encoder::{forward_batch, Architecture, EncoderParams, SequenceInput, Tensor};
use lidargait::evaluation::distance_matrix;
use lidargait::geometry::{Point3, PointFrame};
use lidargait::par;
use lidargait::projection::{project, ProjectionConfig, ProjectionView};
use lidargait::seed;
use lidargait::synth::unit_f64;

fn thread_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn random_frames(n: usize, points: usize) -> Vec<PointFrame> {
    let mut rng = seed::rng(1);
    (0..n)
        .map(|t| {
            let pts = (0..points)
                .map(|_| {
                    Point3::new(
                        (4.0 + 4.0 * unit_f64(&mut rng)) as f32,
                        (unit_f64(&mut rng) - 0.5) as f32,
                        (1.8 * unit_f64(&mut rng) - 1.2) as f32,
                    )
                })
                .collect();
            PointFrame::new(pts, t as f64 * 0.1)
        })
        .collect()
}

fn bench_projection(c: &mut Criterion) {
    let frames = random_frames(64, 2000);
    let cfg = ProjectionConfig::with_view(ProjectionView::RangeView);
    let mut g = c.benchmark_group("project_64_frames");
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| {
                par::with_threads(t, || par::map(&frames, |f| project(f, &cfg).unwrap())).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_forward(c: &mut Criterion) {
    let arch = Architecture::standard(vec![ProjectionView::RangeView], 8);
    let params = EncoderParams::<f32>::init(&arch, 1).unwrap();
    let mut rng = seed::rng(2);
    let inputs: Vec<SequenceInput<f32>> = (0..8)
        .map(|_| {
            SequenceInput::single_view(
                (0..2)
                    .map(|_| {
                        let data = (0..64 * 64).map(|_| unit_f64(&mut rng) as f32).collect();
                        Tensor::from_vec(&[1, 64, 64], data).unwrap()
                    })
                    .collect(),
            )
        })
        .collect();
    let mut g = c.benchmark_group("forward_batch_8x2");
    g.sample_size(10);
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || forward_batch(&params, &inputs).unwrap()).unwrap())
        });
    }
    g.finish();
}

fn bench_distances(c: &mut Criterion) {
    let mut rng = seed::rng(3);
    let emb: Vec<Vec<f32>> = (0..400)
        .map(|_| (0..512).map(|_| unit_f64(&mut rng) as f32).collect())
        .collect();
    let refs: Vec<&[f32]> = emb.iter().map(Vec::as_slice).collect();
    let mut g = c.benchmark_group("distance_matrix_400");
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || distance_matrix(&refs, &refs)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_projection, bench_forward, bench_distances);
criterion_main!(benches);
