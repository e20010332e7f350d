//! Microbenchmarks for the hot kernels: norms, pairwise distances, the MDS
//! eigendecomposition, the mesh Laplacian, and one solver step of each
//! simulator.

use criterion::{Criterion, criterion_group, criterion_main};
use std::hint::black_box;

use lpq::cgle::{CgleInit, CgleParams, CgleSim};
use lpq::field::PQ;
use lpq::gray_scott::{self, GrayScottParams, GsInit, GsIntegrator, MeshLaplacian};
use lpq::mds::{DEFAULT_EPS_KEEP, embed};
use lpq::metrics::{distance, distance_matrix};
use lpq::space::icosphere;

use lpq_bench::{planted_distances, seeded_frames};

fn bench_field_norm(c: &mut Criterion) {
    let frames = seeded_frames(1, 128, 128, 2, 7);
    let field = &frames[0];
    let mut group = c.benchmark_group("field_norm_128x128_rank2");
    for (label, pq) in [
        ("l22", PQ::l22()),
        ("l11", PQ::l11()),
        ("l3_1_5", PQ::new(3.0, 1.5).unwrap()),
        ("linf_l2", PQ::new(f64::INFINITY, 2.0).unwrap()),
    ] {
        group.bench_function(label, |b| b.iter(|| black_box(field).norm(pq)));
    }
    group.finish();
}

fn bench_pairwise_distance(c: &mut Criterion) {
    let frames = seeded_frames(2, 128, 128, 2, 11);
    let mut group = c.benchmark_group("distance_128x128_rank2");
    group.bench_function("l22", |b| {
        b.iter(|| distance(black_box(&frames[0]), black_box(&frames[1]), PQ::l22()).unwrap())
    });
    group.bench_function("l1_inf", |b| {
        let pq = PQ::new(1.0, f64::INFINITY).unwrap();
        b.iter(|| distance(black_box(&frames[0]), black_box(&frames[1]), pq).unwrap())
    });
    group.finish();
}

fn bench_distance_matrix(c: &mut Criterion) {
    let frames = seeded_frames(60, 64, 64, 1, 13);
    let mut group = c.benchmark_group("distance_matrix_60x_64x64");
    group.sample_size(20);
    group.bench_function("l22", |b| {
        b.iter(|| distance_matrix(black_box(&frames), PQ::l22()).unwrap())
    });
    group.bench_function("l3_1_5", |b| {
        let pq = PQ::new(3.0, 1.5).unwrap();
        b.iter(|| distance_matrix(black_box(&frames), pq).unwrap())
    });
    group.finish();
}

fn bench_mds_embed(c: &mut Criterion) {
    let dm = planted_distances(200, 6, 17);
    let mut group = c.benchmark_group("mds_embed");
    group.sample_size(20);
    group.bench_function("200_frames", |b| {
        b.iter(|| embed(black_box(&dm), DEFAULT_EPS_KEEP).unwrap())
    });
    group.finish();
}

fn bench_mesh_laplacian(c: &mut Criterion) {
    let mesh = icosphere(1.0, 5).unwrap();
    let lap = MeshLaplacian::new(&mesh).unwrap();
    let f: Vec<f64> = mesh.vertices().iter().map(|v| v[0] * v[1] + v[2]).collect();
    let mut out = vec![0.0; mesh.n_vertices()];
    c.bench_function("cotan_laplacian_apply_level5", |b| {
        b.iter(|| lap.laplace_beltrami(black_box(&f), &mut out))
    });
}

fn bench_cgle_step(c: &mut Criterion) {
    let params = CgleParams {
        t_end: 1e9, // stepped manually; never reached
        init: CgleInit::SeededNoise {
            seed: 3,
            amplitude: 0.01,
        },
        ..CgleParams::default()
    };
    let mut sim = CgleSim::new(params).unwrap();
    c.bench_function("cgle_step_128x128", |b| b.iter(|| sim.step().unwrap()));
}

fn bench_gray_scott(c: &mut Criterion) {
    let params = GrayScottParams {
        t_end: 50.0,
        output_stride: 50.0,
        dt: Some(1.0),
        level: 3,
        init: GsInit::Patch {
            seed: 5,
            noise_amplitude: 0.01,
        },
        integrator: GsIntegrator::Euler,
        ..GrayScottParams::default()
    };
    let mut group = c.benchmark_group("gray_scott_50_steps_level3");
    group.sample_size(20);
    group.bench_function("euler", |b| {
        b.iter(|| gray_scott::simulate(black_box(&params)).unwrap())
    });
    group.finish();
}

criterion_group!(
    kernels,
    bench_field_norm,
    bench_pairwise_distance,
    bench_distance_matrix,
    bench_mds_embed,
    bench_mesh_laplacian,
    bench_cgle_step,
    bench_gray_scott,
);
criterion_main!(kernels);
