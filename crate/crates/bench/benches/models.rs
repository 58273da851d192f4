use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use skyharvest::mimo::batch_throughput;
use skyharvest::pipeline::{cluster_gns, mission_params, run_pipeline, service_positions, trajectory_context};
use skyharvest::power::{reference_profiles, trajectory_power};
use skyharvest::scenario::HoverAccounting;
use skyharvest::scheduler::{bnb_mtsp, build_graph};
use skyharvest::trajectory_opt::{dual_ascent, lcso_optimize, EdgeCache};
use skyharvest::Point3;
use skyharvest_bench::{context, desk_spec, level_edge, small_swarm, default_spec};

fn power(c: &mut Criterion) {
    let s = default_spec();
    let profile = reference_profiles::non_inertial_3d(20.0);
    c.bench_function("power/non_inertial_3d_6001_samples", |b| {
        b.iter(|| trajectory_power(black_box(&profile), s.uav(), &s.env, HoverAccounting::Literal).unwrap())
    });
}

fn throughput(c: &mut Criterion) {
    let s = default_spec();
    let batch: Vec<_> = s.gns[..4].iter().collect();
    let p = Point3::new(1500.0, 1500.0, 100.0);
    let mut g = c.benchmark_group("throughput");
    for samples in [16usize, 64] {
        g.bench_function(format!("batch_of_4_{samples}_draws"), |b| {
            b.iter(|| batch_throughput(black_box(&p), &batch, 16, &s.env, samples, 7).unwrap())
        });
    }
    g.finish();
}

fn trajectory(c: &mut Criterion) {
    let s = default_spec();
    let swarm = small_swarm();
    let ctx = context(&s, &swarm);
    let e = level_edge();
    let mut g = c.benchmark_group("trajectory");
    g.sample_size(10);
    g.bench_function("lcso_1km", |b| b.iter(|| lcso_optimize(black_box(&e), 0.0, &ctx, 3, &[]).unwrap()));
    g.bench_function("dual_ascent_1km", |b| b.iter(|| dual_ascent(black_box(&e), &ctx, 3, &[]).unwrap()));
    g.finish();
}

fn scheduling(c: &mut Criterion) {
    let s = desk_spec();
    let clustering = cluster_gns(&s).unwrap();
    let positions = service_positions(&s, &clustering).unwrap();
    let graph = build_graph(&positions, &s.gns, &trajectory_context(&s), 1, &mut EdgeCache::new()).unwrap();
    let params = mission_params(&s);
    let mut g = c.benchmark_group("scheduling");
    g.sample_size(10);
    g.bench_function("bnb_desk_6_clusters_3_uavs", |b| b.iter(|| bnb_mtsp(black_box(&graph), &params)));
    g.bench_function("pipeline_desk", |b| b.iter(|| run_pipeline(black_box(&s), &mut EdgeCache::new()).unwrap()));
    g.finish();
}

criterion_group!(benches, power, throughput, trajectory, scheduling);
criterion_main!(benches);
