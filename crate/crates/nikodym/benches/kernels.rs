use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nikodym::boxcount::box_count;
use nikodym::counterexample::{slab_row, SlabConfig};
use nikodym::expr::Region;
use nikodym::grid::ScalarField;
use nikodym::maximal::{nikodym_max, CompiledMaximal, DirectionNet, GeodesicFamily};
use nikodym::{Aabb, BuiltinKind, BuiltinMetric, Metric};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn metric(kind: BuiltinKind) -> Arc<dyn Metric> {
    Arc::new(BuiltinMetric::new(kind).unwrap())
}

fn maximal(c: &mut Criterion) {
    let m = metric(BuiltinKind::SpaceForm { k: 1.0 });
    let delta = 1.0 / 16.0;
    let f = ScalarField::from_fn(delta / 3.0, &Aabb::cube(0.6), |x| (4.0 * x[0]).sin() * x[1] + x[2]);
    let fam = GeodesicFamily::AllDirections { alpha: 0.5, net: DirectionNet::for_delta(0.3) };
    let pts: Vec<_> = (0..16).map(|i| [0.02 * i as f64 - 0.15, 0.01 * i as f64, 0.0]).collect();
    let mut g = c.benchmark_group("maximal");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("direct", name), |b| b.iter(|| pool.install(|| nikodym_max(&m, &f, delta, &fam, &pts).unwrap())));
        let comp = pool.install(|| CompiledMaximal::compile(&m, &f, delta, &fam, &pts).unwrap());
        g.bench_function(BenchmarkId::new("compiled_apply", name), |b| b.iter(|| pool.install(|| comp.apply(&f).unwrap())));
    }
    g.finish();
}

fn slab(c: &mut Criterion) {
    let m = metric(BuiltinKind::Sogge);
    let cfg = SlabConfig { n_x: 8, n_theta: 4, n_t: 4, ..SlabConfig::sogge() };
    let mut g = c.benchmark_group("slab_row");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(name, |b| b.iter(|| pool.install(|| slab_row(&m, &cfg, 1.0 / 32.0).unwrap())));
    }
    g.finish();
}

fn boxes(c: &mut Criterion) {
    let r = Region::parse("x1^2 + x2^2 + x3^2 == 1").unwrap();
    let mut g = c.benchmark_group("box_count");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(name, |b| b.iter(|| pool.install(|| box_count(&r, &Aabb::cube(1.5), 1.0 / 128.0).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, maximal, slab, boxes);
criterion_main!(benches);
