use std::sync::Arc;

use nikodym::counterexample::{slab_row, trapping, SlabConfig};
use nikodym::fold::{fold_trials, Rho};
use nikodym::tube::{intersection_volume, Tube};
use nikodym::{BuiltinKind, BuiltinMetric, Metric};

fn metric(kind: BuiltinKind) -> Arc<dyn Metric> {
    Arc::new(BuiltinMetric::new(kind).unwrap())
}

#[test]
fn crossing_volume_scales_like_delta_cubed_over_angle() {
    let m = metric(BuiltinKind::Euclidean);
    let d = 1.0 / 32.0;
    let a = Tube::through(&m, [0.0; 3], [1.0, 0.0, 0.0], -0.5, 0.5, d).unwrap().on_grid(d / 4.0);
    for th in [4.0 * d, 0.25, 0.5] {
        let b = Tube::through(&m, [0.0; 3], [th.cos(), th.sin(), 0.0], -0.5, 0.5, d).unwrap().on_grid(d / 4.0);
        let r = intersection_volume(&a, &b) / (d.powi(3) / th);
        assert!((0.25..=16.0).contains(&r), "θ = {th}: {r}");
    }
}

#[test]
fn sogge_slab_short_ladder() {
    let m = metric(BuiltinKind::Sogge);
    let cfg = SlabConfig { n_x: 8, n_theta: 3, n_t: 4, ..SlabConfig::sogge() };
    let rows: Vec<_> = [0.125, 0.0625, 0.03125].iter().map(|d| slab_row(&m, &cfg, *d).unwrap()).collect();
    for w in rows.windows(2) {
        let k = (w[0].delta / w[1].delta).ln();
        let s = (w[0].min_fstar / w[1].min_fstar).ln() / k;
        assert!((s - 0.25).abs() < 0.1, "{s}");
        let s = (w[0].omega_star / w[1].omega_star).ln() / k;
        assert!((s - 0.25).abs() < 0.1, "{s}");
    }
    for r in &rows {
        assert_eq!(r.good_fraction, 1.0);
        assert!((r.omega_volume_grid / r.omega_volume - 1.0).abs() < 0.05);
    }
}

#[test]
fn quartic_geodesics_stay_in_the_slab() {
    let m = metric(BuiltinKind::Sogge);
    let r = trapping(&m, 1.0 / 64.0, 0.3, 1.0, 30, 11, 1e-3).unwrap();
    assert_eq!(r.trapped, r.samples);
}

#[test]
fn flat_model_never_folds() {
    let r = fold_trials(&Rho::zero(), &[0.05, 0.025], 10, 1).unwrap();
    assert!(r.chaotic_violated);
    assert_eq!(r.fold_fraction, 0.0);
}
