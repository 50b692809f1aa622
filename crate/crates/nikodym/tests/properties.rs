use std::sync::Arc;

use nikodym::fold::{fold_hessian, identity_check, singular_kappa_r, FoldClass, ModelFamily, Rho, RANK_TOL};
use nikodym::grid::{lp_norm, ScalarField};
use nikodym::maximal::{CompiledMaximal, DirectionNet, GeodesicFamily};
use nikodym::tube::Tube;
use nikodym::{Aabb, BuiltinKind, BuiltinMetric, Metric};
use proptest::prelude::*;
use std::sync::OnceLock;

const DELTA: f64 = 0.0625;

fn euclid() -> Arc<dyn Metric> {
    Arc::new(BuiltinMetric::new(BuiltinKind::Euclidean).unwrap())
}

fn layout() -> ScalarField {
    ScalarField::from_fn(DELTA / 3.0, &Aabb::cube(0.6), |_| 0.0)
}

fn compiled() -> &'static CompiledMaximal {
    static C: OnceLock<CompiledMaximal> = OnceLock::new();
    C.get_or_init(|| {
        let fam = GeodesicFamily::AllDirections { alpha: 0.5, net: DirectionNet::for_delta(0.4) };
        let pts = [[0.0; 3], [0.1, -0.05, 0.02], [-0.1, 0.1, 0.1]];
        CompiledMaximal::compile(&euclid(), &layout(), DELTA, &fam, &pts).unwrap()
    })
}

fn field(seed: [f64; 4]) -> ScalarField {
    let l = layout();
    let vals = (0..l.len()).map(|o| {
        let x = l.center(o);
        seed[0] * (7.0 * x[0] + seed[1]).sin() + seed[2] * (5.0 * x[1] * x[2] + seed[3]).cos()
    });
    ScalarField { values: vals.collect(), ..l }
}

fn arr4() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maximal_is_sublinear_and_homogeneous(a in arr4(), b in arr4(), s in -3.0f64..3.0) {
        let c = compiled();
        let (f, g) = (field(a), field(b));
        let fg = f.zip(&g, |x, y| x + y).unwrap();
        let (mf, mg, mfg) = (c.apply(&f).unwrap(), c.apply(&g).unwrap(), c.apply(&fg).unwrap());
        let ms = c.apply(&f.map(|v| s * v)).unwrap();
        for i in 0..mf.len() {
            prop_assert!(mfg[i] <= mf[i] + mg[i] + 1e-9);
            prop_assert!((ms[i] - s.abs() * mf[i]).abs() <= 1e-9 * (1.0 + mf[i]));
        }
    }

    #[test]
    fn maximal_is_monotone(a in arr4(), bump in 0.0f64..1.0) {
        let c = compiled();
        let f = field(a);
        let g = f.map(|v| v.abs() + bump);
        let (mf, mg) = (c.apply(&f).unwrap(), c.apply(&g).unwrap());
        for i in 0..mf.len() {
            prop_assert!(mf[i] <= mg[i] + 1e-12);
        }
    }

    #[test]
    fn lp_norm_is_homogeneous(a in arr4(), s in 0.1f64..5.0, p in 1.0f64..6.0) {
        let m = euclid();
        let f = field(a);
        let lhs = lp_norm(m.as_ref(), &f.map(|v| s * v), p);
        prop_assert!((lhs - s * lp_norm(m.as_ref(), &f, p)).abs() <= 1e-9 * (1.0 + lhs));
    }

    #[test]
    fn affine_rho_identities_vanish(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, x1 in -1.0f64..1.0, tau in 0.001f64..0.5, sign in prop::bool::ANY) {
        let fam = ModelFamily::new(Rho::affine(c0, c1));
        let tau = if sign { tau } else { -tau };
        let r = identity_check(&fam, x1, x1 + tau).unwrap();
        prop_assert!(r.r1.abs() <= 1e-12 && r.r2.abs() <= 1e-12);
    }

    #[test]
    fn kappa_r_has_rank_two_on_admissible_set(x1 in -1.0f64..1.0, tau in 0.01f64..0.2, r in 0.5f64..2.0, phi in 0.0f64..std::f64::consts::TAU, c0 in 0.5f64..2.0) {
        let fam = ModelFamily::new(Rho::Sin { a: c0, w: -1.0, phi: 0.3 });
        let z = [x1, tau * r * phi.cos(), tau * r * phi.sin()];
        if let Some(k) = singular_kappa_r(&fam, z, x1 + tau, 10.0) {
            let f = fold_hessian(&k, z);
            prop_assert!(f.singular_values[1] >= RANK_TOL);
            prop_assert_ne!(f.class, FoldClass::NotClassifiable);
        }
    }

    #[test]
    fn fold_hessian_is_stable_along_the_singular_set(x1 in -1.0f64..1.0, phi in 0.0f64..std::f64::consts::TAU, dz in -1e-2f64..1e-2) {
        let fam = ModelFamily::new(Rho::affine(1.0, 0.5));
        let tau = 0.05;
        let z = [x1, tau * phi.cos(), tau * phi.sin()];
        let k = singular_kappa_r(&fam, z, x1 + tau, 10.0);
        prop_assume!(k.is_some());
        let k = k.unwrap();
        let h0 = fold_hessian(&k, z).hess;
        // move z₁ and re-solve for the singular direction: a nearby point of the level set
        let z2 = [x1 + dz, z[1], z[2]];
        let k2 = singular_kappa_r(&fam, z2, x1 + tau, 10.0);
        prop_assume!(k2.is_some());
        let k2 = k2.unwrap();
        let h1 = fold_hessian(&k2, z2).hess;
        prop_assert!((h1 / h0 - 1.0).abs() < 0.05, "{h0} {h1}");
    }

    #[test]
    fn tube_distance_ignores_orientation(y in prop::array::uniform3(-0.3f64..0.3), v in prop::array::uniform3(-1.0f64..1.0)) {
        prop_assume!(v.iter().map(|a| a * a).sum::<f64>() > 0.1);
        let t = Tube::through(&euclid(), [0.0; 3], v, -0.4, 0.4, DELTA).unwrap();
        let r = t.reversed();
        prop_assert!((t.distance(y).0 - r.distance(y).0).abs() < 1e-12);
    }
}
