//! Multiplicity selection and bush extraction for families of δ-tubes.
//!
//! `E` is given as a field; a cell belongs to `E` when its value is at least ½.
//! All measures are cell sums of `√det g h³`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cell_center, CellIdx, ScalarField};
use crate::la::{self, Vec3};
use crate::tube::{tube_angle, GridTube};

fn in_e(e: &ScalarField, c: CellIdx) -> bool {
    e.get(c) >= 0.5
}

/// Tubes containing each lattice cell, in tube order.
pub fn cell_tubes(tubes: &[GridTube]) -> HashMap<CellIdx, Vec<u32>> {
    let mut map: HashMap<CellIdx, Vec<u32>> = HashMap::new();
    for (j, t) in tubes.iter().enumerate() {
        for c in &t.stencil.cells {
            map.entry(c.idx).or_default().push(j as u32);
        }
    }
    map
}

/// `|E ∩ T_j| / |T_j|` per tube.
pub fn densities(e: &ScalarField, tubes: &[GridTube]) -> Vec<f64> {
    tubes
        .iter()
        .map(|t| {
            let s: f64 = t.stencil.cells.iter().filter(|c| in_e(e, c.idx)).map(|c| c.vol).sum();
            s / t.stencil.volume
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicityReport {
    pub m: usize,
    pub n: usize,
    pub theta: f64,
    pub mu: f64,
    /// `log₂(1/δ)`
    pub log_inv_delta: f64,
    /// tubes satisfying the low-multiplicity bound at `N`
    pub case1: Vec<usize>,
    /// tubes with many `(θ, μ)` neighbours on a large part of `T_j ∩ E`
    pub case2: Vec<usize>,
    pub case1_holds: bool,
    pub case2_holds: bool,
    /// qualifying counts for every dyadic `(θ, μ)`, row-major in `θ`
    pub case2_counts: Vec<Vec<usize>>,
}

/// Smallest `N` such that at least `M/2` tubes have
/// `|{x ∈ T_j ∩ E: mult(x) ≤ N}| ≥ (λ/2)|T_j|`, then the dyadic `θ = 2^a δ`,
/// `μ = 2^b δ` maximizing the number of tubes with
/// `|{x ∈ T_j ∩ E: #I_θμ(x, j) ≥ N/(2L)²}| ≥ (4L)⁻² λ|T_j|`, `L = log₂(1/δ)`.
pub fn multiplicity_select(e: &ScalarField, tubes: &[GridTube], delta: f64, lambda: f64) -> Result<MultiplicityReport> {
    let m = tubes.len();
    if m == 0 {
        return Err(Error::Precondition("no tubes".into()));
    }
    if !(delta > 0.0 && delta < 1.0) || !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Invalid(format!("need 0 < δ < 1 and 0 < λ ≤ 1, got {delta}, {lambda}")));
    }
    for (j, d) in densities(e, tubes).iter().enumerate() {
        if *d < lambda {
            return Err(Error::Precondition(format!("|E ∩ T_{j}| = {d:.4}|T_{j}| < λ|T_{j}|")));
        }
    }
    let map = cell_tubes(tubes);
    let mult = |c: &CellIdx| map.get(c).map_or(0, |v| v.len());

    // smallest N per tube, then the ⌈M/2⌉-th smallest
    let per_tube: Vec<usize> = tubes
        .iter()
        .map(|t| {
            let mut cells: Vec<(usize, f64)> =
                t.stencil.cells.iter().filter(|c| in_e(e, c.idx)).map(|c| (mult(&c.idx), c.vol)).collect();
            cells.sort_by_key(|p| p.0);
            let need = 0.5 * lambda * t.stencil.volume;
            let mut acc = 0.0;
            for (k, v) in &cells {
                acc += v;
                if acc >= need * (1.0 - 1e-12) {
                    return *k;
                }
            }
            usize::MAX
        })
        .collect();
    let mut sorted = per_tube.clone();
    sorted.sort();
    let n = sorted[m.div_ceil(2) - 1];
    if n == usize::MAX {
        return Err(Error::Precondition("no multiplicity level qualifies".into()));
    }
    let case1: Vec<usize> = (0..m).filter(|j| per_tube[*j] <= n).collect();

    let l = (1.0 / delta).log2();
    let levels = l.floor() as usize + 1;

    // pairwise angles and shell flags for intersecting ordered pairs (i, j)
    let mut pairs: Vec<(u32, u32)> = map
        .values()
        .flat_map(|v| v.iter().flat_map(move |i| v.iter().filter(move |j| *j != i).map(move |j| (*i, *j))))
        .collect();
    pairs.sort();
    pairs.dedup();
    let h = e.h;
    let shell_need = lambda / (2.0 * l);
    let info: Vec<(f64, Vec<bool>)> = crate::par::map_slice(&pairs, |(i, j)| {
        let (ti, tj) = (&tubes[*i as usize], &tubes[*j as usize]);
        let angle = tube_angle(ti, tj);
        let mut shells = vec![0.0; levels];
        for c in ti.stencil.cells.iter().filter(|c| in_e(e, c.idx)) {
            let d = tj.tube.distance(cell_center(h, c.idx)).0;
            for (b, s) in shells.iter_mut().enumerate() {
                let mu = delta * 2f64.powi(b as i32);
                if d >= mu / 2.0 && d <= mu {
                    *s += c.vol;
                }
            }
        }
        let flags = shells.iter().map(|s| *s >= shell_need * ti.stencil.volume).collect();
        (angle, flags)
    });
    let pair_info: HashMap<(u32, u32), &(f64, Vec<bool>)> = pairs.iter().copied().zip(info.iter()).collect();

    let card_need = n as f64 / (2.0 * l).powi(2);
    let measure_need = lambda / (4.0 * l).powi(2);
    let mut counts = vec![vec![0usize; levels]; levels];
    let mut members: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); levels]; levels];
    for (a, row) in counts.iter_mut().enumerate() {
        let theta = delta * 2f64.powi(a as i32);
        for (b, cnt) in row.iter_mut().enumerate() {
            for (j, tj) in tubes.iter().enumerate() {
                let mut good = 0.0;
                for c in tj.stencil.cells.iter().filter(|c| in_e(e, c.idx)) {
                    let card = map[&c.idx]
                        .iter()
                        .filter(|i| **i as usize != j)
                        .filter(|i| {
                            let (ang, flags) = pair_info[&(**i, j as u32)];
                            *ang >= theta / 2.0 && *ang <= theta && flags[b]
                        })
                        .count();
                    if card as f64 >= card_need {
                        good += c.vol;
                    }
                }
                if good >= measure_need * tj.stencil.volume {
                    *cnt += 1;
                    members[a][b].push(j);
                }
            }
        }
    }
    let mut best = (0usize, 0usize);
    for a in 0..levels {
        for b in 0..levels {
            if counts[a][b] > counts[best.0][best.1] {
                best = (a, b);
            }
        }
    }
    let case2 = members[best.0][best.1].clone();
    Ok(MultiplicityReport {
        m,
        n,
        theta: delta * 2f64.powi(best.0 as i32),
        mu: delta * 2f64.powi(best.1 as i32),
        log_inv_delta: l,
        case1_holds: 2 * case1.len() >= m,
        case2_holds: case2.len() as f64 >= m as f64 / (2.0 * l).powi(2),
        case1,
        case2,
        case2_counts: counts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BushReport {
    pub a: Vec3,
    pub n0: usize,
    /// tubes through `a`
    pub bush: Vec<usize>,
    /// `|E|`
    pub e_measure: f64,
    /// radius of the excluded ball about `a`
    pub radius: f64,
    /// `min_j |T_j ∩ E \ B(a, r)| / |T_j|` over the bush
    pub rho: f64,
    /// `N₀ ρ μ²` with `μ` the tube radius
    pub bound: f64,
    /// `Σ_j |T_j ∩ E \ B(a, r)|` over the bush
    pub bush_sum: f64,
}

/// Cell of largest multiplicity (restricted to `E` when the tubes meet `E`),
/// ties broken by lattice order.
pub fn bush_extract(e: &ScalarField, tubes: &[GridTube], radius: f64) -> Result<BushReport> {
    if tubes.is_empty() {
        return Err(Error::Precondition("no tubes".into()));
    }
    let map = cell_tubes(tubes);
    let mut keys: Vec<&CellIdx> = map.keys().collect();
    keys.sort();
    let any_e = keys.iter().any(|c| in_e(e, **c));
    let mut best: Option<(&CellIdx, usize)> = None;
    for c in keys {
        if any_e && !in_e(e, *c) {
            continue;
        }
        let k = map[c].len();
        if best.is_none_or(|b| k > b.1) {
            best = Some((c, k));
        }
    }
    let (cell, n0) = best.unwrap();
    let h = e.h;
    let a = cell_center(h, *cell);
    let bush: Vec<usize> = map[cell].iter().map(|j| *j as usize).collect();
    let m = tubes[0].tube.metric();
    let g = m.g(a);
    let mut rho = f64::INFINITY;
    let mut bush_sum = 0.0;
    for j in &bush {
        let t = &tubes[*j];
        let s: f64 = t
            .stencil
            .cells
            .iter()
            .filter(|c| in_e(e, c.idx))
            .filter(|c| {
                let w = la::sub(cell_center(h, c.idx), a);
                la::inner(&g, w, w).sqrt() > radius
            })
            .map(|c| c.vol)
            .sum();
        bush_sum += s;
        rho = rho.min(s / t.stencil.volume);
    }
    let mu = tubes[0].tube.delta;
    let e_measure = crate::grid::superlevel_measure(m.as_ref(), e, 0.5);
    Ok(BushReport { a, n0, bush, e_measure, radius, rho, bound: n0 as f64 * rho * mu * mu, bush_sum })
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteBound {
    /// `Mδ²`
    pub lhs: f64,
    /// `C (δ^{−1/2−ε} λ^{−5/2} |E|)^{4/3}`
    pub rhs: f64,
    pub holds: bool,
}

pub fn discrete_bound(m: usize, delta: f64, lambda: f64, e_measure: f64, eps: f64, c: f64) -> DiscreteBound {
    let lhs = m as f64 * delta * delta;
    let rhs = c * (delta.powf(-0.5 - eps) * lambda.powf(-2.5) * e_measure).powf(4.0 / 3.0);
    DiscreteBound { lhs, rhs, holds: lhs <= rhs }
}

/// `λMδ² / (C N)`, the trivial lower bound for `|E|`.
pub fn trivial_lower_bound(m: usize, delta: f64, lambda: f64, n: usize, c: f64) -> f64 {
    lambda * m as f64 * delta * delta / (c * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Aabb, BuiltinKind, BuiltinMetric, Metric};
    use crate::tube::Tube;
    use std::sync::Arc;

    fn setup(dirs: &[(Vec3, Vec3)], delta: f64) -> (Vec<GridTube>, ScalarField) {
        let m: Arc<dyn Metric> = Arc::new(BuiltinMetric::new(BuiltinKind::Euclidean).unwrap());
        let h = delta / 3.0;
        let tubes: Vec<GridTube> =
            dirs.iter().map(|(x, v)| Tube::through(&m, *x, *v, -0.5, 0.5, delta).unwrap().on_grid(h)).collect();
        let mut e = ScalarField::covering(h, &Aabb::cube(0.8));
        for t in &tubes {
            for c in &t.stencil.cells {
                if let Some(o) = e.offset(c.idx) {
                    e.values[o] = 1.0;
                }
            }
        }
        (tubes, e)
    }

    #[test]
    fn disjoint_parallel_tubes() {
        let delta = 0.0625;
        let dirs: Vec<(Vec3, Vec3)> = (0..4).map(|k| ([0.0, -0.3 + 0.2 * k as f64, 0.0], [1.0, 0.0, 0.0])).collect();
        let (tubes, e) = setup(&dirs, delta);
        let r = multiplicity_select(&e, &tubes, delta, 0.9).unwrap();
        assert_eq!(r.n, 1);
        assert!(r.case1_holds);
        let b = bush_extract(&e, &tubes, 0.1).unwrap();
        assert_eq!(b.n0, 1);
    }

    #[test]
    fn bush_through_origin() {
        let delta = 0.0625;
        let dirs: Vec<(Vec3, Vec3)> = (0..6)
            .map(|k| {
                let a = k as f64 * std::f64::consts::PI / 6.0;
                ([0.0; 3], [a.cos(), a.sin(), 0.3])
            })
            .collect();
        let (tubes, e) = setup(&dirs, delta);
        let b = bush_extract(&e, &tubes, 0.2).unwrap();
        assert_eq!(b.n0, 6);
        assert!(la::norm(b.a) < delta);
        assert!(b.bush_sum <= b.e_measure * (1.0 + 1e-9));
        let r = multiplicity_select(&e, &tubes, delta, 0.9).unwrap();
        assert!(r.case1_holds);
        assert!(r.n >= 1);
    }

    #[test]
    fn single_tube_and_precondition() {
        let delta = 0.0625;
        let (tubes, e) = setup(&[([0.0; 3], [0.0, 0.0, 1.0])], delta);
        let r = multiplicity_select(&e, &tubes, delta, 1.0).unwrap();
        assert_eq!(r.n, 1);
        assert_eq!(r.case1, vec![0]);
        assert!(r.case2.is_empty());
        let empty = e.map(|_| 0.0);
        assert!(matches!(multiplicity_select(&empty, &tubes, delta, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn bound_arithmetic() {
        let d = discrete_bound(10, 0.125, 1.0, 0.05, 0.0, 1.0);
        assert!((d.lhs - 0.15625).abs() < 1e-15);
        assert!((d.rhs - (0.125f64.powf(-0.5) * 0.05).powf(4.0 / 3.0)).abs() < 1e-15);
    }
}
