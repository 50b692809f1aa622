//! Box counting for regions given by constraint expressions.
//!
//! Boxes of side `δ` are refined from coarse boxes on a lattice anchored near the
//! domain corner, shifted by an irrational fraction of `δ` so axis-aligned faces
//! of the region do not fall on box faces. A box counts unless it is certified
//! outside the region; boxes certified inside count all their descendants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{BoxClass, Region};
use crate::metric::Aabb;

const SHIFT: f64 = 0.381_966_011_250_105;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoxCount {
    pub delta: f64,
    pub boxes: u64,
    /// `boxes · δ³`, the proxy for `|Ω_δ|`
    pub volume: f64,
}

fn count(region: &Region, lo: [f64; 3], side: f64, levels: u32) -> u64 {
    let r = 0.5 * side;
    let c = [lo[0] + 0.5 * side, lo[1] + 0.5 * side, lo[2] + 0.5 * side];
    match region.classify_box(c, r) {
        BoxClass::Outside => 0,
        BoxClass::Inside => 1u64 << (3 * levels),
        BoxClass::Boundary if levels == 0 => 1,
        BoxClass::Boundary => {
            let h = 0.5 * side;
            let mut n = 0;
            for k in 0..8 {
                let o = [lo[0] + h * (k & 1) as f64, lo[1] + h * ((k >> 1) & 1) as f64, lo[2] + h * ((k >> 2) & 1) as f64];
                n += count(region, o, h, levels - 1);
            }
            n
        }
    }
}

/// Number of `δ`-boxes meeting `region` inside `domain`.
pub fn box_count(region: &Region, domain: &Aabb, delta: f64) -> Result<BoxCount> {
    if !(delta > 0.0) {
        return Err(Error::Invalid("δ must be positive".into()));
    }
    let span = (0..3).map(|i| domain.hi[i] - domain.lo[i]).fold(0.0, f64::max);
    let mut levels = 0u32;
    while delta * (1u64 << levels) as f64 * 16.0 < span && levels < 40 {
        levels += 1;
    }
    let top = delta * (1u64 << levels) as f64;
    let origin = domain.lo.map(|v| v - SHIFT * delta);
    let dims: Vec<usize> = (0..3).map(|i| ((domain.hi[i] - origin[i]) / top).ceil().max(1.0) as usize).collect();
    let n = dims[0] * dims[1] * dims[2];
    let counts = crate::par::map_range(n, |o| {
        let (i, j, k) = (o % dims[0], (o / dims[0]) % dims[1], o / (dims[0] * dims[1]));
        let lo = [origin[0] + i as f64 * top, origin[1] + j as f64 * top, origin[2] + k as f64 * top];
        count(region, lo, top, levels)
    });
    let boxes: u64 = counts.iter().sum();
    Ok(BoxCount { delta, boxes, volume: boxes as f64 * delta.powi(3) })
}

pub fn box_counts(region: &Region, domain: &Aabb, deltas: &[f64]) -> Result<Vec<BoxCount>> {
    deltas.iter().map(|d| box_count(region, domain, *d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_interior_is_counted_wholesale() {
        let r = Region::parse("x1 >= 0 && x1 <= 1 && x2 >= 0 && x2 <= 1 && x3 >= 0 && x3 <= 1").unwrap();
        let d = Aabb::cube(1.5);
        let c = box_count(&r, &d, 1.0 / 64.0).unwrap();
        assert!(c.volume > 1.0 && c.volume < 1.2, "{}", c.volume);
    }

    #[test]
    fn segment_counts_grow_linearly() {
        let r = Region::parse("x2 == 0 && x3 == 0 && x1 >= 0 && x1 <= 1").unwrap();
        let d = Aabb::new([-0.3, -0.3, -0.3], [1.3, 0.3, 0.3]);
        let a = box_count(&r, &d, 1.0 / 32.0).unwrap().boxes as f64;
        let b = box_count(&r, &d, 1.0 / 64.0).unwrap().boxes as f64;
        assert!((b / a - 2.0).abs() < 0.1, "{a} {b}");
    }
}
