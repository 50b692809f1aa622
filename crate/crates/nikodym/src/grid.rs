//! Scalar fields sampled on the cubic lattice of spacing `h`.
//!
//! Cell `(i, j, k)` has center `((i + ½)h, (j + ½)h, (k + ½)h)`. A field stores a
//! box of cells and is zero outside it, so fields and tube stencils built with
//! the same `h` always line up.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Region;
use crate::la::Vec3;
use crate::metric::{Aabb, Metric};

pub type CellIdx = [i64; 3];

#[inline]
pub fn cell_center(h: f64, c: CellIdx) -> Vec3 {
    [(c[0] as f64 + 0.5) * h, (c[1] as f64 + 0.5) * h, (c[2] as f64 + 0.5) * h]
}

/// Cell containing `x`.
#[inline]
pub fn cell_of(h: f64, x: Vec3) -> CellIdx {
    [(x[0] / h).floor() as i64, (x[1] / h).floor() as i64, (x[2] / h).floor() as i64]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub h: f64,
    pub lo: CellIdx,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldHeader {
    pub dims: [usize; 3],
    pub box_lo: Vec3,
    pub box_hi: Vec3,
    pub spacing: f64,
    pub lo_index: CellIdx,
    pub metric: Option<String>,
    pub note: Option<String>,
}

impl ScalarField {
    pub fn zeros(h: f64, lo: CellIdx, dims: [usize; 3]) -> Self {
        ScalarField { h, lo, dims, values: vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    /// Smallest lattice box covering `b`.
    pub fn covering(h: f64, b: &Aabb) -> Self {
        let lo = cell_of(h, b.lo);
        let hi = cell_of(h, b.hi);
        let dims = std::array::from_fn(|i| (hi[i] - lo[i] + 1).max(1) as usize);
        Self::zeros(h, lo, dims)
    }

    pub fn from_fn(h: f64, b: &Aabb, f: impl Fn(Vec3) -> f64 + Sync + Send) -> Self {
        let mut out = Self::covering(h, b);
        let (nx, ny) = (out.dims[0], out.dims[1]);
        let lo = out.lo;
        let planes = crate::par::map_range(out.dims[2], |k| {
            let mut plane = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    plane.push(f(cell_center(h, [lo[0] + i as i64, lo[1] + j as i64, lo[2] + k as i64])));
                }
            }
            plane
        });
        out.values = planes.concat();
        out
    }

    /// Indicator of `region`, with slack `tol` on each constraint.
    pub fn indicator(h: f64, b: &Aabb, region: &Region, tol: f64) -> Self {
        Self::from_fn(h, b, |x| if region.contains(x, tol) { 1.0 } else { 0.0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Storage offset of a cell, if stored.
    #[inline]
    pub fn offset(&self, c: CellIdx) -> Option<usize> {
        let i = c[0] - self.lo[0];
        let j = c[1] - self.lo[1];
        let k = c[2] - self.lo[2];
        if i < 0 || j < 0 || k < 0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return None;
        }
        Some(i + self.dims[0] * (j + self.dims[1] * k))
    }

    /// Value at a cell, zero outside storage.
    #[inline]
    pub fn get(&self, c: CellIdx) -> f64 {
        self.offset(c).map_or(0.0, |o| self.values[o])
    }

    pub fn cell(&self, offset: usize) -> CellIdx {
        let i = offset % self.dims[0];
        let j = (offset / self.dims[0]) % self.dims[1];
        let k = offset / (self.dims[0] * self.dims[1]);
        [self.lo[0] + i as i64, self.lo[1] + j as i64, self.lo[2] + k as i64]
    }

    pub fn center(&self, offset: usize) -> Vec3 {
        cell_center(self.h, self.cell(offset))
    }

    pub fn bounds(&self) -> Aabb {
        let lo = std::array::from_fn(|i| self.lo[i] as f64 * self.h);
        let hi = std::array::from_fn(|i| (self.lo[i] + self.dims[i] as i64) as f64 * self.h);
        Aabb::new(lo, hi)
    }

    pub fn same_layout(&self, o: &ScalarField) -> bool {
        self.h == o.h && self.lo == o.lo && self.dims == o.dims
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { values: self.values.iter().map(|v| f(*v)).collect(), ..self.clone() }
    }

    pub fn zip(&self, o: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_layout(o) {
            return Err(Error::Invalid("fields on different layouts".into()));
        }
        Ok(ScalarField { values: self.values.iter().zip(&o.values).map(|(a, b)| f(*a, *b)).collect(), ..self.clone() })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Per-cell volumes `√det g · h³`.
    pub fn volumes<M: Metric + ?Sized>(&self, m: &M) -> Vec<f64> {
        let h3 = self.h.powi(3);
        let n = self.len();
        crate::par::map_range(n, |o| m.sqrt_det(self.center(o)) * h3)
    }

    pub fn header(&self, metric: Option<String>, note: Option<String>) -> FieldHeader {
        let b = self.bounds();
        FieldHeader { dims: self.dims, box_lo: b.lo, box_hi: b.hi, spacing: self.h, lo_index: self.lo, metric, note }
    }

    /// Flat little-endian binary: dims (3×u64), box lo and hi (6×f64), spacing
    /// (3×f64), then the values in x-fastest order. Writes a `.json` sidecar.
    pub fn write(&self, path: &Path, metric: Option<String>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let b = self.bounds();
        for v in b.lo.iter().chain(&b.hi).chain(&[self.h; 3]) {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let side = path.with_extension("json");
        serde_json::to_writer_pretty(File::create(side)?, &self.header(metric, None))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut b8 = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            r.read_exact(&mut b8)?;
            *d = u64::from_le_bytes(b8) as usize;
        }
        let mut f = [0.0; 9];
        for v in f.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        let h = f[6];
        if !(h > 0.0) || f[7] != h || f[8] != h {
            return Err(Error::Invalid("field file needs equal positive spacings".into()));
        }
        let lo = std::array::from_fn(|i| (f[i] / h).round() as i64);
        let n = dims[0] * dims[1] * dims[2];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok(ScalarField { h, lo, dims, values })
    }
}

/// `(Σ |f|^p √det g h³)^{1/p}`; `p = ∞` gives `max |f|`.
pub fn lp_norm<M: Metric + ?Sized>(m: &M, f: &ScalarField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let vol = f.volumes(m);
    let s: f64 = f.values.iter().zip(&vol).map(|(v, w)| v.abs().powf(p) * w).sum();
    s.powf(1.0 / p)
}

/// `|{f ≥ λ}|` with the Riemannian volume element.
pub fn superlevel_measure<M: Metric + ?Sized>(m: &M, f: &ScalarField, lambda: f64) -> f64 {
    let vol = f.volumes(m);
    f.values.iter().zip(&vol).filter(|(v, _)| **v >= lambda).map(|(_, w)| w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{BuiltinKind, BuiltinMetric};

    #[test]
    fn norms_on_unit_cube() {
        let m = BuiltinMetric::new(BuiltinKind::Euclidean).unwrap();
        let b = Aabb::new([0.0; 3], [0.999; 3]);
        let one = ScalarField::from_fn(0.05, &b, |_| 1.0);
        for p in [1.0, 2.5, 10.0 / 3.0, f64::INFINITY] {
            assert!((lp_norm(&m, &one, p) - 1.0).abs() < 1e-12);
        }
        let half = ScalarField::from_fn(0.05, &b, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        assert!((lp_norm(&m, &half, 1.0) - 0.5).abs() < 1e-12);
        assert!((superlevel_measure(&m, &one, 0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_outside_storage() {
        let f = ScalarField::from_fn(0.1, &Aabb::cube(0.25), |_| 2.0);
        assert_eq!(f.get([0, 0, 0]), 2.0);
        assert_eq!(f.get([100, 0, 0]), 0.0);
        let o = f.offset([1, -2, 0]).unwrap();
        assert_eq!(f.cell(o), [1, -2, 0]);
    }

    #[test]
    fn binary_roundtrip() {
        let dir = std::env::temp_dir().join(format!("nikodym-field-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("f.bin");
        let f = ScalarField::from_fn(0.125, &Aabb::new([-0.3, 0.0, 0.1], [0.2, 0.4, 0.5]), |x| x[0] - 2.0 * x[2]);
        f.write(&p, Some("euclidean".into())).unwrap();
        let g = ScalarField::read(&p).unwrap();
        assert_eq!(f, g);
        let side: FieldHeader = serde_json::from_reader(File::open(p.with_extension("json")).unwrap()).unwrap();
        assert_eq!(side.dims, f.dims);
        std::fs::remove_dir_all(dir).ok();
    }
}
