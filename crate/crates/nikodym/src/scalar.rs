//! Forward-mode automatic differentiation with nested dual numbers.
//!
//! `Dual<T, N>` carries a value and `N` first-order infinitesimal parts, each of
//! type `T`. Nesting three levels over `f64` yields every partial derivative up
//! to order three in one evaluation.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate metric components generically.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;

    /// Independent variable `x` seeded in slot `i` at every nesting level.
    fn var(x: f64, i: usize) -> Self;

    /// Innermost real part.
    fn re(&self) -> f64;

    /// Applies a function given its value and first three derivatives at `self.re()`.
    fn compose(self, d: [f64; 4]) -> Self;

    /// Mixed partial along the slot sequence `idx` (empty slice gives the value).
    fn partial(&self, idx: &[usize]) -> f64;

    fn sin(self) -> Self {
        let (s, c) = self.re().sin_cos();
        self.compose([s, c, -s, -c])
    }

    fn cos(self) -> Self {
        let (s, c) = self.re().sin_cos();
        self.compose([c, -s, -c, s])
    }

    fn exp(self) -> Self {
        let e = self.re().exp();
        self.compose([e; 4])
    }

    fn recip(self) -> Self {
        let v = self.re();
        let r = 1.0 / v;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    fn sqrt(self) -> Self {
        let s = self.re().sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * s * s), 0.375 / (s * s * s * s * s)])
    }

    /// `self^p` for a real exponent `p` (requires a positive base unless `p` is an integer).
    fn powf(self, p: f64) -> Self {
        let v = self.re();
        if p == 0.0 {
            return Self::cst(1.0);
        }
        let f = |k: f64| -> f64 {
            if p - k == 0.0 {
                1.0
            } else {
                v.powf(p - k)
            }
        };
        self.compose([
            f(0.0),
            p * f(1.0),
            p * (p - 1.0) * f(2.0),
            p * (p - 1.0) * (p - 2.0) * f(3.0),
        ])
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn var(x: f64, _i: usize) -> Self {
        x
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn compose(self, d: [f64; 4]) -> Self {
        d[0]
    }
    fn partial(&self, idx: &[usize]) -> f64 {
        debug_assert!(idx.is_empty());
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

/// First-order dual number with `N` infinitesimal directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T, const N: usize> {
    pub v: T,
    pub d: [T; N],
}

/// Gradient-carrying scalar used on the geodesic hot path.
pub type D1 = Dual<f64, 3>;
/// Second-order jets.
pub type D2 = Dual<Dual<f64, 3>, 3>;
/// Third-order jets.
pub type D3 = Dual<Dual<Dual<f64, 3>, 3>, 3>;

impl<T: Scalar, const N: usize> Add for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual { v: self.v + o.v, d: std::array::from_fn(|i| self.d[i] + o.d[i]) }
    }
}

impl<T: Scalar, const N: usize> Sub for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual { v: self.v - o.v, d: std::array::from_fn(|i| self.d[i] - o.d[i]) }
    }
}

impl<T: Scalar, const N: usize> Mul for Dual<T, N> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: Self) -> Self {
        Dual { v: self.v * o.v, d: std::array::from_fn(|i| self.v * o.d[i] + self.d[i] * o.v) }
    }
}

impl<T: Scalar, const N: usize> Div for Dual<T, N> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Scalar, const N: usize> Neg for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual { v: -self.v, d: std::array::from_fn(|i| -self.d[i]) }
    }
}

impl<T: Scalar, const N: usize> Add<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        Dual { v: self.v + o, d: self.d }
    }
}

impl<T: Scalar, const N: usize> Sub<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        Dual { v: self.v - o, d: self.d }
    }
}

impl<T: Scalar, const N: usize> Mul<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        Dual { v: self.v * o, d: std::array::from_fn(|i| self.d[i] * o) }
    }
}

impl<T: Scalar, const N: usize> Div<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        self * (1.0 / o)
    }
}

impl<T: Scalar, const N: usize> Scalar for Dual<T, N> {
    fn cst(v: f64) -> Self {
        Dual { v: T::cst(v), d: [T::cst(0.0); N] }
    }

    fn var(x: f64, i: usize) -> Self {
        Dual { v: T::var(x, i), d: std::array::from_fn(|j| T::cst(if j == i { 1.0 } else { 0.0 })) }
    }

    fn re(&self) -> f64 {
        self.v.re()
    }

    fn compose(self, d: [f64; 4]) -> Self {
        // f(v + e) = f(v) + f'(v) e at this level; the inner levels need one
        // derivative order fewer, which the shifted array provides.
        let fv = self.v.compose(d);
        let dfv = self.v.compose([d[1], d[2], d[3], 0.0]);
        Dual { v: fv, d: std::array::from_fn(|i| dfv * self.d[i]) }
    }

    fn partial(&self, idx: &[usize]) -> f64 {
        match idx.split_first() {
            None => self.v.partial(&[]),
            Some((&i, rest)) => self.d[i].partial(rest),
        }
    }
}

/// Seeds the point `x` as three independent variables.
pub fn seed<S: Scalar>(x: [f64; 3]) -> [S; 3] {
    [S::var(x[0], 0), S::var(x[1], 1), S::var(x[2], 2)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: [S; 3]) -> S {
        x[0].sin() * x[1] * x[1] + (x[2] * x[0]).exp() / (x[1] + 2.0)
    }

    #[test]
    fn third_partial_matches_hand_derivative() {
        let p = [0.3, -0.4, 0.7];
        let y: D3 = f(seed(p));
        // d/dx0 d/dx1 d/dx1 of sin(x0) x1^2 is 2 cos(x0); the exp term gives
        // x2 e^{x0 x2} * 2/(x1+2)^3.
        let e = (p[0] * p[2]).exp();
        let want = 2.0 * p[0].cos() + p[2] * e * 2.0 / (p[1] + 2.0f64).powi(3);
        assert!((y.partial(&[0, 1, 1]) - want).abs() < 1e-12);
        assert!((y.partial(&[1, 0, 1]) - want).abs() < 1e-12);
        assert!((y.partial(&[]) - f(p)).abs() < 1e-14);
    }

    #[test]
    fn first_order_gradient() {
        let p = [1.1, 0.2, -0.5];
        let y: D1 = f(seed(p));
        let h = 1e-6;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (f(a) - f(b)) / (2.0 * h);
            assert!((y.partial(&[i]) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn powf_and_sqrt_agree() {
        let x: D3 = D3::var(2.3, 0);
        let a = x.sqrt();
        let b = x.powf(0.5);
        for idx in [&[][..], &[0], &[0, 0], &[0, 0, 0]] {
            assert!((a.partial(idx) - b.partial(idx)).abs() < 1e-12);
        }
        // third derivative of x^{1/2} is (3/8) x^{-5/2}
        assert!((a.partial(&[0, 0, 0]) - 0.375 * 2.3f64.powf(-2.5)).abs() < 1e-12);
    }
}
