//! Scalar abstraction and the small numerical kernels shared by every module:
//! Gauss-Legendre rules, cubic Hermite pieces, finite-difference weights, an
//! fixed-step Dormand-Prince integrator and a cyclic Jacobi eigensolver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Debug + Display + Default + Sum
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

/// Integrates `g` over `[a, b]` with `panels` equal Gauss-Legendre panels of
/// `rule` nodes each.
pub fn integrate_gl<T: Real>(g: impl Fn(T) -> T, a: T, b: T, panels: usize, rule: &[(f64, f64)]) -> T {
    let h = (b - a) / T::from_usize_lossy(panels);
    let half = h / T::lit(2.0);
    let mut total = T::zero();
    for p in 0..panels {
        let mid = a + h * (T::from_usize_lossy(p) + T::lit(0.5));
        let mut acc = T::zero();
        for &(x, w) in rule {
            acc = acc + T::lit(w) * g(mid + half * T::lit(x));
        }
        total = total + acc * half;
    }
    total
}

/// Cubic Hermite interpolation on one cell of width `h`, parameter `t ∈ [0,1]`.
/// Returns value and derivative.
#[inline]
pub fn hermite<T: Real>(y0: T, d0: T, y1: T, d1: T, h: T, t: T) -> (T, T) {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = T::lit(6.0) * (t2 - t);
    let dh10 = three * t2 - T::lit(4.0) * t + one;
    let dh01 = -dh00;
    let dh11 = three * t2 - two * t;
    let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
    (v, dv)
}

/// Quintic Hermite piece matching values, first and second derivatives at both
/// ends of a cell of width `h`. Returns value and first derivative at `x0 + t h`.
pub fn hermite5<T: Real>(y0: [T; 3], y1: [T; 3], h: T, t: T) -> (T, T) {
    let c = |x: f64| T::lit(x);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let half = c(0.5);
    let b0 = T::one() - c(10.0) * t3 + c(15.0) * t4 - c(6.0) * t5;
    let b1 = t - c(6.0) * t3 + c(8.0) * t4 - c(3.0) * t5;
    let b2 = half * (t2 - c(3.0) * t3 + c(3.0) * t4 - t5);
    let b3 = half * (t3 - c(2.0) * t4 + t5);
    let b4 = -c(4.0) * t3 + c(7.0) * t4 - c(3.0) * t5;
    let b5 = c(10.0) * t3 - c(15.0) * t4 + c(6.0) * t5;
    let d0 = -c(30.0) * t2 + c(60.0) * t3 - c(30.0) * t4;
    let d1 = T::one() - c(18.0) * t2 + c(32.0) * t3 - c(15.0) * t4;
    let d2 = half * (c(2.0) * t - c(9.0) * t2 + c(12.0) * t3 - c(5.0) * t4);
    let d3 = half * (c(3.0) * t2 - c(8.0) * t3 + c(5.0) * t4);
    let d4 = -c(12.0) * t2 + c(28.0) * t3 - c(15.0) * t4;
    let d5 = -d0;
    let hh = h * h;
    let v = y0[0] * b0 + h * y0[1] * b1 + hh * y0[2] * b2 + y1[0] * b5 + h * y1[1] * b4 + hh * y1[2] * b3;
    let dv = (y0[0] * d0 + y1[0] * d5) / h + y0[1] * d1 + h * y0[2] * d2 + y1[1] * d4 + h * y1[2] * d3;
    (v, dv)
}

/// Fornberg's finite-difference weights: `w[m][i]` approximates the m-th
/// derivative at `z` from samples at `x[i]`.
pub fn fd_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Fixed-step integration of a scalar ODE `y' = g(x, y)` from `x0` to `x1`
/// with the fifth-order Dormand-Prince weights. Fixed steps keep the result
/// a smooth function of the initial data, which shooting relies on.
pub fn rk5_fixed<T: Real>(g: &impl Fn(T, T) -> T, x0: T, y0: T, x1: T, steps: usize) -> T {
    const A: [[f64; 5]; 5] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    ];
    const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
    const C: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
    let h = (x1 - x0) / T::from_usize_lossy(steps.max(1));
    let mut y = y0;
    for i in 0..steps.max(1) {
        let x = x0 + h * T::from_usize_lossy(i);
        let mut k = [T::zero(); 6];
        k[0] = g(x, y);
        for s in 0..5 {
            let mut acc = y;
            for j in 0..=s {
                acc = acc + h * T::lit(A[s][j]) * k[j];
            }
            k[s + 1] = g(x + T::lit(C[s]) * h, acc);
        }
        for j in 0..6 {
            y = y + h * T::lit(B[j]) * k[j];
        }
    }
    y
}

/// Symmetric eigen-decomposition by cyclic Jacobi sweeps.
/// Eigenvalues are returned ascending; `vectors[k]` is the k-th eigenvector.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

pub fn jacobi_eigen<T: Real>(matrix: &[T], n: usize) -> SymEigen<T> {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale: T = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tiny = T::epsilon() * T::epsilon() * scale * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tiny || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap_or(std::cmp::Ordering::Equal));
    SymEigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect(),
    }
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
pub fn bisect<T: Real>(g: impl Fn(T) -> T, mut lo: T, mut hi: T, tol: T, max_iter: usize) -> Option<T> {
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == T::zero() {
        return Some(lo);
    }
    if ghi == T::zero() {
        return Some(hi);
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = (lo + hi) / T::lit(2.0);
        let gm = g(mid);
        if gm == T::zero() || (hi - lo).abs() < tol {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) / T::lit(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_high_degree_polynomials() {
        let rule = gauss_legendre(6);
        let wsum: f64 = rule.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(wsum, 2.0, epsilon = 1e-14);
        // x^10 over [-1,1] = 2/11
        let q: f64 = rule.iter().map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(q, 2.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn fornberg_reproduces_central_stencils() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for i in 0..5 {
            assert_relative_eq!(w[1][i], d1[i], epsilon = 1e-14);
            assert_relative_eq!(w[2][i], d2[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn rk5_is_fifth_order() {
        let err = |n| (rk5_fixed(&|_x: f64, y: f64| y, 0.0, 1.0, 2.0, n) - 2f64.exp()).abs();
        assert!(err(200) < 1e-11);
        let ratio = err(20) / err(40);
        assert!(ratio > 26.0 && ratio < 36.0, "ratio {ratio}");
    }

    #[test]
    fn jacobi_diagonalizes_symmetric_matrix() {
        let m = [4.0, 1.0, 2.0, 1.0, -3.0, 0.5, 2.0, 0.5, 1.0];
        let eig = jacobi_eigen(&m, 3);
        let tr: f64 = eig.values.iter().sum();
        assert_relative_eq!(tr, 2.0, epsilon = 1e-12);
        for (lam, v) in eig.values.iter().zip(&eig.vectors) {
            for r in 0..3 {
                let mv: f64 = (0..3).map(|c| m[r * 3 + c] * v[c]).sum();
                assert_relative_eq!(mv, lam * v[r], epsilon = 1e-12);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |x: f64| 2.0 * x * x * x - x + 0.5;
        let dp = |x: f64| 6.0 * x * x - 1.0;
        let (x0, h) = (0.3, 0.7);
        let (v, d) = hermite(p(x0), dp(x0), p(x0 + h), dp(x0 + h), h, 0.4);
        assert_relative_eq!(v, p(x0 + 0.4 * h), epsilon = 1e-14);
        assert_relative_eq!(d, dp(x0 + 0.4 * h), epsilon = 1e-13);
    }

    #[test]
    fn quintic_hermite_reproduces_quintics() {
        let p = |x: f64| x.powi(5) - 2.0 * x.powi(4) + x * x - 3.0;
        let dp = |x: f64| 5.0 * x.powi(4) - 8.0 * x.powi(3) + 2.0 * x;
        let ddp = |x: f64| 20.0 * x.powi(3) - 24.0 * x * x + 2.0;
        let (x0, h) = (-0.4, 0.9);
        let x1 = x0 + h;
        for t in [0.0, 0.25, 0.6, 1.0] {
            let (v, d) = hermite5([p(x0), dp(x0), ddp(x0)], [p(x1), dp(x1), ddp(x1)], h, t);
            assert_relative_eq!(v, p(x0 + t * h), epsilon = 1e-13);
            assert_relative_eq!(d, dp(x0 + t * h), epsilon = 1e-12);
        }
    }
}
