//! Renormalized energy of planar vortex configurations in a conformal chart,
//! its derivatives, instability certificates, and the limit-definition oracle.
//!
//! Sums over `i != j` range over ordered pairs throughout.

use crate::conformal::PlanarMetric;
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, jacobi_eigen, Real, SymEigen};

/// Minimum distance between two vortices.
pub const SEP_MIN: f64 = 1e-6;
pub const DEFAULT_R_VALUES: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const DEFAULT_QUAD_TOL: f64 = 1e-3;

/// Planar points `b_i` with nonzero degrees summing to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct VortexConfiguration<T> {
    points: Vec<[T; 2]>,
    degrees: Vec<i64>,
}

impl<T: Real> VortexConfiguration<T> {
    pub fn new(points: Vec<[T; 2]>, degrees: Vec<i64>) -> Result<Self> {
        if points.len() != degrees.len() {
            return Err(Error::ConfigurationInvalid(format!(
                "{} points but {} degrees",
                points.len(),
                degrees.len()
            )));
        }
        if let Some(i) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::ConfigurationInvalid(format!("vortex {i} has degree 0")));
        }
        let total: i64 = degrees.iter().sum();
        if total != 0 {
            return Err(Error::DegreesDoNotCancel(total));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::ConfigurationInvalid(format!("vortex {i} is not a finite point")));
            }
        }
        let sep = min_separation(&points);
        if points.len() > 1 && !(sep > T::lit(SEP_MIN)) {
            return Err(Error::ConfigurationInvalid(format!("vortices closer than {SEP_MIN} (separation {sep})")));
        }
        Ok(Self { points, degrees })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new(), degrees: Vec::new() }
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same degrees at new points.
    pub fn with_points(&self, points: Vec<[T; 2]>) -> Result<Self> {
        Self::new(points, self.degrees.clone())
    }

    /// Rigid rotation about the origin.
    pub fn rotated(&self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let points = self.points.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        Self { points, degrees: self.degrees.clone() }
    }

    fn degree(&self, i: usize) -> T {
        T::lit(self.degrees[i] as f64)
    }
}

fn min_separation<T: Real>(points: &[[T; 2]]) -> T {
    let mut sep = T::infinity();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            sep = sep.min((points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]));
        }
    }
    sep
}

/// `∇ log|x| = x/|x|²`.
fn grad_log<T: Real>(x: [T; 2]) -> [T; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    [x[0] / r2, x[1] / r2]
}

/// Hessian of `log|x|`: `(|x|² I - 2 x xᵀ)/|x|⁴`.
fn hess_log<T: Real>(x: [T; 2]) -> [[T; 2]; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r4 = r2 * r2;
    let two = T::lit(2.0);
    [
        [(r2 - two * x[0] * x[0]) / r4, -two * x[0] * x[1] / r4],
        [-two * x[0] * x[1] / r4, (r2 - two * x[1] * x[1]) / r4],
    ]
}

fn diff<T: Real>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `W = π Σ d_i² f(b_i) - π Σ_{i≠j} d_i d_j log|b_i - b_j|`.
pub fn renormalized_energy<T: Real, M: PlanarMetric<T> + ?Sized>(chart: &M, config: &VortexConfiguration<T>) -> Result<T> {
    let pi = T::PI();
    let n = config.len();
    let mut w = T::zero();
    for i in 0..n {
        let di = config.degree(i);
        w = w + pi * di * di * chart.conformal_factor(config.points[i]);
        for j in 0..n {
            if i != j {
                let d = diff(config.points[i], config.points[j]);
                let rho = d[0].hypot(d[1]);
                if rho == T::zero() {
                    return Err(Error::ConfigurationInvalid(format!("vortices {i} and {j} coincide")));
                }
                w = w - pi * di * config.degree(j) * rho.ln();
            }
        }
    }
    Ok(w)
}

/// `∂W/∂b_i = π d_i² ∇f(b_i) - 2π Σ_{j≠i} d_i d_j (b_i - b_j)/|b_i - b_j|²`.
pub fn grad_w<T: Real, M: PlanarMetric<T> + ?Sized>(chart: &M, config: &VortexConfiguration<T>) -> Result<Vec<[T; 2]>> {
    let pi = T::PI();
    let two_pi = pi + pi;
    let n = config.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let di = config.degree(i);
        let gf = chart.grad_f(config.points[i])?;
        let mut g = [pi * di * di * gf[0], pi * di * di * gf[1]];
        for j in 0..n {
            if i != j {
                let gl = grad_log(diff(config.points[i], config.points[j]));
                let c = two_pi * di * config.degree(j);
                g = [g[0] - c * gl[0], g[1] - c * gl[1]];
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Symmetric `2n × 2n` Hessian of `W`, row-major, coordinates ordered
/// `(b_1x, b_1y, b_2x, ...)`.
pub fn hessian_w<T: Real, M: PlanarMetric<T> + ?Sized>(chart: &M, config: &VortexConfiguration<T>) -> Result<Vec<T>> {
    let pi = T::PI();
    let two_pi = pi + pi;
    let n = config.len();
    let m = 2 * n;
    let mut h = vec![T::zero(); m * m];
    for i in 0..n {
        let di = config.degree(i);
        let hf = chart.hessian_f(config.points[i])?;
        for a in 0..2 {
            for b in 0..2 {
                h[(2 * i + a) * m + 2 * i + b] = h[(2 * i + a) * m + 2 * i + b] + pi * di * di * hf[a][b];
            }
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            let hl = hess_log(diff(config.points[i], config.points[j]));
            let c = two_pi * di * config.degree(j);
            for a in 0..2 {
                for b in 0..2 {
                    h[(2 * i + a) * m + 2 * i + b] = h[(2 * i + a) * m + 2 * i + b] - c * hl[a][b];
                    h[(2 * i + a) * m + 2 * j + b] = h[(2 * i + a) * m + 2 * j + b] + c * hl[a][b];
                }
            }
        }
    }
    // exact symmetry regardless of rounding in the two triangles
    for a in 0..m {
        for b in (a + 1)..m {
            let avg = (h[a * m + b] + h[b * m + a]) / T::lit(2.0);
            h[a * m + b] = avg;
            h[b * m + a] = avg;
        }
    }
    Ok(h)
}

/// `Vᵀ (D²W) V`.
pub fn second_variation_along<T: Real, M: PlanarMetric<T> + ?Sized>(
    chart: &M,
    config: &VortexConfiguration<T>,
    direction: &[[T; 2]],
) -> Result<T> {
    if direction.len() != config.len() {
        return Err(Error::ConfigurationInvalid(format!(
            "direction has {} entries for {} vortices",
            direction.len(),
            config.len()
        )));
    }
    let h = hessian_w(chart, config)?;
    Ok(quadratic_form(&h, direction))
}

fn quadratic_form<T: Real>(h: &[T], direction: &[[T; 2]]) -> T {
    let v: Vec<T> = direction.iter().flat_map(|d| [d[0], d[1]]).collect();
    let m = v.len();
    let mut acc = T::zero();
    for a in 0..m {
        for b in 0..m {
            acc = acc + v[a] * h[a * m + b] * v[b];
        }
    }
    acc
}

/// Which argument produced the direction in a [`SecondVariationReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    /// A vortex sits where `K > 0`; its own Hessian block has negative trace.
    CurvatureAtVortex,
    /// All vortices sit where `K <= 0` and some `D²f(b_i)` is indefinite.
    HessianFNegativeEigen,
    /// `V_i = b_i`.
    ScalingDirection,
    /// Minimal eigenvector of the full Hessian; the value may be nonnegative.
    FullSpectrum,
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CurvatureAtVortex => "CurvatureAtVortex",
            Self::HessianFNegativeEigen => "HessianFNegativeEigen",
            Self::ScalingDirection => "ScalingDirection",
            Self::FullSpectrum => "FullSpectrum",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SecondVariationReport<T> {
    pub direction: Vec<[T; 2]>,
    pub value: T,
    pub mechanism: Mechanism,
    /// Vortex whose block supplied the direction, for block mechanisms.
    pub vortex: Option<usize>,
    /// Spectrum of the block (block mechanisms) or of the full Hessian.
    pub eigen_data: Option<SymEigen<T>>,
}

/// Searches for a direction of strictly negative second variation of `W`.
pub fn instability_certificate<T: Real, M: PlanarMetric<T> + ?Sized>(
    chart: &M,
    config: &VortexConfiguration<T>,
) -> Result<SecondVariationReport<T>> {
    let n = config.len();
    let m = 2 * n;
    let h = hessian_w(chart, config)?;
    let block = |i: usize| {
        let k = 2 * i;
        let b = [h[k * m + k], h[k * m + k + 1], h[(k + 1) * m + k], h[(k + 1) * m + k + 1]];
        jacobi_eigen(&b, 2)
    };
    let from_block = |i: usize, eig: SymEigen<T>, mechanism| {
        let mut direction = vec![[T::zero(); 2]; n];
        direction[i] = [eig.vectors[0][0], eig.vectors[0][1]];
        let value = quadratic_form(&h, &direction);
        SecondVariationReport { direction, value, mechanism, vortex: Some(i), eigen_data: Some(eig) }
    };

    for i in 0..n {
        if chart.curvature(config.points[i]) > T::zero() {
            let report = from_block(i, block(i), Mechanism::CurvatureAtVortex);
            if report.value < T::zero() {
                return Ok(report);
            }
        }
    }
    for i in 0..n {
        let hf = chart.hessian_f(config.points[i])?;
        let det = hf[0][0] * hf[1][1] - hf[0][1] * hf[1][0];
        if det < T::zero() {
            let report = from_block(i, block(i), Mechanism::HessianFNegativeEigen);
            if report.value < T::zero() {
                return Ok(report);
            }
        }
    }
    if n > 0 {
        let direction = config.points.clone();
        let value = quadratic_form(&h, &direction);
        if value < T::zero() {
            return Ok(SecondVariationReport {
                direction,
                value,
                mechanism: Mechanism::ScalingDirection,
                vortex: None,
                eigen_data: None,
            });
        }
    }
    let eig = jacobi_eigen(&h, m);
    let direction: Vec<[T; 2]> = if m == 0 {
        Vec::new()
    } else {
        eig.vectors[0].chunks(2).map(|c| [c[0], c[1]]).collect()
    };
    let value = quadratic_form(&h, &direction);
    Ok(SecondVariationReport { direction, value, mechanism: Mechanism::FullSpectrum, vortex: None, eigen_data: Some(eig) })
}

/// Result of the limit-definition evaluation of `W`.
#[derive(Clone, Debug)]
pub struct LimitEstimate<T> {
    /// Richardson-extrapolated value.
    pub value: T,
    /// `(r, ½∫|∇Φ₀|² - π Σ d_i² log(1/r))` for each requested `r`.
    pub samples: Vec<(T, T)>,
    /// Convergence order used for the extrapolation.
    pub order: T,
    /// Value extrapolated without the smallest `r`.
    pub previous: T,
}

/// Options for [`w_via_limit`].
#[derive(Clone, Debug)]
pub struct LimitOptions {
    pub r_values: Vec<f64>,
    pub quad_tol: f64,
    /// Use the empirical order from the last three samples (clamped to
    /// `[1, 4]`) instead of the nominal order 2.
    pub empirical_order: bool,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { r_values: DEFAULT_R_VALUES.to_vec(), quad_tol: DEFAULT_QUAD_TOL, empirical_order: false }
    }
}

/// Evaluates `W` from its definition as the limit of
/// `½∫|∇Φ₀|² - π Σ d_i² log(1/r)` over the plane minus the disks
/// `|x - b_i| < r e^{-f(b_i)}`, `Φ₀ = Σ d_i log|x - b_i|`.
///
/// A smooth partition of unity splits the integral into a disk around each
/// vortex (integrated in log-polar coordinates, where the integrand is
/// smooth) and a remainder on the whole plane that does not depend on `r`.
pub fn w_via_limit<T: Real, M: PlanarMetric<T> + ?Sized>(
    chart: &M,
    config: &VortexConfiguration<T>,
    options: &LimitOptions,
) -> Result<LimitEstimate<T>> {
    let n = config.len();
    if n == 0 {
        return Ok(LimitEstimate { value: T::zero(), samples: Vec::new(), order: T::lit(2.0), previous: T::zero() });
    }
    let r_values = &options.r_values;
    if r_values.len() < 2 || r_values.windows(2).any(|w| !(w[1] < w[0])) || !(r_values[r_values.len() - 1] > 0.0) {
        return Err(Error::BadParameter("r_values must be a decreasing list of at least two positive radii".into()));
    }
    let pts: Vec<[f64; 2]> = config.points.iter().map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()]).collect();
    let deg: Vec<f64> = config.degrees.iter().map(|&d| d as f64).collect();
    let scale: Vec<f64> = config.points.iter().map(|&p| (-chart.conformal_factor(p)).exp().to_f64_lossy()).collect();
    let sep = min_separation(&pts);
    let cut = 0.4 * sep;
    for (i, s) in scale.iter().enumerate() {
        if r_values[0] * s >= cut / 2.0 {
            return Err(Error::ConfigurationInvalid(format!(
                "excluded disk of vortex {i} (radius {}) overlaps the cutoff region ({}); use smaller r_values",
                r_values[0] * s,
                cut / 2.0
            )));
        }
    }
    let field = LimitIntegrand { pts: &pts, deg: &deg, cut };
    let tol = options.quad_tol;

    let global = refine(tol, "remainder", |level| field.remainder(level))?;
    let mut samples = Vec::with_capacity(r_values.len());
    let core: f64 = deg.iter().map(|d| d * d).sum::<f64>() * std::f64::consts::PI;
    for &r in r_values {
        let mut local = 0.0;
        for i in 0..n {
            let rho = r * scale[i];
            local += refine(tol, "vortex disk", |level| field.disk(i, rho, level))?;
        }
        samples.push((r, global + local - core * (1.0 / r).ln()));
    }
    let k = samples.len();
    let nominal = 2.0;
    let order = if options.empirical_order && k >= 3 {
        let (e1, e2, e3) = (samples[k - 3].1, samples[k - 2].1, samples[k - 1].1);
        let (q1, q2) = (samples[k - 2].0 / samples[k - 3].0, samples[k - 1].0 / samples[k - 2].0);
        let ratio = ((e2 - e1) / (e3 - e2)).abs();
        let p = if ratio.is_finite() && ratio > 0.0 { ratio.ln() / (1.0 / q1.sqrt() / q2.sqrt()).ln() } else { nominal };
        if p.is_finite() {
            p.clamp(1.0, 4.0)
        } else {
            nominal
        }
    } else {
        nominal
    };
    let extrapolate = |a: (f64, f64), b: (f64, f64)| {
        let q = (b.0 / a.0).powf(order);
        (b.1 - q * a.1) / (1.0 - q)
    };
    let value = extrapolate(samples[k - 2], samples[k - 1]);
    let previous = if k >= 3 { extrapolate(samples[k - 3], samples[k - 2]) } else { samples[k - 2].1 };
    Ok(LimitEstimate {
        value: T::lit(value),
        samples: samples.into_iter().map(|(r, e)| (T::lit(r), T::lit(e))).collect(),
        order: T::lit(order),
        previous: T::lit(previous),
    })
}

/// Doubles the resolution until two successive levels agree within `tol`
/// (relative to `max(1, |value|)`).
fn refine(tol: f64, what: &str, eval: impl Fn(u32) -> f64) -> Result<f64> {
    let mut prev = eval(0);
    let mut last_change = f64::INFINITY;
    for level in 1..=4 {
        let next = eval(level);
        last_change = (next - prev).abs();
        if last_change <= tol * 1e-2 * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    if last_change <= tol * prev.abs().max(1.0) {
        return Ok(prev);
    }
    Err(Error::QuadratureNotConverged(format!("{what}: last refinement changed the integral by {last_change:e}")))
}

struct LimitIntegrand<'a> {
    pts: &'a [[f64; 2]],
    deg: &'a [f64],
    /// Cutoff radius of every vortex's bump; the bump is 1 inside `cut/2`.
    cut: f64,
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, `C^∞` in between.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

impl LimitIntegrand<'_> {
    /// `½|∇Φ₀|²`.
    fn density(&self, x: [f64; 2]) -> f64 {
        let mut g = [0.0, 0.0];
        for (p, d) in self.pts.iter().zip(self.deg) {
            let gl = grad_log(diff(x, *p));
            g[0] += d * gl[0];
            g[1] += d * gl[1];
        }
        0.5 * (g[0] * g[0] + g[1] * g[1])
    }

    /// Bump of vortex `i` as a function of the distance to it.
    fn bump(&self, rho: f64) -> f64 {
        smooth_step((self.cut - rho) / (self.cut / 2.0))
    }

    fn remainder_weight(&self, x: [f64; 2]) -> f64 {
        let mut w = 1.0;
        for p in self.pts {
            w -= self.bump((x[0] - p[0]).hypot(x[1] - p[1]));
        }
        w
    }

    /// `∫ χ_i ½|∇Φ₀|²` over `rho < |x - b_i|`, in `u = ln|x - b_i|`.
    fn disk(&self, i: usize, rho: f64, level: u32) -> f64 {
        let rule = gauss_legendre(8);
        let b = self.pts[i];
        let n_theta = 32usize << level;
        let panels = 4usize << level;
        let radial = |u0: f64, u1: f64| -> f64 {
            let mut acc = 0.0;
            let hu = (u1 - u0) / panels as f64;
            for p in 0..panels {
                let mid = u0 + hu * (p as f64 + 0.5);
                for &(xg, wg) in &rule {
                    let u = mid + 0.5 * hu * xg;
                    let rr = u.exp();
                    let chi = self.bump(rr);
                    let mut ring = 0.0;
                    for k in 0..n_theta {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64;
                        ring += self.density([b[0] + rr * th.cos(), b[1] + rr * th.sin()]);
                    }
                    acc += 0.5 * hu * wg * chi * rr * rr * ring * 2.0 * std::f64::consts::PI / n_theta as f64;
                }
            }
            acc
        };
        radial(rho.ln(), (self.cut / 2.0).ln()) + radial((self.cut / 2.0).ln(), self.cut.ln())
    }

    /// `∫ (1 - Σ χ_i) ½|∇Φ₀|²` over the whole plane, in polar coordinates
    /// about the centroid with `ρ = R t/(1 - t)`.
    fn remainder(&self, level: u32) -> f64 {
        let rule = gauss_legendre(8);
        let n = self.pts.len() as f64;
        let c = [self.pts.iter().map(|p| p[0]).sum::<f64>() / n, self.pts.iter().map(|p| p[1]).sum::<f64>() / n];
        let spread = self.pts.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1])).fold(0.0, f64::max);
        let big_r = spread + self.cut;
        let n_theta = 128usize << level;
        let panels = 32usize << level;
        let ht = 1.0 / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = ht * (p as f64 + 0.5);
            for &(xg, wg) in &rule {
                let t = mid + 0.5 * ht * xg;
                let rr = big_r * t / (1.0 - t);
                let jac = big_r / ((1.0 - t) * (1.0 - t));
                let mut ring = 0.0;
                for k in 0..n_theta {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64;
                    let x = [c[0] + rr * th.cos(), c[1] + rr * th.sin()];
                    let w = self.remainder_weight(x);
                    if w > 0.0 {
                        ring += w * self.density(x);
                    }
                }
                acc += 0.5 * ht * wg * rr * jac * ring * 2.0 * std::f64::consts::PI / n_theta as f64;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{ConformalChart, FlatChart};
    use crate::geometry::BuiltinSurface;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dipole() -> VortexConfiguration<f64> {
        VortexConfiguration::new(vec![[1.0, 0.0], [-1.0, 0.0]], vec![1, -1]).unwrap()
    }

    fn sphere_chart() -> ConformalChart<f64> {
        ConformalChart::new(&BuiltinSurface::Sphere.build().unwrap()).unwrap()
    }

    #[test]
    fn configuration_validation() {
        assert!(matches!(
            VortexConfiguration::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![1, 1]),
            Err(Error::DegreesDoNotCancel(2))
        ));
        assert!(matches!(
            VortexConfiguration::new(vec![[0.0, 0.0], [0.0, 0.0]], vec![1, -1]),
            Err(Error::ConfigurationInvalid(_))
        ));
        assert!(matches!(
            VortexConfiguration::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![0, 0]),
            Err(Error::ConfigurationInvalid(_))
        ));
    }

    #[test]
    fn sphere_dipole_closed_form() {
        // f(±1, 0) = 0 on the sphere, so only the interaction 2π ln 2 remains
        let w = renormalized_energy(&sphere_chart(), &dipole()).unwrap();
        assert!((w - 2.0 * PI * 2f64.ln()).abs() < 1e-8);
        assert_relative_eq!(renormalized_energy(&FlatChart, &dipole()).unwrap(), 2.0 * PI * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn flat_gradient_matches_hand_value() {
        // b_1 - b_2 = (2, 0): grad on b_1 = -2π (1)(-1) (2,0)/4 = (π, 0)
        let g = grad_w(&FlatChart, &dipole()).unwrap();
        assert_relative_eq!(g[0][0], PI, epsilon = 1e-14);
        assert_relative_eq!(g[1][0], -PI, epsilon = 1e-14);
    }

    #[test]
    fn curvature_trace_of_sphere_block() {
        let chart = sphere_chart();
        let hf = chart.hessian_f([1.0, 0.0]).unwrap();
        assert!((PI * (hf[0][0] + hf[1][1]) + PI).abs() < 1e-9);
    }

    #[test]
    fn sphere_dipole_certificate_uses_curvature() {
        let report = instability_certificate(&sphere_chart(), &dipole()).unwrap();
        assert_eq!(report.mechanism, Mechanism::CurvatureAtVortex);
        assert!(report.value < 0.0);
    }

    #[test]
    fn flat_scaling_identity() {
        let config = dipole();
        let report = instability_certificate(&FlatChart, &config).unwrap();
        assert_eq!(report.mechanism, Mechanism::ScalingDirection);
        // π Σ_{i≠j} d_i d_j = -π Σ d_i² = -2π
        assert_relative_eq!(report.value, -2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn translation_is_flat_direction() {
        let v = second_variation_along(&FlatChart, &dipole(), &[[0.3, -0.7], [0.3, -0.7]]).unwrap();
        assert!(v.abs() < 1e-12);
        let v = second_variation_along(&FlatChart, &dipole(), &[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn limit_definition_flat_and_sphere_dipole() {
        let want = 2.0 * PI * 2f64.ln();
        let flat = w_via_limit(&FlatChart, &dipole(), &LimitOptions::default()).unwrap();
        assert!((flat.value - want).abs() < 1e-3 * want, "flat {}", flat.value);
        let sphere = w_via_limit(&sphere_chart(), &dipole(), &LimitOptions::default()).unwrap();
        assert!((sphere.value - want).abs() < 0.02 * want);
        // halving the smallest r barely moves the extrapolation
        assert!((sphere.value - sphere.previous).abs() < 5e-3 * want);
    }

    #[test]
    fn limit_rejects_oversized_disks() {
        let close = VortexConfiguration::new(vec![[0.1, 0.0], [-0.1, 0.0]], vec![1, -1]).unwrap();
        assert!(matches!(
            w_via_limit(&FlatChart, &close, &LimitOptions::default()),
            Err(Error::ConfigurationInvalid(_))
        ));
    }
}
