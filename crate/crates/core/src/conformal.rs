//! Conformal chart of a closed surface of revolution.
//!
//! The map `(r, θ) ↦ (S(φ), θ)` with `r = cot(φ/2)` is conformal when
//! `S'(φ) sin φ = α(S(φ))`, giving the metric `e^{2f}(dx₁² + dx₂²)` with
//! `f = ln(α(S)/r)`. Since `sin φ = 2r/(1+r²)`, `α(S)/r = 2 S'(φ)/(1+r²)`, so
//! `f` is evaluated from the tabulated `S'` and never divides small numbers.
//!
//! The ODE is separable, and every solution from the north pole reaches the
//! south pole: the solution set is the one-parameter family of planar
//! dilations. The chart is normalized so that the equator `φ = π/2` (the unit
//! circle) splits the surface into two halves of equal area.

use crate::error::{Error, Result};
use crate::geometry::{Surface, SurfaceKind};
use crate::numeric::{bisect, hermite5, rk5_fixed, Real};

/// Innermost integration point away from either pole; the series covers the rest.
pub const PHI_START: f64 = 1e-4;
/// Evaluations of `A`, `B`, `∇f`, `D²f` closer than this to the origin are refused.
pub const R_MIN: f64 = 1e-8;
pub const DEFAULT_N_PHI: usize = 4096;
pub const DEFAULT_ODE_TOL: f64 = 1e-10;
/// Fixed integrator steps per table cell.
const SUBSTEPS: usize = 4;

/// Conformal factor data on the plane, shared by the real chart and the
/// flat test chart (`f ≡ 0`).
pub trait PlanarMetric<T: Real>: Sync {
    /// `f(x)`.
    fn conformal_factor(&self, x: [T; 2]) -> T;

    /// `(A, B)` with `∇f = -A x` and radial second derivative `A + B`.
    fn ab_values(&self, x: [T; 2]) -> Result<(T, T)>;

    /// Gauss curvature of the surface point with chart coordinates `x`.
    fn curvature(&self, x: [T; 2]) -> T;

    fn grad_f(&self, x: [T; 2]) -> Result<[T; 2]> {
        let (a, _) = self.ab_values(x)?;
        Ok([-a * x[0], -a * x[1]])
    }

    /// `D²f = -A I + (x xᵀ / r²)(2A + B)`.
    fn hessian_f(&self, x: [T; 2]) -> Result<[[T; 2]; 2]> {
        let (a, b) = self.ab_values(x)?;
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == T::zero() {
            return Ok([[-a, T::zero()], [T::zero(), -a]]);
        }
        let k = (T::lit(2.0) * a + b) / r2;
        Ok([[-a + k * x[0] * x[0], k * x[0] * x[1]], [k * x[0] * x[1], -a + k * x[1] * x[1]]])
    }
}

/// Test chart with `f ≡ 0`: isolates the logarithmic interaction.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlatChart;

impl<T: Real> PlanarMetric<T> for FlatChart {
    fn conformal_factor(&self, _x: [T; 2]) -> T {
        T::zero()
    }

    fn ab_values(&self, _x: [T; 2]) -> Result<(T, T)> {
        Ok((T::zero(), T::zero()))
    }

    fn curvature(&self, _x: [T; 2]) -> T {
        T::zero()
    }
}

/// Local series at a pole: distance along the profile `v = c t + c3 t³`
/// in the angle `t` from that pole, where the profile reads `v + a v³`.
#[derive(Clone, Copy, Debug)]
pub struct PoleSeries<T> {
    pub c: T,
    pub c3: T,
    pub a: T,
}

impl<T: Real> PoleSeries<T> {
    fn new(c: T, a: T) -> Self {
        Self { c, c3: c / T::lit(12.0) + a * c * c * c / T::lit(2.0), a }
    }

    /// Profile radius at angle `t` from the pole; for `v < 1e-4` the local
    /// series avoids cancellation in `l - v`.
    fn alpha_at(&self, t: T, alpha: impl Fn(T) -> T) -> T {
        let v = self.value(t);
        if v < T::lit(1e-4) {
            v * (T::one() + self.a * v * v)
        } else {
            alpha(v)
        }
    }

    fn value(&self, t: T) -> T {
        self.c * t + self.c3 * t * t * t
    }
}

#[derive(Clone, Debug)]
pub struct ConformalChart<T: Real> {
    surface: Surface<T>,
    h: T,
    /// `[S, S', S'']` at `φ_k = k h`.
    nodes: Vec<[T; 3]>,
    north: PoleSeries<T>,
    south: PoleSeries<T>,
    ode_tol: T,
    max_ode_residual: T,
}

/// Solves the conformal ODE on `[0, π]` and tabulates `S` at `n_phi + 1` nodes.
pub fn solve_chart<T: Real>(surface: &Surface<T>, n_phi: usize, ode_tol: T) -> Result<ConformalChart<T>> {
    ConformalChart::solve(surface, n_phi, ode_tol)
}

impl<T: Real> ConformalChart<T> {
    pub fn new(surface: &Surface<T>) -> Result<Self> {
        Self::solve(surface, DEFAULT_N_PHI, T::lit(DEFAULT_ODE_TOL))
    }

    pub fn solve(surface: &Surface<T>, n_phi: usize, ode_tol: T) -> Result<Self> {
        if surface.kind() != SurfaceKind::Closed {
            return Err(Error::WrongSurfaceKind("conformal chart needs a closed surface".into()));
        }
        if n_phi < 8 || n_phi % 2 != 0 {
            return Err(Error::BadParameter(format!("n_phi = {n_phi} must be even and >= 8")));
        }
        if !(ode_tol > T::zero()) {
            return Err(Error::BadParameter("ode_tol must be positive".into()));
        }
        let profile = surface.profile();
        let l = profile.length();
        let total = profile.area_integral(l);
        let area_goal = total / T::lit(2.0);
        let s_mid = bisect(|s| profile.area_integral(s) - area_goal, T::zero(), l, T::epsilon() * l, 200)
            .ok_or_else(|| Error::ShootingFailed("equal-area equator not bracketed".into()))?;

        let h = T::PI() / T::from_usize_lossy(n_phi);
        let half = n_phi / 2;

        // Each half is shot from its own pole to hit the equator value, on the
        // same node-to-node path that fills the table, so both halves meet exactly.
        let north_alpha = |v: T| profile.jet(v);
        let south_alpha = |v: T| {
            let [a, a1, a2, a3] = profile.jet(l - v);
            [a, -a1, a2, -a3]
        };
        let north_series = shoot_half(&north_alpha, s_mid, l, h, half)?;
        let south_series = shoot_half(&south_alpha, l - s_mid, l, h, half)?;

        let mut nodes = vec![[T::zero(); 3]; n_phi + 1];
        let (north, north_series) =
            snap_to_equator(&north_alpha, integrate_side(&north_alpha, north_series, h, half)?, north_series, s_mid, h);
        let (south, south_series) = snap_to_equator(
            &south_alpha,
            integrate_side(&south_alpha, south_series, h, half)?,
            south_series,
            l - s_mid,
            h,
        );
        for (k, n) in north.iter().enumerate() {
            nodes[k] = *n;
        }
        for (k, sv) in south.iter().enumerate() {
            // S = l - v, dS/dφ = dv/dδ, d²S/dφ² = -d²v/dδ²
            nodes[n_phi - k] = [l - sv[0], sv[1], -sv[2]];
        }
        let mismatch = (north[half][0] - (l - south[half][0])).abs();
        if mismatch > ode_tol * l {
            return Err(Error::ShootingFailed(format!(
                "halves disagree at the equator by {} (S_mid = {}, C = {}, C_south = {})",
                mismatch, s_mid, north_series.c, south_series.c
            )));
        }
        nodes[half][0] = s_mid;
        for w in nodes.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::NonMonotone { phi: 0.0 });
            }
        }

        let mut chart = Self {
            surface: surface.clone(),
            h,
            nodes,
            north: north_series,
            south: south_series,
            ode_tol,
            max_ode_residual: T::zero(),
        };
        let mut worst = T::zero();
        for k in 0..n_phi {
            let phi = h * (T::from_usize_lossy(k) + T::lit(0.5));
            let (s, ds) = chart.s_and_slope(phi);
            worst = worst.max((ds * phi.sin() - profile.alpha(s)).abs());
        }
        chart.max_ode_residual = worst;
        Ok(chart)
    }

    pub fn surface(&self) -> &Surface<T> {
        &self.surface
    }

    pub fn n_phi(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Shooting constants `(C, C_south)`: `S ≈ C φ` at the north pole and
    /// `l - S ≈ C_south (π - φ)` at the south pole.
    pub fn shooting_constants(&self) -> (T, T) {
        (self.north.c, self.south.c)
    }

    pub fn ode_tol(&self) -> T {
        self.ode_tol
    }

    /// Largest `|S' sin φ - α(S)|` over the cell midpoints.
    pub fn max_ode_residual(&self) -> T {
        self.max_ode_residual
    }

    pub fn phi_nodes(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes.iter().enumerate().map(move |(k, n)| (self.h * T::from_usize_lossy(k), n[0]))
    }

    /// `(S(φ), S'(φ))`.
    pub fn s_and_slope(&self, phi: T) -> (T, T) {
        let n = self.n_phi();
        let phi = phi.max(T::zero()).min(T::PI());
        let x = phi / self.h;
        let k = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = x - T::from_usize_lossy(k);
        hermite5(self.nodes[k], self.nodes[k + 1], self.h, t)
    }

    pub fn s_of_phi(&self, phi: T) -> T {
        self.s_and_slope(phi).0
    }

    /// Inverse of `S`, by bracketing on the monotone table and Newton with
    /// bisection safeguard inside the cell.
    pub fn phi_of_s(&self, s: T) -> T {
        let l = self.surface.length();
        let s = s.max(T::zero()).min(l);
        let n = self.n_phi();
        let k = self.nodes.partition_point(|node| node[0] <= s).clamp(1, n) - 1;
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut t = T::lit(0.5);
        for _ in 0..100 {
            let (v, dv) = hermite5(self.nodes[k], self.nodes[k + 1], self.h, t);
            let res = v - s;
            if res > T::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let mut next = t - res / (dv * self.h);
            if !(next > lo && next < hi) {
                next = (lo + hi) / T::lit(2.0);
            }
            if (next - t).abs() <= T::epsilon() * T::lit(4.0) {
                t = next;
                break;
            }
            t = next;
        }
        self.h * (T::from_usize_lossy(k) + t)
    }

    /// Chart coordinates of the surface point `(s, θ)`.
    pub fn chart_coords(&self, s: T, theta: T) -> Result<[T; 2]> {
        if !(s > T::zero()) {
            return Err(Error::PoleAtInfinity);
        }
        let phi = self.phi_of_s(s);
        let r = T::one() / (phi / T::lit(2.0)).tan();
        let r = r.max(T::zero());
        Ok([r * theta.cos(), r * theta.sin()])
    }

    /// Surface coordinates `(s, θ)` of a chart point.
    pub fn surface_coords(&self, x: [T; 2]) -> (T, T) {
        let r = x[0].hypot(x[1]);
        (self.s_of_phi(phi_of_r(r)), x[1].atan2(x[0]))
    }

    /// `(S, α(S)/r, α'(S))` at radius `r`. The ratio comes from `α` at the
    /// tabulated `S` (whose error is absolute and smooth) rather than from the
    /// interpolated slope (whose node round-off is amplified by `1/h`); within
    /// `2e-3` of a pole the pole series replaces the table.
    fn radial(&self, r: T) -> (T, T, T) {
        let profile = self.surface.profile();
        let l = self.surface.length();
        let phi = phi_of_r(r);
        let near = T::lit(2e-3);
        let delta = T::PI() - phi;
        if r == T::zero() {
            return (l, T::lit(2.0) * self.south.c, T::one().neg());
        }
        let (s, alpha) = if delta < near {
            let v = self.south.value(delta);
            (l - v, self.south.alpha_at(delta, |v| profile.alpha(l - v)))
        } else if phi < near {
            let v = self.north.value(phi);
            (v, self.north.alpha_at(phi, |v| profile.alpha(v)))
        } else {
            let s = self.s_of_phi(phi);
            (s, profile.alpha(s))
        };
        (s, alpha / r, profile.d_alpha(s))
    }

    /// `Δf + K e^{2f}` with `Δf` from a sixth-order radial finite difference
    /// of `f` (not from the analytic trace, which satisfies the identity
    /// by construction).
    pub fn laplace_check(&self, x: [T; 2]) -> Result<T> {
        let r = x[0].hypot(x[1]);
        if r < T::lit(R_MIN) {
            return Err(Error::OriginUndefined { r: r.to_f64_lossy() });
        }
        let hstep = T::lit(1e-2) * r.min(T::one());
        let w1 = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        let w2 = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
        let mut d1 = T::zero();
        let mut d2 = T::zero();
        for i in 0..7 {
            let rho = r + hstep * T::lit(i as f64 - 3.0);
            let f = self.conformal_factor([rho, T::zero()]);
            d1 = d1 + T::lit(w1[i]) * f;
            d2 = d2 + T::lit(w2[i]) * f;
        }
        let lap = d2 / (hstep * hstep) + d1 / (hstep * r);
        let e2f = self.conformal_factor(x).exp().powi(2);
        Ok(lap + self.curvature(x) * e2f)
    }
}

/// `φ = 2 arccot r`, equal to `π` at the origin.
pub fn phi_of_r<T: Real>(r: T) -> T {
    T::lit(2.0) * T::one().atan2(r)
}

impl<T: Real> PlanarMetric<T> for ConformalChart<T> {
    fn conformal_factor(&self, x: [T; 2]) -> T {
        let r = x[0].hypot(x[1]);
        self.radial(r).1.ln()
    }

    fn ab_values(&self, x: [T; 2]) -> Result<(T, T)> {
        let r = x[0].hypot(x[1]);
        if r < T::lit(R_MIN) {
            return Err(Error::OriginUndefined { r: r.to_f64_lossy() });
        }
        let (s, ratio, a1) = self.radial(r);
        let k = self.surface.gauss_curvature(s);
        Ok(((a1 + T::one()) / (r * r), -ratio * ratio * k))
    }

    fn curvature(&self, x: [T; 2]) -> T {
        let r = x[0].hypot(x[1]);
        self.surface.gauss_curvature(self.s_of_phi(phi_of_r(r)))
    }
}

/// `[v, dv/dt, d²v/dt²]` at `t = k h`, `k = 0..=count`, for the profile
/// `alpha` seen from one pole.
fn integrate_side<T: Real>(
    alpha: &impl Fn(T) -> [T; 4],
    series: PoleSeries<T>,
    h: T,
    count: usize,
) -> Result<Vec<[T; 3]>> {
    let mut out = Vec::with_capacity(count + 1);
    out.push([T::zero(), series.c, T::zero()]);
    let t0 = T::lit(PHI_START);
    let mut t = t0;
    let mut v = series.value(t0);
    let g = |t: T, v: T| alpha(v)[0] / t.sin();
    for k in 1..=count {
        let tk = h * T::from_usize_lossy(k);
        let vk = rk5_fixed(&g, t, v, tk, SUBSTEPS);
        if !vk.is_finite() {
            return Err(Error::ShootingFailed(format!("non-finite solution at phi = {}", tk)));
        }
        t = tk;
        v = vk;
        let [a, a1, _, _] = alpha(vk);
        let (sn, cs) = tk.sin_cos();
        let d1 = a / sn;
        if !(d1 > T::zero()) {
            return Err(Error::NonMonotone { phi: tk.to_f64_lossy() });
        }
        out.push([vk, d1, d1 * (a1 - cs) / sn]);
    }
    Ok(out)
}

/// Integration round-off leaves each half ~1e-13 off its equator target,
/// which would put a kink in the table there. The solutions form the family
/// `∂v/∂c = α(v)` (dilations), so shift the half along it by the misfit and
/// refresh the ODE slopes.
fn snap_to_equator<T: Real>(
    alpha: &impl Fn(T) -> [T; 4],
    mut side: Vec<[T; 3]>,
    series: PoleSeries<T>,
    target: T,
    h: T,
) -> (Vec<[T; 3]>, PoleSeries<T>) {
    let last = side.len() - 1;
    let dc = -(side[last][0] - target) / alpha(target)[0];
    let a3 = alpha(T::zero())[3] / T::lit(6.0);
    let series = PoleSeries::new(series.c * dc.exp(), a3);
    side[0] = [T::zero(), series.c, T::zero()];
    for (k, node) in side.iter_mut().enumerate().skip(1) {
        let v = node[0] + dc * alpha(node[0])[0];
        let [a, a1, _, _] = alpha(v);
        let (sn, cs) = (h * T::from_usize_lossy(k)).sin_cos();
        let d1 = a / sn;
        *node = [v, d1, d1 * (a1 - cs) / sn];
    }
    side[last][0] = target;
    (side, series)
}

/// Finds the series constant `c` at one pole so that the solution reaches
/// `target` at `t = π/2`. `alpha` is the profile seen from that pole.
fn shoot_half<T: Real>(
    alpha: &impl Fn(T) -> [T; 4],
    target: T,
    l: T,
    h: T,
    count: usize,
) -> Result<PoleSeries<T>> {
    let a3 = alpha(T::zero())[3] / T::lit(6.0);
    let reach = |log_c: T| -> T {
        match integrate_side(alpha, PoleSeries::new(log_c.exp(), a3), h, count) {
            Ok(side) => side[count][0] - target,
            Err(_) => l,
        }
    };
    let lo = T::lit(-20.0);
    let hi = (T::lit(0.01) * l / T::lit(PHI_START)).ln();
    let log_c = bisect(reach, lo, hi, T::epsilon() * T::lit(8.0), 200).ok_or_else(|| {
        Error::ShootingFailed(format!("no shooting constant in [e^{}, e^{}] reaches {}", lo, hi, target))
    })?;
    let series = PoleSeries::new(log_c.exp(), a3);
    if reach(log_c).abs() > T::lit(1e-9) * l {
        return Err(Error::ShootingFailed(format!("best constant {} misses target {}", series.c, target)));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinSurface;
    use crate::numeric::{gauss_legendre, integrate_gl};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sphere_chart() -> ConformalChart<f64> {
        ConformalChart::new(&BuiltinSurface::Sphere.build().unwrap()).unwrap()
    }

    #[test]
    fn sphere_chart_is_identity() {
        let chart = sphere_chart();
        let (c, c2) = chart.shooting_constants();
        assert_relative_eq!(c, 1.0, epsilon = 1e-10);
        assert_relative_eq!(c2, 1.0, epsilon = 1e-10);
        for i in 0..=200 {
            let phi = PI * i as f64 / 200.0;
            assert!((chart.s_of_phi(phi) - phi).abs() < 1e-10);
        }
        assert!((chart.s_of_phi(PI / 2.0) - PI / 2.0).abs() < 1e-10);
        assert!(chart.max_ode_residual() < 1e-10);
    }

    #[test]
    fn sphere_chart_coords() {
        let chart = sphere_chart();
        let x = chart.chart_coords(PI, 0.7).unwrap();
        assert!(x[0].hypot(x[1]) < 1e-12);
        let x = chart.chart_coords(PI / 2.0, 0.0).unwrap();
        // r = cot(π/4) = 1
        assert!((x[0] - 1.0).abs() < 1e-10 && x[1].abs() < 1e-12);
        assert!(matches!(chart.chart_coords(0.0, 0.0), Err(Error::PoleAtInfinity)));
        let mut last = 0.0;
        for s in [1.0, 0.1, 1e-2, 1e-3, 1e-4] {
            let r = chart.chart_coords(s, 0.0).unwrap()[0];
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn round_trip_surface_chart() {
        let apple: Surface<f64> = BuiltinSurface::Apple { pinch: 0.5 }.build().unwrap();
        let chart = ConformalChart::new(&apple).unwrap();
        for i in 1..=50 {
            let s = PI * i as f64 / 51.0;
            let x = chart.chart_coords(s, 1.1).unwrap();
            let (s2, th) = chart.surface_coords(x);
            assert!((s2 - s).abs() < 1e-10, "{s} vs {s2}");
            assert!((th - 1.1).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_conformal_factor_closed_form() {
        let chart = sphere_chart();
        assert!(chart.conformal_factor([1.0, 0.0]).abs() < 1e-10);
        assert!((chart.conformal_factor([0.0, 0.0]) - 2f64.ln()).abs() < 1e-10);
        for r in [0.01f64, 0.3, 1.7, 10.0, 100.0] {
            let want = (2.0 / (1.0 + r * r)).ln();
            assert!((chart.conformal_factor([r, 0.0]) - want).abs() < 1e-9, "r = {r}");
        }
    }

    #[test]
    fn sphere_ab_at_unit_radius() {
        let chart = sphere_chart();
        let (a, b) = chart.ab_values([1.0, 0.0]).unwrap();
        assert!((a - 1.0).abs() < 1e-10 && (b + 1.0).abs() < 1e-10);
        let hess = chart.hessian_f([1.0, 0.0]).unwrap();
        assert!(hess[0][0].abs() < 1e-10 && (hess[1][1] + 1.0).abs() < 1e-10 && hess[0][1].abs() < 1e-12);
        assert!(matches!(chart.ab_values([1e-9, 0.0]), Err(Error::OriginUndefined { .. })));
    }

    #[test]
    fn apple_matches_separable_quadrature() {
        let apple: Surface<f64> = BuiltinSurface::Apple { pinch: 0.5 }.build().unwrap();
        let chart = ConformalChart::new(&apple).unwrap();
        assert!(chart.max_ode_residual() < 1e-8);
        let s_mid = chart.s_of_phi(PI / 2.0);
        let rule = gauss_legendre(10);
        // ∫_{s_mid}^{S(φ)} ds / α = ln tan(φ/2)
        for phi in [0.3f64, 0.9, 1.4, 2.0, 2.7] {
            let s = chart.s_of_phi(phi);
            let lhs = integrate_gl(|x: f64| 1.0 / apple.profile().alpha(x), s_mid, s, 200, &rule);
            assert!((lhs - (phi / 2.0).tan().ln()).abs() < 1e-9, "phi = {phi}");
        }
        // equal-area normalization
        let p = apple.profile();
        assert!((p.area_integral(s_mid) - p.area_integral(PI) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn apple_chart_converges_under_refinement() {
        let apple: Surface<f64> = BuiltinSurface::Apple { pinch: 0.5 }.build().unwrap();
        let coarse = ConformalChart::solve(&apple, 2048, 1e-10).unwrap();
        let fine = ConformalChart::solve(&apple, 4096, 1e-10).unwrap();
        for r in [0.05, 0.5, 1.0, 3.0, 20.0] {
            let x = [r, 0.0];
            assert!((coarse.conformal_factor(x) - fine.conformal_factor(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn laplace_identity_on_sphere_and_apple() {
        let chart = sphere_chart();
        for r in [0.5, 1.0, 2.0] {
            assert!(chart.laplace_check([r, 0.0]).unwrap().abs() < 1e-8);
        }
        let apple: Surface<f64> = BuiltinSurface::Apple { pinch: 0.5 }.build().unwrap();
        let chart = ConformalChart::new(&apple).unwrap();
        for r in [0.1, 0.4, 1.0, 2.5, 10.0] {
            assert!(chart.laplace_check([0.0, r]).unwrap().abs() < 1e-6, "r = {r}");
        }
    }

    #[test]
    fn non_closed_surface_is_rejected() {
        let cap: Surface<f64> = BuiltinSurface::SphericalCap { l: 1.0 }.build().unwrap();
        assert!(matches!(ConformalChart::new(&cap), Err(Error::WrongSurfaceKind(_))));
    }

    #[test]
    fn flat_chart_is_flat() {
        let flat = FlatChart;
        assert_eq!(PlanarMetric::<f64>::conformal_factor(&flat, [2.0, 1.0]), 0.0);
        assert_eq!(PlanarMetric::<f64>::hessian_f(&flat, [0.0, 0.0]).unwrap(), [[0.0; 2]; 2]);
    }
}
