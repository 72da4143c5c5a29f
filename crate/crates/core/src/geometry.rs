//! Surfaces of revolution described by an arclength profile `(alpha(s), beta(s))`.
//!
//! Only `alpha` (distance from the axis) is ever supplied; the height `beta`
//! is reconstructed from `beta' = sqrt(1 - alpha'^2)` so the profile is unit
//! speed by construction. The metric is `ds^2 + alpha(s)^2 dtheta^2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{fd_weights, gauss_legendre, hermite, Real};

/// Number of cells of the fine tables backing tabulated profiles and the
/// cumulative `beta` / area integrals.
pub const FINE_CELLS: usize = 4096;

type AlphaFn<T> = Arc<dyn Fn(T) -> [T; 4] + Send + Sync>;

/// Uniformly tabulated function with known derivative at every node,
/// evaluated by cubic Hermite interpolation.
#[derive(Clone, Debug)]
struct HermiteTable<T> {
    h: T,
    values: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> HermiteTable<T> {
    fn eval(&self, s: T) -> (T, T) {
        let n = self.values.len() - 1;
        let x = (s / self.h).max(T::zero());
        let k = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = x - T::from_usize_lossy(k);
        hermite(self.values[k], self.slopes[k], self.values[k + 1], self.slopes[k + 1], self.h, t)
    }

    /// Cumulative integral `Y(s) = ∫_0^s g` of `g` on `[0, l]`.
    fn cumulative(g: impl Fn(T) -> T, l: T, cells: usize) -> Self {
        let rule = gauss_legendre(8);
        let h = l / T::from_usize_lossy(cells);
        let half = h / T::lit(2.0);
        let mut values = Vec::with_capacity(cells + 1);
        let mut slopes = Vec::with_capacity(cells + 1);
        let mut acc = T::zero();
        values.push(acc);
        slopes.push(g(T::zero()));
        for k in 0..cells {
            let mid = h * (T::from_usize_lossy(k) + T::lit(0.5));
            let cell: T = rule.iter().map(|&(x, w)| T::lit(w) * g(mid + half * T::lit(x))).sum();
            acc = acc + cell * half;
            values.push(acc);
            slopes.push(g(h * T::from_usize_lossy(k + 1)));
        }
        Self { h, values, slopes }
    }
}

/// Profile values on a fine uniform grid with derivatives from high-order
/// finite differences.
#[derive(Clone, Debug)]
struct TabulatedAlpha<T> {
    h: T,
    nodes: Vec<[T; 4]>,
}

impl<T: Real> TabulatedAlpha<T> {
    fn from_samples(samples: &[T], h: T) -> Self {
        let n = samples.len() - 1;
        let pole_at_end = samples[n].abs() <= T::lit(1e-9) * (T::one() + samples.iter().fold(T::zero(), |m, v| m.max(v.abs())));
        // Odd reflection across a pole: a smooth surface of revolution has an
        // odd profile about every point where it meets the axis.
        let value_at = |i: isize| -> Option<T> {
            if i < 0 {
                let j = (-i) as usize;
                (j <= n).then(|| -samples[j])
            } else if (i as usize) > n {
                let j = 2 * n as isize - i;
                (pole_at_end && j >= 0).then(|| -samples[j as usize])
            } else {
                Some(samples[i as usize])
            }
        };
        let mut nodes = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut out = [samples[k], T::zero(), T::zero(), T::zero()];
            for (order, spacing) in [(1usize, 1isize), (2, 2), (3, 4)] {
                let mut offsets: Vec<isize> = (-3..=3).map(|o| o * spacing).collect();
                while value_at(k as isize + offsets[6]).is_none() {
                    for o in offsets.iter_mut() {
                        *o -= spacing;
                    }
                }
                let xs: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
                let w = fd_weights(0.0, &xs, order);
                let mut acc = T::zero();
                for (o, wi) in offsets.iter().zip(&w[order]) {
                    acc = acc + T::lit(*wi) * value_at(k as isize + o).expect("stencil inside table");
                }
                out[order] = acc / h.powi(order as i32);
            }
            nodes.push(out);
        }
        Self { h, nodes }
    }

    fn eval(&self, s: T) -> [T; 4] {
        let n = self.nodes.len() - 1;
        let x = (s / self.h).max(T::zero());
        let k = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = x - T::from_usize_lossy(k);
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let (v0, _) = hermite(a[0], a[1], b[0], b[1], self.h, t);
        let (v1, _) = hermite(a[1], a[2], b[1], b[2], self.h, t);
        let (v2, _) = hermite(a[2], a[3], b[2], b[3], self.h, t);
        let v3 = a[3] + (b[3] - a[3]) * t;
        [v0, v1, v2, v3]
    }
}

#[derive(Clone)]
enum AlphaSource<T> {
    Analytic(AlphaFn<T>),
    Tabulated(Arc<TabulatedAlpha<T>>),
}

/// Arclength-parametrized generating curve `gamma(s) = (alpha(s), 0, beta(s))`
/// on `[0, l]` with a pole at `s = 0`.
#[derive(Clone)]
pub struct ProfileCurve<T> {
    length: T,
    alpha: AlphaSource<T>,
    beta: HermiteTable<T>,
    area: HermiteTable<T>,
    tabulated: bool,
}

impl<T: fmt::Debug> fmt::Debug for ProfileCurve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileCurve")
            .field("length", &self.length)
            .field("tabulated", &self.tabulated)
            .finish()
    }
}

impl<T: Real> ProfileCurve<T> {
    /// Profile with closed-form `[alpha, alpha', alpha'', alpha''']`.
    pub fn analytic(length: T, alpha: impl Fn(T) -> [T; 4] + Send + Sync + 'static) -> Result<Self> {
        let alpha: AlphaFn<T> = Arc::new(alpha);
        Self::finish(length, AlphaSource::Analytic(alpha), false)
    }

    /// Accessor for the profile's total arclength `l`.
    pub fn length(&self) -> T {
        self.length
    }

    pub fn is_tabulated(&self) -> bool {
        self.tabulated
    }

    /// `[alpha, alpha', alpha'', alpha''']` at `s` (clamped to `[0, l]`).
    pub fn jet(&self, s: T) -> [T; 4] {
        let s = s.max(T::zero()).min(self.length);
        match &self.alpha {
            AlphaSource::Analytic(f) => f(s),
            AlphaSource::Tabulated(t) => t.eval(s),
        }
    }

    pub fn alpha(&self, s: T) -> T {
        self.jet(s)[0]
    }

    pub fn d_alpha(&self, s: T) -> T {
        self.jet(s)[1]
    }

    pub fn dd_alpha(&self, s: T) -> T {
        self.jet(s)[2]
    }

    pub fn beta(&self, s: T) -> T {
        self.beta.eval(s.max(T::zero()).min(self.length)).0
    }

    pub fn d_beta(&self, s: T) -> T {
        let a1 = self.d_alpha(s);
        (T::one() - a1 * a1).max(T::zero()).sqrt()
    }

    /// `H(s) = ∫_0^s alpha`; the area of the cap `[0, s]` is `2π H(s)`.
    pub fn area_integral(&self, s: T) -> T {
        self.area.eval(s.max(T::zero()).min(self.length)).0
    }

    fn finish(length: T, alpha: AlphaSource<T>, tabulated: bool) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::BadParameter(format!("profile length {} must be positive", length)));
        }
        let jet = |s: T| match &alpha {
            AlphaSource::Analytic(f) => f(s),
            AlphaSource::Tabulated(t) => t.eval(s),
        };
        let scale = T::one().max(length);
        let a0 = jet(T::zero())[0];
        if a0.abs() > T::lit(1e-9) * scale {
            return Err(Error::PoleMismatch { s: 0.0, reason: format!("alpha(0) = {} != 0", a0) });
        }
        let samples = 2 * FINE_CELLS;
        let slope_tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        for i in 0..=samples {
            let s = length * T::from_usize_lossy(i) / T::from_usize_lossy(samples);
            let [a, a1, _, _] = jet(s);
            if !a.is_finite() || !a1.is_finite() {
                return Err(Error::BadParameter(format!("non-finite profile value at s = {}", s)));
            }
            if a1.abs() > T::one() + slope_tol {
                return Err(Error::SlopeExceedsOne { s: s.to_f64_lossy(), slope: a1.to_f64_lossy() });
            }
            if i > 0 && i < samples && a <= T::zero() {
                return Err(Error::NegativeRadius { s: s.to_f64_lossy(), alpha: a.to_f64_lossy() });
            }
        }
        let beta = HermiteTable::cumulative(
            |s| {
                let a1 = jet(s)[1];
                (T::one() - a1 * a1).max(T::zero()).sqrt()
            },
            length,
            FINE_CELLS,
        );
        let area = HermiteTable::cumulative(|s| jet(s)[0], length, FINE_CELLS);
        Ok(Self { length, alpha, beta, area, tabulated })
    }
}

/// Builds a profile from `alpha` alone. Derivatives come from centered
/// high-order differences on a fine uniform grid; `beta` from quadrature of
/// `sqrt(1 - alpha'^2)` with `beta(0) = 0`.
pub fn build_profile_from_alpha<T: Real>(alpha: impl Fn(T) -> T, length: T) -> Result<ProfileCurve<T>> {
    if !(length > T::zero()) || !length.is_finite() {
        return Err(Error::BadParameter(format!("profile length {} must be positive", length)));
    }
    let h = length / T::from_usize_lossy(FINE_CELLS);
    let samples: Vec<T> = (0..=FINE_CELLS).map(|k| alpha(h * T::from_usize_lossy(k))).collect();
    let table = TabulatedAlpha::from_samples(&samples, h);
    ProfileCurve::finish(length, AlphaSource::Tabulated(Arc::new(table)), true)
}

/// Whether the far end `s = l` is a second pole or a boundary circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Closed,
    BoundaryCap,
}

#[derive(Clone, Debug)]
pub struct Surface<T> {
    profile: ProfileCurve<T>,
    kind: SurfaceKind,
}

impl<T: Real> Surface<T> {
    /// Closed surface: `alpha(l) = 0`, `beta'(l) = 0`, and `beta''(0) != 0`
    /// (equivalently positive curvature at the pole `s = 0`).
    pub fn closed(profile: ProfileCurve<T>) -> Result<Self> {
        let l = profile.length();
        let tol = if profile.is_tabulated() { T::lit(1e-6) } else { T::lit(1e-8) };
        let tol = tol.max(T::epsilon() * T::lit(64.0));
        let [al, al1, _, _] = profile.jet(l);
        if al.abs() > tol * T::one().max(l) {
            return Err(Error::PoleMismatch { s: l.to_f64_lossy(), reason: format!("alpha(l) = {} != 0", al) });
        }
        if profile.d_beta(l) > tol.sqrt() || al1 > T::zero() {
            return Err(Error::PoleMismatch {
                s: l.to_f64_lossy(),
                reason: format!("beta'(l) != 0 (alpha'(l) = {})", al1),
            });
        }
        let surface = Self { profile, kind: SurfaceKind::Closed };
        let k0 = surface.gauss_curvature(T::zero());
        if !(k0 > tol) {
            return Err(Error::PoleMismatch { s: 0.0, reason: format!("beta''(0) = 0 (K(0) = {})", k0) });
        }
        Ok(surface)
    }

    /// Surface with boundary circle `s = l`, which requires `alpha(l) > 0`.
    pub fn boundary_cap(profile: ProfileCurve<T>) -> Result<Self> {
        let l = profile.length();
        let al = profile.alpha(l);
        if !(al > T::zero()) {
            return Err(Error::NegativeRadius { s: l.to_f64_lossy(), alpha: al.to_f64_lossy() });
        }
        Ok(Self { profile, kind: SurfaceKind::BoundaryCap })
    }

    pub fn new(profile: ProfileCurve<T>, kind: SurfaceKind) -> Result<Self> {
        match kind {
            SurfaceKind::Closed => Self::closed(profile),
            SurfaceKind::BoundaryCap => Self::boundary_cap(profile),
        }
    }

    pub fn profile(&self) -> &ProfileCurve<T> {
        &self.profile
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn length(&self) -> T {
        self.profile.length()
    }

    /// Metric coefficients `(g_ss, g_θθ) = (1, alpha^2)`.
    pub fn metric(&self, s: T) -> (T, T) {
        let a = self.profile.alpha(s);
        (T::one(), a * a)
    }

    /// Gauss curvature `K = -alpha''/alpha`, with the pole limit
    /// `-alpha'''/alpha'` wherever `alpha < 1e-6 l`.
    pub fn gauss_curvature(&self, s: T) -> T {
        gauss_curvature(self, s)
    }

    /// Total area `2π H(l)`.
    pub fn area(&self) -> T {
        T::lit(2.0) * T::PI() * self.profile.area_integral(self.length())
    }

    /// Embedding `x(s, θ) = (alpha cos θ, alpha sin θ, beta)`.
    pub fn embed(&self, s: T, theta: T) -> [T; 3] {
        let a = self.profile.alpha(s);
        [a * theta.cos(), a * theta.sin(), self.profile.beta(s)]
    }
}

pub fn gauss_curvature<T: Real>(surface: &Surface<T>, s: T) -> T {
    let l = surface.length();
    let pole_eps = T::lit(1e-6) * l;
    let [a, a1, a2, a3] = surface.profile.jet(s);
    if a < pole_eps {
        -a3 / a1
    } else {
        -a2 / a
    }
}

/// Named surfaces shipped with the library.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuiltinSurface {
    /// Unit sphere, `alpha = sin s` on `[0, π]`.
    Sphere,
    /// Polar cap of the unit sphere, `alpha = sin s` on `[0, l]`, `l < π`.
    SphericalCap { l: f64 },
    /// Closed waisted surface `alpha = sin s - pinch sin^3 s` on `[0, π]`,
    /// `0 <= pinch <= 2/3`. Curvature at both poles is `1 + 6 pinch`; for
    /// `pinch > 1/3` the curvature turns negative around the waist `s = π/2`.
    Apple { pinch: f64 },
    /// Cap with `alpha' = c + (1 - c) sech^2(2s/l) >= c`, i.e.
    /// `alpha = c s + (1 - c)(l/2) tanh(2s/l)`.
    SteepCap { c: f64, l: f64 },
    /// Cap of the waisted profile cut past its first shoulder, so that
    /// `alpha'` turns negative before the boundary. Requires
    /// `asin(sqrt(2/3)) < l < π`.
    BulbCap { l: f64 },
}

impl BuiltinSurface {
    pub const APPLE_DEFAULT_PINCH: f64 = 0.5;
    pub const BULB_DEFAULT_LENGTH: f64 = 1.4;
    const BULB_PINCH: f64 = 0.5;

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::SphericalCap { .. } => "spherical_cap",
            Self::Apple { .. } => "apple",
            Self::SteepCap { .. } => "steep_cap",
            Self::BulbCap { .. } => "bulb_cap",
        }
    }

    pub fn build<T: Real>(&self) -> Result<Surface<T>> {
        builtin_surface(*self)
    }
}

fn pinched_sine<T: Real>(pinch: T) -> impl Fn(T) -> [T; 4] + Send + Sync + 'static {
    move |s: T| {
        let (sn, cs) = s.sin_cos();
        let p = pinch;
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        [
            sn - p * sn * sn * sn,
            cs - three * p * sn * sn * cs,
            -sn - six * p * sn * cs * cs + three * p * sn * sn * sn,
            -cs - six * p * cs * cs * cs + T::lit(21.0) * p * sn * sn * cs,
        ]
    }
}

pub fn builtin_surface<T: Real>(which: BuiltinSurface) -> Result<Surface<T>> {
    let bad = |msg: String| Err(Error::BadParameter(msg));
    match which {
        BuiltinSurface::Sphere => Surface::closed(ProfileCurve::analytic(T::PI(), pinched_sine(T::zero()))?),
        BuiltinSurface::SphericalCap { l } => {
            if !(l > 0.0 && l < std::f64::consts::PI) {
                return bad(format!("spherical_cap needs 0 < l < π, got {l}"));
            }
            Surface::boundary_cap(ProfileCurve::analytic(T::lit(l), pinched_sine(T::zero()))?)
        }
        BuiltinSurface::Apple { pinch } => {
            if !(0.0..=2.0 / 3.0).contains(&pinch) {
                return bad(format!("apple needs 0 <= pinch <= 2/3, got {pinch}"));
            }
            Surface::closed(ProfileCurve::analytic(T::PI(), pinched_sine(T::lit(pinch)))?)
        }
        BuiltinSurface::SteepCap { c, l } => {
            if !(c > 0.0 && c <= 1.0) || !(l > 0.0 && l.is_finite()) {
                return bad(format!("steep_cap needs 0 < c <= 1 and l > 0, got c = {c}, l = {l}"));
            }
            let (c, w) = (T::lit(c), T::lit(l / 2.0));
            let profile = ProfileCurve::analytic(T::lit(l), move |s: T| {
                let x = s / w;
                let th = x.tanh();
                let sech2 = T::one() - th * th;
                let k = T::one() - c;
                [
                    c * s + k * w * th,
                    c + k * sech2,
                    -T::lit(2.0) * k / w * sech2 * th,
                    -T::lit(2.0) * k / (w * w) * (sech2 * sech2 - T::lit(2.0) * sech2 * th * th),
                ]
            })?;
            Surface::boundary_cap(profile)
        }
        BuiltinSurface::BulbCap { l } => {
            let shoulder = (2.0f64 / 3.0).sqrt().asin();
            if !(l > shoulder + 1e-3 && l < std::f64::consts::PI) {
                return bad(format!("bulb_cap needs {shoulder:.4} < l < π, got {l}"));
            }
            Surface::boundary_cap(ProfileCurve::analytic(
                T::lit(l),
                pinched_sine(T::lit(BuiltinSurface::BULB_PINCH)),
            )?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn builtins() -> Vec<BuiltinSurface> {
        vec![
            BuiltinSurface::Sphere,
            BuiltinSurface::SphericalCap { l: 1.2 },
            BuiltinSurface::Apple { pinch: 0.5 },
            BuiltinSurface::SteepCap { c: 0.4, l: 1.5 },
            BuiltinSurface::BulbCap { l: BuiltinSurface::BULB_DEFAULT_LENGTH },
        ]
    }

    #[test]
    fn builtins_are_unit_speed() {
        for b in builtins() {
            let surf: Surface<f64> = b.build().unwrap();
            let l = surf.length();
            for i in 0..1000 {
                let s = l * (i as f64 + 0.5) / 1000.0;
                let p = surf.profile();
                let speed = p.d_alpha(s).powi(2) + p.d_beta(s).powi(2);
                assert!((speed - 1.0).abs() < 1e-8, "{} at {s}", b.name());
                // beta' from the quadrature table agrees with the closed form
                let h = 1e-5;
                let fd = (p.beta(s + h) - p.beta(s - h)) / (2.0 * h);
                if s > h && s < l - h {
                    assert!((fd - p.d_beta(s)).abs() < 1e-8, "{} beta' at {s}", b.name());
                }
            }
        }
    }

    #[test]
    fn sphere_curvature_is_one_everywhere_including_poles() {
        let sphere: Surface<f64> = BuiltinSurface::Sphere.build().unwrap();
        for i in 0..=1000 {
            let s = PI * i as f64 / 1000.0;
            assert!((sphere.gauss_curvature(s) - 1.0).abs() < 1e-8, "s = {s}");
        }
        assert_relative_eq!(sphere.gauss_curvature(PI / 2.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_builtins_meet_endpoint_conditions() {
        for b in [BuiltinSurface::Sphere, BuiltinSurface::Apple { pinch: 0.5 }] {
            let surf: Surface<f64> = b.build().unwrap();
            let p = surf.profile();
            let l = surf.length();
            assert!(p.alpha(0.0).abs() < 1e-8 && p.alpha(l).abs() < 1e-8);
            assert!(p.d_beta(0.0) < 1e-8 && p.d_beta(l) < 1e-8);
            assert!(surf.gauss_curvature(0.0) > 0.0);
        }
    }

    #[test]
    fn sphere_beta_matches_one_minus_cos() {
        let sphere: Surface<f64> = BuiltinSurface::Sphere.build().unwrap();
        for i in 0..=50 {
            let s = PI * i as f64 / 50.0;
            assert!((sphere.profile().beta(s) - (1.0 - s.cos())).abs() < 1e-10);
        }
        assert_relative_eq!(sphere.area(), 4.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn spherical_cap_slope_bound() {
        let cap: Surface<f64> = BuiltinSurface::SphericalCap { l: 1.2 }.build().unwrap();
        let min_slope = (0..=2000).map(|i| cap.profile().d_alpha(1.2 * i as f64 / 2000.0)).fold(f64::MAX, f64::min);
        // oracle: cos is decreasing on [0, 1.2], so its minimum is cos(1.2)
        assert_relative_eq!(min_slope, 1.2f64.cos(), epsilon = 1e-12);
        assert!(min_slope > 0.36);
        assert_eq!(cap.kind(), SurfaceKind::BoundaryCap);
        assert_relative_eq!(cap.profile().alpha(1.2), 1.2f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn bulb_cap_slope_changes_sign_and_steep_cap_does_not() {
        let bulb: Surface<f64> = BuiltinSurface::BulbCap { l: 1.4 }.build().unwrap();
        let slopes: Vec<f64> = (0..=1000).map(|i| bulb.profile().d_alpha(1.4 * i as f64 / 1000.0)).collect();
        assert!(slopes.iter().any(|&a| a < 0.0) && slopes[0] > 0.0);
        let steep: Surface<f64> = BuiltinSurface::SteepCap { c: 0.4, l: 1.5 }.build().unwrap();
        let min = (0..=1000).map(|i| steep.profile().d_alpha(1.5 * i as f64 / 1000.0)).fold(f64::MAX, f64::min);
        assert!(min >= 0.4);
    }

    #[test]
    fn apple_curvature_changes_sign() {
        let apple: Surface<f64> = BuiltinSurface::Apple { pinch: 0.5 }.build().unwrap();
        assert_relative_eq!(apple.gauss_curvature(0.0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(apple.gauss_curvature(PI), 4.0, epsilon = 1e-12);
        assert!(apple.gauss_curvature(PI / 2.0) < 0.0);
    }

    #[test]
    fn bad_builtin_parameters_are_rejected() {
        assert!(matches!(builtin_surface::<f64>(BuiltinSurface::SphericalCap { l: 3.5 }), Err(Error::BadParameter(_))));
        assert!(matches!(builtin_surface::<f64>(BuiltinSurface::SteepCap { c: 0.0, l: 1.0 }), Err(Error::BadParameter(_))));
        assert!(matches!(builtin_surface::<f64>(BuiltinSurface::Apple { pinch: 0.9 }), Err(Error::BadParameter(_))));
        assert!(matches!(builtin_surface::<f64>(BuiltinSurface::BulbCap { l: 0.5 }), Err(Error::BadParameter(_))));
    }

    #[test]
    fn profile_from_alpha_sphere() {
        let p = build_profile_from_alpha(|s: f64| s.sin(), PI).unwrap();
        for i in 1..100 {
            let s = PI * i as f64 / 100.0;
            assert!((p.d_alpha(s) - s.cos()).abs() < 1e-9);
            assert!((p.dd_alpha(s) + s.sin()).abs() < 1e-7);
            assert!((p.beta(s) - (1.0 - s.cos())).abs() < 1e-8);
        }
        let sphere = Surface::closed(p).unwrap();
        for s in [0.0, 0.3, PI / 2.0, 3.0, PI] {
            assert!((sphere.gauss_curvature(s) - 1.0).abs() < 1e-6, "K({s})");
        }
    }

    #[test]
    fn profile_from_alpha_validates_slope() {
        // alpha = s(1 - s^2/8): alpha' = 1 - 3s^2/8, dense scan gives max |alpha'| = 1 on [0, 2]
        let max_slope = (0..=20_000)
            .map(|i| {
                let s = 2.0 * i as f64 / 20_000.0;
                (1.0 - 3.0 * s * s / 8.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_slope <= 1.0);
        let p = build_profile_from_alpha(|s: f64| s * (1.0 - s * s / 8.0), 2.0).unwrap();
        assert!(Surface::boundary_cap(p).is_ok());

        let err = build_profile_from_alpha(|s: f64| s * (1.0 + s * s), 1.0).unwrap_err();
        assert!(matches!(err, Error::SlopeExceedsOne { .. }));
        let err = build_profile_from_alpha(|s: f64| (2.0 * s).sin() / 2.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::NegativeRadius { .. }));
    }

    #[test]
    fn cone_band_has_zero_curvature() {
        // alpha'' is a C^1 bump on [0.2, 0.5], so alpha' = 1/2 exactly beyond 0.5
        let ramp = |t: f64| match t {
            t if t <= 0.0 => 0.0,
            t if t >= 1.0 => 0.5 + (t - 1.0),
            t => t.powi(6) - 3.0 * t.powi(5) + 2.5 * t.powi(4),
        };
        let p = build_profile_from_alpha(move |s: f64| s - 0.5 * 0.3 * ramp((s - 0.2) / 0.3), 1.2).unwrap();
        let surf = Surface::boundary_cap(p).unwrap();
        for s in [0.8, 0.9, 1.0] {
            assert!((surf.profile().d_alpha(s) - 0.5).abs() < 1e-10);
            assert!(surf.gauss_curvature(s).abs() < 1e-6);
        }
    }

    #[test]
    fn single_precision_sphere() {
        let sphere: Surface<f32> = BuiltinSurface::Sphere.build().unwrap();
        assert!((sphere.gauss_curvature(1.0f32) - 1.0).abs() < 1e-5);
        assert!((sphere.area() - 4.0 * std::f32::consts::PI).abs() < 1e-4);
    }
}
