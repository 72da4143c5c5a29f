//! Order-parameter fields on the `(s, θ)` grid of a surface of revolution:
//! vortex initial data, boundary degree, and the discrete Jacobian.
//!
//! Storage is row-major over `j = 0..=N_s` (with `s_j = j Δs`) and
//! `k = 0..N_θ` (with `θ_k = k Δθ`, periodic). Row 0 is the pole and holds one
//! value repeated `N_θ` times.

use std::io::{Read, Write};

use num_complex::Complex;
use rayon::prelude::*;

use crate::conformal::ConformalChart;
use crate::error::{Error, Result};
use crate::geometry::{Surface, SurfaceKind};
use crate::numeric::{gauss_legendre, hermite, Real};
use crate::renorm::VortexConfiguration;

/// Width of the boundary collar over which initial data is blended to `e`,
/// as a fraction of `l`.
pub const BLEND_FRACTION: f64 = 0.1;
/// Minimum vortex standoff from the boundary and from each other, in core radii.
pub const STANDOFF_CORES: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    pub n_s: usize,
    pub n_theta: usize,
    pub length: T,
}

impl<T: Real> Grid<T> {
    pub fn new(length: T, n_s: usize, n_theta: usize) -> Result<Self> {
        if n_s < 4 || n_theta < 4 {
            return Err(Error::BadParameter(format!("grid {n_s} x {n_theta} is too small")));
        }
        if !(length > T::zero()) {
            return Err(Error::BadParameter("grid length must be positive".into()));
        }
        Ok(Self { n_s, n_theta, length })
    }

    pub fn ds(&self) -> T {
        self.length / T::from_usize_lossy(self.n_s)
    }

    pub fn dtheta(&self) -> T {
        T::lit(2.0) * T::PI() / T::from_usize_lossy(self.n_theta)
    }

    pub fn s(&self, j: usize) -> T {
        self.ds() * T::from_usize_lossy(j)
    }

    pub fn theta(&self, k: usize) -> T {
        self.dtheta() * T::from_usize_lossy(k)
    }

    pub fn rows(&self) -> usize {
        self.n_s + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_theta + k % self.n_theta
    }
}

/// Complex order parameter on a [`Grid`] at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState<T> {
    pub grid: Grid<T>,
    pub values: Vec<Complex<T>>,
    pub time: T,
    pub epsilon: T,
}

impl<T: Real> FieldState<T> {
    pub fn new(grid: Grid<T>, values: Vec<Complex<T>>, time: T, epsilon: T) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!("{} values for a grid of {}", values.len(), grid.len())));
        }
        Ok(Self { grid, values, time, epsilon })
    }

    pub fn constant(grid: Grid<T>, value: Complex<T>) -> Self {
        Self { grid, values: vec![value; grid.len()], time: T::zero(), epsilon: T::one() }
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> Complex<T> {
        self.values[self.grid.index(j, k)]
    }

    pub fn row(&self, j: usize) -> &[Complex<T>] {
        let n = self.grid.n_theta;
        &self.values[j * n..(j + 1) * n]
    }

    pub fn min_modulus(&self) -> T {
        self.values.iter().map(|u| u.norm()).fold(T::infinity(), T::min)
    }

    pub fn sup_distance_to(&self, e: Complex<T>) -> T {
        self.values.iter().map(|u| (u - e).norm()).fold(T::zero(), T::max)
    }

    /// Little-endian block: `u64 N_s`, `u64 N_θ`, `f64 time`, `f64 ε`, then
    /// `(N_s + 1) N_θ` pairs `(Re u, Im u)` as `f64`, row-major.
    pub fn write_binary(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(&(self.grid.n_s as u64).to_le_bytes())?;
        out.write_all(&(self.grid.n_theta as u64).to_le_bytes())?;
        out.write_all(&self.time.to_f64_lossy().to_le_bytes())?;
        out.write_all(&self.epsilon.to_f64_lossy().to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for u in &self.values {
            buf.extend_from_slice(&u.re.to_f64_lossy().to_le_bytes());
            buf.extend_from_slice(&u.im.to_f64_lossy().to_le_bytes());
        }
        out.write_all(&buf)
    }

    /// Reads the block written by [`FieldState::write_binary`]; the grid
    /// length is not stored and must be supplied.
    pub fn read_binary(mut input: impl Read, length: T) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut word = [0u8; 8];
        let mut next = |input: &mut dyn Read| -> Result<[u8; 8]> {
            input.read_exact(&mut word).map_err(io)?;
            Ok(word)
        };
        let n_s = u64::from_le_bytes(next(&mut input)?) as usize;
        let n_theta = u64::from_le_bytes(next(&mut input)?) as usize;
        let time = f64::from_le_bytes(next(&mut input)?);
        let epsilon = f64::from_le_bytes(next(&mut input)?);
        let grid = Grid::new(length, n_s, n_theta)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(next(&mut input)?);
            let im = f64::from_le_bytes(next(&mut input)?);
            values.push(Complex::new(T::lit(re), T::lit(im)));
        }
        Self::new(grid, values, T::lit(time), T::lit(epsilon))
    }

    /// CSV with columns `s,theta,re,im`, one line per node.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "s,theta,re,im")?;
        for j in 0..self.grid.rows() {
            for k in 0..self.grid.n_theta {
                let u = self.get(j, k);
                writeln!(out, "{},{},{},{}", self.grid.s(j), self.grid.theta(k), u.re, u.im)?;
            }
        }
        Ok(())
    }
}

/// Conformal map of a neighborhood of `(s, θ)` into the plane, used to build
/// phases from planar formulas.
pub trait PlaneMap<T: Real>: Sync {
    /// `None` for the point at infinity.
    fn to_plane(&self, s: T, theta: T) -> Option<[T; 2]>;
}

impl<T: Real> PlaneMap<T> for ConformalChart<T> {
    fn to_plane(&self, s: T, theta: T) -> Option<[T; 2]> {
        self.chart_coords(s, theta).ok()
    }
}

/// Conformal map of a cap onto the unit disk: `s = 0` to the origin, the
/// boundary circle to `|x| = 1`, with `d ln ρ / ds = 1/α`:
/// `ln ρ(s) = ln s + L(s) - ln l - L(l)`, `L(s) = ∫_0^s (1/α - 1/σ) dσ`.
#[derive(Clone, Debug)]
pub struct CapMap<T> {
    length: T,
    h: T,
    l_values: Vec<T>,
    l_slopes: Vec<T>,
}

impl<T: Real> CapMap<T> {
    const CELLS: usize = 4096;

    pub fn new(surface: &Surface<T>) -> Result<Self> {
        if surface.kind() != SurfaceKind::BoundaryCap {
            return Err(Error::WrongSurfaceKind("cap map needs a boundary cap".into()));
        }
        let profile = surface.profile();
        let l = surface.length();
        let a3 = profile.jet(T::zero())[3] / T::lit(6.0);
        // 1/α - 1/σ → -a3 σ at the pole; the series avoids the cancellation
        let g = |x: T| {
            if x < T::lit(1e-3) * l {
                -a3 * x
            } else {
                T::one() / profile.alpha(x) - T::one() / x
            }
        };
        let rule = gauss_legendre(8);
        let h = l / T::from_usize_lossy(Self::CELLS);
        let half = h / T::lit(2.0);
        let mut l_values = vec![T::zero()];
        let mut l_slopes = vec![g(T::zero())];
        let mut acc = T::zero();
        for k in 0..Self::CELLS {
            let mid = h * (T::from_usize_lossy(k) + T::lit(0.5));
            let cell: T = rule.iter().map(|&(x, w)| T::lit(w) * g(mid + half * T::lit(x))).sum();
            acc = acc + cell * half;
            l_values.push(acc);
            l_slopes.push(g(h * T::from_usize_lossy(k + 1)));
        }
        Ok(Self { length: l, h, l_values, l_slopes })
    }

    fn big_l(&self, s: T) -> T {
        let n = self.l_values.len() - 1;
        let x = (s / self.h).max(T::zero());
        let k = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = x - T::from_usize_lossy(k);
        hermite(self.l_values[k], self.l_slopes[k], self.l_values[k + 1], self.l_slopes[k + 1], self.h, t).0
    }

    /// Planar radius `ρ(s)`.
    pub fn radius(&self, s: T) -> T {
        if s <= T::zero() {
            return T::zero();
        }
        let s = s.min(self.length);
        let l = self.length;
        (s.ln() + self.big_l(s) - l.ln() - self.big_l(l)).exp()
    }
}

impl<T: Real> PlaneMap<T> for CapMap<T> {
    fn to_plane(&self, s: T, theta: T) -> Option<[T; 2]> {
        let r = self.radius(s);
        Some([r * theta.cos(), r * theta.sin()])
    }
}

/// `Π ((x - b_i)/|x - b_i|)^{d_i}` (harmonic phase `ψ ≡ 0`).
pub fn canonical_phase<T: Real>(config: &VortexConfiguration<T>, x: [T; 2]) -> Result<Complex<T>> {
    let mut u = Complex::new(T::one(), T::zero());
    for (i, (b, &d)) in config.points().iter().zip(config.degrees()).enumerate() {
        let z = Complex::new(x[0] - b[0], x[1] - b[1]);
        let n = z.norm();
        if n == T::zero() {
            return Err(Error::AtVortexCenter { index: i });
        }
        u = u * (z / n).powi(d as i32);
    }
    Ok(u)
}

/// A vortex prescribed at a surface point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VortexSpec<T> {
    pub s: T,
    pub theta: T,
    pub degree: i64,
}

/// Default core radius `ε min(1, l/10)`.
pub fn default_core_radius<T: Real>(surface: &Surface<T>, epsilon: T) -> T {
    epsilon * T::one().min(surface.length() / T::lit(10.0))
}

fn quintic_step<T: Real>(t: T) -> T {
    let t = t.max(T::zero()).min(T::one());
    t * t * t * (T::lit(10.0) + t * (T::lit(-15.0) + T::lit(6.0) * t))
}

fn chord<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Vortex initial data: modulus `Π tanh(|x - p_i|/core)` (distance of the
/// embedded points), canonical phase in the plane image, and for caps a
/// blend to `e = 1` over the collar `[l - 0.1 l, l]` with a quintic cutoff,
/// using the continuous lift `Σ d_i Arg(1 - b_i/x)` of the phase there.
pub fn make_initial_data<T: Real>(
    surface: &Surface<T>,
    map: &dyn PlaneMap<T>,
    vortices: &[VortexSpec<T>],
    core_radius: T,
    grid: &Grid<T>,
) -> Result<FieldState<T>> {
    let l = surface.length();
    if (grid.length - l).abs() > T::epsilon() * T::lit(16.0) * l {
        return Err(Error::BadParameter("grid length differs from the surface length".into()));
    }
    if !(core_radius > T::zero()) {
        return Err(Error::BadParameter("core radius must be positive".into()));
    }
    let total: i64 = vortices.iter().map(|v| v.degree).sum();
    if total != 0 {
        return Err(Error::DegreesDoNotCancel(total));
    }
    let cap = surface.kind() == SurfaceKind::BoundaryCap;
    let blend = T::lit(BLEND_FRACTION) * l;
    let standoff = T::lit(STANDOFF_CORES) * core_radius;
    let embedded: Vec<[T; 3]> = vortices.iter().map(|v| surface.embed(v.s, v.theta)).collect();
    for v in vortices {
        if !(v.s >= T::zero() && v.s <= l) {
            return Err(Error::ConfigurationInvalid(format!("vortex at s = {} outside [0, l]", v.s)));
        }
        if cap && !(l - v.s > standoff.max(blend)) {
            return Err(Error::VortexTooCloseToBoundary {
                s: v.s.to_f64_lossy(),
                standoff: standoff.max(blend).to_f64_lossy(),
            });
        }
    }
    for i in 0..vortices.len() {
        for j in (i + 1)..vortices.len() {
            if !(chord(embedded[i], embedded[j]) > standoff) {
                return Err(Error::ConfigurationInvalid(format!(
                    "vortices {i} and {j} are within {} of each other",
                    standoff
                )));
            }
        }
    }
    let mut points = Vec::with_capacity(vortices.len());
    for (i, v) in vortices.iter().enumerate() {
        points.push(map.to_plane(v.s, v.theta).ok_or_else(|| {
            Error::ConfigurationInvalid(format!("vortex {i} maps to the point at infinity of the chart"))
        })?);
    }
    let config = VortexConfiguration::new(points, vortices.iter().map(|v| v.degree).collect())?;

    let node = |j: usize, k: usize| -> Complex<T> {
        let (s, theta) = (grid.s(j), grid.theta(k));
        if cap && j == grid.n_s {
            return Complex::new(T::one(), T::zero());
        }
        let here = surface.embed(s, theta);
        let modulus = embedded.iter().fold(T::one(), |m, p| m * (chord(here, *p) / core_radius).tanh());
        if modulus == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        let x = match map.to_plane(s, theta) {
            Some(x) => x,
            None => return Complex::new(modulus, T::zero()),
        };
        let chi = if cap { quintic_step((s - (l - blend)) / blend) } else { T::zero() };
        if chi == T::zero() {
            let phase = canonical_phase(&config, x).unwrap_or(Complex::new(T::one(), T::zero()));
            return phase * modulus;
        }
        let xz = Complex::new(x[0], x[1]);
        let lift = config
            .points()
            .iter()
            .zip(config.degrees())
            .fold(T::zero(), |acc, (b, &d)| acc + T::lit(d as f64) * (Complex::new(T::one(), T::zero()) - Complex::new(b[0], b[1]) / xz).arg());
        let m = (T::one() - chi) * modulus + chi;
        Complex::from_polar(m, (T::one() - chi) * lift)
    };
    let n_theta = grid.n_theta;
    let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    values.par_chunks_mut(n_theta).enumerate().for_each(|(j, row)| {
        if j == 0 {
            let pole = node(0, 0);
            row.iter_mut().for_each(|u| *u = pole);
        } else {
            for (k, u) in row.iter_mut().enumerate() {
                *u = node(j, k);
            }
        }
    });
    FieldState::new(*grid, values, T::zero(), T::one())
}

/// Principal-branch phase increment from `a` to `b`.
#[inline]
pub(crate) fn phase_step<T: Real>(a: Complex<T>, b: Complex<T>) -> T {
    (a.conj() * b).arg()
}

/// Winding number of one grid row.
pub fn row_winding<T: Real>(state: &FieldState<T>, j: usize) -> Result<i64> {
    let row = state.row(j);
    if row.iter().any(|u| u.norm() < T::lit(1e-12)) {
        return Err(Error::ZeroOnLoop);
    }
    let n = row.len();
    let total: T = (0..n).map(|k| phase_step(row[k], row[(k + 1) % n])).sum();
    Ok((total / (T::lit(2.0) * T::PI())).round().to_i64().unwrap_or(0))
}

/// Winding number of `u` along the loop one row inside the boundary.
pub fn total_degree<T: Real>(state: &FieldState<T>) -> Result<i64> {
    row_winding(state, state.grid.n_s - 1)
}

/// Counterclockwise (in `(s, θ)`) node cycle of plaquette `(j, k)`; the row-0
/// plaquettes are triangles at the pole.
pub(crate) fn plaquette_nodes(grid: &Grid<impl Real>, j: usize, k: usize) -> ([(usize, usize); 4], usize) {
    let k1 = (k + 1) % grid.n_theta;
    if j == 0 {
        ([(0, 0), (1, k), (1, k1), (0, 0)], 3)
    } else {
        ([(j, k), (j + 1, k), (j + 1, k1), (j, k1)], 4)
    }
}

/// Discrete curl of the current `(iu, ∇u)`: per plaquette, the sum of
/// `Im(conj(u_a) u_b)` around its boundary. Index `j N_θ + k`, `j < N_s`.
pub fn jacobian_field<T: Real>(state: &FieldState<T>) -> Vec<T> {
    let grid = state.grid;
    let mut out = vec![T::zero(); grid.n_s * grid.n_theta];
    out.par_chunks_mut(grid.n_theta).enumerate().for_each(|(j, row)| {
        for (k, cell) in row.iter_mut().enumerate() {
            let (nodes, m) = plaquette_nodes(&grid, j, k);
            let mut acc = T::zero();
            for e in 0..m {
                let a = state.get(nodes[e].0, nodes[e].1);
                let b = state.get(nodes[(e + 1) % m].0, nodes[(e + 1) % m].1);
                acc = acc + (a.conj() * b).im;
            }
            *cell = acc;
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinSurface;
    use std::f64::consts::PI;

    fn cap() -> Surface<f64> {
        BuiltinSurface::SphericalCap { l: 1.2 }.build().unwrap()
    }

    fn dipole_data(n_s: usize, n_theta: usize) -> FieldState<f64> {
        let surface = cap();
        let map = CapMap::new(&surface).unwrap();
        let grid = Grid::new(1.2, n_s, n_theta).unwrap();
        let v = [
            VortexSpec { s: 0.5, theta: 0.0, degree: 1 },
            VortexSpec { s: 0.5, theta: PI, degree: -1 },
        ];
        make_initial_data(&surface, &map, &v, default_core_radius(&surface, 1.0), &grid).unwrap()
    }

    #[test]
    fn cap_map_of_spherical_cap_is_stereographic() {
        // for α = sin s: ln ρ = ln tan(s/2) - ln tan(l/2)
        let map = CapMap::new(&cap()).unwrap();
        for s in [0.01, 0.3, 0.8, 1.2] {
            let want = (s / 2.0f64).tan() / (0.6f64).tan();
            assert!((map.radius(s) - want).abs() < 1e-12, "s = {s}");
        }
        assert_eq!(map.radius(0.0), 0.0);
    }

    #[test]
    fn canonical_phase_examples() {
        let config = VortexConfiguration::new(vec![[1.0, 0.0], [-1.0, 0.0]], vec![1, -1]).unwrap();
        // direct complex arithmetic: ((x - b1)/|.|) / ((x - b2)/|.|) at x = i
        let x = Complex::new(0.0, 1.0);
        let want = ((x - 1.0) / (x - 1.0).norm()) / ((x + 1.0) / (x + 1.0).norm());
        let got: Complex<f64> = canonical_phase(&config, [0.0, 1.0]).unwrap();
        assert!((got - want).norm() < 1e-15);
        assert!((got.norm() - 1.0).abs() < 1e-15);
        let far = canonical_phase(&config, [1e8, 0.0]).unwrap();
        assert!((far - 1.0).norm() < 1e-7);
        assert!(matches!(canonical_phase(&config, [1.0, 0.0]), Err(Error::AtVortexCenter { index: 0 })));
        // winding around b_1 from 256 samples
        let mut total = 0.0;
        let mut prev = canonical_phase(&config, [1.1, 0.0]).unwrap();
        for i in 1..=256 {
            let t = 2.0 * PI * i as f64 / 256.0;
            let next = canonical_phase(&config, [1.0 + 0.1 * t.cos(), 0.1 * t.sin()]).unwrap();
            total += phase_step(prev, next);
            prev = next;
        }
        assert!((total - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn empty_configuration_is_constant() {
        let surface = cap();
        let map = CapMap::new(&surface).unwrap();
        let grid = Grid::new(1.2, 16, 32).unwrap();
        let u = make_initial_data(&surface, &map, &[], 0.12, &grid).unwrap();
        assert!(u.values.iter().all(|&z| z == Complex::new(1.0, 0.0)));
        assert_eq!(total_degree(&u).unwrap(), 0);
        assert!(jacobian_field(&u).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn dipole_data_invariants() {
        let u = dipole_data(64, 128);
        let grid = u.grid;
        assert!(u.row(grid.n_s).iter().all(|&z| z == Complex::new(1.0, 0.0)));
        assert!(u.row(0).iter().all(|&z| z == u.get(0, 0)));
        assert_eq!(total_degree(&u).unwrap(), 0);
        let total: f64 = jacobian_field(&u).iter().sum();
        assert!(total.abs() < 1e-8);
    }

    #[test]
    fn modulus_tail_bound() {
        // beyond 5 cores every factor is at least tanh 5
        let surface = cap();
        let u = dipole_data(64, 128);
        let core = default_core_radius(&surface, 1.0);
        let p = [surface.embed(0.5, 0.0), surface.embed(0.5, PI)];
        let bound = 5f64.tanh().powi(2);
        for j in 0..u.grid.rows() {
            for k in 0..u.grid.n_theta {
                let x = surface.embed(u.grid.s(j), u.grid.theta(k));
                if p.iter().all(|q| chord(x, *q) > 5.0 * core) {
                    assert!(u.get(j, k).norm() >= bound - 1e-15);
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        let surface = cap();
        let map = CapMap::new(&surface).unwrap();
        let grid = Grid::new(1.2, 16, 32).unwrap();
        let near_edge = [
            VortexSpec { s: 1.15, theta: 0.0, degree: 1 },
            VortexSpec { s: 0.5, theta: PI, degree: -1 },
        ];
        assert!(matches!(
            make_initial_data(&surface, &map, &near_edge, 0.12, &grid),
            Err(Error::VortexTooCloseToBoundary { .. })
        ));
        let unbalanced = [VortexSpec { s: 0.5, theta: 0.0, degree: 1 }];
        assert!(matches!(
            make_initial_data(&surface, &map, &unbalanced, 0.12, &grid),
            Err(Error::DegreesDoNotCancel(1))
        ));
    }

    #[test]
    fn single_vortex_winding() {
        // relaxed-boundary test field u = x/|x| around the pole
        let grid = Grid::new(1.0, 8, 32).unwrap();
        let mut values = Vec::new();
        for j in 0..grid.rows() {
            for k in 0..grid.n_theta {
                values.push(if j == 0 { Complex::new(0.0, 0.0) } else { Complex::from_polar(1.0, grid.theta(k)) });
            }
        }
        let u = FieldState::new(grid, values, 0.0, 1.0).unwrap();
        assert_eq!(total_degree(&u).unwrap(), 1);
    }

    #[test]
    fn binary_round_trip() {
        let u = dipole_data(16, 32);
        let mut buf = Vec::new();
        u.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * u.values.len());
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 16);
        let back = FieldState::read_binary(&buf[..], 1.2).unwrap();
        assert_eq!(back, u);
        let mut csv = Vec::new();
        u.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + u.values.len());
    }
}
