//! Ginzburg-Landau heat flow `u_t = Δ_M u + ε⁻²(1 - |u|²)u` on a cap with
//! Dirichlet data on the boundary circle.
//!
//! The discretization is variational. The discrete energy is a sum over grid
//! edges and node masses:
//!
//! * radial edge `(j, k)–(j+1, k)`: weight `Δθ α(s_{j+½}) / Δs`,
//! * angular edge `(j, k)–(j, k+1)`: weight `M_j / (α_j Δθ)²`,
//! * node mass `M_j = Δθ (H(s_{j+½}) - H(s_{j-½}))`, pole mass `2π H(Δs/2)`,
//!   boundary half cell,
//!
//! and `u_t = -M⁻¹ ∇E` in flux form. Near the pole the rings are short and the
//! angular stiffness `4 sin²(mΔθ/2)/(α_j Δθ)²` of high Fourier modes would
//! force a tiny explicit step. Those modes are removed ring by ring: the
//! filter is an `M`-orthogonal projection `P`, the state is kept in its
//! range, and `u_t = P(-M⁻¹∇E)` still satisfies `dE/dt = -Σ M |u_t|²`
//! exactly. The stable step is then `O(Δs²)`.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fields::{phase_step, plaquette_nodes, row_winding, FieldState, Grid};
use crate::geometry::{Surface, SurfaceKind};
use crate::numeric::Real;

pub const DEFAULT_CFL_SAFETY: f64 = 0.2;
pub const MAX_CFL_SAFETY: f64 = 0.5;
pub const DEFAULT_M_THR: f64 = 0.5;
pub const DEFAULT_STEADY_TOL: f64 = 1e-4;
pub const DEFAULT_CHECKPOINT_INTERVAL: f64 = 0.5;
pub const DEFAULT_TRACK_INTERVAL: f64 = 1e-3;
pub const DEFAULT_TOL_E_REL: f64 = 1e-6;

/// Solver parameters. Numeric defaults are the `DEFAULT_*` constants.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig<T> {
    pub n_s: usize,
    pub n_theta: usize,
    pub epsilon: T,
    pub cfl_safety: T,
    pub t_max: T,
    pub checkpoint_interval: T,
    /// Cadence of vortex detection and the convergence test.
    pub track_interval: T,
    pub m_thr: T,
    pub steady_tol: T,
    /// `tol_E = tol_e_rel (1 + E(0))`.
    pub tol_e_rel: T,
}

impl<T: Real> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            n_s: 128,
            n_theta: 256,
            epsilon: T::one(),
            cfl_safety: T::lit(DEFAULT_CFL_SAFETY),
            t_max: T::lit(20.0),
            checkpoint_interval: T::lit(DEFAULT_CHECKPOINT_INTERVAL),
            track_interval: T::lit(DEFAULT_TRACK_INTERVAL),
            m_thr: T::lit(DEFAULT_M_THR),
            steady_tol: T::lit(DEFAULT_STEADY_TOL),
            tol_e_rel: T::lit(DEFAULT_TOL_E_REL),
        }
    }
}

/// Discrete operators of one surface and grid.
#[derive(Clone)]
pub struct FlowOperator<T: Real> {
    grid: Grid<T>,
    epsilon: T,
    /// Radial edge weights, `j = 0..N_s`.
    w_rad: Vec<T>,
    /// Angular edge weights per row (`0` on the pole row).
    w_ang: Vec<T>,
    mass: Vec<T>,
    /// `H(s_j)` and `H(s_{j+½})`.
    h_node: Vec<T>,
    h_edge: Vec<T>,
    /// `Δ_M H = 2α'(s_j)`.
    lap_h: Vec<T>,
    /// Largest retained `|m|` per row, `None` when the row is not filtered.
    cutoff: Vec<Option<usize>>,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for FlowOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowOperator").field("grid", &self.grid).field("epsilon", &self.epsilon).finish()
    }
}

#[inline]
fn potential<T: Real>(u: Complex<T>) -> T {
    let d = T::one() - u.norm_sqr();
    d * d / T::lit(4.0)
}

impl<T: Real> FlowOperator<T> {
    pub fn new(surface: &Surface<T>, n_s: usize, n_theta: usize, epsilon: T) -> Result<Self> {
        if surface.kind() != SurfaceKind::BoundaryCap {
            return Err(Error::WrongSurfaceKind("the heat flow runs on boundary caps".into()));
        }
        if !(epsilon > T::zero()) {
            return Err(Error::BadParameter("epsilon must be positive".into()));
        }
        let grid = Grid::new(surface.length(), n_s, n_theta)?;
        let p = surface.profile();
        let (ds, dth) = (grid.ds(), grid.dtheta());
        let half = ds / T::lit(2.0);
        let l = grid.length;
        let w_rad = (0..n_s).map(|j| dth * p.alpha(grid.s(j) + half) / ds).collect();
        let h_node: Vec<T> = (0..=n_s).map(|j| p.area_integral(grid.s(j))).collect();
        let h_edge = (0..n_s).map(|j| p.area_integral(grid.s(j) + half)).collect();
        let two_pi = T::lit(2.0) * T::PI();
        let mut mass = Vec::with_capacity(n_s + 1);
        mass.push(two_pi * p.area_integral(half));
        for j in 1..n_s {
            mass.push(dth * (p.area_integral(grid.s(j) + half) - p.area_integral(grid.s(j) - half)));
        }
        mass.push(dth * (p.area_integral(l) - p.area_integral(l - half)));
        let mut w_ang = vec![T::zero(); n_s + 1];
        let mut cutoff = vec![None; n_s + 1];
        let radial_stiffness = T::lit(4.0) / (ds * ds);
        for j in 1..=n_s {
            let a = p.alpha(grid.s(j));
            w_ang[j] = mass[j] / (a * dth).powi(2);
            if j < n_s {
                let mut keep = n_theta / 2;
                while keep > 0 {
                    let sn = (T::from_usize_lossy(keep) * dth / T::lit(2.0)).sin();
                    if T::lit(4.0) * sn * sn / (a * dth).powi(2) <= radial_stiffness {
                        break;
                    }
                    keep -= 1;
                }
                if keep < n_theta / 2 {
                    cutoff[j] = Some(keep);
                }
            }
        }
        let lap_h = (0..=n_s).map(|j| T::lit(2.0) * p.d_alpha(grid.s(j))).collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_theta);
        let ifft = planner.plan_fft_inverse(n_theta);
        Ok(Self { grid, epsilon, w_rad, w_ang, mass, h_node, h_edge, lap_h, cutoff, fft, ifft })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Node masses per row (the pole entry is the whole pole cell).
    pub fn masses(&self) -> &[T] {
        &self.mass
    }

    /// Largest step accepted by [`FlowOperator::step`]:
    /// `0.5 min(Δs²/4, ε²)`.
    pub fn max_dt(&self) -> T {
        let ds = self.grid.ds();
        T::lit(MAX_CFL_SAFETY) * (ds * ds / T::lit(4.0)).min(self.epsilon * self.epsilon)
    }

    /// Step used by `run` for a safety factor in `(0, 0.5]`.
    pub fn stable_dt(&self, safety: T) -> T {
        self.max_dt() * safety / T::lit(MAX_CFL_SAFETY)
    }

    fn inv_eps2(&self) -> T {
        T::one() / (self.epsilon * self.epsilon)
    }

    /// Discrete energy `E(u)`.
    pub fn energy(&self, u: &[Complex<T>]) -> T {
        self.weighted(u, false)
    }

    /// `H`-weighted energy `∫ H (|∇u|²/2 + V)`.
    pub fn weighted_energy(&self, u: &[Complex<T>]) -> T {
        self.weighted(u, true)
    }

    fn weighted(&self, u: &[Complex<T>], with_h: bool) -> T {
        let g = &self.grid;
        let n = g.n_theta;
        let half = T::lit(0.5);
        let ie = self.inv_eps2();
        let rows: Vec<T> = (0..=g.n_s)
            .into_par_iter()
            .map(|j| {
                let row = &u[j * n..(j + 1) * n];
                let mut acc = T::zero();
                if j < g.n_s {
                    let next = &u[(j + 1) * n..(j + 2) * n];
                    let w = self.w_rad[j] * if with_h { self.h_edge[j] } else { T::one() };
                    let mut r = T::zero();
                    for k in 0..n {
                        r = r + (next[k] - row[k]).norm_sqr();
                    }
                    acc = acc + half * w * r;
                }
                let hn = if with_h { self.h_node[j] } else { T::one() };
                if j == 0 {
                    acc = acc + hn * self.mass[0] * potential(row[0]) * ie;
                } else {
                    let mut a = T::zero();
                    let mut v = T::zero();
                    for k in 0..n {
                        a = a + (row[(k + 1) % n] - row[k]).norm_sqr();
                        v = v + potential(row[k]);
                    }
                    acc = acc + hn * (half * self.w_ang[j] * a + self.mass[j] * v * ie);
                }
                acc
            })
            .collect();
        rows.into_iter().sum()
    }

    /// `-M⁻¹ ∇E` without the potential term: the flux-form Laplace-Beltrami
    /// operator. Zero on the boundary row.
    pub fn laplace_beltrami(&self, u: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); u.len()];
        self.force(u, &mut out, false);
        out
    }

    /// Unfiltered right-hand side `Δu + ε⁻²(1 - |u|²)u`, zero on the
    /// boundary row.
    fn force(&self, u: &[Complex<T>], out: &mut [Complex<T>], with_potential: bool) {
        let g = &self.grid;
        let n = g.n_theta;
        let ie = if with_potential { self.inv_eps2() } else { T::zero() };
        let zero = Complex::new(T::zero(), T::zero());
        out.par_chunks_mut(n).enumerate().for_each(|(j, o)| {
            if j == g.n_s {
                o.iter_mut().for_each(|x| *x = zero);
                return;
            }
            let row = &u[j * n..(j + 1) * n];
            let next = &u[(j + 1) * n..(j + 2) * n];
            if j == 0 {
                let u0 = row[0];
                let mut flux = zero;
                for v in next {
                    flux = flux + (v - u0);
                }
                let f = flux * (self.w_rad[0] / self.mass[0]) + u0 * ((T::one() - u0.norm_sqr()) * ie);
                o.iter_mut().for_each(|x| *x = f);
                return;
            }
            let prev = &u[(j - 1) * n..j * n];
            let inv_m = T::one() / self.mass[j];
            let (wo, wi, wa) = (self.w_rad[j] * inv_m, self.w_rad[j - 1] * inv_m, self.w_ang[j] * inv_m);
            for k in 0..n {
                let c = row[k];
                let left = row[if k == 0 { n - 1 } else { k - 1 }];
                let right = row[if k + 1 == n { 0 } else { k + 1 }];
                let lap = (next[k] - c) * wo + (prev[k] - c) * wi + (left + right - c - c) * wa;
                o[k] = lap + c * ((T::one() - c.norm_sqr()) * ie);
            }
        });
    }

    /// Applies the ring filter `P` in place.
    pub fn project(&self, u: &mut [Complex<T>]) {
        let n = self.grid.n_theta;
        let scale = T::one() / T::from_usize_lossy(n);
        let scratch_len = self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len());
        let zero = Complex::new(T::zero(), T::zero());
        u.par_chunks_mut(n).enumerate().for_each_init(|| vec![zero; scratch_len], |scratch, (j, row)| {
            if let Some(keep) = self.cutoff[j] {
                self.fft.process_with_scratch(row, scratch);
                for (k, c) in row.iter_mut().enumerate() {
                    let m = if k <= n / 2 { k } else { n - k };
                    *c = if m <= keep { *c * scale } else { zero };
                }
                self.ifft.process_with_scratch(row, scratch);
            }
        });
    }

    /// Filtered right-hand side `P(Δu + ε⁻²(1 - |u|²)u)`.
    pub fn rhs(&self, u: &[Complex<T>], out: &mut [Complex<T>]) {
        self.force(u, out, true);
        self.project(out);
    }

    /// Sup norm of the filtered discrete elliptic residual over the nodes that
    /// evolve (all but the Dirichlet row).
    pub fn steady_state_residual(&self, u: &[Complex<T>]) -> T {
        let mut out = vec![Complex::new(T::zero(), T::zero()); u.len()];
        self.rhs(u, &mut out);
        out.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// One explicit midpoint step. Returns the per-step ledger increments.
    pub fn step(&self, state: &mut FieldState<T>, dt: T, work: &mut StepWork<T>) -> Result<StepLedger<T>> {
        if !(dt > T::zero()) || dt > self.max_dt() {
            return Err(Error::CflViolated { dt: dt.to_f64_lossy(), bound: self.max_dt().to_f64_lossy() });
        }
        let len = state.values.len();
        let n = self.grid.n_theta;
        work.k.resize(len, Complex::new(T::zero(), T::zero()));
        work.k1.resize(len, Complex::new(T::zero(), T::zero()));
        work.mid.resize(len, Complex::new(T::zero(), T::zero()));
        self.rhs(&state.values, &mut work.k1);
        let half = dt / T::lit(2.0);
        work.mid.par_chunks_mut(n).zip(state.values.par_chunks(n).zip(work.k1.par_chunks(n))).for_each(|(m, (u, k))| {
            for i in 0..n {
                m[i] = u[i] + k[i] * half;
            }
        });
        self.rhs(&work.mid, &mut work.k);
        let sums: Vec<(T, T, T, T)> = state
            .values
            .par_chunks_mut(n)
            .zip(work.k.par_chunks(n).zip(work.mid.par_chunks(n).zip(work.k1.par_chunks(n))))
            .enumerate()
            .map(|(j, (row, (k, (mid, k1))))| {
                let mut kin = T::zero();
                let mut pot = T::zero();
                let count = if j == 0 { 1 } else { n };
                for i in 0..n {
                    row[i] = row[i] + k[i] * dt;
                }
                for i in 0..count {
                    kin = kin + k[i].norm_sqr() + (k[i] - k1[i]).norm_sqr();
                    pot = pot + potential(mid[i]);
                }
                let m = self.mass[j];
                let ie = self.inv_eps2();
                (m * kin, m * self.h_node[j] * kin, m * self.lap_h[j] * pot * ie, m * pot * ie)
            })
            .collect();
        let mut ledger = StepLedger { dissipation: T::zero(), weighted_dissipation: T::zero(), weighted_potential: T::zero(), potential: T::zero() };
        for (a, b, c, d) in sums {
            ledger.dissipation = ledger.dissipation + a * dt;
            ledger.weighted_dissipation = ledger.weighted_dissipation + b * dt;
            ledger.weighted_potential = ledger.weighted_potential + c * dt;
            ledger.potential = ledger.potential + d * dt;
        }
        if !ledger.dissipation.is_finite() {
            let bad = state.values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())).unwrap_or(0);
            return Err(Error::NonFinite { row: bad / n, col: bad % n });
        }
        state.time = state.time + dt;
        Ok(ledger)
    }

    /// `(H(s_j), Δ_M H(s_j) = 2α'(s_j))` per grid row.
    pub fn h_weight(&self) -> (Vec<T>, Vec<T>) {
        (self.h_node.clone(), self.lap_h.clone())
    }
}

/// Scratch buffers reused across steps.
#[derive(Clone, Debug, Default)]
pub struct StepWork<T> {
    k: Vec<Complex<T>>,
    k1: Vec<Complex<T>>,
    mid: Vec<Complex<T>>,
}

/// Time integrals accumulated over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLedger<T> {
    /// `dt Σ M |u_t|²`.
    pub dissipation: T,
    /// `dt Σ M H |u_t|²`.
    pub weighted_dissipation: T,
    /// `dt Σ M (Δ_M H) V`.
    pub weighted_potential: T,
    /// `dt Σ M V`.
    pub potential: T,
}

/// A vortex found on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectedVortex<T> {
    pub s: T,
    pub theta: T,
    pub degree: i64,
}

/// Flags plaquettes with nonzero phase winding and some nodal `|u| < m_thr`,
/// merges edge-adjacent flagged plaquettes, and reports each cluster with
/// nonzero total degree at its weighted centroid (weights `m_thr - min|u|`).
pub fn detect_vortices<T: Real>(state: &FieldState<T>, m_thr: T) -> Vec<DetectedVortex<T>> {
    let grid = state.grid;
    let (ns, nt) = (grid.n_s, grid.n_theta);
    let two_pi = T::lit(2.0) * T::PI();
    let flags: Vec<(i64, T)> = (0..ns * nt)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / nt, idx % nt);
            let (nodes, m) = plaquette_nodes(&grid, j, k);
            let mut min_mod = T::infinity();
            let mut wind = T::zero();
            for e in 0..m {
                let a = state.get(nodes[e].0, nodes[e].1);
                let b = state.get(nodes[(e + 1) % m].0, nodes[(e + 1) % m].1);
                min_mod = min_mod.min(a.norm());
                wind = wind + phase_step(a, b);
            }
            let w = (wind / two_pi).round().to_i64().unwrap_or(0);
            if w != 0 && min_mod < m_thr {
                (w, min_mod)
            } else {
                (0, min_mod)
            }
        })
        .collect();
    let mut seen = vec![false; ns * nt];
    let mut out = Vec::new();
    for start in 0..ns * nt {
        if flags[start].0 == 0 || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let (mut deg, mut wsum, mut ws, mut wc, mut wsn) = (0i64, T::zero(), T::zero(), T::zero(), T::zero());
        while let Some(idx) = stack.pop() {
            let (j, k) = (idx / nt, idx % nt);
            let (w, min_mod) = flags[idx];
            deg += w;
            let weight = (m_thr - min_mod).max(T::epsilon());
            let th = grid.theta(k) + grid.dtheta() / T::lit(2.0);
            let sc = if j == 0 { grid.ds() / T::lit(3.0) } else { grid.s(j) + grid.ds() / T::lit(2.0) };
            wsum = wsum + weight;
            ws = ws + weight * sc;
            wc = wc + weight * th.cos();
            wsn = wsn + weight * th.sin();
            let mut neighbors = vec![j * nt + (k + 1) % nt, j * nt + (k + nt - 1) % nt];
            if j + 1 < ns {
                neighbors.push((j + 1) * nt + k);
            }
            if j > 0 {
                neighbors.push((j - 1) * nt + k);
            }
            for nb in neighbors {
                if flags[nb].0 != 0 && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        if deg != 0 {
            let theta = wsn.atan2(wc);
            let theta = if theta < T::zero() { theta + two_pi } else { theta };
            out.push(DetectedVortex { s: ws / wsum, theta, degree: deg });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Appearance,
    Merge,
    Annihilation,
    BoundaryAbsorption,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Appearance => "appearance",
            Self::Merge => "merge",
            Self::Annihilation => "annihilation",
            Self::BoundaryAbsorption => "boundary_absorption",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowEvent<T> {
    pub t: T,
    pub kind: EventKind,
    pub s: T,
    pub theta: T,
    pub degree: i64,
}

/// One diagnostics row.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub t: T,
    pub energy: T,
    pub weighted_energy: T,
    pub cum_dissipation: T,
    /// `E_H(0) - [∫∫(H|u_t|² + (Δ_M H) V) + E_H(t)]`.
    pub pohozaev_slack: T,
    pub n_vortices: usize,
    pub vortices: Vec<DetectedVortex<T>>,
    pub min_modulus: T,
    pub sup_dist_to_e: T,
    pub residual: T,
    /// Winding of the row inside the boundary, when it has no zero.
    pub loop_degree: Option<i64>,
    pub loop_min_modulus: T,
    pub cum_potential: T,
    pub cum_weighted_potential: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    Timeout,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct FlowDiagnostics<T> {
    pub checkpoints: Vec<Checkpoint<T>>,
    pub events: Vec<FlowEvent<T>>,
    pub annihilation_time: Option<T>,
    pub status: FlowStatus,
    pub dt: T,
    pub steps: u64,
    pub tol_e: T,
    pub initial_energy: T,
    /// `|∫∫|u_t|² + E(T) - E(0)|`.
    pub energy_identity_defect: T,
    /// Largest `E(t_{k+1}) - E(t_k)` over consecutive checkpoints.
    pub max_energy_increase: T,
    pub min_pohozaev_slack: T,
    /// Boundary-loop degree and min modulus at every tracking time.
    pub loop_degrees: Vec<(T, Option<i64>, T)>,
    pub final_state: FieldState<T>,
}

/// Inequality report of the weighted dissipation ledger.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PohozaevReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub slack: T,
    pub min_slack: T,
    pub tol_e: T,
}

impl<T: Real> PohozaevReport<T> {
    pub fn holds(&self) -> bool {
        self.min_slack >= -self.tol_e
    }
}

/// Summary of the weighted dissipation ledger over a run.
pub fn pohozaev_ledger<T: Real>(diag: &FlowDiagnostics<T>) -> PohozaevReport<T> {
    let first = &diag.checkpoints[0];
    let last = diag.checkpoints.last().expect("at least one checkpoint");
    let rhs = first.weighted_energy;
    PohozaevReport {
        lhs: rhs - last.pohozaev_slack,
        rhs,
        slack: last.pohozaev_slack,
        min_slack: diag.min_pohozaev_slack,
        tol_e: diag.tol_e,
    }
}

fn chord<T: Real>(surface: &Surface<T>, a: &DetectedVortex<T>, b: &DetectedVortex<T>) -> T {
    let (p, q) = (surface.embed(a.s, a.theta), surface.embed(b.s, b.theta));
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Matches the vortex lists of two tracking times and emits events.
fn diff_events<T: Real>(
    surface: &Surface<T>,
    t: T,
    prev: &[DetectedVortex<T>],
    next: &[DetectedVortex<T>],
    absorb_band: T,
    out: &mut Vec<FlowEvent<T>>,
) {
    let l = surface.length();
    let mut prev_used = vec![false; prev.len()];
    let mut next_used = vec![false; next.len()];
    // nearest same-degree pairs first
    let mut pairs: Vec<(T, usize, usize)> = Vec::new();
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            if p.degree == q.degree {
                pairs.push((chord(surface, p, q), i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    for (_, i, j) in pairs {
        if !prev_used[i] && !next_used[j] {
            prev_used[i] = true;
            next_used[j] = true;
        }
    }
    let mut lost: Vec<usize> = (0..prev.len()).filter(|&i| !prev_used[i]).collect();
    for (j, q) in next.iter().enumerate() {
        if next_used[j] {
            continue;
        }
        // a new cluster absorbing lost vortices of matching total degree is a merge
        let near: Vec<usize> = {
            let mut v = lost.clone();
            v.sort_by(|&a, &b| {
                chord(surface, &prev[a], q).partial_cmp(&chord(surface, &prev[b], q)).unwrap_or(std::cmp::Ordering::Equal)
            });
            v
        };
        if near.len() >= 2 {
            let d: i64 = near[..2].iter().map(|&i| prev[i].degree).sum();
            if d == q.degree {
                lost.retain(|i| !near[..2].contains(i));
                out.push(FlowEvent { t, kind: EventKind::Merge, s: q.s, theta: q.theta, degree: q.degree });
                continue;
            }
        }
        out.push(FlowEvent { t, kind: EventKind::Appearance, s: q.s, theta: q.theta, degree: q.degree });
    }
    // remaining lost vortices: opposite-degree pairs annihilate, the rest leave through the boundary
    while !lost.is_empty() {
        let i = lost.remove(0);
        let p = prev[i];
        let partner = lost
            .iter()
            .enumerate()
            .filter(|(_, &k)| prev[k].degree == -p.degree)
            .min_by(|a, b| {
                chord(surface, &prev[*a.1], &p).partial_cmp(&chord(surface, &prev[*b.1], &p)).unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(pos, _)| pos);
        match partner {
            Some(pos) if l - p.s > absorb_band || l - prev[lost[pos]].s > absorb_band => {
                let q = prev[lost.remove(pos)];
                let (a, b) = (surface.embed(p.s, p.theta), surface.embed(q.s, q.theta));
                let theta = (a[1] + b[1]).atan2(a[0] + b[0]);
                let theta = if theta < T::zero() { theta + T::lit(2.0) * T::PI() } else { theta };
                out.push(FlowEvent {
                    t,
                    kind: EventKind::Annihilation,
                    s: (p.s + q.s) / T::lit(2.0),
                    theta,
                    degree: 0,
                });
            }
            _ => out.push(FlowEvent { t, kind: EventKind::BoundaryAbsorption, s: p.s, theta: p.theta, degree: p.degree }),
        }
    }
}

/// Integrates the flow from `initial` until convergence or `t_max`.
/// `observer` sees every checkpoint with the state at that time.
pub fn run<T: Real>(
    surface: &Surface<T>,
    config: &FlowConfig<T>,
    initial: &FieldState<T>,
    mut observer: impl FnMut(&Checkpoint<T>, &FieldState<T>),
) -> Result<FlowDiagnostics<T>> {
    if !(config.cfl_safety > T::zero() && config.cfl_safety <= T::lit(MAX_CFL_SAFETY)) {
        return Err(Error::BadParameter(format!("cfl_safety {} outside (0, 0.5]", config.cfl_safety)));
    }
    for (name, v) in [
        ("t_max", config.t_max),
        ("checkpoint_interval", config.checkpoint_interval),
        ("track_interval", config.track_interval),
        ("steady_tol", config.steady_tol),
        ("m_thr", config.m_thr),
    ] {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::BadParameter(format!("{name} must be positive and finite")));
        }
    }
    let op = FlowOperator::new(surface, config.n_s, config.n_theta, config.epsilon)?;
    if initial.grid != *op.grid() {
        return Err(Error::BadParameter("initial data grid does not match the flow grid".into()));
    }
    let e = initial.values[initial.values.len() - 1];
    let mut state = initial.clone();
    state.epsilon = config.epsilon;
    op.project(&mut state.values);
    let dt = op.stable_dt(config.cfl_safety);
    let e0 = op.energy(&state.values);
    let eh0 = op.weighted_energy(&state.values);
    let tol_e = config.tol_e_rel * (T::one() + e0);
    let absorb_band = T::lit(crate::fields::BLEND_FRACTION) * surface.length();
    let loop_row = config.n_s - 1;

    let mut work = StepWork::default();
    let mut totals = StepLedger { dissipation: T::zero(), weighted_dissipation: T::zero(), weighted_potential: T::zero(), potential: T::zero() };
    let mut checkpoints: Vec<Checkpoint<T>> = Vec::new();
    let mut events = Vec::new();
    let mut loop_degrees = Vec::new();
    let mut steps = 0u64;
    let mut vortices = detect_vortices(&state, config.m_thr);
    for v in &vortices {
        events.push(FlowEvent { t: T::zero(), kind: EventKind::Appearance, s: v.s, theta: v.theta, degree: v.degree });
    }
    let mut first_empty_after: Option<T> = if vortices.is_empty() { Some(T::zero()) } else { None };
    let mut min_slack = T::infinity();
    let mut max_increase = T::neg_infinity();

    let snapshot = |state: &FieldState<T>, totals: &StepLedger<T>, vortices: &[DetectedVortex<T>]| {
        let energy = op.energy(&state.values);
        let weighted = op.weighted_energy(&state.values);
        let row = state.row(loop_row);
        let loop_min = row.iter().map(|z| z.norm()).fold(T::infinity(), T::min);
        Checkpoint {
            t: state.time,
            energy,
            weighted_energy: weighted,
            cum_dissipation: totals.dissipation,
            pohozaev_slack: eh0 - (totals.weighted_dissipation + totals.weighted_potential + weighted),
            n_vortices: vortices.len(),
            vortices: vortices.to_vec(),
            min_modulus: state.min_modulus(),
            sup_dist_to_e: state.sup_distance_to(e),
            residual: op.steady_state_residual(&state.values),
            loop_degree: row_winding(state, loop_row).ok(),
            loop_min_modulus: loop_min,
            cum_potential: totals.potential,
            cum_weighted_potential: totals.weighted_potential,
        }
    };
    let mut record = |cp: Checkpoint<T>, state: &FieldState<T>, checkpoints: &mut Vec<Checkpoint<T>>| {
        if let Some(prev) = checkpoints.last() {
            max_increase = max_increase.max(cp.energy - prev.energy);
        }
        min_slack = min_slack.min(cp.pohozaev_slack);
        observer(&cp, state);
        checkpoints.push(cp);
    };

    let converged = |cp_res: T, sup: T, vortices: &[DetectedVortex<T>]| {
        vortices.is_empty() && sup < config.steady_tol && cp_res < config.steady_tol
    };
    let first = snapshot(&state, &totals, &vortices);
    loop_degrees.push((T::zero(), first.loop_degree, first.loop_min_modulus));
    let mut status = FlowStatus::Timeout;
    let done_at_start = converged(first.residual, first.sup_dist_to_e, &vortices);
    record(first, &state, &mut checkpoints);
    if done_at_start {
        status = FlowStatus::Converged;
    }

    let (mut n_track, mut n_checkpoint) = (1usize, 1usize);
    let mut next_track = config.track_interval;
    let mut next_checkpoint = config.checkpoint_interval;
    let tiny = dt * T::lit(1e-6);
    while status != FlowStatus::Converged && state.time < config.t_max - tiny {
        let stop = next_track.min(next_checkpoint).min(config.t_max);
        while state.time < stop - tiny {
            let h = dt.min(stop - state.time);
            let inc = op.step(&mut state, h, &mut work)?;
            steps += 1;
            totals.dissipation = totals.dissipation + inc.dissipation;
            totals.weighted_dissipation = totals.weighted_dissipation + inc.weighted_dissipation;
            totals.weighted_potential = totals.weighted_potential + inc.weighted_potential;
            totals.potential = totals.potential + inc.potential;
        }
        state.time = stop;
        let at_track = stop >= next_track - tiny;
        let at_checkpoint = stop >= next_checkpoint - tiny || stop >= config.t_max - tiny;
        if at_track {
            n_track += 1;
            next_track = T::from_usize_lossy(n_track) * config.track_interval;
            let found = detect_vortices(&state, config.m_thr);
            diff_events(surface, stop, &vortices, &found, absorb_band, &mut events);
            vortices = found;
            if vortices.is_empty() {
                if first_empty_after.is_none() {
                    first_empty_after = Some(stop);
                }
            } else {
                first_empty_after = None;
            }
            let row = state.row(loop_row);
            let loop_min = row.iter().map(|z| z.norm()).fold(T::infinity(), T::min);
            loop_degrees.push((stop, row_winding(&state, loop_row).ok(), loop_min));
        }
        let converged_now = at_track && vortices.is_empty() && {
            let sup = state.sup_distance_to(e);
            sup < config.steady_tol && converged(op.steady_state_residual(&state.values), sup, &vortices)
        };
        if at_checkpoint || converged_now {
            if at_checkpoint {
                n_checkpoint += 1;
                next_checkpoint = T::from_usize_lossy(n_checkpoint) * config.checkpoint_interval;
            }
            let cp = snapshot(&state, &totals, &vortices);
            record(cp, &state, &mut checkpoints);
        }
        if converged_now {
            status = FlowStatus::Converged;
        }
    }
    let final_energy = op.energy(&state.values);
    Ok(FlowDiagnostics {
        annihilation_time: if vortices.is_empty() { first_empty_after } else { None },
        checkpoints,
        events,
        status,
        dt,
        steps,
        tol_e,
        initial_energy: e0,
        energy_identity_defect: (totals.dissipation + final_energy - e0).abs(),
        max_energy_increase: if max_increase.is_finite() { max_increase } else { T::zero() },
        min_pohozaev_slack: min_slack,
        loop_degrees,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{default_core_radius, make_initial_data, CapMap, VortexSpec};
    use crate::geometry::BuiltinSurface;
    use std::f64::consts::PI;

    fn cap() -> Surface<f64> {
        BuiltinSurface::SphericalCap { l: 1.2 }.build().unwrap()
    }

    fn dipole(n_s: usize, n_theta: usize) -> FieldState<f64> {
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
    fn constant_e_is_a_fixed_point() {
        let op = FlowOperator::new(&cap(), 16, 32, 1.0).unwrap();
        let mut u = FieldState::constant(*op.grid(), Complex::new(1.0, 0.0));
        let before = u.values.clone();
        op.step(&mut u, op.stable_dt(0.2), &mut StepWork::default()).unwrap();
        assert_eq!(u.values, before);
        assert_eq!(op.energy(&u.values), 0.0);
        assert_eq!(op.steady_state_residual(&u.values), 0.0);
    }

    #[test]
    fn uniform_modulus_follows_scalar_ode() {
        let op = FlowOperator::new(&cap(), 16, 32, 1.0).unwrap();
        let rho: f64 = 0.7;
        let mut u = FieldState::constant(*op.grid(), Complex::new(rho, 0.0));
        let dt = op.stable_dt(0.2);
        op.step(&mut u, dt, &mut StepWork::default()).unwrap();
        let f = |r: f64| r * (1.0 - r * r);
        let want = rho + dt * f(rho + 0.5 * dt * f(rho));
        // the fixed boundary row only reaches the last interior row during the step
        for j in 0..op.grid().n_s - 1 {
            for k in 0..op.grid().n_theta {
                assert!((u.get(j, k).re - want).abs() < 1e-12 && u.get(j, k).im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_potential_energy() {
        let surface = cap();
        let op = FlowOperator::new(&surface, 32, 64, 1.0).unwrap();
        let delta: f64 = 0.1;
        let u = FieldState::constant(*op.grid(), Complex::new(1.0 - delta, 0.0));
        let area = 2.0 * PI * (1.0 - 1.2f64.cos());
        let want = area * 0.25 * (1.0 - (1.0 - delta).powi(2)).powi(2);
        assert!((op.energy(&u.values) - want).abs() < 1e-10 * want);
    }

    #[test]
    fn laplacian_of_height_converges_at_second_order() {
        // β = 1 - cos s on the unit sphere cap: Δβ = (1/sin)(sin²)' = 2 cos s
        let surface = cap();
        let err = |n_s: usize| {
            let op = FlowOperator::new(&surface, n_s, 64, 1.0).unwrap();
            let g = *op.grid();
            let mut values = Vec::new();
            for j in 0..g.rows() {
                for _ in 0..g.n_theta {
                    values.push(Complex::new(1.0 - g.s(j).cos(), 0.0));
                }
            }
            let lap = op.laplace_beltrami(&values);
            (0..g.n_s).map(|j| (lap[j * g.n_theta].re - 2.0 * g.s(j).cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(32), err(64), err(128));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
        }
    }

    #[test]
    fn discrete_h_laplacian_matches_two_alpha_prime() {
        let surface = cap();
        let op = FlowOperator::new(&surface, 64, 32, 1.0).unwrap();
        let (h, lap_h) = op.h_weight();
        let g = *op.grid();
        // closed forms for α = sin s: H = 1 - cos s, Δ_M H = 2 cos s
        for j in 0..=g.n_s {
            assert!((h[j] - (1.0 - g.s(j).cos())).abs() < 1e-12);
            assert!((lap_h[j] - 2.0 * g.s(j).cos()).abs() < 1e-12);
        }
        let values: Vec<Complex<f64>> =
            (0..g.len()).map(|i| Complex::new(h[i / g.n_theta], 0.0)).collect();
        let lap = op.laplace_beltrami(&values);
        for j in 0..g.n_s {
            assert!((lap[j * g.n_theta].re - lap_h[j]).abs() < 1e-3);
        }
    }

    #[test]
    fn projection_is_idempotent_and_mass_orthogonal() {
        let op = FlowOperator::new(&cap(), 32, 64, 1.0).unwrap();
        let u = dipole(32, 64);
        let mut p = u.values.clone();
        op.project(&mut p);
        let mut pp = p.clone();
        op.project(&mut pp);
        let diff = p.iter().zip(&pp).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13);
        // <Pu, u - Pu>_M = 0
        let n = op.grid().n_theta;
        let inner: f64 = (0..u.values.len())
            .map(|i| op.masses()[i / n] * (p[i].conj() * (u.values[i] - p[i])).re)
            .sum();
        assert!(inner.abs() < 1e-13);
    }

    #[test]
    fn dipole_data_is_detected_and_energy_decreases() {
        let u = dipole(64, 128);
        let found = detect_vortices(&u, 0.5);
        assert_eq!(found.len(), 2);
        let ds = 1.2 / 64.0;
        for v in &found {
            let want_theta = if v.degree == 1 { 0.0 } else { PI };
            assert!((v.s - 0.5).abs() < 2.0 * ds);
            let dth = (v.theta - want_theta).sin().abs();
            assert!(dth < 2.0 * 2.0 * PI / 128.0, "{v:?}");
        }
        let op = FlowOperator::new(&cap(), 64, 128, 1.0).unwrap();
        assert!(op.steady_state_residual(&u.values) > 1.0);
        let mut start = u.clone();
        op.project(&mut start.values);
        let e0 = op.energy(&start.values);
        // identity defect over a fixed time span, O(dt²) globally
        let defect = |steps: usize| {
            let mut state = start.clone();
            let dt = op.stable_dt(0.2) * 50.0 / steps as f64;
            let mut work = StepWork::default();
            let mut diss = 0.0;
            for _ in 0..steps {
                diss += op.step(&mut state, dt, &mut work).unwrap().dissipation;
            }
            let e1 = op.energy(&state.values);
            assert!(e1 < e0);
            (diss + e1 - e0).abs()
        };
        let (coarse, fine) = (defect(50), defect(100));
        let tol_e = 1e-6 * (1.0 + e0);
        assert!(coarse < tol_e * (1.0 + e0), "{coarse}");
        assert!(coarse / fine > 3.0, "{coarse} {fine}");
    }

    #[test]
    fn step_rejects_large_dt() {
        let op = FlowOperator::new(&cap(), 16, 32, 1.0).unwrap();
        let mut u = FieldState::constant(*op.grid(), Complex::new(1.0, 0.0));
        let err = op.step(&mut u, op.max_dt() * 1.01, &mut StepWork::default()).unwrap_err();
        assert!(matches!(err, Error::CflViolated { .. }));
    }

    #[test]
    fn constant_initial_data_terminates_immediately() {
        let surface = cap();
        let config = FlowConfig { n_s: 16, n_theta: 32, ..FlowConfig::default() };
        let grid = Grid::new(1.2, 16, 32).unwrap();
        let u = FieldState::constant(grid, Complex::new(1.0, 0.0));
        let diag = run(&surface, &config, &u, |_, _| {}).unwrap();
        assert_eq!(diag.status, FlowStatus::Converged);
        assert_eq!(diag.checkpoints.len(), 1);
        assert_eq!(diag.checkpoints[0].energy, 0.0);
        assert_eq!(diag.annihilation_time, Some(0.0));
        let report = pohozaev_ledger(&diag);
        assert_eq!((report.lhs, report.rhs, report.slack), (0.0, 0.0, 0.0));
    }
}
