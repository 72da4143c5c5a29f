//! `gllab verify <suite>`: invariant checks with per-check residuals.

use std::f64::consts::PI;

use clap::ValueEnum;
use gllab_core::conformal::{ConformalChart, FlatChart, PlanarMetric};
use gllab_core::fields::{default_core_radius, make_initial_data, CapMap, Grid, VortexSpec};
use gllab_core::flow::{pohozaev_ledger, run, FlowConfig, FlowStatus};
use gllab_core::geometry::{BuiltinSurface, Surface};
use gllab_core::renorm::{
    grad_w, hessian_w, instability_certificate, renormalized_energy, second_variation_along, w_via_limit,
    LimitOptions, VortexConfiguration,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Geometry,
    Conformal,
    Renorm,
    FlowShort,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    /// Measured residual or value.
    pub value: f64,
    /// Bound the value is compared against.
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn below(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check { suite: self.suite, name: name.into(), passed: value <= tolerance, value, tolerance });
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.checks.push(Check { suite: self.suite, name: name.into(), passed: value >= bound, value, tolerance: bound });
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool) {
        let value = if ok { 1.0 } else { 0.0 };
        self.checks.push(Check { suite: self.suite, name: name.into(), passed: ok, value, tolerance: 1.0 });
    }
}

const CLOSED: [BuiltinSurface; 2] = [BuiltinSurface::Sphere, BuiltinSurface::Apple { pinch: 0.5 }];

fn all_builtins() -> Vec<BuiltinSurface> {
    vec![
        BuiltinSurface::Sphere,
        BuiltinSurface::SphericalCap { l: 1.2 },
        BuiltinSurface::Apple { pinch: 0.5 },
        BuiltinSurface::SteepCap { c: 0.4, l: 1.5 },
        BuiltinSurface::BulbCap { l: 1.4 },
    ]
}

fn geometry(rec: &mut Recorder) -> Result<(), Failure> {
    for which in all_builtins() {
        let surface: Surface<f64> = which.build::<f64>()?;
        let p = surface.profile();
        let l = surface.length();
        let n = 2001;
        let samples: Vec<f64> = (0..n).map(|i| l * i as f64 / (n - 1) as f64).collect();
        let unit = samples.iter().map(|&s| (p.d_alpha(s).powi(2) + p.d_beta(s).powi(2) - 1.0).abs()).fold(0.0, f64::max);
        rec.below(format!("{}: unit speed", which.name()), unit, 1e-10);
        let slope = samples.iter().map(|&s| p.d_alpha(s).abs()).fold(0.0, f64::max);
        rec.below(format!("{}: |alpha'| <= 1", which.name()), slope, 1.0 + 1e-12);
        rec.below(format!("{}: alpha(0) = 0", which.name()), p.alpha(0.0).abs(), 1e-12);
        let min_slope = samples.iter().map(|&s| p.d_alpha(s)).fold(f64::INFINITY, f64::min);
        let min_k = samples.iter().map(|&s| surface.gauss_curvature(s)).fold(f64::INFINITY, f64::min);
        match which {
            BuiltinSurface::Sphere => {
                let k = samples.iter().map(|&s| (surface.gauss_curvature(s) - 1.0).abs()).fold(0.0, f64::max);
                rec.below("sphere: K = 1", k, 1e-9);
            }
            BuiltinSurface::SphericalCap { l } | BuiltinSurface::SteepCap { l, .. } => {
                let c = match which {
                    BuiltinSurface::SteepCap { c, .. } => c,
                    _ => l.cos(),
                };
                rec.at_least(format!("{}: min alpha' >= c", which.name()), min_slope, c - 1e-12);
            }
            BuiltinSurface::Apple { .. } => rec.holds("apple: K changes sign", min_k < 0.0),
            BuiltinSurface::BulbCap { .. } => rec.holds("bulb_cap: alpha' changes sign", min_slope < 0.0),
        }
    }
    Ok(())
}

fn annulus_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let r = rng.gen_range(0.1f64.ln()..10f64.ln()).exp();
            let t = rng.gen_range(0.0..2.0 * PI);
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn conformal(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let sphere = ConformalChart::new(&BuiltinSurface::Sphere.build::<f64>()?)?;
    let mut s_err = 0.0f64;
    for (phi, s) in sphere.phi_nodes() {
        s_err = s_err.max((phi - s).abs());
    }
    rec.below("sphere: S(phi) = phi", s_err, 1e-8);
    let mut f_err = 0.0f64;
    for i in 0..=400 {
        let r = 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
        f_err = f_err.max((sphere.conformal_factor([r, 0.0]) - (2.0 / (1.0 + r * r)).ln()).abs());
    }
    rec.below("sphere: f = ln(2/(1+r^2))", f_err, 1e-8);
    for which in CLOSED {
        let chart = ConformalChart::new(&which.build::<f64>()?)?;
        rec.below(format!("{}: ODE residual", which.name()), chart.max_ode_residual(), 1e-8);
        let (mut tr, mut det, mut lap, mut trip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for x in annulus_points(rng, 500) {
            let (a, b) = chart.ab_values(x)?;
            let h = chart.hessian_f(x)?;
            tr = tr.max((h[0][0] + h[1][1] - b).abs());
            det = det.max((h[0][0] * h[1][1] - h[0][1] * h[1][0] + a * a + a * b).abs());
            lap = lap.max(chart.laplace_check(x)?);
            let (s, theta) = chart.surface_coords(x);
            let y = chart.chart_coords(s, theta)?;
            trip = trip.max((y[0] - x[0]).hypot(y[1] - x[1]) / x[0].hypot(x[1]));
        }
        rec.below(format!("{}: Tr(D2f) = B", which.name()), tr, 1e-10);
        rec.below(format!("{}: det(D2f) = -A^2 - AB", which.name()), det, 1e-10);
        rec.below(format!("{}: Laplace f + K e^(2f) = 0", which.name()), lap, 1e-6);
        rec.below(format!("{}: chart round trip", which.name()), trip, 1e-9);
    }
    Ok(())
}

fn random_config(rng: &mut ChaCha8Rng, pairs: usize) -> VortexConfiguration<f64> {
    loop {
        let points = annulus_points(rng, 2 * pairs);
        let far = (0..points.len())
            .all(|i| (0..i).all(|j| (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]) > 0.05));
        if far {
            let degrees = (0..2 * pairs).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
            return VortexConfiguration::new(points, degrees).expect("separated balanced configuration");
        }
    }
}

fn fd_errors(chart: &dyn PlanarMetric<f64>, config: &VortexConfiguration<f64>) -> Result<(f64, f64), Failure> {
    let h = 1e-5;
    let m = 2 * config.len();
    let g = grad_w(chart, config)?;
    let hess = hessian_w(chart, config)?;
    let shifted = |a: usize, d: f64| -> Result<VortexConfiguration<f64>, Failure> {
        let mut pts = config.points().to_vec();
        pts[a / 2][a % 2] += d;
        Ok(config.with_points(pts)?)
    };
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for a in 0..m {
        let (p, q) = (shifted(a, h)?, shifted(a, -h)?);
        let fd = (renormalized_energy(chart, &p)? - renormalized_energy(chart, &q)?) / (2.0 * h);
        let an = g[a / 2][a % 2];
        eg = eg.max((fd - an).abs() / (1.0 + an.abs()));
        let (gp, gq) = (grad_w(chart, &p)?, grad_w(chart, &q)?);
        for b in 0..m {
            let fd = (gp[b / 2][b % 2] - gq[b / 2][b % 2]) / (2.0 * h);
            let an = hess[b * m + a];
            eh = eh.max((fd - an).abs() / (1.0 + an.abs()));
        }
    }
    Ok((eg, eh))
}

fn renorm(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let sphere = ConformalChart::new(&BuiltinSurface::Sphere.build::<f64>()?)?;
    let apple = ConformalChart::new(&BuiltinSurface::Apple { pinch: 0.5 }.build::<f64>()?)?;
    let dipole = VortexConfiguration::new(vec![[1.0, 0.0], [-1.0, 0.0]], vec![1, -1])?;
    let want = 2.0 * PI * 2f64.ln();
    rec.below("sphere dipole: W = 2 pi ln 2", (renormalized_energy(&sphere, &dipole)? - want).abs(), 1e-8);
    let oracle = w_via_limit(&sphere, &dipole, &LimitOptions::default())?;
    rec.below("sphere dipole: limit definition", (oracle.value - want).abs() / want, 0.02);
    let flat = instability_certificate(&FlatChart, &dipole)?;
    rec.below("flat dipole: scaling identity", (flat.value + 2.0 * PI).abs(), 1e-10);
    for (name, chart) in [("sphere", &sphere), ("apple", &apple)] {
        let (mut eg, mut eh, mut worst) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
        for i in 0..50 {
            let config = random_config(rng, 1 + i % 2);
            let (g, h) = fd_errors(chart, &config)?;
            eg = eg.max(g);
            eh = eh.max(h);
            let cert = instability_certificate(chart, &config)?;
            worst = worst.max(cert.value);
            let again = second_variation_along(chart, &config, &cert.direction)?;
            worst = worst.max(again);
        }
        rec.below(format!("{name}: gradient vs finite differences"), eg, 1e-5);
        rec.below(format!("{name}: Hessian vs finite differences"), eh, 1e-4);
        rec.below(format!("{name}: certificates negative"), worst, -1e-12);
    }
    Ok(())
}

fn flow_short(rec: &mut Recorder) -> Result<(), Failure> {
    let surface: Surface<f64> = BuiltinSurface::SphericalCap { l: 1.2 }.build::<f64>()?;
    let config = FlowConfig { n_s: 64, n_theta: 128, t_max: 5.0, ..FlowConfig::default() };
    let grid = Grid::new(1.2, 64, 128)?;
    let v = [VortexSpec { s: 0.5, theta: 0.0, degree: 1 }, VortexSpec { s: 0.5, theta: PI, degree: -1 }];
    let u = make_initial_data(&surface, &CapMap::new(&surface)?, &v, default_core_radius(&surface, 1.0), &grid)?;
    let diag = run(&surface, &config, &u, |_, _| {})?;
    rec.below("cap dipole: energy non-increasing", diag.max_energy_increase, diag.tol_e);
    rec.below("cap dipole: energy identity", diag.energy_identity_defect, diag.tol_e * (1.0 + diag.initial_energy));
    let ledger = pohozaev_ledger(&diag);
    rec.at_least("cap dipole: Pohozaev slack", ledger.min_slack, -diag.tol_e);
    let degree_ok = diag.checkpoints.iter().all(|c| c.loop_min_modulus <= 0.5 || c.loop_degree == Some(0));
    rec.holds("cap dipole: boundary degree 0", degree_ok);
    rec.holds("cap dipole: converged", diag.status == FlowStatus::Converged);
    rec.holds("cap dipole: annihilation recorded", diag.annihilation_time.is_some());
    rec.below("cap dipole: final sup|u - e|", diag.final_state.sup_distance_to(num_complex::Complex::new(1.0, 0.0)), 1e-2);
    Ok(())
}

pub fn verify(suite: Suite, seed: u64) -> Result<Verdict, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let want = |s: Suite| suite == s || suite == Suite::All;
    if want(Suite::Geometry) {
        let mut rec = Recorder { suite: "geometry", checks: Vec::new() };
        geometry(&mut rec)?;
        checks.append(&mut rec.checks);
    }
    if want(Suite::Conformal) {
        let mut rec = Recorder { suite: "conformal", checks: Vec::new() };
        conformal(&mut rec, &mut rng)?;
        checks.append(&mut rec.checks);
    }
    if want(Suite::Renorm) {
        let mut rec = Recorder { suite: "renorm", checks: Vec::new() };
        renorm(&mut rec, &mut rng)?;
        checks.append(&mut rec.checks);
    }
    if want(Suite::FlowShort) {
        let mut rec = Recorder { suite: "flow-short", checks: Vec::new() };
        flow_short(&mut rec)?;
        checks.append(&mut rec.checks);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(Verdict { suite, seed, passed, checks })
}
