use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use gllab_core::conformal::{phi_of_r, ConformalChart, FlatChart, PlanarMetric};
use gllab_core::fields::{default_core_radius, make_initial_data, CapMap, FieldState, Grid, VortexSpec};
use gllab_core::flow::{pohozaev_ledger, run, FlowStatus};
use gllab_core::geometry::{Surface, SurfaceKind};
use gllab_core::numeric::jacobi_eigen;
use gllab_core::renorm::{
    grad_w, hessian_w, instability_certificate, renormalized_energy, w_via_limit, LimitOptions, VortexConfiguration,
};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ChartKind, InitialKind, RunConfig};
use crate::Failure;

pub struct Context {
    pub config: RunConfig,
    pub oracle: bool,
    pub seed: u64,
}

fn io(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).map_err(io)?;
    Ok(BufWriter::new(File::create(dir.join(name)).map_err(io)?))
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}

fn build_surface(config: &mut RunConfig) -> Result<Surface<f64>, Failure> {
    let which = config.surface.resolve()?;
    Ok(which.build()?)
}

fn effective(ctx: &Context, dir: &Path) -> Result<(), Failure> {
    write_json(dir, "effective_config.json", &ctx.config)
}

/// `surface.csv`: `s, alpha, d_alpha, beta, K`.
pub fn surface(ctx: &mut Context) -> Result<Value, Failure> {
    let surface = build_surface(&mut ctx.config)?;
    let dir = ctx.config.output.dir.clone();
    let n = ctx.config.surface.samples;
    let p = surface.profile();
    let l = surface.length();
    let mut out = create(&dir, "surface.csv")?;
    writeln!(out, "s,alpha,d_alpha,beta,K").map_err(io)?;
    let (mut min_slope, mut max_slope, mut min_k, mut max_k) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for i in 0..n {
        let s = l * i as f64 / (n - 1) as f64;
        let k = surface.gauss_curvature(s);
        let da = p.d_alpha(s);
        min_slope = min_slope.min(da);
        max_slope = max_slope.max(da);
        min_k = min_k.min(k);
        max_k = max_k.max(k);
        writeln!(out, "{s:.17e},{:.17e},{da:.17e},{:.17e},{k:.17e}", p.alpha(s), p.beta(s)).map_err(io)?;
    }
    out.flush().map_err(io)?;
    effective(ctx, &dir)?;
    Ok(json!({
        "surface": ctx.config.surface,
        "kind": match surface.kind() { SurfaceKind::Closed => "closed", SurfaceKind::BoundaryCap => "boundary_cap" },
        "length": l,
        "area": surface.area(),
        "min_d_alpha": min_slope,
        "max_d_alpha": max_slope,
        "min_curvature": min_k,
        "max_curvature": max_k,
        "output": dir.join("surface.csv"),
    }))
}

fn solve(ctx: &Context, surface: &Surface<f64>) -> Result<ConformalChart<f64>, Failure> {
    Ok(ConformalChart::solve(surface, ctx.config.chart.n_phi, ctx.config.chart.ode_tol)?)
}

/// `chart.csv`: `phi, S, r, f, A, B, eig1, eig2, laplace_residual` with
/// `eig1 <= eig2` the eigenvalues of `D²f`.
pub fn chart(ctx: &mut Context) -> Result<Value, Failure> {
    let surface = build_surface(&mut ctx.config)?;
    let chart = solve(ctx, &surface)?;
    let dir = ctx.config.output.dir.clone();
    let n = ctx.config.chart.samples;
    if n < 2 {
        return Err(Failure::Input("chart.samples must be at least 2".into()));
    }
    let mut out = create(&dir, "chart.csv")?;
    writeln!(out, "phi,S,r,f,A,B,eig1,eig2,laplace_residual").map_err(io)?;
    let (mut max_trace, mut max_laplace) = (0.0f64, 0.0f64);
    let pi = std::f64::consts::PI;
    for i in 0..n {
        // interior nodes only: φ = 0 and φ = π are the chart's infinity and origin
        let phi = pi * (i as f64 + 0.5) / n as f64;
        let r = (0.5 * phi).tan().recip();
        let x = [r, 0.0];
        let (a, b) = chart.ab_values(x)?;
        let hf = chart.hessian_f(x)?;
        let eig = jacobi_eigen(&[hf[0][0], hf[0][1], hf[1][0], hf[1][1]], 2);
        let trace = (hf[0][0] + hf[1][1] - b).abs();
        let lap = chart.laplace_check(x)?;
        max_trace = max_trace.max(trace);
        max_laplace = max_laplace.max(lap);
        debug_assert!((phi_of_r(r) - phi).abs() < 1e-12);
        writeln!(
            out,
            "{phi:.17e},{:.17e},{r:.17e},{:.17e},{a:.17e},{b:.17e},{:.17e},{:.17e},{lap:.17e}",
            chart.s_of_phi(phi),
            chart.conformal_factor(x),
            eig.values[0],
            eig.values[1]
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)?;
    effective(ctx, &dir)?;
    let (c_north, c_south) = chart.shooting_constants();
    Ok(json!({
        "surface": ctx.config.surface,
        "shooting_constants": [c_north, c_south],
        "max_ode_residual": chart.max_ode_residual(),
        "max_trace_residual": max_trace,
        "max_laplace_residual": max_laplace,
        "output": dir.join("chart.csv"),
    }))
}

fn random_configuration(rng: &mut ChaCha8Rng, pairs: usize) -> VortexConfiguration<f64> {
    loop {
        let points: Vec<[f64; 2]> = (0..2 * pairs)
            .map(|_| {
                let r = rng.gen_range(-2.3f64..2.3).exp();
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let degrees = (0..2 * pairs).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        if let Ok(c) = VortexConfiguration::new(points, degrees) {
            let ok = (0..c.len()).all(|i| {
                (0..i).all(|j| {
                    let (p, q) = (c.points()[i], c.points()[j]);
                    (p[0] - q[0]).hypot(p[1] - q[1]) > 0.05
                })
            });
            if ok {
                return c;
            }
        }
    }
}

fn analyze(
    ctx: &Context,
    metric: &dyn PlanarMetric<f64>,
    config: &VortexConfiguration<f64>,
) -> Result<Value, Failure> {
    let w = renormalized_energy(metric, config)?;
    let grad = grad_w(metric, config)?;
    let hess = hessian_w(metric, config)?;
    let spectrum = jacobi_eigen(&hess, 2 * config.len()).values;
    let cert = instability_certificate(metric, config)?;
    let mut report = json!({
        "points": config.points(),
        "degrees": config.degrees(),
        "W": w,
        "gradient": grad,
        "hessian_eigenvalues": spectrum,
        "certificate": {
            "mechanism": cert.mechanism.name(),
            "value": cert.value,
            "vortex": cert.vortex,
            "direction": cert.direction,
        },
    });
    if ctx.oracle {
        let options = LimitOptions {
            r_values: ctx.config.renorm.r_values.clone(),
            quad_tol: ctx.config.renorm.quad_tol,
            empirical_order: false,
        };
        let est = w_via_limit(metric, config, &options)?;
        report["oracle"] = json!({
            "value": est.value,
            "previous": est.previous,
            "order": est.order,
            "samples": est.samples,
            "relative_difference": (est.value - w).abs() / w.abs().max(1e-300),
        });
    }
    Ok(report)
}

/// `report.json` with `W`, its gradient and Hessian spectrum, and the
/// instability certificate; `--oracle` adds the limit-definition value.
pub fn renorm(ctx: &mut Context) -> Result<Value, Failure> {
    let surface = build_surface(&mut ctx.config)?;
    let chart = match ctx.config.renorm.chart {
        ChartKind::Conformal => Some(solve(ctx, &surface)?),
        ChartKind::Flat => None,
    };
    let metric: &dyn PlanarMetric<f64> = match &chart {
        Some(c) => c,
        None => &FlatChart,
    };
    let mut points = Vec::new();
    for (i, v) in ctx.config.renorm.vortices.iter().enumerate() {
        let x = match (v.x, v.s, v.theta, &chart) {
            (Some(x), None, None, _) => x,
            (None, Some(s), Some(theta), Some(c)) => c.chart_coords(s, theta)?,
            (None, Some(_), Some(_), None) => {
                return Err(Failure::Input(format!("renorm.vortices[{i}]: the flat chart takes x, not (s, theta)")))
            }
            _ => return Err(Failure::Input(format!("renorm.vortices[{i}]: give either x or both s and theta"))),
        };
        points.push(x);
    }
    let degrees = ctx.config.renorm.vortices.iter().map(|v| v.degree).collect();
    let config = VortexConfiguration::new(points, degrees)?;
    let mut report = analyze(ctx, metric, &config)?;
    report["surface"] = json!(ctx.config.surface);
    report["chart"] = json!(ctx.config.renorm.chart);
    let count = ctx.config.renorm.random_configurations;
    if count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let mut mechanisms: BTreeMap<&str, usize> = BTreeMap::new();
        let (mut negative, mut worst) = (0usize, f64::NEG_INFINITY);
        for _ in 0..count {
            let c = random_configuration(&mut rng, ctx.config.renorm.random_pairs.max(1));
            let cert = instability_certificate(metric, &c)?;
            *mechanisms.entry(cert.mechanism.name()).or_default() += 1;
            if cert.value < 0.0 {
                negative += 1;
            }
            worst = worst.max(cert.value);
        }
        report["random"] = json!({
            "seed": ctx.seed,
            "count": count,
            "negative": negative,
            "max_value": worst,
            "mechanisms": mechanisms,
        });
    }
    let dir = ctx.config.output.dir.clone();
    write_json(&dir, "report.json", &report)?;
    effective(ctx, &dir)?;
    Ok(report)
}

/// Runs the heat flow. Writes `diagnostics.csv`, `events.ndjson` and
/// `report.json`, plus snapshots when enabled. Timeout maps to exit 3.
pub fn flow(ctx: &mut Context) -> Result<Value, Failure> {
    let surface = build_surface(&mut ctx.config)?;
    if surface.kind() != SurfaceKind::BoundaryCap {
        return Err(Failure::Input("flow needs a boundary cap surface".into()));
    }
    let section = ctx.config.flow.clone();
    let grid = Grid::new(surface.length(), section.n_s, section.n_theta)?;
    let initial = match section.initial {
        InitialKind::Constant => FieldState::constant(grid, Complex::new(1.0, 0.0)),
        InitialKind::Vortices => {
            let map = CapMap::new(&surface)?;
            let core = *ctx.config.flow.core_radius.get_or_insert(default_core_radius(&surface, section.epsilon));
            let specs: Vec<VortexSpec<f64>> =
                section.vortices.iter().map(|v| VortexSpec { s: v.s, theta: v.theta, degree: v.degree }).collect();
            make_initial_data(&surface, &map, &specs, core, &grid)?
        }
        InitialKind::Snapshot => {
            let path = section
                .snapshot
                .as_ref()
                .ok_or_else(|| Failure::Input("flow.initial = \"snapshot\" needs flow.snapshot".into()))?;
            let file = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let state = FieldState::read_binary(std::io::BufReader::new(file), surface.length())?;
            if state.grid != grid {
                return Err(Failure::Input(format!(
                    "snapshot grid {}x{} differs from flow grid {}x{}",
                    state.grid.n_s, state.grid.n_theta, grid.n_s, grid.n_theta
                )));
            }
            state
        }
    };
    let dir = ctx.config.output.dir.clone();
    effective(ctx, &dir)?;
    let snapshots = ctx.config.output.snapshots;
    let mut diag_csv = create(&dir, "diagnostics.csv")?;
    writeln!(diag_csv, "t,E,weighted_E,cum_dissipation,pohozaev_slack,n_vortices,min_modulus,sup_dist_to_e,residual")
        .map_err(io)?;
    if snapshots {
        fs::create_dir_all(dir.join("snapshots")).map_err(io)?;
    }
    let mut write_error: Option<std::io::Error> = None;
    let mut index = 0usize;
    let diag = run(&surface, &section.solver_config(), &initial, |cp, state| {
        eprintln!(
            "t = {:.4}  E = {:.6e}  vortices = {}  min|u| = {:.4}  residual = {:.3e}",
            cp.t, cp.energy, cp.n_vortices, cp.min_modulus, cp.residual
        );
        let mut write = || -> std::io::Result<()> {
            writeln!(
                diag_csv,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e}",
                cp.t,
                cp.energy,
                cp.weighted_energy,
                cp.cum_dissipation,
                cp.pohozaev_slack,
                cp.n_vortices,
                cp.min_modulus,
                cp.sup_dist_to_e,
                cp.residual
            )?;
            if snapshots {
                let f = File::create(dir.join("snapshots").join(format!("snapshot_{index:04}.bin")))?;
                let mut w = BufWriter::new(f);
                state.write_binary(&mut w)?;
                w.flush()?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            write_error.get_or_insert(e);
        }
        index += 1;
    })?;
    if let Some(e) = write_error {
        return Err(io(e));
    }
    diag_csv.flush().map_err(io)?;
    let mut events = create(&dir, "events.ndjson")?;
    for e in &diag.events {
        let rec = json!({ "t": e.t, "kind": e.kind.name(), "s": e.s, "theta": e.theta, "degree": e.degree });
        writeln!(events, "{rec}").map_err(io)?;
    }
    events.flush().map_err(io)?;
    let ledger = pohozaev_ledger(&diag);
    let final_cp = diag.checkpoints.last().expect("run records a checkpoint");
    let degree_ok = diag.checkpoints.iter().all(|c| c.loop_min_modulus <= 0.5 || c.loop_degree == Some(0));
    let report = json!({
        "status": match diag.status { FlowStatus::Converged => "converged", FlowStatus::Timeout => "timeout" },
        "annihilation_time": diag.annihilation_time,
        "t_final": diag.final_state.time,
        "dt": diag.dt,
        "steps": diag.steps,
        "tol_e": diag.tol_e,
        "initial_energy": diag.initial_energy,
        "energy_identity_defect": diag.energy_identity_defect,
        "max_energy_increase": diag.max_energy_increase,
        "pohozaev": {
            "lhs": ledger.lhs,
            "rhs": ledger.rhs,
            "slack": ledger.slack,
            "min_slack": ledger.min_slack,
            "holds": ledger.holds(),
        },
        "boundary_degree_conserved": degree_ok,
        "final": {
            "energy": final_cp.energy,
            "min_modulus": diag.final_state.min_modulus(),
            "sup_dist_to_e": diag.final_state.sup_distance_to(Complex::new(1.0, 0.0)),
            "residual": final_cp.residual,
            "n_vortices": final_cp.n_vortices,
        },
        "events": diag.events.len(),
    });
    write_json(&dir, "report.json", &report)?;
    if diag.status == FlowStatus::Timeout {
        return Err(Failure::Timeout(report));
    }
    Ok(report)
}
