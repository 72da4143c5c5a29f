use std::f64::consts::PI;

use gllab_core::fields::{default_core_radius, make_initial_data, CapMap, FieldState, Grid, VortexSpec};
use gllab_core::flow::{detect_vortices, pohozaev_ledger, run, FlowConfig, FlowOperator, FlowStatus, StepWork};
use gllab_core::geometry::{BuiltinSurface, Surface};
use num_complex::Complex;

fn dipole_state(surface: &Surface<f64>, n_s: usize, n_theta: usize, s: f64) -> FieldState<f64> {
    let map = CapMap::new(surface).unwrap();
    let grid = Grid::new(surface.length(), n_s, n_theta).unwrap();
    let v = [VortexSpec { s, theta: 0.0, degree: 1 }, VortexSpec { s, theta: PI, degree: -1 }];
    make_initial_data(surface, &map, &v, default_core_radius(surface, 1.0), &grid).unwrap()
}

fn short(n_s: usize, n_theta: usize, t_max: f64) -> FlowConfig<f64> {
    FlowConfig { n_s, n_theta, t_max, checkpoint_interval: 0.05, ..FlowConfig::default() }
}

#[test]
fn ledgers_hold_on_steep_and_bulb_caps() {
    for which in [BuiltinSurface::SteepCap { c: 0.3, l: 1.2 }, BuiltinSurface::BulbCap { l: 1.4 }] {
        let surface = which.build::<f64>().unwrap();
        let u = dipole_state(&surface, 32, 64, 0.5);
        let diag = run(&surface, &short(32, 64, 0.3), &u, |_, _| {}).unwrap();
        assert!(diag.max_energy_increase <= diag.tol_e, "{}", which.name());
        assert!(diag.energy_identity_defect <= diag.tol_e * (1.0 + diag.initial_energy));
        let report = pohozaev_ledger(&diag);
        assert!(report.holds(), "{}: min slack {}", which.name(), report.min_slack);
        for cp in &diag.checkpoints {
            if cp.loop_min_modulus > 0.5 {
                assert_eq!(cp.loop_degree, Some(0));
            }
        }
    }
}

#[test]
fn potential_is_time_integrable_when_slope_is_bounded_below() {
    // on the steep cap α' ≥ c: ∫∫ 2α' V ≤ E_H(0), hence ∫∫ V ≤ E_H(0) / (2c)
    let c = 0.3;
    let surface = BuiltinSurface::SteepCap { c, l: 1.2 }.build::<f64>().unwrap();
    let u = dipole_state(&surface, 32, 64, 0.5);
    let diag = run(&surface, &short(32, 64, 0.3), &u, |_, _| {}).unwrap();
    let eh0 = diag.checkpoints[0].weighted_energy;
    let last = diag.checkpoints.last().unwrap();
    assert!(last.cum_weighted_potential <= eh0 + diag.tol_e);
    assert!(last.cum_potential <= eh0 / (2.0 * c) + diag.tol_e);
}

#[test]
fn vortex_free_data_relaxes_to_constant() {
    let surface = BuiltinSurface::SphericalCap { l: 1.2 }.build::<f64>().unwrap();
    let grid = Grid::new(1.2, 24, 48).unwrap();
    let l = 1.2;
    let values = (0..grid.len())
        .map(|i| {
            let (s, th) = (grid.s(i / grid.n_theta), grid.theta(i % grid.n_theta));
            let m = 1.0 - 0.4 * (PI * s / (2.0 * l)).cos().powi(2);
            Complex::from_polar(m, 1.2 * (PI * s / l).sin() * th.cos())
        })
        .collect();
    let u = FieldState::new(grid, values, 0.0, 1.0).unwrap();
    assert!(u.min_modulus() >= 0.6 - 1e-12);
    let config = FlowConfig { n_s: 24, n_theta: 48, t_max: 10.0, ..FlowConfig::default() };
    let diag = run(&surface, &config, &u, |_, _| {}).unwrap();
    assert_eq!(diag.status, FlowStatus::Converged);
    assert!(diag.events.is_empty());
    let op = FlowOperator::new(&surface, 24, 48, 1.0).unwrap();
    assert!(op.steady_state_residual(&diag.final_state.values) < 1e-4);
    assert!(diag.final_state.sup_distance_to(Complex::new(1.0, 0.0)) < 1e-4);
}

#[test]
fn vortices_drift_but_keep_their_degrees() {
    let surface = BuiltinSurface::SphericalCap { l: 1.2 }.build::<f64>().unwrap();
    let mut u = dipole_state(&surface, 32, 64, 0.5);
    let op = FlowOperator::new(&surface, 32, 64, 1.0).unwrap();
    op.project(&mut u.values);
    let mut work = StepWork::default();
    for _ in 0..200 {
        op.step(&mut u, op.stable_dt(0.2), &mut work).unwrap();
    }
    let mut found = detect_vortices(&u, 0.5);
    found.sort_by_key(|v| v.degree);
    assert_eq!(found.iter().map(|v| v.degree).collect::<Vec<_>>(), vec![-1, 1]);
}

#[test]
fn snapshots_round_trip_through_the_binary_format() {
    let surface = BuiltinSurface::SphericalCap { l: 1.2 }.build::<f64>().unwrap();
    let u = dipole_state(&surface, 16, 32, 0.5);
    let mut bytes = Vec::new();
    u.write_binary(&mut bytes).unwrap();
    let back = FieldState::read_binary(bytes.as_slice(), 1.2).unwrap();
    assert_eq!(back, u);
}
