//! Run configuration. Every section has serde defaults, unknown keys are
//! rejected, and the resolved document is written back as
//! `effective_config.json` next to the outputs.

use std::path::{Path, PathBuf};

use gllab_core::flow::{self, FlowConfig};
use gllab_core::geometry::BuiltinSurface;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub surface: SurfaceSection,
    pub chart: ChartSection,
    pub renorm: RenormSection,
    pub flow: FlowSection,
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceName {
    #[default]
    Sphere,
    SphericalCap,
    Apple,
    SteepCap,
    BulbCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    pub kind: SurfaceName,
    /// Profile length for caps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pinch: Option<f64>,
    /// Slope bound of `steep_cap`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Rows of `surface.csv`.
    pub samples: usize,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { kind: SurfaceName::Sphere, l: None, pinch: None, c: None, samples: 257 }
    }
}

impl SurfaceSection {
    /// Fills the parameters the kind uses and rejects the ones it does not.
    pub fn resolve(&mut self) -> Result<BuiltinSurface, Failure> {
        let unused = |name: &str, v: Option<f64>| match v {
            Some(_) => Err(Failure::Input(format!("surface.{name} does not apply to {:?}", self.kind))),
            None => Ok(()),
        };
        let which = match self.kind {
            SurfaceName::Sphere => {
                unused("l", self.l)?;
                unused("pinch", self.pinch)?;
                unused("c", self.c)?;
                BuiltinSurface::Sphere
            }
            SurfaceName::SphericalCap => {
                unused("pinch", self.pinch)?;
                unused("c", self.c)?;
                BuiltinSurface::SphericalCap { l: *self.l.get_or_insert(1.2) }
            }
            SurfaceName::Apple => {
                unused("l", self.l)?;
                unused("c", self.c)?;
                BuiltinSurface::Apple { pinch: *self.pinch.get_or_insert(BuiltinSurface::APPLE_DEFAULT_PINCH) }
            }
            SurfaceName::SteepCap => {
                unused("pinch", self.pinch)?;
                BuiltinSurface::SteepCap { c: *self.c.get_or_insert(0.4), l: *self.l.get_or_insert(1.5) }
            }
            SurfaceName::BulbCap => {
                unused("pinch", self.pinch)?;
                unused("c", self.c)?;
                BuiltinSurface::BulbCap { l: *self.l.get_or_insert(BuiltinSurface::BULB_DEFAULT_LENGTH) }
            }
        };
        if self.samples < 2 {
            return Err(Failure::Input("surface.samples must be at least 2".into()));
        }
        Ok(which)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChartSection {
    pub n_phi: usize,
    pub ode_tol: f64,
    /// Rows of `chart.csv`, equally spaced in `φ`.
    pub samples: usize,
}

impl Default for ChartSection {
    fn default() -> Self {
        Self {
            n_phi: gllab_core::conformal::DEFAULT_N_PHI,
            ode_tol: gllab_core::conformal::DEFAULT_ODE_TOL,
            samples: 129,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    #[default]
    Conformal,
    /// `f ≡ 0`, ignores the surface.
    Flat,
}

/// A vortex given either by chart coordinates `x` or by surface
/// coordinates `(s, theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormVortex {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub degree: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormSection {
    pub chart: ChartKind,
    pub vortices: Vec<RenormVortex>,
    /// Seeded random ±1 configurations to certify in addition.
    pub random_configurations: usize,
    pub random_pairs: usize,
    pub r_values: Vec<f64>,
    pub quad_tol: f64,
}

impl Default for RenormSection {
    fn default() -> Self {
        Self {
            chart: ChartKind::Conformal,
            vortices: vec![
                RenormVortex { x: Some([1.0, 0.0]), s: None, theta: None, degree: 1 },
                RenormVortex { x: Some([-1.0, 0.0]), s: None, theta: None, degree: -1 },
            ],
            random_configurations: 0,
            random_pairs: 1,
            r_values: gllab_core::renorm::DEFAULT_R_VALUES.to_vec(),
            quad_tol: gllab_core::renorm::DEFAULT_QUAD_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Vortices,
    /// `u₀ ≡ e`.
    Constant,
    /// A snapshot in the binary field format.
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowVortex {
    pub s: f64,
    pub theta: f64,
    pub degree: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub n_s: usize,
    pub n_theta: usize,
    pub epsilon: f64,
    pub cfl_safety: f64,
    pub t_max: f64,
    pub checkpoint_interval: f64,
    pub track_interval: f64,
    pub m_thr: f64,
    pub steady_tol: f64,
    pub tol_e_rel: f64,
    pub initial: InitialKind,
    pub vortices: Vec<FlowVortex>,
    /// `None` resolves to `ε min(1, l/10)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_radius: Option<f64>,
    /// Snapshot file for `initial = "snapshot"`, relative to the config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = FlowConfig::<f64>::default();
        Self {
            n_s: d.n_s,
            n_theta: d.n_theta,
            epsilon: d.epsilon,
            cfl_safety: d.cfl_safety,
            t_max: d.t_max,
            checkpoint_interval: d.checkpoint_interval,
            track_interval: d.track_interval,
            m_thr: d.m_thr,
            steady_tol: d.steady_tol,
            tol_e_rel: flow::DEFAULT_TOL_E_REL,
            initial: InitialKind::Vortices,
            vortices: vec![
                FlowVortex { s: 0.5, theta: 0.0, degree: 1 },
                FlowVortex { s: 0.5, theta: std::f64::consts::PI, degree: -1 },
            ],
            core_radius: None,
            snapshot: None,
        }
    }
}

impl FlowSection {
    pub fn solver_config(&self) -> FlowConfig<f64> {
        FlowConfig {
            n_s: self.n_s,
            n_theta: self.n_theta,
            epsilon: self.epsilon,
            cfl_safety: self.cfl_safety,
            t_max: self.t_max,
            checkpoint_interval: self.checkpoint_interval,
            track_interval: self.track_interval,
            m_thr: self.m_thr,
            steady_tol: self.steady_tol,
            tol_e_rel: self.tol_e_rel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory, relative to the config file.
    pub dir: PathBuf,
    /// Write a binary field snapshot at every checkpoint.
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshots: false }
    }
}

/// Reads a config, resolving relative paths against its directory. With no
/// path the defaults are used relative to the working directory.
pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let absolute = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    config.output.dir = absolute(&config.output.dir);
    if let Some(s) = &config.flow.snapshot {
        config.flow.snapshot = Some(absolute(s));
    }
    Ok(config)
}
