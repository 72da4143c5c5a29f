//! Renormalized vortex energy and Ginzburg-Landau heat flow on surfaces of
//! revolution.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix `f64`, which is what the tolerances in the tests
//! and the CLI assume.

pub mod conformal;
pub mod error;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod numeric;
pub mod renorm;

pub use error::{Error, Result};
pub use numeric::Real;

pub type ProfileCurve = geometry::ProfileCurve<f64>;
pub type Surface = geometry::Surface<f64>;
pub use geometry::{BuiltinSurface, SurfaceKind};
pub type ConformalChart = conformal::ConformalChart<f64>;
pub use conformal::{FlatChart, PlanarMetric};
pub type VortexConfiguration = renorm::VortexConfiguration<f64>;
pub type SecondVariationReport = renorm::SecondVariationReport<f64>;
pub use renorm::Mechanism;
pub type FieldState = fields::FieldState<f64>;
pub type Grid = fields::Grid<f64>;
pub type FlowConfig = flow::FlowConfig<f64>;
pub type FlowDiagnostics = flow::FlowDiagnostics<f64>;
pub use flow::{EventKind, FlowStatus};
