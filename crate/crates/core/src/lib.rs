//! Diffeomorphic image registration by a metric-regularized Riemannian
//! gradient flow on the flat torus.
//!
//! The flow moves a diffeomorphism `phi` along `phi' = u o phi` where the
//! velocity `u = -A^-1 F(phi)` is the inertia-operator preimage of the
//! Eulerian force assembled from two momentum maps: one for the action on
//! images (`I0 o phi^-1`) and one for the action on metrics (`phi_* g`).
//! A finite-dimensional analogue on SO(3) lives in [`so3`].

pub mod deformation;
pub mod error;
pub mod field;
pub mod flow;
pub mod gfr1;
pub mod grid;
pub mod inertia;
pub mod interp;
pub mod momentum;
pub mod pgm;
pub mod random;
pub mod selfcheck;
pub mod so3;
pub mod spectral;
pub mod synth;

pub use deformation::{identity_pair, DiffeoPair, StepReport};
pub use error::{Error, Result};
pub use field::{MetricField, ScalarField, VectorField};
pub use flow::{FlowConfig, FlowState, Problem, RunOutcome, Termination, TraceRecord};
pub use grid::TorusGrid;
pub use inertia::InertiaSpec;
pub use interp::Interpolation;
pub use momentum::ForceBreakdown;
