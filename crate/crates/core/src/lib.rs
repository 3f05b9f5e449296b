//! Matrix-free, fully implicit solvers for the linear transport equation
//! in the diffusive scaling
//!
//! ```text
//! ε ∂t f + Ω·∇f = (σ/ε)(ρ − f),   ρ = ⟨f⟩,
//! ```
//!
//! on periodic slabs and planes. The main path splits `f` into even and odd
//! parity, solves a symmetric elliptic system for the even part by
//! preconditioned conjugate gradients, and recovers the odd part explicitly.

pub mod baselines;
pub mod config;
pub mod cross_section;
pub mod csv;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod presets;
pub mod quadrature;
pub mod reference;
pub mod stepper;

pub use cross_section::{CrossSectionModel, LowRankKernel, Problem};
pub use error::{Error, Result};
pub use field::{DensityField, KineticField, ParityPair};
pub use mesh::{Geometry, SpatialMesh};
pub use operators::{EvenStencil, SchemeScalars};
pub use quadrature::{angular_average, AngularKind, AngularQuadrature};
pub use stepper::{run_simulation, Scheme, SimulationState, SolverConfig, TimeOrder};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
