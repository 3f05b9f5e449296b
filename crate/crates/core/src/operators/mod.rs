//! Matrix-free discrete operators.
//!
//! Parity-path operators act on half-grid fields laid out cell-major,
//! `x[c * n_half + h]`; full-grid operators use the same layout over all nodes.

pub mod collision;
pub mod dense;
pub mod even;
pub mod streaming;

pub use collision::{
    apply_aniso_projector, apply_aniso_shift, apply_aniso_shift_inverse, apply_collision_shift,
    apply_collision_shift_inverse,
};
pub use dense::{dense_assemble, DenseKind, DEFAULT_DENSE_CAP};
pub use even::{apply_even_elliptic, assemble_parity_rhs, update_odd, EvenOperator, EvenStencil};
pub use streaming::apply_streaming;

use crate::error::{Error, Result};

/// Knudsen number and time step of one implicit solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeScalars {
    epsilon: f64,
    dt: f64,
}

impl SchemeScalars {
    pub fn new(epsilon: f64, dt: f64) -> Result<Self> {
        if epsilon == 0.0 {
            return Err(Error::StiffLimit(
                "epsilon = 0; use a diffusion solver".into(),
            ));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { epsilon, dt })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `ε²/Δt`, the eigenvalue of the collision shift on constants.
    pub fn shift(&self) -> f64 {
        self.epsilon * self.epsilon / self.dt
    }

    /// `D = ε²Δt/(ε² + σΔt)`.
    pub fn even_coefficient(&self, sigma: f64) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        e2 * self.dt / (e2 + sigma * self.dt)
    }

    /// `ε²/(ε² + σΔt)`.
    pub fn odd_factor(&self, sigma: f64) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        e2 / (e2 + sigma * self.dt)
    }

    /// `εΔt/(ε² + σΔt)`.
    pub fn rhs_coefficient(&self, sigma: f64) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        self.epsilon * self.dt / (e2 + sigma * self.dt)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.epsilon, dt)
    }
}
