//! Matrix-free Krylov solvers in a weighted inner product
//! `⟨u, v⟩ = Σ W_i u_i v_i`.

mod gmres;
mod pcg;

pub use gmres::gmres_solve;
pub use pcg::pcg_solve;

/// A square linear map applied without storing its matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// The identity map on `n` unknowns.
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length; ignored by CG.
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            restart: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Relative preconditioned residual, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Applications of the system operator.
    pub matvec_count: usize,
    pub note: Option<String>,
}

impl KrylovReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}
