//! Implicit time stepping and simulation driver.

use crate::cross_section::Problem;
use crate::error::{Error, Result};
use crate::field::{DensityField, KineticField, ParityPair};
use crate::krylov::{gmres_solve, pcg_solve, FnOperator, KrylovOptions, KrylovReport};
use crate::operators::collision::{aniso_inverse_into, shift_into, shift_inverse_into};
use crate::operators::even::directional_derivative;
use crate::operators::{assemble_parity_rhs, update_odd, EvenOperator, EvenStencil, SchemeScalars};
use crate::quadrature::weighted_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Even-parity system by PCG with the collision-shift preconditioner.
    #[default]
    ParityCg,
    /// Full-grid `(C + B) f = d` by preconditioned GMRES.
    NonsymGmres,
    /// Full-grid `(C + B^σ) f = d` for low-rank anisotropic kernels.
    AnisoGmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeOrder {
    /// Backward Euler.
    #[default]
    First,
    /// BDF2, started by one backward-Euler step.
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub time_order: TimeOrder,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub warm_start: bool,
    pub stencil: EvenStencil,
}

impl SolverConfig {
    pub fn new(epsilon: f64, dt: f64) -> Self {
        Self {
            epsilon,
            dt,
            scheme: Scheme::ParityCg,
            time_order: TimeOrder::First,
            tol: 1e-10,
            max_iter: 1000,
            restart: 30,
            warm_start: false,
            stencil: EvenStencil::Compact,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_order(mut self, order: TimeOrder) -> Self {
        self.time_order = order;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_stencil(mut self, stencil: EvenStencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn scalars(&self) -> Result<SchemeScalars> {
        SchemeScalars::new(self.epsilon, self.dt)
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        self.scalars()?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!(
                "tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 || self.restart == 0 {
            return Err(Error::invalid("max_iter and restart must be positive"));
        }
        let iso = problem.cross_section.is_isotropic();
        match (self.scheme, iso) {
            (Scheme::AnisoGmres, true) => Err(Error::Unsupported(
                "aniso_gmres needs an anisotropic cross section".into(),
            )),
            (Scheme::ParityCg | Scheme::NonsymGmres, false) => Err(Error::Unsupported(
                "anisotropic scattering needs the aniso_gmres scheme".into(),
            )),
            _ => Ok(()),
        }
    }

    fn krylov(&self) -> KrylovOptions {
        KrylovOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            restart: self.restart,
        }
    }
}

/// Unknowns carried by a scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum StateField {
    Parity(ParityPair),
    Full(KineticField),
}

impl StateField {
    pub fn to_full(&self, problem: &Problem) -> Result<KineticField> {
        match self {
            Self::Parity(p) => p.to_full(&problem.quadrature),
            Self::Full(f) => Ok(f.clone()),
        }
    }

    pub fn density(&self, problem: &Problem) -> Result<DensityField> {
        match self {
            Self::Parity(p) => p.density(&problem.quadrature),
            Self::Full(f) => f.density(&problem.quadrature),
        }
    }

    /// `a·self + b·other`.
    fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        let lin = |x: &KineticField, y: &KineticField| {
            let v = x
                .values()
                .iter()
                .zip(y.values())
                .map(|(p, q)| a * p + b * q)
                .collect();
            KineticField::from_values(x.n_cells(), x.n_nodes(), v)
        };
        match (self, other) {
            (Self::Parity(p), Self::Parity(q)) => Ok(Self::Parity(ParityPair {
                even: lin(&p.even, &q.even)?,
                odd: lin(&p.odd, &q.odd)?,
            })),
            (Self::Full(p), Self::Full(q)) => Ok(Self::Full(lin(p, q)?)),
            _ => Err(Error::invalid("cannot combine parity and full fields")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub step: usize,
    pub field: StateField,
    /// Previous level and the step that led from it, kept for BDF2.
    pub previous: Option<(StateField, f64)>,
    pub reports: Vec<KrylovReport>,
    warm: Option<Vec<f64>>,
}

impl SimulationState {
    /// Initial state in the representation the scheme works with.
    pub fn new(f0: &KineticField, problem: &Problem, scheme: Scheme) -> Result<Self> {
        f0.check_shape(problem.n_cells(), problem.n_nodes())?;
        if !f0.is_finite() {
            return Err(Error::invalid("initial data must be finite"));
        }
        let field = match scheme {
            Scheme::ParityCg => StateField::Parity(ParityPair::from_full(f0, &problem.quadrature)?),
            Scheme::NonsymGmres | Scheme::AnisoGmres => StateField::Full(f0.clone()),
        };
        Ok(Self {
            t: 0.0,
            step: 0,
            field,
            previous: None,
            reports: Vec::new(),
            warm: None,
        })
    }

    pub fn full_field(&self, problem: &Problem) -> Result<KineticField> {
        self.field.to_full(problem)
    }

    pub fn density(&self, problem: &Problem) -> Result<DensityField> {
        self.field.density(problem)
    }

    pub fn last_report(&self) -> Option<&KrylovReport> {
        self.reports.last()
    }
}

/// One backward-Euler step of the parity scheme.
pub fn step_parity_be(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<()> {
    require_scheme(config, Scheme::ParityCg)?;
    let dt = config.dt;
    be_step(state, problem, config, dt)
}

/// One BDF2 step of the parity scheme; needs a stored previous level.
pub fn step_parity_bdf2(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<()> {
    require_scheme(config, Scheme::ParityCg)?;
    bdf2_step(state, problem, config, config.dt)
}

/// One backward-Euler step of the centred non-symmetric scheme.
pub fn step_nonsym_gmres(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<()> {
    require_scheme(config, Scheme::NonsymGmres)?;
    be_step(state, problem, config, config.dt)
}

/// One backward-Euler step with anisotropic scattering.
pub fn step_aniso(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<()> {
    require_scheme(config, Scheme::AnisoGmres)?;
    be_step(state, problem, config, config.dt)
}

/// Advances by `dt` with the configured scheme and order.
pub fn advance(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
    dt: f64,
) -> Result<()> {
    config.validate(problem)?;
    match config.time_order {
        TimeOrder::Second if state.previous.is_some() => bdf2_step(state, problem, config, dt),
        _ => be_step(state, problem, config, dt),
    }
}

fn require_scheme(config: &SolverConfig, scheme: Scheme) -> Result<()> {
    if config.scheme != scheme {
        return Err(Error::invalid(format!(
            "configured scheme {:?} does not match {:?}",
            config.scheme, scheme
        )));
    }
    Ok(())
}

fn be_step(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
    dt: f64,
) -> Result<()> {
    let hist = state.field.clone();
    finish(state, problem, config, &hist, dt, dt)
}

/// Variable-step BDF2: the backward-Euler solve with step `dt·(1+ω)/(1+2ω)`
/// applied to the history `((1+ω)² fⁿ − ω² fⁿ⁻¹)/(1+2ω)`, `ω = Δtₙ/Δtₙ₋₁`.
fn bdf2_step(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
    dt: f64,
) -> Result<()> {
    let (prev, prev_dt) = state
        .previous
        .as_ref()
        .ok_or_else(|| Error::BootstrapRequired("no previous level stored".into()))?;
    let w = dt / prev_dt;
    let den = 1.0 + 2.0 * w;
    let hist = state
        .field
        .combine((1.0 + w) * (1.0 + w) / den, prev, -w * w / den)?;
    finish(state, problem, config, &hist, dt * (1.0 + w) / den, dt)
}

fn finish(
    state: &mut SimulationState,
    problem: &Problem,
    config: &SolverConfig,
    hist: &StateField,
    dt_eff: f64,
    dt: f64,
) -> Result<()> {
    let warm = if config.warm_start {
        state.warm.as_deref()
    } else {
        None
    };
    let wrap = |e: Error| Error::Step {
        step: state.step + 1,
        t: state.t + dt,
        source: Box::new(e),
    };
    let (next, report, solution) =
        implicit_solve(hist, problem, config, dt_eff, warm).map_err(wrap)?;
    if !report.converged {
        return Err(wrap(Error::NotConverged(format!(
            "{} iterations, residual {:e}{}",
            report.iterations,
            report.final_residual(),
            report
                .note
                .as_deref()
                .map(|n| format!(" ({n})"))
                .unwrap_or_default()
        ))));
    }
    let old = std::mem::replace(&mut state.field, next);
    state.previous = Some((old, dt));
    state.t += dt;
    state.step += 1;
    state.reports.push(report);
    state.warm = Some(solution);
    Ok(())
}

fn implicit_solve(
    hist: &StateField,
    problem: &Problem,
    config: &SolverConfig,
    dt: f64,
    warm: Option<&[f64]>,
) -> Result<(StateField, KrylovReport, Vec<f64>)> {
    let s = SchemeScalars::new(config.epsilon, dt)?;
    match (config.scheme, hist) {
        (Scheme::ParityCg, StateField::Parity(pair)) => {
            let op = EvenOperator::new(problem, &s, config.stencil)?;
            let b = assemble_parity_rhs(pair, problem, &s)?;
            let n = op.dim();
            let sys = FnOperator::new(n, |x: &[f64], y: &mut [f64]| op.apply_system(x, y));
            let pre = FnOperator::new(n, |x: &[f64], y: &mut [f64]| op.apply_b_inverse(x, y));
            let w = op.inner_weights();
            let (mut x, report) = pcg_solve(&sys, &pre, b.values(), warm, &w, &config.krylov())?;
            correct_constant_mode(&mut x, b.values(), &w, s.shift());
            let even = KineticField::from_values(problem.n_cells(), problem.n_half(), x.clone())?;
            let odd = update_odd(&even, &pair.odd, problem, &s)?;
            Ok((StateField::Parity(ParityPair { even, odd }), report, x))
        }
        (Scheme::NonsymGmres | Scheme::AnisoGmres, StateField::Full(f)) => {
            let sys = FullSystem::new(problem, &s)?;
            let d: Vec<f64> = f.values().iter().map(|v| s.shift() * v).collect();
            let n = d.len();
            let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| sys.apply(x, y));
            let pre = FnOperator::new(n, |x: &[f64], y: &mut [f64]| sys.apply_inverse_shift(x, y));
            let w = sys.weights();
            let (mut x, report) = gmres_solve(&op, Some(&pre), &d, warm, &w, &config.krylov())?;
            correct_constant_mode(&mut x, &d, &w, s.shift());
            let out = KineticField::from_values(problem.n_cells(), problem.n_nodes(), x.clone())?;
            Ok((StateField::Full(out), report, x))
        }
        _ => Err(Error::invalid(
            "state representation does not match the scheme",
        )),
    }
}

/// Galerkin correction on the constant vector, an eigenvector of both
/// systems with eigenvalue `ε²/Δt` whose weighted mean balance is exact:
/// `⟨1, (A + B)x⟩ = (ε²/Δt)⟨1, x⟩`. Using the balance instead of a residual
/// avoids cancellation when `ε²/Δt` is tiny. The discrete mass then holds to
/// round-off whatever the Krylov tolerance, and the residual norm never grows.
fn correct_constant_mode(x: &mut [f64], b: &[f64], w: &[f64], shift: f64) {
    let wb: f64 = w.iter().zip(b).map(|(wi, bi)| wi * bi).sum();
    let wx: f64 = w.iter().zip(x.iter()).map(|(wi, xi)| wi * xi).sum();
    let total: f64 = w.iter().sum();
    let c = (wb / shift - wx) / total;
    if c.is_finite() {
        x.iter_mut().for_each(|v| *v += c);
    }
}

/// `C + B` (or `C + B^σ`) on the full node set.
pub(crate) struct FullSystem<'a> {
    problem: &'a Problem,
    epsilon: f64,
    shift: f64,
}

impl<'a> FullSystem<'a> {
    pub(crate) fn new(problem: &'a Problem, s: &SchemeScalars) -> Result<Self> {
        Ok(Self {
            problem,
            epsilon: s.epsilon(),
            shift: s.shift(),
        })
    }

    pub(crate) fn weights(&self) -> Vec<f64> {
        let vol = self.problem.mesh.cell_volume();
        let w = self.problem.quadrature.weights();
        (0..self.problem.n_cells())
            .flat_map(|_| w.iter().map(move |x| x * vol))
            .collect()
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64]) {
        let q = &self.problem.quadrature;
        let grad = directional_derivative(&self.problem.mesh, q.xi(), q.eta(), x);
        let nv = q.len();
        let w = q.weights();
        let sigma = self.problem.cross_section.sigma();
        match self.problem.cross_section.kernel() {
            None => {
                for (c, &sig) in sigma.iter().enumerate() {
                    let r = c * nv..(c + 1) * nv;
                    shift_into(&x[r.clone()], sig, self.shift, w, &mut y[r]);
                }
            }
            Some(k) => {
                for (c, &sig) in sigma.iter().enumerate() {
                    let r = c * nv..(c + 1) * nv;
                    let xc = &x[r.clone()];
                    let a = self.shift + sig;
                    for (yi, xi) in y[r.clone()].iter_mut().zip(xc) {
                        *yi = a * xi;
                    }
                    for (xi_m, v) in k.eigenvalues().iter().zip(k.eigenvectors()) {
                        let coef = sig
                            * xi_m
                            * weighted_sum(
                                w,
                                &v.iter().zip(xc).map(|(a, b)| a * b).collect::<Vec<_>>(),
                            );
                        for (yi, vk) in y[r.clone()].iter_mut().zip(v) {
                            *yi -= coef * vk;
                        }
                    }
                }
            }
        }
        for (yi, g) in y.iter_mut().zip(grad) {
            *yi += self.epsilon * g;
        }
    }

    pub(crate) fn apply_inverse_shift(&self, x: &[f64], y: &mut [f64]) {
        let q = &self.problem.quadrature;
        let nv = q.len();
        let w = q.weights();
        let sigma = self.problem.cross_section.sigma();
        for (c, &sig) in sigma.iter().enumerate() {
            let r = c * nv..(c + 1) * nv;
            match self.problem.cross_section.kernel() {
                None => shift_inverse_into(&x[r.clone()], sig, self.shift, w, &mut y[r]),
                Some(k) => {
                    // Eigenvalues are positive whenever ε²/Δt > 0 and |ξ| ≤ 1.
                    aniso_inverse_into(&x[r.clone()], sig, k, self.shift, w, &mut y[r])
                        .expect("positive collision eigenvalues");
                }
            }
        }
    }
}

/// Receives every completed step.
pub trait Observer {
    fn observe(&mut self, state: &SimulationState, problem: &Problem, report: &KrylovReport);
}

impl<F: FnMut(&SimulationState, &Problem, &KrylovReport)> Observer for F {
    fn observe(&mut self, state: &SimulationState, problem: &Problem, report: &KrylovReport) {
        self(state, problem, report)
    }
}

/// Steps from `t = 0` to `t_max`, shortening the last step to land on it.
pub fn run_simulation(
    f0: &KineticField,
    problem: &Problem,
    config: &SolverConfig,
    t_max: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<SimulationState> {
    config.validate(problem)?;
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::invalid(format!(
            "t_max must be non-negative, got {t_max}"
        )));
    }
    let mut state = SimulationState::new(f0, problem, config.scheme)?;
    let steps = step_sizes(t_max, config.dt);
    for (k, &h) in steps.iter().enumerate() {
        advance(&mut state, problem, config, h)?;
        if k + 1 == steps.len() {
            state.t = t_max;
        }
        let report = state.reports.last().cloned().unwrap_or_default();
        for o in observers.iter_mut() {
            o.observe(&state, problem, &report);
        }
    }
    Ok(state)
}

/// Full steps of `dt` followed by a shortened final step.
pub fn step_sizes(t_max: f64, dt: f64) -> Vec<f64> {
    if t_max <= 0.0 {
        return Vec::new();
    }
    let n = (t_max / dt - 1e-9).ceil().max(1.0) as usize;
    let mut out = vec![dt; n];
    out[n - 1] = t_max - dt * (n - 1) as f64;
    out
}
