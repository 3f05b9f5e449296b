//! Classical iterative methods for the slab backward-Euler system with
//! upwind transport: source iteration, SI with diffusion synthetic
//! acceleration, and a DSA-preconditioned Krylov solve for the density.
//!
//! All three use the sweep operator `L = I + (μΔt/ε)∂x + (σΔt/ε²)I` and the
//! scattering coupling `c = σΔt/ε²`, so the implicit system is
//! `L f = c ρ + fⁿ` with `ρ = ⟨f⟩`.

use crate::cross_section::Problem;
use crate::error::{check_len, Error, Result};
use crate::field::{DensityField, KineticField};
use crate::krylov::{gmres_solve, FnOperator, KrylovOptions, KrylovReport};
use crate::linalg::solve_cyclic_tridiagonal;
use crate::quadrature::weighted_sum;

/// Diffusion operator used for the acceleration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DsaVariant {
    /// Diffusion operator derived from the upwind sweep itself: a numerical
    /// part `Δt⟨μ⟩₊/(εΔx)·c/(1+c)` and a physical part
    /// `(Δt/ε)²⟨μ²⟩ c/(1+c)²/Δx²` per face. Stable for every ε.
    #[default]
    Consistent,
    /// The continuum limit `−∂x(Δt/(3σ)∂x)`. Diverges once the sweep's
    /// numerical diffusion dominates, i.e. for small ε.
    DiffusionLimit,
}

/// Per-direction periodic sweeps for the upwind operator `L`.
#[derive(Debug, Clone)]
pub struct SweepOperator {
    nx: usize,
    mu: Vec<f64>,
    weights: Vec<f64>,
    coupling: Vec<f64>,
    /// `|μ|Δt/(εΔx)` per direction.
    stream: Vec<f64>,
    /// Coefficient of the wrap-around unknown after a full march.
    wrap: Vec<f64>,
    epsilon: f64,
    dt: f64,
    dx: f64,
    sigma: Vec<f64>,
}

impl SweepOperator {
    pub fn new(problem: &Problem, epsilon: f64, dt: f64) -> Result<Self> {
        if problem.mesh.is_planar() {
            return Err(Error::Unsupported(
                "sweeps are implemented for slabs only".into(),
            ));
        }
        if !problem.cross_section.is_isotropic() {
            return Err(Error::Unsupported(
                "sweeps need isotropic scattering".into(),
            ));
        }
        if !(epsilon > 0.0 && dt > 0.0) {
            return Err(Error::invalid("epsilon and dt must be positive"));
        }
        let nx = problem.mesh.nx();
        let dx = problem.mesh.dx();
        let sigma = problem.cross_section.sigma().to_vec();
        let coupling: Vec<f64> = sigma.iter().map(|s| s * dt / (epsilon * epsilon)).collect();
        let mu = problem.quadrature.xi().to_vec();
        let stream: Vec<f64> = mu.iter().map(|m| m.abs() * dt / (epsilon * dx)).collect();
        let wrap = stream
            .iter()
            .map(|&b| {
                (0..nx)
                    .map(|i| b / (1.0 + b + coupling[i]))
                    .product::<f64>()
            })
            .collect();
        Ok(Self {
            nx,
            mu,
            weights: problem.quadrature.weights().to_vec(),
            coupling,
            stream,
            wrap,
            epsilon,
            dt,
            dx,
            sigma,
        })
    }

    /// `c = σΔt/ε²` per cell.
    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    fn check(&self, g: &KineticField) -> Result<()> {
        g.check_shape(self.nx, self.mu.len())
    }

    /// `L g`.
    pub fn apply_l(&self, g: &KineticField) -> Result<KineticField> {
        self.check(g)?;
        let (n, nv) = (self.nx, self.mu.len());
        let x = g.values();
        let mut out = vec![0.0; x.len()];
        for k in 0..nv {
            let b = self.stream[k];
            for i in 0..n {
                let up = if self.mu[k] > 0.0 {
                    (i + n - 1) % n
                } else {
                    (i + 1) % n
                };
                out[i * nv + k] = (1.0 + b + self.coupling[i]) * x[i * nv + k] - b * x[up * nv + k];
            }
        }
        KineticField::from_values(n, nv, out)
    }

    /// `L⁻¹ g`: one upwind march per direction, closed by the periodic wrap.
    pub fn apply_l_inverse(&self, g: &KineticField) -> Result<KineticField> {
        self.check(g)?;
        let (n, nv) = (self.nx, self.mu.len());
        let x = g.values();
        let mut out = vec![0.0; x.len()];
        let mut p = vec![0.0; n];
        for k in 0..nv {
            let b = self.stream[k];
            let order: Box<dyn Iterator<Item = usize>> = if self.mu[k] > 0.0 {
                Box::new(0..n)
            } else {
                Box::new((0..n).rev())
            };
            // f_i = p_i + q_i f_last, where `last` is the final cell of the march.
            let mut prev = 0.0;
            let mut last = 0;
            for (step, i) in order.enumerate() {
                let a = 1.0 + b + self.coupling[i];
                let pi = if step == 0 {
                    x[i * nv + k] / a
                } else {
                    (x[i * nv + k] + b * prev) / a
                };
                p[i] = pi;
                prev = pi;
                last = i;
            }
            let f_last = p[last] / (1.0 - self.wrap[k]);
            let mut q = 1.0;
            let order: Box<dyn Iterator<Item = usize>> = if self.mu[k] > 0.0 {
                Box::new(0..n)
            } else {
                Box::new((0..n).rev())
            };
            for i in order {
                q *= b / (1.0 + b + self.coupling[i]);
                out[i * nv + k] = p[i] + q * f_last;
            }
        }
        KineticField::from_values(n, nv, out)
    }

    fn embed(&self, rho: &[f64], f_n: &KineticField) -> KineticField {
        let nv = self.mu.len();
        let mut v = f_n.values().to_vec();
        for i in 0..self.nx {
            let s = self.coupling[i] * rho[i];
            for x in &mut v[i * nv..(i + 1) * nv] {
                *x += s;
            }
        }
        KineticField::from_values(self.nx, nv, v).expect("finite source")
    }

    fn density(&self, f: &KineticField) -> Vec<f64> {
        (0..self.nx)
            .map(|i| weighted_sum(&self.weights, f.cell(i)))
            .collect()
    }

    /// Solves `(I + D) δ = r` for the acceleration step.
    pub fn dsa_solve(&self, variant: DsaVariant, r: &[f64]) -> Result<Vec<f64>> {
        check_len(self.nx, r.len())?;
        let n = self.nx;
        let cell: Vec<f64> = match variant {
            DsaVariant::Consistent => {
                let s1: f64 = self
                    .mu
                    .iter()
                    .zip(&self.weights)
                    .filter(|(m, _)| **m > 0.0)
                    .map(|(m, w)| m * w)
                    .sum();
                let m2: f64 = self
                    .mu
                    .iter()
                    .zip(&self.weights)
                    .map(|(m, w)| m * m * w)
                    .sum();
                let h = self.dt / self.epsilon;
                let num: Vec<f64> = self
                    .coupling
                    .iter()
                    .map(|c| h * s1 / self.dx * c / (1.0 + c))
                    .collect();
                let phys: Vec<f64> = self
                    .coupling
                    .iter()
                    .map(|c| h * h * m2 * c / ((1.0 + c) * (1.0 + c)) / (self.dx * self.dx))
                    .collect();
                num.iter().zip(&phys).map(|(a, b)| a + b).collect()
            }
            DsaVariant::DiffusionLimit => self
                .sigma
                .iter()
                .map(|&s| {
                    if s > 0.0 {
                        Ok(self.dt / (3.0 * s) / (self.dx * self.dx))
                    } else {
                        Err(Error::Singular("diffusion-limit DSA needs σ > 0".into()))
                    }
                })
                .collect::<Result<_>>()?,
        };
        let face: Vec<f64> = (0..n)
            .map(|i| 0.5 * (cell[i] + cell[(i + 1) % n]))
            .collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let (ke, kw) = (face[i], face[(i + n - 1) % n]);
            lower[i] = -kw;
            upper[i] = -ke;
            diag[i] = 1.0 + ke + kw;
        }
        solve_cyclic_tridiagonal(&lower, &diag, &upper, r)
    }
}

/// Free-function form of [`SweepOperator::apply_l_inverse`].
pub fn apply_l_inverse(g: &KineticField, sweep: &SweepOperator) -> Result<KineticField> {
    sweep.apply_l_inverse(g)
}

/// One source iteration: `f = L⁻¹(cρ + fⁿ)`, `ρ' = ⟨f⟩`.
pub fn si_iterate(
    f_n: &KineticField,
    rho: &DensityField,
    sweep: &SweepOperator,
) -> Result<(KineticField, DensityField)> {
    check_len(sweep.nx, rho.len())?;
    sweep.check(f_n)?;
    let f = sweep.apply_l_inverse(&sweep.embed(rho.values(), f_n))?;
    let r = sweep.density(&f);
    Ok((f, DensityField::new(r)))
}

/// One SI-DSA iteration: a transport sweep followed by the diffusion
/// correction `(I + D)δ = c(ρ^{l+½} − ρ^l)`.
pub fn si_dsa_step(
    f_n: &KineticField,
    rho: &DensityField,
    sweep: &SweepOperator,
    variant: DsaVariant,
) -> Result<(KineticField, DensityField)> {
    let (f, half) = si_iterate(f_n, rho, sweep)?;
    let r: Vec<f64> = half
        .values()
        .iter()
        .zip(rho.values())
        .zip(&sweep.coupling)
        .map(|((a, b), c)| c * (a - b))
        .collect();
    let delta = sweep.dsa_solve(variant, &r)?;
    let next = half
        .values()
        .iter()
        .zip(&delta)
        .map(|(a, d)| a + d)
        .collect();
    Ok((f, DensityField::new(next)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub iterations: usize,
    pub converged: bool,
    /// `max|ρ^{l+1} − ρ^l| / max|ρ^{l+1}|` per iteration.
    pub update_history: Vec<f64>,
}

/// Fixed-point driver shared by SI and SI-DSA.
pub fn solve_fixed_point(
    f_n: &KineticField,
    sweep: &SweepOperator,
    acceleration: Option<DsaVariant>,
    tol: f64,
    max_iter: usize,
) -> Result<(KineticField, DensityField, BaselineReport)> {
    sweep.check(f_n)?;
    let mut rho = DensityField::new(sweep.density(f_n));
    let mut f = f_n.clone();
    let mut report = BaselineReport {
        iterations: 0,
        converged: false,
        update_history: Vec::new(),
    };
    for it in 1..=max_iter {
        let (g, next) = match acceleration {
            None => si_iterate(f_n, &rho, sweep)?,
            Some(v) => si_dsa_step(f_n, &rho, sweep, v)?,
        };
        let scale = next
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let diff = next
            .values()
            .iter()
            .zip(rho.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        report.iterations = it;
        report.update_history.push(diff);
        f = g;
        rho = next;
        if !diff.is_finite() {
            break;
        }
        // Without coupling the first sweep is already the solution.
        if diff <= tol || sweep.coupling.iter().all(|c| *c == 0.0) {
            report.converged = true;
            break;
        }
    }
    if report.converged && acceleration.is_some() {
        // The returned kinetic field must be consistent with the final density.
        f = sweep.apply_l_inverse(&sweep.embed(rho.values(), f_n))?;
    }
    Ok((f, rho, report))
}

/// Asymptotic error contraction of SI (or SI-DSA) estimated by power
/// iteration on the homogeneous error equation.
pub fn measure_contraction(
    sweep: &SweepOperator,
    acceleration: Option<DsaVariant>,
    iterations: usize,
) -> Result<f64> {
    let n = sweep.nx;
    let nv = sweep.mu.len();
    let zero = KineticField::zeros(n, nv);
    let mut e: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            (2.0 * std::f64::consts::PI * x).cos() + 0.5 * (6.0 * x).sin() + 0.1
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut log_sum = 0.0;
    let tail = (iterations / 4).max(1);
    for it in 0..iterations {
        let before = norm(&e);
        let rho = DensityField::new(e.iter().map(|x| x / before).collect());
        let (_, next) = match acceleration {
            None => si_iterate(&zero, &rho, sweep)?,
            Some(v) => si_dsa_step(&zero, &rho, sweep, v)?,
        };
        e = next.into_values();
        let ratio = norm(&e);
        if ratio == 0.0 || !ratio.is_finite() {
            return Ok(ratio);
        }
        if it + tail >= iterations {
            log_sum += ratio.ln();
        }
    }
    Ok((log_sum / tail as f64).exp())
}

/// Solves `M(I − ⟨L⁻¹ cE·⟩)ρ = M⟨L⁻¹fⁿ⟩` by GMRES, where
/// `M = I + (I + D)⁻¹c` is the DSA preconditioner, then reconstructs
/// `f = L⁻¹(cρ + fⁿ)`. `preconditioned = false` drops `M`.
pub fn dsa_krylov_solve(
    f_n: &KineticField,
    sweep: &SweepOperator,
    opts: &KrylovOptions,
    preconditioned: bool,
) -> Result<(DensityField, KineticField, KrylovReport)> {
    sweep.check(f_n)?;
    let n = sweep.nx;
    let nv = sweep.mu.len();
    let zero = KineticField::zeros(n, nv);
    let rhs = sweep.density(&sweep.apply_l_inverse(f_n)?);
    let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        let f = sweep
            .apply_l_inverse(&sweep.embed(x, &zero))
            .expect("shape checked above");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = x[i] - weighted_sum(&sweep.weights, f.cell(i));
        }
    });
    let pre = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        let cx: Vec<f64> = x.iter().zip(&sweep.coupling).map(|(a, c)| a * c).collect();
        let d = sweep
            .dsa_solve(DsaVariant::Consistent, &cx)
            .expect("diagonally dominant diffusion system");
        for i in 0..n {
            y[i] = x[i] + d[i];
        }
    });
    let weights = vec![sweep.dx; n];
    let m: Option<&dyn crate::krylov::LinearOperator> =
        if preconditioned { Some(&pre) } else { None };
    let (rho, report) = gmres_solve(&op, m, &rhs, None, &weights, opts)?;
    if !report.converged {
        return Err(Error::NotConverged(format!(
            "density system after {} iterations: {}",
            report.iterations,
            report.note.clone().unwrap_or_default()
        )));
    }
    let f = sweep.apply_l_inverse(&sweep.embed(&rho, f_n))?;
    Ok((DensityField::new(rho), f, report))
}
