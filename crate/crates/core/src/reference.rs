//! Independent solution paths: an explicit upwind kinetic solver and
//! backward-Euler diffusion solvers for the small-ε limit.

use crate::cross_section::Problem;
use crate::error::{check_len, Error, Result};
use crate::field::{DensityField, KineticField};
use crate::krylov::{pcg_solve, FnOperator, KrylovOptions};
use crate::linalg::solve_cyclic_tridiagonal;
use crate::mesh::SpatialMesh;
use crate::operators::apply_aniso_projector;

/// Largest step admitted by [`explicit_step`].
pub fn explicit_max_dt(problem: &Problem, epsilon: f64) -> f64 {
    let q = &problem.quadrature;
    let m = &problem.mesh;
    let rate = q
        .xi()
        .iter()
        .zip(q.eta())
        .map(|(x, y)| x.abs() / m.dx() + if m.is_planar() { y.abs() / m.dy() } else { 0.0 })
        .fold(0.0, f64::max);
    let sigma_max = problem
        .cross_section
        .sigma()
        .iter()
        .copied()
        .fold(0.0, f64::max);
    // Forward Euler with upwinding is monotone when the diagonal stays
    // non-negative: dt (rate/ε + σ/ε²) ≤ 1.
    let total = rate / epsilon + sigma_max / (epsilon * epsilon);
    if total > 0.0 {
        0.9 / total
    } else {
        f64::INFINITY
    }
}

/// Forward Euler with first-order upwind transport:
/// `f' = f − (Δt/ε) Ω·∇_up f + (Δt σ/ε²)(Pf − f)`, where `Pf = ρ` for
/// isotropic scattering and the kernel projection otherwise.
pub fn explicit_step(
    f: &KineticField,
    problem: &Problem,
    epsilon: f64,
    dt: f64,
) -> Result<KineticField> {
    if !(epsilon > 0.0 && dt > 0.0) {
        return Err(Error::invalid("epsilon and dt must be positive"));
    }
    f.check_shape(problem.n_cells(), problem.n_nodes())?;
    let max_dt = explicit_max_dt(problem, epsilon);
    if dt > max_dt {
        return Err(Error::Cfl { dt, max_dt });
    }
    let m = &problem.mesh;
    let q = &problem.quadrature;
    let nv = q.len();
    let rho = f.density(q)?;
    let sigma = problem.cross_section.sigma();
    let x = f.values();
    let mut out = vec![0.0; x.len()];
    let (ax, ay) = (dt / (epsilon * m.dx()), dt / (epsilon * m.dy()));
    for c in 0..m.n_cells() {
        let (e, w) = (m.east(c), m.west(c));
        let (n, s) = (m.north(c), m.south(c));
        let coll = dt * sigma[c] / (epsilon * epsilon);
        let gain = match problem.cross_section.kernel() {
            None => vec![rho.values()[c]; nv],
            Some(kernel) => apply_aniso_projector(f.cell(c), kernel, q.weights())?,
        };
        for k in 0..nv {
            let v = x[c * nv + k];
            let xi = q.xi()[k];
            let mut flux = if xi > 0.0 {
                xi * ax * (v - x[w * nv + k])
            } else {
                xi * ax * (x[e * nv + k] - v)
            };
            if m.is_planar() {
                let eta = q.eta()[k];
                flux += if eta > 0.0 {
                    eta * ay * (v - x[s * nv + k])
                } else {
                    eta * ay * (x[n * nv + k] - v)
                };
            }
            out[c * nv + k] = v - flux + coll * (gain[k] - v);
        }
    }
    KineticField::from_values(m.n_cells(), nv, out)
}

/// Backward-Euler step of the diffusion limit that matches `problem`:
/// `1/(3σ)` on a slab, `1/(2σ₀)` for the kernel `1 + μμ'`, and `1/(2σ)` on
/// a plane. `σ` is floored at `sigma_floor` so that vanishing cross sections
/// stay solvable.
pub fn diffusion_reference_step(
    rho: &DensityField,
    problem: &Problem,
    dt: f64,
    sigma_floor: f64,
) -> Result<DensityField> {
    let sigma: Vec<f64> = problem
        .cross_section
        .sigma()
        .iter()
        .map(|s| s.max(sigma_floor))
        .collect();
    let mesh = &problem.mesh;
    match (mesh.is_planar(), problem.cross_section.is_isotropic()) {
        (true, true) => diffusion_step_2d(rho, &sigma, dt, mesh),
        (false, true) => diffusion_step_1d(rho, &sigma, dt, mesh),
        (false, false) => diffusion_step_aniso(rho, &sigma, dt, mesh),
        (true, false) => Err(Error::Unsupported(
            "no diffusion reference for planar anisotropic scattering".into(),
        )),
    }
}

fn face_coefficients(mesh: &SpatialMesh, kappa: &[f64], along_x: bool) -> Vec<f64> {
    (0..mesh.n_cells())
        .map(|c| {
            let nb = if along_x { mesh.east(c) } else { mesh.north(c) };
            0.5 * (kappa[c] + kappa[nb])
        })
        .collect()
}

fn kappa_from_sigma(sigma: &[f64], scale: f64) -> Result<Vec<f64>> {
    sigma
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s > 0.0 && s.is_finite() {
                Ok(scale / s)
            } else {
                Err(Error::Singular(format!(
                    "diffusion coefficient undefined where σ = {s} (cell {i})"
                )))
            }
        })
        .collect()
}

/// Backward Euler for `ρ_t = ∂x(κ ∂x ρ)` on a periodic slab with face
/// values of `κ` averaged arithmetically; one cyclic tridiagonal solve.
pub fn diffusion_step_with(
    rho: &DensityField,
    kappa: &[f64],
    dt: f64,
    mesh: &SpatialMesh,
) -> Result<DensityField> {
    if mesh.is_planar() {
        return Err(Error::Unsupported("slab diffusion on a planar mesh".into()));
    }
    let n = mesh.nx();
    check_len(n, rho.len())?;
    check_len(n, kappa.len())?;
    let k = face_coefficients(mesh, kappa, true);
    let r = dt / (mesh.dx() * mesh.dx());
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let (ke, kw) = (k[i], k[(i + n - 1) % n]);
        lower[i] = -r * kw;
        upper[i] = -r * ke;
        diag[i] = 1.0 + r * (ke + kw);
    }
    solve_cyclic_tridiagonal(&lower, &diag, &upper, rho.values()).map(DensityField::new)
}

/// Backward Euler for `ρ_t = ∂x((1/(3σ)) ∂x ρ)`.
pub fn diffusion_step_1d(
    rho: &DensityField,
    sigma: &[f64],
    dt: f64,
    mesh: &SpatialMesh,
) -> Result<DensityField> {
    diffusion_step_with(rho, &kappa_from_sigma(sigma, 1.0 / 3.0)?, dt, mesh)
}

/// Backward Euler for `ρ_t = ∂x((1/(2σ₀)) ∂x ρ)`, the limit of the
/// kernel `1 + μμ'`.
pub fn diffusion_step_aniso(
    rho: &DensityField,
    sigma0: &[f64],
    dt: f64,
    mesh: &SpatialMesh,
) -> Result<DensityField> {
    diffusion_step_with(rho, &kappa_from_sigma(sigma0, 0.5)?, dt, mesh)
}

/// Backward Euler for `ρ_t = ½∇·(σ⁻¹∇ρ)` with the five-point flux stencil,
/// solved by Jacobi-preconditioned CG.
pub fn diffusion_step_2d(
    rho: &DensityField,
    sigma: &[f64],
    dt: f64,
    mesh: &SpatialMesh,
) -> Result<DensityField> {
    if !mesh.is_planar() {
        return Err(Error::Unsupported("planar diffusion on a slab mesh".into()));
    }
    let n = mesh.n_cells();
    check_len(n, rho.len())?;
    check_len(n, sigma.len())?;
    let kappa = kappa_from_sigma(sigma, 0.5)?;
    let kx = face_coefficients(mesh, &kappa, true);
    let ky = face_coefficients(mesh, &kappa, false);
    let (rx, ry) = (dt / (mesh.dx() * mesh.dx()), dt / (mesh.dy() * mesh.dy()));
    let diag: Vec<f64> = (0..n)
        .map(|c| 1.0 + rx * (kx[c] + kx[mesh.west(c)]) + ry * (ky[c] + ky[mesh.south(c)]))
        .collect();
    let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        for c in 0..n {
            let (e, w, nn, s) = (mesh.east(c), mesh.west(c), mesh.north(c), mesh.south(c));
            y[c] = diag[c] * x[c]
                - rx * (kx[c] * x[e] + kx[w] * x[w])
                - ry * (ky[c] * x[nn] + ky[s] * x[s]);
        }
    });
    let pre = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        for c in 0..n {
            y[c] = x[c] / diag[c];
        }
    });
    let opts = KrylovOptions {
        tol: 1e-13,
        max_iter: 10 * n,
        restart: 0,
    };
    let (x, rep) = pcg_solve(
        &op,
        &pre,
        rho.values(),
        Some(rho.values()),
        &vec![1.0; n],
        &opts,
    )?;
    if !rep.converged {
        return Err(Error::NotConverged(format!(
            "planar diffusion solve: {}",
            rep.note.unwrap_or_default()
        )));
    }
    Ok(DensityField::new(x))
}
