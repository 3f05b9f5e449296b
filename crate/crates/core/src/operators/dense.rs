//! Explicit matrices of the discrete operators for small problems.
//!
//! Assembly goes through spatial difference matrices and per-node
//! coefficients rather than through the matrix-free kernels, so the two
//! can be checked against each other.

use nalgebra::DMatrix;

use crate::cross_section::Problem;
use crate::error::{Error, Result};
use crate::mesh::SpatialMesh;
use crate::operators::{EvenStencil, SchemeScalars};

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseKind {
    /// Even-parity operator `A` on the half grid.
    EvenA(EvenStencil),
    /// Collision shift `B` on the half grid.
    ShiftHalf,
    /// Collision shift `B` on the full grid.
    ShiftFull,
    /// Streaming `C = ε(Ω·∇)` on the full grid.
    Streaming,
    /// Anisotropic shift `B^σ` on the full grid.
    AnisoShift,
    /// Unscaled centred `(Ω·∇)` on the half grid.
    DirectionalHalf,
}

impl DenseKind {
    fn on_half(self) -> bool {
        matches!(
            self,
            Self::EvenA(_) | Self::ShiftHalf | Self::DirectionalHalf
        )
    }
}

pub fn dense_assemble(
    kind: DenseKind,
    problem: &Problem,
    s: &SchemeScalars,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let nc = problem.n_cells();
    let (xi, eta, w): (Vec<f64>, Vec<f64>, Vec<f64>) = if kind.on_half() {
        let h = problem.quadrature.half();
        (h.xi.clone(), h.eta.clone(), h.weights.clone())
    } else {
        let q = &problem.quadrature;
        (q.xi().to_vec(), q.eta().to_vec(), q.weights().to_vec())
    };
    let nv = xi.len();
    let rows = nc * nv;
    if rows > cap {
        return Err(Error::DenseCapExceeded { rows, cap });
    }
    let mesh = &problem.mesh;
    let sigma = problem.cross_section.sigma();
    let mut out = DMatrix::zeros(rows, rows);
    match kind {
        DenseKind::EvenA(stencil) => {
            if !problem.cross_section.is_isotropic() {
                return Err(Error::Unsupported(
                    "A is defined for isotropic scattering".into(),
                ));
            }
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                nc,
                sigma.iter().map(|&x| s.even_coefficient(x)),
            ));
            let (cx, cy) = (centered(mesh, true), centered(mesh, false));
            let parts = match stencil {
                EvenStencil::Compact => {
                    let (fx, fy) = (forward(mesh, true), forward(mesh, false));
                    let dfx = face_average(mesh, &d, true);
                    let dfy = face_average(mesh, &d, false);
                    Some((
                        fx.transpose() * dfx * &fx,
                        fy.transpose() * dfy * &fy,
                        cx.transpose() * &d * &cy + cy.transpose() * &d * &cx,
                    ))
                }
                EvenStencil::Centered => None,
            };
            for k in 0..nv {
                let block = match &parts {
                    Some((axx, ayy, axy)) => {
                        axx * (xi[k] * xi[k]) + ayy * (eta[k] * eta[k]) + axy * (xi[k] * eta[k])
                    }
                    None => {
                        let g = &cx * xi[k] + &cy * eta[k];
                        g.transpose() * &d * g
                    }
                };
                scatter(&mut out, &block, k, nv);
            }
        }
        DenseKind::ShiftHalf | DenseKind::ShiftFull => {
            for (c, &sig) in sigma.iter().enumerate() {
                for i in 0..nv {
                    out[(c * nv + i, c * nv + i)] += s.shift() + sig;
                    for j in 0..nv {
                        out[(c * nv + i, c * nv + j)] -= sig * w[j];
                    }
                }
            }
        }
        DenseKind::AnisoShift => {
            let kernel = problem
                .cross_section
                .kernel()
                .ok_or_else(|| Error::Unsupported("B^σ needs an anisotropic kernel".into()))?;
            let mut p = DMatrix::<f64>::zeros(nv, nv);
            for (x, v) in kernel.eigenvalues().iter().zip(kernel.eigenvectors()) {
                for i in 0..nv {
                    for j in 0..nv {
                        p[(i, j)] += x * v[i] * v[j] * w[j];
                    }
                }
            }
            for (c, &sig) in sigma.iter().enumerate() {
                for i in 0..nv {
                    out[(c * nv + i, c * nv + i)] += s.shift() + sig;
                    for j in 0..nv {
                        out[(c * nv + i, c * nv + j)] -= sig * p[(i, j)];
                    }
                }
            }
        }
        DenseKind::Streaming | DenseKind::DirectionalHalf => {
            let scale = if kind == DenseKind::Streaming {
                s.epsilon()
            } else {
                1.0
            };
            let (cx, cy) = (centered(mesh, true), centered(mesh, false));
            for k in 0..nv {
                let block = (&cx * xi[k] + &cy * eta[k]) * scale;
                scatter(&mut out, &block, k, nv);
            }
        }
    }
    Ok(out)
}

/// Places `block ⊗ e_k e_kᵀ` into `out`.
fn scatter(out: &mut DMatrix<f64>, block: &DMatrix<f64>, k: usize, nv: usize) {
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            let v = block[(i, j)];
            if v != 0.0 {
                out[(i * nv + k, j * nv + k)] += v;
            }
        }
    }
}

/// Forward difference onto faces: row `c` is the face between `c` and its
/// east (or north) neighbour. Zero along y for a slab.
fn forward(mesh: &SpatialMesh, along_x: bool) -> DMatrix<f64> {
    let n = mesh.n_cells();
    let mut m = DMatrix::zeros(n, n);
    if !along_x && !mesh.is_planar() {
        return m;
    }
    let h = if along_x { mesh.dx() } else { mesh.dy() };
    for c in 0..n {
        let nb = if along_x { mesh.east(c) } else { mesh.north(c) };
        m[(c, nb)] += 1.0 / h;
        m[(c, c)] -= 1.0 / h;
    }
    m
}

fn centered(mesh: &SpatialMesh, along_x: bool) -> DMatrix<f64> {
    let n = mesh.n_cells();
    let mut m = DMatrix::zeros(n, n);
    if !along_x && !mesh.is_planar() {
        return m;
    }
    let h = if along_x { mesh.dx() } else { mesh.dy() };
    for c in 0..n {
        let (p, q) = if along_x {
            (mesh.east(c), mesh.west(c))
        } else {
            (mesh.north(c), mesh.south(c))
        };
        m[(c, p)] += 0.5 / h;
        m[(c, q)] -= 0.5 / h;
    }
    m
}

fn face_average(mesh: &SpatialMesh, d: &DMatrix<f64>, along_x: bool) -> DMatrix<f64> {
    let n = mesh.n_cells();
    DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            return 0.0;
        }
        let nb = if along_x { mesh.east(i) } else { mesh.north(i) };
        0.5 * (d[(i, i)] + d[(nb, nb)])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSectionModel;
    use crate::quadrature::AngularQuadrature;

    #[test]
    fn cap_is_enforced() {
        let mesh = SpatialMesh::slab(0.0, 1.0, 100).unwrap();
        let q = AngularQuadrature::midpoint(100).unwrap();
        let sig = CrossSectionModel::constant(&mesh, 1.0).unwrap();
        let p = Problem::new(mesh, q, sig).unwrap();
        let s = SchemeScalars::new(1.0, 1.0).unwrap();
        let r = dense_assemble(DenseKind::ShiftFull, &p, &s, DEFAULT_DENSE_CAP);
        assert!(matches!(
            r,
            Err(Error::DenseCapExceeded {
                rows: 10000,
                cap: 4096
            })
        ));
    }

    #[test]
    fn shift_block_spectrum() {
        for nv in [4usize, 8, 16] {
            let mesh = SpatialMesh::slab(0.0, 1.0, 1).unwrap();
            let q = AngularQuadrature::gauss(nv).unwrap();
            let sig = CrossSectionModel::constant(&mesh, 1.0).unwrap();
            let p = Problem::new(mesh, q.clone(), sig).unwrap();
            let s = SchemeScalars::new(0.2, 0.1).unwrap();
            let b = dense_assemble(DenseKind::ShiftFull, &p, &s, 64).unwrap();
            // Symmetrise with diag(√w) before the symmetric eigensolve.
            let r = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                nv,
                q.weights().iter().map(|w| w.sqrt()),
            ));
            let ri = r.clone().try_inverse().unwrap();
            let sym = &r * b * ri;
            let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            assert!((ev[0] - s.shift()).abs() < 1e-12);
            for v in &ev[1..] {
                assert!((v - (1.0 + s.shift())).abs() < 1e-12);
            }
        }
    }
}
