//! Scattering cross sections: isotropic `σ(x)` or a low-rank anisotropic
//! kernel scaled by `σ₀(x)`.

use crate::error::{check_len, Error, Result};
use crate::mesh::SpatialMesh;
use crate::quadrature::{weighted_sum, AngularQuadrature};

/// Pre-diagonalised scattering kernel `Σ_m ξ_m v_m v_mᵀ diag(w)`.
///
/// `eigenvectors[0]` is the constant vector with `ξ_1 = 1`; the vectors are
/// orthonormal in the `w`-weighted inner product of the full quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankKernel {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

impl LowRankKernel {
    pub fn new(
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<Vec<f64>>,
        quad: &AngularQuadrature,
    ) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != eigenvectors.len() {
            return Err(Error::invalid(
                "kernel needs matching, non-empty eigenvalue and eigenvector lists",
            ));
        }
        if (eigenvalues[0] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("leading kernel eigenvalue must be 1"));
        }
        if let Some(m) = eigenvalues.iter().skip(1).position(|x| x.abs() >= 1.0) {
            return Err(Error::invalid(format!(
                "kernel eigenvalue {} must lie in (-1, 1)",
                m + 2
            )));
        }
        let w = quad.weights();
        for v in &eigenvectors {
            check_len(w.len(), v.len())?;
        }
        let v1 = &eigenvectors[0];
        if v1.iter().any(|x| (x - v1[0]).abs() > 1e-12) {
            return Err(Error::invalid("first kernel eigenvector must be constant"));
        }
        for (i, vi) in eigenvectors.iter().enumerate() {
            for (j, vj) in eigenvectors.iter().enumerate().skip(i) {
                let g: f64 = w.iter().zip(vi).zip(vj).map(|((w, a), b)| w * a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "kernel eigenvectors {} and {} are not w-orthonormal (inner product {g})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Kernel `1 + Ω·Ω'` on the given quadrature.
    ///
    /// The eigenvalues of the linear modes are the discrete second moments,
    /// so the projector is exact on the quadrature (about 1/3 in a slab and
    /// 1/2 on the circle).
    pub fn linear(quad: &AngularQuadrature) -> Result<Self> {
        let w = quad.weights();
        let mut eigenvalues = vec![1.0];
        let mut eigenvectors = vec![vec![1.0; quad.len()]];
        let mut axes: Vec<&[f64]> = vec![quad.xi()];
        if quad.is_circle() {
            axes.push(quad.eta());
        }
        for a in axes {
            let m2 = weighted_sum(w, &a.iter().map(|x| x * x).collect::<Vec<_>>());
            let norm = m2.sqrt();
            eigenvalues.push(m2);
            eigenvectors.push(a.iter().map(|x| x / norm).collect());
        }
        Self::new(eigenvalues, eigenvectors, quad)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrossSectionModel {
    Isotropic {
        sigma: Vec<f64>,
    },
    Anisotropic {
        sigma0: Vec<f64>,
        kernel: LowRankKernel,
    },
}

impl CrossSectionModel {
    pub fn isotropic(sigma: Vec<f64>) -> Result<Self> {
        check_sigma(&sigma)?;
        Ok(Self::Isotropic { sigma })
    }

    pub fn anisotropic(sigma0: Vec<f64>, kernel: LowRankKernel) -> Result<Self> {
        check_sigma(&sigma0)?;
        Ok(Self::Anisotropic { sigma0, kernel })
    }

    /// Samples `σ(x, y)` at cell centres.
    pub fn isotropic_from_fn(mesh: &SpatialMesh, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::isotropic(sample(mesh, f))
    }

    pub fn constant(mesh: &SpatialMesh, sigma: f64) -> Result<Self> {
        Self::isotropic(vec![sigma; mesh.n_cells()])
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self, Self::Isotropic { .. })
    }

    /// Per-cell total cross section (`σ` or `σ₀`).
    pub fn sigma(&self) -> &[f64] {
        match self {
            Self::Isotropic { sigma } => sigma,
            Self::Anisotropic { sigma0, .. } => sigma0,
        }
    }

    pub fn kernel(&self) -> Option<&LowRankKernel> {
        match self {
            Self::Isotropic { .. } => None,
            Self::Anisotropic { kernel, .. } => Some(kernel),
        }
    }
}

pub(crate) fn sample(mesh: &SpatialMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..mesh.n_cells())
        .map(|c| {
            let (x, y) = mesh.center(c);
            f(x, y)
        })
        .collect()
}

fn check_sigma(sigma: &[f64]) -> Result<()> {
    if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid(format!(
            "cross section in cell {i} must be finite and non-negative, got {}",
            sigma[i]
        )));
    }
    Ok(())
}

/// Mesh, angular quadrature and cross section of one transport problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: SpatialMesh,
    pub quadrature: AngularQuadrature,
    pub cross_section: CrossSectionModel,
}

impl Problem {
    pub fn new(
        mesh: SpatialMesh,
        quadrature: AngularQuadrature,
        cross_section: CrossSectionModel,
    ) -> Result<Self> {
        check_len(mesh.n_cells(), cross_section.sigma().len())?;
        if mesh.is_planar() != quadrature.is_circle() {
            return Err(Error::Unsupported(
                "planar meshes need a circle quadrature and slabs a line quadrature".into(),
            ));
        }
        if let Some(k) = cross_section.kernel() {
            check_len(quadrature.len(), k.eigenvectors()[0].len())?;
        }
        Ok(Self {
            mesh,
            quadrature,
            cross_section,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn n_nodes(&self) -> usize {
        self.quadrature.len()
    }

    pub fn n_half(&self) -> usize {
        self.quadrature.half().len()
    }
}
