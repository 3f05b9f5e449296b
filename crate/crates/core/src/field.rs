//! Grid functions over (cell, angular node).

use crate::error::{check_len, Error, Result};
use crate::mesh::SpatialMesh;
use crate::quadrature::{weighted_sum, AngularQuadrature};

/// Dense array of values indexed `values[cell * n_nodes + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    n_cells: usize,
    n_nodes: usize,
    values: Vec<f64>,
}

impl KineticField {
    pub fn zeros(n_cells: usize, n_nodes: usize) -> Self {
        Self {
            n_cells,
            n_nodes,
            values: vec![0.0; n_cells * n_nodes],
        }
    }

    pub fn from_values(n_cells: usize, n_nodes: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n_cells * n_nodes, values.len())?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {bad}")));
        }
        Ok(Self {
            n_cells,
            n_nodes,
            values,
        })
    }

    /// Samples `f(x, y, ξ, η)` at every cell centre and full-quadrature direction.
    pub fn from_fn(
        mesh: &SpatialMesh,
        quad: &AngularQuadrature,
        f: impl Fn(f64, f64, f64, f64) -> f64,
    ) -> Self {
        let n = quad.len();
        let mut values = Vec::with_capacity(mesh.n_cells() * n);
        for c in 0..mesh.n_cells() {
            let (x, y) = mesh.center(c);
            for k in 0..n {
                values.push(f(x, y, quad.xi()[k], quad.eta()[k]));
            }
        }
        Self {
            n_cells: mesh.n_cells(),
            n_nodes: n,
            values,
        }
    }

    /// Isotropic field equal to `rho` in every direction.
    pub fn isotropic(rho: &DensityField, n_nodes: usize) -> Self {
        let mut values = Vec::with_capacity(rho.len() * n_nodes);
        for &r in rho.values() {
            values.extend(std::iter::repeat_n(r, n_nodes));
        }
        Self {
            n_cells: rho.len(),
            n_nodes,
            values,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_nodes..(c + 1) * self.n_nodes]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.n_nodes..(c + 1) * self.n_nodes]
    }

    pub fn get(&self, c: usize, k: usize) -> f64 {
        self.values[c * self.n_nodes + k]
    }

    /// Angular averages per cell using weights `w` (full or half set).
    pub fn average_with(&self, w: &[f64]) -> Result<DensityField> {
        check_len(self.n_nodes, w.len())?;
        Ok(DensityField::new(
            (0..self.n_cells)
                .map(|c| weighted_sum(w, self.cell(c)))
                .collect(),
        ))
    }

    /// Density `ρ = ⟨f⟩` on the full quadrature.
    pub fn density(&self, quad: &AngularQuadrature) -> Result<DensityField> {
        self.average_with(quad.weights())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_shape(&self, n_cells: usize, n_nodes: usize) -> Result<()> {
        check_len(n_cells, self.n_cells)?;
        check_len(n_nodes, self.n_nodes)
    }
}

/// Per-cell density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_fn(mesh: &SpatialMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(
            (0..mesh.n_cells())
                .map(|c| {
                    let (x, y) = mesh.center(c);
                    f(x, y)
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Even and odd parity components stored on the positive half of the
/// quadrature. On a positive node `k` with antipode `k'`:
/// `f(k) = f_E + f_O` and `f(k') = f_E - f_O`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityPair {
    pub even: KineticField,
    pub odd: KineticField,
}

impl ParityPair {
    pub fn from_full(f: &KineticField, quad: &AngularQuadrature) -> Result<Self> {
        check_len(quad.len(), f.n_nodes())?;
        let half = quad.half();
        let nh = half.len();
        let mut even = KineticField::zeros(f.n_cells(), nh);
        let mut odd = KineticField::zeros(f.n_cells(), nh);
        let parity = quad.parity_map();
        for c in 0..f.n_cells() {
            let row = f.cell(c);
            for (h, &k) in half.indices.iter().enumerate() {
                let plus = row[k];
                let minus = row[parity[k]];
                even.values[c * nh + h] = 0.5 * (plus + minus);
                odd.values[c * nh + h] = 0.5 * (plus - minus);
            }
        }
        Ok(Self { even, odd })
    }

    pub fn to_full(&self, quad: &AngularQuadrature) -> Result<KineticField> {
        let half = quad.half();
        self.even.check_shape(self.odd.n_cells(), half.len())?;
        self.odd.check_shape(self.even.n_cells(), half.len())?;
        let n = quad.len();
        let nh = half.len();
        let parity = quad.parity_map();
        let mut out = KineticField::zeros(self.even.n_cells(), n);
        for c in 0..self.even.n_cells() {
            for (h, &k) in half.indices.iter().enumerate() {
                let e = self.even.values[c * nh + h];
                let o = self.odd.values[c * nh + h];
                out.values[c * n + k] = e + o;
                out.values[c * n + parity[k]] = e - o;
            }
        }
        Ok(out)
    }

    /// `ρ = Σ_half ŵ f_E`, identical to the full-quadrature average.
    pub fn density(&self, quad: &AngularQuadrature) -> Result<DensityField> {
        self.even.average_with(&quad.half().weights)
    }

    pub fn n_cells(&self) -> usize {
        self.even.n_cells()
    }
}
