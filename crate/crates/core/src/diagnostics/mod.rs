//! Norms, mass, asymptotic-preserving distances, stability monitoring and
//! condition numbers.

pub mod condition;

pub use condition::{
    calibration_sweep, condition_number, dense_condition, ConditionMethod, ConditionReport,
    ConditionTarget, DtRule,
};

use crate::cross_section::Problem;
use crate::error::{check_len, Result};
use crate::field::{DensityField, KineticField};
use crate::krylov::KrylovReport;
use crate::mesh::SpatialMesh;
use crate::stepper::{Observer, SimulationState};

/// `sqrt(Σ_i Σ_k |f_ik − ρ_i|² |cell| Δμ)` with `Δμ = 2/N` (slab) or `2π/N`.
pub fn ap_distance_f_rho(f: &KineticField, problem: &Problem) -> Result<f64> {
    f.check_shape(problem.n_cells(), problem.n_nodes())?;
    let rho = f.density(&problem.quadrature)?;
    let mut sum = 0.0;
    for c in 0..f.n_cells() {
        let r = rho.values()[c];
        sum += f.cell(c).iter().map(|v| (v - r) * (v - r)).sum::<f64>();
    }
    Ok((sum * problem.mesh.cell_volume() * problem.quadrature.cell_measure()).sqrt())
}

/// `sqrt(Σ_i |a_i − b_i|² |cell|)`.
pub fn rho_distance(a: &DensityField, b: &DensityField, mesh: &SpatialMesh) -> Result<f64> {
    check_len(mesh.n_cells(), a.len())?;
    check_len(mesh.n_cells(), b.len())?;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum * mesh.cell_volume()).sqrt())
}

/// `sqrt(Σ_i Σ_k w_k f_ik² |cell|)`.
pub fn weighted_l2_norm(f: &KineticField, problem: &Problem) -> Result<f64> {
    f.check_shape(problem.n_cells(), problem.n_nodes())?;
    let w = problem.quadrature.weights();
    let sum: f64 = (0..f.n_cells())
        .map(|c| f.cell(c).iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>())
        .sum();
    Ok((sum * problem.mesh.cell_volume()).sqrt())
}

/// `Σ_i ρ_i |cell|`.
pub fn total_mass(rho: &DensityField, mesh: &SpatialMesh) -> Result<f64> {
    check_len(mesh.n_cells(), rho.len())?;
    Ok(rho.values().iter().sum::<f64>() * mesh.cell_volume())
}

pub fn kinetic_mass(f: &KineticField, problem: &Problem) -> Result<f64> {
    total_mass(&f.density(&problem.quadrature)?, &problem.mesh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    pub step: usize,
    pub t: f64,
    pub norm: f64,
    pub mass: f64,
    /// The norm grew by more than the tolerance over the previous record.
    pub flagged: bool,
}

/// Records the weighted norm and mass after every step and flags growth.
#[derive(Debug, Clone)]
pub struct StabilityMonitor {
    pub records: Vec<StabilityRecord>,
    pub rel_tol: f64,
    error: Option<String>,
}

impl Default for StabilityMonitor {
    fn default() -> Self {
        Self::new(1e-12)
    }
}

impl StabilityMonitor {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            records: Vec::new(),
            rel_tol,
            error: None,
        }
    }

    pub fn record(&mut self, step: usize, t: f64, norm: f64, mass: f64) {
        let flagged = self
            .records
            .last()
            .is_some_and(|p| norm > p.norm * (1.0 + self.rel_tol));
        self.records.push(StabilityRecord {
            step,
            t,
            norm,
            mass,
            flagged,
        });
    }

    /// Seeds the monitor with the initial field.
    pub fn start(&mut self, f0: &KineticField, problem: &Problem) -> Result<()> {
        self.record(
            0,
            0.0,
            weighted_l2_norm(f0, problem)?,
            kinetic_mass(f0, problem)?,
        );
        Ok(())
    }

    pub fn flags(&self) -> usize {
        self.records.iter().filter(|r| r.flagged).count()
    }

    /// Largest relative deviation of the mass from the first record.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let scale = first.mass.abs().max(f64::MIN_POSITIVE);
        self.records
            .iter()
            .map(|r| (r.mass - first.mass).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

impl Observer for StabilityMonitor {
    fn observe(&mut self, state: &SimulationState, problem: &Problem, _: &KrylovReport) {
        let measured = state
            .full_field(problem)
            .and_then(|f| Ok((weighted_l2_norm(&f, problem)?, kinetic_mass(&f, problem)?)));
        match measured {
            Ok((norm, mass)) => self.record(state.step, state.t, norm, mass),
            Err(e) => self.error = Some(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSectionModel;
    use crate::quadrature::AngularQuadrature;
    use crate::stepper::{run_simulation, SolverConfig};
    use rand::{Rng, SeedableRng};

    fn problem(nx: usize, nv: usize, len: f64) -> Problem {
        let mesh = SpatialMesh::slab(0.0, len, nx).unwrap();
        let q = AngularQuadrature::midpoint(nv).unwrap();
        let s = CrossSectionModel::constant(&mesh, 1.0).unwrap();
        Problem::new(mesh, q, s).unwrap()
    }

    #[test]
    fn ap_distance_cases() {
        let p = problem(1, 2, 1.0);
        let f = KineticField::from_values(1, 2, vec![0.0, 2.0]).unwrap();
        assert!((ap_distance_f_rho(&f, &p).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let p = problem(5, 4, 2.0);
        let f = KineticField::from_fn(&p.mesh, &p.quadrature, |x, _, _, _| x * x);
        assert_eq!(ap_distance_f_rho(&f, &p).unwrap(), 0.0);
    }

    #[test]
    fn rho_distance_cases() {
        let mesh = SpatialMesh::slab(0.0, 2.0, 2).unwrap();
        let a = DensityField::new(vec![3.0, 4.0]);
        let z = DensityField::new(vec![0.0, 0.0]);
        assert_eq!(rho_distance(&a, &z, &mesh).unwrap(), 5.0);
        assert_eq!(rho_distance(&a, &a, &mesh).unwrap(), 0.0);
        let mesh = SpatialMesh::slab(0.0, 3.0, 6).unwrap();
        let c = DensityField::new(vec![0.5; 6]);
        let z = DensityField::new(vec![0.0; 6]);
        assert!((rho_distance(&c, &z, &mesh).unwrap() - 0.5 * 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_and_mass() {
        let p = problem(10, 4, 2.0);
        let one = KineticField::from_fn(&p.mesh, &p.quadrature, |_, _, _, _| 1.0);
        assert!((weighted_l2_norm(&one, &p).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!((kinetic_mass(&one, &p).unwrap() - 2.0).abs() < 1e-14);
        let zero = KineticField::zeros(10, 4);
        assert_eq!(weighted_l2_norm(&zero, &p).unwrap(), 0.0);
        assert_eq!(kinetic_mass(&zero, &p).unwrap(), 0.0);
    }

    #[test]
    fn norm_matches_independent_summation() {
        let p = problem(13, 6, 2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..78).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = KineticField::from_values(13, 6, v.clone()).unwrap();
        // Reverse order, node-major.
        let w = p.quadrature.weights();
        let mut sum = 0.0;
        for k in (0..6).rev() {
            for c in (0..13).rev() {
                sum += v[c * 6 + k] * v[c * 6 + k] * w[k] * p.mesh.dx();
            }
        }
        assert!((weighted_l2_norm(&f, &p).unwrap() - sum.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn monitor_flags_growth_only() {
        let mut m = StabilityMonitor::default();
        m.record(0, 0.0, 1.0, 2.0);
        m.record(1, 0.1, 1.0, 2.0);
        m.record(2, 0.2, 0.9, 2.0);
        assert_eq!(m.flags(), 0);
        m.record(3, 0.3, 0.95, 2.0);
        assert_eq!(m.flags(), 1);
    }

    #[test]
    fn constant_run_is_flat() {
        let p = problem(10, 4, 2.0);
        let f0 = KineticField::from_fn(&p.mesh, &p.quadrature, |_, _, _, _| 1.0);
        let mut m = StabilityMonitor::default();
        m.start(&f0, &p).unwrap();
        run_simulation(&f0, &p, &SolverConfig::new(0.1, 0.1), 0.5, &mut [&mut m]).unwrap();
        assert_eq!(m.records.len(), 6);
        assert_eq!(m.flags(), 0);
        assert!(m.mass_drift() < 1e-12);
        let n0 = m.records[0].norm;
        assert!(m.records.iter().all(|r| (r.norm - n0).abs() < 1e-10));
    }
}
