use crate::cross_section::Problem;
use crate::error::Result;
use crate::field::KineticField;
use crate::operators::even::directional_derivative;
use crate::operators::SchemeScalars;

/// `C g = ε (Ω·∇) g` with centred differences, on the full node set.
pub fn apply_streaming(
    g: &KineticField,
    problem: &Problem,
    s: &SchemeScalars,
) -> Result<KineticField> {
    g.check_shape(problem.n_cells(), problem.n_nodes())?;
    let q = &problem.quadrature;
    let mut out = directional_derivative(&problem.mesh, q.xi(), q.eta(), g.values());
    let eps = s.epsilon();
    out.iter_mut().for_each(|v| *v *= eps);
    KineticField::from_values(problem.n_cells(), problem.n_nodes(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSectionModel;
    use crate::mesh::SpatialMesh;
    use crate::quadrature::AngularQuadrature;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_sine() {
        let mesh = SpatialMesh::slab(0.0, 2.0, 300).unwrap();
        let q = AngularQuadrature::gauss(6).unwrap();
        let sig = CrossSectionModel::constant(&mesh, 1.0).unwrap();
        let p = Problem::new(mesh, q, sig).unwrap();
        let s = SchemeScalars::new(1.0, 0.1).unwrap();
        let g = KineticField::from_fn(&p.mesh, &p.quadrature, |x, _, _, _| (PI * x).sin());
        let c = apply_streaming(&g, &p, &s).unwrap();
        let dx = p.mesh.dx();
        for cell in 0..p.n_cells() {
            let (x, _) = p.mesh.center(cell);
            for k in 0..6 {
                let want = p.quadrature.xi()[k] * PI * (PI * x).cos();
                assert!((c.get(cell, k) - want).abs() < PI.powi(3) * dx * dx);
            }
        }
        let flat = KineticField::from_fn(&p.mesh, &p.quadrature, |_, _, mu, _| mu);
        let c = apply_streaming(&flat, &p, &s).unwrap();
        assert!(c.values().iter().all(|v| v.abs() < 1e-13));
    }
}
