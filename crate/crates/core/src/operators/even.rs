//! Even-parity elliptic operator `A = −∇·(D (Ω·∇)Ω)` with
//! `D = ε²Δt/(ε² + σΔt)`, together with the half-grid collision shift and the
//! right-hand side and odd-parity update that bracket each solve.

use crate::cross_section::Problem;
use crate::error::{Error, Result};
use crate::field::{KineticField, ParityPair};
use crate::mesh::SpatialMesh;
use crate::operators::collision::{shift_into, shift_inverse_into};
use crate::operators::SchemeScalars;

/// Spatial discretisation of the second-order part of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvenStencil {
    /// Three-point flux form along each axis with face-averaged `D`, plus a
    /// four-corner mixed term in two dimensions.
    #[default]
    Compact,
    /// Product of two centred first differences. Algebraically equal to
    /// eliminating the odd part from the centred non-symmetric scheme.
    Centered,
}

/// Half-grid operators `A` and `B` of the parity system `(A + B) f_E = b`.
#[derive(Debug, Clone)]
pub struct EvenOperator {
    mesh: SpatialMesh,
    stencil: EvenStencil,
    shift: f64,
    sigma: Vec<f64>,
    d: Vec<f64>,
    d_east: Vec<f64>,
    d_north: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
    weights: Vec<f64>,
}

impl EvenOperator {
    pub fn new(problem: &Problem, s: &SchemeScalars, stencil: EvenStencil) -> Result<Self> {
        if !problem.cross_section.is_isotropic() {
            return Err(Error::Unsupported(
                "the parity path needs isotropic scattering; use the anisotropic GMRES scheme"
                    .into(),
            ));
        }
        let mesh = problem.mesh.clone();
        let sigma = problem.cross_section.sigma().to_vec();
        let d: Vec<f64> = sigma.iter().map(|&x| s.even_coefficient(x)).collect();
        let d_east = (0..mesh.n_cells())
            .map(|c| 0.5 * (d[c] + d[mesh.east(c)]))
            .collect();
        let d_north = (0..mesh.n_cells())
            .map(|c| 0.5 * (d[c] + d[mesh.north(c)]))
            .collect();
        let half = problem.quadrature.half();
        Ok(Self {
            mesh,
            stencil,
            shift: s.shift(),
            sigma,
            d,
            d_east,
            d_north,
            xi: half.xi.clone(),
            eta: half.eta.clone(),
            weights: half.weights.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mesh.n_cells() * self.xi.len()
    }

    pub fn n_half(&self) -> usize {
        self.xi.len()
    }

    pub fn half_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Inner-product weights `ŵ_h · |cell|` for every unknown.
    pub fn inner_weights(&self) -> Vec<f64> {
        let vol = self.mesh.cell_volume();
        (0..self.mesh.n_cells())
            .flat_map(|_| self.weights.iter().map(move |w| w * vol))
            .collect()
    }

    pub fn apply_a(&self, x: &[f64], out: &mut [f64]) {
        match self.stencil {
            EvenStencil::Compact => self.compact(x, out),
            EvenStencil::Centered => self.centered(x, out),
        }
    }

    pub fn apply_b(&self, x: &[f64], out: &mut [f64]) {
        let nh = self.n_half();
        for (c, &sig) in self.sigma.iter().enumerate() {
            let r = c * nh..(c + 1) * nh;
            shift_into(&x[r.clone()], sig, self.shift, &self.weights, &mut out[r]);
        }
    }

    pub fn apply_b_inverse(&self, x: &[f64], out: &mut [f64]) {
        let nh = self.n_half();
        for (c, &sig) in self.sigma.iter().enumerate() {
            let r = c * nh..(c + 1) * nh;
            shift_inverse_into(&x[r.clone()], sig, self.shift, &self.weights, &mut out[r]);
        }
    }

    /// `(A + B) x`.
    pub fn apply_system(&self, x: &[f64], out: &mut [f64]) {
        self.apply_a(x, out);
        let nh = self.n_half();
        let mut tmp = vec![0.0; nh];
        for (c, &sig) in self.sigma.iter().enumerate() {
            let r = c * nh..(c + 1) * nh;
            shift_into(&x[r.clone()], sig, self.shift, &self.weights, &mut tmp);
            for (o, t) in out[r].iter_mut().zip(&tmp) {
                *o += t;
            }
        }
    }

    fn compact(&self, x: &[f64], out: &mut [f64]) {
        let m = &self.mesh;
        let nh = self.n_half();
        let idx2 = 1.0 / (m.dx() * m.dx());
        let planar = m.is_planar();
        let idy2 = 1.0 / (m.dy() * m.dy());
        for c in 0..m.n_cells() {
            let (e, w) = (m.east(c), m.west(c));
            let (de, dw) = (self.d_east[c], self.d_east[w]);
            for h in 0..nh {
                let f = x[c * nh + h];
                let flux_x = de * (x[e * nh + h] - f) - dw * (f - x[w * nh + h]);
                out[c * nh + h] = -self.xi[h] * self.xi[h] * idx2 * flux_x;
            }
            if planar {
                let (n, s) = (m.north(c), m.south(c));
                let (dn, ds) = (self.d_north[c], self.d_north[s]);
                for h in 0..nh {
                    let f = x[c * nh + h];
                    let flux_y = dn * (x[n * nh + h] - f) - ds * (f - x[s * nh + h]);
                    out[c * nh + h] -= self.eta[h] * self.eta[h] * idy2 * flux_y;
                }
            }
        }
        if planar {
            // Mixed term ξη[∂x(D ∂y f) + ∂y(D ∂x f)] from centred differences.
            let gx = self.scaled_gradient(x, 1, 0);
            let gy = self.scaled_gradient(x, 0, 1);
            let (hx, hy) = (0.5 / m.dx(), 0.5 / m.dy());
            for c in 0..m.n_cells() {
                let (e, w, n, s) = (m.east(c), m.west(c), m.north(c), m.south(c));
                for h in 0..nh {
                    let mixed = hx * (gy[e * nh + h] - gy[w * nh + h])
                        + hy * (gx[n * nh + h] - gx[s * nh + h]);
                    out[c * nh + h] -= self.xi[h] * self.eta[h] * mixed;
                }
            }
        }
    }

    /// `D · ∂f` along one axis by centred differences.
    fn scaled_gradient(&self, x: &[f64], di: isize, dj: isize) -> Vec<f64> {
        let m = &self.mesh;
        let nh = self.n_half();
        let inv = if di != 0 { 0.5 / m.dx() } else { 0.5 / m.dy() };
        let mut g = vec![0.0; x.len()];
        for c in 0..m.n_cells() {
            let p = m.shift(c, di, dj);
            let q = m.shift(c, -di, -dj);
            for h in 0..nh {
                g[c * nh + h] = self.d[c] * inv * (x[p * nh + h] - x[q * nh + h]);
            }
        }
        g
    }

    fn centered(&self, x: &[f64], out: &mut [f64]) {
        let m = &self.mesh;
        let nh = self.n_half();
        let mut t = directional_derivative(m, &self.xi, &self.eta, x);
        for c in 0..m.n_cells() {
            for v in &mut t[c * nh..(c + 1) * nh] {
                *v *= self.d[c];
            }
        }
        let div = directional_derivative(m, &self.xi, &self.eta, &t);
        for (o, v) in out.iter_mut().zip(div) {
            *o = -v;
        }
    }
}

/// `(Ω·∇) g` with centred differences on the periodic grid.
pub(crate) fn directional_derivative(
    mesh: &SpatialMesh,
    xi: &[f64],
    eta: &[f64],
    g: &[f64],
) -> Vec<f64> {
    let nh = xi.len();
    let hx = 0.5 / mesh.dx();
    let hy = 0.5 / mesh.dy();
    let planar = mesh.is_planar();
    let mut out = vec![0.0; g.len()];
    for c in 0..mesh.n_cells() {
        let (e, w) = (mesh.east(c), mesh.west(c));
        for h in 0..nh {
            out[c * nh + h] = xi[h] * hx * (g[e * nh + h] - g[w * nh + h]);
        }
        if planar {
            let (n, s) = (mesh.north(c), mesh.south(c));
            for h in 0..nh {
                out[c * nh + h] += eta[h] * hy * (g[n * nh + h] - g[s * nh + h]);
            }
        }
    }
    out
}

fn check_half(problem: &Problem, f: &KineticField) -> Result<()> {
    f.check_shape(problem.n_cells(), problem.n_half())
}

/// Compact-stencil `A f_E`.
pub fn apply_even_elliptic(
    f_even: &KineticField,
    problem: &Problem,
    s: &SchemeScalars,
) -> Result<KineticField> {
    check_half(problem, f_even)?;
    let op = EvenOperator::new(problem, s, EvenStencil::Compact)?;
    let mut out = vec![0.0; op.dim()];
    op.apply_a(f_even.values(), &mut out);
    KineticField::from_values(problem.n_cells(), problem.n_half(), out)
}

/// `b = (ε²/Δt)[f_E − (Ω·∇)(εΔt/(ε² + σΔt) f_O)]`.
pub fn assemble_parity_rhs(
    pair: &ParityPair,
    problem: &Problem,
    s: &SchemeScalars,
) -> Result<KineticField> {
    check_half(problem, &pair.even)?;
    check_half(problem, &pair.odd)?;
    let nh = problem.n_half();
    let sigma = problem.cross_section.sigma();
    let mut scaled = pair.odd.values().to_vec();
    for (c, &sig) in sigma.iter().enumerate() {
        let k = s.rhs_coefficient(sig);
        for v in &mut scaled[c * nh..(c + 1) * nh] {
            *v *= k;
        }
    }
    let half = problem.quadrature.half();
    let div = directional_derivative(&problem.mesh, &half.xi, &half.eta, &scaled);
    let a = s.shift();
    let b = pair
        .even
        .values()
        .iter()
        .zip(div)
        .map(|(e, d)| a * (e - d))
        .collect();
    KineticField::from_values(problem.n_cells(), nh, b)
}

/// `f_O^{n+1} = ε²/(ε² + σΔt) (f_O^n − (Δt/ε)(Ω·∇) f_E^{n+1})`.
pub fn update_odd(
    even_new: &KineticField,
    odd_old: &KineticField,
    problem: &Problem,
    s: &SchemeScalars,
) -> Result<KineticField> {
    check_half(problem, even_new)?;
    check_half(problem, odd_old)?;
    let nh = problem.n_half();
    let half = problem.quadrature.half();
    let grad = directional_derivative(&problem.mesh, &half.xi, &half.eta, even_new.values());
    let r = s.dt() / s.epsilon();
    let mut out = vec![0.0; grad.len()];
    for (c, &sig) in problem.cross_section.sigma().iter().enumerate() {
        let k = s.odd_factor(sig);
        for i in c * nh..(c + 1) * nh {
            out[i] = k * (odd_old.values()[i] - r * grad[i]);
        }
    }
    KineticField::from_values(problem.n_cells(), nh, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::{CrossSectionModel, LowRankKernel};
    use crate::quadrature::AngularQuadrature;
    use std::f64::consts::PI;

    fn slab(nx: usize, nv: usize, sigma: f64) -> Problem {
        let mesh = SpatialMesh::slab(0.0, 2.0, nx).unwrap();
        let q = AngularQuadrature::midpoint(nv).unwrap();
        let s = CrossSectionModel::constant(&mesh, sigma).unwrap();
        Problem::new(mesh, q, s).unwrap()
    }

    fn half_field(p: &Problem, f: impl Fn(f64, f64, f64) -> f64) -> KineticField {
        let half = p.quadrature.half();
        let mut v = Vec::new();
        for c in 0..p.n_cells() {
            let (x, y) = p.mesh.center(c);
            for h in 0..half.len() {
                v.push(f(x, y, half.xi[h]));
            }
        }
        KineticField::from_values(p.n_cells(), half.len(), v).unwrap()
    }

    #[test]
    fn constant_is_in_the_kernel() {
        let p = slab(16, 8, 3.0);
        let s = SchemeScalars::new(0.1, 0.01).unwrap();
        let f = half_field(&p, |_, _, _| 4.2);
        let a = apply_even_elliptic(&f, &p, &s).unwrap();
        assert!(a.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn cosine_profile() {
        let p = slab(200, 8, 1.0);
        let s = SchemeScalars::new(1.0, 1.0).unwrap();
        let f = half_field(&p, |x, _, _| (PI * x).cos());
        let a = apply_even_elliptic(&f, &p, &s).unwrap();
        let half = p.quadrature.half();
        let dx = p.mesh.dx();
        for c in 0..p.n_cells() {
            let (x, _) = p.mesh.center(c);
            for h in 0..half.len() {
                let want = 0.5 * half.xi[h].powi(2) * PI * PI * (PI * x).cos();
                assert!((a.get(c, h) - want).abs() < 2.0 * PI.powi(4) * dx * dx);
            }
        }
    }

    #[test]
    fn anisotropic_model_is_rejected() {
        let mesh = SpatialMesh::slab(0.0, 1.0, 4).unwrap();
        let q = AngularQuadrature::midpoint(4).unwrap();
        let k = LowRankKernel::linear(&q).unwrap();
        let s = CrossSectionModel::anisotropic(vec![1.0; 4], k).unwrap();
        let p = Problem::new(mesh, q, s).unwrap();
        let sc = SchemeScalars::new(1.0, 1.0).unwrap();
        assert!(matches!(
            EvenOperator::new(&p, &sc, EvenStencil::Compact),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rhs_without_odd_part() {
        let p = slab(8, 4, 1.0);
        let s = SchemeScalars::new(0.5, 0.2).unwrap();
        let even = half_field(&p, |x, _, mu| x * mu + 1.0);
        for odd in [
            KineticField::zeros(8, 2),
            half_field(&p, |_, _, mu| 3.0 * mu),
        ] {
            let pair = ParityPair {
                even: even.clone(),
                odd,
            };
            let b = assemble_parity_rhs(&pair, &p, &s).unwrap();
            for (bv, e) in b.values().iter().zip(even.values()) {
                assert!((bv - s.shift() * e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn odd_update_limits() {
        let p = slab(10, 4, 1.0);
        let s = SchemeScalars::new(1.0, 1.0).unwrap();
        let even = half_field(&p, |_, _, _| 2.0);
        let odd = KineticField::zeros(10, 2);
        let o = update_odd(&even, &odd, &p, &s).unwrap();
        assert!(o.values().iter().all(|v| *v == 0.0));

        let stiff = slab(10, 4, 1e12);
        let even = half_field(&stiff, |x, _, _| (PI * x).sin());
        let odd = half_field(&stiff, |_, _, mu| mu);
        let o = update_odd(&even, &odd, &stiff, &s).unwrap();
        assert!(o.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn odd_update_sine() {
        let p = slab(400, 4, 1.0);
        let s = SchemeScalars::new(1.0, 1.0).unwrap();
        let even = half_field(&p, |x, _, _| (PI * x).sin());
        let odd = half_field(&p, |x, _, mu| mu * x);
        let o = update_odd(&even, &odd, &p, &s).unwrap();
        let half = p.quadrature.half();
        let dx = p.mesh.dx();
        for c in 0..p.n_cells() {
            let (x, _) = p.mesh.center(c);
            for h in 0..half.len() {
                let mu = half.xi[h];
                let want = 0.5 * (mu * x - mu * PI * (PI * x).cos());
                assert!((o.get(c, h) - want).abs() < PI.powi(3) * dx * dx);
            }
        }
    }

    #[test]
    fn centered_and_compact_agree_on_smooth_data() {
        let mesh = SpatialMesh::planar((0.0, 1.0), (0.0, 1.0), 64, 64).unwrap();
        let q = AngularQuadrature::circle(8).unwrap();
        let sig = CrossSectionModel::constant(&mesh, 1.0).unwrap();
        let p = Problem::new(mesh, q, sig).unwrap();
        let s = SchemeScalars::new(1.0, 1.0).unwrap();
        let f = half_field(&p, |x, y, _| (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let run = |st| {
            let op = EvenOperator::new(&p, &s, st).unwrap();
            let mut out = vec![0.0; op.dim()];
            op.apply_a(f.values(), &mut out);
            out
        };
        let a = run(EvenStencil::Compact);
        let b = run(EvenStencil::Centered);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = a
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(gap < 0.01 * scale, "gap {gap} scale {scale}");
    }
}
