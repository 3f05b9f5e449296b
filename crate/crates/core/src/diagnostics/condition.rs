//! Spectral condition numbers of the even-parity system.
//!
//! `A + B` is self-adjoint in the inner product weighted by `ŵ_h |cell|`, and
//! `B⁻¹(A + B)` is self-adjoint in the same inner product composed with `B`.
//! Both are therefore handled by symmetric solvers: a dense eigensolve after
//! similarity scaling, or Lanczos with full reorthogonalisation.

use nalgebra::DMatrix;

use crate::cross_section::{CrossSectionModel, Problem};
use crate::error::{Error, Result};
use crate::mesh::SpatialMesh;
use crate::operators::{
    dense_assemble, DenseKind, EvenOperator, EvenStencil, SchemeScalars, DEFAULT_DENSE_CAP,
};
use crate::quadrature::AngularQuadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionTarget {
    /// `A + B`.
    APlusB,
    /// `B⁻¹A + I`, the collision-shift preconditioned system.
    Preconditioned,
}

impl ConditionTarget {
    pub fn label(self) -> &'static str {
        match self {
            Self::APlusB => "A+B",
            Self::Preconditioned => "B^-1A+I",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionMethod {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub operator: ConditionTarget,
    pub nx: usize,
    pub nv: usize,
    pub epsilon: f64,
    pub dt: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub method: ConditionMethod,
    /// Largest relative Ritz residual; zero for the dense method.
    pub residual_bound: f64,
}

/// Extreme eigenvalues and their ratio for a symmetric matrix.
pub fn dense_condition(m: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::invalid(
            "condition number needs a non-empty square matrix",
        ));
    }
    let ev = m.clone().symmetric_eigenvalues();
    extremes_to_kappa(ev.min(), ev.max())
}

fn extremes_to_kappa(lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
    if !lo.is_finite() || !hi.is_finite() || lo <= 1e-14 * hi.abs() {
        return Err(Error::Singular(format!(
            "smallest eigenvalue {lo:e} is not resolvable against {hi:e}"
        )));
    }
    Ok((lo, hi, hi / lo))
}

/// Condition number of the parity system for `problem` at scalars `s`.
pub fn condition_number(
    problem: &Problem,
    s: &SchemeScalars,
    target: ConditionTarget,
    method: ConditionMethod,
) -> Result<ConditionReport> {
    let (lo, hi, bound) = match method {
        ConditionMethod::Dense => dense_extremes(problem, s, target)?,
        ConditionMethod::Iterative => iterative_extremes(problem, s, target)?,
    };
    let (lambda_min, lambda_max, kappa) = extremes_to_kappa(lo, hi)?;
    Ok(ConditionReport {
        operator: target,
        nx: problem.mesh.nx(),
        nv: problem.n_nodes(),
        epsilon: s.epsilon(),
        dt: s.dt(),
        lambda_min,
        lambda_max,
        kappa,
        method,
        residual_bound: bound,
    })
}

fn dense_extremes(
    problem: &Problem,
    s: &SchemeScalars,
    target: ConditionTarget,
) -> Result<(f64, f64, f64)> {
    let a = dense_assemble(
        DenseKind::EvenA(EvenStencil::Compact),
        problem,
        s,
        DEFAULT_DENSE_CAP,
    )?;
    let b = dense_assemble(DenseKind::ShiftHalf, problem, s, DEFAULT_DENSE_CAP)?;
    let w = EvenOperator::new(problem, s, EvenStencil::Compact)?.inner_weights();
    let r: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let similar = |m: DMatrix<f64>| {
        let n = m.nrows();
        let mut out = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * r[i] / r[j]);
        // Remove rounding asymmetry.
        let t = out.transpose();
        out += t;
        out * 0.5
    };
    let sys = similar(a + &b);
    let ev = match target {
        ConditionTarget::APlusB => sys.symmetric_eigenvalues(),
        ConditionTarget::Preconditioned => {
            let chol = similar(b)
                .cholesky()
                .ok_or_else(|| Error::Singular("collision shift is not positive".into()))?;
            let l = chol.l();
            let linv = l
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular("collision shift factor".into()))?;
            let g = &linv * sys * linv.transpose();
            ((&g + g.transpose()) * 0.5).symmetric_eigenvalues()
        }
    };
    Ok((ev.min(), ev.max(), 0.0))
}

fn iterative_extremes(
    problem: &Problem,
    s: &SchemeScalars,
    target: ConditionTarget,
) -> Result<(f64, f64, f64)> {
    let op = EvenOperator::new(problem, s, EvenStencil::Compact)?;
    let w = op.inner_weights();
    let n = op.dim();
    let mut tmp = vec![0.0; n];
    match target {
        ConditionTarget::APlusB => lanczos_extremes(
            n,
            |x, y| op.apply_system(x, y),
            |x, y| x.iter().zip(y).zip(&w).map(|((a, b), w)| a * b * w).sum(),
            LANCZOS_TOL,
        ),
        ConditionTarget::Preconditioned => {
            // Inner product ⟨x, WBy⟩ makes B⁻¹(A + B) self-adjoint.
            let inner = |x: &[f64], y: &[f64]| {
                let mut b = vec![0.0; n];
                op.apply_b(y, &mut b);
                x.iter().zip(&b).zip(&w).map(|((a, b), w)| a * b * w).sum()
            };
            lanczos_extremes(
                n,
                |x, y| {
                    op.apply_system(x, &mut tmp);
                    op.apply_b_inverse(&tmp, y);
                },
                inner,
                LANCZOS_TOL,
            )
        }
    }
}

const LANCZOS_TOL: f64 = 1e-8;

/// Extreme eigenvalues of an operator self-adjoint in `inner`, by Lanczos
/// with full reorthogonalisation. Returns `(λ_min, λ_max, bound)` where
/// `bound` is the larger relative Ritz residual.
pub fn lanczos_extremes(
    n: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    inner: impl Fn(&[f64], &[f64]) -> f64,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let mut q = start_vector(n);
    let nq = inner(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::<f64>::new());
    let mut z = vec![0.0; n];
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    let max_steps = n.min(600);
    for j in 0..max_steps {
        apply(&basis[j], &mut z);
        let a = inner(&basis[j], &z);
        alpha.push(a);
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = inner(v, &z);
                z.iter_mut().zip(v).for_each(|(zi, vi)| *zi -= c * vi);
            }
        }
        let b = inner(&z, &z).max(0.0).sqrt();
        let last = j + 1 == max_steps;
        // The tridiagonal eigensolve is checked periodically to keep the cost
        // of long runs linear in the basis work.
        if j < 20 || j % 8 == 0 || last || b <= 1e-14 * alpha[0].abs() {
            let (lo, hi, bound) = ritz_extremes(&alpha, &beta, b);
            best = (lo, hi, bound);
            let scale = hi.abs().max(f64::MIN_POSITIVE);
            if bound <= tol || b <= 1e-14 * scale || last {
                break;
            }
        }
        beta.push(b);
        basis.push(z.iter().map(|v| v / b).collect());
    }
    Ok(best)
}

/// Extreme Ritz values of the tridiagonal `T` and their relative residuals
/// `|β_m s_{m,i}| / |θ_i|`.
fn ritz_extremes(alpha: &[f64], beta: &[f64], next: f64) -> (f64, f64, f64) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let rel = |i: usize| {
        let th = eig.eigenvalues[i];
        (next * eig.eigenvectors[(m - 1, i)]).abs() / th.abs().max(f64::MIN_POSITIVE)
    };
    (
        eig.eigenvalues[imin],
        eig.eigenvalues[imax],
        rel(imin).max(rel(imax)),
    )
}

/// Deterministic start vector with no special symmetry.
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            1.0 + (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// How the time step of a condition-number table is tied to the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    DxOver3,
    Dx,
    Fixed(f64),
}

impl DtRule {
    pub fn dt(self, dx: f64) -> f64 {
        match self {
            Self::DxOver3 => dx / 3.0,
            Self::Dx => dx,
            Self::Fixed(dt) => dt,
        }
    }

    pub fn label(self) -> String {
        match self {
            Self::DxOver3 => "dx/3".into(),
            Self::Dx => "dx".into(),
            Self::Fixed(dt) => format!("{dt}"),
        }
    }

    pub fn candidates() -> [DtRule; 5] {
        [
            Self::DxOver3,
            Self::Dx,
            Self::Fixed(1e-2),
            Self::Fixed(1e-1),
            Self::Fixed(1.0),
        ]
    }
}

/// Mesh sizes and angular counts of the condition tables.
pub const TABLE_NX: [usize; 5] = [20, 40, 60, 80, 100];
pub const TABLE_NV: [usize; 3] = [10, 20, 30];

/// Reference `κ(A + B)` at `ε = 1`, rows over [`TABLE_NX`], columns over [`TABLE_NV`].
pub const REFERENCE_KAPPA_KINETIC: [[f64; 3]; 5] = [
    [1.34748186880472, 1.38654551078317, 1.40000848404069],
    [1.35413818003715, 1.39425840610708, 1.40810090542130],
    [1.35618972627881, 1.39664857130697, 1.41061251454211],
    [1.35718028325749, 1.39780546942190, 1.41182902863886],
    [1.35776282383554, 1.39848680698068, 1.41254576051502],
];

/// Reference `κ(B⁻¹A + I)` at `ε = 1e-5`.
pub const REFERENCE_KAPPA_PRECONDITIONED: [[f64; 3]; 5] = [
    [15.88, 16.14, 16.19],
    [31.50, 32.04, 32.14],
    [47.12, 47.94, 48.09],
    [62.74, 63.84, 64.05],
    [78.37, 79.75, 80.00],
];

/// Reference `κ(A + B)` at `ε = 1e-5`, identical across angular counts.
pub const REFERENCE_KAPPA_DIFFUSIVE: [f64; 5] = [1.59e8, 8.12e7, 5.46e7, 4.11e7, 3.30e7];

/// Slab `[0, 2]`, `σ ≡ 1`, midpoint angular rule.
pub fn table_problem(nx: usize, nv: usize) -> Result<Problem> {
    let mesh = SpatialMesh::slab(0.0, 2.0, nx)?;
    let q = AngularQuadrature::midpoint(nv)?;
    let sigma = CrossSectionModel::constant(&mesh, 1.0)?;
    Problem::new(mesh, q, sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationEntry {
    pub rule: DtRule,
    /// `kappa[i][j]` for `nxs[i]`, `nvs[j]`.
    pub kappa: Vec<Vec<f64>>,
    /// Largest relative deviation from the reference table.
    pub max_rel_deviation: f64,
}

/// Computes a condition table for every candidate time-step rule and scores
/// each against `reference`. Entries are sorted best first.
pub fn calibration_sweep(
    epsilon: f64,
    target: ConditionTarget,
    nxs: &[usize],
    nvs: &[usize],
    reference: &[Vec<f64>],
    method: ConditionMethod,
) -> Result<Vec<CalibrationEntry>> {
    if reference.len() != nxs.len() || reference.iter().any(|r| r.len() != nvs.len()) {
        return Err(Error::invalid(
            "reference table shape does not match the sweep",
        ));
    }
    let mut out = Vec::new();
    for rule in DtRule::candidates() {
        let mut kappa = Vec::with_capacity(nxs.len());
        let mut dev: f64 = 0.0;
        for (i, &nx) in nxs.iter().enumerate() {
            let mut row = Vec::with_capacity(nvs.len());
            for (j, &nv) in nvs.iter().enumerate() {
                let p = table_problem(nx, nv)?;
                let s = SchemeScalars::new(epsilon, rule.dt(p.mesh.dx()))?;
                let k = condition_number(&p, &s, target, method)?.kappa;
                dev = dev.max((k - reference[i][j]).abs() / reference[i][j]);
                row.push(k);
            }
            kappa.push(row);
        }
        out.push(CalibrationEntry {
            rule,
            kappa,
            max_rel_deviation: dev,
        });
    }
    out.sort_by(|a, b| a.max_rel_deviation.total_cmp(&b.max_rel_deviation));
    Ok(out)
}

/// Reference tables as nested vectors, for [`calibration_sweep`].
pub fn reference_table(t: &[[f64; 3]; 5]) -> Vec<Vec<f64>> {
    t.iter().map(|r| r.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn dense_condition_examples() {
        let (_, _, k) = dense_condition(&DMatrix::identity(3, 3)).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert!((dense_condition(&d).unwrap().2 - 2.0).abs() < 1e-15);
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0]));
        assert!(matches!(dense_condition(&z), Err(Error::Singular(_))));
    }

    #[test]
    fn lanczos_on_known_spectrum() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64 * 0.5).collect();
        let (lo, hi, _) = lanczos_extremes(
            50,
            |x, y| {
                y.iter_mut()
                    .zip(x)
                    .zip(&d)
                    .for_each(|((y, x), d)| *y = d * x)
            },
            |a, b| a.iter().zip(b).map(|(a, b)| a * b).sum(),
            1e-12,
        )
        .unwrap();
        assert!((lo - 0.5).abs() < 1e-9);
        assert!((hi - 25.0).abs() < 1e-9);
    }

    #[test]
    fn dense_and_iterative_agree() {
        for (eps, dt) in [(1.0, 0.1 / 3.0), (1e-5, 0.1), (0.1, 0.05)] {
            let p = table_problem(20, 10).unwrap();
            let s = SchemeScalars::new(eps, dt).unwrap();
            for target in [ConditionTarget::APlusB, ConditionTarget::Preconditioned] {
                let d = condition_number(&p, &s, target, ConditionMethod::Dense).unwrap();
                let i = condition_number(&p, &s, target, ConditionMethod::Iterative).unwrap();
                assert!(
                    (d.kappa - i.kappa).abs() < 1e-3 * d.kappa,
                    "{eps} {target:?}: {} vs {}",
                    d.kappa,
                    i.kappa
                );
            }
        }
    }

    #[test]
    fn kinetic_regime_kappa_near_one() {
        let p = table_problem(20, 10).unwrap();
        let s = SchemeScalars::new(1.0, 0.1 / 3.0).unwrap();
        let r = condition_number(&p, &s, ConditionTarget::APlusB, ConditionMethod::Dense).unwrap();
        assert!(r.kappa > 1.3 && r.kappa < 1.5, "{}", r.kappa);
        assert_eq!((r.nx, r.nv), (20, 10));
    }

    #[test]
    fn diffusive_scaling_of_preconditioned_kappa() {
        let k = |nx| {
            let p = table_problem(nx, 10).unwrap();
            let s = SchemeScalars::new(1e-5, p.mesh.dx()).unwrap();
            condition_number(
                &p,
                &s,
                ConditionTarget::Preconditioned,
                ConditionMethod::Iterative,
            )
            .unwrap()
            .kappa
        };
        let (a, b) = (k(20), k(40));
        assert!(b / a > 1.7 && b / a < 2.3, "{a} {b}");
    }

    #[test]
    fn rules() {
        assert_eq!(DtRule::DxOver3.dt(0.75), 0.25);
        assert_eq!(DtRule::Dx.dt(0.3), 0.3);
        assert_eq!(DtRule::Fixed(0.7).dt(0.3), 0.7);
    }
}
