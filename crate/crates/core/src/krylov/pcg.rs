use crate::error::{check_len, Error, Result};
use crate::krylov::{wdot, KrylovOptions, KrylovReport, LinearOperator};

/// Preconditioned conjugate gradients.
///
/// Both `op` and `precond` must be self-adjoint in the `weights` inner
/// product. Convergence is measured on `sqrt(⟨r, M r⟩ / ⟨b, M b⟩)`. The
/// initial residual is always formed, so `matvec_count = iterations + 1`.
pub fn pcg_solve(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    weights: &[f64],
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = op.dim();
    check_len(n, precond.dim())?;
    check_len(n, b.len())?;
    check_len(n, weights.len())?;
    let mut x = match x0 {
        Some(x0) => {
            check_len(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut report = KrylovReport::default();
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    report.matvec_count = 1;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut rz = wdot(weights, &r, &z);
    let b_norm = if x.iter().all(|v| *v == 0.0) {
        rz.abs().sqrt()
    } else {
        let mut mb = vec![0.0; n];
        precond.apply(b, &mut mb);
        wdot(weights, b, &mb).abs().sqrt()
    };
    if b_norm == 0.0 {
        report.residual_history.push(0.0);
        report.converged = true;
        return Ok((vec![0.0; n], report));
    }
    let mut res = rz.abs().sqrt() / b_norm;
    report.residual_history.push(res);
    if res <= opts.tol {
        report.converged = true;
        return Ok((x, report));
    }
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut q);
        report.matvec_count += 1;
        let pq = wdot(weights, &p, &q);
        let scale = wdot(weights, &p, &p).sqrt() * wdot(weights, &q, &q).sqrt();
        if pq <= 0.0 {
            if pq < -1e-12 * scale {
                return Err(Error::Indefinite {
                    curvature: pq,
                    iteration: it,
                });
            }
            report.note = Some(format!("zero curvature at iteration {it}"));
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        precond.apply(&r, &mut z);
        let rz_new = wdot(weights, &r, &z);
        report.iterations = it;
        res = rz_new.abs().sqrt() / b_norm;
        report.residual_history.push(res);
        if res <= opts.tol {
            report.converged = true;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if !report.converged && report.note.is_none() {
        report.note = Some(format!(
            "reached {} iterations with residual {res:e}",
            opts.max_iter
        ));
    }
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{FnOperator, Identity};

    fn dense(m: Vec<Vec<f64>>) -> FnOperator<impl Fn(&[f64], &mut [f64])> {
        let n = m.len();
        FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = m[i].iter().zip(x).map(|(a, b)| a * b).sum();
            }
        })
    }

    #[test]
    fn identity_in_one_step() {
        let b = [1.0, -2.0, 3.0];
        let (x, rep) = pcg_solve(
            &Identity(3),
            &Identity(3),
            &b,
            None,
            &[1.0; 3],
            &KrylovOptions::default(),
        )
        .unwrap();
        assert_eq!(x, b.to_vec());
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.matvec_count, 2);
        assert!(rep.converged);
    }

    #[test]
    fn two_by_two() {
        let a = dense(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (x, rep) = pcg_solve(
            &a,
            &Identity(2),
            &[1.0, 0.0],
            None,
            &[1.0; 2],
            &KrylovOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((x[1] + 1.0 / 3.0).abs() < 1e-10);
        assert_eq!(rep.matvec_count, rep.iterations + 1);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = dense(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        let r = pcg_solve(
            &a,
            &Identity(2),
            &[0.0, 1.0],
            None,
            &[1.0; 2],
            &KrylovOptions::default(),
        );
        assert!(matches!(r, Err(Error::Indefinite { .. })));
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let n = 50;
        let a = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = (i + 1) as f64 * x[i];
            }
        });
        let opts = KrylovOptions {
            max_iter: 3,
            ..Default::default()
        };
        let (_, rep) =
            pcg_solve(&a, &Identity(n), &vec![1.0; n], None, &vec![1.0; n], &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(rep.note.is_some());
    }

    #[test]
    fn zero_rhs() {
        let (x, rep) = pcg_solve(
            &Identity(2),
            &Identity(2),
            &[0.0; 2],
            None,
            &[1.0; 2],
            &KrylovOptions::default(),
        )
        .unwrap();
        assert_eq!(x, vec![0.0; 2]);
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }
}
