use crate::error::{check_len, Result};
use crate::krylov::{wdot, KrylovOptions, KrylovReport, LinearOperator};

/// Restarted GMRES with left preconditioning and Givens rotations.
///
/// Minimises `‖M(b − A x)‖_W` over each Krylov space; convergence is
/// declared when that norm falls below `tol · ‖M b‖_W`. A restart cycle that
/// does not reduce the residual ends the solve with `converged = false`.
pub fn gmres_solve(
    op: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    b: &[f64],
    x0: Option<&[f64]>,
    weights: &[f64],
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = op.dim();
    check_len(n, b.len())?;
    check_len(n, weights.len())?;
    if let Some(m) = precond {
        check_len(n, m.dim())?;
    }
    let apply_m = |v: &[f64], out: &mut [f64]| match precond {
        Some(m) => m.apply(v, out),
        None => out.copy_from_slice(v),
    };
    let norm = |v: &[f64]| wdot(weights, v, v).sqrt();

    let mut x = match x0 {
        Some(x0) => {
            check_len(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut report = KrylovReport::default();
    let mut mb = vec![0.0; n];
    apply_m(b, &mut mb);
    let b_norm = norm(&mb);
    if b_norm == 0.0 {
        report.residual_history.push(0.0);
        report.converged = true;
        return Ok((vec![0.0; n], report));
    }
    let m = opts.restart.max(1);
    let mut tmp = vec![0.0; n];
    let mut w = vec![0.0; n];
    loop {
        // r = M(b − A x)
        op.apply(&x, &mut tmp);
        report.matvec_count += 1;
        for (t, bi) in tmp.iter_mut().zip(b) {
            *t = bi - *t;
        }
        let mut r = vec![0.0; n];
        apply_m(&tmp, &mut r);
        let beta = norm(&r);
        let start = beta / b_norm;
        if report.residual_history.is_empty() {
            report.residual_history.push(start);
        } else if let Some(last) = report.residual_history.last_mut() {
            *last = start;
        }
        if start <= opts.tol {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iter {
            report.note = Some(format!(
                "reached {} iterations with residual {start:e}",
                opts.max_iter
            ));
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        let mut res = start;
        while k < m && report.iterations < opts.max_iter {
            op.apply(&basis[k], &mut tmp);
            report.matvec_count += 1;
            apply_m(&tmp, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = wdot(weights, &w, v);
                h[i][k] = hij;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hij * vj;
                }
            }
            let hk = norm(&w);
            h[k + 1][k] = hk;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                report.note = Some("Krylov space collapsed".into());
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            report.iterations += 1;
            res = g[k].abs() / b_norm;
            report.residual_history.push(res);
            let happy = hk <= 1e-14 * beta;
            if res <= opts.tol || happy {
                break;
            }
            basis.push(w.iter().map(|v| v / hk).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (xj, vj) in x.iter_mut().zip(v) {
                *xj += yi * vj;
            }
        }
        if k == 0 || res >= start * (1.0 - 1e-12) {
            report.note = Some(format!(
                "stagnated over a restart cycle at residual {res:e}"
            ));
            break;
        }
    }
    Ok((x, report))
}
