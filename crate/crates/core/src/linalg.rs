//! Small direct solvers.

use crate::error::{check_len, Error, Result};

/// Solves the periodic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` with indices
/// taken modulo `n`, by Sherman-Morrison on top of the Thomas algorithm.
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    check_len(n, lower.len())?;
    check_len(n, upper.len())?;
    check_len(n, rhs.len())?;
    match n {
        0 => return Ok(Vec::new()),
        1 => {
            let a = lower[0] + diag[0] + upper[0];
            return nonzero(a).map(|a| vec![rhs[0] / a]);
        }
        2 => {
            let (a, b) = (diag[0], lower[0] + upper[0]);
            let (c, d) = (lower[1] + upper[1], diag[1]);
            let det = nonzero(a * d - b * c)?;
            return Ok(vec![
                (d * rhs[0] - b * rhs[1]) / det,
                (a * rhs[1] - c * rhs[0]) / det,
            ]);
        }
        _ => {}
    }
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= upper[n - 1] * lower[0] / gamma;
    let x = thomas(lower, &d, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = upper[n - 1];
    let z = thomas(lower, &d, upper, &u)?;
    let fact = (x[0] + lower[0] * x[n - 1] / gamma) / (1.0 + z[0] + lower[0] * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(x, z)| x - fact * z).collect())
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut den = nonzero(diag[0])?;
    c[0] = upper[0] / den;
    d[0] = rhs[0] / den;
    for i in 1..n {
        den = nonzero(diag[i] - lower[i] * c[i - 1])?;
        c[i] = upper[i] / den;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

fn nonzero(x: f64) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Singular(format!(
            "zero pivot ({x}) in tridiagonal solve"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                v += lower[i] * x[(i + n - 1) % n];
                v += upper[i] * x[(i + 1) % n];
                v
            })
            .collect()
    }

    #[test]
    fn constant_diffusion_row() {
        let n = 5;
        let x = solve_cyclic_tridiagonal(&[-1.0; 5], &[3.0; 5], &[-1.0; 5], &[2.0; 5]).unwrap();
        assert_eq!(x.len(), n);
        assert!(x.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..40, seed in proptest::collection::vec(-1.0f64..1.0, 160)) {
            let lower: Vec<f64> = seed[..n].to_vec();
            let upper: Vec<f64> = seed[40..40 + n].to_vec();
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + seed[80 + i].abs()).collect();
            let rhs: Vec<f64> = seed[120..120 + n].to_vec();
            let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
            let back = apply(&lower, &diag, &upper, &x);
            for (a, b) in back.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
