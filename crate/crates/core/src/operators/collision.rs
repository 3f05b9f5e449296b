//! Per-cell collision shifts `B = (ε²/Δt + σ)I − σP` and their inverses.
//!
//! Every function takes the weight vector of the node set it acts on: the
//! full quadrature for the non-symmetric paths, or the renormalised half set
//! for parity fields.

use crate::cross_section::LowRankKernel;
use crate::error::{check_len, Error, Result};
use crate::operators::SchemeScalars;
use crate::quadrature::weighted_sum;

#[cfg(test)]
thread_local! {
    /// Node visits performed by the shift inverse.
    pub(crate) static INVERSE_VISITS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!(
            "cross section must be non-negative, got {sigma}"
        )));
    }
    Ok(())
}

pub fn apply_collision_shift(
    g: &[f64],
    sigma: f64,
    s: &SchemeScalars,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_len(w.len(), g.len())?;
    check_sigma(sigma)?;
    let mut out = vec![0.0; g.len()];
    shift_into(g, sigma, s.shift(), w, &mut out);
    Ok(out)
}

pub fn apply_collision_shift_inverse(
    g: &[f64],
    sigma: f64,
    s: &SchemeScalars,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_len(w.len(), g.len())?;
    check_sigma(sigma)?;
    let mut out = vec![0.0; g.len()];
    shift_inverse_into(g, sigma, s.shift(), w, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn shift_into(g: &[f64], sigma: f64, shift: f64, w: &[f64], out: &mut [f64]) {
    let m = weighted_sum(w, g);
    let a = shift + sigma;
    for (o, x) in out.iter_mut().zip(g) {
        *o = a * x - sigma * m;
    }
}

/// Mean component divided by `ε²/Δt`, fluctuation by `ε²/Δt + σ`.
#[inline]
pub(crate) fn shift_inverse_into(g: &[f64], sigma: f64, shift: f64, w: &[f64], out: &mut [f64]) {
    #[cfg(test)]
    INVERSE_VISITS.with(|c| c.set(c.get() + 2 * g.len()));
    let m = weighted_sum(w, g);
    let mean_part = m / shift;
    let inv = 1.0 / (shift + sigma);
    for (o, x) in out.iter_mut().zip(g) {
        *o = mean_part + (x - m) * inv;
    }
}

/// `P^σ g = Σ ξ_m (v_mᵀ diag(w) g) v_m`.
pub fn apply_aniso_projector(g: &[f64], kernel: &LowRankKernel, w: &[f64]) -> Result<Vec<f64>> {
    check_len(w.len(), g.len())?;
    check_len(w.len(), kernel.eigenvectors()[0].len())?;
    let mut out = vec![0.0; g.len()];
    for (xi, v) in kernel.eigenvalues().iter().zip(kernel.eigenvectors()) {
        let c = xi * weighted_dot(w, v, g);
        for (o, vk) in out.iter_mut().zip(v) {
            *o += c * vk;
        }
    }
    Ok(out)
}

pub fn apply_aniso_shift(
    g: &[f64],
    sigma0: f64,
    kernel: &LowRankKernel,
    s: &SchemeScalars,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_sigma(sigma0)?;
    let p = apply_aniso_projector(g, kernel, w)?;
    let a = s.shift() + sigma0;
    Ok(g.iter()
        .zip(&p)
        .map(|(x, px)| a * x - sigma0 * px)
        .collect())
}

/// Inverse of `B^σ` from its eigenpairs: `λ_m = ε²/Δt + σ₀(1 − ξ_m)` on
/// each kernel mode and `ε²/Δt + σ₀` on the complement.
pub fn apply_aniso_shift_inverse(
    g: &[f64],
    sigma0: f64,
    kernel: &LowRankKernel,
    s: &SchemeScalars,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_len(w.len(), g.len())?;
    check_len(w.len(), kernel.eigenvectors()[0].len())?;
    check_sigma(sigma0)?;
    let mut out = vec![0.0; g.len()];
    aniso_inverse_into(g, sigma0, kernel, s.shift(), w, &mut out)?;
    Ok(out)
}

pub(crate) fn aniso_inverse_into(
    g: &[f64],
    sigma0: f64,
    kernel: &LowRankKernel,
    shift: f64,
    w: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let base = shift + sigma0;
    for (o, x) in out.iter_mut().zip(g) {
        *o = x / base;
    }
    for (xi, v) in kernel.eigenvalues().iter().zip(kernel.eigenvectors()) {
        let lambda = shift + sigma0 * (1.0 - xi);
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Singular(format!(
                "collision eigenvalue {lambda} for kernel mode {xi}"
            )));
        }
        let c = weighted_dot(w, v, g);
        let d = c * (1.0 / lambda - 1.0 / base);
        for (o, vk) in out.iter_mut().zip(v) {
            *o += d * vk;
        }
    }
    Ok(())
}

#[inline]
fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}
