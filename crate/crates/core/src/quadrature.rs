//! Angular quadratures with exact antipodal pairing.
//!
//! Weights are normalised to sum to one, so the angular average of a grid
//! function is the plain weighted sum `Σ w_k g_k`.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularKind {
    /// Direction cosines on (-1, 1), midpoint rule.
    Midpoint,
    /// Direction cosines on (-1, 1), Gauss-Legendre rule.
    Gauss,
    /// Uniform angles on the unit circle.
    Circle,
}

/// The positive half of a quadrature: the nodes on which even/odd parity
/// components are stored. Weights are renormalised to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSet {
    /// Index into the full quadrature of each half node.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl HalfSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    kind: AngularKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
    parity: Vec<usize>,
    half: HalfSet,
}

impl AngularQuadrature {
    /// Midpoint rule on a uniform grid of (-1, 1).
    pub fn midpoint(n: usize) -> Result<Self> {
        check_even(n, 2)?;
        let h = 2.0 / n as f64;
        let mut nodes: Vec<f64> = (0..n).map(|k| -1.0 + (k as f64 + 0.5) * h).collect();
        // Mirror the upper half so that antipodal nodes are exact negations.
        for k in 0..n / 2 {
            nodes[k] = -nodes[n - 1 - k];
        }
        let weights = vec![1.0 / n as f64; n];
        Ok(Self::slab(AngularKind::Midpoint, nodes, weights))
    }

    /// Gauss-Legendre rule with weights rescaled to sum to one.
    pub fn gauss(n: usize) -> Result<Self> {
        check_even(n, 2)?;
        let (nodes, weights) = gauss_legendre(n);
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self::slab(AngularKind::Gauss, nodes, weights))
    }

    /// `n` uniform angles `θ_j = 2πj/n` on the unit circle.
    pub fn circle(n: usize) -> Result<Self> {
        check_even(n, 4)?;
        let half = n / 2;
        let mut xi = vec![0.0; n];
        let mut eta = vec![0.0; n];
        for j in 0..half {
            let theta = 2.0 * PI * j as f64 / n as f64;
            xi[j] = theta.cos();
            eta[j] = theta.sin();
            xi[j + half] = -xi[j];
            eta[j + half] = -eta[j];
        }
        let nodes = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let weights = vec![1.0 / n as f64; n];
        let parity = (0..n).map(|j| (j + half) % n).collect();
        let indices: Vec<usize> = (0..half).collect();
        let half_set = build_half(&indices, &weights, &xi, &eta);
        Ok(Self {
            kind: AngularKind::Circle,
            nodes,
            weights,
            xi,
            eta,
            parity,
            half: half_set,
        })
    }

    fn slab(kind: AngularKind, nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = nodes.len();
        let xi = nodes.clone();
        let eta = vec![0.0; n];
        let parity = (0..n).map(|k| n - 1 - k).collect();
        let indices: Vec<usize> = (n / 2..n).collect();
        let half = build_half(&indices, &weights, &xi, &eta);
        Self {
            kind,
            nodes,
            weights,
            xi,
            eta,
            parity,
            half,
        }
    }

    pub fn kind(&self) -> AngularKind {
        self.kind
    }

    pub fn is_circle(&self) -> bool {
        self.kind == AngularKind::Circle
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Direction cosines `μ_k` (slab) or angles `θ_j` (circle).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// x-component of each direction.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// y-component of each direction (zero for slab quadratures).
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Index of the antipodal node of each node.
    pub fn parity_map(&self) -> &[usize] {
        &self.parity
    }

    pub fn half(&self) -> &HalfSet {
        &self.half
    }

    /// Spacing used by the discrete AP metric: 2/N for slabs, 2π/N on the circle.
    pub fn cell_measure(&self) -> f64 {
        match self.kind {
            AngularKind::Circle => 2.0 * PI / self.len() as f64,
            _ => 2.0 / self.len() as f64,
        }
    }

    /// Weighted angular average `Σ w_k g_k`.
    pub fn average(&self, g: &[f64]) -> Result<f64> {
        check_len(self.len(), g.len())?;
        Ok(weighted_sum(&self.weights, g))
    }

    /// `Σ w_k μ_k^2` (slab) or `Σ w_j ξ_j^2` (circle).
    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.xi)
            .map(|(w, x)| w * x * x)
            .sum()
    }
}

/// Free-function form of [`AngularQuadrature::average`].
pub fn angular_average(g: &[f64], q: &AngularQuadrature) -> Result<f64> {
    q.average(g)
}

pub(crate) fn weighted_sum(w: &[f64], g: &[f64]) -> f64 {
    w.iter().zip(g).map(|(w, g)| w * g).sum()
}

fn build_half(indices: &[usize], weights: &[f64], xi: &[f64], eta: &[f64]) -> HalfSet {
    let total: f64 = indices.iter().map(|&k| weights[k]).sum();
    HalfSet {
        indices: indices.to_vec(),
        weights: indices.iter().map(|&k| weights[k] / total).collect(),
        xi: indices.iter().map(|&k| xi[k]).collect(),
        eta: indices.iter().map(|&k| eta[k]).collect(),
    }
}

fn check_even(n: usize, min: usize) -> Result<()> {
    if n < min || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "angular node count must be even and at least {min}, got {n}"
        )));
    }
    Ok(())
}

/// Gauss-Legendre nodes (ascending) and weights on (-1, 1) for even `n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n / 2;
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
