//! Reference-interval quadrature rules.
//!
//! Two building blocks are used throughout the crate: Gauss–Legendre rules
//! for plain definite integrals, and a Chebyshev–Lobatto panel rule that also
//! carries a cumulative ("spectral integration") matrix so that indefinite
//! integrals can be evaluated at every node of a panel.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Chebyshev–Lobatto points on [-1, 1] (endpoints included) together with
/// the matrices needed for panel-wise spectral integration and interpolation.
#[derive(Debug, Clone)]
pub struct LobattoPanel {
    /// Increasing nodes, `nodes[0] = -1`, `nodes[p-1] = 1`.
    pub nodes: Vec<f64>,
    /// `cumulative[i][j] = ∫_{-1}^{nodes[i]} ℓ_j`, with ℓ_j the Lagrange basis.
    pub cumulative: Vec<Vec<f64>>,
    /// Full-panel weights (`cumulative[p-1]`).
    pub weights: Vec<f64>,
    /// Barycentric weights for interpolation.
    pub bary: Vec<f64>,
    /// `differentiation[i][j] = ℓ_j'(nodes[i])`.
    pub differentiation: Vec<Vec<f64>>,
}

impl LobattoPanel {
    pub fn new(points: usize) -> Self {
        assert!(points >= 3, "a Lobatto panel needs at least three points");
        let p = points;
        let nodes: Vec<f64> = (0..p)
            .map(|k| -(PI * k as f64 / (p - 1) as f64).cos())
            .collect();
        let bary: Vec<f64> = (0..p)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == p - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        // Each Lagrange basis polynomial has degree p-1, so a p-point
        // Gauss rule integrates it exactly over any subinterval.
        let gl = GaussLegendre::new(p);
        let mut cumulative = vec![vec![0.0; p]; p];
        for (i, row) in cumulative.iter_mut().enumerate().skip(1) {
            let b = nodes[i];
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = gl.integrate(-1.0, b, |x| lagrange_basis(&nodes, j, x));
            }
        }
        let weights = cumulative[p - 1].clone();
        let mut differentiation = vec![vec![0.0; p]; p];
        for i in 0..p {
            let mut diag = 0.0;
            for j in 0..p {
                if i != j {
                    let d = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                    differentiation[i][j] = d;
                    diag -= d;
                }
            }
            differentiation[i][i] = diag;
        }
        LobattoPanel {
            nodes,
            cumulative,
            weights,
            bary,
            differentiation,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric weights for evaluating the panel interpolant at `x`.
    /// Returns `None` when `x` coincides with a node (use that node).
    pub fn interpolation_weights(&self, x: f64) -> Result<Vec<f64>, usize> {
        let mut w = Vec::with_capacity(self.nodes.len());
        let mut total = 0.0;
        for (j, (&xj, &bj)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return Err(j);
            }
            let c = bj / d;
            total += c;
            w.push(c);
        }
        for c in &mut w {
            *c /= total;
        }
        Ok(w)
    }
}

fn lagrange_basis(nodes: &[f64], j: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
        .product()
}
