//! Small dense-vector helpers on `&[f64]` slices.
//!
//! Points in ℝⁿ are plain slices; sampled vector functions are stored
//! node-major in a flat buffer (see [`Samples`]).

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// `y += c * x`
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn is_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Unit vector perpendicular to `theta` in the plane (rotation by +π/2).
pub fn perp2(theta: &[f64]) -> [f64; 2] {
    [-theta[1], theta[0]]
}

/// A vector-valued function sampled at the nodes of a grid, stored
/// node-major: component `k` of node `i` lives at `data[i * dim + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Samples {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Samples {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_fn(len: usize, dim: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut s = Samples::zeros(len, dim);
        for i in 0..len {
            f(i, s.row_mut(i));
        }
        s
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn add(&self, other: &Samples) -> Samples {
        Samples {
            dim: self.dim,
            data: add(&self.data, &other.data),
        }
    }

    pub fn sub(&self, other: &Samples) -> Samples {
        Samples {
            dim: self.dim,
            data: sub(&self.data, &other.data),
        }
    }

    pub fn scaled(&self, c: f64) -> Samples {
        Samples {
            dim: self.dim,
            data: scale(&self.data, c),
        }
    }

    /// Pointwise Euclidean norms.
    pub fn norms(&self) -> Vec<f64> {
        self.rows().map(norm).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.rows().map(norm).fold(0.0, f64::max)
    }
}
