//! Graded time grids on a truncated real line.
//!
//! The infinite time axis is truncated to `[-T, T]` and split into panels
//! whose edges follow a sinh law: nearly uniform close to `t = 0`, where the
//! trajectory crosses the interaction region, and geometric far away, where
//! the integrands decay polynomially. Every panel carries Chebyshev–Lobatto
//! nodes (shared at panel edges), so cumulative integrals are spectrally
//! accurate and need no interpolation between iterations.

use serde::{Deserialize, Serialize};

use crate::quadrature::LobattoPanel;
use crate::vecops::Samples;

/// Grid geometry in *distance* units. A trajectory of speed `s` maps it to
/// time through `t = d / s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Width of the panels next to the origin.
    pub panel_width: f64,
    /// Growth rate of the sinh grading; far panels grow by `exp(growth)`.
    pub growth: f64,
    /// Truncation distance. `None` picks it from the long-range decay rate.
    pub reach: Option<f64>,
    /// Chebyshev–Lobatto points per panel (including both edges).
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            panel_width: 0.25,
            growth: 0.25,
            reach: None,
            points: 12,
        }
    }
}

impl GridSpec {
    /// Truncation distance used when `reach` is unset: far enough that
    /// `reach^(-alpha)` is below 1e-14, capped at 1e18.
    pub fn reach_for(&self, alpha: f64) -> f64 {
        self.reach
            .unwrap_or_else(|| 10f64.powf((14.0 / alpha.max(1e-3)).min(18.0)))
    }

    /// Same geometry with every panel split in two.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            panel_width: 0.5 * self.panel_width,
            growth: 0.5 * self.growth,
            ..*self
        }
    }
}

/// A symmetric panel grid on `[-T, T]` with a node at `t = 0`.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    edges: Vec<f64>,
    nodes: Vec<f64>,
    zero: usize,
    panel: LobattoPanel,
}

impl TimeGrid {
    /// Builds the grid for a trajectory of speed `speed` reaching the
    /// distance `reach` in both time directions.
    pub fn symmetric(spec: &GridSpec, speed: f64, reach: f64) -> Self {
        assert!(
            speed > 0.0 && reach > 0.0,
            "grid needs positive speed and reach"
        );
        let scale = spec.panel_width / spec.growth;
        let mut half = vec![0.0];
        let mut k = 1;
        loop {
            let d = scale * (spec.growth * k as f64).sinh();
            half.push(d.min(reach));
            if d >= reach {
                break;
            }
            k += 1;
        }
        let mut edges: Vec<f64> = half.iter().rev().map(|d| -d / speed).collect();
        edges.extend(half.iter().skip(1).map(|d| d / speed));
        Self::from_edges(edges, spec.points)
    }

    /// Builds a grid from explicit increasing panel edges. `0` must be an edge.
    pub fn from_edges(edges: Vec<f64>, points: usize) -> Self {
        assert!(edges.windows(2).all(|w| w[1] > w[0]), "edges must increase");
        let panel = LobattoPanel::new(points);
        let p = panel.len();
        let mut nodes = Vec::with_capacity((edges.len() - 1) * (p - 1) + 1);
        nodes.push(edges[0]);
        for w in edges.windows(2) {
            let c = 0.5 * (w[0] + w[1]);
            let h = 0.5 * (w[1] - w[0]);
            for &x in &panel.nodes[1..] {
                nodes.push(c + h * x);
            }
            // pin the shared edge exactly
            *nodes.last_mut().unwrap() = w[1];
        }
        let zero = nodes
            .iter()
            .position(|&t| t == 0.0)
            .expect("t = 0 must be a panel edge");
        TimeGrid {
            edges,
            nodes,
            zero,
            panel,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn zero_index(&self) -> usize {
        self.zero
    }

    pub fn t_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn points_per_panel(&self) -> usize {
        self.panel.len()
    }

    fn panels(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let stride = self.panel.len() - 1;
        self.edges
            .windows(2)
            .enumerate()
            .map(move |(k, w)| (k * stride, 0.5 * (w[1] - w[0])))
    }

    /// `∫_{t_0}^{t_i} g` at every node.
    pub fn cumulative_left(&self, g: &Samples) -> Samples {
        debug_assert_eq!(g.len(), self.len());
        let dim = g.dim;
        let mut out = Samples::zeros(self.len(), dim);
        let p = self.panel.len();
        for (base, h) in self.panels() {
            for i in 1..p {
                let row = &self.panel.cumulative[i];
                for k in 0..dim {
                    let mut acc = 0.0;
                    for (j, w) in row.iter().enumerate() {
                        acc += w * g.data[(base + j) * dim + k];
                    }
                    out.data[(base + i) * dim + k] = out.data[base * dim + k] + h * acc;
                }
            }
        }
        out
    }

    /// `∫_{t_i}^{t_end} g` at every node, accumulated from the right end so
    /// that small tail values keep their relative accuracy.
    pub fn cumulative_right(&self, g: &Samples) -> Samples {
        let mut out = Samples::zeros(self.len(), g.dim);
        let panels: Vec<_> = self.panels().collect();
        for &(base, h) in panels.iter().rev() {
            self.accumulate_backward(g, &mut out, base, h);
        }
        out
    }

    /// `∫_0^{t_i} g` (signed) at every node, accumulated outward from `t = 0`.
    pub fn cumulative_from_zero(&self, g: &Samples) -> Samples {
        let dim = g.dim;
        let mut out = Samples::zeros(self.len(), dim);
        let p = self.panel.len();
        let panels: Vec<_> = self.panels().collect();
        for &(base, h) in panels.iter().filter(|(b, _)| *b >= self.zero) {
            for i in 1..p {
                let row = &self.panel.cumulative[i];
                for k in 0..dim {
                    let mut acc = 0.0;
                    for (j, w) in row.iter().enumerate() {
                        acc += w * g.data[(base + j) * dim + k];
                    }
                    out.data[(base + i) * dim + k] = out.data[base * dim + k] + h * acc;
                }
            }
        }
        for &(base, h) in panels.iter().rev().filter(|(b, _)| *b < self.zero) {
            self.accumulate_backward(g, &mut out, base, h);
        }
        // left of zero the accumulated values are ∫_{t_i}^0 g
        for i in 0..self.zero {
            for v in out.row_mut(i) {
                *v = -*v;
            }
        }
        out
    }

    /// Fills the panel starting at `base` with `out[right edge] + ∫_{t_i}^{right} g`.
    fn accumulate_backward(&self, g: &Samples, out: &mut Samples, base: usize, h: f64) {
        let dim = g.dim;
        let p = self.panel.len();
        let last = &self.panel.cumulative[p - 1];
        for i in (0..p - 1).rev() {
            let row = &self.panel.cumulative[i];
            for k in 0..dim {
                let mut acc = 0.0;
                for j in 0..p {
                    acc += (last[j] - row[j]) * g.data[(base + j) * dim + k];
                }
                out.data[(base + i) * dim + k] = out.data[(base + p - 1) * dim + k] + h * acc;
            }
        }
    }

    /// `∫_{t_0}^{t_end} g`.
    pub fn integral(&self, g: &Samples) -> Vec<f64> {
        let dim = g.dim;
        let mut total = vec![0.0; dim];
        for (base, h) in self.panels() {
            for (j, w) in self.panel.weights.iter().enumerate() {
                for k in 0..dim {
                    total[k] += h * w * g.data[(base + j) * dim + k];
                }
            }
        }
        total
    }

    /// `∫_{t_0}^{0} g` and `∫_0^{t_end} g`.
    pub fn split_integrals(&self, g: &Samples) -> (Vec<f64>, Vec<f64>) {
        let c = self.cumulative_from_zero(g);
        let past = c.row(0).iter().map(|v| -v).collect();
        (past, c.row(c.len() - 1).to_vec())
    }

    fn locate(&self, t: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= t);
        k.saturating_sub(1).min(self.edges.len() - 2)
    }

    /// Evaluates the panel interpolant of `g` at an arbitrary `t` in range.
    pub fn interpolate(&self, g: &Samples, t: f64) -> Vec<f64> {
        let t = t.clamp(self.t_min(), self.t_max());
        let k = self.locate(t);
        let stride = self.panel.len() - 1;
        let base = k * stride;
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        let x = (2.0 * t - a - b) / (b - a);
        match self.panel.interpolation_weights(x) {
            Err(j) => g.row(base + j).to_vec(),
            Ok(w) => {
                let mut out = vec![0.0; g.dim];
                for (j, wj) in w.iter().enumerate() {
                    for (o, v) in out.iter_mut().zip(g.row(base + j)) {
                        *o += wj * v;
                    }
                }
                out
            }
        }
    }

    /// Second derivative of the panel interpolants at every node; values at
    /// shared panel edges are averaged over the two panels.
    pub fn second_derivative(&self, g: &Samples) -> Samples {
        let p = self.panel.len();
        let dm = &self.panel.differentiation;
        let mut out = Samples::zeros(self.len(), g.dim);
        let mut hits = vec![0u32; self.len()];
        let mut first = vec![0.0; p * g.dim];
        for (base, h) in self.panels() {
            first.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..p {
                for j in 0..p {
                    for k in 0..g.dim {
                        first[i * g.dim + k] += dm[i][j] * g.row(base + j)[k];
                    }
                }
            }
            for i in 0..p {
                let row = out.row_mut(base + i);
                for j in 0..p {
                    for k in 0..g.dim {
                        row[k] += dm[i][j] * first[j * g.dim + k] / (h * h);
                    }
                }
                hits[base + i] += 1;
            }
        }
        for (i, &c) in hits.iter().enumerate() {
            if c > 1 {
                for v in out.row_mut(i) {
                    *v /= c as f64;
                }
            }
        }
        out
    }

    /// Times at which sup-norms are evaluated: every node plus `extra`
    /// equally spaced interior points per node gap, so that interpolant
    /// extrema between nodes are seen.
    pub fn probe_times(&self, extra: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * (extra + 1));
        for w in self.nodes.windows(2) {
            out.push(w[0]);
            for m in 1..=extra {
                out.push(w[0] + (w[1] - w[0]) * m as f64 / (extra + 1) as f64);
            }
        }
        out.push(self.t_max());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::symmetric(&GridSpec::default(), 2.0, 1e6)
    }

    #[test]
    fn second_derivative_of_smooth_function() {
        let g = TimeGrid::symmetric(&GridSpec::default(), 1.0, 20.0);
        let f = Samples::from_fn(g.len(), 1, |i, o| o[0] = (0.7 * g.nodes()[i]).sin());
        let d = g.second_derivative(&f);
        for (i, t) in g.nodes().iter().enumerate() {
            assert!(
                (d.row(i)[0] + 0.49 * (0.7 * t).sin()).abs() < 1e-8,
                "t = {t}"
            );
        }
    }

    #[test]
    fn grid_is_symmetric_with_zero_node() {
        let g = grid();
        let t = g.nodes();
        assert_eq!(t[g.zero_index()], 0.0);
        let n = t.len();
        for i in 0..n {
            assert!((t[i] + t[n - 1 - i]).abs() <= 1e-12 * t[i].abs().max(1.0));
        }
        assert!((g.t_max() - 5e5).abs() < 1e-6);
    }

    #[test]
    fn cumulative_integral_of_lorentzian() {
        let g = grid();
        let f = Samples::from_fn(g.len(), 1, |i, o| {
            let t = g.nodes()[i];
            o[0] = 1.0 / (1.0 + t * t);
        });
        let total = g.integral(&f)[0];
        let tmax = g.t_max();
        let exact = 2.0 * tmax.atan();
        assert!((total - exact).abs() < 1e-12, "{total} vs {exact}");
        let left = g.cumulative_left(&f);
        for (i, &t) in g.nodes().iter().enumerate() {
            let want = t.atan() + tmax.atan();
            assert!((left.row(i)[0] - want).abs() < 1e-12);
        }
        let from0 = g.cumulative_from_zero(&f);
        for (i, &t) in g.nodes().iter().enumerate() {
            assert!((from0.row(i)[0] - t.atan()).abs() < 1e-12);
        }
        let right = g.cumulative_right(&f);
        for (i, &t) in g.nodes().iter().enumerate() {
            assert!((right.row(i)[0] - (tmax.atan() - t.atan())).abs() < 1e-12);
        }
    }

    #[test]
    fn tails_keep_relative_accuracy() {
        let g = grid();
        let tmax = g.t_max();
        let f = Samples::from_fn(g.len(), 1, |i, o| {
            let t = g.nodes()[i];
            o[0] = 1.0 / (1.0 + t * t);
        });
        let right = g.cumulative_right(&f);
        let from0 = g.cumulative_from_zero(&f);
        for (i, &t) in g.nodes().iter().enumerate() {
            if t > 10.0 && t < tmax {
                // ∫_t^T (1+s²)^-1 ds = atan((T-t)/(1+tT))
                let want = ((tmax - t) / (1.0 + t * tmax)).atan();
                assert!(((right.row(i)[0] - want) / want).abs() < 1e-11, "t = {t}");
            }
            if t.abs() < 1e-2 && t != 0.0 {
                assert!(((from0.row(i)[0] - t.atan()) / t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_between_nodes() {
        let g = grid();
        let f = Samples::from_fn(g.len(), 2, |i, o| {
            let t = g.nodes()[i];
            o[0] = (-t * t).exp();
            o[1] = t.sin() / (1.0 + t * t);
        });
        for &t in &[-3.3, -0.0137, 0.0, 0.51, 7.9] {
            let v = g.interpolate(&f, t);
            assert!((v[0] - (-t * t).exp()).abs() < 1e-11);
            assert!((v[1] - t.sin() / (1.0 + t * t)).abs() < 1e-11);
        }
    }

    #[test]
    fn reach_defaults_follow_decay_rate() {
        let spec = GridSpec::default();
        assert_eq!(spec.reach_for(1.0), 1e14);
        assert_eq!(spec.reach_for(0.5), 1e18);
    }
}
