//! The weighted space `M_r` of deviations sampled on a [`TimeGrid`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::vecops::{norm, Samples};

/// A continuous deviation `f: ℝ → ℝⁿ` sampled on a symmetric grid, with
/// norm `sup_{t≤0} |f| + sup_{t≥0} |f(t)|/(1+t)`. Past and future share the
/// node at `t = 0`. Between nodes the panel polynomial interpolant is used.
#[derive(Debug, Clone)]
pub struct MrFunction {
    grid: Arc<TimeGrid>,
    values: Samples,
    r: f64,
    probes: usize,
}

impl MrFunction {
    pub fn new(grid: Arc<TimeGrid>, values: Samples, r: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("M_r function has non-finite samples".into()));
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "ball radius must be positive, got {r}"
            )));
        }
        Ok(MrFunction {
            grid,
            values,
            r,
            probes: 1,
        })
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize, r: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, Samples::zeros(n, dim), r)
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(
        grid: Arc<TimeGrid>,
        dim: usize,
        r: f64,
        mut f: impl FnMut(f64, &mut [f64]),
    ) -> Result<Self> {
        let t = grid.nodes().to_vec();
        let values = Samples::from_fn(t.len(), dim, |i, out| f(t[i], out));
        Self::new(grid, values, r)
    }

    /// Number of interior probe points per node gap used by [`Self::norm`].
    pub fn with_probes(mut self, probes: usize) -> Self {
        self.probes = probes;
        self
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &Samples {
        &self.values
    }

    pub fn into_values(self) -> Samples {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.dim
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        self.grid.interpolate(&self.values, t)
    }

    /// The norm over nodes only.
    pub fn node_norm(&self) -> f64 {
        weighted_norm(self.grid.nodes(), &self.values)
    }

    /// The norm over nodes and interpolated probe points.
    pub fn norm(&self) -> f64 {
        let node = self.node_norm();
        if self.probes == 0 {
            return node;
        }
        let mut past: f64 = 0.0;
        let mut future: f64 = 0.0;
        for t in self.grid.probe_times(self.probes) {
            let v = norm(&self.grid.interpolate(&self.values, t));
            if t <= 0.0 {
                past = past.max(v);
            }
            if t >= 0.0 {
                future = future.max(v / (1.0 + t));
            }
        }
        node.max(past + future)
    }

    pub fn in_ball(&self) -> bool {
        self.norm() <= self.r
    }

    /// `‖self - other‖` over nodes and probes.
    pub fn distance(&self, other: &MrFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let diff = MrFunction {
            grid: self.grid.clone(),
            values: self.values.sub(&other.values),
            r: self.r,
            probes: self.probes,
        };
        Ok(diff.norm())
    }

    pub(crate) fn check_same_grid(&self, other: &MrFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.len() == other.grid.len() && self.grid.nodes() == other.grid.nodes())
        {
            if self.dim() == other.dim() {
                return Ok(());
            }
        }
        Err(Error::Usage("M_r functions live on different grids".into()))
    }
}

/// `sup_{t≤0}|g| + sup_{t≥0}|g|/(1+t)` over the given nodes.
pub(crate) fn weighted_norm(t: &[f64], g: &Samples) -> f64 {
    let mut past: f64 = 0.0;
    let mut future: f64 = 0.0;
    for (ti, row) in t.iter().zip(g.rows()) {
        let v = norm(row);
        if *ti <= 0.0 {
            past = past.max(v);
        }
        if *ti >= 0.0 {
            future = future.max(v / (1.0 + ti));
        }
    }
    past + future
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid() -> Arc<TimeGrid> {
        Arc::new(TimeGrid::symmetric(&GridSpec::default(), 10.0, 1e4))
    }

    #[test]
    fn norm_of_constant_and_linear() {
        let g = grid();
        let c =
            MrFunction::from_fn(g.clone(), 2, 1.0, |_, o| o.copy_from_slice(&[0.3, 0.4])).unwrap();
        // sup over the past is 0.5, weighted future sup is attained at t = 0
        assert!((c.norm() - 1.0).abs() < 1e-14);
        let l = MrFunction::from_fn(g, 1, 1.0, |t, o| o[0] = if t > 0.0 { 0.2 * t } else { 0.0 })
            .unwrap();
        let tmax = l.grid().t_max();
        assert!((l.norm() - 0.2 * tmax / (1.0 + tmax)).abs() < 1e-12);
        assert!(l.in_ball());
    }

    #[test]
    fn probes_see_between_nodes() {
        let g = grid();
        let f = MrFunction::from_fn(g, 1, 1.0, |t, o| o[0] = (-(t + 0.0123).powi(2) * 1e4).exp())
            .unwrap();
        assert!(f.norm() >= f.node_norm());
        let fine = f.clone().with_probes(8);
        assert!(fine.norm() >= f.node_norm());
        // past sup 1 at the spike, weighted future sup at t = 0
        let exact = 1.0 + (-(0.0123f64).powi(2) * 1e4).exp();
        assert!(fine.norm() >= f.norm());
        assert!((fine.norm() - exact).abs() < 1e-3 * exact);
        assert!((f.node_norm() - exact).abs() > (fine.norm() - exact).abs());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let g = grid();
        assert!(MrFunction::new(g.clone(), Samples::zeros(3, 1), 1.0).is_err());
        assert!(MrFunction::zeros(g.clone(), 1, 0.0).is_err());
        let other = Arc::new(TimeGrid::symmetric(&GridSpec::default(), 3.0, 1e4));
        let a = MrFunction::zeros(g, 1, 1.0).unwrap();
        let b = MrFunction::zeros(other, 1, 1.0).unwrap();
        assert!(a.distance(&b).is_err());
    }
}
