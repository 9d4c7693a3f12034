//! Sampled trajectories with cubic Hermite interpolation and CSV export.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::Samples;

/// How a [`Trajectory`] is evaluated between its nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Piecewise cubic Hermite using positions and velocities at the nodes.
    CubicHermite,
}

/// Solver diagnostics attached to a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Final Picard residual, `sup |g(t)/t|` for free flows.
    pub residual: f64,
    /// Residual history of the iteration that produced the trajectory.
    pub residuals: Vec<f64>,
    /// Analytic bound on the contribution of the truncated time tails.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Samples,
    pub velocities: Samples,
    pub interpolation: Interpolation,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, positions: Samples, velocities: Samples) -> Result<Self> {
        if positions.len() != times.len() || velocities.len() != times.len() {
            return Err(Error::Usage(
                "times, positions and velocities differ in length".into(),
            ));
        }
        if positions.dim != velocities.dim {
            return Err(Error::Usage(
                "position and velocity dimensions differ".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant(
                "trajectory times must increase strictly".into(),
            ));
        }
        if positions
            .data
            .iter()
            .chain(&velocities.data)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Numeric(
                "trajectory contains non-finite samples".into(),
            ));
        }
        Ok(Trajectory {
            times,
            positions,
            velocities,
            interpolation: Interpolation::CubicHermite,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn with_diagnostics(mut self, diagnostics: Diagnostics) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        self.positions.row(i)
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        self.velocities.row(i)
    }

    /// Position and velocity at an arbitrary time inside the sampled span.
    pub fn state_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return Err(Error::Domain(format!(
                "t = {t} lies outside the trajectory span"
            )));
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p0, p1) = (self.positions.row(k), self.positions.row(k + 1));
        let (m0, m1) = (self.velocities.row(k), self.velocities.row(k + 1));
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        let mut x = vec![0.0; self.dim()];
        let mut v = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            x[i] = h00 * p0[i] + h10 * h * m0[i] + h01 * p1[i] + h11 * h * m1[i];
            v[i] = d00 * p0[i] + d10 * m0[i] + d01 * p1[i] + d11 * m1[i];
        }
        Ok((x, v))
    }

    /// Writes `t, x_1..x_n, v_1..v_n` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend((1..=dim).map(|i| format!("v{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.17e}")];
            row.extend(self.position(i).iter().map(|x| format!("{x:.17e}")));
            row.extend(self.velocity(i).iter().map(|x| format!("{x:.17e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola() -> Trajectory {
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.3 - 1.0).collect();
        let pos = Samples::from_fn(times.len(), 2, |i, o| {
            let t = times[i];
            o[0] = t * t * t;
            o[1] = 2.0 - t;
        });
        let vel = Samples::from_fn(times.len(), 2, |i, o| {
            let t = times[i];
            o[0] = 3.0 * t * t;
            o[1] = -1.0;
        });
        Trajectory::new(times, pos, vel).unwrap()
    }

    #[test]
    fn hermite_is_exact_for_cubics() {
        let tr = parabola();
        for &t in &[-1.0, -0.77, 0.0, 0.41, 2.0] {
            let (x, v) = tr.state_at(t).unwrap();
            assert!((x[0] - t * t * t).abs() < 1e-13);
            assert!((x[1] - (2.0 - t)).abs() < 1e-13);
            assert!((v[0] - 3.0 * t * t).abs() < 1e-12);
        }
        assert!(tr.state_at(2.5).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        parabola().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,v1,v2");
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[1].split(',').count(), 5);
    }

    #[test]
    fn rejects_unordered_times() {
        let s = Samples::zeros(2, 1);
        assert!(Trajectory::new(vec![1.0, 1.0], s.clone(), s).is_err());
    }
}
