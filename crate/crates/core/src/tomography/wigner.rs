use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular sampling grid in the `(x, p)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::square(4.0, 61)
    }
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        GridSpec {
            x_min: -half_width,
            x_max: half_width,
            nx: n,
            p_min: -half_width,
            p_max: half_width,
            np: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64, n: usize| lo.is_finite() && hi.is_finite() && hi > lo && n >= 2;
        if !ok(self.x_min, self.x_max, self.nx) || !ok(self.p_min, self.p_max, self.np) {
            return Err(Error::param(
                "grid",
                "need finite increasing bounds and >= 2 points per axis",
            ));
        }
        Ok(())
    }

    pub fn x_axis(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        axis(self.p_min, self.p_max, self.np)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    /// Grid points in row-major order (`x` outer, `p` inner).
    pub fn points(&self) -> Vec<(f64, f64)> {
        let ps = self.p_axis();
        self.x_axis()
            .into_iter()
            .flat_map(|x| ps.iter().map(move |&p| (x, p)))
            .collect()
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Quasi-probability values on a [`GridSpec`]; `values[ix * np + ip]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        grid.validate()?;
        let values = grid.points().par_iter().map(|&(x, p)| f(x, p)).collect();
        Ok(WignerGrid {
            x_axis: grid.x_axis(),
            p_axis: grid.p_axis(),
            values,
        })
    }

    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.p_axis.len() + ip]
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let (nx, np) = (self.x_axis.len(), self.p_axis.len());
        let dx = (self.x_axis[nx - 1] - self.x_axis[0]) / (nx - 1) as f64;
        let dp = (self.p_axis[np - 1] - self.p_axis[0]) / (np - 1) as f64;
        let edge = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut s = 0.0;
        for ix in 0..nx {
            for ip in 0..np {
                s += edge(ix, nx) * edge(ip, np) * self.at(ix, ip);
            }
        }
        s * dx * dp
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid coordinates of the maximum.
    pub fn peak(&self) -> (f64, f64) {
        let np = self.p_axis.len();
        let k = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        (self.x_axis[k / np], self.p_axis[k % np])
    }

    /// Marginal along `p` (integrated over `p`) at each `x`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let np = self.p_axis.len();
        let dp = (self.p_axis[np - 1] - self.p_axis[0]) / (np - 1) as f64;
        (0..self.x_axis.len())
            .map(|ix| {
                let row = &self.values[ix * np..(ix + 1) * np];
                dp * (row.iter().sum::<f64>() - 0.5 * (row[0] + row[np - 1]))
            })
            .collect()
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64, p: f64) -> f64 {
        let (nx, np) = (self.x_axis.len(), self.p_axis.len());
        let fx = (x - self.x_axis[0]) / (self.x_axis[nx - 1] - self.x_axis[0]) * (nx - 1) as f64;
        let fp = (p - self.p_axis[0]) / (self.p_axis[np - 1] - self.p_axis[0]) * (np - 1) as f64;
        if !(0.0..=(nx - 1) as f64).contains(&fx) || !(0.0..=(np - 1) as f64).contains(&fp) {
            return 0.0;
        }
        let (ix, ip) = ((fx as usize).min(nx - 2), (fp as usize).min(np - 2));
        let (tx, tp) = (fx - ix as f64, fp - ip as f64);
        (1.0 - tx) * (1.0 - tp) * self.at(ix, ip)
            + tx * (1.0 - tp) * self.at(ix + 1, ip)
            + (1.0 - tx) * tp * self.at(ix, ip + 1)
            + tx * tp * self.at(ix + 1, ip + 1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,p,w\n");
        for (ix, x) in self.x_axis.iter().enumerate() {
            for (ip, p) in self.p_axis.iter().enumerate() {
                let _ = writeln!(s, "{x},{p},{:e}", self.at(ix, ip));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_integral_and_marginal() {
        let w = WignerGrid::from_fn(&GridSpec::default(), |x, p| (-(x * x + p * p)).exp() / PI)
            .unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-6);
        assert_eq!(w.peak(), (0.0, 0.0));
        let m = w.x_marginal();
        assert!((m[30] - 1.0 / PI.sqrt()).abs() < 1e-6);
        assert!((w.interpolate(0.05, 0.0) - w.at(30, 30)).abs() < 0.01);
    }

    #[test]
    fn csv_layout() {
        let w = WignerGrid::from_fn(&GridSpec::square(1.0, 2), |x, p| x + 10.0 * p).unwrap();
        assert_eq!(
            w.to_csv(),
            "x,p,w\n-1,-1,-1.1e1\n-1,1,9e0\n1,-1,-9e0\n1,1,1.1e1\n"
        );
    }

    #[test]
    fn bad_grid() {
        assert!(GridSpec::square(1.0, 1).validate().is_err());
        assert!(GridSpec::square(-1.0, 5).validate().is_err());
    }
}
