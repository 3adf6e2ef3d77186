//! Piecewise-cubic Hermite interpolation on a sorted 1D grid.
//!
//! Node slopes are derivatives of the local five-point interpolating
//! polynomial (three-point below five nodes, or where the five-point
//! slope disagrees in sign with monotone data). Wherever the
//! data is monotone over an interval and its two neighbours, the
//! Fritsch-Carlson limiter bounds the slopes so the interpolant cannot
//! overshoot; intervals adjacent to a local extremum of the data keep the
//! unlimited slopes. Strictly monotone data therefore always yields a
//! strictly monotone interpolant, which [`Interpolant::invert`] relies on.

use crate::{Error, Result};

/// Residual accepted by [`monotone_invert`].
pub const INVERT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpKind {
    #[default]
    MonotoneCubic,
    /// Piecewise linear, for debugging.
    Linear,
}

#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    kind: InterpKind,
}

impl Interpolant {
    pub fn new(grid: &[f64], values: &[f64]) -> Result<Self> {
        Self::with_kind(grid, values, InterpKind::MonotoneCubic)
    }

    pub fn with_kind(grid: &[f64], values: &[f64], kind: InterpKind) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::validation("interpolation needs at least 2 nodes"));
        }
        if grid.len() != values.len() {
            return Err(Error::validation(format!(
                "grid has {} nodes but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::validation(format!(
                "grid is not strictly increasing at node {}",
                k + 1
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite value at node {k}")));
        }
        let slopes = match kind {
            InterpKind::MonotoneCubic => monotone_slopes(grid, values),
            InterpKind::Linear => vec![0.0; grid.len()],
        };
        Ok(Self {
            grid: grid.to_vec(),
            values: values.to_vec(),
            slopes,
            kind,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn x_max(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.grid.len();
        let k = self.grid.partition_point(|&g| g <= x);
        k.clamp(1, n - 1) - 1
    }

    /// Value and first derivative at an in-range point.
    fn eval_in_range(&self, x: f64) -> (f64, f64) {
        let i = self.interval(x);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = x1 - x0;
        if self.kind == InterpKind::Linear {
            let d = (y1 - y0) / h;
            return (y0 + d * (x - x0), d);
        }
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let s = (x - x0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * m0 + dh11 * m1;
        (value, deriv)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Extrapolation {
                query: x,
                min: self.x_min(),
                max: self.x_max(),
            });
        }
        Ok(self.eval_in_range(x).0)
    }

    /// Value and derivative; outside the grid the boundary value is returned
    /// with zero derivative and `clamped = true`.
    pub fn eval_clamped(&self, x: f64) -> Clamped {
        if x < self.x_min() {
            Clamped {
                value: self.values[0],
                derivative: 0.0,
                clamped: true,
            }
        } else if x > self.x_max() {
            Clamped {
                value: self.values[self.values.len() - 1],
                derivative: 0.0,
                clamped: true,
            }
        } else {
            let (value, derivative) = self.eval_in_range(x);
            Clamped {
                value,
                derivative,
                clamped: false,
            }
        }
    }

    /// Solves `p(x) = y` for strictly increasing data by bracketed bisection.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if let Some(k) = self.values.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::validation(format!(
                "samples are not strictly increasing at node {}",
                k + 1
            )));
        }
        let (lo_v, hi_v) = (self.values[0], self.values[self.values.len() - 1]);
        if !(y >= lo_v && y <= hi_v) {
            return Err(Error::Extrapolation {
                query: y,
                min: lo_v,
                max: hi_v,
            });
        }
        let k = self.values.partition_point(|&v| v <= y).clamp(1, self.values.len() - 1) - 1;
        if self.values[k] == y {
            return Ok(self.grid[k]);
        }
        if self.values[k + 1] == y {
            return Ok(self.grid[k + 1]);
        }
        let (mut lo, mut hi) = (self.grid[k], self.grid[k + 1]);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let r = self.eval_in_range(mid).0 - y;
            // run to interval collapse: flat data needs x accuracy, not just a small residual
            if r == 0.0 || mid == lo || mid == hi {
                break;
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub derivative: f64,
    pub clamped: bool,
}

fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut low = vec![0.0; n];
    for k in 1..n - 1 {
        low[k] = (h[k] * d[k - 1] + h[k - 1] * d[k]) / (h[k - 1] + h[k]);
    }
    low[0] = ((2.0 * h[0] + h[1]) * d[0] - h[0] * d[1]) / (h[0] + h[1]);
    let (a, b) = (h[n - 2], h[n - 3]);
    low[n - 1] = ((2.0 * a + b) * d[n - 2] - a * d[n - 3]) / (a + b);
    let mut m = low.clone();
    if n >= 5 {
        for (k, mk) in m.iter_mut().enumerate() {
            let lo = k.saturating_sub(2).min(n - 5);
            *mk = lagrange_slope(&x[lo..lo + 5], &y[lo..lo + 5], k - lo);
        }
    }

    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    for k in 0..n - 1 {
        let s = sign(d[k]);
        if s == 0 {
            let extremum = k > 0 && k + 2 < n && sign(d[k - 1]) * sign(d[k + 1]) == -1;
            if !extremum {
                m[k] = 0.0;
                m[k + 1] = 0.0;
            }
            continue;
        }
        let left_ok = k == 0 || sign(d[k - 1]) == s;
        let right_ok = k + 2 >= n || sign(d[k + 1]) == s;
        if !(left_ok && right_ok) {
            continue;
        }
        for j in [k, k + 1] {
            if sign(m[j]) != s {
                m[j] = if sign(low[j]) == s { low[j] } else { 0.0 };
            }
        }
        let alpha = m[k] / d[k];
        let beta = m[k + 1] / d[k];
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            m[k] = tau * alpha * d[k];
            m[k + 1] = tau * beta * d[k];
        }
    }
    m
}

/// Derivative at `xs[k]` of the polynomial through `(xs, ys)`.
fn lagrange_slope(xs: &[f64], ys: &[f64], k: usize) -> f64 {
    let xk = xs[k];
    let mut out = 0.0;
    for i in 0..xs.len() {
        let weight = if i == k {
            (0..xs.len())
                .filter(|&j| j != k)
                .map(|j| 1.0 / (xk - xs[j]))
                .sum::<f64>()
        } else {
            let num: f64 = (0..xs.len())
                .filter(|&j| j != i && j != k)
                .map(|j| xk - xs[j])
                .product();
            let den: f64 = (0..xs.len()).filter(|&j| j != i).map(|j| xs[i] - xs[j]).product();
            num / den
        };
        out += weight * ys[i];
    }
    out
}

/// Evaluates the interpolant of `(grid, values)` at every query.
pub fn interp_eval(grid: &[f64], values: &[f64], query: &[f64]) -> Result<Vec<f64>> {
    let p = Interpolant::new(grid, values)?;
    query.iter().map(|&q| p.eval(q)).collect()
}

/// Returns `x` with `interp(grid, f)(x) = y` for strictly increasing `f`.
pub fn monotone_invert(grid: &[f64], f_on_grid: &[f64], y: f64) -> Result<f64> {
    Interpolant::new(grid, f_on_grid)?.invert(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_at_nodes() {
        let x = linspace(-1.0, 3.0, 17);
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).cos()).collect();
        let out = interp_eval(&x, &y, &x).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn reproduces_linears() {
        let x = linspace(-1.0, 3.0, 11);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let q = linspace(-1.0, 3.0, 97);
        for (qi, v) in q.iter().zip(interp_eval(&x, &y, &q).unwrap()) {
            assert!((v - 2.0 * qi).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_midpoints() {
        let x = linspace(-1.0, 3.0, 512);
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let mids: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let got = interp_eval(&x, &y, &mids).unwrap();
        let err = mids
            .iter()
            .zip(&got)
            .map(|(m, g)| (m.sin() - g).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err:e}");
    }

    #[test]
    fn out_of_range_query_is_error() {
        let x = linspace(0.0, 1.0, 5);
        let err = interp_eval(&x, &x, &[1.5]).unwrap_err();
        assert!(matches!(err, Error::Extrapolation { .. }));
    }

    #[test]
    fn clamped_eval_reports_clamp() {
        let x = linspace(0.0, 1.0, 5);
        let p = Interpolant::new(&x, &x).unwrap();
        let c = p.eval_clamped(-0.5);
        assert!(c.clamped && c.value == 0.0 && c.derivative == 0.0);
        assert!(!p.eval_clamped(0.3).clamped);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let x = linspace(-1.0, 3.0, 64);
        let y: Vec<f64> = x.iter().map(|v| (-(v * v) / 0.1).exp()).collect();
        let p = Interpolant::new(&x, &y).unwrap();
        for q in [-0.73, -0.2, 0.011, 0.4, 2.2] {
            let h = 1e-6;
            let fd = (p.eval(q + h).unwrap() - p.eval(q - h).unwrap()) / (2.0 * h);
            let an = p.eval_clamped(q).derivative;
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{q}: {fd} vs {an}");
        }
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        // step-like data where unlimited cubics overshoot
        let x = linspace(0.0, 1.0, 9);
        let y = [0.0, 0.0, 0.01, 0.02, 1.0, 1.0, 1.01, 1.02, 1.03];
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 1e-3 * i as f64).collect();
        let p = Interpolant::new(&x, &y).unwrap();
        let q = linspace(0.0, 1.0, 2001);
        let vals: Vec<f64> = q.iter().map(|&v| p.eval(v).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn invert_examples() {
        let x = linspace(-1.0, 3.0, 41);
        assert!((monotone_invert(&x, &x, 0.3).unwrap() - 0.3).abs() < 1e-12);
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        assert!(monotone_invert(&x, &shifted, 1.0).unwrap().abs() < 1e-12);

        let x = linspace(0.0, 2.0, 512);
        let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let r = monotone_invert(&x, &cube, 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn invert_errors() {
        let x = linspace(0.0, 1.0, 5);
        let bumpy = [0.0, 0.5, 0.4, 0.8, 1.0];
        assert!(matches!(monotone_invert(&x, &bumpy, 0.45), Err(Error::Validation(_))));
        assert!(matches!(monotone_invert(&x, &x, 1.5), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn linear_fallback() {
        let x = linspace(0.0, 1.0, 3);
        let y = [0.0, 1.0, 0.0];
        let p = Interpolant::with_kind(&x, &y, InterpKind::Linear).unwrap();
        assert!((p.eval(0.25).unwrap() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn invert_round_trips(
            increments in proptest::collection::vec(0.01f64..2.0, 8..40),
            frac in 0.0f64..1.0,
        ) {
            let n = increments.len();
            let x = linspace(-1.0, 3.0, n);
            let mut f = Vec::with_capacity(n);
            let mut acc = 0.0;
            for inc in &increments {
                acc += inc;
                f.push(acc);
            }
            let p = Interpolant::new(&x, &f).unwrap();
            let x0 = -1.0 + 4.0 * frac;
            let y = p.eval(x0).unwrap();
            let back = p.invert(y).unwrap();
            prop_assert!((p.eval(back).unwrap() - y).abs() < INVERT_TOL);
            prop_assert!((back - x0).abs() < 1e-8);
        }
    }
}
