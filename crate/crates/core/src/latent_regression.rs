//! Kernel ridge regression from the time parameter to latent coordinates.
//!
//! The kernel is the inverse multiquadric `k(t, s) = 1 / sqrt(1 + (eps |t - s|)^2)`.
//! The same model maps time to registration coefficients.

use crate::numkit::{Cholesky, DenseMatrix};
use crate::{Error, Result};
use std::io::Write;

pub const DEFAULT_RIDGE: f64 = 1e-10;

pub fn imq(shape: f64, t: f64, s: f64) -> f64 {
    let r = shape * (t - s);
    1.0 / (1.0 + r * r).sqrt()
}

/// Default shape `2 / (t_max - t_min)`; 1 when all `ts` coincide.
pub fn default_shape(ts: &[f64]) -> f64 {
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        2.0 / (hi - lo)
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct KrrModel {
    pub centers: Vec<f64>,
    /// `n x output_dim`
    pub dual_weights: DenseMatrix,
    pub rbf_shape: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct KrrPrediction {
    /// `n_query x output_dim`
    pub values: DenseMatrix,
    /// `true` where the query lies outside `[min(centers), max(centers)]`.
    pub extrapolated: Vec<bool>,
}

impl KrrPrediction {
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn any_extrapolated(&self) -> bool {
        self.extrapolated.iter().any(|&e| e)
    }
}

pub fn gram(ts: &[f64], shape: f64) -> DenseMatrix {
    DenseMatrix::from_fn(ts.len(), ts.len(), |i, j| imq(shape, ts[i], ts[j]))
}

/// Solves `(G + ridge I) alpha = Y` by Cholesky.
pub fn krr_fit(ts: &[f64], y: &DenseMatrix, rbf_shape: f64, ridge: f64) -> Result<KrrModel> {
    if ts.is_empty() {
        return Err(Error::validation("kernel ridge regression needs at least one sample"));
    }
    if ts.len() != y.rows() {
        return Err(Error::validation(format!(
            "{} parameter values but {} target rows",
            ts.len(),
            y.rows()
        )));
    }
    if !(rbf_shape > 0.0) || !rbf_shape.is_finite() {
        return Err(Error::validation(format!(
            "rbf shape must be positive, got {rbf_shape}"
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::validation(format!("ridge must be non-negative, got {ridge}")));
    }
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("parameter values must be finite"));
    }
    y.ensure_finite()?;
    // canonical order makes the fit independent of how samples are listed
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| {
        ts[a].total_cmp(&ts[b]).then_with(|| {
            y.row(a)
                .iter()
                .zip(y.row(b))
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let ts: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
    let y = DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| y[(order[i], j)]);
    let mut g = gram(&ts, rbf_shape);
    for i in 0..ts.len() {
        g[(i, i)] += ridge;
    }
    let chol = Cholesky::factor(&g).map_err(|e| {
        Error::numerical(format!(
            "kernel system is singular (duplicate parameter values need ridge > 0): {e}"
        ))
    })?;
    let dual_weights = chol.solve_matrix(&y);
    Ok(KrrModel {
        centers: ts,
        dual_weights,
        rbf_shape,
        ridge,
    })
}

/// Fit with the default shape and ridge.
pub fn krr_fit_default(ts: &[f64], y: &DenseMatrix) -> Result<KrrModel> {
    krr_fit(ts, y, default_shape(ts), DEFAULT_RIDGE)
}

impl KrrModel {
    pub fn output_dim(&self) -> usize {
        self.dual_weights.cols()
    }

    pub fn predict_one(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        for (c, alpha) in self.centers.iter().zip(self.dual_weights.iter_rows()) {
            let k = imq(self.rbf_shape, t, *c);
            out.iter_mut().zip(alpha).for_each(|(o, a)| *o += k * a);
        }
        out
    }

    pub fn in_hull(&self, t: f64) -> bool {
        let lo = self.centers.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        t >= lo && t <= hi
    }
}

pub fn krr_predict(model: &KrrModel, t_query: &[f64]) -> KrrPrediction {
    let m = model.output_dim();
    let mut values = DenseMatrix::zeros(t_query.len(), m);
    for (i, &t) in t_query.iter().enumerate() {
        values.row_mut(i).copy_from_slice(&model.predict_one(t));
    }
    KrrPrediction {
        values,
        extrapolated: t_query.iter().map(|&t| !model.in_hull(t)).collect(),
    }
}

/// One trajectory block of a latent CSV.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    pub method: &'a str,
    pub case: &'a str,
    pub times: &'a [f64],
    pub latents: &'a [Vec<f64>],
    /// Written to the trailing `flag` column; empty for none.
    pub flag: &'a str,
}

/// Latent CSV: `method,case,t,z_1,...,z_N,flag`.
pub fn write_latents_csv(out: &mut impl Write, n_latent: usize, blocks: &[Trajectory<'_>]) -> std::io::Result<()> {
    write!(out, "method,case,t")?;
    for j in 1..=n_latent {
        write!(out, ",z_{j}")?;
    }
    writeln!(out, ",flag")?;
    for b in blocks {
        for (t, z) in b.times.iter().zip(b.latents) {
            write!(out, "{},{},{t:.17e}", b.method, b.case)?;
            for j in 0..n_latent {
                match z.get(j) {
                    Some(v) => write!(out, ",{v:.17e}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out, ",{}", b.flag)?;
        }
    }
    Ok(())
}
