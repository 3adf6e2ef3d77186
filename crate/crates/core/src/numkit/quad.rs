use crate::{Error, Result};

/// Composite trapezoidal rule on a uniform grid.
pub fn quadrature(values: &[f64], dx: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "quadrature needs at least 2 samples, got {}",
            values.len()
        )));
    }
    if !(dx > 0.0) {
        return Err(Error::validation(format!("dx must be positive, got {dx}")));
    }
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    Ok(dx * (0.5 * (values[0] + values[n - 1]) + inner))
}

/// Trapezoid weights `w` such that `sum(w_k f_k)` is [`quadrature`].
pub fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![dx; n];
    if n > 0 {
        w[0] = 0.5 * dx;
        w[n - 1] = 0.5 * dx;
    }
    w
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}
