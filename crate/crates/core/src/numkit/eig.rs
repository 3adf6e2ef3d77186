//! Symmetric eigendecomposition by cyclic Jacobi rotations, and the
//! spectral pseudo-inverse built on it.

use super::DenseMatrix;
use crate::{Error, Result};

/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Default relative cut-off below which eigenvalues count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted non-increasing, with matching unit eigenvectors stored
/// as the columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j)
    }

    /// `V diag(lambda) V^T`
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.eigenvectors.rows();
        let v = &self.eigenvectors;
        DenseMatrix::from_fn(n, n, |i, j| {
            self.eigenvalues
                .iter()
                .enumerate()
                .map(|(k, l)| l * v[(i, k)] * v[(j, k)])
                .sum()
        })
    }
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::validation(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    a.ensure_finite()?;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::validation(format!(
            "matrix is not symmetric: max |a_ij - a_ji| = {asym:e} (scale {scale:e})"
        )));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    check_symmetric(a)?;
    let n = a.rows();
    // symmetrize away the admitted rounding asymmetry
    let mut m = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = DenseMatrix::identity(n);

    let total = m.frobenius_norm();
    let target = f64::EPSILON * total * 1e-2;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // negligible next to both diagonal entries: drop it
                let g = 100.0 * apq.abs();
                if sweeps > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s, t);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, dst)] = v[(i, src)];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

#[allow(clippy::too_many_arguments)]
fn rotate(m: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = m.rows();
    let apq = m[(p, q)];
    m[(p, p)] -= t * apq;
    m[(q, q)] += t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = m[(r, p)];
        let arq = m[(r, q)];
        let np = c * arp - s * arq;
        let nq = s * arp + c * arq;
        m[(r, p)] = np;
        m[(p, r)] = np;
        m[(r, q)] = nq;
        m[(q, r)] = nq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
///
/// Eigenvalues below `rank_tol * lambda_max` are treated as zero; an
/// eigenvalue more negative than `-rank_tol * lambda_max` is rejected.
pub fn pseudo_inverse(a: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    let eig = sym_eig(a)?;
    pseudo_inverse_from(&eig, rank_tol)
}

pub fn pseudo_inverse_from(eig: &SpectralDecomposition, rank_tol: f64) -> Result<DenseMatrix> {
    if !(rank_tol >= 0.0) {
        return Err(Error::validation(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    let n = eig.eigenvectors.rows();
    let lmax = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = rank_tol * lmax;
    if let Some(&lmin) = eig.eigenvalues.last() {
        if lmin < -cutoff && lmin < -f64::EPSILON * n as f64 * lmax.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd {
                eigenvalue: lmin,
                tolerance: cutoff,
            });
        }
    }
    let v = &eig.eigenvectors;
    let mut out = DenseMatrix::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= cutoff || l <= 0.0 {
            continue;
        }
        let inv = 1.0 / l;
        for i in 0..n {
            let vi = v[(i, k)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += vi * v[(j, k)];
            }
        }
    }
    Ok(out)
}
