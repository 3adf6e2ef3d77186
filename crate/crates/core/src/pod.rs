//! Linear PCA/POD by the method of snapshots.
//!
//! With `n` snapshots of dimension `D` and `n << D`, the covariance operator
//! is diagonalised through the `n x n` Gram matrix of the centred data; modes
//! are recovered as weighted combinations of the snapshots.

use crate::numkit::{sym_eig, weighted_dot, DenseMatrix, DEFAULT_RANK_TOL};
use crate::snapshots::SnapshotSet;
use crate::{Error, Result};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerProduct {
    Euclidean,
    /// L2(Omega) with trapezoid quadrature weights.
    #[default]
    Trapezoid,
}

impl InnerProduct {
    pub fn weights(&self, set: &SnapshotSet) -> Option<Vec<f64>> {
        match self {
            InnerProduct::Euclidean => None,
            InnerProduct::Trapezoid => Some(set.grid.weights()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// Covariance of the mean-subtracted data.
    #[default]
    Mean,
    /// Uncentred second-moment operator (mean stored as zero).
    None,
}

#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub mean: Vec<f64>,
    /// `D x r` matrix whose columns are the orthonormal modes.
    pub modes: DenseMatrix,
    /// Full reported spectrum, non-increasing; may be longer than `r`.
    pub eigenvalues: Vec<f64>,
    pub inner_product: InnerProduct,
    weights: Option<Vec<f64>>,
}

impl ReducedBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.cols()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mode(&self, j: usize) -> Vec<f64> {
        self.modes.column(j)
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(self.weights(), a, b)
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }

    /// Coefficients of `u - mean` on the first `n` modes.
    pub fn project(&self, u: &[f64], n: usize) -> Result<Vec<f64>> {
        if u.len() != self.dim() {
            return Err(Error::validation(format!(
                "snapshot has {} entries, basis dimension is {}",
                u.len(),
                self.dim()
            )));
        }
        if n > self.n_modes() {
            return Err(Error::validation(format!(
                "requested {n} modes but the basis holds {}",
                self.n_modes()
            )));
        }
        let centred: Vec<f64> = u.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        Ok((0..n).map(|j| self.inner(&centred, &self.mode(j))).collect())
    }

    /// `mean + sum_j z_j psi_j`
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() > self.n_modes() {
            return Err(Error::validation(format!(
                "{} coefficients given but the basis holds {} modes",
                z.len(),
                self.n_modes()
            )));
        }
        let mut out = self.mean.clone();
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.modes.row(i);
            *o += z.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(out)
    }

    pub fn total_variance(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

pub fn fit_pod(set: &SnapshotSet, inner_product: InnerProduct) -> Result<ReducedBasis> {
    fit_pod_with(set, inner_product, Centering::Mean)
}

pub fn fit_pod_with(set: &SnapshotSet, inner_product: InnerProduct, centering: Centering) -> Result<ReducedBasis> {
    let weights = inner_product.weights(set);
    fit_rows(&set.data, weights, inner_product, centering)
}

/// POD of the rows of `data` under the inner product `weights`.
pub fn fit_rows(
    data: &DenseMatrix,
    weights: Option<Vec<f64>>,
    inner_product: InnerProduct,
    centering: Centering,
) -> Result<ReducedBasis> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::validation(format!("POD needs at least 2 snapshots, got {n}")));
    }
    data.ensure_finite()?;
    let mean = match centering {
        Centering::Mean => {
            let mut m = vec![0.0; d];
            for r in data.iter_rows() {
                m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
            }
            m.iter_mut().for_each(|v| *v /= n as f64);
            m
        }
        Centering::None => vec![0.0; d],
    };
    let centred = DenseMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);

    // Gram of the centred data in the chosen inner product, scaled by 1/n
    let scaled = match &weights {
        None => centred.clone(),
        Some(w) => DenseMatrix::from_fn(n, d, |i, j| centred[(i, j)] * w[j].sqrt()),
    };
    let mut gram = scaled.matmul(&scaled.transpose())?;
    gram.scale(1.0 / n as f64);
    let gram = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
    let eig = sym_eig(&gram)?;

    let reported = match centering {
        Centering::Mean => (n - 1).min(d),
        Centering::None => n.min(d),
    };
    let eigenvalues: Vec<f64> = eig.eigenvalues[..reported].iter().map(|&l| l.max(0.0)).collect();

    let lmax = eigenvalues.first().copied().unwrap_or(0.0);
    let kept = eigenvalues
        .iter()
        .take_while(|&&l| lmax > 0.0 && l > DEFAULT_RANK_TOL * lmax)
        .count();

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(kept);
    for (k, &lambda) in eigenvalues.iter().enumerate().take(kept) {
        let v = eig.vector(k);
        let scale = 1.0 / (n as f64 * lambda).sqrt();
        let mut psi = vec![0.0; d];
        for (i, &vi) in v.iter().enumerate() {
            let row = centred.row(i);
            psi.iter_mut().zip(row).for_each(|(p, u)| *p += vi * scale * u);
        }
        cols.push(psi);
    }
    orthonormalize(&mut cols, weights.as_deref());
    for c in cols.iter_mut() {
        let (imax, _) = c.iter().enumerate().fold(
            (0, 0.0f64),
            |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
        );
        if c[imax] < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let mut modes = DenseMatrix::zeros(d, cols.len());
    for (j, c) in cols.iter().enumerate() {
        modes.set_column(j, c);
    }
    Ok(ReducedBasis {
        mean,
        modes,
        eigenvalues,
        inner_product,
        weights,
    })
}

/// Two passes of modified Gram-Schmidt in the weighted inner product.
fn orthonormalize(cols: &mut [Vec<f64>], w: Option<&[f64]>) {
    for _ in 0..2 {
        for j in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(j);
            let cj = &mut rest[0];
            for ci in done.iter() {
                let c = weighted_dot(w, ci, cj);
                cj.iter_mut().zip(ci).for_each(|(a, b)| *a -= c * b);
            }
            let norm = weighted_dot(w, cj, cj).sqrt();
            if norm > 0.0 {
                cj.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
}

/// Mean-square training error with `n` modes against the eigenvalue tail.
///
/// Returns `(lhs, rhs)` with `lhs = (1/n) sum_i ||u_i - mean - P_N(u_i - mean)||^2`
/// and `rhs = sum_{j > N} lambda_j`.
pub fn energy_error_identity(basis: &ReducedBasis, set: &SnapshotSet, n: usize) -> Result<(f64, f64)> {
    let mut lhs = 0.0;
    for i in 0..set.len() {
        let u = set.snapshot(i);
        let z = basis.project(u, n)?;
        let rec = basis.reconstruct(&z)?;
        let diff: Vec<f64> = u.iter().zip(&rec).map(|(a, b)| a - b).collect();
        lhs += basis.norm_sq(&diff);
    }
    lhs /= set.len() as f64;
    let rhs = basis.eigenvalues.iter().skip(n).sum();
    Ok((lhs, rhs))
}

/// Mean-square reconstruction error over the rows of `set` with `n` modes.
pub fn mean_square_error(basis: &ReducedBasis, set: &SnapshotSet, n: usize) -> Result<f64> {
    Ok(energy_error_identity(basis, set, n)?.0)
}

/// One labelled eigenvalue sequence for a spectrum CSV.
#[derive(Debug, Clone)]
pub struct SpectrumRow<'a> {
    pub case: &'a str,
    pub method: &'a str,
    pub eigenvalues: &'a [f64],
}

/// Spectrum CSV with rows `case,method,j,lambda_j`; `j` starts at 1.
pub fn write_spectrum_csv(out: &mut impl Write, rows: &[SpectrumRow<'_>]) -> std::io::Result<()> {
    writeln!(out, "case,method,j,lambda_j")?;
    for r in rows {
        for (j, l) in r.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{},{},{:.17e}", r.case, r.method, j + 1, l)?;
        }
    }
    Ok(())
}

/// Reduced-coefficient CSV with rows `t,z_1,...,z_N`.
pub fn write_coefficients_csv(out: &mut impl Write, times: &[f64], coeffs: &[Vec<f64>]) -> std::io::Result<()> {
    let n = coeffs.first().map_or(0, Vec::len);
    write!(out, "t")?;
    for j in 1..=n {
        write!(out, ",z_{j}")?;
    }
    writeln!(out)?;
    for (t, z) in times.iter().zip(coeffs) {
        write!(out, "{t:.17e}")?;
        for v in z {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Coefficients of every row of `set` on the first `n` modes.
pub fn project_all(basis: &ReducedBasis, set: &SnapshotSet, n: usize) -> Result<Vec<Vec<f64>>> {
    (0..set.len()).map(|i| basis.project(set.snapshot(i), n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshots::{build_snapshot_set, AdvDiffConfig, Case, Grid1D};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_set(rows: Vec<Vec<f64>>) -> SnapshotSet {
        // a tiny manifold with an 8-point grid; rows padded with zeros
        let grid = Grid1D::new(0.0, 1.0, 8).unwrap();
        let n = rows.len();
        let padded: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|mut r| {
                r.resize(8, 0.0);
                r
            })
            .collect();
        SnapshotSet::new(
            grid,
            (0..n).map(|i| i as f64).collect(),
            DenseMatrix::from_rows(&padded).unwrap(),
            Case::Advection,
            AdvDiffConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn identical_snapshots_have_zero_spectrum() {
        let set = small_set(vec![vec![1.0, 2.0, 3.0]; 4]);
        let b = fit_pod(&set, InnerProduct::Euclidean).unwrap();
        assert!(b.eigenvalues.iter().all(|&l| l == 0.0));
        assert_eq!(b.n_modes(), 0);
        let rec = b.reconstruct(&[]).unwrap();
        assert_eq!(rec, set.snapshot(0).to_vec());
    }

    #[test]
    fn three_points_in_the_plane() {
        // covariance (1/3) diag(2, 0)
        let set = small_set(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 0.0]]);
        let b = fit_pod(&set, InnerProduct::Euclidean).unwrap();
        assert_eq!(b.eigenvalues.len(), 2);
        assert!((b.eigenvalues[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!(b.eigenvalues[1].abs() < 1e-14);
        let psi = b.mode(0);
        assert!((psi[0].abs() - 1.0).abs() < 1e-14);
        assert!(psi[1..].iter().all(|v| v.abs() < 1e-14));
    }

    fn advection() -> SnapshotSet {
        let cfg = AdvDiffConfig::for_case(Case::Advection);
        build_snapshot_set(&cfg, Grid1D::default(), 20, Case::Advection).unwrap()
    }

    #[test]
    fn project_examples() {
        let set = advection();
        let b = fit_pod(&set, InnerProduct::Trapezoid).unwrap();
        let z = b.project(&b.mean, 3).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-14));

        let u: Vec<f64> = b.mean.iter().zip(b.mode(0)).map(|(m, p)| m + p).collect();
        let z = b.project(&u, 4).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-10);
        assert!(z[1..].iter().all(|v| v.abs() < 1e-10));

        let full = b.n_modes();
        for i in [0, 7, 19] {
            let u = set.snapshot(i);
            let rec = b.reconstruct(&b.project(u, full).unwrap()).unwrap();
            let err = u.iter().zip(&rec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "snapshot {i}: {err:e}");
        }
        assert!(b.project(&b.mean, full + 1).is_err());
    }

    #[test]
    fn modes_orthonormal_and_sorted() {
        for ip in [InnerProduct::Euclidean, InnerProduct::Trapezoid] {
            let set = advection();
            let b = fit_pod(&set, ip).unwrap();
            for i in 0..b.n_modes() {
                for j in 0..b.n_modes() {
                    let g = b.inner(&b.mode(i), &b.mode(j));
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-10, "{ip:?} <{i},{j}> = {g}");
                }
            }
            assert!(b.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            assert!(b.eigenvalues.iter().all(|&l| l >= -1e-12));
            assert_eq!(b.eigenvalues.len(), 19);
        }
    }

    #[test]
    fn euclidean_and_trapezoid_spectra_differ_by_dx() {
        // interior weights are dx; the endpoints carry negligible mass here
        let set = advection();
        let e = fit_pod(&set, InnerProduct::Euclidean).unwrap();
        let t = fit_pod(&set, InnerProduct::Trapezoid).unwrap();
        let dx = set.grid.dx();
        for j in 0..5 {
            let ratio = t.eigenvalues[j] / (dx * e.eigenvalues[j]);
            assert!((ratio - 1.0).abs() < 1e-6, "mode {j}: {ratio}");
        }
    }

    #[test]
    fn energy_identity_every_n() {
        for case in Case::ALL {
            let cfg = AdvDiffConfig::for_case(case);
            let set = build_snapshot_set(&cfg, Grid1D::default(), 20, case).unwrap();
            let b = fit_pod(&set, InnerProduct::Trapezoid).unwrap();
            let total = b.total_variance();
            let (lhs0, rhs0) = energy_error_identity(&b, &set, 0).unwrap();
            assert!((lhs0 - total).abs() < 1e-12 * total);
            assert!((rhs0 - total).abs() < 1e-12 * total);
            let mut prev = f64::INFINITY;
            for n in 0..=b.n_modes() {
                let (lhs, rhs) = energy_error_identity(&b, &set, n).unwrap();
                assert!((lhs - rhs).abs() <= 1e-8 * total, "{case} N={n}: {lhs:e} vs {rhs:e}");
                assert!(lhs <= prev * (1.0 + 1e-12) + 1e-18 * total);
                prev = lhs;
            }
            let (lhs, rhs) = energy_error_identity(&b, &set, b.n_modes()).unwrap();
            // the tail below the rank cutoff is at most 19 * 1e-10 * lambda_1
            assert!(lhs < 2e-9 * total && rhs < 2e-9 * total);
        }
    }

    #[test]
    fn advection_spectrum_decays_slower_than_diffusion() {
        let decay = |case: Case| {
            let cfg = AdvDiffConfig::for_case(case);
            let set = build_snapshot_set(&cfg, Grid1D::default(), 20, case).unwrap();
            let b = fit_pod(&set, InnerProduct::Trapezoid).unwrap();
            let tail15: f64 = b.eigenvalues[15..].iter().sum();
            tail15 / b.total_variance()
        };
        assert!(decay(Case::Advection) > 1e3 * decay(Case::Diffusion));
    }

    #[test]
    fn pca_beats_random_two_dimensional_projectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 8;
        let factors: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (0..d).map(|k| (0..3).map(|f| c[f] * factors[f][k]).sum()).collect()
            })
            .collect();
        let set = small_set(rows);
        let b = fit_pod(&set, InnerProduct::Euclidean).unwrap();
        let pod_err = mean_square_error(&b, &set, 2).unwrap();
        for _ in 0..200 {
            let mut q: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            orthonormalize(&mut q, None);
            let mut err = 0.0;
            for i in 0..set.len() {
                let c: Vec<f64> = set.snapshot(i).iter().zip(&b.mean).map(|(a, m)| a - m).collect();
                let mut r = c.clone();
                for qk in &q {
                    let p = weighted_dot(None, &c, qk);
                    r.iter_mut().zip(qk).for_each(|(a, b)| *a -= p * b);
                }
                err += weighted_dot(None, &r, &r);
            }
            err /= set.len() as f64;
            assert!(err >= pod_err - 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn training_error_non_increasing(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let set = small_set(rows);
            let b = fit_pod(&set, InnerProduct::Trapezoid).unwrap();
            let errs: Vec<f64> = (0..=b.n_modes())
                .map(|n| mean_square_error(&b, &set, n).unwrap())
                .collect();
            prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn csv_writers() {
        let mut buf = Vec::new();
        write_spectrum_csv(
            &mut buf,
            &[SpectrumRow {
                case: "advection",
                method: "pod",
                eigenvalues: &[2.0, 0.5],
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "case,method,j,lambda_j");
        assert!(lines[2].starts_with("advection,pod,2,5"));
        let mut buf = Vec::new();
        write_coefficients_csv(&mut buf, &[0.0, 0.5], &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,z_1,z_2");
        let last: Vec<f64> = text
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(last, vec![0.5, 3.0, 4.0]);
    }
}
