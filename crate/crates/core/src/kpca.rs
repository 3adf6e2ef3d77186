//! Kernel PCA with the classical manifold-learning kernels.
//!
//! Every method reduces to an `n x n` kernel on the training snapshots:
//!
//! | kind                  | kernel                                  |
//! |-----------------------|-----------------------------------------|
//! | `linear`              | centred Gram `Uc Uc^T`                  |
//! | `mds`                 | `-1/2 H D H`, `D` squared distances     |
//! | `isomap`              | `-1/2 H D_g H`, `D_g` squared geodesics |
//! | `spectral_clustering` | `L^+`, `L = W_D - W`                    |
//! | `lle`                 | `M^+`, `M = (I - W~)^T (I - W~)`        |

use crate::numkit::{dot, pseudo_inverse, sym_eig, Cholesky, DenseMatrix, SpectralDecomposition, DEFAULT_RANK_TOL};
use crate::snapshots::SnapshotSet;
use crate::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Mds,
    Isomap,
    SpectralClustering,
    Lle,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Linear,
        KernelKind::Mds,
        KernelKind::Isomap,
        KernelKind::SpectralClustering,
        KernelKind::Lle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Mds => "mds",
            KernelKind::Isomap => "isomap",
            KernelKind::SpectralClustering => "spectral_clustering",
            KernelKind::Lle => "lle",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown kernel kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelHyper {
    /// Neighbours per point for the graph methods.
    pub k_neighbors: usize,
    /// Gaussian edge-weight width; `None` uses the median pairwise distance.
    pub weight_scale: Option<f64>,
    /// Local-Gram regularisation for LLE, relative to the Gram trace.
    pub lle_reg: f64,
    pub rank_tol: f64,
}

impl Default for KernelHyper {
    fn default() -> Self {
        KernelHyper {
            k_neighbors: 4,
            weight_scale: None,
            lle_reg: 1e-3,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

impl KernelHyper {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_neighbors < 1 || self.k_neighbors >= n {
            return Err(Error::validation(format!(
                "k_neighbors must lie in [1, {}), got {}",
                n, self.k_neighbors
            )));
        }
        if let Some(s) = self.weight_scale {
            if !(s > 0.0) {
                return Err(Error::validation(format!("weight_scale must be positive, got {s}")));
            }
        }
        if !(self.lle_reg >= 0.0) || !self.lle_reg.is_finite() {
            return Err(Error::validation(format!("lle_reg must be >= 0, got {}", self.lle_reg)));
        }
        if !(self.rank_tol >= 0.0) {
            return Err(Error::validation(format!(
                "rank_tol must be >= 0, got {}",
                self.rank_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    pub kind: KernelKind,
    pub kernel: DenseMatrix,
    pub spectrum: SpectralDecomposition,
    /// `n x r` component scores `sqrt(lambda_j) e_j` of the training points.
    pub embedding: DenseMatrix,
    /// `n x r` normalised dual vectors `v_j = e_j / sqrt(lambda_j)`.
    pub dual: DenseMatrix,
    pub hyper: KernelHyper,
}

impl KernelModel {
    /// Leading `n - 1` eigenvalues, zeros included; the all-ones direction
    /// is always in the kernel's null space.
    pub fn reported_spectrum(&self) -> Vec<f64> {
        let n = self.kernel.rows();
        self.spectrum.eigenvalues[..n.saturating_sub(1)].to_vec()
    }

    pub fn n_components(&self) -> usize {
        self.embedding.cols()
    }

    /// Scores of training point `i` on the first `n` components.
    pub fn scores(&self, i: usize, n: usize) -> Result<Vec<f64>> {
        if n > self.n_components() {
            return Err(Error::validation(format!(
                "requested {n} components but only {} are retained",
                self.n_components()
            )));
        }
        Ok(self.embedding.row(i)[..n].to_vec())
    }
}

/// Squared Euclidean distances between the rows of `data`.
pub fn pairwise_sq_distances(data: &DenseMatrix) -> DenseMatrix {
    let n = data.rows();
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = data
                .row(i)
                .iter()
                .zip(data.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// `-1/2 H D H` with `H = I - 11^T / n`.
pub fn double_center(d: &DenseMatrix) -> Result<DenseMatrix> {
    if !d.is_square() {
        return Err(Error::validation("distance matrix must be square"));
    }
    d.ensure_finite()?;
    let n = d.rows();
    for i in 0..n {
        if d[(i, i)].abs() > 1e-12 {
            return Err(Error::validation(format!(
                "distance matrix has nonzero diagonal entry {} at {i}",
                d[(i, i)]
            )));
        }
    }
    let nf = n as f64;
    let row_mean: Vec<f64> = d.row_sums().iter().map(|s| s / nf).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| (0..n).map(|i| d[(i, j)]).sum::<f64>() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    let out = DenseMatrix::from_fn(n, n, |i, j| -0.5 * (d[(i, j)] - row_mean[i] - col_mean[j] + grand));
    Ok(symmetrize(&out))
}

fn symmetrize(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Indices of the `k` nearest rows to each row, ties to the smaller index.
pub fn knn(sq_dist: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = sq_dist.rows();
    (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| sq_dist[(i, a)].total_cmp(&sq_dist[(i, b)]).then(a.cmp(&b)));
            idx.truncate(k);
            idx
        })
        .collect()
}

/// Symmetric kNN edge set: `i ~ j` if either selects the other.
pub fn knn_graph(sq_dist: &DenseMatrix, k: usize) -> Vec<Vec<bool>> {
    let n = sq_dist.rows();
    let mut edges = vec![vec![false; n]; n];
    for (i, nb) in knn(sq_dist, k).into_iter().enumerate() {
        for j in nb {
            edges[i][j] = true;
            edges[j][i] = true;
        }
    }
    edges
}

fn components(edges: &[Vec<bool>]) -> Vec<usize> {
    let n = edges.len();
    let mut label = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        let mut stack = vec![s];
        label[s] = c;
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for w in 0..n {
                if edges[v][w] && label[w] == usize::MAX {
                    label[w] = c;
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    sizes
}

/// All-pairs shortest paths over the symmetric kNN graph (Floyd-Warshall),
/// Euclidean edge lengths. Returns unsquared distances.
pub fn geodesic_distances(data: &DenseMatrix, k_neighbors: usize) -> Result<DenseMatrix> {
    let n = data.rows();
    if k_neighbors < 1 || k_neighbors >= n.max(1) {
        return Err(Error::validation(format!(
            "k_neighbors must lie in [1, {n}), got {k_neighbors}"
        )));
    }
    let sq = pairwise_sq_distances(data);
    let edges = knn_graph(&sq, k_neighbors);
    let sizes = components(&edges);
    if sizes.len() > 1 {
        return Err(Error::Disconnected {
            components: sizes.len(),
            sizes,
        });
    }
    let mut g = DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if edges[i][j] {
            sq[(i, j)].sqrt()
        } else {
            f64::INFINITY
        }
    });
    for m in 0..n {
        for i in 0..n {
            let gim = g[(i, m)];
            if gim.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = gim + g[(m, j)];
                if via < g[(i, j)] {
                    g[(i, j)] = via;
                }
            }
        }
    }
    Ok(g)
}

/// Median of the off-diagonal pairwise distances; 1 if all rows coincide.
pub fn median_distance(sq_dist: &DenseMatrix) -> f64 {
    let n = sq_dist.rows();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist[(i, j)].sqrt())
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Gaussian weights `exp(-|u_i - u_j|^2 / (2 s^2))` on symmetric kNN edges.
pub fn adjacency(data: &DenseMatrix, hyper: &KernelHyper) -> Result<DenseMatrix> {
    let n = data.rows();
    hyper.validate(n)?;
    let sq = pairwise_sq_distances(data);
    let s = hyper.weight_scale.unwrap_or_else(|| median_distance(&sq));
    let edges = knn_graph(&sq, hyper.k_neighbors);
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if i != j && edges[i][j] {
            (-sq[(i, j)] / (2.0 * s * s)).exp()
        } else {
            0.0
        }
    }))
}

/// `L = W_D - W`.
pub fn laplacian(w: &DenseMatrix) -> Result<DenseMatrix> {
    if !w.is_square() {
        return Err(Error::validation("adjacency must be square"));
    }
    w.ensure_finite()?;
    let n = w.rows();
    let scale = w.max_abs().max(f64::MIN_POSITIVE);
    if w.asymmetry() > 1e-12 * scale {
        return Err(Error::validation("adjacency must be symmetric"));
    }
    for i in 0..n {
        if w[(i, i)] != 0.0 {
            return Err(Error::validation(format!("adjacency has nonzero diagonal at {i}")));
        }
        if (0..n).any(|j| w[(i, j)] < 0.0) {
            return Err(Error::validation(format!("adjacency row {i} has negative weights")));
        }
    }
    let deg = w.row_sums();
    Ok(DenseMatrix::from_fn(
        n,
        n,
        |i, j| if i == j { deg[i] } else { -w[(i, j)] },
    ))
}

/// Spectral-clustering kernel `L^+`.
pub fn laplacian_kernel(w: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    Ok(symmetrize(&pseudo_inverse(&laplacian(w)?, rank_tol)?))
}

/// Barycentric reconstruction weights of each row from its `k` nearest rows.
///
/// Row `i` holds weights summing to one on the neighbours of `i`. The local
/// Gram is regularised by `reg * trace` (or `reg` when the trace is zero).
pub fn lle_weights(data: &DenseMatrix, k_neighbors: usize, reg: f64) -> Result<DenseMatrix> {
    let n = data.rows();
    if k_neighbors < 1 || k_neighbors >= n.max(1) {
        return Err(Error::validation(format!(
            "k_neighbors must lie in [1, {n}), got {k_neighbors}"
        )));
    }
    if !(reg >= 0.0) || !reg.is_finite() {
        return Err(Error::validation(format!("reg must be >= 0, got {reg}")));
    }
    let sq = pairwise_sq_distances(data);
    let nbrs = knn(&sq, k_neighbors);
    let mut w = DenseMatrix::zeros(n, n);
    for (i, nb) in nbrs.iter().enumerate() {
        let ui = data.row(i);
        let diffs: Vec<Vec<f64>> = nb
            .iter()
            .map(|&j| data.row(j).iter().zip(ui).map(|(a, b)| a - b).collect())
            .collect();
        let k = nb.len();
        let mut c = DenseMatrix::from_fn(k, k, |a, b| dot(&diffs[a], &diffs[b]));
        let trace: f64 = (0..k).map(|a| c[(a, a)]).sum();
        let shift = if trace > 0.0 { reg * trace } else { reg };
        for a in 0..k {
            c[(a, a)] += shift;
        }
        let raw = solve_psd_ones(&c, trace);
        let total: f64 = raw.iter().sum();
        for (a, &j) in nb.iter().enumerate() {
            w[(i, j)] = raw[a] / total;
        }
    }
    Ok(w)
}

/// Solves `C x = 1` for PSD `C`; falls back to a tiny ridge, then to uniform
/// weights, when `C` is singular.
fn solve_psd_ones(c: &DenseMatrix, trace: f64) -> Vec<f64> {
    let k = c.rows();
    let ones = vec![1.0; k];
    if let Ok(ch) = Cholesky::factor(c) {
        let x = ch.solve(&ones);
        if x.iter().all(|v| v.is_finite()) && x.iter().sum::<f64>().abs() > 0.0 {
            return x;
        }
    }
    if trace > 0.0 {
        let mut c2 = c.clone();
        for a in 0..k {
            c2[(a, a)] += 1e-10 * trace;
        }
        if let Ok(ch) = Cholesky::factor(&c2) {
            return ch.solve(&ones);
        }
    }
    ones
}

/// LLE kernel `M^+` with `M = (I - W~)^T (I - W~)`.
pub fn lle_kernel(w: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    if !w.is_square() {
        return Err(Error::validation("LLE weight matrix must be square"));
    }
    w.ensure_finite()?;
    let n = w.rows();
    for (i, s) in w.row_sums().iter().enumerate() {
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::validation(format!("LLE weight row {i} sums to {s}, not 1")));
        }
    }
    let a = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - w[(i, j)]);
    let m = a.transpose().matmul(&a)?;
    Ok(symmetrize(&pseudo_inverse(&symmetrize(&m), rank_tol)?))
}

/// Centred Gram matrix `Uc Uc^T` of the rows of `data`.
pub fn linear_kernel(data: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, d) = (data.rows(), data.cols());
    let mut mean = vec![0.0; d];
    for r in data.iter_rows() {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n as f64);
    }
    let uc = DenseMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    Ok(symmetrize(&uc.matmul(&uc.transpose())?))
}

pub fn build_kernel(data: &DenseMatrix, kind: KernelKind, hyper: &KernelHyper) -> Result<DenseMatrix> {
    match kind {
        KernelKind::Linear => linear_kernel(data),
        KernelKind::Mds => double_center(&pairwise_sq_distances(data)),
        KernelKind::Isomap => {
            let g = geodesic_distances(data, hyper.k_neighbors)?;
            let g2 = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * g[(i, j)]);
            double_center(&g2)
        }
        KernelKind::SpectralClustering => laplacian_kernel(&adjacency(data, hyper)?, hyper.rank_tol),
        KernelKind::Lle => lle_kernel(&lle_weights(data, hyper.k_neighbors, hyper.lle_reg)?, hyper.rank_tol),
    }
}

pub fn fit_kpca(set: &SnapshotSet, kind: KernelKind, hyper: &KernelHyper) -> Result<KernelModel> {
    fit_kpca_rows(&set.data, kind, hyper)
}

pub fn fit_kpca_rows(data: &DenseMatrix, kind: KernelKind, hyper: &KernelHyper) -> Result<KernelModel> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::validation(format!(
            "kernel PCA needs at least 2 samples, got {n}"
        )));
    }
    data.ensure_finite()?;
    if kind != KernelKind::Linear && kind != KernelKind::Mds {
        hyper.validate(n)?;
    }
    let kernel = build_kernel(data, kind, hyper)?;
    let spectrum = sym_eig(&kernel)?;
    let lmax = spectrum.eigenvalues[0].max(0.0);
    let kept = spectrum
        .eigenvalues
        .iter()
        .take_while(|&&l| lmax > 0.0 && l > hyper.rank_tol * lmax)
        .count();
    let mut embedding = DenseMatrix::zeros(n, kept);
    let mut dual = DenseMatrix::zeros(n, kept);
    for j in 0..kept {
        let mut e = spectrum.vector(j);
        let imax = (0..n).fold(0, |b, i| if e[i].abs() > e[b].abs() { i } else { b });
        if e[imax] < 0.0 {
            e.iter_mut().for_each(|v| *v = -*v);
        }
        let sl = spectrum.eigenvalues[j].sqrt();
        dual.set_column(j, &e.iter().map(|v| v / sl).collect::<Vec<_>>());
        embedding.set_column(j, &e.iter().map(|v| v * sl).collect::<Vec<_>>());
    }
    Ok(KernelModel {
        kind,
        kernel,
        spectrum,
        embedding,
        dual,
        hyper: hyper.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{fit_pod, InnerProduct};
    use crate::snapshots::{build_snapshot_set, AdvDiffConfig, Case, Grid1D};
    use proptest::prelude::*;

    fn points(p: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&p.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn case_set(case: Case) -> SnapshotSet {
        build_snapshot_set(&AdvDiffConfig::for_case(case), Grid1D::default(), 20, case).unwrap()
    }

    fn rel_spectrum_gap(a: &[f64], b: &[f64]) -> f64 {
        let scale = a[0].abs().max(b[0].abs());
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn double_center_examples() {
        assert_eq!(
            double_center(&DenseMatrix::zeros(3, 3)).unwrap(),
            DenseMatrix::zeros(3, 3)
        );
        let k = double_center(&points(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let want = [[0.25, -0.25], [-0.25, 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((k[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
        assert!(double_center(&points(&[&[1.0, 1.0], &[1.0, 0.0]])).is_err());
    }

    #[test]
    fn mds_kernel_is_centred_gram() {
        let set = case_set(Case::AdvectionDiffusion);
        let k_mds = double_center(&pairwise_sq_distances(&set.data)).unwrap();
        let k_lin = linear_kernel(&set.data).unwrap();
        let gap = k_mds.sub(&k_lin).unwrap().max_abs() / k_lin.max_abs();
        assert!(gap < 1e-8, "{gap:e}");
        for s in k_mds.row_sums() {
            assert!(s.abs() < 1e-8 * k_mds.max_abs());
        }
    }

    #[test]
    fn geodesic_examples() {
        let line = points(&[&[0.0], &[1.0], &[2.0]]);
        let g = geodesic_distances(&line, 1).unwrap();
        assert_eq!(g[(0, 2)], 2.0);
        let pair = points(&[&[0.0, 0.0], &[3.0, 4.0]]);
        assert_eq!(geodesic_distances(&pair, 1).unwrap()[(0, 1)], 5.0);
        let two = points(&[&[0.0], &[0.1], &[10.0], &[10.1]]);
        match geodesic_distances(&two, 1) {
            Err(Error::Disconnected { components, sizes }) => {
                assert_eq!(components, 2);
                assert_eq!(sizes, vec![2, 2]);
            }
            other => panic!("expected disconnected graph, got {other:?}"),
        }
    }

    #[test]
    fn complete_graph_isomap_equals_mds() {
        let set = case_set(Case::Advection);
        let hyper = KernelHyper {
            k_neighbors: 19,
            ..KernelHyper::default()
        };
        let iso = fit_kpca(&set, KernelKind::Isomap, &hyper).unwrap();
        let mds = fit_kpca(&set, KernelKind::Mds, &hyper).unwrap();
        assert!(rel_spectrum_gap(&iso.reported_spectrum(), &mds.reported_spectrum()) < 1e-8);
    }

    #[test]
    fn adjacency_examples() {
        let data = points(&[&[0.0], &[1.0], &[1.0], &[3.0]]);
        let wide = KernelHyper {
            k_neighbors: 1,
            weight_scale: Some(1e12),
            ..KernelHyper::default()
        };
        let w = adjacency(&data, &wide).unwrap();
        for i in 0..4 {
            assert_eq!(w[(i, i)], 0.0);
            for j in 0..4 {
                assert!(w[(i, j)] == 0.0 || (w[(i, j)] - 1.0).abs() < 1e-15);
            }
        }
        let tight = KernelHyper {
            k_neighbors: 1,
            weight_scale: Some(0.5),
            ..KernelHyper::default()
        };
        let w = adjacency(&data, &tight).unwrap();
        assert_eq!(w[(1, 2)], 1.0);
        assert!((w[(0, 1)] - (-2.0f64).exp()).abs() < 1e-15);
        let bad = KernelHyper {
            weight_scale: Some(0.0),
            k_neighbors: 1,
            ..KernelHyper::default()
        };
        assert!(adjacency(&data, &bad).unwrap_err().is_validation());
    }

    #[test]
    fn path_graph_kernel() {
        let w = points(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let l = laplacian(&w).unwrap();
        let eig = sym_eig(&l).unwrap();
        for (got, want) in eig.eigenvalues.iter().zip([3.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let k = laplacian_kernel(&w, DEFAULT_RANK_TOL).unwrap();
        let ek = sym_eig(&k).unwrap();
        for (got, want) in ek.eigenvalues.iter().zip([1.0, 1.0 / 3.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for s in k.row_sums() {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_examples() {
        let w = points(&[&[0.0, 2.5], &[2.5, 0.0]]);
        assert_eq!(laplacian(&w).unwrap(), points(&[&[2.5, -2.5], &[-2.5, 2.5]]));
        let split = points(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let eig = sym_eig(&laplacian(&split).unwrap()).unwrap();
        assert_eq!(eig.eigenvalues.iter().filter(|l| l.abs() < 1e-12).count(), 2);
        assert!(laplacian(&points(&[&[0.0, 1.0], &[0.5, 0.0]])).is_err());
    }

    #[test]
    fn lle_weight_examples() {
        let mid = points(&[&[1.0], &[0.0], &[2.0]]);
        let w = lle_weights(&mid, 2, 1e-9).unwrap();
        assert!((w[(0, 1)] - 0.5).abs() < 1e-8 && (w[(0, 2)] - 0.5).abs() < 1e-8);

        let dup = points(&[&[1.0, 2.0], &[1.0, 2.0], &[5.0, 5.0]]);
        let w = lle_weights(&dup, 1, 1e-3).unwrap();
        assert_eq!(w[(0, 1)], 1.0);

        let quarter = points(&[&[0.25], &[0.0], &[1.0]]);
        let w = lle_weights(&quarter, 2, 1e-9).unwrap();
        assert!((w[(0, 1)] - 0.75).abs() < 1e-7, "{}", w[(0, 1)]);
        assert!((w[(0, 2)] - 0.25).abs() < 1e-7);
    }

    #[test]
    fn lle_kernel_examples() {
        assert_eq!(
            lle_kernel(&DenseMatrix::zeros(3, 3).add(&DenseMatrix::identity(3)).unwrap(), 1e-10).unwrap(),
            DenseMatrix::zeros(3, 3)
        );

        let chain = points(&[&[0.0], &[1.0], &[2.5]]);
        let w = lle_weights(&chain, 2, 1e-3).unwrap();
        for s in w.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        // oracle: explicit (I - W)^T (I - W) summed entry by entry, then pinv
        let n = 3;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for r in 0..n {
                    let a = if r == i { 1.0 } else { 0.0 } - w[(r, i)];
                    let b = if r == j { 1.0 } else { 0.0 } - w[(r, j)];
                    s += a * b;
                }
                m[(i, j)] = s;
            }
        }
        assert!(m.matvec(&[1.0; 3]).unwrap().iter().all(|v| v.abs() < 1e-12));
        let want = sym_eig(&pseudo_inverse(&m, 1e-10).unwrap()).unwrap().eigenvalues;
        let got = sym_eig(&lle_kernel(&w, 1e-10).unwrap()).unwrap().eigenvalues;
        assert!(rel_spectrum_gap(&got, &want) < 1e-10);
    }

    #[test]
    fn linear_kernel_matches_pod() {
        let set = case_set(Case::Advection);
        let pod = fit_pod(&set, InnerProduct::Euclidean).unwrap();
        let km = fit_kpca(&set, KernelKind::Linear, &KernelHyper::default()).unwrap();
        let n = set.len() as f64;
        let scaled: Vec<f64> = pod.eigenvalues.iter().map(|l| n * l).collect();
        assert!(rel_spectrum_gap(&km.reported_spectrum(), &scaled) < 1e-8);
        for j in 0..4 {
            let z: Vec<f64> = (0..set.len())
                .map(|i| pod.project(set.snapshot(i), j + 1).unwrap()[j])
                .collect();
            let e = km.embedding.column(j);
            let sign = if dot(&z, &e) < 0.0 { -1.0 } else { 1.0 };
            let gap = z.iter().zip(&e).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
            assert!(
                gap < 1e-8 * z.iter().map(|v| v.abs()).fold(0.0, f64::max),
                "mode {j}: {gap:e}"
            );
        }
    }

    #[test]
    fn every_kernel_is_psd_with_normalised_duals() {
        for case in Case::ALL {
            let set = case_set(case);
            for kind in KernelKind::ALL {
                let km = fit_kpca(&set, kind, &KernelHyper::default()).unwrap();
                let l = &km.spectrum.eigenvalues;
                assert!(km.kernel.asymmetry() <= 1e-10 * km.kernel.max_abs());
                let lmin = *l.last().unwrap();
                if kind == KernelKind::Isomap {
                    // squared kNN geodesics are not a Euclidean distance matrix
                    assert!(lmin < -1e-6 * l[0], "{case}: {lmin:e}");
                } else {
                    assert!(lmin >= -1e-10 * l[0], "{case} {kind}: {lmin:e}");
                }
                for j in 0..km.n_components() {
                    let v = km.dual.column(j);
                    assert!((l[j] * dot(&v, &v) - 1.0).abs() < 1e-10);
                }
                if matches!(
                    kind,
                    KernelKind::Mds | KernelKind::Isomap | KernelKind::SpectralClustering | KernelKind::Lle
                ) {
                    for s in km.kernel.row_sums() {
                        assert!(s.abs() < 1e-8 * km.kernel.max_abs(), "{case} {kind}: row sum {s:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.as_str().parse::<KernelKind>().unwrap(), k);
        }
        assert!("pca".parse::<KernelKind>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lle_rows_sum_to_one(seed in 0u64..10_000, k in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let data = DenseMatrix::from_rows(&rows).unwrap();
            let w = lle_weights(&data, k, 1e-3).unwrap();
            for (i, s) in w.row_sums().iter().enumerate() {
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert_eq!(w[(i, i)], 0.0);
            }
        }

        #[test]
        fn laplacian_rows_vanish(seed in 0u64..10_000, k in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let data = DenseMatrix::from_rows(&rows).unwrap();
            let hyper = KernelHyper { k_neighbors: k, ..KernelHyper::default() };
            let l = laplacian(&adjacency(&data, &hyper).unwrap()).unwrap();
            for s in l.row_sums() {
                prop_assert!(s.abs() < 1e-12);
            }
            let eig = sym_eig(&l).unwrap();
            prop_assert!(*eig.eigenvalues.last().unwrap() >= -1e-12);
        }
    }
}
