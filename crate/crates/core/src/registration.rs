//! Snapshot registration by monotone spatial maps.
//!
//! A Legendre map is `phi(x) = x + sum_m a_m P_m(s(x))`, where `s` sends the
//! domain affinely onto `[-1, 1]`. The coefficients minimise
//!
//! ```text
//! |u_t o phi - u_ref|^2 + xi |phi''|^2 + w max(0, B(phi') - delta)^2
//! B(J) = int exp((eps - J) / C) + exp((J - 1/eps) / C)
//! ```
//!
//! with every integral evaluated by the trapezoid rule on the snapshot grid.
//! The optimal-transport alternative is the monotone rearrangement between
//! the two snapshots read as densities.

use crate::numkit::{cumulative_trapezoid, Interpolant};
use crate::pod::ReducedBasis;
use crate::snapshots::{Grid1D, SnapshotSet};
use crate::{Error, Result};
use std::io::Write;

/// Exponents above this are continued linearly in the barrier.
const EXP_CAP: f64 = 60.0;
/// Refinement factor of the monotonicity audit grid.
pub const AUDIT_REFINEMENT: usize = 4;
pub const AUDIT_MIN_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationHyper {
    /// Number of Legendre polynomials in the map.
    pub n_modes: usize,
    /// Weight of the H2 seminorm.
    pub xi: f64,
    /// Admissible Jacobian band is `[eps_jac, 1 / eps_jac]`.
    pub eps_jac: f64,
    /// Barrier sharpness.
    pub c_jac: f64,
    /// Barrier budget.
    pub delta: f64,
    pub penalty_weight: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for RegistrationHyper {
    fn default() -> Self {
        RegistrationHyper {
            n_modes: 6,
            xi: 1e-4,
            eps_jac: 0.1,
            c_jac: 0.025,
            delta: 1e-3,
            penalty_weight: 1e3,
            max_iters: 500,
            grad_tol: 1e-8,
        }
    }
}

impl RegistrationHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::validation(format!("{what} out of range: {v}")));
        if self.n_modes == 0 {
            return Err(Error::validation("n_modes must be at least 1"));
        }
        if !(self.xi >= 0.0) {
            return bad("xi", self.xi);
        }
        if !(self.eps_jac > 0.0 && self.eps_jac < 1.0) {
            return bad("eps_jac", self.eps_jac);
        }
        if !(self.c_jac > 0.0) {
            return bad("c_jac", self.c_jac);
        }
        if !(self.delta > 0.0) {
            return bad("delta", self.delta);
        }
        if !(self.penalty_weight >= 0.0) {
            return bad("penalty_weight", self.penalty_weight);
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", self.grad_tol);
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Legendre,
    Ot,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub misfit: f64,
    /// `xi * int (phi'')^2`
    pub h2_term: f64,
    pub barrier_integral: f64,
    /// Grid nodes whose image left the domain and were clamped.
    pub clamped_nodes: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RegistrationMap {
    pub kind: MapKind,
    /// Legendre coefficients; empty for OT maps.
    pub coeffs: Vec<f64>,
    /// Transport map `F_ref^-1 o F_t` on the grid; empty for Legendre maps.
    pub ot_map_on_grid: Vec<f64>,
    pub t_value: f64,
    pub ref_t: f64,
    pub diagnostics: Diagnostics,
    grid: Grid1D,
    /// OT only: the registration warp `T^-1` on the grid.
    warp_samples: Vec<f64>,
}

impl RegistrationMap {
    pub fn identity(grid: Grid1D, n_modes: usize, t_value: f64, ref_t: f64) -> Self {
        Self::legendre(grid, vec![0.0; n_modes], t_value, ref_t)
    }

    pub fn legendre(grid: Grid1D, coeffs: Vec<f64>, t_value: f64, ref_t: f64) -> Self {
        RegistrationMap {
            kind: MapKind::Legendre,
            coeffs,
            ot_map_on_grid: Vec::new(),
            t_value,
            ref_t,
            diagnostics: Diagnostics::default(),
            grid,
            warp_samples: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Constant-shift component, the `P_0` coefficient.
    pub fn shift(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }

    /// Warp value and slope at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match self.kind {
            MapKind::Legendre => {
                let scale = 2.0 / self.grid.length();
                let s = scale * (x - self.grid.x_min()) - 1.0;
                let (p, dp, _) = legendre_all(self.coeffs.len(), s);
                let mut v = x;
                let mut d = 1.0;
                for (m, a) in self.coeffs.iter().enumerate() {
                    v += a * p[m];
                    d += a * dp[m] * scale;
                }
                (v, d)
            }
            MapKind::Ot => {
                let c = Interpolant::new(&self.grid.points(), &self.warp_samples)
                    .expect("warp samples validated at construction")
                    .eval_clamped(x);
                (c.value, c.derivative)
            }
        }
    }

    pub fn warp_on_grid(&self) -> Vec<f64> {
        match self.kind {
            MapKind::Legendre => self.grid.points().iter().map(|&x| self.eval(x).0).collect(),
            MapKind::Ot => self.warp_samples.clone(),
        }
    }

    /// Smallest warp slope on the refined audit grid.
    pub fn min_slope(&self) -> f64 {
        let fine = self.grid.refined(AUDIT_REFINEMENT);
        match self.kind {
            MapKind::Legendre => fine
                .points()
                .iter()
                .map(|&x| self.eval(x).1)
                .fold(f64::INFINITY, f64::min),
            MapKind::Ot => {
                let p = match Interpolant::new(&self.grid.points(), &self.warp_samples) {
                    Ok(p) => p,
                    Err(_) => return f64::NEG_INFINITY,
                };
                fine.points()
                    .iter()
                    .map(|&x| p.eval_clamped(x).derivative)
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Errors unless the warp is strictly increasing on the audit grid.
    pub fn audit(&self) -> Result<()> {
        let slope = self.min_slope();
        if slope > AUDIT_MIN_SLOPE {
            Ok(())
        } else {
            Err(Error::numerical(format!(
                "registration map for t={} is not monotone (min slope {slope:e}); increase xi or penalty_weight",
                self.t_value
            )))
        }
    }

    /// `phi^-1` at every grid node; nodes outside `phi(domain)` are clamped
    /// to the domain ends. Returns the preimages and the clamp count.
    pub fn inverse_on_grid(&self) -> Result<(Vec<f64>, usize)> {
        let pts = self.grid.points();
        let warp = self.warp_on_grid();
        let p = Interpolant::new(&pts, &warp)?;
        let (lo, hi) = (warp[0], warp[warp.len() - 1]);
        let mut clamped = 0;
        let mut out = Vec::with_capacity(pts.len());
        for &x in &pts {
            if x < lo {
                clamped += 1;
                out.push(self.grid.x_min());
            } else if x > hi {
                clamped += 1;
                out.push(self.grid.x_max());
            } else {
                out.push(p.invert(x)?);
            }
        }
        Ok((out, clamped))
    }
}

/// `P_m(s)` for the affine image `s` of `x` in `[-1, 1]`.
pub fn legendre_basis(m: usize, x: f64, grid: &Grid1D) -> f64 {
    let s = 2.0 * (x - grid.x_min()) / grid.length() - 1.0;
    legendre_all(m + 1, s).0[m]
}

/// Values, first and second derivatives in `s` of `P_0 .. P_{n-1}`.
fn legendre_all(n: usize, s: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut ddp = vec![0.0; n];
    if n == 0 {
        return (p, dp, ddp);
    }
    p[0] = 1.0;
    if n > 1 {
        p[1] = s;
        dp[1] = 1.0;
    }
    for m in 1..n.saturating_sub(1) {
        let mf = m as f64;
        p[m + 1] = ((2.0 * mf + 1.0) * s * p[m] - mf * p[m - 1]) / (mf + 1.0);
        dp[m + 1] = dp[m - 1] + (2.0 * mf + 1.0) * p[m];
        ddp[m + 1] = ddp[m - 1] + (2.0 * mf + 1.0) * dp[m];
    }
    (p, dp, ddp)
}

/// `exp(s)` continued linearly above [`EXP_CAP`], with its derivative.
fn capped_exp(s: f64) -> (f64, f64) {
    if s <= EXP_CAP {
        let e = s.exp();
        (e, e)
    } else {
        let e = EXP_CAP.exp();
        (e * (1.0 + s - EXP_CAP), e)
    }
}

/// Basis tables on the grid, already scaled by the chain rule.
struct Objective<'a> {
    hyper: &'a RegistrationHyper,
    x: Vec<f64>,
    w: Vec<f64>,
    basis: Vec<Vec<f64>>,
    dbasis: Vec<Vec<f64>>,
    ddbasis: Vec<Vec<f64>>,
    u_t: Interpolant,
    u_ref: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl<'a> Objective<'a> {
    fn new(u_t: &[f64], u_ref: &'a [f64], hyper: &'a RegistrationHyper, grid: &Grid1D) -> Result<Self> {
        if u_t.len() != grid.len() || u_ref.len() != grid.len() {
            return Err(Error::validation(format!(
                "snapshots must have {} entries, got {} and {}",
                grid.len(),
                u_t.len(),
                u_ref.len()
            )));
        }
        let x = grid.points();
        let m = hyper.n_modes;
        let scale = 2.0 / grid.length();
        let mut basis = vec![vec![0.0; x.len()]; m];
        let mut dbasis = basis.clone();
        let mut ddbasis = basis.clone();
        for (j, &xj) in x.iter().enumerate() {
            let (p, dp, ddp) = legendre_all(m, scale * (xj - grid.x_min()) - 1.0);
            for k in 0..m {
                basis[k][j] = p[k];
                dbasis[k][j] = dp[k] * scale;
                ddbasis[k][j] = ddp[k] * scale * scale;
            }
        }
        Ok(Objective {
            hyper,
            w: grid.weights(),
            u_t: Interpolant::new(&x, u_t)?,
            x,
            basis,
            dbasis,
            ddbasis,
            u_ref,
        })
    }

    fn eval(&self, a: &[f64]) -> ObjectiveEval {
        let h = self.hyper;
        let m = h.n_modes;
        let mut grad_misfit = vec![0.0; m];
        let mut grad_h2 = vec![0.0; m];
        let mut grad_barrier = vec![0.0; m];
        let (mut misfit, mut h2, mut barrier) = (0.0, 0.0, 0.0);
        let mut clamped_nodes = 0;
        for j in 0..self.x.len() {
            let mut phi = self.x[j];
            let mut dphi = 1.0;
            let mut ddphi = 0.0;
            for k in 0..m {
                phi += a[k] * self.basis[k][j];
                dphi += a[k] * self.dbasis[k][j];
                ddphi += a[k] * self.ddbasis[k][j];
            }
            let c = self.u_t.eval_clamped(phi);
            if c.clamped {
                clamped_nodes += 1;
            }
            let r = c.value - self.u_ref[j];
            let w = self.w[j];
            misfit += w * r * r;
            h2 += w * ddphi * ddphi;
            let (e1, de1) = capped_exp((h.eps_jac - dphi) / h.c_jac);
            let (e2, de2) = capped_exp((dphi - 1.0 / h.eps_jac) / h.c_jac);
            barrier += w * (e1 + e2);
            let dbar = (-de1 + de2) / h.c_jac;
            for k in 0..m {
                grad_misfit[k] += 2.0 * w * r * c.derivative * self.basis[k][j];
                grad_h2[k] += 2.0 * w * ddphi * self.ddbasis[k][j];
                grad_barrier[k] += w * dbar * self.dbasis[k][j];
            }
        }
        let excess = (barrier - h.delta).max(0.0);
        let value = misfit + h.xi * h2 + h.penalty_weight * excess * excess;
        let gradient = (0..m)
            .map(|k| grad_misfit[k] + h.xi * grad_h2[k] + 2.0 * h.penalty_weight * excess * grad_barrier[k])
            .collect();
        ObjectiveEval {
            value,
            gradient,
            diagnostics: Diagnostics {
                misfit,
                h2_term: h.xi * h2,
                barrier_integral: barrier,
                clamped_nodes,
                iterations: 0,
                converged: false,
            },
        }
    }
}

/// Objective value, analytic gradient, and diagnostics at coefficients `a`.
pub fn registration_objective(
    a: &[f64],
    u_t: &[f64],
    u_ref: &[f64],
    hyper: &RegistrationHyper,
    grid: &Grid1D,
) -> Result<ObjectiveEval> {
    hyper.validate()?;
    if a.len() != hyper.n_modes {
        return Err(Error::validation(format!(
            "expected {} coefficients, got {}",
            hyper.n_modes,
            a.len()
        )));
    }
    Ok(Objective::new(u_t, u_ref, hyper, grid)?.eval(a))
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// BFGS with Armijo backtracking; falls back to steepest descent whenever
/// the quasi-Newton direction fails to descend.
pub fn minimize(mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>), x0: &[f64], max_iters: usize, grad_tol: f64) -> Minimum {
    const C1: f64 = 1e-4;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut history = vec![fx];
    let mut hinv = identity(n);
    let mut fresh = true;
    let norm_inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    for _ in 0..max_iters {
        if norm_inf(&g) < grad_tol {
            return Minimum {
                x,
                value: fx,
                history,
                converged: true,
            };
        }
        let mut d: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| hinv[i][j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hinv = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + C1 * alpha * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                break;
            }
            hinv = identity(n);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        if sy > 1e-12 * (ss * yy).sqrt() && sy > 0.0 {
            if fresh {
                let gamma = sy / yy;
                hinv.iter_mut().enumerate().for_each(|(i, r)| {
                    r.iter_mut().for_each(|v| *v = 0.0);
                    r[i] = gamma;
                });
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }
        let stalled = fn_ >= fx;
        x = xn;
        fx = fn_;
        g = gn;
        history.push(fx);
        if stalled && norm_inf(&s) == 0.0 {
            break;
        }
    }
    let converged = norm_inf(&g) < grad_tol;
    Minimum {
        x,
        value: fx,
        history,
        converged,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Fits one Legendre map per snapshot against the snapshot at `ref_t`.
///
/// Snapshots are visited outward from the reference, each warm-started
/// from its already-fitted neighbour. The reference map is the identity.
pub fn fit_registration(set: &SnapshotSet, hyper: &RegistrationHyper, ref_t: f64) -> Result<Vec<RegistrationMap>> {
    hyper.validate()?;
    let r = set
        .times
        .iter()
        .position(|&t| t == ref_t)
        .ok_or_else(|| Error::validation(format!("reference time {ref_t} is not a snapshot time")))?;
    let grid = set.grid;
    let u_ref = set.snapshot(r);
    let n = set.len();
    let mut maps: Vec<Option<RegistrationMap>> = vec![None; n];
    let mut reference = RegistrationMap::identity(grid, hyper.n_modes, ref_t, ref_t);
    let obj = Objective::new(u_ref, u_ref, hyper, &grid)?;
    reference.diagnostics = obj.eval(&reference.coeffs).diagnostics;
    reference.diagnostics.converged = true;
    maps[r] = Some(reference);

    let order: Vec<(usize, usize)> = (r + 1..n)
        .map(|i| (i, i - 1))
        .chain((0..r).rev().map(|i| (i, i + 1)))
        .collect();
    for (i, prev) in order {
        let start = maps[prev]
            .as_ref()
            .map(|m| m.coeffs.clone())
            .unwrap_or_else(|| vec![0.0; hyper.n_modes]);
        let obj = Objective::new(set.snapshot(i), u_ref, hyper, &grid)?;
        let min = minimize(
            |a| {
                let e = obj.eval(a);
                (e.value, e.gradient)
            },
            &start,
            hyper.max_iters,
            hyper.grad_tol,
        );
        let mut map = RegistrationMap::legendre(grid, min.x, set.times[i], ref_t);
        map.diagnostics = obj.eval(&map.coeffs).diagnostics;
        map.diagnostics.iterations = min.history.len() - 1;
        map.diagnostics.converged = min.converged;
        map.audit()?;
        maps[i] = Some(map);
    }
    Ok(maps.into_iter().map(|m| m.expect("every snapshot visited")).collect())
}

/// Normalised cumulative distribution of `u` with a uniform floor of
/// relative size `1e-10`, so that it is strictly increasing.
fn floored_cdf(u: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    if let Some(k) = u.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::validation(format!(
            "snapshot is negative or not finite at node {k}"
        )));
    }
    let mass = *cumulative_trapezoid(u, grid.dx()).last().unwrap_or(&0.0);
    if !(mass > 0.0) {
        return Err(Error::validation("snapshot has zero mass"));
    }
    let floor = 1e-10 * mass / grid.length();
    let rho: Vec<f64> = u.iter().map(|v| v + floor).collect();
    let mut cdf = cumulative_trapezoid(&rho, grid.dx());
    let total = *cdf.last().unwrap();
    cdf.iter_mut().for_each(|v| *v /= total);
    *cdf.last_mut().unwrap() = 1.0;
    Ok(cdf)
}

/// Monotone rearrangement `T = F_ref^-1 o F_t` carrying `u_t` onto `u_ref`.
///
/// The returned map registers `u_t` through the warp `T^-1`.
pub fn ot_map_1d(u_t: &[f64], u_ref: &[f64], grid: &Grid1D) -> Result<RegistrationMap> {
    if u_t.len() != grid.len() || u_ref.len() != grid.len() {
        return Err(Error::validation("snapshots do not match the grid"));
    }
    let x = grid.points();
    let f_t = floored_cdf(u_t, grid)?;
    let f_ref = floored_cdf(u_ref, grid)?;
    let inv_ref = Interpolant::new(&x, &f_ref)?;
    let inv_t = Interpolant::new(&x, &f_t)?;
    let t_map = f_t.iter().map(|&y| inv_ref.invert(y)).collect::<Result<Vec<_>>>()?;
    let warp = f_ref.iter().map(|&y| inv_t.invert(y)).collect::<Result<Vec<_>>>()?;
    for (k, w) in [&t_map, &warp].iter().enumerate() {
        if let Some(j) = w.windows(2).position(|p| !(p[1] > p[0])) {
            return Err(Error::numerical(format!(
                "transport {} not strictly increasing at node {}",
                if k == 0 { "map" } else { "inverse" },
                j + 1
            )));
        }
    }
    Ok(RegistrationMap {
        kind: MapKind::Ot,
        coeffs: Vec::new(),
        ot_map_on_grid: t_map,
        t_value: f64::NAN,
        ref_t: f64::NAN,
        diagnostics: Diagnostics::default(),
        grid: *grid,
        warp_samples: warp,
    })
}

/// OT maps for every snapshot against the one at `ref_t`.
pub fn fit_ot(set: &SnapshotSet, ref_t: f64) -> Result<Vec<RegistrationMap>> {
    let r = set
        .times
        .iter()
        .position(|&t| t == ref_t)
        .ok_or_else(|| Error::validation(format!("reference time {ref_t} is not a snapshot time")))?;
    (0..set.len())
        .map(|i| {
            let mut m = ot_map_1d(set.snapshot(i), set.snapshot(r), &set.grid)?;
            m.t_value = set.times[i];
            m.ref_t = ref_t;
            // strict increase is checked node by node in ot_map_1d; the
            // slope floor of `audit` is for Legendre maps, since OT slopes
            // legitimately approach the density-floor ratio in the tails
            Ok(m)
        })
        .collect()
}

/// Row `i` becomes `u_i o phi_i`; returns the set and the total clamp count.
pub fn transform_manifold(set: &SnapshotSet, maps: &[RegistrationMap]) -> Result<(SnapshotSet, usize)> {
    if maps.len() != set.len() {
        return Err(Error::validation(format!(
            "{} maps for {} snapshots",
            maps.len(),
            set.len()
        )));
    }
    let x = set.grid.points();
    let mut data = set.data.clone();
    let mut clamped = 0;
    for (i, map) in maps.iter().enumerate() {
        let p = Interpolant::new(&x, set.snapshot(i))?;
        for (j, phi) in map.warp_on_grid().into_iter().enumerate() {
            let c = p.eval_clamped(phi);
            clamped += c.clamped as usize;
            data[(i, j)] = c.value;
        }
    }
    Ok((set.with_data(data)?, clamped))
}

/// `x -> v(phi^-1(x))` with `v` the reduced reconstruction of `z`.
///
/// Returns the snapshot and the number of nodes whose preimage was clamped.
pub fn reconstruct_registered(
    basis: &ReducedBasis,
    map: &RegistrationMap,
    z: &[f64],
    grid: &Grid1D,
) -> Result<(Vec<f64>, usize)> {
    if basis.dim() != grid.len() {
        return Err(Error::validation("basis dimension does not match the grid"));
    }
    let v = basis.reconstruct(z)?;
    let p = Interpolant::new(&grid.points(), &v)?;
    let (pre, clamped) = map.inverse_on_grid()?;
    Ok((pre.iter().map(|&y| p.eval_clamped(y).value).collect(), clamped))
}

/// Coefficient CSV: `t,a_1,...,a_M`.
pub fn write_coeffs_csv(out: &mut impl Write, maps: &[RegistrationMap]) -> std::io::Result<()> {
    let m = maps.first().map_or(0, |m| m.coeffs.len());
    write!(out, "t")?;
    for k in 1..=m {
        write!(out, ",a_{k}")?;
    }
    writeln!(out)?;
    for map in maps {
        write!(out, "{:.17e}", map.t_value)?;
        for a in &map.coeffs {
            write!(out, ",{a:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Diagnostics CSV: `t,misfit,h2_term,barrier_integral,clamped_nodes`.
pub fn write_diagnostics_csv(out: &mut impl Write, maps: &[RegistrationMap]) -> std::io::Result<()> {
    writeln!(out, "t,misfit,h2_term,barrier_integral,clamped_nodes")?;
    for map in maps {
        let d = &map.diagnostics;
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{}",
            map.t_value, d.misfit, d.h2_term, d.barrier_integral, d.clamped_nodes
        )?;
    }
    Ok(())
}
