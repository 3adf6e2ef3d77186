//! Analytic advection-diffusion snapshot manifolds on a uniform 1D grid.
//!
//! The free-space solution of `u_t + c_T u_x - c_D u_xx = 0` started from a
//! unit Gaussian of width `sigma0` is again a Gaussian, translated by
//! `c_T t` and widened to `s(t)^2 = sigma0^2 + 2 c_D t` with amplitude
//! `sigma0 / s(t)`. Sampling it directly keeps discretisation error out of
//! the reduction comparison.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::numkit::{linspace, quadrature, trapezoid_weights, DenseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Default for Grid1D {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 3.0,
            n_points: 256,
        }
    }
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::validation(format!(
                "grid needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 8 {
            return Err(Error::validation(format!(
                "grid needs at least 8 points, got {n_points}"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.n_points)
    }

    /// Trapezoid quadrature weights on the grid.
    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_points, self.dx())
    }

    /// L2(Omega) norm by the trapezoid rule.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
        quadrature(&sq, self.dx()).unwrap_or(0.0).sqrt()
    }

    /// The same interval resampled with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_points: (self.n_points - 1) * factor.max(1) + 1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvDiffConfig {
    pub c_t: f64,
    pub c_d: f64,
    pub sigma0: f64,
    pub t_final: f64,
}

impl Default for AdvDiffConfig {
    fn default() -> Self {
        Self {
            c_t: 4.0,
            c_d: 0.0,
            sigma0: 0.1,
            t_final: 0.5,
        }
    }
}

impl AdvDiffConfig {
    pub fn new(c_t: f64, c_d: f64, sigma0: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            c_t,
            c_d,
            sigma0,
            t_final,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_case(case: Case) -> Self {
        let (c_t, c_d) = case.default_coefficients();
        Self {
            c_t,
            c_d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c_t.is_finite() {
            return Err(Error::validation("c_T must be finite"));
        }
        if !(self.c_d >= 0.0 && self.c_d.is_finite()) {
            return Err(Error::validation(format!("c_D must be >= 0, got {}", self.c_d)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::validation(format!("sigma0 must be > 0, got {}", self.sigma0)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation(format!("T_final must be > 0, got {}", self.t_final)));
        }
        Ok(())
    }

    /// Gaussian width at time `t`.
    pub fn width(&self, t: f64) -> f64 {
        (self.sigma0 * self.sigma0 + 2.0 * self.c_d * t).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    Advection,
    Diffusion,
    AdvectionDiffusion,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Advection, Case::Diffusion, Case::AdvectionDiffusion];

    pub fn as_str(&self) -> &'static str {
        match self {
            Case::Advection => "advection",
            Case::Diffusion => "diffusion",
            Case::AdvectionDiffusion => "advection_diffusion",
        }
    }

    /// `(c_T, c_D)` of the three benchmark manifolds.
    pub fn default_coefficients(&self) -> (f64, f64) {
        match self {
            Case::Advection => (4.0, 0.0),
            Case::Diffusion => (0.0, 0.1),
            Case::AdvectionDiffusion => (4.0, 0.1),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "advection" => Ok(Case::Advection),
            "diffusion" => Ok(Case::Diffusion),
            "advection_diffusion" => Ok(Case::AdvectionDiffusion),
            other => Err(Error::validation(format!(
                "unknown case '{other}' (expected advection, diffusion or advection_diffusion)"
            ))),
        }
    }
}

/// Snapshots of one manifold, one row per parameter (time) value.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub data: DenseMatrix,
    pub case: Case,
    pub config: AdvDiffConfig,
}

impl SnapshotSet {
    pub fn new(grid: Grid1D, times: Vec<f64>, data: DenseMatrix, case: Case, config: AdvDiffConfig) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::validation(format!(
                "a snapshot set needs at least 2 snapshots, got {}",
                times.len()
            )));
        }
        if data.rows() != times.len() || data.cols() != grid.len() {
            return Err(Error::validation(format!(
                "snapshot matrix is {}x{}, expected {}x{}",
                data.rows(),
                data.cols(),
                times.len(),
                grid.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::validation("snapshot times must be sorted"));
        }
        data.ensure_finite()?;
        Ok(Self {
            grid,
            times,
            data,
            case,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn snapshot(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    /// Copy with the rows replaced, e.g. after a registration transform.
    pub fn with_data(&self, data: DenseMatrix) -> Result<Self> {
        Self::new(self.grid, self.times.clone(), data, self.case, self.config)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        save_csv(self, path)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        load_csv(path)
    }
}

/// Free-space solution at `(x, t)`.
pub fn exact_solution(cfg: &AdvDiffConfig, x: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::validation(format!("time must be >= 0, got {t}")));
    }
    let s = cfg.width(t);
    let y = x - cfg.c_t * t;
    Ok((cfg.sigma0 / s) * (-(y * y) / (2.0 * s * s)).exp())
}

/// Samples the manifold at `n_snapshots` times spread uniformly on `[0, T]`.
pub fn build_snapshot_set(cfg: &AdvDiffConfig, grid: Grid1D, n_snapshots: usize, case: Case) -> Result<SnapshotSet> {
    if n_snapshots < 2 {
        return Err(Error::validation(format!(
            "need at least 2 snapshots, got {n_snapshots}"
        )));
    }
    build_at_times(cfg, grid, linspace(0.0, cfg.t_final, n_snapshots), case)
}

/// Samples the manifold at explicit times.
pub fn build_at_times(cfg: &AdvDiffConfig, grid: Grid1D, times: Vec<f64>, case: Case) -> Result<SnapshotSet> {
    cfg.validate()?;
    let x = grid.points();
    let mut data = DenseMatrix::zeros(times.len(), grid.len());
    for (i, &t) in times.iter().enumerate() {
        for (dst, &xj) in data.row_mut(i).iter_mut().zip(&x) {
            *dst = exact_solution(cfg, xj, t)?;
        }
    }
    SnapshotSet::new(grid, times, data, case, *cfg)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the snapshot CSV: a `# case,c_T,c_D,sigma0,x_min,x_max,n_points`
/// header line, the grid, then one `t, u(x_1), ..., u(x_D)` line per snapshot.
pub fn save_csv(set: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    let g = &set.grid;
    out.push_str(&format!(
        "# {},{},{},{},{},{},{}\n",
        set.case,
        fmt_f64(set.config.c_t),
        fmt_f64(set.config.c_d),
        fmt_f64(set.config.sigma0),
        fmt_f64(g.x_min()),
        fmt_f64(g.x_max()),
        g.len()
    ));
    let grid_line: Vec<String> = g.points().into_iter().map(fmt_f64).collect();
    out.push_str(&grid_line.join(","));
    out.push('\n');
    for (i, &t) in set.times.iter().enumerate() {
        out.push_str(&fmt_f64(t));
        for &v in set.snapshot(i) {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, path)
}

fn parse_csv(text: &str, path: &Path) -> Result<SnapshotSet> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let parse_num = |line: usize, cell: &str| -> Result<f64> {
        cell.trim()
            .parse::<f64>()
            .map_err(|_| perr(line, format!("non-numeric cell '{}'", cell.trim())))
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty file".to_string()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| perr(ln, "header must start with '#'".to_string()))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(perr(
            ln,
            format!(
                "header needs 7 fields (case,c_T,c_D,sigma0,x_min,x_max,n_points), got {}",
                fields.len()
            ),
        ));
    }
    let case: Case = fields[0].parse().map_err(|e: Error| perr(ln, e.to_string()))?;
    let c_t = parse_num(ln, fields[1])?;
    let c_d = parse_num(ln, fields[2])?;
    let sigma0 = parse_num(ln, fields[3])?;
    let x_min = parse_num(ln, fields[4])?;
    let x_max = parse_num(ln, fields[5])?;
    let n_points: usize = fields[6]
        .parse()
        .map_err(|_| perr(ln, format!("n_points '{}' is not a count", fields[6])))?;
    let grid = Grid1D::new(x_min, x_max, n_points).map_err(|e| perr(ln, e.to_string()))?;

    let (ln, grid_line) = lines.next().ok_or_else(|| perr(2, "missing grid line".to_string()))?;
    let cells: Vec<&str> = grid_line.split(',').collect();
    if cells.len() != n_points {
        return Err(perr(
            ln,
            format!("grid line has {} entries, header says {n_points}", cells.len()),
        ));
    }
    for c in cells {
        parse_num(ln, c)?;
    }

    let mut times = Vec::new();
    let mut data = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_points + 1 {
            return Err(perr(
                ln,
                format!("row has {} values, expected t plus {n_points} samples", cells.len()),
            ));
        }
        times.push(parse_num(ln, cells[0])?);
        for c in &cells[1..] {
            data.push(parse_num(ln, c)?);
        }
    }
    let n = times.len();
    let t_final = times.iter().copied().fold(0.0, f64::max);
    let config = AdvDiffConfig {
        c_t,
        c_d,
        sigma0,
        t_final: if t_final > 0.0 { t_final } else { 1.0 },
    };
    let data = DenseMatrix::from_vec(n, n_points, data).map_err(|e| perr(0, e.to_string()))?;
    SnapshotSet::new(grid, times, data, case, config).map_err(|e| perr(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diffusion_cfg() -> AdvDiffConfig {
        AdvDiffConfig::for_case(Case::Diffusion)
    }

    #[test]
    fn initial_peak_is_one() {
        for case in Case::ALL {
            let cfg = AdvDiffConfig::for_case(case);
            assert_eq!(exact_solution(&cfg, 0.0, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn pure_advection_translates() {
        let cfg = AdvDiffConfig::for_case(Case::Advection);
        for &t in &[0.05, 0.2, 0.5] {
            for &x in &[-0.3, 0.0, 0.9, 2.1] {
                let u = exact_solution(&cfg, x, t).unwrap();
                let u0 = exact_solution(&cfg, x - cfg.c_t * t, 0.0).unwrap();
                assert_eq!(u, u0);
            }
        }
    }

    #[test]
    fn negative_time_rejected() {
        assert!(exact_solution(&diffusion_cfg(), 0.0, -1e-3).is_err());
    }

    #[test]
    fn diffusion_peak_amplitude() {
        let peak = exact_solution(&diffusion_cfg(), 0.0, 0.5).unwrap();
        let closed = 0.1 / 0.11f64.sqrt();
        assert!((peak - closed).abs() < 1e-15);
        assert!((peak - 0.30151).abs() < 1e-5);
    }

    #[test]
    fn diffusion_peak_matches_explicit_heat_solver() {
        // FTCS on a wide domain so the boundaries stay cold.
        let cfg = diffusion_cfg();
        let (a, b, n) = (-2.5, 2.5, 1001);
        let dx = (b - a) / (n - 1) as f64;
        let dt = 0.4 * dx * dx / cfg.c_d;
        let steps = (0.5 / dt).ceil() as usize;
        let dt = 0.5 / steps as f64;
        let r = cfg.c_d * dt / (dx * dx);
        let x = linspace(a, b, n);
        let mut u: Vec<f64> = x.iter().map(|&xi| exact_solution(&cfg, xi, 0.0).unwrap()).collect();
        let mut next = u.clone();
        for _ in 0..steps {
            for k in 1..n - 1 {
                next[k] = u[k] + r * (u[k + 1] - 2.0 * u[k] + u[k - 1]);
            }
            std::mem::swap(&mut u, &mut next);
        }
        let fd_peak = u[n / 2];
        let exact = exact_solution(&cfg, 0.0, 0.5).unwrap();
        assert!((fd_peak - exact).abs() < 1e-4, "{fd_peak} vs {exact}");
    }

    #[test]
    fn training_set_shape_and_first_row() {
        let cfg = AdvDiffConfig::for_case(Case::Advection);
        let set = build_snapshot_set(&cfg, Grid1D::default(), 20, Case::Advection).unwrap();
        assert_eq!((set.data.rows(), set.data.cols()), (20, 256));
        let x = set.grid.points();
        for (j, &xj) in x.iter().enumerate() {
            assert!((set.data[(0, j)] - (-(xj * xj) / 0.02).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_snapshots_are_endpoints() {
        let cfg = diffusion_cfg();
        let set = build_snapshot_set(&cfg, Grid1D::default(), 2, Case::Diffusion).unwrap();
        assert_eq!(set.times, vec![0.0, 0.5]);
        assert!(build_snapshot_set(&cfg, Grid1D::default(), 1, Case::Diffusion).is_err());
    }

    #[test]
    fn test_set_rows_are_exact() {
        let cfg = AdvDiffConfig::for_case(Case::AdvectionDiffusion);
        let set = build_snapshot_set(&cfg, Grid1D::default(), 200, Case::AdvectionDiffusion).unwrap();
        let x = set.grid.points();
        let mut worst: f64 = 0.0;
        for (i, &t) in set.times.iter().enumerate() {
            for (j, &xj) in x.iter().enumerate() {
                worst = worst.max((set.data[(i, j)] - exact_solution(&cfg, xj, t).unwrap()).abs());
            }
        }
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn translation_property_on_grid() {
        // shift by a whole number of cells: dt = k dx / c_T
        let grid = Grid1D::default();
        let cfg = AdvDiffConfig::for_case(Case::Advection);
        let x = grid.points();
        let k = 7;
        let dt = k as f64 * grid.dx() / cfg.c_t;
        let t = 0.13;
        for j in 0..x.len() - k {
            let shifted = exact_solution(&cfg, x[j] + cfg.c_t * dt, t + dt).unwrap();
            let here = exact_solution(&cfg, x[j], t).unwrap();
            assert!((shifted - here).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_is_conserved_in_free_space() {
        // On Omega itself the tail that leaves through x = -1 is ~1e-3 of the
        // mass by t = 0.5, so conservation is checked on a wider window.
        for case in [Case::Diffusion, Case::AdvectionDiffusion] {
            let cfg = AdvDiffConfig::for_case(case);
            let wide = Grid1D::new(-3.0, 5.0, 1024).unwrap();
            let x = wide.points();
            let mass = |t: f64| {
                let u: Vec<f64> = x.iter().map(|&xi| exact_solution(&cfg, xi, t).unwrap()).collect();
                quadrature(&u, wide.dx()).unwrap()
            };
            let m0 = mass(0.0);
            for t in [0.1, 0.25, 0.5] {
                assert!((mass(t) - m0).abs() < 1e-6, "{case} t={t}");
            }
        }
    }

    #[test]
    fn peak_tracks_transport() {
        let grid = Grid1D::default();
        let x = grid.points();
        for case in Case::ALL {
            let cfg = AdvDiffConfig::for_case(case);
            for t in [0.0, 0.17, 0.33, 0.5] {
                let u: Vec<f64> = x.iter().map(|&xi| exact_solution(&cfg, xi, t).unwrap()).collect();
                let arg = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
                assert!((x[arg] - cfg.c_t * t).abs() <= grid.dx());
            }
        }
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let cfg = AdvDiffConfig::for_case(Case::AdvectionDiffusion);
        let set = build_snapshot_set(&cfg, Grid1D::new(-1.0, 3.0, 33).unwrap(), 5, Case::AdvectionDiffusion).unwrap();
        set.save_csv(&path).unwrap();
        let back = SnapshotSet::load_csv(&path).unwrap();
        assert_eq!(back.data, set.data);
        assert_eq!(back.times, set.times);
        assert_eq!(back.grid, set.grid);
        assert_eq!(back.case, set.case);
        assert_eq!(back.config, set.config);
    }

    #[test]
    fn csv_parse_errors() {
        let p = Path::new("mem.csv");
        assert!(matches!(parse_csv("", p), Err(Error::Parse { line: 1, .. })));
        let bad_header = "# advection,4,0,0.1,-1,3,9\n-1,0,1,2,3\n0,1,1,1,1\n";
        assert!(matches!(parse_csv(bad_header, p), Err(Error::Parse { line: 2, .. })));
        let grid: Vec<String> = linspace(-1.0, 3.0, 8).iter().map(|v| v.to_string()).collect();
        let ragged = format!("# advection,4,0,0.1,-1,3,8\n{}\n0,1,2\n", grid.join(","));
        assert!(matches!(parse_csv(&ragged, p), Err(Error::Parse { line: 3, .. })));
        let row = ["0.5"; 8].join(",");
        let non_numeric = format!(
            "# advection,4,0,0.1,-1,3,8\n{}\n0,{}\n0.5,x{}\n",
            grid.join(","),
            row,
            &row[3..]
        );
        assert!(matches!(parse_csv(&non_numeric, p), Err(Error::Parse { line: 4, .. })));
    }
}
