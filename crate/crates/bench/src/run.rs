//! Per-case evaluation of every method, and the artifact writers.
//!
//! A [`CaseRun`] builds the training and test sets once and caches each fitted
//! method, so `all` fits registration once and trains the plotted
//! autoencoder once. Method failures become flagged cells, never gaps.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nlmor::autoencoder::{fit_autoencoder, TrainedAutoencoder};
use nlmor::kpca::{fit_kpca, KernelKind};
use nlmor::latent_regression::{default_shape, krr_fit, krr_predict, write_latents_csv, KrrModel, Trajectory};
use nlmor::numkit::{linspace, DenseMatrix};
use nlmor::pod::{fit_pod, fit_pod_with, write_spectrum_csv, Centering, ReducedBasis, SpectrumRow};
use nlmor::registration::{
    fit_registration, reconstruct_registered, transform_manifold, write_coeffs_csv, write_diagnostics_csv,
    RegistrationMap,
};
use nlmor::snapshots::{build_at_times, build_snapshot_set, save_csv, Grid1D, SnapshotSet};

use crate::config::{BenchConfig, CaseSpec};
use crate::svg::{line_plot, Series};
use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Pod,
    Registration,
    Autoencoder,
    Kernel(KernelKind),
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Pod,
        Method::Registration,
        Method::Autoencoder,
        Method::Kernel(KernelKind::Linear),
        Method::Kernel(KernelKind::Mds),
        Method::Kernel(KernelKind::Isomap),
        Method::Kernel(KernelKind::SpectralClustering),
        Method::Kernel(KernelKind::Lle),
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pod => "pod",
            Method::Registration => "registration",
            Method::Autoencoder => "autoencoder",
            Method::Kernel(k) => k.as_str(),
        }
    }

    /// Parses one name; `kpca` stands for all five kernels.
    pub fn parse_list(name: &str) -> Result<Vec<Method>, BenchError> {
        if name == "kpca" {
            return Ok(Method::ALL
                .into_iter()
                .filter(|m| matches!(m, Method::Kernel(_)))
                .collect());
        }
        Ok(vec![name.parse()?])
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
            BenchError::Config(format!(
                "unknown method `{s}` (expected kpca or one of {})",
                names.join(", ")
            ))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Spectra,
    Errors,
    Latents,
    All,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Spectra => "spectra",
            Command::Errors => "errors",
            Command::Latents => "latents",
            Command::All => "all",
        }
    }
}

/// Case and method filters; empty means everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub cases: Vec<String>,
    pub methods: Vec<Method>,
    pub svg: bool,
}

impl Selection {
    pub fn wants(&self, m: Method) -> bool {
        self.methods.is_empty() || self.methods.contains(&m)
    }

    fn wants_case(&self, label: &str) -> bool {
        self.cases.is_empty() || self.cases.iter().any(|c| c == label)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
    /// One message per failed (case, method[, N]) cell.
    pub failures: Vec<String>,
}

/// One row of `errors.csv`; errors are `None` for failed cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub method: Method,
    pub case: String,
    pub n: usize,
    pub errors: Option<CellErrors>,
}

/// Mean relative L2 errors of one (method, case, N) cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellErrors {
    pub train: f64,
    pub test: f64,
    /// `N` exceeded the numerical rank of the basis; all retained modes were used.
    pub rank_limited: bool,
}

pub struct RegistrationFit {
    pub maps: Vec<RegistrationMap>,
    pub transformed: SnapshotSet,
    pub clamped: usize,
    pub basis: ReducedBasis,
    /// Uncentred second-moment basis of the transformed set (spectrum only).
    pub uncentred: ReducedBasis,
    pub coeff_model: KrrModel,
    pub ref_t: f64,
}

type Cell<T> = Result<T, String>;

/// Latents at the training and at the test times.
type TrainTest = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Method, times, latents and flag of one latents.csv block.
type LatentBlock = (Method, Vec<f64>, Vec<Vec<f64>>, &'static str);

pub struct CaseRun<'a> {
    pub cfg: &'a BenchConfig,
    pub spec: CaseSpec,
    pub train: SnapshotSet,
    pub test: SnapshotSet,
    pod: Option<Cell<ReducedBasis>>,
    registration: Option<Cell<RegistrationFit>>,
    autoencoders: BTreeMap<usize, Cell<TrainedAutoencoder>>,
}

/// Mean over rows of `||approx - exact|| / ||exact||` in the grid L2 norm.
pub fn mean_relative_error(grid: &Grid1D, exact: &SnapshotSet, approx: &[Vec<f64>]) -> f64 {
    let total: f64 = approx
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let u = exact.snapshot(i);
            let diff: Vec<f64> = a.iter().zip(u).map(|(x, y)| x - y).collect();
            grid.l2_norm(&diff) / grid.l2_norm(u)
        })
        .sum();
    total / approx.len() as f64
}

/// Zero-model baseline: [`mean_relative_error`] of predicting every row of
/// `exact` by the mean training snapshot.
pub fn mean_relative_error_of_mean(train: &SnapshotSet, exact: &SnapshotSet) -> f64 {
    let d = train.grid.len();
    let n = train.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|k| (0..train.len()).map(|i| train.data[(i, k)]).sum::<f64>() / n)
        .collect();
    mean_relative_error(&exact.grid, exact, &vec![mean; exact.len()])
}

fn text<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

impl<'a> CaseRun<'a> {
    pub fn new(cfg: &'a BenchConfig, spec: &CaseSpec) -> Result<Self, BenchError> {
        let case = spec.case()?;
        let pde = cfg.pde(spec)?;
        let grid = cfg.grid()?;
        let train = build_snapshot_set(&pde, grid, cfg.n_train, case)?;
        let test = build_at_times(&pde, grid, linspace(0.0, cfg.t_final, cfg.n_test), case)?;
        Ok(CaseRun {
            cfg,
            spec: spec.clone(),
            train,
            test,
            pod: None,
            registration: None,
            autoencoders: BTreeMap::new(),
        })
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }

    fn krr(&self, ts: &[f64], y: &DenseMatrix) -> Cell<KrrModel> {
        let shape = self.cfg.krr.shape.unwrap_or_else(|| default_shape(ts));
        krr_fit(ts, y, shape, self.cfg.krr.ridge).map_err(text)
    }

    pub fn pod(&mut self) -> Cell<&ReducedBasis> {
        if self.pod.is_none() {
            let ip = self.cfg.inner_product().map_err(text)?;
            self.pod = Some(fit_pod(&self.train, ip).map_err(text));
        }
        self.pod.as_ref().expect("set above").as_ref().map_err(Clone::clone)
    }

    pub fn registration(&mut self) -> Cell<&RegistrationFit> {
        if self.registration.is_none() {
            self.registration = Some(self.fit_registration());
        }
        self.registration
            .as_ref()
            .expect("set above")
            .as_ref()
            .map_err(Clone::clone)
    }

    fn fit_registration(&self) -> Cell<RegistrationFit> {
        let ip = self.cfg.inner_product().map_err(text)?;
        let ref_t = self.train.times[self.cfg.registration.reference_index];
        let maps = fit_registration(&self.train, &self.cfg.registration_hyper(), ref_t).map_err(text)?;
        let (transformed, clamped) = transform_manifold(&self.train, &maps).map_err(text)?;
        let basis = fit_pod(&transformed, ip).map_err(text)?;
        let uncentred = fit_pod_with(&transformed, ip, Centering::None).map_err(text)?;
        let coeffs: Vec<Vec<f64>> = maps.iter().map(|m| m.coeffs.clone()).collect();
        let coeff_model = self.krr(&self.train.times, &DenseMatrix::from_rows(&coeffs).map_err(text)?)?;
        Ok(RegistrationFit {
            maps,
            transformed,
            clamped,
            basis,
            uncentred,
            coeff_model,
            ref_t,
        })
    }

    pub fn autoencoder(&mut self, n: usize) -> Cell<&TrainedAutoencoder> {
        if !self.autoencoders.contains_key(&n) {
            let fitted = self.cfg.loss_kind().map_err(text).and_then(|kind| {
                fit_autoencoder(
                    &self.train,
                    n,
                    kind,
                    self.cfg.autoencoder.lambda_reg,
                    &self.cfg.train_config(),
                )
                .map_err(text)
            });
            self.autoencoders.insert(n, fitted);
        }
        self.autoencoders[&n].as_ref().map_err(Clone::clone)
    }

    /// kRR predictions of the first `n` training latents at the test times.
    fn predicted_latents(&self, train_latents: &[Vec<f64>]) -> Cell<Vec<Vec<f64>>> {
        let model = self.krr(&self.train.times, &DenseMatrix::from_rows(train_latents).map_err(text)?)?;
        let pred = krr_predict(&model, &self.test.times);
        Ok((0..self.test.len()).map(|i| pred.row(i).to_vec()).collect())
    }

    fn pod_latents(&mut self, n: usize) -> Cell<TrainTest> {
        let basis = self.pod()?.clone();
        let n = n.min(basis.n_modes());
        let train: Vec<Vec<f64>> = (0..self.train.len())
            .map(|i| basis.project(self.train.snapshot(i), n))
            .collect::<Result<_, _>>()
            .map_err(text)?;
        let test = self.predicted_latents(&train)?;
        Ok((train, test))
    }

    /// Mean relative L2 (train, test) errors of POD with `n` modes; test
    /// latents come from kRR over the training latents.
    pub fn pod_errors(&mut self, n: usize) -> Cell<CellErrors> {
        let (train_z, test_z) = self.pod_latents(n)?;
        let basis = self.pod()?;
        let rank_limited = n > basis.n_modes();
        let rec = |zs: &[Vec<f64>]| zs.iter().map(|z| basis.reconstruct(z)).collect::<Result<Vec<_>, _>>();
        let (tr, te) = (rec(&train_z).map_err(text)?, rec(&test_z).map_err(text)?);
        let g = self.train.grid;
        Ok(CellErrors {
            train: mean_relative_error(&g, &self.train, &tr),
            test: mean_relative_error(&g, &self.test, &te),
            rank_limited,
        })
    }

    fn registration_latents(&mut self, n: usize) -> Cell<TrainTest> {
        let fit = self.registration()?;
        let n = n.min(fit.basis.n_modes());
        let train: Vec<Vec<f64>> = (0..fit.transformed.len())
            .map(|i| fit.basis.project(fit.transformed.snapshot(i), n))
            .collect::<Result<_, _>>()
            .map_err(text)?;
        let test = self.predicted_latents(&train)?;
        Ok((train, test))
    }

    /// Registration map at an unseen time, from kRR of the fitted coefficients.
    pub fn predicted_map(&mut self, t: f64) -> Cell<RegistrationMap> {
        let grid = self.train.grid;
        let fit = self.registration()?;
        let coeffs = krr_predict(&fit.coeff_model, &[t]).row(0).to_vec();
        let map = RegistrationMap::legendre(grid, coeffs, t, fit.ref_t);
        map.audit().map_err(|e| format!("predicted map at t={t}: {e}"))?;
        Ok(map)
    }

    /// Mean relative L2 (train, test) errors of registration + POD with `n`
    /// modes; test maps and latents come from kRR.
    pub fn registration_errors(&mut self, n: usize) -> Cell<CellErrors> {
        let (train_z, test_z) = self.registration_latents(n)?;
        let test_maps: Vec<RegistrationMap> = self
            .test
            .times
            .clone()
            .into_iter()
            .map(|t| self.predicted_map(t))
            .collect::<Cell<_>>()?;
        let grid = self.train.grid;
        let fit = self.registration()?;
        let rec = |maps: &[RegistrationMap], zs: &[Vec<f64>]| {
            maps.iter()
                .zip(zs)
                .map(|(m, z)| reconstruct_registered(&fit.basis, m, z, &grid).map(|(v, _)| v))
                .collect::<Result<Vec<_>, _>>()
                .map_err(text)
        };
        let tr = rec(&fit.maps, &train_z)?;
        let te = rec(&test_maps, &test_z)?;
        let rank_limited = n > fit.basis.n_modes();
        Ok(CellErrors {
            train: mean_relative_error(&grid, &self.train, &tr),
            test: mean_relative_error(&grid, &self.test, &te),
            rank_limited,
        })
    }

    /// Mean relative L2 (train, test) errors of the autoencoder with latent
    /// dimension `n`; test snapshots are encoded directly.
    pub fn autoencoder_errors(&mut self, n: usize) -> Cell<CellErrors> {
        let grid = self.train.grid;
        let (train, test) = (self.train.clone(), self.test.clone());
        let ae = self.autoencoder(n)?;
        let rec = |set: &SnapshotSet| {
            (0..set.len())
                .map(|i| ae.reconstruct(set.snapshot(i)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(text)
        };
        let (tr, te) = (rec(&train)?, rec(&test)?);
        Ok(CellErrors {
            train: mean_relative_error(&grid, &train, &tr),
            test: mean_relative_error(&grid, &test, &te),
            rank_limited: false,
        })
    }

    pub fn errors(&mut self, method: Method, n: usize) -> Cell<CellErrors> {
        match method {
            Method::Pod => self.pod_errors(n),
            Method::Registration => self.registration_errors(n),
            Method::Autoencoder => self.autoencoder_errors(n),
            Method::Kernel(_) => Err(format!("{method} has no reconstruction")),
        }
    }

    /// Spectrum normalised by its leading eigenvalue, as `(row label, values)`.
    pub fn spectra(&mut self, method: Method) -> Cell<Vec<(&'static str, Vec<f64>)>> {
        let normalise = |v: &[f64]| -> Vec<f64> {
            let l1 = v.first().copied().unwrap_or(0.0);
            if l1 > 0.0 {
                v.iter().map(|x| x / l1).collect()
            } else {
                v.to_vec()
            }
        };
        match method {
            Method::Pod => Ok(vec![("pod", normalise(&self.pod()?.eigenvalues))]),
            Method::Registration => {
                let fit = self.registration()?;
                Ok(vec![
                    ("registration", normalise(&fit.basis.eigenvalues)),
                    ("registration_uncentred", normalise(&fit.uncentred.eigenvalues)),
                ])
            }
            Method::Autoencoder => Ok(Vec::new()),
            Method::Kernel(k) => {
                let model = fit_kpca(&self.train, k, &self.cfg.kernel_hyper()).map_err(text)?;
                Ok(vec![(k.as_str(), normalise(&model.reported_spectrum()))])
            }
        }
    }

    /// Latent curves of dimension `n`: test times for POD, registration and
    /// the autoencoder, training times for kernel methods.
    pub fn latents(&mut self, method: Method, n: usize) -> Cell<(Vec<f64>, Vec<Vec<f64>>)> {
        match method {
            Method::Pod => Ok((self.test.times.clone(), self.pod_latents(n)?.1)),
            Method::Registration => Ok((self.test.times.clone(), self.registration_latents(n)?.1)),
            Method::Autoencoder => {
                let test = self.test.clone();
                let ae = self.autoencoder(n)?;
                let z = (0..test.len())
                    .map(|i| ae.encode(test.snapshot(i)))
                    .collect::<Result<_, _>>()
                    .map_err(text)?;
                Ok((test.times.clone(), z))
            }
            Method::Kernel(k) => {
                let model = fit_kpca(&self.train, k, &self.cfg.kernel_hyper()).map_err(text)?;
                let z = (0..self.train.len())
                    .map(|i| model.scores(i, n))
                    .collect::<Result<_, _>>()
                    .map_err(text)?;
                Ok((self.train.times.clone(), z))
            }
        }
    }
}

struct Writer<'o> {
    root: &'o Path,
    summary: RunSummary,
}

impl Writer<'_> {
    fn write(&mut self, rel: PathBuf, bytes: &[u8]) -> Result<(), BenchError> {
        let path = self.root.join(&rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| BenchError::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        fs::write(&path, bytes).map_err(|e| BenchError::Io {
            path: path.clone(),
            source: e,
        })?;
        self.summary.files.push(rel);
        Ok(())
    }

    fn csv(&mut self, rel: PathBuf, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), BenchError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| BenchError::Io {
            path: self.root.join(&rel),
            source: e,
        })?;
        self.write(rel, &buf)
    }

    fn fail(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.summary.failures.push(msg);
    }
}

/// Errors CSV: `method,case,N,train_error,test_error,flag`, with flag
/// `failed` (errors empty) or `rank_limited`.
pub fn write_errors_csv(out: &mut impl std::io::Write, rows: &[ErrorRow]) -> std::io::Result<()> {
    writeln!(out, "method,case,N,train_error,test_error,flag")?;
    for r in rows {
        match r.errors {
            Some(e) => writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{}",
                r.method,
                r.case,
                r.n,
                e.train,
                e.test,
                if e.rank_limited { "rank_limited" } else { "" }
            )?,
            None => writeln!(out, "{},{},{},,,failed", r.method, r.case, r.n)?,
        }
    }
    Ok(())
}

fn generate(run: &CaseRun<'_>, w: &mut Writer<'_>) -> Result<(), BenchError> {
    let dir = PathBuf::from(run.label());
    let abs = w.root.join(&dir);
    fs::create_dir_all(&abs).map_err(|e| BenchError::Io {
        path: abs.clone(),
        source: e,
    })?;
    for (name, set) in [("train_snapshots.csv", &run.train), ("test_snapshots.csv", &run.test)] {
        let rel = dir.join(name);
        save_csv(set, w.root.join(&rel))?;
        w.summary.files.push(rel);
    }
    Ok(())
}

fn write_registration(run: &mut CaseRun<'_>, w: &mut Writer<'_>) -> Result<(), BenchError> {
    let dir = PathBuf::from(run.label());
    if let Ok(fit) = run.registration() {
        let maps = fit.maps.clone();
        w.csv(dir.join("registration_coeffs.csv"), |b| write_coeffs_csv(b, &maps))?;
        w.csv(dir.join("registration_diagnostics.csv"), |b| {
            write_diagnostics_csv(b, &maps)
        })?;
    }
    Ok(())
}

fn spectra(run: &mut CaseRun<'_>, sel: &Selection, w: &mut Writer<'_>) -> Result<(), BenchError> {
    let label = run.label().to_string();
    let mut rows: Vec<(&'static str, Vec<f64>)> = Vec::new();
    for m in Method::ALL.into_iter().filter(|m| sel.wants(*m)) {
        match run.spectra(m) {
            Ok(r) => rows.extend(r),
            Err(e) => w.fail(format!("{label}/{m} spectrum: {e}")),
        }
    }
    let table: Vec<SpectrumRow<'_>> = rows
        .iter()
        .map(|(m, v)| SpectrumRow {
            case: &label,
            method: m,
            eigenvalues: v,
        })
        .collect();
    w.csv(PathBuf::from(&label).join("spectra.csv"), |b| {
        write_spectrum_csv(b, &table)
    })?;
    if sel.svg {
        let series: Vec<Series> = rows
            .iter()
            .map(|(m, v)| Series {
                name: m.to_string(),
                points: v.iter().enumerate().map(|(j, l)| ((j + 1) as f64, *l)).collect(),
            })
            .collect();
        let svg = line_plot(
            &format!("{label}: normalised spectra"),
            "j",
            "lambda_j / lambda_1",
            &series,
        );
        w.write(PathBuf::from(&label).join("spectra.svg"), svg.as_bytes())?;
    }
    Ok(())
}

fn errors(run: &mut CaseRun<'_>, sel: &Selection, w: &mut Writer<'_>) -> Result<Vec<ErrorRow>, BenchError> {
    let label = run.label().to_string();
    let mut rows = Vec::new();
    for m in [Method::Pod, Method::Registration, Method::Autoencoder]
        .into_iter()
        .filter(|m| sel.wants(*m))
    {
        for n in run.cfg.sweep() {
            let errors = match run.errors(m, n) {
                Ok(e) => Some(e),
                Err(e) => {
                    w.fail(format!("{label}/{m}/N={n}: {e}"));
                    None
                }
            };
            rows.push(ErrorRow {
                method: m,
                case: label.clone(),
                n,
                errors,
            });
        }
    }
    w.csv(PathBuf::from(&label).join("errors.csv"), |b| write_errors_csv(b, &rows))?;
    if sel.svg {
        let mut series: Vec<Series> = Vec::new();
        for r in &rows {
            if series.last().is_none_or(|s| s.name != r.method.as_str()) {
                series.push(Series {
                    name: r.method.as_str().to_string(),
                    points: Vec::new(),
                });
            }
            if let Some(e) = r.errors {
                series
                    .last_mut()
                    .expect("pushed above")
                    .points
                    .push((r.n as f64, e.test));
            }
        }
        let svg = line_plot(&format!("{label}: test error"), "N", "mean relative L2 error", &series);
        w.write(PathBuf::from(&label).join("errors.svg"), svg.as_bytes())?;
    }
    Ok(rows)
}

fn latents(run: &mut CaseRun<'_>, sel: &Selection, w: &mut Writer<'_>) -> Result<(), BenchError> {
    let label = run.label().to_string();
    let n = run.cfg.n_latent_plot;
    let mut blocks: Vec<LatentBlock> = Vec::new();
    for m in Method::ALL.into_iter().filter(|m| sel.wants(*m)) {
        let train_only = matches!(m, Method::Kernel(_));
        match run.latents(m, n) {
            Ok((t, z)) => blocks.push((m, t, z, if train_only { "train_only" } else { "" })),
            Err(e) => {
                w.fail(format!("{label}/{m} latents: {e}"));
                let t = if train_only {
                    run.train.times.clone()
                } else {
                    run.test.times.clone()
                };
                let len = t.len();
                blocks.push((m, t, vec![Vec::new(); len], "failed"));
            }
        }
    }
    let names: Vec<String> = blocks.iter().map(|b| b.0.to_string()).collect();
    let table: Vec<Trajectory<'_>> = blocks
        .iter()
        .zip(&names)
        .map(|((_, t, z, flag), name)| Trajectory {
            method: name,
            case: &label,
            times: t,
            latents: z,
            flag,
        })
        .collect();
    w.csv(PathBuf::from(&label).join("latents.csv"), |b| {
        write_latents_csv(b, n, &table)
    })
}

fn manifest(cfg: &BenchConfig, command: Command, sel: &Selection, summary: &RunSummary, cases: &[String]) -> String {
    let methods: Vec<&str> = Method::ALL
        .iter()
        .filter(|m| sel.wants(**m))
        .map(|m| m.as_str())
        .collect();
    let mut s = String::new();
    s.push_str(&format!("nlmor-bench {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("command = {}\n", command.as_str()));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!("cases = {}\n", cases.join(",")));
    s.push_str(&format!("methods = {}\n", methods.join(",")));
    s.push_str(&format!("failures = {}\n", summary.failures.len()));
    for f in &summary.failures {
        s.push_str(&format!("  {f}\n"));
    }
    s.push_str("\n[files]\n");
    for f in &summary.files {
        s.push_str(&format!("{}\n", f.display()));
    }
    s.push_str("\n[config]\n");
    s.push_str(&cfg.to_toml());
    s
}

/// Runs `command` for the selected cases and methods and writes the
/// artifacts under `cfg.output_dir`. Method failures are flagged in the
/// CSVs and listed in the summary; only input and I/O problems abort.
pub fn run_command(cfg: &BenchConfig, command: Command, sel: &Selection) -> Result<RunSummary, BenchError> {
    cfg.validate()?;
    for c in &sel.cases {
        if !cfg.cases.iter().any(|s| &s.label == c) {
            let known: Vec<&str> = cfg.cases.iter().map(|s| s.label.as_str()).collect();
            return Err(BenchError::Config(format!(
                "unknown case `{c}` (configured: {})",
                known.join(", ")
            )));
        }
    }
    let root = cfg.output_dir.as_path();
    fs::create_dir_all(root).map_err(|e| BenchError::Io {
        path: root.to_path_buf(),
        source: e,
    })?;
    let mut w = Writer {
        root,
        summary: RunSummary::default(),
    };
    let mut labels = Vec::new();
    for spec in cfg.cases.iter().filter(|c| sel.wants_case(&c.label)) {
        labels.push(spec.label.clone());
        let mut run = CaseRun::new(cfg, spec)?;
        let all = command == Command::All;
        if all || command == Command::Generate {
            generate(&run, &mut w)?;
        }
        if all || command == Command::Spectra {
            spectra(&mut run, sel, &mut w)?;
        }
        if all || command == Command::Errors {
            errors(&mut run, sel, &mut w)?;
        }
        if all || command == Command::Latents {
            latents(&mut run, sel, &mut w)?;
        }
        if command != Command::Generate && sel.wants(Method::Registration) {
            write_registration(&mut run, &mut w)?;
        }
    }
    let text = manifest(cfg, command, sel, &w.summary, &labels);
    w.write(PathBuf::from("manifest.txt"), text.as_bytes())?;
    Ok(w.summary)
}
