//! Benchmark configuration: a TOML file with one section per module.
//!
//! Every field has a default, so an empty file (or `--config default`) is the
//! reference protocol. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlmor::autoencoder::{LossKind, TrainConfig};
use nlmor::kpca::KernelHyper;
use nlmor::pod::InnerProduct;
use nlmor::registration::RegistrationHyper;
use nlmor::snapshots::{AdvDiffConfig, Case, Grid1D};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
    /// Inclusive latent-dimension range `[min, max]`.
    pub n_sweep: [usize; 2],
    /// Latent dimension of the trajectory CSV.
    pub n_latent_plot: usize,
    pub sigma0: f64,
    pub t_final: f64,
    pub grid: GridSection,
    pub cases: Vec<CaseSpec>,
    pub pod: PodSection,
    pub registration: RegistrationSection,
    pub kpca: KpcaSection,
    pub autoencoder: AutoencoderSection,
    pub krr: KrrSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    /// One of `advection`, `diffusion`, `advection_diffusion`.
    pub label: String,
    pub c_t: f64,
    pub c_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PodSection {
    /// `trapezoid` or `euclidean`.
    pub inner_product: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationSection {
    pub n_modes: usize,
    pub xi: f64,
    pub eps_jac: f64,
    pub c_jac: f64,
    pub delta: f64,
    pub penalty_weight: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Index of the training snapshot used as the reference.
    pub reference_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KpcaSection {
    pub k_neighbors: usize,
    /// Gaussian affinity scale; the median pairwise distance when absent.
    pub weight_scale: Option<f64>,
    pub lle_reg: f64,
    pub rank_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderSection {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Absent means full batch.
    pub batch: Option<usize>,
    /// `vanilla`, `sparse` or `contractive`.
    pub loss: String,
    pub lambda_reg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrrSection {
    pub ridge: f64,
    /// IMQ shape; `2 / (t_max - t_min)` when absent.
    pub shape: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let cases = Case::ALL
            .iter()
            .map(|c| {
                let (c_t, c_d) = c.default_coefficients();
                CaseSpec {
                    label: c.as_str().to_string(),
                    c_t,
                    c_d,
                }
            })
            .collect();
        let base = AdvDiffConfig::default();
        BenchConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            n_train: 20,
            n_test: 200,
            n_sweep: [1, 15],
            n_latent_plot: 2,
            sigma0: base.sigma0,
            t_final: base.t_final,
            grid: GridSection::default(),
            cases,
            pod: PodSection::default(),
            registration: RegistrationSection::default(),
            kpca: KpcaSection::default(),
            autoencoder: AutoencoderSection::default(),
            krr: KrrSection::default(),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        let g = Grid1D::default();
        GridSection {
            x_min: g.x_min(),
            x_max: g.x_max(),
            n_points: g.len(),
        }
    }
}

impl Default for PodSection {
    fn default() -> Self {
        PodSection {
            inner_product: "trapezoid".into(),
        }
    }
}

impl Default for RegistrationSection {
    fn default() -> Self {
        let h = RegistrationHyper::default();
        RegistrationSection {
            n_modes: h.n_modes,
            xi: h.xi,
            eps_jac: h.eps_jac,
            c_jac: h.c_jac,
            delta: h.delta,
            penalty_weight: h.penalty_weight,
            max_iters: h.max_iters,
            grad_tol: h.grad_tol,
            reference_index: 0,
        }
    }
}

impl Default for KpcaSection {
    fn default() -> Self {
        let h = KernelHyper::default();
        KpcaSection {
            k_neighbors: h.k_neighbors,
            weight_scale: h.weight_scale,
            lle_reg: h.lle_reg,
            rank_tol: h.rank_tol,
        }
    }
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        AutoencoderSection {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch: t.batch,
            loss: LossKind::Vanilla.as_str().into(),
            lambda_reg: nlmor::autoencoder::DEFAULT_LAMBDA,
        }
    }
}

impl Default for KrrSection {
    fn default() -> Self {
        KrrSection {
            ridge: nlmor::latent_regression::DEFAULT_RIDGE,
            shape: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

impl BenchConfig {
    /// Reads `path`, or returns the defaults when `path` is `default`.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        if path.as_os_str() == "default" {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_train < 3 {
            return Err(invalid(format!("n_train must be >= 3, got {}", self.n_train)));
        }
        if self.n_test < 1 {
            return Err(invalid("n_test must be >= 1"));
        }
        let [lo, hi] = self.n_sweep;
        if lo < 1 || lo > hi {
            return Err(invalid(format!(
                "n_sweep must be [min, max] with 1 <= min <= max, got [{lo}, {hi}]"
            )));
        }
        if hi > self.n_train - 1 {
            return Err(invalid(format!(
                "n_sweep max {hi} exceeds n_train - 1 = {}",
                self.n_train - 1
            )));
        }
        if self.n_latent_plot < 1 || self.n_latent_plot > self.n_train - 1 {
            return Err(invalid(format!("n_latent_plot must be in 1..={}", self.n_train - 1)));
        }
        if self.cases.is_empty() {
            return Err(invalid("at least one case is required"));
        }
        let mut seen = BTreeSet::new();
        for c in &self.cases {
            c.case()?;
            if !seen.insert(c.label.as_str()) {
                return Err(invalid(format!("duplicate case label `{}`", c.label)));
            }
            self.pde(c)?;
        }
        self.grid()?;
        self.inner_product()?;
        self.registration_hyper().validate()?;
        if self.registration.reference_index >= self.n_train {
            return Err(invalid(format!(
                "registration.reference_index {} is not a training index (n_train = {})",
                self.registration.reference_index, self.n_train
            )));
        }
        self.kernel_hyper().validate(self.n_train)?;
        self.train_config().validate()?;
        self.loss_kind()?;
        if !(self.autoencoder.lambda_reg >= 0.0 && self.autoencoder.lambda_reg.is_finite()) {
            return Err(invalid("autoencoder.lambda_reg must be finite and >= 0"));
        }
        if !(self.krr.ridge >= 0.0 && self.krr.ridge.is_finite()) {
            return Err(invalid("krr.ridge must be finite and >= 0"));
        }
        if let Some(s) = self.krr.shape {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("krr.shape must be > 0"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, BenchError> {
        Ok(Grid1D::new(self.grid.x_min, self.grid.x_max, self.grid.n_points)?)
    }

    pub fn pde(&self, case: &CaseSpec) -> Result<AdvDiffConfig, BenchError> {
        Ok(AdvDiffConfig::new(case.c_t, case.c_d, self.sigma0, self.t_final)?)
    }

    pub fn inner_product(&self) -> Result<InnerProduct, BenchError> {
        match self.pod.inner_product.as_str() {
            "trapezoid" => Ok(InnerProduct::Trapezoid),
            "euclidean" => Ok(InnerProduct::Euclidean),
            other => Err(invalid(format!(
                "pod.inner_product must be trapezoid or euclidean, got `{other}`"
            ))),
        }
    }

    pub fn registration_hyper(&self) -> RegistrationHyper {
        let r = &self.registration;
        RegistrationHyper {
            n_modes: r.n_modes,
            xi: r.xi,
            eps_jac: r.eps_jac,
            c_jac: r.c_jac,
            delta: r.delta,
            penalty_weight: r.penalty_weight,
            max_iters: r.max_iters,
            grad_tol: r.grad_tol,
        }
    }

    pub fn kernel_hyper(&self) -> KernelHyper {
        let k = &self.kpca;
        KernelHyper {
            k_neighbors: k.k_neighbors,
            weight_scale: k.weight_scale,
            lle_reg: k.lle_reg,
            rank_tol: k.rank_tol,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let a = &self.autoencoder;
        TrainConfig {
            learning_rate: a.learning_rate,
            epochs: a.epochs,
            batch: a.batch,
            seed: self.seed,
        }
    }

    pub fn loss_kind(&self) -> Result<LossKind, BenchError> {
        Ok(self.autoencoder.loss.parse()?)
    }

    pub fn sweep(&self) -> std::ops::RangeInclusive<usize> {
        self.n_sweep[0]..=self.n_sweep[1]
    }
}

impl CaseSpec {
    pub fn case(&self) -> Result<Case, BenchError> {
        Ok(self.label.parse()?)
    }
}
