//! Tanh encoder-decoder trained by full-batch gradient descent with
//! hand-written backpropagation.
//!
//! The default layout is `D -> D/2 -> N -> D/2 -> D`: tanh on every hidden
//! layer and on the latent layer, identity on the output. The encoder is the
//! first half of the layers. Reconstruction loss is the squared L2 norm
//! averaged over the batch; the sparse variant adds `lambda * mean|z|` and
//! the contractive variant adds `lambda * mean ||dz/du||_F^2`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numkit::{gemm, DenseMatrix};
use crate::snapshots::SnapshotSet;
use crate::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1e-4;
/// Training stops with an error once the loss exceeds this multiple of the
/// initial loss.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Vanilla,
    Sparse,
    Contractive,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Vanilla, LossKind::Sparse, LossKind::Contractive];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Vanilla => "vanilla",
            LossKind::Sparse => "sparse",
            LossKind::Contractive => "contractive",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown loss kind `{s}` (vanilla|sparse|contractive)")))
    }
}

/// One affine map `a -> W a + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            weights: DenseMatrix::zeros(n_out, n_in),
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
    pub loss_kind: LossKind,
    pub lambda_reg: f64,
}

/// Per-layer activations of one forward pass. `post[0]` is the input and
/// `post[l + 1]` the output of layer `l`.
#[derive(Clone, Debug)]
pub struct Forward {
    pub z: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub reconstruction: f64,
    pub regularization: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.regularization
    }
}

/// Loss and its gradient, shaped like the model's layers.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub loss: LossParts,
    pub layers: Vec<Layer>,
}

impl Gradient {
    /// Flattened in [`AutoencoderModel::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Default layout for snapshot dimension `d` and latent dimension `n`.
pub fn default_layer_dims(d: usize, n: usize) -> Vec<usize> {
    let hidden = (d / 2).max(1);
    vec![d, hidden, n, hidden, d]
}

impl AutoencoderModel {
    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize], loss_kind: LossKind, lambda_reg: f64) -> Result<Self> {
        if layer_dims.len() < 3 || layer_dims.len().is_multiple_of(2) {
            return Err(Error::validation(format!(
                "layer_dims needs an odd length >= 3 (input, ..., latent, ..., output), got {}",
                layer_dims.len()
            )));
        }
        if layer_dims.contains(&0) {
            return Err(Error::validation("layer widths must be positive"));
        }
        if layer_dims[0] != layer_dims[layer_dims.len() - 1] {
            return Err(Error::validation("output width must equal input width"));
        }
        if !(lambda_reg >= 0.0 && lambda_reg.is_finite()) {
            return Err(Error::validation(format!(
                "lambda_reg must be finite and >= 0, got {lambda_reg}"
            )));
        }
        let layers = layer_dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(AutoencoderModel {
            layer_dims: layer_dims.to_vec(),
            layers,
            loss_kind,
            lambda_reg,
        })
    }

    /// Weights and biases drawn from `uniform(-s, s)` with `s = 1/sqrt(fan_in)`.
    pub fn seeded(layer_dims: &[usize], loss_kind: LossKind, lambda_reg: f64, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layer_dims, loss_kind, lambda_reg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            let s = 1.0 / (layer.n_in() as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = rng.gen_range(-s..s);
            }
            for b in &mut layer.bias {
                *b = rng.gen_range(-s..s);
            }
        }
        Ok(model)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_dims[self.n_encoder_layers()]
    }

    pub fn n_encoder_layers(&self) -> usize {
        self.layers.len() / 2
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    /// Weights (row-major) then bias, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::validation(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.rows() * l.weights.cols();
            l.weights.as_mut_slice().copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn is_tanh(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len()
    }

    pub fn forward(&self, u: &[f64]) -> Result<Forward> {
        if u.len() != self.input_dim() {
            return Err(Error::validation(format!(
                "input has length {}, model expects {}",
                u.len(),
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = vec![u.to_vec()];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut p = layer.weights.matvec(&post[l])?;
            p.iter_mut().zip(&layer.bias).for_each(|(v, b)| *v += b);
            let a = if self.is_tanh(l) {
                p.iter().map(|v| v.tanh()).collect()
            } else {
                p.clone()
            };
            pre.push(p);
            post.push(a);
        }
        let z = post[self.n_encoder_layers()].clone();
        let reconstruction = post[self.layers.len()].clone();
        Ok(Forward {
            z,
            reconstruction,
            pre,
            post,
        })
    }

    pub fn encode(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(u)?.z)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::validation(format!(
                "latent has length {}, model expects {}",
                z.len(),
                self.latent_dim()
            )));
        }
        let mut a = z.to_vec();
        for l in self.n_encoder_layers()..self.layers.len() {
            let layer = &self.layers[l];
            let mut p = layer.weights.matvec(&a)?;
            p.iter_mut().zip(&layer.bias).for_each(|(v, b)| *v += b);
            if self.is_tanh(l) {
                p.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = p;
        }
        Ok(a)
    }

    /// Activations for a batch (`n x D`): `out[0]` is the batch, `out[l + 1]`
    /// the output of layer `l`.
    fn batch_forward(&self, batch: &DenseMatrix) -> Vec<DenseMatrix> {
        let n = batch.rows();
        let mut acts = vec![batch.clone()];
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = &acts[l];
            let mut out = DenseMatrix::zeros(n, layer.n_out());
            for i in 0..n {
                out.row_mut(i).copy_from_slice(&layer.bias);
            }
            gemm(
                1.0,
                prev.as_slice(),
                (n, layer.n_in()),
                false,
                layer.weights.as_slice(),
                (layer.n_out(), layer.n_in()),
                true,
                1.0,
                out.as_mut_slice(),
            );
            if self.is_tanh(l) {
                out.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    fn check_batch(&self, batch: &DenseMatrix) -> Result<()> {
        if batch.rows() == 0 {
            return Err(Error::validation("empty batch"));
        }
        if batch.cols() != self.input_dim() {
            return Err(Error::validation(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn loss(&self, batch: &DenseMatrix) -> Result<LossParts> {
        self.check_batch(batch)?;
        let acts = self.batch_forward(batch);
        Ok(self.loss_from(batch, &acts))
    }

    fn loss_from(&self, batch: &DenseMatrix, acts: &[DenseMatrix]) -> LossParts {
        let n = batch.rows() as f64;
        let out = &acts[self.layers.len()];
        let reconstruction = out
            .as_slice()
            .iter()
            .zip(batch.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        let regularization = match self.loss_kind {
            LossKind::Vanilla => 0.0,
            LossKind::Sparse => {
                let z = &acts[self.n_encoder_layers()];
                self.lambda_reg * z.as_slice().iter().map(|v| v.abs()).sum::<f64>() / (n * z.cols() as f64)
            }
            LossKind::Contractive => {
                let mut total = 0.0;
                for i in 0..batch.rows() {
                    let jac = self.encoder_jacobian_chain(acts, i);
                    total += jac.last().map_or(0.0, |j| j.as_slice().iter().map(|v| v * v).sum());
                }
                self.lambda_reg * total / n
            }
        };
        LossParts {
            reconstruction,
            regularization,
        }
    }

    /// `J_l = diag(1 - a_l^2) W_l J_{l-1}` for the encoder layers, with
    /// `J_0 = I`. Returned as `[P_1, J_1, P_2, J_2, ...]` where `P_l = W_l J_{l-1}`.
    fn encoder_jacobian_chain(&self, acts: &[DenseMatrix], i: usize) -> Vec<DenseMatrix> {
        let mut chain = Vec::new();
        let mut jac: Option<DenseMatrix> = None;
        for l in 0..self.n_encoder_layers() {
            let w = &self.layers[l].weights;
            let p = match &jac {
                None => w.clone(),
                Some(j) => w.matmul(j).expect("encoder widths chain"),
            };
            let a = acts[l + 1].row(i);
            let mut next = p.clone();
            for (h, ah) in a.iter().enumerate() {
                let s = 1.0 - ah * ah;
                next.row_mut(h).iter_mut().for_each(|v| *v *= s);
            }
            chain.push(p);
            jac = Some(next.clone());
            chain.push(next);
        }
        chain
    }

    /// Exact gradient of [`loss`](Self::loss) by backpropagation.
    pub fn gradient(&self, batch: &DenseMatrix) -> Result<Gradient> {
        self.check_batch(batch)?;
        let acts = self.batch_forward(batch);
        let loss = self.loss_from(batch, &acts);
        let n = batch.rows();
        let nf = n as f64;
        let n_layers = self.layers.len();
        let enc = self.n_encoder_layers();
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.n_in(), l.n_out())).collect();

        // extra dL/dpre per encoder layer from the contractive term
        let mut injected: Vec<Option<DenseMatrix>> = vec![None; n_layers];
        if self.loss_kind == LossKind::Contractive && self.lambda_reg > 0.0 {
            for l in 0..enc {
                injected[l] = Some(DenseMatrix::zeros(n, self.layers[l].n_out()));
            }
            let c = self.lambda_reg / nf;
            for i in 0..n {
                let chain = self.encoder_jacobian_chain(&acts, i);
                let mut g = chain[2 * enc - 1].clone();
                g.scale(2.0 * c);
                for l in (0..enc).rev() {
                    let p = &chain[2 * l];
                    let a = acts[l + 1].row(i);
                    let inj = injected[l].as_mut().expect("allocated above");
                    let mut dp = g.clone();
                    for h in 0..p.rows() {
                        let s = 1.0 - a[h] * a[h];
                        let ds: f64 = g.row(h).iter().zip(p.row(h)).map(|(x, y)| x * y).sum();
                        inj.row_mut(i)[h] += ds * (-2.0 * a[h] * s);
                        dp.row_mut(h).iter_mut().for_each(|v| *v *= s);
                    }
                    if l == 0 {
                        let gw = grads[0].weights.as_mut_slice();
                        gw.iter_mut().zip(dp.as_slice()).for_each(|(x, y)| *x += y);
                    } else {
                        let j_prev = &chain[2 * l - 1];
                        let w = &self.layers[l].weights;
                        gemm(
                            1.0,
                            dp.as_slice(),
                            (dp.rows(), dp.cols()),
                            false,
                            j_prev.as_slice(),
                            (j_prev.rows(), j_prev.cols()),
                            true,
                            1.0,
                            grads[l].weights.as_mut_slice(),
                        );
                        g = w.transpose().matmul(&dp).expect("encoder widths chain");
                    }
                }
            }
        }

        let out = &acts[n_layers];
        let mut d_act = DenseMatrix::from_fn(n, out.cols(), |i, j| 2.0 * (out[(i, j)] - batch[(i, j)]) / nf);
        for l in (0..n_layers).rev() {
            if l + 1 == enc && self.loss_kind == LossKind::Sparse {
                let z = &acts[enc];
                let c = self.lambda_reg / (nf * z.cols() as f64);
                d_act.as_mut_slice().iter_mut().zip(z.as_slice()).for_each(|(d, v)| {
                    *d += c * sign(*v);
                });
            }
            let a = &acts[l + 1];
            let mut d_pre = d_act;
            if self.is_tanh(l) {
                d_pre
                    .as_mut_slice()
                    .iter_mut()
                    .zip(a.as_slice())
                    .for_each(|(d, v)| *d *= 1.0 - v * v);
            }
            if let Some(inj) = &injected[l] {
                d_pre
                    .as_mut_slice()
                    .iter_mut()
                    .zip(inj.as_slice())
                    .for_each(|(d, v)| *d += v);
            }
            let layer = &self.layers[l];
            let prev = &acts[l];
            gemm(
                1.0,
                d_pre.as_slice(),
                (n, layer.n_out()),
                true,
                prev.as_slice(),
                (n, layer.n_in()),
                false,
                1.0,
                grads[l].weights.as_mut_slice(),
            );
            for i in 0..n {
                grads[l].bias.iter_mut().zip(d_pre.row(i)).for_each(|(b, d)| *b += d);
            }
            let mut next = DenseMatrix::zeros(n, layer.n_in());
            if l > 0 {
                gemm(
                    1.0,
                    d_pre.as_slice(),
                    (n, layer.n_out()),
                    false,
                    layer.weights.as_slice(),
                    (layer.n_out(), layer.n_in()),
                    false,
                    0.0,
                    next.as_mut_slice(),
                );
            }
            d_act = next;
        }
        Ok(Gradient { loss, layers: grads })
    }

    /// `params -= lr * grad`.
    pub fn step(&mut self, grad: &Gradient, learning_rate: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights
                .as_mut_slice()
                .iter_mut()
                .zip(g.weights.as_slice())
                .for_each(|(w, d)| *w -= learning_rate * d);
            l.bias
                .iter_mut()
                .zip(&g.bias)
                .for_each(|(b, d)| *b -= learning_rate * d);
        }
    }

    /// Text checkpoint: header lines, then per layer a `layer` line, one
    /// line per weight row and one bias line.
    pub fn write_checkpoint(&self, out: &mut impl Write) -> std::io::Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let dims: Vec<String> = self.layer_dims.iter().map(|d| d.to_string()).collect();
        writeln!(out, "layer_dims {}", dims.join(" "))?;
        writeln!(out, "loss_kind {}", self.loss_kind)?;
        writeln!(out, "lambda_reg {:e}", self.lambda_reg)?;
        for (l, layer) in self.layers.iter().enumerate() {
            writeln!(out, "layer {l} {} {}", layer.n_out(), layer.n_in())?;
            for row in layer.weights.iter_rows() {
                writeln!(out, "{}", join(row))?;
            }
            writeln!(out, "{}", join(&layer.bias))?;
        }
        Ok(())
    }

    pub fn read_checkpoint(input: impl BufRead) -> Result<Self> {
        let path = "<checkpoint>";
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.into(),
            line,
            msg,
        };
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l)),
                Some((i, Err(e))) => Err(perr(i, e.to_string())),
                None => Err(perr(0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let keyed = |(i, l): (usize, String), key: &str| -> Result<(usize, String)> {
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|r| (i, r.to_string()))
                .ok_or_else(|| perr(i, format!("expected `{key} ...`")))
        };
        let floats = |(i, l): (usize, String), len: usize| -> Result<Vec<f64>> {
            let v = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| perr(i, format!("bad number `{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != len {
                return Err(perr(i, format!("expected {len} values, got {}", v.len())));
            }
            Ok(v)
        };
        let (i, dims) = keyed(next("layer_dims")?, "layer_dims")?;
        let dims = dims
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| perr(i, format!("bad width `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let (i, kind) = keyed(next("loss_kind")?, "loss_kind")?;
        let kind: LossKind = kind.trim().parse().map_err(|e: Error| perr(i, e.to_string()))?;
        let (i, lambda) = keyed(next("lambda_reg")?, "lambda_reg")?;
        let lambda: f64 = lambda
            .trim()
            .parse()
            .map_err(|e| perr(i, format!("bad lambda_reg: {e}")))?;
        let mut model = Self::zeros(&dims, kind, lambda).map_err(|e| perr(1, e.to_string()))?;
        for l in 0..model.layers.len() {
            let (i, head) = keyed(next("layer")?, "layer")?;
            let expect = format!("{l} {} {}", model.layers[l].n_out(), model.layers[l].n_in());
            if head.trim() != expect {
                return Err(perr(i, format!("expected `layer {expect}`")));
            }
            let (rows, cols) = (model.layers[l].n_out(), model.layers[l].n_in());
            for r in 0..rows {
                let row = floats(next("weight row")?, cols)?;
                model.layers[l].weights.row_mut(r).copy_from_slice(&row);
            }
            model.layers[l].bias = floats(next("bias")?, rows)?;
        }
        Ok(model)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` is full batch; otherwise rows are taken in order, in chunks.
    pub batch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-3,
            epochs: 20_000,
            batch: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be >= 1"));
        }
        if self.batch == Some(0) {
            return Err(Error::validation("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Gradient descent in place. Returns the full-batch loss before every
/// epoch and after the last one (`epochs + 1` entries).
pub fn train(model: &mut AutoencoderModel, data: &DenseMatrix, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    model.check_batch(data)?;
    data.ensure_finite()?;
    let chunks: Vec<DenseMatrix> = match cfg.batch {
        Some(b) if b < data.rows() => (0..data.rows())
            .step_by(b)
            .map(|s| {
                let rows: Vec<Vec<f64>> = (s..(s + b).min(data.rows())).map(|i| data.row(i).to_vec()).collect();
                DenseMatrix::from_rows(&rows)
            })
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut initial = f64::NAN;
    for epoch in 0..=cfg.epochs {
        let full = if chunks.is_empty() && epoch < cfg.epochs {
            let g = model.gradient(data)?;
            let loss = g.loss.total();
            Some((g, loss))
        } else {
            None
        };
        let loss = match &full {
            Some((_, loss)) => *loss,
            None => model.loss(data)?.total(),
        };
        if epoch == 0 {
            initial = loss;
        }
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * initial {
            return Err(Error::numerical(format!(
                "training diverged at epoch {epoch} (loss {loss:e}, initial {initial:e}); reduce learning_rate"
            )));
        }
        history.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        match full {
            Some((g, _)) => model.step(&g, cfg.learning_rate),
            None => {
                for chunk in &chunks {
                    let g = model.gradient(chunk)?;
                    model.step(&g, cfg.learning_rate);
                }
            }
        }
    }
    let last = history[history.len() - 1];
    if !(last < initial) {
        return Err(Error::numerical(format!(
            "training made no progress (final loss {last:e} >= initial {initial:e}); adjust learning_rate or epochs"
        )));
    }
    Ok(history)
}

/// Per-feature affine scaling of the training range onto `[-1, 1]`.
/// Features with zero range are only shifted.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    center: Vec<f64>,
    half_range: Vec<f64>,
}

impl Normalizer {
    pub fn fit(data: &DenseMatrix) -> Result<Self> {
        if data.rows() == 0 {
            return Err(Error::validation("cannot fit a normalizer to zero rows"));
        }
        data.ensure_finite()?;
        let (mut center, mut half_range) = (Vec::with_capacity(data.cols()), Vec::with_capacity(data.cols()));
        for j in 0..data.cols() {
            let col = data.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let half = 0.5 * (hi - lo);
            center.push(0.5 * (hi + lo));
            half_range.push(if half > 0.0 { half } else { 1.0 });
        }
        Ok(Normalizer { center, half_range })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn normalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.center.iter().zip(&self.half_range))
            .map(|(v, (c, h))| (v - c) / h)
            .collect()
    }

    pub fn denormalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.center.iter().zip(&self.half_range))
            .map(|(v, (c, h))| v * h + c)
            .collect()
    }

    pub fn normalize_rows(&self, data: &DenseMatrix) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = data.iter_rows().map(|r| self.normalize(r)).collect();
        DenseMatrix::from_rows(&rows).expect("rows share a width")
    }
}

/// A trained model with the scaling it was trained under; all inputs and
/// outputs are in physical units.
#[derive(Clone, Debug)]
pub struct TrainedAutoencoder {
    pub model: AutoencoderModel,
    pub normalizer: Normalizer,
    pub history: Vec<f64>,
}

impl TrainedAutoencoder {
    pub fn encode(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        self.model.encode(&self.normalizer.normalize(u))
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.normalizer.denormalize(&self.model.decode(z)?))
    }

    pub fn reconstruct(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let f = self.model.forward(&self.normalizer.normalize(u))?;
        Ok(self.normalizer.denormalize(&f.reconstruction))
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.normalizer.dim() {
            return Err(Error::validation(format!(
                "input has length {}, model expects {}",
                u.len(),
                self.normalizer.dim()
            )));
        }
        Ok(())
    }
}

/// Normalizes the training set, builds the default layout seeded from
/// `cfg.seed`, and trains it.
pub fn fit_autoencoder(
    set: &SnapshotSet,
    n_latent: usize,
    loss_kind: LossKind,
    lambda_reg: f64,
    cfg: &TrainConfig,
) -> Result<TrainedAutoencoder> {
    if n_latent == 0 {
        return Err(Error::validation("latent dimension must be >= 1"));
    }
    let normalizer = Normalizer::fit(&set.data)?;
    let data = normalizer.normalize_rows(&set.data);
    let dims = default_layer_dims(set.data.cols(), n_latent);
    let mut model = AutoencoderModel::seeded(&dims, loss_kind, lambda_reg, cfg.seed)?;
    let history = train(&mut model, &data, cfg)?;
    Ok(TrainedAutoencoder {
        model,
        normalizer,
        history,
    })
}

/// Loss-history CSV: `epoch,loss`.
pub fn write_loss_history_csv(out: &mut impl Write, history: &[f64]) -> std::io::Result<()> {
    writeln!(out, "epoch,loss")?;
    for (e, l) in history.iter().enumerate() {
        writeln!(out, "{e},{l:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshots::{build_snapshot_set, exact_solution, AdvDiffConfig, Case, Grid1D};

    fn random_batch(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn fd_check(kind: LossKind, seed: u64) -> f64 {
        let mut model = AutoencoderModel::seeded(&[4, 2, 1, 2, 4], kind, 0.3, seed).unwrap();
        let batch = random_batch(3, 4, seed + 100);
        let analytic = model.gradient(&batch).unwrap().flatten();
        let p0 = model.parameters();
        let h = 1e-6;
        let mut worst = 0.0f64;
        for k in 0..p0.len() {
            let mut p = p0.clone();
            p[k] = p0[k] + h;
            model.set_parameters(&p).unwrap();
            let fp = model.loss(&batch).unwrap().total();
            p[k] = p0[k] - h;
            model.set_parameters(&p).unwrap();
            let fm = model.loss(&batch).unwrap().total();
            let fd = (fp - fm) / (2.0 * h);
            let rel = (analytic[k] - fd).abs() / analytic[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        model.set_parameters(&p0).unwrap();
        worst
    }

    #[test]
    fn gradient_matches_central_differences_for_every_loss() {
        for kind in LossKind::ALL {
            for seed in 0..3 {
                let rel = fd_check(kind, seed);
                assert!(rel < 1e-5, "{kind} seed {seed}: {rel:e}");
            }
        }
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = AutoencoderModel::zeros(&default_layer_dims(8, 3), LossKind::Contractive, 0.5).unwrap();
        let u: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let f = m.forward(&u).unwrap();
        assert!(f.z.iter().all(|&v| v == 0.0));
        assert!(f.reconstruction.iter().all(|&v| v == 0.0));
        let batch = random_batch(5, 8, 1);
        let loss = m.loss(&batch).unwrap();
        let mean_sq = batch
            .iter_rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / 5.0;
        assert!((loss.reconstruction - mean_sq).abs() < 1e-14 * mean_sq);
        assert_eq!(loss.regularization, 0.0);
    }

    #[test]
    fn hand_evaluated_toy() {
        let mut m = AutoencoderModel::zeros(&[2, 1, 2], LossKind::Vanilla, 0.0).unwrap();
        m.set_parameters(&[0.5, -1.0, 0.2, 2.0, -3.0, 0.1, 0.4]).unwrap();
        let f = m.forward(&[1.0, 0.5]).unwrap();
        let z = (0.5 * 1.0 - 1.0 * 0.5 + 0.2f64).tanh();
        assert_eq!(f.z, vec![z]);
        assert_eq!(f.reconstruction, vec![2.0 * z + 0.1, -3.0 * z + 0.4]);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_vanilla_gradient() {
        let mut m = AutoencoderModel::seeded(&[4, 2, 1, 2, 4], LossKind::Vanilla, 0.0, 5).unwrap();
        let mut p = m.parameters();
        let mut at = 0;
        for l in m.layers() {
            at += l.weights.rows() * l.weights.cols();
            p[at..at + l.bias.len()].iter_mut().for_each(|v| *v = 0.0);
            at += l.bias.len();
        }
        m.set_parameters(&p).unwrap();
        let g = m.gradient(&DenseMatrix::zeros(3, 4)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn regularization_is_linear_in_lambda() {
        let batch = random_batch(4, 6, 9);
        for kind in [LossKind::Sparse, LossKind::Contractive] {
            let m1 = AutoencoderModel::seeded(&[6, 3, 2, 3, 6], kind, 0.1, 2).unwrap();
            let mut m2 = m1.clone();
            m2.lambda_reg = 0.2;
            let mut m0 = m1.clone();
            m0.lambda_reg = 0.0;
            let (g0, g1, g2) = (
                m0.gradient(&batch).unwrap(),
                m1.gradient(&batch).unwrap(),
                m2.gradient(&batch).unwrap(),
            );
            assert!((g2.loss.regularization - 2.0 * g1.loss.regularization).abs() < 1e-14);
            for ((a, b), c) in g0.flatten().iter().zip(g1.flatten()).zip(g2.flatten()) {
                assert!(((c - a) - 2.0 * (b - a)).abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn shapes_for_every_latent_dimension() {
        let u = vec![0.3; 16];
        for n in 1..=10 {
            let m = AutoencoderModel::seeded(&default_layer_dims(16, n), LossKind::Vanilla, 0.0, n as u64).unwrap();
            let f = m.forward(&u).unwrap();
            assert_eq!(f.z.len(), n);
            assert_eq!(f.reconstruction.len(), 16);
            assert_eq!(m.decode(&f.z).unwrap(), f.reconstruction);
        }
        let m = AutoencoderModel::seeded(&default_layer_dims(16, 2), LossKind::Vanilla, 0.0, 0).unwrap();
        assert!(m.forward(&[0.0; 15]).unwrap_err().is_validation());
    }

    #[test]
    fn single_snapshot_training_converges() {
        let cfg_pde = AdvDiffConfig::for_case(Case::Advection);
        let u: Vec<f64> = Grid1D::default()
            .points()
            .iter()
            .map(|&x| exact_solution(&cfg_pde, x, 0.2).unwrap())
            .collect();
        let data = DenseMatrix::from_rows(std::slice::from_ref(&u)).unwrap();
        let mut m = AutoencoderModel::seeded(&default_layer_dims(u.len(), 2), LossKind::Vanilla, 0.0, 0).unwrap();
        let h = train(
            &mut m,
            &data,
            &TrainConfig {
                epochs: 5000,
                ..Default::default()
            },
        )
        .unwrap();
        let rec = m.forward(&u).unwrap().reconstruction;
        let err = rec.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            / u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err < 1e-2, "{err:e}");
        assert!(h[5000] < h[0]);
    }

    #[test]
    fn fit_autoencoder_reduces_loss_on_a_manifold() {
        let set = build_snapshot_set(
            &AdvDiffConfig::for_case(Case::Diffusion),
            Grid1D::new(-1.0, 3.0, 64).unwrap(),
            8,
            Case::Diffusion,
        )
        .unwrap();
        let ae = fit_autoencoder(
            &set,
            2,
            LossKind::Vanilla,
            0.0,
            &TrainConfig {
                epochs: 500,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ae.history.len(), 501);
        assert!(ae.history[500] < ae.history[0]);
        assert_eq!(ae.encode(set.snapshot(0)).unwrap().len(), 2);
        assert_eq!(ae.reconstruct(set.snapshot(0)).unwrap().len(), 64);
    }

    #[test]
    fn seeded_training_is_bitwise_deterministic() {
        let data = random_batch(6, 8, 3);
        let cfg = TrainConfig {
            epochs: 200,
            seed: 11,
            ..Default::default()
        };
        let run = || {
            let mut m =
                AutoencoderModel::seeded(&default_layer_dims(8, 2), LossKind::Contractive, 1e-3, cfg.seed).unwrap();
            let h = train(&mut m, &data, &cfg).unwrap();
            (m.parameters(), h)
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(
            a.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn divergence_is_reported() {
        let data = random_batch(6, 8, 3);
        let mut m = AutoencoderModel::seeded(&default_layer_dims(8, 2), LossKind::Vanilla, 0.0, 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 50.0,
            epochs: 100,
            ..Default::default()
        };
        let err = train(&mut m, &data, &cfg).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn minibatches_cover_every_row() {
        let data = random_batch(7, 8, 4);
        let mut m = AutoencoderModel::seeded(&default_layer_dims(8, 2), LossKind::Sparse, 1e-3, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            batch: Some(3),
            ..Default::default()
        };
        let h = train(&mut m, &data, &cfg).unwrap();
        assert_eq!(h.len(), 301);
        assert!(h[300] < h[0]);
    }

    #[test]
    fn normalizer_round_trip() {
        let mut data = random_batch(5, 7, 8);
        for i in 0..5 {
            data[(i, 3)] = 2.5;
        }
        let nz = Normalizer::fit(&data).unwrap();
        let scaled = nz.normalize_rows(&data);
        assert!(scaled
            .as_slice()
            .iter()
            .all(|v| (-1.0 - 1e-15..=1.0 + 1e-15).contains(v)));
        for r in data.iter_rows() {
            let back = nz.denormalize(&nz.normalize(r));
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = AutoencoderModel::seeded(&default_layer_dims(6, 2), LossKind::Sparse, 1e-4, 3).unwrap();
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("layer_dims 6 3 2 3 6\nloss_kind sparse\n"));
        let back = AutoencoderModel::read_checkpoint(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, m);
        let bad = text.replacen("layer 1 2 3", "layer 1 2 4", 1);
        assert!(matches!(
            AutoencoderModel::read_checkpoint(std::io::Cursor::new(bad)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn loss_history_csv() {
        let mut buf = Vec::new();
        write_loss_history_csv(&mut buf, &[2.0, 1.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss\n0,2e0\n1,1e0\n");
    }
}
