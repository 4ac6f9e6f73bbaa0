use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats;

/// Single hidden layer, tanh activation, linear output:
/// `f(x) = w2 . tanh(W1 x + b1) + b2`.
///
/// The gradient `W1^T diag(sech^2(W1 x + b1)) w2` exists everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    /// Row-major `hidden x inputs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 40,
            max_epochs: 400,
            patience: 20,
            seed: 0,
            learning_rate: 3e-3,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub valid_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_mse: f64,
    pub valid_mse: f64,
    pub train_r2: f64,
    pub valid_r2: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl MlpModel {
    fn forward_row(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let p = self.inputs;
        let mut out = self.b2;
        for (h, act) in hidden.iter_mut().enumerate() {
            let w = &self.w1[h * p..(h + 1) * p];
            let z = self.b1[h] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *act = z.tanh();
            out += self.w2[h] * *act;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.w1.len() == self.hidden * self.inputs
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden
            && self.inputs > 0
            && self.hidden > 0;
        if !ok {
            return Err(Error::InvalidArgument("inconsistent MLP weight shapes".into()));
        }
        let finite = self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite MLP weights".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: MlpModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

impl Predictor for MlpModel {
    fn arity(&self) -> usize {
        self.inputs
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_width(self.inputs, &x)?;
        let mut hidden = vec![0.0; self.hidden];
        let mut row = vec![0.0; self.inputs];
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
                self.forward_row(&row, &mut hidden)
            })
            .collect())
    }

    fn has_analytic_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.inputs, &x)?;
        let p = self.inputs;
        let mut out = Array2::zeros((x.nrows(), p));
        let mut hidden = vec![0.0; self.hidden];
        let mut row = vec![0.0; p];
        for (i, r) in x.rows().into_iter().enumerate() {
            row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
            self.forward_row(&row, &mut hidden);
            for (h, &a) in hidden.iter().enumerate() {
                let s = self.w2[h] * (1.0 - a * a);
                let w = &self.w1[h * p..(h + 1) * p];
                for j in 0..p {
                    out[[i, j]] += s * w[j];
                }
            }
        }
        Ok(out)
    }
}

/// Parameters in standardized coordinates plus Adam moments.
struct Trainer {
    p: usize,
    h: usize,
    params: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

// Layout of `params`: w1 (h*p), b1 (h), w2 (h), b2 (1).
impl Trainer {
    fn new(p: usize, h: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = h * p + 2 * h + 1;
        let mut params = vec![0.0; n];
        let limit = (6.0 / (p + h) as f64).sqrt();
        for w in params.iter_mut().take(h * p) {
            *w = rng.random_range(-limit..limit);
        }
        for b in params.iter_mut().skip(h * p).take(h) {
            *b = rng.random_range(-0.5..0.5);
        }
        // Output layer starts at zero: the initial fit is the target mean.
        Trainer {
            p,
            h,
            params,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn forward(&self, x: &[f64], act: &mut [f64]) -> f64 {
        let (p, h) = (self.p, self.h);
        let b1 = &self.params[h * p..h * p + h];
        let w2 = &self.params[h * p + h..h * p + 2 * h];
        let mut out = self.params[h * p + 2 * h];
        for k in 0..h {
            let w = &self.params[k * p..(k + 1) * p];
            let z = b1[k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            act[k] = z.tanh();
            out += w2[k] * act[k];
        }
        out
    }

    /// Accumulates d(0.5 err^2)/d(params) scaled by `weight` into `grad`.
    fn backward(&self, x: &[f64], act: &[f64], err: f64, weight: f64, grad: &mut [f64]) {
        let (p, h) = (self.p, self.h);
        let e = err * weight;
        let w2_off = h * p + h;
        for k in 0..h {
            let w2k = self.params[w2_off + k];
            grad[w2_off + k] += e * act[k];
            let dz = e * w2k * (1.0 - act[k] * act[k]);
            grad[h * p + k] += dz;
            let g = &mut grad[k * p..(k + 1) * p];
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += dz * xj;
            }
        }
        grad[h * p + 2 * h] += e;
    }

    fn adam(&mut self, grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let c1 = 1.0 - B1.powi(self.step);
        let c2 = 1.0 - B2.powi(self.step);
        for i in 0..self.params.len() {
            let g = grad[i];
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            self.params[i] -= lr * mh / (vh.sqrt() + EPS);
        }
    }

    fn mse(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut act = vec![0.0; self.h];
        let n = y.len();
        (0..n)
            .map(|i| {
                let e = self.forward(&x[i * self.p..(i + 1) * self.p], &mut act) - y[i];
                e * e
            })
            .sum::<f64>()
            / n as f64
    }
}

struct Scaler {
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

fn nonzero_scale(s: f64) -> f64 {
    if s > 1e-12 && s.is_finite() {
        s
    } else {
        1.0
    }
}

impl Scaler {
    fn fit(d: &Dataset, y: &[f64]) -> Self {
        Scaler {
            x_mean: d.columns().iter().map(|c| stats::mean(c)).collect(),
            x_scale: d
                .columns()
                .iter()
                .map(|c| nonzero_scale(stats::std_dev(c)))
                .collect(),
            y_mean: stats::mean(y),
            y_scale: nonzero_scale(stats::std_dev(y)),
        }
    }

    fn rows(&self, d: &Dataset) -> Vec<f64> {
        let (n, p) = (d.n(), d.p());
        let mut out = vec![0.0; n * p];
        for j in 0..p {
            for (i, v) in d.column(j).iter().enumerate() {
                out[i * p + j] = (v - self.x_mean[j]) / self.x_scale[j];
            }
        }
        out
    }

    fn targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_mean) / self.y_scale).collect()
    }

    /// Folds the standardization into the weights.
    fn export(&self, t: &Trainer) -> MlpModel {
        let (p, h) = (t.p, t.h);
        let mut w1 = vec![0.0; h * p];
        let mut b1 = t.params[h * p..h * p + h].to_vec();
        for k in 0..h {
            for j in 0..p {
                let w = t.params[k * p + j] / self.x_scale[j];
                w1[k * p + j] = w;
                b1[k] -= w * self.x_mean[j];
            }
        }
        let w2 = t.params[h * p + h..h * p + 2 * h]
            .iter()
            .map(|w| w * self.y_scale)
            .collect();
        let b2 = t.params[h * p + 2 * h] * self.y_scale + self.y_mean;
        MlpModel {
            inputs: p,
            hidden: h,
            w1,
            b1,
            w2,
            b2,
        }
    }
}

/// Trains the network with mini-batch Adam and early stopping on validation
/// MSE. The returned weights are those of the best validation epoch.
pub fn fit_mlp(train: &Dataset, valid: &Dataset, cfg: &MlpConfig) -> Result<(MlpModel, FitReport)> {
    let y_train = train
        .response()
        .ok_or_else(|| Error::InvalidArgument("training data has no response".into()))?;
    let y_valid = valid
        .response()
        .ok_or_else(|| Error::InvalidArgument("validation data has no response".into()))?;
    if train.p() != valid.p() {
        return Err(Error::WidthMismatch {
            expected: train.p(),
            found: valid.p(),
        });
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument(
            "hidden width, batch size and max epochs must be positive".into(),
        ));
    }
    let p = train.p();
    let scaler = Scaler::fit(train, y_train);
    let xt = scaler.rows(train);
    let yt = scaler.targets(y_train);
    let xv = scaler.rows(valid);
    let yv = scaler.targets(y_valid);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trainer = Trainer::new(p, cfg.hidden, &mut rng);
    let mut order: Vec<usize> = (0..train.n()).collect();
    let mut grad = vec![0.0; trainer.params.len()];
    let mut act = vec![0.0; cfg.hidden];

    let y_scale2 = scaler.y_scale * scaler.y_scale;
    let mut best = (f64::INFINITY, 0usize, trainer.params.clone());
    let mut history = Vec::new();
    let mut last_finite = 0;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &xt[i * p..(i + 1) * p];
                let err = trainer.forward(x, &mut act) - yt[i];
                trainer.backward(x, &act, err, w, &mut grad);
            }
            trainer.adam(&grad, cfg.learning_rate);
        }
        let train_mse = trainer.mse(&xt, &yt) * y_scale2;
        let valid_mse = trainer.mse(&xv, &yv) * y_scale2;
        if !train_mse.is_finite() || !valid_mse.is_finite() {
            return Err(Error::Divergence {
                last_finite_epoch: last_finite,
            });
        }
        last_finite = epoch;
        history.push(EpochRecord {
            epoch,
            train_mse,
            valid_mse,
        });
        if valid_mse < best.0 {
            best = (valid_mse, epoch, trainer.params.clone());
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    let (_, best_epoch, params) = best;
    trainer.params = params;
    let model = scaler.export(&trainer);
    let train_pred = model.predict(train.to_matrix().view())?;
    let valid_pred = model.predict(valid.to_matrix().view())?;
    let report = FitReport {
        train_mse: mse(y_train, &train_pred),
        valid_mse: mse(y_valid, &valid_pred),
        train_r2: super::r_squared(y_train, &train_pred),
        valid_r2: super::r_squared(y_valid, &valid_pred),
        epochs_run,
        best_epoch,
        history,
    };
    Ok((model, report))
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}
