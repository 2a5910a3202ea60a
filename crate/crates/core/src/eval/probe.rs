use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Tensor;
use crate::rng;

/// L2 strengths searched by [`cross_validated_probe`] (`10⁻³ … 10³`).
pub const L2_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeLoss {
    /// Multinomial softmax cross-entropy.
    Logistic,
    /// One-vs-rest hinge (linear SVM surrogate).
    Hinge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub loss: ProbeLoss,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    /// L2-normalize embedding rows before fitting.
    pub normalize_rows: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            loss: ProbeLoss::Logistic,
            lr: 0.05,
            epochs: 300,
            l2: 1e-4,
            seed: 0,
            normalize_rows: true,
        }
    }
}

impl ProbeConfig {
    pub fn hinge() -> Self {
        Self {
            loss: ProbeLoss::Hinge,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || !(self.l2 >= 0.0) || !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "probe needs epochs >= 1, l2 >= 0, lr > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    /// Test accuracy of always predicting the most frequent training class.
    pub majority_rate: f64,
    /// Train accuracy of the same constant predictor.
    pub train_majority_rate: f64,
    /// Test samples whose class never occurs in training (always counted wrong).
    pub unseen_test_samples: usize,
    pub l2: f64,
}

struct Linear {
    w: Tensor,
    b: Vec<f64>,
}

impl Linear {
    fn scores(&self, x: &Tensor) -> Tensor {
        let mut s = x.matmul(&self.w).expect("probe dims agree");
        for i in 0..s.rows() {
            s.row_mut(i)
                .iter_mut()
                .zip(&self.b)
                .for_each(|(v, b)| *v += b);
        }
        s
    }

    fn predict(&self, x: &Tensor) -> Vec<usize> {
        let s = self.scores(x);
        (0..s.rows())
            .map(|i| {
                let r = s.row(i);
                (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best })
            })
            .collect()
    }
}

fn prepare(x: &Tensor, cfg: &ProbeConfig) -> Tensor {
    if cfg.normalize_rows {
        x.row_l2_normalize()
    } else {
        x.clone()
    }
}

/// Full-batch gradient descent; the bias is not regularized.
fn fit(x: &Tensor, y: &[usize], classes: usize, cfg: &ProbeConfig) -> Linear {
    let (n, d) = x.shape();
    let mut model = Linear {
        w: Tensor::zeros(d, classes),
        b: vec![0.0; classes],
    };
    for _ in 0..cfg.epochs {
        let s = model.scores(x);
        // dL/dscores, averaged over samples
        let mut g = Tensor::zeros(n, classes);
        for i in 0..n {
            let (si, gi) = (s.row(i), g.row_mut(i));
            match cfg.loss {
                ProbeLoss::Logistic => {
                    let m = si.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = si.iter().map(|v| (v - m).exp()).sum();
                    for c in 0..classes {
                        gi[c] =
                            ((si[c] - m).exp() / z - if c == y[i] { 1.0 } else { 0.0 }) / n as f64;
                    }
                }
                ProbeLoss::Hinge => {
                    for c in 0..classes {
                        let sign = if c == y[i] { 1.0 } else { -1.0 };
                        if sign * si[c] < 1.0 {
                            gi[c] = -sign / n as f64;
                        }
                    }
                }
            }
        }
        let mut gw = x.t_matmul(&g).expect("probe dims agree");
        gw.axpy(cfg.l2, &model.w).expect("same shape");
        let gb = (0..classes).map(|c| (0..n).map(|i| g.get(i, c)).sum::<f64>());
        model.w.axpy(-cfg.lr, &gw).expect("same shape");
        model
            .b
            .iter_mut()
            .zip(gb)
            .for_each(|(b, g)| *b -= cfg.lr * g);
    }
    model
}

fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64
}

fn check_inputs(x: &Tensor, y: &[usize], what: &str) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::shape(
            "linear_probe",
            format!("{what}: {} rows, {} labels", x.rows(), y.len()),
        ));
    }
    Ok(())
}

/// Trains a linear classifier on frozen `h_train` and reports accuracies.
pub fn linear_probe(
    h_train: &Tensor,
    y_train: &[usize],
    h_test: &Tensor,
    y_test: &[usize],
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    cfg.validate()?;
    check_inputs(h_train, y_train, "train")?;
    check_inputs(h_test, y_test, "test")?;
    if y_train.is_empty() {
        return Err(Error::Data("probe training set is empty".into()));
    }
    if h_train.cols() != h_test.cols() {
        return Err(Error::shape(
            "linear_probe",
            format!("train dim {} vs test dim {}", h_train.cols(), h_test.cols()),
        ));
    }
    let classes = y_train.iter().chain(y_test).max().map_or(1, |m| m + 1);
    let mut counts = vec![0usize; classes];
    y_train.iter().for_each(|&c| counts[c] += 1);
    let majority = (0..classes).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    let unseen = y_test.iter().filter(|&&c| counts[c] == 0).count();

    let (xtr, xte) = (prepare(h_train, cfg), prepare(h_test, cfg));
    let model = fit(&xtr, y_train, classes, cfg);
    let result = ProbeResult {
        test_accuracy: accuracy(&model.predict(&xte), y_test),
        train_accuracy: accuracy(&model.predict(&xtr), y_train),
        majority_rate: accuracy(&vec![majority; y_test.len()], y_test),
        train_majority_rate: accuracy(&vec![majority; y_train.len()], y_train),
        unseen_test_samples: unseen,
        l2: cfg.l2,
    };
    if !result.test_accuracy.is_finite() {
        return Err(Error::Evaluation("probe accuracy".into()));
    }
    Ok(result)
}

/// Chooses the L2 strength from `grid` by k-fold cross-validation on the
/// training set, then refits on all training rows.
pub fn cross_validated_probe(
    h_train: &Tensor,
    y_train: &[usize],
    h_test: &Tensor,
    y_test: &[usize],
    cfg: &ProbeConfig,
    grid: &[f64],
    folds: usize,
) -> Result<ProbeResult> {
    check_inputs(h_train, y_train, "train")?;
    if grid.is_empty() || folds < 2 || folds > y_train.len() {
        return Err(Error::Config(format!(
            "need a non-empty grid and 2 <= folds <= {}",
            y_train.len()
        )));
    }
    let mut order: Vec<usize> = (0..y_train.len()).collect();
    order.shuffle(&mut rng::seeded(cfg.seed));
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &l2 in grid {
        let trial = ProbeConfig { l2, ..*cfg };
        let mut score = 0.0;
        for f in 0..folds {
            let (mut val, mut fit_idx) = (Vec::new(), Vec::new());
            for (k, &i) in order.iter().enumerate() {
                if k % folds == f {
                    val.push(i)
                } else {
                    fit_idx.push(i)
                }
            }
            let pick = |idx: &[usize]| -> Result<(Tensor, Vec<usize>)> {
                Ok((
                    h_train.select_rows(idx)?,
                    idx.iter().map(|&i| y_train[i]).collect(),
                ))
            };
            let (xf, yf) = pick(&fit_idx)?;
            let (xv, yv) = pick(&val)?;
            score += linear_probe(&xf, &yf, &xv, &yv, &trial)?.test_accuracy;
        }
        if score > best.0 {
            best = (score, l2);
        }
    }
    linear_probe(
        h_train,
        y_train,
        h_test,
        y_test,
        &ProbeConfig { l2: best.1, ..*cfg },
    )
}
