//! L2-penalized logistic regression solved by damped Newton iterations.
//!
//! Objective over parameters θ = (w, b):
//!
//! ```text
//! f(θ) = (1/n) Σ [softplus(zᵢ) − yᵢ zᵢ] + ‖w‖² / (2·C·n),   zᵢ = w·xᵢ + b
//! ```
//!
//! The intercept is unpenalized. The Hessian is positive definite whenever
//! C is finite, so each Newton system is solved by Cholesky.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::encoder::EncoderSpec;
use crate::dataset::{Dataset, Label, LesionRecord};
use crate::error::{Error, Result};
use crate::sigmoid;

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Penalized mean log-likelihood over an encoded design matrix.
pub struct LogisticObjective<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    c: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [f64], c: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
        }
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive and finite, got {c}")));
        }
        Ok(Self { x, y, c })
    }

    /// Parameter count: one weight per column plus the intercept (last).
    pub fn dim(&self) -> usize {
        self.x[0].len() + 1
    }

    fn n(&self) -> f64 {
        self.x.len() as f64
    }

    fn logit(theta: &[f64], row: &[f64]) -> f64 {
        let d = row.len();
        row.iter().zip(&theta[..d]).map(|(a, b)| a * b).sum::<f64>() + theta[d]
    }

    fn penalty_scale(&self) -> f64 {
        1.0 / (self.c * self.n())
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let d = self.dim() - 1;
        let nll: f64 = self
            .x
            .iter()
            .zip(self.y)
            .map(|(row, &y)| {
                let z = Self::logit(theta, row);
                softplus(z) - y * z
            })
            .sum();
        let w2: f64 = theta[..d].iter().map(|w| w * w).sum();
        nll / self.n() + 0.5 * self.penalty_scale() * w2
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim() - 1;
        let mut g = vec![0.0; d + 1];
        for (row, &y) in self.x.iter().zip(self.y) {
            let resid = sigmoid(Self::logit(theta, row)) - y;
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += resid * xj;
            }
            g[d] += resid;
        }
        let n = self.n();
        let lam = self.penalty_scale();
        for j in 0..d {
            g[j] = g[j] / n + lam * theta[j];
        }
        g[d] /= n;
        g
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let p = self.dim();
        let d = p - 1;
        let mut h = DMatrix::<f64>::zeros(p, p);
        let mut aug = vec![1.0; p];
        for row in self.x {
            let s = sigmoid(Self::logit(theta, row));
            let w = s * (1.0 - s);
            aug[..d].copy_from_slice(row);
            for a in 0..p {
                let wa = w * aug[a];
                for b in a..p {
                    h[(a, b)] += wa * aug[b];
                }
            }
        }
        let n = self.n();
        let lam = self.penalty_scale();
        for a in 0..p {
            for b in a..p {
                h[(a, b)] /= n;
                h[(b, a)] = h[(a, b)];
            }
        }
        for j in 0..d {
            h[(j, j)] += lam;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the Euclidean gradient norm is at or below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimize the penalized objective from θ = 0.
pub fn fit_matrix(x: &[Vec<f64>], y: &[f64], c: f64, opts: SolverOptions) -> Result<LogisticFit> {
    let obj = LogisticObjective::new(x, y, c)?;
    let positives = y.iter().filter(|v| **v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let p = obj.dim();
    let mut theta = vec![0.0; p];
    let mut f = obj.value(&theta);
    let mut trace = vec![f];
    let mut g = obj.gradient(&theta);
    let mut iterations = 0;
    while norm(&g) > opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::NonConvergence { iterations, grad_norm: norm(&g) });
        }
        iterations += 1;
        let h = obj.hessian(&theta);
        let rhs = -DVector::from_column_slice(&g);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => rhs,
        };
        let slope: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let fc = obj.value(&cand);
            if fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            return Err(Error::NonConvergence { iterations, grad_norm: norm(&g) });
        };
        theta = cand;
        f = fc;
        trace.push(f);
        g = obj.gradient(&theta);
    }
    let intercept = theta.pop().expect("intercept present");
    Ok(LogisticFit {
        weights: theta,
        intercept,
        iterations,
        grad_norm: norm(&g),
        objective_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub seed: Option<u64>,
    /// Mean held-out log-loss of the chosen C, when chosen by grid search.
    pub cv_log_loss: Option<f64>,
    pub n_train: usize,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective_trace: Vec<f64>,
}

/// Fitted encoder plus logistic weights: maps a record to P(malignant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub encoder: EncoderSpec,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Inverse regularization strength.
    pub c: f64,
    pub training: TrainingInfo,
}

pub(crate) fn targets(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|l| f64::from(l.as_u8())).collect()
}

impl RiskModel {
    pub fn check(&self) -> Result<()> {
        self.encoder.check()?;
        if self.weights.len() != self.encoder.dim() {
            return Err(Error::Inconsistent(format!(
                "weight vector has {} entries but the encoder produces {} columns",
                self.weights.len(),
                self.encoder.dim()
            )));
        }
        if !self.intercept.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Inconsistent("non-finite model coefficient".into()));
        }
        Ok(())
    }

    pub fn logit(&self, x: &LesionRecord) -> f64 {
        let row = self.encoder.encode(x);
        row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept
    }

    /// P(Y = 1 | x).
    pub fn predict_proba(&self, x: &LesionRecord) -> f64 {
        sigmoid(self.logit(x))
    }

    /// P(Y = label | x); the benign probability is `1 − p̂(1|x)`.
    pub fn probability_of(&self, x: &LesionRecord, label: Label) -> f64 {
        let p1 = self.predict_proba(x);
        match label {
            Label::Malignant => p1,
            Label::Benign => 1.0 - p1,
        }
    }

    /// (column name, weight) pairs in encoder order.
    pub fn coefficients(&self) -> Vec<(String, f64)> {
        self.encoder.columns.iter().cloned().zip(self.weights.iter().copied()).collect()
    }
}

/// Fit a logistic model with inverse penalty `c` on a labeled training split.
pub fn fit_logistic(train: &Dataset, enc: &EncoderSpec, c: f64) -> Result<RiskModel> {
    fit_logistic_with(train, enc, c, SolverOptions::default())
}

pub fn fit_logistic_with(
    train: &Dataset,
    enc: &EncoderSpec,
    c: f64,
    opts: SolverOptions,
) -> Result<RiskModel> {
    let labels = train.labels()?;
    let x = enc.encode_all(train.iter());
    let fit = fit_matrix(&x, &targets(&labels), c, opts)?;
    Ok(RiskModel {
        encoder: enc.clone(),
        weights: fit.weights,
        intercept: fit.intercept,
        c,
        training: TrainingInfo {
            seed: None,
            cv_log_loss: None,
            n_train: train.len(),
            iterations: fit.iterations,
            grad_norm: fit.grad_norm,
            objective_trace: fit.objective_trace,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = crate::seeded_rng(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y = x.iter().map(|r| f64::from(u8::from(r[0] + 0.5 * rng.random_range(-2.0..2.0) > 0.0))).collect();
        (x, y)
    }

    #[test]
    fn zero_features_balanced_gives_one_half() {
        let x = vec![vec![0.0, 0.0]; 10];
        let y: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let fit = fit_matrix(&x, &y, 1.0, SolverOptions::default()).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
        assert!(fit.intercept.abs() < 1e-9);
        assert!((sigmoid(fit.intercept) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn separable_data_fits_well() {
        let mut rng = crate::seeded_rng(5);
        let x: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        // separating rule x0 + x1 > 0
        let y: Vec<f64> = x.iter().map(|r| f64::from(u8::from(r[0] + r[1] > 0.0))).collect();
        let fit = fit_matrix(&x, &y, 1.0, SolverOptions::default()).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(r, &t)| {
                let p = sigmoid(fit.weights[0] * r[0] + fit.weights[1] * r[1] + fit.intercept);
                (p >= 0.5) == (t == 1.0)
            })
            .count();
        assert!(correct as f64 / 400.0 >= 0.95);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, y) = random_problem(3, 60, 4);
        let obj = LogisticObjective::new(&x, &y, 0.7).unwrap();
        let mut rng = crate::seeded_rng(99);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = obj.gradient(&theta);
            let h = 1e-5;
            let fd: Vec<f64> = (0..theta.len())
                .map(|j| {
                    let mut up = theta.clone();
                    let mut dn = theta.clone();
                    up[j] += h;
                    dn[j] -= h;
                    (obj.value(&up) - obj.value(&dn)) / (2.0 * h)
                })
                .collect();
            let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff / norm(&g).max(1e-12) <= 1e-5, "relative error {}", diff / norm(&g));
        }
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let (x, y) = random_problem(8, 200, 6);
        let fit = fit_matrix(&x, &y, 10.0, SolverOptions::default()).unwrap();
        assert!(fit.grad_norm <= 1e-6);
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0]; 5];
        let y = vec![1.0; 5];
        assert!(matches!(fit_matrix(&x, &y, 1.0, SolverOptions::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn iteration_cap_reports_gradient() {
        let (x, y) = random_problem(4, 100, 3);
        let opts = SolverOptions { tolerance: 1e-6, max_iterations: 1 };
        match fit_matrix(&x, &y, 1.0, opts) {
            Err(Error::NonConvergence { iterations, grad_norm }) => {
                assert_eq!(iterations, 1);
                assert!(grad_norm > 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn saturated_logit_stays_below_one() {
        let p = sigmoid(30.0);
        assert!(p >= 1.0 - 1e-9 && p < 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
