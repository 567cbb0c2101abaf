//! Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Inputs are expected in the unit cube. Outputs are standardized internally;
//! predictions are returned in the caller's units. Hyperparameters live in log
//! space while fitting, and [`fit_map`] maximizes the log marginal likelihood
//! plus a log-normal prior on every hyperparameter.

mod fit;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use fit::{fit_map, FitOptions, LogNormalPrior, Priors};

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Jitter ladder tried when `K + noise * I` does not factorize.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Clone, Debug, PartialEq)]
pub struct KernelHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelHyperparams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let h = Self { lengthscales, signal_variance, noise_variance };
        if h.lengthscales.is_empty()
            || h.lengthscales.iter().chain([&h.signal_variance, &h.noise_variance]).any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidArgument(format!("hyperparameters must be positive: {h:?}")));
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[log l_1 .. log l_d, log signal, log noise]`.
    pub fn to_log(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .chain([&self.signal_variance, &self.noise_variance])
            .map(|v| v.ln())
            .collect()
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }
}

/// `s2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r)` with `r` the
/// lengthscale-weighted distance.
pub fn matern52(x: &[f64], x2: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    let r = scaled_distance(x, x2, lengthscales);
    matern52_of_r(r, signal_variance)
}

fn scaled_distance(x: &[f64], x2: &[f64], lengthscales: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn matern52_of_r(r: f64, signal_variance: f64) -> f64 {
    let s = SQRT5 * r;
    signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// A GP conditioned on data with fixed hyperparameters.
///
/// Holds the Cholesky factor of `K + (noise + jitter) I` on the standardized
/// outputs. Immutable once built, so it can be shared across threads.
#[derive(Clone, Debug)]
pub struct GpModel {
    dim: usize,
    /// Row-major `n x dim` inputs.
    x: Vec<f64>,
    y_raw: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    hyperparams: KernelHyperparams,
    jitter: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Conditions on `(x, y)` with the given hyperparameters.
    pub fn new(x: &[Vec<f64>], y: &[f64], hyperparams: KernelHyperparams) -> Result<Self> {
        let dim = hyperparams.dim();
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!("{} inputs but {} outputs", x.len(), y.len())));
        }
        if let Some(row) = x.iter().find(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!("input of dimension {} for a {dim}-d kernel", row.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite training output".into()));
        }
        let (y_mean, y_scale) = standardization(y);
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        Self::build(dim, flat, y.to_vec(), y_mean, y_scale, hyperparams)
    }

    /// The GP prior with no observations: mean zero, variance equal to the
    /// signal variance.
    pub fn prior(hyperparams: KernelHyperparams) -> Self {
        Self {
            dim: hyperparams.dim(),
            x: Vec::new(),
            y_raw: Vec::new(),
            y_mean: 0.0,
            y_scale: 1.0,
            hyperparams,
            jitter: 0.0,
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
        }
    }

    fn build(
        dim: usize,
        x: Vec<f64>,
        y_raw: Vec<f64>,
        y_mean: f64,
        y_scale: f64,
        hyperparams: KernelHyperparams,
    ) -> Result<Self> {
        let n = y_raw.len();
        let k = kernel_matrix(&x, dim, &hyperparams);
        let (chol, jitter) = factorize(&k, hyperparams.noise_variance)?;
        let ys = DVector::from_iterator(n, y_raw.iter().map(|v| (v - y_mean) / y_scale));
        let alpha = chol_solve(&chol, &ys);
        Ok(Self { dim, x, y_raw, y_mean, y_scale, hyperparams, jitter, chol, alpha })
    }

    /// Same data, different hyperparameters.
    pub fn with_hyperparams(&self, hyperparams: KernelHyperparams) -> Result<Self> {
        Self::build(self.dim, self.x.clone(), self.y_raw.clone(), self.y_mean, self.y_scale, hyperparams)
    }

    pub fn len(&self) -> usize {
        self.y_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_raw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyperparams
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub fn outputs(&self) -> &[f64] {
        &self.y_raw
    }

    /// `(mean, std)` used to standardize the outputs.
    pub fn standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }

    /// Signal variance expressed in output units.
    pub fn output_signal_variance(&self) -> f64 {
        self.hyperparams.signal_variance * self.y_scale * self.y_scale
    }

    /// Noise variance expressed in output units.
    pub fn output_noise_variance(&self) -> f64 {
        self.hyperparams.noise_variance * self.y_scale * self.y_scale
    }

    /// Log marginal likelihood of the standardized outputs and its gradient
    /// with respect to [`KernelHyperparams::to_log`].
    pub fn log_marginal_likelihood(&self) -> (f64, Vec<f64>) {
        let n = self.len();
        let d = self.dim;
        let h = &self.hyperparams;
        let ys = DVector::from_iterator(n, self.y_raw.iter().map(|v| (v - self.y_mean) / self.y_scale));
        let log_det_half: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum();
        let value = -0.5 * ys.dot(&self.alpha) - log_det_half - 0.5 * n as f64 * LN_2PI;

        // W = alpha alpha^T - K^-1; dL/dtheta = 0.5 tr(W dK/dtheta)
        let k_inv = chol_inverse(&self.chol);
        let mut grad = vec![0.0; d + 2];
        let inv_l2: Vec<f64> = h.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let mut diff2 = vec![0.0; d];
        for i in 0..n {
            let xi = &self.x[i * d..(i + 1) * d];
            // diagonal: r = 0, no lengthscale contribution
            let wii = self.alpha[i] * self.alpha[i] - k_inv[(i, i)];
            grad[d] += 0.5 * wii * h.signal_variance;
            grad[d + 1] += 0.5 * wii * h.noise_variance;
            for j in 0..i {
                let xj = &self.x[j * d..(j + 1) * d];
                let mut r2 = 0.0;
                for k in 0..d {
                    diff2[k] = (xi[k] - xj[k]).powi(2) * inv_l2[k];
                    r2 += diff2[k];
                }
                let s = SQRT5 * r2.sqrt();
                let e = (-s).exp();
                let kf = h.signal_variance * (1.0 + s + s * s / 3.0) * e;
                // symmetric pair counted twice, times the 0.5 prefactor
                let wij = self.alpha[i] * self.alpha[j] - k_inv[(i, j)];
                grad[d] += wij * kf;
                let c = wij * (5.0 / 3.0) * h.signal_variance * (1.0 + s) * e;
                for k in 0..d {
                    grad[k] += c * diff2[k];
                }
            }
        }
        (value, grad)
    }

    /// Predictive mean and latent variance at each row of `xs`, in output units.
    pub fn posterior(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        xs.iter().map(|x| self.predict(x)).unzip()
    }

    /// Predictive `(mean, variance)` at one point.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let h = &self.hyperparams;
        let n = self.len();
        if n == 0 {
            return (self.y_mean, h.signal_variance * self.y_scale * self.y_scale);
        }
        let d = self.dim;
        let mut kstar: Vec<f64> = (0..n)
            .map(|i| matern52(&self.x[i * d..(i + 1) * d], x, &h.lengthscales, h.signal_variance))
            .collect();
        let mean_std = kstar.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();
        // forward substitution in place: v = L^-1 k*
        for i in 0..n {
            let mut s = kstar[i];
            for j in 0..i {
                s -= self.chol[(i, j)] * kstar[j];
            }
            kstar[i] = s / self.chol[(i, i)];
        }
        let var_std = (h.signal_variance - kstar.iter().map(|v| v * v).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_scale * mean_std, var_std * self.y_scale * self.y_scale)
    }

    /// Joint latent posterior over several points: mean vector and covariance.
    pub fn joint_posterior(&self, xs: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
        let h = &self.hyperparams;
        let q = xs.len();
        let n = self.len();
        let d = self.dim;
        let mut prior = DMatrix::zeros(q, q);
        for a in 0..q {
            for b in 0..q {
                prior[(a, b)] = matern52(&xs[a], &xs[b], &h.lengthscales, h.signal_variance);
            }
        }
        if n == 0 {
            return (vec![self.y_mean; q], prior * (self.y_scale * self.y_scale));
        }
        let kxs = DMatrix::from_fn(n, q, |i, a| matern52(&self.x[i * d..(i + 1) * d], &xs[a], &h.lengthscales, h.signal_variance));
        let mean: Vec<f64> = (0..q)
            .map(|a| self.y_mean + self.y_scale * kxs.column(a).dot(&self.alpha))
            .collect();
        let v = self.chol.solve_lower_triangular(&kxs).expect("Cholesky factor has a positive diagonal");
        let cov = (prior - v.transpose() * v) * (self.y_scale * self.y_scale);
        (mean, cov)
    }
}

fn standardization(y: &[f64]) -> (f64, f64) {
    if y.is_empty() {
        return (0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    (mean, scale)
}

fn kernel_matrix(x: &[f64], d: usize, h: &KernelHyperparams) -> DMatrix<f64> {
    let n = if d == 0 { 0 } else { x.len() / d };
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.signal_variance;
        for j in 0..i {
            let v = matern52(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d], &h.lengthscales, h.signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Lower Cholesky factor of `k + (noise + jitter) I`, walking the jitter ladder.
fn factorize(k: &DMatrix<f64>, noise: f64) -> Result<(DMatrix<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += noise + jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok((c.unpack(), jitter));
        }
    }
    Err(Error::Factorization { max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] })
}

fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let z = l.solve_lower_triangular(b).expect("positive diagonal");
    l.transpose().solve_upper_triangular(&z).expect("positive diagonal")
}

fn chol_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let l_inv = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("positive diagonal");
    l_inv.transpose() * l_inv
}
