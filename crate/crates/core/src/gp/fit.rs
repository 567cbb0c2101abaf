use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GpModel, KernelHyperparams};
use crate::error::{Error, Result};

/// Log-normal prior: `log theta ~ N(ln median, log_std^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormalPrior {
    pub median: f64,
    pub log_std: f64,
}

impl LogNormalPrior {
    pub const fn new(median: f64, log_std: f64) -> Self {
        Self { median, log_std }
    }

    /// Log density of `log theta`, up to a constant, and its derivative.
    pub fn log_density(&self, log_theta: f64) -> (f64, f64) {
        let z = (log_theta - self.median.ln()) / self.log_std;
        (-0.5 * z * z, -z / self.log_std)
    }

    fn sample_log(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.median.ln() + self.log_std * z
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Priors {
    pub lengthscale: LogNormalPrior,
    pub signal_variance: LogNormalPrior,
    pub noise_variance: LogNormalPrior,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            lengthscale: LogNormalPrior::new(0.3, 1.0),
            signal_variance: LogNormalPrior::new(1.0, 1.0),
            noise_variance: LogNormalPrior::new(1e-3, 1.0),
        }
    }
}

impl Priors {
    fn component(&self, k: usize, dim: usize) -> &LogNormalPrior {
        match k {
            k if k < dim => &self.lengthscale,
            k if k == dim => &self.signal_variance,
            _ => &self.noise_variance,
        }
    }

    /// Prior mode in log space.
    pub fn mode_log(&self, dim: usize) -> Vec<f64> {
        (0..dim + 2).map(|k| self.component(k, dim).median.ln()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Fresh starts drawn from the prior.
    pub restarts: usize,
    /// Extra start at these hyperparameters, typically the previous fit.
    pub warm_start: Option<KernelHyperparams>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 8, warm_start: None, max_iters: 200, grad_tol: 1e-6, seed: 0 }
    }
}

const LOG_BOUNDS: [(f64, f64); 3] = [
    (-6.907_755_278_982_137, 6.907_755_278_982_137), // lengthscale 1e-3 .. 1e3
    (-9.210_340_371_976_182, 9.210_340_371_976_182), // signal 1e-4 .. 1e4
    (-18.420_680_743_952_367, std::f64::consts::LN_10), // noise 1e-8 .. 10
];

fn bounds(dim: usize) -> Vec<(f64, f64)> {
    (0..dim + 2)
        .map(|k| LOG_BOUNDS[if k < dim { 0 } else { k - dim + 1 }])
        .collect()
}

/// Fits hyperparameters by maximizing log marginal likelihood plus log prior.
///
/// Every start is run with projected L-BFGS; the best posterior mode wins,
/// ties going to the earliest start. With no data the prior mode is returned.
pub fn fit_map(x: &[Vec<f64>], y: &[f64], dim: usize, priors: &Priors, options: &FitOptions) -> Result<GpModel> {
    if dim == 0 {
        return Err(Error::InvalidArgument("zero-dimensional inputs".into()));
    }
    if x.is_empty() {
        return Ok(GpModel::prior(KernelHyperparams::from_log(&priors.mode_log(dim))));
    }
    let base = GpModel::new(x, y, KernelHyperparams::from_log(&priors.mode_log(dim)))?;
    let bounds = bounds(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut starts = Vec::with_capacity(options.restarts + 1);
    if let Some(w) = &options.warm_start {
        if w.dim() != dim {
            return Err(Error::InvalidArgument("warm start has the wrong dimension".into()));
        }
        starts.push(w.to_log());
    }
    for _ in 0..options.restarts {
        starts.push((0..dim + 2).map(|k| priors.component(k, dim).sample_log(&mut rng)).collect());
    }
    if starts.is_empty() {
        starts.push(priors.mode_log(dim));
    }

    let objective = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let model = base.with_hyperparams(KernelHyperparams::from_log(theta)).ok()?;
        let (ll, mut g) = model.log_marginal_likelihood();
        let mut value = ll;
        for (k, t) in theta.iter().enumerate() {
            let (lp, dlp) = priors.component(k, dim).log_density(*t);
            value += lp;
            g[k] += dlp;
        }
        if !value.is_finite() {
            return None;
        }
        g.iter_mut().for_each(|v| *v = -*v);
        Some((-value, g))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let start: Vec<f64> = start.iter().zip(&bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect();
        if let Some((theta, f)) = lbfgs(&objective, start, &bounds, options.max_iters, options.grad_tol) {
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, theta));
            }
        }
    }
    let (_, theta) = best.ok_or_else(|| Error::Fit("no start produced a finite objective".into()))?;
    base.with_hyperparams(KernelHyperparams::from_log(&theta))
}

const MEMORY: usize = 8;

/// Box-projected L-BFGS with Armijo backtracking. Returns the final point and
/// objective, or `None` when the start itself is not evaluable.
fn lbfgs<F>(f: &F, x0: Vec<f64>, bounds: &[(f64, f64)], max_iters: usize, grad_tol: f64) -> Option<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let project = |x: &mut [f64]| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);

    for _ in 0..max_iters {
        if g.iter().all(|v| v.abs() < grad_tol) {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = hist.last().map_or_else(
            || 1.0 / g.iter().fold(1.0f64, |m, v| m.max(v.abs())),
            |(s, y, _)| dot(s, y) / dot(y, y),
        );
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            hist.clear();
            let scale = 1.0 / g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            dir = g.iter().map(|v| -v * scale).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            project(&mut xn);
            let moved: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Some((fn_, gn)) = f(&xn) {
                if fn_ <= fx + 1e-4 * dot(&g, &moved) {
                    accepted = Some((xn, fn_, gn, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else { break };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        let converged = (fx - fn_).abs() <= 1e-10 * fx.abs().max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        if converged {
            break;
        }
    }
    Some((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Some((v, g))
        };
        let (x, fx) = lbfgs(&f, vec![-1.2, 1.0], &[(-5.0, 5.0), (-5.0, 5.0)], 500, 1e-10).unwrap();
        assert!(fx < 1e-10, "{fx} at {x:?}");
    }

    #[test]
    fn lbfgs_respects_bounds() {
        let f = |x: &[f64]| Some((x[0] * x[0], vec![2.0 * x[0]]));
        let (x, _) = lbfgs(&f, vec![3.0], &[(1.0, 4.0)], 100, 1e-12).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    fn sample_gp(n: usize, d: usize, l: f64, noise: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let k = DMatrix::from_fn(n, n, |i, j| {
            super::super::matern52(&x[i], &x[j], &vec![l; d], 1.0) + if i == j { noise } else { 0.0 }
        });
        let l_fac = k.cholesky().unwrap().unpack();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y = l_fac * z;
        (x, y.iter().copied().collect())
    }

    #[test]
    fn recovers_generating_lengthscale() {
        let (x, y) = sample_gp(100, 2, 0.2, 0.01, 4);
        let m = fit_map(&x, &y, 2, &Priors::default(), &FitOptions::default()).unwrap();
        for l in &m.hyperparams().lengthscales {
            assert!((l.ln() - 0.2f64.ln()).abs() < 0.5, "lengthscale {l}");
        }
    }

    #[test]
    fn output_scaling_scales_variance() {
        let (x, y) = sample_gp(30, 2, 0.3, 0.01, 9);
        let opts = FitOptions { restarts: 3, ..FitOptions::default() };
        let a = fit_map(&x, &y, 2, &Priors::default(), &opts).unwrap();
        let c = 7.5;
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let b = fit_map(&x, &yc, 2, &Priors::default(), &opts).unwrap();
        let ratio = b.output_signal_variance() / a.output_signal_variance();
        assert!((ratio / (c * c) - 1.0).abs() < 1e-6, "ratio {ratio}");
        let p = [0.4, 0.6];
        assert!((b.predict(&p).0 - c * a.predict(&p).0).abs() < 1e-6);
    }

    #[test]
    fn fitting_is_deterministic() {
        let (x, y) = sample_gp(25, 3, 0.4, 0.01, 2);
        let opts = FitOptions { restarts: 4, seed: 17, ..FitOptions::default() };
        let a = fit_map(&x, &y, 3, &Priors::default(), &opts).unwrap();
        let b = fit_map(&x, &y, 3, &Priors::default(), &opts).unwrap();
        assert_eq!(a.hyperparams(), b.hyperparams());
    }

    #[test]
    fn constant_outputs_give_constant_mean() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let y = vec![4.2; 10];
        let m = fit_map(&x, &y, 1, &Priors::default(), &FitOptions::default()).unwrap();
        for t in [0.05, 0.33, 0.9] {
            assert!((m.predict(&[t]).0 - 4.2).abs() < 1e-9);
        }
        let h = m.hyperparams();
        assert!(h.signal_variance <= 1.0 && h.noise_variance <= 1e-3 * 1.0001);
    }

    #[test]
    fn empty_data_gives_prior_mode() {
        let m = fit_map(&[], &[], 4, &Priors::default(), &FitOptions::default()).unwrap();
        assert!(m.is_empty());
        assert!((m.hyperparams().lengthscales[0] - 0.3).abs() < 1e-12);
        assert!((m.predict(&[0.5; 4]).1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_improves_on_prior_mode() {
        let (x, y) = sample_gp(40, 2, 0.15, 0.01, 12);
        let priors = Priors::default();
        let score = |m: &GpModel| {
            let (ll, _) = m.log_marginal_likelihood();
            ll + m.hyperparams().to_log().iter().enumerate().map(|(k, t)| priors.component(k, 2).log_density(*t).0).sum::<f64>()
        };
        let mode = GpModel::new(&x, &y, KernelHyperparams::from_log(&priors.mode_log(2))).unwrap();
        let fit = fit_map(&x, &y, 2, &priors, &FitOptions::default()).unwrap();
        assert!(score(&fit) >= score(&mode));
    }
}
