use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gp::GpModel;
use crate::pareto::{hypervolume_2d, non_dominated, Point2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// One vertical strip of the region not dominated by the front:
/// `a <= f1 < b`, `f2 < c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strip {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Decomposes the improvement region below `reference` into strips. Front
/// points outside the reference box are ignored.
pub fn improvement_strips(front: &[Point2], reference: &Point2) -> Vec<Strip> {
    let inside: Vec<Point2> = front
        .iter()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .copied()
        .collect();
    let sorted = non_dominated(&inside);
    let pts = sorted.points();
    let mut strips = Vec::with_capacity(pts.len() + 1);
    strips.push(Strip { a: f64::NEG_INFINITY, b: pts.first().map_or(reference[0], |p| p[0]), c: reference[1] });
    for (j, p) in pts.iter().enumerate() {
        let b = pts.get(j + 1).map_or(reference[0], |q| q[0]);
        strips.push(Strip { a: p[0], b, c: p[1] });
    }
    strips
}

/// Hypervolume gained by adding the single point `y`.
pub fn hypervolume_improvement(y: &Point2, strips: &[Strip]) -> f64 {
    strips
        .iter()
        .map(|s| (s.b - s.a.max(y[0])).max(0.0) * (s.c - y[1]).max(0.0))
        .sum()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// `E[(c - Y)^+]` for `Y ~ N(mu, sigma^2)`.
fn partial_expectation(c: f64, mu: f64, sigma: f64) -> f64 {
    if c == f64::NEG_INFINITY {
        return 0.0;
    }
    if sigma <= 0.0 {
        return (c - mu).max(0.0);
    }
    let z = (c - mu) / sigma;
    ((c - mu) * normal_cdf(z) + sigma * FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()).max(0.0)
}

/// Closed-form expected hypervolume improvement of one point whose two
/// objectives are independent Gaussians.
pub fn ehvi_gaussian(mean: &Point2, std: &Point2, strips: &[Strip]) -> f64 {
    strips
        .iter()
        .map(|s| {
            let first = (partial_expectation(s.b, mean[0], std[0]) - partial_expectation(s.a, mean[0], std[0])).max(0.0);
            first * partial_expectation(s.c, mean[1], std[1])
        })
        .sum::<f64>()
        .max(0.0)
}

/// Closed-form EHVI of candidate `x` under the latent posteriors of two
/// independent models.
pub fn ehvi(models: &[GpModel; 2], x: &[f64], front: &[Point2], reference: &Point2) -> f64 {
    ehvi_with_strips(models, x, &improvement_strips(front, reference))
}

pub(crate) fn ehvi_with_strips(models: &[GpModel; 2], x: &[f64], strips: &[Strip]) -> f64 {
    let (m0, v0) = models[0].predict(x);
    let (m1, v1) = models[1].predict(x);
    ehvi_gaussian(&[m0, m1], &[v0.sqrt(), v1.sqrt()], strips)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo q-EHVI for a batch whose objectives have joint Gaussian
/// marginals `(means[k], covs[k])`, independent across objectives.
///
/// Each sample adds the whole batch to the front and measures the exact
/// hypervolume gain.
pub fn mc_qehvi_gaussian(
    means: [&[f64]; 2],
    covs: [&DMatrix<f64>; 2],
    front: &[Point2],
    reference: &Point2,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let q = means[0].len();
    let factors = [sqrt_psd(covs[0]), sqrt_psd(covs[1])];
    let base = hypervolume_2d(front, reference);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Point2> = Vec::with_capacity(front.len() + q);
    let mut z = vec![0.0; q];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        pts.clear();
        pts.extend_from_slice(front);
        let mut ys = vec![[0.0; 2]; q];
        for k in 0..2 {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            for (a, y) in ys.iter_mut().enumerate() {
                y[k] = means[k][a] + (0..=a).map(|b| factors[k][(a, b)] * z[b]).sum::<f64>();
            }
        }
        pts.extend(ys);
        let gain = (hypervolume_2d(&pts, reference) - base).max(0.0);
        sum += gain;
        sum_sq += gain * gain;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 { (sum_sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    McEstimate { mean, std_error: (var / n).sqrt() }
}

/// Monte-Carlo q-EHVI of a batch under the joint latent posteriors of two
/// models.
pub fn mc_qehvi(
    models: &[GpModel; 2],
    batch: &[Vec<f64>],
    front: &[Point2],
    reference: &Point2,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let (m0, c0) = models[0].joint_posterior(batch);
    let (m1, c1) = models[1].joint_posterior(batch);
    mc_qehvi_gaussian([&m0, &m1], [&c0, &c1], front, reference, n_samples, seed)
}

/// Lower-triangular square root of a covariance that may be singular, for
/// instance when a batch repeats a point.
fn sqrt_psd(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let q = cov.nrows();
    let scale = (0..q).map(|i| cov[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    for rel in [0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
        let mut m = cov.clone();
        for i in 0..q {
            m[(i, i)] += rel * scale;
        }
        if let Some(c) = m.cholesky() {
            return c.unpack();
        }
    }
    // rank-deficient beyond the ladder: fall back to marginal std devs
    DMatrix::from_fn(q, q, |i, j| if i == j { cov[(i, i)].max(0.0).sqrt() } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelHyperparams;
    use crate::pareto::non_dominated;
    use rand::Rng;

    const REF: Point2 = [1.05, 1.05];

    fn random_front(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
        let pts: Vec<Point2> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        non_dominated(&pts).points().to_vec()
    }

    #[test]
    fn strips_reproduce_point_hypervolume_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let front = random_front(&mut rng, 8);
            let strips = improvement_strips(&front, &REF);
            let y = [rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2)];
            let mut with = front.clone();
            with.push(y);
            let direct = hypervolume_2d(&with, &REF) - hypervolume_2d(&front, &REF);
            assert!((hypervolume_improvement(&y, &strips) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_front_with_tiny_sigma_is_rectangle() {
        let strips = improvement_strips(&[], &REF);
        let v = ehvi_gaussian(&[0.3, 0.6], &[1e-9, 1e-9], &strips);
        assert!((v - 0.75 * 0.45).abs() < 1e-8);
    }

    #[test]
    fn deeply_dominated_candidate_has_no_value() {
        let front = vec![[0.2, 0.5], [0.4, 0.3], [0.6, 0.1]];
        let strips = improvement_strips(&front, &REF);
        let sigma = 1e-3;
        let mean = [0.6 + 10.0 * sigma, 0.5 + 10.0 * sigma];
        assert!(ehvi_gaussian(&mean, &[sigma, sigma], &strips) < 1e-12);
    }

    #[test]
    fn closed_form_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for inst in 0..20 {
            let front = random_front(&mut rng, 10);
            // posterior centred near the front so improvement mass is resolvable by sampling
            let anchor = front[rng.random_range(0..front.len())];
            let mean = [anchor[0] + rng.random_range(-0.2..0.1), anchor[1] + rng.random_range(-0.2..0.1)];
            let std = [rng.random_range(0.05..0.3), rng.random_range(0.05..0.3)];
            let exact = ehvi_gaussian(&mean, &std, &improvement_strips(&front, &REF));
            let c0 = DMatrix::from_element(1, 1, std[0] * std[0]);
            let c1 = DMatrix::from_element(1, 1, std[1] * std[1]);
            let mc = mc_qehvi_gaussian([&[mean[0]], &[mean[1]]], [&c0, &c1], &front, &REF, 100_000, inst);
            assert!(
                (exact - mc.mean).abs() <= 3.0 * mc.std_error + 1e-12,
                "instance {inst}: {exact} vs {} +- {}",
                mc.mean,
                mc.std_error
            );
        }
    }

    #[test]
    fn ehvi_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let front = random_front(&mut rng, 6);
            let mean = [rng.random_range(-1.0..3.0), rng.random_range(-1.0..3.0)];
            let std = [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)];
            assert!(ehvi_gaussian(&mean, &std, &improvement_strips(&front, &REF)) >= 0.0);
        }
    }

    fn toy_models() -> [GpModel; 2] {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i * 3 % 5) as f64 / 5.0]).collect();
        let y0: Vec<f64> = x.iter().map(|p| 0.2 + 0.6 * p[0]).collect();
        let y1: Vec<f64> = x.iter().map(|p| 0.8 - 0.5 * p[0] + 0.1 * p[1]).collect();
        let h = KernelHyperparams::new(vec![0.4, 0.4], 1.0, 1e-4).unwrap();
        [GpModel::new(&x, &y0, h.clone()).unwrap(), GpModel::new(&x, &y1, h).unwrap()]
    }

    #[test]
    fn model_level_closed_form_matches_monte_carlo() {
        let models = toy_models();
        let front = vec![[0.3, 0.6], [0.5, 0.45]];
        for x in [vec![0.15, 0.9], vec![0.55, 0.35]] {
            let exact = ehvi(&models, &x, &front, &REF);
            let mc = mc_qehvi(&models, std::slice::from_ref(&x), &front, &REF, 100_000, 3);
            assert!((exact - mc.mean).abs() <= 3.0 * mc.std_error + 1e-12, "{exact} vs {mc:?}");
        }
    }

    #[test]
    fn duplicate_batch_matches_single_point() {
        let models = toy_models();
        let front = vec![[0.3, 0.6], [0.5, 0.45]];
        let x = vec![0.35, 0.6];
        let one = mc_qehvi(&models, std::slice::from_ref(&x), &front, &REF, 100_000, 11);
        let two = mc_qehvi(&models, &[x.clone(), x], &front, &REF, 100_000, 12);
        let se = (one.std_error.powi(2) + two.std_error.powi(2)).sqrt();
        assert!((one.mean - two.mean).abs() < 3.0 * se, "{one:?} vs {two:?}");
    }

    #[test]
    fn standard_error_shrinks_with_samples() {
        let front = vec![[0.3, 0.6], [0.5, 0.45]];
        let c = DMatrix::from_element(1, 1, 0.04);
        let mean_se = |n: usize| {
            (0..10)
                .map(|s| mc_qehvi_gaussian([&[0.4], &[0.5]], [&c, &c], &front, &REF, n, 100 + s).std_error)
                .sum::<f64>()
                / 10.0
        };
        let ratio = mean_se(20_000) / mean_se(10_000);
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn mc_is_deterministic_given_seed() {
        let front = vec![[0.3, 0.6]];
        let c = DMatrix::from_element(1, 1, 0.01);
        let a = mc_qehvi_gaussian([&[0.4], &[0.5]], [&c, &c], &front, &REF, 1000, 5);
        let b = mc_qehvi_gaussian([&[0.4], &[0.5]], [&c, &c], &front, &REF, 1000, 5);
        assert_eq!(a, b);
    }
}
