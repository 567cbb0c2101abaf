use rayon::prelude::*;

use super::ehvi::{ehvi_with_strips, improvement_strips};
use super::sobol::sobol_init;
use crate::error::Result;
use crate::gp::GpModel;
use crate::pareto::Point2;

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionOptions {
    pub raw_samples: usize,
    /// Raw samples refined by pattern search.
    pub starts: usize,
    /// Coordinate sweeps per start.
    pub iterations: usize,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        Self { raw_samples: 1024, starts: 10, iterations: 50, initial_step: 0.25, min_step: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value among the raw samples, before refinement.
    pub best_raw_value: f64,
}

/// Maximizes closed-form EHVI over `[0, 1]^d`.
pub fn optimize_acquisition(
    models: &[GpModel; 2],
    front: &[Point2],
    reference: &Point2,
    seed: u64,
    options: &AcquisitionOptions,
) -> Result<AcquisitionResult> {
    let strips = improvement_strips(front, reference);
    maximize(|x| ehvi_with_strips(models, x, &strips), models[0].dim(), seed, options)
}

/// Multi-start maximization of `f`: score scrambled Sobol raw samples, then
/// refine the best few with a shrinking coordinate pattern search.
pub fn maximize<F>(f: F, dim: usize, seed: u64, options: &AcquisitionOptions) -> Result<AcquisitionResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let raw = sobol_init(options.raw_samples, dim, seed)?;
    let scores: Vec<f64> = raw.par_iter().map(|x| f(x)).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let best_raw_value = scores[order[0]];

    let refined: Vec<(Vec<f64>, f64)> = order
        .iter()
        .take(options.starts.max(1))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| pattern_search(&f, raw[i].clone(), scores[i], options))
        .collect();
    let (x, value) = refined
        .into_iter()
        .reduce(|best, cand| if cand.1 > best.1 { cand } else { best })
        .expect("at least one start");
    Ok(AcquisitionResult { x, value, best_raw_value })
}

fn pattern_search<F>(f: &F, mut x: Vec<f64>, mut fx: f64, options: &AcquisitionOptions) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut step = options.initial_step;
    for _ in 0..options.iterations {
        let mut improved = false;
        for k in 0..x.len() {
            let current = x[k];
            for sign in [1.0, -1.0] {
                let trial = (current + sign * step).clamp(0.0, 1.0);
                if trial == current {
                    continue;
                }
                x[k] = trial;
                let ft = f(&x);
                if ft > fx {
                    fx = ft;
                    improved = true;
                    break;
                }
                x[k] = current;
            }
        }
        if !improved {
            step *= 0.5;
            if step < options.min_step {
                break;
            }
        }
    }
    (x, fx)
}
