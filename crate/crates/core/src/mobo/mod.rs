//! Multi-objective Bayesian optimization with expected hypervolume
//! improvement.
//!
//! Each objective, normalized by the cell count, gets its own GP over the
//! unit-cube encoding of a configuration. The loop starts from a scrambled
//! Sobol design, then repeatedly refits both GPs, maximizes closed-form EHVI
//! against the observed front and evaluates the winner.

mod acquisition;
mod ehvi;
mod sobol;

pub use acquisition::{maximize, optimize_acquisition, AcquisitionOptions, AcquisitionResult};
pub use ehvi::{
    ehvi, ehvi_gaussian, hypervolume_improvement, improvement_strips, mc_qehvi, mc_qehvi_gaussian, McEstimate, Strip,
};
pub use sobol::{max_projection_gap, sobol_init};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::gp::{fit_map, FitOptions, GpModel, KernelHyperparams, Priors};
use crate::objectives::{evaluate, Configuration, Evaluation, Thresholds};
use crate::pareto::{ParetoFront, Point2, REFERENCE_POINT};
use crate::rfmap::CoverageTensor;

#[derive(Clone, Debug)]
pub struct BoOptions {
    pub n_init: usize,
    pub n_iter: usize,
    pub seed: u64,
    pub reference: Point2,
    pub priors: Priors,
    /// Prior-sampled starts for the first fit of each model.
    pub initial_restarts: usize,
    /// Prior-sampled starts per refit, on top of the warm start.
    pub refit_restarts: usize,
    pub acquisition: AcquisitionOptions,
}

impl Default for BoOptions {
    fn default() -> Self {
        Self {
            n_init: 512,
            n_iter: 500,
            seed: 0,
            reference: REFERENCE_POINT,
            priors: Priors::default(),
            initial_restarts: 8,
            refit_restarts: 2,
            acquisition: AcquisitionOptions::default(),
        }
    }
}

impl BoOptions {
    pub fn total_evaluations(&self) -> usize {
        self.n_init + self.n_iter
    }
}

/// Everything observed so far.
#[derive(Clone, Debug)]
pub struct BoState {
    pub history: Vec<Evaluation>,
    /// Non-dominated normalized objectives, each tagged with its history index.
    pub front: ParetoFront<usize>,
    pub reference: Point2,
    /// Front hypervolume after each evaluation.
    pub hypervolume: Vec<f64>,
    /// Hyperparameters of the most recent fit, one set per objective.
    pub hyperparams: Option<[KernelHyperparams; 2]>,
}

impl BoState {
    fn new(reference: Point2) -> Self {
        Self { history: Vec::new(), front: ParetoFront::default(), reference, hypervolume: Vec::new(), hyperparams: None }
    }

    fn record(&mut self, evaluation: Evaluation) {
        let idx = self.history.len();
        self.front.insert(evaluation.objectives.normalized(), idx);
        self.history.push(evaluation);
        self.hypervolume.push(self.front.hypervolume(&self.reference));
    }

    fn training_data(&self) -> (Vec<Vec<f64>>, [Vec<f64>; 2]) {
        let x = self.history.iter().map(|e| e.config.to_unit()).collect();
        let y0 = self.history.iter().map(|e| e.objectives.normalized()[0]).collect();
        let y1 = self.history.iter().map(|e| e.objectives.normalized()[1]).collect();
        (x, [y0, y1])
    }
}

/// Runs `n_init` Sobol evaluations followed by `n_iter` EHVI-guided ones.
pub fn bo_loop(tensor: &CoverageTensor, thresholds: &Thresholds, options: &BoOptions) -> Result<BoState> {
    bo_loop_with(tensor, thresholds, options, |_| {})
}

/// [`bo_loop`] that reports every evaluation as it happens.
pub fn bo_loop_with<F>(
    tensor: &CoverageTensor,
    thresholds: &Thresholds,
    options: &BoOptions,
    mut observe: F,
) -> Result<BoState>
where
    F: FnMut(&Evaluation),
{
    if options.n_init == 0 {
        return Err(Error::InvalidArgument("BO needs at least one initial point".into()));
    }
    let dim = 2 * tensor.sectors();
    let mut state = BoState::new(options.reference);
    let mut push = |state: &mut BoState, x: &[f64]| -> Result<()> {
        let config = Configuration::from_unit(x)?;
        let objectives = evaluate(&config, tensor, thresholds)?;
        let evaluation = Evaluation { config, objectives, lambda: None };
        observe(&evaluation);
        state.record(evaluation);
        Ok(())
    };

    for x in sobol_init(options.n_init, dim, derive_seed(options.seed, 0))? {
        push(&mut state, &x)?;
    }

    for iter in 0..options.n_iter {
        let (x, ys) = state.training_data();
        let mut fitted = Vec::with_capacity(2);
        for (k, y) in ys.iter().enumerate() {
            let fit = FitOptions {
                restarts: if state.hyperparams.is_some() { options.refit_restarts } else { options.initial_restarts },
                warm_start: state.hyperparams.as_ref().map(|h| h[k].clone()),
                seed: derive_seed(options.seed, 1 + 2 * iter as u64 + k as u64),
                ..FitOptions::default()
            };
            fitted.push(fit_map(&x, y, dim, &options.priors, &fit)?);
        }
        let models: [GpModel; 2] = fitted.try_into().expect("two models");
        state.hyperparams = Some([models[0].hyperparams().clone(), models[1].hyperparams().clone()]);

        let acq_seed = derive_seed(options.seed, (1 << 32) + iter as u64);
        let best = optimize_acquisition(&models, state.front.points(), &state.reference, acq_seed, &options.acquisition)?;
        push(&mut state, &best.x)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfmap::{generate_environment, precompute_coverage, GridSpec, LayoutConfig};

    fn small_tensor() -> CoverageTensor {
        let layout = LayoutConfig { grid: GridSpec::new(1200.0, 1200.0, 40.0).unwrap(), ..LayoutConfig::default() };
        precompute_coverage(&generate_environment(&layout, 1).unwrap())
    }

    fn quick(seed: u64) -> BoOptions {
        BoOptions {
            n_init: 16,
            n_iter: 4,
            seed,
            acquisition: AcquisitionOptions { raw_samples: 128, starts: 2, iterations: 5, ..AcquisitionOptions::default() },
            ..BoOptions::default()
        }
    }

    #[test]
    fn loop_accounts_every_evaluation() {
        let t = small_tensor();
        let opts = quick(3);
        let mut seen = 0;
        let s = bo_loop_with(&t, &Thresholds::default(), &opts, |_| seen += 1).unwrap();
        assert_eq!(s.history.len(), 20);
        assert_eq!(seen, 20);
        assert!(s.hypervolume.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn front_is_non_dominated_subset_of_history() {
        let t = small_tensor();
        let s = bo_loop(&t, &Thresholds::default(), &quick(4)).unwrap();
        let all: Vec<Point2> = s.history.iter().map(|e| e.objectives.normalized()).collect();
        let expected = crate::pareto::non_dominated(&all);
        assert_eq!(s.front.points(), expected.points());
        for (p, &i) in s.front.iter() {
            assert_eq!(*p, all[i]);
            assert!(p[0] < s.reference[0] && p[1] < s.reference[1]);
        }
    }

    #[test]
    fn loop_is_deterministic() {
        let t = small_tensor();
        let a = bo_loop(&t, &Thresholds::default(), &quick(5)).unwrap();
        let b = bo_loop(&t, &Thresholds::default(), &quick(5)).unwrap();
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn default_budget_is_one_thousand_twelve() {
        assert_eq!(BoOptions::default().total_evaluations(), 1012);
    }
}
