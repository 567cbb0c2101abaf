//! Deep deterministic policy gradient over scalarized coverage rewards.
//!
//! Every sector is always operational, so the state never changes and each
//! episode is a single step. The critic therefore regresses the immediate
//! reward and the actor climbs it. A sweep over the scalarization weight
//! traces out a front.

mod mlp;
mod replay;

pub use mlp::{Adam, Mlp, OutputActivation, Tape};
pub use replay::{ExplorationSchedule, ReplayBuffer, Transition};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::objectives::{check_lambda, evaluate, scalarize, Configuration, Evaluation, ObjectivePair, Thresholds};
use crate::rfmap::CoverageTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub tau: f64,
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub exploration: ExplorationSchedule,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            state_dim: 15,
            action_dim: 30,
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            batch_size: 64,
            tau: 0.005,
            gamma: 0.0,
            buffer_capacity: 5000,
            exploration: ExplorationSchedule::default(),
        }
    }
}

impl DdpgConfig {
    /// Default hyperparameters sized for `sectors` sectors.
    pub fn for_sectors(sectors: usize) -> Self {
        Self { state_dim: sectors, action_dim: 2 * sectors, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    /// Mean critic value of the actor's action, before the actor update.
    pub actor_objective: f64,
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
}

const FINAL_LAYER_SCALE: f64 = 3e-3;

impl DdpgAgent {
    pub fn new(config: DdpgConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&config.hidden);
            s.push(output);
            s
        };
        let actor = Mlp::new(&layers(config.state_dim, config.action_dim), OutputActivation::Tanh, FINAL_LAYER_SCALE, &mut rng);
        let critic = Mlp::new(
            &layers(config.state_dim + config.action_dim, 1),
            OutputActivation::Linear,
            FINAL_LAYER_SCALE,
            &mut rng,
        );
        Self {
            actor_opt: Adam::new(config.actor_lr, actor.params().len()),
            critic_opt: Adam::new(config.critic_lr, critic.params().len()),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            config,
            rng,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn policy(&self, state: &[f64]) -> Vec<f64> {
        self.actor.forward(state, 1).output().to_vec()
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> f64 {
        let input: Vec<f64> = state.iter().chain(action).copied().collect();
        self.critic.forward(&input, 1).output()[0]
    }

    /// Gaussian noise with the scheduled variance at step `t`.
    pub fn exploration_noise(&mut self, t: u64) -> Vec<f64> {
        let std = self.config.exploration.variance(t).sqrt();
        (0..self.config.action_dim)
            .map(|_| std * gaussian(&mut self.rng))
            .collect()
    }

    /// Policy output plus exploration noise, clamped to `[-1, 1]`.
    pub fn act(&mut self, state: &[f64], t: u64) -> Vec<f64> {
        let noise = self.exploration_noise(t);
        self.policy(state).iter().zip(noise).map(|(a, n)| (a + n).clamp(-1.0, 1.0)).collect()
    }

    /// Like [`act`](Self::act) with an explicit variance.
    pub fn act_with_variance(&mut self, state: &[f64], variance: f64) -> Vec<f64> {
        let std = variance.max(0.0).sqrt();
        let policy = self.policy(state);
        policy
            .iter()
            .map(|a| {
                let n = if std > 0.0 { std * gaussian(&mut self.rng) } else { 0.0 };
                (a + n).clamp(-1.0, 1.0)
            })
            .collect()
    }

    pub fn remember(&mut self, transition: Transition) {
        self.buffer.push(transition);
    }

    /// One critic, actor and target update from a replayed batch. `None` until
    /// the buffer holds a full batch.
    pub fn train_step(&mut self) -> Option<TrainStats> {
        let batch: Vec<Transition> =
            self.buffer.sample(self.config.batch_size, &mut self.rng)?.into_iter().cloned().collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let critic_loss = self.critic_step(&refs);
        let states: Vec<f64> = batch.iter().flat_map(|t| t.state.iter().copied()).collect();
        let critic = self.critic.clone();
        let state_dim = self.config.state_dim;
        let actor_objective = self.actor_step(&states, batch.len(), |s, a| critic_action_gradient(&critic, s, a, state_dim));
        self.soft_update_targets();
        Some(TrainStats { critic_loss, actor_objective })
    }

    /// One Adam step on the mean squared error to `r + gamma Q'(s, mu'(s))`.
    /// Returns the loss before the step.
    pub fn critic_step(&mut self, batch: &[&Transition]) -> f64 {
        let n = batch.len();
        let (sd, ad) = (self.config.state_dim, self.config.action_dim);
        let mut input = Vec::with_capacity(n * (sd + ad));
        for t in batch {
            input.extend(&t.state);
            input.extend(&t.action);
        }
        let mut targets: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        if self.config.gamma != 0.0 {
            let states: Vec<f64> = batch.iter().flat_map(|t| t.state.iter().copied()).collect();
            let next_actions = self.target_actor.forward(&states, n);
            let mut next_input = Vec::with_capacity(n * (sd + ad));
            for b in 0..n {
                next_input.extend(&states[b * sd..(b + 1) * sd]);
                next_input.extend(&next_actions.output()[b * ad..(b + 1) * ad]);
            }
            let q_next = self.target_critic.forward(&next_input, n);
            targets.iter_mut().zip(q_next.output()).for_each(|(y, q)| *y += self.config.gamma * q);
        }
        let tape = self.critic.forward(&input, n);
        let residual: Vec<f64> = tape.output().iter().zip(&targets).map(|(q, y)| q - y).collect();
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / n as f64;
        let grad_out: Vec<f64> = residual.iter().map(|r| 2.0 * r / n as f64).collect();
        let (grad, _) = self.critic.backward(&tape, &grad_out);
        self.critic_opt.step(self.critic.params_mut(), &grad);
        loss
    }

    /// One Adam step of the actor along `dq_da`, which maps
    /// `(states, actions)` to d objective / d action per sample. Returns the
    /// live critic's mean value of the pre-update actions.
    pub fn actor_step<G>(&mut self, states: &[f64], batch: usize, dq_da: G) -> f64
    where
        G: Fn(&[f64], &[f64]) -> Vec<f64>,
    {
        let tape = self.actor.forward(states, batch);
        let actions = tape.output();
        let sd = self.config.state_dim;
        let ad = self.config.action_dim;
        let mut input = Vec::with_capacity(batch * (sd + ad));
        for b in 0..batch {
            input.extend(&states[b * sd..(b + 1) * sd]);
            input.extend(&actions[b * ad..(b + 1) * ad]);
        }
        let objective = self.critic.forward(&input, batch).output().iter().sum::<f64>() / batch as f64;
        let grad_out: Vec<f64> = dq_da(states, actions).iter().map(|g| -g / batch as f64).collect();
        let (grad, _) = self.actor.backward(&tape, &grad_out);
        self.actor_opt.step(self.actor.params_mut(), &grad);
        objective
    }

    pub fn soft_update_targets(&mut self) {
        self.target_actor.soft_update(&self.actor, self.config.tau);
        self.target_critic.soft_update(&self.critic, self.config.tau);
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// d Q(s, a) / d a for each sample of a batch.
fn critic_action_gradient(critic: &Mlp, states: &[f64], actions: &[f64], state_dim: usize) -> Vec<f64> {
    let action_dim = critic.input_dim() - state_dim;
    let batch = actions.len() / action_dim;
    let mut input = Vec::with_capacity(batch * critic.input_dim());
    for b in 0..batch {
        input.extend(&states[b * state_dim..(b + 1) * state_dim]);
        input.extend(&actions[b * action_dim..(b + 1) * action_dim]);
    }
    let tape = critic.forward(&input, batch);
    let (_, grad_in) = critic.backward(&tape, &vec![1.0; batch]);
    grad_in
        .chunks_exact(critic.input_dim())
        .flat_map(|row| row[state_dim..].iter().copied())
        .collect()
}

/// Every sector operational.
pub fn encode_state(sectors: usize) -> Vec<f64> {
    vec![1.0; sectors]
}

/// Maps an action in `[-1, 1]^(2 sectors)` to a configuration: the first
/// half sets downtilts (rounded half-up), the second half powers.
pub fn decode_action(action: &[f64]) -> Result<Configuration> {
    let unit: Vec<f64> = action.iter().map(|a| (a.clamp(-1.0, 1.0) + 1.0) / 2.0).collect();
    Configuration::from_unit(&unit)
}

/// Negated scalarization per cell, so larger is better and 0 is perfect.
pub fn reward(objectives: &ObjectivePair, lambda: f64) -> Result<f64> {
    Ok(-scalarize(objectives, lambda)? / objectives.cells as f64)
}

/// Runs one fresh agent for `iterations` steps at weight `lambda`. Every
/// evaluation is returned, tagged with `lambda`.
pub fn ddpg_run(
    tensor: &CoverageTensor,
    thresholds: &Thresholds,
    lambda: f64,
    iterations: usize,
    seed: u64,
    config: &DdpgConfig,
) -> Result<Vec<Evaluation>> {
    check_lambda(lambda)?;
    if config.state_dim != tensor.sectors() || config.action_dim != 2 * tensor.sectors() {
        return Err(Error::InvalidArgument(format!(
            "agent dimensions {}/{} do not match {} sectors",
            config.state_dim,
            config.action_dim,
            tensor.sectors()
        )));
    }
    let state = encode_state(tensor.sectors());
    let mut agent = DdpgAgent::new(config.clone(), seed);
    let mut history = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let action = agent.act(&state, t as u64);
        let config = decode_action(&action)?;
        let objectives = evaluate(&config, tensor, thresholds)?;
        let r = reward(&objectives, lambda)?;
        agent.remember(Transition { state: state.clone(), action, reward: r });
        agent.train_step();
        history.push(Evaluation { config, objectives, lambda: Some(lambda) });
    }
    Ok(history)
}

/// `0, stride, 2 stride, ...` up to 1, rounded to nine decimals.
pub fn lambda_values(stride: f64) -> Result<Vec<f64>> {
    if !(stride > 0.0 && stride <= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda stride {stride} is outside (0, 1]")));
    }
    let steps = (1.0 / stride + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| (k as f64 * stride * 1e9).round() / 1e9).collect())
}

/// Independent [`ddpg_run`]s over the weight grid; run `k` uses a seed
/// derived from `(seed, k)`. Histories are concatenated in weight order.
pub fn lambda_sweep(
    tensor: &CoverageTensor,
    thresholds: &Thresholds,
    iterations_per_lambda: usize,
    stride: f64,
    seed: u64,
    config: &DdpgConfig,
) -> Result<Vec<Evaluation>> {
    let lambdas = lambda_values(stride)?;
    let runs: Vec<Result<Vec<Evaluation>>> = lambdas
        .par_iter()
        .enumerate()
        .map(|(k, &lambda)| ddpg_run(tensor, thresholds, lambda, iterations_per_lambda, derive_seed(seed, k as u64), config))
        .collect();
    let mut all = Vec::with_capacity(lambdas.len() * iterations_per_lambda);
    for run in runs {
        all.extend(run?);
    }
    Ok(all)
}
