use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nn::{Adam, MlpNet};
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};
use crate::model::{Observation, OBS_DIM, PREV_ACTION_SLOT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub sigma_init: f64,
    pub sigma_decay: f64,
    /// Decay of the reward moving average used as the baseline.
    pub baseline_decay: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub warmup: usize,
    pub tau: f64,
    pub hidden1: usize,
    pub hidden2: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            gamma: 1.0,
            sigma_init: 0.5,
            sigma_decay: 0.99,
            baseline_decay: 0.95,
            replay_capacity: 20_000,
            batch_size: 64,
            warmup: 100,
            tau: 0.01,
            hidden1: 400,
            hidden2: 300,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("sigma_init", self.sigma_init),
            ("sigma_decay", self.sigma_decay),
            ("baseline_decay", self.baseline_decay),
            ("tau", self.tau),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("agent.{name} must be in (0, 1], got {v}")));
            }
        }
        if self.gamma != 1.0 {
            return Err(Error::Config(format!("agent.gamma is fixed at 1, got {}", self.gamma)));
        }
        for (name, v, max) in [
            ("replay_capacity", self.replay_capacity, 1usize << 24),
            ("batch_size", self.batch_size, 1 << 16),
            ("hidden1", self.hidden1, 1 << 14),
            ("hidden2", self.hidden2, 1 << 14),
        ] {
            if v == 0 || v > max {
                return Err(Error::Config(format!("agent.{name} must be in 1..={max}, got {v}")));
            }
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::Config("agent.batch_size exceeds agent.replay_capacity".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: f64,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLosses {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Largest |target| seen in the batch.
    pub max_abs_target: f64,
}

/// Samples `N(mu, sigma^2)` restricted to `[0, 1]` by rejection.
pub fn sample_truncated_normal<R: Rng>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    let mu = mu.clamp(0.0, 1.0);
    if sigma.is_nan() || sigma <= 0.0 || sigma.is_infinite() {
        return mu;
    }
    let normal = Normal::new(mu, sigma).expect("finite positive sigma");
    for _ in 0..10_000 {
        let x = normal.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
    mu
}

fn state_matrix<'a>(rows: impl ExactSizeIterator<Item = &'a [f64; OBS_DIM]>) -> Array2<f64> {
    let n = rows.len();
    let mut m = Array2::zeros((n, OBS_DIM));
    for (i, r) in rows.enumerate() {
        m.row_mut(i).assign(&ndarray::ArrayView1::from(&r[..]));
    }
    m
}

fn column(values: impl Iterator<Item = f64>) -> Array2<f64> {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    Array2::from_shape_vec((n, 1), v).expect("column shape")
}

pub struct DdpgAgent {
    config: AgentConfig,
    actor: MlpNet,
    critic: MlpNet,
    actor_target: MlpNet,
    critic_target: MlpNet,
    actor_opt: Adam,
    critic_opt: Adam,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    episode: u64,
}

impl DdpgAgent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let actor = MlpNet::new(OBS_DIM, config.hidden1, config.hidden2, true, &mut rng);
        let critic = MlpNet::new(OBS_DIM, config.hidden1, config.hidden2, false, &mut rng);
        Ok(DdpgAgent {
            actor_opt: Adam::new(&actor, config.lr_actor, config.beta1, config.beta2),
            critic_opt: Adam::new(&critic, config.lr_critic, config.beta1, config.beta2),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            replay: ReplayBuffer::new(config.replay_capacity),
            rng,
            episode: 0,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn actor(&self) -> &MlpNet {
        &self.actor
    }

    pub fn critic(&self) -> &MlpNet {
        &self.critic
    }

    pub fn actor_mut(&mut self) -> &mut MlpNet {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut MlpNet {
        &mut self.critic
    }

    pub fn targets(&self) -> (&MlpNet, &MlpNet) {
        (&self.actor_target, &self.critic_target)
    }

    pub fn optimizers(&self) -> (&Adam, &Adam) {
        (&self.actor_opt, &self.critic_opt)
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub(crate) fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Exploration noise for the current episode.
    pub fn sigma(&self) -> f64 {
        let e = i32::try_from(self.episode).unwrap_or(i32::MAX);
        self.config.sigma_init * self.config.sigma_decay.powi(e)
    }

    pub fn end_episode(&mut self) {
        self.episode += 1;
    }

    pub fn act(&self, obs: &Observation, prev_action: f64) -> f64 {
        let state = obs.with_prev_action(prev_action).values;
        self.actor.predict(&state, prev_action)
    }

    pub fn explore_act(&mut self, obs: &Observation, prev_action: f64, sigma: f64) -> f64 {
        let mu = self.act(obs, prev_action);
        sample_truncated_normal(mu, sigma, &mut self.rng)
    }

    pub fn remember(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// True once the replay holds enough transitions to train.
    pub fn warmed_up(&self) -> bool {
        self.replay.len() >= self.config.warmup.max(self.config.batch_size)
    }

    /// One update on a freshly sampled minibatch, if warmed up.
    pub fn train(&mut self, baseline: f64) -> Result<Option<TrainLosses>> {
        if !self.warmed_up() {
            return Ok(None);
        }
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng).expect("warmed up replay");
        self.train_step(&batch, baseline).map(Some)
    }

    /// Regression targets `R - B + gamma * (1 - terminal) * Q'(O', mu'(O'))`.
    pub fn targets_for(&self, batch: &[Transition], baseline: f64) -> Array1<f64> {
        let next_states = state_matrix(batch.iter().map(|t| &t.next_obs.values));
        let next_prev = column(batch.iter().map(|t| t.next_obs.values[PREV_ACTION_SLOT]));
        let next_actions = self.actor_target.forward(&next_states, &next_prev).output;
        let next_q = self.critic_target.forward(&next_states, &next_actions.insert_axis(ndarray::Axis(1))).output;
        Array1::from_iter(batch.iter().zip(next_q.iter()).map(|(t, q)| {
            let bootstrap = if t.terminal { 0.0 } else { self.config.gamma * q };
            t.reward - baseline + bootstrap
        }))
    }

    /// Mean squared critic error against fixed targets, and its gradients.
    pub fn critic_loss_and_grads(&self, batch: &[Transition], targets: &Array1<f64>) -> (f64, MlpNet) {
        let states = state_matrix(batch.iter().map(|t| &t.obs.values));
        let actions = column(batch.iter().map(|t| t.action));
        let fwd = self.critic.forward(&states, &actions);
        let n = batch.len() as f64;
        let diff = &fwd.output - targets;
        let loss = diff.mapv(|d| d * d).sum() / n;
        let d_out = diff.mapv(|d| 2.0 * d / n);
        (loss, self.critic.backward(&fwd, &d_out).0)
    }

    /// `-mean Q(O, mu(O))` and its gradients with respect to the actor.
    pub fn actor_loss_and_grads(&self, batch: &[Transition]) -> (f64, MlpNet) {
        let states = state_matrix(batch.iter().map(|t| &t.obs.values));
        let prev = column(batch.iter().map(|t| t.obs.values[PREV_ACTION_SLOT]));
        let actor_fwd = self.actor.forward(&states, &prev);
        let actions = actor_fwd.output.clone().insert_axis(ndarray::Axis(1));
        let critic_fwd = self.critic.forward(&states, &actions);
        let n = batch.len() as f64;
        let loss = -critic_fwd.output.sum() / n;
        let d_q = Array1::from_elem(batch.len(), -1.0 / n);
        let d_action = self.critic.action_gradient(&critic_fwd, &d_q);
        (loss, self.actor.backward(&actor_fwd, &d_action).0)
    }

    pub fn train_step(&mut self, batch: &[Transition], baseline: f64) -> Result<TrainLosses> {
        if batch.is_empty() {
            return Err(Error::Agent("train_step called with an empty batch".into()));
        }
        if !baseline.is_finite() || batch.iter().any(|t| !t.reward.is_finite() || !t.action.is_finite()) {
            return Err(Error::Agent("non-finite reward, action or baseline in batch".into()));
        }
        let targets = self.targets_for(batch, baseline);
        let (critic_loss, critic_grads) = self.critic_loss_and_grads(batch, &targets);
        self.critic_opt.step(&mut self.critic, &critic_grads);
        let (actor_loss, actor_grads) = self.actor_loss_and_grads(batch);
        self.actor_opt.step(&mut self.actor, &actor_grads);
        let tau = self.config.tau;
        self.actor_target.soft_update(&self.actor, tau);
        self.critic_target.soft_update(&self.critic, tau);
        if !(self.actor.all_finite()
            && self.critic.all_finite()
            && self.actor_target.all_finite()
            && self.critic_target.all_finite())
        {
            return Err(Error::Agent("network parameters became non-finite".into()));
        }
        Ok(TrainLosses { critic_loss, actor_loss, max_abs_target: targets.iter().fold(0.0, |m, t| m.max(t.abs())) })
    }

    pub(crate) fn restore(
        config: AgentConfig,
        nets: [MlpNet; 4],
        opts: [Adam; 2],
        episode: u64,
        rng_word_pos: u128,
    ) -> Result<Self> {
        let mut agent = DdpgAgent::new(config)?;
        let [actor, critic, actor_target, critic_target] = nets;
        let [actor_opt, critic_opt] = opts;
        agent.actor = actor;
        agent.critic = critic;
        agent.actor_target = actor_target;
        agent.critic_target = critic_target;
        agent.actor_opt = actor_opt;
        agent.critic_opt = critic_opt;
        agent.episode = episode;
        agent.rng.set_word_pos(rng_word_pos);
        Ok(agent)
    }
}
