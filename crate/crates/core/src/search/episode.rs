use crate::agent::{DdpgAgent, Transition};
use crate::error::{Error, Result};
use crate::evaluator::AccuracyOracle;
use crate::hw::HardwareSpec;
use crate::model::{build_observations, NetworkModel, Observation};
use crate::policy::{action_to_bits, clamped_minimum, enforce_budget, BitRange, Budget, QuantPolicy};

use super::config::SearchConfig;

/// `lambda * (acc_quant - acc_origin)`.
pub fn reward(lambda: f64, acc_quant: f64, acc_origin: f64) -> f64 {
    lambda * (acc_quant - acc_origin)
}

#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub episode: u64,
    pub sigma: f64,
    pub transitions: Vec<Transition>,
    pub raw_policy: QuantPolicy,
    pub enforced_policy: QuantPolicy,
    pub acc_quant: f64,
    pub reward: f64,
    /// Budget resource of the enforced policy.
    pub cost: f64,
    /// The budget could not be met even at the minimum bitwidth.
    pub infeasible: bool,
    /// Baseline after folding in this episode's reward.
    pub baseline: f64,
    pub train_steps: usize,
}

/// Everything one search run mutates between episodes.
pub struct SearchState {
    pub model: NetworkModel,
    pub hw: HardwareSpec,
    pub budget: Budget,
    pub lambda: f64,
    pub range: BitRange,
    pub pinned: Vec<bool>,
    pub pinned_bits: u8,
    pub agent: DdpgAgent,
    pub oracle: Box<dyn AccuracyOracle + Send + Sync>,
    pub acc_origin: f64,
    templates: Vec<Observation>,
    baseline: Option<f64>,
}

impl SearchState {
    pub fn new(config: &SearchConfig) -> Result<Self> {
        config.validate()?;
        let model = config.resolve_model()?;
        let hw = config.resolve_hardware()?;
        let pinned = config.pins(model.len());
        let oracle = config.oracle.build(&model);
        Self::from_parts(
            model,
            hw,
            config.budget,
            config.lambda,
            config.bits,
            pinned,
            config.pinned_bits,
            DdpgAgent::new(config.agent.clone())?,
            oracle,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        model: NetworkModel,
        hw: HardwareSpec,
        budget: Budget,
        lambda: f64,
        range: BitRange,
        pinned: Vec<bool>,
        pinned_bits: u8,
        agent: DdpgAgent,
        oracle: Box<dyn AccuracyOracle + Send + Sync>,
    ) -> Result<Self> {
        if pinned.len() != model.len() {
            return Err(Error::Config(format!(
                "pin mask has {} entries, model has {} layers",
                pinned.len(),
                model.len()
            )));
        }
        let templates = build_observations(&model)?;
        let reference = QuantPolicy::uniform(model.len(), 8, 8);
        let acc_origin = oracle.evaluate(&model, &reference)?;
        Ok(SearchState {
            model,
            hw,
            budget,
            lambda,
            range,
            pinned,
            pinned_bits,
            agent,
            oracle,
            acc_origin,
            templates,
            baseline: None,
        })
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn num_steps(&self) -> usize {
        self.templates.len()
    }

    /// Applies the budget; an unreachable budget falls back to the
    /// clamped-minimum policy and reports `true`.
    pub fn enforce(&self, raw: &QuantPolicy) -> Result<(QuantPolicy, bool)> {
        match enforce_budget(&self.model, raw, &self.hw, &self.budget, &self.pinned, self.range.min) {
            Ok(p) => Ok((p, false)),
            Err(Error::Infeasible { best, limit, .. }) => {
                log::info!("budget infeasible: best {best} > limit {limit}");
                Ok((clamped_minimum(raw, &self.pinned, self.range.min), true))
            }
            Err(e) => Err(e),
        }
    }

    pub fn run_episode(&mut self) -> Result<EpisodeTrace> {
        let n_steps = self.templates.len();
        let sigma = self.agent.sigma();
        let mut prev = 0.0;
        let mut observations = Vec::with_capacity(n_steps);
        let mut actions = Vec::with_capacity(n_steps);
        let mut steps = Vec::with_capacity(n_steps);
        for k in 0..n_steps {
            let obs = self.templates[k].with_prev_action(prev);
            let a = self.agent.explore_act(&obs, prev, sigma);
            let bits = if self.pinned[k / 2] { self.pinned_bits } else { action_to_bits(a, self.range)? };
            observations.push(obs);
            actions.push(a);
            steps.push(bits);
            prev = a;
        }
        let raw_policy = QuantPolicy::from_steps(&steps)?;
        let (enforced_policy, infeasible) = self.enforce(&raw_policy)?;
        let acc_quant = self.oracle.evaluate(&self.model, &enforced_policy)?;
        let r = reward(self.lambda, acc_quant, self.acc_origin);
        let cost = self.budget.cost(&self.model, &enforced_policy, &self.hw)?;

        let transitions: Vec<Transition> = (0..n_steps)
            .map(|k| {
                let terminal = k + 1 == n_steps;
                let next_template = if terminal { self.templates[k] } else { self.templates[k + 1] };
                Transition {
                    obs: observations[k],
                    action: actions[k],
                    reward: r,
                    next_obs: next_template.with_prev_action(actions[k]),
                    terminal,
                }
            })
            .collect();

        let rho = self.agent.config().baseline_decay;
        let baseline = match self.baseline {
            None => r,
            Some(b) => rho * b + (1.0 - rho) * r,
        };
        self.baseline = Some(baseline);

        let mut train_steps = 0;
        for t in &transitions {
            self.agent.remember(*t);
        }
        // The reward only exists once the episode ends, so the per-step
        // updates are run here, one per transition.
        for _ in 0..n_steps {
            if self.agent.train(baseline)?.is_some() {
                train_steps += 1;
            }
        }
        let episode = self.agent.episode();
        self.agent.end_episode();
        Ok(EpisodeTrace {
            episode,
            sigma,
            transitions,
            raw_policy,
            enforced_policy,
            acc_quant,
            reward: r,
            cost,
            infeasible,
            baseline,
            train_steps,
        })
    }
}
