use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::QuantPolicy;

use super::config::SearchConfig;
use super::episode::SearchState;

pub const EPISODE_CSV_HEADER: &str = "episode,reward,acc,cost,sigma,baseline,best_reward,infeasible";

/// One line of the episode log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub reward: f64,
    pub acc: f64,
    pub cost: f64,
    pub sigma: f64,
    pub baseline: f64,
    pub best_reward: f64,
    pub infeasible: bool,
}

impl EpisodeRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.episode,
            self.reward,
            self.acc,
            self.cost,
            self.sigma,
            self.baseline,
            self.best_reward,
            self.infeasible
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub model: String,
    pub budget_kind: &'static str,
    pub budget_limit: f64,
    pub acc_origin: f64,
    pub best_episode: u64,
    pub best_reward: f64,
    pub best_acc: f64,
    pub best_cost: f64,
    /// No episode could meet the budget; the best policy is the clamped minimum.
    pub infeasible: bool,
    pub best_policy: QuantPolicy,
    #[serde(skip)]
    pub records: Vec<EpisodeRecord>,
}

impl SearchOutcome {
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from(EPISODE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn search_loop(config: &SearchConfig) -> Result<SearchOutcome> {
    search_loop_with(config, |_| Ok(()))
}

/// Runs the search, handing each episode's log line to `on_episode` as soon
/// as it exists so callers can stream it.
pub fn search_loop_with(
    config: &SearchConfig,
    mut on_episode: impl FnMut(&EpisodeRecord) -> Result<()>,
) -> Result<SearchOutcome> {
    let mut state = SearchState::new(config)?;
    let mut best: Option<(u64, f64, f64, f64, bool, QuantPolicy)> = None;
    let mut records = Vec::with_capacity(config.episodes.min(1 << 20) as usize);
    for _ in 0..config.episodes {
        let trace = state.run_episode()?;
        let improved = best.as_ref().is_none_or(|b| trace.reward > b.1);
        if improved {
            best = Some((
                trace.episode,
                trace.reward,
                trace.acc_quant,
                trace.cost,
                trace.infeasible,
                trace.enforced_policy.clone(),
            ));
        }
        let best_reward = best.as_ref().map_or(trace.reward, |b| b.1);
        let record = EpisodeRecord {
            episode: trace.episode,
            reward: trace.reward,
            acc: trace.acc_quant,
            cost: trace.cost,
            sigma: trace.sigma,
            baseline: trace.baseline,
            best_reward,
            infeasible: trace.infeasible,
        };
        log::debug!("episode {} reward {} best {}", record.episode, record.reward, best_reward);
        on_episode(&record)?;
        records.push(record);
    }
    let (best_episode, best_reward, best_acc, best_cost, infeasible, best_policy) = best.expect("at least one episode");
    let recheck = state.budget.cost(&state.model, &best_policy, &state.hw)?;
    if !infeasible && !state.budget.satisfied_by(recheck) {
        return Err(Error::Agent(format!(
            "best policy violates its budget on re-check ({recheck} > {})",
            state.budget.limit
        )));
    }
    Ok(SearchOutcome {
        model: state.model.name.clone(),
        budget_kind: state.budget.kind.as_str(),
        budget_limit: state.budget.limit,
        acc_origin: state.acc_origin,
        best_episode,
        best_reward,
        best_acc,
        best_cost,
        infeasible,
        best_policy,
        records,
    })
}
