use std::time::Instant;

use anyhow::{bail, Context, Result};
use bsmg_core::env::{make_env, spec_of, EnvHandle, Exposure};
use bsmg_core::learn::{sopt_policy, Agent, LearnOutcome, Learner, LearnerConfig};
use bsmg_core::stage::MAX_NASH_ACTIONS;
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// One row of an experiment's CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub trial: usize,
    pub episode: usize,
    pub state: String,
    pub agent: String,
    pub v_defender: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat { mean, std, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    /// Final defender value per state across trials.
    pub states: IndexMap<String, Stat>,
    pub wall_time_s: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub agents: IndexMap<String, AgentSummary>,
}

impl Summary {
    pub fn final_mean(&self, agent: &str, state: &str) -> Option<f64> {
        self.agents.get(agent)?.states.get(state).map(|s| s.mean)
    }

    /// Puts every agent's states in `order`; states not listed keep their
    /// relative order at the end.
    pub fn reorder_states(&mut self, order: &[String]) {
        let rank = |name: &str| order.iter().position(|o| o == name).unwrap_or(order.len());
        for summary in self.agents.values_mut() {
            summary.states.sort_by_cached_key(|name, _| rank(name));
        }
    }
}

pub struct Experiment {
    /// Non-terminal states of the instance, in file order.
    pub states: Vec<String>,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

/// Per-agent, per-state statistics of the last recorded episode of every
/// trial, and of the per-trial wall time.
pub fn summarize(records: &[RunRecord]) -> Summary {
    // (agent, state) -> trial -> (episode, value)
    let mut last: IndexMap<(&str, &str), IndexMap<usize, (usize, f64)>> = IndexMap::new();
    let mut times: IndexMap<&str, IndexMap<usize, f64>> = IndexMap::new();
    let mut trials = 0;
    for r in records {
        trials = trials.max(r.trial + 1);
        let slot = last.entry((&r.agent, &r.state)).or_default().entry(r.trial).or_insert((r.episode, r.v_defender));
        if r.episode >= slot.0 {
            *slot = (r.episode, r.v_defender);
        }
        times.entry(&r.agent).or_default().insert(r.trial, r.wall_time_s);
    }
    let mut agents: IndexMap<String, AgentSummary> = IndexMap::new();
    for (agent, t) in &times {
        let wall: Vec<f64> = t.values().copied().collect();
        agents.insert(agent.to_string(), AgentSummary { states: IndexMap::new(), wall_time_s: Stat::of(&wall) });
    }
    for ((agent, state), per_trial) in last {
        let finals: Vec<f64> = per_trial.values().map(|(_, v)| *v).collect();
        agents[agent].states.insert(state.to_string(), Stat::of(&finals));
    }
    Summary { trials, agents }
}

/// Everything a single learning run needs besides its config.
pub struct Prepared {
    base: EnvHandle,
    sopt_x: Option<Vec<Vec<f64>>>,
}

impl Prepared {
    /// Loads and checks the instance for the given agents.
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let base = make_env(&cfg.instance, cfg.variant, Exposure::Privileged)
            .with_context(|| format!("loading {}", cfg.instance.display()))?;
        let spec = spec_of(&base)?;
        let mut sopt_x = None;
        for &agent in &cfg.agents {
            match agent {
                Agent::Nashq => {
                    if spec.n_types() != 1 {
                        bail!("nashq needs a single attacker type, the instance has {}", spec.n_types());
                    }
                    let too_big = (0..spec.n_states()).any(|s| {
                        spec.n_defender_actions(s) > MAX_NASH_ACTIONS || spec.n_attacker_actions(s, 0) > MAX_NASH_ACTIONS
                    });
                    if too_big {
                        bail!("nashq supports at most {MAX_NASH_ACTIONS} actions per player");
                    }
                }
                Agent::Sopt => sopt_x = Some(sopt_policy(spec).context("building the S-OPT strategy")?.leader),
                _ => {}
            }
            if let Some(starts) = cfg.start_override(agent) {
                base.clone().override_start_states(starts).with_context(|| format!("start override of {agent}"))?;
            }
        }
        Ok(Prepared { base, sopt_x })
    }

    /// One learning run against a fresh public handle.
    pub fn run(&self, cfg: &LearnerConfig, start_override: Option<&[String]>) -> Result<LearnOutcome> {
        let mut env = self.base.clone().into_public();
        if let Some(starts) = start_override {
            env.override_start_states(starts)?;
        }
        let learner = match cfg.agent {
            Agent::Sopt => {
                let x = self.sopt_x.clone().context("S-OPT strategy was not prepared")?;
                Learner::with_fixed_strategy(env, cfg, x)?
            }
            _ => Learner::new(env, cfg)?,
        };
        Ok(learner.run()?)
    }
}

/// Records of one run: every `record_every`-th episode and the last one,
/// for each non-terminal state the run has acted in by then.
pub fn records_of(out: &LearnOutcome, agent: Agent, trial: usize, record_every: usize, wall: f64) -> Vec<RunRecord> {
    let curve = &out.curve;
    let last = curve.values.len().saturating_sub(1);
    let mut rows = Vec::new();
    for (episode, values) in curve.values.iter().enumerate() {
        if episode % record_every != 0 && episode != last {
            continue;
        }
        for (s, name) in curve.states.iter().enumerate() {
            let seen = curve.first_visit[s].is_some_and(|e| e <= episode);
            if curve.terminal[s] || !seen {
                continue;
            }
            rows.push(RunRecord {
                trial,
                episode,
                state: name.clone(),
                agent: agent.name().to_string(),
                v_defender: values[s],
                wall_time_s: wall,
            });
        }
    }
    rows
}

/// Runs every (agent, trial) cell, at most `jobs` at a time. Seeds are
/// `base_seed + trial`, so results do not depend on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Experiment> {
    cfg.check()?;
    let prepared = Prepared::new(cfg)?;
    let cells: Vec<(Agent, usize)> = cfg.agents.iter().flat_map(|&a| (0..cfg.trials).map(move |t| (a, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let results: Vec<Result<Vec<RunRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(agent, trial)| {
                let lc = cfg.learner_config(agent, trial);
                let started = Instant::now();
                let out = prepared
                    .run(&lc, cfg.start_override(agent))
                    .with_context(|| format!("{agent}, trial {trial}"))?;
                let wall = if cfg.record_wall_time { started.elapsed().as_secs_f64() } else { 0.0 };
                Ok(records_of(&out, agent, trial, cfg.record_every, wall))
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    let spec = spec_of(&prepared.base)?;
    let states: Vec<String> =
        (0..spec.n_states()).filter(|&s| !spec.is_terminal(s)).map(|s| spec.states[s].clone()).collect();
    let mut summary = summarize(&records);
    summary.reorder_states(&states);
    Ok(Experiment { states, records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(agent: &str, trial: usize, episode: usize, state: &str, v: f64) -> RunRecord {
        RunRecord { trial, episode, state: state.into(), agent: agent.into(), v_defender: v, wall_time_s: 0.5 }
    }

    #[test]
    fn summary_uses_last_episodes() {
        let records = vec![
            rec("a", 0, 0, "s", 1.0),
            rec("a", 0, 1, "s", 2.0),
            rec("a", 1, 0, "s", 5.0),
            rec("a", 1, 1, "s", 4.0),
        ];
        let s = summarize(&records);
        let st = &s.agents["a"].states["s"];
        assert_eq!((st.mean, st.n), (3.0, 2));
        assert!((st.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.agents["a"].wall_time_s.mean, 0.5);
        assert_eq!(s.trials, 2);
    }

    #[test]
    fn stat_of_one_value() {
        assert_eq!(Stat::of(&[3.0]), Stat { mean: 3.0, std: 0.0, n: 1 });
    }
}
