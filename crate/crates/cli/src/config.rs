use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bsmg_core::env::Variant;
use bsmg_core::learn::{Agent, AlphaSchedule, LearnerConfig};
use serde::{Deserialize, Serialize};

/// Learner settings shared by every agent of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSettings {
    pub episodes: usize,
    pub max_episode_len: usize,
    pub alpha: f64,
    pub alpha_schedule: AlphaSchedule,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        let d = LearnerConfig::default();
        LearnerSettings {
            episodes: d.episodes,
            max_episode_len: d.max_episode_len,
            alpha: d.alpha,
            alpha_schedule: d.alpha_schedule,
            gamma: d.gamma,
            epsilon_start: d.epsilon_start,
            epsilon_end: d.epsilon_end,
        }
    }
}

/// Per-agent changes to [`LearnerSettings`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentOverride {
    pub episodes: Option<usize>,
    pub max_episode_len: Option<usize>,
    pub alpha: Option<f64>,
    pub alpha_schedule: Option<AlphaSchedule>,
    pub gamma: Option<f64>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    /// Start states for this agent's episodes, by name.
    pub start_override: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance file; relative paths are resolved against the config file.
    pub instance: PathBuf,
    pub agents: Vec<Agent>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub learner: LearnerSettings,
    #[serde(default)]
    pub overrides: BTreeMap<Agent, AgentOverride>,
    /// Web-app switching variant; the instance's own when absent.
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Measure per-trial wall time. Off by default so that repeated runs
    /// write identical files.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(instance: impl Into<PathBuf>, agents: Vec<Agent>) -> Self {
        ExperimentConfig {
            instance: instance.into(),
            agents,
            trials: 1,
            base_seed: 0,
            record_every: 1,
            learner: LearnerSettings::default(),
            overrides: BTreeMap::new(),
            variant: None,
            out: None,
            record_wall_time: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.agents.is_empty() {
            bail!("no agents to run");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.record_every == 0 {
            bail!("record_every must be at least 1");
        }
        if let Some(dup) = self.agents.iter().enumerate().find(|(k, a)| self.agents[..*k].contains(a)) {
            bail!("agent {} listed twice", dup.1);
        }
        if let Some(extra) = self.overrides.keys().find(|a| !self.agents.contains(a)) {
            bail!("override for agent {extra}, which is not run");
        }
        if !self.instance.is_file() {
            bail!("instance {} does not exist", self.instance.display());
        }
        for &agent in &self.agents {
            self.learner_config(agent, 0).validate().with_context(|| format!("learner settings of {agent}"))?;
        }
        Ok(())
    }

    /// The learner configuration of `agent` in `trial`.
    pub fn learner_config(&self, agent: Agent, trial: usize) -> LearnerConfig {
        let base = &self.learner;
        let o = self.overrides.get(&agent).cloned().unwrap_or_default();
        LearnerConfig {
            agent,
            episodes: o.episodes.unwrap_or(base.episodes),
            max_episode_len: o.max_episode_len.unwrap_or(base.max_episode_len),
            alpha: o.alpha.unwrap_or(base.alpha),
            alpha_schedule: o.alpha_schedule.unwrap_or(base.alpha_schedule),
            gamma: o.gamma.unwrap_or(base.gamma),
            epsilon_start: o.epsilon_start.unwrap_or(base.epsilon_start),
            epsilon_end: o.epsilon_end.unwrap_or(base.epsilon_end),
            seed: self.base_seed.wrapping_add(trial as u64),
            trace: false,
        }
    }

    pub fn start_override(&self, agent: Agent) -> Option<&[String]> {
        self.overrides.get(&agent).and_then(|o| o.start_override.as_deref())
    }
}

/// Reads a config file and resolves its instance path.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if cfg.instance.is_relative() {
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.instance = base.join(&cfg.instance);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_per_agent() {
        let json = r#"{
            "instance": "x.json",
            "agents": ["bssq", "sopt"],
            "trials": 3,
            "base_seed": 10,
            "learner": {"episodes": 50},
            "overrides": {"sopt": {"epsilon_start": 0.2, "start_override": ["a"]}}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        let b = cfg.learner_config(Agent::Bssq, 2);
        assert_eq!((b.episodes, b.seed, b.epsilon_start), (50, 12, 0.1));
        let s = cfg.learner_config(Agent::Sopt, 0);
        assert_eq!(s.epsilon_start, 0.2);
        assert_eq!(cfg.start_override(Agent::Sopt), Some(&["a".to_string()][..]));
        assert_eq!(cfg.start_override(Agent::Bssq), None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let json = r#"{"instance": "x.json", "agents": ["urs"], "trails": 3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(json).is_err());
    }
}
