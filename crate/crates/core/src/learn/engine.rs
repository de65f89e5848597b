use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{env_action_counts, epsilon_greedy_draw, q_update, urs_policy, Agent, AlphaSchedule, LearnOutcome,
    LearnerConfig, LearningCurve};
use crate::env::{sample_index, Environment};
use crate::game::{QTables, StageGame, StrategyProfile, ValueFunctions};
use crate::stage::{best_response, solve_bsse, solve_nash};
use crate::{Error, Result};

/// Exploration mixing of the exponential-weights learner.
const EXP_MIX: f64 = 0.1;
/// Bound on `|eta * gain|` relative to the leading action.
const EXP_CLIP: f64 = 50.0;
/// Offset between a run's seed and the seed handed to its environment.
const ENV_SEED_OFFSET: u64 = 0x005E_ED0F_E4F1;

/// One interaction, as seen by the learner.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub state: usize,
    pub attacker_type: usize,
    pub a_defender: usize,
    pub a_attacker: usize,
    pub defender_explored: bool,
    pub attacker_explored: bool,
    /// The defender strategy the actions were drawn against.
    pub x: Vec<f64>,
    /// Expected attacker Q-value of every action of the played type against `x`.
    pub attacker_values: Vec<f64>,
    pub r_defender: f64,
    pub r_attacker: f64,
    pub next_state: usize,
}

#[derive(Clone, Debug)]
enum Policy {
    Stackelberg,
    Nash { y: Vec<Vec<f64>> },
    Fixed,
    Exp { gains: Vec<Vec<f64>> },
}

/// A learning run in progress.
pub struct Learner<E: Environment> {
    env: E,
    cfg: LearnerConfig,
    policy: Policy,
    counts: Vec<(usize, Vec<usize>)>,
    terminal: Vec<bool>,
    theta: Vec<Vec<f64>>,
    states: Vec<String>,
    q: QTables,
    visits: Vec<Vec<Vec<u32>>>,
    x: Vec<Vec<f64>>,
    responses: Vec<Vec<usize>>,
    values: ValueFunctions,
    rng: ChaCha8Rng,
    curve: LearningCurve,
}

fn exp_strategy(gains: &[f64]) -> Vec<f64> {
    let k = gains.len() as f64;
    let eta = EXP_MIX / k;
    let top = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = gains.iter().map(|g| (eta * (g - top)).max(-EXP_CLIP).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|wi| (1.0 - EXP_MIX) * wi / total + EXP_MIX / k).collect()
}

impl<E: Environment> Learner<E> {
    /// Starts a run of `cfg.agent` from zero Q-tables and uniform strategies.
    /// The environment is reseeded from `cfg.seed`.
    pub fn new(env: E, cfg: &LearnerConfig) -> Result<Self> {
        let x = match cfg.agent {
            Agent::Sopt => return Err(Error::Config("sopt needs a fixed strategy".into())),
            _ => urs_policy(&env)?.leader,
        };
        Self::build(env, cfg, x)
    }

    /// Starts a run that plays `x` throughout.
    pub fn with_fixed_strategy(env: E, cfg: &LearnerConfig, x: Vec<Vec<f64>>) -> Result<Self> {
        if !matches!(cfg.agent, Agent::Urs | Agent::Sopt) {
            return Err(Error::Config(format!("{} does not play a fixed strategy", cfg.agent)));
        }
        Self::build(env, cfg, x)
    }

    fn build(mut env: E, cfg: &LearnerConfig, x: Vec<Vec<f64>>) -> Result<Self> {
        cfg.validate()?;
        let states = env.get_states();
        let n = states.len();
        let counts = env_action_counts(&env)?;
        let terminal = (0..n).map(|s| env.is_end(s)).collect::<Result<Vec<_>>>()?;
        let theta = (0..n).map(|s| env.type_distribution(s)).collect::<Result<Vec<_>>>()?;
        let n_types = theta.first().map_or(0, Vec::len);
        if x.len() != n || x.iter().zip(&counts).any(|(xs, (nd, _))| xs.len() != *nd || !crate::on_simplex(xs)) {
            return Err(Error::Dimension("strategy does not match the environment's action sets".into()));
        }
        let policy = match cfg.agent {
            Agent::Bssq => Policy::Stackelberg,
            Agent::Nashq => {
                if n_types != 1 {
                    return Err(Error::Config(format!("nashq needs a single attacker type, found {n_types}")));
                }
                Policy::Nash { y: counts.iter().map(|(_, na)| vec![1.0 / na[0] as f64; na[0]]).collect() }
            }
            Agent::Bexpq => Policy::Exp { gains: counts.iter().map(|(nd, _)| vec![0.0; *nd]).collect() },
            Agent::Urs | Agent::Sopt => Policy::Fixed,
        };
        env.reseed(cfg.seed.wrapping_add(ENV_SEED_OFFSET));
        let visits = match cfg.alpha_schedule {
            AlphaSchedule::Constant => Vec::new(),
            AlphaSchedule::VisitDecay { .. } => {
                counts.iter().map(|(nd, na)| na.iter().map(|a| vec![0; nd * a]).collect()).collect()
            }
        };
        let mut learner = Learner {
            cfg: cfg.clone(),
            policy,
            q: QTables::zeros_from_counts(&counts),
            visits,
            responses: counts.iter().map(|(_, na)| vec![0; na.len()]).collect(),
            values: ValueFunctions::zeros(n, n_types),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            curve: LearningCurve {
                states: states.clone(),
                terminal: terminal.clone(),
                first_visit: vec![None; n],
                ..LearningCurve::default()
            },
            x,
            counts,
            terminal,
            theta,
            states,
            env,
        };
        for s in 0..n {
            if !learner.terminal[s] {
                learner.refresh(s)?;
            }
        }
        Ok(learner)
    }

    pub fn q(&self) -> &QTables {
        &self.q
    }

    pub fn values(&self) -> &ValueFunctions {
        &self.values
    }

    pub fn profile(&self) -> StrategyProfile {
        StrategyProfile { leader: self.x.clone(), followers: self.responses.clone() }
    }

    pub fn curve(&self) -> &LearningCurve {
        &self.curve
    }

    /// Line 11 of the loop: recompute strategies and values of state `s`
    /// from its Q-tables.
    fn refresh(&mut self, s: usize) -> Result<()> {
        match &mut self.policy {
            Policy::Stackelberg => {
                let game = StageGame::new(self.q.q_defender[s].clone(), self.q.q_attacker[s].clone(), self.theta[s].clone())?;
                let sol = solve_bsse(&game)?;
                self.x[s] = sol.x;
                self.responses[s] = sol.responses;
                self.values.v_defender[s] = sol.v_leader;
                self.values.v_attacker[s] = sol.v_followers;
            }
            Policy::Nash { y } => {
                let sol = solve_nash(&self.q.q_defender[s][0], &self.q.q_attacker[s][0])?;
                self.x[s] = sol.x;
                y[s] = sol.y;
                self.values.v_defender[s] = sol.v_leader;
                self.values.v_attacker[s] = vec![sol.v_follower];
            }
            Policy::Exp { gains } => {
                self.x[s] = exp_strategy(&gains[s]);
                self.respond(s)?;
            }
            Policy::Fixed => self.respond(s)?,
        }
        Ok(())
    }

    /// Attacker types best-respond to the announced `x(s)`; values follow.
    fn respond(&mut self, s: usize) -> Result<()> {
        let xs = &self.x[s];
        let mut v_def = 0.0;
        for i in 0..self.theta[s].len() {
            let (br, _) = best_response(&self.q.q_attacker[s][i], xs)?;
            self.responses[s][i] = br;
            self.values.v_attacker[s][i] = self.q.q_attacker[s][i].column_value(xs, br);
            v_def += self.theta[s][i] * self.q.q_defender[s][i].column_value(xs, br);
        }
        self.values.v_defender[s] = v_def;
        Ok(())
    }

    fn alpha(&mut self, s: usize, i: usize, d: usize, a: usize) -> f64 {
        match self.cfg.alpha_schedule {
            AlphaSchedule::Constant => self.cfg.alpha,
            AlphaSchedule::VisitDecay { k } => {
                let cell = &mut self.visits[s][i][d * self.counts[s].1[i] + a];
                let alpha = self.cfg.alpha / (1.0 + k * f64::from(*cell));
                *cell += 1;
                alpha
            }
        }
    }

    /// One interaction in the non-terminal state `s`.
    pub fn step(&mut self, episode: usize, s: usize, eps: f64) -> Result<StepRecord> {
        let i = sample_index(&self.theta[s], self.rng.gen());
        let x = self.x[s].clone();
        let (a_defender, defender_explored) = epsilon_greedy_draw(&x, eps, &mut self.rng);
        let n_att = self.counts[s].1[i];
        let (a_attacker, attacker_explored) = match &self.policy {
            Policy::Nash { y } => epsilon_greedy_draw(&y[s], eps, &mut self.rng),
            _ => {
                let mut point = vec![0.0; n_att];
                point[self.responses[s][i]] = 1.0;
                epsilon_greedy_draw(&point, eps, &mut self.rng)
            }
        };
        let attacker_values = if self.cfg.trace { self.q.q_attacker[s][i].column_values(&x) } else { Vec::new() };

        let out = self.env.act(s, a_defender, a_attacker, i)?;
        let next = out.next_state;
        if next >= self.states.len() {
            return Err(Error::UnknownState(format!("#{next}")));
        }
        let (v_def, v_att) =
            if self.terminal[next] { (0.0, 0.0) } else { (self.values.v_defender[next], self.values.v_attacker[next][i]) };
        let alpha = self.alpha(s, i, a_defender, a_attacker);
        let gamma = self.cfg.gamma;
        let cell = (a_defender, a_attacker);
        let qd = &mut self.q.q_defender[s][i][cell];
        *qd = q_update(*qd, out.r_defender, v_def, alpha, gamma);
        let qa = &mut self.q.q_attacker[s][i][cell];
        *qa = q_update(*qa, out.r_attacker, v_att, alpha, gamma);

        if let Policy::Exp { gains } = &mut self.policy {
            let k = x.len() as f64;
            let p = (1.0 - eps) * x[a_defender] + eps / k;
            gains[s][a_defender] += self.theta[s][i] * (out.r_defender + gamma * v_def) / p;
        }
        self.refresh(s)?;
        Ok(StepRecord {
            episode,
            state: s,
            attacker_type: i,
            a_defender,
            a_attacker,
            defender_explored,
            attacker_explored,
            x,
            attacker_values,
            r_defender: out.r_defender,
            r_attacker: out.r_attacker,
            next_state: next,
        })
    }

    /// Plays one episode and appends it to the curve.
    pub fn run_episode(&mut self, episode: usize) -> Result<()> {
        let eps = self.cfg.epsilon(episode);
        let mut s = self.env.get_start_state();
        for _ in 0..self.cfg.max_episode_len {
            if self.env.is_end(s)? {
                break;
            }
            self.curve.first_visit[s].get_or_insert(episode);
            let rec = self.step(episode, s, eps)?;
            s = rec.next_state;
            self.curve.steps += 1;
            if self.cfg.trace {
                self.curve.trace.push(rec);
            }
        }
        self.curve.values.push(self.values.v_defender.clone());
        self.curve.strategies.push(self.x.clone());
        Ok(())
    }

    pub fn run(mut self) -> Result<LearnOutcome> {
        for episode in 0..self.cfg.episodes {
            self.run_episode(episode)?;
        }
        Ok(LearnOutcome { profile: self.profile(), q: self.q, values: self.values, curve: self.curve })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_strategy_shape() {
        let x = exp_strategy(&[0.0, 0.0, 0.0, 0.0]);
        assert!(x.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let x = exp_strategy(&[0.0, -1e9]);
        assert!((x[1] - EXP_MIX / 2.0).abs() < 1e-12);
        assert!(crate::on_simplex(&x));
        assert_eq!(exp_strategy(&[-7.0]), vec![1.0]);
    }
}
