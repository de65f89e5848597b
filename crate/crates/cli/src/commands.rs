//! The subcommands. Each returns the text printed on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bsmg_core::env::{ids_instance, webapp_instance, EnvExtensions, IdsParams, Variant, WebAppParams};
use bsmg_core::game::{
    generate_random_bsmg, load_spec, load_spec_with_extensions, save_spec_with_extensions, validate, GameSpec,
    RandomSpecParams, StageGame,
};
use bsmg_core::learn::{Agent, AlphaSchedule};
use bsmg_core::oracle::value_iteration;
use bsmg_core::stage::solve_bsse;
use bsmg_core::Error;
use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::config::{load_config, AgentOverride, ExperimentConfig, LearnerSettings};
use crate::experiment::run_experiment;
use crate::plot::emit_plots_ordered;
use crate::{emit_csv, write_summary};

fn named<T: Clone + Into<Value>>(names: &[String], values: &[T]) -> Value {
    let map: IndexMap<&str, Value> = names.iter().map(String::as_str).zip(values.iter().cloned().map(Into::into)).collect();
    json!(map)
}

fn write_json(value: &Value, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_validate(instance: &Path) -> Result<String> {
    match load_spec(instance) {
        Ok(spec) => Ok(format!(
            "{}: ok ({} states, {} attacker types, discount {})",
            instance.display(),
            spec.n_states(),
            spec.n_types(),
            spec.discount
        )),
        Err(Error::Validation(report)) => bail!("{}: {} problem(s)\n{report}", instance.display(), report.len()),
        Err(e) => Err(e).with_context(|| format!("loading {}", instance.display())),
    }
}

/// Stage game of `state` built from the immediate utilities.
pub fn immediate_stage_game(spec: &GameSpec, s: usize) -> Result<StageGame> {
    let blocks = &spec.blocks[s];
    Ok(StageGame::new(
        blocks.iter().map(|b| b.u_defender.clone()).collect(),
        blocks.iter().map(|b| b.u_attacker.clone()).collect(),
        spec.theta[s].clone(),
    )?)
}

pub fn cmd_solve(instance: &Path, state: Option<&str>, out: &Path) -> Result<String> {
    let spec = load_spec(instance).with_context(|| format!("loading {}", instance.display()))?;
    let s = match state {
        Some(name) => spec.state_index(name)?,
        None => spec.start_states[0],
    };
    let sol = solve_bsse(&immediate_stage_game(&spec, s)?)?;
    let responses: Vec<String> =
        sol.responses.iter().enumerate().map(|(i, &a)| spec.attacker_actions[s][i][a].clone()).collect();
    let result = json!({
        "state": spec.states[s],
        "x": named(&spec.defender_actions[s], &sol.x),
        "responses": named(&spec.attacker_types, &responses),
        "v_leader": sol.v_leader,
        "v_followers": named(&spec.attacker_types, &sol.v_followers),
    });
    write_json(&result, out)?;
    let mut text = format!("state {}\n", spec.states[s]);
    for (name, p) in spec.defender_actions[s].iter().zip(&sol.x) {
        let _ = writeln!(text, "  x[{name}] = {p:.6}");
    }
    for (i, t) in spec.attacker_types.iter().enumerate() {
        let _ = writeln!(text, "  {t} -> {} (value {:.6})", responses[i], sol.v_followers[i]);
    }
    let _ = write!(text, "v_leader = {:.6}", sol.v_leader);
    Ok(text)
}

pub fn cmd_oracle(instance: &Path, tol: f64, max_iter: usize, out: &Path) -> Result<String> {
    let spec = load_spec(instance).with_context(|| format!("loading {}", instance.display()))?;
    let sol = value_iteration(&spec, tol, max_iter)?;
    let mut states = IndexMap::new();
    for (s, name) in spec.states.iter().enumerate() {
        let responses: Vec<String> = sol.profile.followers[s]
            .iter()
            .enumerate()
            .map(|(i, &a)| spec.attacker_actions[s][i][a].clone())
            .collect();
        let q = |tables: &[bsmg_core::Matrix]| -> Value {
            let rows: Vec<Value> = tables.iter().map(|m| json!(m.to_rows())).collect();
            named(&spec.attacker_types, &rows)
        };
        states.insert(
            name.clone(),
            json!({
                "v_defender": sol.values.v_defender[s],
                "v_attacker": named(&spec.attacker_types, &sol.values.v_attacker[s]),
                "x": named(&spec.defender_actions[s], &sol.profile.leader[s]),
                "responses": named(&spec.attacker_types, &responses),
                "q_defender": q(&sol.q.q_defender[s]),
                "q_attacker": q(&sol.q.q_attacker[s]),
            }),
        );
    }
    let result = json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residuals": sol.history,
        "states": states,
    });
    write_json(&result, out)?;
    let mut text = format!(
        "{} after {} iteration(s)\n",
        if sol.converged { "converged" } else { "NOT converged" },
        sol.iterations
    );
    for (s, name) in spec.states.iter().enumerate() {
        let _ = writeln!(text, "V^D({name}) = {:.6}", sol.values.v_defender[s]);
    }
    Ok(text.trim_end().to_string())
}

/// Options of a single learning run.
#[derive(Clone, Debug)]
pub struct LearnArgs {
    pub instance: PathBuf,
    pub agent: Agent,
    pub episodes: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub variant: Option<Variant>,
    pub settings: LearnerSettings,
    pub start_override: Option<Vec<String>>,
}

pub fn cmd_learn(args: &LearnArgs) -> Result<String> {
    let mut cfg = ExperimentConfig::new(&args.instance, vec![args.agent]);
    cfg.base_seed = args.seed;
    cfg.variant = args.variant;
    cfg.learner = LearnerSettings { episodes: args.episodes, ..args.settings.clone() };
    if let Some(starts) = &args.start_override {
        cfg.overrides.insert(args.agent, AgentOverride { start_override: Some(starts.clone()), ..Default::default() });
    }
    let exp = run_experiment(&cfg, 1)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    emit_csv(&exp.records, &args.out.join("curve.csv"))?;
    write_summary(&exp.summary, &args.out.join("summary.json"))?;
    let mut text = format!("{} for {} episode(s), seed {}\n", args.agent, args.episodes, args.seed);
    for (state, st) in &exp.summary.agents[args.agent.name()].states {
        let _ = writeln!(text, "V^D({state}) = {:.6}", st.mean);
    }
    let _ = write!(text, "wrote {}", args.out.display());
    Ok(text)
}

pub fn cmd_compare(config: &Path, out: Option<&Path>, jobs: usize) -> Result<String> {
    let cfg = load_config(config)?;
    let out = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).context("no output directory given")?;
    let exp = run_experiment(&cfg, jobs)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    emit_csv(&exp.records, &out.join("records.csv"))?;
    write_summary(&exp.summary, &out.join("summary.json"))?;
    let plots = emit_plots_ordered(&exp.records, &exp.states, &out)?;
    let mut text = format!("{} trial(s) per agent\n", exp.summary.trials);
    for (agent, summary) in &exp.summary.agents {
        let _ = writeln!(text, "{agent}:");
        for (state, st) in &summary.states {
            let _ = writeln!(text, "  V^D({state}) = {:.6} ± {:.6}", st.mean, st.std);
        }
        if cfg.record_wall_time {
            let _ = writeln!(text, "  time per trial = {:.3}s ± {:.3}s", summary.wall_time_s.mean, summary.wall_time_s.std);
        }
    }
    let _ = write!(text, "wrote records.csv, summary.json and {} plot(s) to {}", plots.len(), out.display());
    Ok(text)
}

/// What `generate` builds.
#[derive(Clone, Debug)]
pub enum GenerateKind {
    Webapp { full: bool, threshold: bool },
    Ids,
    Random(RandomSpecParams),
}

pub fn cmd_generate(kind: &GenerateKind, seed: u64, out: &Path) -> Result<String> {
    let (spec, ext): (GameSpec, Option<EnvExtensions>) = match kind {
        GenerateKind::Webapp { full, threshold } => {
            let params = if *full { WebAppParams::full(seed) } else { WebAppParams::desk(seed) };
            let mut inst = webapp_instance(&params)?;
            if *threshold {
                inst.extensions.variant = Some(Variant::Threshold);
            }
            (inst.spec, Some(inst.extensions))
        }
        GenerateKind::Ids => {
            let (spec, ext) = ids_instance(&IdsParams::default())?;
            (spec, Some(ext))
        }
        GenerateKind::Random(p) => (generate_random_bsmg(&RandomSpecParams { seed, ..p.clone() })?, None),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_spec_with_extensions(&spec, ext.map(|e| e.to_value()).as_ref(), out)?;
    // Re-read to make sure the file is valid as written.
    let (back, _) = load_spec_with_extensions(out)?;
    debug_assert!(validate(&back).is_empty());
    Ok(format!("wrote {} ({} states, {} attacker types)", out.display(), back.n_states(), back.n_types()))
}

/// Parses `constant` or `decay:K`.
pub fn parse_alpha_schedule(s: &str) -> Result<AlphaSchedule> {
    match s.split_once(':') {
        None if s == "constant" => Ok(AlphaSchedule::Constant),
        Some(("decay", k)) => Ok(AlphaSchedule::VisitDecay { k: k.parse().context("decay rate")? }),
        _ => bail!("alpha schedule must be `constant` or `decay:K`, got {s:?}"),
    }
}
