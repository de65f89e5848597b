use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bsmg_cli::commands::{
    cmd_compare, cmd_generate, cmd_learn, cmd_oracle, cmd_solve, cmd_validate, parse_alpha_schedule, GenerateKind,
    LearnArgs,
};
use bsmg_cli::LearnerSettings;
use bsmg_core::env::Variant;
use bsmg_core::game::RandomSpecParams;
use bsmg_core::learn::Agent;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bsmg", version, about = "Bayesian Stackelberg Markov games: solve, plan, learn and compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Webapp,
    Ids,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file.
    Validate { instance: PathBuf },
    /// Solve the stage game of one state on its immediate utilities.
    Solve {
        instance: PathBuf,
        /// State name; the first start state when omitted.
        #[arg(long)]
        state: Option<String>,
        #[arg(long, default_value = "solve.json")]
        out: PathBuf,
    },
    /// Plan with Stackelberg value iteration.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value = "oracle.json")]
        out: PathBuf,
    },
    /// Run one learner.
    Learn {
        instance: PathBuf,
        #[arg(long, default_value = "bssq")]
        agent: String,
        #[arg(long, default_value_t = 300)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// plain or threshold (web-app instances).
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 0.06)]
        alpha: f64,
        /// `constant` or `decay:K`.
        #[arg(long, default_value = "constant")]
        alpha_schedule: String,
        #[arg(long, default_value_t = 0.8)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon_start: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon_end: f64,
        #[arg(long, default_value_t = 10)]
        max_episode_len: usize,
        /// Comma-separated start states.
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<String>>,
    },
    /// Run a multi-agent, multi-trial experiment from a config file.
    Compare {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write a synthetic instance.
    Generate {
        kind: InstanceKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Full-scale web-app action counts.
        #[arg(long)]
        full: bool,
        /// Mark a web-app instance as using the threshold variant.
        #[arg(long)]
        threshold: bool,
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        types: usize,
        #[arg(long, default_value_t = 2)]
        def_actions: usize,
        #[arg(long, default_value_t = 2)]
        att_actions: usize,
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        #[arg(long, default_value_t = 1.0)]
        high: f64,
        #[arg(long, default_value_t = 0.8)]
        discount: f64,
        #[arg(long, default_value_t = 0)]
        terminal: usize,
    },
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Validate { instance } => cmd_validate(&instance),
        Command::Solve { instance, state, out } => cmd_solve(&instance, state.as_deref(), &out),
        Command::Oracle { instance, tol, max_iter, out } => cmd_oracle(&instance, tol, max_iter, &out),
        Command::Learn {
            instance,
            agent,
            episodes,
            seed,
            out,
            variant,
            alpha,
            alpha_schedule,
            gamma,
            epsilon_start,
            epsilon_end,
            max_episode_len,
            start,
        } => {
            let args = LearnArgs {
                instance,
                agent: agent.parse::<Agent>()?,
                episodes,
                seed,
                out,
                variant: variant.map(|v| v.parse::<Variant>()).transpose()?,
                settings: LearnerSettings {
                    episodes,
                    max_episode_len,
                    alpha,
                    alpha_schedule: parse_alpha_schedule(&alpha_schedule)?,
                    gamma,
                    epsilon_start,
                    epsilon_end,
                },
                start_override: start,
            };
            cmd_learn(&args)
        }
        Command::Compare { config, out, jobs } => cmd_compare(&config, out.as_deref(), jobs),
        Command::Generate {
            kind,
            out,
            seed,
            full,
            threshold,
            states,
            types,
            def_actions,
            att_actions,
            low,
            high,
            discount,
            terminal,
        } => {
            let kind = match kind {
                InstanceKind::Webapp => GenerateKind::Webapp { full, threshold },
                InstanceKind::Ids => GenerateKind::Ids,
                InstanceKind::Random => GenerateKind::Random(
                    RandomSpecParams::new(states, types, def_actions, vec![att_actions], (low, high), seed)
                        .with_discount(discount)
                        .with_terminal(terminal),
                ),
            };
            cmd_generate(&kind, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
