use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::json;

use bsgame::channel::{draw_channels, stream, RngSeed};
use bsgame::config::{NetworkConfig, ScheduleKind};
use bsgame::limits::{empirical_fractions, nonatomic_equilibrium_fractions, selection_step_budget};
use bsgame::metrics::{braess_compare, sweep_poa_pos, SweepConfig};
use bsgame::report;
use bsgame::selection::{
    enumerate_ne, is_selection_nash, max_ne_bound, run_selection_dynamics, OrientedGraph,
    ProfileSpace, SelectionProfile, DEFAULT_ENUMERATION_CAP,
};
use bsgame::sharing::{run_sharing_dynamics, DEFAULT_EPSILON, DEFAULT_MAX_SWEEPS};
use bsgame::{Error, NetworkParams, PowerProfile, Result};

#[derive(Parser)]
#[command(
    name = "bsgame",
    version,
    about = "Base-station selection and sharing games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best-response walks of the selection game on one channel draw.
    SelectRun(Common),
    /// Water-filling Gauss-Seidel runs of the sharing game on one channel draw.
    ShareRun(Common),
    /// Potential of every selection profile and the pure equilibria.
    Enumerate(Common),
    /// Price of anarchy and stability of the selection game versus K.
    PoaPos(Common),
    /// Equilibrium fractions per station: closed form against simulation.
    Nonatomic(Common),
    /// Network spectral efficiency of selection versus sharing, paired trials.
    Braess(Common),
    /// The channel gain matrix drawn for the configured seed.
    Channels(Common),
}

#[derive(Args)]
struct Common {
    /// Key/value network configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the trial (or walk) count from the config file.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    out: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

struct Job {
    config: NetworkConfig,
    seed: RngSeed,
    trials: Option<usize>,
    out: Format,
}

impl Job {
    fn load(c: &Common) -> Result<Self> {
        let config = NetworkConfig::load(&c.config)?;
        let seed = RngSeed(c.seed.unwrap_or(config.seed));
        let trials = c.trials.or(config.trials);
        if trials == Some(0) {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        Ok(Job {
            config,
            seed,
            trials,
            out: c.out,
        })
    }

    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    fn sweep_config(&self, default_trials: usize) -> Result<SweepConfig> {
        Ok(SweepConfig {
            bandwidth_fractions: self.config.bandwidth_fractions(),
            players: self.config.player_counts()?,
            trials: self.trials(default_trials),
            snr_db: self.config.snr_db,
            seed: self.seed,
        })
    }
}

fn one_based(a: &[usize]) -> Vec<usize> {
    a.iter().map(|s| s + 1).collect()
}

fn select_run(job: &Job, out: &mut dyn Write) -> Result<()> {
    let params = job.config.params()?;
    let gains = draw_channels(&params, job.seed);
    let schedule = job.config.schedule.unwrap_or(ScheduleKind::Random);
    let max_steps = job
        .config
        .max_steps
        .unwrap_or_else(|| selection_step_budget(&params));
    let space = ProfileSpace::of(&params).ok();
    let mut walks = Vec::new();
    let mut summaries = Vec::new();
    for w in 0..job.trials(1) as u64 {
        let walk_seed = job.seed.trial(w);
        let start =
            SelectionProfile::uniform_random(&params, &mut walk_seed.rng(stream::START_PROFILE));
        let (end, traj) = run_selection_dynamics(
            &gains,
            &params,
            &start,
            schedule.with_seed(walk_seed),
            max_steps,
        )?;
        summaries.push(json!({
            "start": one_based(start.assignment()),
            "end": one_based(end.assignment()),
            "end_index": space.map(|s| s.index_of(&end).one_based()),
            "is_ne": is_selection_nash(&gains, &params, &end),
            "changes": traj.change_count(),
            "trajectory": &traj,
        }));
        walks.push(traj);
    }
    match job.out {
        Format::Csv => report::write_selection_trajectories(out, &walks),
        Format::Json => write_json(out, &json!({ "seed": job.seed.0, "walks": summaries })),
    }
}

fn random_power_profile(params: &NetworkParams, seed: RngSeed) -> Result<PowerProfile> {
    let mut rng = seed.rng(stream::START_PROFILE);
    let mut p = ndarray::Array2::zeros((params.num_players(), params.num_stations()));
    for mut row in p.rows_mut() {
        row.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        let total = row.sum();
        row.iter_mut().for_each(|v| *v *= params.p_max() / total);
    }
    // Renormalization may overshoot the budget by an ulp.
    p.mapv_inplace(|v: f64| v * (1.0 - 1e-15));
    PowerProfile::new(p, params)
}

fn share_run(job: &Job, out: &mut dyn Write) -> Result<()> {
    let params = job.config.params()?;
    let gains = draw_channels(&params, job.seed);
    let schedule = job.config.schedule.unwrap_or(ScheduleKind::RoundRobin);
    let epsilon = job.config.epsilon.unwrap_or(DEFAULT_EPSILON);
    let max_sweeps = job.config.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    let mut walks = Vec::new();
    let mut summaries = Vec::new();
    for w in 0..job.trials(1) as u64 {
        let walk_seed = job.seed.trial(w);
        let start = if w == 0 {
            PowerProfile::uniform(&params)
        } else {
            random_power_profile(&params, walk_seed)?
        };
        let (end, traj) = run_sharing_dynamics(
            &gains,
            &params,
            &start,
            schedule.with_seed(walk_seed),
            epsilon,
            max_sweeps,
        )?;
        let rows: Vec<Vec<f64>> = end
            .powers()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        summaries.push(json!({
            "powers": rows,
            "sweeps": traj.sweeps,
            "kkt_residual": traj.final_kkt_residual,
            "trajectory": &traj,
        }));
        walks.push(traj);
    }
    match job.out {
        Format::Csv => report::write_sharing_trajectories(out, &walks),
        Format::Json => write_json(out, &json!({ "seed": job.seed.0, "walks": summaries })),
    }
}

fn enumerate(job: &Job, out: &mut dyn Write) -> Result<()> {
    let params = job.config.params()?;
    let gains = draw_channels(&params, job.seed);
    match job.out {
        Format::Csv => {
            let graph = OrientedGraph::build(&gains, &params, DEFAULT_ENUMERATION_CAP)?;
            let rep = bsgame::selection::ne_report(&graph, &gains, &params);
            report::write_landscape(out, &graph, &rep)
        }
        Format::Json => {
            let rep = enumerate_ne(&gains, &params)?;
            let ne: Vec<_> = rep
                .equilibria
                .iter()
                .map(|e| {
                    json!({
                        "profile_index": e.index.one_based(),
                        "assignment": one_based(&e.assignment),
                        "potential": e.potential,
                        "utilities": e.utilities.0,
                    })
                })
                .collect();
            write_json(
                out,
                &json!({
                    "seed": job.seed.0,
                    "profiles": ProfileSpace::of(&params)?.len(),
                    "max_ne_bound": max_ne_bound(params.num_players(), params.num_stations())?,
                    "is_unique_potential": rep.is_unique_potential,
                    "equilibria": ne,
                }),
            )
        }
    }
}

fn sweep_out(job: &Job, result: bsgame::SweepResult, out: &mut dyn Write) -> Result<()> {
    match job.out {
        Format::Csv => result.write_csv(out),
        Format::Json => result.write_json(out),
    }
}

fn nonatomic(job: &Job, out: &mut dyn Write) -> Result<()> {
    let params = job.config.params()?;
    let theory = nonatomic_equilibrium_fractions(&params, 1.0)?;
    let empirical = empirical_fractions(&params, job.seed, job.trials(100))?;
    match job.out {
        Format::Csv => report::write_fractions(out, &theory, &empirical),
        Format::Json => write_json(
            out,
            &json!({
                "seed": job.seed.0,
                "theoretical": theory,
                "empirical": empirical,
            }),
        ),
    }
}

fn channels(job: &Job, out: &mut dyn Write) -> Result<()> {
    let params = job.config.params()?;
    let gains = draw_channels(&params, job.seed);
    match job.out {
        Format::Csv => gains.write_csv(out),
        Format::Json => {
            let rows: Vec<Vec<f64>> = gains
                .gains()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect();
            write_json(out, &json!({ "seed": job.seed.0, "gains": rows }))
        }
    }
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let (common, action): (&Common, fn(&Job, &mut dyn Write) -> Result<()>) = match &cli.command {
        Command::SelectRun(c) => (c, select_run),
        Command::ShareRun(c) => (c, share_run),
        Command::Enumerate(c) => (c, enumerate),
        Command::PoaPos(c) => (c, |job, out| {
            sweep_out(job, sweep_poa_pos(&job.sweep_config(500)?)?, out)
        }),
        Command::Nonatomic(c) => (c, nonatomic),
        Command::Braess(c) => (c, |job, out| {
            sweep_out(job, braess_compare(&job.sweep_config(200)?)?, out)
        }),
        Command::Channels(c) => (c, channels),
    };
    let job = Job::load(common)?;
    action(&job, out)
}

fn error_record(e: &Error) -> serde_json::Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Buffered so that a failing run leaves stdout empty.
    let mut buf = Vec::new();
    let result = run(&cli, &mut buf).and_then(|()| {
        let mut stdout = io::stdout().lock();
        stdout.write_all(&buf)?;
        stdout.flush()?;
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(2)
        }
    }
}
