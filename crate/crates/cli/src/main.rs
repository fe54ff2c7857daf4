mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bireach::planner::PlanStep;
use bireach::risk::write_particles_jsonl;
use bireach::simulator::{
    run_batch, run_episode, synthetic_intersection, EgoTurn, Map, Outcome, Scenario,
};
use bireach::Execution;
use clap::{ArgGroup, Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "bireach",
    version,
    about = "Occlusion-aware intersection planner and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that reads a configuration.
#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (batch) or planner seed (run, overriding the scenario's).
    #[arg(long)]
    seed: Option<u64>,
    /// Particles per planner iteration.
    #[arg(long)]
    particles: Option<usize>,
    /// Longest sampled horizon T_f (s).
    #[arg(long)]
    horizon: Option<f64>,
    /// Replanning period T_r (s).
    #[arg(long)]
    replan: Option<f64>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.particles {
            cfg.risk.n_particles = n;
        }
        if let Some(t) = self.horizon {
            cfg.risk.forecast_horizon = t;
        }
        if let Some(t) = self.replan {
            cfg.risk.replan_period = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv and outcome.json.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory, created if needed.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write every particle of every iteration to particles.jsonl.
        #[arg(long)]
        dump_particles: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run randomized episodes and write a JSON report.
    #[command(group(ArgGroup::new("maps_source").required(true).args(["synthetic", "maps"])))]
    Batch {
        /// Use the synthetic intersection described by the [layout] config.
        #[arg(long)]
        synthetic: bool,
        /// Directory of map JSON files, taken in file-name order.
        #[arg(long)]
        maps: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        max_agents: Option<usize>,
        /// Worker threads; the report does not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the synthetic intersection as map JSON.
    MakeMap {
        #[arg(long)]
        arm_length: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        lane_width: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        setback: Option<f64>,
        #[arg(long, value_parser = parse_turn)]
        turn: Option<EgoTurn>,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_turn(s: &str) -> Result<EgoTurn, String> {
    match s {
        "straight" => Ok(EgoTurn::Straight),
        "left" => Ok(EgoTurn::Left),
        "right" => Ok(EgoTurn::Right),
        _ => Err(format!("expected straight, left or right, got {s:?}")),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_run(scenario: &Path, out: &Path, dump: bool, common: &Common) -> anyhow::Result<u8> {
    let cfg = common.resolve()?;
    let mut scenario: Scenario = read_json(scenario)?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut dump_file = if dump {
        let path = out.join("particles.jsonl");
        let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Some(BufWriter::new(f))
    } else {
        None
    };
    let mut dump_err = None;
    let mut observer = |t: f64, step: &PlanStep| {
        if let (Some(w), None) = (dump_file.as_mut(), dump_err.as_ref()) {
            if let Err(e) = write_particles_jsonl(w, &step.assessed, Some(t)) {
                dump_err = Some(e);
            }
        }
    };
    let result = run_episode(
        &scenario,
        &cfg.settings(),
        Execution::default(),
        Some(&mut observer),
    )?;
    if let Some(e) = dump_err {
        return Err(e).context("cannot write particles.jsonl");
    }
    if let Some(mut w) = dump_file {
        w.flush().context("cannot write particles.jsonl")?;
    }

    let trace_path = out.join("trace.csv");
    let f = File::create(&trace_path)
        .with_context(|| format!("cannot create {}", trace_path.display()))?;
    result.trace.write_csv(BufWriter::new(f))?;
    write_json(&out.join("outcome.json"), &result.summary)?;

    let s = &result.summary;
    println!(
        "{:?} at t = {:.2} s, terminal speed {:.3} m/s, min command {:.3} m/s²",
        s.outcome, s.time, s.terminal_speed, s.min_command
    );
    Ok(match s.outcome {
        Outcome::GoalReached => 0,
        Outcome::Collision => 2,
        Outcome::Timeout => 3,
    })
}

fn load_maps(dir: &Path) -> anyhow::Result<Vec<Map>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read map directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .json maps in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let mut m: Map = read_json(p)?;
            if m.name == "map" {
                if let Some(stem) = p.file_stem() {
                    m.name = stem.to_string_lossy().into_owned();
                }
            }
            Ok(m)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_batch(
    synthetic: bool,
    maps: Option<&Path>,
    episodes: Option<usize>,
    max_agents: Option<usize>,
    jobs: Option<usize>,
    out: &Path,
    common: &Common,
) -> anyhow::Result<u8> {
    let mut cfg = common.resolve()?;
    if let Some(n) = episodes {
        cfg.batch.episodes = n;
    }
    if let Some(n) = max_agents {
        cfg.batch.max_agents = n;
    }
    if let Some(n) = jobs {
        cfg.batch.jobs = n;
    }
    cfg.validate()?;
    if cfg.batch.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let maps = match (synthetic, maps) {
        (true, _) => vec![synthetic_intersection(&cfg.layout)?],
        (false, Some(dir)) => load_maps(dir)?,
        (false, None) => bail!("pass --synthetic or --maps"),
    };
    let report = run_batch(
        &maps,
        cfg.batch.episodes,
        cfg.batch.max_agents,
        &cfg.settings(),
        cfg.seed,
        cfg.batch.jobs,
    )?;
    write_json(out, &report)?;
    println!(
        "median collision rate {:.4} over {} map(s), timeout rate {:.4}",
        report.median_rate,
        report.per_map.len(),
        report.timeout_rate
    );
    Ok(0)
}

fn cmd_make_map(
    arm_length: Option<f64>,
    lane_width: Option<f64>,
    setback: Option<f64>,
    turn: Option<EgoTurn>,
    out: Option<&Path>,
    config: Option<&Path>,
) -> anyhow::Result<u8> {
    let mut layout = RunConfig::load(config)?.layout;
    if let Some(v) = arm_length {
        layout.arm_length = v;
    }
    if let Some(v) = lane_width {
        layout.lane_width = v;
    }
    if let Some(v) = setback {
        layout.building_setback = v;
    }
    if let Some(t) = turn {
        layout.ego_turn = t;
    }
    let map = synthetic_intersection(&layout)?;
    match out {
        Some(path) => write_json(path, &map)?,
        None => println!("{}", serde_json::to_string_pretty(&map)?),
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            dump_particles,
            common,
        } => cmd_run(&scenario, &out, dump_particles, &common),
        Command::Batch {
            synthetic,
            maps,
            episodes,
            max_agents,
            jobs,
            out,
            common,
        } => cmd_batch(
            synthetic,
            maps.as_deref(),
            episodes,
            max_agents,
            jobs,
            &out,
            &common,
        ),
        Command::MakeMap {
            arm_length,
            lane_width,
            setback,
            turn,
            out,
            config,
        } => cmd_make_map(
            arm_length,
            lane_width,
            setback,
            turn,
            out.as_deref(),
            config.as_deref(),
        ),
        Command::PrintConfig { common } => {
            print!("{}", common.resolve()?.to_toml()?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
