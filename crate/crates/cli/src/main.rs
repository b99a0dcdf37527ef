//! `sugarlat` command-line runner.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::{debug, info};
use sugarlat::metrics::wealth_distance;
use sugarlat::snapshot::{decode_stream, encode_into};
use sugarlat::{init_state, parse_plan, Metrics, Plan, SimConfig, SimState, StepError, StepRow, UpdateMode};

#[derive(Parser)]
#[command(name = "sugarlat", version, about = "Deterministic Sugarscape simulation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation, writing metrics.csv and optional snapshots.
    Run(RunArgs),
    /// Check a config and plan without running; prints the canonical plan.
    Validate(Common),
    /// Time each update mode and compare its trajectory with sync.
    Bench(BenchArgs),
    /// Resume from the last record of a snapshot file.
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rule plan, e.g. "tick;growback;movement_basic".
    #[arg(long)]
    plan: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    update_mode: Option<UpdateMode>,
    /// Sugar capacity map (header `M=<int>`, then M*M integers).
    #[arg(long)]
    terrain: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    steps: u64,
    /// Check every invariant after every rule; exit 3 on a violation.
    #[arg(long)]
    check: bool,
    /// Write a snapshot every N steps (0: never).
    #[arg(long)]
    snapshot_every: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    steps: u64,
    /// Comma-separated update modes; all six when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    modes: Vec<UpdateMode>,
    /// Number of seeds, counting up from the configured seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Args)]
struct ReplayArgs {
    /// Snapshot file written by `run`.
    snapshot: PathBuf,
    /// Config the run was made with.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    plan: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    update_mode: Option<UpdateMode>,
    #[arg(long, default_value_t = 100)]
    steps: u64,
    #[arg(long)]
    check: bool,
    #[arg(long)]
    snapshot_every: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<UpdateMode, String> {
    s.parse()
}

/// Failures, by exit status.
enum Failure {
    /// Config, plan or terrain rejected: exit 2.
    Config(String),
    /// Checked run hit an invariant violation: exit 3.
    Invariant(StepError),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Other(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SUGARLAT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Reads the config, applies flag overrides, validates it and parses the
/// plan. Relative terrain paths in a config file resolve against its folder.
fn load(common: &Common) -> Result<(SimConfig, Plan), Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut cfg = SimConfig::from_toml_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            for t in [&mut cfg.engine.terrain, &mut cfg.engine.spice_terrain]
                .into_iter()
                .flatten()
            {
                if t.is_relative() {
                    *t = base.join(&*t);
                }
            }
            cfg
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.engine.seed = seed;
    }
    if let Some(p) = &common.plan {
        cfg.engine.plan = p.clone();
    }
    if let Some(mode) = common.update_mode {
        cfg.engine.update_mode = mode;
    }
    if let Some(t) = &common.terrain {
        cfg.engine.terrain = Some(t.clone());
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let plan = parse_plan(&cfg.engine.plan, cfg.is_dual(), cfg.engine.update_mode)
        .map_err(|e| Failure::Config(format!("invalid plan: {e}")))?;
    debug!("config loaded: plan {plan}, mode {}", cfg.engine.update_mode);
    Ok((cfg, plan))
}

fn initial(cfg: &SimConfig, seed: u64) -> Result<SimState, Failure> {
    init_state(cfg, seed).map_err(|e| Failure::Config(e.to_string()))
}

fn cmd_validate(common: Common) -> Result<(), Failure> {
    let (cfg, plan) = load(&common)?;
    initial(&cfg, cfg.engine.seed)?;
    println!("{}", plan.canonical());
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let (mut cfg, plan) = load(&a.common)?;
    if let Some(n) = a.snapshot_every {
        cfg.engine.snapshot_every = n;
    }
    let state = initial(&cfg, cfg.engine.seed)?;
    simulate(state, &cfg, &plan, a.steps, a.check, &a.out)
}

fn cmd_replay(a: ReplayArgs) -> Result<(), Failure> {
    let common = Common {
        config: a.config,
        seed: None,
        plan: a.plan,
        update_mode: a.update_mode,
        terrain: None,
    };
    let (mut cfg, plan) = load(&common)?;
    if let Some(n) = a.snapshot_every {
        cfg.engine.snapshot_every = n;
    }
    let text = fs::read_to_string(&a.snapshot).with_context(|| format!("reading {}", a.snapshot.display()))?;
    let state = decode_stream(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", a.snapshot.display())))?
        .pop()
        .ok_or_else(|| Failure::Config(format!("{}: no snapshot records", a.snapshot.display())))?;
    if state.dual != cfg.is_dual() || state.m() != cfg.m {
        return Err(Failure::Config(format!(
            "{} does not match the config (M or [spice] differ)",
            a.snapshot.display()
        )));
    }
    info!("resuming at step {}", state.step);
    simulate(state, &cfg, &plan, a.steps, a.check, &a.out)
}

/// Runs `steps` steps from `state`, writing `metrics.csv` and, when enabled,
/// `snapshots.txt` (the starting state, then every N-th step) into `out`.
fn simulate(
    mut state: SimState,
    cfg: &SimConfig,
    plan: &Plan,
    steps: u64,
    check: bool,
    out: &Path,
) -> Result<(), Failure> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let every = cfg.engine.snapshot_every;
    let mut snapshots = match every {
        0 => None,
        _ => Some(BufWriter::new(fs::File::create(out.join("snapshots.txt"))?)),
    };
    let mut buf = String::new();
    let mut emit = |s: &SimState, w: &mut Option<BufWriter<fs::File>>| -> std::io::Result<()> {
        if let Some(w) = w {
            buf.clear();
            encode_into(s, &mut buf);
            w.write_all(buf.as_bytes())?;
        }
        Ok(())
    };
    emit(&state, &mut snapshots)?;
    let start = Instant::now();
    let mut metrics = Metrics::default();
    for k in 1..=steps {
        let ledger = sugarlat::step(&mut state, cfg, plan, check).map_err(Failure::Invariant)?;
        metrics.rows.push(StepRow::observe(&state, &ledger));
        if every > 0 && k % every == 0 {
            emit(&state, &mut snapshots)?;
        }
        debug!("step {} population {}", state.step, state.population());
    }
    if let Some(mut w) = snapshots {
        w.flush()?;
    }
    let elapsed = start.elapsed();
    let path = out.join("metrics.csv");
    metrics.write_csv(BufWriter::new(fs::File::create(&path)?))?;
    println!(
        "{steps} steps of [{plan}] ({}) in {:.3} s; step {}, population {}; metrics in {}",
        plan.mode,
        elapsed.as_secs_f64(),
        state.step,
        state.population(),
        path.display()
    );
    Ok(())
}

#[derive(Default)]
struct BenchRow {
    elapsed: Duration,
    steps: u64,
    pop_diff_sum: f64,
    pop_diff_final: f64,
    wealth_sum: f64,
    wealth_final: f64,
    samples: u64,
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let (cfg, base_plan) = load(&a.common)?;
    let modes = if a.modes.is_empty() {
        UpdateMode::ALL.to_vec()
    } else {
        a.modes.clone()
    };
    let plans: Vec<Plan> = modes
        .iter()
        .map(|&m| parse_plan(&cfg.engine.plan, cfg.is_dual(), m).expect("plan parsed once already"))
        .collect();
    let reference = parse_plan(&cfg.engine.plan, cfg.is_dual(), UpdateMode::Sync).expect("plan parsed once already");
    let mut rows: Vec<BenchRow> = modes.iter().map(|_| BenchRow::default()).collect();
    for seed in cfg.engine.seed..cfg.engine.seed + a.seeds {
        let mut sync = initial(&cfg, seed)?;
        let mut states: Vec<SimState> = modes.iter().map(|_| sync.clone()).collect();
        for k in 1..=a.steps {
            sugarlat::step(&mut sync, &cfg, &reference, false).map_err(Failure::Invariant)?;
            for ((s, p), row) in states.iter_mut().zip(&plans).zip(&mut rows) {
                let t = Instant::now();
                sugarlat::step(s, &cfg, p, false).map_err(Failure::Invariant)?;
                row.elapsed += t.elapsed();
                row.steps += 1;
                let pop = (s.population() as f64 - sync.population() as f64).abs();
                let w = wealth_distance(s, &sync);
                row.pop_diff_sum += pop;
                row.wealth_sum += w;
                row.samples += 1;
                if k == a.steps {
                    row.pop_diff_final += pop;
                    row.wealth_final += w;
                }
            }
        }
    }
    info!("benchmarked [{base_plan}] over {} seed(s)", a.seeds);
    let seeds = a.seeds.max(1) as f64;
    let mut table = String::new();
    let _ = writeln!(
        table,
        "{:<20} {:>12} {:>14} {:>15} {:>14} {:>15}",
        "mode", "us_per_step", "pop_diff_mean", "pop_diff_final", "wealth_w1_mean", "wealth_w1_final"
    );
    for (mode, r) in modes.iter().zip(&rows) {
        let per_step = if r.steps == 0 {
            0.0
        } else {
            r.elapsed.as_secs_f64() * 1e6 / r.steps as f64
        };
        let mean = |x: f64| if r.samples == 0 { 0.0 } else { x / r.samples as f64 };
        let _ = writeln!(
            table,
            "{:<20} {:>12.1} {:>14.3} {:>15.3} {:>14.4} {:>15.4}",
            mode.name(),
            per_step,
            mean(r.pop_diff_sum),
            r.pop_diff_final / seeds,
            mean(r.wealth_sum),
            r.wealth_final / seeds
        );
    }
    print!("{table}");
    Ok(())
}
