use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dogfight_core::fleet::EpisodeSummary;
use dogfight_core::geometry::{
    atmosphere_angle, blended_distance, horizon_angle, parametric_altitude, planar_distance, space_color,
    spherical_distance, AtmoPalette, HorizonQuery, DEFAULT_ATMOSPHERE_THICKNESS, EARTH_RADIUS,
};
use dogfight_core::machines::{load_specs, Catalog};
use dogfight_core::runtime::{record_episode, replay, Env, RunMode, Trace};
use dogfight_core::scenario::ScenarioConfig;
use dogfight_server::client::{record_remote_episode, Client};
use dogfight_server::policy::{Policy, PolicyKind};
use dogfight_server::server::{Server, ServerConfig, DEFAULT_BIND, DEFAULT_MAX_ENVS};

#[derive(Parser)]
#[command(
    name = "dogfight",
    version,
    about = "Headless air-combat environment server and tools"
)]
struct Cli {
    /// Load aircraft and missile specs from this directory instead of the
    /// built-in set.
    #[arg(long, global = true)]
    specs: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sync,
    Async,
}

#[derive(Subcommand)]
enum Command {
    /// Host environments over TCP.
    Serve {
        #[arg(long, env = "DOGFIGHT_BIND", default_value = DEFAULT_BIND)]
        bind: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ENVS)]
        max_envs: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        /// How long a step waits for the other slots of its environment.
        #[arg(long, default_value_t = 30_000)]
        barrier_timeout_ms: u64,
    },
    /// Play one episode and optionally record its trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "sync")]
        mode: ModeArg,
        /// Ticks per agent step in async mode.
        #[arg(long, default_value_t = 1)]
        ratio: u32,
        /// neutral, random, autopilot_navigate or autopilot_combat.
        #[arg(long, default_value = "neutral")]
        policy: PolicyKind,
        /// Seed for the random policy.
        #[arg(long, default_value_t = 0)]
        policy_seed: u64,
        /// Episode seed; defaults to the scenario's.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Play on a running server instead of in this process.
        #[arg(long)]
        connect: Option<String>,
    },
    /// Re-run a trace and check that it reproduces exactly.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print horizon distances, angles and sky colour as CSV.
    AtmoTable {
        /// Camera altitudes, m.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1e3, 1e4, 5e4, 1e5, 2e5, 1e6])]
        altitudes: Vec<f64>,
        /// Ray angles from the downward normal, degrees.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 85.0])]
        angles: Vec<f64>,
        #[arg(long, default_value_t = EARTH_RADIUS)]
        radius: f64,
        #[arg(long, default_value_t = DEFAULT_ATMOSPHERE_THICKNESS)]
        atmosphere_thickness: f64,
    },
    /// Spec file maintenance.
    Specs {
        #[command(subcommand)]
        command: SpecsCommand,
    },
    /// Measure in-process stepping throughput.
    Bench {
        #[arg(long, default_value_t = 20_000)]
        steps: u64,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SpecsCommand {
    /// Load every spec in a directory and report problems.
    Validate {
        /// Defaults to `--specs`, or the built-in set when neither is given.
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            // Some causes already quote their source; print each text once.
            let mut text = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !text.contains(&c) {
                    text = format!("{text}: {c}");
                }
            }
            eprintln!("error: {text}");
            ExitCode::FAILURE
        }
    }
}

fn catalog(specs: Option<&Path>) -> Result<Arc<Catalog>> {
    Ok(Arc::new(match specs {
        Some(dir) => load_specs(dir).with_context(|| format!("loading specs from {}", dir.display()))?,
        None => Catalog::builtin(),
    }))
}

fn run_mode(mode: ModeArg, ratio: u32) -> Result<RunMode> {
    Ok(match mode {
        ModeArg::Sync => RunMode::Synchronous,
        ModeArg::Async => RunMode::asynchronous(ratio)?,
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve {
            bind,
            max_envs,
            seed_base,
            barrier_timeout_ms,
        } => {
            let config = ServerConfig {
                bind,
                max_envs,
                seed_base,
                barrier_timeout: Duration::from_millis(barrier_timeout_ms),
                catalog: catalog(cli.specs.as_deref())?,
            };
            let server = Server::bind(config.clone()).with_context(|| format!("binding {}", config.bind))?;
            println!("listening on {}", server.local_addr()?);
            server.serve()?;
        }
        Command::Run {
            scenario,
            mode,
            ratio,
            policy,
            policy_seed,
            seed,
            trace,
            connect,
        } => {
            let mut config = ScenarioConfig::load(&scenario)?;
            policy.prepare(&mut config);
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let mode = run_mode(mode, ratio)?;
            let mut actions = Policy::new(policy, &config, policy_seed);
            let recorded = match connect {
                None => {
                    let mut env = Env::new(config, catalog(cli.specs.as_deref())?, mode)?;
                    record_episode(&mut env, None, |step, obs| actions.actions(step, obs))?
                }
                Some(addr) => {
                    let mut client = Client::connect(&addr).with_context(|| format!("connecting to {addr}"))?;
                    let episode_seed = config.seed;
                    let created = client.create_env(config, mode, Some(episode_seed))?;
                    let trace = record_remote_episode(&mut client, created.env_id, None, |step, obs| {
                        actions.actions(step, obs)
                    });
                    let _ = client.destroy_env(created.env_id);
                    trace?
                }
            };
            if let Some(path) = trace {
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                let mut out = BufWriter::new(file);
                recorded.write(&mut out)?;
                out.flush()?;
            }
            println!("{}", serde_json::to_string(&EpisodeSummary::from_trace(&recorded))?);
        }
        Command::Replay { trace } => {
            let recorded = Trace::load(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let report = replay(&recorded, catalog(cli.specs.as_deref())?)?;
            println!("{}", serde_json::to_string(&report)?);
            if let Some(d) = report.divergence {
                let at = d
                    .step
                    .map_or("initial observations".to_string(), |s| format!("step {s}"));
                eprintln!("replay diverged at {at}: {}", d.what);
                return Ok(ExitCode::from(2));
            }
        }
        Command::AtmoTable {
            altitudes,
            angles,
            radius,
            atmosphere_thickness,
        } => {
            atmo_table(
                &altitudes,
                &angles,
                radius,
                atmosphere_thickness,
                &mut io::stdout().lock(),
            )?;
        }
        Command::Specs {
            command: SpecsCommand::Validate { dir },
        } => {
            let dir = dir.or(cli.specs);
            let catalog = catalog(dir.as_deref())?;
            let aircraft: Vec<&str> = catalog.aircraft_names().collect();
            let missiles: Vec<&str> = catalog.missile_names().collect();
            println!(
                "ok: {} aircraft ({}), {} missiles ({})",
                aircraft.len(),
                aircraft.join(", "),
                missiles.len(),
                missiles.join(", ")
            );
        }
        Command::Bench { steps, scenario } => {
            let config = match scenario {
                Some(path) => ScenarioConfig::load(path)?,
                None => ScenarioConfig::navigation(0, dogfight_core::scenario::Controller::External),
            };
            let mut env = Env::new(config.clone(), catalog(cli.specs.as_deref())?, RunMode::Synchronous)?;
            let mut policy = Policy::new(PolicyKind::Neutral, &config, 0);
            env.reset(None);
            let start = Instant::now();
            for step in 0..steps {
                if env.is_finished() {
                    env.reset(None);
                }
                env.step(&policy.actions(step, &[]))?;
            }
            let elapsed = start.elapsed().as_secs_f64();
            if elapsed <= 0.0 {
                bail!("too few steps to time");
            }
            println!("{steps} steps in {elapsed:.3} s: {:.0} steps/s", steps as f64 / elapsed);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn atmo_table(altitudes: &[f64], angles: &[f64], radius: f64, thickness: f64, out: &mut impl Write) -> Result<()> {
    let palette = AtmoPalette::default();
    writeln!(
        out,
        "altitude_m,alpha_deg,ratio,planar_m,spherical_m,blended_m,horizon_angle_rad,atmosphere_angle_rad,f,space_r,space_g,space_b"
    )?;
    let cell = |r: Result<f64, _>| r.map(|v| v.to_string()).unwrap_or_default();
    for &h in altitudes {
        let f = parametric_altitude(h, thickness);
        let [cr, cg, cb] = space_color(f, &palette);
        for &deg in angles {
            let q = HorizonQuery {
                h,
                r: radius,
                alpha: deg.to_radians(),
                atmosphere_thickness: thickness,
            };
            q.validate().with_context(|| format!("altitude {h}, angle {deg}"))?;
            writeln!(
                out,
                "{h},{deg},{},{},{},{},{},{},{f},{cr},{cg},{cb}",
                q.ratio(),
                cell(planar_distance(&q)),
                cell(spherical_distance(&q)),
                cell(blended_distance(&q)),
                horizon_angle(h, radius),
                atmosphere_angle(h, radius, thickness),
            )?;
        }
    }
    Ok(())
}
