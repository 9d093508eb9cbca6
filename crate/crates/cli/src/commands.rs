//! The subcommand implementations behind the CLI surface.
//!
//! Every command resolves its settings (file, then key=value overrides,
//! then dedicated flags), runs the corresponding library operation, and
//! writes CSV behind a comment block that echoes the tool version, command
//! name, and every setting the run used. Re-running a command with that
//! echoed block as the config reproduces the output byte for byte.

use crate::config::Settings;
use georelay::bf::DEFAULT_GRID_POINTS;
use georelay::netsim::{E2eRow, OneHopKind, OneHopRow, OneHopCase};
use georelay::{
    calibrate_threshold, generate_network, run_onehop, sf_averages, solve_threshold, sweep_e2e,
    sweep_onehop, write_averages_csv, write_e2e_csv, write_network_csv, write_onehop_csv, E2eParams,
    E2ePolicy, E2eSimulator, Error, HopContext, Network, OneHopPolicy, ProgressModel, Result,
    ThresholdSurface,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Flags shared by every subcommand; trailing `key=value` arguments form
/// the override layer.
#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Config file of key=value lines (# comments allowed)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed for randomized runs; deterministic commands ignore it
    #[arg(long)]
    pub seed: Option<u64>,

    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Worker threads (0 = all cores); results never depend on this
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,

    /// Settings overriding the config file, e.g. K=5 eta=2
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl RunArgs {
    fn settings(&self, allowed: &[&str]) -> Result<Settings> {
        let mut settings = Settings::load(self.config.as_deref(), &self.overrides, allowed)?;
        if allowed.contains(&"seed") {
            if let Some(seed) = self.seed {
                settings.set_flag("seed", seed);
            }
        }
        Ok(settings)
    }
}

/// Stream index reserved for network generation, away from the one-hop
/// trial streams and the end-to-end transfer streams.
const NETWORK_STREAM: u64 = 1 << 62;

fn cannot_write(path: &Path, e: io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

/// Renders the echo block plus `body` and delivers it to `--out` or stdout.
fn emit(
    out: Option<&Path>,
    command: &str,
    settings: &Settings,
    body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    let render = |buf: &mut Vec<u8>| -> io::Result<()> {
        writeln!(buf, "# georelay {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(buf, "# command: {command}")?;
        for line in settings.echo_lines() {
            writeln!(buf, "{line}")?;
        }
        body(buf)
    };
    render(&mut buf).map_err(|e| Error::Config(format!("render failed: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, &buf).map_err(|e| cannot_write(path, e)),
        None => io::stdout()
            .write_all(&buf)
            .map_err(|e| Error::Config(format!("cannot write stdout: {e}"))),
    }
}

fn build_model(sink_distance: f64, node_count: usize) -> Result<ProgressModel> {
    let ctx = HopContext::new(sink_distance, node_count)?;
    ProgressModel::build(ctx, georelay::geometry::DEFAULT_GRID_CELLS)
}

pub fn solve_bf(args: &RunArgs) -> Result<()> {
    let mut s = args.settings(&["K", "L_i", "eta", "grid_w", "grid_b"])?;
    let node_count: usize = s.get_or("K", 5)?;
    let sink_distance: f64 = s.get_or("L_i", 10.0)?;
    let eta: f64 = s.get_or("eta", 2.0)?;
    let grid_w: usize = s.get_or("grid_w", DEFAULT_GRID_POINTS)?;
    let grid_b: usize = s.get_or("grid_b", DEFAULT_GRID_POINTS)?;

    let model = build_model(sink_distance, node_count)?;
    let surface = georelay::solve_bf(&model, node_count, eta, grid_w, grid_b)?;
    let gap = surface.stage_form_gap(&model);
    emit(args.out.as_deref(), "solve-bf", &s, |buf| {
        surface.export_csv(buf)
    })?;
    match gap {
        Some(gap) => eprintln!(
            "solved {node_count} stages at eta={eta} on {grid_w}x{grid_b}; \
             next-to-last stage within {gap:.3e} of its closed form"
        ),
        None => eprintln!("solved 1 stage at eta={eta} on {grid_w}x{grid_b}"),
    }
    Ok(())
}

pub fn solve_alpha(args: &RunArgs) -> Result<()> {
    let mut s = args.settings(&["K", "L_i", "eta", "gamma"])?;
    let node_count: usize = s.get_or("K", 5)?;
    let sink_distance: f64 = s.get_or("L_i", 10.0)?;
    let gamma: Option<f64> = s.get_opt("gamma")?;
    let model = build_model(sink_distance, node_count)?;

    let (threshold, eta_col, gamma_col) = match gamma {
        Some(target) => {
            if s.get_opt::<f64>("eta")?.is_some() {
                return Err(Error::Config(
                    "give either eta (trade-off solve) or gamma (calibration), not both".into(),
                ));
            }
            let th = calibrate_threshold(&model, node_count, target)?;
            (th, String::new(), target.to_string())
        }
        None => {
            let eta: f64 = s.get_or("eta", 2.0)?;
            let th = solve_threshold(&model, node_count, eta)?;
            (th, eta.to_string(), String::new())
        }
    };
    let averages = sf_averages(&model, node_count, threshold.alpha, None)?;
    emit(args.out.as_deref(), "solve-alpha", &s, |buf| {
        writeln!(buf, "K,L_i,eta,gamma,alpha,eta_o,mean_delay,mean_progress")?;
        writeln!(
            buf,
            "{node_count},{sink_distance},{eta_col},{gamma_col},{},{},{},{}",
            threshold.alpha, threshold.eta_cutoff, averages.mean_delay, averages.mean_progress
        )
    })
}

pub fn onehop(args: &RunArgs) -> Result<()> {
    let mut s = args.settings(&[
        "K", "L_i", "eta", "alpha", "policy", "trials", "grid_w", "grid_b", "surface", "seed",
    ])?;
    let node_count: usize = s.get_or("K", 5)?;
    let sink_distance: f64 = s.get_or("L_i", 10.0)?;
    let eta: f64 = s.get_or("eta", 2.0)?;
    let trials: usize = s.get_or("trials", 100_000)?;
    let seed: u64 = s.get_or("seed", 0)?;
    let policy_name = s.require_str("policy")?;
    let model = build_model(sink_distance, node_count)?;

    let mut surface_box = None;
    let (policy, alpha): (OneHopPolicy, Option<f64>) = match policy_name.as_str() {
        "ff" => (OneHopPolicy::FirstForward, Some(0.0)),
        "mf" => (OneHopPolicy::MaxForward, Some(1.0)),
        "sf" => {
            let alpha = match s.get_opt("alpha")? {
                Some(alpha) => alpha,
                None => solve_threshold(&model, node_count, eta)?.alpha,
            };
            (OneHopPolicy::Threshold(alpha), Some(alpha))
        }
        "bf" => {
            let surface = match s.get_str_opt("surface") {
                Some(path) => {
                    let file = std::fs::File::open(&path).map_err(|e| {
                        Error::Config(format!("cannot read surface {path}: {e}"))
                    })?;
                    let surface = ThresholdSurface::import_csv(io::BufReader::new(file))?;
                    if (surface.eta() - eta).abs() > 1e-12 {
                        return Err(Error::Config(format!(
                            "surface was solved at eta={}, run asks for eta={eta}",
                            surface.eta()
                        )));
                    }
                    surface
                }
                None => {
                    let grid_w: usize = s.get_or("grid_w", DEFAULT_GRID_POINTS)?;
                    let grid_b: usize = s.get_or("grid_b", DEFAULT_GRID_POINTS)?;
                    georelay::solve_bf(&model, node_count, eta, grid_w, grid_b)?
                }
            };
            (
                OneHopPolicy::Surface(surface_box.insert(surface)),
                None,
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown policy {other}; expected ff, mf, sf, or bf"
            )))
        }
    };

    let stats = run_onehop(&policy, &model, node_count, eta, trials, seed)?;
    let row = OneHopRow {
        policy: policy_name,
        node_count,
        sink_distance,
        eta,
        alpha,
        stats,
    };
    emit(args.out.as_deref(), "onehop", &s, |buf| {
        write_onehop_csv(buf, std::slice::from_ref(&row))
    })
}

pub fn analytics(args: &RunArgs) -> Result<()> {
    let mut s = args.settings(&["K", "L_i", "alphas", "eta"])?;
    let node_count: usize = s.get_or("K", 5)?;
    let sink_distance: f64 = s.get_or("L_i", 10.0)?;
    let eta: Option<f64> = s.get_opt("eta")?;
    let alphas = s.grid("alphas", "0:1:11")?;
    let model = build_model(sink_distance, node_count)?;
    let rows = alphas
        .iter()
        .map(|&alpha| sf_averages(&model, node_count, alpha, eta))
        .collect::<Result<Vec<_>>>()?;
    emit(args.out.as_deref(), "analytics", &s, |buf| {
        write_averages_csv(buf, &rows)
    })
}

fn parse_e2e_policy(name: &str, gamma: Option<f64>) -> Result<E2ePolicy> {
    match name {
        "ff" => Ok(E2ePolicy::FirstForward),
        "mf" => Ok(E2ePolicy::MaxForward),
        "sf" | "sfhat" => {
            let target = gamma.ok_or_else(|| {
                Error::Config(format!("policy {name} needs a gamma target"))
            })?;
            Ok(if name == "sf" {
                E2ePolicy::Calibrated { target }
            } else {
                E2ePolicy::CalibratedEstimate { target }
            })
        }
        other => Err(Error::Config(format!(
            "unknown policy {other}; expected ff, mf, sf, or sfhat"
        ))),
    }
}

struct NetworkSetup {
    net: Network,
    sim: E2eSimulator,
    seed: u64,
}

/// Reads the deployment and protocol keys shared by `e2e` and the e2e
/// sweep, generates the network (its own random stream, so the same seed
/// gives the same network whatever runs on it), and writes the optional
/// snapshot.
fn network_setup(s: &mut Settings) -> Result<NetworkSetup> {
    let side: f64 = s.get_or("L", 10.0)?;
    let density: f64 = s.get_or("lambda", 5.0)?;
    let radio_range: f64 = s.get_or("r_c", 1.0)?;
    let wake_period: f64 = s.get_or("T", 1.0)?;
    let beacon: f64 = s.get_or("t_I", 0.005)?;
    let packet: f64 = s.get_or("t_D", 0.030)?;
    let retries: usize = s.get_or("retries", 1000)?;
    let seed: u64 = s.get_or("seed", 0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NETWORK_STREAM);
    let net = generate_network(side, density, radio_range, retries, &mut rng)?;
    if let Some(path) = s.get_str_opt("network_out") {
        let mut buf = Vec::new();
        write_network_csv(&mut buf, &net)
            .map_err(|e| Error::Config(format!("render failed: {e}")))?;
        std::fs::write(&path, &buf).map_err(|e| cannot_write(Path::new(&path), e))?;
    }
    let sim = E2eSimulator::new(E2eParams {
        wake_period,
        beacon,
        packet,
    })?;
    Ok(NetworkSetup { net, sim, seed })
}

pub fn e2e(args: &RunArgs) -> Result<()> {
    let mut s = args.settings(&[
        "L",
        "lambda",
        "r_c",
        "T",
        "t_I",
        "t_D",
        "transfers",
        "policy",
        "gamma",
        "retries",
        "network_out",
        "seed",
    ])?;
    let transfers: usize = s.get_or("transfers", 1000)?;
    let policy_name = s.require_str("policy")?;
    let gamma: Option<f64> = s.get_opt("gamma")?;
    let policy = parse_e2e_policy(&policy_name, gamma)?;
    let setup = network_setup(&mut s)?;

    let stats = setup.sim.run(&setup.net, policy, transfers, setup.seed)?;
    let row = E2eRow {
        policy: policy.tag().into(),
        gamma: policy.target(),
        side: setup.net.side,
        density: setup.net.density,
        stats,
    };
    emit(args.out.as_deref(), "e2e", &s, |buf| {
        write_e2e_csv(buf, std::slice::from_ref(&row))
    })
}

fn parse_onehop_kind(name: &str) -> Result<OneHopKind> {
    match name {
        "bf" => Ok(OneHopKind::Bf),
        "sf" => Ok(OneHopKind::Sf),
        "ff" => Ok(OneHopKind::Ff),
        "mf" => Ok(OneHopKind::Mf),
        other => Err(Error::Config(format!(
            "unknown policy {other}; expected ff, mf, sf, or bf"
        ))),
    }
}

pub fn sweep(args: &RunArgs) -> Result<()> {
    let mut probe = args.settings(&[
        "kind",
        "K",
        "L_i",
        "etas",
        "policies",
        "trials",
        "grid",
        "L",
        "lambda",
        "r_c",
        "T",
        "t_I",
        "t_D",
        "transfers",
        "gammas",
        "retries",
        "network_out",
        "seed",
    ])?;
    match probe.require_str("kind")?.as_str() {
        "onehop" => sweep_onehop_cmd(args, &mut probe),
        "e2e" => sweep_e2e_cmd(args, &mut probe),
        other => Err(Error::Config(format!(
            "unknown sweep kind {other}; expected onehop or e2e"
        ))),
    }
}

fn sweep_onehop_cmd(args: &RunArgs, s: &mut Settings) -> Result<()> {
    let node_count: usize = s.get_or("K", 5)?;
    let sink_distance: f64 = s.get_or("L_i", 10.0)?;
    let trials: usize = s.get_or("trials", 100_000)?;
    let grid_points: usize = s.get_or("grid", DEFAULT_GRID_POINTS)?;
    let seed: u64 = s.get_or("seed", 0)?;
    let etas = s.grid("etas", "1,2,5")?;
    let policies = s.word_list("policies", "bf,sf,ff,mf")?;

    let mut cases = Vec::new();
    for &eta in &etas {
        for name in &policies {
            cases.push(OneHopCase {
                kind: parse_onehop_kind(name)?,
                eta,
            });
        }
    }
    let model = build_model(sink_distance, node_count)?;
    let rows = sweep_onehop(&model, node_count, &cases, trials, grid_points, seed)?;
    emit(args.out.as_deref(), "sweep", s, |buf| {
        write_onehop_csv(buf, &rows)
    })
}

fn sweep_e2e_cmd(args: &RunArgs, s: &mut Settings) -> Result<()> {
    let transfers: usize = s.get_or("transfers", 1000)?;
    let gammas = s.grid("gammas", "0.5,0.6,0.7,0.8")?;
    let policies = s.word_list("policies", "ff,sf,sfhat,mf")?;

    let mut runs = Vec::new();
    for name in &policies {
        match name.as_str() {
            "ff" => runs.push(E2ePolicy::FirstForward),
            "mf" => runs.push(E2ePolicy::MaxForward),
            "sf" => {
                runs.extend(gammas.iter().map(|&g| E2ePolicy::Calibrated { target: g }))
            }
            "sfhat" => runs.extend(
                gammas
                    .iter()
                    .map(|&g| E2ePolicy::CalibratedEstimate { target: g }),
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown policy {other}; expected ff, mf, sf, or sfhat"
                )))
            }
        }
    }
    let setup = network_setup(s)?;
    let rows = sweep_e2e(&setup.sim, &setup.net, &runs, transfers, setup.seed)?;
    emit(args.out.as_deref(), "sweep", s, |buf| {
        write_e2e_csv(buf, &rows)
    })
}
