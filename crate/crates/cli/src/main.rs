//! `holoidet` command-line front end.
//!
//! Exit codes: 0 success, 1 error (bad arguments, unreadable scenario,
//! solver failure), 2 rate floor infeasible.

use clap::{Args, Parser, Subcommand};
use holoidet_core::harness::sweep::{sha256_hex, FIGURES};
use holoidet_core::harness::{experiment, prepare, run_orientation, run_protocol, run_sensing, trial_channel, trial_seed, Manifest, Scenario, SchemeId};
use holoidet_core::rhs::{gain_profile, EmParams};
use holoidet_core::sensing::rmse;
use holoidet_core::{Error, Vec3};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "holoidet", version, about = "Holographic-surface sensing, orientation and IDET beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file (.json or .toml); defaults are used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Master seed (overrides the scenario).
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count (overrides the scenario).
    #[arg(long)]
    trials: Option<usize>,
    /// Scheme (overrides the scenario).
    #[arg(long)]
    scheme: Option<SchemeId>,
    /// Start from the 32×32, 50-slot configuration instead of the desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct Single {
    #[command(flatten)]
    common: Common,
    /// Trial index under the master seed.
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Uplink sensing for one trial; writes estimates.json.
    Sense(Single),
    /// Sensing plus surface orientation for one trial; writes orientation.json.
    Orient(Single),
    /// Full three-stage protocol for one trial; writes transmit.json.
    Transmit(Single),
    /// Regenerates figure data; writes fig<N>.csv and fig<N>_manifest.json.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Figure number (4-10) or "all".
        #[arg(long, required_unless_present = "manifest")]
        fig: Option<String>,
        /// Rerun from a manifest and check the CSV hash.
        #[arg(long, conflicts_with = "fig")]
        manifest: Option<PathBuf>,
    },
    /// Beamforming gain over the front hemisphere of the designed surface; writes gainmap.csv.
    Gainmap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 72)]
        n_theta: usize,
        #[arg(long, default_value_t = 19)]
        n_phi: usize,
    },
}

enum Failure {
    Error(String),
    Infeasible(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Error(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn scenario(c: &Common) -> std::result::Result<Scenario, Failure> {
    let mut s = match &c.scenario {
        Some(p) => Scenario::load(p)?,
        None if c.paper_scale => Scenario::paper_scale(),
        None => Scenario::default(),
    };
    if c.paper_scale && c.scenario.is_some() {
        let p = Scenario::paper_scale();
        s.mx = p.mx;
        s.my = p.my;
        s.slots = p.slots;
    }
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(t) = c.trials {
        s.trials = t;
    }
    if let Some(k) = c.scheme {
        s.scheme = k;
    }
    s.validate()?;
    Ok(s)
}

fn write(dir: &Path, name: &str, body: &str) -> std::result::Result<PathBuf, Failure> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

#[derive(Serialize)]
struct SenseReport<'a> {
    scheme: SchemeId,
    master_seed: u64,
    trial: usize,
    seed: u64,
    estimates: &'a [Vec3],
    truths: &'a [Vec3],
    rmse: f64,
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Sense(a) => {
            let s = scenario(&a.common)?;
            let prep = prepare(&s)?;
            let seed = trial_seed(s.seed, a.trial);
            let ch = trial_channel(&s, seed)?;
            let (est, truth) = run_sensing(&s, &prep, s.scheme, &ch, seed)?;
            let r = rmse(&est, &truth)?;
            let rep = SenseReport { scheme: s.scheme, master_seed: s.seed, trial: a.trial, seed, estimates: &est, truths: &truth, rmse: r };
            let p = write(&a.common.out, "estimates.json", &json(&rep))?;
            println!("{} receivers sensed, rmse {r:.3e} -> {}", est.len(), p.display());
        }
        Command::Orient(a) => {
            let s = scenario(&a.common)?;
            let prep = prepare(&s)?;
            let seed = trial_seed(s.seed, a.trial);
            let o = run_orientation(&s, &prep, s.scheme, seed)?;
            let body = serde_json::json!({
                "scheme": s.scheme,
                "seed": seed,
                "estimates": o.estimates,
                "assignment": o.assignment,
                "sensing_rmse": o.sensing_rmse,
                "orientation": o.orientation,
            });
            let p = write(&a.common.out, "orientation.json", &json(&body))?;
            println!("objective {:.4e} after {} outer iterations -> {}", o.orientation.objective, o.orientation.outer_iterations, p.display());
        }
        Command::Transmit(a) => {
            let s = scenario(&a.common)?;
            let prep = prepare(&s)?;
            let seed = trial_seed(s.seed, a.trial);
            let t = run_protocol(&s, &prep, s.scheme, seed)?;
            let p = write(&a.common.out, "transmit.json", &json(&t))?;
            println!("min P_EH {:.4e} W, min rate {:.3} bit/s/Hz -> {}", t.metrics.min_eh, t.metrics.min_rate, p.display());
            if !t.metrics.feasible {
                return Err(Failure::Infeasible(format!(
                    "rate floor {} bit/s/Hz unreachable; best min rate {:.3}",
                    s.r0, t.metrics.min_rate
                )));
            }
        }
        Command::Experiment { common, fig, manifest } => {
            if let Some(mp) = manifest {
                let text = fs::read_to_string(&mp).map_err(|e| Failure::Error(format!("{}: {e}", mp.display())))?;
                let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Error(format!("{}: {e}", mp.display())))?;
                let out = experiment(m.figure, &m.scenario)?;
                let p = write(&common.out, &m.csv_file, &out.csv)?;
                if sha256_hex(out.csv.as_bytes()) != m.csv_sha256 {
                    return Err(Failure::Error(format!("{} does not match the manifest hash", p.display())));
                }
                println!("{} reproduced ({} rows) -> {}", m.experiment, out.records.len(), p.display());
                return Ok(());
            }
            let s = scenario(&common)?;
            let fig = fig.expect("clap enforces --fig");
            let figs: Vec<u32> = if fig == "all" {
                FIGURES.to_vec()
            } else {
                vec![fig.parse().map_err(|_| Failure::Error(format!("--fig expects 4-10 or all, got {fig}")))?]
            };
            for f in figs {
                let out = experiment(f, &s)?;
                let csv = write(&common.out, &out.manifest.csv_file, &out.csv)?;
                write(&common.out, &format!("fig{f}_manifest.json"), &json(&out.manifest))?;
                println!("fig{f}: {} rows -> {}", out.records.len(), csv.display());
            }
        }
        Command::Gainmap { common, n_theta, n_phi } => {
            let s = scenario(&common)?;
            let prep = prepare(&s)?;
            let params = EmParams { efficiency: s.efficiency, refractive: s.refractive, wavelength: s.wavelength() };
            let w = vec![1.0 / s.feeds as f64; s.feeds];
            let g = gain_profile(&prep.layout, &w, &params, n_theta, n_phi);
            let mut body = String::from("theta_deg,phi_deg,gain\n");
            for (t, p, v) in &g.samples {
                body.push_str(&format!("{},{},{}\n", t.to_degrees(), p.to_degrees(), v));
            }
            let p = write(&common.out, "gainmap.csv", &body)?;
            let u = prep.max_gain_dir;
            println!(
                "max-gain direction [{:.3}, {:.3}, {:.3}], anisotropy {:.2} -> {}",
                u.x,
                u.y,
                u.z,
                g.anisotropy(),
                p.display()
            );
        }
    }
    Ok(())
}
