//! `qimage`: run, scan, sweep and compare coincidence-imaging scenarios.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qimage::biphoton::{Axis, CoincidenceProfile, Role, ScanSpec};
use qimage::compare::compare_profiles;
use qimage::counting::write_sweep_csv;
use qimage::paraxial::{design_telescope, TelescopeRequest};
use qimage::run::{run, scan_scenario, sweep_distance, SweepOptions};
use qimage::scenario::{parse_scenario, preset, Scenario, TwinSide, PRESET_NAMES, SCHEMA_JSON};
use qimage::Error;

const DEFAULT_OUT_DIR: &str = "qimage-out";

#[derive(Parser)]
#[command(
    name = "qimage",
    version,
    about = "Coincidence imaging through a two-photon source"
)]
struct Cli {
    /// Counting RNG seed; overrides the scenario's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory; each scenario writes into a subdirectory.
    #[arg(long, global = true, env = "QIMAGE_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Grid points per side; overrides the scenario's.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Grid pitch in micrometers; overrides the scenario's.
    #[arg(long, global = true)]
    pitch_um: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: profile, counts, 2-D map and report.
    Run {
        /// Scenario file or preset name.
        scenario: String,
    },
    /// Calibrated deterministic profile for a custom detector scan.
    Scan {
        scenario: String,
        #[arg(long, value_parser = parse_role)]
        moving: Option<Role>,
        #[arg(long, value_parser = parse_axis)]
        axis: Option<Axis>,
        #[arg(long)]
        start_m: Option<f64>,
        #[arg(long)]
        stop_m: Option<f64>,
        #[arg(long)]
        step_m: Option<f64>,
    },
    /// Peak rate and SNR versus crystal-to-detector distance.
    Sweep(SweepArgs),
    /// Designs the twin-side relay and prints the plan with a scenario snippet.
    DesignTelescope {
        #[arg(long)]
        total_m: f64,
        #[arg(long, allow_hyphen_values = true)]
        magnification: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.15, 0.25, 0.5])]
        catalog_m: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        object_offset_m: f64,
    },
    /// Correlation and width ratio of two profile CSVs.
    Compare { a: PathBuf, b: PathBuf },
    /// Prints the scenario JSON schema.
    Schema,
}

#[derive(Args)]
struct SweepArgs {
    scenario: String,
    /// Insert a designed relay at each distance.
    #[arg(long, conflicts_with = "free", required_unless_present = "free")]
    collimated: bool,
    /// Bare free space behind the crystal.
    #[arg(long)]
    free: bool,
    #[arg(long, value_delimiter = ',', required = true)]
    distances_m: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    catalog_m: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    magnification: Option<f64>,
    #[arg(long)]
    aperture_radius_m: Option<f64>,
}

fn parse_role(s: &str) -> Result<Role, String> {
    match s {
        "signal" => Ok(Role::Signal),
        "idler" => Ok(Role::Idler),
        _ => Err(format!("expected `signal` or `idler`, got `{s}`")),
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        _ => Err(format!("expected `x` or `y`, got `{s}`")),
    }
}

/// A path to a scenario document, or a preset name.
fn load(arg: &str) -> Result<Scenario, Error> {
    let path = Path::new(arg);
    if path.is_file() {
        return parse_scenario(&fs::read_to_string(path)?);
    }
    if PRESET_NAMES.contains(&arg) {
        return preset(arg);
    }
    Err(Error::Io(io::Error::new(
        io::ErrorKind::NotFound,
        format!(
            "`{arg}` is neither a scenario file nor a preset ({})",
            PRESET_NAMES.join(", ")
        ),
    )))
}

impl Cli {
    fn scenario(&self, arg: &str) -> Result<Scenario, Error> {
        let mut s = load(arg)?;
        if let Some(seed) = self.seed {
            s.counting.seed = seed;
        }
        if let Some(n) = self.grid_n {
            s.grid.n = n;
        }
        if let Some(p) = self.pitch_um {
            s.grid.pitch_m = p * 1e-6;
        }
        s.validate()?;
        Ok(s)
    }
}

fn write_stdout(text: &str) -> Result<(), Error> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run { scenario } => {
            let s = cli.scenario(scenario)?;
            let root = cli
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            let dir = root.join(&s.name);
            let report = run(&s, Some(&dir))?;
            eprintln!("wrote {}", dir.display());
            write_stdout(&pretty(&report)?)
        }
        Command::Scan {
            scenario,
            moving,
            axis,
            start_m,
            stop_m,
            step_m,
        } => {
            let s = cli.scenario(scenario)?;
            let scan = ScanSpec {
                moving: moving.unwrap_or(s.scan.moving),
                axis: axis.unwrap_or(s.scan.axis),
                start_m: start_m.unwrap_or(s.scan.start_m),
                stop_m: stop_m.unwrap_or(s.scan.stop_m),
                step_m: step_m.unwrap_or(s.scan.step_m),
            };
            let profile = scan_scenario(&s, &scan)?;
            let mut buf = Vec::new();
            profile.write_csv(&mut buf)?;
            if let Some(root) = &cli.out_dir {
                let dir = root.join(&s.name);
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("scan.csv"), &buf)?;
            }
            write_stdout(&String::from_utf8_lossy(&buf))
        }
        Command::Sweep(a) => {
            let s = cli.scenario(&a.scenario)?;
            let defaults = SweepOptions::default();
            let opts = SweepOptions {
                catalog_m: a.catalog_m.clone().unwrap_or(defaults.catalog_m),
                target_magnification: a.magnification.unwrap_or(defaults.target_magnification),
                aperture_radius_m: a.aperture_radius_m.unwrap_or(defaults.aperture_radius_m),
            };
            let rows = sweep_distance(&s, &a.distances_m, a.collimated, &opts)?;
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf)?;
            if let Some(root) = &cli.out_dir {
                let dir = root.join(&s.name);
                fs::create_dir_all(&dir)?;
                let name = if a.collimated {
                    "sweep_collimated.csv"
                } else {
                    "sweep_free.csv"
                };
                fs::write(dir.join(name), &buf)?;
            }
            write_stdout(&String::from_utf8_lossy(&buf))
        }
        Command::DesignTelescope {
            total_m,
            magnification,
            catalog_m,
            object_offset_m,
        } => {
            let plan = design_telescope(&TelescopeRequest {
                total_distance_m: *total_m,
                target_magnification: *magnification,
                catalog_m: catalog_m.clone(),
                object_offset_m: *object_offset_m,
            })?;
            let out = json!({
                "plan": plan,
                "twin_side": TwinSide::from_plan(&plan),
            });
            write_stdout(&pretty(&out)?)
        }
        Command::Compare { a, b } => {
            let read = |p: &Path| -> Result<CoincidenceProfile, Error> {
                CoincidenceProfile::read_csv(BufReader::new(fs::File::open(p)?))
            };
            let c = compare_profiles(&read(a)?, &read(b)?)?;
            write_stdout(&pretty(&c)?)
        }
        Command::Schema => write_stdout(SCHEMA_JSON),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else if matches!(e.root(), Error::Io(_)) {
        1
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
