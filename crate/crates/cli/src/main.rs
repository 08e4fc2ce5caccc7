//! `tapeslicer` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 planning violation, 4 mechanics
//! or placement failure, 5 control protocol violation. Errors are printed to
//! stderr as a single JSON object. Every command writes `<output>.manifest.json`
//! next to its output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use tapeslicer::config::{Catalog, DEFAULT_SUBSTRATE, DEFAULT_TAPE};
use tapeslicer::controlsync::{feed_deficit, run_timeline, LatencyModel};
use tapeslicer::geometry::Design;
use tapeslicer::metrics::{batch_report, metrics_table_csv, QualityReport, TableRow};
use tapeslicer::planner::{plan, Mode, MotionProgram, PlanParams, RobotLimits};
use tapeslicer::render::{render_outcome, render_program, DEFAULT_EXAGGERATION};
use tapeslicer::simulator::{batch_simulate, NoiseModel, PlacementOutcome};
use tapeslicer::Error;

#[derive(Parser)]
#[command(name = "tapeslicer", version, about = "Tape-aware toolpath compiler and placement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cartesian,
    Compaction,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a design into a motion program.
    Plan {
        design: PathBuf,
        #[arg(long, default_value = DEFAULT_TAPE)]
        tape: String,
        #[arg(long, default_value = DEFAULT_SUBSTRATE)]
        substrate: String,
        #[arg(long, value_enum, default_value = "cartesian")]
        mode: ModeArg,
        /// Laying speed, m/s.
        #[arg(long)]
        speed: Option<f64>,
        /// Compaction force, N.
        #[arg(long)]
        force: Option<f64>,
        /// Overhang anchor length, m.
        #[arg(long)]
        anchor_length: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate placement of a program and report quality metrics.
    Simulate {
        program: PathBuf,
        /// `default`, `zero`, or a path to a noise JSON file.
        #[arg(long, default_value = "default")]
        noise: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-sample profiles of the first outcome as CSV.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tabulate quality metrics of a simulation result as CSV.
    Metrics {
        outcomes: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render a program or simulation result as SVG.
    Render {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EXAGGERATION)]
        exaggeration: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate robot/feeder synchronisation and report feed deficits.
    Sync {
        program: PathBuf,
        /// Fixed I/O delay, s.
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        /// Jitter standard deviation, s.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

const RESULT_SCHEMA_VERSION: u32 = 1;

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::CurvatureViolation { .. }
            | Error::JointLimitViolation { .. }
            | Error::WorkspaceViolation { .. }
            | Error::OutOfDomain { .. }
            | Error::ExcessiveDistortion { .. } => 3,
            Error::InfeasibleAnchor { .. } | Error::PlacementFailure { .. } => 4,
            Error::ProtocolViolation { .. } => 5,
            _ => 2,
        };
        Failure {
            code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

fn input_error(message: String) -> Failure {
    Failure {
        code: 2,
        kind: "invalid-input".into(),
        message,
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    inputs: Vec<ManifestInput>,
    /// Options that affect the output.
    options: Value,
    config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    tool: String,
    version: String,
    /// Unix time, s.
    started: u64,
    finished: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Run {
    command: &'static str,
    inputs: Vec<ManifestInput>,
    options: Value,
    seed: Option<u64>,
    started: u64,
}

impl Run {
    fn new(command: &'static str, options: Value) -> Run {
        Run {
            command,
            inputs: Vec::new(),
            options,
            seed: None,
            started: unix_now(),
        }
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let text = read(path)?;
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            sha256: sha256(text.as_bytes()),
        });
        Ok(text)
    }

    fn finish(self, output: &Path, catalog: &Catalog) -> Result<(), Failure> {
        let manifest = RunManifest {
            command: self.command.into(),
            inputs: self.inputs,
            options: self.options,
            config_hash: catalog.config_hash(),
            seed: self.seed,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started: self.started,
            finished: unix_now(),
        };
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write(Path::new(&name), &(body + "\n"))
    }
}

fn load_program(text: &str) -> Result<MotionProgram, Failure> {
    Ok(MotionProgram::from_json(text)?)
}

#[derive(Serialize, serde::Deserialize)]
struct SimulationResult {
    schema_version: u32,
    calibration_version: String,
    substrate: String,
    outcomes: Vec<PlacementOutcome>,
    reports: Vec<QualityReport>,
}

fn cmd_plan(
    catalog: &Catalog,
    design_path: &Path,
    tape: &str,
    substrate: &str,
    params: PlanParams,
    output: &Path,
) -> Result<(), Failure> {
    let mut run = Run::new(
        "plan",
        json!({"tape": tape, "substrate": substrate, "params": params}),
    );
    let design = Design::from_json(&run.read(design_path)?)?;
    let program = plan(
        &design,
        catalog.tape(tape)?,
        catalog.substrate(substrate)?,
        &params,
        &RobotLimits::default(),
    )?;
    write(output, &program.to_json())?;
    run.finish(output, catalog)
}

fn resolve_noise(catalog: &Catalog, spec: &str, run: &mut Run) -> Result<(NoiseModel, String), Failure> {
    match spec {
        "default" => Ok((catalog.default_noise().clone(), catalog.noise.calibration_version.clone())),
        "zero" => Ok((NoiseModel::zero(), "zero".into())),
        path => {
            let text = run.read(Path::new(path))?;
            let file: tapeslicer::config::NoiseFile =
                serde_json::from_str(&text).map_err(|e| input_error(format!("{path}: {e}")))?;
            file.model.validate()?;
            Ok((file.model, file.calibration_version))
        }
    }
}

fn cmd_simulate(
    catalog: &Catalog,
    program_path: &Path,
    noise_spec: &str,
    n: usize,
    seed: Option<u64>,
    profiles: Option<&Path>,
    output: &Path,
) -> Result<(), Failure> {
    let mut run = Run::new("simulate", json!({"noise": noise_spec, "n": n}));
    let program = load_program(&run.read(program_path)?)?;
    let (mut noise, calibration_version) = resolve_noise(catalog, noise_spec, &mut run)?;
    if let Some(s) = seed {
        noise.seed = s;
    }
    run.seed = Some(noise.seed);
    let tape = catalog.tape(&program.tape_ref)?;
    let substrate = catalog.substrate(&program.substrate_ref)?;
    let outcomes = batch_simulate(&program, tape, substrate, &noise, n)?;
    let reports = batch_report(&outcomes)?;
    if let Some(p) = profiles {
        write(p, &outcomes[0].profiles_csv()?)?;
    }
    let result = SimulationResult {
        schema_version: RESULT_SCHEMA_VERSION,
        calibration_version,
        substrate: program.substrate_ref.clone(),
        outcomes,
        reports,
    };
    write(output, &serde_json::to_string_pretty(&result).expect("result serializes"))?;
    run.finish(output, catalog)
}

fn load_result(text: &str) -> Result<SimulationResult, Failure> {
    serde_json::from_str(text).map_err(|e| input_error(format!("simulation result JSON: {e}")))
}

fn cmd_metrics(catalog: &Catalog, path: &Path, output: &Path) -> Result<(), Failure> {
    let mut run = Run::new("metrics", json!({}));
    let result = load_result(&run.read(path)?)?;
    let first = result
        .outcomes
        .first()
        .ok_or_else(|| input_error("simulation result has no outcomes".into()))?;
    let rows: Vec<TableRow> = result
        .reports
        .iter()
        .zip(&first.features)
        .map(|(report, f)| TableRow {
            substrate: result.substrate.clone(),
            length: f.planned_length,
            report: report.clone(),
        })
        .collect();
    write(output, &metrics_table_csv(&rows)?)?;
    run.finish(output, catalog)
}

fn cmd_render(catalog: &Catalog, path: &Path, exaggeration: f64, output: &Path) -> Result<(), Failure> {
    let mut run = Run::new("render", json!({"exaggeration": exaggeration}));
    let text = run.read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let svg = if value.get("steps").is_some() {
        let program = load_program(&text)?;
        render_program(&program, catalog.tape(&program.tape_ref)?.width)
    } else if value.get("outcomes").is_some() {
        let result = load_result(&text)?;
        let first = result
            .outcomes
            .first()
            .ok_or_else(|| input_error("simulation result has no outcomes".into()))?;
        render_outcome(first, exaggeration)
    } else {
        return Err(input_error(format!(
            "{}: neither a motion program nor a simulation result",
            path.display()
        )));
    };
    write(output, &svg)?;
    run.finish(output, catalog)
}

fn cmd_sync(catalog: &Catalog, path: &Path, latency: LatencyModel, output: &Path) -> Result<(), Failure> {
    let mut run = Run::new("sync", json!({"latency": latency}));
    run.seed = Some(latency.seed);
    let program = load_program(&run.read(path)?)?;
    let trace = run_timeline(&program, &latency)?;
    let deficits = feed_deficit(&trace, &program)?;
    let table: Vec<Value> = deficits
        .iter()
        .enumerate()
        .map(|(f, d)| json!({"feature": f, "feed_deficit": d}))
        .collect();
    let body = json!({"trace": trace, "feed_deficits": table});
    write(output, &serde_json::to_string_pretty(&body).expect("trace serializes"))?;
    run.finish(output, catalog)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let catalog = Catalog::from_env()?;
    match cli.command {
        Command::Plan {
            design,
            tape,
            substrate,
            mode,
            speed,
            force,
            anchor_length,
            output,
        } => {
            let defaults = PlanParams::default();
            let params = PlanParams {
                mode: match mode {
                    ModeArg::Cartesian => Mode::Cartesian,
                    ModeArg::Compaction => Mode::Compaction,
                },
                speed: speed.unwrap_or(defaults.speed),
                compaction_force: force.unwrap_or(defaults.compaction_force),
                anchor_length: anchor_length.unwrap_or(defaults.anchor_length),
                ..defaults
            };
            cmd_plan(&catalog, &design, &tape, &substrate, params, &output)
        }
        Command::Simulate {
            program,
            noise,
            n,
            seed,
            profiles,
            output,
        } => cmd_simulate(&catalog, &program, &noise, n, seed, profiles.as_deref(), &output),
        Command::Metrics { outcomes, output } => cmd_metrics(&catalog, &outcomes, &output),
        Command::Render {
            input,
            exaggeration,
            output,
        } => cmd_render(&catalog, &input, exaggeration, &output),
        Command::Sync {
            program,
            delay,
            jitter,
            seed,
            output,
        } => cmd_sync(
            &catalog,
            &program,
            LatencyModel {
                fixed_delay: delay,
                jitter_sigma: jitter,
                seed,
            },
            &output,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let report = json!({"error": "invalid-input", "message": e.to_string().trim_end(), "exit_code": 2});
            eprintln!("{report}");
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message, "exit_code": f.code}));
            ExitCode::from(f.code)
        }
    }
}
