//! `qinterv`: command-line front end for quantum-intervention.
//!
//! Exit status is 0 on success, 2 when an input fails validation and 3
//! when a numerical contract breaks (positivity loss, step too large,
//! failed completion, conditioning on an impossible branch).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use quantum_intervention::decoherence::{scaling_scan, EnvironmentMode};
use quantum_intervention::dilation::{
    complete_to_unitary, isometry_from_kraus, kraus_from_povm, premeasure,
};
use quantum_intervention::intervention::{
    apply_nonselective, apply_selective, check_refinement, compose, outcome_probabilities,
};
use quantum_intervention::io::{
    csv_field, format_sig6, parse_adaptive, parse_measurement, parse_state, to_json,
    MeasurementFile, StateFile,
};
use quantum_intervention::lindblad::{
    compare_limit, trajectory, LindbladGenerator, DEFAULT_DT_FINE,
};
use quantum_intervention::scenario::{bundled_json, bundled_names, parse_scenario, Scenario};
use quantum_intervention::{AdaptiveIntervention, DensityMatrix, Error, Intervention, Stream};

#[derive(Parser)]
#[command(
    name = "qinterv",
    version,
    about = "Generalized quantum measurement toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply an intervention to a state: conditional states and the
    /// non-selective result.
    Apply(StateArgs),
    /// Outcome probabilities as CSV.
    Probs(StateArgs),
    /// Sequential composition: the second --in runs after the first.
    Compose(PairArgs),
    /// Check that the second --in refines the first.
    RefineCheck(PairArgs),
    /// POVM or Kraus file to Kraus matrices, isometry and unitary.
    Dilate(InArgs),
    /// Premeasurement of a pure state with the isometric dilation.
    Premeasure(StateArgs),
    /// RMS environment overlap against environment dimension.
    DecohereScan(ScanArgs),
    /// Integrate a Lindblad generator and compare with discrete steps.
    Lindblad(LindbladArgs),
    /// Monte-Carlo measurement records of a scenario.
    Sample(SampleArgs),
    /// Validate a file of any supported kind.
    Validate(InArgs),
}

#[derive(Args)]
struct Output {
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InArgs {
    /// Input file, or `bundled:NAME` for a bundled scenario.
    #[arg(long = "in")]
    input: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct StateArgs {
    /// Intervention, POVM or scenario file, or `bundled:NAME`.
    #[arg(long = "in")]
    input: String,
    /// State file; defaults to the scenario's initial state.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct PairArgs {
    /// First-stage intervention, then the second stage (plain or adaptive).
    #[arg(long = "in", num_args = 1, required = true)]
    inputs: Vec<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Pure,
    Mixed,
}

#[derive(Args)]
struct ScanArgs {
    /// Comma-separated environment dimensions.
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024,4096")]
    env_dims: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_enum, default_value = "pure")]
    mode: Mode,
    #[arg(long, default_value_t = 2)]
    outcomes: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LindbladArgs {
    /// Generator file `{"dim", "H0", "jumps"}`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = DEFAULT_DT_FINE)]
    dt: f64,
    /// Record every n-th integrator step.
    #[arg(long, default_value_t = 1)]
    every: usize,
    /// Comma-separated coarse steps for the discrete comparison.
    #[arg(long, value_delimiter = ',')]
    delta_t: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SampleArgs {
    /// Scenario file or `bundled:NAME`.
    #[arg(long = "in")]
    input: String,
    /// Overrides the scenario's shot count.
    #[arg(long)]
    shots: Option<u64>,
    /// Overrides the scenario's seed. One of the two must be given.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

struct Failure {
    code: &'static str,
    message: String,
    status: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.code(),
            message: e.to_string(),
            status: if e.is_numerical() { 3 } else { 2 },
        }
    }
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: "io",
            message: format!("{}: {e}", path.display()),
            status: 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Raw bytes plus the directory used to resolve file references.
fn read_input(spec: &str) -> CliResult<(Vec<u8>, Option<PathBuf>)> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        return bundled_json(name)
            .map(|s| (s.as_bytes().to_vec(), None))
            .ok_or_else(|| {
                Failure::from(Error::InvalidArgument(format!(
                    "unknown bundled scenario {name:?}; available: {}",
                    bundled_names().collect::<Vec<_>>().join(", ")
                )))
            });
    }
    let path = Path::new(spec);
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok((
        bytes,
        Some(path.parent().unwrap_or(Path::new(".")).to_path_buf()),
    ))
}

fn keys(bytes: &[u8]) -> CliResult<serde_json::Map<String, Value>> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Error::Parse("expected a JSON object".into()).into()),
        Err(e) => Err(Error::Parse(e.to_string()).into()),
    }
}

enum Loaded {
    Scenario(Scenario),
    Measurement(MeasurementFile),
}

fn load(spec: &str) -> CliResult<Loaded> {
    let (bytes, base) = read_input(spec)?;
    if keys(&bytes)?.contains_key("stages") {
        Ok(Loaded::Scenario(parse_scenario(&bytes, base.as_deref())?))
    } else {
        Ok(Loaded::Measurement(parse_measurement(&bytes)?))
    }
}

fn load_state(path: &Path) -> CliResult<StateFile> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(parse_state(&bytes)?)
}

/// Intervention and state for the single-stage subcommands.
fn intervention_and_state(args: &StateArgs) -> CliResult<(Intervention, Option<StateFile>)> {
    let (k, scenario_state) = match load(&args.input)? {
        Loaded::Scenario(s) => {
            let k = s.stages[0]
                .branches()
                .values()
                .next()
                .expect("nonempty")
                .clone();
            (k, Some(s.initial_state))
        }
        Loaded::Measurement(MeasurementFile::Intervention(k)) => (k, None),
        Loaded::Measurement(MeasurementFile::Povm(p)) => (kraus_from_povm(&p, None)?, None),
    };
    let state = match &args.state {
        Some(path) => Some(load_state(path)?),
        None => scenario_state,
    };
    Ok((k, state))
}

fn require_state(state: Option<StateFile>) -> CliResult<StateFile> {
    state.ok_or_else(|| Error::InvalidArgument("--state is required for this input".into()).into())
}

fn load_intervention(spec: &str) -> CliResult<Intervention> {
    match load(spec)? {
        Loaded::Measurement(MeasurementFile::Intervention(k)) => Ok(k),
        Loaded::Measurement(MeasurementFile::Povm(p)) => Ok(kraus_from_povm(&p, None)?),
        Loaded::Scenario(s) => Ok(s.stages[0]
            .branches()
            .values()
            .next()
            .expect("nonempty")
            .clone()),
    }
}

/// A plain intervention (applied after every outcome) or a map from prior
/// outcome to intervention.
fn load_adaptive(spec: &str) -> CliResult<AdaptiveIntervention> {
    let (bytes, _) = read_input(spec)?;
    let obj = keys(&bytes)?;
    if obj.contains_key("outcomes") || obj.contains_key("elements") || obj.contains_key("stages") {
        return Ok(AdaptiveIntervention::uniform(load_intervention(spec)?));
    }
    Ok(parse_adaptive(&bytes)?)
}

fn pair(inputs: &[String]) -> CliResult<(Intervention, AdaptiveIntervention)> {
    if inputs.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected two --in files, got {}",
            inputs.len()
        ))
        .into());
    }
    Ok((load_intervention(&inputs[0])?, load_adaptive(&inputs[1])?))
}

/// Writes each `(file name, contents)` atomically into `--out`, or to
/// stdout in order.
fn emit(output: &Output, files: &[(&str, String)]) -> CliResult<()> {
    match &output.out {
        None => {
            let mut stdout = std::io::stdout().lock();
            for (_, contents) in files {
                stdout
                    .write_all(contents.as_bytes())
                    .map_err(|e| Failure::io(Path::new("<stdout>"), e))?;
            }
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
            // stage everything first so a failure leaves no partial set
            let mut staged = Vec::new();
            for (name, contents) in files {
                let mut tmp =
                    tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(dir, e))?;
                tmp.write_all(contents.as_bytes())
                    .map_err(|e| Failure::io(tmp.path(), e))?;
                staged.push((tmp, dir.join(name)));
            }
            for (tmp, target) in staged {
                tmp.persist(&target)
                    .map_err(|e| Failure::io(&target, e.error))?;
            }
            Ok(())
        }
    }
}

fn density_json(d: &DensityMatrix) -> Value {
    serde_json::to_value(d).expect("serializable")
}

fn run_apply(args: &StateArgs) -> CliResult<()> {
    let (k, state) = intervention_and_state(args)?;
    let rho = require_state(state)?.density();
    let probs = outcome_probabilities(&k, &rho)?;
    let mut outcomes = Vec::new();
    for (label, p) in probs {
        let conditional = apply_selective(&k, &rho, &label)?;
        outcomes
            .push(json!({"label": label, "probability": p, "state": density_json(&conditional)}));
    }
    let report = json!({
        "outcomes": outcomes,
        "nonselective": density_json(&apply_nonselective(&k, &rho)?),
    });
    emit(&args.output, &[("apply.json", to_json(&report))])
}

fn run_probs(args: &StateArgs) -> CliResult<()> {
    let (k, state) = intervention_and_state(args)?;
    let rho = require_state(state)?.density();
    let mut csv = String::from("label,probability\n");
    for (label, p) in outcome_probabilities(&k, &rho)? {
        csv.push_str(&format!("{},{}\n", csv_field(&label), format_sig6(p)));
    }
    emit(&args.output, &[("probs.csv", csv)])
}

fn run_compose(args: &PairArgs) -> CliResult<()> {
    let (a, b) = pair(&args.inputs)?;
    let composed = compose(&b, &a)?;
    emit(&args.output, &[("composed.json", to_json(&composed))])
}

fn run_refine_check(args: &PairArgs) -> CliResult<()> {
    let (a, b) = pair(&args.inputs)?;
    let report = check_refinement(&b, &a)?;
    let mut csv = String::from("label,completeness_deviation,refinement_deviation,holds\n");
    for r in &report.branches {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&r.label),
            format_sig6(r.completeness_deviation),
            format_sig6(r.refinement_deviation),
            r.holds()
        ));
    }
    emit(&args.output, &[("refinement.csv", csv)])?;
    if report.holds() {
        Ok(())
    } else {
        Err(Error::NotComplete {
            deviation: report.max_completeness_deviation(),
        }
        .into())
    }
}

fn run_dilate(args: &InArgs) -> CliResult<()> {
    let k = load_intervention(&args.input)?;
    let d = isometry_from_kraus(&k)?;
    let u = complete_to_unitary(&d)?;
    emit(
        &args.output,
        &[
            ("kraus.json", to_json(&k)),
            ("isometry.json", to_json(&d)),
            ("unitary.json", to_json(&u)),
        ],
    )
}

fn run_premeasure(args: &StateArgs) -> CliResult<()> {
    let (k, state) = intervention_and_state(args)?;
    let state = require_state(state)?;
    let psi = state.pure().ok_or_else(|| {
        Failure::from(Error::InvalidArgument(
            "premeasurement needs a pure state".into(),
        ))
    })?;
    let d = isometry_from_kraus(&k)?;
    let composite = premeasure(&d, psi)?;
    let weights: serde_json::Map<String, Value> = composite
        .block_weights()
        .into_iter()
        .map(|(mu, w)| (mu, json!(w)))
        .collect();
    let amplitudes: Vec<[f64; 2]> = composite
        .amplitudes()
        .iter()
        .map(|a| [a.re, a.im])
        .collect();
    let report = json!({
        "columns": composite.columns(),
        "amplitudes": amplitudes,
        "block_weights": weights,
    });
    emit(&args.output, &[("premeasured.json", to_json(&report))])
}

fn run_decohere_scan(args: &ScanArgs) -> CliResult<()> {
    let mode = match args.mode {
        Mode::Pure => EnvironmentMode::pure(),
        Mode::Mixed => EnvironmentMode::mixed(),
    };
    let scan = scaling_scan(
        &args.env_dims,
        args.trials,
        mode,
        args.outcomes,
        Stream::new(args.seed),
    )?;
    let summary = format!(
        "slope,slope_stderr\n{},{}\n",
        format_sig6(scan.slope),
        format_sig6(scan.slope_stderr)
    );
    emit(
        &args.output,
        &[("scan.csv", scan.to_csv()), ("slope.csv", summary)],
    )
}

fn run_lindblad(args: &LindbladArgs) -> CliResult<()> {
    let bytes = std::fs::read(&args.input).map_err(|e| Failure::io(&args.input, e))?;
    let g: LindbladGenerator =
        serde_json::from_slice(&bytes).map_err(|e| Failure::from(Error::Parse(e.to_string())))?;
    let rho0 = load_state(&args.state)?.density();
    let points = trajectory(&g, &rho0, args.t, args.dt, args.every)?;
    let n = g.dim();
    let mut csv = String::from("t");
    for i in 0..n {
        for j in 0..n {
            csv.push_str(&format!(",re_{i}_{j},im_{i}_{j}"));
        }
    }
    csv.push('\n');
    for (t, rho) in &points {
        csv.push_str(&format_sig6(*t));
        for i in 0..n {
            for j in 0..n {
                let z = rho.matrix().get(i, j);
                csv.push_str(&format!(",{},{}", format_sig6(z.re), format_sig6(z.im)));
            }
        }
        csv.push('\n');
    }
    let mut files = vec![("trajectory.csv", csv)];
    if !args.delta_t.is_empty() {
        let cmp = compare_limit(&g, &rho0, args.t, &args.delta_t, args.dt)?;
        let mut table = cmp.to_csv();
        table.push_str(&format!("# fitted order {}\n", format_sig6(cmp.order)));
        files.push(("convergence.csv", table));
    }
    emit(&args.output, &files)
}

fn run_sample(args: &SampleArgs) -> CliResult<()> {
    let (bytes, base) = read_input(&args.input)?;
    let scenario = parse_scenario(&bytes, base.as_deref())?;
    let table = scenario.sample(args.shots, args.seed)?;
    emit(&args.output, &[("records.csv", table.to_csv())])
}

fn run_validate(args: &InArgs) -> CliResult<()> {
    let (bytes, base) = read_input(&args.input)?;
    let obj = keys(&bytes)?;
    let kind = if obj.contains_key("stages") {
        parse_scenario(&bytes, base.as_deref())?;
        "scenario"
    } else if obj.contains_key("H0") {
        serde_json::from_slice::<LindbladGenerator>(&bytes)
            .map_err(|e| Failure::from(Error::Parse(e.to_string())))?;
        "generator"
    } else if obj.contains_key("columns") {
        serde_json::from_slice::<quantum_intervention::dilation::Dilation>(&bytes)
            .map_err(|e| Failure::from(Error::Parse(e.to_string())))?;
        "dilation"
    } else if obj.contains_key("elements") || obj.contains_key("outcomes") {
        match parse_measurement(&bytes)? {
            MeasurementFile::Povm(_) => "povm",
            MeasurementFile::Intervention(_) => "intervention",
        }
    } else {
        match parse_state(&bytes)? {
            StateFile::Pure(_) => "pure state",
            _ => "density matrix",
        }
    };
    emit(&args.output, &[("validate.txt", format!("ok: {kind}\n"))])
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Apply(a) => run_apply(&a),
        Command::Probs(a) => run_probs(&a),
        Command::Compose(a) => run_compose(&a),
        Command::RefineCheck(a) => run_refine_check(&a),
        Command::Dilate(a) => run_dilate(&a),
        Command::Premeasure(a) => run_premeasure(&a),
        Command::DecohereScan(a) => run_decohere_scan(&a),
        Command::Lindblad(a) => run_lindblad(&a),
        Command::Sample(a) => run_sample(&a),
        Command::Validate(a) => run_validate(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.status)
        }
    }
}
