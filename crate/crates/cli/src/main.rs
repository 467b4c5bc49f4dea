mod formats;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qpower::classical::estimate_iterations;
use qpower::experiments::{self, ExperimentTable, SweepConfig};
use qpower::qap::{self, QapInstance};
use qpower::quantum::{iterate, IterationRecord};
use qpower::qubo::{self, GateConvention, QuboInstance, Sense};
use qpower::{AnyOperator, CollapseMode, EngineConfig, Error, StateVector};

use formats::Problem;

const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_LOW_CONFIDENCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "qpower",
    version,
    about = "Shifted power iteration on simulated quantum registers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the eigenphase farthest from the shift of an operator file.
    Power(PowerArgs),
    /// Solve a QUBO file by power iteration on its phase circuit.
    SolveQubo(SolveArgs),
    /// Solve a QAP file through its penalized QUBO.
    SolveQap(SolveQapArgs),
    /// Emit the phase circuit of a QUBO or QAP file as JSON.
    Compile(CompileArgs),
    /// Run an iterations-to-success sweep and write CSV (and SVG).
    Experiment(ExperimentArgs),
    /// Print the eigengap iteration estimate.
    Estimate(EstimateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PostSelect,
    Sample,
}

impl From<ModeArg> for CollapseMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PostSelect => CollapseMode::PostSelect,
            ModeArg::Sample => CollapseMode::Sample,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Max,
    Min,
}

impl From<SenseArg> for Sense {
    fn from(s: SenseArg) -> Self {
        match s {
            SenseArg::Max => Sense::Maximize,
            SenseArg::Min => Sense::Minimize,
        }
    }
}

#[derive(Args, Serialize)]
struct EngineArgs {
    /// Shift η of the iterated operator ηI - U.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, value_enum, default_value = "post-select")]
    #[serde(skip)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iterate: usize,
    /// Tomography tolerance on the branch probability.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Iterations between tomography snapshots.
    #[arg(long, default_value_t = 5)]
    stride: usize,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            eta: self.eta,
            mode: self.mode.into(),
            tol: self.tol,
            window: self.window,
            max_iterate: self.max_iterate,
            seed: self.seed,
            tomography_stride: self.stride,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum InitArg {
    Uniform,
    Random,
}

#[derive(Args)]
struct PowerArgs {
    input: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Starting vector; `random` draws from the seed's init stream.
    #[arg(long, value_enum, default_value = "uniform")]
    init: InitArg,
    /// Write the full report, including the iteration trace, as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    sense: Option<SenseArg>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Also enumerate all assignments and report agreement.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SolveQapArgs {
    input: PathBuf,
    /// Constraint penalty P (defaults to 2·Σ|coefficients| + 1).
    #[arg(long)]
    penalty: Option<f64>,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Binary01,
    IsingPm,
}

#[derive(Args)]
struct CompileArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    sense: Option<SenseArg>,
    /// Gate parameterization; defaults to the instance's native one.
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// QAP penalty, when the input is a QAP file.
    #[arg(long)]
    penalty: Option<f64>,
    /// Output path (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Which {
    Fig2,
    Fig3,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[arg(value_enum)]
    which: Which,
    #[arg(long, default_value_t = 15)]
    runs: usize,
    #[arg(long, default_value_t = 0.5)]
    target: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Qubit counts for fig2 (comma separated).
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<usize>,
    /// Gap for fig2.
    #[arg(long)]
    gap: Option<f64>,
    /// Qubit count for fig3.
    #[arg(long)]
    n: Option<usize>,
    /// Gaps for fig3 (comma separated).
    #[arg(long, value_delimiter = ',')]
    gaps: Vec<f64>,
    /// Use the smaller default register for fig3.
    #[arg(long)]
    low_memory: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Skip the SVG plot.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[arg(long, allow_hyphen_values = true)]
    phi1: f64,
    #[arg(long, allow_hyphen_values = true)]
    phi2: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Provenance written next to every output file.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: serde_json::Value,
    seed: Option<u64>,
    library_version: &'a str,
    timestamp_unix: u64,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(
    out: &Path,
    command: &str,
    parameters: serde_json::Value,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let m = RunManifest {
        command,
        parameters,
        seed,
        library_version: qpower::VERSION,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_text(
        &manifest_path(out),
        &(serde_json::to_string_pretty(&m)? + "\n"),
    )
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn engine_params(e: &EngineArgs) -> serde_json::Value {
    let mut v = serde_json::to_value(e).unwrap_or_default();
    v["mode"] = json!(CollapseMode::from(e.mode));
    v
}

#[derive(Serialize)]
struct PowerReport {
    operator: &'static str,
    n: usize,
    eta: f64,
    mode: CollapseMode,
    seed: u64,
    init: InitArg,
    converged: bool,
    iterations: usize,
    alpha_final: f64,
    phase: Option<f64>,
    success_probability: Option<f64>,
    dominant_set: Option<Vec<usize>>,
    trace: Vec<IterationRecord>,
}

fn cmd_power(a: PowerArgs) -> anyhow::Result<u8> {
    let op = formats::read_operator(&a.input)?;
    let cfg = a.engine.config();
    let (kind, n) = match &op {
        AnyOperator::Diagonal(d) => ("diagonal", qpower::Operator::n(d)),
        AnyOperator::Dense(d) => ("dense", qpower::Operator::n(d)),
        AnyOperator::Circuit(c) => ("circuit", c.n()),
    };
    let v0 = match a.init {
        InitArg::Uniform => qpower::equal_superposition(n)?,
        InitArg::Random => {
            StateVector::random(n, &mut qpower::seed::rng(cfg.seed, qpower::seed::INIT, 0))?
        }
    };
    let dominant = match &op {
        AnyOperator::Diagonal(d) => Some(d.dominant_set(cfg.eta, 1e-9)),
        _ => None,
    };
    let (summary, trace) = iterate(&op, &v0, &cfg, dominant.as_deref())?;
    let report = PowerReport {
        operator: kind,
        n,
        eta: cfg.eta,
        mode: cfg.mode,
        seed: cfg.seed,
        init: a.init,
        converged: summary.converged,
        iterations: summary.iterations,
        alpha_final: summary.alpha_final,
        phase: trace.final_phase(),
        success_probability: trace.last().and_then(|r| r.success_prob),
        dominant_set: dominant,
        trace: trace.records,
    };
    println!("operator: {kind} (n = {n})");
    println!(
        "converged: {} after {} iterations",
        report.converged, report.iterations
    );
    println!("alpha: {}", report.alpha_final);
    match report.phase {
        Some(p) => println!("phase: {p}"),
        None => println!("phase: undefined"),
    }
    if let Some(p) = report.success_probability {
        println!("success probability: {p}");
    }
    if let Some(path) = &a.json {
        write_json(path, &report)?;
        let mut params = engine_params(&a.engine);
        params["input"] = json!(a.input);
        params["init"] = json!(a.init);
        write_manifest(path, "power", params, Some(cfg.seed))?;
    }
    Ok(if report.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize)]
struct Verification {
    optimum_bitstring: String,
    optimum_value: f64,
    agrees: bool,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    bitstring: String,
    value: f64,
    converged: bool,
    confident: bool,
    iterations: usize,
    success_probability: f64,
    phase: Option<f64>,
    value_from_phase: Option<f64>,
    readout_set: Vec<String>,
    sense: Sense,
    scaling: &'a qubo::ScalingPlan,
    verify: Option<Verification>,
}

fn verify_qubo(q: &QuboInstance, value: f64) -> anyhow::Result<Verification> {
    let (bits, best) = qubo::brute_force_optimum(q)?;
    Ok(Verification {
        optimum_bitstring: qubo::bits_to_string(&bits),
        optimum_value: best,
        agrees: (best - value).abs() <= 1e-9 * best.abs().max(1.0),
    })
}

fn solve_report<'a>(
    q: &QuboInstance,
    s: &'a qubo::Solution,
    verify: bool,
) -> anyhow::Result<SolveReport<'a>> {
    Ok(SolveReport {
        bitstring: qubo::bits_to_string(&s.bitstring),
        value: s.value,
        converged: s.converged,
        confident: s.is_confident(),
        iterations: s.iterations,
        success_probability: s.success_prob,
        phase: s.phi_recovered,
        value_from_phase: s.value_from_phase,
        readout_set: s
            .readout_set
            .iter()
            .map(|&x| qubo::bits_to_string(&qubo::index_to_bits(x, q.n())))
            .collect(),
        sense: q.sense(),
        scaling: &s.plan,
        verify: if verify {
            Some(verify_qubo(q, s.value)?)
        } else {
            None
        },
    })
}

fn print_solve(r: &SolveReport) {
    println!("bitstring: {} (x_0 first)", r.bitstring);
    println!("value: {}", r.value);
    println!(
        "converged: {} after {} iterations",
        r.converged, r.iterations
    );
    println!("success probability: {}", r.success_probability);
    if r.readout_set.len() > 1 {
        println!("tied optima: {}", r.readout_set.join(" "));
    }
    if let Some(v) = &r.verify {
        println!(
            "brute force: {} value {} ({})",
            v.optimum_bitstring,
            v.optimum_value,
            if v.agrees { "agrees" } else { "DISAGREES" }
        );
    }
}

fn solve_exit(converged: bool, confident: bool) -> u8 {
    match (converged, confident) {
        (false, _) => EXIT_NOT_CONVERGED,
        (true, false) => EXIT_LOW_CONFIDENCE,
        (true, true) => 0,
    }
}

fn cmd_solve_qubo(a: SolveArgs) -> anyhow::Result<u8> {
    let q = formats::read_qubo(&a.input)?.into_instance(a.sense.map(Into::into))?;
    let cfg = a.engine.config();
    let s = qubo::solve(&q, &cfg)?;
    let report = solve_report(&q, &s, a.verify)?;
    print_solve(&report);
    if let Some(path) = &a.json {
        write_json(path, &report)?;
        let mut params = engine_params(&a.engine);
        params["input"] = json!(a.input);
        params["sense"] = json!(q.sense());
        params["verify"] = json!(a.verify);
        write_manifest(path, "solve-qubo", params, Some(cfg.seed))?;
    }
    Ok(solve_exit(report.converged, report.confident))
}

#[derive(Serialize)]
struct QapReport<'a> {
    permutation: Option<Vec<usize>>,
    feasible: bool,
    value: Option<f64>,
    penalty: f64,
    assignment: Vec<Vec<u8>>,
    qubo: SolveReport<'a>,
    brute_force: Option<(Vec<usize>, f64)>,
}

fn cmd_solve_qap(a: SolveQapArgs) -> anyhow::Result<u8> {
    let inst = formats::read_qap(&a.input)?.into_instance()?;
    let cfg = a.engine.config();
    let s = qap::solve_qap(&inst, a.penalty, &cfg)?;
    let reduced = qap::qap_to_qubo(&inst, s.penalty)?;
    let report = QapReport {
        permutation: s.permutation.clone(),
        feasible: s.feasible,
        value: s.value,
        penalty: s.penalty,
        assignment: s.assignment.rows().to_vec(),
        qubo: solve_report(&reduced.qubo, &s.qubo, false)?,
        brute_force: if a.verify {
            Some(qap::brute_force_qap(&inst)?)
        } else {
            None
        },
    };
    match (&report.permutation, report.value) {
        (Some(p), Some(v)) => {
            println!("permutation: {p:?} (facility i -> location p[i])\nvalue: {v}")
        }
        _ => println!("decoded assignment is infeasible: {:?}", report.assignment),
    }
    println!("penalty: {}", report.penalty);
    println!(
        "converged: {} after {} iterations",
        report.qubo.converged, report.qubo.iterations
    );
    if let Some((p, v)) = &report.brute_force {
        println!("brute force: {p:?} value {v}");
    }
    if let Some(path) = &a.json {
        write_json(path, &report)?;
        let mut params = engine_params(&a.engine);
        params["input"] = json!(a.input);
        params["penalty"] = json!(s.penalty);
        write_manifest(path, "solve-qap", params, Some(cfg.seed))?;
    }
    Ok(solve_exit(
        report.qubo.converged,
        report.qubo.confident && report.feasible,
    ))
}

fn compile_qubo(
    q: &QuboInstance,
    conv: Option<ConventionArg>,
) -> anyhow::Result<serde_json::Value> {
    let conv = match conv {
        Some(ConventionArg::Binary01) => GateConvention::Binary01,
        Some(ConventionArg::IsingPm) => GateConvention::IsingPM,
        None => GateConvention::native(q.domain()),
    };
    let plan = match qubo::make_scaling(q, q.sense()) {
        // nothing to scale: keep the gate structure with unit scale, so an
        // all-zero instance emits all-zero phases
        Err(Error::ConstantObjective(c)) => qubo::ScalingPlan {
            s: 1.0,
            offset: 0.0,
            lower_bound: c,
            upper_bound: c,
            sense: q.sense(),
        },
        other => other?,
    };
    let circuit = qubo::compile(q, conv, &plan)?;
    let objective = qubo::gate_count(q.n(), q.quadratic().len());
    Ok(json!({
        "n": q.n(),
        "convention": conv,
        "sense": q.sense(),
        "scaling": plan,
        "gate_count": objective,
        "offset_gates": circuit.len() - objective,
        "gates": circuit.gates(),
    }))
}

fn cmd_compile(a: CompileArgs) -> anyhow::Result<u8> {
    let sense = a.sense.map(Sense::from);
    let out = match formats::read_problem(&a.input)? {
        Problem::Qubo(f) => {
            let mut v = compile_qubo(&f.into_instance(sense)?, a.convention)?;
            v["source"] = json!("qubo");
            v
        }
        Problem::Qap(f) => {
            let inst: QapInstance = f.into_instance()?;
            let penalty = a.penalty.unwrap_or_else(|| qap::default_penalty(&inst));
            let reduced = qap::qap_to_qubo(&inst, penalty)?;
            let q = match sense {
                Some(s) => reduced.qubo.clone().with_sense(s),
                None => reduced.qubo.clone(),
            };
            let mut v = compile_qubo(&q, a.convention)?;
            v["source"] = json!("qap");
            v["qap_n"] = json!(inst.n());
            v["penalty"] = json!(penalty);
            v["constant"] = json!(reduced.constant);
            v
        }
    };
    let text = serde_json::to_string_pretty(&out)? + "\n";
    match &a.out {
        Some(path) => {
            write_text(path, &text)?;
            let params = json!({
                "input": a.input,
                "sense": sense,
                "penalty": a.penalty,
            });
            write_manifest(path, "compile", params, None)?;
        }
        None => print!("{text}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    n: usize,
    gap: f64,
    run_index: usize,
    seed: u64,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct CsvSummary<'a> {
    experiment: &'a str,
    n: usize,
    gap: f64,
    runs: usize,
    converged_runs: usize,
    mean_iterations: f64,
    mean_estimate: f64,
}

fn write_tables(
    table: &ExperimentTable,
    rows_path: &Path,
    summary_path: &Path,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(rows_path)
        .with_context(|| format!("writing {}", rows_path.display()))?;
    for r in &table.rows {
        w.serialize(CsvRow {
            experiment: r.experiment.name(),
            n: r.n,
            gap: r.gap,
            run_index: r.run_index,
            seed: r.seed,
            iterations: r.iterations,
            converged: r.converged,
        })?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(summary_path)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    for s in &table.summary {
        w.serialize(CsvSummary {
            experiment: s.experiment.name(),
            n: s.n,
            gap: s.gap,
            runs: s.runs,
            converged_runs: s.converged_runs,
            mean_iterations: s.mean_iterations,
            mean_estimate: s.mean_estimate,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_experiment(mut a: ExperimentArgs) -> anyhow::Result<u8> {
    // resolve defaults up front so the manifest records what actually ran
    match a.which {
        Which::Fig2 => {
            if a.n_list.is_empty() {
                a.n_list = experiments::default_fig2_ns();
            }
            a.gap.get_or_insert(experiments::DEFAULT_FIG2_GAP);
        }
        Which::Fig3 => {
            a.n.get_or_insert(if a.low_memory {
                experiments::LOW_MEMORY_FIG3_N
            } else {
                experiments::DEFAULT_FIG3_N
            });
            if a.gaps.is_empty() {
                a.gaps = experiments::default_fig3_gaps();
            }
        }
    }
    let cfg = SweepConfig {
        runs: a.runs,
        target: a.target,
        eta: a.eta,
        seed: a.seed,
        ..SweepConfig::default()
    };
    let (name, table, plot) = match a.which {
        Which::Fig2 => {
            let ns = a.n_list.clone();
            let gap = a.gap.unwrap_or(experiments::DEFAULT_FIG2_GAP);
            let t = experiments::run_fig2(&ns, gap, &cfg)?;
            let pts: Vec<(f64, f64)> = t
                .summary
                .iter()
                .map(|s| (s.n as f64, s.mean_iterations))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().cloned().unzip();
            if pts.len() >= 2 {
                let (slope, intercept, r2) = experiments::linear_fit(&xs, &ys);
                println!("linear fit: iterations = {slope:.4}·n + {intercept:.4}, R² = {r2:.4}");
            }
            let plot = plot::LinePlot {
                title: &format!("Mean iterations to success, gap {gap}"),
                x_label: "number of qubits n",
                y_label: "mean number of iterations",
                points: pts,
            }
            .render();
            ("fig2", t, plot)
        }
        Which::Fig3 => {
            let n = a.n.unwrap_or(experiments::DEFAULT_FIG3_N);
            let gaps = a.gaps.clone();
            let t = experiments::run_fig3(n, &gaps, &cfg)?;
            let pts: Vec<(f64, f64)> = t
                .summary
                .iter()
                .map(|s| (s.gap, s.mean_iterations))
                .collect();
            for s in &t.summary {
                println!(
                    "gap {}: mean iterations {}, mean estimate {:.1}",
                    s.gap, s.mean_iterations, s.mean_estimate
                );
            }
            let plot = plot::LinePlot {
                title: &format!("Iterations to success, n = {n}"),
                x_label: "eigengap",
                y_label: "mean number of iterations",
                points: pts,
            }
            .render();
            ("fig3", t, plot)
        }
    };
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let rows_path = a.out_dir.join(format!("{name}.csv"));
    let summary_path = a.out_dir.join(format!("{name}_summary.csv"));
    write_tables(&table, &rows_path, &summary_path)?;
    if !a.no_plot {
        write_text(&a.out_dir.join(format!("{name}.svg")), &plot)?;
    }
    write_manifest(
        &rows_path,
        "experiment",
        serde_json::to_value(&a)?,
        Some(a.seed),
    )?;
    println!("wrote {}", rows_path.display());
    Ok(0)
}

fn cmd_estimate(a: EstimateArgs) -> anyhow::Result<u8> {
    let k = estimate_iterations(a.phi1, a.phi2, a.n, a.eta)?;
    println!("{k}");
    if let Some(path) = &a.json {
        write_json(
            path,
            &json!({ "phi1": a.phi1, "phi2": a.phi2, "n": a.n, "eta": a.eta, "estimate": k }),
        )?;
        write_manifest(path, "estimate", serde_json::to_value(&a)?, None)?;
    }
    Ok(0)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::DeadBranch { .. } | Error::DegenerateIterate { .. }) => EXIT_NOT_CONVERGED,
        _ => EXIT_INPUT,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Power(a) => cmd_power(a),
        Command::SolveQubo(a) => cmd_solve_qubo(a),
        Command::SolveQap(a) => cmd_solve_qap(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Estimate(a) => cmd_estimate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
