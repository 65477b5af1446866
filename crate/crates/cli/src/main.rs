use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use witnesslab::analytic::FormulaId;
use witnesslab::oracle::{self, OracleConfig};
use witnesslab::reproduction::{render_table, verify_table, VerifyRow};
use witnesslab::scan::{find_threshold, rows_json, sweep, write_csv, SweepRow, SweepSpec};
use witnesslab::states::{build_state_with, effective_cutoff, DEFAULT_TAIL_TOL};
use witnesslab::witness::{Condition, DEFAULT_EPSILON};
use witnesslab::{Engine, EvalPath, OperatorChoice, StateFamily, WitnessReport};

const THREADS_VAR: &str = "WITNESSLAB_THREADS";

#[derive(Parser)]
#[command(name = "witnesslab", version, about = "Evaluate multipartite entanglement conditions on example state families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate both conditions on one state.
    Detect(DetectArgs),
    /// Sweep one parameter over an inclusive grid.
    Scan(ScanArgs),
    /// Bisect for the parameter value where a margin changes sign.
    Threshold(ThresholdArgs),
    /// Compare numeric values with the closed forms of every worked example.
    Verify(OutputArgs),
    /// Randomized checks on separable ensembles and the operator-power lemma.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Auto,
    Factorized,
    Dense,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StateArgs {
    /// Family as JSON (`{"family": ..., "params": {...}}`) or a bare tag with default parameters.
    #[arg(long)]
    family: String,
    /// Override a real parameter, e.g. `--set theta=0.3`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    overrides: Vec<String>,
    /// Operator choice: auto, lowering, raising, flipped, annihilation.
    #[arg(long, default_value = "auto")]
    ops: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Tail weight tolerance for automatic Fock cutoffs.
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    tail_tol: f64,
    #[arg(long, value_enum, default_value = "auto")]
    path: PathArg,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    state: StateArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Swept parameter; a comma-separated list moves several together.
    #[arg(long)]
    param: String,
    /// Grid as `lo,hi,steps` (inclusive).
    #[arg(long)]
    grid: String,
    #[arg(long, default_value = "both")]
    condition: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long)]
    param: String,
    /// Bracket as `lo,hi`.
    #[arg(long)]
    bracket: String,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value = "1")]
    condition: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    #[arg(long, default_value_t = 4)]
    max_terms: usize,
    /// Number of lemma trials; 0 skips them.
    #[arg(long, default_value_t = 1000)]
    lemma_trials: usize,
    #[arg(long, default_value_t = 6)]
    lemma_dim: usize,
    #[command(flatten)]
    out: OutputArgs,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Check(String),
}

impl From<witnesslab::Error> for Failure {
    fn from(e: witnesslab::Error) -> Self {
        match e {
            witnesslab::Error::Output(msg) => Failure::Check(msg),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_family(text: &str, overrides: &[String]) -> CliResult<StateFamily> {
    let trimmed = text.trim();
    let mut family = if trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| usage(format!("invalid family JSON: {e}")))?
    } else {
        StateFamily::default_for(trimmed).ok_or_else(|| usage(format!("unknown family tag `{trimmed}`")))?
    };
    for item in overrides {
        let (name, value) = item.split_once('=').ok_or_else(|| usage(format!("expected NAME=VALUE, got `{item}`")))?;
        let value: f64 = value.trim().parse().map_err(|_| usage(format!("`{value}` is not a number")))?;
        family = family.with_param(name.trim(), value)?;
    }
    Ok(family)
}

fn parse_floats(text: &str, what: &str, count: usize) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(usage(format!("{what} needs {count} comma-separated values, got `{text}`")));
    }
    parts.iter().map(|p| p.parse::<f64>().map_err(|_| usage(format!("`{p}` in {what} is not a number")))).collect()
}

fn engine_for(path: PathArg) -> Engine {
    let path = match path {
        PathArg::Auto => EvalPath::Auto,
        PathArg::Factorized => EvalPath::Factorized,
        PathArg::Dense => EvalPath::Dense,
    };
    Engine { path, ..Engine::default() }
}

fn path_name(path: EvalPath) -> &'static str {
    match path {
        EvalPath::Auto => "auto",
        EvalPath::Factorized => "factorized",
        EvalPath::Dense => "dense",
    }
}

fn condition_name(c: Condition) -> &'static str {
    match c {
        Condition::One => "1",
        Condition::Two => "2",
        Condition::Both => "both",
    }
}

struct Prepared {
    family: StateFamily,
    ops: OperatorChoice,
    engine: Engine,
    epsilon: f64,
    tail_tol: f64,
}

fn prepare(args: &StateArgs) -> CliResult<Prepared> {
    let family = parse_family(&args.family, &args.overrides)?;
    let ops: OperatorChoice = args.ops.parse()?;
    if !(args.epsilon >= 0.0) {
        return Err(usage(format!("epsilon must be non-negative, got {}", args.epsilon)));
    }
    if !(args.tail_tol > 0.0 && args.tail_tol < 1.0) {
        return Err(usage(format!("tail tolerance must lie in (0, 1), got {}", args.tail_tol)));
    }
    Ok(Prepared { family, ops, engine: engine_for(args.path), epsilon: args.epsilon, tail_tol: args.tail_tol })
}

/// Settings that determine the emitted numbers.
fn meta(p: &Prepared) -> CliResult<Value> {
    let cutoff = match (&p.family, effective_cutoff(&p.family, p.tail_tol)?) {
        (StateFamily::NModeSqueezed { cutoff: None, .. } | StateFamily::ModifiedFourMode { cutoff: None, .. }, Some(m)) => {
            json!(format!("auto ({m})"))
        }
        (_, Some(m)) => json!(m),
        (_, None) => Value::Null,
    };
    Ok(json!({
        "family": p.family,
        "ops": format!("{:?}", p.ops).to_lowercase(),
        "epsilon": p.epsilon,
        "tail_tol": p.tail_tol,
        "cutoff": cutoff,
        "path": path_name(p.engine.path),
        "dense_cap": p.engine.dense_cap,
        "spectrum_cap": p.engine.spectrum_cap,
        "psd_tol": p.engine.psd_tol,
    }))
}

fn comment_header(meta: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = meta {
        for (k, v) in map {
            let v = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("# {k} = {v}\n"));
        }
    }
    out
}

fn emit(out: &OutputArgs, text: &str) -> CliResult<()> {
    let result = match &out.output {
        Some(path) => File::create(path).and_then(|mut f| f.write_all(text.as_bytes())),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure::Check(format!("cannot write output: {e}")))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn report_table(meta: &Value, r: &WitnessReport) -> String {
    let mut s = comment_header(meta);
    for (k, v) in [("lhs", r.lhs), ("rhs1", r.rhs1), ("rhs2", r.rhs2), ("margin1", r.margin1), ("margin2", r.margin2), ("epsilon", r.epsilon)] {
        s.push_str(&format!("{k:<10} {v:.16e}\n"));
    }
    s.push_str(&format!("{:<10} {}\n{:<10} {}\n", "detected1", r.detected1, "detected2", r.detected2));
    s
}

fn rows_csv(rows: &[SweepRow]) -> CliResult<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("ascii csv"))
}

fn detect(args: DetectArgs) -> CliResult<()> {
    let p = prepare(&args.state)?;
    let state = build_state_with(&p.family, p.tail_tol)?;
    let ops = p.ops.assign(&p.family, state.dims())?;
    let report = p.engine.evaluate(&state, &ops, p.epsilon)?;
    let meta = meta(&p)?;
    let text = match args.out.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut value = json!(report);
            value["meta"] = meta.clone();
            pretty(&value)
        }
        Format::Table => report_table(&meta, &report),
        Format::Csv => format!(
            "{}lhs,rhs1,rhs2,margin1,margin2,detected1,detected2\n{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            comment_header(&meta),
            report.lhs,
            report.rhs1,
            report.rhs2,
            report.margin1,
            report.margin2,
            report.detected1,
            report.detected2
        ),
    };
    emit(&args.out, &text)
}

fn sweep_spec(p: &Prepared, params: &str, lo: f64, hi: f64, steps: usize, condition: Condition) -> CliResult<SweepSpec> {
    let names: Vec<&str> = params.split(',').map(str::trim).collect();
    let mut spec = SweepSpec::new(p.family.clone(), &names, lo, hi, steps)?
        .with_ops(p.ops)
        .with_condition(condition)
        .with_epsilon(p.epsilon);
    spec.tail_tol = p.tail_tol;
    spec.engine = p.engine;
    spec.validate()?;
    Ok(spec)
}

fn scan(args: ScanArgs) -> CliResult<()> {
    let p = prepare(&args.state)?;
    let grid = parse_floats(&args.grid, "--grid", 3)?;
    if grid[2].fract() != 0.0 || grid[2] < 2.0 {
        return Err(usage(format!("grid steps must be an integer ≥ 2, got {}", grid[2])));
    }
    let condition: Condition = args.condition.parse()?;
    let spec = sweep_spec(&p, &args.param, grid[0], grid[1], grid[2] as usize, condition)?;
    let rows = sweep(&spec)?;
    let mut meta = meta(&p)?;
    meta["param"] = json!(args.param);
    meta["grid"] = json!([grid[0], grid[1], grid[2] as usize]);
    meta["condition"] = json!(condition_name(condition));
    let text = match args.out.format.unwrap_or(Format::Csv) {
        Format::Csv => comment_header(&meta) + &rows_csv(&rows)?,
        Format::Json => pretty(&json!({ "meta": meta, "rows": rows_json(&rows) })),
        Format::Table => {
            let mut s = comment_header(&meta);
            s.push_str(&format!(
                "{:>14} {:>14} {:>14} {:>14} {:>11} {:>11} {:>5} {:>5}\n",
                "param", "lhs", "rhs1", "rhs2", "margin1", "margin2", "det1", "det2"
            ));
            for r in &rows {
                let w = &r.report;
                s.push_str(&format!(
                    "{:>14.8} {:>14.8e} {:>14.8e} {:>14.8e} {:>11.3e} {:>11.3e} {:>5} {:>5}\n",
                    r.param, w.lhs, w.rhs1, w.rhs2, w.margin1, w.margin2, w.detected1, w.detected2
                ));
            }
            s
        }
    };
    emit(&args.out, &text)
}

fn threshold(args: ThresholdArgs) -> CliResult<()> {
    let p = prepare(&args.state)?;
    let b = parse_floats(&args.bracket, "--bracket", 2)?;
    let condition: Condition = args.condition.parse()?;
    let spec = sweep_spec(&p, &args.param, b[0], b[1], 2, condition)?;
    let result = find_threshold(&spec, (b[0], b[1]), args.tol)?;
    let mut meta = meta(&p)?;
    meta["param"] = json!(args.param);
    meta["bracket"] = json!([b[0], b[1]]);
    meta["tol"] = json!(args.tol);
    meta["condition"] = json!(condition_name(condition));
    let text = match args.out.format.unwrap_or(Format::Table) {
        Format::Json => pretty(&json!({ "meta": meta, "threshold": result })),
        Format::Csv => format!(
            "{}value,bracket_width,detected_side\n{:.16e},{:.16e},{}\n",
            comment_header(&meta),
            result.value,
            result.bracket_width,
            json!(result.detected_side).as_str().unwrap_or_default()
        ),
        Format::Table => format!(
            "{}threshold      {:.10}\nbracket_width  {:.3e}\ndetected       {} the threshold\n",
            comment_header(&meta),
            result.value,
            result.bracket_width,
            json!(result.detected_side).as_str().unwrap_or_default()
        ),
    };
    emit(&args.out, &text)
}

fn verify_csv(rows: &[VerifyRow]) -> String {
    let mut s = String::from("label,formula,kind,passed,error,tolerance,numeric,expected\n");
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(";");
    for r in rows {
        let label = r.label.replace('"', "'");
        s.push_str(&format!(
            "\"{label}\",{},{},{},{:.16e},{:.16e},{},{}\n",
            r.formula.map(FormulaId::tag).unwrap_or(""),
            json!(r.kind).as_str().unwrap_or_default(),
            r.passed,
            r.error,
            r.tolerance,
            join(&r.numeric),
            join(&r.expected)
        ));
    }
    s
}

fn verify(out: OutputArgs) -> CliResult<()> {
    let rows = verify_table()?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    let text = match out.format.unwrap_or(Format::Table) {
        Format::Table => {
            let mut s = render_table(&rows);
            s.push_str(&format!("{} checks, {} passed, {} failed\n", rows.len(), rows.len() - failed, failed));
            s
        }
        Format::Json => pretty(&json!({ "rows": rows, "failed": failed })),
        Format::Csv => verify_csv(&rows),
    };
    emit(&out, &text)?;
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} verification check(s) failed")));
    }
    Ok(())
}

fn run_oracle(args: OracleArgs) -> CliResult<()> {
    let config =
        OracleConfig { trials: args.trials, seed: args.seed, max_n: args.max_n, max_dim: args.max_dim, max_terms: args.max_terms };
    let sep = oracle::run_separable(&config)?;
    let lemma = if args.lemma_trials > 0 { Some(oracle::run_lemma(args.lemma_trials, args.seed, args.lemma_dim)?) } else { None };
    let failed = sep.failed + lemma.as_ref().map_or(0, |l| l.failed);
    let text = match args.out.format.unwrap_or(Format::Table) {
        Format::Json => pretty(&json!({ "separable": sep, "lemma": lemma })),
        Format::Csv => {
            let mut s = String::from("check,trials,passed,failed,worst_margin\n");
            s.push_str(&format!(
                "separable,{},{},{},{:.16e}\n",
                config.trials,
                sep.passed,
                sep.failed,
                sep.worst_margin1.min(sep.worst_margin2)
            ));
            if let Some(l) = &lemma {
                s.push_str(&format!("lemma,{},{},{},{:.16e}\n", l.trials, l.passed, l.failed, l.worst_margin));
            }
            s
        }
        Format::Table => {
            let mut s = format!(
                "separable  trials {}  passed {}  failed {}  worst margin1 {:.3e}  worst margin2 {:.3e}  (seed {})\n",
                config.trials, sep.passed, sep.failed, sep.worst_margin1, sep.worst_margin2, sep.worst_seed
            );
            if let Some(l) = &lemma {
                s.push_str(&format!(
                    "lemma      trials {}  passed {}  failed {}  worst margin {:.3e}\n",
                    l.trials, l.passed, l.failed, l.worst_margin
                ));
            }
            s
        }
    };
    emit(&args.out, &text)?;
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} oracle trial(s) violated a bound")));
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().map_err(|_| usage(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(usage(format!("{THREADS_VAR} must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Detect(a) => detect(a),
        Command::Scan(a) => scan(a),
        Command::Threshold(a) => threshold(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => run_oracle(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
