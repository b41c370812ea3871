use clap::{Args, Parser, Subcommand, ValueEnum};
use rstat_core::extrapolation::{predict, predict_noisy};
use rstat_core::game::solve_game;
use rstat_core::interpolation::{interpolate, interpolate_noisy};
use rstat_core::minimax::{self, verify_saddle, DensityClass, MinimaxConfig, MinimaxSolution};
use rstat_core::simulate::{mc_mse, SimConfig};
use rstat_core::spectra::{check_szego, factorize, DEFAULT_GRID, DEFAULT_TRUNC};
use rstat_core::{CoefSeq, Error, ErrorKind, EstimatePlan, Grid, Problem, SpectralDensity};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const GRID_ENV: &str = "RSTAT_DEFAULT_GRID";
const CONSTRAINT_TOL: f64 = 1e-8;
const FIXEDPOINT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "rstat", version, about = "Optimal and minimax-robust estimation of functionals of stationary sequences")]
struct Cli {
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include the wall time in the result.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid size M, a power of two ≥ 64.
    #[arg(long)]
    grid: Option<usize>,
    /// Truncation L.
    #[arg(long)]
    trunc: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Szegő check and outer factor of a density.
    Factorize {
        #[arg(long)]
        density: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// CSV of the density and |φ|² on the grid.
        #[arg(long)]
        emit_density: Option<PathBuf>,
    },
    /// Optimal extrapolation from the past.
    Predict(EstimateArgs),
    /// Optimal interpolation of a missing block.
    Interpolate(EstimateArgs),
    /// Value and eigenvector of the power-constrained game.
    Game {
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        power: f64,
        /// Order of the game matrix.
        #[arg(long)]
        trunc: Option<usize>,
    },
    /// Least favourable densities and the minimax characteristic.
    Minimax(MinimaxArgs),
    /// Monte Carlo check of a plan's error.
    Simulate {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1024)]
        burn_in: usize,
        #[arg(long, default_value_t = DEFAULT_TRUNC)]
        estimator_truncation: usize,
    },
    /// Randomized audit of a minimax solution's saddle-point inequalities.
    VerifySaddle {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 500)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    density: PathBuf,
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long)]
    coeffs: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// CSV of Re h and Im h on the grid.
    #[arg(long)]
    emit_characteristic: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Extrapolation,
    Interpolation,
}

#[derive(Args)]
struct MinimaxArgs {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    #[arg(long)]
    noisy: bool,
    /// Class of the signal density.
    #[arg(long, value_parser = ["D0", "DM", "Dvu", "Deps", "D1eps", "D2eps", "D0minus", "DvuMinus"])]
    class: Option<String>,
    #[arg(long)]
    coeffs: PathBuf,
    /// Class parameters; for noisy problems `{"f": {...}, "g": {"class": ..., ...}}`.
    #[arg(long)]
    class_params: Option<PathBuf>,
    /// Pins the signal density to this one.
    #[arg(long)]
    pin_f: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Runs the saddle audit with this many probes and records its margins.
    #[arg(long)]
    audit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of f⁰ (and g⁰) on the grid.
    #[arg(long)]
    emit_density: Option<PathBuf>,
    #[arg(long)]
    emit_characteristic: Option<PathBuf>,
}

/// A failure with its exit code and optional iteration trace.
struct Failure {
    code: u8,
    kind: &'static str,
    reason: String,
    trace: Option<Vec<f64>>,
}

impl Failure {
    fn input(reason: impl Into<String>) -> Self {
        Failure { code: 2, kind: "input", reason: reason.into(), trace: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e.kind() {
            ErrorKind::Input => (2, "input"),
            ErrorKind::Numerical => (3, "numerical"),
            ErrorKind::ClassInapplicable => (4, "class-inapplicable"),
        };
        let trace = match &e {
            Error::NonConvergence { trace, .. } => Some(trace.clone()),
            _ => None,
        };
        Failure { code, kind, reason: e.to_string(), trace }
    }
}

#[derive(Serialize)]
struct RunResult {
    command: Vec<String>,
    /// SHA-256 of every input file, keyed by path.
    inputs: BTreeMap<String, String>,
    output: Value,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

/// Collects input digests while reading files.
#[derive(Default)]
struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    fn read<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest.iter() {
            write!(hex, "{b:02x}").unwrap();
        }
        self.digests.insert(path.display().to_string(), hex);
        serde_json::from_slice(&bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }
}

fn default_grid() -> Result<usize, Failure> {
    match std::env::var(GRID_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::input(format!("{GRID_ENV} is not an integer: {v}"))),
        Err(_) => Ok(DEFAULT_GRID),
    }
}

/// Grid from the flag, the density's own grid or the default, in that order.
fn pick_grid(flag: Option<usize>, densities: &[&SpectralDensity]) -> Result<Grid, Failure> {
    let native = densities.iter().filter_map(|d| d.native_grid()).map(|g| g.size()).next();
    let size = match (flag, native) {
        (Some(m), Some(n)) if m != n => {
            return Err(Failure::input(format!("--grid {m} conflicts with a tabulated density of {n} points")))
        }
        (Some(m), _) => m,
        (None, Some(n)) => n,
        (None, None) => default_grid()?,
    };
    Ok(Grid::new(size)?)
}

fn write_csv(path: &Path, grid: &Grid, columns: &[&[f64]]) -> Result<(), Failure> {
    let header = if columns.len() > 1 { "lambda,value,value2" } else { "lambda,value" };
    let mut s = String::from(header);
    s.push('\n');
    for i in 0..grid.size() {
        write!(s, "{:.17e}", grid.lambda(i)).unwrap();
        for c in columns {
            write!(s, ",{:.17e}", c[i]).unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn emit_characteristic(path: &Option<PathBuf>, plan: &EstimatePlan, grid: &Grid) -> Result<(), Failure> {
    if let Some(p) = path {
        let h = plan.h_on_grid(grid.size());
        let re: Vec<f64> = h.iter().map(|z| z.re).collect();
        let im: Vec<f64> = h.iter().map(|z| z.im).collect();
        write_csv(p, grid, &[&re, &im])?;
    }
    Ok(())
}

/// Reads a JSON document that is either `T` itself or a run result wrapping it.
fn read_wrapped<T: DeserializeOwned>(inputs: &mut Inputs, path: &Path) -> Result<T, Failure> {
    let v: Value = inputs.read(path)?;
    let inner = match v.get("output") {
        Some(o) if v.get("command").is_some() => o.clone(),
        _ => v,
    };
    serde_json::from_value(inner).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("results serialize")
}

struct Outcome {
    output: Value,
    warnings: Vec<String>,
    /// A hard check that failed after the result was produced.
    violation: Option<String>,
}

impl Outcome {
    fn ok(output: Value, warnings: Vec<String>) -> Self {
        Outcome { output, warnings, violation: None }
    }
}

fn run_estimate(args: &EstimateArgs, interp: bool, inputs: &mut Inputs) -> Result<Outcome, Failure> {
    let f: SpectralDensity = inputs.read(&args.density)?;
    let g: Option<SpectralDensity> = args.noise.as_deref().map(|p| inputs.read(p)).transpose()?;
    let a: CoefSeq = inputs.read(&args.coeffs)?;
    let mut ds = vec![&f];
    ds.extend(g.as_ref());
    let grid = pick_grid(args.grid.grid, &ds)?;
    let l = args.grid.trunc.unwrap_or(DEFAULT_TRUNC);
    let plan = match (interp, &g) {
        (false, None) => predict(&f, &a, &grid, l)?,
        (false, Some(g)) => predict_noisy(&f, g, &a, &grid, l)?,
        (true, None) => interpolate(&f, &a, &grid, l)?,
        (true, Some(g)) => interpolate_noisy(&f, g, &a, &grid, l)?,
    };
    emit_characteristic(&args.emit_characteristic, &plan, &grid)?;
    Ok(Outcome::ok(to_value(&plan), plan.warnings.clone()))
}

fn class_from(name: &str, params: Value) -> Result<DensityClass, Failure> {
    let mut obj = match params {
        Value::Object(m) => m,
        Value::Null => Default::default(),
        _ => return Err(Failure::input("class parameters must be a JSON object")),
    };
    obj.insert("class".into(), Value::String(name.into()));
    serde_json::from_value(Value::Object(obj)).map_err(|e| Failure::input(format!("class {name}: {e}")))
}

fn run_minimax(args: &MinimaxArgs, inputs: &mut Inputs) -> Result<Outcome, Failure> {
    let a: CoefSeq = inputs.read(&args.coeffs)?;
    let params: Value = args.class_params.as_deref().map(|p| inputs.read(p)).transpose()?.unwrap_or(Value::Null);
    let problem = match (args.problem, args.noisy) {
        (ProblemArg::Extrapolation, false) => Problem::Extrapolation,
        (ProblemArg::Extrapolation, true) => Problem::ExtrapolationNoisy,
        (ProblemArg::Interpolation, false) => Problem::Interpolation,
        (ProblemArg::Interpolation, true) => Problem::InterpolationNoisy,
    };
    let (fparams, gparams) = if args.noisy {
        let g = params.get("g").cloned().ok_or_else(|| Failure::input("noisy problems need class parameters under \"g\""))?;
        (params.get("f").cloned().unwrap_or(Value::Null), Some(g))
    } else {
        (params, None)
    };
    let fclass = match (&args.pin_f, &args.class) {
        (Some(p), _) => DensityClass::Fixed { density: inputs.read(p)? },
        (None, Some(name)) => class_from(name, fparams)?,
        (None, None) => return Err(Failure::input("either --class or --pin-f is required")),
    };
    let gclass = gparams
        .map(|g| serde_json::from_value::<DensityClass>(g).map_err(|e| Failure::input(format!("noise class: {e}"))))
        .transpose()?;
    let grid = match args.grid.grid {
        Some(m) => m,
        None => default_grid()?,
    };
    let defaults = MinimaxConfig::default();
    let cfg = MinimaxConfig {
        grid,
        trunc: args.grid.trunc.unwrap_or(defaults.trunc),
        damping: args.damping.unwrap_or(defaults.damping),
        max_iter: args.max_iter.unwrap_or(defaults.max_iter),
        ..defaults
    };
    let mut sol = minimax::solve(problem, &a, &fclass, gclass.as_ref(), &cfg)?;
    let mut warnings = sol.warnings.clone();
    if let Some(n) = args.audit {
        let report = verify_saddle(&sol, n, args.seed)?;
        if report.max_violation > 1e-6 {
            warnings.push(format!("saddle audit: relative violation {:.3e}", report.max_violation));
        }
        sol = sol.with_audit(&report);
    }
    let g = Grid::new(cfg.grid)?;
    if let Some(p) = &args.emit_density {
        let mut cols: Vec<&[f64]> = vec![&sol.lf_density];
        if let Some(n) = &sol.lf_noise {
            cols.push(n);
        }
        write_csv(p, &g, &cols)?;
    }
    emit_characteristic(&args.emit_characteristic, &sol.h0, &g)?;
    let violation = check_solution(&sol);
    Ok(Outcome { output: to_value(&sol), warnings, violation })
}

fn check_solution(sol: &MinimaxSolution) -> Option<String> {
    let r = &sol.residuals;
    if r.constraint > CONSTRAINT_TOL {
        Some(format!("class constraint violated by {:.3e}", r.constraint))
    } else if r.fixedpoint > FIXEDPOINT_TOL {
        Some(format!("fixed-point residual {:.3e}", r.fixedpoint))
    } else {
        None
    }
}

fn run(cli: &Cli, inputs: &mut Inputs) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Factorize { density, grid, emit_density } => {
            let f: SpectralDensity = inputs.read(density)?;
            let g = pick_grid(grid.grid, &[&f])?;
            let l = grid.trunc.unwrap_or(DEFAULT_TRUNC);
            let szego = check_szego(&f, &g)?;
            let fact = factorize(&f, &g, l)?;
            if let Some(p) = emit_density {
                let fv = f.eval(&g)?;
                let phi: Vec<f64> = fact.phi_on_grid(g.size()).iter().map(|z| z.norm_sqr()).collect();
                write_csv(p, &g, &[&fv, &phi])?;
            }
            let mut warnings = vec![];
            if szego.clamped > 0 {
                warnings.push(format!("{} samples clamped at the floor", szego.clamped));
            }
            Ok(Outcome::ok(json!({ "szego": szego, "factorization": fact }), warnings))
        }
        Command::Predict(args) => run_estimate(args, false, inputs),
        Command::Interpolate(args) => run_estimate(args, true, inputs),
        Command::Game { coeffs, power, trunc } => {
            let a: CoefSeq = inputs.read(coeffs)?;
            let sol = solve_game(&a, *power, *trunc)?;
            Ok(Outcome::ok(to_value(&sol), vec![]))
        }
        Command::Minimax(args) => run_minimax(args, inputs),
        Command::Simulate { density, noise, coeffs, plan, n, reps, seed, burn_in, estimator_truncation } => {
            let f: SpectralDensity = inputs.read(density)?;
            let g: Option<SpectralDensity> = noise.as_deref().map(|p| inputs.read(p)).transpose()?;
            let a: CoefSeq = inputs.read(coeffs)?;
            let plan: EstimatePlan = read_wrapped(inputs, plan)?;
            let cfg = SimConfig {
                n: *n,
                reps: *reps,
                seed: *seed,
                burn_in: *burn_in,
                estimator_truncation: *estimator_truncation,
            };
            let report = mc_mse(&f, g.as_ref(), &a, &plan, &cfg)?;
            let mut warnings = vec![];
            if report.z_score.abs() > 4.0 {
                warnings.push(format!("empirical error is {:.2} standard errors from theory", report.z_score));
            }
            Ok(Outcome::ok(to_value(&report), warnings))
        }
        Command::VerifySaddle { solution, probes, seed } => {
            let sol: MinimaxSolution = read_wrapped(inputs, solution)?;
            let report = verify_saddle(&sol, *probes, *seed)?;
            let mut out = Outcome::ok(to_value(&report), vec![]);
            if report.max_violation > 1e-6 {
                out.violation = Some(format!("saddle inequalities violated by {:.3e}", report.max_violation));
            }
            Ok(out)
        }
    }
}

fn fail(f: Failure) -> ExitCode {
    let mut line = json!({ "exit": f.code, "kind": f.kind, "reason": f.reason });
    if let Some(t) = f.trace {
        line["trace"] = json!(t);
    }
    eprintln!("{line}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail(Failure::input(first.to_string()));
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return fail(Failure::input(format!("thread pool: {e}")));
        }
    }
    let start = Instant::now();
    let mut inputs = Inputs::default();
    let outcome = match run(&cli, &mut inputs) {
        Ok(o) => o,
        Err(f) => return fail(f),
    };
    let result = RunResult {
        command: argv[1..].to_vec(),
        inputs: inputs.digests,
        output: outcome.output,
        warnings: outcome.warnings,
        wall_time_s: cli.timing.then(|| start.elapsed().as_secs_f64()),
    };
    let mut text = serde_json::to_string_pretty(&result).expect("results serialize");
    text.push('\n');
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                return fail(Failure::input(format!("cannot write {}: {e}", p.display())));
            }
        }
        None => print!("{text}"),
    }
    match outcome.violation {
        Some(reason) => fail(Failure { code: 3, kind: "numerical", reason, trace: None }),
        None => ExitCode::SUCCESS,
    }
}
