//! Command-line front end: argument handling, input loading and reports.
//!
//! Every command builds a JSON report with a fixed field order. Numbers are
//! rounded to 12 significant digits; exact mode writes rationals as `p/q`
//! strings. The human-readable table is rendered from the same report.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use quasifisher::arctic::{parse_csv, reaggregate, Instance};
use quasifisher::metrics::Verdict;
use quasifisher::monopoly::{divergence_at, DivergenceWitness, RevenueOptimum};
use quasifisher::numeric::{parse_rational, round_sig};
use quasifisher::oracle::{
    grid_scan, oracle_max_revenue, oracle_min_price, region_boundary_2d, write_boundary_csv,
    write_grid_csv,
};
use quasifisher::properties::{run_suites, SuiteConfig, SuiteSummary};
use quasifisher::{
    check_clearing, check_feasible, clearing_price, divergence_witness, max_extension,
    max_revenue_price, parse_instance, solve_with, ConcaveValuation, Error, Good, MonopolyInstance,
    PriceVector, Rational, Scalar, SolveOptions,
};

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(
    name = "quasifisher",
    version,
    about = "Competitive-equilibrium clearing for budget-constrained markets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    #[default]
    Exact,
    Float,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Market or arctic bid file (.json), or buyer/bid rows (.csv).
    pub path: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Supplies for CSV input, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub supply: Vec<String>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Leave timing and timestamp out, for byte-identical reruns.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the equilibrium price, allocation, revenue and welfare.
    Solve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Iteration cap for the convex solver.
        #[arg(long, default_value_t = 1_000_000)]
        max_iterations: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check feasibility and clearing at a given price vector.
    CheckPrice {
        #[command(flatten)]
        input: InputArgs,
        /// Prices, comma-separated; decimals or p/q.
        #[arg(long, value_delimiter = ',', required = true)]
        price: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Scan the feasible region on a grid and write CSV.
    Region {
        #[command(flatten)]
        input: InputArgs,
        /// `lo:hi` for every good, or one comma-separated range per good.
        #[arg(long, value_delimiter = ',', required = true)]
        bounds: Vec<String>,
        /// Points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// Grid CSV destination.
        #[arg(long)]
        grid: PathBuf,
        /// Boundary polyline CSV destination (two goods only).
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Single-good monopoly with a concave valuation.
    Monopoly {
        /// `example-a1` or `linear:<v>`.
        #[arg(long)]
        valuation: String,
        /// Buyer budget; `inf` for none.
        #[arg(long, default_value = "inf")]
        budget: String,
        #[arg(long)]
        supply: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the structural property suites on generated markets.
    Proptest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        markets: usize,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 6)]
        max_buyers: usize,
        #[arg(long, default_value_t = 6)]
        max_goods: usize,
        /// Grid points per market.
        #[arg(long, default_value_t = 4096)]
        max_points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input, bad flags. Exit 1.
    Input(String),
    /// The methods disagree, cannot certify, or a property fails. Exit 2.
    Disagreement(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Disagreement(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Disagreement(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Disagreement { .. } | Error::NotConverged { .. } | Error::Uncertified(_) => {
                CliError::Disagreement(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// JSON value for a scalar: `p/q` text in exact mode, a rounded number
/// otherwise.
pub fn num<T: Scalar>(x: &T) -> Value {
    if T::EXACT {
        Value::String(x.to_text())
    } else {
        float(x.as_f64())
    }
}

pub fn float(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x, SIGNIFICANT_DIGITS))
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(x.to_string()))
}

fn nums<T: Scalar>(xs: &[T]) -> Value {
    Value::Array(xs.iter().map(num).collect())
}

/// Rounds every non-integer number in `v` to the report precision.
pub fn round_all(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            n.as_f64().map(float).unwrap_or(Value::Number(n))
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_all).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_all(v))).collect())
        }
        other => other,
    }
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Common report envelope.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<&'static str>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let value = round_all(serde_json::to_value(self).expect("report serializes"));
        let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
        text.push('\n');
        text
    }
}

struct Loaded {
    bytes: Vec<u8>,
    digest: InputDigest,
}

fn read_input(path: &Path) -> CliResult<Loaded> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok(Loaded { bytes, digest })
}

fn parse_scalar<T: Scalar>(text: &str, what: &str) -> CliResult<T> {
    let bad = || CliError::Input(format!("{what}: cannot read {text:?}"));
    if T::EXACT {
        parse_rational(text)
            .map(|r| T::from_rational(&r))
            .ok_or_else(bad)
    } else {
        let x: f64 = match text.split_once('/') {
            Some(_) => parse_rational(text).ok_or_else(bad)?.as_f64(),
            None => text.trim().parse().map_err(|_| bad())?,
        };
        Ok(T::from_f64(x))
    }
}

fn load<T: Scalar>(input: &InputArgs, loaded: &Loaded) -> CliResult<Instance<T>> {
    let is_csv = input
        .path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        if input.supply.is_empty() {
            return Err(CliError::Input("CSV input needs --supply".into()));
        }
        let goods = input
            .supply
            .iter()
            .enumerate()
            .map(|(j, s)| {
                Ok(Good {
                    name: quasifisher::market::good_label(j),
                    supply: parse_scalar(s, "--supply")?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(parse_csv(loaded.bytes.as_slice(), goods)?)
    } else {
        Ok(parse_instance(&loaded.bytes)?)
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Exact => "exact",
        Mode::Float => "float",
    }
}

fn finish(
    command: &'static str,
    input: Option<InputDigest>,
    mode: Option<Mode>,
    result: Value,
    started: Instant,
    output: &OutputArgs,
) -> RunReport {
    let stamp = !output.no_timestamp;
    RunReport {
        command,
        version: env!("CARGO_PKG_VERSION"),
        input,
        mode: mode.map(mode_name),
        result,
        timing_ms: stamp.then(|| started.elapsed().as_secs_f64() * 1e3),
        timestamp: stamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }),
    }
}

#[derive(Debug, Serialize)]
struct OwnerRow {
    owner: String,
    bundle: Value,
    spend: Value,
    budget: Value,
}

fn owner_rows<T: Scalar>(
    inst: &Instance<T>,
    p: &PriceVector<T>,
    x: &quasifisher::market::Allocation<T>,
) -> CliResult<Vec<OwnerRow>> {
    Ok(reaggregate(inst, p, x)?
        .into_iter()
        .map(|s| OwnerRow {
            owner: s.owner,
            bundle: nums(&s.bundle),
            spend: num(&s.spend),
            budget: num(&s.budget),
        })
        .collect())
}

fn verdict_name(v: Verdict) -> Value {
    serde_json::to_value(v).expect("verdict serializes")
}

fn solve_result<T: Scalar>(inst: &Instance<T>, opts: &SolveOptions) -> CliResult<Value> {
    let r = solve_with(&inst.market, opts)?;
    let n = inst.market.num_goods();
    let goods: Vec<&str> = inst.market.goods.iter().map(|g| g.name.as_str()).collect();
    Ok(serde_json::json!({
        "goods": goods,
        "p_star": nums(&r.p_star.0),
        "p_star_exact": r.p_star_exact.as_ref().map(|p| nums(&p.0)),
        "allocation": owner_rows(inst, &r.p_star, &r.allocation)?,
        "aggregate": nums(&r.allocation.aggregate(n)),
        "revenue": num(&r.revenue),
        "welfare": num(&r.welfare),
        "certificates": {
            "clearing": r.certificates.clearing.clearing == Some(true),
            "efficiency": verdict_name(r.certificates.efficiency.verdict),
        },
        "method_agreement": r.method_agreement,
        "diagnostics": r.diagnostics,
    }))
}

/// `solve`: report for a market file.
pub fn cmd_solve(
    input: &InputArgs,
    opts: &SolveOptions,
    output: &OutputArgs,
) -> CliResult<RunReport> {
    let started = Instant::now();
    let loaded = read_input(&input.path)?;
    let result = match input.mode {
        Mode::Exact => solve_result(&load::<Rational>(input, &loaded)?, opts)?,
        Mode::Float => solve_result(&load::<f64>(input, &loaded)?, opts)?,
    };
    Ok(finish(
        "solve",
        Some(loaded.digest),
        Some(input.mode),
        result,
        started,
        output,
    ))
}

fn check_result<T: Scalar>(inst: &Instance<T>, price: &[String]) -> CliResult<Value> {
    let p = PriceVector::new(
        price
            .iter()
            .map(|s| parse_scalar(s, "--price"))
            .collect::<CliResult<Vec<T>>>()?,
    );
    inst.market.check_prices(&p)?;
    let clearing = check_clearing(&inst.market, &p)?;
    let names = |goods: &[usize]| -> Vec<String> {
        goods
            .iter()
            .map(|&j| inst.market.goods[j].name.clone())
            .collect()
    };
    let witness = check_feasible(&inst.market, &p)?.witness.map(|w| {
        serde_json::json!({
            "goods": names(&w.goods),
            "buyers": w.buyers.iter().map(|&i| inst.market.buyers[i].name.clone()).collect::<Vec<_>>(),
            "forced_spend": num(&w.forced_spend),
            "capacity": num(&w.capacity),
        })
    });
    let extension = match max_extension(&inst.market, &p)? {
        Some((x, rev)) => serde_json::json!({
            "revenue": num(&rev),
            "allocation": owner_rows(inst, &p, &x)?,
        }),
        None => Value::Null,
    };
    Ok(serde_json::json!({
        "price": nums(&p.0),
        "feasible": clearing.feasible,
        "clearing": clearing.clearing == Some(true),
        "over_demanded": witness,
        "max_extension": extension,
    }))
}

/// `check-price`: feasibility and clearing verdicts at one price vector.
pub fn cmd_check_price(
    input: &InputArgs,
    price: &[String],
    output: &OutputArgs,
) -> CliResult<RunReport> {
    let started = Instant::now();
    let loaded = read_input(&input.path)?;
    let result = match input.mode {
        Mode::Exact => check_result(&load::<Rational>(input, &loaded)?, price)?,
        Mode::Float => check_result(&load::<f64>(input, &loaded)?, price)?,
    };
    Ok(finish(
        "check-price",
        Some(loaded.digest),
        Some(input.mode),
        result,
        started,
        output,
    ))
}

/// Where the region command writes.
pub struct RegionFiles<'a> {
    pub grid: &'a Path,
    pub boundary: Option<&'a Path>,
}

fn region_result<T: Scalar>(
    inst: &Instance<T>,
    bounds: &[String],
    resolution: usize,
    files: &RegionFiles<'_>,
) -> CliResult<Value> {
    let n = inst.market.num_goods();
    if files.boundary.is_some() && n != 2 {
        return Err(
            Error::Unsupported(format!("boundary output needs two goods, market has {n}")).into(),
        );
    }
    let ranges = bounds
        .iter()
        .map(|b| {
            let (lo, hi) = b
                .split_once(':')
                .ok_or_else(|| CliError::Input(format!("--bounds: expected lo:hi, got {b:?}")))?;
            Ok((
                parse_scalar::<T>(lo, "--bounds")?,
                parse_scalar::<T>(hi, "--bounds")?,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let ranges = match ranges.len() {
        1 => vec![ranges[0].clone(); n],
        k if k == n => ranges,
        k => {
            return Err(CliError::Input(format!(
                "--bounds: expected 1 or {n} ranges, got {k}"
            )))
        }
    };
    let grid = grid_scan(&inst.market, &ranges, resolution)?;
    write_grid_csv(&grid, fs::File::create(files.grid)?)?;
    let mut segments = None;
    if let Some(path) = files.boundary {
        let lines = region_boundary_2d(&grid)?;
        write_boundary_csv(&lines, fs::File::create(path)?)?;
        segments = Some(lines.len());
    }
    let feasible = grid.feasible_indices().len();
    let (min_price, best) = if feasible > 0 {
        // A grid too coarse to contain its own meet has no minimum point.
        let min = oracle_min_price(&grid).ok().map(|p| nums(&p.0));
        let (p, rev) = oracle_max_revenue(&grid)?;
        (
            min,
            Some(serde_json::json!({ "price": nums(&p.0), "revenue": num(&rev) })),
        )
    } else {
        (None, None)
    };
    Ok(serde_json::json!({
        "points": grid.len(),
        "feasible_points": feasible,
        "resolution": resolution,
        "step": (0..n).map(|j| grid.step(j).as_f64()).collect::<Vec<_>>(),
        "grid_csv": files.grid.display().to_string(),
        "boundary_csv": files.boundary.map(|p| p.display().to_string()),
        "boundary_segments": segments,
        "min_feasible_point": min_price,
        "max_revenue_point": best,
    }))
}

/// `region`: grid CSV and, for two goods, the boundary polylines.
pub fn cmd_region(
    input: &InputArgs,
    bounds: &[String],
    resolution: usize,
    files: &RegionFiles<'_>,
    output: &OutputArgs,
) -> CliResult<RunReport> {
    let started = Instant::now();
    let loaded = read_input(&input.path)?;
    let result = match input.mode {
        Mode::Exact => region_result(
            &load::<Rational>(input, &loaded)?,
            bounds,
            resolution,
            files,
        )?,
        Mode::Float => region_result(&load::<f64>(input, &loaded)?, bounds, resolution, files)?,
    };
    Ok(finish(
        "region",
        Some(loaded.digest),
        Some(input.mode),
        result,
        started,
        output,
    ))
}

pub fn parse_budget(text: &str) -> CliResult<f64> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(f64::INFINITY),
        t => t.parse::<f64>().ok().filter(|b| *b >= 0.0).ok_or_else(|| {
            CliError::Input(format!(
                "--budget: expected a nonnegative number or inf, got {text:?}"
            ))
        }),
    }
}

#[derive(Debug, Serialize)]
pub struct MonopolyResult {
    pub valuation: String,
    pub supply: f64,
    /// `null` when unbounded.
    pub budget: Option<f64>,
    pub clearing_price: f64,
    pub clearing_revenue: f64,
    pub optimum: RevenueOptimum,
    /// Optimum when the budget is dropped; only set for finite budgets.
    pub optimum_without_budget: Option<RevenueOptimum>,
    /// Witness at the given supply.
    pub divergence: Option<DivergenceWitness>,
    /// Smallest witness supply found by scanning.
    pub divergence_search: Option<DivergenceWitness>,
}

pub fn monopoly_result(
    valuation: &str,
    budget: f64,
    supply: f64,
    tol: f64,
) -> CliResult<MonopolyResult> {
    let inst = MonopolyInstance::new(ConcaveValuation::from_spec(valuation)?, supply, budget)?;
    let clearing = clearing_price(&inst)?;
    let optimum = max_revenue_price(&inst, tol)?;
    let optimum_without_budget = if budget.is_finite() {
        let open = MonopolyInstance::new(
            ConcaveValuation::from_spec(valuation)?,
            supply,
            f64::INFINITY,
        )?;
        Some(max_revenue_price(&open, tol)?)
    } else {
        None
    };
    Ok(MonopolyResult {
        valuation: inst.valuation.name.clone(),
        supply,
        budget: budget.is_finite().then_some(budget),
        clearing_price: clearing,
        clearing_revenue: inst.revenue_at(clearing)?,
        optimum,
        optimum_without_budget,
        divergence: divergence_at(&inst.valuation, budget, supply),
        divergence_search: divergence_witness(&inst.valuation, budget),
    })
}

/// `monopoly`: clearing versus revenue-optimal pricing.
pub fn cmd_monopoly(
    valuation: &str,
    budget: &str,
    supply: f64,
    tol: f64,
    output: &OutputArgs,
) -> CliResult<RunReport> {
    let started = Instant::now();
    let result = monopoly_result(valuation, parse_budget(budget)?, supply, tol)?;
    let value = serde_json::to_value(result).expect("plain data serializes");
    Ok(finish("monopoly", None, None, value, started, output))
}

/// `proptest`: the suites, and whether all passed.
pub fn cmd_proptest(cfg: &SuiteConfig, output: &OutputArgs) -> CliResult<(RunReport, bool)> {
    let started = Instant::now();
    let summary: SuiteSummary = run_suites(cfg)?;
    let passed = summary.passed();
    let mut value = serde_json::to_value(&summary).expect("plain data serializes");
    if let Value::Object(map) = &mut value {
        map.insert("seed".into(), cfg.seed.into());
        map.insert("passed".into(), passed.into());
    }
    Ok((
        finish("proptest", None, None, value, started, output),
        passed,
    ))
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(xs) => format!("({})", xs.iter().map(text).collect::<Vec<_>>().join(", ")),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Human-readable rendering of a report.
pub fn render_table(report: &RunReport) -> String {
    let v = round_all(serde_json::to_value(report).expect("report serializes"));
    let r = &v["result"];
    let mut out = String::new();
    let mut line = |k: &str, val: String| out.push_str(&format!("{k:<24}{val}\n"));
    match report.command {
        "solve" => {
            line("equilibrium price", text(&r["p_star"]));
            line("revenue", text(&r["revenue"]));
            line("welfare", text(&r["welfare"]));
            line("aggregate allocation", text(&r["aggregate"]));
            line("clearing certified", text(&r["certificates"]["clearing"]));
            line("efficiency", text(&r["certificates"]["efficiency"]));
            line("method agreement", text(&r["method_agreement"]));
            for row in r["allocation"].as_array().into_iter().flatten() {
                line(
                    &format!("  {}", text(&row["owner"])),
                    format!("{}  spend {}", text(&row["bundle"]), text(&row["spend"])),
                );
            }
        }
        "check-price" => {
            line("price", text(&r["price"]));
            line("feasible", text(&r["feasible"]));
            line("clearing", text(&r["clearing"]));
            line(
                "max-extension revenue",
                text(&r["max_extension"]["revenue"]),
            );
            if !r["over_demanded"].is_null() {
                line("over-demanded goods", text(&r["over_demanded"]["goods"]));
            }
        }
        "region" => {
            line("grid points", text(&r["points"]));
            line("feasible points", text(&r["feasible_points"]));
            line("min feasible point", text(&r["min_feasible_point"]));
            line("max revenue point", text(&r["max_revenue_point"]["price"]));
            line("grid csv", text(&r["grid_csv"]));
            line("boundary csv", text(&r["boundary_csv"]));
        }
        "monopoly" => {
            line("valuation", text(&r["valuation"]));
            line("clearing price", text(&r["clearing_price"]));
            line("clearing revenue", text(&r["clearing_revenue"]));
            let opt = &r["optimum"];
            line(
                "optimum (p, x, R)",
                format!(
                    "({}, {}, {})",
                    text(&opt["price"]),
                    text(&opt["quantity"]),
                    text(&opt["revenue"])
                ),
            );
            let open = &r["optimum_without_budget"];
            if !open.is_null() {
                line(
                    "without budget",
                    format!(
                        "({}, {}, {})",
                        text(&open["price"]),
                        text(&open["quantity"]),
                        text(&open["revenue"])
                    ),
                );
            }
            let w = &r["divergence"];
            line(
                "divergence at supply",
                if w.is_null() {
                    "none".into()
                } else {
                    format!(
                        "eps {} revenue {} > {}",
                        text(&w["epsilon"]),
                        text(&w["revenue_below"]),
                        text(&w["revenue_at_supply"])
                    )
                },
            );
        }
        "proptest" => {
            for s in r["suites"].as_array().into_iter().flatten() {
                let status = if s["failures"].as_array().is_some_and(|f| f.is_empty()) {
                    "PASS"
                } else {
                    "FAIL"
                };
                line(
                    &text(&s["name"]),
                    format!(
                        "{status}  cases {}  worst {}",
                        text(&s["cases"]),
                        text(&s["worst"])
                    ),
                );
                for f in s["failures"].as_array().into_iter().flatten() {
                    line("", text(f));
                }
            }
            line(
                "not upward closed",
                format!(
                    "{} of {} markets",
                    text(&r["upward_closure_counterexamples"]),
                    text(&r["markets"])
                ),
            );
        }
        _ => {}
    }
    out
}

fn emit(report: &RunReport, output: &OutputArgs) -> CliResult<()> {
    let json = report.to_json();
    if let Some(path) = &output.out {
        fs::write(path, &json)?;
    }
    let mut stdout = std::io::stdout().lock();
    let shown = if output.json {
        json
    } else {
        render_table(report)
    };
    stdout.write_all(shown.as_bytes())?;
    Ok(())
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Solve {
            input,
            tol,
            max_iterations,
            output,
        } => {
            let opts = SolveOptions {
                tol: *tol,
                max_iterations: *max_iterations,
                ..SolveOptions::default()
            };
            cmd_solve(input, &opts, output).and_then(|r| emit(&r, output))
        }
        Command::CheckPrice {
            input,
            price,
            output,
        } => cmd_check_price(input, price, output).and_then(|r| emit(&r, output)),
        Command::Region {
            input,
            bounds,
            resolution,
            grid,
            boundary,
            output,
        } => {
            let files = RegionFiles {
                grid,
                boundary: boundary.as_deref(),
            };
            cmd_region(input, bounds, *resolution, &files, output).and_then(|r| emit(&r, output))
        }
        Command::Monopoly {
            valuation,
            budget,
            supply,
            tol,
            output,
        } => cmd_monopoly(valuation, budget, *supply, *tol, output).and_then(|r| emit(&r, output)),
        Command::Proptest {
            seed,
            markets,
            pairs,
            max_buyers,
            max_goods,
            max_points,
            output,
        } => {
            let cfg = SuiteConfig {
                markets: *markets,
                max_buyers: *max_buyers,
                max_goods: *max_goods,
                pairs: *pairs,
                max_points: *max_points,
                seed: *seed,
                ..SuiteConfig::default()
            };
            cmd_proptest(&cfg, output).and_then(|(r, passed)| {
                emit(&r, output)?;
                if passed {
                    Ok(())
                } else {
                    Err(CliError::Disagreement("property suites failed".into()))
                }
            })
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
