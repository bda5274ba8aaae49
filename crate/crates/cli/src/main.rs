//! Thin command-line driver. Subcommands map one-to-one onto library
//! operations; all estimation logic lives in `wedgecp-core`.
//!
//! Exit codes: 0 success, 1 invalid arguments (including config file
//! problems), 2 runtime failures, 3 a `--check` threshold failed.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wedgecp_core::blocks::verify_containment_with_beta;
use wedgecp_core::exact::{format_rat, parse_rat, Rat};
use wedgecp_core::{
    evolve, evolve_gbt, run_from_config, solve_integer_wedge, verify_containment, Configuration,
    Error as CoreError, EventTimeline, EvolveOptions, ExperimentConfig, GbtConfiguration,
    GbtRates, GbtState, HalfSpace, Region, SeedRecord, SiteWindow, TimelineParams, Wedge, YRegion,
};

mod output;

/// Failures carry their exit code: usage problems exit 1, runtime problems
/// exit 2. `--check` threshold misses are handled separately (exit 3).
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::Parse(_) | CoreError::DegenerateGeometry(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

#[derive(Parser)]
#[command(
    name = "wedgecp",
    version,
    about = "Contact-process simulation in space-time wedges, exact block geometry, and replicated experiments",
    after_help = "Exit codes: 0 ok, 1 invalid arguments, 2 runtime error, 3 --check threshold failed.\n\
                  Seed resolution: --seed, then the config file, then WEDGECP_SEED, then 0."
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file mirroring the experiment configuration; explicit
    /// flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replica count for estimating subcommands.
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Time horizon of the simulated processes.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Extra sites added to each end of explicitly sized windows
    /// (simulate, gbt, lambda-c).
    #[arg(long, global = true, default_value_t = 0)]
    window_margin: i64,
    /// Write manifest.json, report.json and per-command CSV/JSONL files
    /// here (created if missing) instead of printing the report.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Enforce the per-command result thresholds; a miss exits with 3.
    #[arg(long, global = true)]
    check: bool,
    /// Accepted for interface stability; execution is single-threaded so
    /// results stay bit-reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the two-state process once and dump the trajectory.
    Simulate(SimulateArgs),
    /// Evolve the three-state process once and dump the trajectory.
    Gbt(GbtArgs),
    /// Exact rational geometry: integer solutions, containment, corners.
    Geometry {
        #[command(subcommand)]
        cmd: GeometryCmd,
    },
    /// Renormalized-lattice crossing experiments.
    Percolation(PercolationArgs),
    /// Wedge survival proportion over a grid of base widths.
    SurvivalCurve(SurvivalCurveArgs),
    /// Speed of the rightmost occupied site from a half-line start.
    EdgeSpeed(EdgeSpeedArgs),
    /// Coupled wedge / half-space / dense-start comparison.
    CouplingCheck(CouplingArgs),
    /// Three-state weak-coexistence experiment.
    GbtCoexistence(GbtCoexistenceArgs),
    /// Bisection estimate of the critical rate.
    LambdaC(LambdaCArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Infection rate.
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    /// Number of lattice sites; the window is centered on the origin.
    #[arg(long, default_value_t = 21)]
    sites: u32,
    /// Initial state: single:X, interval:A,B, left:X, or all.
    #[arg(long, default_value = "single:0")]
    initial: String,
    /// Confining region: full, wedge:AL,AR,M, or half:AR,M with rational
    /// speeds.
    #[arg(long, default_value = "full")]
    region: String,
}

#[derive(Args)]
struct GbtArgs {
    /// Arrow rate (spread rate of the weak type).
    #[arg(long, default_value_t = 4.0)]
    lambda1: f64,
    /// Spread rate of the strong type; at most lambda1.
    #[arg(long, default_value_t = 2.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 41)]
    sites: u32,
    /// Initial state: twoleft (2s left of the origin, one 1 at it) or
    /// states:S,S,... with one digit in {0,1,2} per site.
    #[arg(long, default_value = "twoleft")]
    initial: String,
}

#[derive(Subcommand)]
enum GeometryCmd {
    /// Smallest integer branch counts aligning the block region with a
    /// wedge; prints {m, c, beta, ell, d}.
    IntegerSolution(TripleArgs),
    /// Exact corner-by-corner containment of the scaled region in its
    /// wedge. With --check, a failed containment exits 3.
    Containment(ContainmentArgs),
    /// Dump every cell corner of the assembled region (CSV and SVG with
    /// --out-dir).
    Corners(CornersArgs),
}

#[derive(Args)]
struct TripleArgs {
    /// Drift speed of the block construction, as p/q.
    #[arg(long)]
    alpha: String,
    /// Left wedge speed, as p/q.
    #[arg(long)]
    alpha_l: String,
    /// Right wedge speed, as p/q.
    #[arg(long)]
    alpha_r: String,
}

#[derive(Args)]
struct ContainmentArgs {
    #[command(flatten)]
    triple: TripleArgs,
    /// Lattice rows to verify (corners are affine in the row index, so
    /// passing rows extend to all rows when the slope test passes).
    #[arg(long, default_value_t = 50)]
    rows: i64,
    /// Wedge width; defaults to alpha * (ell + 3), which scales the region
    /// to unit cells.
    #[arg(long)]
    m_wedge: Option<String>,
    /// Assemble with this band width instead of the solved one (negative
    /// control: a perturbed band must escape).
    #[arg(long)]
    perturb_beta: Option<String>,
}

#[derive(Args)]
struct CornersArgs {
    #[command(flatten)]
    triple: TripleArgs,
    #[arg(long, default_value_t = 2)]
    rows: i64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PercolationMode {
    /// Frequency of the fully crossed base block vs the per-cell product
    /// bound over a grid of scales.
    BlockOpen,
    /// Frequency of an open lattice path to a target row, with witnesses
    /// spot-checked against explicit active paths.
    OpenPath,
}

#[derive(Args)]
struct PercolationArgs {
    #[arg(long, value_enum)]
    mode: PercolationMode,
    #[arg(long)]
    lambda: Option<f64>,
    /// block-open: branch counts and band geometry.
    #[arg(long)]
    ell: Option<i64>,
    #[arg(long)]
    d: Option<i64>,
    #[arg(long)]
    alpha_hat: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// block-open: comma-separated scale grid.
    #[arg(long)]
    m_list: Option<String>,
    /// open-path: target speeds solved into an integer alignment.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    alpha_l: Option<String>,
    #[arg(long)]
    alpha_r: Option<String>,
    /// open-path: total region width.
    #[arg(long)]
    m: Option<i64>,
    /// open-path: target lattice row.
    #[arg(long)]
    k: Option<i64>,
}

#[derive(Args)]
struct SurvivalCurveArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha_l: Option<String>,
    #[arg(long)]
    alpha_r: Option<String>,
    /// Comma-separated wedge base widths.
    #[arg(long)]
    m_list: Option<String>,
}

#[derive(Args)]
struct EdgeSpeedArgs {
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct CouplingArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha_l: Option<String>,
    #[arg(long)]
    alpha_r: Option<String>,
    /// Wedge base width.
    #[arg(long)]
    m: Option<i64>,
    /// Burn-in time for the dense-start lane.
    #[arg(long)]
    burn_in: Option<f64>,
    /// Occupied-count band as two slopes a,b (count in [a t, b t]).
    #[arg(long)]
    band: Option<String>,
}

#[derive(Args)]
struct GbtCoexistenceArgs {
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Occupied-1-count the mass event requires at the horizon.
    #[arg(long)]
    threshold: Option<u64>,
}

#[derive(Args)]
struct LambdaCArgs {
    #[arg(long, allow_negative_numbers = true)]
    window_min: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    window_max: Option<i64>,
    /// Final bracket width.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version are successful outputs, not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    let common = cli.common.clone();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        if t > 1 {
            eprintln!("note: running single-threaded; results are seed-deterministic");
        }
    }
    if common.window_margin < 0 {
        return Err(usage("--window-margin must be >= 0"));
    }
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(&common, args),
        Command::Gbt(args) => cmd_gbt(&common, args),
        Command::Geometry { cmd } => cmd_geometry(&common, cmd),
        Command::Percolation(args) => cmd_percolation(&common, args),
        Command::SurvivalCurve(args) => cmd_survival(&common, args),
        Command::EdgeSpeed(args) => cmd_edge_speed(&common, args),
        Command::CouplingCheck(args) => cmd_coupling(&common, args),
        Command::GbtCoexistence(args) => cmd_coexistence(&common, args),
        Command::LambdaC(args) => cmd_lambda_c(&common, args),
    }
}

// -------------------------------------------------------------------------
// shared plumbing
// -------------------------------------------------------------------------

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("WEDGECP_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| usage(format!("WEDGECP_SEED is not an unsigned integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn load_config_file(common: &Common) -> CliResult<ExperimentConfig> {
    match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| runtime(format!("config file {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("config file {}: {e}", path.display())))
        }
        None => Ok(ExperimentConfig::default()),
    }
}

/// Seed precedence: explicit flag, then config file, then environment.
fn resolve_seed(common: &Common, cfg: &ExperimentConfig) -> CliResult<u64> {
    Ok(common.seed.or(cfg.seed).or(env_seed()?).unwrap_or(0))
}

fn override_common(cfg: &mut ExperimentConfig, common: &Common) -> CliResult<()> {
    cfg.seed = Some(resolve_seed(common, cfg)?);
    if common.replicas.is_some() {
        cfg.replicas = common.replicas;
    }
    if common.horizon.is_some() {
        cfg.horizon = common.horizon;
    }
    Ok(())
}

fn set<T>(dst: &mut Option<T>, src: &Option<T>)
where
    T: Clone,
{
    if src.is_some() {
        *dst = src.clone();
    }
}

fn parse_i64_list(s: &str) -> CliResult<Vec<i64>> {
    s.split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|_| usage(format!("bad integer list entry {p:?}"))))
        .collect()
}

fn parse_pair(s: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(usage(format!("expected two comma-separated numbers, got {s:?}")));
    }
    let a = parts[0].trim().parse::<f64>().map_err(|_| usage(format!("bad number {:?}", parts[0])))?;
    let b = parts[1].trim().parse::<f64>().map_err(|_| usage(format!("bad number {:?}", parts[1])))?;
    Ok((a, b))
}

fn rational(s: &str) -> CliResult<Rat> {
    parse_rat(s).map_err(|e| usage(e.to_string()))
}

/// Runs a config-described experiment and emits its outputs. `verdict`
/// inspects the report for the `--check` thresholds and returns a failure
/// description when one is missed.
fn run_experiment(
    common: &Common,
    cfg: ExperimentConfig,
    csv: Option<(&str, fn(&Value) -> Option<String>)>,
    verdict: impl Fn(&Value) -> Option<String>,
) -> CliResult<u8> {
    let report = run_from_config(&cfg)?;
    let mut extra = Vec::new();
    if let Some((name, render)) = csv {
        if let Some(body) = render(&report) {
            extra.push((name.to_string(), body));
        }
    }
    output::emit(common, &cfg.experiment, Some(&cfg), &report, &extra)?;
    finish(common, &report, verdict(&report))
}

/// Applies the `--check` verdict: prints it and maps a miss to exit 3.
fn finish(common: &Common, report: &Value, failure: Option<String>) -> CliResult<u8> {
    if common.out_dir.is_none() {
        println!(
            "{}",
            serde_json::to_string_pretty(report).map_err(|e| runtime(e.to_string()))?
        );
    }
    if common.check {
        match failure {
            None => {
                eprintln!("check: ok");
                Ok(0)
            }
            Some(why) => {
                eprintln!("check: FAILED: {why}");
                Ok(3)
            }
        }
    } else {
        Ok(0)
    }
}

fn field_bool(v: &Value, path: &[&str]) -> Option<bool> {
    let mut cur = v;
    for p in path {
        cur = cur.get(p)?;
    }
    cur.as_bool()
}

fn field_f64(v: &Value, path: &[&str]) -> Option<f64> {
    let mut cur = v;
    for p in path {
        cur = cur.get(p)?;
    }
    cur.as_f64()
}

// -------------------------------------------------------------------------
// simulate / gbt
// -------------------------------------------------------------------------

fn centered_window(sites: u32, margin: i64) -> CliResult<SiteWindow> {
    if sites == 0 {
        return Err(usage("--sites must be at least 1"));
    }
    let n = sites as i64;
    let min = -(n / 2) - margin;
    let max = min + n - 1 + 2 * margin;
    SiteWindow::new(min, max).map_err(CliError::from)
}

fn parse_initial(spec: &str, window: SiteWindow) -> CliResult<Configuration> {
    let bad = || usage(format!("bad --initial {spec:?}; expected single:X, interval:A,B, left:X or all"));
    if spec == "all" {
        return Ok(Configuration::all_occupied(window));
    }
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "single" => {
            let x = rest.parse::<i64>().map_err(|_| bad())?;
            Configuration::single(window, x).map_err(CliError::from)
        }
        "interval" => {
            let (a, b) = rest.split_once(',').ok_or_else(bad)?;
            let a = a.trim().parse::<i64>().map_err(|_| bad())?;
            let b = b.trim().parse::<i64>().map_err(|_| bad())?;
            Configuration::interval(window, a, b).map_err(CliError::from)
        }
        "left" => {
            let x = rest.parse::<i64>().map_err(|_| bad())?;
            Ok(Configuration::left_occupied(window, x))
        }
        _ => Err(bad()),
    }
}

fn parse_region(spec: &str) -> CliResult<Region> {
    if spec == "full" {
        return Ok(Region::Full);
    }
    let bad = || usage(format!("bad --region {spec:?}; expected full, wedge:AL,AR,M or half:AR,M"));
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(',').collect();
    match (kind, parts.as_slice()) {
        ("wedge", [al, ar, m]) => {
            let w = Wedge::new(rational(al.trim())?, rational(ar.trim())?, rational(m.trim())?)?;
            Ok(Region::Wedge(w))
        }
        ("half", [ar, m]) => {
            let h = HalfSpace::new(rational(ar.trim())?, rational(m.trim())?)?;
            Ok(Region::HalfSpace(h))
        }
        _ => Err(bad()),
    }
}

fn cmd_simulate(common: &Common, args: &SimulateArgs) -> CliResult<u8> {
    let cfg = load_config_file(common)?;
    let seed = resolve_seed(common, &cfg)?;
    let horizon = common.horizon.or(cfg.horizon).unwrap_or(10.0);
    let window = centered_window(args.sites, common.window_margin)?;
    let region = parse_region(&args.region)?;
    let initial = parse_initial(&args.initial, window)?;
    let params = TimelineParams {
        window,
        horizon,
        lambda: args.lambda,
        one_only_prob: 0.0,
        seed: SeedRecord::new(seed, 0),
    };
    let tl = EventTimeline::build(params)?;
    let traj = evolve(&tl, &region, &initial, &EvolveOptions {
        record_changes: true,
        ..Default::default()
    })?;
    let report = json!({
        "command": "simulate",
        "lambda": args.lambda,
        "horizon": horizon,
        "window": [window.min, window.max],
        "region": args.region,
        "initial": args.initial,
        "seed": seed,
        "survived": traj.survived(),
        "extinct_at": traj.extinct_at,
        "touched_left": traj.touched_left,
        "touched_right": traj.touched_right,
        "changes": traj.changes.len(),
        "final_occupied": traj.final_state.occupied_sites().collect::<Vec<_>>(),
        "timestamp_unix": output::now_unix(),
    });
    let mut csv = String::from("t,x,occupied\n");
    for c in &traj.changes {
        csv.push_str(&format!("{},{},{}\n", c.t, c.x, u8::from(c.occupied)));
    }
    let mut events = Vec::new();
    tl.write_jsonl(&mut events).map_err(CliError::from)?;
    let extra = vec![
        ("changes.csv".to_string(), csv),
        ("events.jsonl".to_string(), String::from_utf8(events).expect("jsonl is utf-8")),
    ];
    output::emit(common, "simulate", None, &report, &extra)?;
    finish(common, &report, None)
}

fn parse_gbt_initial(spec: &str, window: SiteWindow) -> CliResult<GbtConfiguration> {
    if spec == "twoleft" {
        return GbtConfiguration::two_left_one_origin(window).map_err(CliError::from);
    }
    let bad = || usage(format!("bad --initial {spec:?}; expected twoleft or states:S,S,..."));
    let rest = spec.strip_prefix("states:").ok_or_else(bad)?;
    let states = rest
        .split(',')
        .map(|p| match p.trim() {
            "0" => Ok(GbtState::Empty),
            "1" => Ok(GbtState::One),
            "2" => Ok(GbtState::Two),
            other => Err(usage(format!("bad site state {other:?}"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    if states.len() != window.len() {
        return Err(usage(format!(
            "--initial lists {} states but the window has {} sites",
            states.len(),
            window.len()
        )));
    }
    GbtConfiguration::from_states(window, states).map_err(CliError::from)
}

fn cmd_gbt(common: &Common, args: &GbtArgs) -> CliResult<u8> {
    let cfg = load_config_file(common)?;
    let seed = resolve_seed(common, &cfg)?;
    let horizon = common.horizon.or(cfg.horizon).unwrap_or(10.0);
    let window = centered_window(args.sites, common.window_margin)?;
    let rates = GbtRates::new(args.lambda1, args.lambda2)?;
    let initial = parse_gbt_initial(&args.initial, window)?;
    let params = rates.timeline_params(window, horizon, SeedRecord::new(seed, 0));
    let tl = EventTimeline::build(params)?;
    let traj = evolve_gbt(&tl, &Region::Full, &initial, &EvolveOptions {
        record_changes: true,
        ..Default::default()
    })?;
    let count = |s: GbtState| traj.final_state.count_of(s);
    let report = json!({
        "command": "gbt",
        "lambda1": args.lambda1,
        "lambda2": args.lambda2,
        "horizon": horizon,
        "window": [window.min, window.max],
        "initial": args.initial,
        "seed": seed,
        "final_counts": {"empty": count(GbtState::Empty), "one": count(GbtState::One), "two": count(GbtState::Two)},
        "touched_left": traj.touched_left,
        "touched_right": traj.touched_right,
        "changes": traj.changes.len(),
        "timestamp_unix": output::now_unix(),
    });
    let mut csv = String::from("t,x,state\n");
    for c in &traj.changes {
        csv.push_str(&format!("{},{},{}\n", c.t, c.x, c.state as u8));
    }
    let mut events = Vec::new();
    tl.write_jsonl(&mut events).map_err(CliError::from)?;
    let extra = vec![
        ("changes.csv".to_string(), csv),
        ("events.jsonl".to_string(), String::from_utf8(events).expect("jsonl is utf-8")),
    ];
    output::emit(common, "gbt", None, &report, &extra)?;
    finish(common, &report, None)
}

// -------------------------------------------------------------------------
// geometry
// -------------------------------------------------------------------------

fn cmd_geometry(common: &Common, cmd: &GeometryCmd) -> CliResult<u8> {
    match cmd {
        GeometryCmd::IntegerSolution(t) => {
            let sol = solve_integer_wedge(&rational(&t.alpha)?, &rational(&t.alpha_l)?, &rational(&t.alpha_r)?)?;
            // Stable, minimal shape; band width as an exact p/q string.
            let report = json!({
                "m": sol.m,
                "c": sol.c,
                "beta": format_rat(&sol.beta),
                "ell": sol.ell,
                "d": sol.d,
            });
            output::emit(common, "integer-solution", None, &report, &[])?;
            if common.out_dir.is_none() {
                println!("{}", serde_json::to_string(&report).map_err(|e| runtime(e.to_string()))?);
            }
            if common.check {
                eprintln!("check: ok");
            }
            Ok(0)
        }
        GeometryCmd::Containment(args) => {
            let alpha = rational(&args.triple.alpha)?;
            let al = rational(&args.triple.alpha_l)?;
            let ar = rational(&args.triple.alpha_r)?;
            let sol = solve_integer_wedge(&alpha, &al, &ar)?;
            let m_wedge = match &args.m_wedge {
                Some(s) => rational(s)?,
                None => &alpha * wedgecp_core::exact::rat_int(sol.ell + 3),
            };
            let report = match &args.perturb_beta {
                Some(b) => verify_containment_with_beta(&sol, &al, &ar, &m_wedge, args.rows, &rational(b)?)?,
                None => verify_containment(&sol, &al, &ar, &m_wedge, args.rows)?,
            };
            let ok = report.ok;
            let value = serde_json::to_value(&report).map_err(|e| runtime(e.to_string()))?;
            output::emit(common, "containment", None, &value, &[])?;
            finish(common, &value, (!ok).then(|| "a corner escaped its envelope".to_string()))
        }
        GeometryCmd::Corners(args) => {
            let alpha = rational(&args.triple.alpha)?;
            let al = rational(&args.triple.alpha_l)?;
            let ar = rational(&args.triple.alpha_r)?;
            if args.rows < 0 {
                return Err(usage("--rows must be >= 0"));
            }
            let sol = solve_integer_wedge(&alpha, &al, &ar)?;
            let y = YRegion::assemble_geometry(
                sol.ell,
                sol.d,
                wedgecp_core::exact::rat_int(1),
                sol.alpha.clone(),
                sol.beta.clone(),
            )?;
            let (csv, svg, cells) = output::corner_dump(&y, args.rows)?;
            let report = json!({
                "command": "geometry corners",
                "solution": serde_json::to_value(&sol).map_err(|e| runtime(e.to_string()))?,
                "rows": args.rows,
                "cells": cells,
                "timestamp_unix": output::now_unix(),
            });
            let extra = vec![("corners.csv".to_string(), csv), ("corners.svg".to_string(), svg)];
            output::emit(common, "corners", None, &report, &extra)?;
            finish(common, &report, None)
        }
    }
}

// -------------------------------------------------------------------------
// experiment subcommands
// -------------------------------------------------------------------------

fn cmd_percolation(common: &Common, args: &PercolationArgs) -> CliResult<u8> {
    let mut cfg = load_config_file(common)?;
    cfg.experiment = match args.mode {
        PercolationMode::BlockOpen => "block-open".into(),
        PercolationMode::OpenPath => "open-path".into(),
    };
    override_common(&mut cfg, common)?;
    set(&mut cfg.lambda, &args.lambda);
    set(&mut cfg.ell, &args.ell);
    set(&mut cfg.d, &args.d);
    set(&mut cfg.alpha_hat, &args.alpha_hat);
    set(&mut cfg.beta, &args.beta);
    set(&mut cfg.alpha, &args.alpha);
    set(&mut cfg.alpha_l, &args.alpha_l);
    set(&mut cfg.alpha_r, &args.alpha_r);
    set(&mut cfg.m, &args.m);
    set(&mut cfg.k, &args.k);
    if let Some(list) = &args.m_list {
        cfg.m_list = Some(parse_i64_list(list)?);
    }
    let mode = args.mode;
    run_experiment(
        common,
        cfg,
        Some(("points.csv", output::block_open_csv)),
        move |report| match mode {
            PercolationMode::BlockOpen => {
                if field_bool(report, &["nondecreasing"]) != Some(true) {
                    return Some("open frequency not nondecreasing over the scale grid".into());
                }
                let all_bounds = report["points"]
                    .as_array()
                    .is_some_and(|pts| pts.iter().all(|p| p["bound_ok"].as_bool() == Some(true)));
                (!all_bounds).then(|| "per-cell product bound violated".into())
            }
            PercolationMode::OpenPath => {
                if field_bool(report, &["certificates_ok"]) != Some(true) {
                    return Some("an open-path witness had no active path".into());
                }
                (field_bool(report, &["k0_matches_base"]) == Some(false))
                    .then(|| "depth-0 path event disagreed with the base event".into())
            }
        },
    )
}

fn cmd_survival(common: &Common, args: &SurvivalCurveArgs) -> CliResult<u8> {
    let mut cfg = load_config_file(common)?;
    cfg.experiment = "survival-curve".into();
    override_common(&mut cfg, common)?;
    set(&mut cfg.lambda, &args.lambda);
    set(&mut cfg.alpha_l, &args.alpha_l);
    set(&mut cfg.alpha_r, &args.alpha_r);
    if let Some(list) = &args.m_list {
        cfg.m_list = Some(parse_i64_list(list)?);
    }
    run_experiment(common, cfg, Some(("survival_curve.csv", output::survival_csv)), |report| {
        if field_bool(report, &["per_replica_monotone"]) != Some(true) {
            return Some("a wider wedge lost a replica a narrower one kept".into());
        }
        (field_bool(report, &["nondecreasing"]) != Some(true))
            .then(|| "survival proportions decreased with the width".into())
    })
}

fn cmd_edge_speed(common: &Common, args: &EdgeSpeedArgs) -> CliResult<u8> {
    let mut cfg = load_config_file(common)?;
    cfg.experiment = "edge-speed".into();
    override_common(&mut cfg, common)?;
    set(&mut cfg.lambda, &args.lambda);
    run_experiment(common, cfg, None, |report| {
        (field_bool(report, &["insufficient_data"]) != Some(false))
            .then(|| "fewer than 30 surviving replicas".into())
    })
}

fn cmd_coupling(common: &Common, args: &CouplingArgs) -> CliResult<u8> {
    let mut cfg = load_config_file(common)?;
    cfg.experiment = "coupling-check".into();
    override_common(&mut cfg, common)?;
    set(&mut cfg.lambda, &args.lambda);
    set(&mut cfg.alpha_l, &args.alpha_l);
    set(&mut cfg.alpha_r, &args.alpha_r);
    set(&mut cfg.m, &args.m);
    set(&mut cfg.burn_in, &args.burn_in);
    if let Some(band) = &args.band {
        cfg.growth_band = Some(parse_pair(band)?);
    }
    run_experiment(common, cfg, Some(("checkpoints.csv", output::coupling_csv)), |report| {
        if field_bool(report, &["identity_all_checkpoints"]) != Some(true) {
            return Some("the exact interval identity between the wedge and half-space lanes failed".into());
        }
        match field_f64(report, &["final_disagreement"]) {
            Some(d) if d <= 0.01 => None,
            Some(d) => Some(format!("final dense-lane disagreement {d:.4} > 1%")),
            None => Some("no survivors at the final checkpoint".into()),
        }
    })
}

fn cmd_coexistence(common: &Common, args: &GbtCoexistenceArgs) -> CliResult<u8> {
    let mut cfg = load_config_file(common)?;
    cfg.experiment = "gbt-coexistence".into();
    override_common(&mut cfg, common)?;
    set(&mut cfg.lambda1, &args.lambda1);
    set(&mut cfg.lambda2, &args.lambda2);
    set(&mut cfg.threshold, &args.threshold);
    run_experiment(common, cfg, None, |report| {
        if field_bool(report, &["mass_interval_excludes_zero"]) != Some(true) {
            return Some("mass interval does not exclude zero".into());
        }
        (field_bool(report, &["independence", "ok"]) != Some(true))
            .then(|| "event product independence check failed".into())
    })
}

fn cmd_lambda_c(common: &Common, args: &LambdaCArgs) -> CliResult<u8> {
    let mut cfg = load_config_file(common)?;
    cfg.experiment = "lambda-c".into();
    override_common(&mut cfg, common)?;
    set(&mut cfg.window_min, &args.window_min);
    set(&mut cfg.window_max, &args.window_max);
    set(&mut cfg.tolerance, &args.tolerance);
    if common.window_margin > 0 {
        cfg.window_min = Some(cfg.window_min.unwrap_or(-25) - common.window_margin);
        cfg.window_max = Some(cfg.window_max.unwrap_or(25) + common.window_margin);
    }
    run_experiment(common, cfg, Some(("probes.csv", output::lambda_c_csv)), |report| {
        let width = report["bracket"][1].as_f64().zip(report["bracket"][0].as_f64()).map(|(b, a)| b - a);
        let tol = field_f64(report, &["tolerance"]);
        match (width, tol) {
            (Some(w), Some(t)) if w <= t + 1e-12 => None,
            (Some(w), Some(t)) => Some(format!("bracket width {w} exceeds tolerance {t}")),
            _ => Some("bracket missing from the report".into()),
        }
    })
}
