use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use homotopy_planner::geometry::{build_path, read_waypoints_csv, Footprint, DEFAULT_POINT_THRESHOLD, DEFAULT_SCAN_STEP};
use homotopy_planner::homotopy::{deadlock_check, default_n_csp, enumerate_classes, rank_classes, ClassStatus, DeadlockStatus, RankConfig};
use homotopy_planner::model::{assemble, dump::write_miqp, Encoding, GameSpec, Mode};
use homotopy_planner::report;
use homotopy_planner::scenario::{bounds_from_paths, load_scenario_or_bundled, BoundsEntry, ConflictEntry, GeometryEntry, DEFAULT_RESAMPLE_STEP};
use homotopy_planner::sim::{compute_metrics, compute_task_metrics, run_mpc, verify_solution, MpcConfig, SimOutcome};
use homotopy_planner::solver::{solve_miqp, BnbConfig};
use homotopy_planner::{HomotopyError, ScenarioError, SolverError};

const EXIT_USAGE: u8 = 64;
const EXIT_INFEASIBLE: u8 = 5;

/// Homotopy-aware game-theoretic trajectory planner.
#[derive(Parser)]
#[command(name = "hplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one MIQP and write the joint plan.
    Solve(SolveArgs),
    /// Solve every homotopy class and write a per-class report.
    Enumerate(EnumerateArgs),
    /// List which classes are deadlocks.
    Deadlock(DeadlockArgs),
    /// Run the receding-horizon loop.
    Simulate(SimulateArgs),
    /// Conflict bounds from raw waypoint paths.
    Geometry(GeometryArgs),
    /// Progress-plane and time plots of a solution or trace CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SolverOpts {
    /// Absolute optimality gap.
    #[arg(long, default_value_t = 1e-6)]
    mip_gap: f64,
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Seconds per branch-and-bound solve.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl SolverOpts {
    fn config(&self) -> BnbConfig {
        BnbConfig {
            mip_gap: self.mip_gap,
            max_nodes: self.max_nodes,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            ..BnbConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario file or bundled scenario name.
    scenario: String,
    /// free, none, or fixed:<bits> (x leaves a pair free).
    #[arg(long)]
    mode: Option<String>,
    /// six or refined.
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long, default_value = "solution.csv")]
    out: PathBuf,
    /// Also write the assembled MIQP in the exchange format.
    #[arg(long)]
    dump_miqp: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverOpts,
}

#[derive(Args)]
struct EnumerateArgs {
    scenario: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Run the receding-horizon loop per feasible class and add its metrics.
    #[arg(long)]
    simulate: bool,
    /// Add wall-clock columns (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 400)]
    max_steps: usize,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverOpts,
}

#[derive(Args)]
struct DeadlockArgs {
    scenario: String,
    /// Number of progress points per player in the check.
    #[arg(long)]
    n_csp: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: String,
    #[arg(long)]
    mode: Option<String>,
    /// Keep the class chosen at the first step for the whole run.
    #[arg(long)]
    freeze_class: bool,
    #[arg(long, default_value_t = 400)]
    max_steps: usize,
    #[arg(long)]
    no_warm_start: bool,
    #[arg(long)]
    timing: bool,
    /// Directory for trace.csv, steps.csv and metrics.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverOpts,
}

#[derive(Args)]
struct GeometryArgs {
    /// CSV with columns player,x,y.
    waypoints: PathBuf,
    /// Output JSON holding the `conflicts` list.
    #[arg(long)]
    out: PathBuf,
    /// Take footprints from this scenario's players.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 4.5)]
    length: f64,
    #[arg(long, default_value_t = 1.8)]
    width: f64,
    #[arg(long, default_value_t = DEFAULT_SCAN_STEP)]
    scan_step: f64,
    #[arg(long, default_value_t = DEFAULT_RESAMPLE_STEP)]
    resample_step: f64,
    #[arg(long, default_value_t = DEFAULT_POINT_THRESHOLD)]
    point_threshold: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Solution or trace CSV.
    input: PathBuf,
    /// Scenario the CSV came from (for the collision areas).
    #[arg(long)]
    scenario: String,
    /// Player ids, e.g. `1,2`.
    #[arg(long)]
    pair: String,
    #[arg(long, default_value = "plane.svg")]
    out: PathBuf,
    #[arg(long, default_value = "time.svg")]
    time_out: PathBuf,
}

enum Failure {
    Scenario(ScenarioError),
    Infeasible(String),
    Usage(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Scenario(e) => e.exit_code() as u8,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Other(_) => 1,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Scenario(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Scenario(e) => write!(f, "{e}"),
            Failure::Infeasible(m) | Failure::Usage(m) | Failure::Other(m) => f.write_str(m),
        }
    }
}

fn solver_failure(e: SolverError, what: &str) -> Failure {
    match e {
        SolverError::Infeasible => Failure::Infeasible(format!("infeasible: no plan exists for {what}")),
        other => Failure::Other(other.to_string()),
    }
}

fn class_label(mode: &Mode) -> String {
    match mode {
        Mode::FreeHomotopy => "free homotopy".into(),
        Mode::ConstraintFree => "the unconstrained baseline".into(),
        Mode::FixedHomotopy(bits) => {
            let parts: Vec<String> =
                bits.iter().map(|b| b.map(|v| v.to_string()).unwrap_or_else(|| "x".into())).collect();
            format!("class <{}>", parts.join(","))
        }
    }
}

fn load(arg: &str, mode: Option<&str>, encoding: Option<&str>) -> Result<GameSpec, Failure> {
    let mut spec = load_scenario_or_bundled(arg)?;
    if let Some(m) = mode {
        spec.mode = m.parse().map_err(Failure::Usage)?;
    }
    if let Some(e) = encoding {
        spec.encoding = e.parse::<Encoding>().map_err(Failure::Usage)?;
    }
    spec.validate().map_err(ScenarioError::from)?;
    Ok(spec)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Other(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let spec = load(&a.scenario, a.mode.as_deref(), a.encoding.as_deref())?;
    let miqp = assemble(&spec).map_err(ScenarioError::from)?;
    if let Some(p) = &a.dump_miqp {
        write_out(Some(p), &write_miqp(&miqp))?;
    }
    let (sol, stats) = solve_miqp(&miqp, &a.solver.config()).map_err(|e| solver_failure(e, &class_label(&spec.mode)))?;
    write_out(Some(&a.out), &report::solution_csv(&sol, &spec))?;
    println!("objective {}", sol.objective);
    if let Some(c) = &sol.homotopy {
        println!("class {c}");
    }
    println!("nodes {}", stats.nodes_explored);
    println!("qp_solves {}", stats.qp_solves);
    println!("incumbent_updates {}", stats.incumbent_updates);
    println!("root_bound {}", stats.root_bound);
    println!("wall_time_s {}", stats.wall_time.as_secs_f64());
    if stats.limit_reached {
        println!("limit_reached gap {}", stats.gap);
    }
    let check = verify_solution(&sol, &spec, 10);
    if !check.is_clean() {
        eprintln!("warning: {} inter-sample violations", check.violations.len());
    }
    Ok(())
}

fn enumerate(a: EnumerateArgs) -> Result<(), Failure> {
    let spec = load(&a.scenario, None, None)?;
    let config = RankConfig { bnb: a.solver.config(), jobs: a.jobs, check_free: false, ..RankConfig::default() };
    let ranking = rank_classes(&spec, &config).map_err(|e| match e {
        HomotopyError::Model(m) => Failure::Scenario(m.into()),
        other => Failure::Other(other.to_string()),
    })?;
    let sim = if a.simulate {
        let metrics: Vec<_> = homotopy_planner::homotopy::par_map(&ranking.reports, a.jobs, |r| {
            if r.status != ClassStatus::Feasible {
                return None;
            }
            let cfg = MpcConfig { mode: Mode::fixed(&r.class), max_steps: a.max_steps, bnb: a.solver.config(), ..MpcConfig::default() };
            let trace = run_mpc(&spec, &cfg).ok()?;
            (trace.outcome == SimOutcome::Completed).then(|| compute_task_metrics(&trace, &spec))
        });
        Some(metrics)
    } else {
        None
    };
    write_out(a.out.as_deref(), &report::enumerate_csv(&ranking, sim.as_deref(), a.timing))
}

fn deadlock(a: DeadlockArgs) -> Result<(), Failure> {
    let spec = load(&a.scenario, None, None)?;
    let n_csp = a.n_csp.unwrap_or_else(|| default_n_csp(&spec));
    let classes = enumerate_classes(&spec).map_err(|e| Failure::Other(e.to_string()))?;
    let mut rows = Vec::with_capacity(classes.len());
    for c in &classes {
        let status = match deadlock_check(&spec, c, n_csp).map_err(|e| Failure::Other(e.to_string()))? {
            DeadlockStatus::Feasible => "feasible",
            DeadlockStatus::Deadlock => "deadlock",
        };
        rows.push((c.bits(), status));
    }
    write_out(a.out.as_deref(), &report::deadlock_csv(&rows))
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let spec = load(&a.scenario, a.mode.as_deref(), None)?;
    let cfg = MpcConfig {
        mode: spec.mode.clone(),
        max_steps: a.max_steps,
        warm_start: !a.no_warm_start,
        freeze_class: a.freeze_class,
        bnb: a.solver.config(),
    };
    let trace = run_mpc(&spec, &cfg).map_err(|e| solver_failure(e, &class_label(&spec.mode)))?;
    fs::create_dir_all(&a.out_dir)?;
    write_out(Some(&a.out_dir.join("trace.csv")), &report::trace_csv(&trace))?;
    write_out(Some(&a.out_dir.join("steps.csv")), &report::step_stats_csv(&trace, a.timing))?;
    let metrics = compute_metrics(&trace, &spec);
    match &metrics {
        Ok(m) => write_out(Some(&a.out_dir.join("metrics.csv")), &report::metrics_csv(m, &spec))?,
        Err(_) => write_out(Some(&a.out_dir.join("metrics.csv")), &report::task_metrics_csv(&compute_task_metrics(&trace, &spec)))?,
    }
    println!("steps {}", trace.steps.len());
    match trace.outcome {
        SimOutcome::Completed => println!("outcome completed"),
        SimOutcome::MaxSteps => println!("outcome max_steps"),
        SimOutcome::Infeasible { step } => {
            return Err(Failure::Infeasible(format!("infeasible at step {step} for {}", class_label(&spec.mode))));
        }
    }
    let t = compute_task_metrics(&trace, &spec);
    println!("tct {} nce {} np {} np_per_tct {}", t.tct, t.nce, t.np, t.np_over_tct);
    Ok(())
}

fn geometry(a: GeometryArgs) -> Result<(), Failure> {
    let file = fs::File::open(&a.waypoints)
        .map_err(|e| ScenarioError::Io { path: a.waypoints.display().to_string(), msg: e.to_string() })?;
    let geo_err = |pair: String| move |e| Failure::Scenario(ScenarioError::Geometry { pair, source: e });
    let players = read_waypoints_csv(file).map_err(geo_err("waypoints".into()))?;
    let base = match &a.scenario {
        Some(s) => Some(load_scenario_or_bundled(s)?),
        None => None,
    };
    let footprint = |id: &str| -> Result<Footprint, Failure> {
        if let Some(p) = base.as_ref().and_then(|b| b.players.iter().find(|p| p.id == id)) {
            return Ok(p.footprint);
        }
        Footprint::new(a.length, a.width).map_err(|e| Failure::Usage(e.to_string()))
    };
    let geo = GeometryEntry { scan_step: a.scan_step, resample_step: a.resample_step, point_threshold: a.point_threshold };
    let mut paths = Vec::with_capacity(players.len());
    for (id, pts) in &players {
        paths.push(build_path(pts, geo.resample_step).map_err(geo_err(id.clone()))?);
    }
    let mut conflicts = Vec::new();
    for i in 0..players.len() {
        for j in i + 1..players.len() {
            let (ia, ib) = (&players[i].0, &players[j].0);
            let found = bounds_from_paths(&paths[i], &paths[j], footprint(ia)?, footprint(ib)?, &geo)
                .map_err(geo_err(format!("({ia}, {ib})")))?;
            if let Some(b) = found {
                let arr = |p: &homotopy_planner::geometry::PlayerBounds| {
                    [Some(p.entry_lo), Some(p.entry_hi), p.exit.map(|e| e.0), p.exit.map(|e| e.1)]
                };
                conflicts.push(ConflictEntry {
                    pair: [ia.clone(), ib.clone()],
                    case: Some(b.case),
                    bounds: Some(BoundsEntry { first: arr(&b.first), second: arr(&b.second) }),
                    geometry: None,
                });
            }
        }
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({ "conflicts": conflicts }))
        .map_err(|e| Failure::Other(e.to_string()))?;
    write_out(Some(&a.out), &(text + "\n"))?;
    println!("{} conflicts", conflicts.len());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<(), Failure> {
    let spec = load_scenario_or_bundled(&a.scenario)?;
    let text = fs::read_to_string(&a.input)
        .map_err(|e| ScenarioError::Io { path: a.input.display().to_string(), msg: e.to_string() })?;
    let series = report::read_progress_csv(&text).map_err(ScenarioError::Parse)?;
    let Some((x_id, y_id)) = a.pair.split_once(',').map(|(x, y)| (x.trim(), y.trim())) else {
        return Err(Failure::Usage(format!("--pair expects two ids like `1,2`, got `{}`", a.pair)));
    };
    let idx = |id: &str| spec.players.iter().position(|p| p.id == id);
    let (Some(pa), Some(pb)) = (idx(x_id), idx(y_id)) else {
        return Err(Failure::Usage(format!("unknown player in --pair `{}`", a.pair)));
    };
    let conflict = spec.conflicts.iter().find(|c| c.pair == (pa, pb) || c.pair == (pb, pa));
    let Some(conflict) = conflict else {
        return Err(Failure::Usage(format!("players {x_id} and {y_id} share no conflict")));
    };
    let bounds = if conflict.pair == (pa, pb) { conflict.bounds } else { conflict.bounds.swapped() };
    let get = |id: &str| {
        series.iter().find(|(p, _)| p == id).map(|(_, s)| s.clone()).ok_or_else(|| Failure::Usage(format!("player {id} missing from {}", a.input.display())))
    };
    let (xs, ys) = (get(x_id)?, get(y_id)?);
    write_out(Some(&a.out), &report::progress_plane_svg(&xs, &ys, &bounds, (x_id, y_id)))?;
    let ids: Vec<String> = series.iter().map(|(id, _)| id.clone()).collect();
    let all: Vec<Vec<f64>> = series.into_iter().map(|(_, s)| s).collect();
    write_out(Some(&a.time_out), &report::time_plot_svg(&all, spec.dt, &ids))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Deadlock(a) => deadlock(a),
        Command::Simulate(a) => simulate(a),
        Command::Geometry(a) => geometry(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
