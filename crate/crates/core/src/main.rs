//! Command-line interface to the toolkit.
//!
//! Every subcommand reads its parameters from a flat `key=value` config
//! file (`--config`), with `--seed`, `--replicas`, and `--horizon`
//! overriding the corresponding keys and the `STERILECP_SEED` environment
//! variable overriding every other seed source. Outputs are written under
//! `--out` (default: the working directory) as NDJSON, CSV, or PGM files;
//! identical configs and seeds produce byte-identical outputs.
//!
//! Exit codes: 0 on success, 2 for invalid inputs or unusable paths, 3 for
//! a tripped dynamics invariant.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sterilecp::branching::{GwSpec, ProgenyStats, PROGENY_CAP};
use sterilecp::coupling::{closure_table_csv, run_coupled, verify_table_closure};
use sterilecp::experiments::{
    coupled_collections, estimate_block_empty, estimate_lambda_c, measure_decay,
    reference_curves, run_competition, single_type_grid, sweep_phase, BlockEmptySpec,
    CompetitionSpec, DecaySpec, SweepSpec,
};
use sterilecp::io::{
    csv_f64, emit_snapshot, seed_override, write_csv, write_ndjson, Config, RunRecord,
};
use sterilecp::lattice::{InitSpec, SiteState, Torus};
use sterilecp::meanfield::{
    integrate, numeric_eigenvalues4, SingleTypeField, TwoTypeField,
};
use sterilecp::percolation::{
    closed_path_probability_mc, closed_path_tail, count_self_avoiding_paths, sample_field,
    wet_set, GraphKind, OrientedGraph, Window,
};
use sterilecp::sim::{run_auto, ModelParams, SimOptions};
use sterilecp::stream::{stream_rng, EXPERIMENT_STREAM, INIT_STREAM};
use sterilecp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sterilecp",
    about = "Simulation and verification toolkit for a multitype contact process with sterile states",
    version
)]
struct Cli {
    /// Flat key=value configuration file (# starts a comment line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`. The STERILECP_SEED
    /// environment variable overrides both.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replica count; overrides the config's `replicas`.
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Time horizon; overrides the config's `horizon`.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory of the process; writes run.ndjson.
    ///
    /// Config keys: lambda1, p1 (required); lambda2, p2 (default 0);
    /// sides (comma list, required); init (default
    /// single-fertile-1@center); horizon (required); sample_interval
    /// (default 1); record_snapshots (default false); seed (default 0).
    Simulate,
    /// Survival-frequency sweep over a (lambda, p) grid; writes sweep.csv
    /// and reference_curves.csv.
    ///
    /// Config keys: lambdas, ps (comma lists, required); sides, horizon
    /// (required); init (default single-fertile-1@center); replicas
    /// (default 20); lambda_c (optional overlay estimate); curve_points
    /// (default 33); seed (default 0).
    Sweep,
    /// Integrates the mean-field ODE system; writes meanfield.csv and a
    /// fixed-point report meanfield_report.json.
    ///
    /// Config keys: model (single|two; default two exactly when lambda2
    /// is set); single needs lambda, p; two needs lambda1, p1, lambda2,
    /// p2; u0 (comma list; default 0.1 per coordinate); horizon (default
    /// 100); dt (default 0.001); record_every (default 100).
    Meanfield,
    /// Samples the dominating branching process; writes branching.csv.
    ///
    /// Config keys: p (required unless --p); d (default 1); samples
    /// (default 100000); n_max (default 50); seed (default 0).
    Branching {
        /// Dimension of the underlying lattice; overrides the config's `d`.
        #[arg(long)]
        d: Option<usize>,
        /// Sterility parameter; overrides the config's `p`.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Couples the single-type process with a basic contact process on a
    /// shared event stream; writes closure_table.csv and couple.csv.
    ///
    /// Config keys: lambda, p, sides, horizon (required); init (xi's
    /// initial law, single-type states only; default
    /// product(0.3,0.2,0,0)); sample_interval (default 1); max_events
    /// (optional cap); seed (default 0). The companion process starts
    /// from xi's occupied set. Exits 3 if a pair ever leaves the
    /// admissible set.
    Couple,
    /// Oriented-percolation sampling: wet densities, self-avoiding path
    /// counts, and closed-path bounds; writes wet_density.csv,
    /// path_counts.csv, and percolation.csv.
    ///
    /// Config keys mirror the flags, plus: k (dependence range for the
    /// bound, default 0); mc_fields (closed-path Monte Carlo fields,
    /// default 0 = skip); paths_to (default min(window, 10)); seed
    /// (default 0).
    Percolate {
        /// Directed graph to percolate on; overrides the config's `graph`.
        #[arg(long, value_enum, ignore_case = true)]
        graph: Option<GraphArg>,
        /// Dimension; overrides the config's `d` (default 1).
        #[arg(long)]
        d: Option<usize>,
        /// Closure probability per site; overrides the config's `eps`.
        #[arg(long)]
        eps: Option<f64>,
        /// Window radius and height; overrides the config's `window`
        /// (default 10).
        #[arg(long)]
        window: Option<i64>,
        /// Fields to average wet densities over; overrides the config's
        /// `samples` (default 100).
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Two-type competition runs; writes compete.ndjson.
    ///
    /// Config keys: lambda1, p1, lambda2, p2, sides, horizon, lambda_c
    /// (proxy for the regime warning) (required); init (default
    /// product(0.25,0,0.25,0)); replicas (default 20); sample_interval
    /// (default 10); seed (default 0). Writes a regime warning to stderr
    /// when the parameters leave the proven box, and still runs.
    Compete,
    /// Renders a PGM snapshot of one trajectory; writes snapshot.pgm.
    ///
    /// Config keys: as for simulate, plus t (snapshot time; default the
    /// horizon). 2-d runs render the configuration at t; 1-d runs render
    /// a space-time raster of all snapshots through t.
    Snapshot,
    /// Spatial and temporal escape-tail measurement for the subcritical
    /// process; writes decay.csv and decay.ndjson.
    ///
    /// Config keys: p (required, p < 1/(4d)); lambda (default 10, inf
    /// allowed); d (default 1); n_max (default 8); replicas (default
    /// 1000); seed (default 0).
    Decay,
    /// Worst-case block invasion estimate; writes block.ndjson.
    ///
    /// Config keys: l2 (required); lambda (default 10); p (required,
    /// p < 1/(4d)); d (default 1); replicas (default 400); plant_bottom,
    /// plant_periphery (default true); seed (default 0).
    Block,
    /// Coupled single-type collections with cone diagnostics; writes
    /// collections.ndjson.
    ///
    /// Config keys: lambda1, p1, lambda2, p2, sides, horizon (required);
    /// init (default product(0.25,0,0.25,0)); z (comma list, default all
    /// zeros); big_l (default 2); big_k (default 5); sample_interval
    /// (default 5); seed (default 0).
    Collections,
    /// Bisection estimate of the critical birth rate of the p=1 process;
    /// writes lambda_c.csv. The result is a finite-size, finite-horizon
    /// estimate, not the true constant.
    ///
    /// Config keys: sides (required); horizon (default 50); replicas
    /// (default 40); lo (default 1); hi (default 8); iterations (default
    /// 12); seed (default 0).
    EstimateLambdaC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GraphArg {
    /// Alternating-parity graph with two diagonal successors per site.
    L1,
    /// Lattice crossed with levels: 2d horizontal arrows and one vertical.
    L2,
}

impl GraphArg {
    fn kind(self) -> GraphKind {
        match self {
            GraphArg::L1 => GraphKind::L1,
            GraphArg::L2 => GraphKind::L2,
        }
    }

    fn parse(s: &str) -> Result<GraphArg> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(GraphArg::L1),
            "l2" => Ok(GraphArg::L2),
            other => Err(Error::invalid(format!("graph must be L1 or L2, got {other:?}"))),
        }
    }
}

/// Resolved global inputs shared by the subcommands.
struct Ctx {
    cfg: Config,
    seed: u64,
    replicas: Option<u64>,
    horizon: Option<f64>,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Ctx> {
        let cfg = match &cli.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let seed = match seed_override()? {
            Some(s) => s,
            None => match cli.seed {
                Some(s) => s,
                None => cfg.u64_or("seed", 0)?,
            },
        };
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)?;
        Ok(Ctx { cfg, seed, replicas: cli.replicas, horizon: cli.horizon, out })
    }

    fn replicas_or(&self, default: u64) -> Result<u64> {
        match self.replicas {
            Some(r) => Ok(r),
            None => self.cfg.u64_or("replicas", default),
        }
    }

    fn require_horizon(&self) -> Result<f64> {
        match self.horizon {
            Some(h) => Ok(h),
            None => match self.cfg.f64_opt("horizon")? {
                Some(h) => Ok(h),
                None => Err(Error::invalid("horizon is required (config key or --horizon)")),
            },
        }
    }

    fn horizon_or(&self, default: f64) -> Result<f64> {
        match self.horizon {
            Some(h) => Ok(h),
            None => self.cfg.f64_or("horizon", default),
        }
    }

    fn init_or(&self, default: &str) -> Result<InitSpec> {
        InitSpec::parse(self.cfg.get("init").unwrap_or(default))
    }

    fn sides(&self) -> Result<Vec<usize>> {
        self.cfg.require_list("sides")
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.cfg.require_f64("lambda1")?,
            self.cfg.require_f64("p1")?,
            self.cfg.f64_or("lambda2", 0.0)?,
            self.cfg.f64_or("p2", 0.0)?,
        )
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn main() {
    // Die quietly when a pipe closes early (e.g. `sterilecp ... | head`)
    // instead of panicking on the failed print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Meanfield => cmd_meanfield(&ctx),
        Command::Branching { d, p } => cmd_branching(&ctx, d, p),
        Command::Couple => cmd_couple(&ctx),
        Command::Percolate { graph, d, eps, window, samples } => {
            cmd_percolate(&ctx, graph, d, eps, window, samples)
        }
        Command::Compete => cmd_compete(&ctx),
        Command::Snapshot => cmd_snapshot(&ctx),
        Command::Decay => cmd_decay(&ctx),
        Command::Block => cmd_block(&ctx),
        Command::Collections => cmd_collections(&ctx),
        Command::EstimateLambdaC => cmd_estimate_lambda_c(&ctx),
    }
}

fn run_one_trajectory(ctx: &Ctx, record_snapshots: bool) -> Result<(ModelParams, sterilecp::sim::Trajectory)> {
    let params = ctx.params()?;
    let sides = ctx.sides()?;
    let horizon = ctx.require_horizon()?;
    let init_spec = ctx.init_or("single-fertile-1@center")?;
    let opts = SimOptions {
        sample_interval: ctx.cfg.f64_or("sample_interval", 1.0)?,
        record_snapshots: record_snapshots || ctx.cfg.bool_or("record_snapshots", false)?,
        ..SimOptions::default()
    };
    let mut init_rng = stream_rng(ctx.seed, INIT_STREAM);
    let init = init_spec.materialize(&sides, &mut init_rng)?;
    let traj = run_auto(&params, &init, horizon, ctx.seed, &opts)?;
    Ok((params, traj))
}

fn cmd_simulate(ctx: &Ctx) -> Result<()> {
    let (params, traj) = run_one_trajectory(ctx, false)?;
    let record = RunRecord::from_trajectory(&params, &traj);
    let path = ctx.path("run.ndjson");
    write_ndjson(&path, &[record])?;
    let occ = traj.terminal_occupancy();
    println!(
        "seed {}: {} events, terminal occupancy {}/{} (fertile1 {}, sterile1 {}, fertile2 {}, sterile2 {})",
        traj.seed,
        traj.events_generated,
        occ.occupied(),
        occ.total(),
        occ.fertile1,
        occ.sterile1,
        occ.fertile2,
        occ.sterile2,
    );
    for (slot, label) in ["1", "2"].into_iter().enumerate() {
        match traj.fertile_extinction[slot] {
            Some(t) => println!("fertile-{label} extinction at t={t}"),
            None => println!("fertile-{label} censored at the horizon"),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn opt_f64_field(v: Option<f64>) -> String {
    v.map(csv_f64).unwrap_or_default()
}

fn cmd_sweep(ctx: &Ctx) -> Result<()> {
    let lambdas: Vec<f64> = ctx.cfg.require_list("lambdas")?;
    let ps: Vec<f64> = ctx.cfg.require_list("ps")?;
    let spec = SweepSpec {
        grid: single_type_grid(&lambdas, &ps)?,
        sides: ctx.sides()?,
        init: ctx.init_or("single-fertile-1@center")?,
        horizon: ctx.require_horizon()?,
        replicas: ctx.replicas_or(20)?,
        seed_base: ctx.seed,
    };
    let cells = sweep_phase(&spec)?;
    let header = [
        "lambda1",
        "p1",
        "lambda2",
        "p2",
        "replicas",
        "survivors1",
        "frequency1",
        "wilson_lo1",
        "wilson_hi1",
        "extinction_mean1",
        "survivors2",
        "frequency2",
        "wilson_lo2",
        "wilson_hi2",
        "extinction_mean2",
    ];
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                csv_f64(c.params.lambda1),
                csv_f64(c.params.p1),
                csv_f64(c.params.lambda2),
                csv_f64(c.params.p2),
                c.replicas.to_string(),
                c.survivors[0].to_string(),
                csv_f64(c.frequency[0]),
                csv_f64(c.wilson[0].0),
                csv_f64(c.wilson[0].1),
                opt_f64_field(c.extinction_mean[0]),
                c.survivors[1].to_string(),
                csv_f64(c.frequency[1]),
                csv_f64(c.wilson[1].0),
                csv_f64(c.wilson[1].1),
                opt_f64_field(c.extinction_mean[1]),
            ]
        })
        .collect();
    let sweep_path = ctx.path("sweep.csv");
    write_csv(&sweep_path, &header, &rows)?;
    println!("wrote {} ({} grid points)", sweep_path.display(), cells.len());

    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let d = spec.sides.len();
        let points = ctx.cfg.usize_or("curve_points", 33)?;
        let lambda_c = ctx.cfg.f64_opt("lambda_c")?;
        let curves = reference_curves(d, lo, hi, points, lambda_c)?;
        let curve_rows: Vec<Vec<String>> = curves
            .iter()
            .map(|(name, l, p)| vec![name.clone(), csv_f64(*l), csv_f64(*p)])
            .collect();
        let curves_path = ctx.path("reference_curves.csv");
        write_csv(&curves_path, &["curve", "lambda", "p"], &curve_rows)?;
        match lambda_c {
            Some(lc) => println!(
                "wrote {} (lambda_c overlay {lc} is a user-supplied estimate)",
                curves_path.display()
            ),
            None => println!(
                "wrote {} (no lambda_c overlay; pass config key lambda_c to add one)",
                curves_path.display()
            ),
        }
    } else {
        println!("single birth rate: skipping reference_curves.csv");
    }
    for c in &cells {
        println!(
            "lambda={} p={}: type-1 survival {}/{} ({:.3})",
            c.params.lambda1, c.params.p1, c.survivors[0], c.replicas, c.frequency[0]
        );
    }
    Ok(())
}

fn cmd_meanfield(ctx: &Ctx) -> Result<()> {
    let two = match ctx.cfg.get("model") {
        Some("single") => false,
        Some("two") => true,
        Some(other) => {
            return Err(Error::invalid(format!("model must be single or two, got {other:?}")))
        }
        None => ctx.cfg.get("lambda2").is_some(),
    };
    let horizon = ctx.horizon_or(100.0)?;
    let dt = ctx.cfg.f64_or("dt", 1e-3)?;
    let record_every = ctx.cfg.usize_or("record_every", 100)?;
    let path = ctx.path("meanfield.csv");
    if two {
        let params = ctx.params()?;
        let field = TwoTypeField::new(params)?;
        let u0_list = ctx.cfg.list::<f64>("u0")?.unwrap_or_else(|| vec![0.1; 4]);
        let u0: [f64; 4] = u0_list
            .try_into()
            .map_err(|v: Vec<f64>| Error::invalid(format!("u0 needs 4 entries, got {}", v.len())))?;
        let run = integrate(|u| field.rhs(u), u0, horizon, dt, record_every)?;
        let rows: Vec<Vec<String>> = run
            .times
            .iter()
            .zip(&run.states)
            .map(|(t, u)| {
                vec![csv_f64(*t), csv_f64(u[0]), csv_f64(u[1]), csv_f64(u[2]), csv_f64(u[3])]
            })
            .collect();
        write_csv(&path, &["time", "u_f1", "u_s1", "u_f2", "u_s2"], &rows)?;
        let terminal = run.terminal();
        println!("terminal state: {terminal:?}");
        let outcome = field.classify_outcome();
        println!("classification: {outcome:?}");
        let fps = field.fixed_points();
        let mut report = serde_json::json!({
            "model": "two",
            "params": params,
            "terminal": terminal,
            "classification": format!("{outcome:?}"),
            "trivial": fps.trivial,
            "q1": fps.q1,
            "q2": fps.q2,
            "coexistence_segment": fps.coexistence_segment,
        });
        if let Some(q1) = fps.q1 {
            println!("Q1 = {q1:?}");
            let closed = field.spectrum_q1_closed()?;
            println!("closed-form spectrum at Q1: {closed:?}");
            let numeric: Vec<[f64; 2]> = numeric_eigenvalues4(field.jacobian(q1))
                .into_iter()
                .map(|z| [z.re, z.im])
                .collect();
            println!("numeric spectrum at Q1 (re, im): {numeric:?}");
            report["spectrum_q1_closed"] = serde_json::json!(closed);
            report["spectrum_q1_numeric"] = serde_json::json!(numeric);
        }
        if let Some(q2) = fps.q2 {
            println!("Q2 = {q2:?}");
            let closed = field.spectrum_q2_closed()?;
            report["spectrum_q2_closed"] = serde_json::json!(closed);
        }
        if fps.coexistence_segment {
            println!("coexistence segment present (lambda1 p1 = lambda2 p2 > 1)");
            report["charpoly_ptheta"] = serde_json::json!(field.charpoly_ptheta_closed()?);
        }
        let report_path = ctx.path("meanfield_report.json");
        std::fs::write(&report_path, format!("{:#}\n", report))?;
        println!("wrote {}", report_path.display());
    } else {
        let field =
            SingleTypeField::new(ctx.cfg.require_f64("lambda")?, ctx.cfg.require_f64("p")?)?;
        let u0_list = ctx.cfg.list::<f64>("u0")?.unwrap_or_else(|| vec![0.1; 2]);
        let u0: [f64; 2] = u0_list
            .try_into()
            .map_err(|v: Vec<f64>| Error::invalid(format!("u0 needs 2 entries, got {}", v.len())))?;
        let run = integrate(|u| field.rhs(u), u0, horizon, dt, record_every)?;
        let rows: Vec<Vec<String>> = run
            .times
            .iter()
            .zip(&run.states)
            .map(|(t, u)| vec![csv_f64(*t), csv_f64(u[0]), csv_f64(u[1])])
            .collect();
        write_csv(&path, &["time", "u_fertile", "u_sterile"], &rows)?;
        let terminal = run.terminal();
        println!("terminal state: {terminal:?}");
        match field.interior_fixed_point() {
            Some(fp) => {
                println!("interior fixed point: {fp:?}");
                println!("spectrum there: {:?}", field.spectrum_interior());
            }
            None => println!("no interior fixed point (lambda p <= 1)"),
        }
        println!("spectrum at the origin: {:?}", field.spectrum_origin());
        let report = serde_json::json!({
            "model": "single",
            "terminal": terminal,
            "origin": [0.0, 0.0],
            "spectrum_origin": field.spectrum_origin(),
            "interior_fixed_point": field.interior_fixed_point(),
            "spectrum_interior": field.interior_fixed_point().map(|_| field.spectrum_interior()),
        });
        let report_path = ctx.path("meanfield_report.json");
        std::fs::write(&report_path, format!("{:#}\n", report))?;
        println!("wrote {}", report_path.display());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_branching(ctx: &Ctx, d_flag: Option<usize>, p_flag: Option<f64>) -> Result<()> {
    let d = match d_flag {
        Some(d) => d,
        None => ctx.cfg.usize_or("d", 1)?,
    };
    let p = match p_flag {
        Some(p) => p,
        None => ctx.cfg.require_f64("p")?,
    };
    let samples = match ctx.replicas {
        Some(r) => r,
        None => ctx.cfg.u64_or("samples", 100_000)?,
    };
    let n_max = ctx.cfg.u64_or("n_max", 50)?;
    let spec = GwSpec::new(d, p)?;
    let mut rng = stream_rng(ctx.seed, EXPERIMENT_STREAM);
    let stats = ProgenyStats::collect(&spec, samples, PROGENY_CAP, &mut rng);
    let (s1, c1) = spec.find_s1()?;
    let rows: Vec<Vec<String>> = (0..=n_max)
        .map(|n| {
            vec![
                n.to_string(),
                csv_f64(stats.empirical_tail(n)),
                csv_f64(c1 * s1.powf(-(n as f64))),
            ]
        })
        .collect();
    let path = ctx.path("branching.csv");
    write_csv(&path, &["n", "empirical_tail", "bound"], &rows)?;
    println!("mean offspring 4dp = {}", spec.mean_offspring());
    println!(
        "total progeny: empirical mean {} vs exact {}",
        stats.mean_uncapped(),
        spec.total_progeny_mean()?
    );
    println!("G_X'(1) = {}", spec.gx_derivative_at_1()?);
    println!("tail constants: s1 = {s1}, C1 = G_X(s1) = {c1}");
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_couple(ctx: &Ctx) -> Result<()> {
    let cases = verify_table_closure();
    let escapes = cases.iter().filter(|c| !c.admissible).count();
    let table_path = ctx.path("closure_table.csv");
    std::fs::write(&table_path, closure_table_csv(&cases))?;
    println!("closure table: {} cases, {escapes} escapes; wrote {}", cases.len(), table_path.display());
    if escapes > 0 {
        return Err(Error::violation(format!("{escapes} closure cases leave S")));
    }

    let lambda = ctx.cfg.require_f64("lambda")?;
    let p = ctx.cfg.require_f64("p")?;
    let sides = ctx.sides()?;
    let horizon = ctx.require_horizon()?;
    let init_spec = ctx.init_or("product(0.3,0.2,0,0)")?;
    let mut init_rng = stream_rng(ctx.seed, INIT_STREAM);
    let xi = init_spec.materialize(&sides, &mut init_rng)?;
    let mut eta = Torus::new(&sides, SiteState::Empty)?;
    for site in 0..xi.len() {
        if xi.get(site).is_occupied() {
            eta.set(site, SiteState::Fertile1);
        }
    }
    let run = run_coupled(
        lambda,
        p,
        &xi,
        &eta,
        horizon,
        ctx.seed,
        ctx.cfg.f64_or("sample_interval", 1.0)?,
        ctx.cfg.u64_opt("max_events")?,
    )?;
    let rows: Vec<Vec<String>> = run
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                csv_f64(*t),
                run.xi_fertile[i].to_string(),
                run.xi_occupied[i].to_string(),
                run.eta_occupied[i].to_string(),
            ]
        })
        .collect();
    let path = ctx.path("couple.csv");
    write_csv(&path, &["time", "xi_fertile", "xi_occupied", "eta_occupied"], &rows)?;
    println!(
        "{} events, {} admissibility checks, zero escapes from S",
        run.events_processed, run.checks
    );
    match run.eta_extinction {
        Some(t) => println!("companion process extinct at t={t}"),
        None => println!("companion process censored at the horizon"),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_percolate(
    ctx: &Ctx,
    graph_flag: Option<GraphArg>,
    d_flag: Option<usize>,
    eps_flag: Option<f64>,
    window_flag: Option<i64>,
    samples_flag: Option<u64>,
) -> Result<()> {
    let graph = match graph_flag {
        Some(g) => g,
        None => match ctx.cfg.get("graph") {
            Some(s) => GraphArg::parse(s)?,
            None => GraphArg::L2,
        },
    };
    let d = match d_flag {
        Some(d) => d,
        None => ctx.cfg.usize_or("d", 1)?,
    };
    let eps = match eps_flag {
        Some(e) => e,
        None => ctx.cfg.require_f64("eps")?,
    };
    let window = match window_flag {
        Some(w) => w,
        None => ctx.cfg.u64_or("window", 10)? as i64,
    };
    let samples = match samples_flag {
        Some(s) => s,
        None => match ctx.replicas {
            Some(r) => r,
            None => ctx.cfg.u64_or("samples", 100)?,
        },
    };
    if samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }

    let g = OrientedGraph::new(graph.kind(), d)?;
    let w = Window::new(d, window, window)?;
    let site_levels: Vec<i64> = w.sites().filter(|s| g.contains(s)).map(|s| s.n).collect();
    let levels = (window + 1) as usize;
    let mut graph_sites = vec![0u64; levels];
    for &n in &site_levels {
        graph_sites[n as usize] += 1;
    }
    let mut wet_mean = vec![0.0f64; levels];
    for rep in 0..samples {
        let field = sample_field(w, eps, ctx.seed.wrapping_add(rep))?;
        let wet = wet_set(&g, &field);
        let mut wet_per_level = vec![0u64; levels];
        for s in w.sites() {
            if wet[w.index(&s)] {
                wet_per_level[s.n as usize] += 1;
            }
        }
        for n in 0..levels {
            if graph_sites[n] > 0 {
                wet_mean[n] += wet_per_level[n] as f64 / graph_sites[n] as f64;
            }
        }
    }
    let density_rows: Vec<Vec<String>> = (0..levels)
        .map(|n| {
            vec![
                n.to_string(),
                graph_sites[n].to_string(),
                csv_f64(wet_mean[n] / samples as f64),
            ]
        })
        .collect();
    let density_path = ctx.path("wet_density.csv");
    write_csv(&density_path, &["level", "graph_sites", "wet_density"], &density_rows)?;
    println!(
        "wrote {} ({:?}, d={d}, eps={eps}, {samples} fields)",
        density_path.display(),
        graph
    );

    let paths_to = ctx.cfg.u64_or("paths_to", (window as u64).min(10))?;
    if graph == GraphArg::L2 {
        let count_rows: Vec<Vec<String>> = (1..=paths_to)
            .map(|m| -> Result<Vec<String>> {
                let count = count_self_avoiding_paths(d, m)?;
                let cap = ((2 * d + 1) as f64).powi(m as i32);
                Ok(vec![m.to_string(), count.to_string(), csv_f64(cap)])
            })
            .collect::<Result<_>>()?;
        let counts_path = ctx.path("path_counts.csv");
        write_csv(&counts_path, &["n", "self_avoiding_paths", "cap"], &count_rows)?;
        println!("wrote {}", counts_path.display());

        let k = ctx.cfg.u64_or("k", 0)?;
        let tail_rows: Vec<Vec<String>> = (1..=window as u64)
            .map(|m| -> Result<Vec<String>> {
                let tail = closed_path_tail(d, eps, m, k)?;
                Ok(vec![m.to_string(), csv_f64(tail.ln_bound), csv_f64(tail.bound)])
            })
            .collect::<Result<_>>()?;
        let tail_path = ctx.path("percolation.csv");
        write_csv(&tail_path, &["n", "ln_bound", "bound"], &tail_rows)?;
        println!("wrote {}", tail_path.display());

        let mc_fields = ctx.cfg.u64_or("mc_fields", 0)?;
        if mc_fields > 0 {
            let n = window as u64;
            let mc = closed_path_probability_mc(d, eps, n, mc_fields, ctx.seed)?;
            let bound = closed_path_tail(d, eps, n, k)?.bound;
            println!("closed-path MC at n={n}: {mc} (bound {bound}, {mc_fields} fields)");
        }
    } else {
        println!("path counts and closed-path bounds are defined on L2: skipped");
    }
    Ok(())
}

fn cmd_compete(ctx: &Ctx) -> Result<()> {
    let spec = CompetitionSpec {
        params: ctx.params()?,
        sides: ctx.sides()?,
        init: ctx.init_or("product(0.25,0,0.25,0)")?,
        horizon: ctx.require_horizon()?,
        replicas: ctx.replicas_or(20)?,
        seed_base: ctx.seed,
        sample_interval: ctx.cfg.f64_or("sample_interval", 10.0)?,
        lambda_c_proxy: ctx.cfg.require_f64("lambda_c")?,
    };
    let outcome = run_competition(&spec)?;
    if let Some(w) = &outcome.regime_warning {
        eprintln!("warning: {w}");
    }
    let path = ctx.path("compete.ndjson");
    write_ndjson(&path, &outcome.records)?;
    println!(
        "type 2 extinct in {}/{} replicas; type 1 alive in {}/{}",
        outcome.type2_extinct, outcome.replicas, outcome.type1_alive, outcome.replicas
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_snapshot(ctx: &Ctx) -> Result<()> {
    let (_, traj) = run_one_trajectory(ctx, true)?;
    let t = ctx.cfg.f64_or("t", traj.horizon)?;
    let path = ctx.path("snapshot.pgm");
    emit_snapshot(&traj, t, &path)?;
    let occ = traj.terminal_occupancy();
    println!("terminal occupancy {}/{}", occ.occupied(), occ.total());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_decay(ctx: &Ctx) -> Result<()> {
    let spec = DecaySpec {
        lambda: ctx.cfg.f64_or("lambda", 10.0)?,
        p: ctx.cfg.require_f64("p")?,
        d: ctx.cfg.usize_or("d", 1)?,
        n_max: ctx.cfg.u64_or("n_max", 8)?,
        replicas: ctx.replicas_or(1000)?,
        seed_base: ctx.seed,
    };
    let m = measure_decay(&spec)?;
    let rows: Vec<Vec<String>> = (0..m.n.len())
        .map(|i| {
            vec![
                m.n[i].to_string(),
                csv_f64(m.escape[i]),
                csv_f64(m.radius_tail[i]),
                csv_f64(m.time_tail[i]),
                csv_f64(m.bound[i]),
            ]
        })
        .collect();
    let csv_path = ctx.path("decay.csv");
    write_csv(&csv_path, &["n", "escape", "radius_tail", "time_tail", "bound"], &rows)?;
    let json_path = ctx.path("decay.ndjson");
    write_ndjson(&json_path, &[&m])?;
    match &m.escape_fit {
        Some(fit) => println!(
            "escape tail fit: slope {} (se {}), R^2 {}, negative at 99%: {}",
            fit.slope,
            fit.slope_se,
            fit.r_squared,
            fit.slope_negative_at_99()
        ),
        None => println!("escape tail fit: too few positive frequencies"),
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_block(ctx: &Ctx) -> Result<()> {
    let l2 = ctx
        .cfg
        .u64_opt("l2")?
        .ok_or_else(|| Error::invalid("config key \"l2\" is required"))?;
    let spec = BlockEmptySpec {
        lambda: ctx.cfg.f64_or("lambda", 10.0)?,
        p: ctx.cfg.require_f64("p")?,
        l2: l2 as i64,
        d: ctx.cfg.usize_or("d", 1)?,
        replicas: ctx.replicas_or(400)?,
        seed_base: ctx.seed,
        plant_bottom: ctx.cfg.bool_or("plant_bottom", true)?,
        plant_periphery: ctx.cfg.bool_or("plant_periphery", true)?,
    };
    let est = estimate_block_empty(&spec)?;
    let path = ctx.path("block.ndjson");
    write_ndjson(&path, &[&est])?;
    println!(
        "core invaded in {}/{} replicas (frequency {}, 95% CI [{}, {}])",
        est.hits, est.replicas, est.frequency, est.wilson.0, est.wilson.1
    );
    println!(
        "entry points: mean {} vs rate {}, max {}, over budget {}x",
        est.mean_entry_count, est.entry_rate, est.max_entry_count, est.over_budget
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_collections(ctx: &Ctx) -> Result<()> {
    let params = ctx.params()?;
    let sides = ctx.sides()?;
    let horizon = ctx.require_horizon()?;
    let init_spec = ctx.init_or("product(0.25,0,0.25,0)")?;
    let z = ctx.cfg.list::<i64>("z")?.unwrap_or_else(|| vec![0; sides.len()]);
    let big_l = ctx.cfg.u64_or("big_l", 2)? as i64;
    let big_k = ctx.cfg.u64_or("big_k", 5)? as i64;
    let sample_interval = ctx.cfg.f64_or("sample_interval", 5.0)?;
    let mut init_rng = stream_rng(ctx.seed, INIT_STREAM);
    let init = init_spec.materialize(&sides, &mut init_rng)?;
    let report = coupled_collections(
        &params,
        &init,
        &z,
        big_l,
        big_k,
        horizon,
        ctx.seed,
        sample_interval,
    )?;
    let path = ctx.path("collections.ndjson");
    write_ndjson(&path, &[&report])?;
    println!(
        "A_z {}, B_z {}, C_z {}, 1-source {}",
        report.a_z, report.b_z, report.c_z, report.one_source
    );
    println!(
        "containment: {} type-2 births checked, {} outside the collection",
        report.containment_checked, report.containment_violations
    );
    if !report.c_z && report.containment_violations > 0 {
        println!(
            "note: type 2 starts inside the big box (C_z false), so the outside-collection cannot cover it"
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_estimate_lambda_c(ctx: &Ctx) -> Result<()> {
    let est = estimate_lambda_c(
        &ctx.sides()?,
        ctx.horizon_or(50.0)?,
        ctx.replicas_or(40)?,
        ctx.seed,
        ctx.cfg.f64_or("lo", 1.0)?,
        ctx.cfg.f64_or("hi", 8.0)?,
        ctx.cfg.u64_or("iterations", 12)? as u32,
    )?;
    let rows: Vec<Vec<String>> = est
        .probes
        .iter()
        .map(|(l, f)| vec![csv_f64(*l), csv_f64(*f)])
        .collect();
    let path = ctx.path("lambda_c.csv");
    write_csv(&path, &["lambda", "survival_frequency"], &rows)?;
    println!(
        "lambda_c estimate {} (bracket [{}, {}]); finite-size, finite-horizon estimate, not the true constant",
        est.estimate, est.bracket.0, est.bracket.1
    );
    println!("wrote {}", path.display());
    Ok(())
}
