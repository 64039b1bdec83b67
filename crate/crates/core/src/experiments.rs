//! Experiment drivers behind the CLI.
//!
//! Each driver composes the simulators, the branching bounds, the
//! percolation geometry, and the statistics module into one reproducible
//! measurement: phase-diagram sweeps, spatial and temporal decay of the
//! subcritical process, worst-case block invasion estimates, two-type
//! competition runs, the coupled single-type collections with their
//! cone-geometry events, and a bisection estimator for the critical birth
//! rate. Seeding is deterministic throughout: replica r of any driver uses
//! seed base + r, so re-running a spec reproduces every trajectory.

use rayon::prelude::*;

use crate::branching::GwSpec;
use crate::lattice::{InitSpec, Occupancy, SiteState, Torus, TypeLabel};
use crate::percolation::nabla_z_contains;
use crate::sim::{
    apply_event, run_auto, ModelParams, Sample, SimOptions, Trajectory,
};
use crate::stats::{linear_fit, wilson_interval, LinearFit, Z_95};
use crate::stream::{edge_rates, stream_rng, EventKind, EventStream, INIT_STREAM};
use crate::{Error, Result};

/// Options for a run that only needs the terminal state: one sample at
/// t = 0 and one at the horizon.
fn sparse_options() -> SimOptions {
    SimOptions { sample_interval: f64::MAX, ..SimOptions::default() }
}

fn check_replicas(replicas: u64) -> Result<()> {
    if replicas == 0 {
        return Err(Error::invalid("at least one replica is required"));
    }
    Ok(())
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be positive and finite, got {horizon}")));
    }
    Ok(())
}

/// One sweep over a parameter grid.
///
/// Every grid point runs the same replica seeds (seed base + replica
/// index), so comparisons across points share their randomness.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub grid: Vec<ModelParams>,
    pub sides: Vec<usize>,
    pub init: InitSpec,
    pub horizon: f64,
    pub replicas: u64,
    pub seed_base: u64,
}

/// Survival estimate at one grid point. A replica counts as surviving for
/// a type when that type's fertile count is positive at the horizon.
///
/// Survivors are censored observations of the extinction time, so the
/// extinction mean covers only the non-surviving replicas and the
/// censoring fraction equals the survival frequency.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub params: ModelParams,
    pub replicas: u64,
    pub survivors: [u64; 2],
    pub frequency: [f64; 2],
    /// 95% Wilson intervals for the two survival frequencies.
    pub wilson: [(f64, f64); 2],
    /// Mean fertile-extinction time over non-censored replicas; absent
    /// when every replica was censored (survived).
    pub extinction_mean: [Option<f64>; 2],
}

/// Runs the grid in a work pool and returns one cell per grid point, in
/// grid order. Deterministic: aggregation is by grid index, not by
/// completion order.
pub fn sweep_phase(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    if spec.grid.is_empty() {
        return Err(Error::invalid("sweep grid must be nonempty"));
    }
    check_replicas(spec.replicas)?;
    check_horizon(spec.horizon)?;
    spec.grid
        .par_iter()
        .map(|params| -> Result<SweepCell> {
            params.validate()?;
            let mut survivors = [0u64; 2];
            let mut extinction_sum = [0.0f64; 2];
            for rep in 0..spec.replicas {
                let seed = spec.seed_base.wrapping_add(rep);
                let mut init_rng = stream_rng(seed, INIT_STREAM);
                let init = spec.init.materialize(&spec.sides, &mut init_rng)?;
                let traj = run_auto(params, &init, spec.horizon, seed, &sparse_options())?;
                let occ = traj.terminal_occupancy();
                for (slot, label) in [TypeLabel::One, TypeLabel::Two].into_iter().enumerate() {
                    if occ.fertile(label) > 0 {
                        survivors[slot] += 1;
                    } else {
                        // An initially absent type counts as extinct at 0.
                        extinction_sum[slot] += traj.fertile_extinction[slot].unwrap_or(0.0);
                    }
                }
            }
            let mut frequency = [0.0f64; 2];
            let mut wilson = [(0.0f64, 0.0f64); 2];
            let mut extinction_mean = [None; 2];
            for slot in 0..2 {
                frequency[slot] = survivors[slot] as f64 / spec.replicas as f64;
                wilson[slot] = wilson_interval(survivors[slot], spec.replicas, Z_95)?;
                let extinct = spec.replicas - survivors[slot];
                if extinct > 0 {
                    extinction_mean[slot] = Some(extinction_sum[slot] / extinct as f64);
                }
            }
            Ok(SweepCell {
                params: *params,
                replicas: spec.replicas,
                survivors,
                frequency,
                wilson,
                extinction_mean,
            })
        })
        .collect()
}

/// Builds a single-type grid as the cross product of birth rates and
/// fertility probabilities, rates outermost.
pub fn single_type_grid(lambdas: &[f64], ps: &[f64]) -> Result<Vec<ModelParams>> {
    if lambdas.is_empty() || ps.is_empty() {
        return Err(Error::invalid("grid axes must be nonempty"));
    }
    let mut grid = Vec::with_capacity(lambdas.len() * ps.len());
    for &lambda in lambdas {
        for &p in ps {
            grid.push(ModelParams::single_type(lambda, p)?);
        }
    }
    Ok(grid)
}

/// Data for the three reference curves of the phase plane: the mean-field
/// extinction boundary lambda p = 1, the contact-process boundary
/// lambda p = lambda_c when an estimate of lambda_c is supplied, and the
/// horizontal line p = 1/(4d). Points with p outside (0, 1] are dropped.
pub fn reference_curves(
    d: usize,
    lambda_lo: f64,
    lambda_hi: f64,
    points: usize,
    lambda_c: Option<f64>,
) -> Result<Vec<(String, f64, f64)>> {
    if !(1..=3).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
    }
    if !(lambda_lo > 0.0) || !(lambda_hi > lambda_lo) || !lambda_hi.is_finite() {
        return Err(Error::invalid("need 0 < lambda_lo < lambda_hi < infinity"));
    }
    if points < 2 {
        return Err(Error::invalid("need at least 2 points per curve"));
    }
    let mut rows = Vec::new();
    let step = (lambda_hi - lambda_lo) / (points - 1) as f64;
    for i in 0..points {
        let lambda = lambda_lo + step * i as f64;
        let mut push = |name: &str, p: f64| {
            if p > 0.0 && p <= 1.0 {
                rows.push((name.to_string(), lambda, p));
            }
        };
        push("lambda*p=1", 1.0 / lambda);
        if let Some(lc) = lambda_c {
            push("lambda*p=lambda_c", lc / lambda);
        }
        push("p=1/(4d)", 1.0 / (4 * d) as f64);
    }
    Ok(rows)
}

/// Spatial and temporal decay measurement for the subcritical single-type
/// process started from one fertile individual.
#[derive(Debug, Clone, Copy)]
pub struct DecaySpec {
    /// Birth rate; may be infinite (cascade mode).
    pub lambda: f64,
    /// Fertility probability, must satisfy p < 1/(4d).
    pub p: f64,
    pub d: usize,
    /// Largest box size n measured; boxes are [-n, n]^d x [0, n].
    pub n_max: u64,
    pub replicas: u64,
    pub seed_base: u64,
}

/// Escape statistics against box size, with the branching-process bound.
///
/// The measured population is the fertile one: a replica escapes box n
/// when a fertile individual ever sits at sup-norm distance > n from the
/// origin, or the fertile population outlives time n.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayMeasurement {
    /// Box sizes 1..=n_max.
    pub n: Vec<u64>,
    /// Joint escape frequency per box size (nonincreasing in n).
    pub escape: Vec<f64>,
    /// Frequency of spatial escape alone (sup-norm radius > n).
    pub radius_tail: Vec<f64>,
    /// Frequency of fertile lifetime > n.
    pub time_tail: Vec<f64>,
    /// Dominating bound C1 s1^{-n} + C1 s1^{-n/2} + (e/2)^{-n/2} from the
    /// total-progeny tail and the lifespan sum.
    pub bound: Vec<f64>,
    /// Least squares on (n, ln escape) over the positive entries; absent
    /// when fewer than three are positive.
    pub escape_fit: Option<LinearFit>,
    /// Same fit on the spatial tail alone.
    pub radius_fit: Option<LinearFit>,
    pub replicas: u64,
    pub sides: Vec<usize>,
}

fn tail_fit(ns: &[u64], freq: &[f64]) -> Option<LinearFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&n, &f) in ns.iter().zip(freq) {
        if f > 0.0 {
            xs.push(n as f64);
            ys.push(f.ln());
        }
    }
    if xs.len() < 3 {
        return None;
    }
    linear_fit(&xs, &ys).ok()
}

/// Measures P(fertile cloud escapes [-n, n]^d x [0, n]) for n up to
/// n_max, with the spatial and temporal components reported separately.
/// Refuses supercritical parameters (p >= 1/(4d)): the dominating
/// branching process, and with it the measured tail, is only meaningful
/// in the subcritical regime.
pub fn measure_decay(spec: &DecaySpec) -> Result<DecayMeasurement> {
    if !(1..=3).contains(&spec.d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {}", spec.d)));
    }
    if !(spec.lambda > 0.0) || spec.lambda.is_nan() {
        return Err(Error::invalid("lambda must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(Error::invalid(format!("p must lie in [0,1], got {}", spec.p)));
    }
    if spec.p >= 1.0 / (4 * spec.d) as f64 {
        return Err(Error::invalid(format!(
            "p = {} is not below 1/(4d) = {}; the escape tail is undefined there",
            spec.p,
            1.0 / (4 * spec.d) as f64
        )));
    }
    if spec.n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    check_replicas(spec.replicas)?;

    // Side 4 n_max + 3 keeps every decidable offset comparison exact: a
    // cloud moves one site per birth, so it records offsets n_max + 1 and
    // beyond before any wraparound aliasing could hide them.
    let side = (4 * spec.n_max + 3) as usize;
    let sides = vec![side; spec.d];
    let params = ModelParams::single_type(spec.lambda, spec.p)?;
    let horizon = spec.n_max as f64;

    let count = spec.n_max as usize;
    let mut radius_hits = vec![0u64; count];
    let mut time_hits = vec![0u64; count];
    let mut escape_hits = vec![0u64; count];
    for rep in 0..spec.replicas {
        let seed = spec.seed_base.wrapping_add(rep);
        let mut init_rng = stream_rng(seed, INIT_STREAM);
        let init = InitSpec::SingleFertile1AtCenter.materialize(&sides, &mut init_rng)?;
        let traj = run_auto(&params, &init, horizon, seed, &sparse_options())?;
        let off = traj.max_fertile_offset[0];
        let life = traj.fertile_extinction[0];
        for (i, slot) in (1..=spec.n_max).enumerate() {
            let radius = off > slot as i64;
            let time = life.map_or(true, |t| t > slot as f64);
            if radius {
                radius_hits[i] += 1;
            }
            if time {
                time_hits[i] += 1;
            }
            if radius || time {
                escape_hits[i] += 1;
            }
        }
    }

    let freq = |hits: &[u64]| -> Vec<f64> {
        hits.iter().map(|&h| h as f64 / spec.replicas as f64).collect()
    };
    let ns: Vec<u64> = (1..=spec.n_max).collect();
    let escape = freq(&escape_hits);
    let radius_tail = freq(&radius_hits);
    let time_tail = freq(&time_hits);

    let gw = GwSpec::new(spec.d, spec.p)?;
    let (s1, c1) = gw.find_s1()?;
    let bound: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let n = n as f64;
            c1 * s1.powf(-n) + c1 * s1.powf(-n / 2.0) + (-0.5 * n * (1.0 - std::f64::consts::LN_2)).exp()
        })
        .collect();

    Ok(DecayMeasurement {
        escape_fit: tail_fit(&ns, &escape),
        radius_fit: tail_fit(&ns, &radius_tail),
        n: ns,
        escape,
        radius_tail,
        time_tail,
        bound,
        replicas: spec.replicas,
        sides,
    })
}

/// Worst-case invasion estimate for the block pair
/// A = [-L2, L2]^d x [L2, 2L2] inside B = [-2L2, 2L2]^d x [0, 2L2].
#[derive(Debug, Clone, Copy)]
pub struct BlockEmptySpec {
    pub lambda: f64,
    /// Fertility probability, must satisfy p < 1/(4d).
    pub p: f64,
    /// Block scale L2 >= 1.
    pub l2: i64,
    pub d: usize,
    pub replicas: u64,
    pub seed_base: u64,
    /// Start every site of B fertile (the adversarial initial bottom).
    pub plant_bottom: bool,
    /// Clamp the faces of B (sup-norm offset exactly 2 L2) to fertile for
    /// the whole run: every death mark there is instantly refilled,
    /// modeling a saturated exterior. Each such death mark counts as one
    /// entry point.
    pub plant_periphery: bool,
}

impl BlockEmptySpec {
    /// The adversarial configuration for bounding block entries from
    /// above: bottom planted and periphery clamped.
    pub fn worst_case(lambda: f64, p: f64, l2: i64, d: usize, replicas: u64, seed_base: u64) -> BlockEmptySpec {
        BlockEmptySpec {
            lambda,
            p,
            l2,
            d,
            replicas,
            seed_base,
            plant_bottom: true,
            plant_periphery: true,
        }
    }
}

/// Monte Carlo estimate of P(some fertile individual occupies the core
/// block A during [L2, 2L2]) together with entry-point statistics.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BlockEmptyEstimate {
    pub hits: u64,
    pub replicas: u64,
    pub frequency: f64,
    /// 95% Wilson interval for the invasion frequency.
    pub wilson: (f64, f64),
    /// Poisson rate of periphery entry points, 4 d L2 (4 L2 + 1)^(d-1).
    pub entry_rate: f64,
    /// The budget 2 x entry_rate from the Markov bound.
    pub entry_budget: f64,
    pub mean_entry_count: f64,
    pub max_entry_count: u64,
    /// Replicas whose entry count exceeded the budget.
    pub over_budget: u64,
}

/// Simulates the block under the adversarial boundary and measures how
/// often the core is invaded. Entry points are the death marks landing on
/// clamped periphery sites (each one stands for a fresh individual the
/// saturated exterior pushes back in).
pub fn estimate_block_empty(spec: &BlockEmptySpec) -> Result<BlockEmptyEstimate> {
    if !(spec.lambda > 0.0) || !spec.lambda.is_finite() {
        return Err(Error::invalid("lambda must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(Error::invalid(format!("p must lie in [0,1], got {}", spec.p)));
    }
    if !(1..=3).contains(&spec.d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {}", spec.d)));
    }
    if spec.p >= 1.0 / (4 * spec.d) as f64 {
        return Err(Error::invalid(format!(
            "p = {} is not below 1/(4d) = {}; the invasion estimate targets the subcritical regime",
            spec.p,
            1.0 / (4 * spec.d) as f64
        )));
    }
    if spec.l2 < 1 {
        return Err(Error::invalid("the block scale L2 must be at least 1"));
    }
    check_replicas(spec.replicas)?;
    let side = (4 * spec.l2 + 1) as usize;
    if (side as u128).pow(spec.d as u32) > 1_000_000 {
        return Err(Error::invalid("block holds more than 1e6 sites"));
    }

    let sides = vec![side; spec.d];
    let mut template = Torus::new(&sides, SiteState::Empty)?;
    let n = template.len();
    let mut clamped = vec![false; n];
    let mut core = vec![false; n];
    for site in 0..n {
        let offn = template
            .offset_from_center(site)
            .iter()
            .map(|o| o.abs())
            .max()
            .unwrap_or(0);
        if offn == 2 * spec.l2 {
            clamped[site] = spec.plant_periphery;
            if spec.plant_bottom || spec.plant_periphery {
                template.set(site, SiteState::Fertile1);
            }
        } else {
            core[site] = offn <= spec.l2;
            if spec.plant_bottom {
                template.set(site, SiteState::Fertile1);
            }
        }
    }

    let horizon = (2 * spec.l2) as f64;
    let mid = spec.l2 as f64;
    let rates = edge_rates(spec.lambda, spec.p, 0.0, 0.0, template.degree());
    let entry_rate = (4 * spec.d as i64 * spec.l2) as f64
        * ((4 * spec.l2 + 1) as f64).powi(spec.d as i32 - 1);
    let entry_budget = 2.0 * entry_rate;

    let mut hits = 0u64;
    let mut entry_sum = 0u64;
    let mut max_entry = 0u64;
    let mut over_budget = 0u64;
    for rep in 0..spec.replicas {
        let seed = spec.seed_base.wrapping_add(rep);
        let mut cfg = template.clone();
        let mut core_fertile =
            (0..n).filter(|&s| core[s] && cfg.get(s).is_fertile()).count() as i64;
        let mut crossed = false;
        let mut hit = false;
        let mut entries = 0u64;
        for ev in EventStream::new(&cfg, rates, horizon, seed) {
            if !crossed && ev.time >= mid {
                crossed = true;
                hit = hit || core_fertile > 0;
            }
            if let EventKind::Death { site } = ev.kind {
                if clamped[site as usize] {
                    entries += 1;
                    continue;
                }
            }
            if let Some((site, old, new)) = apply_event(&mut cfg, &ev.kind) {
                if core[site as usize] {
                    if old.is_fertile() {
                        core_fertile -= 1;
                    }
                    if new.is_fertile() {
                        core_fertile += 1;
                        if crossed {
                            hit = true;
                        }
                    }
                }
            }
        }
        if !crossed {
            hit = hit || core_fertile > 0;
        }
        if hit {
            hits += 1;
        }
        entry_sum += entries;
        max_entry = max_entry.max(entries);
        if entries as f64 > entry_budget {
            over_budget += 1;
        }
    }

    Ok(BlockEmptyEstimate {
        hits,
        replicas: spec.replicas,
        frequency: hits as f64 / spec.replicas as f64,
        wilson: wilson_interval(hits, spec.replicas, Z_95)?,
        entry_rate,
        entry_budget,
        mean_entry_count: entry_sum as f64 / spec.replicas as f64,
        max_entry_count: max_entry,
        over_budget,
    })
}

/// A two-type competition experiment.
#[derive(Debug, Clone)]
pub struct CompetitionSpec {
    pub params: ModelParams,
    pub sides: Vec<usize>,
    pub init: InitSpec,
    pub horizon: f64,
    pub replicas: u64,
    pub seed_base: u64,
    pub sample_interval: f64,
    /// Estimate of the critical birth rate used only for the regime
    /// warning; the run proceeds either way.
    pub lambda_c_proxy: f64,
}

/// Per-replica outcome of a competition run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CompetitionRecord {
    pub seed: u64,
    pub fertile_extinction: [Option<f64>; 2],
    pub type_extinction: [Option<f64>; 2],
    pub terminal: Occupancy,
    pub series: Vec<Sample>,
}

/// Aggregate competition outcome.
#[derive(Debug, Clone)]
pub struct CompetitionOutcome {
    pub replicas: u64,
    /// Replicas with no type-2 individual (fertile or sterile) left at
    /// the horizon.
    pub type2_extinct: u64,
    /// Replicas with at least one type-1 individual at the horizon.
    pub type1_alive: u64,
    /// Present when the parameters leave the proven-regime box
    /// (lambda1 > lambda_c proxy, p1 = 1, p2 < 1/(4d)); the run still
    /// executes in exploration mode.
    pub regime_warning: Option<String>,
    pub records: Vec<CompetitionRecord>,
}

/// Runs the two-type process from the given initial law and reports
/// per-type survival at the horizon plus full per-replica records.
pub fn run_competition(spec: &CompetitionSpec) -> Result<CompetitionOutcome> {
    spec.params.validate()?;
    check_replicas(spec.replicas)?;
    check_horizon(spec.horizon)?;
    let d = spec.sides.len();
    if !(1..=3).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
    }
    let mut warnings = Vec::new();
    if !(spec.params.lambda1 > spec.lambda_c_proxy) {
        warnings.push(format!(
            "lambda1 = {} is not above the critical proxy {}",
            spec.params.lambda1, spec.lambda_c_proxy
        ));
    }
    if spec.params.p1 != 1.0 {
        warnings.push(format!("p1 = {} differs from 1", spec.params.p1));
    }
    if !(spec.params.p2 < 1.0 / (4 * d) as f64) {
        warnings.push(format!(
            "p2 = {} is not below 1/(4d) = {}",
            spec.params.p2,
            1.0 / (4 * d) as f64
        ));
    }
    let regime_warning = if warnings.is_empty() {
        None
    } else {
        Some(format!("outside the proven regime: {}", warnings.join("; ")))
    };

    let opts = SimOptions { sample_interval: spec.sample_interval, ..SimOptions::default() };
    let records: Result<Vec<CompetitionRecord>> = (0..spec.replicas)
        .into_par_iter()
        .map(|rep| -> Result<CompetitionRecord> {
            let seed = spec.seed_base.wrapping_add(rep);
            let mut init_rng = stream_rng(seed, INIT_STREAM);
            let init = spec.init.materialize(&spec.sides, &mut init_rng)?;
            let traj: Trajectory = run_auto(&spec.params, &init, spec.horizon, seed, &opts)?;
            Ok(CompetitionRecord {
                seed,
                fertile_extinction: traj.fertile_extinction,
                type_extinction: traj.type_extinction,
                terminal: traj.terminal_occupancy(),
                series: traj.samples,
            })
        })
        .collect();
    let records = records?;

    let type2_extinct =
        records.iter().filter(|r| r.terminal.type_total(TypeLabel::Two) == 0).count() as u64;
    let type1_alive =
        records.iter().filter(|r| r.terminal.type_total(TypeLabel::One) > 0).count() as u64;
    Ok(CompetitionOutcome {
        replicas: spec.replicas,
        type2_extinct,
        type1_alive,
        regime_warning,
        records,
    })
}

/// Occupancies of the four coupled processes at one sample time.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CollectionSample {
    pub time: f64,
    /// The multitype process.
    pub xi: Occupancy,
    /// Type-1 single-type process from the 1s inside 2zL + [-L, L]^d.
    pub eta1: Occupancy,
    /// Type-2 single-type process from the 2s outside 2zL + [-KL, KL]^d.
    pub eta2: Occupancy,
    /// eta1 with births outside the space-time cone suppressed.
    pub eta_bar: Occupancy,
}

/// Diagnostic report of one coupled-collection run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CollectionReport {
    /// The cone-restricted type-1 process is nonempty at the horizon.
    pub a_z: bool,
    /// The type-2 collection never met the cone before the horizon.
    pub b_z: bool,
    /// The initial configuration has no type 2 in 2zL + [-KL, KL]^d.
    pub c_z: bool,
    /// a_z && b_z && c_z.
    pub one_source: bool,
    /// Applied type-2 births of the multitype process, each checked for
    /// containment in the type-2 collection.
    pub containment_checked: u64,
    /// Checks where the multitype process gained a type-2 individual at a
    /// site the collection does not cover.
    pub containment_violations: u64,
    pub first_violation: Option<(f64, u32)>,
    /// First time the type-2 collection occupied a site inside the cone.
    pub cone_first_meet: Option<f64>,
    pub events_processed: u64,
    pub samples: Vec<CollectionSample>,
}

/// Runs the multitype process and the three single-type collections of
/// the cone construction on one shared event stream.
///
/// The collections reuse the stream exactly: type-1 arrows and deaths
/// drive eta1 and eta_bar, type-2 arrows and deaths drive eta2, and
/// eta_bar additionally suppresses births at space-time points outside
/// the cone. Containment of the multitype type-2 set in eta2 is checked
/// at every applied type-2 birth, which is complete: deaths are shared,
/// so a violation can only be created by a birth.
#[allow(clippy::too_many_arguments)]
pub fn coupled_collections(
    params: &ModelParams,
    init: &Torus,
    z: &[i64],
    big_l: i64,
    big_k: i64,
    horizon: f64,
    seed: u64,
    sample_interval: f64,
) -> Result<CollectionReport> {
    params.validate()?;
    if params.has_infinite_rate() {
        return Err(Error::invalid(
            "coupled collections need finite rates: infinite-rate cascades do not share one event stream",
        ));
    }
    check_horizon(horizon)?;
    if !(sample_interval > 0.0) {
        return Err(Error::invalid("sample interval must be positive"));
    }
    let d = init.dimension();
    if z.len() != d {
        return Err(Error::invalid(format!("expected {d} cone coordinates, got {}", z.len())));
    }
    if big_l < 1 || big_k < 1 {
        return Err(Error::invalid("the scales L and K must be at least 1"));
    }
    for (axis, &s) in init.sides().iter().enumerate() {
        let reach = 2 * z[axis].unsigned_abs() as i64 * big_l + big_k * big_l;
        if 2 * reach + 1 > s as i64 {
            return Err(Error::invalid(format!(
                "window 2zL + [-KL, KL] does not fit on axis {axis}: reach {reach} vs side {s}"
            )));
        }
    }

    let n = init.len();
    let offsets: Vec<Vec<i64>> = (0..n).map(|s| init.offset_from_center(s)).collect();
    let in_box = |site: usize, half: i64| -> bool {
        offsets[site]
            .iter()
            .zip(z)
            .all(|(&o, &zi)| (o - 2 * zi * big_l).abs() <= half)
    };

    // Cone entry times per site: membership is monotone in time (levels
    // only widen), so one scan over block levels is exact.
    let l2 = (big_l * big_l) as f64;
    let n_cap = (horizon / l2).ceil() as i64 + 1;
    let entry_time: Vec<f64> = (0..n)
        .map(|site| {
            let x: Vec<f64> = offsets[site].iter().map(|&o| o as f64).collect();
            for level in 0..=n_cap {
                if nabla_z_contains(d, z, big_l, &x, level as f64 * l2).unwrap_or(false) {
                    return level as f64 * l2;
                }
            }
            f64::INFINITY
        })
        .collect();

    let mut xi = init.clone();
    let mut eta1 = Torus::new(init.sides(), SiteState::Empty)?;
    let mut eta2 = Torus::new(init.sides(), SiteState::Empty)?;
    let mut c_z = true;
    for site in 0..n {
        let state = init.get(site);
        match state.type_label() {
            Some(TypeLabel::One) => {
                if in_box(site, big_l) {
                    eta1.set(site, state);
                }
            }
            Some(TypeLabel::Two) => {
                if in_box(site, big_k * big_l) {
                    c_z = false;
                } else {
                    eta2.set(site, state);
                }
            }
            None => {}
        }
    }
    let mut eta_bar = eta1.clone();
    for site in 0..n {
        if eta_bar.get(site) != SiteState::Empty && entry_time[site] > 0.0 {
            eta_bar.set(site, SiteState::Empty);
        }
    }

    let mut birth_time = vec![f64::NAN; n];
    let mut cone_first_meet: Option<f64> = None;
    let note_meet = |t: f64, meet: &mut Option<f64>| {
        if meet.map_or(true, |m| t < m) {
            *meet = Some(t);
        }
    };
    for site in 0..n {
        if eta2.get(site) != SiteState::Empty {
            birth_time[site] = 0.0;
            if entry_time[site] == 0.0 {
                note_meet(0.0, &mut cone_first_meet);
            }
        }
    }

    let mut samples = Vec::new();
    let mut next_sample = 0u64;
    macro_rules! emit_through {
        ($t:expr) => {
            while next_sample as f64 * sample_interval <= ($t).min(horizon) {
                let st = next_sample as f64 * sample_interval;
                samples.push(CollectionSample {
                    time: st,
                    xi: xi.occupancy(),
                    eta1: eta1.occupancy(),
                    eta2: eta2.occupancy(),
                    eta_bar: eta_bar.occupancy(),
                });
                next_sample += 1;
            }
        };
    }

    let rates = edge_rates(params.lambda1, params.p1, params.lambda2, params.p2, init.degree());
    let mut events_processed = 0u64;
    let mut containment_checked = 0u64;
    let mut containment_violations = 0u64;
    let mut first_violation: Option<(f64, u32)> = None;
    for ev in EventStream::new(&xi, rates, horizon, seed) {
        emit_through!(ev.time);
        events_processed += 1;
        match ev.kind {
            EventKind::Death { site } => {
                apply_event(&mut xi, &ev.kind);
                apply_event(&mut eta1, &ev.kind);
                apply_event(&mut eta_bar, &ev.kind);
                if apply_event(&mut eta2, &ev.kind).is_some() {
                    let s = site as usize;
                    // The interval [birth, death) met the cone iff entry
                    // came strictly before the death.
                    if entry_time[s] < ev.time {
                        note_meet(entry_time[s].max(birth_time[s]), &mut cone_first_meet);
                    }
                    birth_time[s] = f64::NAN;
                }
            }
            EventKind::Arrow { to, offspring, .. } => match offspring.type_label() {
                Some(TypeLabel::One) => {
                    apply_event(&mut xi, &ev.kind);
                    apply_event(&mut eta1, &ev.kind);
                    if entry_time[to as usize] <= ev.time {
                        apply_event(&mut eta_bar, &ev.kind);
                    }
                }
                Some(TypeLabel::Two) => {
                    if apply_event(&mut xi, &ev.kind).is_some() {
                        containment_checked += 1;
                        if eta2.get(to as usize).type_label() != Some(TypeLabel::Two) {
                            containment_violations += 1;
                            if first_violation.is_none() {
                                first_violation = Some((ev.time, to));
                            }
                        }
                    }
                    if apply_event(&mut eta2, &ev.kind).is_some() {
                        let s = to as usize;
                        birth_time[s] = ev.time;
                        if entry_time[s] <= ev.time {
                            note_meet(ev.time, &mut cone_first_meet);
                        }
                    }
                }
                None => unreachable!("arrows always carry an occupied state"),
            },
        }
    }
    emit_through!(horizon);
    if samples.last().map(|s| s.time < horizon).unwrap_or(true) {
        samples.push(CollectionSample {
            time: horizon,
            xi: xi.occupancy(),
            eta1: eta1.occupancy(),
            eta2: eta2.occupancy(),
            eta_bar: eta_bar.occupancy(),
        });
    }
    for site in 0..n {
        if !birth_time[site].is_nan() && entry_time[site] <= horizon {
            note_meet(entry_time[site].max(birth_time[site]), &mut cone_first_meet);
        }
    }

    let a_z = eta_bar.occupancy().type_total(TypeLabel::One) > 0;
    let b_z = cone_first_meet.is_none();
    Ok(CollectionReport {
        a_z,
        b_z,
        c_z,
        one_source: a_z && b_z && c_z,
        containment_checked,
        containment_violations,
        first_violation,
        cone_first_meet,
        events_processed,
        samples,
    })
}

/// Bisection estimate of the critical birth rate of the p = 1 process.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LambdaCEstimate {
    /// Midpoint of the final bracket. An estimate, not the true constant:
    /// it depends on the torus size, the horizon, and the target
    /// frequency.
    pub estimate: f64,
    pub bracket: (f64, f64),
    /// Every probed (lambda, survival frequency) pair, in probe order.
    pub probes: Vec<(f64, f64)>,
    pub replicas: u64,
    pub horizon: f64,
}

/// Bisects on the finite-horizon survival frequency of the p = 1 process
/// started from a single fertile individual, targeting frequency 1/2.
pub fn estimate_lambda_c(
    sides: &[usize],
    horizon: f64,
    replicas: u64,
    seed_base: u64,
    lambda_lo: f64,
    lambda_hi: f64,
    iterations: u32,
) -> Result<LambdaCEstimate> {
    check_horizon(horizon)?;
    check_replicas(replicas)?;
    if !(lambda_lo > 0.0) || !(lambda_hi > lambda_lo) || !lambda_hi.is_finite() {
        return Err(Error::invalid("need 0 < lambda_lo < lambda_hi < infinity"));
    }
    if !(1..=60).contains(&iterations) {
        return Err(Error::invalid("iterations must lie in 1..=60"));
    }

    let mut probes = Vec::new();
    let survival = |lambda: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let params = ModelParams::single_type(lambda, 1.0)?;
        let mut survivors = 0u64;
        for rep in 0..replicas {
            let seed = seed_base.wrapping_add(rep);
            let mut init_rng = stream_rng(seed, INIT_STREAM);
            let init = InitSpec::SingleFertile1AtCenter.materialize(sides, &mut init_rng)?;
            let traj = run_auto(&params, &init, horizon, seed, &sparse_options())?;
            if traj.terminal_occupancy().fertile(TypeLabel::One) > 0 {
                survivors += 1;
            }
        }
        let f = survivors as f64 / replicas as f64;
        probes.push((lambda, f));
        Ok(f)
    };

    let mut lo = lambda_lo;
    let mut hi = lambda_hi;
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if survival(mid, &mut probes)? >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaCEstimate {
        estimate: 0.5 * (lo + hi),
        bracket: (lo, hi),
        probes,
        replicas,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_orders_survival_by_birth_rate() {
        let spec = SweepSpec {
            grid: single_type_grid(&[0.5, 8.0], &[1.0]).unwrap(),
            sides: vec![30],
            init: InitSpec::SingleFertile1AtCenter,
            horizon: 10.0,
            replicas: 60,
            seed_base: 900,
        };
        let cells = sweep_phase(&spec).unwrap();
        assert_eq!(cells.len(), 2);
        for cell in &cells {
            assert!(cell.survivors[0] <= cell.replicas);
            assert_eq!(cell.survivors[1], 0);
            let (lo, hi) = cell.wilson[0];
            assert!((0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0);
            // Type 2 is never present: extinct at time 0 in every replica.
            assert_eq!(cell.extinction_mean[1], Some(0.0));
        }
        // The subcritical point loses replicas before the horizon, and the
        // mean is over those non-censored extinction times only.
        let sub = cells[0].extinction_mean[0].expect("subcritical extinctions");
        assert!(sub > 0.0 && sub < 10.0);
        assert!(
            cells[0].frequency[0] < cells[1].frequency[0],
            "lambda = 0.5 should survive less often than lambda = 8: {} vs {}",
            cells[0].frequency[0],
            cells[1].frequency[0]
        );
    }

    #[test]
    fn sweep_survival_is_monotone_in_horizon_under_shared_seeds() {
        let grid = single_type_grid(&[1.0], &[1.0]).unwrap();
        let at = |horizon: f64| {
            let spec = SweepSpec {
                grid: grid.clone(),
                sides: vec![30],
                init: InitSpec::SingleFertile1AtCenter,
                horizon,
                replicas: 80,
                seed_base: 901,
            };
            sweep_phase(&spec).unwrap()[0].survivors[0]
        };
        // lambda p = 1 <= 1: survival decays with the horizon, and with
        // shared seeds the counts are nested, not merely close.
        let early = at(5.0);
        let late = at(15.0);
        assert!(late <= early, "survivors rose from {early} to {late}");
        assert!(early < 80, "even the short horizon should lose someone");
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        let base = SweepSpec {
            grid: vec![],
            sides: vec![20],
            init: InitSpec::AllEmpty,
            horizon: 5.0,
            replicas: 1,
            seed_base: 0,
        };
        assert!(sweep_phase(&base).is_err());
        let mut no_reps = base.clone();
        no_reps.grid = single_type_grid(&[1.0], &[0.5]).unwrap();
        no_reps.replicas = 0;
        assert!(sweep_phase(&no_reps).is_err());
    }

    #[test]
    fn reference_curves_cover_the_plane() {
        let rows = reference_curves(1, 0.5, 8.0, 16, Some(3.3)).unwrap();
        assert!(rows.iter().all(|(_, _, p)| *p > 0.0 && *p <= 1.0));
        for (name, lambda, p) in &rows {
            match name.as_str() {
                "lambda*p=1" => assert!((lambda * p - 1.0).abs() < 1e-12),
                "lambda*p=lambda_c" => assert!((lambda * p - 3.3).abs() < 1e-12),
                "p=1/(4d)" => assert_eq!(*p, 0.25),
                other => panic!("unexpected curve {other}"),
            }
        }
        // The mean-field curve exists only where 1/lambda <= 1.
        assert!(rows
            .iter()
            .filter(|(n, _, _)| n == "lambda*p=1")
            .all(|(_, l, _)| *l >= 1.0));
        let no_lc = reference_curves(2, 1.0, 4.0, 4, None).unwrap();
        assert!(no_lc.iter().all(|(n, _, _)| n != "lambda*p=lambda_c"));
        assert!(no_lc.iter().any(|(n, _, p)| n == "p=1/(4d)" && *p == 0.125));
    }

    #[test]
    fn decay_with_p_zero_reduces_to_one_exponential_life() {
        let spec = DecaySpec {
            lambda: 5.0,
            p: 0.0,
            d: 1,
            n_max: 4,
            replicas: 2000,
            seed_base: 4100,
        };
        let m = measure_decay(&spec).unwrap();
        // No fertile offspring ever: the fertile cloud is the origin.
        assert!(m.radius_tail.iter().all(|&f| f == 0.0));
        assert_eq!(m.escape, m.time_tail);
        // Lifetime is one Exp(1) clock: tail at n = 1 is 1/e.
        let want = (-1.0f64).exp();
        let sigma = (want * (1.0 - want) / 2000.0).sqrt();
        assert!(
            (m.time_tail[0] - want).abs() <= 3.0 * sigma,
            "time tail {} vs e^-1 {}",
            m.time_tail[0],
            want
        );
    }

    #[test]
    fn decay_tail_falls_and_stays_under_the_branching_bound() {
        let spec = DecaySpec {
            lambda: 10.0,
            p: 0.2,
            d: 1,
            n_max: 8,
            replicas: 1500,
            seed_base: 4200,
        };
        let m = measure_decay(&spec).unwrap();
        // Escape events are nested across n, so the frequencies are
        // exactly nonincreasing, and the same holds per component.
        for i in 1..m.escape.len() {
            assert!(m.escape[i] <= m.escape[i - 1]);
            assert!(m.radius_tail[i] <= m.radius_tail[i - 1]);
            assert!(m.time_tail[i] <= m.time_tail[i - 1]);
        }
        for (i, &b) in m.bound.iter().enumerate() {
            let f = m.escape[i];
            let sigma = (f.max(1e-9) * (1.0 - f.min(1.0 - 1e-9)) / 1500.0).sqrt();
            assert!(f <= b + 2.326 * sigma, "n = {}: escape {f} above bound {b}", i + 1);
        }
        let fit = m.escape_fit.expect("positive tail entries");
        assert!(fit.slope < 0.0, "slope {}", fit.slope);
        assert!(m.radius_fit.is_some());
    }

    #[test]
    fn decay_refuses_supercritical_parameters() {
        let mut spec = DecaySpec {
            lambda: 10.0,
            p: 0.25,
            d: 1,
            n_max: 4,
            replicas: 10,
            seed_base: 0,
        };
        assert!(measure_decay(&spec).is_err());
        spec.p = 0.3;
        assert!(measure_decay(&spec).is_err());
        spec.p = 0.2;
        spec.d = 4;
        assert!(measure_decay(&spec).is_err());
    }

    #[test]
    fn block_estimate_is_zero_for_lone_periphery_individuals() {
        // p = 0 and a clamped periphery only: fertile individuals sit at
        // sup-norm offset 2 L2 and have no fertile offspring, so none can
        // reach the core. The bottom is NOT planted here: a planted
        // bottom individual inside the core would reach the window
        // [L2, 2L2] with probability e^{-L2} by surviving alone, which
        // already makes the estimate positive (see the companion test).
        let spec = BlockEmptySpec {
            lambda: 8.0,
            p: 0.0,
            l2: 2,
            d: 1,
            replicas: 300,
            seed_base: 5100,
            plant_bottom: false,
            plant_periphery: true,
        };
        let est = estimate_block_empty(&spec).unwrap();
        assert_eq!(est.hits, 0);

        let planted = BlockEmptySpec { plant_bottom: true, ..spec };
        let with_bottom = estimate_block_empty(&planted).unwrap();
        assert!(
            with_bottom.hits > 0,
            "a planted bottom survives into the core window with probability ~1-(1-e^-2)^5"
        );
    }

    #[test]
    fn block_entry_points_respect_the_poisson_budget() {
        let spec = BlockEmptySpec::worst_case(2.0, 0.2, 5, 1, 300, 5200);
        let est = estimate_block_empty(&spec).unwrap();
        // d = 1, L2 = 5: entry rate 4 d L2 = 20, budget 40.
        assert_eq!(est.entry_rate, 20.0);
        assert_eq!(est.entry_budget, 40.0);
        assert_eq!(est.over_budget, 0, "max count {}", est.max_entry_count);
        let sigma = (est.entry_rate / 300.0f64).sqrt();
        assert!(
            (est.mean_entry_count - est.entry_rate).abs() <= 3.0 * sigma,
            "mean {} vs rate {}",
            est.mean_entry_count,
            est.entry_rate
        );
    }

    #[test]
    fn block_estimate_decreases_with_scale() {
        let at = |l2: i64| {
            let spec = BlockEmptySpec::worst_case(10.0, 0.2, l2, 1, 400, 5300);
            estimate_block_empty(&spec).unwrap().frequency
        };
        let small = at(3);
        let mid = at(6);
        let large = at(12);
        assert!(small > mid && mid > large, "expected decrease: {small}, {mid}, {large}");
    }

    #[test]
    fn block_estimate_validates_input() {
        assert!(estimate_block_empty(&BlockEmptySpec::worst_case(2.0, 0.3, 5, 1, 10, 0)).is_err());
        assert!(estimate_block_empty(&BlockEmptySpec::worst_case(2.0, 0.2, 0, 1, 10, 0)).is_err());
        assert!(estimate_block_empty(&BlockEmptySpec::worst_case(f64::INFINITY, 0.2, 5, 1, 10, 0))
            .is_err());
    }

    #[test]
    fn competition_lets_type_one_win_in_regime() {
        let spec = CompetitionSpec {
            params: ModelParams::new(6.0, 1.0, 8.0, 0.2).unwrap(),
            sides: vec![60],
            init: InitSpec::Product([0.25, 0.0, 0.25, 0.0]),
            horizon: 40.0,
            replicas: 10,
            seed_base: 6100,
            sample_interval: 5.0,
            lambda_c_proxy: 3.5,
        };
        let out = run_competition(&spec).unwrap();
        assert!(out.regime_warning.is_none());
        assert!(out.type2_extinct >= 8, "type 2 extinct in {}/10", out.type2_extinct);
        assert!(out.type1_alive >= 8, "type 1 alive in {}/10", out.type1_alive);
        assert_eq!(out.records.len(), 10);
        for r in &out.records {
            assert!(r.series.last().unwrap().time == 40.0);
            if r.terminal.type_total(TypeLabel::Two) == 0 {
                assert!(r.type_extinction[1].is_some());
            }
        }
    }

    #[test]
    fn competition_inverts_when_type_two_outbreeds() {
        // Sanity inversion: p2 = 1 and lambda2 > lambda1 make type 2 the
        // stronger contact process, so it should hold far more ground.
        let spec = CompetitionSpec {
            params: ModelParams::new(2.0, 1.0, 8.0, 1.0).unwrap(),
            sides: vec![60],
            init: InitSpec::Product([0.25, 0.0, 0.25, 0.0]),
            horizon: 40.0,
            replicas: 10,
            seed_base: 6200,
            sample_interval: 10.0,
            lambda_c_proxy: 3.5,
        };
        let out = run_competition(&spec).unwrap();
        assert!(out.regime_warning.is_some());
        let totals = out.records.iter().fold((0usize, 0usize), |acc, r| {
            (
                acc.0 + r.terminal.type_total(TypeLabel::One),
                acc.1 + r.terminal.type_total(TypeLabel::Two),
            )
        });
        assert!(totals.1 > 4 * totals.0.max(1), "type totals {totals:?}");
    }

    #[test]
    fn competition_runs_in_infinite_rate_mode() {
        let spec = CompetitionSpec {
            params: ModelParams::new(6.0, 1.0, f64::INFINITY, 0.2).unwrap(),
            sides: vec![50],
            init: InitSpec::Product([0.2, 0.0, 0.2, 0.0]),
            horizon: 25.0,
            replicas: 6,
            seed_base: 6300,
            sample_interval: 5.0,
            lambda_c_proxy: 3.5,
        };
        let out = run_competition(&spec).unwrap();
        assert!(out.type2_extinct >= 4, "type 2 extinct in {}/6", out.type2_extinct);
    }

    #[test]
    fn collections_track_the_cone_events() {
        // Type-1 seeds inside the window, type-2 seeds far outside it.
        let mut init = Torus::new(&[90], SiteState::Empty).unwrap();
        let c = init.center();
        for off in [-2i64, 0, 2] {
            init.set((c as i64 + off) as usize, SiteState::Fertile1);
        }
        for off in [-30i64, 30] {
            init.set((c as i64 + off) as usize, SiteState::Fertile2);
        }
        let params = ModelParams::new(5.0, 1.0, 4.0, 0.2).unwrap();
        let report =
            coupled_collections(&params, &init, &[0], 2, 5, 12.0, 7100, 2.0).unwrap();
        assert!(report.c_z, "no type 2 within KL = 10 of the center");
        assert!(report.events_processed > 0);
        let first = &report.samples[0];
        assert_eq!(first.time, 0.0);
        assert_eq!(first.xi.type_total(TypeLabel::One), 3);
        assert_eq!(first.eta1.type_total(TypeLabel::One), 3);
        assert_eq!(first.eta2.type_total(TypeLabel::Two), 2);
        assert_eq!(first.eta_bar.type_total(TypeLabel::One), 3);
        assert_eq!(
            report.b_z,
            report.cone_first_meet.is_none(),
            "b_z must mirror the recorded meet"
        );
        assert_eq!(report.one_source, report.a_z && report.b_z && report.c_z);
        // eta1 lives inside xi's type-1 set pathwise; spot-check counts.
        for s in &report.samples {
            assert!(s.eta1.type_total(TypeLabel::One) <= s.xi.type_total(TypeLabel::One));
            assert!(s.eta_bar.type_total(TypeLabel::One) <= s.eta1.type_total(TypeLabel::One));
        }
    }

    #[test]
    fn collections_with_no_fertile_births_shrink_eta2() {
        // p2 = 0: every type-2 birth is sterile, so the fertile-2 count
        // of the collection can only fall.
        let mut init = Torus::new(&[80], SiteState::Empty).unwrap();
        let c = init.center() as i64;
        for off in [-25i64, -20, 20, 25] {
            init.set((c + off) as usize, SiteState::Fertile2);
        }
        init.set(c as usize, SiteState::Fertile1);
        let params = ModelParams::new(4.0, 1.0, 6.0, 0.0).unwrap();
        let report = coupled_collections(&params, &init, &[0], 2, 4, 15.0, 7200, 1.0).unwrap();
        let mut last = usize::MAX;
        for s in &report.samples {
            let f2 = s.eta2.fertile(TypeLabel::Two);
            assert!(f2 <= last, "fertile-2 count rose to {f2}");
            last = f2;
        }
    }

    #[test]
    fn collections_reject_bad_geometry() {
        let init = Torus::new(&[40], SiteState::Empty).unwrap();
        let params = ModelParams::new(3.0, 1.0, 5.0, 0.2).unwrap();
        // K L reach 24 does not fit a side-40 ring.
        assert!(coupled_collections(&params, &init, &[0], 4, 6, 5.0, 0, 1.0).is_err());
        let inf = ModelParams::new(3.0, 1.0, f64::INFINITY, 0.2).unwrap();
        assert!(coupled_collections(&inf, &init, &[0], 1, 2, 5.0, 0, 1.0).is_err());
    }

    #[test]
    fn lambda_c_bisection_brackets_a_transition() {
        let est = estimate_lambda_c(&[60], 25.0, 40, 8100, 1.0, 10.0, 5).unwrap();
        assert!(est.bracket.0 >= 1.0 && est.bracket.1 <= 10.0);
        assert!(est.estimate > est.bracket.0 && est.estimate < est.bracket.1);
        assert_eq!(est.probes.len(), 5);
        // The probes straddle the target: some frequency below 1/2 and
        // some at or above it.
        assert!(est.probes.iter().any(|&(_, f)| f < 0.5));
        assert!(est.probes.iter().any(|&(_, f)| f >= 0.5));
        assert!(estimate_lambda_c(&[60], 25.0, 40, 0, 5.0, 2.0, 5).is_err());
    }

    #[test]
    fn density_decreases_along_fixed_lambda_p_family() {
        use crate::stats::mann_whitney_greater;
        // Fixed lambda p = 3.6 with p dropping: more sterile births
        // thin the population, so terminal occupied density falls. The
        // horizon is short because the two low-p members are dying out;
        // at t = 5 the three groups are still well separated.
        let triples = [(4.0, 0.9), (12.0, 0.3), (36.0, 0.1)];
        let sides = vec![200usize];
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for (lambda, p) in triples {
            let params = ModelParams::single_type(lambda, p).unwrap();
            let mut densities = Vec::new();
            for rep in 0..20u64 {
                let seed = 8000 + rep;
                let mut rng = stream_rng(seed, INIT_STREAM);
                let init = InitSpec::Product([1.0, 0.0, 0.0, 0.0])
                    .materialize(&sides, &mut rng)
                    .unwrap();
                let traj = run_auto(&params, &init, 5.0, seed, &sparse_options()).unwrap();
                let occ = traj.terminal_occupancy();
                densities.push(occ.occupied() as f64 / occ.total() as f64);
            }
            groups.push(densities);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
        assert!(
            means[0] > means[1] && means[1] > means[2],
            "density means not decreasing: {means:?}"
        );
        for pair in groups.windows(2) {
            let mw = mann_whitney_greater(&pair[0], &pair[1]).unwrap();
            assert!(mw.p_value < 0.05, "trend not significant: p = {}", mw.p_value);
        }
    }
}
