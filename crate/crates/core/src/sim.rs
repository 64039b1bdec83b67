//! Event-driven simulators for the multitype contact process.
//!
//! Three runners share one trajectory format:
//! - [`run_graphical`]: exact simulation driven by the graphical
//!   representation (per-edge arrow clocks, per-site death clocks).
//! - [`run_gillespie`]: aggregated-rate direct method; samples only events
//!   with a currently occupied source, so it is faster on sparse
//!   configurations and distributionally equivalent to the graphical runner.
//! - [`run_infinite_rate`]: the limit where one or both birth rates are
//!   infinite; death marks drive the dynamics and empty sites adjacent to
//!   fertile individuals of an infinite-rate type are refilled by an
//!   instantaneous cascade.
//!
//! All samples are left limits: a sample at time t reflects every event
//! strictly before t plus any event applied exactly at an earlier time; an
//! event at exactly a sample time is applied after the sample is taken.

use crate::lattice::{Occupancy, SiteState, Torus, TypeLabel};
use crate::stream::{
    edge_rates, stream_rng, EventKind, EventStream, CASCADE_STREAM, GILLESPIE_STREAM,
};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Model parameters: birth rates (infinity allowed) and fertile-offspring
/// probabilities for the two types. Death rate is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModelParams {
    pub lambda1: f64,
    pub p1: f64,
    pub lambda2: f64,
    pub p2: f64,
}

impl ModelParams {
    pub fn new(lambda1: f64, p1: f64, lambda2: f64, p2: f64) -> Result<ModelParams> {
        let params = ModelParams { lambda1, p1, lambda2, p2 };
        params.validate()?;
        Ok(params)
    }

    /// Single-type model: type 2 absent (rate 0).
    pub fn single_type(lambda: f64, p: f64) -> Result<ModelParams> {
        ModelParams::new(lambda, p, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, lambda) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if lambda.is_nan() || lambda < 0.0 {
                return Err(Error::invalid(format!("{label} must be >= 0, got {lambda}")));
            }
        }
        for (label, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{label} must lie in [0,1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn q1(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn q2(&self) -> f64 {
        1.0 - self.p2
    }

    pub fn lambda(&self, t: TypeLabel) -> f64 {
        match t {
            TypeLabel::One => self.lambda1,
            TypeLabel::Two => self.lambda2,
        }
    }

    pub fn fertile_prob(&self, t: TypeLabel) -> f64 {
        match t {
            TypeLabel::One => self.p1,
            TypeLabel::Two => self.p2,
        }
    }

    pub fn has_infinite_rate(&self) -> bool {
        self.lambda1.is_infinite() || self.lambda2.is_infinite()
    }

    fn require_finite(&self) -> Result<()> {
        if self.has_infinite_rate() {
            return Err(Error::invalid(
                "birth rates must be finite here; use run_infinite_rate for infinite rates",
            ));
        }
        Ok(())
    }
}

/// Sampling and recording options shared by the runners.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Spacing of occupancy samples; t=0 and the horizon are always sampled.
    pub sample_interval: f64,
    /// Record a full configuration at every sample time.
    pub record_snapshots: bool,
    /// Resolution order for infinite-rate cascades.
    pub cascade_order: CascadeOrder,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            sample_interval: 1.0,
            record_snapshots: false,
            cascade_order: CascadeOrder::UniformRandom,
        }
    }
}

/// Order in which frontier (empty site, fertile neighbor) pairs are resolved
/// inside one cascade. The limit dynamics depend on this choice, so it is a
/// parameter rather than a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CascadeOrder {
    /// Uniformly random among the currently valid pairs.
    #[default]
    UniformRandom,
    /// First-in-first-out in pair discovery order.
    DiscoveryOrder,
}

/// Occupancy counts at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Sample {
    pub time: f64,
    pub occupancy: Occupancy,
}

/// The recorded outcome of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub horizon: f64,
    pub sample_interval: f64,
    /// Occupancy at t = 0, then every sample interval, then the horizon.
    pub samples: Vec<Sample>,
    /// Full configurations at sample times; empty unless requested.
    pub snapshots: Vec<(f64, Vec<SiteState>)>,
    pub terminal: Torus,
    /// Events processed: all stream events for the graphical runners, all
    /// reaction draws for the aggregated-rate runner.
    pub events_generated: u64,
    /// Applied births by offspring state (fertile 1, sterile 1, fertile 2,
    /// sterile 2). Infinite-rate cascade fills triggered by events count
    /// here; resolution of the initial condition at t=0 does not.
    pub births_applied: [u64; 4],
    pub deaths_applied: u64,
    /// First time the fertile population of each type hits zero (it can
    /// never rebound). `None` if still positive at the horizon.
    pub fertile_extinction: [Option<f64>; 2],
    /// First time each type disappears entirely, fertile and sterile.
    pub type_extinction: [Option<f64>; 2],
    /// Largest center-offset sup-norm ever reached by a fertile individual
    /// of each type, including the initial configuration; -1 if none ever.
    pub max_fertile_offset: [i64; 2],
}

impl Trajectory {
    pub fn terminal_occupancy(&self) -> Occupancy {
        self.samples.last().expect("samples never empty").occupancy
    }

    /// Configuration at the latest sample time <= t.
    ///
    /// Requires snapshots to have been recorded; errors if t is negative,
    /// beyond the horizon, or before the first recorded snapshot.
    pub fn snapshot_at(&self, t: f64) -> Result<&(f64, Vec<SiteState>)> {
        if self.snapshots.is_empty() {
            return Err(Error::invalid("trajectory was run without snapshot recording"));
        }
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(Error::invalid(format!(
                "snapshot time {t} outside sampled range [0, {}]",
                self.horizon
            )));
        }
        let idx = self.snapshots.partition_point(|(st, _)| *st <= t + 1e-12);
        if idx == 0 {
            return Err(Error::invalid(format!("no snapshot at or before t={t}")));
        }
        Ok(&self.snapshots[idx - 1])
    }
}

/// Apply one graphical-representation event to a configuration.
///
/// An arrow acts only when its source hosts a fertile individual of the
/// arrow's type and its target is empty; occupied targets block. A death
/// mark empties its site unconditionally. Returns the change, if any.
pub fn apply_event(cfg: &mut Torus, ev: &EventKind) -> Option<(u32, SiteState, SiteState)> {
    match *ev {
        EventKind::Death { site } => {
            let old = cfg.get(site as usize);
            if old.is_occupied() {
                cfg.set(site as usize, SiteState::Empty);
                Some((site, old, SiteState::Empty))
            } else {
                None
            }
        }
        EventKind::Arrow { from, to, offspring } => {
            let src = cfg.get(from as usize);
            let required = offspring
                .type_label()
                .expect("arrows always carry an occupied state")
                .fertile();
            if src == required && cfg.get(to as usize) == SiteState::Empty {
                cfg.set(to as usize, offspring);
                Some((to, SiteState::Empty, offspring))
            } else {
                None
            }
        }
    }
}

/// Incremental trajectory recorder shared by the runners.
struct Recorder {
    seed: u64,
    horizon: f64,
    interval: f64,
    record_snapshots: bool,
    samples: Vec<Sample>,
    snapshots: Vec<(f64, Vec<SiteState>)>,
    next_sample_index: u64,
    occ: Occupancy,
    events_generated: u64,
    births_applied: [u64; 4],
    deaths_applied: u64,
    fertile_extinction: [Option<f64>; 2],
    type_extinction: [Option<f64>; 2],
    max_fertile_offset: [i64; 2],
    offset_norm: Vec<i64>,
}

fn birth_slot(s: SiteState) -> usize {
    match s {
        SiteState::Fertile1 => 0,
        SiteState::Sterile1 => 1,
        SiteState::Fertile2 => 2,
        SiteState::Sterile2 => 3,
        SiteState::Empty => unreachable!("births always place an occupied state"),
    }
}

impl Recorder {
    fn new(cfg: &Torus, horizon: f64, opts: &SimOptions, seed: u64) -> Result<Recorder> {
        if !(horizon >= 0.0) || horizon.is_infinite() {
            return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if !(opts.sample_interval > 0.0) {
            return Err(Error::invalid(format!(
                "sample interval must be > 0, got {}",
                opts.sample_interval
            )));
        }
        let offset_norm = (0..cfg.len())
            .map(|s| {
                cfg.offset_from_center(s)
                    .iter()
                    .map(|o| o.abs())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut rec = Recorder {
            seed,
            horizon,
            interval: opts.sample_interval,
            record_snapshots: opts.record_snapshots,
            samples: Vec::new(),
            snapshots: Vec::new(),
            next_sample_index: 0,
            occ: cfg.occupancy(),
            events_generated: 0,
            births_applied: [0; 4],
            deaths_applied: 0,
            fertile_extinction: [None; 2],
            type_extinction: [None; 2],
            max_fertile_offset: [-1; 2],
            offset_norm,
        };
        for site in 0..cfg.len() {
            let s = cfg.get(site);
            if s.is_fertile() {
                let t = s.type_label().unwrap().index();
                rec.max_fertile_offset[t] = rec.max_fertile_offset[t].max(rec.offset_norm[site]);
            }
        }
        rec.note_extinctions(0.0);
        rec.emit_samples_through(0.0, cfg);
        Ok(rec)
    }

    fn note_extinctions(&mut self, t: f64) {
        for (idx, label) in [TypeLabel::One, TypeLabel::Two].into_iter().enumerate() {
            if self.fertile_extinction[idx].is_none() && self.occ.fertile(label) == 0 {
                self.fertile_extinction[idx] = Some(t);
            }
            if self.type_extinction[idx].is_none() && self.occ.type_total(label) == 0 {
                self.type_extinction[idx] = Some(t);
            }
        }
    }

    fn sample_time(&self, index: u64) -> f64 {
        index as f64 * self.interval
    }

    /// Emit every pending sample with time <= t using the current config.
    fn emit_samples_through(&mut self, t: f64, cfg: &Torus) {
        while self.sample_time(self.next_sample_index) <= t.min(self.horizon) {
            let st = self.sample_time(self.next_sample_index);
            self.samples.push(Sample { time: st, occupancy: self.occ });
            if self.record_snapshots {
                self.snapshots.push((st, cfg.cells().to_vec()));
            }
            self.next_sample_index += 1;
        }
    }

    fn count_generated(&mut self) {
        self.events_generated += 1;
    }

    fn apply_change(&mut self, t: f64, site: u32, old: SiteState, new: SiteState) {
        match old {
            SiteState::Empty => {}
            SiteState::Fertile1 => self.occ.fertile1 -= 1,
            SiteState::Sterile1 => self.occ.sterile1 -= 1,
            SiteState::Fertile2 => self.occ.fertile2 -= 1,
            SiteState::Sterile2 => self.occ.sterile2 -= 1,
        }
        if old == SiteState::Empty {
            self.occ.empty -= 1;
        }
        match new {
            SiteState::Empty => {
                self.occ.empty += 1;
                self.deaths_applied += 1;
            }
            s => {
                match s {
                    SiteState::Fertile1 => self.occ.fertile1 += 1,
                    SiteState::Sterile1 => self.occ.sterile1 += 1,
                    SiteState::Fertile2 => self.occ.fertile2 += 1,
                    SiteState::Sterile2 => self.occ.sterile2 += 1,
                    SiteState::Empty => unreachable!(),
                }
                self.births_applied[birth_slot(s)] += 1;
                if s.is_fertile() {
                    let idx = s.type_label().unwrap().index();
                    self.max_fertile_offset[idx] =
                        self.max_fertile_offset[idx].max(self.offset_norm[site as usize]);
                }
            }
        }
        self.note_extinctions(t);
    }

    fn finish(mut self, cfg: Torus) -> Trajectory {
        self.emit_samples_through(self.horizon, &cfg);
        // The horizon itself is always the final sample.
        if self
            .samples
            .last()
            .map(|s| s.time < self.horizon)
            .unwrap_or(true)
        {
            self.samples.push(Sample { time: self.horizon, occupancy: self.occ });
            if self.record_snapshots {
                self.snapshots.push((self.horizon, cfg.cells().to_vec()));
            }
        }
        Trajectory {
            seed: self.seed,
            horizon: self.horizon,
            sample_interval: self.interval,
            samples: self.samples,
            snapshots: self.snapshots,
            terminal: cfg,
            events_generated: self.events_generated,
            births_applied: self.births_applied,
            deaths_applied: self.deaths_applied,
            fertile_extinction: self.fertile_extinction,
            type_extinction: self.type_extinction,
            max_fertile_offset: self.max_fertile_offset,
        }
    }
}

/// Exact simulation from the graphical representation.
pub fn run_graphical(
    params: &ModelParams,
    init: &Torus,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    params.validate()?;
    params.require_finite()?;
    let rates = edge_rates(params.lambda1, params.p1, params.lambda2, params.p2, init.degree());
    let mut cfg = init.clone();
    let mut rec = Recorder::new(&cfg, horizon, opts, seed)?;
    for ev in EventStream::new(&cfg, rates, horizon, seed) {
        rec.emit_samples_through(ev.time, &cfg);
        rec.count_generated();
        if let Some((site, old, new)) = apply_event(&mut cfg, &ev.kind) {
            rec.apply_change(ev.time, site, old, new);
            // The all-empty configuration is absorbing: arrows need a
            // fertile source and death marks an occupied site.
            if rec.occ.occupied() == 0 {
                break;
            }
        }
    }
    Ok(rec.finish(cfg))
}

/// Dispatch on rate finiteness: the event-stream runner for finite rates,
/// the cascade runner when a birth rate is infinite.
pub fn run_auto(
    params: &ModelParams,
    init: &Torus,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if params.has_infinite_rate() {
        run_infinite_rate(params, init, horizon, seed, opts)
    } else {
        run_graphical(params, init, horizon, seed, opts)
    }
}

/// Index set with O(1) insert, remove, and uniform sampling.
struct IndexedSet {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const NOT_PRESENT: u32 = u32::MAX;

impl IndexedSet {
    fn new(capacity: usize) -> IndexedSet {
        IndexedSet { items: Vec::new(), pos: vec![NOT_PRESENT; capacity] }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn insert(&mut self, site: u32) {
        debug_assert_eq!(self.pos[site as usize], NOT_PRESENT);
        self.pos[site as usize] = self.items.len() as u32;
        self.items.push(site);
    }

    fn remove(&mut self, site: u32) {
        let idx = self.pos[site as usize];
        debug_assert_ne!(idx, NOT_PRESENT);
        let last = *self.items.last().unwrap();
        self.items[idx as usize] = last;
        self.pos[last as usize] = idx;
        self.items.pop();
        self.pos[site as usize] = NOT_PRESENT;
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.items[rng.gen_range(0..self.items.len())]
    }
}

/// Aggregated-rate direct-method simulation, equivalent in law to
/// [`run_graphical`].
///
/// Total event rate is (occupied sites) + sum over types of
/// lambda_i * (fertile-i sites); a birth event picks a uniform fertile
/// source, a uniform neighbor, and an offspring fertility from p_i, and is
/// discarded if the target is occupied.
pub fn run_gillespie(
    params: &ModelParams,
    init: &Torus,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    params.validate()?;
    params.require_finite()?;
    let mut cfg = init.clone();
    let mut rec = Recorder::new(&cfg, horizon, opts, seed)?;
    let mut rng = stream_rng(seed, GILLESPIE_STREAM);

    let n = cfg.len();
    let mut occupied = IndexedSet::new(n);
    let mut fertile = [IndexedSet::new(n), IndexedSet::new(n)];
    for site in 0..n as u32 {
        let s = cfg.get(site as usize);
        if s.is_occupied() {
            occupied.insert(site);
        }
        if s.is_fertile() {
            fertile[s.type_label().unwrap().index()].insert(site);
        }
    }

    let remove_site = |set_occ: &mut IndexedSet, set_f: &mut [IndexedSet; 2], site: u32, s: SiteState| {
        set_occ.remove(site);
        if s.is_fertile() {
            set_f[s.type_label().unwrap().index()].remove(site);
        }
    };

    let mut t = 0.0f64;
    loop {
        let death_rate = occupied.len() as f64;
        let birth_rate1 = params.lambda1 * fertile[0].len() as f64;
        let birth_rate2 = params.lambda2 * fertile[1].len() as f64;
        let total = death_rate + birth_rate1 + birth_rate2;
        if total == 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(&mut rng);
        t += e / total;
        if t > horizon {
            break;
        }
        rec.emit_samples_through(t, &cfg);
        rec.count_generated();
        let pick: f64 = rng.gen::<f64>() * total;
        if pick < death_rate {
            let site = occupied.sample(&mut rng);
            let old = cfg.get(site as usize);
            remove_site(&mut occupied, &mut fertile, site, old);
            cfg.set(site as usize, SiteState::Empty);
            rec.apply_change(t, site, old, SiteState::Empty);
        } else {
            let label = if pick < death_rate + birth_rate1 { TypeLabel::One } else { TypeLabel::Two };
            let from = fertile[label.index()].sample(&mut rng);
            let slot = rng.gen_range(0..cfg.degree());
            let to = cfg.neighbors(from as usize)[slot];
            let offspring = if rng.gen::<f64>() < params.fertile_prob(label) {
                label.fertile()
            } else {
                label.sterile()
            };
            if cfg.get(to as usize) == SiteState::Empty {
                cfg.set(to as usize, offspring);
                occupied.insert(to);
                if offspring.is_fertile() {
                    fertile[label.index()].insert(to);
                }
                rec.apply_change(t, to, SiteState::Empty, offspring);
            }
        }
    }
    Ok(rec.finish(cfg))
}

/// Frontier pair: an empty site and a fertile neighbor of infinite-rate type.
type FrontierPair = (u32, u32);

struct Cascade {
    infinite: [bool; 2],
    order: CascadeOrder,
}

impl Cascade {
    fn is_source(&self, s: SiteState) -> bool {
        match s.type_label() {
            Some(label) => s.is_fertile() && self.infinite[label.index()],
            None => false,
        }
    }

    fn seed_pairs_from_site(&self, cfg: &Torus, site: u32, pairs: &mut Vec<FrontierPair>) {
        if cfg.get(site as usize) != SiteState::Empty {
            return;
        }
        for &nb in cfg.neighbors(site as usize) {
            if self.is_source(cfg.get(nb as usize)) {
                pairs.push((site, nb));
            }
        }
    }

    /// Resolve frontier pairs until no empty site has a fertile neighbor of
    /// an infinite-rate type. Calls `on_fill` for every filled site.
    fn run(
        &self,
        cfg: &mut Torus,
        params: &ModelParams,
        rng: &mut impl Rng,
        mut pairs: Vec<FrontierPair>,
        mut on_fill: impl FnMut(u32, SiteState),
    ) {
        while !pairs.is_empty() {
            let (site, source) = match self.order {
                CascadeOrder::UniformRandom => {
                    let idx = rng.gen_range(0..pairs.len());
                    pairs.swap_remove(idx)
                }
                CascadeOrder::DiscoveryOrder => pairs.remove(0),
            };
            // Stale pairs (site filled or source gone) are skipped; random
            // picks over a list with stale entries stay uniform over the
            // valid ones by rejection.
            if cfg.get(site as usize) != SiteState::Empty
                || !self.is_source(cfg.get(source as usize))
            {
                continue;
            }
            let label = cfg.get(source as usize).type_label().unwrap();
            let offspring = if rng.gen::<f64>() < params.fertile_prob(label) {
                label.fertile()
            } else {
                label.sterile()
            };
            cfg.set(site as usize, offspring);
            on_fill(site, offspring);
            if self.is_source(offspring) {
                for &nb in cfg.neighbors(site as usize) {
                    if cfg.get(nb as usize) == SiteState::Empty {
                        pairs.push((nb, site));
                    }
                }
            }
        }
    }
}

/// Simulation with one or both birth rates infinite.
///
/// Finite-rate types keep their arrow clocks; infinite-rate types reproduce
/// through cascades. The initial configuration is first resolved to a
/// cascade fixpoint (this is the state reported at t=0), then death marks
/// and finite-rate arrows fire in time order, each followed by a cascade.
pub fn run_infinite_rate(
    params: &ModelParams,
    init: &Torus,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if !params.has_infinite_rate() {
        return Err(Error::invalid(
            "run_infinite_rate requires at least one infinite birth rate",
        ));
    }
    let infinite = [params.lambda1.is_infinite(), params.lambda2.is_infinite()];
    let finite_lambda1 = if infinite[0] { 0.0 } else { params.lambda1 };
    let finite_lambda2 = if infinite[1] { 0.0 } else { params.lambda2 };
    let rates = edge_rates(finite_lambda1, params.p1, finite_lambda2, params.p2, init.degree());

    let cascade = Cascade { infinite, order: opts.cascade_order };
    let mut rng = stream_rng(seed, CASCADE_STREAM);
    let mut cfg = init.clone();

    // Resolve the initial condition before recording anything.
    let mut initial_pairs = Vec::new();
    for site in 0..cfg.len() as u32 {
        cascade.seed_pairs_from_site(&cfg, site, &mut initial_pairs);
    }
    cascade.run(&mut cfg, params, &mut rng, initial_pairs, |_, _| {});

    let mut rec = Recorder::new(&cfg, horizon, opts, seed)?;
    for ev in EventStream::new(&cfg, rates, horizon, seed) {
        rec.emit_samples_through(ev.time, &cfg);
        rec.count_generated();
        if let Some((site, old, new)) = apply_event(&mut cfg, &ev.kind) {
            rec.apply_change(ev.time, site, old, new);
            // Only a death can open a frontier: at a cascade fixpoint no
            // empty site neighbors an infinite-rate fertile site, and a
            // finite-rate birth fills a site without creating sources of
            // infinite-rate type.
            if new == SiteState::Empty {
                let mut pairs = Vec::new();
                cascade.seed_pairs_from_site(&cfg, site, &mut pairs);
                cascade.run(&mut cfg, params, &mut rng, pairs, |filled, offspring| {
                    rec.apply_change(ev.time, filled, SiteState::Empty, offspring);
                });
            }
            // Cascades only add individuals, so emptiness is absorbing
            // here exactly as in the finite-rate runner.
            if rec.occ.occupied() == 0 {
                break;
            }
        }
    }
    Ok(rec.finish(cfg))
}
