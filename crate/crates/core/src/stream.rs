//! The graphical representation as a deterministic event stream.
//!
//! Every site carries a death clock at rate 1; every directed edge carries
//! one clock per arrow kind (fertile or sterile offspring of each type), the
//! per-edge rate being the birth rate times the offspring probability divided
//! by 2d. Each clock draws its exponential interarrival times from its own
//! RNG substream keyed by (site, edge slot, kind), so the realization seen by
//! one clock never depends on how much randomness any other consumer draws.
//! Merging happens in a priority queue; equal times are broken by clock
//! creation order.

use crate::lattice::{SiteState, Torus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Substream key for initial-condition materialization.
pub const INIT_STREAM: u64 = u64::MAX;
/// Substream key for the aggregated-rate simulator's single stream.
pub const GILLESPIE_STREAM: u64 = u64::MAX - 1;
/// Substream key for infinite-birth-rate cascade resolution.
pub const CASCADE_STREAM: u64 = u64::MAX - 2;
/// Substream key for experiment-level auxiliary draws.
pub const EXPERIMENT_STREAM: u64 = u64::MAX - 3;

/// A ChaCha8 generator on substream `stream` of the given master seed.
///
/// All randomness in the toolkit flows through substreams of one 64-bit
/// master seed, so a run is reproducible from that seed alone.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Arrow kinds in fixed order: fertile 1, sterile 1, fertile 2, sterile 2.
pub const ARROW_KINDS: [SiteState; 4] = [
    SiteState::Fertile1,
    SiteState::Sterile1,
    SiteState::Fertile2,
    SiteState::Sterile2,
];

fn kind_code(offspring: SiteState) -> u64 {
    match offspring {
        SiteState::Fertile1 => 1,
        SiteState::Sterile1 => 2,
        SiteState::Fertile2 => 3,
        SiteState::Sterile2 => 4,
        SiteState::Empty => unreachable!("arrows always carry an occupied state"),
    }
}

/// Substream key for a clock: site in the high bits, then edge slot, then
/// kind code (0 for the death clock).
fn clock_stream_key(site: u32, slot: u32, kind: u64) -> u64 {
    ((site as u64) << 6) | ((slot as u64) << 3) | kind
}

/// One element of the graphical representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// Death mark at a site: the site becomes empty in every process.
    Death { site: u32 },
    /// Arrow from `from` to `to`; if `from` hosts a fertile individual of the
    /// arrow's type and `to` is empty, `to` becomes `offspring`.
    Arrow { from: u32, to: u32, offspring: SiteState },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
}

struct Clock {
    rng: ChaCha8Rng,
    rate: f64,
    kind: EventKind,
}

impl Clock {
    fn next_interarrival(&mut self) -> f64 {
        let e: f64 = Exp1.sample(&mut self.rng);
        e / self.rate
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    time: f64,
    clock: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the earliest event.
        other
            .time
            .total_cmp(&self.time)
            .then(other.clock.cmp(&self.clock))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered iterator over the graphical representation of one run.
///
/// Built from the torus geometry, per-edge arrow rates, a horizon, and a
/// master seed. Identical inputs yield the identical event sequence, and the
/// sequence restricted to any single clock depends only on the master seed
/// and that clock's key.
pub struct EventStream {
    heap: BinaryHeap<HeapEntry>,
    clocks: Vec<Clock>,
    horizon: f64,
}

/// Per-directed-edge arrow rates indexed like [`ARROW_KINDS`].
///
/// For birth rate `lambda_i` and fertile probability `p_i` on a torus of
/// dimension d these are `lambda_i * p_i / 2d` and `lambda_i * q_i / 2d`.
pub type EdgeRates = [f64; 4];

/// Per-edge rates for the given model rates on a 2d-regular torus.
pub fn edge_rates(lambda1: f64, p1: f64, lambda2: f64, p2: f64, degree: usize) -> EdgeRates {
    let d2 = degree as f64;
    [
        lambda1 * p1 / d2,
        lambda1 * (1.0 - p1) / d2,
        lambda2 * p2 / d2,
        lambda2 * (1.0 - p2) / d2,
    ]
}

impl EventStream {
    pub fn new(geometry: &Torus, rates: EdgeRates, horizon: f64, master_seed: u64) -> EventStream {
        let n = geometry.len();
        let degree = geometry.degree();
        let active_kinds = rates.iter().filter(|&&r| r > 0.0).count();
        let mut clocks = Vec::with_capacity(n * (1 + degree * active_kinds));
        for site in 0..n as u32 {
            clocks.push(Clock {
                rng: stream_rng(master_seed, clock_stream_key(site, 0, 0)),
                rate: 1.0,
                kind: EventKind::Death { site },
            });
            for (slot, &to) in geometry.neighbors(site as usize).iter().enumerate() {
                for (kind_idx, &offspring) in ARROW_KINDS.iter().enumerate() {
                    let rate = rates[kind_idx];
                    if rate > 0.0 {
                        let key =
                            clock_stream_key(site, slot as u32, kind_code(offspring));
                        clocks.push(Clock {
                            rng: stream_rng(master_seed, key),
                            rate,
                            kind: EventKind::Arrow { from: site, to, offspring },
                        });
                    }
                }
            }
        }
        let mut heap = BinaryHeap::with_capacity(clocks.len());
        for (idx, clock) in clocks.iter_mut().enumerate() {
            let t = clock.next_interarrival();
            heap.push(HeapEntry { time: t, clock: idx as u32 });
        }
        EventStream { heap, clocks, horizon }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

impl Iterator for EventStream {
    type Item = EventRecord;

    fn next(&mut self) -> Option<EventRecord> {
        let top = self.heap.pop()?;
        if top.time > self.horizon {
            return None;
        }
        let clock = &mut self.clocks[top.clock as usize];
        let record = EventRecord { time: top.time, kind: clock.kind };
        let next_time = top.time + clock.next_interarrival();
        self.heap.push(HeapEntry { time: next_time, clock: top.clock });
        Some(record)
    }
}
