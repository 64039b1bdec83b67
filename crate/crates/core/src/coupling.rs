//! Pathwise coupling of the single-type sterile process with a basic
//! contact process.
//!
//! Both processes read the same event stream. The sterile process xi uses
//! the full single-type semantics (fertile arrows, sterile arrows, deaths);
//! the companion contact process eta applies only the fertile arrows and
//! the deaths and ignores sterile arrows, which realizes a basic contact
//! process at birth rate lambda * p. Started from an admissible
//! configuration, every site's pair (xi(x), eta(x)) stays in the closed
//! set S = {-0, -+, 00, 0+, ++}: the one excluded pair is (+, 0), so a
//! site fertile in xi is always occupied in eta. In particular the fertile
//! population of xi dies with eta.

use crate::lattice::{SiteState, Torus, TypeLabel};
use crate::sim::apply_event;
use crate::stream::{edge_rates, EventKind, EventStream};
use crate::{Error, Result};

/// Single-type state of the sterile process at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiState {
    Empty,
    Fertile,
    Sterile,
}

/// State of the companion contact process at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaState {
    Empty,
    Occupied,
}

/// The pair (xi(x), eta(x)) at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairState {
    pub xi: XiState,
    pub eta: EtaState,
}

impl PairState {
    pub const fn new(xi: XiState, eta: EtaState) -> PairState {
        PairState { xi, eta }
    }

    /// Membership in S: every pair except (fertile, empty) is admissible.
    pub fn is_admissible(&self) -> bool {
        !(self.xi == XiState::Fertile && self.eta == EtaState::Empty)
    }

    /// The five admissible pairs in the fixed order -0, -+, 00, 0+, ++.
    pub fn all_admissible() -> [PairState; 5] {
        [
            PairState::new(XiState::Sterile, EtaState::Empty),
            PairState::new(XiState::Sterile, EtaState::Occupied),
            PairState::new(XiState::Empty, EtaState::Empty),
            PairState::new(XiState::Empty, EtaState::Occupied),
            PairState::new(XiState::Fertile, EtaState::Occupied),
        ]
    }

    /// Two-character label, xi then eta: one of -0, -+, 00, 0+, ++, +0.
    pub fn label(&self) -> &'static str {
        match (self.xi, self.eta) {
            (XiState::Sterile, EtaState::Empty) => "-0",
            (XiState::Sterile, EtaState::Occupied) => "-+",
            (XiState::Empty, EtaState::Empty) => "00",
            (XiState::Empty, EtaState::Occupied) => "0+",
            (XiState::Fertile, EtaState::Occupied) => "++",
            (XiState::Fertile, EtaState::Empty) => "+0",
        }
    }
}

/// The three event kinds acting on a directed edge (tail, head) or on the
/// head site alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoupledEventKind {
    /// Fertile arrow tail -> head: births in both processes.
    FertileArrow,
    /// Sterile arrow tail -> head: birth in xi only; eta ignores it.
    SterileArrow,
    /// Death mark at the head: clears both processes there.
    DeathAtHead,
}

impl CoupledEventKind {
    pub const ALL: [CoupledEventKind; 3] = [
        CoupledEventKind::FertileArrow,
        CoupledEventKind::SterileArrow,
        CoupledEventKind::DeathAtHead,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CoupledEventKind::FertileArrow => "fertile-arrow",
            CoupledEventKind::SterileArrow => "sterile-arrow",
            CoupledEventKind::DeathAtHead => "death-at-head",
        }
    }
}

/// Pure transition table: the head pair after one event, given the tail
/// pair. Arrows act only when the relevant tail component can give birth
/// and the head component is empty; deaths clear both components.
pub fn step_pair(tail: PairState, head: PairState, ev: CoupledEventKind) -> PairState {
    match ev {
        CoupledEventKind::FertileArrow => {
            let xi = if tail.xi == XiState::Fertile && head.xi == XiState::Empty {
                XiState::Fertile
            } else {
                head.xi
            };
            let eta = if tail.eta == EtaState::Occupied && head.eta == EtaState::Empty {
                EtaState::Occupied
            } else {
                head.eta
            };
            PairState::new(xi, eta)
        }
        CoupledEventKind::SterileArrow => {
            let xi = if tail.xi == XiState::Fertile && head.xi == XiState::Empty {
                XiState::Sterile
            } else {
                head.xi
            };
            PairState::new(xi, head.eta)
        }
        CoupledEventKind::DeathAtHead => PairState::new(XiState::Empty, EtaState::Empty),
    }
}

/// One row of the exhaustive closure check.
#[derive(Debug, Clone, Copy)]
pub struct ClosureCase {
    pub event: CoupledEventKind,
    pub tail: PairState,
    pub head: PairState,
    pub result: PairState,
    pub admissible: bool,
}

/// Enumerates all 5 x 5 ordered pairs of admissible states at (tail, head)
/// under all three event kinds: 75 cases. Every result must stay in S.
pub fn verify_table_closure() -> Vec<ClosureCase> {
    let mut cases = Vec::with_capacity(75);
    for ev in CoupledEventKind::ALL {
        for tail in PairState::all_admissible() {
            for head in PairState::all_admissible() {
                let result = step_pair(tail, head, ev);
                cases.push(ClosureCase {
                    event: ev,
                    tail,
                    head,
                    result,
                    admissible: result.is_admissible(),
                });
            }
        }
    }
    cases
}

/// Renders closure cases as CSV with one row per case.
pub fn closure_table_csv(cases: &[ClosureCase]) -> String {
    let mut out = String::from("event,tail,head,result,admissible\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.event.label(),
            c.tail.label(),
            c.head.label(),
            c.result.label(),
            c.admissible
        ));
    }
    out
}

fn xi_of(s: SiteState) -> Result<XiState> {
    match s {
        SiteState::Empty => Ok(XiState::Empty),
        SiteState::Fertile1 => Ok(XiState::Fertile),
        SiteState::Sterile1 => Ok(XiState::Sterile),
        _ => Err(Error::invalid("the coupling is single-type: no type-2 states allowed")),
    }
}

fn eta_of(s: SiteState) -> Result<EtaState> {
    match s {
        SiteState::Empty => Ok(EtaState::Empty),
        SiteState::Fertile1 => Ok(EtaState::Occupied),
        _ => Err(Error::invalid("the companion process uses only empty and fertile-1 states")),
    }
}

/// Outcome of a coupled run: paired occupancy series and extinction data.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub times: Vec<f64>,
    /// Fertile count of the sterile process at each sample time.
    pub xi_fertile: Vec<usize>,
    /// Occupied count (fertile plus sterile) of the sterile process.
    pub xi_occupied: Vec<usize>,
    /// Occupied count of the companion contact process.
    pub eta_occupied: Vec<usize>,
    /// Stream events processed, including those that changed nothing.
    pub events_processed: u64,
    /// Per-event admissibility checks performed.
    pub checks: u64,
    /// First time eta's population hit zero.
    pub eta_extinction: Option<f64>,
    /// First time xi's fertile population hit zero.
    pub xi_fertile_extinction: Option<f64>,
    pub final_xi: Torus,
    pub final_eta: Torus,
}

/// Runs the coupled pair (xi, eta) from admissible initial configurations
/// on a shared event stream until the horizon or until `max_events` stream
/// events have been processed, whichever comes first.
///
/// The admissible-pair invariant is checked at the affected site after
/// every event; a violation is a hard error carrying the event dump. With
/// the construction above none can occur.
pub fn run_coupled(
    lambda: f64,
    p: f64,
    init_xi: &Torus,
    init_eta: &Torus,
    horizon: f64,
    seed: u64,
    sample_interval: f64,
    max_events: Option<u64>,
) -> Result<CoupledRun> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p must lie in [0, 1]"));
    }
    if init_xi.sides() != init_eta.sides() {
        return Err(Error::invalid("the two initial configurations must share a geometry"));
    }
    if !(sample_interval > 0.0) {
        return Err(Error::invalid("sample_interval must be positive"));
    }
    let mut xi = init_xi.clone();
    let mut eta = init_eta.clone();
    for site in 0..xi.len() {
        let pair = PairState::new(xi_of(xi.get(site))?, eta_of(eta.get(site))?);
        if !pair.is_admissible() {
            return Err(Error::invalid(format!(
                "initial pair at site {site} is {}, outside S",
                pair.label()
            )));
        }
    }

    let rates = edge_rates(lambda, p, 0.0, 0.0, xi.degree());
    let stream = EventStream::new(&xi, rates, horizon, seed);
    let cap = max_events.unwrap_or(u64::MAX);

    let mut run = CoupledRun {
        times: Vec::new(),
        xi_fertile: Vec::new(),
        xi_occupied: Vec::new(),
        eta_occupied: Vec::new(),
        events_processed: 0,
        checks: 0,
        eta_extinction: None,
        xi_fertile_extinction: None,
        final_xi: xi.clone(),
        final_eta: eta.clone(),
    };
    let mut xi_fertile = xi.occupancy().fertile(TypeLabel::One);
    let mut xi_occupied = xi.occupancy().occupied();
    let mut eta_occupied = eta.occupancy().occupied();
    let mut next_index: u64 = 0;
    let mut last_time = 0.0_f64;

    // Same convention as the plain runner: every pending sample with time
    // <= t is emitted before the event at t is applied, so each sample
    // reflects the state just before its own timestamp.
    macro_rules! emit_through {
        ($t:expr) => {
            while next_index as f64 * sample_interval <= ($t as f64).min(horizon) {
                run.times.push(next_index as f64 * sample_interval);
                run.xi_fertile.push(xi_fertile);
                run.xi_occupied.push(xi_occupied);
                run.eta_occupied.push(eta_occupied);
                next_index += 1;
            }
        };
    }
    emit_through!(0.0);

    for ev in stream {
        if run.events_processed >= cap {
            break;
        }
        emit_through!(ev.time);
        run.events_processed += 1;
        last_time = ev.time;

        if let Some((_, old, new)) = apply_event(&mut xi, &ev.kind) {
            match old {
                SiteState::Fertile1 => xi_fertile -= 1,
                SiteState::Empty => xi_occupied += 1,
                _ => {}
            }
            match new {
                SiteState::Fertile1 => xi_fertile += 1,
                SiteState::Empty => xi_occupied -= 1,
                _ => {}
            }
        }
        let site = match ev.kind {
            EventKind::Death { site } => {
                if eta.get(site as usize).is_occupied() {
                    eta.set(site as usize, SiteState::Empty);
                    eta_occupied -= 1;
                }
                site
            }
            EventKind::Arrow { from, to, offspring } => {
                if offspring == SiteState::Fertile1
                    && eta.get(from as usize).is_occupied()
                    && eta.get(to as usize) == SiteState::Empty
                {
                    eta.set(to as usize, SiteState::Fertile1);
                    eta_occupied += 1;
                }
                to
            }
        };

        run.checks += 1;
        let pair = PairState::new(xi_of(xi.get(site as usize))?, eta_of(eta.get(site as usize))?);
        if !pair.is_admissible() {
            return Err(Error::violation(format!(
                "pair {} outside S at site {site} after event {} at t = {:.6}: {:?}",
                pair.label(),
                run.events_processed,
                ev.time,
                ev.kind
            )));
        }

        if run.eta_extinction.is_none() && eta_occupied == 0 {
            run.eta_extinction = Some(ev.time);
        }
        if run.xi_fertile_extinction.is_none() && xi_fertile == 0 {
            run.xi_fertile_extinction = Some(ev.time);
        }
    }

    if horizon.is_finite() {
        emit_through!(horizon);
        if run.times.last().map(|&t| t < horizon).unwrap_or(true) {
            run.times.push(horizon);
            run.xi_fertile.push(xi_fertile);
            run.xi_occupied.push(xi_occupied);
            run.eta_occupied.push(eta_occupied);
        }
    } else if run.times.last() != Some(&last_time) {
        run.times.push(last_time);
        run.xi_fertile.push(xi_fertile);
        run.xi_occupied.push(xi_occupied);
        run.eta_occupied.push(eta_occupied);
    }

    run.final_xi = xi;
    run.final_eta = eta;
    Ok(run)
}
