//! Oriented site percolation companions to the block constructions.
//!
//! Two directed graphs appear in the comparison arguments. L1 has sites
//! (m, n) with m in Z^d, n a nonnegative level, and m_1 + ... + m_d + n
//! even; each site points to the 2d sites (m +/- e_i, n+1). L2 has sites
//! Z^d x N with 2d horizontal arrows (m +/- e_i, n) and one vertical arrow
//! (m, n+1), so horizontal moves are reversible and vertical moves are
//! not. The module provides exact successor enumeration, i.i.d. Bernoulli
//! site fields over finite windows, wet-set computation by breadth-first
//! search, exact self-avoiding directed path counts, the union bound for
//! all-closed paths under a k-dependent field, the exact contour
//! constants (too small for binary floating point), the probability that
//! a space-time block carries no sterile arrows, and the cone geometry
//! used by the block comparison.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use std::collections::HashSet;

use crate::stream::{stream_rng, EXPERIMENT_STREAM};
use crate::{Error, Result};

/// Maximum spatial dimension, matching the lattice module.
pub const MAX_DIM: usize = 3;

/// Spatial coordinate; entries at positions >= d are kept at zero.
pub type Coord = [i64; MAX_DIM];

/// One site (m, n) of an oriented graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphSite {
    pub m: Coord,
    pub n: i64,
}

impl GraphSite {
    /// Builds a site from the first `m.len()` coordinates, padding with 0.
    pub fn new(m: &[i64], n: i64) -> GraphSite {
        let mut full = [0i64; MAX_DIM];
        full[..m.len()].copy_from_slice(m);
        GraphSite { m: full, n }
    }
}

/// Which of the two directed graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Even-parity sites, arrows one level up to nearest neighbors.
    L1,
    /// All sites of Z^d x N, reversible horizontal arrows plus one
    /// vertical arrow.
    L2,
}

/// A directed graph in a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub struct OrientedGraph {
    pub kind: GraphKind,
    pub d: usize,
}

impl OrientedGraph {
    pub fn new(kind: GraphKind, d: usize) -> Result<OrientedGraph> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
        }
        Ok(OrientedGraph { kind, d })
    }

    fn parity(&self, s: &GraphSite) -> i64 {
        (s.m[..self.d].iter().sum::<i64>() + s.n).rem_euclid(2)
    }

    /// Site validity: level >= 0, unused coordinates zero, and for L1 the
    /// even-parity constraint.
    pub fn contains(&self, s: &GraphSite) -> bool {
        if s.n < 0 || s.m[self.d..].iter().any(|&c| c != 0) {
            return false;
        }
        match self.kind {
            GraphKind::L1 => self.parity(s) == 0,
            GraphKind::L2 => true,
        }
    }

    /// Exact successor list. L1 sites have 2d successors one level up;
    /// L2 sites have 2d horizontal successors and one vertical successor.
    pub fn arrows(&self, s: &GraphSite) -> Result<Vec<GraphSite>> {
        if !self.contains(s) {
            return Err(Error::invalid(format!(
                "site (m = {:?}, n = {}) is not in the graph",
                &s.m[..self.d],
                s.n
            )));
        }
        let mut out = Vec::with_capacity(2 * self.d + 1);
        for i in 0..self.d {
            for step in [-1i64, 1] {
                let mut m = s.m;
                m[i] += step;
                let n = match self.kind {
                    GraphKind::L1 => s.n + 1,
                    GraphKind::L2 => s.n,
                };
                out.push(GraphSite { m, n });
            }
        }
        if self.kind == GraphKind::L2 {
            out.push(GraphSite { m: s.m, n: s.n + 1 });
        }
        Ok(out)
    }
}

/// A finite box [-radius, radius]^d x [0, height] of graph sites.
#[derive(Debug, Clone, Copy)]
pub struct Window {
    pub d: usize,
    pub radius: i64,
    pub height: i64,
}

impl Window {
    pub fn new(d: usize, radius: i64, height: i64) -> Result<Window> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
        }
        if radius < 0 || height < 0 {
            return Err(Error::invalid("window radius and height must be nonnegative"));
        }
        let side = 2 * radius as u128 + 1;
        let cells = side.pow(d as u32) * (height as u128 + 1);
        if cells > 100_000_000 {
            return Err(Error::invalid(format!("window holds {cells} sites, over the 1e8 budget")));
        }
        Ok(Window { d, radius, height })
    }

    pub fn len(&self) -> usize {
        let side = (2 * self.radius + 1) as usize;
        side.pow(self.d as u32) * (self.height as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: &GraphSite) -> bool {
        (0..self.d).all(|i| s.m[i].abs() <= self.radius)
            && s.m[self.d..].iter().all(|&c| c == 0)
            && (0..=self.height).contains(&s.n)
    }

    /// Row-major index: level outermost, then coordinates from axis 0.
    pub fn index(&self, s: &GraphSite) -> usize {
        debug_assert!(self.contains(s));
        let side = (2 * self.radius + 1) as usize;
        let mut idx = s.n as usize;
        for i in (0..self.d).rev() {
            idx = idx * side + (s.m[i] + self.radius) as usize;
        }
        idx
    }

    /// All sites in index order.
    pub fn sites(&self) -> impl Iterator<Item = GraphSite> + '_ {
        let side = (2 * self.radius + 1) as usize;
        (0..self.len()).map(move |raw| {
            let mut rest = raw;
            let mut m = [0i64; MAX_DIM];
            for item in m.iter_mut().take(self.d) {
                *item = (rest % side) as i64 - self.radius;
                rest /= side;
            }
            GraphSite { m, n: rest as i64 }
        })
    }
}

/// An open/closed assignment over a window.
#[derive(Debug, Clone)]
pub struct SiteField {
    pub window: Window,
    pub eps: f64,
    open: Vec<bool>,
}

impl SiteField {
    /// All-open or all-closed constant field.
    pub fn constant(window: Window, open: bool) -> SiteField {
        SiteField { window, eps: if open { 0.0 } else { 1.0 }, open: vec![open; window.len()] }
    }

    /// Openness by site; sites outside the window read as closed.
    pub fn get(&self, s: &GraphSite) -> Option<bool> {
        if self.window.contains(s) {
            Some(self.open[self.window.index(s)])
        } else {
            None
        }
    }

    pub fn is_open(&self, s: &GraphSite) -> bool {
        self.get(s).unwrap_or(false)
    }

    pub fn set(&mut self, s: &GraphSite, open: bool) {
        let idx = self.window.index(s);
        self.open[idx] = open;
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }
}

/// Samples an i.i.d. field: each site open with probability 1 - eps,
/// drawn in window index order from the experiment stream of `seed`.
pub fn sample_field(window: Window, eps: f64, seed: u64) -> Result<SiteField> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")));
    }
    let mut rng = stream_rng(seed, EXPERIMENT_STREAM);
    let open = (0..window.len()).map(|_| rng.gen::<f64>() >= eps).collect();
    Ok(SiteField { window, eps, open })
}

/// Wet flags in window index order: a site is wet when a directed path of
/// open sites starting at an open level-0 site reaches it. Level-0 open
/// sites are themselves wet.
pub fn wet_set(g: &OrientedGraph, field: &SiteField) -> Vec<bool> {
    let w = &field.window;
    let mut wet = vec![false; w.len()];
    let mut queue = Vec::new();
    for s in w.sites() {
        if s.n == 0 && g.contains(&s) && field.is_open(&s) {
            let idx = w.index(&s);
            if !wet[idx] {
                wet[idx] = true;
                queue.push(s);
            }
        }
    }
    while let Some(s) = queue.pop() {
        for succ in g.arrows(&s).expect("wet sites are valid graph sites") {
            if w.contains(&succ) && g.contains(&succ) && field.is_open(&succ) {
                let idx = w.index(&succ);
                if !wet[idx] {
                    wet[idx] = true;
                    queue.push(succ);
                }
            }
        }
    }
    wet
}

/// Exact number of directed self-avoiding paths with `n` arrows from the
/// origin of L2 in dimension d. Errors beyond the enumeration budget
/// n <= 14. Always at most (2d+1)^n.
pub fn count_self_avoiding_paths(d: usize, n: u64) -> Result<u64> {
    if n > 14 {
        return Err(Error::invalid(format!("path length {n} exceeds the enumeration budget 14")));
    }
    let g = OrientedGraph::new(GraphKind::L2, d)?;
    let origin = GraphSite::new(&[], 0);
    let mut visited = HashSet::new();
    visited.insert(origin);
    fn dfs(
        g: &OrientedGraph,
        site: GraphSite,
        depth: u64,
        visited: &mut HashSet<GraphSite>,
    ) -> u64 {
        if depth == 0 {
            return 1;
        }
        let mut total = 0;
        for succ in g.arrows(&site).expect("enumeration stays on valid sites") {
            if visited.insert(succ) {
                total += dfs(g, succ, depth - 1, visited);
                visited.remove(&succ);
            }
        }
        total
    }
    Ok(dfs(&g, origin, n, &mut visited))
}

/// Union bound for an all-closed directed path of n arrows in L2.
#[derive(Debug, Clone, Copy)]
pub struct ClosedPathTail {
    /// Natural log of the bound; finite even when the bound underflows.
    pub ln_bound: f64,
    /// (2d+1)^n * eps^(n / (2k+1)^(d+1)); 0 when it underflows.
    pub bound: f64,
}

/// The union bound (2d+1)^n * eps^(n / (2k+1)^(d+1)) on the probability
/// that some directed path of n arrows from a fixed site is entirely
/// closed, under a k-dependent field with closed probability eps. Any n
/// path sites pairwise further than k apart are independent, and a path
/// of n arrows contains at least n / (2k+1)^(d+1) such sites.
/// k = 0 is the i.i.d. case; k = 2 matches the block construction, whose
/// eps-threshold (4d+2)^(-5^(d+1)) turns the bound into (1/2)^n.
pub fn closed_path_tail(d: usize, eps: f64, n: u64, dependence_range: u64) -> Result<ClosedPathTail> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")));
    }
    closed_path_tail_ln(d, eps.ln(), n, dependence_range)
}

/// Same bound with eps given by its natural log, for constants that
/// underflow binary floating point.
pub fn closed_path_tail_ln(
    d: usize,
    ln_eps: f64,
    n: u64,
    dependence_range: u64,
) -> Result<ClosedPathTail> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
    }
    if ln_eps > 0.0 {
        return Err(Error::invalid("ln_eps must be <= 0"));
    }
    let packing = ((2 * dependence_range + 1) as f64).powi(d as i32 + 1);
    let ln_bound = n as f64 * ((2 * d + 1) as f64).ln() + (n as f64 / packing) * ln_eps;
    Ok(ClosedPathTail { ln_bound, bound: ln_bound.exp() })
}

/// Monte Carlo estimate of the probability that an i.i.d. field with
/// closed probability eps contains a self-avoiding directed path of n
/// arrows from the L2 origin whose sites, origin included, are all
/// closed. Fields are drawn over the window [-n, n]^d x [0, n], which
/// contains every such path.
pub fn closed_path_probability_mc(
    d: usize,
    eps: f64,
    n: u64,
    fields: u64,
    seed: u64,
) -> Result<f64> {
    let g = OrientedGraph::new(GraphKind::L2, d)?;
    let window = Window::new(d, n as i64, n as i64)?;
    let origin = GraphSite::new(&[], 0);

    fn closed_dfs(
        g: &OrientedGraph,
        field: &SiteField,
        site: GraphSite,
        depth: u64,
        visited: &mut HashSet<GraphSite>,
    ) -> bool {
        if depth == 0 {
            return true;
        }
        for succ in g.arrows(&site).expect("search stays on valid sites") {
            if field.get(&succ) == Some(false) && visited.insert(succ) {
                if closed_dfs(g, field, succ, depth - 1, visited) {
                    visited.remove(&succ);
                    return true;
                }
                visited.remove(&succ);
            }
        }
        false
    }

    let mut hits = 0u64;
    for rep in 0..fields {
        let field = sample_field(window, eps, seed.wrapping_add(rep))?;
        if field.get(&origin) == Some(false) {
            let mut visited = HashSet::new();
            visited.insert(origin);
            if closed_dfs(&g, &field, origin, n, &mut visited) {
                hits += 1;
            }
        }
    }
    Ok(if fields == 0 { 0.0 } else { hits as f64 / fields as f64 })
}

/// The two contour constants, exact.
#[derive(Debug, Clone)]
pub struct ContourConstants {
    /// 6^(-676), from the contour argument over 13 x 13 block windows.
    pub eps1: BigRational,
    /// (4d+2)^(-5^(d+1)), the threshold that turns the path union bound
    /// into (1/2)^n.
    pub eps2: BigRational,
}

/// Exact contour constants for dimension d. Both underflow doubles (the
/// smaller one enormously), so they are returned as exact rationals; use
/// [`eps1_ln`] and [`eps2_ln`] for log-space arithmetic.
pub fn contour_constant(d: usize) -> Result<ContourConstants> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
    }
    let eps1 = BigRational::new(BigInt::one(), BigInt::from(6).pow(676));
    let exponent = 5u32.pow(d as u32 + 1);
    let eps2 = BigRational::new(BigInt::one(), BigInt::from(4 * d as i64 + 2).pow(exponent));
    Ok(ContourConstants { eps1, eps2 })
}

/// ln of 6^(-676).
pub fn eps1_ln() -> f64 {
    -676.0 * 6.0f64.ln()
}

/// ln of (4d+2)^(-5^(d+1)).
pub fn eps2_ln(d: usize) -> f64 {
    -(5.0f64.powi(d as i32 + 1)) * ((4 * d + 2) as f64).ln()
}

/// Sterile-arrow statistics of one space-time block.
#[derive(Debug, Clone, Copy)]
pub struct SterileArrowBlock {
    /// Total arrow rate of the block, lambda (6L+1)^d L^2.
    pub block_rate: f64,
    /// P(no sterile arrow in the block) = exp(-block_rate (1-p)).
    pub no_arrow_probability: f64,
    /// 1 + ln(1 - eps1/2) / block_rate; indistinguishable from 1 in
    /// binary floating point.
    pub p_plus: f64,
    /// ln(1 - p_plus), the honest log-space version of the threshold gap.
    pub p_plus_gap_ln: f64,
}

/// Probability that the space-time block of (6L+1)^d sites over a time
/// span L^2 carries no sterile arrow, together with the fertility
/// threshold p+ above which that probability exceeds 1 - eps1/2.
pub fn sterile_arrow_probability(
    lambda: f64,
    p: f64,
    big_l: i64,
    d: usize,
) -> Result<SterileArrowBlock> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [0, 1], got {p}")));
    }
    if big_l < 1 {
        return Err(Error::invalid("the block scale L must be at least 1"));
    }
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
    }
    let sites = ((6 * big_l + 1) as f64).powi(d as i32);
    let block_rate = lambda * sites * (big_l * big_l) as f64;
    // ln(1 - eps1/2) = -eps1/2 up to a relative error of order eps1,
    // far below double precision, so the gap is exact in log space.
    let p_plus_gap_ln = eps1_ln() - std::f64::consts::LN_2 - block_rate.ln();
    Ok(SterileArrowBlock {
        block_rate,
        no_arrow_probability: (-block_rate * (1.0 - p)).exp(),
        p_plus: 1.0 - p_plus_gap_ln.exp(),
        p_plus_gap_ln,
    })
}

/// Monte Carlo over blocks: sterile arrivals per directed edge by
/// exponential interarrivals, aggregated over the block.
#[derive(Debug, Clone, Copy)]
pub struct BlockArrowMc {
    /// Fraction of blocks with zero sterile arrows.
    pub zero_fraction: f64,
    /// Mean sterile-arrow count per block.
    pub mean_count: f64,
}

/// Samples `blocks` independent blocks and counts sterile arrows the way
/// the simulator generates them: each of the 2d out-edges of each of the
/// (6L+1)^d sites fires at rate lambda (1-p) / 2d over a time span L^2.
pub fn sample_block_sterile_arrows(
    lambda: f64,
    p: f64,
    big_l: i64,
    d: usize,
    blocks: u64,
    seed: u64,
) -> Result<BlockArrowMc> {
    sterile_arrow_probability(lambda, p, big_l, d)?;
    let sites = ((6 * big_l + 1) as u64).pow(d as u32);
    let edges = sites * 2 * d as u64;
    let rate = lambda * (1.0 - p) / (2 * d) as f64;
    let span = (big_l * big_l) as f64;
    let mut rng = stream_rng(seed, EXPERIMENT_STREAM);
    let mut zero_blocks = 0u64;
    let mut total_arrows = 0u64;
    for _ in 0..blocks {
        let mut count = 0u64;
        if rate > 0.0 {
            for _ in 0..edges {
                let mut t: f64 = 0.0;
                loop {
                    let gap: f64 = Exp1.sample(&mut rng);
                    t += gap / rate;
                    if t >= span {
                        break;
                    }
                    count += 1;
                }
            }
        }
        if count == 0 {
            zero_blocks += 1;
        }
        total_arrows += count;
    }
    if blocks == 0 {
        return Ok(BlockArrowMc { zero_fraction: 0.0, mean_count: 0.0 });
    }
    Ok(BlockArrowMc {
        zero_fraction: zero_blocks as f64 / blocks as f64,
        mean_count: total_arrows as f64 / blocks as f64,
    })
}

fn check_dim(d: usize, z: &[i64]) -> Result<()> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1, 2, or 3, got {d}")));
    }
    if z.len() != d {
        return Err(Error::invalid(format!("expected {d} coordinates, got {}", z.len())));
    }
    Ok(())
}

/// Membership of the L1 site (m, n) in the discrete cone with apex
/// (2z, 0): level n >= 0, even parity, and m in 2z + [-n, n]^d.
pub fn nabla_z1_contains(d: usize, z: &[i64], m: &[i64], n: i64) -> Result<bool> {
    check_dim(d, z)?;
    if m.len() != d {
        return Err(Error::invalid(format!("expected {d} coordinates, got {}", m.len())));
    }
    if n < 0 {
        return Ok(false);
    }
    let parity = (m.iter().sum::<i64>() + n).rem_euclid(2);
    Ok(parity == 0 && m.iter().zip(z).all(|(&mi, &zi)| (mi - 2 * zi).abs() <= n))
}

/// Membership of the space-time point (x, t) in the block thickening of
/// the cone: the union over cone sites (m, n) of the blocks
/// (mL, nL^2) + [-3L, 3L]^d x [0, L^2].
pub fn nabla_z_contains(d: usize, z: &[i64], big_l: i64, x: &[f64], t: f64) -> Result<bool> {
    check_dim(d, z)?;
    if x.len() != d {
        return Err(Error::invalid(format!("expected {d} coordinates, got {}", x.len())));
    }
    if big_l < 1 {
        return Err(Error::invalid("the block scale L must be at least 1"));
    }
    if t < 0.0 || !t.is_finite() || x.iter().any(|xi| !xi.is_finite()) {
        return Ok(false);
    }
    let l = big_l as f64;
    let l2 = l * l;
    let n_hi = (t / l2).floor() as i64;
    for n in [n_hi - 1, n_hi] {
        if n < 0 || !(n as f64 * l2 <= t && t <= (n + 1) as f64 * l2) {
            continue;
        }
        // Per-axis candidates: integers m_i with |x_i - m_i L| <= 3L and
        // |m_i - 2 z_i| <= n. Any combination with even total parity
        // (including the level) witnesses membership.
        let mut per_axis: Vec<Vec<i64>> = Vec::with_capacity(d);
        let mut feasible = true;
        for i in 0..d {
            let lo = (((x[i] - 3.0 * l) / l).ceil() as i64).max(2 * z[i] - n);
            let hi = (((x[i] + 3.0 * l) / l).floor() as i64).min(2 * z[i] + n);
            if lo > hi {
                feasible = false;
                break;
            }
            per_axis.push((lo..=hi).collect());
        }
        if !feasible {
            continue;
        }
        // A combination of the right total parity exists when some axis
        // offers both parities, or when the forced parities already sum
        // to the level's parity.
        let need = n.rem_euclid(2);
        let mut forced_sum = 0i64;
        let mut free_axis = false;
        for cands in &per_axis {
            let has_even = cands.iter().any(|c| c.rem_euclid(2) == 0);
            let has_odd = cands.iter().any(|c| c.rem_euclid(2) == 1);
            if has_even && has_odd {
                free_axis = true;
            } else {
                forced_sum += cands[0].rem_euclid(2);
            }
        }
        if free_axis || forced_sum.rem_euclid(2) == need {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Membership of the L2 site (m, n) in the scaled cone: (mL, nL) must lie
/// in the block thickening.
pub fn nabla_z2_contains(d: usize, z: &[i64], big_l: i64, m: &[i64], n: i64) -> Result<bool> {
    if m.len() != d {
        return Err(Error::invalid(format!("expected {d} coordinates, got {}", m.len())));
    }
    if n < 0 {
        return Ok(false);
    }
    let x: Vec<f64> = m.iter().map(|&mi| (mi * big_l) as f64).collect();
    nabla_z_contains(d, z, big_l, &x, (n * big_l) as f64)
}
