//! Site states, torus geometry, occupancy summaries, and initial-condition
//! literals.
//!
//! Sites live on a d-dimensional torus (d = 1, 2, or 3) with per-axis side
//! lengths. Each site holds one of five states: empty, fertile or sterile of
//! type 1, fertile or sterile of type 2. Neighborhoods are the 2d nearest
//! neighbors with periodic wrap, enumerated in a fixed order (axis 0 minus,
//! axis 0 plus, axis 1 minus, ...) that the event stream relies on.

use crate::{Error, Result};
use rand::Rng;

/// One of the five site states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SiteState {
    Empty = 0,
    Fertile1 = 1,
    Sterile1 = 2,
    Fertile2 = 3,
    Sterile2 = 4,
}

/// Particle type label, independent of fertility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeLabel {
    One,
    Two,
}

impl TypeLabel {
    /// 0 for type 1, 1 for type 2; used to index per-type arrays.
    pub fn index(self) -> usize {
        match self {
            TypeLabel::One => 0,
            TypeLabel::Two => 1,
        }
    }

    pub fn fertile(self) -> SiteState {
        match self {
            TypeLabel::One => SiteState::Fertile1,
            TypeLabel::Two => SiteState::Fertile2,
        }
    }

    pub fn sterile(self) -> SiteState {
        match self {
            TypeLabel::One => SiteState::Sterile1,
            TypeLabel::Two => SiteState::Sterile2,
        }
    }
}

impl SiteState {
    pub const ALL: [SiteState; 5] = [
        SiteState::Empty,
        SiteState::Fertile1,
        SiteState::Sterile1,
        SiteState::Fertile2,
        SiteState::Sterile2,
    ];

    pub fn is_occupied(self) -> bool {
        self != SiteState::Empty
    }

    pub fn is_fertile(self) -> bool {
        matches!(self, SiteState::Fertile1 | SiteState::Fertile2)
    }

    pub fn type_label(self) -> Option<TypeLabel> {
        match self {
            SiteState::Empty => None,
            SiteState::Fertile1 | SiteState::Sterile1 => Some(TypeLabel::One),
            SiteState::Fertile2 | SiteState::Sterile2 => Some(TypeLabel::Two),
        }
    }

    /// Text token used by initial-condition literals: 0, +1, -1, +2, -2.
    pub fn token(self) -> &'static str {
        match self {
            SiteState::Empty => "0",
            SiteState::Fertile1 => "+1",
            SiteState::Sterile1 => "-1",
            SiteState::Fertile2 => "+2",
            SiteState::Sterile2 => "-2",
        }
    }

    pub fn parse_token(tok: &str) -> Result<SiteState> {
        match tok {
            "0" => Ok(SiteState::Empty),
            "+1" => Ok(SiteState::Fertile1),
            "-1" => Ok(SiteState::Sterile1),
            "+2" => Ok(SiteState::Fertile2),
            "-2" => Ok(SiteState::Sterile2),
            other => Err(Error::invalid(format!("unknown site state token {other:?}"))),
        }
    }

    /// Single-character encoding used by packed trajectory records:
    /// '.' empty, 'A'/'a' fertile/sterile type 1, 'B'/'b' type 2.
    pub fn to_char(self) -> char {
        match self {
            SiteState::Empty => '.',
            SiteState::Fertile1 => 'A',
            SiteState::Sterile1 => 'a',
            SiteState::Fertile2 => 'B',
            SiteState::Sterile2 => 'b',
        }
    }

    pub fn from_char(c: char) -> Result<SiteState> {
        match c {
            '.' => Ok(SiteState::Empty),
            'A' => Ok(SiteState::Fertile1),
            'a' => Ok(SiteState::Sterile1),
            'B' => Ok(SiteState::Fertile2),
            'b' => Ok(SiteState::Sterile2),
            other => Err(Error::invalid(format!("unknown packed state char {other:?}"))),
        }
    }
}

/// Counts of sites in each state; always sums to the number of sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct Occupancy {
    pub empty: usize,
    pub fertile1: usize,
    pub sterile1: usize,
    pub fertile2: usize,
    pub sterile2: usize,
}

impl Occupancy {
    pub fn total(&self) -> usize {
        self.empty + self.fertile1 + self.sterile1 + self.fertile2 + self.sterile2
    }

    pub fn occupied(&self) -> usize {
        self.total() - self.empty
    }

    pub fn fertile(&self, t: TypeLabel) -> usize {
        match t {
            TypeLabel::One => self.fertile1,
            TypeLabel::Two => self.fertile2,
        }
    }

    /// All individuals of the given type, fertile or sterile.
    pub fn type_total(&self, t: TypeLabel) -> usize {
        match t {
            TypeLabel::One => self.fertile1 + self.sterile1,
            TypeLabel::Two => self.fertile2 + self.sterile2,
        }
    }
}

/// A configuration on a d-dimensional torus.
///
/// The neighbor table is precomputed at construction: `neighbors(x)` returns
/// a slice of 2d site indices in the fixed order axis 0 minus, axis 0 plus,
/// axis 1 minus, and so on. Cloning a torus shares the neighbor table.
#[derive(Debug, Clone)]
pub struct Torus {
    sides: Vec<usize>,
    cells: Vec<SiteState>,
    nbr: std::sync::Arc<Vec<u32>>,
}

impl Torus {
    /// Build a torus with every site in the given state.
    ///
    /// Requires 1 <= d <= 3 and every side >= 3 (smaller sides would make the
    /// wrapped nearest-neighbor multiset degenerate).
    pub fn new(sides: &[usize], fill: SiteState) -> Result<Torus> {
        if sides.is_empty() || sides.len() > 3 {
            return Err(Error::invalid(format!(
                "dimension must be 1, 2, or 3 (got {})",
                sides.len()
            )));
        }
        if let Some(&s) = sides.iter().find(|&&s| s < 3) {
            return Err(Error::invalid(format!("every side must be >= 3 (got {s})")));
        }
        let n: usize = sides.iter().product();
        if n > u32::MAX as usize {
            return Err(Error::invalid("torus too large for u32 site indices"));
        }
        let d = sides.len();
        let mut nbr = vec![0u32; n * 2 * d];
        let mut coords = vec![0usize; d];
        for site in 0..n {
            Self::coords_of_raw(sides, site, &mut coords);
            for axis in 0..d {
                let side = sides[axis];
                let orig = coords[axis];
                coords[axis] = (orig + side - 1) % side;
                nbr[site * 2 * d + 2 * axis] = Self::site_of_raw(sides, &coords) as u32;
                coords[axis] = (orig + 1) % side;
                nbr[site * 2 * d + 2 * axis + 1] = Self::site_of_raw(sides, &coords) as u32;
                coords[axis] = orig;
            }
        }
        Ok(Torus {
            sides: sides.to_vec(),
            cells: vec![fill; n],
            nbr: std::sync::Arc::new(nbr),
        })
    }

    pub fn dimension(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Number of nearest neighbors, 2d.
    pub fn degree(&self) -> usize {
        2 * self.sides.len()
    }

    pub fn get(&self, site: usize) -> SiteState {
        self.cells[site]
    }

    pub fn set(&mut self, site: usize, s: SiteState) {
        self.cells[site] = s;
    }

    pub fn cells(&self) -> &[SiteState] {
        &self.cells
    }

    /// The 2d neighbors of a site, in axis order (minus then plus per axis).
    pub fn neighbors(&self, site: usize) -> &[u32] {
        let d2 = self.degree();
        &self.nbr[site * d2..(site + 1) * d2]
    }

    fn coords_of_raw(sides: &[usize], site: usize, out: &mut [usize]) {
        let mut rem = site;
        for axis in (0..sides.len()).rev() {
            out[axis] = rem % sides[axis];
            rem /= sides[axis];
        }
    }

    fn site_of_raw(sides: &[usize], coords: &[usize]) -> usize {
        let mut site = 0usize;
        for axis in 0..sides.len() {
            site = site * sides[axis] + coords[axis];
        }
        site
    }

    /// Coordinates of a site index, row-major with axis 0 slowest.
    pub fn coords_of(&self, site: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.sides.len()];
        Self::coords_of_raw(&self.sides, site, &mut out);
        out
    }

    pub fn site_of(&self, coords: &[usize]) -> usize {
        Self::site_of_raw(&self.sides, coords)
    }

    /// Site at the middle of every axis (side/2 per coordinate).
    pub fn center(&self) -> usize {
        let coords: Vec<usize> = self.sides.iter().map(|s| s / 2).collect();
        self.site_of(&coords)
    }

    /// Signed displacement of a site from the center, per axis, using the
    /// representative of smallest absolute value on each ring.
    pub fn offset_from_center(&self, site: usize) -> Vec<i64> {
        let coords = self.coords_of(site);
        self.sides
            .iter()
            .zip(coords)
            .map(|(&side, c)| {
                let mut delta = c as i64 - (side / 2) as i64;
                let s = side as i64;
                if delta > s / 2 {
                    delta -= s;
                }
                if delta < -(s / 2) {
                    delta += s;
                }
                delta
            })
            .collect()
    }

    /// Fraction of the 2d neighbors of `site` hosting a fertile individual of
    /// the given type.
    pub fn fertile_fraction(&self, site: usize, t: TypeLabel) -> f64 {
        let want = t.fertile();
        let hits = self
            .neighbors(site)
            .iter()
            .filter(|&&y| self.cells[y as usize] == want)
            .count();
        hits as f64 / self.degree() as f64
    }

    pub fn occupancy(&self) -> Occupancy {
        let mut occ = Occupancy::default();
        for &c in &self.cells {
            match c {
                SiteState::Empty => occ.empty += 1,
                SiteState::Fertile1 => occ.fertile1 += 1,
                SiteState::Sterile1 => occ.sterile1 += 1,
                SiteState::Fertile2 => occ.fertile2 += 1,
                SiteState::Sterile2 => occ.sterile2 += 1,
            }
        }
        occ
    }

    /// One character per site, row-major; see [`SiteState::to_char`].
    pub fn packed(&self) -> String {
        self.cells.iter().map(|c| c.to_char()).collect()
    }
}

/// An initial-condition literal: either a named preset or explicit site runs.
///
/// Text form, one spec per parse:
/// - `all-empty`
/// - `single-fertile-1@center`
/// - `product(p+1,p-1,p+2,p-2)` with nonnegative probabilities summing to
///   at most 1; the remaining mass is empty
/// - one `state*count` run per line (states 0, +1, -1, +2, -2), filling the
///   torus row-major; counts must sum to the number of sites
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    AllEmpty,
    SingleFertile1AtCenter,
    Product([f64; 4]),
    Runs(Vec<(SiteState, usize)>),
}

impl InitSpec {
    pub fn parse(text: &str) -> Result<InitSpec> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if lines.is_empty() {
            return Err(Error::invalid("empty initial-condition spec"));
        }
        if lines.len() == 1 {
            let line = lines[0];
            if line == "all-empty" {
                return Ok(InitSpec::AllEmpty);
            }
            if line == "single-fertile-1@center" {
                return Ok(InitSpec::SingleFertile1AtCenter);
            }
            if let Some(rest) = line.strip_prefix("product(") {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::invalid("product(...) missing closing parenthesis"))?;
                let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(Error::invalid(format!(
                        "product(...) needs 4 probabilities, got {}",
                        parts.len()
                    )));
                }
                let mut probs = [0.0f64; 4];
                for (slot, part) in probs.iter_mut().zip(&parts) {
                    *slot = part
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad probability {part:?}: {e}")))?;
                }
                if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::invalid("product probabilities must lie in [0,1]"));
                }
                let sum: f64 = probs.iter().sum();
                if sum > 1.0 + 1e-12 {
                    return Err(Error::invalid(format!(
                        "product probabilities sum to {sum}, must be <= 1"
                    )));
                }
                return Ok(InitSpec::Product(probs));
            }
        }
        let mut runs = Vec::with_capacity(lines.len());
        for line in lines {
            let (tok, count) = line
                .split_once('*')
                .ok_or_else(|| Error::invalid(format!("bad run line {line:?}, want state*count")))?;
            let state = SiteState::parse_token(tok.trim())?;
            let count: usize = count
                .trim()
                .parse()
                .map_err(|e| Error::invalid(format!("bad run count in {line:?}: {e}")))?;
            runs.push((state, count));
        }
        Ok(InitSpec::Runs(runs))
    }

    /// Render back to the literal text form.
    pub fn render(&self) -> String {
        match self {
            InitSpec::AllEmpty => "all-empty".to_string(),
            InitSpec::SingleFertile1AtCenter => "single-fertile-1@center".to_string(),
            InitSpec::Product(p) => format!("product({},{},{},{})", p[0], p[1], p[2], p[3]),
            InitSpec::Runs(runs) => runs
                .iter()
                .map(|(s, n)| format!("{}*{}", s.token(), n))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }

    /// Realize this initial condition on a torus with the given sides.
    ///
    /// Only `Product` consumes randomness (one draw per site from `rng`);
    /// the other variants are deterministic.
    pub fn materialize(&self, sides: &[usize], rng: &mut impl Rng) -> Result<Torus> {
        let mut torus = Torus::new(sides, SiteState::Empty)?;
        match self {
            InitSpec::AllEmpty => {}
            InitSpec::SingleFertile1AtCenter => {
                let c = torus.center();
                torus.set(c, SiteState::Fertile1);
            }
            InitSpec::Product(probs) => {
                let states = [
                    SiteState::Fertile1,
                    SiteState::Sterile1,
                    SiteState::Fertile2,
                    SiteState::Sterile2,
                ];
                for site in 0..torus.len() {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    for (p, s) in probs.iter().zip(states) {
                        acc += p;
                        if u < acc {
                            torus.set(site, s);
                            break;
                        }
                    }
                }
            }
            InitSpec::Runs(runs) => {
                let total: usize = runs.iter().map(|(_, n)| n).sum();
                if total != torus.len() {
                    return Err(Error::invalid(format!(
                        "run counts sum to {total} but the torus has {} sites",
                        torus.len()
                    )));
                }
                let mut site = 0;
                for &(state, count) in runs {
                    for _ in 0..count {
                        torus.set(site, state);
                        site += 1;
                    }
                }
            }
        }
        Ok(torus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ring_neighbors_wrap() {
        let t = Torus::new(&[10], SiteState::Empty).unwrap();
        assert_eq!(t.neighbors(0), &[9, 1]);
        assert_eq!(t.neighbors(9), &[8, 0]);
        assert_eq!(t.degree(), 2);
    }

    #[test]
    fn square_neighbors_wrap() {
        let t = Torus::new(&[4, 4], SiteState::Empty).unwrap();
        // site (0,0) = index 0; neighbors in axis order: (3,0), (1,0), (0,3), (0,1)
        assert_eq!(t.neighbors(0), &[12, 4, 3, 1]);
        assert_eq!(t.degree(), 4);
    }

    #[test]
    fn neighbor_relation_symmetric_and_regular() {
        for sides in [vec![7], vec![5, 4], vec![3, 4, 5]] {
            let t = Torus::new(&sides, SiteState::Empty).unwrap();
            let d2 = t.degree();
            for x in 0..t.len() {
                assert_eq!(t.neighbors(x).len(), d2);
                for &y in t.neighbors(x) {
                    let back = t
                        .neighbors(y as usize)
                        .iter()
                        .filter(|&&z| z as usize == x)
                        .count();
                    assert!(back >= 1, "edge {x}->{y} has no reverse");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Torus::new(&[], SiteState::Empty).is_err());
        assert!(Torus::new(&[3, 3, 3, 3], SiteState::Empty).is_err());
        assert!(Torus::new(&[2], SiteState::Empty).is_err());
    }

    #[test]
    fn fertile_fraction_extremes() {
        let all = Torus::new(&[6], SiteState::Fertile1).unwrap();
        assert_eq!(all.fertile_fraction(2, TypeLabel::One), 1.0);
        assert_eq!(all.fertile_fraction(2, TypeLabel::Two), 0.0);
        let none = Torus::new(&[6], SiteState::Empty).unwrap();
        assert_eq!(none.fertile_fraction(2, TypeLabel::One), 0.0);
    }

    #[test]
    fn fertile_fraction_counts_only_fertile() {
        let mut t = Torus::new(&[5], SiteState::Empty).unwrap();
        t.set(1, SiteState::Fertile2);
        t.set(3, SiteState::Sterile2);
        assert_eq!(t.fertile_fraction(2, TypeLabel::Two), 0.5);
    }

    #[test]
    fn occupancy_sums_to_site_count() {
        let mut t = Torus::new(&[4, 4], SiteState::Empty).unwrap();
        t.set(0, SiteState::Fertile1);
        t.set(1, SiteState::Sterile1);
        t.set(2, SiteState::Fertile2);
        t.set(3, SiteState::Sterile2);
        let occ = t.occupancy();
        assert_eq!(occ.total(), 16);
        assert_eq!(occ.occupied(), 4);
        assert_eq!(occ.fertile(TypeLabel::One), 1);
        assert_eq!(occ.type_total(TypeLabel::Two), 2);
    }

    #[test]
    fn parse_presets_round_trip() {
        for text in ["all-empty", "single-fertile-1@center", "product(0.2,0.1,0.05,0)"] {
            let spec = InitSpec::parse(text).unwrap();
            let again = InitSpec::parse(&spec.render()).unwrap();
            assert_eq!(spec, again);
        }
    }

    #[test]
    fn parse_runs_and_materialize() {
        let spec = InitSpec::parse("0*3\n+1*2\n-2*5").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = spec.materialize(&[10], &mut rng).unwrap();
        assert_eq!(t.get(0), SiteState::Empty);
        assert_eq!(t.get(3), SiteState::Fertile1);
        assert_eq!(t.get(4), SiteState::Fertile1);
        assert_eq!(t.get(5), SiteState::Sterile2);
        assert_eq!(t.occupancy().sterile2, 5);
    }

    #[test]
    fn run_count_mismatch_rejected() {
        let spec = InitSpec::parse("0*3\n+1*2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(spec.materialize(&[10], &mut rng).is_err());
    }

    #[test]
    fn bad_product_rejected() {
        assert!(InitSpec::parse("product(0.5,0.6,0,0)").is_err());
        assert!(InitSpec::parse("product(0.5,0.1,0)").is_err());
        assert!(InitSpec::parse("product(-0.1,0,0,0)").is_err());
    }

    #[test]
    fn single_center_places_one_fertile() {
        let spec = InitSpec::parse("single-fertile-1@center").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = spec.materialize(&[9, 9], &mut rng).unwrap();
        let occ = t.occupancy();
        assert_eq!(occ.fertile1, 1);
        assert_eq!(occ.occupied(), 1);
        assert_eq!(t.get(t.site_of(&[4, 4])), SiteState::Fertile1);
    }

    #[test]
    fn product_densities_close_to_requested() {
        let spec = InitSpec::Product([0.3, 0.1, 0.2, 0.05]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = spec.materialize(&[100, 100], &mut rng).unwrap();
        let occ = t.occupancy();
        let n = t.len() as f64;
        for (count, p) in [
            (occ.fertile1, 0.3),
            (occ.sterile1, 0.1),
            (occ.fertile2, 0.2),
            (occ.sterile2, 0.05),
        ] {
            let sigma = (p * (1.0 - p) / n).sqrt();
            let diff = (count as f64 / n - p).abs();
            assert!(diff < 4.0 * sigma, "density {} vs {} (sigma {})", count as f64 / n, p, sigma);
        }
    }

    #[test]
    fn packed_chars_round_trip() {
        for s in SiteState::ALL {
            assert_eq!(SiteState::from_char(s.to_char()).unwrap(), s);
            assert_eq!(SiteState::parse_token(s.token()).unwrap(), s);
        }
    }

    #[test]
    fn offset_from_center_wraps() {
        let t = Torus::new(&[10], SiteState::Empty).unwrap();
        assert_eq!(t.offset_from_center(5), vec![0]);
        assert_eq!(t.offset_from_center(6), vec![1]);
        assert_eq!(t.offset_from_center(0), vec![-5]);
        assert_eq!(t.offset_from_center(9), vec![4]);
    }
}
