//! Configuration files and output formats.
//!
//! Configs are flat `key=value` text files with `#` comments. Outputs are
//! NDJSON for per-run records, CSV for tables, and plain (P2) PGM images
//! for configuration snapshots. Every writer is deterministic: identical
//! inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::lattice::{SiteState, TypeLabel};
use crate::sim::{ModelParams, Sample, Trajectory};
use crate::{Error, Result};

/// Environment variable that overrides every other seed source.
pub const SEED_ENV_VAR: &str = "STERILECP_SEED";

/// Returns the global seed override, if the environment sets one.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV_VAR) {
        Err(_) => Ok(None),
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|e| Error::invalid(format!("{SEED_ENV_VAR}={text:?} is not a u64: {e}"))),
    }
}

/// A parsed flat key=value configuration.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key=value` lines. Blank lines and lines starting with `#`
    /// are skipped; whitespace around keys and values is trimmed; a
    /// repeated key is an error rather than a silent override.
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: no '=' in {line:?}", idx + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::invalid(format!("config line {}: empty key", idx + 1)));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::invalid(format!("config line {}: duplicate key {key:?}", idx + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::invalid(format!("config key {key:?} is required")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(text) => text
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::invalid(format!("config key {key:?} = {text:?}: {e}"))),
        }
    }

    /// `f64` value; accepts `inf` for the infinite-rate mode.
    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.parsed(key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?;
        Ok(self.f64_opt(key)?.expect("key present"))
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.parsed(key)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.u64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed::<usize>(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => {
                Err(Error::invalid(format!("config key {key:?} = {other:?}: expected true or false")))
            }
        }
    }

    /// Comma-separated list of values, e.g. `sides = 100,100`.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(text) => text
                .split(',')
                .map(|part| {
                    part.trim().parse::<T>().map_err(|e| {
                        Error::invalid(format!("config key {key:?}, item {part:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn require_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.require(key)?;
        Ok(self.list(key)?.expect("key present"))
    }
}

/// One simulation run in NDJSON form.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunRecord {
    pub params: ModelParams,
    pub seed: u64,
    pub horizon: f64,
    /// First fertile-extinction time per type; `None` means the fertile
    /// population was still positive at the horizon.
    pub fertile_extinction: [Option<f64>; 2],
    pub type_extinction: [Option<f64>; 2],
    /// Censoring flags matching `fertile_extinction`: a censored type has
    /// no observed extinction time.
    pub censored: [bool; 2],
    pub max_fertile_offset: [i64; 2],
    pub births_applied: [u64; 4],
    pub deaths_applied: u64,
    pub samples: Vec<Sample>,
}

impl RunRecord {
    pub fn from_trajectory(params: &ModelParams, traj: &Trajectory) -> RunRecord {
        RunRecord {
            params: *params,
            seed: traj.seed,
            horizon: traj.horizon,
            fertile_extinction: traj.fertile_extinction,
            type_extinction: traj.type_extinction,
            censored: [
                traj.fertile_extinction[0].is_none(),
                traj.fertile_extinction[1].is_none(),
            ],
            max_fertile_offset: traj.max_fertile_offset,
            births_applied: traj.births_applied,
            deaths_applied: traj.deaths_applied,
            samples: traj.samples.clone(),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_ndjson<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Canonical text form of a float for CSV cells: shortest representation
/// that parses back to the same value.
pub fn csv_f64(x: f64) -> String {
    format!("{x}")
}

/// Writes a CSV table. Every row must match the header width, and no
/// field may contain a comma, quote, or line break; the writers in this
/// crate only emit numbers and plain identifiers, so quoting is refused
/// rather than implemented.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    let check = |field: &str| -> Result<()> {
        if field.contains([',', '"', '\n', '\r']) {
            return Err(Error::invalid(format!("CSV field {field:?} needs quoting")));
        }
        Ok(())
    };
    for field in header {
        check(field)?;
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (idx, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::invalid(format!(
                "CSV row {idx} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        for field in row {
            check(field)?;
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Gray levels for a rendered configuration.
///
/// The single-type palette uses fertile=0, sterile=128, empty=255. The
/// two-type palette uses 0/64 for fertile/sterile type 1 and 160/208 for
/// type 2. Which one applies is recorded in the image comment line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    SingleType,
    TwoType,
}

impl Palette {
    pub fn level(&self, s: SiteState) -> Result<u8> {
        match (self, s) {
            (_, SiteState::Empty) => Ok(255),
            (Palette::SingleType, SiteState::Fertile1) => Ok(0),
            (Palette::SingleType, SiteState::Sterile1) => Ok(128),
            (Palette::SingleType, _) => {
                Err(Error::invalid("single-type palette cannot render type-2 states"))
            }
            (Palette::TwoType, SiteState::Fertile1) => Ok(0),
            (Palette::TwoType, SiteState::Sterile1) => Ok(64),
            (Palette::TwoType, SiteState::Fertile2) => Ok(160),
            (Palette::TwoType, SiteState::Sterile2) => Ok(208),
        }
    }

    fn legend(&self) -> &'static str {
        match self {
            Palette::SingleType => "levels: fertile=0 sterile=128 empty=255",
            Palette::TwoType => {
                "levels: fertile1=0 sterile1=64 fertile2=160 sterile2=208 empty=255"
            }
        }
    }
}

/// Renders a configuration as a plain (P2) PGM image, one sample value
/// per site in row-major order, at most 17 values per line to respect the
/// format's 70-character line limit.
pub fn render_pgm(
    cells: &[SiteState],
    width: usize,
    height: usize,
    palette: Palette,
    note: &str,
) -> Result<String> {
    if width == 0 || height == 0 || cells.len() != width * height {
        return Err(Error::invalid(format!(
            "image dimensions {width}x{height} do not match {} cells",
            cells.len()
        )));
    }
    let note = note.replace(['\n', '\r'], " ");
    let mut out = String::with_capacity(cells.len() * 4 + 64);
    out.push_str("P2\n");
    let _ = writeln!(out, "# {}; {}", palette.legend(), note);
    let _ = writeln!(out, "{width} {height}");
    out.push_str("255\n");
    for chunk in cells.chunks(17) {
        let row: Vec<String> = chunk
            .iter()
            .map(|&s| palette.level(s).map(|v| v.to_string()))
            .collect::<Result<_>>()?;
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

fn trajectory_palette(samples: &[Sample]) -> Palette {
    if samples.iter().any(|s| s.occupancy.type_total(TypeLabel::Two) > 0) {
        Palette::TwoType
    } else {
        Palette::SingleType
    }
}

/// Writes a PGM snapshot of a recorded trajectory.
///
/// A 2-dimensional torus renders as one image of the latest snapshot at
/// or before `t` (axis 0 down, axis 1 across). A 1-dimensional torus
/// renders as a space-time raster: one row per recorded snapshot up to
/// `t`, earliest at the top. The palette is chosen by content: any type-2
/// individual in the occupancy series selects the two-type levels.
pub fn emit_snapshot(traj: &Trajectory, t: f64, path: &Path) -> Result<()> {
    let sides = traj.terminal.sides().to_vec();
    let palette = trajectory_palette(&traj.samples);
    let body = match sides.len() {
        2 => {
            let (st, cells) = traj.snapshot_at(t)?;
            render_pgm(cells, sides[1], sides[0], palette, &format!("t={st}"))?
        }
        1 => {
            if traj.snapshots.is_empty() {
                return Err(Error::invalid("trajectory was run without snapshot recording"));
            }
            let rows: Vec<&(f64, Vec<SiteState>)> =
                traj.snapshots.iter().filter(|(st, _)| *st <= t + 1e-12).collect();
            if rows.is_empty() {
                return Err(Error::invalid(format!("no snapshot at or before t={t}")));
            }
            let mut cells = Vec::with_capacity(rows.len() * sides[0]);
            for (_, row) in &rows {
                cells.extend_from_slice(row);
            }
            let note = format!(
                "space-time raster, {} rows, t in [{}, {}]",
                rows.len(),
                rows[0].0,
                rows[rows.len() - 1].0
            );
            render_pgm(&cells, sides[0], rows.len(), palette, &note)?
        }
        d => {
            return Err(Error::invalid(format!(
                "snapshots render 1- or 2-dimensional configurations, got {d} axes"
            )))
        }
    };
    std::fs::write(path, body)?;
    Ok(())
}
