//! Location-indexed Q-table.
//!
//! Entries exist for every pair `(v, u)` where `u` is a grid neighbor of `v`
//! and start at 0. Any other pair reads as [`INVALID_Q`]. Rows are laid out
//! by the shared neighbor stencil and allocated on first write, so an
//! untouched row costs nothing and still reads as all zeros.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{GridParams, Location, Stencil};
use crate::topology::parse_num;

/// Value reported for pairs that are not grid neighbors.
pub const INVALID_Q: f64 = -100.0;

pub const QTABLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct QTable {
    params: GridParams,
    stencil: Stencil,
    rows: Vec<Option<Box<[f64]>>>,
}

impl QTable {
    /// A fresh table: 0 for every grid-neighbor pair.
    pub fn new(params: GridParams) -> Self {
        Self {
            params,
            stencil: Stencil::new(&params),
            rows: vec![None; params.cells()],
        }
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    /// Column of `(from, to)` within the row of `from`.
    #[inline]
    pub fn slot(&self, from: Location, to: Location) -> Option<usize> {
        if !self.params.contains(from) || !self.params.contains(to) {
            return None;
        }
        self.stencil.slot(from, to)
    }

    pub fn is_entry(&self, from: Location, to: Location) -> bool {
        self.slot(from, to).is_some()
    }

    pub fn get(&self, from: Location, to: Location) -> f64 {
        match self.slot(from, to) {
            Some(s) => self.get_slot(self.params.index_unchecked(from), s),
            None => INVALID_Q,
        }
    }

    pub fn set(&mut self, from: Location, to: Location, value: f64) -> Result<()> {
        let s = self
            .slot(from, to)
            .ok_or_else(|| Error::Domain(format!("{to} is not a grid neighbor of {from}")))?;
        let row = self.params.index_unchecked(from);
        self.set_slot(row, s, value);
        Ok(())
    }

    #[inline]
    pub(crate) fn get_slot(&self, row: usize, slot: usize) -> f64 {
        match &self.rows[row] {
            Some(r) => r[slot],
            None => 0.0,
        }
    }

    #[inline]
    pub(crate) fn set_slot(&mut self, row: usize, slot: usize, value: f64) {
        let width = self.stencil.len();
        self.rows[row].get_or_insert_with(|| vec![0.0; width].into_boxed_slice())[slot] = value;
    }

    /// Total number of logical entries, `sum_v |N(v)|`.
    pub fn entry_count(&self) -> usize {
        let w = self.params.width();
        (0..w)
            .flat_map(|x| (0..w).map(move |y| Location::new(x, y)))
            .map(|v| self.neighbor_slots(v).count())
            .sum()
    }

    /// `(slot, location)` of every grid neighbor of `v`.
    fn neighbor_slots(&self, v: Location) -> impl Iterator<Item = (usize, Location)> + '_ {
        self.stencil
            .offsets()
            .iter()
            .enumerate()
            .filter_map(move |(k, &(dx, dy))| self.stencil.apply(&self.params, v, dx, dy).map(|u| (k, u)))
    }

    /// Entries whose value differs from the initial `0.0`, in
    /// `(from_index, to_index)` order.
    pub fn touched_entries(&self) -> Vec<(Location, Location, f64)> {
        let mut out = Vec::new();
        for (row, r) in self.rows.iter().enumerate() {
            let Some(r) = r else { continue };
            let v = self.params.location(row).expect("row in range");
            for (k, u) in self.neighbor_slots(v) {
                if r[k].to_bits() != 0 {
                    out.push((v, u, r[k]));
                }
            }
        }
        out
    }

    /// Bit-exact comparison of every logical entry.
    pub fn bit_eq(&self, other: &QTable) -> bool {
        if self.params != other.params {
            return false;
        }
        self.rows.iter().zip(&other.rows).all(|(a, b)| match (a, b) {
            (None, None) => true,
            (Some(a), Some(b)) => a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()),
            (Some(r), None) | (None, Some(r)) => {
                // untouched slots of an allocated row stay +0.0
                r.iter().all(|x| x.to_bits() == 0)
            }
        })
    }

    /// Largest absolute entry difference; `None` for tables on different grids.
    pub fn max_abs_diff(&self, other: &QTable) -> Option<f64> {
        if self.params != other.params {
            return None;
        }
        let mut worst: f64 = 0.0;
        for row in 0..self.rows.len() {
            if self.rows[row].is_none() && other.rows[row].is_none() {
                continue;
            }
            for k in 0..self.stencil.len() {
                worst = worst.max((self.get_slot(row, k) - other.get_slot(row, k)).abs());
            }
        }
        Some(worst)
    }

    /// Smallest and largest stored value over allocated rows.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        let mut it = self.touched_entries().into_iter().map(|(_, _, q)| q);
        let first = it.next()?;
        Some(it.fold((first.min(0.0), first.max(0.0)), |(lo, hi), q| (lo.min(q), hi.max(q))))
    }
}

impl PartialEq for QTable {
    fn eq(&self, other: &Self) -> bool {
        self.bit_eq(other)
    }
}

pub fn init_qtable(params: GridParams) -> QTable {
    QTable::new(params)
}

/// Writes the table as text: a header, optional `# key value` metadata
/// lines, then one `from_index to_index q_value` record per entry that
/// differs from 0. Values use the shortest decimal that round-trips.
pub fn serialize_qtable(q: &QTable, meta: &[(&str, String)]) -> String {
    let entries = q.touched_entries();
    let mut out = String::new();
    writeln!(out, "qtable {QTABLE_FORMAT_VERSION}").unwrap();
    writeln!(out, "W {}", q.params().width()).unwrap();
    writeln!(out, "R {}", q.params().range()).unwrap();
    for (k, v) in meta {
        writeln!(out, "# {k} {v}").unwrap();
    }
    writeln!(out, "entries {}", entries.len()).unwrap();
    for (v, u, value) in entries {
        let p = q.params();
        writeln!(out, "{} {} {:?}", p.index_unchecked(v), p.index_unchecked(u), value).unwrap();
    }
    out
}

/// `# key value` metadata lines of a Q-table document.
pub fn qtable_meta(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .take_while(|l| !l.starts_with("entries"))
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(' '))
        .map(|(k, v)| (k.to_string(), v.trim().to_string()))
        .collect()
}

pub fn parse_qtable(text: &str) -> Result<QTable> {
    const WHAT: &str = "qtable";
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut header = |key: &str| -> Result<String> {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, key, "missing header line"))?;
        match line.split_whitespace().collect::<Vec<_>>()[..] {
            [k, v] if k == key => Ok(v.to_string()),
            _ => Err(Error::parse(
                WHAT,
                key,
                format!("line {}: expected `{key} <value>`, got `{line}`", lineno + 1),
            )),
        }
    };
    let version: u32 = parse_num(WHAT, "qtable", &header("qtable")?)?;
    if version != QTABLE_FORMAT_VERSION {
        return Err(Error::parse(
            WHAT,
            "qtable",
            format!("unsupported format version {version}"),
        ));
    }
    let width: u32 = parse_num(WHAT, "W", &header("W")?)?;
    let range: f64 = parse_num(WHAT, "R", &header("R")?)?;
    let count: usize = parse_num(WHAT, "entries", &header("entries")?)?;
    let params = GridParams::new(width, range).map_err(|e| Error::parse(WHAT, "W/R", e.to_string()))?;

    let mut q = QTable::new(params);
    let mut prev: Option<(usize, usize)> = None;
    for k in 0..count {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, "entries", format!("expected {count} records, found {k}")))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [from, to, value] = parts[..] else {
            return Err(Error::parse(
                WHAT,
                "entries",
                format!("line {}: expected `from to value`", lineno + 1),
            ));
        };
        let from: usize = parse_num(WHAT, "from_index", from)?;
        let to: usize = parse_num(WHAT, "to_index", to)?;
        let value: f64 = parse_num(WHAT, "q_value", value)?;
        if !value.is_finite() {
            return Err(Error::parse(
                WHAT,
                "q_value",
                format!("line {}: non-finite value", lineno + 1),
            ));
        }
        if prev.is_some_and(|p| p >= (from, to)) {
            return Err(Error::parse(
                WHAT,
                "entries",
                format!("line {}: records must be strictly ordered by (from, to)", lineno + 1),
            ));
        }
        prev = Some((from, to));
        let (v, u) = match (params.location(from), params.location(to)) {
            (Ok(v), Ok(u)) => (v, u),
            _ => {
                return Err(Error::parse(
                    WHAT,
                    "entries",
                    format!("line {}: index outside the grid", lineno + 1),
                ))
            }
        };
        q.set(v, u, value).map_err(|_| {
            Error::parse(
                WHAT,
                "entries",
                format!("line {}: {u} is not a grid neighbor of {v}", lineno + 1),
            )
        })?;
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(Error::parse(
            WHAT,
            "entries",
            format!("line {}: more records than declared", lineno + 1),
        ));
    }
    Ok(q)
}
