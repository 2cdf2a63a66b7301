//! Integer grid geometry: locations, distances and range neighborhoods.
//!
//! Nodes are identified by where they sit on a `W x W` integer grid. Two
//! locations are in range when their squared distance is at most
//! `floor(R^2)`, computed in integers so that edge sets are bit-exact.

use std::fmt;

use crate::error::{Error, Result};

/// Grid side length and communication range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    width: u32,
    range: f64,
    range_sq: u64,
}

impl GridParams {
    pub fn new(width: u32, range: f64) -> Result<Self> {
        if width < 2 {
            return Err(Error::Domain(format!("grid width must be >= 2, got {width}")));
        }
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::Domain(format!("range must be positive, got {range}")));
        }
        let w = f64::from(width);
        if range * range >= 2.0 * w * w {
            return Err(Error::Domain(format!(
                "range {range} reaches across the whole {width}x{width} grid"
            )));
        }
        Ok(Self {
            width,
            range,
            range_sq: (range * range).floor() as u64,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Largest integer squared distance that is still in range.
    pub fn range_sq(&self) -> u64 {
        self.range_sq
    }

    /// Number of grid cells, `W^2`.
    pub fn cells(&self) -> usize {
        (self.width as usize) * (self.width as usize)
    }

    pub fn contains(&self, loc: Location) -> bool {
        loc.x < self.width && loc.y < self.width
    }

    pub fn check(&self, loc: Location) -> Result<()> {
        if self.contains(loc) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "location {loc} outside the {w}x{w} grid",
                w = self.width
            )))
        }
    }

    /// Linear index `x * W + y`.
    pub fn index(&self, loc: Location) -> Result<usize> {
        self.check(loc)?;
        Ok(self.index_unchecked(loc))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, loc: Location) -> usize {
        loc.x as usize * self.width as usize + loc.y as usize
    }

    pub fn location(&self, index: usize) -> Result<Location> {
        if index >= self.cells() {
            return Err(Error::Domain(format!("index {index} outside [0, {})", self.cells())));
        }
        let w = self.width as usize;
        Ok(Location::new((index / w) as u32, (index % w) as u32))
    }

    #[inline]
    pub fn in_range(&self, a: Location, b: Location) -> bool {
        a.dist_sq(b) <= self.range_sq
    }

    /// All other grid points within range of `v`, ordered by linear index.
    pub fn grid_neighbors(&self, v: Location) -> Result<Vec<Location>> {
        self.check(v)?;
        let stencil = Stencil::new(self);
        Ok(stencil
            .offsets()
            .iter()
            .filter_map(|&(dx, dy)| stencil.apply(self, v, dx, dy))
            .collect())
    }
}

/// A cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub x: u32,
    pub y: u32,
}

impl Location {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn dist_sq(self, other: Location) -> u64 {
        let dx = i64::from(self.x) - i64::from(other.x);
        let dy = i64::from(self.y) - i64::from(other.y);
        (dx * dx + dy * dy) as u64
    }

    pub fn euclid_dist(self, other: Location) -> f64 {
        (self.dist_sq(other) as f64).sqrt()
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub fn euclid_dist(a: Location, b: Location) -> f64 {
    a.euclid_dist(b)
}

/// The set of `(dx, dy)` offsets within range, excluding `(0, 0)`.
///
/// Offsets are sorted lexicographically, which for a fixed origin is the
/// same order as the linear index of the translated location. The Q-table
/// uses the position of an offset in this list as the column of a row.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    offsets: Vec<(i32, i32)>,
    radius: i32,
    // (2r+1)^2 lookup from offset to slot, -1 when outside the disk
    slots: Vec<i32>,
}

impl Stencil {
    pub(crate) fn new(params: &GridParams) -> Self {
        let r2 = params.range_sq() as i64;
        let radius = (r2 as f64).sqrt().floor() as i32;
        // guard against sqrt rounding
        let radius = (radius - 1..=radius + 1)
            .filter(|&r| r >= 0 && i64::from(r) * i64::from(r) <= r2)
            .max()
            .unwrap_or(0);
        let side = (2 * radius + 1) as usize;
        let mut slots = vec![-1; side * side];
        let mut offsets = Vec::new();
        for dx in -radius..=radius {
            for dy in -radius..=radius {
                let d2 = i64::from(dx * dx + dy * dy);
                if d2 == 0 || d2 > r2 {
                    continue;
                }
                slots[(dx + radius) as usize * side + (dy + radius) as usize] = offsets.len() as i32;
                offsets.push((dx, dy));
            }
        }
        Self { offsets, radius, slots }
    }

    pub(crate) fn len(&self) -> usize {
        self.offsets.len()
    }

    pub(crate) fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    /// Slot of the pair `(from, to)`, or `None` when `to` is not a grid
    /// neighbor of `from`.
    #[inline]
    pub(crate) fn slot(&self, from: Location, to: Location) -> Option<usize> {
        let dx = to.x as i64 - from.x as i64;
        let dy = to.y as i64 - from.y as i64;
        let r = i64::from(self.radius);
        if dx.abs() > r || dy.abs() > r {
            return None;
        }
        let side = 2 * r + 1;
        let s = self.slots[((dx + r) * side + (dy + r)) as usize];
        (s >= 0).then_some(s as usize)
    }

    #[inline]
    pub(crate) fn apply(&self, params: &GridParams, v: Location, dx: i32, dy: i32) -> Option<Location> {
        let x = v.x as i64 + i64::from(dx);
        let y = v.y as i64 + i64::from(dy);
        let w = i64::from(params.width());
        if (0..w).contains(&x) && (0..w).contains(&y) {
            Some(Location::new(x as u32, y as u32))
        } else {
            None
        }
    }
}
