//! Exact dyadic-grid geometry.
//!
//! Everything here is integer arithmetic on cell indices.  A 1D cell at
//! level `L` with index `k` is the half-open interval `[k·2^-L, (k+1)·2^-L)`;
//! a 2D cell is the product of two such intervals.  Sets are finite sorted
//! lists of indices, so set operations are exact and reproducible.

use std::sync::atomic::{AtomicU32, Ordering};

use crate::{Error, Result};

/// Hard cap protecting `i64` index arithmetic regardless of configuration.
pub const ABSOLUTE_MAX_LEVEL: u32 = 48;

static MAX_LEVEL: AtomicU32 = AtomicU32::new(u32::MAX);

fn max_level_init() -> u32 {
    match std::env::var("FSLAB_MAX_LEVEL") {
        Ok(v) => v.trim().parse::<u32>().unwrap_or(30).min(ABSOLUTE_MAX_LEVEL),
        Err(_) => 30,
    }
}

/// Currently configured maximum grid level (default 30, env `FSLAB_MAX_LEVEL`).
pub fn max_level() -> u32 {
    let cur = MAX_LEVEL.load(Ordering::Relaxed);
    if cur != u32::MAX {
        return cur;
    }
    let init = max_level_init();
    MAX_LEVEL.store(init, Ordering::Relaxed);
    init
}

/// Override the maximum grid level for this process (CLI flag / tests).
pub fn set_max_level(l: u32) {
    MAX_LEVEL.store(l.min(ABSOLUTE_MAX_LEVEL), Ordering::Relaxed);
}

/// A dyadic grid level: mesh `2^-L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(pub u32);

impl Level {
    pub fn new(l: u32) -> Result<Level> {
        if l > max_level() {
            return Err(Error::LevelTooFine { level: l, max: max_level() });
        }
        Ok(Level(l))
    }

    pub fn mesh(self) -> f64 {
        0.5f64.powi(self.0 as i32)
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ambient interval `[lo, hi)` in integer units; at level `L` the admissible
/// cell indices are `[lo·2^L, hi·2^L)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub lo: i32,
    pub hi: i32,
}

impl Bounds {
    pub const fn new(lo: i32, hi: i32) -> Bounds {
        Bounds { lo, hi }
    }

    /// Default ambient interval: projections of `B(1)`-sized sets under
    /// `theta in [0,1]` stay inside `[-2, 2]`.
    pub const AMBIENT: Bounds = Bounds::new(-2, 2);
    /// The unit interval, used for direction (theta) axes.
    pub const UNIT: Bounds = Bounds::new(0, 1);

    pub fn index_range(&self, level: Level) -> (i64, i64) {
        let scale = 1i64 << level.0;
        ((self.lo as i64) * scale, (self.hi as i64) * scale)
    }

    pub fn contains_index(&self, level: Level, k: i64) -> bool {
        let (lo, hi) = self.index_range(level);
        lo <= k && k < hi
    }
}

/// Finite union of dyadic cells at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSet1D {
    level: Level,
    bounds: Bounds,
    cells: Vec<i64>,
}

impl GridSet1D {
    /// Build from arbitrary indices; sorts, deduplicates, checks bounds.
    pub fn new(level: Level, bounds: Bounds, mut cells: Vec<i64>) -> Result<GridSet1D> {
        cells.sort_unstable();
        cells.dedup();
        if let (Some(&min), Some(&max)) = (cells.first(), cells.last()) {
            if !bounds.contains_index(level, min) || !bounds.contains_index(level, max) {
                return Err(Error::OutOfBounds {
                    what: format!("cell range [{min}, {max}] at level {level}"),
                });
            }
        }
        Ok(GridSet1D { level, bounds, cells })
    }

    pub fn empty(level: Level, bounds: Bounds) -> GridSet1D {
        GridSet1D { level, bounds, cells: Vec::new() }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn cells(&self) -> &[i64] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, k: i64) -> bool {
        self.cells.binary_search(&k).is_ok()
    }

    pub fn is_subset_of(&self, other: &GridSet1D) -> bool {
        self.level == other.level && self.cells.iter().all(|&k| other.contains(k))
    }

    /// Level-`target` cells intersecting the set.  Coarsening only.
    pub fn covering_cells(&self, target: Level) -> Result<GridSet1D> {
        if target.0 > self.level.0 {
            return Err(Error::CannotRefine { from: self.level.0, to: target.0 });
        }
        let shift = self.level.0 - target.0;
        let mut out: Vec<i64> = self.cells.iter().map(|&k| k >> shift).collect();
        out.dedup(); // shift is monotone, input sorted
        Ok(GridSet1D { level: target, bounds: self.bounds, cells: out })
    }

    pub fn covering_number(&self, target: Level) -> Result<usize> {
        Ok(self.covering_cells(target)?.len())
    }

    /// All cells within l-infinity distance `2^-r` of the set, at the set's
    /// own level, clipped to bounds.  `r` must be no finer than the level.
    pub fn neighborhood(&self, r: Level) -> Result<GridSet1D> {
        if r.0 > self.level.0 {
            return Err(Error::CannotRefine { from: self.level.0, to: r.0 });
        }
        let radius = 1i64 << (self.level.0 - r.0);
        Ok(self.dilate(radius))
    }

    /// Dilation by an integer number of cells (0 = identity).
    pub fn dilate(&self, radius: i64) -> GridSet1D {
        let (lo, hi) = self.bounds.index_range(self.level);
        let mut out = Vec::with_capacity(self.cells.len());
        // Runs [k-radius, k+radius] over sorted inputs merge on the fly.
        let mut next_free = i64::MIN;
        for &k in &self.cells {
            let a = (k - radius).max(lo).max(next_free);
            let b = (k + radius).min(hi - 1);
            if a > b {
                continue;
            }
            out.extend(a..=b);
            next_free = b + 1;
        }
        GridSet1D { level: self.level, bounds: self.bounds, cells: out }
    }

    /// Exact image under a rescaling map.
    pub fn rescale(&self, map: &RescaleMap) -> Result<GridSet1D> {
        let (cells, level) = map.apply_axis_many(&self.cells, self.level, map.x0_num)?;
        GridSet1D::new(level, self.bounds, cells)
    }

    pub fn union(&self, other: &GridSet1D) -> Result<GridSet1D> {
        if self.level != other.level {
            return Err(Error::LevelMismatch { a: self.level.0, b: other.level.0 });
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        GridSet1D::new(self.level, self.bounds, cells)
    }

    pub fn intersect(&self, other: &GridSet1D) -> Result<GridSet1D> {
        if self.level != other.level {
            return Err(Error::LevelMismatch { a: self.level.0, b: other.level.0 });
        }
        let cells = self.cells.iter().copied().filter(|&k| other.contains(k)).collect();
        Ok(GridSet1D { level: self.level, bounds: self.bounds, cells })
    }
}

/// Finite union of dyadic squares, either explicit or a lazy product.
#[derive(Clone, Debug)]
pub enum GridSet2D {
    Explicit { level: Level, bounds: Bounds, cells: Vec<(i64, i64)> },
    Product { a: GridSet1D, b: GridSet1D },
}

impl GridSet2D {
    pub fn explicit(level: Level, bounds: Bounds, mut cells: Vec<(i64, i64)>) -> Result<GridSet2D> {
        cells.sort_unstable();
        cells.dedup();
        for &(i, j) in &cells {
            if !bounds.contains_index(level, i) || !bounds.contains_index(level, j) {
                return Err(Error::OutOfBounds { what: format!("2D cell ({i}, {j}) at level {level}") });
            }
        }
        Ok(GridSet2D::Explicit { level, bounds, cells })
    }

    /// Lazy product `{(a, b) : a in A, b in B}`; levels must match.
    pub fn product(a: GridSet1D, b: GridSet1D) -> Result<GridSet2D> {
        if a.level() != b.level() {
            return Err(Error::LevelMismatch { a: a.level().0, b: b.level().0 });
        }
        Ok(GridSet2D::Product { a, b })
    }

    pub fn level(&self) -> Level {
        match self {
            GridSet2D::Explicit { level, .. } => *level,
            GridSet2D::Product { a, .. } => a.level(),
        }
    }

    pub fn bounds(&self) -> Bounds {
        match self {
            GridSet2D::Explicit { bounds, .. } => *bounds,
            GridSet2D::Product { a, .. } => a.bounds(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridSet2D::Explicit { cells, .. } => cells.len(),
            GridSet2D::Product { a, b } => a.len() * b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: (i64, i64)) -> bool {
        match self {
            GridSet2D::Explicit { cells, .. } => cells.binary_search(&cell).is_ok(),
            GridSet2D::Product { a, b } => a.contains(cell.0) && b.contains(cell.1),
        }
    }

    /// Exact conversion to the explicit representation.
    pub fn materialize(&self) -> GridSet2D {
        match self {
            GridSet2D::Explicit { .. } => self.clone(),
            GridSet2D::Product { a, b } => {
                let mut cells = Vec::with_capacity(a.len() * b.len());
                for &i in a.cells() {
                    for &j in b.cells() {
                        cells.push((i, j));
                    }
                }
                GridSet2D::Explicit { level: a.level(), bounds: a.bounds(), cells }
            }
        }
    }

    pub fn cells_vec(&self) -> Vec<(i64, i64)> {
        match self.materialize() {
            GridSet2D::Explicit { cells, .. } => cells,
            GridSet2D::Product { .. } => unreachable!(),
        }
    }

    pub fn covering_cells(&self, target: Level) -> Result<GridSet2D> {
        if target.0 > self.level().0 {
            return Err(Error::CannotRefine { from: self.level().0, to: target.0 });
        }
        match self {
            GridSet2D::Product { a, b } => {
                GridSet2D::product(a.covering_cells(target)?, b.covering_cells(target)?)
            }
            GridSet2D::Explicit { level, bounds, cells } => {
                let shift = level.0 - target.0;
                let mut out: Vec<(i64, i64)> =
                    cells.iter().map(|&(i, j)| (i >> shift, j >> shift)).collect();
                out.sort_unstable();
                out.dedup();
                Ok(GridSet2D::Explicit { level: target, bounds: *bounds, cells: out })
            }
        }
    }

    pub fn covering_number(&self, target: Level) -> Result<usize> {
        Ok(self.covering_cells(target)?.len())
    }

    /// l-infinity dilation; on products it factors through the axes.
    pub fn neighborhood(&self, r: Level) -> Result<GridSet2D> {
        if r.0 > self.level().0 {
            return Err(Error::CannotRefine { from: self.level().0, to: r.0 });
        }
        let radius = 1i64 << (self.level().0 - r.0);
        Ok(self.dilate(radius))
    }

    pub fn dilate(&self, radius: i64) -> GridSet2D {
        match self {
            GridSet2D::Product { a, b } => {
                GridSet2D::Product { a: a.dilate(radius), b: b.dilate(radius) }
            }
            GridSet2D::Explicit { level, bounds, cells } => {
                let (lo, hi) = bounds.index_range(*level);
                let mut out = Vec::new();
                for &(i, j) in cells {
                    for u in (i - radius).max(lo)..=(i + radius).min(hi - 1) {
                        for v in (j - radius).max(lo)..=(j + radius).min(hi - 1) {
                            out.push((u, v));
                        }
                    }
                }
                out.sort_unstable();
                out.dedup();
                GridSet2D::Explicit { level: *level, bounds: *bounds, cells: out }
            }
        }
    }

    pub fn rescale(&self, map: &RescaleMap) -> Result<GridSet2D> {
        match self {
            GridSet2D::Product { a, b } => {
                let (ac, lvl) = map.apply_axis_many(a.cells(), a.level(), map.x0_num)?;
                let (bc, _) = map.apply_axis_many(b.cells(), b.level(), map.y0_num)?;
                Ok(GridSet2D::Product {
                    a: GridSet1D::new(lvl, a.bounds(), ac)?,
                    b: GridSet1D::new(lvl, b.bounds(), bc)?,
                })
            }
            GridSet2D::Explicit { level, bounds, cells } => {
                let mut out = Vec::with_capacity(cells.len());
                let mut lvl = *level;
                for &(i, j) in cells {
                    let (i2, l2) = map.apply_axis(i, *level, map.x0_num)?;
                    let (j2, _) = map.apply_axis(j, *level, map.y0_num)?;
                    out.push((i2, j2));
                    lvl = l2;
                }
                if cells.is_empty() {
                    lvl = map.target_level(*level)?;
                }
                GridSet2D::explicit(lvl, *bounds, out)
            }
        }
    }

    /// Set equality after materialization (products compare structurally fast).
    pub fn same_cells(&self, other: &GridSet2D) -> bool {
        if self.level() != other.level() {
            return false;
        }
        self.cells_vec() == other.cells_vec()
    }
}

/// The affine map `z -> (z - z0) / r0` with `r0 = 2^scale_exp` and `z0`
/// a grid point with per-axis numerators at level `z0_level`.  It sends
/// level-`L` cells bijectively onto level-`L + scale_exp` cells.
///
/// `scale_exp` is signed so that inverses stay in the same family:
/// the map taking a ball of radius `2^-L0` onto the unit ball has
/// `scale_exp = L0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RescaleMap {
    pub x0_num: i64,
    pub y0_num: i64,
    pub z0_level: i32,
    pub scale_exp: i32,
}

impl RescaleMap {
    pub fn identity() -> RescaleMap {
        RescaleMap { x0_num: 0, y0_num: 0, z0_level: 0, scale_exp: 0 }
    }

    /// Map with centre `(x0_num, y0_num)·2^-z0_level` and ratio `r0 = 2^-l0`,
    /// i.e. the ball of radius `2^-l0` around the centre maps onto `B(1)`;
    /// level-`L` cells land at level `L - l0`.
    pub fn new(x0_num: i64, y0_num: i64, z0_level: u32, l0: u32) -> RescaleMap {
        RescaleMap { x0_num, y0_num, z0_level: z0_level as i32, scale_exp: -(l0 as i32) }
    }

    pub fn inverse(&self) -> RescaleMap {
        // (z - z0)/r0 inverted is z*r0 + z0 = (z - (-z0/r0)) / (1/r0),
        // and z0/r0 = z0_num * 2^-(z0_level + scale_exp).
        RescaleMap {
            x0_num: -self.x0_num,
            y0_num: -self.y0_num,
            z0_level: self.z0_level + self.scale_exp,
            scale_exp: -self.scale_exp,
        }
    }

    pub fn target_level(&self, level: Level) -> Result<Level> {
        let t = level.0 as i32 + self.scale_exp;
        if t < 0 {
            return Err(Error::OutOfBounds { what: format!("rescale of level {level} to level {t}") });
        }
        Level::new(t as u32)
    }

    fn apply_axis(&self, k: i64, level: Level, z0_num: i64) -> Result<(i64, Level)> {
        let target = self.target_level(level)?;
        // Exactness requires the centre to sit on the level-L grid.
        if self.z0_level > level.0 as i32 {
            return Err(Error::OutOfBounds {
                what: format!("rescale centre at level {} finer than set level {level}", self.z0_level),
            });
        }
        let shift = level.0 as i32 - self.z0_level;
        let z0_at_level = z0_num
            .checked_shl(shift as u32)
            .ok_or_else(|| Error::OutOfBounds { what: "rescale centre overflow".into() })?;
        Ok((k - z0_at_level, target))
    }

    fn apply_axis_many(&self, cells: &[i64], level: Level, z0_num: i64) -> Result<(Vec<i64>, Level)> {
        let mut out = Vec::with_capacity(cells.len());
        let mut lvl = self.target_level(level)?;
        for &k in cells {
            let (k2, l2) = self.apply_axis(k, level, z0_num)?;
            out.push(k2);
            lvl = l2;
        }
        Ok((out, lvl))
    }

    /// 1D convenience constructor (y axis unused).
    pub fn new_1d(x0_num: i64, z0_level: u32, l0: u32) -> RescaleMap {
        RescaleMap::new(x0_num, 0, z0_level, l0)
    }
}
