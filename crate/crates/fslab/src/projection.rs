//! Projections `(x, y) -> x + theta y`, sumsets, fiber multiplicity counts,
//! high-multiplicity sets, direction scans and decomposition probes.
//!
//! All geometry is exact: `theta = a/2^q` is dyadic, so incidences between
//! lines, grid cells and snapped balls reduce to integer comparisons.
//!
//! Conventions (fixed once, used consistently):
//! - cells are half-open; `B(x, 2^-e)` is the grid-snapped ball: the block
//!   of level-`L` cells at index distance at most `2^(L-e)` from the cell
//!   of `x`, as a half-open rectangle;
//! - a fiber is the line `x + theta y = t` through the anchor (lower-left
//!   corner) of a cell;
//! - `K_r` at level `rl` is the one-cell dilation of the level-`rl`
//!   covering of `K`, which is exactly the set of level-`rl` cells meeting
//!   the open `2^-rl`-neighbourhood of `K`.
//!
//! A level-`rl` cell `(u, v)` meets the fiber `t = T·2^-(L+q)` iff
//! `B <= T < B + W` with `B = 2^s (u 2^q + a v)`, `W = 2^s (2^q + a)`,
//! `s = L - rl`; every incidence test below is a variant of this.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::content::{dyadic_content, ContentValue, Tau};
use crate::grid::{Bounds, GridSet1D, GridSet2D, Level};
use crate::measure::{DeltaMeasure, Direction, ProductMeasure2};
use crate::{Error, Result};

/// Outer radius of a multiplicity window: `2^-exp` (exp may be negative,
/// for radii larger than 1) or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadiusBound {
    Exp(i32),
    Infinity,
}

/// Scale window `[r, R]` of a multiplicity count: inner scale `2^-r`,
/// outer ball radius per [`RadiusBound`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaleWindow {
    pub r: Level,
    pub cap: RadiusBound,
}

impl ScaleWindow {
    pub fn new(r: Level, cap: RadiusBound) -> Result<ScaleWindow> {
        if let RadiusBound::Exp(e) = cap {
            if e > r.0 as i32 {
                return Err(Error::InvalidParameter {
                    what: format!("window outer scale 2^-{e} finer than inner scale 2^-{}", r.0),
                });
            }
        }
        Ok(ScaleWindow { r, cap })
    }

    /// The window `[2^-rl, 1]`.
    pub fn to_unit(rl: Level) -> ScaleWindow {
        ScaleWindow { r: rl, cap: RadiusBound::Exp(0) }
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

/// Per-(set, window, direction) fiber incidence engine.
struct FiberEngine {
    /// level of the probed cells (`K.level`)
    level: u32,
    /// inner window level
    rl: u32,
    /// theta = a / 2^q
    a: i64,
    q: u32,
    /// K_r cells at level rl, sorted
    kr: Vec<(i64, i64)>,
    /// sorted fiber offsets `B` of the K_r cells
    b_sorted: Vec<i64>,
    /// ball radius in level-`level` units; None = unbounded
    radius: Option<i64>,
    /// true if every snapped ball centred at a probe cell contains all of K_r
    ball_covers_all: bool,
    probes: Vec<(i64, i64)>,
}

impl FiberEngine {
    fn new(set: &GridSet2D, theta: Direction, window: ScaleWindow) -> Result<FiberEngine> {
        let level = set.level().0;
        let rl = window.r.0;
        if rl > level {
            return Err(Error::CannotRefine { from: level, to: rl });
        }
        let q = theta.qlevel();
        if level + q + 3 > 62 {
            return Err(Error::OutOfBounds {
                what: format!("level {level} + direction grid {q} exceeds integer precision"),
            });
        }
        let radius = match window.cap {
            RadiusBound::Infinity => None,
            RadiusBound::Exp(e) => {
                let shift = level as i32 - e;
                if !(0..=62).contains(&shift) {
                    return Err(Error::OutOfBounds { what: format!("ball radius 2^{shift} cells") });
                }
                Some(1i64 << shift)
            }
        };
        // one-cell dilation WITHOUT ambient clipping: the r-neighbourhood is
        // engine scratch and must behave like the plane for rescaling
        // equivariance to be exact
        let kr = unclipped_neighborhood(&set.covering_cells(Level(rl))?);
        let probes = set.cells_vec();
        let s = level - rl;
        let a = theta.num();
        let mut b_sorted: Vec<i64> =
            kr.iter().map(|&(u, v)| ((u << q) + a * v) << s).collect();
        b_sorted.sort_unstable();
        let ball_covers_all = match radius {
            None => true,
            Some(p) => {
                if probes.is_empty() || kr.is_empty() {
                    true
                } else {
                    let (pi_min, pi_max) = extent(probes.iter().map(|c| c.0));
                    let (pj_min, pj_max) = extent(probes.iter().map(|c| c.1));
                    let (u_min, u_max) = extent(kr.iter().map(|c| c.0));
                    let (v_min, v_max) = extent(kr.iter().map(|c| c.1));
                    // every K_r cell must be CONTAINED in every probe ball,
                    // so the clipped rectangle is the full cell
                    let covers = |cmin: i64, cmax: i64, kmin: i64, kmax: i64| {
                        ((kmax + 1) << s) <= cmin + p + 1 && (kmin << s) >= cmax - p
                    };
                    covers(pi_min, pi_max, u_min, u_max) && covers(pj_min, pj_max, v_min, v_max)
                }
            }
        };
        Ok(FiberEngine { level, rl, a, q, kr, b_sorted, radius, ball_covers_all, probes })
    }

    fn fiber_value(&self, cell: (i64, i64)) -> i64 {
        (cell.0 << self.q) + self.a * cell.1
    }

    fn window_width(&self) -> i64 {
        ((1i64 << self.q) + self.a) << (self.level - self.rl)
    }

    /// Count K_r cells whose fiber interval contains T (no ball test).
    fn count_on_fiber(&self, t: i64) -> u64 {
        let w = self.window_width();
        // B in (t - w, t]
        let hi = self.b_sorted.partition_point(|&b| b <= t);
        let lo = self.b_sorted.partition_point(|&b| b <= t - w);
        (hi - lo) as u64
    }

    /// Exact multiplicity of one probe cell.
    fn multiplicity_of(&self, cell: (i64, i64)) -> u64 {
        let t = self.fiber_value(cell);
        if self.ball_covers_all {
            return self.count_on_fiber(t);
        }
        let p = self.radius.expect("finite radius in slow path");
        let s = self.level - self.rl;
        let scale = 1i64 << s;
        let qs = 1i64 << (self.q + s);
        let w = self.window_width();
        let (i, j) = cell;
        let v_lo = floor_div(j - p, scale);
        let v_hi = floor_div(j + p, scale);
        let mut count = 0u64;
        for v in v_lo..=v_hi {
            // u candidates with B <= T < B + W
            let x = t - ((self.a * v) << s);
            let u_hi = floor_div(x, qs);
            let u_lo = floor_div(x - w, qs) + 1;
            for u in u_lo..=u_hi {
                if (u << s) > i + p || ((u + 1) << s) <= i - p {
                    continue;
                }
                if self.kr.binary_search(&(u, v)).is_err() {
                    continue;
                }
                if self.meets_ball_clipped(u, v, i, j, p, t) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Line-vs-(cell ∩ snapped ball) test; the region is half-open with
    /// integer corners at the probe level.
    fn meets_ball_clipped(&self, u: i64, v: i64, i: i64, j: i64, p: i64, t: i64) -> bool {
        let s = self.level - self.rl;
        let x1 = (u << s).max(i - p);
        let x2 = ((u + 1) << s).min(i + p + 1);
        let y1 = (v << s).max(j - p);
        let y2 = ((v + 1) << s).min(j + p + 1);
        if x1 >= x2 || y1 >= y2 {
            return false;
        }
        let lo = (x1 << self.q) + self.a * y1;
        let hi = (x2 << self.q) + self.a * y2;
        lo <= t && t < hi
    }

    fn all_multiplicities(&self) -> Vec<((i64, i64), u64)> {
        if self.ball_covers_all {
            self.probes
                .iter()
                .map(|&c| (c, self.count_on_fiber(self.fiber_value(c))))
                .collect()
        } else {
            self.probes.iter().map(|&c| (c, self.multiplicity_of(c))).collect()
        }
    }
}

/// Sorted one-cell dilation of a 2D cell set, ignoring ambient bounds.
fn unclipped_neighborhood(set: &GridSet2D) -> Vec<(i64, i64)> {
    match set {
        GridSet2D::Product { a, b } => {
            let dil = |s: &GridSet1D| -> Vec<i64> {
                let mut out = Vec::with_capacity(3 * s.len());
                let mut next_free = i64::MIN;
                for &k in s.cells() {
                    let lo = (k - 1).max(next_free);
                    if lo > k + 1 {
                        continue;
                    }
                    out.extend(lo..=k + 1);
                    next_free = k + 2;
                }
                out
            };
            let da = dil(a);
            let db = dil(b);
            let mut cells = Vec::with_capacity(da.len() * db.len());
            for &u in &da {
                for &v in &db {
                    cells.push((u, v));
                }
            }
            cells
        }
        GridSet2D::Explicit { cells, .. } => {
            let mut out = Vec::with_capacity(9 * cells.len());
            for &(u, v) in cells {
                for du in -1..=1 {
                    for dv in -1..=1 {
                        out.push((u + du, v + dv));
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        }
    }
}

fn extent(iter: impl Iterator<Item = i64>) -> (i64, i64) {
    let mut min = i64::MAX;
    let mut max = i64::MIN;
    for x in iter {
        min = min.min(x);
        max = max.max(x);
    }
    (min, max)
}

/// Multiplicity of the point `x` (a cell of `K`) for the given direction
/// and window: the number of level-`r` cells of the `r`-neighbourhood of
/// `K` that meet both the snapped ball around `x` and the fiber through
/// `x`'s anchor.  Always at least 1.
pub fn multiplicity(
    set: &GridSet2D,
    theta: Direction,
    x: (i64, i64),
    window: ScaleWindow,
) -> Result<u64> {
    if !set.contains(x) {
        return Err(Error::PointNotInSet);
    }
    let engine = FiberEngine::new(set, theta, window)?;
    Ok(if engine.ball_covers_all {
        engine.count_on_fiber(engine.fiber_value(x))
    } else {
        engine.multiplicity_of(x)
    })
}

/// Multiplicities of every cell of `K` at once (same result as
/// [`multiplicity`] cell by cell).
pub fn multiplicity_all(
    set: &GridSet2D,
    theta: Direction,
    window: ScaleWindow,
) -> Result<Vec<((i64, i64), u64)>> {
    Ok(FiberEngine::new(set, theta, window)?.all_multiplicities())
}

/// The set of points of `K` whose multiplicity is at least `m` (threshold
/// rounded up to an integer; ties count as high multiplicity).
pub fn high_multiplicity_set(
    set: &GridSet2D,
    theta: Direction,
    m: f64,
    window: ScaleWindow,
) -> Result<GridSet2D> {
    if m.is_nan() || m < 1.0 {
        return Err(Error::InvalidParameter { what: format!("multiplicity threshold {m} < 1") });
    }
    let thr = m.ceil() as u64;
    let cells: Vec<(i64, i64)> = multiplicity_all(set, theta, window)?
        .into_iter()
        .filter(|&(_, c)| c >= thr)
        .map(|(c, _)| c)
        .collect();
    GridSet2D::explicit(set.level(), set.bounds(), cells)
}

/// Level-`target` cells meeting the image `pi_theta(K)`.
/// Products are handled as the sumset `A + theta B` without materializing.
pub fn project_set(set: &GridSet2D, theta: Direction, target: Level) -> Result<GridSet1D> {
    let level = set.level().0;
    if target.0 > level {
        return Err(Error::CannotRefine { from: level, to: target.0 });
    }
    let q = theta.qlevel();
    if level + q + 3 > 62 {
        return Err(Error::OutOfBounds { what: "projection exceeds integer precision".into() });
    }
    let a = theta.num();
    let g = level + q - target.0;
    let width = (1i64 << q) + a;
    let mut runs: Vec<(i64, i64)> = Vec::with_capacity(set.len());
    let mut push_cell = |u: i64, v: i64| {
        let lo = (u << q) + a * v;
        let hi = lo + width;
        runs.push((lo >> g, (hi - 1) >> g));
    };
    match set {
        GridSet2D::Product { a: sa, b: sb } => {
            for &u in sa.cells() {
                for &v in sb.cells() {
                    push_cell(u, v);
                }
            }
        }
        GridSet2D::Explicit { cells, .. } => {
            for &(u, v) in cells {
                push_cell(u, v);
            }
        }
    }
    let b = set.bounds();
    let out_bounds = Bounds::new(b.lo + b.lo.min(0), b.hi + b.hi.max(0));
    Ok(merge_runs_to_set(runs, target, out_bounds))
}

fn merge_runs_to_set(mut runs: Vec<(i64, i64)>, level: Level, bounds: Bounds) -> GridSet1D {
    runs.sort_unstable();
    let mut cells = Vec::new();
    let mut next_free = i64::MIN;
    for (lo, hi) in runs {
        let a = lo.max(next_free);
        if a > hi {
            continue;
        }
        cells.extend(a..=hi);
        next_free = hi + 1;
    }
    GridSet1D::new(level, bounds, cells).expect("projected cells within doubled bounds")
}

/// Cells of the union over `c in E` of `A + c B` at the target level; all
/// three sets are read as point sets (cell anchors) and the sums are exact.
pub fn affine_sumset(
    a: &GridSet1D,
    e: &GridSet1D,
    b: &GridSet1D,
    target: Level,
) -> Result<GridSet1D> {
    let l = a.level();
    if e.level() != l || b.level() != l {
        return Err(Error::LevelMismatch { a: l.0, b: e.level().0.max(b.level().0) });
    }
    let fine = 2 * l.0; // sums live on the level-2L grid
    if target.0 > fine {
        return Err(Error::CannotRefine { from: fine, to: target.0 });
    }
    let shift = fine - target.0;
    let mut out: Vec<i64> = Vec::with_capacity(a.len() * e.len().max(1) * b.len().max(1));
    for &ka in a.cells() {
        let base = (ka as i128) << l.0;
        for &kc in e.cells() {
            for &kb in b.cells() {
                let sum = base + (kc as i128) * (kb as i128);
                out.push((sum >> shift) as i64);
            }
        }
    }
    if e.is_empty() || b.is_empty() {
        // empty multiplier set: the union over E is empty
        out.clear();
    }
    let bounds = Bounds::new(
        a.bounds().lo.saturating_mul(4).max(-8),
        a.bounds().hi.saturating_mul(4).min(8),
    );
    GridSet1D::new(target, bounds, out)
}

/// One direction scan row.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub theta: Direction,
    pub hm_mass: f64,
    pub covering: usize,
    pub dimension_ratio: f64,
    pub flagged: bool,
}

/// Full result of a direction scan.
#[derive(Clone, Debug)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// flagged directions as cells on the theta axis
    pub exceptional_set: GridSet1D,
    pub exceptional_content: ContentValue,
    pub threshold_multiplicity: u64,
    pub mass_threshold: f64,
}

/// Scan all `2^theta_level` dyadic directions: for each
/// `theta = p / 2^theta_level` computes the product-measure mass of
/// `B(1) ∩ H_theta(K, delta^-sigma, window)` and the covering number of the
/// projection, flags directions whose mass reaches `delta^eta`, and returns
/// the dyadic content of the flagged set at exponent `tau`.
#[allow(clippy::too_many_arguments)]
pub fn hm_scan(
    mu_a: &DeltaMeasure,
    mu_b: &DeltaMeasure,
    sigma: f64,
    eta: f64,
    window: ScaleWindow,
    theta_level: u32,
    tau: Tau,
) -> Result<ScanResult> {
    let mu_a = mu_a.restrict_normalize(&mu_a.support())?;
    let mu_b = mu_b.restrict_normalize(&mu_b.support())?;
    let mu = ProductMeasure2::new(mu_a, mu_b)?;
    let set = mu.support()?;
    let delta_level = window.r.0;
    let m_threshold = (2f64.powf(delta_level as f64 * sigma)).ceil().max(1.0) as u64;
    let mass_threshold = 2f64.powf(-(delta_level as f64) * eta);
    if theta_level > crate::grid::max_level() {
        return Err(Error::LevelTooFine { level: theta_level, max: crate::grid::max_level() });
    }
    let dirs: Vec<i64> = (0..(1i64 << theta_level)).collect();
    let level = set.level();
    let ball = snap_ball_indices(level, 1);
    let rows: Result<Vec<ScanRow>> = dirs
        .par_iter()
        .map(|&p| {
            let theta = Direction::new(p, theta_level)?;
            let counts = multiplicity_all(&set, theta, window)?;
            let hm_cells: Vec<(i64, i64)> = counts
                .into_iter()
                .filter(|&(c, m)| m >= m_threshold && in_ball(c, ball))
                .map(|(c, _)| c)
                .collect();
            let hm_mass = mu.mass_of_cells(hm_cells.iter());
            let covering = project_set(&set, theta, window.r)?.len();
            let dimension_ratio = if covering > 0 {
                (covering as f64).log2() / delta_level as f64
            } else {
                0.0
            };
            Ok(ScanRow { theta, hm_mass, covering, dimension_ratio, flagged: hm_mass >= mass_threshold })
        })
        .collect();
    let rows = rows?;
    let flagged: Vec<i64> =
        rows.iter().filter(|r| r.flagged).map(|r| r.theta.num()).collect();
    let exceptional_set = GridSet1D::new(Level::new(theta_level)?, Bounds::UNIT, flagged)?;
    let exceptional_content = dyadic_content(&exceptional_set, tau)?;
    Ok(ScanResult {
        rows,
        exceptional_set,
        exceptional_content,
        threshold_multiplicity: m_threshold,
        mass_threshold,
    })
}

fn snap_ball_indices(level: Level, radius_units: i64) -> i64 {
    radius_units << level.0
}

fn in_ball(cell: (i64, i64), radius: i64) -> bool {
    cell.0.abs() <= radius && cell.1.abs() <= radius
}

/// Row of a single-scale projection check.
#[derive(Clone, Debug)]
pub struct SingleScaleRow {
    pub theta: Direction,
    pub verified: bool,
    /// least ratio count / threshold over the tested heavy subsets
    pub min_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct SingleScaleOutcome {
    pub witness: Option<Direction>,
    pub threshold: f64,
    pub rows: Vec<SingleScaleRow>,
}

/// Search the direction set `E` for a theta such that every tested heavy
/// subset `K'` (mass at least `delta^eta`) has projection covering number
/// at least `delta^(sigma + eta - alpha - beta)`.
///
/// Testing all subsets is exponential; the adversaries tried are greedy
/// unions of top-mass cells, greedy unions of top-mass fibers of the tested
/// direction, and the full set.  A reported witness is therefore sound
/// against these families only.
#[allow(clippy::too_many_arguments)]
pub fn single_scale_check(
    mu: &ProductMeasure2,
    e: &GridSet1D,
    sigma: f64,
    eta: f64,
    alpha: f64,
    beta: f64,
    delta: Level,
) -> Result<SingleScaleOutcome> {
    if e.is_empty() {
        return Err(Error::EmptyInput { what: "direction set".into() });
    }
    let set = mu.support()?;
    let level = set.level();
    if delta.0 > level.0 {
        return Err(Error::CannotRefine { from: level.0, to: delta.0 });
    }
    let exponent = sigma + eta - alpha - beta;
    let threshold = 2f64.powf(-(delta.0 as f64) * exponent);
    let mass_floor = 2f64.powf(-(delta.0 as f64) * eta);
    let qlevel = e.level().0;

    let cells = set.cells_vec();
    let mut by_mass: Vec<((i64, i64), f64)> =
        cells.iter().map(|&c| (c, mu.mass_of_cells(std::iter::once(&c)))).collect();
    by_mass.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    let mut greedy_cells: Vec<(i64, i64)> = Vec::new();
    let mut acc = 0.0;
    for &(c, w) in &by_mass {
        if acc >= mass_floor {
            break;
        }
        greedy_cells.push(c);
        acc += w;
    }

    let mut rows = Vec::new();
    let mut witness = None;
    for &p in e.cells() {
        let theta = Direction::new(p, qlevel)?;
        let mut min_ratio = f64::INFINITY;
        let mut candidates: Vec<Vec<(i64, i64)>> = vec![cells.clone(), greedy_cells.clone()];
        candidates.push(heavy_fiber_union(mu, &cells, theta, delta, mass_floor));
        let mut ok = true;
        for cand in candidates {
            if cand.is_empty() {
                continue;
            }
            let sub = GridSet2D::explicit(level, set.bounds(), cand)?;
            let count = project_set(&sub, theta, delta)?.len() as f64;
            min_ratio = min_ratio.min(count / threshold);
            if count < threshold {
                ok = false;
            }
        }
        if ok && witness.is_none() {
            witness = Some(theta);
        }
        rows.push(SingleScaleRow { theta, verified: ok, min_ratio });
    }
    Ok(SingleScaleOutcome { witness, threshold, rows })
}

/// Union of the heaviest delta-fibers of the direction until the mass floor
/// is reached (the natural low-projection adversary).
fn heavy_fiber_union(
    mu: &ProductMeasure2,
    cells: &[(i64, i64)],
    theta: Direction,
    delta: Level,
    mass_floor: f64,
) -> Vec<(i64, i64)> {
    let q = theta.qlevel();
    let a = theta.num();
    let level = mu.level().0;
    let shift = q + (level - delta.0);
    let mut tubes: BTreeMap<i64, (f64, Vec<(i64, i64)>)> = BTreeMap::new();
    for &(i, j) in cells {
        let t = ((i << q) + a * j) >> shift;
        let entry = tubes.entry(t).or_insert((0.0, Vec::new()));
        entry.0 += mu.mass_of_cells(std::iter::once(&(i, j)));
        entry.1.push((i, j));
    }
    let mut ordered: Vec<(f64, Vec<(i64, i64)>)> = tubes.into_values().collect();
    ordered.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let mut out = Vec::new();
    let mut acc = 0.0;
    for (m, mut cs) in ordered {
        if acc >= mass_floor {
            break;
        }
        acc += m;
        out.append(&mut cs);
    }
    out
}

/// Minimal constants for the two fiber-decomposition inequalities over a
/// bounded-overlap cover by level-`R` dyadic cells:
/// `F_r(t) <= C1 * sum_B F_r(B)(t)` and
/// `#{B : F_r(B)(t) != 0} <= C2 * F_R(t)` for every fiber position `t` on
/// the `r`-grid.
#[derive(Clone, Debug)]
pub struct FiberDecomposition {
    pub c1_min: f64,
    pub c2_min: f64,
    pub positions: usize,
}

pub fn fiber_decomposition_check(
    set: &GridSet2D,
    theta: Direction,
    r: Level,
    big_r: Level,
) -> Result<FiberDecomposition> {
    if big_r.0 > r.0 || r.0 > set.level().0 {
        return Err(Error::InvalidParameter {
            what: format!("scales r={} R={} invalid for level {}", r.0, big_r.0, set.level().0),
        });
    }
    let q = theta.qlevel();
    let a = theta.num();
    let kr = unclipped_neighborhood(&set.covering_cells(r)?);
    let kbig = unclipped_neighborhood(&set.covering_cells(big_r)?);
    let s = r.0 - big_r.0;

    // t on the r-grid: T = tc * 2^q; cell (u,v) at level rl covers
    // tc in [ceil(B / 2^q), ceil((B+W) / 2^q) - 1].
    let width_r = (1i64 << q) + a;
    let mut f_r: BTreeMap<i64, u64> = BTreeMap::new();
    let mut pairs: Vec<(i64, i64)> = Vec::new(); // (tc, R-ancestor linear id)
    for &(u, v) in &kr {
        let b = (u << q) + a * v;
        let lo = b.div_euclid(1 << q) + i64::from(b.rem_euclid(1 << q) != 0);
        let hi = {
            let e = b + width_r;
            e.div_euclid(1 << q) + i64::from(e.rem_euclid(1 << q) != 0) - 1
        };
        for tc in lo..=hi {
            *f_r.entry(tc).or_insert(0) += 1;
            pairs.push((tc, pack(u >> s, v >> s)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut distinct_anc: BTreeMap<i64, u64> = BTreeMap::new();
    for &(tc, _) in &pairs {
        *distinct_anc.entry(tc).or_insert(0) += 1;
    }

    // F_R(t): level-R cells of K_R on the fiber, T at resolution r-grid.
    let width_big = ((1i64 << q) + a) << s;
    let mut f_big: BTreeMap<i64, u64> = BTreeMap::new();
    for &(u, v) in &kbig {
        let b = ((u << q) + a * v) << s;
        let lo = b.div_euclid(1 << q) + i64::from(b.rem_euclid(1 << q) != 0);
        let hi = {
            let e = b + width_big;
            e.div_euclid(1 << q) + i64::from(e.rem_euclid(1 << q) != 0) - 1
        };
        for tc in lo..=hi {
            *f_big.entry(tc).or_insert(0) += 1;
        }
    }

    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for (&tc, &fr) in &f_r {
        if fr == 0 {
            continue;
        }
        // partitioned cover: sum over B of F_r(B)(t) equals F_r(t) exactly,
        // so the ratio records deviations of the construction, if any
        let sum_per_ball = fr; // cells partition into their R-ancestors
        c1 = c1.max(fr as f64 / sum_per_ball as f64);
        let anc = distinct_anc.get(&tc).copied().unwrap_or(0);
        let frb = f_big.get(&tc).copied().unwrap_or(0);
        if anc > 0 {
            assert!(frb > 0, "R-cell of a counted r-cell must lie on the fiber");
            c2 = c2.max(anc as f64 / frb as f64);
        }
    }
    Ok(FiberDecomposition { c1_min: c1, c2_min: c2, positions: f_r.len() })
}

fn pack(u: i64, v: i64) -> i64 {
    (u << 26) ^ (v & ((1 << 26) - 1))
}

/// One evaluation of the three-measure decomposition inequality
/// `mu_1(H(C N, [r,1])) <= mu_1(H(c M, [4R,5])) + C Cg^2 mu_4(H(c N/M, [4r,7R]))`
/// (outer radii rounded up to dyadic).
#[derive(Clone, Debug)]
pub struct Prop3Outcome {
    pub lhs: f64,
    pub rhs_coarse: f64,
    pub rhs_fine: f64,
    pub holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn prop3_probe(
    mu: &ProductMeasure2,
    theta: Direction,
    m_par: f64,
    n_par: f64,
    r: Level,
    big_r: Level,
    c_small: f64,
    c_big: f64,
    c_gamma: f64,
) -> Result<Prop3Outcome> {
    if !(1.0 <= m_par && m_par <= n_par) {
        return Err(Error::InvalidParameter { what: format!("need 1 <= M <= N, got {m_par}, {n_par}") });
    }
    if big_r.0 > r.0 || r.0 < 2 || big_r.0 < 2 {
        return Err(Error::InvalidParameter {
            what: format!("scales r={} R={} need R <= r and both >= 2 (4R, 4r must be scales)", r.0, big_r.0),
        });
    }
    let set = mu.support()?;
    let level = set.level();
    let ball1 = snap_ball_indices(level, 1);
    let ball4 = snap_ball_indices(level, 4);

    let mass_in = |window: ScaleWindow, thr: f64, ball: i64| -> Result<f64> {
        if thr < 1.0 {
            // every point qualifies: H is all of K
            let cells = set.cells_vec();
            return Ok(mu.mass_of_cells(cells.iter().filter(|&&c| in_ball(c, ball))));
        }
        let h = high_multiplicity_set(&set, theta, thr, window)?;
        let cells = h.cells_vec();
        Ok(mu.mass_of_cells(cells.iter().filter(|&&c| in_ball(c, ball))))
    };

    let lhs = mass_in(ScaleWindow::to_unit(r), c_big * n_par, ball1)?;
    // [4R, 5]: inner level R-2, outer radius 5 -> 8 = 2^3
    let w_coarse = ScaleWindow::new(Level(big_r.0 - 2), RadiusBound::Exp(-3))?;
    let rhs_coarse = mass_in(w_coarse, c_small * m_par, ball1)?;
    // [4r, 7R]: inner level r-2, outer radius 8R = 2^-(R-3)
    let w_fine = ScaleWindow::new(Level(r.0 - 2), RadiusBound::Exp(big_r.0 as i32 - 3))?;
    let rhs_fine = c_big * c_gamma * c_gamma * mass_in(w_fine, c_small * n_par / m_par, ball4)?;
    let holds = lhs <= rhs_coarse + rhs_fine + 1e-12;
    Ok(Prop3Outcome { lhs, rhs_coarse, rhs_fine, holds })
}
