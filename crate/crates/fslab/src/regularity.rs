//! Generators for the standard example sets and exhaustive checkers for
//! Ahlfors-regularity and Frostman conditions.
//!
//! The checkers test dyadic scales only, with "balls" snapped to the grid:
//! the ball of radius `2^-l` around a cell is its level-`l` dyadic ancestor
//! interval.  Euclidean balls differ from this by bounded overlap factors,
//! which the regularity constant absorbs.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Bounds, GridSet1D, Level};
use crate::measure::DeltaMeasure;
use crate::{Error, Result};

/// Exponent/constant pair for a regularity or Frostman condition.
#[derive(Clone, Copy, Debug)]
pub struct RegularityParams {
    pub exponent: f64,
    pub constant: f64,
}

impl RegularityParams {
    pub fn new(exponent: f64, constant: f64) -> Result<RegularityParams> {
        if !(0.0..=2.0).contains(&exponent) || !exponent.is_finite() {
            return Err(Error::InvalidParameter { what: format!("exponent {exponent}") });
        }
        if constant.is_nan() || constant < 1.0 || !constant.is_finite() {
            return Err(Error::InvalidParameter { what: format!("constant {constant} < 1") });
        }
        Ok(RegularityParams { exponent, constant })
    }
}

/// Where a regularity check attains its worst ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityWitness {
    /// Level-`big_r` ancestor interval index realising the worst ratio.
    pub center: i64,
    pub r: Level,
    pub big_r: Level,
}

#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub satisfied: bool,
    pub worst_ratio: f64,
    pub witness: Option<RegularityWitness>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// `N_r(K ∩ B(x, R)) <= C (R/r)^alpha` over all centres and scale pairs.
    SetUpper,
    /// `mu(B(x, r)) <= C r^tau` at every scale occurring in the pair list.
    FrostmanUpper,
}

/// All dyadic scale pairs `(r, R)` with `R` no finer than `r`, down to the
/// given level.
pub fn all_scale_pairs(level: Level) -> Vec<(Level, Level)> {
    let mut out = Vec::new();
    for r in 0..=level.0 {
        for big in 0..=r {
            out.push((Level(r), Level(big)));
        }
    }
    out
}

/// Exhaustive verification of a regularity condition over the given dyadic
/// scale pairs, centres snapped to dyadic ancestors of the subject's cells.
pub fn check_regularity(
    set: &GridSet1D,
    measure: Option<&DeltaMeasure>,
    params: &RegularityParams,
    mode: CheckMode,
    scales: &[(Level, Level)],
) -> Result<RegularityReport> {
    if set.is_empty() {
        return Err(Error::EmptyInput { what: "regularity check on empty set".into() });
    }
    let mut worst: f64 = 0.0;
    let mut witness = None;
    match mode {
        CheckMode::SetUpper => {
            for &(r, big) in scales {
                if r.0 > set.level().0 || big.0 > r.0 {
                    return Err(Error::InvalidParameter {
                        what: format!("scale pair ({r}, {big}) invalid for level {}", set.level()),
                    });
                }
                let denom = 2f64.powf((r.0 - big.0) as f64 * params.exponent);
                let fine = set.covering_cells(r)?;
                let shift = r.0 - big.0;
                let mut count = 0usize;
                let mut prev: Option<i64> = None;
                for &c in fine.cells() {
                    let anc = c >> shift;
                    if prev == Some(anc) {
                        count += 1;
                    } else {
                        if let Some(p) = prev {
                            note_worst(&mut worst, &mut witness, count as f64 / denom, p, r, big);
                        }
                        prev = Some(anc);
                        count = 1;
                    }
                }
                if let Some(p) = prev {
                    note_worst(&mut worst, &mut witness, count as f64 / denom, p, r, big);
                }
            }
        }
        CheckMode::FrostmanUpper => {
            let mu = measure.ok_or_else(|| Error::InvalidParameter {
                what: "Frostman check requires a measure".into(),
            })?;
            if mu.level() != set.level() {
                return Err(Error::LevelMismatch { a: mu.level().0, b: set.level().0 });
            }
            let mut levels: Vec<Level> = scales.iter().flat_map(|&(r, big)| [r, big]).collect();
            levels.sort_unstable();
            levels.dedup();
            for l in levels {
                let denom = 2f64.powf(-(l.0 as f64) * params.exponent);
                let shift = mu.level().0 - l.0;
                let mut masses: BTreeMap<i64, f64> = BTreeMap::new();
                for (k, w) in mu.iter_f64() {
                    *masses.entry(k >> shift).or_insert(0.0) += w;
                }
                for (anc, m) in masses {
                    note_worst(&mut worst, &mut witness, m / denom, anc, l, l);
                }
            }
        }
    }
    Ok(RegularityReport { satisfied: worst <= params.constant, worst_ratio: worst, witness })
}

fn note_worst(
    worst: &mut f64,
    witness: &mut Option<RegularityWitness>,
    ratio: f64,
    center: i64,
    r: Level,
    big_r: Level,
) {
    if ratio > *worst {
        *worst = ratio;
        *witness = Some(RegularityWitness { center, r, big_r });
    }
}

/// Regularity check for a product subject `A x B` with the product
/// measure: per scale pair the worst ratio over centre squares factors
/// into the two axis maxima (the exponent is the sum of the nominal axis
/// dimensions), so the product report is exact.
pub fn check_product_regularity(
    a: (&GridSet1D, Option<&DeltaMeasure>),
    b: (&GridSet1D, Option<&DeltaMeasure>),
    params: &RegularityParams,
    mode: CheckMode,
    scales: &[(Level, Level)],
) -> Result<RegularityReport> {
    // reduce to one probe per scale pair (set mode) or per level (Frostman
    // mode), so the per-axis maxima being multiplied always refer to the
    // same scales
    let probes: Vec<(Level, Level)> = match mode {
        CheckMode::SetUpper => scales.to_vec(),
        CheckMode::FrostmanUpper => {
            let mut levels: Vec<Level> = scales.iter().flat_map(|&(r, big)| [r, big]).collect();
            levels.sort_unstable();
            levels.dedup();
            levels.into_iter().map(|l| (l, l)).collect()
        }
    };
    let raw = RegularityParams::new(0.0, f64::MAX)?;
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for &pair in &probes {
        let ra = check_regularity(a.0, a.1, &raw, mode, &[pair])?;
        let rb = check_regularity(b.0, b.1, &raw, mode, &[pair])?;
        let denom = match mode {
            CheckMode::SetUpper => 2f64.powf((pair.0 .0 - pair.1 .0) as f64 * params.exponent),
            CheckMode::FrostmanUpper => 2f64.powf(-(pair.0 .0 as f64) * params.exponent),
        };
        let ratio = ra.worst_ratio * rb.worst_ratio / denom;
        if ratio > worst {
            worst = ratio;
            witness = ra.witness.map(|w| RegularityWitness { center: w.center, ..w });
        }
    }
    Ok(RegularityReport { satisfied: worst <= params.constant, worst_ratio: worst, witness })
}

/// Smallest constant for which the check passes, located by doubling and
/// bisection to 1e-3 relative precision.
pub fn minimal_regularity_constant(
    set: &GridSet1D,
    measure: Option<&DeltaMeasure>,
    exponent: f64,
    mode: CheckMode,
    scales: &[(Level, Level)],
) -> Result<f64> {
    let passes = |c: f64| -> Result<bool> {
        let params = RegularityParams::new(exponent, c.max(1.0))?;
        Ok(check_regularity(set, measure, &params, mode, scales)?.satisfied)
    };
    let mut hi = 1.0f64;
    while !passes(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter { what: "no regularity constant below 1e12".into() });
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1.0 {
        return Ok(1.0);
    }
    while (hi - lo) / hi > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Iterated arithmetic-progression Cantor set: `branches` intervals of
/// length `2^-contraction` starting at multiples of `gap * 2^-contraction`
/// (shifted by `offset` cells), iterated to the given depth, together with
/// its uniform natural measure.  Nominal dimension `log2(branches) /
/// contraction`.
pub fn gen_self_similar(
    branches: u64,
    gap: u64,
    contraction: u32,
    depth: u32,
    offset: u64,
) -> Result<(GridSet1D, DeltaMeasure)> {
    if branches == 0 || depth == 0 {
        return Err(Error::InvalidParameter { what: "branches and depth must be positive".into() });
    }
    if branches > 1 && gap == 0 {
        return Err(Error::InvalidParameter { what: "overlapping branches (gap = 0)".into() });
    }
    let span = offset + (branches - 1) * gap;
    if span >= (1u64 << contraction) {
        return Err(Error::InvalidParameter {
            what: format!("branches do not fit: offset + (b-1)*gap = {span} >= 2^{contraction}"),
        });
    }
    let level = Level::new(contraction * depth)?;
    let mut cells: Vec<i64> = vec![0];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(cells.len() * branches as usize);
        for &c in &cells {
            let base = (c << contraction) + offset as i64;
            for b in 0..branches as i64 {
                next.push(base + b * gap as i64);
            }
        }
        cells = next;
    }
    let set = GridSet1D::new(level, Bounds::AMBIENT, cells)?;
    let measure = DeltaMeasure::uniform(&set)?;
    Ok((set, measure))
}

/// The arithmetic-progression pair `A = {k/n : 1 <= k <= n}` and
/// `E = {k/n^(2 kappa) : 1 <= k <= n^(2 kappa)}` as grid sets at level
/// `log2(n^2)`, for `n = 2^t` and rational `kappa` with `n^(2 kappa)`
/// an integer.
pub fn gen_ap_family(n: u64, kappa_num: u32, kappa_den: u32) -> Result<(GridSet1D, GridSet1D)> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::InvalidParameter { what: format!("n = {n} is not a power of two") });
    }
    let t = n.trailing_zeros();
    if kappa_num == 0 || kappa_den == 0 {
        return Err(Error::InvalidParameter { what: "kappa must be positive".into() });
    }
    // n^(2 kappa) = 2^(2 t kappa_num / kappa_den)
    let num = 2 * t * kappa_num;
    if !num.is_multiple_of(kappa_den) {
        return Err(Error::InvalidParameter {
            what: format!("n^(2 kappa) = 2^({num}/{kappa_den}) is not an integer"),
        });
    }
    let e2k = num / kappa_den;
    if e2k > 2 * t {
        return Err(Error::InvalidParameter { what: "kappa > 1/2 not admissible here".into() });
    }
    let level = Level::new(2 * t)?;
    let a_cells: Vec<i64> = (1..=n as i64).map(|k| k * n as i64).collect();
    let e_count = 1i64 << e2k;
    let e_gap = 1i64 << (2 * t - e2k);
    let e_cells: Vec<i64> = (1..=e_count).map(|k| k * e_gap).collect();
    Ok((
        GridSet1D::new(level, Bounds::AMBIENT, a_cells)?,
        GridSet1D::new(level, Bounds::AMBIENT, e_cells)?,
    ))
}

/// Dyadic percolation: starting from `[0,1)`, each child cell survives
/// independently with the given probability.  Deterministic per seed.
pub fn gen_random_cantor(level: Level, survival: f64, seed: u64) -> Result<GridSet1D> {
    if !(survival > 0.0 && survival <= 1.0) {
        return Err(Error::InvalidParameter { what: format!("survival probability {survival}") });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<i64> = vec![0];
    for _ in 0..level.0 {
        let mut next = Vec::with_capacity(cells.len() * 2);
        for &c in &cells {
            for child in [2 * c, 2 * c + 1] {
                if survival >= 1.0 || rng.random_bool(survival) {
                    next.push(child);
                }
            }
        }
        cells = next;
    }
    GridSet1D::new(level, Bounds::AMBIENT, cells)
}

/// Dyadic percolation inside the cells of a carrier set: keeps each cell of
/// `carrier` independently with the given probability (used to build heavy
/// random subsets of structured sets).
pub fn random_subset(carrier: &GridSet1D, keep: f64, seed: u64) -> Result<GridSet1D> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::InvalidParameter { what: format!("keep probability {keep}") });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
    let cells: Vec<i64> =
        carrier.cells().iter().copied().filter(|_| rng.random_bool(keep)).collect();
    if cells.is_empty() {
        // deterministic fallback: keep the first cell so subsets are never empty
        return GridSet1D::new(carrier.level(), carrier.bounds(), vec![carrier.cells()[0]]);
    }
    GridSet1D::new(carrier.level(), carrier.bounds(), cells)
}
