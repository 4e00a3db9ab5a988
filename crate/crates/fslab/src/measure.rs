//! Weighted measures on dyadic cells.
//!
//! Weights are exact rationals whenever every input is a dyadic rational
//! (uniform measures, restrictions, convolutions of such), and `f64`
//! otherwise.  Entropy and norms are always computed in `f64`.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::grid::{Bounds, GridSet1D, GridSet2D, Level};
use crate::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Direction parameter: the dyadic rational `theta = num / 2^qlevel in [0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    num: i64,
    qlevel: u32,
}

impl Direction {
    pub fn new(num: i64, qlevel: u32) -> Result<Direction> {
        if qlevel > crate::grid::max_level() || num < 0 || num > (1i64 << qlevel) {
            return Err(Error::InvalidParameter {
                what: format!("direction {num}/2^{qlevel} outside [0,1] or grid too fine"),
            });
        }
        Ok(Direction { num, qlevel })
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn qlevel(&self) -> u32 {
        self.qlevel
    }

    pub fn theta(&self) -> f64 {
        self.num as f64 * 0.5f64.powi(self.qlevel as i32)
    }
}

#[derive(Clone, Debug)]
enum Weights {
    Exact(BTreeMap<i64, BigRational>),
    Approx(BTreeMap<i64, f64>),
}

/// A nonnegative measure on the level-`L` dyadic grid; zero-weight cells are
/// never stored.
#[derive(Clone, Debug)]
pub struct DeltaMeasure {
    level: Level,
    bounds: Bounds,
    weights: Weights,
}

impl DeltaMeasure {
    pub fn from_exact(level: Level, bounds: Bounds, weights: BTreeMap<i64, BigRational>) -> Result<DeltaMeasure> {
        for (&k, w) in &weights {
            if !bounds.contains_index(level, k) {
                return Err(Error::OutOfBounds { what: format!("measure cell {k} at level {level}") });
            }
            if w < &BigRational::zero() {
                return Err(Error::InvalidParameter { what: format!("negative weight at cell {k}") });
            }
        }
        let weights = weights.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        Ok(DeltaMeasure { level, bounds, weights: Weights::Exact(weights) })
    }

    pub fn from_f64(level: Level, bounds: Bounds, weights: BTreeMap<i64, f64>) -> Result<DeltaMeasure> {
        for (&k, &w) in &weights {
            if !bounds.contains_index(level, k) {
                return Err(Error::OutOfBounds { what: format!("measure cell {k} at level {level}") });
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidParameter { what: format!("bad weight {w} at cell {k}") });
            }
        }
        let weights = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        Ok(DeltaMeasure { level, bounds, weights: Weights::Approx(weights) })
    }

    /// Uniform probability measure on the cells of a nonempty grid set.
    pub fn uniform(set: &GridSet1D) -> Result<DeltaMeasure> {
        if set.is_empty() {
            return Err(Error::EmptyInput { what: "uniform measure on empty set".into() });
        }
        let w = BigRational::new(1.into(), (set.len() as i64).into());
        let weights = set.cells().iter().map(|&k| (k, w.clone())).collect();
        DeltaMeasure::from_exact(set.level(), set.bounds(), weights)
    }

    /// Point mass at one cell.
    pub fn point_mass(level: Level, bounds: Bounds, cell: i64) -> Result<DeltaMeasure> {
        let mut m = BTreeMap::new();
        m.insert(cell, BigRational::from_integer(1.into()));
        DeltaMeasure::from_exact(level, bounds, m)
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.weights, Weights::Exact(_))
    }

    pub fn support_len(&self) -> usize {
        match &self.weights {
            Weights::Exact(m) => m.len(),
            Weights::Approx(m) => m.len(),
        }
    }

    pub fn support(&self) -> GridSet1D {
        let cells: Vec<i64> = match &self.weights {
            Weights::Exact(m) => m.keys().copied().collect(),
            Weights::Approx(m) => m.keys().copied().collect(),
        };
        GridSet1D::new(self.level, self.bounds, cells).expect("support cells validated on construction")
    }

    pub fn weight_f64(&self, cell: i64) -> f64 {
        match &self.weights {
            Weights::Exact(m) => m.get(&cell).map(|w| w.to_f64().unwrap_or(0.0)).unwrap_or(0.0),
            Weights::Approx(m) => m.get(&cell).copied().unwrap_or(0.0),
        }
    }

    pub fn weight_exact(&self, cell: i64) -> Option<BigRational> {
        match &self.weights {
            Weights::Exact(m) => Some(m.get(&cell).cloned().unwrap_or_else(BigRational::zero)),
            Weights::Approx(_) => None,
        }
    }

    pub fn iter_f64(&self) -> Vec<(i64, f64)> {
        match &self.weights {
            Weights::Exact(m) => m.iter().map(|(&k, w)| (k, w.to_f64().unwrap_or(0.0))).collect(),
            Weights::Approx(m) => m.iter().map(|(&k, &w)| (k, w)).collect(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match &self.weights {
            Weights::Exact(m) => {
                let s: BigRational = m.values().sum();
                s.to_f64().unwrap_or(f64::NAN)
            }
            Weights::Approx(m) => m.values().sum(),
        }
    }

    pub fn total_mass_exact(&self) -> Option<BigRational> {
        match &self.weights {
            Weights::Exact(m) => Some(m.values().sum()),
            Weights::Approx(_) => None,
        }
    }

    pub fn is_probability(&self) -> bool {
        if let Some(m) = self.total_mass_exact() {
            return m == BigRational::from_integer(1.into());
        }
        (self.total_mass() - 1.0).abs() <= MASS_TOL
    }

    fn require_probability(&self) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::NotProbability { mass: self.total_mass() })
        }
    }

    /// Mass of the cells of `set` (levels must match).
    pub fn mass_of(&self, set: &GridSet1D) -> Result<f64> {
        if set.level() != self.level {
            return Err(Error::LevelMismatch { a: self.level.0, b: set.level().0 });
        }
        Ok(set.cells().iter().map(|&k| self.weight_f64(k)).sum())
    }

    /// Mass of the dyadic interval `[k·2^-l, (k+1)·2^-l)`.
    pub fn mass_of_interval(&self, l: Level, k: i64) -> f64 {
        let shift = self.level.0 - l.0;
        match &self.weights {
            Weights::Exact(m) => m
                .range((k << shift)..((k + 1) << shift))
                .map(|(_, w)| w.to_f64().unwrap_or(0.0))
                .sum(),
            Weights::Approx(m) => m.range((k << shift)..((k + 1) << shift)).map(|(_, &w)| w).sum(),
        }
    }

    /// Restriction to `set`, renormalised to a probability measure.
    pub fn restrict_normalize(&self, set: &GridSet1D) -> Result<DeltaMeasure> {
        if set.level() != self.level {
            return Err(Error::LevelMismatch { a: self.level.0, b: set.level().0 });
        }
        match &self.weights {
            Weights::Exact(m) => {
                let kept: BTreeMap<i64, BigRational> =
                    m.iter().filter(|(k, _)| set.contains(**k)).map(|(&k, w)| (k, w.clone())).collect();
                let mass: BigRational = kept.values().sum();
                if mass.is_zero() {
                    return Err(Error::NullRestriction);
                }
                let kept = kept.into_iter().map(|(k, w)| (k, w / &mass)).collect();
                DeltaMeasure::from_exact(self.level, self.bounds, kept)
            }
            Weights::Approx(m) => {
                let kept: BTreeMap<i64, f64> =
                    m.iter().filter(|(k, _)| set.contains(**k)).map(|(&k, &w)| (k, w)).collect();
                let mass: f64 = kept.values().sum();
                if mass <= 0.0 {
                    return Err(Error::NullRestriction);
                }
                let kept = kept.into_iter().map(|(k, w)| (k, w / mass)).collect();
                DeltaMeasure::from_f64(self.level, self.bounds, kept)
            }
        }
    }

    /// Shannon entropy (bits) with respect to the level-`target` dyadic
    /// partition.  Requires a probability measure.
    pub fn entropy(&self, target: Level) -> Result<f64> {
        self.require_probability()?;
        if target.0 > self.level.0 {
            return Err(Error::CannotRefine { from: self.level.0, to: target.0 });
        }
        let shift = self.level.0 - target.0;
        let mut acc: BTreeMap<i64, f64> = BTreeMap::new();
        for (k, w) in self.iter_f64() {
            *acc.entry(k >> shift).or_insert(0.0) += w;
        }
        Ok(acc.values().filter(|&&w| w > 0.0).map(|&w| -w * w.log2()).sum())
    }

    /// Conditional entropy `H(mu, fine | coarse)` computed from its
    /// definition: the mass-weighted entropies of the renormalised
    /// restrictions to coarse cells.  (Not via the chain rule, which is what
    /// the tests verify against.)
    pub fn conditional_entropy(&self, fine: Level, coarse: Level) -> Result<f64> {
        self.require_probability()?;
        if fine.0 > self.level.0 {
            return Err(Error::CannotRefine { from: self.level.0, to: fine.0 });
        }
        if coarse.0 > fine.0 {
            return Err(Error::InvalidParameter {
                what: format!("coarse level {coarse} finer than fine level {fine}"),
            });
        }
        let to_coarse = self.level.0 - coarse.0;
        let to_fine = self.level.0 - fine.0;
        // coarse cell -> (fine cell -> mass)
        let mut groups: BTreeMap<i64, BTreeMap<i64, f64>> = BTreeMap::new();
        for (k, w) in self.iter_f64() {
            *groups.entry(k >> to_coarse).or_default().entry(k >> to_fine).or_insert(0.0) += w;
        }
        let mut total = 0.0;
        for fine_masses in groups.values() {
            let mass: f64 = fine_masses.values().sum();
            if mass <= 0.0 {
                continue;
            }
            let h: f64 = fine_masses
                .values()
                .map(|&w| {
                    let p = w / mass;
                    if p > 0.0 {
                        -p * p.log2()
                    } else {
                        0.0
                    }
                })
                .sum();
            total += mass * h;
        }
        Ok(total)
    }

    /// Discrete L2 norm `(sum of squared point masses)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        match &self.weights {
            Weights::Exact(m) => {
                let s: BigRational = m.values().map(|w| w * w).sum();
                s.to_f64().unwrap_or(f64::NAN).sqrt()
            }
            Weights::Approx(m) => m.values().map(|w| w * w).sum::<f64>().sqrt(),
        }
    }

    /// Pushforward under `y -> floor(theta * y)` on the grid (the rounded
    /// dilation used to turn projections into convolutions).
    pub fn pushforward_scale_floor(&self, theta: Direction) -> DeltaMeasure {
        let q = theta.qlevel();
        let a = theta.num();
        let map_cell = |k: i64| -> i64 { (a * k) >> q };
        match &self.weights {
            Weights::Exact(m) => {
                let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
                for (&k, w) in m {
                    let e = out.entry(map_cell(k)).or_insert_with(BigRational::zero);
                    *e += w;
                }
                DeltaMeasure { level: self.level, bounds: self.bounds, weights: Weights::Exact(out) }
            }
            Weights::Approx(m) => {
                let mut out: BTreeMap<i64, f64> = BTreeMap::new();
                for (&k, &w) in m {
                    *out.entry(map_cell(k)).or_insert(0.0) += w;
                }
                DeltaMeasure { level: self.level, bounds: self.bounds, weights: Weights::Approx(out) }
            }
        }
    }

    /// As [`Self::pushforward_scale_floor`], but the image lives on a finer
    /// grid: `y -> floor(theta * y)` rounded to level `target >= level`.
    pub fn pushforward_scale_floor_to(&self, theta: Direction, target: Level) -> Result<DeltaMeasure> {
        if target.0 < self.level.0 {
            return Err(Error::CannotRefine { from: target.0, to: self.level.0 });
        }
        let up = target.0 - self.level.0;
        let q = theta.qlevel();
        let a = theta.num();
        let map_cell = |k: i64| -> i64 { ((a * k) << up) >> q };
        match &self.weights {
            Weights::Exact(m) => {
                let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
                for (&k, w) in m {
                    let e = out.entry(map_cell(k)).or_insert_with(BigRational::zero);
                    *e += w;
                }
                Ok(DeltaMeasure { level: target, bounds: self.bounds, weights: Weights::Exact(out) })
            }
            Weights::Approx(m) => {
                let mut out: BTreeMap<i64, f64> = BTreeMap::new();
                for (&k, &w) in m {
                    *out.entry(map_cell(k)).or_insert(0.0) += w;
                }
                Ok(DeltaMeasure { level: target, bounds: self.bounds, weights: Weights::Approx(out) })
            }
        }
    }

    /// Convolution `(mu * nu)(z) = sum over x + y = z of mu(x) nu(y)`.
    ///
    /// Exact inputs convolve exactly by direct summation; float inputs
    /// switch to an FFT over dense arrays once the pairwise work exceeds
    /// `2^15` products.
    pub fn convolve(&self, other: &DeltaMeasure) -> Result<DeltaMeasure> {
        if self.level != other.level {
            return Err(Error::LevelMismatch { a: self.level.0, b: other.level.0 });
        }
        let out_bounds = Bounds::new(
            self.bounds.lo.saturating_add(other.bounds.lo),
            self.bounds.hi.saturating_add(other.bounds.hi),
        );
        match (&self.weights, &other.weights) {
            (Weights::Exact(a), Weights::Exact(b)) => {
                let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
                for (&ka, wa) in a {
                    for (&kb, wb) in b {
                        let e = out.entry(ka + kb).or_insert_with(BigRational::zero);
                        *e += wa * wb;
                    }
                }
                Ok(DeltaMeasure { level: self.level, bounds: out_bounds, weights: Weights::Exact(out) })
            }
            _ => {
                let a = self.iter_f64();
                let b = other.iter_f64();
                let out = if a.len() * b.len() <= (1 << 15) {
                    convolve_direct_f64(&a, &b)
                } else {
                    convolve_fft_f64(&a, &b)
                };
                Ok(DeltaMeasure { level: self.level, bounds: out_bounds, weights: Weights::Approx(out) })
            }
        }
    }

    /// Forget exactness (used by pipelines that continue in floats).
    pub fn to_approx(&self) -> DeltaMeasure {
        DeltaMeasure {
            level: self.level,
            bounds: self.bounds,
            weights: Weights::Approx(self.iter_f64().into_iter().collect()),
        }
    }
}

pub(crate) fn convolve_direct_f64(a: &[(i64, f64)], b: &[(i64, f64)]) -> BTreeMap<i64, f64> {
    let mut out: BTreeMap<i64, f64> = BTreeMap::new();
    for &(ka, wa) in a {
        for &(kb, wb) in b {
            *out.entry(ka + kb).or_insert(0.0) += wa * wb;
        }
    }
    out
}

pub(crate) fn convolve_fft_f64(a: &[(i64, f64)], b: &[(i64, f64)]) -> BTreeMap<i64, f64> {
    let (amin, amax) = (a[0].0, a[a.len() - 1].0);
    let (bmin, bmax) = (b[0].0, b[b.len() - 1].0);
    let out_len = ((amax - amin) + (bmax - bmin) + 1) as usize;
    let n = out_len.next_power_of_two();
    let mut fa = vec![Complex::new(0.0, 0.0); n];
    let mut fb = vec![Complex::new(0.0, 0.0); n];
    for &(k, w) in a {
        fa[(k - amin) as usize].re = w;
    }
    for &(k, w) in b {
        fb[(k - bmin) as usize].re = w;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y;
    }
    let inv = planner.plan_fft_inverse(n);
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    let mass_a: f64 = a.iter().map(|&(_, w)| w).sum();
    let mass_b: f64 = b.iter().map(|&(_, w)| w).sum();
    let floor = (mass_a * mass_b).max(1.0) * 1e-13;
    let mut out = BTreeMap::new();
    for (i, c) in fa.iter().enumerate().take(out_len) {
        let w = c.re * scale;
        if w > floor {
            out.insert(amin + bmin + i as i64, w);
        }
    }
    out
}

/// Product measure `mu_A x mu_B` on the 2D grid.  The 2D measures in scope
/// are always products, so the representation stays lazy.
#[derive(Clone, Debug)]
pub struct ProductMeasure2 {
    pub a: DeltaMeasure,
    pub b: DeltaMeasure,
}

impl ProductMeasure2 {
    pub fn new(a: DeltaMeasure, b: DeltaMeasure) -> Result<ProductMeasure2> {
        if a.level() != b.level() {
            return Err(Error::LevelMismatch { a: a.level().0, b: b.level().0 });
        }
        Ok(ProductMeasure2 { a, b })
    }

    pub fn level(&self) -> Level {
        self.a.level()
    }

    pub fn total_mass(&self) -> f64 {
        self.a.total_mass() * self.b.total_mass()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= MASS_TOL
    }

    pub fn support(&self) -> Result<GridSet2D> {
        GridSet2D::product(self.a.support(), self.b.support())
    }

    pub fn mass_of_cells<'c>(&self, cells: impl IntoIterator<Item = &'c (i64, i64)>) -> f64 {
        cells.into_iter().map(|&(i, j)| self.a.weight_f64(i) * self.b.weight_f64(j)).sum()
    }

    pub fn mass_of(&self, set: &GridSet2D) -> Result<f64> {
        if set.level() != self.level() {
            return Err(Error::LevelMismatch { a: self.level().0, b: set.level().0 });
        }
        match set {
            GridSet2D::Product { a, b } => Ok(self.a.mass_of(a)? * self.b.mass_of(b)?),
            GridSet2D::Explicit { cells, .. } => Ok(self.mass_of_cells(cells.iter())),
        }
    }

    /// Pushforward under the grid-rounded projection
    /// `(x, y) -> [x] + [theta y]` (floor rounding to the measure's grid).
    ///
    /// For a product measure this factors exactly: it equals the convolution
    /// of `mu_A` with the pushforward of `mu_B` under `y -> [theta y]`.
    /// This method computes it DIRECTLY from the definition; callers wanting
    /// the convolution route compose `pushforward_scale_floor` + `convolve`.
    pub fn push_project(&self, theta: Direction) -> Result<DeltaMeasure> {
        let q = theta.qlevel();
        let tnum = theta.num();
        let out_bounds = Bounds::new(
            self.a.bounds().lo.saturating_add(self.b.bounds().lo.min(0)),
            self.a.bounds().hi.saturating_add(self.b.bounds().hi.max(0)),
        );
        match (&self.a.weights, &self.b.weights) {
            (Weights::Exact(wa), Weights::Exact(wb)) => {
                let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
                for (&i, wi) in wa {
                    for (&j, wj) in wb {
                        let z = i + ((tnum * j) >> q);
                        let e = out.entry(z).or_insert_with(BigRational::zero);
                        *e += wi * wj;
                    }
                }
                Ok(DeltaMeasure { level: self.level(), bounds: out_bounds, weights: Weights::Exact(out) })
            }
            _ => {
                let wa = self.a.iter_f64();
                let wb = self.b.iter_f64();
                let mut out: BTreeMap<i64, f64> = BTreeMap::new();
                for &(i, wi) in &wa {
                    for &(j, wj) in &wb {
                        let z = i + ((tnum * j) >> q);
                        *out.entry(z).or_insert(0.0) += wi * wj;
                    }
                }
                Ok(DeltaMeasure { level: self.level(), bounds: out_bounds, weights: Weights::Approx(out) })
            }
        }
    }
}
