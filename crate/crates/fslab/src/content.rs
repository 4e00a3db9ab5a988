//! Resolution-limited dyadic Hausdorff content and maximal Frostman
//! measures, linked by min-cut/max-flow duality on the dyadic tree.
//!
//! For a rational exponent `tau = p/q` every interval weight is
//! `2^(-l*p/q)`, so all values produced by the tree recursion live in the
//! ring of dyadic-rational combinations of `2^(-j/q)`, `0 <= j < q`.
//! [`AlgebraicDyadic`] represents such values exactly; comparisons resolve
//! by coefficient signs when possible and otherwise by rational interval
//! refinement around the q-th root of 2 (the powers of `2^(1/q)` are
//! linearly independent over the rationals, so a nonzero difference always
//! separates at finite precision).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Mutex;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::grid::GridSet1D;
use crate::measure::DeltaMeasure;
use crate::{Error, Result};

/// Content exponent.  `Rational` runs the exact engine, `Float` the
/// `f64` engine with a `1e-12` comparison guard.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tau {
    Rational { num: u32, den: u32 },
    Float(f64),
}

impl Tau {
    pub fn rational(num: u32, den: u32) -> Result<Tau> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidParameter { what: format!("tau = {num}/{den} outside (0, 1]") });
        }
        let g = num_integer::gcd(num, den);
        Ok(Tau::Rational { num: num / g, den: den / g })
    }

    pub fn float(t: f64) -> Result<Tau> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter { what: format!("tau = {t} outside (0, 1]") });
        }
        Ok(Tau::Float(t))
    }

    /// Parse "p/q" as exact rational, anything else as a float.
    pub fn parse(s: &str) -> Result<Tau> {
        if let Some((p, q)) = s.split_once('/') {
            let p: u32 = p.trim().parse().map_err(|_| Error::InvalidParameter {
                what: format!("tau numerator in {s:?}"),
            })?;
            let q: u32 = q.trim().parse().map_err(|_| Error::InvalidParameter {
                what: format!("tau denominator in {s:?}"),
            })?;
            Tau::rational(p, q)
        } else {
            let t: f64 = s.trim().parse().map_err(|_| Error::InvalidParameter {
                what: format!("tau value in {s:?}"),
            })?;
            Tau::float(t)
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Tau::Rational { num, den } => num as f64 / den as f64,
            Tau::Float(t) => t,
        }
    }

    /// Weight `|I|^tau = 2^(-l*tau)` of a dyadic interval of length `2^-l`.
    fn weight(&self, l: i64) -> Scalar {
        match *self {
            Tau::Rational { num, den } => Scalar::Exact(AlgebraicDyadic::power(l * num as i64, den)),
            Tau::Float(t) => Scalar::Approx((-(l as f64) * t).exp2()),
        }
    }
}

impl std::fmt::Display for Tau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Tau::Rational { num, den } => write!(f, "{num}/{den}"),
            Tau::Float(t) => write!(f, "{t}"),
        }
    }
}

/// Exact element `sum over j of c_j * 2^(-j/q)` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraicDyadic {
    q: u32,
    coeffs: Vec<BigRational>,
}

impl AlgebraicDyadic {
    pub fn zero(q: u32) -> AlgebraicDyadic {
        AlgebraicDyadic { q, coeffs: vec![BigRational::zero(); q as usize] }
    }

    /// The value `2^(-e/q)` for a (possibly negative) integer exponent `e`.
    pub fn power(e: i64, q: u32) -> AlgebraicDyadic {
        let qi = q as i64;
        let j = e.rem_euclid(qi);
        let int_part = (e - j) / qi; // 2^(-e/q) = 2^(-int_part) * 2^(-j/q)
        let mut coeffs = vec![BigRational::zero(); q as usize];
        let two = BigInt::from(2);
        coeffs[j as usize] = if int_part >= 0 {
            BigRational::new(BigInt::one(), two.pow(int_part as u32))
        } else {
            BigRational::from_integer(two.pow((-int_part) as u32))
        };
        AlgebraicDyadic { q, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add_assign(&mut self, other: &AlgebraicDyadic) {
        debug_assert_eq!(self.q, other.q);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn to_f64(&self) -> f64 {
        let q = self.q as f64;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c.to_f64().unwrap_or(f64::NAN) * (-(j as f64) / q).exp2())
            .sum()
    }

    pub fn cmp_value(&self, other: &AlgebraicDyadic) -> Ordering {
        debug_assert_eq!(self.q, other.q);
        let diff: Vec<BigRational> =
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        sign_of_combination(&diff, self.q)
    }
}

/// Sign of `sum c_j * 2^(-j/q)`.
fn sign_of_combination(coeffs: &[BigRational], q: u32) -> Ordering {
    let any_pos = coeffs.iter().any(|c| c.is_positive());
    let any_neg = coeffs.iter().any(|c| c.is_negative());
    match (any_pos, any_neg) {
        (false, false) => return Ordering::Equal,
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        (true, true) => {}
    }
    // Interval refinement.  2^(-j/q) lies in [a/2^K, (a+1)/2^K] with
    // a = floor((2^(qK-j))^(1/q)); a nonzero combination separates at some
    // finite K because the powers of 2^(1/q) are independent over Q.
    let mut k = 32u32;
    loop {
        let roots = root_approximations(q, k);
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        let denom = BigInt::one() << k;
        for (j, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let a = BigRational::new(roots[j].clone().into(), denom.clone());
            let b = BigRational::new(BigInt::from(roots[j].clone()) + 1, denom.clone());
            if c.is_positive() {
                lo += c * &a;
                hi += c * &b;
            } else {
                lo += c * &b;
                hi += c * &a;
            }
        }
        if lo.is_positive() {
            return Ordering::Greater;
        }
        if hi.is_negative() {
            return Ordering::Less;
        }
        k *= 2;
        assert!(k <= 1 << 16, "interval refinement failed to separate a nonzero algebraic value");
    }
}

/// Cached floor approximations of `2^(K - j/q)` for `j = 0..q`.
type RootCache = Mutex<BTreeMap<(u32, u32), Vec<BigUint>>>;

fn root_approximations(q: u32, k: u32) -> Vec<BigUint> {
    static CACHE: OnceLock<RootCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((q, k))
        .or_insert_with(|| {
            (0..q)
                .map(|j| {
                    let pow: BigUint = BigUint::one() << (q * k - j);
                    pow.nth_root(q)
                })
                .collect()
        })
        .clone()
}

/// A content value: exact when `tau` is rational, guarded float otherwise.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(AlgebraicDyadic),
    Approx(f64),
}

impl Scalar {
    const GUARD: f64 = 1e-12;

    pub fn zero_like(tau: &Tau) -> Scalar {
        match *tau {
            Tau::Rational { den, .. } => Scalar::Exact(AlgebraicDyadic::zero(den)),
            Tau::Float(_) => Scalar::Approx(0.0),
        }
    }

    pub fn add_assign(&mut self, other: &Scalar) {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.add_assign(b),
            (Scalar::Approx(a), Scalar::Approx(b)) => *a += b,
            _ => panic!("mixed exact/approx content arithmetic"),
        }
    }

    /// `self <= other`, up to the float guard in approx mode.
    pub fn le(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp_value(b) != Ordering::Greater,
            (Scalar::Approx(a), Scalar::Approx(b)) => *a <= *b + Scalar::GUARD,
            _ => panic!("mixed exact/approx content arithmetic"),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(a) => a.to_f64(),
            Scalar::Approx(x) => *x,
        }
    }

    pub fn eq_value(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp_value(b) == Ordering::Equal,
            (Scalar::Approx(a), Scalar::Approx(b)) => (a - b).abs() <= 1e-10,
            _ => false,
        }
    }
}

/// A dyadic interval `[k*2^-l, (k+1)*2^-l)`; `l` may be negative (long
/// intervals are admissible cover elements).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DyadicInterval {
    pub level: i64,
    pub index: i64,
}

/// Exact value of the resolution-limited dyadic Hausdorff content together
/// with an optimal cover.
#[derive(Clone, Debug)]
pub struct ContentValue {
    pub value: Scalar,
    pub tau: Tau,
    pub cover: Vec<DyadicInterval>,
}

impl ContentValue {
    pub fn value_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

struct Dp<'a> {
    cells: &'a [i64],
    leaf_level: i64,
    tau: Tau,
}

impl Dp<'_> {
    /// Minimal cover cost of the cells in `cells[lo..hi]`, all of which lie
    /// below the interval `(level, index)`.
    fn solve(&self, level: i64, index: i64, lo: usize, hi: usize) -> (Scalar, Vec<DyadicInterval>) {
        debug_assert!(lo < hi);
        let own = self.tau.weight(level);
        if level == self.leaf_level {
            return (own, vec![DyadicInterval { level, index }]);
        }
        // split cells into the two children at level+1
        let shift = (self.leaf_level - level - 1) as u32;
        let left_child = 2 * index;
        let mid = self.cells[lo..hi].partition_point(|&c| (c >> shift) == left_child) + lo;
        let mut parts: Vec<(Scalar, Vec<DyadicInterval>)> = Vec::with_capacity(2);
        if mid > lo {
            parts.push(self.solve(level + 1, left_child, lo, mid));
        }
        if hi > mid {
            parts.push(self.solve(level + 1, left_child + 1, mid, hi));
        }
        let mut sum = Scalar::zero_like(&self.tau);
        for (v, _) in &parts {
            sum.add_assign(v);
        }
        if own.le(&sum) {
            (own, vec![DyadicInterval { level, index }])
        } else {
            let cover = parts.into_iter().flat_map(|(_, c)| c).collect();
            (sum, cover)
        }
    }
}

/// Smallest dyadic interval containing all the (same-sign) cells.
fn dyadic_hull(level: i64, mut kmin: i64, mut kmax: i64) -> DyadicInterval {
    let mut l = level;
    while kmin != kmax {
        kmin >>= 1;
        kmax >>= 1;
        l -= 1;
    }
    DyadicInterval { level: l, index: kmin }
}

/// Resolution-`2^-L` dyadic Hausdorff content `H^tau` of a grid set:
/// the minimum of `sum |I|^tau` over covers of the set by dyadic intervals
/// of length at least the grid mesh, computed exactly by the tree recursion
/// `content(I) = min(|I|^tau, content(left) + content(right))`.
pub fn dyadic_content(set: &GridSet1D, tau: Tau) -> Result<ContentValue> {
    if set.is_empty() {
        return Ok(ContentValue { value: Scalar::zero_like(&tau), tau, cover: Vec::new() });
    }
    let cells = set.cells();
    let leaf_level = set.level().0 as i64;
    let dp = Dp { cells, leaf_level, tau };
    let mut value = Scalar::zero_like(&tau);
    let mut cover = Vec::new();
    // Dyadic intervals never straddle 0, so negative and nonnegative cells
    // are covered independently.
    let split = cells.partition_point(|&c| c < 0);
    for (lo, hi) in [(0usize, split), (split, cells.len())] {
        if lo >= hi {
            continue;
        }
        let hull = dyadic_hull(leaf_level, cells[lo], cells[hi - 1]);
        let (v, c) = dp.solve(hull.level, hull.index, lo, hi);
        value.add_assign(&v);
        cover.extend(c);
    }
    // the recursion emits intervals left to right, so the cover is already
    // in spatial order
    Ok(ContentValue { value, tau, cover })
}

/// Result of the maximal-Frostman construction.
#[derive(Clone, Debug)]
pub struct FrostmanMeasure {
    /// Measure on the set with `mu(I) <= |I|^tau` for every admissible
    /// dyadic interval, of maximal total mass.  Weights are floats; the
    /// exact total mass is reported separately.
    pub measure: DeltaMeasure,
    /// Exact maximal mass; equals the dyadic content of the set.
    pub mass: Scalar,
}

struct FrostmanNode {
    interval: DyadicInterval,
    cap: Scalar,
    children: Vec<FrostmanNode>,
}

fn build_caps(dp: &Dp<'_>, level: i64, index: i64, lo: usize, hi: usize) -> FrostmanNode {
    let own = dp.tau.weight(level);
    if level == dp.leaf_level {
        return FrostmanNode { interval: DyadicInterval { level, index }, cap: own, children: Vec::new() };
    }
    let shift = (dp.leaf_level - level - 1) as u32;
    let left_child = 2 * index;
    let mid = dp.cells[lo..hi].partition_point(|&c| (c >> shift) == left_child) + lo;
    let mut children = Vec::with_capacity(2);
    if mid > lo {
        children.push(build_caps(dp, level + 1, left_child, lo, mid));
    }
    if hi > mid {
        children.push(build_caps(dp, level + 1, left_child + 1, mid, hi));
    }
    let mut sum = Scalar::zero_like(&dp.tau);
    for c in &children {
        sum.add_assign(&c.cap);
    }
    let cap = if own.le(&sum) { own } else { sum };
    FrostmanNode { interval: DyadicInterval { level, index }, cap, children }
}

fn assign_mass(node: &FrostmanNode, mass: f64, out: &mut BTreeMap<i64, f64>) {
    if node.children.is_empty() {
        if mass > 0.0 {
            out.insert(node.interval.index, mass);
        }
        return;
    }
    let total: f64 = node.children.iter().map(|c| c.cap.to_f64()).sum();
    if total <= 0.0 {
        return;
    }
    for c in &node.children {
        assign_mass(c, mass * (c.cap.to_f64() / total), out);
    }
}

/// Maximal measure on `set` subject to `mu(I) <= |I|^tau` for all dyadic
/// intervals no finer than the grid: bottom-up capacities
/// `cap(I) = min(|I|^tau, sum of child caps)`, then top-down proportional
/// mass assignment.  Normalising the result yields a
/// `(tau, 1/mass)`-Frostman probability measure.
pub fn max_frostman(set: &GridSet1D, tau: Tau) -> Result<FrostmanMeasure> {
    if set.is_empty() {
        return Err(Error::EmptyInput { what: "max_frostman on empty set".into() });
    }
    let cells = set.cells();
    let leaf_level = set.level().0 as i64;
    let dp = Dp { cells, leaf_level, tau };
    let split = cells.partition_point(|&c| c < 0);
    let mut mass = Scalar::zero_like(&tau);
    let mut weights: BTreeMap<i64, f64> = BTreeMap::new();
    for (lo, hi) in [(0usize, split), (split, cells.len())] {
        if lo >= hi {
            continue;
        }
        let hull = dyadic_hull(leaf_level, cells[lo], cells[hi - 1]);
        let root = build_caps(&dp, hull.level, hull.index, lo, hi);
        mass.add_assign(&root.cap);
        assign_mass(&root, root.cap.to_f64(), &mut weights);
    }
    let measure = DeltaMeasure::from_f64(set.level(), set.bounds(), weights)?;
    Ok(FrostmanMeasure { measure, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bounds, GridSet1D, Level};
    use crate::regularity::gen_random_cantor;

    fn lvl(l: u32) -> Level {
        Level::new(l).unwrap()
    }

    fn set(level: u32, cells: Vec<i64>) -> GridSet1D {
        GridSet1D::new(lvl(level), Bounds::AMBIENT, cells).unwrap()
    }

    fn half() -> Tau {
        Tau::rational(1, 2).unwrap()
    }

    #[test]
    fn tau_parsing() {
        assert_eq!(Tau::parse("1/2").unwrap(), Tau::Rational { num: 1, den: 2 });
        assert_eq!(Tau::parse("2/4").unwrap(), Tau::Rational { num: 1, den: 2 });
        assert_eq!(Tau::parse("0.37").unwrap(), Tau::Float(0.37));
        assert!(Tau::parse("0").is_err());
        assert!(Tau::parse("3/2").is_err());
    }

    #[test]
    fn algebraic_power_and_compare() {
        // 2^(-1/2) + 2^(-1/2) = 2^(1/2) > 1 > 2^(-1/2)
        let r = AlgebraicDyadic::power(1, 2);
        let one = AlgebraicDyadic::power(0, 2);
        let mut s = r.clone();
        s.add_assign(&r);
        assert_eq!(s.cmp_value(&one), Ordering::Greater);
        assert_eq!(r.cmp_value(&one), Ordering::Less);
        assert!((r.to_f64() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((s.to_f64() - 2.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn algebraic_mixed_slot_comparison_needs_refinement() {
        // 3*2^(-1/2) vs 2 + 2^(-3/2): 2.1213 vs 2.3535 -> Less
        let mut a = AlgebraicDyadic::zero(4);
        a.coeffs[2] = BigRational::from_integer(3.into());
        let mut b = AlgebraicDyadic::power(0, 4);
        b.coeffs[0] = BigRational::from_integer(2.into());
        let three_halves = AlgebraicDyadic::power(6, 4); // 2^(-6/4) = 2^(-3/2)
        b.add_assign(&three_halves);
        assert_eq!(a.cmp_value(&b), Ordering::Less);
        assert_eq!(b.cmp_value(&a), Ordering::Greater);
    }

    #[test]
    fn content_empty_and_single_cell() {
        let e = GridSet1D::empty(lvl(8), Bounds::AMBIENT);
        assert_eq!(dyadic_content(&e, half()).unwrap().value_f64(), 0.0);
        let s = set(8, vec![77]);
        let c = dyadic_content(&s, half()).unwrap();
        assert!((c.value_f64() - 0.0625).abs() < 1e-14); // 2^(-8/2)
        assert_eq!(c.cover, vec![DyadicInterval { level: 8, index: 77 }]);
    }

    #[test]
    fn content_full_interval_is_one() {
        for l in [3u32, 6] {
            let s = set(l, (0..(1i64 << l)).collect());
            for tau in [half(), Tau::rational(1, 3).unwrap(), Tau::rational(1, 1).unwrap()] {
                let c = dyadic_content(&s, tau).unwrap();
                assert!((c.value_f64() - 1.0).abs() < 1e-12, "tau={tau}");
                assert_eq!(c.cover, vec![DyadicInterval { level: 0, index: 0 }]);
            }
        }
    }

    #[test]
    fn content_cover_is_consistent() {
        // value equals the re-summed cover weights; cover is disjoint and
        // covers the set
        let s = gen_random_cantor(lvl(10), 0.6, 11).unwrap();
        let c = dyadic_content(&s, half()).unwrap();
        let mut resum = Scalar::zero_like(&half());
        for iv in &c.cover {
            resum.add_assign(&half().weight(iv.level));
        }
        assert!(c.value.eq_value(&resum));
        // disjointness: sorted cover, each interval's end before next start
        for w in c.cover.windows(2) {
            let (a, b) = (w[0], w[1]);
            let end_a = (a.index + 1) as f64 * (-(a.level as f64)).exp2();
            let start_b = b.index as f64 * (-(b.level as f64)).exp2();
            assert!(end_a <= start_b + 1e-15);
        }
        // coverage
        for &cell in s.cells() {
            let covered = c.cover.iter().any(|iv| {
                let shift = 10 - iv.level;
                (cell >> shift) == iv.index
            });
            assert!(covered);
        }
    }

    #[test]
    fn content_monotone_and_subadditive() {
        let a = gen_random_cantor(lvl(9), 0.5, 3).unwrap();
        let b = gen_random_cantor(lvl(9), 0.5, 4).unwrap();
        let u = a.union(&b).unwrap();
        let ca = dyadic_content(&a, half()).unwrap().value_f64();
        let cb = dyadic_content(&b, half()).unwrap().value_f64();
        let cu = dyadic_content(&u, half()).unwrap().value_f64();
        assert!(ca <= cu + 1e-12);
        assert!(cu <= ca + cb + 1e-12);
    }

    #[test]
    fn content_upper_bounds() {
        let s = gen_random_cantor(lvl(12), 0.55, 9).unwrap();
        let c = dyadic_content(&s, half()).unwrap().value_f64();
        let trivial = (s.len() as f64) * 0.5f64.powf(12.0 * 0.5);
        assert!(c <= 1.0 + 1e-12);
        assert!(c <= trivial + 1e-12);
    }

    #[test]
    fn content_negative_cells_split_at_zero() {
        let s = set(4, vec![-3, -2, 5]);
        let c = dyadic_content(&s, half()).unwrap();
        assert!(c.cover.iter().any(|iv| iv.index < 0));
        assert!(c.cover.iter().any(|iv| iv.index >= 0));
        let direct = dyadic_content(&set(4, vec![-3, -2]), half()).unwrap().value_f64()
            + dyadic_content(&set(4, vec![5]), half()).unwrap().value_f64();
        assert!((c.value_f64() - direct).abs() < 1e-14);
    }

    #[test]
    fn ap_point_set_content_golden() {
        // the 16-point arithmetic progression at level 8: the optimal cover
        // is its 16 leaf cells, total exactly 1
        let (a16, _) = crate::regularity::gen_ap_family(16, 1, 4).unwrap();
        let c = dyadic_content(&a16, half()).unwrap();
        let one = Scalar::Exact(AlgebraicDyadic::power(0, 2));
        assert!(c.value.eq_value(&one));
        assert_eq!(c.cover.len(), 16);
    }

    #[test]
    fn ap_neighborhood_content_golden() {
        // one-cell thickening of the 16-point progression (48 cells):
        // the DP returns exactly 1 + 2^(-7/2): the unit interval plus the
        // two-cell overhang at 1
        let (a16, _) = crate::regularity::gen_ap_family(16, 1, 4).unwrap();
        let thick = a16.neighborhood(lvl(8)).unwrap();
        assert_eq!(thick.len(), 48);
        let c = dyadic_content(&thick, half()).unwrap();
        let mut expected = AlgebraicDyadic::power(0, 2);
        expected.add_assign(&AlgebraicDyadic::power(7, 2));
        assert!(c.value.eq_value(&Scalar::Exact(expected)));
        assert_eq!(c.cover.len(), 2);
    }

    #[test]
    fn frostman_full_interval_uniform_mass_one() {
        let s = set(6, (0..64).collect());
        let f = max_frostman(&s, half()).unwrap();
        assert!(f.mass.eq_value(&Scalar::Exact(AlgebraicDyadic::power(0, 2))));
        for k in 0..64 {
            assert!((f.measure.weight_f64(k) - 1.0 / 64.0).abs() < 1e-15);
        }
    }

    #[test]
    fn frostman_single_cell_mass() {
        let s = set(8, vec![5]);
        let f = max_frostman(&s, half()).unwrap();
        assert!((f.mass.to_f64() - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn duality_on_random_percolation_sets() {
        for seed in 0..40u64 {
            let s = gen_random_cantor(lvl(11), 0.55, seed).unwrap();
            if s.is_empty() {
                continue;
            }
            let c = dyadic_content(&s, half()).unwrap();
            let f = max_frostman(&s, half()).unwrap();
            assert!(c.value.eq_value(&f.mass), "seed {seed}");
        }
    }

    #[test]
    fn duality_float_mode() {
        let tau = Tau::float(0.3721).unwrap();
        for seed in 0..10u64 {
            let s = gen_random_cantor(lvl(10), 0.5, seed).unwrap();
            if s.is_empty() {
                continue;
            }
            let c = dyadic_content(&s, tau).unwrap();
            let f = max_frostman(&s, tau).unwrap();
            assert!((c.value_f64() - f.mass.to_f64()).abs() <= 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn frostman_measure_satisfies_interval_bound() {
        let s = gen_random_cantor(lvl(10), 0.75, 17).unwrap();
        assert!(!s.is_empty());
        let f = max_frostman(&s, half()).unwrap();
        for l in 0..=10u32 {
            let (lo, hi) = Bounds::AMBIENT.index_range(lvl(l));
            for k in lo..hi {
                let m = f.measure.mass_of_interval(lvl(l), k);
                let w = 0.5f64.powf(l as f64 * 0.5);
                assert!(m <= w + 1e-12, "interval ({l}, {k}): {m} > {w}");
            }
        }
    }

    #[test]
    fn frostman_measure_passes_checker_at_unit_constant() {
        use crate::regularity::{check_regularity, CheckMode, RegularityParams};
        let s = gen_random_cantor(lvl(12), 0.7, 21).unwrap();
        assert!(!s.is_empty());
        let f = max_frostman(&s, half()).unwrap();
        let scales: Vec<_> = crate::regularity::all_scale_pairs(lvl(12));
        // C = 1 up to the float guard on the f64 leaf weights
        let params = RegularityParams::new(0.5, 1.0 + 1e-9).unwrap();
        let rep = check_regularity(
            &f.measure.support(),
            Some(&f.measure),
            &params,
            CheckMode::FrostmanUpper,
            &scales,
        )
        .unwrap();
        assert!(rep.satisfied, "worst ratio {}", rep.worst_ratio);
    }

    #[test]
    fn frostman_leaf_masses_sum_to_mass() {
        let s = gen_random_cantor(lvl(12), 0.7, 8).unwrap();
        assert!(!s.is_empty());
        let f = max_frostman(&s, half()).unwrap();
        assert!((f.measure.total_mass() - f.mass.to_f64()).abs() < 1e-10);
    }
}
