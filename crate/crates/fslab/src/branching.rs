//! Branching profiles of sets between dyadic generations, uniform-subset
//! extraction, convolution-norm hypothesis checks, good-scale counting and
//! the entropy pigeonholing of a branching scale.

use std::collections::BTreeMap;

use crate::grid::{GridSet1D, Level};
use crate::measure::DeltaMeasure;
use crate::regularity::{self, CheckMode, RegularityParams};
use crate::{Error, Result};

/// Base-`2^m` branching counts of a uniformly branching set: a set `U` at
/// level `m*n` is uniform when every level-`m*s` ancestor has the same
/// number `counts[s]` of level-`m*(s+1)` children, for each stage `s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchingProfile {
    pub base: u32,
    pub counts: Vec<u64>,
}

impl BranchingProfile {
    /// Exact cardinality a uniform set with this profile must have.
    pub fn product(&self) -> u64 {
        self.counts.iter().product()
    }
}

/// Per-stage histogram of child counts for a non-uniform set.
#[derive(Clone, Debug)]
pub struct NonUniformReport {
    pub base: u32,
    /// for each stage, map child-count -> number of ancestors with it
    pub histograms: Vec<BTreeMap<u64, u64>>,
}

#[derive(Clone, Debug)]
pub enum ProfileResult {
    Uniform(BranchingProfile),
    NonUniform(NonUniformReport),
}

fn stage_counts(u: &GridSet1D, m: u32, s: u32) -> Result<BTreeMap<i64, u64>> {
    let children = u.covering_cells(Level(m * (s + 1)))?;
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &c in children.cells() {
        *counts.entry(c >> m).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Branching numbers of `U` between the generations `m*s`, or the per-stage
/// child-count distribution when branching is not uniform.
pub fn branching_profile(u: &GridSet1D, m: u32, n: u32) -> Result<ProfileResult> {
    if m == 0 || n == 0 || u.level().0 != m * n {
        return Err(Error::LevelMismatch { a: u.level().0, b: m * n });
    }
    if u.is_empty() {
        return Err(Error::EmptyInput { what: "branching profile of empty set".into() });
    }
    let mut counts = Vec::with_capacity(n as usize);
    let mut histograms = Vec::with_capacity(n as usize);
    let mut uniform = true;
    for s in 0..n {
        let per_ancestor = stage_counts(u, m, s)?;
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        for &c in per_ancestor.values() {
            *hist.entry(c).or_insert(0) += 1;
        }
        if hist.len() == 1 {
            counts.push(*hist.keys().next().unwrap());
        } else {
            uniform = false;
        }
        histograms.push(hist);
    }
    if uniform {
        Ok(ProfileResult::Uniform(BranchingProfile { base: m, counts }))
    } else {
        Ok(ProfileResult::NonUniform(NonUniformReport { base: m, histograms }))
    }
}

#[derive(Clone, Debug)]
pub struct UniformSubset {
    pub subset: GridSet1D,
    pub profile: BranchingProfile,
    pub retained_fraction: f64,
}

/// Extract a subset of `U` with exactly uniform branching by modal
/// pigeonholing: per stage the modal child count wins (ties to the smaller
/// count) and surviving ancestors keep their lowest-index children.
///
/// Counts and survival are resolved bottom-up: a node is viable when it
/// has at least the stage's modal number of viable children, so a kept
/// node can never lose its quota at a deeper stage and the output is
/// always exactly uniform.
pub fn regularize_uniform_subset(u: &GridSet1D, m: u32, n: u32) -> Result<UniformSubset> {
    if m == 0 || n == 0 || u.level().0 != m * n {
        return Err(Error::LevelMismatch { a: u.level().0, b: m * n });
    }
    if u.is_empty() {
        return Err(Error::EmptyInput { what: "regularize empty set".into() });
    }
    // viable[s] = viable nodes at level m*s; leaves are all viable
    let mut viable: Vec<Vec<i64>> = vec![Vec::new(); n as usize + 1];
    viable[n as usize] = u.cells().to_vec();
    let mut counts_rev: Vec<u64> = Vec::with_capacity(n as usize);
    for s in (0..n).rev() {
        let mut per_parent: BTreeMap<i64, u64> = BTreeMap::new();
        for &c in &viable[s as usize + 1] {
            *per_parent.entry(c >> m).or_insert(0) += 1;
        }
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        for &c in per_parent.values() {
            *hist.entry(c).or_insert(0) += 1;
        }
        let modal = hist
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&count, _)| count)
            .expect("viable nodes have parents");
        counts_rev.push(modal);
        viable[s as usize] =
            per_parent.into_iter().filter(|&(_, c)| c >= modal).map(|(p, _)| p).collect();
    }
    let counts: Vec<u64> = counts_rev.into_iter().rev().collect();
    // top-down selection of the lowest-index viable children
    let mut kept: Vec<i64> = viable[0].clone();
    for s in 0..n as usize {
        let pool = &viable[s + 1]; // sorted
        let mut next = Vec::with_capacity(kept.len() * counts[s] as usize);
        for &anc in &kept {
            let lo = pool.partition_point(|&c| c < (anc << m));
            next.extend(
                pool[lo..]
                    .iter()
                    .copied()
                    .take_while(|&c| (c >> m) == anc)
                    .take(counts[s] as usize),
            );
        }
        kept = next;
    }
    let subset = GridSet1D::new(u.level(), u.bounds(), kept)?;
    let retained_fraction = subset.len() as f64 / u.len() as f64;
    Ok(UniformSubset {
        subset,
        profile: BranchingProfile { base: m, counts },
        retained_fraction,
    })
}

#[derive(Clone, Debug)]
pub struct InverseHypothesis {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub l2_eta1: f64,
    pub l2_eta2: f64,
}

/// Check the convolution-norm hypothesis
/// `||eta1 * eta2||_2 >= delta^kappa * ||eta1||_2` for probability measures
/// on the grid inside `[-1, 1]`.
pub fn inverse_hypothesis_check(
    eta1: &DeltaMeasure,
    eta2: &DeltaMeasure,
    kappa: f64,
) -> Result<InverseHypothesis> {
    if eta1.level() != eta2.level() {
        return Err(Error::LevelMismatch { a: eta1.level().0, b: eta2.level().0 });
    }
    for m in [eta1, eta2] {
        if !m.is_probability() {
            return Err(Error::NotProbability { mass: m.total_mass() });
        }
        let cap = 1i64 << m.level().0;
        let sup = m.support();
        if let (Some(&min), Some(&max)) = (sup.cells().first(), sup.cells().last()) {
            if min < -cap || max > cap {
                return Err(Error::OutOfBounds {
                    what: format!("measure support [{min}, {max}] outside the unit ball grid"),
                });
            }
        }
    }
    let conv = eta1.convolve(eta2)?;
    let lhs = conv.l2_norm();
    let l2_eta1 = eta1.l2_norm();
    let rhs = 2f64.powf(-(eta1.level().0 as f64) * kappa) * l2_eta1;
    Ok(InverseHypothesis { holds: lhs >= rhs, lhs, rhs, l2_eta1, l2_eta2: eta2.l2_norm() })
}

#[derive(Clone, Debug)]
pub struct GoodScales {
    pub good: Vec<u32>,
    /// lower bound with the proof-side constant `5 C_alpha`
    pub bound_proof: f64,
    /// lower bound with the statement-side constant `2 C_alpha`
    pub bound_statement: f64,
    pub satisfied: bool,
    pub threshold: f64,
}

/// Count the scales `s` where some level-`m*s` interval contains at least
/// `2^((1-rho) alpha m + 3)` level-`m*(s+1)` cells of `U`, and compare with
/// the regularity-driven lower bound
/// `(1 - [omega/(alpha rho) + 5 C_alpha/(alpha rho m)]) * n`.
///
/// Preconditions checked here: `mu_a` is an `(alpha, C_alpha)`-regular
/// measure (Frostman and covering upper bounds over all dyadic scale
/// pairs), and `mu_a(U) >= delta^omega` for `delta = 2^(-m n)`.
#[allow(clippy::too_many_arguments)]
pub fn good_scale_count(
    mu_a: &DeltaMeasure,
    u: &GridSet1D,
    m: u32,
    n: u32,
    rho: f64,
    omega: f64,
    alpha: f64,
    c_alpha: f64,
) -> Result<GoodScales> {
    if m == 0 || n == 0 || u.level().0 != m * n || mu_a.level() != u.level() {
        return Err(Error::LevelMismatch { a: u.level().0, b: m * n });
    }
    if !(0.0 < rho && rho < 1.0) || alpha <= 0.0 {
        return Err(Error::InvalidParameter { what: format!("rho {rho} / alpha {alpha}") });
    }
    let support = mu_a.support();
    let scales = regularity::all_scale_pairs(u.level());
    let params = RegularityParams::new(alpha.min(2.0), c_alpha.max(1.0))?;
    for mode in [CheckMode::FrostmanUpper, CheckMode::SetUpper] {
        let rep = regularity::check_regularity(&support, Some(mu_a), &params, mode, &scales)?;
        if !rep.satisfied {
            let w = rep.witness.expect("unsatisfied check carries a witness");
            return Err(Error::RegularityPrecondition {
                witness: format!(
                    "{mode:?} ratio {} at interval {} of scales ({}, {})",
                    rep.worst_ratio, w.center, w.r, w.big_r
                ),
            });
        }
    }
    let mass_u = mu_a.mass_of(u)?;
    let mass_floor = 2f64.powf(-((m * n) as f64) * omega);
    if mass_u < mass_floor * (1.0 - 1e-12) {
        return Err(Error::RegularityPrecondition {
            witness: format!("mu(U) = {mass_u} below delta^omega = {mass_floor}"),
        });
    }
    let threshold = 2f64.powf((1.0 - rho) * alpha * m as f64 + 3.0);
    let mut good = Vec::new();
    for s in 0..n {
        let per_ancestor = stage_counts(u, m, s)?;
        let max_children = per_ancestor.values().copied().max().unwrap_or(0);
        if max_children as f64 >= threshold {
            good.push(s);
        }
    }
    let lambda_proof = omega / (alpha * rho) + 5.0 * c_alpha / (alpha * rho * m as f64);
    let lambda_statement = omega / (alpha * rho) + 2.0 * c_alpha / (alpha * rho * m as f64);
    let bound_proof = (1.0 - lambda_proof) * n as f64;
    let bound_statement = (1.0 - lambda_statement) * n as f64;
    let satisfied = good.len() as f64 >= bound_proof;
    Ok(GoodScales { good, bound_proof, bound_statement, satisfied, threshold })
}

#[derive(Clone, Debug)]
pub struct PigeonholeOutcome {
    pub chosen_index: usize,
    pub fine_level: Level,
    pub coarse_level: Level,
    pub restricted: DeltaMeasure,
    /// realized maximum of the conditional masses of the restricted measure
    pub frostman_bound_witness: f64,
    /// conditional-entropy selection threshold, in bits
    pub threshold_bits: f64,
    /// conditional entropy of the restricted measure between the two levels
    pub achieved_bits: f64,
    /// provable post-restriction floor `tau_bar/4 * L - log2(8/tau_bar)`
    pub floor_bits: f64,
    pub ladder: Vec<u32>,
}

/// Interval masses of a measure at one dyadic level.
fn interval_masses(mu: &DeltaMeasure, l: Level) -> BTreeMap<i64, f64> {
    let shift = mu.level().0 - l.0;
    let mut out: BTreeMap<i64, f64> = BTreeMap::new();
    for (k, w) in mu.iter_f64() {
        *out.entry(k >> shift).or_insert(0.0) += w;
    }
    out
}

/// Pick a branching scale for a Frostman measure by conditional-entropy
/// pigeonholing along the ladder `delta_0 = delta^((1+eps)/2)`,
/// `delta_(j+1) = delta_j^(1/(1+eps))` (rounded to dyadic levels), then
/// restrict twice: first to coarse intervals with large fine-level entropy,
/// then inside each of them to the fine intervals of sub-threshold
/// conditional mass.
///
/// The returned `frostman_bound_witness` is the realized value; its
/// nominal target is `delta^(tau/(16 n))` up to the mass lost in the
/// second restriction, so the provable entropy floor after both
/// restrictions is `floor_bits`, not the raw selection threshold.
pub fn pigeonhole_branching_scale(
    nu: &DeltaMeasure,
    epsilon: f64,
    tau: f64,
    eta: f64,
    frostman_c: f64,
) -> Result<PigeonholeOutcome> {
    if !(epsilon > 0.0 && epsilon <= 1.0) || !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter { what: format!("epsilon {epsilon} / tau {tau}") });
    }
    if !nu.is_probability() {
        return Err(Error::NotProbability { mass: nu.total_mass() });
    }
    let big_l = nu.level().0;
    let delta_eta = 2f64.powf(big_l as f64 * eta); // delta^-eta
    // (tau, C delta^-eta)-Frostman precondition over all dyadic levels
    for l in 0..=big_l {
        let cap = frostman_c * delta_eta * 2f64.powf(-(l as f64) * tau);
        for (k, mass) in interval_masses(nu, Level(l)) {
            if mass > cap * (1.0 + 1e-12) {
                return Err(Error::RegularityPrecondition {
                    witness: format!("nu[{k} at level {l}] = {mass} exceeds C delta^-eta |I|^tau = {cap}"),
                });
            }
        }
    }
    // ladder length: smallest n with 1/(2 (1+eps)^(n-1)) <= tau/4
    let mut n = 1u32;
    while 1.0 / (2.0 * (1.0 + epsilon).powi(n as i32 - 1)) > tau / 4.0 {
        n += 1;
        if n > 64 {
            return Err(Error::InvalidParameter { what: "pigeonhole ladder too long".into() });
        }
    }
    // levels: L_0 = round(L (1+eps)/2), L_(j+1) = round(L_j / (1+eps)),
    // strictly decreasing, floored at 1
    let mut ladder: Vec<u32> = Vec::with_capacity(n as usize + 1);
    let mut cur = ((big_l as f64) * (1.0 + epsilon) / 2.0).round().max(1.0) as u32;
    cur = cur.min(big_l);
    ladder.push(cur);
    for _ in 0..n {
        let mut next = ((cur as f64) / (1.0 + epsilon)).round() as u32;
        if next >= cur {
            next = cur.saturating_sub(1);
        }
        if next < 1 {
            next = 1;
        }
        ladder.push(next);
        if next == 1 {
            break;
        }
        cur = next;
    }
    let stages = ladder.len() - 1;
    if stages == 0 {
        return Err(Error::FrostmanTooWeak);
    }
    let tau_bar = tau / (4.0 * n as f64);
    let threshold_bits = tau_bar * big_l as f64;
    // choose j maximising the conditional entropy between consecutive rungs
    let mut best: Option<(usize, f64)> = None;
    for j in 0..stages {
        let fine = Level(ladder[j]);
        let coarse = Level(ladder[j + 1]);
        let h = nu.conditional_entropy(fine, coarse)?;
        if best.map(|(_, bh)| h > bh).unwrap_or(true) {
            best = Some((j, h));
        }
    }
    let (j, h_best) = best.expect("nonempty ladder");
    if h_best < threshold_bits - 1e-12 {
        return Err(Error::FrostmanTooWeak);
    }
    let fine = Level(ladder[j]);
    let coarse = Level(ladder[j + 1]);

    // restriction 1: coarse intervals with H(nu_I, fine) >= (tau_bar/2) L
    let entropy_floor = (tau_bar / 2.0) * big_l as f64;
    let fine_masses = interval_masses(nu, fine);
    let mut coarse_groups: BTreeMap<i64, Vec<(i64, f64)>> = BTreeMap::new();
    let gap = fine.0 - coarse.0;
    for (kf, w) in fine_masses {
        coarse_groups.entry(kf >> gap).or_default().push((kf, w));
    }
    let mut kept_fine: Vec<i64> = Vec::new();
    for (_, children) in coarse_groups {
        let mass: f64 = children.iter().map(|&(_, w)| w).sum();
        if mass <= 0.0 {
            continue;
        }
        let h: f64 = children
            .iter()
            .map(|&(_, w)| {
                let p = w / mass;
                -p * p.log2()
            })
            .sum();
        if h >= entropy_floor {
            // restriction 2: sub-threshold fine intervals inside I
            let mass_cap = 2f64.powf(-(big_l as f64) * (tau_bar / 4.0));
            for &(kf, w) in &children {
                if w > 0.0 && w / mass < mass_cap {
                    kept_fine.push(kf);
                }
            }
        }
    }
    if kept_fine.is_empty() {
        return Err(Error::FrostmanTooWeak);
    }
    let shift = big_l - fine.0;
    let support = nu.support();
    let kept_cells: Vec<i64> = support
        .cells()
        .iter()
        .copied()
        .filter(|&k| kept_fine.binary_search(&(k >> shift)).is_ok())
        .collect();
    let g = GridSet1D::new(nu.level(), nu.bounds(), kept_cells)?;
    let restricted = nu.restrict_normalize(&g)?;

    // realized max conditional mass of the restricted measure
    let fine_after = interval_masses(&restricted, fine);
    let mut coarse_after: BTreeMap<i64, f64> = BTreeMap::new();
    for (kf, w) in &fine_after {
        *coarse_after.entry(kf >> gap).or_insert(0.0) += w;
    }
    let mut witness: f64 = 0.0;
    for (kf, w) in &fine_after {
        let cm = coarse_after[&(kf >> gap)];
        if cm > 0.0 {
            witness = witness.max(w / cm);
        }
    }
    let achieved_bits = restricted.conditional_entropy(fine, coarse)?;
    let floor_bits = ((tau_bar / 4.0) * big_l as f64 - (8.0 / tau_bar).log2()).max(0.0);
    Ok(PigeonholeOutcome {
        chosen_index: j,
        fine_level: fine,
        coarse_level: coarse,
        restricted,
        frostman_bound_witness: witness,
        threshold_bits,
        achieved_bits,
        floor_bits,
        ladder,
    })
}
