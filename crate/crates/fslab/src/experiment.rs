//! Reproducible experiment harness: flat key=value configs, typed
//! dispatch, deterministic CSV bodies and a JSON sidecar per run.
//!
//! Exit-code contract (enforced by the binary): 0 success, 2 when an
//! experiment's pass/fail assertion fails, 1 on errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::branching::{self, ProfileResult};
use crate::content::{dyadic_content, max_frostman, Tau};
use crate::grid::{Bounds, GridSet1D, Level};
use crate::measure::{DeltaMeasure, Direction, ProductMeasure2};
use crate::projection::{self, ScaleWindow};
use crate::regularity::{
    self, gen_ap_family, gen_random_cantor, gen_self_similar, CheckMode,
};
use crate::{Error, Result};

/// Experiment kinds, keyed by their CLI subcommand names.
pub const KINDS: [&str; 8] = [
    "gen",
    "ap-counterexample",
    "direction-scan",
    "content-duality",
    "branching-audit",
    "inverse-probe",
    "prop3-probe",
    "dim",
];

/// A validated experiment configuration: a kind plus flat string
/// parameters.  Identical configs produce byte-identical CSV bodies.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub kind: String,
    pub params: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(kind: &str, params: BTreeMap<String, String>) -> Result<ExperimentConfig> {
        if !KINDS.contains(&kind) {
            return Err(Error::InvalidParameter { what: format!("unknown experiment kind {kind:?}") });
        }
        Ok(ExperimentConfig { kind: kind.to_string(), params })
    }

    /// Parse a flat `key = value` config file: one pair per line, `#`
    /// comments, optional surrounding quotes on values.
    pub fn parse_file_params(text: &str) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::InvalidParameter {
                what: format!("config line {}: expected key = value", lineno + 1),
            })?;
            let v = v.trim().trim_matches('"');
            out.insert(k.trim().to_string(), v.to_string());
        }
        Ok(out)
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.as_bytes());
        for (k, v) in &self.params {
            h.update(b"\n");
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
        }
        hex_string(&h.finalize())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }

    fn str_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad_field(key, v)),
        }
    }

    fn u32_or(&self, key: &str, default: u32) -> Result<u32> {
        Ok(self.u64_or(key, default as u64)? as u32)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad_field(key, v)),
        }
    }

    fn seed(&self) -> Result<u64> {
        self.get("seed")
            .ok_or_else(|| Error::InvalidParameter {
                what: "field seed: mandatory for randomized generators".into(),
            })?
            .parse()
            .map_err(|_| bad_field("seed", self.get("seed").unwrap()))
    }
}

fn bad_field(key: &str, value: &str) -> Error {
    Error::InvalidParameter { what: format!("field {key}: cannot parse {value:?}") }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// 17-significant-digit float formatting used in every CSV body.
/// Negative zero is canonicalised so summation order cannot leak into
/// golden files.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Fixed-schema result table; all cells pre-rendered as strings.
#[derive(Clone, Debug, Serialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    fn new(columns: &[&str]) -> ResultTable {
        ResultTable { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::InvalidParameter { what: e.to_string() })
    }
}

/// Outcome of one experiment run.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub table: ResultTable,
    /// false when a pass/fail assertion of the experiment failed
    pub pass: bool,
    pub summary: serde_json::Value,
}

/// Dispatch an experiment and, when `out` is given, write `<out>.csv` and
/// the JSON sidecar `<out>.json`.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let started = Instant::now();
    let outcome = match config.kind.as_str() {
        "gen" => run_gen(config),
        "ap-counterexample" => run_ap(config),
        "direction-scan" => run_scan(config),
        "content-duality" => run_content(config),
        "branching-audit" => run_branching(config),
        "inverse-probe" => run_inverse(config),
        "prop3-probe" => run_prop3(config),
        "dim" => run_dim(config),
        _ => unreachable!("kind validated on construction"),
    }?;
    if let Some(base) = out {
        let csv_path = base.with_extension("csv");
        let json_path = base.with_extension("json");
        std::fs::write(&csv_path, outcome.table.to_csv_bytes()?)?;
        let sidecar = serde_json::json!({
            "kind": config.kind,
            "params": config.params,
            "config_hash": config.hash(),
            "fslab_version": env!("CARGO_PKG_VERSION"),
            "wall_time_ms": started.elapsed().as_millis() as u64,
            "rows": outcome.table.rows.len(),
            "pass": outcome.pass,
            "summary": outcome.summary,
        });
        let mut f = std::fs::File::create(&json_path)?;
        writeln!(f, "{}", serde_json::to_string_pretty(&sidecar).expect("serializable"))?;
    }
    Ok(outcome)
}

/// Build the generator named by the config: a 1D set and its natural
/// measure.
fn build_generator(config: &ExperimentConfig, seed_shift: u64) -> Result<(GridSet1D, DeltaMeasure)> {
    match config.str_or("generator", "self-similar").as_str() {
        "self-similar" => {
            let b = config.u64_or("branches", 4)?;
            let m = config.u32_or("contraction", 4)?;
            let gap = config.u64_or("gap", (1u64 << m) / b.max(1))?;
            let depth = config.u32_or("depth", 4)?;
            let offset = config.u64_or("offset", 0)?;
            gen_self_similar(b, gap, m, depth, offset)
        }
        "percolation" => {
            let level = Level::new(config.u32_or("level", 10)?)?;
            let survival = config.f64_or("survival", 0.6)?;
            let seed = config.seed()?.wrapping_add(seed_shift);
            let set = gen_random_cantor(level, survival, seed)?;
            if set.is_empty() {
                return Err(Error::EmptyInput { what: format!("percolation died out (seed {seed})") });
            }
            let mu = DeltaMeasure::uniform(&set)?;
            Ok((set, mu))
        }
        other => Err(bad_field("generator", other)),
    }
}

fn run_gen(config: &ExperimentConfig) -> Result<RunOutcome> {
    let (set, mu) = build_generator(config, 0)?;
    let mut table = ResultTable::new(&["idx", "cell", "x", "weight"]);
    let mesh = set.level().mesh();
    for (idx, &cell) in set.cells().iter().enumerate() {
        table.push(vec![
            idx.to_string(),
            cell.to_string(),
            fmt_f64(cell as f64 * mesh),
            fmt_f64(mu.weight_f64(cell)),
        ]);
    }
    let summary = serde_json::json!({
        "cells": set.len(),
        "level": set.level().0,
    });
    Ok(RunOutcome { table, pass: true, summary })
}

fn parse_kappa(s: &str) -> Result<(u32, u32)> {
    let (p, q) = s.split_once('/').ok_or_else(|| bad_field("kappa", s))?;
    Ok((
        p.trim().parse().map_err(|_| bad_field("kappa", s))?,
        q.trim().parse().map_err(|_| bad_field("kappa", s))?,
    ))
}

fn run_ap(config: &ExperimentConfig) -> Result<RunOutcome> {
    let ns: Vec<u64> = config
        .str_or("n", "16,64,256")
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad_field("n", s)))
        .collect::<Result<_>>()?;
    let (kn, kd) = parse_kappa(&config.str_or("kappa", "1/4"))?;
    let kappa = kn as f64 / kd as f64;
    let mut table =
        ResultTable::new(&["n", "kappa", "count", "bound", "slack_used", "pass"]);
    let mut pass = true;
    for n in ns {
        let (a, e) = gen_ap_family(n, kn, kd)?;
        let sum = projection::affine_sumset(&a, &e, &a, a.level())?;
        let count = sum.len() as f64;
        let bound = 2.0 * (n as f64).powf(1.0 + 2.0 * kappa);
        let slack_used = count > bound && count <= bound + 2.0;
        let row_pass = count <= bound + 2.0;
        pass &= row_pass;
        table.push(vec![
            n.to_string(),
            fmt_f64(kappa),
            (count as u64).to_string(),
            fmt_f64(bound),
            slack_used.to_string(),
            row_pass.to_string(),
        ]);
    }
    let summary = serde_json::json!({ "pass": pass });
    Ok(RunOutcome { table, pass, summary })
}

fn run_scan(config: &ExperimentConfig) -> Result<RunOutcome> {
    let (set_a, mu_a) = build_generator(config, 0)?;
    let (_, mu_b) = if config.str_or("generator", "self-similar") == "percolation" {
        build_generator(config, 1)?
    } else {
        (set_a.clone(), mu_a.clone())
    };
    let sigma = config.f64_or("sigma", 0.55)?;
    let eta = config.f64_or("eta", 0.05)?;
    if !(0.0..=2.0).contains(&sigma) {
        return Err(Error::InvalidParameter { what: format!("field sigma: {sigma} outside [0, 2]") });
    }
    if !(0.0..=4.0).contains(&eta) {
        return Err(Error::InvalidParameter { what: format!("field eta: {eta} outside [0, 4]") });
    }
    let tau = Tau::parse(&config.str_or("tau", "1/2"))?;
    let theta_level = config.u32_or("theta_level", 8)?;
    let window = ScaleWindow::to_unit(mu_a.level());
    let res = projection::hm_scan(&mu_a, &mu_b, sigma, eta, window, theta_level, tau)?;
    let mut table = ResultTable::new(&[
        "row", "p", "q", "theta", "hm_mass", "covering", "dim_ratio", "flagged", "exc_content",
    ]);
    for r in &res.rows {
        table.push(vec![
            "theta".into(),
            r.theta.num().to_string(),
            r.theta.qlevel().to_string(),
            fmt_f64(r.theta.theta()),
            fmt_f64(r.hm_mass),
            r.covering.to_string(),
            fmt_f64(r.dimension_ratio),
            r.flagged.to_string(),
            String::new(),
        ]);
    }
    table.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        res.exceptional_set.len().to_string(),
        String::new(),
        String::new(),
        fmt_f64(res.exceptional_content.value_f64()),
    ]);
    let ratios: Vec<f64> = res.rows.iter().map(|r| r.dimension_ratio).collect();
    let summary = serde_json::json!({
        "directions": res.rows.len(),
        "flagged": res.exceptional_set.len(),
        "exceptional_content": res.exceptional_content.value_f64(),
        "median_dim_ratio": median(&ratios),
        "threshold_multiplicity": res.threshold_multiplicity,
    });
    Ok(RunOutcome { table, pass: true, summary })
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run_content(config: &ExperimentConfig) -> Result<RunOutcome> {
    let count = config.u32_or("count", 200)?;
    let level = Level::new(config.u32_or("level", 14)?)?;
    let survival = config.f64_or("survival", 0.55)?;
    let tau = Tau::parse(&config.str_or("tau", "1/2"))?;
    let seed0 = config.seed()?;
    let mut table = ResultTable::new(&[
        "set_id", "seed", "cells", "content", "frostman_mass", "exact_equal", "pass",
    ]);
    let mut pass = true;
    for i in 0..count {
        let seed = seed0.wrapping_add(i as u64);
        let set = gen_random_cantor(level, survival, seed)?;
        if set.is_empty() {
            table.push(vec![
                i.to_string(),
                seed.to_string(),
                "0".into(),
                fmt_f64(0.0),
                fmt_f64(0.0),
                "true".into(),
                "true".into(),
            ]);
            continue;
        }
        let c = dyadic_content(&set, tau)?;
        let f = max_frostman(&set, tau)?;
        let equal = c.value.eq_value(&f.mass);
        pass &= equal;
        table.push(vec![
            i.to_string(),
            seed.to_string(),
            set.len().to_string(),
            fmt_f64(c.value_f64()),
            fmt_f64(f.mass.to_f64()),
            equal.to_string(),
            equal.to_string(),
        ]);
    }
    let summary = serde_json::json!({ "sets": count, "pass": pass });
    Ok(RunOutcome { table, pass, summary })
}

fn run_branching(config: &ExperimentConfig) -> Result<RunOutcome> {
    let m = config.u32_or("m", 2)?;
    let (set, _) = build_generator(config, 0)?;
    let n = config.u32_or("n_stages", set.level().0 / m.max(1))?;
    if m * n != set.level().0 {
        return Err(Error::InvalidParameter {
            what: format!("field m/n_stages: m*n = {} but set level is {}", m * n, set.level().0),
        });
    }
    let mut table = ResultTable::new(&[
        "row", "s", "r_s", "cells", "product", "retained_fraction", "uniform", "pass",
    ]);
    let mut pass = true;
    match branching::branching_profile(&set, m, n)? {
        ProfileResult::Uniform(p) => {
            for (s, r) in p.counts.iter().enumerate() {
                table.push(vec![
                    "scale".into(),
                    s.to_string(),
                    r.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "true".into(),
                    String::new(),
                ]);
            }
            let ok = p.product() == set.len() as u64;
            pass &= ok;
            table.push(vec![
                "summary".into(),
                String::new(),
                String::new(),
                set.len().to_string(),
                p.product().to_string(),
                fmt_f64(1.0),
                "true".into(),
                ok.to_string(),
            ]);
        }
        ProfileResult::NonUniform(_) => {
            let reg = branching::regularize_uniform_subset(&set, m, n)?;
            for (s, r) in reg.profile.counts.iter().enumerate() {
                table.push(vec![
                    "scale".into(),
                    s.to_string(),
                    r.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".into(),
                    String::new(),
                ]);
            }
            let ok = reg.profile.product() == reg.subset.len() as u64;
            pass &= ok;
            table.push(vec![
                "summary".into(),
                String::new(),
                String::new(),
                reg.subset.len().to_string(),
                reg.profile.product().to_string(),
                fmt_f64(reg.retained_fraction),
                "false".into(),
                ok.to_string(),
            ]);
        }
    }
    // optional good-scale audit of a heavy random subset, enabled by `rho`
    if let Some(rho) = config.get("rho") {
        let rho: f64 = rho.parse().map_err(|_| bad_field("rho", rho))?;
        let alpha = config.f64_or("alpha", (set.len() as f64).log2() / set.level().0 as f64)?;
        let (_, mu) = build_generator(config, 0)?;
        let mu = mu.to_approx();
        let seed = config.u64_or("seed", 0)?;
        let u = regularity::random_subset(&set, config.f64_or("keep", 0.7)?, seed)?;
        let support = mu.support();
        let scales = regularity::all_scale_pairs(set.level());
        let probe = regularity::RegularityParams::new(alpha.min(2.0), 1e12)?;
        let worst = [CheckMode::SetUpper, CheckMode::FrostmanUpper]
            .iter()
            .map(|&mode| {
                regularity::check_regularity(&support, Some(&mu), &probe, mode, &scales)
                    .map(|r| r.worst_ratio)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(1.0f64, f64::max)
            * (1.0 + 1e-9);
        let mass = mu.mass_of(&u)?;
        let omega = (-(mass.log2()) / set.level().0 as f64).max(1e-12) + 1e-9;
        let out = branching::good_scale_count(&mu, &u, m, n, rho, omega, alpha, worst)?;
        pass &= out.satisfied;
        table.push(vec![
            "good_scales".into(),
            String::new(),
            String::new(),
            out.good.len().to_string(),
            fmt_f64(out.threshold),
            fmt_f64(out.bound_proof),
            String::new(),
            out.satisfied.to_string(),
        ]);
    }
    let summary = serde_json::json!({ "pass": pass });
    Ok(RunOutcome { table, pass, summary })
}

fn run_inverse(config: &ExperimentConfig) -> Result<RunOutcome> {
    if config.str_or("mode", "hypothesis") == "pigeonhole" {
        return run_inverse_pigeonhole(config);
    }
    let (set, _mu) = build_generator(config, 0)?;
    let level = set.level();
    let q = config.u32_or("theta_q", 6)?;
    let p0 = config.u64_or("theta0", 1)? as i64;
    let p1 = config.u64_or("theta1", p0 as u64 + 1)? as i64;
    if p1 <= p0 {
        return Err(Error::InvalidParameter { what: "field theta1: need theta1 > theta0".into() });
    }
    let zeta_bar = config.f64_or("zeta_bar", 0.01)?;
    let kappa = 6.0 * zeta_bar;
    let theta0 = Direction::new(p0, q)?;
    let theta_diff = Direction::new(p1 - p0, q)?;
    let k = crate::grid::GridSet2D::product(set.clone(), set.clone())?;

    // heaviest tube of width 2^-(L/2) under theta0
    let half = Level(level.0 / 2);
    let mut tube_counts: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
    let shift = q + (level.0 - half.0);
    for &(i, j) in &k.cells_vec() {
        let t = ((i << q) + theta0.num() * j) >> shift;
        tube_counts.entry(t).or_default().push((i, j));
    }
    let (_, tube_cells) = tube_counts
        .into_iter()
        .max_by_key(|(t, v)| (v.len(), -t))
        .ok_or_else(|| Error::EmptyInput { what: "empty product set".into() })?;

    // Pi1: uniform on the delta-grid anchors of pi_theta0(K ∩ T0)
    let mut a1: Vec<i64> = tube_cells
        .iter()
        .map(|&(i, j)| ((i << q) + theta0.num() * j) >> q)
        .collect();
    a1.sort_unstable();
    a1.dedup();
    let min_a1 = a1[0];
    let a1_set = GridSet1D::new(level, Bounds::AMBIENT, a1.iter().map(|&x| x - min_a1).collect())?;
    let pi1 = DeltaMeasure::uniform(&a1_set)?;

    // Pi2: uniform on the half-level y-cells of K ∩ T0, pushed to the
    // delta grid by y -> floor(theta * y)
    let mut a2: Vec<i64> = tube_cells.iter().map(|&(_, j)| j >> (level.0 - half.0)).collect();
    a2.sort_unstable();
    a2.dedup();
    let a2_set = GridSet1D::new(half, Bounds::AMBIENT, a2)?;
    let pi2 = DeltaMeasure::uniform(&a2_set)?;
    let theta_pi2 = pi2.pushforward_scale_floor_to(theta_diff, level)?;

    let out = branching::inverse_hypothesis_check(&pi1, &theta_pi2, kappa)?;
    let mut table = ResultTable::new(&[
        "theta0_p", "theta1_p", "q", "level", "l2_pi1", "l2_theta_pi2", "l2_conv", "kappa",
        "rhs", "occurs",
    ]);
    table.push(vec![
        p0.to_string(),
        p1.to_string(),
        q.to_string(),
        level.0.to_string(),
        fmt_f64(out.l2_eta1),
        fmt_f64(out.l2_eta2),
        fmt_f64(out.lhs),
        fmt_f64(kappa),
        fmt_f64(out.rhs),
        out.holds.to_string(),
    ]);
    let summary = serde_json::json!({
        "occurs": out.holds,
        "lhs": out.lhs,
        "rhs": out.rhs,
        "tube_cells": tube_cells.len(),
    });
    Ok(RunOutcome { table, pass: true, summary })
}

/// Pigeonhole probe: maximal Frostman measures of percolation sets, the
/// branching-scale selection, and the realized conditional-mass witness
/// against its target.
fn run_inverse_pigeonhole(config: &ExperimentConfig) -> Result<RunOutcome> {
    let count = config.u32_or("count", 10)?;
    let level = Level::new(config.u32_or("level", 14)?)?;
    let survival = config.f64_or("survival", 0.75)?;
    let seed0 = config.seed()?;
    let epsilon = config.f64_or("epsilon", 0.25)?;
    let tau = Tau::parse(&config.str_or("tau", "1/2"))?;
    let tau_f = tau.value();
    let mut table = ResultTable::new(&[
        "instance", "seed", "cells", "chosen_index", "fine_level", "coarse_level", "witness",
        "target", "achieved_bits", "threshold_bits", "status",
    ]);
    for i in 0..count {
        let seed = seed0.wrapping_add(i as u64);
        let set = gen_random_cantor(level, survival, seed)?;
        if set.len() < 2 {
            continue;
        }
        let f = max_frostman(&set, tau)?;
        let mass = f.mass.to_f64();
        let nu = f.measure.restrict_normalize(&f.measure.support())?;
        let eta = (1.0 / mass).log2() / level.0 as f64 + 1e-6;
        match branching::pigeonhole_branching_scale(&nu, epsilon, tau_f, eta, 1.0) {
            Ok(out) => {
                // nominal target for the witness, before the second
                // renormalisation: delta^(tau_bar / 4)
                let n_lad = (out.ladder.len() - 1) as f64;
                let target = 2f64.powf(-(level.0 as f64) * tau_f / (16.0 * n_lad));
                table.push(vec![
                    i.to_string(),
                    seed.to_string(),
                    set.len().to_string(),
                    out.chosen_index.to_string(),
                    out.fine_level.0.to_string(),
                    out.coarse_level.0.to_string(),
                    fmt_f64(out.frostman_bound_witness),
                    fmt_f64(target),
                    fmt_f64(out.achieved_bits),
                    fmt_f64(out.threshold_bits),
                    "ok".into(),
                ]);
            }
            Err(Error::FrostmanTooWeak) => {
                table.push(vec![
                    i.to_string(),
                    seed.to_string(),
                    set.len().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "too-weak".into(),
                ]);
            }
            Err(e) => return Err(e),
        }
    }
    let summary = serde_json::json!({ "instances": table.rows.len() });
    Ok(RunOutcome { table, pass: true, summary })
}

fn run_prop3(config: &ExperimentConfig) -> Result<RunOutcome> {
    let count = config.u32_or("count", 30)?;
    let level = Level::new(config.u32_or("level", 8)?)?;
    let survival = config.f64_or("survival", 0.7)?;
    let seed0 = config.seed()?;
    let q = config.u32_or("theta_q", 5)?;
    let m_thr = config.f64_or("m_threshold", 4.0)?;
    let n_thr = config.f64_or("n_threshold", 64.0)?;
    let c_small = config.f64_or("c", 0.125)?;
    let c_big = config.f64_or("c_big", 8.0)?;
    let big_r = Level::new(config.u32_or("big_r_level", level.0 / 2)?)?;
    let mut table = ResultTable::new(&[
        "instance", "seed", "theta_p", "theta_q", "c_gamma", "lhs", "rhs_coarse", "rhs_fine",
        "holds",
    ]);
    let mut held = 0u32;
    for i in 0..count {
        let seed = seed0.wrapping_add(i as u64);
        let a = gen_random_cantor(level, survival, seed)?;
        let b = gen_random_cantor(level, survival, seed.wrapping_add(0x9e37_79b9))?;
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let mu = ProductMeasure2::new(DeltaMeasure::uniform(&a)?, DeltaMeasure::uniform(&b)?)?;
        // empirical regularity constants of the two axes at their nominal
        // dimensions give the product constant
        let scales = regularity::all_scale_pairs(level);
        let alpha_a = (a.len() as f64).log2() / level.0 as f64;
        let alpha_b = (b.len() as f64).log2() / level.0 as f64;
        let ca = regularity::minimal_regularity_constant(&a, None, alpha_a, CheckMode::SetUpper, &scales)?;
        let cb = regularity::minimal_regularity_constant(&b, None, alpha_b, CheckMode::SetUpper, &scales)?;
        let c_gamma = 5.0 * ca * cb;
        let theta = Direction::new(((i as i64) * 37) % ((1i64 << q) + 1), q)?;
        let out = projection::prop3_probe(&mu, theta, m_thr, n_thr, level, big_r, c_small, c_big, c_gamma)?;
        held += out.holds as u32;
        table.push(vec![
            i.to_string(),
            seed.to_string(),
            theta.num().to_string(),
            q.to_string(),
            fmt_f64(c_gamma),
            fmt_f64(out.lhs),
            fmt_f64(out.rhs_coarse),
            fmt_f64(out.rhs_fine),
            out.holds.to_string(),
        ]);
    }
    let rate = held as f64 / table.rows.len().max(1) as f64;
    table.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_f64(rate),
        String::new(),
    ]);
    let summary = serde_json::json!({ "pass_rate": rate });
    Ok(RunOutcome { table, pass: true, summary })
}

/// Least-squares slope of `log2 N(S, level)` against the level, over a
/// ladder of at least three levels.
pub fn dimension_estimate(set: &GridSet1D, ladder: &[Level]) -> Result<f64> {
    if ladder.len() < 3 {
        return Err(Error::InvalidParameter {
            what: format!("dimension ladder needs >= 3 levels, got {}", ladder.len()),
        });
    }
    let mut pts = Vec::with_capacity(ladder.len());
    for &l in ladder {
        let n = set.covering_number(l)?;
        if n == 0 {
            return Err(Error::EmptyInput { what: "dimension estimate of empty set".into() });
        }
        pts.push((l.0 as f64, (n as f64).log2()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter { what: "degenerate ladder".into() });
    }
    Ok(sxy / sxx)
}

fn run_dim(config: &ExperimentConfig) -> Result<RunOutcome> {
    let (set, _) = build_generator(config, 0)?;
    let ladder: Vec<Level> = match config.get("ladder") {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| bad_field("ladder", s))
                    .and_then(Level::new)
            })
            .collect::<Result<_>>()?,
        None => {
            let m = config.u32_or("contraction", 4)?;
            (0..=set.level().0 / m).map(|s| Level(s * m)).collect()
        }
    };
    let slope = dimension_estimate(&set, &ladder)?;
    let mut table = ResultTable::new(&["row", "level", "count", "log2_count", "slope"]);
    for &l in &ladder {
        let c = set.covering_number(l)?;
        table.push(vec![
            "level".into(),
            l.0.to_string(),
            c.to_string(),
            fmt_f64((c as f64).log2()),
            String::new(),
        ]);
    }
    table.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        fmt_f64(slope),
    ]);
    let summary = serde_json::json!({ "slope": slope });
    Ok(RunOutcome { table, pass: true, summary })
}
