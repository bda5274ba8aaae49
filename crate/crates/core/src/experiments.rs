//! Replicated statistical experiment drivers: survival curves over wedge
//! widths, edge-speed estimation, coupled identity and disagreement checks,
//! renormalization-block crossing frequencies, lattice percolation proxies,
//! and three-state coexistence runs.
//!
//! Every driver is deterministic given its master seed: replicas draw from
//! counter-keyed streams, so reruns reproduce estimates exactly. Reports
//! carry replica and discard counts plus a reproducibility block (master
//! seed and a hash of the producing configuration); wall-clock fields are
//! confined to `timestamp_unix` and `runtime_ms` so byte comparisons can
//! strip them with [`strip_volatile`].

use std::cmp::Ordering;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocks::{
    exact_f64, o_event, open_path_exists, open_path_witness, percolation_field,
    solve_integer_wedge, union_complement_blocks, IntegerSolution, YRegion,
};
use crate::contact::{evolve, evolve_many, Configuration, EvolveOptions};
use crate::error::{Error, Result};
use crate::exact::{cmp_f64_rat, parse_rat, rat_int, rat_to_f64, serde_rat, Rat};
use crate::gbt::{evolve_gbt, two_block_set, GbtConfiguration, GbtRates, GbtState};
use crate::paths::{active_path_exists, PathQuery};
use crate::regions::{HalfSpace, Region, Wedge};
use crate::rng::{namespace, SeedRecord};
use crate::stats::{binomial_sigma, jackknife_se, mean_se, normal_ci95, wilson95};
use crate::substrate::{EventTimeline, SiteWindow, SpaceTimePoint, TimelineParams};

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn elapsed_ms(start: &Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Upper envelope used to size simulation windows: the rightmost occupied
/// site drifts well below this speed at any rate, so a window cut here is
/// touched only with negligible probability (and any touch is counted as a
/// discard, never silently absorbed).
fn speed_margin(lambda: f64) -> f64 {
    0.75 * lambda + 0.5
}

// ---------------------------------------------------------------------------
// plumbing types
// ---------------------------------------------------------------------------

/// Flat configuration mirroring the command-line surface: one experiment id
/// plus the union of all driver parameters, absent fields falling back to
/// per-driver defaults. Rationals are `"p/q"` strings so geometry stays
/// exact through config files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_l: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_r: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_band: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_min: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_max: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_margin: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn named(experiment: &str, seed: u64) -> Self {
        ExperimentConfig { experiment: experiment.into(), seed: Some(seed), ..Default::default() }
    }

    /// Structural checks shared by every driver. Rates may be zero (a
    /// zero-rate run is a meaningful degenerate case) but never negative.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() {
            return Err(Error::invalid("experiment id must be set"));
        }
        if let Some(r) = self.replicas {
            if r == 0 {
                return Err(Error::invalid("replica count must be >= 1"));
            }
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if let Some(x) = v {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::invalid(format!("{name} must be finite and >= 0, got {x}")));
                }
            }
        }
        Ok(())
    }

    /// Canonical serialization used for hashing: struct field order, absent
    /// optionals omitted.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Ties a report to the exact inputs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproducibility {
    pub master_seed: u64,
    /// SHA-256 of the canonical configuration JSON.
    pub config_hash: String,
}

impl Reproducibility {
    pub fn of(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Reproducibility {
            master_seed: cfg.seed.unwrap_or(0),
            config_hash: sha256_hex(cfg.canonical_json()?.as_bytes()),
        })
    }
}

/// One scalar estimate with its uncertainty. Proportions carry a Wilson 95%
/// interval, means a normal one; both intervals contain the point estimate
/// by construction. `replicas` counts runs attempted, `used` the
/// observations the estimate is built on, `discards` the replicas dropped
/// because occupancy touched a closed window side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson95: Option<(f64, f64)>,
    pub replicas: u64,
    pub used: u64,
    pub discards: u64,
    /// Wall clock of the producing run, milliseconds. Volatile: stripped
    /// before byte comparisons.
    pub runtime_ms: u64,
}

impl EstimateReport {
    pub fn for_proportion(
        successes: u64,
        trials: u64,
        replicas: u64,
        discards: u64,
        runtime_ms: u64,
    ) -> Option<Self> {
        let (p, lo, hi) = wilson95(successes, trials)?;
        Some(EstimateReport {
            point: p,
            se: Some(binomial_sigma(p, trials)),
            ci95: None,
            wilson95: Some((lo, hi)),
            replicas,
            used: trials,
            discards,
            runtime_ms,
        })
    }

    pub fn for_mean(samples: &[f64], replicas: u64, discards: u64, runtime_ms: u64) -> Option<Self> {
        let (m, se) = mean_se(samples)?;
        Some(EstimateReport {
            point: m,
            se: Some(se),
            ci95: Some(normal_ci95(m, se)),
            wilson95: None,
            replicas,
            used: samples.len() as u64,
            discards,
            runtime_ms,
        })
    }
}

/// Recursively removes the wall-clock fields (`timestamp_unix`,
/// `runtime_ms`) so two reports from identical configs compare byte-equal.
pub fn strip_volatile(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("timestamp_unix");
            map.remove("runtime_ms");
            for v in map.values_mut() {
                strip_volatile(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_volatile(v);
            }
        }
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// edge speed
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EdgeSpeedReport {
    pub experiment: String,
    pub lambda: f64,
    pub horizon: f64,
    pub window: (i64, i64),
    pub replicas: u64,
    pub survivors: u64,
    pub discards: u64,
    /// Mean of rightmost-site / horizon over surviving replicas, started
    /// from an occupied left half-line ending at the origin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<EstimateReport>,
    pub insufficient_data: bool,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

fn edge_speed_inner(
    lambda: f64,
    horizon: f64,
    replicas: u64,
    seed: u64,
    namespace: u16,
) -> Result<EdgeSpeedReport> {
    let t0 = Instant::now();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("rate must be finite and >= 0"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("edge-speed estimation needs a positive horizon"));
    }
    if replicas == 0 {
        return Err(Error::invalid("replica count must be >= 1"));
    }
    // The left half-line is clipped 40 sites deep: the right edge of the
    // clipped process matches the unclipped one while the block survives,
    // which at the rates of interest is essentially certain over these
    // horizons. Right margin per speed_margin, with touches discarded.
    let x_max = ((horizon * speed_margin(lambda)).ceil() as i64 + 16).max(8);
    let window = SiteWindow::new(-40, x_max)?;
    let initial = Configuration::left_occupied(window, 0);
    let mut samples = Vec::new();
    let mut survivors = 0u64;
    let mut discards = 0u64;
    for rep in 0..replicas {
        let params = TimelineParams {
            window,
            horizon,
            lambda,
            one_only_prob: 0.0,
            seed: SeedRecord::for_replica(seed, namespace, rep),
        };
        let tl = EventTimeline::build(params)?;
        let traj = evolve(&tl, &Region::Full, &initial, &EvolveOptions::default())?;
        if traj.touched_right {
            discards += 1;
            continue;
        }
        if let Some(r) = traj.final_state.rightmost() {
            survivors += 1;
            samples.push(r as f64 / horizon);
        }
    }
    let runtime = elapsed_ms(&t0);
    let mut cfg = ExperimentConfig::named("edge-speed", seed);
    cfg.lambda = Some(lambda);
    cfg.horizon = Some(horizon);
    cfg.replicas = Some(replicas);
    Ok(EdgeSpeedReport {
        experiment: "edge-speed".into(),
        lambda,
        horizon,
        window: (window.min, window.max),
        replicas,
        survivors,
        discards,
        alpha_hat: EstimateReport::for_mean(&samples, replicas, discards, runtime),
        insufficient_data: survivors < 30,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

/// Estimates the asymptotic speed of the rightmost occupied site from a
/// half-line start, as the mean final-edge slope over surviving replicas.
pub fn estimate_edge_speed(
    lambda: f64,
    horizon: f64,
    replicas: u64,
    seed: u64,
) -> Result<EdgeSpeedReport> {
    edge_speed_inner(lambda, horizon, replicas, seed, namespace::MAIN)
}

// ---------------------------------------------------------------------------
// survival curve
// ---------------------------------------------------------------------------

/// Advisory comparison of the requested wedge speeds against a cheap
/// edge-speed probe. Violations are reported as warnings, never hard
/// failures: the probe itself is a finite-horizon estimate.
#[derive(Clone, Debug, Serialize)]
pub struct SpeedCheck {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_hat_ci95: Option<(f64, f64)>,
    pub alpha_r: f64,
    pub ok: bool,
    pub warnings: Vec<String>,
}

fn speed_precheck(lambda: f64, alpha_l: &Rat, alpha_r: &Rat, horizon: f64, seed: u64) -> Result<SpeedCheck> {
    let probe_h = horizon.min(60.0).max(20.0);
    let probe = edge_speed_inner(lambda, probe_h, 48, seed, namespace::LAMBDA_PROBE)?;
    let ar = rat_to_f64(alpha_r);
    let al = rat_to_f64(alpha_l);
    let mut warnings = Vec::new();
    let (hat, ci) = match &probe.alpha_hat {
        Some(est) => (Some(est.point), est.ci95),
        None => (None, None),
    };
    match ci {
        Some((lo, hi)) => {
            if ar >= hi {
                warnings.push(format!(
                    "right speed {ar} is not below the edge-speed upper confidence bound {hi:.3}; \
                     the wedge may outrun the process"
                ));
            }
            if lo <= 0.0 {
                warnings.push(format!(
                    "edge-speed estimate is consistent with 0 at rate {lambda}; survival in any \
                     rightward wedge is then degenerate"
                ));
            }
        }
        None => warnings.push("edge-speed probe produced no usable estimate".into()),
    }
    if al <= 0.0 || ar <= al {
        return Err(Error::invalid("need 0 < alpha_l < alpha_r"));
    }
    Ok(SpeedCheck { alpha_hat: hat, alpha_hat_ci95: ci, alpha_r: ar, ok: warnings.is_empty(), warnings })
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalPoint {
    pub m: i64,
    pub survivors: u64,
    pub estimate: EstimateReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalCurveReport {
    pub experiment: String,
    pub lambda: f64,
    #[serde(with = "serde_rat")]
    pub alpha_l: Rat,
    #[serde(with = "serde_rat")]
    pub alpha_r: Rat,
    pub horizon: f64,
    pub replicas: u64,
    pub points: Vec<SurvivalPoint>,
    /// Exact pathwise claim: on every replica, whenever a narrower wedge
    /// survives, every wider one driven by the same events survives too.
    pub per_replica_monotone: bool,
    /// Derived: the survival proportions are nondecreasing in the width.
    pub nondecreasing: bool,
    pub largest_m_proportion: f64,
    pub speed_check: SpeedCheck,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

/// Fraction of replicas in which the wedge-restricted process, started from
/// the full base `[0, M]`, is still occupied at the horizon; one coupled
/// pass evaluates every width on the same event stream.
pub fn survival_curve(
    lambda: f64,
    alpha_l: &Rat,
    alpha_r: &Rat,
    m_list: &[i64],
    horizon: f64,
    replicas: u64,
    seed: u64,
) -> Result<SurvivalCurveReport> {
    let t0 = Instant::now();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("survival curves need a positive rate"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("survival curves need a positive horizon"));
    }
    if replicas == 0 {
        return Err(Error::invalid("replica count must be >= 1"));
    }
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms.is_empty() {
        return Err(Error::invalid("need at least one wedge width"));
    }
    if ms[0] < 1 {
        return Err(Error::invalid("wedge widths must be >= 1"));
    }
    let speed_check = speed_precheck(lambda, alpha_l, alpha_r, horizon, seed)?;

    let max_m = *ms.last().unwrap();
    let x_max = (max_m as f64 + rat_to_f64(alpha_r) * horizon).ceil() as i64 + 2;
    let window = SiteWindow::new(-1, x_max)?;
    let regions = ms
        .iter()
        .map(|&m| Ok(Region::Wedge(Wedge::new(alpha_l.clone(), alpha_r.clone(), rat_int(m))?)))
        .collect::<Result<Vec<_>>>()?;
    let initials = ms
        .iter()
        .map(|&m| Configuration::interval(window, 0, m))
        .collect::<Result<Vec<_>>>()?;

    let mut survived = vec![0u64; ms.len()];
    let mut discards = vec![0u64; ms.len()];
    let mut per_replica_monotone = true;
    for rep in 0..replicas {
        let params = TimelineParams {
            window,
            horizon,
            lambda,
            one_only_prob: 0.0,
            seed: SeedRecord::for_replica(seed, namespace::MAIN, rep),
        };
        let tl = EventTimeline::build(params)?;
        let specs: Vec<(&Region, &Configuration)> = regions.iter().zip(initials.iter()).collect();
        let trajs = evolve_many(&tl, &specs, &EvolveOptions::default())?;
        let mut prev: Option<bool> = None;
        for (i, traj) in trajs.iter().enumerate() {
            if traj.touched_closed_side() {
                discards[i] += 1;
                continue;
            }
            let s = traj.survived();
            if s {
                survived[i] += 1;
            }
            if prev == Some(true) && !s {
                per_replica_monotone = false;
            }
            prev = Some(s);
        }
    }
    let runtime = elapsed_ms(&t0);
    let mut points = Vec::with_capacity(ms.len());
    for (i, &m) in ms.iter().enumerate() {
        let est = EstimateReport::for_proportion(
            survived[i],
            replicas - discards[i],
            replicas,
            discards[i],
            runtime,
        )
        .ok_or_else(|| Error::invalid("every replica was discarded; enlarge the window"))?;
        points.push(SurvivalPoint { m, survivors: survived[i], estimate: est });
    }
    let nondecreasing = points.windows(2).all(|w| w[0].estimate.point <= w[1].estimate.point);
    let largest = points.last().unwrap().estimate.point;

    let mut cfg = ExperimentConfig::named("survival-curve", seed);
    cfg.lambda = Some(lambda);
    cfg.alpha_l = Some(crate::exact::format_rat(alpha_l));
    cfg.alpha_r = Some(crate::exact::format_rat(alpha_r));
    cfg.m_list = Some(ms.clone());
    cfg.horizon = Some(horizon);
    cfg.replicas = Some(replicas);
    Ok(SurvivalCurveReport {
        experiment: "survival-curve".into(),
        lambda,
        alpha_l: alpha_l.clone(),
        alpha_r: alpha_r.clone(),
        horizon,
        replicas,
        points,
        per_replica_monotone,
        nondecreasing,
        largest_m_proportion: largest,
        speed_check,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// edge growth in a wedge / half-space
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EdgeGrowthReport {
    pub experiment: String,
    pub lambda: f64,
    #[serde(with = "serde_rat")]
    pub alpha_l: Rat,
    #[serde(with = "serde_rat")]
    pub alpha_r: Rat,
    pub m: i64,
    pub horizon: f64,
    pub replicas: u64,
    pub survivors: u64,
    pub discards: u64,
    /// Horizon 0 leaves every slope undefined; flagged instead of estimated.
    pub undefined_slope: bool,
    /// Raw right-edge slope r_T / T in the wedge (biased upward by the base
    /// width: the edge starts at M, not 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wedge_r_slope_raw: Option<EstimateReport>,
    /// Offset-corrected right-edge slope (r_T - M) / T.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wedge_r_slope: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wedge_l_slope: Option<EstimateReport>,
    /// Offset-corrected right-edge slope of the half-space run started from
    /// everything left of M.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_space_r_slope: Option<EstimateReport>,
    /// Offset-corrected wedge CI inside [0.9, 1.1] x alpha_r.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_ci_within_10pct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_ci_within_10pct: Option<bool>,
    /// Half-space CI contains alpha_r after widening by 10% of alpha_r.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hs_ci_contains_alpha_r: Option<bool>,
    pub insufficient_data: bool,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

fn ci_within(ci: (f64, f64), target: f64, rel: f64) -> bool {
    let lo = target * (1.0 - rel);
    let hi = target * (1.0 + rel);
    ci.0 >= lo && ci.1 <= hi
}

fn ci_contains_with_slack(ci: (f64, f64), target: f64, slack: f64) -> bool {
    ci.0 - slack <= target && target <= ci.1 + slack
}

/// Measures the boundary slopes of the surviving wedge process and of the
/// right half-space process on one shared timeline per replica.
pub fn edge_growth_check(
    lambda: f64,
    alpha_l: &Rat,
    alpha_r: &Rat,
    m: i64,
    horizon: f64,
    replicas: u64,
    seed: u64,
) -> Result<EdgeGrowthReport> {
    let t0 = Instant::now();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("edge growth needs a positive rate"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be finite and >= 0"));
    }
    if m < 1 || replicas == 0 {
        return Err(Error::invalid("need m >= 1 and replicas >= 1"));
    }
    if !(Rat::zero() < *alpha_l && alpha_l < alpha_r) {
        return Err(Error::invalid("need 0 < alpha_l < alpha_r"));
    }
    let mut cfg = ExperimentConfig::named("edge-growth", seed);
    cfg.lambda = Some(lambda);
    cfg.alpha_l = Some(crate::exact::format_rat(alpha_l));
    cfg.alpha_r = Some(crate::exact::format_rat(alpha_r));
    cfg.m = Some(m);
    cfg.horizon = Some(horizon);
    cfg.replicas = Some(replicas);
    let repro = Reproducibility::of(&cfg)?;
    if horizon == 0.0 {
        return Ok(EdgeGrowthReport {
            experiment: "edge-growth".into(),
            lambda,
            alpha_l: alpha_l.clone(),
            alpha_r: alpha_r.clone(),
            m,
            horizon,
            replicas,
            survivors: 0,
            discards: 0,
            undefined_slope: true,
            wedge_r_slope_raw: None,
            wedge_r_slope: None,
            wedge_l_slope: None,
            half_space_r_slope: None,
            r_ci_within_10pct: None,
            l_ci_within_10pct: None,
            hs_ci_contains_alpha_r: None,
            insufficient_data: true,
            repro,
            timestamp_unix: now_unix(),
        });
    }
    let ar = rat_to_f64(alpha_r);
    let x_max = (m as f64 + ar * horizon).ceil() as i64 + 8;
    let window = SiteWindow::new(-40, x_max)?;
    let wedge_region = Region::Wedge(Wedge::new(alpha_l.clone(), alpha_r.clone(), rat_int(m))?);
    let hs_region = Region::HalfSpace(HalfSpace::new(alpha_r.clone(), rat_int(m))?);
    let wedge_init = Configuration::interval(window, 0, m)?;
    let hs_init = Configuration::left_occupied(window, m);

    let (mut r_raw, mut r_corr, mut l_slope, mut hs_corr) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut survivors = 0u64;
    let mut discards = 0u64;
    for rep in 0..replicas {
        let params = TimelineParams {
            window,
            horizon,
            lambda,
            one_only_prob: 0.0,
            seed: SeedRecord::for_replica(seed, namespace::MAIN, rep),
        };
        let tl = EventTimeline::build(params)?;
        let specs: Vec<(&Region, &Configuration)> =
            vec![(&wedge_region, &wedge_init), (&hs_region, &hs_init)];
        let trajs = evolve_many(&tl, &specs, &EvolveOptions::default())?;
        if trajs.iter().any(|t| t.touched_closed_side()) {
            discards += 1;
            continue;
        }
        if let (Some(l), Some(r)) = (trajs[0].final_state.leftmost(), trajs[0].final_state.rightmost())
        {
            survivors += 1;
            r_raw.push(r as f64 / horizon);
            r_corr.push((r - m) as f64 / horizon);
            l_slope.push(l as f64 / horizon);
        }
        if let Some(r) = trajs[1].final_state.rightmost() {
            hs_corr.push((r - m) as f64 / horizon);
        }
    }
    let runtime = elapsed_ms(&t0);
    let wedge_r_slope = EstimateReport::for_mean(&r_corr, replicas, discards, runtime);
    let wedge_l_slope = EstimateReport::for_mean(&l_slope, replicas, discards, runtime);
    let half_space_r_slope = EstimateReport::for_mean(&hs_corr, replicas, discards, runtime);
    let al = rat_to_f64(alpha_l);
    Ok(EdgeGrowthReport {
        experiment: "edge-growth".into(),
        lambda,
        alpha_l: alpha_l.clone(),
        alpha_r: alpha_r.clone(),
        m,
        horizon,
        replicas,
        survivors,
        discards,
        undefined_slope: false,
        wedge_r_slope_raw: EstimateReport::for_mean(&r_raw, replicas, discards, runtime),
        r_ci_within_10pct: wedge_r_slope.as_ref().and_then(|e| e.ci95).map(|ci| ci_within(ci, ar, 0.1)),
        l_ci_within_10pct: wedge_l_slope.as_ref().and_then(|e| e.ci95).map(|ci| ci_within(ci, al, 0.1)),
        hs_ci_contains_alpha_r: half_space_r_slope
            .as_ref()
            .and_then(|e| e.ci95)
            .map(|ci| ci_contains_with_slack(ci, ar, 0.1 * ar)),
        wedge_r_slope,
        wedge_l_slope,
        half_space_r_slope,
        insufficient_data: survivors < 30,
        repro,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// coupling check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CheckpointReport {
    pub t: f64,
    /// Replicas whose wedge process is nonempty at this time.
    pub survivors: u64,
    pub interval_sites: u64,
    pub disagreeing_sites: u64,
    /// Pooled fraction of sites in [l_t, r_t] where the wedge and the
    /// dense-start lane disagree, over surviving replicas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disagreement: Option<f64>,
    /// The wedge and the half-space lane agree site-for-site on [l_t, r_t]
    /// in every surviving replica. This is an exact pathwise identity, not
    /// a statistical estimate.
    pub identity_ok: bool,
    /// Mean occupied count of the dense-start lane inside the configured
    /// band [a t, b t].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_mean: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub experiment: String,
    pub lambda: f64,
    #[serde(with = "serde_rat")]
    pub alpha_l: Rat,
    #[serde(with = "serde_rat")]
    pub alpha_r: Rat,
    pub m: i64,
    pub horizon: f64,
    pub burn_in: f64,
    pub replicas: u64,
    pub growth_band: (f64, f64),
    pub window: (i64, i64),
    pub checkpoints: Vec<CheckpointReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_disagreement: Option<f64>,
    pub identity_all_checkpoints: bool,
    pub band_means_nondecreasing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_slope: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_slope_raw: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_slope: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_ci_within_10pct: Option<bool>,
    pub survivors: u64,
    pub discards: u64,
    pub insufficient_data: bool,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

/// Runs three coupled lanes per replica on one timeline: the wedge from its
/// base, the right half-space from everything left of M (compared
/// site-for-site on the wedge's occupied interval, an exact identity for
/// nearest-neighbor dynamics), and an unrestricted lane started from a
/// burn-in of the all-occupied state (a stand-in for the upper invariant
/// distribution, compared statistically).
#[allow(clippy::too_many_arguments)]
pub fn coupling_check(
    lambda: f64,
    alpha_l: &Rat,
    alpha_r: &Rat,
    m: i64,
    horizon: f64,
    burn_in: f64,
    replicas: u64,
    seed: u64,
    growth_band: Option<(f64, f64)>,
) -> Result<CouplingReport> {
    let t0 = Instant::now();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("coupling checks need a positive rate"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("coupling checks need a positive horizon"));
    }
    if !(burn_in >= 0.0 && burn_in.is_finite()) {
        return Err(Error::invalid("burn-in must be finite and >= 0"));
    }
    if m < 1 || replicas == 0 {
        return Err(Error::invalid("need m >= 1 and replicas >= 1"));
    }
    if !(Rat::zero() < *alpha_l && alpha_l < alpha_r) {
        return Err(Error::invalid("need 0 < alpha_l < alpha_r"));
    }
    let (a, b) = growth_band.unwrap_or((-1.0, 1.0));
    if !(a < b) {
        return Err(Error::invalid("growth band must satisfy a < b"));
    }
    let ar = rat_to_f64(alpha_r);
    // Left depth shields the compared interval from the clipped half-line:
    // boundary influence travels no faster than the margin speed, and the
    // interval sits right of alpha_l * t.
    let x_min = -((horizon * speed_margin(lambda)).ceil() as i64 + 24);
    let x_max = (m as f64 + ar * horizon).ceil() as i64 + 40;
    let window = SiteWindow::new(x_min, x_max)?;
    let cps = vec![horizon / 4.0, horizon / 2.0, horizon];

    let wedge_region = Region::Wedge(Wedge::new(alpha_l.clone(), alpha_r.clone(), rat_int(m))?);
    let hs_region = Region::HalfSpace(HalfSpace::new(alpha_r.clone(), rat_int(m))?);
    let full = Region::Full;
    let wedge_init = Configuration::interval(window, 0, m)?;
    let hs_init = Configuration::left_occupied(window, m);
    let dense = Configuration::all_occupied(window);

    struct CpAcc {
        survivors: u64,
        sites: u64,
        disagree: u64,
        identity_ok: bool,
        band_total: u64,
        band_reps: u64,
    }
    let mut accs: Vec<CpAcc> = cps
        .iter()
        .map(|_| CpAcc { survivors: 0, sites: 0, disagree: 0, identity_ok: true, band_total: 0, band_reps: 0 })
        .collect();
    let (mut r_raw, mut r_corr, mut l_slopes) = (Vec::new(), Vec::new(), Vec::new());
    let mut survivors = 0u64;
    let mut discards = 0u64;

    for rep in 0..replicas {
        let nu0 = if burn_in > 0.0 {
            let bparams = TimelineParams {
                window,
                horizon: burn_in,
                lambda,
                one_only_prob: 0.0,
                seed: SeedRecord::for_replica(seed, namespace::BURN_IN, rep),
            };
            let btl = EventTimeline::build(bparams)?;
            evolve(&btl, &Region::Full, &dense, &EvolveOptions::default())?.final_state
        } else {
            dense.clone()
        };
        let params = TimelineParams {
            window,
            horizon,
            lambda,
            one_only_prob: 0.0,
            seed: SeedRecord::for_replica(seed, namespace::MAIN, rep),
        };
        let tl = EventTimeline::build(params)?;
        let specs: Vec<(&Region, &Configuration)> =
            vec![(&wedge_region, &wedge_init), (&hs_region, &hs_init), (&full, &nu0)];
        let opts = EvolveOptions { checkpoints: cps.clone(), ..Default::default() };
        let trajs = evolve_many(&tl, &specs, &opts)?;
        if trajs.iter().any(|t| t.touched_closed_side()) {
            discards += 1;
            continue;
        }
        for t in &trajs {
            if t.checkpoint_states.len() != cps.len() {
                return Err(Error::InternalConsistency(
                    "a lane missed a checkpoint; the sweep ended early".into(),
                ));
            }
        }
        for (ci, &t) in cps.iter().enumerate() {
            let wedge_cfg = &trajs[0].checkpoint_states[ci].1;
            let hs_cfg = &trajs[1].checkpoint_states[ci].1;
            let nu_cfg = &trajs[2].checkpoint_states[ci].1;
            let acc = &mut accs[ci];
            let (blo, bhi) = ((a * t).ceil() as i64, (b * t).floor() as i64);
            let mut band = 0u64;
            for x in blo.max(window.min)..=bhi.min(window.max) {
                if nu_cfg.occupied(x) {
                    band += 1;
                }
            }
            acc.band_total += band;
            acc.band_reps += 1;
            if let (Some(l), Some(r)) = (wedge_cfg.leftmost(), wedge_cfg.rightmost()) {
                acc.survivors += 1;
                for x in l..=r {
                    acc.sites += 1;
                    if wedge_cfg.occupied(x) != nu_cfg.occupied(x) {
                        acc.disagree += 1;
                    }
                    if wedge_cfg.occupied(x) != hs_cfg.occupied(x) {
                        acc.identity_ok = false;
                    }
                }
            }
        }
        if let (Some(l), Some(r)) = (trajs[0].final_state.leftmost(), trajs[0].final_state.rightmost())
        {
            survivors += 1;
            r_raw.push(r as f64 / horizon);
            r_corr.push((r - m) as f64 / horizon);
            l_slopes.push(l as f64 / horizon);
        }
    }

    let runtime = elapsed_ms(&t0);
    let checkpoints: Vec<CheckpointReport> = cps
        .iter()
        .zip(&accs)
        .map(|(&t, acc)| CheckpointReport {
            t,
            survivors: acc.survivors,
            interval_sites: acc.sites,
            disagreeing_sites: acc.disagree,
            disagreement: (acc.sites > 0).then(|| acc.disagree as f64 / acc.sites as f64),
            identity_ok: acc.identity_ok,
            band_mean: (acc.band_reps > 0).then(|| acc.band_total as f64 / acc.band_reps as f64),
        })
        .collect();
    let final_disagreement = checkpoints.last().and_then(|c| c.disagreement);
    let identity_all = checkpoints.iter().all(|c| c.identity_ok);
    let band_means: Vec<f64> = checkpoints.iter().filter_map(|c| c.band_mean).collect();
    let band_nondecreasing = band_means.windows(2).all(|w| w[0] <= w[1]);
    let r_slope = EstimateReport::for_mean(&r_corr, replicas, discards, runtime);
    let r_ci_within = r_slope.as_ref().and_then(|e| e.ci95).map(|ci| ci_within(ci, ar, 0.1));

    let mut cfg = ExperimentConfig::named("coupling-check", seed);
    cfg.lambda = Some(lambda);
    cfg.alpha_l = Some(crate::exact::format_rat(alpha_l));
    cfg.alpha_r = Some(crate::exact::format_rat(alpha_r));
    cfg.m = Some(m);
    cfg.horizon = Some(horizon);
    cfg.burn_in = Some(burn_in);
    cfg.replicas = Some(replicas);
    cfg.growth_band = Some((a, b));
    Ok(CouplingReport {
        experiment: "coupling-check".into(),
        lambda,
        alpha_l: alpha_l.clone(),
        alpha_r: alpha_r.clone(),
        m,
        horizon,
        burn_in,
        replicas,
        growth_band: (a, b),
        window: (window.min, window.max),
        checkpoints,
        final_disagreement,
        identity_all_checkpoints: identity_all,
        band_means_nondecreasing: band_nondecreasing,
        r_slope,
        r_slope_raw: EstimateReport::for_mean(&r_raw, replicas, discards, runtime),
        l_slope: EstimateReport::for_mean(&l_slopes, replicas, discards, runtime),
        r_ci_within_10pct: r_ci_within,
        survivors,
        discards,
        insufficient_data: survivors < 30,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// base block open frequency vs per-cell product bound
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BlockOpenPoint {
    pub m: i64,
    pub n_cells: u64,
    /// Frequency of the event that every cell of the base translate is
    /// crossed.
    pub p_open: EstimateReport,
    /// Pooled per-cell crossing frequency.
    pub crossing_pooled: EstimateReport,
    /// Pooled frequency raised to the cell count: the positive-correlation
    /// lower bound surrogate for the open probability.
    pub product_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_jackknife_se: Option<f64>,
    /// p_open >= product_bound - 3 jackknife SE (exact comparison when the
    /// SE is unavailable).
    pub bound_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockOpenReport {
    pub experiment: String,
    pub lambda: f64,
    pub ell: i64,
    pub d: i64,
    #[serde(with = "serde_rat")]
    pub alpha_hat: Rat,
    #[serde(with = "serde_rat")]
    pub beta: Rat,
    pub replicas: u64,
    pub points: Vec<BlockOpenPoint>,
    pub nondecreasing: bool,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

/// Estimates, over a grid of scales, the probability that every
/// parallelogram of the base block region is crossed, and compares it
/// against the pooled per-cell product bound. Replicas are paired across
/// scales through shared per-replica seeds.
#[allow(clippy::too_many_arguments)]
pub fn block_open_check(
    lambda: f64,
    ell: i64,
    d: i64,
    m_list: &[i64],
    alpha_hat: &Rat,
    beta: &Rat,
    replicas: u64,
    seed: u64,
) -> Result<BlockOpenReport> {
    let t_op = Instant::now();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("rate must be finite and >= 0"));
    }
    if replicas == 0 {
        return Err(Error::invalid("replica count must be >= 1"));
    }
    if !(Rat::zero() < *beta && beta * rat_int(3) < *alpha_hat) {
        return Err(Error::invalid("band width must satisfy 0 < beta < alpha/3"));
    }
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms.is_empty() || ms[0] < 1 {
        return Err(Error::invalid("need at least one positive scale"));
    }
    let mut points = Vec::with_capacity(ms.len());
    for &m in &ms {
        let t_point = Instant::now();
        let y = YRegion::assemble(ell, d, rat_int(m), alpha_hat.clone(), beta.clone())?;
        let (window, horizon) = y.window_for_rows(0)?;
        let n = y.pieces().len() as u64;
        let mut data: Vec<(f64, f64)> = Vec::with_capacity(replicas as usize);
        let mut opens = 0u64;
        let mut crossings = 0u64;
        for rep in 0..replicas {
            let params = TimelineParams {
                window,
                horizon,
                lambda,
                one_only_prob: 0.0,
                seed: SeedRecord::for_replica(seed, namespace::MAIN, rep),
            };
            let tl = EventTimeline::build(params)?;
            let o = o_event(&tl, &y, 0, 0)?;
            let crossed = o.crossings.iter().filter(|&&c| c).count() as u64;
            if o.open {
                opens += 1;
            }
            crossings += crossed;
            data.push((o.open as u64 as f64, crossed as f64));
        }
        let runtime = elapsed_ms(&t_point);
        let p_open = EstimateReport::for_proportion(opens, replicas, replicas, 0, runtime)
            .ok_or_else(|| Error::invalid("no replicas"))?;
        let crossing_pooled =
            EstimateReport::for_proportion(crossings, replicas * n, replicas, 0, runtime)
                .ok_or_else(|| Error::invalid("region has no cells"))?;
        let bound = crossing_pooled.point.powi(n as i32);
        let n_f = n as f64;
        let se_d = jackknife_se(&data, |xs| {
            let len = xs.len() as f64;
            let open_mean = xs.iter().map(|p| p.0).sum::<f64>() / len;
            let cell_mean = xs.iter().map(|p| p.1).sum::<f64>() / (len * n_f);
            open_mean - cell_mean.powi(n as i32)
        });
        let diff = p_open.point - bound;
        let bound_ok = match se_d {
            Some(se) => diff >= -3.0 * se - 1e-12,
            None => diff >= -1e-12,
        };
        points.push(BlockOpenPoint {
            m,
            n_cells: n,
            p_open,
            crossing_pooled,
            product_bound: bound,
            bound_jackknife_se: se_d,
            bound_ok,
        });
    }
    let nondecreasing = points.windows(2).all(|w| w[0].p_open.point <= w[1].p_open.point);
    let _total = elapsed_ms(&t_op);
    let mut cfg = ExperimentConfig::named("block-open", seed);
    cfg.lambda = Some(lambda);
    cfg.ell = Some(ell);
    cfg.d = Some(d);
    cfg.m_list = Some(ms.clone());
    cfg.alpha_hat = Some(crate::exact::format_rat(alpha_hat));
    cfg.beta = Some(crate::exact::format_rat(beta));
    cfg.replicas = Some(replicas);
    Ok(BlockOpenReport {
        experiment: "block-open".into(),
        lambda,
        ell,
        d,
        alpha_hat: alpha_hat.clone(),
        beta: beta.clone(),
        replicas,
        points,
        nondecreasing,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// lattice open-path frequency
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct OpenPathReport {
    pub experiment: String,
    pub lambda: f64,
    pub solution: IntegerSolution,
    pub m: i64,
    pub k: i64,
    pub replicas: u64,
    pub window: (i64, i64),
    pub horizon: f64,
    /// Frequency of an open lattice path from the base point to row k.
    pub p_open: EstimateReport,
    /// Frequency of the base point alone being open.
    pub base_open_frequency: f64,
    /// For k = 0 the two events coincide replica by replica; reported and
    /// checked rather than assumed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0_matches_base: Option<bool>,
    /// Open lattice paths spot-checked against an explicit active path
    /// through the union of the visited translates.
    pub certificates_checked: u64,
    pub certificates_ok: bool,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

fn witness_has_active_path(tl: &EventTimeline, y: &YRegion, path: &[(i64, i64)]) -> Result<bool> {
    let blocks = union_complement_blocks(y, path, tl.window(), tl.horizon())?;
    let (j_end, k_end) = *path.last().unwrap();
    let start_cell = y.translated_pieces(0, 0)?[0].clone();
    let end_cell = y.translated_pieces(j_end, k_end)?[0].clone();
    let t0 = exact_f64(&start_cell.bottom_time())?;
    let t1 = exact_f64(&end_cell.bottom_time())?;
    for b in start_cell.bottom_sites()? {
        for u in end_cell.bottom_sites()? {
            let q = PathQuery::new(SpaceTimePoint::new(b, t0), SpaceTimePoint::new(u, t1));
            if active_path_exists(tl, &Region::Full, &q, Some(&blocks))? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Estimates how often the renormalized lattice percolates from the base
/// point to row `k`, with the block geometry scaled from an integer
/// alignment solution so the total width is `m`.
pub fn open_path_check(
    lambda: f64,
    solution: &IntegerSolution,
    m: i64,
    k: i64,
    replicas: u64,
    seed: u64,
) -> Result<OpenPathReport> {
    let t0 = Instant::now();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("rate must be finite and >= 0"));
    }
    if m < 1 || k < 0 || replicas == 0 {
        return Err(Error::invalid("need m >= 1, k >= 0, replicas >= 1"));
    }
    let m_y = rat_int(m) / (&solution.alpha * rat_int(solution.ell + 3));
    let y = YRegion::assemble(
        solution.ell,
        solution.d,
        m_y,
        solution.alpha.clone(),
        solution.beta.clone(),
    )?;
    let (window, horizon) = y.window_for_rows(k)?;
    let mut opens = 0u64;
    let mut base_opens = 0u64;
    let mut k0_all_match = true;
    let mut certificates_checked = 0u64;
    let mut certificates_ok = true;
    for rep in 0..replicas {
        let params = TimelineParams {
            window,
            horizon,
            lambda,
            one_only_prob: 0.0,
            seed: SeedRecord::for_replica(seed, namespace::MAIN, rep),
        };
        let tl = EventTimeline::build(params)?;
        let field = percolation_field(&tl, &y, k)?;
        let open = open_path_exists(&field);
        let base = field.value(0, 0) == Some(true);
        if open {
            opens += 1;
        }
        if base {
            base_opens += 1;
        }
        if k == 0 && open != base {
            k0_all_match = false;
        }
        if open && certificates_checked < 3 {
            let path = open_path_witness(&field)
                .ok_or_else(|| Error::InternalConsistency("open path without witness".into()))?;
            certificates_checked += 1;
            if !witness_has_active_path(&tl, &y, &path)? {
                certificates_ok = false;
            }
        }
    }
    let runtime = elapsed_ms(&t0);
    let p_open = EstimateReport::for_proportion(opens, replicas, replicas, 0, runtime)
        .ok_or_else(|| Error::invalid("no replicas"))?;
    let mut cfg = ExperimentConfig::named("open-path", seed);
    cfg.lambda = Some(lambda);
    cfg.alpha = Some(crate::exact::format_rat(&solution.alpha));
    cfg.beta = Some(crate::exact::format_rat(&solution.beta));
    cfg.ell = Some(solution.ell);
    cfg.d = Some(solution.d);
    cfg.m = Some(m);
    cfg.k = Some(k);
    cfg.replicas = Some(replicas);
    Ok(OpenPathReport {
        experiment: "open-path".into(),
        lambda,
        solution: solution.clone(),
        m,
        k,
        replicas,
        window: (window.min, window.max),
        horizon,
        p_open,
        base_open_frequency: base_opens as f64 / replicas as f64,
        k0_matches_base: (k == 0).then_some(k0_all_match),
        certificates_checked,
        certificates_ok,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// three-state coexistence
// ---------------------------------------------------------------------------

/// The wedge and row used for the three auxiliary events.
#[derive(Clone, Debug, Serialize)]
pub struct CoexistenceWedge {
    #[serde(with = "serde_rat")]
    pub alpha_l: Rat,
    #[serde(with = "serde_rat")]
    pub alpha_r: Rat,
    pub m: i64,
    /// Row time: the second event asks for paths from the origin to every
    /// site of [alpha_l t0, alpha_l t0 + m] at this time.
    pub t0: f64,
    /// Minimum occupied count the third event demands at the horizon.
    pub growth_min: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndependenceCheck {
    pub p_product: f64,
    pub p_joint: f64,
    pub difference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jackknife_se: Option<f64>,
    /// |difference| <= 3 jackknife SE: the three events live on disjoint
    /// space-time regions and should multiply.
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GbtCoexistenceReport {
    pub experiment: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub horizon: f64,
    pub replicas: u64,
    pub threshold: u64,
    pub window: (i64, i64),
    pub wedge: CoexistenceWedge,
    /// Probability that at least `threshold` sites hold a 1 at the horizon.
    pub p_mass: EstimateReport,
    pub mass_interval_excludes_zero: bool,
    /// No 2-propagating path from the left half-line ever meets the wedge.
    pub p_wedge_clear: EstimateReport,
    /// Active paths inside the wedge from the origin to every site of the
    /// row at t0.
    pub p_row_covered: EstimateReport,
    /// The wedge-restricted process seeded from that row survives to the
    /// horizon with at least `growth_min` occupied sites.
    pub p_sustained_growth: EstimateReport,
    pub p_all_three: EstimateReport,
    pub independence: IndependenceCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_rate_estimate: Option<f64>,
    pub warnings: Vec<String>,
    pub survivors_discarded: u64,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

/// Runs the three-state model from 2s on the left half-line and a single 1
/// at the origin, measuring how often the 1-population reaches `threshold`
/// and the frequencies of the three auxiliary wedge events.
pub fn gbt_coexistence(
    lambda1: f64,
    lambda2: f64,
    horizon: f64,
    replicas: u64,
    threshold: u64,
    seed: u64,
) -> Result<GbtCoexistenceReport> {
    let t_op = Instant::now();
    if !(lambda1.is_finite() && lambda2.is_finite() && lambda2 > 0.0 && lambda1 > lambda2) {
        return Err(Error::invalid(
            "need 0 < lambda2 < lambda1 strictly; equal rates leave the 1s no advantage",
        ));
    }
    if !(horizon > 1.0 && horizon.is_finite()) {
        return Err(Error::invalid("need horizon > 1 so the row event fits"));
    }
    if replicas == 0 {
        return Err(Error::invalid("replica count must be >= 1"));
    }
    // Advisory: a cheap bisection estimate of the critical rate; the
    // premise needs lambda2 above it.
    let mut warnings = Vec::new();
    let lc = estimate_lambda_c(SiteWindow::new(-20, 20)?, 15.0, 120, 0.25, seed)?;
    if lambda2 <= lc.lambda_c_hat {
        warnings.push(format!(
            "lambda2 = {lambda2} is not above the estimated critical rate {:.2}; the \
             2-population may die out and the premise weakens",
            lc.lambda_c_hat
        ));
    }
    let wedge_choice = CoexistenceWedge {
        alpha_l: rat_int(1),
        alpha_r: rat_int(2),
        m: 5,
        t0: (horizon / 4.0).floor().clamp(1.0, 8.0),
        growth_min: 10,
    };
    let t0 = wedge_choice.t0;
    let x0 = t0 as i64; // alpha_l = 1, so the row start is integral
    let wedge = Wedge::new(
        wedge_choice.alpha_l.clone(),
        wedge_choice.alpha_r.clone(),
        rat_int(wedge_choice.m),
    )?;
    let wedge_region = Region::Wedge(wedge.clone());

    let x_min = -((0.8 * horizon).ceil() as i64 + 24);
    let x_max = (horizon * speed_margin(lambda1)).ceil() as i64 + wedge_choice.m + 16;
    let window = SiteWindow::new(x_min, x_max)?;
    let rates = GbtRates::new(lambda1, lambda2)?;
    let init = GbtConfiguration::two_left_one_origin(window)?;
    let row_init = Configuration::from_sites(window, x0..=x0 + wedge_choice.m)?;

    let mut data: Vec<(f64, f64, f64)> = Vec::new();
    let mut mass_hits = 0u64;
    let mut joint_hits = 0u64;
    let mut discards = 0u64;
    for rep in 0..replicas {
        let params = rates.timeline_params(window, horizon, SeedRecord::for_replica(seed, namespace::MAIN, rep));
        let tl = EventTimeline::build(params)?;
        let traj = evolve_gbt(
            &tl,
            &Region::Full,
            &init,
            &EvolveOptions { record_changes: true, ..Default::default() },
        )?;
        if traj.touched_right {
            discards += 1;
            continue;
        }
        let mass_ok = traj.final_state.count_of(GbtState::One) >= threshold as usize;

        // Event 1: the 2-reachable set from the left half-line never meets
        // the wedge. The 2-occupancy intervals are exact; each is compared
        // against the site's rational wedge slice.
        let two_blocks = two_block_set(&traj)?;
        let mut clear = true;
        'sites: for x in window.sites() {
            if let Some((lo, hi)) = wedge.site_slice(x) {
                for &(s, e) in two_blocks.intervals_at(x) {
                    let below_hi = match &hi {
                        Some(h) => cmp_f64_rat(s, h) != Ordering::Greater,
                        None => true,
                    };
                    let above_lo = e.is_infinite() || cmp_f64_rat(e, &lo) == Ordering::Greater;
                    if below_hi && above_lo {
                        clear = false;
                        break 'sites;
                    }
                }
            }
        }

        // Event 2: wedge-confined active paths from the origin to every
        // site of the row at t0 (plain arrow paths; on the cleared event
        // there are no 2s inside the wedge to block them).
        let mut row_ok = true;
        for x in x0..=x0 + wedge_choice.m {
            let q = PathQuery::new(SpaceTimePoint::new(0, 0.0), SpaceTimePoint::new(x, t0));
            if !active_path_exists(&tl, &wedge_region, &q, None)? {
                row_ok = false;
                break;
            }
        }

        // Event 3: sustained wedge growth seeded from that row.
        let g = evolve(
            &tl,
            &wedge_region,
            &row_init,
            &EvolveOptions { start: t0, ..Default::default() },
        )?;
        let grow_ok = g.survived() && g.final_state.count() as u64 >= wedge_choice.growth_min;

        if mass_ok {
            mass_hits += 1;
        }
        if clear && row_ok && grow_ok {
            joint_hits += 1;
        }
        data.push((clear as u64 as f64, row_ok as u64 as f64, grow_ok as u64 as f64));
    }
    let used = data.len() as u64;
    if used == 0 {
        return Err(Error::invalid("every replica was discarded; enlarge the window"));
    }
    let runtime = elapsed_ms(&t_op);
    let est = |hits: u64| {
        EstimateReport::for_proportion(hits, used, replicas, discards, runtime)
            .expect("used > 0 checked above")
    };
    let clear_hits = data.iter().filter(|d| d.0 > 0.5).count() as u64;
    let row_hits = data.iter().filter(|d| d.1 > 0.5).count() as u64;
    let grow_hits = data.iter().filter(|d| d.2 > 0.5).count() as u64;
    let p_mass = est(mass_hits);
    let p1 = est(clear_hits);
    let p2 = est(row_hits);
    let p3 = est(grow_hits);
    let p_all = est(joint_hits);
    let product = p1.point * p2.point * p3.point;
    let difference = p_all.point - product;
    let se_d = jackknife_se(&data, |xs| {
        let len = xs.len() as f64;
        let m1 = xs.iter().map(|d| d.0).sum::<f64>() / len;
        let m2 = xs.iter().map(|d| d.1).sum::<f64>() / len;
        let m3 = xs.iter().map(|d| d.2).sum::<f64>() / len;
        let joint = xs.iter().map(|d| d.0 * d.1 * d.2).sum::<f64>() / len;
        joint - m1 * m2 * m3
    });
    let independence_ok = match se_d {
        Some(se) => difference.abs() <= 3.0 * se + 1e-12,
        None => difference.abs() <= 1e-12,
    };
    let mut cfg = ExperimentConfig::named("gbt-coexistence", seed);
    cfg.lambda1 = Some(lambda1);
    cfg.lambda2 = Some(lambda2);
    cfg.horizon = Some(horizon);
    cfg.replicas = Some(replicas);
    cfg.threshold = Some(threshold);
    Ok(GbtCoexistenceReport {
        experiment: "gbt-coexistence".into(),
        lambda1,
        lambda2,
        horizon,
        replicas,
        threshold,
        window: (window.min, window.max),
        wedge: wedge_choice,
        mass_interval_excludes_zero: p_mass.wilson95.is_some_and(|(lo, _)| lo > 0.0),
        p_mass,
        p_wedge_clear: p1,
        p_row_covered: p2,
        p_sustained_growth: p3,
        p_all_three: p_all,
        independence: IndependenceCheck {
            p_product: product,
            p_joint: joint_hits as f64 / used as f64,
            difference,
            jackknife_se: se_d,
            ok: independence_ok,
        },
        critical_rate_estimate: Some(lc.lambda_c_hat),
        warnings,
        survivors_discarded: discards,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// critical rate bisection
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ProbePoint {
    pub lambda: f64,
    pub survival: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaCReport {
    pub experiment: String,
    pub window: (i64, i64),
    pub horizon: f64,
    pub replicas_per_probe: u64,
    pub tolerance: f64,
    /// The probe target: the bisection solves P(survival to horizon) =
    /// this value for the window-truncated single-site process. A
    /// finite-horizon, finite-window proxy; the true critical rate is the
    /// infinite-time limit and sits below this estimate.
    pub target_probability: f64,
    pub lambda_c_hat: f64,
    pub bracket: (f64, f64),
    pub probes: Vec<ProbePoint>,
    pub repro: Reproducibility,
    pub timestamp_unix: u64,
}

/// Single-site survival proportion to the horizon, window-truncated (no
/// discards: truncation is part of this proxy's definition).
pub fn survival_probability(
    lambda: f64,
    window: SiteWindow,
    horizon: f64,
    replicas: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let t0 = Instant::now();
    if !(lambda >= 0.0 && lambda.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("rate and horizon must be finite and >= 0"));
    }
    if replicas == 0 || !window.contains(0) {
        return Err(Error::invalid("need replicas >= 1 and a window containing the origin"));
    }
    let initial = Configuration::single(window, 0)?;
    let mut hits = 0u64;
    for rep in 0..replicas {
        let params = TimelineParams {
            window,
            horizon,
            lambda,
            one_only_prob: 0.0,
            seed: SeedRecord::for_replica(seed, namespace::MAIN, rep),
        };
        let tl = EventTimeline::build(params)?;
        if evolve(&tl, &Region::Full, &initial, &EvolveOptions::default())?.survived() {
            hits += 1;
        }
    }
    EstimateReport::for_proportion(hits, replicas, replicas, 0, elapsed_ms(&t0))
        .ok_or_else(|| Error::invalid("no replicas"))
}

/// Bisection for the rate at which window-truncated single-site survival to
/// the horizon crosses a fixed small probability. Returns the bracket, with
/// width at most `tolerance` on success.
pub fn estimate_lambda_c(
    window: SiteWindow,
    horizon: f64,
    replicas: u64,
    tolerance: f64,
    seed: u64,
) -> Result<LambdaCReport> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) || replicas == 0 || !window.contains(0) {
        return Err(Error::invalid(
            "need a positive horizon, replicas >= 1 and a window containing the origin",
        ));
    }
    let target = 0.2;
    let initial = Configuration::single(window, 0)?;
    let probe = |lambda: f64, salt: u64| -> Result<f64> {
        let mut hits = 0u64;
        for rep in 0..replicas {
            let params = TimelineParams {
                window,
                horizon,
                lambda,
                one_only_prob: 0.0,
                seed: SeedRecord::for_replica(seed, namespace::LAMBDA_PROBE, salt * replicas + rep),
            };
            let tl = EventTimeline::build(params)?;
            if evolve(&tl, &Region::Full, &initial, &EvolveOptions::default())?.survived() {
                hits += 1;
            }
        }
        Ok(hits as f64 / replicas as f64)
    };
    let mut probes = Vec::new();
    let (mut lo, mut hi) = (0.8f64, 3.2f64);
    let mut p_lo = probe(lo, 0)?;
    let mut p_hi = probe(hi, 1)?;
    probes.push(ProbePoint { lambda: lo, survival: p_lo });
    probes.push(ProbePoint { lambda: hi, survival: p_hi });
    if !(p_lo < target && target < p_hi) {
        (lo, hi) = (0.2, 6.0);
        p_lo = probe(lo, 2)?;
        p_hi = probe(hi, 3)?;
        probes.push(ProbePoint { lambda: lo, survival: p_lo });
        probes.push(ProbePoint { lambda: hi, survival: p_hi });
        if !(p_lo < target && target < p_hi) {
            return Err(Error::SearchExhausted(format!(
                "survival does not straddle {target} on [{lo}, {hi}]: {p_lo} vs {p_hi}"
            )));
        }
    }
    let mut salt = 4u64;
    while hi - lo > tolerance && salt < 64 {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid, salt)?;
        salt += 1;
        probes.push(ProbePoint { lambda: mid, survival: p });
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut cfg = ExperimentConfig::named("lambda-c", seed);
    cfg.window_min = Some(window.min);
    cfg.window_max = Some(window.max);
    cfg.horizon = Some(horizon);
    cfg.replicas = Some(replicas);
    cfg.tolerance = Some(tolerance);
    Ok(LambdaCReport {
        experiment: "lambda-c".into(),
        window: (window.min, window.max),
        horizon,
        replicas_per_probe: replicas,
        tolerance,
        target_probability: target,
        lambda_c_hat: 0.5 * (lo + hi),
        bracket: (lo, hi),
        probes,
        repro: Reproducibility::of(&cfg)?,
        timestamp_unix: now_unix(),
    })
}

// ---------------------------------------------------------------------------
// config-driven dispatch
// ---------------------------------------------------------------------------

fn rat_field(v: &Option<String>, name: &str, default: &str) -> Result<Rat> {
    match v {
        Some(s) => parse_rat(s),
        None => parse_rat(default).map_err(|_| Error::invalid(format!("bad default for {name}"))),
    }
}

/// Maps a configuration to the corresponding driver and returns the report
/// as JSON. Per-driver defaults fill absent fields.
pub fn run_from_config(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    cfg.validate()?;
    let seed = cfg.seed.unwrap_or(0);
    let id = cfg.experiment.replace('_', "-");
    let value = match id.as_str() {
        "survival-curve" => {
            let report = survival_curve(
                cfg.lambda.unwrap_or(4.0),
                &rat_field(&cfg.alpha_l, "alpha_l", "7/10")?,
                &rat_field(&cfg.alpha_r, "alpha_r", "3/2")?,
                cfg.m_list.as_deref().unwrap_or(&[5, 10, 20, 40]),
                cfg.horizon.unwrap_or(200.0),
                cfg.replicas.unwrap_or(300),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "edge-speed" => {
            let report = estimate_edge_speed(
                cfg.lambda.unwrap_or(4.0),
                cfg.horizon.unwrap_or(200.0),
                cfg.replicas.unwrap_or(200),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "edge-growth" => {
            let report = edge_growth_check(
                cfg.lambda.unwrap_or(4.0),
                &rat_field(&cfg.alpha_l, "alpha_l", "7/10")?,
                &rat_field(&cfg.alpha_r, "alpha_r", "3/2")?,
                cfg.m.unwrap_or(40),
                cfg.horizon.unwrap_or(200.0),
                cfg.replicas.unwrap_or(100),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "coupling-check" => {
            let report = coupling_check(
                cfg.lambda.unwrap_or(4.0),
                &rat_field(&cfg.alpha_l, "alpha_l", "7/10")?,
                &rat_field(&cfg.alpha_r, "alpha_r", "3/2")?,
                cfg.m.unwrap_or(40),
                cfg.horizon.unwrap_or(200.0),
                cfg.burn_in.unwrap_or(50.0),
                cfg.replicas.unwrap_or(100),
                seed,
                cfg.growth_band,
            )?;
            serde_json::to_value(report)?
        }
        "block-open" => {
            let report = block_open_check(
                cfg.lambda.unwrap_or(30.0),
                cfg.ell.unwrap_or(2),
                cfg.d.unwrap_or(0),
                cfg.m_list.as_deref().unwrap_or(&[2, 4, 8]),
                &rat_field(&cfg.alpha_hat, "alpha_hat", "4")?,
                &rat_field(&cfg.beta, "beta", "1")?,
                cfg.replicas.unwrap_or(300),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "open-path" => {
            let solution = solve_integer_wedge(
                &rat_field(&cfg.alpha, "alpha", "4")?,
                &rat_field(&cfg.alpha_l, "alpha_l", "1/2")?,
                &rat_field(&cfg.alpha_r, "alpha_r", "1")?,
            )?;
            let report = open_path_check(
                cfg.lambda.unwrap_or(30.0),
                &solution,
                cfg.m.unwrap_or(112),
                cfg.k.unwrap_or(0),
                cfg.replicas.unwrap_or(100),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "gbt-coexistence" => {
            let report = gbt_coexistence(
                cfg.lambda1.unwrap_or(4.0),
                cfg.lambda2.unwrap_or(2.0),
                cfg.horizon.unwrap_or(100.0),
                cfg.replicas.unwrap_or(500),
                cfg.threshold.unwrap_or(10),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "lambda-c" => {
            let report = estimate_lambda_c(
                SiteWindow::new(cfg.window_min.unwrap_or(-25), cfg.window_max.unwrap_or(25))?,
                cfg.horizon.unwrap_or(20.0),
                cfg.replicas.unwrap_or(200),
                cfg.tolerance.unwrap_or(0.1),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        "survival-probability" => {
            let report = survival_probability(
                cfg.lambda.unwrap_or(4.0),
                SiteWindow::new(cfg.window_min.unwrap_or(-40), cfg.window_max.unwrap_or(40))?,
                cfg.horizon.unwrap_or(15.0),
                cfg.replicas.unwrap_or(200),
                seed,
            )?;
            serde_json::to_value(report)?
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown experiment {other:?}; expected one of survival-curve, edge-speed, \
                 edge-growth, coupling-check, block-open, open-path, gbt-coexistence, lambda-c, \
                 survival-probability"
            )))
        }
    };
    Ok(value)
}
