//! Three-state variant: vacant sites (0), a weak type (1) and a strong
//! type (2).
//!
//! Rates: a vacant site turns 1 at `lambda1` per neighboring 1, turns 2 at
//! `lambda2` per neighboring 2; a 1 turns 2 at `lambda2` per neighboring 2;
//! both types die to 0 at rate 1. Everything is driven by one arrow field
//! of rate `lambda1` whose arrows carry an independent `one_only` label
//! with probability `(lambda1 - lambda2) / lambda1`: type 1 spreads onto
//! vacant sites along any arrow, type 2 spreads onto both vacant sites and
//! 1s along unlabeled arrows only (an effective rate of `lambda2`). Under
//! this representation the set of 2s, viewed on its own, evolves exactly
//! like the two-state process at rate `lambda2` on the unlabeled arrows,
//! regardless of the 1s, while 1s can never displace 2s.
//!
//! Three independent routes to the same law live here: the event-sweep
//! lane, a direct rate-based chain simulation, and an exact transient
//! distribution for small windows via uniformization of the generator.

use serde::{Deserialize, Serialize};

use crate::contact::{run_sweep, Configuration, EvolveOptions, ExitSchedule, SweepLane};
use crate::error::{Error, Result};
use crate::paths::BlockSet;
use crate::regions::{Region, SliceEnvelope};
use crate::rng::{exp_gap, stream_rng, unit_f64, SeedRecord, StreamKind};
use crate::substrate::{Event, EventSource, SiteWindow, TimelineParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum GbtState {
    Empty = 0,
    One = 1,
    Two = 2,
}

impl GbtState {
    #[inline]
    pub fn is_occupied(self) -> bool {
        self != GbtState::Empty
    }
}

impl From<GbtState> for u8 {
    fn from(s: GbtState) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for GbtState {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(GbtState::Empty),
            1 => Ok(GbtState::One),
            2 => Ok(GbtState::Two),
            _ => Err(format!("invalid site state {v}")),
        }
    }
}

/// Infection rates of the two types. The weak type must not be faster
/// than `lambda1`, which is the total arrow rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtRates {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl GbtRates {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !lambda1.is_finite() || !lambda2.is_finite() || lambda1 < 0.0 || lambda2 < 0.0 {
            return Err(Error::invalid("rates must be finite and nonnegative"));
        }
        if lambda2 > lambda1 {
            return Err(Error::invalid(format!(
                "lambda2 = {lambda2} exceeds lambda1 = {lambda1}; the strong type cannot outpace the arrow field"
            )));
        }
        Ok(GbtRates { lambda1, lambda2 })
    }

    /// Probability that an arrow carries only type 1.
    pub fn one_only_prob(&self) -> f64 {
        if self.lambda1 == 0.0 {
            0.0
        } else {
            (self.lambda1 - self.lambda2) / self.lambda1
        }
    }

    /// Timeline parameters realizing these rates.
    pub fn timeline_params(&self, window: SiteWindow, horizon: f64, seed: SeedRecord) -> TimelineParams {
        TimelineParams {
            window,
            horizon,
            lambda: self.lambda1,
            one_only_prob: self.one_only_prob(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GbtConfiguration {
    window: SiteWindow,
    states: Vec<GbtState>,
    open_left: bool,
    open_right: bool,
}

impl GbtConfiguration {
    pub fn empty(window: SiteWindow) -> Self {
        GbtConfiguration {
            window,
            states: vec![GbtState::Empty; window.len()],
            open_left: false,
            open_right: false,
        }
    }

    pub fn from_states(window: SiteWindow, states: Vec<GbtState>) -> Result<Self> {
        if states.len() != window.len() {
            return Err(Error::invalid("state vector length does not match the window"));
        }
        Ok(GbtConfiguration { window, states, open_left: false, open_right: false })
    }

    /// The half-line start: 2s on every site left of the origin (clipped,
    /// so the left side is declared open), a single 1 at the origin.
    pub fn two_left_one_origin(window: SiteWindow) -> Result<Self> {
        if !window.contains(0) || window.min >= 0 {
            return Err(Error::invalid("window must contain the origin and sites left of it"));
        }
        let mut c = GbtConfiguration::empty(window);
        for x in window.min..0 {
            c.states[window.index(x)] = GbtState::Two;
        }
        c.states[window.index(0)] = GbtState::One;
        c.open_left = true;
        Ok(c)
    }

    pub fn with_open_sides(mut self, left: bool, right: bool) -> Self {
        self.open_left = left;
        self.open_right = right;
        self
    }

    pub fn window(&self) -> SiteWindow {
        self.window
    }

    #[inline]
    pub fn state(&self, x: i64) -> GbtState {
        if self.window.contains(x) {
            self.states[self.window.index(x)]
        } else {
            GbtState::Empty
        }
    }

    pub fn set(&mut self, x: i64, s: GbtState) -> Result<()> {
        if !self.window.contains(x) {
            return Err(Error::OutOfWindow { x, t: 0.0 });
        }
        self.states[self.window.index(x)] = s;
        Ok(())
    }

    pub fn count_of(&self, s: GbtState) -> usize {
        self.states.iter().filter(|&&v| v == s).count()
    }

    pub fn sites_with(&self, s: GbtState) -> impl Iterator<Item = i64> + '_ {
        self.window.sites().filter(move |&x| self.states[self.window.index(x)] == s)
    }

    pub fn is_all_empty(&self) -> bool {
        self.states.iter().all(|&s| s == GbtState::Empty)
    }

    /// Occupancy mask of one type, inheriting the open-side declarations.
    pub fn marginal(&self, s: GbtState) -> Configuration {
        Configuration::from_sites(self.window, self.sites_with(s))
            .expect("sites came from the window")
            .with_open_sides(self.open_left, self.open_right)
    }

    pub fn open_left(&self) -> bool {
        self.open_left
    }

    pub fn open_right(&self) -> bool {
        self.open_right
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtChange {
    pub t: f64,
    pub x: i64,
    pub state: GbtState,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub after: bool,
}

#[derive(Clone, Debug)]
pub struct GbtTrajectory {
    pub region: Region,
    pub start: f64,
    pub end: f64,
    pub initial: GbtConfiguration,
    pub changes: Vec<GbtChange>,
    pub checkpoint_states: Vec<(f64, GbtConfiguration)>,
    pub final_state: GbtConfiguration,
    pub touched_left: bool,
    pub touched_right: bool,
}

impl GbtTrajectory {
    pub fn state_at(&self, t: f64) -> Result<GbtConfiguration> {
        if !(self.start..=self.end).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [{}, {}]", self.start, self.end)));
        }
        let mut state = self.initial.clone();
        for c in &self.changes {
            if c.t > t || (c.t == t && c.after) {
                break;
            }
            state.states[state.window.index(c.x)] = c.state;
        }
        Ok(state)
    }
}

pub(crate) struct GbtLane {
    window: SiteWindow,
    slices: Vec<Option<SliceEnvelope>>,
    exits: ExitSchedule,
    states: Vec<GbtState>,
    occupied_count: usize,
    record: bool,
    changes: Vec<GbtChange>,
    snapshots: Vec<(f64, GbtConfiguration)>,
    open_left: bool,
    open_right: bool,
    touched_left: bool,
    touched_right: bool,
}

impl GbtLane {
    pub(crate) fn new(
        region: &Region,
        initial: &GbtConfiguration,
        start: f64,
        record: bool,
    ) -> Result<Self> {
        let window = initial.window();
        let slices = region.site_envelopes(window);
        let mut states = vec![GbtState::Empty; window.len()];
        let mut occupied_count = 0;
        for x in window.sites() {
            let i = window.index(x);
            let s = initial.states[i];
            if s.is_occupied() && slices[i].as_ref().is_some_and(|sl| sl.admits(start)) {
                states[i] = s;
                occupied_count += 1;
            }
        }
        let exits = ExitSchedule::new(window, &slices, start);
        let mut lane = GbtLane {
            window,
            slices,
            exits,
            states,
            occupied_count,
            record,
            changes: Vec::new(),
            snapshots: Vec::new(),
            open_left: initial.open_left,
            open_right: initial.open_right,
            touched_left: false,
            touched_right: false,
        };
        lane.note_touches();
        Ok(lane)
    }

    fn note_touches(&mut self) {
        if !self.open_left && self.states[0].is_occupied() {
            self.touched_left = true;
        }
        if !self.open_right && self.states[self.window.len() - 1].is_occupied() {
            self.touched_right = true;
        }
    }

    #[inline]
    fn admits(&self, x: i64, t: f64) -> bool {
        self.slices[self.window.index(x)].as_ref().is_some_and(|s| s.admits(t))
    }

    fn set_site(&mut self, x: i64, s: GbtState, t: f64, after: bool) {
        let i = self.window.index(x);
        let old = self.states[i];
        if old == s {
            return;
        }
        self.states[i] = s;
        match (old.is_occupied(), s.is_occupied()) {
            (false, true) => {
                self.occupied_count += 1;
                if !self.open_left && i == 0 {
                    self.touched_left = true;
                }
                if !self.open_right && i == self.window.len() - 1 {
                    self.touched_right = true;
                }
            }
            (true, false) => self.occupied_count -= 1,
            _ => {}
        }
        if self.record {
            self.changes.push(GbtChange { t, x, state: s, after });
        }
    }

    fn apply_exits_before(&mut self, t: f64) {
        let mut exits = std::mem::take(&mut self.exits);
        exits.apply_before(t, |x, te, late| self.set_site(x, GbtState::Empty, te, late));
        self.exits = exits;
    }

    fn snapshot(&self) -> GbtConfiguration {
        GbtConfiguration {
            window: self.window,
            states: self.states.clone(),
            open_left: self.open_left,
            open_right: self.open_right,
        }
    }

    pub(crate) fn into_trajectory(
        self,
        region: Region,
        start: f64,
        end: f64,
        initial: GbtConfiguration,
    ) -> GbtTrajectory {
        let final_state = self.snapshot();
        GbtTrajectory {
            region,
            start,
            end,
            initial,
            changes: self.changes,
            checkpoint_states: self.snapshots,
            final_state,
            touched_left: self.touched_left,
            touched_right: self.touched_right,
        }
    }
}

impl SweepLane for GbtLane {
    fn on_event(&mut self, ev: &Event) {
        match *ev {
            Event::Death { x, t } => {
                self.apply_exits_before(t);
                self.set_site(x, GbtState::Empty, t, false);
            }
            Event::Arrow { from, to, t, one_only } => {
                self.apply_exits_before(t);
                let src = self.states[self.window.index(from)];
                let dst = self.states[self.window.index(to)];
                match src {
                    GbtState::Two if !one_only => {
                        if dst != GbtState::Two && self.admits(to, t) {
                            self.set_site(to, GbtState::Two, t, false);
                        }
                    }
                    GbtState::One => {
                        if dst == GbtState::Empty && self.admits(to, t) {
                            self.set_site(to, GbtState::One, t, false);
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    fn on_checkpoint(&mut self, t: f64) {
        self.apply_exits_before(t);
        self.snapshots.push((t, self.snapshot()));
    }

    fn finish(&mut self, end: f64) {
        self.apply_exits_before(end);
    }

    fn settled(&self) -> bool {
        self.occupied_count == 0
    }
}

/// Evolve a three-state configuration over the events of `source`. The
/// timeline's rate is `lambda1` and its label probability encodes
/// `lambda2`; see [`GbtRates::timeline_params`].
pub fn evolve_gbt<S: EventSource + ?Sized>(
    source: &S,
    region: &Region,
    initial: &GbtConfiguration,
    opts: &EvolveOptions,
) -> Result<GbtTrajectory> {
    let params = source.params();
    if initial.window() != params.window {
        return Err(Error::invalid("initial configuration window does not match the timeline"));
    }
    let end = opts.end.unwrap_or(params.horizon);
    if !(0.0..=params.horizon).contains(&opts.start) || !(opts.start..=params.horizon).contains(&end) {
        return Err(Error::invalid(format!(
            "evolve range [{}, {end}] outside [0, {}]",
            opts.start, params.horizon
        )));
    }
    let mut lane = GbtLane::new(region, initial, opts.start, opts.record_changes)?;
    let stored_initial = lane.snapshot();
    run_sweep(source.events_boxed(), opts.start, end, &opts.checkpoints, &mut [&mut lane])?;
    Ok(lane.into_trajectory(region.clone(), opts.start, end, stored_initial))
}

/// Direct continuous-time chain simulation from explicit transition rates;
/// shares nothing with the event-sweep route except the rate definitions.
/// Returns the state at the horizon.
pub fn evolve_gbt_direct(
    rates: &GbtRates,
    horizon: f64,
    seed: SeedRecord,
    initial: &GbtConfiguration,
) -> Result<GbtConfiguration> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::invalid("horizon must be finite and >= 0"));
    }
    let window = initial.window();
    let mut rng = stream_rng(seed, StreamKind::Scalar, 0);
    let mut state = initial.clone();
    let mut t = 0.0f64;
    let mut transitions: Vec<(i64, GbtState, f64)> = Vec::new();
    loop {
        transitions.clear();
        for x in window.sites() {
            let s = state.state(x);
            let n1 = [x - 1, x + 1].iter().filter(|&&y| state.state(y) == GbtState::One).count() as f64;
            let n2 = [x - 1, x + 1].iter().filter(|&&y| state.state(y) == GbtState::Two).count() as f64;
            match s {
                GbtState::Empty => {
                    if n1 > 0.0 {
                        transitions.push((x, GbtState::One, rates.lambda1 * n1));
                    }
                    if n2 > 0.0 {
                        transitions.push((x, GbtState::Two, rates.lambda2 * n2));
                    }
                }
                GbtState::One => {
                    transitions.push((x, GbtState::Empty, 1.0));
                    if n2 > 0.0 {
                        transitions.push((x, GbtState::Two, rates.lambda2 * n2));
                    }
                }
                GbtState::Two => {
                    transitions.push((x, GbtState::Empty, 1.0));
                }
            }
        }
        let total: f64 = transitions.iter().map(|&(_, _, r)| r).sum();
        if total == 0.0 {
            break;
        }
        t += exp_gap(&mut rng, total);
        if t > horizon {
            break;
        }
        let mut u = unit_f64(&mut rng) * total;
        let mut chosen = transitions.len() - 1;
        for (i, &(_, _, r)) in transitions.iter().enumerate() {
            if u < r {
                chosen = i;
                break;
            }
            u -= r;
        }
        let (x, s, _) = transitions[chosen];
        state.set(x, s)?;
    }
    Ok(state)
}

/// Half-open time intervals during which each site holds a 2, extracted
/// from a recorded trajectory. A clear flagged `after` leaves the site
/// occupied through its instant, so the interval end is nudged one float up.
pub fn two_block_set(traj: &GbtTrajectory) -> Result<BlockSet> {
    let window = traj.initial.window();
    let mut blocks = BlockSet::new(window);
    let mut since: Vec<Option<f64>> = window
        .sites()
        .map(|x| (traj.initial.state(x) == GbtState::Two).then_some(traj.start))
        .collect();
    let mut current: Vec<GbtState> = window.sites().map(|x| traj.initial.state(x)).collect();
    for c in &traj.changes {
        let i = window.index(c.x);
        let was = current[i];
        current[i] = c.state;
        if was == GbtState::Two && c.state != GbtState::Two {
            let start = since[i].take().ok_or_else(|| {
                Error::InternalConsistency("2-interval ended twice; changes incomplete?".into())
            })?;
            let end = if c.after { c.t.next_up() } else { c.t };
            blocks.push(c.x, start, end)?;
        } else if was != GbtState::Two && c.state == GbtState::Two {
            since[i] = Some(c.t);
        }
    }
    for x in window.sites() {
        let i = window.index(x);
        if current[i] != traj.final_state.state(x) {
            return Err(Error::InternalConsistency(
                "block extraction needs record_changes; trajectory has incomplete change records".into(),
            ));
        }
        if let Some(start) = since[i] {
            blocks.push(x, start, f64::INFINITY)?;
        }
    }
    Ok(blocks)
}

/// Exact transient analysis of the finite-window chain, for small windows.
pub mod chain {
    use super::*;

    pub fn state_count(n_sites: usize) -> usize {
        3usize.pow(n_sites as u32)
    }

    /// Mixed-radix encoding, site index 0 least significant.
    pub fn encode(states: &[GbtState]) -> usize {
        states.iter().rev().fold(0usize, |acc, &s| acc * 3 + s as usize)
    }

    pub fn decode(mut id: usize, n_sites: usize) -> Vec<GbtState> {
        let mut v = Vec::with_capacity(n_sites);
        for _ in 0..n_sites {
            v.push(GbtState::try_from((id % 3) as u8).unwrap());
            id /= 3;
        }
        v
    }

    /// Sparse generator of the chain on `n_sites` sites in a row.
    pub struct Generator {
        pub n_sites: usize,
        rows: Vec<Vec<(usize, f64)>>,
        diag: Vec<f64>,
    }

    impl Generator {
        pub fn build(n_sites: usize, rates: &GbtRates) -> Result<Self> {
            if n_sites == 0 || n_sites > 12 {
                return Err(Error::invalid("exact chain supports 1..=12 sites"));
            }
            let n = state_count(n_sites);
            let mut rows = vec![Vec::new(); n];
            let mut diag = vec![0.0; n];
            for id in 0..n {
                let s = decode(id, n_sites);
                for i in 0..n_sites {
                    let neighbors = |want: GbtState| {
                        let mut c = 0.0;
                        if i > 0 && s[i - 1] == want {
                            c += 1.0;
                        }
                        if i + 1 < n_sites && s[i + 1] == want {
                            c += 1.0;
                        }
                        c
                    };
                    let mut push = |to_state: GbtState, rate: f64| {
                        if rate > 0.0 {
                            let delta = (to_state as usize as i64 - s[i] as usize as i64)
                                * 3i64.pow(i as u32);
                            let target = (id as i64 + delta) as usize;
                            rows[id].push((target, rate));
                            diag[id] -= rate;
                        }
                    };
                    match s[i] {
                        GbtState::Empty => {
                            push(GbtState::One, rates.lambda1 * neighbors(GbtState::One));
                            push(GbtState::Two, rates.lambda2 * neighbors(GbtState::Two));
                        }
                        GbtState::One => {
                            push(GbtState::Empty, 1.0);
                            push(GbtState::Two, rates.lambda2 * neighbors(GbtState::Two));
                        }
                        GbtState::Two => {
                            push(GbtState::Empty, 1.0);
                        }
                    }
                }
            }
            Ok(Generator { n_sites, rows, diag })
        }

        /// Distribution at time `t` from a point mass, by uniformization:
        /// the Poisson-weighted power series of `I + Q / max_rate`,
        /// truncated once the accumulated Poisson mass reaches 1 - 1e-13.
        pub fn transient_distribution(&self, initial: usize, t: f64) -> Result<Vec<f64>> {
            let n = self.rows.len();
            if initial >= n {
                return Err(Error::invalid("initial state id out of range"));
            }
            if !t.is_finite() || t < 0.0 {
                return Err(Error::invalid("time must be finite and >= 0"));
            }
            let lam = self.diag.iter().fold(0.0f64, |m, &d| m.max(-d));
            let mut v = vec![0.0; n];
            v[initial] = 1.0;
            if lam == 0.0 || t == 0.0 {
                return Ok(v);
            }
            let lt = lam * t;
            let mut weight = (-lt).exp();
            let mut cum = weight;
            let mut dist: Vec<f64> = v.iter().map(|p| p * weight).collect();
            let max_k = (3.0 * lt + 200.0) as usize;
            for k in 1..=max_k {
                let mut next = vec![0.0; n];
                for (i, &vi) in v.iter().enumerate() {
                    if vi == 0.0 {
                        continue;
                    }
                    next[i] += vi * (1.0 + self.diag[i] / lam);
                    for &(j, q) in &self.rows[i] {
                        next[j] += vi * q / lam;
                    }
                }
                v = next;
                weight *= lt / k as f64;
                cum += weight;
                for (d, &vi) in dist.iter_mut().zip(&v) {
                    *d += weight * vi;
                }
                if 1.0 - cum < 1e-13 {
                    let total: f64 = dist.iter().sum();
                    debug_assert!((total - 1.0).abs() < 1e-9, "distribution mass {total}");
                    return Ok(dist);
                }
            }
            Err(Error::InternalConsistency(format!(
                "uniformization failed to converge after {max_k} terms (rate {lam}, t {t})"
            )))
        }
    }

    /// Per-site marginal probabilities `[P(0), P(1), P(2)]`.
    pub fn site_state_probabilities(dist: &[f64], n_sites: usize) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; n_sites];
        for (id, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut rest = id;
            for site in out.iter_mut() {
                site[rest % 3] += p;
                rest /= 3;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::evolve;
    use crate::exact::rat;
    use crate::paths::{active_path_exists, PathQuery};
    use crate::regions::Wedge;
    use crate::substrate::{EventTimeline, SpaceTimePoint};

    fn window(a: i64, b: i64) -> SiteWindow {
        SiteWindow::new(a, b).unwrap()
    }

    fn record_opts(checkpoints: Vec<f64>) -> EvolveOptions {
        EvolveOptions { checkpoints, record_changes: true, ..Default::default() }
    }

    #[test]
    fn rates_validation_and_label_probability() {
        let r = GbtRates::new(4.0, 2.0).unwrap();
        assert_eq!(r.one_only_prob(), 0.5);
        assert_eq!(GbtRates::new(2.0, 2.0).unwrap().one_only_prob(), 0.0);
        assert_eq!(GbtRates::new(0.0, 0.0).unwrap().one_only_prob(), 0.0);
        assert!(GbtRates::new(1.0, 2.0).is_err(), "strong type cannot exceed the arrow rate");
        assert!(GbtRates::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn half_line_initial_shape() {
        let c = GbtConfiguration::two_left_one_origin(window(-4, 3)).unwrap();
        assert_eq!(c.count_of(GbtState::Two), 4);
        assert_eq!(c.count_of(GbtState::One), 1);
        assert_eq!(c.state(0), GbtState::One);
        assert_eq!(c.state(-1), GbtState::Two);
        assert_eq!(c.state(1), GbtState::Empty);
        assert!(c.open_left() && !c.open_right());
        assert!(GbtConfiguration::two_left_one_origin(window(0, 5)).is_err());
    }

    #[test]
    fn recorded_transitions_are_legal() {
        // 1 never appears on a 2; 2 may appear on 0 or 1; only 0 follows
        // either type.
        for seed in 0..12u64 {
            let rates = GbtRates::new(3.0, 1.5).unwrap();
            let tl = EventTimeline::build(rates.timeline_params(
                window(-6, 6),
                4.0,
                SeedRecord::new(300 + seed, 0),
            ))
            .unwrap();
            let init = GbtConfiguration::two_left_one_origin(tl.window()).unwrap();
            let traj = evolve_gbt(&tl, &Region::Full, &init, &record_opts(vec![])).unwrap();
            let mut current = init.clone();
            for c in &traj.changes {
                let old = current.state(c.x);
                let legal = match (old, c.state) {
                    (GbtState::Empty, GbtState::One) => true,
                    (GbtState::Empty, GbtState::Two) => true,
                    (GbtState::One, GbtState::Two) => true,
                    (GbtState::One, GbtState::Empty) => true,
                    (GbtState::Two, GbtState::Empty) => true,
                    _ => false,
                };
                assert!(legal, "seed {seed}: illegal transition {old:?} -> {:?} at {:?}", c.state, c);
                current.set(c.x, c.state).unwrap();
            }
            assert_eq!(current, traj.final_state);
        }
    }

    #[test]
    fn two_marginal_equals_contact_process_on_unlabeled_arrows() {
        // The strong type's occupancy must match, site for site and time
        // for time, an independent two-state evolution run on the
        // sub-timeline of unlabeled arrows.
        let regions = [
            Region::Full,
            Region::Wedge(Wedge::new(rat(1, 2), rat(2, 1), rat(5, 1)).unwrap()),
        ];
        for seed in 0..12u64 {
            let rates = GbtRates::new(4.0, 2.0).unwrap();
            let tl = EventTimeline::build(rates.timeline_params(
                window(-8, 8),
                3.0,
                SeedRecord::new(500 + seed, 0),
            ))
            .unwrap();
            let init = GbtConfiguration::two_left_one_origin(tl.window()).unwrap();
            let region = &regions[(seed % 2) as usize];
            let cps = vec![1.0, 2.0, 3.0];
            let gbt = evolve_gbt(&tl, region, &init, &record_opts(cps.clone())).unwrap();
            let sub = tl.two_path_subtimeline();
            let two_init = init.marginal(GbtState::Two);
            let twos = evolve(
                &sub,
                region,
                &two_init,
                &EvolveOptions { checkpoints: cps, record_changes: false, ..Default::default() },
            )
            .unwrap();
            for ((ta, sa), (tb, sb)) in gbt.checkpoint_states.iter().zip(&twos.checkpoint_states) {
                assert_eq!(ta, tb);
                assert_eq!(
                    &sa.marginal(GbtState::Two),
                    sb,
                    "seed {seed}: strong-type marginal diverged at t = {ta}"
                );
            }
            assert_eq!(gbt.final_state.marginal(GbtState::Two), twos.final_state);
        }
    }

    #[test]
    fn without_twos_the_weak_type_is_a_plain_contact_process() {
        for seed in 0..8u64 {
            let rates = GbtRates::new(3.0, 1.0).unwrap();
            let tl = EventTimeline::build(rates.timeline_params(
                window(-6, 6),
                3.0,
                SeedRecord::new(900 + seed, 0),
            ))
            .unwrap();
            let mut init = GbtConfiguration::empty(tl.window());
            init.set(0, GbtState::One).unwrap();
            init.set(1, GbtState::One).unwrap();
            let gbt = evolve_gbt(&tl, &Region::Full, &init, &record_opts(vec![])).unwrap();
            assert_eq!(gbt.final_state.count_of(GbtState::Two), 0);
            let ones = evolve(
                &tl,
                &Region::Full,
                &Configuration::from_sites(tl.window(), [0, 1]).unwrap(),
                &EvolveOptions::default(),
            )
            .unwrap();
            assert_eq!(gbt.final_state.marginal(GbtState::One), ones.final_state);
        }
    }

    #[test]
    fn weak_occupancy_equals_blocked_reachability() {
        // A site holds a 1 at time t exactly when an active path from the
        // initial 1, avoiding the strong type's space-time set, reaches it.
        let mut ones_seen = 0usize;
        for seed in 0..20u64 {
            let rates = GbtRates::new(3.0, 1.5).unwrap();
            let tl = EventTimeline::build(rates.timeline_params(
                window(-5, 5),
                2.5,
                SeedRecord::new(1500 + seed, 0),
            ))
            .unwrap();
            let init = GbtConfiguration::two_left_one_origin(tl.window()).unwrap();
            let traj = evolve_gbt(&tl, &Region::Full, &init, &record_opts(vec![1.25, 2.5])).unwrap();
            let blocks = two_block_set(&traj).unwrap();
            for (t, snap) in &traj.checkpoint_states {
                for y in -5..=5 {
                    let q = PathQuery::new(SpaceTimePoint::new(0, 0.0), SpaceTimePoint::new(y, *t));
                    let reach = active_path_exists(&tl, &Region::Full, &q, Some(&blocks)).unwrap();
                    let is_one = snap.state(y) == GbtState::One;
                    assert_eq!(
                        is_one, reach,
                        "seed {seed}: weak occupancy vs blocked path disagree at ({y}, {t})"
                    );
                    if is_one {
                        ones_seen += 1;
                    }
                }
            }
        }
        assert!(ones_seen > 20, "degenerate test: weak type almost never present");
    }

    #[test]
    fn block_set_extraction_from_hand_built_run() {
        let rates = GbtRates::new(2.0, 2.0).unwrap();
        let p = rates.timeline_params(window(0, 2), 3.0, SeedRecord::new(0, 0));
        // Site 0 starts 2 and dies at 1.5; arrow 0 -> 1 at 1.0 spreads the 2;
        // site 1 dies at 2.0.
        let tl = EventTimeline::from_parts(
            p,
            vec![vec![1.5], vec![2.0], vec![]],
            vec![crate::substrate::EdgeArrows { from: 0, to: 1, times: vec![1.0], one_only: vec![false] }],
        )
        .unwrap();
        let mut init = GbtConfiguration::empty(window(0, 2));
        init.set(0, GbtState::Two).unwrap();
        let traj = evolve_gbt(&tl, &Region::Full, &init, &record_opts(vec![])).unwrap();
        let blocks = two_block_set(&traj).unwrap();
        assert_eq!(blocks.intervals_at(0), &[(0.0, 1.5)]);
        assert_eq!(blocks.intervals_at(1), &[(1.0, 2.0)]);
        assert!(blocks.intervals_at(2).is_empty());
        // A 2 still alive at the end yields an unbounded interval.
        let tl = EventTimeline::from_parts(
            rates.timeline_params(window(0, 2), 3.0, SeedRecord::new(0, 0)),
            vec![vec![], vec![], vec![]],
            vec![],
        )
        .unwrap();
        let traj = evolve_gbt(&tl, &Region::Full, &init, &record_opts(vec![])).unwrap();
        let blocks = two_block_set(&traj).unwrap();
        assert_eq!(blocks.intervals_at(0), &[(0.0, f64::INFINITY)]);
    }

    #[test]
    fn single_site_chain_matches_closed_form() {
        let rates = GbtRates::new(4.0, 2.0).unwrap();
        let gen = chain::Generator::build(1, &rates).unwrap();
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            let dist = gen.transient_distribution(chain::encode(&[GbtState::One]), t).unwrap();
            let expect_alive = (-t).exp();
            assert!((dist[1] - expect_alive).abs() < 1e-10, "P(alive) at t={t}: {}", dist[1]);
            assert!((dist[0] - (1.0 - expect_alive)).abs() < 1e-10);
            assert_eq!(dist[2], 0.0, "a lone 1 cannot become a 2");
        }
    }

    #[test]
    fn chain_marginals_sum_to_one() {
        let rates = GbtRates::new(4.0, 2.0).unwrap();
        let gen = chain::Generator::build(3, &rates).unwrap();
        let init = chain::encode(&[GbtState::Two, GbtState::One, GbtState::Empty]);
        let dist = gen.transient_distribution(init, 0.7).unwrap();
        let total: f64 = dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "mass {total}");
        assert!(dist.iter().all(|&p| p >= 0.0));
        let marg = chain::site_state_probabilities(&dist, 3);
        for (i, m) in marg.iter().enumerate() {
            let s: f64 = m.iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "site {i} marginal mass {s}");
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let rates = GbtRates::new(2.0, 1.0).unwrap();
        let _ = rates;
        for id in 0..chain::state_count(4) {
            assert_eq!(chain::encode(&chain::decode(id, 4)), id);
        }
        assert_eq!(chain::encode(&[GbtState::Two, GbtState::Empty]), 2);
        assert_eq!(chain::encode(&[GbtState::Empty, GbtState::Two]), 6);
        assert_eq!(chain::encode(&[GbtState::One, GbtState::One, GbtState::One]), 13);
    }

    #[test]
    fn sweep_and_direct_chain_agree_with_exact_distribution() {
        // Two sites, initial (2, 1): compare the empirical distribution of
        // both simulation routes against the exact transient distribution.
        let rates = GbtRates::new(3.0, 1.5).unwrap();
        let t_end = 0.8;
        let w = window(0, 1);
        let gen = chain::Generator::build(2, &rates).unwrap();
        let init_states = [GbtState::Two, GbtState::One];
        let exact = gen.transient_distribution(chain::encode(&init_states), t_end).unwrap();
        let n = 4000usize;
        let mut sweep_counts = vec![0usize; 9];
        let mut direct_counts = vec![0usize; 9];
        let init = GbtConfiguration::from_states(w, init_states.to_vec()).unwrap();
        for rep in 0..n {
            let seed = SeedRecord::for_replica(42, 0, rep as u64);
            let tl = EventTimeline::build(rates.timeline_params(w, t_end, seed)).unwrap();
            let traj = evolve_gbt(&tl, &Region::Full, &init, &EvolveOptions::default()).unwrap();
            let fin: Vec<GbtState> = w.sites().map(|x| traj.final_state.state(x)).collect();
            sweep_counts[chain::encode(&fin)] += 1;
            let dseed = SeedRecord::for_replica(42, 3, rep as u64);
            let fin = evolve_gbt_direct(&rates, t_end, dseed, &init).unwrap();
            let fin: Vec<GbtState> = w.sites().map(|x| fin.state(x)).collect();
            direct_counts[chain::encode(&fin)] += 1;
        }
        for (label, counts) in [("sweep", &sweep_counts), ("direct", &direct_counts)] {
            for id in 0..9 {
                let p = exact[id];
                let phat = counts[id] as f64 / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (phat - p).abs() <= 3.5 * sigma + 1e-12,
                    "{label}: state {id} empirical {phat} vs exact {p} (sigma {sigma})"
                );
            }
        }
    }
}
