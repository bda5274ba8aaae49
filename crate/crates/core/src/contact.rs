//! State evolution for the basic two-state process.
//!
//! Sites are vacant or occupied. A death mark clears its site; an arrow
//! from an occupied site to a vacant one occupies the target, provided
//! both endpoints lie inside the governing region at that instant. Sites
//! are cleared the moment they leave the region.
//!
//! Region exits need care because slice boundaries are rational while
//! event times are floats. Exits are scheduled at the slice top's float
//! envelope key: if the boundary is exactly representable, the closed
//! region still contains the site at the boundary instant, so the clear
//! applies after every event and checkpoint at that time; otherwise the
//! true boundary lies strictly below the key, so the clear applies before
//! them. The engine is written as a set of independent lanes consuming one
//! shared event stream so coupled processes (nested regions, different
//! initial states, different rules) see literally identical randomness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regions::{Region, SliceEnvelope};
use crate::substrate::{Event, EventSource, SiteWindow};

/// Occupancy on a window. `open_left` / `open_right` declare that the true
/// object continues past that side of the window (a clipped cofinite state),
/// so boundary contact there is expected rather than a clipping error.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    window: SiteWindow,
    occupied: Vec<bool>,
    open_left: bool,
    open_right: bool,
}

impl Configuration {
    pub fn empty(window: SiteWindow) -> Self {
        Configuration { window, occupied: vec![false; window.len()], open_left: false, open_right: false }
    }

    pub fn all_occupied(window: SiteWindow) -> Self {
        Configuration {
            window,
            occupied: vec![true; window.len()],
            open_left: true,
            open_right: true,
        }
    }

    pub fn single(window: SiteWindow, x: i64) -> Result<Self> {
        let mut c = Configuration::empty(window);
        if !window.contains(x) {
            return Err(Error::OutOfWindow { x, t: 0.0 });
        }
        c.occupied[window.index(x)] = true;
        Ok(c)
    }

    /// Occupy every window site in `[a, b]`.
    pub fn interval(window: SiteWindow, a: i64, b: i64) -> Result<Self> {
        if a > b {
            return Err(Error::invalid(format!("empty initial interval [{a}, {b}]")));
        }
        if !window.contains(a) || !window.contains(b) {
            return Err(Error::invalid(format!(
                "initial interval [{a}, {b}] leaves the window [{}, {}]",
                window.min, window.max
            )));
        }
        let mut c = Configuration::empty(window);
        for x in a..=b {
            c.occupied[window.index(x)] = true;
        }
        Ok(c)
    }

    /// Occupy every site `<= threshold`: a clipped view of a state that is
    /// fully occupied on the left half-line.
    pub fn left_occupied(window: SiteWindow, threshold: i64) -> Self {
        let mut c = Configuration::empty(window);
        for x in window.sites() {
            if x <= threshold {
                c.occupied[window.index(x)] = true;
            }
        }
        c.open_left = true;
        c
    }

    pub fn from_sites(window: SiteWindow, sites: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut c = Configuration::empty(window);
        for x in sites {
            if !window.contains(x) {
                return Err(Error::OutOfWindow { x, t: 0.0 });
            }
            c.occupied[window.index(x)] = true;
        }
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
    pub fn occupied(&self, x: i64) -> bool {
        self.window.contains(x) && self.occupied[self.window.index(x)]
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupied.iter().any(|&b| b)
    }

    pub fn leftmost(&self) -> Option<i64> {
        self.occupied.iter().position(|&b| b).map(|i| self.window.min + i as i64)
    }

    pub fn rightmost(&self) -> Option<i64> {
        self.occupied.iter().rposition(|&b| b).map(|i| self.window.min + i as i64)
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = i64> + '_ {
        self.window.sites().filter(move |&x| self.occupied[self.window.index(x)])
    }

    pub fn open_left(&self) -> bool {
        self.open_left
    }

    pub fn open_right(&self) -> bool {
        self.open_right
    }

    /// Pointwise containment on the common window.
    pub fn subset_of(&self, other: &Configuration) -> bool {
        self.occupied_sites().all(|x| other.occupied(x))
    }
}

/// One recorded state flip. `after` marks flips that take effect just after
/// time `t` (clears on an exactly representable region boundary, where the
/// closed region still contains the site at `t` itself).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub t: f64,
    pub x: i64,
    pub occupied: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub after: bool,
}

#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    /// Evolve over `(start, end]`; `end` defaults to the timeline horizon.
    pub start: f64,
    pub end: Option<f64>,
    /// Snapshot times, strictly increasing, inside `(start, end]`.
    pub checkpoints: Vec<f64>,
    /// Record every state flip (needed for replay and edge extraction).
    pub record_changes: bool,
}

/// Result of one evolution run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub region: Region,
    pub start: f64,
    pub end: f64,
    /// Initial state after clearing sites outside the region at `start`.
    pub initial: Configuration,
    pub changes: Vec<Change>,
    pub checkpoint_states: Vec<(f64, Configuration)>,
    pub final_state: Configuration,
    /// An occupied site sat on the window boundary at some point (clipping
    /// may have altered the run). Not raised for declared-open sides.
    pub touched_left: bool,
    pub touched_right: bool,
    /// First time the window became empty, if it did.
    pub extinct_at: Option<f64>,
}

impl Trajectory {
    pub fn survived(&self) -> bool {
        !self.final_state.is_empty()
    }

    pub fn touched_closed_side(&self) -> bool {
        self.touched_left || self.touched_right
    }

    /// Replay the recorded changes to the state at time `t`.
    pub fn state_at(&self, t: f64) -> Result<Configuration> {
        if !(self.start..=self.end).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [{}, {}]", self.start, self.end)));
        }
        let mut state = self.initial.clone();
        for c in &self.changes {
            if c.t > t || (c.t == t && c.after) {
                break;
            }
            let i = state.window.index(c.x);
            state.occupied[i] = c.occupied;
        }
        Ok(state)
    }
}

/// A clear scheduled where a site slice leaves the region. `late` clears
/// apply after other events at the same float time (exact closed boundary);
/// early ones apply before (true boundary strictly below the float key).
#[derive(Clone, Copy, Debug)]
struct ExitEvent {
    t: f64,
    late: bool,
    x: i64,
}

/// Ordered schedule of region-exit clears for one lane.
#[derive(Default)]
pub(crate) struct ExitSchedule {
    exits: Vec<ExitEvent>,
    pos: usize,
}

impl ExitSchedule {
    /// Build from slice envelopes; exits at or before `start` are dropped
    /// (the caller clears the initial state against the region itself).
    pub(crate) fn new(window: SiteWindow, slices: &[Option<SliceEnvelope>], start: f64) -> Self {
        let mut exits: Vec<ExitEvent> = slices
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let ub = s.as_ref()?.ub;
                if ub.is_unbounded() {
                    None
                } else {
                    Some(ExitEvent { t: ub.key, late: ub.exact, x: window.min + i as i64 })
                }
            })
            .collect();
        exits.sort_by(|a, b| {
            a.t.total_cmp(&b.t).then_with(|| a.late.cmp(&b.late)).then_with(|| a.x.cmp(&b.x))
        });
        let mut pos = 0;
        while pos < exits.len() {
            let e = exits[pos];
            if e.t < start || (e.t == start && !e.late) {
                pos += 1;
            } else {
                break;
            }
        }
        ExitSchedule { exits, pos }
    }

    /// Apply every clear that precedes the instant `(t, class)` where
    /// `class` is a death, arrow or checkpoint (all of which sort between
    /// early and late exits at equal times).
    pub(crate) fn apply_before(&mut self, t: f64, mut clear: impl FnMut(i64, f64, bool)) {
        while self.pos < self.exits.len() {
            let e = self.exits[self.pos];
            if e.t < t || (e.t == t && !e.late) {
                clear(e.x, e.t, e.late);
                self.pos += 1;
            } else {
                break;
            }
        }
    }
}

/// One participant of a sweep over a shared event stream.
pub(crate) trait SweepLane {
    fn on_event(&mut self, ev: &Event);
    fn on_checkpoint(&mut self, t: f64);
    fn finish(&mut self, end: f64);
    /// No future event can change this lane's outputs.
    fn settled(&self) -> bool {
        false
    }
}

/// Feed one ordered event stream to several lanes, firing shared
/// checkpoints between events. Events at `t <= start` are skipped; events
/// at `t > end` terminate the sweep. Stops early when every lane reports
/// itself settled.
pub(crate) fn run_sweep<E, L>(
    events: E,
    start: f64,
    end: f64,
    checkpoints: &[f64],
    lanes: &mut [&mut L],
) -> Result<()>
where
    E: Iterator<Item = Event>,
    L: SweepLane + ?Sized,
{
    if !(start.is_finite() && end.is_finite()) || start > end {
        return Err(Error::invalid(format!("bad sweep range [{start}, {end}]")));
    }
    let mut prev = start;
    for &c in checkpoints {
        if c <= prev || c > end {
            return Err(Error::invalid("checkpoints must be strictly increasing inside (start, end]"));
        }
        prev = c;
    }
    let mut cp = checkpoints.iter().copied().peekable();
    for ev in events {
        let t = ev.t();
        if t <= start {
            continue;
        }
        if t > end {
            break;
        }
        while let Some(&c) = cp.peek() {
            if c < t {
                for lane in lanes.iter_mut() {
                    lane.on_checkpoint(c);
                }
                cp.next();
            } else {
                break;
            }
        }
        for lane in lanes.iter_mut() {
            lane.on_event(&ev);
        }
        if lanes.iter().all(|l| l.settled()) {
            break;
        }
    }
    for c in cp {
        for lane in lanes.iter_mut() {
            lane.on_checkpoint(c);
        }
    }
    for lane in lanes.iter_mut() {
        lane.finish(end);
    }
    Ok(())
}

/// Two-state lane: occupancy evolution under one region.
pub(crate) struct ContactLane {
    window: SiteWindow,
    slices: Vec<Option<SliceEnvelope>>,
    exits: ExitSchedule,
    state: Vec<bool>,
    count: usize,
    record: bool,
    changes: Vec<Change>,
    snapshots: Vec<(f64, Configuration)>,
    open_left: bool,
    open_right: bool,
    touched_left: bool,
    touched_right: bool,
    extinct_at: Option<f64>,
    finished: bool,
}

impl ContactLane {
    pub(crate) fn new(
        region: &Region,
        initial: &Configuration,
        start: f64,
        record: bool,
    ) -> Result<Self> {
        let window = initial.window();
        let slices = region.site_envelopes(window);
        let mut state = vec![false; window.len()];
        let mut count = 0;
        for x in initial.occupied_sites() {
            let i = window.index(x);
            if slices[i].as_ref().is_some_and(|s| s.admits(start)) {
                state[i] = true;
                count += 1;
            }
        }
        let exits = ExitSchedule::new(window, &slices, start);
        let mut lane = ContactLane {
            window,
            slices,
            exits,
            state,
            count,
            record,
            changes: Vec::new(),
            snapshots: Vec::new(),
            open_left: initial.open_left(),
            open_right: initial.open_right(),
            touched_left: false,
            touched_right: false,
            extinct_at: None,
            finished: false,
        };
        lane.note_touches();
        Ok(lane)
    }

    #[inline]
    fn admits(&self, x: i64, t: f64) -> bool {
        self.slices[self.window.index(x)].as_ref().is_some_and(|s| s.admits(t))
    }

    fn note_touches(&mut self) {
        if !self.open_left && self.state[0] {
            self.touched_left = true;
        }
        if !self.open_right && self.state[self.window.len() - 1] {
            self.touched_right = true;
        }
    }

    fn set_site(&mut self, x: i64, occupied: bool, t: f64, after: bool) {
        let i = self.window.index(x);
        if self.state[i] == occupied {
            return;
        }
        self.state[i] = occupied;
        if occupied {
            self.count += 1;
            self.extinct_at = None;
            if !self.open_left && i == 0 {
                self.touched_left = true;
            }
            if !self.open_right && i == self.window.len() - 1 {
                self.touched_right = true;
            }
        } else {
            self.count -= 1;
            if self.count == 0 && self.extinct_at.is_none() {
                self.extinct_at = Some(t);
            }
        }
        if self.record {
            self.changes.push(Change { t, x, occupied, after });
        }
    }

    fn apply_exits_before(&mut self, t: f64) {
        let mut exits = std::mem::take(&mut self.exits);
        exits.apply_before(t, |x, te, late| self.set_site(x, false, te, late));
        self.exits = exits;
    }

    fn snapshot(&self) -> Configuration {
        Configuration {
            window: self.window,
            occupied: self.state.clone(),
            open_left: self.open_left,
            open_right: self.open_right,
        }
    }

    pub(crate) fn into_trajectory(
        self,
        region: Region,
        start: f64,
        end: f64,
        initial: Configuration,
    ) -> Trajectory {
        debug_assert!(self.finished);
        let final_state = self.snapshot();
        Trajectory {
            region,
            start,
            end,
            initial,
            changes: self.changes,
            checkpoint_states: self.snapshots,
            final_state,
            touched_left: self.touched_left,
            touched_right: self.touched_right,
            extinct_at: self.extinct_at,
        }
    }
}

impl SweepLane for ContactLane {
    fn on_event(&mut self, ev: &Event) {
        match *ev {
            Event::Death { x, t } => {
                self.apply_exits_before(t);
                self.set_site(x, false, t, false);
            }
            Event::Arrow { from, to, t, .. } => {
                self.apply_exits_before(t);
                let fi = self.window.index(from);
                if self.state[fi] && !self.state[self.window.index(to)] && self.admits(to, t) {
                    debug_assert!(self.admits(from, t), "occupied site must sit inside the region");
                    self.set_site(to, true, t, false);
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
        self.finished = true;
    }

    fn settled(&self) -> bool {
        self.count == 0
    }
}

/// Evolve `initial` under `region` over the events of `source`.
pub fn evolve<S: EventSource + ?Sized>(
    source: &S,
    region: &Region,
    initial: &Configuration,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
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
    let mut lane = ContactLane::new(region, initial, opts.start, opts.record_changes)?;
    let stored_initial = lane.snapshot();
    run_sweep(source.events_boxed(), opts.start, end, &opts.checkpoints, &mut [&mut lane])?;
    Ok(lane.into_trajectory(region.clone(), opts.start, end, stored_initial))
}

/// Evolve several `(region, initial)` lanes over one shared event sweep.
/// Every lane sees the same events in the same order, so the runs are
/// coupled pathwise; results match per-lane [`evolve`] calls exactly while
/// scanning the event stream once.
pub fn evolve_many<S: EventSource + ?Sized>(
    source: &S,
    lane_specs: &[(&Region, &Configuration)],
    opts: &EvolveOptions,
) -> Result<Vec<Trajectory>> {
    let params = source.params();
    let end = opts.end.unwrap_or(params.horizon);
    if !(0.0..=params.horizon).contains(&opts.start) || !(opts.start..=params.horizon).contains(&end) {
        return Err(Error::invalid(format!(
            "evolve range [{}, {end}] outside [0, {}]",
            opts.start, params.horizon
        )));
    }
    let mut lanes = Vec::with_capacity(lane_specs.len());
    let mut initials = Vec::with_capacity(lane_specs.len());
    for (region, initial) in lane_specs {
        if initial.window() != params.window {
            return Err(Error::invalid("initial configuration window does not match the timeline"));
        }
        let lane = ContactLane::new(region, initial, opts.start, opts.record_changes)?;
        initials.push(lane.snapshot());
        lanes.push(lane);
    }
    {
        let mut refs: Vec<&mut ContactLane> = lanes.iter_mut().collect();
        run_sweep(source.events_boxed(), opts.start, end, &opts.checkpoints, &mut refs)?;
    }
    Ok(lanes
        .into_iter()
        .zip(lane_specs)
        .zip(initials)
        .map(|((lane, (region, _)), init)| lane.into_trajectory((*region).clone(), opts.start, end, init))
        .collect())
}

/// Left and right ends of the occupied set over time, piecewise constant
/// between entries; recorded at every instant the pair changes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgePath {
    pub entries: Vec<EdgeEntry>,
    pub extinct_at: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub t: f64,
    pub left: i64,
    pub right: i64,
}

impl EdgePath {
    /// Edge positions in force at time `t` (last entry at or before `t`).
    pub fn at(&self, t: f64) -> Option<EdgeEntry> {
        let i = self.entries.partition_point(|e| e.t <= t);
        if i == 0 {
            None
        } else {
            Some(self.entries[i - 1])
        }
    }
}

/// Track the leftmost and rightmost occupied sites along a recorded
/// trajectory. Requires `record_changes`.
pub fn extract_edges(traj: &Trajectory) -> Result<EdgePath> {
    use std::collections::BTreeSet;
    let mut occ: BTreeSet<i64> = traj.initial.occupied_sites().collect();
    if occ.is_empty() {
        return Ok(EdgePath { entries: Vec::new(), extinct_at: Some(traj.start) });
    }
    let mut entries = vec![EdgeEntry {
        t: traj.start,
        left: *occ.first().unwrap(),
        right: *occ.last().unwrap(),
    }];
    for c in &traj.changes {
        if c.occupied {
            occ.insert(c.x);
        } else {
            occ.remove(&c.x);
        }
        if occ.is_empty() {
            return Ok(EdgePath { entries, extinct_at: Some(c.t) });
        }
        let (l, r) = (*occ.first().unwrap(), *occ.last().unwrap());
        let last = entries.last().unwrap();
        if l != last.left || r != last.right {
            entries.push(EdgeEntry { t: c.t, left: l, right: r });
        }
    }
    let rebuilt: BTreeSet<i64> = traj.final_state.occupied_sites().collect();
    if rebuilt != occ {
        return Err(Error::InternalConsistency(
            "edge extraction needs record_changes; trajectory has incomplete change records".into(),
        ));
    }
    Ok(EdgePath { entries, extinct_at: None })
}
