//! Poisson event timelines (graphical construction).
//!
//! A timeline holds, for a finite site window and time horizon, the death
//! marks of every site (rate 1) and the arrow times of every directed
//! nearest-neighbor edge (rate lambda). Arrows carry an optional `one_only`
//! label drawn with probability `one_only_prob`; label draws are consumed
//! even when the probability is zero so that arrow times depend only on
//! (window, horizon, lambda, seed).
//!
//! Every stream has its own counter-keyed generator, so a timeline can be
//! materialized up front or generated lazily in time order with bit-identical
//! results. The merged event order is total: time, then deaths before
//! arrows, then source site, then target.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{exp_gap, stream_rng, unit_f64, SeedRecord, StreamKind};

/// Inclusive range of lattice sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteWindow {
    pub min: i64,
    pub max: i64,
}

impl SiteWindow {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::invalid(format!("empty site window [{min}, {max}]")));
        }
        Ok(SiteWindow { min, max })
    }

    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn contains(&self, x: i64) -> bool {
        self.min <= x && x <= self.max
    }

    #[inline]
    pub fn index(&self, x: i64) -> usize {
        debug_assert!(self.contains(x));
        (x - self.min) as usize
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.min..=self.max
    }
}

/// A point of the space-time lattice strip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: i64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: i64, t: f64) -> Self {
        SpaceTimePoint { x, t }
    }
}

/// Parameters that identify a timeline completely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineParams {
    pub window: SiteWindow,
    pub horizon: f64,
    pub lambda: f64,
    pub one_only_prob: f64,
    pub seed: SeedRecord,
}

impl TimelineParams {
    pub fn validate(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon < 0.0 {
            return Err(Error::invalid("horizon must be finite and >= 0"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.one_only_prob) {
            return Err(Error::invalid("one_only_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One event of the merged timeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    Death { x: i64, t: f64 },
    Arrow { from: i64, to: i64, t: f64, one_only: bool },
}

impl Event {
    #[inline]
    pub fn t(&self) -> f64 {
        match self {
            Event::Death { t, .. } | Event::Arrow { t, .. } => *t,
        }
    }

    #[cfg(test)]
    fn heap_key(&self) -> HeapKey {
        match *self {
            Event::Death { x, t } => HeapKey { t, class: 0, from: x, to: x },
            Event::Arrow { from, to, t, .. } => HeapKey { t, class: 1, from, to },
        }
    }
}

/// Total order on events: time, deaths first, then source, then target.
#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapKey {
    t: f64,
    class: u8,
    from: i64,
    to: i64,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.t
            .total_cmp(&other.t)
            .then_with(|| self.class.cmp(&other.class))
            .then_with(|| self.from.cmp(&other.from))
            .then_with(|| self.to.cmp(&other.to))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Arrow events of one directed edge, in increasing time order.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeArrows {
    pub from: i64,
    pub to: i64,
    pub times: Vec<f64>,
    pub one_only: Vec<bool>,
}

struct DeathGen {
    rng: ChaCha8Rng,
    t: f64,
    horizon: f64,
}

impl DeathGen {
    fn new(seed: SeedRecord, site: i64, horizon: f64) -> Self {
        DeathGen { rng: stream_rng(seed, StreamKind::Death, site), t: 0.0, horizon }
    }

    fn next(&mut self) -> Option<f64> {
        let mut nt = self.t + exp_gap(&mut self.rng, 1.0);
        if nt <= self.t {
            nt = self.t.next_up();
        }
        if nt > self.horizon {
            return None;
        }
        self.t = nt;
        Some(nt)
    }
}

struct ArrowGen {
    rng: ChaCha8Rng,
    t: f64,
    horizon: f64,
    lambda: f64,
    one_only_prob: f64,
}

impl ArrowGen {
    fn new(seed: SeedRecord, kind: StreamKind, source: i64, horizon: f64, lambda: f64, p: f64) -> Self {
        ArrowGen { rng: stream_rng(seed, kind, source), t: 0.0, horizon, lambda, one_only_prob: p }
    }

    /// Label drawn only for kept events, after the time draw.
    fn next(&mut self) -> Option<(f64, bool)> {
        if self.lambda == 0.0 {
            return None;
        }
        let mut nt = self.t + exp_gap(&mut self.rng, self.lambda);
        if nt <= self.t {
            nt = self.t.next_up();
        }
        if nt > self.horizon {
            return None;
        }
        self.t = nt;
        let label = unit_f64(&mut self.rng) < self.one_only_prob;
        Some((nt, label))
    }
}

fn edge_kind(from: i64, to: i64) -> StreamKind {
    if to == from - 1 {
        StreamKind::ArrowLeft
    } else {
        StreamKind::ArrowRight
    }
}

/// Fully materialized timeline.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTimeline {
    params: TimelineParams,
    deaths: Vec<Vec<f64>>,
    arrows: Vec<EdgeArrows>,
}

impl EventTimeline {
    /// Draw every stream of the window up to the horizon.
    pub fn build(params: TimelineParams) -> Result<Self> {
        params.validate()?;
        let window = params.window;
        let mut deaths = Vec::with_capacity(window.len());
        for x in window.sites() {
            let mut gen = DeathGen::new(params.seed, x, params.horizon);
            let mut v = Vec::new();
            while let Some(t) = gen.next() {
                v.push(t);
            }
            deaths.push(v);
        }
        let mut arrows = Vec::new();
        for x in window.sites() {
            for to in [x - 1, x + 1] {
                if !window.contains(to) {
                    continue;
                }
                let mut gen = ArrowGen::new(
                    params.seed,
                    edge_kind(x, to),
                    x,
                    params.horizon,
                    params.lambda,
                    params.one_only_prob,
                );
                let mut times = Vec::new();
                let mut labels = Vec::new();
                while let Some((t, l)) = gen.next() {
                    times.push(t);
                    labels.push(l);
                }
                arrows.push(EdgeArrows { from: x, to, times, one_only: labels });
            }
        }
        Ok(EventTimeline { params, deaths, arrows })
    }

    /// Assemble from explicit event lists (deserialization and tests).
    pub fn from_parts(params: TimelineParams, deaths: Vec<Vec<f64>>, arrows: Vec<EdgeArrows>) -> Result<Self> {
        params.validate()?;
        if deaths.len() != params.window.len() {
            return Err(Error::invalid("death stream count does not match window"));
        }
        for (i, v) in deaths.iter().enumerate() {
            let x = params.window.min + i as i64;
            validate_times(v, params.horizon, &format!("deaths at {x}"))?;
        }
        for e in &arrows {
            if (e.from - e.to).abs() != 1 {
                return Err(Error::invalid(format!("arrow {} -> {} is not nearest-neighbor", e.from, e.to)));
            }
            if !params.window.contains(e.from) || !params.window.contains(e.to) {
                return Err(Error::invalid(format!("arrow {} -> {} leaves the window", e.from, e.to)));
            }
            if e.times.len() != e.one_only.len() {
                return Err(Error::invalid("arrow labels out of step with times"));
            }
            validate_times(&e.times, params.horizon, &format!("arrows {} -> {}", e.from, e.to))?;
        }
        Ok(EventTimeline { params, deaths, arrows })
    }

    pub fn params(&self) -> &TimelineParams {
        &self.params
    }

    /// Exact sub-view over a narrower window and shorter horizon. Because
    /// site streams never depend on the window, this equals `build` run
    /// directly on the smaller parameters, event for event.
    pub fn restricted(&self, window: SiteWindow, horizon: f64) -> Result<EventTimeline> {
        if window.min < self.params.window.min || window.max > self.params.window.max {
            return Err(Error::invalid(format!(
                "restricted window [{}, {}] leaves the source window [{}, {}]",
                window.min, window.max, self.params.window.min, self.params.window.max
            )));
        }
        if !(0.0..=self.params.horizon).contains(&horizon) {
            return Err(Error::invalid(format!(
                "restricted horizon {horizon} outside [0, {}]",
                self.params.horizon
            )));
        }
        let params = TimelineParams { window, horizon, ..self.params.clone() };
        let deaths = window
            .sites()
            .map(|x| {
                let v = &self.deaths[self.params.window.index(x)];
                v[..v.partition_point(|&t| t <= horizon)].to_vec()
            })
            .collect();
        let arrows = self
            .arrows
            .iter()
            .filter(|e| window.contains(e.from) && window.contains(e.to))
            .map(|e| {
                let n = e.times.partition_point(|&t| t <= horizon);
                EdgeArrows {
                    from: e.from,
                    to: e.to,
                    times: e.times[..n].to_vec(),
                    one_only: e.one_only[..n].to_vec(),
                }
            })
            .collect();
        EventTimeline::from_parts(params, deaths, arrows)
    }

    pub fn window(&self) -> SiteWindow {
        self.params.window
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn deaths_at(&self, x: i64) -> &[f64] {
        &self.deaths[self.params.window.index(x)]
    }

    pub fn arrow_streams(&self) -> &[EdgeArrows] {
        &self.arrows
    }

    pub fn arrows_from(&self, x: i64) -> impl Iterator<Item = &EdgeArrows> {
        self.arrows.iter().filter(move |e| e.from == x)
    }

    pub fn death_count(&self) -> usize {
        self.deaths.iter().map(Vec::len).sum()
    }

    pub fn arrow_count(&self) -> usize {
        self.arrows.iter().map(|e| e.times.len()).sum()
    }

    /// Events in the canonical merged order.
    pub fn events(&self) -> MergedEvents<'_> {
        let mut heap = BinaryHeap::new();
        for (i, v) in self.deaths.iter().enumerate() {
            if let Some(&t) = v.first() {
                let x = self.params.window.min + i as i64;
                heap.push(Reverse((HeapKey { t, class: 0, from: x, to: x }, StreamRef::Death(i), 0usize)));
            }
        }
        for (i, e) in self.arrows.iter().enumerate() {
            if let Some(&t) = e.times.first() {
                heap.push(Reverse((HeapKey { t, class: 1, from: e.from, to: e.to }, StreamRef::Arrow(i), 0usize)));
            }
        }
        MergedEvents { tl: self, heap }
    }

    /// The sub-timeline traversable by 2-paths: drops every `one_only`
    /// arrow. The remaining arrows form rate `lambda * (1 - one_only_prob)`
    /// streams.
    pub fn two_path_subtimeline(&self) -> EventTimeline {
        let mut params = self.params.clone();
        params.lambda *= 1.0 - self.params.one_only_prob;
        params.one_only_prob = 0.0;
        let arrows = self
            .arrows
            .iter()
            .map(|e| {
                let mut times = Vec::new();
                for (i, &t) in e.times.iter().enumerate() {
                    if !e.one_only[i] {
                        times.push(t);
                    }
                }
                let n = times.len();
                EdgeArrows { from: e.from, to: e.to, times, one_only: vec![false; n] }
            })
            .collect();
        EventTimeline { params, deaths: self.deaths.clone(), arrows }
    }

    /// Serialize as JSON lines: one header record, then events in merged order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = JsonRecord::Header {
            window: (self.params.window.min, self.params.window.max),
            horizon: self.params.horizon,
            lambda: self.params.lambda,
            one_only_prob: self.params.one_only_prob,
            seed: self.params.seed,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for ev in self.events() {
            let rec = match ev {
                Event::Death { x, t } => JsonRecord::Death { x, t },
                Event::Arrow { from, to, t, one_only } => JsonRecord::Arrow { x: from, y: to, t, one_only },
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty timeline file".into()))??;
        let header: JsonRecord = serde_json::from_str(&first)?;
        let params = match header {
            JsonRecord::Header { window, horizon, lambda, one_only_prob, seed } => TimelineParams {
                window: SiteWindow::new(window.0, window.1)?,
                horizon,
                lambda,
                one_only_prob,
                seed,
            },
            _ => return Err(Error::Parse("first record must be the header".into())),
        };
        let window = params.window;
        let mut deaths = vec![Vec::new(); window.len()];
        let mut arrow_index = std::collections::HashMap::new();
        let mut arrows: Vec<EdgeArrows> = Vec::new();
        for x in window.sites() {
            for to in [x - 1, x + 1] {
                if window.contains(to) {
                    arrow_index.insert((x, to), arrows.len());
                    arrows.push(EdgeArrows { from: x, to, times: Vec::new(), one_only: Vec::new() });
                }
            }
        }
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                JsonRecord::Header { .. } => {
                    return Err(Error::Parse("duplicate header record".into()));
                }
                JsonRecord::Death { x, t } => {
                    if !window.contains(x) {
                        return Err(Error::OutOfWindow { x, t });
                    }
                    deaths[window.index(x)].push(t);
                }
                JsonRecord::Arrow { x, y, t, one_only } => {
                    let idx = *arrow_index
                        .get(&(x, y))
                        .ok_or(Error::OutOfWindow { x, t })?;
                    arrows[idx].times.push(t);
                    arrows[idx].one_only.push(one_only);
                }
            }
        }
        EventTimeline::from_parts(params, deaths, arrows)
    }
}

fn validate_times(v: &[f64], horizon: f64, what: &str) -> Result<()> {
    let mut prev = 0.0;
    for &t in v {
        if !t.is_finite() || t <= prev || t > horizon {
            return Err(Error::invalid(format!("{what}: times must be strictly increasing in (0, horizon]")));
        }
        prev = t;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum StreamRef {
    Death(usize),
    Arrow(usize),
}

/// Iterator over a materialized timeline in merged order.
pub struct MergedEvents<'a> {
    tl: &'a EventTimeline,
    heap: BinaryHeap<Reverse<(HeapKey, StreamRef, usize)>>,
}

impl Iterator for MergedEvents<'_> {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        let Reverse((key, stream, pos)) = self.heap.pop()?;
        let ev = match stream {
            StreamRef::Death(_) => Event::Death { x: key.from, t: key.t },
            StreamRef::Arrow(i) => {
                let e = &self.tl.arrows[i];
                Event::Arrow { from: e.from, to: e.to, t: key.t, one_only: e.one_only[pos] }
            }
        };
        let next_pos = pos + 1;
        match stream {
            StreamRef::Death(i) => {
                if let Some(&t) = self.tl.deaths[i].get(next_pos) {
                    self.heap.push(Reverse((
                        HeapKey { t, class: 0, from: key.from, to: key.from },
                        stream,
                        next_pos,
                    )));
                }
            }
            StreamRef::Arrow(i) => {
                let e = &self.tl.arrows[i];
                if let Some(&t) = e.times.get(next_pos) {
                    self.heap.push(Reverse((
                        HeapKey { t, class: 1, from: e.from, to: e.to },
                        stream,
                        next_pos,
                    )));
                }
            }
        }
        Some(ev)
    }
}

/// Lazily generated timeline: same streams, same merged order, O(window)
/// memory. `events()` restarts generation from the seeds each call.
pub struct StreamingTimeline {
    params: TimelineParams,
}

impl StreamingTimeline {
    pub fn new(params: TimelineParams) -> Result<Self> {
        params.validate()?;
        Ok(StreamingTimeline { params })
    }

    pub fn params(&self) -> &TimelineParams {
        &self.params
    }

    pub fn events(&self) -> StreamingEvents {
        let p = &self.params;
        let mut heap = BinaryHeap::new();
        for x in p.window.sites() {
            let mut gen = DeathGen::new(p.seed, x, p.horizon);
            if let Some(t) = gen.next() {
                heap.push(Reverse(LiveCursor {
                    key: HeapKey { t, class: 0, from: x, to: x },
                    one_only: false,
                    gen: GenState::Death(gen),
                }));
            }
            for to in [x - 1, x + 1] {
                if !p.window.contains(to) {
                    continue;
                }
                let mut gen = ArrowGen::new(p.seed, edge_kind(x, to), x, p.horizon, p.lambda, p.one_only_prob);
                if let Some((t, l)) = gen.next() {
                    heap.push(Reverse(LiveCursor {
                        key: HeapKey { t, class: 1, from: x, to },
                        one_only: l,
                        gen: GenState::Arrow(gen),
                    }));
                }
            }
        }
        StreamingEvents { heap }
    }
}

enum GenState {
    Death(DeathGen),
    Arrow(ArrowGen),
}

struct LiveCursor {
    key: HeapKey,
    one_only: bool,
    gen: GenState,
}

impl PartialEq for LiveCursor {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for LiveCursor {}
impl PartialOrd for LiveCursor {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for LiveCursor {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

pub struct StreamingEvents {
    heap: BinaryHeap<Reverse<LiveCursor>>,
}

impl Iterator for StreamingEvents {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        let Reverse(mut cur) = self.heap.pop()?;
        let ev = match &cur.gen {
            GenState::Death(_) => Event::Death { x: cur.key.from, t: cur.key.t },
            GenState::Arrow(_) => Event::Arrow {
                from: cur.key.from,
                to: cur.key.to,
                t: cur.key.t,
                one_only: cur.one_only,
            },
        };
        let advanced = match &mut cur.gen {
            GenState::Death(g) => g.next().map(|t| (t, false)),
            GenState::Arrow(g) => g.next(),
        };
        if let Some((t, l)) = advanced {
            cur.key.t = t;
            cur.one_only = l;
            self.heap.push(Reverse(cur));
        }
        Some(ev)
    }
}

/// Anything that can hand out the merged event sequence of a timeline.
pub trait EventSource {
    fn params(&self) -> &TimelineParams;
    fn events_boxed<'a>(&'a self) -> Box<dyn Iterator<Item = Event> + 'a>;
}

impl EventSource for EventTimeline {
    fn params(&self) -> &TimelineParams {
        &self.params
    }
    fn events_boxed<'a>(&'a self) -> Box<dyn Iterator<Item = Event> + 'a> {
        Box::new(self.events())
    }
}

impl EventSource for StreamingTimeline {
    fn params(&self) -> &TimelineParams {
        &self.params
    }
    fn events_boxed<'a>(&'a self) -> Box<dyn Iterator<Item = Event> + 'a> {
        Box::new(self.events())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JsonRecord {
    Header {
        window: (i64, i64),
        horizon: f64,
        lambda: f64,
        one_only_prob: f64,
        seed: SeedRecord,
    },
    Death {
        x: i64,
        t: f64,
    },
    Arrow {
        x: i64,
        y: i64,
        t: f64,
        one_only: bool,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(window: (i64, i64), horizon: f64, lambda: f64, p: f64, seed: u64) -> TimelineParams {
        TimelineParams {
            window: SiteWindow::new(window.0, window.1).unwrap(),
            horizon,
            lambda,
            one_only_prob: p,
            seed: SeedRecord::new(seed, 0),
        }
    }

    #[test]
    fn window_validation() {
        assert!(SiteWindow::new(3, 2).is_err());
        assert!(SiteWindow::new(2, 2).is_ok());
        assert_eq!(SiteWindow::new(-2, 2).unwrap().len(), 5);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(EventTimeline::build(params((0, 9), -1.0, 1.0, 0.0, 1)).is_err());
        assert!(EventTimeline::build(params((0, 9), 1.0, -1.0, 0.0, 1)).is_err());
        assert!(EventTimeline::build(params((0, 9), 1.0, 1.0, 1.5, 1)).is_err());
    }

    #[test]
    fn zero_horizon_and_zero_lambda() {
        let tl = EventTimeline::build(params((0, 9), 0.0, 2.0, 0.0, 1)).unwrap();
        assert_eq!(tl.death_count() + tl.arrow_count(), 0);
        let tl = EventTimeline::build(params((0, 9), 10.0, 0.0, 0.0, 1)).unwrap();
        assert_eq!(tl.arrow_count(), 0);
        assert!(tl.death_count() > 0, "deaths still occur at lambda = 0");
    }

    #[test]
    fn identical_parameters_identical_timeline() {
        let a = EventTimeline::build(params((0, 19), 5.0, 2.0, 0.5, 99)).unwrap();
        let b = EventTimeline::build(params((0, 19), 5.0, 2.0, 0.5, 99)).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_jsonl(&mut buf_a).unwrap();
        b.write_jsonl(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b, "serialized forms must be byte-identical");
        let c = EventTimeline::build(params((0, 19), 5.0, 2.0, 0.5, 100)).unwrap();
        assert_ne!(a, c, "different master seed should change the draw");
    }

    #[test]
    fn restricted_view_equals_direct_build() {
        let big = EventTimeline::build(params((-10, 10), 6.0, 2.5, 0.3, 17)).unwrap();
        let small = EventTimeline::build(params((-3, 4), 2.5, 2.5, 0.3, 17)).unwrap();
        let view = big.restricted(SiteWindow::new(-3, 4).unwrap(), 2.5).unwrap();
        assert_eq!(view, small, "sub-view must reproduce a direct build, stream for stream");
        assert!(big.restricted(SiteWindow::new(-11, 0).unwrap(), 2.0).is_err());
        assert!(big.restricted(SiteWindow::new(0, 3).unwrap(), 7.0).is_err());
    }

    #[test]
    fn arrow_times_do_not_depend_on_label_probability() {
        let a = EventTimeline::build(params((0, 9), 4.0, 3.0, 0.0, 7)).unwrap();
        let b = EventTimeline::build(params((0, 9), 4.0, 3.0, 0.5, 7)).unwrap();
        for (ea, eb) in a.arrow_streams().iter().zip(b.arrow_streams()) {
            assert_eq!(ea.times, eb.times);
        }
        assert!(a.arrow_streams().iter().all(|e| e.one_only.iter().all(|&l| !l)));
        assert!(b.arrow_streams().iter().any(|e| e.one_only.iter().any(|&l| l)));
    }

    #[test]
    fn merged_order_is_sorted_with_tie_classes() {
        let tl = EventTimeline::build(params((0, 14), 8.0, 2.5, 0.3, 5)).unwrap();
        let evs: Vec<Event> = tl.events().collect();
        assert_eq!(evs.len(), tl.death_count() + tl.arrow_count());
        for w in evs.windows(2) {
            assert!(w[0].heap_key() <= w[1].heap_key(), "events out of order: {:?} then {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn streaming_matches_materialized() {
        let p = params((-5, 24), 6.0, 3.0, 0.4, 2024);
        let tl = EventTimeline::build(p.clone()).unwrap();
        let st = StreamingTimeline::new(p).unwrap();
        let a: Vec<Event> = tl.events().collect();
        let b: Vec<Event> = st.events().collect();
        assert_eq!(a, b);
        // events() restarts cleanly.
        let c: Vec<Event> = st.events().collect();
        assert_eq!(a, c);
    }

    #[test]
    fn jsonl_round_trip() {
        let tl = EventTimeline::build(params((0, 9), 3.0, 2.0, 0.25, 11)).unwrap();
        let mut buf = Vec::new();
        tl.write_jsonl(&mut buf).unwrap();
        let back = EventTimeline::read_jsonl(&buf[..]).unwrap();
        assert_eq!(tl, back);
        let mut buf2 = Vec::new();
        back.write_jsonl(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn from_parts_validates() {
        let p = params((0, 1), 2.0, 1.0, 0.0, 1);
        // Unsorted death times.
        let bad = EventTimeline::from_parts(p.clone(), vec![vec![1.5, 0.5], vec![]], vec![]);
        assert!(bad.is_err());
        // Non-nearest-neighbor arrow.
        let bad = EventTimeline::from_parts(
            p.clone(),
            vec![vec![], vec![]],
            vec![EdgeArrows { from: 0, to: 2, times: vec![1.0], one_only: vec![false] }],
        );
        assert!(bad.is_err());
        // Time beyond horizon.
        let bad = EventTimeline::from_parts(p, vec![vec![2.5], vec![]], vec![]);
        assert!(bad.is_err());
    }

    #[test]
    fn death_counts_match_poisson_rate() {
        // 100 sites, horizon 50: total count is Poisson(5000).
        let tl = EventTimeline::build(params((0, 99), 50.0, 2.0, 0.0, 31)).unwrap();
        let n = tl.death_count() as f64;
        let mean = 100.0 * 50.0;
        assert!((n - mean).abs() < 3.0 * mean.sqrt(), "death count {n} vs Poisson({mean})");
        // Arrows per directed edge: mean lambda * horizon = 100.
        let edges = tl.arrow_streams().len() as f64;
        assert_eq!(edges, 198.0);
        let arrows = tl.arrow_count() as f64;
        let amean = edges * 100.0;
        assert!((arrows - amean).abs() < 3.0 * amean.sqrt(), "arrow count {arrows} vs {amean}");
    }

    #[test]
    fn one_only_fraction_matches_probability() {
        let tl = EventTimeline::build(params((0, 49), 20.0, 2.0, 0.5, 17)).unwrap();
        let total = tl.arrow_count() as f64;
        let labeled: usize = tl
            .arrow_streams()
            .iter()
            .map(|e| e.one_only.iter().filter(|&&l| l).count())
            .sum();
        let f = labeled as f64 / total;
        let sigma = (0.25 / total).sqrt();
        assert!((f - 0.5).abs() < 3.0 * sigma, "one_only fraction {f}");
    }

    #[test]
    fn event_gaps_are_exponential() {
        // Kolmogorov-Smirnov at significance 0.01 on raw sampler output.
        // (Gaps harvested from a truncated timeline would be length-biased:
        // long gaps are less likely to complete before the horizon.)
        use crate::rng::{exp_gap, stream_rng, StreamKind};
        for (rate, site) in [(1.0, 0i64), (3.0, 1)] {
            let mut rng = stream_rng(SeedRecord::new(23, 0), StreamKind::Scalar, site);
            let mut gaps: Vec<f64> = (0..20_000).map(|_| exp_gap(&mut rng, rate) * rate).collect();
            gaps.sort_by(f64::total_cmp);
            let n = gaps.len() as f64;
            let mut d_stat: f64 = 0.0;
            for (i, g) in gaps.iter().enumerate() {
                let cdf = 1.0 - (-g).exp();
                let lo = i as f64 / n;
                let hi = (i + 1) as f64 / n;
                d_stat = d_stat.max((cdf - lo).abs()).max((hi - cdf).abs());
            }
            // Asymptotic critical value at alpha = 0.01.
            let crit = 1.628 / n.sqrt();
            assert!(d_stat < crit, "rate {rate}: KS statistic {d_stat} exceeds {crit}");
        }
    }

    #[test]
    fn two_path_subtimeline_drops_labeled_arrows() {
        let tl = EventTimeline::build(params((0, 19), 10.0, 4.0, 0.5, 3)).unwrap();
        let sub = tl.two_path_subtimeline();
        assert_eq!(sub.params().lambda, 2.0);
        assert_eq!(sub.params().one_only_prob, 0.0);
        assert_eq!(sub.death_count(), tl.death_count());
        let kept: usize = tl
            .arrow_streams()
            .iter()
            .map(|e| e.one_only.iter().filter(|&&l| !l).count())
            .sum();
        assert_eq!(sub.arrow_count(), kept);
        for e in sub.arrow_streams() {
            assert!(e.one_only.iter().all(|&l| !l));
        }
    }
}
