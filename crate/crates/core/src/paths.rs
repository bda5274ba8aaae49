//! Reachability through a timeline: is there an active path from one
//! space-time point to another that stays inside a region?
//!
//! An active path moves up vertical site segments and across arrows. A
//! vertical segment is broken by any death mark strictly after its start
//! (the start instant itself is exempt, matching the convention that a
//! state handed over at time `t` only feels events after `t`). Optional
//! per-site blocked intervals, half-open `[start, end)`, model space-time
//! occupied by a stronger type; a path may neither enter nor cross them.
//!
//! The search propagates maximal clean intervals per site. Interval ends
//! are `(key, inclusive)` pairs so closed rational region boundaries and
//! open death cuts coexist without tolerance fudge.

use crate::error::{Error, Result};
use crate::regions::Region;
use crate::substrate::{EventTimeline, SiteWindow, SpaceTimePoint};

/// Per-site half-open blocked time intervals, sorted and disjoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockSet {
    window: Option<SiteWindow>,
    blocked: Vec<Vec<(f64, f64)>>,
}

impl BlockSet {
    pub fn new(window: SiteWindow) -> Self {
        BlockSet { window: Some(window), blocked: vec![Vec::new(); window.len()] }
    }

    /// Append `[start, end)` at site `x`. Intervals must be pushed in
    /// increasing order per site; `end` may be infinite.
    pub fn push(&mut self, x: i64, start: f64, end: f64) -> Result<()> {
        let w = self.window.ok_or_else(|| Error::invalid("empty block set"))?;
        if !w.contains(x) {
            return Err(Error::OutOfWindow { x, t: start });
        }
        if !(start < end) || !start.is_finite() {
            return Err(Error::invalid(format!("bad blocked interval [{start}, {end})")));
        }
        let v = &mut self.blocked[w.index(x)];
        if let Some(&(_, prev_end)) = v.last() {
            if start < prev_end {
                return Err(Error::invalid("blocked intervals must be pushed in order, disjoint"));
            }
        }
        v.push((start, end));
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.iter().all(Vec::is_empty)
    }

    pub fn intervals_at(&self, x: i64) -> &[(f64, f64)] {
        match self.window {
            Some(w) if w.contains(x) => &self.blocked[w.index(x)],
            _ => &[],
        }
    }

    /// Is `t` inside a blocked interval of `x`?
    pub fn blocked_at(&self, x: i64, t: f64) -> bool {
        let v = self.intervals_at(x);
        let i = v.partition_point(|&(s, _)| s <= t);
        i > 0 && t < v[i - 1].1
    }

    /// Earliest blocked start strictly after `t` at site `x`.
    fn next_start_after(&self, x: i64, t: f64) -> Option<f64> {
        let v = self.intervals_at(x);
        let i = v.partition_point(|&(s, _)| s <= t);
        v.get(i).map(|&(s, _)| s)
    }
}

/// Endpoints and flavor of a reachability question.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathQuery {
    pub from: SpaceTimePoint,
    pub to: SpaceTimePoint,
    /// Restrict to arrows without the `one_only` label.
    pub require_two_path: bool,
}

impl PathQuery {
    pub fn new(from: SpaceTimePoint, to: SpaceTimePoint) -> Self {
        PathQuery { from, to, require_two_path: false }
    }
}

/// Upper end of a clean interval: admits `t` when `t < key`, or `t == key`
/// if inclusive. Death and block cuts are exclusive; closed rational
/// region tops keep their envelope's exactness flag.
#[derive(Clone, Copy, Debug, PartialEq)]
struct IntervalEnd {
    key: f64,
    inclusive: bool,
}

impl IntervalEnd {
    #[inline]
    fn admits(&self, t: f64) -> bool {
        t < self.key || (self.inclusive && t == self.key)
    }

    fn tighter(self, other: IntervalEnd) -> IntervalEnd {
        match self.key.total_cmp(&other.key) {
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Equal => {
                if self.inclusive { other } else { self }
            }
        }
    }
}

/// Decide whether an active path runs from `query.from` to `query.to`
/// inside `region`, avoiding `blocks`. Identical points are connected by
/// the empty path.
pub fn active_path_exists(
    tl: &EventTimeline,
    region: &Region,
    query: &PathQuery,
    blocks: Option<&BlockSet>,
) -> Result<bool> {
    let window = tl.window();
    let (from, to) = (query.from, query.to);
    for p in [from, to] {
        if !window.contains(p.x) {
            return Err(Error::OutOfWindow { x: p.x, t: p.t });
        }
        if !p.t.is_finite() || p.t < 0.0 || p.t > tl.horizon() {
            return Err(Error::invalid(format!("path endpoint time {} outside [0, horizon]", p.t)));
        }
    }
    if from.x == to.x && from.t == to.t {
        return Ok(true);
    }
    if from.t > to.t {
        return Ok(false);
    }

    let slices = region.site_envelopes(window);
    let blocked_at = |x: i64, t: f64| blocks.is_some_and(|b| b.blocked_at(x, t));

    let admit = |x: i64, t: f64| -> bool {
        slices[window.index(x)].as_ref().is_some_and(|s| s.admits(t)) && !blocked_at(x, t)
    };
    if !admit(from.x, from.t) || !admit(to.x, to.t) {
        return Ok(false);
    }

    let interval_end = |x: i64, start: f64| -> IntervalEnd {
        let mut end = IntervalEnd { key: tl.horizon(), inclusive: true };
        let slice = slices[window.index(x)].as_ref().expect("admitted site has a slice");
        end = end.tighter(IntervalEnd { key: slice.ub.key, inclusive: slice.ub.exact });
        let deaths = tl.deaths_at(x);
        let i = deaths.partition_point(|&d| d <= start);
        if let Some(&d) = deaths.get(i) {
            end = end.tighter(IntervalEnd { key: d, inclusive: false });
        }
        if let Some(b) = blocks {
            if let Some(s) = b.next_start_after(x, start) {
                end = end.tighter(IntervalEnd { key: s, inclusive: false });
            }
        }
        end
    };

    // Per-site clean intervals found so far, sorted by start.
    let mut intervals: Vec<Vec<(f64, IntervalEnd)>> = vec![Vec::new(); window.len()];
    let mut work: Vec<(i64, f64)> = Vec::new();

    let try_insert = |intervals: &mut Vec<Vec<(f64, IntervalEnd)>>,
                          work: &mut Vec<(i64, f64)>,
                          x: i64,
                          start: f64| {
        let v = &mut intervals[window.index(x)];
        let i = v.partition_point(|&(s, _)| s <= start);
        if i > 0 {
            let (_, end) = v[i - 1];
            if end.admits(start) {
                return; // already covered; same cut points, same reach
            }
        }
        v.insert(i, (start, interval_end(x, start)));
        work.push((x, start));
    };

    try_insert(&mut intervals, &mut work, from.x, from.t);

    while let Some((x, start)) = work.pop() {
        let i = intervals[window.index(x)].partition_point(|&(s, _)| s <= start);
        let (_, end) = intervals[window.index(x)][i - 1];
        if x == to.x && start <= to.t && end.admits(to.t) {
            return Ok(true);
        }
        for stream in tl.arrows_from(x) {
            let mut j = stream.times.partition_point(|&a| a < start);
            while j < stream.times.len() {
                let a = stream.times[j];
                if a > to.t || !end.admits(a) {
                    break;
                }
                j += 1;
                if query.require_two_path && stream.one_only[j - 1] {
                    continue;
                }
                if admit(stream.to, a) {
                    try_insert(&mut intervals, &mut work, stream.to, a);
                }
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::regions::Wedge;
    use crate::rng::SeedRecord;
    use crate::substrate::{EdgeArrows, EventTimeline, TimelineParams};
    use std::collections::HashMap;

    fn plain_params(window: (i64, i64), horizon: f64) -> TimelineParams {
        TimelineParams {
            window: SiteWindow::new(window.0, window.1).unwrap(),
            horizon,
            lambda: 1.0,
            one_only_prob: 0.0,
            seed: SeedRecord::new(0, 0),
        }
    }

    fn timeline(
        window: (i64, i64),
        horizon: f64,
        deaths: &[(i64, f64)],
        arrows: &[(i64, i64, f64, bool)],
    ) -> EventTimeline {
        let params = plain_params(window, horizon);
        let w = params.window;
        let mut dv = vec![Vec::new(); w.len()];
        for &(x, t) in deaths {
            dv[w.index(x)].push(t);
        }
        for v in &mut dv {
            v.sort_by(f64::total_cmp);
        }
        let mut av: HashMap<(i64, i64), EdgeArrows> = HashMap::new();
        for &(from, to, t, l) in arrows {
            let e = av
                .entry((from, to))
                .or_insert_with(|| EdgeArrows { from, to, times: Vec::new(), one_only: Vec::new() });
            e.times.push(t);
            e.one_only.push(l);
        }
        let mut arrows: Vec<EdgeArrows> = av.into_values().collect();
        arrows.sort_by_key(|e| (e.from, e.to));
        EventTimeline::from_parts(params, dv, arrows).unwrap()
    }

    fn q(from: (i64, f64), to: (i64, f64)) -> PathQuery {
        PathQuery::new(SpaceTimePoint::new(from.0, from.1), SpaceTimePoint::new(to.0, to.1))
    }

    fn exists(tl: &EventTimeline, query: &PathQuery) -> bool {
        active_path_exists(tl, &Region::Full, query, None).unwrap()
    }

    #[test]
    fn empty_timeline_sits_in_place() {
        let tl = timeline((0, 3), 2.0, &[], &[]);
        assert!(exists(&tl, &q((0, 0.0), (0, 2.0))));
        assert!(!exists(&tl, &q((0, 0.0), (1, 2.0))), "no arrow, no sideways move");
        assert!(!exists(&tl, &q((0, 1.0), (0, 0.5))), "paths cannot go back in time");
    }

    #[test]
    fn identical_endpoints_always_connected() {
        let tl = timeline((0, 3), 2.0, &[(0, 1.0)], &[]);
        assert!(exists(&tl, &q((0, 1.0), (0, 1.0))));
    }

    #[test]
    fn single_arrow_crossing() {
        let tl = timeline((0, 3), 2.0, &[], &[(0, 1, 1.0, false)]);
        assert!(exists(&tl, &q((0, 0.0), (1, 2.0))));
        assert!(exists(&tl, &q((0, 0.0), (1, 1.0))), "arrival exactly at the arrow instant");
        assert!(!exists(&tl, &q((0, 0.0), (1, 0.9))), "target predates the only arrow");
        assert!(!exists(&tl, &q((1, 0.0), (0, 2.0))), "arrow is directed");
    }

    #[test]
    fn death_breaks_segments() {
        // Death on the source before the arrow fires.
        let tl = timeline((0, 3), 2.0, &[(0, 0.5)], &[(0, 1, 1.0, false)]);
        assert!(!exists(&tl, &q((0, 0.0), (1, 2.0))));
        assert!(exists(&tl, &q((0, 0.0), (0, 0.4))));
        // Death on the target after arrival.
        let tl = timeline((0, 3), 2.0, &[(1, 1.5)], &[(0, 1, 1.0, false)]);
        assert!(exists(&tl, &q((0, 0.0), (1, 1.2))));
        assert!(!exists(&tl, &q((0, 0.0), (1, 1.5))), "segment is cut at the death instant");
        assert!(!exists(&tl, &q((0, 0.0), (1, 2.0))));
        // A segment starting exactly at a death instant survives it.
        assert!(exists(&tl, &q((1, 1.5), (1, 2.0))), "events strictly before the start do not apply");
    }

    #[test]
    fn arrow_exactly_at_death_instant_does_not_transmit() {
        let tl = timeline((0, 3), 2.0, &[(0, 1.0)], &[(0, 1, 1.0, false)]);
        assert!(!exists(&tl, &q((0, 0.0), (1, 2.0))), "death cuts the segment before the arrow departs");
    }

    #[test]
    fn two_hop_relay() {
        let tl = timeline(
            (0, 3),
            3.0,
            &[(0, 1.2)],
            &[(0, 1, 1.0, false), (1, 2, 2.0, false)],
        );
        assert!(exists(&tl, &q((0, 0.0), (2, 3.0))), "path survives through the relay site");
        assert!(!exists(&tl, &q((0, 1.3), (2, 3.0))), "start after the relay arrow left");
    }

    #[test]
    fn one_only_labels_filtered_for_two_paths() {
        let tl = timeline((0, 3), 2.0, &[], &[(0, 1, 1.0, true)]);
        let mut pq = q((0, 0.0), (1, 2.0));
        assert!(exists(&tl, &pq), "unrestricted paths may use labeled arrows");
        pq.require_two_path = true;
        assert!(
            !active_path_exists(&tl, &Region::Full, &pq, None).unwrap(),
            "restricted paths must avoid labeled arrows"
        );
    }

    #[test]
    fn blocks_forbid_entry_and_crossing() {
        let tl = timeline((0, 3), 2.0, &[], &[(0, 1, 1.0, false), (0, 1, 1.6, false)]);
        let mut blocks = BlockSet::new(SiteWindow::new(0, 3).unwrap());
        blocks.push(1, 0.9, 1.5).unwrap();
        let pq = q((0, 0.0), (1, 2.0));
        assert!(
            active_path_exists(&tl, &Region::Full, &pq, Some(&blocks)).unwrap(),
            "second arrow lands after the blocked interval"
        );
        let pq_early = q((0, 0.0), (1, 1.2));
        assert!(
            !active_path_exists(&tl, &Region::Full, &pq_early, Some(&blocks)).unwrap(),
            "first arrow lands inside the blocked interval"
        );
        // A block on the source cuts the waiting segment.
        let mut src = BlockSet::new(SiteWindow::new(0, 3).unwrap());
        src.push(0, 0.5, 0.8).unwrap();
        assert!(
            !active_path_exists(&tl, &Region::Full, &pq, Some(&src)).unwrap(),
            "cannot wait across a blocked interval"
        );
        // Half-open end: standing exactly at the end instant is allowed.
        let mut b = BlockSet::new(SiteWindow::new(0, 3).unwrap());
        b.push(0, 0.2, 0.7).unwrap();
        let restart = q((0, 0.7), (0, 2.0));
        assert!(active_path_exists(&tl, &Region::Full, &restart, Some(&b)).unwrap());
    }

    #[test]
    fn block_set_validation_and_lookup() {
        let w = SiteWindow::new(0, 2).unwrap();
        let mut b = BlockSet::new(w);
        b.push(0, 1.0, 2.0).unwrap();
        assert!(b.push(0, 1.5, 3.0).is_err(), "overlap rejected");
        b.push(0, 2.0, f64::INFINITY).unwrap();
        assert!(b.push(5, 0.0, 1.0).is_err(), "site outside window");
        assert!(!b.blocked_at(0, 0.9));
        assert!(b.blocked_at(0, 1.0));
        assert!(b.blocked_at(0, 1.99));
        assert!(b.blocked_at(0, 100.0), "unbounded interval");
        assert!(!b.blocked_at(1, 1.0));
        assert_eq!(b.next_start_after(0, 0.5), Some(1.0));
        assert_eq!(b.next_start_after(0, 1.0), Some(2.0));
        assert_eq!(b.next_start_after(0, 2.5), None);
    }

    #[test]
    fn region_restriction_prunes_paths() {
        // Wedge boundaries move right over time: sites leave through the
        // left edge (x = t/2 here) and enter through the right (x = 1 + t).
        // Site 1 occupies [0, 2]; site 2 enters at t = 1.
        let region = Region::Wedge(Wedge::new(rat(1, 2), rat(1, 1), rat(1, 1)).unwrap());
        let tl = timeline((0, 3), 2.0, &[], &[(1, 2, 0.5, false), (1, 2, 1.5, false)]);
        let pq = q((1, 0.0), (2, 2.0));
        assert!(
            active_path_exists(&tl, &region, &pq, None).unwrap(),
            "second arrow lands inside the wedge"
        );
        let early = timeline((0, 3), 2.0, &[], &[(1, 2, 0.5, false)]);
        assert!(
            !active_path_exists(&early, &region, &pq, None).unwrap(),
            "only arrow lands before its target enters the wedge"
        );
        // Arrival exactly on the closed entry boundary t = 1 at x = 2.
        let edge = timeline((0, 3), 2.0, &[], &[(1, 2, 1.0, false)]);
        assert!(active_path_exists(&edge, &region, &pq, None).unwrap());
        // Site 0 leaves the wedge at t = 0, so it cannot wait for an arrow.
        let wait = timeline((0, 3), 2.0, &[], &[(0, 1, 0.5, false)]);
        let pq_wait = q((0, 0.0), (1, 2.0));
        assert!(!active_path_exists(&wait, &region, &pq_wait, None).unwrap());
        // Endpoint outside the region.
        let pq_out = q((1, 0.0), (3, 0.5));
        assert!(!active_path_exists(&tl, &region, &pq_out, None).unwrap());
    }

    #[test]
    fn endpoint_validation() {
        let tl = timeline((0, 3), 2.0, &[], &[]);
        assert!(active_path_exists(&tl, &Region::Full, &q((9, 0.0), (0, 1.0)), None).is_err());
        assert!(active_path_exists(&tl, &Region::Full, &q((0, 0.0), (0, 5.0)), None).is_err());
        assert!(active_path_exists(&tl, &Region::Full, &q((0, -0.5), (0, 1.0)), None).is_err());
    }

    // Independent oracle: depth-first search over arrows with explicit
    // segment scans, memoized on (site, start-time bits).
    fn oracle(
        tl: &EventTimeline,
        region: &Region,
        query: &PathQuery,
        blocks: Option<&BlockSet>,
    ) -> bool {
        let window = tl.window();
        let (from, to) = (query.from, query.to);
        if from.x == to.x && from.t == to.t {
            return true;
        }
        if from.t > to.t {
            return false;
        }
        let slices = region.site_envelopes(window);
        let point_ok = |x: i64, t: f64| {
            slices[window.index(x)].as_ref().is_some_and(|s| s.admits(t))
                && !blocks.is_some_and(|b| b.blocked_at(x, t))
        };
        if !point_ok(from.x, from.t) || !point_ok(to.x, to.t) {
            return false;
        }
        let segment_ok = |x: i64, a: f64, b: f64| {
            let Some(s) = slices[window.index(x)].as_ref() else { return false };
            if !s.admits(a) || !s.admits(b) {
                return false;
            }
            let deaths = tl.deaths_at(x);
            let i = deaths.partition_point(|&d| d <= a);
            if deaths.get(i).is_some_and(|&d| d <= b) {
                return false;
            }
            if let Some(bl) = blocks {
                for &(s0, e0) in bl.intervals_at(x) {
                    if s0 <= b && e0 > a {
                        return false;
                    }
                }
            }
            true
        };
        fn rec(
            tl: &EventTimeline,
            query: &PathQuery,
            segment_ok: &dyn Fn(i64, f64, f64) -> bool,
            point_ok: &dyn Fn(i64, f64) -> bool,
            memo: &mut HashMap<(i64, u64), bool>,
            x: i64,
            t: f64,
        ) -> bool {
            let key = (x, t.to_bits());
            if let Some(&v) = memo.get(&key) {
                return v;
            }
            memo.insert(key, false); // cycle guard; overwritten below
            let mut found = x == query.to.x && segment_ok(x, t, query.to.t);
            if !found {
                'streams: for stream in tl.arrows_from(x) {
                    for (j, &a) in stream.times.iter().enumerate() {
                        if a < t || a > query.to.t {
                            continue;
                        }
                        if query.require_two_path && stream.one_only[j] {
                            continue;
                        }
                        if segment_ok(x, t, a)
                            && point_ok(stream.to, a)
                            && rec(tl, query, segment_ok, point_ok, memo, stream.to, a)
                        {
                            found = true;
                            break 'streams;
                        }
                    }
                }
            }
            memo.insert(key, found);
            found
        }
        let mut memo = HashMap::new();
        rec(tl, query, &segment_ok, &point_ok, &mut memo, from.x, from.t)
    }

    #[test]
    fn interval_search_agrees_with_recursive_oracle() {
        use crate::rng::{stream_rng, unit_f64, StreamKind};
        let regions = [
            Region::Full,
            Region::Wedge(Wedge::new(rat(1, 2), rat(1, 1), rat(4, 1)).unwrap()),
        ];
        let mut trues = 0usize;
        let mut total = 0usize;
        for seed in 0..240u64 {
            let lambda = [0.5, 1.5, 3.0][(seed % 3) as usize];
            let p = if seed % 2 == 0 { 0.0 } else { 0.4 };
            let params = TimelineParams {
                window: SiteWindow::new(0, 7).unwrap(),
                horizon: 3.0,
                lambda,
                one_only_prob: p,
                seed: SeedRecord::new(1000 + seed, 0),
            };
            let tl = EventTimeline::build(params).unwrap();
            let mut aux = stream_rng(SeedRecord::new(1000 + seed, 1), StreamKind::Scalar, 0);
            let blocks = if seed % 3 == 0 {
                let mut b = BlockSet::new(tl.window());
                for x in 0..=7 {
                    let mut t = 0.0f64;
                    for _ in 0..2 {
                        let s = t + unit_f64(&mut aux) * 1.5;
                        let e = s + unit_f64(&mut aux) * 0.8 + 1e-3;
                        b.push(x, s, e).unwrap();
                        t = e;
                    }
                }
                Some(b)
            } else {
                None
            };
            let region = &regions[(seed % 2) as usize];
            for _ in 0..6 {
                let fx = (unit_f64(&mut aux) * 8.0) as i64;
                let tx = (unit_f64(&mut aux) * 8.0) as i64;
                let ft = unit_f64(&mut aux) * 1.5;
                let tt = ft + unit_f64(&mut aux) * 1.5;
                let mut pq = q((fx.min(7), ft), (tx.min(7), tt));
                pq.require_two_path = seed % 5 == 0;
                let got = active_path_exists(&tl, region, &pq, blocks.as_ref()).unwrap();
                let want = oracle(&tl, region, &pq, blocks.as_ref());
                assert!(
                    got == want,
                    "disagreement on seed {seed}: query {pq:?}, search {got}, oracle {want}"
                );
                total += 1;
                if got {
                    trues += 1;
                }
            }
        }
        assert!(trues > total / 10, "degenerate test: only {trues}/{total} reachable");
        assert!(total - trues > total / 10, "degenerate test: only {}/{total} unreachable", total - trues);
    }
}
