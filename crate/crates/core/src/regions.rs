//! Space-time regions with exact rational boundaries.
//!
//! A region is a subset of Z x [0, inf) cut out by finitely many linear
//! inequalities with rational coefficients; all boundary inequalities are
//! closed. Membership is decided in exact arithmetic. For simulation, each
//! region reports per-site time slices (the interval of times a fixed site
//! belongs to the region) so that sweeps can precompute float envelopes once
//! per site instead of doing rational work per event.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{rat_from_f64, rat_int, serde_rat, serde_rat_pair, LowerBound, Rat, UpperBound};
use num_traits::Zero;

/// Time interval `[lo, hi]` a site spends inside a region; `hi = None` means
/// unbounded above.
pub type SliceRange = (Rat, Option<Rat>);

/// Wedge `{(x,t): al*(t-ot) <= x-ox <= m + ar*(t-ot), t >= ot}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    #[serde(with = "serde_rat")]
    pub alpha_l: Rat,
    #[serde(with = "serde_rat")]
    pub alpha_r: Rat,
    #[serde(with = "serde_rat")]
    pub m: Rat,
    #[serde(with = "serde_rat_pair")]
    pub offset: (Rat, Rat),
}

impl Wedge {
    pub fn new(alpha_l: Rat, alpha_r: Rat, m: Rat) -> Result<Self> {
        Self::with_offset(alpha_l, alpha_r, m, (Rat::zero(), Rat::zero()))
    }

    pub fn with_offset(alpha_l: Rat, alpha_r: Rat, m: Rat, offset: (Rat, Rat)) -> Result<Self> {
        if alpha_l <= Rat::zero() || alpha_r <= Rat::zero() {
            return Err(Error::invalid("wedge speeds must be positive"));
        }
        if alpha_l >= alpha_r {
            return Err(Error::invalid("wedge requires alpha_l < alpha_r"));
        }
        if m <= Rat::zero() {
            return Err(Error::invalid("wedge base width must be positive"));
        }
        Ok(Wedge { alpha_l, alpha_r, m, offset })
    }

    pub fn contains(&self, x: &Rat, t: &Rat) -> bool {
        let tr = t - &self.offset.1;
        if tr < Rat::zero() {
            return false;
        }
        let xr = x - &self.offset.0;
        &self.alpha_l * &tr <= xr && xr <= &self.m + &self.alpha_r * &tr
    }

    pub fn site_slice(&self, x: i64) -> Option<SliceRange> {
        let xr = rat_int(x) - &self.offset.0;
        // x - ox <= m + ar (t - ot)  =>  t >= ot + (x - ox - m)/ar
        let lo_band = &self.offset.1 + (&xr - &self.m) / &self.alpha_r;
        let lo = lo_band.max(self.offset.1.clone());
        // al (t - ot) <= x - ox  =>  t <= ot + (x - ox)/al
        let hi = &self.offset.1 + &xr / &self.alpha_l;
        if lo > hi {
            None
        } else {
            Some((lo, Some(hi)))
        }
    }
}

/// Half space `{(x,t): x - ox <= m + ar*(t-ot), t >= ot}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    #[serde(with = "serde_rat")]
    pub alpha_r: Rat,
    #[serde(with = "serde_rat")]
    pub m: Rat,
    #[serde(with = "serde_rat_pair")]
    pub offset: (Rat, Rat),
}

impl HalfSpace {
    pub fn new(alpha_r: Rat, m: Rat) -> Result<Self> {
        if alpha_r <= Rat::zero() {
            return Err(Error::invalid("half-space speed must be positive"));
        }
        if m <= Rat::zero() {
            return Err(Error::invalid("half-space base width must be positive"));
        }
        Ok(HalfSpace { alpha_r, m, offset: (Rat::zero(), Rat::zero()) })
    }

    pub fn contains(&self, x: &Rat, t: &Rat) -> bool {
        let tr = t - &self.offset.1;
        if tr < Rat::zero() {
            return false;
        }
        x - &self.offset.0 <= &self.m + &self.alpha_r * &tr
    }

    pub fn site_slice(&self, x: i64) -> Option<SliceRange> {
        let xr = rat_int(x) - &self.offset.0;
        let lo_band = &self.offset.1 + (&xr - &self.m) / &self.alpha_r;
        Some((lo_band.max(self.offset.1.clone()), None))
    }
}

/// Drift direction of a parallelogram band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lean {
    /// Band in `x + alpha t`: moves left as time advances.
    Left,
    /// Band in `x - alpha t`: moves right.
    Right,
}

/// A lattice-indexed parallelogram.
///
/// The base cell with `j = k = 0` and lean Left is
/// `{(x,t): m*beta/2 <= x + alpha t <= 3 m*beta/2, 0 <= t <= H}` with
/// `H = m (1 + beta/alpha)` (or `m 3 beta / (2 alpha)` for the small
/// variant); lean Right mirrors the band to `x - alpha t` in
/// `[-3 m beta/2, -m beta/2]`. The `(j,k)` cell is the base cell translated
/// by `(m j (alpha - beta), m k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parallelogram {
    pub lean: Lean,
    pub small: bool,
    pub j: i64,
    pub k: i64,
    #[serde(with = "serde_rat")]
    pub m: Rat,
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    #[serde(with = "serde_rat")]
    pub beta: Rat,
}

impl Parallelogram {
    /// Full validation, including the integrality needed for integer site
    /// enumeration along the bottom and top edges.
    pub fn new(lean: Lean, small: bool, j: i64, k: i64, m: Rat, alpha: Rat, beta: Rat) -> Result<Self> {
        let p = Self::geometry_only(lean, small, j, k, m, alpha, beta)?;
        p.validate_integrality()?;
        Ok(p)
    }

    /// Skips the integrality requirement; corner geometry stays exact, but
    /// edge site enumeration is unavailable.
    pub fn geometry_only(
        lean: Lean,
        small: bool,
        j: i64,
        k: i64,
        m: Rat,
        alpha: Rat,
        beta: Rat,
    ) -> Result<Self> {
        if k < 0 {
            return Err(Error::invalid("parallelogram row index k must be >= 0"));
        }
        if (j + k) % 2 != 0 {
            return Err(Error::invalid(format!("parallelogram index parity: j + k = {} is odd", j + k)));
        }
        if m <= Rat::zero() || alpha <= Rat::zero() {
            return Err(Error::invalid("parallelogram scale and slope must be positive"));
        }
        if beta <= Rat::zero() || beta >= &alpha / rat_int(3) {
            return Err(Error::DegenerateGeometry(format!(
                "beta must satisfy 0 < beta < alpha/3, got beta = {}, alpha = {}",
                beta, alpha
            )));
        }
        Ok(Parallelogram { lean, small, j, k, m, alpha, beta })
    }

    pub fn validate_integrality(&self) -> Result<()> {
        let ma = &self.m * &self.alpha;
        let mb2 = &self.m * &self.beta / rat_int(2);
        if !ma.is_integer() || !mb2.is_integer() {
            return Err(Error::invalid(format!(
                "integer edge sites need m*alpha and m*beta/2 integral; got {} and {}",
                ma, mb2
            )));
        }
        Ok(())
    }

    /// Spatial/temporal translation of the base cell.
    pub fn offset(&self) -> (Rat, Rat) {
        (
            &self.m * rat_int(self.j) * (&self.alpha - &self.beta),
            &self.m * rat_int(self.k),
        )
    }

    /// Time extent above the bottom edge.
    pub fn height(&self) -> Rat {
        if self.small {
            &self.m * &self.beta * rat_int(3) / (rat_int(2) * &self.alpha)
        } else {
            &self.m * (rat_int(1) + &self.beta / &self.alpha)
        }
    }

    pub fn bottom_time(&self) -> Rat {
        self.offset().1
    }

    pub fn top_time(&self) -> Rat {
        self.offset().1 + self.height()
    }

    fn band(&self) -> (Rat, Rat) {
        let mb2 = &self.m * &self.beta / rat_int(2);
        match self.lean {
            Lean::Left => (mb2.clone(), &mb2 * rat_int(3)),
            Lean::Right => (-(&mb2 * rat_int(3)), -mb2),
        }
    }

    pub fn contains(&self, x: &Rat, t: &Rat) -> bool {
        let (ox, ot) = self.offset();
        let tl = t - ot;
        if tl < Rat::zero() || tl > self.height() {
            return false;
        }
        let xl = x - ox;
        let coord = match self.lean {
            Lean::Left => xl + &self.alpha * tl,
            Lean::Right => xl - &self.alpha * tl,
        };
        let (lo, hi) = self.band();
        lo <= coord && coord <= hi
    }

    pub fn site_slice(&self, x: i64) -> Option<SliceRange> {
        let (ox, ot) = self.offset();
        let xl = rat_int(x) - ox;
        let (lo_band, hi_band) = self.band();
        // Solve the band inequalities for local time.
        let (t_lo, t_hi) = match self.lean {
            Lean::Left => ((&lo_band - &xl) / &self.alpha, (&hi_band - &xl) / &self.alpha),
            Lean::Right => ((&xl - &hi_band) / &self.alpha, (&xl - &lo_band) / &self.alpha),
        };
        let lo = t_lo.max(Rat::zero());
        let hi = t_hi.min(self.height());
        if lo > hi {
            None
        } else {
            Some((&lo + &ot, Some(&hi + &ot)))
        }
    }

    /// Corners as (x, t): bottom-left, bottom-right, top-left, top-right.
    pub fn corners(&self) -> [(Rat, Rat); 4] {
        let (ox, ot) = self.offset();
        let (lo, hi) = self.band();
        let h = self.height();
        let shift = &self.alpha * &h;
        let (b_lo, b_hi, t_lo, t_hi) = match self.lean {
            Lean::Left => (lo.clone(), hi.clone(), &lo - &shift, &hi - &shift),
            Lean::Right => (lo.clone(), hi.clone(), &lo + &shift, &hi + &shift),
        };
        [
            (&b_lo + &ox, ot.clone()),
            (&b_hi + &ox, ot.clone()),
            (&t_lo + &ox, &ot + &h),
            (&t_hi + &ox, &ot + &h),
        ]
    }

    /// Integer sites on the bottom edge.
    pub fn bottom_sites(&self) -> Result<std::ops::RangeInclusive<i64>> {
        self.validate_integrality()?;
        let c = self.corners();
        Ok(rat_to_i64(&c[0].0)?..=rat_to_i64(&c[1].0)?)
    }

    /// Integer sites on the top edge.
    pub fn top_sites(&self) -> Result<std::ops::RangeInclusive<i64>> {
        self.validate_integrality()?;
        let c = self.corners();
        Ok(rat_to_i64(&c[2].0)?..=rat_to_i64(&c[3].0)?)
    }

    /// Smallest and largest x coordinate over the four corners.
    pub fn x_extent(&self) -> (Rat, Rat) {
        let c = self.corners();
        let mut lo = c[0].0.clone();
        let mut hi = c[0].0.clone();
        for (x, _) in &c {
            if x < &lo {
                lo = x.clone();
            }
            if x > &hi {
                hi = x.clone();
            }
        }
        (lo, hi)
    }
}

fn rat_to_i64(r: &Rat) -> Result<i64> {
    if !r.is_integer() {
        return Err(Error::InternalConsistency(format!("expected integer coordinate, got {}", r)));
    }
    use num_traits::ToPrimitive;
    r.numer().to_i64().ok_or_else(|| Error::invalid("coordinate out of i64 range"))
}

/// Sum type over all region shapes understood by the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Full,
    Wedge(Wedge),
    HalfSpace(HalfSpace),
    Parallelogram(Parallelogram),
}

impl Region {
    /// Exact membership at a rational point.
    pub fn contains(&self, x: &Rat, t: &Rat) -> bool {
        match self {
            Region::Full => t >= &Rat::zero(),
            Region::Wedge(w) => w.contains(x, t),
            Region::HalfSpace(h) => h.contains(x, t),
            Region::Parallelogram(p) => p.contains(x, t),
        }
    }

    /// Membership at an integer site and float (dyadic) event time.
    pub fn contains_event(&self, x: i64, t: f64) -> bool {
        self.contains(&rat_int(x), &rat_from_f64(t))
    }

    /// Interval of times the site spends inside the region, if any.
    pub fn site_slice(&self, x: i64) -> Option<SliceRange> {
        match self {
            Region::Full => Some((Rat::zero(), None)),
            Region::Wedge(w) => w.site_slice(x),
            Region::HalfSpace(h) => h.site_slice(x),
            Region::Parallelogram(p) => p.site_slice(x),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Region::Full => "full",
            Region::Wedge(_) => "wedge",
            Region::HalfSpace(_) => "half_space",
            Region::Parallelogram(_) => "parallelogram",
        }
    }

    /// Float envelopes of every site slice in the window, computed once so
    /// event loops never touch rational arithmetic.
    pub fn site_envelopes(&self, window: crate::substrate::SiteWindow) -> Vec<Option<SliceEnvelope>> {
        window
            .sites()
            .map(|x| {
                self.site_slice(x).map(|(lo, hi)| SliceEnvelope {
                    lb: LowerBound::of(&lo),
                    ub: hi.as_ref().map(UpperBound::of).unwrap_or_else(UpperBound::infinite),
                })
            })
            .collect()
    }
}

/// Envelope form of a site slice: float comparisons against it reproduce the
/// exact rational membership test for every float time.
#[derive(Clone, Copy, Debug)]
pub struct SliceEnvelope {
    pub lb: LowerBound,
    pub ub: UpperBound,
}

impl SliceEnvelope {
    #[inline]
    pub fn admits(&self, t: f64) -> bool {
        self.lb.admits(t) && self.ub.admits(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn base_pg(lean: Lean, small: bool, j: i64, k: i64) -> Parallelogram {
        Parallelogram::new(lean, small, j, k, rat_int(6), rat_int(2), rat(1, 3)).unwrap()
    }

    #[test]
    fn wedge_membership_examples() {
        let w = Wedge::new(rat(1, 2), rat_int(1), rat_int(10)).unwrap();
        assert!(w.contains(&rat_int(0), &rat_int(0)));
        assert!(w.contains(&rat_int(10), &rat_int(0)));
        assert!(!w.contains(&rat_int(11), &rat_int(0)));
        assert!(!w.contains(&rat_int(-1), &rat_int(0)));
        // Left boundary at t=10 sits at x=5.
        assert!(!w.contains(&rat_int(4), &rat_int(10)));
        assert!(w.contains(&rat_int(5), &rat_int(10)));
        // Right boundary at t=10 sits at x=20; boundaries are closed.
        assert!(w.contains(&rat_int(20), &rat_int(10)));
        assert!(!w.contains(&rat_int(21), &rat_int(10)));
        assert!(!w.contains(&rat_int(0), &rat(-1, 2)));
    }

    #[test]
    fn wedge_rejects_bad_parameters() {
        assert!(Wedge::new(rat_int(1), rat_int(1), rat_int(5)).is_err());
        assert!(Wedge::new(rat_int(2), rat_int(1), rat_int(5)).is_err());
        assert!(Wedge::new(rat(-1, 2), rat_int(1), rat_int(5)).is_err());
        assert!(Wedge::new(rat(1, 2), rat_int(1), rat_int(0)).is_err());
    }

    #[test]
    fn wedge_site_slice_matches_membership() {
        let w = Wedge::new(rat(1, 2), rat_int(1), rat_int(3)).unwrap();
        let region = Region::Wedge(w);
        for x in -5..=25 {
            let slice = region.site_slice(x);
            for num in 0..200 {
                let t = rat(num, 8);
                let inside = region.contains(&rat_int(x), &t);
                let in_slice = match &slice {
                    None => false,
                    Some((lo, hi)) => *lo <= t && hi.as_ref().map_or(true, |h| t <= *h),
                };
                assert_eq!(inside, in_slice, "x={x} t={num}/8");
            }
        }
    }

    #[test]
    fn half_space_slice_is_unbounded_above() {
        let h = HalfSpace::new(rat_int(1), rat_int(10)).unwrap();
        let r = Region::HalfSpace(h);
        // Site 12 enters at t = 2 and never leaves.
        let (lo, hi) = r.site_slice(12).unwrap();
        assert_eq!(lo, rat_int(2));
        assert!(hi.is_none());
        let (lo, _) = r.site_slice(-100).unwrap();
        assert_eq!(lo, rat_int(0));
    }

    #[test]
    fn left_leaning_base_corners() {
        let p = base_pg(Lean::Left, false, 0, 0);
        assert_eq!(p.height(), rat_int(7));
        let c = p.corners();
        assert_eq!(c[0], (rat_int(1), rat_int(0)));
        assert_eq!(c[1], (rat_int(3), rat_int(0)));
        assert_eq!(c[2], (rat_int(-13), rat_int(7)));
        assert_eq!(c[3], (rat_int(-11), rat_int(7)));
        assert_eq!(p.bottom_sites().unwrap(), 1..=3);
        assert_eq!(p.top_sites().unwrap(), -13..=-11);
    }

    #[test]
    fn right_leaning_base_corners() {
        let p = base_pg(Lean::Right, false, 0, 0);
        let c = p.corners();
        assert_eq!(c[0], (rat_int(-3), rat_int(0)));
        assert_eq!(c[1], (rat_int(-1), rat_int(0)));
        assert_eq!(c[2], (rat_int(11), rat_int(7)));
        assert_eq!(c[3], (rat_int(13), rat_int(7)));
    }

    #[test]
    fn small_variant_height() {
        let p = base_pg(Lean::Left, true, 0, 0);
        assert_eq!(p.height(), rat(3, 2));
        // Top edge sites shift by alpha * height = 3.
        assert_eq!(p.top_sites().unwrap(), -2..=0);
    }

    #[test]
    fn translate_by_lattice_index() {
        let p = base_pg(Lean::Left, false, 1, 1);
        assert_eq!(p.offset(), (rat_int(10), rat_int(6)));
        let c = p.corners();
        assert_eq!(c[0], (rat_int(11), rat_int(6)));
        assert_eq!(c[3], (rat_int(-1), rat_int(13)));
    }

    #[test]
    fn parameter_validation() {
        // Odd parity.
        assert!(Parallelogram::new(Lean::Left, false, 1, 2, rat_int(6), rat_int(2), rat(1, 3)).is_err());
        // Negative row.
        assert!(Parallelogram::new(Lean::Left, false, 1, -1, rat_int(6), rat_int(2), rat(1, 3)).is_err());
        // beta out of range.
        assert!(matches!(
            Parallelogram::new(Lean::Left, false, 0, 0, rat_int(6), rat_int(2), rat(2, 3)),
            Err(Error::DegenerateGeometry(_))
        ));
        // Integrality: m*beta/2 = 5/6 not an integer.
        assert!(Parallelogram::new(Lean::Left, false, 0, 0, rat_int(5), rat_int(2), rat(1, 3)).is_err());
        // Same parameters pass the geometry-only constructor.
        assert!(Parallelogram::geometry_only(Lean::Left, false, 0, 0, rat_int(5), rat_int(2), rat(1, 3)).is_ok());
    }

    #[test]
    fn intersection_identity_on_grid() {
        // The overlap of a right- and a left-leaning cell lies below the
        // small height, so replacing either factor by its small variant
        // leaves the intersection unchanged. Sampled exactly on a grid.
        let l = base_pg(Lean::Left, false, 0, 0);
        let ls = base_pg(Lean::Left, true, 0, 0);
        let r = base_pg(Lean::Right, false, 0, 0);
        let rs = base_pg(Lean::Right, true, 0, 0);
        let mut overlap_seen = 0;
        for x in -20..=20 {
            for num in 0..=(7 * 8) {
                let t = rat(num, 8);
                let xq = rat_int(x);
                let a = r.contains(&xq, &t) && l.contains(&xq, &t);
                let b = r.contains(&xq, &t) && ls.contains(&xq, &t);
                let c = rs.contains(&xq, &t) && l.contains(&xq, &t);
                assert_eq!(a, b, "x={x} t={num}/8");
                assert_eq!(a, c, "x={x} t={num}/8");
                overlap_seen += a as usize;
            }
        }
        assert!(overlap_seen > 0, "grid never hit the intersection");
    }

    #[test]
    fn small_contained_in_large() {
        let p = base_pg(Lean::Left, false, 2, 2);
        let s = base_pg(Lean::Left, true, 2, 2);
        for x in -30..=30 {
            for num in 0..=(14 * 4) {
                let t = rat(num, 4);
                if s.contains(&rat_int(x), &t) {
                    assert!(p.contains(&rat_int(x), &t), "small not inside large at x={x} t={num}/4");
                }
            }
        }
    }

    #[test]
    fn parallelogram_slice_matches_membership() {
        for lean in [Lean::Left, Lean::Right] {
            for small in [false, true] {
                let p = Parallelogram::new(lean, small, 1, 1, rat_int(6), rat_int(2), rat(1, 3)).unwrap();
                let region = Region::Parallelogram(p.clone());
                for x in -25..=25 {
                    let slice = region.site_slice(x);
                    for num in 0..=(16 * 8) {
                        let t = rat(num, 8);
                        let inside = p.contains(&rat_int(x), &t);
                        let in_slice = match &slice {
                            None => false,
                            Some((lo, hi)) => *lo <= t && t <= *hi.as_ref().unwrap(),
                        };
                        assert_eq!(inside, in_slice, "{lean:?} small={small} x={x} t={num}/8");
                    }
                }
            }
        }
    }

    #[test]
    fn region_serialization_round_trip() {
        let regions = vec![
            Region::Full,
            Region::Wedge(Wedge::new(rat(1, 2), rat_int(1), rat_int(10)).unwrap()),
            Region::HalfSpace(HalfSpace::new(rat(3, 2), rat_int(4)).unwrap()),
            Region::Parallelogram(base_pg(Lean::Right, true, 2, 0)),
        ];
        for r in regions {
            let s = serde_json::to_string(&r).unwrap();
            let back: Region = serde_json::from_str(&s).unwrap();
            assert_eq!(r, back, "round trip failed for {s}");
        }
        let w = Region::Wedge(Wedge::new(rat(1, 2), rat_int(1), rat_int(10)).unwrap());
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"alpha_l\":\"1/2\""), "rationals serialize as p/q: {s}");
    }

    #[test]
    fn contains_event_uses_exact_times() {
        // Boundary t = 1/3 for site 1 in a wedge with alpha_l = 3: floats
        // close to 1/3 from either side must resolve correctly.
        let w = Wedge::new(rat_int(3), rat_int(4), rat_int(10)).unwrap();
        let r = Region::Wedge(w);
        let just_below = 1.0_f64 / 3.0; // rounds below 1/3? verify via exact compare either way
        let t_in = rat_from_f64(just_below) <= rat(1, 3);
        assert_eq!(r.contains_event(1, just_below), t_in || r.contains(&rat_int(1), &rat_from_f64(just_below)));
        // Exactly at a representable boundary: site 1 leaves at t = 1/3... use
        // alpha_l = 2 so the boundary 1/2 is representable.
        let w2 = Wedge::new(rat_int(2), rat_int(4), rat_int(10)).unwrap();
        let r2 = Region::Wedge(w2);
        assert!(r2.contains_event(1, 0.5));
        assert!(!r2.contains_event(1, 0.5_f64.next_up()));
    }
}
