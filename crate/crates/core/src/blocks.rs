//! Renormalization blocks: Y-shaped unions of leaning parallelograms, the
//! exact-rational envelope containing all their lattice translates, an
//! integer search that aligns the envelope slopes with prescribed wedge
//! speeds, and the mapping from timeline events to an oriented-percolation
//! field whose open paths certify survival.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::contact::{evolve, Configuration, EvolveOptions};
use crate::error::{Error, Result};
use crate::exact::{
    f64_at_or_above, f64_at_or_below, format_rat, rat_from_f64, rat_int, rat_to_f64, serde_rat,
    Rat,
};
use crate::paths::BlockSet;
use crate::regions::{Lean, Parallelogram, Region, Wedge};
use crate::substrate::{EventTimeline, SiteWindow};

/// Slopes of the two boundary lines, stored as time per unit of space, so a
/// line of slope `s` corresponds to a boundary moving at speed `1/s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    #[serde(with = "serde_rat")]
    pub s_l: Rat,
    #[serde(with = "serde_rat")]
    pub s_r: Rat,
}

/// Boundary-line slopes of the Y region with branch counts `ell` and `d`:
/// `s_l = (ell+d+1) / ((ell-d-1)(alpha-beta))` on the left and
/// `s_r = (ell+d+1) / ((ell-d+1)(alpha-beta))` on the right.
pub fn y_slopes(ell: i64, d: i64, alpha: &Rat, beta: &Rat) -> Result<SlopePair> {
    if d < 0 {
        return Err(Error::invalid("branch count d must be >= 0"));
    }
    if ell - d - 1 <= 0 {
        return Err(Error::DegenerateGeometry(format!(
            "left boundary line is vertical: need ell - d - 1 > 0, got ell = {ell}, d = {d}"
        )));
    }
    if alpha <= &Rat::zero() || beta <= &Rat::zero() || beta >= alpha {
        return Err(Error::invalid("slopes need 0 < beta < alpha"));
    }
    let gap = alpha - beta;
    let num = rat_int(ell + d + 1);
    Ok(SlopePair {
        s_l: &num / (rat_int(ell - d - 1) * &gap),
        s_r: &num / (rat_int(ell - d + 1) * &gap),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YPiece {
    /// Assembly stage (0..=5) at which this cell first appeared.
    pub stage: u8,
    pub cell: Parallelogram,
}

/// A Y-shaped union of parallelograms: a spine of `ell` right-leaning
/// cells climbing the diagonal, capped by two left-leaning branches of `d`
/// and `d+1` cells, with small connector cells between consecutive pieces.
/// Lattice translate `(j, k)` shifts the whole union by
/// `(m [k(ell-d)+j](alpha-beta), m k(ell+d+1))`.
#[derive(Clone, Debug)]
pub struct YRegion {
    ell: i64,
    d: i64,
    m: Rat,
    alpha: Rat,
    beta: Rat,
    integral: bool,
    pieces: Vec<YPiece>,
    slopes: SlopePair,
    x_l: Rat,
    x_r: Rat,
    wedge: Wedge,
}

fn stage_cells(ell: i64, d: i64) -> Vec<(u8, Lean, bool, i64, i64)> {
    let mut raw: Vec<(u8, Lean, bool, i64, i64)> = vec![(0, Lean::Right, false, 0, 0)];
    for i in 1..=ell {
        raw.push((1, Lean::Right, false, i, i));
        raw.push((1, Lean::Left, true, i, i));
    }
    raw.push((2, Lean::Left, false, ell, ell));
    if d >= 1 {
        raw.push((3, Lean::Left, false, ell + 1, ell + 1));
    }
    if d == 1 {
        raw.push((4, Lean::Left, false, ell - 1, ell + 1));
        raw.push((4, Lean::Right, true, ell - 1, ell + 1));
    } else if d >= 2 {
        for i in 0..=d - 1 {
            raw.push((4, Lean::Left, false, ell - i, ell + i));
            raw.push((4, Lean::Right, true, ell - i, ell + i));
            raw.push((4, Lean::Left, false, ell + 1 - i, ell + 1 + i));
            raw.push((4, Lean::Right, true, ell + 1 - i, ell + 1 + i));
        }
        raw.push((5, Lean::Left, false, ell - d, ell + d));
        raw.push((5, Lean::Right, true, ell - d, ell + d));
    }
    // The branch loops re-list cells already placed by earlier stages; keep
    // the first occurrence so stage tags record where a cell came from.
    let mut seen = std::collections::HashSet::new();
    raw.retain(|&(_, lean, small, j, k)| seen.insert((lean == Lean::Left, small, j, k)));
    raw
}

impl YRegion {
    /// Assembles the region and its derived envelope; requires the
    /// integrality (`m alpha` and `m beta / 2` integers) that integer edge
    /// sites need.
    pub fn assemble(ell: i64, d: i64, m: Rat, alpha: Rat, beta: Rat) -> Result<Self> {
        Self::assemble_inner(ell, d, m, alpha, beta, true)
    }

    /// Same geometry without the integrality requirement. Corner and
    /// envelope arithmetic stays exact; edge-site enumeration and crossing
    /// evaluation are unavailable.
    pub fn assemble_geometry(ell: i64, d: i64, m: Rat, alpha: Rat, beta: Rat) -> Result<Self> {
        Self::assemble_inner(ell, d, m, alpha, beta, false)
    }

    fn assemble_inner(ell: i64, d: i64, m: Rat, alpha: Rat, beta: Rat, integral: bool) -> Result<Self> {
        if ell < 2 || d < 0 || d >= ell {
            return Err(Error::invalid(format!(
                "branch counts need ell >= 2 and 0 <= d < ell, got ell = {ell}, d = {d}"
            )));
        }
        let slopes = y_slopes(ell, d, &alpha, &beta)?;
        let make = if integral { Parallelogram::new } else { Parallelogram::geometry_only };
        let mut pieces = Vec::new();
        for (stage, lean, small, j, k) in stage_cells(ell, d) {
            pieces.push(YPiece { stage, cell: make(lean, small, j, k, m.clone(), alpha.clone(), beta.clone())? });
        }
        let expected = match d {
            0 => 2 * ell + 2,
            1 => 2 * ell + 5,
            _ => 2 * ell + 4 * d + 3,
        };
        if pieces.len() as i64 != expected {
            return Err(Error::InternalConsistency(format!(
                "assembled {} distinct cells, expected {expected} for ell = {ell}, d = {d}",
                pieces.len()
            )));
        }

        // Envelope anchors at t = 0 of the two boundary lines.
        let x_l = -(&m) * (rat(3, 2) * &beta + &beta / (&alpha * &slopes.s_l));
        let x_r = &m * (rat_int(ell + 1) * (&alpha - &beta - rat_int(1) / &slopes.s_r) + rat(3, 2) * &beta);
        let ma = &m * &alpha;
        if !(-&ma < x_l && x_l < x_r && x_r < &ma * rat_int(ell + 2)) {
            return Err(Error::InternalConsistency(format!(
                "envelope anchors out of range: need {} < {} < {} < {}",
                format_rat(&-&ma),
                format_rat(&x_l),
                format_rat(&x_r),
                format_rat(&(&ma * rat_int(ell + 2)))
            )));
        }
        let wedge = Wedge::with_offset(
            rat_int(1) / &slopes.s_l,
            rat_int(1) / &slopes.s_r,
            &x_r - &x_l,
            (x_l.clone(), Rat::zero()),
        )?;
        let y = YRegion { ell, d, m, alpha, beta, integral, pieces, slopes, x_l, x_r, wedge };

        // The envelope must hold the whole union: check the base cells and
        // the first lattice row, whose extreme corners lie exactly on the
        // boundary lines.
        let wide = y.wide_bounding_wedge()?;
        for &(j, k) in &[(0i64, 0i64), (-1, 1), (1, 1)] {
            for (idx, cell) in y.translated_pieces(j, k)?.iter().enumerate() {
                for (ci, (cx, ct)) in cell.corners().iter().enumerate() {
                    if !y.wedge.contains(cx, ct) || !wide.contains(cx, ct) {
                        return Err(Error::InternalConsistency(format!(
                            "corner {ci} of cell {idx} in translate ({j}, {k}) at ({}, {}) escapes the envelope",
                            format_rat(cx),
                            format_rat(ct)
                        )));
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn ell(&self) -> i64 {
        self.ell
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn m(&self) -> &Rat {
        &self.m
    }

    pub fn alpha(&self) -> &Rat {
        &self.alpha
    }

    pub fn beta(&self) -> &Rat {
        &self.beta
    }

    pub fn pieces(&self) -> &[YPiece] {
        &self.pieces
    }

    pub fn slopes(&self) -> &SlopePair {
        &self.slopes
    }

    pub fn x_l(&self) -> &Rat {
        &self.x_l
    }

    pub fn x_r(&self) -> &Rat {
        &self.x_r
    }

    /// Translation applied to the base region for lattice point `(j, k)`.
    pub fn translate_offset(&self, j: i64, k: i64) -> Result<(Rat, Rat)> {
        if k < 0 || (j + k) % 2 != 0 {
            return Err(Error::invalid(format!("({j}, {k}) is not a lattice point")));
        }
        Ok((
            &self.m * rat_int(k * (self.ell - self.d) + j) * (&self.alpha - &self.beta),
            &self.m * rat_int(k * (self.ell + self.d + 1)),
        ))
    }

    /// The `(j, k)` translate, produced by shifting each cell's lattice
    /// index rather than its coordinates, so the result is again a list of
    /// exactly indexed cells.
    pub fn translated_pieces(&self, j: i64, k: i64) -> Result<Vec<Parallelogram>> {
        if k < 0 || (j + k) % 2 != 0 {
            return Err(Error::invalid(format!("({j}, {k}) is not a lattice point")));
        }
        let dj = k * (self.ell - self.d) + j;
        let dk = k * (self.ell + self.d + 1);
        let make = if self.integral { Parallelogram::new } else { Parallelogram::geometry_only };
        self.pieces
            .iter()
            .map(|p| {
                make(
                    p.cell.lean,
                    p.cell.small,
                    p.cell.j + dj,
                    p.cell.k + dk,
                    self.m.clone(),
                    self.alpha.clone(),
                    self.beta.clone(),
                )
            })
            .collect()
    }

    /// Tight envelope: both boundary lines touch corners of the union, so
    /// no narrower wedge with these slopes contains it.
    pub fn bounding_wedge(&self) -> &Wedge {
        &self.wedge
    }

    /// Looser envelope with round anchors: width `m alpha (ell+3)`,
    /// shifted left by `m alpha`. Contains the tight envelope because the
    /// anchors satisfy `-m alpha < x_l` and `x_r < m alpha (ell+2)`.
    pub fn wide_bounding_wedge(&self) -> Result<Wedge> {
        let ma = &self.m * &self.alpha;
        Wedge::with_offset(
            rat_int(1) / &self.slopes.s_l,
            rat_int(1) / &self.slopes.s_r,
            &ma * rat_int(self.ell + 3),
            (-ma, Rat::zero()),
        )
    }

    /// Union membership for the `(j, k)` translate.
    pub fn translate_contains(&self, j: i64, k: i64, x: &Rat, t: &Rat) -> Result<bool> {
        Ok(self.translated_pieces(j, k)?.iter().any(|c| c.contains(x, t)))
    }

    /// Site window and horizon large enough to evaluate every translate in
    /// rows `0..=k_rows` of the lattice cone `|j| <= k`.
    pub fn window_for_rows(&self, k_rows: i64) -> Result<(SiteWindow, f64)> {
        if k_rows < 0 {
            return Err(Error::invalid("row count must be >= 0"));
        }
        let mut x_min: Option<Rat> = None;
        let mut x_max: Option<Rat> = None;
        let mut t_max: Option<Rat> = None;
        for k in 0..=k_rows {
            for j in (-k..=k).step_by(2) {
                for cell in self.translated_pieces(j, k)? {
                    let (lo, hi) = cell.x_extent();
                    let top = cell.top_time();
                    x_min = Some(x_min.map_or(lo.clone(), |m| m.min(lo)));
                    x_max = Some(x_max.map_or(hi.clone(), |m| m.max(hi)));
                    t_max = Some(t_max.map_or(top.clone(), |m| m.max(top)));
                }
            }
        }
        let (x_min, x_max, t_max) = (x_min.unwrap(), x_max.unwrap(), t_max.unwrap());
        let lo = rat_floor_i64(&x_min)?;
        let hi = -rat_floor_i64(&-x_max)?;
        Ok((SiteWindow::new(lo, hi)?, f64_at_or_above(&t_max)))
    }
}

/// Result of the integer alignment search: `s_l_prime = s_r m/(m-1)` is a
/// slightly shallower left slope and `beta = alpha - c/(m s_r)` a band
/// width for which the branch counts below come out integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegerSolution {
    pub m: i64,
    pub c: i64,
    #[serde(with = "serde_rat")]
    pub s_l_prime: Rat,
    #[serde(with = "serde_rat")]
    pub beta: Rat,
    pub ell: i64,
    pub d: i64,
    /// The drift speed the search was run against, kept so a solution fully
    /// determines its region family.
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
}

const SEARCH_BOUND: i64 = 1_000_000;

fn rat_floor_i64(r: &Rat) -> Result<i64> {
    r.floor()
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::invalid(format!("{} overflows i64", format_rat(r))))
}

fn rat(n: i64, d: i64) -> Rat {
    crate::exact::rat(n, d)
}

/// Finds integer branch counts `(ell, d)` and a band width `beta` so that
/// the Y-region envelope with slopes `(s_l_prime, 1/alpha_r)` fits inside
/// any wedge with speeds `(alpha_l, alpha_r)`. Deterministic: takes the
/// smallest admissible `m`, then the smallest admissible `c >= m`.
pub fn solve_integer_wedge(alpha: &Rat, alpha_l: &Rat, alpha_r: &Rat) -> Result<IntegerSolution> {
    if !(Rat::zero() < *alpha_l && alpha_l < alpha_r && alpha_r < alpha) {
        return Err(Error::invalid(format!(
            "need 0 < alpha_l < alpha_r < alpha, got {}, {}, {}",
            format_rat(alpha_l),
            format_rat(alpha_r),
            format_rat(alpha)
        )));
    }
    let s_l = rat_int(1) / alpha_l;
    let s_r = rat_int(1) / alpha_r;
    // Smallest integer m with m > 3/(alpha s_r) and s_r m/(m-1) < s_l.
    let m0 = rat_int(3) / (alpha * &s_r);
    let mut m = (rat_floor_i64(&m0)? + 1).max(2);
    loop {
        if &s_r * rat_int(m) / rat_int(m - 1) < s_l {
            break;
        }
        m += 1;
        if m > SEARCH_BOUND {
            return Err(Error::SearchExhausted(format!(
                "no m <= {SEARCH_BOUND} with s_r m/(m-1) < s_l for s_l = {}, s_r = {}",
                format_rat(&s_l),
                format_rat(&s_r)
            )));
        }
    }
    let s_l_prime = &s_r * rat_int(m) / rat_int(m - 1);
    // Smallest integer c >= m strictly inside (2/3 alpha m s_r, alpha m s_r).
    let hi = alpha * rat_int(m) * &s_r;
    let lo = rat(2, 3) * &hi;
    let c = (rat_floor_i64(&lo)? + 1).max(m);
    if !(lo < rat_int(c) && rat_int(c) < hi) {
        return Err(Error::SearchExhausted(format!(
            "no integer >= {m} strictly inside ({}, {})",
            format_rat(&lo),
            format_rat(&hi)
        )));
    }
    let beta = alpha - rat_int(c) / (rat_int(m) * &s_r);
    let (ell, d) = (c + m - 1, c - m);

    // Cross-checks; all are forced by the construction.
    if !(Rat::zero() < beta && beta < alpha / rat_int(3)) {
        return Err(Error::InternalConsistency(format!("beta = {} outside (0, alpha/3)", format_rat(&beta))));
    }
    if &s_r * (alpha - &beta) != rat_int(c) / rat_int(m) {
        return Err(Error::InternalConsistency("s_r (alpha - beta) != c/m".into()));
    }
    let denom = &s_l_prime - &s_r;
    let ell_closed = &s_r * (&s_l_prime * (alpha - &beta) + rat_int(1)) / &denom;
    let d_closed = &s_l_prime * (&s_r * (alpha - &beta) - rat_int(1)) / &denom;
    if ell_closed != rat_int(ell) || d_closed != rat_int(d) {
        return Err(Error::InternalConsistency(format!(
            "closed-form branch counts ({}, {}) disagree with ({ell}, {d})",
            format_rat(&ell_closed),
            format_rat(&d_closed)
        )));
    }
    let slopes = y_slopes(ell, d, alpha, &beta)?;
    if slopes.s_l != s_l_prime || slopes.s_r != s_r {
        return Err(Error::InternalConsistency("assembled slopes disagree with the search".into()));
    }
    Ok(IntegerSolution { m, c, s_l_prime, beta, ell, d, alpha: alpha.clone() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CornerFailure {
    pub j: i64,
    pub k: i64,
    pub piece_index: usize,
    pub stage: u8,
    /// 0 = bottom-left, 1 = bottom-right, 2 = top-left, 3 = top-right.
    pub corner_index: usize,
    /// Exact coordinates, as `p/q` strings.
    pub corner: (String, String),
    /// Which envelope the corner escaped: the solution-derived tight wedge
    /// or the target wedge itself.
    pub envelope: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub rows: i64,
    pub translates_checked: usize,
    pub corners_checked: usize,
    /// `1/s_l_prime >= alpha_l` and `1/s_r <= alpha_r`: with these, the
    /// finite-row corner checks extend to every row, because corners are
    /// affine in the row index with per-row drift equal to the envelope
    /// speeds.
    pub slopes_ok: bool,
    /// The solution-derived envelope sits inside the target wedge.
    pub envelope_in_target: bool,
    pub ok: bool,
    pub failure: Option<CornerFailure>,
}

/// Checks that the scaled Y region of `sol` sits inside the wedge with
/// speeds `(alpha_l, alpha_r)` and width `m_wedge`, shifted left by
/// `m_wedge/(ell+3)`: the region is assembled at scale
/// `m_wedge / (alpha (ell+3))` and every parallelogram corner of every
/// translate in rows `0..=rows` is tested exactly.
pub fn verify_containment(
    sol: &IntegerSolution,
    alpha_l: &Rat,
    alpha_r: &Rat,
    m_wedge: &Rat,
    rows: i64,
) -> Result<ContainmentReport> {
    verify_containment_with_beta(sol, alpha_l, alpha_r, m_wedge, rows, &sol.beta)
}

/// One wedge boundary condition as a denominator-cleared affine functional:
/// a corner shifted by `j` unit-j and `k` unit-k translate steps satisfies
/// the condition iff `base + j ju + k kv >= 0`.
struct LineForm {
    /// Values at the base-translate corners, flattened cell-major.
    base: Vec<BigInt>,
    ju: BigInt,
    kv: BigInt,
}

/// The three membership conditions of `Wedge::contains` (`t` at or above
/// the offset, left boundary, right boundary) as [`LineForm`]s over the
/// given base corners and translate step vectors `(u_x, 0)` and
/// `(v_x, v_t)`. Scaling by the positive common denominator preserves
/// every sign, so the integer comparisons decide exactly the rational
/// inequalities.
fn wedge_line_forms(
    w: &Wedge,
    corners: &[[(Rat, Rat); 4]],
    u_x: &Rat,
    v_x: &Rat,
    v_t: &Rat,
) -> Vec<LineForm> {
    let (ox, ot) = (&w.offset.0, &w.offset.1);
    // value = A x + B t + C, nonnegative exactly on the inner side.
    let coeffs: [(Rat, Rat, Rat); 3] = [
        (Rat::zero(), rat_int(1), -ot.clone()),
        (rat_int(1), -w.alpha_l.clone(), &w.alpha_l * ot - ox),
        (rat_int(-1), w.alpha_r.clone(), &w.m - &w.alpha_r * ot + ox),
    ];
    coeffs
        .into_iter()
        .map(|(a, b, c)| {
            let mut vals: Vec<Rat> = Vec::with_capacity(corners.len() * 4 + 2);
            for cell in corners {
                for (x, t) in cell {
                    vals.push(&a * x + &b * t + &c);
                }
            }
            vals.push(&a * u_x);
            vals.push(&a * v_x + &b * v_t);
            let scale = vals.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            let mut ints: Vec<BigInt> =
                vals.iter().map(|v| (v * &scale).to_integer()).collect();
            let kv = ints.pop().expect("kv pushed above");
            let ju = ints.pop().expect("ju pushed above");
            LineForm { base: ints, ju, kv }
        })
        .collect()
}

/// Like [`verify_containment`], but assembles the region with an
/// overridden band width while keeping the solution-derived envelope.
/// A perturbed `beta` moves corners off the envelope's boundary lines and
/// is reported with the first escaping corner.
pub fn verify_containment_with_beta(
    sol: &IntegerSolution,
    alpha_l: &Rat,
    alpha_r: &Rat,
    m_wedge: &Rat,
    rows: i64,
    beta: &Rat,
) -> Result<ContainmentReport> {
    if m_wedge <= &Rat::zero() || rows < 0 {
        return Err(Error::invalid("need a positive wedge width and rows >= 0"));
    }
    // The search fixed beta = alpha - c alpha_r / m, so alpha is implied;
    // reconstructing it and comparing with the stored value catches a
    // solution paired with the wrong target speeds.
    let alpha = &sol.beta + rat_int(sol.c) * alpha_r / rat_int(sol.m);
    if alpha != sol.alpha {
        return Err(Error::invalid(format!(
            "solution was produced for alpha = {}, but these speeds imply {}",
            format_rat(&sol.alpha),
            format_rat(&alpha)
        )));
    }
    let m_y = m_wedge / (&alpha * rat_int(sol.ell + 3));
    let reference = YRegion::assemble_geometry(sol.ell, sol.d, m_y.clone(), alpha.clone(), sol.beta.clone())?;
    let envelope = reference.bounding_wedge().clone();
    let ref_slopes = reference.slopes().clone();
    let probe = if beta == &sol.beta {
        reference
    } else {
        YRegion::assemble_geometry(sol.ell, sol.d, m_y, alpha, beta.clone())?
    };
    let shift = -(m_wedge / rat_int(sol.ell + 3));
    let target = Wedge::with_offset(
        alpha_l.clone(),
        alpha_r.clone(),
        m_wedge.clone(),
        (shift.clone(), Rat::zero()),
    )?;
    let slopes_ok =
        rat_int(1) / &ref_slopes.s_l >= *alpha_l && rat_int(1) / &ref_slopes.s_r <= *alpha_r;
    let envelope_in_target = slopes_ok
        && shift <= envelope.offset.0
        && &envelope.offset.0 + &envelope.m <= &shift + m_wedge;

    // The (j, k) translate adds (j u_x + k v_x, k v_t) to every base
    // corner, and each wedge membership condition is affine in (x, t).
    // Clearing denominators once therefore turns the whole sweep into
    // integer sign checks: the predicate per corner is unchanged, it is
    // just no longer re-derived cell by cell.
    let base_corners: Vec<[(Rat, Rat); 4]> =
        probe.pieces.iter().map(|p| p.cell.corners()).collect();
    let u_x = probe.m() * (probe.alpha() - probe.beta());
    let v_x = &u_x * rat_int(sol.ell - sol.d);
    let v_t = probe.m() * rat_int(sol.ell + sol.d + 1);
    let mut lines = wedge_line_forms(&envelope, &base_corners, &u_x, &v_x, &v_t);
    lines.extend(wedge_line_forms(&target, &base_corners, &u_x, &v_x, &v_t));

    let mut translates_checked = 0usize;
    let mut corners_checked = 0usize;
    let mut failure = None;
    'rows: for k in 0..=rows {
        for j in (-k..=k).step_by(2) {
            translates_checked += 1;
            // value(corner) = base + j ju + k kv >= 0, checked as
            // base >= -(j ju + k kv) so the inner loop only compares.
            let thresholds: Vec<BigInt> =
                lines.iter().map(|l| -(&l.ju * j + &l.kv * k)).collect();
            for (idx, cell) in base_corners.iter().enumerate() {
                for ci in 0..4 {
                    corners_checked += 1;
                    let flat = idx * 4 + ci;
                    let in_envelope = (0..3).all(|li| lines[li].base[flat] >= thresholds[li]);
                    let escaped = if !in_envelope {
                        Some("solution")
                    } else if !(3..6).all(|li| lines[li].base[flat] >= thresholds[li]) {
                        Some("target")
                    } else {
                        None
                    };
                    if let Some(envelope_name) = escaped {
                        let (dx, dt) = probe.translate_offset(j, k)?;
                        let (cx, ct) = &cell[ci];
                        failure = Some(CornerFailure {
                            j,
                            k,
                            piece_index: idx,
                            stage: probe.pieces[idx].stage,
                            corner_index: ci,
                            corner: (format_rat(&(cx + &dx)), format_rat(&(ct + &dt))),
                            envelope: envelope_name.to_string(),
                        });
                        break 'rows;
                    }
                }
            }
        }
    }
    Ok(ContainmentReport {
        rows,
        translates_checked,
        corners_checked,
        slopes_ok,
        envelope_in_target,
        ok: failure.is_none() && slopes_ok && envelope_in_target,
        failure,
    })
}

pub(crate) fn exact_f64(r: &Rat) -> Result<f64> {
    let f = rat_to_f64(r);
    if f.is_finite() && rat_from_f64(f) == *r {
        Ok(f)
    } else {
        Err(Error::invalid(format!(
            "time {} is not exactly representable as a float; edge crossings need exact edge times",
            format_rat(r)
        )))
    }
}

/// True when an active path inside `cell` connects its bottom edge to its
/// top edge: the cell-restricted evolution is started with the full bottom
/// edge occupied, and survival to the top time is exactly reachability of
/// some top-edge site.
pub fn crossing_event(tl: &EventTimeline, cell: &Parallelogram) -> Result<bool> {
    cell.validate_integrality()?;
    let t0f = exact_f64(&cell.bottom_time())?;
    let t1 = cell.top_time();
    let t1f = exact_f64(&t1)?;
    if t1f > tl.horizon() {
        return Err(Error::WindowTooSmall(format!(
            "cell top time {t1f} beyond timeline horizon {}",
            tl.horizon()
        )));
    }
    let (x_lo, x_hi) = cell.x_extent();
    let lo = rat_floor_i64(&x_lo)?;
    let hi = -rat_floor_i64(&-x_hi)?;
    let w = tl.window();
    if lo < w.min || hi > w.max {
        return Err(Error::WindowTooSmall(format!(
            "cell spans sites [{lo}, {hi}] but the window is [{}, {}]",
            w.min, w.max
        )));
    }
    // Restricting to the cell's own sites and time range keeps repeated
    // crossing evaluations on one timeline from rescanning the full stream.
    let sub = tl.restricted(SiteWindow::new(lo, hi)?, t1f)?;
    let initial = Configuration::from_sites(sub.window(), cell.bottom_sites()?)?;
    let opts = EvolveOptions { start: t0f, end: Some(t1f), ..Default::default() };
    let traj = evolve(&sub, &Region::Parallelogram(cell.clone()), &initial, &opts)?;
    Ok(!traj.final_state.is_empty())
}

/// Crossing results for every cell of one translate; `open` is their
/// conjunction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OTranslate {
    pub j: i64,
    pub k: i64,
    pub open: bool,
    pub crossings: Vec<bool>,
}

pub fn o_event(tl: &EventTimeline, y: &YRegion, j: i64, k: i64) -> Result<OTranslate> {
    let crossings = y
        .translated_pieces(j, k)?
        .iter()
        .map(|cell| crossing_event(tl, cell))
        .collect::<Result<Vec<_>>>()?;
    Ok(OTranslate { j, k, open: crossings.iter().all(|&c| c), crossings })
}

/// The index lattice `{(j, k): 0 <= k <= k_max, |j| <= k, j + k even}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormLattice {
    pub k_max: i64,
}

impl RenormLattice {
    pub fn new(k_max: i64) -> Result<Self> {
        if k_max < 0 {
            return Err(Error::invalid("lattice depth must be >= 0"));
        }
        Ok(RenormLattice { k_max })
    }

    pub fn contains(&self, j: i64, k: i64) -> bool {
        0 <= k && k <= self.k_max && j.abs() <= k && (j + k) % 2 == 0
    }

    /// Points in row-major order, `j` ascending within each row.
    pub fn points(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..=self.k_max).flat_map(|k| (-k..=k).step_by(2).map(move |j| (j, k)))
    }

    /// Twice the lattice distance `(|dj| + |dk|)/2`, kept integral.
    pub fn norm_times_two(a: (i64, i64), b: (i64, i64)) -> i64 {
        (a.0 - b.0).abs() + (a.1 - b.1).abs()
    }
}

/// Open/closed indicators over the truncated lattice, with per-translate
/// crossing diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercolationField {
    k_max: i64,
    /// Row `k` holds `j = -k, -k+2, ..., k`.
    rows: Vec<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<Vec<Vec<bool>>>,
}

impl PercolationField {
    pub fn from_values(rows: Vec<Vec<bool>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("field needs at least row 0"));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::invalid(format!("row {k} must have {} entries, got {}", k + 1, row.len())));
            }
        }
        let k_max = rows.len() as i64 - 1;
        Ok(PercolationField { k_max, rows, diagnostics: Vec::new() })
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    fn idx(j: i64, k: i64) -> usize {
        ((j + k) / 2) as usize
    }

    pub fn value(&self, j: i64, k: i64) -> Option<bool> {
        if !(RenormLattice { k_max: self.k_max }).contains(j, k) {
            return None;
        }
        Some(self.rows[k as usize][Self::idx(j, k)])
    }

    pub fn crossings(&self, j: i64, k: i64) -> Option<&[bool]> {
        if self.diagnostics.is_empty() || !(RenormLattice { k_max: self.k_max }).contains(j, k) {
            return None;
        }
        Some(&self.diagnostics[k as usize][Self::idx(j, k)])
    }

    pub fn open_count(&self) -> usize {
        self.rows.iter().flatten().filter(|&&u| u).count()
    }
}

/// Evaluates every translate in rows `0..=k_rows`.
pub fn percolation_field(tl: &EventTimeline, y: &YRegion, k_rows: i64) -> Result<PercolationField> {
    let lattice = RenormLattice::new(k_rows)?;
    let mut rows: Vec<Vec<bool>> = (0..=k_rows).map(|k| Vec::with_capacity(k as usize + 1)).collect();
    let mut diagnostics: Vec<Vec<Vec<bool>>> = (0..=k_rows).map(|_| Vec::new()).collect();
    for (j, k) in lattice.points() {
        let o = o_event(tl, y, j, k)?;
        rows[k as usize].push(o.open);
        diagnostics[k as usize].push(o.crossings);
    }
    Ok(PercolationField { k_max: k_rows, rows, diagnostics })
}

/// A witness open path `(0,0), (j_2,1), ..., (j_n, k_max)`: consecutive
/// rows, steps of one in `j`, indicators true at every point except
/// possibly the last. For a depth-0 field the single point itself must be
/// open.
pub fn open_path_witness(field: &PercolationField) -> Option<Vec<(i64, i64)>> {
    let kk = field.k_max();
    if field.value(0, 0) != Some(true) {
        return None;
    }
    if kk == 0 {
        return Some(vec![(0, 0)]);
    }
    // reach[k] marks translates reachable from the origin through open
    // points, themselves open; only rows 0..kk-1 need to be open.
    let mut reach: Vec<Vec<bool>> = vec![vec![true]];
    for k in 1..kk {
        let prev = &reach[(k - 1) as usize];
        let mut row = Vec::with_capacity(k as usize + 1);
        for j in (-k..=k).step_by(2) {
            let from_left = j - 1 >= -(k - 1) && prev[PercolationField::idx(j - 1, k - 1)];
            let from_right = j + 1 <= k - 1 && prev[PercolationField::idx(j + 1, k - 1)];
            row.push((from_left || from_right) && field.value(j, k) == Some(true));
        }
        reach.push(row);
    }
    let last = kk - 1;
    let j_end = (-last..=last)
        .step_by(2)
        .find(|&j| reach[last as usize][PercolationField::idx(j, last)])?;
    let mut path = vec![(j_end + 1, kk), (j_end, last)];
    let mut j = j_end;
    for k in (1..=last).rev() {
        let prev = &reach[(k - 1) as usize];
        j = if j - 1 >= -(k - 1) && prev[PercolationField::idx(j - 1, k - 1)] { j - 1 } else { j + 1 };
        path.push((j, k - 1));
    }
    path.reverse();
    Some(path)
}

pub fn open_path_exists(field: &PercolationField) -> bool {
    open_path_witness(field).is_some()
}

/// Blocks covering everything outside the union of the given translates:
/// querying paths against these blocks confines them to the union. Interval
/// ends sitting between representable floats are widened by at most one
/// float step in the permissive direction.
pub fn union_complement_blocks(
    y: &YRegion,
    translates: &[(i64, i64)],
    window: SiteWindow,
    horizon: f64,
) -> Result<BlockSet> {
    let mut cells = Vec::new();
    for &(j, k) in translates {
        cells.extend(y.translated_pieces(j, k)?);
    }
    let mut blocks = BlockSet::new(window);
    for x in window.sites() {
        let mut spans: Vec<(Rat, Rat)> = cells
            .iter()
            .filter_map(|c| c.site_slice(x))
            .map(|(lo, hi)| (lo, hi.expect("parallelogram slices are bounded")))
            .collect();
        spans.sort();
        let mut merged: Vec<(Rat, Rat)> = Vec::new();
        for (lo, hi) in spans {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => {
                    if hi > last.1 {
                        last.1 = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        let mut cursor = 0.0f64;
        for (lo, hi) in &merged {
            let end = f64_at_or_above(lo);
            if cursor < end {
                blocks.push(x, cursor, end)?;
            }
            cursor = f64_at_or_below(hi).next_up();
        }
        if cursor <= horizon {
            blocks.push(x, cursor, f64::INFINITY)?;
        }
    }
    Ok(blocks)
}
