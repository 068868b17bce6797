use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moebius::{ExtendedReal, MoebiusMap};

/// A compact union of g+1 disjoint closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct FiniteGapSet {
    endpoints: Vec<f64>,
}

impl TryFrom<Vec<[f64; 2]>> for FiniteGapSet {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        let bands: Vec<(f64, f64)> = v.into_iter().map(|[a, b]| (a, b)).collect();
        FiniteGapSet::new(&bands)
    }
}

impl From<FiniteGapSet> for Vec<[f64; 2]> {
    fn from(s: FiniteGapSet) -> Self {
        s.bands().into_iter().map(|(a, b)| [a, b]).collect()
    }
}

impl FiniteGapSet {
    pub fn new(bands: &[(f64, f64)]) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidInput("finite gap set needs at least one band".into()));
        }
        let mut endpoints = Vec::with_capacity(2 * bands.len());
        for &(lo, hi) in bands {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInput("band endpoints must be finite".into()));
            }
            if lo >= hi {
                return Err(Error::InvalidInput(format!("empty band [{lo}, {hi}]")));
            }
            if let Some(&last) = endpoints.last() {
                if lo <= last {
                    return Err(Error::InvalidInput(format!(
                        "bands must be ordered and disjoint (band starting at {lo})"
                    )));
                }
            }
            endpoints.push(lo);
            endpoints.push(hi);
        }
        Ok(FiniteGapSet { endpoints })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(&[(lo, hi)])
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn bands(&self) -> Vec<(f64, f64)> {
        self.endpoints.chunks(2).map(|c| (c[0], c[1])).collect()
    }

    pub fn band_count(&self) -> usize {
        self.endpoints.len() / 2
    }

    pub fn genus(&self) -> usize {
        self.band_count() - 1
    }

    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.endpoints[1..self.endpoints.len() - 1]
            .chunks(2)
            .map(|c| (c[0], c[1]))
            .collect()
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.endpoints[0], *self.endpoints.last().unwrap())
    }

    /// Diameter of the convex hull.
    pub fn scale(&self) -> f64 {
        let (a, b) = self.hull();
        b - a
    }

    pub fn band_index(&self, x: f64) -> Option<usize> {
        self.bands().iter().position(|&(lo, hi)| x >= lo && x <= hi)
    }

    pub fn gap_index(&self, x: f64) -> Option<usize> {
        self.gaps().iter().position(|&(lo, hi)| x > lo && x < hi)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.bands().iter().any(|&(lo, hi)| x >= lo - tol && x <= hi + tol)
    }

    pub fn contains_ext(&self, x: ExtendedReal, tol: f64) -> bool {
        match x {
            ExtendedReal::Finite(x) => self.contains(x, tol),
            ExtendedReal::Infinity => false,
        }
    }

    /// Image under a Möbius map whose pole lies outside the set.
    pub fn map(&self, f: &MoebiusMap) -> Result<FiniteGapSet> {
        if let ExtendedReal::Finite(p) = f.pole() {
            let (a, b) = self.hull();
            if p >= a && p <= b && self.gap_index(p).is_none() {
                return Err(Error::InvalidInput(format!(
                    "map sends {p} in the set to infinity"
                )));
            }
        }
        let mut bands = Vec::with_capacity(self.band_count());
        for (lo, hi) in self.bands() {
            let (x, y) = match (f.apply_real(lo), f.apply_real(hi)) {
                (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => (x, y),
                _ => return Err(Error::InvalidInput("band endpoint mapped to infinity".into())),
            };
            bands.push(if x < y { (x, y) } else { (y, x) });
        }
        bands.sort_by(|a, b| a.0.total_cmp(&b.0));
        FiniteGapSet::new(&bands)
    }

    pub fn arcs(&self) -> Vec<SupportArc> {
        self.bands()
            .into_iter()
            .map(|(lo, hi)| SupportArc::new(ExtendedReal::Finite(lo), ExtendedReal::Finite(hi)))
            .collect()
    }
}

/// A closed arc of ℝ̄ traversed in the increasing direction from `start` to
/// `end`, passing through ∞ when start > end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportArc {
    pub start: ExtendedReal,
    pub end: ExtendedReal,
}

impl SupportArc {
    pub fn new(start: ExtendedReal, end: ExtendedReal) -> Self {
        SupportArc { start, end }
    }

    pub fn passes_infinity(&self) -> bool {
        match (self.start, self.end) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a > b,
            _ => true,
        }
    }

    pub fn contains(&self, x: ExtendedReal, tol: f64) -> bool {
        use ExtendedReal::*;
        match (self.start, self.end, x) {
            (_, _, Infinity) => self.passes_infinity(),
            (Finite(a), Finite(b), Finite(x)) if a <= b => x >= a - tol && x <= b + tol,
            (Finite(a), Finite(b), Finite(x)) => x >= a - tol || x <= b + tol,
            (Infinity, Finite(b), Finite(x)) => x <= b + tol,
            (Finite(a), Infinity, Finite(x)) => x >= a - tol,
            (Infinity, Infinity, Finite(_)) => false,
        }
    }

    /// Image under f, keeping the increasing orientation.
    pub fn map(&self, f: &MoebiusMap) -> SupportArc {
        let s = f.apply(self.start);
        let e = f.apply(self.end);
        if f.orientation() > 0 {
            SupportArc::new(s, e)
        } else {
            SupportArc::new(e, s)
        }
    }

    /// Angular intervals in [−π, π]; ∞ is present at both −π and π.
    pub(crate) fn angle_intervals(&self) -> Vec<(Mark, Mark)> {
        use std::f64::consts::PI;
        let lo_inf = Mark { angle: -PI, point: ExtendedReal::Infinity };
        let hi_inf = Mark { angle: PI, point: ExtendedReal::Infinity };
        match (self.start, self.end) {
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => vec![(lo_inf, lo_inf), (hi_inf, hi_inf)],
            (ExtendedReal::Infinity, e) => vec![(lo_inf, Mark::of(e)), (hi_inf, hi_inf)],
            (s, ExtendedReal::Infinity) => vec![(lo_inf, lo_inf), (Mark::of(s), hi_inf)],
            (s, e) if self.passes_infinity() => vec![(lo_inf, Mark::of(e)), (Mark::of(s), hi_inf)],
            (s, e) => vec![(Mark::of(s), Mark::of(e))],
        }
    }
}

/// A point of ℝ̄ with its angle on the circle.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Mark {
    pub angle: f64,
    pub point: ExtendedReal,
}

impl Mark {
    pub fn of(x: ExtendedReal) -> Mark {
        Mark { angle: x.circle_angle(), point: x }
    }
}

/// Open complementary arcs of a union of closed arcs and points on ℝ̄.
pub(crate) fn complement_arcs(pieces: &[SupportArc]) -> Vec<SupportArc> {
    use std::f64::consts::PI;
    let mut iv: Vec<(Mark, Mark)> = pieces.iter().flat_map(|a| a.angle_intervals()).collect();
    if iv.is_empty() {
        return Vec::new();
    }
    iv.sort_by(|a, b| a.0.angle.total_cmp(&b.0.angle));
    let mut merged: Vec<(Mark, Mark)> = Vec::new();
    for (s, e) in iv {
        if let Some(last) = merged.last_mut() {
            if s.angle <= last.1.angle {
                if e.angle > last.1.angle {
                    last.1 = e;
                }
                continue;
            }
        }
        merged.push((s, e));
    }
    let mut gaps: Vec<SupportArc> =
        merged.windows(2).map(|w| SupportArc::new(w[0].1.point, w[1].0.point)).collect();
    let first = merged.first().unwrap().0;
    let last = merged.last().unwrap().1;
    if first.angle > -PI && last.angle < PI {
        gaps.push(SupportArc::new(last.point, first.point));
    }
    gaps
}
