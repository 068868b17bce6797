//! Probability measures on ℝ̄: atoms plus absolutely continuous bands.
//!
//! Absolutely continuous parts are stored in a base coordinate together with
//! a Möbius frame, so pushforwards never resample: a node t with weight w in
//! the base becomes the node frame(t) with the same weight.

mod poles;
mod set;

pub use poles::PoleSequence;
pub use set::{FiniteGapSet, SupportArc};
pub(crate) use set::complement_arcs;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cheb;
use crate::error::{Error, Result};
use crate::mp::{neumaier_sum, Neumaier};
use crate::moebius::{ExtendedReal, MoebiusMap};

pub const DEFAULT_NODES: usize = 512;

/// Density of an absolutely continuous component in its base coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// |∏(t − ζ)| / (π √|∏(t − e)|) over the component's band endpoints e.
    Chebyshev { zeros: Vec<f64> },
    /// Density values at the first-kind Chebyshev nodes of each band, in
    /// increasing order. With `endpoint_singular` the density is assumed to
    /// behave like an inverse square root at the band ends.
    Sampled { values: Vec<Vec<f64>>, endpoint_singular: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcComponent {
    frame: MoebiusMap,
    bands: Vec<(f64, f64)>,
    density: Density,
    mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: ExtendedReal,
    pub weight: f64,
}

/// Quadrature samples of one band in base coordinates.
#[derive(Clone, Debug)]
pub struct BandRule {
    pub lo: f64,
    pub hi: f64,
    pub theta: Vec<f64>,
    pub nodes: Vec<f64>,
    /// s(θ_i) with w(t) dt = s(θ) dθ / π.
    pub smooth: Vec<f64>,
    /// Unnormalised quadrature weights.
    pub weights: Vec<f64>,
}

/// Flattened discrete rule: atoms first, then bands left to right.
#[derive(Clone, Debug)]
pub struct DiscreteRule {
    pub points: Vec<ExtendedReal>,
    pub weights: Vec<f64>,
    pub atom_count: usize,
}

impl DiscreteRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    components: Vec<AcComponent>,
    atoms: Vec<Atom>,
    essential: Vec<SupportArc>,
    nodes: usize,
}

pub(crate) fn chebyshev_smooth(bands: &[(f64, f64)], zeros: &[f64], band: usize, t: f64) -> f64 {
    let mut num = 1.0;
    for z in zeros {
        num *= (t - z).abs();
    }
    let mut den = 1.0;
    for (b, &(lo, hi)) in bands.iter().enumerate() {
        if b != band {
            den *= ((t - lo) * (t - hi)).abs();
        }
    }
    num / den.sqrt()
}

impl AcComponent {
    fn band_rule(&self, band: usize, nodes: usize) -> BandRule {
        let (lo, hi) = self.bands[band];
        let h = 0.5 * (hi - lo);
        match &self.density {
            Density::Chebyshev { zeros } => {
                let theta = cheb::angles(nodes);
                let ts = cheb::band_nodes(lo, hi, &theta);
                let smooth: Vec<f64> =
                    ts.iter().map(|&t| chebyshev_smooth(&self.bands, zeros, band, t)).collect();
                let weights = smooth.iter().map(|s| s / nodes as f64).collect();
                BandRule { lo, hi, theta, nodes: ts, smooth, weights }
            }
            Density::Sampled { values, endpoint_singular } => {
                let vals = &values[band];
                let m = vals.len();
                let theta = cheb::angles(m);
                let ts = cheb::band_nodes(lo, hi, &theta);
                let smooth: Vec<f64> = theta
                    .iter()
                    .zip(vals)
                    .map(|(th, v)| std::f64::consts::PI * v * h * th.sin())
                    .collect();
                let weights = if *endpoint_singular {
                    smooth.iter().map(|s| s / m as f64).collect()
                } else {
                    let fw = cheb::fejer_weights(&theta);
                    vals.iter().zip(fw).map(|(v, w)| v * h * w).collect()
                };
                BandRule { lo, hi, theta, nodes: ts, smooth, weights }
            }
        }
    }

    fn rules(&self, nodes: usize) -> Vec<BandRule> {
        (0..self.bands.len()).map(|b| self.band_rule(b, nodes)).collect()
    }

    fn raw_total(rules: &[BandRule]) -> f64 {
        neumaier_sum(rules.iter().flat_map(|r| r.weights.iter().copied()))
    }

    fn arcs(&self) -> Vec<SupportArc> {
        self.bands
            .iter()
            .map(|&(lo, hi)| {
                SupportArc::new(ExtendedReal::Finite(lo), ExtendedReal::Finite(hi)).map(&self.frame)
            })
            .collect()
    }

    pub fn frame(&self) -> &MoebiusMap {
        &self.frame
    }

    pub fn base_bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

impl Measure {
    fn assemble(
        mut components: Vec<AcComponent>,
        mut atoms: Vec<Atom>,
        essential: Vec<SupportArc>,
    ) -> Result<Measure> {
        let mut total = Neumaier::new();
        for c in &components {
            total.add(c.mass);
        }
        for a in &atoms {
            total.add(a.weight);
        }
        let total = total.value();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidInput("measure is not normalisable".into()));
        }
        for c in &mut components {
            c.mass /= total;
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.position == a.position) {
                return Err(Error::InvalidInput(format!("duplicate atom at {}", a.position)));
            }
        }
        Ok(Measure { components, atoms, essential, nodes: DEFAULT_NODES })
    }

    /// Finitely many atoms; weights are normalised to total mass 1.
    pub fn atomic(atoms: &[(ExtendedReal, f64)]) -> Result<Measure> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("atomic measure needs at least one atom".into()));
        }
        let mut list = Vec::with_capacity(atoms.len());
        for &(position, weight) in atoms {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidInput(format!("atom weight {weight} must be positive")));
            }
            list.push(Atom { position, weight });
        }
        Self::assemble(Vec::new(), list, Vec::new())
    }

    /// Density |∏(t − ζ)|/(π√|∏(t − e)|) on `set`, normalised.
    pub fn chebyshev(set: &FiniteGapSet, zeros: &[f64]) -> Result<Measure> {
        if zeros.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("density zeros must be finite".into()));
        }
        let comp = AcComponent {
            frame: MoebiusMap::identity(),
            bands: set.bands(),
            density: Density::Chebyshev { zeros: zeros.to_vec() },
            mass: 1.0,
        };
        Self::assemble(vec![comp], Vec::new(), set.arcs())
    }

    pub fn arcsine(lo: f64, hi: f64) -> Result<Measure> {
        Self::chebyshev(&FiniteGapSet::interval(lo, hi)?, &[])
    }

    /// User supplied density samples; see [`Density::Sampled`].
    pub fn sampled(set: &FiniteGapSet, values: Vec<Vec<f64>>, endpoint_singular: bool) -> Result<Measure> {
        if values.len() != set.band_count() {
            return Err(Error::InvalidInput("one sample vector per band is required".into()));
        }
        for v in &values {
            if v.len() < 2 {
                return Err(Error::InvalidInput("each band needs at least two samples".into()));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidInput("density samples must be finite and nonnegative".into()));
            }
        }
        let mut comp = AcComponent {
            frame: MoebiusMap::identity(),
            bands: set.bands(),
            density: Density::Sampled { values, endpoint_singular },
            mass: 1.0,
        };
        comp.mass = AcComponent::raw_total(&comp.rules(0));
        if !(comp.mass > 0.0) {
            return Err(Error::InvalidInput("sampled density has zero mass".into()));
        }
        Self::assemble(vec![comp], Vec::new(), set.arcs())
    }

    /// Convex combination of measures with the given (positive) weights.
    pub fn mixture(parts: &[(f64, &Measure)]) -> Result<Measure> {
        let mut components = Vec::new();
        let mut atoms: Vec<Atom> = Vec::new();
        let mut pieces = Vec::new();
        for &(w, m) in parts {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInput("mixture weights must be positive".into()));
            }
            for c in &m.components {
                let mut c = c.clone();
                c.mass *= w;
                components.push(c);
            }
            for a in &m.atoms {
                match atoms.iter_mut().find(|b| b.position == a.position) {
                    Some(b) => b.weight += w * a.weight,
                    None => atoms.push(Atom { position: a.position, weight: w * a.weight }),
                }
            }
            pieces.extend(m.essential.iter().copied());
        }
        let essential = merge_arcs(&pieces);
        let mut out = Self::assemble(components, atoms, essential)?;
        out.nodes = parts.iter().map(|(_, m)| m.nodes).max().unwrap_or(DEFAULT_NODES);
        Ok(out)
    }

    /// Adds atoms carrying total weight `atom_mass` (the rest stays on self).
    pub fn with_atoms(&self, atoms: &[(ExtendedReal, f64)], atom_mass: f64) -> Result<Measure> {
        if !(atom_mass > 0.0 && atom_mass < 1.0) {
            return Err(Error::InvalidInput("atom mass must lie in (0, 1)".into()));
        }
        let a = Measure::atomic(atoms)?;
        Measure::mixture(&[(1.0 - atom_mass, self), (atom_mass, &a)])
    }

    pub fn with_nodes(&self, nodes: usize) -> Measure {
        let mut m = self.clone();
        m.nodes = nodes.max(2);
        m
    }

    pub fn with_essential_support(&self, set: &FiniteGapSet) -> Measure {
        let mut m = self.clone();
        m.essential = set.arcs();
        m
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn components(&self) -> &[AcComponent] {
        &self.components
    }

    pub fn essential_support(&self) -> &[SupportArc] {
        &self.essential
    }

    /// The essential support as a finite gap set, when it is one.
    pub fn finite_gap_set(&self) -> Option<FiniteGapSet> {
        let mut bands = Vec::new();
        for a in &self.essential {
            match (a.start, a.end) {
                (ExtendedReal::Finite(s), ExtendedReal::Finite(e)) if s <= e => bands.push((s, e)),
                _ => return None,
            }
        }
        bands.sort_by(|x, y| x.0.total_cmp(&y.0));
        FiniteGapSet::new(&bands).ok()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.components.is_empty()
    }

    /// Number of support points (saturating for continuous parts).
    pub fn support_size(&self) -> usize {
        if self.components.is_empty() {
            self.atoms.len()
        } else {
            usize::MAX
        }
    }

    pub fn total_mass(&self) -> f64 {
        neumaier_sum(
            self.atoms.iter().map(|a| a.weight).chain(self.components.iter().map(|c| c.mass)),
        )
    }

    /// Closed pieces of supp μ (band images and atoms).
    pub fn support_pieces(&self) -> Vec<SupportArc> {
        let mut v: Vec<SupportArc> = self.components.iter().flat_map(|c| c.arcs()).collect();
        v.extend(self.atoms.iter().map(|a| SupportArc::new(a.position, a.position)));
        v
    }

    /// Open connected components of ℝ̄ \ supp μ.
    pub fn gap_components(&self) -> Vec<SupportArc> {
        complement_arcs(&self.support_pieces())
    }

    pub fn support_contains(&self, x: ExtendedReal, tol: f64) -> bool {
        self.support_pieces().iter().any(|a| a.contains(x, tol))
    }

    pub fn pushforward(&self, f: &MoebiusMap) -> Measure {
        let components = self
            .components
            .iter()
            .map(|c| AcComponent { frame: f.compose(&c.frame), ..c.clone() })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { position: f.apply(a.position), weight: a.weight })
            .collect();
        let essential = self.essential.iter().map(|a| a.map(f)).collect();
        Measure { components, atoms, essential, nodes: self.nodes }
    }

    pub fn rule(&self) -> DiscreteRule {
        self.rule_with_nodes(self.nodes)
    }

    pub fn rule_with_nodes(&self, nodes: usize) -> DiscreteRule {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for a in &self.atoms {
            points.push(a.position);
            weights.push(a.weight);
        }
        for c in &self.components {
            let rules = c.rules(nodes);
            let scale = c.mass / AcComponent::raw_total(&rules);
            for r in &rules {
                for (&t, &w) in r.nodes.iter().zip(&r.weights) {
                    points.push(c.frame.apply_real(t));
                    weights.push(w * scale);
                }
            }
        }
        DiscreteRule { points, weights, atom_count: self.atoms.len() }
    }

    /// Σ w conj(F) G over the rule, compensated, in the fixed order.
    pub fn inner_product<F, G>(&self, f: F, g: G) -> Result<Complex64>
    where
        F: Fn(ExtendedReal) -> Option<Complex64>,
        G: Fn(ExtendedReal) -> Option<Complex64>,
    {
        let rule = self.rule();
        let (mut re, mut im) = (Neumaier::new(), Neumaier::new());
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let fv = f(x).ok_or_else(|| Error::EvaluationAtPole(format!("first argument at {x}")))?;
            let gv = g(x).ok_or_else(|| Error::EvaluationAtPole(format!("second argument at {x}")))?;
            let p = fv.conj() * gv * w;
            re.add(p.re);
            im.add(p.im);
        }
        Ok(Complex64::new(re.value(), im.value()))
    }

    /// μ((−∞, x]) for finite x.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = Neumaier::new();
        for a in &self.atoms {
            if let ExtendedReal::Finite(p) = a.position {
                if p <= x {
                    acc.add(a.weight);
                }
            }
        }
        let target = SupportArc::new(ExtendedReal::Infinity, ExtendedReal::Finite(x));
        for c in &self.components {
            let inv = c.frame.invert();
            let pre = target.map(&inv);
            let rules = c.rules(self.nodes);
            let coeffs: Vec<Vec<f64>> =
                rules.iter().map(|r| cheb::cos_coefficients(&r.theta, &r.smooth)).collect();
            let total: f64 = coeffs.iter().map(|a| a[0]).sum();
            for (r, a) in rules.iter().zip(&coeffs) {
                for (t1, t2) in arc_intersect(&pre, r.lo, r.hi) {
                    let mid = 0.5 * (r.lo + r.hi);
                    let h = 0.5 * (r.hi - r.lo);
                    let th = |t: f64| ((t - mid) / h).clamp(-1.0, 1.0).acos();
                    acc.add(c.mass * cheb::partial_integral(a, th(t2), th(t1)) / total);
                }
            }
        }
        acc.value().clamp(0.0, 1.0)
    }
}

/// Real intervals of `arc` ∩ [lo, hi].
fn arc_intersect(arc: &SupportArc, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    use ExtendedReal::*;
    let pieces: Vec<(f64, f64)> = match (arc.start, arc.end) {
        (Finite(s), Finite(e)) if s <= e => vec![(s, e)],
        (Finite(s), Finite(e)) => vec![(f64::NEG_INFINITY, e), (s, f64::INFINITY)],
        (Infinity, Finite(e)) => vec![(f64::NEG_INFINITY, e)],
        (Finite(s), Infinity) => vec![(s, f64::INFINITY)],
        (Infinity, Infinity) => vec![],
    };
    pieces
        .into_iter()
        .filter_map(|(a, b)| {
            let (a, b) = (a.max(lo), b.min(hi));
            (a < b).then_some((a, b))
        })
        .collect()
}

fn merge_arcs(pieces: &[SupportArc]) -> Vec<SupportArc> {
    let mut out: Vec<SupportArc> = Vec::new();
    for p in pieces {
        if !out.contains(p) {
            out.push(*p);
        }
    }
    out
}
