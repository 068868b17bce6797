//! Potential theory for finite gap sets: equilibrium measure, capacity,
//! Green functions with real poles, γ^k, λ_k, 𝒢_E and ρ_{E,C}.
//!
//! Everything with a finite pole w is computed in a frame z ↦ σ/(w − z) + τ
//! that sends w to ∞ and the image set to hull [−2, 2].

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::cheb;
use crate::error::{Error, Result};
use crate::measure::{chebyshev_smooth, FiniteGapSet, Measure, PoleSequence, DEFAULT_NODES};
use crate::moebius::{ExtendedReal, MoebiusMap};

#[derive(Clone, Debug, Serialize)]
struct BandSeries {
    lo: f64,
    hi: f64,
    /// Cosine coefficients of s(θ), normalised to total mass 1.
    coeffs: Vec<f64>,
}

impl BandSeries {
    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn half(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Equilibrium measure of E with density |q(t)|/(π√|∏(t − e)|), q monic of degree g.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumModel {
    set: FiniteGapSet,
    zeros: Vec<f64>,
    bands: Vec<BandSeries>,
    capacity: f64,
    robin: f64,
    /// Mass of the unnormalised density |q|/(π√|∏|).
    raw_mass: f64,
    #[serde(skip)]
    measure: Measure,
}

/// ∫_gap t^i / √|∏(t − e)| dt for i = 0..=g, in the scaled variable u.
fn gap_moments(set: &FiniteGapSet, nodes: usize, center: f64, radius: f64) -> Vec<Vec<f64>> {
    let ends = set.endpoints();
    let g = set.genus();
    let theta = cheb::angles(nodes);
    set.gaps()
        .iter()
        .map(|&(a, b)| {
            let ts = cheb::band_nodes(a, b, &theta);
            let mut row = vec![0.0; g + 1];
            for &t in &ts {
                // (t − a)(b − t) is absorbed by the substitution t = m + h cos θ
                let mut den = 1.0;
                for &e in ends {
                    if e != a && e != b {
                        den *= (t - e).abs();
                    }
                }
                let w = 1.0 / den.sqrt();
                let u = (t - center) / radius;
                let mut p = 1.0;
                for r in row.iter_mut() {
                    *r += w * p;
                    p *= u;
                }
            }
            row
        })
        .collect()
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Equilibrium measure of E with `nodes` quadrature points per interval.
pub fn equilibrium(set: &FiniteGapSet, nodes: usize) -> Result<EquilibriumModel> {
    if nodes < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 quadrature nodes, got {nodes}")));
    }
    let g = set.genus();
    let (lo, hi) = set.hull();
    let center = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo);
    let mut zeros = Vec::with_capacity(g);
    if g > 0 {
        let mom = gap_moments(set, nodes, center, radius);
        let m = DMatrix::from_fn(g, g, |j, i| mom[j][i]);
        let rhs = DVector::from_fn(g, |j, _| -mom[j][g]);
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NoConvergence("gap conditions are singular".into()))?;
        let q = |t: f64| {
            let u = (t - center) / radius;
            let mut acc = 1.0;
            for i in (0..g).rev() {
                acc = acc * u + sol[i];
            }
            acc
        };
        for (a, b) in set.gaps() {
            let z = bisect(q, a, b).ok_or_else(|| {
                Error::Invariant(format!("equilibrium density has no zero in the gap ({a}, {b})"))
            })?;
            zeros.push(z);
        }
    }
    let bands = set.bands();
    let theta = cheb::angles(nodes);
    let mut series: Vec<BandSeries> = bands
        .iter()
        .enumerate()
        .map(|(b, &(lo, hi))| {
            let ts = cheb::band_nodes(lo, hi, &theta);
            let s: Vec<f64> = ts.iter().map(|&t| chebyshev_smooth(&bands, &zeros, b, t)).collect();
            BandSeries { lo, hi, coeffs: cheb::cos_coefficients(&theta, &s) }
        })
        .collect();
    let total: f64 = series.iter().map(|s| s.coeffs[0]).sum();
    for s in &mut series {
        for a in &mut s.coeffs {
            *a /= total;
        }
    }
    let measure = Measure::chebyshev(set, &zeros)?.with_nodes(nodes);
    let mut model =
        EquilibriumModel { set: set.clone(), zeros, bands: series, capacity: 1.0, robin: 0.0, raw_mass: total, measure };
    let log_cap = model.potential(Complex64::new(model.bands[0].mid(), 0.0));
    model.capacity = log_cap.exp();
    model.robin = -log_cap;
    Ok(model)
}

impl EquilibriumModel {
    pub fn set(&self) -> &FiniteGapSet {
        &self.set
    }

    /// Zeros of the density numerator, one per gap.
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn robin(&self) -> f64 {
        self.robin
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn band_masses(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.coeffs[0]).collect()
    }

    /// ∫ log|z − t| dρ_E(t).
    pub fn potential(&self, z: Complex64) -> f64 {
        self.bands
            .iter()
            .map(|b| {
                let u = (z - b.mid()) / b.half();
                b.coeffs[0] * b.half().ln() + cheb::log_kernel(&b.coeffs, u)
            })
            .sum()
    }

    /// G_E(z, ∞).
    pub fn green_infinity(&self, z: Complex64) -> f64 {
        (self.potential(z) + self.robin).max(0.0)
    }

    /// Equilibrium density at a real point (0 off E).
    pub fn density(&self, t: f64) -> f64 {
        let bands = self.set.bands();
        match self.set.band_index(t) {
            Some(b) => {
                let (lo, hi) = bands[b];
                let w = ((t - lo) * (hi - t)).abs().sqrt();
                chebyshev_smooth(&bands, &self.zeros, b, t) / (std::f64::consts::PI * w * self.raw_mass)
            }
            None => 0.0,
        }
    }

    /// max − min of the potential over interior band samples.
    pub fn potential_variation(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in &self.bands {
            for i in 1..8 {
                let t = b.lo + (b.hi - b.lo) * i as f64 / 8.0;
                let v = self.potential(Complex64::new(t, 0.0));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    }

    /// Density samples per band for export: (band, t, density).
    pub fn density_table(&self, per_band: usize) -> Vec<(usize, f64, f64)> {
        let theta = cheb::angles(per_band);
        let mut out = Vec::new();
        for (i, b) in self.bands.iter().enumerate() {
            for t in cheb::band_nodes(b.lo, b.hi, &theta) {
                out.push((i, t, self.density(t)));
            }
        }
        out
    }
}

/// (capacity, Robin constant) of E.
pub fn capacity_robin(set: &FiniteGapSet) -> Result<(f64, f64)> {
    let m = equilibrium(set, DEFAULT_NODES)?;
    Ok((m.capacity, m.robin))
}

struct PoleFrame {
    map: MoebiusMap,
    /// log σ where map(z) ≈ σ/(w − z) near w.
    log_sigma: f64,
    model: EquilibriumModel,
}

/// Green functions of ℂ̄ \ E with real poles; frames are cached per pole.
pub struct Green {
    set: FiniteGapSet,
    nodes: usize,
    base: EquilibriumModel,
    frames: RwLock<HashMap<u64, Arc<PoleFrame>>>,
}

impl std::fmt::Debug for Green {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Green").field("set", &self.set).field("nodes", &self.nodes).finish()
    }
}

impl Green {
    pub fn new(set: &FiniteGapSet) -> Result<Self> {
        Self::with_nodes(set, DEFAULT_NODES)
    }

    pub fn with_nodes(set: &FiniteGapSet, nodes: usize) -> Result<Self> {
        Ok(Green { set: set.clone(), nodes, base: equilibrium(set, nodes)?, frames: RwLock::new(HashMap::new()) })
    }

    pub fn set(&self) -> &FiniteGapSet {
        &self.set
    }

    pub fn equilibrium(&self) -> &EquilibriumModel {
        &self.base
    }

    fn check_pole(&self, w: ExtendedReal) -> Result<()> {
        if self.set.contains_ext(w, 0.0) {
            return Err(Error::PoleInSupport(format!("{w} lies in E")));
        }
        Ok(())
    }

    fn frame(&self, w: f64) -> Result<Arc<PoleFrame>> {
        let key = w.to_bits();
        if let Some(f) = self.frames.read().expect("frame cache poisoned").get(&key) {
            return Ok(f.clone());
        }
        let f0 = MoebiusMap::resolvent_frame(w);
        let image = self.set.map(&f0)?;
        let (lo, hi) = image.hull();
        let s = 4.0 / (hi - lo);
        let affine = MoebiusMap::new(s, -s * 0.5 * (lo + hi), 0.0, 1.0)?;
        let map = affine.compose(&f0);
        let model = equilibrium(&map_set(&self.set, &map)?, self.nodes)?;
        let [a, b, c, _] = map.coefficients();
        let sigma = -(a * w + b) / c;
        let frame = Arc::new(PoleFrame { map, log_sigma: sigma.abs().ln(), model });
        let mut cache = self.frames.write().expect("frame cache poisoned");
        Ok(cache.entry(key).or_insert(frame).clone())
    }

    /// G_E(z, w) for complex z; +∞ at z = w.
    pub fn green(&self, z: Complex64, w: ExtendedReal) -> Result<f64> {
        self.check_pole(w)?;
        match w {
            ExtendedReal::Infinity => Ok(self.base.green_infinity(z)),
            ExtendedReal::Finite(w) => {
                let f = self.frame(w)?;
                match f.map.apply_complex(z) {
                    Some(v) if v.is_finite() => Ok(f.model.green_infinity(v)),
                    _ => Ok(f64::INFINITY),
                }
            }
        }
    }

    /// G_E(z, w) for z on ℝ̄.
    pub fn green_ext(&self, z: ExtendedReal, w: ExtendedReal) -> Result<f64> {
        match z {
            ExtendedReal::Finite(x) => self.green(Complex64::new(x, 0.0), w),
            ExtendedReal::Infinity => match w {
                ExtendedReal::Infinity => Ok(f64::INFINITY),
                ExtendedReal::Finite(_) => self.green_ext(w, ExtendedReal::Infinity),
            },
        }
    }

    /// γ_E^k for the pole w: the Robin constant at w.
    pub fn gamma(&self, w: ExtendedReal) -> Result<f64> {
        self.check_pole(w)?;
        match w {
            ExtendedReal::Infinity => Ok(self.base.robin),
            ExtendedReal::Finite(w) => {
                let f = self.frame(w)?;
                Ok(f.model.robin + f.log_sigma)
            }
        }
    }

    /// (γ_E^k, λ_k) for slot k (1-based) of C.
    pub fn gamma_lambda(&self, poles: &PoleSequence, k: usize) -> Result<(f64, f64)> {
        let lg = self.log_lambda(poles, k)?;
        Ok((self.gamma(poles.get(k))?, lg.exp()))
    }

    /// log λ_k = γ_E^k + Σ_{ℓ≠k} G(c_k, c_ℓ).
    pub fn log_lambda(&self, poles: &PoleSequence, k: usize) -> Result<f64> {
        for &c in poles.points() {
            self.check_pole(c)?;
        }
        let ck = poles.get(k);
        let mut acc = self.gamma(ck)?;
        for (l, &cl) in poles.points().iter().enumerate() {
            if l + 1 != k {
                acc += self.green_ext(ck, cl)?;
            }
        }
        Ok(acc)
    }

    pub fn log_lambdas(&self, poles: &PoleSequence) -> Result<Vec<f64>> {
        (1..=poles.period()).map(|k| self.log_lambda(poles, k)).collect()
    }

    /// 𝒢_E(z, C) = (1/(g+1)) Σ_k G(z, c_k).
    pub fn cal_g(&self, poles: &PoleSequence, z: Complex64) -> Result<f64> {
        let mut acc = 0.0;
        for &c in poles.points() {
            acc += self.green(z, c)?;
        }
        Ok(acc / poles.period() as f64)
    }

    /// ω_E(·, w).
    pub fn harmonic_measure(&self, w: ExtendedReal) -> Result<Measure> {
        self.check_pole(w)?;
        match w {
            ExtendedReal::Infinity => Ok(self.base.measure.clone()),
            ExtendedReal::Finite(w) => {
                let f = self.frame(w)?;
                Ok(f.model.measure.pushforward(&f.map.invert()).with_essential_support(&self.set))
            }
        }
    }

    /// ρ_{E,C} = (1/(g+1)) Σ_j ω_E(·, c_j).
    pub fn rho(&self, poles: &PoleSequence) -> Result<Measure> {
        let parts = poles.points().iter().map(|&c| self.harmonic_measure(c)).collect::<Result<Vec<_>>>()?;
        let w = 1.0 / parts.len() as f64;
        let refs: Vec<(f64, &Measure)> = parts.iter().map(|m| (w, m)).collect();
        Ok(Measure::mixture(&refs)?.with_essential_support(&self.set))
    }
}

/// Image of E under a frame, snapping the hull onto [−2, 2] exactly.
fn map_set(set: &FiniteGapSet, f: &MoebiusMap) -> Result<FiniteGapSet> {
    let img = set.map(f)?;
    let mut bands = img.bands();
    bands[0].0 = -2.0;
    let last = bands.len() - 1;
    bands[last].1 = 2.0;
    FiniteGapSet::new(&bands)
}
