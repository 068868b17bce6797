//! GMP matrices: multiplication by x in the basis τ_n, their resolvents and
//! the outer-diagonal coefficients β_j, Λ_n.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::PoleSequence;
use crate::moebius::{ExtendedReal, MoebiusMap};
use crate::mp::{self, Neumaier};
use crate::orf::{orthonormalize, OrthoSystem, PrecisionPolicy};

pub const BANDWIDTH_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-8;
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
pub const LAMBDA_TOL: f64 = 1e-8;

/// Generating vectors of block j ≥ 1 and how well the block fits the
/// structure A_j = p δ₀ᵀ, B_j = C̃ + (q pᵀ)⁺ + (p qᵀ)⁻.
#[derive(Clone, Debug, Serialize)]
pub struct GmpBlock {
    pub j: usize,
    pub start: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// σ₂/σ₁ of A_j.
    pub rank_ratio: f64,
    /// max |B_j − reconstruction| / max(‖B_j‖, ‖A_j‖).
    pub reconstruction_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GmpMatrix {
    poles: PoleSequence,
    k: usize,
    n_max: usize,
    #[serde(skip)]
    entries: DMatrix<f64>,
    complete_rows: usize,
    norm: f64,
    bandwidth_residual: f64,
    blocks: Vec<GmpBlock>,
    /// Diagonal sign conjugation applied (resolvents only; +1 otherwise).
    signs: Vec<i8>,
    bits: u32,
}

fn dot3(a: &[f64], b: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let mut s = Neumaier::new();
    for i in 0..a.len() {
        s.add(w[i] * a[i] * x[i] * b[i]);
    }
    s.value()
}

fn real_points(sys: &OrthoSystem) -> Result<Vec<f64>> {
    sys.rule()
        .points
        .iter()
        .map(|p| {
            p.as_finite()
                .ok_or_else(|| Error::InvalidInput("GMP matrices need supp μ ⊂ ℝ (atom or node at ∞)".into()))
        })
        .collect()
}

/// C̃ for the block layout with c_k = ∞ at position 0.
fn c_tilde(poles: &PoleSequence, k: usize) -> Vec<f64> {
    let period = poles.period();
    (0..period)
        .map(|a| match poles.get((k - 1 + a) % period + 1) {
            ExtendedReal::Finite(c) => c,
            ExtendedReal::Infinity => 0.0,
        })
        .collect()
}

impl GmpMatrix {
    fn from_entries(poles: PoleSequence, full: DMatrix<f64>, norm: f64, bits: u32, signs: Vec<i8>) -> Result<Self> {
        let k = poles
            .infinity_slot()
            .ok_or_else(|| Error::InvalidInput("GMP structure needs ∞ among the poles".into()))?;
        let g = poles.genus();
        let n_max = full.nrows() - 1;
        let band = g + 1;
        let mut entries = DMatrix::zeros(n_max + 1, n_max + 1);
        let mut outside: f64 = 0.0;
        for m in 0..=n_max {
            for n in 0..=n_max {
                if m.abs_diff(n) > band {
                    outside = outside.max(full[(m, n)].abs());
                } else {
                    entries[(m, n)] = full[(m, n)];
                }
            }
        }
        let complete_rows = (n_max + 1).saturating_sub(band);
        let mut a = GmpMatrix {
            poles,
            k,
            n_max,
            entries,
            complete_rows,
            norm,
            bandwidth_residual: outside / norm,
            blocks: Vec::new(),
            signs,
            bits,
        };
        a.blocks = a.extract_blocks();
        Ok(a)
    }

    fn extract_blocks(&self) -> Vec<GmpBlock> {
        let period = self.period();
        let ct = c_tilde(&self.poles, self.k);
        let mut out = Vec::new();
        let mut j = 1;
        loop {
            let start = self.k + (j - 1) * period;
            if start + period > self.complete_rows {
                break;
            }
            let next = start + period;
            let p: Vec<f64> = (0..period).map(|a| self.entries[(start + a, next)]).collect();
            let q: Vec<f64> = (0..period).map(|a| (self.entries[(start + a, start)] - ct[a] * f64::from(a == 0)) / p[0]).collect();
            let aj = DMatrix::from_fn(period, period, |a, b| self.entries[(start + a, next + b)]);
            let sv = aj.singular_values();
            let rank_ratio = if period > 1 && sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };
            let bj = DMatrix::from_fn(period, period, |a, b| self.entries[(start + a, start + b)]);
            let mut resid: f64 = 0.0;
            for a in 0..period {
                for b in 0..period {
                    let model = if a == b { ct[a] } else { 0.0 } + if a >= b { q[a] * p[b] } else { p[a] * q[b] };
                    resid = resid.max((bj[(a, b)] - model).abs());
                }
            }
            // B_j vanishes identically for some symmetric configurations
            let bnorm = bj.norm().max(aj.norm()).max(f64::MIN_POSITIVE);
            out.push(GmpBlock { j, start, p, q, rank_ratio, reconstruction_residual: resid / bnorm });
            j += 1;
        }
        out
    }

    fn period(&self) -> usize {
        self.poles.period()
    }

    /// Checks bandwidth, rank-one A_j, (p_j)_0 > 0 and the B_j reconstruction.
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_residual <= BANDWIDTH_TOL) {
            return Err(Error::Invariant(format!("bandwidth residual {:.3e}", self.bandwidth_residual)));
        }
        for b in &self.blocks {
            if !(b.p[0] > 1e-12 * self.norm) {
                return Err(Error::Invariant(format!("block {}: (p_j)_0 = {:.3e} is not positive", b.j, b.p[0])));
            }
            if !(b.rank_ratio <= RANK_TOL) {
                return Err(Error::Invariant(format!("block {}: σ₂/σ₁ = {:.3e}", b.j, b.rank_ratio)));
            }
            if !(b.reconstruction_residual <= RECONSTRUCTION_TOL) {
                return Err(Error::Invariant(format!(
                    "block {}: B_j reconstruction residual {:.3e}",
                    b.j, b.reconstruction_residual
                )));
            }
        }
        Ok(())
    }

    pub fn poles(&self) -> &PoleSequence {
        &self.poles
    }

    pub fn genus(&self) -> usize {
        self.poles.genus()
    }

    /// Slot (1-based) of the pole at ∞.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Rows 0..complete_rows have their whole band inside the computed range.
    pub fn complete_rows(&self) -> usize {
        self.complete_rows
    }

    /// sup |x| over the support, i.e. the operator norm.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn bandwidth_residual(&self) -> f64 {
        self.bandwidth_residual
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn entry(&self, m: usize, n: usize) -> f64 {
        self.entries[(m, n)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Leading square block of size `rows`.
    pub fn truncation(&self, rows: usize) -> DMatrix<f64> {
        self.entries.view((0, 0), (rows, rows)).into_owned()
    }

    pub fn blocks(&self) -> &[GmpBlock] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn extract_pq(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = j
            .checked_sub(1)
            .and_then(|i| self.blocks.get(i))
            .ok_or_else(|| Error::InvalidInput(format!("block {j} is not stored (1..={})", self.blocks.len())))?;
        if !(b.p[0] > 1e-12 * self.norm) {
            return Err(Error::Invariant(format!("block {j} is degenerate: (p_j)_0 = {:.3e}", b.p[0])));
        }
        Ok((b.p.clone(), b.q.clone()))
    }

    /// ⟨e_n, A e_{n+g+1}⟩.
    pub fn outer(&self, n: usize) -> Option<f64> {
        let m = n + self.period();
        (m <= self.n_max).then(|| self.entries[(n, m)])
    }

    /// β_j = (p_j)_0; β_0 exists only when ∞ is the last pole.
    pub fn beta(&self, j: usize) -> Option<f64> {
        let row = (self.k + j * self.period()).checked_sub(self.period())?;
        self.outer(row)
    }

    /// Largest j with β_j available.
    pub fn beta_count(&self) -> usize {
        let mut j = 0;
        while self.beta(j + 1).is_some() {
            j += 1;
        }
        j
    }

    /// CSV of (row, col, value) for the stored band.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,value\n");
        let band = self.period();
        for m in 0..=self.n_max {
            for n in m.saturating_sub(band)..=(m + band).min(self.n_max) {
                s.push_str(&format!("{m},{n},{:.16e}\n", self.entries[(m, n)]));
            }
        }
        s
    }

    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({ "g": self.genus(), "k": self.k, "block_count": self.blocks.len() })
    }
}

fn entries_of(sys: &OrthoSystem) -> Result<(DMatrix<f64>, f64)> {
    let x = real_points(sys)?;
    let w = &sys.rule().weights;
    let n_max = sys.n_max();
    let mut full = DMatrix::zeros(n_max + 1, n_max + 1);
    for m in 0..=n_max {
        for n in m..=n_max {
            let v = dot3(sys.values(m), sys.values(n), &x, w);
            full[(m, n)] = v;
            full[(n, m)] = v;
        }
    }
    let norm = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((full, norm))
}

fn build_once(sys: &OrthoSystem) -> Result<GmpMatrix> {
    let (full, norm) = entries_of(sys)?;
    let a = GmpMatrix::from_entries(sys.poles().clone(), full, norm, sys.bits(), vec![1; sys.n_max() + 1])?;
    a.validate()?;
    Ok(a)
}

fn escalate<T>(sys: &OrthoSystem, f: impl Fn(&OrthoSystem) -> Result<T>) -> Result<T> {
    let mut last = match f(sys) {
        Ok(v) => return Ok(v),
        Err(e @ Error::Invariant(_)) => e,
        Err(e) => return Err(e),
    };
    for bits in mp::LADDER.iter().copied().chain([2048]).filter(|&b| b > sys.bits()) {
        let rebuilt = orthonormalize(sys.measure(), sys.poles(), sys.n_max(), PrecisionPolicy::fixed(bits))?;
        match f(&rebuilt) {
            Ok(v) => return Ok(v),
            Err(e @ Error::Invariant(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PrecisionExhausted(format!("GMP structure: {last}")))
}

/// The GMP matrix of the system; requires some c_k = ∞ and supp μ ⊂ ℝ.
pub fn build(sys: &OrthoSystem) -> Result<GmpMatrix> {
    if sys.poles().infinity_slot().is_none() {
        return Err(Error::InvalidInput("GMP structure needs ∞ among the poles".into()));
    }
    real_points(sys)?;
    escalate(sys, build_once)
}

/// (c_ℓ − A)⁻¹ in the basis τ_n, built from the system of f_*μ with
/// f(z) = 1/(c_ℓ − z).
pub fn resolvent_gmp(sys: &OrthoSystem, slot: usize, policy: PrecisionPolicy) -> Result<GmpMatrix> {
    let c = match sys.poles().points().get(slot.wrapping_sub(1)) {
        Some(ExtendedReal::Finite(c)) => *c,
        Some(ExtendedReal::Infinity) => {
            return Err(Error::InvalidInput(format!("pole {slot} is ∞; its resolvent is A itself")))
        }
        None => return Err(Error::InvalidInput(format!("no pole with index {slot}"))),
    };
    let f = MoebiusMap::resolvent_frame(c);
    let nu = sys.measure().pushforward(&f);
    let fc = sys.poles().map(&f);
    // f(C) must stay off supp f_*μ
    fc.validate_for(&nu)?;
    let other = orthonormalize(&nu, &fc, sys.n_max(), policy)?;
    let w = &sys.rule().weights;
    if other.rule().len() != w.len() {
        return Err(Error::Invariant("pushforward rule does not match the original".into()));
    }
    // τ_n(x) = s_n τ̃_n(f(x)); s_n read off from ⟨τ_n, τ̃_n∘f⟩ = ±1
    let mut signs = Vec::with_capacity(sys.n_max() + 1);
    for n in 0..=sys.n_max() {
        let mut s = Neumaier::new();
        for ((a, b), w) in sys.values(n).iter().zip(other.values(n)).zip(w) {
            s.add(w * a * b);
        }
        let corr = s.value();
        if (corr.abs() - 1.0).abs() > 1e-6 {
            return Err(Error::Invariant(format!(
                "covariance check failed for n = {n}: ⟨τ_n, τ̃_n∘f⟩ = {corr:.3e}"
            )));
        }
        signs.push(if corr > 0.0 { 1i8 } else { -1 });
    }
    let (mut full, norm) = entries_of(&other)?;
    for m in 0..=sys.n_max() {
        for n in 0..=sys.n_max() {
            full[(m, n)] *= f64::from(signs[m] * signs[n]);
        }
    }
    let mut r = GmpMatrix::from_entries(fc, full, norm, other.bits(), signs)?;
    // restore (p_j)_0 > 0 if the conjugation left a negative outer entry
    let mut flip = vec![1i8; sys.n_max() + 1];
    for b in r.blocks.clone() {
        if b.p[0] < 0.0 {
            let next = b.start + r.period();
            for f in flip.iter_mut().skip(next) {
                *f = -*f;
            }
            for m in 0..=r.n_max {
                for n in 0..=r.n_max {
                    if (m >= next) != (n >= next) {
                        r.entries[(m, n)] = -r.entries[(m, n)];
                    }
                }
            }
            r.blocks = r.extract_blocks();
        }
    }
    for (s, f) in r.signs.iter_mut().zip(flip) {
        *s *= f;
    }
    r.validate()?;
    Ok(r)
}

/// A together with the resolvents at its finite poles.
#[derive(Clone, Debug, Serialize)]
pub struct GmpFamily {
    pub matrix: GmpMatrix,
    /// Indexed by slot − 1; `None` at the slot of ∞.
    pub resolvents: Vec<Option<GmpMatrix>>,
}

impl GmpFamily {
    pub fn build(sys: &OrthoSystem, policy: PrecisionPolicy) -> Result<Self> {
        let matrix = build(sys)?;
        let resolvents = (1..=sys.poles().period())
            .map(|slot| match sys.poles().get(slot) {
                ExtendedReal::Infinity => Ok(None),
                ExtendedReal::Finite(_) => resolvent_gmp(sys, slot, policy).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GmpFamily { matrix, resolvents })
    }

    pub fn genus(&self) -> usize {
        self.matrix.genus()
    }

    /// The matrix r_k(A) for slot k: A or (c_k − A)⁻¹.
    pub fn slot_matrix(&self, slot: usize) -> &GmpMatrix {
        self.resolvents[slot - 1].as_ref().unwrap_or(&self.matrix)
    }

    /// Λ_n = ⟨e_n, r_k(A) e_{n+g+1}⟩ where k is the slot of n.
    pub fn lambda(&self, n: usize) -> Option<f64> {
        let slot = self.matrix.poles().slot_of(n);
        self.slot_matrix(slot).outer(n)
    }

    pub fn lambda_count(&self) -> usize {
        (self.matrix.n_max() + 1).saturating_sub(self.genus() + 1)
    }

    /// max_n |Λ_n κ_{n+g+1} / κ_n − 1|.
    pub fn lambda_identity_residual(&self, sys: &OrthoSystem) -> f64 {
        let g = self.genus();
        (0..self.lambda_count())
            .map(|n| {
                let l = self.lambda(n).unwrap_or(f64::NAN);
                let r = (sys.log_kappa(n + g + 1) - sys.log_kappa(n)).exp();
                (l * r - 1.0).abs()
            })
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
    }

    pub fn check_lambda_identity(&self, sys: &OrthoSystem) -> Result<()> {
        let r = self.lambda_identity_residual(sys);
        if r <= LAMBDA_TOL {
            Ok(())
        } else {
            Err(Error::Invariant(format!("Λ_n κ_(n+g+1) = κ_n fails by {r:.3e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{FiniteGapSet, Measure};
    use ExtendedReal::*;

    fn system(mu: &Measure, c: Vec<ExtendedReal>, n: usize) -> OrthoSystem {
        orthonormalize(mu, &PoleSequence::new(c).unwrap(), n, PrecisionPolicy::default()).unwrap()
    }

    #[test]
    fn chebyshev_jacobi_matrix() {
        let s = system(&Measure::arcsine(-2.0, 2.0).unwrap(), vec![Infinity], 20);
        let a = build(&s).unwrap();
        assert!((a.entry(0, 1) - 2f64.sqrt()).abs() < 1e-12);
        for n in 1..20 {
            assert!((a.entry(n, n + 1) - 1.0).abs() < 1e-12);
            assert!(a.entry(n, n).abs() < 1e-12);
        }
        let (p, q) = a.extract_pq(1).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && q[0].abs() < 1e-12);
        assert!((a.beta(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((a.beta(0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_band_structure() {
        let e = FiniteGapSet::new(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let mu = Measure::chebyshev(&e, &[0.0]).unwrap();
        let s = system(&mu, vec![Finite(0.0), Infinity], 30);
        let a = build(&s).unwrap();
        assert_eq!(a.k(), 2);
        assert!(a.bandwidth_residual() < 1e-12);
        assert!(a.blocks().len() > 10);
        assert!(a.beta(0).is_some());
        let fam = GmpFamily::build(&s, PrecisionPolicy::default()).unwrap();
        assert!(fam.lambda_identity_residual(&s) < 1e-10);
    }

    #[test]
    fn resolvent_matches_quadrature() {
        let mu = Measure::arcsine(-1.0, 1.0).unwrap();
        let s = system(&mu, vec![Finite(2.0), Infinity, Finite(-3.0)], 15);
        let x: Vec<f64> = s.rule().points.iter().map(|p| p.as_finite().unwrap()).collect();
        let w = &s.rule().weights;
        for slot in [1, 3] {
            let c = s.poles().get(slot).as_finite().unwrap();
            let r = resolvent_gmp(&s, slot, PrecisionPolicy::default()).unwrap();
            let inv: Vec<f64> = x.iter().map(|x| 1.0 / (c - x)).collect();
            for m in 0..=15 {
                for n in m..=(m + 3).min(15) {
                    let direct = dot3(s.values(m), s.values(n), &inv, w);
                    assert!((direct - r.entry(m, n)).abs() < 1e-10, "slot {slot} ({m},{n})");
                }
            }
        }
    }

    #[test]
    fn stieltjes_entry() {
        let s = system(&Measure::arcsine(-2.0, 2.0).unwrap(), vec![Infinity, Finite(3.0)], 10);
        let r = resolvent_gmp(&s, 2, PrecisionPolicy::default()).unwrap();
        assert!((r.entry(0, 0) - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn needs_infinity() {
        let s = system(&Measure::arcsine(-1.0, 1.0).unwrap(), vec![Finite(2.0)], 4);
        assert!(matches!(build(&s), Err(Error::InvalidInput(_))));
    }
}
