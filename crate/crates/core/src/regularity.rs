//! Regularity diagnostics: κ growth, β products, Green-function growth of τ_n,
//! zero distribution, and the Cesàro–Nevai statistics for Jacobi matrices.
//!
//! Nothing here certifies a limit. Every section reports the sequence, the
//! target, the distance at the largest index and a 1/n-extrapolated value.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::discriminant::BlockJacobi;
use crate::error::{Error, Result};
use crate::measure::{FiniteGapSet, Measure, PoleSequence};
use crate::moebius::ExtendedReal;
use crate::orf::OrthoSystem;
use crate::potential::Green;

/// Tolerance for verdicts on limits.
pub const VERDICT_TOL: f64 = 0.02;
/// Allowed undershoot of the κ and growth lower bounds on the tail.
pub const LOWER_BOUND_MARGIN: f64 = 0.05;
/// Allowed overshoot of the β product upper bound on the tail.
pub const PRODUCT_BOUND_MARGIN: f64 = 0.02;
pub const NEVAI_HORIZON: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithRegular,
    Inconsistent,
    Inconclusive,
}

impl Verdict {
    fn combine(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut any = false;
        let mut all_ok = true;
        for v in vs {
            any = true;
            match v {
                Verdict::Inconsistent => return Verdict::Inconsistent,
                Verdict::Inconclusive => all_ok = false,
                Verdict::ConsistentWithRegular => {}
            }
        }
        if any && all_ok {
            Verdict::ConsistentWithRegular
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Least-squares fit x ≈ L + c/n over the last quarter (at least 4 points).
pub fn extrapolate(ns: &[f64], xs: &[f64]) -> Option<f64> {
    let len = xs.len();
    if len < 3 {
        return xs.last().copied();
    }
    let take = (len / 4).max(4).min(len);
    let (ns, xs) = (&ns[len - take..], &xs[len - take..]);
    let m = take as f64;
    let us: Vec<f64> = ns.iter().map(|n| 1.0 / n).collect();
    let su: f64 = us.iter().sum();
    let sx: f64 = xs.iter().sum();
    let suu: f64 = us.iter().map(|u| u * u).sum();
    let sux: f64 = us.iter().zip(xs).map(|(u, x)| u * x).sum();
    let det = m * suu - su * su;
    if det.abs() < 1e-300 {
        return xs.last().copied();
    }
    Some((suu * sx - su * sux) / det)
}

fn tail_start(len: usize) -> usize {
    len - (len / 4).max(1).min(len)
}

/// Sequence with a target limit, judged by its last value and extrapolation.
#[derive(Clone, Debug, Serialize)]
pub struct TrendSeries {
    pub index: Vec<usize>,
    pub values: Vec<f64>,
    pub target: f64,
    pub last_deviation: f64,
    pub extrapolated: Option<f64>,
    pub verdict: Verdict,
}

impl TrendSeries {
    /// `above_is_bad`: a limit above the target contradicts regularity.
    fn new(index: Vec<usize>, values: Vec<f64>, target: f64, tol: f64, above_is_bad: bool) -> Self {
        let ns: Vec<f64> = index.iter().map(|&n| n as f64).collect();
        let extrapolated = extrapolate(&ns, &values);
        let last = values.last().copied().unwrap_or(f64::NAN);
        let last_deviation = last - target;
        let verdict = match extrapolated {
            Some(e) if last_deviation.abs() <= tol && (e - target).abs() <= tol => Verdict::ConsistentWithRegular,
            Some(e) => {
                let off = |x: f64| if above_is_bad { x - target > tol } else { target - x > tol };
                if off(last) && off(e) {
                    Verdict::Inconsistent
                } else {
                    Verdict::Inconclusive
                }
            }
            None => Verdict::Inconclusive,
        };
        TrendSeries { index, values, target, last_deviation, extrapolated, verdict }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaClass {
    pub k: usize,
    /// κ_{n(j)}^{1/n(j)} against λ_k^{1/(g+1)}.
    pub root: TrendSeries,
    /// (1/n(j)) log κ_{n(j)}, extrapolated.
    pub alpha: Option<f64>,
    /// min over the tail of κ^{1/n} − target.
    pub lower_bound_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaSection {
    pub classes: Vec<KappaClass>,
    /// Largest n for which κ_n is meaningful (finitely supported measures).
    pub valid_n_max: usize,
    pub note: Option<String>,
    pub verdict: Verdict,
}

/// κ_{n(j)}^{1/n(j)} per residue class; `lambdas[k-1]` is λ_k for slot k.
pub fn kappa_diagnostic(sys: &OrthoSystem, lambdas: &[f64]) -> Result<KappaSection> {
    let period = sys.poles().period();
    if lambdas.len() != period {
        return Err(Error::InvalidInput(format!("need {period} λ values, got {}", lambdas.len())));
    }
    let mut valid_n_max = sys.n_max();
    let mut note = None;
    if sys.measure().is_purely_atomic() {
        valid_n_max = valid_n_max.min(sys.measure().support_size().saturating_sub(1));
        note = Some(format!(
            "finitely supported measure with {} points: κ_n is defined only for n ≤ {valid_n_max} and carries no asymptotic information",
            sys.measure().support_size()
        ));
    }
    let mut classes = Vec::with_capacity(period);
    for k in 1..=period {
        let index: Vec<usize> = (0..).map(|j| j * period + k).take_while(|&n| n <= valid_n_max).collect();
        let logs: Vec<f64> = index.iter().map(|&n| sys.log_kappa(n) / n as f64).collect();
        let values: Vec<f64> = logs.iter().map(|x| x.exp()).collect();
        let target = lambdas[k - 1].powf(1.0 / period as f64);
        let ns: Vec<f64> = index.iter().map(|&n| n as f64).collect();
        let alpha = extrapolate(&ns, &logs);
        let lower_bound_slack =
            values[tail_start(values.len().max(1)).min(values.len())..].iter().map(|v| v - target).fold(f64::INFINITY, f64::min);
        if lower_bound_slack < -LOWER_BOUND_MARGIN && note.is_none() {
            return Err(Error::Invariant(format!(
                "κ_n^(1/n) for residue class {k} falls {:.3e} below λ_k^(1/(g+1)); the run is not accurate enough (raise precision or N)",
                -lower_bound_slack
            )));
        }
        let root = TrendSeries::new(index, values, target, VERDICT_TOL, true);
        classes.push(KappaClass { k, root, alpha, lower_bound_slack });
    }
    let verdict = if note.is_some() {
        Verdict::Inconclusive
    } else {
        Verdict::combine(classes.iter().map(|c| c.root.verdict))
    };
    Ok(KappaSection { classes, valid_n_max, note, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductSection {
    /// (∏_{ℓ≤j} x_ℓ)^{1/j} against λ^{−1}.
    pub root: TrendSeries,
    /// target − max over the tail; negative means the upper bound is exceeded.
    pub upper_bound_slack: f64,
}

/// (∏_{ℓ≤j} β_ℓ)^{1/j}, j = 1..len, against `target` = λ_k^{−1}.
pub fn beta_diagnostic(betas: &[f64], target: f64) -> Result<ProductSection> {
    if betas.is_empty() {
        return Err(Error::InvalidInput("no β values".into()));
    }
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(betas.len());
    for (j, &b) in betas.iter().enumerate() {
        if !(b > 0.0) {
            return Err(Error::InvalidInput(format!("β_{} = {b} is not positive", j + 1)));
        }
        acc += b.ln();
        values.push((acc / (j + 1) as f64).exp());
    }
    let upper_bound_slack = values[tail_start(values.len())..].iter().map(|v| target - v).fold(f64::INFINITY, f64::min);
    if upper_bound_slack < -PRODUCT_BOUND_MARGIN {
        return Err(Error::Invariant(format!(
            "(∏β)^(1/j) exceeds λ_k^(-1) by {:.3e}; the run is not accurate enough",
            -upper_bound_slack
        )));
    }
    let index = (1..=betas.len()).collect();
    Ok(ProductSection { root: TrendSeries::new(index, values, target, VERDICT_TOL, false), upper_bound_slack })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthPoint {
    pub z: [f64; 2],
    pub green: f64,
    /// (1/n) log|τ_n(z)| − 𝒢_E(z, C) at the largest n.
    pub h: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthSection {
    pub points: Vec<GrowthPoint>,
    pub n_tail: (usize, usize),
    pub min_slack: f64,
    pub max_deviation: f64,
    /// Largest spread of the exponent across residue classes at their last n.
    pub class_spread: f64,
    pub verdict: Verdict,
}

/// 20 off-real points above the hull of E.
pub fn default_grid(set: &FiniteGapSet) -> Vec<Complex64> {
    let (lo, hi) = set.hull();
    let w = hi - lo;
    let mut v = Vec::with_capacity(20);
    for y in [0.1, 0.25, 0.5, 1.0] {
        for i in 0..5 {
            v.push(Complex64::new(lo + w * i as f64 / 4.0, y * w));
        }
    }
    v
}

/// (1/n) log|τ_n(z)| against 𝒢_E(z, C) on the tail n ∈ [3N/4, N].
pub fn green_growth_check(sys: &OrthoSystem, green: &Green, grid: &[Complex64]) -> Result<GrowthSection> {
    let n_max = sys.n_max();
    if n_max == 0 {
        return Err(Error::InvalidInput("growth check needs N ≥ 1".into()));
    }
    let period = sys.poles().period();
    let first = (n_max - n_max / 4).max(1);
    let mut points = Vec::with_capacity(grid.len());
    let mut class_spread: f64 = 0.0;
    for &z in grid {
        if z.im == 0.0 {
            return Err(Error::InvalidInput(format!("grid point {z} is real")));
        }
        let g = green.cal_g(sys.poles(), z)?;
        let mut slack = f64::INFINITY;
        let mut last = f64::NAN;
        for n in first..=n_max {
            let e = sys.growth_exponent(n, z)?;
            slack = slack.min(e - g);
            last = e;
        }
        let lo = n_max.saturating_sub(period - 1).max(1);
        let per_class: Vec<f64> = (lo..=n_max).map(|n| sys.growth_exponent(n, z)).collect::<Result<_>>()?;
        let spread = per_class.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - per_class.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        class_spread = class_spread.max(spread);
        points.push(GrowthPoint { z: [z.re, z.im], green: g, h: last - g, slack });
    }
    let min_slack = points.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
    if min_slack < -LOWER_BOUND_MARGIN {
        return Err(Error::Invariant(format!(
            "(1/n)log|τ_n| falls {:.3e} below 𝒢_E(z, C); the run is not accurate enough",
            -min_slack
        )));
    }
    let max_deviation = points.iter().map(|p| p.h.abs()).fold(0.0, f64::max);
    let verdict = if max_deviation <= VERDICT_TOL {
        Verdict::ConsistentWithRegular
    } else if points.iter().all(|p| p.h > VERDICT_TOL) {
        Verdict::Inconsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(GrowthSection { points, n_tail: (first, n_max), min_slack, max_deviation, class_spread, verdict })
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroDistRow {
    pub n: usize,
    pub degree: usize,
    pub mass: f64,
    pub sup_cdf_distance: f64,
    pub mass_defect_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroDistSection {
    pub rows: Vec<ZeroDistRow>,
    /// Each distance at most 1.2× the previous one.
    pub decreasing_with_jitter: bool,
}

/// sup_x |ν_n((−∞,x]) − ρ((−∞,x])| for finite zeros.
pub fn sup_cdf_distance(zeros: &[ExtendedReal], n: usize, rho: &Measure) -> f64 {
    let w = 1.0 / n as f64;
    let finite: Vec<f64> = zeros.iter().filter_map(|z| z.as_finite()).collect();
    let mut d: f64 = 0.0;
    let mut below = 0.0;
    for &x in &finite {
        let f = rho.cdf(x);
        d = d.max((f - below).abs());
        below += w;
        d = d.max((f - below).abs());
    }
    d.max((rho.total_mass() - below).abs())
}

pub fn zero_dist_diagnostic(sys: &OrthoSystem, rho: &Measure, ns: &[usize]) -> Result<ZeroDistSection> {
    let g = sys.genus();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            continue;
        }
        let zs = sys.zeros(n)?;
        rows.push(ZeroDistRow {
            n,
            degree: zs.degree,
            mass: zs.degree as f64 / n as f64,
            sup_cdf_distance: sup_cdf_distance(&zs.zeros, n, rho),
            mass_defect_ok: zs.degree + g >= n && zs.degree <= n,
        });
    }
    let decreasing_with_jitter = rows.windows(2).all(|w| w[1].sup_cdf_distance <= 1.2 * w[0].sup_cdf_distance);
    Ok(ZeroDistSection { rows, decreasing_with_jitter })
}

/// Half-line Jacobi matrix with diagonal b_1, b_2, … and off-diagonal a_1, a_2, ….
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct JacobiMatrix {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl JacobiMatrix {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidInput(format!("a and b must have the same nonzero length ({} vs {})", a.len(), b.len())));
        }
        if let Some(i) = a.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidInput(format!("a_{} = {} is not positive", i + 1, a[i])));
        }
        if let Some(i) = b.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("b_{} is not finite", i + 1)));
        }
        Ok(JacobiMatrix { a, b })
    }

    pub fn from_fn(len: usize, a: impl Fn(usize) -> f64, b: impl Fn(usize) -> f64) -> Result<Self> {
        JacobiMatrix::new((1..=len).map(&a).collect(), (1..=len).map(&b).collect())
    }

    pub fn free(len: usize) -> Self {
        JacobiMatrix { a: vec![1.0; len], b: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// a_k, b_k with 1-based k.
    pub fn a(&self, k: usize) -> f64 {
        self.a[k - 1]
    }

    pub fn b(&self, k: usize) -> f64 {
        self.b[k - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.a.iter().chain(&self.b).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Leading m×m truncation.
    pub fn truncation(&self, m: usize) -> DMatrix<f64> {
        let m = m.min(self.len());
        DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                self.b[i]
            } else if i + 1 == j {
                self.a[i]
            } else if j + 1 == i {
                self.a[j]
            } else {
                0.0
            }
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusSampleSet {
    /// One period of each sample.
    pub samples: Vec<JacobiMatrix>,
    pub hull: (f64, f64),
    pub method: String,
}

impl TorusSampleSet {
    pub fn new(samples: Vec<JacobiMatrix>, hull: (f64, f64), method: &str) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("torus sample set is empty".into()));
        }
        let t = TorusSampleSet { samples, hull, method: method.into() };
        let margin = 1e-9 * (hull.1 - hull.0).max(1.0);
        for s in &t.samples {
            let ev = t.extended(s, 40).truncation(40).symmetric_eigenvalues();
            if ev.min() < hull.0 - margin || ev.max() > hull.1 + margin {
                return Err(Error::InvalidInput(format!(
                    "torus sample spectrum [{}, {}] leaves the hull [{}, {}]",
                    ev.min(),
                    ev.max(),
                    hull.0,
                    hull.1
                )));
            }
        }
        Ok(t)
    }

    /// Singleton free-type torus for E = [α, β].
    pub fn free_type(alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > alpha) {
            return Err(Error::InvalidInput(format!("empty interval [{alpha}, {beta}]")));
        }
        let s = JacobiMatrix::new(vec![(beta - alpha) / 4.0], vec![(alpha + beta) / 2.0])?;
        TorusSampleSet::new(vec![s], (alpha, beta), "free-type")
    }

    /// Period-2 family for E = [m−β, m−α] ∪ [m+α, m+β], sampled at `count` angles.
    pub fn two_band_symmetric(set: &FiniteGapSet, count: usize) -> Result<Self> {
        let bands = set.bands();
        if bands.len() != 2 {
            return Err(Error::InvalidInput("period-2 torus needs two bands".into()));
        }
        let (l0, h0) = bands[0];
        let (l1, h1) = bands[1];
        let mid = 0.5 * (h0 + l1);
        let alpha = 0.5 * (l1 - h0);
        let beta = 0.5 * (h1 - l0);
        let tol = 1e-12 * beta.max(1.0);
        if ((h1 - mid) - beta).abs() > tol || ((mid - l0) - beta).abs() > tol {
            return Err(Error::InvalidInput("two-band set is not symmetric".into()));
        }
        let prod = (beta * beta - alpha * alpha) / 4.0;
        let mut samples = Vec::with_capacity(count.max(1));
        for i in 0..count.max(1) {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / count.max(1) as f64;
            let b = alpha * phi.sin();
            let sum_sq = 0.5 * (alpha * alpha + beta * beta) - b * b;
            let plus = (sum_sq + 2.0 * prod).sqrt();
            let minus = alpha * phi.cos();
            let a1 = 0.5 * (plus + minus);
            let a2 = 0.5 * (plus - minus);
            samples.push(JacobiMatrix::new(vec![a1, a2], vec![mid + b, mid - b])?);
        }
        TorusSampleSet::new(samples, set.hull(), "period-2 symmetric two-band")
    }

    fn extended(&self, s: &JacobiMatrix, len: usize) -> JacobiMatrix {
        let p = s.len();
        JacobiMatrix { a: (0..len).map(|i| s.a[i % p]).collect(), b: (0..len).map(|i| s.b[i % p]).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.sup_norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NevaiDistance {
    pub value: f64,
    /// Bound on the omitted terms k > K.
    pub tail_bound: f64,
    pub horizon: usize,
    pub sample: usize,
}

/// min over samples of Σ_{k=1}^{K} e^{−k}(|a_{m+k} − ã_k| + |b_{m+k} − b̃_k|).
pub fn nevai_distance(j: &JacobiMatrix, m: usize, torus: &TorusSampleSet, horizon: usize) -> Result<NevaiDistance> {
    if m + horizon > j.len() {
        return Err(Error::InvalidInput(format!(
            "Jacobi matrix of length {} is too short for m = {m} with horizon {horizon}",
            j.len()
        )));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, s) in torus.samples.iter().enumerate() {
        let p = s.len();
        let mut acc = 0.0;
        for k in 1..=horizon {
            let w = (-(k as f64)).exp();
            acc += w * ((j.a(m + k) - s.a[(k - 1) % p]).abs() + (j.b(m + k) - s.b[(k - 1) % p]).abs());
        }
        if acc < best.0 {
            best = (acc, i);
        }
    }
    let e = std::f64::consts::E;
    let tail_bound = (-(horizon as f64)).exp() / (e - 1.0) * 2.0 * (j.sup_norm() + torus.sup_norm());
    Ok(NevaiDistance { value: best.0, tail_bound, horizon, sample: best.1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct CesaroStat {
    pub n: usize,
    /// (1/N) Σ_{m=1}^{N} d(S^{*m} J S^m, T).
    pub l1: f64,
    /// (1/N) Σ d².
    pub l2: f64,
    pub tail_bound: f64,
    pub horizon: usize,
}

pub fn cesaro_stat(j: &JacobiMatrix, torus: &TorusSampleSet, n: usize, horizon: usize) -> Result<CesaroStat> {
    if n == 0 {
        return Err(Error::InvalidInput("Cesàro average needs N ≥ 1".into()));
    }
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut tail_bound: f64 = 0.0;
    for m in 1..=n {
        let d = nevai_distance(j, m, torus, horizon)?;
        l1 += d.value;
        l2 += d.value * d.value;
        tail_bound = tail_bound.max(d.tail_bound);
    }
    Ok(CesaroStat { n, l1: l1 / n as f64, l2: l2 / n as f64, tail_bound, horizon })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockCesaro {
    pub n: usize,
    /// (1/N) Σ_{ℓ=1}^{N} ‖v_ℓ − I‖ + ‖w_ℓ‖ (Hilbert–Schmidt norms).
    pub l1: f64,
    /// (1/N) Σ ‖v_ℓ − I‖² + ‖w_ℓ‖².
    pub l2: f64,
}

pub fn block_cesaro(j: &BlockJacobi, n: usize) -> Result<BlockCesaro> {
    if n == 0 || n >= j.v.len() {
        return Err(Error::InvalidInput(format!("block Cesàro needs 1 ≤ N < {}", j.v.len())));
    }
    let id = DMatrix::<f64>::identity(j.size, j.size);
    let (mut l1, mut l2) = (0.0, 0.0);
    for l in 1..=n {
        let dv = (&j.v[l] - &id).norm();
        let dw = j.w[l].norm();
        l1 += dv + dw;
        l2 += dv * dv + dw * dw;
    }
    Ok(BlockCesaro { n, l1: l1 / n as f64, l2: l2 / n as f64 })
}

#[derive(Clone, Debug, Serialize)]
pub struct SparseStats {
    pub n: usize,
    pub threshold: f64,
    pub average: f64,
    pub density: f64,
    /// density ≤ average / δ.
    pub markov_ok: bool,
}

/// Cesàro average of |f_m| and the density of {m ≤ N : |f_m| ≥ δ}, with f_1 = f[0].
pub fn sparse_stats(f: &[f64], delta: f64, n: usize) -> Result<SparseStats> {
    if n == 0 || n > f.len() || !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("need 1 ≤ N ≤ {} and δ > 0", f.len())));
    }
    let average = f[..n].iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    let density = f[..n].iter().filter(|x| x.abs() >= delta).count() as f64 / n as f64;
    Ok(SparseStats { n, threshold: delta, average, density, markov_ok: density <= average / delta * (1.0 + 1e-12) })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RankOneShift {
    pub t: f64,
    pub margin: f64,
}

/// First t in {0, ±step, ±2 step, …} keeping every finite pole `margin` away
/// from the spectrum of the m×m truncation of J + t⟨δ_1, ·⟩δ_1.
pub fn rank_one_shift(j: &JacobiMatrix, poles: &PoleSequence, m: usize, margin: f64, step: f64, steps: usize) -> Result<RankOneShift> {
    let finite: Vec<f64> = poles.points().iter().filter_map(|c| c.as_finite()).collect();
    let base = j.truncation(m);
    for i in 0..=2 * steps {
        let t = if i == 0 { 0.0 } else if i % 2 == 1 { step * i.div_ceil(2) as f64 } else { -step * (i / 2) as f64 };
        let mut mat = base.clone();
        mat[(0, 0)] += t;
        let ev = mat.symmetric_eigenvalues();
        let achieved = finite
            .iter()
            .map(|c| ev.iter().map(|e| (e - c).abs()).fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        if achieved >= margin {
            return Ok(RankOneShift { t, margin: achieved });
        }
    }
    Err(Error::NoConvergence(format!("no shift within ±{} keeps the poles {margin} away; enlarge the grid", step * steps as f64)))
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub criterion: String,
    pub kappa: Option<KappaSection>,
    pub beta: Option<ProductSection>,
    /// Products of Λ_n along each residue class against λ_k^{−1}.
    pub lambda_products: Vec<ProductSection>,
    pub growth: Option<GrowthSection>,
    pub zeros: Option<ZeroDistSection>,
    pub verdict: Verdict,
}

impl RegularityReport {
    pub fn new(
        kappa: Option<KappaSection>,
        beta: Option<ProductSection>,
        lambda_products: Vec<ProductSection>,
        growth: Option<GrowthSection>,
        zeros: Option<ZeroDistSection>,
    ) -> Self {
        let mut vs: Vec<Verdict> = Vec::new();
        vs.extend(kappa.as_ref().map(|k| k.verdict));
        vs.extend(beta.as_ref().map(|b| b.root.verdict));
        vs.extend(lambda_products.iter().map(|p| p.root.verdict));
        vs.extend(growth.as_ref().map(|g| g.verdict));
        let verdict = if kappa.as_ref().is_some_and(|k| k.note.is_some()) {
            Verdict::Inconclusive
        } else {
            Verdict::combine(vs)
        };
        RegularityReport {
            criterion: "κ_{n(j)}^{1/n(j)} → λ_k^{1/(g+1)}, (∏β_ℓ)^{1/j} → λ_k^{-1}, (1/n)log|τ_n| → 𝒢_E(·,C)".into(),
            kappa,
            beta,
            lambda_products,
            growth,
            zeros,
            verdict,
        }
    }

    /// Verdict from a Jacobi matrix alone: the off-diagonal product against cap(E).
    pub fn from_jacobi(j: &JacobiMatrix, capacity: f64) -> Result<Self> {
        let beta = beta_diagnostic(&j.a, capacity)?;
        Ok(RegularityReport::new(None, Some(beta), Vec::new(), None, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nevai_examples() {
        let free = TorusSampleSet::free_type(-2.0, 2.0).unwrap();
        let j = JacobiMatrix::from_fn(60, |k| if k == 1 { 2f64.sqrt() } else { 1.0 }, |_| 0.0).unwrap();
        let d0 = nevai_distance(&j, 0, &free, 40).unwrap();
        assert!((d0.value - (-1f64).exp() * (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(nevai_distance(&j, 1, &free, 40).unwrap().value, 0.0);
        assert_eq!(nevai_distance(&JacobiMatrix::free(50), 3, &free, 40).unwrap().value, 0.0);
        assert!(nevai_distance(&j, 30, &free, 40).is_err());
    }

    #[test]
    fn two_band_torus_spectrum() {
        let e = FiniteGapSet::new(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let t = TorusSampleSet::two_band_symmetric(&e, 16).unwrap();
        for s in &t.samples {
            let m = t.extended(s, 200).truncation(200);
            let ev = m.symmetric_eigenvalues();
            // no eigenvalue deep inside the gap
            let inside = ev.iter().filter(|x| x.abs() < 0.9).count();
            // at most one boundary state per end of the truncation
            assert!(inside <= 2, "{inside}");
            assert!(ev.max() <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn sparse_examples() {
        let squares: Vec<f64> = (1..=10_000usize).map(|m| if (m as f64).sqrt().fract() == 0.0 { 1.0 } else { 0.0 }).collect();
        let s = sparse_stats(&squares, 0.5, 10_000).unwrap();
        assert!((s.density - 0.01).abs() < 1e-12 && (s.average - 0.01).abs() < 1e-12 && s.markov_ok);
        let harmonic: Vec<f64> = (1..=10_000).map(|m| 1.0 / m as f64).collect();
        assert!(sparse_stats(&harmonic, 0.1, 10_000).unwrap().density <= 1e-3);
    }

    #[test]
    fn rank_one_examples() {
        let free = JacobiMatrix::free(30);
        let c = PoleSequence::new(vec![ExtendedReal::Finite(3.0), ExtendedReal::Infinity]).unwrap();
        assert_eq!(rank_one_shift(&free, &c, 30, 1e-3, 0.1, 20).unwrap().t, 0.0);
        let ev = free.truncation(30).symmetric_eigenvalues();
        let c = PoleSequence::new(vec![ExtendedReal::Finite(ev[3]), ExtendedReal::Infinity]).unwrap();
        let r = rank_one_shift(&free, &c, 30, 1e-3, 0.1, 20).unwrap();
        assert!(r.t != 0.0 && r.margin >= 1e-3);
    }

    #[test]
    fn decaying_jacobi_is_flagged() {
        let j = JacobiMatrix::from_fn(400, |l| (-(l as f64).sqrt()).exp(), |_| 0.0).unwrap();
        let r = RegularityReport::from_jacobi(&j, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Inconsistent);
        let arcsine = JacobiMatrix::from_fn(400, |l| if l == 1 { 2f64.sqrt() } else { 1.0 }, |_| 0.0).unwrap();
        assert_eq!(RegularityReport::from_jacobi(&arcsine, 1.0).unwrap().verdict, Verdict::ConsistentWithRegular);
    }

    #[test]
    fn extrapolation_recovers_limit() {
        let ns: Vec<f64> = (10..50).map(|n| n as f64).collect();
        let xs: Vec<f64> = ns.iter().map(|n| 2.0 + 3.0 / n).collect();
        assert!((extrapolate(&ns, &xs).unwrap() - 2.0).abs() < 1e-12);
    }
}
