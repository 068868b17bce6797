//! The rational discriminant Δ_E(z) = λ_{g+1} z + d + Σ λ_k/(c_k − z), its
//! action on GMP matrices and the magic formula Δ_E(A) = S^{g+1} + S^{−(g+1)}.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::cheb;
use crate::error::{Error, Result};
use crate::gmp::GmpFamily;
use crate::measure::{FiniteGapSet, PoleSequence};
use crate::moebius::ExtendedReal;
use crate::potential::Green;

pub const ENDPOINT_TOL: f64 = 1e-8;
pub const RESIDUE_TOL: f64 = 1e-5;
pub const TYPE3_TOL: f64 = 1e-9;
pub const DET_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct Discriminant {
    #[serde(skip)]
    set: FiniteGapSet,
    /// λ_1..λ_g, the residues at the finite zeros.
    pub lambdas: Vec<f64>,
    pub lambda_inf: f64,
    pub d: f64,
    /// Ahlfors zeros c_1..c_g, one per gap.
    pub zeros: Vec<f64>,
    /// Δ(e) ∓ 2 at the band endpoints, left to right.
    pub endpoint_residuals: Vec<f64>,
    /// max relative gap between the residues and λ_k from potential theory.
    pub residue_mismatch: f64,
    pub iterations: usize,
}

fn params_eval(x: &[f64], g: usize, t: f64) -> f64 {
    let mut v = x[0] * t + x[1];
    for k in 0..g {
        v += x[2 + k] / (x[2 + g + k] - t);
    }
    v
}

fn endpoint_system(x: &[f64], g: usize, ends: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = 2 * g + 2;
    let mut f = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, n);
    for (i, &e) in ends.iter().enumerate() {
        let target = if i % 2 == 0 { -2.0 } else { 2.0 };
        f[i] = params_eval(x, g, e) - target;
        jac[(i, 0)] = e;
        jac[(i, 1)] = 1.0;
        for k in 0..g {
            let r = 1.0 / (x[2 + g + k] - e);
            jac[(i, 2 + k)] = r;
            jac[(i, 2 + g + k)] = -x[2 + k] * r * r;
        }
    }
    (f, jac)
}

/// Fit Δ_E from the 2g+2 endpoint conditions by damped Newton.
pub fn fit_discriminant(set: &FiniteGapSet) -> Result<Discriminant> {
    let g = set.genus();
    let ends = set.endpoints().to_vec();
    let gaps = set.gaps();
    // start from gap midpoints with the linear unknowns fitted by least squares
    let mut x = vec![0.0; 2 * g + 2];
    for (k, &(a, b)) in gaps.iter().enumerate() {
        x[2 + g + k] = 0.5 * (a + b);
    }
    {
        let (f0, jac) = endpoint_system(&x, g, &ends);
        let lin = jac.columns(0, g + 2).into_owned();
        // f0 at zero linear unknowns is just −target
        let sol = lin.svd(true, true).solve(&(-f0), 1e-14).map_err(|e| Error::NoConvergence(e.to_string()))?;
        for i in 0..g + 2 {
            x[i] = sol[i];
        }
        for k in 0..g {
            x[2 + k] = x[2 + k].abs().max(1e-3 * set.scale());
        }
        x[0] = x[0].abs().max(1e-6);
    }
    let norm = |f: &DVector<f64>| f.amax();
    let mut iterations = 0;
    let (mut f, mut jac) = endpoint_system(&x, g, &ends);
    while norm(&f) > 1e-14 && iterations < 200 {
        iterations += 1;
        let step = jac.clone().lu().solve(&(-&f)).ok_or_else(|| Error::NoConvergence("singular endpoint Jacobian".into()))?;
        let mut t = 1.0;
        let current = norm(&f);
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let feasible = (0..g).all(|k| {
                let (a, b) = gaps[k];
                trial[2 + k] > 0.0 && trial[2 + g + k] > a && trial[2 + g + k] < b
            }) && trial[0] > 0.0;
            if feasible {
                let (ft, jt) = endpoint_system(&trial, g, &ends);
                if norm(&ft) < current || norm(&ft) <= 1e-14 {
                    x = trial;
                    f = ft;
                    jac = jt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = norm(&f);
    if !(residual <= ENDPOINT_TOL) {
        return Err(Error::NoConvergence(format!(
            "discriminant fit stopped after {iterations} steps with endpoint residual {residual:.3e}"
        )));
    }
    let mut disc = Discriminant {
        set: set.clone(),
        lambdas: x[2..2 + g].to_vec(),
        lambda_inf: x[0],
        d: x[1],
        zeros: x[2 + g..].to_vec(),
        endpoint_residuals: f.iter().copied().collect(),
        residue_mismatch: 0.0,
        iterations,
    };
    // residues against potential theory
    let green = Green::new(set)?;
    let poles = disc.poles();
    let logs = green.log_lambdas(&poles)?;
    let mut worst: f64 = 0.0;
    for (k, lg) in logs.iter().enumerate() {
        let fitted = if k < g { disc.lambdas[k] } else { disc.lambda_inf };
        worst = worst.max((fitted / lg.exp() - 1.0).abs());
    }
    disc.residue_mismatch = worst;
    if !(worst <= RESIDUE_TOL) {
        return Err(Error::Invariant(format!(
            "discriminant residues differ from potential-theory λ_k by {worst:.3e}"
        )));
    }
    disc.check_preimage()?;
    Ok(disc)
}

impl Discriminant {
    pub fn set(&self) -> &FiniteGapSet {
        &self.set
    }

    pub fn genus(&self) -> usize {
        self.zeros.len()
    }

    /// C_E = (c_1, …, c_g, ∞).
    pub fn poles(&self) -> PoleSequence {
        let mut v: Vec<ExtendedReal> = self.zeros.iter().map(|&c| ExtendedReal::Finite(c)).collect();
        v.push(ExtendedReal::Infinity);
        PoleSequence::new(v).expect("Ahlfors zeros are distinct")
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut v = z * self.lambda_inf + self.d;
        for (l, c) in self.lambdas.iter().zip(&self.zeros) {
            v += *l / (*c - z);
        }
        v
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = self.lambda_inf;
        for (l, c) in self.lambdas.iter().zip(&self.zeros) {
            v += l / ((c - x) * (c - x));
        }
        v
    }

    /// Residue weight for a pole of C_E: λ_k, or λ_{g+1} at ∞.
    pub fn lambda_for(&self, pole: ExtendedReal, tol: f64) -> Option<f64> {
        match pole {
            ExtendedReal::Infinity => Some(self.lambda_inf),
            ExtendedReal::Finite(c) => self
                .zeros
                .iter()
                .position(|z| (z - c).abs() <= tol)
                .map(|k| self.lambdas[k]),
        }
    }

    /// Samples bands (|Δ| ≤ 2) and gaps/exterior (|Δ| > 2).
    pub fn check_preimage(&self) -> Result<()> {
        for (lo, hi) in self.set.bands() {
            for i in 0..=32 {
                let x = lo + (hi - lo) * i as f64 / 32.0;
                let v = self.eval_real(x);
                if v.abs() > 2.0 + ENDPOINT_TOL {
                    return Err(Error::Invariant(format!("|Δ({x})| = {} exceeds 2 on E", v.abs())));
                }
            }
        }
        let (lo, hi) = self.set.hull();
        let w = hi - lo;
        let mut outside: Vec<f64> = vec![lo - w, lo - 1e-3 * w, hi + 1e-3 * w, hi + w];
        for (a, b) in self.set.gaps() {
            outside.extend((1..32).map(|i| a + (b - a) * i as f64 / 32.0));
        }
        for x in outside {
            if self.zeros.iter().any(|c| (c - x).abs() < 1e-12 * w) {
                continue;
            }
            let v = self.eval_real(x);
            if !(v.abs() > 2.0) {
                return Err(Error::Invariant(format!("|Δ({x})| = {} is not above 2 off E", v.abs())));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lambdas": self.lambdas.iter().copied().chain([self.lambda_inf]).collect::<Vec<_>>(),
            "d": self.d,
            "zeros": self.zeros,
            "endpoint_residuals": self.endpoint_residuals,
        })
    }
}

/// |Ψ(z)| = exp(−Σ_k G_E(z, c_k)) over C_E.
pub fn ahlfors_abs(green: &Green, disc: &Discriminant, z: Complex64) -> Result<f64> {
    let mut s = 0.0;
    for &c in disc.poles().points() {
        s += green.green(z, c)?;
    }
    Ok((-s).exp())
}

/// |Ψ(z)| read off from Δ(z) = Ψ + 1/Ψ with |Ψ| ≤ 1.
pub fn ahlfors_abs_from_discriminant(disc: &Discriminant, z: Complex64) -> f64 {
    cheb::joukowski_inverse(disc.eval(z) / 2.0).norm()
}

/// Block Jacobi matrix with (g+1)×(g+1) blocks aligned at index 0.
#[derive(Clone, Debug)]
pub struct BlockJacobi {
    pub v: Vec<DMatrix<f64>>,
    pub w: Vec<DMatrix<f64>>,
    pub size: usize,
    /// det v_j / ∏ λ Λ − 1 per block.
    pub det_mismatch: Vec<f64>,
}

impl BlockJacobi {
    pub fn from_banded(j: &DMatrix<f64>, size: usize) -> Self {
        let blocks = j.nrows() / size;
        let w = (0..blocks)
            .map(|b| j.view((b * size, b * size), (size, size)).into_owned())
            .collect();
        let v = (0..blocks.saturating_sub(1))
            .map(|b| j.view((b * size, (b + 1) * size), (size, size)).into_owned())
            .collect();
        BlockJacobi { v, w, size, det_mismatch: Vec::new() }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let s = self.size;
        let n = self.w.len() * s;
        let mut m = DMatrix::zeros(n, n);
        for (b, w) in self.w.iter().enumerate() {
            m.view_mut((b * s, b * s), (s, s)).copy_from(w);
        }
        for (b, v) in self.v.iter().enumerate() {
            m.view_mut((b * s, (b + 1) * s), (s, s)).copy_from(v);
            m.view_mut(((b + 1) * s, b * s), (s, s)).copy_from(&v.transpose());
        }
        m
    }

    /// Lower triangular v_j with positive diagonal, symmetric w_j.
    pub fn check_type3(&self) -> Result<()> {
        let scale = self
            .v
            .iter()
            .chain(&self.w)
            .map(|m| m.amax())
            .fold(1.0f64, f64::max);
        for (j, v) in self.v.iter().enumerate() {
            for a in 0..self.size {
                if !(v[(a, a)] > 0.0) {
                    return Err(Error::Invariant(format!("v_{j} has diagonal entry {} ≤ 0", v[(a, a)])));
                }
                for b in a + 1..self.size {
                    if v[(a, b)].abs() > TYPE3_TOL * scale {
                        return Err(Error::Invariant(format!("v_{j} is not lower triangular ({:.3e})", v[(a, b)])));
                    }
                }
            }
        }
        for (j, w) in self.w.iter().enumerate() {
            if (w - w.transpose()).amax() > TYPE3_TOL * scale {
                return Err(Error::Invariant(format!("w_{j} is not symmetric")));
            }
        }
        Ok(())
    }

    /// Extreme eigenvalues of the leading `blocks` block truncation.
    pub fn truncation_range(&self, blocks: usize) -> (f64, f64) {
        let s = self.size;
        let n = blocks.min(self.w.len()) * s;
        let m = self.dense().view((0, 0), (n, n)).into_owned();
        let ev = m.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }
}

/// J = λ_{g+1} A + d I + Σ λ_k (c_k − A)⁻¹ on the computed range.
pub fn apply_to_gmp(disc: &Discriminant, family: &GmpFamily) -> Result<BlockJacobi> {
    let a = &family.matrix;
    let g = a.genus();
    if g != disc.genus() {
        return Err(Error::InvalidInput(format!("GMP genus {g} does not match the discriminant ({})", disc.genus())));
    }
    let size = g + 1;
    let tol = 1e-8 * disc.set().scale();
    let mut weights = Vec::with_capacity(size);
    for slot in 1..=size {
        let c = a.poles().get(slot);
        let l = disc
            .lambda_for(c, tol)
            .ok_or_else(|| Error::InvalidInput(format!("pole {c} is not an Ahlfors zero of E")))?;
        weights.push(l);
    }
    let n = a.n_max() + 1;
    let blocks = n / size;
    let dim = blocks * size;
    let mut j = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in r.saturating_sub(size)..(r + size + 1).min(dim) {
            let mut v = disc.lambda_inf * a.entry(r, c);
            if r == c {
                v += disc.d;
            }
            for slot in 1..=size {
                if let Some(res) = &family.resolvents[slot - 1] {
                    v += weights[slot - 1] * res.entry(r, c);
                }
            }
            j[(r, c)] = v;
        }
    }
    let mut bj = BlockJacobi::from_banded(&j, size);
    bj.check_type3()?;
    let mut mismatch = Vec::with_capacity(bj.v.len());
    for (b, v) in bj.v.iter().enumerate() {
        let mut expect = 1.0;
        for i in 0..size {
            let idx = b * size + i;
            let slot = a.poles().slot_of(idx);
            let lam = family.lambda(idx).unwrap_or(f64::NAN);
            expect *= weights[slot - 1] * lam;
        }
        let det = v.determinant();
        let m = (det / expect - 1.0).abs();
        if !(m <= DET_TOL) {
            return Err(Error::Invariant(format!("det v_{b} = {det:.6e} but ∏ λ Λ = {expect:.6e}")));
        }
        mismatch.push(m);
    }
    bj.det_mismatch = mismatch;
    Ok(bj)
}

#[derive(Clone, Debug, Serialize)]
pub struct MagicResidual {
    pub total: f64,
    /// ‖v_{ℓ−1} − I‖² + ‖w_ℓ‖² + ‖v_ℓ − I‖² for ℓ = first..=last.
    pub per_block: Vec<f64>,
    pub first: usize,
    pub last: usize,
}

/// Partial H_+ over the blocks ℓ ≥ 1 whose neighbours are available.
pub fn magic_residual(j: &BlockJacobi) -> MagicResidual {
    let id = DMatrix::<f64>::identity(j.size, j.size);
    let hs = |m: &DMatrix<f64>| m.iter().map(|x| x * x).sum::<f64>();
    let last = j.v.len().saturating_sub(1);
    let per_block: Vec<f64> =
        (1..=last).map(|l| hs(&(&j.v[l - 1] - &id)) + hs(&j.w[l]) + hs(&(&j.v[l] - &id))).collect();
    MagicResidual { total: per_block.iter().sum(), per_block, first: 1, last }
}

/// One period (p, q) of a periodic GMP matrix over C_E.
#[derive(Clone, Debug, Serialize)]
pub struct MagicSolution {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// λ_k Λ_k(A) for k = 1..=g+1 (the last entry belongs to ∞).
    pub lambda_products: Vec<f64>,
}

type CMat = DMatrix<Complex64>;

fn symbol(disc: &Discriminant, p: &[f64], q: &[f64], theta: f64) -> (CMat, CMat) {
    let s = p.len();
    // C̃ = diag{0, c_1, …, c_g} for ∞ in the last slot
    let mut b = DMatrix::<f64>::zeros(s, s);
    for a in 0..s {
        if a > 0 {
            b[(a, a)] += disc.zeros[a - 1];
        }
        for c in 0..s {
            b[(a, c)] += if a >= c { q[a] * p[c] } else { p[a] * q[c] };
        }
    }
    let e = Complex64::from_polar(1.0, theta);
    let mut a_sym = b.map(|x| Complex64::new(x, 0.0));
    for a in 0..s {
        a_sym[(a, 0)] += e * p[a];
        a_sym[(0, a)] += e.conj() * p[a];
    }
    let mut delta = a_sym.map(|z| z * disc.lambda_inf);
    for a in 0..s {
        delta[(a, a)] += disc.d;
    }
    (a_sym, delta)
}

fn delta_symbol(disc: &Discriminant, p: &[f64], q: &[f64], theta: f64) -> Option<CMat> {
    let s = p.len();
    let (a_sym, mut delta) = symbol(disc, p, q, theta);
    for (l, c) in disc.lambdas.iter().zip(&disc.zeros) {
        let m = CMat::identity(s, s) * Complex64::new(*c, 0.0) - &a_sym;
        delta += m.try_inverse()? * Complex64::new(*l, 0.0);
    }
    Some(delta)
}

fn magic_equations(disc: &Discriminant, x: &[f64], samples: usize) -> Option<DVector<f64>> {
    let s = x.len() / 2;
    let (p, q) = x.split_at(s);
    let mut out = Vec::with_capacity(samples * s * s * 2);
    for i in 0..samples {
        let th = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let mut d = delta_symbol(disc, p, q, th)?;
        for a in 0..s {
            d[(a, a)] -= 2.0 * th.cos();
        }
        for z in d.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    Some(DVector::from_vec(out))
}

/// Laurent coefficient of e^{iθ} of (c − A(θ))⁻¹, from `m` samples.
fn resolvent_upper(disc: &Discriminant, p: &[f64], q: &[f64], c: f64, m: usize) -> Option<CMat> {
    let s = p.len();
    let mut acc = CMat::zeros(s, s);
    for i in 0..m {
        let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
        let (a_sym, _) = symbol(disc, p, q, th);
        let r = (CMat::identity(s, s) * Complex64::new(c, 0.0) - a_sym).try_inverse()?;
        acc += r * Complex64::from_polar(1.0 / m as f64, -th);
    }
    Some(acc)
}

/// Solve Δ_E(A(θ)) = 2 cos θ · I for a periodic GMP matrix by Gauss–Newton.
pub fn magic_solve(disc: &Discriminant, initial_p: &[f64], initial_q: &[f64]) -> Result<MagicSolution> {
    let s = disc.genus() + 1;
    if initial_p.len() != s || initial_q.len() != s {
        return Err(Error::InvalidInput(format!("initial (p, q) must have length {s}")));
    }
    if !(initial_p[0] > 0.0) {
        return Err(Error::InvalidInput("initial (p)_0 must be positive".into()));
    }
    let samples = 4 * s;
    let mut seeds = vec![[initial_p, initial_q].concat()];
    for t in [0.1, -0.1, 0.3] {
        let mut x = seeds[0].clone();
        for (i, v) in x.iter_mut().enumerate() {
            *v += t * (1.0 + i as f64 / s as f64);
        }
        x[0] = x[0].abs().max(1e-3);
        seeds.push(x);
    }
    let mut last_err = String::new();
    for seed in seeds {
        match gauss_newton(disc, seed, samples) {
            Ok((x, res, it)) if x[0] > 0.0 => {
                let (p, q) = x.split_at(s);
                let mut products = Vec::with_capacity(s);
                for k in 0..disc.genus() {
                    let r1 = resolvent_upper(disc, p, q, disc.zeros[k], 8 * s)
                        .ok_or_else(|| Error::NoConvergence("resolvent symbol is singular".into()))?;
                    products.push(disc.lambdas[k] * r1[(k + 1, k + 1)].re);
                }
                products.push(disc.lambda_inf * p[0]);
                return Ok(MagicSolution { p: p.to_vec(), q: q.to_vec(), residual: res, iterations: it, lambda_products: products });
            }
            Ok(_) => last_err = "root with (p)_0 ≤ 0".into(),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(Error::NoConvergence(format!("magic formula solve failed: {last_err}")))
}

fn gauss_newton(disc: &Discriminant, mut x: Vec<f64>, samples: usize) -> Result<(Vec<f64>, f64, usize)> {
    let eval = |x: &[f64]| magic_equations(disc, x, samples);
    let mut f = eval(&x).ok_or_else(|| Error::NoConvergence("symbol hits a pole".into()))?;
    let mut it = 0;
    while f.amax() > 1e-13 && it < 100 {
        it += 1;
        let n = x.len();
        let mut jac = DMatrix::zeros(f.len(), n);
        for i in 0..n {
            let h = 1e-7 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (fp, fm) = match (eval(&xp), eval(&xm)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::NoConvergence("symbol hits a pole".into())),
            };
            jac.set_column(i, &((fp - fm) / (2.0 * h)));
        }
        let step = jac.svd(true, true).solve(&(-&f), 1e-12).map_err(|e| Error::NoConvergence(e.to_string()))?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Some(ft) = eval(&trial) {
                if ft.amax() < f.amax() {
                    x = trial;
                    f = ft;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let res = f.amax();
    if res <= 1e-9 {
        Ok((x, res, it))
    } else {
        Err(Error::NoConvergence(format!("residual {res:.3e} after {it} steps")))
    }
}
