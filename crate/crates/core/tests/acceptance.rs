//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::ops::Pow;
use rug::Float;

use ratreg::config::PipelineConfig;
use ratreg::discriminant::{self, BlockJacobi};
use ratreg::gmp;
use ratreg::orf::{self, OrthoSystem, PrecisionPolicy};
use ratreg::pipeline::{self, PipelineRun};
use ratreg::potential::{self, Green};
use ratreg::regularity::{self, JacobiMatrix, RegularityReport, TorusSampleSet, Verdict};
use ratreg::ExtendedReal::{self, Finite, Infinity};
use ratreg::{FiniteGapSet, Measure, MoebiusMap, PoleSequence};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn two_band_set() -> FiniteGapSet {
    FiniteGapSet::new(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap()
}

fn arcsine_system(n: usize) -> Result<OrthoSystem, String> {
    let mu = Measure::arcsine(-2.0, 2.0).map_err(err)?;
    orf::orthonormalize(&mu, &PoleSequence::infinity(), n, PrecisionPolicy::default()).map_err(err)
}

fn run_config(name: &str, json: &str) -> Result<PipelineRun, String> {
    let cfg = PipelineConfig::from_json(json).map_err(err)?;
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    pipeline::run(&cfg, &dir).map_err(err)
}

struct Runs {
    arcsine: PipelineRun,
    two_band: PipelineRun,
}

fn runs() -> Result<Runs, String> {
    let arcsine = run_config(
        "arcsine",
        r#"{"schema_version": 1, "measure": {"kind": "arcsine", "interval": [-2, 2]},
            "poles": ["inf"], "n_max": 40}"#,
    )?;
    let two_band = run_config(
        "two_band",
        r#"{"schema_version": 1, "measure": {"kind": "equilibrium", "bands": [[-2, -1], [1, 2]]},
            "poles": "ahlfors", "n_max": 200, "precision": {"start_bits": 256, "max_bits": 2048}}"#,
    )?;
    Ok(Runs { arcsine, two_band })
}

fn c1_chebyshev_kappas() -> Check {
    let t = Instant::now();
    let s = arcsine_system(40)?;
    let secs = t.elapsed().as_secs_f64();
    let mut worst = (s.kappa(0) - 1.0).abs();
    for n in 1..=40 {
        worst = worst.max((s.kappa(n) - 0.5f64.sqrt()).abs());
    }
    ensure(
        worst <= 1e-10 && secs <= 10.0,
        format!("max |κ_n − exact| = {worst:.2e} at {} bits, {secs:.2} s", s.bits()),
    )
}

fn test_points() -> Vec<Complex64> {
    let mut pts = Vec::new();
    for x in [-3.0, -1.2, 0.0, 0.7, 2.5] {
        for y in [0.3, 1.0, -0.6, 2.0] {
            pts.push(Complex64::new(x, y));
        }
    }
    pts
}

fn c2_moebius_covariance() -> Check {
    let s = arcsine_system(30)?;
    let maps = [
        ("z+1", MoebiusMap::translation(1.0)),
        ("2z", MoebiusMap::scaling(2.0).map_err(err)?),
        ("-1/z", MoebiusMap::inversion()),
        ("-z", MoebiusMap::reflection()),
    ];
    let mut worst: f64 = 0.0;
    for (name, f) in &maps {
        let mu = s.measure().pushforward(f);
        let poles = s.poles().map(f);
        let t = orf::orthonormalize(&mu, &poles, 30, PrecisionPolicy::default()).map_err(|e| format!("{name}: {e}"))?;
        for z in test_points() {
            let fz = f.apply_complex(z).ok_or(format!("{name}: f(z) undefined"))?;
            for n in 0..=30 {
                let a = s.evaluate(n, z).map_err(err)?.norm();
                let b = t.evaluate(n, fz).map_err(err)?.norm();
                worst = worst.max((a - b).abs() / a.max(b));
            }
        }
    }
    ensure(worst <= 1e-6, format!("max relative deviation {worst:.2e} over 4 maps, 20 points, n ≤ 30"))
}

fn c3_lambda_identity(r: &Runs) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, run) in [("g=0", &r.arcsine), ("two-band", &r.two_band)] {
        let sys = run.system.as_ref().ok_or("no system")?;
        let fam = run.gmp.as_ref().ok_or("no GMP family")?;
        let res = fam.lambda_identity_residual(sys);
        ok &= res <= 1e-8;
        parts.push(format!("{name} {res:.2e} over {} n", fam.lambda_count()));
    }
    ensure(ok, format!("max |Λ_n κ_(n+g+1)/κ_n − 1|: {}", parts.join(", ")))
}

fn c4_gmp_structure(r: &Runs) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, run) in [("g=0", &r.arcsine), ("two-band", &r.two_band)] {
        let a = &run.gmp.as_ref().ok_or("no GMP family")?.matrix;
        let band = a.bandwidth_residual() / a.norm();
        let rank = a.blocks().iter().map(|b| b.rank_ratio).fold(0.0, f64::max);
        ok &= band <= 1e-10 && rank <= 1e-8;
        parts.push(format!("{name}: band {band:.1e}, σ₂/σ₁ {rank:.1e}"));
    }
    let a = gmp::build(r.arcsine.system.as_ref().unwrap()).map_err(err)?;
    let mut jac: f64 = (a.entry(0, 1) - 2f64.sqrt()).abs();
    for n in 0..40 {
        jac = jac.max(a.entry(n, n).abs());
        if n >= 1 {
            jac = jac.max((a.entry(n, n + 1) - 1.0).abs());
        }
    }
    ok &= jac <= 1e-9;
    parts.push(format!("Jacobi entries off by {jac:.1e}"));
    ensure(ok, parts.join("; "))
}

fn c5_potential() -> Check {
    let (cap_i, _) = potential::capacity_robin(&FiniteGapSet::interval(-2.0, 2.0).unwrap()).map_err(err)?;
    let (cap_2, _) = potential::capacity_robin(&two_band_set()).map_err(err)?;
    let gi = Green::new(&FiniteGapSet::interval(-2.0, 2.0).unwrap()).map_err(err)?;
    let g2i = gi.green(Complex64::new(0.0, 2.0), Infinity).map_err(err)?;
    let e1 = (cap_i - 1.0).abs();
    let e2 = (cap_2 - 0.75f64.sqrt()).abs();
    let e3 = (g2i - (1.0 + 2f64.sqrt()).ln()).abs();

    // symmetry and conformal invariance on the two-band set
    let e = two_band_set();
    let green = Green::new(&e).map_err(err)?;
    let pts = [Finite(0.3), Finite(-0.5), Finite(5.0), Finite(-3.0), Infinity];
    let mut sym: f64 = 0.0;
    for (i, &a) in pts.iter().enumerate() {
        for &b in &pts[i + 1..] {
            let x = green.green_ext(a, b).map_err(err)?;
            let y = green.green_ext(b, a).map_err(err)?;
            sym = sym.max((x - y).abs());
        }
    }
    let maps = [
        MoebiusMap::new(2.0, 1.0, 0.0, 1.0).map_err(err)?,
        MoebiusMap::reflection(),
        MoebiusMap::inversion(),
        MoebiusMap::new(1.0, 0.0, -1.0, 3.0).map_err(err)?,
    ];
    let zs = [Complex64::new(0.2, 0.5), Complex64::new(-1.5, 0.3), Complex64::new(3.0, 1.0)];
    let ws = [Infinity, Finite(0.0), Finite(5.0)];
    let mut conf: f64 = 0.0;
    for f in &maps {
        let fe = e.map(f).map_err(err)?;
        let fg = Green::new(&fe).map_err(err)?;
        for &z in &zs {
            for &w in &ws {
                let fw = f.apply(w);
                let fz = f.apply_complex(z).ok_or("f(z) undefined")?;
                let x = green.green(z, w).map_err(err)?;
                let y = fg.green(fz, fw).map_err(err)?;
                conf = conf.max((x - y).abs());
            }
        }
    }
    ensure(
        e1 <= 1e-8 && e2 <= 1e-6 && e3 <= 1e-8 && sym <= 1e-7 && conf <= 1e-7,
        format!("cap errors {e1:.1e}, {e2:.1e}; G(2i,∞) error {e3:.1e}; symmetry {sym:.1e}; conformal {conf:.1e}"),
    )
}

fn c6_discriminant() -> Check {
    let e = two_band_set();
    let d = discriminant::fit_discriminant(&e).map_err(err)?;
    let fit = (d.lambdas[0] - 4.0)
        .abs()
        .max((d.lambda_inf - 2.0).abs())
        .max(d.d.abs())
        .max(d.zeros[0].abs());
    let green = Green::new(&e).map_err(err)?;
    let from_green: Vec<f64> = green.log_lambdas(&d.poles()).map_err(err)?.iter().map(|x| x.exp()).collect();
    let residues = [d.lambdas[0], d.lambda_inf];
    let rel = residues.iter().zip(&from_green).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    let mut ends: f64 = 0.0;
    for (i, &x) in e.endpoints().iter().enumerate() {
        let target = if i % 2 == 0 { -2.0 } else { 2.0 };
        ends = ends.max((d.eval_real(x) - target).abs());
    }
    ensure(
        fit <= 1e-6 && rel <= 1e-5 && ends <= 1e-8,
        format!("(λ₁, λ∞, d, c₁) off by {fit:.1e}; residues vs Green {rel:.1e}; endpoints {ends:.1e}"),
    )
}

fn c7_regularity(r: &Runs) -> Check {
    let sys = r.two_band.system.as_ref().ok_or("no system")?;
    let report = r.two_band.report.as_ref().ok_or("no report")?;
    let kappa = report.kappa.as_ref().ok_or("no κ section")?;
    let beta = report.beta.as_ref().ok_or("no β section")?;
    let kdev = kappa.classes.iter().map(|c| c.root.last_deviation.abs()).fold(0.0, f64::max);
    let bdev = beta.root.last_deviation.abs();
    let decay = JacobiMatrix::from_fn(200, |l| (-(l as f64).sqrt()).exp(), |_| 0.0).map_err(err)?;
    let bad = RegularityReport::from_jacobi(&decay, 1.0).map_err(err)?;
    ensure(
        sys.n_max() == 200
            && sys.bits() >= 256
            && kdev <= 0.02
            && bdev <= 0.02
            && matches!(bad.verdict, Verdict::Inconsistent),
        format!(
            "N = {}, {} bits; κ root deviation {kdev:.4}; (∏β)^(1/j) deviation {bdev:.4}; decaying Jacobi {:?}",
            sys.n_max(),
            sys.bits(),
            bad.verdict
        ),
    )
}

fn c8_lower_bounds(r: &Runs) -> Check {
    let mut growth = f64::INFINITY;
    let mut product = f64::INFINITY;
    for run in [&r.arcsine, &r.two_band] {
        let rep = run.report.as_ref().ok_or("no report")?;
        let g = rep.growth.as_ref().ok_or("no growth section")?;
        if g.points.len() != 20 {
            return Err(format!("grid has {} points", g.points.len()));
        }
        growth = growth.min(g.min_slack);
        for k in &rep.kappa.as_ref().ok_or("no κ section")?.classes {
            growth = growth.min(k.lower_bound_slack);
        }
        for p in rep.beta.iter().chain(&rep.lambda_products) {
            product = product.min(p.upper_bound_slack);
        }
    }
    ensure(
        growth >= -0.05 && product >= -0.02,
        format!("min growth slack {growth:.4}, min product slack {product:.4}"),
    )
}

fn c9_zeros(r: &Runs) -> Check {
    let s = arcsine_system(50)?;
    let zs = s.zeros(50).map_err(err)?;
    let dist = regularity::sup_cdf_distance(&zs.zeros, 50, s.measure());
    let g = r.two_band.system.as_ref().ok_or("no system")?.genus() as f64;
    let rows = &r.two_band.report.as_ref().ok_or("no report")?.zeros.as_ref().ok_or("no zero section")?.rows;
    let defect = rows.iter().all(|row| row.mass_defect_ok && row.mass >= 1.0 - g / row.n as f64);
    ensure(
        zs.degree == 50 && dist <= 0.05 && defect && !rows.is_empty(),
        format!("n = 50 sup-CDF distance {dist:.4}; mass ≥ 1 − g/n on {} two-band rows: {defect}", rows.len()),
    )
}

fn c10_magic(r: &Runs) -> Check {
    let interval = discriminant::fit_discriminant(&FiniteGapSet::interval(-2.0, 2.0).unwrap()).map_err(err)?;
    let m = 60;
    let mut j = DMatrix::<f64>::zeros(m, m);
    for i in 0..m - 1 {
        j[(i, i + 1)] = 1.0;
        j[(i + 1, i)] = 1.0;
    }
    let dj = j * interval.lambda_inf + DMatrix::identity(m, m) * interval.d;
    let per_block = discriminant::magic_residual(&BlockJacobi::from_banded(&dj, 1))
        .per_block
        .into_iter()
        .fold(0.0, f64::max);
    let free = discriminant::magic_solve(&interval, &[0.7], &[0.2]).map_err(err)?;
    let (a, b) = (free.p[0], free.p[0] * free.q[0]);
    let free_err = (a - 1.0).abs().max(b.abs());
    let disc = r.two_band.discriminant.as_ref().ok_or("no discriminant")?;
    let sol = discriminant::magic_solve(disc, &[0.6, 0.1], &[0.1, -2.5]).map_err(err)?;
    let prod = sol.lambda_products.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    ensure(
        per_block <= 1e-12 && free_err <= 1e-9 && prod <= 1e-6,
        format!("free per-block H₊ {per_block:.1e}; [−2,2] solve a−1, b off by {free_err:.1e}; two-band λΛ off by {prod:.1e}"),
    )
}

fn c11_cesaro() -> Check {
    let t = Instant::now();
    let horizon = regularity::NEVAI_HORIZON;
    let j = JacobiMatrix::from_fn(10_000 + horizon + 1, |m| 1.0 + 1.0 / m as f64, |_| 0.0).map_err(err)?;
    let torus = TorusSampleSet::free_type(-2.0, 2.0).map_err(err)?;
    let mut avgs = Vec::new();
    let mut bound_ok = true;
    for n in [100, 1000, 10_000] {
        let s = regularity::cesaro_stat(&j, &torus, n, horizon).map_err(err)?;
        let e = std::f64::consts::E;
        bound_ok &= s.l1 <= e / (e - 1.0) * (n as f64).ln() / n as f64;
        avgs.push(s.l1);
    }
    let secs = t.elapsed().as_secs_f64();
    let monotone = avgs.windows(2).all(|w| w[1] < w[0]);
    ensure(
        avgs[2] <= 0.01 && monotone && bound_ok && secs <= 30.0,
        format!("averages {:.2e}, {:.2e}, {:.2e}; harmonic bound {bound_ok}; {secs:.2} s", avgs[0], avgs[1], avgs[2]),
    )
}

/// Brute-force Gram matrix and Cholesky factor at fixed precision.
fn oracle(atoms: &[(f64, f64)], poles: &[ExtendedReal], n: usize, prec: u32) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = poles.len();
    let r = |k: usize, x: f64| -> Float {
        let one = Float::with_val(prec, 1);
        if k == 0 {
            return one;
        }
        let slot = (k - 1) % p;
        let power = ((k - 1) / p + 1) as i32;
        let base = match poles[slot] {
            Infinity => Float::with_val(prec, x),
            Finite(c) => one / (Float::with_val(prec, c) - x),
        };
        base.pow(power)
    };
    let vals: Vec<Vec<Float>> = atoms.iter().map(|&(x, _)| (0..=n).map(|k| r(k, x)).collect()).collect();
    let mut g = vec![vec![Float::with_val(prec, 0); n + 1]; n + 1];
    for (row, &(_, w)) in vals.iter().zip(atoms) {
        for i in 0..=n {
            for k in 0..=i {
                g[i][k] += Float::with_val(prec, &row[i] * &row[k]) * w;
            }
        }
    }
    let mut l = vec![vec![Float::with_val(prec, 0); n + 1]; n + 1];
    for i in 0..=n {
        for k in 0..=i {
            let mut s = g[i][k].clone();
            for m in 0..k {
                s -= Float::with_val(prec, &l[i][m] * &l[k][m]);
            }
            l[i][k] = if i == k { s.sqrt() } else { s / &l[k][k] };
        }
    }
    // rows of L⁻¹ are the coefficient vectors
    let mut inv = vec![vec![Float::with_val(prec, 0); n + 1]; n + 1];
    for i in 0..=n {
        inv[i][i] = Float::with_val(prec, 1) / &l[i][i];
        for k in (0..i).rev() {
            let mut s = Float::with_val(prec, 0);
            for m in k..i {
                s += Float::with_val(prec, &l[i][m] * &inv[m][k]);
            }
            inv[i][k] = -s / &l[i][i];
        }
    }
    let kappas = (0..=n).map(|i| inv[i][i].to_f64()).collect();
    let coeffs = inv.iter().enumerate().map(|(i, row)| row[..=i].iter().map(Float::to_f64).collect()).collect();
    (kappas, coeffs)
}

fn c12_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_018);
    let mut worst: f64 = 0.0;
    let mut shapes = Vec::new();
    for _ in 0..5 {
        let count = rng.gen_range(21..=30);
        let n = rng.gen_range(5..=20);
        let mut atoms: Vec<(f64, f64)> = (0..count).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0))).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for a in &mut atoms {
            a.1 /= total;
        }
        let g = rng.gen_range(0..=2);
        let mut poles: Vec<ExtendedReal> = Vec::new();
        if rng.gen_bool(0.5) {
            poles.push(Infinity);
        }
        while poles.len() < g + 1 {
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let c = side * rng.gen_range(1.3..3.0);
            if poles.iter().all(|p| p.as_finite().map_or(true, |q| (q - c).abs() > 0.2)) {
                poles.push(Finite(c));
            }
        }
        let n = n.min(atoms.len() - 1);
        let list: Vec<(ExtendedReal, f64)> = atoms.iter().map(|&(x, w)| (Finite(x), w)).collect();
        let mu = Measure::atomic(&list).map_err(err)?;
        let c = PoleSequence::new(poles.clone()).map_err(err)?;
        let sys = orf::orthonormalize(&mu, &c, n, PrecisionPolicy::default()).map_err(err)?;
        let (kappas, coeffs) = oracle(&atoms, &poles, n, 512);
        for k in 0..=n {
            worst = worst.max((sys.kappa(k) - kappas[k]).abs() / kappas[k]);
            let main = sys.coefficients(k);
            let scale = coeffs[k].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (a, b) in main.iter().zip(&coeffs[k]) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
        shapes.push(format!("{}/{n}/g{g}", atoms.len()));
    }
    ensure(worst <= 1e-9, format!("max relative deviation {worst:.2e} on atoms/N/genus {}", shapes.join(", ")))
}

fn main() {
    let shared = runs();
    let with_runs = |f: fn(&Runs) -> Check| match &shared {
        Ok(r) => f(r),
        Err(e) => Err(format!("pipeline run failed: {e}")),
    };
    let results: Vec<(&str, Check)> = vec![
        ("1 Chebyshev leading coefficients", c1_chebyshev_kappas()),
        ("2 Möbius covariance", c2_moebius_covariance()),
        ("3 Λ_n κ_(n+g+1) = κ_n", with_runs(c3_lambda_identity)),
        ("4 GMP structure", with_runs(c4_gmp_structure)),
        ("5 potential theory", c5_potential()),
        ("6 discriminant", c6_discriminant()),
        ("7 regularity detection", with_runs(c7_regularity)),
        ("8 universal lower bounds", with_runs(c8_lower_bounds)),
        ("9 zero distribution", with_runs(c9_zeros)),
        ("10 magic formula", with_runs(c10_magic)),
        ("11 Cesàro–Nevai", c11_cesaro()),
        ("12 oracle equivalence", c12_oracle()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
