//! Batch driver: measure → ORF → GMP → potential → discriminant → regularity.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{fmt_f64, PipelineConfig, PolesSpec, Stage};
use crate::discriminant::{self, Discriminant, MagicSolution};
use crate::error::{Error, Result};
use crate::gmp::GmpFamily;
use crate::measure::{FiniteGapSet, Measure, PoleSequence};
use crate::moebius::ExtendedReal;
use crate::orf::{orthonormalize, OrthoSystem};
use crate::potential::Green;
use crate::regularity::{self, ProductSection, RegularityReport, Verdict};

#[derive(Clone, Debug, Serialize)]
pub struct PipelineSummary {
    pub stages: Vec<&'static str>,
    pub artifacts: Vec<PathBuf>,
    pub verdict: Option<Verdict>,
}

/// Everything a run computed, for callers that want more than the files.
pub struct PipelineRun {
    pub measure: Measure,
    pub set: Option<FiniteGapSet>,
    pub poles: PoleSequence,
    pub system: Option<OrthoSystem>,
    pub gmp: Option<GmpFamily>,
    pub green: Option<Green>,
    pub discriminant: Option<Discriminant>,
    pub report: Option<RegularityReport>,
    pub summary: PipelineSummary,
}

struct Out {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Out {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, &s)
    }
}

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

/// E from the config, the essential support, or the hull of an atomic measure.
fn resolve_set(cfg: &PipelineConfig, mu: &Measure) -> Option<FiniteGapSet> {
    if let Some(s) = &cfg.set {
        return Some(s.clone());
    }
    if let Some(s) = mu.finite_gap_set() {
        return Some(s);
    }
    let xs: Vec<f64> = mu.atoms().iter().filter_map(|a| a.position.as_finite()).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    FiniteGapSet::new(&[(lo, hi)]).ok()
}

pub fn run(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineRun> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut out = Out { dir: out_dir.to_path_buf(), written: Vec::new() };
    let mut stages = Vec::new();

    let mu = staged("measure", cfg.measure.build(&cfg.base_dir, cfg.nodes))?;
    let set = resolve_set(cfg, &mu);
    let needs_set = cfg.runs(Stage::Potential) || matches!(cfg.poles, PolesSpec::Named(_));
    let set_ref = match (&set, needs_set) {
        (Some(s), _) => Some(s),
        (None, true) => return Err(Error::Config("no finite gap set E: give \"set\" in the config".into())),
        (None, false) => None,
    };

    let mut disc = None;
    let poles = match &cfg.poles {
        PolesSpec::List(p) => p.clone(),
        PolesSpec::Named(_) => {
            let d = staged("discriminant", discriminant::fit_discriminant(set_ref.expect("checked above")))?;
            let p = d.poles();
            disc = Some(d);
            p
        }
    };

    let mut system = None;
    if cfg.runs(Stage::Orthonormalize) {
        stages.push(Stage::Orthonormalize.name());
        let sys = staged("orthonormalize", orthonormalize(&mu, &poles, cfg.n_max, cfg.precision))?;
        let mut csv = String::from("n,kappa,log_kappa\n");
        for n in 0..=sys.n_max() {
            let _ = writeln!(csv, "{n},{},{}", fmt_f64(sys.kappa(n)), fmt_f64(sys.log_kappa(n)));
        }
        out.write("kappa.csv", &csv)?;
        let mut coeffs = String::from("n,l,t\n");
        for n in 0..=sys.n_max() {
            for (l, t) in sys.coefficients(n).iter().enumerate() {
                let _ = writeln!(coeffs, "{n},{l},{}", fmt_f64(*t));
            }
        }
        out.write("coefficients.csv", &coeffs)?;
        out.json(
            "orthonormalize.json",
            &json!({
                "poles": poles,
                "n_max": sys.n_max(),
                "bits": sys.bits(),
                "attempts": sys.attempts(),
                "orthonormality_error": sys.orthonormality_error(),
            }),
        )?;
        system = Some(sys);
    }

    let mut family = None;
    if cfg.runs(Stage::Gmp) {
        stages.push(Stage::Gmp.name());
        let sys = system.as_ref().expect("stage order");
        let fam = staged("gmp", GmpFamily::build(sys, cfg.precision))?;
        staged("gmp", fam.check_lambda_identity(sys))?;
        let a = &fam.matrix;
        out.write("gmp.csv", &a.to_csv())?;
        let betas: Vec<Option<f64>> = (0..=a.beta_count()).map(|j| a.beta(j)).collect();
        out.json(
            "gmp.json",
            &json!({
                "header": a.header(),
                "norm": a.norm(),
                "bandwidth_residual": a.bandwidth_residual(),
                "complete_rows": a.complete_rows(),
                "bits": a.bits(),
                "blocks": a.blocks(),
                "beta": betas,
                "lambda": (0..fam.lambda_count()).map(|n| fam.lambda(n)).collect::<Vec<_>>(),
                "lambda_identity_residual": fam.lambda_identity_residual(sys),
            }),
        )?;
        family = Some(fam);
    }

    let mut green = None;
    if cfg.runs(Stage::Potential) {
        stages.push(Stage::Potential.name());
        let e = set_ref.expect("checked above");
        let g = staged("potential", Green::with_nodes(e, cfg.nodes))?;
        let eq = g.equilibrium();
        let logs = staged("potential", g.log_lambdas(&poles))?;
        let mut dens = String::from("band,x,density\n");
        for (b, x, d) in eq.density_table(64) {
            let _ = writeln!(dens, "{b},{},{}", fmt_f64(x), fmt_f64(d));
        }
        out.write("density.csv", &dens)?;
        out.json(
            "potential.json",
            &json!({
                "set": e,
                "capacity": eq.capacity(),
                "robin": eq.robin(),
                "critical_points": eq.zeros(),
                "band_masses": eq.band_masses(),
                "potential_variation": eq.potential_variation(),
                "poles": poles,
                "log_lambda": logs,
                "lambda": logs.iter().map(|x| x.exp()).collect::<Vec<_>>(),
            }),
        )?;
        green = Some(g);
    }

    if cfg.runs(Stage::Discriminant) {
        stages.push(Stage::Discriminant.name());
        let e = set_ref.expect("checked above");
        if disc.is_none() {
            disc = Some(staged("discriminant", discriminant::fit_discriminant(e))?);
        }
        let d = disc.as_ref().expect("just set");
        let mut doc = json!({ "discriminant": d.to_json(), "residue_mismatch": d.residue_mismatch });
        if let Some(fam) = &family {
            if same_poles(&poles, &d.poles(), e.scale()) {
                let bj = staged("discriminant", discriminant::apply_to_gmp(d, fam))?;
                let magic = discriminant::magic_residual(&bj);
                let blocks = bj.v.len().saturating_sub(1);
                let cesaro = (blocks >= 2).then(|| regularity::block_cesaro(&bj, blocks - 1)).transpose();
                doc["block_jacobi"] = json!({
                    "blocks": bj.v.len(),
                    "det_mismatch": bj.det_mismatch,
                    "magic_residual": magic,
                    "block_cesaro": staged("discriminant", cesaro)?,
                    "truncation_range": bj.truncation_range(bj.w.len()),
                });
                doc["magic_solve"] = match magic_from_gmp(d, fam) {
                    Ok(s) => json!(s),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
        }
        out.json("discriminant.json", &doc)?;
    }

    let mut report = None;
    if cfg.runs(Stage::Regularity) {
        stages.push(Stage::Regularity.name());
        let sys = system.as_ref().expect("stage order");
        let g = green.as_ref().expect("stage order");
        let r = staged("regularity", regularity_report(cfg, sys, family.as_ref(), g))?;
        let mut csv = String::from("k,n,value,target\n");
        if let Some(k) = &r.kappa {
            for c in &k.classes {
                for (n, v) in c.root.index.iter().zip(&c.root.values) {
                    let _ = writeln!(csv, "{},{n},{},{}", c.k, fmt_f64(*v), fmt_f64(c.root.target));
                }
            }
        }
        out.write("kappa_roots.csv", &csv)?;
        out.json("regularity.json", &r)?;
        report = Some(r);
    }

    let summary = PipelineSummary {
        stages,
        artifacts: out.written.clone(),
        verdict: report.as_ref().map(|r| r.verdict),
    };
    out.json("summary.json", &summary)?;
    let summary = PipelineSummary { artifacts: out.written, ..summary };
    Ok(PipelineRun { measure: mu, set, poles, system, gmp: family, green, discriminant: disc, report, summary })
}

fn same_poles(a: &PoleSequence, b: &PoleSequence, scale: f64) -> bool {
    let close = |x: &ExtendedReal, y: &ExtendedReal| match (x, y) {
        (ExtendedReal::Infinity, ExtendedReal::Infinity) => true,
        (ExtendedReal::Finite(p), ExtendedReal::Finite(q)) => (p - q).abs() <= 1e-8 * scale,
        _ => false,
    };
    a.period() == b.period() && a.points().iter().all(|x| b.points().iter().any(|y| close(x, y)))
}

/// Periodic solve seeded with the last complete block of A, when ∞ is the last pole.
fn magic_from_gmp(d: &Discriminant, fam: &GmpFamily) -> Result<MagicSolution> {
    let a = &fam.matrix;
    if a.k() != a.poles().period() || a.block_count() == 0 {
        return Err(Error::InvalidInput("periodic solve needs ∞ as the last pole".into()));
    }
    let (p, q) = a.extract_pq(a.block_count())?;
    discriminant::magic_solve(d, &p, &q)
}

pub fn regularity_report(
    cfg: &PipelineConfig,
    sys: &OrthoSystem,
    family: Option<&GmpFamily>,
    green: &Green,
) -> Result<RegularityReport> {
    let poles = sys.poles();
    let period = poles.period();
    let lambdas: Vec<f64> = green.log_lambdas(poles)?.iter().map(|x| x.exp()).collect();
    let kappa = regularity::kappa_diagnostic(sys, &lambdas)?;
    let atomic = sys.measure().is_purely_atomic();

    let mut beta = None;
    let mut products: Vec<ProductSection> = Vec::new();
    if let Some(fam) = family {
        let a = &fam.matrix;
        let betas: Vec<f64> = (1..=a.beta_count()).filter_map(|j| a.beta(j)).collect();
        if !betas.is_empty() {
            beta = Some(regularity::beta_diagnostic(&betas, 1.0 / lambdas[a.k() - 1])?);
        }
        for k in 1..=period {
            let seq: Vec<f64> = (0..)
                .map(|j| j * period + (k % period))
                .map_while(|n| fam.lambda(n))
                .collect();
            if !seq.is_empty() {
                products.push(regularity::beta_diagnostic(&seq, 1.0 / lambdas[k - 1])?);
            }
        }
    }

    let (growth, zeros) = if atomic {
        (None, None)
    } else {
        let grid: Vec<Complex64> = match &cfg.z_grid {
            Some(g) => g.iter().map(|[x, y]| Complex64::new(*x, *y)).collect(),
            None => regularity::default_grid(green.set()),
        };
        let growth = regularity::green_growth_check(sys, green, &grid)?;
        let n = sys.n_max();
        let mut degrees = cfg.zero_degrees.clone().unwrap_or_else(|| vec![n / 4, n / 2, 3 * n / 4, n]);
        degrees.retain(|&d| d >= 1 && d <= n);
        degrees.dedup();
        let rho = green.rho(poles)?;
        let zeros = regularity::zero_dist_diagnostic(sys, &rho, &degrees)?;
        (Some(growth), Some(zeros))
    };
    Ok(RegularityReport::new(Some(kappa), beta, products, growth, zeros))
}
