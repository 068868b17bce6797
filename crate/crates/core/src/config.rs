//! JSON configuration documents for measures, pipelines and Cesàro runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{FiniteGapSet, Measure, PoleSequence};
use crate::moebius::ExtendedReal;
use crate::orf::PrecisionPolicy;
use crate::potential;
use crate::regularity::{JacobiMatrix, TorusSampleSet};

pub const SCHEMA_VERSION: u32 = 1;

/// Size limits that keep a malformed document from exhausting memory.
pub const MAX_N: usize = 10_000;
pub const MAX_NODES: usize = 1 << 20;
pub const MAX_JACOBI_LENGTH: usize = 10_000_000;
pub const MAX_TORUS_SAMPLES: usize = 4096;
/// Nested measure files deeper than this are rejected.
const MAX_DEPTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// dx/(π√((x−α)(β−x))) on [α, β].
    Arcsine { interval: [f64; 2] },
    /// Equilibrium-type density with the given interior zeros, one per gap.
    Chebyshev { bands: FiniteGapSet, zeros: Vec<f64> },
    /// Equilibrium measure of the bands, zeros solved for.
    Equilibrium { bands: FiniteGapSet },
    Atomic { atoms: Vec<(ExtendedReal, f64)> },
    Mixture { parts: Vec<(f64, MeasureSpec)> },
    /// Another JSON measure document, relative to the referring file.
    File { path: PathBuf },
}

impl MeasureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("measure: {e}")))
    }

    pub fn build(&self, base: &Path, nodes: usize) -> Result<Measure> {
        self.build_at(base, nodes, 0)
    }

    fn build_at(&self, base: &Path, nodes: usize, depth: usize) -> Result<Measure> {
        if depth > MAX_DEPTH {
            return Err(Error::Config("measure files nest too deeply".into()));
        }
        let mu = match self {
            MeasureSpec::Arcsine { interval: [a, b] } => Measure::arcsine(*a, *b)?,
            MeasureSpec::Chebyshev { bands, zeros } => Measure::chebyshev(bands, zeros)?,
            MeasureSpec::Equilibrium { bands } => potential::equilibrium(bands, nodes)?.measure().clone(),
            MeasureSpec::Atomic { atoms } => Measure::atomic(atoms)?,
            MeasureSpec::Mixture { parts } => {
                let built: Vec<(f64, Measure)> =
                    parts.iter().map(|(w, s)| Ok((*w, s.build_at(base, nodes, depth + 1)?))).collect::<Result<_>>()?;
                let refs: Vec<(f64, &Measure)> = built.iter().map(|(w, m)| (*w, m)).collect();
                Measure::mixture(&refs)?
            }
            MeasureSpec::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::Config(format!("measure file {}: {e}", full.display())))?;
                let inner = MeasureSpec::from_json(&text)?;
                let dir = full.parent().map(Path::to_path_buf).unwrap_or_default();
                inner.build_at(&dir, nodes, depth + 1)?
            }
        };
        Ok(if mu.is_purely_atomic() { mu } else { mu.with_nodes(nodes) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolesSpec {
    /// "ahlfors": the Ahlfors zeros of E followed by ∞.
    Named(String),
    List(PoleSequence),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Orthonormalize,
    Gmp,
    Potential,
    Discriminant,
    Regularity,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Orthonormalize => "orthonormalize",
            Stage::Gmp => "gmp",
            Stage::Potential => "potential",
            Stage::Discriminant => "discriminant",
            Stage::Regularity => "regularity",
        }
    }

    fn requires(&self) -> &'static [Stage] {
        match self {
            Stage::Orthonormalize | Stage::Potential => &[],
            Stage::Gmp => &[Stage::Orthonormalize],
            Stage::Discriminant => &[Stage::Potential],
            Stage::Regularity => &[Stage::Orthonormalize, Stage::Potential],
        }
    }

    pub const ALL: [Stage; 5] = [Stage::Orthonormalize, Stage::Gmp, Stage::Potential, Stage::Discriminant, Stage::Regularity];
}

fn default_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn default_nodes() -> usize {
    crate::measure::DEFAULT_NODES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub measure: MeasureSpec,
    /// E; defaults to the essential support of the measure.
    #[serde(default)]
    pub set: Option<FiniteGapSet>,
    pub poles: PolesSpec,
    pub n_max: usize,
    #[serde(default)]
    pub precision: PrecisionPolicy,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Off-real points for the growth check; a default grid when absent.
    #[serde(default)]
    pub z_grid: Option<Vec<[f64; 2]>>,
    /// Degrees whose zeros are compared with ρ_{E,C}.
    #[serde(default)]
    pub zero_degrees: Option<Vec<usize>>,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative file references resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(1..=MAX_N).contains(&self.n_max) {
            return Err(Error::Config(format!("n_max must be in 1..={MAX_N}")));
        }
        if !(8..=MAX_NODES).contains(&self.nodes) {
            return Err(Error::Config(format!("nodes must be in 8..={MAX_NODES}")));
        }
        self.precision.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let PolesSpec::Named(name) = &self.poles {
            if name != "ahlfors" {
                return Err(Error::Config(format!("unknown pole sequence {name:?}; use a list or \"ahlfors\"")));
            }
        }
        if let Some(grid) = &self.z_grid {
            if grid.iter().any(|[x, y]| !x.is_finite() || !y.is_finite() || *y == 0.0) {
                return Err(Error::Config("z_grid points must be finite and off the real line".into()));
            }
        }
        for s in &self.stages {
            for dep in s.requires() {
                if !self.stages.contains(dep) {
                    return Err(Error::Config(format!("stage {} requires stage {}", s.name(), dep.name())));
                }
            }
        }
        Ok(())
    }

    pub fn runs(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JacobiSpec {
    Explicit { a: Vec<f64>, b: Vec<f64> },
    Free { length: usize },
    /// a_1 = √2, a_n = 1, b = 0.
    Arcsine { length: usize },
    /// a_m = 1 + 1/m, b = 0.
    HarmonicPerturbation { length: usize },
    /// a_m = e^{−√m}, b = 0.
    SqrtDecay { length: usize },
}

impl JacobiSpec {
    pub fn length(&self) -> usize {
        match self {
            JacobiSpec::Explicit { a, .. } => a.len(),
            JacobiSpec::Free { length }
            | JacobiSpec::Arcsine { length }
            | JacobiSpec::HarmonicPerturbation { length }
            | JacobiSpec::SqrtDecay { length } => *length,
        }
    }

    pub fn build(&self) -> Result<JacobiMatrix> {
        match self {
            JacobiSpec::Explicit { a, b } => JacobiMatrix::new(a.clone(), b.clone()),
            JacobiSpec::Free { length } => Ok(JacobiMatrix::free(*length)),
            JacobiSpec::Arcsine { length } => {
                JacobiMatrix::from_fn(*length, |m| if m == 1 { 2f64.sqrt() } else { 1.0 }, |_| 0.0)
            }
            JacobiSpec::HarmonicPerturbation { length } => {
                JacobiMatrix::from_fn(*length, |m| 1.0 + 1.0 / m as f64, |_| 0.0)
            }
            JacobiSpec::SqrtDecay { length } => JacobiMatrix::from_fn(*length, |m| (-(m as f64).sqrt()).exp(), |_| 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TorusSpec {
    FreeType { interval: [f64; 2] },
    TwoBandSymmetric { bands: FiniteGapSet, samples: usize },
    Samples { samples: Vec<JacobiMatrix>, hull: [f64; 2] },
}

impl TorusSpec {
    pub fn sample_count(&self) -> usize {
        match self {
            TorusSpec::FreeType { .. } => 1,
            TorusSpec::TwoBandSymmetric { samples, .. } => *samples,
            TorusSpec::Samples { samples, .. } => samples.len(),
        }
    }

    pub fn build(&self) -> Result<TorusSampleSet> {
        match self {
            TorusSpec::FreeType { interval: [a, b] } => TorusSampleSet::free_type(*a, *b),
            TorusSpec::TwoBandSymmetric { bands, samples } => TorusSampleSet::two_band_symmetric(bands, *samples),
            TorusSpec::Samples { samples, hull } => TorusSampleSet::new(samples.clone(), (hull[0], hull[1]), "input samples"),
        }
    }
}

fn default_horizon() -> usize {
    crate::regularity::NEVAI_HORIZON
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CesaroConfig {
    pub schema_version: u32,
    pub jacobi: JacobiSpec,
    pub torus: TorusSpec,
    /// Averaging lengths N.
    pub n: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

impl CesaroConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CesaroConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema_version {} is not supported", cfg.schema_version)));
        }
        if cfg.n.is_empty() || cfg.n.contains(&0) || cfg.horizon == 0 {
            return Err(Error::Config("n must be a nonempty list of positive lengths and horizon ≥ 1".into()));
        }
        let too_long = cfg.n.iter().any(|&n| n > MAX_JACOBI_LENGTH)
            || cfg.horizon > MAX_JACOBI_LENGTH
            || cfg.jacobi.length() > MAX_JACOBI_LENGTH;
        if too_long {
            return Err(Error::Config(format!("lengths are limited to {MAX_JACOBI_LENGTH}")));
        }
        if cfg.torus.sample_count() > MAX_TORUS_SAMPLES {
            return Err(Error::Config(format!("at most {MAX_TORUS_SAMPLES} torus samples")));
        }
        Ok(cfg)
    }
}

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
