use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ratreg::config::{CesaroConfig, PipelineConfig, PolesSpec, Stage};
use ratreg::orf::PrecisionPolicy;
use ratreg::regularity;
use ratreg::{Error, ExtendedReal};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ratreg", version, about = "Orthonormal rational functions, GMP matrices and regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build τ_0..τ_N and write κ_n and coefficients.
    Orthonormalize(Common),
    /// Build the GMP matrix and its resolvents.
    Gmp(Common),
    /// Equilibrium measure, capacity, Green function constants.
    Potential(Common),
    /// Fit the rational discriminant of E.
    Discriminant(Common),
    /// Regularity report for the configured measure.
    Regularity(Common),
    /// Cesàro–Nevai statistics of a Jacobi matrix.
    Cesaro(Common),
    /// Run the stages listed in the config.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n_max: Option<usize>,
    /// Fixed working precision instead of the escalation ladder.
    #[arg(long)]
    precision_bits: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
}

fn out_dir(c: &Common, from_config: Option<&Path>, base: &Path) -> PathBuf {
    c.out
        .clone()
        .or_else(|| from_config.map(|p| base.join(p)))
        .unwrap_or_else(|| PathBuf::from("ratreg-out"))
}

type StagePick = fn(&PipelineConfig) -> Option<Vec<Stage>>;

fn load(c: &Common, pick: StagePick) -> Result<(PipelineConfig, PathBuf), Error> {
    let mut cfg = PipelineConfig::from_file(&c.config)?;
    if let Some(n) = c.n_max {
        cfg.n_max = n;
    }
    if let Some(b) = c.precision_bits {
        cfg.precision = PrecisionPolicy::fixed(b);
    }
    if let Some(k) = c.nodes {
        cfg.nodes = k;
    }
    if let Some(s) = pick(&cfg) {
        cfg.stages = s;
    }
    cfg.validate()?;
    let out = out_dir(c, cfg.output_dir.as_deref(), &cfg.base_dir);
    Ok((cfg, out))
}

fn run_pipeline(c: &Common, pick: StagePick) -> Result<(serde_json::Value, PathBuf), Error> {
    let (cfg, out) = load(c, pick)?;
    let run = ratreg::pipeline::run(&cfg, &out)?;
    Ok((serde_json::to_value(&run.summary)?, out))
}

fn run_cesaro(c: &Common) -> Result<(serde_json::Value, PathBuf), Error> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| Error::Config(format!("{}: {e}", c.config.display())))?;
    let mut cfg = CesaroConfig::from_json(&text)?;
    if let Some(n) = c.n_max {
        cfg.n = vec![n];
    }
    let base = c.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = out_dir(c, None, &base);
    let j = cfg.jacobi.build()?;
    let torus = cfg.torus.build()?;
    let stats = cfg
        .n
        .iter()
        .map(|&n| regularity::cesaro_stat(&j, &torus, n, cfg.horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let doc = json!({ "horizon": cfg.horizon, "torus": torus.method, "stats": stats });
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("cesaro.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok((doc, out))
}

/// β needs the GMP matrix, which needs ∞ among the poles.
fn regularity_stages(cfg: &PipelineConfig) -> Option<Vec<Stage>> {
    let with_gmp = match &cfg.poles {
        PolesSpec::Named(_) => true,
        PolesSpec::List(p) => p.points().contains(&ExtendedReal::Infinity),
    };
    let mut s = vec![Stage::Orthonormalize, Stage::Potential, Stage::Regularity];
    if with_gmp {
        s.push(Stage::Gmp);
    }
    Some(s)
}

fn error_record(e: &Error) -> serde_json::Value {
    let stage = match e {
        Error::Stage { stage, .. } => Some(stage.clone()),
        _ => None,
    };
    json!({ "error": e.kind(), "stage": stage, "message": e.to_string(), "exit_code": e.exit_code() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.command {
        Command::Orthonormalize(c) => (c, run_pipeline(c, |_| Some(vec![Stage::Orthonormalize]))),
        Command::Gmp(c) => (c, run_pipeline(c, |_| Some(vec![Stage::Orthonormalize, Stage::Gmp]))),
        Command::Potential(c) => (c, run_pipeline(c, |_| Some(vec![Stage::Potential]))),
        Command::Discriminant(c) => (c, run_pipeline(c, |_| Some(vec![Stage::Potential, Stage::Discriminant]))),
        Command::Regularity(c) => (c, run_pipeline(c, regularity_stages)),
        Command::Cesaro(c) => (c, run_cesaro(c)),
        Command::Pipeline(c) => (c, run_pipeline(c, |_| None)),
    };
    match result {
        Ok((summary, _)) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = error_record(&e);
            let text = serde_json::to_string_pretty(&record).unwrap_or_default();
            eprintln!("{text}");
            if let Some(dir) = &common.out {
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), text + "\n");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
