//! `projlab` — command-line surface of the projection laboratory.
//!
//! Every pipeline is deterministic: identical inputs and `--seed` produce
//! byte-identical outputs. Exit codes: 0 success, 1 validation failure,
//! 2 usage error.

use clap::{Parser, Subcommand};
use projlab_core::dyadic::{generate_set, spread_constant, SetSpec};
use projlab_core::experiments::{exceptional_sweep, project_dim_experiment, ExperimentSpec};
use projlab_core::fields::{estimate_cinematic_constant, EvalOptions, FamilySpec, FunctionFamily};
use projlab_core::furstenberg::{
    incidence_lower_bound_check, induced_configuration, l2_energy, parallel_plane_configuration,
    Configuration,
};
use projlab_core::geometry::{make_builtin_chart, verify_nondegenerate, ChartSpec};
use projlab_core::intersect::{verify_intersection_bound, IntersectParams};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "projlab", version, about = "Desk-scale projection laboratory")]
struct Cli {
    /// Seed for every random choice in the pipeline.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature sweep of a chart; CSV columns (x.., kappa.., K_min, K_max).
    Curvature {
        /// Chart spec as inline JSON, e.g. '{"kind":"sphere_slice","c":0.6,"n":3}'.
        #[arg(long)]
        chart: String,
        #[arg(long, default_value_t = 17)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cinematic-family diagnostics of a family; JSON report.
    CinematicCheck {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 400)]
        pairs: usize,
        #[arg(long, default_value_t = 65)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Intersection-measure ratio table over pairs and scales; CSV.
    Intersect {
        #[arg(long)]
        family: PathBuf,
        /// 'all', 'first:N' or comma list 'i-j,k-l'.
        #[arg(long, default_value = "all")]
        pairs: String,
        /// Scale list: '2^-6..2^-10' or comma-separated values.
        #[arg(long)]
        delta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L² energy of the slab counting function; JSON report.
    L2Energy {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        delta: String,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Spread exponent of the family used in the budget.
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Configuration checks and generators.
    Furstenberg {
        #[command(subcommand)]
        action: FurstenbergAction,
    },
    /// Projection-dimension experiment; report.json plus tables/*.csv.
    ProjectDim {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Exceptional-direction sweep over a threshold grid; CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated thresholds, e.g. '0.1,0.3,0.45'.
        #[arg(long)]
        s_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a dyadic test set; binary format, optionally JSON.
    GenerateSet {
        /// cantor | uniform | random-spread | product is built via cantor k>1.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        s: Option<f64>,
        /// Spread exponent to measure on the output.
        #[arg(long)]
        measure_spread: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum FurstenbergAction {
    /// Validate a configuration directory and run the incidence bound.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a configuration directory.
    Generate {
        /// 'parallel' (sharpness construction) or 'induced' (sphere slice).
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 6)]
        level: u32,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Run(projlab_core::Error),
}

impl From<projlab_core::Error> for CliError {
    fn from(e: projlab_core::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(projlab_core::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(projlab_core::Error::Json(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Resolve an output path against `PROJLAB_OUT` when set.
fn out_path(opt: Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    let base = std::env::var_os("PROJLAB_OUT").map(PathBuf::from);
    match (opt, base) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p),
        (None, Some(dir)) => Some(dir.join(default_name)),
        (None, None) => None,
    }
}

fn emit(path: Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(p, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn parse_deltas(spec: &str) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let lo = parse_pow2(a)?;
        let hi = parse_pow2(b)?;
        let (m_lo, m_hi) = (level_of(lo)?, level_of(hi)?);
        let (m_lo, m_hi) = (m_lo.min(m_hi), m_lo.max(m_hi));
        return Ok((m_lo..=m_hi).map(|m| (m as f64).exp2().recip()).collect());
    }
    spec.split(',')
        .map(|tok| parse_pow2(tok))
        .collect::<Result<Vec<_>, _>>()
}

fn parse_pow2(tok: &str) -> Result<f64, CliError> {
    let tok = tok.trim();
    if let Some(rest) = tok.strip_prefix("2^") {
        let e: i32 = rest
            .parse()
            .map_err(|_| CliError::Usage(format!("bad exponent '{rest}'")))?;
        return Ok((e as f64).exp2());
    }
    tok.parse::<f64>()
        .map_err(|_| CliError::Usage(format!("bad scale '{tok}'")))
}

fn level_of(delta: f64) -> Result<u32, CliError> {
    projlab_core::intersect::dyadic_level(delta)
        .ok_or_else(|| CliError::Usage(format!("scale {delta} is not dyadic")))
}

fn parse_pairs(spec: &str, n: usize) -> Result<Vec<(usize, usize)>, CliError> {
    let all: Vec<(usize, usize)> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let spec = spec.trim();
    if spec == "all" {
        return Ok(all);
    }
    if let Some(count) = spec.strip_prefix("first:") {
        let c: usize = count
            .parse()
            .map_err(|_| CliError::Usage(format!("bad pair count '{count}'")))?;
        return Ok(all.into_iter().take(c).collect());
    }
    spec.split(',')
        .map(|tok| {
            let (a, b) = tok
                .split_once('-')
                .ok_or_else(|| CliError::Usage(format!("bad pair '{tok}'")))?;
            let i: usize =
                a.parse().map_err(|_| CliError::Usage(format!("bad index '{a}'")))?;
            let j: usize =
                b.parse().map_err(|_| CliError::Usage(format!("bad index '{b}'")))?;
            if i >= n || j >= n || i == j {
                return Err(CliError::Usage(format!("pair {i}-{j} out of range")));
            }
            Ok((i.min(j), i.max(j)))
        })
        .collect()
}

fn load_family(path: &Path) -> Result<FunctionFamily, CliError> {
    let spec: FamilySpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(FunctionFamily::from_spec(&spec)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Curvature { chart, grid, out } => {
            let spec: ChartSpec = serde_json::from_str(&chart)?;
            let chart = make_builtin_chart(&spec)?;
            let report = verify_nondegenerate(&chart, grid)?;
            let csv = report.to_csv();
            emit(out_path(out, "curvature.csv"), &csv)?;
            eprintln!(
                "nondegenerate: {} | kappa bound: {} | min sectional: {:?}",
                report.passes(),
                report.kappa_bound,
                report.min_sectional
            );
            if !report.passes() {
                return Err(CliError::Run(projlab_core::Error::InvalidFamily(
                    "chart fails the non-degeneracy sweep".into(),
                )));
            }
            Ok(())
        }
        Command::CinematicCheck { family, pairs, grid, out } => {
            let fam = load_family(&family)?;
            let report = estimate_cinematic_constant(
                &fam,
                pairs,
                cli.seed,
                &EvalOptions::with_nodes(grid),
            )?;
            let js = serde_json::to_string_pretty(&report)?;
            emit(out_path(out, "cinematic.json"), &js)?;
            if !report.pass() {
                return Err(CliError::Run(projlab_core::Error::InvalidFamily(
                    "family fails the cinematic gate".into(),
                )));
            }
            Ok(())
        }
        Command::Intersect { family, pairs, delta, out } => {
            let fam = load_family(&family)?;
            let pairs = parse_pairs(&pairs, fam.len())?;
            let deltas = parse_deltas(&delta)?;
            let (rows, skipped) =
                verify_intersection_bound(&fam, &pairs, &deltas, &IntersectParams::default())?;
            let mut csv = String::from("pair_id,delta,t,Delta,class,measure,ratio\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{}-{},{},{},{},{:?},{},{}\n",
                    r.pair.0, r.pair.1, r.delta, r.t, r.delta_fg, r.class, r.measure, r.ratio
                ));
            }
            for (i, j, d) in &skipped {
                csv.push_str(&format!("{i}-{j},{d},,,skipped,,\n"));
            }
            emit(out_path(out, "intersect.csv"), &csv)?;
            Ok(())
        }
        Command::L2Energy { family, delta, epsilon, t, out } => {
            let fam = load_family(&family)?;
            let deltas = parse_deltas(&delta)?;
            if deltas.len() != 1 {
                return Err(CliError::Usage("l2-energy takes a single scale".into()));
            }
            let report = l2_energy(&fam, deltas[0], None, epsilon, t)?;
            let js = serde_json::to_string_pretty(&report)?;
            emit(out_path(out, "l2_energy.json"), &js)?;
            Ok(())
        }
        Command::Furstenberg { action } => match action {
            FurstenbergAction::Check { config, epsilon, out } => {
                let cfg = Configuration::load_dir(&config)?;
                let report = incidence_lower_bound_check(&cfg, epsilon)?;
                let js = serde_json::to_string_pretty(&serde_json::json!({
                    "incidence": report,
                    "validation": cfg.validation,
                }))?;
                emit(out_path(out, "furstenberg.json"), &js)?;
                if !report.pass {
                    return Err(CliError::Run(projlab_core::Error::InvalidFamily(
                        "incidence lower bound violated".into(),
                    )));
                }
                Ok(())
            }
            FurstenbergAction::Generate { kind, level, s, t, epsilon, out } => {
                let cfg = match kind.as_str() {
                    "parallel" => parallel_plane_configuration(level, s, t, epsilon, 2, cli.seed)?,
                    "induced" => {
                        let chart = Arc::new(make_builtin_chart(&ChartSpec::SphereSlice {
                            c: 0.5,
                            n: 3,
                        })?);
                        induced_configuration(chart, level, s, t, epsilon, cli.seed)?
                    }
                    other => {
                        return Err(CliError::Usage(format!(
                            "unknown configuration kind '{other}'"
                        )))
                    }
                };
                cfg.save_dir(&out)?;
                eprintln!(
                    "configuration: {} members, M = {}, family spread {:.3}",
                    cfg.family.len(),
                    cfg.m_card,
                    cfg.validation.family_spread
                );
                Ok(())
            }
        },
        Command::ProjectDim { spec, out_dir } => {
            let spec: ExperimentSpec = serde_json::from_str(&std::fs::read_to_string(spec)?)?;
            let chart = make_builtin_chart(&spec.chart)?;
            let mut spec = spec;
            if spec.seed == 0 {
                spec.seed = cli.seed;
            }
            let result = project_dim_experiment(&chart, &spec)?;
            let dir = out_path(out_dir, "project_dim").unwrap_or_else(|| PathBuf::from("project_dim"));
            std::fs::create_dir_all(dir.join("tables"))?;
            std::fs::write(
                dir.join("report.json"),
                serde_json::to_string_pretty(&result)?,
            )?;
            let mut csv = String::from("direction,slope,band_lo,band_hi\n");
            for (i, d) in result.directions.iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    d.estimate.slope, d.estimate.band.0, d.estimate.band.1
                ));
            }
            std::fs::write(dir.join("tables").join("slopes.csv"), csv)?;
            eprintln!(
                "slopes: min {:.4} median {:.4} max {:.4}",
                result.slope_min, result.slope_median, result.slope_max
            );
            Ok(())
        }
        Command::Sweep { spec, s_grid, out } => {
            let spec: ExperimentSpec = serde_json::from_str(&std::fs::read_to_string(spec)?)?;
            let chart = make_builtin_chart(&spec.chart)?;
            let mut spec = spec;
            if spec.seed == 0 {
                spec.seed = cli.seed;
            }
            let grid: Vec<f64> = s_grid
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad threshold '{tok}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (_experiment, rows) = exceptional_sweep(&chart, &spec, &grid)?;
            let mut csv = String::from("s,fraction,exceptional_dim,reference\n");
            for r in &rows {
                let dim = r
                    .exceptional_dim
                    .map_or(String::new(), |d| d.to_string());
                csv.push_str(&format!("{},{},{},{}\n", r.s, r.fraction, dim, r.reference));
            }
            emit(out_path(out, "sweep.csv"), &csv)?;
            Ok(())
        }
        Command::GenerateSet { kind, ratio, depth, m, k, s, measure_spread, out, json } => {
            let spec = match kind.as_str() {
                "cantor" => SetSpec::Cantor {
                    ratio: ratio.ok_or_else(|| CliError::Usage("cantor needs --ratio".into()))?,
                    depth: depth.ok_or_else(|| CliError::Usage("cantor needs --depth".into()))?,
                    k,
                },
                "uniform" => SetSpec::Uniform {
                    m: m.ok_or_else(|| CliError::Usage("uniform needs --m".into()))?,
                    k,
                },
                "random-spread" => SetSpec::RandomSpread {
                    s: s.ok_or_else(|| CliError::Usage("random-spread needs --s".into()))?,
                    m: m.ok_or_else(|| CliError::Usage("random-spread needs --m".into()))?,
                    k,
                    seed: cli.seed,
                },
                other => return Err(CliError::Usage(format!("unknown set kind '{other}'"))),
            };
            let set = generate_set(&spec)?;
            let path = out_path(Some(out), "set.bin").expect("explicit path");
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            if json {
                std::fs::write(&path, serde_json::to_string_pretty(&set.to_json())?)?;
            } else {
                let mut buf = Vec::new();
                set.write_binary(&mut buf)?;
                std::fs::write(&path, buf)?;
            }
            eprintln!("{} cells at level {}", set.cardinality(), set.level());
            if let Some(exp) = measure_spread {
                let rep = spread_constant(&set, exp);
                eprintln!("spread constant at {exp}: {:.4}", rep.constant);
            }
            Ok(())
        }
    }
}
