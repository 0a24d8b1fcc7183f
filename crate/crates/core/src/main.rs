use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dirquant::error::{Error, Result};
use dirquant::gof::{rayleigh_test, test_null, NullModel};
use dirquant::io::{read_dataset, write_dataset, write_rows, GridName, GridSpec, RunConfig};
use dirquant::manova::{pvmf_test, q_statistic, PooledSample, ScoreKind};
use dirquant::models::{Family, MixtureParams, SineSkewParams, TangentVmfParams, VmfParams};
use dirquant::replicate::{self, Rows, Scale, Target};
use dirquant::rng::stream;
use dirquant::transport::{fit, fit_with_pole, EmpiricalTransport};
use dirquant::{GridShape, UnitVector};

#[derive(Parser)]
#[command(
    name = "dirquant",
    version,
    about = "Directional distribution functions, ranks, signs and tests on the sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FamilyName {
    Uniform,
    Vmf,
    TangentVmf,
    Mixture,
    SineSkew,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample and write it as CSV.
    Sample {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long)]
        n: usize,
        /// Ambient dimension (uniform only; other families take it from --theta).
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        kappa: Option<f64>,
        /// Location, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        /// Skewness direction in the tangent space (tangent_vmf), comma separated.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        beta_a: f64,
        #[arg(long, default_value_t = 1.0)]
        beta_b: f64,
        /// Sine-skew skewness.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Sine-skew angular location.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        location: f64,
        /// Mixture components as JSON: `[[weight, {"family": ...}], ...]`.
        #[arg(long)]
        components: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the empirical transport to a structured grid.
    Transport {
        #[arg(long)]
        input: PathBuf,
        /// `auto` or `n_R,n_S,n_0`.
        #[arg(long, default_value = "auto")]
        grid: String,
        /// Fixed pole, comma separated; estimated from the sample when absent.
        #[arg(long, allow_hyphen_values = true)]
        pole: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export quantile contours of a fitted transport.
    Contours {
        #[arg(long)]
        transport: PathBuf,
        #[arg(long, default_value = "5,20,29")]
        ranks: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cramér–von Mises test of uniformity.
    TestUnif {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rayleigh test of uniformity.
    Rayleigh {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank-score MANOVA (or pvMF) across two or more groups.
    Manova {
        /// One CSV per group.
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Score name, or `pvmf` for the pseudo-vMF test.
        #[arg(long)]
        score: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Replicate a simulation table or power curve.
    Replicate {
        /// table1, table2 or fig3-case1..4
        #[arg(long)]
        target: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_mc: Option<usize>,
    /// `auto` or `n_R,n_S,n_0`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(m) = self.n_mc {
            cfg.n_mc = m;
        }
        if let Some(g) = &self.grid {
            cfg.grid = parse_grid(g)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("'{t}' is not a number")))).collect()
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    if s.trim() == "auto" {
        return Ok(GridSpec::Named(GridName::Auto));
    }
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| invalid(format!("bad grid '{s}' (expected auto or n_R,n_S,n_0)")))
        })
        .collect::<Result<_>>()?;
    match parts[..] {
        [r, s_, z] => Ok(GridSpec::Shape(GridShape::new(r, s_, z)?)),
        _ => Err(invalid(format!("bad grid '{s}' (expected auto or n_R,n_S,n_0)"))),
    }
}

fn require<T>(v: Option<T>, flag: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| invalid(format!("--{flag} is required for family {family}")))
}

#[allow(clippy::too_many_arguments)]
fn build_family(
    family: FamilyName,
    d: Option<usize>,
    kappa: Option<f64>,
    theta: Option<&str>,
    mu: Option<&str>,
    beta: (f64, f64),
    lambda: Option<f64>,
    location: f64,
    components: Option<&str>,
) -> Result<Family> {
    let theta = theta.map(|t| parse_list(t).and_then(UnitVector::new)).transpose()?;
    match family {
        FamilyName::Uniform => {
            let d = d.or(theta.as_ref().map(UnitVector::dim)).unwrap_or(3);
            if d < 2 {
                return Err(invalid("--d must be at least 2"));
            }
            Ok(Family::Uniform { d })
        }
        FamilyName::Vmf => {
            Ok(Family::Vmf(VmfParams::new(require(theta, "theta", "vmf")?, require(kappa, "kappa", "vmf")?)?))
        }
        FamilyName::TangentVmf => {
            let mu = UnitVector::new(parse_list(require(mu, "mu", "tangent_vmf")?)?)?;
            Ok(Family::TangentVmf(TangentVmfParams::new(
                require(theta, "theta", "tangent_vmf")?,
                mu,
                require(kappa, "kappa", "tangent_vmf")?,
                beta.0,
                beta.1,
            )?))
        }
        FamilyName::SineSkew => Ok(Family::SineSkew(SineSkewParams::new(
            location,
            require(lambda, "lambda", "sine_skew")?,
            require(kappa, "kappa", "sine_skew")?,
        )?)),
        FamilyName::Mixture => {
            let text = require(components, "components", "mixture")?;
            let parts: Vec<(f64, Family)> =
                serde_json::from_str(text).map_err(|e| Error::Parse(format!("--components: {e}")))?;
            Ok(Family::Mixture(MixtureParams::new(parts)?))
        }
    }
}

/// Opens `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    println!("{text}");
    if let Some(p) = out {
        std::fs::write(p, format!("{text}\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { family, n, d, kappa, theta, mu, beta_a, beta_b, lambda, location, components, seed, out } => {
            let fam = build_family(
                family,
                d,
                kappa,
                theta.as_deref(),
                mu.as_deref(),
                (beta_a, beta_b),
                lambda,
                location,
                components.as_deref(),
            )?;
            if n == 0 {
                return Err(invalid("--n must be positive"));
            }
            let params = serde_json::to_string(&fam).map_err(|e| Error::Numerical(e.to_string()))?;
            eprintln!("family: {params}");
            eprintln!("n: {n}, seed: {seed}");
            let sample = fam.sample(n, &mut stream(seed, "sample", 0))?;
            write_dataset(sink(out.as_deref())?, &sample)
        }
        Command::Transport { input, grid, pole, seed, out } => {
            let sample = read_dataset(&input)?;
            let shape = parse_grid(&grid)?.resolve(sample.len(), sample[0].dim())?;
            let t = match pole {
                Some(p) => fit_with_pole(&sample, &UnitVector::new(parse_list(&p)?)?, shape)?,
                None => fit(&sample, shape, seed)?,
            };
            let text = serde_json::to_string(&t).map_err(|e| Error::Numerical(e.to_string()))?;
            let mut hist = BTreeMap::new();
            for r in t.ranks() {
                *hist.entry(r).or_insert(0usize) += 1;
            }
            eprintln!("total_cost: {}", t.total_cost());
            eprintln!("pole: {:?}", t.pole().as_slice());
            eprintln!("rank histogram: {hist:?}");
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{text}")?;
            w.flush()?;
            Ok(())
        }
        Command::Contours { transport, ranks, out } => {
            let text = std::fs::read_to_string(&transport)?;
            let t: EmpiricalTransport =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", transport.display())))?;
            let ranks: Vec<usize> = ranks
                .split(',')
                .map(|r| r.trim().parse().map_err(|_| invalid(format!("bad rank '{r}'"))))
                .collect::<Result<_>>()?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            let d = t.dim();
            let header: Vec<String> =
                (1..=d).map(|k| format!("x{k}")).chain(["rank".into(), "meridian_index".into()]).collect();
            let csv_err = |e: csv::Error| Error::Parse(e.to_string());
            w.write_record(&header).map_err(csv_err)?;
            for j in ranks {
                for i in t.contour_indices(j)? {
                    let mut rec: Vec<String> = t.sample()[i].as_slice().iter().map(f64::to_string).collect();
                    rec.push(j.to_string());
                    rec.push(t.meridian_index(i).map_or(String::new(), |m| m.to_string()));
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            w.flush()?;
            Ok(())
        }
        Command::TestUnif { input, run } => {
            let cfg = run.resolve()?;
            let sample = read_dataset(&input)?;
            let d = sample[0].dim();
            let shape = cfg.grid.resolve(sample.len(), d)?;
            let report = test_null(&sample, &NullModel::Uniform { d }, shape, cfg.alpha, cfg.n_mc, cfg.seed)?;
            emit_json(&report, cfg.output.as_deref())
        }
        Command::Rayleigh { input, alpha, out } => {
            let sample = read_dataset(&input)?;
            let report = rayleigh_test(&sample, alpha.unwrap_or(0.05))?;
            emit_json(&report, out.as_deref())
        }
        Command::Manova { inputs, score, run } => {
            let mut cfg = run.resolve()?;
            let groups = inputs.iter().map(|p| read_dataset(p)).collect::<Result<Vec<_>>>()?;
            let pooled = PooledSample::new(groups)?;
            let report = match score.as_deref() {
                Some("pvmf") => pvmf_test(&pooled, cfg.alpha)?,
                other => {
                    if let Some(s) = other {
                        cfg.score = s.parse::<ScoreKind>()?;
                    }
                    let shape = cfg.grid.resolve(pooled.len(), pooled.dim())?;
                    q_statistic(&pooled, cfg.score, shape, cfg.seed, cfg.alpha)?
                }
            };
            emit_json(&report, cfg.output.as_deref())
        }
        Command::Replicate { target, scale, seed, out } => {
            let target: Target = target.parse()?;
            let scale: Scale = scale.parse()?;
            eprintln!("{target}: {} replications", target.reps(scale));
            let w = sink(out.as_deref())?;
            match replicate::run(target, scale, seed)? {
                Rows::Table(rows) => write_rows(w, &rows),
                Rows::Power(rows) => write_rows(w, &rows),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
