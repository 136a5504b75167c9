use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use wigglehair::cauchy::PolyaSzego;
use wigglehair::dynamics::calibrate;
use wigglehair::export::{boundary_csv, fmt_f64, hair_csv, to_json, write_file};
use wigglehair::hair::{default_params, nondiff_report, Tracer};
use wigglehair::render::{render, RenderJob, Window};
use wigglehair::tract::dump_boundary;
use wigglehair::verify::{self, Suite};
use wigglehair::{Config, DisjointTypeModel, Engine, ExternalAddress, C64};

#[derive(Parser)]
#[command(name = "wigglehair", version, about = "Entire functions with wiggling hairs: evaluation, dynamics, certificates and images")]
struct Cli {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Calibrated model from `calibrate`; calibrated on the fly when absent.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tract geometry.
    Tract {
        #[command(subcommand)]
        command: TractCommand,
    },
    /// Evaluate f (or the classical oracle) at a point; prints JSON.
    Eval(EvalArgs),
    /// Choose lambda and verify the disjoint-type conditions.
    Calibrate(CalibrateArgs),
    /// Trace a hair as CSV.
    Hair(HairArgs),
    /// Build a triangle certificate as JSON.
    Certify(CertifyArgs),
    /// Escape/attraction image as PPM with a JSON sidecar.
    Render(RenderArgs),
    /// Run the invariant suite; exit code 1 on any failure.
    Verify(VerifyArgs),
    /// Serialize a model, hair or certificate.
    Export(ExportArgs),
}

#[derive(Subcommand)]
enum TractCommand {
    /// Boundary samples of W as CSV (t, re, im, tangent_re, tangent_im).
    DumpBoundary {
        #[arg(long, default_value_t = 6.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, allow_negative_numbers = true)]
    re: f64,
    #[arg(long, allow_negative_numbers = true)]
    im: f64,
    /// Report log f with its relative error.
    #[arg(long)]
    log_space: bool,
    /// Also evaluate f'.
    #[arg(long)]
    derivative: bool,
    #[arg(long, value_enum)]
    oracle: Option<Oracle>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    /// Half-strip tract with density exp(exp z).
    Ps,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    k_target: Option<f64>,
    #[arg(long)]
    r_log: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HairArgs {
    #[arg(long, default_value = "(0)")]
    address: ExternalAddress,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Number of base-ray parameters (0 and log-spaced up to max_param).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, default_value = "(0)")]
    address: ExternalAddress,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 6)]
    levels: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print the summary statement.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// `re_min,re_max,im_min,im_max`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<Window>,
    /// `WIDTHxHEIGHT`.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    /// Window in log z coordinates (the default).
    #[arg(long, conflicts_with = "plane")]
    log_coords: bool,
    /// Window in z coordinates.
    #[arg(long)]
    plane: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    escape_radius: Option<f64>,
    /// Hair addresses to draw; repeatable.
    #[arg(long)]
    overlay: Vec<ExternalAddress>,
    #[arg(long)]
    out: PathBuf,
    /// Sidecar path; defaults to `<out>.json`.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip model calibration and run only model-free checks.
    #[arg(long)]
    no_model: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(value_enum)]
    what: Artifact,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value = "(0)")]
    address: ExternalAddress,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 6)]
    levels: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Artifact {
    Model,
    Hair,
    Cert,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_window(s: &str) -> Result<Window, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    match v[..] {
        [re_min, re_max, im_min, im_max] => Ok(Window { re_min, re_max, im_min, im_max }),
        _ => Err("expected re_min,re_max,im_min,im_max".into()),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    Ok((w.parse().map_err(|e| format!("{e}"))?, h.parse().map_err(|e| format!("{e}"))?))
}

/// A failed check, as opposed to an error.
#[derive(Debug)]
struct CheckFailure(String);

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailure {}

/// Arguments that parse but are rejected on validation.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

struct Session {
    config: Config,
    model_path: Option<PathBuf>,
    seed: u64,
}

impl Session {
    fn model(&self) -> Result<DisjointTypeModel> {
        match &self.model_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing model {}", p.display()))
            }
            None => {
                info!("calibrating model (seed {})", self.seed);
                Ok(calibrate(&self.config, self.seed)?)
            }
        }
    }

    fn engine(&self, model: Option<&DisjointTypeModel>) -> Result<Engine> {
        Ok(match model {
            Some(m) => m.engine()?,
            None => Engine::new(self.config.tract, self.config.quadrature)?,
        })
    }

    fn params(&self, samples: Option<usize>) -> Vec<f64> {
        default_params(samples.unwrap_or(self.config.hair.samples), self.config.hair.max_param)
    }
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, contents.as_bytes()).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn complex_json(z: C64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    let s = Session { config, model_path: cli.model.clone(), seed: cli.seed };

    match cli.command {
        Command::Tract { command: TractCommand::DumpBoundary { tmax, step, out } } => {
            let samples = dump_boundary(&s.config.tract, tmax, step)?;
            emit(out.as_deref(), &boundary_csv(&samples))
        }
        Command::Eval(a) => {
            let z = C64::new(a.re, a.im);
            let mut doc = serde_json::Map::new();
            doc.insert("z".into(), complex_json(z));
            match a.oracle {
                Some(Oracle::Ps) => {
                    let ps = PolyaSzego::new(&s.config.quadrature)?;
                    doc.insert("f".into(), serde_json::to_value(ps.eval(z)?)?);
                    doc.insert("f_tilde_bound".into(), json!(ps.bound()));
                }
                None => {
                    let e = s.engine(None)?;
                    if a.log_space {
                        let (l, rel) = e.log_f(z)?;
                        doc.insert("log_f".into(), complex_json(l));
                        doc.insert("log_error".into(), json!(rel));
                    } else {
                        doc.insert("f".into(), serde_json::to_value(e.eval_f(z)?)?);
                    }
                    if a.derivative {
                        doc.insert("f_prime".into(), serde_json::to_value(e.eval_f_prime(z)?)?);
                    }
                }
            }
            emit(None, &to_json(&doc)?)
        }
        Command::Calibrate(a) => {
            let mut config = s.config;
            if let Some(k) = a.k_target {
                config.dynamics.k_target = k;
            }
            if let Some(r) = a.r_log {
                config.dynamics.r_log = r;
            }
            let model = calibrate(&config, s.seed)?;
            emit(a.out.as_deref(), &to_json(&model)?)
        }
        Command::Hair(a) => {
            let model = s.model()?;
            let tracer = Tracer::new(&model, &s.config.hair);
            let poly = tracer.trace_hair(&a.address, a.depth, &s.params(a.samples))?;
            emit(a.out.as_deref(), &hair_csv(&poly))
        }
        Command::Certify(a) => {
            let model = s.model()?;
            let tracer = Tracer::new(&model, &s.config.hair);
            let cert = tracer.build_certificate(&a.address, a.param, a.levels)?;
            let checked = nondiff_report(&cert);
            emit(a.out.as_deref(), &to_json(&cert)?)?;
            match checked {
                Ok(r) => {
                    if a.report {
                        eprintln!("{}", r.statement);
                    }
                    Ok(())
                }
                Err(e) => Err(CheckFailure(format!("certificate check failed: {e}")).into()),
            }
        }
        Command::Render(a) => {
            let model = s.model()?;
            let engine = s.engine(Some(&model))?;
            let mut job = RenderJob::default();
            if let Some(w) = a.window {
                job.window = w;
            }
            if let Some((w, h)) = a.size {
                job.width = w;
                job.height = h;
            }
            if a.plane {
                job.log_coords = false;
            } else if a.log_coords {
                job.log_coords = true;
            }
            if let Some(m) = a.max_iter {
                job.max_iter = m;
            }
            if let Some(r) = a.escape_radius {
                job.escape_radius = r;
            }
            job.overlay_hairs = a.overlay;
            job.overlay_samples = s.config.hair.samples;
            job.validate(&model).map_err(|e| Usage(format!("invalid render job: {e}")))?;
            let r = render(&model, &engine, &job, &s.config.hair)?;
            write_file(&a.out, &r.image.to_ppm()).with_context(|| format!("writing {}", a.out.display()))?;
            let sidecar = a.stats.unwrap_or_else(|| {
                let mut p = a.out.clone().into_os_string();
                p.push(".json");
                PathBuf::from(p)
            });
            let doc = json!({ "job": job, "stats": r.stats, "xi": complex_json(model.xi) });
            write_file(&sidecar, to_json(&doc)?.as_bytes()).with_context(|| format!("writing {}", sidecar.display()))
        }
        Command::Verify(a) => {
            let model = if a.no_model { None } else { Some(s.model()?) };
            let report = verify::run(&s.config, model.as_ref(), a.suite, s.seed);
            emit(a.out.as_deref(), &to_json(&report)?)?;
            for c in &report.checks {
                eprintln!("{} {} measured {:e} bound {:e}", if c.passed { "PASS" } else if c.enforced { "FAIL" } else { "INFO" }, c.id, c.measured, c.bound);
            }
            if report.passed {
                Ok(())
            } else {
                let ids: Vec<&str> = report.failures().map(|c| c.id.as_str()).collect();
                Err(CheckFailure(format!("failed checks: {}", ids.join(", "))).into())
            }
        }
        Command::Export(a) => export(&s, a),
    }
}

fn export(s: &Session, a: ExportArgs) -> Result<()> {
    let model = s.model()?;
    let text = match (a.what, a.format) {
        (Artifact::Model, Format::Json) => to_json(&model)?,
        (Artifact::Model, Format::Csv) => {
            let mut out = String::from("key,value\n");
            for (k, v) in [
                ("log_lambda", model.log_lambda),
                ("r_log", model.r_log),
                ("k_expansion", model.k_expansion),
                ("log_k_expansion", model.log_k_expansion),
                ("xi_re", model.xi.re),
                ("xi_im", model.xi.im),
                ("circle_log_max", model.circle_log_max),
                ("disc_log_max", model.disc_log_max),
                ("grid_min_log_f_prime", model.grid_min_log_f_prime),
                ("grid_min_re", model.grid_min_re),
                ("fixed_point_log_residual", model.fixed_point_log_residual),
                ("fixed_point_log_multiplier", model.fixed_point_log_multiplier),
            ] {
                out.push_str(&format!("{k},{}\n", fmt_f64(v)));
            }
            out
        }
        (Artifact::Hair, fmt) => {
            let poly = Tracer::new(&model, &s.config.hair).trace_hair(&a.address, a.depth, &s.params(a.samples))?;
            if fmt == Format::Csv {
                hair_csv(&poly)
            } else {
                to_json(&poly)?
            }
        }
        (Artifact::Cert, Format::Json) => to_json(&Tracer::new(&model, &s.config.hair).build_certificate(&a.address, a.param, a.levels)?)?,
        (Artifact::Cert, Format::Csv) => return Err(Usage("certificates export as JSON only".into()).into()),
    };
    emit(a.out.as_deref(), &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
