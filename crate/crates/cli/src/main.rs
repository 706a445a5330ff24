mod commands;
mod config;
mod expr;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use causet_qft::discrete::KVariant;
use causet_qft::generators::Region;
use causet_qft::interacting::Orientation;
use clap::{Args, Parser, Subcommand};

use config::{Command, ExperimentConfig, InteractionConfig, OperatorChoice, OrdersConfig, PastChoice, SprinkleConfig, StateChoice};

#[derive(Parser)]
#[command(name = "causet-qft", version, about = "Scalar field theory on finite causal sets")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Causal-set JSON file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Write JSON here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Directory for CSV projections.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Diamond lattice as ROWSxCOLS.
    #[arg(long, global = true)]
    lattice: Option<String>,
    /// Lattice length scale.
    #[arg(long, global = true)]
    ell: Option<f64>,
    /// Sprinkle into a region: `diamond:T` or `rect:T,X`.
    #[arg(long, global = true)]
    region: Option<String>,
    /// Sprinkling density.
    #[arg(long, global = true)]
    density: Option<f64>,
    /// Retarded Green function file (a `green` output) used instead of an operator.
    #[arg(long, global = true)]
    green: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    operator: Option<OperatorChoice>,
    /// Boundary depth of the Sorkin operator, or the infinity depth for `analyze`.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true, value_parser = parse_kvariant)]
    kvariant: Option<KVariant>,
    #[arg(long, global = true, value_enum)]
    preferred_past: Option<PastChoice>,
    #[arg(long, global = true)]
    olambda: Option<u32>,
    #[arg(long, global = true)]
    ohbar: Option<i32>,
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a lattice or a sprinkling.
    Gen,
    /// Layers, infinities and preferred pasts.
    Analyze,
    /// Wave operator, source matrix and Green functions.
    Green,
    /// Spectrum of iE and kernel diagnostics.
    Spectrum,
    /// SJ two-point function and its axiom residuals.
    Sj,
    /// Continuum-limit residual table.
    Converge {
        /// Separable field in u and v, e.g. "sin(u)*sin(v)".
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        points_per_side: Option<usize>,
        #[arg(long)]
        delta0: Option<f64>,
        /// Length dimension of the field.
        #[arg(long, allow_hyphen_values = true)]
        dim: Option<i32>,
    },
    /// Free quasifree n-point functions.
    Correlate {
        /// Elements whose field values are correlated, comma separated.
        #[arg(long, value_delimiter = ',')]
        points: Vec<usize>,
        #[arg(long, value_enum)]
        state: Option<StateChoice>,
    },
    /// Interacting correlators.
    Interact {
        #[arg(long, value_delimiter = ',')]
        points: Vec<usize>,
        #[arg(long, value_enum)]
        state: Option<StateChoice>,
        /// Powers in the local potential, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "4")]
        powers: Vec<usize>,
        /// One coupling for all bulk elements, or one per element.
        #[arg(long, value_delimiter = ',', default_value = "1", allow_hyphen_values = true)]
        couplings: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, value_parser = parse_orientation)]
        orientation: Option<Orientation>,
    },
    /// Relative Cauchy evolution for one subdivided lattice cell.
    Rce {
        /// Cell to subdivide as I,J.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        subdivide: Vec<usize>,
    },
    /// Check a causal-set file.
    Validate { path: Option<PathBuf> },
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_kvariant(s: &str) -> Result<KVariant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown K variant '{s}' (half, dsx, trap)"))
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown orientation '{s}' (retarded, advanced)"))
}

fn parse_region(s: &str) -> Result<Region> {
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(|a| a.trim().parse::<f64>()).collect::<Result<_, _>>().with_context(|| format!("bad region '{s}'"))?
    };
    Ok(match (kind, nums.as_slice()) {
        ("diamond", []) => Region::Diamond { bottom: [0.0, 0.0], top: [1.0, 0.0] },
        ("diamond", [t]) => Region::Diamond { bottom: [0.0, 0.0], top: [*t, 0.0] },
        ("rect", [t, x]) => Region::Rectangle { t0: 0.0, t1: *t, x0: 0.0, x1: *x },
        _ => bail!("region must be diamond, diamond:T or rect:T,X"),
    })
}

fn config_from(cli: Cli) -> Result<ExperimentConfig> {
    let c = cli.common;
    let command = match &cli.command {
        Cmd::Gen => Command::Gen,
        Cmd::Analyze => Command::Analyze,
        Cmd::Green => Command::Green,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Sj => Command::Sj,
        Cmd::Converge { .. } => Command::Converge,
        Cmd::Correlate { .. } => Command::Correlate,
        Cmd::Interact { .. } => Command::Interact,
        Cmd::Rce { .. } => Command::Rce,
        Cmd::Validate { .. } => Command::Validate,
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("invalid config {}", config.display()))?;
            // Flags given on the command line win over the file.
            cfg.output = c.output.or(cfg.output);
            cfg.csv = c.csv.or(cfg.csv);
            return Ok(cfg);
        }
    };
    let mut cfg = ExperimentConfig::new(command);
    cfg.input = c.input;
    cfg.output = c.output;
    cfg.csv = c.csv;
    cfg.seed = c.seed;
    cfg.lattice = c.lattice;
    cfg.ell = c.ell;
    cfg.green = c.green;
    cfg.operator = c.operator;
    cfg.k = c.k;
    cfg.kvariant = c.kvariant;
    cfg.preferred_past = c.preferred_past;
    cfg.tol = c.tol;
    if c.olambda.is_some() || c.ohbar.is_some() {
        let d = OrdersConfig::default();
        cfg.orders = Some(OrdersConfig { hbar: c.ohbar.unwrap_or(d.hbar), lambda: c.olambda.unwrap_or(d.lambda) });
    }
    match (c.region, c.density) {
        (None, None) => {}
        (region, Some(density)) => {
            let region = region.as_deref().map(parse_region).transpose()?.unwrap_or(Region::Diamond { bottom: [0.0, 0.0], top: [1.0, 0.0] });
            cfg.sprinkle = Some(SprinkleConfig { region, density });
        }
        (Some(_), None) => bail!("--region needs --density"),
    }
    match cli.command {
        Cmd::Converge { f, levels, points_per_side, delta0, dim } => {
            cfg.f = f;
            cfg.levels = levels;
            cfg.points_per_side = points_per_side;
            cfg.delta0 = delta0;
            cfg.dim = dim;
        }
        Cmd::Correlate { points, state } => {
            cfg.points = Some(points);
            cfg.state = state;
        }
        Cmd::Interact { points, state, powers, couplings, lambda, orientation } => {
            cfg.points = Some(points);
            cfg.state = state;
            cfg.interaction = Some(InteractionConfig { powers, couplings, lambda });
            cfg.orientation = orientation;
        }
        Cmd::Rce { subdivide } => {
            if !subdivide.is_empty() {
                cfg.subdivide = Some([subdivide[0], subdivide[1]]);
            }
        }
        Cmd::Validate { path } => cfg.input = path.or(cfg.input),
        _ => {}
    }
    Ok(cfg)
}

fn write_outputs(cfg: &ExperimentConfig, out: &commands::Outcome) -> Result<()> {
    let text = serde_json::to_string_pretty(&out.json)? + "\n";
    match &cfg.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(dir) = &cfg.csv {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &out.csv {
            std::fs::write(dir.join(name), body)?;
        }
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("CAUSET_QFT_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // A second initialization only happens in tests; ignore it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = config_from(cli).and_then(|cfg| {
        let out = commands::run(&cfg)?;
        write_outputs(&cfg, &out)?;
        Ok(out.ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
