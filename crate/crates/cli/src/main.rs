use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nutrivision_core::catalog::validate_catalog;
use nutrivision_core::error::Error;
use nutrivision_core::recommender::compute_bmi;
use nutrivision_core::{canonical, Config, Engine, ErrorCode, RecipeBook};

#[derive(Debug, Parser)]
#[command(name = "nutrivision", version, about = "Plate analysis and personalized recipe recommendation")]
struct Cli {
    /// Config file; falls back to $NUTRIVISION_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Event log path, overriding the config file.
    #[arg(long, global = true, value_name = "PATH")]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantify a plate photo with a reference coin and detector output.
    Analyze {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the top recipes for a stored user.
    Recommend {
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Body-mass index and its category.
    Bmi {
        #[arg(long)]
        height_m: f64,
        #[arg(long)]
        weight_kg: f64,
    },
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Run the HTTP API until interrupted.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// Check a food table (CSV or JSON) and report every bad row.
    Validate {
        path: PathBuf,
        /// Treat the file as a recipe catalog instead.
        #[arg(long)]
        recipes: bool,
    },
}

enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

type CliResult = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = Config::discover(cli.config.as_deref()).map_err(Error::from)?;
    if let Some(store) = &cli.store {
        cfg.store.path = store.clone();
    }
    Ok(cfg)
}

fn analyze(cfg: Config, image: &Path, detections: &Path, out: Option<&Path>) -> CliResult {
    let image = read(image)?;
    let detections = read(detections)?;
    let engine = Engine::open(cfg)?;
    let report = engine.analyze(&image, &detections)?;
    let text = canonical::to_string(&report).map_err(|e| Failure::Usage(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn recommend(cfg: Config, user: &str, count: usize) -> CliResult {
    let engine = Engine::open(cfg)?;
    let recs = engine.recommend(user, count)?;
    println!("{:<4} {:<6} {:<34} {:>8}  {:<30} video", "rank", "id", "name", "score", "warnings");
    for (i, rec) in recs.iter().enumerate() {
        let recipe = engine.recipe(&rec.recipe_id)?;
        let warnings = rec
            .warnings
            .iter()
            .map(|w| format!("{} {:.1}g>{:.1}g", w.nutrient, w.amount_g, w.limit_g))
            .collect::<Vec<_>>()
            .join(", ");
        println!(
            "{:<4} {:<6} {:<34} {:>8.4}  {:<30} {}",
            i + 1,
            rec.recipe_id,
            recipe.name,
            rec.score,
            if warnings.is_empty() { "-" } else { &warnings },
            recipe.video_url
        );
    }
    Ok(())
}

fn validate(path: &Path, recipes: bool) -> CliResult {
    let doc = read(path)?;
    if recipes {
        RecipeBook::load(&doc).map_err(Error::from)?;
        println!("{}: ok", path.display());
        return Ok(());
    }
    let problems = validate_catalog(&doc);
    if problems.is_empty() {
        println!("{}: ok", path.display());
        return Ok(());
    }
    for p in &problems {
        eprintln!("{}: {p}", path.display());
    }
    Err(Failure::Usage(format!("{} problem(s) in {}", problems.len(), path.display())))
}

fn serve(cfg: Config, host: Option<String>, port: Option<u16>) -> CliResult {
    let host = host.unwrap_or_else(|| cfg.server.host.clone());
    let port = port.unwrap_or(cfg.server.port);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::Usage(format!("bad listen address {host}:{port}: {e}")))?;
    let engine = Arc::new(Engine::open(cfg)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        nutrivision_server::serve_on(engine, listener).await
    })
    .map_err(|e| Failure::Usage(format!("server: {e}")))
}

fn run(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Analyze { image, detections, out } => analyze(load_config(&cli)?, image, detections, out.as_deref()),
        Command::Recommend { user, count } => recommend(load_config(&cli)?, user, *count),
        Command::Bmi { height_m, weight_kg } => {
            let bmi = compute_bmi(*height_m, *weight_kg).map_err(Error::from)?;
            println!("{:.3} {}", bmi.value, bmi.category.as_str());
            Ok(())
        }
        Command::Catalog(CatalogCommand::Validate { path, recipes }) => validate(path, *recipes),
        Command::Serve { port, host } => serve(load_config(&cli)?, host.clone(), *port),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit 2 is reserved for calibration failures.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => match failure {
            Failure::Core(e) => {
                eprintln!("error[{}]: {e}", e.code());
                ExitCode::from(e.exit_code() as u8)
            }
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        },
    }
}
