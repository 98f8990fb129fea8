//! `capgen`: prepare data, train inject and merge caption models, decode,
//! evaluate and tabulate, by talking to a capgen server.
//!
//! With `--server URL` the commands go to that server. Otherwise an
//! in-process server is started on a loopback port for the duration of
//! the command.

mod settings;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capgen_client::{Client, ClientError};
use capgen_core::api::{
    CaptionRequest, EvaluateRequest, GenerateRequest, JobProgress, ParamsRequest, PrepRequest, ReportRequest,
    TrainRequest, DEFAULT_LAYER_SIZE, DEFAULT_MIN_FREQ, DEFAULT_SEEDS, DEFAULT_THRESHOLDS,
};
use capgen_core::captioner::{Architecture, DEFAULT_IMAGE_SIZE};
use capgen_core::data::Split;
use capgen_core::decoding::{DEFAULT_BEAM_WIDTH, DEFAULT_MAX_LEN};
use capgen_core::report::{hypotheses_name, metrics_name};
use capgen_core::training::{TrainOptions, DEFAULT_MAX_EPOCHS};
use clap::{Args, Parser, Subcommand};
use settings::Settings;
use tracing_subscriber::EnvFilter;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Core(#[from] capgen_core::Error),
    #[error("could not start server: {0}")]
    Server(#[source] std::io::Error),
    #[error("missing required option --{0}")]
    Missing(String),
    #[error("invalid option: {0}")]
    Invalid(String),
}

#[derive(Parser)]
#[command(name = "capgen", version, about = "Inject and merge LSTM caption generators")]
struct Cli {
    /// Base URL of a running server; an in-process server is used if absent.
    #[arg(long, global = true, env = "CAPGEN_SERVER")]
    server: Option<String>,
    /// Flat `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print parameter counts of both architectures.
    Params(ParamsArgs),
    /// Build vocabularies, normalise features and write a processed dataset.
    Prep(PrepArgs),
    /// Train one architecture under several seeds.
    Train(TrainArgs),
    /// Decode a split with beam search and write hypotheses.
    Generate(GenerateArgs),
    /// Score a hypothesis file.
    Evaluate(EvaluateArgs),
    /// Tabulate every run under a grid directory.
    Report(ReportArgs),
    /// Train, decode and evaluate every cell of an experiment grid, then report.
    Grid(GridArgs),
    /// Caption one raw image vector given as comma-separated numbers.
    Caption(CaptionArgs),
    /// Run the HTTP server in the foreground.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    layer: Option<usize>,
    /// Vocabulary size including special tokens.
    #[arg(long)]
    vocab_size: usize,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    image_size: usize,
}

#[derive(Args)]
struct PrepArgs {
    /// Dataset directory or `synth:N[:SEED[:WORDS]]`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated frequency thresholds.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<usize>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    min_freq: Option<usize>,
    /// Repeat for several runs.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// 32 or 64.
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    arch: Option<Architecture>,
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    min_freq: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    split: Option<Split>,
    /// Directory for the text and CSV tables; defaults to the grid.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Grid directory; each cell is written to `<arch>/layer<L>_min<T>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    archs: Vec<Architecture>,
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<usize>,
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct CaptionArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    feature: Vec<f32>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: could not start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    if let Command::Serve(args) = &cli.command {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .map_err(CliError::Server)?;
        eprintln!("listening on {}", listener.local_addr().map_err(CliError::Server)?);
        return capgen_server::serve(listener, capgen_server::AppState::new())
            .await
            .map_err(CliError::Server);
    }
    let client = match settings.optional(cli.server, "server")? {
        Some(url) => Client::new(url),
        None => {
            let (addr, _) = capgen_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
                .await
                .map_err(CliError::Server)?;
            Client::new(format!("http://{addr}"))
        }
    };
    match cli.command {
        Command::Params(args) => params(&client, &settings, args).await,
        Command::Prep(args) => prep(&client, &settings, args).await,
        Command::Train(args) => train(&client, &settings, args).await,
        Command::Generate(args) => generate(&client, &settings, args).await,
        Command::Evaluate(args) => evaluate(&client, &settings, args).await,
        Command::Report(args) => report(&client, &settings, args).await,
        Command::Grid(args) => grid(&client, &settings, args).await,
        Command::Caption(args) => caption(&client, &settings, args).await,
        Command::Serve(_) => unreachable!("handled above"),
    }
}

async fn params(client: &Client, s: &Settings, args: ParamsArgs) -> Result<(), CliError> {
    let req = ParamsRequest {
        layer_size: s.value(args.layer, "layer", DEFAULT_LAYER_SIZE)?,
        vocab_size: args.vocab_size,
        image_size: args.image_size,
    };
    let resp = client.params(&req).await?;
    println!("arch\tembedding\timage_proj\tlstm\toutput\ttotal");
    for (name, c) in [("merge", resp.merge), ("inject", resp.inject)] {
        println!(
            "{name}\t{}\t{}\t{}\t{}\t{}",
            c.embedding, c.image_proj, c.lstm, c.output, c.total
        );
    }
    println!("ratio\t{:.4}", resp.ratio);
    Ok(())
}

async fn prep(client: &Client, s: &Settings, args: PrepArgs) -> Result<(), CliError> {
    let req = PrepRequest {
        dataset: s.required(args.dataset, "dataset")?,
        out: s.path(args.out, "out")?,
        thresholds: s.list(args.thresholds, "thresholds", &DEFAULT_THRESHOLDS)?,
    };
    let resp = client.prep(&req).await?;
    println!(
        "images: train {} val {} test {}; feature dim {}",
        resp.train_images, resp.val_images, resp.test_images, resp.feature_dim
    );
    for v in &resp.vocab_sizes {
        println!("min_freq {}\tvocab {}", v.threshold, v.size);
    }
    println!("wrote {}", resp.out.display());
    Ok(())
}

fn train_options(s: &Settings, flags: &TrainFlags) -> Result<TrainOptions, CliError> {
    let mut options = TrainOptions::default();
    options.max_epochs = s.value(flags.max_epochs, "max-epochs", DEFAULT_MAX_EPOCHS)?;
    options.batch_size = s.value(flags.batch_size, "batch-size", options.batch_size)?;
    options.adam.lr = s.value(flags.lr, "lr", options.adam.lr)?;
    Ok(options)
}

fn print_progress(p: &JobProgress) {
    let r = &p.record;
    match r.val_loss {
        Some(v) => eprintln!(
            "seed {} epoch {}: train {:.4}/token, val {:.4}",
            p.seed,
            r.epoch,
            r.mean_train_loss(),
            v
        ),
        None => eprintln!(
            "seed {} epoch {}: train {:.4}/token",
            p.seed,
            r.epoch,
            r.mean_train_loss()
        ),
    }
}

async fn run_training(client: &Client, req: &TrainRequest) -> Result<capgen_core::api::TrainResponse, CliError> {
    let job = client.train(req).await?;
    Ok(client.wait_job(job, print_progress).await?)
}

async fn train(client: &Client, s: &Settings, args: TrainArgs) -> Result<(), CliError> {
    let req = TrainRequest {
        dataset: s.required(args.flags.dataset.clone(), "dataset")?,
        out: s.path(args.out, "out")?,
        architecture: s.required(args.arch, "arch")?,
        layer_size: s.value(args.layer, "layer", DEFAULT_LAYER_SIZE)?,
        min_freq: s.value(args.flags.min_freq, "min-freq", DEFAULT_MIN_FREQ)?,
        precision: s.precision(args.flags.precision)?,
        seeds: s.list(args.flags.seeds.clone(), "seed", &DEFAULT_SEEDS)?,
        options: train_options(s, &args.flags)?,
    };
    let resp = run_training(client, &req).await?;
    println!("vocab size {}", resp.vocab_size);
    for row in &resp.runs {
        let loss = row.best_val_loss.map_or("na".to_string(), |l| format!("{l:.4}"));
        println!(
            "seed {}\tepochs {}\tbest val {}\t{}",
            row.seed,
            row.epochs,
            loss,
            resp.out.join(&row.checkpoint).display()
        );
    }
    Ok(())
}

async fn generate(client: &Client, s: &Settings, args: GenerateArgs) -> Result<(), CliError> {
    let req = GenerateRequest {
        checkpoint: args.checkpoint,
        dataset: s.required(args.dataset, "dataset")?,
        split: s.value(args.split, "split", Split::Test)?,
        beam: s.value(args.beam, "beam", DEFAULT_BEAM_WIDTH)?,
        max_len: s.value(args.max_len, "max-len", DEFAULT_MAX_LEN)?,
        out: args.out,
    };
    let resp = client.generate(&req).await?;
    println!("wrote {} captions to {}", resp.count, resp.hypotheses.display());
    Ok(())
}

async fn evaluate(client: &Client, s: &Settings, args: EvaluateArgs) -> Result<(), CliError> {
    let req = EvaluateRequest {
        hypotheses: args.hyp,
        dataset: s.required(args.dataset, "dataset")?,
        min_freq: s.optional(args.min_freq, "min-freq")?,
        out: args.out,
    };
    let resp = client.evaluate(&req).await?;
    for (key, value) in capgen_core::metrics::MetricReport::KEYS
        .iter()
        .zip(resp.report.values())
    {
        println!("{key}\t{value:.6}");
    }
    println!("wrote {}", resp.path.display());
    Ok(())
}

async fn report(client: &Client, s: &Settings, args: ReportArgs) -> Result<(), CliError> {
    let req = ReportRequest {
        grid: args.grid,
        split: s.value(args.split, "split", Split::Test)?,
        out: args.out,
    };
    let resp = client.report(&req).await?;
    print!("{}", resp.text);
    println!("wrote {} and {}", resp.text_path.display(), resp.csv_path.display());
    Ok(())
}

fn cell_dir(grid: &Path, arch: Architecture, layer: usize, min_freq: usize) -> PathBuf {
    grid.join(arch.to_string()).join(format!("layer{layer}_min{min_freq}"))
}

async fn grid(client: &Client, s: &Settings, args: GridArgs) -> Result<(), CliError> {
    let out = s.path(args.out, "out")?;
    let dataset: String = s.required(args.flags.dataset.clone(), "dataset")?;
    let archs = s.list(args.archs, "archs", &[Architecture::Inject, Architecture::Merge])?;
    let layers = s.list(args.layers, "layers", &[128, 256, 512])?;
    let thresholds = s.list(args.thresholds, "thresholds", &DEFAULT_THRESHOLDS)?;
    let seeds = s.list(args.flags.seeds.clone(), "seed", &DEFAULT_SEEDS)?;
    let split = s.value(args.split, "split", Split::Test)?;
    let beam = s.value(args.beam, "beam", DEFAULT_BEAM_WIDTH)?;
    let max_len = s.value(args.max_len, "max-len", DEFAULT_MAX_LEN)?;
    let precision = s.precision(args.flags.precision)?;
    let options = train_options(s, &args.flags)?;
    if archs.is_empty() || layers.is_empty() || thresholds.is_empty() || seeds.is_empty() {
        return Err(CliError::Invalid("every grid axis needs at least one value".into()));
    }
    for &layer in &layers {
        for &min_freq in &thresholds {
            for &arch in &archs {
                let dir = cell_dir(&out, arch, layer, min_freq);
                eprintln!("training {arch} layer {layer} min_freq {min_freq} -> {}", dir.display());
                let req = TrainRequest {
                    dataset: dataset.clone(),
                    out: dir.clone(),
                    architecture: arch,
                    layer_size: layer,
                    min_freq,
                    precision,
                    seeds: seeds.clone(),
                    options,
                };
                let trained = run_training(client, &req).await?;
                for row in &trained.runs {
                    let generated = client
                        .generate(&GenerateRequest {
                            checkpoint: dir.join(&row.checkpoint),
                            dataset: dataset.clone(),
                            split,
                            beam,
                            max_len,
                            out: Some(dir.join(hypotheses_name(row.seed, split))),
                        })
                        .await?;
                    client
                        .evaluate(&EvaluateRequest {
                            hypotheses: generated.hypotheses,
                            dataset: dataset.clone(),
                            min_freq: Some(min_freq),
                            out: Some(dir.join(metrics_name(row.seed, split))),
                        })
                        .await?;
                }
            }
        }
    }
    let resp = client
        .report(&ReportRequest {
            grid: out,
            split,
            out: None,
        })
        .await?;
    print!("{}", resp.text);
    println!("wrote {} and {}", resp.text_path.display(), resp.csv_path.display());
    Ok(())
}

async fn caption(client: &Client, s: &Settings, args: CaptionArgs) -> Result<(), CliError> {
    let req = CaptionRequest {
        checkpoint: args.checkpoint,
        feature: args.feature,
        beam: s.value(args.beam, "beam", DEFAULT_BEAM_WIDTH)?,
        max_len: s.value(args.max_len, "max-len", DEFAULT_MAX_LEN)?,
    };
    let resp = client.caption(&req).await?;
    println!("{}\t{:.6}", resp.tokens.join(" "), resp.log_prob);
    Ok(())
}
