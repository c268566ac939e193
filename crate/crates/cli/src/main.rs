use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bloodhound::autoenc::{Architecture, EncoderTransfer, TrainConfig};
use bloodhound::error::Error;
use bloodhound::eval::Execution;
use bloodhound::experiment::{run_experiment, ExperimentConfig};
use bloodhound::imaging::ImageMode;
use bloodhound::io::{self, parse_extent, Label, RawFormat};
use bloodhound::pipeline::{self, EncodeRequest, ExtentSource, SimulateRequest};
use bloodhound::report::{self, Provenance, ReportKind, ReportOptions};
use bloodhound::seed::sha256_hex;
use bloodhound::sim::{JammerConfig, JammerKind, LinkConfig};

/// Early jamming detection from I-Q constellation images.
#[derive(Parser, Debug)]
#[command(name = "bloodhound", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a BPSK capture, optionally jammed, into a dataset directory.
    Simulate(SimulateArgs),
    /// Encode recordings into constellation histogram images.
    Encode(EncodeArgs),
    /// Train a detector on unjammed images.
    Train(TrainArgs),
    /// Classify each window of a recording, or each image of a manifest.
    Detect(DetectArgs),
    /// Run a declarative sweep with k-fold evaluation.
    Evaluate(EvaluateArgs),
    /// Turn evaluation CSVs into plot-ready tables.
    Report(ReportArgs),
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{s} must be finite and non-negative"))
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("{s:?} must be an integer >= 1")),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("{s:?} must be an integer >= 2")),
    }
}

/// `N` for a square image or `ROWSxCOLS`.
fn image_size(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).unwrap_or((s, s));
    Ok((at_least_two(r)?, at_least_two(c)?))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Jam {
    None,
    Tone,
    Gaussian,
    Deceptive,
}

impl From<Jam> for JammerKind {
    fn from(j: Jam) -> Self {
        match j {
            Jam::None => JammerKind::None,
            Jam::Tone => JammerKind::Tone,
            Jam::Gaussian => JammerKind::Gaussian,
            Jam::Deceptive => JammerKind::Deceptive,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100_000, value_parser = at_least_one)]
    symbols: usize,
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long, value_enum, default_value_t = Jam::None)]
    jam: Jam,
    /// Jam-to-signal RMS ratio; ignored when --jam none.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative, allow_negative_numbers = true)]
    rjp: f64,
    #[arg(long, default_value_t = 1, value_parser = at_least_one)]
    ror: usize,
    #[arg(long, default_value_t = 1, value_parser = at_least_one)]
    jor: usize,
    /// Tone frequency in cycles per symbol.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    tone_offset: f64,
    /// Per-symbol phase jitter in radians.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    phase_noise: f64,
    /// Disable unit-RMS gain control.
    #[arg(long)]
    no_agc: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("extent_source").required(true).args(["extent_from", "extent"]))]
struct EncodeArgs {
    /// Raw capture (interleaved float32 LE) or a manifest of captures.
    #[arg(long = "in")]
    input: PathBuf,
    /// Samples per image.
    #[arg(long, default_value_t = 100_000, value_parser = at_least_one)]
    n: usize,
    /// Image size: N for N×N, or ROWSxCOLS.
    #[arg(long, default_value = "224", value_parser = image_size)]
    size: (usize, usize),
    #[arg(long, value_enum, default_value_t = Mode::Gray)]
    mode: Mode,
    /// Fit the extent on this unjammed recording.
    #[arg(long)]
    extent_from: Option<PathBuf>,
    /// Fixed extent `i_min,i_max,q_min,q_max`.
    #[arg(long, allow_hyphen_values = true)]
    extent: Option<String>,
    /// Label for a bare recording.
    #[arg(long, value_enum, default_value_t = LabelArg::Unjammed)]
    label: LabelArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Gray,
    Color,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LabelArg {
    Unjammed,
    Jammed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Encoder {
    Logsig,
    Satlin,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Image manifest; every entry must be unjammed.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value_t = 250)]
    epochs: usize,
    #[arg(long, default_value_t = 16, value_parser = at_least_one)]
    hidden: usize,
    /// Sparsity weight.
    #[arg(long, default_value_t = 0.5, value_parser = non_negative)]
    beta: f64,
    /// Target mean activation, in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    rho: f64,
    #[arg(long, default_value_t = 0.01, value_parser = non_negative)]
    l2: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = Encoder::Logsig)]
    encoder: Encoder,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_model: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum InputFormat {
    /// Decide from the file contents.
    Auto,
    /// Interleaved float32 little-endian I-Q.
    Raw,
    /// Manifest of images.
    Manifest,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    format: InputFormat,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially. Results do not depend on it.
    #[arg(long, value_parser = at_least_one)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Rjp,
    Nsamples,
    Trainsize,
    Jor,
    MseHist,
}

impl From<Kind> for ReportKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Rjp => ReportKind::Rjp,
            Kind::Nsamples => ReportKind::NSamples,
            Kind::Trainsize => ReportKind::TrainSize,
            Kind::Jor => ReportKind::Jor,
            Kind::MseHist => ReportKind::MseHist,
        }
    }
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// CSV files or directories holding evaluation outputs.
    #[arg(long = "in", num_args = 0..)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value = "accuracy")]
    metric: String,
    #[arg(long, default_value_t = 50, value_parser = at_least_one)]
    bins: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn simulate(a: SimulateArgs) -> CmdResult {
    let req = SimulateRequest {
        link: LinkConfig {
            num_symbols: a.symbols,
            snr_db: a.snr_db,
            ror: a.ror,
            agc: !a.no_agc,
            phase_noise_std: a.phase_noise,
            ..LinkConfig::default()
        },
        jammer: JammerConfig {
            jor: a.jor,
            tone_offset: a.tone_offset,
            ..JammerConfig::new(a.jam.into(), a.rjp, 0)
        },
        master_seed: a.seed,
    };
    let (link, jam) = req.seeded();
    link.validate().and_then(|_| jam.validate()).map_err(|e| Failure::Usage(e.to_string()))?;
    let path = pipeline::simulate_to_dir(&req, &a.out)?;
    println!("{}", path.display());
    Ok(())
}

fn encode(a: EncodeArgs) -> CmdResult {
    let extent = match (a.extent_from, a.extent) {
        (Some(p), _) => ExtentSource::Recording(p),
        (None, Some(e)) => ExtentSource::Fixed(parse_extent(&e).map_err(|e| Failure::Usage(e.to_string()))?),
        (None, None) => return Err(Failure::Usage("an extent source is required".into())),
    };
    let req = EncodeRequest {
        n: a.n,
        rows: a.size.0,
        cols: a.size.1,
        mode: match a.mode {
            Mode::Gray => ImageMode::Gray,
            Mode::Color => ImageMode::Color,
        },
        extent,
        label: match a.label {
            LabelArg::Unjammed => Label::Unjammed,
            LabelArg::Jammed => Label::Jammed,
        },
    };
    let out = pipeline::encode_to_dir(&a.input, &req, &a.out)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!("{} images -> {}", out.images, out.manifest.display());
    Ok(())
}

fn train(a: TrainArgs) -> CmdResult {
    let cfg = TrainConfig {
        epochs: a.epochs,
        sparsity_weight: a.beta,
        sparsity_proportion: a.rho,
        l2_weight: a.l2,
        learning_rate: a.lr,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let arch = Architecture {
        k_hidden: a.hidden,
        enc_transfer: match a.encoder {
            Encoder::Logsig => EncoderTransfer::LogSig,
            Encoder::Satlin => EncoderTransfer::SatLin,
        },
    };
    let (model, _) = pipeline::train_from_manifest(&a.images, &cfg, arch)?;
    let prov = pipeline::train_provenance(&a.images, &cfg, arch)?;
    if let Some(dir) = a.out_model.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    io::save_model(&model, &a.out_model, &prov.comments(io::MODEL_VERSION))?;
    println!(
        "trained on {} images: tau = {:.16e} (mean {:.6e}, std {:.6e})",
        model.train_set_size, model.tau, model.train_mse_mean, model.train_mse_std
    );
    Ok(())
}

fn detect(a: DetectArgs) -> CmdResult {
    let model_bytes = std::fs::read(&a.model).map_err(|e| Error::Io { path: a.model.clone(), source: e })?;
    let model = io::load_model(&a.model)?;
    let manifest = match a.format {
        InputFormat::Raw => false,
        InputFormat::Manifest => true,
        InputFormat::Auto => pipeline::is_manifest(&a.input)?,
    };
    let detections = if manifest {
        let (_, images) = pipeline::load_images(&a.input)?;
        let images: Vec<_> = images.into_iter().map(|(_, img)| img).collect();
        pipeline::detect_images(&model, &images)?
    } else {
        let rec = io::read_raw_iq(&a.input, RawFormat::InterleavedFloat32Le)?;
        pipeline::detect_recording(&model, &rec)?
    };
    let prov = Provenance {
        seed: None,
        config_hash: Some(sha256_hex(&model_bytes)),
    };
    let mut comments = prov.comments("bloodhound-detections/1");
    comments.push(format!("tau={:.16e}", model.tau));
    print!("{}", pipeline::format_detections(&detections, &comments));
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CmdResult {
    let cfg = ExperimentConfig::read(&a.config).map_err(|e| match e {
        Error::InvalidConfig(m) => Failure::Usage(m),
        other => Failure::Runtime(other),
    })?;
    let out = a
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| Failure::Usage("no output directory: pass --out or set `output` in the config".into()))?;
    let exec = match a.threads {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    let run = || run_experiment(&cfg, Some(&out), exec);
    let outcome = match a.threads {
        Some(t) if t > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::Usage(e.to_string()))?
            .install(run)?,
        _ => run()?,
    };
    let failed = outcome.points.iter().filter(|p| p.result.is_err()).count();
    for p in outcome.points.iter().filter(|p| p.result.is_err()) {
        if let Err(e) = &p.result {
            eprintln!("warning: point {} ({}) failed: {e}", p.spec.index, p.spec.key());
        }
    }
    println!(
        "{} points ({} failed) -> {}",
        outcome.points.len(),
        failed,
        out.join("summary.csv").display()
    );
    Ok(())
}

fn report_cmd(a: ReportArgs) -> CmdResult {
    let kind: ReportKind = a.kind.into();
    let files = report::report_inputs(kind, &a.inputs)?;
    let opts = ReportOptions {
        metric: a.metric,
        bins: a.bins,
    };
    if !bloodhound::eval::Summary::METRICS.contains(&opts.metric.as_str()) {
        return Err(Failure::Usage(format!("unknown metric {:?}", opts.metric)));
    }
    let text = report::build_report(kind, &files, &opts)?;
    match a.out {
        Some(path) => report::write_text(&path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Encode(a) => encode(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
