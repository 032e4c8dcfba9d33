//! `esr`: synthesize data, train, predict, evaluate and visualize landmark
//! cascades from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
//! violation.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use esr::cascade::{predict, train_with_observer, InitSet, TestParams, TrainParams};
use esr::dataio::{
    evaluate, evaluate_mean_shape_baseline, format_report, generate_synthetic_dataset, load_dataset,
    load_image, load_landmarks, load_model, save_landmarks, save_model, save_ppm, EvalConfig, RgbImage,
    SynthConfig,
};
use esr::{BoundingBox, EsrError};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "esr", version, about = "Face alignment by explicit shape regression")]
struct Cli {
    /// Optional key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic landmark dataset.
    Synth(SynthArgs),
    /// Train a cascade on a dataset directory.
    Train(TrainArgs),
    /// Predict landmarks on one image.
    Predict(PredictArgs),
    /// Evaluate a model on a dataset directory.
    Eval(EvalArgs),
    /// Draw landmarks onto an image.
    Visualize(VisualizeArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    n_fp: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Cascade stages T.
    #[arg(long)]
    stages: Option<usize>,
    /// Ferns per stage K.
    #[arg(long)]
    ferns: Option<usize>,
    /// Shape-indexed pixels per stage P.
    #[arg(long)]
    pixels: Option<usize>,
    /// Features per fern F.
    #[arg(long)]
    features: Option<usize>,
    /// Initial shapes per training image.
    #[arg(long)]
    aug: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Face box `x,y,w,h`; the whole image when omitted.
    #[arg(long = "box")]
    face_box: Option<BoxArg>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Landmark pair `a,b` normalizing the error, or `none`.
    #[arg(long)]
    normalizer: Option<NormalizerArg>,
}

#[derive(Args)]
struct VisualizeArgs {
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    landmarks: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct BoxArg(BoundingBox);

impl FromStr for BoxArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad box {s:?}: {e}"))?;
        match v.as_slice() {
            &[x, y, w, h] if w > 0.0 && h > 0.0 && x.is_finite() && y.is_finite() => {
                Ok(BoxArg(BoundingBox::new(x, y, w, h)))
            }
            _ => Err(format!("box must be x,y,w,h with positive size, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct NormalizerArg(Option<(usize, usize)>);

impl FromStr for NormalizerArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "none" {
            return Ok(NormalizerArg(None));
        }
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("normalizer must be `a,b` or `none`, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad normalizer {s:?}: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a == b {
            return Err("normalizer landmarks must differ".into());
        }
        Ok(NormalizerArg(Some((a, b))))
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(EsrError),
}

impl From<EsrError> for CliError {
    fn from(e: EsrError) -> Self {
        CliError::Data(e)
    }
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Usage(msg)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(EsrError::InvariantViolation(m)) => write!(f, "internal error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(EsrError::InvariantViolation(_)) => 3,
            CliError::Data(_) => 2,
        }
    }
}

/// Parameter checks on user input are usage errors, not data errors.
fn usage(r: esr::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_synth(cfg: &RunConfig, a: SynthArgs) -> Result<(), CliError> {
    let d = SynthConfig::default();
    let out: PathBuf = cfg.required("out", a.out)?;
    let sc = SynthConfig {
        count: cfg.required("count", a.count)?,
        n_fp: cfg.resolve("n-fp", a.n_fp, d.n_fp)?,
        image_size: cfg.resolve("size", a.size, d.image_size)?,
        noise_sigma: cfg.resolve("noise", a.noise, d.noise_sigma)?,
        seed: cfg.resolve("seed", a.seed, d.seed)?,
        ..d
    };
    usage(sc.validate())?;
    let entries = generate_synthetic_dataset(&sc, &out)?;
    println!(
        "images={} n_fp={} size={} noise={} seed={} out={}",
        entries.len(),
        sc.n_fp,
        sc.image_size,
        sc.noise_sigma,
        sc.seed,
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, a: TrainArgs) -> Result<(), CliError> {
    let d = TrainParams::default();
    let data: PathBuf = cfg.required("data", a.data)?;
    let model_path: PathBuf = cfg.required("model", a.model)?;
    let params = TrainParams {
        n_aug: cfg.resolve("aug", a.aug, d.n_aug)?,
        t_stages: cfg.resolve("stages", a.stages, d.t_stages)?,
        k_ferns: cfg.resolve("ferns", a.ferns, d.k_ferns)?,
        p_pixels: cfg.resolve("pixels", a.pixels, d.p_pixels)?,
        f_features: cfg.resolve("features", a.features, d.f_features)?,
        kappa: cfg.resolve("kappa", a.kappa, d.kappa)?,
        beta: cfg.resolve("beta", a.beta, d.beta)?,
        seed: cfg.resolve("seed", a.seed, d.seed)?,
    };
    usage(params.validate())?;
    println!(
        "stages={} ferns={} pixels={} features={} aug={} kappa={} beta={} seed={}",
        params.t_stages,
        params.k_ferns,
        params.p_pixels,
        params.f_features,
        params.n_aug,
        params.kappa,
        params.beta,
        params.seed
    );

    let samples = load_dataset(&data)?;
    let labeled: Vec<_> = samples.iter().map(|s| (&s.image, &s.shape)).collect();
    let init_set = InitSet::new(samples.iter().map(|s| s.shape.clone()).collect())?;
    let model = train_with_observer(&labeled, &params, &init_set, |r| {
        println!("stage={} train_error={}", r.stage, r.train_error);
    })?;
    save_model(&model, &model_path)?;
    println!("model={}", model_path.display());
    Ok(())
}

fn cmd_predict(cfg: &RunConfig, a: PredictArgs) -> Result<(), CliError> {
    let model_path: PathBuf = cfg.required("model", a.model)?;
    let image_path: PathBuf = cfg.required("image", a.image)?;
    let out: PathBuf = cfg.required("out", a.out)?;
    let test = TestParams {
        n_init: cfg.resolve("n-init", a.n_init, TestParams::default().n_init)?,
    };
    usage(test.validate())?;
    let seed = cfg.resolve("seed", a.seed, 0)?;
    let face_box = cfg.optional::<BoxArg>("box", a.face_box)?.map(|b| b.0);

    let model = load_model(&model_path)?;
    let image = load_image(&image_path)?;
    // Same stream as image 0 of `eval`, so a one-image dataset agrees.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = predict(&model, &image, face_box.as_ref(), &test, &model.init_set, &mut rng)?;
    save_landmarks(&out, &shape, face_box.as_ref())?;
    println!("landmarks={}", out.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, a: EvalArgs) -> Result<(), CliError> {
    let model_path: PathBuf = cfg.required("model", a.model)?;
    let data: PathBuf = cfg.required("data", a.data)?;
    let report_path: PathBuf = cfg.required("report", a.report)?;
    let test = TestParams {
        n_init: cfg.resolve("n-init", a.n_init, TestParams::default().n_init)?,
    };
    usage(test.validate())?;
    let seed = cfg.resolve("seed", a.seed, 0)?;
    let mut eval_config = EvalConfig::default();
    if let Some(n) = cfg.optional::<NormalizerArg>("normalizer", a.normalizer)? {
        eval_config.normalizer = n.0;
    }

    let model = load_model(&model_path)?;
    let samples = load_dataset(&data)?;
    let report = evaluate(&model, &samples, &test, &eval_config, seed)?;
    let baseline = evaluate_mean_shape_baseline(&model, &samples, &eval_config)?;
    write_text(&report_path, &format_report(&report))?;
    println!(
        "images={} mean_error={} median_error={} baseline_mean_error={} report={}",
        report.errors.len(),
        report.mean,
        report.median,
        baseline.mean,
        report_path.display()
    );
    Ok(())
}

fn cmd_visualize(cfg: &RunConfig, a: VisualizeArgs) -> Result<(), CliError> {
    let image_path: PathBuf = cfg.required("image", a.image)?;
    let landmarks_path: PathBuf = cfg.required("landmarks", a.landmarks)?;
    let out: PathBuf = cfg.required("out", a.out)?;
    let radius: f64 = cfg.resolve("radius", a.radius, 2.0)?;
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(CliError::Usage(format!("radius must be >= 0, got {radius}")));
    }
    let image = load_image(&image_path)?;
    let lm = load_landmarks(&landmarks_path)?;
    let mut canvas = RgbImage::from_gray(&image);
    for (x, y) in lm.shape.points() {
        canvas.fill_disk(x, y, radius, [255, 0, 0]);
    }
    save_ppm(&canvas, &out)?;
    println!("image={}", out.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| {
        CliError::Data(EsrError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a),
        Command::Train(a) => cmd_train(&cfg, a),
        Command::Predict(a) => cmd_predict(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Visualize(a) => cmd_visualize(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
