use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use disprefine::eval::{evaluate, CameraRig, MaskMode};
use disprefine::image::PixelMask;
use disprefine::io;
use disprefine::ldr::SpecularChannel;
use disprefine::pipeline::{
    export_scene, init_threads_from_env, run_batch, run_pipeline, write_json, BatchManifest,
    DisparitySign, PipelineConfig, Stage,
};
use disprefine::synth::{corrupt_disparity, gen_scene, CorruptionSpec, SceneSpec};
use disprefine::{Error, Result};

/// Refine stereo disparity maps.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run local and/or global refinement on one sample.
    Refine(Box<RefineArgs>),
    /// Score a disparity map against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Run a manifest of samples in parallel.
    Batch(BatchArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct RefineArgs {
    /// JSON config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    left: Option<PathBuf>,
    #[arg(long)]
    right: Option<PathBuf>,
    #[arg(long = "init")]
    init_disparity: Option<PathBuf>,
    #[arg(long = "gt")]
    gt_disparity: Option<PathBuf>,
    #[arg(long)]
    gt_depth: Option<PathBuf>,
    #[arg(long = "occlusion")]
    occlusion_mask: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_stage)]
    stage: Option<Stage>,
    /// Disparities on disk are positive `x_left - x_right`.
    #[arg(long)]
    negate_disparity: bool,
    #[arg(long)]
    half_resolution: bool,
    /// With --half-resolution, evaluate at the processing resolution.
    #[arg(long)]
    eval_half_res: bool,
    #[command(flatten)]
    rig: RigArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eps_huber: Option<f64>,
    #[arg(long)]
    warps: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    alpha_s: Option<f64>,
    #[arg(long)]
    alpha_p: Option<f64>,
    #[arg(long)]
    th_f: Option<f64>,
    #[arg(long)]
    th_s: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_parser = parse_specular)]
    specular_channel: Option<SpecularChannel>,
}

#[derive(Args)]
struct RigArgs {
    #[arg(long, requires = "baseline_mm")]
    focal_px: Option<f64>,
    #[arg(long, requires = "focal_px")]
    baseline_mm: Option<f64>,
}

impl RigArgs {
    fn rig(&self) -> Result<Option<CameraRig>> {
        match (self.focal_px, self.baseline_mm) {
            (Some(f), Some(b)) => Ok(Some(CameraRig::new(f, b)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Nonzero pixels are occluded.
    #[arg(long)]
    occlusion: Option<PathBuf>,
    #[arg(long, requires = "focal_px")]
    gt_depth: Option<PathBuf>,
    #[command(flatten)]
    rig: RigArgs,
    /// Both maps are stored as positive `x_left - x_right`.
    #[arg(long)]
    negate_disparity: bool,
    /// Write the reports here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Corruption spec (JSON) applied to the initial disparity.
    #[arg(long)]
    corruption: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| "expected ldr, gdr or full".to_string())
}

fn parse_specular(s: &str) -> std::result::Result<SpecularChannel, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| "expected saturation or value".to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn refine(args: RefineArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    let paths = &mut cfg.paths;
    for (slot, flag) in [
        (&mut paths.left, args.left),
        (&mut paths.right, args.right),
        (&mut paths.init_disparity, args.init_disparity),
        (&mut paths.gt_disparity, args.gt_disparity),
        (&mut paths.gt_depth, args.gt_depth),
        (&mut paths.occlusion_mask, args.occlusion_mask),
        (&mut paths.output, args.output),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if let Some(stage) = args.stage {
        cfg.stage = stage;
    }
    if args.negate_disparity {
        cfg.disparity_sign = DisparitySign::Negate;
    }
    if args.half_resolution {
        cfg.half_resolution = true;
    }
    if args.eval_half_res {
        cfg.eval_full_res = false;
    }
    if let Some(rig) = args.rig.rig()? {
        cfg.rig = Some(rig);
    }
    let g = &mut cfg.gdr;
    g.lambda = args.lambda.unwrap_or(g.lambda);
    g.eps_huber = args.eps_huber.unwrap_or(g.eps_huber);
    g.warps = args.warps.unwrap_or(g.warps);
    g.levels = args.levels.unwrap_or(g.levels);
    g.inner_iters = args.inner_iters.unwrap_or(g.inner_iters);
    let l = &mut cfg.ldr;
    l.alpha_s = args.alpha_s.unwrap_or(l.alpha_s);
    l.alpha_p = args.alpha_p.unwrap_or(l.alpha_p);
    l.th_f = args.th_f.unwrap_or(l.th_f);
    l.th_s = args.th_s.unwrap_or(l.th_s);
    l.window = args.window.unwrap_or(l.window);
    l.specular_channel = args.specular_channel.unwrap_or(l.specular_channel);

    let report = run_pipeline(&cfg)?;
    print_json(&report);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let sign = if args.negate_disparity {
        DisparitySign::Negate
    } else {
        DisparitySign::AsStored
    };
    let rig = args.rig.rig()?;
    let pred = sign.apply(&io::read_pfm_channels(&args.pred, 1)?);
    let gt = sign.apply(&io::read_pfm_channels(&args.gt, 1)?);
    let gt_depth = args
        .gt_depth
        .as_ref()
        .map(|p| io::read_pfm_channels(p, 1))
        .transpose()?;
    let depth = match (&gt_depth, &rig) {
        (Some(z), Some(r)) => Some((z, r)),
        _ => None,
    };
    let finite = PixelMask::from_vec(
        gt.width(),
        gt.height(),
        gt.data().iter().map(|v| v.is_finite()).collect(),
    )?;
    let mut reports = vec![evaluate(&pred, &gt, &finite, MaskMode::OcclusionsIncluded, depth)?];
    if let Some(path) = &args.occlusion {
        let visible = finite.and(&io::read_mask(path)?.not());
        reports.push(evaluate(&pred, &gt, &visible, MaskMode::OcclusionsExcluded, depth)?);
    }
    match &args.output {
        Some(path) => write_json(path, &reports)?,
        None => print_json(&reports),
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec: SceneSpec = read_json(&args.scene)?;
    spec.validate()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let corruption: Option<CorruptionSpec> = args.corruption.as_ref().map(read_json).transpose()?;
    if let Some(c) = &corruption {
        c.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let scene = gen_scene(&spec)?;
    let corrupted = corruption
        .map(|c| corrupt_disparity(&scene.gt_disparity, &c))
        .transpose()?;
    let mut paths = export_scene(&scene, corrupted.as_ref(), &args.output)?;
    // the config sits next to the files it names
    paths.relative_to(&args.output);
    paths.output = Some("refined".into());
    let cfg = PipelineConfig {
        paths,
        ..PipelineConfig::default()
    };
    let cfg_path = args.output.join("pipeline.json");
    write_json(&cfg_path, &cfg)?;
    eprintln!("wrote scene and {}", cfg_path.display());
    Ok(())
}

fn batch(args: BatchArgs) -> Result<i32> {
    let manifest = BatchManifest::from_file(&args.manifest)?;
    let entries = run_batch(&manifest)?;
    std::fs::create_dir_all(&manifest.output_dir).map_err(|e| Error::Io {
        path: manifest.output_dir.clone(),
        source: e,
    })?;
    write_json(manifest.output_dir.join("batch_report.json"), &entries)?;
    for e in &entries {
        match &e.error {
            Some(msg) => eprintln!("{}: failed: {msg}", e.name),
            None => eprintln!("{}: ok", e.name),
        }
    }
    Ok(entries.iter().map(|e| e.exit_code).max().unwrap_or(0))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = init_threads_from_env().and_then(|_| match cli.command {
        Command::Refine(a) => refine(*a).map(|_| 0),
        Command::Eval(a) => eval(a).map(|_| 0),
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::Batch(a) => batch(a),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
