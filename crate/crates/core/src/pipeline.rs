//! End-to-end driver: load a stereo pair and an initial disparity, run local
//! and/or global refinement, write the results and evaluate against ground
//! truth when it is available.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, CameraRig, EvalReport, MaskMode, MIN_DISPARITY};
use crate::gdr::{downsample_disparity, refine_global, upsample_disparity, GdrParams};
use crate::image::{
    downsample_half, to_grayscale, ConfidenceMap, DisparityMap, ImageBuffer, PixelMask,
};
use crate::io;
use crate::ldr::{
    border_mask, final_confidence, photo_confidence, refine_local, smoothness_confidence,
    specular_mask, LdrParams,
};
use crate::synth::{Corruption, Scene};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "DISPREFINE_THREADS";

/// Levels above the default pyramid depth are required to run global
/// refinement without an initial disparity.
pub const PRIORLESS_MIN_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ldr,
    Gdr,
    /// Local refinement followed by global refinement.
    #[default]
    Full,
}

impl Stage {
    fn runs_ldr(self) -> bool {
        matches!(self, Stage::Ldr | Stage::Full)
    }

    fn runs_gdr(self) -> bool {
        matches!(self, Stage::Gdr | Stage::Full)
    }
}

/// How disparities are stored on disk relative to the internal convention,
/// where left pixel `x` matches right column `x + u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisparitySign {
    #[default]
    AsStored,
    /// Stored as positive `x_left - x_right`; negated on load and on write.
    Negate,
}

impl DisparitySign {
    pub fn apply(self, disp: &DisparityMap) -> DisparityMap {
        match self {
            DisparitySign::AsStored => disp.clone(),
            DisparitySign::Negate => disp.map(|v| -v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinePaths {
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    pub init_disparity: Option<PathBuf>,
    pub gt_disparity: Option<PathBuf>,
    pub gt_depth: Option<PathBuf>,
    /// Nonzero pixels are occluded.
    pub occlusion_mask: Option<PathBuf>,
    /// Output directory.
    pub output: Option<PathBuf>,
}

impl PipelinePaths {
    fn inputs(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.left,
            &self.right,
            &self.init_disparity,
            &self.gt_disparity,
            &self.gt_depth,
            &self.occlusion_mask,
        ]
        .into_iter()
        .flatten()
    }

    fn slots(&mut self) -> [&mut Option<PathBuf>; 7] {
        [
            &mut self.left,
            &mut self.right,
            &mut self.init_disparity,
            &mut self.gt_disparity,
            &mut self.gt_depth,
            &mut self.occlusion_mask,
            &mut self.output,
        ]
    }

    /// Rewrite paths under `dir` as relative to it, so a config stored in
    /// `dir` stays valid when the directory moves.
    pub fn relative_to(&mut self, dir: &Path) {
        for p in self.slots().into_iter().flatten() {
            if let Ok(rel) = p.strip_prefix(dir) {
                *p = rel.to_path_buf();
            }
        }
    }

    /// Resolve relative paths against `base`.
    pub fn resolve_relative(&mut self, base: &Path) {
        for p in self.slots().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stage: Stage,
    pub ldr: LdrParams,
    pub gdr: GdrParams,
    pub disparity_sign: DisparitySign,
    /// Process at half resolution (images downsampled, disparities halved).
    pub half_resolution: bool,
    /// With `half_resolution`, upsample results before evaluating against
    /// full-resolution ground truth.
    pub eval_full_res: bool,
    pub rig: Option<CameraRig>,
    pub paths: PipelinePaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage: Stage::Full,
            ldr: LdrParams::default(),
            gdr: GdrParams::default(),
            disparity_sign: DisparitySign::AsStored,
            half_resolution: false,
            eval_full_res: true,
            rig: None,
            paths: PipelinePaths::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse a JSON config. Relative paths are resolved against the file's
    /// directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid_config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve_relative(dir);
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid_config(format!("config: {e}")))
    }

    /// Check parameters, required inputs for the stage, that inputs exist and
    /// that no output would overwrite an input.
    pub fn validate(&self) -> Result<()> {
        self.ldr.validate()?;
        self.gdr.validate()?;
        if let Some(rig) = &self.rig {
            rig.validate()?;
        }
        let paths = &self.paths;
        for (name, p) in [
            ("left", &paths.left),
            ("right", &paths.right),
            ("output", &paths.output),
        ] {
            if p.is_none() {
                return Err(Error::invalid_config(format!("missing path: {name}")));
            }
        }
        if paths.init_disparity.is_none() {
            match self.stage {
                Stage::Gdr if self.gdr.levels >= PRIORLESS_MIN_LEVELS => {}
                Stage::Gdr => {
                    return Err(Error::invalid_config(format!(
                        "stage gdr without init_disparity needs gdr.levels >= {PRIORLESS_MIN_LEVELS}"
                    )))
                }
                _ => return Err(Error::invalid_config("missing path: init_disparity")),
            }
        }
        if paths.gt_depth.is_some() && self.rig.is_none() {
            return Err(Error::invalid_config("gt_depth requires a camera rig"));
        }
        for p in paths.inputs() {
            if !p.is_file() {
                return Err(Error::invalid_config(format!(
                    "input does not exist: {}",
                    p.display()
                )));
            }
        }
        let out_dir = paths.output.as_ref().expect("checked above");
        for name in OUTPUT_FILES {
            let out = out_dir.join(name);
            if paths.inputs().any(|p| same_file(p, &out)) {
                return Err(Error::invalid_config(format!(
                    "output {} would overwrite an input",
                    out.display()
                )));
            }
        }
        Ok(())
    }
}

pub const DISPARITY_FILE: &str = "disparity.pfm";
pub const CONFIDENCE_FILE: &str = "confidence.pfm";
pub const CONFIDENCE_PNG: &str = "confidence.png";
pub const ERROR_PNG: &str = "error.png";
pub const REPORT_FILE: &str = "report.json";
const OUTPUT_FILES: [&str; 5] = [
    DISPARITY_FILE,
    CONFIDENCE_FILE,
    CONFIDENCE_PNG,
    ERROR_PNG,
    REPORT_FILE,
];

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub load_s: f64,
    pub ldr_s: Option<f64>,
    pub gdr_s: Option<f64>,
    pub total_s: f64,
}

/// Metrics of one disparity map (the raw input or a stage output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEval {
    /// `raw`, `ldr` or `gdr`.
    pub stage: String,
    pub reports: Vec<EvalReport>,
    /// Pixels left out of the depth error because their disparity is too
    /// close to zero to triangulate. Present when depth was evaluated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub untriangulated_pixels: Option<usize>,
}

impl StageEval {
    pub fn rmse(&self, mode: MaskMode) -> Option<f64> {
        self.reports
            .iter()
            .find(|r| r.mask_mode == mode)
            .map(|r| r.rmse_disparity_px)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Processing resolution.
    pub width: usize,
    pub height: usize,
    pub timings: Timings,
    /// Outliers found by local refinement.
    pub ldr_outliers: Option<usize>,
    /// Empty unless ground truth was supplied.
    pub evaluation: Vec<StageEval>,
    pub outputs: Vec<PathBuf>,
    pub config: PipelineConfig,
}

impl RunReport {
    pub fn stage_eval(&self, stage: &str) -> Option<&StageEval> {
        self.evaluation.iter().find(|e| e.stage == stage)
    }
}

/// Loaded and preprocessed inputs at processing resolution.
struct Inputs {
    left: ImageBuffer,
    right: ImageBuffer,
    init: Option<DisparityMap>,
}

struct GroundTruth {
    disparity: DisparityMap,
    depth: Option<ImageBuffer>,
    occlusion: Option<PixelMask>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(Inputs, Option<GroundTruth>)> {
    let paths = &cfg.paths;
    let left = io::read_color(paths.left.as_ref().expect("validated"))?;
    let right = io::read_color(paths.right.as_ref().expect("validated"))?;
    left.ensure_same_dims(&right, "stereo pair")?;
    let init = match &paths.init_disparity {
        Some(p) => {
            let d = cfg.disparity_sign.apply(&io::read_pfm_channels(p, 1)?);
            d.ensure_same_dims(&left, "initial disparity")?;
            if !d.is_finite() {
                return Err(Error::invalid_input("initial disparity contains NaN or Inf"));
            }
            Some(d)
        }
        None => None,
    };
    let gt = match &paths.gt_disparity {
        Some(p) => {
            let disparity = cfg.disparity_sign.apply(&io::read_pfm_channels(p, 1)?);
            disparity.ensure_same_dims(&left, "ground truth disparity")?;
            let depth = match &paths.gt_depth {
                Some(p) => {
                    let z = io::read_pfm_channels(p, 1)?;
                    z.ensure_same_dims(&left, "ground truth depth")?;
                    Some(z)
                }
                None => None,
            };
            let occlusion = match &paths.occlusion_mask {
                Some(p) => {
                    let m = io::read_mask(p)?;
                    if m.dims() != left.dims() {
                        return Err(Error::invalid_input("occlusion mask dimension mismatch"));
                    }
                    Some(m)
                }
                None => None,
            };
            Some(GroundTruth {
                disparity,
                depth,
                occlusion,
            })
        }
        None => None,
    };
    Ok((Inputs { left, right, init }, gt))
}

fn halve(inputs: Inputs) -> Result<Inputs> {
    Ok(Inputs {
        left: downsample_half(&inputs.left)?,
        right: downsample_half(&inputs.right)?,
        init: inputs.init.as_ref().map(downsample_disparity).transpose()?,
    })
}

/// Nearest-neighbour decimation by two, used to bring ground truth to the
/// processing grid without mixing values across discontinuities.
fn decimate<T: Copy>(w: usize, h: usize, get: impl Fn(usize, usize) -> T) -> Vec<T> {
    let (hw, hh) = (w.div_ceil(2), h.div_ceil(2));
    (0..hh)
        .flat_map(|y| (0..hw).map(move |x| (x, y)))
        .map(|(x, y)| get((2 * x).min(w - 1), (2 * y).min(h - 1)))
        .collect()
}

fn decimate_gt(gt: &GroundTruth) -> Result<GroundTruth> {
    let (w, h) = gt.disparity.dims();
    let (hw, hh) = (w.div_ceil(2), h.div_ceil(2));
    let disparity = ImageBuffer::new(hw, hh, 1, decimate(w, h, |x, y| 0.5 * gt.disparity.get(x, y)))?;
    let depth = gt
        .depth
        .as_ref()
        .map(|z| ImageBuffer::new(hw, hh, 1, decimate(w, h, |x, y| z.get(x, y))))
        .transpose()?;
    let occlusion = gt
        .occlusion
        .as_ref()
        .map(|m| PixelMask::from_vec(hw, hh, decimate(w, h, |x, y| m.get(x, y))))
        .transpose()?;
    Ok(GroundTruth {
        disparity,
        depth,
        occlusion,
    })
}

/// Evaluate `pred` in both mask modes (the excluded mode only with a mask).
/// Ground truth that is not finite is never counted.
fn evaluate_all(pred: &DisparityMap, gt: &GroundTruth, rig: Option<&CameraRig>) -> Result<Vec<EvalReport>> {
    let finite = PixelMask::from_vec(
        pred.width(),
        pred.height(),
        gt.disparity.data().iter().map(|v| v.is_finite()).collect(),
    )?;
    let depth = match (&gt.depth, rig) {
        (Some(z), Some(r)) => Some((z, r)),
        _ => None,
    };
    let mut reports = vec![evaluate(pred, &gt.disparity, &finite, MaskMode::OcclusionsIncluded, depth)?];
    if let Some(occ) = &gt.occlusion {
        let visible = finite.and(&occ.not());
        reports.push(evaluate(pred, &gt.disparity, &visible, MaskMode::OcclusionsExcluded, depth)?);
    }
    Ok(reports)
}

/// Confidence of a disparity map, as used by local refinement.
fn confidence_of(left: &ImageBuffer, right: &ImageBuffer, disp: &DisparityMap, p: &LdrParams) -> Result<ConfidenceMap> {
    let cs = smoothness_confidence(disp, p)?;
    let cp = photo_confidence(&to_grayscale(left)?, &to_grayscale(right)?, disp, p)?;
    final_confidence(&cs, &cp, &specular_mask(left, p)?, &border_mask(disp)?)
}

/// Run the configured stages and write `disparity.pfm`, the confidence map
/// (PFM and PNG), `error.png` when ground truth is given, and `report.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (mut inputs, gt) = load_inputs(cfg)?;
    let full_dims = inputs.left.dims();
    if cfg.half_resolution {
        inputs = halve(inputs)?;
    }
    let (w, h) = inputs.left.dims();
    let mut timings = Timings {
        load_s: start.elapsed().as_secs_f64(),
        ..Timings::default()
    };

    let mut current = inputs.init.clone().unwrap_or_else(|| ImageBuffer::zeros(w, h, 1));
    let mut stages: Vec<(&str, DisparityMap)> = Vec::new();
    if inputs.init.is_some() {
        stages.push(("raw", current.clone()));
    }
    let mut confidence = None;
    let mut ldr_outliers = None;

    if cfg.stage.runs_ldr() {
        let t = Instant::now();
        let local = refine_local(&inputs.left, &inputs.right, &current, &cfg.ldr)?;
        timings.ldr_s = Some(t.elapsed().as_secs_f64());
        log::info!("local refinement: {} outliers", local.outliers);
        ldr_outliers = Some(local.outliers);
        confidence = Some(local.confidence);
        current = local.disparity;
        stages.push(("ldr", current.clone()));
    }
    if cfg.stage.runs_gdr() {
        let t = Instant::now();
        current = refine_global(&inputs.left, &inputs.right, &current, &cfg.gdr)?;
        timings.gdr_s = Some(t.elapsed().as_secs_f64());
        stages.push(("gdr", current.clone()));
    }
    let confidence = match confidence {
        Some(c) => c,
        None => confidence_of(&inputs.left, &inputs.right, &current, &cfg.ldr)?,
    };

    let out_dir = cfg.paths.output.as_ref().expect("validated");
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Vec::new();
    let disparity_path = out_dir.join(DISPARITY_FILE);
    io::write_pfm(&disparity_path, &cfg.disparity_sign.apply(&current))?;
    outputs.push(disparity_path);
    let conf_path = out_dir.join(CONFIDENCE_FILE);
    io::write_pfm(&conf_path, &confidence)?;
    outputs.push(conf_path);
    let conf_png = out_dir.join(CONFIDENCE_PNG);
    io::write_png_gray(&conf_png, &confidence)?;
    outputs.push(conf_png);

    let mut evaluation = Vec::new();
    if let Some(gt) = gt {
        let at_full = !cfg.half_resolution || cfg.eval_full_res;
        let (gt, rig) = if at_full {
            (gt, cfg.rig)
        } else {
            let rig = cfg.rig.map(|r| CameraRig {
                focal_px: 0.5 * r.focal_px,
                ..r
            });
            (decimate_gt(&gt)?, rig)
        };
        let to_eval_grid = |d: &DisparityMap| {
            if cfg.half_resolution && at_full {
                upsample_disparity(d, full_dims.0, full_dims.1)
            } else {
                d.clone()
            }
        };
        for (name, disp) in &stages {
            let disp = to_eval_grid(disp);
            let untriangulated_pixels = (gt.depth.is_some() && rig.is_some()).then(|| {
                disp.data().iter().filter(|u| u.abs() <= MIN_DISPARITY).count()
            });
            evaluation.push(StageEval {
                stage: name.to_string(),
                reports: evaluate_all(&disp, &gt, rig.as_ref())?,
                untriangulated_pixels,
            });
        }
        let finite = PixelMask::from_vec(
            gt.disparity.width(),
            gt.disparity.height(),
            gt.disparity.data().iter().map(|v| v.is_finite()).collect(),
        )?;
        let err = io::error_map(&to_eval_grid(&current), &gt.disparity, &finite)?;
        let err_path = out_dir.join(ERROR_PNG);
        io::write_png_gray(&err_path, &err)?;
        outputs.push(err_path);
    }

    let report_path = out_dir.join(REPORT_FILE);
    outputs.push(report_path.clone());
    timings.total_s = start.elapsed().as_secs_f64();
    let report = RunReport {
        width: w,
        height: h,
        timings,
        ldr_outliers,
        evaluation,
        outputs,
        config: cfg.clone(),
    };
    write_json(&report_path, &report)?;
    Ok(report)
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// A set of samples sharing one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchManifest {
    #[serde(default)]
    pub config: PipelineConfig,
    /// Each sample writes to `output_dir/<name>` unless it names an output.
    pub output_dir: PathBuf,
    pub samples: Vec<BatchSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSample {
    pub name: String,
    #[serde(flatten)]
    pub paths: PipelinePaths,
}

impl BatchManifest {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid_config(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        let mut m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::invalid_config(format!("manifest: {e}")))?;
        if let Some(dir) = path.parent() {
            if m.output_dir.is_relative() {
                m.output_dir = dir.join(&m.output_dir);
            }
            for s in &mut m.samples {
                s.paths.resolve_relative(dir);
            }
        }
        Ok(m)
    }

    /// Per-sample configs; checks names are unique and non-empty.
    pub fn configs(&self) -> Result<Vec<(String, PipelineConfig)>> {
        let mut seen = std::collections::HashSet::new();
        self.samples
            .iter()
            .map(|s| {
                if s.name.is_empty() || !seen.insert(s.name.as_str()) {
                    return Err(Error::invalid_config(format!(
                        "batch sample names must be unique and non-empty: {:?}",
                        s.name
                    )));
                }
                let mut cfg = self.config.clone();
                cfg.paths = s.paths.clone();
                if cfg.paths.output.is_none() {
                    cfg.paths.output = Some(self.output_dir.join(&s.name));
                }
                Ok((s.name.clone(), cfg))
            })
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct BatchEntry {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Exit code the sample would have produced on its own.
    pub exit_code: i32,
}

/// Run every sample independently and in parallel. All configs are validated
/// before any sample runs.
pub fn run_batch(manifest: &BatchManifest) -> Result<Vec<BatchEntry>> {
    let configs = manifest.configs()?;
    for (_, cfg) in &configs {
        cfg.validate()?;
    }
    Ok(configs
        .par_iter()
        .map(|(name, cfg)| match run_pipeline(cfg) {
            Ok(report) => BatchEntry {
                name: name.clone(),
                report: Some(report),
                error: None,
                exit_code: 0,
            },
            Err(e) => BatchEntry {
                name: name.clone(),
                report: None,
                error: Some(e.to_string()),
                exit_code: e.exit_code(),
            },
        })
        .collect())
}

/// Size the global rayon pool from `DISPREFINE_THREADS`. Returns the thread
/// count that was applied, or `None` when the variable is unset.
pub fn init_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid_config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid_config(format!("thread pool: {e}")))?;
    Ok(Some(n))
}

/// Write a generated scene as pipeline inputs: `left.png`, `right.png`,
/// `gt_disparity.pfm`, `occlusion.png`, `specular.png` and `init_disparity.pfm`
/// (the corrupted map if given, else ground truth). Disparities are in the
/// internal sign convention. Returns paths ready for [`run_pipeline`], with
/// the output directory left unset.
pub fn export_scene(scene: &Scene, corruption: Option<&Corruption>, dir: impl AsRef<Path>) -> Result<PipelinePaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let left = dir.join("left.png");
    let right = dir.join("right.png");
    let gt = dir.join("gt_disparity.pfm");
    let occ = dir.join("occlusion.png");
    let init = dir.join("init_disparity.pfm");
    io::write_png_rgb(&left, &scene.left)?;
    io::write_png_rgb(&right, &scene.right)?;
    io::write_pfm(&gt, &scene.gt_disparity)?;
    io::write_mask(&occ, &scene.occlusion)?;
    io::write_mask(dir.join("specular.png"), &scene.specular)?;
    match corruption {
        Some(c) => {
            io::write_pfm(&init, &c.disparity)?;
            io::write_mask(dir.join("corruption_mask.png"), &c.mask)?;
        }
        None => io::write_pfm(&init, &scene.gt_disparity)?,
    }
    Ok(PipelinePaths {
        left: Some(left),
        right: Some(right),
        init_disparity: Some(init),
        gt_disparity: Some(gt),
        gt_depth: None,
        occlusion_mask: Some(occ),
        output: None,
    })
}
