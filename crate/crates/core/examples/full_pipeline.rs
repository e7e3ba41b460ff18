//! Files in, files out: export a corrupted synthetic scene, run the three
//! pipeline configurations on it and compare their reports.

use disprefine::eval::MaskMode;
use disprefine::pipeline::{export_scene, run_pipeline, PipelineConfig, Stage};
use disprefine::synth::{corrupt_disparity, gen_scene, CorruptionSpec, DisparityModel, SceneSpec};

fn main() -> disprefine::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("disprefine-pipeline"));

    let mut spec = SceneSpec::shifted(360, 288, 0.0, 21);
    spec.disparity = DisparityModel::Sinusoid {
        base: 20.0,
        amplitude: 2.0,
        period: 128.0,
    };
    spec.specular.count = 6;
    spec.specular.radius = 6.0;
    let scene = gen_scene(&spec)?;
    let bad = corrupt_disparity(
        &scene.gt_disparity,
        &CorruptionSpec {
            blob_count: 120,
            seed: 4,
            ..CorruptionSpec::default()
        },
    )?;
    let inputs = export_scene(&scene, Some(&bad), dir.join("scene"))?;

    for stage in [Stage::Ldr, Stage::Gdr, Stage::Full] {
        let mut cfg = PipelineConfig {
            stage,
            paths: inputs.clone(),
            ..PipelineConfig::default()
        };
        cfg.paths.output = Some(dir.join(format!("{stage:?}").to_lowercase()));
        let report = run_pipeline(&cfg)?;
        let rmse: Vec<String> = report
            .evaluation
            .iter()
            .map(|e| format!("{} {:.3}", e.stage, e.rmse(MaskMode::OcclusionsExcluded).unwrap_or(f64::NAN)))
            .collect();
        println!(
            "{stage:?}: {} in {:.2}s",
            rmse.join(" -> "),
            report.timings.total_s
        );
    }
    println!("outputs under {}", dir.display());
    Ok(())
}
