mod common;

use std::path::Path;
use std::process::Command;

use disprefine::eval::MaskMode;
use disprefine::io::{read_pfm, write_pfm};
use disprefine::pipeline::{
    export_scene, run_batch, run_pipeline, BatchManifest, BatchSample, PipelineConfig, Stage,
    DISPARITY_FILE, ERROR_PNG, REPORT_FILE,
};
use disprefine::synth::{corrupt_disparity, gen_scene};

use common::*;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disprefine"))
}

fn small_scene(dir: &Path, corrupt: bool) -> disprefine::pipeline::PipelinePaths {
    let mut spec = sinusoid_spec(96, 80, 2);
    spec.specular.count = 0;
    let scene = gen_scene(&spec).unwrap();
    let bad = corrupt.then(|| {
        corrupt_disparity(
            &scene.gt_disparity,
            &disprefine::synth::CorruptionSpec {
                blob_count: 12,
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap()
    });
    export_scene(&scene, bad.as_ref(), dir).unwrap()
}

#[test]
fn ldr_on_perfect_scene_keeps_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = small_scene(dir.path(), false);
    paths.output = Some(dir.path().join("out"));
    let cfg = PipelineConfig {
        stage: Stage::Ldr,
        paths,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg).unwrap();
    let raw = report.stage_eval("raw").unwrap();
    let ldr = report.stage_eval("ldr").unwrap();
    let mode = MaskMode::OcclusionsExcluded;
    assert!((raw.rmse(mode).unwrap() - ldr.rmse(mode).unwrap()).abs() < 1e-6);
    assert!(dir.path().join("out").join(ERROR_PNG).is_file());
    assert!(report.timings.total_s >= 0.0);
}

#[test]
fn full_stage_is_monotone_on_acceptance_scene() {
    let dir = tempfile::tempdir().unwrap();
    let scene = standard_scene();
    let bad = corrupt_disparity(&scene.gt_disparity, &standard_corruption()).unwrap();
    let mut paths = export_scene(&scene, Some(&bad), dir.path()).unwrap();
    paths.output = Some(dir.path().join("out"));
    let cfg = PipelineConfig {
        paths,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg).unwrap();
    let get = |s: &str| {
        report
            .stage_eval(s)
            .unwrap()
            .rmse(MaskMode::OcclusionsExcluded)
            .unwrap()
    };
    let (raw, ldr, gdr) = (get("raw"), get("ldr"), get("gdr"));
    assert!(raw >= ldr && ldr >= gdr, "{raw} {ldr} {gdr}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(REPORT_FILE)).unwrap())
            .unwrap();
    let first = &json["evaluation"][0]["reports"][0];
    for key in ["rmse_disparity_px", "rmse_depth_mm", "valid_pixel_count", "mask_mode"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn half_resolution_evaluates_at_full_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = small_scene(dir.path(), false);
    paths.output = Some(dir.path().join("out"));
    let cfg = PipelineConfig {
        stage: Stage::Ldr,
        half_resolution: true,
        paths,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!((report.width, report.height), (48, 40));
    let r = &report.stage_eval("ldr").unwrap().reports[0];
    assert_eq!(r.valid_pixel_count, 96 * 80);
    // halving then upsampling a smooth surface loses little
    assert!(r.rmse_disparity_px < 0.5, "{}", r.rmse_disparity_px);
}

#[test]
fn batch_runs_samples_independently() {
    let dir = tempfile::tempdir().unwrap();
    let good = small_scene(&dir.path().join("a"), true);
    let mut broken = good.clone();
    let garbage = dir.path().join("broken.pfm");
    std::fs::write(&garbage, b"Pf\n96 80\n-1.0\n\0\0").unwrap();
    broken.init_disparity = Some(garbage);
    let manifest = BatchManifest {
        config: PipelineConfig {
            stage: Stage::Ldr,
            ..PipelineConfig::default()
        },
        output_dir: dir.path().join("out"),
        samples: vec![
            BatchSample {
                name: "good".into(),
                paths: good,
            },
            BatchSample {
                name: "broken".into(),
                paths: broken,
            },
        ],
    };
    let entries = run_batch(&manifest).unwrap();
    assert_eq!(entries[0].exit_code, 0);
    assert!(entries[0].report.is_some());
    assert_eq!(entries[1].exit_code, 2);
    assert!(dir.path().join("out/good").join(DISPARITY_FILE).is_file());
}

#[test]
fn cli_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("scene.json"),
        r#"{"width": 80, "height": 64, "texture": {"kind": "random-smooth"},
            "disparity": {"kind": "sinusoid", "base": 12, "amplitude": 1.5, "period": 64},
            "seed": 4}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("corruption.json"),
        r#"{"blob_count": 10, "seed": 2}"#,
    )
    .unwrap();
    let status = cli()
        .current_dir(dir.path())
        .args(["synth", "--scene", "scene.json", "--corruption", "corruption.json", "-o", "s"])
        .status()
        .unwrap();
    assert!(status.success());

    let mut outputs = Vec::new();
    for run in ["r1", "r2"] {
        let out = cli()
            .current_dir(dir.path())
            .env("DISPREFINE_THREADS", "1")
            .args(["refine", "--config", "s/pipeline.json", "--warps", "20", "-o", run])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["config"]["gdr"]["warps"], 20);
        outputs.push(std::fs::read(dir.path().join(run).join(DISPARITY_FILE)).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    let out = cli()
        .current_dir(dir.path())
        .args([
            "eval",
            "--pred",
            "r1/disparity.pfm",
            "--gt",
            "s/gt_disparity.pfm",
            "--occlusion",
            "s/occlusion.png",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports[1]["mask_mode"], "occlusions-excluded");
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str], env: Option<&str>| {
        let mut cmd = cli();
        cmd.current_dir(dir.path()).args(args);
        if let Some(v) = env {
            cmd.env("DISPREFINE_THREADS", v);
        }
        cmd.output().unwrap().status.code().unwrap()
    };
    let pfm = dir.path().join("d.pfm");
    write_pfm(&pfm, &disprefine::image::ImageBuffer::zeros(4, 4, 1)).unwrap();
    std::fs::write(dir.path().join("bad.pfm"), b"nonsense").unwrap();

    assert_eq!(code(&["eval", "--pred", "d.pfm", "--gt", "d.pfm"], None), 0);
    assert_eq!(code(&["eval", "--pred", "bad.pfm", "--gt", "d.pfm"], None), 2);
    assert_eq!(code(&["eval", "--pred", "d.pfm", "--gt", "d.pfm"], Some("0")), 1);
    assert_eq!(code(&["refine", "--left", "missing.png"], None), 1);
    assert_eq!(code(&["refine", "--levels", "0"], None), 1);
    assert_eq!(code(&["no-such-command"], None), 1);
    assert_eq!(code(&["batch", "--manifest", "missing.json"], None), 1);
    assert!(read_pfm(&pfm).is_ok());
}
