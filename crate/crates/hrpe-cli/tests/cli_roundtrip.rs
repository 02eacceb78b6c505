//! End-to-end command flows over real files: synthesize, estimate, evaluate,
//! and the property that every artifact is reproducible byte for byte.

use std::path::{Path, PathBuf};

use hrpe_cli::commands::{
    cmd_cpdp, cmd_estimate, cmd_eval, cmd_spectrum, cmd_synth, MANIFEST_FILE, PATHS_FILE,
};
use hrpe_cli::formats::{read_cpdp_csv, read_paths_csv, read_spectrum_binary};
use hrpe_cli::manifest::RunManifest;
use hrpe_cli::scenario::load_scenario;
use hrpe_core::channel::{element_path_params, Window};

fn template(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn write_scene(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scene.txt");
    std::fs::write(&p, text).unwrap();
    p
}

const DESK_TWO_PATH: &str = "\
radius = 0.5
elements = 72
f_start_hz = 2.8e9
f_stop_hz = 3.0e9
points = 128
noise_variance = 2e-4
seed = 11

[paths]
25.0  30.0 90.0  5.0 1.0  0.0
60.0 150.0 70.0  9.0 0.27 -0.42
";

#[test]
fn desk_template_synthesizes_the_documented_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("desk.ucah");
    let summary = cmd_synth(&template("desk_los.txt"), &out, None).unwrap();
    assert_eq!((summary.elements, summary.points), (72, 128));

    let snapshot = hrpe_cli::formats::read_snapshot(&out).unwrap();
    assert_eq!(snapshot.matrix().dim(), (72, 128));
    assert!(snapshot.mean_power() > 0.5);
}

#[test]
fn synth_estimate_eval_closes_the_loop_on_one_path() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "radius = 0.5\nelements = 72\nf_start_hz = 2.8e9\nf_stop_hz = 3.0e9\npoints = 64\n\
         \n[paths]\n25.0 30.0 90.0 5.0 1.0 0.0\n",
    );
    let snap = dir.path().join("scene.ucah");
    cmd_synth(&scene, &snap, None).unwrap();

    let bundle = dir.path().join("result");
    let summary = cmd_estimate(&snap, None, &bundle).unwrap();
    assert_eq!(summary.paths, 1);

    let paths = read_paths_csv(&bundle.join(PATHS_FILE)).unwrap();
    assert_eq!(paths.len(), 1);
    assert!((paths[0].delay - 25e-9).abs() < 1e-11);
    assert!((paths[0].azimuth.to_degrees() - 30.0).abs() < 0.2);

    let (eval, report) = cmd_eval(&bundle, &scene).unwrap();
    assert_eq!(eval.matches.len(), 1);
    assert!(eval.unmatched_truth.is_empty());
    assert!(eval.unmatched_estimates.is_empty());
    let e = &eval.matches[0].errors;
    assert!(e.delay < 1e-11);
    assert!(e.azimuth_deg < 0.2);
    assert!(e.amplitude_db.abs() < 0.2);
    assert!(report.contains("1 truth, 1 estimated, 1 matched"));
    assert!(report.contains("unmatched truth: (none)"));
}

#[test]
fn estimate_is_deterministic_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), DESK_TWO_PATH);
    let snap = dir.path().join("scene.ucah");
    cmd_synth(&scene, &snap, None).unwrap();

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_estimate(&snap, None, &a).unwrap();
    cmd_estimate(&snap, None, &b).unwrap();
    for file in [PATHS_FILE, "trajectories.csv", "diagnostics.csv", "residual.csv"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn estimate_rejects_corrupted_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), DESK_TWO_PATH);
    let snap = dir.path().join("scene.ucah");
    cmd_synth(&scene, &snap, None).unwrap();

    let mut bytes = std::fs::read(&snap).unwrap();
    bytes[..4].copy_from_slice(b"JUNK");
    std::fs::write(&snap, &bytes).unwrap();

    let err = cmd_estimate(&snap, None, &dir.path().join("out")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("bad magic"));
}

#[test]
fn missing_config_keys_fall_back_to_defaults_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(
        dir.path(),
        "radius = 0.5\nelements = 72\nf_start_hz = 2.8e9\nf_stop_hz = 3.0e9\npoints = 64\n\
         \n[paths]\n25.0 30.0 90.0 5.0 1.0 0.0\n",
    );
    let snap = dir.path().join("scene.ucah");
    cmd_synth(&scene, &snap, None).unwrap();

    let config = dir.path().join("partial.toml");
    std::fs::write(&config, "[sage]\nmax_paths = 5\n").unwrap();

    let bundle = dir.path().join("result");
    cmd_estimate(&snap, Some(&config), &bundle).unwrap();

    let manifest = RunManifest::load(&bundle.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.config.sage.max_paths, 5);
    // Untouched keys echo the library defaults.
    assert_eq!(manifest.config.spectrum.pad_delay, 4);
    assert_eq!(manifest.config.trajectory.half_width_bw, 0.5);
    let text = std::fs::read_to_string(bundle.join(MANIFEST_FILE)).unwrap();
    assert!(text.contains("pad_delay = 4"));
    assert!(text.contains("max_paths = 5"));

    // The digest in the manifest matches the input bytes.
    assert_eq!(manifest.input_sha256, hrpe_cli::manifest::sha256_file(&snap).unwrap());
}

#[test]
fn cpdp_peak_delay_tracks_the_element_distance_law() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("desk.ucah");
    cmd_synth(&template("desk_los.txt"), &snap, None).unwrap();

    let out = dir.path().join("cpdp.csv");
    cmd_cpdp(&snap, &out, Window::Hann, 8).unwrap();
    let profile = read_cpdp_csv(&out).unwrap();
    assert_eq!(profile.power.nrows(), 72);

    let scenario = load_scenario(&template("desk_los.txt")).unwrap();
    let geom = scenario.geometry().unwrap();
    let bin = profile.delays[1] - profile.delays[0];
    for p in 0..geom.num_elements() {
        let (expected, _) = element_path_params(&geom, &scenario.paths[0], p).unwrap();
        let row = profile.power.row(p);
        let peak = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(t, _)| profile.delays[t])
            .unwrap();
        assert!(
            (peak - expected).abs() <= bin,
            "element {p}: peak {peak} vs expected {expected}"
        );
    }
}

#[test]
fn spectrum_binary_and_csv_agree_through_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("desk.ucah");
    cmd_synth(&template("desk_los.txt"), &snap, None).unwrap();

    let bin = dir.path().join("s.ucas");
    let summary = cmd_spectrum(&snap, &bin, (2, 2)).unwrap();
    let spectrum = read_spectrum_binary(&bin).unwrap();
    assert_eq!(spectrum.power.dim(), (summary.rows, summary.cols));

    // Peak must land on the scene's true delay and azimuth.
    let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
    for ((a, t), &v) in spectrum.power.indexed_iter() {
        if v > best {
            best = v;
            at = (a, t);
        }
    }
    let delay = spectrum.delays[at.1];
    let azimuth = spectrum.azimuths[at.0].to_degrees();
    assert!((delay - 16.678e-9).abs() < 2.0 * (spectrum.delays[1] - spectrum.delays[0]));
    assert!((azimuth - 180.0).abs() < 1.0);
}
