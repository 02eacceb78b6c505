//! Whole-pipeline scenes at the desk-array scale: 72 elements on a 0.5 m
//! ring sweeping 2.8-3.0 GHz.

use hrpe_core::channel::{
    synthesize_channel, ArrayGeometry, FrequencyGrid, GainMask, NoiseSpec, PathParams,
};
use hrpe_core::pipeline::{evaluate, run, PipelineConfig, StopReason};
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

fn desk() -> (ArrayGeometry, FrequencyGrid) {
    (
        ArrayGeometry::new(0.5, 72).unwrap(),
        FrequencyGrid::new(2.8e9, 3.0e9, 128).unwrap(),
    )
}

#[test]
fn three_noisy_paths_are_recovered_in_strength_order() {
    let (geom, grid) = desk();
    let paths = [
        PathParams::new(25e-9, 30f64.to_radians(), FRAC_PI_2, 5.0, Complex64::new(1.0, 0.0))
            .unwrap(),
        PathParams::new(60e-9, 150f64.to_radians(), 70f64.to_radians(), 9.0,
            Complex64::from_polar(0.5, 1.0))
            .unwrap(),
        PathParams::new(110e-9, 260f64.to_radians(), 55f64.to_radians(), 15.0,
            Complex64::new(0.0, 0.3))
            .unwrap(),
    ];
    let masks = vec![GainMask::uniform(72); 3];
    // Per-sample signal power is about 1.3; this is roughly 35 dB SNR.
    let out = synthesize_channel(&geom, &grid, &paths, &masks, &NoiseSpec {
        variance: 4e-4,
        seed: 17,
    })
    .unwrap();

    let result = run(&out, &PipelineConfig::default()).unwrap();
    assert!(result.paths.len() >= 3, "stop: {}", result.stop_reason);

    // Strongest first.
    let norms: Vec<f64> = result.paths.iter().map(|p| p.amplitude.norm()).collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "amplitudes {norms:?}");

    let eval = evaluate(&paths, &result.paths, grid.bandwidth(), 1.0);
    assert_eq!(eval.matches.len(), 3, "unmatched truth: {:?}", eval.unmatched_truth);
    for m in &eval.matches {
        assert!(m.errors.delay < 0.5e-9, "delay error {}", m.errors.delay);
        assert!(m.errors.azimuth_deg < 0.5, "azimuth error {}°", m.errors.azimuth_deg);
        assert!(m.errors.elevation_deg < 10.0, "elevation error {}°", m.errors.elevation_deg);
        assert!(m.errors.amplitude_db.abs() < 1.0, "amplitude error {} dB", m.errors.amplitude_db);
    }
}

#[test]
fn partially_visible_path_is_left_unclaimed() {
    let (geom, grid) = desk();
    let strong =
        PathParams::new(30e-9, 1.0, FRAC_PI_2, 5.0, Complex64::new(1.0, 0.0)).unwrap();
    let hidden =
        PathParams::new(80e-9, 4.0, FRAC_PI_2, 10.0, Complex64::new(0.0, 0.6)).unwrap();
    let masks = vec![
        GainMask::uniform(72),
        // 20 visible elements sit below the default threshold of 36.
        GainMask::from_visible_ranges(72, &[(10, 29)]).unwrap(),
    ];
    let out = synthesize_channel(&geom, &grid, &[strong, hidden], &masks, &NoiseSpec {
        variance: 0.0,
        seed: 0,
    })
    .unwrap();

    let result = run(&out, &PipelineConfig::default()).unwrap();
    assert_eq!(result.paths.len(), 1, "stop: {}", result.stop_reason);
    assert_eq!(result.stop_reason, StopReason::SupportBelowThreshold);
    assert!((result.paths[0].delay - 30e-9).abs() < 0.5e-9);
    assert_eq!(result.paths[0].support_count, 72);

    // The hidden path's evidence stays in the residual rather than being
    // claimed by the visible one.
    assert!(result.energy.residual_power > 0.0);
}

#[test]
fn co_azimuth_paths_split_by_delay() {
    let (geom, grid) = desk();
    let near =
        PathParams::new(30e-9, 2.0, FRAC_PI_2, 6.0, Complex64::new(1.0, 0.0)).unwrap();
    let far =
        PathParams::new(50e-9, 2.0, 80f64.to_radians(), 12.0, Complex64::new(0.5, 0.0)).unwrap();
    let masks = vec![GainMask::uniform(72); 2];
    let out = synthesize_channel(&geom, &grid, &[near, far], &masks, &NoiseSpec {
        variance: 0.0,
        seed: 0,
    })
    .unwrap();

    let result = run(&out, &PipelineConfig::default()).unwrap();
    assert_eq!(result.paths.len(), 2, "stop: {}", result.stop_reason);

    let eval = evaluate(&[near, far], &result.paths, grid.bandwidth(), 1.0);
    assert_eq!(eval.matches.len(), 2, "unmatched truth: {:?}", eval.unmatched_truth);
    assert!(eval.unmatched_estimates.is_empty());
    for m in &eval.matches {
        assert!(m.errors.delay < 0.3e-9);
        assert!(m.errors.azimuth_deg < 0.5);
    }
}
