//! The five batch operations behind the subcommands.
//!
//! Each command is a plain function from input paths to output files plus a
//! small summary struct, so the whole surface is testable without spawning
//! processes. Determinism contract: outputs depend only on file contents and
//! flags; noise seeds live in scenario files.

use std::path::{Path, PathBuf};

use hrpe_core::channel::{cpdp, synthesize_channel, Window};
use hrpe_core::phase_mode::{delay_azimuth_spectrum, max_mode, phase_mode_transform};
use hrpe_core::pipeline::{evaluate, run, EnergyReport, Evaluation, StopReason};

use crate::config::EstimateConfig;
use crate::error::Result;
use crate::formats::{
    read_paths_csv, read_snapshot, write_cpdp_csv, write_diagnostics_csv, write_paths_csv,
    write_residual_csv, write_snapshot, write_spectrum_binary, write_spectrum_csv,
    write_trajectories_csv,
};
use crate::manifest::RunManifest;
use crate::scenario::load_scenario;

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub elements: usize,
    pub points: usize,
    pub out: PathBuf,
}

pub fn cmd_synth(
    scenario_path: &Path,
    out_path: &Path,
    seed_override: Option<u64>,
) -> Result<SynthSummary> {
    let mut scenario = load_scenario(scenario_path)?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    let geometry = scenario.geometry()?;
    let grid = scenario.grid()?;
    let output = synthesize_channel(
        &geometry,
        &grid,
        &scenario.paths,
        &scenario.masks,
        &scenario.noise(),
    )?;
    write_snapshot(out_path, &output)?;
    Ok(SynthSummary {
        elements: geometry.num_elements(),
        points: grid.num_points(),
        out: out_path.to_owned(),
    })
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

pub const PATHS_FILE: &str = "paths.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const RESIDUAL_FILE: &str = "residual.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub paths: usize,
    pub stop_reason: StopReason,
    pub energy: EnergyReport,
    pub out_dir: PathBuf,
}

pub fn cmd_estimate(
    input: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<EstimateSummary> {
    let config = match config_path {
        Some(p) => EstimateConfig::load(p)?,
        None => EstimateConfig::default(),
    };
    let snapshot = read_snapshot(input)?;
    let result = run(&snapshot, &config.to_pipeline())?;

    std::fs::create_dir_all(out_dir)?;
    write_paths_csv(&out_dir.join(PATHS_FILE), &result.paths)?;
    write_trajectories_csv(&out_dir.join(TRAJECTORIES_FILE), &result.trajectories)?;
    write_diagnostics_csv(&out_dir.join(DIAGNOSTICS_FILE), &result.diagnostics)?;
    write_residual_csv(&out_dir.join(RESIDUAL_FILE), &result.residual)?;
    let manifest = RunManifest::new(input, config)?;
    std::fs::write(out_dir.join(MANIFEST_FILE), manifest.to_toml()?)?;

    Ok(EstimateSummary {
        paths: result.paths.len(),
        stop_reason: result.stop_reason,
        energy: result.energy,
        out_dir: out_dir.to_owned(),
    })
}

// ---------------------------------------------------------------------------
// spectrum / cpdp
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub rows: usize,
    pub cols: usize,
    pub out: PathBuf,
}

/// Writes the joint delay-azimuth power spectrum; the `.ucas` extension
/// selects the binary container, anything else CSV.
pub fn cmd_spectrum(input: &Path, out: &Path, pads: (usize, usize)) -> Result<GridSummary> {
    let snapshot = read_snapshot(input)?;
    let modes = max_mode(snapshot.geometry(), snapshot.grid());
    let response = phase_mode_transform(&snapshot, modes)?;
    let spectrum = delay_azimuth_spectrum(&response, pads.0, pads.1)?;
    if out.extension().is_some_and(|e| e == "ucas") {
        write_spectrum_binary(out, &spectrum)?;
    } else {
        write_spectrum_csv(out, &spectrum)?;
    }
    Ok(GridSummary {
        rows: spectrum.azimuths.len(),
        cols: spectrum.delays.len(),
        out: out.to_owned(),
    })
}

pub fn cmd_cpdp(input: &Path, out: &Path, window: Window, pad: usize) -> Result<GridSummary> {
    let snapshot = read_snapshot(input)?;
    let profile = cpdp(&snapshot, window, pad)?;
    write_cpdp_csv(out, &profile)?;
    Ok(GridSummary {
        rows: profile.power.nrows(),
        cols: profile.delays.len(),
        out: out.to_owned(),
    })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Pairs above this combined delay/angle distance stay unmatched.
const MATCH_COST_LIMIT: f64 = 1.0;

pub fn cmd_eval(result_dir: &Path, scenario_path: &Path) -> Result<(Evaluation, String)> {
    let estimates = read_paths_csv(&result_dir.join(PATHS_FILE))?;
    let scenario = load_scenario(scenario_path)?;
    let bandwidth = scenario.grid()?.bandwidth();
    let evaluation = evaluate(&scenario.paths, &estimates, bandwidth, MATCH_COST_LIMIT);
    let report = render_report(&evaluation, scenario.paths.len(), estimates.len());
    Ok((evaluation, report))
}

fn render_report(eval: &Evaluation, truth_count: usize, estimate_count: usize) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "paths: {truth_count} truth, {estimate_count} estimated, {} matched",
        eval.matches.len()
    );
    for m in &eval.matches {
        let e = &m.errors;
        let _ = writeln!(
            s,
            "truth {} <- estimate {}: |dtau| {:.3e} s, |dphi| {:.4} deg, \
             |dtheta| {:.4} deg, |dd|/d {:.3e}, amp {:+.3} dB",
            m.truth_index, m.estimate_index, e.delay, e.azimuth_deg, e.elevation_deg,
            e.distance_rel, e.amplitude_db,
        );
    }
    let list = |ids: &[usize]| -> String {
        if ids.is_empty() {
            "(none)".to_owned()
        } else {
            ids.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        }
    };
    let _ = writeln!(s, "unmatched truth: {}", list(&eval.unmatched_truth));
    let _ = writeln!(s, "unmatched estimates: {}", list(&eval.unmatched_estimates));
    s
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
