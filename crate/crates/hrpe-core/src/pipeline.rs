//! End-to-end multipath extraction.
//!
//! One iteration of the outer loop: rebuild the residual from the per-element
//! estimates that no path has claimed yet, locate the strongest arrival in
//! the phase-mode delay-azimuth spectrum, recover its elevation by counting
//! trajectory support across the ring, claim the per-element evidence, refine
//! all five path parameters against the spherical steering model, and remove
//! the claimed estimates. The loop stops when the best remaining trajectory
//! is supported by fewer elements than the threshold, when nothing is left,
//! or after a hard iteration cap.
//!
//! # Example
//!
//! ```
//! use hrpe_core::channel::{
//!     synthesize_channel, ArrayGeometry, FrequencyGrid, GainMask, NoiseSpec, PathParams,
//! };
//! use hrpe_core::pipeline::{run, PipelineConfig};
//! use num_complex::Complex64;
//! use std::f64::consts::FRAC_PI_2;
//!
//! let geom = ArrayGeometry::new(0.5, 72).unwrap();
//! let grid = FrequencyGrid::new(2.8e9, 3.0e9, 64).unwrap();
//! let path = PathParams::new(30e-9, 0.7, FRAC_PI_2, 5.0, Complex64::new(1.0, 0.0)).unwrap();
//! let out = synthesize_channel(
//!     &geom,
//!     &grid,
//!     &[path],
//!     &[GainMask::uniform(72)],
//!     &NoiseSpec { variance: 0.0, seed: 0 },
//! )
//! .unwrap();
//!
//! let result = run(&out, &PipelineConfig::default()).unwrap();
//! assert_eq!(result.paths.len(), 1);
//! assert!((result.paths[0].delay - 30e-9).abs() < 2e-10);
//! assert!((result.paths[0].azimuth - 0.7).abs() < 0.01);
//! ```

use num_complex::Complex64;

use crate::channel::{wrap_azimuth, ArrayOutput, PathParams};
use crate::error::{Error, Result};
use crate::phase_mode::{delay_azimuth_spectrum, find_dominant_peak, max_mode, phase_mode_transform};
use crate::refine::{refine_path, RefineConfig};
use crate::sage::{estimate_all, ElementEstimateSet, SageConfig};
use crate::trajectory::{
    estimate_elevation, remove_trajectory, select_trajectory, Trajectory, TrajectoryArea,
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub sage: SageConfig,
    /// Delay-axis padding of the search spectrum.
    pub pad_delay: usize,
    /// Azimuth-axis padding of the search spectrum.
    pub pad_azimuth: usize,
    /// Trajectory band half-width in units of `1/B`.
    pub half_width_bw: f64,
    /// Elevation scan step, degrees.
    pub theta_step_deg: f64,
    pub refine: RefineConfig,
    /// Minimum supporting elements to accept a trajectory; `None` uses
    /// `floor(P/2)`.
    pub support_threshold: Option<usize>,
    pub max_iterations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sage: SageConfig::default(),
            pad_delay: 4,
            pad_azimuth: 2,
            half_width_bw: 0.5,
            theta_step_deg: 1.0,
            refine: RefineConfig::default(),
            support_threshold: None,
            max_iterations: 50,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sage.validate()?;
        self.refine.validate()?;
        if self.pad_delay == 0 || self.pad_azimuth == 0 {
            return Err(Error::invalid("spectrum padding factors must be >= 1"));
        }
        if !self.half_width_bw.is_finite() || self.half_width_bw <= 0.0 {
            return Err(Error::invalid("half_width_bw must be finite and > 0"));
        }
        if !(0.0..=90.0).contains(&self.theta_step_deg) || self.theta_step_deg == 0.0 {
            return Err(Error::invalid("theta_step_deg must lie in (0, 90]"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if self.support_threshold == Some(0) {
            return Err(Error::invalid("support_threshold must be >= 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// One fully parameterized arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractedPath {
    pub delay: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub amplitude: Complex64,
    pub support_count: usize,
    /// Steering correlation magnitude at the final fit.
    pub score: f64,
    /// Spectrum peak that seeded this path.
    pub init_delay: f64,
    pub init_azimuth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub peak_delay: f64,
    pub peak_azimuth: f64,
    pub peak_power: f64,
    pub elevation: f64,
    pub plateau_low: f64,
    pub plateau_high: f64,
    pub support_count: usize,
    pub removed: usize,
    /// `Σ|α|²` over the estimates still unclaimed afterwards.
    pub residual_estimate_power: f64,
}

/// Power bookkeeping in per-element amplitude units: every estimate the
/// front end produced is either claimed by a path or still in the residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// `Σ|Y(p,k)|²` of the input snapshot.
    pub input_power: f64,
    /// `Σ|α|²` over all per-element estimates before extraction.
    pub estimate_power: f64,
    /// `Σ|α|²` over estimates claimed by extracted paths.
    pub claimed_power: f64,
    /// `Σ|α|²` over estimates left unclaimed.
    pub residual_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Best remaining trajectory fell under the support threshold.
    SupportBelowThreshold,
    /// Residual spectrum is empty.
    NoPeak,
    /// Refinement could not place a physical source on the trajectory.
    DegenerateRefinement,
    MaxIterations,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::SupportBelowThreshold => "support below threshold",
            StopReason::NoPeak => "no residual peak",
            StopReason::DegenerateRefinement => "degenerate refinement",
            StopReason::MaxIterations => "iteration cap reached",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    /// Extraction order, strongest residual peak first.
    pub paths: Vec<ExtractedPath>,
    /// The per-element evidence each path claimed, same order as `paths`.
    pub trajectories: Vec<Trajectory>,
    /// Per-element estimates no path claimed.
    pub residual: ElementEstimateSet,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub energy: EnergyReport,
    pub stop_reason: StopReason,
}

// ---------------------------------------------------------------------------
// Outer loop
// ---------------------------------------------------------------------------

/// Run the full extraction on one snapshot.
pub fn run(out: &ArrayOutput, cfg: &PipelineConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let geom = *out.geometry();
    let grid = *out.grid();
    if geom.radius() <= 0.0 {
        return Err(Error::invalid("extraction requires a positive array radius"));
    }

    let p_count = geom.num_elements();
    let k_count = grid.num_points();
    let threshold = cfg.support_threshold.unwrap_or(p_count / 2).max(1);
    let half_width = cfg.half_width_bw / grid.bandwidth();
    let modes = max_mode(&geom, &grid);

    let mut residual_set = estimate_all(out, &cfg.sage)?;
    let estimate_power = residual_set.total_power();
    let input_power = out.mean_power() * (p_count * k_count) as f64;

    let mut paths = Vec::new();
    let mut trajectories = Vec::new();
    let mut diagnostics = Vec::new();
    let mut claimed_power = 0.0f64;
    let mut stop_reason = StopReason::MaxIterations;

    for iteration in 0..cfg.max_iterations {
        if residual_set.total_count() == 0 {
            stop_reason = StopReason::NoPeak;
            break;
        }
        let residual_out = residual_set.reconstruct_output()?;
        let response = phase_mode_transform(&residual_out, modes)?;
        let spectrum = delay_azimuth_spectrum(&response, cfg.pad_delay, cfg.pad_azimuth)?;
        let Some(peak) = find_dominant_peak(&spectrum) else {
            stop_reason = StopReason::NoPeak;
            break;
        };

        let elevation = estimate_elevation(
            &residual_set,
            peak.delay,
            peak.azimuth,
            half_width,
            cfg.theta_step_deg.to_radians(),
        )?;
        if elevation.count < threshold {
            stop_reason = StopReason::SupportBelowThreshold;
            break;
        }

        let area = TrajectoryArea::new(
            &geom,
            peak.delay,
            peak.azimuth,
            elevation.elevation,
            half_width,
        )?;
        let traj = select_trajectory(&residual_set, &area)?;

        // Centre the elevation refinement on the support plateau; the count
        // curve tops out anywhere on it, not necessarily near the truth.
        let plateau_mid = 0.5 * (elevation.plateau_low + elevation.plateau_high);
        let plateau_half = 0.5 * (elevation.plateau_high - elevation.plateau_low);
        let refine_cfg = RefineConfig {
            elevation_center_deg: Some(plateau_mid.to_degrees().clamp(0.0, 90.0)),
            elevation_window_deg: plateau_half.to_degrees() + 2.0,
            ..cfg.refine
        };
        let refined = match refine_path(&traj, &geom, &grid, &refine_cfg) {
            Ok(r) => r,
            Err(Error::DegenerateInput(_)) => {
                stop_reason = StopReason::DegenerateRefinement;
                break;
            }
            Err(e) => return Err(e),
        };

        paths.push(ExtractedPath {
            delay: refined.delay,
            azimuth: refined.azimuth,
            elevation: refined.elevation,
            distance: refined.distance,
            amplitude: refined.amplitude,
            support_count: traj.support_count,
            score: refined.score,
            init_delay: peak.delay,
            init_azimuth: peak.azimuth,
        });

        claimed_power += traj
            .selections
            .iter()
            .flatten()
            .map(|e| e.amplitude.norm_sqr())
            .sum::<f64>();
        let removed = remove_trajectory(&mut residual_set, &traj);
        diagnostics.push(IterationDiagnostics {
            iteration,
            peak_delay: peak.delay,
            peak_azimuth: peak.azimuth,
            peak_power: peak.power,
            elevation: elevation.elevation,
            plateau_low: elevation.plateau_low,
            plateau_high: elevation.plateau_high,
            support_count: traj.support_count,
            removed,
            residual_estimate_power: residual_set.total_power(),
        });
        trajectories.push(traj);
    }

    let energy = EnergyReport {
        input_power,
        estimate_power,
        claimed_power,
        residual_power: residual_set.total_power(),
    };
    Ok(PipelineResult {
        paths,
        trajectories,
        residual: residual_set,
        diagnostics,
        energy,
        stop_reason,
    })
}

// ---------------------------------------------------------------------------
// Evaluation against a known scene
// ---------------------------------------------------------------------------

/// Signed smallest angular difference, radians.
fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % std::f64::consts::TAU;
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    if d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchErrors {
    /// `|τ̂ - τ|`, seconds.
    pub delay: f64,
    /// `|φ̂ - φ|`, degrees, wrap-aware.
    pub azimuth_deg: f64,
    /// `|θ̂ - θ|`, degrees.
    pub elevation_deg: f64,
    /// `|d̂ - d| / d`.
    pub distance_rel: f64,
    /// `20 log10(|α̂| / |α|)`, dB.
    pub amplitude_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMatch {
    pub truth_index: usize,
    pub estimate_index: usize,
    pub errors: MatchErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub matches: Vec<PathMatch>,
    pub unmatched_truth: Vec<usize>,
    pub unmatched_estimates: Vec<usize>,
}

/// Greedily pair estimates with ground-truth paths by the combined distance
/// `|Δτ|·B + (|Δφ|° + |Δθ|°)/10`, closest pair first; pairs above `max_cost`
/// stay unmatched.
pub fn evaluate(
    truth: &[PathParams],
    estimates: &[ExtractedPath],
    bandwidth: f64,
    max_cost: f64,
) -> Evaluation {
    let cost = |t: &PathParams, e: &ExtractedPath| -> f64 {
        let dt = (t.delay - e.delay).abs() * bandwidth;
        let dp = angle_diff(wrap_azimuth(t.azimuth), e.azimuth).abs().to_degrees();
        let dth = (t.elevation - e.elevation).abs().to_degrees();
        dt + (dp + dth) / 10.0
    };

    let mut truth_left: Vec<usize> = (0..truth.len()).collect();
    let mut est_left: Vec<usize> = (0..estimates.len()).collect();
    let mut matches = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ti_pos, &ti) in truth_left.iter().enumerate() {
            for (ei_pos, &ei) in est_left.iter().enumerate() {
                let c = cost(&truth[ti], &estimates[ei]);
                if c <= max_cost && best.is_none_or(|(bc, _, _)| c < bc) {
                    best = Some((c, ti_pos, ei_pos));
                }
            }
        }
        let Some((_, ti_pos, ei_pos)) = best else { break };
        let ti = truth_left.remove(ti_pos);
        let ei = est_left.remove(ei_pos);
        let t = &truth[ti];
        let e = &estimates[ei];
        matches.push(PathMatch {
            truth_index: ti,
            estimate_index: ei,
            errors: MatchErrors {
                delay: (t.delay - e.delay).abs(),
                azimuth_deg: angle_diff(wrap_azimuth(t.azimuth), e.azimuth).abs().to_degrees(),
                elevation_deg: (t.elevation - e.elevation).abs().to_degrees(),
                distance_rel: (t.source_distance - e.distance).abs() / t.source_distance,
                amplitude_db: 20.0 * (e.amplitude.norm() / t.amplitude.norm()).log10(),
            },
        });
    }
    matches.sort_by_key(|m| m.truth_index);
    Evaluation { matches, unmatched_truth: truth_left, unmatched_estimates: est_left }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
