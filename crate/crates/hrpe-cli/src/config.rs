//! TOML estimation settings, one section per pipeline stage.
//!
//! Every key is optional; omitted keys take the library defaults, and the
//! fully resolved configuration is echoed into the run manifest so a result
//! bundle always records what actually ran. Unknown keys are rejected to
//! catch typos.
//!
//! ```toml
//! max_iterations = 50
//!
//! [sage]
//! max_paths = 20
//! dynamic_range_db = 30.0
//!
//! [spectrum]
//! pad_delay = 4
//! pad_azimuth = 2
//!
//! [trajectory]
//! half_width_bw = 0.5
//! support_threshold = 360
//!
//! [refine]
//! azimuth_window_deg = 2.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use hrpe_core::pipeline::PipelineConfig;
use hrpe_core::refine::RefineConfig;
use hrpe_core::sage::SageConfig;

use crate::error::{CliError, Result};

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SageSection {
    pub max_paths: usize,
    pub dynamic_range_db: f64,
    pub refinement_cycles: usize,
    pub delay_oversample: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor: Option<f64>,
}

impl Default for SageSection {
    fn default() -> Self {
        let d = SageConfig::default();
        Self {
            max_paths: d.max_paths,
            dynamic_range_db: d.dynamic_range_db,
            refinement_cycles: d.refinement_cycles,
            delay_oversample: d.delay_oversample,
            noise_floor: d.noise_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub pad_delay: usize,
    pub pad_azimuth: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self { pad_delay: d.pad_delay, pad_azimuth: d.pad_azimuth }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub half_width_bw: f64,
    pub theta_step_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_threshold: Option<usize>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self {
            half_width_bw: d.half_width_bw,
            theta_step_deg: d.theta_step_deg,
            support_threshold: d.support_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSection {
    pub azimuth_window_deg: f64,
    pub azimuth_step_deg: f64,
    pub elevation_window_deg: f64,
    pub elevation_step_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevation_center_deg: Option<f64>,
    pub distance_points: usize,
    pub coarse_factor: usize,
    pub delay_window_bw: f64,
    pub delay_step_bw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_index: Option<usize>,
}

impl Default for RefineSection {
    fn default() -> Self {
        let d = RefineConfig::default();
        Self {
            azimuth_window_deg: d.azimuth_window_deg,
            azimuth_step_deg: d.azimuth_step_deg,
            elevation_window_deg: d.elevation_window_deg,
            elevation_step_deg: d.elevation_step_deg,
            elevation_center_deg: d.elevation_center_deg,
            distance_points: d.distance_points,
            coarse_factor: d.coarse_factor,
            delay_window_bw: d.delay_window_bw,
            delay_step_bw: d.delay_step_bw,
            freq_index: d.freq_index,
        }
    }
}

// ---------------------------------------------------------------------------
// Top level
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    pub sage: SageSection,
    pub spectrum: SpectrumSection,
    pub trajectory: TrajectorySection,
    pub refine: RefineSection,
}

impl EstimateConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::format(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(path, &text)
    }

    pub fn to_pipeline(&self) -> PipelineConfig {
        let base = PipelineConfig::default();
        PipelineConfig {
            sage: SageConfig {
                max_paths: self.sage.max_paths,
                dynamic_range_db: self.sage.dynamic_range_db,
                refinement_cycles: self.sage.refinement_cycles,
                delay_oversample: self.sage.delay_oversample,
                noise_floor: self.sage.noise_floor,
            },
            pad_delay: self.spectrum.pad_delay,
            pad_azimuth: self.spectrum.pad_azimuth,
            half_width_bw: self.trajectory.half_width_bw,
            theta_step_deg: self.trajectory.theta_step_deg,
            refine: RefineConfig {
                azimuth_window_deg: self.refine.azimuth_window_deg,
                azimuth_step_deg: self.refine.azimuth_step_deg,
                elevation_window_deg: self.refine.elevation_window_deg,
                elevation_step_deg: self.refine.elevation_step_deg,
                elevation_center_deg: self.refine.elevation_center_deg,
                distance_points: self.refine.distance_points,
                coarse_factor: self.refine.coarse_factor,
                delay_window_bw: self.refine.delay_window_bw,
                delay_step_bw: self.refine.delay_step_bw,
                freq_index: self.refine.freq_index,
            },
            support_threshold: self.trajectory.support_threshold,
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
