//! Delay-trajectory identification across the ring.
//!
//! A single arrival traces a sinusoid-like delay trajectory over the array:
//! element `p` sees the arrival earlier by `(r/c) sinθ cos(φ - φ_p)`. Given a
//! coarse `(τ̂, φ̂)` from the delay-azimuth spectrum, sweeping a candidate
//! elevation and counting how many elements have a per-element estimate
//! inside a narrow band around the predicted trajectory both estimates the
//! elevation and collects the per-element evidence for one arrival.
//!
//! The count curve is flat-topped: near the true elevation every visible
//! element falls inside the band, so ties resolve toward larger elevations
//! and the full plateau is reported for downstream refinement.

use crate::channel::ArrayGeometry;
use crate::error::{Error, Result};
use crate::sage::{ElementEstimateSet, ElementPathEstimate};

// ---------------------------------------------------------------------------
// Trajectory geometry
// ---------------------------------------------------------------------------

/// Predicted arrival delay at element `p` for a far source at `(φ̂, θ)` whose
/// reference delay is `τ̂`: `T_θ(p) = τ̂ - (r/c) sinθ cos(φ̂ - φ_p)`.
pub fn trajectory_center(
    geom: &ArrayGeometry,
    tau_hat: f64,
    phi_hat: f64,
    elevation: f64,
    p: usize,
) -> Result<f64> {
    if p >= geom.num_elements() {
        return Err(Error::invalid(format!(
            "element index {p} out of range for {}-element array",
            geom.num_elements()
        )));
    }
    Ok(tau_hat
        - geom.radius() / crate::channel::SPEED_OF_LIGHT
            * elevation.sin()
            * (phi_hat - geom.element_azimuth(p)).cos())
}

/// A delay band of `±half_width` around one candidate trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryArea {
    pub tau_hat: f64,
    pub phi_hat: f64,
    pub elevation: f64,
    /// Seconds; band is inclusive on both sides.
    pub half_width: f64,
    /// Predicted delay per element.
    pub center_delays: Vec<f64>,
}

impl TrajectoryArea {
    pub fn new(
        geom: &ArrayGeometry,
        tau_hat: f64,
        phi_hat: f64,
        elevation: f64,
        half_width: f64,
    ) -> Result<Self> {
        if !tau_hat.is_finite() || !phi_hat.is_finite() || !elevation.is_finite() {
            return Err(Error::invalid("trajectory parameters must be finite"));
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::invalid(format!("half_width {half_width} must be > 0")));
        }
        let center_delays = (0..geom.num_elements())
            .map(|p| trajectory_center(geom, tau_hat, phi_hat, elevation, p))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { tau_hat, phi_hat, elevation, half_width, center_delays })
    }

    pub fn contains(&self, p: usize, delay: f64) -> bool {
        (delay - self.center_delays[p]).abs() <= self.half_width
    }
}

fn check_shape(set: &ElementEstimateSet, area: &TrajectoryArea) -> Result<()> {
    if set.per_element.len() != area.center_delays.len() {
        return Err(Error::mismatch(format!(
            "estimate set covers {} elements, trajectory area {}",
            set.per_element.len(),
            area.center_delays.len()
        )));
    }
    Ok(())
}

/// Number of elements with at least one estimate inside the band.
pub fn count_in_area(set: &ElementEstimateSet, area: &TrajectoryArea) -> Result<usize> {
    check_shape(set, area)?;
    Ok(set
        .per_element
        .iter()
        .enumerate()
        .filter(|(p, ests)| ests.iter().any(|e| area.contains(*p, e.delay)))
        .count())
}

// ---------------------------------------------------------------------------
// Elevation from the support count
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationEstimate {
    /// Argmax of the count curve; ties resolve to the largest elevation.
    pub elevation: f64,
    /// Supporting elements at the maximum.
    pub count: usize,
    /// Contiguous grid range around `elevation` holding the same count.
    pub plateau_low: f64,
    pub plateau_high: f64,
}

/// Sweep candidate elevations over `(0, π/2]` in steps of `theta_step` and
/// maximize the in-band support count.
pub fn estimate_elevation(
    set: &ElementEstimateSet,
    tau_hat: f64,
    phi_hat: f64,
    half_width: f64,
    theta_step: f64,
) -> Result<ElevationEstimate> {
    if !theta_step.is_finite() || theta_step <= 0.0 || theta_step > std::f64::consts::FRAC_PI_2 {
        return Err(Error::invalid(format!(
            "theta_step {theta_step} must lie in (0, π/2]"
        )));
    }
    let mut thetas: Vec<f64> = Vec::new();
    let mut theta = theta_step;
    while theta < std::f64::consts::FRAC_PI_2 {
        thetas.push(theta);
        theta += theta_step;
    }
    thetas.push(std::f64::consts::FRAC_PI_2);

    let mut counts = Vec::with_capacity(thetas.len());
    for &t in &thetas {
        let area = TrajectoryArea::new(&set.geometry, tau_hat, phi_hat, t, half_width)?;
        counts.push(count_in_area(set, &area)?);
    }

    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c >= counts[best] {
            best = i;
        }
    }
    let max_count = counts[best];
    let mut lo = best;
    while lo > 0 && counts[lo - 1] == max_count {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < counts.len() && counts[hi + 1] == max_count {
        hi += 1;
    }
    Ok(ElevationEstimate {
        elevation: thetas[best],
        count: max_count,
        plateau_low: thetas[lo],
        plateau_high: thetas[hi],
    })
}

// ---------------------------------------------------------------------------
// Selection and removal
// ---------------------------------------------------------------------------

/// Per-element estimates claimed by one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Entry `p` is the estimate element `p` contributes, if any.
    pub selections: Vec<Option<ElementPathEstimate>>,
    pub support_count: usize,
    pub elevation: f64,
    pub init_delay: f64,
    pub init_azimuth: f64,
}

/// Claim, for each element, the in-band estimate whose power in dB lies
/// closest to the global in-band mean. Interference spikes and grating
/// responses sit far from the common power level, so the consensus pick
/// rejects them even when they fall inside the band.
pub fn select_trajectory(set: &ElementEstimateSet, area: &TrajectoryArea) -> Result<Trajectory> {
    check_shape(set, area)?;

    let mut db_sum = 0.0f64;
    let mut db_count = 0usize;
    for (p, ests) in set.per_element.iter().enumerate() {
        for e in ests {
            if area.contains(p, e.delay) && e.amplitude.norm_sqr() > 0.0 {
                db_sum += e.power_db();
                db_count += 1;
            }
        }
    }
    let mean_db = if db_count > 0 { db_sum / db_count as f64 } else { 0.0 };

    let mut selections = Vec::with_capacity(set.per_element.len());
    let mut support = 0usize;
    for (p, ests) in set.per_element.iter().enumerate() {
        let pick = ests
            .iter()
            .filter(|e| area.contains(p, e.delay) && e.amplitude.norm_sqr() > 0.0)
            .min_by(|a, b| {
                let da = (a.power_db() - mean_db).abs();
                let db = (b.power_db() - mean_db).abs();
                da.partial_cmp(&db).unwrap()
            })
            .copied();
        if pick.is_some() {
            support += 1;
        }
        selections.push(pick);
    }
    Ok(Trajectory {
        selections,
        support_count: support,
        elevation: area.elevation,
        init_delay: area.tau_hat,
        init_azimuth: area.phi_hat,
    })
}

/// Delete each claimed estimate from the set (first value match per element).
/// Returns how many were removed.
pub fn remove_trajectory(set: &mut ElementEstimateSet, traj: &Trajectory) -> usize {
    let mut removed = 0usize;
    for (p, pick) in traj.selections.iter().enumerate() {
        let Some(sel) = pick else { continue };
        if p >= set.per_element.len() {
            break;
        }
        let ests = &mut set.per_element[p];
        if let Some(pos) = ests
            .iter()
            .position(|e| e.delay == sel.delay && e.amplitude == sel.amplitude)
        {
            ests.remove(pos);
            removed += 1;
        }
    }
    removed
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        synthesize_channel, FrequencyGrid, GainMask, NoiseSpec, PathParams, SPEED_OF_LIGHT,
    };
    use crate::sage::{estimate_all, SageConfig};
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_2;

    fn manual_set(geom: ArrayGeometry, grid: FrequencyGrid) -> ElementEstimateSet {
        ElementEstimateSet::empty(geom, grid)
    }

    fn est(delay: f64, mag: f64) -> ElementPathEstimate {
        ElementPathEstimate { delay, amplitude: Complex64::new(mag, 0.0) }
    }

    #[test]
    fn center_matches_closed_form() {
        let geom = ArrayGeometry::new(0.5, 8).unwrap();
        let tau = 20e-9;
        let facing = trajectory_center(&geom, tau, 0.0, FRAC_PI_2, 0).unwrap();
        assert_eq!(facing, tau - 0.5 / SPEED_OF_LIGHT * FRAC_PI_2.sin() * 1.0);
        let opposite = trajectory_center(&geom, tau, 0.0, FRAC_PI_2, 4).unwrap();
        assert!((opposite - (tau + 0.5 / SPEED_OF_LIGHT)).abs() < 1e-24);
        // Elevation enters through its sine.
        let tilted = trajectory_center(&geom, tau, 0.0, 0.5235987755982988, 0).unwrap();
        assert!((tilted - (tau - 0.5 / SPEED_OF_LIGHT * 0.5)).abs() < 1e-20);
        assert!(trajectory_center(&geom, tau, 0.0, FRAC_PI_2, 8).is_err());
    }

    #[test]
    fn area_band_is_inclusive() {
        let geom = ArrayGeometry::new(0.5, 4).unwrap();
        let area = TrajectoryArea::new(&geom, 30e-9, 0.0, FRAC_PI_2, 1e-9).unwrap();
        let c0 = area.center_delays[0];
        assert!(area.contains(0, c0 + 1e-9));
        assert!(area.contains(0, c0 - 1e-9));
        assert!(!area.contains(0, c0 + 1.0000001e-9));
        assert!(TrajectoryArea::new(&geom, 30e-9, 0.0, FRAC_PI_2, 0.0).is_err());
        assert!(TrajectoryArea::new(&geom, f64::NAN, 0.0, FRAC_PI_2, 1e-9).is_err());
    }

    #[test]
    fn count_ignores_duplicate_hits_per_element() {
        let geom = ArrayGeometry::new(0.0, 3).unwrap();
        let grid = FrequencyGrid::new(2.8e9, 3.0e9, 8).unwrap();
        let mut set = manual_set(geom, grid);
        let area = TrajectoryArea::new(&geom, 50e-9, 0.0, FRAC_PI_2, 1e-9).unwrap();
        // Radius 0: every center is exactly tau_hat.
        set.per_element[0] = vec![est(50e-9, 1.0), est(50.5e-9, 0.5)];
        set.per_element[1] = vec![est(58e-9, 1.0)];
        set.per_element[2] = vec![];
        assert_eq!(count_in_area(&set, &area).unwrap(), 1);
    }

    #[test]
    fn elevation_recovered_from_synthetic_snapshot() {
        // Wideband ring so the trajectory spread dwarfs the band width.
        let geom = ArrayGeometry::new(0.5, 60).unwrap();
        let grid = FrequencyGrid::new(26.0e9, 30.0e9, 101).unwrap();
        let theta = 60f64.to_radians();
        let phi = 45f64.to_radians();
        let path = PathParams::new(20e-9, phi, theta, 5.0, Complex64::new(1.0, 0.0)).unwrap();
        let out = synthesize_channel(
            &geom,
            &grid,
            &[path],
            &[GainMask::uniform(60)],
            &NoiseSpec { variance: 0.0, seed: 0 },
        )
        .unwrap();
        let set = estimate_all(&out, &SageConfig::default()).unwrap();

        let half_width = 0.5 / grid.bandwidth();
        let ee = estimate_elevation(&set, 20e-9, phi, half_width, 1f64.to_radians()).unwrap();
        assert_eq!(ee.count, 60, "every element must support the trajectory");
        assert!(
            ee.plateau_low <= theta && theta <= ee.plateau_high,
            "plateau [{:.1}°, {:.1}°] misses the true 60°",
            ee.plateau_low.to_degrees(),
            ee.plateau_high.to_degrees()
        );
        assert!(
            ee.elevation >= 55f64.to_radians() && ee.elevation <= 80f64.to_radians(),
            "plateau top at {:.1}°",
            ee.elevation.to_degrees()
        );

        let wrong = TrajectoryArea::new(&geom, 20e-9, phi, 30f64.to_radians(), half_width).unwrap();
        let c30 = count_in_area(&set, &wrong).unwrap();
        assert!(c30 <= 20, "30° trajectory still matched {c30} elements");
    }

    #[test]
    fn selection_prefers_consensus_power() {
        let geom = ArrayGeometry::new(0.0, 10).unwrap();
        let grid = FrequencyGrid::new(2.8e9, 3.0e9, 8).unwrap();
        let mut set = manual_set(geom, grid);
        let area = TrajectoryArea::new(&geom, 40e-9, 0.0, FRAC_PI_2, 2e-9).unwrap();
        for p in 0..10 {
            set.per_element[p] = vec![est(40e-9, 1.0)];
        }
        // Two elements also carry a 20 dB spike inside the band.
        set.per_element[2].insert(0, est(39.5e-9, 10.0));
        set.per_element[7].insert(0, est(40.5e-9, 10.0));

        let traj = select_trajectory(&set, &area).unwrap();
        assert_eq!(traj.support_count, 10);
        for (p, pick) in traj.selections.iter().enumerate() {
            let chosen = pick.expect("every element has an in-band estimate");
            assert!(
                (chosen.amplitude.norm() - 1.0).abs() < 1e-12,
                "element {p} picked the spike"
            );
        }
    }

    #[test]
    fn selection_skips_out_of_band_elements() {
        let geom = ArrayGeometry::new(0.0, 4).unwrap();
        let grid = FrequencyGrid::new(2.8e9, 3.0e9, 8).unwrap();
        let mut set = manual_set(geom, grid);
        set.per_element[0] = vec![est(40e-9, 1.0)];
        set.per_element[1] = vec![est(90e-9, 1.0)];
        set.per_element[3] = vec![est(41e-9, 1.0)];
        let area = TrajectoryArea::new(&geom, 40e-9, 0.0, FRAC_PI_2, 2e-9).unwrap();
        let traj = select_trajectory(&set, &area).unwrap();
        assert_eq!(traj.support_count, 2);
        assert!(traj.selections[0].is_some());
        assert!(traj.selections[1].is_none());
        assert!(traj.selections[2].is_none());
        assert!(traj.selections[3].is_some());
        assert_eq!(traj.init_delay, 40e-9);
        assert_eq!(traj.elevation, FRAC_PI_2);
    }

    #[test]
    fn removal_deletes_only_claimed_values() {
        let geom = ArrayGeometry::new(0.0, 3).unwrap();
        let grid = FrequencyGrid::new(2.8e9, 3.0e9, 8).unwrap();
        let mut set = manual_set(geom, grid);
        set.per_element[0] = vec![est(40e-9, 1.0), est(72e-9, 0.5)];
        set.per_element[1] = vec![est(40.5e-9, 0.9)];
        set.per_element[2] = vec![est(95e-9, 0.4)];

        let area = TrajectoryArea::new(&geom, 40e-9, 0.0, FRAC_PI_2, 2e-9).unwrap();
        let traj = select_trajectory(&set, &area).unwrap();
        assert_eq!(traj.support_count, 2);

        let removed = remove_trajectory(&mut set, &traj);
        assert_eq!(removed, 2);
        assert_eq!(set.per_element[0], vec![est(72e-9, 0.5)]);
        assert!(set.per_element[1].is_empty());
        assert_eq!(set.per_element[2], vec![est(95e-9, 0.4)]);

        // Claimed values are already gone: second pass removes nothing.
        assert_eq!(remove_trajectory(&mut set, &traj), 0);
    }
}
