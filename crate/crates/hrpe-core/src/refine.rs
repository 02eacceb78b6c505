//! Spherical-wavefront refinement of one trajectory.
//!
//! The per-element evidence claimed by a trajectory is matched against an
//! exact spherical steering model. A single frequency bin suffices for the
//! angles and the source distance, because delay contributes only a common
//! phase there: the search maximizes `|Σ_p Ĥ(p, k*) W*(p, k*)| / ‖W(·, k*)‖`
//! over a coarse-to-fine `(azimuth, elevation, distance)` lattice, with
//! `W(p, f) = (d/d_p) e^{+j2πf(d - d_p)/c}` the response of a unit path at
//! delay zero and `‖W‖` taken over the supported elements. The normalization
//! makes the noiseless argmax sit exactly on the truth for any visibility
//! pattern; the raw magnitude instead drifts toward near-ring distances whose
//! inflated gains reward a partially visible arc. Delay is then re-fit over
//! the full band along the refined steering direction, and the amplitude is
//! the matched-filter projection normalized by the number of supporting
//! elements, so partial visibility does not shrink the estimate.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::channel::{ArrayGeometry, ArrayOutput, FrequencyGrid, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::sage::reconstruct_element;
use crate::trajectory::Trajectory;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Azimuth search half-window around the trajectory azimuth, degrees.
    /// The initializer steers plane waves, so a near-field source splits its
    /// spectrum peak into twin lobes several degrees off the true azimuth;
    /// the window must cover that bias, not just the spectrum bin width.
    pub azimuth_window_deg: f64,
    /// Final azimuth step, degrees.
    pub azimuth_step_deg: f64,
    /// Elevation search half-window, degrees.
    pub elevation_window_deg: f64,
    /// Final elevation step, degrees.
    pub elevation_step_deg: f64,
    /// Overrides the elevation window centre; `None` centres on the
    /// trajectory elevation.
    pub elevation_center_deg: Option<f64>,
    /// Log-spaced distance candidates per stage.
    pub distance_points: usize,
    /// First-stage steps are this many times the final steps.
    pub coarse_factor: usize,
    /// Delay search half-window, in units of `1/B`.
    pub delay_window_bw: f64,
    /// Delay search step, in units of `1/B`.
    pub delay_step_bw: f64,
    /// Frequency bin for the angle/distance search; `None` uses `K/2`.
    pub freq_index: Option<usize>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            azimuth_window_deg: 6.0,
            azimuth_step_deg: 0.05,
            elevation_window_deg: 10.0,
            elevation_step_deg: 0.1,
            elevation_center_deg: None,
            distance_points: 50,
            coarse_factor: 4,
            delay_window_bw: 2.0,
            delay_step_bw: 1.0 / 16.0,
            freq_index: None,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("azimuth_window_deg", self.azimuth_window_deg),
            ("azimuth_step_deg", self.azimuth_step_deg),
            ("elevation_window_deg", self.elevation_window_deg),
            ("elevation_step_deg", self.elevation_step_deg),
            ("delay_window_bw", self.delay_window_bw),
            ("delay_step_bw", self.delay_step_bw),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be finite and > 0")));
            }
        }
        if self.azimuth_step_deg > self.azimuth_window_deg {
            return Err(Error::invalid("azimuth step exceeds its window"));
        }
        if self.elevation_step_deg > self.elevation_window_deg {
            return Err(Error::invalid("elevation step exceeds its window"));
        }
        if self.delay_step_bw > self.delay_window_bw {
            return Err(Error::invalid("delay step exceeds its window"));
        }
        if let Some(c) = self.elevation_center_deg {
            if !(0.0..=90.0).contains(&c) {
                return Err(Error::invalid(format!(
                    "elevation_center_deg {c} outside (0, 90]"
                )));
            }
        }
        if self.distance_points < 2 {
            return Err(Error::invalid("distance_points must be >= 2"));
        }
        if self.coarse_factor == 0 {
            return Err(Error::invalid("coarse_factor must be >= 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Steering model
// ---------------------------------------------------------------------------

/// One candidate source position on the sphere-distance manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringModel {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

impl SteeringModel {
    /// `W(p, f) = (d/d_p) e^{+j2πf(d - d_p)/c}`.
    pub fn element_response(&self, geom: &ArrayGeometry, p: usize, f: f64) -> Complex64 {
        let d_p = crate::channel::spherical_source_distance(
            geom.radius(),
            self.distance,
            self.elevation,
            self.azimuth - geom.element_azimuth(p),
        );
        let gain = self.distance / d_p;
        Complex64::from_polar(gain, TAU * f / SPEED_OF_LIGHT * (self.distance - d_p))
    }
}

/// Precomputed per-element trig for the hot search loop.
struct RingTrig {
    cos_p: Vec<f64>,
    sin_p: Vec<f64>,
    radius: f64,
}

impl RingTrig {
    fn new(geom: &ArrayGeometry) -> Self {
        let (cos_p, sin_p) = (0..geom.num_elements())
            .map(|p| {
                let a = geom.element_azimuth(p);
                (a.cos(), a.sin())
            })
            .unzip();
        Self { cos_p, sin_p, radius: geom.radius() }
    }

    /// `(Σ_p y_p W*(p, f), Σ_p |W(p, f)|²)` over the nonzero entries of `y`,
    /// for the column at angular frequency `omega = 2πf`.
    fn correlation_energy(
        &self,
        y: &[Complex64],
        omega: f64,
        az: f64,
        el: f64,
        dist: f64,
    ) -> (Complex64, f64) {
        let (sa, ca) = az.sin_cos();
        let s_el = el.sin();
        let r = self.radius;
        let mut z = Complex64::default();
        let mut energy = 0.0;
        for (p, v) in y.iter().enumerate() {
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let cos_off = ca * self.cos_p[p] + sa * self.sin_p[p];
            let d_p = (dist * dist + r * r - 2.0 * r * dist * s_el * cos_off).sqrt();
            let phase = -omega / SPEED_OF_LIGHT * (dist - d_p);
            let (sp, cp) = phase.sin_cos();
            let gain = dist / d_p;
            z += v * Complex64::new(gain * cp, gain * sp);
            energy += gain * gain;
        }
        (z, energy)
    }

    /// `Σ_p y_p W*(p, f)` for the column at angular frequency `omega = 2πf`.
    fn correlation(&self, y: &[Complex64], omega: f64, az: f64, el: f64, dist: f64) -> Complex64 {
        self.correlation_energy(y, omega, az, el, dist).0
    }

    /// `|Σ_p y_p W*| / ‖W‖` over the nonzero entries of `y`. Candidates with
    /// different gain profiles stay comparable under partial visibility.
    fn matched_score(&self, y: &[Complex64], omega: f64, az: f64, el: f64, dist: f64) -> f64 {
        let (z, energy) = self.correlation_energy(y, omega, az, el, dist);
        if energy == 0.0 {
            0.0
        } else {
            z.norm() / energy.sqrt()
        }
    }
}

/// `Σ_p Ĥ(p, k) W*(p, k)` at one frequency bin.
pub fn steering_correlation(
    out: &ArrayOutput,
    freq_index: usize,
    model: &SteeringModel,
) -> Result<Complex64> {
    if freq_index >= out.grid().num_points() {
        return Err(Error::invalid(format!("frequency index {freq_index} out of range")));
    }
    if model.distance <= out.geometry().radius() {
        return Err(Error::degenerate(format!(
            "source distance {} inside the {}-m ring",
            model.distance,
            out.geometry().radius()
        )));
    }
    let trig = RingTrig::new(out.geometry());
    let y: Vec<Complex64> = out.matrix().column(freq_index).to_vec();
    let omega = TAU * out.grid().frequency(freq_index);
    Ok(trig.correlation(&y, omega, model.azimuth, model.elevation, model.distance))
}

// ---------------------------------------------------------------------------
// Trajectory reconstruction
// ---------------------------------------------------------------------------

/// Frequency response explained by the claimed estimates; elements without a
/// claim contribute zero rows.
pub fn reconstruct_trajectory_output(
    traj: &Trajectory,
    geom: &ArrayGeometry,
    grid: &FrequencyGrid,
) -> Result<ArrayOutput> {
    if traj.selections.len() != geom.num_elements() {
        return Err(Error::mismatch(format!(
            "trajectory covers {} elements, array has {}",
            traj.selections.len(),
            geom.num_elements()
        )));
    }
    let mut matrix = ndarray::Array2::zeros((geom.num_elements(), grid.num_points()));
    for (p, pick) in traj.selections.iter().enumerate() {
        let Some(est) = pick else { continue };
        for (k, v) in reconstruct_element(&[*est], grid).into_iter().enumerate() {
            matrix[(p, k)] = v;
        }
    }
    ArrayOutput::from_parts(matrix, *geom, *grid)
}

// ---------------------------------------------------------------------------
// Coarse-to-fine angle/distance search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleDistanceEstimate {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    /// `|Σ_p Ĥ W*| / ‖W‖` at the winning candidate.
    pub score: f64,
}

fn centered_grid(center: f64, half_width: f64, step: f64) -> Vec<f64> {
    let n = (half_width / step).floor() as i64;
    (-n..=n).map(|i| center + i as f64 * step).collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// Maximize the energy-normalized single-bin steering correlation over
/// `(φ, θ, d)`.
///
/// Stage one scans the full windows with `coarse_factor`-coarsened steps and
/// the full `[2r, cτ̂]` distance span; stage two rescans one coarse cell at
/// the final resolution. Ties resolve to the earliest candidate, so the
/// result does not depend on the parallel schedule.
pub fn refine_angles_distance(
    out: &ArrayOutput,
    traj: &Trajectory,
    cfg: &RefineConfig,
) -> Result<AngleDistanceEstimate> {
    cfg.validate()?;
    let geom = out.geometry();
    if geom.radius() <= 0.0 {
        return Err(Error::degenerate("distance is unobservable with a zero-radius array"));
    }
    if out.mean_power() == 0.0 {
        return Err(Error::degenerate("trajectory carries no energy"));
    }
    let k_count = out.grid().num_points();
    let k_star = cfg.freq_index.unwrap_or(k_count / 2);
    if k_star >= k_count {
        return Err(Error::invalid(format!("freq_index {k_star} out of range")));
    }

    let d_min = 2.0 * geom.radius();
    let d_max = SPEED_OF_LIGHT * traj.init_delay;
    if d_max.is_nan() || d_max <= d_min {
        return Err(Error::degenerate(format!(
            "delay {} s admits no source beyond {d_min} m",
            traj.init_delay
        )));
    }

    let trig = RingTrig::new(geom);
    let y: Vec<Complex64> = out.matrix().column(k_star).to_vec();
    let omega = TAU * out.grid().frequency(k_star);

    let az_fine = cfg.azimuth_step_deg.to_radians();
    let el_fine = cfg.elevation_step_deg.to_radians();
    let mut az_center = traj.init_azimuth;
    let mut az_half = cfg.azimuth_window_deg.to_radians();
    let mut el_center = cfg
        .elevation_center_deg
        .map(f64::to_radians)
        .unwrap_or(traj.elevation);
    let mut el_half = cfg.elevation_window_deg.to_radians();
    let mut d_lo = d_min;
    let mut d_hi = d_max;

    // The configured windows are hard bounds; later stages may not escape.
    let az_bounds = (az_center - az_half, az_center + az_half);
    let el_bounds = (el_center - el_half, (el_center + el_half).min(FRAC_PI_2));

    let mut best = AngleDistanceEstimate {
        azimuth: az_center,
        elevation: el_center.clamp(f64::MIN_POSITIVE, FRAC_PI_2),
        distance: d_lo,
        score: -1.0,
    };
    for stage in 0..2 {
        let factor = if stage == 0 { cfg.coarse_factor as f64 } else { 1.0 };
        let az_step = az_fine * factor;
        let el_step = el_fine * factor;
        let azimuths: Vec<f64> = centered_grid(az_center, az_half, az_step)
            .into_iter()
            .filter(|&a| a >= az_bounds.0 - 1e-12 && a <= az_bounds.1 + 1e-12)
            .collect();
        let elevations: Vec<f64> = centered_grid(el_center, el_half, el_step)
            .into_iter()
            .filter(|&e| e > 0.0 && e >= el_bounds.0 - 1e-12 && e <= el_bounds.1 + 1e-12)
            .map(|e| e.min(FRAC_PI_2))
            .collect();
        if azimuths.is_empty() || elevations.is_empty() {
            return Err(Error::invalid("refinement window contains no candidates"));
        }
        let distances = log_grid(d_lo, d_hi, cfg.distance_points);

        let mut candidates =
            Vec::with_capacity(azimuths.len() * elevations.len() * distances.len());
        for &az in &azimuths {
            for &el in &elevations {
                for &d in &distances {
                    candidates.push((az, el, d));
                }
            }
        }
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|&(az, el, d)| trig.matched_score(&y, omega, az, el, d))
            .collect();
        let mut winner = 0usize;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[winner] {
                winner = i;
            }
        }
        let (az, el, d) = candidates[winner];
        best = AngleDistanceEstimate { azimuth: az, elevation: el, distance: d, score: scores[winner] };

        // Shrink to one coarse cell around the winner.
        az_center = az;
        az_half = az_step;
        el_center = el;
        el_half = el_step;
        let ratio = (d_hi / d_lo).powf(1.0 / (cfg.distance_points - 1) as f64);
        d_lo = (d / ratio).max(geom.radius() * 1.01);
        d_hi = (d * ratio).min(d_max.max(d * ratio));
    }

    best.azimuth = crate::channel::wrap_azimuth(best.azimuth);
    Ok(best)
}

// ---------------------------------------------------------------------------
// Full-band delay and amplitude
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    pub delay: f64,
    /// `|Σ_k Σ_p Ĥ W*e^{j2πf_kτ}|` at the fit.
    pub score: f64,
}

/// Collapse the array along the refined steering direction, one value per
/// frequency bin.
fn collapse_columns(out: &ArrayOutput, model: &SteeringModel) -> Vec<Complex64> {
    let trig = RingTrig::new(out.geometry());
    let p_count = out.geometry().num_elements();
    let mut column = vec![Complex64::default(); p_count];
    out.grid()
        .frequencies()
        .enumerate()
        .map(|(k, f)| {
            for (dst, src) in column.iter_mut().zip(out.matrix().column(k)) {
                *dst = *src;
            }
            trig.correlation(&column, TAU * f, model.azimuth, model.elevation, model.distance)
        })
        .collect()
}

/// Re-fit the path delay over the whole band with the angles and distance
/// held at the refined values. Searches `init_delay ± delay_window_bw/B` and
/// sharpens the winning bin with a parabolic log-magnitude fit.
pub fn refine_delay(
    out: &ArrayOutput,
    model: &SteeringModel,
    init_delay: f64,
    cfg: &RefineConfig,
) -> Result<DelayEstimate> {
    cfg.validate()?;
    let z = collapse_columns(out, model);
    let band = out.grid().bandwidth();
    let step = cfg.delay_step_bw / band;
    let half = cfg.delay_window_bw / band;
    let taus: Vec<f64> = centered_grid(init_delay, half, step)
        .into_iter()
        .filter(|&t| t >= 0.0)
        .collect();
    if taus.is_empty() {
        return Err(Error::degenerate(format!(
            "delay window around {init_delay} s is entirely negative"
        )));
    }

    let magnitude = |tau: f64| -> f64 {
        out.grid()
            .frequencies()
            .zip(&z)
            .map(|(f, v)| v * Complex64::from_polar(1.0, TAU * f * tau))
            .sum::<Complex64>()
            .norm()
    };
    let mags: Vec<f64> = taus.par_iter().map(|&t| magnitude(t)).collect();
    let mut best = 0usize;
    for (i, &m) in mags.iter().enumerate() {
        if m > mags[best] {
            best = i;
        }
    }

    let mut delay = taus[best];
    if best > 0 && best + 1 < taus.len() && mags[best - 1] > 0.0 && mags[best + 1] > 0.0 {
        let (lp, l0, ln) = (mags[best - 1].ln(), mags[best].ln(), mags[best + 1].ln());
        let denom = lp - 2.0 * l0 + ln;
        if denom < -1e-12 {
            let shift = (0.5 * (lp - ln) / denom).clamp(-0.5, 0.5);
            delay += shift * step;
        }
    }
    if delay < 0.0 {
        delay = 0.0;
    }
    Ok(DelayEstimate { delay, score: magnitude(delay) })
}

/// Matched-filter amplitude normalized by the supporting element count:
/// `α̂ = (1/(C·K)) Σ_p Σ_k Ĥ(p,k) W*(p,k) e^{+j2πf_k τ̂}`.
pub fn estimate_amplitude(
    out: &ArrayOutput,
    model: &SteeringModel,
    delay: f64,
    support_count: usize,
) -> Result<Complex64> {
    if support_count == 0 {
        return Err(Error::degenerate("amplitude is undefined without supporting elements"));
    }
    let z = collapse_columns(out, model);
    let sum: Complex64 = out
        .grid()
        .frequencies()
        .zip(&z)
        .map(|(f, v)| v * Complex64::from_polar(1.0, TAU * f * delay))
        .sum();
    Ok(sum / (support_count as f64 * out.grid().num_points() as f64))
}

// ---------------------------------------------------------------------------
// One-call refinement
// ---------------------------------------------------------------------------

/// Fully refined path parameters for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedPath {
    pub delay: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub amplitude: Complex64,
    /// Energy-normalized steering correlation at the angle/distance fit.
    pub score: f64,
    pub support_count: usize,
}

/// Reconstruct the trajectory's claimed response and run the full refinement
/// chain: angles and distance, then delay, then amplitude.
pub fn refine_path(
    traj: &Trajectory,
    geom: &ArrayGeometry,
    grid: &FrequencyGrid,
    cfg: &RefineConfig,
) -> Result<RefinedPath> {
    if traj.support_count == 0 {
        return Err(Error::degenerate("trajectory has no supporting elements"));
    }
    let out = reconstruct_trajectory_output(traj, geom, grid)?;
    let ade = refine_angles_distance(&out, traj, cfg)?;
    let model =
        SteeringModel { azimuth: ade.azimuth, elevation: ade.elevation, distance: ade.distance };
    let de = refine_delay(&out, &model, traj.init_delay, cfg)?;
    let amplitude = estimate_amplitude(&out, &model, de.delay, traj.support_count)?;
    Ok(RefinedPath {
        delay: de.delay,
        azimuth: ade.azimuth,
        elevation: ade.elevation,
        distance: ade.distance,
        amplitude,
        score: ade.score,
        support_count: traj.support_count,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{element_path_params, PathParams};
    use crate::sage::ElementPathEstimate;

    const TRUE_DELAY: f64 = 30e-9;
    const TRUE_DISTANCE: f64 = 4.0;

    fn scene_geom() -> ArrayGeometry {
        ArrayGeometry::new(0.5, 36).unwrap()
    }

    fn scene_grid() -> FrequencyGrid {
        FrequencyGrid::new(2.8e9, 3.0e9, 64).unwrap()
    }

    fn true_path() -> PathParams {
        PathParams::new(
            TRUE_DELAY,
            120f64.to_radians(),
            65f64.to_radians(),
            TRUE_DISTANCE,
            Complex64::from_polar(2.0, 0.7),
        )
        .unwrap()
    }

    /// Trajectory whose claims are the exact per-element parameters.
    fn exact_trajectory(geom: &ArrayGeometry, path: &PathParams, init_offset_deg: f64) -> Trajectory {
        let selections: Vec<Option<ElementPathEstimate>> = (0..geom.num_elements())
            .map(|p| {
                let (delay, amplitude) = element_path_params(geom, path, p).unwrap();
                Some(ElementPathEstimate { delay, amplitude })
            })
            .collect();
        Trajectory {
            support_count: selections.len(),
            selections,
            elevation: 60f64.to_radians(),
            init_delay: path.delay,
            init_azimuth: path.azimuth + init_offset_deg.to_radians(),
        }
    }

    #[test]
    fn steering_correlation_is_coherent_at_truth() {
        let geom = scene_geom();
        let grid = scene_grid();
        let path = true_path();
        let traj = exact_trajectory(&geom, &path, 0.0);
        let out = reconstruct_trajectory_output(&traj, &geom, &grid).unwrap();

        let model = SteeringModel {
            azimuth: path.azimuth,
            elevation: path.elevation,
            distance: path.source_distance,
        };
        let z = steering_correlation(&out, 32, &model).unwrap();
        let expected: f64 = (0..geom.num_elements())
            .map(|p| {
                let d_p =
                    crate::channel::source_distance_at_element(&geom, &path, p).unwrap();
                (path.source_distance / d_p).powi(2)
            })
            .sum();
        assert!(
            (z.norm() - path.amplitude.norm() * expected).abs() < 1e-9 * expected,
            "coherent gain {} vs expected {}",
            z.norm(),
            path.amplitude.norm() * expected
        );
    }

    #[test]
    fn steering_model_matches_hot_loop() {
        let geom = scene_geom();
        let grid = scene_grid();
        let model = SteeringModel { azimuth: 1.1, elevation: 0.9, distance: 3.0 };
        let trig = RingTrig::new(&geom);
        let f = grid.frequency(10);
        let mut y = vec![Complex64::default(); geom.num_elements()];
        y[7] = Complex64::new(1.0, 0.0);
        let via_loop = trig.correlation(&y, TAU * f, model.azimuth, model.elevation, model.distance);
        let direct = model.element_response(&geom, 7, f).conj();
        assert!((via_loop - direct).norm() < 1e-12);
    }

    #[test]
    fn truth_outscores_perturbations() {
        let geom = scene_geom();
        let grid = scene_grid();
        let path = true_path();
        let traj = exact_trajectory(&geom, &path, 0.0);
        let out = reconstruct_trajectory_output(&traj, &geom, &grid).unwrap();
        let at = |az: f64, el: f64, d: f64| {
            steering_correlation(&out, 32, &SteeringModel { azimuth: az, elevation: el, distance: d })
                .unwrap()
                .norm()
        };
        let truth = at(path.azimuth, path.elevation, path.source_distance);
        assert!(truth > at(path.azimuth + 0.02, path.elevation, path.source_distance));
        assert!(truth > at(path.azimuth, path.elevation + 0.1, path.source_distance));
        assert!(truth > at(path.azimuth, path.elevation, 2.0 * path.source_distance));
    }

    #[test]
    fn refinement_chain_recovers_truth() {
        let geom = scene_geom();
        let grid = scene_grid();
        let path = true_path();
        // Init 0.8° off in azimuth, elevation window centred 5° low.
        let traj = exact_trajectory(&geom, &path, 0.8);
        let refined = refine_path(&traj, &geom, &grid, &RefineConfig::default()).unwrap();

        assert!(
            (refined.azimuth - path.azimuth).abs() < 0.1f64.to_radians(),
            "azimuth error {:.3}°",
            (refined.azimuth - path.azimuth).to_degrees()
        );
        assert!(
            (refined.elevation - path.elevation).abs() < 0.5f64.to_radians(),
            "elevation error {:.2}°",
            (refined.elevation - path.elevation).to_degrees()
        );
        assert!(
            (refined.distance - TRUE_DISTANCE).abs() < 0.15 * TRUE_DISTANCE,
            "distance {} m",
            refined.distance
        );
        assert!(
            (refined.delay - TRUE_DELAY).abs() < 5e-11,
            "delay error {} s",
            (refined.delay - TRUE_DELAY).abs()
        );

        // Amplitude carries the mean squared free-space gain of the ring.
        let gain: f64 = (0..geom.num_elements())
            .map(|p| {
                let d_p = crate::channel::source_distance_at_element(&geom, &path, p).unwrap();
                (path.source_distance / d_p).powi(2)
            })
            .sum::<f64>()
            / geom.num_elements() as f64;
        let expected = path.amplitude * gain;
        assert!(
            (refined.amplitude - expected).norm() < 2e-2 * expected.norm(),
            "amplitude {} vs {}",
            refined.amplitude,
            expected
        );
    }

    #[test]
    fn elevation_window_is_respected() {
        let geom = scene_geom();
        let grid = scene_grid();
        let path = true_path();
        let traj = exact_trajectory(&geom, &path, 0.0);
        let cfg = RefineConfig {
            elevation_center_deg: Some(85.0),
            elevation_window_deg: 5.0,
            ..RefineConfig::default()
        };
        let out = reconstruct_trajectory_output(&traj, &geom, &grid).unwrap();
        let ade = refine_angles_distance(&out, &traj, &cfg).unwrap();
        assert!(
            ade.elevation >= 79.9f64.to_radians(),
            "candidate at {:.1}° escaped the [80°, 90°] window",
            ade.elevation.to_degrees()
        );
    }

    #[test]
    fn partial_support_amplitude_uses_support_count() {
        let geom = scene_geom();
        let grid = scene_grid();
        let path = true_path();
        let mut traj = exact_trajectory(&geom, &path, 0.0);
        // Drop the half of the ring facing away.
        for p in 0..geom.num_elements() {
            let off = (path.azimuth - geom.element_azimuth(p)).cos();
            if off < 0.0 && traj.selections[p].take().is_some() {
                traj.support_count -= 1;
            }
        }
        assert!(traj.support_count >= geom.num_elements() / 3);

        let refined = refine_path(&traj, &geom, &grid, &RefineConfig::default()).unwrap();
        let ratio = refined.amplitude.norm() / path.amplitude.norm();
        assert!(
            (0.85..=1.3).contains(&ratio),
            "support-normalized amplitude ratio {ratio}"
        );
        // Normalizing by the full ring instead would halve the estimate.
        let wrong = ratio * traj.support_count as f64 / geom.num_elements() as f64;
        assert!(wrong < 0.8, "ring-normalized ratio {wrong} should understate");
    }

    #[test]
    fn degenerate_trajectories_are_rejected() {
        let geom = scene_geom();
        let grid = scene_grid();
        let path = true_path();
        let mut empty = exact_trajectory(&geom, &path, 0.0);
        for s in empty.selections.iter_mut() {
            *s = None;
        }
        empty.support_count = 0;
        assert!(refine_path(&empty, &geom, &grid, &RefineConfig::default()).is_err());

        // Delay too small to place a source outside the ring.
        let mut near = exact_trajectory(&geom, &path, 0.0);
        near.init_delay = 1e-9;
        let out = reconstruct_trajectory_output(&near, &geom, &grid).unwrap();
        assert!(refine_angles_distance(&out, &near, &RefineConfig::default()).is_err());

        let cfg = RefineConfig { freq_index: Some(64), ..RefineConfig::default() };
        let full = exact_trajectory(&geom, &path, 0.0);
        let out = reconstruct_trajectory_output(&full, &geom, &grid).unwrap();
        assert!(refine_angles_distance(&out, &full, &cfg).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(RefineConfig::default().validate().is_ok());
        assert!(RefineConfig { azimuth_step_deg: 0.0, ..RefineConfig::default() }
            .validate()
            .is_err());
        assert!(RefineConfig { azimuth_step_deg: 7.0, ..RefineConfig::default() }
            .validate()
            .is_err());
        assert!(RefineConfig { distance_points: 1, ..RefineConfig::default() }
            .validate()
            .is_err());
        assert!(RefineConfig { coarse_factor: 0, ..RefineConfig::default() }
            .validate()
            .is_err());
        assert!(RefineConfig { elevation_center_deg: Some(95.0), ..RefineConfig::default() }
            .validate()
            .is_err());
    }
}
