//! Spherical-wave channel model for a uniform circular array.
//!
//! The array is a horizontal ring of `P` elements with radius `r`; element `p`
//! sits at azimuth `2πp/P`. Each propagation path is referenced to the array
//! centre by a delay, an arrival azimuth/elevation, the distance to its last
//! scattering point, and a complex gain. Element responses follow from the
//! exact source-to-element distance, so wavefront curvature across the
//! aperture is modelled rather than approximated by a plane wave.
//!
//! # Example
//!
//! ```
//! use hrpe_core::channel::*;
//! use num_complex::Complex64;
//!
//! let geom = ArrayGeometry::new(0.5, 72).unwrap();
//! let grid = FrequencyGrid::new(2.8e9, 3.0e9, 128).unwrap();
//! let path = PathParams::new(
//!     20.0e-9,
//!     std::f64::consts::PI,
//!     std::f64::consts::FRAC_PI_2,
//!     5.0,
//!     Complex64::new(1.0, 0.0),
//! )
//! .unwrap();
//! let mask = GainMask::uniform(geom.num_elements());
//! let out = synthesize_channel(
//!     &geom,
//!     &grid,
//!     &[path],
//!     &[mask],
//!     &NoiseSpec { variance: 0.0, seed: 0 },
//! )
//! .unwrap();
//! assert_eq!(out.matrix().dim(), (72, 128));
//! ```

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// Geometry and grid
// ---------------------------------------------------------------------------

/// Uniform circular array: `num_elements` antennas on a ring of `radius` metres.
///
/// `radius == 0` is accepted and degenerates to a single-point array where
/// every element sees the path parameters unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    radius: f64,
    num_elements: usize,
}

impl ArrayGeometry {
    pub fn new(radius: f64, num_elements: usize) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::invalid(format!("array radius {radius} must be finite and >= 0")));
        }
        if num_elements == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        Ok(Self { radius, num_elements })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    /// Azimuth of element `p`, radians in `[0, 2π)`.
    pub fn element_azimuth(&self, p: usize) -> f64 {
        debug_assert!(p < self.num_elements);
        TAU * p as f64 / self.num_elements as f64
    }
}

/// Uniformly spaced frequency sweep, inclusive of both band edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    f_start: f64,
    f_stop: f64,
    num_points: usize,
}

impl FrequencyGrid {
    pub fn new(f_start: f64, f_stop: f64, num_points: usize) -> Result<Self> {
        if !f_start.is_finite() || !f_stop.is_finite() || f_start <= 0.0 || f_stop <= f_start {
            return Err(Error::invalid(format!(
                "frequency band [{f_start}, {f_stop}] must satisfy 0 < f_start < f_stop"
            )));
        }
        if num_points < 2 {
            return Err(Error::invalid("frequency grid needs at least two points"));
        }
        Ok(Self { f_start, f_stop, num_points })
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_stop(&self) -> f64 {
        self.f_stop
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// Swept bandwidth `f_stop - f_start`, Hz.
    pub fn bandwidth(&self) -> f64 {
        self.f_stop - self.f_start
    }

    /// Spacing between adjacent grid points, Hz.
    pub fn spacing(&self) -> f64 {
        self.bandwidth() / (self.num_points - 1) as f64
    }

    /// Frequency of point `k`, Hz.
    pub fn frequency(&self, k: usize) -> f64 {
        debug_assert!(k < self.num_points);
        self.f_start + self.spacing() * k as f64
    }

    /// Unambiguous delay span `1 / spacing`, seconds. Delay estimates live in
    /// `[0, max_delay)`.
    pub fn max_delay(&self) -> f64 {
        1.0 / self.spacing()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(move |k| self.frequency(k))
    }
}

// ---------------------------------------------------------------------------
// Path description
// ---------------------------------------------------------------------------

/// One propagation path, referenced to the array centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    /// Propagation delay at the array centre, seconds; `>= 0`.
    pub delay: f64,
    /// Arrival azimuth, radians in `[0, 2π)`.
    pub azimuth: f64,
    /// Arrival elevation, radians in `(0, π/2]`. `π/2` is horizontal arrival;
    /// the model depends on elevation only through its sine, so the upper and
    /// lower half-spaces are indistinguishable and the domain is capped.
    pub elevation: f64,
    /// Distance from the array centre to the last scattering point, metres.
    pub source_distance: f64,
    /// Complex path gain seen at the array centre.
    pub amplitude: Complex64,
}

impl PathParams {
    pub fn new(
        delay: f64,
        azimuth: f64,
        elevation: f64,
        source_distance: f64,
        amplitude: Complex64,
    ) -> Result<Self> {
        let path = Self { delay, azimuth: wrap_azimuth(azimuth), elevation, source_distance, amplitude };
        path.validate()?;
        Ok(path)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delay.is_finite() || self.delay < 0.0 {
            return Err(Error::invalid(format!("path delay {} must be finite and >= 0", self.delay)));
        }
        if !self.azimuth.is_finite() {
            return Err(Error::invalid("path azimuth must be finite"));
        }
        if !self.elevation.is_finite()
            || self.elevation <= 0.0
            || self.elevation > std::f64::consts::FRAC_PI_2
        {
            return Err(Error::invalid(format!(
                "path elevation {} rad must lie in (0, π/2]",
                self.elevation
            )));
        }
        if !self.source_distance.is_finite() || self.source_distance <= 0.0 {
            return Err(Error::invalid(format!(
                "source distance {} must be finite and > 0",
                self.source_distance
            )));
        }
        if !self.amplitude.re.is_finite() || !self.amplitude.im.is_finite() {
            return Err(Error::invalid("path amplitude must be finite"));
        }
        Ok(())
    }
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_azimuth(phi: f64) -> f64 {
    let mut a = phi % TAU;
    if a < 0.0 {
        a += TAU;
    }
    // -1e-17 % TAU rounds to TAU itself; fold it back.
    if a >= TAU {
        a = 0.0;
    }
    a
}

/// Per-element magnitude gain in `[0, 1]`; `0` removes the path from the
/// element entirely. Models birth-death of paths across a large aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMask {
    gains: Vec<f64>,
}

impl GainMask {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("gain mask must cover at least one element"));
        }
        for (p, g) in gains.iter().enumerate() {
            if !g.is_finite() || *g < 0.0 || *g > 1.0 {
                return Err(Error::invalid(format!("gain {g} at element {p} outside [0, 1]")));
            }
        }
        Ok(Self { gains })
    }

    /// All-ones mask: the path is visible everywhere.
    pub fn uniform(num_elements: usize) -> Self {
        Self { gains: vec![1.0; num_elements.max(1)] }
    }

    /// Unit gain on the given inclusive element ranges, zero elsewhere.
    pub fn from_visible_ranges(num_elements: usize, ranges: &[(usize, usize)]) -> Result<Self> {
        let mut gains = vec![0.0; num_elements.max(1)];
        for &(lo, hi) in ranges {
            if lo > hi || hi >= num_elements {
                return Err(Error::invalid(format!(
                    "visible range {lo}..{hi} outside 0..{}",
                    num_elements.saturating_sub(1)
                )));
            }
            for g in &mut gains[lo..=hi] {
                *g = 1.0;
            }
        }
        Self::new(gains)
    }

    pub fn gain(&self, p: usize) -> f64 {
        self.gains[p]
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Number of elements with non-zero gain.
    pub fn support(&self) -> usize {
        self.gains.iter().filter(|g| **g > 0.0).count()
    }
}

/// Circularly symmetric white Gaussian noise added per element and frequency.
/// `variance` is the total complex variance; the same seed always reproduces
/// the same realization bit for bit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.variance.is_finite() || self.variance < 0.0 {
            return Err(Error::invalid(format!("noise variance {} must be finite and >= 0", self.variance)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Array output container
// ---------------------------------------------------------------------------

/// `P x K` complex frequency response of the array: row `p` holds the sweep of
/// element `p` over the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayOutput {
    matrix: Array2<Complex64>,
    geometry: ArrayGeometry,
    grid: FrequencyGrid,
}

impl ArrayOutput {
    pub fn from_parts(
        matrix: Array2<Complex64>,
        geometry: ArrayGeometry,
        grid: FrequencyGrid,
    ) -> Result<Self> {
        if matrix.dim() != (geometry.num_elements(), grid.num_points()) {
            return Err(Error::mismatch(format!(
                "array output is {:?}, geometry/grid demand ({}, {})",
                matrix.dim(),
                geometry.num_elements(),
                grid.num_points()
            )));
        }
        Ok(Self { matrix, geometry, grid })
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Mean of `|Y(p, k)|²` over all entries.
    pub fn mean_power(&self) -> f64 {
        let n = self.matrix.len();
        self.matrix.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64
    }
}

// ---------------------------------------------------------------------------
// Geometry evaluation
// ---------------------------------------------------------------------------

/// Distance from a source at `(source_distance, elevation)` with horizontal
/// offset `azimuth_offset` to a ring point at `radius`. Law of cosines in the
/// plane spanned by the source direction and the element:
/// `sqrt(d² + r² - 2 r d sin(elevation) cos(azimuth_offset))`.
///
/// Depends on elevation only through its sine, hence is symmetric about the
/// horizontal plane.
pub fn spherical_source_distance(
    radius: f64,
    source_distance: f64,
    elevation: f64,
    azimuth_offset: f64,
) -> f64 {
    let d = source_distance;
    let r = radius;
    (d * d + r * r - 2.0 * r * d * elevation.sin() * azimuth_offset.cos()).sqrt()
}

fn check_element(geom: &ArrayGeometry, p: usize) -> Result<()> {
    if p >= geom.num_elements() {
        return Err(Error::invalid(format!(
            "element index {p} out of range for {}-element array",
            geom.num_elements()
        )));
    }
    Ok(())
}

/// Exact source-to-element distance for element `p`.
pub fn source_distance_at_element(geom: &ArrayGeometry, path: &PathParams, p: usize) -> Result<f64> {
    check_element(geom, p)?;
    Ok(spherical_source_distance(
        geom.radius(),
        path.source_distance,
        path.elevation,
        path.azimuth - geom.element_azimuth(p),
    ))
}

/// How much closer the source is to element `p` than to the array centre,
/// metres. Positive when the element faces the source. Bounded by the radius:
/// `|excess| <= r` always.
pub fn excess_distance(geom: &ArrayGeometry, path: &PathParams, p: usize) -> Result<f64> {
    Ok(path.source_distance - source_distance_at_element(geom, path, p)?)
}

/// Delay and amplitude of the path as seen by element `p`:
/// the delay shortens by `excess/c` and the amplitude rescales by the
/// free-space distance ratio `d / d_p`.
pub fn element_path_params(
    geom: &ArrayGeometry,
    path: &PathParams,
    p: usize,
) -> Result<(f64, Complex64)> {
    let d_p = source_distance_at_element(geom, path, p)?;
    let excess = path.source_distance - d_p;
    let delay = path.delay - excess / SPEED_OF_LIGHT;
    let amplitude = path.amplitude * (path.source_distance / d_p);
    Ok((delay, amplitude))
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

fn check_path_and_mask(
    geom: &ArrayGeometry,
    path: &PathParams,
    mask: &GainMask,
) -> Result<()> {
    path.validate()?;
    if geom.radius() > 0.0 && path.source_distance <= geom.radius() {
        return Err(Error::invalid(format!(
            "source distance {} must exceed array radius {}",
            path.source_distance,
            geom.radius()
        )));
    }
    if mask.len() != geom.num_elements() {
        return Err(Error::mismatch(format!(
            "gain mask covers {} elements, array has {}",
            mask.len(),
            geom.num_elements()
        )));
    }
    Ok(())
}

/// Noiseless response of a single masked path:
/// `Y(p, k) = g_p · α_p · exp(-j 2π f_k τ_p)`.
pub fn synthesize_path(
    geom: &ArrayGeometry,
    grid: &FrequencyGrid,
    path: &PathParams,
    mask: &GainMask,
) -> Result<Array2<Complex64>> {
    check_path_and_mask(geom, path, mask)?;
    let p_count = geom.num_elements();
    let k_count = grid.num_points();
    let mut out = Array2::zeros((p_count, k_count));
    for p in 0..p_count {
        let gain = mask.gain(p);
        if gain == 0.0 {
            continue;
        }
        let (tau_p, alpha_p) = element_path_params(geom, path, p)?;
        let alpha = alpha_p * gain;
        let mut row = out.row_mut(p);
        for (k, f) in grid.frequencies().enumerate() {
            row[k] = alpha * Complex64::from_polar(1.0, -TAU * f * tau_p);
        }
    }
    Ok(out)
}

/// Superpose all paths (each with its own mask) and add seeded complex white
/// Gaussian noise. Real and imaginary noise parts each carry `variance / 2`.
pub fn synthesize_channel(
    geom: &ArrayGeometry,
    grid: &FrequencyGrid,
    paths: &[PathParams],
    masks: &[GainMask],
    noise: &NoiseSpec,
) -> Result<ArrayOutput> {
    noise.validate()?;
    if paths.len() != masks.len() {
        return Err(Error::mismatch(format!(
            "{} paths but {} masks",
            paths.len(),
            masks.len()
        )));
    }
    let mut sum = Array2::zeros((geom.num_elements(), grid.num_points()));
    for (path, mask) in paths.iter().zip(masks) {
        sum += &synthesize_path(geom, grid, path, mask)?;
    }
    if noise.variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, (noise.variance / 2.0).sqrt())
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        for v in sum.iter_mut() {
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    }
    ArrayOutput::from_parts(sum, *geom, *grid)
}

// ---------------------------------------------------------------------------
// Concatenated power delay profile
// ---------------------------------------------------------------------------

/// Frequency window applied before the delay transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Rectangular (no shaping).
    None,
    /// Symmetric Hann taper.
    Hann,
}

impl Window {
    fn weight(&self, k: usize, num_points: usize) -> f64 {
        match self {
            Window::None => 1.0,
            Window::Hann => {
                let x = TAU * k as f64 / (num_points - 1) as f64;
                0.5 * (1.0 - x.cos())
            }
        }
    }
}

/// Per-element power over a cyclic delay axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    /// `P x (K * zero_pad)` powers.
    pub power: Array2<f64>,
    /// Delay of each column, seconds, spanning `[0, 1/Δf)`.
    pub delays: Vec<f64>,
}

/// Concatenated power delay profile: each row is the squared magnitude of the
/// inverse DFT of that element's (windowed, zero-padded) frequency sweep.
///
/// The transform is scaled by `1/K` so an on-bin unit-amplitude tone peaks at
/// exactly `|α|² = 1`; consequently each rectangular-window row sums to
/// `zero_pad` times the row's mean power.
pub fn cpdp(out: &ArrayOutput, window: Window, zero_pad: usize) -> Result<PowerDelayProfile> {
    if zero_pad == 0 {
        return Err(Error::invalid("zero_pad must be >= 1"));
    }
    let k_count = out.grid().num_points();
    let p_count = out.geometry().num_elements();
    let n = k_count * zero_pad;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let scale = 1.0 / k_count as f64;

    let mut power = Array2::zeros((p_count, n));
    let mut buf = vec![Complex64::default(); n];
    for p in 0..p_count {
        buf.fill(Complex64::default());
        for (k, v) in out.matrix().row(p).iter().enumerate() {
            buf[k] = v * (window.weight(k, k_count) * scale);
        }
        ifft.process(&mut buf);
        for (t, v) in buf.iter().enumerate() {
            power[(p, t)] = v.norm_sqr();
        }
    }
    let bin = 1.0 / (n as f64 * out.grid().spacing());
    let delays = (0..n).map(|t| t as f64 * bin).collect();
    Ok(PowerDelayProfile { power, delays })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
