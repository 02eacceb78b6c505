//! Phase-mode processing: circular-harmonic decomposition of the ring array
//! and the joint delay-azimuth spectrum built from it.
//!
//! Projecting the snapshot onto spatial harmonics `e^{-jmφ_p}` turns the ring
//! into a set of mode channels. Each mode `m` of a horizontal plane wave
//! carries the factor `j^m J_m(2πfr/c)`, so the transform divides out a
//! quadrature Bessel gain and the `j^m` rotation; what remains is, mode by
//! mode, approximately `α e^{-j2πfτ} e^{-jmφ_src}`, and a 2D inverse DFT over
//! frequency and mode order concentrates each arrival at its `(τ, φ)`.
//!
//! # Example
//!
//! ```
//! use hrpe_core::channel::{
//!     synthesize_channel, ArrayGeometry, FrequencyGrid, GainMask, NoiseSpec, PathParams,
//! };
//! use hrpe_core::phase_mode::{
//!     delay_azimuth_spectrum, find_dominant_peak, max_mode, phase_mode_transform,
//! };
//! use num_complex::Complex64;
//! use std::f64::consts::FRAC_PI_2;
//!
//! let geom = ArrayGeometry::new(0.1, 24).unwrap();
//! let grid = FrequencyGrid::new(2.8e9, 3.0e9, 32).unwrap();
//! let path = PathParams::new(80e-9, 1.0, FRAC_PI_2, 20.0, Complex64::new(1.0, 0.0)).unwrap();
//! let out = synthesize_channel(
//!     &geom,
//!     &grid,
//!     &[path],
//!     &[GainMask::uniform(24)],
//!     &NoiseSpec { variance: 0.0, seed: 0 },
//! )
//! .unwrap();
//!
//! let m = max_mode(&geom, &grid);
//! let response = phase_mode_transform(&out, m).unwrap();
//! let spectrum = delay_azimuth_spectrum(&response, 4, 4).unwrap();
//! let peak = find_dominant_peak(&spectrum).unwrap();
//! assert!((peak.delay - 80e-9).abs() < 2e-9);
//! assert!((peak.azimuth - 1.0).abs() < 0.2);
//! ```

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

use crate::bessel::{bessel_j_sequence, MAX_ORDER};
use crate::channel::{wrap_azimuth, ArrayGeometry, ArrayOutput, FrequencyGrid, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Mode gain
// ---------------------------------------------------------------------------

/// `|G|` is capped here when the Bessel denominator underflows, which only
/// happens for modes beyond the propagating region `m <= β`.
pub const MODE_GAIN_LIMIT: f64 = 2.0e3;

const DENOM_FLOOR: f64 = 1e-3;

fn gain_from_sequence(seq: &[f64], order: usize) -> Complex64 {
    let prime = if order == 0 {
        -seq[1]
    } else {
        0.5 * (seq[order - 1] - seq[order + 1])
    };
    let den = Complex64::new(seq[order], -prime);
    let mag = den.norm();
    if mag < DENOM_FLOOR {
        // Evanescent orders: J and J' both underflow together.
        if mag == 0.0 {
            return Complex64::new(MODE_GAIN_LIMIT, 0.0);
        }
        return den.conj() * (MODE_GAIN_LIMIT / mag);
    }
    den.inv() * 2.0
}

/// Equalizer gain `G_m(f) = 2 / (J_m(β) - j J'_m(β))` with `β = 2πfr/c`,
/// clamped to magnitude `MODE_GAIN_LIMIT` near denominator zeros. `J_m` and
/// `J'_m` are in quadrature for `β > m`, so `|J_m - jJ'_m|` tracks the Bessel
/// envelope and the gain stays bounded across the nulls of `J_m` alone. Odd
/// negative modes flip sign: `G_{-m} = (-1)^m G_m`.
pub fn mode_filter(mode: i32, frequency: f64, radius: f64) -> Result<Complex64> {
    if !frequency.is_finite() || frequency <= 0.0 {
        return Err(Error::invalid(format!("frequency {frequency} must be finite and > 0")));
    }
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::invalid(format!("radius {radius} must be finite and >= 0")));
    }
    let order = mode.unsigned_abs();
    let beta = TAU * frequency * radius / SPEED_OF_LIGHT;
    let seq = bessel_j_sequence(order + 1, beta)?;
    let mut gain = gain_from_sequence(&seq, order as usize);
    if mode < 0 && order % 2 == 1 {
        gain = -gain;
    }
    Ok(gain)
}

/// Highest usable mode order: the band supports `floor(2π f_start r / c)`
/// harmonics and the ring samples `floor((P-1)/2)` without aliasing.
pub fn max_mode(geom: &ArrayGeometry, grid: &FrequencyGrid) -> usize {
    let beta_start = TAU * grid.f_start() * geom.radius() / SPEED_OF_LIGHT;
    let by_band = beta_start.floor() as usize;
    let by_ring = (geom.num_elements() - 1) / 2;
    by_band.min(by_ring).min(MAX_ORDER as usize - 1)
}

// ---------------------------------------------------------------------------
// Harmonic decomposition
// ---------------------------------------------------------------------------

/// Equalized mode channels. Row `i` holds mode `m = i - max_mode` over the
/// frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseModeResponse {
    /// `(2M+1) x K` matrix, mode order ascending from `-M`.
    pub modes: Array2<Complex64>,
    pub max_mode: usize,
    pub grid: FrequencyGrid,
}

impl PhaseModeResponse {
    /// Row index of mode `m`.
    pub fn mode_index(&self, m: i64) -> usize {
        (m + self.max_mode as i64) as usize
    }
}

/// `j^{-m}`.
fn demodulation(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Project the snapshot onto modes `-M..=M`:
/// `H_m(f_k) = j^{-m} G_m(f_k) (1/P) Σ_p Y(p,k) e^{-jmφ_p}`.
///
/// The `j^{-m}` factor undoes the quadrature rotation each harmonic picks up
/// on the ring; without it every arrival would appear 90° away in azimuth.
pub fn phase_mode_transform(out: &ArrayOutput, max_mode: usize) -> Result<PhaseModeResponse> {
    let p_count = out.geometry().num_elements();
    let k_count = out.grid().num_points();
    if 2 * max_mode + 1 > p_count {
        return Err(Error::invalid(format!(
            "mode order {max_mode} aliases on a {p_count}-element ring"
        )));
    }
    if max_mode + 1 > MAX_ORDER as usize {
        return Err(Error::invalid(format!("mode order {max_mode} exceeds Bessel range")));
    }

    let radius = out.geometry().radius();
    let m_rows = 2 * max_mode + 1;
    let fft = FftPlanner::new().plan_fft_forward(p_count);
    let inv_p = 1.0 / p_count as f64;

    let mut modes = Array2::zeros((m_rows, k_count));
    let mut column = vec![Complex64::default(); p_count];
    for (k, f) in out.grid().frequencies().enumerate() {
        for (dst, src) in column.iter_mut().zip(out.matrix().column(k)) {
            *dst = *src;
        }
        fft.process(&mut column);

        let beta = TAU * f * radius / SPEED_OF_LIGHT;
        let seq = bessel_j_sequence(max_mode as u32 + 1, beta)?;
        for (i, m) in (-(max_mode as i64)..=max_mode as i64).enumerate() {
            let order = m.unsigned_abs() as usize;
            let mut gain = gain_from_sequence(&seq, order);
            if m < 0 && order % 2 == 1 {
                gain = -gain;
            }
            let harmonic = column[m.rem_euclid(p_count as i64) as usize];
            modes[(i, k)] = demodulation(m) * gain * inv_p * harmonic;
        }
    }
    Ok(PhaseModeResponse { modes, max_mode, grid: *out.grid() })
}

// ---------------------------------------------------------------------------
// Delay-azimuth spectrum
// ---------------------------------------------------------------------------

/// Power of the 2D beamformer output over a cyclic delay x azimuth lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayAzimuthSpectrum {
    /// `N_φ x N_τ` powers.
    pub power: Array2<f64>,
    /// Delay of each column, seconds, spanning `[0, 1/Δf)`.
    pub delays: Vec<f64>,
    /// Azimuth of each row, radians, spanning `[0, 2π)`.
    pub azimuths: Vec<f64>,
}

/// Evaluate `S(τ, φ) = (1/((2M+1)K)) Σ_m Σ_k H_m(f_k) e^{j2πf_kτ} e^{jmφ}`
/// on an `N_φ x N_τ` lattice via zero-padded inverse FFTs along both axes.
/// `N_τ = K·pad_delay`, `N_φ = (2M+1)·pad_azimuth`.
pub fn delay_azimuth_spectrum(
    resp: &PhaseModeResponse,
    pad_delay: usize,
    pad_azimuth: usize,
) -> Result<DelayAzimuthSpectrum> {
    if pad_delay == 0 || pad_azimuth == 0 {
        return Err(Error::invalid("padding factors must be >= 1"));
    }
    let m_rows = resp.modes.nrows();
    let k_count = resp.modes.ncols();
    let n_tau = k_count * pad_delay;
    let n_phi = m_rows * pad_azimuth;

    let mut planner = FftPlanner::new();
    let ifft_tau = planner.plan_fft_inverse(n_tau);
    let ifft_phi = planner.plan_fft_inverse(n_phi);

    // Delay axis first; the two transforms commute.
    let mut stage = Array2::zeros((m_rows, n_tau));
    let mut buf = vec![Complex64::default(); n_tau];
    for i in 0..m_rows {
        buf.fill(Complex64::default());
        for (k, v) in resp.modes.row(i).iter().enumerate() {
            buf[k] = *v;
        }
        ifft_tau.process(&mut buf);
        for (t, v) in buf.iter().enumerate() {
            stage[(i, t)] = *v;
        }
    }

    let norm = 1.0 / (m_rows as f64 * k_count as f64);
    let max_m = resp.max_mode as i64;
    let mut power = Array2::zeros((n_phi, n_tau));
    let mut col = vec![Complex64::default(); n_phi];
    for t in 0..n_tau {
        col.fill(Complex64::default());
        for (i, m) in (-max_m..=max_m).enumerate() {
            col[m.rem_euclid(n_phi as i64) as usize] = stage[(i, t)];
        }
        ifft_phi.process(&mut col);
        for (a, v) in col.iter().enumerate() {
            power[(a, t)] = (v * norm).norm_sqr();
        }
    }

    let spacing = resp.grid.max_delay() / n_tau as f64;
    let phi_step = TAU / n_phi as f64;
    let delays = (0..n_tau).map(|t| t as f64 * spacing).collect();
    let azimuths = (0..n_phi).map(|a| a as f64 * phi_step).collect();
    Ok(DelayAzimuthSpectrum { power, delays, azimuths })
}

// ---------------------------------------------------------------------------
// Peak extraction
// ---------------------------------------------------------------------------

/// Sub-bin location of the strongest spectrum entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPeak {
    /// Seconds, in `[0, 1/Δf)`.
    pub delay: f64,
    /// Radians, in `[0, 2π)`.
    pub azimuth: f64,
    /// Interpolated power at the vertex.
    pub power: f64,
}

/// Cyclic three-point log fit around `idx`; returns `(shift, vertex rise)`.
fn parabolic_cyclic(get: impl Fn(usize) -> f64, n: usize, idx: usize) -> (f64, f64) {
    if n < 3 {
        return (0.0, 0.0);
    }
    let prev = get((idx + n - 1) % n);
    let here = get(idx);
    let next = get((idx + 1) % n);
    if prev <= 0.0 || here <= 0.0 || next <= 0.0 {
        return (0.0, 0.0);
    }
    let (lp, l0, ln) = (prev.ln(), here.ln(), next.ln());
    let denom = lp - 2.0 * l0 + ln;
    if denom >= -1e-12 {
        return (0.0, 0.0);
    }
    let shift = (0.5 * (lp - ln) / denom).clamp(-0.5, 0.5);
    let rise = -(lp - ln) * (lp - ln) / (8.0 * denom);
    (shift, rise)
}

/// Global maximum of the spectrum with separable sub-bin refinement, or
/// `None` for an all-zero spectrum. Grid ties resolve to the lowest
/// `(azimuth, delay)` index pair.
pub fn find_dominant_peak(spec: &DelayAzimuthSpectrum) -> Option<SpectrumPeak> {
    let (n_phi, n_tau) = spec.power.dim();
    let mut best = (0usize, 0usize);
    let mut best_pow = 0.0f64;
    for a in 0..n_phi {
        for t in 0..n_tau {
            let v = spec.power[(a, t)];
            if v > best_pow {
                best_pow = v;
                best = (a, t);
            }
        }
    }
    if best_pow == 0.0 {
        return None;
    }

    let (a, t) = best;
    let (da, rise_a) = parabolic_cyclic(|i| spec.power[(i, t)], n_phi, a);
    let (dt, rise_t) = parabolic_cyclic(|i| spec.power[(a, i)], n_tau, t);

    let span = spec.delays.len() as f64 * (spec.delays[1] - spec.delays[0]);
    let mut delay = (t as f64 + dt) * (spec.delays[1] - spec.delays[0]);
    if delay < 0.0 {
        delay += span;
    }
    if delay >= span {
        delay -= span;
    }
    let azimuth = wrap_azimuth((a as f64 + da) * TAU / n_phi as f64);
    Some(SpectrumPeak { delay, azimuth, power: best_pow * (rise_a + rise_t).exp() })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
