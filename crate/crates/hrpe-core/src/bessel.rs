//! Bessel functions of the first kind, integer order.
//!
//! A single downward three-term recurrence with sum normalization (Miller's
//! algorithm) serves the whole supported domain. The recurrence is started
//! well above both the requested order and the turning point `k ≈ x`, where
//! the unwanted second solution decays super-exponentially under descent, and
//! the pass is normalized with `J₀(x) + 2·Σ J₂ₖ(x) = 1`. One pass yields all
//! orders up to the request, which is what the phase-mode filter bank needs.

use crate::error::{Error, Result};

/// Largest supported order.
pub const MAX_ORDER: u32 = 1000;
/// Largest supported argument.
pub const MAX_ARGUMENT: f64 = 10_000.0;

const RESCALE_LIMIT: f64 = 1e250;
const RESCALE: f64 = 1e-250;

fn check_domain(order: u32, x: f64) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::invalid(format!("Bessel order {order} exceeds {MAX_ORDER}")));
    }
    if !(0.0..=MAX_ARGUMENT).contains(&x) {
        return Err(Error::invalid(format!(
            "Bessel argument {x} outside [0, {MAX_ARGUMENT}]"
        )));
    }
    Ok(())
}

/// `J_m(x)` for all `m = 0..=max_order` in one pass.
pub fn bessel_j_sequence(max_order: u32, x: f64) -> Result<Vec<f64>> {
    check_domain(max_order, x)?;
    let m = max_order as usize;

    if x == 0.0 {
        let mut out = vec![0.0; m + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    if x < 1e-8 {
        // Leading series terms; truncation is below f64 resolution here.
        let mut out = vec![0.0; m + 1];
        out[0] = 1.0 - x * x / 4.0;
        if m >= 1 {
            out[1] = (x / 2.0) * (1.0 - x * x / 8.0);
            for k in 2..=m {
                out[k] = out[k - 1] * (x / 2.0) / k as f64;
            }
        }
        return Ok(out);
    }

    // Start above both the order and the turning point. The cube-root term
    // covers the slow Airy-regime decay just above k = x.
    let guard = 24 + (8.0 * x.max(1.0).cbrt()).ceil() as usize;
    let mut start = m.max(x.ceil() as usize) + guard;
    if start % 2 == 1 {
        start += 1;
    }

    let mut out = vec![0.0; m + 1];
    let mut out_scale = vec![0i32; m + 1];
    let mut scale_count = 0i32;

    let mut upper = 0.0f64; // J_{k+1}, trial scale
    let mut current = 1e-30f64; // J_k
    let mut norm = 0.0f64; // J_0 + 2 Σ J_even, trial scale
    let two_over_x = 2.0 / x;

    for k in (1..=start).rev() {
        let lower = k as f64 * two_over_x * current - upper;
        upper = current;
        current = lower;
        let idx = k - 1;
        if idx <= m {
            out[idx] = current;
            out_scale[idx] = scale_count;
        }
        if idx % 2 == 0 {
            norm += if idx == 0 { current } else { 2.0 * current };
        }
        if current.abs() > RESCALE_LIMIT {
            current *= RESCALE;
            upper *= RESCALE;
            norm *= RESCALE;
            scale_count += 1;
        }
    }

    for k in 0..=m {
        let shift = scale_count - out_scale[k];
        out[k] = out[k] * RESCALE.powi(shift) / norm;
    }
    Ok(out)
}

/// `J_order(x)`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    Ok(*bessel_j_sequence(order, x)?.last().unwrap())
}

/// `J'_order(x)` via `(J_{m-1} - J_{m+1}) / 2`, with `J'_0 = -J_1`.
pub fn bessel_j_prime(order: u32, x: f64) -> Result<f64> {
    check_domain(order, x)?;
    if order == 0 {
        return Ok(-bessel_j(1, x)?);
    }
    let seq = bessel_j_sequence(order + 1, x)?;
    Ok((seq[order as usize - 1] - seq[order as usize + 1]) / 2.0)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
