//! Text scenario files: geometry, frequency grid, noise, and a path table.
//!
//! The format is line oriented. `#` starts a comment anywhere. A header of
//! `key = value` pairs is followed by a `[paths]` section with one
//! whitespace-separated row per path, and optional `[mask N]` sections that
//! restrict which elements see path `N` (everything else is shadowed).
//!
//! ```text
//! # reference line-of-sight scene
//! radius      = 0.5
//! elements    = 720
//! f_start_hz  = 28.0e9
//! f_stop_hz   = 30.0e9
//! points      = 750
//! noise_variance = 0.0      # complex variance per sample, default 0
//! seed        = 7           # default 0
//!
//! [paths]
//! # delay_ns  azimuth_deg  elevation_deg  distance_m  amp_real  amp_imag
//!   16.678    180.0        90.0           5.0         1.0       0.0
//!
//! [mask 0]
//! visible = 0..359          # element ranges, inclusive
//! ```
//!
//! Delays are nanoseconds and angles degrees (files are for humans); the
//! parsed [`Scenario`] carries seconds and radians.

use std::path::Path;

use num_complex::Complex64;

use hrpe_core::channel::{ArrayGeometry, FrequencyGrid, GainMask, NoiseSpec, PathParams};

use crate::error::{CliError, Result};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub radius: f64,
    pub elements: usize,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
    pub noise_variance: f64,
    pub seed: u64,
    pub paths: Vec<PathParams>,
    /// One mask per path, aligned with `paths`.
    pub masks: Vec<GainMask>,
}

impl Scenario {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        Ok(ArrayGeometry::new(self.radius, self.elements)?)
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        Ok(FrequencyGrid::new(self.f_start_hz, self.f_stop_hz, self.points)?)
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec { variance: self.noise_variance, seed: self.seed }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

enum Section {
    Header,
    Paths,
    Mask(usize),
}

/// Raw header values plus where each mask section started, for error
/// reporting after the whole file is read.
#[derive(Default)]
struct Builder {
    radius: Option<f64>,
    elements: Option<usize>,
    f_start_hz: Option<f64>,
    f_stop_hz: Option<f64>,
    points: Option<usize>,
    noise_variance: Option<f64>,
    seed: Option<u64>,
    paths: Vec<PathParams>,
    masks: Vec<MaskBlock>,
}

/// `(path index, visible ranges, header line)` from one `[mask N]` block.
type MaskBlock = (usize, Vec<(usize, usize)>, usize);

pub fn parse_scenario(path: &Path, text: &str) -> Result<Scenario> {
    let mut b = Builder::default();
    let mut section = Section::Header;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let code = raw.split('#').next().unwrap_or("").trim_end();
        if code.trim().is_empty() {
            continue;
        }

        if let Some(start) = code.find('[') {
            section = parse_section_header(path, line, start, code, &mut b)?;
            continue;
        }

        match section {
            Section::Header => parse_header_line(path, line, code, &mut b)?,
            Section::Paths => {
                let p = parse_path_row(path, line, code)?;
                b.paths.push(p);
            }
            Section::Mask(idx) => parse_mask_line(path, line, code, idx, &mut b)?,
        }
    }

    finish(path, b)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(path, &text)
}

fn parse_section_header(
    path: &Path,
    line: usize,
    start: usize,
    code: &str,
    b: &mut Builder,
) -> Result<Section> {
    let col = start + 1;
    let inner = code
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| CliError::parse(path, line, col, "unterminated section header"))?;
    if inner == "paths" {
        return Ok(Section::Paths);
    }
    if let Some(rest) = inner.strip_prefix("mask") {
        let idx: usize = rest.trim().parse().map_err(|_| {
            CliError::parse(path, line, col, format!("bad mask index `{}`", rest.trim()))
        })?;
        b.masks.push((idx, Vec::new(), line));
        return Ok(Section::Mask(b.masks.len() - 1));
    }
    Err(CliError::parse(path, line, col, format!("unknown section `[{inner}]`")))
}

/// 1-based column of the value in a `key = value` line.
fn value_column(code: &str, eq: usize) -> usize {
    let raw = &code[eq + 1..];
    eq + 1 + (raw.len() - raw.trim_start().len()) + 1
}

fn parse_header_line(path: &Path, line: usize, code: &str, b: &mut Builder) -> Result<()> {
    let Some(eq) = code.find('=') else {
        return Err(CliError::parse(path, line, 1, "expected `key = value`"));
    };
    let key = code[..eq].trim();
    let value = code[eq + 1..].trim();
    let col = value_column(code, eq);

    let bad_num =
        || CliError::parse(path, line, col, format!("bad value `{value}` for `{key}`"));
    let float = |slot: &mut Option<f64>| -> Result<()> {
        *slot = Some(value.parse().map_err(|_| bad_num())?);
        Ok(())
    };

    match key {
        "radius" => float(&mut b.radius)?,
        "f_start_hz" => float(&mut b.f_start_hz)?,
        "f_stop_hz" => float(&mut b.f_stop_hz)?,
        "noise_variance" => float(&mut b.noise_variance)?,
        "elements" => b.elements = Some(value.parse().map_err(|_| bad_num())?),
        "points" => b.points = Some(value.parse().map_err(|_| bad_num())?),
        "seed" => b.seed = Some(value.parse().map_err(|_| bad_num())?),
        _ => {
            return Err(CliError::parse(path, line, 1, format!("unknown key `{key}`")));
        }
    }
    Ok(())
}

/// Whitespace-separated tokens with their 0-based byte offsets.
fn tokens(code: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut rest = code;
    let mut base = 0;
    while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        out.push((base + start, &tail[..len]));
        base += start + len;
        rest = &rest[start + len..];
    }
    out
}

fn parse_path_row(path: &Path, line: usize, code: &str) -> Result<PathParams> {
    let toks = tokens(code);
    if toks.len() != 6 {
        return Err(CliError::parse(
            path,
            line,
            1,
            format!(
                "path row needs 6 values (delay_ns azimuth_deg elevation_deg \
                 distance_m amp_real amp_imag), found {}",
                toks.len()
            ),
        ));
    }
    let mut vals = [0.0f64; 6];
    for (slot, (pos, tok)) in vals.iter_mut().zip(&toks) {
        *slot = tok.parse().map_err(|_| {
            CliError::parse(path, line, pos + 1, format!("expected a number, found `{tok}`"))
        })?;
    }
    Ok(PathParams::new(
        vals[0] * 1e-9,
        vals[1].to_radians(),
        vals[2].to_radians(),
        vals[3],
        Complex64::new(vals[4], vals[5]),
    )?)
}

fn parse_mask_line(
    path: &Path,
    line: usize,
    code: &str,
    mask_slot: usize,
    b: &mut Builder,
) -> Result<()> {
    let Some(eq) = code.find('=') else {
        return Err(CliError::parse(path, line, 1, "expected `visible = a..b`"));
    };
    let key = code[..eq].trim();
    let value = code[eq + 1..].trim();
    let col = value_column(code, eq);
    if key != "visible" {
        return Err(CliError::parse(path, line, 1, format!("unknown mask key `{key}`")));
    }
    let Some((lo, hi)) = value.split_once("..") else {
        return Err(CliError::parse(path, line, col, format!("bad range `{value}`")));
    };
    let lo: usize = lo.trim().parse().map_err(|_| {
        CliError::parse(path, line, col, format!("bad range start `{}`", lo.trim()))
    })?;
    let hi: usize = hi.trim().parse().map_err(|_| {
        CliError::parse(path, line, col, format!("bad range end `{}`", hi.trim()))
    })?;
    b.masks[mask_slot].1.push((lo, hi));
    Ok(())
}

fn finish(path: &Path, b: Builder) -> Result<Scenario> {
    let missing = |key: &str| CliError::Format {
        path: path.display().to_string(),
        message: format!("missing required key `{key}`"),
    };
    let radius = b.radius.ok_or_else(|| missing("radius"))?;
    let elements = b.elements.ok_or_else(|| missing("elements"))?;
    let f_start_hz = b.f_start_hz.ok_or_else(|| missing("f_start_hz"))?;
    let f_stop_hz = b.f_stop_hz.ok_or_else(|| missing("f_stop_hz"))?;
    let points = b.points.ok_or_else(|| missing("points"))?;

    let mut masks = vec![GainMask::uniform(elements); b.paths.len()];
    for (idx, ranges, line) in &b.masks {
        if *idx >= b.paths.len() {
            return Err(CliError::parse(
                path,
                *line,
                1,
                format!("mask {idx} references path {idx}, but only {} declared", b.paths.len()),
            ));
        }
        masks[*idx] = GainMask::from_visible_ranges(elements, ranges)?;
    }

    Ok(Scenario {
        radius,
        elements,
        f_start_hz,
        f_stop_hz,
        points,
        noise_variance: b.noise_variance.unwrap_or(0.0),
        seed: b.seed.unwrap_or(0),
        paths: b.paths,
        masks,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
