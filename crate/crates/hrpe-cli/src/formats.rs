//! Binary and CSV codecs for every artifact the tool reads or writes.
//!
//! Two binary containers share one layout: a 4-byte magic, a `u32` format
//! version, two `u32` dimensions, three `f64` metadata slots, then the
//! row-major payload as little-endian `(re, im)` pairs.
//!
//! | magic  | payload              | dims        | metadata                     |
//! |--------|----------------------|-------------|------------------------------|
//! | `UCAH` | array snapshot       | `P x K`     | f_start, f_stop, radius      |
//! | `UCAS` | delay-azimuth powers | `N_φ x N_τ` | delay step, azimuth step, 0  |
//!
//! CSV exports print floats with 17 significant digits so that reading a
//! file back reproduces the written values to better than 1e-12 (in fact
//! exactly, up to the degree/radian conversion applied to angles). Angles
//! are degrees in files and radians in memory.
//!
//! # Example
//!
//! ```no_run
//! use hrpe_cli::formats::{read_snapshot, write_snapshot};
//! # fn demo(out: &hrpe_core::channel::ArrayOutput) -> hrpe_cli::error::Result<()> {
//! write_snapshot("scene.ucah".as_ref(), out)?;
//! let back = read_snapshot("scene.ucah".as_ref())?;
//! assert_eq!(back.matrix(), out.matrix());
//! # Ok(()) }
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use hrpe_core::channel::{
    ArrayGeometry, ArrayOutput, FrequencyGrid, PowerDelayProfile,
};
use hrpe_core::phase_mode::DelayAzimuthSpectrum;
use hrpe_core::pipeline::{ExtractedPath, IterationDiagnostics};
use hrpe_core::sage::ElementEstimateSet;
use hrpe_core::trajectory::Trajectory;

use crate::error::{CliError, Result};

// ---------------------------------------------------------------------------
// Shared binary container
// ---------------------------------------------------------------------------

const SNAPSHOT_MAGIC: [u8; 4] = *b"UCAH";
const SPECTRUM_MAGIC: [u8; 4] = *b"UCAS";
const FORMAT_VERSION: u32 = 1;

struct MatrixHeader {
    rows: usize,
    cols: usize,
    meta: [f64; 3],
}

fn write_matrix_file(
    path: &Path,
    magic: [u8; 4],
    header: &MatrixHeader,
    values: impl Iterator<Item = Complex64>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header.rows as u32).to_le_bytes())?;
    w.write_all(&(header.cols as u32).to_le_bytes())?;
    for m in header.meta {
        w.write_all(&m.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Strict little-endian reader over a fully slurped file.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(CliError::format(
                self.path,
                format!("truncated: needed {} bytes at offset {}", n, self.pos),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_matrix_file(path: &Path, magic: [u8; 4]) -> Result<(MatrixHeader, Array2<Complex64>)> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0, path };

    let found = c.take(4)?;
    if found != magic {
        return Err(CliError::format(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(&magic)
            ),
        ));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported format version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let meta = [c.f64()?, c.f64()?, c.f64()?];

    let expected = rows * cols * 16;
    let remaining = buf.len() - c.pos;
    if remaining != expected {
        return Err(CliError::format(
            path,
            format!("payload holds {remaining} bytes, expected {expected} for {rows}x{cols}"),
        ));
    }
    let mut data = Array2::default((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let re = c.f64()?;
            let im = c.f64()?;
            data[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok((MatrixHeader { rows, cols, meta }, data))
}

// ---------------------------------------------------------------------------
// Array snapshot (UCAH)
// ---------------------------------------------------------------------------

pub fn write_snapshot(path: &Path, out: &ArrayOutput) -> Result<()> {
    let header = MatrixHeader {
        rows: out.geometry().num_elements(),
        cols: out.grid().num_points(),
        meta: [out.grid().f_start(), out.grid().f_stop(), out.geometry().radius()],
    };
    write_matrix_file(path, SNAPSHOT_MAGIC, &header, out.matrix().iter().copied())
}

pub fn read_snapshot(path: &Path) -> Result<ArrayOutput> {
    let (header, data) = read_matrix_file(path, SNAPSHOT_MAGIC)?;
    let geometry = ArrayGeometry::new(header.meta[2], header.rows)?;
    let grid = FrequencyGrid::new(header.meta[0], header.meta[1], header.cols)?;
    Ok(ArrayOutput::from_parts(data, geometry, grid)?)
}

// ---------------------------------------------------------------------------
// Delay-azimuth spectrum (UCAS)
// ---------------------------------------------------------------------------

/// Both axes are uniform `index * step` lattices starting at zero, so the
/// header stores only the two steps and the reader rebuilds the vectors
/// bit-exactly.
pub fn write_spectrum_binary(path: &Path, spectrum: &DelayAzimuthSpectrum) -> Result<()> {
    let delay_step = spectrum.delays.get(1).copied().unwrap_or(0.0);
    let azimuth_step = spectrum.azimuths.get(1).copied().unwrap_or(0.0);
    let header = MatrixHeader {
        rows: spectrum.azimuths.len(),
        cols: spectrum.delays.len(),
        meta: [delay_step, azimuth_step, 0.0],
    };
    let values = spectrum.power.iter().map(|&p| Complex64::new(p, 0.0));
    write_matrix_file(path, SPECTRUM_MAGIC, &header, values)
}

pub fn read_spectrum_binary(path: &Path) -> Result<DelayAzimuthSpectrum> {
    let (header, data) = read_matrix_file(path, SPECTRUM_MAGIC)?;
    let delays = (0..header.cols).map(|t| t as f64 * header.meta[0]).collect();
    let azimuths = (0..header.rows).map(|a| a as f64 * header.meta[1]).collect();
    Ok(DelayAzimuthSpectrum { power: data.mapv(|v| v.re), delays, azimuths })
}

// ---------------------------------------------------------------------------
// CSV primitives
// ---------------------------------------------------------------------------

/// 17 significant digits: enough for `f64` to survive a print/parse cycle
/// unchanged.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(path: &Path, line: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        CliError::parse(path, line, 1, format!("expected a number, found `{}`", field.trim()))
    })
}

fn parse_index(path: &Path, line: usize, field: &str) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| {
        CliError::parse(path, line, 1, format!("expected an index, found `{}`", field.trim()))
    })
}

/// Split one CSV record and check the column count.
fn split_record<'a>(
    path: &Path,
    line: usize,
    record: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = record.split(',').collect();
    if fields.len() != expected {
        return Err(CliError::parse(
            path,
            line,
            1,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    Ok(fields)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn expect_header(path: &Path, lines: &[String], header: &str) -> Result<()> {
    match lines.first() {
        Some(first) if first == header => Ok(()),
        Some(first) => Err(CliError::parse(
            path,
            1,
            1,
            format!("unexpected header `{first}`, expected `{header}`"),
        )),
        None => Err(CliError::parse(path, 1, 1, "empty file")),
    }
}

// ---------------------------------------------------------------------------
// Path table
// ---------------------------------------------------------------------------

const PATHS_HEADER: &str = "path_id,delay_s,azimuth_deg,elevation_deg,distance_m,\
amp_real,amp_imag,support,score,init_delay_s,init_azimuth_deg";

pub fn write_paths_csv(path: &Path, paths: &[ExtractedPath]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{PATHS_HEADER}")?;
    for (id, p) in paths.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            id,
            fmt_float(p.delay),
            fmt_float(p.azimuth.to_degrees()),
            fmt_float(p.elevation.to_degrees()),
            fmt_float(p.distance),
            fmt_float(p.amplitude.re),
            fmt_float(p.amplitude.im),
            p.support_count,
            fmt_float(p.score),
            fmt_float(p.init_delay),
            fmt_float(p.init_azimuth.to_degrees()),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths_csv(path: &Path) -> Result<Vec<ExtractedPath>> {
    let lines = read_lines(path)?;
    expect_header(path, &lines, PATHS_HEADER)?;
    let mut paths = Vec::new();
    for (i, record) in lines.iter().enumerate().skip(1) {
        let line = i + 1;
        let f = split_record(path, line, record, 11)?;
        let id = parse_index(path, line, f[0])?;
        if id != paths.len() {
            return Err(CliError::parse(
                path,
                line,
                1,
                format!("path_id {id} out of order, expected {}", paths.len()),
            ));
        }
        paths.push(ExtractedPath {
            delay: parse_float(path, line, f[1])?,
            azimuth: parse_float(path, line, f[2])?.to_radians(),
            elevation: parse_float(path, line, f[3])?.to_radians(),
            distance: parse_float(path, line, f[4])?,
            amplitude: Complex64::new(
                parse_float(path, line, f[5])?,
                parse_float(path, line, f[6])?,
            ),
            support_count: parse_index(path, line, f[7])?,
            score: parse_float(path, line, f[8])?,
            init_delay: parse_float(path, line, f[9])?,
            init_azimuth: parse_float(path, line, f[10])?.to_radians(),
        });
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// Trajectory, diagnostic and residual tables
// ---------------------------------------------------------------------------

pub fn write_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "trajectory_id,element,delay_s,amp_real,amp_imag")?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (p, sel) in traj.selections.iter().enumerate() {
            let Some(est) = sel else { continue };
            writeln!(
                w,
                "{},{},{},{},{}",
                id,
                p,
                fmt_float(est.delay),
                fmt_float(est.amplitude.re),
                fmt_float(est.amplitude.im),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv(path: &Path, diagnostics: &[IterationDiagnostics]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "iteration,peak_delay_s,peak_azimuth_deg,peak_power,elevation_deg,\
plateau_low_deg,plateau_high_deg,support,removed,residual_estimate_power"
    )?;
    for d in diagnostics {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            d.iteration,
            fmt_float(d.peak_delay),
            fmt_float(d.peak_azimuth.to_degrees()),
            fmt_float(d.peak_power),
            fmt_float(d.elevation.to_degrees()),
            fmt_float(d.plateau_low.to_degrees()),
            fmt_float(d.plateau_high.to_degrees()),
            d.support_count,
            d.removed,
            fmt_float(d.residual_estimate_power),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Per-element estimates no extracted path claimed.
pub fn write_residual_csv(path: &Path, set: &ElementEstimateSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "element,path_rank,delay_s,amp_real,amp_imag")?;
    for (p, estimates) in set.per_element.iter().enumerate() {
        for (rank, est) in estimates.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                p,
                rank,
                fmt_float(est.delay),
                fmt_float(est.amplitude.re),
                fmt_float(est.amplitude.im),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Profile and spectrum grids as CSV
// ---------------------------------------------------------------------------

/// Header row carries the delay axis; each data row is one element.
pub fn write_cpdp_csv(path: &Path, profile: &PowerDelayProfile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "element")?;
    for d in &profile.delays {
        write!(w, ",{}", fmt_float(*d))?;
    }
    writeln!(w)?;
    for (p, row) in profile.power.outer_iter().enumerate() {
        write!(w, "{p}")?;
        for v in row {
            write!(w, ",{}", fmt_float(*v))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cpdp_csv(path: &Path) -> Result<PowerDelayProfile> {
    let lines = read_lines(path)?;
    let Some(first) = lines.first() else {
        return Err(CliError::parse(path, 1, 1, "empty file"));
    };
    let mut head = first.split(',');
    if head.next() != Some("element") {
        return Err(CliError::parse(path, 1, 1, "expected `element` header"));
    }
    let delays: Vec<f64> =
        head.map(|f| parse_float(path, 1, f)).collect::<Result<_>>()?;

    let rows = lines.len() - 1;
    let mut power = Array2::zeros((rows, delays.len()));
    for (i, record) in lines.iter().enumerate().skip(1) {
        let line = i + 1;
        let f = split_record(path, line, record, delays.len() + 1)?;
        let p = parse_index(path, line, f[0])?;
        if p != i - 1 {
            return Err(CliError::parse(path, line, 1, format!("element {p} out of order")));
        }
        for (j, field) in f[1..].iter().enumerate() {
            power[(i - 1, j)] = parse_float(path, line, field)?;
        }
    }
    Ok(PowerDelayProfile { power, delays })
}

/// Header row carries the azimuth axis in degrees; each data row is one
/// delay bin. This is the transpose of the in-memory layout, which keeps the
/// long axis (delay) vertical in spreadsheet viewers.
pub fn write_spectrum_csv(path: &Path, spectrum: &DelayAzimuthSpectrum) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "delay_s")?;
    for a in &spectrum.azimuths {
        write!(w, ",{}", fmt_float(a.to_degrees()))?;
    }
    writeln!(w)?;
    for (t, d) in spectrum.delays.iter().enumerate() {
        write!(w, "{}", fmt_float(*d))?;
        for a in 0..spectrum.azimuths.len() {
            write!(w, ",{}", fmt_float(spectrum.power[(a, t)]))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectrum_csv(path: &Path) -> Result<DelayAzimuthSpectrum> {
    let lines = read_lines(path)?;
    let Some(first) = lines.first() else {
        return Err(CliError::parse(path, 1, 1, "empty file"));
    };
    let mut head = first.split(',');
    if head.next() != Some("delay_s") {
        return Err(CliError::parse(path, 1, 1, "expected `delay_s` header"));
    }
    let azimuths: Vec<f64> = head
        .map(|f| parse_float(path, 1, f).map(f64::to_radians))
        .collect::<Result<_>>()?;

    let n_tau = lines.len() - 1;
    let mut delays = Vec::with_capacity(n_tau);
    let mut power = Array2::zeros((azimuths.len(), n_tau));
    for (i, record) in lines.iter().enumerate().skip(1) {
        let line = i + 1;
        let f = split_record(path, line, record, azimuths.len() + 1)?;
        delays.push(parse_float(path, line, f[0])?);
        for (a, field) in f[1..].iter().enumerate() {
            power[(a, i - 1)] = parse_float(path, line, field)?;
        }
    }
    Ok(DelayAzimuthSpectrum { power, delays, azimuths })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use hrpe_core::channel::{synthesize_channel, GainMask, NoiseSpec, PathParams};
    use hrpe_core::sage::ElementPathEstimate;
    use std::f64::consts::FRAC_PI_2;

    fn sample_output() -> ArrayOutput {
        let geom = ArrayGeometry::new(0.2, 6).unwrap();
        let grid = FrequencyGrid::new(2.8e9, 3.0e9, 8).unwrap();
        let path =
            PathParams::new(20e-9, 1.0, FRAC_PI_2, 4.0, Complex64::new(1.0, -0.5)).unwrap();
        synthesize_channel(
            &geom,
            &grid,
            &[path],
            &[GainMask::uniform(6)],
            &NoiseSpec { variance: 1e-4, seed: 3 },
        )
        .unwrap()
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("scene.ucah");
        let out = sample_output();
        write_snapshot(&file, &out).unwrap();
        let back = read_snapshot(&file).unwrap();
        assert_eq!(back.matrix(), out.matrix());
        assert_eq!(back.geometry(), out.geometry());
        assert_eq!(back.grid(), out.grid());

        let copy = dir.path().join("copy.ucah");
        write_snapshot(&copy, &back).unwrap();
        assert_eq!(std::fs::read(&file).unwrap(), std::fs::read(&copy).unwrap());
    }

    #[test]
    fn snapshot_reader_rejects_defects() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("scene.ucah");
        write_snapshot(&file, &sample_output()).unwrap();

        let mut bytes = std::fs::read(&file).unwrap();
        bytes[0] = b'X';
        std::fs::write(&file, &bytes).unwrap();
        let err = read_snapshot(&file).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("bad magic"));

        bytes[0] = b'U';
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&file, &bytes).unwrap();
        let err = read_snapshot(&file).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        bytes[4] = 9;
        std::fs::write(&file, &bytes).unwrap();
        let err = read_snapshot(&file).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn spectrum_binary_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("spec.ucas");
        let n_phi = 5;
        let n_tau = 7;
        let delay_step = 2.5e-10;
        let phi_step = std::f64::consts::TAU / n_phi as f64;
        let spectrum = DelayAzimuthSpectrum {
            power: Array2::from_shape_fn((n_phi, n_tau), |(a, t)| (a * 7 + t) as f64 / 3.0),
            delays: (0..n_tau).map(|t| t as f64 * delay_step).collect(),
            azimuths: (0..n_phi).map(|a| a as f64 * phi_step).collect(),
        };
        write_spectrum_binary(&file, &spectrum).unwrap();
        let back = read_spectrum_binary(&file).unwrap();
        assert_eq!(back, spectrum);
    }

    #[test]
    fn paths_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.csv");
        let paths = vec![
            ExtractedPath {
                delay: 15.3e-9,
                azimuth: 2.1,
                elevation: 1.2,
                distance: 5.0,
                amplitude: Complex64::new(0.3, -0.7),
                support_count: 42,
                score: 1.9e3,
                init_delay: 15.1e-9,
                init_azimuth: 2.05,
            },
            ExtractedPath {
                delay: 40.0e-9,
                azimuth: 0.0,
                elevation: FRAC_PI_2,
                distance: 11.0,
                amplitude: Complex64::new(-0.1, 0.0),
                support_count: 7,
                score: 2.2,
                init_delay: 40.2e-9,
                init_azimuth: 6.2,
            },
        ];
        write_paths_csv(&file, &paths).unwrap();
        let back = read_paths_csv(&file).unwrap();
        assert_eq!(back.len(), paths.len());
        for (b, p) in back.iter().zip(&paths) {
            assert!((b.delay - p.delay).abs() < 1e-12);
            assert!((b.azimuth - p.azimuth).abs() < 1e-12);
            assert!((b.elevation - p.elevation).abs() < 1e-12);
            assert!((b.distance - p.distance).abs() < 1e-12);
            assert!((b.amplitude - p.amplitude).norm() < 1e-12);
            assert_eq!(b.support_count, p.support_count);
            assert!((b.score - p.score).abs() < 1e-9);
            assert!((b.init_delay - p.init_delay).abs() < 1e-12);
            assert!((b.init_azimuth - p.init_azimuth).abs() < 1e-12);
        }
    }

    #[test]
    fn paths_csv_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.csv");
        std::fs::write(&file, format!("{PATHS_HEADER}\n0,not_a_number\n")).unwrap();
        let err = read_paths_csv(&file).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn cpdp_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cpdp.csv");
        let profile = PowerDelayProfile {
            power: Array2::from_shape_fn((3, 4), |(p, t)| (p + 1) as f64 * 0.1 + t as f64),
            delays: vec![0.0, 1e-9, 2e-9, 3e-9],
        };
        write_cpdp_csv(&file, &profile).unwrap();
        let back = read_cpdp_csv(&file).unwrap();
        assert_eq!(back.delays, profile.delays);
        assert_eq!(back.power, profile.power);
    }

    #[test]
    fn spectrum_csv_round_trips_within_tolerance() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("spec.csv");
        let spectrum = DelayAzimuthSpectrum {
            power: Array2::from_shape_fn((4, 3), |(a, t)| (a as f64).sin() + t as f64),
            delays: vec![0.0, 0.5e-9, 1.0e-9],
            azimuths: vec![0.0, 1.3, 2.6, 3.9],
        };
        write_spectrum_csv(&file, &spectrum).unwrap();
        let back = read_spectrum_csv(&file).unwrap();
        assert_eq!(back.power, spectrum.power);
        assert_eq!(back.delays, spectrum.delays);
        for (b, a) in back.azimuths.iter().zip(&spectrum.azimuths) {
            assert!((b - a).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_and_trajectory_tables_list_every_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let geom = ArrayGeometry::new(0.2, 3).unwrap();
        let grid = FrequencyGrid::new(2.8e9, 3.0e9, 8).unwrap();
        let mut set = ElementEstimateSet::empty(geom, grid);
        set.per_element[0].push(ElementPathEstimate {
            delay: 1e-9,
            amplitude: Complex64::new(1.0, 0.0),
        });
        set.per_element[2].push(ElementPathEstimate {
            delay: 2e-9,
            amplitude: Complex64::new(0.0, -1.0),
        });
        let res_file = dir.path().join("residual.csv");
        write_residual_csv(&res_file, &set).unwrap();
        let text = std::fs::read_to_string(&res_file).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,"));
        assert!(text.lines().nth(2).unwrap().starts_with("2,0,"));

        let traj = Trajectory {
            selections: vec![
                Some(ElementPathEstimate { delay: 1e-9, amplitude: Complex64::new(1.0, 0.0) }),
                None,
                Some(ElementPathEstimate { delay: 2e-9, amplitude: Complex64::new(0.5, 0.5) }),
            ],
            support_count: 2,
            elevation: FRAC_PI_2,
            init_delay: 1.5e-9,
            init_azimuth: 0.3,
        };
        let traj_file = dir.path().join("trajectories.csv");
        write_trajectories_csv(&traj_file, &[traj]).unwrap();
        let text = std::fs::read_to_string(&traj_file).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,"));
        assert!(text.lines().nth(2).unwrap().starts_with("0,2,"));
    }
}
