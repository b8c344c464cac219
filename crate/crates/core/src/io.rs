//! Plot-ready CSV and JSON outputs. Numbers are written in Rust's shortest
//! round-trip form, so identical runs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::analysis::FitResult;
use crate::dressed::DressedSystem;
use crate::error::{Error, Result};
use crate::gpe::Snapshot;
use crate::phys::Scheme;
use crate::protocols::{CalibrationPoint, ContinuousRun, CurvePoint, ShutdownCurve};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e7).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Columns `z, delta, V_plus, V_minus, V_bare_t, V_bare_u` (m, rad/s, J).
pub fn write_dressed_csv(path: &Path, system: &DressedSystem, z: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["z", "delta", "V_plus", "V_minus", "V_bare_t", "V_bare_u"]).map_err(csv_error)?;
    for &zi in z {
        let s = system.sample(zi);
        w.write_record([s.z, s.delta, s.v_plus, s.v_minus, s.v_bare_t, s.v_bare_u].map(num))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `scheme, omega0_hz, fraction, uncertainty` (empty when the point
/// was not refined).
pub fn write_curves_csv(path: &Path, curves: &[&ShutdownCurve]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["scheme", "omega0_hz", "fraction", "uncertainty"]).map_err(csv_error)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.scheme.label().to_string(),
                num(p.omega0),
                num(p.fraction),
                p.uncertainty.map(num).unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_scheme(label: &str) -> Result<Scheme> {
    Scheme::ALL
        .into_iter()
        .find(|s| s.label() == label)
        .ok_or_else(|| Error::Fit(format!("unknown scheme label '{label}'")))
}

/// Read a file written by [`write_curves_csv`], one curve per scheme in
/// order of first appearance. A file without a `scheme` column is read as a
/// single curve of `default_scheme`.
pub fn read_curves_csv(path: &Path, default_scheme: Scheme) -> Result<Vec<ShutdownCurve>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers = r.headers().map_err(csv_error)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(xi), Some(yi)) = (col("omega0_hz"), col("fraction")) else {
        return Err(Error::Fit(format!("{} needs omega0_hz and fraction columns", path.display())));
    };
    let si = col("scheme");
    let ui = col("uncertainty");
    let mut groups: Vec<(Scheme, Vec<CurvePoint>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let parse = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::Fit(format!("bad number '{}' in {}: {e}", field(i), path.display())))
        };
        let scheme = match si {
            Some(i) => parse_scheme(field(i))?,
            None => default_scheme,
        };
        let uncertainty = match ui {
            Some(i) if !field(i).is_empty() => Some(parse(i)?),
            _ => None,
        };
        let p = CurvePoint {
            omega0: parse(xi)?,
            fraction: parse(yi)?,
            uncertainty,
        };
        match groups.iter_mut().find(|(s, _)| *s == scheme) {
            Some((_, v)) => v.push(p),
            None => groups.push((scheme, vec![p])),
        }
    }
    groups.into_iter().map(|(s, p)| ShutdownCurve::new(s, p)).collect()
}

/// Columns `scheme, omega0_hz, z, integrated_density`: atom fraction per
/// z bin after the full sequence, one block per sweep point.
pub fn write_carpet_csv(path: &Path, runs: &[&ContinuousRun]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["scheme", "omega0_hz", "z", "integrated_density"]).map_err(csv_error)?;
    for run in runs {
        for p in &run.points {
            for (z, n) in run.carpet_z.iter().zip(&p.carpet) {
                w.write_record([run.scheme.label().to_string(), num(p.omega0), num(*z), num(*n)])
                    .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `drive, rabi_omega, omega0_hz, transferred` then one population
/// column per component.
pub fn write_calibration_csv(path: &Path, points: &[CalibrationPoint], labels: &[&str]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["drive".to_string(), "rabi_omega".into(), "omega0_hz".into(), "transferred".into()];
    header.extend(labels.iter().map(|l| format!("population_{l}")));
    w.write_record(&header).map_err(csv_error)?;
    for p in points {
        let mut row = vec![num(p.drive), num(p.rabi_omega), num(p.omega0), num(p.transferred)];
        row.extend(p.populations.iter().map(|&x| num(x)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `scheme, omega0_hz, fraction, fitted, residual`.
pub fn write_residuals_csv(path: &Path, fits: &[(&ShutdownCurve, &FitResult)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["scheme", "omega0_hz", "fraction", "fitted", "residual"]).map_err(csv_error)?;
    for (curve, fit) in fits {
        for p in &curve.points {
            let f = fit.eval(p.omega0);
            w.write_record([curve.scheme.label().to_string(), num(p.omega0), num(p.fraction), num(f), num(p.fraction - f)])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SnapshotFile<'a, M: Serialize> {
    metadata: &'a M,
    snapshot: &'a Snapshot,
}

/// Snapshot (z, |ψ|², arg ψ per component) with a metadata header block.
pub fn write_snapshot_json<M: Serialize>(path: &Path, metadata: &M, snapshot: &Snapshot) -> Result<()> {
    write_json(path, &SnapshotFile { metadata, snapshot })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
