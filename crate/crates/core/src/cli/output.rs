//! Output writers: CSV tables, binary field snapshots with a manifest, and
//! plot-ready slices.
//!
//! Snapshot layout: 8-byte magic `PORPLATE`, little-endian `u32` format
//! version, little-endian `u32` field kind, then little-endian `f64`
//! values. Pressure snapshots hold modal coefficients in mode-major,
//! x3-minor order (`value[k * N3 + j]`); plate snapshots hold one
//! coefficient per mode. The in-plane mode index is `k = (a-1) N + (b-1)`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::discretization::{Discretization, PlateField, PressureField};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"PORPLATE";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Pressure = 1,
    PlateDisplacement = 2,
    PlateVelocity = 3,
}

impl SnapshotKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pressure => "pressure",
            Self::PlateDisplacement => "plate_displacement",
            Self::PlateVelocity => "plate_velocity",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Self::Pressure => "p",
            Self::PlateDisplacement => "w",
            Self::PlateVelocity => "v",
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(Self::Pressure),
            2 => Some(Self::PlateDisplacement),
            3 => Some(Self::PlateVelocity),
            _ => None,
        }
    }
}

pub fn encode_snapshot(kind: SnapshotKind, values: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(SNAPSHOT_HEADER_BYTES + 8 * values.len());
    bytes.extend_from_slice(SNAPSHOT_MAGIC);
    bytes.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(kind as u32).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Inverse of [`encode_snapshot`]; `None` for a bad header or length.
pub fn decode_snapshot(bytes: &[u8]) -> Option<(SnapshotKind, Vec<f64>)> {
    if bytes.len() < SNAPSHOT_HEADER_BYTES || &bytes[..8] != SNAPSHOT_MAGIC {
        return None;
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().ok()?);
    let kind = SnapshotKind::from_code(u32::from_le_bytes(bytes[12..16].try_into().ok()?))?;
    let body = &bytes[SNAPSHOT_HEADER_BYTES..];
    if version != SNAPSHOT_VERSION || !body.len().is_multiple_of(8) {
        return None;
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Some((kind, values))
}

/// Writes snapshots under `<root>/snapshots/` and records them for the
/// manifest.
pub struct SnapshotWriter {
    root: PathBuf,
    lines: Vec<String>,
}

impl SnapshotWriter {
    pub fn new(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root.join("snapshots"))?;
        Ok(Self {
            root: root.to_path_buf(),
            lines: Vec::new(),
        })
    }

    fn write(&mut self, kind: SnapshotKind, step: usize, t: f64, shape: &str, values: &[f64]) -> io::Result<()> {
        let rel = format!("snapshots/{}_{step:06}.bin", kind.prefix());
        fs::write(self.root.join(&rel), encode_snapshot(kind, values))?;
        self.lines.push(format!("{rel} {} {step} {t:.12e} {shape}", kind.name()));
        Ok(())
    }

    pub fn pressure(&mut self, disc: &Discretization, step: usize, t: f64, p: &PressureField) -> io::Result<()> {
        let modal = disc.to_modal(p);
        self.write(SnapshotKind::Pressure, step, t, &format!("{}x{}", disc.modes(), disc.n3()), &modal.values)
    }

    pub fn plate(&mut self, kind: SnapshotKind, step: usize, t: f64, w: &PlateField) -> io::Result<()> {
        self.write(kind, step, t, &w.len().to_string(), &w.coeffs)
    }

    /// Writes `manifest.txt` listing every snapshot plus `metadata` lines.
    pub fn finish(self, disc: &Discretization, metadata: &[String]) -> io::Result<Vec<String>> {
        let mut text = String::new();
        let _ = writeln!(text, "# poroplate snapshot manifest");
        let _ = writeln!(
            text,
            "# header: 8-byte magic PORPLATE, u32 LE version {SNAPSHOT_VERSION}, u32 LE kind (1 pressure, 2 plate_displacement, 3 plate_velocity)"
        );
        let _ = writeln!(text, "# body: f64 LE modal coefficients; pressure is mode-major, x3-minor");
        let _ = writeln!(
            text,
            "# grid M={} N={} N3={} h={}; mode index k = (a-1)*N + (b-1)",
            disc.basis.m(),
            disc.basis.n(),
            disc.n3(),
            disc.grid.half_thickness()
        );
        for m in metadata {
            let _ = writeln!(text, "# {m}");
        }
        let _ = writeln!(text, "# file kind step t shape");
        for l in &self.lines {
            let _ = writeln!(text, "{l}");
        }
        fs::write(self.root.join("manifest.txt"), text)?;
        Ok(self.lines)
    }
}

/// CSV text from a header and rows of preformatted cells.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn uniform(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

/// Pressure on the midplane `x3 = 0` sampled on a uniform in-plane lattice.
/// Between nodes the transverse profile is interpolated linearly.
pub fn midplane_pressure_csv(disc: &Discretization, p: &PressureField, points: usize) -> String {
    let modal = disc.to_modal(p);
    let nodes = disc.grid.nodes();
    let j = nodes.partition_point(|&x| x < 0.0).clamp(1, nodes.len() - 1);
    let theta = (0.0 - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
    let coeffs: Vec<f64> = modal.columns().map(|c| (1.0 - theta) * c[j - 1] + theta * c[j]).collect();
    let xs = uniform(points);
    let mut rows = Vec::with_capacity(points * points);
    for &x1 in &xs {
        for &x2 in &xs {
            rows.push(vec![num(x1), num(x2), num(disc.basis.evaluate(&coeffs, x1, x2))]);
        }
    }
    csv(&["x1", "x2", "p"], &rows)
}

/// Plate displacement along the centerline `x2 = 1/2`, one column per
/// labelled state.
pub fn centerline_plate_csv(disc: &Discretization, states: &[(f64, &PlateField)], points: usize) -> String {
    let labels: Vec<String> = std::iter::once("x1".to_string())
        .chain(states.iter().map(|(t, _)| format!("w_t={t:.6e}")))
        .collect();
    let header: Vec<&str> = labels.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = uniform(points)
        .into_iter()
        .map(|x1| {
            std::iter::once(num(x1))
                .chain(states.iter().map(|(_, w)| num(disc.basis.evaluate(&w.coeffs, x1, 0.5))))
                .collect()
        })
        .collect();
    csv(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::PlateRole;

    #[test]
    fn snapshot_round_trip() {
        let values = vec![1.0, -2.5, f64::MIN_POSITIVE, 3e300];
        let bytes = encode_snapshot(SnapshotKind::Pressure, &values);
        assert_eq!(bytes.len(), SNAPSHOT_HEADER_BYTES + 32);
        assert_eq!(&bytes[..8], b"PORPLATE");
        assert_eq!(decode_snapshot(&bytes), Some((SnapshotKind::Pressure, values)));
        assert_eq!(decode_snapshot(&bytes[..20]), None);
    }

    #[test]
    fn midplane_of_separable_field() {
        let disc = Discretization::new(2, 2, 9, 0.5).unwrap();
        let mut coeffs = vec![0.0; 4];
        coeffs[0] = 1.0;
        let p = disc.separable_pressure(&coeffs, |x3| 2.0 + x3);
        let text = midplane_pressure_csv(&disc, &p, 3);
        let center: Vec<&str> = text.lines().nth(5).unwrap().split(',').collect();
        // Mode (1,1) at (1/2, 1/2) is 2, times the profile value 2 at x3 = 0.
        assert!((center[2].parse::<f64>().unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn centerline_columns() {
        let disc = Discretization::new(2, 2, 5, 0.5).unwrap();
        let w = PlateField::from_coeffs(vec![1.0, 0.0, 0.0, 0.0], PlateRole::Displacement);
        let text = centerline_plate_csv(&disc, &[(0.0, &w), (1.0, &w)], 5);
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("x1,w_t=0.000000e0,w_t=1.000000e0\n"));
    }
}
