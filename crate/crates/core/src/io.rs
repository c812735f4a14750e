//! File formats: CSV for paths, value tables, densities and Laplace sweeps,
//! and the `VFLD` binary block for value tables.
//!
//! Floats are written with 17 significant digits so that every file
//! round-trips bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldLabel, StateGrid, ValueField};
use crate::paths::{ObservationPath, TimeGrid, Trajectory};
use crate::zakai::FilterDensity;

pub const VFLD_MAGIC: &[u8; 4] = b"VFLD";
pub const VFLD_VERSION: u8 = 1;

/// Full-precision decimal rendering used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(f))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// `t,x1..xn,w1..wr`; the last row repeats the final disturbance sample.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    let r = traj.disturbance.dim;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(numbered("x", traj.dim))
        .chain(numbered("w", r))
        .collect();
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let wk = traj.disturbance.sample(k.min(traj.grid.steps - 1));
        let rec: Vec<String> = std::iter::once(traj.grid.t(k))
            .chain(traj.state(k).iter().copied())
            .chain(wk.iter().copied())
            .map(fmt_f64)
            .collect();
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t,ydot1..ydotm`.
pub fn write_observation_csv(path: &Path, obs: &ObservationPath) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain(numbered("ydot", obs.dim)).collect();
    w.write_record(&header)?;
    for (k, y) in obs.samples().enumerate() {
        let rec: Vec<String> = std::iter::once(obs.grid.t(k)).chain(y.iter().copied()).map(fmt_f64).collect();
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_observation_csv`]; the time column must
/// be uniform.
pub fn read_observation_csv(path: &Path) -> Result<ObservationPath> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let m = headers.len().saturating_sub(1);
    if m == 0 || &headers[0] != "t" || headers.iter().skip(1).any(|h| !h.starts_with("ydot")) {
        return Err(Error::Format {
            what: "observation CSV",
            reason: "expected header t,ydot1..ydotm".into(),
        });
    }
    let mut ts = Vec::new();
    let mut ydot = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = parse_record(&rec, m + 1, "observation CSV")?;
        ts.push(vals[0]);
        ydot.extend_from_slice(&vals[1..]);
    }
    if ts.len() < 2 {
        return Err(Error::Format {
            what: "observation CSV",
            reason: "need at least two rows".into(),
        });
    }
    let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
    let grid = TimeGrid::new(ts[0], dt, ts.len() - 1)?;
    if ts.iter().enumerate().any(|(k, &t)| (t - grid.t(k)).abs() > 1e-9 * (1.0 + t.abs())) {
        return Err(Error::Format {
            what: "observation CSV",
            reason: "time column is not uniform".into(),
        });
    }
    ObservationPath::new(grid, m, ydot)
}

fn parse_record(rec: &csv::StringRecord, width: usize, what: &'static str) -> Result<Vec<f64>> {
    if rec.len() != width {
        return Err(Error::Format {
            what,
            reason: format!("expected {width} columns, found {}", rec.len()),
        });
    }
    rec.iter()
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::Format {
                what,
                reason: format!("not a number: {s:?}"),
            })
        })
        .collect()
}

/// `t,x1..xn,V` for every active node; unreachable nodes keep the sentinel.
/// `stride` keeps every `stride`-th row plus the last.
pub fn write_value_csv(path: &Path, field: &ValueField, stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    let n = field.grid.dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(numbered("x", n))
        .chain(std::iter::once("V".to_string()))
        .collect();
    w.write_record(&header)?;
    for k in kept_rows(field.rows(), stride) {
        let t = field.times.t(k);
        for i in 0..field.grid.len() {
            if !field.grid.active(i) {
                continue;
            }
            let rec: Vec<String> = std::iter::once(t)
                .chain(field.grid.node(i))
                .chain(std::iter::once(field.value(k, i)))
                .map(fmt_f64)
                .collect();
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn kept_rows(rows: usize, stride: usize) -> impl Iterator<Item = usize> {
    let stride = stride.max(1);
    (0..rows).filter(move |k| k % stride == 0 || k + 1 == rows)
}

#[derive(Serialize, Deserialize)]
struct VfldHeader {
    grid: StateGrid,
    times: TimeGrid,
    label: FieldLabel,
}

/// `VFLD`, version byte, little-endian `u32` header length, JSON header
/// (grid, times, label), then `rows * nodes` little-endian doubles in
/// row-major `[k][i]` order.
pub fn write_vfld(path: &Path, field: &ValueField) -> Result<()> {
    let mut f = create(path)?;
    let header = serde_json::to_vec(&VfldHeader {
        grid: field.grid.clone(),
        times: field.times,
        label: field.label,
    })?;
    let mut buf = Vec::with_capacity(9 + header.len() + 8 * field.values().len());
    buf.extend_from_slice(VFLD_MAGIC);
    buf.push(VFLD_VERSION);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn read_vfld(path: &Path) -> Result<ValueField> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_vfld(&bytes)
}

pub fn decode_vfld(bytes: &[u8]) -> Result<ValueField> {
    let bad = |reason: &str| Error::Format {
        what: "VFLD block",
        reason: reason.into(),
    };
    if bytes.len() < 9 || &bytes[..4] != VFLD_MAGIC {
        return Err(bad("missing magic"));
    }
    if bytes[4] != VFLD_VERSION {
        return Err(bad(&format!("unsupported version {}", bytes[4])));
    }
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body = bytes.get(9..9 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: VfldHeader = serde_json::from_slice(body)?;
    let data = &bytes[9 + hlen..];
    if data.len() % 8 != 0 {
        return Err(bad("payload is not a whole number of doubles"));
    }
    let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ValueField::new(header.grid, header.times, header.label, values)
}

/// `t,x,qtilde`, every `stride`-th row plus the last.
pub fn write_density_csv(path: &Path, fd: &FilterDensity, stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "qtilde"])?;
    for k in kept_rows(fd.rows(), stride) {
        for i in 0..fd.cells() {
            w.write_record([fmt_f64(fd.times.t(k)), fmt_f64(fd.grid.coord(0, i)), fmt_f64(fd.value(k, i))])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a Laplace sweep report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub epsilon: f64,
    pub value: f64,
    pub target: f64,
    pub gap: f64,
}

/// `epsilon,value,target,gap`.
pub fn write_laplace_csv(path: &Path, rows: &[LaplaceRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "value", "target", "gap"])?;
    for r in rows {
        w.write_record([r.epsilon, r.value, r.target, r.gap].map(fmt_f64))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_laplace_csv(path: &Path) -> Result<Vec<LaplaceRow>> {
    let mut r = reader(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Generic numeric table: header plus rows of doubles.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_f64))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a numeric table written by [`write_table`] (or any CSV whose cells
/// are all numbers).
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(parse_record(&rec?, header.len(), "numeric CSV")?);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::dynamics::integrate_reflected;
    use crate::fields::{Drift, Observation, VectorFieldSpec};
    use crate::paths::DisturbancePath;

    #[test]
    fn vfld_round_trip_is_bit_exact() {
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[7]).unwrap().extended(0.05, 1.3);
        let times = TimeGrid::new(0.0, 0.1, 3).unwrap();
        let values: Vec<f64> = (0..4 * grid.len()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let f = ValueField::new(grid, times, FieldLabel::Penalized { kappa: 100.0 }, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.vfld");
        write_vfld(&p, &f).unwrap();
        assert_eq!(read_vfld(&p).unwrap(), f);
    }

    #[test]
    fn vfld_rejects_garbage() {
        assert!(decode_vfld(b"VFLX\x01\0\0\0\0").is_err());
        assert!(decode_vfld(b"VFLD\x02\0\0\0\0").is_err());
        assert!(decode_vfld(b"VFLD\x01\xff\0\0\0{}").is_err());
    }

    #[test]
    fn observation_csv_round_trip() {
        let g = TimeGrid::new(0.0, 0.01, 50).unwrap();
        let vf = VectorFieldSpec::scalar(Drift::Constant { value: vec![0.3] }, Observation::Identity { dim: 1 }).unwrap();
        let d = Domain::interval(0.0, 1.0).unwrap();
        let tr = integrate_reflected(&vf, &d, &[0.5], &DisturbancePath::gaussian(g, 1, 1.0, 1, 3, 0)).unwrap();
        let obs = crate::dynamics::synthesize_observation(&tr, &vf, &DisturbancePath::gaussian(g, 1, 0.5, 1, 3, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        write_observation_csv(&p, &obs).unwrap();
        let back = read_observation_csv(&p).unwrap();
        assert_eq!(back.samples().collect::<Vec<_>>(), obs.samples().collect::<Vec<_>>());
        let q = dir.path().join("traj.csv");
        write_trajectory_csv(&q, &tr).unwrap();
        let (h, rows) = read_table(&q).unwrap();
        assert_eq!(h, ["t", "x1", "w1"]);
        assert_eq!(rows.len(), 51);
        assert_eq!(rows[10][1], tr.state(10)[0]);
    }

    #[test]
    fn laplace_csv_round_trip() {
        let rows = vec![
            LaplaceRow { epsilon: 0.2, value: 0.7, target: 0.42, gap: 0.28 },
            LaplaceRow { epsilon: 0.1, value: 0.6, target: 0.42, gap: 0.18 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        write_laplace_csv(&p, &rows).unwrap();
        assert_eq!(read_laplace_csv(&p).unwrap(), rows);
    }
}
