//! Snapshots and CSV/JSON persistence. Floats are written in their shortest
//! round-trip form so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolver::InvariantTrace;
use crate::functionals::{AuditSample, JFamily};
use crate::grid::{Grid, GridField};
use crate::modulation::TrackRecord;

const MAGIC: &[u8; 6] = b"GDNLS1";

/// Binary snapshot: magic, `N` (u64), `l_dom`, `t`, `σ`, then `N`
/// interleaved `(re, im)` pairs, all little endian.
pub fn write_snapshot(path: &Path, f: &GridField, sigma: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(f.grid().n as u64).to_le_bytes())?;
    for v in [f.grid().l_dom, f.t, sigma] {
        w.write_all(&v.to_le_bytes())?;
    }
    for z in &f.samples {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_snapshot`]; returns the field and `σ`.
pub fn read_snapshot(path: &Path) -> Result<(GridField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: not a snapshot", path.display())));
    }
    let mut b8 = [0u8; 8];
    let mut f64_next = |r: &mut BufReader<File>| -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let mut nb = [0u8; 8];
    r.read_exact(&mut nb)?;
    let n = u64::from_le_bytes(nb) as usize;
    let l_dom = f64_next(&mut r)?;
    let t = f64_next(&mut r)?;
    let sigma = f64_next(&mut r)?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let re = f64_next(&mut r)?;
        let im = f64_next(&mut r)?;
        samples.push(Complex64::new(re, im));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!(
            "{}: {} trailing bytes",
            path.display(),
            rest.len()
        )));
    }
    Ok((GridField::new(Grid::new(n, l_dom)?, t, samples)?, sigma))
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn write_trace_csv(path: &Path, trace: &InvariantTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "mass", "momentum", "energy", "h1_norm", "max_gradient"])?;
    for i in 0..trace.len() {
        w.write_record([
            num(trace.times[i]),
            num(trace.mass[i]),
            num(trace.momentum[i]),
            num(trace.energy[i]),
            num(trace.h1_norm[i]),
            num(trace.max_gradient[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Modulation parameters, one row per checkpoint.
pub fn write_params_csv(path: &Path, k: usize, records: &[TrackRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for name in ["omega", "c", "x", "gamma"] {
        for j in 1..=k {
            header.push(format!("{name}{j}"));
        }
    }
    header.extend(
        ["h1_eps", "max_orth", "rate_omega", "rate_c", "rate_x", "rate_gamma"].map(String::from),
    );
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![num(r.t)];
        row.extend(r.q.iter().map(|&v| num(v)));
        row.push(num(r.h1_eps));
        row.push(num(r.max_orth));
        row.extend(r.rates.iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a file written by [`write_params_csv`].
pub fn read_params_csv(path: &Path) -> Result<(usize, Vec<TrackRecord>)> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 7 || (width - 7) % 4 != 0 {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    let k = (width - 7) / 4;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let v: Vec<f64> = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}"))))
            .collect::<Result<_>>()?;
        out.push(TrackRecord {
            t: v[0],
            q: v[1..1 + 4 * k].to_vec(),
            h1_eps: v[1 + 4 * k],
            max_orth: v[2 + 4 * k],
            rates: [v[3 + 4 * k], v[4 + 4 * k], v[5 + 4 * k], v[6 + 4 * k]],
        });
    }
    Ok((k, out))
}

pub fn write_functionals_csv(path: &Path, samples: &[AuditSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "j_sum", "j", "j_p0", "j_m0", "j_0p", "j_0m", "h1_eps"])?;
    for s in samples {
        let f = &s.family;
        w.write_record(
            [s.t, f.j_sum, f.j, f.j_p0, f.j_m0, f.j_0p, f.j_0m, s.h1_eps].map(num),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a file written by [`write_functionals_csv`].
pub fn read_functionals_csv(path: &Path) -> Result<Vec<AuditSample>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.len() != 8 {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let v: Vec<f64> = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}"))))
            .collect::<Result<_>>()?;
        out.push(AuditSample {
            t: v[0],
            family: JFamily {
                j_sum: v[1],
                j: v[2],
                j_p0: v[3],
                j_m0: v[4],
                j_0p: v[5],
                j_0m: v[6],
            },
            h1_eps: v[7],
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(64, 12.5).unwrap();
        let f = GridField::from_fn(grid, 0.75, |x| Complex64::new(x.sin(), -x * 1e-300));
        let p = dir.path().join("u.bin");
        write_snapshot(&p, &f, 1.3).unwrap();
        let (g, sigma) = read_snapshot(&p).unwrap();
        assert_eq!(sigma, 1.3);
        assert_eq!(g, f);
    }

    #[test]
    fn truncated_snapshot_fails() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.bin");
        let grid = Grid::new(16, 4.0).unwrap();
        write_snapshot(&p, &GridField::zeros(grid), 1.0).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_snapshot(&p).is_err());
    }

    #[test]
    fn params_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("params.csv");
        let recs = vec![TrackRecord {
            t: 0.1,
            q: (0..8).map(|i| i as f64 / 3.0).collect(),
            h1_eps: 1e-7,
            max_orth: 2e-13,
            rates: [0.1, 0.2, 0.3, 0.4],
        }];
        write_params_csv(&p, 2, &recs).unwrap();
        let (k, back) = read_params_csv(&p).unwrap();
        assert_eq!(k, 2);
        assert_eq!(back, recs);
    }
}
