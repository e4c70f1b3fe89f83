//! Coefficient dumps: CSV rows `s,re,im,abs,band,bound,margin` plus a JSON sidecar
//! carrying the window, tail descriptor and provenance.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use exactdim::{Complex64, Mode, SpectralVector, TailDescriptor};

pub const SCHEMA_VERSION: u32 = exactdim::analysis::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema_version: u32,
    pub label: String,
    pub mode: Mode,
    pub window: i64,
    pub tail_amplitude: f64,
    pub tail_scale: f64,
    /// `None` when the tail descriptor is never used.
    pub tail_from: Option<f64>,
    pub error_bound: f64,
    pub hermitian: bool,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".meta.json");
    p.into()
}

pub fn write_csv(
    path: &Path,
    v: &SpectralVector,
    mode: Mode,
    band_of: impl Fn(i64) -> (String, Option<f64>),
) -> anyhow::Result<()> {
    let mut out = String::from("s,re,im,abs,band,bound,margin\n");
    for (s, c) in v.iter() {
        let (band, bound) = band_of(s);
        let (b, m) = match bound {
            Some(b) => (format!("{b:e}"), format!("{:e}", b - c.norm())),
            None => (String::new(), String::new()),
        };
        writeln!(out, "{s},{:e},{:e},{:e},{band},{b},{m}", c.re, c.im, c.norm())?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        label: v.label.clone(),
        mode,
        window: v.window,
        tail_amplitude: v.tail.amplitude,
        tail_scale: v.tail.scale,
        tail_from: v.tail_from.is_finite().then_some(v.tail_from),
        error_bound: v.error_bound,
        hermitian: v.hermitian,
    };
    let mp = meta_path(path);
    std::fs::write(&mp, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", mp.display()))?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
#[error("{path}:{line}: {message}")]
pub struct CsvError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

pub fn read_csv(path: &Path) -> anyhow::Result<SpectralVector> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mp = meta_path(path);
    let meta: Meta = match std::fs::read_to_string(&mp) {
        Ok(t) => serde_json::from_str(&t).map_err(|e| CsvError {
            path: mp.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?,
        Err(e) => return Err(e).with_context(|| format!("reading {}", mp.display())),
    };
    let err = |line: usize, message: String| CsvError {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("s,re,im,abs,band") => {}
        _ => return Err(err(1, "missing header s,re,im,abs,band".into()).into()),
    }
    let mut values = BTreeMap::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 5 {
            return Err(err(i + 1, format!("expected at least 5 fields, got {}", f.len())).into());
        }
        let s: i64 = f[0].parse().map_err(|_| err(i + 1, format!("bad s {:?}", f[0])))?;
        let re: f64 = f[1].parse().map_err(|_| err(i + 1, format!("bad re {:?}", f[1])))?;
        let im: f64 = f[2].parse().map_err(|_| err(i + 1, format!("bad im {:?}", f[2])))?;
        values.insert(s, Complex64::new(re, im));
    }
    let w = meta.window;
    let mut dense = Vec::with_capacity((2 * w + 1) as usize);
    for s in -w..=w {
        match values.remove(&s) {
            Some(c) => dense.push(c),
            None if meta.hermitian => match values.get(&-s) {
                Some(c) => dense.push(c.conj()),
                None => bail!(err(0, format!("window coefficient s = {s} missing"))),
            },
            None => bail!(err(0, format!("window coefficient s = {s} missing"))),
        }
    }
    let tail = TailDescriptor {
        amplitude: meta.tail_amplitude,
        scale: meta.tail_scale,
    };
    let mut v = SpectralVector::new(w, dense, tail, meta.tail_from.unwrap_or(f64::INFINITY), meta.label)?.with_samples(values);
    v.error_bound = meta.error_bound;
    v.hermitian = meta.hermitian && v.hermitian;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector() -> SpectralVector {
        let v = SpectralVector::from_fn(
            50,
            |s| Complex64::new((-(s.abs() as f64).sqrt()).exp(), 0.1 * s as f64 / 7.0),
            TailDescriptor {
                amplitude: 1.0,
                scale: 3.0,
            },
            f64::INFINITY,
            "round trip",
        )
        .unwrap();
        let far = (1..5).map(|k| (1000 * k, Complex64::new(1e-300 / k as f64, 0.0))).collect();
        v.with_samples(far)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let v = vector();
        write_csv(&path, &v, Mode::Desk, |s| (format!("b{}", s.signum()), (s > 0).then_some(2.0))).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, v);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("s,re,im,abs,band,bound,margin\n"));
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        write_csv(&path, &vector(), Mode::Desk, |_| (String::new(), None)).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("7,oops,0,0,x\n");
        std::fs::write(&path, text).unwrap();
        let e = read_csv(&path).unwrap_err();
        let csv = e.downcast_ref::<CsvError>().unwrap();
        assert_eq!(csv.line, 107);
        assert!(csv.message.contains("oops"));
    }
}
