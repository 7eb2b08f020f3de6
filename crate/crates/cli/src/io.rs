//! File readers and writers. Lengths are mm and angles degrees in every file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pointnav_core::metrics::Mask;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::OutputFormat;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `dir/stem.{csv,jsonl}` and returns the path.
pub fn write_table<T: Serialize>(dir: &Path, stem: &str, rows: &[T], format: OutputFormat) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        OutputFormat::Csv => write_csv(&path, rows)?,
        OutputFormat::Jsonl => write_jsonl(&path, rows)?,
    }
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(|e| {
            let line = e.position().map_or_else(String::new, |p| format!(":{}", p.line()));
            anyhow!("{}{line}: {e}", path.display())
        })?);
    }
    Ok(rows)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(rows)
}

/// Reads `dir/stem.{csv,jsonl}` written by [`write_table`].
pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => read_jsonl(path),
        _ => read_csv(path),
    }
}

/// Loads a portable bitmap; black (1) pixels are set.
pub fn read_pbm(path: &Path) -> Result<Mask> {
    let bytes = std::fs::read(path).with_context(|| format!("opening {}", path.display()))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
        .with_context(|| format!("{}: not a valid PBM file", path.display()))?;
    if !matches!(img.color(), image::ColorType::L8 | image::ColorType::L16) {
        return Err(anyhow!("{}: expected a bitmap, found {:?}", path.display(), img.color()));
    }
    let luma = img.to_luma8();
    let bits = luma.as_raw().iter().map(|&v| v == 0).collect();
    Ok(Mask::new(luma.width() as usize, luma.height() as usize, bits)?)
}

/// Plain (P1) rendering of a mask.
pub fn write_pbm(path: &Path, mask: &Mask) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "P1\n{} {}", mask.width(), mask.height())?;
    for y in 0..mask.height() {
        let row: Vec<&str> = (0..mask.width()).map(|x| if mask.get(x, y) { "1" } else { "0" }).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mask::from_rows(&[[true, false, true], [false, false, true]]).unwrap();
        let p = dir.path().join("m.pbm");
        write_pbm(&p, &m).unwrap();
        assert_eq!(read_pbm(&p).unwrap(), m);
    }

    #[test]
    fn pbm_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pbm");
        std::fs::write(&p, "P1\n# hand made\n4 2\n0 1 1 0\n0 1 1 0\n").unwrap();
        let m = read_pbm(&p).unwrap();
        assert_eq!((m.width(), m.height(), m.count()), (4, 2, 4));
        assert!(m.get(1, 0) && !m.get(0, 1));
    }

    #[test]
    fn bad_pbm_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pbm");
        std::fs::write(&p, "P1\n2 2\n0 1\n").unwrap();
        assert!(read_pbm(&p).is_err());
        assert!(read_pbm(&dir.path().join("missing.pbm")).is_err());
    }

    #[test]
    fn csv_errors_carry_line() {
        #[derive(Debug, serde::Deserialize)]
        #[allow(dead_code)]
        struct Row {
            a: f64,
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a\n1.0\noops\n").unwrap();
        let err = read_csv::<Row>(&p).unwrap_err().to_string();
        assert!(err.contains("x.csv:3"), "{err}");
    }
}
