//! Dataset directories: `meta` (key-value text), `t.csv`, `c.csv`, `ct.csv`.

use std::fmt::Write as _;
use std::path::Path;

use super::kv::KeyValues;
use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::fvm::{Grid1D, SoilParams};

const FORMAT_TAG: &str = "finn-dataset-1";

pub(crate) fn meta_to_kv(meta: &DatasetMeta, kv: &mut KeyValues) {
    kv.set("grid.n_volumes", meta.grid.n_volumes);
    kv.set("grid.dx", meta.grid.dx);
    kv.set("grid.length", meta.grid.length);
    kv.set("bc.left", meta.bc_left);
    kv.set("bc.right", meta.bc_right);
    if let Some(s) = &meta.soil {
        soil_to_kv(s, kv);
    }
}

pub(crate) fn soil_to_kv(s: &SoilParams, kv: &mut KeyValues) {
    kv.set("soil.d_e", s.d_e);
    kv.set("soil.porosity", s.porosity);
    kv.set("soil.rho_s", s.rho_s);
    kv.set("soil.k_f", s.k_f);
    kv.set("soil.n_f", s.n_f);
}

pub(crate) fn soil_from_kv(kv: &KeyValues) -> Result<SoilParams> {
    Ok(SoilParams {
        d_e: kv.parse_value("soil.d_e")?,
        porosity: kv.parse_value("soil.porosity")?,
        rho_s: kv.parse_value("soil.rho_s")?,
        k_f: kv.parse_value("soil.k_f")?,
        n_f: kv.parse_value("soil.n_f")?,
    })
}

pub(crate) fn grid_from_kv(kv: &KeyValues) -> Result<Grid1D> {
    Grid1D::new(
        kv.parse_value("grid.n_volumes")?,
        kv.parse_value("grid.dx")?,
        kv.parse_value("grid.length")?,
    )
}

fn meta_from_kv(kv: &KeyValues) -> Result<DatasetMeta> {
    let soil = if kv.get("soil.d_e").is_some() {
        Some(soil_from_kv(kv)?)
    } else {
        None
    };
    Ok(DatasetMeta {
        grid: grid_from_kv(kv)?,
        soil,
        bc_left: kv.parse_value("bc.left")?,
        bc_right: kv.parse_value("bc.right")?,
        provenance: kv.get("provenance").unwrap_or("").to_string(),
    })
}

fn csv_rows(rows: impl Iterator<Item = impl AsRef<[f64]>>) -> String {
    let mut out = String::new();
    for row in rows {
        for (j, v) in row.as_ref().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // 17 significant digits round-trip every f64
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Writes `data` into directory `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    data.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut kv = KeyValues::new();
    kv.set("format", FORMAT_TAG);
    kv.set("provenance", data.meta.provenance.replace(['\n', '#'], " "));
    kv.set("n_times", data.n_times());
    meta_to_kv(&data.meta, &mut kv);
    kv.write(&dir.join("meta"))?;
    let files = [
        ("t.csv", csv_rows(data.t.iter().map(std::slice::from_ref))),
        ("c.csv", csv_rows(data.c.iter())),
        ("ct.csv", csv_rows(data.ct.iter())),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Parses a numeric CSV with exactly `width` columns per row.
pub fn parse_csv(text: &str, width: usize, source: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width);
        let mut column = 1;
        for cell in line.split(',') {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                column,
                message: format!("`{}` is not a number", cell.trim()),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: i + 1,
                    column,
                    message: format!("non-finite value `{}`", cell.trim()),
                });
            }
            row.push(value);
            column += cell.chars().count() + 1;
        }
        if row.len() != width {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                column,
                message: format!("expected {width} values, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_csv(dir: &Path, name: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let path = dir.join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_csv(&text, width, &path.display().to_string())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let kv = KeyValues::read(&dir.join("meta"))?;
    match kv.get("format") {
        Some(FORMAT_TAG) => {}
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported dataset format {other:?}",
                dir.display()
            )))
        }
    }
    let meta = meta_from_kv(&kv)?;
    let n = meta.grid.n_volumes;
    let t: Vec<f64> = read_csv(dir, "t.csv", 1)?.into_iter().map(|r| r[0]).collect();
    let c = read_csv(dir, "c.csv", n)?;
    let ct = read_csv(dir, "ct.csv", n)?;
    let declared: usize = kv.parse_value("n_times")?;
    if declared != t.len() {
        return Err(Error::Format(format!(
            "{}: meta declares {declared} times, t.csv has {}",
            dir.display(),
            t.len()
        )));
    }
    Dataset::new(t, c, ct, meta)
}
