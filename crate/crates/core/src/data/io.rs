//! On-disk dataset formats.
//!
//! Directory format: `meta.json` plus raw little-endian float64 files
//! `states.f64`, optional `controls.f64` and `derivs.f64`. The last entry of
//! `axes` is the time axis; arrays are stored in flattening order with the
//! variable index fastest.
//!
//! CSV format: header `t,[x,...],q1..qn[,u1..ur]`, one row per sample.

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::{Axis, Dataset, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    #[serde(default = "schema_v1")]
    schema: u32,
    n_states: usize,
    #[serde(default)]
    n_controls: usize,
    axes: Vec<AxisMeta>,
    dtype: String,
    order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    periodic: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_missing: bool,
}

fn schema_v1() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AxisMeta {
    name: String,
    #[serde(flatten)]
    values: AxisValues,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum AxisValues {
    Explicit { values: Vec<f64> },
    Range { start: f64, step: f64, count: usize },
}

/// Load a dataset from a directory or a `.csv` file.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        load_dir(path)
    } else {
        load_csv(path)
    }
}

pub fn load_dir(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
    if meta.dtype != "f64" {
        return Err(Error::Format(format!("unsupported dtype `{}`", meta.dtype)));
    }
    if meta.order != "time-major" {
        return Err(Error::Format(format!("unsupported order `{}`", meta.order)));
    }
    if meta.axes.is_empty() {
        return Err(Error::Format("meta.json declares no axes".into()));
    }
    if let Some(p) = &meta.periodic {
        if p.len() != meta.axes.len() {
            return Err(Error::Format("`periodic` length differs from `axes`".into()));
        }
    }
    let mut axes = Vec::with_capacity(meta.axes.len());
    for (i, a) in meta.axes.iter().enumerate() {
        let axis = match &a.values {
            AxisValues::Explicit { values } => Axis::new(a.name.clone(), values.clone())?,
            AxisValues::Range { start, step, count } => {
                Axis::linspace(a.name.clone(), *start, *step, *count)?
            }
        };
        let periodic = meta.periodic.as_ref().is_some_and(|p| p[i]);
        axes.push(axis.with_periodic(periodic));
    }
    let time = axes.pop().expect("nonempty");
    let grid = Grid::new(axes, time)?;
    let shape = grid.shape();

    let states = read_array(&dir.join("states.f64"), &shape, meta.n_states)?;
    let mut ds = if meta.allow_missing {
        Dataset::new_allow_missing(grid, states)?
    } else {
        Dataset::new(grid, states)?
    };
    if meta.n_controls > 0 {
        let c = read_array(&dir.join("controls.f64"), &shape, meta.n_controls)?;
        ds = ds.with_controls(c)?;
    }
    let dpath = dir.join("derivs.f64");
    if dpath.exists() {
        ds = ds.with_derivatives(read_array(&dpath, &shape, meta.n_states)?)?;
    }
    Ok(ds)
}

fn read_array(path: &Path, sample_shape: &[usize], k: usize) -> Result<ArrayD<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = sample_shape.iter().product::<usize>() * k * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{} has {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut shape = sample_shape.to_vec();
    shape.push(k);
    ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| Error::Shape(e.to_string()))
}

fn write_array(path: &Path, arr: &ArrayD<f64>) -> Result<()> {
    let std = arr.as_standard_layout();
    let mut bytes = Vec::with_capacity(arr.len() * 8);
    for v in std.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write `dataset` into `dir` (created if missing).
pub fn save_dir(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let grid = dataset.grid();
    let all_axes: Vec<&Axis> = grid.spatial().iter().chain([grid.time()]).collect();
    let meta = Meta {
        schema: 1,
        n_states: dataset.n_states(),
        n_controls: dataset.n_controls(),
        axes: all_axes
            .iter()
            .map(|a| AxisMeta {
                name: a.name().to_string(),
                values: AxisValues::Explicit {
                    values: a.values().to_vec(),
                },
            })
            .collect(),
        dtype: "f64".into(),
        order: "time-major".into(),
        periodic: all_axes
            .iter()
            .any(|a| a.is_periodic())
            .then(|| all_axes.iter().map(|a| a.is_periodic()).collect()),
        allow_missing: dataset.allows_missing(),
    };
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    write_array(&dir.join("states.f64"), dataset.states())?;
    if let Some(c) = dataset.controls() {
        write_array(&dir.join("controls.f64"), c)?;
    }
    if let Some(d) = dataset.derivatives() {
        write_array(&dir.join("derivs.f64"), d)?;
    }
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let grid = dataset.grid();
    let flat = dataset.flatten();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let mut header = vec!["t".to_string()];
    header.extend(grid.spatial().iter().map(|a| a.name().to_string()));
    header.extend((1..=dataset.n_states()).map(|i| format!("q{i}")));
    header.extend((1..=dataset.n_controls()).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    let n_sp = grid.spatial().len();
    for row in 0..flat.states.nrows() {
        let idx = flat.index.multi_index(row);
        let mut rec = vec![grid.time().values()[idx[n_sp]].to_string()];
        rec.extend((0..n_sp).map(|d| grid.spatial()[d].values()[idx[d]].to_string()));
        rec.extend(flat.states.row(row).iter().map(f64::to_string));
        if let Some(c) = &flat.controls {
            rec.extend(c.row(row).iter().map(f64::to_string));
        }
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

enum Column {
    Coord(String),
    State(usize),
    Control(usize),
}

fn classify(name: &str) -> Column {
    let indexed = |prefix: char| {
        name.strip_prefix(prefix)
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&i| i >= 1)
    };
    if let Some(i) = indexed('q') {
        Column::State(i - 1)
    } else if let Some(i) = indexed('u') {
        Column::Control(i - 1)
    } else {
        Column::Coord(name.to_string())
    }
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let cols: Vec<Column> = header.iter().map(|h| classify(h)).collect();
    let coord_names: Vec<String> = cols
        .iter()
        .filter_map(|c| match c {
            Column::Coord(n) => Some(n.clone()),
            _ => None,
        })
        .collect();
    if coord_names.first().map(String::as_str) != Some("t") {
        return Err(Error::Format("CSV header must start with `t`".into()));
    }
    let n = cols.iter().filter(|c| matches!(c, Column::State(_))).count();
    let r_ctrl = cols.iter().filter(|c| matches!(c, Column::Control(_))).count();
    for (k, want) in [(n, "q"), (r_ctrl, "u")] {
        let mut seen = vec![false; k];
        for c in &cols {
            let i = match (c, want) {
                (Column::State(i), "q") | (Column::Control(i), "u") => *i,
                _ => continue,
            };
            if i >= k || seen[i] {
                return Err(Error::Format(format!("bad or duplicate `{want}` column numbering")));
            }
            seen[i] = true;
        }
    }
    if n == 0 {
        return Err(Error::Format("CSV has no state columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::Format("ragged CSV row".into()));
        }
        let vals = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("`{s}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Format("CSV has no data rows".into()));
    }

    // Axis values: sorted unique coordinates per coordinate column.
    let coord_cols: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, Column::Coord(_)))
        .map(|(i, _)| i)
        .collect();
    let mut axis_values: Vec<Vec<f64>> = Vec::new();
    for &ci in &coord_cols {
        let mut v: Vec<f64> = rows.iter().map(|r| r[ci]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        axis_values.push(v);
    }
    // Array order is (spatial..., t); CSV lists t first.
    let mut order: Vec<usize> = (1..coord_cols.len()).collect();
    order.push(0);
    let shape: Vec<usize> = order.iter().map(|&k| axis_values[k].len()).collect();
    let total: usize = shape.iter().product();
    if total != rows.len() {
        return Err(Error::Format(format!(
            "CSV rows ({}) do not form a complete grid ({total} points)",
            rows.len()
        )));
    }

    let mut states = vec![f64::NAN; total * n];
    let mut controls = vec![f64::NAN; total * r_ctrl];
    let mut filled = vec![false; total];
    for (ri, row) in rows.iter().enumerate() {
        let mut lin = 0;
        for (d, &k) in order.iter().enumerate() {
            let vals = &axis_values[k];
            let pos = vals
                .binary_search_by(|v| v.total_cmp(&row[coord_cols[k]]))
                .expect("value present");
            lin = lin * shape[d] + pos;
        }
        if filled[lin] {
            return Err(Error::Format(format!("duplicate grid point in CSV row {}", ri + 2)));
        }
        filled[lin] = true;
        for (ci, c) in cols.iter().enumerate() {
            match c {
                Column::State(i) => states[lin * n + i] = row[ci],
                Column::Control(i) => controls[lin * r_ctrl + i] = row[ci],
                Column::Coord(_) => {}
            }
        }
    }

    let mut axes = Vec::new();
    for &k in &order {
        axes.push(Axis::new(coord_names[k].clone(), axis_values[k].clone())?);
    }
    let time = axes.pop().expect("time axis");
    let grid = Grid::new(axes, time)?;
    let mut sshape = shape.clone();
    sshape.push(n);
    let st = ArrayD::from_shape_vec(IxDyn(&sshape), states).map_err(|e| Error::Shape(e.to_string()))?;
    let mut ds = Dataset::new(grid, st)?;
    if r_ctrl > 0 {
        let mut cshape = shape;
        cshape.push(r_ctrl);
        let ct = ArrayD::from_shape_vec(IxDyn(&cshape), controls)
            .map_err(|e| Error::Shape(e.to_string()))?;
        ds = ds.with_controls(ct)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn sample() -> Dataset {
        let grid = Grid::new(
            vec![Axis::linspace("x", 0.0, 0.25, 3).unwrap().with_periodic(true)],
            Axis::linspace("t", 0.0, 0.1, 4).unwrap(),
        )
        .unwrap();
        let s = Array::from_shape_fn(IxDyn(&[3, 4, 2]), |ix| (ix[0] * 100 + ix[1] * 10 + ix[2]) as f64 * 0.37);
        let c = Array::from_shape_fn(IxDyn(&[3, 4, 1]), |ix| ix[1] as f64 - 0.5);
        Dataset::new(grid, s.clone())
            .unwrap()
            .with_controls(c)
            .unwrap()
            .with_derivatives(s.mapv(|v| 2.0 * v))
            .unwrap()
    }

    #[test]
    fn dir_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let d = sample();
        save_dir(&d, tmp.path()).unwrap();
        let back = load_dir(tmp.path()).unwrap();
        assert_eq!(back, d);
        assert!(back.grid().spatial()[0].is_periodic());
    }

    #[test]
    fn csv_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.csv");
        let d = sample();
        save_csv(&d, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.states(), d.states());
        assert_eq!(back.controls(), d.controls());
        assert_eq!(back.grid().time().values(), d.grid().time().values());
    }

    #[test]
    fn range_axis_and_size_check() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(
            tmp.path().join("meta.json"),
            r#"{"n_states":1,"n_controls":0,"axes":[{"name":"t","start":0.0,"step":0.5,"count":3}],"dtype":"f64","order":"time-major"}"#,
        )
        .unwrap();
        let bytes: Vec<u8> = [1.0f64, 2.0, 3.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(tmp.path().join("states.f64"), &bytes).unwrap();
        let d = load_dir(tmp.path()).unwrap();
        assert_eq!(d.grid().time().values(), &[0.0, 0.5, 1.0]);
        fs::write(tmp.path().join("states.f64"), &bytes[..16]).unwrap();
        assert!(matches!(load_dir(tmp.path()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_incomplete_grid_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.csv");
        fs::write(&path, "t,x,q1\n0,0,1\n0,1,2\n1,0,3\n").unwrap();
        assert!(load_csv(&path).is_err());
        fs::write(&path, "t,q1\n").unwrap();
        assert!(load_csv(&path).is_err());
    }
}
