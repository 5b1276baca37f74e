//! Point-set CSV files and JSON documents.
//!
//! A point-set file has a header row and one nucleus per line:
//! `id,x,y,z[,label]`, coordinates in µm. Column names can be remapped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ehgm::{PointSet, Vec3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Minimum distance between two nuclei of one file, µm.
pub const MIN_SEPARATION: f64 = 1e-6;

/// Header names of the point-set columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub x: String,
    pub y: String,
    pub z: String,
    pub label: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            x: "x".into(),
            y: "y".into(),
            z: "z".into(),
            label: "label".into(),
        }
    }
}

impl std::str::FromStr for ColumnMap {
    type Err = CliError;

    /// Parses overrides such as `id=cell,x=X`.
    fn from_str(s: &str) -> Result<Self> {
        let mut map = ColumnMap::default();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, name) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("column override {part:?} is not key=name")))?;
            let slot = match key.trim() {
                "id" => &mut map.id,
                "x" => &mut map.x,
                "y" => &mut map.y,
                "z" => &mut map.z,
                "label" => &mut map.label,
                other => return Err(CliError::Usage(format!("unknown column key {other:?}"))),
            };
            *slot = name.trim().to_string();
        }
        Ok(map)
    }
}

/// A point set with the ids and optional labels it was stored with.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub ids: Vec<String>,
    pub points: PointSet,
    /// Empty strings mark unlabeled nuclei. `None` when the file has no
    /// label column.
    pub labels: Option<Vec<String>>,
}

impl LabeledPoints {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of_id(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    /// Point index carrying each of `vertex_labels`, if every one is present
    /// exactly once.
    pub fn ground_truth(&self, vertex_labels: &[String]) -> Option<Vec<usize>> {
        let labels = self.labels.as_ref()?;
        vertex_labels
            .iter()
            .map(|v| {
                let mut hits = labels.iter().enumerate().filter(|(_, l)| *l == v);
                match (hits.next(), hits.next()) {
                    (Some((i, _)), None) => Some(i),
                    _ => None,
                }
            })
            .collect()
    }
}

/// Reads a point-set CSV from `reader`. `source` names it in errors.
pub fn read_pointset(reader: impl Read, columns: &ColumnMap, source: &str) -> Result<LabeledPoints> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: u64, column: usize, message: String| CliError::Parse {
        path: source.to_string(),
        line,
        column,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, 1, e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| find(name).ok_or_else(|| parse_err(1, 1, format!("missing column {name:?}")));
    let (id_col, x_col, y_col, z_col) = (
        required(&columns.id)?,
        required(&columns.x)?,
        required(&columns.y)?,
        required(&columns.z)?,
    );
    let label_col = find(&columns.label);

    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| {
            record
                .get(col)
                .ok_or_else(|| parse_err(line, col + 1, "missing field".into()))
        };
        let number = |col: usize| -> Result<f64> {
            let text = field(col)?;
            let v: f64 = text
                .parse()
                .map_err(|_| parse_err(line, col + 1, format!("{text:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, col + 1, format!("{text:?} is not finite")));
            }
            Ok(v)
        };
        ids.push(field(id_col)?.to_string());
        coords.push(Vec3::new(number(x_col)?, number(y_col)?, number(z_col)?));
        if let Some(c) = label_col {
            labels.push(record.get(c).unwrap_or("").to_string());
        }
    }
    if ids.is_empty() {
        return Err(parse_err(1, 1, "no points".into()));
    }
    for i in 0..coords.len() {
        if let Some(j) = (i + 1..coords.len()).find(|&j| ids[i] == ids[j]) {
            return Err(CliError::DegenerateInput(format!("id {:?} appears twice (rows {} and {})", ids[i], i + 1, j + 1)));
        }
        if let Some(j) = (i + 1..coords.len()).find(|&j| (coords[i] - coords[j]).norm() < MIN_SEPARATION) {
            return Err(CliError::DegenerateInput(format!(
                "points {:?} and {:?} coincide",
                ids[i], ids[j]
            )));
        }
    }
    Ok(LabeledPoints {
        ids,
        points: PointSet::with_min_separation(coords, MIN_SEPARATION)?,
        labels: label_col.map(|_| labels),
    })
}

pub fn load_pointset(path: &Path, columns: &ColumnMap) -> Result<LabeledPoints> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_pointset(file, columns, &path.display().to_string())
}

/// Writes the default schema, with a label column when labels are present.
pub fn write_pointset(writer: impl Write, points: &LabeledPoints) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let to_io = |e: csv::Error| CliError::io("<csv>", std::io::Error::other(e));
    if points.labels.is_some() {
        w.write_record(["id", "x", "y", "z", "label"]).map_err(to_io)?;
    } else {
        w.write_record(["id", "x", "y", "z"]).map_err(to_io)?;
    }
    for (i, p) in points.points.points().iter().enumerate() {
        let mut row = vec![points.ids[i].clone(), p.x.to_string(), p.y.to_string(), p.z.to_string()];
        if let Some(labels) = &points.labels {
            row.push(labels[i].clone());
        }
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))
}

pub fn save_pointset(path: &Path, points: &LabeledPoints) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_pointset(file, points)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}
