//! Multi-way contingency tables: shape arithmetic, margins and file I/O.
//!
//! Cells are stored in row-major order with the last axis varying fastest,
//! so a 3x3 table is laid out (1,1),(1,2),(1,3),(2,1),... . Every design
//! matrix in [`crate::models`] uses the same ordering for its rows.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sample size for which every count converts to `f64` exactly.
pub const MAX_SAMPLE_SIZE: u64 = 1 << 53;

/// Per-axis level counts of a table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TableShape {
    dims: Vec<usize>,
    strides: Vec<usize>,
    cells: usize,
}

impl TableShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::arg("a table needs at least one axis"));
        }
        if let Some(axis) = dims.iter().position(|&d| d < 2) {
            return Err(Error::arg(format!(
                "axis {} has {} levels; every axis needs at least 2",
                axis + 1,
                dims[axis]
            )));
        }
        let mut cells: usize = 1;
        for &d in &dims {
            cells = cells
                .checked_mul(d)
                .ok_or_else(|| Error::Overflow("table has too many cells".into()))?;
        }
        if cells < 4 {
            return Err(Error::arg(format!("table has {cells} cells; at least 4 required")));
        }
        let mut strides = vec![1; dims.len()];
        for axis in (0..dims.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * dims[axis + 1];
        }
        Ok(TableShape { dims, strides, cells })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of cells `K`.
    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Row-major flat index of a 0-based multi-index.
    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dims.len() {
            return Err(Error::arg(format!(
                "expected {} indices, got {}",
                self.dims.len(),
                multi.len()
            )));
        }
        let mut flat = 0;
        for (axis, (&i, &d)) in multi.iter().zip(&self.dims).enumerate() {
            if i >= d {
                return Err(Error::Index { axis, index: i, dim: d });
            }
            flat += i * self.strides[axis];
        }
        Ok(flat)
    }

    /// Inverse of [`TableShape::flat_index`].
    pub fn unflat_index(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.cells {
            return Err(Error::Index {
                axis: 0,
                index: flat,
                dim: self.cells,
            });
        }
        Ok(self.unflat_unchecked(flat))
    }

    pub(crate) fn unflat_unchecked(&self, flat: usize) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&d, &s)| (flat / s) % d)
            .collect()
    }

    /// Flat index of a 1-based coordinate tuple, as used in files.
    pub fn flat_index_one_based(&self, coords: &[usize]) -> Result<usize> {
        let mut zero = Vec::with_capacity(coords.len());
        for (axis, &c) in coords.iter().enumerate() {
            if c == 0 {
                return Err(Error::Index {
                    axis,
                    index: 0,
                    dim: self.dims.get(axis).copied().unwrap_or(0),
                });
            }
            zero.push(c - 1);
        }
        self.flat_index(&zero)
    }

    /// Human-readable 1-based coordinates, e.g. `(1,2,1)`.
    pub fn cell_name(&self, flat: usize) -> String {
        let mut s = String::from("(");
        for (i, c) in self.unflat_unchecked(flat).iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", c + 1);
        }
        s.push(')');
        s
    }
}

impl TryFrom<Vec<usize>> for TableShape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        TableShape::new(dims)
    }
}

impl From<TableShape> for Vec<usize> {
    fn from(shape: TableShape) -> Self {
        shape.dims
    }
}

/// Observed cell counts together with their shape and optional labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Table {
    shape: TableShape,
    counts: Vec<u64>,
    total: u64,
    axis_names: Option<Vec<String>>,
    labels: Option<Vec<Vec<String>>>,
}

impl Table {
    pub fn new(shape: TableShape, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != shape.num_cells() {
            return Err(Error::arg(format!(
                "shape {:?} has {} cells but {} counts were given",
                shape.dims(),
                shape.num_cells(),
                counts.len()
            )));
        }
        let mut total: u64 = 0;
        for &c in &counts {
            total = total
                .checked_add(c)
                .ok_or_else(|| Error::Overflow("sample size overflows u64".into()))?;
        }
        if total > MAX_SAMPLE_SIZE {
            return Err(Error::Overflow(format!(
                "sample size {total} exceeds 2^53"
            )));
        }
        Ok(Table {
            shape,
            counts,
            total,
            axis_names: None,
            labels: None,
        })
    }

    /// Convenience constructor from dims and flat counts.
    pub fn from_counts(dims: &[usize], counts: &[u64]) -> Result<Self> {
        Table::new(TableShape::new(dims.to_vec())?, counts.to_vec())
    }

    pub fn with_axis_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.shape.ndim() {
            return Err(Error::arg(format!(
                "{} axis names given for a {}-way table",
                names.len(),
                self.shape.ndim()
            )));
        }
        self.axis_names = Some(names);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<Vec<String>>) -> Result<Self> {
        if labels.len() != self.shape.ndim() {
            return Err(Error::arg("one label list per axis is required"));
        }
        for (axis, (l, &d)) in labels.iter().zip(self.shape.dims()).enumerate() {
            if l.len() != d {
                return Err(Error::arg(format!(
                    "axis {} has {} levels but {} labels",
                    axis + 1,
                    d,
                    l.len()
                )));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Sample size `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn axis_names(&self) -> Option<&[String]> {
        self.axis_names.as_deref()
    }

    pub fn labels(&self) -> Option<&[Vec<String>]> {
        self.labels.as_deref()
    }

    pub fn get(&self, multi: &[usize]) -> Result<u64> {
        Ok(self.counts[self.shape.flat_index(multi)?])
    }

    /// Same shape and labels, different counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        let mut t = Table::new(self.shape.clone(), counts)?;
        t.axis_names = self.axis_names.clone();
        t.labels = self.labels.clone();
        Ok(t)
    }

    /// Cell description using level labels when present, else 1-based indices.
    pub fn cell_label(&self, flat: usize) -> String {
        match &self.labels {
            Some(labels) => {
                let idx = self.shape.unflat_unchecked(flat);
                let parts: Vec<&str> = idx
                    .iter()
                    .zip(labels)
                    .map(|(&i, l)| l[i].as_str())
                    .collect();
                format!("({})", parts.join(","))
            }
            None => self.shape.cell_name(flat),
        }
    }
}

/// Sums the table over every axis not in `axes`.
///
/// The result is indexed row-major over the selected axes taken in ascending
/// axis order.
pub fn margin(table: &Table, axes: &[usize]) -> Result<Vec<u64>> {
    let shape = table.shape();
    if axes.is_empty() {
        return Err(Error::arg("margin needs at least one axis"));
    }
    let mut sorted = axes.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::arg(format!("duplicate axis in {axes:?}")));
    }
    if let Some(&bad) = sorted.iter().find(|&&a| a >= shape.ndim()) {
        return Err(Error::arg(format!(
            "axis {bad} does not exist in a {}-way table",
            shape.ndim()
        )));
    }
    let sub_dims: Vec<usize> = sorted.iter().map(|&a| shape.dims()[a]).collect();
    let len: usize = sub_dims.iter().product();
    let mut out = vec![0u64; len];
    for (flat, &c) in table.counts().iter().enumerate() {
        let multi = shape.unflat_unchecked(flat);
        let mut idx = 0;
        for (&a, &d) in sorted.iter().zip(&sub_dims) {
            idx = idx * d + multi[a];
        }
        out[idx] += c;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// Guesses the format from a file name, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

pub fn read_table<R: Read>(mut source: R, format: TableFormat) -> Result<Table> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::parse(0, 0, format!("unreadable input: {e}")))?;
    match format {
        TableFormat::Csv => parse_csv(&text),
        TableFormat::Json => parse_json(&text),
    }
}

pub fn write_table<W: Write>(table: &Table, mut sink: W, format: TableFormat) -> Result<()> {
    let text = match format {
        TableFormat::Csv => to_csv(table),
        TableFormat::Json => to_json(table)?,
    };
    sink.write_all(text.as_bytes())?;
    Ok(())
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn to_csv(table: &Table) -> String {
    let shape = table.shape();
    let mut out = format!("dims: {}\n", join(shape.dims()));
    if let Some(names) = table.axis_names() {
        let _ = writeln!(out, "names: {}", names.join(","));
    }
    for (flat, &c) in table.counts().iter().enumerate() {
        let one_based: Vec<usize> = shape.unflat_unchecked(flat).iter().map(|i| i + 1).collect();
        let _ = writeln!(out, "{},{}", join(&one_based), c);
    }
    out
}

fn parse_usize_field(field: &str, line: usize, column: usize, what: &str) -> Result<usize> {
    let f = field.trim();
    f.parse::<usize>()
        .map_err(|_| Error::parse(line, column, format!("{what} `{f}` is not a positive integer")))
}

fn parse_count(field: &str, line: usize, column: usize) -> Result<u64> {
    let f = field.trim();
    if let Ok(v) = f.parse::<u64>() {
        return Ok(v);
    }
    let message = if f.starts_with('-') && f[1..].trim().parse::<f64>().is_ok() {
        format!("negative count `{f}`")
    } else {
        format!("count `{f}` is not a non-negative integer")
    };
    Err(Error::parse(line, column, message))
}

fn parse_csv(text: &str) -> Result<Table> {
    let mut shape: Option<TableShape> = None;
    let mut names: Option<Vec<String>> = None;
    let mut counts: Vec<Option<u64>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if shape.is_none() {
            let rest = content
                .strip_prefix("dims:")
                .ok_or_else(|| Error::parse(line, 1, "expected header `dims: d1,d2,...`"))?;
            let dims = rest
                .split(',')
                .enumerate()
                .map(|(i, f)| parse_usize_field(f, line, i + 1, "dimension"))
                .collect::<Result<Vec<_>>>()?;
            let s = TableShape::new(dims).map_err(|e| Error::parse(line, 1, e.to_string()))?;
            counts = vec![None; s.num_cells()];
            shape = Some(s);
            continue;
        }
        let s = shape.as_ref().expect("header parsed");
        if let Some(rest) = content.strip_prefix("names:") {
            let n: Vec<String> = rest.split(',').map(|x| x.trim().to_string()).collect();
            if n.len() != s.ndim() {
                return Err(Error::parse(
                    line,
                    1,
                    format!("{} axis names for a {}-way table", n.len(), s.ndim()),
                ));
            }
            names = Some(n);
            continue;
        }
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != s.ndim() + 1 {
            return Err(Error::parse(
                line,
                1,
                format!(
                    "expected {} indices and a count, found {} fields",
                    s.ndim(),
                    fields.len()
                ),
            ));
        }
        let mut coords = Vec::with_capacity(s.ndim());
        for (axis, f) in fields[..s.ndim()].iter().enumerate() {
            let c = parse_usize_field(f, line, axis + 1, "index")?;
            if c == 0 || c > s.dims()[axis] {
                return Err(Error::parse(
                    line,
                    axis + 1,
                    format!("index {c} outside 1..={} for axis {}", s.dims()[axis], axis + 1),
                ));
            }
            coords.push(c - 1);
        }
        let count = parse_count(fields[s.ndim()], line, s.ndim() + 1)?;
        let flat = s.flat_index(&coords)?;
        if counts[flat].is_some() {
            return Err(Error::parse(line, 1, format!("cell {} listed twice", s.cell_name(flat))));
        }
        counts[flat] = Some(count);
    }

    let shape = shape.ok_or_else(|| Error::parse(1, 1, "empty input"))?;
    let mut dense = Vec::with_capacity(counts.len());
    for (flat, c) in counts.iter().enumerate() {
        match c {
            Some(v) => dense.push(*v),
            None => {
                return Err(Error::parse(
                    text.lines().count(),
                    1,
                    format!("cell {} has no count", shape.cell_name(flat)),
                ))
            }
        }
    }
    let table = Table::new(shape, dense).map_err(|e| Error::parse(0, 0, e.to_string()))?;
    match names {
        Some(n) => table.with_axis_names(n),
        None => Ok(table),
    }
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    dims: Vec<usize>,
    counts: Vec<serde_json::Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<serde_json::Map<String, serde_json::Value>>,
}

fn parse_json(text: &str) -> Result<Table> {
    if text.trim().is_empty() {
        return Err(Error::parse(1, 1, "empty input"));
    }
    let raw: JsonTable =
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
    let shape = TableShape::new(raw.dims).map_err(|e| Error::parse(1, 1, e.to_string()))?;
    if raw.counts.len() != shape.num_cells() {
        return Err(Error::parse(
            1,
            1,
            format!(
                "dims imply {} cells but {} counts were given",
                shape.num_cells(),
                raw.counts.len()
            ),
        ));
    }
    let mut counts = Vec::with_capacity(raw.counts.len());
    for (i, n) in raw.counts.iter().enumerate() {
        match n.as_u64() {
            Some(v) => counts.push(v),
            None => {
                let message = if n.as_i64().is_some_and(|v| v < 0)
                    || n.as_f64().is_some_and(|v| v < 0.0)
                {
                    format!("negative count {n} at counts[{i}]")
                } else {
                    format!("count {n} at counts[{i}] is not an integer")
                };
                // Row is the flat cell index (1-based) for JSON input.
                return Err(Error::parse(i + 1, 1, message));
            }
        }
    }
    let mut table = Table::new(shape, counts).map_err(|e| Error::parse(1, 1, e.to_string()))?;

    let mut names = raw.axes;
    if let Some(map) = raw.labels {
        if names.is_none() {
            names = Some(map.keys().cloned().collect());
        }
        let order = names.clone().unwrap_or_default();
        let mut labels = Vec::with_capacity(order.len());
        for name in &order {
            let levels = map
                .get(name)
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::parse(1, 1, format!("labels for axis `{name}` missing")))?;
            let levels = levels
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            labels.push(levels);
        }
        table = table
            .with_labels(labels)
            .map_err(|e| Error::parse(1, 1, e.to_string()))?;
    }
    if let Some(n) = names {
        table = table
            .with_axis_names(n)
            .map_err(|e| Error::parse(1, 1, e.to_string()))?;
    }
    Ok(table)
}

fn to_json(table: &Table) -> Result<String> {
    let labels = match (table.axis_names(), table.labels()) {
        (Some(names), Some(labels)) => Some(
            names
                .iter()
                .zip(labels)
                .map(|(n, l)| (n.clone(), serde_json::json!(l)))
                .collect(),
        ),
        _ => None,
    };
    let raw = JsonTable {
        dims: table.shape().dims().to_vec(),
        counts: table.counts().iter().map(|&c| c.into()).collect(),
        axes: table.axis_names().map(<[String]>::to_vec),
        labels,
    };
    serde_json::to_string(&raw).map_err(|e| Error::Io(e.to_string()))
}
