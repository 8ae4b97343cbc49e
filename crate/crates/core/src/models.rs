//! Design matrices for hierarchical log-linear models and their outlier
//! augmentations.
//!
//! Effects use corner-point coding: every factor drops its last level, so a
//! 3x3 independence model has columns `1, row1, row2, col1, col2`. Outlier
//! sets add one indicator column per cell; an outlier pattern adds a single
//! column that is the sum of its cells' indicators.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exact_rank, IntMatrix};
use crate::tables::{Table, TableShape};

/// What a design-matrix column encodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTerm {
    Intercept,
    /// Dummy column for one level combination (0-based) of an interaction.
    Effect { axes: Vec<usize>, levels: Vec<usize> },
    /// Private indicator of a single cell.
    OutlierCell { cell: usize },
    /// Shared indicator of a group of cells.
    Pattern { cells: Vec<usize> },
    Custom { name: String },
}

impl fmt::Display for ColumnTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnTerm::Intercept => write!(f, "intercept"),
            ColumnTerm::Effect { axes, levels } => {
                let parts: Vec<String> = axes
                    .iter()
                    .zip(levels)
                    .map(|(a, l)| format!("x{}={}", a + 1, l + 1))
                    .collect();
                write!(f, "[{}]", parts.join(","))
            }
            ColumnTerm::OutlierCell { cell } => write!(f, "outlier#{cell}"),
            ColumnTerm::Pattern { cells } => write!(f, "pattern{cells:?}"),
            ColumnTerm::Custom { name } => write!(f, "{name}"),
        }
    }
}

/// `K x d` matrix of non-negative integers, one row per cell in flat order.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
    labels: Vec<ColumnTerm>,
    rank: OnceLock<usize>,
}

impl PartialEq for DesignMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.entries == other.entries
    }
}

impl Eq for DesignMatrix {}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<u32>, labels: Vec<ColumnTerm>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::arg(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if labels.len() != cols {
            return Err(Error::arg(format!("{} labels for {cols} columns", labels.len())));
        }
        Ok(DesignMatrix {
            rows,
            cols,
            entries,
            labels,
            rank: OnceLock::new(),
        })
    }

    /// Matrix from explicit rows, with generic column labels.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::arg("ragged design matrix rows"));
        }
        let entries = rows.iter().flatten().copied().collect();
        let labels = (0..cols)
            .map(|c| ColumnTerm::Custom {
                name: format!("c{}", c + 1),
            })
            .collect();
        DesignMatrix::new(rows.len(), cols, entries, labels)
    }

    /// Number of rows `K`.
    pub fn num_cells(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, cell: usize, col: usize) -> u32 {
        self.entries[cell * self.cols + col]
    }

    pub fn row(&self, cell: usize) -> &[u32] {
        &self.entries[cell * self.cols..(cell + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<u32> {
        (0..self.rows).map(|k| self.get(k, col)).collect()
    }

    pub fn labels(&self) -> &[ColumnTerm] {
        &self.labels
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|k| self.row(k).to_vec()).collect()
    }

    pub fn to_int_matrix(&self) -> IntMatrix {
        IntMatrix::from_rows(&self.to_rows())
    }

    /// Exact rank over the rationals, computed once.
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| exact_rank(&self.to_int_matrix()))
    }

    pub fn is_zero_one(&self) -> bool {
        self.entries.iter().all(|&e| e <= 1)
    }

    /// Whether the all-ones vector lies in the column space.
    pub fn spans_intercept(&self) -> bool {
        self.with_column(vec![1; self.rows], ColumnTerm::Intercept)
            .rank()
            == self.rank()
    }

    /// `A^t f`: the sufficient statistic of a table under this model.
    pub fn sufficient_statistic(&self, counts: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; self.cols];
        for (k, &f) in counts.iter().enumerate() {
            if f == 0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(k)) {
                *o += a as u64 * f;
            }
        }
        out
    }

    /// `A^t v` for an integer vector.
    pub fn apply_transpose(&self, v: &[i64]) -> Vec<i64> {
        let mut out = vec![0i64; self.cols];
        for (k, &x) in v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(k)) {
                *o += a as i64 * x;
            }
        }
        out
    }

    pub fn with_column(&self, column: Vec<u32>, label: ColumnTerm) -> DesignMatrix {
        assert_eq!(column.len(), self.rows);
        let cols = self.cols + 1;
        let mut entries = Vec::with_capacity(self.rows * cols);
        for (k, &c) in column.iter().enumerate() {
            entries.extend_from_slice(self.row(k));
            entries.push(c);
        }
        let mut labels = self.labels.clone();
        labels.push(label);
        DesignMatrix {
            rows: self.rows,
            cols,
            entries,
            labels,
            rank: OnceLock::new(),
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &DesignMatrix) -> DesignMatrix {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut entries = Vec::with_capacity(self.rows * cols);
        for k in 0..self.rows {
            entries.extend_from_slice(self.row(k));
            entries.extend_from_slice(other.row(k));
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        DesignMatrix {
            rows: self.rows,
            cols,
            entries,
            labels,
            rank: OnceLock::new(),
        }
    }

    /// Rows restricted to `cells`, in the order given.
    pub fn row_submatrix(&self, cells: &[usize]) -> DesignMatrix {
        let mut entries = Vec::with_capacity(cells.len() * self.cols);
        for &k in cells {
            entries.extend_from_slice(self.row(k));
        }
        DesignMatrix {
            rows: cells.len(),
            cols: self.cols,
            entries,
            labels: self.labels.clone(),
            rank: OnceLock::new(),
        }
    }

    /// Whether `Im(self)` is contained in `Im(other)`.
    pub fn column_space_within(&self, other: &DesignMatrix) -> bool {
        other.hstack(self).rank() == other.rank()
    }
}

/// Structural description of a model: base interaction terms plus outlier
/// sets and patterns (cells as flat indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub shape: TableShape,
    pub terms: Vec<Vec<usize>>,
    #[serde(default)]
    pub outlier_sets: Vec<Vec<usize>>,
    #[serde(default)]
    pub outlier_patterns: Vec<Vec<usize>>,
}

impl ModelSpec {
    pub fn new(shape: TableShape, terms: Vec<Vec<usize>>) -> Self {
        ModelSpec {
            shape,
            terms,
            outlier_sets: Vec::new(),
            outlier_patterns: Vec::new(),
        }
    }

    /// Mutual independence of all axes.
    pub fn independence(shape: TableShape) -> Self {
        let terms = (0..shape.ndim()).map(|a| vec![a]).collect();
        ModelSpec::new(shape, terms)
    }

    pub fn has_outliers(&self) -> bool {
        !self.outlier_sets.is_empty() || !self.outlier_patterns.is_empty()
    }

    /// Same base model with no outlier columns.
    pub fn base(&self) -> ModelSpec {
        ModelSpec::new(self.shape.clone(), self.terms.clone())
    }

    pub fn validate_cells(&self) -> Result<()> {
        let k = self.shape.num_cells();
        let mut seen = vec![false; k];
        for group in self.outlier_sets.iter().chain(&self.outlier_patterns) {
            for &c in group {
                if c >= k {
                    return Err(Error::arg(format!("cell index {c} outside 0..{k}")));
                }
                if seen[c] {
                    return Err(Error::arg(format!(
                        "cell {} appears in more than one outlier set or pattern",
                        self.shape.cell_name(c)
                    )));
                }
                seen[c] = true;
            }
        }
        Ok(())
    }

    pub fn base_design(&self) -> Result<DesignMatrix> {
        build_hierarchical_design(&self.shape, &self.terms)
    }

    /// Base design followed by every outlier set, then every pattern.
    pub fn design(&self) -> Result<DesignMatrix> {
        self.validate_cells()?;
        let mut a = self.base_design()?;
        for set in &self.outlier_sets {
            a = augment_set(&a, set)?;
        }
        for pattern in &self.outlier_patterns {
            a = augment_pattern(&a, pattern)?;
        }
        Ok(a)
    }

    /// Checks that the augmentation is non-trivial. Each pattern must add
    /// exactly one to the rank and the whole augmentation at least one.
    /// Returns the test's degrees of freedom.
    pub fn validate(&self) -> Result<usize> {
        self.validate_cells()?;
        let base = self.base_design()?;
        let mut current = base.clone();
        for set in &self.outlier_sets {
            current = augment_set(&current, set)?;
        }
        for pattern in &self.outlier_patterns {
            let next = augment_pattern(&current, pattern)?;
            if next.rank() != current.rank() + 1 {
                let names: Vec<String> = pattern.iter().map(|&c| self.shape.cell_name(c)).collect();
                return Err(Error::Triviality(format!(
                    "pattern {{{}}} is already a component of the sufficient statistic",
                    names.join(",")
                )));
            }
            current = next;
        }
        validate_augmentation(&base, &current)
    }
}

/// Subset closure of the given terms, each sorted, ordered by size and then
/// lexicographically.
pub fn hierarchical_closure(terms: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for term in terms {
        let mut t = term.clone();
        t.sort_unstable();
        t.dedup();
        let n = t.len();
        for mask in 1u64..(1u64 << n) {
            let sub: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| t[i]).collect();
            if !out.contains(&sub) {
                out.push(sub);
            }
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Intercept plus corner-point dummies for every term in the subset closure.
pub fn build_hierarchical_design(shape: &TableShape, terms: &[Vec<usize>]) -> Result<DesignMatrix> {
    for term in terms {
        if term.is_empty() {
            return Err(Error::arg("empty interaction term"));
        }
        if let Some(&bad) = term.iter().find(|&&a| a >= shape.ndim()) {
            return Err(Error::arg(format!(
                "term references axis {} but the table has {} axes",
                bad + 1,
                shape.ndim()
            )));
        }
    }
    let k = shape.num_cells();
    let cells: Vec<Vec<usize>> = (0..k).map(|c| shape.unflat_unchecked(c)).collect();
    let mut columns: Vec<(Vec<u32>, ColumnTerm)> = vec![(vec![1; k], ColumnTerm::Intercept)];
    for term in hierarchical_closure(terms) {
        let sub_dims: Vec<usize> = term.iter().map(|&a| shape.dims()[a] - 1).collect();
        let combos: usize = sub_dims.iter().product();
        for combo in 0..combos {
            // row-major over the term's axes, last fastest
            let mut levels = vec![0; term.len()];
            let mut rest = combo;
            for i in (0..term.len()).rev() {
                levels[i] = rest % sub_dims[i];
                rest /= sub_dims[i];
            }
            let col = cells
                .iter()
                .map(|m| u32::from(term.iter().zip(&levels).all(|(&a, &l)| m[a] == l)))
                .collect();
            columns.push((
                col,
                ColumnTerm::Effect {
                    axes: term.clone(),
                    levels,
                },
            ));
        }
    }
    let d = columns.len();
    let mut entries = vec![0u32; k * d];
    let mut labels = Vec::with_capacity(d);
    for (j, (col, label)) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            entries[i * d + j] = v;
        }
        labels.push(label);
    }
    DesignMatrix::new(k, d, entries, labels)
}

fn check_cells(a: &DesignMatrix, cells: &[usize]) -> Result<()> {
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::arg(format!("cell {} listed twice", w[0])));
    }
    if let Some(&bad) = sorted.iter().find(|&&c| c >= a.num_cells()) {
        return Err(Error::arg(format!(
            "cell {bad} outside 0..{}",
            a.num_cells()
        )));
    }
    Ok(())
}

/// `[A | I_h1 | ... | I_hm]`.
pub fn augment_set(a: &DesignMatrix, cells: &[usize]) -> Result<DesignMatrix> {
    check_cells(a, cells)?;
    let mut out = a.clone();
    for &c in cells {
        let mut col = vec![0; a.num_cells()];
        col[c] = 1;
        out = out.with_column(col, ColumnTerm::OutlierCell { cell: c });
    }
    Ok(out)
}

/// `[A | I_h1 + ... + I_hm]`.
pub fn augment_pattern(a: &DesignMatrix, cells: &[usize]) -> Result<DesignMatrix> {
    if cells.is_empty() {
        return Err(Error::arg("an outlier pattern needs at least one cell"));
    }
    check_cells(a, cells)?;
    let mut col = vec![0; a.num_cells()];
    for &c in cells {
        col[c] = 1;
    }
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    Ok(a.with_column(col, ColumnTerm::Pattern { cells: sorted }))
}

/// Degrees of freedom `rank(Ã) - rank(A)` of the comparison between a base
/// model and its augmentation; zero is a triviality error.
pub fn validate_augmentation(base: &DesignMatrix, augmented: &DesignMatrix) -> Result<usize> {
    if base.num_cells() != augmented.num_cells() {
        return Err(Error::arg("models are defined on different cell sets"));
    }
    if augmented.num_cols() <= base.num_cols() {
        return Err(Error::arg("augmented model must add at least one column"));
    }
    if !base.column_space_within(augmented) {
        return Err(Error::arg("augmented model does not contain the base model"));
    }
    let df = augmented.rank() - base.rank();
    if df == 0 {
        return Err(Error::Triviality(
            "cell is already a component of the sufficient statistic".into(),
        ));
    }
    Ok(df)
}

/// Two-way independence plus one indicator per diagonal cell.
pub fn preset_quasi_independence(rows: usize, cols: usize) -> Result<DesignMatrix> {
    if rows != cols {
        return Err(Error::arg(format!(
            "quasi-independence needs a square table, got {rows}x{cols}"
        )));
    }
    if rows < 3 {
        return Err(Error::arg("quasi-independence on a 2x2 table is saturated"));
    }
    let shape = TableShape::new(vec![rows, cols])?;
    let a = build_hierarchical_design(&shape, &[vec![0], vec![1]])?;
    let diagonal: Vec<usize> = (0..rows).map(|i| i * cols + i).collect();
    augment_set(&a, &diagonal)
}

/// Axis reference inside a model-spec file: a name or a 1-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisRef {
    Index(usize),
    Name(String),
}

/// On-disk model specification; cells are 1-based coordinate tuples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ModelSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<String>>,
    pub terms: Vec<Vec<AxisRef>>,
    #[serde(default)]
    pub outlier_sets: Vec<Vec<Vec<usize>>>,
    #[serde(default)]
    pub outlier_patterns: Vec<Vec<Vec<usize>>>,
}

impl ModelSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model spec serializes")
    }

    /// Resolves axis names and coordinates against a table.
    pub fn resolve(&self, table: &Table) -> Result<ModelSpec> {
        let shape = table.shape().clone();
        let names: Option<Vec<String>> = self
            .axes
            .clone()
            .or_else(|| table.axis_names().map(<[String]>::to_vec));
        let axis = |r: &AxisRef| -> Result<usize> {
            match r {
                AxisRef::Index(i) if *i >= 1 && *i <= shape.ndim() => Ok(i - 1),
                AxisRef::Index(i) => Err(Error::arg(format!(
                    "axis {i} outside 1..={}",
                    shape.ndim()
                ))),
                AxisRef::Name(n) => names
                    .as_ref()
                    .and_then(|ns| ns.iter().position(|x| x == n))
                    .ok_or_else(|| Error::arg(format!("unknown axis `{n}`"))),
            }
        };
        let terms = self
            .terms
            .iter()
            .map(|t| t.iter().map(&axis).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let cells = |groups: &[Vec<Vec<usize>>]| -> Result<Vec<Vec<usize>>> {
            groups
                .iter()
                .map(|g| g.iter().map(|c| shape.flat_index_one_based(c)).collect())
                .collect()
        };
        let spec = ModelSpec {
            shape: shape.clone(),
            terms,
            outlier_sets: cells(&self.outlier_sets)?,
            outlier_patterns: cells(&self.outlier_patterns)?,
        };
        spec.validate_cells()?;
        Ok(spec)
    }
}
