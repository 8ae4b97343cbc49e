//! Screening for candidate outliers and two classical single-table baselines.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, DiscreteCDF, Normal, Poisson};

use crate::error::{Error, Result};
use crate::fit::{adjusted_residuals_independence, mle_fit, pearson_residuals, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::models::DesignMatrix;
use crate::tables::Table;

pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Observed above expectation.
    Type,
    /// Observed below expectation.
    Antitype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Flat cell index, 0-based.
    pub cell: usize,
    pub label: String,
    pub observed: u64,
    pub fitted: f64,
    pub residual: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub method: String,
    pub threshold: f64,
    pub cells: Vec<Candidate>,
}

impl CandidateReport {
    pub fn types(&self) -> impl Iterator<Item = &Candidate> {
        self.cells.iter().filter(|c| c.direction == Direction::Type)
    }

    pub fn antitypes(&self) -> impl Iterator<Item = &Candidate> {
        self.cells.iter().filter(|c| c.direction == Direction::Antitype)
    }
}

/// Cells whose Pearson residual under the base model reaches `threshold`
/// in absolute value, largest first.
pub fn scan_residuals(table: &Table, a: &DesignMatrix, threshold: f64) -> Result<CandidateReport> {
    if !(threshold >= 0.0) {
        return Err(Error::arg("threshold must be non-negative"));
    }
    let fit = mle_fit(a, table, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let res = pearson_residuals(table, &fit)?;
    let mut cells: Vec<Candidate> = res
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() >= threshold && **r != 0.0)
        .map(|(k, &r)| Candidate {
            cell: k,
            label: table.cell_label(k),
            observed: table.counts()[k],
            fitted: fit.fitted[k],
            residual: r,
            direction: if r > 0.0 { Direction::Type } else { Direction::Antitype },
        })
        .collect();
    cells.sort_by(|x, y| {
        y.residual
            .abs()
            .total_cmp(&x.residual.abs())
            .then(x.cell.cmp(&y.cell))
    });
    Ok(CandidateReport {
        method: "pearson residuals".into(),
        threshold,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxResidualTest {
    pub z: f64,
    /// Cell attaining the maximum, 0-based.
    pub cell: usize,
    pub critical: f64,
    pub reject: bool,
}

/// Two-sided standard-normal critical value for `cells` simultaneous tests
/// at family level `alpha`, Šidák-adjusted.
pub fn sidak_critical(alpha: f64, cells: usize) -> f64 {
    let per_cell = 1.0 - (1.0 - alpha).powf(1.0 / cells as f64);
    Normal::standard().inverse_cdf(1.0 - per_cell / 2.0)
}

/// Maximum absolute adjusted residual under independence against the
/// Šidák critical value.
pub fn global_max_residual_test(table: &Table, alpha: f64) -> Result<MaxResidualTest> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg("alpha must lie in (0, 1)"));
    }
    let z = adjusted_residuals_independence(table)?;
    let cols = z[0].len();
    let (mut best, mut cell) = (0.0f64, 0);
    for (i, row) in z.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                cell = i * cols + j;
            }
        }
    }
    let critical = sidak_critical(alpha, table.shape().num_cells());
    Ok(MaxResidualTest {
        z: best,
        cell,
        critical,
        reject: best > critical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRegion {
    pub cell: usize,
    pub observed: u64,
    pub lambda: f64,
    /// Counts `<= lower` are outlying.
    pub lower: Option<u64>,
    /// Counts `>= upper` are outlying.
    pub upper: Option<u64>,
    pub flagged: bool,
    /// Set when the fitted value is 0 and the cell was not assessed.
    pub skipped: bool,
}

/// Poisson outlier regions around the base-model fit, `alpha / 2` per tail.
///
/// The upper region starts at the `1 - alpha/2` quantile, the smallest `n`
/// with `P(X > n) <= alpha/2`; the lower region is `[0, l]` with `l` the
/// largest `n` such that `P(X <= n) <= alpha/2`.
pub fn poisson_outlier_regions(table: &Table, a: &DesignMatrix, alpha: f64) -> Result<Vec<PoissonRegion>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::arg("alpha must lie in [0, 1)"));
    }
    let fit = mle_fit(a, table, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let half = alpha / 2.0;
    Ok(table
        .counts()
        .iter()
        .zip(&fit.fitted)
        .enumerate()
        .map(|(cell, (&observed, &lambda))| {
            if lambda <= 0.0 {
                return PoissonRegion {
                    cell,
                    observed,
                    lambda,
                    lower: None,
                    upper: None,
                    flagged: false,
                    skipped: true,
                };
            }
            let (lower, upper) = poisson_region(lambda, half);
            let flagged = lower.is_some_and(|l| observed <= l) || upper.is_some_and(|u| observed >= u);
            PoissonRegion {
                cell,
                observed,
                lambda,
                lower,
                upper,
                flagged,
                skipped: false,
            }
        })
        .collect())
}

/// Region bounds for one cell with tail probability `tail` per side.
pub fn poisson_region(lambda: f64, tail: f64) -> (Option<u64>, Option<u64>) {
    let d = Poisson::new(lambda).expect("lambda is positive");
    let upper = if tail > 0.0 {
        let mut n = lambda.floor() as u64;
        while d.sf(n) > tail {
            n += 1;
        }
        Some(n)
    } else {
        None
    };
    let mut lower = None;
    let mut n = 0;
    while (n as f64) <= lambda && d.cdf(n) <= tail {
        lower = Some(n);
        n += 1;
    }
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_hierarchical_design;
    use crate::tables::TableShape;

    #[test]
    fn sidak_value_for_sixteen_cells() {
        let c = sidak_critical(0.05, 16);
        assert!((c - 2.9478).abs() < 1e-3, "{c}");
        // Bonferroni is slightly more conservative.
        let bonf = Normal::standard().inverse_cdf(1.0 - 0.05 / 32.0);
        assert!(bonf > c);
    }

    #[test]
    fn uniform_table_has_no_candidates() {
        let t = Table::from_counts(&[2, 3], &[4; 6]).unwrap();
        let a = build_hierarchical_design(&TableShape::new(vec![2, 3]).unwrap(), &[vec![0], vec![1]]).unwrap();
        assert!(scan_residuals(&t, &a, 0.5).unwrap().cells.is_empty());
        let g = global_max_residual_test(&t, 0.05).unwrap();
        assert_eq!(g.z, 0.0);
        assert!(!g.reject);
    }

    #[test]
    fn poisson_tails() {
        assert_eq!(poisson_region(4.7895, 0.025).1, Some(9));
        assert_eq!(poisson_region(4.7895, 0.0), (None, None));
        let (lo, up) = poisson_region(100.0, 0.025);
        assert!(lo.unwrap() < 100 && up.unwrap() > 100);
    }
}
