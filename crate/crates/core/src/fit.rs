//! Maximum-likelihood fitting, likelihood-ratio statistics and residuals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::models::{validate_augmentation, DesignMatrix};
use crate::tables::Table;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub fitted: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_margin_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_asymptotic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_monte_carlo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Partition of the cells into blocks whose indicators lie in the column
/// space; every block is scaled to its observed total.
#[derive(Debug, Clone, PartialEq)]
struct Step {
    blocks: Vec<Vec<usize>>,
}

/// Precomputed scaling schedule for a 0/1 design matrix.
///
/// A step is a partition of the cells into blocks whose indicator vectors
/// lie in the column space, and applying it is the I-projection onto
/// `{sum_B f = sum_B obs for every block B}`. Steps start from groups of
/// columns with disjoint supports (plus the uncovered cells), and blocks are
/// split further by other columns' supports while the pieces stay in the
/// column space; for hierarchical designs this recovers the full marginal
/// partitions of the generating terms. Cycling through the steps from the
/// uniform table converges to the maximum-likelihood estimate whenever the
/// intercept lies in the column space.
#[derive(Debug, Clone)]
pub struct Fitter {
    design: DesignMatrix,
    steps: Vec<Step>,
    tol: f64,
    max_iter: usize,
}

impl Fitter {
    pub fn new(design: &DesignMatrix) -> Result<Self> {
        Self::with_tolerance(design, DEFAULT_TOL, DEFAULT_MAX_ITER)
    }

    pub fn with_tolerance(design: &DesignMatrix, tol: f64, max_iter: usize) -> Result<Self> {
        if !design.is_zero_one() {
            return Err(Error::arg("fitting requires a 0/1 design matrix"));
        }
        if !design.spans_intercept() {
            return Err(Error::arg("the intercept is not in the column space of the design"));
        }
        if !(tol > 0.0) {
            return Err(Error::arg("tolerance must be positive"));
        }
        let k = design.num_cells();
        let supports: Vec<Vec<usize>> = (0..design.num_cols())
            .map(|c| (0..k).filter(|&i| design.get(i, c) == 1).collect::<Vec<_>>())
            .filter(|s: &Vec<usize>| !s.is_empty() && s.len() < k)
            .collect();
        let mut groups: Vec<(Vec<bool>, Vec<Vec<usize>>)> = Vec::new();
        for s in &supports {
            if groups.iter().any(|(_, parts)| parts.contains(s)) {
                continue;
            }
            match groups.iter_mut().find(|(used, _)| s.iter().all(|&i| !used[i])) {
                Some((used, parts)) => {
                    s.iter().for_each(|&i| used[i] = true);
                    parts.push(s.clone());
                }
                None => {
                    let mut used = vec![false; k];
                    s.iter().for_each(|&i| used[i] = true);
                    groups.push((used, vec![s.clone()]));
                }
            }
        }
        let space = ColumnSpace::new(design);
        let mut steps: Vec<Step> = Vec::new();
        for (used, mut blocks) in groups {
            let rest: Vec<usize> = (0..k).filter(|&i| !used[i]).collect();
            if !rest.is_empty() {
                blocks.push(rest);
            }
            let mut step = Step {
                blocks: refine(blocks, &supports, &space, k),
            };
            step.blocks.iter_mut().for_each(|b| b.sort_unstable());
            step.blocks.sort();
            if !steps.contains(&step) {
                steps.push(step);
            }
        }
        // A step implied by a finer one adds nothing.
        let finer = |a: &Step, b: &Step| {
            a != b && a.blocks.iter().all(|x| b.blocks.iter().any(|y| x.iter().all(|i| y.contains(i))))
        };
        let keep: Vec<bool> = steps
            .iter()
            .map(|s| !steps.iter().any(|t| finer(t, s)))
            .collect();
        let steps = steps
            .into_iter()
            .zip(keep)
            .filter_map(|(s, k)| k.then_some(s))
            .collect();
        Ok(Fitter {
            design: design.clone(),
            steps,
            tol,
            max_iter,
        })
    }

    /// Number of scaling steps per sweep.
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    /// Fits observed counts; fails with a convergence error after
    /// `max_iter` sweeps.
    pub fn fit(&self, counts: &[u64]) -> Result<FitResult> {
        let res = self.fit_unchecked(counts)?;
        if res.converged {
            Ok(res)
        } else {
            Err(Error::Convergence {
                iterations: res.iterations,
                max_margin_gap: res.max_margin_gap,
            })
        }
    }

    /// Like [`Fitter::fit`] but returns the last iterate when not converged.
    pub fn fit_unchecked(&self, counts: &[u64]) -> Result<FitResult> {
        let k = self.design.num_cells();
        if counts.len() != k {
            return Err(Error::arg(format!(
                "table has {} cells, the design has {k}",
                counts.len()
            )));
        }
        let n: f64 = counts.iter().map(|&c| c as f64).sum();
        let target = self.design.sufficient_statistic(counts);
        if n == 0.0 {
            return Ok(FitResult {
                fitted: vec![0.0; k],
                converged: true,
                iterations: 0,
                max_margin_gap: 0.0,
            });
        }
        let sum_over = |cells: &[usize]| cells.iter().map(|&i| counts[i] as f64).sum::<f64>();
        let targets: Vec<Vec<f64>> = self
            .steps
            .iter()
            .map(|s| s.blocks.iter().map(|b| sum_over(b)).collect())
            .collect();
        let bound = self.tol * (1.0 + n);
        let mut f = vec![n / k as f64; k];
        let mut gap = self.margin_gap(&f, &target);
        let mut iterations = 0;
        while gap > bound && iterations < self.max_iter {
            for (step, t) in self.steps.iter().zip(&targets) {
                for (block, &tb) in step.blocks.iter().zip(t) {
                    scale(&mut f, block, tb);
                }
            }
            iterations += 1;
            gap = self.margin_gap(&f, &target);
        }
        Ok(FitResult {
            fitted: f,
            converged: gap <= bound,
            iterations,
            max_margin_gap: gap,
        })
    }

    fn margin_gap(&self, f: &[f64], target: &[u64]) -> f64 {
        let mut sums = vec![0.0; self.design.num_cols()];
        for (i, &fi) in f.iter().enumerate() {
            for (c, s) in sums.iter_mut().enumerate() {
                if self.design.get(i, c) == 1 {
                    *s += fi;
                }
            }
        }
        sums.iter()
            .zip(target)
            .map(|(s, &t)| (s - t as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Orthonormal basis of the column space, for membership tests.
struct ColumnSpace {
    basis: Vec<Vec<f64>>,
}

impl ColumnSpace {
    fn new(a: &DesignMatrix) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in 0..a.num_cols() {
            let mut v: Vec<f64> = a.column(c).iter().map(|&x| x as f64).collect();
            let norm0 = dot(&v, &v).sqrt();
            for _ in 0..2 {
                for q in &basis {
                    let d = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-9 * norm0.max(1.0) {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        ColumnSpace { basis }
    }

    fn contains_indicator(&self, cells: &[usize], k: usize) -> bool {
        let mut v = vec![0.0; k];
        cells.iter().for_each(|&i| v[i] = 1.0);
        for q in &self.basis {
            let d: f64 = cells.iter().map(|&i| q[i]).sum();
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
        }
        dot(&v, &v).sqrt() < 1e-8 * (cells.len() as f64).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits blocks along column supports while both pieces stay in the
/// column space.
fn refine(mut blocks: Vec<Vec<usize>>, supports: &[Vec<usize>], space: &ColumnSpace, k: usize) -> Vec<Vec<usize>> {
    let mut member = vec![false; k];
    let mut changed = true;
    while changed {
        changed = false;
        for s in supports {
            member.iter_mut().for_each(|m| *m = false);
            s.iter().for_each(|&i| member[i] = true);
            let mut next = Vec::with_capacity(blocks.len());
            for b in blocks {
                let (inside, outside): (Vec<usize>, Vec<usize>) = b.iter().partition(|&&i| member[i]);
                if !inside.is_empty() && !outside.is_empty() && space.contains_indicator(&inside, k) {
                    next.push(inside);
                    next.push(outside);
                    changed = true;
                } else {
                    next.push(b);
                }
            }
            blocks = next;
        }
    }
    blocks
}

fn scale(f: &mut [f64], cells: &[usize], target: f64) {
    let current: f64 = cells.iter().map(|&i| f[i]).sum();
    if current > 0.0 {
        let r = target / current;
        cells.iter().for_each(|&i| f[i] *= r);
    } else if target > 0.0 {
        let each = target / cells.len() as f64;
        cells.iter().for_each(|&i| f[i] = each);
    }
}

/// Maximum-likelihood expected counts of `table` under the toric model of `a`.
pub fn mle_fit(a: &DesignMatrix, table: &Table, tol: f64, max_iter: usize) -> Result<FitResult> {
    Fitter::with_tolerance(a, tol, max_iter)?.fit(table.counts())
}

/// `2 sum f_k log(f1_k / f0_k)`, with zero observed cells contributing 0.
pub fn g2(table: &Table, fit0: &FitResult, fit1: &FitResult) -> Result<f64> {
    g2_counts(table.counts(), &fit0.fitted, &fit1.fitted)
}

pub fn g2_counts(counts: &[u64], f0: &[f64], f1: &[f64]) -> Result<f64> {
    if counts.len() != f0.len() || counts.len() != f1.len() {
        return Err(Error::arg("fits and table differ in length"));
    }
    let mut sum = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        if f0[k] <= 0.0 || f1[k] <= 0.0 {
            return Err(Error::Evaluation(format!(
                "fitted value 0 at cell {} with positive count",
                k + 1
            )));
        }
        sum += c as f64 * (f1[k] / f0[k]).ln();
    }
    Ok(2.0 * sum)
}

/// `(f_k - fhat_k) / sqrt(fhat_k)`.
pub fn pearson_residuals(table: &Table, fit: &FitResult) -> Result<Vec<f64>> {
    table
        .counts()
        .iter()
        .zip(&fit.fitted)
        .enumerate()
        .map(|(k, (&c, &e))| {
            if e > 0.0 {
                Ok((c as f64 - e) / e.sqrt())
            } else if c == 0 {
                Ok(0.0)
            } else {
                Err(Error::Evaluation(format!(
                    "fitted value 0 at cell {} with positive count",
                    k + 1
                )))
            }
        })
        .collect()
}

/// Adjusted residuals of a two-way table under independence, row-major.
pub fn adjusted_residuals_independence(table: &Table) -> Result<Vec<Vec<f64>>> {
    let dims = table.shape().dims();
    if dims.len() != 2 {
        return Err(Error::arg("adjusted residuals need a two-way table"));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let f = table.counts();
    let n = table.total() as f64;
    let r: Vec<f64> = (0..rows)
        .map(|i| (0..cols).map(|j| f[i * cols + j] as f64).sum())
        .collect();
    let c: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| f[i * cols + j] as f64).sum())
        .collect();
    if let Some(i) = r.iter().position(|&x| x == 0.0) {
        return Err(Error::Evaluation(format!("row {} has a zero margin", i + 1)));
    }
    if let Some(j) = c.iter().position(|&x| x == 0.0) {
        return Err(Error::Evaluation(format!("column {} has a zero margin", j + 1)));
    }
    Ok((0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let e = r[i] * c[j] / n;
                    let v = r[i] * (n - r[i]) * c[j] * (n - c[j]) / n.powi(3);
                    (f[i * cols + j] as f64 - e) / v.sqrt()
                })
                .collect()
        })
        .collect())
}

/// Upper tail of the chi-square distribution.
pub fn chisq_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(df as f64).expect("df is positive");
    d.sf(x).clamp(0.0, 1.0)
}

/// Base fit, augmented fit and their likelihood-ratio test.
#[derive(Debug, Clone, PartialEq)]
pub struct LrtOutcome {
    pub base: FitResult,
    pub augmented: FitResult,
    pub result: TestResult,
}

pub fn lrt_asymptotic(table: &Table, a: &DesignMatrix, augmented: &DesignMatrix) -> Result<TestResult> {
    Ok(lrt_detailed(table, a, augmented, DEFAULT_TOL, DEFAULT_MAX_ITER)?.result)
}

pub fn lrt_detailed(
    table: &Table,
    a: &DesignMatrix,
    augmented: &DesignMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<LrtOutcome> {
    let df = validate_augmentation(a, augmented)?;
    let base = mle_fit(a, table, tol, max_iter)?;
    let aug = mle_fit(augmented, table, tol, max_iter)?;
    let statistic = g2(table, &base, &aug)?.max(0.0);
    Ok(LrtOutcome {
        base,
        augmented: aug,
        result: TestResult {
            statistic,
            df,
            p_asymptotic: chisq_sf(statistic, df),
            p_monte_carlo: None,
            replicates: None,
            seed: None,
        },
    })
}
