//! Exact conditional tests: a Metropolis-Hastings walk over the fiber with
//! hypergeometric target, and brute-force fiber enumeration for small cases.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::fit::{chisq_sf, g2_counts, Fitter, TestResult};
use crate::models::{validate_augmentation, DesignMatrix};
use crate::tables::Table;
use crate::toric::MarkovBasis;

/// Name of the generator recorded in reports.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha), chain c seeded with seed + c";

/// Share of failed replicate fits above which a warning is raised.
pub const FAILURE_WARNING_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub replicates: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            replicates: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::arg("B must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::arg("thinning must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::arg("at least one chain is needed"));
        }
        Ok(())
    }

    /// Replicates drawn by chain `c`; the first `B mod chains` chains take
    /// one extra.
    pub fn replicates_of_chain(&self, c: usize) -> usize {
        self.replicates / self.chains + usize::from(c < self.replicates % self.chains)
    }
}

/// `-sum log(f_k!)`, the log of the unnormalised hypergeometric weight.
pub fn log_hypergeometric_weight(table: &Table) -> f64 {
    log_weight(table.counts())
}

fn log_weight(counts: &[u64]) -> f64 {
    -counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

/// One Metropolis-Hastings step in place. Returns whether the move was
/// accepted.
///
/// A move and a sign are drawn uniformly and `u` uniformly on `[0, 1)`;
/// all three are drawn on every step so the random stream does not depend
/// on the state.
pub fn mh_step_in_place<R: Rng>(state: &mut [u64], basis: &MarkovBasis, rng: &mut R) -> bool {
    if basis.is_empty() {
        return false;
    }
    let m = &basis.moves()[rng.random_range(0..basis.len())];
    let sign: i64 = if rng.random::<bool>() { 1 } else { -1 };
    let u: f64 = rng.random();
    let mut log_ratio = 0.0;
    for (k, &d) in m.as_slice().iter().enumerate() {
        if d == 0 {
            continue;
        }
        let next = state[k] as i64 + sign * d;
        if next < 0 {
            return false;
        }
        log_ratio += ln_factorial(state[k]) - ln_factorial(next as u64);
    }
    if log_ratio >= 0.0 || log_ratio.exp() > u {
        for (k, &d) in m.as_slice().iter().enumerate() {
            if d != 0 {
                state[k] = (state[k] as i64 + sign * d) as u64;
            }
        }
        true
    } else {
        false
    }
}

/// One Metropolis-Hastings step from `current`.
pub fn mh_step<R: Rng>(current: &Table, basis: &MarkovBasis, rng: &mut R) -> Table {
    let mut state = current.counts().to_vec();
    mh_step_in_place(&mut state, basis, rng);
    current.with_counts(state).expect("moves preserve the total")
}

/// LRT statistic of tables in one fiber. The base fit is constant on the
/// fiber, so only the augmented model is refitted.
struct FiberStatistic<'a> {
    base_fit: &'a [f64],
    augmented: &'a Fitter,
}

impl FiberStatistic<'_> {
    fn eval(&self, counts: &[u64]) -> Option<f64> {
        let fit = self.augmented.fit(counts).ok()?;
        g2_counts(counts, self.base_fit, &fit.fitted).ok().map(|g| g.max(0.0))
    }
}

/// Statistics are compared after rounding to 1e-12.
fn at_least(stat: f64, observed: f64) -> bool {
    if stat.is_infinite() {
        return true;
    }
    (stat * 1e12).round() >= (observed * 1e12).round()
}

/// Per-replicate diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replicate: usize,
    pub statistic: f64,
    pub accepted_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutcome {
    pub result: TestResult,
    pub config: SamplerConfig,
    pub exceed: usize,
    pub failed_replicates: usize,
    pub acceptance_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

struct ChainSummary {
    exceed: usize,
    failed: usize,
    accepted: u64,
    steps: u64,
    trace: Vec<TraceRow>,
}

/// Monte Carlo p-value of the likelihood-ratio test of `a` against
/// `augmented`, walking the fiber of the base model from the observed table.
pub fn mc_pvalue_lrt(
    table: &Table,
    a: &DesignMatrix,
    augmented: &DesignMatrix,
    basis: &MarkovBasis,
    cfg: &SamplerConfig,
) -> Result<McOutcome> {
    mc_pvalue_lrt_traced(table, a, augmented, basis, cfg, false)
}

pub fn mc_pvalue_lrt_traced(
    table: &Table,
    a: &DesignMatrix,
    augmented: &DesignMatrix,
    basis: &MarkovBasis,
    cfg: &SamplerConfig,
    keep_trace: bool,
) -> Result<McOutcome> {
    cfg.validate()?;
    let df = validate_augmentation(a, augmented)?;
    if basis.source().num_cells() != a.num_cells() {
        return Err(Error::arg("the Markov basis belongs to a different table shape"));
    }
    let base = Fitter::new(a)?.fit(table.counts())?;
    let aug_fitter = Fitter::new(augmented)?;
    let aug = aug_fitter.fit(table.counts())?;
    let observed = g2_counts(table.counts(), &base.fitted, &aug.fitted)?.max(0.0);
    let stat = FiberStatistic {
        base_fit: &base.fitted,
        augmented: &aug_fitter,
    };

    let run_chain = |c: usize| -> ChainSummary {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(c as u64));
        let mut state = table.counts().to_vec();
        let mut cache: HashMap<Vec<u64>, Option<f64>> = HashMap::new();
        let mut summary = ChainSummary {
            exceed: 0,
            failed: 0,
            accepted: 0,
            steps: 0,
            trace: Vec::new(),
        };
        for _ in 0..cfg.burn_in {
            summary.accepted += u64::from(mh_step_in_place(&mut state, basis, &mut rng));
            summary.steps += 1;
        }
        for r in 0..cfg.replicates_of_chain(c) {
            for _ in 0..cfg.thin {
                summary.accepted += u64::from(mh_step_in_place(&mut state, basis, &mut rng));
                summary.steps += 1;
            }
            debug_assert_eq!(a.sufficient_statistic(&state), a.sufficient_statistic(table.counts()));
            let value = *cache
                .entry(state.clone())
                .or_insert_with(|| stat.eval(&state));
            let value = value.unwrap_or_else(|| {
                summary.failed += 1;
                f64::INFINITY
            });
            if at_least(value, observed) {
                summary.exceed += 1;
            }
            if keep_trace {
                summary.trace.push(TraceRow {
                    replicate: r,
                    statistic: value,
                    accepted_steps: summary.accepted,
                });
            }
        }
        summary
    };

    let chains: Vec<ChainSummary> = run_chains(cfg.chains, &run_chain);
    let mut exceed = 0;
    let mut failed = 0;
    let mut accepted = 0;
    let mut steps = 0;
    let mut trace = Vec::new();
    for ch in chains {
        exceed += ch.exceed;
        failed += ch.failed;
        accepted += ch.accepted;
        steps += ch.steps;
        let offset = trace.len();
        trace.extend(ch.trace.into_iter().map(|mut t| {
            t.replicate += offset;
            t
        }));
    }
    let b = cfg.replicates;
    let warning = (failed as f64 > FAILURE_WARNING_RATE * b as f64).then(|| {
        format!("{failed} of {b} replicate fits failed and were counted as extreme")
    });
    Ok(McOutcome {
        result: TestResult {
            statistic: observed,
            df,
            p_asymptotic: chisq_sf(observed, df),
            p_monte_carlo: Some(exceed as f64 / b as f64),
            replicates: Some(b),
            seed: Some(cfg.seed),
        },
        config: cfg.clone(),
        exceed,
        failed_replicates: failed,
        acceptance_rate: if steps == 0 { 0.0 } else { accepted as f64 / steps as f64 },
        warning,
        trace,
    })
}

#[cfg(feature = "parallel")]
fn run_chains<F: Fn(usize) -> ChainSummary + Sync>(n: usize, f: &F) -> Vec<ChainSummary> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_chains<F: Fn(usize) -> ChainSummary>(n: usize, f: &F) -> Vec<ChainSummary> {
    (0..n).map(f).collect()
}

/// Writes `replicate,statistic,accepted_steps` rows.
pub fn write_trace<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "replicate,statistic,accepted_steps")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.replicate + 1, r.statistic, r.accepted_steps)?;
    }
    Ok(())
}

/// Every non-negative integer table with the sufficient statistic of
/// `table`, in lexicographic order of the flat counts (descending).
pub fn enumerate_fiber(table: &Table, a: &DesignMatrix, cap: usize) -> Result<Vec<Table>> {
    let counts = enumerate_fiber_counts(table.counts(), a, cap)?;
    counts.into_iter().map(|c| table.with_counts(c)).collect()
}

pub fn enumerate_fiber_counts(observed: &[u64], a: &DesignMatrix, cap: usize) -> Result<Vec<Vec<u64>>> {
    let k = a.num_cells();
    if observed.len() != k {
        return Err(Error::arg("table and design differ in cell count"));
    }
    let d = a.num_cols();
    let target = a.sufficient_statistic(observed);
    let uncovered: Vec<usize> = (0..k).filter(|&i| a.row(i).iter().all(|&x| x == 0)).collect();
    if !uncovered.is_empty() {
        return Err(Error::arg(format!(
            "cell {} is not constrained by the design, the fiber is infinite",
            uncovered[0] + 1
        )));
    }
    // Last cell in each column's support: its value is forced there.
    let mut last = vec![0usize; d];
    for c in 0..d {
        last[c] = (0..k).rev().find(|&i| a.get(i, c) > 0).unwrap_or(0);
    }
    let mut forced_at: Vec<Vec<usize>> = vec![Vec::new(); k];
    for c in 0..d {
        if (0..k).any(|i| a.get(i, c) > 0) {
            forced_at[last[c]].push(c);
        }
    }
    struct Search<'a> {
        a: &'a DesignMatrix,
        forced_at: &'a [Vec<usize>],
        remaining: Vec<u64>,
        cur: Vec<u64>,
        out: Vec<Vec<u64>>,
        cap: usize,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize) -> Result<()> {
            let k = self.cur.len();
            if i == k {
                if self.remaining.iter().all(|&r| r == 0) {
                    if self.out.len() >= self.cap {
                        return Err(Error::Resource(format!(
                            "fiber has more than {} tables",
                            self.cap
                        )));
                    }
                    self.out.push(self.cur.clone());
                }
                return Ok(());
            }
            let row = self.a.row(i).to_vec();
            let mut hi = u64::MAX;
            for (c, &w) in row.iter().enumerate() {
                if w > 0 {
                    hi = hi.min(self.remaining[c] / w as u64);
                }
            }
            let mut lo = 0;
            for &c in &self.forced_at[i] {
                let w = row[c] as u64;
                if self.remaining[c] % w != 0 {
                    return Ok(());
                }
                let v = self.remaining[c] / w;
                if v > hi || (lo > 0 && v != lo) {
                    return Ok(());
                }
                lo = v;
                hi = v;
            }
            for v in (lo..=hi).rev() {
                for (c, &w) in row.iter().enumerate() {
                    self.remaining[c] -= v * w as u64;
                }
                self.cur[i] = v;
                let r = self.go(i + 1);
                for (c, &w) in row.iter().enumerate() {
                    self.remaining[c] += v * w as u64;
                }
                r?;
            }
            self.cur[i] = 0;
            Ok(())
        }
    }
    let mut s = Search {
        a,
        forced_at: &forced_at,
        remaining: target,
        cur: vec![0; k],
        out: Vec::new(),
        cap,
    };
    s.go(0)?;
    Ok(s.out)
}

/// Exact conditional p-value of the likelihood-ratio test by enumeration.
pub fn exact_pvalue_enumerated(table: &Table, a: &DesignMatrix, augmented: &DesignMatrix, cap: usize) -> Result<f64> {
    validate_augmentation(a, augmented)?;
    let fiber = enumerate_fiber_counts(table.counts(), a, cap)?;
    let base = Fitter::new(a)?.fit(table.counts())?;
    let aug_fitter = Fitter::new(augmented)?;
    let stat = FiberStatistic {
        base_fit: &base.fitted,
        augmented: &aug_fitter,
    };
    let observed = stat
        .eval(table.counts())
        .ok_or_else(|| Error::Evaluation("observed statistic is undefined".into()))?;
    let logs: Vec<f64> = fiber.iter().map(|f| log_weight(f)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut tail = 0.0;
    for (f, lw) in fiber.iter().zip(&logs) {
        let w = (lw - top).exp();
        total += w;
        if at_least(stat.eval(f).unwrap_or(f64::INFINITY), observed) {
            tail += w;
        }
    }
    Ok((tail / total).min(1.0))
}

/// Hypergeometric probabilities of the enumerated fiber, in its order.
pub fn hypergeometric_probabilities(fiber: &[Vec<u64>]) -> Vec<f64> {
    let logs: Vec<f64> = fiber.iter().map(|f| log_weight(f)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
