//! Toric ideals and Markov bases.
//!
//! The toric ideal of a design matrix `A` is the lattice ideal of
//! `ker_Z(A^t)`. It is computed from a lattice basis: the basis binomials
//! generate an ideal whose saturation at the product of all variables is the
//! toric ideal. Saturation runs one variable at a time with that variable
//! cheapest in a grevlex order. The log-vectors of a minimal generating set
//! are a Markov basis.

mod binomial;
mod groebner;
mod io;
mod order;

use std::time::{Duration, Instant};

pub use binomial::{lattice_to_binomials, Binomial};
pub use groebner::{
    buchberger, buchberger_with_cap, reduces_to_zero, saturate, saturate_with_cap, GroebnerEngine,
    DEFAULT_REDUCTION_CAP,
};
pub use io::{read_moves, write_moves};
pub use order::TermOrder;

use crate::error::{Error, Result};
use crate::lattice::integer_kernel;
use crate::models::{build_hierarchical_design, DesignMatrix};
use crate::tables::TableShape;

/// Integer table `m` with `A^t m = 0`, sign-normalised so that its first
/// non-zero entry is positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    vec: Vec<i64>,
}

impl Move {
    pub fn new(mut vec: Vec<i64>) -> Result<Self> {
        let Some(&first) = vec.iter().find(|&&x| x != 0) else {
            return Err(Error::arg("a move cannot be the zero vector"));
        };
        if first < 0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        Ok(Move { vec })
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.vec
    }

    pub fn len(&self) -> usize {
        self.vec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vec.is_empty()
    }

    /// Degree of the corresponding binomial.
    pub fn degree(&self) -> i64 {
        self.vec.iter().filter(|&&x| x > 0).sum()
    }

    /// Non-zero entries as `(cell, value)`.
    pub fn sparse(&self) -> Vec<(usize, i64)> {
        self.vec
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0)
            .map(|(i, &x)| (i, x))
            .collect()
    }

    pub fn to_binomial(&self) -> Binomial {
        Binomial::from_log_vector(&self.vec).expect("moves are non-zero")
    }
}

/// Finite set of moves connecting every fiber of `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovBasis {
    moves: Vec<Move>,
    source: DesignMatrix,
}

impl MarkovBasis {
    /// Wraps externally supplied moves after checking `A^t m = 0`.
    pub fn from_moves(source: DesignMatrix, moves: Vec<Move>) -> Result<Self> {
        for (i, m) in moves.iter().enumerate() {
            if m.len() != source.num_cells() {
                return Err(Error::arg(format!(
                    "move {} has {} entries, the model has {} cells",
                    i + 1,
                    m.len(),
                    source.num_cells()
                )));
            }
            if source.apply_transpose(m.as_slice()).iter().any(|&x| x != 0) {
                return Err(Error::arg(format!(
                    "move {} is not in the kernel of the design matrix",
                    i + 1
                )));
            }
        }
        let mut moves = moves;
        moves.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| b.cmp(a)));
        moves.dedup();
        Ok(MarkovBasis { moves, source })
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn source(&self) -> &DesignMatrix {
        &self.source
    }

    /// Binomial generators of the toric ideal.
    pub fn binomials(&self) -> Vec<Binomial> {
        self.moves.iter().map(Move::to_binomial).collect()
    }
}

/// Knobs for the symbolic pipeline.
#[derive(Debug, Clone)]
pub struct MarkovOptions {
    /// Cap on monomial reductions per Gröbner basis.
    pub reduction_cap: u64,
    /// Split the cells into blocks on which the column space decomposes and
    /// treat each block separately.
    pub split_blocks: bool,
    /// Give up after this much wall time.
    pub time_limit: Option<Duration>,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        MarkovOptions {
            reduction_cap: DEFAULT_REDUCTION_CAP,
            split_blocks: true,
            time_limit: None,
        }
    }
}

/// Markov basis of the toric model of `a`, computed from scratch.
pub fn markov_basis(a: &DesignMatrix) -> Result<MarkovBasis> {
    markov_basis_with(a, &MarkovOptions::default())
}

pub fn markov_basis_with(a: &DesignMatrix, opts: &MarkovOptions) -> Result<MarkovBasis> {
    let gens = toric_generators(a, opts)?;
    let moves = gens
        .iter()
        .map(|g| Move::new(g.log_vector()))
        .collect::<Result<Vec<_>>>()?;
    MarkovBasis::from_moves(a.clone(), moves)
}

/// Minimal binomial generating set of the toric ideal of `a`.
pub fn toric_generators(a: &DesignMatrix, opts: &MarkovOptions) -> Result<Vec<Binomial>> {
    let k = a.num_cells();
    if a.rank() == k {
        return Ok(Vec::new());
    }
    let started = Instant::now();
    let blocks = if opts.split_blocks {
        column_space_blocks(a)
    } else {
        vec![(0..k).collect()]
    };
    let mut out = Vec::new();
    for block in blocks {
        let sub = a.row_submatrix(&block);
        if sub.rank() == block.len() {
            continue;
        }
        for g in block_generators(&sub, opts, started)? {
            let mut plus = vec![0u32; k];
            let mut minus = vec![0u32; k];
            for (local, &cell) in block.iter().enumerate() {
                plus[cell] = g.plus[local];
                minus[cell] = g.minus[local];
            }
            out.push(Binomial { plus, minus });
        }
    }
    Ok(out)
}

fn check_time(opts: &MarkovOptions, started: Instant) -> Result<()> {
    if let Some(limit) = opts.time_limit {
        if started.elapsed() > limit {
            return Err(Error::Resource(format!(
                "Markov basis computation exceeded {:.0?}",
                limit
            )));
        }
    }
    Ok(())
}

fn block_generators(a: &DesignMatrix, opts: &MarkovOptions, started: Instant) -> Result<Vec<Binomial>> {
    let basis = integer_kernel(&a.to_int_matrix())?;
    let mut gens = lattice_to_binomials(&basis)?;
    for var in 0..a.num_cells() {
        check_time(opts, started)?;
        gens = saturate_with_cap(&gens, var, opts.reduction_cap)?;
    }
    // Saturated at every variable, so common factors can be divided out.
    let pure: Vec<Binomial> = gens.iter().map(Binomial::to_pure).collect();
    minimalize(&pure, opts.reduction_cap)
}

/// Drops generators lying in the ideal of the others.
///
/// Candidates are taken by ascending degree, ties by ascending exponent of
/// the grevlex leading term; a candidate is kept iff it does not reduce to
/// zero modulo a degree-truncated Gröbner basis of those already kept. For
/// homogeneous ideals this yields a minimal generating set.
pub fn minimalize(gens: &[Binomial], cap: u64) -> Result<Vec<Binomial>> {
    let Some(first) = gens.first() else {
        return Ok(Vec::new());
    };
    let order = TermOrder::grevlex(first.num_vars());
    let mut oriented: Vec<Binomial> = gens
        .iter()
        .filter(|g| g.plus != g.minus)
        .map(|g| {
            if order.cmp(&g.plus, &g.minus) == std::cmp::Ordering::Less {
                g.negated()
            } else {
                g.clone()
            }
        })
        .collect();
    oriented.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| a.plus.cmp(&b.plus)));
    oriented.dedup();

    let mut engine = GroebnerEngine::with_cap(order, cap);
    let mut kept = Vec::new();
    for g in oriented {
        engine.complete(Some(g.degree() as u64))?;
        if engine.reduce(&g)?.is_some() {
            engine.insert(&g)?;
            kept.push(g);
        }
    }
    Ok(kept)
}

/// Partition of the cells such that the column space of `a` is the direct
/// sum of its restrictions to the parts. The toric ideal then splits into
/// ideals in disjoint variables.
pub fn column_space_blocks(a: &DesignMatrix) -> Vec<Vec<usize>> {
    let k = a.num_cells();
    let mut candidates: Vec<Vec<bool>> = Vec::new();
    for c in 0..a.num_cols() {
        let support: Vec<bool> = (0..k).map(|i| a.get(i, c) != 0).collect();
        let complement: Vec<bool> = support.iter().map(|&x| !x).collect();
        for cand in [support, complement] {
            let n = cand.iter().filter(|&&x| x).count();
            if n > 0 && n < k && !candidates.contains(&cand) {
                candidates.push(cand);
            }
        }
    }
    // The part labels of each cell, refined by every valid splitting set.
    let mut label: Vec<Vec<bool>> = vec![Vec::new(); k];
    for cand in candidates {
        let mut extra = a.clone();
        for c in 0..a.num_cols() {
            let col: Vec<u32> = (0..k)
                .map(|i| if cand[i] { a.get(i, c) } else { 0 })
                .collect();
            extra = extra.with_column(col, crate::models::ColumnTerm::Custom {
                name: String::from("split"),
            });
        }
        if extra.rank() == a.rank() {
            for (i, l) in label.iter_mut().enumerate() {
                l.push(cand[i]);
            }
        }
    }
    let mut blocks: Vec<(Vec<bool>, Vec<usize>)> = Vec::new();
    for (i, l) in label.into_iter().enumerate() {
        match blocks.iter_mut().find(|(key, _)| *key == l) {
            Some((_, cells)) => cells.push(i),
            None => blocks.push((l, vec![i])),
        }
    }
    blocks.into_iter().map(|(_, cells)| cells).collect()
}

/// Generators of the toric ideal after eliminating the given cells'
/// variables: its reduced Gröbner basis for grevlex with cells in ascending
/// order, expressed over all `K` cells (removed cells have exponent 0).
pub fn eliminate_cells(a: &DesignMatrix, cells: &[usize]) -> Result<Vec<Binomial>> {
    eliminate_cells_with(a, cells, &MarkovOptions::default())
}

pub fn eliminate_cells_with(a: &DesignMatrix, cells: &[usize], opts: &MarkovOptions) -> Result<Vec<Binomial>> {
    let minimal = eliminate_cells_minimal_with(a, cells, opts)?;
    if minimal.is_empty() {
        return Ok(minimal);
    }
    buchberger_with_cap(&minimal, &TermOrder::grevlex(a.num_cells()), opts.reduction_cap)
}

/// Minimal generating set of the eliminated ideal, over all `K` cells.
pub fn eliminate_cells_minimal(a: &DesignMatrix, cells: &[usize]) -> Result<Vec<Binomial>> {
    eliminate_cells_minimal_with(a, cells, &MarkovOptions::default())
}

pub fn eliminate_cells_minimal_with(
    a: &DesignMatrix,
    cells: &[usize],
    opts: &MarkovOptions,
) -> Result<Vec<Binomial>> {
    let k = a.num_cells();
    let mut removed = vec![false; k];
    for &c in cells {
        if c >= k {
            return Err(Error::arg(format!("cell {c} outside 0..{k}")));
        }
        removed[c] = true;
    }
    let keep: Vec<usize> = (0..k).filter(|&c| !removed[c]).collect();
    if keep.is_empty() {
        return Err(Error::arg("cannot eliminate every cell"));
    }
    let sub = a.row_submatrix(&keep);
    let gens = toric_generators(&sub, opts)?;
    Ok(gens
        .into_iter()
        .map(|g| {
            let mut plus = vec![0u32; k];
            let mut minus = vec![0u32; k];
            for (local, &cell) in keep.iter().enumerate() {
                plus[cell] = g.plus[local];
                minus[cell] = g.minus[local];
            }
            Binomial { plus, minus }
        })
        .collect())
}

/// Known Markov bases that need no symbolic computation. Currently: two-way
/// independence, recognised by column space, whose basis is every basic
/// 2x2 move.
pub fn preset_basis(a: &DesignMatrix) -> Option<MarkovBasis> {
    let k = a.num_cells();
    for rows in 2..=k / 2 {
        if k % rows != 0 {
            continue;
        }
        let cols = k / rows;
        let Ok(shape) = TableShape::new(vec![rows, cols]) else {
            continue;
        };
        let Ok(ind) = build_hierarchical_design(&shape, &[vec![0], vec![1]]) else {
            continue;
        };
        if ind.rank() != a.rank() || !ind.column_space_within(a) {
            continue;
        }
        let mut moves = Vec::with_capacity(rows * (rows - 1) / 2 * cols * (cols - 1) / 2);
        for i1 in 0..rows {
            for i2 in i1 + 1..rows {
                for j1 in 0..cols {
                    for j2 in j1 + 1..cols {
                        let mut v = vec![0i64; k];
                        v[i1 * cols + j1] = 1;
                        v[i2 * cols + j2] = 1;
                        v[i1 * cols + j2] = -1;
                        v[i2 * cols + j1] = -1;
                        moves.push(Move::new(v).expect("non-zero"));
                    }
                }
            }
        }
        return MarkovBasis::from_moves(a.clone(), moves).ok();
    }
    None
}
