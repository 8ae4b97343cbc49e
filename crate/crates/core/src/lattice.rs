//! Exact integer linear algebra: Hermite normal form, integer kernels and
//! ranks over the rationals. Nothing in here rounds.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Dense row-major matrix of arbitrary-precision integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from rows of machine integers. All rows must have the
    /// same length; `cols` is taken from the first row (0 if there are none).
    pub fn from_rows<T: Copy + Into<BigInt>>(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            data.extend(r.iter().map(|&x| x.into()));
        }
        IntMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[BigInt] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Entries as `i64`, failing if any entry does not fit.
    pub fn to_i64_rows(&self) -> Result<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .map(|x| {
                        x.to_i64()
                            .ok_or_else(|| Error::Overflow(format!("entry {x} exceeds i64")))
                    })
                    .collect()
            })
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// row[dst] -= q * row[src]
    fn sub_row_multiple(&mut self, dst: usize, src: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for c in 0..self.cols {
            let s = &self.data[src * self.cols + c];
            if s.is_zero() {
                continue;
            }
            let delta = q * s;
            self.data[dst * self.cols + c] -= delta;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for c in 0..self.cols {
            let v = &mut self.data[r * self.cols + c];
            *v = -std::mem::take(v);
        }
    }

    /// Determinant by fraction-free elimination. Square matrices only.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut m = self.clone();
        let mut prev = BigInt::one();
        let mut sign = BigInt::one();
        for k in 0..n {
            let Some(p) = (k..n).find(|&i| !m.get(i, k).is_zero()) else {
                return BigInt::zero();
            };
            if p != k {
                m.swap_rows(p, k);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (m.get(k, k) * m.get(i, j) - m.get(i, k) * m.get(k, j)) / &prev;
                    m.set(i, j, v);
                }
                m.set(i, k, BigInt::zero());
            }
            prev = m.get(k, k).clone();
        }
        if n == 0 {
            BigInt::one()
        } else {
            sign * m.get(n - 1, n - 1)
        }
    }
}

/// Row-style Hermite normal form.
///
/// Returns `(H, U)` with `U * M = H`, `U` unimodular, `H` in row echelon
/// form with positive pivots and entries above each pivot reduced into
/// `[0, pivot)`. Pivots are chosen by smallest absolute value.
pub fn hermite_normal_form(m: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let mut h = m.clone();
    let mut u = IntMatrix::identity(m.rows);
    let mut pivot_row = 0;
    for col in 0..h.cols {
        if pivot_row == h.rows {
            break;
        }
        let mut found = false;
        loop {
            let pick = (pivot_row..h.rows)
                .filter(|&i| !h.get(i, col).is_zero())
                .min_by(|&a, &b| h.get(a, col).abs().cmp(&h.get(b, col).abs()));
            let Some(pick) = pick else { break };
            found = true;
            h.swap_rows(pick, pivot_row);
            u.swap_rows(pick, pivot_row);
            let mut clean = true;
            for i in pivot_row + 1..h.rows {
                if h.get(i, col).is_zero() {
                    continue;
                }
                let q = h.get(i, col).div_floor(h.get(pivot_row, col));
                h.sub_row_multiple(i, pivot_row, &q);
                u.sub_row_multiple(i, pivot_row, &q);
                if !h.get(i, col).is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if !found {
            continue;
        }
        if h.get(pivot_row, col).is_negative() {
            h.negate_row(pivot_row);
            u.negate_row(pivot_row);
        }
        for i in 0..pivot_row {
            let q = h.get(i, col).div_floor(h.get(pivot_row, col));
            h.sub_row_multiple(i, pivot_row, &q);
            u.sub_row_multiple(i, pivot_row, &q);
        }
        pivot_row += 1;
    }
    (h, u)
}

/// Rank over the rationals by Bareiss fraction-free elimination.
pub fn exact_rank(m: &IntMatrix) -> usize {
    let mut a = m.clone();
    let (rows, cols) = (a.rows, a.cols);
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a.get(i, c).is_zero()) else {
            continue;
        };
        a.swap_rows(p, r);
        for i in r + 1..rows {
            for j in c + 1..cols {
                let v = (a.get(r, c) * a.get(i, j) - a.get(i, c) * a.get(r, j)) / &prev;
                a.set(i, j, v);
            }
            a.set(i, c, BigInt::zero());
        }
        prev = a.get(r, c).clone();
        r += 1;
    }
    r
}

/// A Z-basis of an integer lattice, one vector per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBasis {
    pub vectors: Vec<Vec<i64>>,
}

impl LatticeBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Basis of `{v in Z^K : A^t v = 0}` for a `K x d` matrix `A`.
///
/// The rows of the unimodular transform that annihilate `A` form the basis;
/// they are then size-reduced against each other.
pub fn integer_kernel(a: &IntMatrix) -> Result<LatticeBasis> {
    let (h, u) = hermite_normal_form(a);
    let rank = (0..h.rows())
        .take_while(|&r| h.row(r).iter().any(|x| !x.is_zero()))
        .count();
    let mut vectors = Vec::with_capacity(a.rows() - rank);
    for r in rank..u.rows() {
        let v = u
            .row(r)
            .iter()
            .map(|x| {
                x.to_i64()
                    .ok_or_else(|| Error::Overflow(format!("kernel entry {x} exceeds i64")))
            })
            .collect::<Result<Vec<_>>>()?;
        vectors.push(v);
    }
    size_reduce(&mut vectors)?;
    Ok(LatticeBasis { vectors })
}

fn dot(a: &[i64], b: &[i64]) -> Result<i128> {
    a.iter().zip(b).try_fold(0i128, |acc, (&x, &y)| {
        acc.checked_add(x as i128 * y as i128)
            .ok_or_else(|| Error::Overflow("dot product".into()))
    })
}

/// Pairwise reduction `v_i -= round(<v_i,v_j>/<v_j,v_j>) v_j` until no
/// vector gets shorter. Unimodular, so the lattice is unchanged.
fn size_reduce(vectors: &mut [Vec<i64>]) -> Result<()> {
    let n = vectors.len();
    for _round in 0..64 {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let njj = dot(&vectors[j], &vectors[j])?;
                if njj == 0 {
                    continue;
                }
                let nij = dot(&vectors[i], &vectors[j])?;
                // nearest integer to nij / njj
                let q = (2 * nij + njj).div_euclid(2 * njj);
                if q == 0 {
                    continue;
                }
                let q = i64::try_from(q).map_err(|_| Error::Overflow("reduction factor".into()))?;
                let (vi, vj) = if i < j {
                    let (lo, hi) = vectors.split_at_mut(j);
                    (&mut lo[i], &hi[0])
                } else {
                    let (lo, hi) = vectors.split_at_mut(i);
                    (&mut hi[0], &lo[j])
                };
                let before = dot(vi, vi)?;
                let candidate: Vec<i64> = vi
                    .iter()
                    .zip(vj.iter())
                    .map(|(&x, &y)| {
                        y.checked_mul(q)
                            .and_then(|p| x.checked_sub(p))
                            .ok_or_else(|| Error::Overflow("size reduction".into()))
                    })
                    .collect::<Result<_>>()?;
                if dot(&candidate, &candidate)? < before {
                    *vi = candidate;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a_ind_3x3() -> IntMatrix {
        IntMatrix::from_rows(&[
            vec![1i64, 1, 0, 1, 0],
            vec![1, 1, 0, 0, 1],
            vec![1, 1, 0, 0, 0],
            vec![1, 0, 1, 1, 0],
            vec![1, 0, 1, 0, 1],
            vec![1, 0, 1, 0, 0],
            vec![1, 0, 0, 1, 0],
            vec![1, 0, 0, 0, 1],
            vec![1, 0, 0, 0, 0],
        ])
    }

    fn a_qind_3x3() -> IntMatrix {
        IntMatrix::from_rows(&[
            vec![1i64, 1, 0, 1, 0, 1, 0, 0],
            vec![1, 1, 0, 0, 1, 0, 0, 0],
            vec![1, 1, 0, 0, 0, 0, 0, 0],
            vec![1, 0, 1, 1, 0, 0, 0, 0],
            vec![1, 0, 1, 0, 1, 0, 1, 0],
            vec![1, 0, 1, 0, 0, 0, 0, 0],
            vec![1, 0, 0, 1, 0, 0, 0, 0],
            vec![1, 0, 0, 0, 1, 0, 0, 0],
            vec![1, 0, 0, 0, 0, 0, 0, 1],
        ])
    }

    /// Rank by rational Gaussian elimination on f64-free fractions: an
    /// independent oracle using `num_rational`-style i128 cross-multiplication.
    fn rank_oracle(rows: &[Vec<i64>]) -> usize {
        let mut m: Vec<Vec<i128>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| x as i128).collect())
            .collect();
        let cols = m.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else {
                continue;
            };
            m.swap(p, rank);
            for i in 0..m.len() {
                if i != rank && m[i][c] != 0 {
                    let (a, b) = (m[rank][c], m[i][c]);
                    for j in 0..cols {
                        m[i][j] = m[i][j] * a - m[rank][j] * b;
                    }
                    let g = m[i].iter().fold(0i128, |g, &x| num_integer::gcd(g, x));
                    if g > 1 {
                        m[i].iter_mut().for_each(|x| *x /= g);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn rank_of_printed_matrices() {
        let ai = a_ind_3x3();
        let aq = a_qind_3x3();
        assert_eq!(rank_oracle(&ai.to_i64_rows().unwrap()), 5);
        assert_eq!(rank_oracle(&aq.to_i64_rows().unwrap()), 8);
        assert_eq!(exact_rank(&ai), 5);
        assert_eq!(exact_rank(&aq), 8);
        assert_eq!(exact_rank(&IntMatrix::zeros(3, 4)), 0);
    }

    #[test]
    fn hnf_identity_and_zero() {
        let id = IntMatrix::identity(3);
        let (h, u) = hermite_normal_form(&id);
        assert_eq!(h, id);
        assert_eq!(u, id);
        let z = IntMatrix::zeros(2, 3);
        let (h, u) = hermite_normal_form(&z);
        assert_eq!(h, z);
        assert_eq!(u, IntMatrix::identity(2));
    }

    #[test]
    fn hnf_small_example() {
        let m = IntMatrix::from_rows(&[vec![2i64, 4], vec![6, 8]]);
        let (h, u) = hermite_normal_form(&m);
        assert_eq!(u.mul(&m), h);
        assert_eq!(u.determinant().abs(), BigInt::one());
        // Entries above pivots reduced into [0, pivot): (2,4) becomes (2,0).
        assert_eq!(h, IntMatrix::from_rows(&[vec![2i64, 0], vec![0, 4]]));
    }

    #[test]
    fn kernel_of_independence() {
        let a = a_ind_3x3();
        let basis = integer_kernel(&a).unwrap();
        assert_eq!(basis.len(), 4);
        let at = a.transpose();
        for v in &basis.vectors {
            let col = IntMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>());
            let prod = at.mul(&col);
            assert!((0..prod.rows()).all(|r| prod.get(r, 0).is_zero()));
            for i in 0..3 {
                assert_eq!(v[3 * i..3 * i + 3].iter().sum::<i64>(), 0);
                assert_eq!((0..3).map(|j| v[3 * j + i]).sum::<i64>(), 0);
            }
        }
    }

    #[test]
    fn kernel_of_quasi_independence_is_the_cycle() {
        let basis = integer_kernel(&a_qind_3x3()).unwrap();
        assert_eq!(basis.len(), 1);
        // p12 p23 p31 - p13 p32 p21 in flat indices 1,5,6 vs 2,7,3
        let expected = [0i64, 1, -1, -1, 0, 1, 1, -1, 0];
        let v = &basis.vectors[0];
        let neg: Vec<i64> = expected.iter().map(|x| -x).collect();
        assert!(v.as_slice() == expected || *v == neg, "got {v:?}");
    }

    #[test]
    fn kernel_of_full_rank_is_empty() {
        assert!(integer_kernel(&IntMatrix::identity(5)).unwrap().is_empty());
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..7, 1usize..5).prop_flat_map(|(r, c)| {
            prop::collection::vec(prop::collection::vec(-4i64..5, c), r)
        })
    }

    proptest! {
        #[test]
        fn hnf_is_unimodular_and_idempotent(rows in arb_matrix()) {
            let m = IntMatrix::from_rows(&rows);
            let (h, u) = hermite_normal_form(&m);
            prop_assert_eq!(u.mul(&m), h.clone());
            prop_assert_eq!(u.determinant().abs(), BigInt::one());
            let (h2, _) = hermite_normal_form(&h);
            prop_assert_eq!(h2, h);
        }

        #[test]
        fn rank_nullity(rows in arb_matrix()) {
            let m = IntMatrix::from_rows(&rows);
            let rank = exact_rank(&m);
            prop_assert_eq!(rank, rank_oracle(&rows));
            let kernel = integer_kernel(&m).unwrap();
            prop_assert_eq!(rank + kernel.len(), m.rows());
            let mt = m.transpose();
            for v in &kernel.vectors {
                for r in 0..mt.rows() {
                    let s: BigInt = mt.row(r).iter().zip(v).map(|(a, &b)| a * b).sum();
                    prop_assert!(s.is_zero());
                }
            }
        }
    }
}
