use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;

/// `p^plus - p^minus` with unit coefficients.
///
/// Generators of toric ideals are pure (disjoint supports); intermediate
/// Gröbner elements and saturation inputs may share a monomial factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Binomial {
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl Binomial {
    pub fn new(plus: Vec<u32>, minus: Vec<u32>) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(Error::arg("binomial terms have different lengths"));
        }
        if plus == minus {
            return Err(Error::arg("binomial is identically zero"));
        }
        Ok(Binomial { plus, minus })
    }

    /// Binomial with `plus = max(v, 0)` and `minus = max(-v, 0)`.
    pub fn from_log_vector(v: &[i64]) -> Result<Self> {
        if v.iter().all(|&x| x == 0) {
            return Err(Error::arg("zero vector has no binomial"));
        }
        let conv = |x: i64| {
            u32::try_from(x).map_err(|_| Error::Overflow(format!("exponent {x} exceeds u32")))
        };
        let plus = v.iter().map(|&x| conv(x.max(0))).collect::<Result<_>>()?;
        let minus = v.iter().map(|&x| conv((-x).max(0))).collect::<Result<_>>()?;
        Ok(Binomial { plus, minus })
    }

    /// Log-vector `plus - minus`.
    pub fn log_vector(&self) -> Vec<i64> {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(&a, &b)| a as i64 - b as i64)
            .collect()
    }

    pub fn num_vars(&self) -> usize {
        self.plus.len()
    }

    pub fn is_pure(&self) -> bool {
        self.plus.iter().zip(&self.minus).all(|(&a, &b)| a == 0 || b == 0)
    }

    /// Divides out the common monomial factor.
    pub fn to_pure(&self) -> Binomial {
        let (plus, minus) = self
            .plus
            .iter()
            .zip(&self.minus)
            .map(|(&a, &b)| {
                let c = a.min(b);
                (a - c, b - c)
            })
            .unzip();
        Binomial { plus, minus }
    }

    pub fn degree(&self) -> u32 {
        let dp: u32 = self.plus.iter().sum();
        let dm: u32 = self.minus.iter().sum();
        dp.max(dm)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.plus.iter().sum::<u32>() == self.minus.iter().sum::<u32>()
    }

    /// Swaps the two terms.
    pub fn negated(&self) -> Binomial {
        Binomial {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    pub fn involves(&self, var: usize) -> bool {
        self.plus[var] > 0 || self.minus[var] > 0
    }

    /// `p^plus - p^minus` at a point.
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        let mono = |e: &[u32]| {
            e.iter()
                .zip(point)
                .filter(|(&k, _)| k > 0)
                .map(|(&k, &x)| x.powi(k as i32))
                .product::<f64>()
        };
        mono(&self.plus) - mono(&self.minus)
    }

    /// Renders with caller-supplied variable names, e.g. `p12*p21 - p11*p22`.
    pub fn display_with<F: Fn(usize) -> String>(&self, name: F) -> String {
        let mono = |e: &[u32]| {
            let parts: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    if k == 1 {
                        name(i)
                    } else {
                        format!("{}^{}", name(i), k)
                    }
                })
                .collect();
            if parts.is_empty() {
                "1".to_string()
            } else {
                parts.join("*")
            }
        };
        format!("{} - {}", mono(&self.plus), mono(&self.minus))
    }
}

impl fmt::Display for Binomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with(|i| format!("p{}", i + 1)))
    }
}

/// One binomial per lattice basis vector.
pub fn lattice_to_binomials(basis: &LatticeBasis) -> Result<Vec<Binomial>> {
    basis
        .vectors
        .iter()
        .map(|v| Binomial::from_log_vector(v))
        .collect()
}
