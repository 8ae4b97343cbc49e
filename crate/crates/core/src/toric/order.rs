use std::cmp::Ordering;

/// Graded reverse lexicographic order over a permutation of the variables.
///
/// `vars[0]` is the most expensive variable and `vars[n-1]` the cheapest.
/// With the cheapest variable `x`, a homogeneous polynomial is divisible by
/// `x` exactly when its leading term is, which is what saturation relies on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermOrder {
    vars: Vec<usize>,
}

impl TermOrder {
    /// `x_0 > x_1 > ... > x_{n-1}`.
    pub fn grevlex(n: usize) -> Self {
        TermOrder {
            vars: (0..n).collect(),
        }
    }

    /// Ascending variable order with `last` moved to the cheapest position.
    pub fn grevlex_with_last(n: usize, last: usize) -> Self {
        assert!(last < n, "variable {last} out of range");
        let mut vars: Vec<usize> = (0..n).filter(|&v| v != last).collect();
        vars.push(last);
        TermOrder { vars }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn cheapest(&self) -> Option<usize> {
        self.vars.last().copied()
    }

    /// Compares two exponent vectors.
    pub fn cmp(&self, a: &[u32], b: &[u32]) -> Ordering {
        let da: u64 = a.iter().map(|&x| x as u64).sum();
        let db: u64 = b.iter().map(|&x| x as u64).sum();
        self.cmp_with_degrees(a, da, b, db)
    }

    pub(crate) fn cmp_with_degrees(&self, a: &[u32], da: u64, b: &[u32], db: u64) -> Ordering {
        match da.cmp(&db) {
            Ordering::Equal => {}
            other => return other,
        }
        for &v in self.vars.iter().rev() {
            match a[v].cmp(&b[v]) {
                Ordering::Equal => continue,
                // smaller exponent in the cheapest differing variable wins
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
            }
        }
        Ordering::Equal
    }
}
