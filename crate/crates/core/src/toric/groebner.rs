//! Buchberger's algorithm specialised to binomials with unit coefficients.
//!
//! S-polynomials and remainders of such binomials are again binomials, and
//! the normal form of `x^u - x^w` is `NF(x^u) - NF(x^w)`, so all reduction
//! happens on single monomials. Pairs are pruned with the product and chain
//! criteria in the Gebauer-Möller formulation and processed by increasing
//! lcm degree, which also makes degree-truncated runs exact for homogeneous
//! input.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::binomial::Binomial;
use super::order::TermOrder;
use crate::error::{Error, Result};

/// Default cap on monomial reduction steps before giving up.
pub const DEFAULT_REDUCTION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Mono {
    exp: Vec<u32>,
    deg: u64,
    mask: u64,
}

impl Mono {
    fn new(exp: Vec<u32>) -> Self {
        let deg = exp.iter().map(|&x| x as u64).sum();
        let mask = mask_of(&exp);
        Mono { exp, deg, mask }
    }

    fn divides(&self, other: &Mono) -> bool {
        self.deg <= other.deg
            && self.mask & !other.mask == 0
            && self.exp.iter().zip(&other.exp).all(|(a, b)| a <= b)
    }

    fn lcm(&self, other: &Mono) -> Mono {
        Mono::new(
            self.exp
                .iter()
                .zip(&other.exp)
                .map(|(&a, &b)| a.max(b))
                .collect(),
        )
    }

    fn coprime(&self, other: &Mono) -> bool {
        self.mask & other.mask == 0
            || self.exp.iter().zip(&other.exp).all(|(&a, &b)| a == 0 || b == 0)
    }
}

fn mask_of(exp: &[u32]) -> u64 {
    exp.iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .fold(0u64, |m, (i, _)| m | (1u64 << (i % 64)))
}

#[derive(Debug, Clone)]
struct Poly {
    head: Mono,
    tail: Mono,
}

#[derive(Debug, Clone)]
struct Pair {
    i: usize,
    j: usize,
    lcm: Mono,
}

/// Incremental Gröbner basis of a binomial ideal under a fixed order.
#[derive(Debug, Clone)]
pub struct GroebnerEngine {
    order: TermOrder,
    polys: Vec<Poly>,
    active: Vec<usize>,
    pairs: BTreeMap<(u64, u64), Pair>,
    next_pair: u64,
    reductions: u64,
    cap: u64,
}

impl GroebnerEngine {
    pub fn new(order: TermOrder) -> Self {
        GroebnerEngine::with_cap(order, DEFAULT_REDUCTION_CAP)
    }

    pub fn with_cap(order: TermOrder, cap: u64) -> Self {
        GroebnerEngine {
            order,
            polys: Vec::new(),
            active: Vec::new(),
            pairs: BTreeMap::new(),
            next_pair: 0,
            reductions: 0,
            cap,
        }
    }

    pub fn order(&self) -> &TermOrder {
        &self.order
    }

    /// Total monomial reduction steps so far.
    pub fn reductions(&self) -> u64 {
        self.reductions
    }

    fn cmp(&self, a: &Mono, b: &Mono) -> Ordering {
        self.order.cmp_with_degrees(&a.exp, a.deg, &b.exp, b.deg)
    }

    fn normal_form(&mut self, mut m: Mono) -> Result<Mono> {
        loop {
            let reducer = self
                .active
                .iter()
                .copied()
                .find(|&g| self.polys[g].head.divides(&m));
            let Some(g) = reducer else { return Ok(m) };
            let p = &self.polys[g];
            for ((e, &h), &t) in m.exp.iter_mut().zip(&p.head.exp).zip(&p.tail.exp) {
                *e = *e - h + t;
            }
            m = Mono::new(m.exp);
            self.reductions += 1;
            if self.reductions > self.cap {
                return Err(Error::Resource(format!(
                    "Gröbner basis computation exceeded {} reduction steps",
                    self.cap
                )));
            }
        }
    }

    /// Normal form of a binomial; `None` when it reduces to zero.
    pub fn reduce(&mut self, b: &Binomial) -> Result<Option<Binomial>> {
        let a = self.normal_form(Mono::new(b.plus.clone()))?;
        let c = self.normal_form(Mono::new(b.minus.clone()))?;
        Ok(self.orient(a, c).map(|p| Binomial {
            plus: p.head.exp,
            minus: p.tail.exp,
        }))
    }

    fn orient(&self, a: Mono, b: Mono) -> Option<Poly> {
        match self.cmp(&a, &b) {
            Ordering::Equal => None,
            Ordering::Greater => Some(Poly { head: a, tail: b }),
            Ordering::Less => Some(Poly { head: b, tail: a }),
        }
    }

    /// Adds a generator. It is reduced first and dropped if it vanishes.
    pub fn insert(&mut self, b: &Binomial) -> Result<()> {
        let a = self.normal_form(Mono::new(b.plus.clone()))?;
        let c = self.normal_form(Mono::new(b.minus.clone()))?;
        if let Some(p) = self.orient(a, c) {
            self.update(p);
        }
        Ok(())
    }

    /// Gebauer-Möller update for a new element `h`.
    fn update(&mut self, h: Poly) {
        let hi = self.polys.len();
        self.polys.push(h);
        let hhead = self.polys[hi].head.clone();

        let mut candidates: Vec<(usize, Mono, bool)> = self
            .active
            .iter()
            .map(|&g| {
                let gh = &self.polys[g].head;
                (g, hhead.lcm(gh), hhead.coprime(gh))
            })
            .collect();

        // Chain criterion among the new pairs: drop (h,g1) when some other
        // new pair has an lcm properly dividing lcm(h,g1); keep one of equals.
        let mut keep = vec![true; candidates.len()];
        for a in 0..candidates.len() {
            for b in 0..candidates.len() {
                if a == b || !keep[b] {
                    continue;
                }
                let (la, lb) = (&candidates[a].1, &candidates[b].1);
                if lb.divides(la) && (la != lb || b < a) {
                    keep[a] = false;
                    break;
                }
            }
        }
        // Coprime pairs served as witnesses above; their S-polynomials reduce to zero.
        let mut fresh = Vec::new();
        for (idx, (g, l, coprime)) in candidates.drain(..).enumerate() {
            if keep[idx] && !coprime {
                fresh.push((g, l));
            }
        }

        // Old pairs made redundant by h.
        self.pairs.retain(|_, p| {
            if !hhead.divides(&p.lcm) {
                return true;
            }
            let li = self.polys[p.i].head.lcm(&hhead);
            let lj = self.polys[p.j].head.lcm(&hhead);
            li == p.lcm || lj == p.lcm
        });

        for (g, l) in fresh {
            let key = (l.deg, self.next_pair);
            self.next_pair += 1;
            self.pairs.insert(key, Pair { i: g, j: hi, lcm: l });
        }

        let polys = &self.polys;
        self.active.retain(|&g| !hhead.divides(&polys[g].head));
        self.active.push(hi);
    }

    /// Runs Buchberger until no pair with lcm degree at most `max_degree`
    /// (or none at all, when `None`) remains.
    pub fn complete(&mut self, max_degree: Option<u64>) -> Result<()> {
        loop {
            let Some((&key, _)) = self.pairs.iter().next() else {
                return Ok(());
            };
            if max_degree.is_some_and(|d| key.0 > d) {
                return Ok(());
            }
            let pair = self.pairs.remove(&key).expect("pair present");
            let (pi, pj) = (&self.polys[pair.i], &self.polys[pair.j]);
            let s1: Vec<u32> = pair
                .lcm
                .exp
                .iter()
                .zip(&pi.head.exp)
                .zip(&pi.tail.exp)
                .map(|((&l, &h), &t)| l - h + t)
                .collect();
            let s2: Vec<u32> = pair
                .lcm
                .exp
                .iter()
                .zip(&pj.head.exp)
                .zip(&pj.tail.exp)
                .map(|((&l, &h), &t)| l - h + t)
                .collect();
            let a = self.normal_form(Mono::new(s1))?;
            let b = self.normal_form(Mono::new(s2))?;
            if let Some(p) = self.orient(a, b) {
                self.update(p);
            }
        }
    }

    /// Reduced Gröbner basis of everything inserted, sorted by leading term.
    pub fn reduced_basis(&mut self) -> Result<Vec<Binomial>> {
        self.complete(None)?;
        let active = self.active.clone();
        let mut out = Vec::with_capacity(active.len());
        for g in active {
            let head = self.polys[g].head.clone();
            let tail = self.normal_form(self.polys[g].tail.clone())?;
            out.push((head, tail));
        }
        out.sort_by(|a, b| self.cmp(&a.0, &b.0));
        Ok(out
            .into_iter()
            .map(|(h, t)| Binomial {
                plus: h.exp,
                minus: t.exp,
            })
            .collect())
    }

    /// Current basis without finishing pending pairs.
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

/// Reduced Gröbner basis of the ideal generated by `gens`.
pub fn buchberger(gens: &[Binomial], order: &TermOrder) -> Result<Vec<Binomial>> {
    buchberger_with_cap(gens, order, DEFAULT_REDUCTION_CAP)
}

pub fn buchberger_with_cap(gens: &[Binomial], order: &TermOrder, cap: u64) -> Result<Vec<Binomial>> {
    let mut engine = GroebnerEngine::with_cap(order.clone(), cap);
    let mut sorted: Vec<&Binomial> = gens.iter().collect();
    // low degree first keeps intermediate bases small
    sorted.sort_by_key(|b| b.degree());
    for g in sorted {
        engine.insert(g)?;
    }
    engine.reduced_basis()
}

/// Whether `b` lies in the ideal whose Gröbner basis is `gb`.
pub fn reduces_to_zero(b: &Binomial, gb: &[Binomial], order: &TermOrder) -> Result<bool> {
    let mut engine = GroebnerEngine::new(order.clone());
    // A Gröbner basis is already closed; load it without pair processing.
    for g in gb {
        let head = Mono::new(g.plus.clone());
        let tail = Mono::new(g.minus.clone());
        let poly = match order.cmp(&g.plus, &g.minus) {
            Ordering::Less => Poly { head: tail, tail: head },
            _ => Poly { head, tail },
        };
        engine.polys.push(poly);
        engine.active.push(engine.polys.len() - 1);
    }
    Ok(engine.reduce(b)?.is_none())
}

/// Generators of `(I : x_var^∞)`: one Gröbner basis with `x_var` cheapest,
/// then every element divided by its largest power of `x_var`.
pub fn saturate(gens: &[Binomial], var: usize) -> Result<Vec<Binomial>> {
    saturate_with_cap(gens, var, DEFAULT_REDUCTION_CAP)
}

pub fn saturate_with_cap(gens: &[Binomial], var: usize, cap: u64) -> Result<Vec<Binomial>> {
    let Some(first) = gens.first() else {
        return Ok(Vec::new());
    };
    let n = first.num_vars();
    if gens.iter().all(|g| !g.involves(var)) {
        return Ok(gens.to_vec());
    }
    let order = TermOrder::grevlex_with_last(n, var);
    let gb = buchberger_with_cap(gens, &order, cap).map_err(|e| match e {
        Error::Resource(msg) => Error::Resource(format!("saturating at variable {var}: {msg}")),
        other => other,
    })?;
    Ok(gb
        .into_iter()
        .map(|mut g| {
            let c = g.plus[var].min(g.minus[var]);
            g.plus[var] -= c;
            g.minus[var] -= c;
            g
        })
        .collect())
}
