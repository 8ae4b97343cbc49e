use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toric_outliers::models::{augment_set, build_hierarchical_design, preset_quasi_independence};
use toric_outliers::toric::{
    buchberger, eliminate_cells, eliminate_cells_minimal, markov_basis, preset_basis, reduces_to_zero, Binomial, TermOrder,
};
use toric_outliers::{DesignMatrix, TableShape};

fn hierarchical(dims: &[usize], terms: &[Vec<usize>]) -> DesignMatrix {
    build_hierarchical_design(&TableShape::new(dims.to_vec()).unwrap(), terms).unwrap()
}

fn independence(dims: &[usize]) -> DesignMatrix {
    let terms: Vec<Vec<usize>> = (0..dims.len()).map(|a| vec![a]).collect();
    hierarchical(dims, &terms)
}

fn cell(i: usize, j: usize, cols: usize) -> usize {
    (i - 1) * cols + (j - 1)
}

fn pure(plus: &[usize], minus: &[usize], k: usize) -> Binomial {
    let mut p = vec![0u32; k];
    let mut m = vec![0u32; k];
    plus.iter().for_each(|&c| p[c] += 1);
    minus.iter().for_each(|&c| m[c] += 1);
    Binomial::new(p, m).unwrap()
}

/// Every basic 2x2 minor of an I x J table.
fn minors(rows: usize, cols: usize) -> Vec<Binomial> {
    let k = rows * cols;
    let mut out = Vec::new();
    for i1 in 1..=rows {
        for i2 in i1 + 1..=rows {
            for j1 in 1..=cols {
                for j2 in j1 + 1..=cols {
                    out.push(pure(
                        &[cell(i1, j1, cols), cell(i2, j2, cols)],
                        &[cell(i1, j2, cols), cell(i2, j1, cols)],
                        k,
                    ));
                }
            }
        }
    }
    out
}

/// `g1` and `g2` generate the same ideal.
fn same_ideal(g1: &[Binomial], g2: &[Binomial]) -> bool {
    let order = TermOrder::grevlex(g1[0].num_vars());
    let gb1 = buchberger(g1, &order).unwrap();
    let gb2 = buchberger(g2, &order).unwrap();
    g1.iter().all(|b| reduces_to_zero(b, &gb2, &order).unwrap())
        && g2.iter().all(|b| reduces_to_zero(b, &gb1, &order).unwrap())
}

#[test]
fn two_way_independence_counts() {
    for (r, c) in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)] {
        let mb = markov_basis(&independence(&[r, c])).unwrap();
        assert_eq!(mb.len(), r * (r - 1) / 2 * c * (c - 1) / 2, "{r}x{c}");
        assert!(mb.moves().iter().all(|m| m.degree() == 2));
    }
}

#[test]
fn three_by_three_ideal_is_generated_by_minors() {
    let mb = markov_basis(&independence(&[3, 3])).unwrap();
    assert!(same_ideal(&mb.binomials(), &minors(3, 3)));
}

#[test]
fn three_way_independence_2x2x2() {
    let mb = markov_basis(&independence(&[2, 2, 2])).unwrap();
    assert_eq!(mb.len(), 9);
    assert!(mb.moves().iter().all(|m| m.degree() == 2));
}

#[test]
fn quasi_independence_cycle() {
    let mb = markov_basis(&preset_quasi_independence(3, 3).unwrap()).unwrap();
    assert_eq!(mb.len(), 1);
    let names = |i: usize| format!("p{}{}", i / 3 + 1, i % 3 + 1);
    let b = mb.binomials()[0].clone();
    let shown = [b.display_with(names), b.negated().display_with(names)];
    assert!(shown.contains(&"p12*p23*p31 - p13*p21*p32".to_string()));
}

#[test]
fn eliminating_both_diagonals_of_4x4() {
    let k = 16;
    let mut cells: Vec<usize> = (1..=4).map(|i| cell(i, i, 4)).collect();
    cells.extend((1..=4).map(|i| cell(i, 5 - i, 4)));
    let gens = eliminate_cells(&independence(&[4, 4]), &cells).unwrap();
    assert_eq!(gens.len(), 2);
    let expected = [
        pure(&[cell(1, 2, 4), cell(4, 3, 4)], &[cell(1, 3, 4), cell(4, 2, 4)], k),
        pure(&[cell(2, 1, 4), cell(3, 4, 4)], &[cell(2, 4, 4), cell(3, 1, 4)], k),
    ];
    for e in &expected {
        assert!(gens.contains(e) || gens.contains(&e.negated()), "missing {e}");
    }
}

#[test]
fn eliminating_both_diagonals_of_5x5() {
    let mut cells: Vec<usize> = (1..=5).map(|i| cell(i, i, 5)).collect();
    cells.extend((1..=5).filter(|&i| i != 3).map(|i| cell(i, 6 - i, 5)));
    let gens = eliminate_cells(&independence(&[5, 5]), &cells).unwrap();
    assert_eq!(gens.len(), 28);
    assert_eq!(gens.iter().filter(|g| g.degree() == 2).count(), 10);
    assert_eq!(gens.iter().filter(|g| g.degree() == 3).count(), 18);
    for g in &gens {
        for &c in &cells {
            assert!(!g.involves(c));
        }
    }
    let minimal = eliminate_cells_minimal(&independence(&[5, 5]), &cells).unwrap();
    assert_eq!(minimal.len(), 26);
    assert_eq!(minimal.iter().filter(|g| g.degree() == 3).count(), 16);
    assert!(same_ideal(&minimal, &gens));
    let k = 25;
    let quad = pure(&[cell(1, 2, 5), cell(3, 4, 5)], &[cell(1, 4, 5), cell(3, 2, 5)], k);
    let cubic = pure(
        &[cell(3, 5, 5), cell(4, 3, 5), cell(5, 2, 5)],
        &[cell(3, 2, 5), cell(4, 5, 5), cell(5, 3, 5)],
        k,
    );
    for e in [quad, cubic] {
        assert!(gens.contains(&e) || gens.contains(&e.negated()), "missing {e}");
    }
}

#[test]
fn eliminating_nothing_gives_the_model_ideal() {
    for dims in [[2usize, 2], [3, 3]] {
        let a = independence(&dims);
        let mb = markov_basis(&a).unwrap();
        let gens = eliminate_cells(&a, &[]).unwrap();
        assert_eq!(gens.len(), mb.len());
        assert!(same_ideal(&gens, &mb.binomials()));
    }
}

#[test]
fn basis_vanishes_on_the_model() {
    let models = [
        independence(&[3, 4]),
        independence(&[2, 2, 2]),
        preset_quasi_independence(4, 4).unwrap(),
        hierarchical(&[2, 2, 3], &[vec![0, 2], vec![1, 2]]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for a in &models {
        let mb = markov_basis(a).unwrap();
        for _ in 0..5 {
            let zeta: Vec<f64> = (0..a.num_cols()).map(|_| rng.random_range(0.5..1.5)).collect();
            let p: Vec<f64> = (0..a.num_cells())
                .map(|i| (0..a.num_cols()).map(|c| zeta[c].powi(a.get(i, c) as i32)).product())
                .collect();
            for b in mb.binomials() {
                assert!(b.evaluate(&p).abs() < 1e-9, "{b} does not vanish");
            }
        }
    }
}

#[test]
fn outlier_basis_is_in_base_kernel() {
    let a = independence(&[4, 4]);
    let at = augment_set(&a, &[cell(1, 1, 4)]).unwrap();
    let mb = markov_basis(&at).unwrap();
    assert!(!mb.is_empty());
    for m in mb.moves() {
        assert!(a.apply_transpose(m.as_slice()).iter().all(|&x| x == 0));
        assert!(at.apply_transpose(m.as_slice()).iter().all(|&x| x == 0));
    }
}

#[test]
fn preset_matches_computed_basis() {
    for (r, c) in [(2, 3), (3, 4), (4, 4)] {
        let a = independence(&[r, c]);
        assert_eq!(preset_basis(&a).unwrap().moves(), markov_basis(&a).unwrap().moves());
    }
    assert!(preset_basis(&preset_quasi_independence(3, 3).unwrap()).is_none());
}

/// All tables sharing the sufficient statistic of `start`.
fn fiber(a: &DesignMatrix, start: &[u64]) -> std::collections::BTreeSet<Vec<u64>> {
    let target = a.sufficient_statistic(start);
    let n: u64 = start.iter().sum();
    let k = start.len();
    let mut out = std::collections::BTreeSet::new();
    let mut cur = vec![0u64; k];
    fn rec(
        i: usize,
        left: u64,
        cur: &mut Vec<u64>,
        a: &DesignMatrix,
        target: &[u64],
        out: &mut std::collections::BTreeSet<Vec<u64>>,
    ) {
        if i + 1 == cur.len() {
            cur[i] = left;
            if a.sufficient_statistic(cur) == target {
                out.insert(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, a, target, out);
        }
    }
    rec(0, n, &mut cur, a, &target, &mut out);
    out
}

fn connected(a: &DesignMatrix, start: &[u64]) -> bool {
    let all = fiber(a, start);
    let moves = markov_basis(a).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![start.to_vec()];
    seen.insert(start.to_vec());
    while let Some(t) = stack.pop() {
        for m in moves.moves() {
            for sign in [1i64, -1] {
                let next: Option<Vec<u64>> = t
                    .iter()
                    .zip(m.as_slice())
                    .map(|(&x, &d)| u64::try_from(x as i64 + sign * d).ok())
                    .collect();
                if let Some(next) = next {
                    if seen.insert(next.clone()) {
                        stack.push(next);
                    }
                }
            }
        }
    }
    seen == all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fibers_are_connected_for_quasi_independence(counts in proptest::collection::vec(0u64..3, 9)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        prop_assert!(connected(&preset_quasi_independence(3, 3).unwrap(), &counts));
    }

    #[test]
    fn fibers_are_connected_for_2x3_independence(counts in proptest::collection::vec(0u64..3, 6)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        prop_assert!(connected(&independence(&[2, 3]), &counts));
    }
}
