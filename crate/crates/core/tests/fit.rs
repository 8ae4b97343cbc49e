use std::path::PathBuf;

use proptest::prelude::*;
use toric_outliers::fit::{
    adjusted_residuals_independence, chisq_sf, g2, lrt_asymptotic, lrt_detailed, mle_fit, pearson_residuals, Fitter,
};
use toric_outliers::models::{augment_pattern, augment_set, build_hierarchical_design};
use toric_outliers::tables::read_table;
use toric_outliers::{DesignMatrix, ModelSpecFile, Table, TableFormat, TableShape};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn table(name: &str) -> Table {
    read_table(std::fs::File::open(data(name)).unwrap(), TableFormat::Csv).unwrap()
}

fn designs(table_name: &str, spec_name: &str) -> (Table, DesignMatrix, DesignMatrix) {
    let t = table(table_name);
    let spec = ModelSpecFile::from_json(&std::fs::read_to_string(data(spec_name)).unwrap())
        .unwrap()
        .resolve(&t)
        .unwrap();
    (t, spec.base_design().unwrap(), spec.design().unwrap())
}

fn independence(dims: &[usize]) -> DesignMatrix {
    let shape = TableShape::new(dims.to_vec()).unwrap();
    let terms: Vec<Vec<usize>> = (0..dims.len()).map(|a| vec![a]).collect();
    build_hierarchical_design(&shape, &terms).unwrap()
}

#[test]
fn eq5_independence_fit_and_adjusted_residuals() {
    let t = table("eq5.csv");
    let fit = mle_fit(&independence(&[4, 4]), &t, 1e-8, 10_000).unwrap();
    assert!((fit.fitted[0] - 4.7895).abs() < 5e-4);
    assert!((fit.fitted[0] - 13.0 * 14.0 / 38.0).abs() < 1e-6);
    let z = adjusted_residuals_independence(&t).unwrap();
    let (mut best, mut at) = (0.0f64, (0, 0));
    for (i, row) in z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                at = (i, j);
            }
        }
    }
    assert!((best - 1.5670).abs() < 5e-4, "max |Z| = {best}");
    assert_eq!(at, (0, 0));
    let zf = adjusted_residuals_independence(&table("fprime.csv")).unwrap();
    assert!(zf[0][0] < 0.0);
}

#[test]
fn social_network_fit_and_residuals() {
    let t = table("social.csv");
    let fit = mle_fit(&independence(&[2, 2, 2]), &t, 1e-8, 10_000).unwrap();
    let expected_fit = [38.9, 38.1, 38.9, 38.1, 91.6, 89.4, 91.6, 89.4];
    let expected_res = [1.45, 7.93, -5.44, -3.90, -1.42, -4.70, 4.02, 2.07];
    let res = pearson_residuals(&t, &fit).unwrap();
    for k in 0..8 {
        assert!((fit.fitted[k] - expected_fit[k]).abs() < 0.05, "fit {k}");
        assert!((res[k] - expected_res[k]).abs() < 0.005, "residual {k}: {}", res[k]);
    }
}

/// Row/column scaling with one cell pinned to its count, written
/// independently of the library fitter.
fn pinned_independence(f: &[f64; 16], pin: usize) -> [f64; 16] {
    let mut m = [1.0; 16];
    for _ in 0..20_000 {
        for i in 0..4 {
            let (obs, cur): (f64, f64) = (0..4).map(|j| (f[i * 4 + j], m[i * 4 + j])).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            (0..4).for_each(|j| m[i * 4 + j] *= obs / cur);
        }
        for j in 0..4 {
            let (obs, cur): (f64, f64) = (0..4).map(|i| (f[i * 4 + j], m[i * 4 + j])).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            (0..4).for_each(|i| m[i * 4 + j] *= obs / cur);
        }
        m[pin] = f[pin];
    }
    m
}

fn oracle_g2(counts: &[u64]) -> f64 {
    let f: [f64; 16] = std::array::from_fn(|k| counts[k] as f64);
    let n: f64 = f.iter().sum();
    let m1 = pinned_independence(&f, 0);
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let k = i * 4 + j;
            let r: f64 = (0..4).map(|jj| f[i * 4 + jj]).sum();
            let c: f64 = (0..4).map(|ii| f[ii * 4 + j]).sum();
            if f[k] > 0.0 {
                s += f[k] * (m1[k] / (r * c / n)).ln();
            }
        }
    }
    2.0 * s
}

#[test]
fn eq5_and_fprime_asymptotic_tests() {
    let (t, a, at) = designs("eq5.csv", "independence-2way-cell11.json");
    let r = lrt_asymptotic(&t, &a, &at).unwrap();
    assert_eq!(r.df, 1);
    assert!((r.statistic - oracle_g2(t.counts())).abs() < 1e-6);
    let erfc = statrs::function::erf::erfc((r.statistic / 2.0).sqrt());
    assert!((r.p_asymptotic - erfc).abs() < 1e-10);
    assert!((r.p_asymptotic - 0.1195).abs() < 5e-5, "{}", r.p_asymptotic);

    let t = table("fprime.csv");
    let r = lrt_asymptotic(&t, &a, &at).unwrap();
    assert!((r.statistic - oracle_g2(t.counts())).abs() < 1e-6);
    assert!((r.p_asymptotic - 0.0625).abs() < 5e-5, "{}", r.p_asymptotic);
}

#[test]
fn copenhagen_base_and_two_cell_set() {
    let (t, a, at) = designs("copenhagen.csv", "copenhagen-two-cells.json");
    let out = lrt_detailed(&t, &a, &at, 1e-8, 10_000).unwrap();
    let tower = t.shape().flat_index_one_based(&[1, 2, 1, 1]).unwrap();
    let terraced = t.shape().flat_index_one_based(&[4, 1, 2, 1]).unwrap();
    assert!((out.base.fitted[tower] - 16.62).abs() < 0.005, "{}", out.base.fitted[tower]);
    assert!((out.base.fitted[terraced] - 35.58).abs() < 0.005, "{}", out.base.fitted[terraced]);
    let res = pearson_residuals(&t, &out.base).unwrap();
    assert!((res[tower] - 4.263).abs() < 0.001, "{}", res[tower]);
    assert!((res[terraced] - 3.590).abs() < 0.001, "{}", res[terraced]);

    // Lack of fit against the saturated model.
    let sat = build_hierarchical_design(t.shape(), &[vec![0, 1, 2, 3]]).unwrap();
    let fsat = mle_fit(&sat, &t, 1e-8, 10_000).unwrap();
    let g_base = g2(&t, &out.base, &fsat).unwrap();
    let g_aug = g2(&t, &out.augmented, &fsat).unwrap();
    assert!((g_base - 123.19).abs() < 0.01, "{g_base}");
    assert!((g_aug - 88.51).abs() < 0.01, "{g_aug}");
    assert_eq!(out.result.df, 2);
    // Two degrees of freedom: the tail is exp(-x/2).
    let p = out.result.p_asymptotic;
    assert!((p - (-out.result.statistic / 2.0).exp()).abs() < 1e-15);
    assert!((out.result.statistic - (g_base - g_aug)).abs() < 1e-6);
}

#[test]
fn base_lack_of_fit_tail() {
    let p = chisq_sf(123.19, 51);
    assert!(p > 1e-8 && p < 1e-7, "{p}");
}

#[test]
fn hierarchical_fits_converge_in_one_sweep() {
    let t = table("copenhagen.csv");
    let a = build_hierarchical_design(t.shape(), &[vec![0, 3], vec![2, 3], vec![1, 3]]).unwrap();
    let fitter = Fitter::new(&a).unwrap();
    assert_eq!(fitter.num_steps(), 3);
    let fit = fitter.fit(t.counts()).unwrap();
    assert!(fit.iterations <= 2);
}

fn arb_two_way() -> impl Strategy<Value = (usize, usize, Vec<u64>)> {
    (2usize..5, 2usize..5).prop_flat_map(|(r, c)| {
        proptest::collection::vec(1u64..12, r * c).prop_map(move |v| (r, c, v))
    })
}

fn arb_three_way() -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::vec(0u64..15, 12)
        .prop_filter("non-empty", |v| v.iter().sum::<u64>() > 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn independence_matches_closed_form((r, c, counts) in arb_two_way()) {
        let t = Table::from_counts(&[r, c], &counts).unwrap();
        let fit = mle_fit(&independence(&[r, c]), &t, 1e-8, 10_000).unwrap();
        let n = t.total() as f64;
        for i in 0..r {
            for j in 0..c {
                let ri: u64 = (0..c).map(|jj| counts[i * c + jj]).sum();
                let cj: u64 = (0..r).map(|ii| counts[ii * c + j]).sum();
                let e = ri as f64 * cj as f64 / n;
                prop_assert!((fit.fitted[i * c + j] - e).abs() <= 1e-8 * (1.0 + n));
            }
        }
    }

    #[test]
    fn margins_match_and_g2_is_nonnegative(counts in arb_three_way(), cell in 0usize..12, other in 0usize..12) {
        let shape = TableShape::new(vec![2, 2, 3]).unwrap();
        let t = Table::from_counts(&[2, 2, 3], &counts).unwrap();
        let a = build_hierarchical_design(&shape, &[vec![0, 2], vec![1, 2]]).unwrap();
        let augmented = [augment_set(&a, &[cell]).ok(), augment_pattern(&a, &[cell, other]).ok()];
        let n = t.total() as f64;
        for at in augmented.iter().flatten() {
            let Ok(r) = lrt_asymptotic(&t, &a, at) else { continue };
            prop_assert!(r.statistic >= 0.0);
            prop_assert!((0.0..=1.0).contains(&r.p_asymptotic));
            let fit = mle_fit(at, &t, 1e-8, 10_000).unwrap();
            prop_assert!(fit.max_margin_gap <= 1e-8 * (1.0 + n));
            if at.num_cols() == a.num_cols() + 1 && augment_set(&a, &[cell]).as_ref() == Ok(at) {
                prop_assert!((fit.fitted[cell] - counts[cell] as f64).abs() <= 1e-6 * (1.0 + n));
            }
        }
    }

    #[test]
    fn fit_depends_only_on_column_space((r, c, counts) in arb_two_way()) {
        // Dummy coding of the same space with the first level dropped.
        let t = Table::from_counts(&[r, c], &counts).unwrap();
        let a = independence(&[r, c]);
        let mut rows = Vec::new();
        for i in 0..r {
            for j in 0..c {
                let mut row = vec![1u32];
                row.extend((1..r).map(|ii| u32::from(ii == i)));
                row.extend((1..c).map(|jj| u32::from(jj == j)));
                rows.push(row);
            }
        }
        let b = DesignMatrix::from_rows(&rows).unwrap();
        let fa = mle_fit(&a, &t, 1e-8, 10_000).unwrap();
        let fb = mle_fit(&b, &t, 1e-8, 10_000).unwrap();
        let n = t.total() as f64;
        for k in 0..r * c {
            prop_assert!((fa.fitted[k] - fb.fitted[k]).abs() <= 10.0 * 1e-8 * (1.0 + n));
        }
    }
}
