mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use spnorm_core::adaptive::{run_adaptive_test, AdaptiveConfig, Problem};
use spnorm_core::bootstrap::{bootstrap_centered_ustat, gen_multipliers, MultiplierMatrix};
use spnorm_core::norms::{sp_norm, Exponent, SpNormConfig};
use spnorm_core::ustat::{compute_ustat, standardize_two_sample, Kernel, PairSet, Sample};

fn matrix(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-10.0..10.0f64, n * d)
        .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        (1.0..8.0f64).prop_map(|p| Exponent::new(p).unwrap()),
        Just(Exponent::Infinity)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kendall_invariant_under_monotone_maps(data in matrix(9, 3)) {
        let kernel = Kernel::kendall_tau(PairSet::OffDiagonal.pairs(3));
        let x = Sample::new(data.clone()).unwrap();
        let y = x.map(|v| v.powi(3) + 2.0 * v.exp()).unwrap();
        let a = compute_ustat(&x, &kernel).unwrap();
        let b = compute_ustat(&y, &kernel).unwrap();
        prop_assert_eq!(a.uhat, b.uhat);
        prop_assert_eq!(a.q_proj, b.q_proj);
    }

    #[test]
    fn normalized_statistic_is_scale_free(
        x in matrix(7, 3),
        y in matrix(6, 3),
        c in prop_oneof![0.01..100.0f64, -100.0..-0.01f64],
    ) {
        let k = Kernel::mean(3);
        let sx = Sample::new(x).unwrap();
        let sy = Sample::new(y).unwrap();
        let base = standardize_two_sample(&compute_ustat(&sx, &k).unwrap(), &compute_ustat(&sy, &k).unwrap(), true);
        let scaled = standardize_two_sample(
            &compute_ustat(&sx.map(|v| c * v).unwrap(), &k).unwrap(),
            &compute_ustat(&sy.map(|v| c * v).unwrap(), &k).unwrap(),
            true,
        );
        if let (Ok(a), Ok(b)) = (base, scaled) {
            for (u, v) in a.values.iter().zip(b.values.iter()) {
                prop_assert!((c.signum() * u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn bootstrap_is_linear_in_multipliers(
        data in matrix(6, 2),
        e1 in prop::collection::vec(-3.0..3.0f64, 6),
        e2 in prop::collection::vec(-3.0..3.0f64, 6),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let summary = compute_ustat(&Sample::new(data).unwrap(), &Kernel::covariance(PairSet::UpperWithDiagonal.pairs(2))).unwrap();
        let rows = |e: Vec<f64>| MultiplierMatrix::from_values(Array2::from_shape_vec((1, 6), e).unwrap());
        let combo: Vec<f64> = e1.iter().zip(&e2).map(|(x, y)| a * x + b * y).collect();
        let f1 = bootstrap_centered_ustat(&summary, &rows(e1)).unwrap();
        let f2 = bootstrap_centered_ustat(&summary, &rows(e2)).unwrap();
        let fc = bootstrap_centered_ustat(&summary, &rows(combo)).unwrap();
        let want = &f1 * a + &f2 * b;
        prop_assert!(rel_err(&flat(&fc), &flat(&want)) <= 1e-10 || (&fc - &want).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sp_norm_matches_naive_oracle(v in prop::collection::vec(-1e3..1e3f64, 1..40), s0 in 1usize..45, p in exponent()) {
        let got = sp_norm(&v, &SpNormConfig::new(s0, p).unwrap()).unwrap();
        let want = naive_sp_norm(&v, s0, p.as_f64());
        prop_assert!((got - want).abs() <= 1e-10 * want.max(1e-300));
    }
}

#[test]
fn ustat_oracle_on_larger_custom_kernel() {
    // order-2 kernel with a non-product form exercises the generic path
    let mut r = rng(5);
    let data = normal_matrix(&mut r, 8, 3);
    let phi = |rows: &[ndarray::ArrayView1<f64>]| -> Vec<f64> {
        vec![
            (&rows[0] - &rows[1]).mapv(f64::abs).sum(),
            rows[0].dot(&rows[1]),
        ]
    };
    let kernel = Kernel::custom(
        2,
        2,
        std::sync::Arc::new(move |rows: &[ndarray::ArrayView1<f64>], out: &mut [f64]| {
            out.copy_from_slice(&phi(rows))
        }),
    )
    .unwrap();
    let got = compute_ustat(&Sample::new(data.clone()).unwrap(), &kernel).unwrap();
    let want = brute_ustat(&data, 2, &phi);
    assert!(rel_err(&flat(&got.uhat), &flat(&want.uhat)) < 1e-12);
    assert!(rel_err(&flat(&got.q_proj), &flat(&want.q)) < 1e-12);
    assert!(rel_err(&flat(&got.vhat), &flat(&want.vhat)) < 1e-12);
}

#[test]
fn multiplier_moments() {
    let m = gen_multipliers(50, 4000, 11, 1).unwrap();
    let vals = &m.values;
    let mean = vals.mean().unwrap();
    let var = vals.mapv(|v| v * v).mean().unwrap() - mean * mean;
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!((var - 1.0).abs() < 0.02, "variance {var}");
}

/// Kolmogorov–Smirnov distance of the null adaptive P-values from U(0,1).
#[test]
fn null_pvalues_look_uniform() {
    let cfg = AdaptiveConfig {
        replicates: 200,
        ..AdaptiveConfig::default()
    };
    let kernel = Kernel::mean(10);
    let mut pvals: Vec<f64> = (0..200u64)
        .map(|r| {
            let mut g = rng(1000 + r);
            let x = Sample::new(normal_matrix(&mut g, 40, 10)).unwrap();
            let y = Sample::new(normal_matrix(&mut g, 40, 10)).unwrap();
            run_adaptive_test(&Problem::TwoSample { x, y }, &kernel, &cfg, r)
                .unwrap()
                .p_value
        })
        .collect();
    pvals.sort_by(f64::total_cmp);
    let n = pvals.len() as f64;
    let ks = pvals
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).abs().max((p - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    // 1% critical value for n = 200 is about 0.115
    assert!(ks < 0.115, "KS distance {ks}");
}

#[test]
fn mean_projection_matches_centered_data() {
    let mut r = rng(8);
    let data = normal_matrix(&mut r, 12, 4);
    let s = compute_ustat(&Sample::new(data.clone()).unwrap(), &Kernel::mean(4)).unwrap();
    let means: Array1<f64> = data.mean_axis(ndarray::Axis(0)).unwrap();
    assert!(rel_err(&flat(&s.uhat), &flat(&means)) < 1e-14);
    let var: Array1<f64> = data.var_axis(ndarray::Axis(0), 0.0);
    assert!(rel_err(&flat(&s.vhat), &flat(&var)) < 1e-12);
}
