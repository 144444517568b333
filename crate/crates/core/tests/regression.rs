mod oracles;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use pcnlab::ergm::is_significant;
use pcnlab::stats::{
    ols, ols_moderation, ols_simple, t_distribution_sf, two_sample_ttest, Predictor, TestKind,
};

fn two_sided(t: f64, df: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    2.0 * StudentsT::new(0.0, 1.0, df).unwrap().sf(t.abs())
}

#[test]
fn ols_matches_the_normal_equations() {
    let mut rng = oracles::rng(31);
    let noise = Normal::new(0.0, 1.0).unwrap();
    for case in 0..50 {
        let n = 8 + case % 30;
        let k = 1 + case % 3;
        let columns: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.5 + columns.iter().enumerate().map(|(j, c)| (j as f64 - 0.7) * c[i]).sum::<f64>() + noise.sample(&mut rng))
            .collect();
        let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
        let predictors: Vec<Predictor<'_>> = names.iter().zip(&columns).map(|(nm, c)| Predictor::new(nm.clone(), c)).collect();
        let fit = ols(&y, &predictors).unwrap();
        let (beta, se, r2) = oracles::normal_equations(&columns, &y);
        assert!((fit.r_squared - r2).abs() < 1e-10);
        let df = (n - k - 1) as f64;
        assert_eq!(fit.residual_df, n - k - 1);
        for (j, term) in fit.terms.iter().enumerate() {
            assert!((term.coefficient - beta[j]).abs() < 1e-10, "case {case} term {j}");
            assert!((term.std_error - se[j]).abs() < 1e-10);
            assert!((term.p_value - two_sided(beta[j] / se[j], df)).abs() < 1e-10);
        }
    }
}

#[test]
fn exact_line_has_unit_r_squared() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let fit = ols_simple(&y, &x).unwrap();
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!((fit.coefficient("x").unwrap() - 2.0).abs() < 1e-12);
    assert!((fit.intercept() - 1.0).abs() < 1e-12);
}

/// Shared predictors and noise; the two outcomes differ only in the planted
/// interaction.
fn paired_moderation_data(seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = oracles::rng(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let n = 85;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let m: Vec<f64> = (0..n).map(|_| rng.random_range(55.0..75.0)).collect();
    let e: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let absent: Vec<f64> = (0..n).map(|i| 5.0 + 2.0 * x[i] + e[i]).collect();
    let planted: Vec<f64> = (0..n).map(|i| absent[i] + 0.2 * x[i] * m[i]).collect();
    (x, m, planted, absent)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn moderation_detects_a_planted_interaction() {
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for seed in 0..25 {
        let (x, m, planted, absent) = paired_moderation_data(seed);
        with.push(ols_moderation(&planted, &x, &m, false).unwrap().p_value("x*m").unwrap());
        without.push(ols_moderation(&absent, &x, &m, false).unwrap().p_value("x*m").unwrap());
    }
    let (pw, pa) = (median(with), median(without));
    assert!(pw < 0.05, "{pw}");
    assert!(pa > 0.3, "{pa}");
}

#[test]
fn moderation_recovers_known_coefficients() {
    let mut rng = oracles::rng(12);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let x: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
    let m: Vec<f64> = (0..40).map(|_| rng.random_range(50.0..80.0)).collect();
    let y: Vec<f64> = (0..40).map(|i| 5.0 + 2.0 * x[i] + 0.5 * x[i] * m[i] + noise.sample(&mut rng)).collect();
    let fit = ols_moderation(&y, &x, &m, false).unwrap();
    assert!((fit.intercept() - 5.0).abs() < 0.05);
    assert!((fit.coefficient("x").unwrap() - 2.0).abs() < 0.05);
    assert!((fit.coefficient("x*m").unwrap() - 0.5).abs() < 0.05);
    let constant = vec![60.0; 40];
    assert!(ols_moderation(&y, &x, &constant, false).is_err());
}

#[test]
fn pooled_t_matches_the_closed_form() {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 3.0, 4.0, 5.0, 6.0];
    let r = two_sample_ttest(&a, &b, TestKind::Pooled).unwrap();
    // means 3 and 4, both variances 2.5: t = -1 / sqrt(2.5 (1/5 + 1/5))
    assert!((r.t_value + 1.0).abs() < 1e-12);
    assert_eq!(r.degrees_of_freedom, 8.0);
    assert!((r.p_value - two_sided(-1.0, 8.0)).abs() < 1e-12);
    let swapped = two_sample_ttest(&b, &a, TestKind::Pooled).unwrap();
    assert_eq!(swapped.t_value, -r.t_value);
    assert_eq!(swapped.p_value, r.p_value);
}

#[test]
fn significance_rule_on_the_published_estimate() {
    assert!(is_significant(16.49, 1.47));
    assert!(is_significant(5.90, 1.48));
    assert!(!is_significant(1.0, 0.6));
}

#[test]
fn published_group_summaries() {
    // 5 per group, standard errors 1.47 and 1.48 as sample sd / sqrt(5)
    let (sa, sb) = (1.47 * 5f64.sqrt(), 1.48 * 5f64.sqrt());
    let pooled = ((4.0 * sa * sa + 4.0 * sb * sb) / 8.0).sqrt();
    let t = (16.49 - 5.90) / (pooled * (0.4f64).sqrt());
    assert!((t - 5.08).abs() < 0.01);
    assert!(two_sided(t, 8.0) < 0.05);
}

#[test]
fn t_distribution_tail() {
    assert_eq!(t_distribution_sf(0.0, 5.0).unwrap(), 0.5);
    assert!((t_distribution_sf(1.0, 1.0).unwrap() - 0.25).abs() < 1e-12);
    assert!((t_distribution_sf(1.96, 1e6).unwrap() - 0.025).abs() < 1e-3);
    assert!(t_distribution_sf(1.0, 0.0).is_err());
}
