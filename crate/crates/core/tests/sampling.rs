//! Distributional checks of the samplers against their target laws.

mod common;

use bgg_core::bgg::BggParams;
use bgg_core::bmixgnb::{nb_pmf, BmixgnbParams};
use bgg_core::gof::{chi_square_pmf, chi_square_two_sample, ks_one_sample, ks_two_sample};
use bgg_core::sample::{
    par_collect_pairs, sample_bgg, sample_bgg_compound_poisson, sample_bgg_geometric_sum,
    sample_bgg_with, sample_bmixgnb, sample_bmixgnb_compound_poisson, sample_gamma,
    sample_geometric, sample_logarithmic, sample_nb, RandomStream, SumMethod,
};
use bgg_core::special::reg_inc_gamma;
use common::{as_f64, mean_se, same_law, sigmas};

fn draws<T>(n: usize, seed: u64, mut f: impl FnMut(&mut RandomStream) -> T) -> Vec<T> {
    let mut rng = RandomStream::new(seed, 0);
    (0..n).map(|_| f(&mut rng)).collect()
}

#[test]
fn gamma_small_shape_against_incomplete_gamma() {
    let xs = draws(100_000, 1, |rng| sample_gamma(0.3, 1.0, rng).unwrap());
    let ks = ks_one_sample(&xs, |x| if x <= 0.0 { 0.0 } else { reg_inc_gamma(0.3, x).unwrap() }).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn gamma_shape_one_is_exponential() {
    let xs = draws(100_000, 2, |rng| sample_gamma(1.0, 2.5, rng).unwrap());
    let ks = ks_one_sample(&xs, |x| if x <= 0.0 { 0.0 } else { -(-2.5 * x).exp_m1() }).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn logarithmic_pmf() {
    let p = 0.3f64;
    let lambda = -p.ln();
    let ks = draws(1_000_000, 3, |rng| sample_logarithmic(p, rng).unwrap());
    let pmf = |k: u64| (1.0 - p).powi(k as i32) / (lambda * k as f64);
    let t = chi_square_pmf(&ks, 1, pmf, 5.0, 0).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn geometric_mean_and_nb_reduction() {
    let g = draws(1_000_000, 4, |rng| sample_geometric(0.5, rng).unwrap());
    assert!(sigmas(mean_se(&as_f64(&g)), 2.0) < 3.0);
    let shifted: Vec<u64> = draws(200_000, 5, |rng| sample_nb(1.0, 0.35, rng).unwrap() + 1);
    let geo = draws(200_000, 6, |rng| sample_geometric(0.35, rng).unwrap());
    assert!(chi_square_two_sample(&shifted, &geo, 5.0).unwrap().p_value > 0.01);
}

#[test]
fn bgg_first_moments() {
    let d = BggParams::new(1.5, 2.0, 0.5).unwrap();
    let (xs, ns) = par_collect_pairs(1_000_000, 7, |rng| sample_bgg(&d, rng));
    assert!(sigmas(mean_se(&as_f64(&ns)), 2.0) < 3.0);
    assert!(sigmas(mean_se(&xs), d.alpha() / (d.p() * d.beta())) < 3.0);
}

#[test]
fn literal_sum_matches_gamma_shortcut() {
    let d = BggParams::new(1.0, 0.7, 0.3).unwrap();
    let a = par_collect_pairs(100_000, 8, |rng| sample_bgg_with(&d, SumMethod::GammaShortcut, rng));
    let b = par_collect_pairs(100_000, 9, |rng| sample_bgg_with(&d, SumMethod::LiteralSum, rng));
    let (pk, pc) = same_law(&a, &b);
    assert!(pk > 0.01 && pc > 0.01, "{pk} {pc}");
}

#[test]
fn compound_poisson_count_is_geometric() {
    let d = BggParams::new(1.0, 2.0, 0.4).unwrap();
    let (_, ns) = par_collect_pairs(100_000, 10, |rng| sample_bgg_compound_poisson(&d, rng));
    let t = chi_square_pmf(&ns, 1, |k| 0.4 * 0.6f64.powi(k as i32 - 1), 5.0, 0).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
    // N = 1 exactly when the Poisson count is zero
    let ones = ns.iter().filter(|&&n| n == 1).count() as f64 / ns.len() as f64;
    let se = (0.4f64 * 0.6 / ns.len() as f64).sqrt();
    assert!((ones - 0.4).abs() < 3.0 * se);
}

#[test]
fn geometric_sum_count_mean() {
    let inner = BggParams::new(1.0, 1.0, 0.6).unwrap();
    let q = 0.5;
    let (_, ns) = par_collect_pairs(1_000_000, 11, |rng| sample_bgg_geometric_sum(q, &inner, rng).unwrap());
    assert!(sigmas(mean_se(&as_f64(&ns)), 1.0 / (0.6 * q)) < 3.0);
}

#[test]
fn bmixgnb_at_unit_time_is_shifted_bgg() {
    let bgg = BggParams::new(2.0, 1.3, 0.45).unwrap();
    let mix = BmixgnbParams::at_time(&bgg, 1.0).unwrap();
    let (ys, ms) = par_collect_pairs(100_000, 12, |rng| sample_bmixgnb(&mix, rng));
    let shifted = (ys, ms.iter().map(|m| m + 1).collect());
    let direct = par_collect_pairs(100_000, 13, |rng| sample_bgg(&bgg, rng));
    let (pk, pc) = same_law(&shifted, &direct);
    assert!(pk > 0.01 && pc > 0.01, "{pk} {pc}");
}

#[test]
fn bmixgnb_compound_poisson_matches_subordination() {
    let mix = BmixgnbParams::new(1.0, 0.8, 0.4, 2.5).unwrap();
    let a = par_collect_pairs(100_000, 14, |rng| sample_bmixgnb(&mix, rng));
    let b = par_collect_pairs(100_000, 15, |rng| sample_bmixgnb_compound_poisson(&mix, rng));
    let (pk, pc) = same_law(&a, &b);
    assert!(pk > 0.01 && pc > 0.01, "{pk} {pc}");
}

#[test]
fn bmixgnb_count_marginal_and_conditional_magnitudes() {
    let mix = BmixgnbParams::new(1.0, 1.5, 0.4, 2.0).unwrap();
    let (ys, ms) = par_collect_pairs(100_000, 16, |rng| sample_bmixgnb(&mix, rng));
    let t = chi_square_pmf(&ms, 0, |k| nb_pmf(2.0, 0.4, k).unwrap(), 5.0, 0).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
    for k in 0..=2u64 {
        let given: Vec<f64> = ys.iter().zip(&ms).filter(|(_, &m)| m == k).map(|(y, _)| *y).collect();
        let shape = 1.5 * (2.0 + k as f64);
        let ks = ks_one_sample(&given, |y| if y <= 0.0 { 0.0 } else { reg_inc_gamma(shape, y).unwrap() }).unwrap();
        assert!(ks.p_value > 0.01, "k = {k}: {ks:?}");
    }
}

#[test]
fn limit_law_correlation() {
    let d = BggParams::new(1.0, 2.0, 1e-3).unwrap();
    let (xs, ns) = par_collect_pairs(100_000, 17, |rng| sample_bgg(&d, rng));
    let pn: Vec<f64> = ns.iter().map(|&n| 1e-3 * n as f64).collect();
    let px: Vec<f64> = xs.iter().map(|x| 1e-3 * x).collect();
    let (c, _) = common::cov_se(&px, &pn);
    let r = c / (common::cov_se(&px, &px).0 * common::cov_se(&pn, &pn).0).sqrt();
    assert!((1.0 - r).abs() < 0.01, "{r}");
    // the scaled magnitude tends to αZ/β with Z ~ Exp(1)
    let ks = ks_two_sample(&px, &pn.iter().map(|z| 2.0 * z).collect::<Vec<_>>()).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn streams_are_reproducible() {
    let d = BggParams::new(1.0, 2.0, 0.5).unwrap();
    let a = draws(1000, 99, |rng| sample_bgg(&d, rng));
    let b = draws(1000, 99, |rng| sample_bgg(&d, rng));
    assert_eq!(a, b);
    let mut other = RandomStream::new(99, 1);
    let c: Vec<(f64, u64)> = (0..1000).map(|_| sample_bgg(&d, &mut other)).collect();
    assert_ne!(a, c);
}
