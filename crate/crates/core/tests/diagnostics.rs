//! Exact-law diagnostics on models whose answers are known in closed form.

use proptest::prelude::*;
use varlin::diagnostics::{
    asip_residual, cumulant_growth, fdd_check, kolmogorov_to_normal, mdp_curve, moment_gap, rate_fit, RateRow,
    RateSeries,
};
use varlin::generators::reference::{geometric_chain, iid_lattice, iid_sign};
use varlin::linearize::{oracle_growth_constants, partition_blocks, sequence_partition};
use varlin::martingale::{martingale_differences, path_pair, t_grid, TimeChanger};
use varlin::mixing::dobrushin_phi_profile;
use varlin::oracle::{exact_sum_pmf, LatticePmf};
use varlin::{Error, VarianceProfile};

fn phi(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

fn binomial_signs(n: usize) -> Vec<(f64, f64)> {
    let mut w = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; w.len() + 1];
        for (i, x) in w.iter().enumerate() {
            next[i] += x / 2.0;
            next[i + 1] += x / 2.0;
        }
        w = next;
    }
    w.into_iter().enumerate().map(|(k, p)| (2.0 * k as f64 - n as f64, p)).collect()
}

#[test]
fn kolmogorov_matches_binomial_scan() {
    let mut last = f64::INFINITY;
    for n in [4usize, 16, 64, 256, 1024] {
        let model = iid_sign(n).unwrap();
        let pmf = exact_sum_pmf(&model, 1, n).unwrap();
        let sigma = (n as f64).sqrt();
        let got = kolmogorov_to_normal(&pmf, sigma).unwrap();
        let mut cdf = 0.0;
        let mut want: f64 = 0.0;
        for (x, p) in binomial_signs(n) {
            let f = phi(x / sigma);
            want = want.max((f - cdf).abs());
            cdf += p;
            want = want.max((cdf - f).abs());
        }
        assert!((got.d_k - want).abs() < 1e-12, "n = {n}: {} vs {want}", got.d_k);
        assert!(got.d_k < last);
        last = got.d_k;
    }
}

#[test]
fn kolmogorov_is_scale_free() {
    let pmf = exact_sum_pmf(&iid_sign(30).unwrap(), 1, 30).unwrap();
    let base = kolmogorov_to_normal(&pmf, 30f64.sqrt()).unwrap();
    for c in [0.25, 3.0, 1e3] {
        let scaled = LatticePmf { offset: c * pmf.offset, step: c * pmf.step, weights: pmf.weights.clone() };
        let d = kolmogorov_to_normal(&scaled, c * 30f64.sqrt()).unwrap();
        assert!((d.d_k - base.d_k).abs() < 1e-13);
    }
    let point = LatticePmf { offset: 0.0, step: 1.0, weights: vec![1.0] };
    let d = kolmogorov_to_normal(&point, 1.0).unwrap();
    assert!(d.degenerate && (d.d_k - 0.5).abs() < 1e-15);
    assert!(matches!(kolmogorov_to_normal(&pmf, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn skewed_third_cumulant_is_linear_in_n() {
    // Bernoulli(0.2): κ2 = 0.16, κ3 = 0.096, so |κ3(S)|/Var(S) = 0.6 for every n.
    let laws: Vec<(usize, LatticePmf)> = [8usize, 32, 128, 512]
        .iter()
        .map(|&n| {
            let m = iid_lattice("bern", n, &[0.0, 1.0], &[0.8, 0.2], 1.0).unwrap();
            (n, exact_sum_pmf(&m, 1, n).unwrap())
        })
        .collect();
    let g = cumulant_growth(&laws, 3, 1.0, 1.0, 10.0).unwrap();
    for row in &g.rows {
        assert!((row.normalized - 0.6).abs() < 1e-9, "{row:?}");
        assert!((row.sigma - (0.16 * row.n as f64).sqrt()).abs() < 1e-9);
        assert!(!row.zero);
    }
    assert!(g.bounded && (g.ratio - 1.0).abs() < 1e-8);
    let sym = cumulant_growth(&[(64, exact_sum_pmf(&iid_sign(64).unwrap(), 1, 64).unwrap())], 3, 1.0, 1.0, 10.0).unwrap();
    assert!(sym.rows[0].zero);
    assert!(cumulant_growth(&laws, 2, 1.0, 1.0, 10.0).is_err());
}

#[test]
fn sign_moment_gap_is_two_over_root_n() {
    // E S⁴ = 3n² − 2n for fair signs.
    for n in [10usize, 100, 1000] {
        let pmf = exact_sum_pmf(&iid_sign(n).unwrap(), 1, n).unwrap();
        let gap = moment_gap(&pmf, (n as f64).sqrt(), 4).unwrap();
        assert!((gap - 2.0 / (n as f64).sqrt()).abs() < 1e-9, "n = {n}: {gap}");
    }
}

#[test]
fn mdp_at_zero_is_the_upper_half() {
    let n = 400;
    let pmf = exact_sum_pmf(&iid_sign(n).unwrap(), 1, n).unwrap();
    let sigma: f64 = 20.0;
    let a = sigma.powf(0.2);
    let atom = binomial_signs(n).iter().find(|(x, _)| *x == 0.0).unwrap().1;
    let c = mdp_curve(&pmf, sigma, a, &[0.0, 1.0, 1e3]).unwrap();
    let want = (0.5 + atom / 2.0).ln() / (a * a);
    assert!((c.points[0].value - want).abs() < 1e-12);
    assert!(c.points[2].dropped && c.points[2].value.is_nan());
    let tail: f64 = binomial_signs(n).iter().filter(|(x, _)| *x >= sigma * a - 1e-9).map(|(_, p)| p).sum();
    assert!((c.points[1].value - tail.ln() / (a * a)).abs() < 1e-10);
    assert!((c.points[1].deviation - (c.points[1].value + 0.5).abs()).abs() < 1e-15);
    assert!(matches!(mdp_curve(&pmf, sigma, 0.5, &[1.0]), Err(Error::Precondition(_))));
}

#[test]
fn asip_residual_vanishes_on_block_ends() {
    let n_max = 1 << 11;
    let model = geometric_chain(n_max, 0.5).unwrap();
    let arr = model.finite().unwrap();
    let c = oracle_growth_constants(arr, &dobrushin_phi_profile(&model).unwrap(), 8.0, 1.0).unwrap();
    let sp = sequence_partition(arr, c.a_n(), c.r_n).unwrap();
    let vp = VarianceProfile::compute(&model).unwrap();
    let v: Vec<f64> = (0..=n_max).map(|k| vp.variance(k)).collect();
    let ends: Vec<usize> = sp.blocks.iter().map(|b| b.b).collect();
    assert!(ends.len() >= 2);
    let res = asip_residual(&model, &sp, &v, &ends, 200, 3, 8.0, 0.1).unwrap();
    assert!(res.rows.iter().all(|r| r.quantile == 0.0 && r.covered == r.n));
    let mid = [ends[0] + 1, ends[1] - 1];
    let res = asip_residual(&model, &sp, &v, &mid, 200, 3, 8.0, 0.1).unwrap();
    assert!(res.rows.iter().all(|r| r.quantile > 0.0));
    assert!(asip_residual(&model, &sp, &v, &[10, 10], 10, 3, 8.0, 0.1).is_err());
}

#[test]
fn fdd_of_signs_is_brownian() {
    let n = 1 << 12;
    let model = iid_sign(n).unwrap();
    let arr = model.finite().unwrap();
    let c = oracle_growth_constants(arr, &dobrushin_phi_profile(&model).unwrap(), 4.0, 1.0).unwrap();
    let p = partition_blocks(arr, &c).unwrap();
    let d = martingale_differences(&model, &p, 4.0).unwrap();
    let vp = VarianceProfile::compute(&model).unwrap();
    let tc = TimeChanger::new(&vp, &p).unwrap();
    let pp = path_pair(&model, &d, &tc, &t_grid(64), 2000, 9).unwrap();
    let r = fdd_check(&pp, &[0.25, 0.5, 1.0]).unwrap();
    assert_eq!(r.points.len(), 3);
    assert!(r.covariance_error < 0.1, "{}", r.covariance_error);
    for pt in &r.points {
        assert!(pt.d_k < 2.0 * pt.dkw_radius, "{pt:?}");
    }
}

#[test]
fn fits_need_four_rows() {
    let rows: Vec<RateRow> = (1..=3).map(|k| RateRow { n: k, sigma: k as f64, value: 1.0 / k as f64 }).collect();
    let s = RateSeries::new("m", "dk", rows).unwrap();
    assert!(matches!(rate_fit(&s, 0.0), Err(Error::InsufficientData(_))));
}

proptest! {
    #[test]
    fn power_laws_are_recovered(c in 0.01f64..100.0, slope in -2.0f64..0.5, power in 0.0f64..2.0) {
        let rows: Vec<RateRow> = (0..6)
            .map(|k| {
                let sigma = 4f64.powi(k + 1);
                RateRow { n: 1 << (2 * k + 2), sigma, value: c * sigma.powf(slope) * sigma.ln().powf(power) }
            })
            .collect();
        let f = rate_fit(&RateSeries::new("m", "x", rows).unwrap(), power).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-9);
        prop_assert!(f.residual < 1e-9);
        prop_assert!(f.ci_low <= f.slope && f.slope <= f.ci_high);
    }
}
