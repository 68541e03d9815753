//! Coboundary decomposition against brute-force enumeration, plus the bound
//! calculators.

use std::collections::HashMap;

use varlin::generators::chain::{Chain, Stochastic};
use varlin::generators::finite::FiniteArray;
use varlin::generators::reference::{elliptic_chain, iid_sign, inhom_markov, local_window_sum, memory_chain};
use varlin::generators::sample_chain_path;
use varlin::linearize::{growth_constants, oracle_growth_constants, partition_blocks, Block, BlockPartition};
use varlin::martingale::{
    frak_q, future_conditional_sum, martingale_differences, maximal_inequality_martingale, memory_coefficient,
    rate_bounds, time_change, w_n, SequentialConstants, SequentialInputs, TimeChanger,
};
use varlin::mixing::{dobrushin_phi_profile, MixingProfile, Provenance};
use varlin::oracle::Estimate;
use varlin::{ArrayModel, Error, VarianceProfile};

/// Every chain path `X_0..X_last` with its probability.
fn paths(arr: &FiniteArray) -> Vec<(Vec<usize>, f64)> {
    let chain = arr.chain();
    let mut out: Vec<(Vec<usize>, f64)> =
        chain.initial().iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(s, &w)| (vec![s], w)).collect();
    for p in 1..=arr.last_position() {
        let mat = chain.transition(p);
        out = out
            .into_iter()
            .flat_map(|(path, w)| {
                let s = *path.last().unwrap();
                (0..chain.states()).filter(move |&t| mat.get(s, t) > 0.0).map(move |t| {
                    let mut q = path.clone();
                    q.push(t);
                    (q, w * mat.get(s, t))
                })
            })
            .collect();
    }
    out
}

fn three_step_chain() -> ArrayModel {
    let steps = vec![
        Stochastic::new(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap(),
        Stochastic::new(&[vec![0.1, 0.9], vec![0.6, 0.4]]).unwrap(),
        Stochastic::new(&[vec![0.5, 0.5], vec![0.35, 0.65]]).unwrap(),
    ];
    let chain = Chain::from_steps(vec![0.4, 0.6], steps).unwrap();
    inhom_markov("three", chain, 3, 1.0, |j, s| (j * (s + 1)) as f64).unwrap()
}

#[test]
fn future_sum_matches_enumeration() {
    let model = three_step_chain();
    let arr = model.finite().unwrap();
    let all = paths(arr);
    for j in 0..=3 {
        let r = future_conditional_sum(&model, j).unwrap();
        for (x, &rx) in r.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for (path, w) in all.iter().filter(|(p, _)| p[j] == x) {
                let xi = arr.observe(path);
                num += w * xi[j..].iter().sum::<f64>();
                den += w;
            }
            assert!((rx - num / den).abs() < 1e-14, "j = {j}, x = {x}: {rx} vs {}", num / den);
        }
    }
    assert!(r_at_end_vanishes(&model));
    assert!(matches!(future_conditional_sum(&model, 4), Err(Error::Domain(_))));
    let window = local_window_sum(8, 1).unwrap();
    assert!(matches!(future_conditional_sum(&window, 1), Err(Error::Unsupported(_))));
}

fn r_at_end_vanishes(model: &ArrayModel) -> bool {
    future_conditional_sum(model, model.n()).unwrap().iter().all(|&v| v == 0.0)
}

fn hand_partition(n: usize, ends: &[usize]) -> BlockPartition {
    let zero = Estimate::exact(0.0);
    let mut a = 1;
    let blocks = ends
        .iter()
        .map(|&b| {
            let blk = Block { a, b, core_end: b, variance: zero, core_variance: zero, shrunk_core_variance: None, max_partial: 0.0 };
            a = b + 1;
            blk
        })
        .collect();
    BlockPartition { n, blocks, q_n: 1.0, a_n: 2.0, r_n: 1, c_n: 0.0, total_variance: zero, exact: true }
}

/// `E[D_i | X_0..X_{a_i−1+2m}]` by grouping enumerated paths on their prefix.
fn brute_martingale_residual(model: &ArrayModel, partition: &BlockPartition) -> f64 {
    let arr = model.finite().unwrap();
    let decomp = martingale_differences(model, partition, 4.0).unwrap();
    let all = paths(arr);
    let evals: Vec<_> = all.iter().map(|(p, _)| decomp.evaluate(arr, p)).collect();
    let mut worst: f64 = 0.0;
    for (i, &(a, _)) in decomp.blocks.iter().enumerate() {
        let u = a - 1 + 2 * arr.window();
        let mut groups: HashMap<&[usize], (f64, f64)> = HashMap::new();
        for ((path, w), e) in all.iter().zip(&evals) {
            let g = groups.entry(&path[..=u]).or_default();
            g.0 += w * e.block_d[i];
            g.1 += w;
        }
        for (num, den) in groups.values() {
            worst = worst.max((num / den).abs());
        }
    }
    worst
}

#[test]
fn martingale_property_by_enumeration() {
    let steps: Vec<Stochastic> = (0..12)
        .map(|p| {
            let a = 0.15 + 0.06 * p as f64;
            Stochastic::new(&[vec![a, 1.0 - a], vec![0.9 - 0.05 * p as f64, 0.1 + 0.05 * p as f64]]).unwrap()
        })
        .collect();
    let chain = Chain::from_steps(vec![0.3, 0.7], steps).unwrap();
    let model = inhom_markov("inhom", chain, 12, 1.0, |j, s| if s == 1 { (j % 3) as f64 } else { 0.0 }).unwrap();
    assert!(brute_martingale_residual(&model, &hand_partition(12, &[4, 9, 12])) < 1e-12);
    let window = local_window_sum(9, 1).unwrap();
    assert!(brute_martingale_residual(&window, &hand_partition(9, &[3, 7, 9])) < 1e-12);
}

#[test]
fn iid_residual_is_zero() {
    let model = iid_sign(200).unwrap();
    let arr = model.finite().unwrap();
    let c = oracle_growth_constants(arr, &dobrushin_phi_profile(&model).unwrap(), 4.0, 1.0).unwrap();
    let p = partition_blocks(arr, &c).unwrap();
    let d = martingale_differences(&model, &p, 4.0).unwrap();
    assert!(d.residual_l2.iter().all(|&r| r == 0.0));
    assert_eq!(d.martingale_residual, 0.0);
    assert!((d.expected_qv() - 1.0).abs() < 1e-12);
    for (k, &(a, b)) in d.blocks.iter().enumerate() {
        assert!((d.block_second_moments[k] - (b - a + 1) as f64).abs() < 1e-12);
    }
}

#[test]
fn telescoping_on_sampled_paths() {
    for model in [elliptic_chain(300).unwrap(), local_window_sum(200, 2).unwrap(), memory_chain(1 << 10, 3).unwrap()] {
        let arr = model.finite().unwrap();
        let c = oracle_growth_constants(arr, &dobrushin_phi_profile(&model).unwrap(), 4.0, 1.0).unwrap();
        let p = partition_blocks(arr, &c).unwrap();
        let d = martingale_differences(&model, &p, 4.0).unwrap();
        for rep in 0..100 {
            let path = sample_chain_path(arr, 5, rep);
            let e = d.evaluate(arr, &path);
            assert!(e.telescoping_residual <= 1e-10, "{}: {}", model.id, e.telescoping_residual);
            let total: f64 = e.d.iter().sum();
            let n = arr.n();
            assert!((total - (e.partial[n] + e.residual[n] - e.residual[0])).abs() < 1e-9);
            assert!(e.conditional_second.iter().all(|&v| v >= -1e-9));
        }
        for check in d.orthogonality_checks(arr) {
            assert!(check.pass, "{}: {:?}", model.id, check);
        }
    }
}

#[test]
fn time_change_endpoints() {
    let model = elliptic_chain(500).unwrap();
    let arr = model.finite().unwrap();
    let c = oracle_growth_constants(arr, &dobrushin_phi_profile(&model).unwrap(), 4.0, 1.0).unwrap();
    let p = partition_blocks(arr, &c).unwrap();
    let vp = VarianceProfile::compute(&model).unwrap();
    let end = time_change(&vp, &p, 1.0).unwrap();
    assert_eq!((end.v, end.j), (500, p.k_n()));
    assert_eq!(end.gap, 0.0);
    let tc = TimeChanger::new(&vp, &p).unwrap();
    assert_eq!(tc.at(0.0).unwrap().j, 1);
    assert!(matches!(tc.at(1.5), Err(Error::Domain(_))));
    let mut last = 0;
    for i in 0..=100 {
        let t = tc.at(i as f64 / 100.0).unwrap();
        assert!(t.v >= last);
        last = t.v;
    }
}

#[test]
fn exact_maximal_inequality_for_the_martingale() {
    let model = elliptic_chain(400).unwrap();
    let arr = model.finite().unwrap();
    let c = oracle_growth_constants(arr, &dobrushin_phi_profile(&model).unwrap(), 4.0, 1.0).unwrap();
    let p = partition_blocks(arr, &c).unwrap();
    let d = martingale_differences(&model, &p, 4.0).unwrap();
    let m = maximal_inequality_martingale(&model, &d, 4.0).unwrap();
    assert!(m.exact && m.holds(), "{} > {}", m.lhs, m.rhs);
    assert!(matches!(maximal_inequality_martingale(&model, &d, 3.0), Err(Error::Precondition(_))));
}

fn flat_constants(sigma: f64, p0: f64) -> varlin::linearize::GrowthConstants {
    let iid = MixingProfile::from_rho(vec![0.0; 11], Provenance::Declared);
    growth_constants(&iid, 1.0, sigma, 1.0, p0, 1.0).unwrap()
}

#[test]
fn hand_computed_rate_terms() {
    // √l/σ + l·σ^{−2(1−2/p0)} + 1/√l
    let cases = [(100.0, 4.0, 10usize, 0.44785054261852175), (10.0, 4.0, 2, 1.048_528_137_423_857), (50.0, 6.0, 9, 0.44219285043204165)];
    let ones = SequentialInputs { k_p0: 1.0, pi_p0: 1.0, pi_half: 1.0 };
    for (sigma, p0, l, expected) in cases {
        let c = flat_constants(sigma, p0);
        let seq = SequentialConstants::new(&c, &ones);
        let b = rate_bounds(&c, &seq, l, 0.0).unwrap();
        assert!((b.q_frak - expected).abs() <= 1e-12 * expected, "{sigma} {p0} {l}: {}", b.q_frak);
        assert_eq!(b.q_frak, frak_q(l as f64, sigma, p0));
    }
    // l·σ^{−1} + √l/σ + r/√l at σ = 100, p0 = 4, l = 10, r = 0.5
    assert!((w_n(10.0, 100.0, 4.0, 0.5) - 0.28973665961010275).abs() < 1e-15);
    let c = flat_constants(10.0, 4.0);
    let seq = SequentialConstants::new(&c, &ones);
    assert!(matches!(rate_bounds(&c, &seq, 3, 0.0), Err(Error::Precondition(_))));
    assert!(matches!(rate_bounds(&c, &seq, 0, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn memory_term_vanishes_at_twice_the_memory() {
    let mm = 3;
    let model = memory_chain(1 << 10, mm).unwrap();
    let arr = model.finite().unwrap();
    let profile = dobrushin_phi_profile(&model).unwrap();
    let c = oracle_growth_constants(arr, &profile, 4.0, 1.0).unwrap();
    let l = 2 * mm;
    let r = memory_coefficient(&model, &profile, &c, 4.0, l / 2).unwrap();
    assert!(r.exact && r.value == 0.0);
    let below = memory_coefficient(&model, &profile, &c, 4.0, mm - 1).unwrap();
    assert!(below.exact && below.value > 0.0 && below.value <= below.c + 1e-12);
    let sigma = c.sigma_n;
    let expected = l as f64 * sigma.powf(-1.0) + (l as f64).sqrt() / sigma;
    assert!((w_n(l as f64, sigma, 4.0, r.value) - expected).abs() < 1e-15);
}
