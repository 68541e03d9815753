//! Exact oracles against brute-force path enumeration.

use std::collections::BTreeMap;

use proptest::prelude::*;
use varlin::generators::chain::{Chain, Stochastic};
use varlin::generators::finite::FiniteArray;
use varlin::generators::reference::{iid_lattice, iid_sign, inhom_markov};
use varlin::generators::window::{local_window_array, reachable_tuples};
use varlin::generators::{ArrayModel, ModelKind};
use varlin::oracle::*;

/// Every path `X_0..X_L` with its probability.
fn enumerate(chain: &Chain, last: usize) -> Vec<(Vec<usize>, f64)> {
    let d = chain.states();
    let mut out: Vec<(Vec<usize>, f64)> = (0..d).map(|s| (vec![s], chain.initial()[s])).collect();
    for p in 1..=last {
        let mat = chain.transition(p);
        out = out
            .into_iter()
            .flat_map(|(path, w)| {
                let x = *path.last().unwrap();
                (0..d).map(move |t| {
                    let mut q = path.clone();
                    q.push(t);
                    (q, w * mat.get(x, t))
                })
            })
            .collect();
    }
    out
}

/// Brute-force law of `Σ_{a..b} ξ_j`, keyed by the lattice index.
fn brute_pmf(arr: &FiniteArray, a: usize, b: usize) -> BTreeMap<i64, f64> {
    let mut law = BTreeMap::new();
    for (path, w) in enumerate(arr.chain(), arr.last_position()) {
        let xi = arr.observe(&path);
        let s: f64 = xi[a - 1..b].iter().sum();
        *law.entry((s / arr.step() * 1e6).round() as i64).or_insert(0.0) += w;
    }
    law
}

fn tv(pmf: &LatticePmf, brute: &BTreeMap<i64, f64>, step: f64) -> f64 {
    let mut exact = BTreeMap::new();
    for (k, &w) in pmf.weights.iter().enumerate() {
        *exact.entry((pmf.value(k) / step * 1e6).round() as i64).or_insert(0.0) += w;
    }
    let keys: std::collections::BTreeSet<i64> = exact.keys().chain(brute.keys()).copied().collect();
    0.5 * keys.iter().map(|k| (exact.get(k).unwrap_or(&0.0) - brute.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

fn brute_variance(arr: &FiniteArray, a: usize, b: usize) -> f64 {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (path, w) in enumerate(arr.chain(), arr.last_position()) {
        let s: f64 = arr.observe(&path)[a - 1..b].iter().sum();
        m1 += w * s;
        m2 += w * s * s;
    }
    m2 - m1 * m1
}

fn stochastic_row(raw: &[u32]) -> Vec<f64> {
    let total: u32 = raw.iter().sum();
    raw.iter().map(|&v| v as f64 / total as f64).collect()
}

prop_compose! {
    fn small_array()(d in 2usize..=3, n in 1usize..=5, window in 0usize..=1)
        (raw in proptest::collection::vec(1u32..10, d * d * (n + 2 * window)),
         init in proptest::collection::vec(1u32..10, d),
         vals in proptest::collection::vec(-3i32..=3, d * n * (2 * window + 1)),
         d in Just(d), n in Just(n), window in Just(window)) -> FiniteArray
    {
        let steps = n + 2 * window;
        let mats: Vec<Stochastic> = (0..steps)
            .map(|p| {
                let rows: Vec<Vec<f64>> = (0..d).map(|s| stochastic_row(&raw[(p * d + s) * d..(p * d + s + 1) * d])).collect();
                Stochastic::new(&rows).unwrap()
            })
            .collect();
        let chain = Chain::from_steps(stochastic_row(&init), mats).unwrap();
        let width = 2 * window + 1;
        FiniteArray::build(chain, n, window, 0.5, |j, k| {
            let base = ((j - 1) * width + k) * d;
            Some(vals[base..base + d].iter().map(|&v| v as f64 * 0.5).collect())
        })
        .unwrap()
    }
}

fn wrap(arr: FiniteArray) -> ArrayModel {
    ArrayModel::from_finite("random", ModelKind::InhomMarkov, arr)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_matches_enumeration(arr in small_array()) {
        let n = arr.n();
        let model = wrap(arr.clone());
        for a in 1..=n {
            for b in a..=n {
                let pmf = exact_sum_pmf(&model, a, b).unwrap();
                prop_assert!(tv(&pmf, &brute_pmf(&arr, a, b), arr.step()) <= 1e-12);
            }
        }
    }

    #[test]
    fn variance_matches_enumeration_and_pmf(arr in small_array()) {
        let n = arr.n();
        let model = wrap(arr.clone());
        for a in 1..=n {
            for b in a..=n {
                let v = variance_of_range(&model, a, b).unwrap();
                prop_assert!((v - brute_variance(&arr, a, b)).abs() <= 1e-9);
                let m = moments_and_cumulants(&exact_sum_pmf(&model, a, b).unwrap(), 2).unwrap();
                prop_assert!((v - m.central[2]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn variance_splits_through_covariance(arr in small_array()) {
        let n = arr.n();
        for b in 1..n {
            let whole = variance_of_set(&arr, &[(1, n)]);
            let left = variance_of_set(&arr, &[(1, b)]);
            let right = variance_of_set(&arr, &[(b + 1, n)]);
            let cross = covariance_of_sets(&arr, &[(1, b)], &[(b + 1, n)]);
            prop_assert!((whole - left - right - 2.0 * cross).abs() <= 1e-9);
        }
    }

    #[test]
    fn covariances_with_total_match_pairwise_sums(arr in small_array()) {
        let model = wrap(arr.clone());
        let n = arr.n();
        let fast = arr.covariances_with_total();
        for j in 1..=n {
            let slow: f64 = (1..=n).map(|i| covariance(&model, i.min(j), i.max(j)).unwrap()).sum();
            prop_assert!((fast[j - 1] - slow).abs() <= 1e-10);
        }
    }

    #[test]
    fn centering_holds(arr in small_array()) {
        for j in 1..=arr.n() {
            let mut mean = 0.0;
            for k in 0..=2 * arr.window() {
                if let Some(v) = arr.term_values(j, k) {
                    mean += arr.marginal(j + k).iter().zip(&v).map(|(p, x)| p * x).sum::<f64>();
                }
            }
            prop_assert!(mean.abs() <= 1e-12);
        }
    }
}

#[test]
fn two_fair_signs() {
    let model = iid_sign(2).unwrap();
    let pmf = exact_sum_pmf(&model, 1, 2).unwrap();
    let atoms: Vec<(f64, f64)> = pmf.atoms().collect();
    assert_eq!(atoms, vec![(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
}

#[test]
fn single_index_is_the_marginal() {
    let model = iid_lattice("skew", 3, &[0.0, 1.0, 3.0], &[0.5, 0.3, 0.2], 1.0).unwrap();
    let pmf = exact_sum_pmf(&model, 2, 2).unwrap();
    let atoms: Vec<(f64, f64)> = pmf.atoms().collect();
    let mean = 0.3 + 0.6;
    let expect = [(-mean, 0.5), (1.0 - mean, 0.3), (3.0 - mean, 0.2)];
    for ((v, p), (ev, ep)) in atoms.iter().zip(expect) {
        assert!((v - ev).abs() < 1e-12 && (p - ep).abs() < 1e-15);
    }
}

#[test]
fn iid_variance_is_additive() {
    let model = iid_sign(8).unwrap();
    assert!((variance_of_range(&model, 2, 6).unwrap() - 5.0).abs() < 1e-12);
    assert!(covariance(&model, 1, 3).unwrap().abs() < 1e-14);
    assert!((covariance(&model, 3, 3).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn coboundary_variance_stays_bounded() {
    // ξ_j = h(X_{j+1}) − h(X_j) through a window of width one
    let rows = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
    let n = 64;
    let chain = Chain::homogeneous(vec![0.4, 0.6], Stochastic::new(&rows).unwrap(), n + 2).unwrap();
    let h = [0.0, 2.0];
    let arr = FiniteArray::build(chain, n, 1, 1.0, |_, k| match k {
        0 => Some(vec![-h[0], -h[1]]),
        1 => Some(h.to_vec()),
        _ => None,
    })
    .unwrap();
    let model = wrap(arr);
    for m in [1usize, 8, 32, 64] {
        let v = variance_of_range(&model, 1, m).unwrap();
        let double: f64 = (1..=m)
            .flat_map(|i| (1..=m).map(move |j| (i, j)))
            .map(|(i, j)| covariance(&model, i.min(j), i.max(j)).unwrap())
            .sum();
        assert!((v - double).abs() < 1e-9, "m = {m}: {v} vs {double}");
        assert!(v <= 8.0);
    }
}

#[test]
fn four_sign_tail() {
    let pmf = exact_sum_pmf(&iid_sign(4).unwrap(), 1, 4).unwrap();
    let t = tail_probability(&pmf, 4.0, Side::Upper);
    assert!((t.probability - 1.0 / 16.0).abs() < 1e-15);
    assert!((t.ln_probability - (1.0f64 / 16.0).ln()).abs() < 1e-12);
    assert_eq!(tail_probability(&pmf, -10.0, Side::Upper).probability, 1.0);
    for t in [-4.0, -2.0, 0.0, 2.0, 4.0] {
        let up = tail_probability(&pmf, t, Side::Upper).probability;
        let below = tail_probability(&pmf, t - 2.0, Side::Lower).probability;
        assert!((up + below - 1.0).abs() < 1e-12);
    }
}

#[test]
fn deep_tails_keep_relative_accuracy() {
    // 2^-990 ≈ 1e-298
    let n = 990;
    let pmf = exact_sum_pmf(&iid_sign(n).unwrap(), 1, n).unwrap();
    let t = tail_probability(&pmf, n as f64, Side::Upper);
    let exact = -(n as f64) * std::f64::consts::LN_2;
    assert!(((t.ln_probability - exact) / exact).abs() < 1e-9);
}

#[test]
fn lattice_budget_is_enforced() {
    let model = iid_sign(64).unwrap();
    let err = exact_sum_pmf_with_budget(&model, 1, 64, 40).unwrap_err();
    assert!(matches!(err, varlin::Error::Resource(_)));
}

#[test]
fn expanding_models_have_no_exact_oracle() {
    use varlin::generators::expanding::{ExpandingModel, MapObservable};
    let m = ArrayModel::expanding("exp", ExpandingModel::new(4, vec![2], MapObservable::Cosine { amplitude: 1.0 }).unwrap());
    assert!(matches!(exact_sum_pmf(&m, 1, 2), Err(varlin::Error::Unsupported(_))));
}

#[test]
fn zero_window_reproduces_the_base() {
    let rows = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
    let chain = Chain::homogeneous(vec![0.5, 0.5], Stochastic::new(&rows).unwrap(), 6).unwrap();
    let base = inhom_markov("base", chain, 6, 1.0, |j, s| (s * j) as f64).unwrap();
    let arr = base.finite().unwrap().clone();
    assert_eq!(arr.n(), 6);
    let lifted = local_window_array(&base, 0, 1.0, |j, t| (t[0] * j) as f64).unwrap();
    let a = exact_sum_pmf(&base, 1, 6).unwrap();
    let b = exact_sum_pmf(&lifted, 1, 6).unwrap();
    assert!((a.offset - b.offset).abs() < 1e-12);
    assert_eq!(a.weights.len(), b.weights.len());
    assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| (x - y).abs() < 1e-15));
}

#[test]
fn window_of_one_matches_base_enumeration() {
    let rows = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
    let chain = Chain::homogeneous(vec![0.5, 0.5], Stochastic::new(&rows).unwrap(), 5).unwrap();
    let base = inhom_markov("base", chain.clone(), 5, 1.0, |_, _| 0.0).unwrap();
    let f = |_: usize, t: &[usize]| (t[0] * 2 + t[1] * t[2]) as f64;
    let lifted = local_window_array(&base, 1, 1.0, f).unwrap();
    let arr = lifted.finite().unwrap();
    assert_eq!(arr.n(), 3);
    assert!(reachable_tuples(arr) <= 8);
    // brute force over the 2^6 base paths X_0..X_5
    let mut law: BTreeMap<i64, f64> = BTreeMap::new();
    let mut mean = 0.0;
    let paths = enumerate(&chain, 5);
    for (p, w) in &paths {
        let s: f64 = (1..=3).map(|j| f(j, &p[j..j + 3])).sum();
        mean += w * s;
    }
    for (p, w) in &paths {
        let s: f64 = (1..=3).map(|j| f(j, &p[j..j + 3])).sum::<f64>() - mean;
        *law.entry((s * 1e6).round() as i64).or_insert(0.0) += w;
    }
    let pmf = exact_sum_pmf(&lifted, 1, 3).unwrap();
    assert!(tv(&pmf, &law, 1.0) <= 1e-12);
}

#[test]
fn variance_profile_csv_roundtrip() {
    let profile = VarianceProfile::compute(&iid_sign(5).unwrap()).unwrap();
    assert_eq!(profile.values, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    profile.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("k,variance\n1,"));
}
