//! Block partitions and their certification on exact and Monte Carlo oracles.

use proptest::prelude::*;
use varlin::generators::chain::{Chain, Stochastic};
use varlin::generators::reference::{elliptic_chain, geometric_chain, iid_sign, inhom_markov};
use varlin::linearize::{
    oracle_growth_constants, partition_blocks, sequence_partition, verify_partition, BlockPartition, GrowthConstants,
};
use varlin::mixing::{dobrushin_phi_profile, MixingProfile, Provenance};
use varlin::oracle::MonteCarloOracle;
use varlin::{ArrayModel, Error};

fn constants(model: &ArrayModel) -> GrowthConstants {
    let profile = dobrushin_phi_profile(model).unwrap();
    oracle_growth_constants(model.finite().unwrap(), &profile, 4.0, 1.0).unwrap()
}

fn certified(model: &ArrayModel) -> BlockPartition {
    let arr = model.finite().unwrap();
    let p = partition_blocks(arr, &constants(model)).unwrap();
    let report = verify_partition(&p, arr);
    assert!(report.all_pass(), "{}: {:?}", model.id, report.failures());
    p
}

#[test]
fn iid_blocks_have_five_signs() {
    let p = certified(&iid_sign(64).unwrap());
    assert_eq!((p.q_n, p.a_n, p.r_n), (2.0, 4.0, 1));
    for b in &p.blocks[..p.k_n() - 1] {
        assert_eq!((b.len(), b.core_end - b.a + 1), (5, 4));
        assert_eq!(b.variance.value, 5.0);
    }
    assert_eq!(p.blocks.last().unwrap().b, 64);
}

#[test]
fn geometric_chain_passes_every_family() {
    let model = geometric_chain(1 << 12, 0.5).unwrap();
    let p = certified(&model);
    let report = verify_partition(&p, model.finite().unwrap());
    for family in ["block_lower", "core_sum_lower", "core_sum_upper", "block_core_ratio", "gap_covariance"] {
        assert!(!report.family(family).is_empty(), "{family} missing");
    }
}

#[test]
fn monte_carlo_partition_is_certified_within_its_guard() {
    let model = elliptic_chain(512).unwrap();
    let c = constants(&model);
    let mc = MonteCarloOracle::sample(&model, 4000, 3).unwrap();
    let p = partition_blocks(&mc, &c).unwrap();
    assert!(!p.exact);
    let report = verify_partition(&p, &mc);
    assert!(report.family("block_lower").iter().all(|c| c.pass));
    let exact = certified(&model);
    let diff = p.k_n() as f64 - exact.k_n() as f64;
    assert!(diff.abs() <= 0.35 * exact.k_n() as f64 + 1.0, "{} vs {}", p.k_n(), exact.k_n());
}

#[test]
fn sequence_blocks_do_not_depend_on_the_horizon() {
    let short = iid_sign(256).unwrap();
    let long = iid_sign(512).unwrap();
    let a = sequence_partition(short.finite().unwrap(), 4.0, 1).unwrap();
    let b = sequence_partition(long.finite().unwrap(), 4.0, 1).unwrap();
    assert_eq!(a.blocks[..], b.blocks[..a.blocks.len()]);
    assert!(b.a1 >= 2.0 && b.a2 <= 3.0, "A1 = {}, A2 = {}", b.a1, b.a2);
    assert_eq!(b.k_n(b.blocks[3].b), 4);
    assert_eq!(b.covered(b.blocks[3].b + 2), b.blocks[3].b);
    assert!(b.slope >= b.a1 * b.a1 * (1.0 - 1e-12) && b.slope <= 18.0 * 2.0, "slope {}", b.slope);
}

#[test]
fn flat_rho_is_infeasible() {
    let model = iid_sign(100).unwrap();
    let flat = MixingProfile::from_rho(vec![0.3; 101], Provenance::Declared);
    let err = oracle_growth_constants(model.finite().unwrap(), &flat, 4.0, 1.0).unwrap_err();
    assert!(matches!(err, Error::InfeasibleMixing(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn too_little_variance_is_rejected() {
    let model = iid_sign(3).unwrap();
    let err = partition_blocks(model.finite().unwrap(), &constants(&model)).unwrap_err();
    assert!(matches!(err, Error::DegenerateVariance { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every partition the construction returns for an exact oracle passes
    /// its certification.
    #[test]
    fn random_chains_certify(
        stay in 0.05f64..0.95,
        leave in 0.05f64..0.95,
        hi in 1i64..4,
        n in 64usize..400,
    ) {
        let p = Stochastic::new(&[vec![stay, 1.0 - stay], vec![leave, 1.0 - leave]]).unwrap();
        let chain = Chain::homogeneous(vec![0.5, 0.5], p, n).unwrap();
        let model = inhom_markov("random", chain, n, 1.0, |_, s| if s == 0 { 0.0 } else { hi as f64 }).unwrap();
        let arr = model.finite().unwrap();
        if let Ok(part) = partition_blocks(arr, &constants(&model)) {
            let report = verify_partition(&part, arr);
            prop_assert!(report.all_pass(), "{:?}", report.failures());
        }
    }
}
