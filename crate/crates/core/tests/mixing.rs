//! Mixing coefficients against their definitions.

use proptest::prelude::*;
use rand::Rng;
use varlin::generators::reference::{elliptic_chain, geometric_chain, memory_chain};
use varlin::mixing::{
    brute_force_varpi, coefficients, consistency_check, definitional_alpha_phi, dobrushin_phi_profile, JointLaw,
    MixingProfile, Norm, Provenance,
};
use varlin::rng::replicate_rng;

fn random_law(seed: u64, k: u64) -> JointLaw {
    let mut rng = replicate_rng(seed, k);
    let na = rng.random_range(2..=4);
    let nb = rng.random_range(2..=4);
    let raw: Vec<Vec<f64>> = (0..na).map(|_| (0..nb).map(|_| rng.random::<f64>() + 1e-3).collect()).collect();
    normalize(raw)
}

fn normalize(raw: Vec<Vec<f64>>) -> JointLaw {
    let total: f64 = raw.iter().flatten().sum();
    JointLaw::new(raw.into_iter().map(|r| r.into_iter().map(|w| w / total).collect()).collect()).unwrap()
}

fn profile_of(law: &JointLaw) -> MixingProfile {
    let (a, r, f) = coefficients(law).unwrap();
    let mut p = MixingProfile::from_phi(vec![1.0, f], Provenance::Declared);
    p.alpha.as_mut().unwrap().values[1] = a;
    p.rho.as_mut().unwrap().values[1] = r;
    p
}

fn agree(law: &JointLaw) {
    let (alpha, phi) = definitional_alpha_phi(law).unwrap();
    let v1 = brute_force_varpi(law, Norm::Infinity, Norm::One).unwrap();
    let vinf = brute_force_varpi(law, Norm::Infinity, Norm::Infinity).unwrap();
    assert!((v1 / 4.0 - alpha).abs() <= 1e-12, "alpha {alpha} vs {}", v1 / 4.0);
    assert!((vinf / 2.0 - phi).abs() <= 1e-12, "phi {phi} vs {}", vinf / 2.0);
    let violations = consistency_check(&profile_of(law));
    assert!(violations.is_empty(), "{violations:?}");
}

#[test]
fn twenty_random_tiny_laws() {
    for k in 0..20 {
        agree(&random_law(2024, k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brute_force_matches_definitions(
        raw in (2usize..=4, 2usize..=4).prop_flat_map(|(a, b)| prop::collection::vec(prop::collection::vec(0u32..100, b), a))
    ) {
        prop_assume!(raw.iter().flatten().any(|&w| w > 0));
        let law = normalize(raw.iter().map(|r| r.iter().map(|&w| w as f64).collect()).collect());
        agree(&law);
    }

    #[test]
    fn independence_gives_zero(
        pa in prop::collection::vec(1u32..50, 2..=4),
        pb in prop::collection::vec(1u32..50, 2..=4),
    ) {
        let law = normalize(pa.iter().map(|&a| pb.iter().map(|&b| (a * b) as f64).collect()).collect());
        let (a, r, f) = coefficients(&law).unwrap();
        prop_assert!(a < 1e-12 && r < 1e-12 && f < 1e-12);
    }
}

#[test]
fn dobrushin_profiles_are_consistent() {
    for model in [elliptic_chain(256).unwrap(), geometric_chain(256, 0.5).unwrap(), memory_chain(256, 3).unwrap()] {
        let p = dobrushin_phi_profile(&model).unwrap();
        assert!(consistency_check(&p).is_empty(), "{}", model.id);
        let phi: Vec<f64> = (1..=p.n).map(|j| p.phi(j).unwrap()).collect();
        assert!(phi.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{} φ not monotone", model.id);
    }
}

#[test]
fn geometric_chain_contracts_at_its_eigenvalue() {
    let p = dobrushin_phi_profile(&geometric_chain(64, 0.5).unwrap()).unwrap();
    for j in 1..10 {
        assert!((p.phi(j).unwrap() - 0.5f64.powi(j as i32)).abs() < 1e-12);
    }
}
