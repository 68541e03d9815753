use super::pmf::LatticePmf;
use crate::error::{Error, Result};
use crate::numeric::{binomial, NeumaierSum};

/// Highest supported order; beyond it the centered sums lose all digits.
pub const MAX_ORDER: usize = 16;

/// Exact moments of a lattice law.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// `central[k]` is `E[(S − ES)^k]` for `k = 0..=p` (`central[1] = 0`).
    pub central: Vec<f64>,
    /// `cumulants[k]` is `Γ_k` for `k = 1..=p` (`cumulants[0]` unused).
    pub cumulants: Vec<f64>,
}

impl Moments {
    pub fn order(&self) -> usize {
        self.central.len() - 1
    }

    pub fn variance(&self) -> f64 {
        self.central[2]
    }

    /// Raw moment `E[S^k]` for a centered variable equals `central[k]`; this
    /// returns the raw moment in general.
    pub fn raw(&self, k: usize) -> f64 {
        (0..=k)
            .map(|i| binomial(k, i) * self.central[i] * self.mean.powi((k - i) as i32))
            .sum()
    }
}

/// Centered moments `μ_2..μ_p` and cumulants `Γ_1..Γ_p` of `pmf`.
pub fn moments_and_cumulants(pmf: &LatticePmf, max_order: usize) -> Result<Moments> {
    if max_order < 2 {
        return Err(Error::Precondition(format!("moment order {max_order} must be at least 2")));
    }
    if max_order > MAX_ORDER {
        return Err(Error::Unsupported(format!("moment order {max_order} exceeds {MAX_ORDER}")));
    }
    pmf.validate()?;
    let mass = pmf.total_mass();
    // mean position in lattice units, then powers of the centered offsets
    let mut s = NeumaierSum::default();
    for (k, &w) in pmf.weights.iter().enumerate() {
        s.add(w * k as f64);
    }
    let kbar = s.value() / mass;
    let mut sums = vec![NeumaierSum::default(); max_order + 1];
    for (k, &w) in pmf.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let x = (k as f64 - kbar) * pmf.step;
        let mut pw = w;
        for acc in sums.iter_mut() {
            acc.add(pw);
            pw *= x;
        }
    }
    let mut central: Vec<f64> = sums.iter().map(|a| a.value() / mass).collect();
    central[0] = 1.0;
    central[1] = 0.0;
    let mean = pmf.offset + pmf.step * kbar;
    let mut cumulants = vec![0.0; max_order + 1];
    cumulants[1] = mean;
    // κ_n = μ_n − Σ_{m=2}^{n−2} C(n−1, m−1) κ_m μ_{n−m}  (centered, κ_1 = 0)
    for n in 2..=max_order {
        let mut k = NeumaierSum::default();
        k.add(central[n]);
        for m in 2..n.saturating_sub(1) {
            k.add(-binomial(n - 1, m - 1) * cumulants[m] * central[n - m]);
        }
        cumulants[n] = k.value();
    }
    Ok(Moments { mean, central, cumulants })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> LatticePmf {
        LatticePmf::new(-1.0, 2.0, vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn fair_sign_cumulants() {
        let m = moments_and_cumulants(&two_point(), 6).unwrap();
        assert!((m.cumulants[2] - 1.0).abs() < 1e-15);
        assert!((m.cumulants[4] + 2.0).abs() < 1e-15);
        assert!((m.cumulants[6] - 16.0).abs() < 1e-13);
        assert!(m.cumulants[3].abs() < 1e-15 && m.cumulants[5].abs() < 1e-15);
    }

    #[test]
    fn poisson_like_cumulants_of_bernoulli() {
        // Bernoulli(p): κ_3 = p(1−p)(1−2p)
        let p = 0.3;
        let pmf = LatticePmf::new(0.0, 1.0, vec![1.0 - p, p]).unwrap();
        let m = moments_and_cumulants(&pmf, 4).unwrap();
        assert!((m.cumulants[1] - p).abs() < 1e-15);
        assert!((m.cumulants[3] - p * (1.0 - p) * (1.0 - 2.0 * p)).abs() < 1e-15);
        let k4 = p * (1.0 - p) * (1.0 - 6.0 * p * (1.0 - p));
        assert!((m.cumulants[4] - k4).abs() < 1e-15);
    }

    #[test]
    fn order_limits() {
        assert!(matches!(moments_and_cumulants(&two_point(), 17), Err(Error::Unsupported(_))));
        assert!(matches!(moments_and_cumulants(&two_point(), 1), Err(Error::Precondition(_))));
    }
}
