//! Temperature ladders and the mixture quantities shared by simulated
//! tempering and its infinite-switching limit.
//!
//! Index 0 is always the physical temperature and the ladder is strictly
//! decreasing in β, so higher indices are hotter. Weighting factors are held
//! as `ln n_k`; every quantity below is evaluated through
//! `a_k = ln n_k - β_k V` and a log-sum-exp, so arbitrary finite energies and
//! weighting factors spanning many decades are safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln Σ exp(a_i)`, stable for any finite input. Empty input gives `-∞`.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + a.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLadder {
    betas: Vec<f64>,
    log_n: Vec<f64>,
}

impl TemperatureLadder {
    pub fn new(betas: Vec<f64>, log_n: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("ladder needs at least one temperature"));
        }
        if betas.len() != log_n.len() {
            return Err(Error::invalid(format!(
                "{} betas but {} weighting factors",
                betas.len(),
                log_n.len()
            )));
        }
        if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::invalid(format!("inverse temperatures must be positive, got {b}")));
        }
        if betas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("inverse temperatures must be strictly decreasing"));
        }
        if let Some(l) = log_n.iter().find(|l| !l.is_finite()) {
            return Err(Error::invalid(format!("ln n_k must be finite, got {l}")));
        }
        Ok(Self { betas, log_n })
    }

    /// All weighting factors equal to one.
    pub fn uniform(betas: Vec<f64>) -> Result<Self> {
        let n = betas.len();
        Self::new(betas, vec![0.0; n])
    }

    /// `β_k = β_0 · ratio^k` for `k = 0..len`, unit weighting factors.
    pub fn geometric(beta0: f64, ratio: f64, len: usize) -> Result<Self> {
        Self::uniform((0..len).map(|k| beta0 * ratio.powi(k as i32)).collect())
    }

    /// Weighting factors `n_k = 1 / Z_k` from `ln Z_k`.
    pub fn with_log_partition(betas: Vec<f64>, log_z: &[f64]) -> Result<Self> {
        Self::new(betas, log_z.iter().map(|z| -z).collect())
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn log_n(&self) -> &[f64] {
        &self.log_n
    }

    pub fn beta_phys(&self) -> f64 {
        self.betas[0]
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            })
        }
    }

    #[inline]
    fn log_term(&self, k: usize, v: f64) -> f64 {
        self.log_n[k] - self.betas[k] * v
    }

    /// `a_k = ln n_k - β_k V`.
    pub fn log_terms(&self, v: f64) -> Vec<f64> {
        (0..self.len()).map(|k| self.log_term(k, v)).collect()
    }

    pub fn weights(&self, v: f64) -> WeightVector {
        let mut w = vec![0.0; self.len()];
        self.weights_into(v, &mut w);
        WeightVector(w)
    }

    /// Allocation-free variant of [`weights`](Self::weights); `out.len()` must equal the ladder length.
    pub fn weights_into(&self, v: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let mut max = f64::NEG_INFINITY;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.log_term(k, v);
            max = max.max(*o);
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    /// Physical-temperature weight `ω_0(V)`.
    pub fn physical_weight(&self, v: f64) -> f64 {
        let a0 = self.log_term(0, v);
        let lse = log_sum_exp(&self.log_terms(v));
        (a0 - lse).exp()
    }

    /// Metropolis acceptance `min(n_to e^{-β_to V} / (n_from e^{-β_from V}), 1)`.
    pub fn acceptance_probability(&self, v: f64, from: usize, to: usize) -> Result<f64> {
        self.check_index(from)?;
        self.check_index(to)?;
        if from == to {
            return Err(Error::invalid("acceptance needs two distinct temperatures"));
        }
        Ok(self.acceptance_unchecked(v, from, to))
    }

    #[inline]
    pub(crate) fn acceptance_unchecked(&self, v: f64, from: usize, to: usize) -> f64 {
        (self.log_term(to, v) - self.log_term(from, v)).exp().min(1.0)
    }

    /// `U(V) = -(1/β_phys) ln Σ_k n_k e^{-β_k V}`.
    ///
    /// This is the ITS effective potential; the normalisation
    /// `ln Σ_j n_j Z_j` of the mixture density is dropped.
    pub fn effective_potential(&self, v: f64) -> f64 {
        -log_sum_exp(&self.log_terms(v)) / self.beta_phys()
    }

    /// `s(V) = Σ_k β_k ω_k / β_phys`, so that `s · f(x) = -∇U(x)`.
    pub fn force_scale(&self, v: f64) -> f64 {
        let w = self.weights(v);
        self.force_scale_from_weights(&w.0)
    }

    pub fn force_scale_from_weights(&self, omega: &[f64]) -> f64 {
        self.betas.iter().zip(omega).map(|(b, w)| b * w).sum::<f64>() / self.beta_phys()
    }

    /// `𝔹(V) = Σ_k (β_phys / β_k) ω_k`, the mobility of the multiplicative-noise
    /// infinite-switching dynamics. Equals `ω_0 + (β_0/β_1) ω_1` for two temperatures.
    pub fn mobility(&self, v: f64) -> f64 {
        let w = self.weights(v);
        self.mobility_from_weights(&w.0)
    }

    pub fn mobility_from_weights(&self, omega: &[f64]) -> f64 {
        let b0 = self.beta_phys();
        self.betas.iter().zip(omega).map(|(b, w)| b0 / b * w).sum()
    }
}

/// Posterior temperature probabilities `ω_k` at a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two(b0: f64, b1: f64) -> TemperatureLadder {
        TemperatureLadder::uniform(vec![b0, b1]).unwrap()
    }

    #[test]
    fn log_terms_examples() {
        assert_eq!(two(1.0, 0.5).log_terms(0.0), vec![0.0, 0.0]);
        assert_eq!(two(2.0, 1.0).log_terms(1.0), vec![-2.0, -1.0]);
        let l = TemperatureLadder::new(vec![1.0, 0.999], vec![0.0, 2f64.ln()]).unwrap();
        let a = l.log_terms(3.0);
        assert_eq!(a[0], -3.0);
        assert_abs_diff_eq!(a[1], 2f64.ln() - 0.999 * 3.0, epsilon = 1e-15);
    }

    #[test]
    fn ladder_validation() {
        assert!(TemperatureLadder::uniform(vec![]).is_err());
        assert!(TemperatureLadder::uniform(vec![1.0, 1.0]).is_err());
        assert!(TemperatureLadder::uniform(vec![1.0, 2.0]).is_err());
        assert!(TemperatureLadder::uniform(vec![1.0, -0.5]).is_err());
        assert!(TemperatureLadder::new(vec![1.0], vec![f64::NAN]).is_err());
        assert!(TemperatureLadder::new(vec![1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(two(1.0, 0.5).weights(0.0).0, vec![0.5, 0.5]);
        assert_eq!(TemperatureLadder::uniform(vec![3.0]).unwrap().weights(7.0).0, vec![1.0]);
        let w = two(2.0, 1.0).weights(1.0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(w[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], e / (1.0 + e), epsilon = 1e-15);
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(two(1.0, 0.5).acceptance_probability(0.0, 0, 1).unwrap(), 1.0);
        let l = two(2.0, 1.0);
        assert_eq!(l.acceptance_probability(1.0, 0, 1).unwrap(), 1.0);
        assert_abs_diff_eq!(
            l.acceptance_probability(1.0, 1, 0).unwrap(),
            (-1f64).exp(),
            epsilon = 1e-15
        );
        assert!(matches!(
            l.acceptance_probability(1.0, 0, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(l.acceptance_probability(1.0, 1, 1).is_err());
    }

    #[test]
    fn effective_potential_examples() {
        let single = TemperatureLadder::uniform(vec![3.0]).unwrap();
        assert_abs_diff_eq!(single.effective_potential(1.7), 1.7, epsilon = 1e-14);
        let expected = -((-2f64).exp() + (-1f64).exp()).ln();
        assert_abs_diff_eq!(two(1.0, 0.5).effective_potential(2.0), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(two(1.0, 0.5).effective_potential(2.0), 0.686738, epsilon = 1e-6);
    }

    #[test]
    fn force_scale_and_mobility_examples() {
        assert_eq!(TemperatureLadder::uniform(vec![4.0]).unwrap().force_scale(2.0), 1.0);
        assert_eq!(TemperatureLadder::uniform(vec![4.0]).unwrap().mobility(2.0), 1.0);
        // equal weights at V = 0
        assert_abs_diff_eq!(two(25.0, 12.5).force_scale(0.0), 37.5 / 50.0, epsilon = 1e-15);

        let l = two(2.0, 1.0);
        let e = std::f64::consts::E;
        let (w0, w1) = (1.0 / (1.0 + e), e / (1.0 + e));
        assert_abs_diff_eq!(l.force_scale(1.0), (2.0 * w0 + w1) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.force_scale(1.0), 0.63447, epsilon = 1e-5);
        assert_abs_diff_eq!(l.mobility(1.0), w0 + 2.0 * w1, epsilon = 1e-15);
        assert_abs_diff_eq!(l.mobility(1.0), 1.7311, epsilon = 1e-4);
        assert_eq!(l.mobility_from_weights(&[1.0, 0.0]), 1.0);
    }

    #[test]
    fn weights_survive_extreme_energies() {
        let l = TemperatureLadder::new(vec![25.0, 12.5, 6.25], vec![0.0, -18.4, 3.0]).unwrap();
        for v in [-1e6, 0.0, 1e6] {
            let w = l.weights(v);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
        }
        // hot end dominates at large V, cold end at very negative V
        assert_abs_diff_eq!(l.force_scale(1e6), 6.25 / 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.force_scale(-1e6), 1.0, epsilon = 1e-12);
    }

    fn ladder_strategy() -> impl Strategy<Value = TemperatureLadder> {
        (1usize..6, 0.5..50.0f64, 0.3..0.9f64)
            .prop_flat_map(|(n, b0, ratio)| {
                prop::collection::vec(-20.0..20.0f64, n).prop_map(move |log_n| {
                    let betas = (0..log_n.len()).map(|k| b0 * ratio.powi(k as i32)).collect();
                    TemperatureLadder::new(betas, log_n).unwrap()
                })
            })
    }

    proptest! {
        #[test]
        fn weights_normalised(l in ladder_strategy(), v in -1e4..1e4f64) {
            let w = l.weights(v);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let s = l.force_scale(v);
            let lo = l.betas()[l.len() - 1] / l.beta_phys();
            prop_assert!(s >= lo - 1e-12 && s <= 1.0 + 1e-12);
            prop_assert!(l.mobility(v) >= 1.0 - 1e-12);
        }

        #[test]
        fn detailed_balance(l in ladder_strategy(), v in -5.0..5.0f64, i in 0usize..6, j in 0usize..6) {
            let (i, j) = (i % l.len(), j % l.len());
            prop_assume!(i != j);
            let fwd = l.acceptance_probability(v, i, j).unwrap() * l.log_terms(v)[i].exp();
            let bwd = l.acceptance_probability(v, j, i).unwrap() * l.log_terms(v)[j].exp();
            prop_assert!((fwd - bwd).abs() <= 1e-12 * fwd.abs().max(bwd.abs()));
        }

        #[test]
        fn n_scaling_invariance(l in ladder_strategy(), v in -5.0..5.0f64, c in -30.0..30.0f64) {
            let shifted = TemperatureLadder::new(
                l.betas().to_vec(),
                l.log_n().iter().map(|x| x + c).collect(),
            ).unwrap();
            for (a, b) in l.weights(v).iter().zip(shifted.weights(v).iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((l.force_scale(v) - shifted.force_scale(v)).abs() < 1e-12);
            let du = shifted.effective_potential(v) - l.effective_potential(v);
            prop_assert!((du + c / l.beta_phys()).abs() < 1e-9 * (1.0 + l.effective_potential(v).abs()));
            if l.len() > 1 {
                let a = l.acceptance_probability(v, 0, 1).unwrap();
                let b = shifted.acceptance_probability(v, 0, 1).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
