use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::{softmax_with_temperature, Scalar};

/// Likelihoods are clamped to at least this value before normalization.
pub const LIKELIHOOD_FLOOR: f64 = 1e-8;

/// Temperature-scaled softmax with max-subtraction.
pub fn softer_softmax<S: Scalar>(values: &[S], temperature: S) -> Result<Vec<S>> {
    if !(temperature > S::zero()) || values.is_empty() {
        return Err(Error::config("softer softmax needs values and a positive temperature"));
    }
    Ok(softmax_with_temperature(values, temperature))
}

/// One Bayes update from per-level likelihoods of the observed action.
/// `floor = 0` gives the exact update.
pub fn posterior_from_likelihoods<S: Scalar>(likelihoods: &[S], prior: &[S], floor: S) -> Result<Vec<S>> {
    if likelihoods.len() != prior.len() {
        return Err(Error::config("one likelihood per prior entry expected"));
    }
    let unnorm: Vec<S> = likelihoods
        .iter()
        .zip(prior)
        .map(|(l, p)| if *l > floor { *l } else { floor } * *p)
        .collect();
    let total: S = unnorm.iter().copied().sum();
    if !(total > S::zero()) {
        return Err(Error::usage("posterior normalizer is zero"));
    }
    Ok(unnorm.into_iter().map(|u| u / total).collect())
}

/// Decayed evidence over the last `horizon` posteriors and the mixing weights
/// derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixer<S> {
    lambda: S,
    horizon: usize,
    temperature: S,
    history: VecDeque<Vec<S>>,
    psi: Vec<S>,
    prior: Vec<S>,
    alpha: Vec<S>,
}

impl<S: Scalar> Mixer<S> {
    pub fn new(m: usize, lambda: S, horizon: usize, temperature: S) -> Result<Self> {
        if m == 0 || horizon == 0 {
            return Err(Error::config("mixer needs at least one level and a positive horizon"));
        }
        if !(lambda > S::zero() && lambda <= S::one()) || !(temperature > S::zero()) {
            return Err(Error::config("mixer needs lambda in (0, 1] and a positive temperature"));
        }
        let uniform = vec![S::one() / S::lit(m as f64); m];
        Ok(Mixer {
            lambda,
            horizon,
            temperature,
            history: VecDeque::with_capacity(horizon),
            psi: vec![S::zero(); m],
            prior: uniform.clone(),
            alpha: uniform,
        })
    }

    pub fn levels(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self) -> &[S] {
        &self.psi
    }

    pub fn prior(&self) -> &[S] {
        &self.prior
    }

    pub fn alpha(&self) -> &[S] {
        &self.alpha
    }

    /// Stored posteriors, oldest first.
    pub fn history(&self) -> impl Iterator<Item = &Vec<S>> {
        self.history.iter()
    }

    pub fn update(&mut self, posterior: &[S]) -> Result<()> {
        if posterior.len() != self.levels() {
            return Err(Error::config("posterior length differs from the number of levels"));
        }
        if self.history.len() == self.horizon {
            self.history.pop_front();
        }
        self.history.push_back(posterior.to_vec());
        let m = self.levels();
        let n = self.history.len();
        self.psi = vec![S::zero(); m];
        self.prior = vec![S::zero(); m];
        // The newest entry has age 1.
        let mut weight = S::one();
        for post in self.history.iter().rev() {
            weight *= self.lambda;
            for i in 0..m {
                self.psi[i] += weight * post[i];
                self.prior[i] += post[i];
            }
        }
        let count = S::lit(n as f64);
        self.prior.iter_mut().for_each(|p| *p /= count);
        self.alpha = softer_softmax(&self.psi, self.temperature)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::is_probability_vector;

    #[test]
    fn softer_softmax_cases() {
        assert_eq!(softer_softmax(&[0.3, 0.3, 0.3], 1.0).unwrap(), vec![1.0 / 3.0; 3]);
        let w = softer_softmax(&[1.0f64, 0.0], 1e6).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-5);
        let w = softer_softmax(&[1.0f64, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((w[0] - e / (e + 1.0)).abs() < 1e-12 && (w[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!(softer_softmax(&[1.0], 0.0).is_err());
        let big = softer_softmax(&[1000.0, 999.0, -1000.0], 1.0).unwrap();
        assert!(is_probability_vector(&big, 1e-12));
    }

    #[test]
    fn softer_softmax_is_monotone() {
        let v = [0.2, -1.0, 3.5, 0.21];
        let w = softer_softmax(&v, 1.1 / std::f64::consts::E).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if v[i] > v[j] {
                    assert!(w[i] > w[j]);
                }
            }
        }
    }

    #[test]
    fn posterior_cases() {
        let p = posterior_from_likelihoods(&[0.8, 0.2], &[0.5, 0.5], LIKELIHOOD_FLOOR).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
        let p = posterior_from_likelihoods(&[0.5f64, 0.3, 0.2], &[0.2, 0.3, 0.5], 0.0).unwrap();
        let hand = [0.10 / 0.29, 0.09 / 0.29, 0.10 / 0.29];
        for (a, b) in p.iter().zip(hand) {
            assert!((a - b).abs() < 1e-12);
        }
        let prior = [0.1, 0.6, 0.3];
        let same = posterior_from_likelihoods(&[0.4; 3], &prior, LIKELIHOOD_FLOOR).unwrap();
        for (a, b) in same.iter().zip(prior) {
            assert!((a - b).abs() < 1e-15);
        }
        // The floor keeps an all-zero likelihood vector well defined.
        let p = posterior_from_likelihoods(&[0.0, 0.0], &[0.5, 0.5], LIKELIHOOD_FLOOR).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(posterior_from_likelihoods(&[0.0, 0.0], &[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn mixer_single_posterior() {
        let mut mixer = Mixer::new(2, 0.9f64, 10, 1.0).unwrap();
        assert_eq!(mixer.alpha(), &[0.5, 0.5]);
        mixer.update(&[1.0, 0.0]).unwrap();
        assert!((mixer.psi()[0] - 0.9).abs() < 1e-15);
        assert_eq!(mixer.psi()[1], 0.0);
        assert!(mixer.alpha()[0] > mixer.alpha()[1]);
    }

    #[test]
    fn mixer_two_step_window() {
        let mut mixer = Mixer::new(2, 0.5, 2, 1.0).unwrap();
        mixer.update(&[1.0, 0.0]).unwrap();
        mixer.update(&[0.0, 1.0]).unwrap();
        assert_eq!(mixer.psi(), &[0.25, 0.5]);
        assert_eq!(mixer.prior(), &[0.5, 0.5]);
        // Window of two: the first posterior falls out.
        mixer.update(&[0.0, 1.0]).unwrap();
        assert_eq!(mixer.psi(), &[0.0, 0.75]);
        assert_eq!(mixer.history().count(), 2);
    }

    #[test]
    fn prior_converges_to_constant_posterior() {
        let mut mixer = Mixer::new(3, 0.7f32, 4, 1.0).unwrap();
        for _ in 0..20 {
            mixer.update(&[0.2, 0.5, 0.3]).unwrap();
        }
        for (p, q) in mixer.prior().iter().zip([0.2f32, 0.5, 0.3]) {
            assert!((p - q).abs() < 1e-6);
        }
        assert!(is_probability_vector(mixer.alpha(), 1e-6));
    }
}
