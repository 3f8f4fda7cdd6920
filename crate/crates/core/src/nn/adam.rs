use super::{NetSpec, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adaptive-moment optimizer state for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    step: u64,
    m: ParamSet<S>,
    v: ParamSet<S>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(spec: &NetSpec, learning_rate: S) -> Self {
        Adam {
            learning_rate,
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            epsilon: S::lit(1e-8),
            step: 0,
            m: ParamSet::zeros(spec),
            v: ParamSet::zeros(spec),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Rejects non-finite gradients without touching the
    /// parameters or the moments.
    pub fn step(&mut self, params: &mut ParamSet<S>, grads: &ParamSet<S>) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(Error::config("optimizer, parameter and gradient shapes differ"));
        }
        if !grads.is_finite() {
            return Err(Error::training("non-finite gradient"));
        }
        self.step += 1;
        let t = self.step as i32;
        let one = S::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        let step_size = self.learning_rate / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let updates = params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()));
        for ((p, &g), (m, v)) in updates {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let denom = (*v / bc2).sqrt() + eps;
            *p -= step_size * *m / denom;
        }
        params.bump_version();
        if !params.is_finite() {
            return Err(Error::training("parameters became non-finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputHead;

    fn scalar_spec() -> NetSpec {
        // One weight and one bias.
        NetSpec::new(vec![1, 1], OutputHead::Linear).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let spec = NetSpec::mlp(3, &[4], 2, OutputHead::Linear).unwrap();
        let mut params = ParamSet::<f64>::from_flat(&spec, &vec![0.3; spec.num_params()], 0).unwrap();
        let before = params.clone();
        let mut opt = Adam::new(&spec, 0.001);
        opt.step(&mut params, &ParamSet::zeros(&spec)).unwrap();
        assert_eq!(params.to_flat(), before.to_flat());
        assert_eq!(params.version(), 1);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let spec = scalar_spec();
        let mut params = ParamSet::<f64>::from_flat(&spec, &[1.0, 0.0], 0).unwrap();
        let grads = ParamSet::from_flat(&spec, &[2.0, 0.0], 0).unwrap();
        Adam::new(&spec, 0.1).step(&mut params, &grads).unwrap();
        assert!(params.to_flat()[0] < 1.0);
    }

    /// f(x, y) = x^2 + y^2 has its minimum at the origin.
    #[test]
    fn minimizes_quadratic_bowl() {
        let spec = scalar_spec();
        let mut params = ParamSet::<f64>::from_flat(&spec, &[1.0, 1.0], 0).unwrap();
        let mut opt = Adam::new(&spec, 0.05);
        for _ in 0..200 {
            let flat = params.to_flat();
            let grads = ParamSet::from_flat(&spec, &[2.0 * flat[0], 2.0 * flat[1]], 0).unwrap();
            opt.step(&mut params, &grads).unwrap();
        }
        let flat = params.to_flat();
        assert!(flat[0] * flat[0] + flat[1] * flat[1] < 1e-3);
    }

    #[test]
    fn nan_gradient_is_training_error() {
        let spec = scalar_spec();
        let mut params = ParamSet::<f64>::zeros(&spec);
        let grads = ParamSet::from_flat(&spec, &[f64::NAN, 0.0], 0).unwrap();
        let mut opt = Adam::new(&spec, 0.1);
        assert!(matches!(opt.step(&mut params, &grads), Err(Error::Training(_))));
        assert_eq!(params.version(), 0);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn step_count_increments_by_one() {
        let spec = scalar_spec();
        let mut params = ParamSet::<f32>::zeros(&spec);
        let mut opt = Adam::new(&spec, 0.1f32);
        for i in 1..=5 {
            opt.step(&mut params, &ParamSet::from_flat(&spec, &[1.0, 1.0], 0).unwrap()).unwrap();
            assert_eq!(opt.steps(), i);
        }
    }
}
