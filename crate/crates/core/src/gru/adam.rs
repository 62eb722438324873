use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::GruParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    m: GruParams<T>,
    v: GruParams<T>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &GruParams<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &GruParams<T> {
        &self.m
    }

    pub fn second_moment(&self) -> &GruParams<T> {
        &self.v
    }
}

/// One bias-corrected Adam update of a flat tensor at step `t` (1-based).
pub fn adam_update<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    cfg: &AdamConfig,
) {
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let one = T::one();
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    let c1 = one - b1.powi(t as i32);
    let c2 = one - b2.powi(t as i32);
    for (((th, &g), mi), vi) in theta
        .iter_mut()
        .zip(grad)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *mi = b1 * *mi + (one - b1) * g;
        *vi = b2 * *vi + (one - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *th -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Advances the step counter and updates every tensor in place.
///
/// Nothing is modified when any gradient entry is non-finite.
pub fn adam_step<T: Scalar>(
    params: &mut GruParams<T>,
    grads: &GruParams<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.manifest() != params.manifest() {
        return Err(Error::Shape(
            "gradient shapes differ from parameters".into(),
        ));
    }
    for (name, g) in grads.tensors() {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    state.t += 1;
    let t = state.t;
    let AdamState { m, v, .. } = state;
    for ((((_, th), (_, g)), (_, mi)), (_, vi)) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(m.tensors_mut())
        .zip(v.tensors_mut())
    {
        adam_update(th, g, mi, vi, t, cfg);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted_adam(theta0: f64, steps: usize, grad: impl Fn(f64) -> f64) -> Vec<f64> {
        let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
        let (mut th, mut m, mut v) = (theta0, 0.0, 0.0);
        let mut out = Vec::new();
        for k in 1..=steps {
            let g = grad(th);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - f64::powi(b1, k as i32));
            let vh = v / (1.0 - f64::powi(b2, k as i32));
            th -= lr * mh / (vh.sqrt() + eps);
            out.push(th);
        }
        out
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut th, mut m, mut v) = ([0.0f64], [0.0], [0.0]);
        adam_update(&mut th, &[2.0], &mut m, &mut v, 1, &AdamConfig::default());
        assert!((th[0] + 1e-3).abs() < 1e-9, "{}", th[0]);
    }

    #[test]
    fn quadratic_trajectory_matches_script() {
        let expected = scripted_adam(1.0, 5, |x| 2.0 * x);
        let (mut th, mut m, mut v) = ([1.0f64], [0.0], [0.0]);
        for (k, want) in expected.iter().enumerate() {
            let g = [2.0 * th[0]];
            adam_update(
                &mut th,
                &g,
                &mut m,
                &mut v,
                k as u64 + 1,
                &AdamConfig::default(),
            );
            assert!((th[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = GruParams::<f64>::zeros(3, 2, 2, 2);
        p.w_out.as_mut_slice()[0] = 0.25;
        let before = p.clone();
        let grads = p.zeros_like();
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &grads, &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = GruParams::<f64>::zeros(3, 2, 2, 2);
        let mut grads = p.zeros_like();
        grads.b_h[1] = f64::NAN;
        let mut state = AdamState::new(&p);
        let err = adam_step(&mut p, &grads, &mut state, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient("b_h")));
        assert_eq!(state.step(), 0);
    }

    #[test]
    fn second_moment_stays_non_negative() {
        let mut p = GruParams::<f32>::zeros(4, 2, 3, 2);
        let mut state = AdamState::new(&p);
        let mut grads = p.zeros_like();
        for (i, (_, g)) in grads.tensors_mut().into_iter().enumerate() {
            for (j, x) in g.iter_mut().enumerate() {
                *x = ((i * 7 + j) as f32).sin();
            }
        }
        for _ in 0..3 {
            adam_step(&mut p, &grads, &mut state, &AdamConfig::default()).unwrap();
        }
        assert!(state
            .second_moment()
            .tensors()
            .iter()
            .all(|(_, v)| v.iter().all(|x| *x >= 0.0)));
    }
}
