use crate::error::{Error, Result};
use crate::net::{Gradients, ModelParameters};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Parameters plus optimizer state and early-stopping bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParameters,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
    pub best_fscore: f64,
    pub epochs_since_improvement: usize,
}

impl TrainState {
    pub fn new(params: ModelParameters) -> Self {
        let n = params.param_count();
        Self {
            params,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
            best_fscore: f64::NEG_INFINITY,
            epochs_since_improvement: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &mut TrainState, grads: &Gradients, lr: f64) -> Result<()> {
    let n = state.params.param_count();
    if grads.as_slice().len() != n || grads.tensor_infos() != state.params.tensor_infos() {
        return Err(Error::ModelShape("gradient layout does not match parameters".into()));
    }
    if let Some(i) = grads.as_slice().iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite gradient at parameter {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let theta = state.params.as_mut_slice();
    for i in 0..n {
        let g = grads.as_slice()[i];
        let m = BETA1 * state.first_moment[i] + (1.0 - BETA1) * g;
        let v = BETA2 * state.second_moment[i] + (1.0 - BETA2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / c1;
        let v_hat = v / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Hyper;

    fn setup() -> (TrainState, Gradients) {
        let p = ModelParameters::init(Hyper::new(8).unwrap(), 3);
        let g = p.zero_gradients();
        (TrainState::new(p), g)
    }

    #[test]
    fn first_step_matches_closed_form() {
        let (mut s, mut g) = setup();
        let before = s.params.as_slice().to_vec();
        let grads = [0.3, -2.0, 1e-3, 0.0];
        g.as_mut_slice()[..4].copy_from_slice(&grads);
        let lr = 1e-3;
        adam_step(&mut s, &g, lr).unwrap();
        for (i, gi) in grads.iter().enumerate() {
            // t = 1: m_hat = g, v_hat = g^2.
            let expect = before[i] - lr * gi / (gi.abs() + EPSILON);
            assert!((s.params.as_slice()[i] - expect).abs() < 1e-15, "param {i}");
        }
        assert_eq!(&s.params.as_slice()[4..], &before[4..]);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut s, g) = setup();
        let before = s.params.clone();
        for _ in 0..5 {
            adam_step(&mut s, &g, 0.1).unwrap();
        }
        assert_eq!(s.params, before);
        assert_eq!(s.step(), 5);
    }

    #[test]
    fn shape_mismatch() {
        let (mut s, _) = setup();
        let other = ModelParameters::zeros(Hyper::new(16).unwrap()).zero_gradients();
        assert!(matches!(adam_step(&mut s, &other, 0.1), Err(Error::ModelShape(_))));
    }
}
