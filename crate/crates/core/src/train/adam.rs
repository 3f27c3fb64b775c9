use crate::model::NetworkParams;
use crate::{Result, SadError};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }

    pub fn for_params(params: &NetworkParams) -> Self {
        Self::new(params.param_count())
    }
}

/// Decoupled weight decay (θ ← θ − lr·wd·θ) followed by a bias-corrected
/// Adam update.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &NetworkParams,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if grads.config != params.config || state.m.len() != params.param_count() {
        return Err(SadError::InvalidShape("optimizer state does not match parameters".into()));
    }
    state.step += 1;
    let bc1 = 1.0 - BETA1.powi(state.step as i32);
    let bc2 = 1.0 - BETA2.powi(state.step as i32);
    let mut k = 0;
    for (p_slice, g_slice) in params.slices_mut().into_iter().zip(grads.slices()) {
        for (p, &g) in p_slice.iter_mut().zip(g_slice) {
            let m = &mut state.m[k];
            let v = &mut state.v[k];
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * weight_decay * *p;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            k += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use rand::SeedableRng;

    fn setup() -> NetworkParams {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        NetworkParams::init_random(&ModelConfig::srsad(4), &mut rng)
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = setup();
        let before = p.flatten();
        let mut g = NetworkParams::zeros(&p.config);
        let signs: Vec<f64> = (0..before.len()).map(|i| if i % 3 == 0 { -2.5 } else { 0.7 }).collect();
        g.assign_flat(&signs);
        let mut st = AdamState::for_params(&p);
        adam_step(&mut p, &g, &mut st, 1e-3, 0.0).unwrap();
        for ((a, b), s) in p.flatten().iter().zip(&before).zip(&signs) {
            assert!((a - b + 1e-3 * s.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut p = setup();
        let before = p.clone();
        let g = NetworkParams::zeros(&p.config);
        let mut st = AdamState::for_params(&p);
        adam_step(&mut p, &g, &mut st, 1e-3, 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn decay_only_step_scales_parameters() {
        let mut p = setup();
        let before = p.flatten();
        let g = NetworkParams::zeros(&p.config);
        let mut st = AdamState::for_params(&p);
        adam_step(&mut p, &g, &mut st, 0.01, 0.1).unwrap();
        for (a, b) in p.flatten().iter().zip(&before) {
            assert!((a - 0.999 * b).abs() < 1e-15);
        }
        assert!(st.v.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut p = setup();
        let g = NetworkParams::zeros(&p.config);
        let mut st = AdamState::new(3);
        assert!(matches!(adam_step(&mut p, &g, &mut st, 1e-3, 0.0), Err(SadError::InvalidShape(_))));
    }
}
