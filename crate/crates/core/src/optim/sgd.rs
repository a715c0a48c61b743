use crate::error::{Error, Result};
use crate::network::Params;

/// Heavy-ball momentum: `v ← μv − ηg`, `θ ← θ + v`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    pub velocity: Params,
    pub momentum: f64,
}

impl MomentumState {
    pub fn new(params: &Params, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(MomentumState { velocity: params.zeros_like(), momentum })
    }
}

/// One update. A non-finite gradient aborts before anything is modified.
pub fn sgd_step(params: &mut Params, grads: &Params, state: &mut MomentumState, rate: f64) -> Result<()> {
    params.check_layout(grads)?;
    params.check_layout(&state.velocity)?;
    if let Some(layer) = grads.first_non_finite() {
        return Err(Error::layer(layer, "non-finite gradient; update aborted"));
    }
    state.velocity.scale(state.momentum);
    state.velocity.add_scaled(grads, -rate)?;
    params.add_scaled(&state.velocity, 1.0)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Architecture, LayerSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Params, Params) {
        let arch = Architecture::new(&[3], vec![LayerSpec::Dense { units: 2 }], 2).unwrap();
        let p = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(1));
        let g = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(2));
        (p, g)
    }

    #[test]
    fn plain_sgd_without_momentum() {
        let (mut p, g) = setup();
        let before = p.flatten();
        let mut s = MomentumState::new(&p, 0.0).unwrap();
        sgd_step(&mut p, &g, &mut s, 0.1).unwrap();
        for ((a, b), gv) in p.flatten().iter().zip(&before).zip(g.flatten()) {
            assert!((a - (b - 0.1 * gv)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_momentum_steps() {
        let (mut p, g) = setup();
        let before = p.flatten();
        let mut s = MomentumState::new(&p, 0.9).unwrap();
        sgd_step(&mut p, &g, &mut s, 0.01).unwrap();
        sgd_step(&mut p, &g, &mut s, 0.01).unwrap();
        for ((a, b), gv) in p.flatten().iter().zip(&before).zip(g.flatten()) {
            assert!((a - b - (-0.01 * gv * 2.9)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let (mut p, g) = setup();
        let before = p.clone();
        let mut s = MomentumState::new(&p, 0.9).unwrap();
        for _ in 0..5 {
            sgd_step(&mut p, &g.zeros_like(), &mut s, 0.3).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let (mut p, mut g) = setup();
        g.layers[1].as_mut().unwrap().bias.data_mut()[0] = f64::NAN;
        let before = p.clone();
        let mut s = MomentumState::new(&p, 0.9).unwrap();
        let err = sgd_step(&mut p, &g, &mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::Layer { layer: 1, .. }), "{err}");
        assert_eq!(p, before);
    }
}
