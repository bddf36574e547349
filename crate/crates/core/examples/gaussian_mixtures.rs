//! Closed-form heat flow of a Gaussian mixture: variances grow by `2t`,
//! and for a single Gaussian the Tsallis entropy is known exactly.

use heatlab::functionals::{tsallis, PositiveField};
use heatlab::heatflow::MixtureField;
use heatlab::mixtures::{gaussian_tsallis_closed_form, Component, GaussianMixture};

fn main() -> heatlab::Result<()> {
    let single = GaussianMixture::single(vec![0.0, 0.0], 1.0)?;
    for t in [0.0, 0.25, 1.0] {
        let phi = MixtureField::new(single.evolve(t)?, 1.0, 1.0)?;
        let numeric = tsallis(PositiveField::Mixture(&phi), 1.5)?;
        let exact = gaussian_tsallis_closed_form(1.0 + 2.0 * t, 2, 1.5)?;
        println!("t = {t}: S_1.5 quadrature {numeric:.16e}, closed form {exact:.16e}");
    }

    let two = GaussianMixture::new(vec![
        Component { weight: 0.3, mean: vec![-1.5], variance: 0.4 },
        Component { weight: 0.7, mean: vec![1.0], variance: 0.9 },
    ])?;
    for t in [0.0, 0.5, 2.0] {
        let m = two.evolve(t)?;
        let x = [0.0];
        let jet = m.density_and_derivatives(&x);
        println!(
            "t = {t}: variances {:?}, φ(0) = {:.6}, φ'(0) = {:.6}, φ''(0) = {:.6}",
            m.components().iter().map(|c| c.variance).collect::<Vec<_>>(),
            jet.value,
            jet.gradient[0],
            jet.hessian[0][0]
        );
    }
    Ok(())
}
