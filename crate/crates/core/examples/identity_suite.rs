//! The two identities linking cross, quartic, hess_sqrt, lap_sqrt and
//! laplacian_sq, the integration-by-parts relations and the Bochner
//! formula, on random torus densities and mixtures.

use heatlab::functionals::{PositiveField, ReportContext};
use heatlab::grid::TorusGrid;
use heatlab::heatflow::{delta_transform, delta_transform_mixture, random_torus_density, DeltaIndex};
use heatlab::identities::{residual_suite, IdentityResiduals};
use heatlab::mixtures::GaussianMixture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let delta = DeltaIndex::new(0.25)?;
    let ctx = ReportContext::new(delta);
    println!("case,{}", IdentityResiduals::CSV_HEADER);
    for (dim, n, b, amp) in [(1, 1024, 4, 1.5), (2, 256, 3, 1.2), (3, 64, 2, 0.8)] {
        let grid = TorusGrid::new(dim, n, 2.0 * std::f64::consts::PI)?;
        let (_, phi) = random_torus_density(&grid, b, amp, &mut rng)?;
        let u = delta_transform(&phi, delta)?;
        let (res, _) = residual_suite(PositiveField::Torus(&u), &ctx)?;
        println!("torus d={dim},{}", res.csv_row());

        let m = GaussianMixture::random(dim, 3, 1.5, (0.4, 1.6), &mut rng)?;
        let u = delta_transform_mixture(&m, delta);
        let (res, _) = residual_suite(PositiveField::Mixture(&u), &ctx)?;
        println!("mixture d={dim},{}", res.csv_row());
    }
    Ok(())
}
