//! Every integral functional of `u = φ^{1/(1+δ)}` on both backends, printed
//! as the CSV rows the runner writes.

use heatlab::functionals::{report, FunctionalReport, PositiveField, ReportContext};
use heatlab::grid::TorusGrid;
use heatlab::heatflow::{delta_transform, delta_transform_mixture, random_torus_density, DeltaIndex};
use heatlab::mixtures::GaussianMixture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = TorusGrid::new(1, 1024, 2.0 * std::f64::consts::PI)?;
    let (_, phi) = random_torus_density(&grid, 4, 1.5, &mut rng)?;
    let mixture = GaussianMixture::random(1, 3, 1.5, (0.4, 1.6), &mut rng)?;

    println!("{}", FunctionalReport::CSV_HEADER);
    for delta in [0.0, 0.5, 1.0] {
        let d = DeltaIndex::new(delta)?;
        let ctx = ReportContext::new(d);
        let u = delta_transform(&phi, d)?;
        let r = report(PositiveField::Torus(&u), &ctx)?;
        println!("{}", r.csv_row());
        let m = delta_transform_mixture(&mixture, d);
        let r = report(PositiveField::Mixture(&m), &ctx)?;
        println!("{}", r.csv_row());
        println!("# decomposition residual {:.3e}", r.decomposition_residual());
    }
    Ok(())
}
