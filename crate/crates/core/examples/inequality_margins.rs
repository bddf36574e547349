//! The two inequalities with constants √5+1 and 2√5+6, the one-dimensional
//! bound 0 ≤ cross ≤ 3 laplacian_sq, and the scalar optimizations the
//! constants come from.

use heatlab::functionals::{report, PositiveField, ReportContext};
use heatlab::grid::TorusGrid;
use heatlab::heatflow::{random_torus_density, DeltaIndex};
use heatlab::inequalities::{
    all_margins, chain_consistency, epsilon_sweep_1d, cross_constant_minimize, CROSS_CONSTANT, QUARTIC_CONSTANT,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatlab::Result<()> {
    println!("constants: cross {} = {:.10}, quartic {} = {:.10}", CROSS_CONSTANT, CROSS_CONSTANT.value(), QUARTIC_CONSTANT, QUARTIC_CONSTANT.value());
    let (eps, min) = cross_constant_minimize();
    println!("scalar minimization: eps* = {eps:.10}, min = {min:.10}");
    let sweep = epsilon_sweep_1d(2001);
    println!("one-dimensional sweep: max {:.12} at eps = {:.12}", sweep.max, sweep.argmax);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (dim, n, b, amp) in [(1, 1024, 4, 1.5), (2, 256, 3, 1.2)] {
        let grid = TorusGrid::new(dim, n, 2.0 * std::f64::consts::PI)?;
        let (_, phi) = random_torus_density(&grid, b, amp, &mut rng)?;
        let r = report(PositiveField::Torus(&phi), &ReportContext::new(DeltaIndex::new(0.0)?))?;
        for m in all_margins(&r)? {
            println!(
                "d={dim} {:<18} lhs {:.6e} rhs {:.6e} margin {:.6e} lhs/base {:?}",
                m.name, m.lhs, m.rhs, m.margin, m.ratio_to_base
            );
        }
        let chain = chain_consistency(&r, 1e-8);
        println!("d={dim} chain consistent: {}", chain.consistent);
    }
    Ok(())
}
