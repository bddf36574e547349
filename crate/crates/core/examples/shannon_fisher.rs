//! The q = 1 branch: Shannon entropy, Fisher information as its time
//! derivative, and d²H/dt² ≤ 0 along the flow on the torus.

use heatlab::concavity::{shannon_branch, InitialDensity};
use heatlab::functionals::ReportContext;
use heatlab::grid::TorusGrid;
use heatlab::heatflow::random_torus_density;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatlab::Result<()> {
    let grid = TorusGrid::new(2, 128, 2.0 * std::f64::consts::PI)?;
    let (_, phi) = random_torus_density(&grid, 3, 1.2, &mut ChaCha8Rng::seed_from_u64(2))?;
    let rows = shannon_branch(&InitialDensity::torus(phi)?, &[0.05, 0.1, 0.2, 0.5], 1e-3, &ReportContext::default())?;
    println!("{:>6} {:>20} {:>20} {:>20} {:>20} {:>20}", "t", "H", "fisher", "dH/dt fd", "d2H/dt2", "fd");
    for r in rows {
        println!(
            "{:>6} {:>20.12e} {:>20.12e} {:>20.12e} {:>20.12e} {:>20.12e}",
            r.t, r.entropy, r.fisher, r.fisher_fd, r.d2h_dt2, r.d2h_dt2_fd
        );
    }
    Ok(())
}
