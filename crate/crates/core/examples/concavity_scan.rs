//! Sign of d²S_q/dt² over a (q, t) grid for a Gaussian, with a
//! finite-difference ladder against the analytic second derivative.

use heatlab::concavity::{concavity_scan, fd_ladder, FdSettings, FlowQuantity, InitialDensity, TimeDerivatives, report_at};
use heatlab::functionals::ReportContext;
use heatlab::mixtures::GaussianMixture;

fn main() -> heatlab::Result<()> {
    let initial = InitialDensity::Mixture(GaussianMixture::single(vec![0.0], 1.0)?);
    let ctx = ReportContext::default();
    let scan = concavity_scan(
        &initial,
        &[1.0, 1.5, 2.0, 2.5, 3.0, 5.0],
        &[0.05, 0.2, 0.5, 1.0],
        &ctx,
        &FdSettings::default(),
    )?;
    print!("{}", scan.to_csv());
    println!("# claims hold: {}", scan.summary.claims_hold());

    // d²/dt² ∫φ² for a unit Gaussian, at decreasing steps
    let t = 0.1;
    let der = TimeDerivatives::from_report(&report_at(&initial, 2.0, t, &ctx)?);
    let ladder = fd_ladder(&initial, FlowQuantity::PowerIntegral(2.0), t, 0.02, der.d2_dt2_int_u2, &ctx)?;
    println!("analytic {:.12e}", ladder.analytic);
    for i in 0..3 {
        println!("h = {:<8} fd {:.12e} gap {:.3e}", ladder.steps[i], ladder.values[i], ladder.gaps[i]);
    }
    println!("orders {:?}", ladder.orders);
    Ok(())
}
