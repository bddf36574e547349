//! A small multi-start search for densities with large quartic/laplacian_sq,
//! then a bit-for-bit replay of the best candidate.

use heatlab::extremal::{maximize, report_gap, RatioObjective, SearchConfig};

fn main() -> heatlab::Result<()> {
    let config = SearchConfig {
        starts: 4,
        budget: 60,
        seed: 42,
        ..SearchConfig::default_for(RatioObjective::QuarticOverLap, 1)
    };
    let result = maximize(&config)?;
    let gap = report_gap(&result, result.constant);
    println!("best ratio {:.12} (start {}), constant {:.12}, gap {:.6}", result.best_ratio, result.best_start, gap.constant, gap.gap);
    for s in &result.starts {
        println!("start {}: best {:?} after {} evaluations, rejected {:?}", s.start, s.best_ratio, s.evaluations, s.rejections);
    }
    let replay = result.replay_best()?;
    println!("replayed best ratio {replay:.17e}, identical: {}", replay.to_bits() == result.best_ratio.to_bits());
    let again = maximize(&config)?;
    println!("second run identical: {}", again.same_outcome(&result));
    Ok(())
}
