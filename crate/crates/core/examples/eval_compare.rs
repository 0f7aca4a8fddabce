//! Proposal quality of pose-guided and uniform pools over a set of scenes,
//! as APR/AOI curves against pool size.
//!
//! `cargo run --release --example eval_compare -- [n_scenes]`

use poseparse::eval::{aoi, apr, curve_mean, pool_curve, CURVE_BUDGETS};
use poseparse::features::gt_part_masks;
use poseparse::pipeline::{propose, PoolMode};
use poseparse::proposal::default_thresholds;
use poseparse::synth::{generate_scenes, GeneratorConfig};

fn main() -> poseparse::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let scenes = generate_scenes(42, 0, n, &GeneratorConfig::default())?;
    let gts: Vec<_> = scenes.iter().map(gt_part_masks).collect();

    println!("{n} scenes, APR counts a part recalled at IoU > 0.5");
    for mode in [PoolMode::Guided, PoolMode::Unguided] {
        let pools = scenes
            .iter()
            .map(|s| propose(s, mode, &default_thresholds()).map(|p| p.segments))
            .collect::<poseparse::Result<Vec<_>>>()?;
        let mean_size = pools.iter().map(Vec::len).sum::<usize>() as f64 / n as f64;
        let curve = pool_curve(&pools, &gts, &CURVE_BUDGETS)?;
        let (ma, mo) = curve_mean(&curve);
        println!("\n{} (mean pool {mean_size:.0})", mode.name());
        for pt in &curve {
            println!("  first {:>4}: APR {:.3}  AOI {:.3}", pt.budget, pt.apr, pt.aoi);
        }
        println!("  full pool : APR {:.3}  AOI {:.3}", apr(&pools, &gts)?, aoi(&pools, &gts)?);
        println!("  curve mean: APR {ma:.3}  AOI {mo:.3}");
    }
    Ok(())
}
