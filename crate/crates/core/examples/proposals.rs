//! Pose-guided segment pool for one synthetic scene, against the uniform
//! baseline with the same seed budget.
//!
//! `cargo run --release --example proposals -- [seed]`

use poseparse::eval::{best_overlaps, pool_curve, CURVE_BUDGETS};
use poseparse::features::gt_part_masks;
use poseparse::parts::PART_NAMES;
use poseparse::proposal::{build_pool_with_stats, build_unguided_pool, default_thresholds};
use poseparse::synth::{generate_scenes, GeneratorConfig};

fn main() -> poseparse::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let scene = generate_scenes(seed, 0, 1, &GeneratorConfig::default())?.remove(0);
    let th = default_thresholds();

    let (guided, stats) = build_pool_with_stats(&scene.image, &scene.joints, &th)?;
    let unguided = build_unguided_pool(&scene.image, &th)?;
    println!(
        "guided: {} seed/threshold pairs, {} grown, {} kept after dedup; unguided: {} kept",
        stats.candidates,
        stats.grown,
        stats.kept,
        unguided.len()
    );

    let gt = gt_part_masks(&scene);
    let bg = best_overlaps(&guided.segments, &gt)?;
    let bu = best_overlaps(&unguided.segments, &gt)?;
    println!("\n{:>18}  {:>7}  {:>8}", "best IoU", "guided", "unguided");
    for (p, name) in PART_NAMES.iter().enumerate() {
        if let (Some(g), Some(u)) = (bg[p], bu[p]) {
            println!("{name:>18}  {g:>7.3}  {u:>8.3}");
        }
    }

    // Pools are ordered so that every prefix is a usable smaller pool.
    let gc = pool_curve(&[guided.segments], &[gt.clone()], &CURVE_BUDGETS)?;
    let uc = pool_curve(&[unguided.segments], &[gt], &CURVE_BUDGETS)?;
    println!("\n{:>8}  {:>10}  {:>12}", "budget", "guided AOI", "unguided AOI");
    for (g, u) in gc.iter().zip(&uc) {
        println!("{:>8}  {:>10.3}  {:>12.3}", g.budget, g.aoi, u.aoi);
    }
    Ok(())
}
