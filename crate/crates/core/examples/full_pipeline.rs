//! Runs every stage through the on-disk pipeline, as the `poseparse` binary
//! does, and prints the evaluation tables.
//!
//! `cargo run --release --example full_pipeline -- [workdir]`

use poseparse::pipeline::{render_compare, PipelineConfig, PoolMode, Run, Stage};

fn main() -> poseparse::Result<()> {
    let mut config = PipelineConfig::default();
    config.workdir = std::env::args().nth(1).unwrap_or_else(|| "full_pipeline_run".into()).into();
    config.seed = 1;
    config.dataset.n_train = 40;
    config.dataset.n_test = 10;
    config.proposal.inject_gt = true;
    config.eval.compare = vec![PoolMode::Guided, PoolMode::Unguided];
    config.eval.overlay = true;

    // Rerunning with the same workdir skips finished stages.
    let run = Run::new(config)?;
    for stage in Stage::ALL {
        let o = run.run_stage(stage)?;
        let state = if o.skipped { "up to date" } else { "done" };
        println!("{:>12}: {state} ({} files, {} ms)", stage.name(), o.manifest.outputs.len(), o.manifest.elapsed_ms);
    }
    let summary = run.eval_summary()?;
    println!();
    for r in &summary.reports {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!("{:>9}: APR {}  AOI {}  pixel acc {}", r.label, f(r.apr), f(r.aoi), f(r.pixel_accuracy));
    }
    println!("\n{}", render_compare(&run.compare_report()?));
    Ok(())
}
