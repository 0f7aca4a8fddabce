//! Structural max-margin learning with one slack per example, solved by
//! cutting planes over a working set of margin constraints.

use serde::{Deserialize, Serialize};

use super::infer::{loss, loss_augmented_infer, oracle_parse};
use super::model::AogLayout;
use super::score::{joint_feature, LeafGain, ParseInput, ParseTree, SparseVec};
use super::structure::AogStructure;
use crate::error::{Error, Result};
use crate::geom::SegmentMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructConfig {
    pub c: f64,
    pub k: usize,
    pub max_iters: usize,
    /// A constraint enters the working set when it beats the current slack
    /// by more than this.
    pub tol: f64,
    pub qp_tol: f64,
    pub qp_max_sweeps: usize,
}

impl Default for StructConfig {
    fn default() -> Self {
        StructConfig {
            c: 1.0,
            k: super::infer::DEFAULT_K,
            max_iters: 50,
            tol: 1e-3,
            qp_tol: 1e-6,
            qp_max_sweeps: 10_000,
        }
    }
}

impl StructConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("AOG C must be positive, got {}", self.c)));
        }
        if self.k == 0 || self.max_iters == 0 || self.qp_max_sweeps == 0 {
            return Err(Error::Config("AOG k, max_iters and qp_max_sweeps must be positive".into()));
        }
        if !(self.tol > 0.0 && self.qp_tol > 0.0) {
            return Err(Error::Config("AOG tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// One training image: candidates, per-leaf IoU gains and the oracle parse.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub input: ParseInput,
    pub gain: LeafGain,
    pub oracle: ParseTree,
    pub oracle_delta: f64,
    oracle_phi: SparseVec,
}

impl TrainExample {
    pub fn new(
        s: &AogStructure,
        layout: &AogLayout,
        input: ParseInput,
        gt: &[SegmentMask],
        k: usize,
    ) -> Result<Self> {
        let gain = LeafGain::from_ground_truth(&input, gt)?;
        let oracle = oracle_parse(s, layout, &input, &gain, k)?.tree;
        let oracle_phi = joint_feature(s, layout, &input, &oracle)?;
        Ok(TrainExample {
            oracle_delta: gain.delta(&oracle),
            input,
            gain,
            oracle,
            oracle_phi,
        })
    }

    pub fn oracle_feature(&self) -> &SparseVec {
        &self.oracle_phi
    }
}

struct Constraint {
    /// `Φ(oracle) − Φ(hyp)`.
    dphi: SparseVec,
    loss: f64,
    alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Working-set dual objective after each re-solve.
    pub dual: Vec<f64>,
    /// `½‖W‖² + C Σ ξ_n`, with slacks from the most violated constraints
    /// found at each pass.
    pub primal: Vec<f64>,
    pub added: Vec<usize>,
    pub converged: bool,
    /// Final working-set slack `ξ_n` per example.
    pub slacks: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the dual over the working set by pairwise coordinate ascent. Each
/// example's multipliers share the budget `C` with an implicit slack
/// multiplier (`Φ = 0`, loss 0), so pairs trade mass inside one group.
fn solve_qp(groups: &mut [Vec<Constraint>], w: &mut [f64], c: f64, tol: f64, max_sweeps: usize) {
    for _ in 0..max_sweeps {
        let mut worst = 0.0f64;
        for g in groups.iter_mut() {
            if g.is_empty() {
                continue;
            }
            for _ in 0..GROUP_STEPS {
                let slack_alpha = c - g.iter().map(|k| k.alpha).sum::<f64>();
                // gradients of the dual; index `g.len()` is the slack
                let grads: Vec<f64> = g.iter().map(|k| k.loss - k.dphi.dot(w)).collect();
                let grad = |i: usize| if i == g.len() { 0.0 } else { grads[i] };
                let alpha = |i: usize| if i == g.len() { slack_alpha } else { g[i].alpha };
                let n = g.len() + 1;
                let up = (0..n).max_by(|&a, &b| grad(a).total_cmp(&grad(b)).then(b.cmp(&a))).unwrap();
                let down = (0..n)
                    .filter(|&i| alpha(i) > 0.0)
                    .min_by(|&a, &b| grad(a).total_cmp(&grad(b)).then(a.cmp(&b)));
                let Some(down) = down else { break };
                let gap = grad(up) - grad(down);
                if gap < tol || up == down {
                    break;
                }
                worst = worst.max(gap);
                let diff = match (up == g.len(), down == g.len()) {
                    (true, _) => SparseVec::default().sub(&g[down].dphi),
                    (_, true) => g[up].dphi.clone(),
                    _ => g[up].dphi.sub(&g[down].dphi),
                };
                let q = diff.sq_norm();
                let t = if q > 0.0 { (gap / q).min(alpha(down)) } else { alpha(down) };
                if up < g.len() {
                    g[up].alpha += t;
                }
                if down < g.len() {
                    g[down].alpha = (g[down].alpha - t).max(0.0);
                }
                diff.add_to(w, t);
            }
        }
        if worst < tol {
            return;
        }
    }
}

const GROUP_STEPS: usize = 1000;

fn dual_objective(groups: &[Vec<Constraint>], w: &[f64]) -> f64 {
    let lin: f64 = groups.iter().flatten().map(|k| k.alpha * k.loss).sum();
    lin - 0.5 * dot(w, w)
}

/// Learns `W`. Each pass finds every example's most violated parse by
/// loss-augmented inference, adds it when it exceeds the example's slack by
/// `tol`, then re-solves the dual over all collected constraints. Stops when
/// a pass adds nothing or after `max_iters` passes.
pub fn train_structural(
    s: &AogStructure,
    layout: &AogLayout,
    examples: &[TrainExample],
    config: &StructConfig,
) -> Result<(Vec<f64>, TrainTrace)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::DegenerateData("no AOG training examples".into()));
    }
    // an example whose ground truth has no visible part gives no signal
    if examples
        .iter()
        .all(|e| e.gain.invisible.iter().all(|&v| v == 1.0))
    {
        return Err(Error::DegenerateData("no visible parts in any training example".into()));
    }
    let mut w = vec![0.0; layout.dim];
    let mut groups: Vec<Vec<Constraint>> = (0..examples.len()).map(|_| Vec::new()).collect();
    let mut trace = TrainTrace::default();
    for _ in 0..config.max_iters {
        let mut added = 0;
        let mut slack_sum = 0.0;
        for (n, ex) in examples.iter().enumerate() {
            let hyp = loss_augmented_infer(s, layout, &w, &ex.input, &ex.gain, ex.oracle_delta, config.k)?;
            let phi = joint_feature(s, layout, &ex.input, &hyp.tree)?;
            let dphi = ex.oracle_phi.sub(&phi);
            let l = loss(&ex.gain, &ex.oracle, &hyp.tree);
            let violation = l - dphi.dot(&w);
            let slack = groups[n]
                .iter()
                .map(|k| k.loss - k.dphi.dot(&w))
                .fold(0.0, f64::max);
            slack_sum += violation.max(0.0);
            if violation > slack + config.tol {
                groups[n].push(Constraint { dphi, loss: l, alpha: 0.0 });
                added += 1;
            }
        }
        trace.primal.push(0.5 * dot(&w, &w) + config.c * slack_sum);
        trace.added.push(added);
        if added == 0 {
            trace.converged = true;
            break;
        }
        solve_qp(&mut groups, &mut w, config.c, config.qp_tol, config.qp_max_sweeps);
        trace.dual.push(dual_objective(&groups, &w));
    }
    trace.slacks = groups
        .iter()
        .map(|g| g.iter().map(|k| k.loss - k.dphi.dot(&w)).fold(0.0, f64::max))
        .collect();
    Ok((w, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::infer::infer;
    use crate::aog::testkit::*;
    use crate::aog::score::global_score;
    use crate::seed::rng_from;
    use rand::Rng;

    fn random_examples(s: &AogStructure, l: &AogLayout, n: usize, seed: u64) -> Vec<TrainExample> {
        let mut rng = rng_from(seed);
        (0..n)
            .map(|_| {
                let input = random_input(s, 2, 4, &mut rng);
                let gt: Vec<SegmentMask> = input
                    .candidates
                    .iter()
                    .map(|c| match c.first() {
                        Some(first) if rng.random_bool(0.8) => first.mask.clone(),
                        _ => SegmentMask::null(16, 16),
                    })
                    .collect();
                TrainExample::new(s, l, input, &gt, 10).unwrap()
            })
            .collect()
    }

    #[test]
    fn dual_trace_is_monotone_and_stopping_rule_holds() {
        let s = AogStructure::from_taxonomy(&two_level_taxonomy()).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        let ex = random_examples(&s, &l, 6, 31);
        let cfg = StructConfig::default();
        let (w, trace) = train_structural(&s, &l, &ex, &cfg).unwrap();
        for pair in trace.dual.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9, "{:?}", trace.dual);
        }
        assert!(trace.converged);
        for (n, e) in ex.iter().enumerate() {
            let hyp = loss_augmented_infer(&s, &l, &w, &e.input, &e.gain, e.oracle_delta, cfg.k).unwrap();
            let h_score = global_score(&s, &l, &w, &e.input, &hyp.tree).unwrap();
            let o_score = e.oracle_feature().dot(&w);
            // W·Φ(oracle) + ξ_n ≥ W·Φ(hyp) + Δ(hyp) − tol
            assert!(o_score + trace.slacks[n] >= h_score + loss(&e.gain, &e.oracle, &hyp.tree) - cfg.tol);
        }
    }

    #[test]
    fn separable_toy_problem_recovers_oracle() {
        let (s, l, ex) = separable_toy();
        let (w, trace) = train_structural(&s, &l, &ex, &StructConfig { c: 10.0, ..Default::default() }).unwrap();
        assert!(trace.converged);
        for e in &ex {
            let r = infer(&s, &l, &w, &e.input, 10).unwrap();
            assert_eq!(r.tree, e.oracle);
        }
    }

    #[test]
    fn random_taxonomies_are_valid() {
        let mut rng = rng_from(8);
        for _ in 0..200 {
            let t = random_taxonomy(3, &mut rng);
            AogStructure::from_taxonomy(&t).unwrap();
        }
    }

    #[test]
    fn all_invisible_ground_truth_is_degenerate() {
        let s = AogStructure::from_taxonomy(&tiny_taxonomy()).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        let mut rng = rng_from(3);
        let input = random_input(&s, 2, 2, &mut rng);
        let gt = vec![SegmentMask::null(16, 16); 3];
        let ex = vec![TrainExample::new(&s, &l, input, &gt, 10).unwrap()];
        assert!(matches!(
            train_structural(&s, &l, &ex, &StructConfig::default()),
            Err(Error::DegenerateData(_))
        ));
    }
}
