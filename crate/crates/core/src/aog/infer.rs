//! Bottom-up scoring with a top-k list per vertex, then read-off of the best
//! root entry. Also the oracle parse and loss-augmented inference, which
//! reuse the same search with per-leaf gains added.

use super::model::AogLayout;
use super::score::{composition_terms, leaf_score, LeafGain, ParseInput, ParseTree, VertexState};
use super::structure::AogStructure;
use crate::error::{Error, Result};
use crate::geom::{mask_union, Moments, SegmentMask};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct InferResult {
    pub tree: ParseTree,
    /// `W · Φ(tree)` plus the gains of the chosen leaf states.
    pub objective: f64,
}

struct Entry {
    score: f64,
    states: Vec<VertexState>,
    mask: SegmentMask,
    moments: Moments,
}

fn rank(list: &mut Vec<Entry>, k: usize) {
    list.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.states.cmp(&b.states)));
    list.truncate(k);
}

/// Maximizes `W · Φ(tree) + Σ_p gain_p(state_p)` under top-`k` pruning. Ties
/// go to the lexicographically smallest state vector.
pub fn infer_with_gain(
    s: &AogStructure,
    layout: &AogLayout,
    w: &[f64],
    input: &ParseInput,
    gain: Option<&LeafGain>,
    k: usize,
) -> Result<InferResult> {
    if k == 0 {
        return Err(Error::invalid("top-k must be positive"));
    }
    if w.len() != layout.dim {
        return Err(Error::invalid("weight vector does not match the layout"));
    }
    let nv = s.num_vertices();
    let null = SegmentMask::null(input.width, input.height);
    let g = |p: usize, st: VertexState| gain.map_or(0.0, |g| g.leaf(p, st));
    // score of an all-invisible subtree
    let mut hidden = vec![0.0; nv];
    for &v in &s.bottom_up {
        let own = w[layout.bias0(v)] + if s.is_leaf(v) { g(v, VertexState::INVISIBLE) } else { 0.0 };
        hidden[v] = own + s.children[v].iter().map(|&c| hidden[c]).sum::<f64>();
    }
    let invisible_entry = |v: usize| Entry {
        score: hidden[v],
        states: vec![VertexState::INVISIBLE; nv],
        mask: null.clone(),
        moments: Moments::default(),
    };
    let mut lists: Vec<Vec<Entry>> = (0..nv).map(|_| Vec::new()).collect();
    let mut terms = Vec::new();
    for &v in &s.bottom_up {
        let mut list = vec![invisible_entry(v)];
        if s.is_leaf(v) {
            for (i, c) in input.candidates[v].iter().enumerate() {
                let st = VertexState { z: c.part_type, y: i + 1 };
                let mut states = vec![VertexState::INVISIBLE; nv];
                states[v] = st;
                list.push(Entry {
                    score: leaf_score(layout, w, input, v, st)? + g(v, st),
                    states,
                    mask: c.mask.clone(),
                    moments: c.moments,
                });
            }
        } else {
            for z in 1..=s.num_configs(v) {
                let cfg = &s.configs[v][z - 1];
                let unselected: f64 = s.children[v]
                    .iter()
                    .filter(|c| !cfg.contains(c))
                    .map(|&c| hidden[c])
                    .sum();
                let bias_like = unselected;
                let mut idx = vec![0usize; cfg.len()];
                'combos: loop {
                    let picks: Vec<&Entry> = cfg.iter().zip(&idx).map(|(&c, &i)| &lists[c][i]).collect();
                    let any_visible = cfg.iter().zip(&picks).any(|(&c, e)| e.states[c].visible());
                    if any_visible {
                        let mut states = vec![VertexState::INVISIBLE; nv];
                        for (&c, e) in cfg.iter().zip(&picks) {
                            for &u in &s.subtree[c] {
                                states[u] = e.states[u];
                            }
                        }
                        states[v] = VertexState { z, y: 1 };
                        let masks: Vec<&SegmentMask> = picks.iter().map(|e| &e.mask).collect();
                        let mask = mask_union(&masks)?;
                        let moments = mask.moments();
                        terms.clear();
                        composition_terms(
                            s,
                            layout,
                            input,
                            v,
                            z,
                            &moments,
                            &|m| {
                                let pos = cfg.iter().position(|&c| c == m).expect("child of the And-node");
                                picks[pos].moments
                            },
                            &|m| states[m],
                            &mut terms,
                        );
                        let local: f64 = terms.iter().map(|&(i, x)| w[i] * x).sum();
                        let score = local + bias_like + picks.iter().map(|e| e.score).sum::<f64>();
                        list.push(Entry {
                            score,
                            states,
                            mask,
                            moments,
                        });
                    }
                    // odometer over the children's lists
                    let mut d = 0;
                    loop {
                        if d == cfg.len() {
                            break 'combos;
                        }
                        idx[d] += 1;
                        if idx[d] < lists[cfg[d]].len() {
                            break;
                        }
                        idx[d] = 0;
                        d += 1;
                    }
                }
            }
        }
        rank(&mut list, k);
        lists[v] = list;
    }
    let best = lists[s.root].swap_remove(0);
    Ok(InferResult {
        tree: ParseTree { states: best.states },
        objective: best.score,
    })
}

/// Highest-scoring parse under top-`k` pruning.
pub fn infer(s: &AogStructure, layout: &AogLayout, w: &[f64], input: &ParseInput, k: usize) -> Result<InferResult> {
    infer_with_gain(s, layout, w, input, None, k)
}

/// Best parse reachable from the candidates, measured by summed part IoU
/// against ground truth. Searches with zero weights and per-leaf IoU gains;
/// leaf lists are never pruned.
pub fn oracle_parse(
    s: &AogStructure,
    layout: &AogLayout,
    input: &ParseInput,
    gain: &LeafGain,
    k: usize,
) -> Result<InferResult> {
    let widest = input.candidates.iter().map(|c| c.len() + 1).max().unwrap_or(1);
    infer_with_gain(s, layout, &vec![0.0; layout.dim], input, Some(gain), k.max(widest))
}

/// `Δ = δ(oracle) − δ(hyp)`: non-negative, zero for trees as good as the
/// oracle.
pub fn loss(gain: &LeafGain, oracle: &ParseTree, hyp: &ParseTree) -> f64 {
    gain.delta(oracle) - gain.delta(hyp)
}

/// Maximizes `W · Φ + Δ`. Since `Δ = δ(oracle) − Σ_p iou_p`, this is
/// inference with negated IoU gains; the objective includes `δ(oracle)`.
pub fn loss_augmented_infer(
    s: &AogStructure,
    layout: &AogLayout,
    w: &[f64],
    input: &ParseInput,
    gain: &LeafGain,
    oracle_delta: f64,
    k: usize,
) -> Result<InferResult> {
    let neg = gain.scaled(-1.0);
    let mut r = infer_with_gain(s, layout, w, input, Some(&neg), k)?;
    r.objective += oracle_delta;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::testkit::*;
    use crate::aog::score::{global_score, LeafCandidate};
    use crate::aog::structure::{CompositionSpec, Taxonomy};
    use crate::aog::model::LayoutSpec;
    use crate::seed::rng_from;
    use rand::Rng;

    #[test]
    fn single_part_picks_best_candidate() {
        let t = Taxonomy {
            schema_version: 1,
            parts: vec!["a".into()],
            compositions: vec![CompositionSpec {
                name: "r".into(),
                configurations: vec![vec!["a".into()]],
                pairs: vec![],
            }],
            root: "r".into(),
        };
        let s = AogStructure::from_taxonomy(&t).unwrap();
        let l = AogLayout::new(
            &s,
            LayoutSpec {
                part_types: vec![1],
                pair_dims: vec![],
                type_specific_pairs: false,
            },
        )
        .unwrap();
        let m = |x: usize| SegmentMask::from_fn(8, 8, |px, _| px == x);
        let cands = vec![vec![
            LeafCandidate::new(m(0), 2.0, 1).unwrap(),
            LeafCandidate::new(m(1), 5.0, 1).unwrap(),
        ]];
        let input = ParseInput::new(&s, 8, 8, cands, vec![]).unwrap();
        let mut w = vec![0.0; l.dim];
        w[l.leaf_weight(0, 1)] = 1.0;
        w[l.bias0(0)] = -10.0;
        let r = infer(&s, &l, &w, &input, DEFAULT_K).unwrap();
        assert_eq!(r.tree.states[0], VertexState { z: 1, y: 2 });
        assert_eq!(r.objective, 5.0);
    }

    fn exhaustive(s: &AogStructure, l: &AogLayout, w: &[f64], input: &ParseInput, gain: Option<&LeafGain>) -> f64 {
        all_trees(s, input)
            .iter()
            .map(|t| global_score(s, l, w, input, t).unwrap() + gain.map_or(0.0, |g| g.delta(t)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn unpruned_search_matches_enumeration() {
        let mut rng = rng_from(21);
        for t in [tiny_taxonomy(), two_level_taxonomy()] {
            let s = AogStructure::from_taxonomy(&t).unwrap();
            for ts in [false, true] {
                let l = AogLayout::new(&s, spec_for(&s, 2, ts)).unwrap();
                for _ in 0..100 {
                    let input = random_input(&s, 2, 4, &mut rng);
                    let w = random_weights(l.dim, &mut rng);
                    let r = infer(&s, &l, &w, &input, 10_000).unwrap();
                    let best = exhaustive(&s, &l, &w, &input, None);
                    assert!((r.objective - best).abs() < 1e-9, "{} vs {best}", r.objective);
                    let rescored = global_score(&s, &l, &w, &input, &r.tree).unwrap();
                    assert!((rescored - r.objective).abs() < 1e-9);
                    let r1 = infer(&s, &l, &w, &input, 1).unwrap();
                    assert!(r1.objective <= best + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pruned_score_grows_with_k_on_flat_structure() {
        let mut rng = rng_from(22);
        let s = AogStructure::from_taxonomy(&tiny_taxonomy()).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        for _ in 0..50 {
            let input = random_input(&s, 2, 4, &mut rng);
            let w = random_weights(l.dim, &mut rng);
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=6 {
                let r = infer(&s, &l, &w, &input, k).unwrap();
                assert!(r.objective >= prev - 1e-12);
                prev = r.objective;
            }
        }
    }

    #[test]
    fn returned_trees_are_consistent_on_default_structure() {
        let mut rng = rng_from(23);
        let s = AogStructure::default_human();
        let l = AogLayout::new(&s, spec_for(&s, 3, false)).unwrap();
        for _ in 0..20 {
            let input = random_input(&s, 3, 4, &mut rng);
            let w = random_weights(l.dim, &mut rng);
            let r = infer(&s, &l, &w, &input, 3).unwrap();
            r.tree.validate(&s, &input).unwrap();
            let rescored = global_score(&s, &l, &w, &input, &r.tree).unwrap();
            assert!((rescored - r.objective).abs() < 1e-9);
        }
    }

    fn gt_for(input: &ParseInput, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<SegmentMask> {
        input
            .candidates
            .iter()
            .map(|c| {
                if rng.random_bool(0.3) || c.is_empty() {
                    SegmentMask::null(input.width, input.height)
                } else {
                    let x0 = rng.random_range(0..12);
                    SegmentMask::from_fn(input.width, input.height, |x, y| (x0..x0 + 4).contains(&x) && y < 6)
                }
            })
            .collect()
    }

    #[test]
    fn oracle_picks_injected_ground_truth() {
        let mut rng = rng_from(24);
        let s = AogStructure::from_taxonomy(&two_level_taxonomy()).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        let mut input = random_input(&s, 2, 3, &mut rng);
        let gt = vec![
            SegmentMask::from_fn(16, 16, |x, _| x < 3),
            SegmentMask::null(16, 16),
            SegmentMask::from_fn(16, 16, |x, y| x > 10 && y > 10),
        ];
        for p in [0, 2] {
            input.candidates[p].insert(0, LeafCandidate::new(gt[p].clone(), 0.0, 1).unwrap());
        }
        let pf = s
            .pair_list
            .iter()
            .map(|&(_, a, b)| vec![vec![0.0; 4]; input.candidates[a].len() * input.candidates[b].len()])
            .collect();
        let input = ParseInput::new(&s, 16, 16, input.candidates, pf).unwrap();
        let gain = LeafGain::from_ground_truth(&input, &gt).unwrap();
        let o = oracle_parse(&s, &l, &input, &gain, DEFAULT_K).unwrap();
        assert_eq!(o.tree.states[0].y, 1);
        assert_eq!(o.tree.states[1], VertexState::INVISIBLE);
        assert_eq!(o.tree.states[2].y, 1);
        let visible_sum: f64 = [0, 2].iter().map(|&p| gain.leaf(p, o.tree.states[p])).sum();
        assert_eq!(visible_sum, 2.0);
        assert_eq!(gain.delta(&o.tree), 3.0);
        assert_eq!(loss(&gain, &o.tree, &o.tree), 0.0);
    }

    #[test]
    fn oracle_dominates_random_trees_and_loss_is_nonnegative() {
        let mut rng = rng_from(25);
        let s = AogStructure::default_human();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        for _ in 0..5 {
            let input = random_input(&s, 2, 4, &mut rng);
            let gt = gt_for(&input, &mut rng);
            let gain = LeafGain::from_ground_truth(&input, &gt).unwrap();
            let o = oracle_parse(&s, &l, &input, &gain, DEFAULT_K).unwrap();
            assert!((o.objective - gain.delta(&o.tree)).abs() < 1e-12);
            for _ in 0..200 {
                let t = random_tree(&s, &input, &mut rng);
                assert!(loss(&gain, &o.tree, &t) >= -1e-12);
            }
        }
        let s = AogStructure::from_taxonomy(&two_level_taxonomy()).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        for _ in 0..20 {
            let input = random_input(&s, 2, 4, &mut rng);
            let gain = LeafGain::from_ground_truth(&input, &gt_for(&input, &mut rng)).unwrap();
            let o = oracle_parse(&s, &l, &input, &gain, 1).unwrap();
            let best = all_trees(&s, &input).iter().map(|t| gain.delta(t)).fold(f64::NEG_INFINITY, f64::max);
            assert!((gain.delta(&o.tree) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_of_single_part_gap() {
        let s = AogStructure::from_taxonomy(&tiny_taxonomy()).unwrap();
        let m = |x1: usize| SegmentMask::from_fn(10, 1, |x, _| x < x1);
        let cands = vec![
            vec![LeafCandidate::new(m(10), 0.0, 1).unwrap(), LeafCandidate::new(m(6), 0.0, 1).unwrap()],
            vec![LeafCandidate::new(m(3), 0.0, 1).unwrap()],
            vec![],
        ];
        let pf = vec![vec![vec![0.0]; 2], vec![]];
        let input = ParseInput::new(&s, 10, 1, cands, pf).unwrap();
        let gt = vec![m(10), m(3), SegmentMask::null(10, 1)];
        let gain = LeafGain::from_ground_truth(&input, &gt).unwrap();
        let mut a = ParseTree::invisible(&s);
        a.states[s.root] = VertexState { z: 1, y: 1 };
        a.states[0] = VertexState { z: 1, y: 1 };
        a.states[1] = VertexState { z: 1, y: 1 };
        let mut b = a.clone();
        b.states[0].y = 2;
        assert!((loss(&gain, &a, &b) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn loss_augmented_search() {
        let mut rng = rng_from(26);
        let s = AogStructure::from_taxonomy(&two_level_taxonomy()).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        for _ in 0..30 {
            let input = random_input(&s, 2, 3, &mut rng);
            let gain = LeafGain::from_ground_truth(&input, &gt_for(&input, &mut rng)).unwrap();
            let o = oracle_parse(&s, &l, &input, &gain, DEFAULT_K).unwrap();
            let od = gain.delta(&o.tree);
            let w = random_weights(l.dim, &mut rng);
            let r = loss_augmented_infer(&s, &l, &w, &input, &gain, od, 10_000).unwrap();
            let best = all_trees(&s, &input)
                .iter()
                .map(|t| global_score(&s, &l, &w, &input, t).unwrap() + loss(&gain, &o.tree, t))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((r.objective - best).abs() < 1e-9);

            let zero = vec![0.0; l.dim];
            let worst = loss_augmented_infer(&s, &l, &zero, &input, &gain, od, 10_000).unwrap();
            let min_delta = all_trees(&s, &input).iter().map(|t| gain.delta(t)).fold(f64::INFINITY, f64::min);
            assert!((gain.delta(&worst.tree) - min_delta).abs() < 1e-12);

            let plain = infer(&s, &l, &w, &input, DEFAULT_K).unwrap();
            let no_loss = infer_with_gain(&s, &l, &w, &input, Some(&LeafGain::zeros(&input)), DEFAULT_K).unwrap();
            assert_eq!(plain, no_loss);
        }
    }
}
