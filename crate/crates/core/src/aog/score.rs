//! Parse trees, their scores under the AOG, and the joint feature vector
//! whose dot product with `W` reproduces the score.

use serde::{Deserialize, Serialize};

use super::model::{AogLayout, GEOM_DIM};
use super::structure::AogStructure;
use crate::error::{Error, Result};
use crate::features::{pair_geometry_moments, pairwise_code, Dictionary, PbgFeature};
use crate::geom::{iou, mask_union, Moments, SegmentMask};

/// One selected segment offered to a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafCandidate {
    pub mask: SegmentMask,
    pub moments: Moments,
    /// Ranker score `g^p`.
    pub score: f64,
    /// Type in `1..=K_p`.
    pub part_type: usize,
}

impl LeafCandidate {
    pub fn new(mask: SegmentMask, score: f64, part_type: usize) -> Result<Self> {
        if mask.is_null() {
            return Err(Error::invalid("leaf candidates must be non-null"));
        }
        Ok(LeafCandidate {
            moments: mask.moments(),
            mask,
            score,
            part_type,
        })
    }
}

/// Per-image data the AOG scores against.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseInput {
    pub width: usize,
    pub height: usize,
    pub diag: f64,
    /// Candidates per leaf.
    pub candidates: Vec<Vec<LeafCandidate>>,
    /// Side-way features per structure pair, row-major over the two
    /// candidate lists.
    pub pair_features: Vec<Vec<Vec<f64>>>,
}

impl ParseInput {
    /// Computes side-way features as pairwise codes of the candidates' PBG
    /// features. `pbgs[p][i]` belongs to `candidates[p][i]`; `pair_dicts`
    /// follows the structure's pair list.
    pub fn with_pair_codes(
        s: &AogStructure,
        width: usize,
        height: usize,
        candidates: Vec<Vec<LeafCandidate>>,
        pbgs: &[Vec<PbgFeature>],
        pair_dicts: &[&Dictionary],
        lambda: f64,
    ) -> Result<Self> {
        if pair_dicts.len() != s.pair_list.len() {
            return Err(Error::invalid("one pair dictionary per structure pair is required"));
        }
        let mut pair_features = Vec::with_capacity(s.pair_list.len());
        for (k, &(_, a, b)) in s.pair_list.iter().enumerate() {
            let mut codes = Vec::with_capacity(pbgs[a].len() * pbgs[b].len());
            for fa in &pbgs[a] {
                for fb in &pbgs[b] {
                    codes.push(pairwise_code(Some(fa), Some(fb), pair_dicts[k], lambda)?);
                }
            }
            pair_features.push(codes);
        }
        Self::new(s, width, height, candidates, pair_features)
    }

    pub fn new(
        s: &AogStructure,
        width: usize,
        height: usize,
        candidates: Vec<Vec<LeafCandidate>>,
        pair_features: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if candidates.len() != s.num_parts {
            return Err(Error::invalid("one candidate list per leaf is required"));
        }
        if pair_features.len() != s.pair_list.len() {
            return Err(Error::invalid("one feature table per structure pair is required"));
        }
        for (k, &(_, a, b)) in s.pair_list.iter().enumerate() {
            if pair_features[k].len() != candidates[a].len() * candidates[b].len() {
                return Err(Error::invalid(format!("pair table {k} does not match candidate counts")));
            }
        }
        for c in candidates.iter().flatten() {
            if c.mask.width() != width || c.mask.height() != height {
                return Err(Error::invalid("candidate mask frame differs from the image"));
            }
        }
        Ok(ParseInput {
            width,
            height,
            diag: ((width * width + height * height) as f64).sqrt(),
            candidates,
            pair_features,
        })
    }

    /// Side-way feature of pair `k` for 1-based candidate indices.
    pub fn pair_feature(&self, s: &AogStructure, k: usize, y1: usize, y2: usize) -> &[f64] {
        let b = s.pair_list[k].2;
        &self.pair_features[k][(y1 - 1) * self.candidates[b].len() + (y2 - 1)]
    }
}

/// State of one vertex: `z` is the type (leaf) or And-node (composition),
/// `y` the 1-based candidate index (leaf) or 1 for a visible composition.
/// Both are 0 when invisible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexState {
    pub z: usize,
    pub y: usize,
}

impl VertexState {
    pub const INVISIBLE: VertexState = VertexState { z: 0, y: 0 };

    pub fn visible(&self) -> bool {
        self.z != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParseTree {
    pub states: Vec<VertexState>,
}

impl ParseTree {
    pub fn invisible(s: &AogStructure) -> Self {
        ParseTree {
            states: vec![VertexState::INVISIBLE; s.num_vertices()],
        }
    }

    /// Checks the state constraints: matching zero states, leaf types equal
    /// to the chosen candidate's type, invisible subtrees below invisible
    /// compositions and below children the And-node does not select, and
    /// at least one visible child under a visible composition.
    pub fn validate(&self, s: &AogStructure, input: &ParseInput) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidState(msg));
        if self.states.len() != s.num_vertices() {
            return bad(format!("tree has {} states for {} vertices", self.states.len(), s.num_vertices()));
        }
        for (v, st) in self.states.iter().enumerate() {
            let name = &s.names[v];
            if (st.z == 0) != (st.y == 0) {
                return bad(format!("{name}: z = {} with y = {}", st.z, st.y));
            }
            if !st.visible() {
                continue;
            }
            if s.is_leaf(v) {
                let Some(c) = input.candidates[v].get(st.y - 1) else {
                    return bad(format!("{name}: candidate {} out of range", st.y));
                };
                if c.part_type != st.z {
                    return bad(format!("{name}: type {} but candidate has type {}", st.z, c.part_type));
                }
            } else {
                if st.y != 1 || st.z > s.num_configs(v) {
                    return bad(format!("{name}: invalid state ({}, {})", st.z, st.y));
                }
                let chosen = &s.configs[v][st.z - 1];
                if !chosen.iter().any(|&m| self.states[m].visible()) {
                    return bad(format!("{name}: visible with no visible child"));
                }
            }
            if let Some(p) = s.parent[v] {
                let ps = self.states[p];
                if !ps.visible() || !s.configs[p][ps.z - 1].contains(&v) {
                    return bad(format!("{name}: visible under an unselecting parent"));
                }
            }
        }
        Ok(())
    }

    /// Segment of every vertex; compositions take the union of their
    /// visible children.
    pub fn masks(&self, s: &AogStructure, input: &ParseInput) -> Vec<SegmentMask> {
        let mut out = vec![SegmentMask::null(input.width, input.height); s.num_vertices()];
        for &v in &s.bottom_up {
            let st = self.states[v];
            if !st.visible() {
                continue;
            }
            out[v] = if s.is_leaf(v) {
                input.candidates[v][st.y - 1].mask.clone()
            } else {
                let kids: Vec<&SegmentMask> = s.configs[v][st.z - 1].iter().map(|&c| &out[c]).collect();
                mask_union(&kids).expect("masks share the image frame")
            };
        }
        out
    }
}

/// Sparse vector with sorted, distinct indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn from_unsorted(mut raw: Vec<(usize, f64)>) -> Self {
        raw.sort_by_key(|e| e.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (i, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        SparseVec { entries }
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| w[i] * v).sum()
    }

    /// `self − other`.
    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        let mut raw = self.entries.clone();
        raw.extend(other.entries.iter().map(|&(i, v)| (i, -v)));
        SparseVec::from_unsorted(raw)
    }

    pub fn sq_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    /// `w += scale · self`.
    pub fn add_to(&self, w: &mut [f64], scale: f64) {
        for &(i, v) in &self.entries {
            w[i] += scale * v;
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        self.add_to(&mut d, 1.0);
        d
    }
}

/// Leaf term: `b_z + w_z · g` when visible, `b_0` otherwise.
pub fn leaf_score(
    layout: &AogLayout,
    w: &[f64],
    input: &ParseInput,
    p: usize,
    st: VertexState,
) -> Result<f64> {
    match (st.z, st.y) {
        (0, 0) => Ok(w[layout.bias0(p)]),
        (0, _) | (_, 0) => Err(Error::InvalidState(format!("leaf {p}: z = {} with y = {}", st.z, st.y))),
        (z, y) => {
            let g = input.candidates[p]
                .get(y - 1)
                .ok_or_else(|| Error::InvalidState(format!("leaf {p}: candidate {y} out of range")))?
                .score;
            Ok(w[layout.leaf_bias(p, z)] + w[layout.leaf_weight(p, z)] * g)
        }
    }
}

/// Terms of one composition `c` in state `z_c ≥ 1`: gathered as
/// `(W index, feature value)` so the same walk yields scores and `Φ`.
pub(crate) fn composition_terms(
    s: &AogStructure,
    layout: &AogLayout,
    input: &ParseInput,
    c: usize,
    z_c: usize,
    comp_moments: &Moments,
    child_moments: &dyn Fn(usize) -> Moments,
    states: &dyn Fn(usize) -> VertexState,
    out: &mut Vec<(usize, f64)>,
) {
    out.push((layout.comp_bias(c, z_c), 1.0));
    for (pos, &mu) in s.configs[c][z_c - 1].iter().enumerate() {
        let st = states(mu);
        if !st.visible() {
            continue;
        }
        let g = pair_geometry_moments(comp_moments, &child_moments(mu), input.diag);
        let base = layout.vertical(c, z_c, pos, st.z);
        out.extend((0..GEOM_DIM).map(|d| (base + d, g[d])));
    }
    for &(a, b) in &s.pairs[c] {
        let (sa, sb) = (states(a), states(b));
        if !sa.visible() || !sb.visible() {
            continue;
        }
        let k = s.pair_index(c, a, b).expect("pair comes from the structure");
        let f = input.pair_feature(s, k, sa.y, sb.y);
        let base = layout.sideway(k, sa.z, sb.z, layout.types[b]);
        out.extend(f.iter().enumerate().map(|(d, &x)| (base + d, x)));
    }
}

/// Joint feature `Φ(Y, Z)`: `W · Φ` is the global score.
pub fn joint_feature(
    s: &AogStructure,
    layout: &AogLayout,
    input: &ParseInput,
    tree: &ParseTree,
) -> Result<SparseVec> {
    tree.validate(s, input)?;
    let masks = tree.masks(s, input);
    let moments: Vec<Moments> = masks.iter().map(|m| m.moments()).collect();
    let mut raw = Vec::new();
    for v in 0..s.num_vertices() {
        let st = tree.states[v];
        if !st.visible() {
            raw.push((layout.bias0(v), 1.0));
        } else if s.is_leaf(v) {
            raw.push((layout.leaf_bias(v, st.z), 1.0));
            raw.push((layout.leaf_weight(v, st.z), input.candidates[v][st.y - 1].score));
        } else {
            composition_terms(
                s,
                layout,
                input,
                v,
                st.z,
                &moments[v],
                &|m| moments[m],
                &|m| tree.states[m],
                &mut raw,
            );
        }
    }
    Ok(SparseVec::from_unsorted(raw))
}

/// Score of the subgraph rooted at `c`: its own term plus, recursively, the
/// terms of every vertex below it. Vertices an And-node does not select
/// contribute their invisibility bias.
pub fn composition_score(
    s: &AogStructure,
    layout: &AogLayout,
    w: &[f64],
    input: &ParseInput,
    tree: &ParseTree,
    masks: &[SegmentMask],
    c: usize,
) -> Result<f64> {
    let st = tree.states[c];
    let mut total = if !st.visible() {
        w[layout.bias0(c)]
    } else {
        let mut terms = Vec::new();
        let comp_m = masks[c].moments();
        composition_terms(
            s,
            layout,
            input,
            c,
            st.z,
            &comp_m,
            &|m| masks[m].moments(),
            &|m| tree.states[m],
            &mut terms,
        );
        terms.iter().map(|&(i, x)| w[i] * x).sum()
    };
    for &mu in &s.children[c] {
        total += if s.is_leaf(mu) {
            leaf_score(layout, w, input, mu, tree.states[mu])?
        } else {
            composition_score(s, layout, w, input, tree, masks, mu)?
        };
    }
    Ok(total)
}

/// Global score evaluated recursively from the root.
pub fn global_score(
    s: &AogStructure,
    layout: &AogLayout,
    w: &[f64],
    input: &ParseInput,
    tree: &ParseTree,
) -> Result<f64> {
    if w.len() != layout.dim {
        return Err(Error::invalid("weight vector does not match the layout"));
    }
    tree.validate(s, input)?;
    let masks = tree.masks(s, input);
    composition_score(s, layout, w, input, tree, &masks, s.root)
}

/// Per-leaf overlap with ground truth: `invisible[p] = iou(gt_p, ∅)` and
/// `candidates[p][i] = iou(gt_p, candidate i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafGain {
    pub invisible: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
}

impl LeafGain {
    pub fn from_ground_truth(input: &ParseInput, gt: &[SegmentMask]) -> Result<Self> {
        if gt.len() != input.candidates.len() {
            return Err(Error::invalid("one ground-truth mask per leaf is required"));
        }
        let null = SegmentMask::null(input.width, input.height);
        let invisible = gt.iter().map(|g| iou(g, &null)).collect::<Result<Vec<_>>>()?;
        let candidates = gt
            .iter()
            .zip(&input.candidates)
            .map(|(g, cs)| cs.iter().map(|c| iou(g, &c.mask)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(LeafGain { invisible, candidates })
    }

    pub fn zeros(input: &ParseInput) -> Self {
        LeafGain {
            invisible: vec![0.0; input.candidates.len()],
            candidates: input.candidates.iter().map(|c| vec![0.0; c.len()]).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        LeafGain {
            invisible: self.invisible.iter().map(|v| v * k).collect(),
            candidates: self
                .candidates
                .iter()
                .map(|c| c.iter().map(|v| v * k).collect())
                .collect(),
        }
    }

    pub fn leaf(&self, p: usize, st: VertexState) -> f64 {
        if st.visible() {
            self.candidates[p][st.y - 1]
        } else {
            self.invisible[p]
        }
    }

    /// `δ(gt; tree) = Σ_p iou(gt_p, chosen_p)`.
    pub fn delta(&self, tree: &ParseTree) -> f64 {
        (0..self.invisible.len()).map(|p| self.leaf(p, tree.states[p])).sum()
    }
}

#[cfg(test)]
mod tests {
    use crate::aog::testkit::*;
    use super::*;
    use crate::aog::structure::Taxonomy;
    use crate::seed::rng_from;

    fn setup(t: &Taxonomy, ts: bool, seed: u64) -> (AogStructure, AogLayout, ParseInput, Vec<f64>) {
        let mut rng = rng_from(seed);
        let s = AogStructure::from_taxonomy(t).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, ts)).unwrap();
        let input = random_input(&s, 2, 3, &mut rng);
        let w = random_weights(l.dim, &mut rng);
        (s, l, input, w)
    }

    #[test]
    fn invisible_tree_scores_sum_of_invisibility_biases() {
        let (s, l, input, w) = setup(&Taxonomy::default_human(), false, 1);
        let t = ParseTree::invisible(&s);
        let expect: f64 = (0..s.num_vertices()).map(|v| w[l.bias0(v)]).sum();
        assert!((global_score(&s, &l, &w, &input, &t).unwrap() - expect).abs() < 1e-12);
        let phi = joint_feature(&s, &l, &input, &t).unwrap();
        let mut idx: Vec<usize> = (0..s.num_vertices()).map(|v| l.bias0(v)).collect();
        idx.sort_unstable();
        assert_eq!(phi.entries, idx.iter().map(|&i| (i, 1.0)).collect::<Vec<_>>());
        assert_eq!(global_score(&s, &l, &vec![0.0; l.dim], &input, &t).unwrap(), 0.0);
    }

    #[test]
    fn leaf_score_is_affine() {
        let (_, l, input, w) = setup(&tiny_taxonomy(), false, 2);
        let p = (0..3).find(|&p| !input.candidates[p].is_empty()).unwrap();
        let c = &input.candidates[p][0];
        let st = VertexState { z: c.part_type, y: 1 };
        let got = leaf_score(&l, &w, &input, p, st).unwrap();
        let expect = w[l.leaf_bias(p, c.part_type)] + w[l.leaf_weight(p, c.part_type)] * c.score;
        assert!((got - expect).abs() < 1e-12);
        assert_eq!(leaf_score(&l, &w, &input, p, VertexState::INVISIBLE).unwrap(), w[l.bias0(p)]);
        assert!(leaf_score(&l, &w, &input, p, VertexState { z: 0, y: 1 }).is_err());
        let mut id = vec![0.0; l.dim];
        id[l.leaf_weight(p, c.part_type)] = 1.0;
        assert_eq!(leaf_score(&l, &id, &input, p, st).unwrap(), c.score);
    }

    #[test]
    fn two_child_composition_matches_hand_expansion() {
        let mut rng = rng_from(3);
        let t = two_level_taxonomy();
        let s = AogStructure::from_taxonomy(&t).unwrap();
        let l = AogLayout::new(&s, spec_for(&s, 2, false)).unwrap();
        let mut input = random_input(&s, 2, 2, &mut rng);
        while input.candidates[0].is_empty() || input.candidates[1].is_empty() {
            input = random_input(&s, 2, 2, &mut rng);
        }
        let w = random_weights(l.dim, &mut rng);
        let ab = s.vertex("ab").unwrap();
        let r = s.root;
        let (ca, cb) = (&input.candidates[0][0], &input.candidates[1][0]);
        let mut tree = ParseTree::invisible(&s);
        tree.states[0] = VertexState { z: ca.part_type, y: 1 };
        tree.states[1] = VertexState { z: cb.part_type, y: 1 };
        tree.states[ab] = VertexState { z: 1, y: 1 };
        tree.states[r] = VertexState { z: 1, y: 1 };
        let union = SegmentMask::from_fn(16, 16, |x, y| ca.mask.get(x, y) || cb.mask.get(x, y));
        let geo = |p: &SegmentMask, c: &SegmentMask| crate::features::pair_geometry(p, c, input.diag);
        let dotw = |off: usize, f: &[f64]| f.iter().enumerate().map(|(i, x)| w[off + i] * x).sum::<f64>();
        // ab: bias + two vertical edges + side-way (a, b)
        let ab_local = w[l.comp_bias(ab, 1)]
            + dotw(l.vertical(ab, 1, 0, ca.part_type), &geo(&union, &ca.mask))
            + dotw(l.vertical(ab, 1, 1, cb.part_type), &geo(&union, &cb.mask))
            + dotw(l.sideway(0, ca.part_type, cb.part_type, 2), input.pair_feature(&s, 0, 1, 1));
        // r: bias + vertical edge to ab; c invisible so its edge and the (a, c) pair vanish
        let r_local = w[l.comp_bias(r, 1)] + dotw(l.vertical(r, 1, 0, 1), &geo(&union, &union));
        let leaves = w[l.leaf_bias(0, ca.part_type)]
            + w[l.leaf_weight(0, ca.part_type)] * ca.score
            + w[l.leaf_bias(1, cb.part_type)]
            + w[l.leaf_weight(1, cb.part_type)] * cb.score
            + w[l.bias0(2)];
        let expect = ab_local + r_local + leaves;
        let got = global_score(&s, &l, &w, &input, &tree).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");

        // zero pairwise weights leave bias plus child sum
        let mut w0 = w.clone();
        for b in &l.blocks {
            if b.name.starts_with("vertical/") || b.name.starts_with("sideway/") {
                for x in &mut w0[b.offset..b.offset + b.len] {
                    *x = 0.0;
                }
            }
        }
        let masks = tree.masks(&s, &input);
        let ab_score = composition_score(&s, &l, &w0, &input, &tree, &masks, ab).unwrap();
        let expect_ab = w0[l.comp_bias(ab, 1)]
            + w0[l.leaf_bias(0, ca.part_type)]
            + w0[l.leaf_weight(0, ca.part_type)] * ca.score
            + w0[l.leaf_bias(1, cb.part_type)]
            + w0[l.leaf_weight(1, cb.part_type)] * cb.score;
        assert!((ab_score - expect_ab).abs() < 1e-12);
    }

    #[test]
    fn recursive_score_equals_flat_dot_product() {
        let mut rng = rng_from(4);
        for (t, ts) in [
            (Taxonomy::default_human(), false),
            (Taxonomy::default_human(), true),
            (two_level_taxonomy(), true),
        ] {
            let s = AogStructure::from_taxonomy(&t).unwrap();
            let l = AogLayout::new(&s, spec_for(&s, 3, ts)).unwrap();
            for _ in 0..100 {
                let input = random_input(&s, 3, 3, &mut rng);
                let w = random_weights(l.dim, &mut rng);
                let tree = random_tree(&s, &input, &mut rng);
                let phi = joint_feature(&s, &l, &input, &tree).unwrap();
                let rec = global_score(&s, &l, &w, &input, &tree).unwrap();
                assert!((rec - phi.dot(&w)).abs() <= 1e-9);
                // nonzeros only in blocks of visible vertices or invisibility biases
                for &(i, _) in &phi.entries {
                    let b = l.blocks.iter().find(|b| b.offset <= i && i < b.offset + b.len).unwrap();
                    let owner = b.name.split('/').nth(1).unwrap();
                    let v = s.vertex(owner).unwrap();
                    if i != l.bias0(v) {
                        assert!(tree.states[v].visible(), "{}", b.name);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_trees_rejected() {
        let (s, l, input, w) = setup(&tiny_taxonomy(), false, 5);
        let mut t = ParseTree::invisible(&s);
        t.states[s.root] = VertexState { z: 1, y: 1 };
        // visible root without visible children
        assert!(matches!(global_score(&s, &l, &w, &input, &t), Err(Error::InvalidState(_))));
        let mut t = ParseTree::invisible(&s);
        t.states[0] = VertexState { z: 1, y: 0 };
        assert!(t.validate(&s, &input).is_err());
    }

    #[test]
    fn gain_and_delta() {
        let s = AogStructure::from_taxonomy(&tiny_taxonomy()).unwrap();
        let m = |x0: usize, x1: usize| SegmentMask::from_fn(8, 8, |x, _| (x0..x1).contains(&x));
        let cands = vec![
            vec![LeafCandidate::new(m(0, 4), 0.0, 1).unwrap(), LeafCandidate::new(m(0, 2), 0.0, 1).unwrap()],
            vec![LeafCandidate::new(m(4, 8), 0.0, 1).unwrap()],
            vec![],
        ];
        let pf = vec![vec![vec![0.0]; 2], vec![]];
        let input = ParseInput::new(&s, 8, 8, cands, pf).unwrap();
        let gt = vec![m(0, 4), m(4, 8), SegmentMask::null(8, 8)];
        let g = LeafGain::from_ground_truth(&input, &gt).unwrap();
        assert_eq!(g.invisible, vec![0.0, 0.0, 1.0]);
        assert_eq!(g.candidates[0], vec![1.0, 0.5]);
        let mut t = ParseTree::invisible(&s);
        t.states[s.root] = VertexState { z: 1, y: 1 };
        t.states[0] = VertexState { z: 1, y: 2 };
        t.states[1] = VertexState { z: 1, y: 1 };
        assert!((g.delta(&t) - 2.5).abs() < 1e-12);
    }
}
