//! Random tiny AOG instances and exhaustive enumeration, for property
//! tests and the acceptance suite. Panics on inconsistent arguments.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::learn::TrainExample;
use super::model::{AogLayout, LayoutSpec};
use super::score::{LeafCandidate, ParseInput, ParseTree, VertexState};
use super::structure::{AogStructure, CompositionSpec, Taxonomy};
use crate::geom::SegmentMask;

/// Root over `a`, `b`, `c`; two And-nodes {a, b} and {a, b, c}.
pub fn tiny_taxonomy() -> Taxonomy {
    Taxonomy {
        schema_version: 1,
        parts: vec!["a".into(), "b".into(), "c".into()],
        compositions: vec![CompositionSpec {
            name: "r".into(),
            configurations: vec![
                vec!["a".into(), "b".into()],
                vec!["a".into(), "b".into(), "c".into()],
            ],
            pairs: vec![("a".into(), "b".into()), ("b".into(), "c".into())],
        }],
        root: "r".into(),
    }
}

/// Root over `ab` = {a, b} and leaf `c`.
pub fn two_level_taxonomy() -> Taxonomy {
    Taxonomy {
        schema_version: 1,
        parts: vec!["a".into(), "b".into(), "c".into()],
        compositions: vec![
            CompositionSpec {
                name: "ab".into(),
                configurations: vec![vec!["a".into(), "b".into()], vec!["a".into()]],
                pairs: vec![("a".into(), "b".into())],
            },
            CompositionSpec {
                name: "r".into(),
                configurations: vec![vec!["ab".into(), "c".into()]],
                pairs: vec![("a".into(), "c".into())],
            },
        ],
        root: "r".into(),
    }
}

/// 1 to `max_parts` parts under a root, with a random intermediate
/// composition over the first two parts half of the time. Configurations
/// are random non-empty child subsets covering every child; every leaf pair
/// lands in at most one composition whose subtree holds both.
pub fn random_taxonomy(max_parts: usize, rng: &mut ChaCha8Rng) -> Taxonomy {
    let n = rng.random_range(1..=max_parts.max(1));
    let parts: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut compositions = Vec::new();
    let mut root_children = parts.clone();
    let mut subtree_of_inner = Vec::new();
    if n >= 2 && rng.random_bool(0.5) {
        let kids = vec![parts[0].clone(), parts[1].clone()];
        compositions.push(CompositionSpec {
            name: "m".into(),
            configurations: random_configs(&kids, rng),
            pairs: Vec::new(),
        });
        subtree_of_inner = kids;
        root_children = std::iter::once("m".to_string()).chain(parts[2..].iter().cloned()).collect();
    }
    compositions.push(CompositionSpec {
        name: "r".into(),
        configurations: random_configs(&root_children, rng),
        pairs: Vec::new(),
    });
    for i in 0..n {
        for j in i + 1..n {
            if !rng.random_bool(0.6) {
                continue;
            }
            let inner_holds = subtree_of_inner.contains(&parts[i]) && subtree_of_inner.contains(&parts[j]);
            let c = if inner_holds && rng.random_bool(0.5) { 0 } else { compositions.len() - 1 };
            compositions[c].pairs.push((parts[i].clone(), parts[j].clone()));
        }
    }
    Taxonomy {
        schema_version: 1,
        parts,
        compositions,
        root: "r".into(),
    }
}

fn random_configs(children: &[String], rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let n = children.len();
    let subsets: Vec<u32> = (1..(1u32 << n)).collect();
    let k = rng.random_range(1..=subsets.len().min(3));
    let mut picked: Vec<u32> = subsets.choose_multiple(rng, k).copied().collect();
    let covered = picked.iter().fold(0, |acc, m| acc | m);
    if covered != (1 << n) - 1 {
        picked.push((1 << n) - 1);
    }
    picked.sort_unstable();
    picked.dedup();
    picked
        .into_iter()
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| children[i].clone()).collect())
        .collect()
}

/// Two images over [`tiny_taxonomy`] with one type: parts `a` and `b` each
/// see a correct and a wrong candidate, the correct one always carrying the
/// higher ranker score, in swapped list order between the images.
pub fn separable_toy() -> (AogStructure, AogLayout, Vec<TrainExample>) {
    let s = AogStructure::from_taxonomy(&tiny_taxonomy()).expect("valid taxonomy");
    let l = AogLayout::new(&s, spec_for(&s, 1, false)).expect("valid layout");
    let m = |x: usize| SegmentMask::from_fn(8, 8, |px, py| px == x && py < 4);
    let make = |good_first: bool| {
        let good = LeafCandidate::new(m(1), 0.9, 1).expect("valid candidate");
        let bad = LeafCandidate::new(m(5), 0.1, 1).expect("valid candidate");
        let list = if good_first { vec![good, bad] } else { vec![bad, good] };
        let cands = vec![list.clone(), list, vec![]];
        let pf = s
            .pair_list
            .iter()
            .map(|&(_, a, b)| vec![vec![0.0; 4]; cands[a].len() * cands[b].len()])
            .collect();
        ParseInput::new(&s, 8, 8, cands, pf).expect("valid input")
    };
    let gt = vec![m(1), m(1), SegmentMask::null(8, 8)];
    let ex = [true, false]
        .into_iter()
        .map(|f| TrainExample::new(&s, &l, make(f), &gt, 10).expect("valid example"))
        .collect();
    (s, l, ex)
}

pub fn random_input(s: &AogStructure, types: usize, max_cands: usize, rng: &mut ChaCha8Rng) -> ParseInput {
    let (w, h) = (16, 16);
    let candidates: Vec<Vec<LeafCandidate>> = (0..s.num_parts)
        .map(|_| {
            let n = rng.random_range(0..=max_cands);
            (0..n)
                .map(|_| {
                    let x0 = rng.random_range(0..12);
                    let y0 = rng.random_range(0..12);
                    let sw = rng.random_range(1..5);
                    let sh = rng.random_range(1..5);
                    let m = SegmentMask::from_fn(w, h, |x, y| {
                        (x0..x0 + sw).contains(&x) && (y0..y0 + sh).contains(&y)
                    });
                    LeafCandidate::new(m, rng.random_range(-1.0..1.0), rng.random_range(1..=types)).unwrap()
                })
                .collect()
        })
        .collect();
    let pair_features = s
        .pair_list
        .iter()
        .map(|&(_, a, b)| {
            (0..candidates[a].len() * candidates[b].len())
                .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect()
        })
        .collect();
    ParseInput::new(s, w, h, candidates, pair_features).unwrap()
}

pub fn spec_for(s: &AogStructure, types: usize, type_specific: bool) -> LayoutSpec {
    LayoutSpec {
        part_types: vec![types; s.num_parts],
        pair_dims: vec![4; s.pair_list.len()],
        type_specific_pairs: type_specific,
    }
}

pub fn random_weights(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Every valid tree, by enumerating each vertex's states.
pub fn all_trees(s: &AogStructure, input: &ParseInput) -> Vec<ParseTree> {
    let nv = s.num_vertices();
    let options: Vec<Vec<VertexState>> = (0..nv)
        .map(|v| {
            let mut o = vec![VertexState::INVISIBLE];
            if s.is_leaf(v) {
                for (i, c) in input.candidates[v].iter().enumerate() {
                    o.push(VertexState { z: c.part_type, y: i + 1 });
                }
            } else {
                for z in 1..=s.num_configs(v) {
                    o.push(VertexState { z, y: 1 });
                }
            }
            o
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; nv];
    loop {
        let t = ParseTree {
            states: (0..nv).map(|v| options[v][idx[v]]).collect(),
        };
        if t.validate(s, input).is_ok() {
            out.push(t);
        }
        let mut v = 0;
        loop {
            if v == nv {
                return out;
            }
            idx[v] += 1;
            if idx[v] < options[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

/// A uniformly chosen valid tree built top-down.
pub fn random_tree(s: &AogStructure, input: &ParseInput, rng: &mut ChaCha8Rng) -> ParseTree {
    loop {
        let mut t = ParseTree::invisible(s);
        fill(s, input, rng, s.root, &mut t);
        if t.validate(s, input).is_ok() {
            return t;
        }
    }
}

fn fill(s: &AogStructure, input: &ParseInput, rng: &mut ChaCha8Rng, v: usize, t: &mut ParseTree) {
    if s.is_leaf(v) {
        let n = input.candidates[v].len();
        let y = rng.random_range(0..=n);
        if y > 0 {
            t.states[v] = VertexState { z: input.candidates[v][y - 1].part_type, y };
        }
        return;
    }
    let z = rng.random_range(0..=s.num_configs(v));
    if z == 0 {
        return;
    }
    t.states[v] = VertexState { z, y: 1 };
    for &m in &s.configs[v][z - 1] {
        fill(s, input, rng, m, t);
    }
}
