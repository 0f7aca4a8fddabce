//! Vertex hierarchy: leaf parts, compositions with alternative child sets,
//! and the adjacent part pairs scored at each composition.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parts::PART_NAMES;

pub const TAXONOMY_SCHEMA_VERSION: u32 = 1;
pub const MAX_CHILDREN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub name: String,
    /// One child list per And-node.
    pub configurations: Vec<Vec<String>>,
    /// Adjacent leaf pairs scored at this composition.
    pub pairs: Vec<(String, String)>,
}

/// JSON form of the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub schema_version: u32,
    pub parts: Vec<String>,
    pub compositions: Vec<CompositionSpec>,
    pub root: String,
}

fn comp(name: &str, configurations: &[&[&str]], pairs: &[(&str, &str)]) -> CompositionSpec {
    CompositionSpec {
        name: name.into(),
        configurations: configurations
            .iter()
            .map(|c| c.iter().map(|s| s.to_string()).collect())
            .collect(),
        pairs: pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
    }
}

impl Taxonomy {
    /// Eleven parts, seven compositions. Clothing alternatives (separate
    /// upper and lower clothes versus one full-body garment) are the two
    /// And-nodes of `head_torso` and `lower_body`.
    pub fn default_human() -> Self {
        Taxonomy {
            schema_version: TAXONOMY_SCHEMA_VERSION,
            parts: PART_NAMES.iter().map(|s| s.to_string()).collect(),
            compositions: vec![
                comp("head", &[&["hair", "face"]], &[("hair", "face")]),
                comp(
                    "head_torso",
                    &[&["head", "upper_clothes"], &["head", "full_body_clothes"]],
                    &[
                        ("upper_clothes", "hair"),
                        ("upper_clothes", "face"),
                        ("full_body_clothes", "hair"),
                        ("full_body_clothes", "face"),
                    ],
                ),
                comp(
                    "upper_body",
                    &[&["head_torso", "left_arm", "right_arm"]],
                    &[
                        ("left_arm", "upper_clothes"),
                        ("right_arm", "upper_clothes"),
                        ("left_arm", "full_body_clothes"),
                        ("right_arm", "full_body_clothes"),
                    ],
                ),
                comp("left_leg", &[&["left_leg_skin", "left_shoe"]], &[("left_leg_skin", "left_shoe")]),
                comp("right_leg", &[&["right_leg_skin", "right_shoe"]], &[("right_leg_skin", "right_shoe")]),
                comp(
                    "lower_body",
                    &[&["lower_clothes", "left_leg", "right_leg"], &["left_leg", "right_leg"]],
                    &[
                        ("lower_clothes", "left_leg_skin"),
                        ("lower_clothes", "right_leg_skin"),
                        ("lower_clothes", "left_shoe"),
                        ("lower_clothes", "right_shoe"),
                    ],
                ),
                comp(
                    "human_body",
                    &[&["upper_body", "lower_body"]],
                    &[
                        ("upper_clothes", "lower_clothes"),
                        ("full_body_clothes", "left_leg_skin"),
                        ("full_body_clothes", "right_leg_skin"),
                    ],
                ),
            ],
            root: "human_body".into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let t: Taxonomy = io::read_json(path)?;
        if t.schema_version != TAXONOMY_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: TAXONOMY_SCHEMA_VERSION,
                found: t.schema_version,
            });
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Validated hierarchy. Vertices `0..num_parts` are leaves in taxonomy part
/// order, followed by compositions in taxonomy order.
#[derive(Debug, Clone, PartialEq)]
pub struct AogStructure {
    pub names: Vec<String>,
    pub num_parts: usize,
    /// `configs[v]`: child lists of composition `v`, one per And-node
    /// (empty for leaves).
    pub configs: Vec<Vec<Vec<usize>>>,
    /// `pairs[v]`: adjacent leaf pairs of composition `v`.
    pub pairs: Vec<Vec<(usize, usize)>>,
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    /// Children over all And-nodes, in first-seen order.
    pub children: Vec<Vec<usize>>,
    /// Children before parents.
    pub bottom_up: Vec<usize>,
    /// Vertices of each subtree, sorted.
    pub subtree: Vec<Vec<usize>>,
    /// Flat list of `(composition, p1, p2)`; a pair's index here keys its
    /// features and weights.
    pub pair_list: Vec<(usize, usize, usize)>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl AogStructure {
    pub fn from_taxonomy(t: &Taxonomy) -> Result<Self> {
        let num_parts = t.parts.len();
        if num_parts == 0 {
            return Err(config_err("taxonomy has no parts"));
        }
        let mut names: Vec<String> = t.parts.clone();
        names.extend(t.compositions.iter().map(|c| c.name.clone()));
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(config_err(format!("duplicate vertex name {n}")));
            }
        }
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| config_err(format!("unknown vertex {n}")))
        };
        let nv = names.len();
        let mut configs = vec![Vec::new(); nv];
        let mut pairs = vec![Vec::new(); nv];
        let mut parent = vec![None; nv];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (ci, spec) in t.compositions.iter().enumerate() {
            let c = num_parts + ci;
            if spec.configurations.is_empty() {
                return Err(config_err(format!("{} has no configurations", spec.name)));
            }
            for cfg in &spec.configurations {
                if cfg.is_empty() || cfg.len() > MAX_CHILDREN {
                    return Err(config_err(format!(
                        "{} has a configuration with {} children (1..={MAX_CHILDREN} allowed)",
                        spec.name,
                        cfg.len()
                    )));
                }
                let mut ids = Vec::with_capacity(cfg.len());
                for n in cfg {
                    let v = lookup(n)?;
                    if ids.contains(&v) {
                        return Err(config_err(format!("{} lists {n} twice", spec.name)));
                    }
                    match parent[v] {
                        Some(p) if p != c => {
                            return Err(config_err(format!(
                                "{n} is a child of both {} and {}",
                                names[p], spec.name
                            )))
                        }
                        _ => parent[v] = Some(c),
                    }
                    if !children[c].contains(&v) {
                        children[c].push(v);
                    }
                    ids.push(v);
                }
                configs[c].push(ids);
            }
        }
        let root = lookup(&t.root)?;
        if root < num_parts {
            return Err(config_err("root must be a composition"));
        }
        if let Some(p) = parent[root] {
            return Err(config_err(format!("root {} has parent {}", t.root, names[p])));
        }
        // post-order walk; a vertex met twice means a cycle
        let mut bottom_up = Vec::with_capacity(nv);
        let mut seen = vec![false; nv];
        let mut stack = vec![(root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                bottom_up.push(v);
                continue;
            }
            if seen[v] {
                return Err(config_err(format!("cycle through {}", names[v])));
            }
            seen[v] = true;
            stack.push((v, true));
            for &ch in children[v].iter().rev() {
                stack.push((ch, false));
            }
        }
        if let Some(v) = (0..nv).find(|&v| !seen[v]) {
            return Err(config_err(format!("{} is not reachable from the root", names[v])));
        }
        let mut subtree: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for &v in &bottom_up {
            let mut s = vec![v];
            for &ch in &children[v] {
                s.extend_from_slice(&subtree[ch]);
            }
            s.sort_unstable();
            subtree[v] = s;
        }
        let mut pair_list = Vec::new();
        let mut seen_pairs = HashSet::new();
        for (ci, spec) in t.compositions.iter().enumerate() {
            let c = num_parts + ci;
            for (a, b) in &spec.pairs {
                let (pa, pb) = (lookup(a)?, lookup(b)?);
                if pa >= num_parts || pb >= num_parts || pa == pb {
                    return Err(config_err(format!("pair ({a}, {b}) of {} must join two parts", spec.name)));
                }
                if subtree[c].binary_search(&pa).is_err() || subtree[c].binary_search(&pb).is_err() {
                    return Err(config_err(format!("pair ({a}, {b}) lies outside {}", spec.name)));
                }
                if !seen_pairs.insert((pa.min(pb), pa.max(pb))) {
                    return Err(config_err(format!("pair ({a}, {b}) listed twice")));
                }
                pairs[c].push((pa, pb));
                pair_list.push((c, pa, pb));
            }
        }
        Ok(AogStructure {
            names,
            num_parts,
            configs,
            pairs,
            root,
            parent,
            children,
            bottom_up,
            subtree,
            pair_list,
        })
    }

    pub fn default_human() -> Self {
        Self::from_taxonomy(&Taxonomy::default_human()).expect("built-in taxonomy is valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v < self.num_parts
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `K_c` of a composition.
    pub fn num_configs(&self, c: usize) -> usize {
        self.configs[c].len()
    }

    /// Index into `pair_list` of the pair `(p1, p2)` of composition `c`.
    pub fn pair_index(&self, c: usize, p1: usize, p2: usize) -> Option<usize> {
        self.pair_list.iter().position(|&t| t == (c, p1, p2))
    }

    /// Leaf pairs in `pair_list` order.
    pub fn leaf_pairs(&self) -> Vec<(usize, usize)> {
        self.pair_list.iter().map(|&(_, a, b)| (a, b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_names(s: &AogStructure, c: &str) -> Vec<(String, String)> {
        let c = s.vertex(c).unwrap();
        s.pairs[c]
            .iter()
            .map(|&(a, b)| (s.names[a].clone(), s.names[b].clone()))
            .collect()
    }

    #[test]
    fn default_structure_matches_part_tables() {
        let s = AogStructure::default_human();
        assert_eq!(s.num_parts, 11);
        assert_eq!(s.num_vertices(), 18);
        assert_eq!(s.pair_list.len(), 18);
        assert_eq!(pair_names(&s, "head"), vec![("hair".into(), "face".into())]);
        assert!(pair_names(&s, "lower_body").contains(&("lower_clothes".into(), "left_shoe".into())));
        assert_eq!(s.root, s.vertex("human_body").unwrap());
        assert_eq!(*s.bottom_up.last().unwrap(), s.root);
        assert_eq!(s.subtree[s.root].len(), 18);
        for c in s.num_parts..s.num_vertices() {
            for cfg in &s.configs[c] {
                assert!(cfg.len() <= MAX_CHILDREN);
            }
        }
    }

    #[test]
    fn taxonomy_json_round_trip() {
        let t = Taxonomy::default_human();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        t.save(&p).unwrap();
        assert_eq!(Taxonomy::load(&p).unwrap(), t);
    }

    #[test]
    fn bad_taxonomies_rejected() {
        let base = Taxonomy {
            schema_version: 1,
            parts: vec!["a".into(), "b".into()],
            compositions: vec![comp("r", &[&["a", "b"]], &[])],
            root: "r".into(),
        };
        assert!(AogStructure::from_taxonomy(&base).is_ok());

        let mut orphan = base.clone();
        orphan.parts.push("c".into());
        assert!(matches!(AogStructure::from_taxonomy(&orphan), Err(Error::Config(_))));

        let mut cyc = base.clone();
        cyc.compositions = vec![comp("r", &[&["a", "b", "s"]], &[]), comp("s", &[&["r"]], &[])];
        assert!(AogStructure::from_taxonomy(&cyc).is_err());

        let mut two_parents = base.clone();
        two_parents.compositions = vec![comp("r", &[&["a", "s"]], &[]), comp("s", &[&["a", "b"]], &[])];
        assert!(AogStructure::from_taxonomy(&two_parents).is_err());

        let mut outside = base.clone();
        outside.compositions = vec![
            comp("r", &[&["s", "b"]], &[]),
            comp("s", &[&["a"]], &[("a", "b")]),
        ];
        assert!(AogStructure::from_taxonomy(&outside).is_err());
    }
}
