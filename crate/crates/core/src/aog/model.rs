//! Parameter layout of the AOG and its flat weight vector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::structure::{AogStructure, Taxonomy};
use crate::error::{Error, Result};
use crate::io;

pub const AOG_MODEL_SCHEMA_VERSION: u32 = 1;
pub const GEOM_DIM: usize = 6;

/// Type counts and pair feature sizes that fix the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSpec {
    /// `K_p` per leaf, in leaf order.
    pub part_types: Vec<usize>,
    /// Side-way feature length per entry of the structure's pair list.
    pub pair_dims: Vec<usize>,
    /// One side-way weight vector per type pair instead of one per pair.
    pub type_specific_pairs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Offsets of every parameter group inside `W`.
///
/// Leaf `p`: `[b0, (b_z, w_z) for z in 1..=K_p]`. Composition `c`:
/// `[b0, b_z for z in 1..=K_c]`. Vertical edge `(c, z_c, μ)`: `K_μ`
/// consecutive 6-vectors indexed by `z_μ`. Side-way pair: one vector, or
/// `K_p1 · K_p2` of them when type-specific.
#[derive(Debug, Clone, PartialEq)]
pub struct AogLayout {
    pub spec: LayoutSpec,
    /// `K_v` for every vertex.
    pub types: Vec<usize>,
    vertex_offset: Vec<usize>,
    /// `[c][z_c - 1][child position]`.
    vertical_offset: Vec<Vec<Vec<usize>>>,
    pair_offset: Vec<usize>,
    pub dim: usize,
    pub blocks: Vec<LayoutBlock>,
}

impl AogLayout {
    pub fn new(s: &AogStructure, spec: LayoutSpec) -> Result<Self> {
        if spec.part_types.len() != s.num_parts {
            return Err(Error::Config(format!(
                "{} part type counts for {} parts",
                spec.part_types.len(),
                s.num_parts
            )));
        }
        if spec.part_types.contains(&0) {
            return Err(Error::Config("every part needs at least one type".into()));
        }
        if spec.pair_dims.len() != s.pair_list.len() {
            return Err(Error::Config(format!(
                "{} pair feature sizes for {} pairs",
                spec.pair_dims.len(),
                s.pair_list.len()
            )));
        }
        let nv = s.num_vertices();
        let types: Vec<usize> = (0..nv)
            .map(|v| if s.is_leaf(v) { spec.part_types[v] } else { s.num_configs(v) })
            .collect();
        let mut blocks = Vec::new();
        let mut dim = 0;
        let mut push = |name: String, len: usize, blocks: &mut Vec<LayoutBlock>| {
            let off = dim;
            blocks.push(LayoutBlock { name, offset: off, len });
            dim += len;
            off
        };
        let mut vertex_offset = vec![0; nv];
        for v in 0..nv {
            let len = if s.is_leaf(v) { 1 + 2 * types[v] } else { 1 + types[v] };
            vertex_offset[v] = push(format!("unary/{}", s.names[v]), len, &mut blocks);
        }
        let mut vertical_offset = vec![Vec::new(); nv];
        for c in s.num_parts..nv {
            for (zi, cfg) in s.configs[c].iter().enumerate() {
                let mut offs = Vec::with_capacity(cfg.len());
                for &mu in cfg {
                    let name = format!("vertical/{}/{}/{}", s.names[c], zi + 1, s.names[mu]);
                    offs.push(push(name, GEOM_DIM * types[mu], &mut blocks));
                }
                vertical_offset[c].push(offs);
            }
        }
        let mut pair_offset = Vec::with_capacity(s.pair_list.len());
        for (k, &(c, a, b)) in s.pair_list.iter().enumerate() {
            let copies = if spec.type_specific_pairs { types[a] * types[b] } else { 1 };
            let name = format!("sideway/{}/{}+{}", s.names[c], s.names[a], s.names[b]);
            pair_offset.push(push(name, copies * spec.pair_dims[k], &mut blocks));
        }
        Ok(AogLayout {
            spec,
            types,
            vertex_offset,
            vertical_offset,
            pair_offset,
            dim,
            blocks,
        })
    }

    /// Invisibility bias `b^v_0`.
    pub fn bias0(&self, v: usize) -> usize {
        self.vertex_offset[v]
    }

    /// Leaf bias `b^p_z`, `z ≥ 1`.
    pub fn leaf_bias(&self, p: usize, z: usize) -> usize {
        self.vertex_offset[p] + 2 * z - 1
    }

    /// Leaf unary weight `w^p_z`, `z ≥ 1`.
    pub fn leaf_weight(&self, p: usize, z: usize) -> usize {
        self.vertex_offset[p] + 2 * z
    }

    /// Composition bias `b^c_z`, `z ≥ 1`.
    pub fn comp_bias(&self, c: usize, z: usize) -> usize {
        self.vertex_offset[c] + z
    }

    /// Start of the 6-vector for child position `pos` of `(c, z_c)` in
    /// child state `z_mu ≥ 1`.
    pub fn vertical(&self, c: usize, z_c: usize, pos: usize, z_mu: usize) -> usize {
        self.vertical_offset[c][z_c - 1][pos] + GEOM_DIM * (z_mu - 1)
    }

    /// Start of the side-way weights of pair `k` for leaf types `(z1, z2)`.
    pub fn sideway(&self, k: usize, z1: usize, z2: usize, k_types2: usize) -> usize {
        let d = self.spec.pair_dims[k];
        if self.spec.type_specific_pairs {
            self.pair_offset[k] + d * ((z1 - 1) * k_types2 + (z2 - 1))
        } else {
            self.pair_offset[k]
        }
    }
}

/// Structured view of `W`, one entry per layout block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBlock {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn unflatten(layout: &AogLayout, w: &[f64]) -> Result<Vec<NamedBlock>> {
    if w.len() != layout.dim {
        return Err(Error::invalid(format!("weight length {} != layout size {}", w.len(), layout.dim)));
    }
    Ok(layout
        .blocks
        .iter()
        .map(|b| NamedBlock {
            name: b.name.clone(),
            values: w[b.offset..b.offset + b.len].to_vec(),
        })
        .collect())
}

pub fn flatten(layout: &AogLayout, blocks: &[NamedBlock]) -> Result<Vec<f64>> {
    if blocks.len() != layout.blocks.len() {
        return Err(Error::Parse("parameter blocks do not match the layout".into()));
    }
    let mut w = Vec::with_capacity(layout.dim);
    for (b, l) in blocks.iter().zip(&layout.blocks) {
        if b.name != l.name || b.values.len() != l.len {
            return Err(Error::Parse(format!("parameter block {} does not match layout block {}", b.name, l.name)));
        }
        w.extend_from_slice(&b.values);
    }
    Ok(w)
}

/// Saved AOG: taxonomy, layout inputs, named weight blocks, learning trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AogModelFile {
    pub schema_version: u32,
    pub taxonomy: Taxonomy,
    pub layout: LayoutSpec,
    pub params: Vec<NamedBlock>,
    #[serde(default)]
    pub trace: Vec<f64>,
}

/// Structure, layout and weights together.
#[derive(Debug, Clone, PartialEq)]
pub struct AogModel {
    pub taxonomy: Taxonomy,
    pub structure: AogStructure,
    pub layout: AogLayout,
    pub w: Vec<f64>,
    pub trace: Vec<f64>,
}

impl AogModel {
    pub fn zeros(taxonomy: Taxonomy, spec: LayoutSpec) -> Result<Self> {
        let structure = AogStructure::from_taxonomy(&taxonomy)?;
        let layout = AogLayout::new(&structure, spec)?;
        let w = vec![0.0; layout.dim];
        Ok(AogModel {
            taxonomy,
            structure,
            layout,
            w,
            trace: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(
            path,
            &AogModelFile {
                schema_version: AOG_MODEL_SCHEMA_VERSION,
                taxonomy: self.taxonomy.clone(),
                layout: self.layout.spec.clone(),
                params: unflatten(&self.layout, &self.w)?,
                trace: self.trace.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: AogModelFile = io::read_json(path)?;
        if f.schema_version != AOG_MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: AOG_MODEL_SCHEMA_VERSION,
                found: f.schema_version,
            });
        }
        let mut m = AogModel::zeros(f.taxonomy, f.layout)?;
        m.w = flatten(&m.layout, &f.params)?;
        m.trace = f.trace;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng;

    fn default_spec(s: &AogStructure, type_specific: bool) -> LayoutSpec {
        LayoutSpec {
            part_types: vec![6; s.num_parts],
            pair_dims: vec![16; s.pair_list.len()],
            type_specific_pairs: type_specific,
        }
    }

    #[test]
    fn blocks_tile_the_weight_vector() {
        let s = AogStructure::default_human();
        for ts in [false, true] {
            let l = AogLayout::new(&s, default_spec(&s, ts)).unwrap();
            let mut next = 0;
            for b in &l.blocks {
                assert_eq!(b.offset, next);
                next += b.len;
            }
            assert_eq!(next, l.dim);
        }
        let l = AogLayout::new(&s, default_spec(&s, false)).unwrap();
        assert_eq!(l.leaf_weight(0, 6) + 1, l.bias0(1));
        let head = s.vertex("head").unwrap();
        assert_eq!(l.types[head], 1);
        assert_eq!(l.types[s.vertex("lower_body").unwrap()], 2);
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let s = AogStructure::default_human();
        let l = AogLayout::new(&s, default_spec(&s, true)).unwrap();
        let mut rng = rng_from(2);
        let w: Vec<f64> = (0..l.dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let blocks = unflatten(&l, &w).unwrap();
        assert_eq!(flatten(&l, &blocks).unwrap(), w);
        let mut bad = blocks.clone();
        bad[3].values.pop();
        assert!(flatten(&l, &bad).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let t = Taxonomy::default_human();
        let s = AogStructure::from_taxonomy(&t).unwrap();
        let mut m = AogModel::zeros(t, default_spec(&s, false)).unwrap();
        for (i, x) in m.w.iter_mut().enumerate() {
            *x = (i as f64 * 0.37).sin();
        }
        m.trace = vec![0.0, 1.5];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("aog.json");
        m.save(&p).unwrap();
        assert_eq!(AogModel::load(&p).unwrap(), m);
    }

    #[test]
    fn spec_mismatch_rejected() {
        let s = AogStructure::default_human();
        let mut spec = default_spec(&s, false);
        spec.pair_dims.pop();
        assert!(AogLayout::new(&s, spec).is_err());
    }
}
