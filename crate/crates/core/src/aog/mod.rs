//! And-Or graph over parts and part compositions: structure, parameters,
//! scoring, pruned inference and max-margin learning.

pub mod infer;
pub mod learn;
pub mod model;
pub mod score;
pub mod structure;
pub mod testkit;

pub use infer::{infer, infer_with_gain, loss, loss_augmented_infer, oracle_parse, InferResult, DEFAULT_K};
pub use learn::{train_structural, StructConfig, TrainExample, TrainTrace};
pub use model::{flatten, unflatten, AogLayout, AogModel, LayoutSpec, NamedBlock, GEOM_DIM};
pub use score::{
    composition_score, global_score, joint_feature, leaf_score, LeafCandidate, LeafGain, ParseInput, ParseTree,
    SparseVec, VertexState,
};
pub use structure::{AogStructure, CompositionSpec, Taxonomy};
