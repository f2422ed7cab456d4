//! Walk transcripts organized by hash level: the standard and `S`-extended
//! walks (single and multi-start), their index geometry, refutation detection
//! and the exact counting enumerators.

mod counting;
mod index;
mod refute;
mod sim;
mod tensor;

pub use counting::{enum_corollaries, enum_f, geom_identity_check, CorollarySums, CountError, MAX_ENUM};
pub use index::{index_cmp, path_set, DimensionMismatch, Index, WalkTreeGeom, MAX_DIM};
pub use refute::{detect_refutations, Refutation};
pub use sim::{
    ext_multi_walk, ext_multi_walk_until, ext_walk, ext_walk_until, std_multi_walk, std_walk, EdgeSource, RngEdges,
    ScriptedEdges,
};
pub use tensor::WalkTensor;
