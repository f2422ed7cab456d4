//! Low-space element distinctness and set intersection.
//!
//! A layered pseudorandom hash turns the input array into a functional graph
//! `x → h(a_x)`; equal array values share out-edges, so collisions show up as
//! merge points of walks. The crate provides the hash family, a low-space
//! collision finder over walks, the end-to-end solvers, exact simulators of
//! the level-structured walks used in the analysis, and an experiment harness.

pub mod collide;
pub mod graph;
pub mod harness;
pub mod layered_hash;
pub mod randomness;
pub mod solver;
pub mod walk;

pub use graph::{Instance, Vertex};
pub use layered_hash::{HashParams, LayeredHash, LevelFamily, OracleLevels, TableLevels};
pub use randomness::RandomTape;
