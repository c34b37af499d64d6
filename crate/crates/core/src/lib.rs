//! Exact enumeration and simulation of the abelian sandpile model on the
//! expanded cactus, the graph obtained from the 3-regular tree by replacing
//! every vertex with a triangle.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`] builds finite cacti, rooted subtrees and clusters.
//! * [`engine`] adds grains, relaxes, and splits avalanches into waves.
//! * [`recurrence`] runs the burning test and counts recurrent configurations.
//! * [`radicals`] classifies hanging subtrees as forbidden, weak or strong.
//! * [`filling`] enumerates configurations cell by cell from local rules.
//! * [`series`] handles the cluster generating functions and their asymptotics.

pub mod engine;
pub mod error;
pub mod filling;
pub mod radicals;
pub mod recurrence;
pub mod series;
pub mod sweep;
mod text;
pub mod topology;

pub use engine::{add_and_relax, wave_decompose, AvalancheReport, Configuration, TopplingLog};
pub use error::{Error, Result};
pub use topology::{
    CactusGraph, CellId, ClusterShape, DecoratedRootedSubtree, TreeShape, VertexId,
};
