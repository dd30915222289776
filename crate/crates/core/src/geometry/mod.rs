//! Fine grids, coarse partitions and basis support regions.

mod grid;
mod partition;
mod support;

pub use grid::{build_cartesian_grid, perturb_interior_nodes, BoundarySide, Face, Grid, Point};
pub use partition::{partition_uniform, CoarsePartition};
pub use support::{build_support_regions, SupportRegions};

pub(crate) use grid::{dot, sub};
