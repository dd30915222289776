//! Support regions for restricted smoothing.
//!
//! Along each axis the support of block `j` spans the cells strictly between
//! the center cells of its two neighbouring blocks (clamped to the domain on
//! edge blocks). A basis function is therefore exactly zero at every other
//! block's center cell.

use super::grid::Grid;
use super::partition::CoarsePartition;
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportRegions {
    support: Vec<Vec<usize>>,
    boundary: Vec<Vec<usize>>,
    covering: Vec<Vec<usize>>,
    global_boundary: Vec<bool>,
}

pub fn build_support_regions(grid: &Grid, partition: &CoarsePartition) -> SupportRegions {
    let n = grid.num_cells();
    let m = partition.num_blocks();
    let counts = grid.cell_counts();
    let bc = partition.block_counts();

    let mut support = Vec::with_capacity(m);
    for j in 0..m {
        let b = partition.block_ijk(j);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            lo[a] = if b[a] == 0 {
                0
            } else {
                let mut nb = b;
                nb[a] -= 1;
                let c = partition.center_cell(partition.block_index(nb));
                grid.cell_ijk(c)[a] + 1
            };
            hi[a] = if b[a] + 1 == bc[a] {
                counts[a] - 1
            } else {
                let mut nb = b;
                nb[a] += 1;
                let c = partition.center_cell(partition.block_index(nb));
                grid.cell_ijk(c)[a] - 1
            };
        }
        let mut cells = Vec::new();
        for k in lo[2]..=hi[2] {
            for jj in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    cells.push(grid.cell_index(i, jj, k));
                }
            }
        }
        // blocks always sit inside their own box, but keep the containment
        // unconditional for irregular center placement
        cells.extend_from_slice(partition.cells_of_block(j));
        cells.sort_unstable();
        cells.dedup();
        support.push(cells);
    }

    let mut covering = vec![Vec::new(); n];
    for (j, cells) in support.iter().enumerate() {
        for &c in cells {
            covering[c].push(j);
        }
    }

    let boundary = support
        .iter()
        .enumerate()
        .map(|(j, cells)| {
            cells
                .iter()
                .copied()
                .filter(|&c| {
                    grid.face_neighbors(c)
                        .any(|nb| covering[nb].binary_search(&j).is_err())
                })
                .collect()
        })
        .collect();

    let global_boundary = (0..n)
        .map(|c| grid.face_neighbors(c).any(|nb| covering[nb] != covering[c]))
        .collect();

    SupportRegions {
        support,
        boundary,
        covering,
        global_boundary,
    }
}

impl SupportRegions {
    pub fn num_blocks(&self) -> usize {
        self.support.len()
    }

    pub fn num_cells(&self) -> usize {
        self.covering.len()
    }

    /// Sorted fine cells of the support of block `j`.
    pub fn support(&self, j: usize) -> &[usize] {
        &self.support[j]
    }

    /// Cells of `support(j)` with a face neighbour outside it.
    pub fn boundary(&self, j: usize) -> &[usize] {
        &self.boundary[j]
    }

    /// Sorted blocks whose support contains `cell`.
    pub fn covering(&self, cell: usize) -> &[usize] {
        &self.covering[cell]
    }

    pub fn contains(&self, block: usize, cell: usize) -> bool {
        self.covering[cell].binary_search(&block).is_ok()
    }

    /// Cells adjacent (through a face) to a cell with a different covering
    /// set: the inner and outer layers of every support boundary.
    pub fn is_global_boundary(&self, cell: usize) -> bool {
        self.global_boundary[cell]
    }

    pub fn global_boundary(&self) -> Vec<usize> {
        (0..self.num_cells())
            .filter(|&c| self.global_boundary[c])
            .collect()
    }

    /// Renormalization set for smoothing with `a`: the face-based global
    /// boundary plus every cell coupled by `a` to a cell with a different
    /// covering set (wider stencils such as MPFA-O reach diagonal neighbours).
    pub fn renormalization_set(&self, a: &SparseMatrix) -> Vec<bool> {
        (0..self.num_cells())
            .map(|i| {
                self.global_boundary[i]
                    || a.row_entries(i)
                        .any(|(k, v)| k != i && v != 0.0 && self.covering[k] != self.covering[i])
            })
            .collect()
    }
}
