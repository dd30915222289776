use super::grid::{dot, sub, Grid};
use crate::error::{Error, Result};

/// Uniform logically-Cartesian coarse partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarsePartition {
    ratio: [usize; 3],
    block_counts: [usize; 3],
    block_of_cell: Vec<usize>,
    cells_of_block: Vec<Vec<usize>>,
    center_cell: Vec<usize>,
}

/// Blocks of `ratio` cells per axis. A non-divisible axis gets
/// `ceil(count / ratio)` blocks with the remainder in the last one; a ratio
/// larger than the axis yields a single block along it.
pub fn partition_uniform(grid: &Grid, ratio: &[usize]) -> Result<CoarsePartition> {
    if ratio.len() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "coarsening ratio has {} entries for a {}-D grid",
            ratio.len(),
            grid.dim()
        )));
    }
    if ratio.contains(&0) {
        return Err(Error::InvalidArgument(
            "coarsening ratio must be at least 1".into(),
        ));
    }
    let counts = grid.cell_counts();
    let mut r = [1usize; 3];
    r[..ratio.len()].copy_from_slice(ratio);
    let mut block_counts = [1usize; 3];
    for a in 0..3 {
        r[a] = r[a].min(counts[a]);
        block_counts[a] = counts[a].div_ceil(r[a]);
    }
    let m = block_counts.iter().product();
    let mut block_of_cell = Vec::with_capacity(grid.num_cells());
    let mut cells_of_block = vec![Vec::new(); m];
    for c in 0..grid.num_cells() {
        let ijk = grid.cell_ijk(c);
        let b = [ijk[0] / r[0], ijk[1] / r[1], ijk[2] / r[2]];
        let j = b[0] + block_counts[0] * (b[1] + block_counts[1] * b[2]);
        block_of_cell.push(j);
        cells_of_block[j].push(c);
    }
    let center_cell = cells_of_block
        .iter()
        .map(|cells| nearest_to_centroid(grid, cells))
        .collect();
    Ok(CoarsePartition {
        ratio: r,
        block_counts,
        block_of_cell,
        cells_of_block,
        center_cell,
    })
}

/// Cell whose centroid is closest to the volume-weighted block centroid.
/// Distances equal up to rounding count as ties and go to the lowest index.
fn nearest_to_centroid(grid: &Grid, cells: &[usize]) -> usize {
    let vol: f64 = cells.iter().map(|&c| grid.volume(c)).sum();
    let mut center = [0.0; 3];
    for &c in cells {
        let x = grid.centroid(c);
        let w = grid.volume(c) / vol;
        for a in 0..3 {
            center[a] += w * x[a];
        }
    }
    let dist: Vec<f64> = cells
        .iter()
        .map(|&c| {
            let d = sub(grid.centroid(c), center);
            dot(d, d)
        })
        .collect();
    let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = grid.volume(cells[0]).powf(2.0 / grid.dim() as f64);
    let slack = 1e-10 * scale;
    cells
        .iter()
        .zip(&dist)
        .filter(|(_, &d)| d <= best + slack)
        .map(|(&c, _)| c)
        .min()
        .expect("blocks are nonempty")
}

impl CoarsePartition {
    pub fn num_blocks(&self) -> usize {
        self.cells_of_block.len()
    }

    pub fn num_cells(&self) -> usize {
        self.block_of_cell.len()
    }

    pub fn block_counts(&self) -> [usize; 3] {
        self.block_counts
    }

    /// Effective ratio per axis (clamped to the axis cell count).
    pub fn ratio(&self) -> [usize; 3] {
        self.ratio
    }

    pub fn block_of_cell(&self, cell: usize) -> usize {
        self.block_of_cell[cell]
    }

    pub fn block_of_cells(&self) -> &[usize] {
        &self.block_of_cell
    }

    pub fn cells_of_block(&self, block: usize) -> &[usize] {
        &self.cells_of_block[block]
    }

    pub fn center_cell(&self, block: usize) -> usize {
        self.center_cell[block]
    }

    pub fn block_index(&self, b: [usize; 3]) -> usize {
        b[0] + self.block_counts[0] * (b[1] + self.block_counts[1] * b[2])
    }

    pub fn block_ijk(&self, block: usize) -> [usize; 3] {
        let [bx, by, _] = self.block_counts;
        [block % bx, (block / bx) % by, block / (bx * by)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cartesian_grid;

    #[test]
    fn spe10_layer_ratios() {
        let g = build_cartesian_grid(&[60.0, 220.0], &[60, 220]).unwrap();
        let p = partition_uniform(&g, &[5, 10]).unwrap();
        assert_eq!(p.num_blocks(), 264);
        assert_eq!(p.block_counts(), [12, 22, 1]);
        let q = partition_uniform(&g, &[7, 15]).unwrap();
        assert_eq!(q.num_blocks(), 135);
        assert_eq!(q.block_counts(), [9, 15, 1]);
        // the last block along x holds the 4 remainder columns
        let last = q.block_index([8, 0, 0]);
        assert_eq!(q.cells_of_block(last).len(), 4 * 15);
    }

    #[test]
    fn whole_domain_block() {
        let g = build_cartesian_grid(&[4.0, 1.0], &[4, 1]).unwrap();
        let p = partition_uniform(&g, &[4, 1]).unwrap();
        assert_eq!(p.num_blocks(), 1);
        assert_eq!(p.cells_of_block(0), &[0, 1, 2, 3]);
        let big = partition_uniform(&g, &[9, 3]).unwrap();
        assert_eq!(big.num_blocks(), 1);
    }

    #[test]
    fn disjoint_cover_and_equal_sizes() {
        let g = build_cartesian_grid(&[1.0, 1.0], &[12, 12]).unwrap();
        let p = partition_uniform(&g, &[3, 4]).unwrap();
        let mut seen = vec![0; g.num_cells()];
        for b in 0..p.num_blocks() {
            assert_eq!(p.cells_of_block(b).len(), 12);
            for &c in p.cells_of_block(b) {
                seen[c] += 1;
                assert_eq!(p.block_of_cell(c), b);
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn centers_are_middle_cells() {
        let g = build_cartesian_grid(&[9.0, 1.0], &[9, 1]).unwrap();
        let p = partition_uniform(&g, &[3, 1]).unwrap();
        let centers: Vec<_> = (0..3).map(|b| p.center_cell(b)).collect();
        assert_eq!(centers, vec![1, 4, 7]);
        // even block: tie between two cells goes to the lower index
        let g = build_cartesian_grid(&[4.0, 4.0], &[4, 4]).unwrap();
        let p = partition_uniform(&g, &[4, 4]).unwrap();
        assert_eq!(p.center_cell(0), g.cell_index(1, 1, 0));
    }

    #[test]
    fn rejects_zero_ratio() {
        let g = build_cartesian_grid(&[1.0, 1.0], &[4, 4]).unwrap();
        assert!(partition_uniform(&g, &[0, 1]).is_err());
        assert!(partition_uniform(&g, &[1]).is_err());
    }
}
