use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Side of the bounding box a boundary face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySide {
    Left,
    Right,
    Bottom,
    Top,
    Front,
    Back,
}

impl BoundarySide {
    /// Axis normal to the side and whether it is the upper end.
    pub fn axis(self) -> (usize, bool) {
        match self {
            BoundarySide::Left => (0, false),
            BoundarySide::Right => (0, true),
            BoundarySide::Bottom => (1, false),
            BoundarySide::Top => (1, true),
            BoundarySide::Front => (2, false),
            BoundarySide::Back => (2, true),
        }
    }

    fn from_axis(axis: usize, upper: bool) -> Self {
        match (axis, upper) {
            (0, false) => BoundarySide::Left,
            (0, true) => BoundarySide::Right,
            (1, false) => BoundarySide::Bottom,
            (1, true) => BoundarySide::Top,
            (2, false) => BoundarySide::Front,
            _ => BoundarySide::Back,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub nodes: Vec<usize>,
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub side: Option<BoundarySide>,
    pub centroid: Point,
    /// Normal scaled by face area, pointing out of `owner`.
    pub area: Point,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    pub fn measure(&self) -> f64 {
        norm(self.area)
    }
}

/// Structured logically-Cartesian grid in 2-D or 3-D. 2-D grids keep a zero
/// third coordinate and a unit thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    cell_counts: [usize; 3],
    nodes: Vec<Point>,
    cell_nodes: Vec<Vec<usize>>,
    cell_faces: Vec<Vec<usize>>,
    centroids: Vec<Point>,
    volumes: Vec<f64>,
    faces: Vec<Face>,
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Builds a regular lattice grid. `extent` and `cell_counts` must have the
/// same length, 2 or 3.
pub fn build_cartesian_grid(extent: &[f64], cell_counts: &[usize]) -> Result<Grid> {
    let dim = extent.len();
    if !(dim == 2 || dim == 3) || cell_counts.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "grid needs 2 or 3 matching extents and counts, got {} and {}",
            extent.len(),
            cell_counts.len()
        )));
    }
    if let Some(&e) = extent.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "extent {e} must be positive"
        )));
    }
    if cell_counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "cell counts must be at least 1".into(),
        ));
    }
    let mut counts = [1usize; 3];
    counts[..dim].copy_from_slice(cell_counts);
    let mut ext = [1.0; 3];
    ext[..dim].copy_from_slice(extent);
    let nn = [
        counts[0] + 1,
        counts[1] + 1,
        if dim == 3 { counts[2] + 1 } else { 1 },
    ];
    let mut nodes = Vec::with_capacity(nn[0] * nn[1] * nn[2]);
    for c in 0..nn[2] {
        for b in 0..nn[1] {
            for a in 0..nn[0] {
                let z = if dim == 3 {
                    ext[2] * c as f64 / counts[2] as f64
                } else {
                    0.0
                };
                nodes.push([
                    ext[0] * a as f64 / counts[0] as f64,
                    ext[1] * b as f64 / counts[1] as f64,
                    z,
                ]);
            }
        }
    }
    let mut grid = Grid {
        dim,
        cell_counts: counts,
        nodes,
        cell_nodes: Vec::new(),
        cell_faces: Vec::new(),
        centroids: Vec::new(),
        volumes: Vec::new(),
        faces: Vec::new(),
    };
    grid.build_topology();
    grid.compute_geometry()?;
    Ok(grid)
}

/// Displaces each strictly interior node of a 2-D grid by an independent
/// uniform vector in `[-amplitude·h, amplitude·h]²`, `h` the shortest cell
/// edge of the input grid.
pub fn perturb_interior_nodes(grid: &Grid, amplitude: f64, seed: u64) -> Result<Grid> {
    if grid.dim != 2 {
        return Err(Error::InvalidArgument(
            "node perturbation is 2-D only".into(),
        ));
    }
    if !(0.0..0.5).contains(&amplitude) {
        return Err(Error::InvalidArgument(format!(
            "perturbation amplitude {amplitude} outside [0, 0.5)"
        )));
    }
    let mut out = grid.clone();
    if amplitude == 0.0 {
        return Ok(out);
    }
    let h = grid.min_edge_length();
    let [nx, ny, _] = grid.cell_counts;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = amplitude * h;
    for b in 1..ny {
        for a in 1..nx {
            let v = grid.node_index(a, b, 0);
            out.nodes[v][0] += rng.random_range(-delta..=delta);
            out.nodes[v][1] += rng.random_range(-delta..=delta);
        }
    }
    out.compute_geometry()?;
    Ok(out)
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.volumes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Cells per axis; the third entry is 1 in 2-D.
    pub fn cell_counts(&self) -> [usize; 3] {
        self.cell_counts
    }

    pub fn node_counts(&self) -> [usize; 3] {
        let c = self.cell_counts;
        [c[0] + 1, c[1] + 1, if self.dim == 3 { c[2] + 1 } else { 1 }]
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell]
    }

    pub fn cell_faces(&self, cell: usize) -> &[usize] {
        &self.cell_faces[cell]
    }

    pub fn centroid(&self, cell: usize) -> Point {
        self.centroids[cell]
    }

    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    pub fn volume(&self, cell: usize) -> f64 {
        self.volumes[cell]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].is_boundary())
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.cell_counts[0] * (j + self.cell_counts[1] * k)
    }

    pub fn cell_ijk(&self, cell: usize) -> [usize; 3] {
        let [nx, ny, _] = self.cell_counts;
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    pub fn node_index(&self, a: usize, b: usize, c: usize) -> usize {
        let nn = self.node_counts();
        a + nn[0] * (b + nn[1] * c)
    }

    /// Cells sharing a face with `cell`.
    pub fn face_neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[cell].iter().filter_map(move |&f| {
            let face = &self.faces[f];
            match face.neighbor {
                Some(n) if face.owner == cell => Some(n),
                Some(_) => Some(face.owner),
                None => None,
            }
        })
    }

    /// Shortest edge over all cells.
    pub fn min_edge_length(&self) -> f64 {
        let mut h = f64::INFINITY;
        for nodes in &self.cell_nodes {
            let ring: &[usize] = if self.dim == 2 { nodes } else { &nodes[..4] };
            for k in 0..ring.len() {
                let e = sub(self.nodes[ring[(k + 1) % ring.len()]], self.nodes[ring[k]]);
                h = h.min(norm(e));
            }
            if self.dim == 3 {
                for k in 0..4 {
                    h = h.min(norm(sub(self.nodes[nodes[k + 4]], self.nodes[nodes[k]])));
                }
            }
        }
        h
    }

    fn build_topology(&mut self) {
        let [nx, ny, nz] = self.cell_counts;
        let n = nx * ny * nz;
        self.cell_nodes = (0..n)
            .map(|c| {
                let [i, j, k] = self.cell_ijk(c);
                let ring = |kk: usize| {
                    [
                        self.node_index(i, j, kk),
                        self.node_index(i + 1, j, kk),
                        self.node_index(i + 1, j + 1, kk),
                        self.node_index(i, j + 1, kk),
                    ]
                };
                let mut v = ring(k).to_vec();
                if self.dim == 3 {
                    v.extend(ring(k + 1));
                }
                v
            })
            .collect();

        let mut faces = Vec::new();
        let counts = self.cell_counts;
        let axes = self.dim;
        for axis in 0..axes {
            let mut lim = counts;
            lim[axis] += 1;
            for k in 0..lim[2] {
                for j in 0..lim[1] {
                    for i in 0..lim[0] {
                        let idx = [i, j, k];
                        let along = idx[axis];
                        let mut lower = idx;
                        let below = if along > 0 {
                            lower[axis] -= 1;
                            Some(self.cell_index(lower[0], lower[1], lower[2]))
                        } else {
                            None
                        };
                        let above = (along < counts[axis]).then(|| self.cell_index(i, j, k));
                        let (owner, neighbor, side) = match (below, above) {
                            (Some(b), Some(a)) => (b, Some(a), None),
                            (Some(b), None) => (b, None, Some(BoundarySide::from_axis(axis, true))),
                            (None, Some(a)) => {
                                (a, None, Some(BoundarySide::from_axis(axis, false)))
                            }
                            (None, None) => unreachable!(),
                        };
                        faces.push(Face {
                            nodes: self.face_nodes(axis, idx),
                            owner,
                            neighbor,
                            side,
                            centroid: [0.0; 3],
                            area: [0.0; 3],
                        });
                    }
                }
            }
        }
        let mut cell_faces = vec![Vec::new(); n];
        for (f, face) in faces.iter().enumerate() {
            cell_faces[face.owner].push(f);
            if let Some(nb) = face.neighbor {
                cell_faces[nb].push(f);
            }
        }
        self.faces = faces;
        self.cell_faces = cell_faces;
    }

    /// Nodes of the face normal to `axis` at lattice position `idx`, listed
    /// so the 2-D edge or 3-D quad can be walked in order.
    fn face_nodes(&self, axis: usize, idx: [usize; 3]) -> Vec<usize> {
        let [i, j, k] = idx;
        if self.dim == 2 {
            match axis {
                0 => vec![self.node_index(i, j, 0), self.node_index(i, j + 1, 0)],
                _ => vec![self.node_index(i + 1, j, 0), self.node_index(i, j, 0)],
            }
        } else {
            match axis {
                0 => vec![
                    self.node_index(i, j, k),
                    self.node_index(i, j + 1, k),
                    self.node_index(i, j + 1, k + 1),
                    self.node_index(i, j, k + 1),
                ],
                1 => vec![
                    self.node_index(i, j, k),
                    self.node_index(i, j, k + 1),
                    self.node_index(i + 1, j, k + 1),
                    self.node_index(i + 1, j, k),
                ],
                _ => vec![
                    self.node_index(i, j, k),
                    self.node_index(i + 1, j, k),
                    self.node_index(i + 1, j + 1, k),
                    self.node_index(i, j + 1, k),
                ],
            }
        }
    }

    fn compute_geometry(&mut self) -> Result<()> {
        let n = self.cell_nodes.len();
        self.centroids = vec![[0.0; 3]; n];
        self.volumes = vec![0.0; n];
        for c in 0..n {
            let (vol, cen) = if self.dim == 2 {
                polygon_area_centroid(self.cell_nodes[c].iter().map(|&v| self.nodes[v]))
            } else {
                hexahedron_box(self.cell_nodes[c].iter().map(|&v| self.nodes[v]))
            };
            if !(vol > 0.0) {
                return Err(Error::DegenerateGrid {
                    cell: c,
                    volume: vol,
                });
            }
            self.volumes[c] = vol;
            self.centroids[c] = cen;
        }
        for face in &mut self.faces {
            let pts: Vec<Point> = face.nodes.iter().map(|&v| self.nodes[v]).collect();
            let (centroid, mut area) = if self.dim == 2 {
                let e = sub(pts[1], pts[0]);
                (
                    [
                        0.5 * (pts[0][0] + pts[1][0]),
                        0.5 * (pts[0][1] + pts[1][1]),
                        0.0,
                    ],
                    [e[1], -e[0], 0.0],
                )
            } else {
                let c = [
                    0.25 * pts.iter().map(|p| p[0]).sum::<f64>(),
                    0.25 * pts.iter().map(|p| p[1]).sum::<f64>(),
                    0.25 * pts.iter().map(|p| p[2]).sum::<f64>(),
                ];
                let a = cross(sub(pts[2], pts[0]), sub(pts[3], pts[1]));
                (c, [0.5 * a[0], 0.5 * a[1], 0.5 * a[2]])
            };
            if dot(area, sub(centroid, self.centroids[face.owner])) < 0.0 {
                area = [-area[0], -area[1], -area[2]];
            }
            face.centroid = centroid;
            face.area = area;
        }
        Ok(())
    }
}

fn polygon_area_centroid(pts: impl Iterator<Item = Point>) -> (f64, Point) {
    let p: Vec<Point> = pts.collect();
    // shift to the first vertex to limit cancellation on large coordinates
    let o = p[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..p.len() {
        let (x0, y0) = (p[k][0] - o[0], p[k][1] - o[1]);
        let q = p[(k + 1) % p.len()];
        let (x1, y1) = (q[0] - o[0], q[1] - o[1]);
        let w = x0 * y1 - x1 * y0;
        a2 += w;
        cx += (x0 + x1) * w;
        cy += (y0 + y1) * w;
    }
    let area = 0.5 * a2;
    if area == 0.0 {
        return (0.0, o);
    }
    (
        area,
        [o[0] + cx / (6.0 * area), o[1] + cy / (6.0 * area), 0.0],
    )
}

fn hexahedron_box(pts: impl Iterator<Item = Point>) -> (f64, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let vol = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    (
        vol,
        [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ],
    )
}
