//! Permeability tensor fields (millidarcy).

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Symmetric permeability tensor: full in 2-D, diagonal in 3-D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tensor {
    Sym2 { xx: f64, xy: f64, yy: f64 },
    Diag3 { xx: f64, yy: f64, zz: f64 },
}

impl Tensor {
    pub fn isotropic(dim: usize, k: f64) -> Self {
        if dim == 3 {
            Tensor::Diag3 {
                xx: k,
                yy: k,
                zz: k,
            }
        } else {
            Tensor::Sym2 {
                xx: k,
                xy: 0.0,
                yy: k,
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Tensor::Sym2 { .. } => 2,
            Tensor::Diag3 { .. } => 3,
        }
    }

    pub fn is_spd(&self) -> bool {
        match *self {
            Tensor::Sym2 { xx, xy, yy } => xx > 0.0 && yy > 0.0 && xx * yy - xy * xy > 0.0,
            Tensor::Diag3 { xx, yy, zz } => xx > 0.0 && yy > 0.0 && zz > 0.0,
        }
    }

    /// `K · v`.
    pub fn apply(&self, v: Point) -> Point {
        match *self {
            Tensor::Sym2 { xx, xy, yy } => [xx * v[0] + xy * v[1], xy * v[0] + yy * v[1], 0.0],
            Tensor::Diag3 { xx, yy, zz } => [xx * v[0], yy * v[1], zz * v[2]],
        }
    }

    pub fn as_matrix2(&self) -> [[f64; 2]; 2] {
        match *self {
            Tensor::Sym2 { xx, xy, yy } => [[xx, xy], [xy, yy]],
            Tensor::Diag3 { xx, yy, .. } => [[xx, 0.0], [0.0, yy]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    tensors: Vec<Tensor>,
    homogeneous: bool,
}

impl TensorField {
    /// One tensor shared by every cell.
    pub fn homogeneous(tensor: Tensor) -> Result<Self> {
        check_spd(0, &tensor)?;
        Ok(Self {
            tensors: vec![tensor],
            homogeneous: true,
        })
    }

    pub fn from_cells(tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("empty tensor field".into()));
        }
        let dim = tensors[0].dim();
        for (c, t) in tensors.iter().enumerate() {
            if t.dim() != dim {
                return Err(Error::InvalidArgument(format!(
                    "cell {c} mixes tensor dimensions"
                )));
            }
            check_spd(c, t)?;
        }
        Ok(Self {
            tensors,
            homogeneous: false,
        })
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn dim(&self) -> usize {
        self.tensors[0].dim()
    }

    /// Number of stored tensors (1 when homogeneous).
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Whether the field can serve a grid with `cells` cells.
    pub fn fits(&self, cells: usize) -> bool {
        self.homogeneous || self.tensors.len() == cells
    }

    pub fn tensor(&self, cell: usize) -> Tensor {
        if self.homogeneous {
            self.tensors[0]
        } else {
            self.tensors[cell]
        }
    }

    /// `k_xx` per stored tensor, for export.
    pub fn kxx(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .map(|t| match *t {
                Tensor::Sym2 { xx, .. } | Tensor::Diag3 { xx, .. } => xx,
            })
            .collect()
    }
}

fn check_spd(cell: usize, t: &Tensor) -> Result<()> {
    if t.is_spd() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tensor of cell {cell} is not symmetric positive definite: {t:?}"
        )))
    }
}

/// `R(θ) · diag(k1, k2) · R(θ)ᵀ` with `θ` in degrees.
pub fn rotated_tensor(theta_deg: f64, k1: f64, k2: f64) -> Result<TensorField> {
    if !(k1 > 0.0 && k2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "principal permeabilities must be positive, got {k1} and {k2}"
        )));
    }
    let (s, c) = theta_deg.to_radians().sin_cos();
    TensorField::homogeneous(Tensor::Sym2 {
        xx: k1 * c * c + k2 * s * s,
        xy: (k1 - k2) * c * s,
        yy: k1 * s * s + k2 * c * c,
    })
}

/// Isotropic `k = exp(mu_log + sigma_log·z)` with `z` standard normal,
/// drawn cell by cell from a ChaCha8 stream.
pub fn lognormal_field(
    dim: usize,
    cells: usize,
    seed: u64,
    mu_log: f64,
    sigma_log: f64,
) -> Result<TensorField> {
    if !(sigma_log >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_log {sigma_log} must be non-negative"
        )));
    }
    if !(dim == 2 || dim == 3) || cells == 0 {
        return Err(Error::InvalidArgument(
            "lognormal field needs dim 2 or 3 and cells > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = (0..cells)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            Tensor::isotropic(dim, (mu_log + sigma_log * z).exp())
        })
        .collect();
    TensorField::from_cells(tensors)
}

/// Lognormal field with spatial correlation: white noise on the `counts`
/// lattice is smoothed by two passes of a box filter of half-width
/// `correlation` cells per axis, then rescaled to zero mean and unit
/// variance before `exp(mu_log + sigma_log·z)`. `correlation = 0` gives
/// the same values as [`lognormal_field`].
pub fn correlated_lognormal_field(
    dim: usize,
    counts: [usize; 3],
    seed: u64,
    mu_log: f64,
    sigma_log: f64,
    correlation: usize,
) -> Result<TensorField> {
    let cells: usize = counts.iter().product();
    if correlation == 0 {
        return lognormal_field(dim, cells, seed, mu_log, sigma_log);
    }
    if !(sigma_log >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_log {sigma_log} must be non-negative"
        )));
    }
    if !(dim == 2 || dim == 3) || cells == 0 {
        return Err(Error::InvalidArgument(
            "lognormal field needs dim 2 or 3 and cells > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<f64> = (0..cells)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let strides = [1, counts[0], counts[0] * counts[1]];
    for _ in 0..2 {
        for axis in 0..dim {
            z = box_filter(&z, counts, strides, axis, correlation);
        }
    }
    let n = cells as f64;
    let mean = z.iter().sum::<f64>() / n;
    let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if std > 0.0 { 1.0 / std } else { 0.0 };
    let tensors = z
        .iter()
        .map(|v| Tensor::isotropic(dim, (mu_log + sigma_log * (v - mean) * scale).exp()))
        .collect();
    TensorField::from_cells(tensors)
}

/// Moving average along one axis, window truncated at the lattice ends.
fn box_filter(
    z: &[f64],
    counts: [usize; 3],
    strides: [usize; 3],
    axis: usize,
    half: usize,
) -> Vec<f64> {
    let len = counts[axis];
    let mut out = vec![0.0; z.len()];
    for (c, o) in out.iter_mut().enumerate() {
        let i = (c / strides[axis]) % len;
        let base = c - i * strides[axis];
        let (lo, hi) = (i.saturating_sub(half), (i + half).min(len - 1));
        let sum: f64 = (lo..=hi).map(|k| z[base + k * strides[axis]]).sum();
        *o = sum / (hi - lo + 1) as f64;
    }
    out
}

/// Which SPE10 components become the diagonal tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spe10Components {
    /// `diag(kx, ky)` for one layer, `diag(kx, ky, kz)` for several.
    #[default]
    Diagonal,
    /// `kx` on every diagonal entry.
    IsotropicKx,
}

/// Raw SPE10 values for a contiguous layer range, x fastest then y then layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Spe10Layers {
    pub dims: [usize; 3],
    pub first_layer: usize,
    pub layers: usize,
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub kz: Vec<f64>,
}

/// Full SPE10 model dimensions.
pub const SPE10_DIMS: [usize; 3] = [60, 220, 85];

/// Reads the whitespace-separated SPE10 permeability file: a `kx` block, then
/// `ky`, then `kz`, each with x varying fastest, then y, then z. `layers` is
/// 1-based and inclusive.
pub fn read_spe10_layers(
    path: &Path,
    dims: [usize; 3],
    layers: (usize, usize),
) -> Result<Spe10Layers> {
    let (first, last) = layers;
    if first == 0 || last < first || last > dims[2] {
        return Err(Error::InvalidArgument(format!(
            "layer range {first}..={last} outside 1..={}",
            dims[2]
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
    let per_block = dims[0] * dims[1] * dims[2];
    let expected = 3 * per_block;
    if tokens.len() != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            expected,
            found: tokens.len(),
        });
    }
    let per_layer = dims[0] * dims[1];
    let count = (last - first + 1) * per_layer;
    let offset = (first - 1) * per_layer;
    let block = |b: usize| -> Result<Vec<f64>> {
        (0..count)
            .map(|cell| {
                let token = b * per_block + offset + cell;
                let text = tokens[token];
                match text.parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                    _ => Err(Error::Data {
                        path: path.to_path_buf(),
                        token,
                        cell,
                        text: text.to_string(),
                    }),
                }
            })
            .collect()
    };
    Ok(Spe10Layers {
        dims,
        first_layer: first,
        layers: last - first + 1,
        kx: block(0)?,
        ky: block(1)?,
        kz: block(2)?,
    })
}

impl Spe10Layers {
    /// A single layer gives a 2-D field over `dims[0] × dims[1]`; several
    /// layers give a diagonal 3-D field.
    pub fn to_field(&self, components: Spe10Components) -> Result<TensorField> {
        let tensors = (0..self.kx.len())
            .map(|c| {
                let (kx, ky, kz) = match components {
                    Spe10Components::Diagonal => (self.kx[c], self.ky[c], self.kz[c]),
                    Spe10Components::IsotropicKx => (self.kx[c], self.kx[c], self.kx[c]),
                };
                if self.layers == 1 {
                    Tensor::Sym2 {
                        xx: kx,
                        xy: 0.0,
                        yy: ky,
                    }
                } else {
                    Tensor::Diag3 {
                        xx: kx,
                        yy: ky,
                        zz: kz,
                    }
                }
            })
            .collect();
        TensorField::from_cells(tensors)
    }
}

pub fn read_spe10(
    path: &Path,
    dims: [usize; 3],
    layers: (usize, usize),
    components: Spe10Components,
) -> Result<TensorField> {
    read_spe10_layers(path, dims, layers)?.to_field(components)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn rotation_identity() {
        let f = rotated_tensor(0.0, 1000.0, 100.0).unwrap();
        assert!(f.is_homogeneous());
        assert_eq!(
            f.tensor(17),
            Tensor::Sym2 {
                xx: 1000.0,
                xy: 0.0,
                yy: 100.0
            }
        );
    }

    #[test]
    fn rotation_45_degrees() {
        let [[xx, xy], [yx, yy]] = rotated_tensor(45.0, 1000.0, 10.0)
            .unwrap()
            .tensor(0)
            .as_matrix2();
        assert_close(xx, 505.0);
        assert_close(xy, 495.0);
        assert_close(yx, 495.0);
        assert_close(yy, 505.0);
    }

    #[test]
    fn rotation_60_degrees() {
        let [[xx, xy], _] = rotated_tensor(60.0, 1000.0, 100.0)
            .unwrap()
            .tensor(0)
            .as_matrix2();
        let yy = rotated_tensor(60.0, 1000.0, 100.0)
            .unwrap()
            .tensor(0)
            .as_matrix2()[1][1];
        assert_close(xx, 325.0);
        assert_close(xy, 900.0 * 3f64.sqrt() / 4.0);
        assert_close(yy, 775.0);
        assert!((xy - 389.711).abs() < 1e-3);
    }

    #[test]
    fn rotation_rejects_non_positive() {
        assert!(rotated_tensor(10.0, 0.0, 1.0).is_err());
        assert!(rotated_tensor(10.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn lognormal_degenerate_variance() {
        let f = lognormal_field(2, 50, 4, 1.5, 0.0).unwrap();
        for c in 0..50 {
            assert_eq!(f.tensor(c), Tensor::isotropic(2, 1.5f64.exp()));
        }
    }

    #[test]
    fn lognormal_deterministic_and_unbiased() {
        let a = lognormal_field(2, 10_000, 1, 2.0, 3.0).unwrap();
        let b = lognormal_field(2, 10_000, 1, 2.0, 3.0).unwrap();
        assert_eq!(a, b);
        let logs: Vec<f64> = a.kxx().iter().map(|k| k.ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let stderr = 3.0 / (logs.len() as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * stderr, "mean {mean}");
        assert!(a.tensors.iter().all(Tensor::is_spd));
    }

    #[test]
    fn correlated_lognormal_moments_and_smoothness() {
        let counts = [60, 220, 1];
        let n = 60 * 220;
        assert_eq!(
            correlated_lognormal_field(2, counts, 5, 0.0, 3.0, 0).unwrap(),
            lognormal_field(2, n, 5, 0.0, 3.0).unwrap()
        );
        let f = correlated_lognormal_field(2, counts, 5, 1.0, 3.0, 1).unwrap();
        assert_eq!(
            f,
            correlated_lognormal_field(2, counts, 5, 1.0, 3.0, 1).unwrap()
        );
        let logs: Vec<f64> = f.kxx().iter().map(|k| k.ln()).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let sd = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 1e-12 && (sd - 3.0).abs() < 1e-12,
            "{mean} {sd}"
        );
        // lag-one correlation along x: near zero for white noise, large here
        let lag = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let (mut num, mut den) = (0.0, 0.0);
            for c in 0..v.len() {
                den += (v[c] - m).powi(2);
                if c % 60 != 59 {
                    num += (v[c] - m) * (v[c + 1] - m);
                }
            }
            num / den
        };
        let white: Vec<f64> = lognormal_field(2, n, 5, 0.0, 1.0)
            .unwrap()
            .kxx()
            .iter()
            .map(|k| k.ln())
            .collect();
        assert!(lag(&white).abs() < 0.05);
        assert!(lag(&logs) > 0.5, "{}", lag(&logs));
    }

    #[test]
    fn spd_validation() {
        assert!(TensorField::from_cells(vec![Tensor::Sym2 {
            xx: 1.0,
            xy: 2.0,
            yy: 1.0
        }])
        .is_err());
        assert!(TensorField::homogeneous(Tensor::Diag3 {
            xx: 1.0,
            yy: 0.0,
            zz: 1.0
        })
        .is_err());
    }

    #[test]
    fn spe10_mini_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perm.dat");
        std::fs::write(&path, "1 2 3 4  5 6 7 8\n 9 10 11 12\n").unwrap();
        let layers = read_spe10_layers(&path, [2, 2, 1], (1, 1)).unwrap();
        assert_eq!(layers.kx, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(layers.ky, vec![5.0, 6.0, 7.0, 8.0]);
        let field = layers.to_field(Spe10Components::Diagonal).unwrap();
        assert_eq!(
            field.tensor(1),
            Tensor::Sym2 {
                xx: 2.0,
                xy: 0.0,
                yy: 6.0
            }
        );
        let iso = layers.to_field(Spe10Components::IsotropicKx).unwrap();
        assert_eq!(
            iso.tensor(3),
            Tensor::Sym2 {
                xx: 4.0,
                xy: 0.0,
                yy: 4.0
            }
        );
    }

    #[test]
    fn spe10_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perm.dat");
        std::fs::write(&path, "1 2 3 4 5 6 7 8 9 10 11").unwrap();
        match read_spe10_layers(&path, [2, 2, 1], (1, 1)) {
            Err(Error::Format {
                expected, found, ..
            }) => assert_eq!((expected, found), (12, 11)),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn spe10_non_positive_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perm.dat");
        std::fs::write(&path, "1 2 3 4 5 0 7 8 9 10 11 12").unwrap();
        match read_spe10_layers(&path, [2, 2, 1], (1, 1)) {
            Err(Error::Data { cell, token, .. }) => assert_eq!((cell, token), (1, 5)),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn spe10_layer_selection() {
        // 2x1x3 model, select the bottom layer
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perm.dat");
        let tokens: Vec<String> = (1..=18).map(|v| v.to_string()).collect();
        std::fs::write(&path, tokens.join(" ")).unwrap();
        let layers = read_spe10_layers(&path, [2, 1, 3], (3, 3)).unwrap();
        assert_eq!(layers.kx, vec![5.0, 6.0]);
        assert_eq!(layers.ky, vec![11.0, 12.0]);
        assert_eq!(layers.kz, vec![17.0, 18.0]);
        let both = read_spe10_layers(&path, [2, 1, 3], (2, 3)).unwrap();
        let f = both.to_field(Spe10Components::Diagonal).unwrap();
        assert_eq!(f.dim(), 3);
        assert_eq!(
            f.tensor(0),
            Tensor::Diag3 {
                xx: 3.0,
                yy: 9.0,
                zz: 15.0
            }
        );
        assert!(read_spe10_layers(&path, [2, 1, 3], (0, 1)).is_err());
    }
}
