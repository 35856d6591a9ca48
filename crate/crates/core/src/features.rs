//! Per-candidate geometric descriptor: coordinates, scaled Jacobian, corner
//! sines and corner normals, 29 values per face.
//!
//! Row layout (column ranges):
//!
//! | columns  | content                                        |
//! |----------|------------------------------------------------|
//! | 0..12    | ring vertex coordinates, cloud-centroid centred |
//! | 12       | scaled Jacobian                                |
//! | 13..17   | corner sines, ring order                       |
//! | 17..29   | unit corner normals, ring order                |
//!
//! Matrix file layout (all little-endian): 8-byte magic `QRFINFO1`, `u64`
//! row count, `u64` width (always 29), then row-major `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::candidates::CandidateFace;
use crate::error::{Error, Result};
use crate::geom::{principal_axes, Vec3};
use crate::mesh::{corner_edges, corner_normal, PointCloud};
use crate::scalar::Real;

pub const FACE_INFO_WIDTH: usize = 29;
pub const COORD_COLS: std::ops::Range<usize> = 0..12;
pub const JACOBIAN_COL: usize = 12;
pub const SINE_COLS: std::ops::Range<usize> = 13..17;
pub const NORMAL_COLS: std::ops::Range<usize> = 17..29;

const MATRIX_MAGIC: &[u8; 8] = b"QRFINFO1";

fn check_edges<T: Real>(face: &[Vec3<T>; 4]) -> Result<()> {
    for i in 0..4 {
        let e = face[(i + 1) % 4] - face[i];
        if e.norm() <= T::degenerate_eps() {
            return Err(Error::Degenerate(format!("zero-length edge {i}")));
        }
    }
    Ok(())
}

/// Reference normal for signing corner areas: the least-squares plane normal
/// turned to agree with the polygon's area vector.
pub fn face_reference_normal<T: Real>(face: &[Vec3<T>; 4]) -> Vec3<T> {
    let mut area = Vec3::zero();
    for i in 0..4 {
        area += face[i].cross(face[(i + 1) % 4]);
    }
    let n = principal_axes(face).map(|e| e.vectors[2]).unwrap_or(area);
    if n.dot(area) < T::zero() {
        -n
    } else {
        n
    }
}

/// Minimum over corners of the signed corner area divided by the product of
/// the two adjacent edge lengths, clamped to `[-1, 1]`.
pub fn scaled_jacobian<T: Real>(face: &[Vec3<T>; 4]) -> Result<T> {
    check_edges(face)?;
    let n = face_reference_normal(face);
    let mut best = T::infinity();
    for i in 0..4 {
        let (l_in, l_out) = corner_edges(face, i);
        let c = l_in.cross(l_out);
        let mag = c.norm();
        let signed = if c.dot(n) < T::zero() { -mag } else { mag };
        let q = signed / (l_in.norm() * l_out.norm());
        best = best.min(q);
    }
    Ok(best.max(-T::one()).min(T::one()))
}

/// Sine of the angle between the two edges meeting at each corner.
pub fn corner_sines<T: Real>(face: &[Vec3<T>; 4]) -> Result<[T; 4]> {
    check_edges(face)?;
    Ok([0, 1, 2, 3].map(|i| {
        let (l_in, l_out) = corner_edges(face, i);
        (l_in.cross(l_out).norm() / (l_in.norm() * l_out.norm())).min(T::one())
    }))
}

/// One descriptor row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceInfo<T> {
    pub coords: [T; 12],
    pub jacobian: T,
    pub sines: [T; 4],
    pub normals: [T; 12],
}

impl<T: Real> FaceInfo<T> {
    pub fn from_points(face: &[Vec3<T>; 4], centroid: Vec3<T>) -> Result<Self> {
        let jacobian = scaled_jacobian(face)?;
        let sines = corner_sines(face)?;
        let mut coords = [T::zero(); 12];
        let mut normals = [T::zero(); 12];
        for i in 0..4 {
            let c = face[i] - centroid;
            let n = corner_normal(face, i)?;
            coords[3 * i..3 * i + 3].copy_from_slice(&c.to_array());
            normals[3 * i..3 * i + 3].copy_from_slice(&n.to_array());
        }
        Ok(Self {
            coords,
            jacobian,
            sines,
            normals,
        })
    }

    /// Flattens into the documented 29-column order.
    pub fn to_row(&self) -> [T; FACE_INFO_WIDTH] {
        let mut r = [T::zero(); FACE_INFO_WIDTH];
        r[COORD_COLS].copy_from_slice(&self.coords);
        r[JACOBIAN_COL] = self.jacobian;
        r[SINE_COLS].copy_from_slice(&self.sines);
        r[NORMAL_COLS].copy_from_slice(&self.normals);
        r
    }
}

/// Descriptor of a single candidate. Use [`face_info_matrix`] for many.
pub fn face_info_row<T: Real>(cloud: &PointCloud<T>, face: &CandidateFace<T>) -> Result<FaceInfo<T>> {
    let pts = face.points(cloud)?;
    FaceInfo::from_points(&pts, cloud.centroid())
}

/// Row-major `N_F x 29` descriptor matrix in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceInfoMatrix {
    pub rows: usize,
    pub data: Vec<f64>,
}

impl FaceInfoMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FACE_INFO_WIDTH..(i + 1) * FACE_INFO_WIDTH]
    }

    /// Zeroes the given column group in every row.
    pub fn zero_columns(&mut self, cols: std::ops::Range<usize>) {
        for r in 0..self.rows {
            for c in cols.clone() {
                self.data[r * FACE_INFO_WIDTH + c] = 0.0;
            }
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut body = || -> std::io::Result<()> {
            w.write_all(MATRIX_MAGIC)?;
            w.write_all(&(self.rows as u64).to_le_bytes())?;
            w.write_all(&(FACE_INFO_WIDTH as u64).to_le_bytes())?;
            for x in &self.data {
                w.write_all(&x.to_le_bytes())?;
            }
            w.flush()
        };
        body().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let fmt = |msg: &str| Error::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| fmt("truncated header"))?;
        if &magic != MATRIX_MAGIC {
            return Err(fmt("bad magic; not a face-info matrix"));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(|_| fmt("truncated header"))?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(|_| fmt("truncated header"))?;
        if u64::from_le_bytes(word) as usize != FACE_INFO_WIDTH {
            return Err(fmt("width field is not 29"));
        }
        let mut data = Vec::with_capacity(rows * FACE_INFO_WIDTH);
        for _ in 0..rows * FACE_INFO_WIDTH {
            r.read_exact(&mut word).map_err(|_| fmt("truncated data"))?;
            data.push(f64::from_le_bytes(word));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
        if !rest.is_empty() {
            return Err(fmt("trailing bytes after matrix data"));
        }
        Ok(Self { rows, data })
    }
}

/// Descriptors for all candidates, in candidate order.
pub fn face_info_matrix<T: Real>(cloud: &PointCloud<T>, candidates: &[CandidateFace<T>]) -> Result<FaceInfoMatrix> {
    let centroid = cloud.centroid();
    let mut data = Vec::with_capacity(candidates.len() * FACE_INFO_WIDTH);
    for (i, c) in candidates.iter().enumerate() {
        let pts = c.points(cloud)?;
        let info = FaceInfo::from_points(&pts, centroid).map_err(|e| Error::DegenerateFace {
            face: i,
            reason: e.to_string(),
        })?;
        data.extend(info.to_row().iter().map(|x| x.as_f64()));
    }
    Ok(FaceInfoMatrix {
        rows: candidates.len(),
        data,
    })
}
