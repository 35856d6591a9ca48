//! Fixed (non-trainable) per-sample inputs to the network.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateFace, NeighborGraph};
use crate::error::{Error, Result};
use crate::features::{face_info_matrix, FaceInfoMatrix, COORD_COLS, FACE_INFO_WIDTH, JACOBIAN_COL, NORMAL_COLS, SINE_COLS};
use crate::geom::{canonical_sign, principal_axes, Vec3};
use crate::mesh::{PointCloud, Quad};
use crate::scalar::Real;

/// Per-point geometric features: centred position (3), PCA normal (3), the
/// eigenvalue ratios `l2/l1`, `l3/l1` (2), then from the neighbours alone
/// (without the point) the point's distance to their best-fit plane over
/// the mean neighbour distance, and their `l3/l1` (2).
pub const POINT_BASE_WIDTH: usize = 10;

/// Descriptor column groups that can be zeroed for ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropFinfo {
    pub coords: bool,
    pub jacobian: bool,
    pub sines: bool,
    pub normals: bool,
}

impl DropFinfo {
    pub fn apply(&self, m: &mut FaceInfoMatrix) {
        if self.coords {
            m.zero_columns(COORD_COLS);
        }
        if self.jacobian {
            m.zero_columns(JACOBIAN_COL..JACOBIAN_COL + 1);
        }
        if self.sines {
            m.zero_columns(SINE_COLS);
        }
        if self.normals {
            m.zero_columns(NORMAL_COLS);
        }
    }

    pub fn any(&self) -> bool {
        self.coords || self.jacobian || self.sines || self.normals
    }
}

#[derive(Clone, Debug)]
pub struct PointInputs {
    /// `N x POINT_BASE_WIDTH`.
    pub base: Array2<f64>,
    /// Neighbour offsets `p_j - p_i`, `k` consecutive rows per point.
    pub offsets: Array2<f64>,
    pub k: usize,
}

impl PointInputs {
    pub fn len(&self) -> usize {
        self.base.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.base.nrows() == 0
    }
}

/// Raw per-point features over a k-NN graph. Every quantity is relative to
/// the cloud centroid or to the point itself, so translation drops out.
pub fn point_inputs<T: Real>(cloud: &PointCloud<T>, graph: &NeighborGraph) -> Result<PointInputs> {
    let n = cloud.len();
    let k = graph.k();
    if graph.len() != n {
        return Err(Error::Shape(format!("graph has {} points, cloud {n}", graph.len())));
    }
    let c = cloud.centroid();
    let mut base = Array2::zeros((n, POINT_BASE_WIDTH));
    let mut offsets = Array2::zeros((n * k, 3));
    let mut hood = Vec::with_capacity(k + 1);
    for i in 0..n {
        let p = cloud.points[i];
        hood.clear();
        hood.push(p);
        for (j, &nb) in graph.neighbors(i).iter().enumerate() {
            let q = cloud.points[nb];
            hood.push(q);
            let d = (q - p).to_array();
            for a in 0..3 {
                offsets[[i * k + j, a]] = d[a].as_f64();
            }
        }
        let eig = principal_axes(&hood).ok_or_else(|| Error::Degenerate(format!("point {i}: empty neighbourhood")))?;
        let l1 = eig.values[0].as_f64();
        if !(l1 > 0.0) {
            return Err(Error::Degenerate(format!("point {i}: all neighbours coincide")));
        }
        let nrm = canonical_sign(eig.vectors[2]);
        let rel = (p - c).to_array();
        for a in 0..3 {
            base[[i, a]] = rel[a].as_f64();
            base[[i, 3 + a]] = nrm[a].as_f64();
        }
        base[[i, 6]] = eig.values[1].as_f64().max(0.0) / l1;
        base[[i, 7]] = eig.values[2].as_f64().max(0.0) / l1;
        if let Some(ne) = principal_axes(&hood[1..]) {
            let nl1 = ne.values[0].as_f64();
            if nl1 > 0.0 {
                let mean_d = hood[1..].iter().map(|q| (*q - p).norm().as_f64()).sum::<f64>() / k as f64;
                let nc = Vec3::centroid(hood[1..].iter().copied());
                base[[i, 8]] = (p - nc).dot(ne.vectors[2]).as_f64().abs() / mean_d;
                base[[i, 9]] = ne.values[2].as_f64().max(0.0) / nl1;
            }
        }
    }
    Ok(PointInputs { base, offsets, k })
}

/// Everything the network needs for one cloud and its candidates.
#[derive(Clone, Debug)]
pub struct SampleInputs {
    pub points: PointInputs,
    /// `M x 29` descriptors, with ablated column groups zeroed.
    pub face_info: Array2<f64>,
    pub rings: Vec<Quad>,
}

impl SampleInputs {
    pub fn candidates(&self) -> usize {
        self.rings.len()
    }
}

pub fn prepare_inputs<T: Real>(
    cloud: &PointCloud<T>,
    graph: &NeighborGraph,
    candidates: &[CandidateFace<T>],
    drop: &DropFinfo,
) -> Result<SampleInputs> {
    let points = point_inputs(cloud, graph)?;
    let mut m = face_info_matrix(cloud, candidates)?;
    drop.apply(&mut m);
    let face_info = Array2::from_shape_vec((m.rows, FACE_INFO_WIDTH), m.data).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(SampleInputs {
        points,
        face_info,
        rings: candidates.iter().map(|c| c.ring).collect(),
    })
}
