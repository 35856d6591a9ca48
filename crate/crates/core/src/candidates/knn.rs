use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::mesh::PointCloud;
use crate::scalar::Real;

/// Exact k-nearest-neighbour lists, nearest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborGraph {
    k: usize,
    flat: Vec<usize>,
}

impl NeighborGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.k.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.flat[i * self.k..(i + 1) * self.k]
    }
}

/// Builds the k-NN graph by exhaustive search; ties go to the smaller index.
pub fn knn_graph<T: Real>(cloud: &PointCloud<T>, k: usize) -> Result<NeighborGraph> {
    let n = cloud.len();
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "k = {k} needs more than {k} points but the cloud has {n}; lower k"
        )));
    }
    let by_dist = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    let mut flat = Vec::with_capacity(n * k);
    let mut scratch: Vec<(T, usize)> = Vec::with_capacity(n - 1);
    for (i, p) in cloud.points.iter().enumerate() {
        scratch.clear();
        scratch.extend(
            cloud
                .points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, q)| (p.distance_squared(*q), j)),
        );
        scratch.select_nth_unstable_by(k - 1, by_dist);
        let head = &mut scratch[..k];
        head.sort_unstable_by(by_dist);
        flat.extend(head.iter().map(|&(_, j)| j));
    }
    Ok(NeighborGraph { k, flat })
}
