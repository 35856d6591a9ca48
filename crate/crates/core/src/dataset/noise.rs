use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ShapeSpec;
use crate::error::{Error, Result};
use crate::features::face_reference_normal;
use crate::mesh::{bilinear, quad_area, PointCloud, QuadMesh};
use crate::scalar::Real;

/// Where a noise point came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSample {
    pub face: usize,
    pub s: f64,
    pub t: f64,
    /// Signed distance along the unit face normal.
    pub offset: f64,
}

/// Number of noise points added for `vertex_count` vertices.
pub fn noise_count(vertex_count: usize, ratio: f64) -> usize {
    (ratio * vertex_count as f64).round() as usize
}

/// Mesh vertices followed by area-sampled noise points pushed off the surface
/// along the face normal. Also returns the draw behind each noise point.
pub fn inject_noise_detailed<T: Real>(mesh: &QuadMesh<T>, spec: &ShapeSpec) -> Result<(PointCloud<T>, Vec<NoiseSample>)> {
    let n_vert = mesh.vertices.len();
    let count = noise_count(n_vert, spec.noise_ratio);
    let mut points = mesh.vertices.clone();
    let mut flags = vec![false; n_vert];
    let mut samples = Vec::with_capacity(count);
    if count > 0 {
        if mesh.faces.is_empty() {
            return Err(Error::InvalidInput("cannot place noise on a mesh without faces".into()));
        }
        let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| quad_area(&mesh.face_points(f)).as_f64()).collect();
        let pick = WeightedIndex::new(&areas).map_err(|e| Error::InvalidInput(format!("face areas: {e}")))?;
        let amp = spec.noise_amplitude * mesh.mean_edge_length().as_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for _ in 0..count {
            let face = pick.sample(&mut rng);
            let s: f64 = rng.gen();
            let t: f64 = rng.gen();
            let offset = if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
            let q = mesh.face_points(face);
            let n = face_reference_normal(&q).normalized().unwrap_or_default();
            let p = bilinear(&q, T::lit(s), T::lit(t)) + n * T::lit(offset);
            points.push(p);
            flags.push(true);
            samples.push(NoiseSample { face, s, t, offset });
        }
    }
    Ok((PointCloud::with_noise(points, Some(flags))?, samples))
}

pub fn inject_noise<T: Real>(mesh: &QuadMesh<T>, spec: &ShapeSpec) -> Result<PointCloud<T>> {
    inject_noise_detailed(mesh, spec).map(|(c, _)| c)
}
