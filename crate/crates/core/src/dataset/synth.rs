//! Structured synthetic quad meshes.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{Quad, QuadMesh};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    /// Flat `res_u x res_v` vertex grid.
    PlaneGrid,
    /// Grid displaced by a product of sines.
    WavyGrid,
    /// Tube closed around its circumference, open at both rims.
    Cylinder,
    Torus,
    /// Surface of a cube with `res_u` cells per edge.
    CubeShell,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::PlaneGrid,
        ShapeKind::WavyGrid,
        ShapeKind::Cylinder,
        ShapeKind::Torus,
        ShapeKind::CubeShell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::PlaneGrid => "plane-grid",
            ShapeKind::WavyGrid => "wavy-grid",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Torus => "torus",
            ShapeKind::CubeShell => "cube-shell",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown shape kind {s:?}")))
    }
}

/// Parameters of one synthetic shape and its noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Vertex count along u (around the tube/major circle; cells per edge for a cube).
    pub res_u: usize,
    /// Vertex count along v (ignored for a cube).
    pub res_v: usize,
    /// Target edge length.
    pub spacing: f64,
    /// Random vertex displacement as a fraction of `spacing`.
    #[serde(default)]
    pub jitter: f64,
    /// Noise points added, as a fraction of the vertex count.
    pub noise_ratio: f64,
    /// Half-width of the normal offset, as a fraction of the mean edge length.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, res_u: usize, res_v: usize) -> Self {
        Self {
            kind,
            res_u,
            res_v,
            spacing: 1.0,
            jitter: 0.0,
            noise_ratio: 0.10,
            noise_amplitude: 0.5,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, ratio: f64) -> Self {
        self.noise_ratio = ratio;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.res_u < 2 || (self.kind != ShapeKind::CubeShell && self.res_v < 2) {
            return bad(format!("resolution {}x{} below 2", self.res_u, self.res_v));
        }
        match self.kind {
            ShapeKind::Cylinder if self.res_u < 3 => return bad("cylinder needs res_u >= 3".into()),
            ShapeKind::Torus if self.res_u < 3 || self.res_v < 3 => {
                return bad("torus needs res_u, res_v >= 3".into())
            }
            ShapeKind::Torus if self.res_u <= self.res_v => {
                return bad("torus needs res_u > res_v so the tube does not self-intersect".into())
            }
            _ => {}
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad("spacing must be positive".into());
        }
        if !(0.0..0.5).contains(&self.noise_ratio) {
            return bad(format!("noise_ratio {} outside [0, 0.5)", self.noise_ratio));
        }
        if !(self.noise_amplitude >= 0.0) || !(self.jitter >= 0.0) {
            return bad("noise_amplitude and jitter must be non-negative".into());
        }
        Ok(())
    }
}

fn grid_faces(nu: usize, nv: usize, wrap_u: bool, wrap_v: bool) -> Vec<Quad> {
    let id = |i: usize, j: usize| (j % nv) * nu + (i % nu);
    let cu = if wrap_u { nu } else { nu - 1 };
    let cv = if wrap_v { nv } else { nv - 1 };
    let mut faces = Vec::with_capacity(cu * cv);
    for j in 0..cv {
        for i in 0..cu {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    faces
}

fn cube_shell(n: usize, h: f64) -> (Vec<[f64; 3]>, Vec<Quad>) {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |p: [usize; 3], verts: &mut Vec<[f64; 3]>| {
        *index.entry(p).or_insert_with(|| {
            verts.push(p.map(|c| c as f64 * h));
            verts.len() - 1
        })
    };
    for a in 0..3 {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        for side in [0, n] {
            for j in 0..n {
                for i in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut p = [0usize; 3];
                        p[a] = side;
                        p[b] = i + di;
                        p[c] = j + dj;
                        p
                    };
                    let mut q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)].map(|p| vid(p, &mut verts));
                    if side == 0 {
                        q.reverse();
                    }
                    faces.push(q);
                }
            }
        }
    }
    (verts, faces)
}

/// Generates the structured quad mesh described by `spec`.
pub fn synth_quad_mesh<T: Real>(spec: &ShapeSpec) -> Result<QuadMesh<T>> {
    spec.validate()?;
    let h = spec.spacing;
    let (nu, nv) = (spec.res_u, spec.res_v);
    let (mut pts, faces): (Vec<[f64; 3]>, Vec<Quad>) = match spec.kind {
        ShapeKind::PlaneGrid | ShapeKind::WavyGrid => {
            let wavy = spec.kind == ShapeKind::WavyGrid;
            let wavelength = 6.0 * h;
            let amp = 0.6 * h;
            let mut p = Vec::with_capacity(nu * nv);
            for j in 0..nv {
                for i in 0..nu {
                    let (x, y) = (i as f64 * h, j as f64 * h);
                    let z = if wavy {
                        amp * (TAU * x / wavelength).sin() * (TAU * y / wavelength).cos()
                    } else {
                        0.0
                    };
                    p.push([x, y, z]);
                }
            }
            (p, grid_faces(nu, nv, false, false))
        }
        ShapeKind::Cylinder => {
            let r = nu as f64 * h / TAU;
            let mut p = Vec::with_capacity(nu * nv);
            for j in 0..nv {
                for i in 0..nu {
                    let t = TAU * i as f64 / nu as f64;
                    p.push([r * t.cos(), r * t.sin(), j as f64 * h]);
                }
            }
            (p, grid_faces(nu, nv, true, false))
        }
        ShapeKind::Torus => {
            let big = nu as f64 * h / TAU;
            let small = nv as f64 * h / TAU;
            let mut p = Vec::with_capacity(nu * nv);
            for j in 0..nv {
                let phi = TAU * j as f64 / nv as f64;
                for i in 0..nu {
                    let t = TAU * i as f64 / nu as f64;
                    let ring = big + small * phi.cos();
                    p.push([ring * t.cos(), ring * t.sin(), small * phi.sin()]);
                }
            }
            (p, grid_faces(nu, nv, true, true))
        }
        ShapeKind::CubeShell => cube_shell(nu, h),
    };
    if spec.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6a09_e667_f3bc_c908);
        let a = spec.jitter * h;
        for p in pts.iter_mut() {
            for c in p.iter_mut() {
                *c += rng.gen_range(-a..=a);
            }
        }
    }
    let vertices = pts.into_iter().map(|[x, y, z]| Vec3::from_f64(x, y, z)).collect();
    QuadMesh::new(vertices, faces)
}
