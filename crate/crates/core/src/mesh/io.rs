//! OBJ quad-mesh and ASCII PLY point-cloud files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{PointCloud, QuadMesh};
use crate::scalar::Real;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(path: &Path, line: usize, tok: Option<&str>) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(path, line, "missing coordinate"))?;
    tok.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("bad number {tok:?}")))
}

/// Reads `v x y z` and `f a b c d` records; any non-quad face is an error.
///
/// Face tokens may carry `/vt/vn` suffixes, which are ignored. Other record
/// types (`vn`, `vt`, `o`, `g`, ...) are skipped.
pub fn read_obj<T: Real>(path: impl AsRef<Path>) -> Result<QuadMesh<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x = parse_f64(path, lineno, tok.next())?;
                let y = parse_f64(path, lineno, tok.next())?;
                let z = parse_f64(path, lineno, tok.next())?;
                vertices.push(Vec3::from_f64(x, y, z));
            }
            Some("f") => {
                let idx: Vec<&str> = tok.collect();
                if idx.len() != 4 {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("face has {} vertices; only quads are supported", idx.len()),
                    ));
                }
                let mut quad = [0usize; 4];
                for (slot, t) in quad.iter_mut().zip(idx) {
                    let head = t.split('/').next().unwrap_or("");
                    let one_based: i64 = head
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad face index {t:?}")))?;
                    if one_based < 1 {
                        return Err(parse_err(path, lineno, "face indices are 1-based and positive"));
                    }
                    *slot = (one_based - 1) as usize;
                }
                faces.push(quad);
            }
            _ => {}
        }
    }
    QuadMesh::new(vertices, faces).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Writes vertices with full round-trip precision and 1-based quad faces.
pub fn write_obj<T: Real>(path: impl AsRef<Path>, mesh: &QuadMesh<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(w, "v {} {} {}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64())?;
        }
        for f in &mesh.faces {
            writeln!(w, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1)?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[derive(Default)]
struct PlyHeader {
    vertex_count: usize,
    vertex_props: Vec<String>,
    header_lines: usize,
}

fn read_ply_header(path: &Path, lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<PlyHeader> {
    let mut h = PlyHeader::default();
    let mut in_vertex = false;
    let mut saw_magic = false;
    for line in lines.by_ref() {
        let line = line.map_err(|e| Error::io(path, e))?;
        h.header_lines += 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["ply"] => saw_magic = true,
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(parse_err(path, h.header_lines, format!("unsupported PLY format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    h.vertex_count = count
                        .parse()
                        .map_err(|_| parse_err(path, h.header_lines, "bad vertex count"))?;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(parse_err(path, h.header_lines, "list properties on vertices are unsupported"));
                }
            }
            ["property", _ty, name] => {
                if in_vertex {
                    h.vertex_props.push(name.to_string());
                }
            }
            ["end_header"] => {
                if !saw_magic {
                    return Err(parse_err(path, 1, "missing 'ply' magic line"));
                }
                return Ok(h);
            }
            [] => {}
            _ => return Err(parse_err(path, h.header_lines, format!("unexpected header line {line:?}"))),
        }
    }
    Err(parse_err(path, h.header_lines, "missing end_header"))
}

/// Reads an ASCII PLY point cloud: `x`, `y`, `z` and an optional `noise` flag.
///
/// The vertex element must come first; later elements are ignored.
pub fn read_ply_cloud<T: Real>(path: impl AsRef<Path>) -> Result<PointCloud<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = read_ply_header(path, &mut lines)?;
    let col = |name: &str| header.vertex_props.iter().position(|p| p == name);
    let (Some(cx), Some(cy), Some(cz)) = (col("x"), col("y"), col("z")) else {
        return Err(parse_err(path, header.header_lines, "vertex element lacks x/y/z properties"));
    };
    let cn = col("noise");
    let mut points = Vec::with_capacity(header.vertex_count);
    let mut flags = cn.map(|_| Vec::with_capacity(header.vertex_count));
    for i in 0..header.vertex_count {
        let lineno = header.header_lines + i + 1;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(path, lineno, "unexpected end of file"))?
            .map_err(|e| Error::io(path, e))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < header.vertex_props.len() {
            return Err(parse_err(path, lineno, "too few values on vertex line"));
        }
        let x = parse_f64(path, lineno, Some(t[cx]))?;
        let y = parse_f64(path, lineno, Some(t[cy]))?;
        let z = parse_f64(path, lineno, Some(t[cz]))?;
        points.push(Vec3::from_f64(x, y, z));
        if let (Some(c), Some(f)) = (cn, flags.as_mut()) {
            let v: u8 = t[c]
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad noise flag {:?}", t[c])))?;
            f.push(v != 0);
        }
    }
    PointCloud::with_noise(points, flags).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Writes an ASCII PLY; the `noise` property is emitted only when flags exist.
pub fn write_ply_cloud<T: Real>(path: impl AsRef<Path>, cloud: &PointCloud<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", cloud.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        if cloud.noise.is_some() {
            writeln!(w, "property uchar noise")?;
        }
        writeln!(w, "end_header")?;
        for (i, p) in cloud.points.iter().enumerate() {
            write!(w, "{} {} {}", p.x.as_f64(), p.y.as_f64(), p.z.as_f64())?;
            if cloud.noise.is_some() {
                write!(w, " {}", u8::from(cloud.is_noise(i)))?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        let mesh = QuadMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.1),
                Vec3::new(0.0, 1.0, 1.0 / 3.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        write_obj(&p, &mesh).unwrap();
        let back: QuadMesh<f64> = read_obj(&p).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn obj_rejects_triangles() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let err = read_obj::<f64>(&p).unwrap_err().to_string();
        assert!(err.contains("only quads"), "{err}");
        assert!(err.contains(":4:"), "{err}");
    }

    #[test]
    fn obj_accepts_slash_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.obj");
        std::fs::write(
            &p,
            "# c\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n",
        )
        .unwrap();
        let m = read_obj::<f32>(&p).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2, 3]]);
    }

    #[test]
    fn ply_round_trip_with_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ply");
        let cloud = PointCloud::with_noise(
            vec![Vec3::new(0.5, -1.25, 3.0), Vec3::new(0.1, 0.2, 0.3)],
            Some(vec![false, true]),
        )
        .unwrap();
        write_ply_cloud(&p, &cloud).unwrap();
        let back: PointCloud<f64> = read_ply_cloud(&p).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn ply_without_flags_and_extra_props() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nend_header\n9 1 2 3\n9 4 5 6\n",
        )
        .unwrap();
        let c: PointCloud<f64> = read_ply_cloud(&p).unwrap();
        assert_eq!(c.points[1], Vec3::new(4.0, 5.0, 6.0));
        assert!(c.noise.is_none());
    }

    #[test]
    fn ply_rejects_binary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.ply");
        std::fs::write(&p, "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n").unwrap();
        assert!(read_ply_cloud::<f64>(&p).is_err());
    }
}
