//! Line-oriented candidate files.
//!
//! ```text
//! # quadrecon candidates v1
//! # center r0 r1 r2 r3 quality
//! 0 0 1 12 11 1
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Quality is written
//! in shortest round-trip decimal form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::CandidateFace;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn write_candidates<T: Real>(path: impl AsRef<Path>, candidates: &[CandidateFace<T>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# quadrecon candidates v1")?;
        writeln!(w, "# center r0 r1 r2 r3 quality")?;
        for c in candidates {
            let r = c.ring;
            writeln!(w, "{} {} {} {} {} {}", c.center, r[0], r[1], r[2], r[3], c.quality.as_f64())?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

pub fn read_candidates<T: Real>(path: impl AsRef<Path>) -> Result<Vec<CandidateFace<T>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: msg.to_string(),
        };
        let tok: Vec<&str> = t.split_whitespace().collect();
        if tok.len() != 6 {
            return Err(bad("expected 6 fields: center r0 r1 r2 r3 quality"));
        }
        let mut ints = [0usize; 5];
        for (slot, s) in ints.iter_mut().zip(&tok[..5]) {
            *slot = s.parse().map_err(|_| bad("bad index"))?;
        }
        let quality: f64 = tok[5].parse().map_err(|_| bad("bad quality"))?;
        out.push(CandidateFace {
            center: ints[0],
            ring: [ints[1], ints[2], ints[3], ints[4]],
            quality: T::lit(quality),
        });
    }
    Ok(out)
}
