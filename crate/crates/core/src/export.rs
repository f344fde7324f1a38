//! Artifact writers. Every file carries the library version and the SHA-256
//! of the configuration that produced it.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::reconstruct::{stereographic, SurfaceMesh};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the canonical configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Where an artifact came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub command: String,
}

impl Provenance {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            version: VERSION.to_string(),
            config_hash: config_hash(config_text),
            command: command.to_string(),
        }
    }

    /// Header lines for comment-capable text formats.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("lawson-spectral {}", self.version),
            format!("command {}", self.command),
            format!("config_sha256 {}", self.config_hash),
        ]
    }
}

/// JSON document: provenance next to the payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub body: T,
}

pub fn write_json<W: Write, T: Serialize>(out: W, prov: &Provenance, body: &T) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &Envelope { provenance: prov.clone(), body })?;
    writeln!(out)?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Envelope<T>> {
    Ok(serde_json::from_reader(input)?)
}

/// ASCII OBJ of the stereographic projection; each vertex is preceded by a
/// comment with its point on `S^3`.
pub fn write_obj<W: Write>(out: W, mesh: &SurfaceMesh, prov: &Provenance) -> Result<()> {
    let mut out = out;
    for l in prov.lines() {
        writeln!(out, "# {l}")?;
    }
    writeln!(out, "# vertices: stereographic projection from (0, 0, 0, -1)")?;
    for v in &mesh.vertices {
        let p = stereographic(v);
        writeln!(out, "# s3 {:.17e} {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2], v[3])?;
        writeln!(out, "v {:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// Binary little-endian PLY with the four `S^3` coordinates per vertex.
pub fn write_ply<W: Write>(out: W, mesh: &SurfaceMesh, prov: &Provenance) -> Result<()> {
    let mut out = out;
    writeln!(out, "ply")?;
    writeln!(out, "format binary_little_endian 1.0")?;
    for l in prov.lines() {
        writeln!(out, "comment {l}")?;
    }
    writeln!(out, "element vertex {}", mesh.vertices.len())?;
    for p in ["x", "y", "z", "w"] {
        writeln!(out, "property float {p}")?;
    }
    writeln!(out, "element face {}", mesh.faces.len())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    writeln!(out, "end_header")?;
    for v in &mesh.vertices {
        for x in v {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
    }
    for f in &mesh.faces {
        out.write_all(&[3u8])?;
        for &i in f {
            let i = i32::try_from(i).map_err(|_| Error::Config("mesh too large for PLY".into()))?;
            out.write_all(&i.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Vertices, faces and comments of a PLY written by [`write_ply`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlyContents {
    pub comments: Vec<String>,
    pub vertices: Vec<[f32; 4]>,
    pub faces: Vec<[i32; 3]>,
}

/// Reader for the subset of PLY emitted by [`write_ply`].
pub fn read_ply<R: BufRead>(input: R) -> Result<PlyContents> {
    let mut input = input;
    let bad = |m: &str| Error::Config(format!("malformed PLY: {m}"));
    let mut comments = Vec::new();
    let (mut nv, mut nf) = (None, None);
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(bad("missing end_header"));
        }
        let line = line.trim_end();
        if line == "end_header" {
            break;
        }
        if let Some(c) = line.strip_prefix("comment ") {
            comments.push(c.to_string());
        } else if let Some(n) = line.strip_prefix("element vertex ") {
            nv = Some(n.parse::<usize>().map_err(|_| bad("vertex count"))?);
        } else if let Some(n) = line.strip_prefix("element face ") {
            nf = Some(n.parse::<usize>().map_err(|_| bad("face count"))?);
        } else if line.starts_with("format") && line != "format binary_little_endian 1.0" {
            return Err(bad("unsupported format"));
        }
    }
    let (nv, nf) = (nv.ok_or_else(|| bad("no vertices"))?, nf.ok_or_else(|| bad("no faces"))?);
    let mut buf4 = [0u8; 4];
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut v = [0f32; 4];
        for x in &mut v {
            input.read_exact(&mut buf4)?;
            *x = f32::from_le_bytes(buf4);
        }
        vertices.push(v);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let mut n = [0u8; 1];
        input.read_exact(&mut n)?;
        if n[0] != 3 {
            return Err(bad("non-triangular face"));
        }
        let mut f = [0i32; 3];
        for i in &mut f {
            input.read_exact(&mut buf4)?;
            *i = i32::from_le_bytes(buf4);
        }
        faces.push(f);
    }
    Ok(PlyContents { comments, vertices, faces })
}
