//! Indexed triangle meshes with OBJ and binary I/O.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type P3 = [f64; 3];

const BINARY_MAGIC: &[u8; 8] = b"SNMESH01";

#[inline]
pub fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: P3, b: P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: P3, s: f64) -> P3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn normalize(a: P3) -> P3 {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        [0.0; 3]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<P3>,
    pub faces: Vec<[u32; 3]>,
    /// Per-vertex unit normals; empty or the same length as `vertices`.
    pub normals: Vec<P3>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<P3>, faces: Vec<[u32; 3]>) -> Self {
        let mut m = Self {
            vertices,
            faces,
            normals: Vec::new(),
        };
        m.recompute_normals();
        m
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if let Some(f) = self.faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::Format(format!("face {f:?} indexes past {n} vertices")));
        }
        if !self.normals.is_empty() && self.normals.len() != self.vertices.len() {
            return Err(Error::Format("normal count differs from vertex count".into()));
        }
        Ok(())
    }

    pub fn triangle(&self, f: usize) -> [P3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalized normal `(b − a) × (c − a)`; twice the area in length.
    pub fn face_cross(&self, f: usize) -> P3 {
        let [a, b, c] = self.triangle(f);
        cross(sub(b, a), sub(c, a))
    }

    pub fn face_normal(&self, f: usize) -> P3 {
        normalize(self.face_cross(f))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * norm(self.face_cross(f))
    }

    pub fn face_centroid(&self, f: usize) -> P3 {
        let [a, b, c] = self.triangle(f);
        scale(add(add(a, b), c), 1.0 / 3.0)
    }

    /// Area-weighted vertex normals from the faces.
    pub fn recompute_normals(&mut self) {
        let mut acc = vec![[0.0; 3]; self.vertices.len()];
        for f in 0..self.faces.len() {
            let n = self.face_cross(f);
            for &i in &self.faces[f] {
                acc[i as usize] = add(acc[i as usize], n);
            }
        }
        self.normals = acc.into_iter().map(normalize).collect();
    }

    /// Keeps the faces with `keep[f]` and drops vertices no face uses.
    pub fn retain_faces(&self, keep: &[bool]) -> Self {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut out = Self::default();
        let has_normals = self.normals.len() == self.vertices.len();
        for (f, face) in self.faces.iter().enumerate() {
            if !keep[f] {
                continue;
            }
            let mut nf = [0u32; 3];
            for (k, &i) in face.iter().enumerate() {
                let i = i as usize;
                if remap[i] == u32::MAX {
                    remap[i] = out.vertices.len() as u32;
                    out.vertices.push(self.vertices[i]);
                    if has_normals {
                        out.normals.push(self.normals[i]);
                    }
                }
                nf[k] = remap[i];
            }
            out.faces.push(nf);
        }
        out
    }

    /// Removes faces with area below `min_area` or repeated indices.
    pub fn remove_degenerate(&self, min_area: f64) -> Self {
        let keep: Vec<bool> = (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.faces[f];
                a != b && b != c && a != c && self.face_area(f) > min_area
            })
            .collect();
        self.retain_faces(&keep)
    }

    /// Appends `other`, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        let both_normals = self.normals.len() == self.vertices.len() && other.normals.len() == other.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        if both_normals {
            self.normals.extend_from_slice(&other.normals);
        } else {
            self.normals.clear();
        }
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }

    /// Rotates about the z axis by `yaw` and then translates.
    pub fn transformed(&self, yaw: f64, translation: P3) -> Self {
        let (s, c) = yaw.sin_cos();
        let rot = |p: P3| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
        Self {
            vertices: self.vertices.iter().map(|&p| add(rot(p), translation)).collect(),
            faces: self.faces.clone(),
            normals: self.normals.iter().map(|&n| rot(n)).collect(),
        }
    }

    pub fn bounds(&self) -> Option<(P3, P3)> {
        let first = *self.vertices.first()?;
        let (mut lo, mut hi) = (first, first);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    /// `V − E + F` counting each undirected edge once.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let used: HashSet<u32> = self.faces.iter().flatten().copied().collect();
        used.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    /// Number of undirected edges not shared by exactly two faces.
    pub fn boundary_edge_count(&self) -> usize {
        let mut count = std::collections::HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        count.values().filter(|&&c| c != 2).count()
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} vertices, {} faces", self.vertices.len(), self.faces.len())?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        let has_normals = self.normals.len() == self.vertices.len() && !self.normals.is_empty();
        if has_normals {
            for n in &self.normals {
                writeln!(w, "vn {} {} {}", n[0], n[1], n[2])?;
            }
        }
        for f in &self.faces {
            let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
            if has_normals {
                writeln!(w, "f {a}//{a} {b}//{b} {c}//{c}")?;
            } else {
                writeln!(w, "f {a} {b} {c}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `v`, `vn` and `f` records; polygons are fan-triangulated and
    /// normals are recomputed when absent or not one per vertex.
    pub fn read_obj<R: Read>(r: R) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut faces = Vec::new();
        for (ln, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let mut it = line.split_whitespace();
            let bad = |what: &str| Error::Format(format!("OBJ line {}: bad {what}", ln + 1));
            match it.next() {
                Some("v") | Some("vn") => {
                    let is_v = line.trim_start().starts_with("v ");
                    let mut p = [0.0; 3];
                    for c in &mut p {
                        *c = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("vertex"))?;
                    }
                    if is_v {
                        vertices.push(p);
                    } else {
                        normals.push(p);
                    }
                }
                Some("f") => {
                    let idx: Vec<u32> = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| bad("face"))?;
                            let n = vertices.len() as i64;
                            let abs = if i < 0 { n + i } else { i - 1 };
                            if abs < 0 || abs >= n {
                                return Err(bad("face index"));
                            }
                            Ok(abs as u32)
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(bad("face arity"));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        let mut m = Self {
            vertices,
            faces,
            normals,
        };
        if m.normals.len() != m.vertices.len() {
            m.recompute_normals();
        }
        m.validate()?;
        Ok(m)
    }

    /// Compact little-endian sidecar: magic, vertex and face counts, `f32`
    /// positions, `f32` normals, `u32` indices.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_u32::<LittleEndian>(self.vertices.len() as u32)?;
        w.write_u32::<LittleEndian>(self.faces.len() as u32)?;
        let normals = if self.normals.len() == self.vertices.len() {
            self.normals.clone()
        } else {
            let mut m = self.clone();
            m.recompute_normals();
            m.normals
        };
        for v in self.vertices.iter().chain(&normals) {
            for &c in v {
                w.write_f32::<LittleEndian>(c as f32)?;
            }
        }
        for f in &self.faces {
            for &i in f {
                w.write_u32::<LittleEndian>(i)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a binary mesh file".into()));
        }
        let nv = r.read_u32::<LittleEndian>()? as usize;
        let nf = r.read_u32::<LittleEndian>()? as usize;
        let read_p3 = |r: &mut R| -> Result<P3> {
            Ok([
                r.read_f32::<LittleEndian>()? as f64,
                r.read_f32::<LittleEndian>()? as f64,
                r.read_f32::<LittleEndian>()? as f64,
            ])
        };
        let vertices = (0..nv).map(|_| read_p3(&mut r)).collect::<Result<Vec<_>>>()?;
        let normals = (0..nv).map(|_| read_p3(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            faces.push([
                r.read_u32::<LittleEndian>()?,
                r.read_u32::<LittleEndian>()?,
                r.read_u32::<LittleEndian>()?,
            ]);
        }
        let m = Self {
            vertices,
            faces,
            normals,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn save_obj(&self, path: &Path) -> Result<()> {
        self.write_obj(BufWriter::new(fs::File::create(path)?))
    }

    pub fn load_obj(path: &Path) -> Result<Self> {
        Self::read_obj(fs::File::open(path)?)
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(fs::File::create(path)?))
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(fs::File::open(path)?))
    }

    /// Loads the binary sidecar next to an OBJ when present, else the OBJ.
    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        if side.is_file() {
            Self::load_binary(&side)
        } else {
            Self::load_obj(path)
        }
    }

    /// Writes the OBJ and its binary sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.save_obj(path)?;
        self.save_binary(&sidecar_path(path))
    }
}

/// `mesh.obj` → `mesh.obj.bin`.
pub fn sidecar_path(obj: &Path) -> std::path::PathBuf {
    let mut s = obj.as_os_str().to_owned();
    s.push(".bin");
    s.into()
}

/// Axis-aligned box `[lo, hi]` as 12 outward-facing triangles.
pub fn box_mesh(lo: P3, hi: P3) -> TriangleMesh {
    let v = |i: usize| [if i & 1 == 0 { lo[0] } else { hi[0] }, if i & 2 == 0 { lo[1] } else { hi[1] }, if i & 4 == 0 { lo[2] } else { hi[2] }];
    let vertices = (0..8).map(v).collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_closed_and_outward() {
        let m = box_mesh([-1.0, -2.0, 0.0], [1.0, 2.0, 3.0]);
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.boundary_edge_count(), 0);
        let c = [0.0, 0.0, 1.5];
        for f in 0..m.faces.len() {
            assert!(dot(m.face_normal(f), sub(m.face_centroid(f), c)) > 0.0, "face {f} points inward");
        }
    }

    #[test]
    fn obj_and_binary_round_trip() {
        let m = box_mesh([0.0, 0.0, 0.0], [1.0, 0.5, 0.25]);
        let mut obj = Vec::new();
        m.write_obj(&mut obj).unwrap();
        let back = TriangleMesh::read_obj(&obj[..]).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertices, m.vertices);
        let mut bin = Vec::new();
        m.write_binary(&mut bin).unwrap();
        let back = TriangleMesh::read_binary(&bin[..]).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertices, m.vertices);
    }

    #[test]
    fn obj_quads_are_triangulated_and_bad_indices_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m = TriangleMesh::read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(TriangleMesh::read_obj("v 0 0 0\nf 1 2 3\n".as_bytes()).is_err());
    }

    #[test]
    fn retain_compacts_vertices() {
        let m = box_mesh([0.0; 3], [1.0; 3]);
        let mut keep = vec![false; 12];
        keep[0] = true;
        let r = m.retain_faces(&keep);
        assert_eq!(r.faces.len(), 1);
        assert_eq!(r.vertices.len(), 3);
        r.validate().unwrap();
    }
}
