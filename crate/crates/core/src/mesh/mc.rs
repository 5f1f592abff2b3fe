//! Marching cubes over a [`TsdfVolume`].

use std::collections::HashMap;

use crate::mesh::tables::TRIANGLE_TABLE;
use crate::mesh::trimesh::{add, dot, normalize, scale, sub, TriangleMesh, P3};
use crate::mesh::tsdf::TsdfVolume;

/// Cube corner offsets in the standard numbering.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs of the twelve cube edges.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Edge parameters this close to an end snap onto the sample.
const SNAP: f64 = 1e-9;

fn gradient(vol: &TsdfVolume, i: usize, j: usize, k: usize) -> P3 {
    let at = |i: usize, j: usize, k: usize| vol.sdf[vol.index(i, j, k)];
    let d = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
    let [nx, ny, nz] = vol.dims;
    let axis = |c: usize, n: usize| -> (usize, usize, f64) {
        let lo = c.saturating_sub(1);
        let hi = (c + 1).min(n - 1);
        (lo, hi, (hi - lo) as f64)
    };
    let (x0, x1, sx) = axis(i, nx);
    let (y0, y1, sy) = axis(j, ny);
    let (z0, z1, sz) = axis(k, nz);
    [
        d(at(x0, j, k), at(x1, j, k), sx),
        d(at(i, y0, k), at(i, y1, k), sy),
        d(at(i, j, z0), at(i, j, z1), sz),
    ]
}

/// Extracts the zero level set. Cubes touching an unobserved sample (zero
/// weight) are skipped. Faces are wound so their normals point toward
/// positive distance; vertex normals follow the distance gradient.
pub fn marching_cubes(vol: &TsdfVolume) -> TriangleMesh {
    let [nx, ny, nz] = vol.dims;
    let mut vertices: Vec<P3> = Vec::new();
    let mut normals: Vec<P3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut idx = [0usize; 8];
                let mut val = [0f64; 8];
                let mut observed = true;
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    idx[c] = vol.index(i + off[0], j + off[1], k + off[2]);
                    observed &= vol.weight[idx[c]] > 0.0;
                    val[c] = vol.sdf[idx[c]];
                    if val[c] < 0.0 {
                        case |= 1 << c;
                    }
                }
                if !observed || case == 0 || case == 255 {
                    continue;
                }
                let row = &TRIANGLE_TABLE[case];
                let mut t = 0;
                while t + 2 < 16 && row[t] >= 0 {
                    let mut tri = [0u32; 3];
                    for (slot, &e) in row[t..t + 3].iter().enumerate() {
                        let [a, b] = EDGES[e as usize];
                        let (va, vb) = (val[a], val[b]);
                        let s = if va == vb { 0.5 } else { va / (va - vb) };
                        // Crossings on a sample weld to that sample so the
                        // surface stays closed.
                        let key = if s <= SNAP {
                            (idx[a], idx[a])
                        } else if s >= 1.0 - SNAP {
                            (idx[b], idx[b])
                        } else {
                            (idx[a].min(idx[b]), idx[a].max(idx[b]))
                        };
                        let s = if s <= SNAP { 0.0 } else if s >= 1.0 - SNAP { 1.0 } else { s };
                        let v = *edge_vertex.entry(key).or_insert_with(|| {
                            let pa = vol.position(i + CORNERS[a][0], j + CORNERS[a][1], k + CORNERS[a][2]);
                            let pb = vol.position(i + CORNERS[b][0], j + CORNERS[b][1], k + CORNERS[b][2]);
                            let ga = gradient(vol, i + CORNERS[a][0], j + CORNERS[a][1], k + CORNERS[a][2]);
                            let gb = gradient(vol, i + CORNERS[b][0], j + CORNERS[b][1], k + CORNERS[b][2]);
                            vertices.push(add(pa, scale(sub(pb, pa), s)));
                            normals.push(normalize(add(scale(ga, 1.0 - s), scale(gb, s))));
                            (vertices.len() - 1) as u32
                        });
                        tri[slot] = v;
                    }
                    faces.push(tri);
                    t += 3;
                }
            }
        }
    }

    // Orient every face along the distance gradient.
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|v| vertices[v as usize]);
        let n = crate::mesh::trimesh::cross(sub(b, a), sub(c, a));
        let g = add(add(normals[f[0] as usize], normals[f[1] as usize]), normals[f[2] as usize]);
        if dot(n, g) < 0.0 {
            f.swap(1, 2);
        }
    }

    let mesh = TriangleMesh {
        vertices,
        faces,
        normals,
    };
    let cleaned = mesh.remove_degenerate(0.0);
    if cleaned.is_empty() {
        log::warn!("marching cubes found no zero crossing");
    }
    cleaned
}
