//! Swept-disc collision queries against triangle soups, with a BVH and a
//! brute-force reference.

use splatnav_core::mesh::TriangleMesh;

use crate::polygon::{point_segment_distance, segment_segment_distance, P2};

pub type Triangle = [[f64; 3]; 3];

/// A disc of `radius` moving from `from` to `to` in the ground plane, with
/// the body occupying heights `[z_min, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweptDisc {
    pub from: P2,
    pub to: P2,
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl SweptDisc {
    pub fn stationary(at: P2, radius: f64, z_min: f64, z_max: f64) -> Self {
        Self {
            from: at,
            to: at,
            radius,
            z_min,
            z_max,
        }
    }

    fn aabb(&self) -> Aabb {
        let pad = self.radius + 1e-9;
        Aabb {
            lo: [
                self.from[0].min(self.to[0]) - pad,
                self.from[1].min(self.to[1]) - pad,
                self.z_min - 1e-9,
            ],
            hi: [
                self.from[0].max(self.to[0]) + pad,
                self.from[1].max(self.to[1]) + pad,
                self.z_max + 1e-9,
            ],
        }
    }
}

fn clip(poly: &[[f64; 3]], keep: impl Fn(&[f64; 3]) -> f64) -> Vec<[f64; 3]> {
    // Sutherland-Hodgman against the half-space keep(p) >= 0.
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (keep(&a), keep(&b));
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]);
        }
    }
    out
}

fn inside_convex(p: P2, poly: &[P2]) -> bool {
    let (mut pos, mut neg) = (false, false);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        pos |= c > 0.0;
        neg |= c < 0.0;
    }
    !(pos && neg)
}

/// Exact narrow-phase test: the triangle's part inside the height slab,
/// projected to the ground plane, comes within `radius` of the swept segment.
pub fn triangle_hits(tri: &Triangle, disc: &SweptDisc) -> bool {
    let poly = clip(tri, |p| p[2] - disc.z_min);
    let poly = clip(&poly, |p| disc.z_max - p[2]);
    if poly.is_empty() {
        return false;
    }
    let flat: Vec<P2> = poly.iter().map(|p| [p[0], p[1]]).collect();
    if flat.len() == 1 {
        return point_segment_distance(flat[0], disc.from, disc.to) <= disc.radius;
    }
    if flat.len() >= 3 && inside_convex(disc.from, &flat) {
        return true;
    }
    (0..flat.len()).any(|i| {
        let (a, b) = (flat[i], flat[(i + 1) % flat.len()]);
        segment_segment_distance(disc.from, disc.to, a, b) <= disc.radius
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn of(tri: &Triangle) -> Self {
        let mut b = Self::empty();
        for p in tri {
            b.grow(p);
        }
        b
    }

    fn grow(&mut self, p: &[f64; 3]) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn union(&self, o: &Self) -> Self {
        let mut b = *self;
        b.grow(&o.lo);
        b.grow(&o.hi);
        b
    }

    fn overlaps(&self, o: &Self) -> bool {
        (0..3).all(|k| self.lo[k] <= o.hi[k] && o.lo[k] <= self.hi[k])
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over a triangle soup, split at the centroid
/// median of the longest axis.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn new(triangles: Vec<Triangle>) -> Self {
        let mut bvh = Self {
            order: (0..triangles.len()).collect(),
            triangles,
            nodes: Vec::new(),
        };
        if !bvh.triangles.is_empty() {
            let boxes: Vec<Aabb> = bvh.triangles.iter().map(Aabb::of).collect();
            bvh.build(&boxes, 0, bvh.triangles.len());
        }
        bvh
    }

    pub fn from_meshes<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> Self {
        let mut tris = Vec::new();
        for m in meshes {
            tris.extend((0..m.faces.len()).map(|f| m.triangle(f)));
        }
        Self::new(tris)
    }

    fn build(&mut self, boxes: &[Aabb], start: usize, end: usize) -> usize {
        let bounds = self.order[start..end]
            .iter()
            .fold(Aabb::empty(), |acc, &i| acc.union(&boxes[i]));
        let slot = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return slot;
        }
        let centroid = |i: usize, k: usize| boxes[i].lo[k] + boxes[i].hi[k];
        let mut cb = Aabb::empty();
        for &i in &self.order[start..end] {
            cb.grow(&[centroid(i, 0), centroid(i, 1), centroid(i, 2)]);
        }
        let axis = (0..3)
            .max_by(|&a, &b| (cb.hi[a] - cb.lo[a]).total_cmp(&(cb.hi[b] - cb.lo[b])))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroid(a, axis).total_cmp(&centroid(b, axis)).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(boxes, start, mid);
        let right = self.build(boxes, mid, end);
        self.nodes[slot] = Node::Inner { bounds, left, right };
        slot
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    fn visit(&self, disc: &SweptDisc, mut f: impl FnMut(usize) -> bool) {
        if self.nodes.is_empty() {
            return;
        }
        let q = disc.aabb();
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds().overlaps(&q) {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        if triangle_hits(&self.triangles[t], disc) && !f(t) {
                            return;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }

    /// Indices of all contacted triangles, ascending.
    pub fn query(&self, disc: &SweptDisc) -> Vec<usize> {
        let mut hits = Vec::new();
        self.visit(disc, |t| {
            hits.push(t);
            true
        });
        hits.sort_unstable();
        hits
    }

    pub fn any_hit(&self, disc: &SweptDisc) -> bool {
        let mut hit = false;
        self.visit(disc, |_| {
            hit = true;
            false
        });
        hit
    }
}

/// Reference: every triangle tested.
pub fn brute_force_query(triangles: &[Triangle], disc: &SweptDisc) -> Vec<usize> {
    (0..triangles.len()).filter(|&t| triangle_hits(&triangles[t], disc)).collect()
}

/// A swept disc against a stationary disc.
pub fn disc_contact(disc: &SweptDisc, center: P2, radius: f64) -> bool {
    point_segment_distance(center, disc.from, disc.to) <= disc.radius + radius
}
