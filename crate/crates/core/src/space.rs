//! Discrete measure spaces.
//!
//! A measure space here is a finite point set `{s_1, ..., s_n}` together with
//! a non-negative weight `μ(s_i)` per point. Three constructions cover the
//! use cases in this crate:
//!
//! * **Lattice** — a `w × h` pixel grid with unit weights, points ordered
//!   row-major (the point at row `i`, column `j` has index `i·w + j`);
//! * **Triangle mesh** — one point per face, weighted by the face area;
//! * **Generic** — an arbitrary weight vector.
//!
//! Weights must be finite and non-negative, and at least one weight must be
//! positive. Zero-weight points are legal; they carry no measure and are
//! skipped by `max`-type (`p = ∞`) reductions.

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use std::collections::HashMap;
use std::sync::Arc;

/// Maximum icosphere subdivision level (cost grows as 4^level).
pub const MAX_ICOSPHERE_LEVEL: u32 = 7;

/// What the points of a [`MeasureSpace`] are.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    /// `width × height` pixel lattice, row-major point order, unit weights.
    Lattice { width: usize, height: usize },
    /// One point per triangle face; weight = face area.
    TriMesh(Arc<TriMesh>),
    /// Arbitrary weighted point set.
    Generic,
}

/// A finite point set with a non-negative measure per point.
#[derive(Debug, Clone)]
pub struct MeasureSpace {
    kind: SpaceKind,
    weights: Vec<f64>,
    total: f64,
}

impl MeasureSpace {
    /// Uniform unit-weight `width × height` lattice.
    pub fn lattice(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidSpace(format!(
                "lattice dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        Ok(MeasureSpace {
            kind: SpaceKind::Lattice { width, height },
            weights: vec![1.0; n],
            total: n as f64,
        })
    }

    /// Measure space over the faces of a triangle mesh, weights = face areas.
    ///
    /// Degenerate faces (zero area) are rejected: every face must contribute
    /// positive measure.
    pub fn mesh(mesh: TriMesh) -> Result<Self> {
        let areas = mesh.face_areas();
        for (f, &a) in areas.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidSpace(format!(
                    "face {f} has non-positive area {a}"
                )));
            }
        }
        let total = pairwise_sum(areas.iter().copied());
        Ok(MeasureSpace {
            kind: SpaceKind::TriMesh(Arc::new(mesh)),
            weights: areas,
            total,
        })
    }

    /// Generic weighted point set.
    pub fn generic(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpace("empty weight vector".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "weight {i} is {w}; weights must be finite and >= 0"
                )));
            }
        }
        let total = pairwise_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidSpace(
                "total measure must be positive (all weights are zero)".into(),
            ));
        }
        Ok(MeasureSpace {
            kind: SpaceKind::Generic,
            weights,
            total,
        })
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Weight (measure) of point `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total measure `Σ_i μ(s_i)`; always positive.
    pub fn total_measure(&self) -> f64 {
        self.total
    }

    /// Lattice dimensions `(width, height)` if this is a lattice space.
    pub fn lattice_dims(&self) -> Option<(usize, usize)> {
        match self.kind {
            SpaceKind::Lattice { width, height } => Some((width, height)),
            _ => None,
        }
    }

    /// The underlying mesh if this is a mesh space.
    pub fn tri_mesh(&self) -> Option<&Arc<TriMesh>> {
        match &self.kind {
            SpaceKind::TriMesh(m) => Some(m),
            _ => None,
        }
    }

    /// Structural equality; used as the fallback when two fields do not share
    /// the same `Arc` (e.g. each was loaded from disk separately).
    pub fn same_space(&self, other: &Self) -> bool {
        self.weights == other.weights
            && match (&self.kind, &other.kind) {
                (
                    SpaceKind::Lattice { width: w1, height: h1 },
                    SpaceKind::Lattice { width: w2, height: h2 },
                ) => w1 == w2 && h1 == h2,
                (SpaceKind::TriMesh(a), SpaceKind::TriMesh(b)) => {
                    Arc::ptr_eq(a, b) || a == b
                }
                (SpaceKind::Generic, SpaceKind::Generic) => true,
                _ => false,
            }
    }
}

impl PartialEq for MeasureSpace {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other)
    }
}

/// Indexed triangle mesh embedded in R³.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Build a mesh, validating that all face indices are in range.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if nv < 3 || faces.is_empty() {
            return Err(Error::InvalidSpace(format!(
                "mesh needs >= 3 vertices and >= 1 face, got {nv} vertices, {} faces",
                faces.len()
            )));
        }
        for (v, p) in vertices.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "vertex {v} has non-finite coordinates"
                )));
            }
        }
        for (f, idx) in faces.iter().enumerate() {
            for &i in idx {
                if i >= nv {
                    return Err(Error::InvalidSpace(format!(
                        "face {f} references vertex {i}, but mesh has {nv} vertices"
                    )));
                }
            }
            if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                return Err(Error::InvalidSpace(format!(
                    "face {f} repeats a vertex: {idx:?}"
                )));
            }
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex(&self, i: usize) -> [f64; 3] {
        self.vertices[i]
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    /// Area of face `f` (half the cross-product magnitude).
    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let u = sub(pb, pa);
        let v = sub(pc, pa);
        0.5 * norm(cross(u, v))
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    /// Centroid of face `f`.
    pub fn face_centroid(&self, f: usize) -> [f64; 3] {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
            (pa[2] + pb[2] + pc[2]) / 3.0,
        ]
    }

    /// Shortest edge in the mesh; the element size used for explicit
    /// diffusion stability bounds.
    pub fn min_edge_length(&self) -> f64 {
        let mut min = f64::INFINITY;
        for &[a, b, c] in &self.faces {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                let e = norm(sub(self.vertices[j], self.vertices[i]));
                if e < min {
                    min = e;
                }
            }
        }
        min
    }

    /// Check that every undirected edge is shared by exactly two faces
    /// (closed 2-manifold without boundary).
    pub fn is_closed_manifold(&self) -> bool {
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for &[a, b, c] in &self.faces {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                let key = (i.min(j), i.max(j));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts.values().all(|&c| c == 2)
    }
}

/// Geodesic sphere: subdivided icosahedron projected onto the sphere of the
/// given radius. `level` quarters are applied `level` times, so the result has
/// `20·4^level` faces and `10·4^level + 2` vertices. Faces wind
/// counter-clockwise seen from outside.
pub fn icosphere(radius: f64, level: u32) -> Result<TriMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidSpace(format!(
            "icosphere radius must be positive and finite, got {radius}"
        )));
    }
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::InvalidSpace(format!(
            "icosphere level {level} exceeds maximum {MAX_ICOSPHERE_LEVEL}"
        )));
    }

    // Icosahedron with vertices on the unit sphere.
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let s = 1.0 / (1.0 + phi * phi).sqrt();
    let (a, b) = (s, phi * s);
    let mut vertices: Vec<[f64; 3]> = vec![
        [-a, b, 0.0],
        [a, b, 0.0],
        [-a, -b, 0.0],
        [a, -b, 0.0],
        [0.0, -a, b],
        [0.0, a, b],
        [0.0, -a, -b],
        [0.0, a, -b],
        [b, 0.0, -a],
        [b, 0.0, a],
        [-b, 0.0, -a],
        [-b, 0.0, a],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[i0, i1, i2] in &faces {
            let m01 = edge_midpoint(&mut vertices, &mut midpoint, i0, i1);
            let m12 = edge_midpoint(&mut vertices, &mut midpoint, i1, i2);
            let m02 = edge_midpoint(&mut vertices, &mut midpoint, i0, i2);
            next.push([i0, m01, m02]);
            next.push([i1, m12, m01]);
            next.push([i2, m02, m12]);
            next.push([m01, m12, m02]);
        }
        faces = next;
    }

    for v in &mut vertices {
        *v = scale(normalize(*v), radius);
    }
    TriMesh::new(vertices, faces)
}

fn edge_midpoint(
    vertices: &mut Vec<[f64; 3]>,
    cache: &mut HashMap<(usize, usize), usize>,
    i: usize,
    j: usize,
) -> usize {
    let key = (i.min(j), i.max(j));
    if let Some(&m) = cache.get(&key) {
        return m;
    }
    let (p, q) = (vertices[i], vertices[j]);
    let mid = normalize([
        0.5 * (p[0] + q[0]),
        0.5 * (p[1] + q[1]),
        0.5 * (p[2] + q[2]),
    ]);
    vertices.push(mid);
    let idx = vertices.len() - 1;
    cache.insert(key, idx);
    idx
}

// Small 3-vector helpers shared with the mesh-based solvers.

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / norm(a))
}
