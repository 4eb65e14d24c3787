use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::curve::ArcLengthTable;
use super::domain::DomainSpec;
use super::{add, cross, dot, norm, outward_from_tangent, scale, sub, GeometryError, Point};

/// A boundary facet: a chord in 2D, an end point in 1D (both nodes equal).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub normal: Point,
    pub measure: f64,
}

/// Graded refinement towards the boundary.
///
/// The first layer has thickness `normal`; layer thicknesses grow by `growth`
/// until they reach the bulk size. Boundary vertices are `tangential` apart and
/// the tangential spacing relaxes with depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayer {
    pub normal: f64,
    pub tangential: f64,
    pub growth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSizing {
    pub h: f64,
    pub layer: Option<BoundaryLayer>,
}

impl MeshSizing {
    pub fn uniform(h: f64) -> Self {
        Self { h, layer: None }
    }

    /// Sizing that resolves a boundary layer of width `1 / beta` so that
    /// `beta * h_normal <= target` and `sqrt(beta) * h_tangential <= target`.
    pub fn for_layer(h: f64, beta: f64, target: f64) -> Self {
        let normal = (0.9 * target / beta).min(h);
        let tangential = (0.9 * target / beta.sqrt()).min(h);
        if normal >= h && tangential >= h {
            return Self::uniform(h);
        }
        Self { h, layer: Some(BoundaryLayer { normal, tangential, growth: 1.2 }) }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(GeometryError::InvalidMesh(format!("mesh size must be positive, got {}", self.h)));
        }
        if let Some(l) = self.layer {
            if !(l.normal > 0.0 && l.tangential > 0.0 && l.growth >= 1.0) {
                return Err(GeometryError::InvalidMesh(format!("invalid boundary layer {l:?}")));
            }
        }
        Ok(())
    }

    fn tangential_at(&self, depth: f64) -> f64 {
        match self.layer {
            Some(l) => self.h.min(l.tangential + 0.5 * depth),
            None => self.h,
        }
    }

    fn step(&self, layer_index: usize) -> f64 {
        match self.layer {
            Some(l) => self.h.min(l.normal * l.growth.powi(layer_index as i32)),
            None => self.h,
        }
    }
}

/// Resolution of the mesh at the boundary: the largest height of a cell
/// adjacent to a boundary facet, and the largest facet length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResolution {
    pub normal: f64,
    pub tangential: f64,
}

impl BoundaryResolution {
    /// Layer-resolution metric `max(beta * h_n, sqrt(beta) * h_t)`.
    pub fn layer_metric(&self, beta: f64) -> f64 {
        (beta * self.normal).max(beta.sqrt() * self.tangential)
    }
}

/// Simplicial P1 mesh in 1D (segments) or 2D (triangles).
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    simplices: Vec<usize>,
    facets: Vec<BoundaryFacet>,
    cell_measures: Vec<f64>,
    basis_gradients: Vec<[Point; 3]>,
    h: f64,
}

impl Mesh {
    /// Assemble a mesh from raw parts and check its invariants.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<Point>,
        simplices: Vec<usize>,
        facets: Vec<BoundaryFacet>,
    ) -> Result<Self, GeometryError> {
        if dim != 1 && dim != 2 {
            return Err(GeometryError::InvalidMesh(format!("dimension must be 1 or 2, got {dim}")));
        }
        let stride = dim + 1;
        if simplices.len() % stride != 0 {
            return Err(GeometryError::InvalidMesh("cell index list length is not a multiple of dim + 1".into()));
        }
        if let Some(&i) = simplices.iter().find(|&&i| i >= vertices.len()) {
            return Err(GeometryError::InvalidMesh(format!("cell references missing vertex {i}")));
        }
        let mut cell_measures = Vec::with_capacity(simplices.len() / stride);
        let mut basis_gradients = Vec::with_capacity(simplices.len() / stride);
        let mut h = 0.0_f64;
        for cell in simplices.chunks_exact(stride) {
            if dim == 1 {
                let l = vertices[cell[1]][0] - vertices[cell[0]][0];
                cell_measures.push(l.abs());
                basis_gradients.push([[-1.0 / l, 0.0], [1.0 / l, 0.0], [0.0, 0.0]]);
                h = h.max(l.abs());
            } else {
                let [a, b, c] = [vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]];
                let area2 = cross(sub(b, a), sub(c, a));
                cell_measures.push(0.5 * area2);
                let perp = |v: Point| [-v[1] / area2, v[0] / area2];
                basis_gradients.push([perp(sub(c, b)), perp(sub(a, c)), perp(sub(b, a))]);
                h = h.max(norm(sub(b, a))).max(norm(sub(c, b))).max(norm(sub(a, c)));
            }
        }
        let mesh = Mesh { dim, vertices, simplices, facets, cell_measures, basis_gradients, h };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_measures.len()
    }

    /// Vertex indices of cell `k` (2 in 1D, 3 in 2D, counterclockwise).
    #[inline]
    pub fn cell(&self, k: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.simplices[s * k..s * (k + 1)]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.simplices.chunks_exact(self.dim + 1)
    }

    #[inline]
    pub fn cell_measure(&self, k: usize) -> f64 {
        self.cell_measures[k]
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    /// Gradients of the local P1 basis functions on cell `k`.
    #[inline]
    pub fn basis_gradients(&self, k: usize) -> &[Point] {
        &self.basis_gradients[k][..self.dim + 1]
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    /// Largest edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn measure(&self) -> f64 {
        self.cell_measures.iter().sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.facets.iter().map(|f| f.measure).sum()
    }

    pub fn facet_midpoint(&self, f: &BoundaryFacet) -> Point {
        scale(add(self.vertices[f.nodes[0]], self.vertices[f.nodes[1]]), 0.5)
    }

    /// Sorted, deduplicated list of vertices on the boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.facets.iter().flat_map(|f| f.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distance from every vertex to the boundary facets, propagated from the
    /// boundary along mesh edges together with the nearest facet.
    pub fn boundary_distance(&self) -> Vec<f64> {
        let n = self.vertices.len();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for cell in self.cells() {
            for (a, &i) in cell.iter().enumerate() {
                for &j in &cell[a + 1..] {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        let to_facet = |x: Point, f: usize| {
            let [i, j] = self.facets[f].nodes;
            let (a, b) = (self.vertices[i], self.vertices[j]);
            let ab = sub(b, a);
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 { (dot(sub(x, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            norm(sub(x, add(a, scale(ab, t))))
        };
        let mut dist = vec![f64::INFINITY; n];
        let mut nearest = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for (k, f) in self.facets.iter().enumerate() {
            for i in f.nodes {
                if nearest[i] == usize::MAX {
                    dist[i] = 0.0;
                    nearest[i] = k;
                    heap.push(Reverse((Distance(0.0), i)));
                }
            }
        }
        while let Some(Reverse((Distance(d), i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &j in &adjacency[i] {
                let nd = to_facet(self.vertices[j], nearest[i]);
                if nd < dist[j] {
                    dist[j] = nd;
                    nearest[j] = nearest[i];
                    heap.push(Reverse((Distance(nd), j)));
                }
            }
        }
        dist
    }

    pub fn boundary_resolution(&self) -> BoundaryResolution {
        if self.dim == 1 {
            let mut normal = 0.0_f64;
            for (k, cell) in self.cells().enumerate() {
                if self.facets.iter().any(|f| cell.contains(&f.nodes[0])) {
                    normal = normal.max(self.cell_measures[k]);
                }
            }
            return BoundaryResolution { normal, tangential: 0.0 };
        }
        let owners = self.edge_owners();
        let mut normal = 0.0_f64;
        let mut tangential = 0.0_f64;
        for f in &self.facets {
            tangential = tangential.max(f.measure);
            if let Some(ks) = owners.get(&edge_key(f.nodes[0], f.nodes[1])) {
                for &k in ks {
                    normal = normal.max(2.0 * self.cell_measures[k] / f.measure);
                }
            }
        }
        BoundaryResolution { normal, tangential }
    }

    fn edge_owners(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut owners: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, c) in self.cells().enumerate() {
            for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
                owners.entry(edge_key(a, b)).or_default().push(k);
            }
        }
        owners
    }

    /// Check the structural invariants: positive cells, unit normals, closed
    /// boundary loop made of exactly the edges with one incident cell.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if let Some((k, m)) = self.cell_measures.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
            return Err(GeometryError::InvalidMesh(format!("cell {k} has non-positive measure {m}")));
        }
        for (i, f) in self.facets.iter().enumerate() {
            if f.nodes.iter().any(|&v| v >= self.vertices.len()) {
                return Err(GeometryError::InvalidMesh(format!("facet {i} references a missing vertex")));
            }
            if (norm(f.normal) - 1.0).abs() > 1e-12 {
                return Err(GeometryError::InvalidMesh(format!("facet {i} normal is not a unit vector")));
            }
            if !(f.measure > 0.0) {
                return Err(GeometryError::InvalidMesh(format!("facet {i} has non-positive measure")));
            }
        }
        if self.dim == 1 {
            if self.facets.len() != 2 {
                return Err(GeometryError::InvalidMesh("a 1D mesh needs exactly two end-point facets".into()));
            }
            return Ok(());
        }
        let mut incidence: HashMap<usize, usize> = HashMap::new();
        for f in &self.facets {
            if f.nodes[0] == f.nodes[1] {
                return Err(GeometryError::InvalidMesh("degenerate boundary facet".into()));
            }
            for v in f.nodes {
                *incidence.entry(v).or_default() += 1;
            }
        }
        if let Some((v, n)) = incidence.iter().find(|(_, n)| **n != 2) {
            return Err(GeometryError::InvalidMesh(format!("boundary vertex {v} has {n} incident facets instead of 2")));
        }
        let owners = self.edge_owners();
        let open: usize = owners.values().filter(|ks| ks.len() == 1).count();
        if open != self.facets.len() {
            return Err(GeometryError::InvalidMesh(format!(
                "{open} edges have a single incident cell but {} boundary facets were given",
                self.facets.len()
            )));
        }
        for f in &self.facets {
            match owners.get(&edge_key(f.nodes[0], f.nodes[1])).map(Vec::len) {
                Some(1) => {}
                _ => return Err(GeometryError::InvalidMesh("a boundary facet is not a boundary edge".into())),
            }
        }
        if owners.values().any(|ks| ks.len() > 2) {
            return Err(GeometryError::InvalidMesh("an edge is shared by more than two cells".into()));
        }
        Ok(())
    }

    /// Split every cell into `2^dim` children through edge midpoints. Boundary
    /// midpoints stay on the chords, so the P1 space of the result contains
    /// the one of `self`.
    pub fn refine(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *midpoint.entry(edge_key(a, b)).or_insert_with(|| {
                vertices.push(scale(add(vertices[a], vertices[b]), 0.5));
                vertices.len() - 1
            })
        };
        let mut simplices = Vec::with_capacity(self.simplices.len() * (1 << self.dim));
        for c in self.cells() {
            if self.dim == 1 {
                let m = mid(c[0], c[1], &mut vertices);
                simplices.extend_from_slice(&[c[0], m, m, c[1]]);
            } else {
                let (a, b, cc) = (c[0], c[1], c[2]);
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, cc, &mut vertices);
                let ca = mid(cc, a, &mut vertices);
                simplices.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, cc, ab, bc, ca]);
            }
        }
        let facets = if self.dim == 1 {
            self.facets.clone()
        } else {
            let mut out = Vec::with_capacity(2 * self.facets.len());
            for f in &self.facets {
                let m = midpoint[&edge_key(f.nodes[0], f.nodes[1])];
                let half = 0.5 * f.measure;
                out.push(BoundaryFacet { nodes: [f.nodes[0], m], normal: f.normal, measure: half });
                out.push(BoundaryFacet { nodes: [m, f.nodes[1]], normal: f.normal, measure: half });
            }
            out
        };
        Mesh::from_parts(self.dim, vertices, simplices, facets).expect("refinement preserves validity")
    }

}

#[derive(Clone, Copy, PartialEq)]
struct Distance(f64);

impl Eq for Distance {}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Mesh a domain with uniform target size `h`.
pub fn build_mesh(spec: &DomainSpec, h: f64) -> Result<Mesh, GeometryError> {
    build_mesh_with(spec, &MeshSizing::uniform(h))
}

pub fn build_mesh_with(spec: &DomainSpec, sizing: &MeshSizing) -> Result<Mesh, GeometryError> {
    spec.validate()?;
    sizing.validate()?;
    match spec {
        DomainSpec::Interval { center, half_length } => {
            let xs = graded_coordinates(2.0 * half_length, sizing);
            let vertices: Vec<Point> = xs.iter().map(|x| [center - half_length + x, 0.0]).collect();
            let n = vertices.len();
            let simplices = (0..n - 1).flat_map(|i| [i, i + 1]).collect();
            let facets = vec![
                BoundaryFacet { nodes: [0, 0], normal: [-1.0, 0.0], measure: 1.0 },
                BoundaryFacet { nodes: [n - 1, n - 1], normal: [1.0, 0.0], measure: 1.0 },
            ];
            Mesh::from_parts(1, vertices, simplices, facets)
        }
        DomainSpec::Square { center, side } => square_mesh(*center, *side, sizing),
        _ => ring_mesh(spec, sizing),
    }
}

/// Nodes on `[0, length]`, graded symmetrically towards both ends.
fn graded_coordinates(length: f64, sizing: &MeshSizing) -> Vec<f64> {
    let half = 0.5 * length;
    let mut left = vec![0.0];
    let mut d = 0.0;
    let mut j = 0;
    loop {
        let step = sizing.step(j);
        if d + step >= half - 0.25 * step {
            break;
        }
        d += step;
        left.push(d);
        j += 1;
    }
    let gap = length - 2.0 * d;
    let step = sizing.step(j).min(sizing.h);
    let pieces = ((gap / step) - 1e-9).ceil().max(1.0) as usize;
    let mut xs = left.clone();
    for k in 1..pieces {
        xs.push(d + gap * k as f64 / pieces as f64);
    }
    xs.extend(left.iter().rev().map(|x| length - x));
    xs
}

fn square_mesh(center: Point, side: f64, sizing: &MeshSizing) -> Result<Mesh, GeometryError> {
    // Every grid line is tangential to two of the sides.
    let sizing = match sizing.layer {
        Some(l) => MeshSizing { h: sizing.h.min(l.tangential), layer: sizing.layer },
        None => *sizing,
    };
    let t = graded_coordinates(side, &sizing);
    let n = t.len();
    let o = [center[0] - 0.5 * side, center[1] - 0.5 * side];
    let mut vertices = Vec::with_capacity(n * n);
    for y in &t {
        for x in &t {
            vertices.push([o[0] + x, o[1] + y]);
        }
    }
    let id = |i: usize, j: usize| j * n + i;
    let mut simplices = Vec::with_capacity(6 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            simplices.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }
    let mut loop_nodes = Vec::with_capacity(4 * (n - 1));
    loop_nodes.extend((0..n - 1).map(|i| id(i, 0)));
    loop_nodes.extend((0..n - 1).map(|j| id(n - 1, j)));
    loop_nodes.extend((1..n).rev().map(|i| id(i, n - 1)));
    loop_nodes.extend((1..n).rev().map(|j| id(0, j)));
    let facets = chord_facets(&vertices, &loop_nodes);
    Mesh::from_parts(2, vertices, simplices, facets)
}

/// Facets along a closed counterclockwise vertex loop.
fn chord_facets(vertices: &[Point], loop_nodes: &[usize]) -> Vec<BoundaryFacet> {
    let m = loop_nodes.len();
    (0..m)
        .map(|k| {
            let (a, b) = (loop_nodes[k], loop_nodes[(k + 1) % m]);
            let d = sub(vertices[b], vertices[a]);
            BoundaryFacet { nodes: [a, b], normal: outward_from_tangent(d), measure: norm(d) }
        })
        .collect()
}

/// Mesh of a star-shaped planar domain made of homothetic rings
/// `c + s (gamma(t) - c)` stitched together, with a fan around the center.
fn ring_mesh(spec: &DomainSpec, sizing: &MeshSizing) -> Result<Mesh, GeometryError> {
    let curve = spec.boundary_curve().expect("planar domain");
    let table = ArcLengthTable::new(&curve, 8192);
    let perimeter = table.total();
    let c = spec.star_center();
    let h_t0 = sizing.tangential_at(0.0);
    let n0 = ((perimeter / h_t0) - 1e-9).ceil() as usize;
    if n0 < 8 {
        return Err(GeometryError::TooCoarse { facets: n0, required: 8 });
    }
    let ring_points = |n: usize| -> Vec<Point> { (0..n).map(|k| curve.point(table.param_at(k as f64 / n as f64))).collect() };
    let boundary = ring_points(n0);
    let rho = boundary.iter().map(|x| norm(sub(*x, c))).sum::<f64>() / n0 as f64;

    let mut vertices: Vec<Point> = boundary.clone();
    let mut rings: Vec<(usize, usize)> = vec![(0, n0)];
    let mut depth = 0.0;
    let mut j = 0;
    loop {
        let step = sizing.step(j);
        let next = depth + step;
        if rho - next < 0.5 * step {
            break;
        }
        depth = next;
        j += 1;
        let s = 1.0 - depth / rho;
        let n = (((s * perimeter) / sizing.tangential_at(depth)).ceil() as usize).max(6);
        let start = vertices.len();
        for k in 0..n {
            let g = curve.point(table.param_at(k as f64 / n as f64));
            vertices.push(add(c, scale(sub(g, c), s)));
        }
        rings.push((start, n));
    }
    let mut simplices = Vec::new();
    for w in rings.windows(2) {
        stitch(&vertices, w[0], w[1], &mut simplices)?;
    }
    let center = vertices.len();
    vertices.push(c);
    let (start, n) = *rings.last().unwrap();
    for k in 0..n {
        push_ccw(&vertices, [center, start + k, start + (k + 1) % n], &mut simplices)?;
    }
    let loop_nodes: Vec<usize> = (0..n0).collect();
    let facets = chord_facets(&vertices, &loop_nodes);
    Mesh::from_parts(2, vertices, simplices, facets)
}

/// Triangulate the band between an outer and an inner ring whose vertices sit at
/// equal arc fractions starting from fraction 0, by a two-pointer merge.
fn stitch(vertices: &[Point], outer: (usize, usize), inner: (usize, usize), out: &mut Vec<usize>) -> Result<(), GeometryError> {
    let (os, on) = outer;
    let (is, inn) = inner;
    let o = |k: usize| os + k % on;
    let i = |k: usize| is + k % inn;
    let (mut a, mut b) = (0usize, 0usize);
    while a < on || b < inn {
        let next_outer = (a + 1) as f64 / on as f64;
        let next_inner = (b + 1) as f64 / inn as f64;
        if b >= inn || (a < on && next_outer <= next_inner) {
            push_ccw(vertices, [i(b), o(a), o(a + 1)], out)?;
            a += 1;
        } else {
            push_ccw(vertices, [i(b), o(a), i(b + 1)], out)?;
            b += 1;
        }
    }
    Ok(())
}

fn push_ccw(vertices: &[Point], t: [usize; 3], out: &mut Vec<usize>) -> Result<(), GeometryError> {
    let area2 = cross(sub(vertices[t[1]], vertices[t[0]]), sub(vertices[t[2]], vertices[t[0]]));
    if area2 > 0.0 {
        out.extend_from_slice(&t);
    } else if area2 < 0.0 {
        out.extend_from_slice(&[t[0], t[2], t[1]]);
    } else {
        return Err(GeometryError::InvalidMesh("degenerate triangle while stitching rings".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_half_step() {
        let m = build_mesh(&DomainSpec::interval(1.0), 0.5).unwrap();
        let xs: Vec<f64> = m.vertices().iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(m.facets().len(), 2);
        assert_eq!(m.facets()[0].normal, [-1.0, 0.0]);
        assert_eq!(m.facets()[1].normal, [1.0, 0.0]);
        assert!(m.facets().iter().all(|f| f.measure == 1.0));
    }

    #[test]
    fn coarse_disk_is_an_octagon() {
        let m = build_mesh(&DomainSpec::disk(1.0), 2.0 * PI / 8.0).unwrap();
        assert_eq!(m.facets().len(), 8);
        assert!((m.measure() - 4.0 * (2.0 * PI / 8.0).sin()).abs() < 1e-12);
        assert!((m.boundary_measure() - 16.0 * (PI / 8.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn too_coarse_disk_is_refused() {
        assert!(matches!(build_mesh(&DomainSpec::disk(1.0), 1.0), Err(GeometryError::TooCoarse { .. })));
    }

    #[test]
    fn unit_square_single_cell() {
        let m = build_mesh(&DomainSpec::unit_square(), 1.0).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert!((m.measure() - 1.0).abs() < 1e-15);
        assert!((m.boundary_measure() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_vertices_lie_on_the_curve() {
        for spec in [
            DomainSpec::disk(1.0),
            DomainSpec::ellipse(1.25, 0.8),
            DomainSpec::smoothed_square(2.0, 0.35),
            DomainSpec::rough_disk(1.0, 0.1, 0.5),
        ] {
            let m = build_mesh(&spec, 0.1).unwrap();
            for v in m.boundary_vertices() {
                assert!(spec.signed_level(m.vertices()[v]).abs() < 1e-12, "{spec:?}");
            }
        }
    }

    #[test]
    fn layered_meshes_are_valid_and_resolved() {
        let sizing = MeshSizing::for_layer(0.1, 64.0, 0.2);
        for spec in [DomainSpec::disk(1.0), DomainSpec::interval(1.0), DomainSpec::square(1.0)] {
            let m = build_mesh_with(&spec, &sizing).unwrap();
            let r = m.boundary_resolution();
            assert!(r.layer_metric(64.0) <= 0.2 + 1e-12, "{spec:?}: {r:?}");
        }
    }

    #[test]
    fn refinement_is_nested_and_conservative() {
        let m = build_mesh(&DomainSpec::ellipse(1.2, 0.7), 0.2).unwrap();
        let r = m.refine();
        assert_eq!(r.num_cells(), 4 * m.num_cells());
        assert_eq!(r.facets().len(), 2 * m.facets().len());
        assert!((r.measure() - m.measure()).abs() < 1e-12);
        assert!((r.boundary_measure() - m.boundary_measure()).abs() < 1e-12);
        assert_eq!(&r.vertices()[..m.num_vertices()], m.vertices());
    }

    #[test]
    fn disk_area_converges_quadratically() {
        let spec = DomainSpec::disk(1.0);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| (build_mesh(&spec, h).unwrap().measure() - PI).abs())
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }

    #[test]
    fn boundary_distance_tracks_the_radius() {
        let m = build_mesh(&DomainSpec::disk(1.0), 0.05).unwrap();
        let d = m.boundary_distance();
        for (x, di) in m.vertices().iter().zip(&d) {
            let exact = 1.0 - x[0].hypot(x[1]);
            assert!((di - exact).abs() <= 5e-3, "{x:?} {di} {exact}");
        }
        let iv = build_mesh(&DomainSpec::interval(1.0), 0.1).unwrap();
        for (x, di) in iv.vertices().iter().zip(iv.boundary_distance()) {
            assert!((di - (1.0 - x[0].abs())).abs() < 1e-12);
        }
    }
}
