//! Closed triangle meshes: topology validation, cotangent calculus,
//! icosphere generation and OFF/OBJ input.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::path::Path;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// A validated closed, connected, consistently oriented triangle mesh.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    edge_count: usize,
}

impl TriMesh {
    /// Validates the mesh and re-orients faces consistently.
    ///
    /// Fails with a topology error when an edge does not border exactly two
    /// faces, the surface is not orientable, disconnected, or has isolated
    /// vertices; fails with a domain error on degenerate triangles.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::Topology("mesh has no faces".into()));
        }
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::Topology(format!("face {fi} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Topology(format!("face {fi} repeats a vertex")));
            }
            let area = 0.5 * norm(cross(sub(vertices[f[1]], vertices[f[0]]), sub(vertices[f[2]], vertices[f[0]])));
            if !(area > 0.0) || !area.is_finite() {
                return Err(Error::Domain(format!("face {fi} is degenerate")));
            }
        }

        // undirected edge -> incident (face, local edge index)
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push((fi, e));
            }
        }
        for (&(a, b), inc) in &edges {
            match inc.len() {
                2 => {}
                1 => return Err(Error::Topology(format!("boundary edge ({a}, {b}): mesh is not closed"))),
                n => return Err(Error::Topology(format!("edge ({a}, {b}) borders {n} faces"))),
            }
        }

        let mut used = vec![false; nv];
        for f in &faces {
            for &v in f {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Topology(format!("vertex {v} is not referenced by any face")));
        }

        // Propagate a consistent orientation by breadth-first search over faces.
        let mut faces = faces;
        let nf = faces.len();
        let mut flipped: Vec<Option<bool>> = vec![None; nf];
        let mut queue = VecDeque::new();
        flipped[0] = Some(false);
        queue.push_back(0usize);
        let directed = |f: &[usize; 3], e: usize, flip: bool| {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            if flip {
                (b, a)
            } else {
                (a, b)
            }
        };
        let mut visited = 1usize;
        while let Some(fi) = queue.pop_front() {
            let fl = flipped[fi].expect("queued faces carry an orientation");
            for e in 0..3 {
                let (a, b) = directed(&faces[fi], e, fl);
                let key = (a.min(b), a.max(b));
                for &(gj, ge) in &edges[&key] {
                    if gj == fi {
                        continue;
                    }
                    let (c, _) = directed(&faces[gj], ge, false);
                    // neighbour must traverse the shared edge as (b, a)
                    let need_flip = c == a;
                    match flipped[gj] {
                        None => {
                            flipped[gj] = Some(need_flip);
                            visited += 1;
                            queue.push_back(gj);
                        }
                        Some(f) if f != need_flip => {
                            return Err(Error::Topology("mesh is not orientable".into()));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        if visited != nf {
            return Err(Error::Topology("mesh is not connected".into()));
        }
        for (f, fl) in faces.iter_mut().zip(&flipped) {
            if fl == &Some(true) {
                f.swap(1, 2);
            }
        }

        let mesh = TriMesh {
            vertices,
            faces,
            edge_count: edges.len(),
        };
        let chi = mesh.euler_characteristic();
        if chi % 2 != 0 {
            return Err(Error::Topology(format!("odd Euler characteristic {chi}")));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count as i64 + self.faces.len() as i64
    }

    pub fn total_area(&self) -> f64 {
        self.faces.iter().map(|f| self.face_area(f)).sum()
    }

    fn face_area(&self, f: &[usize; 3]) -> f64 {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    /// Mean edge length, used as the mesh size `h`.
    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        for f in &self.faces {
            for e in 0..3 {
                total += norm(sub(self.vertices[f[(e + 1) % 3]], self.vertices[f[e]]));
            }
        }
        // every edge is counted twice on a closed mesh
        total / (2.0 * self.edge_count as f64)
    }

    /// Cotangent stiffness matrix `K` with `u^T K u = ∫|∇u|²` for the
    /// piecewise-linear interpolant. Positive semidefinite, rows sum to zero.
    pub fn cotan_stiffness(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.faces.len() * 12);
        for f in &self.faces {
            for e in 0..3 {
                let (i, j, o) = (f[e], f[(e + 1) % 3], f[(e + 2) % 3]);
                let u = sub(self.vertices[i], self.vertices[o]);
                let v = sub(self.vertices[j], self.vertices[o]);
                let w = 0.5 * dot3(u, v) / norm(cross(u, v));
                t.push((i, j, -w));
                t.push((j, i, -w));
                t.push((i, i, w));
                t.push((j, j, w));
            }
        }
        CsrMatrix::from_triplets(self.vertices.len(), t)
    }

    /// Mixed Voronoi vertex areas; they partition the total area.
    pub fn mixed_voronoi_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.vertices.len()];
        for f in &self.faces {
            let p = f.map(|i| self.vertices[i]);
            let area = self.face_area(f);
            let angle_at = |k: usize| {
                let a = sub(p[(k + 1) % 3], p[k]);
                let b = sub(p[(k + 2) % 3], p[k]);
                dot3(a, b)
            };
            let obtuse = (0..3).find(|&k| angle_at(k) < 0.0);
            match obtuse {
                Some(k) => {
                    for m in 0..3 {
                        areas[f[m]] += if m == k { area / 2.0 } else { area / 4.0 };
                    }
                }
                None => {
                    for k in 0..3 {
                        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                        let cot_at = |x: Vec3, y: Vec3, z: Vec3| {
                            let u = sub(y, x);
                            let v = sub(z, x);
                            dot3(u, v) / norm(cross(u, v))
                        };
                        // edge ab is opposite c, edge ac opposite b
                        let ab2 = dot3(sub(b, a), sub(b, a));
                        let ac2 = dot3(sub(c, a), sub(c, a));
                        areas[f[k]] += 0.125 * (ab2 * cot_at(c, a, b) + ac2 * cot_at(b, c, a));
                    }
                }
            }
        }
        areas
    }

    /// Angle defect `2π − Σ θ` at every vertex.
    pub fn angle_defects(&self) -> Vec<f64> {
        let mut defect = vec![2.0 * PI; self.vertices.len()];
        for f in &self.faces {
            let p = f.map(|i| self.vertices[i]);
            for k in 0..3 {
                let a = sub(p[(k + 1) % 3], p[k]);
                let b = sub(p[(k + 2) % 3], p[k]);
                defect[f[k]] -= norm(cross(a, b)).atan2(dot3(a, b));
            }
        }
        defect
    }

    /// Geodesic icosphere: icosahedron refined `level` times by edge
    /// midpoint subdivision, every new vertex projected to the sphere.
    pub fn icosphere(level: u32, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("sphere radius must be positive, got {radius}")));
        }
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let faces: Vec<[usize; 3]> = vec![
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
        let unit = |v: Vec3| {
            let n = norm(v);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        for v in verts.iter_mut() {
            *v = unit(*v);
        }
        // One-shot lattice of frequency 2^level on every base face, so the
        // only parametrization kinks sit on the 30 icosahedron edges.
        let n = 1usize << level;
        let base = verts;
        let mut verts: Vec<Vec3> = Vec::new();
        let mut index: HashMap<[i64; 3], usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * n * n);
        for f in &faces {
            let (a, b, c) = (base[f[0]], base[f[1]], base[f[2]]);
            let mut id = |i: usize, j: usize, verts: &mut Vec<Vec3>| -> usize {
                let (wb, wc) = (i as f64 / n as f64, j as f64 / n as f64);
                let wa = 1.0 - wb - wc;
                let p = unit([
                    wa * a[0] + wb * b[0] + wc * c[0],
                    wa * a[1] + wb * b[1] + wc * c[1],
                    wa * a[2] + wb * b[2] + wc * c[2],
                ]);
                let key = [(p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64, (p[2] * 1e9).round() as i64];
                *index.entry(key).or_insert_with(|| {
                    verts.push(p);
                    verts.len() - 1
                })
            };
            for i in 0..n {
                for j in 0..n - i {
                    let p0 = id(i, j, &mut verts);
                    let p1 = id(i + 1, j, &mut verts);
                    let p2 = id(i, j + 1, &mut verts);
                    next.push([p0, p1, p2]);
                    if i + j + 1 < n {
                        let p3 = id(i + 1, j + 1, &mut verts);
                        next.push([p1, p3, p2]);
                    }
                }
            }
        }
        let faces = next;
        for v in verts.iter_mut() {
            *v = [v[0] * radius, v[1] * radius, v[2] * radius];
        }
        TriMesh::new(verts, faces)
    }

    /// Loads an OFF or OBJ triangle mesh, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        let (v, f) = match ext.as_str() {
            "off" => parse_off(&text)?,
            "obj" => parse_obj(&text)?,
            other => return Err(Error::Parse(format!("unknown mesh extension `{other}`"))),
        };
        TriMesh::new(v, f)
    }
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("invalid number `{tok}`")))
}

fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("invalid index `{tok}`")))
}

pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    match tokens.next() {
        Some("OFF") => {}
        _ => return Err(Error::Parse("missing OFF header".into())),
    }
    let mut next = || tokens.next().ok_or_else(|| Error::Parse("truncated OFF file".into()));
    let nv = parse_usize(next()?)?;
    let nf = parse_usize(next()?)?;
    let _ne = next()?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        verts.push([parse_f64(next()?)?, parse_f64(next()?)?, parse_f64(next()?)?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let arity = parse_usize(next()?)?;
        if arity != 3 {
            return Err(Error::Parse(format!("face {i} has {arity} vertices; only triangles are supported")));
        }
        faces.push([parse_usize(next()?)?, parse_usize(next()?)?, parse_usize(next()?)?]);
    }
    Ok((verts, faces))
}

pub fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(parse_f64).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::Parse(format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                verts.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let head = tok.split('/').next().unwrap_or(tok);
                        let i = parse_usize(head)?;
                        i.checked_sub(1)
                            .ok_or_else(|| Error::Parse(format!("line {}: OBJ indices start at 1", lineno + 1)))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::Parse(format!(
                        "line {}: face has {} vertices; only triangles are supported",
                        lineno + 1,
                        idx.len()
                    )));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> (Vec<Vec3>, Vec<[usize; 3]>) {
        (
            vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
    }

    #[test]
    fn tetrahedron_is_a_sphere() {
        let (v, f) = tetra();
        let m = TriMesh::new(v, f).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        let defect: f64 = m.angle_defects().iter().sum();
        assert!((defect - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_orientation_is_repaired() {
        let (v, mut f) = tetra();
        f[2].swap(1, 2);
        let m = TriMesh::new(v, f).unwrap();
        let k = m.cotan_stiffness();
        let ones = vec![1.0; 4];
        assert!(k.mul_vec(&ones).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn open_disk_is_rejected() {
        let (v, f) = tetra();
        let err = TriMesh::new(v, f[..3].to_vec()).unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("boundary edge")));
    }

    #[test]
    fn nonmanifold_edge_is_rejected() {
        let (mut v, mut f) = tetra();
        v.push([3.0, 3.0, 3.0]);
        f.push([0, 1, 4]);
        assert!(matches!(TriMesh::new(v, f), Err(Error::Topology(_))));
    }

    #[test]
    fn icosphere_counts_and_areas() {
        for level in 0..4 {
            let m = TriMesh::icosphere(level, 1.0).unwrap();
            let nf = 20 * 4usize.pow(level);
            assert_eq!(m.faces().len(), nf);
            assert_eq!(m.vertices().len(), nf / 2 + 2);
            assert_eq!(m.euler_characteristic(), 2);
            let a: f64 = m.mixed_voronoi_areas().iter().sum();
            assert!((a - m.total_area()).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn parses_off_and_obj() {
        let off = "OFF\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
        let (v, f) = parse_off(off).unwrap();
        assert_eq!((v.len(), f.len()), (4, 4));
        let obj = "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\nf 1 2 3\nf 1/1 4/4 2/2\nf 1 3 4\nf 2 4 3\n";
        let (v2, f2) = parse_obj(obj).unwrap();
        assert_eq!(v, v2);
        assert_eq!(f, f2);
        assert!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 2\n").is_err());
    }
}
