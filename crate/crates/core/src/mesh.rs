//! Conforming triangulations with newest-vertex bisection.
//!
//! Triangles are stored counterclockwise. Local side `e` of a triangle is the
//! edge opposite local vertex `e`. The refinement edge of a triangle is one of
//! its local sides; bisection inserts the midpoint of that edge and the two
//! children inherit as refinement edge the side opposite the new vertex.

use crate::real::Real;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryLabel {
    Interior,
    /// Every component is prescribed.
    Dirichlet,
    /// Natural condition for every component.
    Neumann,
    /// First component prescribed, second natural.
    Gamma1,
    /// Second component prescribed, first natural.
    Gamma2,
    /// Every component prescribed.
    Gamma3,
}

impl BoundaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Interior => "interior",
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
            Self::Gamma1 => "gamma1",
            Self::Gamma2 => "gamma2",
            Self::Gamma3 => "gamma3",
        }
    }

    pub fn is_boundary(self) -> bool {
        self != Self::Interior
    }

    /// Whether component `c` carries an essential condition on this side.
    pub fn constrains(self, c: usize) -> bool {
        match self {
            Self::Interior | Self::Neumann => false,
            Self::Dirichlet | Self::Gamma3 => true,
            Self::Gamma1 => c == 0,
            Self::Gamma2 => c == 1,
        }
    }

    pub fn constrains_any(self) -> bool {
        self.constrains(0) || self.constrains(1)
    }
}

impl FromStr for BoundaryLabel {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "interior" => Self::Interior,
            "dirichlet" => Self::Dirichlet,
            "neumann" => Self::Neumann,
            "gamma1" => Self::Gamma1,
            "gamma2" => Self::Gamma2,
            "gamma3" => Self::Gamma3,
            other => return Err(MeshError::Parse(format!("unknown side label `{other}`"))),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {0} is degenerate")]
    Degenerate(usize),
    #[error("triangle {0} references a missing vertex")]
    BadVertex(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifold(usize, usize),
    #[error("vertex {vertex} lies inside boundary edge ({a}, {b}); the mesh is not conforming")]
    HangingNode { vertex: usize, a: usize, b: usize },
    #[error("boundary side ({0}, {1}) has no label")]
    Unlabeled(usize, usize),
    #[error("side ({0}, {1}) is labeled interior but lies on the boundary")]
    InteriorLabelOnBoundary(usize, usize),
    #[error("triangle {0} is marked but does not exist")]
    BadMark(usize),
    #[error("mesh file: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Side<T> {
    /// Endpoints with `vertices[0] < vertices[1]`; the side basis runs from
    /// the first to the second.
    pub vertices: [usize; 2],
    /// Triangle the normal points out of.
    pub owner: usize,
    /// Triangle on the other side; `None` on the boundary.
    pub neighbor: Option<usize>,
    pub label: BoundaryLabel,
    /// Unit normal pointing out of `owner`.
    pub normal: [T; 2],
    pub length: T,
}

impl<T> Side<T> {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Triangulation<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    triangle_sides: Vec<[usize; 3]>,
    sides: Vec<Side<T>>,
    areas: Vec<T>,
    parent: Vec<Option<usize>>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area<T: Real>(p: [[T; 2]; 3]) -> T {
    ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        * T::lit(0.5)
}

impl<T: Real> Triangulation<T> {
    /// Builds a triangulation, choosing the longest edge of every triangle as
    /// its refinement edge (ties go to the lowest global side index).
    ///
    /// `labeler` receives the midpoint of each boundary side and must return
    /// a boundary label for it.
    pub fn new(
        vertices: Vec<[T; 2]>,
        triangles: Vec<[usize; 3]>,
        labeler: impl Fn([T; 2]) -> Option<BoundaryLabel>,
    ) -> Result<Self, MeshError> {
        let mut triangles = triangles;
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::BadVertex(t));
            }
            let a = signed_area([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if a < T::zero() {
                tri.swap(1, 2);
            }
        }
        let placeholder = vec![0u8; triangles.len()];
        let mut mesh =
            Self::assemble(vertices, triangles, placeholder, Vec::new(), |_, _, mid| {
                labeler(mid)
            })?;
        mesh.check_hanging_nodes()?;
        for t in 0..mesh.triangles.len() {
            let mut best = 0usize;
            for e in 1..3 {
                let le = mesh.sides[mesh.triangle_sides[t][e]].length;
                let lb = mesh.sides[mesh.triangle_sides[t][best]].length;
                let se = mesh.triangle_sides[t][e];
                let sb = mesh.triangle_sides[t][best];
                if le > lb || (le == lb && se < sb) {
                    best = e;
                }
            }
            mesh.refinement_edge[t] = best as u8;
        }
        mesh.parent = vec![None; mesh.triangles.len()];
        Ok(mesh)
    }

    /// Generic constructor from explicit refinement edges; `label_of` is
    /// called for boundary edges with the two endpoints and the midpoint.
    fn assemble(
        vertices: Vec<[T; 2]>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        parent: Vec<Option<usize>>,
        label_of: impl Fn(usize, usize, [T; 2]) -> Option<BoundaryLabel>,
    ) -> Result<Self, MeshError> {
        let nt = triangles.len();
        let mut areas = Vec::with_capacity(nt);
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::BadVertex(t));
            }
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let a = signed_area(p);
            let scale = (0..3)
                .map(|i| {
                    let d = [p[(i + 1) % 3][0] - p[i][0], p[(i + 1) % 3][1] - p[i][1]];
                    d[0] * d[0] + d[1] * d[1]
                })
                .fold(T::zero(), T::max);
            if !(a > scale * T::epsilon() * T::lit(64.0)) {
                return Err(MeshError::Degenerate(t));
            }
            areas.push(a);
        }
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * nt);
        let mut sides: Vec<Side<T>> = Vec::with_capacity(2 * nt);
        let mut triangle_sides = vec![[0usize; 3]; nt];
        for (t, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let a = tri[(e + 1) % 3];
                let b = tri[(e + 2) % 3];
                let key = edge_key(a, b);
                match index.get(&key) {
                    Some(&s) => {
                        if sides[s].neighbor.is_some() {
                            return Err(MeshError::NonManifold(key.0, key.1));
                        }
                        sides[s].neighbor = Some(t);
                        triangle_sides[t][e] = s;
                    }
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let d = [pb[0] - pa[0], pb[1] - pa[1]];
                        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                        // Counterclockwise triangle: outward normal is the
                        // tangent rotated clockwise.
                        let normal = [d[1] / len, -d[0] / len];
                        sides.push(Side {
                            vertices: [key.0, key.1],
                            owner: t,
                            neighbor: None,
                            label: BoundaryLabel::Interior,
                            normal,
                            length: len,
                        });
                        let s = sides.len() - 1;
                        index.insert(key, s);
                        triangle_sides[t][e] = s;
                    }
                }
            }
        }
        for side in &mut sides {
            if side.neighbor.is_none() {
                let [a, b] = side.vertices;
                let mid = [
                    (vertices[a][0] + vertices[b][0]) * T::lit(0.5),
                    (vertices[a][1] + vertices[b][1]) * T::lit(0.5),
                ];
                match label_of(a, b, mid) {
                    None => return Err(MeshError::Unlabeled(a, b)),
                    Some(BoundaryLabel::Interior) => {
                        return Err(MeshError::InteriorLabelOnBoundary(a, b))
                    }
                    Some(l) => side.label = l,
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
            refinement_edge,
            triangle_sides,
            sides,
            areas,
            parent,
        })
    }

    fn check_hanging_nodes(&self) -> Result<(), MeshError> {
        for side in self.sides.iter().filter(|s| s.is_boundary()) {
            let [a, b] = side.vertices;
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let l2 = d[0] * d[0] + d[1] * d[1];
            let tol = T::epsilon() * T::lit(1e3);
            for (v, p) in self.vertices.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let w = [p[0] - pa[0], p[1] - pa[1]];
                let t = (w[0] * d[0] + w[1] * d[1]) / l2;
                let cross = (w[0] * d[1] - w[1] * d[0]).abs() / l2;
                if t > tol && t < T::one() - tol && cross < tol {
                    return Err(MeshError::HangingNode { vertex: v, a, b });
                }
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_sides(&self) -> usize {
        self.sides.len()
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [T; 2] {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_points(&self, t: usize) -> [[T; 2]; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    /// Global side indices of the local sides of triangle `t`.
    pub fn triangle_sides(&self, t: usize) -> [usize; 3] {
        self.triangle_sides[t]
    }

    pub fn side(&self, s: usize) -> &Side<T> {
        &self.sides[s]
    }

    pub fn sides(&self) -> &[Side<T>] {
        &self.sides
    }

    /// Local index of the refinement edge of `t`.
    pub fn refinement_edge(&self, t: usize) -> usize {
        self.refinement_edge[t] as usize
    }

    /// Triangle of the previous mesh that contains `t` (`None` on an initial
    /// mesh).
    pub fn parent(&self, t: usize) -> Option<usize> {
        self.parent[t]
    }

    pub fn area(&self, t: usize) -> T {
        self.areas[t]
    }

    /// Mesh-size function `|T|^{1/2}`.
    pub fn mesh_size(&self, t: usize) -> T {
        self.areas[t].sqrt()
    }

    pub fn diameter(&self, t: usize) -> T {
        self.triangle_sides[t]
            .iter()
            .map(|&s| self.sides[s].length)
            .fold(T::zero(), T::max)
    }

    pub fn centroid(&self, t: usize) -> [T; 2] {
        let p = self.triangle_points(t);
        let third = T::lit(1.0 / 3.0);
        [
            (p[0][0] + p[1][0] + p[2][0]) * third,
            (p[0][1] + p[1][1] + p[2][1]) * third,
        ]
    }

    pub fn side_midpoint(&self, s: usize) -> [T; 2] {
        let [a, b] = self.sides[s].vertices;
        [
            (self.vertices[a][0] + self.vertices[b][0]) * T::lit(0.5),
            (self.vertices[a][1] + self.vertices[b][1]) * T::lit(0.5),
        ]
    }

    /// Outward unit normal of triangle `t` on its local side `e`.
    pub fn outward_normal(&self, t: usize, e: usize) -> [T; 2] {
        let s = &self.sides[self.triangle_sides[t][e]];
        if s.owner == t {
            s.normal
        } else {
            [-s.normal[0], -s.normal[1]]
        }
    }

    /// Ratio of inradius to circumradius; 1/2 for an equilateral triangle.
    pub fn shape_regularity(&self, t: usize) -> T {
        let l: Vec<T> = self.triangle_sides[t]
            .iter()
            .map(|&s| self.sides[s].length)
            .collect();
        let area = self.areas[t];
        let perimeter = l[0] + l[1] + l[2];
        let inradius = T::lit(2.0) * area / perimeter;
        let circumradius = l[0] * l[1] * l[2] / (T::lit(4.0) * area);
        inradius / circumradius
    }

    pub fn total_area(&self) -> T {
        self.areas.iter().copied().sum()
    }

    /// Newest-vertex bisection of the marked triangles followed by the
    /// closure that removes hanging nodes. Every marked triangle is bisected
    /// at least once.
    pub fn refine(&self, marked: &[usize]) -> Result<Self, MeshError> {
        let mut flags = vec![false; self.n_triangles()];
        for &t in marked {
            if t >= flags.len() {
                return Err(MeshError::BadMark(t));
            }
            flags[t] = true;
        }
        Ok(self.bisect_rounds(flags, 1))
    }

    /// Three bisections per triangle, giving four children each.
    pub fn refine_uniform(&self) -> Self {
        self.bisect_rounds(vec![true; self.n_triangles()], 2)
    }

    /// `forced_rounds` rounds bisect every flagged triangle and then all of
    /// their children; the closure loop then runs to its fixpoint.
    fn bisect_rounds(&self, flags: Vec<bool>, forced_rounds: usize) -> Self {
        let mut work = Bisector {
            vertices: self.vertices.clone(),
            tris: self
                .triangles
                .iter()
                .enumerate()
                .map(|(t, &v)| Work {
                    v,
                    r: self.refinement_edge[t],
                    origin: t,
                })
                .collect(),
            midpoints: HashMap::new(),
        };
        let mut labels: HashMap<(usize, usize), BoundaryLabel> = self
            .sides
            .iter()
            .filter(|s| s.is_boundary())
            .map(|s| ((s.vertices[0], s.vertices[1]), s.label))
            .collect();

        let mut flags = flags;
        for round in 0..forced_rounds {
            let split = work.bisect_flagged(&flags, &mut labels);
            flags = if round + 1 < forced_rounds {
                split
            } else {
                vec![false; work.tris.len()]
            };
        }
        loop {
            let closure: Vec<bool> = work
                .tris
                .iter()
                .map(|w| {
                    (0..3).any(|e| {
                        work.midpoints
                            .contains_key(&edge_key(w.v[(e + 1) % 3], w.v[(e + 2) % 3]))
                    })
                })
                .collect();
            if !closure.iter().any(|&f| f) {
                break;
            }
            work.bisect_flagged(&closure, &mut labels);
        }

        let parent = work.tris.iter().map(|w| Some(w.origin)).collect();
        Self::assemble(
            work.vertices,
            work.tris.iter().map(|w| w.v).collect(),
            work.tris.iter().map(|w| w.r).collect(),
            parent,
            |a, b, _| labels.get(&edge_key(a, b)).copied(),
        )
        .expect("bisection of a valid mesh is valid")
    }

    /// Writes the plain-text mesh format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "vertices {} / triangles {} / sides {}",
            self.n_vertices(),
            self.n_triangles(),
            self.n_sides()
        );
        for p in &self.vertices {
            let _ = writeln!(out, "{} {}", p[0].as_f64(), p[1].as_f64());
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                tri[0], tri[1], tri[2], self.refinement_edge[t]
            );
        }
        for s in &self.sides {
            let _ = writeln!(
                out,
                "{} {} {}",
                s.vertices[0],
                s.vertices[1],
                s.label.as_str()
            );
        }
        out
    }

    /// Parses the format written by [`Triangulation::to_text`].
    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let bad = |m: &str| MeshError::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let tok: Vec<&str> = header.split_whitespace().filter(|t| *t != "/").collect();
        if tok.len() != 6 || tok[0] != "vertices" || tok[2] != "triangles" || tok[4] != "sides" {
            return Err(bad("header must read `vertices N / triangles M / sides K`"));
        }
        let count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad("invalid count in header"))
        };
        let (nv, nt, ns) = (count(tok[1])?, count(tok[3])?, count(tok[5])?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = lines.next().ok_or_else(|| bad("missing vertex row"))?;
            let f: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("invalid vertex row"))?;
            if f.len() != 2 {
                return Err(bad("vertex row needs two coordinates"));
            }
            vertices.push([T::lit(f[0]), T::lit(f[1])]);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut refedges = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = lines.next().ok_or_else(|| bad("missing triangle row"))?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|x| x.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("invalid triangle row"))?;
            if f.len() != 4 || f[3] > 2 {
                return Err(bad(
                    "triangle row needs three vertices and a refinement edge in 0..3",
                ));
            }
            triangles.push([f[0], f[1], f[2]]);
            refedges.push(f[3] as u8);
        }
        let mut labels = HashMap::new();
        for _ in 0..ns {
            let l = lines.next().ok_or_else(|| bad("missing side row"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("side row needs two vertices and a label"));
            }
            let a = f[0].parse::<usize>().map_err(|_| bad("invalid side row"))?;
            let b = f[1].parse::<usize>().map_err(|_| bad("invalid side row"))?;
            labels.insert(edge_key(a, b), f[2].parse::<BoundaryLabel>()?);
        }
        if lines.next().is_some() {
            return Err(bad("trailing rows after the side table"));
        }
        let mesh = Self::assemble(vertices, triangles, refedges, vec![None; nt], |a, b, _| {
            labels.get(&edge_key(a, b)).copied()
        })?;
        if mesh.n_sides() != ns {
            return Err(bad("side table does not match the triangles"));
        }
        for s in &mesh.sides {
            let given = labels.get(&(s.vertices[0], s.vertices[1])).copied();
            if given != Some(s.label) {
                return Err(bad("side table does not match the triangles"));
            }
        }
        mesh.check_hanging_nodes()?;
        Ok(mesh)
    }
}

#[derive(Clone, Copy)]
struct Work {
    v: [usize; 3],
    r: u8,
    origin: usize,
}

struct Bisector<T> {
    vertices: Vec<[T; 2]>,
    tris: Vec<Work>,
    midpoints: HashMap<(usize, usize), usize>,
}

impl<T: Real> Bisector<T> {
    /// Bisects every flagged triangle once; returns flags marking the
    /// children.
    fn bisect_flagged(
        &mut self,
        flags: &[bool],
        labels: &mut HashMap<(usize, usize), BoundaryLabel>,
    ) -> Vec<bool> {
        let mut next = Vec::with_capacity(self.tris.len() * 2);
        let mut child = Vec::with_capacity(self.tris.len() * 2);
        let tris = std::mem::take(&mut self.tris);
        for (w, &f) in tris.iter().zip(flags) {
            if !f {
                next.push(*w);
                child.push(false);
                continue;
            }
            let e = w.r as usize;
            let apex = w.v[e];
            let b = w.v[(e + 1) % 3];
            let c = w.v[(e + 2) % 3];
            let key = edge_key(b, c);
            let m = match self.midpoints.get(&key) {
                Some(&m) => m,
                None => {
                    let pb = self.vertices[b];
                    let pc = self.vertices[c];
                    self.vertices
                        .push([(pb[0] + pc[0]) * T::lit(0.5), (pb[1] + pc[1]) * T::lit(0.5)]);
                    let m = self.vertices.len() - 1;
                    self.midpoints.insert(key, m);
                    if let Some(&l) = labels.get(&key) {
                        labels.insert(edge_key(b, m), l);
                        labels.insert(edge_key(m, c), l);
                    }
                    m
                }
            };
            next.push(Work {
                v: [apex, b, m],
                r: 2,
                origin: w.origin,
            });
            next.push(Work {
                v: [apex, m, c],
                r: 1,
                origin: w.origin,
            });
            child.push(true);
            child.push(true);
        }
        self.tris = next;
        child
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Triangulation<f64> {
        Triangulation::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            |_| Some(BoundaryLabel::Dirichlet),
        )
        .unwrap()
    }

    // [TRIVIAL]
    #[test]
    fn counts_and_areas() {
        let m = unit_square();
        assert_eq!(m.n_sides(), 5);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(m.sides().iter().filter(|s| s.is_boundary()).count(), 4);
    }

    // [DERIVED]
    #[test]
    fn longest_edge_is_refinement_edge() {
        let m = unit_square();
        for t in 0..2 {
            let s = m.triangle_sides(t)[m.refinement_edge(t)];
            assert!((m.side(s).length - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    // [TRIVIAL]
    #[test]
    fn clockwise_input_is_reoriented() {
        let m = Triangulation::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            |_| Some(BoundaryLabel::Neumann),
        )
        .unwrap();
        assert!(m.area(0) > 0.0);
    }

    // [TRIVIAL]
    #[test]
    fn hanging_node_is_rejected() {
        let r = Triangulation::new(
            vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [1.0, 1.0], [2.0, 2.0]],
            vec![[0, 1, 2], [1, 4, 3], [3, 4, 2]],
            |_| Some(BoundaryLabel::Dirichlet),
        );
        assert!(matches!(r, Err(MeshError::HangingNode { .. })));
    }

    // [TRIVIAL]
    #[test]
    fn unlabeled_boundary_is_rejected() {
        let r = Triangulation::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            |p| (p[1] > 0.0).then_some(BoundaryLabel::Dirichlet),
        );
        assert!(matches!(r, Err(MeshError::Unlabeled(..))));
    }

    // [TRIVIAL]
    #[test]
    fn degenerate_triangle_is_rejected() {
        let r = Triangulation::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            |_| Some(BoundaryLabel::Dirichlet),
        );
        assert!(matches!(r, Err(MeshError::Degenerate(0))));
    }

    // [DERIVED]
    #[test]
    fn right_isosceles_shape_regularity() {
        let m = unit_square();
        assert!((m.shape_regularity(0) - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }
}
