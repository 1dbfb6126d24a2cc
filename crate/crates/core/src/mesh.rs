//! Triangle meshes of planar domains with face topology, boundary
//! classification and a piecewise-constant permeability.
//!
//! Local edge `i` of a triangle joins its vertices `i` and `i + 1 (mod 3)`.
//! Every face stores the element with the lower id first; the face normal
//! is the outward normal of that element and the face vertices are ordered
//! counter-clockwise with respect to it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    Interior,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone)]
pub struct Face {
    pub vertices: [usize; 2],
    /// Adjacent elements; the first one has the lower id.
    pub elements: (usize, Option<usize>),
    pub local_edges: (usize, Option<usize>),
    /// Unit normal, outward from `elements.0`.
    pub normal: [f64; 2],
    pub length: f64,
    pub kind: FaceKind,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.elements.1.is_none()
    }

    /// Faces carrying jump and average terms (interior and Neumann).
    pub fn in_skeleton(&self) -> bool {
        self.kind != FaceKind::Dirichlet
    }
}

/// Affine map from the reference triangle: `x = origin + J xi`.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    pub jacobian: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
    pub diameter: f64,
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let jacobian = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        let inverse = [
            [jacobian[1][1] / det, -jacobian[0][1] / det],
            [-jacobian[1][0] / det, jacobian[0][0] / det],
        ];
        let diameter = (0..3)
            .map(|i| distance(vertices[i], vertices[(i + 1) % 3]))
            .fold(0.0, f64::max);
        Self {
            vertices,
            jacobian,
            inverse,
            det,
            area: 0.5 * det,
            diameter,
        }
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        let o = self.vertices[0];
        let j = &self.jacobian;
        [
            o[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            o[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let o = self.vertices[0];
        let d = [x[0] - o[0], x[1] - o[1]];
        let m = &self.inverse;
        [m[0][0] * d[0] + m[0][1] * d[1], m[1][0] * d[0] + m[1][1] * d[1]]
    }

    /// Physical gradient `J^{-T} g` of a reference gradient.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inverse;
        [m[0][0] * g[0] + m[1][0] * g[1], m[0][1] * g[0] + m[1][1] * g[1]]
    }

    pub fn centroid(&self) -> Point {
        let [a, b, c] = self.vertices;
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn inradius(&self) -> f64 {
        let perimeter: f64 = (0..3)
            .map(|i| distance(self.vertices[i], self.vertices[(i + 1) % 3]))
            .sum();
        2.0 * self.area / perimeter
    }
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    subdomain: Vec<usize>,
    kappa: Vec<f64>,
}

impl Mesh {
    /// Builds the face topology. Clockwise triangles are reoriented;
    /// degenerate ones are rejected. All boundary faces start as Dirichlet
    /// and every element has permeability one in subdomain zero.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        let mut geometry = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("triangle {e} references a missing vertex")));
            }
            let mut g = ElementGeometry::new([vertices[t[0]], vertices[t[1]], vertices[t[2]]]);
            if g.det < 0.0 {
                t.swap(1, 2);
                g = ElementGeometry::new([vertices[t[0]], vertices[t[1]], vertices[t[2]]]);
            }
            if g.det <= 1e-14 * g.diameter * g.diameter {
                return Err(Error::Mesh(format!("triangle {e} is degenerate")));
            }
            geometry.push(g);
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut element_faces = vec![[0usize; 3]; triangles.len()];
        for (e, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.elements.1.is_some() {
                            return Err(Error::Mesh(format!(
                                "edge ({a}, {b}) shared by more than two triangles"
                            )));
                        }
                        face.elements.1 = Some(e);
                        face.local_edges.1 = Some(i);
                        face.kind = FaceKind::Interior;
                        element_faces[e][i] = f;
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let length = distance(pa, pb);
                        let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                        lookup.insert(key, faces.len());
                        element_faces[e][i] = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            elements: (e, None),
                            local_edges: (i, None),
                            normal,
                            length,
                            kind: FaceKind::Dirichlet,
                        });
                    }
                }
            }
        }
        let n = triangles.len();
        Ok(Self {
            vertices,
            triangles,
            geometry,
            faces,
            element_faces,
            subdomain: vec![0; n],
            kappa: vec![1.0; n],
        })
    }

    /// Unit square split into `n x n` cells, each cut along its
    /// lower-left to upper-right diagonal.
    pub fn diagonal_grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Mesh("grid size must be positive".into()));
        }
        let vertices = grid_vertices(n);
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, triangles)
    }

    /// Unit square split into `n x n` cells, each cut by both diagonals.
    pub fn crisscross_grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Mesh("grid size must be positive".into()));
        }
        let mut vertices = grid_vertices(n);
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(4 * n * n);
        for j in 0..n {
            for i in 0..n {
                let c = vertices.len();
                vertices.push([(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64]);
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([v00, v10, c]);
                triangles.push([v10, v11, c]);
                triangles.push([v11, v01, c]);
                triangles.push([v01, v00, c]);
            }
        }
        Self::new(vertices, triangles)
    }

    /// Splits every triangle into three by joining its barycenter to its
    /// vertices. Permeability and subdomain ids are inherited; boundary faces
    /// are reset to Dirichlet.
    pub fn barycentric_trisect(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut triangles = Vec::with_capacity(3 * self.triangles.len());
        let mut kappa = Vec::with_capacity(3 * self.triangles.len());
        let mut subdomain = Vec::with_capacity(3 * self.triangles.len());
        for (e, t) in self.triangles.iter().enumerate() {
            let b = vertices.len();
            vertices.push(self.geometry[e].centroid());
            for i in 0..3 {
                triangles.push([t[i], t[(i + 1) % 3], b]);
                kappa.push(self.kappa[e]);
                subdomain.push(self.subdomain[e]);
            }
        }
        let mut mesh = Self::new(vertices, triangles)?;
        mesh.kappa = kappa;
        mesh.subdomain = subdomain;
        Ok(mesh)
    }

    /// Tags every boundary face as Dirichlet or Neumann.
    pub fn classify_boundary(mut self, spec: &BoundarySpec) -> Result<Self> {
        let mut any_dirichlet = false;
        for face in self.faces.iter_mut().filter(|f| f.is_boundary()) {
            let a = self.vertices[face.vertices[0]];
            let b = self.vertices[face.vertices[1]];
            let at = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let kind = spec.kind_at(at(0.5));
            if spec.kind_at(at(0.25)) != kind || spec.kind_at(at(0.75)) != kind {
                return Err(Error::Mesh(format!(
                    "boundary face {:?}-{:?} straddles the Dirichlet/Neumann split",
                    a, b
                )));
            }
            any_dirichlet |= kind == FaceKind::Dirichlet;
            face.kind = kind;
        }
        if !any_dirichlet {
            return Err(Error::Mesh("the Dirichlet boundary must not be empty".into()));
        }
        Ok(self)
    }

    /// Assigns subdomain ids by element centroid.
    pub fn with_subdomains(mut self, label: impl Fn(Point) -> usize) -> Self {
        for (e, g) in self.geometry.iter().enumerate() {
            self.subdomain[e] = label(g.centroid());
        }
        self
    }

    pub fn set_permeability(mut self, field: Permeability) -> Result<Self> {
        let values: Vec<f64> = match field {
            Permeability::Constant(k) => vec![k; self.num_elements()],
            Permeability::PerElement(v) => {
                if v.len() != self.num_elements() {
                    return Err(Error::Config(format!(
                        "{} permeability values for {} elements",
                        v.len(),
                        self.num_elements()
                    )));
                }
                v
            }
            Permeability::PerSubdomain(v) => self
                .subdomain
                .iter()
                .map(|&j| {
                    v.get(j).copied().ok_or_else(|| {
                        Error::Config(format!("no permeability given for subdomain {j}"))
                    })
                })
                .collect::<Result<_>>()?,
        };
        if let Some(bad) = values.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Config(format!("permeability must be positive, got {bad}")));
        }
        self.kappa = values;
        Ok(self)
    }

    /// Two subdomains `x < split` (id 0) and `x > split` (id 1). Fails if an
    /// element straddles the interface.
    pub fn split_at_x(self, split: f64, left: f64, right: f64) -> Result<Self> {
        for (e, t) in self.triangles.iter().enumerate() {
            let xs = t.map(|v| self.vertices[v][0]);
            let tol = 1e-12;
            let below = xs.iter().any(|&x| x < split - tol);
            let above = xs.iter().any(|&x| x > split + tol);
            if below && above {
                return Err(Error::Mesh(format!(
                    "element {e} straddles the permeability interface x = {split}"
                )));
            }
        }
        self.with_subdomains(|c| usize::from(c[0] > split))
            .set_permeability(Permeability::PerSubdomain(vec![left, right]))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn element_faces(&self, e: usize) -> [usize; 3] {
        self.element_faces[e]
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn kappa(&self, e: usize) -> f64 {
        self.kappa[e]
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappa
    }

    pub fn subdomain(&self, e: usize) -> usize {
        self.subdomain[e]
    }

    /// Mesh size: the largest element diameter.
    pub fn h(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    /// 1 when every boundary face is Dirichlet, 0 otherwise.
    pub fn theta(&self) -> f64 {
        if self.faces.iter().any(|f| f.kind == FaceKind::Neumann) {
            0.0
        } else {
            1.0
        }
    }

    /// `min(1/kappa_K, 1/kappa_K')` on interior faces, `1/kappa_K` on boundary faces.
    pub fn gamma(&self, f: usize) -> f64 {
        let face = &self.faces[f];
        let g = 1.0 / self.kappa[face.elements.0];
        match face.elements.1 {
            Some(e) => g.min(1.0 / self.kappa[e]),
            None => g,
        }
    }

    /// Indices of faces in the skeleton (interior and Neumann faces).
    pub fn skeleton_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].in_skeleton())
    }

    pub fn count_faces(&self, kind: FaceKind) -> usize {
        self.faces.iter().filter(|f| f.kind == kind).count()
    }

    /// Face-adjacent elements of `e`.
    pub fn neighbors(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_faces[e].into_iter().filter_map(move |f| {
            let face = &self.faces[f];
            match face.elements {
                (a, Some(b)) if a == e => Some(b),
                (a, Some(_)) => Some(a),
                _ => None,
            }
        })
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_faces() as i64 + self.num_elements() as i64
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Largest ratio of element diameter to inradius.
    pub fn shape_regularity(&self) -> f64 {
        self.geometry
            .iter()
            .map(|g| g.diameter / g.inradius())
            .fold(0.0, f64::max)
    }

    /// Reads the ASCII interchange format:
    ///
    /// ```text
    /// vertices <N>
    /// <x> <y>            (N lines)
    /// triangles <M>
    /// <a> <b> <c> [kappa] (M lines, zero-based vertex ids)
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn read_ascii(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| match l {
                Ok(s) => !s.trim().is_empty() && !s.trim_start().starts_with('#'),
                Err(_) => true,
            });
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(s))) => Ok((n, s)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let header = |line: usize, s: &str, key: &str| -> Result<usize> {
            let mut it = s.split_whitespace();
            match (it.next(), it.next().map(str::parse::<usize>)) {
                (Some(k), Some(Ok(n))) if k == key => Ok(n),
                _ => Err(Error::Parse {
                    line,
                    msg: format!("expected '{key} <count>'"),
                }),
            }
        };
        let parse_f = |line: usize, s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid number '{s}'"),
            })
        };

        let (line, s) = next("vertex header")?;
        let nv = header(line, &s, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, s) = next("vertex")?;
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse {
                    line,
                    msg: "expected two coordinates".into(),
                });
            }
            vertices.push([parse_f(line, parts[0])?, parse_f(line, parts[1])?]);
        }
        let (line, s) = next("triangle header")?;
        let nt = header(line, &s, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        let mut kappa = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, s) = next("triangle")?;
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != 3 && parts.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: "expected three vertex ids and an optional permeability".into(),
                });
            }
            let mut t = [0usize; 3];
            for (slot, p) in t.iter_mut().zip(&parts) {
                *slot = p.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid vertex id '{p}'"),
                })?;
            }
            triangles.push(t);
            if parts.len() == 4 {
                kappa.push(parse_f(line, parts[3])?);
            }
        }
        let mesh = Self::new(vertices, triangles)?;
        match kappa.len() {
            0 => Ok(mesh),
            n if n == nt => mesh.set_permeability(Permeability::PerElement(kappa)),
            _ => Err(Error::Parse {
                line: 0,
                msg: "permeability must be given for all triangles or none".into(),
            }),
        }
    }

    pub fn read_ascii_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_ascii(std::io::BufReader::new(file))
    }

    pub fn write_ascii(&self, mut out: impl Write) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, k) in self.triangles.iter().zip(&self.kappa) {
            let _ = writeln!(s, "{} {} {} {:.17e}", t[0], t[1], t[2], k);
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

fn grid_vertices(n: usize) -> Vec<Point> {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    v
}

#[derive(Debug, Clone)]
pub enum Permeability {
    Constant(f64),
    PerElement(Vec<f64>),
    PerSubdomain(Vec<f64>),
}

/// Assigns boundary faces to the Dirichlet or Neumann part by position.
#[derive(Clone)]
pub struct BoundarySpec {
    predicate: Arc<dyn Fn(Point) -> FaceKind + Send + Sync>,
}

impl std::fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BoundarySpec")
    }
}

impl BoundarySpec {
    pub fn new(predicate: impl Fn(Point) -> FaceKind + Send + Sync + 'static) -> Self {
        Self {
            predicate: Arc::new(predicate),
        }
    }

    /// No-slip everywhere.
    pub fn all_dirichlet() -> Self {
        Self::new(|_| FaceKind::Dirichlet)
    }

    /// Dirichlet on the left (`x = 0`) and top (`y = 1`) sides of the unit
    /// square, Neumann on the bottom and right sides.
    pub fn left_top_dirichlet() -> Self {
        Self::new(|p| {
            if p[0] < 1e-12 || p[1] > 1.0 - 1e-12 {
                FaceKind::Dirichlet
            } else {
                FaceKind::Neumann
            }
        })
    }

    pub fn kind_at(&self, p: Point) -> FaceKind {
        (self.predicate)(p)
    }
}
