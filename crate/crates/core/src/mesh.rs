//! Simplicial meshes of hypersurfaces, uniform refinement and nested
//! reference/true mesh hierarchies.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::ImplicitSurface;
use crate::linalg::SparseOperator;
use crate::simplex::{simplex_geometry, simplex_volume};

/// One side of a facet: the incident cell and the local index of the cell
/// vertex opposite the facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub cell: usize,
    pub local: usize,
}

/// A `(d-1)`-simplex shared by two cells. `plus.cell < minus.cell`; jumps are
/// taken as `v|plus - v|minus`. `minus` is `None` only on open test fixtures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub plus: FacetSide,
    pub minus: Option<FacetSide>,
}

/// Simplicial mesh of a `d`-dimensional surface embedded in `R^(d+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    dim: usize,
    vertices: Vec<f64>,
    cells: Vec<usize>,
    facets: Vec<Facet>,
    cell_facets: Vec<usize>,
    closed: bool,
}

type FacetKey = [usize; 3];

fn facet_key(verts: &[usize]) -> FacetKey {
    let mut k = [usize::MAX; 3];
    k[..verts.len()].copy_from_slice(verts);
    k[..verts.len()].sort_unstable();
    k
}

impl SurfaceMesh {
    /// Builds a closed mesh: every facet must have exactly two incident cells.
    pub fn new(dim: usize, vertices: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        Self::build(dim, vertices, cells, true)
    }

    /// Like [`SurfaceMesh::new`] but accepts boundary facets with a single cell.
    pub fn with_boundary(dim: usize, vertices: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        Self::build(dim, vertices, cells, false)
    }

    fn build(dim: usize, vertices: Vec<f64>, cells: Vec<usize>, closed: bool) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        let amb = dim + 1;
        if !vertices.len().is_multiple_of(amb) || !cells.len().is_multiple_of(dim + 1) {
            return Err(Error::InvalidMesh("array lengths do not match the dimension".into()));
        }
        let nv = vertices.len() / amb;
        if let Some(&v) = cells.iter().find(|&&v| v >= nv) {
            return Err(Error::InvalidMesh(format!("cell references missing vertex {v}")));
        }
        let nc = cells.len() / (dim + 1);
        let mut table: HashMap<FacetKey, usize> = HashMap::with_capacity(nc * (dim + 1) / 2 + 1);
        let mut facets: Vec<Facet> = Vec::with_capacity(nc * (dim + 1) / 2);
        let mut counts: Vec<usize> = Vec::new();
        let mut cell_facets = vec![0usize; nc * (dim + 1)];
        let mut local_verts = Vec::with_capacity(dim);
        for c in 0..nc {
            let cell = &cells[c * (dim + 1)..(c + 1) * (dim + 1)];
            for k in 0..=dim {
                local_verts.clear();
                local_verts.extend(cell.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v));
                let key = facet_key(&local_verts);
                let side = FacetSide { cell: c, local: k };
                let f = *table.entry(key).or_insert_with(|| {
                    let mut verts = local_verts.clone();
                    verts.sort_unstable();
                    facets.push(Facet {
                        vertices: verts,
                        plus: side,
                        minus: None,
                    });
                    counts.push(0);
                    facets.len() - 1
                });
                counts[f] += 1;
                if counts[f] == 2 {
                    facets[f].minus = Some(side);
                }
                cell_facets[c * (dim + 1) + k] = f;
            }
        }
        for (f, &n) in counts.iter().enumerate() {
            if n > 2 || (closed && n != 2) {
                return Err(Error::NonManifold {
                    facet: facets[f].vertices.clone(),
                    count: n,
                });
            }
        }
        let mesh = Self {
            dim,
            vertices,
            cells,
            facets,
            cell_facets,
            closed,
        };
        for c in 0..nc {
            if simplex_geometry(&mesh.cell_points(c)).is_none() {
                return Err(Error::DegenerateCell(c));
            }
        }
        Ok(mesh)
    }

    /// Same connectivity with new vertex coordinates.
    pub fn with_vertices(&self, vertices: Vec<f64>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        let mesh = Self {
            vertices,
            ..self.clone()
        };
        for c in 0..mesh.num_cells() {
            if simplex_geometry(&mesh.cell_points(c)).is_none() {
                return Err(Error::DegenerateCell(c));
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len() / (self.dim + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed && self.facets.iter().all(|f| f.minus.is_some())
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let a = self.dim + 1;
        &self.vertices[i * a..(i + 1) * a]
    }

    pub fn vertex_coords(&self) -> &[f64] {
        &self.vertices
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cells[c * n..(c + 1) * n]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Facet indices of cell `c`; entry `k` is the facet opposite local vertex `k`.
    pub fn cell_facets(&self, c: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cell_facets[c * n..(c + 1) * n]
    }

    pub fn cell_points(&self, c: usize) -> Vec<&[f64]> {
        self.cell(c).iter().map(|&v| self.vertex(v)).collect()
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        simplex_volume(&self.cell_points(c))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn facet_volume(&self, f: usize) -> f64 {
        let pts: Vec<&[f64]> = self.facets[f].vertices.iter().map(|&v| self.vertex(v)).collect();
        simplex_volume(&pts)
    }

    fn max_edge(&self, verts: &[usize]) -> f64 {
        let mut h: f64 = 0.0;
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                let d: f64 = self
                    .vertex(a)
                    .iter()
                    .zip(self.vertex(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                h = h.max(d.sqrt());
            }
        }
        h
    }

    /// Longest edge of cell `c`.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.max_edge(self.cell(c))
    }

    /// Longest edge of facet `f` (the facet length when `d = 2`).
    pub fn facet_diameter(&self, f: usize) -> f64 {
        self.max_edge(&self.facets[f].vertices)
    }

    /// Diameter over inradius, `h_T / rho_T`.
    pub fn shape_ratio(&self, c: usize) -> f64 {
        let vol = self.cell_volume(c);
        let surface: f64 = self.cell_facets(c).iter().map(|&f| self.facet_volume(f)).sum();
        let inradius = self.dim as f64 * vol / surface;
        self.cell_diameter(c) / inradius
    }

    /// Number of cells containing each vertex.
    pub fn vertex_cell_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.num_vertices()];
        for &v in &self.cells {
            n[v] += 1;
        }
        n
    }

    /// Uniform refinement: quadrisection for triangles, Bey octasection for
    /// tetrahedra. Returns the fine mesh and the P1 prolongation.
    pub fn refine(&self) -> Result<(SurfaceMesh, SparseOperator)> {
        match self.dim {
            2 => refine_red_2d(self),
            3 => refine_bey_3d(self),
            d => Err(Error::InvalidMesh(format!("no refinement rule for dimension {d}"))),
        }
    }

    /// Writes the mesh text format: `d nv nc`, vertex coordinates with 17
    /// significant digits, then zero-based cell vertex indices.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.dim, self.num_vertices(), self.num_cells())?;
        for i in 0..self.num_vertices() {
            let line: Vec<String> = self.vertex(i).iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for c in 0..self.num_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = || -> Result<(usize, Vec<String>)> {
            loop {
                match lines.next() {
                    Some((i, line)) => {
                        let line = line?;
                        let toks: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
                        if !toks.is_empty() {
                            return Ok((i + 1, toks));
                        }
                    }
                    None => {
                        return Err(Error::Parse {
                            line: 0,
                            message: "unexpected end of input".into(),
                        })
                    }
                }
            }
        };
        fn parse<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{s}`"),
            })
        }
        let (ln, head) = next()?;
        if head.len() != 3 {
            return Err(Error::Parse {
                line: ln,
                message: "header must be `d nv nc`".into(),
            });
        }
        let d: usize = parse(ln, &head[0])?;
        let nv: usize = parse(ln, &head[1])?;
        let nc: usize = parse(ln, &head[2])?;
        let mut vertices = Vec::with_capacity(nv * (d + 1));
        for _ in 0..nv {
            let (ln, toks) = next()?;
            if toks.len() != d + 1 {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("expected {} coordinates", d + 1),
                });
            }
            for t in &toks {
                vertices.push(parse::<f64>(ln, t)?);
            }
        }
        let mut cells = Vec::with_capacity(nc * (d + 1));
        for _ in 0..nc {
            let (ln, toks) = next()?;
            if toks.len() != d + 1 {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("expected {} vertex indices", d + 1),
                });
            }
            for t in &toks {
                cells.push(parse::<usize>(ln, t)?);
            }
        }
        SurfaceMesh::new(d, vertices, cells)
    }
}

/// Assigns midpoint vertices to edges; new vertices follow the old ones.
struct MidpointTable<'a> {
    mesh: &'a SurfaceMesh,
    index: HashMap<(usize, usize), usize>,
    vertices: Vec<f64>,
    prolongation: Vec<(usize, usize, f64)>,
    nv_fine: usize,
}

impl<'a> MidpointTable<'a> {
    fn new(mesh: &'a SurfaceMesh) -> Self {
        let nv = mesh.num_vertices();
        Self {
            mesh,
            index: HashMap::new(),
            vertices: mesh.vertices.clone(),
            prolongation: (0..nv).map(|i| (i, i, 1.0)).collect(),
            nv_fine: nv,
        }
    }

    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = self.index.get(&key) {
            return m;
        }
        let m = self.nv_fine;
        self.nv_fine += 1;
        for k in 0..self.mesh.ambient_dim() {
            let x = 0.5 * (self.mesh.vertex(a)[k] + self.mesh.vertex(b)[k]);
            self.vertices.push(x);
        }
        self.prolongation.push((m, key.0, 0.5));
        self.prolongation.push((m, key.1, 0.5));
        self.index.insert(key, m);
        m
    }

    fn finish(self, cells: Vec<usize>) -> Result<(SurfaceMesh, SparseOperator)> {
        let p = SparseOperator::from_triplets(self.nv_fine, self.mesh.num_vertices(), self.prolongation);
        let mesh = SurfaceMesh::build(self.mesh.dim, self.vertices, cells, self.mesh.closed)?;
        Ok((mesh, p))
    }
}

fn check_manifold(mesh: &SurfaceMesh) -> Result<()> {
    if mesh.closed && !mesh.is_closed() {
        let f = mesh.facets.iter().find(|f| f.minus.is_none()).unwrap();
        return Err(Error::NonManifold {
            facet: f.vertices.clone(),
            count: 1,
        });
    }
    Ok(())
}

/// Splits every triangle into four through its edge midpoints. Children keep
/// the parent's orientation.
pub fn refine_red_2d(mesh: &SurfaceMesh) -> Result<(SurfaceMesh, SparseOperator)> {
    if mesh.dim != 2 {
        return Err(Error::InvalidMesh(format!(
            "quadrisection needs d = 2, got {}",
            mesh.dim
        )));
    }
    check_manifold(mesh)?;
    let mut table = MidpointTable::new(mesh);
    let mut cells = Vec::with_capacity(4 * mesh.cells.len());
    for c in 0..mesh.num_cells() {
        let [a, b, c2] = [mesh.cell(c)[0], mesh.cell(c)[1], mesh.cell(c)[2]];
        let ab = table.midpoint(a, b);
        let bc = table.midpoint(b, c2);
        let ca = table.midpoint(c2, a);
        cells.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, c2, ab, bc, ca]);
    }
    table.finish(cells)
}

/// Bey's octasection of tetrahedra. With local order `(x0, x1, x2, x3)` the
/// children are the four corner tetrahedra and four tetrahedra around the
/// `x02 - x13` diagonal of the inner octahedron, listed in Bey's order so
/// that repeated refinement produces at most three similarity classes.
pub fn refine_bey_3d(mesh: &SurfaceMesh) -> Result<(SurfaceMesh, SparseOperator)> {
    if mesh.dim != 3 {
        return Err(Error::InvalidMesh(format!("octasection needs d = 3, got {}", mesh.dim)));
    }
    check_manifold(mesh)?;
    let mut table = MidpointTable::new(mesh);
    let mut cells = Vec::with_capacity(8 * mesh.cells.len());
    for c in 0..mesh.num_cells() {
        let x = mesh.cell(c).to_vec();
        let x01 = table.midpoint(x[0], x[1]);
        let x02 = table.midpoint(x[0], x[2]);
        let x03 = table.midpoint(x[0], x[3]);
        let x12 = table.midpoint(x[1], x[2]);
        let x13 = table.midpoint(x[1], x[3]);
        let x23 = table.midpoint(x[2], x[3]);
        cells.extend_from_slice(&[
            x[0], x01, x02, x03, //
            x01, x[1], x12, x13, //
            x02, x12, x[2], x23, //
            x03, x13, x23, x[3], //
            x01, x02, x03, x13, //
            x01, x02, x12, x13, //
            x02, x03, x13, x23, //
            x02, x12, x13, x23,
        ]);
    }
    table.finish(cells)
}

/// Initial torus triangulation: a 16 x 6 grid in the major and minor angles,
/// each quad cut into two triangles, 96 vertices and 192 cells, all on the
/// torus.
pub fn initial_mesh_torus() -> SurfaceMesh {
    initial_mesh_torus_with(ImplicitSurface::STANDARD_TORUS, 16, 6)
}

pub fn initial_mesh_torus_with(surface: ImplicitSurface, n_major: usize, n_minor: usize) -> SurfaceMesh {
    let (major, minor) = match surface {
        ImplicitSurface::Torus { major, minor } => (major, minor),
        _ => panic!("initial_mesh_torus_with needs a torus"),
    };
    let tau = 2.0 * std::f64::consts::PI;
    let mut vertices = Vec::with_capacity(3 * n_major * n_minor);
    for i in 0..n_major {
        let theta = tau * i as f64 / n_major as f64;
        for j in 0..n_minor {
            let phi = tau * j as f64 / n_minor as f64;
            let ring = major + minor * phi.cos();
            let x = [ring * theta.cos(), ring * theta.sin(), minor * phi.sin()];
            let p = surface.closest_point(&x).expect("grid point near the torus");
            vertices.extend_from_slice(&p);
        }
    }
    let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut cells = Vec::with_capacity(6 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    SurfaceMesh::new(2, vertices, cells).expect("torus grid is a closed manifold")
}

/// Octahedron triangulation of the unit sphere in R^3 (6 vertices, 8 cells).
pub fn initial_mesh_sphere2() -> SurfaceMesh {
    let vertices = vec![
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, //
        0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0,
    ];
    let cells = vec![
        0, 1, 4, 1, 2, 4, 2, 3, 4, 3, 0, 4, //
        1, 0, 5, 2, 1, 5, 3, 2, 5, 0, 3, 5,
    ];
    SurfaceMesh::new(2, vertices, cells).expect("octahedron is closed")
}

/// The 16 tetrahedra on the eight unit coordinate vectors of R^4.
pub fn initial_mesh_s3() -> SurfaceMesh {
    // p1..p8 = e1, e2, -e1, -e2, e3, -e3, e4, -e4
    let points: [[f64; 4]; 8] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, -1.0],
    ];
    let one_based: [[usize; 4]; 16] = [
        [1, 2, 5, 7],
        [3, 5, 2, 7],
        [3, 4, 5, 7],
        [1, 5, 4, 7],
        [1, 6, 2, 7],
        [3, 2, 6, 7],
        [3, 6, 4, 7],
        [1, 4, 6, 7],
        [8, 1, 2, 5],
        [8, 3, 5, 2],
        [8, 3, 4, 5],
        [8, 1, 5, 4],
        [8, 1, 6, 2],
        [8, 3, 2, 6],
        [8, 3, 6, 4],
        [8, 1, 4, 6],
    ];
    let vertices = points.iter().flatten().copied().collect();
    let cells = one_based.iter().flatten().map(|v| v - 1).collect();
    SurfaceMesh::new(3, vertices, cells).expect("cross-polytope boundary is closed")
}

/// Nested reference meshes on the polyhedral surface `M0`, their projections
/// onto the true surface, and the level-to-level P1 prolongations.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    surface: ImplicitSurface,
    reference: Vec<SurfaceMesh>,
    projected: Vec<SurfaceMesh>,
    prolongations: Vec<SparseOperator>,
}

impl MeshHierarchy {
    pub fn surface(&self) -> ImplicitSurface {
        self.surface
    }

    /// Number of meshes (`refinements + 1`).
    pub fn num_levels(&self) -> usize {
        self.reference.len()
    }

    pub fn finest(&self) -> usize {
        self.reference.len() - 1
    }

    pub fn reference(&self, level: usize) -> &SurfaceMesh {
        &self.reference[level]
    }

    pub fn true_mesh(&self, level: usize) -> &SurfaceMesh {
        &self.projected[level]
    }

    /// Prolongation from `level` to `level + 1`.
    pub fn prolongation(&self, level: usize) -> &SparseOperator {
        &self.prolongations[level]
    }

    /// The hierarchy truncated to levels `0..=level`.
    pub fn truncated(&self, level: usize) -> MeshHierarchy {
        MeshHierarchy {
            surface: self.surface,
            reference: self.reference[..=level].to_vec(),
            projected: self.projected[..=level].to_vec(),
            prolongations: self.prolongations[..level].to_vec(),
        }
    }
}

/// Refines `initial` (a mesh of the polyhedral reference surface) `refinements`
/// times without moving vertices, and projects every reference vertex onto
/// `surface` to obtain the true meshes.
pub fn build_hierarchy(surface: ImplicitSurface, initial: SurfaceMesh, refinements: usize) -> Result<MeshHierarchy> {
    if initial.dim() != surface.dim() {
        return Err(Error::DimensionMismatch {
            expected: surface.dim(),
            found: initial.dim(),
        });
    }
    let mut reference = vec![initial];
    let mut prolongations = Vec::with_capacity(refinements);
    for _ in 0..refinements {
        let (fine, p) = reference.last().unwrap().refine()?;
        reference.push(fine);
        prolongations.push(p);
    }
    let projected = reference
        .iter()
        .map(|mesh| project_mesh(surface, mesh))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeshHierarchy {
        surface,
        reference,
        projected,
        prolongations,
    })
}

/// Moves every vertex to its closest point on `surface`.
pub fn project_mesh(surface: ImplicitSurface, mesh: &SurfaceMesh) -> Result<SurfaceMesh> {
    let mut coords = Vec::with_capacity(mesh.vertex_coords().len());
    for v in 0..mesh.num_vertices() {
        let p = surface
            .closest_point(mesh.vertex(v))
            .map_err(|e| Error::VertexProjection {
                vertex: v,
                reason: e.to_string(),
            })?;
        coords.extend_from_slice(&p);
    }
    mesh.with_vertices(coords)
}
