//! Element assembly of the P1, Crouzeix-Raviart and symmetric interior
//! penalty DG forms of `-Δu + cu` on a piecewise flat surface mesh.

use crate::error::{Error, Result};
use crate::geometry::ImplicitSurface;
use crate::linalg::{DenseFactorization, SparseOperator, TripletBuilder};
use crate::mesh::SurfaceMesh;
use crate::simplex::{simplex_geometry, QuadratureRule, SimplexGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Discretization {
    /// Continuous piecewise linears, one dof per vertex.
    P1,
    /// Crouzeix-Raviart, one dof per facet (value at the facet barycenter).
    Cr,
    /// Discontinuous piecewise linears, `d + 1` cell-local dofs per cell.
    Dg,
}

impl Discretization {
    pub fn name(&self) -> &'static str {
        match self {
            Discretization::P1 => "p1",
            Discretization::Cr => "cr",
            Discretization::Dg => "dg",
        }
    }

    /// Default interior-penalty parameter for a surface of dimension `dim`.
    pub fn default_alpha(dim: usize) -> f64 {
        if dim <= 2 {
            10.0
        } else {
            20.0
        }
    }
}

/// Local-to-global dof numbering. Local dof `k` of a cell is tied to local
/// vertex `k`: the vertex itself (P1, DG) or the facet opposite it (CR).
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    kind: Discretization,
    dim: usize,
    num_dofs: usize,
    cell_dofs: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &SurfaceMesh, kind: Discretization) -> Self {
        let n = mesh.dim() + 1;
        let nc = mesh.num_cells();
        let (num_dofs, cell_dofs) = match kind {
            Discretization::P1 => (
                mesh.num_vertices(),
                (0..nc).flat_map(|c| mesh.cell(c).to_vec()).collect(),
            ),
            Discretization::Cr => (
                mesh.num_facets(),
                (0..nc).flat_map(|c| mesh.cell_facets(c).to_vec()).collect(),
            ),
            Discretization::Dg => (n * nc, (0..n * nc).collect()),
        };
        Self {
            kind,
            dim: mesh.dim(),
            num_dofs,
            cell_dofs,
        }
    }

    pub fn kind(&self) -> Discretization {
        self.kind
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cell_dofs[c * n..(c + 1) * n]
    }

    /// Values of the local basis functions at a barycentric point.
    pub fn basis_values(&self, bary: &[f64]) -> Vec<f64> {
        match self.kind {
            Discretization::P1 | Discretization::Dg => bary.to_vec(),
            Discretization::Cr => bary.iter().map(|l| 1.0 - self.dim as f64 * l).collect(),
        }
    }

    /// Tangential gradients of the local basis functions on a cell.
    pub fn basis_grads(&self, geom: &SimplexGeometry) -> Vec<Vec<f64>> {
        match self.kind {
            Discretization::P1 | Discretization::Dg => geom.grads.clone(),
            Discretization::Cr => {
                let s = -(self.dim as f64);
                geom.grads.iter().map(|g| g.iter().map(|v| s * v).collect()).collect()
            }
        }
    }

    /// Exact local mass matrix entry `∫ φ_k φ_l / |T|`.
    fn mass_factor(&self, k: usize, l: usize) -> f64 {
        let d = self.dim as f64;
        let lam = (1.0 + if k == l { 1.0 } else { 0.0 }) / ((d + 1.0) * (d + 2.0));
        match self.kind {
            Discretization::P1 | Discretization::Dg => lam,
            Discretization::Cr => 1.0 - 2.0 * d / (d + 1.0) + d * d * lam,
        }
    }
}

fn cell_geometry(mesh: &SurfaceMesh, c: usize) -> Result<SimplexGeometry> {
    simplex_geometry(&mesh.cell_points(c)).ok_or(Error::DegenerateCell(c))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Broken stiffness plus `c` times mass, cell by cell.
fn assemble_cellwise(mesh: &SurfaceMesh, dofmap: &DofMap, stiffness: f64, c: f64) -> Result<TripletBuilder> {
    let n = mesh.dim() + 1;
    let nd = dofmap.num_dofs();
    let mut b = TripletBuilder::with_capacity(nd, nd, mesh.num_cells() * n * n);
    for cell in 0..mesh.num_cells() {
        let geom = cell_geometry(mesh, cell)?;
        let grads = dofmap.basis_grads(&geom);
        let dofs = dofmap.cell_dofs(cell);
        for k in 0..n {
            for l in 0..n {
                let v =
                    stiffness * geom.volume * dot(&grads[k], &grads[l]) + c * geom.volume * dofmap.mass_factor(k, l);
                b.push(dofs[k], dofs[l], v);
            }
        }
    }
    Ok(b)
}

fn check_reaction(c: f64) -> Result<()> {
    if c == 0.0 || c == 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "reaction coefficient must be 0 or 1, got {c}"
        )))
    }
}

/// Conforming P1 operator `(∇v, ∇w) + c (v, w)`.
pub fn assemble_p1(mesh: &SurfaceMesh, c: f64) -> Result<SparseOperator> {
    check_reaction(c)?;
    let dofmap = DofMap::new(mesh, Discretization::P1);
    Ok(assemble_cellwise(mesh, &dofmap, 1.0, c)?.build())
}

/// Crouzeix-Raviart operator with broken gradients.
pub fn assemble_cr(mesh: &SurfaceMesh, c: f64) -> Result<SparseOperator> {
    check_reaction(c)?;
    let dofmap = DofMap::new(mesh, Discretization::Cr);
    Ok(assemble_cellwise(mesh, &dofmap, 1.0, c)?.build())
}

/// Symmetric interior penalty operator
/// `(∇v, ∇w) - <{∂v}, [w]> - <{∂w}, [v]> + α <h⁻¹ Q[v], Q[w]> + c (v, w)`
/// where `Q` is the facet mean of the jump and `{∂v} = (∇v⁺·ν⁺ - ∇v⁻·ν⁻)/2`
/// with `ν±` the outward unit conormals of the two cells.
pub fn assemble_dg(mesh: &SurfaceMesh, c: f64, alpha: f64) -> Result<SparseOperator> {
    check_reaction(c)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty alpha must be positive, got {alpha}"
        )));
    }
    let d = mesh.dim();
    let n = d + 1;
    let dofmap = DofMap::new(mesh, Discretization::Dg);
    let mut b = assemble_cellwise(mesh, &dofmap, 1.0, c)?;
    let geoms = (0..mesh.num_cells())
        .map(|cell| cell_geometry(mesh, cell))
        .collect::<Result<Vec<_>>>()?;
    let mut flux = vec![0.0; 2 * n];
    let mut jump = vec![0.0; 2 * n];
    for (f, facet) in mesh.facets().iter().enumerate() {
        let Some(minus) = facet.minus else { continue };
        let area = mesh.facet_volume(f);
        let h = mesh.facet_diameter(f);
        if !(area > 0.0) || !(h > 0.0) {
            return Err(Error::DegenerateFacet(f));
        }
        for (side, s, sign) in [(facet.plus, 0, 1.0), (minus, n, -1.0)] {
            let g = &geoms[side.cell].grads;
            let inward = &g[side.local];
            let len = dot(inward, inward).sqrt();
            for i in 0..n {
                // outward conormal is -∇λ_local / |∇λ_local|
                flux[s + i] = -0.5 * sign * dot(&g[i], inward) / len;
                jump[s + i] = if i == side.local { 0.0 } else { sign / d as f64 };
            }
        }
        let dofs: Vec<usize> = dofmap
            .cell_dofs(facet.plus.cell)
            .iter()
            .chain(dofmap.cell_dofs(minus.cell))
            .copied()
            .collect();
        let penalty = alpha * area / h;
        for i in 0..2 * n {
            for j in 0..2 * n {
                let v = -area * (flux[i] * jump[j] + jump[i] * flux[j]) + penalty * jump[i] * jump[j];
                if v != 0.0 {
                    b.push(dofs[i], dofs[j], v);
                }
            }
        }
    }
    Ok(b.build())
}

/// Exact mass matrix for the given discretization.
pub fn assemble_mass(mesh: &SurfaceMesh, dofmap: &DofMap) -> Result<SparseOperator> {
    Ok(assemble_cellwise(mesh, dofmap, 0.0, 1.0)?.build())
}

/// Operator for `kind` with reaction `c` (`alpha` only used by DG).
pub fn assemble_operator(mesh: &SurfaceMesh, kind: Discretization, c: f64, alpha: f64) -> Result<SparseOperator> {
    match kind {
        Discretization::P1 => assemble_p1(mesh, c),
        Discretization::Cr => assemble_cr(mesh, c),
        Discretization::Dg => assemble_dg(mesh, c, alpha),
    }
}

/// How the load functional `∫ f φ_i` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadRule {
    /// Degree-2 rule on each cell with `f` evaluated at the closest point
    /// on the surface.
    #[default]
    Projected,
    /// One-point rule at the cell barycenter with `f` evaluated there, off
    /// the surface; `f` must be defined in a neighborhood (e.g. through its
    /// ambient formula).
    Centroid,
}

/// Load vector `b_i = ∫ (f∘Φ) φ_i` by a degree-2 rule. With `c = 0` the
/// constant component is removed, `b ← b - (1ᵀb / 1ᵀM1) M1`, so the discrete
/// problem is compatible.
pub fn assemble_load<F>(mesh: &SurfaceMesh, dofmap: &DofMap, f: F, surface: ImplicitSurface, c: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    assemble_load_with(mesh, dofmap, f, surface, c, LoadRule::Projected)
}

/// [`assemble_load`] with an explicit quadrature convention.
pub fn assemble_load_with<F>(
    mesh: &SurfaceMesh,
    dofmap: &DofMap,
    f: F,
    surface: ImplicitSurface,
    c: f64,
    rule: LoadRule,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    check_reaction(c)?;
    let d = mesh.dim();
    let amb = mesh.ambient_dim();
    let quad = match rule {
        LoadRule::Projected => QuadratureRule::new(d, 2),
        LoadRule::Centroid => QuadratureRule::new(d, 1),
    };
    let mut b = vec![0.0; dofmap.num_dofs()];
    let mut x = vec![0.0; amb];
    for cell in 0..mesh.num_cells() {
        let pts = mesh.cell_points(cell);
        let vol = mesh.cell_volume(cell);
        if !(vol > 0.0) {
            return Err(Error::DegenerateCell(cell));
        }
        let dofs = dofmap.cell_dofs(cell);
        for (bary, w) in quad.points.iter().zip(&quad.weights) {
            x.iter_mut().for_each(|v| *v = 0.0);
            for (l, p) in bary.iter().zip(&pts) {
                for k in 0..amb {
                    x[k] += l * p[k];
                }
            }
            let fx = match rule {
                LoadRule::Projected => f(&surface.closest_point(&x)?),
                LoadRule::Centroid => f(&x),
            };
            let phi = dofmap.basis_values(bary);
            for (dof, ph) in dofs.iter().zip(&phi) {
                b[*dof] += vol * w * fx * ph;
            }
        }
    }
    if c == 0.0 {
        let mass = assemble_mass(mesh, dofmap)?;
        remove_constant_component(&mut b, &mass);
    }
    Ok(b)
}

/// `b ← b - (1ᵀb / 1ᵀM1) M1`.
pub fn remove_constant_component(b: &mut [f64], mass: &SparseOperator) {
    let m1 = mass.row_sums();
    let s = b.iter().sum::<f64>() / m1.iter().sum::<f64>();
    for (bi, mi) in b.iter_mut().zip(&m1) {
        *bi -= s * mi;
    }
}

/// Everything needed to solve one discrete problem.
#[derive(Debug, Clone)]
pub struct AssembledProblem {
    pub matrix: SparseOperator,
    pub mass: SparseOperator,
    pub load: Vec<f64>,
    pub c: f64,
    /// The constant vector when `c = 0`.
    pub kernel: Option<Vec<f64>>,
    pub dofmap: DofMap,
}

impl AssembledProblem {
    pub fn new<F>(
        mesh: &SurfaceMesh,
        kind: Discretization,
        c: f64,
        alpha: f64,
        f: F,
        surface: ImplicitSurface,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        Self::with_load_rule(mesh, kind, c, alpha, f, surface, LoadRule::Projected)
    }

    pub fn with_load_rule<F>(
        mesh: &SurfaceMesh,
        kind: Discretization,
        c: f64,
        alpha: f64,
        f: F,
        surface: ImplicitSurface,
        rule: LoadRule,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let dofmap = DofMap::new(mesh, kind);
        let matrix = assemble_operator(mesh, kind, c, alpha)?;
        let mass = assemble_mass(mesh, &dofmap)?;
        let load = assemble_load_with(mesh, &dofmap, f, surface, c, rule)?;
        let kernel = (c == 0.0).then(|| vec![1.0; dofmap.num_dofs()]);
        Ok(Self {
            matrix,
            mass,
            load,
            c,
            kernel,
            dofmap,
        })
    }
}

/// Rejects an `alpha` for which the `c = 0` DG operator on `mesh` is not
/// positive semi-definite with the constants as its only kernel.
pub fn check_dg_coercivity(mesh: &SurfaceMesh, alpha: f64) -> Result<()> {
    let a = assemble_dg(mesh, 0.0, alpha)?;
    let ones = vec![1.0; a.nrows()];
    DenseFactorization::new(&a, Some(&ones))
        .map(|_| ())
        .map_err(|_| Error::NotCoercive { alpha })
}
