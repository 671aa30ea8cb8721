//! Sparse transfer operators between discrete spaces: level prolongations,
//! the conforming inclusions into CR and DG, nodal averaging, and the
//! surface transfer between reference and true meshes.

use crate::error::{Error, Result};
use crate::linalg::{SparseOperator, TripletBuilder};
use crate::mesh::{MeshHierarchy, SurfaceMesh};

/// A sparse map from a source space to a target space (`target x source`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    matrix: SparseOperator,
}

impl TransferOperator {
    pub fn new(matrix: SparseOperator) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(SparseOperator::identity(n))
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn into_matrix(self) -> SparseOperator {
        self.matrix
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.matrix.spmv(v)
    }

    /// Applies the transpose (restriction of dual vectors).
    pub fn restrict(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.matrix.spmv_transpose(r)
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &TransferOperator) -> Result<TransferOperator> {
        Ok(Self::new(self.matrix.matmul(&first.matrix)?))
    }

    pub fn transpose(&self) -> TransferOperator {
        Self::new(self.matrix.transpose())
    }
}

/// `Π_h v = v ∘ Φ_h⁻¹`: reference and true meshes share their vertex
/// numbering, so in nodal bases this is the identity.
pub fn surface_transfer_p1(hierarchy: &MeshHierarchy, level: usize) -> Result<TransferOperator> {
    if level >= hierarchy.num_levels() {
        return Err(Error::InvalidArgument(format!("level {level} out of range")));
    }
    Ok(TransferOperator::identity(hierarchy.true_mesh(level).num_vertices()))
}

/// Conforming P1 functions viewed as CR functions: facet `e` takes the mean
/// of the P1 values at its vertices.
pub fn inclusion_cr(mesh: &SurfaceMesh) -> TransferOperator {
    let w = 1.0 / mesh.dim() as f64;
    let mut b = TripletBuilder::new(mesh.num_facets(), mesh.num_vertices());
    for (f, facet) in mesh.facets().iter().enumerate() {
        for &v in &facet.vertices {
            b.push(f, v, w);
        }
    }
    TransferOperator::new(b.build())
}

/// Conforming P1 functions viewed as DG functions: every cell-local dof copies
/// its vertex value.
pub fn inclusion_dg(mesh: &SurfaceMesh) -> TransferOperator {
    let n = mesh.dim() + 1;
    let mut b = TripletBuilder::new(n * mesh.num_cells(), mesh.num_vertices());
    for c in 0..mesh.num_cells() {
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            b.push(c * n + k, v, 1.0);
        }
    }
    TransferOperator::new(b.build())
}

/// Nodal averaging from DG to P1: the value at vertex `z` is the plain average
/// of the `N_z` cell-local values at `z`.
pub fn nodal_averaging(mesh: &SurfaceMesh) -> Result<TransferOperator> {
    let n = mesh.dim() + 1;
    let counts = mesh.vertex_cell_counts();
    if let Some(z) = counts.iter().position(|&c| c == 0) {
        return Err(Error::IsolatedVertex(z));
    }
    let mut b = TripletBuilder::new(mesh.num_vertices(), n * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            b.push(v, c * n + k, 1.0 / counts[v] as f64);
        }
    }
    Ok(TransferOperator::new(b.build()))
}

/// Product of the prolongations from level `from` up to level `to`.
pub fn prolongation_chain(hierarchy: &MeshHierarchy, from: usize, to: usize) -> Result<TransferOperator> {
    if from > to || to >= hierarchy.num_levels() {
        return Err(Error::InvalidArgument(format!(
            "bad level range {from}..{to} for {} levels",
            hierarchy.num_levels()
        )));
    }
    let mut p = SparseOperator::identity(hierarchy.reference(from).num_vertices());
    for j in from..to {
        p = hierarchy.prolongation(j).matmul(&p)?;
    }
    Ok(TransferOperator::new(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ImplicitSurface;
    use crate::mesh::{build_hierarchy, initial_mesh_torus};
    use approx::assert_abs_diff_eq;

    fn triangle() -> SurfaceMesh {
        SurfaceMesh::with_boundary(2, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0], vec![0, 1, 2]).unwrap()
    }

    #[test]
    fn cr_inclusion_rows() {
        let m = triangle();
        let i = inclusion_cr(&m);
        let f = m.facets().iter().position(|f| f.vertices == vec![0, 1]).unwrap();
        assert_eq!(i.matrix().to_dense()[f], vec![0.5, 0.5, 0.0]);
        let torus = initial_mesh_torus();
        let ones = inclusion_cr(&torus).apply(&vec![1.0; 96]).unwrap();
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn averaging_inverts_dg_inclusion() {
        let m = initial_mesh_torus();
        let avg = nodal_averaging(&m).unwrap();
        let inc = inclusion_dg(&m);
        let id = avg.compose(&inc).unwrap();
        let dense = id.matrix().to_dense();
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
        assert!(avg.matrix().row_sums().iter().all(|s| (s - 1.0).abs() < 1e-14));
        let dg_one = inc.apply(&vec![1.0; 96]).unwrap();
        assert!(dg_one.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn isolated_vertex_rejected() {
        let m = SurfaceMesh::with_boundary(
            2,
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 5.0, 5.0, 5.0],
            vec![0, 1, 2],
        )
        .unwrap();
        assert!(matches!(nodal_averaging(&m), Err(Error::IsolatedVertex(3))));
    }

    #[test]
    fn chains_compose() {
        let h = build_hierarchy(ImplicitSurface::STANDARD_TORUS, initial_mesh_torus(), 2).unwrap();
        let same = prolongation_chain(&h, 1, 1).unwrap();
        assert_eq!(same.matrix(), &SparseOperator::identity(h.reference(1).num_vertices()));
        let p02 = prolongation_chain(&h, 0, 2).unwrap();
        let p01 = prolongation_chain(&h, 0, 1).unwrap();
        let p12 = prolongation_chain(&h, 1, 2).unwrap();
        let prod = p12.compose(&p01).unwrap();
        assert!(p02.matrix().add_scaled(prod.matrix(), -1.0).unwrap().max_abs() == 0.0);
        assert!(p02.matrix().row_sums().iter().all(|s| (s - 1.0).abs() < 1e-15));
        assert!(prolongation_chain(&h, 2, 1).is_err());
        assert!(prolongation_chain(&h, 0, 3).is_err());
    }

    #[test]
    fn surface_transfer_is_identity() {
        let h = build_hierarchy(ImplicitSurface::STANDARD_TORUS, initial_mesh_torus(), 1).unwrap();
        let pi = surface_transfer_p1(&h, 1).unwrap();
        assert_eq!(pi.matrix(), &SparseOperator::identity(384));
        assert_eq!(pi.transpose(), pi);
        assert_eq!(pi.compose(&pi.transpose()).unwrap(), pi);
    }
}
