//! Preconditioners: pointwise smoothers, the additive (BPX) and multiplicative
//! (V-cycle) multilevel methods on the reference hierarchy, the surface
//! auxiliary-space preconditioner built from them, and the two-level
//! preconditioners for CR and DG that use conforming P1 as auxiliary space.

use std::sync::Arc;

use crate::assembly::assemble_p1;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, DenseFactorization, SparseOperator};
use crate::mesh::MeshHierarchy;
use crate::transfer::{surface_transfer_p1, TransferOperator};

/// How a preconditioner treats the constant kernel of a semi-definite problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPolicy {
    None,
    /// Inputs are made compatible (`1ᵀr = 0`) and outputs mass-mean-free.
    ProjectMean,
}

/// A linear action `r ↦ z = B r` that is symmetric positive definite.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, r: &[f64], z: &mut [f64]);

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        self.apply_into(r, &mut z);
        z
    }

    fn kernel_policy(&self) -> KernelPolicy {
        KernelPolicy::None
    }
}

impl<P: Preconditioner + ?Sized> Preconditioner for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        (**self).apply_into(r, z)
    }
    fn kernel_policy(&self) -> KernelPolicy {
        (**self).kernel_policy()
    }
}

impl<P: Preconditioner + ?Sized> Preconditioner for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        (**self).apply_into(r, z)
    }
    fn kernel_policy(&self) -> KernelPolicy {
        (**self).kernel_policy()
    }
}

/// Sweep order of a Gauss-Seidel relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Ascending dof order, `(D + L)⁻¹`.
    Forward,
    /// Descending dof order, `(D + Lᵀ)⁻¹`.
    Backward,
}

fn checked_inverse_diagonal(a: &SparseOperator) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NonPositiveDiagonal { row, value: d })
            }
        })
        .collect()
}

/// `z_i = r_i / A_ii`.
pub fn jacobi_apply(a: &SparseOperator, r: &[f64]) -> Result<Vec<f64>> {
    let inv = checked_inverse_diagonal(a)?;
    if r.len() != inv.len() {
        return Err(Error::DimensionMismatch {
            expected: inv.len(),
            found: r.len(),
        });
    }
    Ok(r.iter().zip(&inv).map(|(x, d)| x * d).collect())
}

/// One in-place Gauss-Seidel sweep on `A x = b`.
pub fn gauss_seidel_relax(a: &SparseOperator, b: &[f64], x: &mut [f64], direction: Direction) {
    let n = a.nrows();
    let mut step = |i: usize| {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        let mut diag = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            if *c == i {
                diag = *v;
            } else {
                s -= v * x[*c];
            }
        }
        x[i] = s / diag;
    };
    match direction {
        Direction::Forward => (0..n).for_each(&mut step),
        Direction::Backward => (0..n).rev().for_each(&mut step),
    }
}

/// Solves `(D + L) z = r` (forward) or `(D + Lᵀ) z = r` (backward) by substitution.
pub fn gauss_seidel_sweep(a: &SparseOperator, r: &[f64], direction: Direction) -> Result<Vec<f64>> {
    checked_inverse_diagonal(a)?;
    if r.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: r.len(),
        });
    }
    let mut z = vec![0.0; r.len()];
    gauss_seidel_relax(a, r, &mut z, direction);
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherKind {
    Jacobi,
    ForwardGaussSeidel,
    BackwardGaussSeidel,
    SymmetricGaussSeidel,
}

/// Relaxation of `A` run `sweeps` times from a zero initial guess.
#[derive(Debug, Clone)]
pub struct Smoother {
    kind: SmootherKind,
    operator: Arc<SparseOperator>,
    inv_diag: Vec<f64>,
    sweeps: usize,
}

impl Smoother {
    pub fn new(kind: SmootherKind, operator: Arc<SparseOperator>, sweeps: usize) -> Result<Self> {
        let inv_diag = checked_inverse_diagonal(&operator)?;
        Ok(Self {
            kind,
            operator,
            inv_diag,
            sweeps: sweeps.max(1),
        })
    }

    pub fn jacobi(operator: Arc<SparseOperator>) -> Result<Self> {
        Self::new(SmootherKind::Jacobi, operator, 1)
    }

    pub fn kind(&self) -> SmootherKind {
        self.kind
    }

    /// Relaxes `A x = b` in place, starting from the given `x`.
    pub fn relax(&self, b: &[f64], x: &mut [f64]) {
        let a = &*self.operator;
        for _ in 0..self.sweeps {
            match self.kind {
                SmootherKind::Jacobi => {
                    let ax = a.spmv(x).expect("smoother dimensions");
                    for i in 0..x.len() {
                        x[i] += self.inv_diag[i] * (b[i] - ax[i]);
                    }
                }
                SmootherKind::ForwardGaussSeidel => gauss_seidel_relax(a, b, x, Direction::Forward),
                SmootherKind::BackwardGaussSeidel => gauss_seidel_relax(a, b, x, Direction::Backward),
                SmootherKind::SymmetricGaussSeidel => {
                    gauss_seidel_relax(a, b, x, Direction::Forward);
                    gauss_seidel_relax(a, b, x, Direction::Backward);
                }
            }
        }
    }
}

impl Preconditioner for Smoother {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.relax(r, z);
    }
}

/// The zero map; a placeholder coarse space.
#[derive(Debug, Clone)]
pub struct ZeroMap(pub usize);

impl Preconditioner for ZeroMap {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_into(&self, _r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Exact inverse through a dense factorization (small problems only).
#[derive(Debug, Clone)]
pub struct ExactInverse {
    factor: DenseFactorization,
}

impl ExactInverse {
    pub fn new(a: &SparseOperator, kernel: Option<&[f64]>) -> Result<Self> {
        Ok(Self {
            factor: DenseFactorization::new(a, kernel)?,
        })
    }
}

impl Preconditioner for ExactInverse {
    fn dim(&self) -> usize {
        self.factor.dim()
    }
    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.factor.solve(r));
    }
}

/// Per-level SPD operators on a nested P1 hierarchy with an exact coarsest solve.
#[derive(Debug, Clone)]
pub struct Multilevel {
    operators: Vec<SparseOperator>,
    prolongations: Vec<SparseOperator>,
    inv_diag: Vec<Vec<f64>>,
    coarse: DenseFactorization,
}

impl Multilevel {
    /// `operators[j]` acts on level `j`; `prolongations[j]` maps level `j` to `j + 1`.
    pub fn new(operators: Vec<SparseOperator>, prolongations: Vec<SparseOperator>) -> Result<Self> {
        if operators.is_empty() || prolongations.len() + 1 != operators.len() {
            return Err(Error::InvalidArgument(format!(
                "{} operators need {} prolongations, got {}",
                operators.len(),
                operators.len().saturating_sub(1),
                prolongations.len()
            )));
        }
        for (j, p) in prolongations.iter().enumerate() {
            if p.ncols() != operators[j].nrows() || p.nrows() != operators[j + 1].nrows() {
                return Err(Error::DimensionMismatch {
                    expected: operators[j + 1].nrows(),
                    found: p.nrows(),
                });
            }
        }
        let inv_diag = operators.iter().map(checked_inverse_diagonal).collect::<Result<_>>()?;
        let coarse = DenseFactorization::new(&operators[0], None)?;
        Ok(Self {
            operators,
            prolongations,
            inv_diag,
            coarse,
        })
    }

    /// The auxiliary operators `(∇v, ∇w) + (v, w)` assembled directly on
    /// every reference mesh of the hierarchy. These are SPD regardless of the
    /// reaction coefficient of the target problem.
    pub fn reference_p1(hierarchy: &MeshHierarchy) -> Result<Self> {
        let operators = (0..hierarchy.num_levels())
            .map(|j| assemble_p1(hierarchy.reference(j), 1.0))
            .collect::<Result<Vec<_>>>()?;
        let prolongations = (0..hierarchy.finest())
            .map(|j| hierarchy.prolongation(j).clone())
            .collect();
        Self::new(operators, prolongations)
    }

    pub fn num_levels(&self) -> usize {
        self.operators.len()
    }

    pub fn operator(&self, level: usize) -> &SparseOperator {
        &self.operators[level]
    }

    pub fn fine_dim(&self) -> usize {
        self.operators.last().unwrap().nrows()
    }

    /// Additive multilevel action
    /// `z = Σ_{j≥1} P_j D_j⁻¹ P_jᵀ r + P_0 A_0⁻¹ P_0ᵀ r`
    /// with `P_j` the prolongation from level `j` to the finest level.
    pub fn bpx(&self, r: &[f64]) -> Vec<f64> {
        let top = self.num_levels() - 1;
        let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); top + 1];
        residuals[top] = r.to_vec();
        for j in (0..top).rev() {
            let mut rc = vec![0.0; self.operators[j].nrows()];
            self.prolongations[j].spmv_transpose_into(&residuals[j + 1], &mut rc);
            residuals[j] = rc;
        }
        let mut z = self.coarse.solve(&residuals[0]);
        for j in 1..=top {
            let mut zf = vec![0.0; self.operators[j].nrows()];
            self.prolongations[j - 1].spmv_into(&z, &mut zf);
            for ((zi, ri), di) in zf.iter_mut().zip(&residuals[j]).zip(&self.inv_diag[j]) {
                *zi += ri * di;
            }
            z = zf;
        }
        z
    }

    /// One symmetric V-cycle from a zero initial guess: `steps` forward
    /// Gauss-Seidel sweeps on the way down, exact solve on level 0, `steps`
    /// backward sweeps on the way up.
    pub fn vcycle(&self, r: &[f64], steps: usize) -> Vec<f64> {
        self.vcycle_level(self.num_levels() - 1, r, steps)
    }

    fn vcycle_level(&self, level: usize, r: &[f64], steps: usize) -> Vec<f64> {
        if level == 0 {
            return self.coarse.solve(r);
        }
        let a = &self.operators[level];
        let p = &self.prolongations[level - 1];
        let mut e = vec![0.0; r.len()];
        for _ in 0..steps {
            gauss_seidel_relax(a, r, &mut e, Direction::Forward);
        }
        let mut res = vec![0.0; r.len()];
        a.spmv_into(&e, &mut res);
        for (ri, bi) in res.iter_mut().zip(r) {
            *ri = bi - *ri;
        }
        let mut rc = vec![0.0; p.ncols()];
        p.spmv_transpose_into(&res, &mut rc);
        let ec = self.vcycle_level(level - 1, &rc, steps);
        let mut corr = vec![0.0; r.len()];
        p.spmv_into(&ec, &mut corr);
        axpy(1.0, &corr, &mut e);
        for _ in 0..steps {
            gauss_seidel_relax(a, r, &mut e, Direction::Backward);
        }
        e
    }
}

/// Convenience wrapper for [`Multilevel::bpx`] on the given per-level operators.
pub fn bpx_apply(hierarchy: &MeshHierarchy, operators: Vec<SparseOperator>, r: &[f64]) -> Result<Vec<f64>> {
    let prolongations = (0..hierarchy.finest())
        .map(|j| hierarchy.prolongation(j).clone())
        .collect();
    let ml = Multilevel::new(operators, prolongations)?;
    check_len(ml.fine_dim(), r)?;
    Ok(ml.bpx(r))
}

/// Convenience wrapper for [`Multilevel::vcycle`] on the given per-level operators.
pub fn vcycle_apply(
    hierarchy: &MeshHierarchy,
    operators: Vec<SparseOperator>,
    r: &[f64],
    smoothing_steps: usize,
) -> Result<Vec<f64>> {
    let prolongations = (0..hierarchy.finest())
        .map(|j| hierarchy.prolongation(j).clone())
        .collect();
    let ml = Multilevel::new(operators, prolongations)?;
    check_len(ml.fine_dim(), r)?;
    Ok(ml.vcycle(r, smoothing_steps))
}

fn check_len(n: usize, r: &[f64]) -> Result<()> {
    if n == r.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: n,
            found: r.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultilevelKind {
    /// BPX-type additive preconditioner.
    Additive,
    /// Symmetrized successive subspace correction (V-cycle).
    Multiplicative,
}

/// `B_h = Π_h B̂_h Π_hᵀ` where `B̂_h` is a multilevel preconditioner for the
/// auxiliary operator on the reference hierarchy.
#[derive(Debug, Clone)]
pub struct FaspSurface {
    kind: MultilevelKind,
    multilevel: Arc<Multilevel>,
    transfer: TransferOperator,
    smoothing_steps: usize,
}

impl FaspSurface {
    pub fn kind(&self) -> MultilevelKind {
        self.kind
    }

    pub fn multilevel(&self) -> &Multilevel {
        &self.multilevel
    }
}

impl Preconditioner for FaspSurface {
    fn dim(&self) -> usize {
        self.transfer.target_dim()
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        let mut rh = vec![0.0; self.transfer.source_dim()];
        self.transfer.matrix().spmv_transpose_into(r, &mut rh);
        let zh = match self.kind {
            MultilevelKind::Additive => self.multilevel.bpx(&rh),
            MultilevelKind::Multiplicative => self.multilevel.vcycle(&rh, self.smoothing_steps),
        };
        self.transfer.matrix().spmv_into(&zh, z);
    }
}

/// Default number of pre- and post-smoothing sweeps per level.
pub const DEFAULT_SMOOTHING_STEPS: usize = 2;

/// Sweeps per level in the surface multilevel preconditioner: one pass over
/// the point subspaces of every level on the way down and one on the way up.
pub const FASP_SMOOTHING_STEPS: usize = 1;

/// Surface preconditioner for P1 on the finest true mesh of `hierarchy`.
pub fn fasp_surface(hierarchy: &MeshHierarchy, kind: MultilevelKind) -> Result<FaspSurface> {
    let multilevel = Arc::new(Multilevel::reference_p1(hierarchy)?);
    fasp_surface_with(hierarchy, kind, multilevel, FASP_SMOOTHING_STEPS)
}

/// As [`fasp_surface`] but reusing already assembled reference operators.
pub fn fasp_surface_with(
    hierarchy: &MeshHierarchy,
    kind: MultilevelKind,
    multilevel: Arc<Multilevel>,
    smoothing_steps: usize,
) -> Result<FaspSurface> {
    let transfer = surface_transfer_p1(hierarchy, hierarchy.finest())?;
    if transfer.source_dim() != multilevel.fine_dim() {
        return Err(Error::DimensionMismatch {
            expected: transfer.source_dim(),
            found: multilevel.fine_dim(),
        });
    }
    Ok(FaspSurface {
        kind,
        multilevel,
        transfer,
        smoothing_steps,
    })
}

/// `z = S r + I B Iᵀ r` with a Jacobi smoother `S` on the fine space and an
/// auxiliary-space preconditioner `B` reached through the inclusion `I`.
pub struct TwoLevelAdditive<C: Preconditioner> {
    smoother: Smoother,
    inclusion: TransferOperator,
    coarse: C,
}

pub fn two_level_additive<C: Preconditioner>(
    a_fine: Arc<SparseOperator>,
    inclusion: TransferOperator,
    coarse: C,
) -> Result<TwoLevelAdditive<C>> {
    check_two_level(&a_fine, &inclusion, coarse.dim())?;
    Ok(TwoLevelAdditive {
        smoother: Smoother::jacobi(a_fine)?,
        inclusion,
        coarse,
    })
}

fn check_two_level(a: &SparseOperator, inclusion: &TransferOperator, coarse_dim: usize) -> Result<()> {
    if inclusion.target_dim() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: inclusion.target_dim(),
        });
    }
    if inclusion.source_dim() != coarse_dim {
        return Err(Error::DimensionMismatch {
            expected: coarse_dim,
            found: inclusion.source_dim(),
        });
    }
    Ok(())
}

impl<C: Preconditioner> Preconditioner for TwoLevelAdditive<C> {
    fn dim(&self) -> usize {
        self.inclusion.target_dim()
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        self.smoother.apply_into(r, z);
        let mut rc = vec![0.0; self.inclusion.source_dim()];
        self.inclusion.matrix().spmv_transpose_into(r, &mut rc);
        let zc = self.coarse.apply(&rc);
        let mut corr = vec![0.0; z.len()];
        self.inclusion.matrix().spmv_into(&zc, &mut corr);
        axpy(1.0, &corr, z);
    }
}

/// Two-level multiplicative method from a zero initial guess: `steps`
/// forward Gauss-Seidel sweeps, coarse correction `I B Iᵀ` on the residual,
/// then `steps` backward sweeps.
pub struct TwoLevelMultiplicative<C: Preconditioner> {
    operator: Arc<SparseOperator>,
    steps: usize,
    inclusion: TransferOperator,
    coarse: C,
}

pub fn two_level_multiplicative<C: Preconditioner>(
    a_fine: Arc<SparseOperator>,
    smoother_steps: usize,
    inclusion: TransferOperator,
    coarse: C,
) -> Result<TwoLevelMultiplicative<C>> {
    check_two_level(&a_fine, &inclusion, coarse.dim())?;
    checked_inverse_diagonal(&a_fine)?;
    Ok(TwoLevelMultiplicative {
        operator: a_fine,
        steps: smoother_steps,
        inclusion,
        coarse,
    })
}

impl<C: Preconditioner> Preconditioner for TwoLevelMultiplicative<C> {
    fn dim(&self) -> usize {
        self.operator.nrows()
    }

    fn apply_into(&self, g: &[f64], u: &mut [f64]) {
        let a = &*self.operator;
        u.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.steps {
            gauss_seidel_relax(a, g, u, Direction::Forward);
        }
        let mut res = vec![0.0; g.len()];
        a.spmv_into(u, &mut res);
        for (ri, gi) in res.iter_mut().zip(g) {
            *ri = gi - *ri;
        }
        let mut rc = vec![0.0; self.inclusion.source_dim()];
        self.inclusion.matrix().spmv_transpose_into(&res, &mut rc);
        let zc = self.coarse.apply(&rc);
        let mut corr = vec![0.0; g.len()];
        self.inclusion.matrix().spmv_into(&zc, &mut corr);
        axpy(1.0, &corr, u);
        for _ in 0..self.steps {
            gauss_seidel_relax(a, g, u, Direction::Backward);
        }
    }
}

/// `v - (kᵀ M v / kᵀ M k) k`: removes the kernel component in the
/// mass-weighted inner product.
pub fn kernel_project(v: &[f64], mass: &SparseOperator, kernel: &[f64]) -> Result<Vec<f64>> {
    let mk = mass.spmv(kernel)?;
    let kmk = dot(kernel, &mk);
    if kmk == 0.0 {
        return Err(Error::InvalidArgument("zero kernel vector".into()));
    }
    check_len(mk.len(), v)?;
    let s = dot(&mk, v) / kmk;
    let mut out = v.to_vec();
    axpy(-s, kernel, &mut out);
    Ok(out)
}

/// Keeps a preconditioner inside the quotient by the kernel `span{k}`:
/// `z = Π B Πᵀ r` with `Π v = v - (kᵀMv / kᵀMk) k`. The wrapped operator
/// stays symmetric and is positive on every direction outside the kernel.
pub struct KernelProjected<P: Preconditioner> {
    inner: P,
    kernel: Vec<f64>,
    mass_kernel: Vec<f64>,
    kmk: f64,
}

impl<P: Preconditioner> KernelProjected<P> {
    pub fn new(inner: P, mass: &SparseOperator, kernel: Vec<f64>) -> Result<Self> {
        let mass_kernel = mass.spmv(&kernel)?;
        let kmk = dot(&kernel, &mass_kernel);
        if kmk == 0.0 {
            return Err(Error::InvalidArgument("zero kernel vector".into()));
        }
        Ok(Self {
            inner,
            kernel,
            mass_kernel,
            kmk,
        })
    }
}

impl<P: Preconditioner> Preconditioner for KernelProjected<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        let mut rp = r.to_vec();
        axpy(-dot(&self.kernel, r) / self.kmk, &self.mass_kernel, &mut rp);
        self.inner.apply_into(&rp, z);
        let s = dot(&self.mass_kernel, z) / self.kmk;
        axpy(-s, &self.kernel, z);
    }

    fn kernel_policy(&self) -> KernelPolicy {
        KernelPolicy::ProjectMean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_cr, assemble_dg, assemble_mass, Discretization, DofMap};
    use crate::geometry::ImplicitSurface;
    use crate::mesh::{build_hierarchy, initial_mesh_s3, initial_mesh_torus};
    use crate::transfer::{inclusion_cr, inclusion_dg};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Randomized symmetry and positivity checks on 20 vectors.
    fn assert_spd<P: Preconditioner>(p: &P, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = p.dim();
        for _ in 0..20 {
            let r = random_vec(&mut rng, n);
            let s = random_vec(&mut rng, n);
            let (br, bs) = (p.apply(&r), p.apply(&s));
            let (a, b) = (dot(&br, &s), dot(&bs, &r));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");
            assert!(dot(&br, &r) > 0.0);
        }
    }

    #[test]
    fn jacobi_examples() {
        let a = SparseOperator::identity(3)
            .add_scaled(&SparseOperator::identity(3), 1.0)
            .unwrap();
        assert_eq!(jacobi_apply(&a, &[2.0, 4.0, -6.0]).unwrap(), vec![1.0, 2.0, -3.0]);
        let bad = SparseOperator::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(
            jacobi_apply(&bad, &[1.0, 1.0]),
            Err(Error::NonPositiveDiagonal { row: 1, .. })
        ));
    }

    #[test]
    fn gauss_seidel_examples() {
        let lower = SparseOperator::from_dense(&[vec![2.0, 0.0], vec![-1.0, 2.0]]);
        assert_eq!(
            gauss_seidel_sweep(&lower, &[2.0, 1.0], Direction::Forward).unwrap(),
            vec![1.0, 1.0]
        );
        let diag = SparseOperator::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let r = [1.0, 1.0];
        assert_eq!(
            gauss_seidel_sweep(&diag, &r, Direction::Backward).unwrap(),
            jacobi_apply(&diag, &r).unwrap()
        );
    }

    #[test]
    fn symmetric_gauss_seidel_matches_dense_composition() {
        // S̄ = Sᵗ + S - Sᵗ A S with S = (D+L)⁻¹, built column by column
        let mesh = initial_mesh_s3();
        let a = Arc::new(assemble_cr(&mesh, 1.0).unwrap());
        let n = a.nrows();
        let sym = Smoother::new(SmootherKind::SymmetricGaussSeidel, a.clone(), 1).unwrap();
        let col = |dir, j: usize| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            gauss_seidel_sweep(&a, &e, dir).unwrap()
        };
        let s: Vec<Vec<f64>> = (0..n).map(|j| col(Direction::Forward, j)).collect(); // columns of S
        let st: Vec<Vec<f64>> = (0..n).map(|j| col(Direction::Backward, j)).collect(); // columns of Sᵗ
        for j in 0..n {
            let a_s = a.spmv(&s[j]).unwrap();
            // Sᵗ (A S e_j) = Σ_k (A S e_j)_k Sᵗ e_k
            let mut expected: Vec<f64> = (0..n).map(|i| st[j][i] + s[j][i]).collect();
            for k in 0..n {
                axpy(-a_s[k], &st[k], &mut expected);
            }
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let got = sym.apply(&e);
            for i in 0..n {
                assert_abs_diff_eq!(got[i], expected[i], epsilon = 1e-12);
            }
        }
        assert_spd(&sym, 3);
    }

    fn torus_hierarchy(refinements: usize) -> MeshHierarchy {
        build_hierarchy(ImplicitSurface::STANDARD_TORUS, initial_mesh_torus(), refinements).unwrap()
    }

    #[test]
    fn single_level_multilevel_is_exact_solve() {
        let h = torus_hierarchy(0);
        let ml = Multilevel::reference_p1(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_vec(&mut rng, 96);
        let exact = DenseFactorization::new(ml.operator(0), None).unwrap().solve(&r);
        for z in [ml.bpx(&r), ml.vcycle(&r, 2)] {
            for i in 0..96 {
                assert_abs_diff_eq!(z[i], exact[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn multilevel_preconditioners_are_spd_and_linear() {
        let h = torus_hierarchy(2);
        let add = fasp_surface(&h, MultilevelKind::Additive).unwrap();
        let mul = fasp_surface(&h, MultilevelKind::Multiplicative).unwrap();
        assert_spd(&add, 5);
        assert_spd(&mul, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = mul.dim();
        let (r1, r2) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let sum: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + b).collect();
        let (z1, z2, z) = (mul.apply(&r1), mul.apply(&r2), mul.apply(&sum));
        for i in 0..n {
            assert_abs_diff_eq!(z[i], z1[i] + z2[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn galerkin_identity_on_reference_levels() {
        let h = torus_hierarchy(2);
        let ml = Multilevel::reference_p1(&h).unwrap();
        for j in 0..2 {
            let g = crate::linalg::triple_product(h.prolongation(j), ml.operator(j + 1)).unwrap();
            let diff = g.add_scaled(ml.operator(j), -1.0).unwrap().max_abs();
            assert!(diff <= 1e-12 * ml.operator(j).max_abs(), "level {j}: {diff}");
        }
    }

    #[test]
    fn two_level_with_zero_coarse_is_jacobi() {
        let mesh = initial_mesh_torus();
        let a = Arc::new(assemble_cr(&mesh, 1.0).unwrap());
        let p = two_level_additive(a.clone(), inclusion_cr(&mesh), ZeroMap(96)).unwrap();
        let r: Vec<f64> = (0..a.nrows()).map(|i| (i as f64).sin()).collect();
        assert_eq!(p.apply(&r), jacobi_apply(&a, &r).unwrap());
    }

    #[test]
    fn two_level_multiplicative_with_exact_coarse_is_inverse() {
        let mesh = initial_mesh_s3();
        let a = Arc::new(assemble_cr(&mesh, 1.0).unwrap());
        let n = a.nrows();
        let exact = ExactInverse::new(&a, None).unwrap();
        let p = two_level_multiplicative(a.clone(), 2, TransferOperator::identity(n), exact).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_vec(&mut rng, n);
        let z = p.apply(&r);
        let az = a.spmv(&z).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(az[i], r[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn two_level_preconditioners_are_spd() {
        let h = torus_hierarchy(1);
        let mesh = h.true_mesh(1);
        let coarse = Arc::new(fasp_surface(&h, MultilevelKind::Multiplicative).unwrap());
        let cr = Arc::new(assemble_cr(mesh, 1.0).unwrap());
        let dg = Arc::new(assemble_dg(mesh, 1.0, 10.0).unwrap());
        assert_spd(
            &two_level_additive(cr.clone(), inclusion_cr(mesh), coarse.clone()).unwrap(),
            11,
        );
        assert_spd(
            &two_level_multiplicative(cr, 2, inclusion_cr(mesh), coarse.clone()).unwrap(),
            12,
        );
        assert_spd(
            &two_level_additive(dg.clone(), inclusion_dg(mesh), coarse.clone()).unwrap(),
            13,
        );
        assert_spd(
            &two_level_multiplicative(dg, 2, inclusion_dg(mesh), coarse).unwrap(),
            14,
        );
    }

    #[test]
    fn kernel_projection() {
        let mesh = initial_mesh_s3();
        let m = assemble_mass(&mesh, &DofMap::new(&mesh, Discretization::P1)).unwrap();
        let k = vec![1.0; 8];
        let zero = kernel_project(&k, &m, &k).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-15));
        let v: Vec<f64> = (0..8).map(|i| (i as f64).cos()).collect();
        let pv = kernel_project(&v, &m, &k).unwrap();
        let ppv = kernel_project(&pv, &m, &k).unwrap();
        for i in 0..8 {
            assert_abs_diff_eq!(pv[i], ppv[i], epsilon = 1e-15);
        }
        assert!(dot(&m.spmv(&k).unwrap(), &pv).abs() <= 1e-13);
        assert!(kernel_project(&v, &m, &[0.0; 8]).is_err());
    }

    #[test]
    fn kernel_projected_wrapper_is_spd_off_kernel() {
        let h = torus_hierarchy(1);
        let mesh = h.true_mesh(1);
        let m = assemble_mass(mesh, &DofMap::new(mesh, Discretization::P1)).unwrap();
        let b = fasp_surface(&h, MultilevelKind::Multiplicative).unwrap();
        let n = b.dim();
        let p = KernelProjected::new(b, &m, vec![1.0; n]).unwrap();
        assert_eq!(p.kernel_policy(), KernelPolicy::ProjectMean);
        assert_spd(&p, 21);
        let z = p.apply(&vec![1.0; n]);
        assert!(dot(&m.row_sums(), &z).abs() < 1e-12);
    }
}
