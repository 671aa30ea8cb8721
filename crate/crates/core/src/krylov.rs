//! Preconditioned conjugate gradients for SPD and semi-definite systems with
//! a one-dimensional kernel, plus Lanczos and power-iteration spectral probes.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, SparseOperator};
use crate::precond::Preconditioner;

/// Seed of the start vectors used by the spectral probes.
pub const PROBE_SEED: u64 = 0x5EED_CAFE;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b - A u_k‖₂ / ‖b‖₂`, starting with the entry for `u_0 = 0`.
    pub residual_history: Vec<f64>,
    /// `⟨r_k, z_k⟩` for every preconditioned residual.
    pub preconditioned_history: Vec<f64>,
    /// `|kᵀ r_k| / ‖b‖₂` when a kernel is present, otherwise empty.
    pub kernel_residual_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: f64,
    /// CG step lengths `α_k` and ratios `β_k`, from which the Lanczos
    /// tridiagonal matrix of `BA` can be rebuilt.
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }

    /// Extreme Ritz values of the preconditioned operator from the recorded
    /// CG coefficients.
    pub fn ritz_extremes(&self) -> Option<(f64, f64)> {
        ritz_from_cg(&self.alphas, &self.betas)
    }
}

/// The constant-like kernel `span{k}` of a semi-definite operator together
/// with the mass matrix that defines the "mean".
#[derive(Debug, Clone)]
pub struct KernelSpace {
    kernel: Vec<f64>,
    mass_kernel: Vec<f64>,
    kmk: f64,
}

impl KernelSpace {
    pub fn new(kernel: &[f64], mass: &SparseOperator) -> Result<Self> {
        let mass_kernel = mass.spmv(kernel)?;
        let kmk = dot(kernel, &mass_kernel);
        if !(kmk > 0.0) {
            return Err(Error::InvalidArgument("kernel vector has zero mass".into()));
        }
        Ok(Self {
            kernel: kernel.to_vec(),
            mass_kernel,
            kmk,
        })
    }

    /// Kernel without a mass matrix: the Euclidean inner product is used.
    pub fn euclidean(kernel: &[f64]) -> Result<Self> {
        let kmk = dot(kernel, kernel);
        if !(kmk > 0.0) {
            return Err(Error::InvalidArgument("zero kernel vector".into()));
        }
        Ok(Self {
            kernel: kernel.to_vec(),
            mass_kernel: kernel.to_vec(),
            kmk,
        })
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Makes a dual vector compatible: `r - Mk (kᵀr)/(kᵀMk)`, so `kᵀr = 0`.
    pub fn project_dual(&self, r: &mut [f64]) {
        let s = dot(&self.kernel, r) / self.kmk;
        axpy(-s, &self.mass_kernel, r);
    }

    /// Removes the kernel component of a primal vector: `z - k (kᵀMz)/(kᵀMk)`.
    pub fn project_primal(&self, z: &mut [f64]) {
        let s = dot(&self.mass_kernel, z) / self.kmk;
        axpy(-s, &self.kernel, z);
    }

    /// Mass-weighted mean `kᵀMz / kᵀMk`.
    pub fn mean(&self, z: &[f64]) -> f64 {
        dot(&self.mass_kernel, z) / self.kmk
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 1000,
        }
    }
}

/// Solves `A u = b` by PCG from `u_0 = 0`, stopping on the relative residual.
///
/// With a kernel the residual is re-projected onto the compatible subspace in
/// every iteration and the returned solution is mass-mean-free. Exceeding the
/// iteration limit yields a non-converged report rather than an error.
pub fn pcg_solve<P: Preconditioner + ?Sized>(
    a: &SparseOperator,
    precond: &P,
    b: &[f64],
    options: PcgOptions,
    kernel: Option<&KernelSpace>,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.nrows();
    for found in [b.len(), precond.dim(), a.ncols()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    if let Some(k) = kernel {
        if k.kernel.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: k.kernel.len(),
            });
        }
    }

    let mut report = SolveReport {
        iterations: 0,
        residual_history: Vec::new(),
        preconditioned_history: Vec::new(),
        kernel_residual_history: Vec::new(),
        converged: false,
        wall_time: 0.0,
        alphas: Vec::new(),
        betas: Vec::new(),
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    if let Some(k) = kernel {
        k.project_dual(&mut r);
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.residual_history.push(0.0);
        report.converged = true;
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    let record = |r: &[f64], report: &mut SolveReport| {
        report.residual_history.push(norm2(r) / bnorm);
        if let Some(k) = kernel {
            report.kernel_residual_history.push(dot(&k.kernel, r).abs() / bnorm);
        }
    };
    record(&r, &mut report);
    if report.final_residual() <= options.tol {
        report.converged = true;
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }

    let mut z = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64]| {
        precond.apply_into(r, z);
        if let Some(k) = kernel {
            k.project_primal(z);
        }
    };
    precondition(&r, &mut z);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::NotPositiveDefinite {
            iteration: 0,
            value: rz,
        });
    }
    report.preconditioned_history.push(rz);
    let mut p = z.clone();
    let mut q = vec![0.0; n];

    while report.iterations < options.max_iterations {
        a.spmv_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NotPositiveDefinite {
                iteration: report.iterations,
                value: pq,
            });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        if let Some(k) = kernel {
            k.project_dual(&mut r);
        }
        report.iterations += 1;
        report.alphas.push(alpha);
        record(&r, &mut report);
        if report.final_residual() <= options.tol {
            report.converged = true;
            break;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::NotPositiveDefinite {
                iteration: report.iterations,
                value: rz_new,
            });
        }
        report.preconditioned_history.push(rz_new);
        let beta = rz_new / rz;
        report.betas.push(beta);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if let Some(k) = kernel {
        k.project_primal(&mut x);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Extreme eigenvalues of the Lanczos matrix implied by `m` CG steps:
/// `T_kk = 1/α_k + β_{k-1}/α_{k-1}`, `T_{k,k+1} = √β_k / α_k`.
pub fn ritz_from_cg(alphas: &[f64], betas: &[f64]) -> Option<(f64, f64)> {
    let m = alphas.len().min(betas.len() + 1);
    if m == 0 {
        return None;
    }
    let mut t = DMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = 1.0 / alphas[k] + if k > 0 { betas[k - 1] / alphas[k - 1] } else { 0.0 };
        if k + 1 < m {
            let off = betas[k].sqrt() / alphas[k];
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(t).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
    /// The Krylov space became invariant before `steps` iterations.
    pub breakdown: bool,
}

impl SpectralEstimate {
    pub fn kappa(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

fn random_start(n: usize, kernel: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if let Some(k) = kernel {
        KernelSpace::euclidean(k)?.project_dual(&mut v);
    }
    Ok(v)
}

/// Extreme Ritz values of `BA` (on the complement of the kernel, if given),
/// from `steps` Lanczos steps realised as preconditioned CG on a fixed
/// random right-hand side.
pub fn lanczos_extremes<P: Preconditioner + ?Sized>(
    a: &SparseOperator,
    precond: &P,
    steps: usize,
    kernel: Option<&[f64]>,
) -> Result<SpectralEstimate> {
    if steps < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 Lanczos steps, got {steps}"
        )));
    }
    let n = a.nrows();
    let ks = kernel.map(KernelSpace::euclidean).transpose()?;
    let mut r = random_start(n, kernel)?;
    let mut z = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64]| {
        precond.apply_into(r, z);
        if let Some(k) = &ks {
            k.project_primal(z);
        }
    };
    precondition(&r, &mut z);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::NotPositiveDefinite {
            iteration: 0,
            value: rz,
        });
    }
    let rz0 = rz;
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut breakdown = false;
    for it in 0..steps {
        a.spmv_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NotPositiveDefinite {
                iteration: it,
                value: pq,
            });
        }
        let alpha = rz / pq;
        alphas.push(alpha);
        if it + 1 == steps {
            break;
        }
        axpy(-alpha, &q, &mut r);
        if let Some(k) = &ks {
            k.project_dual(&mut r);
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        if rz_new <= 1e-28 * rz0 {
            breakdown = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let (lambda_min, lambda_max) = ritz_from_cg(&alphas, &betas).expect("at least one step");
    Ok(SpectralEstimate {
        lambda_min,
        lambda_max,
        steps: alphas.len(),
        breakdown,
    })
}

/// `‖I - BA‖_A` estimated by power iteration on the error propagation
/// operator, for a preconditioner that is a linear iteration (e.g. a
/// multiplicative method). Returns the last ratio `|E e|_A / |e|_A`.
pub fn power_contraction<P: Preconditioner + ?Sized>(
    a: &SparseOperator,
    precond: &P,
    iterations: usize,
    kernel: Option<&[f64]>,
) -> Result<f64> {
    let n = a.nrows();
    let ks = kernel.map(KernelSpace::euclidean).transpose()?;
    let mut e = random_start(n, None)?;
    if let Some(k) = &ks {
        k.project_primal(&mut e);
    }
    let anorm = |v: &[f64]| -> f64 { dot(v, &a.spmv(v).expect("square")).max(0.0).sqrt() };
    let mut norm = anorm(&e);
    if norm == 0.0 {
        return Err(Error::InvalidArgument("start vector in the kernel".into()));
    }
    e.iter_mut().for_each(|v| *v /= norm);
    let mut ratio = 0.0;
    for _ in 0..iterations.max(1) {
        let ae = a.spmv(&e)?;
        let mut bae = precond.apply(&ae);
        if let Some(k) = &ks {
            k.project_primal(&mut bae);
        }
        for (ei, bi) in e.iter_mut().zip(&bae) {
            *ei -= bi;
        }
        if let Some(k) = &ks {
            k.project_primal(&mut e);
        }
        norm = anorm(&e);
        ratio = norm;
        if norm == 0.0 {
            break;
        }
        e.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(ratio)
}
