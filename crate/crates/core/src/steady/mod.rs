//! Stationary states of the Liouvillian.
//!
//! Four routes are available:
//!
//! * `NullspaceLu` replaces the vacuum row of `L` by the trace functional and
//!   solves `L′x = e₀` with a sparse LU factorization.
//! * `ShiftInvertArnoldi` runs Arnoldi on `(L − σ)⁻¹` for a small positive
//!   shift, starting from the vacuum projector.
//! * `DenseFallback` diagonalizes `L` densely; small systems only.
//! * `Gmres` solves the same bordered system as `NullspaceLu` matrix-free,
//!   right-preconditioned by the inverse of `ρ ↦ Aρ + ρA†`. This is the only
//!   route whose memory footprint stays `O(D²)`; sparse LU of a three-mode
//!   Liouvillian at `n_max = 8` fills in far beyond desktop memory.
//!
//! `Auto` picks `NullspaceLu` up to [`SolverOptions::lu_limit`] and `Gmres`
//! beyond. The LU fill-in grows quickly with `d`: at two modes and `d = 13`
//! the factorization takes tens of seconds where GMRES needs well under one.

mod evolve;
mod krylov;
mod precond;

use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{DensityMatrix, SolveInfo};
use crate::error::{Error, Result};
use crate::liouvillian::SparseSuperoperator;

pub use evolve::{default_time_step, evolve};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Auto,
    NullspaceLu,
    ShiftInvertArnoldi,
    DenseFallback,
    Gmres,
}

impl SolverMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::NullspaceLu => "nullspace_lu",
            Self::ShiftInvertArnoldi => "shift_invert_arnoldi",
            Self::DenseFallback => "dense_fallback",
            Self::Gmres => "gmres",
        }
    }
}

impl std::fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Auto, Self::NullspaceLu, Self::ShiftInvertArnoldi, Self::DenseFallback, Self::Gmres]
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::MethodNotApplicable {
                method: s.into(),
                reason: "unknown solver".into(),
            })
    }
}

/// Tolerances and size limits of the steady-state solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Bound on `‖L vec ρ‖₂ / (‖L‖_F ‖vec ρ‖₂)`.
    pub tolerance: f64,
    /// Relative residual target of the inner GMRES solve.
    pub gmres_tolerance: f64,
    pub gmres_restart: usize,
    pub max_iterations: usize,
    /// Largest `D²` handled by `DenseFallback`.
    pub dense_limit: usize,
    /// Largest `D²` for which `Auto` uses the sparse LU.
    pub lu_limit: usize,
    /// Shift σ in units of the characteristic rate.
    pub shift: f64,
    pub krylov_dim: usize,
    pub arnoldi_restarts: usize,
    /// Most negative eigenvalue accepted before `NotPositive` is raised.
    pub psd_tolerance: f64,
    /// Zero-cluster radius in units of the characteristic rate.
    pub zero_cluster_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            gmres_tolerance: 1e-12,
            gmres_restart: 60,
            max_iterations: 1200,
            dense_limit: 4096,
            lu_limit: 4_096,
            shift: 1e-3,
            krylov_dim: 20,
            arnoldi_restarts: 30,
            psd_tolerance: 1e-8,
            zero_cluster_tolerance: 1e-10,
        }
    }
}

pub fn solve_steady_state(l: &SparseSuperoperator, method: SolverMethod) -> Result<DensityMatrix> {
    solve_steady_state_with(l, method, &SolverOptions::default())
}

pub fn solve_steady_state_with(
    l: &SparseSuperoperator,
    method: SolverMethod,
    options: &SolverOptions,
) -> Result<DensityMatrix> {
    let method = match method {
        SolverMethod::Auto if l.dim() <= options.lu_limit => SolverMethod::NullspaceLu,
        SolverMethod::Auto => SolverMethod::Gmres,
        m => m,
    };
    let (x, iterations, degenerate) = match method {
        SolverMethod::NullspaceLu => (nullspace_lu(l)?, 1, false),
        SolverMethod::ShiftInvertArnoldi => {
            let (x, it) = shift_invert(l, options)?;
            (x, it, false)
        }
        SolverMethod::DenseFallback => dense_null_vector(l, options)?,
        SolverMethod::Gmres => {
            let (x, it) = preconditioned_gmres(l, options)?;
            (x, it, false)
        }
        SolverMethod::Auto => unreachable!(),
    };
    finalize(l, &x, method, iterations, degenerate, options)
}

fn finalize(
    l: &SparseSuperoperator,
    x: &[c64],
    method: SolverMethod,
    iterations: usize,
    degenerate: bool,
    options: &SolverOptions,
) -> Result<DensityMatrix> {
    let space = *l.space();
    let d = space.joint_dim();
    let tr: c64 = (0..d).map(|i| x[i * d + i]).sum();
    if tr.norm() <= 1e-12 * krylov::norm(x) {
        return Err(Error::ZeroTrace);
    }
    let rho = DensityMatrix::from_vec(space, x)?.normalized()?.symmetrized();
    let v = rho.to_vec();
    let residual = krylov::norm(&l.apply_vec(&v)?);
    let scaled_residual = residual / (l.frobenius_norm() * krylov::norm(&v));
    if !(scaled_residual <= options.tolerance) {
        return Err(Error::NonConvergence {
            iterations,
            residual: scaled_residual,
        });
    }
    let min_eigenvalue = rho.min_eigenvalue()?;
    if min_eigenvalue < -options.psd_tolerance {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    log::info!(
        "{method}: D = {d}, residual {residual:.3e} (scaled {scaled_residual:.3e}), min eigenvalue {min_eigenvalue:.3e}, {iterations} iterations"
    );
    Ok(rho.with_info(SolveInfo {
        solver: method.tag().into(),
        residual,
        scaled_residual,
        iterations,
        degenerate,
        min_eigenvalue,
    }))
}

fn triplets(l: &SparseSuperoperator, replace_trace_row: bool, shift: c64) -> Vec<Triplet<usize, usize, c64>> {
    let (row_ptr, cols, vals) = l.csr();
    let d = l.space().joint_dim();
    let n = l.dim();
    let mut out = Vec::with_capacity(vals.len() + n);
    if replace_trace_row {
        out.extend((0..d).map(|k| Triplet::new(0, k * d + k, ONE)));
    }
    let first = usize::from(replace_trace_row);
    for r in first..n {
        for k in row_ptr[r]..row_ptr[r + 1] {
            out.push(Triplet::new(r, cols[k] as usize, vals[k]));
        }
    }
    if shift != ZERO {
        out.extend((first..n).map(|r| Triplet::new(r, r, -shift)));
    }
    out
}

fn sparse_lu(n: usize, t: &[Triplet<usize, usize, c64>]) -> Result<faer::sparse::linalg::solvers::Lu<usize, c64>> {
    let m = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, t)
        .map_err(|e| Error::LinearAlgebra(format!("sparse assembly: {e:?}")))?;
    m.sp_lu().map_err(|e| Error::LinearAlgebra(format!("sparse LU: {e:?}")))
}

fn nullspace_lu(l: &SparseSuperoperator) -> Result<Vec<c64>> {
    let n = l.dim();
    let lu = sparse_lu(n, &triplets(l, true, ZERO))?;
    let mut rhs = Mat::<c64>::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    lu.solve_in_place(rhs.as_mut());
    let x: Vec<c64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::LinearAlgebra("sparse LU produced non-finite values".into()));
    }
    Ok(x)
}

fn vacuum_vec(n: usize) -> Vec<c64> {
    let mut v = vec![ZERO; n];
    v[0] = ONE;
    v
}

/// Ritz pairs of `(L − σ)⁻¹`, mapped back to eigenpairs of `L`.
fn shift_invert_pairs(
    l: &SparseSuperoperator,
    start: &[c64],
    want: usize,
    options: &SolverOptions,
) -> Result<(Vec<c64>, Vec<Vec<c64>>, usize)> {
    let n = l.dim();
    let sigma = c64::new(options.shift * l.characteristic_rate(), 0.0);
    let lu = sparse_lu(n, &triplets(l, false, sigma))?;
    let op = |x: &[c64]| -> Result<Vec<c64>> {
        let mut rhs = Mat::<c64>::from_fn(n, 1, |i, _| x[i]);
        lu.solve_in_place(rhs.as_mut());
        Ok((0..n).map(|i| rhs[(i, 0)]).collect())
    };
    let dim = options.krylov_dim.max(2 * want + 10);
    let pairs = krylov::arnoldi_largest(op, start, dim, want, options.arnoldi_restarts, 1e-12)?;
    if !pairs.converged {
        log::warn!("shift-invert Arnoldi: Ritz residual estimates above tolerance after {} products", pairs.iterations);
    }
    let lambdas = pairs.values.iter().map(|&t| sigma + t.inv()).collect();
    Ok((lambdas, pairs.vectors, pairs.iterations))
}

fn shift_invert(l: &SparseSuperoperator, options: &SolverOptions) -> Result<(Vec<c64>, usize)> {
    let (_, mut vecs, it) = shift_invert_pairs(l, &vacuum_vec(l.dim()), 1, options)?;
    Ok((vecs.swap_remove(0), it))
}

fn dense_null_vector(l: &SparseSuperoperator, options: &SolverOptions) -> Result<(Vec<c64>, usize, bool)> {
    let n = l.dim();
    if n > options.dense_limit {
        return Err(Error::MethodNotApplicable {
            method: SolverMethod::DenseFallback.tag().into(),
            reason: format!("D^2 = {n} exceeds the dense limit {}", options.dense_limit),
        });
    }
    let eig = l
        .to_dense()
        .eigen()
        .map_err(|e| Error::LinearAlgebra(format!("dense eigensolve: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let tol = options.zero_cluster_tolerance * l.characteristic_rate();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].norm().total_cmp(&s[b].norm()));
    let cluster: Vec<usize> = order.iter().copied().filter(|&k| s[k].norm() <= tol).collect();
    let degenerate = cluster.len() > 1;
    let d = l.space().joint_dim();
    let trace = |k: usize| -> c64 { (0..d).map(|i| u[(i * d + i, k)]).sum() };
    let chosen = if degenerate {
        log::warn!("{} eigenvalues inside the zero cluster; selecting the trace-dominant combination", cluster.len());
        *cluster
            .iter()
            .max_by(|&&a, &&b| trace(a).norm().total_cmp(&trace(b).norm()))
            .unwrap()
    } else {
        order[0]
    };
    Ok(((0..n).map(|i| u[(i, chosen)]).collect(), 1, degenerate))
}


fn to_vector(m: &Mat<c64>) -> Vec<c64> {
    let d = m.nrows();
    (0..d * d).map(|k| m[(k / d, k % d)]).collect()
}

fn preconditioned_gmres(l: &SparseSuperoperator, options: &SolverOptions) -> Result<(Vec<c64>, usize)> {
    let form = l.lindblad();
    let d = form.dim();
    let delta = 1e-8 * l.characteristic_rate();
    let pinv = precond::LyapunovInverse::new(&form.effective, delta)?;
    // Krylov vectors are restricted to the symmetry sector of the vacuum;
    // position 0 is the (0, 0) entry, which carries the trace row.
    let support = pinv.support(&form.jumps);
    log::debug!("gmres on {} of {} entries", support.len(), d * d);
    let expand = |z: &[c64]| -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(d, d);
        for (&k, &v) in support.iter().zip(z) {
            m[(k / d, k % d)] = v;
        }
        m
    };
    let op = |z: &[c64]| -> Vec<c64> {
        let x = pinv.apply(expand(z).as_ref());
        let y = form.apply(x.as_ref());
        let mut out: Vec<c64> = support.iter().map(|&k| y[(k / d, k % d)]).collect();
        out[0] = (0..d).map(|i| x[(i, i)]).sum();
        out
    };
    let mut rhs = vec![ZERO; support.len()];
    rhs[0] = ONE;
    let outcome = krylov::gmres(op, &rhs, options.gmres_restart, options.max_iterations, options.gmres_tolerance)?;
    log::debug!("gmres: {} products, relative residual {:.3e}", outcome.iterations, outcome.relative_residual);
    let x = pinv.apply(expand(&outcome.x).as_ref());
    Ok((to_vector(&x), outcome.iterations))
}

/// Eigenvalues of `L` closest to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroCluster {
    /// Sorted by modulus.
    pub eigenvalues: Vec<c64>,
    /// Eigenvalues within the zero-cluster tolerance.
    pub near_zero: usize,
    /// `−max Re λ` over the eigenvalues outside the cluster.
    pub gap: f64,
}

/// The `k` eigenvalues of smallest modulus, from shift-invert Arnoldi.
pub fn zero_cluster_diagnostics(l: &SparseSuperoperator, k: usize, options: &SolverOptions) -> Result<ZeroCluster> {
    // The vacuum alone can span an invariant subspace (pure loss), so the
    // start vector is perturbed deterministically.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start = vacuum_vec(l.dim());
    start.iter_mut().for_each(|v| *v += c64::new(rng.random_range(-1e-2..1e-2), 0.0));
    let (mut lambdas, _, _) = shift_invert_pairs(l, &start, k.max(2), options)?;
    lambdas.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    lambdas.truncate(k.max(2));
    let tol = options.zero_cluster_tolerance * l.characteristic_rate();
    let near_zero = lambdas.iter().filter(|z| z.norm() <= tol).count();
    let gap = lambdas
        .iter()
        .filter(|z| z.norm() > tol)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    if !gap.is_finite() {
        return Err(Error::LinearAlgebra("no eigenvalue outside the zero cluster was resolved".into()));
    }
    Ok(ZeroCluster {
        eigenvalues: lambdas,
        near_zero,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::liouvillian::build_liouvillian;
    use crate::network::{Connectivity, NetworkParams};

    fn liouvillian(n: usize, conn: Connectivity, h: f64, d: usize) -> SparseSuperoperator {
        let p = NetworkParams::from_connectivity(n, conn, h, 0.5, 0.1).unwrap();
        build_liouvillian(&p, &FockSpace::new(n, d).unwrap()).unwrap()
    }

    #[test]
    fn method_tags_round_trip() {
        for m in [SolverMethod::Auto, SolverMethod::NullspaceLu, SolverMethod::ShiftInvertArnoldi, SolverMethod::DenseFallback, SolverMethod::Gmres] {
            assert_eq!(m.tag().parse::<SolverMethod>().unwrap(), m);
        }
        assert!("lu".parse::<SolverMethod>().is_err());
    }

    #[test]
    fn undriven_relaxes_to_vacuum() {
        for n in 1..=3 {
            let l = liouvillian(n, Connectivity::Decoupled, 0.0, 3);
            let vac = DensityMatrix::vacuum(*l.space());
            for m in [SolverMethod::NullspaceLu, SolverMethod::Gmres, SolverMethod::ShiftInvertArnoldi] {
                let rho = solve_steady_state(&l, m).unwrap();
                assert!(rho.frobenius_distance(&vac) < 1e-12, "{m} N={n}");
            }
        }
    }

    #[test]
    fn methods_agree() {
        let l = liouvillian(2, Connectivity::Ferromagnetic { c: 0.1 }, 1.2, 5);
        let reference = solve_steady_state(&l, SolverMethod::NullspaceLu).unwrap();
        for m in [SolverMethod::ShiftInvertArnoldi, SolverMethod::DenseFallback, SolverMethod::Gmres] {
            let rho = solve_steady_state(&l, m).unwrap();
            assert!(rho.frobenius_distance(&reference) < 1e-8, "{m}");
            assert_eq!(rho.info().unwrap().solver, m.tag());
        }
        let info = reference.info().unwrap();
        assert!(info.scaled_residual < 1e-9);
        assert!(info.min_eigenvalue > -1e-8);
    }

    #[test]
    fn dense_limit_is_enforced() {
        let l = liouvillian(2, Connectivity::Hyperspin, 1.0, 9);
        let opts = SolverOptions { dense_limit: 100, ..Default::default() };
        assert!(matches!(
            solve_steady_state_with(&l, SolverMethod::DenseFallback, &opts),
            Err(Error::MethodNotApplicable { .. })
        ));
    }

    #[test]
    fn loss_gap_and_unique_zero() {
        let p = NetworkParams::from_connectivity(1, Connectivity::Decoupled, 0.0, 0.5, 0.0).unwrap();
        let l = build_liouvillian(&p, &FockSpace::new(1, 3).unwrap()).unwrap();
        let zc = zero_cluster_diagnostics(&l, 3, &SolverOptions::default()).unwrap();
        assert_eq!(zc.near_zero, 1);
        assert!((zc.gap - 0.25).abs() < 1e-9);

        let l = liouvillian(1, Connectivity::Decoupled, 1.7, 10);
        let zc = zero_cluster_diagnostics(&l, 4, &SolverOptions::default()).unwrap();
        assert_eq!(zc.near_zero, 1);
        assert!(zc.gap > 0.0);
    }
}
