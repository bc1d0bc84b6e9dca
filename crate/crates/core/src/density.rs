//! Dense density matrices on a truncated Fock space.

use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockSpace;

/// Edge-to-bulk ratio above which a state is considered affected by truncation.
pub const TRUNCATION_TOLERANCE: f64 = 1e-6;

/// How a density matrix was obtained and how well it satisfies `Lρ = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    /// Solver tag, for example `nullspace_lu`.
    pub solver: String,
    /// `‖L vec ρ‖₂`.
    pub residual: f64,
    /// `‖L vec ρ‖₂ / (‖L‖_F ‖vec ρ‖₂)`.
    pub scaled_residual: f64,
    pub iterations: usize,
    /// More than one eigenvalue fell inside the zero cluster.
    pub degenerate: bool,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: FockSpace,
    data: Mat<c64>,
    info: Option<SolveInfo>,
}

impl DensityMatrix {
    pub fn new(space: FockSpace, data: Mat<c64>) -> Result<Self> {
        let d = space.joint_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: data.nrows(),
            });
        }
        Ok(Self { space, data, info: None })
    }

    /// Reshapes a row-major vectorized matrix.
    pub fn from_vec(space: FockSpace, v: &[c64]) -> Result<Self> {
        let d = space.joint_dim();
        if v.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: v.len(),
            });
        }
        Self::new(space, Mat::from_fn(d, d, |i, j| v[i * d + j]))
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(space: FockSpace, psi: &[c64]) -> Result<Self> {
        let d = space.joint_dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: psi.len(),
            });
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm == 0.0 {
            return Err(Error::ZeroTrace);
        }
        Self::new(space, Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm))
    }

    pub fn fock_state(space: FockSpace, occupations: &[usize]) -> Result<Self> {
        let k = space.flat_index(occupations)?;
        let mut psi = vec![c64::new(0.0, 0.0); space.joint_dim()];
        psi[k] = c64::new(1.0, 0.0);
        Self::pure(space, &psi)
    }

    pub fn vacuum(space: FockSpace) -> Self {
        Self::fock_state(space, &vec![0; space.num_modes()]).expect("vacuum is in every space")
    }

    /// Product of per-mode coherent states `|α_1, …, α_N⟩`, truncated and renormalized.
    pub fn coherent(space: FockSpace, alphas: &[c64]) -> Result<Self> {
        if alphas.len() != space.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: space.num_modes(),
                found: alphas.len(),
            });
        }
        let d = space.local_dim();
        let factors: Vec<Vec<c64>> = alphas
            .iter()
            .map(|&a| {
                let mut amp = Vec::with_capacity(d);
                let mut cur = c64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
                for n in 0..d {
                    amp.push(cur);
                    cur = cur * a / ((n + 1) as f64).sqrt();
                }
                amp
            })
            .collect();
        let psi: Vec<c64> = (0..space.joint_dim())
            .map(|k| {
                (0..space.num_modes())
                    .map(|m| factors[m][space.occupation(k, m)])
                    .product()
            })
            .collect();
        Self::pure(space, &psi)
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.joint_dim()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.data
    }

    pub fn info(&self) -> Option<&SolveInfo> {
        self.info.as_ref()
    }

    pub fn with_info(mut self, info: SolveInfo) -> Self {
        self.info = Some(info);
        self
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.data[(i, j)]
    }

    /// Row-major vectorization.
    pub fn to_vec(&self) -> Vec<c64> {
        let d = self.dim();
        (0..d * d).map(|k| self.data[(k / d, k % d)]).collect()
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    /// Divides by the trace; fails when the trace vanishes.
    pub fn normalized(mut self) -> Result<Self> {
        let tr = self.trace();
        if tr.norm() < 1e-300 || !tr.norm().is_finite() {
            return Err(Error::ZeroTrace);
        }
        let inv = tr.inv();
        let d = self.dim();
        for j in 0..d {
            for i in 0..d {
                self.data[(i, j)] *= inv;
            }
        }
        Ok(self)
    }

    /// `(ρ + ρ†) / 2`.
    pub fn symmetrized(mut self) -> Self {
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                let v = (self.data[(i, j)] + self.data[(j, i)].conj()) * 0.5;
                self.data[(i, j)] = v;
                self.data[(j, i)] = v.conj();
            }
        }
        self
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ev = self
            .data
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for j in 0..d {
            for i in 0..d {
                acc += (self.data[(i, j)] * self.data[(j, i)]).re;
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..d {
                worst = worst.max(self.data[(i, j)].norm());
            }
        }
        worst
    }

    /// Largest `|ρ_ij|` with a mode of `i` or `j` at the truncation edge,
    /// relative to the largest entry overall.
    pub fn truncation_edge_ratio(&self) -> f64 {
        let d = self.dim();
        let edge: Vec<bool> = (0..d).map(|k| self.space.touches_cutoff(k)).collect();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..d {
                if edge[i] || edge[j] {
                    worst = worst.max(self.data[(i, j)].norm());
                }
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn is_truncation_safe(&self) -> bool {
        self.truncation_edge_ratio() <= TRUNCATION_TOLERANCE
    }

    /// Frobenius distance `‖ρ − σ‖_F`.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let d = self.dim();
        let mut acc = 0.0;
        for j in 0..d {
            for i in 0..d {
                acc += (self.data[(i, j)] - other.data[(i, j)]).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Convex combination `(1 − p) ρ + p σ`.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let d = self.dim();
        Self::new(
            self.space,
            Mat::from_fn(d, d, |i, j| self.data[(i, j)] * (1.0 - p) + other.data[(i, j)] * p),
        )
    }

    /// `ρ_A ⊗ ρ_B` with the modes of `self` first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.space.local_dim() != other.space.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.local_dim(),
                found: other.space.local_dim(),
            });
        }
        let space = FockSpace::new(
            self.space.num_modes() + other.space.num_modes(),
            self.space.local_dim(),
        )?;
        let db = other.dim();
        Self::new(
            space,
            Mat::from_fn(space.joint_dim(), space.joint_dim(), |i, j| {
                self.data[(i / db, j / db)] * other.data[(i % db, j % db)]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_basics() {
        let s = FockSpace::new(2, 3).unwrap();
        let v = DensityMatrix::vacuum(s);
        assert_eq!(v.trace(), c64::new(1.0, 0.0));
        assert_eq!(v.get(0, 0), c64::new(1.0, 0.0));
        assert!(v.is_truncation_safe());
        assert!((v.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn edge_population_is_unsafe() {
        let s = FockSpace::new(2, 3).unwrap();
        let v = DensityMatrix::fock_state(s, &[0, 2]).unwrap();
        assert!(!v.is_truncation_safe());
    }

    #[test]
    fn vec_round_trip() {
        let s = FockSpace::new(1, 4).unwrap();
        let rho = DensityMatrix::coherent(s, &[c64::new(0.3, -0.2)]).unwrap();
        let back = DensityMatrix::from_vec(s, &rho.to_vec()).unwrap();
        assert_eq!(back.frobenius_distance(&rho), 0.0);
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(rho.hermiticity_error() < 1e-16);
    }

    #[test]
    fn tensor_of_fock_states() {
        let s = FockSpace::new(1, 3).unwrap();
        let a = DensityMatrix::fock_state(s, &[1]).unwrap();
        let b = DensityMatrix::fock_state(s, &[2]).unwrap();
        let ab = a.tensor(&b).unwrap();
        let want = DensityMatrix::fock_state(*ab.space(), &[1, 2]).unwrap();
        assert_eq!(ab.frobenius_distance(&want), 0.0);
    }
}
