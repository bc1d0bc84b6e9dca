//! Truncated multimode Fock space and sparse ladder operators.
//!
//! Each of the `N` modes keeps the number states `|0⟩ … |n_max⟩`, so the local
//! dimension is `d = n_max + 1` and the joint dimension is `D = d^N`. Joint
//! basis states `|n_1, …, n_N⟩` are flattened with mode 0 most significant:
//!
//! ```text
//! flat = Σ_μ n_μ · d^(N-1-μ)
//! ```
//!
//! Modes are indexed from 0 throughout the library. The same ordering is used
//! by the Liouvillian, the partial transpose and the Wigner contraction.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated Fock basis of `num_modes` bosonic modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    num_modes: usize,
    local_dim: usize,
    joint_dim: usize,
}

impl FockSpace {
    pub fn new(num_modes: usize, local_dim: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidSpace("at least one mode is required".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidSpace(format!(
                "local dimension must be at least 2, got {local_dim}"
            )));
        }
        let joint_dim = u32::try_from(num_modes)
            .ok()
            .and_then(|n| local_dim.checked_pow(n))
            .ok_or_else(|| Error::InvalidSpace("joint dimension overflows".into()))?;
        Ok(Self {
            num_modes,
            local_dim,
            joint_dim,
        })
    }

    /// Space with occupations `0..=n_max` in every mode.
    pub fn with_n_max(num_modes: usize, n_max: usize) -> Result<Self> {
        Self::new(num_modes, n_max + 1)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn n_max(&self) -> usize {
        self.local_dim - 1
    }

    pub fn joint_dim(&self) -> usize {
        self.joint_dim
    }

    /// Dimension of the vectorized density-matrix space, `D²`.
    pub fn liouville_dim(&self) -> usize {
        self.joint_dim * self.joint_dim
    }

    /// Distance in flat index between neighbouring occupations of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.local_dim.pow((self.num_modes - 1 - mode) as u32)
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes {
            Err(Error::ModeOutOfRange {
                mode,
                num_modes: self.num_modes,
            })
        } else {
            Ok(())
        }
    }

    pub fn flat_index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.num_modes {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes,
                found: occupations.len(),
            });
        }
        let mut flat = 0;
        for (mode, &n) in occupations.iter().enumerate() {
            if n >= self.local_dim {
                return Err(Error::OccupationOutOfRange {
                    mode,
                    occupation: n,
                    n_max: self.n_max(),
                });
            }
            flat = flat * self.local_dim + n;
        }
        Ok(flat)
    }

    pub fn unflatten(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.joint_dim {
            return Err(Error::IndexOutOfRange {
                index: flat,
                dim: self.joint_dim,
            });
        }
        let mut occ = vec![0; self.num_modes];
        let mut rest = flat;
        for slot in occ.iter_mut().rev() {
            *slot = rest % self.local_dim;
            rest /= self.local_dim;
        }
        Ok(occ)
    }

    /// Occupation of `mode` in the basis state with index `flat` (no checks).
    #[inline]
    pub fn occupation(&self, flat: usize, mode: usize) -> usize {
        (flat / self.stride(mode)) % self.local_dim
    }

    /// Total photon number of basis state `flat`.
    pub fn total_occupation(&self, flat: usize) -> usize {
        let mut rest = flat;
        let mut total = 0;
        for _ in 0..self.num_modes {
            total += rest % self.local_dim;
            rest /= self.local_dim;
        }
        total
    }

    /// True if any mode of basis state `flat` sits at the truncation edge.
    pub fn touches_cutoff(&self, flat: usize) -> bool {
        let mut rest = flat;
        for _ in 0..self.num_modes {
            if rest % self.local_dim == self.n_max() {
                return true;
            }
            rest /= self.local_dim;
        }
        false
    }
}

/// Square sparse matrix in compressed-row form with complex entries.
///
/// Assembly merges duplicate coordinates and drops entries that cancel to
/// exactly zero, so every stored `(row, col)` pair is unique.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, c64::new(1.0, 0.0))))
            .expect("diagonal indices are in range")
    }

    pub fn diagonal(values: &[c64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal indices are in range")
    }

    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, c64)>,
    {
        let mut entries: Vec<(usize, usize, c64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::IndexOutOfRange {
                    index: r.max(c),
                    dim,
                });
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v != c64::new(0.0, 0.0) {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of one row as `(col, value)` pairs, sorted by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => c64::new(0.0, 0.0),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v))).unwrap()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj()))).unwrap()
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, factor: c64) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (r, c, v * factor))).unwrap()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Self::from_triplets(self.dim, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Self::from_triplets(
            self.dim,
            self.iter().chain(other.iter().map(|(r, c, v)| (r, c, -v))),
        )
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut triplets = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, triplets)
    }

    /// `y = self · x` for a dense vector.
    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.dim, "vector length must equal operator dimension");
        (0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.iter()
            .chain(other.iter().map(|(r, c, v)| (r, c, -v)))
            .fold(
                std::collections::HashMap::<(usize, usize), c64>::new(),
                |mut acc, (r, c, v)| {
                    *acc.entry((r, c)).or_insert(c64::new(0.0, 0.0)) += v;
                    acc
                },
            )
            .values()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            })
        }
    }
}

/// Single-mode annihilation operator on `d` levels: `⟨n-1|a|n⟩ = √n`.
pub fn single_mode_annihilation(d: usize) -> SparseOperator {
    SparseOperator::from_triplets(d, (1..d).map(|n| (n - 1, n, c64::new((n as f64).sqrt(), 0.0))))
        .expect("ladder indices are in range")
}

/// Single-mode number operator `diag(0, 1, …, d-1)`.
pub fn single_mode_number(d: usize) -> SparseOperator {
    let diag: Vec<c64> = (0..d).map(|n| c64::new(n as f64, 0.0)).collect();
    SparseOperator::diagonal(&diag)
}

/// Embeds a `d × d` operator acting on `mode` into the joint space,
/// `I ⊗ … ⊗ op ⊗ … ⊗ I`.
pub fn embed(single_mode_op: &SparseOperator, space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    space.check_mode(mode)?;
    let d = space.local_dim();
    if single_mode_op.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: single_mode_op.dim(),
        });
    }
    let stride = space.stride(mode);
    let mut triplets = Vec::with_capacity(single_mode_op.nnz() * space.joint_dim() / d);
    for flat in 0..space.joint_dim() {
        let n = space.occupation(flat, mode);
        let base = flat - n * stride;
        for (m, v) in single_mode_op.row(n) {
            triplets.push((flat, base + m * stride, v));
        }
    }
    SparseOperator::from_triplets(space.joint_dim(), triplets)
}

pub fn annihilation(space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    embed(&single_mode_annihilation(space.local_dim()), space, mode)
}

pub fn creation(space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    Ok(annihilation(space, mode)?.adjoint())
}

pub fn number(space: &FockSpace, mode: usize) -> Result<SparseOperator> {
    embed(&single_mode_number(space.local_dim()), space, mode)
}

/// Total photon-number parity `Π = ⊗_μ exp(iπ n_μ)`, which is diagonal with
/// entries `±1`.
pub fn parity(space: &FockSpace) -> SparseOperator {
    let diag: Vec<c64> = (0..space.joint_dim())
        .map(|i| {
            if space.total_occupation(i) % 2 == 0 {
                c64::new(1.0, 0.0)
            } else {
                c64::new(-1.0, 0.0)
            }
        })
        .collect();
    SparseOperator::diagonal(&diag)
}
