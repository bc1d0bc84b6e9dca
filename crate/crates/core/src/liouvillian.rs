//! Hamiltonian and Liouvillian superoperator of the OPO network.
//!
//! The generator is written in the Lindblad-like form
//!
//! ```text
//! Lρ = Aρ + ρA† + Σ_p X_p ρ Z_p†
//! A   = −iH − ½ Σ_{μν} G_{μν} a†_μ a_ν − ¼ Σ_{μν} W_{μν} a†²_μ a²_ν
//! X_μ = a_μ,  Z_μ = Σ_ν G_{μν} a_ν          (one-photon)
//! X_μ = a²_μ, Z_μ = ½ Σ_ν W_{μν} a²_ν       (two-photon)
//! ```
//!
//! which is the original sum over `(μ, ν)` with the rate matrix folded into
//! the right-hand jump operator. Density matrices are vectorized row-major,
//! `vec[i·D + j] = ρ_ij`, so that `AρB ↦ A ⊗ Bᵀ`.

use std::sync::Arc;

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation, creation, FockSpace, SparseOperator};
use crate::network::NetworkParams;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Layout of a vectorized density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vectorization {
    /// `vec[i·D + j] = ρ_ij`; `AρB ↦ A ⊗ Bᵀ`.
    RowMajor,
}

impl Vectorization {
    pub fn describe(&self) -> &'static str {
        match self {
            Self::RowMajor => "row-major: vec[i*D+j] = rho[i][j], A rho B -> kron(A, B^T)",
        }
    }
}

/// `Ĥ = i(h/8) Σ_μ (a†_μ² − a_μ²)`.
pub fn build_hamiltonian(params: &NetworkParams, space: &FockSpace) -> Result<SparseOperator> {
    check_modes(params, space)?;
    let dim = space.joint_dim();
    let mut h = SparseOperator::zeros(dim);
    if params.pump == 0.0 {
        return Ok(h);
    }
    let coeff = c64::new(0.0, params.pump / 8.0);
    for mode in 0..space.num_modes() {
        let a = annihilation(space, mode)?;
        let ad = a.adjoint();
        let term = ad.matmul(&ad)?.sub(&a.matmul(&a)?)?;
        h = h.add(&term.scale(coeff))?;
    }
    Ok(h)
}

fn check_modes(params: &NetworkParams, space: &FockSpace) -> Result<()> {
    if params.num_modes() != space.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: space.num_modes(),
            found: params.num_modes(),
        });
    }
    Ok(())
}

/// Operators `A` and `(X_p, Z_p)` with `Lρ = Aρ + ρA† + Σ_p X_p ρ Z_p†`.
#[derive(Clone, Debug)]
pub struct LindbladForm {
    pub space: FockSpace,
    pub effective: SparseOperator,
    pub jumps: Vec<(SparseOperator, SparseOperator)>,
}

impl LindbladForm {
    pub fn from_params(params: &NetworkParams, space: &FockSpace) -> Result<Self> {
        check_modes(params, space)?;
        let n = space.num_modes();
        let dim = space.joint_dim();
        let a: Vec<SparseOperator> = (0..n).map(|m| annihilation(space, m)).collect::<Result<_>>()?;
        let ad: Vec<SparseOperator> = (0..n).map(|m| creation(space, m)).collect::<Result<_>>()?;
        let a2: Vec<SparseOperator> = a.iter().map(|x| x.matmul(x)).collect::<Result<_>>()?;
        let ad2: Vec<SparseOperator> = ad.iter().map(|x| x.matmul(x)).collect::<Result<_>>()?;
        let g = params.one_photon_rates();
        let w = &params.w;

        let minus_i = c64::new(0.0, -1.0);
        let mut eff = build_hamiltonian(params, space)?.scale(minus_i);
        let mut jumps = Vec::new();
        for mu in 0..n {
            let mut z1 = SparseOperator::zeros(dim);
            let mut z2 = SparseOperator::zeros(dim);
            for nu in 0..n {
                let gmn = g.get(mu, nu);
                if gmn != 0.0 {
                    eff = eff.sub(&ad[mu].matmul(&a[nu])?.scale(c64::new(0.5 * gmn, 0.0)))?;
                    z1 = z1.add(&a[nu].scale(c64::new(gmn, 0.0)))?;
                }
                let wmn = w.get(mu, nu);
                if wmn != 0.0 {
                    eff = eff.sub(&ad2[mu].matmul(&a2[nu])?.scale(c64::new(0.25 * wmn, 0.0)))?;
                    z2 = z2.add(&a2[nu].scale(c64::new(0.5 * wmn, 0.0)))?;
                }
            }
            if z1.nnz() > 0 {
                jumps.push((a[mu].clone(), z1));
            }
            if z2.nnz() > 0 {
                jumps.push((a2[mu].clone(), z2));
            }
        }
        Ok(Self {
            space: *space,
            effective: eff,
            jumps,
        })
    }

    /// A single collective channel `rate·(JρJ† − ½{J†J, ρ})` on `space`.
    pub fn collective(space: &FockSpace, jump: &SparseOperator, rate: f64) -> Result<Self> {
        if jump.dim() != space.joint_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.joint_dim(),
                found: jump.dim(),
            });
        }
        let eff = jump.adjoint().matmul(jump)?.scale(c64::new(-0.5 * rate, 0.0));
        Ok(Self {
            space: *space,
            effective: eff,
            jumps: vec![(jump.clone(), jump.scale(c64::new(rate, 0.0)))],
        })
    }

    pub fn dim(&self) -> usize {
        self.space.joint_dim()
    }

    /// `Lρ` for a dense `D × D` matrix.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Mat<c64> {
        let d = self.dim();
        assert_eq!((rho.nrows(), rho.ncols()), (d, d));
        let src = to_col_major(rho);
        let mut out = vec![ZERO; d * d];
        let mut tmp = vec![ZERO; d * d];
        self.apply_col_major(&src, &mut out, &mut tmp);
        Mat::from_fn(d, d, |i, j| out[j * d + i])
    }

    /// `out = Lρ` on column-major `D × D` buffers; `tmp` is scratch space.
    pub(crate) fn apply_col_major(&self, src: &[c64], out: &mut [c64], tmp: &mut [c64]) {
        let d = self.dim();
        out.iter_mut().for_each(|v| *v = ZERO);
        left_mul_acc(&self.effective, src, out, d);
        right_adj_mul_acc(src, &self.effective, out, d);
        for (x, z) in &self.jumps {
            tmp.iter_mut().for_each(|v| *v = ZERO);
            left_mul_acc(x, src, tmp, d);
            right_adj_mul_acc(tmp, z, out, d);
        }
    }
}

fn to_col_major(m: MatRef<'_, c64>) -> Vec<c64> {
    let d = m.nrows();
    let mut buf = Vec::with_capacity(d * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..d {
            buf.push(m[(i, j)]);
        }
    }
    buf
}

/// Below this dimension the column loops run on the calling thread.
const PARALLEL_DIM: usize = 64;

/// `out += op · src` with column-major `d × d` buffers.
fn left_mul_acc(op: &SparseOperator, src: &[c64], out: &mut [c64], d: usize) {
    let kernel = |(oc, sc): (&mut [c64], &[c64])| {
        for (i, o) in oc.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (k, v) in op.row(i) {
                acc += v * sc[k];
            }
            *o += acc;
        }
    };
    if d < PARALLEL_DIM {
        out.chunks_mut(d).zip(src.chunks(d)).for_each(kernel);
    } else {
        out.par_chunks_mut(d).zip(src.par_chunks(d)).for_each(kernel);
    }
}

/// `out += src · op†` with column-major `d × d` buffers.
fn right_adj_mul_acc(src: &[c64], op: &SparseOperator, out: &mut [c64], d: usize) {
    let kernel = |(j, oc): (usize, &mut [c64])| {
        for (l, v) in op.row(j) {
            let f = v.conj();
            let sc = &src[l * d..(l + 1) * d];
            for (o, s) in oc.iter_mut().zip(sc) {
                *o += f * s;
            }
        }
    };
    if d < PARALLEL_DIM {
        out.chunks_mut(d).enumerate().for_each(kernel);
    } else {
        out.par_chunks_mut(d).enumerate().for_each(kernel);
    }
}

/// Assembly options.
#[derive(Clone, Copy, Debug)]
pub struct LiouvillianOptions {
    /// Upper bound on the bytes used by the assembled matrix.
    pub memory_budget: usize,
}

impl Default for LiouvillianOptions {
    fn default() -> Self {
        Self {
            memory_budget: 3 << 30,
        }
    }
}

/// Liouvillian acting on row-major vectorized density matrices, stored in
/// compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseSuperoperator {
    space: FockSpace,
    convention: Vectorization,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<c64>,
    form: Arc<LindbladForm>,
    rate: f64,
}

impl SparseSuperoperator {
    pub fn from_lindblad(form: LindbladForm, options: &LiouvillianOptions) -> Result<Self> {
        let d = form.dim();
        let rows = d * d;
        if u32::try_from(rows).is_err() {
            return Err(Error::MemoryBudget {
                required: usize::MAX,
                budget: options.memory_budget,
            });
        }
        let bound = 2 * d * form.effective.nnz()
            + form.jumps.iter().map(|(x, z)| x.nnz() * z.nnz()).sum::<usize>();
        let required = bound * (std::mem::size_of::<u32>() + std::mem::size_of::<c64>())
            + (rows + 1) * std::mem::size_of::<usize>();
        if required > options.memory_budget {
            return Err(Error::MemoryBudget {
                required,
                budget: options.memory_budget,
            });
        }

        let block_rows: Vec<(Vec<u32>, Vec<c64>, Vec<usize>)> = (0..d)
            .into_par_iter()
            .map(|i| {
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                let mut lens = Vec::with_capacity(d);
                let mut scratch: Vec<(u32, c64)> = Vec::new();
                for j in 0..d {
                    scratch.clear();
                    for (k, v) in form.effective.row(i) {
                        scratch.push(((k * d + j) as u32, v));
                    }
                    for (l, v) in form.effective.row(j) {
                        scratch.push(((i * d + l) as u32, v.conj()));
                    }
                    for (x, z) in &form.jumps {
                        for (k, xv) in x.row(i) {
                            for (l, zv) in z.row(j) {
                                scratch.push(((k * d + l) as u32, xv * zv.conj()));
                            }
                        }
                    }
                    scratch.sort_unstable_by_key(|e| e.0);
                    let before = cols.len();
                    let mut idx = 0;
                    while idx < scratch.len() {
                        let (c, mut v) = scratch[idx];
                        idx += 1;
                        while idx < scratch.len() && scratch[idx].0 == c {
                            v += scratch[idx].1;
                            idx += 1;
                        }
                        if v != ZERO {
                            cols.push(c);
                            vals.push(v);
                        }
                    }
                    lens.push(cols.len() - before);
                }
                (cols, vals, lens)
            })
            .collect();

        let nnz: usize = block_rows.iter().map(|b| b.0.len()).sum();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (cols, vals, lens) in block_rows {
            for len in lens {
                row_ptr.push(row_ptr.last().unwrap() + len);
            }
            col_idx.extend(cols);
            values.extend(vals);
        }
        log::debug!("assembled Liouvillian: {rows} rows, {nnz} nonzeros");
        Ok(Self {
            space: form.space,
            convention: Vectorization::RowMajor,
            row_ptr,
            col_idx,
            values,
            form: Arc::new(form),
            rate: 1.0,
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn convention(&self) -> Vectorization {
        self.convention
    }

    /// Rate used to set absolute spectral tolerances; the loss `g` for
    /// networks, `1` otherwise.
    pub fn characteristic_rate(&self) -> f64 {
        self.rate
    }

    pub(crate) fn csr(&self) -> (&[usize], &[u32], &[c64]) {
        (&self.row_ptr, &self.col_idx, &self.values)
    }

    pub fn lindblad(&self) -> &LindbladForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .map(|&c| c as usize)
            .zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        self.row(r).find(|&(k, _)| k == c).map_or(ZERO, |(_, v)| v)
    }

    /// `y = L x` on a vectorized density matrix.
    pub fn apply_vec(&self, x: &[c64]) -> Result<Vec<c64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok((0..self.dim())
            .into_par_iter()
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect())
    }

    /// `dρ/dt = Lρ` for a dense density matrix.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let d = self.space.joint_dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        Ok(self.form.apply(rho))
    }

    /// Frobenius norm of the matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            let mut entries: Vec<(usize, c64)> = self.row(r).chain(other.row(r).map(|(c, v)| (c, -v))).collect();
            entries.sort_unstable_by_key(|e| e.0);
            let mut idx = 0;
            while idx < entries.len() {
                let (c, mut v) = entries[idx];
                idx += 1;
                while idx < entries.len() && entries[idx].0 == c {
                    v += entries[idx].1;
                    idx += 1;
                }
                worst = worst.max(v.norm());
            }
        }
        worst
    }
}

/// Assembles the Liouvillian of `params` on `space`.
pub fn build_liouvillian(params: &NetworkParams, space: &FockSpace) -> Result<SparseSuperoperator> {
    build_liouvillian_with(params, space, &LiouvillianOptions::default())
}

pub fn build_liouvillian_with(
    params: &NetworkParams,
    space: &FockSpace,
    options: &LiouvillianOptions,
) -> Result<SparseSuperoperator> {
    params.validate()?;
    let mut l = SparseSuperoperator::from_lindblad(LindbladForm::from_params(params, space)?, options)?;
    l.rate = if params.loss > 0.0 { params.loss } else { params.rate_scale() };
    Ok(l)
}

/// Superoperator of `rate·(JρJ† − ½{J†J, ρ})`.
pub fn collective_dissipator(space: &FockSpace, jump: &SparseOperator, rate: f64) -> Result<SparseSuperoperator> {
    SparseSuperoperator::from_lindblad(LindbladForm::collective(space, jump, rate)?, &LiouvillianOptions::default())
}
