//! Inverse of the Lyapunov part `P(X) = AX + XA†` of the Liouvillian.
//!
//! With `A = VΛV⁻¹` the map is diagonal in the basis `X = V Y V†`:
//! `P(X) = V (ΛY + YΛ̄) V†`, so `P⁻¹(R) = V [(V⁻¹ R V⁻†) ⊘ (λ_i + λ̄_j)] V†`.
//! Near-singular denominators, present when `A` annihilates the vacuum, are
//! replaced by `−δ`.
//!
//! `A` conserves every parity its terms respect, so it splits into blocks
//! (the connected components of its sparsity graph). Each block is
//! diagonalized on its own, and `P⁻¹` acts block-pair by block-pair. All-zero
//! block pairs of `R`, which is every off-diagonal pair for a
//! symmetry-respecting Krylov iterate, are skipped.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::fock::SparseOperator;

struct Block {
    idx: Vec<usize>,
    v: Mat<c64>,
    v_inv: Mat<c64>,
    lambda: Vec<c64>,
}

pub(crate) struct LyapunovInverse {
    dim: usize,
    blocks: Vec<Block>,
    block_of: Vec<usize>,
    delta: f64,
}

fn components(a: &SparseOperator) -> Vec<Vec<usize>> {
    let n = a.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j, v) in a.iter() {
        if v != c64::new(0.0, 0.0) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = out.len();
            out.push(Vec::new());
        }
        out[label[r]].push(i);
    }
    out
}

impl LyapunovInverse {
    pub fn new(effective: &SparseOperator, delta: f64) -> Result<Self> {
        let dense = effective.to_dense();
        let blocks = components(effective)
            .into_iter()
            .map(|idx| {
                let a = Mat::<c64>::from_fn(idx.len(), idx.len(), |i, j| dense[(idx[i], idx[j])]);
                let eig = a.eigen().map_err(|e| Error::LinearAlgebra(format!("eigendecomposition of A: {e:?}")))?;
                let v = eig.U().to_owned();
                let lambda = eig.S().column_vector().iter().copied().collect();
                let v_inv = v.partial_piv_lu().inverse();
                Ok(Block { idx, v, v_inv, lambda })
            })
            .collect::<Result<Vec<_>>>()?;
        log::debug!("Lyapunov preconditioner: {} blocks of A", blocks.len());
        let mut block_of = vec![0; dense.nrows()];
        for (b, blk) in blocks.iter().enumerate() {
            for &i in &blk.idx {
                block_of[i] = b;
            }
        }
        Ok(Self {
            dim: dense.nrows(),
            blocks,
            block_of,
            delta,
        })
    }

    /// Flat indices `i·D + j`, ascending, of every block pair reachable from
    /// the vacuum pair under `ρ ↦ Aρ + ρA† + Σ XρZ†` and `P⁻¹`. Both maps
    /// leave the complement zero, so Krylov vectors can live on this set.
    pub fn support(&self, jumps: &[(SparseOperator, SparseOperator)]) -> Vec<usize> {
        let nb = self.blocks.len();
        let maps: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>)> = jumps
            .iter()
            .map(|(x, z)| (self.block_map(x), self.block_map(z)))
            .collect();
        let mut seen = vec![false; nb * nb];
        let start = self.block_of[0];
        let mut queue = vec![(start, start)];
        seen[start * nb + start] = true;
        while let Some((s, t)) = queue.pop() {
            for (xm, zm) in &maps {
                for &s2 in &xm[s] {
                    for &t2 in &zm[t] {
                        if !seen[s2 * nb + t2] {
                            seen[s2 * nb + t2] = true;
                            queue.push((s2, t2));
                        }
                    }
                }
            }
        }
        let d = self.dim;
        let mut out: Vec<usize> = (0..d * d)
            .filter(|&k| seen[self.block_of[k / d] * nb + self.block_of[k % d]])
            .collect();
        out.sort_unstable();
        out
    }

    /// Blocks reached from each block by `op`.
    fn block_map(&self, op: &SparseOperator) -> Vec<Vec<usize>> {
        let mut map = vec![Vec::new(); self.blocks.len()];
        for (i, k, v) in op.iter() {
            if v != c64::new(0.0, 0.0) {
                let (from, to) = (self.block_of[k], self.block_of[i]);
                if !map[from].contains(&to) {
                    map[from].push(to);
                }
            }
        }
        map
    }

    pub fn apply(&self, r: MatRef<'_, c64>) -> Mat<c64> {
        let zero = c64::new(0.0, 0.0);
        let mut out = Mat::<c64>::zeros(self.dim, self.dim);
        for s in &self.blocks {
            for t in &self.blocks {
                let rst = Mat::<c64>::from_fn(s.idx.len(), t.idx.len(), |i, j| r[(s.idx[i], t.idx[j])]);
                if (0..rst.ncols()).all(|j| (0..rst.nrows()).all(|i| rst[(i, j)] == zero)) {
                    continue;
                }
                let mut y = &s.v_inv * rst * t.v_inv.adjoint();
                for j in 0..y.ncols() {
                    for i in 0..y.nrows() {
                        let den = s.lambda[i] + t.lambda[j].conj();
                        y[(i, j)] *= if den.norm() < self.delta { c64::new(-1.0 / self.delta, 0.0) } else { den.inv() };
                    }
                }
                let x = &s.v * y * t.v.adjoint();
                for j in 0..x.ncols() {
                    for i in 0..x.nrows() {
                        out[(s.idx[i], t.idx[j])] = x[(i, j)];
                    }
                }
            }
        }
        out
    }
}
