//! Restarted GMRES and Arnoldi iteration on plain complex vectors.

use faer::{c64, Mat};
use rayon::prelude::*;

use crate::error::{Error, Result};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

pub(crate) fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(alpha: f64, x: &mut [c64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

const CHUNK: usize = 2048;

/// Two passes of classical Gram–Schmidt of `w` against `basis`; returns the
/// projection coefficients. Each pass streams `w` once per chunk, so the
/// whole basis is read twice per pass rather than `w` twice per vector.
fn orthogonalize(basis: &[Vec<c64>], w: &mut [c64]) -> Vec<c64> {
    let k = basis.len();
    let mut coeffs = vec![ZERO; k];
    for _ in 0..2 {
        // Partial sums are combined in chunk order so results do not depend
        // on work stealing.
        let partial: Vec<Vec<c64>> = w
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, wc)| {
                let off = c * CHUNK;
                basis.iter().map(|q| dot(&q[off..off + wc.len()], wc)).collect::<Vec<_>>()
            })
            .collect();
        let h = partial.iter().fold(vec![ZERO; k], |a, b| a.iter().zip(b).map(|(x, y)| x + y).collect());
        w.par_chunks_mut(CHUNK).enumerate().for_each(|(c, wc)| {
            let off = c * CHUNK;
            for (q, hj) in basis.iter().zip(&h) {
                axpy(-*hj, &q[off..off + wc.len()], wc);
            }
        });
        for (c, hj) in coeffs.iter_mut().zip(&h) {
            *c += hj;
        }
    }
    coeffs
}

pub(crate) struct GmresOutcome {
    pub x: Vec<c64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `op(x) = b` from `x = 0` with restarted GMRES.
pub(crate) fn gmres<F>(mut op: F, b: &[c64], restart: usize, max_iter: usize, rtol: f64) -> Result<GmresOutcome>
where
    F: FnMut(&[c64]) -> Vec<c64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, relative_residual: 0.0 });
    }
    let restart = restart.max(1);
    let mut iterations = 0;
    let mut r = b.to_vec();
    loop {
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= rtol {
            return Ok(GmresOutcome { x, iterations, relative_residual: rel });
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence { iterations, residual: rel });
        }
        let mut basis: Vec<Vec<c64>> = Vec::with_capacity(restart + 1);
        let mut v0 = r.clone();
        scale(1.0 / beta, &mut v0);
        basis.push(v0);
        // Hessenberg columns after Givens rotation, so `hess[j]` is upper triangular.
        let mut hess: Vec<Vec<c64>> = Vec::with_capacity(restart);
        let mut rotations: Vec<(f64, c64)> = Vec::with_capacity(restart);
        let mut g = vec![c64::new(beta, 0.0)];
        let mut inner_rel = rel;
        for _ in 0..restart {
            if iterations >= max_iter {
                break;
            }
            let mut w = op(basis.last().unwrap());
            iterations += 1;
            let mut h = orthogonalize(&basis, &mut w);
            let hnext = norm(&w);
            for (k, &(c, s)) in rotations.iter().enumerate() {
                let t = h[k] * c + s * h[k + 1];
                h[k + 1] = -s.conj() * h[k] + h[k + 1] * c;
                h[k] = t;
            }
            let j = h.len() - 1;
            let (c, s, diag) = givens(h[j], c64::new(hnext, 0.0));
            h[j] = diag;
            rotations.push((c, s));
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            hess.push(h);
            inner_rel = g[j + 1].norm() / bnorm;
            if inner_rel <= rtol || hnext <= 1e-300 {
                break;
            }
            scale(1.0 / hnext, &mut w);
            basis.push(w);
        }
        let m = hess.len();
        let mut y = vec![ZERO; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for k in i + 1..m {
                acc -= hess[k][i] * y[k];
            }
            y[i] = acc / hess[i][i];
        }
        for (q, yi) in basis.iter().zip(&y) {
            axpy(*yi, q, &mut x);
        }
        let ax = op(&x);
        iterations += 1;
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        log::debug!("gmres cycle: {iterations} products, estimated {inner_rel:.3e}, true {:.3e}", norm(&r) / bnorm);
    }
}

/// Rotation `(c, s)` with `[c s; −s̄ c]·[a; b] = [r; 0]`.
fn givens(a: c64, b: c64) -> (f64, c64, c64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO, a);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn, c64::new(bn, 0.0));
    }
    let r = an.hypot(bn);
    let phase = a / an;
    (an / r, phase * b.conj() / r, phase * r)
}

pub(crate) struct RitzPairs {
    pub values: Vec<c64>,
    pub vectors: Vec<Vec<c64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// `want` Ritz pairs of largest modulus of `op`, restarting from the sum
/// of the wanted Ritz vectors.
pub(crate) fn arnoldi_largest<F>(
    mut op: F,
    start: &[c64],
    krylov_dim: usize,
    want: usize,
    max_restarts: usize,
    tol: f64,
) -> Result<RitzPairs>
where
    F: FnMut(&[c64]) -> Result<Vec<c64>>,
{
    let n = start.len();
    let m = krylov_dim.min(n).max(want);
    let mut v = start.to_vec();
    let mut iterations = 0;
    for restart in 0..=max_restarts {
        let vn = norm(&v);
        if vn == 0.0 {
            return Err(Error::LinearAlgebra("Arnoldi start vector vanished".into()));
        }
        scale(1.0 / vn, &mut v);
        let mut basis = vec![v.clone()];
        let mut hmat = Mat::<c64>::zeros(m + 1, m);
        let mut size = m;
        let mut tail = 0.0;
        for j in 0..m {
            let mut w = op(&basis[j])?;
            iterations += 1;
            let h = orthogonalize(&basis, &mut w);
            for (i, hi) in h.iter().enumerate() {
                hmat[(i, j)] = *hi;
            }
            let hn = norm(&w);
            hmat[(j + 1, j)] = c64::new(hn, 0.0);
            tail = hn;
            if hn <= 1e-13 * h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300) {
                size = j + 1;
                tail = 0.0;
                break;
            }
            if j + 1 < m {
                scale(1.0 / hn, &mut w);
                basis.push(w);
            }
        }
        let hk = Mat::<c64>::from_fn(size, size, |i, j| hmat[(i, j)]);
        let eig = hk.eigen().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let evals = eig.S().column_vector();
        let evecs = eig.U();
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| evals[b].norm().total_cmp(&evals[a].norm()));
        let take = want.min(size);
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        let mut converged = true;
        for &k in order.iter().take(take) {
            let theta = evals[k];
            let s: Vec<c64> = (0..size).map(|i| evecs[(i, k)]).collect();
            let snorm = norm(&s);
            let estimate = tail * s[size - 1].norm() / snorm;
            if estimate > tol * theta.norm() {
                converged = false;
            }
            let mut y = vec![ZERO; n];
            for (q, si) in basis.iter().zip(&s) {
                axpy(*si / snorm, q, &mut y);
            }
            values.push(theta);
            vectors.push(y);
        }
        if converged || restart == max_restarts {
            return Ok(RitzPairs { values, vectors, converged, iterations });
        }
        v = vec![ZERO; n];
        for y in &vectors {
            axpy(c64::new(1.0, 0.0), y, &mut v);
        }
    }
    unreachable!("the final restart always returns")
}
