//! Partial transposition and entanglement negativity.

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};

/// Eigenvalues below this count as negative.
pub const NEGATIVE_CUTOFF: f64 = -1e-10;
/// Negativities below this are not distinguishable from solver noise.
pub const NOISE_FLOOR: f64 = 1e-8;
/// Negativities above this count as entangled.
pub const ENTANGLED_THRESHOLD: f64 = 1e-9;

/// Transposes the indices of every mode in `modes`:
/// `out[(…m_ν…), (…n_ν…)] = ρ[(…n_ν…), (…m_ν…)]`.
pub fn partial_transpose_modes(rho: &DensityMatrix, modes: &[usize]) -> Result<Mat<c64>> {
    let space = rho.space();
    if modes.is_empty() {
        return Err(Error::EmptySelection);
    }
    for &m in modes {
        space.check_mode(m)?;
    }
    let d = space.local_dim();
    let strides: Vec<usize> = modes.iter().map(|&m| space.stride(m)).collect();
    let dim = space.joint_dim();
    let src = rho.matrix();
    let mut out = Mat::<c64>::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            let (mut ti, mut tj) = (i, j);
            for &s in &strides {
                let mi = (i / s) % d;
                let nj = (j / s) % d;
                ti = ti - mi * s + nj * s;
                tj = tj - nj * s + mi * s;
            }
            out[(ti, tj)] = src[(i, j)];
        }
    }
    Ok(out)
}

pub fn partial_transpose(rho: &DensityMatrix, mode: usize) -> Result<Mat<c64>> {
    partial_transpose_modes(rho, &[mode])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    /// Transposed modes, 0-based.
    pub modes: Vec<usize>,
    pub negative_eigenvalues: Vec<f64>,
    pub negativity: f64,
    pub min_eigenvalue: f64,
    pub entangled: bool,
    pub below_noise_floor: bool,
}

/// `𝒩 = Σ_k |θ_k|` over the negative eigenvalues of `PT_modes ρ`.
pub fn negativity_modes(rho: &DensityMatrix, modes: &[usize]) -> Result<NegativityResult> {
    let pt = partial_transpose_modes(rho, modes)?;
    let n = pt.nrows();
    let herm = Mat::<c64>::from_fn(n, n, |i, j| (pt[(i, j)] + pt[(j, i)].conj()) * 0.5);
    let mut ev = herm
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("partial-transpose eigensolve: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    let negative_eigenvalues: Vec<f64> = ev.iter().copied().filter(|&x| x < NEGATIVE_CUTOFF).collect();
    let negativity: f64 = negative_eigenvalues.iter().map(|x| x.abs()).sum();
    Ok(NegativityResult {
        modes: modes.to_vec(),
        negative_eigenvalues,
        negativity,
        min_eigenvalue: ev.first().copied().unwrap_or(0.0),
        entangled: negativity > ENTANGLED_THRESHOLD,
        below_noise_floor: negativity < NOISE_FLOOR,
    })
}

pub fn negativity(rho: &DensityMatrix, mode: usize) -> Result<NegativityResult> {
    negativity_modes(rho, &[mode])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bell(d: usize) -> DensityMatrix {
        let s = FockSpace::new(2, d).unwrap();
        let mut psi = vec![c64::new(0.0, 0.0); s.joint_dim()];
        psi[s.flat_index(&[0, 0]).unwrap()] = c64::new(1.0, 0.0);
        psi[s.flat_index(&[1, 1]).unwrap()] = c64::new(1.0, 0.0);
        DensityMatrix::pure(s, &psi).unwrap()
    }

    fn random_state(n: usize, d: usize, seed: u64) -> DensityMatrix {
        let s = FockSpace::new(n, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = s.joint_dim();
        let g = Mat::<c64>::from_fn(dim, dim, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        DensityMatrix::new(s, &g * g.adjoint()).unwrap().normalized().unwrap()
    }

    #[test]
    fn bell_state_spectrum() {
        for d in [2, 3, 4] {
            let rho = bell(d);
            let pt = partial_transpose(&rho, 0).unwrap();
            let mut ev = pt.self_adjoint_eigenvalues(Side::Lower).unwrap();
            ev.sort_by(f64::total_cmp);
            let nonzero: Vec<f64> = ev.into_iter().filter(|x| x.abs() > 1e-12).collect();
            assert_eq!(nonzero.len(), 4);
            assert!((nonzero[0] + 0.5).abs() < 1e-12);
            assert!(nonzero[1..].iter().all(|x| (x - 0.5).abs() < 1e-12));
            let n = negativity(&rho, 1).unwrap();
            assert!((n.negativity - 0.5).abs() < 1e-10);
            assert!(n.entangled && !n.below_noise_floor);
        }
    }

    #[test]
    fn product_and_separable_states() {
        let s1 = FockSpace::new(1, 4).unwrap();
        let a = DensityMatrix::coherent(s1, &[c64::new(0.5, 0.2)]).unwrap();
        let b = DensityMatrix::fock_state(s1, &[2]).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ba = b.tensor(&a).unwrap();
        let mix = ab.mix(&ba, 0.4).unwrap();
        for rho in [&ab, &mix] {
            for mode in 0..2 {
                let n = negativity(rho, mode).unwrap();
                assert!(n.negativity < 1e-9 && !n.entangled);
            }
        }
    }

    #[test]
    fn involution_trace_and_hermiticity() {
        let rho = random_state(3, 3, 9);
        for mode in 0..3 {
            let pt = partial_transpose(&rho, mode).unwrap();
            let back = partial_transpose(&DensityMatrix::new(*rho.space(), pt.clone()).unwrap(), mode).unwrap();
            assert_eq!(back, rho.matrix().to_owned());
            let tr: c64 = (0..pt.nrows()).map(|i| pt[(i, i)]).sum();
            assert!((tr - rho.trace()).norm() == 0.0);
            let mut herm: f64 = 0.0;
            for i in 0..pt.nrows() {
                for j in 0..pt.ncols() {
                    herm = herm.max((pt[(i, j)] - pt[(j, i)].conj()).norm());
                }
            }
            assert!(herm < 1e-12);
        }
    }

    #[test]
    fn complementary_transposes_share_spectrum() {
        // PT over {1, 2} is the full transpose of PT over {0}.
        let rho = random_state(3, 3, 4);
        let one = negativity(&rho, 0).unwrap();
        let two = negativity_modes(&rho, &[1, 2]).unwrap();
        assert!((one.negativity - two.negativity).abs() < 1e-12);
    }

    #[test]
    fn invalid_modes() {
        let rho = bell(2);
        assert!(matches!(partial_transpose(&rho, 2), Err(Error::ModeOutOfRange { .. })));
        assert!(matches!(negativity_modes(&rho, &[]), Err(Error::EmptySelection)));
    }
}
