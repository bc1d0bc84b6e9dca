//! Explicit fourth-order Runge–Kutta integration of `dρ/dt = Lρ`.

use faer::{c64, Mat};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::liouvillian::SparseSuperoperator;
use crate::network::NetworkParams;

/// `0.02 / (g + h + β n_max²)`.
pub fn default_time_step(params: &NetworkParams, space: &FockSpace) -> f64 {
    let n = space.n_max() as f64;
    0.02 / (params.loss + params.pump + params.beta * n * n).max(f64::MIN_POSITIVE)
}

/// Integrates from `rho0` to `t_final` with a step no larger than `dt`.
pub fn evolve(l: &SparseSuperoperator, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<DensityMatrix> {
    if rho0.space() != l.space() {
        return Err(Error::DimensionMismatch {
            expected: l.space().joint_dim(),
            found: rho0.dim(),
        });
    }
    if !(dt > 0.0 && t_final >= 0.0) {
        return Err(Error::InvalidParams(format!("need dt > 0 and t_final >= 0, got dt = {dt}, t_final = {t_final}")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let form = l.lindblad();
    let tr0 = rho0.trace();
    let bound = 1e6 * rho0.max_abs().max(1.0);

    // Column-major buffers keep the inner loop free of allocations.
    let d = rho0.dim();
    let m0 = rho0.matrix();
    let mut rho: Vec<c64> = (0..d * d).map(|k| m0[(k % d, k / d)]).collect();
    let mut k = vec![vec![c64::new(0.0, 0.0); d * d]; 4];
    let mut stage = vec![c64::new(0.0, 0.0); d * d];
    let mut tmp = vec![c64::new(0.0, 0.0); d * d];
    for step in 0..steps {
        for s in 0..4 {
            let src: &[c64] = if s == 0 {
                &rho
            } else {
                let f = if s == 3 { h } else { 0.5 * h };
                for ((st, r), kp) in stage.iter_mut().zip(&rho).zip(&k[s - 1]) {
                    *st = r + kp * f;
                }
                &stage
            };
            form.apply_col_major(src, &mut k[s], &mut tmp);
        }
        let w = h / 6.0;
        for i in 0..d * d {
            rho[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * w;
        }
        if step % 64 == 0 || step + 1 == steps {
            let worst = rho.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if !worst.is_finite() || worst > bound {
                return Err(Error::Unstable {
                    time: (step + 1) as f64 * h,
                    norm: worst,
                });
            }
        }
    }
    let rho = Mat::from_fn(d, d, |i, j| rho[j * d + i]);
    let out = DensityMatrix::new(*rho0.space(), rho)?.symmetrized();
    let drift = (out.trace() - tr0).norm();
    if drift > 1e-9 {
        log::warn!("trace drifted by {drift:.3e} over t = {t_final}");
    }
    Ok(out)
}
