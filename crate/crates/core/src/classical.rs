//! Mean-field limit of the network, obtained by replacing every operator
//! with its expectation value `a_μ → ⟨a_μ⟩ ≡ z_μ`.
//!
//! # Derivation
//!
//! Write the generator as `Lρ = Aρ + ρA† + Σ_p X_p ρ Z_p†`, where
//! `A = −iH − ½ Σ G_{μν} a†_μ a_ν − ¼ Σ W_{μν} a†²_μ a²_ν`. The Heisenberg
//! picture gives `d⟨O⟩/dt = ⟨A†O + OA + Σ_p Z_p† O X_p⟩`. For `O = a_λ`:
//!
//! * `H = i(h/8) Σ (a†² − a²)` contributes `−i[a_λ, H] = (h/4) a†_λ`.
//! * The one-photon channels (`X_μ = a_μ`, `Z_μ = Σ_ν G_{μν} a_ν`) collapse to
//!   `−½ Σ_ν G_{λν} a_ν`, because `a_λ` commutes with every `a_ν`.
//! * For the two-photon channels (`X_μ = a²_μ`, `Z_μ = ½ Σ_ν W_{μν} a²_ν`),
//!   use symmetric `W` to regroup the three terms as
//!   `−¼ Σ W_{μν} [a_λ, a†²_μ] a²_ν = −½ a†_λ Σ_ν W_{λν} a²_ν`.
//!
//! Every term is normal ordered. The equation below is therefore exact for
//! coherent states, and the mean-field step only drops correlations:
//!
//! `dz_λ/dt = (h/4) z̄_λ − ½ Σ_ν G_{λν} z_ν − ½ z̄_λ Σ_ν W_{λν} z²_ν`.
//!
//! With `G = g·1 − C` and real `z = X`:
//!
//! `dX_λ/dt = (h/4 − g/2) X_λ + ½ Σ_ν C_{λν} X_ν − ½ X_λ Σ_μ W_{λμ} X²_μ`.
//!
//! The origin destabilises once `h/4 − g/2 + λ_max(C)/2 > 0`, which gives
//! `h_th = 2(g − λ_max)`. For `C = 0` and `W_{μν} = β` everywhere, the
//! nonzero fixed points fill the sphere `Σ X² = S²` with `S² = (h/2 − g)/β`.
//! For `W = β·1` each mode sits at `±S` on its own.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkParams;

/// Real amplitudes `X_μ = Re⟨a_μ⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: Vec<f64>,
}

impl ClassicalState {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("classical amplitudes must be finite".into()));
        }
        Ok(Self { x })
    }

    pub fn radius_squared(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }
}

pub fn classical_rhs(params: &NetworkParams, x: &[f64]) -> Vec<f64> {
    let n = params.num_modes();
    debug_assert_eq!(x.len(), n);
    let lin = params.pump / 4.0 - params.loss / 2.0;
    (0..n)
        .map(|l| {
            let mut coupling = 0.0;
            let mut sat = 0.0;
            for m in 0..n {
                coupling += params.c.get(l, m) * x[m];
                sat += params.w.get(l, m) * x[m] * x[m];
            }
            lin * x[l] + 0.5 * coupling - 0.5 * x[l] * sat
        })
        .collect()
}

/// Complex mean-field equations; they reduce to [`classical_rhs`] on real input.
pub fn classical_rhs_complex(params: &NetworkParams, z: &[c64]) -> Vec<c64> {
    let n = params.num_modes();
    debug_assert_eq!(z.len(), n);
    let g = params.one_photon_rates();
    (0..n)
        .map(|l| {
            let mut damp = c64::new(0.0, 0.0);
            let mut sat = c64::new(0.0, 0.0);
            for m in 0..n {
                damp += z[m] * g.get(l, m);
                sat += z[m] * z[m] * params.w.get(l, m);
            }
            z[l].conj() * (params.pump / 4.0) - damp * 0.5 - z[l].conj() * sat * 0.5
        })
        .collect()
}

/// `∂(dX_λ/dt)/∂X_κ`. Symmetric because `C` and `W` are.
pub fn classical_jacobian(params: &NetworkParams, x: &[f64]) -> Mat<f64> {
    let n = params.num_modes();
    let lin = params.pump / 4.0 - params.loss / 2.0;
    Mat::from_fn(n, n, |l, k| {
        let mut v = 0.5 * params.c.get(l, k) - x[l] * params.w.get(l, k) * x[k];
        if l == k {
            let sat: f64 = (0..n).map(|m| params.w.get(l, m) * x[m] * x[m]).sum();
            v += lin - 0.5 * sat;
        }
        v
    })
}

/// `h_th = 2(g − λ_max(C))`.
pub fn classical_threshold(params: &NetworkParams) -> f64 {
    2.0 * (params.loss - params.c.lambda_max())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HypersphereRadius {
    Radius { value: f64 },
    BelowThreshold,
}

impl HypersphereRadius {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Radius { value } => Some(*value),
            Self::BelowThreshold => None,
        }
    }
}

/// `S = √((h/2 − g)/β)`, flagged when `h ≤ 2g`.
pub fn hypersphere_radius(params: &NetworkParams) -> HypersphereRadius {
    let gain = params.pump / 2.0 - params.loss;
    if gain <= 0.0 || params.beta <= 0.0 {
        HypersphereRadius::BelowThreshold
    } else {
        HypersphereRadius::Radius {
            value: (gain / params.beta).sqrt(),
        }
    }
}

fn rk4_step(params: &NetworkParams, x: &mut [f64], dt: f64) {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(u, v)| u + s * v).collect::<Vec<_>>();
    let k1 = classical_rhs(params, x);
    let k2 = classical_rhs(params, &add(x, &k1, 0.5 * dt));
    let k3 = classical_rhs(params, &add(x, &k2, 0.5 * dt));
    let k4 = classical_rhs(params, &add(x, &k3, dt));
    for i in 0..x.len() {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
}

/// RK4 trajectory of the real equations, sampled after every step.
pub fn integrate(params: &NetworkParams, x0: &[f64], t_final: f64, dt: f64) -> Result<Vec<Vec<f64>>> {
    if x0.len() != params.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: params.num_modes(),
            found: x0.len(),
        });
    }
    if !(dt > 0.0 && t_final >= 0.0) {
        return Err(Error::InvalidParams(format!("need dt > 0 and t_final >= 0, got dt = {dt}, t_final = {t_final}")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let mut x = x0.to_vec();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x.clone());
    for step in 0..steps {
        rk4_step(params, &mut x, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable {
                time: (step + 1) as f64 * h,
                norm: f64::INFINITY,
            });
        }
        path.push(x.clone());
    }
    Ok(path)
}

/// RK4 endpoint of the complex equations.
pub fn integrate_complex(params: &NetworkParams, z0: &[c64], t_final: f64, dt: f64) -> Result<Vec<c64>> {
    if z0.len() != params.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: params.num_modes(),
            found: z0.len(),
        });
    }
    if !(dt > 0.0 && t_final >= 0.0) {
        return Err(Error::InvalidParams(format!("need dt > 0 and t_final >= 0, got dt = {dt}, t_final = {t_final}")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let add = |a: &[c64], b: &[c64], s: f64| a.iter().zip(b).map(|(u, v)| u + v * s).collect::<Vec<_>>();
    let mut z = z0.to_vec();
    for step in 0..steps {
        let k1 = classical_rhs_complex(params, &z);
        let k2 = classical_rhs_complex(params, &add(&z, &k1, 0.5 * h));
        let k3 = classical_rhs_complex(params, &add(&z, &k2, 0.5 * h));
        let k4 = classical_rhs_complex(params, &add(&z, &k3, h));
        for i in 0..z.len() {
            z[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        if z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Unstable {
                time: (step + 1) as f64 * h,
                norm: f64::INFINITY,
            });
        }
    }
    Ok(z)
}

pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;
pub const DEDUP_TOLERANCE: f64 = 1e-6;
const STABILITY_SLACK: f64 = 1e-9;
const MAX_SPANS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: ClassicalState,
    /// `‖rhs(X̄)‖₂`.
    pub residual: f64,
    /// Largest Jacobian eigenvalue.
    pub max_eigenvalue: f64,
    /// No unstable direction; marginal directions (continuous families) count as stable.
    pub stable: bool,
    /// Random starts that ended here.
    pub hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// Sorted lexicographically; the origin is always present.
    pub points: Vec<FixedPoint>,
    pub starts: usize,
    /// Starts whose polish did not reach the residual tolerance.
    pub failed_starts: usize,
    /// Starts that relaxed onto the origin.
    pub origin_hits: usize,
}

impl FixedPointReport {
    pub fn nonzero(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(|p| p.state.radius_squared().sqrt() > DEDUP_TOLERANCE)
    }
}

/// Levenberg–Marquardt on `rhs(X) = 0` with the analytic Jacobian. Singular
/// directions (the hyperspin ring) are handled by the damping term.
fn polish(params: &NetworkParams, x0: &[f64]) -> (Vec<f64>, f64) {
    let n = x0.len();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut x = x0.to_vec();
    let mut f = classical_rhs(params, &x);
    let mut r = norm(&f);
    let mut mu = 1e-6;
    for _ in 0..200 {
        if r <= 0.1 * FIXED_POINT_TOLERANCE {
            break;
        }
        let j = classical_jacobian(params, &x);
        let jt_j = j.transpose() * &j;
        let mut lhs = jt_j.clone();
        for i in 0..n {
            lhs[(i, i)] += mu;
        }
        let rhs = Mat::from_fn(n, 1, |i, _| -(0..n).map(|k| j[(k, i)] * f[k]).sum::<f64>());
        let step = lhs.partial_piv_lu().solve(&rhs);
        let trial: Vec<f64> = (0..n).map(|i| x[i] + step[(i, 0)]).collect();
        let ft = classical_rhs(params, &trial);
        let rt = norm(&ft);
        if rt.is_finite() && rt < r {
            x = trial;
            f = ft;
            r = rt;
            mu = (mu * 0.1).max(1e-15);
        } else {
            mu *= 10.0;
            if mu > 1e8 {
                break;
            }
        }
    }
    (x, r)
}

fn max_jacobian_eigenvalue(params: &NetworkParams, x: &[f64]) -> f64 {
    classical_jacobian(params, x)
        .self_adjoint_eigenvalues(Side::Lower)
        .map(|ev| ev.into_iter().fold(f64::NEG_INFINITY, f64::max))
        .unwrap_or(f64::NAN)
}

/// Relaxes `n_starts` random initial conditions for `t = 50/g`, polishes each
/// endpoint and merges endpoints within [`DEDUP_TOLERANCE`].
pub fn find_fixed_points(params: &NetworkParams, n_starts: usize, seed: u64) -> Result<FixedPointReport> {
    if n_starts == 0 {
        return Err(Error::InvalidParams("need at least one start".into()));
    }
    let n = params.num_modes();
    let scale = 2.0 * hypersphere_radius(params).value().unwrap_or(1.0).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|_| (0..n).map(|_| rng.random_range(-scale..scale)).collect())
        .collect();

    let rate = params.rate_scale().max(f64::MIN_POSITIVE);
    let t_final = 50.0 / if params.loss > 0.0 { params.loss } else { rate };
    let stiffness = params.pump + params.loss + params.c.lambda_max().abs() + params.beta * scale * scale * n as f64;
    let dt = (0.05 / stiffness.max(f64::MIN_POSITIVE)).min(t_final / 100.0);

    let endpoints: Vec<Option<(Vec<f64>, f64)>> = starts
        .par_iter()
        .map(|x0| {
            let mut x = x0.clone();
            let steps = (t_final / dt).ceil() as usize;
            // Just above threshold the flow is slow: an endpoint may sit outside
            // Newton's basin, or still linger near the unstable origin. Keep
            // integrating until the polish lands on an attractor.
            let mut last = None;
            for _ in 0..MAX_SPANS {
                for _ in 0..steps {
                    rk4_step(params, &mut x, dt);
                    if x.iter().any(|v| !v.is_finite()) {
                        return None;
                    }
                }
                let (xp, r) = polish(params, &x);
                if r <= FIXED_POINT_TOLERANCE {
                    if max_jacobian_eigenvalue(params, &xp) <= STABILITY_SLACK {
                        return Some((xp, r));
                    }
                    last = Some((xp, r));
                }
            }
            last
        })
        .collect();

    let mut points: Vec<FixedPoint> = Vec::new();
    let mut failed_starts = 0;
    let absorb = |x: Vec<f64>, residual: f64, hit: bool, points: &mut Vec<FixedPoint>| {
        let found = points.iter_mut().find(|p| {
            p.state.x.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= DEDUP_TOLERANCE
        });
        match found {
            Some(p) => p.hits += hit as usize,
            None => {
                let max_eigenvalue = max_jacobian_eigenvalue(params, &x);
                points.push(FixedPoint {
                    state: ClassicalState { x },
                    residual,
                    max_eigenvalue,
                    stable: max_eigenvalue <= STABILITY_SLACK,
                    hits: hit as usize,
                });
            }
        }
    };
    absorb(vec![0.0; n], 0.0, false, &mut points);
    for e in endpoints {
        match e {
            Some((x, r)) => absorb(x, r, true, &mut points),
            None => failed_starts += 1,
        }
    }
    if failed_starts == n_starts {
        log::warn!("no start converged to a fixed point within {FIXED_POINT_TOLERANCE:e}");
    }
    let origin_hits = points[0].hits;
    points.sort_by(|a, b| {
        a.state
            .x
            .iter()
            .zip(&b.state.x)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(FixedPointReport {
        points,
        starts: n_starts,
        failed_starts,
        origin_hits,
    })
}
