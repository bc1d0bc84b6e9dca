//! Wigner functions, reduced states and single-mode moments.
//!
//! The Wigner function is
//!
//! ```text
//! W(α) = (2/π)^N Tr[ρ ⊗_μ K(α_μ)],   K(α)_{mn} = ⟨m|D(2α)|n⟩ (−1)ⁿ
//! ```
//!
//! With quadratures `x = (a + a†)/2` and `p = (a − a†)/(2i)`, the vacuum is
//! `W = (2/π) e^{−2|α|²}` and a coherent state `|α⟩` peaks at `Re α`, `Im α`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::FockSpace;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Largest number of grid points evaluated in one call.
pub const MAX_GRID_POINTS: usize = 50_000_000;

/// `K(α)` for one mode.
#[derive(Clone, Debug)]
pub struct DisplacementKernel {
    pub alpha: c64,
    pub matrix: Mat<c64>,
    /// `e^{−2|α|²}` underflowed and the matrix was set to zero.
    pub underflow: bool,
}

/// Generalized Laguerre polynomials `L_n^{(k)}(x)` for `n = 0..len`.
fn laguerre_column(k: usize, x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(1.0);
    if len > 1 {
        out.push(1.0 + k as f64 - x);
    }
    for n in 1..len.saturating_sub(1) {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + k as f64 - x) * out[n] - (nf + k as f64) * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    out
}

/// `⟨m|D(β)|n⟩` for `m, n < d` from the Laguerre closed form.
pub fn displacement_matrix(beta: c64, d: usize) -> (Mat<c64>, bool) {
    let x = beta.norm_sqr();
    let envelope = (-0.5 * x).exp();
    if envelope == 0.0 {
        return (Mat::zeros(d, d), true);
    }
    let mut m = Mat::<c64>::zeros(d, d);
    let minus_conj = -beta.conj();
    for k in 0..d {
        let lag = laguerre_column(k, x, d - k);
        let mut pow_b = c64::new(1.0, 0.0);
        let mut pow_mb = c64::new(1.0, 0.0);
        for _ in 0..k {
            pow_b *= beta;
            pow_mb *= minus_conj;
        }
        for n in 0..d - k {
            // sqrt(n! / (n + k)!)
            let ratio = (n + 1..=n + k).map(|j| j as f64).product::<f64>().sqrt().recip();
            let common = ratio * envelope * lag[n];
            m[(n + k, n)] = pow_b * common;
            if k > 0 {
                m[(n, n + k)] = pow_mb * common;
            }
        }
    }
    (m, false)
}

pub fn displacement_kernel(alpha: c64, d: usize) -> Result<DisplacementKernel> {
    if d < 2 {
        return Err(Error::InvalidSpace(format!("local dimension must be at least 2, got {d}")));
    }
    let (mut matrix, underflow) = displacement_matrix(alpha * 2.0, d);
    for n in (1..d).step_by(2) {
        for m in 0..d {
            matrix[(m, n)] = -matrix[(m, n)];
        }
    }
    Ok(DisplacementKernel { alpha, matrix, underflow })
}

/// Sample points of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum AxisSpec {
    Fixed { re: f64, im: f64 },
    /// `α = x + i·imag` for `points` values of `x` in `[min, max]`.
    Real { min: f64, max: f64, points: usize, #[serde(default)] imag: f64 },
    /// `α = real + i·p` for `points` values of `p` in `[min, max]`.
    Imag { min: f64, max: f64, points: usize, #[serde(default)] real: f64 },
    /// Full single-mode phase space, real part outer.
    Plane { re_min: f64, re_max: f64, re_points: usize, im_min: f64, im_max: f64, im_points: usize },
}

fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![min];
    }
    let step = (max - min) / (points - 1) as f64;
    (0..points).map(|i| min + step * i as f64).collect()
}

impl AxisSpec {
    pub fn real(min: f64, max: f64, points: usize) -> Self {
        Self::Real { min, max, points, imag: 0.0 }
    }

    pub fn fixed(alpha: c64) -> Self {
        Self::Fixed { re: alpha.re, im: alpha.im }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |min: f64, max: f64, points: usize| -> Result<()> {
            if points == 0 {
                return Err(Error::InvalidGrid("axis needs at least one point".into()));
            }
            if !(min.is_finite() && max.is_finite()) || (points > 1 && max <= min) {
                return Err(Error::InvalidGrid(format!("invalid axis range [{min}, {max}]")));
            }
            Ok(())
        };
        match *self {
            Self::Fixed { re, im } if re.is_finite() && im.is_finite() => Ok(()),
            Self::Fixed { .. } => Err(Error::InvalidGrid("non-finite fixed value".into())),
            Self::Real { min, max, points, .. } | Self::Imag { min, max, points, .. } => check(min, max, points),
            Self::Plane { re_min, re_max, re_points, im_min, im_max, im_points } => {
                check(re_min, re_max, re_points)?;
                check(im_min, im_max, im_points)
            }
        }
    }

    pub fn points(&self) -> usize {
        match *self {
            Self::Fixed { .. } => 1,
            Self::Real { points, .. } | Self::Imag { points, .. } => points,
            Self::Plane { re_points, im_points, .. } => re_points * im_points,
        }
    }

    pub fn values(&self) -> Vec<c64> {
        match *self {
            Self::Fixed { re, im } => vec![c64::new(re, im)],
            Self::Real { min, max, points, imag } => linspace(min, max, points).into_iter().map(|x| c64::new(x, imag)).collect(),
            Self::Imag { min, max, points, real } => linspace(min, max, points).into_iter().map(|p| c64::new(real, p)).collect(),
            Self::Plane { re_min, re_max, re_points, im_min, im_max, im_points } => {
                let ims = linspace(im_min, im_max, im_points);
                linspace(re_min, re_max, re_points)
                    .into_iter()
                    .flat_map(|x| ims.iter().map(move |&p| c64::new(x, p)))
                    .collect()
            }
        }
    }

    /// Grid spacing of a one-dimensional axis.
    pub fn step(&self) -> Option<f64> {
        match *self {
            Self::Real { min, max, points, .. } | Self::Imag { min, max, points, .. } if points > 1 => {
                Some((max - min) / (points - 1) as f64)
            }
            _ => None,
        }
    }

    fn cell_area(&self) -> Option<f64> {
        match *self {
            Self::Plane { re_min, re_max, re_points, im_min, im_max, im_points } if re_points > 1 && im_points > 1 => {
                Some((re_max - re_min) / (re_points - 1) as f64 * (im_max - im_min) / (im_points - 1) as f64)
            }
            _ => None,
        }
    }

    fn header(&self) -> String {
        match *self {
            Self::Fixed { re, im } => format!("fixed {re:e} {im:e}"),
            Self::Real { min, max, points, imag } => {
                format!("real {min:e} {max:e} {points} step {:e} imag {imag:e}", self.step().unwrap_or(0.0))
            }
            Self::Imag { min, max, points, real } => {
                format!("imag {min:e} {max:e} {points} step {:e} real {real:e}", self.step().unwrap_or(0.0))
            }
            Self::Plane { re_min, re_max, re_points, im_min, im_max, im_points } => {
                format!("plane {re_min:e} {re_max:e} {re_points} {im_min:e} {im_max:e} {im_points}")
            }
        }
    }

    fn parse_header(fields: &[&str], line: usize) -> Result<Self> {
        let err = |m: &str| Error::GridParse { line, message: m.into() };
        let f = |i: usize| -> Result<f64> {
            fields.get(i).ok_or_else(|| err("missing field"))?.parse::<f64>().map_err(|_| err("bad number"))
        };
        let u = |i: usize| -> Result<usize> {
            fields.get(i).ok_or_else(|| err("missing field"))?.parse::<usize>().map_err(|_| err("bad count"))
        };
        match fields.first().copied() {
            Some("fixed") => Ok(Self::Fixed { re: f(1)?, im: f(2)? }),
            Some("real") => Ok(Self::Real { min: f(1)?, max: f(2)?, points: u(3)?, imag: f(7)? }),
            Some("imag") => Ok(Self::Imag { min: f(1)?, max: f(2)?, points: u(3)?, real: f(7)? }),
            Some("plane") => Ok(Self::Plane {
                re_min: f(1)?,
                re_max: f(2)?,
                re_points: u(3)?,
                im_min: f(4)?,
                im_max: f(5)?,
                im_points: u(6)?,
            }),
            _ => Err(err("unknown axis kind")),
        }
    }
}

/// One axis per mode; the grid is their Cartesian product with mode 0 slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceSpec {
    pub axes: Vec<AxisSpec>,
}

impl SliceSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Self {
        Self { axes }
    }

    /// The real quadrature hyperplane `Im α_μ = 0` on `[−r, r]^N`.
    pub fn real_cube(num_modes: usize, half_width: f64, points: usize) -> Self {
        Self::new(vec![AxisSpec::real(-half_width, half_width, points); num_modes])
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(AxisSpec::points).collect()
    }

    pub fn total_points(&self) -> usize {
        self.axes.iter().map(AxisSpec::points).try_fold(1usize, |acc, p| acc.checked_mul(p)).unwrap_or(usize::MAX)
    }

    pub fn validate(&self, num_modes: usize) -> Result<()> {
        if self.axes.len() != num_modes {
            return Err(Error::DimensionMismatch { expected: num_modes, found: self.axes.len() });
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.total_points() > MAX_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{} grid points exceed the limit of {MAX_GRID_POINTS}",
                self.total_points()
            )));
        }
        Ok(())
    }

    /// Phase-space volume element, if every axis is a full plane.
    pub fn volume_element(&self) -> Option<f64> {
        self.axes.iter().map(AxisSpec::cell_area).product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: SliceSpec,
    /// Row-major over the axes, mode 0 slowest.
    pub values: Vec<f64>,
    /// Largest imaginary residue encountered.
    pub max_imag: f64,
    /// Riemann sum `Σ W ΔV` when the grid covers full phase space.
    pub normalization: Option<f64>,
}

impl WignerGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.spec.shape()
    }

    /// Value at a multi-index into the axes.
    pub fn at(&self, index: &[usize]) -> f64 {
        let shape = self.shape();
        let flat = index.iter().zip(&shape).fold(0, |acc, (&i, &n)| acc * n + i);
        self.values[flat]
    }

    /// Multi-indices of strict local maxima over the axis-neighbour stencil
    /// (`2·ndim` neighbours, interior points only).
    pub fn local_maxima(&self) -> Vec<Vec<usize>> {
        let shape = self.shape();
        let nd = shape.len();
        let strides: Vec<usize> = (0..nd).map(|k| shape[k + 1..].iter().product()).collect();
        let mut out = Vec::new();
        'points: for flat in 0..self.values.len() {
            let idx: Vec<usize> = (0..nd).map(|k| (flat / strides[k]) % shape[k]).collect();
            let v = self.values[flat];
            let mut moved = false;
            for k in 0..nd {
                if shape[k] == 1 {
                    continue;
                }
                if idx[k] == 0 || idx[k] + 1 == shape[k] {
                    continue 'points;
                }
                moved = true;
                if self.values[flat - strides[k]] >= v || self.values[flat + strides[k]] >= v {
                    continue 'points;
                }
            }
            if moved {
                out.push(idx);
            }
        }
        out
    }

    /// Coordinates `α_μ` of a multi-index.
    pub fn coordinates(&self, index: &[usize]) -> Vec<c64> {
        self.spec.axes.iter().zip(index).map(|(a, &i)| a.values()[i]).collect()
    }

    /// Plain-text dump: `#` header lines, then one value per line.
    pub fn write_to<W: Write>(&self, mut w: W, metadata: &[(String, String)]) -> Result<()> {
        let mut head = String::new();
        writeln!(head, "# wigner grid v1").unwrap();
        writeln!(head, "# convention W(alpha) = (2/pi)^N Tr[rho prod_mu D(2 alpha_mu) (-1)^n_mu]; x = (a + a^dag)/2, p = (a - a^dag)/(2i)").unwrap();
        writeln!(head, "# order row-major over axes, axis 1 slowest").unwrap();
        for (k, v) in metadata {
            writeln!(head, "# meta {k} {v}").unwrap();
        }
        for (i, a) in self.spec.axes.iter().enumerate() {
            writeln!(head, "# axis {} {}", i + 1, a.header()).unwrap();
        }
        match self.normalization {
            Some(n) => writeln!(head, "# normalization {n:.17e}").unwrap(),
            None => writeln!(head, "# normalization none").unwrap(),
        }
        writeln!(head, "# max_imag {:.3e}", self.max_imag).unwrap();
        w.write_all(head.as_bytes())?;
        let mut body = String::with_capacity(self.values.len() * 25);
        for v in &self.values {
            writeln!(body, "{v:.17e}").unwrap();
        }
        w.write_all(body.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<(Self, Vec<(String, String)>)> {
        let mut axes = Vec::new();
        let mut meta = Vec::new();
        let mut values = Vec::new();
        let mut normalization = None;
        let mut max_imag = 0.0;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                match fields.first().copied() {
                    Some("axis") => axes.push(AxisSpec::parse_header(&fields[2..], lineno)?),
                    Some("meta") if fields.len() >= 2 => meta.push((fields[1].to_string(), fields[2..].join(" "))),
                    Some("normalization") => {
                        normalization = match fields.get(1).copied() {
                            Some("none") | None => None,
                            Some(v) => Some(v.parse::<f64>().map_err(|_| Error::GridParse { line: lineno, message: "bad normalization".into() })?),
                        }
                    }
                    Some("max_imag") => {
                        max_imag = fields.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.0);
                    }
                    _ => {}
                }
                continue;
            }
            values.push(trimmed.parse::<f64>().map_err(|_| Error::GridParse { line: lineno, message: format!("bad value {trimmed:?}") })?);
        }
        let spec = SliceSpec::new(axes);
        if spec.total_points() != values.len() {
            return Err(Error::GridParse {
                line: 0,
                message: format!("header implies {} values, found {}", spec.total_points(), values.len()),
            });
        }
        Ok((Self { spec, values, max_imag, normalization }, meta))
    }
}

/// Contracts a `(d·b) × (d·b)` row-major block matrix with the kernel of its
/// leading mode: `out[(r, s)] = Σ_{m,n} K[n, m] · T[(m, r), (n, s)]`.
fn contract_leading(t: &[c64], d: usize, b: usize, k: &Mat<c64>) -> Vec<c64> {
    let full = d * b;
    let mut out = vec![ZERO; b * b];
    for m in 0..d {
        for n in 0..d {
            let kv = k[(n, m)];
            if kv == ZERO {
                continue;
            }
            for r in 0..b {
                let row = &t[(m * b + r) * full + n * b..(m * b + r) * full + n * b + b];
                let o = &mut out[r * b..(r + 1) * b];
                for (oi, ti) in o.iter_mut().zip(row) {
                    *oi += kv * ti;
                }
            }
        }
    }
    out
}

fn kernels(axis: &AxisSpec, d: usize) -> Result<Vec<Mat<c64>>> {
    axis.values().into_iter().map(|a| displacement_kernel(a, d).map(|k| k.matrix)).collect()
}

/// `t` has side `d^levels.len()`.
fn evaluate(t: &[c64], d: usize, levels: &[Vec<Mat<c64>>], out: &mut Vec<c64>) {
    match levels.split_first() {
        None => out.push(t[0]),
        Some((ks, rest)) => {
            let b = d.pow(rest.len() as u32);
            for k in ks {
                let reduced = contract_leading(t, d, b, k);
                evaluate(&reduced, d, rest, out);
            }
        }
    }
}

/// Wigner function of `rho` on the product grid `spec`.
pub fn wigner(rho: &DensityMatrix, spec: &SliceSpec) -> Result<WignerGrid> {
    let space = rho.space();
    spec.validate(space.num_modes())?;
    let d = space.local_dim();
    let levels: Vec<Vec<Mat<c64>>> = spec.axes.iter().map(|a| kernels(a, d)).collect::<Result<_>>()?;
    let t = rho.to_vec();
    let b = space.joint_dim() / d;
    let prefactor = (2.0 / std::f64::consts::PI).powi(space.num_modes() as i32);
    let chunks: Vec<Vec<c64>> = levels[0]
        .par_iter()
        .map(|k| {
            let reduced = contract_leading(&t, d, b, k);
            let mut out = Vec::new();
            evaluate(&reduced, d, &levels[1..], &mut out);
            out
        })
        .collect();
    let raw: Vec<c64> = chunks.into_iter().flatten().collect();
    let max_imag = raw.iter().map(|z| (z.im * prefactor).abs()).fold(0.0, f64::max);
    let values: Vec<f64> = raw.iter().map(|z| z.re * prefactor).collect();
    let normalization = spec.volume_element().map(|dv| values.iter().sum::<f64>() * dv);
    Ok(WignerGrid { spec: spec.clone(), values, max_imag, normalization })
}

/// Wigner function at a single point.
pub fn wigner_at(rho: &DensityMatrix, alpha: &[c64]) -> Result<f64> {
    let spec = SliceSpec::new(alpha.iter().map(|&a| AxisSpec::fixed(a)).collect());
    Ok(wigner(rho, &spec)?.values[0])
}

/// Reduced state on the modes in `keep`, in ascending mode order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let space = rho.space();
    if keep.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    for &m in &kept {
        space.check_mode(m)?;
    }
    let d = space.local_dim();
    let reduced_space = FockSpace::new(kept.len(), d)?;
    let traced: Vec<usize> = (0..space.num_modes()).filter(|m| !kept.contains(m)).collect();
    let dt = d.pow(traced.len() as u32);
    let split = |k: usize| -> (usize, usize) {
        let a = kept.iter().fold(0, |acc, &m| acc * d + space.occupation(k, m));
        let b = traced.iter().fold(0, |acc, &m| acc * d + space.occupation(k, m));
        (a, b)
    };
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); dt];
    for k in 0..space.joint_dim() {
        let (a, b) = split(k);
        groups[b].push((k, a));
    }
    let dk = reduced_space.joint_dim();
    let mut out = Mat::<c64>::zeros(dk, dk);
    let m = rho.matrix();
    for g in &groups {
        for &(r, ra) in g {
            for &(c, ca) in g {
                out[(ra, ca)] += m[(r, c)];
            }
        }
    }
    DensityMatrix::new(reduced_space, out)
}

/// Photon number and quadrature moments of one mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_n: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

pub fn moments(rho: &DensityMatrix, mode: usize) -> Result<Moments> {
    let r = partial_trace(rho, &[mode])?;
    let d = r.dim();
    let m = r.matrix();
    // ⟨a^k⟩ and ⟨a†a⟩ directly from the reduced matrix.
    let mut a1 = ZERO;
    let mut a2 = ZERO;
    let mut n = 0.0;
    for k in 0..d {
        n += k as f64 * m[(k, k)].re;
        if k + 1 < d {
            a1 += m[(k + 1, k)] * (k as f64 + 1.0).sqrt();
        }
        if k + 2 < d {
            a2 += m[(k + 2, k)] * ((k as f64 + 1.0) * (k as f64 + 2.0)).sqrt();
        }
    }
    // x = (a + a†)/2: ⟨x²⟩ = (⟨a²⟩ + ⟨a†²⟩ + 2⟨a†a⟩ + 1)/4, using [a, a†] = 1.
    let mean_x = a1.re;
    let mean_p = a1.im;
    let x2 = (2.0 * a2.re + 2.0 * n + 1.0) / 4.0;
    let p2 = (-2.0 * a2.re + 2.0 * n + 1.0) / 4.0;
    Ok(Moments {
        mean_n: n,
        mean_x,
        mean_p,
        var_x: x2 - mean_x * mean_x,
        var_p: p2 - mean_p * mean_p,
    })
}
