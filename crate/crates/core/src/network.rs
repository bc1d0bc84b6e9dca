//! Parameters of a network of degenerate optical parametric oscillators.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real symmetric `N × N` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Matrix with every entry equal to `value`.
    pub fn filled(n: usize, value: f64) -> Self {
        Self { n, data: vec![value; n * n] }
    }

    pub fn from_diagonal(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = value;
        }
        m
    }

    /// Builds from nested rows; fails unless square and symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidParams(format!(
                    "coupling matrix is not square: row of length {} in a {n}-row matrix",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let m = Self { n, data };
        m.check_symmetric()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)` together.
    pub fn set_symmetric(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::InvalidParams(format!(
                        "matrix is not symmetric at ({i}, {j}): {} != {}",
                        self.get(i, j),
                        self.get(j, i)
                    )));
                }
            }
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("matrix has non-finite entries".into()));
        }
        Ok(())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let m = Mat::<f64>::from_fn(self.n, self.n, |i, j| self.get(i, j));
        let mut ev = m
            .self_adjoint_eigenvalues(Side::Lower)
            .expect("symmetric eigensolve of a small finite matrix");
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Coupling graphs used throughout the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Connectivity {
    /// `C = 0`, `W = βI`.
    Decoupled,
    /// All-to-all `C_{μν} = c`, `W = βI`.
    Ferromagnetic { c: f64 },
    /// Triangle with `C_12 = C_23 = c`, `C_13 = −c`. Every edge has the same
    /// weight, the sign product is negative, and the Ising model has six
    /// degenerate ground states.
    FullyFrustrated { c: f64 },
    /// Triangle with `C_12 = C_23 = c`, `C_13 = −2c`. The top eigenvector of
    /// `C` is `(1, 0, −1)`, leaving the middle oscillator dark.
    NonIsing { c: f64 },
    /// `C = 0` and `W_{μν} = β` for all pairs: one collective two-photon
    /// loss channel with jump operator `Σ_μ a_μ²`.
    Hyperspin,
}

impl Connectivity {
    pub fn coupling(&self) -> Option<f64> {
        match *self {
            Self::Ferromagnetic { c } | Self::FullyFrustrated { c } | Self::NonIsing { c } => Some(c),
            Self::Decoupled | Self::Hyperspin => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Decoupled => "decoupled".into(),
            Self::Ferromagnetic { c } => format!("ferromagnetic(c={c})"),
            Self::FullyFrustrated { c } => format!("fully_frustrated(c={c})"),
            Self::NonIsing { c } => format!("non_ising(c={c})"),
            Self::Hyperspin => "hyperspin".into(),
        }
    }

    /// `(C, W)` for `num_modes` oscillators with saturation `beta`.
    pub fn matrices(&self, num_modes: usize, beta: f64) -> Result<(CouplingMatrix, CouplingMatrix)> {
        let n = num_modes;
        let diag_w = CouplingMatrix::from_diagonal(n, beta);
        let triangle = |c13: f64, c: f64| -> Result<CouplingMatrix> {
            if n != 3 {
                return Err(Error::InvalidParams(format!(
                    "{} is defined for three oscillators, got {n}",
                    self.label()
                )));
            }
            let mut m = CouplingMatrix::zeros(3);
            m.set_symmetric(0, 1, c);
            m.set_symmetric(1, 2, c);
            m.set_symmetric(0, 2, c13);
            Ok(m)
        };
        match *self {
            Self::Decoupled => Ok((CouplingMatrix::zeros(n), diag_w)),
            Self::Ferromagnetic { c } => {
                let mut m = CouplingMatrix::filled(n, c);
                for i in 0..n {
                    m.set_symmetric(i, i, 0.0);
                }
                Ok((m, diag_w))
            }
            Self::FullyFrustrated { c } => Ok((triangle(-c, c)?, diag_w)),
            Self::NonIsing { c } => Ok((triangle(-2.0 * c, c)?, diag_w)),
            Self::Hyperspin => Ok((CouplingMatrix::zeros(n), CouplingMatrix::filled(n, beta))),
        }
    }
}

/// Pump `h`, loss `g`, saturation `β` and the coupling matrices `C`, `W`.
///
/// The one-photon rate matrix is `G_{μμ} = g`, `G_{μν} = −C_{μν}`; the
/// two-photon rate matrix is `W` with `W_{μμ} = β`. Neither is required to be
/// positive semidefinite, but [`NetworkParams::warnings`] reports when it is
/// not, since the master equation is then not of Lindblad form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub pump: f64,
    pub loss: f64,
    pub beta: f64,
    pub c: CouplingMatrix,
    pub w: CouplingMatrix,
}

impl NetworkParams {
    pub fn new(pump: f64, loss: f64, beta: f64, c: CouplingMatrix, w: CouplingMatrix) -> Result<Self> {
        let p = Self { pump, loss, beta, c, w };
        p.validate()?;
        for warning in p.warnings() {
            log::warn!("{warning}");
        }
        Ok(p)
    }

    pub fn from_connectivity(num_modes: usize, connectivity: Connectivity, pump: f64, loss: f64, beta: f64) -> Result<Self> {
        let (c, w) = connectivity.matrices(num_modes, beta)?;
        Self::new(pump, loss, beta, c, w)
    }

    pub fn num_modes(&self) -> usize {
        self.c.dim()
    }

    /// Same network at a different pump.
    pub fn with_pump(&self, pump: f64) -> Self {
        Self { pump, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.dim();
        if n == 0 {
            return Err(Error::InvalidParams("network has no oscillators".into()));
        }
        if self.w.dim() != n {
            return Err(Error::InvalidParams(format!(
                "C is {n}x{n} but W is {0}x{0}",
                self.w.dim()
            )));
        }
        for (name, v) in [("pump", self.pump), ("loss", self.loss), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        self.c.check_symmetric()?;
        self.w.check_symmetric()?;
        for i in 0..n {
            if self.c.get(i, i) != 0.0 {
                return Err(Error::InvalidParams(format!("C has nonzero diagonal entry at {i}")));
            }
            if self.w.get(i, i) != self.beta {
                return Err(Error::InvalidParams(format!(
                    "W diagonal entry {i} is {} but beta is {}",
                    self.w.get(i, i),
                    self.beta
                )));
            }
        }
        Ok(())
    }

    /// One-photon rate matrix `G`.
    pub fn one_photon_rates(&self) -> CouplingMatrix {
        let n = self.num_modes();
        let mut g = CouplingMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = if i == j { self.loss } else { -self.c.get(i, j) };
                g.data[i * n + j] = v;
            }
        }
        g
    }

    /// Human-readable notes on rate matrices that are not positive semidefinite.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let gmin = self.one_photon_rates().lambda_min();
        if gmin < -1e-12 {
            out.push(format!("one-photon rate matrix is not positive semidefinite (min eigenvalue {gmin:.3e})"));
        }
        let wmin = self.w.lambda_min();
        if wmin < -1e-12 {
            out.push(format!("two-photon rate matrix is not positive semidefinite (min eigenvalue {wmin:.3e})"));
        }
        out
    }

    /// Largest rate appearing in the generator, used to scale tolerances.
    pub fn rate_scale(&self) -> f64 {
        let cmax = self.c.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let wmax = self.w.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.pump.max(self.loss).max(cmax).max(wmax).max(f64::MIN_POSITIVE)
    }
}
