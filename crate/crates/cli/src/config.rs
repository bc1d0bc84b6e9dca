//! TOML experiment description.
//!
//! ```toml
//! name = "ferromagnetic-pair"
//! n_max = 12
//!
//! [pump]
//! relative = true
//! range = { start = 0.6, stop = 1.8, points = 13 }
//!
//! [[series]]
//! label = "c=0.1"
//! modes = 2
//! connectivity = { kind = "ferromagnetic", c = 0.1 }
//!
//! [outputs]
//! steady = true
//! negativity = { modes = [] }
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use hyperspin::classical::classical_threshold;
use hyperspin::network::{Connectivity, CouplingMatrix, NetworkParams};
use hyperspin::observables::AxisSpec;
use hyperspin::steady::{SolverMethod, SolverOptions};

use crate::CliError;

fn default_loss() -> f64 {
    0.5
}

fn default_beta() -> f64 {
    0.1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Highest Fock level kept per mode.
    pub n_max: usize,
    pub pump: PumpSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub outputs: OutputsConfig,
    pub series: Vec<SeriesConfig>,
}

/// Pump values, absolute or in units of each series' classical threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    #[serde(default)]
    pub relative: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeSpec>,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl RangeSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl PumpSpec {
    pub fn absolute(values: Vec<f64>) -> Self {
        Self {
            relative: false,
            values,
            range: None,
        }
    }

    pub fn relative(values: Vec<f64>) -> Self {
        Self {
            relative: true,
            values,
            range: None,
        }
    }

    pub fn relative_range(start: f64, stop: f64, points: usize) -> Self {
        Self {
            relative: true,
            values: Vec::new(),
            range: Some(RangeSpec { start, stop, points }),
        }
    }

    /// Listed values followed by the range.
    pub fn raw_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        if let Some(r) = &self.range {
            v.extend(r.values());
        }
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default)]
    pub options: SolverOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub label: String,
    pub modes: usize,
    #[serde(default = "default_loss")]
    pub loss: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<Connectivity>,
    /// Explicit one-photon coupling, used instead of `connectivity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    /// Explicit two-photon matrix; defaults to `β·1` with `c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
}

impl SeriesConfig {
    pub fn graph(label: impl Into<String>, modes: usize, connectivity: Connectivity) -> Self {
        Self {
            label: label.into(),
            modes,
            loss: default_loss(),
            beta: default_beta(),
            connectivity: Some(connectivity),
            c: None,
            w: None,
        }
    }

    /// Network at pump `h`.
    pub fn params(&self, h: f64) -> Result<NetworkParams, CliError> {
        let cfg = |e: hyperspin::Error| CliError::Config(format!("series {:?}: {e}", self.label));
        match (&self.connectivity, &self.c) {
            (Some(conn), None) => {
                if self.w.is_some() {
                    return Err(CliError::Config(format!("series {:?}: `w` needs an explicit `c`", self.label)));
                }
                NetworkParams::from_connectivity(self.modes, *conn, h, self.loss, self.beta).map_err(cfg)
            }
            (None, Some(c)) => {
                let c = CouplingMatrix::from_rows(c).map_err(cfg)?;
                let w = match &self.w {
                    Some(w) => CouplingMatrix::from_rows(w).map_err(cfg)?,
                    None => CouplingMatrix::from_diagonal(self.modes, self.beta),
                };
                if c.dim() != self.modes || w.dim() != self.modes {
                    return Err(CliError::Config(format!(
                        "series {:?}: coupling matrices must be {m}×{m}",
                        self.label,
                        m = self.modes
                    )));
                }
                NetworkParams::new(h, self.loss, self.beta, c, w).map_err(cfg)
            }
            _ => Err(CliError::Config(format!(
                "series {:?}: give exactly one of `connectivity` or `c`",
                self.label
            ))),
        }
    }

    pub fn threshold(&self) -> Result<f64, CliError> {
        Ok(classical_threshold(&self.params(0.0)?))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default)]
    pub steady: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negativity: Option<NegativityOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalOutput>,
}

impl OutputsConfig {
    pub fn is_empty(&self) -> bool {
        !self.steady && self.wigner.is_none() && self.negativity.is_none() && self.classical.is_none()
    }

    pub fn needs_quantum(&self) -> bool {
        self.steady || self.wigner.is_some() || self.negativity.is_some()
    }
}

/// Grid for Wigner dumps: explicit axes, or a real cube `[−w, w]^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerOutput {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_grid_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<AxisSpec>>,
}

fn default_half_width() -> f64 {
    3.0
}

fn default_grid_points() -> usize {
    61
}

impl Default for WignerOutput {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            points: default_grid_points(),
            axes: None,
        }
    }
}

/// Modes to transpose, 1-based; empty means every mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativityOutput {
    #[serde(default)]
    pub modes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalOutput {
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_starts() -> usize {
    64
}

impl Default for ClassicalOutput {
    fn default() -> Self {
        Self { starts: default_starts() }
    }
}

/// Parses `text`, reporting the line of any schema error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        match line {
            Some(l) => CliError::Config(format!("line {l}: {}", e.message())),
            None => CliError::Config(e.message().to_string()),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.series.is_empty() {
            return bad("at least one [[series]] is required".into());
        }
        if self.outputs.is_empty() {
            return bad("no outputs requested".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        let pumps = self.pump.raw_values();
        if pumps.is_empty() {
            return bad("pump: give `values` or a non-empty `range`".into());
        }
        if let Some(v) = pumps.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return bad(format!("pump: invalid value {v}"));
        }
        let mut labels: Vec<&str> = self.series.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("series labels must be unique".into());
        }
        for s in &self.series {
            let hth = s.threshold()?;
            if self.pump.relative && !(hth > 0.0) {
                return bad(format!("series {:?}: relative pump needs a positive threshold, got {hth}", s.label));
            }
            if let Some(neg) = &self.outputs.negativity {
                if let Some(m) = neg.modes.iter().find(|&&m| m == 0 || m > s.modes) {
                    return bad(format!("negativity: mode {m} outside 1..={}", s.modes));
                }
            }
            if let Some(w) = &self.outputs.wigner {
                let spec = w.slice(s.modes);
                spec.validate(s.modes).map_err(|e| CliError::Config(format!("wigner: {e}")))?;
            }
        }
        Ok(())
    }

    /// Pump values of `series`, in ascending order of the listing.
    pub fn pumps(&self, series: &SeriesConfig) -> Result<Vec<f64>, CliError> {
        let raw = self.pump.raw_values();
        if self.pump.relative {
            let hth = series.threshold()?;
            Ok(raw.into_iter().map(|r| r * hth).collect())
        } else {
            Ok(raw)
        }
    }
}

impl WignerOutput {
    pub fn slice(&self, modes: usize) -> hyperspin::observables::SliceSpec {
        match &self.axes {
            Some(axes) => hyperspin::observables::SliceSpec::new(axes.clone()),
            None => hyperspin::observables::SliceSpec::real_cube(modes, self.half_width, self.points),
        }
    }
}
