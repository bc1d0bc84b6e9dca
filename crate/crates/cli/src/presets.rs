//! Named experiments: single-point Wigner snapshots (`fig1*`) and
//! negativity sweeps (`fig2`, `fig3*`).

use std::path::PathBuf;

use hyperspin::network::Connectivity;

use crate::config::{
    ClassicalOutput, ExperimentConfig, NegativityOutput, OutputsConfig, PumpSpec, SeriesConfig, SolverConfig, WignerOutput,
};

/// Truncation used by [`Scale::Desk`].
pub fn desk_n_max(modes: usize) -> usize {
    if modes <= 2 {
        12
    } else {
        8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// Truncation of the reference runs.
    Full,
    /// Reduced truncation that finishes in minutes on one core.
    Desk,
}

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Truncation of the reference runs.
    pub n_max: usize,
    build: fn() -> (PumpSpec, Vec<SeriesConfig>, OutputsConfig),
}

impl Preset {
    pub fn modes(&self) -> usize {
        (self.build)().1.iter().map(|s| s.modes).max().unwrap_or(0)
    }

    pub fn config(&self, scale: Scale) -> ExperimentConfig {
        let (pump, series, outputs) = (self.build)();
        let n_max = match scale {
            Scale::Full => self.n_max,
            Scale::Desk => desk_n_max(self.modes()).min(self.n_max),
        };
        ExperimentConfig {
            name: self.name.into(),
            seed: 1,
            output_dir: PathBuf::from("out").join(self.name),
            n_max,
            pump,
            solver: SolverConfig::default(),
            outputs,
            series,
        }
    }
}

const C: f64 = 0.1;
/// Operating point of the snapshots, in units of the classical threshold.
pub const SNAPSHOT_PUMP: f64 = 1.5;

fn snapshot(modes: usize, label: &str, connectivity: Connectivity) -> (PumpSpec, Vec<SeriesConfig>, OutputsConfig) {
    let wigner = if modes == 2 {
        WignerOutput { half_width: 3.0, points: 61, axes: None }
    } else {
        WignerOutput { half_width: 3.0, points: 31, axes: None }
    };
    (
        PumpSpec::relative(vec![SNAPSHOT_PUMP]),
        vec![SeriesConfig::graph(label, modes, connectivity)],
        OutputsConfig {
            steady: true,
            wigner: Some(wigner),
            negativity: Some(NegativityOutput::default()),
            classical: Some(ClassicalOutput::default()),
        },
    )
}

fn sweep(pump: PumpSpec, series: Vec<SeriesConfig>) -> (PumpSpec, Vec<SeriesConfig>, OutputsConfig) {
    (
        pump,
        series,
        OutputsConfig {
            steady: true,
            wigner: None,
            negativity: Some(NegativityOutput::default()),
            classical: None,
        },
    )
}

fn linear_family(modes: usize, kind: fn(f64) -> Connectivity, prefix: &str, couplings: &[f64]) -> Vec<SeriesConfig> {
    couplings
        .iter()
        .map(|&c| SeriesConfig::graph(format!("{prefix}-c{c}"), modes, kind(c)))
        .collect()
}

fn fm(c: f64) -> Connectivity {
    Connectivity::Ferromagnetic { c }
}

fn ff(c: f64) -> Connectivity {
    Connectivity::FullyFrustrated { c }
}

fn ni(c: f64) -> Connectivity {
    Connectivity::NonIsing { c }
}

/// Pump grid of the three-mode sweeps, in units of the threshold.
pub const FIG3_PUMPS: [f64; 7] = [0.4, 0.6, 0.8, 1.0, 1.2, 1.5, 1.8];

fn fig3_pumps() -> PumpSpec {
    PumpSpec::relative(FIG3_PUMPS.to_vec())
}

pub const FIG3_COUPLINGS: [f64; 3] = [0.05, 0.1, 0.15];
pub const FIG2_COUPLINGS: [f64; 4] = [0.05, 0.1, 0.15, 0.2];

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "fig1a",
            summary: "two decoupled oscillators, real-plane Wigner snapshot",
            n_max: 14,
            build: || snapshot(2, "decoupled", Connectivity::Decoupled),
        },
        Preset {
            name: "fig1b",
            summary: "two ferromagnetically coupled oscillators (c = 0.1)",
            n_max: 14,
            build: || snapshot(2, "ferromagnetic", fm(C)),
        },
        Preset {
            name: "fig1c",
            summary: "two-mode hyperspin, ring-shaped Wigner function",
            n_max: 14,
            build: || snapshot(2, "hyperspin", Connectivity::Hyperspin),
        },
        Preset {
            name: "fig1d",
            summary: "three oscillators, C12 = C23 = c, C13 = -2c (middle mode dark)",
            n_max: 14,
            build: || snapshot(3, "non-ising", ni(C)),
        },
        Preset {
            name: "fig1e",
            summary: "three decoupled oscillators",
            n_max: 14,
            build: || snapshot(3, "decoupled", Connectivity::Decoupled),
        },
        Preset {
            name: "fig1f",
            summary: "three ferromagnetically coupled oscillators (c = 0.1)",
            n_max: 14,
            build: || snapshot(3, "ferromagnetic", fm(C)),
        },
        Preset {
            name: "fig1g",
            summary: "three-mode hyperspin, spherical-shell Wigner function",
            n_max: 16,
            build: || snapshot(3, "hyperspin", Connectivity::Hyperspin),
        },
        Preset {
            name: "fig1h",
            summary: "three oscillators, C12 = C23 = c, C13 = -c (fully frustrated)",
            n_max: 14,
            build: || snapshot(3, "fully-frustrated", ff(C)),
        },
        Preset {
            name: "fig2",
            summary: "two-mode negativity sweep: ferromagnetic c = 0.05..0.2 and the hyperspin",
            n_max: 12,
            build: || {
                let mut series = linear_family(2, fm, "ferromagnetic", &FIG2_COUPLINGS);
                series.push(SeriesConfig::graph("hyperspin", 2, Connectivity::Hyperspin));
                sweep(PumpSpec::relative_range(0.5, 2.0, 16), series)
            },
        },
        Preset {
            name: "fig3e",
            summary: "three-mode ferromagnetic negativity sweep, all partial transposes",
            n_max: 12,
            build: || sweep(fig3_pumps(), linear_family(3, fm, "ferromagnetic", &FIG3_COUPLINGS)),
        },
        Preset {
            name: "fig3f",
            summary: "fully frustrated triangle (C13 = -c) negativity sweep",
            n_max: 12,
            build: || sweep(fig3_pumps(), linear_family(3, ff, "fully-frustrated", &FIG3_COUPLINGS)),
        },
        Preset {
            name: "fig3g",
            summary: "non-Ising triangle (C13 = -2c) negativity sweep; PT2 differs",
            n_max: 12,
            build: || sweep(fig3_pumps(), linear_family(3, ni, "non-ising", &FIG3_COUPLINGS)),
        },
        Preset {
            name: "fig3h",
            summary: "three-mode hyperspin negativity sweep",
            n_max: 16,
            build: || sweep(fig3_pumps(), vec![SeriesConfig::graph("hyperspin", 3, Connectivity::Hyperspin)]),
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_at_both_scales() {
        for p in presets() {
            for scale in [Scale::Full, Scale::Desk] {
                let cfg = p.config(scale);
                cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
                assert!(cfg.n_max <= p.n_max);
            }
            assert_eq!(p.config(Scale::Desk).n_max, desk_n_max(p.modes()));
        }
    }

    #[test]
    fn couplings_match_graphs() {
        let fig1d = preset("fig1d").unwrap().config(Scale::Full);
        let p = fig1d.series[0].params(1.0).unwrap();
        assert_eq!((p.c.get(0, 1), p.c.get(1, 2), p.c.get(0, 2)), (0.1, 0.1, -0.2));
        let fig1g = preset("fig1g").unwrap().config(Scale::Full);
        assert_eq!(fig1g.n_max, 16);
        let p = fig1g.series[0].params(1.0).unwrap();
        assert!(p.c.is_zero() && (0..3).all(|i| (0..3).all(|j| p.w.get(i, j) == 0.1)));
        let fig3g = preset("fig3g").unwrap().config(Scale::Full);
        assert!(fig3g.series.iter().all(|s| matches!(s.connectivity, Some(Connectivity::NonIsing { .. }))));
        let fig2 = preset("fig2").unwrap().config(Scale::Desk);
        assert_eq!(fig2.series.len(), 5);
        let r = fig2.pump.raw_values();
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[r.len() - 1] - 2.0).abs() < 1e-12);
    }
}
