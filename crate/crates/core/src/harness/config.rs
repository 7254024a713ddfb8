use std::f64::consts::SQRT_2;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sawtooth::MAX_DENSE_QUBITS;
use crate::seeds;

/// How the coupling amplitude follows the detuning amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRule {
    /// `J = 0`.
    Zero,
    /// `J = delta`.
    Equal,
}

impl CouplingRule {
    pub fn rho(self, eps: f64) -> f64 {
        match self {
            CouplingRule::Zero => 0.0,
            CouplingRule::Equal => eps,
        }
    }
}

/// Per-point statistic of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Eta,
    EtaTilde,
    /// Mean eigenstate entropy against the ideal eigenbasis.
    Entropy,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Eta => "eta",
            Statistic::EtaTilde => "eta_tilde",
            Statistic::Entropy => "entropy",
        }
    }

    /// Level at which the border is read off.
    pub fn default_threshold(self) -> f64 {
        match self {
            Statistic::Entropy => 1.0,
            _ => crate::spectral::DEFAULT_THRESHOLD,
        }
    }

    /// Entropy grows with imperfection strength; the spacing measures fall.
    pub fn rises(self) -> bool {
        self == Statistic::Entropy
    }
}

/// Dynamical regime of the map, fixed by the chaos parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Ergodic,
    QuasiIntegrable,
    Integrable,
}

impl Regime {
    pub fn of(chaos: f64) -> Self {
        if !(-4.0..=0.0).contains(&chaos) {
            Regime::Ergodic
        } else if [-1.0, -2.0, -3.0].contains(&chaos) {
            Regime::Integrable
        } else {
            Regime::QuasiIntegrable
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Ergodic => "ergodic",
            Regime::QuasiIntegrable => "quasi-integrable",
            Regime::Integrable => "integrable",
        }
    }

    pub fn default_statistic(self) -> Statistic {
        match self {
            Regime::Ergodic => Statistic::Eta,
            _ => Statistic::EtaTilde,
        }
    }

    /// Angle and momentum shifts used to lift symmetry degeneracies.
    pub fn default_shift(self) -> f64 {
        match self {
            Regime::QuasiIntegrable => SQRT_2 / 5.0,
            _ => 0.0,
        }
    }

    pub fn scaling_model(self) -> crate::spectral::ScalingModel {
        match self {
            Regime::Integrable => crate::spectral::ScalingModel::Algebraic,
            _ => crate::spectral::ScalingModel::Exponential,
        }
    }
}

/// Imperfection strengths of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsGrid {
    /// `per_decade` logarithmically spaced points from `min` to `max`.
    Log {
        min: f64,
        max: f64,
        per_decade: usize,
    },
    /// Explicit ascending values; `0` is allowed.
    Values(Vec<f64>),
}

impl Default for EpsGrid {
    fn default() -> Self {
        EpsGrid::Log {
            min: 1e-7,
            max: 1e-1,
            per_decade: 8,
        }
    }
}

impl EpsGrid {
    /// Parses `min:max:per-decade`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::Config(format!("eps grid must be min:max:per-decade, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let grid = EpsGrid::Log {
            min: parts[0].trim().parse().map_err(|_| bad())?,
            max: parts[1].trim().parse().map_err(|_| bad())?,
            per_decade: parts[2].trim().parse().map_err(|_| bad())?,
        };
        grid.values()?;
        Ok(grid)
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            EpsGrid::Log {
                min,
                max,
                per_decade,
            } => {
                if !(*min > 0.0 && max >= min && max.is_finite()) || *per_decade == 0 {
                    return Err(Error::Config(format!(
                        "log eps grid needs 0 < min <= max and per_decade >= 1 (min={min}, max={max}, per_decade={per_decade})"
                    )));
                }
                let span = (max / min).log10() * *per_decade as f64;
                let steps = (span + 1e-9).floor() as usize;
                Ok((0..=steps)
                    .map(|k| min * 10f64.powf(k as f64 / *per_decade as f64))
                    .collect())
            }
            EpsGrid::Values(v) => {
                if v.is_empty() {
                    return Err(Error::Config("eps grid is empty".into()));
                }
                if v.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
                    return Err(Error::Config(
                        "eps values must be finite and non-negative".into(),
                    ));
                }
                if v.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(
                        "eps values must be strictly ascending".into(),
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

fn default_tau() -> f64 {
    1.0
}

fn default_threshold() -> Option<f64> {
    None
}

/// A sweep or border study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Classical chaos parameter `K`.
    pub chaos: f64,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub eps_grid: EpsGrid,
    pub coupling: CouplingRule,
    #[serde(default = "default_tau")]
    pub tau_g: f64,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub phi: f64,
    /// Realizations per point; `None` follows the 10^4-level budget rule.
    #[serde(default)]
    pub realizations: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    pub statistic: Statistic,
    /// Also compute the eigenstate entropy at every point.
    #[serde(default)]
    pub track_entropy: bool,
    /// Border level; defaults to 0.2 for spacing measures and 1 for entropy.
    #[serde(default = "default_threshold")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses all cores.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Write raw little-endian spectra next to the CSV output.
    #[serde(default)]
    pub dump_spectra: bool,
}

/// Realization count giving about `10^4` quasi-energies per point.
pub fn default_realizations(n_q: usize) -> usize {
    (10_000 / (1usize << n_q)).clamp(3, 1000)
}

impl ExperimentConfig {
    /// Defaults appropriate to the regime of `chaos`.
    pub fn new(chaos: f64, qubits: Vec<usize>) -> Self {
        let regime = Regime::of(chaos);
        let shift = regime.default_shift();
        Self {
            chaos,
            qubits,
            eps_grid: EpsGrid::default(),
            coupling: CouplingRule::Zero,
            tau_g: 1.0,
            theta0: shift,
            phi: shift,
            realizations: None,
            master_seed: 0,
            statistic: regime.default_statistic(),
            track_entropy: false,
            threshold: None,
            output_dir: None,
            threads: None,
            dump_spectra: false,
        }
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.chaos)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
            .unwrap_or_else(|| self.statistic.default_threshold())
    }

    pub fn realizations_for(&self, n_q: usize) -> usize {
        self.realizations
            .unwrap_or_else(|| default_realizations(n_q))
    }

    pub fn needs_entropy(&self) -> bool {
        self.track_entropy || self.statistic == Statistic::Entropy
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chaos.is_finite() && self.theta0.is_finite() && self.phi.is_finite()) {
            return Err(Error::Config("map parameters must be finite".into()));
        }
        if self.qubits.is_empty() {
            return Err(Error::Config("no qubit counts given".into()));
        }
        if let Some(&n) = self
            .qubits
            .iter()
            .find(|&&n| !(2..=MAX_DENSE_QUBITS).contains(&n))
        {
            return Err(Error::Config(format!(
                "qubit count {n} outside [2, {MAX_DENSE_QUBITS}]"
            )));
        }
        if self.realizations == Some(0) {
            return Err(Error::Config(
                "need at least one realization per point".into(),
            ));
        }
        if !(self.tau_g > 0.0 && self.tau_g.is_finite()) {
            return Err(Error::Config(format!(
                "tau_g must be positive, got {}",
                self.tau_g
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        if self.threshold.is_some_and(|t| !t.is_finite()) {
            return Err(Error::Config("threshold must be finite".into()));
        }
        self.eps_grid.values()?;
        Ok(())
    }

    /// SHA-256 over every field that changes computed statistics.
    pub fn hash(&self) -> String {
        let key = serde_json::json!({
            "chaos": self.chaos,
            "qubits": self.qubits,
            "eps_grid": self.eps_grid,
            "coupling": self.coupling,
            "tau_g": self.tau_g,
            "theta0": self.theta0,
            "phi": self.phi,
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "statistic": self.statistic,
            "track_entropy": self.track_entropy,
            "threshold": self.threshold,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        seeds::hex(&digest)
    }
}
