//! Experiment configuration: a TOML document merged with repeatable
//! `--set key=value` overrides, flags taking precedence over the file and
//! the file over built-in defaults.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use dimersim_core::fock::DimerParams;
use dimersim_core::semiclassical::{SCParams, SCState};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub omega0: f64,
    pub u: f64,
    pub j: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub pump_l: f64,
    pub pump_r: f64,
    pub cutoff: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        // symmetric reference point: steady occupation 2 in both cavities
        Self {
            omega0: 1.0,
            u: 0.1,
            j: 0.026,
            gamma_l: 3e-4,
            gamma_r: 3e-4,
            pump_l: 2e-4,
            pump_r: 2e-4,
            cutoff: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InitialStateConfig {
    pub n_l: usize,
    pub n_r: usize,
}

impl Default for InitialStateConfig {
    fn default() -> Self {
        Self { n_l: 3, n_r: 1 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum GridSpacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeGridConfig {
    pub t_max: f64,
    pub n_points: usize,
    pub spacing: GridSpacing,
    /// First point of a logarithmic grid (linear grids start at 0).
    pub t_min: f64,
}

impl Default for TimeGridConfig {
    fn default() -> Self {
        Self {
            t_max: 1000.0,
            n_points: 2001,
            spacing: GridSpacing::Linear,
            t_min: 1e-2,
        }
    }
}

impl TimeGridConfig {
    pub fn build(&self) -> Result<Vec<f64>> {
        if self.n_points < 2 {
            bail!("time_grid.n_points must be at least 2");
        }
        if self.t_max <= 0.0 {
            bail!("time_grid.t_max must be positive");
        }
        let n = self.n_points;
        Ok(match self.spacing {
            GridSpacing::Linear => (0..n)
                .map(|k| self.t_max * k as f64 / (n - 1) as f64)
                .collect(),
            GridSpacing::Log => {
                if self.t_min <= 0.0 || self.t_min >= self.t_max {
                    bail!("time_grid.t_min must lie in (0, t_max) for log spacing");
                }
                let ratio = (self.t_max / self.t_min).ln();
                (0..n)
                    .map(|k| self.t_min * (ratio * k as f64 / (n - 1) as f64).exp())
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyGridConfig {
    /// When absent, the window is derived from the couplings and the mean
    /// steady-state occupation.
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub n_points: usize,
}

impl Default for FrequencyGridConfig {
    fn default() -> Self {
        Self {
            omega_min: None,
            omega_max: None,
            n_points: 2001,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Window for the time-averaged imbalance.
    pub average_from: f64,
    pub average_to: f64,
    /// Late-time decay fit: "envelope", "log-slope" or "none".
    pub fit: String,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            average_from: 0.0,
            average_to: 1000.0,
            fit: "envelope".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SemiclassicalConfig {
    pub n0: f64,
    pub z0: f64,
    pub phi0: f64,
    pub delta_omega: f64,
    pub gamma_eff_l: f64,
    pub gamma_eff_r: f64,
    pub t_end: f64,
    pub n_points: usize,
    /// Averaging horizon for the time-averaged imbalance.
    pub average_window: f64,
}

impl Default for SemiclassicalConfig {
    fn default() -> Self {
        Self {
            n0: 3.0,
            z0: 1.0,
            phi0: 0.0,
            delta_omega: 0.0,
            gamma_eff_l: 4e-4,
            gamma_eff_r: 4e-4,
            t_end: 200.0,
            n_points: 2001,
            average_window: 200.0,
        }
    }
}

impl SemiclassicalConfig {
    pub fn state(&self) -> Result<SCState> {
        SCState::new(self.n0, self.z0, self.phi0).map_err(|e| anyhow!("semiclassical: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Settable key, e.g. "system.j_over_u" or "semiclassical.z0".
    pub parameter: String,
    pub values: Vec<f64>,
    /// Pipeline run at every point: dynamics | steady | greens | semiclassical.
    pub target: String,
    /// Also emit the per-point series tables.
    pub emit_series: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parameter: "system.j_over_u".into(),
            values: vec![0.1, 0.26, 0.64, 1.5],
            target: "dynamics".into(),
            emit_series: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub format: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            format: "csv".into(),
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub initial_state: InitialStateConfig,
    pub time_grid: TimeGridConfig,
    pub frequency_grid: FrequencyGridConfig,
    pub dynamics: DynamicsConfig,
    pub semiclassical: SemiclassicalConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let config: Self = toml::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        Ok(config)
    }

    /// Apply one `key=value` override. Keys address the TOML structure with
    /// dots; `system.j_over_u` is accepted as a convenience and sets
    /// `system.j = value * system.u`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| anyhow!("value for `{key}` is not a number: `{v}`"))
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| anyhow!("value for `{key}` is not an integer: `{v}`"))
        };
        match key {
            "system.omega0" => self.system.omega0 = parse_f64(value)?,
            "system.u" => self.system.u = parse_f64(value)?,
            "system.j" => self.system.j = parse_f64(value)?,
            "system.j_over_u" => self.system.j = parse_f64(value)? * self.system.u,
            "system.gamma_l" => self.system.gamma_l = parse_f64(value)?,
            "system.gamma_r" => self.system.gamma_r = parse_f64(value)?,
            "system.pump_l" => self.system.pump_l = parse_f64(value)?,
            "system.pump_r" => self.system.pump_r = parse_f64(value)?,
            "system.cutoff" => self.system.cutoff = parse_usize(value)?,
            "initial_state.n_l" => self.initial_state.n_l = parse_usize(value)?,
            "initial_state.n_r" => self.initial_state.n_r = parse_usize(value)?,
            "time_grid.t_max" => self.time_grid.t_max = parse_f64(value)?,
            "time_grid.t_min" => self.time_grid.t_min = parse_f64(value)?,
            "time_grid.n_points" => self.time_grid.n_points = parse_usize(value)?,
            "time_grid.spacing" => {
                self.time_grid.spacing = match value {
                    "linear" => GridSpacing::Linear,
                    "log" => GridSpacing::Log,
                    _ => bail!("time_grid.spacing must be `linear` or `log`"),
                }
            }
            "frequency_grid.omega_min" => self.frequency_grid.omega_min = Some(parse_f64(value)?),
            "frequency_grid.omega_max" => self.frequency_grid.omega_max = Some(parse_f64(value)?),
            "frequency_grid.n_points" => self.frequency_grid.n_points = parse_usize(value)?,
            "dynamics.average_from" => self.dynamics.average_from = parse_f64(value)?,
            "dynamics.average_to" => self.dynamics.average_to = parse_f64(value)?,
            "dynamics.fit" => self.dynamics.fit = value.to_string(),
            "semiclassical.n0" => self.semiclassical.n0 = parse_f64(value)?,
            "semiclassical.z0" => self.semiclassical.z0 = parse_f64(value)?,
            "semiclassical.phi0" => self.semiclassical.phi0 = parse_f64(value)?,
            "semiclassical.delta_omega" => self.semiclassical.delta_omega = parse_f64(value)?,
            "semiclassical.gamma_eff_l" => self.semiclassical.gamma_eff_l = parse_f64(value)?,
            "semiclassical.gamma_eff_r" => self.semiclassical.gamma_eff_r = parse_f64(value)?,
            "semiclassical.t_end" => self.semiclassical.t_end = parse_f64(value)?,
            "semiclassical.n_points" => self.semiclassical.n_points = parse_usize(value)?,
            "semiclassical.average_window" => self.semiclassical.average_window = parse_f64(value)?,
            "sweep.parameter" => self.sweep.parameter = value.to_string(),
            "sweep.target" => self.sweep.target = value.to_string(),
            "sweep.values" => {
                self.sweep.values = value
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| anyhow!("sweep.values entry is not a number: `{v}`"))
                    })
                    .collect::<Result<Vec<f64>>>()?
            }
            "sweep.emit_series" => {
                self.sweep.emit_series = value
                    .parse::<bool>()
                    .map_err(|_| anyhow!("sweep.emit_series must be true or false"))?
            }
            "output.dir" => self.output.dir = value.to_string(),
            "output.format" => self.output.format = value.to_string(),
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    pub fn dimer_params(&self) -> Result<DimerParams> {
        DimerParams::new(
            self.system.omega0,
            self.system.u,
            self.system.j,
            self.system.gamma_l,
            self.system.gamma_r,
            self.system.pump_l,
            self.system.pump_r,
        )
        .map_err(|e| anyhow!("system: {e}"))
    }

    pub fn sc_params(&self) -> Result<SCParams> {
        SCParams::new(
            self.system.u,
            self.system.j,
            self.semiclassical.delta_omega,
            self.semiclassical.gamma_eff_l,
            self.semiclassical.gamma_eff_r,
        )
        .map_err(|e| anyhow!("semiclassical: {e}"))
    }

    /// Checks that do not depend on the mode being run.
    pub fn validate(&self) -> Result<()> {
        self.dimer_params()?;
        if self.system.cutoff < 1 {
            bail!("system.cutoff must be at least 1");
        }
        let c = self.system.cutoff;
        if self.initial_state.n_l > c || self.initial_state.n_r > c {
            bail!(
                "initial_state ({}, {}) lies outside cutoff {c}",
                self.initial_state.n_l,
                self.initial_state.n_r
            );
        }
        self.time_grid.build()?;
        match self.output.format.as_str() {
            "csv" | "json" => {}
            other => bail!("output.format must be `csv` or `json`, got `{other}`"),
        }
        match self.dynamics.fit.as_str() {
            "envelope" | "log-slope" | "none" => {}
            other => bail!("dynamics.fit must be `envelope`, `log-slope` or `none`, got `{other}`"),
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        if self.sweep.values.is_empty() {
            bail!("sweep.values must not be empty");
        }
        if !self.sweep.values.iter().all(|v| v.is_finite()) {
            bail!("sweep.values must be finite");
        }
        match self.sweep.target.as_str() {
            "dynamics" | "steady" | "greens" | "semiclassical" => {}
            other => bail!(
                "sweep.target must be one of dynamics|steady|greens|semiclassical, got `{other}`"
            ),
        }
        // the parameter path must resolve: try the first value on a scratch copy
        let mut scratch = self.clone();
        let probe = format!("{}", self.sweep.values[0]);
        scratch
            .set(&self.sweep.parameter, &probe)
            .map_err(|e| anyhow!("sweep.parameter `{}`: {e}", self.sweep.parameter))?;
        Ok(())
    }
}
