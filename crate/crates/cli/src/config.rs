//! Experiment configuration, read from a single JSON document.

use std::path::{Path, PathBuf};

use entropic_orl::{model_win, AlgoConfig, FiniteMdp64, GammaMode, RiskParams, VaConfig};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Named environment builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Environment {
    ModelWin,
}

impl Environment {
    pub fn label(&self) -> &'static str {
        match self {
            Self::ModelWin => "model_win",
        }
    }

    pub fn build(&self, horizon: usize) -> Result<FiniteMdp64, HarnessError> {
        match self {
            Self::ModelWin => Ok(model_win(horizon)?),
        }
    }

    pub fn from_label(label: &str) -> Result<Self, HarnessError> {
        match label {
            "model_win" => Ok(Self::ModelWin),
            other => Err(HarnessError::Validation(format!(
                "unknown environment `{other}` (known: model_win)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rspvi,
    VaRspvi,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Self::Rspvi => "rspvi",
            Self::VaRspvi => "va_rspvi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaModeName {
    Thm1,
    Thm2,
    Thm3,
    Fixed,
}

/// Algorithm hyperparameters; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub lambda: Option<f64>,
    /// Defaults to `thm2` for RSPVI and `thm3` for VA-RSPVI.
    pub gamma_mode: Option<GammaModeName>,
    /// Required with `gamma_mode = "fixed"`.
    pub gamma: Option<f64>,
    pub gamma_constant: f64,
    pub delta: f64,
    pub sigma_floor: Option<f64>,
    pub aux_lambda: Option<f64>,
}

impl Default for Overrides {
    fn default() -> Self {
        Self {
            lambda: None,
            gamma_mode: None,
            gamma: None,
            gamma_constant: 1.0,
            delta: 0.1,
            sigma_floor: None,
            aux_lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// Per-trial rows.
    pub csv: Option<PathBuf>,
    /// Per-cell summary.
    pub summary_csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: Environment,
    pub algorithm: Algorithm,
    pub betas: Vec<f64>,
    pub horizons: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub output: OutputPaths,
    /// Worker threads; falls back to `ENTROPIC_ORL_WORKERS`, then to the number of CPUs.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Record per-trial wall-clock seconds; when false the column holds 0.
    #[serde(default)]
    pub record_wallclock: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.betas.is_empty() || self.horizons.is_empty() || self.k_grid.is_empty() {
            return bad("betas, horizons and k_grid must be nonempty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.k_grid[0] == 0 || self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "k_grid must be positive, distinct and increasing, got {:?}",
                self.k_grid
            ));
        }
        if self.algorithm == Algorithm::VaRspvi && self.k_grid[0] < 2 {
            return bad("va_rspvi splits each dataset in half and needs K ≥ 2".into());
        }
        if has_duplicates(&self.horizons) {
            return bad(format!(
                "horizons must be distinct, got {:?}",
                self.horizons
            ));
        }
        if self
            .betas
            .iter()
            .enumerate()
            .any(|(i, b)| self.betas[..i].contains(b))
        {
            return bad(format!("betas must be distinct, got {:?}", self.betas));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        for &beta in &self.betas {
            for &h in &self.horizons {
                RiskParams::new(beta, h)
                    .map_err(|e| HarnessError::Config(format!("β={beta}, H={h}: {e}")))?;
            }
        }
        let o = &self.overrides;
        if o.gamma_mode == Some(GammaModeName::Fixed) && o.gamma.is_none() {
            return bad("gamma_mode \"fixed\" needs a gamma value".into());
        }
        if o.gamma.is_some() && o.gamma_mode != Some(GammaModeName::Fixed) {
            return bad("gamma is only used with gamma_mode \"fixed\"".into());
        }
        for (name, v) in [("sigma_floor", o.sigma_floor), ("aux_lambda", o.aux_lambda)] {
            if v.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
                return bad(format!("{name} must be positive"));
            }
        }
        let checked = match self.algorithm {
            Algorithm::Rspvi => self.rspvi_config().validate(),
            Algorithm::VaRspvi => self
                .va_config()
                .aux_config
                .validate()
                .and(self.rspvi_like_va().validate()),
        };
        checked.map_err(|e| HarnessError::Config(e.to_string()))
    }

    fn gamma_mode(&self, default: GammaMode<f64>) -> GammaMode<f64> {
        match self.overrides.gamma_mode {
            None => default,
            Some(GammaModeName::Thm1) => GammaMode::Thm1,
            Some(GammaModeName::Thm2) => GammaMode::Thm2,
            Some(GammaModeName::Thm3) => GammaMode::Thm3,
            Some(GammaModeName::Fixed) => GammaMode::Fixed(self.overrides.gamma.unwrap_or(0.0)),
        }
    }

    pub fn rspvi_config(&self) -> AlgoConfig<f64> {
        AlgoConfig {
            lambda: self.overrides.lambda,
            gamma: self.gamma_mode(GammaMode::Thm2),
            delta: self.overrides.delta,
            gamma_constant: self.overrides.gamma_constant,
        }
    }

    pub fn va_config(&self) -> VaConfig<f64> {
        VaConfig {
            lambda: self.overrides.lambda,
            gamma: self.gamma_mode(GammaMode::Thm3),
            delta: self.overrides.delta,
            gamma_constant: self.overrides.gamma_constant,
            sigma_floor: self.overrides.sigma_floor,
            aux_lambda: self.overrides.aux_lambda,
            aux_config: AlgoConfig::default(),
        }
    }

    fn rspvi_like_va(&self) -> AlgoConfig<f64> {
        let va = self.va_config();
        AlgoConfig {
            lambda: va.lambda,
            gamma: va.gamma,
            delta: va.delta,
            gamma_constant: va.gamma_constant,
        }
    }

    /// Number of result rows the configuration produces.
    pub fn row_count(&self) -> usize {
        self.betas.len() * self.horizons.len() * self.k_grid.len() * self.trials
    }

    /// Moves every output file into `dir`, keeping its file name.
    pub fn with_output_dir(mut self, dir: &Path) -> Self {
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                *path = dir.join(path.file_name().unwrap_or(path.as_os_str()));
            }
        };
        rebase(&mut self.output.csv);
        rebase(&mut self.output.summary_csv);
        rebase(&mut self.output.svg);
        self
    }
}

fn has_duplicates(xs: &[usize]) -> bool {
    xs.iter().enumerate().any(|(i, x)| xs[..i].contains(x))
}
