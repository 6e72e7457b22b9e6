//! TOML experiment files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{AdcConfig, DetectorConfig};
use crate::error::{CaosError, Result};
use crate::grating::{GratingMap, PixelLayout};
use crate::mode::{Mode, ModeConfig};
use crate::scene::{blackbody_scene, FilterModel, SpectralScene};

use super::presets;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub scene: SceneSection,
    #[serde(default)]
    pub optics: OpticsSection,
    pub mode: ModeSection,
    pub detector: DetectorConfig,
    pub adc: AdcConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceModel {
    Blackbody {
        temperature_k: f64,
        lambda_min_nm: f64,
        lambda_max_nm: f64,
        #[serde(default = "default_grid_step")]
        grid_step_nm: f64,
        total_power_w: f64,
    },
    Flat {
        lambda_min_nm: f64,
        lambda_max_nm: f64,
        #[serde(default = "default_grid_step")]
        grid_step_nm: f64,
        density_w_per_nm: f64,
    },
}

fn default_grid_step() -> f64 {
    0.1
}

impl SourceModel {
    pub fn build(&self) -> Result<SpectralScene> {
        match *self {
            SourceModel::Blackbody {
                temperature_k,
                lambda_min_nm,
                lambda_max_nm,
                grid_step_nm,
                total_power_w,
            } => blackbody_scene(temperature_k, lambda_min_nm, lambda_max_nm, grid_step_nm, total_power_w),
            SourceModel::Flat {
                lambda_min_nm,
                lambda_max_nm,
                grid_step_nm,
                density_w_per_nm,
            } => SpectralScene::flat(lambda_min_nm, lambda_max_nm, grid_step_nm, density_w_per_nm),
        }
    }

    /// Multiply the source power by `factor`.
    pub fn scale(&mut self, factor: f64) {
        match self {
            SourceModel::Blackbody { total_power_w, .. } => *total_power_w *= factor,
            SourceModel::Flat { density_w_per_nm, .. } => *density_w_per_nm *= factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub source: SourceModel,
    /// Test sample placed in the beam. Empty for a reference acquisition.
    #[serde(default)]
    pub filters: Vec<FilterModel>,
    /// Neutral-density attenuation added to the sample. Sweeps replace it.
    #[serde(default)]
    pub od: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    #[serde(default)]
    pub grating: GratingMap,
    #[serde(default)]
    pub layout: PixelLayout,
    /// Gaussian instrument blur, nm FWHM. Zero disables it.
    #[serde(default)]
    pub blur_fwhm_nm: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self {
            grating: GratingMap::default(),
            layout: PixelLayout::default(),
            blur_fwhm_nm: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub mode: Mode,
    #[serde(default = "default_code_length")]
    pub code_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_rate_hz: Option<f64>,
    /// FM-CDMA carrier as a multiple of the bit rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_ratio: Option<u32>,
    /// FM-TDMA carrier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_duration_s: Option<f64>,
    /// Must equal the ADC rate when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    /// Defaults to rows 1..=M.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_rows: Option<Vec<usize>>,
    /// Sample rate used by `--full-scale` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale_sample_rate_hz: Option<f64>,
}

fn default_code_length() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub od_start: f64,
    #[serde(default = "default_od_stop")]
    pub od_stop: f64,
    #[serde(default = "default_od_step")]
    pub od_step: f64,
    /// Explicit OD grid; overrides start/stop/step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ods: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_threshold")]
    pub snr_threshold: f64,
    /// Allowed distance between the recovered and true peak pixel.
    #[serde(default = "default_peak_tolerance")]
    pub peak_tolerance: usize,
}

fn default_od_stop() -> f64 {
    5.0
}
fn default_od_step() -> f64 {
    0.1
}
fn default_trials() -> usize {
    20
}
fn default_threshold() -> f64 {
    1.2
}
fn default_peak_tolerance() -> usize {
    1
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            od_start: 0.0,
            od_stop: default_od_stop(),
            od_step: default_od_step(),
            ods: None,
            trials: default_trials(),
            master_seed: 0,
            snr_threshold: default_threshold(),
            peak_tolerance: default_peak_tolerance(),
        }
    }
}

impl SweepSection {
    /// OD grid, rounded to 1e-9 so printed values stay short.
    pub fn od_values(&self) -> Result<Vec<f64>> {
        let ods = match &self.ods {
            Some(v) => v.clone(),
            None => {
                if !(self.od_step > 0.0) || !(self.od_stop >= self.od_start) {
                    return Err(CaosError::Config(format!(
                        "sweep needs od_step > 0 and od_stop >= od_start, got {}..{} step {}",
                        self.od_start, self.od_stop, self.od_step
                    )));
                }
                let n = ((self.od_stop - self.od_start) / self.od_step + 1e-9).floor() as usize;
                (0..=n)
                    .map(|k| ((self.od_start + k as f64 * self.od_step) * 1e9).round() / 1e9)
                    .collect()
            }
        };
        if ods.is_empty() {
            return Err(CaosError::Config("sweep has no OD values".into()));
        }
        if ods.iter().any(|od| !od.is_finite() || *od < 0.0) {
            return Err(CaosError::Config("OD values must be finite and >= 0".into()));
        }
        if ods.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CaosError::Config("OD values must be strictly increasing".into()));
        }
        Ok(ods)
    }

    pub fn validate(&self) -> Result<()> {
        self.od_values()?;
        if self.trials == 0 {
            return Err(CaosError::Config("sweep needs at least one trial".into()));
        }
        if !(self.snr_threshold > 0.0) || !self.snr_threshold.is_finite() {
            return Err(CaosError::Config("snr_threshold must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// File name of the spectrum written by `simulate`.
    #[serde(default = "default_spectrum_file")]
    pub spectrum_file: String,
}

fn default_dir() -> String {
    "out".into()
}
fn default_spectrum_file() -> String {
    "spectrum.csv".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            spectrum_file: default_spectrum_file(),
        }
    }
}

impl ExperimentConfig {
    /// Parse and fully validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a file, or a bundled preset when `name` is not a file.
    pub fn load(name: &str) -> Result<Self> {
        let path = Path::new(name);
        if path.is_file() {
            let text = std::fs::read_to_string(path)?;
            return Self::from_toml_str(&text);
        }
        match presets::get(name) {
            Some(text) => Self::from_toml_str(text),
            None => Err(CaosError::Config(format!(
                "'{name}' is neither a file nor a preset ({})",
                presets::NAMES.join(", ")
            ))),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cross-field checks, then every module-level check.
    pub fn validate(&self) -> Result<()> {
        let source = self.scene.source.build()?;
        for f in &self.scene.filters {
            f.validate()?;
        }
        if !(self.scene.od >= 0.0) || !self.scene.od.is_finite() {
            return Err(CaosError::Config(format!("scene od must be >= 0, got {}", self.scene.od)));
        }
        let map = &self.optics.grating;
        map.validate()?;
        self.optics.layout.validate(map)?;
        if source.lambda_min() > map.lambda_min || source.lambda_max() < map.lambda_max {
            return Err(CaosError::Config(format!(
                "source covers {}..{} nm but the grating maps {}..{} nm",
                source.lambda_min(),
                source.lambda_max(),
                map.lambda_min,
                map.lambda_max
            )));
        }
        if !(self.optics.blur_fwhm_nm >= 0.0) || !self.optics.blur_fwhm_nm.is_finite() {
            return Err(CaosError::Config("blur_fwhm_nm must be >= 0".into()));
        }
        self.detector.validate()?;
        self.adc.validate()?;
        self.mode_config()?;
        self.sweep.validate()?;
        Ok(())
    }

    /// Resolve the mode section against the ADC rate and pixel count.
    pub fn mode_config(&self) -> Result<ModeConfig> {
        let m = &self.mode;
        let f_s = self.adc.sample_rate;
        if let Some(rate) = m.sample_rate_hz {
            if (rate - f_s).abs() > 1e-9 * f_s {
                return Err(CaosError::Config(format!(
                    "mode sample rate {rate} Hz differs from the ADC rate {f_s} Hz"
                )));
            }
        }
        let pixels = self.optics.layout.pixel_count;
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| CaosError::Config(format!("{} mode needs {what}", m.mode)))
        };
        if m.mode.is_multiplexed() {
            let w = m.code_length;
            if w >= 2 && pixels > w - 1 {
                return Err(CaosError::Capacity(format!(
                    "{pixels} pixels exceed the {} usable codes of length {w}",
                    w - 1
                )));
            }
        }
        let rows = || {
            m.assigned_rows
                .clone()
                .unwrap_or_else(|| ModeConfig::sequential_rows(pixels))
        };
        let cfg = match m.mode {
            Mode::Cdma => ModeConfig::cdma(m.code_length, need(m.bit_rate_hz, "bit_rate_hz")?, f_s, rows())?,
            Mode::FmCdma => {
                let p = m
                    .carrier_ratio
                    .ok_or_else(|| CaosError::Config("fm-cdma mode needs carrier_ratio".into()))?;
                ModeConfig::fm_cdma(m.code_length, need(m.bit_rate_hz, "bit_rate_hz")?, p, f_s, rows())?
            }
            Mode::FmTdma => ModeConfig::fm_tdma(
                need(m.carrier_hz, "carrier_hz")?,
                f_s,
                need(m.slot_duration_s, "slot_duration_s")?,
            )?,
        };
        if cfg.mode.is_multiplexed() && cfg.assigned_rows.len() != pixels {
            return Err(CaosError::Config(format!(
                "{} assigned rows for {pixels} pixels",
                cfg.assigned_rows.len()
            )));
        }
        Ok(cfg)
    }

    /// Copy running at the full-scale sample rate, if one is configured.
    pub fn at_full_scale(&self) -> Result<Self> {
        let rate = self.mode.full_scale_sample_rate_hz.ok_or_else(|| {
            CaosError::Config(format!("config '{}' has no full_scale_sample_rate_hz", self.name))
        })?;
        let mut cfg = self.clone();
        cfg.adc.sample_rate = rate;
        if cfg.mode.sample_rate_hz.is_some() {
            cfg.mode.sample_rate_hz = Some(rate);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
