//! Experiment configuration and end-to-end runs.

mod config;
pub mod output;
pub mod presets;

pub use config::{ExperimentConfig, ModeSection, OpticsSection, OutputSection, SceneSection, SourceModel, SweepSection};

use crate::codebook::{sylvester_codebook, Codebook};
use crate::decode::{decode_stream, RecoveredSpectrum};
use crate::detector::{detect, DetectorConfig, SampleStream};
use crate::error::{CaosError, Result};
use crate::grating::bin_powers;
use crate::mode::ModeConfig;
use crate::plan::{build_plan, ModulationPlan};
use crate::scene::{apply_filter, FilterModel, SpectralScene};
use crate::seeds;

/// A validated configuration with its codebook and plan built.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    mode: ModeConfig,
    codebook: Codebook,
    plan: ModulationPlan,
    source: SpectralScene,
    centers: Vec<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mode = config.mode_config()?;
        // FM-TDMA never reads the codebook
        let order = if mode.mode.is_multiplexed() { mode.code_length } else { 2 };
        let codebook = sylvester_codebook(order)?;
        let plan = build_plan(&mode, &config.optics.layout, &codebook)?;
        let source = config.scene.source.build()?;
        let centers = config.optics.layout.centers(&config.optics.grating);
        Ok(Self {
            config,
            mode,
            codebook,
            plan,
            source,
            centers,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn mode_config(&self) -> &ModeConfig {
        &self.mode
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn plan(&self) -> &ModulationPlan {
        &self.plan
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn pixel_count(&self) -> usize {
        self.centers.len()
    }

    /// Source with the configured test sample and `od` of neutral density.
    pub fn sample_scene(&self, od: f64) -> Result<SpectralScene> {
        let mut scene = self.source.clone();
        for f in &self.config.scene.filters {
            scene = apply_filter(&scene, f)?;
        }
        if od != 0.0 {
            scene = apply_filter(&scene, &FilterModel::neutral_density(od))?;
        }
        Ok(scene)
    }

    /// Optical power on each pixel for `scene`.
    pub fn bin_powers(&self, scene: &SpectralScene) -> Result<Vec<f64>> {
        bin_powers(
            scene,
            &self.config.optics.grating,
            &self.config.optics.layout,
            self.config.optics.blur_fwhm_nm,
        )
    }

    /// Pixel powers of the bare source.
    pub fn reference_powers(&self) -> Result<Vec<f64>> {
        self.bin_powers(&self.source)
    }

    /// Detector stream for one acquisition of `powers`.
    pub fn record(&self, powers: &[f64], seed: u64) -> Result<SampleStream> {
        let det = DetectorConfig {
            rng_seed: seed,
            ..self.config.detector.clone()
        };
        detect(&self.plan, powers, &det, &self.config.adc)
    }

    /// Decode a recorded stream back to watts per pixel.
    pub fn decode(&self, stream: &SampleStream) -> Result<RecoveredSpectrum> {
        let vpw = self.config.detector.volts_per_watt();
        if !(vpw > 0.0) {
            return Err(CaosError::Config("detector has zero responsivity or gain".into()));
        }
        decode_stream(stream, &self.mode, &self.codebook)?
            .scaled(1.0 / vpw)
            .with_centers(&self.centers)
    }

    /// Encode, detect and decode `powers` with detector seed `seed`.
    pub fn acquire(&self, powers: &[f64], seed: u64) -> Result<RecoveredSpectrum> {
        self.decode(&self.record(powers, seed)?)
    }

    /// Seed of trial `trial` in group `group`, from the sweep master seed.
    pub fn seed(&self, group: u64, trial: u64) -> u64 {
        seeds::derive(self.config.sweep.master_seed, group, trial)
    }
}

/// Seed groups used by the runs in this crate. OD point `j` of a sweep
/// uses group `SWEEP_GROUP + j`.
pub mod groups {
    pub const SAMPLE: u64 = 0;
    pub const RESPONSE: u64 = 1;
    pub const CALIBRATION: u64 = 2;
    pub const SWEEP_GROUP: u64 = 16;
}
