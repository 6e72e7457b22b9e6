//! Simulator and codec for a coded-access micromirror grating
//! spectrometer.
//!
//! The pipeline runs scene → grating/pixel binning → modulation plan →
//! detector and ADC → decoder:
//!
//! * [`scene`] sources and test filters,
//! * [`grating`] dispersion onto the mirror array and pixel binning,
//! * [`codebook`], [`mode`], [`plan`] Walsh codes and per-mode schedules,
//! * [`detector`] photodetector, noise and ADC,
//! * [`tone`], [`decode`] FFT tone extraction and spectrum recovery,
//! * [`analysis`] response normalization, FWHM, dynamic-range sweeps,
//! * [`experiment`] configuration files and end-to-end runs.

pub mod analysis;
pub mod codebook;
pub mod decode;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod grating;
pub mod mode;
pub mod plan;
pub mod scene;
pub mod seeds;
pub mod tone;

pub use codebook::{sylvester_codebook, Codebook};
pub use decode::{decode_cdma, decode_stream, BinEstimate, RecoveredSpectrum};
pub use detector::{calibrate_noise_floor, detect, AdcConfig, DetectorConfig, SampleStream};
pub use error::{CaosError, Result};
pub use grating::{bin_powers, paraxial_width, GratingMap, PixelLayout};
pub use mode::{encoding_time, Mode, ModeConfig};
pub use plan::{build_plan, ModulationPlan};
pub use scene::{apply_filter, blackbody_scene, FilterModel, SpectralScene};
pub use tone::{fft_processing_gain_db, fft_tone_amplitude};
