//! Figure reproductions: system response and normalization, FWHM,
//! dynamic-range sweeps, FFT gain and the calibration searches used to
//! build the presets.

mod calibrate;
mod fwhm;
mod gain;
mod response;
mod sweep;

pub use calibrate::{calibrate_blur, calibrate_gain, noiseless_fwhm, target_snr};
pub use fwhm::measure_fwhm;
pub use gain::{fft_gain_monte_carlo, FftGainMeasurement};
pub use response::{measure_system_response, normalize, SystemResponse};
pub use sweep::{dr_sweep, linear_fit, DrSweepResult, LinearFit, SweepPoint};

use crate::decode::RecoveredSpectrum;
use crate::error::Result;
use crate::experiment::{groups, Experiment};
use crate::mode::encoding_time;

/// One simulated measurement of the configured sample, normalized by a
/// separate reference acquisition.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub truth: Vec<f64>,
    pub response: SystemResponse,
    pub recovered: RecoveredSpectrum,
    pub normalized: RecoveredSpectrum,
    pub fwhm_nm: Option<f64>,
    pub encoding_time_s: f64,
}

/// Reference and sample acquisitions of the configured scene.
pub fn simulate(exp: &Experiment) -> Result<Simulation> {
    let response = measure_system_response(exp, exp.seed(groups::RESPONSE, 0))?;
    let truth = exp.bin_powers(&exp.sample_scene(exp.config().scene.od)?)?;
    let recovered = exp.acquire(&truth, exp.seed(groups::SAMPLE, 0))?;
    let normalized = normalize(&recovered, &response)?;
    let fwhm_nm = measure_fwhm(&normalized).ok();
    Ok(Simulation {
        truth,
        response,
        recovered,
        normalized,
        fwhm_nm,
        encoding_time_s: encoding_time(exp.mode_config(), exp.pixel_count()),
    })
}
