use crate::decode::RecoveredSpectrum;
use crate::error::{CaosError, Result};
use crate::experiment::{groups, Experiment, ExperimentConfig};

use super::fwhm::measure_fwhm;
use super::response::{normalize, SystemResponse};

/// FWHM of the normalized, noise-free pixel powers of the configured
/// sample at instrument blur `blur_fwhm_nm`.
pub fn noiseless_fwhm(config: &ExperimentConfig, blur_fwhm_nm: f64) -> Result<f64> {
    let mut cfg = config.clone();
    cfg.optics.blur_fwhm_nm = blur_fwhm_nm;
    let exp = Experiment::new(cfg)?;
    let sample = exp.bin_powers(&exp.sample_scene(0.0)?)?;
    let reference = SystemResponse::new(exp.reference_powers()?);
    let n = sample.len();
    let spectrum = RecoveredSpectrum::from_parts(&sample, &vec![f64::INFINITY; n]).with_centers(exp.centers())?;
    measure_fwhm(&normalize(&spectrum, &reference)?)
}

/// Blur FWHM at which the noise-free measured FWHM equals `target_nm`.
pub fn calibrate_blur(config: &ExperimentConfig, target_nm: f64) -> Result<f64> {
    let sharp = noiseless_fwhm(config, 0.0)?;
    if !(target_nm > sharp) {
        return Err(CaosError::Calibration(format!(
            "target FWHM {target_nm} nm is not above the unblurred {sharp:.3} nm"
        )));
    }
    let (mut lo, mut hi) = (0.0, target_nm);
    while noiseless_fwhm(config, hi)? < target_nm {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(CaosError::Calibration("blur search diverged".into()));
        }
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if noiseless_fwhm(config, mid)? < target_nm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean SNR of the brightest pixel at `od` over `trials` acquisitions
/// seeded from the calibration group.
pub fn target_snr(exp: &Experiment, od: f64, trials: usize) -> Result<f64> {
    let base = exp.bin_powers(&exp.sample_scene(0.0)?)?;
    let target = (0..base.len())
        .max_by(|&a, &b| base[a].total_cmp(&base[b]))
        .ok_or_else(|| CaosError::Measurement("no pixels".into()))?;
    let truth = exp.bin_powers(&exp.sample_scene(od)?)?;
    let mut total = 0.0;
    for t in 0..trials {
        total += exp.acquire(&truth, exp.seed(groups::CALIBRATION, t as u64))?.bins[target].snr;
    }
    Ok(total / trials as f64)
}

/// Transimpedance gain at which the brightest pixel decodes with mean SNR
/// `snr` after `od` of attenuation. Bisection in log gain with common
/// trial seeds.
pub fn calibrate_gain(config: &ExperimentConfig, od: f64, snr: f64, trials: usize) -> Result<f64> {
    if trials == 0 || !(snr > 0.0) {
        return Err(CaosError::Calibration("need trials > 0 and a positive target".into()));
    }
    let probe = |gain: f64| -> Result<f64> {
        let mut cfg = config.clone();
        cfg.detector.transimpedance_gain = gain;
        target_snr(&Experiment::new(cfg)?, od, trials)
    };
    let g0 = config.detector.transimpedance_gain;
    let s0 = probe(g0)?;
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(CaosError::Calibration(format!("starting SNR {s0} cannot be scaled")));
    }
    let guess = g0 * snr / s0;
    let (mut lo, mut hi) = (guess / 2.0, guess * 2.0);
    for _ in 0..20 {
        if probe(lo)? <= snr {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..20 {
        if probe(hi)? >= snr {
            break;
        }
        hi *= 2.0;
    }
    if !(probe(lo)? <= snr && probe(hi)? >= snr) {
        return Err(CaosError::Calibration(format!("SNR {snr} not bracketed")));
    }
    while hi / lo > 1.0 + 1e-4 {
        let mid = (lo * hi).sqrt();
        if probe(mid)? < snr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
