//! Derives the detector and source constants frozen into the bundled
//! presets. Run with `cargo run --release -p caos-core --example
//! calibrate_presets` and copy the printed values into `presets/*.toml`.
//!
//! Order matters: the blur sets the pixel powers, the source power sets
//! the FM-TDMA crossing, which fixes the noise density, which in turn
//! fixes the gain of the code-division modes.

use caos_core::analysis::{calibrate_blur, calibrate_gain, noiseless_fwhm, target_snr};
use caos_core::detector::calibrate_noise_floor;
use caos_core::experiment::{Experiment, ExperimentConfig};

/// Optical power at which FM-TDMA reaches SNR 1.2.
const FLOOR_POWER: f64 = 10.1e-12;
/// OD of the FM-TDMA crossing, placed midway between grid points.
const TDMA_OD: f64 = 4.85;
/// OD of the CDMA crossing.
const CDMA_OD: f64 = 1.45;
const SNR: f64 = 1.2;

fn main() -> caos_core::Result<()> {
    let mut cdma = ExperimentConfig::load("cdma_dr")?;
    let mut tdma = ExperimentConfig::load("fig5_fmtdma")?;

    println!("fwhm_blur_off_nm = {}", noiseless_fwhm(&cdma, 0.0)?);
    let blur = calibrate_blur(&cdma, 16.3)?;
    println!("blur_fwhm_nm = {blur}");
    cdma.optics.blur_fwhm_nm = blur;
    tdma.optics.blur_fwhm_nm = blur;

    let exp = Experiment::new(tdma.clone())?;
    let powers = exp.bin_powers(&exp.sample_scene(0.0)?)?;
    let target = (0..powers.len()).max_by(|&a, &b| powers[a].total_cmp(&powers[b])).unwrap();
    let p0 = FLOOR_POWER * 10f64.powf(TDMA_OD);
    tdma.scene.source.scale(p0 / powers[target]);
    cdma.scene.source.scale(p0 / powers[target]);
    println!("total_power_w = {:?}", tdma.scene.source);
    println!("tdma_target_pixel = {target}, p0_w = {p0}");

    let mode = tdma.mode_config()?;
    let det = &mut tdma.detector;
    det.transimpedance_gain = 0.5 * det.saturation_voltage / (det.responsivity * p0);
    println!("tdma_gain = {}", det.transimpedance_gain);
    let eta = calibrate_noise_floor(det, &tdma.adc, FLOOR_POWER, SNR, &mode, 1000)?;
    det.noise_floor = eta;
    println!("noise_floor = {eta}");

    cdma.detector.noise_floor = eta;
    let gain = calibrate_gain(&cdma, CDMA_OD, SNR, 400)?;
    cdma.detector.transimpedance_gain = gain;
    println!("cdma_gain = {gain}");

    let mut fm = ExperimentConfig::load("fig4_fmcdma")?;
    fm.scene.source = cdma.scene.source.clone();
    fm.optics.blur_fwhm_nm = blur;
    fm.detector = cdma.detector.clone();
    for od in [2.3, 2.5, 2.7] {
        println!("fmcdma_snr_at_od_{od} = {}", target_snr(&Experiment::new(fm.clone())?, od, 20)?);
    }

    let mut resp = ExperimentConfig::load("fig2_response")?;
    resp.scene.source = cdma.scene.source.clone();
    resp.optics.blur_fwhm_nm = blur;
    let reference: f64 = Experiment::new(resp.clone())?.reference_powers()?.iter().sum();
    let d = &resp.detector;
    println!(
        "response_gain = {}",
        0.7 * d.saturation_voltage / (d.responsivity * reference)
    );

    // silicon photodiode: same on-level, 16 dB more noise
    let r_si = 0.4;
    println!("silicon_gain = {}", 0.5 * tdma.detector.saturation_voltage / (r_si * p0));
    println!("silicon_noise_floor = {}", eta * 10f64.powf(16.0 / 20.0));
    Ok(())
}
